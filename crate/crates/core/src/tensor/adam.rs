use super::{Result, Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// A gradient held NaN or infinity; nothing was updated.
    SkippedNonFinite,
}

/// Adam with bias correction, one moment pair per parameter tensor.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    pub fn new(params: &[Tensor], cfg: AdamConfig) -> Self {
        Adam {
            cfg,
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Vec<f64>], lr: f64) -> Result<StepOutcome> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(TensorError::Shape {
                op: "adam_step",
                lhs: vec![params.len(), self.m.len()],
                rhs: vec![grads.len()],
            });
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.len() != g.len() || p.len() != m.len() {
                return Err(TensorError::Shape {
                    op: "adam_step",
                    lhs: p.shape().to_vec(),
                    rhs: vec![g.len()],
                });
            }
        }
        if grads.iter().flatten().any(|g| !g.is_finite()) {
            return Ok(StepOutcome::SkippedNonFinite);
        }
        self.t += 1;
        let AdamConfig { beta1, beta2, eps } = self.cfg;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((w, &gi), mi), vi) in p.data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *w -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(StepOutcome::Applied)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![Tensor::from_vec(vec![1.0, -2.0])];
        let mut opt = Adam::new(&p, AdamConfig::default());
        assert_eq!(opt.step(&mut p, &[vec![0.0, 0.0]], 1e-3).unwrap(), StepOutcome::Applied);
        assert_eq!(p[0].data(), &[1.0, -2.0]);
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        for g in [0.3, -7.0, 1e-3] {
            let mut p = vec![Tensor::scalar(0.5)];
            let mut opt = Adam::new(&p, AdamConfig::default());
            opt.step(&mut p, &[vec![g]], 1e-2).unwrap();
            let moved = 0.5 - p[0].data()[0];
            assert!((moved.abs() - 1e-2).abs() < 1e-6, "{moved}");
            assert_eq!(moved.signum(), g.signum());
        }
    }

    #[test]
    fn non_finite_gradient_is_skipped() {
        let mut p = vec![Tensor::scalar(0.5)];
        let mut opt = Adam::new(&p, AdamConfig::default());
        let out = opt.step(&mut p, &[vec![f64::NAN]], 1e-2).unwrap();
        assert_eq!(out, StepOutcome::SkippedNonFinite);
        assert_eq!(p[0].data(), &[0.5]);
        assert_eq!(opt.steps(), 0);
    }

    #[test]
    fn trajectories_are_reproducible() {
        let run = || {
            let mut p = vec![Tensor::from_vec(vec![0.1, 0.2, 0.3])];
            let mut opt = Adam::new(&p, AdamConfig::default());
            for i in 0..50 {
                let g: Vec<f64> = p[0].data().iter().map(|w| (w * 3.0 + i as f64).sin()).collect();
                opt.step(&mut p, &[g], 1e-2).unwrap();
            }
            p[0].data().to_vec()
        };
        assert_eq!(run(), run());
    }
}
