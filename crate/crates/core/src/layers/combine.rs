use super::LayerError;
use crate::tensor::{Tape, Var};
use serde::{Deserialize, Serialize};

/// How a node merges the outputs of its predecessors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombinerKind {
    Add,
    Mul,
    Concat,
}

impl CombinerKind {
    pub const ALL: [CombinerKind; 3] = [CombinerKind::Add, CombinerKind::Mul, CombinerKind::Concat];
}

/// Per-sample shape produced by combining inputs of the given per-sample
/// shapes. Every axis is zero-padded up to the largest extent; `Concat` then
/// stacks along the last axis.
pub fn combined_shape(shapes: &[Vec<usize>], kind: CombinerKind) -> Result<Vec<usize>, LayerError> {
    let first = shapes.first().ok_or(LayerError::EmptyCombine)?;
    if shapes.iter().any(|s| s.len() != first.len()) {
        return Err(LayerError::RankMismatch(shapes.to_vec()));
    }
    let rank = first.len();
    let mut out: Vec<usize> = (0..rank).map(|d| shapes.iter().map(|s| s[d]).max().unwrap()).collect();
    if kind == CombinerKind::Concat {
        out[rank - 1] = shapes.iter().map(|s| s[rank - 1]).sum();
    }
    Ok(out)
}

/// Combines batched inputs (leading batch axis, equal across inputs).
pub fn combine(tape: &mut Tape, inputs: &[Var], kind: CombinerKind) -> Result<Var, LayerError> {
    let shapes: Vec<Vec<usize>> = inputs.iter().map(|&v| tape.shape(v).to_vec()).collect();
    let first = shapes.first().ok_or(LayerError::EmptyCombine)?;
    if shapes.iter().any(|s| s.len() != first.len() || s[0] != first[0]) {
        return Err(LayerError::RankMismatch(shapes.clone()));
    }
    if inputs.len() == 1 {
        return Ok(inputs[0]);
    }
    let target = combined_shape(&shapes, kind)?;
    let rank = target.len();
    match kind {
        CombinerKind::Add | CombinerKind::Mul => {
            let mut acc = tape.pad_to(inputs[0], &target)?;
            for &v in &inputs[1..] {
                let p = tape.pad_to(v, &target)?;
                acc = match kind {
                    CombinerKind::Add => tape.add(acc, p)?,
                    _ => tape.mul(acc, p)?,
                };
            }
            Ok(acc)
        }
        CombinerKind::Concat => {
            let mut parts = Vec::with_capacity(inputs.len());
            for (&v, s) in inputs.iter().zip(&shapes) {
                let mut t = target.clone();
                t[rank - 1] = s[rank - 1];
                parts.push(tape.pad_to(v, &t)?);
            }
            Ok(tape.concat_last(&parts)?)
        }
    }
}
