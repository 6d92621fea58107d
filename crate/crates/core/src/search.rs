//! Steady-state evolutionary search over genotypes and its random-search
//! baseline.
//!
//! A single coordinator owns the population and the event log. Workers get
//! immutable `(id, genotype)` jobs and send back [`Individual`]s over a
//! channel; the coordinator applies the replacement rule in completion order
//! and immediately refills the free worker with a new offspring. With one
//! worker the loop runs inline and is a pure function of the configuration.

use crate::data::LoadDataset;
use crate::genotype::{random_genotype_with, Genotype, M_INIT_MAX};
use crate::trainer::{evaluate_candidate, Evaluation, TrainConfig};
use crate::variation::{crossover, mutate, tournament_index};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::sync::mpsc;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error("all {0} initial evaluations failed; first failure: {1}")]
    InitFailed(usize, String),
    #[error("worker pool stopped unexpectedly")]
    Worker,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub id: u64,
    pub genotype: Genotype,
    /// Validation MAPE; `+inf` marks a failed evaluation.
    pub fitness: f64,
    pub selected: Vec<usize>,
    pub eval_seconds: f64,
    /// Seconds since the run started, at completion.
    pub born_at: f64,
    pub evaluation: Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    /// Population size.
    pub k: usize,
    /// Offspring evaluations after initialization.
    pub b: usize,
    #[serde(default = "default_tournament")]
    pub tournament_size: usize,
    /// Global wall-clock budget in seconds, checked before each dispatch.
    #[serde(default = "default_time_budget")]
    pub time_budget: f64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_true")]
    pub use_crossover: bool,
    #[serde(default)]
    pub seed: u64,
    /// Upper bound on total nodes per DAG for random initial genotypes.
    #[serde(default = "default_m_init_max")]
    pub m_init_max: usize,
    /// Genotypes injected into the initial population.
    #[serde(skip)]
    pub seed_individuals: Vec<Genotype>,
}

fn default_tournament() -> usize {
    3
}
fn default_time_budget() -> f64 {
    86_400.0
}
fn default_workers() -> usize {
    1
}
fn default_true() -> bool {
    true
}
fn default_m_init_max() -> usize {
    M_INIT_MAX
}

impl SearchConfig {
    pub fn new(k: usize, b: usize, seed: u64) -> Self {
        SearchConfig {
            k,
            b,
            tournament_size: default_tournament().min(k),
            time_budget: default_time_budget(),
            workers: default_workers(),
            use_crossover: true,
            seed,
            m_init_max: default_m_init_max(),
            seed_individuals: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: String| Err(SearchError::Config(m));
        if self.k < 2 {
            return bad(format!("k must be >= 2, got {}", self.k));
        }
        if self.tournament_size < 1 || self.tournament_size > self.k {
            return bad(format!(
                "tournament_size must be in 1..={}, got {}",
                self.k, self.tournament_size
            ));
        }
        if self.workers < 1 {
            return bad("workers must be >= 1".into());
        }
        if !(self.time_budget > 0.0) {
            return bad("time_budget must be > 0".into());
        }
        if self.m_init_max < 2 {
            return bad("m_init_max must be >= 2".into());
        }
        if self.seed_individuals.len() > self.k {
            return bad(format!(
                "{} seed individuals exceed k = {}",
                self.seed_individuals.len(),
                self.k
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Init,
    Evaluated,
    Replaced,
    Rejected,
    Truncated,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Init => "init",
            EventKind::Evaluated => "evaluated",
            EventKind::Replaced => "replaced",
            EventKind::Rejected => "rejected",
            EventKind::Truncated => "truncated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchEvent {
    pub kind: EventKind,
    pub seconds: f64,
    pub candidate_id: u64,
    pub fitness: f64,
    pub best_so_far: f64,
}

/// Append-only event sequence; `best_so_far` only ever decreases.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchLog {
    events: Vec<SearchEvent>,
    best: Option<f64>,
}

impl SearchLog {
    pub fn events(&self) -> &[SearchEvent] {
        &self.events
    }

    pub fn best_so_far(&self) -> f64 {
        self.best.unwrap_or(f64::INFINITY)
    }

    fn push(&mut self, kind: EventKind, seconds: f64, ind: &Individual) {
        if matches!(kind, EventKind::Init | EventKind::Evaluated) {
            let b = self.best_so_far().min(ind.fitness);
            self.best = Some(b);
        }
        self.events.push(SearchEvent {
            kind,
            seconds,
            candidate_id: ind.id,
            fitness: ind.fitness,
            best_so_far: self.best_so_far(),
        });
    }

    /// Whether `best_so_far` never increases across the log.
    pub fn is_monotone(&self) -> bool {
        self.events.windows(2).all(|w| w[1].best_so_far <= w[0].best_so_far)
    }

    pub const CSV_HEADER: &'static str = "event,wall_seconds,candidate_id,fitness,best_so_far";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for e in &self.events {
            s.push_str(&format!(
                "{},{:.3},{},{},{}\n",
                e.kind.as_str(),
                e.seconds,
                e.candidate_id,
                e.fitness,
                e.best_so_far
            ));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best: Individual,
    pub population: Vec<Individual>,
    pub log: SearchLog,
    /// Every evaluated individual in completion order.
    pub evaluated: Vec<Individual>,
    /// The global time budget stopped dispatch before the budget `b` was spent.
    pub stopped_by_time: bool,
}

/// Replaces the worst member when `offspring` is strictly better; returns
/// the evicted individual.
pub fn replace_worst(population: &mut [Individual], offspring: Individual) -> Result<Individual, Individual> {
    let Some(worst) = worst_index(population) else {
        return Err(offspring);
    };
    if offspring.fitness < population[worst].fitness {
        Ok(std::mem::replace(&mut population[worst], offspring))
    } else {
        Err(offspring)
    }
}

fn worst_index(population: &[Individual]) -> Option<usize> {
    (0..population.len()).max_by(|&a, &b| population[a].fitness.total_cmp(&population[b].fitness).then(b.cmp(&a)))
}

fn best_of(individuals: &[Individual]) -> Option<&Individual> {
    individuals
        .iter()
        .min_by(|a, b| a.fitness.total_cmp(&b.fitness).then(a.id.cmp(&b.id)))
}

/// Evaluates jobs inline for one worker or on scoped threads otherwise.
struct Pool<'a> {
    data: &'a LoadDataset,
    train: &'a TrainConfig,
    start: Instant,
}

type Job = (u64, Genotype);

impl Pool<'_> {
    fn evaluate(&self, (id, genotype): Job) -> Individual {
        let evaluation = evaluate_candidate(&genotype, self.data, self.train);
        Individual {
            id,
            fitness: evaluation.fitness,
            selected: evaluation.selected.clone(),
            eval_seconds: evaluation.seconds,
            born_at: self.start.elapsed().as_secs_f64(),
            genotype,
            evaluation,
        }
    }

    /// Drives `initial` jobs, keeping at most `workers` evaluations in
    /// flight. `done` sees each result in completion order and may return a
    /// follow-up job.
    fn run(
        &self,
        workers: usize,
        initial: Vec<Job>,
        mut done: impl FnMut(Individual) -> Option<Job>,
    ) -> Result<(), SearchError> {
        let mut queue: VecDeque<Job> = initial.into();
        if workers == 1 {
            while let Some(job) = queue.pop_front() {
                if let Some(next) = done(self.evaluate(job)) {
                    queue.push_back(next);
                }
            }
            return Ok(());
        }
        std::thread::scope(|scope| {
            let (result_tx, result_rx) = mpsc::channel::<Individual>();
            let mut job_txs = Vec::with_capacity(workers);
            let mut free: Vec<usize> = Vec::new();
            let mut owner: Vec<(u64, usize)> = Vec::new();
            for w in 0..workers {
                let (tx, rx) = mpsc::channel::<Job>();
                let result_tx = result_tx.clone();
                scope.spawn(move || {
                    while let Ok(job) = rx.recv() {
                        if result_tx.send(self.evaluate(job)).is_err() {
                            break;
                        }
                    }
                });
                job_txs.push(tx);
                free.push(w);
            }
            drop(result_tx);
            free.reverse();
            let mut in_flight = 0usize;
            loop {
                while let (Some(&w), false) = (free.last(), queue.is_empty()) {
                    let job = queue.pop_front().expect("non-empty queue");
                    owner.push((job.0, w));
                    job_txs[w].send(job).map_err(|_| SearchError::Worker)?;
                    free.pop();
                    in_flight += 1;
                }
                if in_flight == 0 {
                    break;
                }
                let ind = result_rx.recv().map_err(|_| SearchError::Worker)?;
                in_flight -= 1;
                let slot = owner
                    .iter()
                    .position(|&(id, _)| id == ind.id)
                    .ok_or(SearchError::Worker)?;
                free.push(owner.swap_remove(slot).1);
                if let Some(next) = done(ind) {
                    queue.push_back(next);
                }
            }
            drop(job_txs);
            Ok(())
        })
    }
}

fn check_inputs(cfg: &SearchConfig, train: &TrainConfig, data: &LoadDataset) -> Result<(), SearchError> {
    cfg.validate()?;
    train.validate().map_err(SearchError::Config)?;
    data.split().map_err(|e| SearchError::Config(e.to_string()))?;
    for g in &cfg.seed_individuals {
        if g.h != data.h {
            return Err(SearchError::Config(format!(
                "seed genotype output width {} does not match H = {}",
                g.h, data.h
            )));
        }
    }
    Ok(())
}

/// Initial jobs: injected seeds first, random genotypes for the rest.
fn initial_jobs(cfg: &SearchConfig, h: usize, rng: &mut ChaCha8Rng, next_id: &mut u64) -> Vec<Job> {
    let mut jobs = Vec::with_capacity(cfg.k);
    for g in cfg.seed_individuals.iter().cloned() {
        jobs.push((*next_id, g));
        *next_id += 1;
    }
    while jobs.len() < cfg.k {
        jobs.push((*next_id, random_genotype_with(rng, h, cfg.m_init_max)));
        *next_id += 1;
    }
    jobs
}

/// Evaluates the initial population of exactly `k` individuals.
pub fn init_population(
    cfg: &SearchConfig,
    data: &LoadDataset,
    train: &TrainConfig,
) -> Result<(Vec<Individual>, SearchLog), SearchError> {
    check_inputs(cfg, train, data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut next_id = 0;
    let start = Instant::now();
    let pool = Pool { data, train, start };
    let mut population = Vec::with_capacity(cfg.k);
    let mut log = SearchLog::default();
    pool.run(cfg.workers, initial_jobs(cfg, data.h, &mut rng, &mut next_id), |ind| {
        log.push(EventKind::Init, start.elapsed().as_secs_f64(), &ind);
        population.push(ind);
        None
    })?;
    population.sort_by_key(|i| i.id);
    ensure_some_success(&population)?;
    Ok((population, log))
}

fn ensure_some_success(population: &[Individual]) -> Result<(), SearchError> {
    if population.iter().all(|i| !i.fitness.is_finite()) {
        let reason = population
            .first()
            .and_then(|i| i.evaluation.failure.clone())
            .unwrap_or_default();
        return Err(SearchError::InitFailed(population.len(), reason));
    }
    Ok(())
}

/// Two offspring from tournament-selected parents, by crossover then
/// mutation, or by mutation of parent copies.
fn breed(population: &[Individual], cfg: &SearchConfig, rng: &mut ChaCha8Rng) -> [Genotype; 2] {
    let fitness: Vec<f64> = population.iter().map(|i| i.fitness).collect();
    let pick = |rng: &mut ChaCha8Rng| {
        let i = tournament_index(&fitness, cfg.tournament_size, rng).expect("validated tournament size");
        &population[i].genotype
    };
    let (a, b) = (pick(rng), pick(rng));
    let (c, d) = if cfg.use_crossover {
        crossover(a, b, rng)
    } else {
        (a.clone(), b.clone())
    };
    [mutate(&c, rng), mutate(&d, rng)]
}

/// Asynchronous steady-state evolution: after initialization each free
/// worker receives a freshly bred offspring, and each completion is checked
/// against the current worst member.
pub fn ssea_run(cfg: &SearchConfig, data: &LoadDataset, train: &TrainConfig) -> Result<SearchResult, SearchError> {
    check_inputs(cfg, train, data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut next_id = 0u64;
    let start = Instant::now();
    let budget = Duration::from_secs_f64(cfg.time_budget.min(1e9));
    let pool = Pool { data, train, start };
    let now = || start.elapsed().as_secs_f64();

    let mut log = SearchLog::default();
    let mut population: Vec<Individual> = Vec::with_capacity(cfg.k);
    let mut evaluated = Vec::new();
    let init = initial_jobs(cfg, data.h, &mut rng, &mut next_id);
    pool.run(cfg.workers, init, |ind| {
        log.push(EventKind::Init, now(), &ind);
        if ind.evaluation.truncated {
            log.push(EventKind::Truncated, now(), &ind);
        }
        evaluated.push(ind.clone());
        population.push(ind);
        None
    })?;
    population.sort_by_key(|i| i.id);
    ensure_some_success(&population)?;

    let mut dispatched = 0usize;
    let mut stopped_by_time = false;
    let mut spare: Vec<Genotype> = Vec::new();
    let mut next_job = |population: &[Individual], rng: &mut ChaCha8Rng, next_id: &mut u64| -> Option<Job> {
        if dispatched >= cfg.b {
            return None;
        }
        if start.elapsed() >= budget {
            stopped_by_time = true;
            return None;
        }
        if spare.is_empty() {
            let [c, d] = breed(population, cfg, rng);
            spare.push(d);
            spare.push(c);
        }
        let g = spare.pop().expect("two offspring bred");
        dispatched += 1;
        *next_id += 1;
        Some((*next_id - 1, g))
    };

    let mut first = Vec::new();
    for _ in 0..cfg.workers {
        match next_job(&population, &mut rng, &mut next_id) {
            Some(job) => first.push(job),
            None => break,
        }
    }
    pool.run(cfg.workers, first, |ind| {
        log.push(EventKind::Evaluated, now(), &ind);
        if ind.evaluation.truncated {
            log.push(EventKind::Truncated, now(), &ind);
        }
        evaluated.push(ind.clone());
        match replace_worst(&mut population, ind) {
            Ok(_) => log.push(EventKind::Replaced, now(), evaluated.last().expect("just pushed")),
            Err(rejected) => log.push(EventKind::Rejected, now(), &rejected),
        }
        next_job(&population, &mut rng, &mut next_id)
    })?;

    let best = best_of(&evaluated).expect("non-empty population").clone();
    Ok(SearchResult {
        best,
        population,
        log,
        evaluated,
        stopped_by_time,
    })
}

/// `k + b` independent random genotypes under the same accounting.
pub fn random_search_run(
    cfg: &SearchConfig,
    data: &LoadDataset,
    train: &TrainConfig,
) -> Result<SearchResult, SearchError> {
    check_inputs(cfg, train, data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = Instant::now();
    let budget = Duration::from_secs_f64(cfg.time_budget.min(1e9));
    let pool = Pool { data, train, start };
    let mut log = SearchLog::default();
    let mut evaluated: Vec<Individual> = Vec::new();
    let mut next_id = 0u64;
    let total = cfg.k + cfg.b;
    let mut stopped_by_time = false;
    let mut dispatched = 0usize;
    let mut next_job = |rng: &mut ChaCha8Rng| -> Option<Job> {
        if dispatched >= total {
            return None;
        }
        if dispatched >= cfg.k && start.elapsed() >= budget {
            stopped_by_time = true;
            return None;
        }
        let g = if dispatched < cfg.seed_individuals.len() {
            cfg.seed_individuals[dispatched].clone()
        } else {
            random_genotype_with(rng, data.h, cfg.m_init_max)
        };
        dispatched += 1;
        next_id += 1;
        Some((next_id - 1, g))
    };
    let first: Vec<Job> = (0..cfg.workers).map_while(|_| next_job(&mut rng)).collect();
    pool.run(cfg.workers, first, |ind| {
        let kind = if (ind.id as usize) < cfg.k {
            EventKind::Init
        } else {
            EventKind::Evaluated
        };
        log.push(kind, start.elapsed().as_secs_f64(), &ind);
        if ind.evaluation.truncated {
            log.push(EventKind::Truncated, start.elapsed().as_secs_f64(), &ind);
        }
        evaluated.push(ind);
        next_job(&mut rng)
    })?;
    ensure_some_success(&evaluated)?;
    let best = best_of(&evaluated).expect("non-empty").clone();
    let mut population = evaluated.clone();
    population.sort_by(|a, b| a.fitness.total_cmp(&b.fitness).then(a.id.cmp(&b.id)));
    population.truncate(cfg.k);
    Ok(SearchResult {
        best,
        population,
        log,
        evaluated,
        stopped_by_time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{split_blocks, standardize, synth_generate, SynthConfig};
    use crate::genotype::cnn_mlp_seed;

    fn ind(id: u64, fitness: f64) -> Individual {
        let g = cnn_mlp_seed(2, 1);
        Individual {
            id,
            genotype: g,
            fitness,
            selected: vec![],
            eval_seconds: 0.0,
            born_at: id as f64,
            evaluation: Evaluation::failed(String::new(), 0.0),
        }
    }

    #[test]
    fn replacement_is_strict() {
        let mut pop = vec![ind(0, 1.0), ind(1, 3.0), ind(2, 2.0)];
        let evicted = replace_worst(&mut pop, ind(3, 2.5)).unwrap();
        assert_eq!(evicted.id, 1);
        assert_eq!(pop.iter().map(|i| i.id).collect::<Vec<_>>(), vec![0, 3, 2]);
        assert!(replace_worst(&mut pop, ind(4, 2.5)).is_err());
        assert!(replace_worst(&mut pop, ind(5, 9.0)).is_err());
        assert_eq!(pop.len(), 3);
    }

    #[test]
    fn failed_members_are_replaced_first() {
        let mut pop = vec![ind(0, f64::INFINITY), ind(1, 3.0)];
        assert_eq!(replace_worst(&mut pop, ind(2, 4.0)).unwrap().id, 0);
        let mut all_failed = vec![ind(0, f64::INFINITY), ind(1, f64::INFINITY)];
        assert!(replace_worst(&mut all_failed, ind(2, f64::INFINITY)).is_err());
    }

    #[test]
    fn log_best_is_monotone_and_ignores_non_evaluations() {
        let mut log = SearchLog::default();
        log.push(EventKind::Init, 0.0, &ind(0, 3.0));
        log.push(EventKind::Init, 0.1, &ind(1, f64::INFINITY));
        log.push(EventKind::Evaluated, 0.2, &ind(2, 1.0));
        log.push(EventKind::Replaced, 0.2, &ind(2, 1.0));
        log.push(EventKind::Evaluated, 0.3, &ind(3, 2.0));
        log.push(EventKind::Rejected, 0.3, &ind(3, 2.0));
        let best: Vec<f64> = log.events().iter().map(|e| e.best_so_far).collect();
        assert_eq!(best, vec![3.0, 3.0, 1.0, 1.0, 1.0, 1.0]);
        assert!(log.is_monotone());
        let csv = log.to_csv();
        assert!(csv.starts_with(SearchLog::CSV_HEADER));
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.contains("init,0.100,1,inf,3"));
    }

    #[test]
    fn config_validation() {
        assert!(SearchConfig::new(2, 0, 0).validate().is_ok());
        assert!(SearchConfig::new(1, 0, 0).validate().is_err());
        let mut c = SearchConfig::new(3, 0, 0);
        c.tournament_size = 4;
        assert!(c.validate().is_err());
        c.tournament_size = 3;
        c.workers = 0;
        assert!(c.validate().is_err());
        let toml_like: SearchConfig = serde_json::from_str(r#"{"k": 4, "b": 2}"#).unwrap();
        assert_eq!(toml_like.tournament_size, 3);
        assert!(serde_json::from_str::<SearchConfig>(r#"{"b": 2}"#).is_err());
    }

    fn tiny() -> (LoadDataset, TrainConfig) {
        let d = synth_generate(&SynthConfig {
            t: 40,
            h: 4,
            informative: 2,
            noise: 2,
            noise_level: 0.02,
            seed: 3,
        })
        .unwrap();
        let d = standardize(&split_blocks(d, (0.6, 0.2, 0.2)).unwrap()).unwrap().0;
        let t = TrainConfig {
            e_w: 1,
            e_theta: 2,
            cycles: 2,
            snapshots: 2,
            ..TrainConfig::default()
        };
        (d, t)
    }

    #[test]
    fn init_population_with_seed() {
        let (d, t) = tiny();
        let mut cfg = SearchConfig::new(4, 0, 1);
        cfg.seed_individuals = vec![cnn_mlp_seed(4, d.f)];
        let (pop, log) = init_population(&cfg, &d, &t).unwrap();
        assert_eq!(pop.len(), 4);
        assert_eq!(pop[0].genotype, cnn_mlp_seed(4, d.f));
        assert_eq!(log.events().len(), 4);
        assert!(pop.iter().all(|i| i.fitness > 0.0));
    }

    #[test]
    fn zero_budget_returns_best_initial() {
        let (d, t) = tiny();
        let r = ssea_run(&SearchConfig::new(3, 0, 2), &d, &t).unwrap();
        assert_eq!(r.evaluated.len(), 3);
        let min = r.population.iter().map(|i| i.fitness).fold(f64::INFINITY, f64::min);
        assert_eq!(r.best.fitness, min);
    }

    #[test]
    fn ssea_is_reproducible_and_keeps_size() {
        let (d, t) = tiny();
        let cfg = SearchConfig::new(3, 4, 5);
        let a = ssea_run(&cfg, &d, &t).unwrap();
        let b = ssea_run(&cfg, &d, &t).unwrap();
        assert_eq!(a.best.genotype.to_json(), b.best.genotype.to_json());
        assert_eq!(a.best.fitness, b.best.fitness);
        assert_eq!(a.evaluated.len(), 7);
        assert_eq!(a.population.len(), 3);
        assert!(a.log.is_monotone());
        let offspring = a.log.events().iter().filter(|e| e.kind == EventKind::Evaluated).count();
        let decided = a
            .log
            .events()
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Replaced | EventKind::Rejected))
            .count();
        assert_eq!((offspring, decided), (4, 4));
    }

    #[test]
    fn random_search_accounting() {
        let (d, t) = tiny();
        let cfg = SearchConfig::new(2, 3, 7);
        let r = random_search_run(&cfg, &d, &t).unwrap();
        assert_eq!(r.evaluated.len(), 5);
        let min = r.evaluated.iter().map(|i| i.fitness).fold(f64::INFINITY, f64::min);
        assert_eq!(r.best.fitness, min);
        assert_eq!(r.log.best_so_far(), min);
        let again = random_search_run(&cfg, &d, &t).unwrap();
        assert_eq!(again.best.genotype, r.best.genotype);
    }

    #[test]
    fn parallel_workers_keep_invariants() {
        let (d, t) = tiny();
        let mut cfg = SearchConfig::new(3, 5, 9);
        cfg.workers = 3;
        let r = ssea_run(&cfg, &d, &t).unwrap();
        assert_eq!(r.evaluated.len(), 8);
        assert_eq!(r.population.len(), 3);
        assert!(r.log.is_monotone());
        let mut ids: Vec<u64> = r.evaluated.iter().map(|i| i.id).collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn time_budget_stops_dispatch() {
        let (d, t) = tiny();
        let mut cfg = SearchConfig::new(2, 50, 0);
        cfg.time_budget = 1e-9;
        let r = ssea_run(&cfg, &d, &t).unwrap();
        assert!(r.stopped_by_time);
        assert_eq!(r.evaluated.len(), 2);
    }
}
