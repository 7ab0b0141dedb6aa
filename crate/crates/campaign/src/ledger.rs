//! Cost accounting: per-stage evaluation counters and wall times, plus the
//! oracle-vs-surrogate crossover analysis.

use matscreen_core::potential::{EvalResult, Potential, PotentialError};
use matscreen_core::structure::Structure;
use serde::{Deserialize, Serialize};
use std::sync::{Arc, Mutex};
use std::time::Instant;

/// Monotone counters for one campaign. Counter updates go through a mutex
/// so the totals are exact under concurrency; wall times are advisory and
/// excluded from deterministic artifacts.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CostLedger {
    pub oracle_evaluations: u64,
    pub surrogate_evaluations: u64,
    pub training_runs: u64,
    pub oracle_wall_s: f64,
    pub surrogate_wall_s: f64,
    pub training_wall_s: f64,
}

impl CostLedger {
    pub fn oracle_unit_cost(&self) -> Option<f64> {
        (self.oracle_evaluations > 0).then(|| self.oracle_wall_s / self.oracle_evaluations as f64)
    }

    pub fn surrogate_unit_cost(&self) -> Option<f64> {
        (self.surrogate_evaluations > 0)
            .then(|| self.surrogate_wall_s / self.surrogate_evaluations as f64)
    }
}

/// Shared handle with serialized commits.
#[derive(Clone, Default)]
pub struct Ledger(Arc<Mutex<CostLedger>>);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Meter {
    Oracle,
    Surrogate,
}

impl Ledger {
    pub fn new() -> Self {
        Ledger::default()
    }

    pub fn record_eval(&self, meter: Meter, wall_s: f64) {
        let mut inner = self.0.lock().unwrap();
        match meter {
            Meter::Oracle => {
                inner.oracle_evaluations += 1;
                inner.oracle_wall_s += wall_s;
            }
            Meter::Surrogate => {
                inner.surrogate_evaluations += 1;
                inner.surrogate_wall_s += wall_s;
            }
        }
    }

    pub fn record_training(&self, wall_s: f64) {
        let mut inner = self.0.lock().unwrap();
        inner.training_runs += 1;
        inner.training_wall_s += wall_s;
    }

    pub fn snapshot(&self) -> CostLedger {
        self.0.lock().unwrap().clone()
    }
}

/// Wrap a potential so every evaluation is metered.
pub struct Metered<P> {
    inner: P,
    ledger: Ledger,
    meter: Meter,
}

impl<P: Potential> Metered<P> {
    pub fn new(inner: P, ledger: Ledger, meter: Meter) -> Self {
        Metered { inner, ledger, meter }
    }

    pub fn into_inner(self) -> P {
        self.inner
    }
}

impl<P: Potential> Potential for Metered<P> {
    fn evaluate(&self, s: &Structure) -> Result<EvalResult, PotentialError> {
        let t0 = Instant::now();
        let out = self.inner.evaluate(s);
        self.ledger
            .record_eval(self.meter, t0.elapsed().as_secs_f64());
        out
    }

    fn supported_species(&self) -> Option<Vec<matscreen_core::element::Element>> {
        self.inner.supported_species()
    }
}

/// Per-evaluation cost model for the crossover analysis. Units are
/// arbitrary but shared; ratios are what matters.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CostModel {
    pub oracle_unit: f64,
    pub surrogate_unit: f64,
    /// One-time training cost (same units).
    pub training_cost: f64,
    /// Oracle labelings consumed to train the surrogate.
    pub labels: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum CostError {
    #[error("cost model needs a positive oracle unit cost, got {0}")]
    BadOracleCost(f64),
    #[error("no measured costs in the ledger and no explicit cost model given")]
    MissingModel,
}

/// Cumulative-cost curves and the break-even structure count.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrossoverReport {
    pub model: CostModel,
    /// Smallest screening size where the surrogate path is no more
    /// expensive than evaluating everything with the oracle; None when the
    /// surrogate never wins.
    pub crossover: Option<u64>,
    /// (n, oracle-only cost, surrogate-path cost) samples.
    pub curves: Vec<(u64, f64, f64)>,
}

fn oracle_cost(m: &CostModel, n: u64) -> f64 {
    m.oracle_unit * n as f64
}

fn surrogate_cost(m: &CostModel, n: u64) -> f64 {
    m.oracle_unit * m.labels as f64 + m.training_cost + m.surrogate_unit * n as f64
}

/// Closed-form crossover with an integer scan guard around the boundary.
pub fn crossover(model: &CostModel) -> Result<Option<u64>, CostError> {
    if model.oracle_unit <= 0.0 {
        return Err(CostError::BadOracleCost(model.oracle_unit));
    }
    if model.surrogate_unit >= model.oracle_unit {
        return Ok(None);
    }
    let fixed = model.oracle_unit * model.labels as f64 + model.training_cost;
    let raw = fixed / (model.oracle_unit - model.surrogate_unit);
    let mut n = raw.ceil().max(0.0) as u64;
    while n > 0 && surrogate_cost(model, n - 1) <= oracle_cost(model, n - 1) {
        n -= 1;
    }
    while surrogate_cost(model, n) > oracle_cost(model, n) {
        n += 1;
    }
    Ok(Some(n))
}

pub fn cost_report(model: &CostModel, n_max: u64) -> Result<CrossoverReport, CostError> {
    let cross = crossover(model)?;
    let points = 50.min(n_max).max(1);
    let curves = (0..=points)
        .map(|k| {
            let n = n_max * k / points;
            (n, oracle_cost(model, n), surrogate_cost(model, n))
        })
        .collect();
    Ok(CrossoverReport { model: *model, crossover: cross, curves })
}
