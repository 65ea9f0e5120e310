//! Estimators of the asymptotic error baseline: the error a fully trained
//! world model would still make on a cell.
//!
//! Every variant learns from the world model's post-update error `e_after`.
//! `Zero` and `PostUpdate` are the degenerate choices that turn the
//! curiosity-critic reward back into the two classic prediction-error
//! rewards.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{encode_state, Cell, NOISE_FLOOR, NUM_CELLS, STATE_DIM};
use crate::error::{Error, Result};
use crate::nn::{Activation, AdamConfig, AdamState, DenseNet};

pub const CRITIC_HIDDEN: usize = 128;
pub const TABULAR_DECAY: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineKind {
    Neural,
    Tabular,
    Oracle,
    Zero,
    PostUpdate,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Neural => "neural",
            BaselineKind::Tabular => "tabular",
            BaselineKind::Oracle => "oracle",
            BaselineKind::Zero => "zero",
            BaselineKind::PostUpdate => "post-update",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            BaselineKind::Neural,
            BaselineKind::Tabular,
            BaselineKind::Oracle,
            BaselineKind::Zero,
            BaselineKind::PostUpdate,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown baseline estimator '{s}'")))
    }
}

/// `[60, 128, 1]` regressor of the post-update error. Trained on the raw
/// output; the clamp at zero is applied only when the estimate is read.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralCritic {
    net: DenseNet,
    adam: AdamState,
}

impl NeuralCritic {
    pub fn new<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let net = DenseNet::new(&[STATE_DIM, CRITIC_HIDDEN, 1], &[Activation::Relu, Activation::Identity], rng)
            .expect("fixed architecture is valid");
        let adam = AdamState::new(&net, AdamConfig::default());
        Self { net, adam }
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn raw_output(&self, cell: Cell) -> f64 {
        self.net.forward(&encode_state(cell)).expect("encoding width")[0]
    }

    fn observe(&mut self, cell: Cell, e_after: f64) -> Result<()> {
        self.net.train_step(&mut self.adam, &encode_state(cell), &[e_after]).map(|_| ())
    }

    fn estimate(&self, cell: Cell) -> f64 {
        self.raw_output(cell).max(0.0)
    }
}

/// Per-cell exponential moving average of the post-update error. The first
/// observation of a cell sets its value directly; unvisited cells read 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularCritic {
    values: Vec<f64>,
    visited: Vec<bool>,
    decay: f64,
}

impl TabularCritic {
    pub fn new(decay: f64) -> Result<Self> {
        if !(decay > 0.0 && decay < 1.0) {
            return Err(Error::Config(format!("tabular decay must be in (0, 1), got {decay}")));
        }
        Ok(Self { values: vec![0.0; NUM_CELLS], visited: vec![false; NUM_CELLS], decay })
    }

    pub fn value(&self, cell: Cell) -> f64 {
        self.values[cell.index()]
    }

    pub fn visited(&self, cell: Cell) -> bool {
        self.visited[cell.index()]
    }

    fn observe(&mut self, cell: Cell, e_after: f64) {
        let i = cell.index();
        if self.visited[i] {
            self.values[i] = self.decay * self.values[i] + (1.0 - self.decay) * e_after;
        } else {
            self.values[i] = e_after;
            self.visited[i] = true;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BaselineEstimator {
    Neural(NeuralCritic),
    Tabular(TabularCritic),
    /// Analytic floor: 7.0711 on stochastic cells, 0 on deterministic ones.
    Oracle,
    /// Assumes a deterministic world.
    Zero,
    /// Uses the current step's post-update error as the baseline.
    PostUpdate {
        last_e_after: f64,
    },
}

impl BaselineEstimator {
    /// `rng` is only drawn from by the neural variant.
    pub fn new<R: Rng + ?Sized>(kind: BaselineKind, rng: &mut R) -> Self {
        match kind {
            BaselineKind::Neural => BaselineEstimator::Neural(NeuralCritic::new(rng)),
            BaselineKind::Tabular => {
                BaselineEstimator::Tabular(TabularCritic::new(TABULAR_DECAY).expect("constant decay is valid"))
            }
            BaselineKind::Oracle => BaselineEstimator::Oracle,
            BaselineKind::Zero => BaselineEstimator::Zero,
            BaselineKind::PostUpdate => BaselineEstimator::PostUpdate { last_e_after: 0.0 },
        }
    }

    pub fn kind(&self) -> BaselineKind {
        match self {
            BaselineEstimator::Neural(_) => BaselineKind::Neural,
            BaselineEstimator::Tabular(_) => BaselineKind::Tabular,
            BaselineEstimator::Oracle => BaselineKind::Oracle,
            BaselineEstimator::Zero => BaselineKind::Zero,
            BaselineEstimator::PostUpdate { .. } => BaselineKind::PostUpdate,
        }
    }

    /// Feeds this step's post-update error to the estimator.
    pub fn observe(&mut self, cell: Cell, e_after: f64) -> Result<()> {
        if !(e_after >= 0.0) || !e_after.is_finite() {
            return Err(Error::Contract(format!("post-update error must be finite and non-negative, got {e_after}")));
        }
        match self {
            BaselineEstimator::Neural(critic) => critic.observe(cell, e_after)?,
            BaselineEstimator::Tabular(table) => table.observe(cell, e_after),
            BaselineEstimator::Oracle | BaselineEstimator::Zero => {}
            BaselineEstimator::PostUpdate { last_e_after } => *last_e_after = e_after,
        }
        Ok(())
    }

    /// Baseline estimate for `cell`; never negative. `e_after_current` is
    /// only read by the post-update variant.
    pub fn estimate(&self, cell: Cell, e_after_current: f64) -> f64 {
        match self {
            BaselineEstimator::Neural(critic) => critic.estimate(cell),
            BaselineEstimator::Tabular(table) => table.value(cell),
            BaselineEstimator::Oracle => {
                if cell.is_stochastic() {
                    NOISE_FLOOR
                } else {
                    0.0
                }
            }
            BaselineEstimator::Zero => 0.0,
            BaselineEstimator::PostUpdate { .. } => e_after_current.max(0.0),
        }
    }

    /// Mean estimate over the deterministic and the stochastic half, for
    /// estimators that hold a per-cell value.
    pub fn region_means(&self) -> Option<(f64, f64)> {
        if matches!(self, BaselineEstimator::PostUpdate { .. }) {
            return None;
        }
        let (mut det, mut sto, mut nd, mut ns) = (0.0, 0.0, 0usize, 0usize);
        for cell in Cell::all() {
            let e = self.estimate(cell, 0.0);
            if cell.is_stochastic() {
                sto += e;
                ns += 1;
            } else {
                det += e;
                nd += 1;
            }
        }
        Some((det / nd as f64, sto / ns as f64))
    }
}
