//! Observation predictor θ: one-hot cell encoding → 200-dim observation.
//!
//! Training minimizes MSE (mean over the 200 outputs); the error `e` that
//! drives rewards and evaluation is the unsquared L2 norm of the residual.
//! The environment's transitions are deterministic, so the model sees only
//! the current cell and the action never enters.

use rand::Rng;

use crate::env::{encode_state, Cell, NoisyTvEnv, Observation, OBS_DIM, STATE_DIM};
use crate::error::Result;
use crate::nn::{Activation, AdamConfig, AdamState, DenseNet};

pub const HIDDEN: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct WorldModel {
    net: DenseNet,
    adam: AdamState,
}

/// Euclidean norm of `prediction − target`.
pub fn l2_error(prediction: &[f64], target: &[f64]) -> f64 {
    prediction.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>().sqrt()
}

impl WorldModel {
    pub fn new<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let net = DenseNet::new(&[STATE_DIM, HIDDEN, OBS_DIM], &[Activation::Relu, Activation::Identity], rng)
            .expect("fixed architecture is valid");
        Self::from_net(net)
    }

    /// Wraps an existing `[60, _, 200]` network with a fresh optimizer.
    pub fn from_net(net: DenseNet) -> Self {
        assert_eq!(net.input_dim(), STATE_DIM);
        assert_eq!(net.output_dim(), OBS_DIM);
        let adam = AdamState::new(&net, AdamConfig::default());
        Self { net, adam }
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut DenseNet {
        &mut self.net
    }

    pub fn predict(&self, cell: Cell) -> Vec<f64> {
        self.net.forward(&encode_state(cell)).expect("encoding matches input width")
    }

    pub fn error(&self, cell: Cell, obs: &Observation) -> f64 {
        l2_error(&self.predict(cell), obs.as_slice())
    }

    /// One MSE step toward `obs`. Returns the L2 error before and after.
    pub fn update(&mut self, cell: Cell, obs: &Observation) -> Result<(f64, f64)> {
        let (_, before) = self.net.train_step_with_output(&mut self.adam, &encode_state(cell), obs.as_slice())?;
        let e_before = l2_error(&before, obs.as_slice());
        let e_after = self.error(cell, obs);
        Ok((e_before, e_after))
    }

    /// Mean L2 error over the 450 left-half cells against their fixed
    /// patterns. Reads patterns only, so the noise stream is untouched.
    pub fn eval_deterministic(&self, env: &NoisyTvEnv) -> f64 {
        let cells: Vec<Cell> = Cell::deterministic_cells().collect();
        let inputs: Vec<Vec<f64>> = cells.iter().map(|&c| encode_state(c)).collect();
        let predictions = self.net.forward_batch(&inputs).expect("encoding matches input width");
        let total: f64 = cells
            .iter()
            .zip(&predictions)
            .map(|(&c, p)| {
                let target = env.deterministic_pattern(c).expect("left-half cell");
                l2_error(p, target.as_slice())
            })
            .sum();
        total / cells.len() as f64
    }
}
