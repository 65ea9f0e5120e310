//! Per-step intrinsic rewards.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::critics::{BaselineEstimator, BaselineKind};
use crate::env::{encode_state, Cell, Observation, NUM_CELLS, OBS_DIM, STATE_DIM};
use crate::error::{Error, Result};
use crate::nn::{Activation, AdamConfig, AdamState, DenseNet};
use crate::rng::{stream, Stream};

pub const RND_HIDDEN: usize = 128;
pub const RND_OUTPUT: usize = 128;

/// Everything a reward may depend on at one environment step.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub cell: Cell,
    pub obs: &'a Observation,
    pub e_before: f64,
    pub e_after: f64,
    /// Visits to `cell` including this one; counts start at 1.
    pub visit_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RndInput {
    State,
    Observation,
}

impl RndInput {
    pub fn dim(self) -> usize {
        match self {
            RndInput::State => STATE_DIM,
            RndInput::Observation => OBS_DIM,
        }
    }
}

/// Frozen random target and a trainable predictor of its output.
#[derive(Debug, Clone, PartialEq)]
pub struct RndPair {
    target: DenseNet,
    predictor: DenseNet,
    adam: AdamState,
    input: RndInput,
}

fn rnd_net<R: Rng + ?Sized>(input: RndInput, rng: &mut R) -> DenseNet {
    DenseNet::new(&[input.dim(), RND_HIDDEN, RND_OUTPUT], &[Activation::Relu, Activation::Identity], rng)
        .expect("fixed architecture is valid")
}

impl RndPair {
    pub fn new<R: Rng + ?Sized>(input: RndInput, target_rng: &mut R, predictor_rng: &mut R) -> Self {
        let target = rnd_net(input, target_rng);
        let predictor = rnd_net(input, predictor_rng);
        Self::from_nets(input, target, predictor).expect("shapes agree by construction")
    }

    pub fn from_nets(input: RndInput, target: DenseNet, predictor: DenseNet) -> Result<Self> {
        for net in [&target, &predictor] {
            if net.input_dim() != input.dim() || net.output_dim() != RND_OUTPUT {
                return Err(Error::Config(format!(
                    "RND nets must map {} -> {RND_OUTPUT}, got {} -> {}",
                    input.dim(),
                    net.input_dim(),
                    net.output_dim()
                )));
            }
        }
        let adam = AdamState::new(&predictor, AdamConfig::default());
        Ok(Self { target, predictor, adam, input })
    }

    pub fn input(&self) -> RndInput {
        self.input
    }

    pub fn target(&self) -> &DenseNet {
        &self.target
    }

    pub fn predictor(&self) -> &DenseNet {
        &self.predictor
    }

    /// Predictor MSE against the target on this step's input, measured
    /// before the predictor takes one Adam step toward that target.
    pub fn reward(&mut self, cell: Cell, obs: &Observation) -> Result<f64> {
        let encoded;
        let x: &[f64] = match self.input {
            RndInput::State => {
                encoded = encode_state(cell);
                &encoded
            }
            RndInput::Observation => obs.as_slice(),
        };
        let y = self.target.forward(x)?;
        self.predictor.train_step(&mut self.adam, x, &y)
    }
}

/// Per-cell visit counts, starting at 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisitCounter {
    counts: Vec<u64>,
}

impl Default for VisitCounter {
    fn default() -> Self {
        Self { counts: vec![1; NUM_CELLS] }
    }
}

impl VisitCounter {
    /// Records a visit and returns the updated count.
    pub fn visit(&mut self, cell: Cell) -> u64 {
        let n = &mut self.counts[cell.index()];
        *n += 1;
        *n
    }

    pub fn count(&self, cell: Cell) -> u64 {
        self.counts[cell.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Serializable name of a reward method; the nine methods compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum MethodSpec {
    Random,
    V1,
    V2,
    CuriosityCritic(BaselineKind),
    Rnd(RndInput),
    VisitCount,
}

impl MethodSpec {
    pub const ALL: [MethodSpec; 9] = [
        MethodSpec::Random,
        MethodSpec::V1,
        MethodSpec::V2,
        MethodSpec::CuriosityCritic(BaselineKind::Neural),
        MethodSpec::CuriosityCritic(BaselineKind::Tabular),
        MethodSpec::CuriosityCritic(BaselineKind::Oracle),
        MethodSpec::Rnd(RndInput::State),
        MethodSpec::Rnd(RndInput::Observation),
        MethodSpec::VisitCount,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodSpec::Random => "random",
            MethodSpec::V1 => "v1",
            MethodSpec::V2 => "v2",
            MethodSpec::CuriosityCritic(BaselineKind::Neural) => "cc-neural",
            MethodSpec::CuriosityCritic(BaselineKind::Tabular) => "cc-tabular",
            MethodSpec::CuriosityCritic(BaselineKind::Oracle) => "cc-oracle",
            MethodSpec::CuriosityCritic(BaselineKind::Zero) => "cc-zero",
            MethodSpec::CuriosityCritic(BaselineKind::PostUpdate) => "cc-post-update",
            MethodSpec::Rnd(RndInput::State) => "rnd-state",
            MethodSpec::Rnd(RndInput::Observation) => "rnd-obs",
            MethodSpec::VisitCount => "visit-count",
        }
    }

    pub fn is_random(self) -> bool {
        self == MethodSpec::Random
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let extra =
            [MethodSpec::CuriosityCritic(BaselineKind::Zero), MethodSpec::CuriosityCritic(BaselineKind::PostUpdate)];
        MethodSpec::ALL.into_iter().chain(extra).find(|m| m.name() == s).ok_or_else(|| {
            let known: Vec<_> = MethodSpec::ALL.iter().map(|m| m.name()).collect();
            Error::Config(format!("unknown method '{s}' (expected one of {})", known.join(", ")))
        })
    }
}

impl From<MethodSpec> for String {
    fn from(m: MethodSpec) -> String {
        m.name().to_string()
    }
}

impl TryFrom<String> for MethodSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RewardMethod {
    Random,
    V1,
    V2,
    CuriosityCritic(BaselineEstimator),
    Rnd(RndPair),
    VisitCount,
}

impl RewardMethod {
    /// Builds the method with its networks drawn from `seed`'s substreams.
    pub fn build(spec: MethodSpec, seed: u64) -> Self {
        match spec {
            MethodSpec::Random => RewardMethod::Random,
            MethodSpec::V1 => RewardMethod::V1,
            MethodSpec::V2 => RewardMethod::V2,
            MethodSpec::VisitCount => RewardMethod::VisitCount,
            MethodSpec::CuriosityCritic(kind) => {
                RewardMethod::CuriosityCritic(BaselineEstimator::new(kind, &mut stream(seed, Stream::CriticInit)))
            }
            MethodSpec::Rnd(input) => RewardMethod::Rnd(RndPair::new(
                input,
                &mut stream(seed, Stream::RndTargetInit),
                &mut stream(seed, Stream::RndPredictorInit),
            )),
        }
    }

    pub fn estimator(&self) -> Option<&BaselineEstimator> {
        match self {
            RewardMethod::CuriosityCritic(est) => Some(est),
            _ => None,
        }
    }

    /// Feeds the post-update error to the critic, if there is one. Must
    /// run before `compute_reward` on the same step.
    pub fn critic_observe(&mut self, ctx: &StepContext<'_>) -> Result<()> {
        match self {
            RewardMethod::CuriosityCritic(est) => est.observe(ctx.cell, ctx.e_after),
            _ => Ok(()),
        }
    }

    /// The reward is not clamped: V2 and curiosity-critic rewards go
    /// negative.
    pub fn compute_reward(&mut self, ctx: &StepContext<'_>) -> Result<f64> {
        Ok(match self {
            RewardMethod::Random => 0.0,
            RewardMethod::V1 => ctx.e_before,
            RewardMethod::V2 => ctx.e_before - ctx.e_after,
            RewardMethod::CuriosityCritic(est) => ctx.e_before - est.estimate(ctx.cell, ctx.e_after),
            RewardMethod::Rnd(pair) => pair.reward(ctx.cell, ctx.obs)?,
            RewardMethod::VisitCount => 1.0 / (ctx.visit_count as f64).sqrt(),
        })
    }
}
