//! Reward normalization, the per-cell value table and ε-greedy movement.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::env::{Action, Cell, NoisyTvEnv, NUM_CELLS};
use crate::error::{Error, Result};

pub const NORMALIZER_DECAY: f64 = 0.99;
pub const NORMALIZER_FLOOR: f64 = 1e-8;
pub const V_INIT: f64 = 3.0;
pub const V_ALPHA: f64 = 0.05;
pub const EPSILON: f64 = 0.3;

/// Divides rewards by a running root-mean-square (no mean subtraction, so
/// sign is preserved). The first reward seeds the average with its own
/// square, which makes the whole recursion scale-invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardNormalizer {
    ema_sq: f64,
    initialized: bool,
    decay: f64,
    floor: f64,
}

impl Default for RewardNormalizer {
    fn default() -> Self {
        Self::new(NORMALIZER_DECAY, NORMALIZER_FLOOR).expect("constants are valid")
    }
}

impl RewardNormalizer {
    pub fn new(decay: f64, floor: f64) -> Result<Self> {
        if !(decay > 0.0 && decay < 1.0) || !(floor > 0.0) {
            return Err(Error::Config(format!("normalizer needs decay in (0, 1) and floor > 0, got {decay}, {floor}")));
        }
        Ok(Self { ema_sq: 0.0, initialized: false, decay, floor })
    }

    pub fn ema_sq(&self) -> f64 {
        self.ema_sq
    }

    pub fn normalize(&mut self, r: f64) -> f64 {
        let sq = r * r;
        if self.initialized {
            self.ema_sq = self.decay * self.ema_sq + (1.0 - self.decay) * sq;
        } else {
            self.ema_sq = sq;
            self.initialized = true;
        }
        r / self.ema_sq.sqrt().max(self.floor)
    }
}

/// Exponential moving average of the normalized reward received in each cell.
#[derive(Debug, Clone, PartialEq)]
pub struct VTable {
    values: Vec<f64>,
    alpha: f64,
    epsilon: f64,
}

impl Default for VTable {
    fn default() -> Self {
        Self::with_params(V_INIT, V_ALPHA, EPSILON).expect("constants are valid")
    }
}

impl VTable {
    pub fn with_params(init: f64, alpha: f64, epsilon: f64) -> Result<Self> {
        if !init.is_finite() || !(alpha > 0.0 && alpha <= 1.0) || !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Config(format!(
                "invalid value table parameters: init {init}, alpha {alpha}, epsilon {epsilon}"
            )));
        }
        Ok(Self { values: vec![init; NUM_CELLS], alpha, epsilon })
    }

    pub fn value(&self, cell: Cell) -> f64 {
        self.values[cell.index()]
    }

    pub fn set(&mut self, cell: Cell, value: f64) {
        self.values[cell.index()] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn update(&mut self, cell: Cell, r_norm: f64) -> Result<()> {
        if !r_norm.is_finite() {
            return Err(Error::Numerical(format!("non-finite normalized reward {r_norm} at {cell}")));
        }
        let v = &mut self.values[cell.index()];
        *v += self.alpha * (r_norm - *v);
        Ok(())
    }
}

pub fn uniform_action<R: Rng + ?Sized>(env: &NoisyTvEnv, cell: Cell, rng: &mut R) -> Action {
    *env.valid_actions(cell).choose(rng).expect("every cell has a neighbour")
}

/// ε-greedy over the values of neighbouring cells; ties broken uniformly.
pub fn select_action<R: Rng + ?Sized>(vt: &VTable, env: &NoisyTvEnv, cell: Cell, rng: &mut R) -> Action {
    let actions = env.valid_actions(cell);
    if rng.gen::<f64>() < vt.epsilon {
        return *actions.choose(rng).expect("every cell has a neighbour");
    }
    let value = |a: Action| vt.value(cell.neighbor(a).expect("valid action"));
    let best = actions.iter().map(|&a| value(a)).fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<Action> = actions.into_iter().filter(|&a| value(a) == best).collect();
    *ties.choose(rng).expect("argmax set is nonempty")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use proptest::prelude::*;

    fn cell(r: usize, c: usize) -> Cell {
        Cell::new(r, c).unwrap()
    }

    #[test]
    fn first_reward_normalizes_to_unit() {
        let mut n = RewardNormalizer::default();
        assert_eq!(n.normalize(5.0), 1.0);
        assert_eq!(n.ema_sq(), 25.0);
        let mut neg = RewardNormalizer::default();
        assert_eq!(neg.normalize(-2.0), -1.0);
    }

    #[test]
    fn zero_rewards_stay_zero() {
        let mut n = RewardNormalizer::default();
        for _ in 0..10 {
            assert_eq!(n.normalize(0.0), 0.0);
        }
        assert_eq!(n.ema_sq(), 0.0);
    }

    #[test]
    fn constant_stream_tends_to_one() {
        let mut n = RewardNormalizer::default();
        n.normalize(0.1);
        let mut out = 0.0;
        for _ in 0..2000 {
            out = n.normalize(3.0);
        }
        assert!((out - 1.0).abs() < 1e-6);
    }

    #[test]
    fn normalizer_rejects_bad_params() {
        assert!(RewardNormalizer::new(1.0, 1e-8).is_err());
        assert!(RewardNormalizer::new(0.9, 0.0).is_err());
    }

    #[test]
    fn v_update_examples() {
        let mut vt = VTable::default();
        let c = cell(0, 0);
        vt.update(c, 1.0).unwrap();
        assert!((vt.value(c) - 2.9).abs() < 1e-15);
        vt.set(c, 0.0);
        vt.update(c, 0.0).unwrap();
        assert_eq!(vt.value(c), 0.0);
        assert!(matches!(vt.update(c, f64::NAN), Err(Error::Numerical(_))));
    }

    #[test]
    fn v_update_converges_geometrically() {
        let mut vt = VTable::default();
        let c = cell(3, 3);
        let target = -2.0;
        for k in 1..=50 {
            vt.update(c, target).unwrap();
            let expected = 0.95f64.powi(k) * (V_INIT - target).abs();
            assert!(((vt.value(c) - target).abs() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn greedy_picks_best_neighbour() {
        let env = NoisyTvEnv::from_seed(1);
        let mut vt = VTable::with_params(0.0, V_ALPHA, 0.0).unwrap();
        let c = cell(10, 10);
        vt.set(cell(9, 10), 1.0);
        vt.set(cell(11, 10), 5.0);
        vt.set(cell(10, 9), 2.0);
        vt.set(cell(10, 11), 3.0);
        let mut rng = stream(1, Stream::Aux(0));
        for _ in 0..100 {
            assert_eq!(select_action(&vt, &env, c, &mut rng), Action::Down);
        }
    }

    fn frequencies(vt: &VTable, c: Cell, draws: usize) -> Vec<(Action, f64)> {
        let env = NoisyTvEnv::from_seed(1);
        let mut rng = stream(2, Stream::Aux(1));
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            let a = select_action(vt, &env, c, &mut rng);
            counts[Action::ALL.iter().position(|&x| x == a).unwrap()] += 1;
        }
        Action::ALL.iter().zip(counts).map(|(&a, n)| (a, n as f64 / draws as f64)).collect()
    }

    #[test]
    fn greedy_ties_are_uniform() {
        let vt = VTable::with_params(1.0, V_ALPHA, 0.0).unwrap();
        for (_, f) in frequencies(&vt, cell(10, 10), 100_000) {
            assert!((f - 0.25).abs() < 0.02, "{f}");
        }
        // Corner: two valid actions.
        for (a, f) in frequencies(&vt, cell(0, 0), 100_000) {
            let expected = if matches!(a, Action::Down | Action::Right) { 0.5 } else { 0.0 };
            assert!((f - expected).abs() < 0.02, "{a:?}: {f}");
        }
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut vt = VTable::with_params(0.0, V_ALPHA, 1.0).unwrap();
        vt.set(cell(11, 10), 100.0);
        for (_, f) in frequencies(&vt, cell(10, 10), 100_000) {
            assert!((f - 0.25).abs() < 0.02, "{f}");
        }
    }

    #[test]
    fn uniform_action_is_valid() {
        let env = NoisyTvEnv::from_seed(1);
        let mut rng = stream(1, Stream::Aux(2));
        for _ in 0..200 {
            let c = cell(29, 29);
            let a = uniform_action(&env, c, &mut rng);
            assert!(c.neighbor(a).is_some());
        }
    }

    proptest! {
        #[test]
        fn normalizer_is_scale_invariant(
            rs in prop::collection::vec(-100.0f64..100.0, 1..60),
            scale in 1e-3f64..1e3,
        ) {
            prop_assume!(rs[0] != 0.0);
            let mut a = RewardNormalizer::default();
            let mut b = RewardNormalizer::default();
            for &r in &rs {
                let x = a.normalize(r);
                let y = b.normalize(scale * r);
                prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
                prop_assert!(x == 0.0 || x.signum() == r.signum());
            }
        }

        #[test]
        fn values_stay_in_convex_hull(rs in prop::collection::vec(-50.0f64..50.0, 1..200)) {
            let mut vt = VTable::default();
            let c = Cell::START;
            let lo = rs.iter().cloned().fold(V_INIT, f64::min);
            let hi = rs.iter().cloned().fold(V_INIT, f64::max);
            for &r in &rs {
                vt.update(c, r).unwrap();
                prop_assert!(vt.value(c) >= lo - 1e-12 && vt.value(c) <= hi + 1e-12);
            }
        }
    }
}
