//! Numerical checks of the cumulative-improvement identities on abstract
//! error sequences, and of the Jensen bound on expected error.
//!
//! `E[t][t']` is the error of model `θ_t` on transition `t'`. Rows run over
//! model time `0..=T+1`, columns over transitions `0..=T+1`.

use rand::Rng;
use serde::Serialize;

use crate::critics::BaselineKind;
use crate::env::{Cell, Observation, OBS_DIM};
use crate::error::{Error, Result};
use crate::rewards::{MethodSpec, RewardMethod, StepContext};
use crate::rng::{stream, Stream};

pub const TELESCOPING_TOL: f64 = 1e-12;
pub const DECOMPOSITION_TOL: f64 = 1e-9;
pub const JENSEN_TOL: f64 = 1e-12;
pub const DECOMPOSITION_GAMMAS: [f64; 4] = [0.5, 0.9, 0.99, 0.999];

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
struct Sum {
    sum: f64,
    carry: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorMatrix {
    rows: Vec<Vec<f64>>,
}

impl ErrorMatrix {
    /// Square, at least 2×2, finite and non-negative.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::Config(format!("error matrix needs at least 2 rows, got {n}")));
        }
        for row in &rows {
            if row.len() != n {
                return Err(Error::Shape { context: "error matrix row", expected: n, got: row.len() });
            }
            if let Some(x) = row.iter().find(|x| !x.is_finite() || **x < 0.0) {
                return Err(Error::Config(format!("error matrix entries must be finite and >= 0, got {x}")));
            }
        }
        Ok(Self { rows })
    }

    /// Matrix for horizon `t_max` (size `t_max + 2`) filled by `f(t, t')`.
    pub fn from_fn(t_max: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let n = t_max + 2;
        Self::new((0..n).map(|t| (0..n).map(|tp| f(t, tp)).collect()).collect())
    }

    /// Entries uniform in `[0, 10]`.
    pub fn random<R: Rng + ?Sized>(t_max: usize, rng: &mut R) -> Self {
        Self::from_fn(t_max, |_, _| rng.gen_range(0.0..=10.0)).expect("uniform entries are valid")
    }

    /// The horizon `T`.
    pub fn horizon(&self) -> usize {
        self.rows.len() - 2
    }

    pub fn get(&self, t: usize, t_prime: usize) -> f64 {
        self.rows[t][t_prime]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

fn check_gamma(gamma: f64, open_above: bool) -> Result<()> {
    let ok = gamma > 0.0 && if open_above { gamma < 1.0 } else { gamma <= 1.0 };
    if ok {
        Ok(())
    } else {
        let range = if open_above { "(0, 1)" } else { "(0, 1]" };
        Err(Error::Contract(format!("gamma must lie in {range}, got {gamma}")))
    }
}

/// Direct double sum `Σ_t γ^t Σ_{t'≤t} (E[t][t'] − E[t+1][t'])`.
pub fn cumulative_c(e: &ErrorMatrix, gamma: f64) -> Result<f64> {
    check_gamma(gamma, false)?;
    let mut total = Sum::default();
    let mut weight = 1.0;
    for t in 0..=e.horizon() {
        let mut inner = Sum::default();
        for tp in 0..=t {
            inner.add(e.get(t, tp) - e.get(t + 1, tp));
        }
        total.add(weight * inner.value());
        weight *= gamma;
    }
    Ok(total.value())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decomposition {
    /// Depends on the whole error history; never positive.
    pub history: f64,
    /// Computable from per-step errors alone.
    pub per_step: f64,
}

impl Decomposition {
    pub fn total(&self) -> f64 {
        self.history + self.per_step
    }
}

/// Splits the discounted cumulative improvement into a history term and a
/// per-step term. Needs `γ` strictly below 1.
pub fn decomposed_c(e: &ErrorMatrix, gamma: f64) -> Result<Decomposition> {
    check_gamma(gamma, true)?;
    let last = e.horizon() + 1;

    let mut weighted = Sum::default();
    let mut weight = 1.0;
    for t in 0..=e.horizon() {
        let mut row = Sum::default();
        for tp in 0..=t {
            row.add(e.get(t, tp));
        }
        weighted.add(weight * row.value());
        weight *= gamma;
    }
    let history = (1.0 - 1.0 / gamma) * weighted.value();

    let final_weight = gamma.powi(last as i32);
    let mut steps = Sum::default();
    let mut weight = 1.0;
    for t in 0..=last {
        steps.add(weight * e.get(t, t));
        steps.add(-final_weight * e.get(last, t));
        weight *= gamma;
    }
    Ok(Decomposition { history, per_step: steps.value() / gamma })
}

/// Undiscounted per-step form `Σ_{t≤T} (E[t][t] − E[T+1][t])`.
pub fn per_step_gamma1(e: &ErrorMatrix) -> f64 {
    let last = e.horizon() + 1;
    let mut total = Sum::default();
    for t in 0..last {
        total.add(e.get(t, t) - e.get(last, t));
    }
    total.value()
}

/// `(mean_i ‖μ − x_i‖, sqrt(Σ_d Var_d))` with population variance.
pub fn jensen_check(samples: &[Vec<f64>]) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::Contract(format!("need at least 2 samples, got {}", samples.len())));
    }
    let dim = samples[0].len();
    for s in samples {
        crate::error::check_len("jensen sample", dim, s.len())?;
    }
    let n = samples.len() as f64;
    let mean: Vec<f64> = (0..dim).map(|d| samples.iter().map(|s| s[d]).sum::<f64>() / n).collect();
    let lhs =
        samples.iter().map(|s| s.iter().zip(&mean).map(|(x, m)| (m - x) * (m - x)).sum::<f64>().sqrt()).sum::<f64>()
            / n;
    let var_sum: f64 =
        (0..dim).map(|d| samples.iter().map(|s| (s[d] - mean[d]) * (s[d] - mean[d])).sum::<f64>() / n).sum();
    Ok((lhs, var_sum.sqrt()))
}

/// Named fixed matrices that stress boundary terms.
pub fn adversarial_cases(t_max: usize) -> Vec<(String, ErrorMatrix)> {
    let last = t_max + 1;
    let mut cases = vec![
        ("zeros".to_string(), ErrorMatrix::from_fn(t_max, |_, _| 0.0)),
        ("constant".to_string(), ErrorMatrix::from_fn(t_max, |_, _| 3.5)),
        ("constant rows".to_string(), ErrorMatrix::from_fn(t_max, |t, _| 1.0 + (t % 4) as f64 * 2.5)),
        ("geometric decay rows".to_string(), ErrorMatrix::from_fn(t_max, |t, _| 10.0 * 0.7f64.powi(t as i32))),
        ("growing rows".to_string(), ErrorMatrix::from_fn(t_max, |t, _| t as f64 * 0.25)),
        ("diagonal only".to_string(), ErrorMatrix::from_fn(t_max, |t, tp| if t == tp { 7.0 } else { 0.0 })),
    ];
    let spikes = [(0, 0), (last, last), (last, 0), (t_max, t_max), (last / 2, last / 4)];
    for (r, c) in spikes {
        cases.push((
            format!("spike at ({r},{c})"),
            ErrorMatrix::from_fn(t_max, |t, tp| if (t, tp) == (r, c) { 9.0 } else { 0.0 }),
        ));
    }
    cases.into_iter().map(|(name, m)| (format!("{name}, T={t_max}"), m.expect("fixed cases are valid"))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub trials: usize,
    pub tmax: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { trials: 1000, tmax: 32, seed: 0 }
    }
}

/// The first case that broke a check, kept for triage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub case: String,
    pub gamma: Option<f64>,
    pub detail: String,
    pub matrix: Option<ErrorMatrix>,
    pub samples: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub cases: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub violation: Option<Violation>,
}

impl CheckReport {
    fn new(name: &str, tolerance: f64) -> Self {
        Self { name: name.to_string(), cases: 0, max_deviation: 0.0, tolerance, passed: true, violation: None }
    }

    /// Records one case; `deviation > tolerance` fails the check.
    fn record(&mut self, deviation: f64, violation: impl FnOnce() -> Violation) {
        self.cases += 1;
        if deviation > self.max_deviation || deviation.is_nan() {
            self.max_deviation = deviation;
        }
        if !(deviation <= self.tolerance) {
            self.passed = false;
            if self.violation.is_none() {
                self.violation = Some(violation());
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryReport {
    pub config: VerifyConfig,
    pub checks: Vec<CheckReport>,
}

impl TheoryReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const CHECK_TELESCOPING: &str = "telescoping";
pub const CHECK_DECOMPOSITION: &str = "decomposition";
pub const CHECK_UPPER_BOUND: &str = "upper bound";
pub const CHECK_SLACK_RANDOM: &str = "slack decreasing (random, all k)";
pub const CHECK_SLACK_TAIL: &str = "slack decreasing (all, 10^-k <= 1/T)";
pub const CHECK_REDUCTIONS: &str = "baseline reductions";
pub const CHECK_JENSEN: &str = "jensen bound";
pub const CHECK_JENSEN_EQUALITY: &str = "jensen two-point equality";

/// `γ_k = 1 − 10^{−k}` for `k = 1..=6`.
pub fn slack_gammas() -> [f64; 6] {
    std::array::from_fn(|i| 1.0 - 10f64.powi(-(i as i32 + 1)))
}

/// Upper-bound slack `per_step − C`, computed as `−history` to avoid
/// cancellation.
pub fn slack(e: &ErrorMatrix, gamma: f64) -> Result<f64> {
    Ok(-decomposed_c(e, gamma)?.history)
}

/// Largest failure of strict decrease in `slacks[from..]`; 0 when strictly
/// decreasing. A plateau counts as the smallest positive failure.
fn slack_rise(slacks: &[f64], from: usize) -> f64 {
    slacks[from..]
        .windows(2)
        .map(|w| if w[1] < w[0] { 0.0 } else { (w[1] - w[0]).max(f64::MIN_POSITIVE) })
        .fold(0.0, f64::max)
}

fn matrix_violation(case: &str, gamma: Option<f64>, detail: String, e: &ErrorMatrix) -> Violation {
    Violation { case: case.to_string(), gamma, detail, matrix: Some(e.clone()), samples: None }
}

/// Runs every identity on `trials` random matrices (horizons up to
/// `tmax`) plus the fixed adversarial cases.
pub fn verify_all(cfg: VerifyConfig) -> TheoryReport {
    let mut rng = stream(cfg.seed, Stream::Theory);
    let mut cases: Vec<(String, ErrorMatrix, bool)> = Vec::new();
    for i in 0..cfg.trials {
        let t_max = rng.gen_range(0..=cfg.tmax);
        cases.push((format!("random #{i}, T={t_max}"), ErrorMatrix::random(t_max, &mut rng), true));
    }
    let mut horizons = vec![0, 1, 5, cfg.tmax];
    horizons.dedup();
    for t_max in horizons {
        for (name, m) in adversarial_cases(t_max) {
            cases.push((name, m, false));
        }
    }

    let mut telescoping = CheckReport::new(CHECK_TELESCOPING, TELESCOPING_TOL);
    let mut decomposition = CheckReport::new(CHECK_DECOMPOSITION, DECOMPOSITION_TOL);
    let mut bound = CheckReport::new(CHECK_UPPER_BOUND, 0.0);
    let mut slack_random = CheckReport::new(CHECK_SLACK_RANDOM, 0.0);
    let mut slack_tail = CheckReport::new(CHECK_SLACK_TAIL, 0.0);
    let gammas = slack_gammas();

    for (name, e, random) in &cases {
        let c1 = cumulative_c(e, 1.0).expect("gamma 1 is valid");
        let dev = (per_step_gamma1(e) - c1).abs();
        telescoping.record(dev, || matrix_violation(name, Some(1.0), format!("per-step form differs by {dev:e}"), e));

        for &gamma in &DECOMPOSITION_GAMMAS {
            let c = cumulative_c(e, gamma).expect("valid gamma");
            let d = decomposed_c(e, gamma).expect("valid gamma");
            let dev = (d.total() - c).abs();
            decomposition.record(dev, || {
                matrix_violation(name, Some(gamma), format!("history + per-step differs by {dev:e}"), e)
            });
        }

        for &gamma in DECOMPOSITION_GAMMAS.iter().chain(&gammas) {
            let c = cumulative_c(e, gamma).expect("valid gamma");
            let d = decomposed_c(e, gamma).expect("valid gamma");
            // The history term carries the sign; the subtraction is only
            // a cross-check against the direct sum.
            let excess = if d.history > 0.0 { d.history } else { (c - d.per_step - DECOMPOSITION_TOL).max(0.0) };
            bound.record(excess, || {
                matrix_violation(name, Some(gamma), format!("per-step term {} below cumulative {c}", d.per_step), e)
            });
        }

        let slacks: Vec<f64> = gammas.iter().map(|&g| slack(e, g).expect("valid gamma")).collect();
        if slacks.iter().all(|&s| s == 0.0) {
            continue;
        }
        let horizon = e.horizon().max(1) as f64;
        if *random {
            let rise = slack_rise(&slacks, 0);
            slack_random
                .record(rise, || matrix_violation(name, None, format!("slack not strictly decreasing: {slacks:?}"), e));
        }
        // Each slack term is (1−γ)γ^{t−1}·S_t, decreasing once γ ≥ 1 − 1/t.
        let first = (1..=gammas.len()).find(|&k| 10f64.powi(-(k as i32)) <= 1.0 / horizon).unwrap_or(gammas.len()) - 1;
        let rise = slack_rise(&slacks, first);
        slack_tail.record(rise, || {
            matrix_violation(name, None, format!("slack not strictly decreasing from k={}: {slacks:?}", first + 1), e)
        });
    }

    let reductions = check_reductions(&mut rng, cfg.trials * 10);
    let (jensen, equality) = check_jensen(&mut rng, cfg.trials);

    TheoryReport {
        config: cfg,
        checks: vec![telescoping, decomposition, bound, slack_random, slack_tail, reductions, jensen, equality],
    }
}

/// Zero baseline must give the raw error reward and the post-update
/// baseline the one-step improvement, bit for bit.
fn check_reductions<R: Rng + ?Sized>(rng: &mut R, pairs: usize) -> CheckReport {
    let mut report = CheckReport::new(CHECK_REDUCTIONS, 0.0);
    let obs = Observation::new(vec![0.0; OBS_DIM]).expect("zero observation is binary");
    let mut zero = RewardMethod::build(MethodSpec::CuriosityCritic(BaselineKind::Zero), 0);
    let mut post = RewardMethod::build(MethodSpec::CuriosityCritic(BaselineKind::PostUpdate), 0);
    for i in 0..pairs {
        let ctx = StepContext {
            cell: Cell::from_index(rng.gen_range(0..crate::env::NUM_CELLS)),
            obs: &obs,
            e_before: rng.gen_range(0.0..15.0),
            e_after: rng.gen_range(0.0..15.0),
            visit_count: 1,
        };
        let reward =
            |m: &mut RewardMethod| m.critic_observe(&ctx).and_then(|_| m.compute_reward(&ctx)).unwrap_or(f64::NAN);
        let (rz, rp) = (reward(&mut zero), reward(&mut post));
        let (v1, v2) = (ctx.e_before, ctx.e_before - ctx.e_after);
        let mismatch = (rz.to_bits() != v1.to_bits()) || (rp.to_bits() != v2.to_bits());
        let dev = if mismatch { (rz - v1).abs().max((rp - v2).abs()).max(f64::MIN_POSITIVE) } else { 0.0 };
        report.record(dev, || Violation {
            case: format!("pair #{i}"),
            gamma: None,
            detail: format!(
                "e_before {}, e_after {}: zero baseline {rz} vs {v1}, post-update {rp} vs {v2}",
                ctx.e_before, ctx.e_after
            ),
            matrix: None,
            samples: None,
        });
    }
    report
}

fn check_jensen<R: Rng + ?Sized>(rng: &mut R, trials: usize) -> (CheckReport, CheckReport) {
    let mut bound = CheckReport::new(CHECK_JENSEN, JENSEN_TOL);
    let mut equality = CheckReport::new(CHECK_JENSEN_EQUALITY, JENSEN_TOL);
    let sample_violation = |case: String, detail: String, samples: &[Vec<f64>]| Violation {
        case,
        gamma: None,
        detail,
        matrix: None,
        samples: Some(samples.to_vec()),
    };

    for i in 0..trials {
        let n = rng.gen_range(2..=40);
        let dim = rng.gen_range(1..=24);
        let kind = i % 3;
        let samples: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..dim)
                    .map(|_| match kind {
                        0 => rng.gen_range(-5.0..5.0),
                        1 => f64::from(u8::from(rng.gen_bool(0.5))),
                        _ => rng.gen_range(0.0f64..1.0).powi(6) * 20.0,
                    })
                    .collect()
            })
            .collect();
        let (lhs, rhs) = jensen_check(&samples).expect("well-formed samples");
        let dev = (lhs - rhs).max(0.0);
        bound.record(dev, || sample_violation(format!("sample set #{i}"), format!("lhs {lhs} > rhs {rhs}"), &samples));
    }

    let mut pairs: Vec<(f64, f64)> = vec![(0.0, 1.0), (-2.0, 2.0), (3.0, 3.0), (1e-3, 7.5)];
    pairs.extend((0..trials).map(|_| (rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0))));
    for (k, (a, b)) in pairs.into_iter().enumerate() {
        let samples = vec![vec![a], vec![b]];
        let (lhs, rhs) = jensen_check(&samples).expect("two samples");
        let dev = (lhs - rhs).abs();
        equality.record(dev, || {
            sample_violation(format!("two-point set #{k}"), format!("lhs {lhs} != rhs {rhs}"), &samples)
        });
    }
    (bound, equality)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn matrix(t_max: usize, seed: u64) -> ErrorMatrix {
        ErrorMatrix::random(t_max, &mut stream(seed, Stream::Aux(0)))
    }

    #[test]
    fn zero_and_constant_matrices_vanish() {
        for gamma in [0.3, 0.9, 1.0] {
            assert_eq!(cumulative_c(&ErrorMatrix::from_fn(4, |_, _| 0.0).unwrap(), gamma).unwrap(), 0.0);
            assert_eq!(cumulative_c(&ErrorMatrix::from_fn(4, |_, _| 2.5).unwrap(), gamma).unwrap(), 0.0);
        }
        let zero = decomposed_c(&ErrorMatrix::from_fn(3, |_, _| 0.0).unwrap(), 0.9).unwrap();
        assert_eq!((zero.history, zero.per_step), (0.0, 0.0));
        assert_eq!(per_step_gamma1(&ErrorMatrix::from_fn(3, |_, _| 4.0).unwrap()), 0.0);
    }

    #[test]
    fn six_by_six_decomposition_matches_direct_sum() {
        let e = matrix(4, 1);
        let c = cumulative_c(&e, 0.9).unwrap();
        assert!((decomposed_c(&e, 0.9).unwrap().total() - c).abs() < 1e-9);
    }

    #[test]
    fn eight_by_eight_telescopes() {
        let e = matrix(6, 2);
        assert!((per_step_gamma1(&e) - cumulative_c(&e, 1.0).unwrap()).abs() < 1e-12);
    }

    /// Two-step hand computation: with T = 0 the cumulative improvement is
    /// just E[0][0] − E[1][0].
    #[test]
    fn two_by_two_by_hand() {
        let e = ErrorMatrix::new(vec![vec![5.0, 1.0], vec![2.0, 3.0]]).unwrap();
        assert_eq!(cumulative_c(&e, 0.7).unwrap(), 3.0);
        assert_eq!(per_step_gamma1(&e), 3.0);
        let d = decomposed_c(&e, 0.5).unwrap();
        // history = (1 − 2)·5, per_step = 2·(5 + 0.5·3 − 0.5·(2 + 3)).
        assert!((d.history + 5.0).abs() < 1e-15);
        assert!((d.per_step - 8.0).abs() < 1e-15);
    }

    #[test]
    fn final_row_of_zeros_sums_the_diagonal() {
        let e = ErrorMatrix::from_fn(5, |t, tp| if t == 6 { 0.0 } else { (t * 7 + tp) as f64 % 5.0 }).unwrap();
        let diag: f64 = (0..6).map(|t| e.get(t, t)).sum();
        assert_eq!(per_step_gamma1(&e), diag);
    }

    #[test]
    fn gamma_contracts() {
        let e = matrix(2, 3);
        assert!(matches!(cumulative_c(&e, 0.0), Err(Error::Contract(_))));
        assert!(matches!(cumulative_c(&e, 1.5), Err(Error::Contract(_))));
        assert!(cumulative_c(&e, 1.0).is_ok());
        assert!(matches!(decomposed_c(&e, 1.0), Err(Error::Contract(_))));
    }

    #[test]
    fn matrix_validation() {
        assert!(ErrorMatrix::new(vec![vec![0.0]]).is_err());
        assert!(ErrorMatrix::new(vec![vec![0.0, 1.0], vec![1.0]]).is_err());
        assert!(ErrorMatrix::new(vec![vec![0.0, -1.0], vec![1.0, 1.0]]).is_err());
        assert!(ErrorMatrix::new(vec![vec![0.0, f64::NAN], vec![1.0, 1.0]]).is_err());
    }

    #[test]
    fn jensen_examples() {
        let same = vec![vec![1.0, 2.0]; 5];
        assert_eq!(jensen_check(&same).unwrap(), (0.0, 0.0));
        let (l, r) = jensen_check(&[vec![0.0], vec![1.0]]).unwrap();
        assert_eq!((l, r), (0.5, 0.5));
        assert!(jensen_check(&[vec![1.0]]).is_err());
        assert!(jensen_check(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn jensen_bernoulli_observations() {
        let mut rng = stream(4, Stream::Aux(1));
        let samples: Vec<Vec<f64>> =
            (0..10_000).map(|_| (0..OBS_DIM).map(|_| f64::from(u8::from(rng.gen_bool(0.5)))).collect()).collect();
        let (lhs, rhs) = jensen_check(&samples).unwrap();
        assert!(lhs <= rhs);
        assert!((rhs - 7.0711).abs() < 0.05, "rhs {rhs}");
        assert!((lhs - 7.0711).abs() < 0.1, "lhs {lhs}");
    }

    /// A single late spike puts all slack weight on γ^{T−1}(1−γ), which
    /// rises until γ ≈ 1 − 1/T; the slack still vanishes as γ → 1.
    #[test]
    fn late_spike_slack_rises_before_vanishing() {
        let e = ErrorMatrix::from_fn(32, |t, tp| if (t, tp) == (32, 32) { 9.0 } else { 0.0 }).unwrap();
        let s: Vec<f64> = slack_gammas().iter().map(|&g| slack(&e, g).unwrap()).collect();
        assert!(s[1] > s[0]);
        assert!(s.windows(2).skip(1).all(|w| w[1] < w[0]));
        assert!(s[5] < 1e-4);
    }

    #[test]
    fn default_suite_passes() {
        let report = verify_all(VerifyConfig::default());
        for c in &report.checks {
            assert!(c.passed, "{} failed: {:?}", c.name, c.violation);
            assert!(c.cases > 0, "{} ran no cases", c.name);
        }
        assert!(report.check(CHECK_TELESCOPING).unwrap().max_deviation < 1e-12);
    }

    #[test]
    fn zero_trials_still_run_fixed_cases() {
        let report = verify_all(VerifyConfig { trials: 0, ..VerifyConfig::default() });
        assert!(report.passed());
        assert!(report.check(CHECK_TELESCOPING).unwrap().cases > 0);
        assert_eq!(report.check(CHECK_JENSEN).unwrap().cases, 0);
    }

    #[test]
    fn seeded_report_is_repeatable() {
        let cfg = VerifyConfig { trials: 50, tmax: 10, seed: 9 };
        assert_eq!(verify_all(cfg), verify_all(cfg));
    }

    #[test]
    fn violation_carries_the_matrix() {
        let mut report = CheckReport::new("demo", 0.0);
        let e = matrix(1, 5);
        report.record(1.0, || matrix_violation("bad", None, "demo".into(), &e));
        assert!(!report.passed);
        assert_eq!(report.violation.unwrap().matrix.unwrap(), e);
    }

    proptest! {
        #[test]
        fn history_term_is_never_positive(
            t_max in 0usize..12,
            gamma in 0.01f64..0.999,
            seed in 0u64..1000,
        ) {
            let e = matrix(t_max, seed);
            let d = decomposed_c(&e, gamma).unwrap();
            prop_assert!(d.history <= 0.0);
            prop_assert!(d.per_step >= cumulative_c(&e, gamma).unwrap() - 1e-9);
        }

        #[test]
        fn two_point_sets_are_tight(a in -100.0f64..100.0, b in -100.0f64..100.0) {
            let (l, r) = jensen_check(&[vec![a], vec![b]]).unwrap();
            prop_assert!((l - r).abs() <= 1e-12);
        }
    }
}
