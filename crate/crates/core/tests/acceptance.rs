//! End-to-end acceptance suite. Runs without the libtest harness so every
//! check prints exactly one PASS/FAIL line, then exits non-zero if any failed.
//!
//! The experiment checks share one 9-method x 5-seed suite at full length,
//! which takes tens of minutes on a single core.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use curiosity_core::critics::BaselineKind;
use curiosity_core::env::{GridLayout, NOISE_FLOOR};
use curiosity_core::harness::{reward_mean_and_se, run_experiment, run_suite, MethodSummary, RunConfig, SuiteResult};
use curiosity_core::rewards::{MethodSpec, RndInput};
use curiosity_core::theory::{
    verify_all, TheoryReport, VerifyConfig, CHECK_DECOMPOSITION, CHECK_JENSEN, CHECK_JENSEN_EQUALITY, CHECK_REDUCTIONS,
    CHECK_SLACK_RANDOM, CHECK_SLACK_TAIL, CHECK_TELESCOPING, CHECK_UPPER_BOUND,
};

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const CC_NEURAL: MethodSpec = MethodSpec::CuriosityCritic(BaselineKind::Neural);
const CC_TABULAR: MethodSpec = MethodSpec::CuriosityCritic(BaselineKind::Tabular);
const CC_ORACLE: MethodSpec = MethodSpec::CuriosityCritic(BaselineKind::Oracle);
const RND_STATE: MethodSpec = MethodSpec::Rnd(RndInput::State);
const RND_OBS: MethodSpec = MethodSpec::Rnd(RndInput::Observation);

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
}

#[derive(Default)]
struct Ledger {
    outcomes: Vec<Outcome>,
}

impl Ledger {
    fn record(&mut self, name: &'static str, passed: bool, detail: String) {
        println!("{} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
        self.outcomes.push(Outcome { name, passed, detail });
    }
}

fn fmt_opt<T: std::fmt::Display>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_else(|| "none".into())
}

fn fmt_f(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.3}")).unwrap_or_else(|| "none".into())
}

fn theory_checks(ledger: &mut Ledger, report: &TheoryReport, trials: usize) {
    let line = |name: &str| {
        let c = report.check(name).unwrap_or_else(|| panic!("theory report lacks {name}"));
        (
            c.passed,
            format!("{name}: {} cases, max dev {:.2e} (tol {:.0e})", c.cases, c.max_deviation, c.tolerance),
            c.cases,
        )
    };

    let (ok, d, n) = line(CHECK_TELESCOPING);
    ledger.record("telescoping identity at gamma = 1", ok && n > trials, d);

    let (ok, d, n) = line(CHECK_DECOMPOSITION);
    ledger.record("history plus per-step decomposition", ok && n >= 4 * trials, d);

    let parts = [CHECK_UPPER_BOUND, CHECK_SLACK_RANDOM, CHECK_SLACK_TAIL].map(line);
    ledger.record(
        "per-step objective bounds the cumulative one, slack shrinks as gamma -> 1",
        parts.iter().all(|(ok, _, n)| *ok && *n >= trials),
        parts.iter().map(|p| p.1.clone()).collect::<Vec<_>>().join("; "),
    );

    let (ok, d, n) = line(CHECK_REDUCTIONS);
    ledger.record("zero and post-update baselines reduce to raw error and error drop", ok && n >= 10_000, d);

    let parts = [CHECK_JENSEN, CHECK_JENSEN_EQUALITY].map(line);
    ledger.record(
        "Jensen bound on the expected error",
        parts[0].0 && parts[1].0 && parts[0].2 >= trials,
        format!("{}; {}", parts[0].1, parts[1].1),
    );
}

fn gradient_check(ledger: &mut Ledger) {
    let sweep = common::gradient_sweep(0x6163_6365);
    let passed = sweep.failure.is_none() && sweep.nets >= 100 && sweep.shapes.len() == 4;
    let mut detail = format!(
        "{} nets over {:?}, {} params compared, {} skipped at kinks, worst rel err {:.2e}",
        sweep.nets, sweep.shapes, sweep.checked, sweep.skipped, sweep.worst
    );
    if let Some(f) = sweep.failure {
        detail += &format!("; first failure {f}");
    }
    ledger.record("backprop matches central differences", passed, detail);
}

fn summary(suite: &SuiteResult, m: MethodSpec) -> &MethodSummary {
    suite.summary(m).unwrap_or_else(|| panic!("suite has no {m}"))
}

fn mean(suite: &SuiteResult, m: MethodSpec) -> f64 {
    summary(suite, m).mean.unwrap_or(f64::NAN)
}

fn last5k(suite: &SuiteResult, m: MethodSpec) -> f64 {
    summary(suite, m).last5k_det_fraction.unwrap_or(f64::NAN)
}

fn crossing3(suite: &SuiteResult, m: MethodSpec) -> Option<usize> {
    summary(suite, m).crossings.iter().find(|c| c.threshold == 3.0).and_then(|c| c.seed_mean)
}

/// Seed-summed share of a named visit window spent in the deterministic half.
fn window_det_fraction(suite: &SuiteResult, m: MethodSpec, window: &str) -> Option<f64> {
    let mut det = 0u64;
    let mut total = 0u64;
    for &seed in &SEEDS {
        let w = suite.run(m, seed)?.visit_log.named_window(window)?;
        det += w.deterministic_visits();
        total += w.total();
    }
    Some(det as f64 / total.max(1) as f64)
}

fn experiment_checks(ledger: &mut Ledger, suite: &SuiteResult) {
    let failures = suite.failures();
    if failures > 0 {
        println!("note: {failures} runs aborted; their seeds are excluded from the means");
    }

    let (v1, obs) = (mean(suite, MethodSpec::V1), mean(suite, RND_OBS));
    let (fv1, fobs) = (last5k(suite, MethodSpec::V1), last5k(suite, RND_OBS));
    let band = 6.5..=7.6;
    ledger.record(
        "raw-error and observation-RND curiosity are trapped by the noise",
        band.contains(&v1) && band.contains(&obs) && fv1 < 0.10 && fobs < 0.10,
        format!("final error v1 {v1:.3}, rnd-obs {obs:.3} (want 6.5..7.6); last-5k det fraction {fv1:.3}, {fobs:.3} (want < 0.10)"),
    );

    let (nn, tab, rs, rnd) =
        (mean(suite, CC_NEURAL), mean(suite, CC_TABULAR), mean(suite, RND_STATE), mean(suite, MethodSpec::Random));
    ledger.record(
        "curiosity critics beat state RND, which beats random",
        nn < 2.3 && tab < 2.4 && nn < rs && tab < rs && rs < rnd,
        format!("cc-neural {nn:.3} (< 2.3), cc-tabular {tab:.3} (< 2.4), rnd-state {rs:.3}, random {rnd:.3}"),
    );

    let oracle = mean(suite, CC_ORACLE);
    ledger.record(
        "oracle baseline is at least as good as the neural critic",
        oracle <= nn,
        format!("cc-oracle {oracle:.3} vs cc-neural {nn:.3}"),
    );

    let floor = rnd - 0.3;
    let naive = [MethodSpec::V2, MethodSpec::VisitCount, RND_OBS].map(|m| (m, mean(suite, m)));
    ledger.record(
        "naive curiosity signals do not beat random",
        naive.iter().all(|(_, e)| *e >= floor),
        format!(
            "{} vs random - 0.3 = {floor:.3}",
            naive.iter().map(|(m, e)| format!("{m} {e:.3}")).collect::<Vec<_>>().join(", ")
        ),
    );

    let (c_nn, c_rs, c_v2) =
        (crossing3(suite, CC_NEURAL), crossing3(suite, RND_STATE), crossing3(suite, MethodSpec::V2));
    let earlier = |a: Option<usize>, b: Option<usize>| match (a, b) {
        (Some(a), Some(b)) => a + 2_000 <= b,
        (Some(_), None) => true,
        _ => false,
    };
    ledger.record(
        "seed-mean error drops below 3.0 first for cc-neural, then rnd-state, then v2",
        earlier(c_nn, c_rs) && earlier(c_rs, c_v2),
        format!(
            "cc-neural {}, rnd-state {}, v2 {} (each >= 2000 steps apart)",
            fmt_opt(c_nn),
            fmt_opt(c_rs),
            fmt_opt(c_v2)
        ),
    );

    critic_convergence(ledger, summary(suite, CC_NEURAL));

    let (fnn, for_) = (last5k(suite, CC_NEURAL), last5k(suite, CC_ORACLE));
    ledger.record(
        "critic agents focus on the learnable half late in training",
        fnn >= 0.60 && for_ >= 0.85,
        format!("last-5k det fraction cc-neural {fnn:.3} (>= 0.60), cc-oracle {for_:.3} (>= 0.85)"),
    );
}

fn critic_convergence(ledger: &mut Ledger, s: &MethodSummary) {
    let (Some(stoch), Some(det)) = (&s.critic_stoch, &s.critic_det) else {
        ledger.record("neural critic converges to the noise floor", false, "no critic curves".into());
        return;
    };
    let within = |x: f64, rel: f64| (x - NOISE_FLOOR).abs() <= rel * NOISE_FLOOR;
    let entry = stoch.mean.iter().position(|&x| within(x, 0.05));
    let entry_step = entry.map(|i| stoch.steps[i]);
    let worst_after = entry.map(|i| {
        stoch.mean[i..]
            .iter()
            .zip(&stoch.steps[i..])
            .map(|(&x, &st)| ((x - NOISE_FLOOR).abs() / NOISE_FLOOR, st))
            .fold((0.0, 0), |a, b| if b.0 > a.0 { b } else { a })
    });
    let det_final = det.mean.last().copied().unwrap_or(f64::NAN);
    let final_step = det.steps.last().copied().unwrap_or(0);
    let passed =
        entry_step.is_some_and(|s| s <= 2_000) && worst_after.is_some_and(|(dev, _)| dev <= 0.15) && det_final < 2.0;
    ledger.record(
        "neural critic converges to the noise floor",
        passed,
        format!(
            "stochastic mean within 5% at step {} (<= 2000); worst later deviation {} (<= 15%); deterministic mean {det_final:.3} at step {final_step} (< 2.0)",
            fmt_opt(entry_step),
            worst_after.map(|(d, st)| format!("{:.1}% at step {st}", 100.0 * d)).unwrap_or_else(|| "n/a".into())
        ),
    );
}

fn noise_only_error_drop(ledger: &mut Ledger) {
    let mut cfg = RunConfig::new(MethodSpec::V2, 1);
    cfg.layout = GridLayout::AllStochastic;
    let passed;
    let detail;
    match run_experiment(&cfg) {
        Ok(r) => match reward_mean_and_se(&r, 5_000, cfg.total_steps) {
            Some((m, se)) => {
                passed = m.abs() <= 3.0 * se;
                detail =
                    format!("mean error drop {m:.3e}, batch-means SE {se:.3e}, |mean|/SE {:.2} (<= 3)", m.abs() / se);
            }
            None => {
                passed = false;
                detail = "not enough reward blocks".into();
            }
        },
        Err(e) => {
            passed = false;
            detail = format!("run aborted: {e}");
        }
    }
    ledger.record("error-drop reward averages to zero when every cell is noise", passed, detail);
}

fn determinism(ledger: &mut Ledger, suite: &SuiteResult) {
    let pairs = [(CC_NEURAL, 2), (RND_OBS, 4)];
    let mut details = Vec::new();
    let mut passed = true;
    for (m, seed) in pairs {
        let first = suite.run(m, seed).map(|r| serde_json::to_string(r).unwrap());
        let again = run_experiment(&RunConfig::new(m, seed)).ok().map(|r| serde_json::to_string(&r).unwrap());
        let same = first.is_some() && first == again;
        passed &= same;
        details.push(format!(
            "{m} seed {seed}: {}",
            if same { format!("{} bytes identical", first.unwrap().len()) } else { "differs".into() }
        ));
    }
    ledger.record("repeated runs give bitwise-identical JSON logs", passed, details.join("; "));
}

fn supplementary(ledger: &mut Ledger, suite: &SuiteResult) {
    let (nn, tab, rs, v1) =
        (mean(suite, CC_NEURAL), mean(suite, CC_TABULAR), mean(suite, RND_STATE), mean(suite, MethodSpec::V1));
    ledger.record(
        "table ordering cc-neural < cc-tabular < rnd-state",
        nn < tab && tab < rs,
        format!("{nn:.3} < {tab:.3} < {rs:.3}"),
    );
    let s1 = suite.run(CC_NEURAL, 1).map(|r| r.final_error);
    ledger.record("cc-neural seed 1 final error below 2.5", s1.is_some_and(|e| e < 2.5), fmt_f(s1));
    let (c_nn, c_v2) = (crossing3(suite, CC_NEURAL), crossing3(suite, MethodSpec::V2));
    ledger.record(
        "cc-neural crosses 3.0 at least 5000 steps before v2",
        match (c_nn, c_v2) {
            (Some(a), Some(b)) => a + 5_000 <= b,
            (Some(_), None) => true,
            _ => false,
        },
        format!("cc-neural {}, v2 {}", fmt_opt(c_nn), fmt_opt(c_v2)),
    );
    let v1_late = window_det_fraction(suite, MethodSpec::V1, "late").map(|f| 1.0 - f);
    ledger.record(
        "v1 late-window visits sit in the noisy half",
        v1_late.is_some_and(|f| f >= 0.95),
        format!("stochastic share {} (>= 0.95), final error v1 {v1:.3}", fmt_f(v1_late)),
    );
    let or_late = window_det_fraction(suite, CC_ORACLE, "late");
    ledger.record(
        "cc-oracle late-window visits sit in the learnable half",
        or_late.is_some_and(|f| f >= 0.90),
        format!("deterministic share {} (>= 0.90)", fmt_f(or_late)),
    );
}

fn main() -> ExitCode {
    let mut ledger = Ledger::default();

    let cfg = VerifyConfig::default();
    let t = Instant::now();
    let report = verify_all(cfg);
    theory_checks(&mut ledger, &report, cfg.trials);
    gradient_check(&mut ledger);
    eprintln!("[theory and gradients: {:.1}s]", t.elapsed().as_secs_f64());

    let t = Instant::now();
    eprintln!("[running {} methods x {} seeds at full length]", MethodSpec::ALL.len(), SEEDS.len());
    let template = RunConfig::new(MethodSpec::Random, 0);
    let suite = run_suite(&MethodSpec::ALL, &SEEDS, &template, None).expect("suite config is valid");
    eprintln!("[suite: {:.0}s]", t.elapsed().as_secs_f64());
    for s in &suite.summaries {
        println!(
            "      {:<14} final {} +- {}  last-5k det {}  below 3.0 at {}",
            s.method.name(),
            fmt_f(s.mean),
            fmt_f(s.std),
            fmt_f(s.last5k_det_fraction),
            fmt_opt(s.crossings.first().and_then(|c| c.seed_mean))
        );
    }

    experiment_checks(&mut ledger, &suite);
    noise_only_error_drop(&mut ledger);
    determinism(&mut ledger, &suite);

    let core = ledger.outcomes.len();
    println!("-- supplementary checks --");
    supplementary(&mut ledger, &suite);

    let failed: Vec<&Outcome> = ledger.outcomes.iter().filter(|o| !o.passed).collect();
    println!(
        "acceptance: {}/{core} core checks passed, {} supplementary failures",
        ledger.outcomes[..core].iter().filter(|o| o.passed).count(),
        ledger.outcomes[core..].iter().filter(|o| !o.passed).count()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        for o in failed {
            eprintln!("failed: {} ({})", o.name, o.detail);
        }
        ExitCode::FAILURE
    }
}
