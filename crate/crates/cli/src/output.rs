use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use curiosity_core::harness::{summarize, MethodSummary, RunError, RunResult, SuiteResult};
use curiosity_core::rewards::MethodSpec;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("run aborted: {0}")]
    Run(RunError),
    #[error("{0}")]
    Partial(String),
    #[error("theory check failed")]
    Theory,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn from_run(e: RunError) -> Self {
        CliError::Run(e)
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Input(_) => 2,
            CliError::Run(e) if e.is_numerical() => 3,
            CliError::Partial(_) => 4,
            CliError::Theory => 5,
            CliError::Run(_) | CliError::Io { .. } | CliError::Csv(_) => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone)]
pub struct Seeds(pub Vec<u64>);

#[derive(Debug, Clone)]
pub struct Methods(pub Vec<MethodSpec>);

pub fn parse_seeds(s: &str) -> Result<Seeds, String> {
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| format!("bad seed range start: {e}"))?;
        let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|e| format!("bad seed range end: {e}"))?;
        if b < a {
            return Err(format!("empty seed range {a}..{b}"));
        }
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|x| x.trim().parse::<u64>().map_err(|e| format!("bad seed {x:?}: {e}")))
            .collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(Seeds(seeds))
}

pub fn parse_methods(s: &str) -> Result<Methods, String> {
    if s.trim() == "all" {
        return Ok(Methods(MethodSpec::ALL.to_vec()));
    }
    s.split(',')
        .map(|m| m.trim().parse::<MethodSpec>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()
        .map(Methods)
}

pub fn run_stem(method: MethodSpec, seed: u64) -> String {
    format!("{}_seed{seed}", method.name())
}

/// `fig.svg` with suffix `_zoom` becomes `fig_zoom.svg`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}{suffix}"),
    };
    path.with_file_name(name)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let text = serde_json::to_string_pretty(value).expect("results serialize");
    fs::write(path, text).map_err(io_err(path))
}

pub fn write_run(dir: &Path, result: &RunResult) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let stem = run_stem(result.config.method, result.config.seed);
    write_json(&dir.join(format!("run_{stem}.json")), result)?;
    let path = dir.join(format!("eval_{stem}.csv"));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["step", "mean_det_error"])?;
    for p in &result.eval_curve {
        w.write_record([p.step.to_string(), p.mean_det_error.to_string()])?;
    }
    w.flush().map_err(io_err(&path))
}

pub fn write_suite(dir: &Path, suite: &SuiteResult, seeds: &[u64]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for rec in &suite.runs {
        if let Ok(r) = &rec.outcome {
            write_run(dir, r)?;
        }
    }

    let mut w = csv::Writer::from_path(dir.join("table1.csv"))?;
    let mut header = vec!["method".to_string()];
    header.extend(seeds.iter().map(|s| format!("seed{s}")));
    header.extend(["mean".into(), "std".into()]);
    w.write_record(&header)?;
    for s in &suite.summaries {
        let mut row = vec![s.method.name().to_string()];
        row.extend(s.finals.iter().map(|f| opt(*f)));
        row.push(opt(s.mean));
        row.push(opt(s.std));
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(dir))?;

    let mut w = csv::Writer::from_path(dir.join("crossings.csv"))?;
    let mut header = vec!["method".to_string(), "threshold".into(), "seed_mean_curve".into()];
    header.extend(seeds.iter().map(|s| format!("seed{s}")));
    w.write_record(&header)?;
    for s in &suite.summaries {
        for c in &s.crossings {
            let mut row = vec![s.method.name().to_string(), c.threshold.to_string(), opt(c.seed_mean)];
            row.extend(c.per_seed.iter().map(|x| opt(*x)));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(io_err(dir))?;

    for s in &suite.summaries {
        write_curves(dir, s)?;
    }
    write_json(&dir.join("summary.json"), &suite.summaries)
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn write_curves(dir: &Path, s: &MethodSummary) -> Result<(), CliError> {
    let Some(error) = &s.error else { return Ok(()) };
    let mut w = csv::Writer::from_path(dir.join(format!("curves_{}.csv", s.method.name())))?;
    w.write_record([
        "step",
        "error_mean",
        "error_std",
        "det_fraction_mean",
        "det_fraction_std",
        "critic_det_mean",
        "critic_det_std",
        "critic_stoch_mean",
        "critic_stoch_std",
    ])?;
    let at = |b: &Option<curiosity_core::harness::Band>, i: usize| -> [String; 2] {
        match b {
            Some(b) => [b.mean[i].to_string(), b.std[i].to_string()],
            None => [String::new(), String::new()],
        }
    };
    for (i, step) in error.steps.iter().enumerate() {
        let mut row = vec![step.to_string(), error.mean[i].to_string(), error.std[i].to_string()];
        row.extend(at(&s.det_fraction, i));
        row.extend(at(&s.critic_det, i));
        row.extend(at(&s.critic_stoch, i));
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(dir))
}

/// Human-readable final-error table.
pub fn suite_table(suite: &SuiteResult) -> String {
    let mut out = format!("{:<16} {:>9} {:>9} {:>8} {:>10}\n", "method", "mean", "std", "failed", "last5k det");
    for s in &suite.summaries {
        let f = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
        out += &format!(
            "{:<16} {:>9} {:>9} {:>8} {:>10}\n",
            s.method.name(),
            f(s.mean),
            f(s.std),
            s.failures,
            f(s.last5k_det_fraction)
        );
    }
    out
}

/// Every `run_*.json` in `dir`, grouped by method in canonical order.
pub struct LoadedRuns {
    pub groups: Vec<(MethodSpec, Vec<RunResult>)>,
}

impl LoadedRuns {
    pub fn summaries(&self) -> Vec<MethodSummary> {
        self.groups
            .iter()
            .map(|(m, runs)| {
                let pairs: Vec<(u64, Option<&RunResult>)> = runs.iter().map(|r| (r.config.seed, Some(r))).collect();
                summarize(*m, &pairs)
            })
            .collect()
    }
}

pub fn load_runs(dir: &Path) -> Result<LoadedRuns, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            name.starts_with("run_") && name.ends_with(".json")
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Input(format!("no run_*.json files in {}", dir.display())));
    }
    let mut groups: Vec<(MethodSpec, Vec<RunResult>)> = Vec::new();
    for path in paths {
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let run: RunResult =
            serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        match groups.iter_mut().find(|(m, _)| *m == run.config.method) {
            Some((_, runs)) => runs.push(run),
            None => groups.push((run.config.method, vec![run])),
        }
    }
    let rank = |m: &MethodSpec| MethodSpec::ALL.iter().position(|x| x == m).unwrap_or(usize::MAX);
    groups.sort_by_key(|(m, _)| (rank(m), m.name()));
    for (_, runs) in &mut groups {
        runs.sort_by_key(|r| r.config.seed);
    }
    Ok(LoadedRuns { groups })
}
