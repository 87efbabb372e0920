//! Command implementations behind the `decolab` binary: scenario runs,
//! figure reproduction and parameter scans, all writing plain CSV.

mod figures;
mod scenario_file;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use figures::{figure_curves, reproduce_figure, Curve, FigureId, FigureOptions};
pub use scenario_file::{
    echo_scenario, parse_complex, parse_scenario, parse_state, scenario_from_document, Document, ScenarioError,
    SCENARIO_KEYS,
};

use crate::ensemble::{
    average, compare_strategies, decoherence_metrics, kick_rate_scan, EnsembleError, EnsembleResult, HalfLife,
    Metrics, ScanResult, Scenario, DEFAULT_THRESHOLD,
};

pub const RUN_COLUMNS: [&str; 8] =
    ["t", "re_f01", "im_f01", "abs_f01", "stderr_abs_f01", "rho00", "rho11", "stderr_rho00"];

/// Residual coherence an integer-ratio kick rate must keep.
pub const INTEGER_CHECK_MIN_RESIDUAL: f64 = 0.999;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Scenario { path: String, source: ScenarioError },
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("unknown figure '{0}' (expected one of {list})", list = FigureId::ALL.map(|f| f.to_string()).join(", "))]
    UnknownFigure(String),
    #[error("unknown scan '{0}' (expected gamma-scan, integer-check or strategy-compare)")]
    UnknownScan(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(io_err(path))
}

/// 17 significant digits, `.` as decimal separator.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:.16e}")
    }
}

/// Run CSV: header, `#` comment lines, one row per grid time.
pub fn result_csv(e: &EnsembleResult, comments: &[String]) -> String {
    let mut out = RUN_COLUMNS.join(",");
    out.push('\n');
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    for k in 0..e.times.len() {
        let f = match &e.coherence {
            Some(c) => format!(
                "{},{},{},{}",
                num(c.f01[k].re),
                num(c.f01[k].im),
                num(c.abs_f01[k]),
                num(c.stderr_abs_f01[k])
            ),
            None => ",,,".into(),
        };
        let _ = writeln!(
            out,
            "{},{f},{},{},{}",
            num(e.times[k]),
            num(e.rho00[k]),
            num(e.rho11[k]),
            num(e.stderr_rho00[k])
        );
    }
    out
}

/// One-line summary of a result.
pub fn summary_line(e: &EnsembleResult) -> String {
    let last = e.times.len() - 1;
    let pops = format!("rho00(T)={:.6} rho11(T)={:.6}", e.rho00[last], e.rho11[last]);
    match decoherence_metrics(e, DEFAULT_THRESHOLD) {
        Ok(m) => format!("{} {pops}", metrics_summary(&m)),
        Err(_) => format!("f01 unavailable (diagonal initial state) {pops}"),
    }
}

fn metrics_summary(m: &Metrics) -> String {
    let t = match m.t_half {
        HalfLife::Reached { t, stderr } => format!("t_half={t:.6} s (se {stderr:.2e})"),
        HalfLife::NotReached { horizon } => format!("t_half=not reached by T={horizon}"),
    };
    let lambda = m.lambda.map_or("lambda=n/a".into(), |l| format!("lambda={l:.6} 1/s"));
    format!("{t} {lambda} residual={:.6} (se {:.2e})", m.residual, m.residual_stderr)
}

/// Optional overrides for `run`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub realizations: Option<usize>,
}

/// Parses `scenario`, runs the ensemble, writes `output` and returns the
/// summary line.
pub fn run(scenario: &Path, output: &Path, opts: RunOptions) -> Result<String, CliError> {
    let text = read(scenario)?;
    let mut s = parse_scenario(&text)
        .map_err(|source| CliError::Scenario { path: scenario.display().to_string(), source })?;
    if let Some(seed) = opts.seed {
        s.seed = seed;
    }
    if let Some(r) = opts.realizations {
        s.realizations = r;
    }
    let e = average(&s)?;
    let summary = summary_line(&e);
    let mut comments = vec![format!("decolab run {}", scenario.display())];
    comments.extend(echo_scenario(&s));
    comments.push(format!("summary: {summary}"));
    write(output, &result_csv(&e, &comments))?;
    Ok(summary)
}

/// Scan kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanKind {
    GammaScan,
    IntegerCheck,
    StrategyCompare,
}

impl std::str::FromStr for ScanKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "gamma-scan" => Ok(ScanKind::GammaScan),
            "integer-check" => Ok(ScanKind::IntegerCheck),
            "strategy-compare" => Ok(ScanKind::StrategyCompare),
            other => Err(CliError::UnknownScan(other.into())),
        }
    }
}

/// Extra keys a scan config may carry on top of the scenario keys.
pub const SCAN_KEYS: &[&str] = &["gammas", "p", "dd_freqs", "threshold"];

/// `a, b, c` or `start:stop:step` (inclusive).
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    if parts.len() == 3 {
        let [a, b, step] = [parts[0], parts[1], parts[2]].map(scenario_file::parse_f64);
        let (a, b, step) = (a?, b?, step?);
        if !(step > 0.0) || b < a {
            return Err(format!("'{s}' is not a valid start:stop:step range"));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| a + step * i as f64).collect());
    }
    let v: Vec<f64> = s.split(',').map(|t| scenario_file::parse_f64(t.trim())).collect::<Result<_, _>>()?;
    if v.is_empty() {
        return Err("empty list".into());
    }
    Ok(v)
}

/// A scan config parsed into its base scenario and scanned values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub kind: ScanKind,
    pub base: Scenario,
    pub values: Vec<f64>,
    pub threshold: f64,
}

pub fn parse_scan_config(kind: ScanKind, text: &str) -> Result<ScanConfig, ScenarioError> {
    let mut doc = Document::parse(text, SCAN_KEYS)?;
    let list_key = match kind {
        ScanKind::GammaScan => "gammas",
        ScanKind::IntegerCheck => "p",
        ScanKind::StrategyCompare => "dd_freqs",
    };
    for key in SCAN_KEYS.iter().filter(|&&k| k != list_key && k != "threshold") {
        if doc.contains(key) {
            return Err(doc.error(key, format!("not used by this scan (expected {list_key})")));
        }
    }
    let values = doc.require(list_key, parse_list)?;
    let threshold = doc.get("threshold", scenario_file::parse_f64)?.unwrap_or(DEFAULT_THRESHOLD);
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(doc.error("threshold", "threshold must lie in (0, 1)"));
    }
    match kind {
        ScanKind::GammaScan => {
            if values.iter().any(|&g| g <= 0.0) {
                return Err(doc.error(list_key, "gammas must be positive"));
            }
            doc.set_default("gamma", &values[0].to_string());
        }
        ScanKind::IntegerCheck => {
            if values.iter().any(|&p| p < 1.0 || p.fract() != 0.0) {
                return Err(doc.error(list_key, "p must be positive integers"));
            }
            if doc.contains("gamma") {
                return Err(doc.error("gamma", "integer-check derives gamma from p"));
            }
            let omega_half = doc.require("omega_half", scenario_file::parse_f64)?;
            doc.set_default("gamma", &(omega_half / values[0]).to_string());
        }
        ScanKind::StrategyCompare => {
            if values.iter().any(|&f| f <= 0.0) {
                return Err(doc.error(list_key, "dd_freqs must be positive"));
            }
        }
    }
    if ["kondo", "dd_freq"].iter().any(|k| doc.contains(k)) && kind == ScanKind::StrategyCompare {
        return Err(doc.error(if doc.contains("kondo") { "kondo" } else { "dd_freq" }, "strategy-compare sets pulses itself"));
    }
    let base = scenario_from_document(&doc)?;
    if base.kicks.is_none() {
        return Err(doc.error("alpha", "scans need kicks (alpha and gamma)"));
    }
    Ok(ScanConfig { kind, base, values, threshold })
}

/// Runs a scan and renders its CSV.
pub fn scan_csv(cfg: &ScanConfig) -> Result<String, CliError> {
    let (result, passes): (ScanResult, Option<Vec<bool>>) = match cfg.kind {
        ScanKind::GammaScan => (kick_rate_scan(&cfg.base, &cfg.values, cfg.threshold)?, None),
        ScanKind::IntegerCheck => {
            let gammas: Vec<f64> = cfg.values.iter().map(|p| cfg.base.model.omega_half / p).collect();
            let mut r = kick_rate_scan(&cfg.base, &gammas, cfg.threshold)?;
            for (row, p) in r.rows.iter_mut().zip(&cfg.values) {
                row.label = format!("p={p}");
            }
            let pass = r.rows.iter().map(|row| row.metrics.residual >= INTEGER_CHECK_MIN_RESIDUAL).collect();
            (r, Some(pass))
        }
        ScanKind::StrategyCompare => (compare_strategies(&cfg.base, &cfg.values, cfg.threshold)?, None),
    };
    let mut out = String::from("label,value,t_half,t_half_stderr,reached,lambda,residual,residual_stderr");
    if passes.is_some() {
        out.push_str(",pass");
    }
    out.push('\n');
    let _ = writeln!(out, "# threshold = {:?}", cfg.threshold);
    for line in echo_scenario(&cfg.base) {
        let _ = writeln!(out, "# {line}");
    }
    for (i, row) in result.rows.iter().enumerate() {
        let m = &row.metrics;
        let (t, se, reached) = match m.t_half {
            HalfLife::Reached { t, stderr } => (num(t), num(stderr), true),
            HalfLife::NotReached { .. } => (String::new(), String::new(), false),
        };
        let _ = write!(
            out,
            "{},{},{t},{se},{reached},{},{},{}",
            row.label,
            num(row.value),
            m.lambda.map(num).unwrap_or_default(),
            num(m.residual),
            num(m.residual_stderr)
        );
        if let Some(p) = &passes {
            let _ = write!(out, ",{}", if p[i] { "pass" } else { "fail" });
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn scan(kind: ScanKind, config: &Path, output: &Path) -> Result<String, CliError> {
    let text = read(config)?;
    let cfg = parse_scan_config(kind, &text)
        .map_err(|source| CliError::Scenario { path: config.display().to_string(), source })?;
    let csv = scan_csv(&cfg)?;
    write(output, &csv)?;
    Ok(csv)
}

/// Writes `curves` into `dir` as `<prefix>_<name>.csv`.
pub(crate) fn write_curves(dir: &Path, prefix: &str, curves: &[Curve], notes: &[String]) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut paths = Vec::with_capacity(curves.len());
    for c in curves {
        let e = average(&c.scenario)?;
        let mut comments = vec![format!("decolab figure {prefix} curve {}", c.name)];
        comments.extend(notes.iter().cloned());
        comments.extend(echo_scenario(&c.scenario));
        comments.push(format!("summary: {}", summary_line(&e)));
        let path = dir.join(format!("{prefix}_{}.csv", c.name));
        write(&path, &result_csv(&e, &comments))?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_carry_seventeen_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(1.0), "1.0000000000000000e0");
        assert_eq!(num(f64::NAN), "NaN");
        let x = std::f64::consts::PI / 7.0;
        assert_eq!(num(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn lists_and_ranges() {
        assert_eq!(parse_list("52, 152,252").unwrap(), vec![52.0, 152.0, 252.0]);
        let r = parse_list("40:260:4").unwrap();
        assert_eq!((r.len(), r[0], *r.last().unwrap()), (56, 40.0, 260.0));
        assert!(parse_list("4:1:1").is_err());
        assert!(parse_list("1, x").is_err());
    }

    #[test]
    fn scan_configs() {
        let cfg = parse_scan_config(ScanKind::IntegerCheck, "omega_half = 150\nalpha = 0.1727\nT = 1\np = 1, 2, 3\n").unwrap();
        assert_eq!(cfg.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(cfg.base.kicks.unwrap().gamma, 150.0);
        let e = parse_scan_config(ScanKind::IntegerCheck, "omega_half = 150\nalpha = 0.1\nT = 1\np = 1.5\n").unwrap_err();
        assert_eq!((e.key.as_str(), e.line), ("p", Some(4)));
        let e = parse_scan_config(ScanKind::GammaScan, "omega_half = 150\nalpha = 0.1\nT = 1\np = 1\n").unwrap_err();
        assert_eq!(e.key, "p");
        let cfg = parse_scan_config(ScanKind::GammaScan, "omega_half = 150\nalpha = 0.1\nT = 1\nkondo = on\ngammas = 40:60:10\n").unwrap();
        assert_eq!(cfg.values, vec![40.0, 50.0, 60.0]);
        assert!(cfg.base.kondo.is_some());
        assert!("gamma-scan".parse::<ScanKind>().is_ok());
        assert!(matches!("other".parse::<ScanKind>(), Err(CliError::UnknownScan(_))));
    }

    #[test]
    fn integer_check_passes() {
        let cfg = parse_scan_config(
            ScanKind::IntegerCheck,
            "omega_half = 150\nalpha = 0.1727\nT = 1\nrealizations = 8\np = 1, 2, 3\n",
        )
        .unwrap();
        let csv = scan_csv(&cfg).unwrap();
        let rows: Vec<&str> = csv.lines().filter(|l| l.starts_with("p=")).collect();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.ends_with(",pass")), "{csv}");
    }
}
