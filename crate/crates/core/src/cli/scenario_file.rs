//! Flat `key = value` scenario files.
//!
//! ```text
//! # ZZ, kicks near resonance
//! coupling = zz
//! omega_half = 150
//! alpha = 0.1727
//! gamma = 152
//! T = 1.0
//! ```
//!
//! `#` starts a comment anywhere on a line. Keys are case-sensitive, each may
//! appear once, and unknown keys are rejected.

use std::collections::HashMap;
use std::fmt;

use num_complex::Complex64;

use crate::ensemble::{GridSpec, Scenario, DEFAULT_GRID_POINTS, DEFAULT_REALIZATIONS};
use crate::model::{
    Axis, CouplingKind, DDParams, KickParams, KondoParams, ModelParams, PulseTiming, Qubit,
};
use crate::qmat::{DensityMatrix2, Matrix2};

/// Every key a scenario file may contain.
pub const SCENARIO_KEYS: &[&str] = &[
    "coupling",
    "omega_half",
    "nu_s",
    "nu_e",
    "alpha",
    "gamma",
    "kondo",
    "kondo_delta_max",
    "kondo_gap_max",
    "kondo_axis",
    "kondo_target",
    "kondo_timing",
    "dd_freq",
    "dd_axis",
    "dd_target",
    "rho_s0",
    "rho_e0",
    "T",
    "grid",
    "grid_points",
    "realizations",
    "seed",
];

/// A parse or validation failure, located by key and (when known) line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ScenarioError {}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    line: usize,
    value: String,
}

/// Raw entries of a scenario-like file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Document {
    entries: HashMap<String, Entry>,
}

impl Document {
    /// Splits `text` into entries, accepting [`SCENARIO_KEYS`] plus `extra`.
    pub fn parse(text: &str, extra: &[&str]) -> Result<Self, ScenarioError> {
        let mut entries = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ScenarioError {
                    line: Some(line),
                    key: content.to_string(),
                    message: "expected 'key = value'".into(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            let err = |message: &str| ScenarioError { line: Some(line), key: key.to_string(), message: message.into() };
            if !SCENARIO_KEYS.contains(&key) && !extra.contains(&key) {
                return Err(err("unknown key"));
            }
            if value.is_empty() {
                return Err(err("missing value"));
            }
            if entries.contains_key(key) {
                return Err(err("duplicate key"));
            }
            entries.insert(key.to_string(), Entry { line, value: value.to_string() });
        }
        Ok(Self { entries })
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    /// Adds an entry unless the key is already present.
    pub fn set_default(&mut self, key: &str, value: &str) {
        self.entries.entry(key.to_string()).or_insert(Entry { line: 0, value: value.to_string() });
    }

    /// An error located at `key`'s line.
    pub fn error(&self, key: &str, message: impl Into<String>) -> ScenarioError {
        ScenarioError {
            line: self.entries.get(key).map(|e| e.line).filter(|&l| l > 0),
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub fn get<T>(&self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, ScenarioError> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => parse(v).map(Some).map_err(|m| self.error(key, m)),
        }
    }

    pub fn require<T>(&self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<T, ScenarioError> {
        self.get(key, parse)?.ok_or_else(|| ScenarioError {
            line: None,
            key: key.to_string(),
            message: "missing required key".into(),
        })
    }
}

pub fn parse_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(format!("'{s}' is not a finite number")),
    }
}

fn parse_usize(s: &str) -> Result<usize, String> {
    s.parse().map_err(|_| format!("'{s}' is not a non-negative integer"))
}

fn parse_u64(s: &str) -> Result<u64, String> {
    s.parse().map_err(|_| format!("'{s}' is not a 64-bit unsigned integer"))
}

fn parse_switch(s: &str) -> Result<bool, String> {
    match s {
        "on" | "true" | "yes" => Ok(true),
        "off" | "false" | "no" => Ok(false),
        _ => Err(format!("'{s}' is not on/off")),
    }
}

fn parse_with<T: std::str::FromStr<Err = String>>(s: &str) -> Result<T, String> {
    s.parse()
}

/// `1.5`, `-2i`, `0.5+0.25i`, `1e-3-4e-2i`.
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let bad = || format!("'{s}' is not a complex number");
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| bad());
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&p| matches!(bytes[p], b'+' | b'-') && !matches!(bytes[p - 1], b'e' | b'E'));
    let unit = |t: &str| match t {
        "" | "+" => Ok(1.0),
        "-" => Ok(-1.0),
        t => t.parse::<f64>().map_err(|_| bad()),
    };
    match split {
        Some(p) => {
            let re = body[..p].parse::<f64>().map_err(|_| bad())?;
            Ok(Complex64::new(re, unit(&body[p..])?))
        }
        None => Ok(Complex64::new(0.0, unit(body)?)),
    }
}

fn format_complex(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{:?}{sign}{:?}i", z.re, z.im.abs())
}

const NAMED_STATES: &[&str] = &["plus", "minus", "zero", "one", "mixed", "thermal-z"];

fn named_state(name: &str) -> Option<DensityMatrix2<f64>> {
    match name {
        "plus" => Some(DensityMatrix2::plus()),
        "minus" => DensityMatrix2::from_bloch([-1.0, 0.0, 0.0]).ok(),
        // ½(I + σz) is |0⟩⟨0|
        "zero" | "thermal-z" => Some(DensityMatrix2::zero()),
        "one" => Some(DensityMatrix2::one()),
        "mixed" => Some(DensityMatrix2::maximally_mixed()),
        _ => None,
    }
}

/// A named state or `custom r00 r01 r10 r11`.
pub fn parse_state(s: &str) -> Result<DensityMatrix2<f64>, String> {
    if let Some(rho) = named_state(s) {
        return Ok(rho);
    }
    let mut parts = s.split_whitespace();
    if parts.next() != Some("custom") {
        return Err(format!("unknown state '{s}' (expected {} or custom r00 r01 r10 r11)", NAMED_STATES.join(", ")));
    }
    let z: Vec<Complex64> = parts.map(parse_complex).collect::<Result<_, _>>()?;
    if z.len() != 4 {
        return Err(format!("custom state needs 4 entries, got {}", z.len()));
    }
    DensityMatrix2::new(Matrix2::from_rows([[z[0], z[1]], [z[2], z[3]]])).map_err(|e| e.to_string())
}

fn format_state(rho: &DensityMatrix2<f64>, preferred: &[&str]) -> String {
    for name in preferred {
        if named_state(name).as_ref() == Some(rho) {
            return name.to_string();
        }
    }
    let e = |i, j| format_complex(rho.get(i, j));
    format!("custom {} {} {} {}", e(0, 0), e(0, 1), e(1, 0), e(1, 1))
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    scenario_from_document(&Document::parse(text, &[])?)
}

/// Builds and validates a scenario, applying defaults for absent keys.
pub fn scenario_from_document(doc: &Document) -> Result<Scenario, ScenarioError> {
    let coupling: CouplingKind = doc.get("coupling", parse_with)?.unwrap_or(CouplingKind::ZZ);
    let omega_half = doc.require("omega_half", parse_f64)?;
    let nu_s = doc.get("nu_s", parse_f64)?.unwrap_or(0.0);
    let nu_e = doc.get("nu_e", parse_f64)?.unwrap_or(0.0);
    if omega_half <= 0.0 {
        return Err(doc.error("omega_half", "omega_half must be positive"));
    }
    let model = ModelParams::new(coupling, omega_half, nu_s, nu_e).map_err(|e| doc.error("omega_half", e.to_string()))?;

    let horizon = doc.require("T", parse_f64)?;
    if horizon <= 0.0 {
        return Err(doc.error("T", "T must be positive"));
    }

    let kicks = match (doc.get("alpha", parse_f64)?, doc.get("gamma", parse_f64)?) {
        (None, None) => None,
        (Some(_), None) => return Err(doc.error("alpha", "alpha needs gamma")),
        (None, Some(_)) => {
            return Err(ScenarioError { line: None, key: "alpha".into(), message: "missing required key".into() })
        }
        (Some(alpha), Some(gamma)) => {
            if gamma <= 0.0 {
                return Err(doc.error("gamma", "gamma must be positive"));
            }
            if alpha < 0.0 {
                return Err(doc.error("alpha", "alpha must be non-negative"));
            }
            let k = KickParams { alpha, gamma };
            k.count(horizon).map_err(|e| doc.error("gamma", e.to_string()))?;
            Some(k)
        }
    };

    let kondo_keys = ["kondo_delta_max", "kondo_gap_max", "kondo_axis", "kondo_target", "kondo_timing"];
    let kondo = if doc.get("kondo", parse_switch)?.unwrap_or(false) {
        let mut k = KondoParams::for_model(&model, PulseTiming::default_for(coupling, kicks.is_some()));
        if let Some(d) = doc.get("kondo_delta_max", parse_f64)? {
            k.delta_max = d;
            k.gap_max = d;
        }
        if let Some(g) = doc.get("kondo_gap_max", parse_f64)? {
            k.gap_max = g;
        }
        if let Some(a) = doc.get("kondo_axis", parse_with::<Axis>)? {
            k.axis = a;
        }
        if let Some(q) = doc.get("kondo_target", parse_with::<Qubit>)? {
            k.target = q;
        }
        if let Some(t) = doc.get("kondo_timing", parse_with::<PulseTiming>)? {
            if t == PulseTiming::KickGrid && kicks.is_none() {
                return Err(doc.error("kondo_timing", "kick-grid timing needs kicks"));
            }
            k.timing = t;
        }
        if k.delta_max <= 0.0 {
            return Err(doc.error("kondo_delta_max", "kondo_delta_max must be positive"));
        }
        if k.gap_max < 0.0 {
            return Err(doc.error("kondo_gap_max", "kondo_gap_max must be non-negative"));
        }
        if horizon <= k.delta_max {
            return Err(doc.error("T", "T must exceed kondo_delta_max"));
        }
        Some(k)
    } else {
        if let Some(key) = kondo_keys.iter().find(|k| doc.contains(k)) {
            return Err(doc.error(key, "set kondo = on to use this key"));
        }
        None
    };

    let dd_freq = doc.get("dd_freq", parse_f64)?.unwrap_or(0.0);
    let dd = if dd_freq < 0.0 {
        return Err(doc.error("dd_freq", "dd_freq must be non-negative"));
    } else if dd_freq > 0.0 {
        let axis = doc.get("dd_axis", parse_with::<Axis>)?.unwrap_or(coupling.refocusing_axis());
        let target = doc.get("dd_target", parse_with::<Qubit>)?.unwrap_or(Qubit::S);
        let d = DDParams { freq: dd_freq, target, axis };
        crate::model::dd_timeline(&d, horizon).map_err(|e| doc.error("dd_freq", e.to_string()))?;
        Some(d)
    } else {
        if let Some(key) = ["dd_axis", "dd_target"].iter().find(|k| doc.contains(k)) {
            return Err(doc.error(key, "set dd_freq > 0 to use this key"));
        }
        None
    };

    let rho_s0 = doc.get("rho_s0", parse_state)?.unwrap_or_else(DensityMatrix2::plus);
    let rho_e0 = doc.get("rho_e0", parse_state)?.unwrap_or_else(DensityMatrix2::zero);

    let grid_points = doc.get("grid_points", parse_usize)?;
    let grid = match doc.raw("grid") {
        Some("kicks") => {
            if kicks.is_none() {
                return Err(doc.error("grid", "grid = kicks needs kicks"));
            }
            if grid_points.is_some() {
                return Err(doc.error("grid_points", "grid_points only applies to grid = uniform"));
            }
            GridSpec::KickInstants
        }
        Some("uniform") => GridSpec::Uniform(grid_points.unwrap_or(DEFAULT_GRID_POINTS)),
        Some(other) => return Err(doc.error("grid", format!("unknown grid '{other}' (expected kicks or uniform)"))),
        None => match (grid_points, kicks) {
            (Some(n), _) => GridSpec::Uniform(n),
            (None, Some(_)) => GridSpec::KickInstants,
            (None, None) => GridSpec::Uniform(DEFAULT_GRID_POINTS),
        },
    };
    if let GridSpec::Uniform(n) = grid {
        if n < 2 {
            return Err(doc.error("grid_points", "grid_points must be at least 2"));
        }
    }

    let realizations = doc.get("realizations", parse_usize)?.unwrap_or(DEFAULT_REALIZATIONS);
    if realizations == 0 {
        return Err(doc.error("realizations", "realizations must be at least 1"));
    }
    let seed = doc.get("seed", parse_u64)?.unwrap_or(0);

    let s = Scenario { model, kicks, kondo, dd, rho_s0, rho_e0, horizon, grid, realizations, seed };
    s.validate().map_err(|e| ScenarioError { line: None, key: "scenario".into(), message: e.to_string() })?;
    Ok(s)
}

/// Resolved `key = value` lines; parsing them back yields the same scenario.
pub fn echo_scenario(s: &Scenario) -> Vec<String> {
    let mut out = vec![
        format!("coupling = {}", s.model.coupling),
        format!("omega_half = {:?}", s.model.omega_half),
        format!("nu_s = {:?}", s.model.nu_s),
        format!("nu_e = {:?}", s.model.nu_e),
    ];
    if let Some(k) = &s.kicks {
        out.push(format!("alpha = {:?}", k.alpha));
        out.push(format!("gamma = {:?}", k.gamma));
    }
    match &s.kondo {
        Some(k) => {
            out.push("kondo = on".into());
            out.push(format!("kondo_delta_max = {:?}", k.delta_max));
            out.push(format!("kondo_gap_max = {:?}", k.gap_max));
            out.push(format!("kondo_axis = {}", k.axis));
            out.push(format!("kondo_target = {}", k.target));
            out.push(format!("kondo_timing = {}", k.timing));
        }
        None => out.push("kondo = off".into()),
    }
    match &s.dd {
        Some(d) => {
            out.push(format!("dd_freq = {:?}", d.freq));
            out.push(format!("dd_axis = {}", d.axis));
            out.push(format!("dd_target = {}", d.target));
        }
        None => out.push("dd_freq = 0".into()),
    }
    out.push(format!("rho_s0 = {}", format_state(&s.rho_s0, &["plus", "minus", "zero", "one", "mixed"])));
    out.push(format!("rho_e0 = {}", format_state(&s.rho_e0, &["thermal-z", "one", "plus", "minus", "mixed"])));
    out.push(format!("T = {:?}", s.horizon));
    match s.grid {
        GridSpec::KickInstants => out.push("grid = kicks".into()),
        GridSpec::Uniform(n) => {
            out.push("grid = uniform".into());
            out.push(format!("grid_points = {n}"));
        }
    }
    out.push(format!("realizations = {}", s.realizations));
    out.push(format!("seed = {}", s.seed));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "omega_half = 150\nalpha = 0.1727\ngamma = 152\nT = 1.0\n";

    #[test]
    fn minimal_file_gets_defaults() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.model.coupling, CouplingKind::ZZ);
        assert_eq!((s.model.omega_half, s.model.nu_s, s.model.nu_e), (150.0, 0.0, 0.0));
        assert_eq!(s.kicks, Some(KickParams { alpha: 0.1727, gamma: 152.0 }));
        assert_eq!(s.rho_s0, DensityMatrix2::plus());
        assert_eq!(s.rho_e0, DensityMatrix2::zero());
        assert_eq!(s.grid, GridSpec::KickInstants);
        assert_eq!((s.realizations, s.seed, s.horizon), (500, 0, 1.0));
        assert!(s.kondo.is_none() && s.dd.is_none());
    }

    #[test]
    fn xx_plus_file() {
        let s = parse_scenario("coupling = xx\nomega_half = 150\nrho_s0 = plus\nT = 0.5\n").unwrap();
        assert_eq!(s.model.coupling, CouplingKind::XX);
        assert_eq!(s.rho_s0, DensityMatrix2::plus());
        // |+⟩ in the ± frame is |0⟩ in the computational basis
        assert!((s.system_state().get(0, 0).re - 1.0).abs() < 1e-15);
        assert_eq!(s.grid, GridSpec::Uniform(200));
    }

    #[test]
    fn kondo_timing_defaults_follow_coupling() {
        let timing = |c: &str| {
            let text = format!("coupling = {c}\nomega_half = 150\nalpha = 0.17\ngamma = 152\nkondo = on\nT = 1\n");
            parse_scenario(&text).unwrap().kondo.unwrap().timing
        };
        assert_eq!(timing("zz"), PulseTiming::KickGrid);
        assert_eq!(timing("xx"), PulseTiming::Continuous);
        let s = parse_scenario("omega_half = 150\nkondo = on\nT = 1\n").unwrap();
        assert_eq!(s.kondo.unwrap().timing, PulseTiming::Continuous);
    }

    #[test]
    fn zero_gamma_is_rejected_with_location() {
        let e = parse_scenario("omega_half = 150\nalpha = 0.1727\n# comment\ngamma = 0\nT = 1\n").unwrap_err();
        assert_eq!(e.key, "gamma");
        assert_eq!(e.line, Some(4));
        assert_eq!(e.message, "gamma must be positive");
        assert_eq!(e.to_string(), "line 4: gamma: gamma must be positive");
    }

    #[test]
    fn errors_name_key_and_line() {
        let e = parse_scenario("omega_half = 150\nT = 1\nbogus = 3\n").unwrap_err();
        assert_eq!((e.line, e.key.as_str(), e.message.as_str()), (Some(3), "bogus", "unknown key"));
        let e = parse_scenario("omega_half = 150\nT = 1\nT = 2\n").unwrap_err();
        assert_eq!((e.line, e.message.as_str()), (Some(3), "duplicate key"));
        let e = parse_scenario("omega_half = abc\nT = 1\n").unwrap_err();
        assert_eq!((e.line, e.key.as_str()), (Some(1), "omega_half"));
        let e = parse_scenario("omega_half = 150\n").unwrap_err();
        assert_eq!((e.line, e.key.as_str(), e.message.as_str()), (None, "T", "missing required key"));
        let e = parse_scenario("omega_half = 150\nT = 1\nalpha = -0.1\ngamma = 10\n").unwrap_err();
        assert_eq!((e.line, e.key.as_str()), (Some(3), "alpha"));
        let e = parse_scenario("omega_half = 150\nT = 1\njust words\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        let e = parse_scenario("omega_half = 150\nT = 1\ndd_axis = z\n").unwrap_err();
        assert_eq!(e.key, "dd_axis");
        let e = parse_scenario("omega_half = 150\nT = 1\nrho_s0 = custom 1 0 0 1\n").unwrap_err();
        assert_eq!(e.key, "rho_s0");
    }

    #[test]
    fn complex_literals() {
        let c = |re, im| Complex64::new(re, im);
        assert_eq!(parse_complex("1.5").unwrap(), c(1.5, 0.0));
        assert_eq!(parse_complex("-2i").unwrap(), c(0.0, -2.0));
        assert_eq!(parse_complex("i").unwrap(), c(0.0, 1.0));
        assert_eq!(parse_complex("0.5+0.25i").unwrap(), c(0.5, 0.25));
        assert_eq!(parse_complex("1e-3-4e-2i").unwrap(), c(1e-3, -4e-2));
        assert_eq!(parse_complex("-1e+2+i").unwrap(), c(-100.0, 1.0));
        assert!(parse_complex("1+x i").is_err());
        let z = c(-0.1, 3e-17);
        assert_eq!(parse_complex(&format_complex(z)).unwrap(), z);
    }

    #[test]
    fn custom_states() {
        let rho = parse_state("custom 0.5 0.5i -0.5i 0.5").unwrap();
        assert!((rho.get(0, 1) - Complex64::new(0.0, 0.5)).norm() < 1e-15);
        assert!(parse_state("custom 1 0 0").is_err());
        assert!(parse_state("banana").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let texts = [
            MINIMAL.to_string(),
            "coupling = xx\nomega_half = 150\nalpha = 0.17\ngamma = 102\ndd_freq = 10.2\nT = 0.5\nseed = 9\n".into(),
            "omega_half = 150\nalpha = 0.17\ngamma = 152\nkondo = on\nkondo_axis = y\nrho_s0 = custom 0.7 0.1+0.2i 0.1-0.2i 0.3\nrho_e0 = mixed\nT = 1\ngrid_points = 77\nrealizations = 3\n".into(),
            "omega_half = 150\nkondo = on\nnu_s = 12.5\nT = 0.1\n".into(),
        ];
        for text in texts {
            let s = parse_scenario(&text).unwrap();
            let echo = echo_scenario(&s).join("\n");
            assert_eq!(parse_scenario(&echo).unwrap(), s, "{echo}");
        }
    }
}
