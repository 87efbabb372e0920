//! Built-in parameter sets for the figure curves.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{write_curves, CliError};
use crate::ensemble::{GridSpec, Scenario, Strategy, DEFAULT_REALIZATIONS};
use crate::model::{CouplingKind, KickParams, ModelParams};
use crate::qmat::DensityMatrix2;

pub const OMEGA_HALF: f64 = 150.0;
pub const ALPHA: f64 = 0.11 * std::f64::consts::FRAC_PI_2;
pub const ZZ_HORIZON: f64 = 1.0;
pub const XX_HORIZON: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureId {
    Fig2a,
    Fig2b,
    Fig3a,
    Fig3b,
    Fig4a,
    Fig4b,
    Fig5a,
    Fig5b,
    Fig6a,
    Fig6b,
}

impl FigureId {
    pub const ALL: [FigureId; 10] = [
        FigureId::Fig2a,
        FigureId::Fig2b,
        FigureId::Fig3a,
        FigureId::Fig3b,
        FigureId::Fig4a,
        FigureId::Fig4b,
        FigureId::Fig5a,
        FigureId::Fig5b,
        FigureId::Fig6a,
        FigureId::Fig6b,
    ];

    pub fn coupling(self) -> CouplingKind {
        match self {
            FigureId::Fig5a | FigureId::Fig5b | FigureId::Fig6a | FigureId::Fig6b => CouplingKind::XX,
            _ => CouplingKind::ZZ,
        }
    }

    /// Comment lines attached to every curve of the figure.
    pub fn notes(self) -> Vec<String> {
        match self {
            FigureId::Fig2a => vec!["note: kick-rate set is a reconstruction, not listed with the figure".into()],
            FigureId::Fig2b => vec![
                "note: decoupling frequencies and kick rate are a reconstruction, not listed with the figure".into(),
            ],
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FigureId::Fig2a => "fig2a",
            FigureId::Fig2b => "fig2b",
            FigureId::Fig3a => "fig3a",
            FigureId::Fig3b => "fig3b",
            FigureId::Fig4a => "fig4a",
            FigureId::Fig4b => "fig4b",
            FigureId::Fig5a => "fig5a",
            FigureId::Fig5b => "fig5b",
            FigureId::Fig6a => "fig6a",
            FigureId::Fig6b => "fig6b",
        };
        f.write_str(s)
    }
}

impl FromStr for FigureId {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        FigureId::ALL
            .into_iter()
            .find(|f| f.to_string() == s)
            .ok_or_else(|| CliError::UnknownFigure(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FigureOptions {
    pub seed: u64,
    pub realizations: usize,
    /// Defaults to 1 s for `zz` figures and 0.5 s for `xx` figures.
    pub horizon: Option<f64>,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self { seed: 1, realizations: DEFAULT_REALIZATIONS, horizon: None }
    }
}

/// One curve of a figure.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub name: String,
    pub scenario: Scenario,
}

fn base(id: FigureId, gamma: f64, opts: &FigureOptions) -> Scenario {
    let coupling = id.coupling();
    let horizon = opts.horizon.unwrap_or(match coupling {
        CouplingKind::ZZ => ZZ_HORIZON,
        CouplingKind::XX => XX_HORIZON,
    });
    let model = ModelParams { coupling, omega_half: OMEGA_HALF, nu_s: 0.0, nu_e: 0.0 };
    let mut s = Scenario::new(model, DensityMatrix2::plus(), DensityMatrix2::zero(), horizon);
    s.kicks = Some(KickParams { alpha: ALPHA, gamma });
    s.grid = GridSpec::KickInstants;
    s.realizations = opts.realizations;
    s.seed = opts.seed;
    s
}

fn freq_name(f: f64) -> String {
    format!("dd_{f}hz")
}

fn strategy_curves(id: FigureId, gamma: f64, strategies: &[Strategy], opts: &FigureOptions) -> Vec<Curve> {
    let b = base(id, gamma, opts);
    strategies
        .iter()
        .map(|st| Curve {
            name: match st {
                Strategy::KicksOnly => "kicks".into(),
                Strategy::Decoupling(f) => freq_name(*f),
                Strategy::Kondo => "kondo".into(),
            },
            scenario: st.apply(&b),
        })
        .collect()
}

fn kick_rate_curves(id: FigureId, gammas: &[f64], opts: &FigureOptions) -> Vec<Curve> {
    gammas
        .iter()
        .map(|&g| Curve { name: format!("kicks_g{g}"), scenario: base(id, g, opts) })
        .collect()
}

/// Curves of figure `id`, sharing the kick streams of `opts.seed`.
pub fn figure_curves(id: FigureId, opts: &FigureOptions) -> Vec<Curve> {
    use Strategy::{Decoupling as Dd, Kondo, KicksOnly};
    match id {
        FigureId::Fig2a => kick_rate_curves(id, &[52.0, 102.0, 152.0, 202.0, 252.0], opts),
        FigureId::Fig2b => strategy_curves(id, 152.0, &[Dd(7.6), Dd(12.67), Dd(42.0), Dd(76.0)], opts),
        FigureId::Fig3a => strategy_curves(id, 52.0, &[Dd(13.0), KicksOnly, Kondo], opts),
        FigureId::Fig3b => strategy_curves(id, 252.0, &[Dd(42.0), KicksOnly, Kondo], opts),
        FigureId::Fig4a => strategy_curves(id, 152.0, &[Dd(12.67), KicksOnly, Kondo], opts),
        FigureId::Fig4b => strategy_curves(id, 152.0, &[Dd(76.0), Dd(7.6), Kondo], opts),
        FigureId::Fig5a => kick_rate_curves(id, &[52.0, 152.0, 202.0], opts),
        FigureId::Fig5b => strategy_curves(id, 102.0, &[Dd(25.5), Dd(10.2), Dd(5.10)], opts),
        FigureId::Fig6a => strategy_curves(id, 102.0, &[Dd(10.2), KicksOnly, Kondo], opts),
        FigureId::Fig6b => strategy_curves(id, 152.0, &[Dd(15.2), KicksOnly, Kondo], opts),
    }
}

/// Writes one CSV per curve into `dir` and returns their paths.
pub fn reproduce_figure(id: FigureId, dir: &Path, opts: &FigureOptions) -> Result<Vec<PathBuf>, CliError> {
    let curves = figure_curves(id, opts);
    write_curves(dir, &id.to_string(), &curves, &id.notes())
}
