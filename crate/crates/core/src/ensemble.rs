//! Monte Carlo averaging over noise realizations, observables and scans.
//!
//! Every realization `r` owns two ChaCha8 streams derived from the scenario
//! seed: stream `2r` drives the kicks and stream `2r + 1` the randomized
//! pulse pairs. Adding or removing a noise source therefore never shifts the
//! kick angles of a realization, which is what makes strategy comparisons
//! paired.

use std::fmt;

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{
    dd_timeline, run_realization, sample_kick_timeline, sample_kondo_timeline, CouplingKind, DDParams,
    KickParams, KondoParams, ModelError, ModelParams, PulseTiming, Qubit, Timeline, Trajectory,
};
use crate::qmat::{hadamard_frame, partial_trace_env, product_state, DensityMatrix, DensityMatrix2, Matrix2};

pub const DEFAULT_REALIZATIONS: usize = 500;
pub const DEFAULT_GRID_POINTS: usize = 200;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Off-diagonals smaller than this make `f01` undefined.
pub const COHERENCE_FLOOR: f64 = 1e-12;

// fixed chunking keeps the reduction order independent of the thread count
const CHUNK: usize = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnsembleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("observable unavailable: {0}")]
    ObservableUnavailable(&'static str),
    #[error("scan needs at least one parameter value")]
    EmptyScan,
}

fn invalid(msg: impl Into<String>) -> EnsembleError {
    EnsembleError::InvalidScenario(msg.into())
}

/// Where the system is sampled.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    /// `m T / n` for `m = 0..=n`; requires kicks.
    KickInstants,
    /// `points` evenly spaced times on `[0, T]`.
    Uniform(usize),
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridSpec::KickInstants => f.write_str("kicks"),
            GridSpec::Uniform(n) => write!(f, "uniform({n})"),
        }
    }
}

/// A complete experiment.
///
/// `rho_s0` is given in the coupling's working frame: computational for
/// `zz`, `{|+⟩, |−⟩}` for `xx`. `rho_e0` is always computational.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub model: ModelParams<f64>,
    pub kicks: Option<KickParams<f64>>,
    pub kondo: Option<KondoParams<f64>>,
    pub dd: Option<DDParams<f64>>,
    pub rho_s0: DensityMatrix2<f64>,
    pub rho_e0: DensityMatrix2<f64>,
    pub horizon: f64,
    pub grid: GridSpec,
    pub realizations: usize,
    pub seed: u64,
}

impl Scenario {
    /// Noise-free scenario on the default grid.
    pub fn new(model: ModelParams<f64>, rho_s0: DensityMatrix2<f64>, rho_e0: DensityMatrix2<f64>, horizon: f64) -> Self {
        Self {
            model,
            kicks: None,
            kondo: None,
            dd: None,
            rho_s0,
            rho_e0,
            horizon,
            grid: GridSpec::Uniform(DEFAULT_GRID_POINTS),
            realizations: DEFAULT_REALIZATIONS,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        self.model.validate()?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("T must be positive"));
        }
        if self.realizations == 0 {
            return Err(invalid("realizations must be at least 1"));
        }
        if let Some(k) = &self.kicks {
            k.validate()?;
            k.count(self.horizon)?;
        }
        if let Some(k) = &self.kondo {
            k.validate()?;
            if !(self.horizon > k.delta_max) {
                return Err(invalid("T must exceed kondo_delta_max"));
            }
            if k.timing == PulseTiming::KickGrid && self.kicks.is_none() {
                return Err(invalid("kondo_timing = kick-grid needs kicks"));
            }
        }
        if let Some(d) = &self.dd {
            dd_timeline(d, self.horizon)?;
        }
        match self.grid {
            GridSpec::KickInstants if self.kicks.is_none() => return Err(invalid("grid = kicks needs kicks")),
            GridSpec::Uniform(n) if n < 2 => return Err(invalid("grid_points must be at least 2")),
            _ => {}
        }
        self.rho_s0.validate().map_err(|e| invalid(format!("rho_s0: {e}")))?;
        self.rho_e0.validate().map_err(|e| invalid(format!("rho_e0: {e}")))?;
        Ok(())
    }

    pub fn grid_times(&self) -> Result<Vec<f64>, EnsembleError> {
        match self.grid {
            GridSpec::KickInstants => {
                let k = self.kicks.as_ref().ok_or_else(|| invalid("grid = kicks needs kicks"))?;
                Ok(crate::model::kick_instants(k, self.horizon)?)
            }
            GridSpec::Uniform(n) => {
                if n < 2 {
                    return Err(invalid("grid_points must be at least 2"));
                }
                let last = (n - 1) as f64;
                Ok((0..n).map(|i| if i + 1 == n { self.horizon } else { self.horizon * i as f64 / last }).collect())
            }
        }
    }

    /// `ρ^S(0)` in the computational basis the simulation runs in.
    pub fn system_state(&self) -> DensityMatrix2<f64> {
        match self.model.coupling {
            CouplingKind::ZZ => self.rho_s0.clone(),
            CouplingKind::XX => hadamard_frame(&self.rho_s0),
        }
    }

    /// `ρ^S_{01}(0)` exactly as the simulation sees it at `t = 0`.
    fn initial_coherence(&self) -> Result<Complex64, EnsembleError> {
        let joint = product_state(&self.system_state(), &self.rho_e0);
        let reduced = partial_trace_env(&joint).map_err(|e| invalid(format!("initial state: {e}")))?;
        Ok(reduced.get(0, 1))
    }
}

fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Event timelines of realization `r`.
pub fn realization_timelines(s: &Scenario, r: usize) -> Result<Vec<Timeline<f64>>, EnsembleError> {
    let mut out = Vec::with_capacity(3);
    let r = r as u64;
    let mut n_kicks = None;
    if let Some(k) = &s.kicks {
        let tl = sample_kick_timeline(k, s.horizon, &mut stream(s.seed, 2 * r))?;
        n_kicks = Some(tl.len());
        out.push(tl);
    }
    if let Some(k) = &s.kondo {
        let tl = sample_kondo_timeline(k, s.horizon, &mut stream(s.seed, 2 * r + 1))?;
        out.push(match (k.timing, n_kicks) {
            (PulseTiming::KickGrid, Some(n)) => tl.snap_to_kick_grid(n),
            (PulseTiming::KickGrid, None) => return Err(invalid("kondo_timing = kick-grid needs kicks")),
            (PulseTiming::Continuous, _) => tl,
        });
    }
    if let Some(d) = &s.dd {
        out.push(dd_timeline(d, s.horizon)?);
    }
    Ok(out)
}

/// One realization sampled on the scenario grid.
pub fn run_one(s: &Scenario, r: usize) -> Result<Trajectory<f64>, EnsembleError> {
    let grid = s.grid_times()?;
    let timelines = realization_timelines(s, r)?;
    Ok(run_realization(&s.model, &timelines, &s.system_state(), &s.rho_e0, &grid, s.horizon)?)
}

/// Every realization, in index order. Holds all trajectories in memory.
pub fn run_realizations(s: &Scenario) -> Result<Vec<Trajectory<f64>>, EnsembleError> {
    s.validate()?;
    (0..s.realizations).into_par_iter().map(|r| run_one(s, r)).collect()
}

/// Running moments at one sample time.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    rho_sum: [Complex64; 4],
    f_mean: Complex64,
    c_rr: f64,
    c_ii: f64,
    c_ri: f64,
    p_mean: f64,
    c_pp: f64,
}

impl Moments {
    fn push(&mut self, rho: &DensityMatrix2<f64>, f: Option<Complex64>) {
        self.n += 1.0;
        let n = self.n;
        for (i, slot) in self.rho_sum.iter_mut().enumerate() {
            *slot += rho.get(i / 2, i % 2);
        }
        if let Some(f) = f {
            let d = f - self.f_mean;
            self.f_mean += d / n;
            let e = f - self.f_mean;
            self.c_rr += d.re * e.re;
            self.c_ii += d.im * e.im;
            self.c_ri += d.re * e.im;
        }
        let p = rho.get(0, 0).re;
        let d = p - self.p_mean;
        self.p_mean += d / n;
        self.c_pp += d * (p - self.p_mean);
    }

    fn merge(&mut self, o: &Moments) {
        if o.n == 0.0 {
            return;
        }
        let (na, nb) = (self.n, o.n);
        let n = na + nb;
        let w = na * nb / n;
        for (a, b) in self.rho_sum.iter_mut().zip(&o.rho_sum) {
            *a += *b;
        }
        let d = o.f_mean - self.f_mean;
        self.f_mean += d * (nb / n);
        self.c_rr += o.c_rr + d.re * d.re * w;
        self.c_ii += o.c_ii + d.im * d.im * w;
        self.c_ri += o.c_ri + d.re * d.im * w;
        let dp = o.p_mean - self.p_mean;
        self.p_mean += dp * (nb / n);
        self.c_pp += o.c_pp + dp * dp * w;
        self.n = n;
    }

    /// Standard error of `|mean f|`, projecting the covariance on the
    /// direction of the mean.
    fn stderr_abs_f(&self) -> f64 {
        if self.n < 2.0 {
            return f64::NAN;
        }
        let dof = self.n - 1.0;
        let (vrr, vii, vri) = (self.c_rr / dof, self.c_ii / dof, self.c_ri / dof);
        let m = self.f_mean.norm();
        let var = if m > COHERENCE_FLOOR {
            let (ur, ui) = (self.f_mean.re / m, self.f_mean.im / m);
            ur * ur * vrr + ui * ui * vii + 2.0 * ur * ui * vri
        } else {
            vrr + vii
        };
        (var.max(0.0) / self.n).sqrt()
    }

    fn stderr_p(&self) -> f64 {
        if self.n < 2.0 {
            return f64::NAN;
        }
        (self.c_pp.max(0.0) / (self.n - 1.0) / self.n).sqrt()
    }
}

/// Normalized coherence `f01(t) = ⟨ρ^S_{01}(t)⟩ / ρ^S_{01}(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coherence {
    pub f01: Vec<Complex64>,
    pub abs_f01: Vec<f64>,
    pub stderr_abs_f01: Vec<f64>,
}

/// Ensemble means over realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub mean_rho: Vec<DensityMatrix2<f64>>,
    /// `None` when the initial state has no coherence to normalize by.
    pub coherence: Option<Coherence>,
    pub rho00: Vec<f64>,
    pub rho11: Vec<f64>,
    pub stderr_rho00: Vec<f64>,
    pub realizations: usize,
}

impl EnsembleResult {
    pub fn coherence(&self) -> Result<&Coherence, EnsembleError> {
        self.coherence
            .as_ref()
            .ok_or(EnsembleError::ObservableUnavailable("f01 is undefined for a diagonal initial system state"))
    }

    pub fn abs_f01(&self) -> Result<&[f64], EnsembleError> {
        Ok(&self.coherence()?.abs_f01)
    }
}

/// Averages `ρ^S(t)` over `s.realizations` independent realizations.
///
/// Realizations are grouped into fixed chunks that run in parallel; chunks
/// are combined in index order, so the result does not depend on the
/// number of worker threads.
pub fn average(s: &Scenario) -> Result<EnsembleResult, EnsembleError> {
    s.validate()?;
    let times = s.grid_times()?;
    let c0 = s.initial_coherence()?;
    let normalizer = (c0.norm() > COHERENCE_FLOOR).then_some(c0);
    let chunks = s.realizations.div_ceil(CHUNK);

    let partial: Vec<Vec<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![Moments::default(); times.len()];
            for r in c * CHUNK..((c + 1) * CHUNK).min(s.realizations) {
                let traj = run_one(s, r)?;
                for (m, rho) in acc.iter_mut().zip(&traj.states) {
                    m.push(rho, normalizer.map(|c0| rho.get(0, 1) / c0));
                }
            }
            Ok(acc)
        })
        .collect::<Result<_, EnsembleError>>()?;

    let mut total = vec![Moments::default(); times.len()];
    for chunk in &partial {
        for (a, b) in total.iter_mut().zip(chunk) {
            a.merge(b);
        }
    }

    let r = s.realizations as f64;
    let mean_rho: Vec<DensityMatrix2<f64>> = total
        .iter()
        .map(|m| {
            let e = |i: usize| m.rho_sum[i] / r;
            DensityMatrix::new_unchecked(Matrix2::from_rows([[e(0), e(1)], [e(2), e(3)]]))
        })
        .collect();
    let coherence = normalizer.map(|_| Coherence {
        f01: total.iter().map(|m| m.f_mean).collect(),
        abs_f01: total.iter().map(|m| m.f_mean.norm()).collect(),
        stderr_abs_f01: total.iter().map(Moments::stderr_abs_f).collect(),
    });
    let rho00: Vec<f64> = mean_rho.iter().map(|m| m.get(0, 0).re).collect();
    let rho11 = mean_rho.iter().map(|m| m.get(1, 1).re).collect();
    Ok(EnsembleResult {
        times,
        mean_rho,
        coherence,
        rho00,
        rho11,
        stderr_rho00: total.iter().map(Moments::stderr_p).collect(),
        realizations: s.realizations,
    })
}

/// `(rho00, rho11)` in the computational basis at every grid time.
pub fn population_observables(e: &EnsembleResult) -> Vec<(f64, f64)> {
    e.rho00.iter().copied().zip(e.rho11.iter().copied()).collect()
}

/// Time at which a decaying curve first drops below the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HalfLife {
    Reached { t: f64, stderr: f64 },
    /// Censored at the horizon.
    NotReached { horizon: f64 },
}

impl HalfLife {
    pub fn time(&self) -> Option<f64> {
        match *self {
            HalfLife::Reached { t, .. } => Some(t),
            HalfLife::NotReached { .. } => None,
        }
    }

    /// Point estimate, or the horizon as a lower bound when censored.
    pub fn lower_bound(&self) -> f64 {
        match *self {
            HalfLife::Reached { t, .. } => t,
            HalfLife::NotReached { horizon } => horizon,
        }
    }

    pub fn stderr(&self) -> f64 {
        match *self {
            HalfLife::Reached { stderr, .. } => stderr,
            HalfLife::NotReached { .. } => 0.0,
        }
    }

    /// `self` outlasts `other` by more than `k` combined standard errors.
    /// A censored `self` counts at its lower bound; a censored `other`
    /// can never be beaten.
    pub fn exceeds(&self, other: &HalfLife, k: f64) -> bool {
        let Some(t_other) = other.time() else { return false };
        let se = self.stderr().hypot(other.stderr());
        self.lower_bound() - t_other > k * se
    }
}

/// Summary of one decay curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub t_half: HalfLife,
    /// Fitted rate of `log |f01|`, 1/s; `None` with fewer than 3 usable points.
    pub lambda: Option<f64>,
    /// `|f01(T)|`.
    pub residual: f64,
    pub residual_stderr: f64,
}

/// `t½` by linear interpolation with a delta-method standard error, and a
/// least-squares rate over the points before `t½`.
pub fn decoherence_metrics(e: &EnsembleResult, threshold: f64) -> Result<Metrics, EnsembleError> {
    let c = e.coherence()?;
    let t_half = first_crossing(&e.times, &c.abs_f01, &c.stderr_abs_f01, threshold);
    let cutoff = t_half.time().unwrap_or(f64::INFINITY);
    let pts: Vec<(f64, f64)> = e
        .times
        .iter()
        .zip(&c.abs_f01)
        .filter(|&(&t, &a)| t < cutoff && a > 0.0)
        .map(|(&t, &a)| (t, a.ln()))
        .collect();
    let lambda = if pts.len() >= 3 { Some(-slope(&pts)) } else { None };
    let last = c.abs_f01.len() - 1;
    Ok(Metrics {
        t_half,
        lambda,
        residual: c.abs_f01[last],
        residual_stderr: c.stderr_abs_f01[last],
    })
}

fn first_crossing(times: &[f64], values: &[f64], stderr: &[f64], threshold: f64) -> HalfLife {
    let horizon = times.last().copied().unwrap_or(0.0);
    if values.first().is_some_and(|&v| v < threshold) {
        return HalfLife::Reached { t: times[0], stderr: 0.0 };
    }
    for k in 1..values.len() {
        if values[k] < threshold {
            let (a0, a1) = (values[k - 1], values[k]);
            let dt = times[k] - times[k - 1];
            let frac = (a0 - threshold) / (a0 - a1);
            let t = times[k - 1] + frac * dt;
            let slope = (a1 - a0) / dt;
            let se_a = stderr[k - 1] + frac * (stderr[k] - stderr[k - 1]);
            let se = if se_a.is_finite() { se_a / slope.abs() } else { f64::NAN };
            return HalfLife::Reached { t, stderr: se };
        }
    }
    HalfLife::NotReached { horizon }
}

/// Ordinary least-squares slope.
fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

/// First grid time at which `values` is within `tol` of `target`.
pub fn first_within(times: &[f64], values: &[f64], target: f64, tol: f64) -> Option<f64> {
    times.iter().zip(values).find(|&(_, &v)| (v - target).abs() <= tol).map(|(&t, _)| t)
}

/// One row of a scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub label: String,
    /// The scanned parameter (kicks/s, Hz, …).
    pub value: f64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScanResult {
    pub rows: Vec<ScanRow>,
}

/// Independent seeds for the `i`-th member of a scan.
pub fn derived_seeds(seed: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.next_u64()).collect()
}

/// Repeats `base` at every kick rate with fresh seeds.
pub fn kick_rate_scan(base: &Scenario, gammas: &[f64], threshold: f64) -> Result<ScanResult, EnsembleError> {
    if gammas.is_empty() {
        return Err(EnsembleError::EmptyScan);
    }
    let k = base.kicks.ok_or_else(|| invalid("kick-rate scan needs kicks"))?;
    let seeds = derived_seeds(base.seed, gammas.len());
    let mut rows = Vec::with_capacity(gammas.len());
    for (&gamma, &seed) in gammas.iter().zip(&seeds) {
        let s = Scenario { kicks: Some(KickParams { gamma, ..k }), seed, ..base.clone() };
        let e = average(&s)?;
        rows.push(ScanRow { label: format!("gamma={gamma}"), value: gamma, metrics: decoherence_metrics(&e, threshold)? });
    }
    Ok(ScanResult { rows })
}

/// Noise configurations compared on shared kick draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    KicksOnly,
    Decoupling(f64),
    Kondo,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::KicksOnly => f.write_str("kicks"),
            Strategy::Decoupling(freq) => write!(f, "dd@{freq}"),
            Strategy::Kondo => f.write_str("kondo"),
        }
    }
}

impl Strategy {
    /// `base` with its pulse configuration replaced. Kick parameters and the
    /// seed are kept, so kick draws are shared. Decoupling reuses the target
    /// and axis of `base.dd` if set, otherwise it refocuses S; Kondo reuses
    /// `base.kondo` if set, otherwise uses the coupling's default timing.
    pub fn apply(&self, base: &Scenario) -> Scenario {
        let mut s = base.clone();
        s.dd = None;
        s.kondo = None;
        match *self {
            Strategy::KicksOnly => {}
            Strategy::Decoupling(freq) => {
                let (target, axis) = base
                    .dd
                    .map(|d| (d.target, d.axis))
                    .unwrap_or((Qubit::S, base.model.coupling.refocusing_axis()));
                s.dd = Some(DDParams { freq, target, axis });
            }
            Strategy::Kondo => {
                let timing = PulseTiming::default_for(base.model.coupling, base.kicks.is_some());
                s.kondo = Some(base.kondo.unwrap_or_else(|| KondoParams::for_model(&base.model, timing)));
            }
        }
        s
    }
}

/// Kicks only, kicks with decoupling at each frequency, kicks with Kondo
/// pairs; all on the kick streams of `base.seed`.
pub fn compare_strategies(base: &Scenario, dd_freqs: &[f64], threshold: f64) -> Result<ScanResult, EnsembleError> {
    if base.kicks.is_none() {
        return Err(invalid("strategy comparison needs kicks"));
    }
    let strategies = std::iter::once(Strategy::KicksOnly)
        .chain(dd_freqs.iter().map(|&f| Strategy::Decoupling(f)))
        .chain(std::iter::once(Strategy::Kondo));
    let mut rows = Vec::new();
    for st in strategies {
        let e = average(&st.apply(base))?;
        let value = match st {
            Strategy::Decoupling(f) => f,
            _ => 0.0,
        };
        rows.push(ScanRow { label: st.to_string(), value, metrics: decoherence_metrics(&e, threshold)? });
    }
    Ok(ScanResult { rows })
}
