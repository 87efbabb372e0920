//! Hamiltonians, pulse processes and single-realization evolution.
//!
//! The free Hamiltonian is
//! `H₀ = π (ν_S σz⊗I + ν_E I⊗σz + (Ω/2) C⊗C)` with `C = σz` for
//! [`CouplingKind::ZZ`] and `C = σx` for [`CouplingKind::XX`]. Frequencies are
//! in Hz, so `H₀` is in rad/s.
//!
//! A realization is a merged, time-ordered list of instantaneous rotations
//! (random kicks on E, randomized π pulse pairs on E, periodic decoupling
//! pulses) interleaved with free evolution.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use rand::Rng;
use thiserror::Error;

use crate::qmat::{
    conjugate, kron, partial_trace_env, product_state, sigma_x, sigma_y, sigma_z,
    DensityMatrix2, DensityMatrix4, HermitianEigen, Matrix2, Matrix4, QmatError, Unitary2,
    Unitary4,
};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{0}")]
    InvalidParameter(String),
    #[error("kick rate {gamma} over horizon {horizon} s gives no kicks")]
    NoKicks { gamma: f64, horizon: f64 },
    #[error("decoupling frequency {freq} Hz over horizon {horizon} s gives no pulses")]
    NoPulses { freq: f64, horizon: f64 },
    #[error("event at t = {time} s lies outside [0, {horizon}] s")]
    EventOutsideHorizon { time: f64, horizon: f64 },
    #[error("timeline events are not sorted by time")]
    Unsorted,
    #[error("sample grid must be sorted and within [0, {horizon}] s")]
    BadGrid { horizon: f64 },
    #[error("state invariant violated at t = {time} s: {source}")]
    InvariantViolation {
        time: f64,
        #[source]
        source: QmatError,
    },
}

fn invalid(msg: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CouplingKind {
    ZZ,
    XX,
}

impl CouplingKind {
    /// Pauli operator appearing on each qubit in the coupling term.
    pub fn coupling_axis(self) -> Axis {
        match self {
            CouplingKind::ZZ => Axis::Z,
            CouplingKind::XX => Axis::X,
        }
    }

    /// A π pulse about this axis anticommutes with the coupling operator and
    /// so reverses the sign of the interaction seen by the other qubit.
    pub fn refocusing_axis(self) -> Axis {
        match self {
            CouplingKind::ZZ => Axis::X,
            CouplingKind::XX => Axis::Z,
        }
    }
}

impl fmt::Display for CouplingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CouplingKind::ZZ => "zz",
            CouplingKind::XX => "xx",
        })
    }
}

impl FromStr for CouplingKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "zz" => Ok(CouplingKind::ZZ),
            "xx" => Ok(CouplingKind::XX),
            other => Err(format!("unknown coupling '{other}' (expected zz or xx)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn pauli<T: Real>(self) -> Matrix2<T> {
        match self {
            Axis::X => sigma_x(),
            Axis::Y => sigma_y(),
            Axis::Z => sigma_z(),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(format!("unknown axis '{other}' (expected x, y or z)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Qubit {
    S,
    E,
}

impl fmt::Display for Qubit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Qubit::S => "s",
            Qubit::E => "e",
        })
    }
}

impl FromStr for Qubit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "s" => Ok(Qubit::S),
            "e" => Ok(Qubit::E),
            other => Err(format!("unknown qubit '{other}' (expected s or e)")),
        }
    }
}

/// Chemical shifts and coupling strength, all in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams<T> {
    pub nu_s: T,
    pub nu_e: T,
    pub omega_half: T,
    pub coupling: CouplingKind,
}

impl<T: Real> ModelParams<T> {
    pub fn new(coupling: CouplingKind, omega_half: T, nu_s: T, nu_e: T) -> Result<Self, ModelError> {
        let p = Self { nu_s, nu_e, omega_half, coupling };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.omega_half > T::zero() && self.omega_half.is_finite()) {
            return Err(invalid("omega_half must be positive"));
        }
        if !(self.nu_s.is_finite() && self.nu_e.is_finite()) {
            return Err(invalid("chemical shifts must be finite"));
        }
        Ok(())
    }

    /// Coupling constant `J₁₂ = π Ω/2` in rad/s.
    pub fn coupling_rad(&self) -> T {
        T::PI() * self.omega_half
    }
}

/// Random-amplitude kicks `exp(-i ε σy)` on E at rate `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KickParams<T> {
    /// Angles are drawn from `(-alpha, alpha)`, radians.
    pub alpha: T,
    /// Kicks per second.
    pub gamma: T,
}

impl<T: Real> KickParams<T> {
    pub fn new(alpha: T, gamma: T) -> Result<Self, ModelError> {
        let k = Self { alpha, gamma };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.alpha >= T::zero() && self.alpha.is_finite()) {
            return Err(invalid("alpha must be non-negative"));
        }
        if !(self.gamma > T::zero() && self.gamma.is_finite()) {
            return Err(invalid("gamma must be positive"));
        }
        Ok(())
    }

    /// Number of kicks `n = round(Γ T)`.
    pub fn count(&self, horizon: T) -> Result<usize, ModelError> {
        let n = (self.gamma * horizon).round();
        if !(n >= T::one()) {
            return Err(ModelError::NoKicks {
                gamma: self.gamma.to_f64_lossy(),
                horizon: horizon.to_f64_lossy(),
            });
        }
        Ok(n.to_usize().unwrap_or(usize::MAX))
    }
}

/// Kick instant `m T / n`. Every time derived from the kick grid goes through
/// here so equal instants compare equal.
pub fn kick_instant<T: Real>(m: usize, n: usize, horizon: T) -> T {
    if m >= n {
        // T·n/n can round past T
        return horizon;
    }
    horizon * T::of(m as f64) / T::of(n as f64)
}

/// `[0, T/n, 2T/n, …, T]`.
pub fn kick_instants<T: Real>(k: &KickParams<T>, horizon: T) -> Result<Vec<T>, ModelError> {
    let n = k.count(horizon)?;
    Ok((0..=n).map(|m| kick_instant(m, n, horizon)).collect())
}

/// Where randomized π pulses are allowed to land.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseTiming {
    /// Anywhere in `[0, T]`.
    Continuous,
    /// Rounded up to the next kick instant.
    KickGrid,
}

impl PulseTiming {
    /// Kick grid for `zz` with kicks, continuous otherwise.
    pub fn default_for(coupling: CouplingKind, with_kicks: bool) -> Self {
        match (coupling, with_kicks) {
            (CouplingKind::ZZ, true) => PulseTiming::KickGrid,
            _ => PulseTiming::Continuous,
        }
    }
}

impl fmt::Display for PulseTiming {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PulseTiming::Continuous => "continuous",
            PulseTiming::KickGrid => "kick-grid",
        })
    }
}

impl FromStr for PulseTiming {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "continuous" => Ok(PulseTiming::Continuous),
            "kick-grid" | "kicks" => Ok(PulseTiming::KickGrid),
            other => Err(format!("unknown pulse timing '{other}' (expected continuous or kick-grid)")),
        }
    }
}

/// Temporally randomized π pulse pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KondoParams<T> {
    /// Upper bound of the intra-pair separation δ, seconds.
    pub delta_max: T,
    /// Upper bound of the gap before each pair, seconds.
    pub gap_max: T,
    pub target: Qubit,
    pub axis: Axis,
    pub timing: PulseTiming,
}

impl<T: Real> KondoParams<T> {
    /// Defaults for a model: `δ_max = 2/Ω` (so `2 J₁₂ δ` spans `[0, 2π]`),
    /// `gap_max = δ_max`, pulses on E about the refocusing axis.
    pub fn for_model(p: &ModelParams<T>, timing: PulseTiming) -> Self {
        let delta_max = T::one() / p.omega_half;
        Self {
            delta_max,
            gap_max: delta_max,
            target: Qubit::E,
            axis: p.coupling.refocusing_axis(),
            timing,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.delta_max > T::zero() && self.delta_max.is_finite()) {
            return Err(invalid("kondo_delta_max must be positive"));
        }
        if !(self.gap_max >= T::zero() && self.gap_max.is_finite()) {
            return Err(invalid("kondo_gap_max must be non-negative"));
        }
        Ok(())
    }
}

/// Periodic decoupling train.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DDParams<T> {
    pub freq: T,
    pub target: Qubit,
    pub axis: Axis,
}

impl<T: Real> DDParams<T> {
    pub fn new(freq: T, target: Qubit, axis: Axis) -> Result<Self, ModelError> {
        let d = Self { freq, target, axis };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.freq > T::zero() && self.freq.is_finite()) {
            return Err(invalid("dd_freq must be positive"));
        }
        Ok(())
    }
}

/// Origin of an event; also the application order for simultaneous events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventSource {
    Kick,
    Kondo,
    Decoupling,
}

/// Instantaneous rotation `exp(-i angle σ_axis)` on one qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseEvent<T> {
    pub time: T,
    pub source: EventSource,
    pub target: Qubit,
    pub axis: Axis,
    pub angle: T,
}

impl<T: Real> PulseEvent<T> {
    pub fn unitary(&self) -> Unitary4<T> {
        rotation(self.target, self.axis, self.angle)
    }
}

/// Time-ordered events over `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Timeline<T> {
    events: Vec<PulseEvent<T>>,
    horizon: T,
}

impl<T: Real> Timeline<T> {
    pub fn new(events: Vec<PulseEvent<T>>, horizon: T) -> Result<Self, ModelError> {
        for e in &events {
            if !(e.time >= T::zero() && e.time <= horizon) {
                return Err(ModelError::EventOutsideHorizon {
                    time: e.time.to_f64_lossy(),
                    horizon: horizon.to_f64_lossy(),
                });
            }
            if !e.angle.is_finite() {
                return Err(invalid("pulse angle must be finite"));
            }
        }
        if events.windows(2).any(|w| w[1].time < w[0].time) {
            return Err(ModelError::Unsorted);
        }
        Ok(Self { events, horizon })
    }

    pub fn empty(horizon: T) -> Self {
        Self { events: Vec::new(), horizon }
    }

    pub fn events(&self) -> &[PulseEvent<T>] {
        &self.events
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Moves every event to the first of `n` kick instants at or after it.
    pub fn snap_to_kick_grid(&self, n: usize) -> Self {
        let h = self.horizon;
        let events = self
            .events
            .iter()
            .map(|e| {
                let x = e.time * T::of(n as f64) / h;
                let nearest = x.round();
                let k = if (x - nearest).abs() <= T::of(1e-9) { nearest } else { x.ceil() };
                let k = k.to_usize().unwrap_or(n).clamp(1, n);
                PulseEvent { time: kick_instant(k, n, h), ..*e }
            })
            .collect();
        Self { events, horizon: h }
    }

    /// Stable merge ordered by time, then by [`EventSource`].
    pub fn merge(timelines: &[Timeline<T>]) -> Vec<PulseEvent<T>> {
        let mut all: Vec<PulseEvent<T>> =
            timelines.iter().flat_map(|t| t.events.iter().copied()).collect();
        all.sort_by(|a, b| {
            a.time
                .partial_cmp(&b.time)
                .expect("event times are finite")
                .then(a.source.cmp(&b.source))
        });
        all
    }
}

/// System states sampled along one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<DensityMatrix2<T>>,
}

/// `H₀` in rad/s.
pub fn hamiltonian<T: Real>(p: &ModelParams<T>) -> Matrix4<T> {
    let id = Matrix2::<T>::identity();
    let zs = kron(&sigma_z(), &id).scale_real(p.nu_s);
    let ze = kron(&id, &sigma_z()).scale_real(p.nu_e);
    let c = p.coupling.coupling_axis().pauli::<T>();
    let cc = kron(&c, &c).scale_real(p.omega_half);
    (zs + ze + cc).scale_real(T::PI())
}

/// Cached eigendecomposition of `H₀` for repeated `exp(-i H₀ dt)`.
#[derive(Debug, Clone, Copy)]
pub struct FreePropagator<T> {
    eig: HermitianEigen<T, 4>,
}

impl<T: Real> FreePropagator<T> {
    pub fn new(p: &ModelParams<T>) -> Self {
        let eig = HermitianEigen::new(&hamiltonian(p)).expect("H₀ is Hermitian by construction");
        Self { eig }
    }

    pub fn step(&self, dt: T) -> Unitary4<T> {
        self.eig.propagator(dt)
    }
}

/// `exp(-i H₀ dt)`.
pub fn free_propagator<T: Real>(p: &ModelParams<T>, dt: T) -> Result<Unitary4<T>, ModelError> {
    if !(dt >= T::zero()) {
        return Err(invalid("dt must be non-negative"));
    }
    Ok(FreePropagator::new(p).step(dt))
}

/// `exp(-i angle σ_axis)` on a single qubit.
pub fn rotation2<T: Real>(axis: Axis, angle: T) -> Unitary2<T> {
    let (s, c) = angle.sin_cos();
    let m = Matrix2::<T>::identity().scale_real(c) + axis.pauli::<T>().scale(Complex::new(T::zero(), -s));
    Unitary2::new_unchecked(m)
}

/// `exp(-i angle σ_axis)` on `target`, identity on the other qubit.
pub fn rotation<T: Real>(target: Qubit, axis: Axis, angle: T) -> Unitary4<T> {
    let r = rotation2(axis, angle);
    let id = Unitary2::identity();
    match target {
        Qubit::S => Unitary4::kron(&r, &id),
        Qubit::E => Unitary4::kron(&id, &r),
    }
}

/// `I ⊗ exp(-i ε σy)`.
pub fn kick_operator<T: Real>(epsilon: T) -> Unitary4<T> {
    rotation(Qubit::E, Axis::Y, epsilon)
}

/// `exp(-i (π/2) σ_axis)` on `target`.
pub fn pi_pulse<T: Real>(target: Qubit, axis: Axis) -> Unitary4<T> {
    rotation(target, axis, T::FRAC_PI_2())
}

/// Uniform draw from the open interval `(-alpha, alpha)`.
fn open_symmetric<T: Real, R: Rng + ?Sized>(alpha: T, rng: &mut R) -> T {
    if alpha <= T::zero() {
        return T::zero();
    }
    loop {
        let x = rng.gen_range(-alpha..alpha);
        if x != -alpha {
            return x;
        }
    }
}

/// Kicks at `m T / n`, `m = 1..n`, angles uniform in `(-α, α)`.
pub fn sample_kick_timeline<T: Real, R: Rng + ?Sized>(
    k: &KickParams<T>,
    horizon: T,
    rng: &mut R,
) -> Result<Timeline<T>, ModelError> {
    k.validate()?;
    if !(horizon > T::zero()) {
        return Err(invalid("horizon must be positive"));
    }
    let n = k.count(horizon)?;
    let events = (1..=n)
        .map(|m| PulseEvent {
            time: kick_instant(m, n, horizon),
            source: EventSource::Kick,
            target: Qubit::E,
            axis: Axis::Y,
            angle: open_symmetric(k.alpha, rng),
        })
        .collect();
    Timeline::new(events, horizon)
}

/// Pulse pairs: from the current time `t`, wait `gap ~ U[0, gap_max]`,
/// pulse, wait `δ ~ U[0, δ_max]`, pulse; stop before a pair would end past
/// the horizon. Pulse times are continuous here; see
/// [`Timeline::snap_to_kick_grid`].
pub fn sample_kondo_timeline<T: Real, R: Rng + ?Sized>(
    k: &KondoParams<T>,
    horizon: T,
    rng: &mut R,
) -> Result<Timeline<T>, ModelError> {
    k.validate()?;
    if !(horizon > k.delta_max) {
        return Err(invalid("horizon must exceed kondo_delta_max"));
    }
    let draw = |rng: &mut R, hi: T| if hi > T::zero() { rng.gen_range(T::zero()..=hi) } else { T::zero() };
    let pulse = |time: T| PulseEvent {
        time,
        source: EventSource::Kondo,
        target: k.target,
        axis: k.axis,
        angle: T::FRAC_PI_2(),
    };
    let mut events = Vec::new();
    let mut t = T::zero();
    loop {
        let gap = draw(rng, k.gap_max);
        let delta = draw(rng, k.delta_max);
        let first = t + gap;
        let second = first + delta;
        if second > horizon {
            break;
        }
        events.push(pulse(first));
        events.push(pulse(second));
        if second <= t {
            // zero-length draws cannot advance the clock forever
            t = second + T::epsilon() * horizon;
        } else {
            t = second;
        }
    }
    Timeline::new(events, horizon)
}

/// Equidistant π pulses at `m / freq`, `m = 1..floor(freq T)`.
pub fn dd_timeline<T: Real>(d: &DDParams<T>, horizon: T) -> Result<Timeline<T>, ModelError> {
    d.validate()?;
    // tolerate freq·T landing a hair under an integer
    let count = (d.freq * horizon + T::of(1e-9)).floor();
    if !(count >= T::one()) {
        return Err(ModelError::NoPulses {
            freq: d.freq.to_f64_lossy(),
            horizon: horizon.to_f64_lossy(),
        });
    }
    let count = count.to_usize().unwrap_or(0);
    let events = (1..=count)
        .map(|m| PulseEvent {
            time: (T::of(m as f64) / d.freq).min(horizon),
            source: EventSource::Decoupling,
            target: d.target,
            axis: d.axis,
            angle: T::FRAC_PI_2(),
        })
        .collect();
    Timeline::new(events, horizon)
}

/// Evolves `ρ^S(0) ⊗ ρ^E(0)` through the merged events and records
/// `Tr_E ρ^{SE}` at every grid time. Events at a grid time are applied
/// before that sample is taken.
pub fn run_realization<T: Real>(
    p: &ModelParams<T>,
    timelines: &[Timeline<T>],
    rho_s0: &DensityMatrix2<T>,
    rho_e0: &DensityMatrix2<T>,
    grid: &[T],
    horizon: T,
) -> Result<Trajectory<T>, ModelError> {
    p.validate()?;
    if grid.windows(2).any(|w| !(w[1] >= w[0]))
        || grid.iter().any(|&t| !(t >= T::zero() && t <= horizon))
    {
        return Err(ModelError::BadGrid { horizon: horizon.to_f64_lossy() });
    }
    for tl in timelines {
        if let Some(e) = tl.events.iter().find(|e| e.time > horizon) {
            return Err(ModelError::EventOutsideHorizon {
                time: e.time.to_f64_lossy(),
                horizon: horizon.to_f64_lossy(),
            });
        }
    }

    let events = Timeline::merge(timelines);
    let mut evolver = Evolver::new(p, product_state(rho_s0, rho_e0));
    let mut next = 0;
    let mut states = Vec::with_capacity(grid.len());
    for &ts in grid {
        while next < events.len() && events[next].time <= ts {
            evolver.advance_to(events[next].time);
            evolver.apply(&events[next].unitary());
            next += 1;
        }
        evolver.advance_to(ts);
        let reduced = partial_trace_env(&evolver.rho).map_err(|source| ModelError::InvariantViolation {
            time: ts.to_f64_lossy(),
            source,
        })?;
        #[cfg(debug_assertions)]
        evolver.rho.validate().map_err(|source| ModelError::InvariantViolation {
            time: ts.to_f64_lossy(),
            source,
        })?;
        states.push(reduced);
    }
    Ok(Trajectory { times: grid.to_vec(), states })
}

/// Product of every operator applied over `[0, horizon]`.
pub fn total_unitary<T: Real>(p: &ModelParams<T>, timelines: &[Timeline<T>], horizon: T) -> Unitary4<T> {
    let prop = FreePropagator::new(p);
    let mut u = Unitary4::identity();
    let mut t = T::zero();
    for e in Timeline::merge(timelines) {
        u = prop.step(e.time - t).then_after(&u);
        u = e.unitary().then_after(&u);
        t = e.time;
    }
    prop.step(horizon - t).then_after(&u)
}

struct Evolver<T> {
    prop: FreePropagator<T>,
    rho: DensityMatrix4<T>,
    now: T,
    // the kick period recurs constantly, so remember the last step
    cached: Option<(T, Unitary4<T>)>,
}

impl<T: Real> Evolver<T> {
    fn new(p: &ModelParams<T>, rho: DensityMatrix4<T>) -> Self {
        Self { prop: FreePropagator::new(p), rho, now: T::zero(), cached: None }
    }

    fn advance_to(&mut self, t: T) {
        let dt = t - self.now;
        if dt > T::zero() {
            let u = match self.cached {
                Some((cdt, u)) if cdt == dt => u,
                _ => {
                    let u = self.prop.step(dt);
                    self.cached = Some((dt, u));
                    u
                }
            };
            self.rho = conjugate(&self.rho, &u);
        }
        self.now = t;
    }

    fn apply(&mut self, u: &Unitary4<T>) {
        self.rho = conjugate(&self.rho, u);
    }
}

/// `ρ^{SE}` after the full sequence, for tests of reversibility.
pub fn final_joint_state<T: Real>(
    p: &ModelParams<T>,
    timelines: &[Timeline<T>],
    rho_s0: &DensityMatrix2<T>,
    rho_e0: &DensityMatrix2<T>,
    horizon: T,
) -> DensityMatrix4<T> {
    conjugate(&product_state(rho_s0, rho_e0), &total_unitary(p, timelines, horizon))
}
