//! Deterministic reference results for the stochastic simulations.
//!
//! * [`zurek_z`]: conditional coherence factor of a spin coupled to `n`
//!   environment spins through `σz σz`.
//! * [`kondo_averaged_rho`]: exact average over a uniformly distributed
//!   conditional phase.
//! * [`xx_rho_computational`]: closed form for `σx σx` coupling, obtained in
//!   the `{|+⟩, |−⟩}` frame and rotated back with a Hadamard.
//! * [`kick_average_quadrature`]: the kick-averaged decoherence factor
//!   `f01(T, n)` as an `n`-dimensional Gauss–Legendre product rule.

use num_complex::{Complex, Complex64};
use thiserror::Error;

use crate::model::{CouplingKind, KickParams, ModelParams};
use crate::qmat::{hadamard_frame_matrix, DensityMatrix, DensityMatrix2, Matrix2, QmatError};
use crate::scalar::Real;

/// Largest kick count the product quadrature accepts.
pub const MAX_QUADRATURE_KICKS: usize = 4;
/// Default nodes per dimension.
pub const DEFAULT_NODES: usize = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("environment weights must be probability pairs summing to 1")]
    BadWeights,
    #[error("couplings and weights differ in length")]
    LengthMismatch,
    #[error("system amplitudes must satisfy |a'|² + |b'|² = 1")]
    BadAmplitudes,
    #[error("kick quadrature is only defined for zz coupling")]
    UnsupportedCoupling,
    #[error("kick quadrature supports 1..={max} kicks, got {n}")]
    TooManyKicks { n: usize, max: usize },
    #[error("quadrature needs at least one node per dimension")]
    NoNodes,
    #[error(transparent)]
    State(#[from] QmatError),
}

/// Environment spins `k = 2..n`: couplings `J₁ₖ` (rad/s) and populations
/// `(|αₖ|², |βₖ|²)` of their σz (or, for `xx`, σx) eigenstates.
#[derive(Debug, Clone, PartialEq)]
pub struct ZurekEnvironment<T> {
    couplings: Vec<T>,
    weights: Vec<(T, T)>,
}

impl<T: Real> ZurekEnvironment<T> {
    pub fn new(couplings: Vec<T>, weights: Vec<(T, T)>) -> Result<Self, OracleError> {
        if couplings.len() != weights.len() {
            return Err(OracleError::LengthMismatch);
        }
        let tol = T::tol(1e-12);
        for &(a, b) in &weights {
            if !(a >= T::zero() && b >= T::zero() && (a + b - T::one()).abs() <= tol) {
                return Err(OracleError::BadWeights);
            }
        }
        Ok(Self { couplings, weights })
    }

    pub fn couplings(&self) -> &[T] {
        &self.couplings
    }

    pub fn weights(&self) -> &[(T, T)] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.couplings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.couplings.is_empty()
    }

    /// Splits into `[..at]` and `[at..]`.
    pub fn split_at(&self, at: usize) -> (Self, Self) {
        (
            Self { couplings: self.couplings[..at].to_vec(), weights: self.weights[..at].to_vec() },
            Self { couplings: self.couplings[at..].to_vec(), weights: self.weights[at..].to_vec() },
        )
    }
}

/// `z(t) = Πₖ |αₖ|² e^{-2iJₖt} + |βₖ|² e^{2iJₖt}`.
pub fn zurek_z<T: Real>(env: &ZurekEnvironment<T>, t: T) -> Complex<T> {
    let two = T::of(2.0);
    env.couplings
        .iter()
        .zip(&env.weights)
        .fold(Complex::new(T::one(), T::zero()), |acc, (&j, &(a, b))| {
            let (s, c) = (two * j * t).sin_cos();
            // a e^{-iφ} + b e^{iφ}
            acc * Complex::new((a + b) * c, (b - a) * s)
        })
}

/// Average of `S(θ) ρ S(θ)†`, `S(θ) = e^{iθσz}`, over `θ ∈ [0, 2π]`:
/// the off-diagonal elements vanish.
pub fn kondo_averaged_rho<T: Real>(rho: &DensityMatrix2<T>) -> DensityMatrix2<T> {
    let zero = Complex::new(T::zero(), T::zero());
    let m = Matrix2::from_rows([[rho.get(0, 0), zero], [zero, rho.get(1, 1)]]);
    DensityMatrix::new_unchecked(m)
}

/// Factorized initial state for the `xx` closed form: system
/// `a'|+⟩ + b'|−⟩`, environment spins described in their σx eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct XXState<T> {
    a_prime: Complex<T>,
    b_prime: Complex<T>,
    env: ZurekEnvironment<T>,
}

impl<T: Real> XXState<T> {
    pub fn new(a_prime: Complex<T>, b_prime: Complex<T>, env: ZurekEnvironment<T>) -> Result<Self, OracleError> {
        let norm = a_prime.norm_sqr() + b_prime.norm_sqr();
        if !((norm - T::one()).abs() <= T::tol(1e-12)) {
            return Err(OracleError::BadAmplitudes);
        }
        Ok(Self { a_prime, b_prime, env })
    }

    pub fn a_prime(&self) -> Complex<T> {
        self.a_prime
    }

    pub fn b_prime(&self) -> Complex<T> {
        self.b_prime
    }

    pub fn env(&self) -> &ZurekEnvironment<T> {
        &self.env
    }
}

/// System state in the `{|+⟩, |−⟩}` frame:
/// `[[|a'|², a'b'* z], [a'* b' z*, |b'|²]]`.
pub fn xx_rho_pm<T: Real>(x: &XXState<T>, t: T) -> Matrix2<T> {
    let z = zurek_z(&x.env, t);
    let omega = x.a_prime * x.b_prime.conj() * z;
    let pp = Complex::new(x.a_prime.norm_sqr(), T::zero());
    let mm = Complex::new(x.b_prime.norm_sqr(), T::zero());
    Matrix2::from_rows([[pp, omega], [omega.conj(), mm]])
}

/// System state in the computational basis, `H ρ_± H†`.
pub fn xx_rho_computational<T: Real>(x: &XXState<T>, t: T) -> Result<DensityMatrix2<T>, OracleError> {
    Ok(DensityMatrix::new(hadamard_frame_matrix(&xx_rho_pm(x, t)))?)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `V_j = ⟨j| exp(-i H₀ dt) |j⟩_S` for `zz` coupling: diagonal on E.
fn conditional_env_propagator(p: &ModelParams<f64>, j: usize, dt: f64) -> Matrix2<f64> {
    let s = if j == 0 { 1.0 } else { -1.0 };
    let pi = std::f64::consts::PI;
    let phase = |e_sign: f64| {
        let energy = pi * (p.nu_s * s + p.nu_e * e_sign + p.omega_half * s * e_sign);
        Complex64::from_polar(1.0, -energy * dt)
    };
    Matrix2::from_diagonal([phase(1.0), phase(-1.0)])
}

fn kick2(eps: f64) -> Matrix2<f64> {
    let (s, c) = eps.sin_cos();
    Matrix2::from_real([[c, -s], [s, c]])
}

/// Kick-averaged `f01(T, n)` with the default node count.
pub fn kick_average_quadrature(
    p: &ModelParams<f64>,
    k: &KickParams<f64>,
    rho_e0: &DensityMatrix2<f64>,
    horizon: f64,
    n: usize,
) -> Result<Complex64, OracleError> {
    kick_average_quadrature_with_nodes(p, k, rho_e0, horizon, n, DEFAULT_NODES)
}

/// `f01 = ∫ Π dεₘ/2α  Tr[(A₀)ₙ ρ^E (A₁)ₙ†]` with
/// `(A_j)ₙ = Kₙ V_j ⋯ K₁ V_j`, `Kₘ = exp(-i εₘ σy)`, `dt = T/n`.
/// Only `k.alpha` is used; the kick count is `n`.
pub fn kick_average_quadrature_with_nodes(
    p: &ModelParams<f64>,
    k: &KickParams<f64>,
    rho_e0: &DensityMatrix2<f64>,
    horizon: f64,
    n: usize,
    nodes: usize,
) -> Result<Complex64, OracleError> {
    if p.coupling != CouplingKind::ZZ {
        return Err(OracleError::UnsupportedCoupling);
    }
    if n == 0 || n > MAX_QUADRATURE_KICKS {
        return Err(OracleError::TooManyKicks { n, max: MAX_QUADRATURE_KICKS });
    }
    if nodes == 0 {
        return Err(OracleError::NoNodes);
    }
    let dt = horizon / n as f64;
    let v0 = conditional_env_propagator(p, 0, dt);
    let v1_adj = conditional_env_propagator(p, 1, dt).adjoint();
    let (x, w) = gauss_legendre(nodes);
    // ∫_{-α}^{α} dε/(2α) f(ε) = Σ (wᵢ/2) f(α xᵢ)
    let kicks: Vec<(Matrix2<f64>, f64)> = x
        .iter()
        .zip(&w)
        .map(|(&xi, &wi)| (kick2(k.alpha * xi), 0.5 * wi))
        .collect();

    fn level(
        depth: usize,
        x: Matrix2<f64>,
        v0: &Matrix2<f64>,
        v1_adj: &Matrix2<f64>,
        kicks: &[(Matrix2<f64>, f64)],
    ) -> Complex64 {
        if depth == 0 {
            return x.trace();
        }
        let free = *v0 * x * *v1_adj;
        kicks
            .iter()
            .map(|(kk, wt)| level(depth - 1, kk.sandwich(&free), v0, v1_adj, kicks) * *wt)
            .sum()
    }

    Ok(level(n, *rho_e0.matrix(), &v0, &v1_adj, &kicks))
}
