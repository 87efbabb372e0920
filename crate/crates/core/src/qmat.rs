//! Dense complex matrices for one and two qubits.
//!
//! Everything here is fixed-size: `N = 2` for a single qubit and `N = 4` for
//! the system-environment pair, with the system qubit as the first tensor
//! factor. States and propagators are wrapped in [`DensityMatrix`] and
//! [`Unitary`], whose constructors check the physical invariants.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::Real;

/// Trace tolerance for density matrices.
pub const TRACE_TOL: f64 = 1e-10;
/// Hermiticity tolerance for density matrices and Hamiltonians.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Smallest eigenvalue accepted for a density matrix.
pub const PSD_TOL: f64 = -1e-9;
/// Max-norm tolerance on `U†U - I`.
pub const UNITARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum QmatError {
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("trace is {0}, expected 1")]
    TraceNotUnit(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositive(f64),
    #[error("matrix is not unitary (max |U†U - I| = {0:e})")]
    NotUnitary(f64),
}

/// Row-major `N×N` complex matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexMatrix<T, const N: usize> {
    m: [[Complex<T>; N]; N],
}

pub type Matrix2<T> = ComplexMatrix<T, 2>;
pub type Matrix4<T> = ComplexMatrix<T, 4>;

impl<T: Real, const N: usize> ComplexMatrix<T, N> {
    pub fn zeros() -> Self {
        Self { m: [[Complex::new(T::zero(), T::zero()); N]; N] }
    }

    pub fn identity() -> Self {
        let mut out = Self::zeros();
        for i in 0..N {
            out.m[i][i] = Complex::new(T::one(), T::zero());
        }
        out
    }

    pub fn from_rows(rows: [[Complex<T>; N]; N]) -> Self {
        Self { m: rows }
    }

    /// Builds a matrix from real entries.
    pub fn from_real(rows: [[T; N]; N]) -> Self {
        let mut out = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                out.m[i][j] = Complex::new(rows[i][j], T::zero());
            }
        }
        out
    }

    pub fn from_diagonal(diag: [Complex<T>; N]) -> Self {
        let mut out = Self::zeros();
        for i in 0..N {
            out.m[i][i] = diag[i];
        }
        out
    }

    pub fn rows(&self) -> &[[Complex<T>; N]; N] {
        &self.m
    }

    pub fn dim(&self) -> usize {
        N
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros();
        for i in 0..N {
            for j in 0..N {
                out.m[i][j] = self.m[j][i].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> Complex<T> {
        (0..N).fold(Complex::new(T::zero(), T::zero()), |acc, i| acc + self.m[i][i])
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        let mut out = *self;
        for row in out.m.iter_mut() {
            for x in row.iter_mut() {
                *x = *x * s;
            }
        }
        out
    }

    pub fn scale_real(&self, s: T) -> Self {
        self.scale(Complex::new(s, T::zero()))
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        let mut worst = T::zero();
        for i in 0..N {
            for j in 0..N {
                worst = worst.max((self.m[i][j] - other.m[i][j]).norm());
            }
        }
        worst
    }

    /// max |m[i][j] - conj(m[j][i])|.
    pub fn hermiticity_error(&self) -> T {
        self.max_abs_diff(&self.adjoint())
    }

    /// `self · x · self†`.
    pub fn sandwich(&self, x: &Self) -> Self {
        *self * *x * self.adjoint()
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl<T, const N: usize> Index<(usize, usize)> for ComplexMatrix<T, N> {
    type Output = Complex<T>;

    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.m[i][j]
    }
}

impl<T, const N: usize> IndexMut<(usize, usize)> for ComplexMatrix<T, N> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.m[i][j]
    }
}

impl<T: Real, const N: usize> Mul for ComplexMatrix<T, N> {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zeros();
        for i in 0..N {
            for k in 0..N {
                let a = self.m[i][k];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                for j in 0..N {
                    out.m[i][j] = out.m[i][j] + a * rhs.m[k][j];
                }
            }
        }
        out
    }
}

impl<T: Real, const N: usize> Add for ComplexMatrix<T, N> {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        let mut out = self;
        for i in 0..N {
            for j in 0..N {
                out.m[i][j] = out.m[i][j] + rhs.m[i][j];
            }
        }
        out
    }
}

impl<T: Real, const N: usize> Sub for ComplexMatrix<T, N> {
    type Output = Self;

    fn sub(self, rhs: Self) -> Self {
        let mut out = self;
        for i in 0..N {
            for j in 0..N {
                out.m[i][j] = out.m[i][j] - rhs.m[i][j];
            }
        }
        out
    }
}

fn c<T: Real>(re: f64, im: f64) -> Complex<T> {
    Complex::new(T::of(re), T::of(im))
}

pub fn sigma_x<T: Real>() -> Matrix2<T> {
    Matrix2::from_rows([[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]])
}

pub fn sigma_y<T: Real>() -> Matrix2<T> {
    Matrix2::from_rows([[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]])
}

pub fn sigma_z<T: Real>() -> Matrix2<T> {
    Matrix2::from_rows([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]])
}

pub fn hadamard<T: Real>() -> Matrix2<T> {
    let h = T::FRAC_1_SQRT_2();
    Matrix2::from_real([[h, h], [h, -h]])
}

/// Kronecker product; `a` acts on the system qubit, `b` on the environment.
pub fn kron<T: Real>(a: &Matrix2<T>, b: &Matrix2<T>) -> Matrix4<T> {
    let mut out = Matrix4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Eigendecomposition `h = V diag(values) V†` of a Hermitian matrix.
#[derive(Debug, Clone, Copy)]
pub struct HermitianEigen<T, const N: usize> {
    pub values: [T; N],
    pub vectors: ComplexMatrix<T, N>,
}

impl<T: Real, const N: usize> HermitianEigen<T, N> {
    /// Cyclic complex Jacobi. Each rotation first removes the phase of the
    /// pivot, then applies a real Givens rotation, so the accumulated `V`
    /// stays unitary to rounding.
    pub fn new(h: &ComplexMatrix<T, N>) -> Result<Self, QmatError> {
        let herm = h.hermiticity_error();
        if !(herm <= T::tol(HERMITIAN_TOL)) {
            return Err(QmatError::NotHermitian(herm.to_f64_lossy()));
        }
        // symmetrize so the rotations see an exactly Hermitian matrix
        let half = T::of(0.5);
        let mut a = (*h + h.adjoint()).scale_real(half);
        let mut v = ComplexMatrix::<T, N>::identity();

        let scale = a.rows().iter().flatten().fold(T::zero(), |acc, z| acc.max(z.norm()));
        let stop = scale * T::epsilon() * T::of(1e-2);

        for _sweep in 0..64 {
            let mut off = T::zero();
            for p in 0..N {
                for q in (p + 1)..N {
                    off = off.max(a[(p, q)].norm());
                }
            }
            if off <= stop {
                break;
            }
            for p in 0..N {
                for q in (p + 1)..N {
                    let apq = a[(p, q)];
                    let r = apq.norm();
                    if r <= stop {
                        continue;
                    }
                    let phase = apq / r; // e^{iφ}
                    let app = a[(p, p)].re;
                    let aqq = a[(q, q)].re;
                    let theta = (aqq - app) / (T::of(2.0) * r);
                    let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                    let t = sign / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let cs = T::one() / (t * t + T::one()).sqrt();
                    let sn = t * cs;
                    // G restricted to (p,q) = diag(1, e^{-iφ}) · [[c, s], [-s, c]]
                    let g_pp = Complex::new(cs, T::zero());
                    let g_pq = Complex::new(sn, T::zero());
                    let g_qp = -phase.conj() * sn;
                    let g_qq = phase.conj() * cs;
                    // A <- A G, V <- V G
                    for k in 0..N {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = akp * g_pp + akq * g_qp;
                        a[(k, q)] = akp * g_pq + akq * g_qq;
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = vkp * g_pp + vkq * g_qp;
                        v[(k, q)] = vkp * g_pq + vkq * g_qq;
                    }
                    // A <- G† A
                    for k in 0..N {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = g_pp.conj() * apk + g_qp.conj() * aqk;
                        a[(q, k)] = g_pq.conj() * apk + g_qq.conj() * aqk;
                    }
                    a[(p, q)] = Complex::new(T::zero(), T::zero());
                    a[(q, p)] = Complex::new(T::zero(), T::zero());
                }
            }
        }

        let mut values = [T::zero(); N];
        for (i, val) in values.iter_mut().enumerate() {
            *val = a[(i, i)].re;
        }
        Ok(Self { values, vectors: v })
    }

    pub fn min_value(&self) -> T {
        self.values.iter().fold(T::infinity(), |acc, &x| acc.min(x))
    }

    /// `exp(-i h t)`.
    pub fn propagator(&self, t: T) -> Unitary<T, N> {
        let mut phases = [Complex::new(T::zero(), T::zero()); N];
        for (ph, &val) in phases.iter_mut().zip(self.values.iter()) {
            let arg = -val * t;
            *ph = Complex::new(arg.cos(), arg.sin());
        }
        let d = ComplexMatrix::from_diagonal(phases);
        Unitary { mat: self.vectors * d * self.vectors.adjoint() }
    }
}

/// `exp(-i h t)` for Hermitian `h`, via eigendecomposition.
pub fn expm_hermitian<T: Real, const N: usize>(
    h: &ComplexMatrix<T, N>,
    t: T,
) -> Result<Unitary<T, N>, QmatError> {
    Ok(HermitianEigen::new(h)?.propagator(t))
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue<T: Real, const N: usize>(h: &ComplexMatrix<T, N>) -> Result<T, QmatError> {
    if N == 2 {
        let herm = h.hermiticity_error();
        if !(herm <= T::tol(HERMITIAN_TOL)) {
            return Err(QmatError::NotHermitian(herm.to_f64_lossy()));
        }
        let a = h[(0, 0)].re;
        let d = h[(1, 1)].re;
        let b = h[(0, 1)];
        let half = T::of(0.5);
        let mid = (a + d) * half;
        let rad = (((a - d) * half).powi(2) + b.norm_sqr()).sqrt();
        return Ok(mid - rad);
    }
    Ok(HermitianEigen::new(h)?.min_value())
}

/// Unit-trace, Hermitian, positive semidefinite matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix<T, const N: usize> {
    mat: ComplexMatrix<T, N>,
}

pub type DensityMatrix2<T> = DensityMatrix<T, 2>;
pub type DensityMatrix4<T> = DensityMatrix<T, 4>;

impl<T: Real, const N: usize> DensityMatrix<T, N> {
    pub fn new(mat: ComplexMatrix<T, N>) -> Result<Self, QmatError> {
        validate_density(&mat)?;
        Ok(Self { mat })
    }

    /// Wraps a matrix known to be a state (e.g. a unitary image of one).
    pub(crate) fn new_unchecked(mat: ComplexMatrix<T, N>) -> Self {
        Self { mat }
    }

    /// The projector `|ψ⟩⟨ψ|` of a normalized vector.
    pub fn pure(psi: [Complex<T>; N]) -> Result<Self, QmatError> {
        let mut mat = ComplexMatrix::zeros();
        for i in 0..N {
            for j in 0..N {
                mat[(i, j)] = psi[i] * psi[j].conj();
            }
        }
        Self::new(mat)
    }

    pub fn maximally_mixed() -> Self {
        Self { mat: ComplexMatrix::identity().scale_real(T::one() / T::of(N as f64)) }
    }

    pub fn matrix(&self) -> &ComplexMatrix<T, N> {
        &self.mat
    }

    pub fn into_matrix(self) -> ComplexMatrix<T, N> {
        self.mat
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.mat[(i, j)]
    }

    pub fn validate(&self) -> Result<(), QmatError> {
        validate_density(&self.mat)
    }
}

impl<T: Real> DensityMatrix2<T> {
    /// `|0⟩⟨0|`, also the NMR pseudo-pure `½(I + σz)`.
    pub fn zero() -> Self {
        Self::new_unchecked(Matrix2::from_real([[T::one(), T::zero()], [T::zero(), T::zero()]]))
    }

    pub fn one() -> Self {
        Self::new_unchecked(Matrix2::from_real([[T::zero(), T::zero()], [T::zero(), T::one()]]))
    }

    /// `½(I + σx)`.
    pub fn plus() -> Self {
        let h = T::of(0.5);
        Self::new_unchecked(Matrix2::from_real([[h, h], [h, h]]))
    }

    /// `½(I + rx σx + ry σy + rz σz)` for a Bloch vector with `|r| ≤ 1`.
    pub fn from_bloch(r: [T; 3]) -> Result<Self, QmatError> {
        let h = T::of(0.5);
        let id = Matrix2::<T>::identity();
        let m = (id
            + sigma_x().scale_real(r[0])
            + sigma_y().scale_real(r[1])
            + sigma_z().scale_real(r[2]))
        .scale_real(h);
        Self::new(m)
    }
}

fn validate_density<T: Real, const N: usize>(m: &ComplexMatrix<T, N>) -> Result<(), QmatError> {
    if !m.is_finite() {
        return Err(QmatError::NotHermitian(f64::NAN));
    }
    let herm = m.hermiticity_error();
    if !(herm <= T::tol(HERMITIAN_TOL)) {
        return Err(QmatError::NotHermitian(herm.to_f64_lossy()));
    }
    let tr = m.trace();
    if !((tr.re - T::one()).abs() <= T::tol(TRACE_TOL) && tr.im.abs() <= T::tol(TRACE_TOL)) {
        return Err(QmatError::TraceNotUnit(tr.re.to_f64_lossy()));
    }
    let lo = min_eigenvalue(m)?;
    if lo < -T::tol(-PSD_TOL) {
        return Err(QmatError::NotPositive(lo.to_f64_lossy()));
    }
    Ok(())
}

/// Unitary matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unitary<T, const N: usize> {
    mat: ComplexMatrix<T, N>,
}

pub type Unitary2<T> = Unitary<T, 2>;
pub type Unitary4<T> = Unitary<T, 4>;

impl<T: Real, const N: usize> Unitary<T, N> {
    pub fn new(mat: ComplexMatrix<T, N>) -> Result<Self, QmatError> {
        let u = Self { mat };
        let err = u.unitarity_error();
        if !(err <= T::tol(UNITARY_TOL)) {
            return Err(QmatError::NotUnitary(err.to_f64_lossy()));
        }
        Ok(u)
    }

    pub(crate) fn new_unchecked(mat: ComplexMatrix<T, N>) -> Self {
        Self { mat }
    }

    pub fn identity() -> Self {
        Self { mat: ComplexMatrix::identity() }
    }

    pub fn matrix(&self) -> &ComplexMatrix<T, N> {
        &self.mat
    }

    pub fn adjoint(&self) -> Self {
        Self { mat: self.mat.adjoint() }
    }

    /// `‖U†U - I‖_max`.
    pub fn unitarity_error(&self) -> T {
        (self.mat.adjoint() * self.mat).max_abs_diff(&ComplexMatrix::identity())
    }

    /// Applies `self` after `first`.
    pub fn then_after(&self, first: &Self) -> Self {
        Self { mat: self.mat * first.mat }
    }
}

impl<T: Real> Unitary4<T> {
    /// `a ⊗ b`.
    pub fn kron(a: &Unitary2<T>, b: &Unitary2<T>) -> Self {
        Self { mat: kron(&a.mat, &b.mat) }
    }
}

impl<T: Real, const N: usize> Mul for Unitary<T, N> {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        Self { mat: self.mat * rhs.mat }
    }
}

/// `U ρ U†`.
pub fn conjugate<T: Real, const N: usize>(
    rho: &DensityMatrix<T, N>,
    u: &Unitary<T, N>,
) -> DensityMatrix<T, N> {
    DensityMatrix::new_unchecked(u.mat.sandwich(&rho.mat))
}

/// `ρ^S ⊗ ρ^E`.
pub fn product_state<T: Real>(
    rho_s: &DensityMatrix2<T>,
    rho_e: &DensityMatrix2<T>,
) -> DensityMatrix4<T> {
    DensityMatrix::new_unchecked(kron(&rho_s.mat, &rho_e.mat))
}

/// Traces out the environment (second factor) without validating the result.
pub fn partial_trace_env_matrix<T: Real>(m: &Matrix4<T>) -> Matrix2<T> {
    let mut out = Matrix2::zeros();
    for i in 0..2 {
        for j in 0..2 {
            out[(i, j)] = m[(2 * i, 2 * j)] + m[(2 * i + 1, 2 * j + 1)];
        }
    }
    out
}

/// `ρ^S = Tr_E ρ^{SE}`, checked against the density-matrix invariants.
pub fn partial_trace_env<T: Real>(rho: &DensityMatrix4<T>) -> Result<DensityMatrix2<T>, QmatError> {
    DensityMatrix::new(partial_trace_env_matrix(&rho.mat))
}

/// Traces out the system qubit.
pub fn partial_trace_sys_matrix<T: Real>(m: &Matrix4<T>) -> Matrix2<T> {
    let mut out = Matrix2::zeros();
    for k in 0..2 {
        for l in 0..2 {
            out[(k, l)] = m[(k, l)] + m[(2 + k, 2 + l)];
        }
    }
    out
}

/// `H ρ H†`: maps the `{|+⟩, |−⟩}` representation to the computational
/// one and back.
pub fn hadamard_frame<T: Real>(rho: &DensityMatrix2<T>) -> DensityMatrix2<T> {
    DensityMatrix::new_unchecked(hadamard::<T>().sandwich(&rho.mat))
}

/// `H m H†` on a bare matrix.
pub fn hadamard_frame_matrix<T: Real>(m: &Matrix2<T>) -> Matrix2<T> {
    hadamard::<T>().sandwich(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_state4(rng: &mut impl Rng) -> DensityMatrix4<f64> {
        // mixture of random pure states
        let mut m = Matrix4::<f64>::zeros();
        let mut wsum = 0.0;
        for _ in 0..3 {
            let w: f64 = rng.gen();
            let mut psi = [cx(0.0, 0.0); 4];
            for z in psi.iter_mut() {
                *z = cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
            let n: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for z in psi.iter_mut() {
                *z /= n;
            }
            let p = DensityMatrix4::pure(psi).unwrap();
            m = m + p.matrix().scale_real(w);
            wsum += w;
        }
        DensityMatrix::new(m.scale_real(1.0 / wsum)).unwrap()
    }

    fn random_hermitian4(rng: &mut impl Rng) -> Matrix4<f64> {
        let mut m = Matrix4::<f64>::zeros();
        for i in 0..4 {
            m[(i, i)] = cx(rng.gen_range(-3.0..3.0), 0.0);
            for j in (i + 1)..4 {
                let z = cx(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        m
    }

    #[test]
    fn kron_known_products() {
        let i2 = Matrix2::<f64>::identity();
        assert_eq!(kron(&i2, &i2), Matrix4::identity());
        let zz = kron(&sigma_z::<f64>(), &sigma_z());
        assert_eq!(
            zz,
            Matrix4::from_diagonal([cx(1.0, 0.0), cx(-1.0, 0.0), cx(-1.0, 0.0), cx(1.0, 0.0)])
        );
        let xx = kron(&sigma_x::<f64>(), &sigma_x());
        for i in 0..4 {
            for j in 0..4 {
                let want = if i + j == 3 { 1.0 } else { 0.0 };
                assert_eq!(xx[(i, j)], cx(want, 0.0));
            }
        }
    }

    #[test]
    fn partial_trace_of_product_and_bell() {
        let s = DensityMatrix2::from_bloch([0.3, -0.2, 0.5]).unwrap();
        let e = DensityMatrix2::from_bloch([-0.1, 0.6, 0.2]).unwrap();
        let r = partial_trace_env(&product_state(&s, &e)).unwrap();
        assert!(r.matrix().max_abs_diff(s.matrix()) < 1e-15);

        let a = std::f64::consts::FRAC_1_SQRT_2;
        let bell = DensityMatrix4::pure([cx(a, 0.0), cx(0.0, 0.0), cx(0.0, 0.0), cx(a, 0.0)]).unwrap();
        let r = partial_trace_env(&bell).unwrap();
        assert!(r.matrix().max_abs_diff(DensityMatrix2::maximally_mixed().matrix()) < 1e-15);
    }

    #[test]
    fn partial_trace_ignores_environment_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let rho = random_state4(&mut rng);
            let h = random_hermitian4(&mut rng);
            let v_full = expm_hermitian(&h, 0.7).unwrap();
            // restrict to a local environment unitary: V = exp(-i h_E t)
            let he = partial_trace_sys_matrix(&h);
            let he = (he + he.adjoint()).scale_real(0.5);
            let v = expm_hermitian(&he, 0.7).unwrap();
            let u = Unitary4::kron(&Unitary2::identity(), &v);
            let before = partial_trace_env(&rho).unwrap();
            let after = partial_trace_env(&conjugate(&rho, &u)).unwrap();
            // direct basis sum: ρ^S[i][j] = Σ_k ρ[(i,k)][(j,k)]
            let m = conjugate(&rho, &u).into_matrix();
            let mut direct = Matrix2::<f64>::zeros();
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        direct[(i, j)] += m[(2 * i + k, 2 * j + k)];
                    }
                }
            }
            assert!(after.matrix().max_abs_diff(before.matrix()) < 1e-12);
            assert!(after.matrix().max_abs_diff(&direct) < 1e-14);
            // a generic SE unitary does change the reduced state
            let _ = v_full;
        }
    }

    #[test]
    fn partial_trace_rejects_invalid_input() {
        let mut m = Matrix4::<f64>::identity().scale_real(0.25);
        m[(0, 0)] = cx(1.0, 0.0);
        let fake = DensityMatrix::new_unchecked(m);
        assert!(matches!(partial_trace_env(&fake), Err(QmatError::TraceNotUnit(_))));
    }

    #[test]
    fn conjugation_examples() {
        let rho = DensityMatrix2::<f64>::from_bloch([0.1, 0.2, 0.3]).unwrap();
        assert_eq!(conjugate(&rho, &Unitary::identity()), rho);

        // exp(-i π/2 σx) = -iσx
        let flip = expm_hermitian(&sigma_x::<f64>(), std::f64::consts::FRAC_PI_2).unwrap();
        let out = conjugate(&DensityMatrix2::zero(), &flip);
        assert!(out.matrix().max_abs_diff(DensityMatrix2::one().matrix()) < 1e-15);

        let h = Unitary2::new(hadamard::<f64>()).unwrap();
        let twice = conjugate(&conjugate(&rho, &h), &h);
        assert!(twice.matrix().max_abs_diff(rho.matrix()) < 1e-15);
    }

    #[test]
    fn conjugation_preserves_trace_and_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let rho = random_state4(&mut rng);
            let u = expm_hermitian(&random_hermitian4(&mut rng), 1.3).unwrap();
            let out = conjugate(&rho, &u);
            assert!((out.matrix().trace() - rho.matrix().trace()).norm() < 1e-10);
            let mut a = HermitianEigen::new(rho.matrix()).unwrap().values;
            let mut b = HermitianEigen::new(out.matrix()).unwrap().values;
            a.sort_by(|x, y| x.partial_cmp(y).unwrap());
            b.sort_by(|x, y| x.partial_cmp(y).unwrap());
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn hadamard_frame_examples() {
        let out = hadamard_frame(&DensityMatrix2::<f64>::plus());
        assert!(out.matrix().max_abs_diff(DensityMatrix2::zero().matrix()) < 1e-15);
        let mm = DensityMatrix2::<f64>::maximally_mixed();
        assert!(hadamard_frame(&mm).matrix().max_abs_diff(mm.matrix()) < 1e-15);
    }

    #[test]
    fn expm_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_hermitian4(&mut rng);
        let u0 = expm_hermitian(&h, 0.0).unwrap();
        assert!(u0.matrix().max_abs_diff(&Matrix4::identity()) < 1e-14);

        let d = [0.5, -1.25, 2.0, 3.5];
        let hd = Matrix4::from_real([
            [d[0], 0.0, 0.0, 0.0],
            [0.0, d[1], 0.0, 0.0],
            [0.0, 0.0, d[2], 0.0],
            [0.0, 0.0, 0.0, d[3]],
        ]);
        let u = expm_hermitian(&hd, 0.8).unwrap();
        for k in 0..4 {
            let want = Complex64::from_polar(1.0, -d[k] * 0.8);
            assert!((u.matrix()[(k, k)] - want).norm() < 1e-15);
        }

        for _ in 0..20 {
            let h = random_hermitian4(&mut rng);
            let (t, s) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let eig = HermitianEigen::new(&h).unwrap();
            let lhs = eig.propagator(t) * eig.propagator(s);
            let rhs = eig.propagator(t + s);
            assert!(lhs.matrix().max_abs_diff(rhs.matrix()) < 1e-11);
            assert!(eig.propagator(t).unitarity_error() < 1e-12);
            // reconstruct h
            let lam = Matrix4::from_real([
                [eig.values[0], 0.0, 0.0, 0.0],
                [0.0, eig.values[1], 0.0, 0.0],
                [0.0, 0.0, eig.values[2], 0.0],
                [0.0, 0.0, 0.0, eig.values[3]],
            ]);
            let back = eig.vectors * lam * eig.vectors.adjoint();
            assert!(back.max_abs_diff(&h) < 1e-12);
        }
    }

    #[test]
    fn expm_agrees_with_taylor_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let h = random_hermitian4(&mut rng).scale_real(0.1);
        let t = 0.9;
        // Σ (-iht)^k / k!
        let a = h.scale(cx(0.0, -t));
        let mut term = Matrix4::<f64>::identity();
        let mut sum = term;
        for k in 1..40 {
            term = (term * a).scale_real(1.0 / k as f64);
            sum = sum + term;
        }
        let u = expm_hermitian(&h, t).unwrap();
        assert!(u.matrix().max_abs_diff(&sum) < 1e-13);
    }

    #[test]
    fn non_hermitian_is_rejected() {
        let mut m = Matrix2::<f64>::zeros();
        m[(0, 1)] = cx(1.0, 0.0);
        assert!(matches!(expm_hermitian(&m, 1.0), Err(QmatError::NotHermitian(_))));
        assert!(DensityMatrix::new(m).is_err());
    }

    #[test]
    fn density_invariants_are_checked() {
        let neg = Matrix2::<f64>::from_real([[1.2, 0.0], [0.0, -0.2]]);
        assert!(matches!(DensityMatrix::new(neg), Err(QmatError::NotPositive(_))));
        let unnorm = Matrix2::<f64>::from_real([[0.7, 0.0], [0.0, 0.7]]);
        assert!(matches!(DensityMatrix::new(unnorm), Err(QmatError::TraceNotUnit(_))));
        let bad_u = Matrix2::<f64>::from_real([[1.0, 1e-9], [0.0, 1.0]]);
        assert!(matches!(Unitary::new(bad_u), Err(QmatError::NotUnitary(_))));
    }

    #[test]
    fn single_precision_path() {
        let h = kron(&sigma_x::<f32>(), &sigma_x());
        let u = expm_hermitian(&h, 0.3f32).unwrap();
        assert!(u.unitarity_error() < 1e-5);
        let rho = product_state(&DensityMatrix2::<f32>::plus(), &DensityMatrix2::zero());
        let out = partial_trace_env(&conjugate(&rho, &u)).unwrap();
        assert!((out.matrix().trace().re - 1.0).abs() < 1e-5);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn hadamard_frame_is_an_involution(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
                let n = (x * x + y * y + z * z).sqrt().max(1.0);
                let rho = DensityMatrix2::from_bloch([x / n, y / n, z / n]).unwrap();
                let back = hadamard_frame(&hadamard_frame(&rho));
                prop_assert!(back.matrix().max_abs_diff(rho.matrix()) < 1e-12);
            }

            #[test]
            fn partial_trace_preserves_trace(seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let rho = random_state4(&mut rng);
                let r = partial_trace_env(&rho).unwrap();
                prop_assert!((r.matrix().trace() - rho.matrix().trace()).norm() < 1e-12);
            }
        }
    }
}
