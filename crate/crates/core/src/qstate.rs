//! Dense state vectors and operators for one qudit (dimension `d`) and a
//! pair of qudits (dimension `d^2`).
//!
//! Two-particle states are flattened with `k = n1 * d + n2`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use thiserror::Error;

use crate::zmod::{FieldElem, PrimeModulus, ZmodError};

pub type Amplitude = Complex64;

/// Normalization tag threshold on `|<s|s> - 1|`.
pub const NORMALIZATION_TOL: f64 = 1e-12;
/// Gram-matrix tolerance when validating a basis.
pub const ORTHONORMAL_TOL: f64 = 1e-10;
/// Default assertion tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Outcomes at or below this probability are outside the support.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

/// Generator used for every sampled measurement: ChaCha with 8 rounds,
/// seeded through `SeedableRng::seed_from_u64`. The stream is specified by
/// the algorithm, so seeded runs reproduce across platforms.
pub type MeasurementRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> MeasurementRng {
    MeasurementRng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("amplitudes contain NaN or infinity")]
    NonFinite,
    #[error("state is not normalized (squared norm {0})")]
    NotNormalized(f64),
    #[error("basis is not orthonormal (Gram residual {0:e})")]
    NotOrthonormal(f64),
    #[error("basis has {found} vectors but the space has dimension {dim}")]
    IncompleteBasis { dim: usize, found: usize },
    #[error("outcome has probability {0:e}, below the support threshold")]
    ZeroProbability(f64),
    #[error(transparent)]
    Field(#[from] ZmodError),
}

fn check_dim(expected: usize, found: usize) -> Result<(), StateError> {
    if expected != found {
        return Err(StateError::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// One qudit of odd prime dimension together with its table of powers of
/// `omega = exp(2 pi i / d)`.
#[derive(Debug, Clone)]
pub struct Qudit {
    modulus: PrimeModulus,
    roots: Vec<Complex64>,
}

impl Qudit {
    pub fn new(d: u64) -> Result<Self, ZmodError> {
        Ok(Self::from_modulus(PrimeModulus::new(d)?))
    }

    pub fn from_modulus(modulus: PrimeModulus) -> Self {
        let d = modulus.get();
        let roots = (0..d)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * f64::from(k) / f64::from(d)))
            .collect();
        Self { modulus, roots }
    }

    #[inline]
    pub fn modulus(&self) -> PrimeModulus {
        self.modulus
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.modulus.as_usize()
    }

    #[inline]
    pub fn pair_dim(&self) -> usize {
        self.dim() * self.dim()
    }

    #[inline]
    pub fn elem(&self, value: i64) -> FieldElem {
        self.modulus.elem(value)
    }

    pub fn elements(&self) -> impl Iterator<Item = FieldElem> + Clone {
        self.modulus.elements()
    }

    /// `omega^e`; the exponent is already a residue so no phase drift occurs.
    #[inline]
    pub fn omega_pow(&self, e: FieldElem) -> Complex64 {
        debug_assert_eq!(e.modulus(), self.modulus);
        self.roots[e.index()]
    }

    pub fn omega(&self) -> Complex64 {
        self.roots[1 % self.dim()]
    }
}

/// A pure state. Unit norm unless tagged unnormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: Vec<Amplitude>,
    normalized: bool,
}

impl PureState {
    /// Builds a unit-norm state; fails if the norm is off by more than
    /// [`NORMALIZATION_TOL`].
    pub fn normalized(amps: Vec<Amplitude>) -> Result<Self, StateError> {
        let s = Self::unnormalized(amps)?;
        let n = s.norm_sqr();
        if (n - 1.0).abs() >= NORMALIZATION_TOL {
            return Err(StateError::NotNormalized(n));
        }
        Ok(Self {
            normalized: true,
            ..s
        })
    }

    pub fn unnormalized(amps: Vec<Amplitude>) -> Result<Self, StateError> {
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(StateError::NonFinite);
        }
        Ok(Self {
            amps,
            normalized: false,
        })
    }

    pub fn basis_vector(dim: usize, k: usize) -> Self {
        assert!(k < dim, "basis index {k} out of range for dimension {dim}");
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[k] = Complex64::new(1.0, 0.0);
        Self {
            amps,
            normalized: true,
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    #[inline]
    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amps
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Rescales to unit norm. A state with squared norm at or below
    /// [`SUPPORT_THRESHOLD`] cannot be normalized.
    pub fn normalize(&self) -> Result<Self, StateError> {
        let n = self.norm_sqr();
        if n <= SUPPORT_THRESHOLD {
            return Err(StateError::ZeroProbability(n));
        }
        let s = 1.0 / n.sqrt();
        Ok(Self {
            amps: self.amps.iter().map(|a| a * s).collect(),
            normalized: true,
        })
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            amps: self.amps.iter().map(|a| a * c).collect(),
            normalized: self.normalized && (c.norm_sqr() - 1.0).abs() < NORMALIZATION_TOL,
        }
    }

    /// Largest entrywise distance to another state of the same dimension.
    pub fn max_abs_diff(&self, other: &PureState) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// `<a|b> = sum_k conj(a_k) b_k`.
pub fn inner(a: &PureState, b: &PureState) -> Result<Amplitude, StateError> {
    check_dim(a.dim(), b.dim())?;
    Ok(inner_unchecked(a, b))
}

#[inline]
fn inner_unchecked(a: &PureState, b: &PureState) -> Amplitude {
    a.amps
        .iter()
        .zip(&b.amps)
        .fold(Complex64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

/// `a ⊗ b` with the index convention `k = i * dim(b) + j`.
pub fn tensor(a: &PureState, b: &PureState) -> PureState {
    let mut amps = Vec::with_capacity(a.dim() * b.dim());
    for x in &a.amps {
        for y in &b.amps {
            amps.push(x * y);
        }
    }
    PureState {
        amps,
        normalized: a.normalized && b.normalized,
    }
}

/// A validated orthonormal basis spanning its whole space.
#[derive(Debug, Clone)]
pub struct Basis {
    vectors: Vec<PureState>,
}

impl Basis {
    pub fn new(vectors: Vec<PureState>) -> Result<Self, StateError> {
        let dim = vectors.first().map_or(0, PureState::dim);
        if vectors.len() != dim || dim == 0 {
            return Err(StateError::IncompleteBasis {
                dim,
                found: vectors.len(),
            });
        }
        for v in &vectors {
            check_dim(dim, v.dim())?;
        }
        let residual = gram_residual(&vectors);
        if residual > ORTHONORMAL_TOL {
            return Err(StateError::NotOrthonormal(residual));
        }
        Ok(Self { vectors })
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[PureState] {
        &self.vectors
    }

    pub fn get(&self, k: usize) -> &PureState {
        &self.vectors[k]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PureState> {
        self.vectors.iter()
    }

    pub fn gram_residual(&self) -> f64 {
        gram_residual(&self.vectors)
    }

    pub fn into_vectors(self) -> Vec<PureState> {
        self.vectors
    }
}

/// Largest entrywise deviation of the Gram matrix from the identity.
pub fn gram_residual(vectors: &[PureState]) -> f64 {
    let mut worst = 0.0f64;
    for (i, u) in vectors.iter().enumerate() {
        for (j, v) in vectors.iter().enumerate().skip(i) {
            let target = if i == j { 1.0 } else { 0.0 };
            let g = inner_unchecked(u, v);
            worst = worst.max((g - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Born-rule probabilities `p_k = |<basis_k|s>|^2`.
pub fn born_probabilities(s: &PureState, basis: &Basis) -> Result<Vec<f64>, StateError> {
    check_dim(basis.dim(), s.dim())?;
    Ok(basis
        .iter()
        .map(|v| inner_unchecked(v, s).norm_sqr())
        .collect())
}

/// Draws an index from a discrete distribution. Rounding slack in the tail
/// falls back to the last index with nonzero weight.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let total: f64 = probs.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if target < acc && p > 0.0 {
            return k;
        }
    }
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .expect("distribution has no positive weight")
}

/// Projective measurement of `s` in `basis`: returns the sampled index and
/// the collapsed state `basis[index]`.
pub fn measure<R: Rng + ?Sized>(
    s: &PureState,
    basis: &Basis,
    rng: &mut R,
) -> Result<(usize, PureState), StateError> {
    if !s.is_normalized() {
        return Err(StateError::NotNormalized(s.norm_sqr()));
    }
    let probs = born_probabilities(s, basis)?;
    let k = sample_index(&probs, rng);
    Ok((k, basis.get(k).clone()))
}

/// Applies `|v><v| ⊗ I` to a two-particle state. Returns the outcome
/// probability (squared norm of the projected state, relative to the input
/// norm) and the projected, unnormalized state.
pub fn project_particle1(s: &PureState, v: &PureState) -> Result<(f64, PureState), StateError> {
    let d = v.dim();
    check_dim(d * d, s.dim())?;
    // c_j = sum_i conj(v_i) s_{i,j}
    let mut c = vec![Complex64::new(0.0, 0.0); d];
    for (i, vi) in v.amps.iter().enumerate() {
        let vc = vi.conj();
        for (j, cj) in c.iter_mut().enumerate() {
            *cj += vc * s.amps[i * d + j];
        }
    }
    let mut amps = Vec::with_capacity(d * d);
    for vi in &v.amps {
        for cj in &c {
            amps.push(vi * cj);
        }
    }
    let projected = PureState::unnormalized(amps)?;
    let prob = projected.norm_sqr() / s.norm_sqr();
    Ok((prob, projected))
}

/// Which particle survives a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Keep particle 1, trace out particle 2.
    Particle1,
    /// Keep particle 2, trace out particle 1.
    Particle2,
}

/// Reduced density matrix of a normalized two-particle state.
pub fn partial_trace(s: &PureState, d: usize, side: Side) -> Result<DensityMatrix, StateError> {
    check_dim(d * d, s.dim())?;
    let n = s.norm_sqr();
    let a = |i: usize, j: usize| s.amps[i * d + j];
    let mut entries = vec![Complex64::new(0.0, 0.0); d * d];
    for r in 0..d {
        for c in 0..d {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..d {
                acc += match side {
                    Side::Particle1 => a(r, k) * a(c, k).conj(),
                    Side::Particle2 => a(k, r) * a(k, c).conj(),
                };
            }
            entries[r * d + c] = acc / n;
        }
    }
    Ok(DensityMatrix { dim: d, entries })
}

/// `|<a|b>| > 1 - tol`.
pub fn equal_up_to_global_phase(a: &PureState, b: &PureState, tol: f64) -> bool {
    if a.dim() != b.dim() {
        return false;
    }
    inner_unchecked(a, b).norm() > 1.0 - tol
}

/// Dense square operator, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    dim: usize,
    entries: Vec<Amplitude>,
}

impl Operator {
    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> Amplitude) -> Self {
        let mut entries = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                entries.push(f(r, c));
            }
        }
        Self { dim, entries }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |r, c| {
            Complex64::new(if r == c { 1.0 } else { 0.0 }, 0.0)
        })
    }

    /// `sum_k lambda_k |v_k><v_k|`.
    pub fn spectral(basis: &Basis, eigenvalues: &[Amplitude]) -> Self {
        assert_eq!(basis.dim(), eigenvalues.len());
        let dim = basis.dim();
        let mut op = Self::from_fn(dim, |_, _| Complex64::new(0.0, 0.0));
        for (v, &lambda) in basis.iter().zip(eigenvalues) {
            for r in 0..dim {
                let vr = lambda * v.amps[r];
                for c in 0..dim {
                    op.entries[r * dim + c] += vr * v.amps[c].conj();
                }
            }
        }
        op
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Amplitude {
        self.entries[r * self.dim + c]
    }

    pub fn apply(&self, s: &PureState) -> Result<PureState, StateError> {
        check_dim(self.dim, s.dim())?;
        let amps = (0..self.dim)
            .map(|r| {
                self.entries[r * self.dim..(r + 1) * self.dim]
                    .iter()
                    .zip(&s.amps)
                    .map(|(m, x)| m * x)
                    .sum()
            })
            .collect();
        PureState::unnormalized(amps)
    }

    pub fn matmul(&self, other: &Operator) -> Result<Operator, StateError> {
        check_dim(self.dim, other.dim)?;
        let n = self.dim;
        let mut entries = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for k in 0..n {
                let a = self.entries[r * n + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..n {
                    entries[r * n + c] += a * other.entries[k * n + c];
                }
            }
        }
        Ok(Operator { dim: n, entries })
    }

    pub fn pow(&self, exp: u64) -> Operator {
        let mut acc = Operator::identity(self.dim);
        let mut base = self.clone();
        let mut e = exp;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.matmul(&base).expect("same dimension");
            }
            e >>= 1;
            if e > 0 {
                base = base.matmul(&base).expect("same dimension");
            }
        }
        acc
    }

    pub fn adjoint(&self) -> Operator {
        Self::from_fn(self.dim, |r, c| self.get(c, r).conj())
    }

    pub fn kron(&self, other: &Operator) -> Operator {
        let (n, m) = (self.dim, other.dim);
        Self::from_fn(n * m, |r, c| {
            self.get(r / m, c / m) * other.get(r % m, c % m)
        })
    }

    pub fn scale(&self, c: Amplitude) -> Operator {
        Operator {
            dim: self.dim,
            entries: self.entries.iter().map(|e| e * c).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn unitarity_residual(&self) -> f64 {
        self.adjoint()
            .matmul(self)
            .expect("same dimension")
            .max_abs_diff(&Operator::identity(self.dim))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_residual() < tol
    }
}

/// Reduced (mixed) state of one particle.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    entries: Vec<Amplitude>,
}

impl DensityMatrix {
    pub fn maximally_mixed(dim: usize) -> Self {
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for k in 0..dim {
            entries[k * dim + k] = Complex64::new(1.0 / dim as f64, 0.0);
        }
        Self { dim, entries }
    }

    pub fn pure(s: &PureState) -> Self {
        let dim = s.dim();
        let n = s.norm_sqr();
        let mut entries = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                entries.push(s.amps[r] * s.amps[c].conj() / n);
            }
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> Amplitude {
        self.entries[r * self.dim + c]
    }

    pub fn trace(&self) -> Amplitude {
        (0..self.dim).map(|k| self.get(k, k)).sum()
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (0..self.dim).all(|r| (0..self.dim).all(|c| (self.get(r, c) - self.get(c, r).conj()).norm() <= tol))
    }

    /// Cholesky factorization of `rho + tol * I`; succeeds iff no eigenvalue
    /// of the Hermitian part lies below `-tol`.
    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        let n = self.dim;
        let mut l = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            let mut diag = self.get(j, j).re + tol;
            for k in 0..j {
                diag -= l[j * n + k].norm_sqr();
            }
            if diag <= 0.0 {
                return false;
            }
            let ljj = diag.sqrt();
            l[j * n + j] = Complex64::new(ljj, 0.0);
            for i in (j + 1)..n {
                let mut s = (self.get(i, j) + self.get(j, i).conj()) * 0.5;
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / ljj;
            }
        }
        true
    }
}
