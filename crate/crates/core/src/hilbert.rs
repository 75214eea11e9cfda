//! Truncated Fock-space linear algebra for one cavity mode and one qubit.
//!
//! Joint vectors are ordered `(g, 0..N)` then `(e, 0..N)`, i.e. the flat
//! index of `|q, n>` is `q * N + n`. All operators are dense.

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norm tolerance applied when a state is constructed.
pub const NORM_TOLERANCE: f64 = 1e-10;
/// Relative tolerance of the hermiticity check.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
/// Default validity threshold on estimated leakage past the truncation.
pub const DEFAULT_LEAKAGE_THRESHOLD: f64 = 1e-8;
/// Number of top Fock levels whose population serves as the leakage estimate.
pub const TOP_LEVELS: usize = 4;
/// Tail weight a truncation must leave out for coherent-state construction.
pub const COHERENT_TAIL_TOLERANCE: f64 = 1e-10;

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub(crate) const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Qubit charge basis. `G` is the `n = 0` charge state (σz = +1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Qubit {
    G,
    E,
}

impl Qubit {
    pub fn index(self) -> usize {
        match self {
            Qubit::G => 0,
            Qubit::E => 1,
        }
    }

    pub fn other(self) -> Qubit {
        match self {
            Qubit::G => Qubit::E,
            Qubit::E => Qubit::G,
        }
    }
}

impl std::fmt::Display for Qubit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Qubit::G => "g",
            Qubit::E => "e",
        })
    }
}

impl std::str::FromStr for Qubit {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "g" => Ok(Qubit::G),
            "e" => Ok(Qubit::E),
            other => Err(format!("unknown qubit outcome `{other}` (expected g or e)")),
        }
    }
}

/// Dense complex operator, on either the cavity space or the joint space.
///
/// Energies are stored as angular frequencies (ħ = 1).
#[derive(Debug, Clone)]
pub struct FockOperator {
    matrix: DMatrix<C64>,
    hermitian: bool,
}

impl FockOperator {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        check_square(&matrix)?;
        Ok(Self {
            matrix,
            hermitian: false,
        })
    }

    /// Wraps `matrix` as a Hamiltonian, verifying
    /// `max|H - H†| <= 1e-12 * max|H|`.
    pub fn hermitian(matrix: DMatrix<C64>) -> Result<Self> {
        check_square(&matrix)?;
        let deviation = hermitian_deviation(&matrix);
        let scale = matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let tolerance = HERMITIAN_TOLERANCE * scale;
        if deviation > tolerance {
            return Err(Error::NotHermitian {
                deviation,
                tolerance,
            });
        }
        Ok(Self {
            matrix,
            hermitian: true,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn adjoint(&self) -> FockOperator {
        FockOperator {
            matrix: self.matrix.adjoint(),
            hermitian: self.hermitian,
        }
    }

    /// Eigenvalues in ascending order. Requires a hermitian-tagged operator.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        if !self.hermitian {
            return Err(Error::Precondition(
                "eigenvalues requested for an operator not tagged hermitian".into(),
            ));
        }
        let mut values: Vec<f64> = self
            .matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        values.sort_by(|a, b| a.total_cmp(b));
        Ok(values)
    }
}

fn check_square(matrix: &DMatrix<C64>) -> Result<()> {
    if matrix.nrows() != matrix.ncols() {
        return Err(Error::InvalidDimension(format!(
            "operator must be square, got {}x{}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    if matrix.nrows() < 2 {
        return Err(Error::InvalidDimension(format!(
            "operator dimension must be >= 2, got {}",
            matrix.nrows()
        )));
    }
    Ok(())
}

pub(crate) fn hermitian_deviation(matrix: &DMatrix<C64>) -> f64 {
    let n = matrix.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((matrix[(i, j)] - matrix[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Truncated annihilation and creation operators: `a[n-1, n] = √n`.
pub fn make_ladder_ops(fock_dim: usize) -> Result<(FockOperator, FockOperator)> {
    if fock_dim < 2 {
        return Err(Error::InvalidDimension(format!(
            "Fock truncation must be >= 2, got {fock_dim}"
        )));
    }
    let a = annihilation(fock_dim);
    let adag = a.adjoint();
    Ok((
        FockOperator {
            matrix: a,
            hermitian: false,
        },
        FockOperator {
            matrix: adag,
            hermitian: false,
        },
    ))
}

pub(crate) fn annihilation(fock_dim: usize) -> DMatrix<C64> {
    let mut a = DMatrix::zeros(fock_dim, fock_dim);
    for n in 1..fock_dim {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

pub(crate) fn number(fock_dim: usize) -> DMatrix<C64> {
    DMatrix::from_diagonal(&DVector::from_fn(fock_dim, |n, _| C64::new(n as f64, 0.0)))
}

pub(crate) fn sigma_x() -> Matrix2<C64> {
    Matrix2::new(ZERO, ONE, ONE, ZERO)
}

pub(crate) fn sigma_z() -> Matrix2<C64> {
    Matrix2::new(ONE, ZERO, ZERO, -ONE)
}

/// `q ⊗ f` in the joint ordering.
pub(crate) fn qubit_tensor(q: &Matrix2<C64>, f: &DMatrix<C64>) -> DMatrix<C64> {
    let n = f.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for qi in 0..2 {
        for qj in 0..2 {
            let c = q[(qi, qj)];
            if c == ZERO {
                continue;
            }
            out.view_mut((qi * n, qj * n), (n, n)).copy_from(&(f * c));
        }
    }
    out
}

/// General matrix exponential (scaling and squaring).
pub fn expm(matrix: &DMatrix<C64>) -> DMatrix<C64> {
    matrix.clone().exp()
}

/// Anything with a flat amplitude vector.
pub trait StateVector {
    fn amplitudes(&self) -> &DVector<C64>;

    fn norm_sqr(&self) -> f64 {
        self.amplitudes().norm_squared()
    }
}

/// Normalized qubit ⊗ truncated-cavity amplitude vector.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    fock_dim: usize,
    amplitudes: DVector<C64>,
    leakage: f64,
}

impl JointState {
    /// Builds a state from amplitudes that are already normalized. Leakage is
    /// estimated from the population of the top Fock levels.
    pub fn new(fock_dim: usize, amplitudes: DVector<C64>) -> Result<Self> {
        check_fock_dim(fock_dim)?;
        if amplitudes.len() != 2 * fock_dim {
            return Err(Error::DimensionMismatch {
                expected: 2 * fock_dim,
                got: amplitudes.len(),
            });
        }
        let norm_sqr = amplitudes.norm_squared();
        if (norm_sqr - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(norm_sqr));
        }
        let leakage = top_population(&amplitudes, fock_dim, 2);
        Ok(Self {
            fock_dim,
            amplitudes,
            leakage,
        })
    }

    /// Renormalizes `amplitudes`, recording the weight lost to truncation
    /// (`known_leakage`) or the top-level estimate, whichever is larger.
    pub fn from_unnormalized(
        fock_dim: usize,
        amplitudes: DVector<C64>,
        known_leakage: f64,
    ) -> Result<Self> {
        check_fock_dim(fock_dim)?;
        if amplitudes.len() != 2 * fock_dim {
            return Err(Error::DimensionMismatch {
                expected: 2 * fock_dim,
                got: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized(norm * norm));
        }
        let amplitudes = amplitudes / C64::new(norm, 0.0);
        let leakage = known_leakage.max(top_population(&amplitudes, fock_dim, 2));
        Ok(Self {
            fock_dim,
            amplitudes,
            leakage,
        })
    }

    /// `|q> ⊗ cavity`.
    pub fn product(qubit: Qubit, cavity: &CavityState) -> JointState {
        let n = cavity.fock_dim();
        let mut amplitudes = DVector::zeros(2 * n);
        amplitudes
            .rows_mut(qubit.index() * n, n)
            .copy_from(cavity.amplitudes());
        JointState {
            fock_dim: n,
            amplitudes,
            leakage: cavity.leakage(),
        }
    }

    pub fn fock_dim(&self) -> usize {
        self.fock_dim
    }

    pub fn leakage(&self) -> f64 {
        self.leakage
    }

    pub fn is_valid(&self, threshold: f64) -> bool {
        self.leakage < threshold
    }

    /// Returns `self` unless the leakage estimate reaches `threshold`.
    pub fn validated(self, threshold: f64) -> Result<Self> {
        if self.is_valid(threshold) {
            Ok(self)
        } else {
            Err(Error::Leakage {
                leakage: self.leakage,
                threshold,
            })
        }
    }

    /// Unnormalized cavity block conditioned on the qubit.
    pub fn block(&self, qubit: Qubit) -> DVector<C64> {
        self.amplitudes
            .rows(qubit.index() * self.fock_dim, self.fock_dim)
            .into_owned()
    }

    /// Population of the top Fock levels, summed over the qubit.
    pub fn top_population(&self) -> f64 {
        top_population(&self.amplitudes, self.fock_dim, 2)
    }
}

impl StateVector for JointState {
    fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }
}

/// Normalized truncated cavity state.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityState {
    amplitudes: DVector<C64>,
    leakage: f64,
}

impl CavityState {
    pub fn new(amplitudes: DVector<C64>) -> Result<Self> {
        check_fock_dim(amplitudes.len())?;
        let norm_sqr = amplitudes.norm_squared();
        if (norm_sqr - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(norm_sqr));
        }
        let leakage = top_population(&amplitudes, amplitudes.len(), 1);
        Ok(Self {
            amplitudes,
            leakage,
        })
    }

    pub fn from_unnormalized(amplitudes: DVector<C64>, known_leakage: f64) -> Result<Self> {
        check_fock_dim(amplitudes.len())?;
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized(norm * norm));
        }
        let amplitudes = amplitudes / C64::new(norm, 0.0);
        let leakage = known_leakage.max(top_population(&amplitudes, amplitudes.len(), 1));
        Ok(Self {
            amplitudes,
            leakage,
        })
    }

    pub fn vacuum(fock_dim: usize) -> Result<Self> {
        check_fock_dim(fock_dim)?;
        let mut amplitudes = DVector::zeros(fock_dim);
        amplitudes[0] = ONE;
        Ok(Self {
            amplitudes,
            leakage: 0.0,
        })
    }

    pub fn fock_dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn leakage(&self) -> f64 {
        self.leakage
    }

    /// `<a†a>`
    pub fn mean_photon_number(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(n, c)| n as f64 * c.norm_sqr())
            .sum()
    }

    /// `<a>`
    pub fn mean_field(&self) -> C64 {
        let psi = &self.amplitudes;
        (0..psi.len() - 1)
            .map(|n| psi[n].conj() * psi[n + 1] * ((n + 1) as f64).sqrt())
            .sum()
    }

    /// `<a²>`
    pub fn mean_field_squared(&self) -> C64 {
        let psi = &self.amplitudes;
        (0..psi.len().saturating_sub(2))
            .map(|n| psi[n].conj() * psi[n + 2] * (((n + 1) * (n + 2)) as f64).sqrt())
            .sum()
    }

    /// Smallest variance of `(a e^{-iφ} + a† e^{iφ})/√2` over φ; the vacuum
    /// gives 1/2.
    pub fn min_quadrature_variance(&self) -> f64 {
        let a = self.mean_field();
        let a2 = self.mean_field_squared();
        let n = self.mean_photon_number();
        0.5 + (n - a.norm_sqr()) - (a2 - a * a).norm()
    }
}

impl StateVector for CavityState {
    fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }
}

#[derive(Serialize, Deserialize)]
struct CavityStateRepr {
    fock_amplitudes: Vec<[f64; 2]>,
    #[serde(default)]
    leakage: f64,
}

impl Serialize for CavityState {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        CavityStateRepr {
            fock_amplitudes: self.amplitudes.iter().map(|z| [z.re, z.im]).collect(),
            leakage: self.leakage,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CavityState {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let repr = CavityStateRepr::deserialize(deserializer)?;
        let amplitudes = DVector::from_iterator(
            repr.fock_amplitudes.len(),
            repr.fock_amplitudes
                .iter()
                .map(|[re, im]| C64::new(*re, *im)),
        );
        let mut state = CavityState::new(amplitudes).map_err(serde::de::Error::custom)?;
        state.leakage = repr.leakage;
        Ok(state)
    }
}

fn check_fock_dim(fock_dim: usize) -> Result<()> {
    if fock_dim < 2 {
        return Err(Error::InvalidDimension(format!(
            "Fock truncation must be >= 2, got {fock_dim}"
        )));
    }
    Ok(())
}

fn top_population(amplitudes: &DVector<C64>, fock_dim: usize, blocks: usize) -> f64 {
    let top = TOP_LEVELS.min(fock_dim);
    (0..blocks)
        .flat_map(|b| (fock_dim - top..fock_dim).map(move |n| b * fock_dim + n))
        .map(|i| amplitudes[i].norm_sqr())
        .sum()
}

/// `|<x|y>|²`, insensitive to global phase.
pub fn fidelity<S: StateVector>(x: &S, y: &S) -> Result<f64> {
    let (xa, ya) = (x.amplitudes(), y.amplitudes());
    if xa.len() != ya.len() {
        return Err(Error::DimensionMismatch {
            expected: xa.len(),
            got: ya.len(),
        });
    }
    Ok(xa.dotc(ya).norm_sqr().min(1.0))
}

/// `exp(-iHt)` for a fixed hermitian `H`, diagonalized once and reusable for
/// any number of times.
#[derive(Debug, Clone)]
pub struct Propagator {
    energies: DVector<f64>,
    eigenvectors: DMatrix<C64>,
}

impl Propagator {
    pub fn new(hamiltonian: &FockOperator) -> Result<Self> {
        if !hamiltonian.is_hermitian() {
            return Err(Error::Precondition(
                "propagation requires a hermitian-tagged operator".into(),
            ));
        }
        let eig = hamiltonian.matrix().clone().symmetric_eigen();
        Ok(Self {
            energies: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// `exp(-iHt) ψ`; `t` carries whatever time unit makes `Ht` dimensionless.
    pub fn apply(&self, psi0: &JointState, t: f64) -> Result<JointState> {
        if self.dim() != psi0.amplitudes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: psi0.amplitudes.len(),
            });
        }
        let mut coeffs = self.eigenvectors.ad_mul(&psi0.amplitudes);
        for (c, e) in coeffs.iter_mut().zip(self.energies.iter()) {
            *c *= C64::from_polar(1.0, -e * t);
        }
        let amplitudes = &self.eigenvectors * coeffs;
        let leakage = psi0
            .leakage
            .max(top_population(&amplitudes, psi0.fock_dim, 2));
        Ok(JointState {
            fock_dim: psi0.fock_dim,
            amplitudes,
            leakage,
        })
    }
}

/// One-shot `exp(-iHt) ψ`.
pub fn propagate(hamiltonian: &FockOperator, psi0: &JointState, t: f64) -> Result<JointState> {
    if hamiltonian.dim() != 2 * psi0.fock_dim() {
        return Err(Error::DimensionMismatch {
            expected: 2 * psi0.fock_dim(),
            got: hamiltonian.dim(),
        });
    }
    Propagator::new(hamiltonian)?.apply(psi0, t)
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Exact coherent-state amplitudes `e^{-|α|²/2} αⁿ/√n!` for `n < fock_dim`,
/// without renormalization.
pub fn coherent_amplitudes(alpha: C64, fock_dim: usize) -> DVector<C64> {
    let mut out = DVector::zeros(fock_dim);
    if alpha == ZERO {
        out[0] = ONE;
        return out;
    }
    let lnf = ln_factorials(fock_dim);
    let (r, theta) = alpha.to_polar();
    let (ln_r, half_r2) = (r.ln(), 0.5 * r * r);
    for n in 0..fock_dim {
        let ln_mag = -half_r2 + n as f64 * ln_r - 0.5 * lnf[n];
        out[n] = C64::from_polar(ln_mag.exp(), n as f64 * theta);
    }
    out
}

/// Poisson weight of a coherent state beyond `fock_dim - 1`.
pub fn coherent_tail(alpha: C64, fock_dim: usize) -> f64 {
    let mean = alpha.norm_sqr();
    if mean == 0.0 {
        return 0.0;
    }
    let ln_mean = mean.ln();
    let mut ln_fact: f64 = (1..=fock_dim).map(|k| (k as f64).ln()).sum();
    let mut tail = 0.0;
    let mut n = fock_dim;
    loop {
        let p = (-mean + n as f64 * ln_mean - ln_fact).exp();
        tail += p;
        if n as f64 > mean && p < 1e-30 * tail.max(1e-300) {
            break;
        }
        if n > fock_dim + 100_000 {
            break;
        }
        n += 1;
        ln_fact += (n as f64).ln();
    }
    tail
}

/// Smallest truncation whose coherent-state tail is below `tolerance`.
pub fn coherent_required_dim(alpha: C64, tolerance: f64) -> usize {
    let mut n = 2;
    while coherent_tail(alpha, n) >= tolerance {
        n += 1;
    }
    n
}

/// `|α>` truncated to `fock_dim` levels, renormalized, with its tail recorded
/// as leakage.
pub fn coherent_fock(alpha: C64, fock_dim: usize) -> Result<CavityState> {
    check_fock_dim(fock_dim)?;
    let tail = coherent_tail(alpha, fock_dim);
    if tail >= COHERENT_TAIL_TOLERANCE {
        return Err(Error::TruncationInsufficient {
            fock_dim,
            tail,
            required: coherent_required_dim(alpha, COHERENT_TAIL_TOLERANCE),
        });
    }
    CavityState::from_unnormalized(coherent_amplitudes(alpha, fock_dim), tail)
}

/// `<n|D(γ)|m>` for `n, m < dim`, from the associated-Laguerre closed form.
/// These are the exact matrix elements of the untruncated displacement.
pub fn displacement_elements(gamma: C64, dim: usize) -> DMatrix<C64> {
    let mut out = DMatrix::zeros(dim, dim);
    if gamma == ZERO {
        for n in 0..dim {
            out[(n, n)] = ONE;
        }
        return out;
    }
    let lnf = ln_factorials(dim);
    let x = gamma.norm_sqr();
    let (r, arg) = gamma.to_polar();
    let ln_r = r.ln();
    let mut laguerre = vec![0.0; dim];
    for k in 0..dim {
        // L_j^{(k)}(x) for j = 0..dim-k
        let len = dim - k;
        laguerre[0] = 1.0;
        if len > 1 {
            laguerre[1] = 1.0 + k as f64 - x;
        }
        for j in 1..len.saturating_sub(1) {
            let jf = j as f64;
            laguerre[j + 1] = ((2.0 * jf + 1.0 + k as f64 - x) * laguerre[j]
                - (jf + k as f64) * laguerre[j - 1])
                / (jf + 1.0);
        }
        for j in 0..len {
            // lower triangle: n = j + k, m = j
            let ln_pref = 0.5 * (lnf[j] - lnf[j + k]) + k as f64 * ln_r - 0.5 * x;
            let mag = ln_pref.exp() * laguerre[j];
            out[(j + k, j)] = C64::from_polar(mag, k as f64 * arg);
            if k > 0 {
                // upper triangle: n = j, m = j + k, uses (-γ*)^k
                let phase = k as f64 * (std::f64::consts::PI - arg);
                out[(j, j + k)] = C64::from_polar(mag, phase);
            }
        }
    }
    out
}

/// Wigner function `W(β) = (2/π) <D(β) Π D†(β)>` at each grid point.
///
/// Uses `D(β) Π D†(β) = D(2β) Π`, so only matrix elements inside the
/// truncation are needed.
pub fn wigner(state: &CavityState, grid: &[C64]) -> Vec<f64> {
    let psi = state.amplitudes();
    let parity_psi: DVector<C64> =
        DVector::from_fn(psi.len(), |n, _| if n % 2 == 0 { psi[n] } else { -psi[n] });
    grid.par_iter()
        .map(|beta| {
            let d = displacement_elements(*beta * 2.0, psi.len());
            let value = psi.dotc(&(d * &parity_psi));
            std::f64::consts::FRAC_2_PI * value.re
        })
        .collect()
}
