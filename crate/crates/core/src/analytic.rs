//! Closed-form evolutions of the cavity–qubit system.
//!
//! Every evolution returns a [`BranchDecomposition`]: a sum of
//! `weight · |qubit> ⊗ |cavity label>` terms whose labels (coherent or
//! squeezed-coherent) are materialized in Fock space only on demand. The
//! brute-force propagator in [`crate::hilbert`] is the independent check on
//! all of it.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation, coherent_amplitudes, coherent_required_dim, coherent_tail, expm, number,
    CavityState, JointState, Qubit, I, ONE, ZERO,
};
use crate::model::{Coupling, DeviceParams};

/// Truncation tail every materialized label must stay below.
pub const LABEL_TAIL_TOLERANCE: f64 = 1e-10;
/// Largest truncation branch materialization will try.
pub const MAX_AUTO_DIM: usize = 4096;
/// Below this |β2θ| the disentangling coefficients use their short series.
pub const SERIES_SWITCH: f64 = 1e-6;

const SETTING_TOLERANCE: f64 = 1e-12;

// ---------------------------------------------------------------------------
// BCH disentangling

/// Coefficients of
/// `exp[θ(β1 a + β2 a†a + β3 a†)] = e^{f1 a†} e^{f2 a†a} e^{f3 a} e^{f4}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisentangledFactors {
    pub f1: C64,
    pub f2: C64,
    pub f3: C64,
    pub f4: C64,
}

fn expm1(z: C64) -> C64 {
    let (x, y) = (z.re, z.im);
    let half = (0.5 * y).sin();
    C64::new(x.exp_m1() * y.cos() - 2.0 * half * half, x.exp() * y.sin())
}

/// (e^z − 1)/z and (e^z − 1 − z)/z², cancellation-free.
fn phi_functions(z: C64) -> (C64, C64) {
    let r = z.norm();
    if r < SERIES_SWITCH {
        (
            ONE + z / 2.0 + z * z / 6.0,
            C64::new(0.5, 0.0) + z / 6.0 + z * z / 24.0,
        )
    } else if r < 1.0 {
        phi_taylor(z)
    } else {
        let em1 = expm1(z);
        (em1 / z, (em1 - z) / (z * z))
    }
}

/// Taylor sums Σ z^k/(k+1)! and Σ z^k/(k+2)!, to machine precision for |z| < 1.
fn phi_taylor(z: C64) -> (C64, C64) {
    let mut phi1 = ZERO;
    let mut phi2 = ZERO;
    // term_k = z^k / (k+1)!
    let mut term = ONE;
    for k in 0..40 {
        phi1 += term;
        // z^k/(k+2)! = term / (k+2)
        phi2 += term / (k as f64 + 2.0);
        term *= z / (k as f64 + 2.0);
        if term.norm() < 1e-18 * phi1.norm() {
            break;
        }
    }
    (phi1, phi2)
}

pub fn disentangle(theta: C64, beta1: C64, beta2: C64, beta3: C64) -> DisentangledFactors {
    let z = beta2 * theta;
    let (phi1, phi2) = phi_functions(z);
    DisentangledFactors {
        f1: beta3 * theta * phi1,
        f2: z,
        f3: beta1 * theta * phi1,
        f4: beta1 * beta3 * theta * theta * phi2,
    }
}

impl DisentangledFactors {
    /// Applies the product form to a normalized coherent state `|α>`, giving
    /// `exp(log_weight) |α_out>` with `|α_out>` normalized.
    pub fn apply_to_coherent(&self, alpha: C64) -> (C64, C64) {
        let rotated = alpha * self.f2.exp();
        let out = rotated + self.f1;
        let log_weight = self.f4 + self.f3 * alpha + 0.5 * (out.norm_sqr() - alpha.norm_sqr());
        (out, log_weight)
    }

    /// The product form as a truncated matrix. Each factor is exact on the
    /// truncated space (a and a† are nilpotent there).
    pub fn product_operator(&self, fock_dim: usize) -> nalgebra::DMatrix<C64> {
        let a = annihilation(fock_dim);
        let adag = a.adjoint();
        let left = nilpotent_exp(&(adag * self.f1));
        let right = nilpotent_exp(&(a * self.f3));
        let middle = nalgebra::DMatrix::from_diagonal(&DVector::from_fn(fock_dim, |n, _| {
            (self.f2 * n as f64).exp()
        }));
        left * middle * right * self.f4.exp()
    }
}

fn nilpotent_exp(m: &nalgebra::DMatrix<C64>) -> nalgebra::DMatrix<C64> {
    let n = m.nrows();
    let mut out = nalgebra::DMatrix::identity(n, n);
    let mut term = nalgebra::DMatrix::identity(n, n);
    for k in 1..n {
        term = &term * m / C64::from(k as f64);
        out += &term;
    }
    out
}

// ---------------------------------------------------------------------------
// Labels and branches

/// Qubit basis a branch is expressed in; `Plus`/`Minus` are σx eigenstates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QubitBasis {
    G,
    E,
    Plus,
    Minus,
}

impl QubitBasis {
    /// Components on (g, e).
    pub fn components(self) -> [C64; 2] {
        let h = C64::from(FRAC_1_SQRT_2);
        match self {
            QubitBasis::G => [ONE, ZERO],
            QubitBasis::E => [ZERO, ONE],
            QubitBasis::Plus => [h, h],
            QubitBasis::Minus => [h, -h],
        }
    }

    pub fn as_charge(self) -> Option<Qubit> {
        match self {
            QubitBasis::G => Some(Qubit::G),
            QubitBasis::E => Some(Qubit::E),
            _ => None,
        }
    }
}

impl From<Qubit> for QubitBasis {
    fn from(q: Qubit) -> Self {
        match q {
            Qubit::G => QubitBasis::G,
            Qubit::E => QubitBasis::E,
        }
    }
}

/// `e^{i phase} |alpha>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentLabel {
    pub alpha: C64,
    pub phase: f64,
}

impl CoherentLabel {
    pub fn new(alpha: C64) -> Self {
        Self { alpha, phase: 0.0 }
    }

    pub fn with_phase(alpha: C64, phase: f64) -> Self {
        Self { alpha, phase }
    }
}

/// `e^{i phase} exp[−i·rotation·a†a + (squeeze·a†² − squeeze*·a²)/2] |gamma>`.
///
/// The rotation and the quadratic generator act jointly (one exponential),
/// which is what a constant quadratic Hamiltonian produces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezedLabel {
    pub gamma: C64,
    pub squeeze: C64,
    pub rotation: f64,
    pub phase: f64,
}

/// Gaussian-state form `c0 · exp(A a†²/2 + B a†)|0>` of a squeezed label.
struct GaussianForm {
    c0: C64,
    a: C64,
    b: C64,
}

impl SqueezedLabel {
    fn gaussian_form(&self) -> GaussianForm {
        // SU(1,1) with K0 = (a†a + 1/2)/2, K+ = a†²/2, K- = a²/2 and the
        // faithful 2x2 representation K0 = diag(1/2, -1/2), K+ = [[0,1],[0,0]],
        // K- = [[0,0],[-1,0]]. The generator -2iρK0 + ζK+ - ζ*K- maps to
        // G = [[-iρ, ζ], [ζ*, iρ]] with G² = (|ζ|² − ρ²)·1.
        let rho = self.rotation;
        let zeta = self.squeeze;
        let mu_sq = zeta.norm_sqr() - rho * rho;
        let (c, s) = if mu_sq > 0.0 {
            let mu = mu_sq.sqrt();
            (mu.cosh(), mu.sinh() / mu)
        } else if mu_sq < 0.0 {
            let nu = (-mu_sq).sqrt();
            (nu.cos(), nu.sin() / nu)
        } else {
            (1.0, 1.0)
        };
        let m22 = C64::new(c, s * rho);
        let m12 = zeta * s;
        let m21 = zeta.conj() * s;

        // m22^{-1/2} on the branch continuous along the path s·G, s ∈ [0, 1]
        let principal = m22.arg();
        let arg = if mu_sq < 0.0 {
            let nu = (-mu_sq).sqrt();
            let target = rho.signum() * nu;
            principal + 2.0 * PI * ((target - principal) / (2.0 * PI)).round()
        } else {
            principal
        };
        let inv_sqrt_m22 = C64::from_polar(m22.norm().powf(-0.5), -0.5 * arg);

        let x_plus = m12 / m22;
        let x_minus = -m21 / m22;
        let gamma = self.gamma;
        let log_c0 =
            I * (self.phase + 0.5 * rho) + x_minus * gamma * gamma * 0.5 - 0.5 * gamma.norm_sqr();
        GaussianForm {
            c0: log_c0.exp() * inv_sqrt_m22,
            a: x_plus,
            b: gamma / m22,
        }
    }

    /// Exact Fock amplitudes `n < fock_dim`, not renormalized.
    pub fn amplitudes(&self, fock_dim: usize) -> DVector<C64> {
        let g = self.gaussian_form();
        gaussian_amplitudes(g.c0, g.a, g.b, fock_dim)
    }

    /// `e^{i phase} e^{−i rotation a†a} S(squeeze) |gamma>`: rotation applied
    /// after the squeeze instead of jointly.
    pub fn product_order_amplitudes(&self, fock_dim: usize) -> DVector<C64> {
        let unrotated = SqueezedLabel {
            rotation: 0.0,
            ..*self
        };
        let mut amps = unrotated.amplitudes(fock_dim);
        for (n, c) in amps.iter_mut().enumerate() {
            *c *= C64::from_polar(1.0, -self.rotation * n as f64);
        }
        amps
    }
}

/// Solves `√(n+1) c_{n+1} = B c_n + A √n c_{n−1}` from `c_0`.
fn gaussian_amplitudes(c0: C64, a: C64, b: C64, fock_dim: usize) -> DVector<C64> {
    let mut out = DVector::zeros(fock_dim);
    out[0] = c0;
    if fock_dim > 1 {
        out[1] = b * c0;
    }
    for n in 1..fock_dim.saturating_sub(1) {
        let nf = n as f64;
        out[n + 1] = (b * out[n] + a * nf.sqrt() * out[n - 1]) / (nf + 1.0).sqrt();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Label {
    Coherent(CoherentLabel),
    Squeezed(SqueezedLabel),
}

impl Label {
    /// Exact amplitudes below the truncation (including the label phase) and
    /// the norm weight left above it.
    pub fn amplitudes(&self, fock_dim: usize) -> (DVector<C64>, f64) {
        match self {
            Label::Coherent(c) => {
                let amps = coherent_amplitudes(c.alpha, fock_dim) * C64::from_polar(1.0, c.phase);
                (amps, coherent_tail(c.alpha, fock_dim))
            }
            Label::Squeezed(s) => {
                let amps = s.amplitudes(fock_dim);
                let tail = (1.0 - amps.norm_squared()).max(0.0);
                (amps, tail)
            }
        }
    }

    /// Smallest truncation whose tail is below `tolerance`.
    pub fn required_dim(&self, tolerance: f64) -> Result<usize> {
        match self {
            Label::Coherent(c) => Ok(coherent_required_dim(c.alpha, tolerance)),
            Label::Squeezed(_) => {
                let mut dim = 8;
                while dim <= MAX_AUTO_DIM {
                    let (amps, tail) = self.amplitudes(dim);
                    let top: f64 = amps.iter().rev().take(4).map(|z| z.norm_sqr()).sum();
                    if tail < tolerance && top < tolerance {
                        // shrink back to the first level where the tail is met
                        let mut acc = 0.0;
                        for (n, z) in amps.iter().enumerate() {
                            acc += z.norm_sqr();
                            if 1.0 - acc < tolerance && n + 1 >= 2 {
                                return Ok((n + 1).max(2));
                            }
                        }
                        return Ok(dim);
                    }
                    dim *= 2;
                }
                Err(Error::TruncationInsufficient {
                    fock_dim: MAX_AUTO_DIM,
                    tail: self.amplitudes(MAX_AUTO_DIM).1,
                    required: 2 * MAX_AUTO_DIM,
                })
            }
        }
    }

    pub fn materialize(&self, fock_dim: usize) -> Result<CavityState> {
        let (amps, tail) = self.amplitudes(fock_dim);
        if tail >= LABEL_TAIL_TOLERANCE {
            return Err(Error::TruncationInsufficient {
                fock_dim,
                tail,
                required: self.required_dim(LABEL_TAIL_TOLERANCE)?,
            });
        }
        CavityState::from_unnormalized(amps, tail)
    }
}

/// One term `weight · |qubit> ⊗ |label>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub qubit: QubitBasis,
    pub weight: C64,
    pub label: Label,
}

/// Entangled qubit–cavity state as a list of branches.
///
/// `dropped_global_phase` documents any common phase factor omitted from the
/// branches; `records` holds named scalar by-products (Rabi frequency,
/// accumulated phases, pulse duration, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchDecomposition {
    pub branches: Vec<Branch>,
    pub dropped_global_phase: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub records: BTreeMap<String, f64>,
}

impl BranchDecomposition {
    /// Smallest truncation at which every label's tail is below
    /// [`LABEL_TAIL_TOLERANCE`].
    pub fn required_dim(&self) -> Result<usize> {
        let mut dim = 2;
        for b in &self.branches {
            dim = dim.max(b.label.required_dim(LABEL_TAIL_TOLERANCE)?);
        }
        Ok(dim)
    }

    /// Unnormalized joint amplitudes and the largest label tail.
    fn raw_amplitudes(&self, fock_dim: usize) -> (DVector<C64>, f64) {
        let mut amps = DVector::zeros(2 * fock_dim);
        let mut worst_tail = 0.0f64;
        for b in &self.branches {
            let (label_amps, tail) = b.label.amplitudes(fock_dim);
            worst_tail = worst_tail.max(tail);
            for (q, comp) in b.qubit.components().into_iter().enumerate() {
                if comp == ZERO {
                    continue;
                }
                let mut block = amps.rows_mut(q * fock_dim, fock_dim);
                block += &label_amps * (b.weight * comp);
            }
        }
        (amps, worst_tail)
    }

    /// Fock-space vector at `fock_dim`. Errors if a label does not fit or the
    /// branch weights do not describe a unit vector.
    pub fn materialize(&self, fock_dim: usize) -> Result<JointState> {
        let (amps, tail) = self.raw_amplitudes(fock_dim);
        if tail >= LABEL_TAIL_TOLERANCE {
            return Err(Error::TruncationInsufficient {
                fock_dim,
                tail,
                required: self.required_dim()?,
            });
        }
        let norm_sqr = amps.norm_squared();
        if (norm_sqr - 1.0).abs() > 1e-10 + 2.0 * tail {
            return Err(Error::NotNormalized(norm_sqr));
        }
        JointState::from_unnormalized(fock_dim, amps, tail)
    }

    pub fn materialize_auto(&self) -> Result<JointState> {
        self.materialize(self.required_dim()?)
    }

    /// All branches expressed on g/e, with ± branches split.
    pub fn in_charge_basis(&self) -> BranchDecomposition {
        let mut branches = Vec::new();
        for b in &self.branches {
            match b.qubit.as_charge() {
                Some(_) => branches.push(*b),
                None => {
                    for (q, comp) in [QubitBasis::G, QubitBasis::E]
                        .into_iter()
                        .zip(b.qubit.components())
                    {
                        branches.push(Branch {
                            qubit: q,
                            weight: b.weight * comp,
                            label: b.label,
                        });
                    }
                }
            }
        }
        BranchDecomposition {
            branches,
            dropped_global_phase: self.dropped_global_phase.clone(),
            records: self.records.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// Overlaps and cat normalization

/// `<x|y>` for phased coherent labels:
/// `e^{i(φy−φx)} exp(−|x|²/2 − |y|²/2 + x*y)`.
pub fn coherent_overlap(x: &CoherentLabel, y: &CoherentLabel) -> C64 {
    let gauss =
        (-0.5 * x.alpha.norm_sqr() - 0.5 * y.alpha.norm_sqr() + x.alpha.conj() * y.alpha).exp();
    gauss * C64::from_polar(1.0, y.phase - x.phase)
}

/// The two displaced amplitudes `α′e^{−iωt} ± κ(1 − e^{−iωt})` as usually
/// written for a real injected amplitude.
pub fn displaced_pair(alpha_prime: C64, kappa: C64, omega_t: f64) -> (C64, C64) {
    let rot = C64::from_polar(1.0, -omega_t);
    let shift = kappa * (ONE - rot);
    (alpha_prime * rot + shift, alpha_prime * rot - shift)
}

/// Specialized overlap of the [`displaced_pair`] states (first with second)
/// for real κ and real α′:
/// `exp{−4κ²[1 − cos ωt] − 2iκα′ sin ωt}`.
pub fn specialized_pair_overlap(kappa: f64, alpha_prime: f64, omega_t: f64) -> C64 {
    C64::new(
        -4.0 * kappa * kappa * (1.0 - omega_t.cos()),
        -2.0 * kappa * alpha_prime * omega_t.sin(),
    )
    .exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// `1/√(2 ± 2e^{−2|α|²})`, the constant making `N(|α> ± |−α>)` unit norm.
pub fn cat_normalization(alpha: C64, parity: Parity) -> Result<f64> {
    let overlap = (-2.0 * alpha.norm_sqr()).exp();
    let norm_sqr = 2.0 + parity.sign() * 2.0 * overlap;
    if parity == Parity::Odd && alpha.norm_sqr() < 1e-150 {
        return Err(Error::InvalidParameter {
            name: "alpha",
            reason: "odd cat state of a zero amplitude is the null vector".into(),
        });
    }
    Ok(norm_sqr.sqrt().recip())
}

/// `N(|α> ± |−α>)` in Fock space.
pub fn cat_state(alpha: C64, parity: Parity, fock_dim: usize) -> Result<CavityState> {
    let norm = cat_normalization(alpha, parity)?;
    let plus = coherent_amplitudes(alpha, fock_dim);
    let minus = coherent_amplitudes(-alpha, fock_dim);
    let tail = coherent_tail(alpha, fock_dim);
    if tail >= LABEL_TAIL_TOLERANCE {
        return Err(Error::TruncationInsufficient {
            fock_dim,
            tail,
            required: coherent_required_dim(alpha, LABEL_TAIL_TOLERANCE),
        });
    }
    let amps = (plus + minus * C64::from(parity.sign())) * C64::from(norm);
    CavityState::from_unnormalized(amps, tail)
}

// ---------------------------------------------------------------------------
// Evolutions

fn require_setting(p: &DeviceParams, n_g: f64, phi_c_ratio: f64, what: &str) -> Result<()> {
    if (p.n_g - n_g).abs() > SETTING_TOLERANCE
        || (p.phi_c_ratio - phi_c_ratio).abs() > SETTING_TOLERANCE
    {
        return Err(Error::Precondition(format!(
            "{what} requires n_g = {n_g} and phi_c_ratio = {phi_c_ratio}, got n_g = {} and phi_c_ratio = {}",
            p.n_g, p.phi_c_ratio
        )));
    }
    Ok(())
}

/// κ = ξ*E_J/ħω.
pub fn kappa(p: &DeviceParams, c: &Coupling) -> C64 {
    c.xi.conj() * p.josephson() / p.omega()
}

/// Complex Rabi frequency Ω = ξ*E_J/ħ, rad/s.
pub fn rabi_frequency_complex(p: &DeviceParams, c: &Coupling) -> C64 {
    c.xi.conj() * p.josephson()
}

/// Vacuum cavity, qubit in g, evolved for `tau` seconds at n_g = 1/2,
/// Φc = Φ0/2:
/// `½(|α> + |−α>)|g> + ½(|α> − |−α>)|e>`, α = κ(e^{−iωτ} − 1).
pub fn evolve_vacuum(p: &DeviceParams, c: &Coupling, tau: f64) -> Result<BranchDecomposition> {
    require_setting(p, 0.5, 0.5, "vacuum evolution")?;
    let omega = p.omega();
    let k = kappa(p, c);
    let alpha = k * (C64::from_polar(1.0, -omega * tau) - ONE);
    let rabi = rabi_frequency_complex(p, c);
    let global = -k.norm_sqr() * (omega * tau).sin() + rabi.norm_sqr() * tau / omega;

    let plus = Label::Coherent(CoherentLabel::new(alpha));
    let minus = Label::Coherent(CoherentLabel::new(-alpha));
    let half = C64::from(0.5);
    let branches = vec![
        Branch {
            qubit: QubitBasis::G,
            weight: half,
            label: plus,
        },
        Branch {
            qubit: QubitBasis::G,
            weight: half,
            label: minus,
        },
        Branch {
            qubit: QubitBasis::E,
            weight: half,
            label: plus,
        },
        Branch {
            qubit: QubitBasis::E,
            weight: -half,
            label: minus,
        },
    ];
    let mut records = BTreeMap::new();
    records.insert("rabi_frequency_re".into(), rabi.re);
    records.insert("rabi_frequency_im".into(), rabi.im);
    records.insert("alpha_re".into(), alpha.re);
    records.insert("alpha_im".into(), alpha.im);
    records.insert("global_phase".into(), global);
    Ok(BranchDecomposition {
        branches,
        dropped_global_phase: format!(
            "exp[-i|xi* E_J/(hbar omega)|^2 sin(omega tau) + i|xi|^2 E_J^2 tau/(hbar^2 omega)] = exp(i * {global:.17e})"
        ),
        records,
    })
}

/// Coherent input `|α′>|g>` evolved for `tau1` seconds at n_g = 1/2,
/// Φc = Φ0/2, worked out through [`disentangle`] on each σx sector:
/// `½(e^{iφ}|α+> + e^{−iφ}|α−>)|g> + ½(e^{iφ}|α+> − e^{−iφ}|α−>)|e>`.
///
/// The σx = ±1 sector displaces by `±α` of [`evolve_vacuum`], so
/// `α± = α′e^{−iωτ} ∓ κ(1 − e^{−iωτ})` and `φ = Im[κ*α′(e^{−iωτ} − 1)]`.
pub fn evolve_coherent(
    p: &DeviceParams,
    c: &Coupling,
    alpha_prime: C64,
    tau1: f64,
) -> Result<BranchDecomposition> {
    require_setting(p, 0.5, 0.5, "coherent-input evolution")?;
    let omega = p.omega();
    let rabi = rabi_frequency_complex(p, c);
    let sector = |s: f64| {
        // exp{−i[ω a†a + s(Ω* a + Ω a†)]τ}
        let f = disentangle(
            C64::from(tau1),
            -I * rabi.conj() * s,
            -I * omega,
            -I * rabi * s,
        );
        f.apply_to_coherent(alpha_prime)
    };
    let (alpha_plus, log_plus) = sector(1.0);
    let (alpha_minus, log_minus) = sector(-1.0);
    let global = 0.5 * (log_plus.im + log_minus.im);
    let phi = 0.5 * (log_plus.im - log_minus.im);

    let plus = Label::Coherent(CoherentLabel::with_phase(alpha_plus, phi));
    let minus = Label::Coherent(CoherentLabel::with_phase(alpha_minus, -phi));
    let half = C64::from(0.5);
    let branches = vec![
        Branch {
            qubit: QubitBasis::G,
            weight: half,
            label: plus,
        },
        Branch {
            qubit: QubitBasis::G,
            weight: half,
            label: minus,
        },
        Branch {
            qubit: QubitBasis::E,
            weight: half,
            label: plus,
        },
        Branch {
            qubit: QubitBasis::E,
            weight: -half,
            label: minus,
        },
    ];
    let k = kappa(p, c);
    let mut records = BTreeMap::new();
    records.insert("phi".into(), phi);
    records.insert("kappa_re".into(), k.re);
    records.insert("kappa_im".into(), k.im);
    records.insert("global_phase".into(), global);
    records.insert("rabi_frequency_re".into(), rabi.re);
    records.insert("rabi_frequency_im".into(), rabi.im);
    Ok(BranchDecomposition {
        branches,
        dropped_global_phase: format!(
            "exp[-i|kappa|^2 sin(omega tau1) + i|Omega|^2 tau1/omega] = exp(i * {global:.17e})"
        ),
        records,
    })
}

/// Qubit generator during the flux pulse (Φc = Φ0): E_zσz + E_Jσx.
fn pulse_unitary(p: &DeviceParams, duration: f64) -> [[C64; 2]; 2] {
    let ez = p.e_z();
    let ej = p.josephson();
    let e = (ez * ez + ej * ej).sqrt();
    let (c, s) = ((e * duration).cos(), (e * duration).sin());
    let (nz, nx) = (ez / e, ej / e);
    // cos(Et)·1 − i sin(Et)(nz σz + nx σx)
    [
        [C64::new(c, -s * nz), C64::new(0.0, -s * nx)],
        [C64::new(0.0, -s * nx), C64::new(c, s * nz)],
    ]
}

/// Duration ħπ/(4E_J) of the flux pulse, seconds.
pub fn pulse_duration(p: &DeviceParams) -> f64 {
    PI / (4.0 * p.josephson())
}

/// Flux pulse Φc = Φ0 held for ħπ/(4E_J): the field coupling vanishes
/// (sin π = 0) and the qubit turns under E_zσz + E_Jσx, which is
/// `exp(−iπσx/4)` at n_g = 1/2. The cavity rotates freely by ωt meanwhile;
/// that angle is kept in the labels and recorded as `cavity_free_rotation`.
pub fn flux_pi_pulse(state: &BranchDecomposition, p: &DeviceParams) -> Result<BranchDecomposition> {
    p.validate()?;
    let duration = pulse_duration(p);
    let u = pulse_unitary(p, duration);
    let free_rotation = p.omega() * duration;
    let rot = C64::from_polar(1.0, -free_rotation);

    let mut branches: Vec<Branch> = Vec::new();
    for b in &state.branches {
        let q = b.qubit.as_charge().ok_or_else(|| {
            Error::Precondition("flux pulse needs branches in the g/e basis".into())
        })?;
        let label = match b.label {
            Label::Coherent(cl) => Label::Coherent(CoherentLabel {
                alpha: cl.alpha * rot,
                phase: cl.phase,
            }),
            Label::Squeezed(_) => {
                return Err(Error::Precondition(
                    "flux pulse supports coherent branches only".into(),
                ))
            }
        };
        for out in [Qubit::G, Qubit::E] {
            let amp = u[out.index()][q.index()];
            if amp == ZERO {
                continue;
            }
            let weight = b.weight * amp;
            let qubit = QubitBasis::from(out);
            match branches
                .iter_mut()
                .find(|x| x.qubit == qubit && x.label == label)
            {
                Some(existing) => existing.weight += weight,
                None => branches.push(Branch {
                    qubit,
                    weight,
                    label,
                }),
            }
        }
    }
    branches.retain(|b| b.weight.norm() > 1e-15);

    let mut records = state.records.clone();
    records.insert("pulse_duration_s".into(), duration);
    records.insert(
        "cavity_free_rotation".into(),
        free_rotation
            + state
                .records
                .get("cavity_free_rotation")
                .copied()
                .unwrap_or(0.0),
    );
    Ok(BranchDecomposition {
        branches,
        dropped_global_phase: state.dropped_global_phase.clone(),
        records,
    })
}

/// `(1/√2)(|α−>|g> + |α+>|e>)`: each qubit state tagged by one displacement.
pub fn which_path_state(
    alpha_plus: CoherentLabel,
    alpha_minus: CoherentLabel,
) -> BranchDecomposition {
    let w = C64::from(FRAC_1_SQRT_2);
    BranchDecomposition {
        branches: vec![
            Branch {
                qubit: QubitBasis::G,
                weight: w,
                label: Label::Coherent(alpha_minus),
            },
            Branch {
                qubit: QubitBasis::E,
                weight: w,
                label: Label::Coherent(alpha_plus),
            },
        ],
        dropped_global_phase: "none".into(),
        records: BTreeMap::new(),
    }
}

/// θ = E_J(1 − |ξ|²/2): the σx energy of the second-order Hamiltonian, rad/s.
pub fn squeeze_theta(p: &DeviceParams, c: &Coupling) -> f64 {
    p.josephson() * (1.0 - 0.5 * c.xi.norm_sqr())
}

/// Squeezing parameter magnitude r = |ξ|²E_J t/ħ.
pub fn squeeze_magnitude(p: &DeviceParams, c: &Coupling, t: f64) -> f64 {
    c.xi.norm_sqr() * p.josephson() * t
}

/// Coherent input `|γ>|g>` under the second-order Hamiltonian at
/// n_g = 1/2, Φc = 0 for `t` seconds. On the σx = s sector the generator is
/// `(ω + s|ξ|²E_J)a†a − sθ + sE_J(ξ²a² + ξ*²a†²)/2`, giving the label
/// `squeeze = −isξ*²E_J t`, `rotation = (ω + s|ξ|²E_J)t`, `phase = sθt`.
pub fn squeezed_evolution(
    p: &DeviceParams,
    c: &Coupling,
    gamma: C64,
    t: f64,
) -> Result<BranchDecomposition> {
    require_setting(p, 0.5, 0.0, "squeezed evolution")?;
    let n_max = (gamma.norm() + 3.0).powi(2).ceil() as u32;
    c.validity_margin(n_max);
    let omega = p.omega();
    let e_j = p.josephson();
    let xi = c.xi;
    let theta = squeeze_theta(p, c);
    let label = |s: f64| {
        Label::Squeezed(SqueezedLabel {
            gamma,
            squeeze: -I * s * xi.conj() * xi.conj() * e_j * t,
            rotation: (omega + s * xi.norm_sqr() * e_j) * t,
            phase: s * theta * t,
        })
    };
    let (plus, minus) = (label(1.0), label(-1.0));
    let half = C64::from(0.5);
    let branches = vec![
        Branch {
            qubit: QubitBasis::G,
            weight: half,
            label: plus,
        },
        Branch {
            qubit: QubitBasis::G,
            weight: half,
            label: minus,
        },
        Branch {
            qubit: QubitBasis::E,
            weight: half,
            label: plus,
        },
        Branch {
            qubit: QubitBasis::E,
            weight: -half,
            label: minus,
        },
    ];
    let mut records = BTreeMap::new();
    records.insert("theta".into(), theta);
    records.insert("squeeze_magnitude".into(), squeeze_magnitude(p, c, t));
    Ok(BranchDecomposition {
        branches,
        dropped_global_phase: "none".into(),
        records,
    })
}

/// `exp[−i·rotation·a†a + (ζa†² − ζ*a²)/2]` on a truncated space, for
/// cross-checking label materialization.
pub fn quadratic_propagator(
    rotation: f64,
    squeeze: C64,
    fock_dim: usize,
) -> nalgebra::DMatrix<C64> {
    let a = annihilation(fock_dim);
    let adag = a.adjoint();
    let gen = number(fock_dim) * C64::new(0.0, -rotation)
        + (&adag * &adag * squeeze - &a * &a * squeeze.conj()) * C64::from(0.5);
    expm(&gen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{coherent_fock, fidelity, StateVector};
    use crate::model::CavityKind;

    fn device() -> DeviceParams {
        DeviceParams::rabi_sweep_point(1e-3, CavityKind::Full, 4.0)
    }

    #[test]
    fn pure_rotation_factors() {
        let f = disentangle(C64::new(0.3, 0.1), ZERO, C64::new(0.2, -0.7), ZERO);
        assert_eq!(f.f1, ZERO);
        assert_eq!(f.f3, ZERO);
        assert_eq!(f.f4, ZERO);
        assert!((f.f2 - C64::new(0.3, 0.1) * C64::new(0.2, -0.7)).norm() < 1e-16);
    }

    #[test]
    fn half_turn_factor() {
        let f = disentangle(C64::from(PI), ZERO, I, ONE);
        assert!((f.f1 - C64::new(0.0, 2.0)).norm() < 1e-14);
    }

    #[test]
    fn series_branch_continuity() {
        for k in 0..8 {
            let dir = C64::from_polar(1.0, k as f64 * PI / 4.0 + 0.1);
            for scale in [1.0 - 1e-9, 1.0 + 1e-9] {
                let z = dir * SERIES_SWITCH * scale;
                let (s1, s2) = (
                    ONE + z / 2.0 + z * z / 6.0,
                    C64::new(0.5, 0.0) + z / 6.0 + z * z / 24.0,
                );
                let (t1, t2) = phi_taylor(z);
                assert!((s1 - t1).norm() / t1.norm() < 1e-10);
                assert!((s2 - t2).norm() / t2.norm() < 1e-10);
            }
        }
    }

    #[test]
    fn taylor_and_closed_form_agree_at_unit_radius() {
        for k in 0..6 {
            let z = C64::from_polar(1.0, k as f64);
            let (t1, t2) = phi_taylor(z);
            let em1 = expm1(z);
            assert!((t1 - em1 / z).norm() < 1e-14);
            assert!((t2 - (em1 - z) / (z * z)).norm() < 1e-14);
        }
    }

    #[test]
    fn small_argument_limits() {
        let (b1, b3) = (C64::new(0.3, 0.2), C64::new(-0.1, 0.4));
        let theta = C64::new(0.7, 0.0);
        let f = disentangle(theta, b1, ZERO, b3);
        assert!((f.f1 - b3 * theta).norm() < 1e-15);
        assert!((f.f3 - b1 * theta).norm() < 1e-15);
        assert!((f.f4 - b1 * b3 * theta * theta / 2.0).norm() < 1e-15);
    }

    #[test]
    fn product_form_on_random_state_matches_exponential() {
        let (theta, b1, b2, b3) = (
            C64::new(0.4, -0.2),
            C64::new(0.3, 0.1),
            C64::new(-0.2, 0.45),
            C64::new(0.1, -0.35),
        );
        let n = 48;
        let a = annihilation(n);
        let gen = (&a * b1 + number(n) * b2 + a.adjoint() * b3) * theta;
        let direct = expm(&gen);
        let product = disentangle(theta, b1, b2, b3).product_operator(n);
        // low-lying block is exact up to truncation effects far away
        for i in 0..12 {
            for j in 0..12 {
                assert!((direct[(i, j)] - product[(i, j)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn vacuum_branches_at_special_times() {
        let p = device();
        let c = Coupling::from_xi(C64::new(0.02, 0.0));
        let w = p.omega();
        let at_zero = evolve_vacuum(&p, &c, 0.0).unwrap().materialize(8).unwrap();
        let g_vac = JointState::product(Qubit::G, &CavityState::vacuum(8).unwrap());
        assert!((fidelity(&at_zero, &g_vac).unwrap() - 1.0).abs() < 1e-14);

        let half = evolve_vacuum(&p, &c, PI / w).unwrap();
        let alpha = match half.branches[0].label {
            Label::Coherent(l) => l.alpha,
            _ => unreachable!(),
        };
        let expected = -2.0 * kappa(&p, &c);
        assert!((alpha - expected).norm() < 1e-12 * expected.norm());

        let full = evolve_vacuum(&p, &c, 2.0 * PI / w)
            .unwrap()
            .materialize(8)
            .unwrap();
        assert!((fidelity(&full, &g_vac).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vacuum_requires_preparation_setting() {
        let p = device().with_phi_c_ratio(0.0);
        let c = Coupling::from_xi(C64::new(0.02, 0.0));
        assert!(matches!(
            evolve_vacuum(&p, &c, 1e-12),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            evolve_coherent(&p, &c, ONE, 1e-12),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn coherent_injection_reduces_to_vacuum() {
        let p = device();
        let c = Coupling::from_xi(C64::new(0.1, 0.03));
        for k in 0..7 {
            let tau = k as f64 * 0.37 / p.omega();
            let a = evolve_vacuum(&p, &c, tau).unwrap();
            let b = evolve_coherent(&p, &c, ZERO, tau).unwrap();
            for (x, y) in a.branches.iter().zip(&b.branches) {
                assert_eq!(x.qubit, y.qubit);
                assert!((x.weight - y.weight).norm() < 1e-12);
                match (x.label, y.label) {
                    (Label::Coherent(l), Label::Coherent(m)) => {
                        assert!((l.alpha - m.alpha).norm() < 1e-12);
                        assert!((l.phase - m.phase).abs() < 1e-12);
                    }
                    _ => panic!("unexpected label kind"),
                }
            }
            let (ga, gb) = (a.records["global_phase"], b.records["global_phase"]);
            assert!((ga - gb).abs() < 1e-12);
        }
    }

    #[test]
    fn coherent_injection_full_revolution() {
        let p = device();
        let c = Coupling::from_xi(C64::new(0.1, 0.0));
        let ap = C64::new(1.3, -0.4);
        let out = evolve_coherent(&p, &c, ap, 2.0 * PI / p.omega()).unwrap();
        for b in &out.branches {
            if let Label::Coherent(l) = b.label {
                assert!((l.alpha - ap).norm() < 1e-12);
                assert!(l.phase.abs() < 1e-12);
            }
        }
        let joint = out.materialize_auto().unwrap();
        let prod = JointState::product(Qubit::G, &coherent_fock(ap, joint.fock_dim()).unwrap());
        assert!((fidelity(&joint, &prod).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn injection_amplitudes_and_phase_closed_form() {
        let p = device();
        let c = Coupling::from_xi(C64::new(0.2, -0.05));
        let ap = C64::new(0.8, 0.3);
        let wt = 1.1;
        let out = evolve_coherent(&p, &c, ap, wt / p.omega()).unwrap();
        let k = kappa(&p, &c);
        let rot = C64::from_polar(1.0, -wt);
        let expected_plus = ap * rot - k * (ONE - rot);
        let expected_phi = (k.conj() * ap * (rot - ONE)).im;
        match out.branches[0].label {
            Label::Coherent(l) => {
                assert!((l.alpha - expected_plus).norm() < 1e-12);
                assert!((l.phase - expected_phi).abs() < 1e-12);
            }
            _ => unreachable!(),
        }
        // the conventional pair lists the same two amplitudes, in the other order
        let (first, second) = displaced_pair(ap, k, wt);
        assert!((second - expected_plus).norm() < 1e-12);
        match out.branches[1].label {
            Label::Coherent(l) => assert!((l.alpha - first).norm() < 1e-12),
            _ => unreachable!(),
        }
    }

    #[test]
    fn overlap_basics() {
        let a = CoherentLabel::new(C64::new(0.9, -0.4));
        assert!((coherent_overlap(&a, &a) - ONE).norm() < 1e-15);
        let m = CoherentLabel::new(-a.alpha);
        let expected = (-2.0 * a.alpha.norm_sqr()).exp();
        assert!((coherent_overlap(&a, &m) - C64::from(expected)).norm() < 1e-15);
    }

    #[test]
    fn specialized_overlap_example() {
        let (k, ap, wt) = (0.5, 1.0, PI / 2.0);
        let (first, second) = displaced_pair(C64::from(ap), C64::from(k), wt);
        let general = coherent_overlap(&CoherentLabel::new(first), &CoherentLabel::new(second));
        assert!((general - specialized_pair_overlap(k, ap, wt)).norm() < 1e-12);
    }

    #[test]
    fn cat_normalization_values() {
        assert!((cat_normalization(ZERO, Parity::Even).unwrap() - 0.5).abs() < 1e-16);
        let vac_cat = cat_state(ZERO, Parity::Even, 6).unwrap();
        assert!((vac_cat.amplitudes()[0] - ONE).norm() < 1e-15);
        assert!(cat_normalization(ZERO, Parity::Odd).is_err());

        // norms by explicit Fock sums
        for (alpha, parity) in [(2.0, Parity::Even), (1.0, Parity::Odd)] {
            let alpha = C64::from(alpha);
            let n = 60;
            let raw = coherent_amplitudes(alpha, n)
                + coherent_amplitudes(-alpha, n) * C64::from(parity.sign());
            let expected = raw.norm().recip();
            assert!((cat_normalization(alpha, parity).unwrap() - expected).abs() < 1e-13);
            let state = cat_state(alpha, parity, n).unwrap();
            assert!((state.norm_sqr() - 1.0).abs() < 1e-10);
        }
        let even2 = cat_normalization(C64::from(2.0), Parity::Even).unwrap();
        assert!((even2 - (2.0 + 2.0 * (-8.0f64).exp()).sqrt().recip()).abs() < 1e-15);
        let odd1 = cat_normalization(ONE, Parity::Odd).unwrap();
        assert!((odd1 - (2.0 - 2.0 * (-2.0f64).exp()).sqrt().recip()).abs() < 1e-15);
    }

    #[test]
    fn cat_parity_structure() {
        for alpha in [C64::new(0.3, 0.2), C64::new(1.5, -0.5), C64::new(2.0, 0.0)] {
            let even = cat_state(alpha, Parity::Even, 64).unwrap();
            let odd = cat_state(alpha, Parity::Odd, 64).unwrap();
            for n in 0..64 {
                if n % 2 == 1 {
                    assert!(even.amplitudes()[n].norm() < 1e-10);
                } else {
                    assert!(odd.amplitudes()[n].norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn squeezed_label_matches_matrix_exponential() {
        let cases = [
            (ZERO, C64::new(0.3, -0.2), 0.0),
            (C64::new(0.7, 0.2), C64::new(-0.1, 0.4), 1.3),
            (C64::new(-0.5, 0.6), C64::new(0.2, 0.05), -2.4),
            (C64::new(0.4, 0.0), C64::new(0.0, 0.5), 0.2),
            (C64::new(0.4, -0.3), C64::new(0.0, 0.0), 5.0),
        ];
        let big = 120;
        for (gamma, zeta, rho) in cases {
            let label = SqueezedLabel {
                gamma,
                squeeze: zeta,
                rotation: rho,
                phase: 0.3,
            };
            let u = quadratic_propagator(rho, zeta, big);
            let input = coherent_amplitudes(gamma, big);
            let expected = u * input * C64::from_polar(1.0, 0.3);
            let got = label.amplitudes(big);
            for n in 0..40 {
                assert!(
                    (expected[n] - got[n]).norm() < 1e-11,
                    "case {gamma} {zeta} {rho}: n = {n} {} vs {}",
                    expected[n],
                    got[n]
                );
            }
        }
    }

    #[test]
    fn squeezed_label_branch_tracks_large_rotation() {
        // many full turns: phase must follow the continuous branch
        let gamma = C64::new(0.3, 0.1);
        let zeta = C64::new(0.05, 0.02);
        let big = 60;
        for rho in [7.0, 19.5, -13.2, 40.0] {
            let label = SqueezedLabel {
                gamma,
                squeeze: zeta,
                rotation: rho,
                phase: 0.0,
            };
            let expected = quadratic_propagator(rho, zeta, big) * coherent_amplitudes(gamma, big);
            let got = label.amplitudes(big);
            assert!(
                (expected.rows(0, 20) - got.rows(0, 20)).norm() < 1e-10,
                "rho = {rho}"
            );
        }
    }

    #[test]
    fn squeezed_vacuum_variance_without_rotation() {
        for r in [0.05, 0.1, 0.2, 0.5] {
            let label = Label::Squeezed(SqueezedLabel {
                gamma: ZERO,
                squeeze: C64::from_polar(r, 0.9),
                rotation: 0.0,
                phase: 0.0,
            });
            let state = label.materialize(96).unwrap();
            assert!((state.min_quadrature_variance() - 0.5 * (-2.0 * r).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn squeezed_evolution_at_zero_time() {
        let p = device().with_phi_c_ratio(0.0);
        let c = Coupling::from_xi(C64::new(0.3, 0.0));
        let gamma = C64::new(0.6, -0.2);
        let out = evolve_then_materialize(&p, &c, gamma, 0.0);
        let expected =
            JointState::product(Qubit::G, &coherent_fock(gamma, out.fock_dim()).unwrap());
        assert!((fidelity(&out, &expected).unwrap() - 1.0).abs() < 1e-13);
    }

    fn evolve_then_materialize(p: &DeviceParams, c: &Coupling, gamma: C64, t: f64) -> JointState {
        squeezed_evolution(p, c, gamma, t)
            .unwrap()
            .materialize_auto()
            .unwrap()
    }

    #[test]
    fn squeeze_label_magnitude() {
        let p = device().with_phi_c_ratio(0.0);
        let c = Coupling::from_xi(C64::new(0.2, 0.1));
        let t = 3.0 / p.omega();
        let out = squeezed_evolution(&p, &c, ZERO, t).unwrap();
        let r = squeeze_magnitude(&p, &c, t);
        for b in &out.branches {
            if let Label::Squeezed(s) = b.label {
                assert!((s.squeeze.norm() - r).abs() < 1e-15 * r.max(1.0));
            }
        }
    }

    #[test]
    fn pulse_twice_swaps_charge_states() {
        let p = device();
        let state = BranchDecomposition {
            branches: vec![Branch {
                qubit: QubitBasis::G,
                weight: ONE,
                label: Label::Coherent(CoherentLabel::new(C64::new(0.5, 0.0))),
            }],
            dropped_global_phase: "none".into(),
            records: BTreeMap::new(),
        };
        let twice = flux_pi_pulse(&flux_pi_pulse(&state, &p).unwrap(), &p).unwrap();
        assert_eq!(twice.branches.len(), 1);
        assert_eq!(twice.branches[0].qubit, QubitBasis::E);
        assert!((twice.branches[0].weight.norm() - 1.0).abs() < 1e-14);
        let turned = 2.0 * p.omega() * pulse_duration(&p);
        assert!((twice.records["cavity_free_rotation"] - turned).abs() < 1e-9 * turned);
    }

    #[test]
    fn pulse_rejects_sigma_x_basis() {
        let p = device();
        let state = BranchDecomposition {
            branches: vec![Branch {
                qubit: QubitBasis::Plus,
                weight: ONE,
                label: Label::Coherent(CoherentLabel::new(ZERO)),
            }],
            dropped_global_phase: "none".into(),
            records: BTreeMap::new(),
        };
        assert!(matches!(
            flux_pi_pulse(&state, &p),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn pulse_acts_as_quarter_turn_about_x() {
        // σx eigen-branches only pick up e^{∓iπ/4}
        let p = device();
        let c = Coupling::from_xi(C64::new(0.25, 0.0));
        let inj = evolve_coherent(&p, &c, C64::new(1.0, 0.0), 0.5 * PI / p.omega()).unwrap();
        let out = flux_pi_pulse(&inj, &p).unwrap();
        let rot = C64::from_polar(1.0, -p.omega() * pulse_duration(&p));
        let (x, y) = match (inj.branches[0].label, inj.branches[1].label) {
            (Label::Coherent(x), Label::Coherent(y)) => (x, y),
            _ => unreachable!(),
        };
        let weight_of = |q: QubitBasis, l: CoherentLabel| {
            let target = Label::Coherent(CoherentLabel {
                alpha: l.alpha * rot,
                phase: l.phase,
            });
            out.branches
                .iter()
                .filter(|b| b.qubit == q && b.label == target)
                .map(|b| b.weight)
                .sum::<C64>()
        };
        let em = C64::from_polar(1.0, -PI / 4.0);
        let ep = C64::from_polar(1.0, PI / 4.0);
        assert!((weight_of(QubitBasis::G, x) - em * 0.5).norm() < 1e-14);
        assert!((weight_of(QubitBasis::G, y) - ep * 0.5).norm() < 1e-14);
        assert!((weight_of(QubitBasis::E, x) - em * 0.5).norm() < 1e-14);
        assert!((weight_of(QubitBasis::E, y) + ep * 0.5).norm() < 1e-14);

        // the pulse cannot tag g and e with one displacement each
        let target = which_path_state(
            CoherentLabel {
                alpha: x.alpha * rot,
                phase: x.phase,
            },
            CoherentLabel {
                alpha: y.alpha * rot,
                phase: y.phase,
            },
        );
        let n = out
            .required_dim()
            .unwrap()
            .max(target.required_dim().unwrap());
        let f = fidelity(
            &out.materialize(n).unwrap(),
            &target.materialize(n).unwrap(),
        )
        .unwrap();
        assert!(f < 0.6, "fidelity {f}");
    }

    #[test]
    fn branch_json_shape() {
        let p = device();
        let c = Coupling::from_xi(C64::new(0.01, 0.0));
        let out = evolve_vacuum(&p, &c, 1e-12).unwrap();
        let v = serde_json::to_value(&out).unwrap();
        let b0 = &v["branches"][0];
        assert_eq!(b0["qubit"], "g");
        assert_eq!(b0["label"]["kind"], "coherent");
        assert!(b0["weight"].as_array().unwrap().len() == 2);
        assert!(b0["label"]["alpha"].as_array().unwrap().len() == 2);
        assert!(v["dropped_global_phase"].is_string());
        let back: BranchDecomposition = serde_json::from_value(v).unwrap();
        assert_eq!(back, out);
    }
}
