//! Device description, coupling constant and Hamiltonian builders.
//!
//! Inputs are SI (eV, m, m²); everything handed to the Hilbert-space layer is
//! converted to angular frequency with ħ = 1.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{annihilation, number, qubit_tensor, sigma_x, sigma_z, FockOperator, ONE};

/// Flux quantum h/2e (Wb).
pub const FLUX_QUANTUM: f64 = 2.067833848e-15;
/// Vacuum permittivity (F/m).
pub const EPSILON_0: f64 = 8.8541878128e-12;
/// Speed of light (m/s).
pub const SPEED_OF_LIGHT: f64 = 2.99792458e8;
/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054571817e-34;
/// Elementary charge (C), for eV ↔ J.
pub const ELEMENTARY_CHARGE: f64 = 1.602176634e-19;

/// Expansion-safety threshold for [`Coupling::validity_margin`].
pub const VALIDITY_WARNING: f64 = 0.1;

/// Converts an energy in eV to an angular frequency in rad/s.
pub fn ev_to_angular(energy_ev: f64) -> f64 {
    energy_ev * ELEMENTARY_CHARGE / HBAR
}

/// Converts an angular frequency in rad/s to eV.
pub fn angular_to_ev(omega: f64) -> f64 {
    omega * HBAR / ELEMENTARY_CHARGE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CavityKind {
    Full,
    Half,
    Quarter,
}

impl CavityKind {
    /// Cavity length in units of the wavelength.
    pub fn length_fraction(self) -> f64 {
        match self {
            CavityKind::Full => 1.0,
            CavityKind::Half => 0.5,
            CavityKind::Quarter => 0.25,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CavityKind::Full => "full",
            CavityKind::Half => "half",
            CavityKind::Quarter => "quarter",
        }
    }
}

impl std::fmt::Display for CavityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_half() -> f64 {
    0.5
}

fn default_area() -> f64 {
    100e-12
}

fn default_kind() -> CavityKind {
    CavityKind::Full
}

/// Physical knobs of the SQUID box and its cavity, in SI units.
///
/// The serde field names are the canonical configuration keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParams {
    /// Josephson energy, eV.
    pub e_j: f64,
    /// Single-electron charging energy e²/(C_g + 2C_J), eV.
    pub e_ch: f64,
    /// Dimensionless gate charge.
    #[serde(default = "default_half")]
    pub n_g: f64,
    /// Classical flux in units of the flux quantum.
    #[serde(default = "default_half")]
    pub phi_c_ratio: f64,
    /// Cavity wavelength, m.
    pub lambda: f64,
    #[serde(default = "default_kind")]
    pub cavity_kind: CavityKind,
    /// SQUID loop area, m².
    #[serde(default = "default_area")]
    pub squid_area: f64,
    /// Qubit position along the cavity axis, m. Defaults to the cavity middle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0: Option<f64>,
    /// Cavity quality factor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    /// Cavity angular frequency override, rad/s. Defaults to 2πc/λ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    /// Phase of ξ, radians.
    #[serde(default)]
    pub xi_phase: f64,
    /// Direct override of ξ as `[re, im]`, bypassing the geometry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<[f64; 2]>,
}

impl DeviceParams {
    /// Device with the wavelength-dependent choices of the Rabi sweep:
    /// ω = 2πc/λ, E_ch = ħω/4, E_J = E_ch/ratio, S = 100 μm², z0 = L/2.
    pub fn rabi_sweep_point(lambda: f64, cavity_kind: CavityKind, ratio: f64) -> DeviceParams {
        let omega = 2.0 * PI * SPEED_OF_LIGHT / lambda;
        let e_ch = angular_to_ev(omega / 4.0);
        DeviceParams {
            e_j: e_ch / ratio,
            e_ch,
            n_g: 0.5,
            phi_c_ratio: 0.5,
            lambda,
            cavity_kind,
            squid_area: default_area(),
            z0: None,
            q: None,
            omega: None,
            xi_phase: 0.0,
            xi: None,
        }
    }

    pub fn with_phi_c_ratio(mut self, ratio: f64) -> Self {
        self.phi_c_ratio = ratio;
        self
    }

    pub fn with_n_g(mut self, n_g: f64) -> Self {
        self.n_g = n_g;
        self
    }

    pub fn with_xi(mut self, xi: C64) -> Self {
        self.xi = Some([xi.re, xi.im]);
        self
    }

    pub fn with_quality_factor(mut self, q: f64) -> Self {
        self.q = Some(q);
        self
    }

    pub fn cavity_length(&self) -> f64 {
        self.lambda * self.cavity_kind.length_fraction()
    }

    /// Mode volume, modeled as L³.
    pub fn cavity_volume(&self) -> f64 {
        self.cavity_length().powi(3)
    }

    pub fn qubit_position(&self) -> f64 {
        self.z0.unwrap_or_else(|| 0.5 * self.cavity_length())
    }

    /// Cavity angular frequency, rad/s.
    pub fn omega(&self) -> f64 {
        self.omega
            .unwrap_or_else(|| 2.0 * PI * SPEED_OF_LIGHT / self.lambda)
    }

    /// E_J/ħ, rad/s.
    pub fn josephson(&self) -> f64 {
        ev_to_angular(self.e_j)
    }

    /// E_ch/ħ, rad/s.
    pub fn charging(&self) -> f64 {
        ev_to_angular(self.e_ch)
    }

    /// σz coefficient E_z = -2E_ch(1 - 2n_g), rad/s.
    pub fn e_z(&self) -> f64 {
        -2.0 * self.charging() * (1.0 - 2.0 * self.n_g)
    }

    /// Checks the type invariants. Returns soft warnings (e.g. leaving the
    /// charge regime) on success.
    pub fn validate(&self) -> Result<Vec<String>> {
        let positive = [
            ("e_j", self.e_j),
            ("e_ch", self.e_ch),
            ("lambda", self.lambda),
            ("squid_area", self.squid_area),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {value}"),
                });
            }
        }
        for (name, value) in [
            ("n_g", self.n_g),
            ("phi_c_ratio", self.phi_c_ratio),
            ("xi_phase", self.xi_phase),
        ] {
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite, got {value}"),
                });
            }
        }
        let length = self.cavity_length();
        if let Some(z0) = self.z0 {
            if !(0.0..=length).contains(&z0) {
                return Err(Error::InvalidParameter {
                    name: "z0",
                    reason: format!("must lie in [0, {length}] m, got {z0}"),
                });
            }
        }
        if let Some(q) = self.q {
            if !(q > 0.0 && q.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "q",
                    reason: format!("must be positive, got {q}"),
                });
            }
        }
        if let Some(omega) = self.omega {
            if !(omega > 0.0 && omega.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "omega",
                    reason: format!("must be positive, got {omega}"),
                });
            }
        }
        if let Some([re, im]) = self.xi {
            if !(re.is_finite() && im.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "xi",
                    reason: "must be finite".into(),
                });
            }
        }
        let mut warnings = Vec::new();
        if self.e_j >= self.e_ch {
            warnings.push(format!(
                "E_J = {} eV is not below E_ch = {} eV; outside the charge regime",
                self.e_j, self.e_ch
            ));
        }
        Ok(warnings)
    }
}

/// Quantum flux through the SQUID and its dimensionless form ξ = πη/Φ0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    /// |η|, Wb.
    pub eta_abs: f64,
    pub xi: C64,
}

impl Coupling {
    pub fn from_xi(xi: C64) -> Coupling {
        Coupling {
            eta_abs: xi.norm() * FLUX_QUANTUM / PI,
            xi,
        }
    }

    pub fn xi_abs(&self) -> f64 {
        self.xi.norm()
    }

    /// π|η|√(n_max + 1)/Φ0; the cosine expansion needs this ≪ 1.
    pub fn validity_margin(&self, n_max: u32) -> f64 {
        let margin = PI * self.eta_abs * f64::from(n_max + 1).sqrt() / FLUX_QUANTUM;
        if margin >= VALIDITY_WARNING {
            log::warn!(
                "expansion margin {margin:.3e} at n = {n_max} is not small; higher orders in ξ matter"
            );
        }
        margin
    }
}

/// Standing-wave estimate of the SQUID flux, with V = L³:
/// |η| = S √(ħω/(ε0 V c²)) |cos(k z0)|.
pub fn coupling_xi(p: &DeviceParams) -> Result<Coupling> {
    p.validate()?;
    if let Some([re, im]) = p.xi {
        return Ok(Coupling::from_xi(C64::new(re, im)));
    }
    let omega = p.omega();
    let field = (HBAR * omega / (EPSILON_0 * p.cavity_volume() * SPEED_OF_LIGHT.powi(2))).sqrt();
    let k = 2.0 * PI / p.lambda;
    let mut node = (k * p.qubit_position()).cos().abs();
    // cos(kz0) at a mode node evaluates to ~1e-16, not zero
    if node < 1e-12 {
        node = 0.0;
    }
    let eta_abs = p.squid_area * field * node;
    Ok(Coupling {
        eta_abs,
        xi: C64::from_polar(PI * eta_abs / FLUX_QUANTUM, p.xi_phase),
    })
}

/// Expansion order of the cos[π(Φc + ηa + η*a†)/Φ0] interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    /// Full operator cosine.
    Cosine,
    /// Linear in ξ.
    First,
    /// Quadratic in ξ; defined at Φc = 0, n_g = 1/2.
    Second,
}

/// Joint-space Hamiltonian (rad/s) for a cavity truncated at `fock_dim`.
///
/// - `Cosine`: ωa†a + E_zσz − E_J σx cos(πΦc/Φ0 + ξa + ξ*a†), operator cosine by
///   eigendecomposition of the hermitian argument.
/// - `First`: ωa†a + E_zσz − E_J cos(πΦc/Φ0) σx + E_J sin(πΦc/Φ0) σx(ξa + ξ*a†).
/// - `Second`: ωa†a + E_zσz − E_J σx [1 − (ξa + ξ*a†)²/2], normal ordered:
///   (ω + |ξ|²E_J σx) a†a − E_J(1 − |ξ|²/2) σx + E_J σx (ξ²a² + ξ*²a†²)/2.
pub fn hamiltonian(
    p: &DeviceParams,
    c: &Coupling,
    order: Order,
    fock_dim: usize,
) -> Result<FockOperator> {
    if fock_dim < 2 {
        return Err(Error::InvalidDimension(format!(
            "Fock truncation must be >= 2, got {fock_dim}"
        )));
    }
    p.validate()?;
    let omega = p.omega();
    let e_j = p.josephson();
    let flux_phase = PI * p.phi_c_ratio;
    let xi = c.xi;

    let a = annihilation(fock_dim);
    let adag = a.adjoint();
    let n_op = number(fock_dim);
    let id = DMatrix::<C64>::identity(fock_dim, fock_dim);
    let field_coupling = &a * xi + &adag * xi.conj();

    let mut h = qubit_tensor(&Matrix2::identity(), &(&n_op * C64::from(omega)))
        + qubit_tensor(&sigma_z(), &(&id * C64::from(p.e_z())));

    let sx = sigma_x();
    match order {
        Order::Cosine => {
            let argument = &id * C64::from(flux_phase) + &field_coupling;
            let cos_arg = hermitian_function(&argument, f64::cos);
            h += qubit_tensor(&sx, &(cos_arg * C64::from(-e_j)));
        }
        Order::First => {
            h += qubit_tensor(&sx, &(&id * C64::from(-e_j * flux_phase.cos())));
            h += qubit_tensor(&sx, &(&field_coupling * C64::from(e_j * flux_phase.sin())));
        }
        Order::Second => {
            if p.phi_c_ratio != 0.0 || p.n_g != 0.5 {
                return Err(Error::Precondition(format!(
                    "second-order Hamiltonian requires phi_c_ratio = 0 and n_g = 1/2, got {} and {}",
                    p.phi_c_ratio, p.n_g
                )));
            }
            let xi_sq = xi.norm_sqr();
            let squeeze = &a * &a * (xi * xi * 0.5) + &adag * &adag * (xi.conj() * xi.conj() * 0.5);
            let qubit_part = &n_op * C64::from(xi_sq * e_j)
                - &id * C64::from(e_j * (1.0 - 0.5 * xi_sq))
                + squeeze * C64::from(e_j);
            h += qubit_tensor(&sx, &qubit_part);
        }
    }
    FockOperator::hermitian(h).map_err(|err| match err {
        Error::NotHermitian { .. } => Error::Precondition(format!(
            "internal: assembled {order:?} Hamiltonian is not hermitian ({err})"
        )),
        other => other,
    })
}

/// `f(A)` for hermitian `A` via its eigendecomposition.
pub(crate) fn hermitian_function(matrix: &DMatrix<C64>, f: impl Fn(f64) -> f64) -> DMatrix<C64> {
    let eig = matrix.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, lambda) in eig.eigenvalues.iter().enumerate() {
        let fj = f(*lambda);
        scaled.column_mut(j).scale_mut(fj);
    }
    let out = scaled * v.adjoint();
    // symmetrize away rounding
    (&out + out.adjoint()) * (ONE * 0.5)
}
