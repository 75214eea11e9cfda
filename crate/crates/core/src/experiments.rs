//! Rabi-frequency sweeps, timescale feasibility, and the analytic-versus-
//! numeric consistency harness.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    evolve_coherent, evolve_vacuum, flux_pi_pulse, pulse_duration, squeezed_evolution,
    BranchDecomposition,
};
use crate::error::{Error, Result};
use crate::hilbert::{coherent_fock, fidelity, JointState, Propagator, Qubit, TOP_LEVELS};
use crate::model::{coupling_xi, hamiltonian, CavityKind, Coupling, DeviceParams, Order};

/// Ratios E_ch/E_J of the standard sweep.
pub const SWEEP_RATIOS: [f64; 4] = [4.0, 7.0, 10.0, 15.0];
pub const SWEEP_KINDS: [CavityKind; 2] = [CavityKind::Full, CavityKind::Quarter];
pub const CSV_HEADER: &str = "lambda_m,cavity_kind,ratio,xi_abs,rabi_hz";

/// First truncation tried by the harness, and the largest it will go to.
pub const VERIFY_START_DIM: usize = 64;
pub const VERIFY_MAX_DIM: usize = 512;
/// Population allowed in the top levels of the brute-force state.
pub const VERIFY_TOP_TOLERANCE: f64 = 1e-10;

/// |Ω|/2π = |ξ|E_J/(2πħ), Hz.
pub fn rabi_frequency(p: &DeviceParams, c: &Coupling) -> f64 {
    c.xi_abs() * p.josephson() / (2.0 * PI)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda_m: f64,
    pub cavity_kind: CavityKind,
    pub ratio: f64,
    pub xi_abs: f64,
    pub rabi_hz: f64,
}

/// `points` log-spaced values over `[start, stop]`, endpoints exact.
pub fn log_grid(start: f64, stop: f64, points: usize) -> Result<Vec<f64>> {
    if points == 0 || !(start > 0.0 && stop > 0.0) {
        return Err(Error::InvalidParameter {
            name: "grid",
            reason: format!(
                "need positive bounds and at least one point, got [{start}, {stop}] x {points}"
            ),
        });
    }
    if points == 1 {
        return Ok(vec![start]);
    }
    let (a, b) = (start.ln(), stop.ln());
    let step = (b - a) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| match i {
            0 => start,
            i if i == points - 1 => stop,
            i => (a + step * i as f64).exp(),
        })
        .collect())
}

/// 200 log-spaced wavelengths over [0.1, 15] cm, in meters.
pub fn default_lambda_grid() -> Vec<f64> {
    log_grid(1e-3, 0.15, 200).expect("static grid")
}

/// Rabi frequency over (kind, ratio, λ) with the sweep device choices of
/// [`DeviceParams::rabi_sweep_point`]. Rows are ordered kind, then ratio,
/// then λ, matching the input order.
pub fn rabi_sweep(lambdas: &[f64], ratios: &[f64], kinds: &[CavityKind]) -> Result<Vec<SweepRow>> {
    if lambdas.is_empty() || ratios.is_empty() || kinds.is_empty() {
        return Err(Error::InvalidParameter {
            name: "grid",
            reason: "sweep grids must be nonempty".into(),
        });
    }
    let points: Vec<(CavityKind, f64, f64)> = kinds
        .iter()
        .flat_map(|&k| {
            ratios
                .iter()
                .flat_map(move |&r| lambdas.iter().map(move |&l| (k, r, l)))
        })
        .collect();
    points
        .par_iter()
        .map(|&(kind, ratio, lambda)| {
            let p = DeviceParams::rabi_sweep_point(lambda, kind, ratio);
            let c = coupling_xi(&p)?;
            Ok(SweepRow {
                lambda_m: lambda,
                cavity_kind: kind,
                ratio,
                xi_abs: c.xi_abs(),
                rabi_hz: rabi_frequency(&p, &c),
            })
        })
        .collect()
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(r.lambda_m),
            r.cavity_kind,
            fmt_f64(r.ratio),
            fmt_f64(r.xi_abs),
            fmt_f64(r.rabi_hz)
        )?;
    }
    Ok(())
}

/// Margin for "much shorter than": t_q must be below this fraction of T2.
pub const MUCH_SHORTER: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// Operation timescale 1/|Ω|, s.
    pub t_q: f64,
    /// Cavity lifetime Q/ω, s.
    pub t_d: f64,
    pub t1: f64,
    pub t2: f64,
    pub tau_m: f64,
    /// t_q < 0.1·T2.
    pub operation_within_dephasing: bool,
    /// τ_m < min(T2, t_d).
    pub readout_within_coherence: bool,
}

pub fn feasibility_report(
    p: &DeviceParams,
    t1: f64,
    t2: f64,
    tau_m: f64,
) -> Result<FeasibilityReport> {
    for (name, value) in [("t1", t1), ("t2", t2), ("tau_m", tau_m)] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::InvalidParameter {
                name,
                reason: format!("must be a positive time, got {value}"),
            });
        }
    }
    let q = p.q.ok_or(Error::InvalidParameter {
        name: "q",
        reason: "the cavity quality factor is required".into(),
    })?;
    let c = coupling_xi(p)?;
    let rabi = c.xi_abs() * p.josephson();
    if rabi <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "xi",
            reason: "coupling vanishes, so the operation time is infinite".into(),
        });
    }
    let t_q = 1.0 / rabi;
    let t_d = q / p.omega();
    Ok(FeasibilityReport {
        t_q,
        t_d,
        t1,
        t2,
        tau_m,
        operation_within_dephasing: t_q < MUCH_SHORTER * t2,
        readout_within_coherence: tau_m < t2.min(t_d),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyScenario {
    Vacuum,
    Coherent,
    Pulse,
    Squeeze,
}

impl VerifyScenario {
    pub const ALL: [VerifyScenario; 4] = [
        VerifyScenario::Vacuum,
        VerifyScenario::Coherent,
        VerifyScenario::Pulse,
        VerifyScenario::Squeeze,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub scenario: VerifyScenario,
    pub max_infidelity: f64,
    pub fock_dim: usize,
    pub points: usize,
    /// Largest top-level population of the brute-force states.
    pub max_top_population: f64,
}

/// `points` evenly spaced times over `[0, stop]`.
pub fn linear_grid(stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points)
            .map(|i| stop * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Default grid: 20 points over two cavity periods.
pub fn default_time_grid(p: &DeviceParams) -> Vec<f64> {
    linear_grid(4.0 * PI / p.omega(), 20)
}

struct Comparison {
    infidelity: f64,
    top: f64,
}

fn compare(analytic: &BranchDecomposition, numeric: &JointState) -> Result<Comparison> {
    let exact = analytic.materialize(numeric.fock_dim())?;
    Ok(Comparison {
        infidelity: (1.0 - fidelity(&exact, numeric)?).max(0.0),
        top: numeric.top_population(),
    })
}

fn run_once(
    p: &DeviceParams,
    c: &Coupling,
    scenario: VerifyScenario,
    tau_grid: &[f64],
    amplitude: C64,
    fock_dim: usize,
) -> Result<VerifyReport> {
    let setting = match scenario {
        VerifyScenario::Squeeze => p.clone().with_phi_c_ratio(0.0),
        _ => p.clone().with_phi_c_ratio(0.5),
    }
    .with_n_g(0.5);
    let order = match scenario {
        VerifyScenario::Squeeze => Order::Second,
        _ => Order::First,
    };
    let input = match scenario {
        VerifyScenario::Vacuum => crate::hilbert::CavityState::vacuum(fock_dim)?,
        _ => coherent_fock(amplitude, fock_dim)?,
    };
    let psi0 = JointState::product(Qubit::G, &input);
    let main = Propagator::new(&hamiltonian(&setting, c, order, fock_dim)?)?;
    let pulse = match scenario {
        VerifyScenario::Pulse => {
            let at_flux_quantum = setting.clone().with_phi_c_ratio(1.0);
            Some((
                Propagator::new(&hamiltonian(&at_flux_quantum, c, Order::First, fock_dim)?)?,
                pulse_duration(&setting),
            ))
        }
        _ => None,
    };

    let results: Vec<Comparison> = tau_grid
        .par_iter()
        .map(|&tau| {
            let numeric = main.apply(&psi0, tau)?;
            let analytic = match scenario {
                VerifyScenario::Vacuum => evolve_vacuum(&setting, c, tau)?,
                VerifyScenario::Coherent => evolve_coherent(&setting, c, amplitude, tau)?,
                VerifyScenario::Pulse => {
                    flux_pi_pulse(&evolve_coherent(&setting, c, amplitude, tau)?, &setting)?
                }
                VerifyScenario::Squeeze => squeezed_evolution(&setting, c, amplitude, tau)?,
            };
            let numeric = match &pulse {
                Some((u, t_p)) => u.apply(&numeric, *t_p)?,
                None => numeric,
            };
            compare(&analytic, &numeric)
        })
        .collect::<Result<_>>()?;

    Ok(VerifyReport {
        scenario,
        max_infidelity: results.iter().map(|r| r.infidelity).fold(0.0, f64::max),
        fock_dim,
        points: tau_grid.len(),
        max_top_population: results.iter().map(|r| r.top).fold(0.0, f64::max),
    })
}

/// Runs the closed form and brute-force propagation of `scenario` over
/// `tau_grid` (seconds) and reports the worst `1 − fidelity`.
///
/// The cavity starts in vacuum (`Vacuum`) or `|amplitude>` (others), qubit
/// in g. `Pulse` evolves for τ, then applies the flux pulse. With
/// `fock_dim = None` the truncation starts at 64 (or what the closed-form
/// labels need) and doubles while the top levels hold more than 1e-10.
pub fn verify_analytic_numeric(
    p: &DeviceParams,
    scenario: VerifyScenario,
    tau_grid: &[f64],
    amplitude: C64,
    fock_dim: Option<usize>,
) -> Result<VerifyReport> {
    if tau_grid.is_empty() {
        return Err(Error::InvalidParameter {
            name: "tau_grid",
            reason: "need at least one time".into(),
        });
    }
    let c = coupling_xi(p)?;
    if let Some(n) = fock_dim {
        return run_once(p, &c, scenario, tau_grid, amplitude, n);
    }
    let mut n = VERIFY_START_DIM.max(crate::hilbert::coherent_required_dim(amplitude, 1e-12));
    loop {
        let report = run_once(p, &c, scenario, tau_grid, amplitude, n)?;
        if report.max_top_population < VERIFY_TOP_TOLERANCE {
            return Ok(report);
        }
        if 2 * n > VERIFY_MAX_DIM {
            return Err(Error::TruncationInsufficient {
                fock_dim: n,
                tail: report.max_top_population,
                required: 2 * n,
            });
        }
        log::info!(
            "top {TOP_LEVELS} levels hold {:.2e} at N = {n}; doubling",
            report.max_top_population
        );
        n *= 2;
    }
}
