//! Reference values computed independently of the library code paths.

use std::f64::consts::{FRAC_2_PI, PI};

use cavity_cat::analytic::{cat_state, which_path_state, CoherentLabel, Parity};
use cavity_cat::experiments::{feasibility_report, rabi_frequency};
use cavity_cat::hilbert::{coherent_fock, fidelity, make_ladder_ops, wigner, CavityState, Qubit};
use cavity_cat::measurement::measure_qubit;
use cavity_cat::model::{coupling_xi, hamiltonian, CavityKind, Coupling, DeviceParams, Order};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

fn origin() -> Vec<C64> {
    vec![C64::new(0.0, 0.0)]
}

#[test]
fn wigner_at_origin() {
    let vac = CavityState::vacuum(8).unwrap();
    assert!((wigner(&vac, &origin())[0] - FRAC_2_PI).abs() < 1e-14);
    for alpha in [0.3, 1.0, 2.2] {
        let odd = cat_state(C64::new(alpha, 0.4), Parity::Odd, 80).unwrap();
        assert!((wigner(&odd, &origin())[0] + FRAC_2_PI).abs() < 1e-10);
    }
    let even = cat_state(C64::new(2.0, 0.0), Parity::Even, 80).unwrap();
    assert!((wigner(&even, &origin())[0] - FRAC_2_PI).abs() < 1e-10);
}

#[test]
fn wigner_of_coherent_state_is_gaussian() {
    let alpha = C64::new(0.8, -0.5);
    let state = coherent_fock(alpha, 60).unwrap();
    let points = [C64::new(0.0, 0.0), C64::new(0.8, -0.5), C64::new(-0.3, 1.1)];
    for (beta, w) in points.iter().zip(wigner(&state, &points)) {
        let expected = FRAC_2_PI * (-2.0 * (beta - alpha).norm_sqr()).exp();
        assert!((w - expected).abs() < 1e-12, "{beta}: {w} vs {expected}");
    }
}

#[test]
fn wigner_integrates_to_one() {
    let cat = cat_state(C64::new(1.5, 0.0), Parity::Odd, 60).unwrap();
    let (extent, points) = (5.0, 121);
    let step = 2.0 * extent / (points - 1) as f64;
    let grid: Vec<C64> = (0..points)
        .flat_map(|i| {
            (0..points).map(move |j| C64::new(-extent + i as f64 * step, -extent + j as f64 * step))
        })
        .collect();
    let total: f64 = wigner(&cat, &grid).iter().sum::<f64>() * step * step;
    assert!((total - 1.0).abs() < 1e-6, "{total}");
}

fn spectrum(h: &DMatrix<C64>) -> Vec<f64> {
    let mut e: Vec<f64> = h.clone().symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// The quadratic Hamiltonian with the opposite sign on every ξ² term.
fn flipped_second_order(p: &DeviceParams, xi: C64, n: usize) -> DMatrix<C64> {
    let (a, adag) = make_ladder_ops(n).unwrap();
    let (a, adag) = (a.into_matrix(), adag.into_matrix());
    let num = &adag * &a;
    let id = DMatrix::<C64>::identity(n, n);
    let (w, ej) = (p.omega(), p.josephson());
    let x2 = xi.norm_sqr();
    let squeeze = &a * &a * (xi * xi) + &adag * &adag * (xi.conj() * xi.conj());
    let qubit_part = &num * C64::from(-x2 * ej)
        - &id * C64::from(ej * (1.0 + 0.5 * x2))
        - squeeze * C64::from(0.5 * ej);
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    for q in 0..2 {
        h.view_mut((q * n, q * n), (n, n))
            .copy_from(&(&num * C64::from(w)));
    }
    h.view_mut((0, n), (n, n)).copy_from(&qubit_part);
    h.view_mut((n, 0), (n, n)).copy_from(&qubit_part);
    h
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    (ys[2].ln() - ys[0].ln()) / (xs[2].ln() - xs[0].ln())
}

#[test]
fn second_order_sign_by_convergence_rate() {
    let p = DeviceParams::rabi_sweep_point(1e-3, CavityKind::Full, 4.0).with_phi_c_ratio(0.0);
    // low-lying levels only: the top of a truncated space misrepresents x²
    let (n, keep) = (24, 16);
    let xis = [0.01, 0.02, 0.04];
    let mut ours = Vec::new();
    let mut flipped = Vec::new();
    for &x in &xis {
        let c = Coupling::from_xi(C64::new(x, 0.0));
        let exact = spectrum(hamiltonian(&p, &c, Order::Cosine, n).unwrap().matrix());
        let second = spectrum(hamiltonian(&p, &c, Order::Second, n).unwrap().matrix());
        let other = spectrum(&flipped_second_order(&p, c.xi, n));
        let dev = |s: &[f64]| {
            exact
                .iter()
                .zip(s)
                .take(keep)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        ours.push(dev(&second));
        flipped.push(dev(&other));
    }
    assert!((slope(&xis, &ours) - 4.0).abs() < 0.2, "{ours:?}");
    assert!((slope(&xis, &flipped) - 2.0).abs() < 0.2, "{flipped:?}");
}

#[test]
fn cavity_geometry_ratios() {
    let lambda = 2e-3;
    let rabi = |kind| {
        let p = DeviceParams::rabi_sweep_point(lambda, kind, 4.0);
        rabi_frequency(&p, &coupling_xi(&p).unwrap())
    };
    // V = (λ/4)³ raises |ξ| by 8; cos(π/4) takes √2/2 back
    let ratio = rabi(CavityKind::Quarter) / rabi(CavityKind::Full);
    assert!((ratio - 4.0 * 2f64.sqrt()).abs() < 1e-9);
    assert_eq!(rabi(CavityKind::Half), 0.0);

    // ω ∝ 1/λ, E_J ∝ ω and |ξ| ∝ √(ω/L³) ∝ λ^{-2}, so Rabi ∝ λ^{-3}
    let near = DeviceParams::rabi_sweep_point(1e-3, CavityKind::Full, 4.0);
    let far = DeviceParams::rabi_sweep_point(8e-3, CavityKind::Full, 4.0);
    let r = rabi_frequency(&near, &coupling_xi(&near).unwrap())
        / rabi_frequency(&far, &coupling_xi(&far).unwrap());
    assert!((r - 512.0).abs() < 1e-6);
}

#[test]
fn readout_feasibility_example() {
    let p = DeviceParams::rabi_sweep_point(1e-3, CavityKind::Full, 4.0).with_quality_factor(3e8);
    let r = feasibility_report(&p, 1e-6, 5e-9, 4e-9).unwrap();
    assert!(r.readout_within_coherence);
    // 1/|Ω| = 1/(2π·1.42 MHz) ≈ 112 ns, far above T2 = 5 ns
    assert!((r.t_q - 1.0 / (2.0 * PI * 1.4223e6)).abs() < 1e-10);
    assert!(!r.operation_within_dephasing);
}

#[test]
fn which_path_post_selection() {
    let plus = CoherentLabel::new(C64::new(0.9, 0.0));
    let minus = CoherentLabel::new(C64::new(-0.9, 0.0));
    let state = which_path_state(plus, minus);
    let g = measure_qubit(&state, Qubit::G).unwrap();
    let e = measure_qubit(&state, Qubit::E).unwrap();
    assert!((g.probability - 0.5).abs() < 1e-15 && (e.probability - 0.5).abs() < 1e-15);
    let n = g.post_state.fock_dim();
    assert!(
        (fidelity(&g.post_state, &coherent_fock(minus.alpha, n).unwrap()).unwrap() - 1.0).abs()
            < 1e-12
    );
}
