use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use qhj_core::classical::{solve_two_point, Mode};
use qhj_core::generating::{convert_type, extract_canonical_map, GaugeFunction, GeneratingType, QuadraticGeneratingFunction};
use qhj_core::heisenberg::heisenberg_for_potential;
use qhj_core::phase_space::{apply_linear_kernel, gauge_wigner_kernel, wigner_transform_strided, MapDirection};
use qhj_core::potential::integrate_trajectory_from;
use qhj_core::propagation::{apply_propagator, build_propagator, KernelSource};
use qhj_core::series::{closed_form_generating, evaluate_series, SeriesOptions};
use qhj_core::{integrate_trajectory, l2_distance, make_gaussian, Grid1D, PotentialSpec, WaveFunction};

fn quadratic_potential() -> impl Strategy<Value = PotentialSpec> {
    prop_oneof![
        (-2.0..2.0f64).prop_map(|a| PotentialSpec::ConstantForce { a }),
        (0.5..1.5f64).prop_map(|w| PotentialSpec::harmonic(w).unwrap()),
        (-0.5..0.5f64, -0.5..0.5f64, 0.1..0.8f64).prop_map(|(c0, c1, c2)| PotentialSpec::polynomial(vec![c0, c1, c2]).unwrap()),
    ]
}

fn packets(grid: Grid1D, hbar: f64, centres: &[(f64, f64, f64, f64)]) -> WaveFunction {
    let mut amps = vec![Complex64::new(0.0, 0.0); grid.len()];
    for &(q0, p0, w, phase) in centres {
        let g = make_gaussian(grid, q0, p0, w, hbar).unwrap();
        let c = Complex64::from_polar(1.0, phase);
        for (a, b) in amps.iter_mut().zip(g.amplitudes()) {
            *a += c * b;
        }
    }
    WaveFunction::new(grid, amps, hbar).unwrap().normalize().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_index_round_trip(lo in -50.0..0.0f64, span in 0.1..100.0f64, n in 2usize..2000) {
        let g = Grid1D::new(lo, lo + span, n).unwrap();
        for i in [0, n / 3, n / 2, n - 1] {
            let x = g.point(i);
            let want = if i + 1 == n { lo + span } else { lo + i as f64 * g.spacing() };
            prop_assert_eq!(x, want);
            prop_assert_eq!(g.index_of(x, 1e-9), Some(i));
        }
    }

    #[test]
    fn gaussian_is_normalized(q0 in -3.0..3.0f64, p0 in -3.0..3.0f64, w in 0.3..1.5f64, hbar in 0.2..2.0f64) {
        let g = Grid1D::symmetric(12.0, 1024).unwrap();
        let psi = make_gaussian(g, q0, p0, w, hbar).unwrap();
        prop_assert!((psi.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn l2_triangle_inequality(a in -2.0..2.0f64, b in -2.0..2.0f64, c in -2.0..2.0f64, p in -1.0..1.0f64) {
        let g = Grid1D::symmetric(10.0, 256).unwrap();
        let x = make_gaussian(g, a, p, 0.8, 1.0).unwrap();
        let y = make_gaussian(g, b, -p, 0.6, 1.0).unwrap();
        let z = make_gaussian(g, c, 0.0, 1.0, 1.0).unwrap();
        let (xy, yz, xz) = (l2_distance(&x, &y).unwrap(), l2_distance(&y, &z).unwrap(), l2_distance(&x, &z).unwrap());
        prop_assert!(xz <= xy + yz + 1e-12);
    }

    #[test]
    fn energy_is_conserved(q0 in -2.0..2.0f64, p0 in -2.0..2.0f64, c3 in -0.2..0.2f64) {
        let v = PotentialSpec::polynomial(vec![0.0, 0.0, 0.5, c3, 0.05]).unwrap();
        let tr = integrate_trajectory(&v, q0, p0, 2.0, 4000).unwrap();
        let e0 = tr.energy(&v, 0);
        for i in (0..tr.times.len()).step_by(500) {
            prop_assert!((tr.energy(&v, i) - e0).abs() < 1e-9);
        }
    }

    #[test]
    fn action_is_additive(q0 in -2.0..2.0f64, p0 in -2.0..2.0f64, t1 in 0.2..1.0f64) {
        let v = PotentialSpec::polynomial(vec![0.0, 0.3, 0.5, 0.1]).unwrap();
        let t2 = 1.5;
        let whole = integrate_trajectory(&v, q0, p0, t2, 6000).unwrap();
        let first = integrate_trajectory(&v, q0, p0, t1, 4000).unwrap();
        let second = integrate_trajectory_from(&v, first.final_q(), first.final_p(), t1, t2, 4000).unwrap();
        prop_assert!((first.action + second.action - whole.action).abs() < 1e-8);
    }

    #[test]
    fn free_action_is_symmetric(q in -3.0..3.0f64, big_q in -3.0..3.0f64, t in 0.2..2.0f64) {
        let v = PotentialSpec::Free;
        let a = solve_two_point(&v, big_q, q, t, 1e-12).unwrap();
        let b = solve_two_point(&v, q, big_q, t, 1e-12).unwrap();
        prop_assert!((a.S0 - b.S0).abs() < 1e-10);
        prop_assert!((a.d2S0_dq1dQ2 + 1.0 / t).abs() < 1e-6);
    }

    #[test]
    fn oscillator_mixed_partial(q in -2.0..2.0f64, big_q in -2.0..2.0f64, t in 0.2..2.8f64) {
        let v = PotentialSpec::harmonic(1.0).unwrap();
        let s = solve_two_point(&v, big_q, q, t, 1e-12).unwrap();
        prop_assert!((s.d2S0_dq1dQ2 + 1.0 / t.sin()).abs() < 1e-6);
    }

    #[test]
    fn conversion_round_trip(a in -2.0..2.0f64, b in 0.2..2.0f64, sign in prop::bool::ANY, g in -2.0..2.0f64,
                             lx in -1.0..1.0f64, ly in -1.0..1.0f64, hbar in 0.1..2.0f64) {
        let b = if sign { b } else { -b };
        let c = QuadraticGeneratingFunction::log_constant(hbar, Complex64::new(2.0 * PI * hbar / b.abs(), 0.0));
        let f1 = QuadraticGeneratingFunction::real(GeneratingType::F1, a, b, g, lx, ly, c, hbar);
        let f2 = convert_type(&f1, GeneratingType::F2).unwrap();
        let back = convert_type(&f2, GeneratingType::F1).unwrap();
        for (x, y) in [(f1.alpha, back.alpha), (f1.beta, back.beta), (f1.gamma, back.gamma), (f1.lin_x, back.lin_x),
                       (f1.lin_y, back.lin_y), (f1.constant, back.constant)] {
            prop_assert!((x - y).norm() < 1e-10, "{x} {y}");
        }
    }

    #[test]
    fn extracted_maps_are_symplectic(a in -3.0..3.0f64, b in 0.1..3.0f64, g in -3.0..3.0f64, lx in -1.0..1.0f64, ly in -1.0..1.0f64) {
        for tag in [GeneratingType::F1, GeneratingType::F2, GeneratingType::F3, GeneratingType::F4] {
            let f = QuadraticGeneratingFunction::real(tag, a, b, g, lx, ly, Complex64::new(0.0, 0.0), 1.0);
            let m = extract_canonical_map(&f).unwrap();
            prop_assert!((m.determinant() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn harmonic_maps_compose(t1 in 0.1..1.4f64, t2 in 0.1..1.4f64) {
        let v = PotentialSpec::harmonic(1.0).unwrap();
        let m = |t: f64| extract_canonical_map(&closed_form_generating(&v, GeneratingType::F1, t, 1.0).unwrap()).unwrap();
        // maps run from time t back to 0, so the later interval is applied first
        prop_assert!(m(t1).compose(&m(t2)).max_difference(&m(t1 + t2)) < 1e-9);
    }

    #[test]
    fn heisenberg_flow(v in quadratic_potential(), t1 in 0.1..1.0f64, t2 in 0.1..1.0f64) {
        let h = |t: f64| heisenberg_for_potential(&v, t, 1.0).unwrap().map;
        prop_assert!(h(t2).compose(&h(t1)).max_difference(&h(t1 + t2)) < 1e-9);
        let back = extract_canonical_map(&closed_form_generating(&v, GeneratingType::F1, t1, 1.0).unwrap()).unwrap();
        prop_assert!(back.inverse().max_difference(&h(t1)) < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn propagation_preserves_norm(v in quadratic_potential(), t in 0.6..1.2f64,
                                  c in prop::collection::vec((-1.5..1.5f64, -1.0..1.0f64, 0.6..1.0f64, 0.0..6.0f64), 1..4)) {
        let grid = Grid1D::symmetric(10.0, 512).unwrap();
        let psi = packets(grid, 1.0, &c);
        let f = closed_form_generating(&v, GeneratingType::F1, t, 1.0).unwrap();
        let k = build_propagator(KernelSource::Closed { f: &f, t }, &grid, &grid).unwrap();
        let out = apply_propagator(&k, &psi).unwrap();
        prop_assert!((out.norm() - 1.0).abs() < 1e-3, "{}", out.norm());
    }

    #[test]
    fn wigner_marginals(c in prop::collection::vec((-1.5..1.5f64, -1.0..1.0f64, 0.6..1.0f64, 0.0..6.0f64), 1..4)) {
        let grid = Grid1D::symmetric(9.0, 721).unwrap();
        let psi = packets(grid, 1.0, &c);
        let pgrid = Grid1D::symmetric(7.0, 281).unwrap();
        let w = wigner_transform_strided(&psi, 1, &pgrid).unwrap();
        prop_assert!(w.imag_residue < 1e-10);
        let mq = w.position_marginal();
        for (m, a) in mq.iter().zip(psi.amplitudes()) {
            prop_assert!((m - a.norm_sqr()).abs() < 1e-6);
        }
        let mp = w.momentum_marginal();
        for (j, p) in pgrid.points().enumerate().step_by(10) {
            prop_assert!((mp[j] - psi.momentum_amplitude(p).norm_sqr()).abs() < 1e-6);
        }
        prop_assert!((w.integral() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gauge_kernel_is_normalized(c1 in -1.0..1.0f64, c2 in -0.5..0.5f64, q in -1.0..1.0f64, p1 in -1.0..1.0f64) {
        let pgrid = Grid1D::symmetric(8.0, 256).unwrap();
        let g = GaugeFunction::Polynomial(vec![0.0, c1, c2]);
        let row = gauge_wigner_kernel(&g, p1, q, &pgrid, 1.0).unwrap();
        let total: Complex64 = row.values.iter().map(|k| k * pgrid.spacing()).sum();
        prop_assert!((total - 1.0).norm() < 1e-4, "{total}");
    }

    #[test]
    fn transformed_wigner_is_constant(v in quadratic_potential(), q0 in -1.0..1.0f64, p0 in -0.5..0.5f64) {
        let grid = Grid1D::symmetric(8.0, 512).unwrap();
        let pgrid = Grid1D::symmetric(6.0, 256).unwrap();
        let psi0 = make_gaussian(grid, q0, p0, 0.5f64.sqrt(), 1.0).unwrap();
        let mut pulled = Vec::new();
        for t in [0.4, 0.7] {
            let f = closed_form_generating(&v, GeneratingType::F1, t, 1.0).unwrap();
            let k = build_propagator(KernelSource::Closed { f: &f, t }, &grid, &grid).unwrap();
            let w = wigner_transform_strided(&apply_propagator(&k, &psi0).unwrap(), 2, &pgrid).unwrap();
            let back = extract_canonical_map(&f).unwrap();
            pulled.push(apply_linear_kernel(&back, &w, MapDirection::Forward).unwrap().0);
        }
        prop_assert!(pulled[0].max_difference(&pulled[1]).unwrap() < 1e-3);
    }

    #[test]
    fn series_matches_closed_form(v in quadratic_potential(), q in -1.5..1.5f64, big_q in -1.5..1.5f64, t in 0.3..1.2f64) {
        let hbar = 0.5;
        let s = evaluate_series(&v, Mode::Identity, q, big_q, t, hbar, None, &SeriesOptions::default()).unwrap();
        let f = closed_form_generating(&v, GeneratingType::F1, t, hbar).unwrap();
        prop_assert!((s.total(1) - f.eval(q, big_q)).norm() < 1e-6);
        let tiny = evaluate_series(&v, Mode::Identity, q, big_q, t, 1e-6, None, &SeriesOptions::default()).unwrap();
        prop_assert!((tiny.total(1) - tiny.constant - tiny.s0).norm() < 1e-5);
        prop_assert_eq!(tiny.total(0) - tiny.constant, Complex64::new(tiny.s0, 0.0));
    }
}
