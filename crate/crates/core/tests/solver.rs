use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subinf_core::fields::infinity_laplacian;
use subinf_core::solver::{
    aux_solve, energy, g_delta, infinity_solve, minimize_k, strictify, uniqueness_gap, BoundaryData, Initialization,
    Side, SolveReport, SolverConfig,
};
use subinf_core::{GridDomain, GroupSpec, Integrand, ScalarField};

const F: Integrand = Integrand::SquaredNorm;

fn line(h: f64) -> Arc<GridDomain> {
    Arc::new(GridDomain::new_box(GroupSpec::Euclidean(1), &[0.0], &[1.0], h).unwrap())
}

fn heis(h: f64) -> Arc<GridDomain> {
    Arc::new(GridDomain::new_box(GroupSpec::Heisenberg, &[-1.0; 3], &[1.0; 3], h).unwrap())
}

fn boundary(d: &Arc<GridDomain>, g: impl FnMut(&[f64]) -> f64) -> BoundaryData {
    BoundaryData::from_fn(d.clone(), g).unwrap()
}

fn interior_error(u: &ScalarField, mut exact: impl FnMut(&[f64]) -> f64) -> f64 {
    let d = u.domain();
    d.interior_nodes()
        .iter()
        .map(|&i| (u.values()[i] - exact(&d.coords(i))).abs())
        .fold(0.0, f64::max)
}

fn zero_start(mut c: SolverConfig) -> SolverConfig {
    c.initialization = Initialization::Zero;
    c
}

fn assert_monotone_traces(r: &SolveReport) {
    for level in &r.levels {
        for w in level.energy.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1e-300), "k = {}: {} > {}", level.k, w[1], w[0]);
        }
    }
}

#[test]
fn energy_examples() {
    let d = line(0.125);
    let zero = ScalarField::constant(d.clone(), 0.0).unwrap();
    assert_eq!(energy(&zero, &F, 3, 0.0, Side::Lower).unwrap(), 0.0);

    let c = 0.7;
    let constant = ScalarField::constant(d.clone(), c).unwrap();
    for (k, eps) in [(1u32, 0.3f64), (2, 0.3), (5, 0.9)] {
        let want = -eps.powi(k as i32 - 1) * c * d.cell_volume() * d.interior_nodes().len() as f64;
        let got = energy(&constant, &F, k, eps, Side::Lower).unwrap();
        assert!((got - want).abs() <= 1e-14, "k {k}: {got} vs {want}");
        assert!((energy(&constant, &F, k, eps, Side::Upper).unwrap() + want).abs() <= 1e-14);
    }

    let h = 1.0 / 32.0;
    let x = ScalarField::from_fn(line(h), |p| p[0]).unwrap();
    assert!((energy(&x, &F, 1, 0.0, Side::Lower).unwrap() - 1.0).abs() <= 2.0 * h);
}

#[test]
fn energy_survives_large_exponents() {
    let d = line(0.125);
    let steep = ScalarField::from_fn(d.clone(), |p| 1e4 * p[0]).unwrap();
    assert_eq!(energy(&steep, &F, 256, 0.0, Side::Lower).unwrap(), f64::INFINITY);
    let mild = ScalarField::from_fn(d, |p| 2.0 * p[0]).unwrap();
    let e = energy(&mild, &F, 256, 0.0, Side::Lower).unwrap();
    assert!((e.ln() - 256.0 * 4f64.ln()).abs() <= 1e-9);
}

#[test]
fn minimize_k_recovers_linear_interpolant() {
    let d = line(1.0 / 32.0);
    let g = boundary(&d, |p| p[0]);
    for k in [2, 8, 64, 256] {
        let r = minimize_k(&g, &F, k, 0.0, Side::Lower, &zero_start(SolverConfig::default())).unwrap();
        assert!(r.converged, "k {k}");
        assert!(interior_error(&r.solution, |p| p[0]) <= 1e-6, "k {k}");
        assert_monotone_traces(&r);
    }
}

#[test]
fn constant_boundary_gives_constant_solution() {
    let d = heis(0.5);
    let g = boundary(&d, |_| -1.25);
    let r = minimize_k(&g, &F, 4, 0.0, Side::Lower, &SolverConfig::default()).unwrap();
    assert!(interior_error(&r.solution, |_| -1.25) <= 1e-12);
    // From zero the energy is flat to seventh order near the minimizer, so
    // the value error sits well above the residual.
    let r = minimize_k(&g, &F, 4, 0.0, Side::Lower, &zero_start(SolverConfig::default())).unwrap();
    assert!(r.converged);
    assert!(interior_error(&r.solution, |_| -1.25) <= 1e-6);
}

/// Golden-section coordinate descent on `energy` itself.
fn coordinate_descent(u: &mut ScalarField, k: u32, eps: f64, side: Side, sweeps: usize) {
    let d = u.domain().clone();
    let mut vals = u.values().to_vec();
    let eval = |v: &[f64]| energy(&ScalarField::from_values(d.clone(), v.to_vec()).unwrap(), &F, k, eps, side).unwrap();
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..sweeps {
        for &i in d.interior_nodes() {
            let (mut a, mut b) = (vals[i] - 1.0, vals[i] + 1.0);
            let mut probe = vals.clone();
            let at = |t: f64, probe: &mut Vec<f64>| {
                probe[i] = t;
                eval(probe)
            };
            while b - a > 1e-12 {
                let c = b - phi * (b - a);
                let e = a + phi * (b - a);
                if at(c, &mut probe) < at(e, &mut probe) {
                    b = e;
                } else {
                    a = c;
                }
            }
            vals[i] = 0.5 * (a + b);
        }
    }
    *u = ScalarField::from_values(d, vals).unwrap();
}

#[test]
fn minimize_k_matches_coordinate_descent_in_one_dimension() {
    let d = line(0.1);
    let g = boundary(&d, |p| p[0]);
    for (k, eps, side) in [(2, 0.0, Side::Lower), (2, 0.8, Side::Lower), (3, 0.8, Side::Upper)] {
        let r = minimize_k(&g, &F, k, eps, side, &zero_start(SolverConfig::default())).unwrap();
        let mut oracle = ScalarField::from_fn(d.clone(), |p| p[0]).unwrap();
        coordinate_descent(&mut oracle, k, eps, side, 400);
        let diff = uniqueness_gap(&r.solution, &oracle).unwrap();
        assert!(diff <= 1e-6, "k {k} eps {eps}: {diff}");
    }
}

#[test]
fn minimize_k_matches_coordinate_descent_on_heisenberg() {
    let d = heis(0.5);
    let g = boundary(&d, |p| p[0] * p[1] + 0.5 * p[2]);
    let r = minimize_k(&g, &F, 2, 0.0, Side::Lower, &zero_start(SolverConfig::default())).unwrap();
    let mut oracle = g.extension();
    coordinate_descent(&mut oracle, 2, 0.0, Side::Lower, 30);
    let diff = uniqueness_gap(&r.solution, &oracle).unwrap();
    assert!(diff <= 1e-5, "{diff}");
}

#[test]
fn heisenberg_linear_data_is_the_k2_minimizer() {
    let d = heis(0.25);
    let g = boundary(&d, |p| p[0]);
    let r = minimize_k(&g, &F, 2, 0.0, Side::Lower, &zero_start(SolverConfig::default())).unwrap();
    assert!(interior_error(&r.solution, |p| p[0]) <= 1e-5);
    // Random perturbations never lower the energy of the minimizer.
    let base = energy(&r.solution, &F, 2, 0.0, Side::Lower).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let mut v = r.solution.values().to_vec();
        for &i in d.interior_nodes() {
            v[i] += rng.random_range(-1e-2..1e-2);
        }
        let e = energy(&ScalarField::from_values(d.clone(), v).unwrap(), &F, 2, 0.0, Side::Lower).unwrap();
        assert!(e >= base);
    }
}

#[test]
fn infinity_solve_one_dimensional_amle() {
    let d = line(1.0 / 128.0);
    let g = boundary(&d, |p| p[0]);
    let r = infinity_solve(&g, &F, &SolverConfig::dyadic(256)).unwrap();
    assert!(interior_error(&r.solution, |p| p[0]) <= 1e-3);
    assert!(r.converged);
    assert_monotone_traces(&r);
}

#[test]
fn infinity_solve_keeps_linear_heisenberg_data() {
    let d = heis(0.25);
    let ell = |p: &[f64]| 0.5 + 2.0 * p[0] - p[1];
    let r = infinity_solve(&boundary(&d, ell), &F, &SolverConfig::default()).unwrap();
    assert!(interior_error(&r.solution, ell) <= 1e-8);
    assert!(infinity_laplacian(&r.solution).sup_norm() <= 1e-8);
}

fn aronsson_error(h: f64) -> f64 {
    let d = Arc::new(GridDomain::new_box(GroupSpec::Euclidean(2), &[1.0; 2], &[2.0; 2], h).unwrap());
    let exact = |p: &[f64]| p[0].powf(4.0 / 3.0) - p[1].powf(4.0 / 3.0);
    let mut config = SolverConfig::dyadic(256);
    config.cross_k_tolerance = 1e-9;
    let r = infinity_solve(&boundary(&d, exact), &F, &config).unwrap();
    assert!(r.levels.iter().all(|l| l.converged));
    interior_error(&r.solution, exact)
}

#[test]
fn infinity_solve_approaches_aronsson_function() {
    let errors: Vec<f64> = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0].into_iter().map(aronsson_error).collect();
    assert!(errors[1] < errors[0] && errors[2] < errors[1], "{errors:?}");
}

#[test]
fn aux_solve_small_eps_recovers_infinity_solve() {
    let d = line(1.0 / 128.0);
    let g = boundary(&d, |p| p[0]);
    let config = SolverConfig::default();
    let base = infinity_solve(&g, &F, &config).unwrap().solution;
    for eps in [1e-2, 1e-3] {
        for side in [Side::Lower, Side::Upper] {
            let r = aux_solve(&g, &F, eps, side, &config).unwrap();
            let diff = uniqueness_gap(&r.solution, &base).unwrap();
            assert!(diff <= 2.0 * config.cross_k_tolerance, "eps {eps} {side:?}: {diff}");
            assert!(interior_error(&r.solution, |p| p[0]) <= eps);
        }
    }
}

fn gaps_one_dimensional() -> Vec<f64> {
    let d = line(1.0 / 128.0);
    let g = boundary(&d, |_| 0.0);
    let config = SolverConfig::default();
    [0.2, 0.1, 0.05]
        .into_iter()
        .map(|eps| {
            let u = aux_solve(&g, &F, eps, Side::Lower, &config).unwrap().solution;
            let v = aux_solve(&g, &F, eps, Side::Upper, &config).unwrap().solution;
            let gap = uniqueness_gap(&u, &v).unwrap();
            assert_eq!(gap, uniqueness_gap(&v, &u).unwrap());
            for &i in d.interior_nodes() {
                assert!(u.values()[i] >= v.values()[i] - gap);
            }
            gap
        })
        .collect()
}

#[test]
fn uniqueness_gap_shrinks_with_eps() {
    let gaps = gaps_one_dimensional();
    assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "{gaps:?}");
}

#[test]
fn identical_fields_have_zero_gap() {
    let d = heis(0.5);
    let u = ScalarField::from_fn(d, |p| p[0] - p[2]).unwrap();
    assert_eq!(uniqueness_gap(&u, &u).unwrap(), 0.0);
}

#[test]
fn initialization_does_not_matter() {
    let d = line(1.0 / 64.0);
    let g = boundary(&d, |p| p[0]);
    let a = infinity_solve(&g, &F, &SolverConfig::default()).unwrap().solution;
    let b = infinity_solve(&g, &F, &zero_start(SolverConfig::default())).unwrap().solution;
    assert!(uniqueness_gap(&a, &b).unwrap() <= 1e-4);

    let d = heis(0.25);
    let g = boundary(&d, |p| p[0] + 0.25 * p[2]);
    let a = infinity_solve(&g, &F, &SolverConfig::default()).unwrap();
    let b = infinity_solve(&g, &F, &zero_start(SolverConfig::default())).unwrap();
    assert!(uniqueness_gap(&a.solution, &b.solution).unwrap() <= 1e-4);
    assert!(a.levels.iter().all(|l| l.converged));
    assert_monotone_traces(&a);
    assert_monotone_traces(&b);
}

#[test]
fn translating_data_translates_solutions() {
    let d = Arc::new(GridDomain::new_box(GroupSpec::Euclidean(2), &[0.0; 2], &[1.0; 2], 0.125).unwrap());
    let g = boundary(&d, |p| (3.0 * p[0]).sin() + p[1] * p[1]);
    let config = SolverConfig::dyadic(64);
    let u = infinity_solve(&g, &F, &config).unwrap().solution;
    let v = infinity_solve(&g.shifted(2.5), &F, &config).unwrap().solution;
    let w = u.map(|a| a + 2.5).unwrap();
    assert!(uniqueness_gap(&v, &w).unwrap() <= 1e-6);
}

#[test]
fn strictify_examples() {
    let d = line(0.125);
    let v = ScalarField::from_fn(d.clone(), |p| (6.0 * p[0]).sin()).unwrap();
    let tiny = strictify(&v, 1e-8, 0.1, 2.0).unwrap();
    assert!(uniqueness_gap(&tiny.field, &v).unwrap() <= 1e-7);

    let unit = ScalarField::from_fn(d.clone(), |p| 2.0 * p[0] - 1.0).unwrap();
    assert_eq!(unit.sup_norm(), 1.0);
    let s = strictify(&unit, 0.1, 1.0, 2.0).unwrap();
    assert_eq!(s.c0, 4.0);
    assert!((s.mu - 0.05).abs() <= 1e-15);

    assert!(strictify(&v, 0.0, 0.1, 2.0).is_err());
    assert!(strictify(&v, -1.0, 0.1, 2.0).is_err());
}

#[test]
fn strictify_zero_field_is_degenerate() {
    let d = line(0.25);
    let z = ScalarField::constant(d, 0.0).unwrap();
    let s = strictify(&z, 0.1, 0.1, 2.0).unwrap();
    assert!(s.degenerate);
    assert_eq!(s.field, z);
}

/// `|g_δ(t) - t|` maximized over `|t| ≤ r` by dense sampling.
fn transform_perturbation(delta: f64, r: f64) -> f64 {
    let c0 = 4.0 * r;
    (0..=2000)
        .map(|i| -r + 2.0 * r * i as f64 / 2000.0)
        .map(|t| (g_delta(t, delta, c0) - t).abs())
        .fold(0.0, f64::max)
}

#[test]
fn strictify_perturbation_is_near_delta() {
    let d = line(1.0 / 64.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let scale = rng.random_range(0.1..1.0);
        let phase = rng.random_range(0.0..6.0);
        let v = ScalarField::from_fn(d.clone(), |p| scale * (7.0 * p[0] + phase).sin()).unwrap();
        let delta = rng.random_range(0.01..0.3);
        let s = strictify(&v, delta, 0.1, 2.0).unwrap();
        assert!(s.perturbation <= 1.1 * delta);
        assert!(s.perturbation <= transform_perturbation(delta, v.sup_norm()) + 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn g_delta_is_increasing_and_concave(delta in 0.001f64..1.0, c0 in 0.1f64..10.0, a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let (s, t) = (a.min(b) * c0, a.max(b) * c0);
        prop_assume!(t - s > 1e-9);
        prop_assert!(g_delta(s, delta, c0) <= g_delta(t, delta, c0));
        let mid = 0.5 * (s + t);
        let chord = 0.5 * (g_delta(s, delta, c0) + g_delta(t, delta, c0));
        prop_assert!(g_delta(mid, delta, c0) >= chord - 1e-12 * c0);
    }

    #[test]
    fn config_validation_rejects_bad_tolerances(tol in -1.0f64..0.0) {
        let mut c = SolverConfig::default();
        c.descent.gradient_tolerance = tol;
        prop_assert!(c.validate().is_err());
    }
}

#[test]
fn short_schedules_are_rejected() {
    let g = boundary(&line(0.25), |p| p[0]);
    assert!(infinity_solve(&g, &F, &SolverConfig::dyadic(2)).is_err());
    assert!(aux_solve(&g, &F, 0.0, Side::Lower, &SolverConfig::default()).is_err());
}
