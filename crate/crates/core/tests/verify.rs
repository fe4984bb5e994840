use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subinf_core::fields::SymMatrix;
use subinf_core::solver::{aux_solve, infinity_solve, strictify, BoundaryData, Side, SolverConfig};
use subinf_core::verify::{amle_check, comparison_check, subelliptic_check, viscosity_check, OperatorSpec};
use subinf_core::{Error, GridDomain, GroupSpec, Integrand, ScalarField};

const F: Integrand = Integrand::SquaredNorm;
const INF: OperatorSpec = OperatorSpec::InfinityLaplacian;

fn line(lo: f64, hi: f64, h: f64) -> Arc<GridDomain> {
    Arc::new(GridDomain::new_box(GroupSpec::Euclidean(1), &[lo], &[hi], h).unwrap())
}

fn shipped() -> Vec<OperatorSpec> {
    let mut ops = vec![INF];
    for f in [F, Integrand::power(1.5).unwrap(), Integrand::power(3.0).unwrap()] {
        ops.push(OperatorSpec::Aronsson(f));
        ops.push(OperatorSpec::AuxLower { integrand: f, eps: 0.1 });
        ops.push(OperatorSpec::AuxUpper { integrand: f, eps: 0.1 });
    }
    ops
}

#[test]
fn shipped_operators_are_degenerate_elliptic() {
    for spec in [GroupSpec::Euclidean(1), GroupSpec::Euclidean(3), GroupSpec::Heisenberg, GroupSpec::Grushin] {
        for op in shipped() {
            let r = subelliptic_check(&op, spec, 10_000, 7).unwrap();
            assert!(r.passed, "{op:?} on {spec}: {}", r.worst_violation);
            assert_eq!(r.samples, 10_000);
        }
    }
}

#[test]
fn sign_flipped_operator_fails() {
    let broken = |_: &[f64], p: &[f64], m: &SymMatrix| m.quadratic_form(p);
    let r = subelliptic_check(&broken, GroupSpec::Heisenberg, 1000, 1).unwrap();
    assert!(!r.passed);
    assert!(r.worst_violation > 0.0);
    assert!(subelliptic_check(&INF, GroupSpec::Heisenberg, 0, 1).is_err());
}

#[test]
fn operator_ids_parse() {
    assert_eq!(OperatorSpec::parse("infinity_laplacian", F).unwrap(), INF);
    assert_eq!(OperatorSpec::parse("aronsson", F).unwrap(), OperatorSpec::Aronsson(F));
    assert_eq!(
        OperatorSpec::parse("aux_upper:0.25", F).unwrap(),
        OperatorSpec::AuxUpper { integrand: F, eps: 0.25 }
    );
    for bad in ["laplacian", "aux_lower:", "aux_lower:-1", "aux_upper:nan"] {
        assert!(OperatorSpec::parse(bad, F).is_err(), "{bad}");
    }
}

#[test]
fn linear_field_has_no_violations() {
    let u = ScalarField::from_fn(line(0.0, 1.0, 1.0 / 16.0), |p| p[0]).unwrap();
    let r = viscosity_check(&u, &INF, 64, 3);
    assert!(r.tested_above > 0 && r.tested_below > 0);
    assert_eq!(r.worst_sub().0, 0.0);
    assert_eq!(r.worst_super().0, 0.0);
}

#[test]
fn kink_is_not_a_supersolution() {
    let d = line(-1.0, 1.0, 1.0 / 16.0);
    let u = ScalarField::from_fn(d.clone(), |p| p[0].abs()).unwrap();
    let r = viscosity_check(&u, &INF, 256, 5);
    let (v, at) = r.worst_super();
    assert!(v > 0.0);
    assert_eq!(at, d.nearest_node(&[0.0]));
    assert_eq!(r.worst_sub().0, 0.0);
    // The explicit quadratic 0.5x + x² touches |x| from below at 0.
    for (i, x) in [-2.0, -1.0, 1.0, 2.0].map(|o| o * d.h()).into_iter().enumerate() {
        assert!(0.5 * x + x * x <= x.abs(), "offset {i}");
    }
}

#[test]
fn converged_solution_is_a_viscosity_solution() {
    let h = 1.0 / 64.0;
    let d = line(0.0, 1.0, h);
    let g = BoundaryData::from_fn(d.clone(), |p| p[0]).unwrap();
    let u = infinity_solve(&g, &F, &SolverConfig::default()).unwrap().solution;
    let r = viscosity_check(&u, &INF, 64, 11);
    assert!(r.worst_sub().0 <= 10.0 * h * h);
    assert!(r.worst_super().0 <= 10.0 * h * h);
}

#[test]
fn negation_swaps_violation_columns() {
    let d = Arc::new(GridDomain::new_box(GroupSpec::Heisenberg, &[-1.0; 3], &[1.0; 3], 0.25).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let u = ScalarField::from_fn(d, |_| rng.random_range(-1.0..1.0)).unwrap();
    let a = viscosity_check(&u, &INF, 32, 9);
    let b = viscosity_check(&u.map(|v| -v).unwrap(), &INF, 32, 9);
    assert_eq!(a.sub_violation, b.super_violation);
    assert_eq!(a.super_violation, b.sub_violation);
    assert_eq!((a.tested_above, a.tested_below), (b.tested_below, b.tested_above));
}

#[test]
fn comparison_of_translates() {
    let d = Arc::new(GridDomain::new_box(GroupSpec::Euclidean(2), &[0.0; 2], &[1.0; 2], 0.125).unwrap());
    let u = ScalarField::from_fn(d.clone(), |p| (4.0 * p[0]).sin() * p[1]).unwrap();
    for c in [0.1, -3.0, 7.5] {
        let v = u.map(|a| a + c).unwrap();
        assert_eq!(comparison_check(&u, &v).unwrap(), 0.0);
    }
    let g = BoundaryData::from_field(&u);
    let s = infinity_solve(&g, &F, &SolverConfig::dyadic(32)).unwrap().solution;
    let shifted = s.map(|a| a + 0.1).unwrap();
    assert!(comparison_check(&s, &shifted).unwrap().abs() <= 1e-12);
}

#[test]
fn comparison_margin_matches_definition() {
    let d = line(0.0, 1.0, 0.125);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let u = ScalarField::from_fn(d.clone(), |_| rng.random_range(-1.0..1.0)).unwrap();
    let v = ScalarField::from_fn(d.clone(), |_| rng.random_range(-1.0..1.0)).unwrap();
    let diff: Vec<f64> = u.values().iter().zip(v.values()).map(|(a, b)| a - b).collect();
    let boundary = d.boundary_nodes().iter().map(|&i| diff[i]).fold(f64::NEG_INFINITY, f64::max);
    let interior = d.interior_nodes().iter().map(|&i| diff[i]).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(comparison_check(&u, &v).unwrap(), boundary - interior);
}

#[test]
fn comparison_rejects_mismatched_domains() {
    let u = ScalarField::constant(line(0.0, 1.0, 0.125), 0.0).unwrap();
    let v = ScalarField::constant(line(0.0, 1.0, 0.25), 0.0).unwrap();
    assert!(matches!(comparison_check(&u, &v), Err(Error::DomainMismatch)));
}

#[test]
fn strictified_upper_solution_dominates_lower() {
    let d = line(0.0, 1.0, 1.0 / 64.0);
    let g = BoundaryData::from_fn(d, |p| p[0]).unwrap();
    let config = SolverConfig::default();
    let lower = aux_solve(&g, &F, 0.1, Side::Lower, &config).unwrap().solution;
    let upper = aux_solve(&g, &F, 0.1, Side::Upper, &config).unwrap().solution;
    let w = strictify(&upper, 0.05, 0.1, 2.0).unwrap().field;
    assert!(comparison_check(&lower, &w).unwrap() >= -1e-6);
}

#[test]
fn linear_fields_are_amle() {
    let config = SolverConfig::default();
    let d = line(0.0, 1.0, 1.0 / 32.0);
    let u = ScalarField::from_fn(d, |p| 0.5 - 2.0 * p[0]).unwrap();
    let r = amle_check(&u, &F, 20, &config, 1).unwrap();
    assert!(r.tested > 0);
    assert!((r.worst_ratio - 1.0).abs() <= 1e-6, "{}", r.worst_ratio);

    let h = Arc::new(GridDomain::new_box(GroupSpec::Heisenberg, &[-1.0; 3], &[1.0; 3], 0.25).unwrap());
    let u = ScalarField::from_fn(h, |p| p[0] - 0.5 * p[1]).unwrap();
    let r = amle_check(&u, &F, 6, &config, 2).unwrap();
    assert!(r.tested > 0);
    assert!((r.worst_ratio - 1.0).abs() <= 1e-6, "{}", r.worst_ratio);
}

#[test]
fn bumped_field_fails_amle() {
    let d = line(0.0, 1.0, 1.0 / 32.0);
    let u = ScalarField::from_fn(d, |p| p[0] + 0.3 * (std::f64::consts::PI * p[0]).sin()).unwrap();
    let r = amle_check(&u, &F, 20, &SolverConfig::default(), 3).unwrap();
    assert!(r.worst_ratio > 1.1, "{}", r.worst_ratio);
    assert!(r.worst_box.is_some());
}

#[test]
fn tiny_boxes_are_skipped() {
    let d = line(0.0, 1.0, 0.25);
    let u = ScalarField::from_fn(d, |p| p[0]).unwrap();
    let r = amle_check(&u, &F, 10, &SolverConfig::default(), 0).unwrap();
    assert_eq!(r.tested + r.skipped, 10);
    assert!(r.skipped > 0);
}
