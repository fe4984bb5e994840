use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subinf_core::fields::{adjoint_divergence, aronsson_residual, horizontal_gradient, horizontal_hessian, infinity_laplacian};
use subinf_core::{GridDomain, GroupSpec, HorizontalField, Integrand, NodeKind, ScalarField};

fn grid(spec: GroupSpec, lo: f64, hi: f64, h: f64) -> Arc<GridDomain> {
    let n = spec.total_dim();
    Arc::new(GridDomain::new_box(spec, &vec![lo; n], &vec![hi; n], h).unwrap())
}

fn heis(h: f64) -> Arc<GridDomain> {
    grid(GroupSpec::Heisenberg, -1.0, 1.0, h)
}

fn field(d: &Arc<GridDomain>, f: impl FnMut(&[f64]) -> f64) -> ScalarField {
    ScalarField::from_fn(d.clone(), f).unwrap()
}

fn sup_interior(d: &GridDomain, mut f: impl FnMut(usize) -> f64) -> f64 {
    d.interior_nodes().iter().map(|&i| f(i).abs()).fold(0.0, f64::max)
}

#[test]
fn gradient_of_x_on_heisenberg() {
    let d = heis(0.25);
    let g = horizontal_gradient(&field(&d, |x| x[0]));
    for &i in d.interior_nodes() {
        assert!((g.at(i)[0] - 1.0).abs() <= 1e-12 && g.at(i)[1].abs() <= 1e-12);
    }
}

#[test]
fn gradient_of_t_on_heisenberg() {
    let d = heis(0.25);
    let g = horizontal_gradient(&field(&d, |x| x[2]));
    for &i in d.interior_nodes() {
        let x = d.coords(i);
        assert!((g.at(i)[0] + 2.0 * x[1]).abs() <= 1e-12);
        assert!((g.at(i)[1] - 2.0 * x[0]).abs() <= 1e-12);
    }
}

#[test]
fn gradient_of_square_in_one_dimension() {
    let d = grid(GroupSpec::Euclidean(1), 0.0, 1.0, 0.1);
    let g = horizontal_gradient(&field(&d, |x| x[0] * x[0]));
    assert!(sup_interior(&d, |i| g.at(i)[0] - 2.0 * d.coords(i)[0]) <= 1e-12);
}

#[test]
fn hessian_of_t_vanishes() {
    let d = heis(0.25);
    let hs = horizontal_hessian(&field(&d, |x| x[2]));
    for &i in d.interior_nodes() {
        assert!(hs.matrix(i).max_abs() <= 1e-10);
    }
}

#[test]
fn hessian_of_mixed_quadratic() {
    let d = grid(GroupSpec::Euclidean(2), 0.0, 1.0, 0.125);
    let hs = horizontal_hessian(&field(&d, |x| x[0] * x[0] + 3.0 * x[0] * x[1]));
    for &i in d.interior_nodes() {
        let m = hs.matrix(i);
        assert!((m.get(0, 0) - 2.0).abs() <= 1e-10);
        // ∂²(3xy)/∂x∂y = 3.
        assert!((m.get(0, 1) - 3.0).abs() <= 1e-10);
        assert!((m.get(1, 0) - 3.0).abs() <= 1e-10);
        assert!(m.get(1, 1).abs() <= 1e-10);
    }
}

#[test]
fn linear_fields_have_zero_hessian() {
    let d = grid(GroupSpec::Euclidean(3), 0.0, 1.0, 0.25);
    let hs = horizontal_hessian(&field(&d, |x| 2.0 * x[0] - x[1] + 0.5 * x[2] + 4.0));
    for &i in d.interior_nodes() {
        assert!(hs.matrix(i).max_abs() <= 1e-12);
    }
}

#[test]
fn infinity_laplacian_examples() {
    let e2 = grid(GroupSpec::Euclidean(2), 0.0, 1.0, 0.125);
    let lap = infinity_laplacian(&field(&e2, |x| 3.0 * x[0] - 2.0 * x[1]));
    assert!(lap.sup_norm() <= 1e-12);

    let h = heis(1.0 / 16.0);
    for u in [field(&h, |x| x[0]), field(&h, |x| x[1]), field(&h, |x| x[2])] {
        assert!(infinity_laplacian(&u).sup_norm() <= 1e-10);
    }

    let e1 = grid(GroupSpec::Euclidean(1), 0.0, 1.0, 1.0 / 32.0);
    let lap = infinity_laplacian(&field(&e1, |x| x[0] * x[0]));
    let err = sup_interior(&e1, |i| lap.values()[i] + 8.0 * d2(&e1, i));
    assert!(err <= 1e-10, "err {err}");
}

fn d2(d: &GridDomain, i: usize) -> f64 {
    let x = d.coords(i)[0];
    x * x
}

#[test]
fn aronsson_residual_of_squared_norm_is_four_laplacians() {
    let d = heis(0.25);
    let u = field(&d, |x| x[0] * x[1] + x[2] * x[2] - 0.5 * x[0]);
    let a = aronsson_residual(&u, &Integrand::SquaredNorm);
    let l = infinity_laplacian(&u);
    assert!(a.singular.is_empty());
    for i in d.active_nodes() {
        assert!((a.residual.values()[i] - 4.0 * l.values()[i]).abs() <= 1e-12 * (1.0 + l.values()[i].abs()));
    }
}

#[test]
fn aronsson_residual_of_linear_field_vanishes() {
    let d = grid(GroupSpec::Euclidean(2), 0.0, 1.0, 0.125);
    let a = aronsson_residual(&field(&d, |x| x[0] + 2.0 * x[1]), &Integrand::SquaredNorm);
    assert!(a.residual.sup_norm() <= 1e-12);
}

#[test]
fn power_integrand_flags_flat_nodes() {
    let d = grid(GroupSpec::Euclidean(2), 0.0, 1.0, 0.25);
    let a = aronsson_residual(&ScalarField::constant(d.clone(), 1.0).unwrap(), &Integrand::power(1.5).unwrap());
    assert_eq!(a.singular.len(), d.interior_nodes().len());
    assert_eq!(a.residual.sup_norm(), 0.0);
}

fn aronsson_function(x: &[f64]) -> f64 {
    x[0].powf(4.0 / 3.0) - x[1].powf(4.0 / 3.0)
}

#[test]
fn aronsson_function_residual_shrinks_under_refinement() {
    let mut prev = f64::INFINITY;
    for h in [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
        let d = grid(GroupSpec::Euclidean(2), 1.0, 2.0, h);
        let r = aronsson_residual(&field(&d, aronsson_function), &Integrand::SquaredNorm).residual.sup_norm();
        assert!(r < prev, "h {h}: {r} !< {prev}");
        prev = r;
    }
}

fn zero_on_boundary(d: &Arc<GridDomain>, rng: &mut ChaCha8Rng) -> ScalarField {
    let values = (0..d.len())
        .map(|i| if d.kind(i) == NodeKind::Interior { rng.random_range(-1.0..1.0) } else { 0.0 })
        .collect();
    ScalarField::from_values(d.clone(), values).unwrap()
}

fn random_horizontal(d: &Arc<GridDomain>, rng: &mut ChaCha8Rng) -> HorizontalField {
    let m = d.spec().horizontal_dim();
    let values = (0..m * d.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    HorizontalField::from_values(d.clone(), values).unwrap()
}

fn adjoint_defect(d: &Arc<GridDomain>, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let u = zero_on_boundary(d, &mut rng);
        let f = random_horizontal(d, &mut rng);
        let lhs: f64 = horizontal_gradient(&u).values().iter().zip(f.values()).map(|(a, b)| a * b).sum();
        let rhs: f64 = u.values().iter().zip(adjoint_divergence(&f).values()).map(|(a, b)| a * b).sum();
        worst = worst.max((lhs - rhs).abs());
    }
    worst
}

#[test]
fn summation_by_parts() {
    for (d, seed) in [
        (grid(GroupSpec::Euclidean(2), 0.0, 1.0, 0.1), 1),
        (heis(0.25), 2),
        (grid(GroupSpec::Grushin, -1.0, 1.0, 0.125), 3),
    ] {
        let defect = adjoint_defect(&d, seed);
        assert!(defect <= 1e-12, "{}: {defect}", d.spec());
    }
}

#[test]
fn adjoint_of_zero_is_zero() {
    let d = heis(0.5);
    assert_eq!(adjoint_divergence(&HorizontalField::zeros(d)).sup_norm(), 0.0);
}

fn smooth(x: &[f64]) -> f64 {
    (1.3 * x[0]).sin() * (0.7 * x[1]).cos() + 0.4 * (x[2] * 1.1).sin()
}

/// Error of `Xu` and `(D²u)*` against closed forms on H¹.
fn derivative_errors(h: f64) -> (f64, f64) {
    let d = heis(h);
    let u = field(&d, smooth);
    let g = horizontal_gradient(&u);
    let hs = horizontal_hessian(&u);
    let (mut eg, mut eh): (f64, f64) = (0.0, 0.0);
    for &i in d.interior_nodes() {
        let p = d.coords(i);
        let (x, y, t) = (p[0], p[1], p[2]);
        let (a, b, c) = (1.3, 0.7, 1.1);
        let ux = a * (a * x).cos() * (b * y).cos();
        let uy = -b * (a * x).sin() * (b * y).sin();
        let ut = 0.4 * c * (c * t).cos();
        let uxx = -a * a * (a * x).sin() * (b * y).cos();
        let uyy = -b * b * (a * x).sin() * (b * y).cos();
        let uxy = -a * b * (a * x).cos() * (b * y).sin();
        let utt = -0.4 * c * c * (c * t).sin();
        // X = ∂x - 2y∂t, Y = ∂y + 2x∂t.
        let xu = ux - 2.0 * y * ut;
        let yu = uy + 2.0 * x * ut;
        // u has no mixed x-t or y-t terms.
        let xxu = uxx + 4.0 * y * y * utt;
        let yyu = uyy + 4.0 * x * x * utt;
        // XYu - YXu = 4u_t cancels in the symmetrization.
        let xyu = uxy - 4.0 * x * y * utt;
        eg = eg.max((g.at(i)[0] - xu).abs()).max((g.at(i)[1] - yu).abs());
        let m = hs.matrix(i);
        eh = eh.max((m.get(0, 0) - xxu).abs()).max((m.get(1, 1) - yyu).abs()).max((m.get(0, 1) - xyu).abs());
    }
    (eg, eh)
}

#[test]
fn derivatives_converge_under_refinement() {
    let (g1, h1) = derivative_errors(0.125);
    let (g2, h2) = derivative_errors(0.0625);
    let (g3, h3) = derivative_errors(0.03125);
    assert!(g1 / g2 >= 3.0 && g2 / g3 >= 3.0, "gradient {g1} {g2} {g3}");
    assert!(h1 / h2 >= 3.0 && h2 / h3 >= 3.0, "hessian {h1} {h2} {h3}");
}

fn vec2() -> impl Strategy<Value = [f64; 2]> {
    prop::array::uniform2(-3.0f64..3.0)
}

proptest! {
    #[test]
    fn integrand_homogeneity(p in vec2(), lambda in 0.01f64..10.0, alpha in 1.0f64..4.0) {
        for f in [Integrand::SquaredNorm, Integrand::power(alpha).unwrap()] {
            let scaled = [lambda * p[0], lambda * p[1]];
            let a = f.value(&scaled);
            let b = lambda.powf(f.degree()) * f.value(&p);
            prop_assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-300));
        }
    }

    #[test]
    fn integrand_positive_off_origin(p in vec2()) {
        prop_assume!(p != [0.0, 0.0]);
        prop_assert!(Integrand::SquaredNorm.value(&p) > 0.0);
        prop_assert!(Integrand::power(1.5).unwrap().value(&p) > 0.0);
    }

    #[test]
    fn convexity_inequality(p in vec2(), q in vec2(), k in prop::sample::select(vec![1u32, 2, 3, 4, 8])) {
        prop_assert!(Integrand::SquaredNorm.monotonicity_gap(&p, &q, k) >= 0.0);
    }

    #[test]
    fn stencils_exact_on_quadratics(c in prop::array::uniform6(-2.0f64..2.0)) {
        let d = grid(GroupSpec::Euclidean(2), 0.0, 1.0, 0.125);
        let u = field(&d, |x| c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[0] * x[0] + c[4] * x[0] * x[1] + c[5] * x[1] * x[1]);
        let g = horizontal_gradient(&u);
        let hs = horizontal_hessian(&u);
        for &i in d.interior_nodes() {
            let x = d.coords(i);
            prop_assert!((g.at(i)[0] - (c[1] + 2.0 * c[3] * x[0] + c[4] * x[1])).abs() <= 1e-11);
            prop_assert!((g.at(i)[1] - (c[2] + c[4] * x[0] + 2.0 * c[5] * x[1])).abs() <= 1e-11);
            let m = hs.matrix(i);
            prop_assert!((m.get(0, 0) - 2.0 * c[3]).abs() <= 1e-9);
            prop_assert!((m.get(0, 1) - c[4]).abs() <= 1e-9);
            prop_assert!((m.get(1, 1) - 2.0 * c[5]).abs() <= 1e-9);
        }
    }
}

#[test]
fn convexity_inequality_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for k in [1, 2, 4] {
        for _ in 0..1000 {
            let p = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let q = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            assert!(Integrand::SquaredNorm.monotonicity_gap(&p, &q, k) >= 0.0);
        }
    }
}

/// For `f = |p|²` and symmetric pairs `q = -p` the gap is exactly
/// `8 |p|^{2k}`, so the lower envelope scales like `|p - q|^{2k}`.
#[test]
fn symmetric_pairs_realize_the_exponent() {
    for k in [1u32, 2, 4] {
        for r in [0.05, 0.2, 0.5] {
            let p = [r * 0.6, r * 0.8];
            let q = [-p[0], -p[1]];
            let gap = Integrand::SquaredNorm.monotonicity_gap(&p, &q, k);
            let want = 8.0 * r.powi(2 * k as i32);
            assert!((gap - want).abs() <= 1e-12 * want);
        }
    }
}
