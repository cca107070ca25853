use proptest::prelude::*;
use tentlab::bmo_dual::{duality_pairing, pairing_time_grid};
use tentlab::operator::{assemble, inner};
use tentlab::orlicz::luxemburg_norm_uniform;
use tentlab::square_maximal::{evaluate, Functional, FunctionalKind};
use tentlab::tent_atoms::atomic_decompose;
use tentlab::tent_field::{area_function, t2p_norm};
use tentlab::{CoefficientField, EllipticOperator, Func, Grid, OrliczFunction, TentField, TimeGrid, C64};

fn op16(eps: f64) -> EllipticOperator {
    let g = Grid::unit(1, 16).unwrap();
    assemble(g, CoefficientField::perturbed_identity(g, eps)).unwrap()
}

fn field(n: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n).prop_map(|v| v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
}

fn mean_zero(mut f: Vec<C64>) -> Vec<C64> {
    let m = f.iter().sum::<C64>() / f.len() as f64;
    f.iter_mut().for_each(|v| *v -= m);
    f
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn tent(values: Vec<C64>) -> TentField {
    let g = Grid::unit(1, 16).unwrap();
    let time = TimeGrid::standard(&g, 16).unwrap();
    TentField { grid: g, time, values }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn heat_semigroup_law(f in field(16), s in 1e-4..1e-2f64, t in 1e-4..1e-2f64, eps in 0.0..0.4f64) {
        let op = op16(eps);
        let a = op.apply(Func::Heat { s }, &op.apply(Func::Heat { s: t }, &f));
        let b = op.apply(Func::Heat { s: s + t }, &f);
        prop_assert!(max_diff(&a, &b) < 1e-9);
    }

    #[test]
    fn adjoint_identity(f in field(16), g in field(16), eps in 0.0..0.4f64) {
        let op = op16(eps);
        let grid = *op.grid();
        let lhs = inner(&grid, &op.matvec(&f), &g);
        let rhs = inner(&grid, &f, &op.adjoint().matvec(&g));
        prop_assert!((lhs - rhs).norm() <= 1e-9 * (1.0 + lhs.norm()));
    }

    #[test]
    fn luxemburg_is_homogeneous(v in prop::collection::vec(0.0..5.0f64, 1..40), c in 0.01..100.0f64, p in 0.3..2.0f64) {
        for w in [OrliczFunction::power(p), OrliczFunction::sqrt_log()] {
            let a = luxemburg_norm_uniform(&v, 0.1, &w).unwrap();
            let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
            let b = luxemburg_norm_uniform(&scaled, 0.1, &w).unwrap();
            prop_assert!((b - c * a).abs() <= 1e-9 * (c * a).max(1e-300));
        }
    }

    #[test]
    fn omega_inverse_round_trip(y in 1e-6..1e6f64, p in 0.3..2.0f64) {
        for w in [OrliczFunction::power(p), OrliczFunction::sqrt_log()] {
            let t = w.inverse(y, 1e-13).unwrap();
            prop_assert!((w.value(t) - y).abs() <= 1e-9 * y);
        }
    }

    #[test]
    fn area_function_grows_with_aperture(v in field(16 * 16)) {
        let f = tent(v);
        let a = area_function(&f, 0.5).unwrap();
        let b = area_function(&f, 1.0).unwrap();
        let c = area_function(&f, 3.0).unwrap();
        prop_assert!(a.iter().zip(&b).all(|(x, y)| x <= y));
        prop_assert!(b.iter().zip(&c).all(|(x, y)| x <= y));
    }

    #[test]
    fn t22_is_additive_on_disjoint_supports(v in field(16 * 16), cut in 1usize..255) {
        let mut lo = v.clone();
        let mut hi = v.clone();
        lo[cut..].iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        hi[..cut].iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        let total = t2p_norm(&tent(v), 2.0).unwrap().powi(2);
        let parts = t2p_norm(&tent(lo), 2.0).unwrap().powi(2) + t2p_norm(&tent(hi), 2.0).unwrap().powi(2);
        prop_assert!((total - parts).abs() <= 1e-10 * total.max(1e-300));
    }

    #[test]
    fn atomic_lambda_scales_by_powers_of_two(v in field(16 * 16), j in -3i32..4) {
        let f = tent(v);
        let w = OrliczFunction::power(0.8);
        let c = 2f64.powi(j);
        let a = atomic_decompose(&f, &w, 0.75).unwrap();
        let b = atomic_decompose(&f.scale(C64::new(c, 0.0)), &w, 0.75).unwrap();
        prop_assert!((b.lambda_value - c * a.lambda_value).abs() <= 1e-10 * c * a.lambda_value);
        prop_assert_eq!(a.atoms.len(), b.atoms.len());
    }

    #[test]
    fn functionals_are_absolutely_homogeneous(f in field(16), re in -3.0..3.0f64, im in -3.0..3.0f64) {
        let op = op16(0.2);
        let time = TimeGrid::standard(op.grid(), 16).unwrap();
        let c = C64::new(re, im);
        let cf: Vec<C64> = f.iter().map(|v| v * c).collect();
        for kind in [FunctionalKind::SL, FunctionalKind::GL, FunctionalKind::NH] {
            let a = evaluate(&op, &f, Functional::of(kind), &time).unwrap();
            let b = evaluate(&op, &cf, Functional::of(kind), &time).unwrap();
            prop_assert!(a.iter().zip(&b).all(|(x, y)| (y - c.norm() * x).abs() <= 1e-9 * (1.0 + c.norm() * x)));
        }
    }

    #[test]
    fn pairing_is_sesquilinear(f1 in field(16), f2 in field(16), g in field(16), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let op = EllipticOperator::identity(Grid::unit(1, 16).unwrap()).unwrap();
        let time = pairing_time_grid(&op, 200).unwrap();
        let (f1, f2, g) = (mean_zero(f1), mean_zero(f2), mean_zero(g));
        let mix: Vec<C64> = f1.iter().zip(&f2).map(|(x, y)| x * a + y * C64::new(0.0, b)).collect();
        let p1 = duality_pairing(&op, &f1, &g, 1, &time).unwrap().quadrature;
        let p2 = duality_pairing(&op, &f2, &g, 1, &time).unwrap().quadrature;
        let pm = duality_pairing(&op, &mix, &g, 1, &time).unwrap().quadrature;
        let expect = p1 * a + p2 * C64::new(0.0, b);
        prop_assert!((pm - expect).norm() <= 1e-9 * (1.0 + expect.norm()));
    }
}
