use super::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

fn rand_field(n: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn fft_nd(grid: &Grid, data: &mut [C64], inverse: bool) {
    let n = grid.n;
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    if grid.dim == 1 {
        fft.process(data);
    } else {
        for row in data.chunks_mut(n) {
            fft.process(row);
        }
        let mut col = vec![C64::new(0.0, 0.0); n];
        for i1 in 0..n {
            for i0 in 0..n {
                col[i0] = data[i0 * n + i1];
            }
            fft.process(&mut col);
            for i0 in 0..n {
                data[i0 * n + i1] = col[i0];
            }
        }
    }
    if inverse {
        let s = 1.0 / grid.cells() as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }
}

/// Apply a Fourier multiplier given on angles θ ∈ [0, 2π)^n.
fn fft_apply(grid: &Grid, f: &[C64], symbol: impl Fn([f64; 2]) -> C64) -> Vec<C64> {
    let mut d = f.to_vec();
    fft_nd(grid, &mut d, false);
    for (i, v) in d.iter_mut().enumerate() {
        let k = grid.coords(i);
        let th = [2.0 * std::f64::consts::PI * k[0] as f64 / grid.n as f64, 2.0 * std::f64::consts::PI * k[1] as f64 / grid.n as f64];
        *v *= symbol(th);
    }
    fft_nd(grid, &mut d, true);
    d
}

/// μ(θ) = Σ_ab conj(g_a) A_ab g_b with g_b = (e^{iθ_b} − 1)/h.
fn constant_symbol(grid: &Grid, a: &Block, th: [f64; 2]) -> C64 {
    let h = grid.h();
    let g: Vec<C64> = (0..grid.dim).map(|b| (C64::new(0.0, th[b]).exp() - 1.0) / h).collect();
    let mut s = C64::new(0.0, 0.0);
    for ai in 0..grid.dim {
        for bi in 0..grid.dim {
            s += g[ai].conj() * a[ai][bi] * g[bi];
        }
    }
    s
}

fn skew_block() -> Block {
    [[C64::new(1.0, 0.0), C64::new(0.1, 0.3)], [C64::new(0.1, 0.0), C64::new(1.2, 0.0)]]
}

#[test]
fn laplacian_spectrum_matches_closed_form() {
    let g = Grid::unit(1, 16).unwrap();
    let op = EllipticOperator::identity(g).unwrap();
    assert!(op.is_hermitian() && op.is_spectral());
    let mut got: Vec<f64> = op.eigenvalues().unwrap().iter().map(|m| m.re).collect();
    got.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = g.h();
    let mut want: Vec<f64> = (0..16).map(|k| 4.0 / (h * h) * (std::f64::consts::PI * k as f64 / 16.0).sin().powi(2)).collect();
    want.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() < 1e-10 * want[15]);
    }
    assert_eq!(got[0], 0.0);
}

#[test]
fn constant_coefficient_functions_match_fft() {
    for (dim, n, a) in [(1usize, 32usize, None), (2, 8, None), (2, 8, Some(skew_block()))] {
        let g = Grid::unit(dim, n).unwrap();
        let coeff = match a {
            Some(b) => CoefficientField::constant(g, b),
            None => CoefficientField::identity(g),
        };
        let blk = coeff.cells[0];
        let op = assemble(g, coeff).unwrap();
        let f = rand_field(g.cells(), 7);
        let funcs = [
            Func::Heat { s: 0.003 },
            Func::HeatPower { t: 0.05, k: 2 },
            Func::Resolvent { t: 0.01 },
            Func::PoissonPower { t: 0.1, k: 0 },
            Func::PoissonPower { t: 0.1, k: 1 },
            Func::OneMinusHeat { s: 0.01, m: 2 },
            Func::OneMinusResolvent { s: 0.01, m: 3 },
        ];
        for func in funcs {
            let want = fft_apply(&g, &f, |th| func.scalar(if th == [0.0, 0.0] { C64::new(0.0, 0.0) } else { constant_symbol(&g, &blk, th) }));
            let got = op.apply(func, &f);
            assert!(max_diff(&got, &want) < 1e-9, "{dim} {n} {func:?}: {}", max_diff(&got, &want));
        }
        let (f0, _) = op.project_kernel(&f);
        let want = fft_apply(&g, &f0, |th| if th == [0.0, 0.0] { C64::new(0.0, 0.0) } else { constant_symbol(&g, &blk, th).powf(-0.3) });
        let got = op.frac_neg_power(0.3, &f0, KernelPolicy::Reject).unwrap();
        assert!(max_diff(&got, &want) < 1e-9);
    }
}

#[test]
fn heat_preserves_constants_and_obeys_semigroup_law() {
    let g = Grid::unit(1, 32).unwrap();
    let op = assemble(g, CoefficientField::perturbed_identity(g, 0.3)).unwrap();
    let one = vec![C64::new(2.0, -1.0); 32];
    assert!(max_diff(&op.heat_apply(0.01, &one).unwrap(), &one) < 1e-10);
    assert!(max_diff(&op.resolvent_apply(0.01, &one).unwrap(), &one) < 1e-10);
    assert!(max_diff(&op.poisson_apply(0.1, &one).unwrap(), &one) < 1e-10);
    assert!(op.heat_power_apply(0.1, 1, &one).unwrap().iter().all(|v| v.norm() < 1e-10));
    let f = rand_field(32, 1);
    let ab = op.heat_apply(0.004, &op.heat_apply(0.002, &f).unwrap()).unwrap();
    let direct = op.heat_apply(0.006, &f).unwrap();
    assert!(max_diff(&ab, &direct) < 1e-10);
    let tiny = op.heat_apply(1e-9 * g.h() * g.h(), &f).unwrap();
    assert!(max_diff(&tiny, &f) < 1e-6);
}

#[test]
fn adjoint_duality_holds() {
    let g = Grid::unit(2, 8).unwrap();
    let op = assemble(g, CoefficientField::perturbed_identity(g, 0.3)).unwrap();
    assert!(!op.is_hermitian());
    let adj = op.adjoint();
    let (f, gg) = (rand_field(64, 2), rand_field(64, 3));
    for func in [Func::Heat { s: 0.01 }, Func::Resolvent { t: 0.02 }, Func::HeatPower { t: 0.1, k: 1 }] {
        let lhs = inner(&g, &op.apply(func, &f), &gg);
        let rhs = inner(&g, &f, &adj.apply(func, &gg));
        assert!((lhs - rhs).norm() < 1e-10 * (1.0 + lhs.norm()), "{func:?}");
    }
    let lhs = inner(&g, &op.matvec(&f), &gg);
    let rhs = inner(&g, &f, &adj.matvec(&gg));
    assert!((lhs - rhs).norm() < 1e-9 * lhs.norm());
}

#[test]
fn operator_is_accretive() {
    let g = Grid::unit(2, 8).unwrap();
    let op = assemble(g, CoefficientField::perturbed_identity(g, 0.5)).unwrap();
    for s in 0..20 {
        let f = rand_field(64, 100 + s);
        let q = inner(&g, &op.matvec(&f), &f);
        assert!(q.re >= -1e-10);
    }
}

#[test]
fn subordination_and_quadrature_match_spectral() {
    let g = Grid::unit(1, 32).unwrap();
    for op in [EllipticOperator::identity(g).unwrap(), assemble(g, CoefficientField::perturbed_identity(g, 0.3)).unwrap()] {
        let f = rand_field(32, 4);
        for t in [0.02, 0.1, 0.5] {
            let a = op.poisson_apply(t, &f).unwrap();
            let b = op.poisson_subordination(t, &f).unwrap();
            assert!(max_diff(&a, &b) / l2(&f) < 1e-6, "t = {t}: {}", max_diff(&a, &b));
        }
        for gamma in [0.25, 0.5, 0.8] {
            let a = op.frac_neg_power(gamma, &f, KernelPolicy::Project).unwrap();
            let b = op.frac_neg_power_quadrature(gamma, &f).unwrap();
            assert!(max_diff(&a, &b) / l2(&a) < 1e-5, "γ = {gamma}: {}", max_diff(&a, &b) / l2(&a));
        }
    }
}

#[test]
fn dense_path_agrees_with_spectral_path() {
    let g = Grid::unit(1, 32).unwrap();
    let a = CoefficientField::perturbed_identity(g, 0.3);
    let spec = assemble(g, a.clone()).unwrap();
    let dense = EllipticOperator::assemble_with(g, a, OperatorOptions { force_dense: true, ..Default::default() }).unwrap();
    assert!(spec.is_spectral() && !dense.is_spectral());
    let f = rand_field(32, 5);
    for func in [
        Func::Heat { s: 0.01 },
        Func::HeatPower { t: 0.05, k: 1 },
        Func::Resolvent { t: 0.02 },
        Func::PoissonPower { t: 0.1, k: 0 },
        Func::OneMinusHeat { s: 0.01, m: 2 },
        Func::OneMinusResolvent { s: 0.02, m: 2 },
    ] {
        let d = max_diff(&spec.apply(func, &f), &dense.apply(func, &f));
        assert!(d < 1e-6 * l2(&f), "{func:?}: {d}");
    }
    let (f0, _) = spec.project_kernel(&f);
    let a = spec.frac_neg_power(0.5, &f0, KernelPolicy::Reject).unwrap();
    let b = dense.frac_neg_power(0.5, &f0, KernelPolicy::Reject).unwrap();
    assert!(max_diff(&a, &b) / l2(&a) < 1e-5);
    let adj_s = spec.adjoint().apply(Func::Heat { s: 0.01 }, &f);
    let adj_d = dense.adjoint().apply(Func::Heat { s: 0.01 }, &f);
    assert!(max_diff(&adj_s, &adj_d) < 1e-9);
}

#[test]
fn inverse_power_inverts_operator_on_range() {
    let g = Grid::unit(1, 32).unwrap();
    let op = assemble(g, CoefficientField::perturbed_identity(g, 0.3)).unwrap();
    let (f, _) = op.project_kernel(&rand_field(32, 6));
    let u = op.frac_neg_power(1.0, &f, KernelPolicy::Reject).unwrap();
    assert!(max_diff(&op.matvec(&u), &f) < 1e-9 * l2(&f) * 32.0);
    let half = op.frac_neg_power(0.5, &f, KernelPolicy::Reject).unwrap();
    let twice = op.frac_neg_power(0.5, &half, KernelPolicy::Reject).unwrap();
    assert!(max_diff(&twice, &u) < 1e-9 * l2(&u));
}

#[test]
fn kernel_policy_rejects_constants() {
    let g = Grid::unit(1, 16).unwrap();
    let op = EllipticOperator::identity(g).unwrap();
    let f: Vec<C64> = (0..16).map(|i| C64::new(1.0 + i as f64 * 0.01, 0.0)).collect();
    assert!(matches!(op.frac_neg_power(0.5, &f, KernelPolicy::Reject), Err(Error::Domain(_))));
    assert!(op.frac_neg_power(0.5, &f, KernelPolicy::Project).is_ok());
    assert!(op.heat_apply(-1.0, &f).is_err());
    assert!(op.frac_neg_power(0.0, &f, KernelPolicy::Project).is_err());
}

#[test]
fn riesz_transform_matches_fft_and_contracts() {
    let g = Grid::unit(2, 8).unwrap();
    let op = EllipticOperator::identity(g).unwrap();
    let (f, _) = op.project_kernel(&rand_field(64, 8));
    let r = op.riesz_apply(&f, KernelPolicy::Reject).unwrap();
    let blk = CoefficientField::identity(g).cells[0];
    for ax in 0..2 {
        let want = fft_apply(&g, &f, |th| {
            if th == [0.0, 0.0] {
                return C64::new(0.0, 0.0);
            }
            C64::new(0.0, th[ax].sin() / g.h()) / constant_symbol(&g, &blk, th).sqrt()
        });
        assert!(max_diff(&r[ax], &want) < 1e-10);
    }
    let out = (l2(&r[0]).powi(2) + l2(&r[1]).powi(2)).sqrt();
    assert!(out <= l2(&f) * (1.0 + 1e-12));
}

#[test]
fn ellipticity_constants_match_eigen_oracle() {
    let g = Grid::unit(2, 8).unwrap();
    let a = CoefficientField::from_fn(g, |x| {
        [[C64::new(1.5 + x[0], 0.2), C64::new(0.3, -0.4 * x[1])], [C64::new(-0.1, 0.2), C64::new(2.0, 0.0)]]
    });
    let (lam, big) = a.ellipticity_constants().unwrap();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for blk in &a.cells {
        let m = Mat::from_fn(2, 2, |i, j| blk[i][j]);
        let herm = Mat::from_fn(2, 2, |i, j| (blk[i][j] + blk[j][i].conj()) * 0.5);
        let ev = herm.self_adjoint_eigen(faer::Side::Lower).unwrap();
        lo = lo.min(ev.S()[0].re.min(ev.S()[1].re));
        hi = hi.max(linalg::sigma_max(&m));
    }
    assert!((lam - lo).abs() < 1e-12 && (big - hi).abs() < 1e-12);
    let bad = CoefficientField::constant(g, [[C64::new(-1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]]);
    assert!(matches!(assemble(g, bad), Err(Error::Guard(_))));
}

#[test]
fn heat_kernel_has_gaussian_decay() {
    let g = Grid::unit(1, 64).unwrap();
    let op = EllipticOperator::identity(g).unwrap();
    let e: Vec<bool> = (0..64).map(|i| i < 4).collect();
    let f: Vec<bool> = (0..64).map(|i| (20..24).contains(&i)).collect();
    let d = probes::set_distance(&op, &e, &f);
    let ts = ProbeFamily::Heat.standard_times(d, 12);
    let rep = gaffney_probe(&op, &e, &f, ProbeFamily::Heat, &ts).unwrap();
    assert!(!rep.below_floor);
    assert!(rep.beta > 0.8 && rep.beta < 1.2, "{rep:?}");
    assert!(rep.r2 > 0.99);
    let ts = ProbeFamily::Resolvent.standard_times(d, 12);
    let rep = gaffney_probe(&op, &e, &f, ProbeFamily::Resolvent, &ts).unwrap();
    assert!(rep.beta > 0.35 && rep.beta < 0.65, "{rep:?}");
}
