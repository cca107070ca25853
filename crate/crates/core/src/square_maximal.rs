//! Square functions, the vertical g-function and nontangential / radial
//! maximal functions built on the semigroup calculus.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::operator::{EllipticOperator, Func};
use crate::orlicz::{luxemburg_norm_uniform, OrliczFunction};
use crate::tent_field::{area_from_energy, ConeGeometry, TimeGrid};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Semigroup {
    Heat,
    Poisson,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum FunctionalKind {
    /// t²L e^{−t²L}
    SL,
    /// (t²L)^k e^{−t²L}
    SLk(u32),
    /// t∇e^{−t√L}
    SP,
    /// t²L e^{−t√L}
    STildeP,
    /// t∇e^{−t²L}
    STildeH,
    /// vertical t²L e^{−t²L}
    GL,
    NH,
    NP,
    RH,
    RP,
    /// (t²L)^M e^{−t²L}, radial
    RHM(u32),
}

/// A functional together with its aperture (cone or ball parameter β).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Functional {
    pub kind: FunctionalKind,
    pub beta: f64,
}

impl Functional {
    pub fn new(kind: FunctionalKind, beta: f64) -> Result<Self> {
        let f = Self { kind, beta };
        f.validate()?;
        Ok(f)
    }

    pub fn of(kind: FunctionalKind) -> Self {
        Self { kind, beta: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Domain(format!("β must be positive, got {}", self.beta)));
        }
        match self.kind {
            FunctionalKind::SLk(0) => Err(Error::Domain("S_L^k needs k >= 1".into())),
            FunctionalKind::RHM(0) => Err(Error::Domain("R_h^M needs M >= 1".into())),
            _ => Ok(()),
        }
    }

    pub fn is_square(&self) -> bool {
        matches!(
            self.kind,
            FunctionalKind::SL | FunctionalKind::SLk(_) | FunctionalKind::SP | FunctionalKind::STildeP | FunctionalKind::STildeH
        )
    }

    /// CLI names: s_l, s_l_k, s_p, s_tilde_p, s_tilde_h, g_l, n_h, n_p, r_h, r_p, r_h_m.
    pub fn parse(name: &str, beta: f64, order: u32) -> Result<Self> {
        let kind = match name {
            "s_l" => FunctionalKind::SL,
            "s_l_k" => FunctionalKind::SLk(order),
            "s_p" => FunctionalKind::SP,
            "s_tilde_p" => FunctionalKind::STildeP,
            "s_tilde_h" => FunctionalKind::STildeH,
            "g_l" => FunctionalKind::GL,
            "n_h" => FunctionalKind::NH,
            "n_p" => FunctionalKind::NP,
            "r_h" => FunctionalKind::RH,
            "r_p" => FunctionalKind::RP,
            "r_h_m" => FunctionalKind::RHM(order),
            other => return Err(Error::Config(format!("unknown functional '{other}'"))),
        };
        Self::new(kind, beta)
    }
}

/// |F(·, t_j)|² per level for the kernel of a square-function kind.
fn kernel_energy(op: &EllipticOperator, f: &[C64], kind: FunctionalKind, time: &TimeGrid) -> Result<Vec<f64>> {
    let n = op.cells();
    let mut energy = vec![0.0; n * time.len()];
    let scalar = |t: f64| -> Option<Func> {
        match kind {
            FunctionalKind::SL => Some(Func::HeatPower { t, k: 1 }),
            FunctionalKind::SLk(k) => Some(Func::HeatPower { t, k }),
            FunctionalKind::STildeP => Some(Func::PoissonPower { t, k: 1 }),
            _ => None,
        }
    };
    match kind {
        FunctionalKind::SL | FunctionalKind::SLk(_) | FunctionalKind::STildeP => {
            let funcs: Vec<Func> = time.levels.iter().map(|t| scalar(*t).unwrap()).collect();
            for (j, u) in op.apply_family(&funcs, f).into_iter().enumerate() {
                for (e, v) in energy[j * n..(j + 1) * n].iter_mut().zip(u) {
                    *e = v.norm_sqr();
                }
            }
        }
        FunctionalKind::SP | FunctionalKind::STildeH => {
            let funcs: Vec<Func> = time
                .levels
                .iter()
                .map(|t| match kind {
                    FunctionalKind::SP => Func::PoissonPower { t: *t, k: 0 },
                    _ => Func::Heat { s: t * t },
                })
                .collect();
            for (j, u) in op.apply_family(&funcs, f).into_iter().enumerate() {
                let t = time.levels[j];
                for comp in op.gradient(&u) {
                    for (e, v) in energy[j * n..(j + 1) * n].iter_mut().zip(comp) {
                        *e += (v * t).norm_sqr();
                    }
                }
            }
        }
        _ => return Err(Error::Domain(format!("{kind:?} is not a square-function kind"))),
    }
    Ok(energy)
}

/// Conical square function with the functional's aperture.
pub fn square_function(op: &EllipticOperator, f: &[C64], functional: Functional, time: &TimeGrid) -> Result<Vec<f64>> {
    functional.validate()?;
    check_len(op, f)?;
    let energy = kernel_energy(op, f, functional.kind, time)?;
    let cone = ConeGeometry::new(op.grid(), time, functional.beta)?;
    Ok(area_from_energy(op.grid(), &cone, &energy))
}

/// (Σ_j |t_j²L e^{−t_j²L}f(x)|² Δ)^{1/2}.
pub fn g_function(op: &EllipticOperator, f: &[C64], time: &TimeGrid) -> Result<Vec<f64>> {
    check_len(op, f)?;
    let n = op.cells();
    let funcs: Vec<Func> = time.levels.iter().map(|t| Func::HeatPower { t: *t, k: 1 }).collect();
    let mut acc = vec![0.0; n];
    for u in op.apply_family(&funcs, f) {
        for (a, v) in acc.iter_mut().zip(u) {
            *a += v.norm_sqr() * time.dlog;
        }
    }
    Ok(acc.into_iter().map(f64::sqrt).collect())
}

fn semigroup_func(s: Semigroup, t: f64, m: u32) -> Func {
    match s {
        Semigroup::Heat => Func::HeatPower { t, k: m },
        Semigroup::Poisson => Func::PoissonPower { t, k: m },
    }
}

/// Ball averages (1/|B(y, βt_j)|) ∫_{B(y, βt_j)} |u_j|² for every y and level.
fn ball_averages(grid: &Grid, levels: &[Vec<C64>], time: &TimeGrid, beta: f64) -> Vec<Vec<f64>> {
    levels
        .par_iter()
        .zip(time.levels.par_iter())
        .map(|(u, t)| {
            let st = grid.ball_weights(beta * t);
            let e: Vec<f64> = u.iter().map(|v| v.norm_sqr()).collect();
            (0..grid.cells()).map(|y| st.average(grid, &e, y)).collect()
        })
        .collect()
}

/// sup over (y, t_j) ∈ Γ_β(x) of the β t_j ball average of |e^{−t²L}f|² (or
/// the Poisson analogue), square-rooted.
pub fn nontangential_maximal(op: &EllipticOperator, f: &[C64], semigroup: Semigroup, beta: f64, time: &TimeGrid) -> Result<Vec<f64>> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("β must be positive, got {beta}")));
    }
    check_len(op, f)?;
    let grid = op.grid();
    let funcs: Vec<Func> = time.levels.iter().map(|t| semigroup_func(semigroup, *t, 0)).collect();
    let levels = op.apply_family(&funcs, f);
    let avgs = ball_averages(grid, &levels, time, beta);
    let cone = ConeGeometry::new(grid, time, beta)?;
    Ok((0..grid.cells())
        .into_par_iter()
        .map(|x| {
            let mut best = 0.0f64;
            for (j, offs) in cone.offsets.iter().enumerate() {
                for d in offs {
                    best = best.max(avgs[j][grid.shift(x, *d)]);
                }
            }
            best.sqrt()
        })
        .collect())
}

/// sup_j of the ball average over B(x, t_j) of |(t²L)^M e^{−t²L}f|² (M = 0
/// gives R_h; Poisson analogously), square-rooted.
pub fn radial_maximal(op: &EllipticOperator, f: &[C64], semigroup: Semigroup, m: u32, time: &TimeGrid) -> Result<Vec<f64>> {
    check_len(op, f)?;
    let grid = op.grid();
    let funcs: Vec<Func> = time.levels.iter().map(|t| semigroup_func(semigroup, *t, m)).collect();
    let levels = op.apply_family(&funcs, f);
    let avgs = ball_averages(grid, &levels, time, 1.0);
    Ok((0..grid.cells())
        .map(|x| avgs.iter().map(|a| a[x]).fold(0.0, f64::max).sqrt())
        .collect())
}

/// Pointwise values of any functional.
pub fn evaluate(op: &EllipticOperator, f: &[C64], functional: Functional, time: &TimeGrid) -> Result<Vec<f64>> {
    functional.validate()?;
    match functional.kind {
        FunctionalKind::GL => g_function(op, f, time),
        FunctionalKind::NH => nontangential_maximal(op, f, Semigroup::Heat, functional.beta, time),
        FunctionalKind::NP => nontangential_maximal(op, f, Semigroup::Poisson, functional.beta, time),
        FunctionalKind::RH => radial_maximal(op, f, Semigroup::Heat, 0, time),
        FunctionalKind::RP => radial_maximal(op, f, Semigroup::Poisson, 0, time),
        FunctionalKind::RHM(m) => radial_maximal(op, f, Semigroup::Heat, m, time),
        _ => square_function(op, f, functional, time),
    }
}

/// ‖functional(f)‖_{L(ω)}.
pub fn functional_norm(op: &EllipticOperator, f: &[C64], functional: Functional, time: &TimeGrid, w: &OrliczFunction) -> Result<f64> {
    let v = evaluate(op, f, functional, time)?;
    luxemburg_norm_uniform(&v, op.grid().cell_measure(), w)
}

fn check_len(op: &EllipticOperator, f: &[C64]) -> Result<()> {
    if f.len() != op.cells() {
        return Err(Error::Domain(format!("field has {} cells, operator expects {}", f.len(), op.cells())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::CoefficientField;
    use std::f64::consts::PI;

    fn mode(grid: &Grid, k: usize) -> Vec<C64> {
        (0..grid.cells()).map(|x| C64::new(0.0, 2.0 * PI * (k * x) as f64 / grid.n as f64).exp()).collect()
    }

    fn bump(grid: &Grid, c: usize, s: f64) -> Vec<C64> {
        (0..grid.cells())
            .map(|x| {
                let d = grid.dist(x, c) / grid.h();
                C64::new((-d * d / (2.0 * s * s)).exp(), 0.0)
            })
            .collect()
    }

    #[test]
    fn zero_and_homogeneity() {
        let g = Grid::unit(1, 32).unwrap();
        let op = EllipticOperator::identity(g).unwrap();
        let time = TimeGrid::standard(&g, 24).unwrap();
        let f = bump(&g, 7, 2.0);
        let z = vec![C64::new(0.0, 0.0); 32];
        let c = C64::new(-1.5, 2.0);
        let cf: Vec<C64> = f.iter().map(|v| v * c).collect();
        for name in ["s_l", "s_p", "s_tilde_p", "s_tilde_h", "g_l", "n_h", "n_p", "r_h", "r_p", "r_h_m"] {
            let fun = Functional::parse(name, 1.0, 2).unwrap();
            assert!(evaluate(&op, &z, fun, &time).unwrap().iter().all(|v| *v == 0.0), "{name}");
            let a = evaluate(&op, &f, fun, &time).unwrap();
            let b = evaluate(&op, &cf, fun, &time).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((y - c.norm() * x).abs() <= 1e-10 * (1.0 + y), "{name}");
            }
        }
    }

    #[test]
    fn eigenmode_square_function_matches_scalar_profile() {
        let g = Grid::unit(1, 32).unwrap();
        let op = EllipticOperator::identity(g).unwrap();
        let time = TimeGrid::standard(&g, 32).unwrap();
        let k = 5;
        let h = g.h();
        let mu = 4.0 / (h * h) * (PI * k as f64 / 32.0).sin().powi(2);
        let s = square_function(&op, &mode(&g, k), Functional::of(FunctionalKind::SL), &time).unwrap();
        let mut want = 0.0;
        for t in &time.levels {
            let count = (-16i64..=16).filter(|d| (*d as f64 * h).abs() < *t && *d > -16).count() as f64;
            let z = t * t * mu;
            want += h * time.dlog / t * count * (z * (-z).exp()).powi(2);
        }
        let want = want.sqrt();
        for v in &s {
            assert!((v - want).abs() < 1e-6 * want, "{v} vs {want}");
        }
    }

    #[test]
    fn g_function_of_eigenmode() {
        // ∫ (t²μ)² e^{−2t²μ} dt/t = 1/8 for every μ > 0.
        let mu: f64 = 37.0;
        let scale = 1.0 / mu.sqrt();
        let oracle = TimeGrid::new(1e-5 * scale, 1e2 * scale, 4000).unwrap();
        let q: f64 = oracle.levels.iter().map(|t| (t * t * mu).powi(2) * (-2.0 * t * t * mu).exp() * oracle.dlog).sum();
        assert!((q - 0.125).abs() < 1e-8);

        let g = Grid::unit(1, 32).unwrap();
        let op = EllipticOperator::identity(g).unwrap();
        let k = 3;
        let mu_k = 4.0 / (g.h() * g.h()) * (PI * k as f64 / 32.0).sin().powi(2);
        let s = 1.0 / mu_k.sqrt();
        let time = TimeGrid::new(1e-5 * s, 1e2 * s, 400).unwrap();
        let f = mode(&g, k);
        let v = g_function(&op, &f, &time).unwrap();
        for x in v {
            assert!((x - 1.0 / (2.0 * 2f64.sqrt())).abs() < 1e-6);
        }
    }

    #[test]
    fn constants_under_maximal_functions() {
        let g = Grid::unit(2, 8).unwrap();
        let op = EllipticOperator::identity(g).unwrap();
        let time = TimeGrid::standard(&g, 16).unwrap();
        let f = vec![C64::new(0.6, -0.8); g.cells()];
        let n = nontangential_maximal(&op, &f, Semigroup::Heat, 1.0, &time).unwrap();
        assert!(n.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let rm = radial_maximal(&op, &f, Semigroup::Heat, 2, &time).unwrap();
        assert!(rm.iter().all(|v| *v < 1e-12));
    }

    #[test]
    fn radial_below_nontangential_and_aperture_comparison() {
        for (dim, n) in [(1usize, 32usize), (2, 8)] {
            let g = Grid::unit(dim, n).unwrap();
            let a = CoefficientField::perturbed_identity(g, 0.3);
            let op = crate::operator::assemble(g, a).unwrap();
            let time = TimeGrid::standard(&g, 16).unwrap();
            let f = bump(&g, 3, 1.5);
            let r = radial_maximal(&op, &f, Semigroup::Heat, 0, &time).unwrap();
            let n1 = nontangential_maximal(&op, &f, Semigroup::Heat, 1.0, &time).unwrap();
            for (a, b) in r.iter().zip(&n1) {
                assert!(*a <= *b * (1.0 + 1e-12));
            }
            for sg in [Semigroup::Heat, Semigroup::Poisson] {
                let (beta, gam) = (0.5, 2.0);
                let nb = nontangential_maximal(&op, &f, sg, beta, &time).unwrap();
                let ng = nontangential_maximal(&op, &f, sg, gam, &time).unwrap();
                let c = (gam / beta as f64).powi(dim as i32);
                for (a, b) in nb.iter().zip(&ng) {
                    assert!(*a <= c * b * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn positive_bump_gives_positive_maximal_function() {
        let g = Grid::unit(1, 32).unwrap();
        let op = EllipticOperator::identity(g).unwrap();
        let time = TimeGrid::standard(&g, 16).unwrap();
        let mut f = vec![C64::new(0.0, 0.0); 32];
        f[4] = C64::new(1.0, 0.0);
        let n = nontangential_maximal(&op, &f, Semigroup::Heat, 1.0, &time).unwrap();
        assert!(n.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn functional_norm_power_one_is_l1() {
        let g = Grid::unit(1, 32).unwrap();
        let op = EllipticOperator::identity(g).unwrap();
        let time = TimeGrid::standard(&g, 16).unwrap();
        let f = bump(&g, 10, 2.0);
        let fun = Functional::of(FunctionalKind::SL);
        let s = square_function(&op, &f, fun, &time).unwrap();
        let l1: f64 = s.iter().sum::<f64>() * g.h();
        let nrm = functional_norm(&op, &f, fun, &time, &OrliczFunction::power(1.0)).unwrap();
        assert!((nrm - l1).abs() < 1e-9 * l1);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Functional::parse("s_l_k", 1.0, 0).is_err());
        assert!(Functional::parse("nope", 1.0, 1).is_err());
        assert!(Functional::new(FunctionalKind::SL, -1.0).is_err());
    }
}
