//! L = −div(A∇) on a periodic grid and its functional calculus.
//!
//! The matrix is assembled as L = Gᴴ 𝒜 G with G the forward-difference
//! gradient and 𝒜 the per-cell coefficient matrix, so Re⟨Lf, f⟩ ≥ λ_A‖Gf‖²
//! and the kernel of both L and L* is the constants. For A = I this is the
//! standard second-difference Laplacian.

pub mod probes;

use std::sync::Arc;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::{self, CMat};
use crate::C64;

pub use probes::{gaffney_probe, lp_boundedness_probe, set_distance, GaffneyReport, LpReport, ProbeFamily, NORM_FLOOR};

/// Condition-number ceiling for the eigenbasis before falling back to the
/// dense (expm / solve / quadrature) calculus.
pub const DEFAULT_COND_LIMIT: f64 = 1e6;
/// Modes with Re(s·μ) above this are set to zero.
pub const OVERFLOW_GUARD: f64 = 700.0;
/// Relative kernel mass above which L^{−γ} refuses an input.
pub const KERNEL_TOL: f64 = 1e-8;

pub type Block = [[C64; 2]; 2];

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoefficientField {
    pub grid: Grid,
    /// Per-cell matrix; only the leading dim×dim block is used.
    pub cells: Vec<Block>,
}

impl CoefficientField {
    pub fn identity(grid: Grid) -> Self {
        Self::constant(grid, [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]])
    }

    pub fn constant(grid: Grid, m: Block) -> Self {
        Self { grid, cells: vec![m; grid.cells()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> Block) -> Self {
        Self { grid, cells: (0..grid.cells()).map(|i| f(grid.center(i))).collect() }
    }

    /// I + i·ε·cos(2πx₁/L)·S with S the symmetric off-diagonal pattern in 2-D,
    /// and 1 + i·ε·cos(2πx/L) in 1-D. Hermitian part is I, so λ_A = 1, yet
    /// the operator is not self-adjoint.
    pub fn perturbed_identity(grid: Grid, eps: f64) -> Self {
        let l = grid.length;
        Self::from_fn(grid, |x| {
            let w = eps * (2.0 * std::f64::consts::PI * x[0] / l).cos();
            if grid.dim == 1 {
                [[c(1.0, w), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]]
            } else {
                [[c(1.0, 0.0), c(0.0, w)], [c(0.0, w), c(1.0, 0.0)]]
            }
        })
    }

    /// Per-cell (λ, Λ): smallest eigenvalue of the Hermitian part, operator norm.
    pub fn cell_constants(&self, i: usize) -> (f64, f64) {
        let a = &self.cells[i];
        if self.grid.dim == 1 {
            return (a[0][0].re, a[0][0].norm());
        }
        let p = a[0][0].re;
        let r = a[1][1].re;
        let q = (a[0][1] + a[1][0].conj()) * 0.5;
        let lam = 0.5 * (p + r) - (0.25 * (p - r) * (p - r) + q.norm_sqr()).sqrt();
        // ‖A‖² = largest eigenvalue of AᴴA.
        let m00 = a[0][0].norm_sqr() + a[1][0].norm_sqr();
        let m11 = a[0][1].norm_sqr() + a[1][1].norm_sqr();
        let m01 = a[0][0].conj() * a[0][1] + a[1][0].conj() * a[1][1];
        let big = 0.5 * (m00 + m11) + (0.25 * (m00 - m11) * (m00 - m11) + m01.norm_sqr()).sqrt();
        (lam, big.sqrt())
    }

    pub fn ellipticity_constants(&self) -> Result<(f64, f64)> {
        let mut lam = f64::INFINITY;
        let mut big = 0.0f64;
        for i in 0..self.cells.len() {
            let (l, b) = self.cell_constants(i);
            lam = lam.min(l);
            big = big.max(b);
        }
        if !(lam > 0.0) {
            return Err(Error::Guard(format!("ellipticity fails: λ_A = {lam} ≤ 0")));
        }
        Ok((lam, big))
    }
}

pub fn ellipticity_constants(a: &CoefficientField) -> Result<(f64, f64)> {
    a.ellipticity_constants()
}

/// Scalar functions of L understood by both calculus paths.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Func {
    /// e^{−sL}
    Heat { s: f64 },
    /// (t²L)^k e^{−t²L}
    HeatPower { t: f64, k: u32 },
    /// (I + tL)^{−1}
    Resolvent { t: f64 },
    /// (t²L)^k e^{−t√L}
    PoissonPower { t: f64, k: u32 },
    /// L^{−γ} on the range, 0 on the kernel
    NegPower { gamma: f64 },
    /// (I − e^{−sL})^m
    OneMinusHeat { s: f64, m: u32 },
    /// (I − (I + sL)^{−1})^m
    OneMinusResolvent { s: f64, m: u32 },
}

impl Func {
    pub fn scalar(&self, mu: C64) -> C64 {
        let one = c(1.0, 0.0);
        let heat = |z: C64| if z.re > OVERFLOW_GUARD { c(0.0, 0.0) } else { (-z).exp() };
        match *self {
            Func::Heat { s } => heat(mu * s),
            Func::HeatPower { t, k } => {
                let z = mu * (t * t);
                z.powi(k as i32) * heat(z)
            }
            Func::Resolvent { t } => one / (one + mu * t),
            Func::PoissonPower { t, k } => {
                let z = mu * (t * t);
                z.powi(k as i32) * heat(mu.sqrt() * t)
            }
            Func::NegPower { gamma } => {
                if mu == c(0.0, 0.0) {
                    c(0.0, 0.0)
                } else {
                    (-mu.ln() * gamma).exp()
                }
            }
            Func::OneMinusHeat { s, m } => (one - heat(mu * s)).powi(m as i32),
            Func::OneMinusResolvent { s, m } => (mu * s / (one + mu * s)).powi(m as i32),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Func::Heat { s } | Func::OneMinusHeat { s, .. } | Func::OneMinusResolvent { s, .. } => s > 0.0,
            Func::HeatPower { t, .. } | Func::Resolvent { t } | Func::PoissonPower { t, .. } => t > 0.0,
            Func::NegPower { gamma } => gamma > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("{self:?} needs a positive parameter")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelPolicy {
    /// Refuse inputs with a non-negligible constant component.
    Reject,
    /// Subtract the mean first.
    Project,
}

#[derive(Clone, Copy, Debug)]
pub struct OperatorOptions {
    pub cond_limit: f64,
    pub force_dense: bool,
}

impl Default for OperatorOptions {
    fn default() -> Self {
        Self { cond_limit: DEFAULT_COND_LIMIT, force_dense: false }
    }
}

enum Calculus {
    Spectral {
        mu: Vec<C64>,
        v: CMat,
        vinv: CMat,
        vh: CMat,
        vinv_h: CMat,
    },
    Dense,
}

struct Inner {
    grid: Grid,
    coeff: CoefficientField,
    l: CMat,
    l_adj: CMat,
    calculus: Calculus,
    cond: f64,
    ellipticity: (f64, f64),
    hermitian: bool,
    mu_min: f64,
    mu_max: f64,
    warning: Option<String>,
}

/// Immutable after assembly; `adjoint()` shares the cache.
#[derive(Clone)]
pub struct EllipticOperator {
    inner: Arc<Inner>,
    adjoint: bool,
}

impl std::fmt::Debug for EllipticOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EllipticOperator")
            .field("grid", &self.inner.grid)
            .field("adjoint", &self.adjoint)
            .field("spectral", &self.is_spectral())
            .field("cond", &self.inner.cond)
            .finish()
    }
}

fn assemble_matrix(grid: &Grid, a: &CoefficientField) -> CMat {
    let n = grid.cells();
    let h2 = grid.h() * grid.h();
    let mut l = Mat::<C64>::zeros(n, n);
    let unit = |ax: usize| -> [isize; 2] {
        let mut d = [0isize; 2];
        d[ax] = 1;
        d
    };
    for x in 0..n {
        for ax in 0..grid.dim {
            for bx in 0..grid.dim {
                let coef = a.cells[x][ax][bx] / h2;
                if coef == c(0.0, 0.0) {
                    continue;
                }
                let xb = grid.shift(x, unit(bx));
                let r1 = grid.shift(x, unit(ax));
                // Row x + e_a receives +coef·(f(x+e_b) − f(x)); row x receives −coef·(…).
                l[(r1, xb)] += coef;
                l[(r1, x)] -= coef;
                l[(x, xb)] -= coef;
                l[(x, x)] += coef;
            }
        }
    }
    l
}

pub fn assemble(grid: Grid, a: CoefficientField) -> Result<EllipticOperator> {
    EllipticOperator::assemble_with(grid, a, OperatorOptions::default())
}

impl EllipticOperator {
    pub fn identity(grid: Grid) -> Result<Self> {
        assemble(grid, CoefficientField::identity(grid))
    }

    pub fn assemble_with(grid: Grid, a: CoefficientField, opts: OperatorOptions) -> Result<Self> {
        if a.grid != grid || a.cells.len() != grid.cells() {
            return Err(Error::Config("coefficient field does not match the grid".into()));
        }
        let ellipticity = a.ellipticity_constants()?;
        let l = assemble_matrix(&grid, &a);
        let l_adj = linalg::adjoint(&l);
        let scale = linalg::max_abs(&l);
        let hermitian = linalg::max_abs(&(&l - &l_adj)) <= 1e-13 * scale;
        let n = grid.cells();

        let mut warning = None;
        let mut cond = 1.0;
        let mut calculus = Calculus::Dense;
        let eigvals: Vec<C64>;
        if hermitian && !opts.force_dense {
            let herm = Mat::from_fn(n, n, |i, j| (l[(i, j)] + l_adj[(i, j)]) * 0.5);
            let evd = herm
                .self_adjoint_eigen(faer::Side::Lower)
                .map_err(|e| Error::Numerical(format!("self-adjoint eigensolver: {e:?}")))?;
            let mut mu: Vec<C64> = (0..n).map(|i| c(evd.S()[i].re, 0.0)).collect();
            let v = evd.U().to_owned();
            let vh = linalg::adjoint(&v);
            pin_kernel(&mut mu);
            eigvals = mu.clone();
            calculus = Calculus::Spectral { mu, vinv: vh.clone(), vinv_h: v.clone(), v, vh };
        } else if !opts.force_dense {
            let evd = l.eigen().map_err(|e| Error::Numerical(format!("eigensolver: {e:?}")))?;
            let mut mu: Vec<C64> = (0..n).map(|i| evd.S()[i]).collect();
            let mut v = evd.U().to_owned();
            for j in 0..n {
                let nrm = (0..n).map(|i| v[(i, j)].norm_sqr()).sum::<f64>().sqrt();
                for i in 0..n {
                    v[(i, j)] = v[(i, j)] / nrm;
                }
            }
            cond = linalg::cond2(&v);
            pin_kernel(&mut mu);
            eigvals = mu.clone();
            if cond <= opts.cond_limit {
                let vinv = linalg::inverse(&v);
                let vh = linalg::adjoint(&v);
                let vinv_h = linalg::adjoint(&vinv);
                calculus = Calculus::Spectral { mu, v, vinv, vh, vinv_h };
            } else {
                warning = Some(format!("eigenbasis condition {cond:.2e} exceeds {:.0e}; using dense calculus", opts.cond_limit));
            }
        } else {
            let mut mu = l.eigenvalues().map_err(|e| Error::Numerical(format!("eigenvalues: {e:?}")))?;
            pin_kernel(&mut mu);
            eigvals = mu;
            cond = f64::NAN;
        }
        let mu_max = eigvals.iter().map(|m| m.norm()).fold(0.0, f64::max);
        let mu_min = eigvals.iter().filter(|m| m.norm() > 0.0).map(|m| m.re).fold(f64::INFINITY, f64::min);
        Ok(Self {
            inner: Arc::new(Inner { grid, coeff: a, l, l_adj, calculus, cond, ellipticity, hermitian, mu_min, mu_max, warning }),
            adjoint: false,
        })
    }

    /// The adjoint L*, sharing the factorization.
    pub fn adjoint(&self) -> Self {
        Self { inner: self.inner.clone(), adjoint: !self.adjoint }
    }

    pub fn is_adjoint(&self) -> bool {
        self.adjoint
    }

    pub fn grid(&self) -> &Grid {
        &self.inner.grid
    }

    pub fn coefficients(&self) -> &CoefficientField {
        &self.inner.coeff
    }

    pub fn ellipticity(&self) -> (f64, f64) {
        self.inner.ellipticity
    }

    pub fn is_hermitian(&self) -> bool {
        self.inner.hermitian
    }

    pub fn is_spectral(&self) -> bool {
        matches!(self.inner.calculus, Calculus::Spectral { .. })
    }

    pub fn eigenbasis_condition(&self) -> f64 {
        self.inner.cond
    }

    pub fn warning(&self) -> Option<&str> {
        self.inner.warning.as_deref()
    }

    /// Smallest real part among non-kernel eigenvalues and largest modulus.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        (self.inner.mu_min, self.inner.mu_max)
    }

    /// Eigenvalues of the current operator (conjugated for L*), spectral path only.
    pub fn eigenvalues(&self) -> Option<Vec<C64>> {
        match &self.inner.calculus {
            Calculus::Spectral { mu, .. } => Some(if self.adjoint { mu.iter().map(|m| m.conj()).collect() } else { mu.clone() }),
            Calculus::Dense => None,
        }
    }

    pub fn matrix(&self) -> &CMat {
        if self.adjoint {
            &self.inner.l_adj
        } else {
            &self.inner.l
        }
    }

    pub fn matvec(&self, f: &[C64]) -> Vec<C64> {
        linalg::mat_vec(self.matrix(), f)
    }

    pub fn cells(&self) -> usize {
        self.inner.grid.cells()
    }

    /// Coefficients of f in the eigenbasis (V⁻¹f, or Vᴴf for L*).
    fn analyse(&self, f: &[C64]) -> Option<Vec<C64>> {
        match &self.inner.calculus {
            Calculus::Spectral { vinv, vh, .. } => Some(linalg::mat_vec(if self.adjoint { vh } else { vinv }, f)),
            Calculus::Dense => None,
        }
    }

    fn synthesize(&self, coef: &[C64]) -> Vec<C64> {
        match &self.inner.calculus {
            Calculus::Spectral { v, vinv_h, .. } => linalg::mat_vec(if self.adjoint { vinv_h } else { v }, coef),
            Calculus::Dense => unreachable!("synthesize on dense calculus"),
        }
    }

    fn mode_values(&self, func: &Func) -> Vec<C64> {
        match &self.inner.calculus {
            Calculus::Spectral { mu, .. } => mu
                .iter()
                .map(|m| {
                    let v = func.scalar(*m);
                    if self.adjoint {
                        v.conj()
                    } else {
                        v
                    }
                })
                .collect(),
            Calculus::Dense => unreachable!(),
        }
    }

    /// φ(L)f.
    pub fn apply(&self, func: Func, f: &[C64]) -> Vec<C64> {
        match self.analyse(f) {
            Some(mut coef) => {
                for (ci, phi) in coef.iter_mut().zip(self.mode_values(&func)) {
                    *ci *= phi;
                }
                self.synthesize(&coef)
            }
            None => linalg::mat_vec(&self.dense_matrix(func), f),
        }
    }

    /// φ_j(L)f for several functions sharing one analysis step.
    pub fn apply_family(&self, funcs: &[Func], f: &[C64]) -> Vec<Vec<C64>> {
        match self.analyse(f) {
            Some(coef) => funcs
                .iter()
                .map(|func| {
                    let scaled: Vec<C64> = coef.iter().zip(self.mode_values(func)).map(|(a, b)| a * b).collect();
                    self.synthesize(&scaled)
                })
                .collect(),
            None => funcs.iter().map(|func| self.apply(*func, f)).collect(),
        }
    }

    /// Σ_j w_j φ_j(L) f_j with one synthesis step.
    pub fn apply_sum(&self, terms: &[(f64, Func, &[C64])]) -> Vec<C64> {
        let n = self.cells();
        if !self.is_spectral() {
            let mut out = vec![linalg::zero(); n];
            for (w, func, f) in terms {
                for (o, v) in out.iter_mut().zip(self.apply(*func, f)) {
                    *o += v * *w;
                }
            }
            return out;
        }
        let mut acc = vec![linalg::zero(); n];
        for (w, func, f) in terms {
            let coef = self.analyse(f).unwrap();
            for ((a, cf), phi) in acc.iter_mut().zip(coef).zip(self.mode_values(func)) {
                *a += cf * phi * *w;
            }
        }
        self.synthesize(&acc)
    }

    /// Dense matrix of φ(L).
    pub fn func_matrix(&self, func: Func) -> CMat {
        match &self.inner.calculus {
            Calculus::Spectral { v, vinv, vh, vinv_h, .. } => {
                let phi = self.mode_values(&func);
                let (left, right) = if self.adjoint { (vinv_h, vh) } else { (v, vinv) };
                let scaled = Mat::from_fn(left.nrows(), left.ncols(), |i, j| left[(i, j)] * phi[j]);
                &scaled * right
            }
            Calculus::Dense => self.dense_matrix(func),
        }
    }

    fn kernel_projector(&self) -> CMat {
        let n = self.cells();
        Mat::from_fn(n, n, |_, _| c(1.0 / n as f64, 0.0))
    }

    fn dense_heat(&self, s: f64) -> CMat {
        let m = self.matrix();
        let a = Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (-s));
        linalg::expm(&a)
    }

    fn dense_matrix(&self, func: Func) -> CMat {
        let m = self.matrix();
        let n = m.nrows();
        let id = linalg::identity(n);
        let scaled = |k: f64| Mat::from_fn(n, n, |i, j| m[(i, j)] * k);
        match func {
            Func::Heat { s } => self.dense_heat(s),
            Func::HeatPower { t, k } => {
                let mut r = self.dense_heat(t * t);
                let tl = scaled(t * t);
                for _ in 0..k {
                    r = &tl * &r;
                }
                r
            }
            Func::Resolvent { t } => linalg::inverse(&(&id + &scaled(t))),
            Func::PoissonPower { t, k } => {
                let mut r = self.subordination_matrix(t);
                let tl = scaled(t * t);
                for _ in 0..k {
                    r = &tl * &r;
                }
                r
            }
            Func::NegPower { gamma } => self.neg_power_quadrature_matrix(gamma),
            Func::OneMinusHeat { s, m: k } => {
                let b = &id - &self.dense_heat(s);
                let mut r = id.clone();
                for _ in 0..k {
                    r = &b * &r;
                }
                r
            }
            Func::OneMinusResolvent { s, m: k } => {
                let b = &id - &linalg::inverse(&(&id + &scaled(s)));
                let mut r = id.clone();
                for _ in 0..k {
                    r = &b * &r;
                }
                r
            }
        }
    }

    /// Nodes and weights for e^{−t√L} = ∫ t e^{−t²/4u}/(2√π u^{3/2}) e^{−uL} du
    /// on a 64-point midpoint log grid.
    fn subordination_nodes(&self, t: f64) -> Vec<(f64, f64)> {
        let (mu_min, _) = self.spectral_bounds();
        let u_lo = t * t / 200.0;
        let u_hi = (50.0 / mu_min).max(10.0 * u_lo);
        let j = 64;
        let (a, b) = (u_lo.ln(), u_hi.ln());
        let d = (b - a) / j as f64;
        (0..j)
            .map(|i| {
                let u = (a + (i as f64 + 0.5) * d).exp();
                let kern = t * (-t * t / (4.0 * u)).exp() / (2.0 * std::f64::consts::PI.sqrt() * u.powf(1.5));
                (u, kern * u * d)
            })
            .collect()
    }

    fn subordination_matrix(&self, t: f64) -> CMat {
        let n = self.cells();
        let p0 = self.kernel_projector();
        let mut q = Mat::<C64>::zeros(n, n);
        for (u, w) in self.subordination_nodes(t) {
            q = &q + &Mat::from_fn(n, n, |i, j| self.dense_heat(u)[(i, j)] * w);
        }
        let id = linalg::identity(n);
        &(&q * &(&id - &p0)) + &p0
    }

    /// Nodes for L^{−γ} = Γ(γ)⁻¹ ∫ t^γ e^{−tL} dt/t: 200 midpoints on
    /// [10⁻⁶/μ_max, 10³/μ_min], plus the first-order small-t endpoint term.
    fn neg_power_nodes(&self, gamma: f64) -> (Vec<(f64, f64)>, f64) {
        let (mu_min, mu_max) = self.spectral_bounds();
        let (t_lo, t_hi) = (1e-6 / mu_max, 1e3 / mu_min);
        let j = 200;
        let (a, b) = (t_lo.ln(), t_hi.ln());
        let d = (b - a) / j as f64;
        let g = statrs::function::gamma::gamma(gamma);
        let nodes = (0..j)
            .map(|i| {
                let t = (a + (i as f64 + 0.5) * d).exp();
                (t, t.powf(gamma) * d / g)
            })
            .collect();
        (nodes, t_lo)
    }

    fn neg_power_quadrature_matrix(&self, gamma: f64) -> CMat {
        let n = self.cells();
        let (nodes, t_lo) = self.neg_power_nodes(gamma);
        let g = statrs::function::gamma::gamma(gamma);
        let m = self.matrix();
        let mut q = Mat::from_fn(n, n, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            (c(id, 0.0) * t_lo.powf(gamma) / gamma - m[(i, j)] * (t_lo.powf(gamma + 1.0) / (gamma + 1.0))) / g
        });
        for (t, w) in nodes {
            let e = self.dense_heat(t);
            q = &q + &Mat::from_fn(n, n, |i, j| e[(i, j)] * w);
        }
        let id = linalg::identity(n);
        &q * &(&id - &self.kernel_projector())
    }

    pub fn mean(&self, f: &[C64]) -> C64 {
        f.iter().sum::<C64>() / f.len() as f64
    }

    /// (f − mean, mean).
    pub fn project_kernel(&self, f: &[C64]) -> (Vec<C64>, C64) {
        let m = self.mean(f);
        (f.iter().map(|v| v - m).collect(), m)
    }

    /// ‖P₀f‖₂ / ‖f‖₂ with P₀ the mean.
    pub fn kernel_fraction(&self, f: &[C64]) -> f64 {
        let nrm = l2(f);
        if nrm == 0.0 {
            return 0.0;
        }
        self.mean(f).norm() * (f.len() as f64).sqrt() / nrm
    }

    pub fn heat_apply(&self, s: f64, f: &[C64]) -> Result<Vec<C64>> {
        let func = Func::Heat { s };
        func.validate()?;
        Ok(self.apply(func, f))
    }

    pub fn heat_power_apply(&self, t: f64, k: u32, f: &[C64]) -> Result<Vec<C64>> {
        let func = Func::HeatPower { t, k };
        func.validate()?;
        Ok(self.apply(func, f))
    }

    pub fn resolvent_apply(&self, t: f64, f: &[C64]) -> Result<Vec<C64>> {
        let func = Func::Resolvent { t };
        func.validate()?;
        Ok(self.apply(func, f))
    }

    pub fn poisson_apply(&self, t: f64, f: &[C64]) -> Result<Vec<C64>> {
        let func = Func::PoissonPower { t, k: 0 };
        func.validate()?;
        Ok(self.apply(func, f))
    }

    /// e^{−t√L}f by subordination over the heat semigroup.
    pub fn poisson_subordination(&self, t: f64, f: &[C64]) -> Result<Vec<C64>> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("Poisson time must be positive, got {t}")));
        }
        let (g, m) = self.project_kernel(f);
        let nodes = self.subordination_nodes(t);
        let terms: Vec<(f64, Func, &[C64])> = nodes.iter().map(|(u, w)| (*w, Func::Heat { s: *u }, g.as_slice())).collect();
        let mut out = self.apply_sum(&terms);
        for v in out.iter_mut() {
            *v += m;
        }
        Ok(out)
    }

    fn check_kernel(&self, f: &[C64], policy: KernelPolicy) -> Result<Vec<C64>> {
        let frac = self.kernel_fraction(f);
        match policy {
            KernelPolicy::Reject if frac > KERNEL_TOL => Err(Error::Domain(format!(
                "input has relative kernel mass {frac:.3e} > {KERNEL_TOL:e}; project it out first"
            ))),
            _ => Ok(self.project_kernel(f).0),
        }
    }

    /// L^{−γ}f with the kernel mode mapped to 0.
    pub fn frac_neg_power(&self, gamma: f64, f: &[C64], policy: KernelPolicy) -> Result<Vec<C64>> {
        let func = Func::NegPower { gamma };
        func.validate()?;
        let g = self.check_kernel(f, policy)?;
        Ok(self.apply(func, &g))
    }

    /// L^{−γ}f by heat-semigroup quadrature (always projects the kernel).
    pub fn frac_neg_power_quadrature(&self, gamma: f64, f: &[C64]) -> Result<Vec<C64>> {
        if !(gamma > 0.0) {
            return Err(Error::Domain(format!("γ must be positive, got {gamma}")));
        }
        let (g, _) = self.project_kernel(f);
        let (nodes, t_lo) = self.neg_power_nodes(gamma);
        let terms: Vec<(f64, Func, &[C64])> = nodes.iter().map(|(t, w)| (*w, Func::Heat { s: *t }, g.as_slice())).collect();
        let mut out = self.apply_sum(&terms);
        let lg = self.matvec(&g);
        let gm = statrs::function::gamma::gamma(gamma);
        let c0 = t_lo.powf(gamma) / gamma / gm;
        let c1 = t_lo.powf(gamma + 1.0) / (gamma + 1.0) / gm;
        for ((o, gv), lv) in out.iter_mut().zip(&g).zip(&lg) {
            *o += gv * c0 - lv * c1;
        }
        Ok(out)
    }

    /// Centered-difference gradient, one component per axis.
    pub fn gradient(&self, f: &[C64]) -> Vec<Vec<C64>> {
        centered_gradient(self.grid(), f)
    }

    /// ∇L^{−1/2}f.
    pub fn riesz_apply(&self, f: &[C64], policy: KernelPolicy) -> Result<Vec<Vec<C64>>> {
        let g = self.frac_neg_power(0.5, f, policy)?;
        Ok(self.gradient(&g))
    }
}

fn pin_kernel(mu: &mut [C64]) {
    let (idx, _) = mu.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, m)| if m.norm() < acc.1 { (i, m.norm()) } else { acc });
    mu[idx] = c(0.0, 0.0);
}

pub fn centered_gradient(grid: &Grid, f: &[C64]) -> Vec<Vec<C64>> {
    let inv = 1.0 / (2.0 * grid.h());
    (0..grid.dim)
        .map(|ax| {
            let mut plus = [0isize; 2];
            plus[ax] = 1;
            let minus = [-plus[0], -plus[1]];
            (0..grid.cells()).map(|x| (f[grid.shift(x, plus)] - f[grid.shift(x, minus)]) * inv).collect()
        })
        .collect()
}

pub fn l2(f: &[C64]) -> f64 {
    f.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Discrete L² norm with the cell measure.
pub fn l2_cell(grid: &Grid, f: &[C64]) -> f64 {
    l2(f) * grid.cell_measure().sqrt()
}

pub fn inner(grid: &Grid, f: &[C64], g: &[C64]) -> C64 {
    f.iter().zip(g).map(|(a, b)| a * b.conj()).sum::<C64>() * grid.cell_measure()
}

#[cfg(test)]
mod tests;
