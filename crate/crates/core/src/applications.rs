//! Riesz transform, g-function and fractional integral probes, off-diagonal
//! conditions for operator handles, and the annular splitting of molecules
//! into classical (ρ, 2)-atoms.

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::hardy::{annulus_index, hardy_norm, molecular_decompose, MoleculeParams};
use crate::linalg::{self, CMat};
use crate::operator::{centered_gradient, l2, EllipticOperator, Func, KernelPolicy};
use crate::orlicz::{assumption_b_transform, luxemburg_norm_uniform, solve_unit_level, OrliczFunction};
use crate::square_maximal::g_function;
use crate::tent_atoms::{Ball, DEFAULT_GAMMA};
use crate::tent_field::TimeGrid;
use crate::C64;

/// Tolerance on n(1/p_ω − 1/q) = 2γ.
pub const INDEX_TOL: f64 = 1e-10;
/// Relative size of ∫∇L^{−1/2}α below which the telescoping starts.
pub const MEAN_TOL: f64 = 1e-8;
/// Fixed multiple C in ‖b_k‖₂ ≤ C 2^{−kε}|B_k|^{−1/2}ρ(|B_k|)^{−1}.
pub const CLASSICAL_ATOM_MULTIPLE: f64 = 2.0;

/// A linear operator given as a stack of matrices, ‖Tf‖² = Σ_c ‖M_c f‖² pointwise.
pub trait OperatorHandle: Sync {
    fn name(&self) -> String;
    fn matrices(&self, op: &EllipticOperator) -> Result<Vec<CMat>>;
}

pub struct IdentityHandle;

impl OperatorHandle for IdentityHandle {
    fn name(&self) -> String {
        "identity".into()
    }
    fn matrices(&self, op: &EllipticOperator) -> Result<Vec<CMat>> {
        Ok(vec![linalg::identity(op.cells())])
    }
}

/// ∇L^{−1/2}, one matrix per axis.
pub struct RieszHandle;

fn gradient_matrices(grid: &Grid) -> Vec<CMat> {
    let n = grid.cells();
    let cols: Vec<Vec<Vec<C64>>> = (0..n)
        .map(|j| {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[j] = C64::new(1.0, 0.0);
            centered_gradient(grid, &e)
        })
        .collect();
    (0..grid.dim).map(|ax| Mat::from_fn(n, n, |i, j| cols[j][ax][i])).collect()
}

impl OperatorHandle for RieszHandle {
    fn name(&self) -> String {
        "riesz".into()
    }
    fn matrices(&self, op: &EllipticOperator) -> Result<Vec<CMat>> {
        let n = op.cells();
        let p0 = Mat::from_fn(n, n, |i, j| C64::new(if i == j { 1.0 } else { 0.0 } - 1.0 / n as f64, 0.0));
        let half = &op.func_matrix(Func::NegPower { gamma: 0.5 }) * &p0;
        Ok(gradient_matrices(op.grid()).iter().map(|g| g * &half).collect())
    }
}

/// g_L on a time ladder: one matrix √Δ·t_j²Le^{−t_j²L} per level.
pub struct GFunctionHandle {
    pub time: TimeGrid,
}

impl OperatorHandle for GFunctionHandle {
    fn name(&self) -> String {
        "g_l".into()
    }
    fn matrices(&self, op: &EllipticOperator) -> Result<Vec<CMat>> {
        let s = self.time.dlog.sqrt();
        Ok(self
            .time
            .levels
            .iter()
            .map(|t| {
                let m = op.func_matrix(Func::HeatPower { t: *t, k: 1 });
                Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
            })
            .collect())
    }
}

/// L^{−γ} on the range.
pub struct NegPowerHandle {
    pub gamma: f64,
}

impl OperatorHandle for NegPowerHandle {
    fn name(&self) -> String {
        format!("neg_power({})", self.gamma)
    }
    fn matrices(&self, op: &EllipticOperator) -> Result<Vec<CMat>> {
        if !(self.gamma > 0.0) {
            return Err(Error::Domain(format!("γ must be positive, got {}", self.gamma)));
        }
        Ok(vec![op.func_matrix(Func::NegPower { gamma: self.gamma })])
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionSample {
    pub e: Vec<bool>,
    pub f: Vec<bool>,
    pub t: f64,
}

/// Two blocks of `width_cells` cells (squares in 2-D) with `dist_cells` empty
/// cells between them, and times t = d²·s for log-spaced s in [s_lo, s_hi].
pub fn standard_condition_samples(grid: &Grid, dist_cells: usize, width_cells: usize, s_lo: f64, s_hi: f64, count: usize) -> Vec<ConditionSample> {
    let n = grid.n;
    let mut e = vec![false; grid.cells()];
    let mut f = vec![false; grid.cells()];
    for i in 0..grid.cells() {
        let c = grid.coords(i);
        let inside = |x: usize, lo: usize| (x + n - lo) % n < width_cells;
        let row_ok = grid.dim == 1 || inside(c[1], 0);
        if row_ok && inside(c[0], 0) {
            e[i] = true;
        }
        if row_ok && inside(c[0], width_cells + dist_cells) {
            f[i] = true;
        }
    }
    let count = count.max(2);
    (0..count)
        .map(|i| {
            let s = s_lo * (s_hi / s_lo).powf(i as f64 / (count - 1) as f64);
            let d = (dist_cells as f64 + 1.0) * grid.h();
            ConditionSample { e: e.clone(), f: f.clone(), t: s * d * d }
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionRow {
    pub dist: f64,
    pub t: f64,
    pub norm: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OperatorConditionReport {
    pub operator: String,
    pub p: f64,
    pub m: u32,
    pub rows: Vec<ConditionRow>,
    /// Least-squares slope of log norm against log(t/d²).
    pub exponent: f64,
    pub r2: f64,
    /// No measurable dependence on t/d² (e.g. M = 0).
    pub flat: bool,
    /// True when p = 2 (σ_max); otherwise a seeded lower bound.
    pub exact: bool,
}

fn indices(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i).collect()
}

fn stacked_block(ms: &[CMat], rows: &[usize], cols: &[usize]) -> CMat {
    let r = rows.len();
    Mat::from_fn(r * ms.len(), cols.len(), |i, j| ms[i / r][(rows[i % r], cols[j])])
}

/// ‖χ_F T χ_E‖ from L^p to L^p; exact for p = 2, a seeded lower bound otherwise.
fn restricted_norm(grid: &Grid, block: &CMat, rows_per: usize, p: f64, seed: u64) -> f64 {
    if p == 2.0 {
        return linalg::sigma_max(block);
    }
    let cell = grid.cell_measure();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ncols = block.ncols();
    let stacks = block.nrows() / rows_per.max(1);
    let mut best = 0.0f64;
    for trial in 0..(ncols + 32) {
        let v: Vec<C64> = if trial < ncols {
            (0..ncols).map(|j| C64::new(if j == trial { 1.0 } else { 0.0 }, 0.0)).collect()
        } else {
            (0..ncols).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
        };
        let out = linalg::mat_vec(block, &v);
        let lhs: f64 = (0..rows_per)
            .map(|i| (0..stacks).map(|s| out[s * rows_per + i].norm_sqr()).sum::<f64>().sqrt().powf(p))
            .sum::<f64>()
            * cell;
        let rhs: f64 = v.iter().map(|x| x.norm().powf(p)).sum::<f64>() * cell;
        best = best.max((lhs / rhs).powf(1.0 / p));
    }
    best
}

/// Measures ‖T(I − e^{−tL})^M‖_{L^p(E) → L^p(F)} over the samples and fits
/// the exponent of t/dist(E,F)².
pub fn offdiagonal_condition_probe(
    op: &EllipticOperator,
    handle: &dyn OperatorHandle,
    p: f64,
    m: u32,
    samples: &[ConditionSample],
) -> Result<OperatorConditionReport> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("p must be at least 1, got {p}")));
    }
    let grid = *op.grid();
    let base = handle.matrices(op)?;
    let rows: Vec<ConditionRow> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let d = crate::operator::set_distance(op, &s.e, &s.f);
            if !(d > 0.0) {
                return Err(Error::Domain("E and F must be disjoint with positive distance".into()));
            }
            let ms: Vec<CMat> = if m == 0 {
                base.clone()
            } else {
                let c = op.func_matrix(Func::OneMinusHeat { s: s.t, m });
                base.iter().map(|b| b * &c).collect()
            };
            let (ri, ci) = (indices(&s.f), indices(&s.e));
            let blk = stacked_block(&ms, &ri, &ci);
            Ok(ConditionRow { dist: d, t: s.t, norm: restricted_norm(&grid, &blk, ri.len(), p, i as u64) })
        })
        .collect::<Result<_>>()?;
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.norm > crate::operator::NORM_FLOOR)
        .map(|r| ((r.t / (r.dist * r.dist)).ln(), r.norm.ln()))
        .collect();
    let (exponent, r2) = linear_fit(&pts);
    let flat = m == 0 || exponent.abs() < 0.05;
    Ok(OperatorConditionReport { operator: handle.name(), p, m, rows, exponent, r2, flat, exact: p == 2.0 })
}

/// Slope and R² of the least-squares line.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    if pts.len() < 2 {
        return (0.0, 0.0);
    }
    let n = pts.len() as f64;
    let xm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - xm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - ym).powi(2)).sum();
    if sxx == 0.0 {
        return (0.0, 0.0);
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, r2)
}

/// Pointwise Euclidean length of a vector field.
pub fn magnitude(components: &[Vec<C64>]) -> Vec<f64> {
    let n = components[0].len();
    (0..n).map(|x| components.iter().map(|c| c[x].norm_sqr()).sum::<f64>().sqrt()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HardyTarget {
    Riesz,
    GFunction,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioRow {
    pub index: usize,
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioTable {
    pub rows: Vec<RatioRow>,
    pub max_ratio: f64,
    pub skipped: usize,
}

impl RatioTable {
    fn from_rows(rows: Vec<RatioRow>) -> Self {
        let max_ratio = rows.iter().filter_map(|r| r.ratio).fold(0.0, f64::max);
        let skipped = rows.iter().filter(|r| r.ratio.is_none()).count();
        Self { rows, max_ratio, skipped }
    }
}

/// ‖T f‖_{L(ω)} / ‖f‖_{H_{ω,L}} with T = ∇L^{−1/2} or g_L; zero inputs skipped.
pub fn riesz_hardy_probe(
    op: &EllipticOperator,
    fixtures: &[Vec<C64>],
    w: &OrliczFunction,
    target: HardyTarget,
    time: &TimeGrid,
) -> Result<RatioTable> {
    let cell = op.grid().cell_measure();
    let rows = fixtures
        .iter()
        .enumerate()
        .map(|(index, f)| {
            let den = hardy_norm(op, f, w, time)?;
            let vals = match target {
                HardyTarget::Riesz => magnitude(&op.riesz_apply(f, KernelPolicy::Project)?),
                HardyTarget::GFunction => g_function(op, f, time)?,
            };
            let num = luxemburg_norm_uniform(&vals, cell, w)?;
            let ratio = if den == 0.0 { None } else { Some(num / den) };
            Ok(RatioRow { index, numerator: num, denominator: den, ratio })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RatioTable::from_rows(rows))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FracIntegralReport {
    pub target_norm: f64,
    pub source_norm: f64,
    pub ratio: f64,
    pub index_residual: f64,
    pub p_tilde: f64,
}

/// Guard for n(1/p_ω − 1/q) = 2γ; returns the residual.
pub fn check_index_relation(dim: usize, pw: f64, q: f64, gamma: f64) -> Result<f64> {
    let res = dim as f64 * (1.0 / pw - 1.0 / q) - 2.0 * gamma;
    if res.abs() > INDEX_TOL {
        return Err(Error::Guard(format!(
            "n(1/p_ω−1/q) = {} ≠ 2γ = {} (residual {res:e})",
            dim as f64 * (1.0 / pw - 1.0 / q),
            2.0 * gamma
        )));
    }
    Ok(res)
}

/// ‖L^{−γ}f‖_{H_{ω̃,L}} against ‖f‖_{H_{ω,L}}.
pub fn frac_integral_probe(op: &EllipticOperator, f: &[C64], w: &OrliczFunction, gamma: f64, q: f64, time: &TimeGrid) -> Result<FracIntegralReport> {
    let dim = op.grid().dim;
    let index_residual = check_index_relation(dim, w.declared_pw, q, gamma)?;
    let b = assumption_b_transform(w, q)?;
    let g = if gamma == 0.0 { f.to_vec() } else { op.frac_neg_power(gamma, f, KernelPolicy::Project)? };
    let target_norm = hardy_norm(op, &g, &b.omega_tilde, time)?;
    let source_norm = hardy_norm(op, f, w, time)?;
    let ratio = if source_norm == 0.0 { f64::NAN } else { target_norm / source_norm };
    Ok(FracIntegralReport { target_norm, source_norm, ratio, index_residual, p_tilde: b.p_tilde })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassicalAtom {
    pub support_ok: bool,
    pub norm: f64,
    /// multiple · |B|^{−1/2} ρ(|B|)^{−1}.
    pub bound: f64,
    pub multiple: f64,
    /// (1 + slack) − norm/bound.
    pub norm_margin: f64,
    pub mean: f64,
    pub mean_ok: bool,
    pub degenerate: bool,
    pub pass: bool,
}

/// Support in B, ‖b‖₂ ≤ multiple·|B|^{−1/2}ρ(|B|)^{−1}(1 + slack) and
/// |Σ b h^n| ≤ 1e−8 ‖b‖₂ |B|^{1/2}.
pub fn verify_classical_atom(grid: &Grid, b: &[C64], ball: &Ball, w: &OrliczFunction, multiple: f64, slack: f64) -> Result<ClassicalAtom> {
    let mask = ball.mask(grid);
    let measure = ball.measure(grid);
    if !(measure > 0.0) {
        return Err(Error::Domain("ball contains no cells".into()));
    }
    let cell = grid.cell_measure();
    let support_ok = b.iter().zip(&mask).all(|(v, m)| *m || v.norm() == 0.0);
    let norm = l2(b) * cell.sqrt();
    let bound = multiple * measure.powf(-0.5) / w.rho(measure)?;
    let norm_margin = 1.0 + slack - norm / bound;
    let mean = (b.iter().sum::<C64>() * cell).norm();
    let mean_ok = mean <= MEAN_TOL * norm * measure.sqrt();
    let degenerate = norm == 0.0;
    Ok(ClassicalAtom { support_ok, norm, bound, multiple, norm_margin, mean, mean_ok, degenerate, pass: support_ok && mean_ok && norm_margin >= 0.0 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PieceKind {
    /// v χ_k − m_k χ̃_k
    Local,
    /// N_{k+1}(χ̃_{k+1} − χ̃_k)
    Transfer,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassicalPiece {
    pub kind: PieceKind,
    pub k: u32,
    pub values: Vec<C64>,
    pub ball: Ball,
    pub certificate: ClassicalAtom,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassicalConstruction {
    pub pieces: Vec<ClassicalPiece>,
    /// m_k per nonempty annulus.
    pub annulus_means: Vec<(u32, C64)>,
    /// ‖v − Σ pieces‖₂ / ‖v‖₂.
    pub residual: f64,
    /// |∫v| before telescoping.
    pub total_mean: f64,
}

impl ClassicalConstruction {
    /// max over local pieces of |∫M_k| / (‖M_k‖₂ |B_k|^{1/2}).
    pub fn worst_local_mean(&self, grid: &Grid) -> f64 {
        self.pieces
            .iter()
            .filter(|p| p.kind == PieceKind::Local && !p.certificate.degenerate)
            .map(|p| p.certificate.mean / (p.certificate.norm * p.ball.measure(grid).sqrt()))
            .fold(0.0, f64::max)
    }

    pub fn all_pass(&self) -> bool {
        self.pieces.iter().all(|p| p.certificate.pass)
    }
}

fn ball_over(grid: &Grid, center: [f64; 2], r: f64) -> Ball {
    // Past half the torus diameter the ball is the whole torus.
    let radius = if r >= grid.max_dist() { grid.max_dist() + grid.h() } else { r };
    Ball { center, radius }
}

/// Splits a mean-zero v along the dyadic annuli of B into local mean-zero
/// pieces and telescoped transfer pieces, each certified against
/// multiple·2^{−kε}|2^kB|^{−1/2}ρ(|2^kB|)^{−1}.
pub fn annular_split(grid: &Grid, v: &[C64], ball: &Ball, w: &OrliczFunction, eps: f64, multiple: f64, slack: f64) -> Result<ClassicalConstruction> {
    let cell = grid.cell_measure();
    let nv = l2(v) * cell.sqrt();
    let total = v.iter().sum::<C64>() * cell;
    let scale = nv * grid.volume().sqrt();
    if total.norm() > MEAN_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Numerical(format!("∫v = {:.3e} is not zero; the transfer pieces would not telescope", total.norm())));
    }
    let (annulus, j_max) = annulus_index(grid, ball);
    let shells: Vec<u32> = (0..=j_max).filter(|j| annulus.contains(j)).collect();
    let chi_tilde = |j: u32| -> Vec<C64> {
        let cnt = annulus.iter().filter(|a| **a == j).count() as f64;
        annulus.iter().map(|a| C64::new(if *a == j { 1.0 / (cnt * cell) } else { 0.0 }, 0.0)).collect()
    };
    let means: Vec<(u32, C64)> = shells
        .iter()
        .map(|j| (*j, v.iter().zip(&annulus).filter(|(_, a)| **a == *j).map(|(x, _)| *x).sum::<C64>() * cell))
        .collect();
    let mut pieces = Vec::new();
    for (j, mk) in &means {
        let ct = chi_tilde(*j);
        let vals: Vec<C64> = v.iter().zip(&annulus).zip(&ct).map(|((x, a), c)| if *a == *j { x - mk * c } else { C64::new(0.0, 0.0) }).collect();
        let b = ball_over(grid, ball.center, 2f64.powi(*j as i32) * ball.radius);
        let mult = multiple * 2f64.powf(-(*j as f64) * eps);
        let certificate = verify_classical_atom(grid, &vals, &b, w, mult, slack)?;
        pieces.push(ClassicalPiece { kind: PieceKind::Local, k: *j, values: vals, ball: b, certificate });
    }
    // N_i = Σ_{l ≥ i} m_l over the nonempty shells in order.
    for i in 0..means.len().saturating_sub(1) {
        let n_next: C64 = means[i + 1..].iter().map(|(_, m)| *m).sum();
        let (j0, j1) = (means[i].0, means[i + 1].0);
        let (c0, c1) = (chi_tilde(j0), chi_tilde(j1));
        let vals: Vec<C64> = c0.iter().zip(&c1).map(|(a, b)| (b - a) * n_next).collect();
        let b = ball_over(grid, ball.center, 2f64.powi(j1 as i32) * ball.radius);
        let mult = multiple * 2f64.powf(-(j0 as f64) * eps);
        let certificate = verify_classical_atom(grid, &vals, &b, w, mult, slack)?;
        pieces.push(ClassicalPiece { kind: PieceKind::Transfer, k: j0, values: vals, ball: b, certificate });
    }
    let mut rec = vec![C64::new(0.0, 0.0); v.len()];
    for p in &pieces {
        for (r, x) in rec.iter_mut().zip(&p.values) {
            *r += x;
        }
    }
    let diff: Vec<C64> = v.iter().zip(&rec).map(|(a, b)| a - b).collect();
    let residual = if nv == 0.0 { 0.0 } else { l2(&diff) * cell.sqrt() / nv };
    Ok(ClassicalConstruction { pieces, annulus_means: means, residual, total_mean: total.norm() })
}

/// Classical pieces of each component of ∇L^{−1/2}α for a molecule α on B.
pub fn classical_atom_construct(
    op: &EllipticOperator,
    alpha: &[C64],
    ball: &Ball,
    w: &OrliczFunction,
    eps: f64,
    slack: f64,
) -> Result<Vec<ClassicalConstruction>> {
    let comps = op.riesz_apply(alpha, KernelPolicy::Project)?;
    comps
        .iter()
        .map(|v| annular_split(op.grid(), v, ball, w, eps, CLASSICAL_ATOM_MULTIPLE, slack))
        .collect()
}

/// inf{λ > 0 : Σ_j |B_j| ω(‖b_j‖₂ / (λ|B_j|^{1/2})) ≤ 1} for (‖b_j‖₂, |B_j|).
pub fn classical_hardy_value(pieces: &[(f64, f64)], w: &OrliczFunction) -> Result<f64> {
    let terms: Vec<(f64, f64)> = pieces.iter().filter(|(n, _)| *n > 0.0).map(|(n, m)| (*m, n / m.sqrt())).collect();
    if terms.is_empty() {
        return Ok(0.0);
    }
    let hint = terms.iter().map(|t| t.1).fold(0.0, f64::max);
    solve_unit_level(|lam| terms.iter().map(|(m, r)| m * w.value(r / lam)).sum(), hint)
}

/// (‖λ b‖₂, |B|) for every piece of a list of constructions with weights λ.
pub fn weighted_piece_norms(grid: &Grid, parts: &[(f64, &ClassicalConstruction)]) -> Vec<(f64, f64)> {
    let cell = grid.cell_measure();
    parts
        .iter()
        .flat_map(|(lam, c)| c.pieces.iter().map(move |p| (lam.abs() * l2(&p.values) * cell.sqrt(), p.ball.measure(grid))))
        .collect()
}

/// p_ω ∈ (n/(n+1), 1], needed by the classical atom construction.
pub fn require_embedding_range(dim: usize, w: &OrliczFunction) -> Result<()> {
    let lo = dim as f64 / (dim as f64 + 1.0);
    let pw = w.declared_pw;
    if !(pw > lo && pw <= 1.0) {
        return Err(Error::Guard(format!("p_ω={pw} ∉ (n/(n+1), 1] = ({lo}, 1]")));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainRow {
    pub index: usize,
    pub hardy: f64,
    pub classical: f64,
    pub ratio: Option<f64>,
    pub worst_molecule_mean: f64,
    pub worst_piece_margin: f64,
    pub worst_reconstruction: f64,
    pub worst_local_mean: f64,
    pub all_pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChainInput {
    /// Split ∇L^{−1/2}α_j (Riesz chain).
    Riesz,
    /// Split α_j itself (embedding).
    Identity,
}

/// Molecular decomposition, then the classical splitting of each molecule
/// (or of its Riesz image), and the classical value against ‖f‖_{H_{ω,L}}.
pub fn classical_chain(
    op: &EllipticOperator,
    fixtures: &[Vec<C64>],
    w: &OrliczFunction,
    time: &TimeGrid,
    input: ChainInput,
    slack: f64,
) -> Result<Vec<ChainRow>> {
    let grid = *op.grid();
    require_embedding_range(grid.dim, w)?;
    let params = MoleculeParams::defaults(grid.dim, w);
    fixtures
        .iter()
        .enumerate()
        .map(|(index, f)| {
            let hardy = hardy_norm(op, f, w, time)?;
            let (dec, _) = molecular_decompose(op, f, w, params.m, params.eps, DEFAULT_GAMMA, time)?;
            let mut worst_molecule_mean = 0.0f64;
            let mut constructions = Vec::new();
            for mol in &dec.molecules {
                let nm = l2(&mol.values);
                if nm > 0.0 {
                    worst_molecule_mean = worst_molecule_mean.max(mol.values.iter().sum::<C64>().norm() / nm);
                }
                let cs = match input {
                    ChainInput::Riesz => classical_atom_construct(op, &mol.values, &mol.ball, w, params.eps, slack)?,
                    ChainInput::Identity => vec![annular_split(&grid, &mol.values, &mol.ball, w, params.eps, CLASSICAL_ATOM_MULTIPLE, slack)?],
                };
                for c in cs {
                    constructions.push((mol.lambda, c));
                }
            }
            let refs: Vec<(f64, &ClassicalConstruction)> = constructions.iter().map(|(l, c)| (*l, c)).collect();
            let classical = classical_hardy_value(&weighted_piece_norms(&grid, &refs), w)?;
            let worst_piece_margin = constructions.iter().flat_map(|(_, c)| c.pieces.iter().map(|p| p.certificate.norm_margin)).fold(f64::INFINITY, f64::min);
            let worst_reconstruction = constructions.iter().map(|(_, c)| c.residual).fold(0.0, f64::max);
            let worst_local_mean = constructions.iter().map(|(_, c)| c.worst_local_mean(&grid)).fold(0.0, f64::max);
            let all_pass = constructions.iter().all(|(_, c)| c.all_pass());
            Ok(ChainRow {
                index,
                hardy,
                classical,
                ratio: if hardy == 0.0 { None } else { Some(classical / hardy) },
                worst_molecule_mean,
                worst_piece_margin,
                worst_reconstruction,
                worst_local_mean,
                all_pass,
            })
        })
        .collect()
}

/// Classical value of the molecular pieces against ‖f‖_{H_{ω,L}}.
pub fn embedding_probe(op: &EllipticOperator, fixtures: &[Vec<C64>], w: &OrliczFunction, time: &TimeGrid) -> Result<Vec<ChainRow>> {
    classical_chain(op, fixtures, w, time, ChainInput::Identity, crate::hardy::DEFAULT_SLACK)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn band_limited(n: usize, kmax: usize, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = vec![C64::new(0.0, 0.0); n];
        for k in 1..=kmax {
            let c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) / k as f64;
            for (x, v) in u.iter_mut().enumerate() {
                *v += c * C64::new(0.0, 2.0 * PI * (k * x) as f64 / n as f64).exp();
            }
        }
        u
    }

    #[test]
    fn index_guard() {
        assert!(check_index_relation(1, 2.0 / 3.0, 1.0, 0.25).is_ok());
        let e = check_index_relation(1, 0.8, 1.0, 0.25).unwrap_err().to_string();
        assert!(e.contains("residual"));
    }

    #[test]
    fn frac_integral_zero_order_is_identity() {
        let g = Grid::unit(1, 32).unwrap();
        let op = EllipticOperator::identity(g).unwrap();
        let time = TimeGrid::standard(&g, 16).unwrap();
        let w = OrliczFunction::power(0.8);
        let f = band_limited(32, 4, 2);
        let r = frac_integral_probe(&op, &f, &w, 0.0, 0.8, &time).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-8, "{}", r.ratio);
    }

    #[test]
    fn identity_handle_is_flat() {
        let g = Grid::unit(1, 32).unwrap();
        let op = EllipticOperator::identity(g).unwrap();
        let s = standard_condition_samples(&g, 6, 4, 0.01, 0.1, 4);
        let r = offdiagonal_condition_probe(&op, &IdentityHandle, 2.0, 0, &s).unwrap();
        assert!(r.flat);
        assert!(r.rows.iter().all(|x| x.norm == 0.0));
    }

    #[test]
    fn riesz_condition_decays_like_t_over_d2() {
        let g = Grid::unit(1, 64).unwrap();
        let op = EllipticOperator::identity(g).unwrap();
        let s = standard_condition_samples(&g, 12, 8, 1e-3, 2e-2, 6);
        for m in [1u32, 2] {
            let r = offdiagonal_condition_probe(&op, &RieszHandle, 2.0, m, &s).unwrap();
            assert!(r.exponent >= 0.8 * m as f64, "M={m}: exponent {}", r.exponent);
        }
    }

    #[test]
    fn stacked_norm_matches_g_function() {
        let g = Grid::unit(1, 16).unwrap();
        let op = EllipticOperator::identity(g).unwrap();
        let time = TimeGrid::standard(&g, 16).unwrap();
        let h = GFunctionHandle { time: time.clone() };
        let ms = h.matrices(&op).unwrap();
        let f = band_limited(16, 3, 4);
        let direct = g_function(&op, &f, &time).unwrap();
        for x in 0..16 {
            let s: f64 = ms.iter().map(|m| linalg::mat_vec(m, &f)[x].norm_sqr()).sum::<f64>().sqrt();
            assert!((s - direct[x]).abs() < 1e-10);
        }
    }

    #[test]
    fn annular_split_reconstructs_and_is_mean_zero() {
        let g = Grid::unit(1, 64).unwrap();
        let w = OrliczFunction::power(0.8);
        let mut v = band_limited(64, 6, 7);
        let m = v.iter().sum::<C64>() / 64.0;
        v.iter_mut().for_each(|x| *x -= m);
        let ball = Ball { center: g.center(20), radius: 3.0 * g.h() };
        let c = annular_split(&g, &v, &ball, &w, 1.0, 1e6, 0.1).unwrap();
        assert!(c.residual < 1e-12);
        assert!(c.worst_local_mean(&g) < 1e-12);
        assert!(c.pieces.iter().all(|p| p.certificate.support_ok && p.certificate.mean_ok));
        let mut shifted = v.clone();
        shifted[0] += 1.0;
        assert!(annular_split(&g, &shifted, &ball, &w, 1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn classical_atom_checks() {
        let g = Grid::unit(1, 64).unwrap();
        let w = OrliczFunction::power(1.0);
        let ball = Ball { center: g.center(10), radius: 2.5 * g.h() };
        let z = vec![C64::new(0.0, 0.0); 64];
        let c = verify_classical_atom(&g, &z, &ball, &w, 1.0, 0.1).unwrap();
        assert!(c.degenerate && c.pass);
        let mut b = z.clone();
        b[10] = C64::new(1.0, 0.0);
        b[11] = C64::new(1.0, 0.0);
        assert!(!verify_classical_atom(&g, &b, &ball, &w, 1e6, 0.1).unwrap().mean_ok);
    }

    #[test]
    fn classical_value_of_single_atom() {
        // |B| (n / (λ|B|^{1/2}))^p = 1 ⇒ λ = n |B|^{1/p − 1/2}.
        let w = OrliczFunction::power(0.8);
        let (n, m) = (3.0f64, 0.125f64);
        let v = classical_hardy_value(&[(n, m)], &w).unwrap();
        let want = n * m.powf(1.0 / 0.8 - 0.5);
        assert!((v - want).abs() < 1e-9 * want);
        assert_eq!(classical_hardy_value(&[], &w).unwrap(), 0.0);
    }

    #[test]
    fn embedding_range_guard() {
        let g = Grid::unit(1, 32).unwrap();
        let op = EllipticOperator::identity(g).unwrap();
        let time = TimeGrid::standard(&g, 16).unwrap();
        let w = OrliczFunction::power(0.5);
        assert!(embedding_probe(&op, &[band_limited(32, 3, 1)], &w, &time).is_err());
    }

    #[test]
    fn riesz_probe_skips_zero() {
        let g = Grid::unit(1, 32).unwrap();
        let op = EllipticOperator::identity(g).unwrap();
        let time = TimeGrid::standard(&g, 16).unwrap();
        let w = OrliczFunction::power(1.0);
        let t = riesz_hardy_probe(&op, &[vec![C64::new(0.0, 0.0); 32], band_limited(32, 4, 3)], &w, HardyTarget::Riesz, &time).unwrap();
        assert_eq!(t.skipped, 1);
        assert!(t.max_ratio > 0.0 && t.max_ratio.is_finite());
    }
}
