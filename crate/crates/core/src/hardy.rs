//! The Hardy space H_{ω,L}: its norm, the synthesis operator π_{L,M}, the
//! Calderón reproducing formula, molecular decompositions and molecule
//! certificates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::operator::{EllipticOperator, Func, KernelPolicy, KERNEL_TOL};
use crate::orlicz::{orlicz_integral, OrliczFunction};
use crate::square_maximal::{functional_norm, square_function, Functional, FunctionalKind};
use crate::tent_atoms::{atomic_decompose, AtomicDecomposition, Ball};
use crate::tent_field::{TentField, TimeGrid};
use crate::C64;

pub const DEFAULT_SLACK: f64 = 0.1;
pub const DEFAULT_Q_LIST: [f64; 2] = [2.0, 4.0];
/// Fixed multiple by which π_{L,M}(a) exceeds a normalized molecule.
pub const MOLECULE_MULTIPLE: f64 = 2.0;

fn factorial(m: u32) -> f64 {
    (1..=m).map(f64::from).product()
}

/// C_M with C_M ∫₀^∞ t^{2(M+2)} e^{−2t²} dt/t = 1.
pub fn c_m(m: u32) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("C_M needs M >= 1".into()));
    }
    Ok(2f64.powi(m as i32 + 3) / factorial(m + 1))
}

/// C̃_M with C̃_M ∫₀^∞ t^{2(M+1)} e^{−2t²} dt/t = 1.
pub fn c_tilde_m(m: u32) -> Result<f64> {
    if m == 0 {
        return Err(Error::Domain("C̃_M needs M >= 1".into()));
    }
    Ok(2f64.powi(m as i32 + 2) / factorial(m))
}

/// ∫₀^∞ t^{2a} e^{−2t²} dt/t by the log-midpoint rule; the integrand is
/// analytic and decays at both ends in log t, so the rule converges fast.
pub fn moment_quadrature(a: u32) -> f64 {
    let (lo, hi, n) = (1e-8f64, 12.0f64, 4000);
    let d = (hi.ln() - lo.ln()) / n as f64;
    (0..n)
        .map(|i| {
            let t = (lo.ln() + (i as f64 + 0.5) * d).exp();
            t.powi(2 * a as i32) * (-2.0 * t * t).exp() * d
        })
        .sum()
}

/// Smallest admissible M: ⌊(n/2)(1/p_ω − 1/2)⌋ + 1.
pub fn default_m(dim: usize, pw: f64) -> u32 {
    ((dim as f64 / 2.0) * (1.0 / pw - 0.5)).max(0.0).floor() as u32 + 1
}

/// n(1/p_ω − 1/p_ω⁺) + 1.
pub fn default_eps(dim: usize, w: &OrliczFunction) -> f64 {
    dim as f64 * (1.0 / w.declared_pw - 1.0 / w.declared_pw_plus) + 1.0
}

/// Rejects M ≤ (n/2)(1/p_ω − 1/2) and ε ≤ n(1/p_ω − 1/p_ω⁺).
pub fn check_hypotheses(dim: usize, w: &OrliczFunction, m: u32, eps: f64) -> Result<()> {
    let pw = w.declared_pw;
    let m_floor = dim as f64 / 2.0 * (1.0 / pw - 0.5);
    if !(m as f64 > m_floor) {
        return Err(Error::Guard(format!("M={m} ≤ (n/2)(1/p_ω−1/2)={m_floor}")));
    }
    let e_floor = dim as f64 * (1.0 / pw - 1.0 / w.declared_pw_plus);
    if !(eps > e_floor) {
        return Err(Error::Guard(format!("ε={eps} ≤ n(1/p_ω−1/p_ω⁺)={e_floor}")));
    }
    Ok(())
}

pub fn hardy_norm(op: &EllipticOperator, f: &[C64], w: &OrliczFunction, time: &TimeGrid) -> Result<f64> {
    functional_norm(op, f, Functional::of(FunctionalKind::SL), time, w)
}

/// The tent field t²L e^{−t²L} f on the given time ladder.
pub fn heat_tent_field(op: &EllipticOperator, f: &[C64], time: &TimeGrid) -> Result<TentField> {
    let funcs: Vec<Func> = time.levels.iter().map(|t| Func::HeatPower { t: *t, k: 1 }).collect();
    TentField::from_levels(*op.grid(), time.clone(), op.apply_family(&funcs, f))
}

/// π_{L,M}F = C_M Σ_j Δ (t_j²L)^{M+1} e^{−t_j²L} F(·, t_j).
pub fn pi_lm(op: &EllipticOperator, f: &TentField, m: u32) -> Result<Vec<C64>> {
    let cm = c_m(m)?;
    let terms: Vec<(f64, Func, &[C64])> = f
        .time
        .levels
        .iter()
        .enumerate()
        .filter(|(j, _)| f.level(*j).iter().any(|v| v.norm() > 0.0))
        .map(|(j, t)| (cm * f.time.dlog, Func::HeatPower { t: *t, k: m + 1 }, f.level(j)))
        .collect();
    if terms.is_empty() {
        return Ok(vec![C64::new(0.0, 0.0); op.cells()]);
    }
    Ok(op.apply_sum(&terms))
}

/// C_M Σ_j Δ (t_j²L)^{M+2} e^{−2t_j²L} f, i.e. π_{L,M}(t²Le^{−t²L}f).
pub fn calderon_reproduce(op: &EllipticOperator, f: &[C64], m: u32, time: &TimeGrid) -> Result<Vec<C64>> {
    let cm = c_m(m)?;
    // (t²L)^{M+2} e^{−2t²L} = 2^{−(M+2)} (s²L)^{M+2} e^{−s²L} with s = √2 t.
    let scale = cm * time.dlog / 2f64.powi(m as i32 + 2);
    let terms: Vec<(f64, Func, &[C64])> = time
        .levels
        .iter()
        .map(|t| (scale, Func::HeatPower { t: std::f64::consts::SQRT_2 * t, k: m + 2 }, f))
        .collect();
    Ok(op.apply_sum(&terms))
}

/// ‖f − C_M Σ (t²L)^{M+2}e^{−2t²L}f Δ‖₂ / ‖f‖₂.
pub fn calderon_residual(op: &EllipticOperator, f: &[C64], m: u32, time: &TimeGrid) -> Result<f64> {
    let g = calderon_reproduce(op, f, m, time)?;
    let nf = crate::operator::l2(f);
    if nf == 0.0 {
        return Ok(0.0);
    }
    let d: Vec<C64> = f.iter().zip(&g).map(|(a, b)| a - b).collect();
    Ok(crate::operator::l2(&d) / nf)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MoleculeParams {
    pub m: u32,
    pub eps: f64,
    pub q_list: Vec<f64>,
    pub slack: f64,
    pub multiple: f64,
}

impl MoleculeParams {
    pub fn defaults(dim: usize, w: &OrliczFunction) -> Self {
        Self {
            m: default_m(dim, w.declared_pw),
            eps: default_eps(dim, w),
            q_list: DEFAULT_Q_LIST.to_vec(),
            slack: DEFAULT_SLACK,
            multiple: MOLECULE_MULTIPLE,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificateRow {
    pub k: u32,
    pub j: u32,
    pub q: f64,
    pub measured: f64,
    pub bound: f64,
    /// measured / (multiple · bound).
    pub ratio: f64,
    /// Annulus without cells (torus wrap).
    pub vacuous: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MoleculeCertificate {
    pub rows: Vec<CertificateRow>,
    pub j_max: u32,
    pub worst_ratio: f64,
    pub multiple: f64,
    pub slack: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Molecule {
    pub values: Vec<C64>,
    pub ball: Ball,
    pub ball_measure: f64,
    pub generation: i32,
    pub lambda: f64,
}

/// Annulus index of each cell: 0 inside B, j when 2^{j−1}r ≤ |x − x_B| < 2^j r,
/// with the last annulus taking everything beyond.
pub fn annulus_index(grid: &Grid, ball: &Ball) -> (Vec<u32>, u32) {
    let half = grid.max_dist();
    let mut j_max = 0u32;
    while 2f64.powi(j_max as i32) * ball.radius < half {
        j_max += 1;
    }
    let idx = (0..grid.cells())
        .map(|x| {
            let d = grid.dist_to_point(x, ball.center);
            let mut j = 0u32;
            while j < j_max && d >= 2f64.powi(j as i32) * ball.radius {
                j += 1;
            }
            j
        })
        .collect();
    (idx, j_max)
}

fn cell_count_measure(grid: &Grid, center: [f64; 2], r: f64) -> f64 {
    grid.ball_mask(center, r).iter().filter(|b| **b).count() as f64 * grid.cell_measure()
}

/// Table of ‖(r_B^{−2}L^{−1})^k α‖_{L^q(U_j(B))} against
/// 2^{−jε}|2^jB|^{1/q−1}ρ(|2^jB|)^{−1}, for k ≤ M, every annulus and q.
pub fn verify_molecule(
    op: &EllipticOperator,
    alpha: &[C64],
    ball: &Ball,
    w: &OrliczFunction,
    params: &MoleculeParams,
) -> Result<MoleculeCertificate> {
    let grid = *op.grid();
    if !(ball.radius > 0.0) {
        return Err(Error::Domain("molecule ball needs a positive radius".into()));
    }
    let (annulus, j_max) = annulus_index(&grid, ball);
    let cell = grid.cell_measure();
    let mut powers = vec![alpha.to_vec()];
    let r2 = ball.radius * ball.radius;
    for _ in 0..params.m {
        let prev = powers.last().unwrap();
        let next: Vec<C64> = op.frac_neg_power(1.0, prev, KernelPolicy::Project)?.into_iter().map(|v| v / r2).collect();
        powers.push(next);
    }
    let mut shells = Vec::new();
    for j in 0..=j_max {
        let m = cell_count_measure(&grid, ball.center, 2f64.powi(j as i32) * ball.radius).max(grid.cell_measure());
        shells.push((j, m, w.rho(m)?));
    }
    let rows: Vec<CertificateRow> = powers
        .par_iter()
        .enumerate()
        .flat_map_iter(|(k, u)| {
            let shells = &shells;
            let annulus = &annulus;
            params.q_list.iter().flat_map(move |&q| {
                shells.iter().map(move |&(j, m, rho)| {
                    let mut s = 0.0;
                    let mut cnt = 0usize;
                    for (x, v) in u.iter().enumerate() {
                        if annulus[x] == j {
                            s += v.norm().powf(q);
                            cnt += 1;
                        }
                    }
                    let measured = (s * cell).powf(1.0 / q);
                    let bound = 2f64.powf(-(j as f64) * params.eps) * m.powf(1.0 / q - 1.0) / rho;
                    CertificateRow {
                        k: k as u32,
                        j,
                        q,
                        measured,
                        bound,
                        ratio: measured / (params.multiple * bound),
                        vacuous: cnt == 0,
                    }
                })
            })
        })
        .collect();
    let worst_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(MoleculeCertificate {
        j_max,
        pass: worst_ratio <= 1.0 + params.slack,
        rows,
        worst_ratio,
        multiple: params.multiple,
        slack: params.slack,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MolecularDecomposition {
    pub molecules: Vec<Molecule>,
    /// Λ of the molecular coefficients (copied from the tent decomposition).
    pub lambda_value: f64,
    pub tent_lambda_value: f64,
    pub m: u32,
    pub eps: f64,
    pub residual_l2: f64,
    /// (p, ‖f − Σλα‖_p / ‖f‖_p).
    pub residual_lp: Vec<(f64, f64)>,
    pub uncovered: usize,
}

impl MolecularDecomposition {
    /// Σ λ_j α_j.
    pub fn synthesize(&self, cells: usize) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); cells];
        for mol in &self.molecules {
            for (o, v) in out.iter_mut().zip(&mol.values) {
                *o += v * mol.lambda;
            }
        }
        out
    }

    /// ‖f − Σ_{i<N} λ_i α_i‖_{H_{ω,L}} for N = 0..=count.
    pub fn hardy_tails(&self, op: &EllipticOperator, f: &[C64], w: &OrliczFunction, time: &TimeGrid) -> Result<Vec<f64>> {
        let mut rem = f.to_vec();
        let mut out = vec![hardy_norm(op, &rem, w, time)?];
        for mol in &self.molecules {
            for (r, v) in rem.iter_mut().zip(&mol.values) {
                *r -= v * mol.lambda;
            }
            out.push(hardy_norm(op, &rem, w, time)?);
        }
        Ok(out)
    }
}

fn lp_cells(grid: &Grid, f: &[C64], p: f64) -> f64 {
    (f.iter().map(|v| v.norm().powf(p)).sum::<f64>() * grid.cell_measure()).powf(1.0 / p)
}

/// Decompose t²Le^{−t²L}f into tent atoms and map each through π_{L,M}.
pub fn molecular_decompose(
    op: &EllipticOperator,
    f: &[C64],
    w: &OrliczFunction,
    m: u32,
    eps: f64,
    gamma: f64,
    time: &TimeGrid,
) -> Result<(MolecularDecomposition, AtomicDecomposition)> {
    let grid = *op.grid();
    check_hypotheses(grid.dim, w, m, eps)?;
    if f.len() != grid.cells() {
        return Err(Error::Domain(format!("field has {} cells, grid has {}", f.len(), grid.cells())));
    }
    let frac = op.kernel_fraction(f);
    if frac > KERNEL_TOL {
        return Err(Error::Domain(format!(
            "input has relative kernel mass {frac:.3e}; the reproducing formula does not see constants"
        )));
    }
    let tent = heat_tent_field(op, f, time)?;
    let atoms = atomic_decompose(&tent, w, gamma)?;
    let molecules = atoms
        .atoms
        .par_iter()
        .map(|a| {
            Ok(Molecule {
                values: pi_lm(op, &a.values, m)?,
                ball: a.ball,
                ball_measure: a.ball_measure,
                generation: a.generation,
                lambda: a.lambda,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = MolecularDecomposition {
        molecules,
        lambda_value: atoms.lambda_value,
        tent_lambda_value: atoms.lambda_value,
        m,
        eps,
        residual_l2: 0.0,
        residual_lp: Vec::new(),
        uncovered: atoms.uncovered.len(),
    };
    let s = out.synthesize(grid.cells());
    let d: Vec<C64> = f.iter().zip(&s).map(|(a, b)| a - b).collect();
    for p in [1.0, 1.5, 2.0] {
        let nf = lp_cells(&grid, f, p);
        let r = if nf == 0.0 { 0.0 } else { lp_cells(&grid, &d, p) / nf };
        out.residual_lp.push((p, r));
    }
    out.residual_l2 = out.residual_lp[2].1;
    Ok((out, atoms))
}

/// ∫ω(|λ| S_L α) dx / (|B| ω(|λ| / (|B| ρ(|B|)))).
pub fn molecule_norm_bound_probe(
    op: &EllipticOperator,
    alpha: &[C64],
    ball_measure: f64,
    lambda: f64,
    w: &OrliczFunction,
    time: &TimeGrid,
) -> Result<f64> {
    if !(ball_measure > 0.0) {
        return Err(Error::Domain("ball measure must be positive".into()));
    }
    let s = square_function(op, alpha, Functional::of(FunctionalKind::SL), time)?;
    let scaled: Vec<f64> = s.iter().map(|v| v * lambda.abs()).collect();
    let num = orlicz_integral(&scaled, op.grid().cell_measure(), w);
    let den = ball_measure * w.value(lambda.abs() / (ball_measure * w.rho(ball_measure)?));
    if den == 0.0 {
        return Err(Error::Domain("λ = 0 gives an empty bound".into()));
    }
    Ok(num / den)
}
