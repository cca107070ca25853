//! BMO norms adapted to L*, ρ-Carleson norms of the associated square
//! measures, the H_{ω,L}–BMO pairing and the q-independence probe.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::hardy::c_tilde_m;
use crate::operator::{inner, EllipticOperator, Func};
use crate::orlicz::OrliczFunction;
use crate::tent_field::TimeGrid;
use crate::C64;

/// Relative tolerance for comparisons that are exact up to rounding.
pub const HOLDER_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BmoVariant {
    Semigroup,
    Resolvent,
}

/// Grid-centered balls with radii from a fixed list.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BallLadder {
    pub radii: Vec<f64>,
}

impl BallLadder {
    /// {2h, 4h, …, L/2}.
    pub fn dyadic(grid: &Grid) -> Self {
        let mut radii = Vec::new();
        let mut r = 2.0 * grid.h();
        while r <= grid.length / 2.0 * (1.0 + 1e-12) {
            radii.push(r);
            r *= 2.0;
        }
        Self { radii }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BallRow {
    pub center: usize,
    pub radius: f64,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BmoReport {
    pub variant: BmoVariant,
    pub q: f64,
    pub m: u32,
    pub rows: Vec<BallRow>,
    pub norm: f64,
}

fn cancellation(variant: BmoVariant, r: f64, m: u32) -> Func {
    match variant {
        BmoVariant::Semigroup => Func::OneMinusHeat { s: r * r, m },
        BmoVariant::Resolvent => Func::OneMinusResolvent { s: r * r, m },
    }
}

/// sup_B ρ(|B|)^{−1} [(1/|B|) ∫_B |(I − e^{−r_B²L*})^M f|^q]^{1/q} (or the
/// resolvent cancellation) over the ladder.
pub fn bmo_report(
    op_star: &EllipticOperator,
    f: &[C64],
    w: &OrliczFunction,
    q: f64,
    m: u32,
    ladder: &BallLadder,
    variant: BmoVariant,
) -> Result<BmoReport> {
    if !(q > 0.0) {
        return Err(Error::Domain(format!("q must be positive, got {q}")));
    }
    if m == 0 {
        return Err(Error::Domain("M must be at least 1".into()));
    }
    let grid = *op_star.grid();
    let funcs: Vec<Func> = ladder.radii.iter().map(|r| cancellation(variant, *r, m)).collect();
    let osc = op_star.apply_family(&funcs, f);
    let mut rows = Vec::new();
    for (r, u) in ladder.radii.iter().zip(&osc) {
        let st = grid.ball_weights(*r);
        let rho = w.rho(st.measure)?;
        let mag: Vec<f64> = u.iter().map(|v| v.norm()).collect();
        let vals: Vec<f64> = (0..grid.cells()).into_par_iter().map(|x| st.average_pow(&grid, &mag, x, q).powf(1.0 / q) / rho).collect();
        rows.extend(vals.into_iter().enumerate().map(|(x, value)| BallRow { center: x, radius: *r, value }));
    }
    let norm = rows.iter().map(|r| r.value).fold(0.0, f64::max);
    Ok(BmoReport { variant, q, m, rows, norm })
}

pub fn bmo_norm(op_star: &EllipticOperator, f: &[C64], w: &OrliczFunction, q: f64, m: u32, ladder: &BallLadder) -> Result<BmoReport> {
    bmo_report(op_star, f, w, q, m, ladder, BmoVariant::Semigroup)
}

pub fn bmo_resolvent_norm(op_star: &EllipticOperator, f: &[C64], w: &OrliczFunction, q: f64, m: u32, ladder: &BallLadder) -> Result<BmoReport> {
    bmo_report(op_star, f, w, q, m, ladder, BmoVariant::Resolvent)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CarlesonReport {
    pub m: u32,
    pub rows: Vec<BallRow>,
    pub norm: f64,
}

/// sup_B (|B| ρ(|B|)²)^{−1} ∬_{B̂} |(t²L*)^M e^{−t²L*}f|² dx dt/t, where
/// (y, t) ∈ B̂ iff t ≤ r_B − |y − x_B|.
pub fn carleson_norm(
    op_star: &EllipticOperator,
    f: &[C64],
    w: &OrliczFunction,
    m: u32,
    ladder: &BallLadder,
    time: &TimeGrid,
) -> Result<CarlesonReport> {
    if m == 0 {
        return Err(Error::Domain("M must be at least 1".into()));
    }
    let grid = *op_star.grid();
    let n = grid.cells();
    let funcs: Vec<Func> = time.levels.iter().map(|t| Func::HeatPower { t: *t, k: m }).collect();
    let energy: Vec<Vec<f64>> = op_star
        .apply_family(&funcs, f)
        .into_iter()
        .map(|u| u.into_iter().map(|v| v.norm_sqr() * grid.cell_measure() * time.dlog).collect())
        .collect();
    let offsets = grid.all_offsets();
    let mut rows = Vec::new();
    for r in &ladder.radii {
        let measure = grid.ball_volume(*r);
        let rho = w.rho(measure)?;
        let local: Vec<(crate::grid::Offset, f64)> = offsets
            .iter()
            .map(|d| (*d, grid.offset_norm(*d)))
            .filter(|(_, dist)| *dist < *r)
            .collect();
        let vals: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|x| {
                let mut s = 0.0;
                for (j, t) in time.levels.iter().enumerate() {
                    for (d, dist) in &local {
                        if *t <= r - dist {
                            s += energy[j][grid.shift(x, *d)];
                        }
                    }
                }
                s / (measure * rho * rho)
            })
            .collect();
        rows.extend(vals.into_iter().enumerate().map(|(x, value)| BallRow { center: x, radius: *r, value }));
    }
    let norm = rows.iter().map(|r| r.value).fold(0.0, f64::max);
    Ok(CarlesonReport { m, rows, norm })
}

/// Log ladder wide enough that C̃_M ∫(t²μ)^{M+1}e^{−2t²μ}dt/t = 1 is resolved
/// for every nonzero eigenvalue of the operator.
pub fn pairing_time_grid(op: &EllipticOperator, levels: usize) -> Result<TimeGrid> {
    let (mu_min, mu_max) = op.spectral_bounds();
    TimeGrid::new(1e-2 / mu_max.sqrt(), 10.0 / mu_min.sqrt(), levels)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Pairing {
    pub quadrature: C64,
    pub direct: C64,
}

/// C̃_M Σ_j Δ Σ_x (t²L*)^M e^{−t²L*}f · conj(t²L e^{−t²L}g) h^n, with the
/// direct value Σ f·conj(g) h^n alongside.
pub fn duality_pairing(op: &EllipticOperator, f: &[C64], g: &[C64], m: u32, time: &TimeGrid) -> Result<Pairing> {
    let ct = c_tilde_m(m)?;
    let grid = *op.grid();
    let star = op.adjoint();
    let ff: Vec<Func> = time.levels.iter().map(|t| Func::HeatPower { t: *t, k: m }).collect();
    let gf: Vec<Func> = time.levels.iter().map(|t| Func::HeatPower { t: *t, k: 1 }).collect();
    let a = star.apply_family(&ff, f);
    let b = op.apply_family(&gf, g);
    let mut q = C64::new(0.0, 0.0);
    for (u, v) in a.iter().zip(&b) {
        q += inner(&grid, u, v) * time.dlog;
    }
    Ok(Pairing { quadrature: q * ct, direct: inner(&grid, f, g) })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JohnNirenbergReport {
    pub norms: Vec<(f64, f64)>,
    /// ratios[i][k] = norm(q_i)/norm(q_k), 1 when both vanish.
    pub ratios: Vec<Vec<f64>>,
    pub max_ratio: f64,
    pub holder_ordered: bool,
}

pub fn john_nirenberg_probe(
    op_star: &EllipticOperator,
    f: &[C64],
    w: &OrliczFunction,
    m: u32,
    q_list: &[f64],
    ladder: &BallLadder,
) -> Result<JohnNirenbergReport> {
    let mut qs = q_list.to_vec();
    qs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let norms: Vec<(f64, f64)> = qs.iter().map(|q| Ok((*q, bmo_norm(op_star, f, w, *q, m, ladder)?.norm))).collect::<Result<_>>()?;
    let ratio = |a: f64, b: f64| if a == 0.0 && b == 0.0 { 1.0 } else { a / b };
    let ratios: Vec<Vec<f64>> = norms.iter().map(|(_, a)| norms.iter().map(|(_, b)| ratio(*a, *b)).collect()).collect();
    let max_ratio = ratios.iter().flatten().cloned().fold(0.0, f64::max);
    let holder_ordered = norms.windows(2).all(|p| p[0].1 <= p[1].1 * (1.0 + HOLDER_TOL));
    Ok(JohnNirenbergReport { norms, ratios, max_ratio, holder_ordered })
}
