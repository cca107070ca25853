//! Empirical off-diagonal decay and L^p boundedness of semigroup families.

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EllipticOperator, Func};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::C64;

/// Norms below this are treated as numerically zero and left out of the fit.
pub const NORM_FLOOR: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeFamily {
    /// e^{−tL}
    Heat,
    /// tL e^{−tL}
    TimesHeat,
    /// (I + tL)^{−1}
    Resolvent,
}

impl ProbeFamily {
    pub fn func(self, t: f64) -> Func {
        match self {
            ProbeFamily::Heat => Func::Heat { s: t },
            ProbeFamily::TimesHeat => Func::HeatPower { t: t.sqrt(), k: 1 },
            ProbeFamily::Resolvent => Func::Resolvent { t },
        }
    }

    /// Default log-spaced probe times for separation d: the heat families on
    /// [d²/40, d²/2], the resolvent on [d²/400, d²/16]. Shorter times push the
    /// heat norms into the lattice (non-Gaussian) tail.
    pub fn standard_times(self, d: f64, count: usize) -> Vec<f64> {
        let (lo, hi) = match self {
            ProbeFamily::Heat | ProbeFamily::TimesHeat => (40.0, 2.0),
            ProbeFamily::Resolvent => (400.0, 16.0),
        };
        let count = count.max(2);
        (0..count).map(|i| d * d / lo * (lo / hi).powf(i as f64 / (count - 1) as f64)).collect()
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "heat" => Ok(Self::Heat),
            "times_heat" | "theat" => Ok(Self::TimesHeat),
            "resolvent" => Ok(Self::Resolvent),
            _ => Err(Error::Config(format!("unknown probe family '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GaffneyReport {
    pub family: ProbeFamily,
    pub dist: f64,
    pub ts: Vec<f64>,
    pub norms: Vec<f64>,
    /// Fit of log‖χ_F T_t χ_E‖ ≈ log C − (d²/(c t))^β.
    pub beta: f64,
    pub c: f64,
    pub log_c: f64,
    pub r2: f64,
    pub points_used: usize,
    pub below_floor: bool,
}

fn block(m: &CMat, rows: &[usize], cols: &[usize]) -> CMat {
    Mat::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

fn indices(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i).collect()
}

/// Minimum torus distance between cell centers of E and F.
pub fn set_distance(op: &EllipticOperator, e: &[bool], f: &[bool]) -> f64 {
    let g = op.grid();
    let (ie, jf) = (indices(e), indices(f));
    let mut d = f64::INFINITY;
    for &a in &ie {
        for &b in &jf {
            d = d.min(g.dist(a, b));
        }
    }
    d
}

pub fn gaffney_probe(op: &EllipticOperator, e: &[bool], f: &[bool], family: ProbeFamily, ts: &[f64]) -> Result<GaffneyReport> {
    let n = op.cells();
    if e.len() != n || f.len() != n {
        return Err(Error::Config("set masks do not match the grid".into()));
    }
    let (ie, jf) = (indices(e), indices(f));
    if ie.is_empty() || jf.is_empty() {
        return Err(Error::Domain("E and F must be nonempty".into()));
    }
    let dist = set_distance(op, e, f);
    if !(dist > 0.0) {
        return Err(Error::Domain("E and F must be at positive distance".into()));
    }
    if ts.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Domain("probe times must be positive".into()));
    }
    let norms: Vec<f64> = ts.iter().map(|&t| linalg::sigma_max(&block(&op.func_matrix(family.func(t)), &jf, &ie))).collect();
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(&norms)
        .filter(|(_, nm)| **nm > NORM_FLOOR)
        .map(|(t, nm)| (dist * dist / t, nm.ln()))
        .collect();
    let mut rep = GaffneyReport {
        family,
        dist,
        ts: ts.to_vec(),
        norms,
        beta: f64::NAN,
        c: f64::NAN,
        log_c: f64::NAN,
        r2: f64::NAN,
        points_used: pts.len(),
        below_floor: pts.len() < 3,
    };
    if rep.below_floor {
        return Ok(rep);
    }
    if let Some((beta, a, b, r2)) = fit_decay(&pts) {
        rep.beta = beta;
        rep.log_c = a;
        rep.c = b.powf(-1.0 / beta);
        rep.r2 = r2;
    }
    Ok(rep)
}

/// Least squares for y ≈ a − b·x^β with b > 0, scanning β on a fine grid.
/// Returns (β, a, b, R²).
pub fn fit_decay(pts: &[(f64, f64)]) -> Option<(f64, f64, f64, f64)> {
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let sst: f64 = pts.iter().map(|p| (p.1 - ym).powi(2)).sum();
    let mut best: Option<(f64, f64, f64, f64)> = None;
    let mut beta = 0.05;
    while beta <= 3.0 + 1e-12 {
        let zs: Vec<f64> = pts.iter().map(|p| p.0.powf(beta)).collect();
        let zm = zs.iter().sum::<f64>() / zs.len() as f64;
        let szz: f64 = zs.iter().map(|z| (z - zm).powi(2)).sum();
        if szz > 0.0 {
            let szy: f64 = zs.iter().zip(pts).map(|(z, p)| (z - zm) * (p.1 - ym)).sum();
            let slope = szy / szz;
            if slope < 0.0 {
                let a = ym - slope * zm;
                let sse: f64 = zs.iter().zip(pts).map(|(z, p)| (p.1 - a - slope * z).powi(2)).sum();
                if best.map_or(true, |b| sse < b.3) {
                    best = Some((beta, a, -slope, sse));
                }
            }
        }
        beta += 0.0025;
    }
    best.map(|(beta, a, b, sse)| (beta, a, b, if sst > 0.0 { 1.0 - sse / sst } else { 1.0 }))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LpRow {
    pub p: f64,
    pub t: f64,
    pub norm: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LpReport {
    pub family: ProbeFamily,
    pub rows: Vec<LpRow>,
    /// (p, sup over t) pairs.
    pub sup_by_p: Vec<(f64, f64)>,
}

fn lp_norm(v: &[C64], p: f64) -> f64 {
    if p.is_infinite() {
        v.iter().map(|z| z.norm()).fold(0.0, f64::max)
    } else {
        v.iter().map(|z| z.norm().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

fn duality_map(v: &[C64], p: f64) -> Vec<C64> {
    v.iter()
        .map(|z| {
            let r = z.norm();
            if r == 0.0 {
                C64::new(0.0, 0.0)
            } else {
                z / r * r.powf(p - 1.0)
            }
        })
        .collect()
}

/// Lower estimate of ‖T‖_{p→p} (exact for p ∈ {1, 2, ∞}); uniform cell
/// measures cancel.
pub fn operator_p_norm(t: &CMat, p: f64, seed: u64) -> f64 {
    let (nr, nc) = (t.nrows(), t.ncols());
    if p == 2.0 {
        return linalg::sigma_max(t);
    }
    if p == 1.0 {
        return (0..nc).map(|j| (0..nr).map(|i| t[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max);
    }
    if p.is_infinite() {
        return (0..nr).map(|i| (0..nc).map(|j| t[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max);
    }
    let q = p / (p - 1.0);
    let th = linalg::adjoint(t);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts: Vec<Vec<C64>> = Vec::new();
    starts.push(vec![C64::new(1.0, 0.0); nc]);
    let mut delta = vec![C64::new(0.0, 0.0); nc];
    delta[0] = C64::new(1.0, 0.0);
    starts.push(delta);
    for _ in 0..4 {
        starts.push((0..nc).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect());
    }
    let mut best = 0.0f64;
    for mut x in starts {
        let nx = lp_norm(&x, p);
        x.iter_mut().for_each(|v| *v /= nx);
        for _ in 0..60 {
            let y = linalg::mat_vec(t, &x);
            let ny = lp_norm(&y, p);
            best = best.max(ny);
            let z = linalg::mat_vec(&th, &duality_map(&y, p));
            let w = duality_map(&z, q);
            let nw = lp_norm(&w, p);
            if nw == 0.0 {
                break;
            }
            let next: Vec<C64> = w.iter().map(|v| v / nw).collect();
            let diff = next.iter().zip(&x).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            x = next;
            if diff < 1e-10 {
                break;
            }
        }
        best = best.max(lp_norm(&linalg::mat_vec(t, &x), p));
    }
    best
}

pub fn lp_boundedness_probe(op: &EllipticOperator, family: ProbeFamily, ps: &[f64], ts: &[f64], seed: u64) -> Result<LpReport> {
    if ps.iter().any(|p| !(*p >= 1.0)) {
        return Err(Error::Domain("exponents must be ≥ 1".into()));
    }
    if ts.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Domain("probe times must be positive".into()));
    }
    let mut rows = Vec::new();
    for &t in ts {
        let m = op.func_matrix(family.func(t));
        for &p in ps {
            rows.push(LpRow { p, t, norm: operator_p_norm(&m, p, seed) });
        }
    }
    let sup_by_p = ps
        .iter()
        .map(|&p| (p, rows.iter().filter(|r| r.p == p).map(|r| r.norm).fold(0.0, f64::max)))
        .collect();
    Ok(LpReport { family, rows, sup_by_p })
}
