//! Fields on the discrete upper half-space, cones, the area functional and
//! tent-space norms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Offset};
use crate::orlicz::{luxemburg_norm_uniform, orlicz_integral, OrliczFunction};
use crate::C64;

pub const MIN_LEVELS: usize = 16;

/// Log-uniform time levels (midpoints) with weight Δ = Δlog t for dt/t.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub levels: Vec<f64>,
    pub dlog: f64,
}

impl TimeGrid {
    /// Unconstrained ladder; used for quadratures whose range is set by the
    /// spectrum rather than the grid.
    pub fn new(t_min: f64, t_max: f64, j: usize) -> Result<Self> {
        if j < MIN_LEVELS {
            return Err(Error::Config(format!("need J >= {MIN_LEVELS} time levels, got {j}")));
        }
        if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) {
            return Err(Error::Config(format!("bad time range [{t_min}, {t_max}]")));
        }
        let (a, b) = (t_min.ln(), t_max.ln());
        let dlog = (b - a) / j as f64;
        let levels = (0..j).map(|i| (a + (i as f64 + 0.5) * dlog).exp()).collect();
        Ok(Self { t_min, t_max, levels, dlog })
    }

    /// Ladder attached to a grid: h/4 ≤ t_min and t_max ≤ L.
    pub fn for_grid(grid: &Grid, t_min: f64, t_max: f64, j: usize) -> Result<Self> {
        let tol = 1e-12 * grid.length;
        if t_min < grid.h() / 4.0 - tol || t_max > grid.length + tol {
            return Err(Error::Config(format!(
                "time range [{t_min}, {t_max}] must lie in [h/4, L] = [{}, {}]",
                grid.h() / 4.0,
                grid.length
            )));
        }
        Self::new(t_min, t_max, j)
    }

    /// [h/4, L] with J levels.
    pub fn standard(grid: &Grid, j: usize) -> Result<Self> {
        Self::for_grid(grid, grid.h() / 4.0, grid.length, j)
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// Complex values F(x, t_j), level-major: `values[j * cells + x]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TentField {
    pub grid: Grid,
    pub time: TimeGrid,
    pub values: Vec<C64>,
}

impl TentField {
    pub fn zeros(grid: Grid, time: TimeGrid) -> Self {
        let n = grid.cells() * time.len();
        Self { grid, time, values: vec![C64::new(0.0, 0.0); n] }
    }

    pub fn from_levels(grid: Grid, time: TimeGrid, levels: Vec<Vec<C64>>) -> Result<Self> {
        if levels.len() != time.len() || levels.iter().any(|l| l.len() != grid.cells()) {
            return Err(Error::Config("level data does not match (J, N^n)".into()));
        }
        Ok(Self { grid, time, values: levels.concat() })
    }

    pub fn cells(&self) -> usize {
        self.grid.cells()
    }

    pub fn level(&self, j: usize) -> &[C64] {
        let n = self.cells();
        &self.values[j * n..(j + 1) * n]
    }

    pub fn level_mut(&mut self, j: usize) -> &mut [C64] {
        let n = self.cells();
        &mut self.values[j * n..(j + 1) * n]
    }

    pub fn get(&self, x: usize, j: usize) -> C64 {
        self.values[j * self.cells() + x]
    }

    pub fn set(&mut self, x: usize, j: usize, v: C64) {
        let n = self.cells();
        self.values[j * n + x] = v;
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn energy(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Σ |F|² h^n Δ over the support, i.e. ∬|F|² dy dt/t.
    pub fn l2_dtdt(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_measure() * self.time.dlog
    }

    /// Number of (x, t_j) cells with nonzero value.
    pub fn support_size(&self) -> usize {
        self.values.iter().filter(|v| v.norm() > 0.0).count()
    }

    /// Max |F − G| over all cells.
    pub fn max_diff(&self, other: &TentField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// Per-level cone offsets {d : |d| < ν t_j} and weights h^n Δ / t_j^n.
#[derive(Clone, Debug)]
pub struct ConeGeometry {
    pub aperture: f64,
    pub offsets: Vec<Vec<Offset>>,
    pub weights: Vec<f64>,
}

impl ConeGeometry {
    pub fn new(grid: &Grid, time: &TimeGrid, aperture: f64) -> Result<Self> {
        if !(aperture > 0.0) {
            return Err(Error::Domain(format!("aperture must be positive, got {aperture}")));
        }
        let offsets = time.levels.iter().map(|t| grid.offsets_within(aperture * t)).collect();
        let weights = time.levels.iter().map(|t| grid.cell_measure() * time.dlog / t.powi(grid.dim as i32)).collect();
        Ok(Self { aperture, offsets, weights })
    }
}

/// A_ν from per-cell energies |F(y, t_j)|² laid out like `TentField::values`.
pub fn area_from_energy(grid: &Grid, cone: &ConeGeometry, energy: &[f64]) -> Vec<f64> {
    let n = grid.cells();
    (0..n)
        .into_par_iter()
        .map(|x| {
            let mut s = 0.0;
            for (j, offs) in cone.offsets.iter().enumerate() {
                let lev = &energy[j * n..(j + 1) * n];
                let mut acc = 0.0;
                for d in offs {
                    acc += lev[grid.shift(x, *d)];
                }
                s += cone.weights[j] * acc;
            }
            s.sqrt()
        })
        .collect()
}

pub fn area_function(f: &TentField, aperture: f64) -> Result<Vec<f64>> {
    let cone = ConeGeometry::new(&f.grid, &f.time, aperture)?;
    Ok(area_from_energy(&f.grid, &cone, &f.energy()))
}

/// (Σ A^p h^n)^{1/p}.
pub fn lp_norm_cells(grid: &Grid, a: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return a.iter().cloned().fold(0.0, f64::max);
    }
    (a.iter().map(|v| v.powf(p)).sum::<f64>() * grid.cell_measure()).powf(1.0 / p)
}

pub fn t2p_norm(f: &TentField, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::Domain(format!("p must be positive, got {p}")));
    }
    Ok(lp_norm_cells(&f.grid, &area_function(f, 1.0)?, p))
}

pub fn t_omega_norm(f: &TentField, w: &OrliczFunction) -> Result<f64> {
    luxemburg_norm_uniform(&area_function(f, 1.0)?, f.grid.cell_measure(), w)
}

/// Offsets ordered by length together with the breakpoints of the radius
/// ladder (m + ½)h ≤ max(L/4, h/2): `ends[m]` is the number of offsets inside
/// the m-th ball. Balls past a quarter period wrap and see the global mean.
fn radius_ladder(grid: &Grid) -> (Vec<Offset>, Vec<usize>) {
    let mut offs = grid.all_offsets();
    offs.sort_by(|a, b| grid.offset_norm(*a).partial_cmp(&grid.offset_norm(*b)).unwrap());
    let h = grid.h();
    let mut ends = Vec::new();
    let mut m = 0usize;
    loop {
        let r = (m as f64 + 0.5) * h;
        if m > 0 && r > grid.length / 4.0 {
            break;
        }
        let cnt = offs.iter().take_while(|d| grid.offset_norm(**d) < r).count();
        if ends.last() != Some(&cnt) {
            ends.push(cnt);
        }
        if cnt == offs.len() {
            break;
        }
        m += 1;
    }
    (offs, ends)
}

/// Discrete maximal function of a mask over centered cell balls of radii
/// (m + ½)h up to L/4: sup_m |B_m(x) ∩ S| / |B_m(x)|.
pub fn mask_maximal(grid: &Grid, mask: &[bool]) -> Vec<f64> {
    let (offs, ends) = radius_ladder(grid);
    (0..grid.cells())
        .into_par_iter()
        .map(|x| {
            let mut best = 0.0f64;
            let mut cnt = 0usize;
            let mut k = 0usize;
            for &e in &ends {
                while k < e {
                    if mask[grid.shift(x, offs[k])] {
                        cnt += 1;
                    }
                    k += 1;
                }
                best = best.max(cnt as f64 / e as f64);
            }
            best
        })
        .collect()
}

/// Global γ-density set F* of a closed set F: x ∈ F* iff every ladder ball
/// around x has |B ∩ F|/|B| ≥ γ.
pub fn gamma_density_set(mask: &[bool], grid: &Grid, gamma: f64) -> Result<Vec<bool>> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("γ must lie in (0, 1), got {gamma}")));
    }
    let comp: Vec<bool> = mask.iter().map(|b| !b).collect();
    let m = mask_maximal(grid, &comp);
    // |B ∩ F|/|B| = 1 − |B ∩ F^c|/|B|.
    Ok(m.iter().map(|v| 1.0 - v >= gamma).collect())
}

/// O* = {x : M(χ_O)(x) > 1 − γ}, the complement of (O^c)*.
pub fn expand_open_set(mask: &[bool], grid: &Grid, gamma: f64) -> Result<Vec<bool>> {
    let comp: Vec<bool> = mask.iter().map(|b| !b).collect();
    Ok(gamma_density_set(&comp, grid, gamma)?.iter().map(|b| !b).collect())
}

/// Per-(x, t_j) membership in the tent over a cell set: t_j ≤ depth(x).
pub fn tent_mask(grid: &Grid, time: &TimeGrid, set: &[bool]) -> Vec<bool> {
    let depth = grid.tent_depth(set);
    let n = grid.cells();
    let mut out = vec![false; n * time.len()];
    for (j, t) in time.levels.iter().enumerate() {
        for x in 0..n {
            out[j * n + x] = *t <= depth[x];
        }
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ApertureRatio {
    pub integral_eta: f64,
    pub integral_nu: f64,
    pub ratio: f64,
}

/// ∫ω(A_η F) and ∫ω(A_ν F) with their ratio (ν over η); 0/0 is reported as 1.
pub fn aperture_ratio_probe(f: &TentField, eta: f64, nu: f64, w: &OrliczFunction) -> Result<ApertureRatio> {
    let cell = f.grid.cell_measure();
    let ie = orlicz_integral(&area_function(f, eta)?, cell, w);
    let inu = orlicz_integral(&area_function(f, nu)?, cell, w);
    let ratio = if ie == 0.0 && inu == 0.0 { 1.0 } else { inu / ie };
    Ok(ApertureRatio { integral_eta: ie, integral_nu: inu, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: Grid, j: usize, seed: u64) -> TentField {
        let time = TimeGrid::standard(&grid, j).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = TentField::zeros(grid, time);
        f.values.iter_mut().for_each(|v| *v = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        f
    }

    #[test]
    fn time_grid_invariants() {
        let g = Grid::unit(1, 64).unwrap();
        let t = TimeGrid::standard(&g, 32).unwrap();
        assert_eq!(t.len(), 32);
        assert!(t.levels[0] > g.h() / 4.0 && *t.levels.last().unwrap() < 1.0);
        let ratio = t.levels[1] / t.levels[0];
        assert!((ratio.ln() - t.dlog).abs() < 1e-12);
        assert!(TimeGrid::standard(&g, 8).is_err());
        assert!(TimeGrid::for_grid(&g, g.h() / 8.0, 1.0, 32).is_err());
        assert!(TimeGrid::for_grid(&g, g.h(), 2.0, 32).is_err());
    }

    #[test]
    fn single_cell_area_function_matches_direct_sum() {
        let g = Grid::unit(1, 64).unwrap();
        let time = TimeGrid::standard(&g, 32).unwrap();
        let mut f = TentField::zeros(g, time.clone());
        let (y0, j0, v) = (10usize, 20usize, 3.0);
        f.set(y0, j0, C64::new(0.0, v));
        let a = area_function(&f, 1.0).unwrap();
        let tj = time.levels[j0];
        let want = v * (g.cell_measure() * time.dlog / tj).sqrt();
        for x in 0..64 {
            let inside = g.dist(x, y0) < tj;
            let expect = if inside { want } else { 0.0 };
            assert!((a[x] - expect).abs() < 1e-14, "x = {x}");
        }
    }

    #[test]
    fn area_function_is_monotone_in_aperture_and_homogeneous() {
        let g = Grid::unit(2, 16).unwrap();
        let f = random_field(g, 16, 1);
        let a1 = area_function(&f, 0.5).unwrap();
        let a2 = area_function(&f, 1.0).unwrap();
        let a3 = area_function(&f, 2.0).unwrap();
        for x in 0..g.cells() {
            assert!(a1[x] <= a2[x] && a2[x] <= a3[x]);
        }
        let b = area_function(&f.scale(C64::new(0.0, -2.0)), 1.0).unwrap();
        for x in 0..g.cells() {
            assert!((b[x] - 2.0 * a2[x]).abs() <= 1e-13 * a2[x]);
        }
    }

    #[test]
    fn tent_norms_agree_for_power_omega() {
        let g = Grid::unit(1, 32).unwrap();
        let f = random_field(g, 16, 2);
        for p in [0.5, 1.0, 1.5] {
            let a = t2p_norm(&f, p).unwrap();
            let b = t_omega_norm(&f, &OrliczFunction::power(p.min(1.0))).unwrap();
            if p <= 1.0 {
                assert!((a - b).abs() < 1e-12 * a);
            }
        }
        assert_eq!(t2p_norm(&TentField::zeros(g, f.time.clone()), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn tent_support_implies_area_support() {
        let g = Grid::unit(1, 64).unwrap();
        let time = TimeGrid::standard(&g, 32).unwrap();
        let ball: Vec<bool> = (0..64).map(|x| (20..36).contains(&x)).collect();
        let tm = tent_mask(&g, &time, &ball);
        let mut f = random_field(g, 32, 3);
        for (v, inside) in f.values.iter_mut().zip(&tm) {
            if !inside {
                *v = C64::new(0.0, 0.0);
            }
        }
        assert!(f.support_size() > 0);
        let a = area_function(&f, 1.0).unwrap();
        for x in 0..64 {
            if !ball[x] {
                assert_eq!(a[x], 0.0);
            }
        }
    }

    #[test]
    fn gamma_density_matches_brute_force() {
        let g = Grid::unit(1, 32).unwrap();
        let mask: Vec<bool> = (0..32).map(|x| x < 16).collect();
        let fs = gamma_density_set(&mask, &g, 0.9).unwrap();
        // Brute force: every centered interval of 2m+1 cells with (m+½)h ≤ L/4.
        for x in 0..32 {
            let mut ok = true;
            for m in 0..8 {
                let cells: Vec<usize> = (-(m as isize)..=m as isize).map(|d| g.shift(x, [d, 0])).collect();
                let mut uniq = cells.clone();
                uniq.sort();
                uniq.dedup();
                let inside = uniq.iter().filter(|c| mask[**c]).count();
                if (inside as f64) / (uniq.len() as f64) < 0.9 {
                    ok = false;
                }
            }
            assert_eq!(fs[x], ok, "x = {x}");
        }
        assert!(fs.iter().zip(&mask).all(|(a, b)| !a || *b));
        // Half the torus at γ = 0.9 is eroded by a margin, not emptied.
        assert!(fs.iter().any(|b| *b) && fs.iter().filter(|b| **b).count() < 16);
        let all = vec![true; 32];
        assert!(gamma_density_set(&all, &g, 0.5).unwrap().iter().all(|b| *b));
        let small = gamma_density_set(&mask, &g, 1e-3).unwrap();
        assert_eq!(small, mask);
    }

    #[test]
    fn expanded_set_contains_original() {
        let g = Grid::unit(2, 16).unwrap();
        let mask: Vec<bool> = (0..256).map(|i| i % 7 == 0).collect();
        let o = expand_open_set(&mask, &g, 0.75).unwrap();
        assert!(mask.iter().zip(&o).all(|(a, b)| !a || *b));
    }

    #[test]
    fn aperture_probe_trivial_cases() {
        let g = Grid::unit(1, 32).unwrap();
        let f = random_field(g, 16, 4);
        let w = OrliczFunction::sqrt_log();
        let r = aperture_ratio_probe(&f, 1.0, 1.0, &w).unwrap();
        assert_eq!(r.ratio, 1.0);
        let z = TentField::zeros(g, f.time.clone());
        assert_eq!(aperture_ratio_probe(&z, 0.5, 2.0, &w).unwrap().ratio, 1.0);
        assert!(aperture_ratio_probe(&f, 0.5, 2.0, &w).unwrap().ratio > 1.0);
    }
}
