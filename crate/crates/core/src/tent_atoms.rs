//! Constructive atomic decomposition of tent fields: level sets of the area
//! function, γ-density enlargements, Whitney cubes and atom assembly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::orlicz::{solve_unit_level, verify_assumption_a, OrliczFunction, SampleSpec};
use crate::tent_field::{area_from_energy, area_function, expand_open_set, lp_norm_cells, ConeGeometry, TentField};
use crate::C64;

pub const DEFAULT_GAMMA: f64 = 0.75;
/// Ball radius over cube side, in units of √n.
pub const BALL_FACTOR: f64 = 5.5;
/// λ_{k,j} = ATOM_SCALE · 2^k |B| ρ(|B|). Off O_{k+1} the area function is at
/// most 2^{k+1}, so the factor 2 keeps the normalized pieces within the atom
/// bounds instead of within twice them.
pub const ATOM_SCALE: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicCube {
    /// Side is N / 2^level cells.
    pub level: u32,
    /// Lower corner in cell coordinates.
    pub anchor: [usize; 2],
    pub side_cells: usize,
    /// Lower Whitney bound not met (finest cells in 2-D) or O is the whole grid.
    pub flagged: bool,
}

impl DyadicCube {
    pub fn side(&self, grid: &Grid) -> f64 {
        self.side_cells as f64 * grid.h()
    }

    pub fn cells(&self, grid: &Grid) -> Vec<usize> {
        let s = self.side_cells;
        if grid.dim == 1 {
            (0..s).map(|i| grid.index([self.anchor[0] + i, 0])).collect()
        } else {
            let mut out = Vec::with_capacity(s * s);
            for i in 0..s {
                for j in 0..s {
                    out.push(grid.index([self.anchor[0] + i, self.anchor[1] + j]));
                }
            }
            out
        }
    }

    pub fn center(&self, grid: &Grid) -> [f64; 2] {
        let h = grid.h();
        let half = self.side(grid) / 2.0;
        let y = if grid.dim == 2 { self.anchor[1] as f64 * h + half } else { 0.0 };
        [self.anchor[0] as f64 * h + half, y]
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct WhitneyCover {
    pub cubes: Vec<DyadicCube>,
    /// O was the whole grid; the cover is the single torus cube.
    pub full: bool,
}

impl WhitneyCover {
    pub fn flagged(&self) -> usize {
        self.cubes.iter().filter(|c| c.flagged).count()
    }
}

/// Dyadic Whitney cover of a cell set on a grid with N a power of two:
/// cubes Q ⊆ O with √n ℓ(Q) ≤ dist(Q, O^c) ≤ 4√n ℓ(Q) (torus metric on
/// cell centers).
pub fn whitney_decompose(grid: &Grid, mask: &[bool]) -> Result<WhitneyCover> {
    if !grid.n.is_power_of_two() {
        return Err(Error::Config(format!("Whitney cubes need N a power of two, got {}", grid.n)));
    }
    if mask.len() != grid.cells() {
        return Err(Error::Config("mask does not match the grid".into()));
    }
    if !mask.iter().any(|b| *b) {
        return Ok(WhitneyCover::default());
    }
    if mask.iter().all(|b| *b) {
        let cube = DyadicCube { level: 0, anchor: [0, 0], side_cells: grid.n, flagged: true };
        return Ok(WhitneyCover { cubes: vec![cube], full: true });
    }
    let depth = grid.tent_depth(mask);
    let root = (grid.dim as f64).sqrt();
    let mut cubes = Vec::new();
    let mut stack = vec![DyadicCube { level: 0, anchor: [0, 0], side_cells: grid.n, flagged: false }];
    while let Some(q) = stack.pop() {
        let cells = q.cells(grid);
        let inside = cells.iter().filter(|c| mask[**c]).count();
        if inside == 0 {
            continue;
        }
        if inside == cells.len() {
            let d = cells.iter().map(|c| depth[*c]).fold(f64::INFINITY, f64::min);
            if d >= root * q.side(grid) * (1.0 - 1e-12) {
                cubes.push(q);
                continue;
            }
            if q.side_cells == 1 {
                cubes.push(DyadicCube { flagged: true, ..q });
                continue;
            }
        }
        let s = q.side_cells / 2;
        let corners: Vec<[usize; 2]> = if grid.dim == 1 {
            vec![[q.anchor[0], 0], [q.anchor[0] + s, 0]]
        } else {
            let [a, b] = q.anchor;
            vec![[a, b], [a + s, b], [a, b + s], [a + s, b + s]]
        };
        for anchor in corners.into_iter().rev() {
            stack.push(DyadicCube { level: q.level + 1, anchor, side_cells: s, flagged: false });
        }
    }
    cubes.sort_by_key(|c| (c.anchor, c.side_cells));
    Ok(WhitneyCover { cubes, full: false })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WhitneyCheck {
    pub disjoint: bool,
    pub covers: bool,
    /// Cubes (not flagged) meeting the lower bound / all cubes meeting the upper bound.
    pub lower_ok: bool,
    pub upper_ok: bool,
}

/// Brute-force audit of a cover: disjointness, exact coverage, and the
/// two-sided distance condition with distances recomputed cell by cell.
pub fn check_whitney(grid: &Grid, mask: &[bool], cover: &WhitneyCover) -> WhitneyCheck {
    let mut count = vec![0usize; grid.cells()];
    for q in &cover.cubes {
        for c in q.cells(grid) {
            count[c] += 1;
        }
    }
    let disjoint = count.iter().all(|c| *c <= 1);
    let covers = count.iter().zip(mask).all(|(c, m)| (*c == 1) == *m);
    let outside: Vec<usize> = (0..grid.cells()).filter(|i| !mask[*i]).collect();
    let root = (grid.dim as f64).sqrt();
    let (mut lower_ok, mut upper_ok) = (true, true);
    for q in &cover.cubes {
        if outside.is_empty() {
            continue;
        }
        let cells = q.cells(grid);
        let mut d = f64::INFINITY;
        for &a in &cells {
            for &b in &outside {
                d = d.min(grid.dist(a, b));
            }
        }
        let l = q.side(grid);
        if !q.flagged && d < root * l * (1.0 - 1e-12) {
            lower_ok = false;
        }
        if d > 4.0 * root * l * (1.0 + 1e-12) {
            upper_ok = false;
        }
    }
    WhitneyCheck { disjoint, covers, lower_ok, upper_ok }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelSets {
    /// O_k = {A > 2^k} for k = k_min..=k_max; empty when A ≡ 0.
    pub k_min: i32,
    pub k_max: i32,
    pub masks: Vec<Vec<bool>>,
    pub area: Vec<f64>,
}

impl LevelSets {
    pub fn mask(&self, k: i32) -> Option<&[bool]> {
        if self.masks.is_empty() || k < self.k_min || k > self.k_max {
            return None;
        }
        Some(&self.masks[(k - self.k_min) as usize])
    }
}

pub fn level_sets_of_area(area: Vec<f64>) -> LevelSets {
    let pos_min = area.iter().cloned().filter(|a| *a > 0.0).fold(f64::INFINITY, f64::min);
    let max = area.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return LevelSets { k_min: 0, k_max: -1, masks: Vec::new(), area };
    }
    // 2^{k_min} < min A on the support, and O_{k_max + 1} = ∅.
    let k_min = pos_min.log2().ceil() as i32 - 1;
    let k_max = max.log2().ceil() as i32 - 1;
    let masks = (k_min..=k_max).map(|k| area.iter().map(|a| *a > 2f64.powi(k)).collect()).collect();
    LevelSets { k_min, k_max, masks, area }
}

pub fn level_sets(f: &TentField) -> Result<LevelSets> {
    Ok(level_sets_of_area(area_function(f, 1.0)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Ball {
    /// Cells whose centers lie strictly inside.
    pub fn mask(&self, grid: &Grid) -> Vec<bool> {
        grid.ball_mask(self.center, self.radius)
    }

    /// Cell-count measure of the ball.
    pub fn measure(&self, grid: &Grid) -> f64 {
        self.mask(grid).iter().filter(|b| **b).count() as f64 * grid.cell_measure()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TentAtom {
    /// The normalized atom a (so the piece of F is λ·a).
    pub values: TentField,
    pub ball: Ball,
    pub ball_measure: f64,
    pub generation: i32,
    pub cube: DyadicCube,
    pub lambda: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AtomicDecomposition {
    pub atoms: Vec<TentAtom>,
    pub lambda_value: f64,
    pub k_range: Option<(i32, i32)>,
    pub gamma: f64,
    /// (x, j) support cells of F outside every tent Ô*_k or clipped by a ball tent.
    pub uncovered: Vec<(usize, usize)>,
    pub flagged_cubes: usize,
    pub full_covers: usize,
    pub residual_sup: f64,
}

impl AtomicDecomposition {
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.atoms.iter().map(|a| (a.lambda, a.ball_measure)).collect()
    }

    pub fn sum_abs_lambda(&self) -> f64 {
        self.atoms.iter().map(|a| a.lambda.abs()).sum()
    }

    /// Σ λ_j a_j.
    pub fn synthesize(&self, template: &TentField) -> TentField {
        let mut out = TentField::zeros(template.grid, template.time.clone());
        for a in &self.atoms {
            for (o, v) in out.values.iter_mut().zip(&a.values.values) {
                *o += v * a.lambda;
            }
        }
        out
    }
}

fn require_assumption_a(w: &OrliczFunction) -> Result<()> {
    let rep = verify_assumption_a(w, &SampleSpec::default());
    if !rep.all_pass() {
        return Err(Error::Guard(format!("{} does not satisfy the admissibility checks: {rep:?}", w.label())));
    }
    Ok(())
}

/// inf{λ > 0 : Σ_j |B_j| ω(|λ_j| / (λ |B_j| ρ(|B_j|))) ≤ 1} for pairs (λ_j, |B_j|).
pub fn lambda_functional(pairs: &[(f64, f64)], w: &OrliczFunction) -> Result<f64> {
    if pairs.iter().any(|(_, m)| !(*m > 0.0)) {
        return Err(Error::Domain("ball measures must be positive".into()));
    }
    let terms: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|(l, _)| *l != 0.0)
        .map(|(l, m)| Ok((*m, l.abs() / (m * w.rho(*m)?))))
        .collect::<Result<_>>()?;
    if terms.is_empty() {
        return Ok(0.0);
    }
    let hint = terms.iter().map(|t| t.1).fold(0.0, f64::max);
    solve_unit_level(|lam| terms.iter().map(|(m, r)| m * w.value(r / lam)).sum(), hint)
}

pub fn atomic_decompose(f: &TentField, w: &OrliczFunction, gamma: f64) -> Result<AtomicDecomposition> {
    require_assumption_a(w)?;
    if !f.is_finite() {
        return Err(Error::Domain("tent field has non-finite values".into()));
    }
    let grid = f.grid;
    let n = grid.cells();
    let jn = f.time.len();
    let levels = level_sets(f)?;
    let mut out = AtomicDecomposition {
        atoms: Vec::new(),
        lambda_value: 0.0,
        k_range: None,
        gamma,
        uncovered: Vec::new(),
        flagged_cubes: 0,
        full_covers: 0,
        residual_sup: 0.0,
    };
    if levels.masks.is_empty() {
        return Ok(out);
    }
    out.k_range = Some((levels.k_min, levels.k_max));
    let expanded: Vec<Vec<bool>> = levels.masks.iter().map(|m| expand_open_set(m, &grid, gamma)).collect::<Result<_>>()?;
    let depths: Vec<Vec<f64>> = expanded.iter().map(|m| grid.tent_depth(m)).collect();
    // Generation of (x, t_j): the largest k whose tent Ô*_k contains it.
    let mut gen: Vec<Option<usize>> = vec![None; n * jn];
    for (ki, d) in depths.iter().enumerate() {
        for (j, t) in f.time.levels.iter().enumerate() {
            for x in 0..n {
                if *t <= d[x] {
                    gen[j * n + x] = Some(ki);
                }
            }
        }
    }
    let mut assigned = vec![false; n * jn];
    let root = (grid.dim as f64).sqrt();
    for (ki, mask) in expanded.iter().enumerate() {
        let k = levels.k_min + ki as i32;
        let cover = whitney_decompose(&grid, mask)?;
        out.flagged_cubes += cover.flagged();
        out.full_covers += cover.full as usize;
        for cube in &cover.cubes {
            let ball = Ball { center: cube.center(&grid), radius: BALL_FACTOR * root * cube.side(&grid) };
            let bmask = ball.mask(&grid);
            let bdepth = grid.tent_depth(&bmask);
            let cells = cube.cells(&grid);
            let mut piece = TentField::zeros(grid, f.time.clone());
            let mut any = false;
            for (j, t) in f.time.levels.iter().enumerate() {
                for &x in &cells {
                    let idx = j * n + x;
                    let v = f.values[idx];
                    if gen[idx] != Some(ki) || v.norm() == 0.0 {
                        continue;
                    }
                    if *t <= bdepth[x] {
                        piece.values[idx] = v;
                        assigned[idx] = true;
                        any = true;
                    }
                }
            }
            if !any {
                continue;
            }
            let measure = ball.measure(&grid);
            let lambda = ATOM_SCALE * 2f64.powi(k) * measure * w.rho(measure)?;
            piece.values.iter_mut().for_each(|v| *v /= lambda);
            out.atoms.push(TentAtom { values: piece, ball, ball_measure: measure, generation: k, cube: *cube, lambda });
        }
    }
    for idx in 0..n * jn {
        if f.values[idx].norm() > 0.0 && !assigned[idx] {
            out.uncovered.push((idx % n, idx / n));
        }
    }
    out.lambda_value = lambda_functional(&out.pairs(), w)?;
    out.residual_sup = reconstruction_residual(f, &out)?.sup;
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PNormCheck {
    pub p: f64,
    pub norm: f64,
    pub bound: f64,
    /// (1 + slack) − norm/bound; nonnegative means pass.
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AtomCertificate {
    pub tent_support: bool,
    pub per_p: Vec<PNormCheck>,
    pub t_omega: f64,
    pub t_omega_margin: f64,
    pub pass: bool,
}

/// Checks supp a ⊆ B̂, ‖a‖_{T_2^p} ≤ |B|^{1/p−1}ρ(|B|)^{−1} for each p, and
/// ‖a‖_{T_ω} ≤ 1, all up to (1 + slack).
pub fn verify_atom(atom: &TentAtom, w: &OrliczFunction, p_list: &[f64], slack: f64) -> Result<AtomCertificate> {
    let grid = atom.values.grid;
    let n = grid.cells();
    let depth = grid.tent_depth(&atom.ball.mask(&grid));
    let mut tent_support = true;
    for (idx, v) in atom.values.values.iter().enumerate() {
        if v.norm() > 0.0 && atom.values.time.levels[idx / n] > depth[idx % n] {
            tent_support = false;
        }
    }
    let area = area_function(&atom.values, 1.0)?;
    let m = atom.ball_measure;
    let rho = w.rho(m)?;
    let per_p: Vec<PNormCheck> = p_list
        .iter()
        .map(|&p| {
            let norm = lp_norm_cells(&grid, &area, p);
            let bound = m.powf(1.0 / p - 1.0) / rho;
            PNormCheck { p, norm, bound, margin: 1.0 + slack - norm / bound }
        })
        .collect();
    let t_omega = crate::orlicz::luxemburg_norm_uniform(&area, grid.cell_measure(), w)?;
    let t_omega_margin = 1.0 + slack - t_omega;
    let pass = tent_support && t_omega_margin >= 0.0 && per_p.iter().all(|c| c.margin >= 0.0);
    Ok(AtomCertificate { tent_support, per_p, t_omega, t_omega_margin, pass })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Residual {
    pub sup: f64,
    pub t22: f64,
}

pub fn reconstruction_residual(f: &TentField, d: &AtomicDecomposition) -> Result<Residual> {
    let s = d.synthesize(f);
    let mut diff = f.clone();
    for (a, b) in diff.values.iter_mut().zip(&s.values) {
        *a -= b;
    }
    let sup = diff.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let t22 = crate::tent_field::t2p_norm(&diff, 2.0)?;
    Ok(Residual { sup, t22 })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailTable {
    /// Number of leading atoms removed, 0..=count.
    pub counts: Vec<usize>,
    /// (p, tails) for each requested p.
    pub t2p: Vec<(f64, Vec<f64>)>,
    pub t_omega: Vec<f64>,
}

impl TailTable {
    pub fn nonincreasing(&self) -> bool {
        let mono = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
        self.t2p.iter().all(|(_, v)| mono(v)) && mono(&self.t_omega)
    }

    pub fn terminal_zero(&self) -> bool {
        self.t2p.iter().all(|(_, v)| *v.last().unwrap() == 0.0) && *self.t_omega.last().unwrap() == 0.0
    }
}

/// ‖F − Σ_{j<N} λ_j a_j‖ in T_2^p and T_ω for N = 0, 1, …, count.
pub fn truncation_convergence(f: &TentField, d: &AtomicDecomposition, p_list: &[f64], w: &OrliczFunction) -> Result<TailTable> {
    let grid = f.grid;
    let cone = ConeGeometry::new(&grid, &f.time, 1.0)?;
    let mut rem = f.clone();
    let mut counts = Vec::new();
    let mut t2p: Vec<(f64, Vec<f64>)> = p_list.iter().map(|p| (*p, Vec::new())).collect();
    let mut t_omega = Vec::new();
    for step in 0..=d.atoms.len() {
        if step > 0 {
            let a = &d.atoms[step - 1];
            for (r, v) in rem.values.iter_mut().zip(&a.values.values) {
                if v.norm() > 0.0 {
                    // Pieces have disjoint supports; clear rather than subtract.
                    *r = C64::new(0.0, 0.0);
                }
            }
        }
        let area = area_from_energy(&grid, &cone, &rem.energy());
        counts.push(step);
        for (p, tail) in t2p.iter_mut() {
            tail.push(lp_norm_cells(&grid, &area, *p));
        }
        t_omega.push(crate::orlicz::luxemburg_norm_uniform(&area, grid.cell_measure(), w)?);
    }
    Ok(TailTable { counts, t2p, t_omega })
}
