//! Seeded fixture fields: band-limited mean-zero fields, eigenmodes,
//! localized bumps and synthesized molecules, each with a content hash.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::grid::Grid;
use crate::hardy::{heat_tent_field, pi_lm};
use crate::operator::EllipticOperator;
use crate::orlicz::OrliczFunction;
use crate::tent_atoms::{atomic_decompose, DEFAULT_GAMMA};
use crate::tent_field::{TentField, TimeGrid};
use crate::C64;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn plane_wave(grid: &Grid, k: [i64; 2]) -> Vec<C64> {
    (0..grid.cells())
        .map(|i| {
            let c = grid.coords(i);
            let phase = 2.0 * PI * (k[0] as f64 * c[0] as f64 + k[1] as f64 * c[1] as f64) / grid.n as f64;
            C64::new(0.0, phase).exp()
        })
        .collect()
}

/// e^{2πi k·x/L} sampled at the grid.
pub fn eigenmode(grid: &Grid, k: [i64; 2]) -> Vec<C64> {
    plane_wave(grid, k)
}

/// Σ_{0 < |k|_∞ ≤ kmax} c_k e^{2πik·x/L} with c_k uniform in the unit square
/// divided by |k|. In 1-D only positive frequencies are used.
pub fn band_limited(grid: &Grid, kmax: usize, seed: u64) -> Vec<C64> {
    let mut r = rng(seed);
    let km = kmax as i64;
    let mut out = vec![C64::new(0.0, 0.0); grid.cells()];
    let ks: Vec<[i64; 2]> = if grid.dim == 1 {
        (1..=km).map(|k| [k, 0]).collect()
    } else {
        (-km..=km).flat_map(|a| (-km..=km).map(move |b| [a, b])).filter(|k| *k != [0, 0]).collect()
    };
    for k in ks {
        let norm = ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt();
        let c = C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)) / norm;
        for (o, v) in out.iter_mut().zip(plane_wave(grid, k)) {
            *o += c * v;
        }
    }
    out
}

/// Gaussian of width `width` cells centered at a cell, optionally with the
/// mean removed.
pub fn gaussian_bump(grid: &Grid, center: usize, width: f64, mean_zero: bool) -> Vec<C64> {
    let mut out: Vec<C64> = (0..grid.cells())
        .map(|x| {
            let d = grid.dist(x, center) / grid.h();
            C64::new((-d * d / (2.0 * width * width)).exp(), 0.0)
        })
        .collect();
    if mean_zero {
        let m = out.iter().sum::<C64>() / out.len() as f64;
        out.iter_mut().for_each(|v| *v -= m);
    }
    out
}

/// Mean-zero bump with seeded center and width in [2, 6) cells.
pub fn random_bump(grid: &Grid, seed: u64) -> Vec<C64> {
    let mut r = rng(seed);
    let c = r.gen_range(0..grid.cells());
    let s = r.gen_range(2.0..6.0);
    gaussian_bump(grid, c, s, true)
}

/// The tent field t²Le^{−t²L}b of a seeded mean-zero bump of width in [1, 6).
pub fn bump_tent_field(op: &EllipticOperator, time: &TimeGrid, seed: u64) -> Result<TentField> {
    let grid = *op.grid();
    let mut r = rng(seed);
    let c = r.gen_range(0..grid.cells());
    let s = r.gen_range(1.0..6.0);
    heat_tent_field(op, &gaussian_bump(&grid, c, s, true), time)
}

/// π_{L,M} images of the tent atoms of a band-limited field.
pub fn synthesized_molecules(op: &EllipticOperator, time: &TimeGrid, w: &OrliczFunction, m: u32, seed: u64) -> Result<Vec<Vec<C64>>> {
    let f = band_limited(op.grid(), 4, seed);
    let tent = heat_tent_field(op, &f, time)?;
    let d = atomic_decompose(&tent, w, DEFAULT_GAMMA)?;
    d.atoms.iter().map(|a| pi_lm(op, &a.values, m)).collect()
}

/// SHA-256 of the little-endian (re, im) pairs, hex encoded.
pub fn hash_values(values: &[C64]) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.re.to_le_bytes());
        h.update(v.im.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKind {
    BandLimited,
    Eigenmode,
    Bump,
    Molecule,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Fixture {
    pub name: String,
    pub kind: FixtureKind,
    pub values: Vec<C64>,
    pub hash: String,
}

impl Fixture {
    fn new(name: String, kind: FixtureKind, values: Vec<C64>) -> Self {
        let hash = hash_values(&values);
        Self { name, kind, values, hash }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    pub band_limited: usize,
    pub kmax: usize,
    pub eigenmodes: usize,
    pub bumps: usize,
    pub molecules: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self { band_limited: 8, kmax: 6, eigenmodes: 4, bumps: 4, molecules: 4 }
    }
}

impl CorpusSpec {
    pub fn size(&self) -> usize {
        self.band_limited + self.eigenmodes + self.bumps + self.molecules
    }
}

/// Enumerated, hashed fixture set. Molecules come from the tent atoms of
/// band-limited fields (ω = t, M = 1) and are taken until the count is met.
pub fn fixture_corpus(op: &EllipticOperator, seed: u64, spec: &CorpusSpec) -> Result<Vec<Fixture>> {
    let grid = *op.grid();
    let mut out = Vec::with_capacity(spec.size());
    for i in 0..spec.band_limited {
        let s = seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
        out.push(Fixture::new(format!("band_limited_{i}"), FixtureKind::BandLimited, band_limited(&grid, spec.kmax, s)));
    }
    for i in 0..spec.eigenmodes {
        let k = (i % (grid.n / 2).max(1)) as i64 + 1;
        let kv = if grid.dim == 1 || i % 2 == 0 { [k, 0] } else { [k, k] };
        out.push(Fixture::new(format!("eigenmode_{}_{}", kv[0], kv[1]), FixtureKind::Eigenmode, eigenmode(&grid, kv)));
    }
    for i in 0..spec.bumps {
        let s = seed.wrapping_mul(2_000_003).wrapping_add(i as u64);
        out.push(Fixture::new(format!("bump_{i}"), FixtureKind::Bump, random_bump(&grid, s)));
    }
    if spec.molecules > 0 {
        let time = TimeGrid::standard(&grid, 32)?;
        let w = OrliczFunction::power(1.0);
        let mut got = 0;
        let mut j = 0u64;
        while got < spec.molecules {
            let s = seed.wrapping_mul(3_000_017).wrapping_add(j);
            for m in synthesized_molecules(op, &time, &w, 1, s)? {
                if got == spec.molecules {
                    break;
                }
                out.push(Fixture::new(format!("molecule_{got}"), FixtureKind::Molecule, m));
                got += 1;
            }
            j += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_reproducible_and_sized() {
        let g = Grid::unit(1, 32).unwrap();
        let op = EllipticOperator::identity(g).unwrap();
        let spec = CorpusSpec::default();
        let a = fixture_corpus(&op, 0, &spec).unwrap();
        let b = fixture_corpus(&op, 0, &spec).unwrap();
        assert_eq!(a.len(), spec.size());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.hash, y.hash);
            assert_eq!(x.hash, hash_values(&x.values));
        }
        let c = fixture_corpus(&op, 1, &spec).unwrap();
        assert_ne!(a[0].hash, c[0].hash);
    }

    #[test]
    fn fields_are_mean_zero() {
        for (dim, n) in [(1, 32), (2, 8)] {
            let g = Grid::unit(dim, n).unwrap();
            for f in [band_limited(&g, 3, 4), random_bump(&g, 4), eigenmode(&g, [1, 2])] {
                let m = f.iter().sum::<C64>().norm();
                assert!(m < 1e-12 * crate::operator::l2(&f) * (g.cells() as f64).sqrt());
            }
        }
    }

    #[test]
    fn hash_is_sha256_of_le_pairs() {
        // SHA-256 of sixteen zero bytes.
        assert_eq!(hash_values(&[C64::new(0.0, 0.0)]), "374708fff7719dd5979ec875d56cd2286f6d3cf7ec317a3b25632aab28ec37bb");
    }
}
