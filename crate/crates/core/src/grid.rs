//! Periodic grids, torus distances, balls and tents on cell sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DOF: usize = 8192;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
}

/// Integer displacement between cells, one entry per axis (unused axes are 0).
pub type Offset = [isize; 2];

impl Grid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Config(format!("dimension must be 1 or 2, got {dim}")));
        }
        if n < 8 {
            return Err(Error::Config(format!("need N >= 8 points per axis, got {n}")));
        }
        if n.pow(dim as u32) > MAX_DOF {
            return Err(Error::Config(format!("N^n = {} exceeds {MAX_DOF}", n.pow(dim as u32))));
        }
        if !(length > 0.0) {
            return Err(Error::Config(format!("domain length must be positive, got {length}")));
        }
        Ok(Self { dim, n, length })
    }

    pub fn unit(dim: usize, n: usize) -> Result<Self> {
        Self::new(dim, n, 1.0)
    }

    pub fn h(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn cells(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn cell_measure(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    pub fn coords(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / self.n, idx % self.n]
        }
    }

    pub fn index(&self, c: [usize; 2]) -> usize {
        if self.dim == 1 {
            c[0]
        } else {
            c[0] * self.n + c[1]
        }
    }

    pub fn shift(&self, idx: usize, d: Offset) -> usize {
        let c = self.coords(idx);
        let n = self.n as isize;
        let mut out = [0usize; 2];
        for a in 0..self.dim {
            out[a] = (c[a] as isize + d[a]).rem_euclid(n) as usize;
        }
        self.index(out)
    }

    /// Cell center in [0, L)^n.
    pub fn center(&self, idx: usize) -> [f64; 2] {
        let c = self.coords(idx);
        let h = self.h();
        [(c[0] as f64 + 0.5) * h, if self.dim == 2 { (c[1] as f64 + 0.5) * h } else { 0.0 }]
    }

    /// Signed minimal displacement (in cells) from i to j along one axis.
    pub fn axis_delta(&self, i: usize, j: usize) -> isize {
        let n = self.n as isize;
        let mut d = (j as isize - i as isize).rem_euclid(n);
        if d > n / 2 {
            d -= n;
        }
        d
    }

    pub fn offset_between(&self, a: usize, b: usize) -> Offset {
        let (ca, cb) = (self.coords(a), self.coords(b));
        let mut o = [0isize; 2];
        for ax in 0..self.dim {
            o[ax] = self.axis_delta(ca[ax], cb[ax]);
        }
        o
    }

    pub fn offset_norm(&self, d: Offset) -> f64 {
        let h = self.h();
        ((d[0] * d[0] + d[1] * d[1]) as f64).sqrt() * h
    }

    pub fn dist(&self, a: usize, b: usize) -> f64 {
        self.offset_norm(self.offset_between(a, b))
    }

    /// Torus distance between a cell center and an arbitrary point.
    pub fn dist_to_point(&self, idx: usize, p: [f64; 2]) -> f64 {
        let c = self.center(idx);
        let l = self.length;
        let mut s = 0.0;
        for a in 0..self.dim {
            let mut d = (c[a] - p[a]).rem_euclid(l);
            if d > l / 2.0 {
                d = l - d;
            }
            s += d * d;
        }
        s.sqrt()
    }

    /// Largest torus distance between two points.
    pub fn max_dist(&self) -> f64 {
        (self.dim as f64).sqrt() * self.length / 2.0
    }

    /// One representative per displacement class mod N.
    pub fn all_offsets(&self) -> Vec<Offset> {
        let n = self.n as isize;
        let lo = -(n - 1) / 2;
        let hi = n / 2;
        let mut out = Vec::with_capacity(self.cells());
        if self.dim == 1 {
            for d in lo..=hi {
                out.push([d, 0]);
            }
        } else {
            for d0 in lo..=hi {
                for d1 in lo..=hi {
                    out.push([d0, d1]);
                }
            }
        }
        out
    }

    /// Displacements with torus center distance strictly below r.
    pub fn offsets_within(&self, r: f64) -> Vec<Offset> {
        self.all_offsets().into_iter().filter(|d| self.offset_norm(*d) < r).collect()
    }

    /// Volume of the unit ball in R^n.
    pub fn unit_ball_volume(&self) -> f64 {
        if self.dim == 1 {
            2.0
        } else {
            std::f64::consts::PI
        }
    }

    /// Continuum measure of the torus ball of radius r.
    pub fn ball_volume(&self, r: f64) -> f64 {
        let half = self.length / 2.0;
        if self.dim == 1 {
            interval_overlap(-r, r, -half, half)
        } else {
            disc_rect_area(r, -half, half, -half, half)
        }
    }

    /// Fractional overlap of each cell with the torus ball B(center, r), the
    /// center being a cell center. Σ w·h^n equals `ball_volume(r)` exactly.
    pub fn ball_weights(&self, r: f64) -> BallStencil {
        let h = self.h();
        let half = self.length / 2.0;
        let n = self.n as isize;
        let pieces = |d: isize| -> Vec<(f64, f64)> {
            let (a, b) = (d as f64 * h - h / 2.0, d as f64 * h + h / 2.0);
            if n % 2 == 0 && d == n / 2 {
                vec![(a, half), (-half, -half + h / 2.0)]
            } else {
                vec![(a, b)]
            }
        };
        let cell = self.cell_measure();
        let mut entries = Vec::new();
        for d in self.all_offsets() {
            if self.offset_norm(d) >= r + h * (self.dim as f64).sqrt() {
                continue;
            }
            let area = if self.dim == 1 {
                pieces(d[0]).iter().map(|(a, b)| interval_overlap(-r, r, *a, *b)).sum::<f64>()
            } else {
                let mut s = 0.0;
                for (x0, x1) in pieces(d[0]) {
                    for (y0, y1) in pieces(d[1]) {
                        s += disc_rect_area(r, x0, x1, y0, y1);
                    }
                }
                s
            };
            let w = (area / cell).min(1.0);
            if w > 0.0 {
                entries.push((d, w));
            }
        }
        let measure = entries.iter().map(|(_, w)| w * cell).sum();
        BallStencil { radius: r, entries, measure }
    }

    /// For each cell y, the center distance to the nearest cell outside the
    /// mask; +∞ when the mask is the whole grid. (y, t) lies in the tent over
    /// the mask iff t ≤ depth(y).
    pub fn tent_depth(&self, mask: &[bool]) -> Vec<f64> {
        let outside: Vec<usize> = (0..self.cells()).filter(|i| !mask[*i]).collect();
        (0..self.cells())
            .map(|y| {
                if !mask[y] {
                    0.0
                } else {
                    outside.iter().map(|z| self.dist(y, *z)).fold(f64::INFINITY, f64::min)
                }
            })
            .collect()
    }

    /// Cells whose centers are at torus distance < r from the point c.
    pub fn ball_mask(&self, c: [f64; 2], r: f64) -> Vec<bool> {
        (0..self.cells()).map(|i| self.dist_to_point(i, c) < r).collect()
    }
}

/// Ball stencil centered at a cell center.
#[derive(Clone, Debug)]
pub struct BallStencil {
    pub radius: f64,
    pub entries: Vec<(Offset, f64)>,
    /// Σ w·h^n.
    pub measure: f64,
}

impl BallStencil {
    /// (1/|B|) ∫_B |g|^q over the ball centered at cell x.
    pub fn average_pow(&self, grid: &Grid, g: &[f64], x: usize, q: f64) -> f64 {
        let cell = grid.cell_measure();
        let s: f64 = self.entries.iter().map(|(d, w)| w * g[grid.shift(x, *d)].powf(q)).sum();
        s * cell / self.measure
    }

    /// (1/|B|) ∫_B g for nonnegative g (typically |F|²).
    pub fn average(&self, grid: &Grid, g: &[f64], x: usize) -> f64 {
        let cell = grid.cell_measure();
        let s: f64 = self.entries.iter().map(|(d, w)| w * g[grid.shift(x, *d)]).sum();
        s * cell / self.measure
    }
}

pub fn interval_overlap(a: f64, b: f64, c: f64, d: f64) -> f64 {
    (b.min(d) - a.max(c)).max(0.0)
}

/// Area of {|z| < r} ∩ [x0,x1]×[y0,y1].
pub fn disc_rect_area(r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    if r <= 0.0 || x1 <= x0 || y1 <= y0 {
        return 0.0;
    }
    let xa = x0.max(-r);
    let xb = x1.min(r);
    if xb <= xa {
        return 0.0;
    }
    let s = |x: f64| (r * r - x * x).max(0.0).sqrt();
    // Antiderivative of s.
    let big_s = |x: f64| {
        let u = (x / r).clamp(-1.0, 1.0);
        0.5 * (x * s(x) + r * r * u.asin())
    };
    let mut bps = vec![xa, xb];
    for y in [y0, y1] {
        if y.abs() < r {
            let x = (r * r - y * y).sqrt();
            for b in [-x, x] {
                if b > xa && b < xb {
                    bps.push(b);
                }
            }
        }
    }
    bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut area = 0.0;
    for w in bps.windows(2) {
        let (p, q) = (w[0], w[1]);
        if q <= p {
            continue;
        }
        let m = 0.5 * (p + q);
        let sm = s(m);
        let upper_is_s = sm <= y1;
        let lower_is_s = -sm >= y0;
        let up = if upper_is_s { sm } else { y1 };
        let lo = if lower_is_s { -sm } else { y0 };
        if up <= lo {
            continue;
        }
        let int_up = if upper_is_s { big_s(q) - big_s(p) } else { y1 * (q - p) };
        let int_lo = if lower_is_s { -(big_s(q) - big_s(p)) } else { y0 * (q - p) };
        area += int_up - int_lo;
    }
    area.max(0.0)
}
