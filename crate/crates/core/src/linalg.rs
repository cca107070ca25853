//! Dense complex linear algebra on top of faer.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::Mat;

use crate::C64;

pub type CMat = Mat<C64>;

pub fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

pub fn mat_vec(m: &CMat, v: &[C64]) -> Vec<C64> {
    let n = m.nrows();
    let mut out = vec![zero(); n];
    for j in 0..m.ncols() {
        let vj = v[j];
        if vj == zero() {
            continue;
        }
        let col = m.col(j);
        for i in 0..n {
            out[i] += col[i] * vj;
        }
    }
    out
}

pub fn col_matrix(cols: &[Vec<C64>]) -> CMat {
    let rows = cols.first().map_or(0, |c| c.len());
    Mat::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

pub fn columns(m: &CMat) -> Vec<Vec<C64>> {
    (0..m.ncols()).map(|j| (0..m.nrows()).map(|i| m[(i, j)]).collect()).collect()
}

pub fn adjoint(m: &CMat) -> CMat {
    Mat::from_fn(m.ncols(), m.nrows(), |i, j| m[(j, i)].conj())
}

pub fn identity(n: usize) -> CMat {
    Mat::identity(n, n)
}

pub fn norm1(m: &CMat) -> f64 {
    (0..m.ncols()).map(|j| (0..m.nrows()).map(|i| m[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn max_abs(m: &CMat) -> f64 {
    let mut s = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s = s.max(m[(i, j)].norm());
        }
    }
    s
}

pub fn inverse(m: &CMat) -> CMat {
    m.partial_piv_lu().inverse()
}

pub fn solve(m: &CMat, rhs: &CMat) -> CMat {
    m.partial_piv_lu().solve(rhs)
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return vec![0.0];
    }
    let mut s = m.singular_values().expect("svd converges");
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

pub fn sigma_max(m: &CMat) -> f64 {
    singular_values(m)[0]
}

pub fn cond2(m: &CMat) -> f64 {
    let s = singular_values(m);
    let lo = *s.last().unwrap();
    if lo == 0.0 {
        f64::INFINITY
    } else {
        s[0] / lo
    }
}

fn scale(m: &CMat, c: f64) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * c)
}

fn lin_comb(terms: &[(f64, &CMat)], id_coef: f64) -> CMat {
    let n = terms[0].1.nrows();
    Mat::from_fn(n, n, |i, j| {
        let mut s = if i == j { C64::new(id_coef, 0.0) } else { zero() };
        for (c, m) in terms {
            s += m[(i, j)] * *c;
        }
        s
    })
}

/// exp(A) by scaling and squaring with the degree-13 Padé approximant.
pub fn expm(a: &CMat) -> CMat {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;
    let n = a.nrows();
    let nrm = norm1(a);
    let s = if nrm > THETA13 { (nrm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = scale(a, 0.5f64.powi(s));
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = lin_comb(&[(B[13], &a6), (B[11], &a4), (B[9], &a2)], 0.0);
    let u_poly = &a6 * &inner_u + lin_comb(&[(B[7], &a6), (B[5], &a4), (B[3], &a2)], B[1]);
    let u = &a * &u_poly;
    let inner_v = lin_comb(&[(B[12], &a6), (B[10], &a4), (B[8], &a2)], 0.0);
    let v = &a6 * &inner_v + lin_comb(&[(B[6], &a6), (B[4], &a4), (B[2], &a2)], B[0]);
    let p = &v + &u;
    let q = &v - &u;
    let mut r = solve(&q, &p);
    for _ in 0..s {
        r = &r * &r;
    }
    debug_assert_eq!(r.nrows(), n);
    r
}
