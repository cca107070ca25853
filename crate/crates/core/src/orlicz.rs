//! Growth functions ω, their inverses, the companion function ρ, Luxemburg
//! norms, and sampled checks of the structural assumptions on ω.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used for ω⁻¹.
pub const INVERSE_TOL: f64 = 1e-12;
/// Iteration cap for every bisection in this module.
pub const MAX_BISECTION: usize = 200;
/// Default gap between p̃_ω and p_ω⁺ when the upper-type check fails at p_ω⁺.
pub const DEFAULT_TILDE_KNOB: f64 = 0.01;
/// Tolerance band for "declared vs estimated" index consistency.
pub const INDEX_BAND: f64 = 0.02;

const DEFAULT_T_MAX: f64 = 1e300;

/// Opaque user-supplied ω. Never certified.
#[derive(Clone)]
pub struct CustomOmega {
    pub name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl CustomOmega {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), f: Arc::new(f) }
    }
}

impl fmt::Debug for CustomOmega {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomOmega({})", self.name)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum OrliczFamily {
    /// ω(t) = t^p
    Power { p: f64 },
    /// ω(t) = t^p · ln(shift + t)^a
    PowerLog { p: f64, a: f64, shift: f64 },
    /// ω̃ = v⁻¹ with v(t) = ω⁻¹(t)·t^{1/q − 1/p_ω}
    AssumptionB { base: Box<OrliczFunction>, q: f64 },
    #[serde(skip)]
    Custom(CustomOmega),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "OrliczFamily", into = "OrliczFamily")]
pub struct OrliczFunction {
    pub family: OrliczFamily,
    pub declared_pw: f64,
    pub declared_pw_plus: f64,
    pub declared_pw_tilde: f64,
    pub t_max: f64,
}

impl TryFrom<OrliczFamily> for OrliczFunction {
    type Error = Error;
    fn try_from(family: OrliczFamily) -> Result<Self> {
        OrliczFunction::from_family(family)
    }
}

impl From<OrliczFunction> for OrliczFamily {
    fn from(w: OrliczFunction) -> Self {
        w.family
    }
}

impl OrliczFunction {
    pub fn power(p: f64) -> Self {
        Self::from_family(OrliczFamily::Power { p }).expect("power family with p > 0")
    }

    pub fn power_log(p: f64, a: f64, shift: f64) -> Self {
        Self::from_family(OrliczFamily::PowerLog { p, a, shift }).expect("valid power-log parameters")
    }

    /// t^{1/2} ln(e⁴ + t), the standard non-power example.
    pub fn sqrt_log() -> Self {
        Self::power_log(0.5, 1.0, 4f64.exp())
    }

    pub fn custom(c: CustomOmega, pw: f64, pw_plus: f64) -> Self {
        Self {
            family: OrliczFamily::Custom(c),
            declared_pw: pw,
            declared_pw_plus: pw_plus,
            declared_pw_tilde: pw_plus,
            t_max: DEFAULT_T_MAX,
        }
    }

    pub fn from_family(family: OrliczFamily) -> Result<Self> {
        let (pw, plus) = match &family {
            OrliczFamily::Power { p } => {
                if !(*p > 0.0) || !p.is_finite() {
                    return Err(Error::Config(format!("power exponent must be positive, got {p}")));
                }
                (*p, *p)
            }
            OrliczFamily::PowerLog { p, a, shift } => {
                if !(*p > 0.0) || !(*a >= 0.0) || !(*shift > 1.0) {
                    return Err(Error::Config(format!(
                        "power_log needs p > 0, a >= 0, shift > 1 (got p={p}, a={a}, shift={shift})"
                    )));
                }
                (*p, *p)
            }
            OrliczFamily::AssumptionB { base, q } => {
                let plus = 1.0 / (1.0 / base.declared_pw_plus + 1.0 / q - 1.0 / base.declared_pw);
                (*q, plus)
            }
            OrliczFamily::Custom(_) => {
                return Err(Error::Config("custom ω needs declared indices; use OrliczFunction::custom".into()))
            }
        };
        let mut w = Self { family, declared_pw: pw, declared_pw_plus: plus, declared_pw_tilde: plus, t_max: DEFAULT_T_MAX };
        w.declared_pw_tilde = w.convention_c_tilde(DEFAULT_TILDE_KNOB);
        Ok(w)
    }

    /// p̃_ω: p_ω⁺ when the sampled upper-type check passes there, else p_ω⁺ + knob.
    pub fn convention_c_tilde(&self, knob: f64) -> f64 {
        let spec = SampleSpec::index_default();
        if upper_type_holds(&|t| self.value(t), self.declared_pw_plus, &spec) {
            self.declared_pw_plus
        } else {
            self.declared_pw_plus + knob
        }
    }

    pub fn with_tilde_knob(mut self, knob: f64) -> Self {
        self.declared_pw_tilde = self.convention_c_tilde(knob);
        self
    }

    pub fn is_certifiable(&self) -> bool {
        !matches!(self.family, OrliczFamily::Custom(_))
    }

    /// Exponent p when ω(t) = t^p exactly.
    pub fn power_exponent(&self) -> Option<f64> {
        match self.family {
            OrliczFamily::Power { p } => Some(p),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match &self.family {
            OrliczFamily::Power { p } => format!("t^{p}"),
            OrliczFamily::PowerLog { p, a, shift } => format!("t^{p}*ln({shift}+t)^{a}"),
            OrliczFamily::AssumptionB { base, q } => format!("B[{}; q={q}]", base.label()),
            OrliczFamily::Custom(c) => format!("custom:{}", c.name),
        }
    }

    /// ω(t) for t > 0 without domain checks; ω(0) = 0.
    pub fn value(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.family {
            OrliczFamily::Power { p } => t.powf(*p),
            OrliczFamily::PowerLog { p, a, shift } => t.powf(*p) * (shift + t).ln().powf(*a),
            OrliczFamily::AssumptionB { base, q } => {
                // v(ω(u)) = u·ω(u)^c, so ω̃(t) = ω(u) where u·ω(u)^c = t.
                let c = 1.0 / q - 1.0 / base.declared_pw;
                let g = |u: f64| u * base.value(u).powf(c);
                match solve_increasing(g, t, t) {
                    Ok(u) => base.value(u),
                    Err(_) => f64::NAN,
                }
            }
            OrliczFamily::Custom(c) => (c.f)(t),
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) || t > self.t_max {
            return Err(Error::Domain(format!("ω evaluated at t={t}, domain is (0, {}]", self.t_max)));
        }
        Ok(self.value(t))
    }

    pub fn inverse(&self, y: f64, tol: f64) -> Result<f64> {
        if !(y > 0.0) || !y.is_finite() {
            return Err(Error::Range(format!("ω⁻¹ needs a positive finite argument, got {y}")));
        }
        let top = self.value(self.t_max);
        if y > top {
            return Err(Error::Range(format!("{y} exceeds ω(t_max)={top}")));
        }
        let t = solve_increasing(|t| self.value(t), y, y)?;
        let err = (self.value(t) - y).abs();
        if err > tol * y {
            return Err(Error::NonConvergence {
                what: format!("ω⁻¹({y}) residual {err:e}"),
                iterations: MAX_BISECTION,
            });
        }
        Ok(t)
    }

    /// ρ(t) = t⁻¹ / ω⁻¹(t⁻¹).
    pub fn rho(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("ρ evaluated at t={t}")));
        }
        let inv = self.inverse(1.0 / t, INVERSE_TOL)?;
        Ok((1.0 / t) / inv)
    }

    pub fn growth(&self) -> GrowthFunction {
        GrowthFunction { source: self.clone(), exponent_shift: 0.0 }
    }
}

pub fn eval_omega(w: &OrliczFunction, t: f64) -> Result<f64> {
    w.eval(t)
}

pub fn inverse_omega(w: &OrliczFunction, y: f64, tol: f64) -> Result<f64> {
    w.inverse(y, tol)
}

pub fn rho(w: &OrliczFunction, t: f64) -> Result<f64> {
    w.rho(t)
}

/// ρ multiplied by a power: ρ(t)·t^{shift}. With shift = 0 this is ρ itself.
#[derive(Clone, Debug)]
pub struct GrowthFunction {
    pub source: OrliczFunction,
    pub exponent_shift: f64,
}

impl GrowthFunction {
    pub fn eval(&self, t: f64) -> Result<f64> {
        Ok(self.source.rho(t)? * t.powf(self.exponent_shift))
    }
}

/// Solve f(x) = y for x > 0 where f is increasing; geometric bisection.
pub(crate) fn solve_increasing(f: impl Fn(f64) -> f64, y: f64, hint: f64) -> Result<f64> {
    let start = if hint > 0.0 && hint.is_finite() { hint } else { 1.0 };
    let (mut lo, mut hi) = (start, start);
    let mut steps = 0;
    while !(f(hi) >= y) {
        hi *= 256.0;
        steps += 1;
        if steps > 300 || !hi.is_finite() {
            return Err(Error::Range(format!("no upper bracket for level {y}")));
        }
    }
    steps = 0;
    while !(f(lo) < y) {
        lo /= 256.0;
        steps += 1;
        if steps > 300 || lo == 0.0 {
            return Err(Error::Range(format!("no lower bracket for level {y}")));
        }
    }
    for _ in 0..MAX_BISECTION {
        if hi / lo - 1.0 <= 4.0 * f64::EPSILON {
            break;
        }
        let mid = lo * (hi / lo).sqrt();
        if f(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo * (hi / lo).sqrt())
}

/// Find λ > 0 with F(λ) = 1 for F decreasing from +∞ to 0. Non-finite values
/// of F (overflow near λ = 0) are treated as "above 1".
pub(crate) fn solve_unit_level(f: impl Fn(f64) -> f64, hint: f64) -> Result<f64> {
    let above = |lam: f64| {
        let v = f(lam);
        !v.is_finite() || v > 1.0
    };
    let start = if hint > 0.0 && hint.is_finite() { hint } else { 1.0 };
    let (mut lo, mut hi) = (start, start);
    let mut steps = 0;
    while above(hi) {
        hi *= 16.0;
        steps += 1;
        if steps > 600 || !hi.is_finite() {
            return Err(Error::NonConvergence { what: "upper bracket for Luxemburg-type root".into(), iterations: steps });
        }
    }
    steps = 0;
    while !above(lo) {
        lo /= 16.0;
        steps += 1;
        if steps > 600 || lo == 0.0 {
            return Err(Error::NonConvergence { what: "lower bracket for Luxemburg-type root".into(), iterations: steps });
        }
    }
    for _ in 0..MAX_BISECTION {
        if hi / lo - 1.0 <= 4.0 * f64::EPSILON {
            return Ok(lo * (hi / lo).sqrt());
        }
        let mid = lo * (hi / lo).sqrt();
        if above(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo * (hi / lo).sqrt())
}

/// inf{λ > 0 : Σ weights·ω(values/λ) ≤ 1}.
pub fn luxemburg_norm(values: &[f64], weights: &[f64], w: &OrliczFunction) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::Domain("values and weights differ in length".into()));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::Domain(format!("Luxemburg norm of a non-finite or negative value {v}")));
    }
    let vmax = values.iter().cloned().fold(0.0, f64::max);
    if vmax == 0.0 {
        return Ok(0.0);
    }
    let sum = |lam: f64| values.iter().zip(weights).filter(|(v, _)| **v > 0.0).map(|(v, m)| m * w.value(v / lam)).sum::<f64>();
    solve_unit_level(sum, vmax)
}

/// Luxemburg norm with a single cell measure for every value.
pub fn luxemburg_norm_uniform(values: &[f64], cell: f64, w: &OrliczFunction) -> Result<f64> {
    let weights = vec![cell; values.len()];
    luxemburg_norm(values, &weights, w)
}

/// Σ weights·ω(values): the modular.
pub fn orlicz_integral(values: &[f64], cell: f64, w: &OrliczFunction) -> f64 {
    values.iter().map(|v| cell * w.value(*v)).sum()
}

/// Log-spaced sample grid used for index estimation and the assumption checks.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct SampleSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self { lo: 1e-6, hi: 1e6, n: 64 }
    }
}

impl SampleSpec {
    /// The wide grid used for type indices. Slowly varying factors such as
    /// ln(e⁴ + t) only stop biasing the end-window slopes at very large ratios.
    pub fn index_default() -> Self {
        Self { lo: 1e-40, hi: 1e40, n: 64 }
    }

    pub fn points(&self) -> Vec<f64> {
        let (a, b) = (self.lo.ln(), self.hi.ln());
        (0..self.n).map(|i| (a + (b - a) * i as f64 / (self.n - 1) as f64).exp()).collect()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IndexReport {
    /// Strict lower type: inf of log-slopes over t < 1.
    pub p_w: f64,
    /// Lower type allowing a constant: end-window slope as t → 0.
    pub p_minus: f64,
    /// Upper type allowing a constant: end-window slope as t → ∞.
    pub p_plus: f64,
    pub consistent: bool,
    pub spec: SampleSpec,
}

struct RatioTable {
    ts: Vec<f64>,
    /// r[k][i] = ln f(s_i t_k) − ln f(s_i)
    r: Vec<Vec<f64>>,
}

fn ratio_table(f: &dyn Fn(f64) -> f64, spec: &SampleSpec) -> RatioTable {
    let s = spec.points();
    let ts = spec.points();
    let ls: Vec<f64> = s.iter().map(|x| f(*x).ln()).collect();
    let r = ts
        .iter()
        .map(|t| s.iter().zip(&ls).map(|(si, l)| f(si * t).ln() - l).collect())
        .collect();
    RatioTable { ts, r }
}

fn end_window_slope(ts: &[f64], vals: &[f64]) -> f64 {
    // ts is ordered away from 1; slope between the middle and the last point.
    let m = ts.len() / 2;
    let last = ts.len() - 1;
    (vals[last] - vals[m]) / (ts[last].ln() - ts[m].ln())
}

/// Empirical type indices of an arbitrary positive function.
pub fn estimate_indices_of(f: &dyn Fn(f64) -> f64, spec: &SampleSpec) -> (f64, f64, f64) {
    let table = ratio_table(f, spec);
    let mut p_w = f64::INFINITY;
    let (mut below_t, mut below_w) = (Vec::new(), Vec::new());
    let (mut above_t, mut above_u) = (Vec::new(), Vec::new());
    for (k, t) in table.ts.iter().enumerate() {
        let row = &table.r[k];
        if *t < 1.0 {
            for v in row {
                p_w = p_w.min(v / t.ln());
            }
            below_t.push(*t);
            below_w.push(row.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        } else if *t > 1.0 {
            above_t.push(*t);
            above_u.push(row.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        }
    }
    below_t.reverse();
    below_w.reverse();
    let p_minus = end_window_slope(&below_t, &below_w);
    let p_plus = end_window_slope(&above_t, &above_u);
    (p_w, p_minus, p_plus)
}

pub fn estimate_type_indices(w: &OrliczFunction, spec: &SampleSpec) -> IndexReport {
    let (p_w, p_minus, p_plus) = estimate_indices_of(&|t| w.value(t), spec);
    let consistent = (p_w - w.declared_pw).abs() <= INDEX_BAND && (p_plus - w.declared_pw_plus).abs() <= INDEX_BAND;
    IndexReport { p_w, p_minus, p_plus, consistent, spec: *spec }
}

/// Sampled upper-type test with a free constant: sup_s f(st)/(t^p f(s)) must
/// stop growing over the far half of the t-range.
pub fn upper_type_holds(f: &dyn Fn(f64) -> f64, p: f64, spec: &SampleSpec) -> bool {
    let table = ratio_table(f, spec);
    let mut g = Vec::new();
    let mut ts = Vec::new();
    for (k, t) in table.ts.iter().enumerate() {
        if *t > 1.0 {
            let u = table.r[k].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            g.push(u - p * t.ln());
            ts.push(*t);
        }
    }
    let m = g.len() / 2;
    let tail_max = g[m..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    tail_max - g[m] <= 1e-9 * (1.0 + g[m].abs())
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct Check {
    pub pass: bool,
    /// Worst relative margin; negative means violated.
    pub margin: f64,
}

impl Check {
    fn from_margin(margin: f64, tol: f64) -> Self {
        Self { pass: margin >= -tol, margin }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssumptionAReport {
    pub monotone: Check,
    pub concave: Check,
    pub subadditive: Check,
    pub lower_type: Check,
    pub upper_type_one: Check,
    pub certified: bool,
}

impl AssumptionAReport {
    pub fn all_pass(&self) -> bool {
        self.certified
            && self.monotone.pass
            && self.concave.pass
            && self.subadditive.pass
            && self.lower_type.pass
            && self.upper_type_one.pass
    }
}

const CHECK_TOL: f64 = 1e-10;

pub fn verify_assumption_a(w: &OrliczFunction, spec: &SampleSpec) -> AssumptionAReport {
    let xs = spec.points();
    let vals: Vec<f64> = xs.iter().map(|x| w.value(*x)).collect();

    let mut mono = f64::INFINITY;
    let mut slopes = Vec::with_capacity(xs.len());
    for i in 0..xs.len() - 1 {
        mono = mono.min((vals[i + 1] - vals[i]) / vals[i + 1]);
        slopes.push((vals[i + 1] - vals[i]) / (xs[i + 1] - xs[i]));
    }
    let mut conc = f64::INFINITY;
    for i in 0..slopes.len() - 1 {
        conc = conc.min((slopes[i] - slopes[i + 1]) / slopes[i].abs().max(f64::MIN_POSITIVE));
    }

    let p = w.declared_pw;
    let (mut sub, mut low, mut up) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for (i, s) in xs.iter().enumerate() {
        for t in &xs {
            let ws = vals[i];
            let wt = w.value(*t);
            sub = sub.min((ws + wt - w.value(s + t)) / (ws + wt));
            let wst = w.value(s * t);
            if *t < 1.0 {
                let bound = t.powf(p) * ws;
                low = low.min((bound - wst) / bound);
            } else if *t > 1.0 {
                let bound = t * ws;
                up = up.min((bound - wst) / bound);
            }
        }
    }
    AssumptionAReport {
        monotone: Check { pass: mono > 0.0, margin: mono },
        concave: Check::from_margin(conc, CHECK_TOL),
        subadditive: Check::from_margin(sub, CHECK_TOL),
        lower_type: Check::from_margin(low, CHECK_TOL),
        upper_type_one: Check::from_margin(up, CHECK_TOL),
        certified: w.is_certifiable(),
    }
}

#[derive(Clone, Debug)]
pub struct AssumptionBReport {
    pub omega_tilde: OrliczFunction,
    pub rho_tilde: GrowthFunction,
    /// p_{ω̃} = q.
    pub p_tilde: f64,
    /// p_{ω̃}⁺ = 1/(1/p_ω⁺ + 1/q − 1/p_ω).
    pub p_tilde_plus: f64,
    /// Worst relative convexity margin of v on the sample grid.
    pub convexity_margin: f64,
}

/// Build ω̃ = v⁻¹ with v(t) = ω⁻¹(t)·t^{1/q−1/p_ω}, and ρ̃ = ρ·t^{1/q−1/p_ω}.
pub fn assumption_b_transform(w: &OrliczFunction, q: f64) -> Result<AssumptionBReport> {
    let pw = w.declared_pw;
    if !(q >= pw - 1e-12 && q <= 1.0 + 1e-12) {
        return Err(Error::Guard(format!("q={q} outside [p_ω, 1] = [{pw}, 1]")));
    }
    let c = 1.0 / q - 1.0 / pw;
    // Parametrize by u = ω⁻¹(t): v(ω(u)) = u·ω(u)^c. Convexity of v is
    // tested on secant slopes along this parametrization.
    let us = SampleSpec::default().points();
    let pts: Vec<(f64, f64)> = us
        .iter()
        .map(|u| {
            let t = w.value(*u);
            (t, u * t.powf(c))
        })
        .collect();
    let mut margin = f64::INFINITY;
    let mut prev: Option<f64> = None;
    for k in 0..pts.len() - 1 {
        let s = (pts[k + 1].1 - pts[k].1) / (pts[k + 1].0 - pts[k].0);
        if let Some(ps) = prev {
            margin = margin.min((s - ps) / s.abs().max(f64::MIN_POSITIVE));
        }
        prev = Some(s);
    }
    let v0 = pts[0].1 / pts[pts.len() - 1].1;
    if margin < -CHECK_TOL || !(v0 < 1e-6) {
        return Err(Error::Guard(format!(
            "Assumption (B) fails for q={q}: convexity margin {margin:e}, v(t_min)/v(t_max) = {v0:e}"
        )));
    }
    let omega_tilde = OrliczFunction::from_family(OrliczFamily::AssumptionB { base: Box::new(w.clone()), q })?;
    Ok(AssumptionBReport {
        p_tilde: omega_tilde.declared_pw,
        p_tilde_plus: omega_tilde.declared_pw_plus,
        rho_tilde: GrowthFunction { source: w.clone(), exponent_shift: c },
        omega_tilde,
        convexity_margin: margin,
    })
}
