use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tentlab::applications::{check_index_relation, require_embedding_range};
use tentlab::fixtures::CorpusSpec;
use tentlab::hardy::{check_hypotheses, default_eps, default_m, DEFAULT_SLACK};
use tentlab::operator::assemble;
use tentlab::orlicz::{assumption_b_transform, verify_assumption_a};
use tentlab::square_maximal::Functional;
use tentlab::tent_atoms::DEFAULT_GAMMA;
use tentlab::{CoefficientField, EllipticOperator, Grid, OrliczFamily, OrliczFunction, SampleSpec, TimeGrid, C64};

use crate::error::CliError;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coefficients {
    Identity,
    /// 1 + iε cos(2πx₁/L) on the diagonal (1-D) or off-diagonal (2-D).
    Perturbed { eps: f64 },
    /// One constant n×n block, entries as [re, im].
    Constant { a: [[[f64; 2]; 2]; 2] },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorSpec {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
    pub coefficients: Coefficients,
}

impl Default for OperatorSpec {
    fn default() -> Self {
        Self { dim: 1, n: 64, length: 1.0, coefficients: Coefficients::Identity }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Default)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSpec {
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub levels: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct FunctionalSpec {
    pub name: String,
    pub beta: f64,
    pub order: u32,
}

impl Default for FunctionalSpec {
    fn default() -> Self {
        Self { name: "s_l".into(), beta: 1.0, order: 1 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DecompositionSpec {
    pub m: Option<u32>,
    pub eps: Option<f64>,
    pub gamma: f64,
    pub slack: f64,
}

impl Default for DecompositionSpec {
    fn default() -> Self {
        Self { m: None, eps: None, gamma: DEFAULT_GAMMA, slack: DEFAULT_SLACK }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct FractionalSpec {
    pub q: f64,
    /// Defaults to n(1/p_ω − 1/q)/2.
    pub gamma: Option<f64>,
}

impl Default for FractionalSpec {
    fn default() -> Self {
        Self { q: 1.0, gamma: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    /// Field file for the reconstruction written by `decompose`.
    pub field: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub operator: OperatorSpec,
    pub omega: OrliczFamily,
    pub time: TimeSpec,
    pub functionals: Vec<FunctionalSpec>,
    pub decomposition: DecompositionSpec,
    pub fractional: FractionalSpec,
    pub bmo_q: Vec<f64>,
    pub probes: Vec<String>,
    pub seed: u64,
    pub corpus: CorpusSpec,
    /// Field file to use instead of the generated corpus.
    pub input: Option<PathBuf>,
    pub output: OutputSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            operator: OperatorSpec::default(),
            omega: OrliczFamily::Power { p: 0.8 },
            time: TimeSpec::default(),
            functionals: vec![FunctionalSpec::default()],
            decomposition: DecompositionSpec::default(),
            fractional: FractionalSpec::default(),
            bmo_q: vec![1.5, 2.0, 3.0],
            probes: Vec::new(),
            seed: 0,
            corpus: CorpusSpec::default(),
            input: None,
            output: OutputSpec::default(),
        }
    }
}

pub const PROBES: [&str; 14] = [
    "gaffney",
    "lp",
    "atoms",
    "aperture",
    "calderon",
    "molecules",
    "molecule_bound",
    "riesz_hardy",
    "g_hardy",
    "offdiagonal",
    "frac_integral",
    "classical_chain",
    "embedding",
    "pairing",
];

/// Extra names accepted by `probe`: the BMO battery.
pub const BMO_PROBE: &str = "john_nirenberg";

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Guard(format!("config {}: {e}", path.display())))
    }
}

/// Parses "power:0.8", "sqrt_log" or "power_log:p:a:shift".
pub fn parse_omega(s: &str) -> Result<OrliczFamily, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |i: usize| -> Result<f64, CliError> {
        parts.get(i).ok_or_else(|| CliError::Guard(format!("omega '{s}' is missing a parameter")))?.parse::<f64>().map_err(|e| CliError::Guard(format!("omega '{s}': {e}")))
    };
    match parts[0] {
        "power" => Ok(OrliczFamily::Power { p: num(1)? }),
        "sqrt_log" => Ok(OrliczFamily::PowerLog { p: 0.5, a: 1.0, shift: 4f64.exp() }),
        "power_log" => Ok(OrliczFamily::PowerLog { p: num(1)?, a: num(2)?, shift: num(3)? }),
        other => Err(CliError::Guard(format!("unknown omega family '{other}'"))),
    }
}

/// Everything a command needs, built once and guarded.
pub struct Setup {
    pub config: ExperimentConfig,
    pub grid: Grid,
    pub op: EllipticOperator,
    pub omega: OrliczFunction,
    pub time: TimeGrid,
    pub m: u32,
    pub eps: f64,
    pub frac_gamma: f64,
    pub functionals: Vec<Functional>,
}

fn c(z: [f64; 2]) -> C64 {
    C64::new(z[0], z[1])
}

impl Setup {
    pub fn build(config: ExperimentConfig) -> Result<Self, CliError> {
        let o = &config.operator;
        let grid = Grid::new(o.dim, o.n, o.length)?;
        let coeff = match &o.coefficients {
            Coefficients::Identity => CoefficientField::identity(grid),
            Coefficients::Perturbed { eps } => CoefficientField::perturbed_identity(grid, *eps),
            Coefficients::Constant { a } => CoefficientField::constant(grid, [[c(a[0][0]), c(a[0][1])], [c(a[1][0]), c(a[1][1])]]),
        };
        let op = assemble(grid, coeff)?;
        let omega = OrliczFunction::from_family(config.omega.clone())?;
        let a = verify_assumption_a(&omega, &SampleSpec::default());
        if !a.all_pass() {
            return Err(CliError::Guard(format!(
                "ω = {} fails Assumption (A): monotone {}, concave {}, subadditive {}, lower type {} ({:e}), upper type 1 {}",
                omega.label(),
                a.monotone.pass,
                a.concave.pass,
                a.subadditive.pass,
                a.lower_type.pass,
                a.lower_type.margin,
                a.upper_type_one.pass
            )));
        }
        let t = &config.time;
        let levels = t.levels.unwrap_or(32);
        let time = TimeGrid::for_grid(&grid, t.t_min.unwrap_or(grid.h() / 4.0), t.t_max.unwrap_or(grid.length), levels)?;
        let m = config.decomposition.m.unwrap_or_else(|| default_m(grid.dim, omega.declared_pw));
        let eps = config.decomposition.eps.unwrap_or_else(|| default_eps(grid.dim, &omega));
        check_hypotheses(grid.dim, &omega, m, eps)?;
        if !(config.decomposition.gamma > 0.0 && config.decomposition.gamma < 1.0) {
            return Err(CliError::Guard(format!("γ_density={} ∉ (0, 1)", config.decomposition.gamma)));
        }
        if !(config.decomposition.slack >= 0.0) {
            return Err(CliError::Guard(format!("slack={} < 0", config.decomposition.slack)));
        }
        let functionals = config.functionals.iter().map(|f| Functional::parse(&f.name, f.beta, f.order)).collect::<tentlab::Result<Vec<_>>>()?;
        for p in &config.probes {
            if !PROBES.contains(&p.as_str()) && p != BMO_PROBE {
                return Err(CliError::Guard(format!("unknown probe '{p}' (known: {}, {BMO_PROBE})", PROBES.join(", "))));
            }
        }
        let fr = &config.fractional;
        let frac_gamma = fr.gamma.unwrap_or(grid.dim as f64 * (1.0 / omega.declared_pw - 1.0 / fr.q) / 2.0);
        if config.probes.iter().any(|p| p == "frac_integral") {
            check_index_relation(grid.dim, omega.declared_pw, fr.q, frac_gamma)?;
            assumption_b_transform(&omega, fr.q)?;
        }
        if config.probes.iter().any(|p| p == "classical_chain" || p == "embedding") {
            require_embedding_range(grid.dim, &omega)?;
        }
        if config.bmo_q.iter().any(|q| !(*q >= 1.0)) {
            return Err(CliError::Guard("BMO exponents q must be ≥ 1".into()));
        }
        Ok(Self { config, grid, op, omega, time, m, eps, frac_gamma, functionals })
    }
}
