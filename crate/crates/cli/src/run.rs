use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde_json::{json, Value};
use tentlab::applications::{
    classical_chain, frac_integral_probe, offdiagonal_condition_probe, riesz_hardy_probe, standard_condition_samples, ChainInput, HardyTarget,
    RieszHandle,
};
use tentlab::bmo_dual::{bmo_norm, bmo_resolvent_norm, duality_pairing, john_nirenberg_probe, pairing_time_grid, BallLadder};
use tentlab::fieldfile::{Dtype, FieldFile};
use tentlab::fixtures::fixture_corpus;
use tentlab::hardy::{
    c_m, c_tilde_m, calderon_residual, heat_tent_field, molecular_decompose, molecule_norm_bound_probe, verify_molecule, MoleculeParams,
    DEFAULT_Q_LIST, MOLECULE_MULTIPLE,
};
use tentlab::operator::{gaffney_probe, l2_cell, lp_boundedness_probe, set_distance, ProbeFamily};
use tentlab::orlicz::{assumption_b_transform, estimate_type_indices};
use tentlab::square_maximal::functional_norm;
use tentlab::tent_atoms::{atomic_decompose, reconstruction_residual, verify_atom};
use tentlab::tent_field::{aperture_ratio_probe, area_function, t_omega_norm};
use tentlab::{EllipticOperator, Grid, KernelPolicy, SampleSpec, TimeGrid, C64};

use crate::config::{Setup, BMO_PROBE};
use crate::error::CliError;
use crate::report::{num, Report, Section, Table};

/// Frozen bound for ∫ω(|λ|S_Lα)/(|B|ω(|λ|/(|B|ρ(|B|)))).
pub const MOLECULE_BOUND: f64 = 1.0;
const CALDERON_LEVELS: usize = 128;
const PAIRING_LEVELS: usize = 400;

pub struct Fixture {
    pub name: String,
    pub values: Vec<C64>,
}

pub fn fixtures(s: &Setup) -> Result<Vec<Fixture>, CliError> {
    if let Some(path) = &s.config.input {
        let file = FieldFile::read(path)?;
        if file.values.len() != s.grid.cells() {
            return Err(CliError::Guard(format!(
                "{} holds {} values (dims {:?}), the grid has {} cells",
                path.display(),
                file.values.len(),
                file.header.dims,
                s.grid.cells()
            )));
        }
        return Ok(vec![Fixture { name: "input".into(), values: file.values }]);
    }
    Ok(fixture_corpus(&s.op, s.config.seed, &s.config.corpus)?.into_iter().map(|f| Fixture { name: f.name, values: f.values }).collect())
}

fn metadata(s: &Setup) -> BTreeMap<String, Value> {
    let (mu_min, mu_max) = s.op.spectral_bounds();
    let (lam, big) = s.op.ellipticity();
    let w = &s.omega;
    let mut m = BTreeMap::new();
    m.insert("dim".into(), json!(s.grid.dim));
    m.insert("n".into(), json!(s.grid.n));
    m.insert("length".into(), num(s.grid.length));
    m.insert("h".into(), num(s.grid.h()));
    m.insert("spectral_calculus".into(), json!(s.op.is_spectral()));
    m.insert("eigenbasis_condition".into(), num(s.op.eigenbasis_condition()));
    m.insert("hermitian".into(), json!(s.op.is_hermitian()));
    m.insert("mu_min".into(), num(mu_min));
    m.insert("mu_max".into(), num(mu_max));
    m.insert("ellipticity_lambda".into(), num(lam));
    m.insert("ellipticity_upper".into(), num(big));
    m.insert("operator_warning".into(), json!(s.op.warning()));
    m.insert("omega".into(), json!(w.label()));
    m.insert("p_omega".into(), num(w.declared_pw));
    m.insert("p_omega_plus".into(), num(w.declared_pw_plus));
    m.insert("p_omega_tilde".into(), num(w.declared_pw_tilde));
    m.insert("t_min".into(), num(s.time.levels[0]));
    m.insert("t_max".into(), num(*s.time.levels.last().unwrap()));
    m.insert("levels".into(), json!(s.time.len()));
    m.insert("m".into(), json!(s.m));
    m.insert("eps".into(), num(s.eps));
    m.insert("seed".into(), json!(s.config.seed));
    m
}

fn report(command: &str, s: &Setup, sections: Vec<Section>) -> Report {
    Report {
        command: command.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: serde_json::to_value(&s.config).expect("config serializes"),
        metadata: metadata(s),
        sections,
        pass: true,
    }
    .finish()
}

fn max_of(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, f64::max)
}

pub fn ops(s: &Setup) -> Result<Report, CliError> {
    let mut t = Table::new(&["index", "re", "im"]);
    if let Some(ev) = s.op.eigenvalues() {
        let mut ev = ev;
        ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        for (i, z) in ev.iter().enumerate() {
            t.push(vec![json!(i), num(z.re), num(z.im)]);
        }
    }
    Ok(report("ops", s, vec![Section::new("spectrum", t)]))
}

fn decompose_section(s: &Setup, fx: &[Fixture], name: &str) -> Result<(Section, Vec<Vec<C64>>), CliError> {
    let params = MoleculeParams {
        m: s.m,
        eps: s.eps,
        q_list: DEFAULT_Q_LIST.to_vec(),
        slack: s.config.decomposition.slack,
        multiple: MOLECULE_MULTIPLE,
    };
    let mut t = Table::new(&["fixture", "molecules", "lambda", "tent_lambda", "residual_l2", "uncovered", "worst_ratio", "failed"]);
    let mut pass = true;
    let mut synth = Vec::new();
    for f in fx {
        let (dec, _) = molecular_decompose(&s.op, &f.values, &s.omega, s.m, s.eps, s.config.decomposition.gamma, &s.time)?;
        let mut worst = 0.0f64;
        let mut failed = 0usize;
        for mol in &dec.molecules {
            let cert = verify_molecule(&s.op, &mol.values, &mol.ball, &s.omega, &params)?;
            worst = worst.max(cert.worst_ratio);
            failed += usize::from(!cert.pass);
        }
        pass &= failed == 0;
        t.push(vec![
            json!(f.name),
            json!(dec.molecules.len()),
            num(dec.lambda_value),
            num(dec.tent_lambda_value),
            num(dec.residual_l2),
            json!(dec.uncovered),
            num(worst),
            json!(failed),
        ]);
        synth.push(dec.synthesize(s.grid.cells()));
    }
    Ok((Section::new(name, t).with_pass(pass).note("slack", num(params.slack)).note("multiple", num(params.multiple)), synth))
}

pub fn decompose(s: &Setup) -> Result<Report, CliError> {
    let fx = fixtures(s)?;
    let (sec, synth) = decompose_section(s, &fx, "molecules")?;
    if let Some(path) = &s.config.output.field {
        if synth.len() != 1 {
            return Err(CliError::Guard("output.field needs a single input field".into()));
        }
        let dims = vec![s.grid.n; s.grid.dim];
        FieldFile::new(Dtype::Complex128, dims, synth.into_iter().next().unwrap())?.write(path)?;
    }
    Ok(report("decompose", s, vec![sec]))
}

pub fn norms(s: &Setup) -> Result<Report, CliError> {
    let fx = fixtures(s)?;
    let mut t = Table::new(&["fixture", "functional", "beta", "order", "norm"]);
    for f in &fx {
        for (spec, func) in s.config.functionals.iter().zip(&s.functionals) {
            let v = functional_norm(&s.op, &f.values, *func, &s.time, &s.omega)?;
            t.push(vec![json!(f.name), json!(spec.name), num(spec.beta), json!(spec.order), num(v)]);
        }
    }
    Ok(report("norms", s, vec![Section::new("norms", t)]))
}

fn bmo_sections(s: &Setup, fx: &[Fixture]) -> Result<Vec<Section>, CliError> {
    let star = s.op.adjoint();
    let ladder = BallLadder::dyadic(&s.grid);
    let mut t = Table::new(&["fixture", "q", "semigroup", "resolvent"]);
    let mut jn = Table::new(&["fixture", "max_ratio", "holder_ordered"]);
    let mut pass = true;
    let mut worst = 0.0f64;
    for f in fx {
        for &q in &s.config.bmo_q {
            let a = bmo_norm(&star, &f.values, &s.omega, q, s.m, &ladder)?.norm;
            let b = bmo_resolvent_norm(&star, &f.values, &s.omega, q, s.m, &ladder)?.norm;
            t.push(vec![json!(f.name), num(q), num(a), num(b)]);
        }
        let r = john_nirenberg_probe(&star, &f.values, &s.omega, s.m, &s.config.bmo_q, &ladder)?;
        pass &= r.holder_ordered;
        worst = worst.max(r.max_ratio);
        jn.push(vec![json!(f.name), num(r.max_ratio), json!(r.holder_ordered)]);
    }
    Ok(vec![Section::new("bmo", t), Section::new(BMO_PROBE, jn).with_pass(pass).note("max_ratio", num(worst))])
}

pub fn bmo(s: &Setup) -> Result<Report, CliError> {
    let fx = fixtures(s)?;
    Ok(report("bmo", s, bmo_sections(s, &fx)?))
}

fn strip(grid: &Grid, lo: usize, hi: usize) -> Vec<bool> {
    (0..grid.cells()).map(|i| (lo..hi).contains(&grid.coords(i)[0])).collect()
}

fn gaffney(s: &Setup) -> Result<Section, CliError> {
    let n = s.grid.n;
    let w = (n / 16).max(1);
    let gap = (n / 4).max(1);
    let e = strip(&s.grid, 0, w);
    let f = strip(&s.grid, w + gap, 2 * w + gap);
    let d = set_distance(&s.op, &e, &f);
    let mut t = Table::new(&["family", "beta", "c", "r2", "points", "below_floor"]);
    let mut pass = true;
    for (fam, lo, hi) in [(ProbeFamily::Heat, 0.8, 1.2), (ProbeFamily::Resolvent, 0.35, 0.65)] {
        let r = gaffney_probe(&s.op, &e, &f, fam, &fam.standard_times(d, 12))?;
        pass &= !r.below_floor && r.beta >= lo && r.beta <= hi && r.r2 >= 0.9;
        t.push(vec![json!(fam), num(r.beta), num(r.c), num(r.r2), json!(r.points_used), json!(r.below_floor)]);
    }
    Ok(Section::new("gaffney", t).with_pass(pass).note("dist", num(d)))
}

fn lp(s: &Setup) -> Result<Section, CliError> {
    let ts: Vec<f64> = (0..5).map(|i| 1e-4 * 10f64.powi(i)).collect();
    let ps = [1.0, 1.5, 2.0, 4.0, f64::INFINITY];
    let r = lp_boundedness_probe(&s.op, ProbeFamily::Heat, &ps, &ts, s.config.seed)?;
    let mut t = Table::new(&["p", "t", "norm"]);
    for row in &r.rows {
        t.push(vec![json!(if row.p.is_infinite() { "inf".to_string() } else { row.p.to_string() }), num(row.t), num(row.norm)]);
    }
    let pass = r.rows.iter().all(|x| x.norm.is_finite());
    Ok(Section::new("lp", t).with_pass(pass).note("sup", num(max_of(r.sup_by_p.iter().map(|x| x.1)))))
}

fn atoms(s: &Setup, fx: &[Fixture]) -> Result<Section, CliError> {
    let mut t = Table::new(&["fixture", "atoms", "lambda", "t_omega", "ratio", "residual_sup", "uncovered", "failed"]);
    let mut pass = true;
    for f in fx {
        let tent = heat_tent_field(&s.op, &f.values, &s.time)?;
        let d = atomic_decompose(&tent, &s.omega, s.config.decomposition.gamma)?;
        let res = reconstruction_residual(&tent, &d)?.sup;
        let mut failed = 0usize;
        for a in &d.atoms {
            failed += usize::from(!verify_atom(a, &s.omega, &[1.0, 2.0], s.config.decomposition.slack)?.pass);
        }
        let norm = t_omega_norm(&tent, &s.omega)?;
        pass &= failed == 0 && res <= 1e-12 && d.uncovered.is_empty();
        t.push(vec![
            json!(f.name),
            json!(d.atoms.len()),
            num(d.lambda_value),
            num(norm),
            num(if norm > 0.0 { d.lambda_value / norm } else { f64::NAN }),
            num(res),
            json!(d.uncovered.len()),
            json!(failed),
        ]);
    }
    Ok(Section::new("atoms", t).with_pass(pass))
}

fn aperture(s: &Setup, fx: &[Fixture]) -> Result<Section, CliError> {
    let mut t = Table::new(&["fixture", "integral_half", "integral_two", "ratio", "monotone"]);
    let mut pass = true;
    for f in fx {
        let tent = heat_tent_field(&s.op, &f.values, &s.time)?;
        let r = aperture_ratio_probe(&tent, 0.5, 2.0, &s.omega)?;
        let areas = [0.5, 1.0, 2.0].iter().map(|nu| area_function(&tent, *nu)).collect::<tentlab::Result<Vec<_>>>()?;
        let mono = areas.windows(2).all(|a| a[0].iter().zip(&a[1]).all(|(x, y)| x <= y));
        pass &= mono;
        t.push(vec![json!(f.name), num(r.integral_eta), num(r.integral_nu), num(r.ratio), json!(mono)]);
    }
    Ok(Section::new("aperture", t).with_pass(pass))
}

fn calderon(s: &Setup, fx: &[Fixture]) -> Result<Section, CliError> {
    let time = TimeGrid::standard(&s.grid, CALDERON_LEVELS)?;
    let mut t = Table::new(&["fixture", "residual"]);
    let mut worst = 0.0f64;
    for f in fx {
        let r = calderon_residual(&s.op, &f.values, s.m, &time)?;
        worst = worst.max(r);
        t.push(vec![json!(f.name), num(r)]);
    }
    Ok(Section::new("calderon", t).with_pass(worst <= 1e-3).note("levels", CALDERON_LEVELS).note("worst", num(worst)))
}

fn molecule_bound(s: &Setup, fx: &[Fixture]) -> Result<Section, CliError> {
    let mut t = Table::new(&["fixture", "molecule", "lambda", "ratio"]);
    let mut worst = 0.0f64;
    for f in fx {
        let (dec, _) = molecular_decompose(&s.op, &f.values, &s.omega, s.m, s.eps, s.config.decomposition.gamma, &s.time)?;
        for (i, mol) in dec.molecules.iter().enumerate().take(4) {
            for e in -3..=3 {
                let lam = 10f64.powi(e);
                let r = molecule_norm_bound_probe(&s.op, &mol.values, mol.ball_measure, lam, &s.omega, &s.time)?;
                worst = worst.max(r);
                t.push(vec![json!(f.name), json!(i), num(lam), num(r)]);
            }
        }
    }
    Ok(Section::new("molecule_bound", t).with_pass(worst <= MOLECULE_BOUND).note("max_ratio", num(worst)).note("bound", num(MOLECULE_BOUND)))
}

fn hardy_ratio(s: &Setup, fx: &[Fixture], target: HardyTarget, name: &str) -> Result<Section, CliError> {
    let vals: Vec<Vec<C64>> = fx.iter().map(|f| f.values.clone()).collect();
    let r = riesz_hardy_probe(&s.op, &vals, &s.omega, target, &s.time)?;
    let mut t = Table::new(&["fixture", "numerator", "denominator", "ratio"]);
    for row in &r.rows {
        t.push(vec![json!(fx[row.index].name), num(row.numerator), num(row.denominator), row.ratio.map(num).unwrap_or(Value::Null)]);
    }
    let pass = r.max_ratio.is_finite();
    Ok(Section::new(name, t).with_pass(pass).note("max_ratio", num(r.max_ratio)).note("skipped", r.skipped))
}

fn offdiagonal(s: &Setup) -> Result<Section, CliError> {
    let n = s.grid.n;
    let samples = standard_condition_samples(&s.grid, (12 * n / 64).max(1), (n / 8).max(1), 1e-3, 2e-2, 8);
    let mut t = Table::new(&["m", "exponent", "r2"]);
    let mut pass = true;
    for m in [1u32, 2] {
        let r = offdiagonal_condition_probe(&s.op, &RieszHandle, 2.0, m, &samples)?;
        pass &= r.exponent >= 0.8 * m as f64;
        t.push(vec![json!(m), num(r.exponent), num(r.r2)]);
    }
    Ok(Section::new("offdiagonal", t).with_pass(pass).note("operator", "riesz"))
}

fn frac_integral(s: &Setup, fx: &[Fixture]) -> Result<Section, CliError> {
    let fr = &s.config.fractional;
    let mut t = Table::new(&["fixture", "source", "target", "ratio"]);
    let mut ok = true;
    let mut worst = 0.0f64;
    for f in fx {
        let r = frac_integral_probe(&s.op, &f.values, &s.omega, s.frac_gamma, fr.q, &s.time)?;
        ok &= r.ratio.is_finite();
        worst = worst.max(r.ratio);
        t.push(vec![json!(f.name), num(r.source_norm), num(r.target_norm), num(r.ratio)]);
    }
    let b = assumption_b_transform(&s.omega, fr.q)?;
    let est = estimate_type_indices(&b.omega_tilde, &SampleSpec::index_default()).p_w;
    let idx = (est - fr.q).abs() <= 0.02;
    Ok(Section::new("frac_integral", t)
        .with_pass(ok && idx)
        .note("q", num(fr.q))
        .note("gamma", num(s.frac_gamma))
        .note("p_tilde_estimated", num(est))
        .note("max_ratio", num(worst)))
}

fn chain(s: &Setup, fx: &[Fixture], input: ChainInput, name: &str) -> Result<Section, CliError> {
    let vals: Vec<Vec<C64>> = fx.iter().map(|f| f.values.clone()).collect();
    let rows = classical_chain(&s.op, &vals, &s.omega, &s.time, input, s.config.decomposition.slack)?;
    let mut t = Table::new(&["fixture", "hardy", "classical", "ratio", "reconstruction", "local_mean", "piece_margin", "all_pass"]);
    let mut pass = true;
    for r in &rows {
        pass &= r.all_pass && r.worst_reconstruction <= 1e-10 && r.worst_local_mean <= 1e-12;
        t.push(vec![
            json!(fx[r.index].name),
            num(r.hardy),
            num(r.classical),
            r.ratio.map(num).unwrap_or(Value::Null),
            num(r.worst_reconstruction),
            num(r.worst_local_mean),
            num(r.worst_piece_margin),
            json!(r.all_pass),
        ]);
    }
    Ok(Section::new(name, t).with_pass(pass).note("max_ratio", num(max_of(rows.iter().filter_map(|r| r.ratio)))))
}

fn pairing(s: &Setup, fx: &[Fixture]) -> Result<Section, CliError> {
    let time = pairing_time_grid(&s.op, PAIRING_LEVELS)?;
    let star = s.op.adjoint();
    let ladder = BallLadder::dyadic(&s.grid);
    let mut t = Table::new(&["f", "g", "quadrature_re", "quadrature_im", "direct_re", "direct_im", "rel_err", "scaled_err", "c"]);
    let mut worst = 0.0f64;
    let mut c_max = 0.0f64;
    let pairs: Vec<(usize, usize)> = if fx.len() == 1 { vec![(0, 0)] } else { (1..fx.len()).map(|i| (i - 1, i)).collect() };
    for (a, b) in pairs.into_iter().map(|(i, j)| (&fx[i], &fx[j])) {
        let p = duality_pairing(&s.op, &a.values, &b.values, s.m, &time)?;
        let diff = (p.quadrature - p.direct).norm();
        let rel = if p.direct.norm() > 0.0 { diff / p.direct.norm() } else { f64::INFINITY };
        // Against the Cauchy–Schwarz scale, so nearly orthogonal pairs do not blow up.
        let err = diff / (l2_cell(&s.grid, &a.values) * l2_cell(&s.grid, &b.values)).max(f64::MIN_POSITIVE);
        let hn = tentlab::hardy::hardy_norm(&s.op, &b.values, &s.omega, &s.time)?;
        let bn = bmo_norm(&star, &a.values, &s.omega, 2.0, s.m, &ladder)?.norm;
        let c = if hn * bn > 0.0 { p.direct.norm() / (hn * bn) } else { 0.0 };
        worst = worst.max(err);
        c_max = c_max.max(c);
        t.push(vec![json!(a.name), json!(b.name), num(p.quadrature.re), num(p.quadrature.im), num(p.direct.re), num(p.direct.im), num(rel), num(err), num(c)]);
    }
    Ok(Section::new("pairing", t).with_pass(worst <= 1e-3).note("worst_scaled_err", num(worst)).note("c", num(c_max)))
}

pub fn run_probe(s: &Setup, name: &str, fx: &[Fixture]) -> Result<Vec<Section>, CliError> {
    Ok(vec![match name {
        "gaffney" => gaffney(s)?,
        "lp" => lp(s)?,
        "atoms" => atoms(s, fx)?,
        "aperture" => aperture(s, fx)?,
        "calderon" => calderon(s, fx)?,
        "molecules" => decompose_section(s, fx, "molecules")?.0,
        "molecule_bound" => molecule_bound(s, fx)?,
        "riesz_hardy" => hardy_ratio(s, fx, HardyTarget::Riesz, "riesz_hardy")?,
        "g_hardy" => hardy_ratio(s, fx, HardyTarget::GFunction, "g_hardy")?,
        "offdiagonal" => offdiagonal(s)?,
        "frac_integral" => frac_integral(s, fx)?,
        "classical_chain" => chain(s, fx, ChainInput::Riesz, "classical_chain")?,
        "embedding" => chain(s, fx, ChainInput::Identity, "embedding")?,
        "pairing" => pairing(s, fx)?,
        BMO_PROBE => return bmo_sections(s, fx),
        other => return Err(CliError::Guard(format!("unknown probe '{other}'"))),
    }])
}

/// Runs the configured probe list; an empty list gives a metadata-only report.
pub fn probes(s: &Setup, command: &str) -> Result<Report, CliError> {
    let mut sections = Vec::new();
    if !s.config.probes.is_empty() {
        let fx = fixtures(s)?;
        for p in &s.config.probes {
            sections.extend(run_probe(s, p, &fx)?);
        }
    }
    Ok(report(command, s, sections))
}

/// Small built-in checks that do not depend on the configuration.
pub fn selftest(s: &Setup) -> Result<Report, CliError> {
    let mut t = Table::new(&["check", "value", "tolerance", "pass"]);
    let mut row = |name: &str, v: f64, tol: f64| {
        t.push(vec![json!(name), num(v), num(tol), json!(v <= tol)]);
    };
    let mut worst = 0.0f64;
    for m in 1..=4u32 {
        let fact: f64 = (1..=m + 1).map(f64::from).product();
        let closed = 2f64.powi(m as i32 + 3) / fact;
        worst = worst.max((c_m(m)? - closed).abs() / closed);
        worst = worst.max((c_tilde_m(m)? - 2f64.powi(m as i32 + 2) / (1..=m).map(f64::from).product::<f64>()).abs() / c_tilde_m(m)?);
    }
    row("normalizers", worst, 1e-8);

    let g = Grid::unit(1, 32)?;
    let op = EllipticOperator::identity(g)?;
    let mut riesz = 0.0f64;
    for k in 0..32usize {
        let mode: Vec<C64> = (0..32).map(|x| C64::new(0.0, 2.0 * PI * (k * x) as f64 / 32.0).exp()).collect();
        let mu = 4.0 / (g.h() * g.h()) * (PI * k as f64 / 32.0).sin().powi(2);
        let sym = if mu == 0.0 { C64::new(0.0, 0.0) } else { C64::new(0.0, (2.0 * PI * k as f64 / 32.0).sin() / g.h() / mu.sqrt()) };
        let r = op.riesz_apply(&mode, KernelPolicy::Project)?;
        riesz = riesz.max(max_of(r[0].iter().zip(&mode).map(|(a, b)| (a - sym * b).norm())));
    }
    row("riesz_symbol", riesz, 1e-8);

    let time = TimeGrid::standard(&g, 96)?;
    let mode: Vec<C64> = (0..32).map(|x| C64::new(0.0, 2.0 * PI * (3 * x) as f64 / 32.0).exp()).collect();
    row("calderon_mode", calderon_residual(&op, &mode, 1, &time)?, 1e-3);

    let pt = pairing_time_grid(&op, PAIRING_LEVELS)?;
    let other: Vec<C64> = (0..32).map(|x| C64::new((2.0 * PI * (3 * x) as f64 / 32.0).cos(), 0.0)).collect();
    let p = duality_pairing(&op, &mode, &other, 1, &pt)?;
    row("pairing", (p.quadrature - p.direct).norm() / p.direct.norm(), 1e-3);

    let pass = t.rows.iter().all(|r| r[3] == json!(true));
    Ok(report("selftest", s, vec![Section::new("selftest", t).with_pass(pass)]))
}
