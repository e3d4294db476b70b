use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};

use serde_json::{json, Value};
use windtree::corridors::{classify_regime, enumerate_corridors, CorridorType};
use windtree::dynamics::{Billiard, CorridorClass, PhasePoint, Stop};
use windtree::geometry::{check_params, geometry_summary};
use windtree::presets::Preset;
use windtree::report::{Budgets, Suite, CRITERIA};
use windtree::stats::correlation::{DEFAULT_BATCH, SYMMETRY_LAGS};
use windtree::stats::msd::MSD_FIT_MIN_N;
use windtree::stats::tail::{fixed_exponent_prefactor, log_grid};
use windtree::stats::{
    correlation, ctime_rescale, fit_msd_models, fit_partial_sums, fit_powerlaw_ccdf, flight_tail,
    truncated_second_moment, unit_rng,
};
use windtree::{BoundaryKind, Error, ModelParams};

use crate::{
    CorrArgs, CorridorArgs, CtimeArgs, Kind, ModelArgs, MsdArgs, OutputArgs, ReportArgs, TailArgs, TraceArgs,
};

/// Failure with its process exit code.
#[derive(Debug)]
pub struct CliError {
    code: u8,
    msg: String,
}

impl CliError {
    fn config(msg: impl Into<String>) -> Self {
        CliError { code: 2, msg: msg.into() }
    }

    pub fn code(&self) -> u8 {
        self.code
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParams(_) | Error::Unsupported(_) | Error::OutOfRange { .. } => 2,
            Error::InsufficientData(_) => 3,
            _ => 1,
        };
        let mut msg = e.to_string();
        if e.is_trapping() {
            msg.push_str(" (pass --allow-overlap to simulate a single pocket)");
        }
        CliError { code, msg }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError { code: 1, msg: format!("i/o: {e}") }
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

fn parse_ratio(s: &str) -> CliResult<(u64, u64)> {
    let bad = || CliError::config(format!("--theta-tan expects m/n with positive integers, got `{s}`"));
    let (m, n) = s.split_once('/').unwrap_or((s, "1"));
    let m: u64 = m.trim().parse().map_err(|_| bad())?;
    let n: u64 = n.trim().parse().map_err(|_| bad())?;
    if m == 0 || n == 0 {
        return Err(bad());
    }
    Ok((m, n))
}

/// Parameters and whether overlapping scatterers are accepted.
fn model_params(m: &ModelArgs) -> CliResult<(ModelParams, bool)> {
    if let Some(name) = &m.preset {
        let p: Preset = name.parse()?;
        let mut params = p.params();
        if let Some(r) = m.r {
            params.r = r;
        }
        return Ok((params, p.allow_overlap() || m.allow_overlap));
    }
    let r = m.r.ok_or_else(|| CliError::config("missing --r (or use --preset)"))?;
    let params = match m.kind.unwrap_or(Kind::Windtree) {
        Kind::Disk => {
            let radius = m.disk_radius.ok_or_else(|| CliError::config("--kind disk needs --disk-radius"))?;
            ModelParams::lorentz(radius, r)
        }
        Kind::Windtree => {
            let a = m.a.ok_or_else(|| CliError::config("missing --a (or use --preset)"))?;
            match (&m.theta_tan, m.theta_rad) {
                (Some(t), _) => {
                    let (tm, tn) = parse_ratio(t)?;
                    ModelParams::wind_tree_rational(tm, tn, a, r)
                }
                (None, Some(theta)) => ModelParams::wind_tree(theta, a, r),
                (None, None) => return Err(CliError::config("missing --theta-tan or --theta-rad")),
            }
        }
    };
    Ok((params, m.allow_overlap))
}

fn billiard(m: &ModelArgs) -> CliResult<(Billiard, ModelParams)> {
    let (p, overlap) = model_params(m)?;
    let b = if overlap { Billiard::new_allow_overlap(p)? } else { Billiard::new(p)? };
    Ok((b, p))
}

fn config_echo(p: &ModelParams, overlap: bool) -> Value {
    let mut v = serde_json::to_value(p).expect("params serialize");
    v["allow_overlap"] = json!(overlap);
    v
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// JSON number, or null for NaN and infinities.
fn jnum(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn csv_sink(out: &OutputArgs) -> CliResult<Option<Box<dyn Write>>> {
    match &out.out {
        Some(path) => Ok(Some(Box::new(BufWriter::new(File::create(path)?)))),
        // Standard output carries the JSON summary when one is asked for.
        None if out.json => Ok(None),
        None => Ok(Some(Box::new(BufWriter::new(io::stdout().lock())))),
    }
}

fn write_csv(out: &OutputArgs, header: &str, rows: impl Iterator<Item = String>) -> CliResult {
    if let Some(mut w) = csv_sink(out)? {
        writeln!(w, "{header}")?;
        for row in rows {
            writeln!(w, "{row}")?;
        }
        w.flush()?;
    }
    Ok(())
}

fn print_json(v: &Value) -> CliResult {
    let mut s = serde_json::to_string_pretty(v).expect("json serialize");
    s.push('\n');
    let mut out = io::stdout().lock();
    out.write_all(s.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn fit_json(r: windtree::Result<windtree::stats::FitResult>) -> Value {
    match r {
        Ok(f) => serde_json::to_value(&f).unwrap_or(Value::Null),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

pub fn validate(m: &ModelArgs) -> CliResult {
    let (p, overlap) = model_params(m)?;
    let report = check_params(&p);
    let only_trapping = report
        .violations
        .iter()
        .all(|v| matches!(v, windtree::geometry::Violation::TrappingConfiguration { .. }));
    let accepted = report.is_ok() || (overlap && only_trapping);
    for v in &report.violations {
        println!("violation: {v}");
    }
    if accepted {
        let g = geometry_summary(&p);
        println!("ok");
        println!("perimeter: {}", num(g.perimeter));
        println!("scatterer_area: {}", num(g.area));
        println!("mean_free_path: {}", num(g.mean_free_path));
        println!("pure_type_ii_regime: {}", report.pure_type_ii_regime);
        Ok(())
    } else {
        Err(Error::InvalidParams(report.violations).into())
    }
}

pub fn corridors(a: &CorridorArgs) -> CliResult {
    let (_, p) = billiard(&a.model)?;
    let cs = enumerate_corridors(&p, a.max_denom);
    let regime = classify_regime(&p, a.max_denom);
    let ctype = |t: CorridorType| match t {
        CorridorType::TypeI => "I",
        CorridorType::TypeII => "II",
    };
    if a.output.json {
        let rows: Vec<Value> = cs
            .iter()
            .map(|c| {
                json!({
                    "direction": [c.direction.0, c.direction.1],
                    "type": ctype(c.ctype),
                    "width_math": c.width_math,
                    "width_eff": c.width_eff,
                    "open": c.is_open(),
                })
            })
            .collect();
        print_json(&json!({
            "config": config_echo(&p, a.model.allow_overlap),
            "max_denom": a.max_denom,
            "regime": serde_json::to_value(regime).unwrap_or(Value::Null),
            "open_corridors": cs.len(),
            "corridors": rows,
        }))?;
    }
    write_csv(
        &a.output,
        "direction,type,width_math,width_eff,open",
        cs.iter().map(|c| {
            format!(
                "{}/{},{},{},{},{}",
                c.direction.0,
                c.direction.1,
                ctype(c.ctype),
                num(c.width_math),
                num(c.width_eff),
                c.is_open()
            )
        }),
    )
}

fn kind_name(k: BoundaryKind) -> &'static str {
    match k {
        BoundaryKind::Flat => "flat",
        BoundaryKind::Dispersing => "dispersing",
    }
}

pub fn trace(a: &TraceArgs) -> CliResult {
    let (b, p) = billiard(&a.model)?;
    let start = match (a.s, a.phi, a.seed) {
        (Some(s), Some(phi), _) => {
            if !(phi.abs() < std::f64::consts::FRAC_PI_2) {
                return Err(CliError::config("--phi must lie in (-pi/2, pi/2)"));
            }
            b.boundary().boundary_point(s)?;
            PhasePoint { cell: (0, 0), s, phi }
        }
        (_, _, Some(seed)) => b.sample_liouville(&mut unit_rng(seed, 0))?,
        _ => return Err(CliError::config("trace needs --seed or both --s and --phi")),
    };
    let tr = b.trace(start, Stop::Collisions(a.n), a.max_len);
    if let Some(e) = &tr.termination {
        eprintln!("warning: orbit stopped after {} collisions: {e}", tr.points.len() - 1);
    }
    if a.output.json {
        let last = tr.points.last().expect("initial point");
        let d = last.unfolded() - tr.points[0].unfolded();
        print_json(&json!({
            "config": config_echo(&p, a.model.allow_overlap),
            "seed": a.seed,
            "initial": { "s": start.s, "phi": start.phi },
            "collisions": tr.points.len() - 1,
            "time": last.t,
            "displacement": [d.x, d.y],
            "termination": tr.termination.as_ref().map(|e| e.to_string()),
        }))?;
    }
    write_csv(
        &a.output,
        "n,cell_x,cell_y,x,y,t,s,phi,end_kind,corridor_class",
        tr.points.iter().map(|q| {
            format!(
                "{},{},{},{},{},{},{},{},{},{}",
                q.n,
                q.cell.0,
                q.cell.1,
                num(q.pos.x),
                num(q.pos.y),
                num(q.t),
                num(q.s),
                num(q.phi),
                kind_name(q.end_kind),
                q.corridor_class.name()
            )
        }),
    )
}

fn positive(name: &str, v: f64) -> CliResult {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::config(format!("{name} must be positive, got {v}")))
    }
}

fn positive_count(name: &str, v: u64) -> CliResult {
    if v > 0 {
        Ok(())
    } else {
        Err(CliError::config(format!("{name} must be positive")))
    }
}

pub fn tail(a: &TailArgs) -> CliResult {
    positive_count("--n", a.n)?;
    positive("--max-len", a.max_len)?;
    let (b, p) = billiard(&a.model)?;
    let h = flight_tail(&b, a.n, a.max_len, a.seed)?;
    let (l_lo, l_hi) = (10.0, a.max_len / 10.0);
    if a.output.json {
        let groups: [(&str, &[CorridorClass]); 6] = [
            ("horizontal", &[CorridorClass::Horizontal]),
            ("vertical", &[CorridorClass::Vertical]),
            ("oblique_plus", &[CorridorClass::ObliquePlus]),
            ("oblique_minus", &[CorridorClass::ObliqueMinus]),
            ("axis", &[CorridorClass::Horizontal, CorridorClass::Vertical]),
            ("oblique", &[CorridorClass::ObliquePlus, CorridorClass::ObliqueMinus]),
        ];
        let mut fits = serde_json::Map::new();
        for (name, classes) in groups {
            let fit = fit_powerlaw_ccdf(&h, classes, l_lo, l_hi);
            let beta = fit.as_ref().ok().and_then(|f| f.param("beta").map(|x| (x.value, x.stderr)));
            let pref2 = fixed_exponent_prefactor(&h, classes, 2.0, l_lo, l_hi).ok();
            fits.insert(
                name.into(),
                json!({
                    "beta": beta.map(|x| jnum(x.0)),
                    "beta_stderr": beta.map(|x| jnum(x.1)),
                    "prefactor_beta2": pref2.as_ref().map(|x| jnum(x.value)),
                    "prefactor_beta2_stderr": pref2.as_ref().map(|x| jnum(x.stderr)),
                    "fit": fit_json(fit),
                }),
            );
        }
        print_json(&json!({
            "config": config_echo(&p, a.model.allow_overlap),
            "seed": a.seed,
            "n": a.n,
            "max_len": a.max_len,
            "fit_range": [l_lo, l_hi],
            "total": h.total,
            "censored": h.censored.iter().sum::<u64>(),
            "discarded": h.discarded,
            "max_length": h.max_length,
            "fits": fits,
        }))?;
    }
    let mut rows = Vec::new();
    for c in CorridorClass::ALL {
        let ccdf = h.ccdf(&[c]);
        for k in 0..h.counts.len() {
            rows.push(format!(
                "{},{},{},{},{}",
                c.name(),
                num(h.edges[k]),
                num(h.edges[k + 1]),
                h.counts[k][c.index()],
                num(ccdf[k])
            ));
        }
    }
    write_csv(&a.output, "class,bin_lo,bin_hi,count,ccdf", rows.into_iter())
}

pub fn moment(a: &TailArgs) -> CliResult {
    positive_count("--n", a.n)?;
    positive("--max-len", a.max_len)?;
    if a.max_len < 100.0 {
        return Err(CliError::config("--max-len must be at least 100 for the moment fit"));
    }
    let (b, p) = billiard(&a.model)?;
    let grid = log_grid(1.0, a.max_len, 10);
    let curve = truncated_second_moment(&b, a.n, &grid, a.seed)?;
    if a.output.json {
        let fit = curve.fit_log(1e2, a.max_len);
        print_json(&json!({
            "config": config_echo(&p, a.model.allow_overlap),
            "seed": a.seed,
            "n": a.n,
            "max_len": a.max_len,
            "slope": fit.as_ref().ok().map(|f| jnum(f.value("slope"))),
            "fit": fit_json(fit),
        }))?;
    }
    write_csv(
        &a.output,
        "R,phi,stderr",
        (0..curve.r_grid.len())
            .map(|k| format!("{},{},{}", num(curve.r_grid[k]), num(curve.phi[k]), num(curve.stderr[k]))),
    )
}

pub fn corr(a: &CorrArgs) -> CliResult {
    positive("--truncation", a.truncation)?;
    positive("--max-len", a.max_len)?;
    let (b, p) = billiard(&a.model)?;
    let curve = correlation(&b, a.m, a.jmax, a.truncation, DEFAULT_BATCH, a.max_len, a.seed)?;
    if a.output.json {
        let hi = a.jmax.min(100_000);
        let fit = if hi > 100 { fit_json(fit_partial_sums(&curve, 100, hi)) } else { Value::Null };
        let lags: Vec<Value> = [1usize, 2, 5, 10, 100, 1000, 10_000, 100_000]
            .into_iter()
            .filter(|&j| j <= a.jmax)
            .map(|j| {
                json!({
                    "j": j,
                    "c": jnum(curve.c[j]),
                    "stderr": jnum(curve.stderr[j]),
                    "c_o": jnum(curve.c_o[j]),
                    "stderr_o": jnum(curve.stderr_o[j]),
                    "pairs_o": curve.pairs_o[j],
                    "partial_sum": jnum(curve.partial_sum[j]),
                })
            })
            .collect();
        print_json(&json!({
            "config": config_echo(&p, a.model.allow_overlap),
            "seed": a.seed,
            "m": a.m,
            "jmax": a.jmax,
            "truncation": a.truncation,
            "truncated": curve.truncated,
            "restarts": curve.restarts,
            "mean_sq_truncated": jnum(curve.mean_sq_truncated),
            "partial_sum_fit": fit,
            "lags": lags,
            "symmetry_lags": SYMMETRY_LAGS,
            "symmetry": serde_json::to_value(&curve.symmetry).unwrap_or(Value::Null),
        }))?;
    }
    write_csv(
        &a.output,
        "j,c_j,stderr,partial_sum",
        (0..curve.c.len()).map(|j| {
            format!("{},{},{},{}", j, num(curve.c[j]), num(curve.stderr[j]), num(curve.partial_sum[j]))
        }),
    )
}

pub fn msd(a: &MsdArgs) -> CliResult {
    positive_count("--k", a.k)?;
    positive_count("--n", a.n)?;
    positive("--max-len", a.max_len)?;
    let (b, p) = billiard(&a.model)?;
    let curve = windtree::stats::msd(&b, a.k, a.n, a.max_len, a.seed)?;
    if a.output.json {
        let fits = fit_msd_models(&curve, MSD_FIT_MIN_N);
        let summary = match &fits {
            Ok(f) => json!({
                "best": f.best.name(),
                "c": jnum(f.c),
                "c_stderr": jnum(f.c_stderr),
                "ranked": serde_json::to_value(&f.ranked).unwrap_or(Value::Null),
            }),
            Err(e) => json!({ "error": e.to_string() }),
        };
        print_json(&json!({
            "config": config_echo(&p, a.model.allow_overlap),
            "seed": a.seed,
            "k": a.k,
            "n": a.n,
            "max_len": a.max_len,
            "ensemble": curve.ensemble,
            "censored": curve.censored,
            "discarded": curve.discarded,
            "max_mean_zscore": jnum(curve.max_mean_zscore()),
            "model_selection": summary,
        }))?;
    }
    write_csv(
        &a.output,
        "n,msd,stderr,k_samples",
        (0..curve.n.len())
            .map(|i| format!("{},{},{},{}", curve.n[i], num(curve.msd[i]), num(curve.stderr[i]), curve.k_samples[i])),
    )
}

pub fn ctime(a: &CtimeArgs) -> CliResult {
    positive_count("--k", a.k)?;
    positive("--t-max", a.t_max)?;
    positive("--max-len", a.max_len)?;
    if a.t_max <= 10.0 {
        return Err(CliError::config("--t-max must exceed 10"));
    }
    let (b, p) = billiard(&a.model)?;
    let eta = geometry_summary(&p).mean_free_path;
    let r = ctime_rescale(&b, a.k, a.t_max, eta, a.max_len, a.seed)?;
    if a.output.json {
        print_json(&json!({
            "config": config_echo(&p, a.model.allow_overlap),
            "seed": a.seed,
            "k": a.k,
            "t_max": a.t_max,
            "eta_predicted": eta,
            "eta_hat": jnum(r.eta_hat),
            "eta_rel_err": jnum((r.eta_hat - eta).abs() / eta),
            "n_matched": r.n_matched,
            "coeff_continuous": jnum(r.coeff_continuous),
            "coeff_discrete": jnum(r.coeff_discrete),
            "coeff_ratio": jnum(r.coeff_ratio),
            "coeff_ratio_times_eta_hat": jnum(r.coeff_ratio * r.eta_hat),
            "ensemble": r.ensemble,
            "censored": r.censored,
            "discarded": r.discarded,
        }))?;
    }
    write_csv(
        &a.output,
        "t,ratio,stderr",
        (0..r.t.len()).map(|i| format!("{},{},{}", num(r.t[i]), num(r.ratio[i]), num(r.ratio_stderr[i]))),
    )
}

pub fn report(a: &ReportArgs) -> CliResult {
    let budgets = if a.quick { Budgets::quick() } else { Budgets::acceptance() };
    let ids: Vec<u32> = if a.criteria.is_empty() { CRITERIA.collect() } else { a.criteria.clone() };
    if let Some(bad) = ids.iter().find(|id| !CRITERIA.contains(id)) {
        return Err(CliError::config(format!("no criterion {bad}; valid ids are 1 to 13")));
    }
    let suite = Suite::new(budgets.clone(), a.seed);
    let mut outcomes = Vec::new();
    for id in ids {
        let o = suite.run(id);
        eprintln!("{}", o.line());
        outcomes.push(o);
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    let doc = json!({
        "seed": a.seed,
        "budgets": serde_json::to_value(&budgets).unwrap_or(Value::Null),
        "presets": Preset::ALL.iter().map(|p| json!({"name": p.name(), "params": p.params()})).collect::<Vec<_>>(),
        "criteria": serde_json::to_value(&outcomes).unwrap_or(Value::Null),
        "passed": passed,
        "total": outcomes.len(),
    });
    match &a.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            serde_json::to_writer_pretty(&mut w, &doc).expect("json serialize");
            writeln!(w)?;
            w.flush()?;
        }
        None => print_json(&doc)?,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_parsing() {
        assert_eq!(parse_ratio("1/1").unwrap(), (1, 1));
        assert_eq!(parse_ratio(" 2 / 5 ").unwrap(), (2, 5));
        assert_eq!(parse_ratio("3").unwrap(), (3, 1));
        for bad in ["0/1", "1/0", "a/b", "-1/2", ""] {
            assert_eq!(parse_ratio(bad).unwrap_err().code(), 2, "{bad}");
        }
    }

    #[test]
    fn error_codes() {
        assert_eq!(CliError::from(Error::InsufficientData("x".into())).code(), 3);
        assert_eq!(CliError::from(Error::Unsupported("x".into())).code(), 2);
        assert_eq!(CliError::from(Error::CornerHit).code(), 1);
    }

    #[test]
    fn float_format_keeps_seventeen_digits() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 12345.678901234567] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            assert_eq!(s.split('e').next().unwrap().replace(['.', '-'], "").len(), 17);
        }
    }
}
