//! Subcommand bodies. Each returns a JSON report and optionally a CSV trace.

use std::collections::BTreeMap;
use std::io::Write as _;

use hofa_core::analysis::{analytic_rank, gowers_norm, lambda_density, phase_function, to_complex, Mode};
use hofa_core::consistency::{consistency_set, WitnessMode};
use hofa_core::factors::{factor_rank, PolynomialFactor, SubatomSelector};
use hofa_core::forms::LinearSystem;
use hofa_core::io::{parse, parse_coloring, round12, ConsistencySetJson, FactorJson, MonomialRepJson, TestReportJson};
use hofa_core::ncpoly::{homogeneous_decomposition, MonomialRep};
use hofa_core::patterns::{pattern_density, removal_recolor, ColoredPattern, FactorConfig, RecolorParams};
use hofa_core::regularity::{
    regularity, strong_regularity, trace_csv, verify_weak, weak_regularity, GrowthConfig, RegPolicy, TraceRow,
};
use hofa_core::tester::{exact_rejection_probability, run_tester, Property, SubspaceMode, TesterConfig};
use hofa_core::Caps;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::inputs::{malformed, numeric, polynomial, real_tables, Inputs, Numeric};
use crate::{selftest, CliError, Command, Common, Format, ModeArg, SubspaceArg, WitnessArg};

pub struct Report {
    pub body: Value,
    pub csv: Option<String>,
    /// Set when the run completed but a check inside it failed.
    pub failed: Option<String>,
}

impl Report {
    fn json(body: Value) -> Self {
        Report { body, csv: None, failed: None }
    }
}

fn needs_seed(common: &Common, cmd: &Command) -> bool {
    common.mode == ModeArg::Sampled
        || matches!(cmd, Command::Rank { .. } | Command::Regularize { .. } | Command::Recolor { .. } | Command::Test { .. })
}

fn resolve_seed(common: &Common, cmd: &Command) -> Option<u64> {
    if !needs_seed(common, cmd) {
        return common.seed;
    }
    Some(common.seed.unwrap_or_else(|| {
        let nanos = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_nanos() as u64).unwrap_or(0);
        let s = nanos ^ (std::process::id() as u64).rotate_left(32);
        eprintln!("seed: {s}");
        s
    }))
}

fn mode(common: &Common, seed: Option<u64>) -> Mode {
    match common.mode {
        ModeArg::Exact => Mode::Exact,
        ModeArg::Sampled => Mode::Sampled { samples: common.samples, seed: seed.unwrap_or(0) },
    }
}

pub fn run(common: &Common, cmd: &Command, caps: &Caps) -> Result<(), CliError> {
    if common.format == Format::Csv && !matches!(cmd, Command::Regularize { .. }) {
        return Err(CliError::Usage("CSV output is only available for the regularize trace".into()));
    }
    let seed = resolve_seed(common, cmd);
    let mut inputs = Inputs::default();
    let report = dispatch(common, cmd, caps, seed, &mut inputs)?;
    let manifest = json!({
        "subcommand": cmd.name(),
        "parameters": {
            "common": serde_json::to_value(common).expect("serializable"),
            "command": serde_json::to_value(cmd).expect("serializable"),
            "caps": {"table": caps.table, "enumeration": caps.enumeration, "elements": caps.elements},
        },
        "seed": seed,
        "version": env!("CARGO_PKG_VERSION"),
        "inputs": inputs.digests,
    });
    let text = match (&report.csv, common.format) {
        (Some(csv), Format::Csv) => format!("# manifest: {}\n{csv}", serde_json::to_string(&rounded(manifest)).expect("json")),
        _ => {
            let mut out = serde_json::to_string_pretty(&json!({"manifest": rounded(manifest), "report": rounded(report.body)}))
                .expect("json");
            out.push('\n');
            out
        }
    };
    match &common.out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?,
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    match report.failed {
        Some(msg) => Err(CliError::Usage(msg)),
        None => Ok(()),
    }
}

/// Rounds every float to 12 decimals so reruns are byte-identical.
fn rounded(mut v: Value) -> Value {
    fn walk(v: &mut Value) {
        match v {
            Value::Number(n) if n.is_f64() => {
                let x = round12(n.as_f64().unwrap_or(0.0));
                *v = serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null);
            }
            Value::Array(a) => a.iter_mut().for_each(walk),
            Value::Object(o) => o.values_mut().for_each(walk),
            _ => {}
        }
    }
    walk(&mut v);
    v
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Io(format!("cannot render report: {e}")))
}

fn system_from(text: &str) -> Result<LinearSystem, CliError> {
    let s: LinearSystem = parse("linear system", text)?;
    Ok(LinearSystem::new(s.p, s.l, s.rows).map_err(|e| malformed(format!("linear system: {e}")))?)
}

#[derive(Deserialize)]
struct PatternFile {
    system: LinearSystem,
    #[serde(default)]
    psi: Option<Vec<usize>>,
}

fn dispatch(common: &Common, cmd: &Command, caps: &Caps, seed: Option<u64>, inputs: &mut Inputs) -> Result<Report, CliError> {
    let mode = mode(common, seed);
    match cmd {
        Command::Gowers { d } => {
            let text = inputs.read_required("function", &common.input)?;
            let (space, fs) = match numeric(&text, caps)? {
                Numeric::Table(t) => (t.space, t.functions.iter().map(|f| to_complex(f)).collect::<Vec<_>>()),
                Numeric::Polynomial(rep) => {
                    let t = rep.value_table(caps)?;
                    (t.space(), vec![phase_function(&t)])
                }
                Numeric::Factor(_) => return Err(malformed("gowers takes a function table or a polynomial")),
            };
            let values = fs.iter().map(|f| gowers_norm(f, &space, *d, mode, caps)).collect::<hofa_core::Result<Vec<_>>>()?;
            Ok(Report::json(json!({
                "p": space.p(), "n": space.n(), "d": d,
                "exact": mode == Mode::Exact,
                "value": values[0],
                "values": values,
            })))
        }
        Command::Density { pattern, generic } => {
            let text = inputs.read_required("function", &common.input)?;
            let pf: PatternFile = parse("pattern", &inputs.read("pattern", pattern)?)?;
            let system = LinearSystem::new(pf.system.p, pf.system.l, pf.system.rows).map_err(|e| malformed(format!("pattern: {e}")))?;
            match pf.psi {
                Some(psi) => {
                    let f = parse_coloring(&text)?;
                    let h = ColoredPattern::new(system, psi)?;
                    let d = pattern_density(&f, &h, *generic, mode, 8, caps)?;
                    Ok(Report::json(json!({
                        "kind": "pattern",
                        "density": d.density,
                        "value": d.value(),
                        "exact": d.exact,
                        "generic_only": generic,
                        "witnesses": d.witnesses,
                    })))
                }
                None => {
                    if *generic {
                        return Err(CliError::Usage("--generic needs a colored pattern (psi)".into()));
                    }
                    let t = real_tables(&text)?;
                    let f = to_complex(&t.functions[0]);
                    let fs = vec![f; system.m()];
                    let v = lambda_density(&system, &fs, &t.space, caps)?;
                    Ok(Report::json(json!({"kind": "lambda", "re": v.re, "im": v.im})))
                }
            }
        }
        Command::Complexity => {
            let s = system_from(&inputs.read_required("system", &common.input)?)?;
            Ok(Report::json(json!({"system": s, "classification": s.classify()})))
        }
        Command::Consistency { d, k, n_cap, witness } => {
            let s = system_from(&inputs.read_required("system", &common.input)?)?;
            let wm = match witness {
                WitnessArg::Homogeneous => WitnessMode::Homogeneous,
                WitnessArg::Exact => WitnessMode::Exact,
                WitnessArg::WithConstants => WitnessMode::WithConstants,
            };
            let set = consistency_set(*d, *k, &s, *n_cap, wm, caps)?;
            let mut body = to_json(&ConsistencySetJson::from_set(&set, caps)?)?;
            body["size"] = json!(set.size().to_string());
            body["certificate"] = to_json(&set.certificate)?;
            Ok(Report::json(body))
        }
        Command::Rank { d } => {
            let text = inputs.read_required("polynomial or factor", &common.input)?;
            match numeric(&text, caps)? {
                Numeric::Polynomial(rep) => {
                    let dd = d.unwrap_or_else(|| rep.degree()).max(1);
                    let r = analytic_rank(&rep.value_table(caps)?, dd, mode, caps)?;
                    Ok(Report::json(json!({"kind": "polynomial", "d": dd, "analytic_rank": rank_value(r.as_f64())})))
                }
                Numeric::Factor(b) => {
                    let r = factor_rank(&b, mode, seed.unwrap_or(0), caps)?;
                    Ok(Report::json(json!({
                        "kind": "factor",
                        "analytic_rank": rank_value(r.analytic_rank.as_f64()),
                        "combination_min": rank_value(r.combination_min.as_f64()),
                        "combinations_tested": r.combinations_tested,
                        "combinations_total": r.combinations_total.to_string(),
                        "exhaustive": r.exhaustive,
                    })))
                }
                Numeric::Table(_) => Err(malformed("rank takes a polynomial or a factor")),
            }
        }
        Command::Regularize { d, eta, theta, zeta, c0, max_iterations } => {
            let t = real_tables(&inputs.read_required("functions", &common.input)?)?;
            let (p, n) = (t.space.p(), t.space.n());
            let policy = RegPolicy { max_iterations: *max_iterations, seed: seed.unwrap_or(0), norm_mode: mode, ..RegPolicy::default() };
            let fs = &t.functions;
            let (body, trace) = if let Some(z) = zeta {
                let mut cfg = GrowthConfig::escalating(p, *c0, *z, *eta, theta.unwrap_or(0.2), *d, d + 1);
                cfg.policy = policy;
                let out = strong_regularity(fs, p, n, &cfg, caps)?;
                let body = json!({
                    "engine": "strong",
                    "coarse": FactorJson::from_factor(&out.strong.coarse),
                    "fine": FactorJson::from_factor(&out.strong.fine),
                    "rounds": out.strong.rounds,
                    "degree_used": out.strong.degree_used,
                    "eta_bound": out.strong.eta_bound,
                    "selection": out.check,
                    "selector_attempts": out.attempts,
                    "theta": out.theta,
                    "decompositions": out.strong.decompositions,
                });
                (body, out.strong.trace)
            } else if let Some(th) = theta {
                let b0 = PolynomialFactor::trivial(p, n, caps)?;
                let e = *eta;
                let out = regularity(fs, &b0, *d, *th, &move |_| e, &policy, caps)?;
                let body = json!({
                    "engine": "standard",
                    "factor": FactorJson::from_factor(&out.factor),
                    "next": FactorJson::from_factor(&out.next),
                    "eta_used": out.eta_used,
                    "converged": out.converged,
                    "decompositions": out.decompositions,
                });
                (body, out.trace)
            } else {
                let b0 = PolynomialFactor::trivial(p, n, caps)?;
                let out = weak_regularity(fs, &b0, *d, *eta, &policy, caps)?;
                let cond = verify_weak(fs, &out, *d, *eta, caps)?;
                let body = json!({
                    "engine": "weak",
                    "factor": FactorJson::from_factor(&out.factor),
                    "converged": out.converged,
                    "conditions": cond,
                    "decompositions": out.decompositions,
                });
                (body, out.trace)
            };
            let mut body = body;
            body["trace"] = to_json::<Vec<TraceRow>>(&trace)?;
            Ok(Report { body, csv: Some(trace_csv(&trace)), failed: None })
        }
        Command::Decompose => {
            let rep = polynomial(&inputs.read_required("polynomial", &common.input)?)?;
            let parts = homogeneous_decomposition(&rep, caps)?;
            let mut acc = MonomialRep::zero(rep.p(), rep.n())?.value_table(caps)?;
            for h in &parts {
                acc = acc.add(&h.rep.value_table(caps)?)?;
            }
            let reconstructs = acc.sub(&rep.value_table(caps)?)?.is_zero();
            let parts: Vec<Value> = parts
                .iter()
                .map(|h| json!({"d": h.d, "k": h.k, "poly": MonomialRepJson::from_rep(&h.rep)}))
                .collect();
            Ok(Report::json(json!({"degree": rep.degree(), "depth": rep.depth(), "parts": parts, "reconstructs": reconstructs})))
        }
        Command::Recolor { patterns, epsilon, threshold, linear, d, eta, theta, zeta, c0, xi_budget } => {
            let f = parse_coloring(&inputs.read_required("coloring", &common.input)?)?;
            let text = inputs.read("patterns", patterns)?;
            let raw: Value = parse("patterns", &text)?;
            let list: Vec<PatternFile> = if raw.is_array() { parse("patterns", &text)? } else { vec![parse("patterns", &text)?] };
            let family = list
                .into_iter()
                .map(|pf| {
                    let psi = pf.psi.ok_or_else(|| malformed("every forbidden pattern needs psi"))?;
                    let s = LinearSystem::new(pf.system.p, pf.system.l, pf.system.rows)?;
                    Ok(ColoredPattern::new(s, psi)?)
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            let growth = GrowthConfig::escalating(f.p, *c0, *zeta, *eta, *theta, *d, d + 1);
            let factor = match linear {
                Some(c) => {
                    let b = PolynomialFactor::linear_forms(f.p, f.n, *c, caps)?;
                    let s = SubatomSelector::zero(b.params(), b.params(), caps)?;
                    FactorConfig::Fixed { coarse: b.clone(), fine: b, selector: s }
                }
                None => FactorConfig::Regularize(&growth),
            };
            let params = RecolorParams { epsilon: *epsilon, threshold: *threshold, factor, xi_budget: *xi_budget, seed: seed.unwrap_or(0) };
            let out = removal_recolor(&f, &family, &params, caps)?;
            Ok(Report::json(json!({"g": out.g, "report": out.report, "distance": out.report.distance.value()})))
        }
        Command::Test { property, d, trials, subspace, exact, witnesses } => {
            let f = parse_coloring(&inputs.read_required("coloring", &common.input)?)?;
            let prop = parse_property(property, f.p, f.colors.len(), inputs)?;
            let sm = match subspace {
                SubspaceArg::Linear => SubspaceMode::Linear,
                SubspaceArg::Affine => SubspaceMode::Affine,
            };
            let cfg = TesterConfig { d: *d, trials: *trials, seed: seed.unwrap_or(0), mode: sm, witness_limit: *witnesses };
            let r = run_tester(&f, &prop, &cfg, caps)?;
            let mut body = to_json(&TestReportJson::from_report(&r))?;
            body["accepts"] = json!(r.accepts);
            body["property"] = json!(prop.name);
            if *witnesses > 0 {
                body["witnesses"] = to_json(&r.witnesses)?;
            }
            if *exact {
                let q = exact_rejection_probability(&f, &prop, *d, sm, caps)?;
                body["exact"] = json!({"num": q.num.to_string(), "den": q.den.to_string(), "value": q.value()});
            }
            Ok(Report::json(body))
        }
        Command::Selftest => {
            let results = selftest::run(caps);
            let passed = results.iter().all(|c| c.pass);
            let failed = (!passed).then(|| "selftest failed".to_string());
            Ok(Report { body: json!({"passed": passed, "checks": results}), csv: None, failed })
        }
    }
}

fn rank_value(r: f64) -> Value {
    if r.is_finite() {
        json!(r)
    } else {
        json!("infinite")
    }
}

fn parse_property(spec: &str, p: u32, colors: usize, inputs: &mut Inputs) -> Result<Property, CliError> {
    let (name, arg) = spec.split_once(':').unwrap_or((spec, ""));
    let prop = match name {
        "linearity" => Property::linearity(p),
        "degree" => {
            let t = arg.parse().map_err(|_| CliError::Usage(format!("degree:T needs an integer, got {arg:?}")))?;
            Property::classical_degree(p, t)
        }
        "allowable" => {
            let tables: Vec<Vec<usize>> = parse("allowable maps", &inputs.read("property", std::path::Path::new(arg))?)?;
            Property::allowable_maps_2(p, colors, tables)?
        }
        "forbidden" => {
            let family: BTreeMap<usize, Vec<Vec<usize>>> =
                parse("forbidden restrictions", &inputs.read("property", std::path::Path::new(arg))?)?;
            Property::forbidden(p, colors, family)?
        }
        _ => return Err(CliError::Usage(format!("unknown property {spec:?}; expected linearity, degree:T, allowable:FILE or forbidden:FILE"))),
    };
    if prop.colors != colors {
        return Err(CliError::Usage(format!("property {} needs {} colors, the input has {colors}", prop.name, prop.colors)));
    }
    Ok(prop)
}
