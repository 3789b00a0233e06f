//! Browser bindings: three operations taking and returning JSON strings.

use hofa_core::analysis::{gowers_norm, phase_function, to_complex, Mode};
use hofa_core::consistency::{consistency_set, WitnessMode};
use hofa_core::field::Space;
use hofa_core::forms::LinearSystem;
use hofa_core::io::{parse, parse_coloring, round12, ConsistencySetJson, MonomialRepJson, TestReportJson};
use hofa_core::tester::{exact_rejection_probability, run_tester, Property, SubspaceMode, TesterConfig};
use hofa_core::Caps;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Browser runs stay well below the CLI defaults.
fn caps() -> Caps {
    Caps { table: 3125, enumeration: 1 << 24, elements: 1 << 16 }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// `U^2, ..., U^{d_max}` norms of a real table `{p, n, values}` or of
/// `e(P)` for a polynomial `{p, n, alpha, terms}`.
pub fn gowers_profile_json(input: &str, d_max: u32) -> Result<String, String> {
    let caps = caps();
    let v: Value = parse("input", input).map_err(err)?;
    let (space, f) = if v.get("terms").is_some() {
        let rep = parse::<MonomialRepJson>("polynomial", input).and_then(|j| j.to_rep()).map_err(err)?;
        let t = rep.value_table(&caps).map_err(err)?;
        (t.space(), phase_function(&t))
    } else {
        let p = v["p"].as_u64().ok_or("missing p")? as u32;
        let n = v["n"].as_u64().ok_or("missing n")? as usize;
        let values: Vec<f64> = serde_json::from_value(v["values"].clone()).map_err(err)?;
        let space = Space::new(p, n).map_err(err)?;
        if values.len() != space.size() {
            return Err(format!("expected {} values, got {}", space.size(), values.len()));
        }
        (space, to_complex(&values))
    };
    let profile = (2..=d_max.max(2))
        .map(|d| gowers_norm(&f, &space, d, Mode::Exact, &caps).map(|x| json!({"d": d, "norm": round12(x)})))
        .collect::<hofa_core::Result<Vec<_>>>()
        .map_err(err)?;
    Ok(json!({"p": space.p(), "n": space.n(), "profile": profile}).to_string())
}

/// Runs the subspace tester for `linearity` or `degree:T` on a coloring,
/// with the exact per-trial rejection probability alongside.
pub fn tester_rate_json(coloring: &str, property: &str, d: usize, trials: u64, seed: u64, affine: bool) -> Result<String, String> {
    let caps = caps();
    let f = parse_coloring(coloring).map_err(err)?;
    let prop = match property.split_once(':') {
        None if property == "linearity" => Property::linearity(f.p),
        Some(("degree", t)) => Property::classical_degree(f.p, t.parse().map_err(err)?),
        _ => return Err(format!("unknown property {property:?}")),
    };
    if prop.colors != f.colors.len() {
        return Err(format!("{} needs {} colors", prop.name, prop.colors));
    }
    let mode = if affine { SubspaceMode::Affine } else { SubspaceMode::Linear };
    let cfg = TesterConfig { d, trials, seed, mode, witness_limit: 0 };
    let r = run_tester(&f, &prop, &cfg, &caps).map_err(err)?;
    let mut out = serde_json::to_value(TestReportJson::from_report(&r)).map_err(err)?;
    if let Ok(q) = exact_rejection_probability(&f, &prop, d, mode, &caps) {
        out["exact"] = json!(round12(q.value()));
    }
    Ok(out.to_string())
}

/// `Φ_{d,k}(L)` for a system `{p, l, rows}`.
pub fn consistency_size_json(system: &str, d: u32, k: u32, n_cap: usize) -> Result<String, String> {
    let caps = caps();
    let s: LinearSystem = parse("linear system", system).map_err(err)?;
    let s = LinearSystem::new(s.p, s.l, s.rows).map_err(err)?;
    let set = consistency_set(d, k, &s, n_cap, WitnessMode::Homogeneous, &caps).map_err(err)?;
    let mut out = serde_json::to_value(ConsistencySetJson::from_set(&set, &caps).map_err(err)?).map_err(err)?;
    out["size"] = json!(set.size().to_string());
    Ok(out.to_string())
}

#[wasm_bindgen]
pub fn gowers_profile(input: &str, d_max: u32) -> Result<String, JsValue> {
    gowers_profile_json(input, d_max).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn tester_rate(coloring: &str, property: &str, d: usize, trials: u32, seed: u32, affine: bool) -> Result<String, JsValue> {
    tester_rate_json(coloring, property, d, trials as u64, seed as u64, affine).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn consistency_size(system: &str, d: u32, k: u32, n_cap: usize) -> Result<String, JsValue> {
    consistency_size_json(system, d, k, n_cap).map_err(|e| JsValue::from_str(&e))
}
