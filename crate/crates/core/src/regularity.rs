//! Regularity engines: weak, standard and strong decompositions, and the
//! randomized subatom selection on top of the strong one.
//!
//! The inverse theorem is replaced by [`inverse_oracle`]; each refinement
//! uses the correlation the oracle actually achieved.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{gowers_norm, inverse_oracle, l2_norm, to_complex, Mode};
use crate::caps::Caps;
use crate::error::{invalid, shape, HofaError, Result};
use crate::factors::{factor_rank, PolynomialFactor, SubatomSelector};
use crate::field::AtomIndex;

/// Knobs shared by the engines.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RegPolicy {
    /// Refinements allowed in one weak-regularity call, and rounds allowed
    /// in the outer loops.
    pub max_iterations: usize,
    /// Candidate polynomials the inverse oracle may examine.
    pub oracle_budget: u64,
    pub seed: u64,
    pub norm_mode: Mode,
}

impl Default for RegPolicy {
    fn default() -> Self {
        RegPolicy { max_iterations: 64, oracle_budget: 1 << 22, seed: 0, norm_mode: Mode::Exact }
    }
}

/// `f = f_str + f_psr + f_sml`.
#[derive(Debug, Clone, Serialize)]
pub struct Decomposition {
    pub str_part: Vec<f64>,
    pub psr: Vec<f64>,
    pub sml: Vec<f64>,
}

impl Decomposition {
    pub fn reconstructs(&self, f: &[f64]) -> bool {
        f.iter().enumerate().all(|(i, &v)| (self.str_part[i] + self.psr[i] + self.sml[i] - v).abs() < 1e-9)
    }

    /// `f_str` and `f_str + f_sml` in `[0,1]`, `f_psr` and `f_sml` in `[-1,1]`.
    pub fn ranges_ok(&self) -> bool {
        const T: f64 = 1e-9;
        let unit = |v: f64| (-T..=1.0 + T).contains(&v);
        let sym = |v: f64| (-1.0 - T..=1.0 + T).contains(&v);
        (0..self.str_part.len()).all(|i| {
            unit(self.str_part[i]) && unit(self.str_part[i] + self.sml[i]) && sym(self.psr[i]) && sym(self.sml[i])
        })
    }
}

/// One line of an engine trace.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub stage: &'static str,
    pub round: usize,
    pub degree_used: u32,
    pub factor_log_norm: u64,
    pub factor_degree: u32,
    pub energy: Vec<f64>,
    pub psr_norm: Vec<f64>,
    /// Oracle correlation behind the refinement made in this row.
    pub correlation: Option<f64>,
    /// Energy gain of the refined function.
    pub gain: Option<f64>,
}

pub const TRACE_HEADER: &str = "stage,round,degree_used,factor_norm,factor_degree,energy_per_function,psr_norm_per_function,correlation,gain";

/// Renders a trace as CSV; per-function columns are `;`-separated and
/// floats use 12 significant digits.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let fmt = |v: f64| format!("{:.12e}", v);
    let join = |vs: &[f64]| vs.iter().map(|&v| fmt(v)).collect::<Vec<_>>().join(";");
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},p^{},{},{},{},{},{}",
            r.stage,
            r.round,
            r.degree_used,
            r.factor_log_norm,
            r.factor_degree,
            join(&r.energy),
            join(&r.psr_norm),
            r.correlation.map(fmt).unwrap_or_default(),
            r.gain.map(fmt).unwrap_or_default(),
        );
    }
    out
}

fn check_inputs(fs: &[Vec<f64>], b0: &PolynomialFactor) -> Result<()> {
    if fs.is_empty() {
        return invalid("need at least one function");
    }
    let size = b0.codes().len();
    for f in fs {
        if f.len() != size {
            return shape("function length does not match the factor domain");
        }
        if f.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return invalid("regularity inputs must take values in [0,1]");
        }
    }
    Ok(())
}

fn psr_norm(f: &[f64], b: &PolynomialFactor, d: u32, mode: Mode, caps: &Caps) -> Result<f64> {
    let g: Vec<f64> = f.iter().zip(b.conditional_expectation(f)?).map(|(a, e)| a - e).collect();
    gowers_norm(&to_complex(&g), &b.space(), d + 1, mode, caps)
}

fn energies(fs: &[Vec<f64>], b: &PolynomialFactor) -> Result<Vec<f64>> {
    fs.iter().map(|f| b.energy(f)).collect()
}

/// Output of [`weak_regularity`].
#[derive(Debug, Clone)]
pub struct WeakOutput {
    pub factor: PolynomialFactor,
    pub decompositions: Vec<Decomposition>,
    pub trace: Vec<TraceRow>,
    /// False when the iteration cap stopped the loop.
    pub converged: bool,
}

/// Refines `b0` until `‖f - E[f|B]‖_{U^{d+1}} < η` for every input.
pub fn weak_regularity(
    fs: &[Vec<f64>],
    b0: &PolynomialFactor,
    d: u32,
    eta: f64,
    policy: &RegPolicy,
    caps: &Caps,
) -> Result<WeakOutput> {
    check_inputs(fs, b0)?;
    if d == 0 || eta <= 0.0 {
        return invalid("weak regularity needs d ≥ 1 and η > 0");
    }
    let mut b = b0.clone();
    let mut trace = Vec::new();
    let mut converged = false;
    for round in 0..=policy.max_iterations {
        let norms: Vec<f64> = fs.iter().map(|f| psr_norm(f, &b, d, policy.norm_mode, caps)).collect::<Result<_>>()?;
        let mut row = TraceRow {
            stage: "reg-1",
            round,
            degree_used: d,
            factor_log_norm: b.params().log_norm(),
            factor_degree: b.degree(),
            energy: energies(fs, &b)?,
            psr_norm: norms.clone(),
            correlation: None,
            gain: None,
        };
        let worst = (0..fs.len()).fold(0, |best, i| if norms[i] > norms[best] { i } else { best });
        if norms[worst] < eta {
            trace.push(row);
            converged = true;
            break;
        }
        if round == policy.max_iterations {
            trace.push(row);
            break;
        }
        let f = &fs[worst];
        let g: Vec<f64> = f.iter().zip(b.conditional_expectation(f)?).map(|(a, e)| a - e).collect();
        let seed = policy.seed.wrapping_add(round as u64);
        let witness = inverse_oracle(&to_complex(&g), &b.space(), d, 0.0, policy.oracle_budget, seed, caps)?
            .ok_or_else(|| HofaError::SearchExhausted(format!("no correlating polynomial of degree ≤ {d} in round {round}")))?;
        let next = b.refine(&[witness.poly.clone()], caps)?;
        let gain = next.energy(f)? - b.energy(f)?;
        row.correlation = Some(witness.correlation);
        row.gain = Some(gain);
        trace.push(row);
        b = next;
    }
    let decompositions = fs
        .iter()
        .map(|f| {
            let s = b.conditional_expectation(f)?;
            let psr = f.iter().zip(&s).map(|(a, e)| a - e).collect();
            Ok(Decomposition { str_part: s, psr, sml: vec![0.0; f.len()] })
        })
        .collect::<Result<_>>()?;
    Ok(WeakOutput { factor: b, decompositions, trace, converged })
}

/// Output of [`regularity`]. `factor` is the coarse factor carrying
/// `f_str`; `next` is the refinement one weak step later.
#[derive(Debug, Clone)]
pub struct RegOutput {
    pub factor: PolynomialFactor,
    pub next: PolynomialFactor,
    pub decompositions: Vec<Decomposition>,
    pub trace: Vec<TraceRow>,
    pub converged: bool,
    /// `η(‖B‖)` at the returned coarse factor.
    pub eta_used: f64,
}

/// Iterates [`weak_regularity`] with `η(‖B_i‖)` until every energy gain
/// drops below `θ²`.
pub fn regularity(
    fs: &[Vec<f64>],
    b0: &PolynomialFactor,
    d: u32,
    theta: f64,
    eta: &dyn Fn(u128) -> f64,
    policy: &RegPolicy,
    caps: &Caps,
) -> Result<RegOutput> {
    check_inputs(fs, b0)?;
    if theta <= 0.0 {
        return invalid("θ must be positive");
    }
    let mut cur = b0.clone();
    let mut trace = Vec::new();
    for round in 0..policy.max_iterations.max(1) {
        let eta_cur = eta(cur.norm());
        let weak = weak_regularity(fs, &cur, d, eta_cur, policy, caps)?;
        if !weak.converged {
            return Err(HofaError::SearchExhausted(format!("weak regularity hit its iteration cap in round {round}")));
        }
        for mut r in weak.trace {
            r.stage = "reg-2";
            r.round = round;
            trace.push(r);
        }
        let next = weak.factor;
        let before = energies(fs, &cur)?;
        let after = energies(fs, &next)?;
        if before.iter().zip(&after).all(|(a, b)| b - a < theta * theta) {
            let decompositions = fs
                .iter()
                .map(|f| {
                    let s = cur.conditional_expectation(f)?;
                    let t = next.conditional_expectation(f)?;
                    Ok(Decomposition {
                        psr: f.iter().zip(&t).map(|(a, b)| a - b).collect(),
                        sml: t.iter().zip(&s).map(|(a, b)| a - b).collect(),
                        str_part: s,
                    })
                })
                .collect::<Result<_>>()?;
            return Ok(RegOutput { factor: cur, next, decompositions, trace, converged: true, eta_used: eta_cur });
        }
        cur = next;
    }
    Err(HofaError::SearchExhausted("regularity did not settle within the round cap".into()))
}

/// Growth functions of the strong engine, each of `(degree, norm)`.
pub struct GrowthConfig {
    pub eta: Box<dyn Fn(u32, u128) -> f64 + Send + Sync>,
    pub theta: Box<dyn Fn(u32, u128) -> f64 + Send + Sync>,
    pub degree: Box<dyn Fn(u32, u128) -> u32 + Send + Sync>,
    pub zeta: f64,
    pub c0: usize,
    pub selector_retries: usize,
    pub policy: RegPolicy,
}

impl GrowthConfig {
    /// Constant `η` and `θ`; the uniformity degree is `d_start` until the
    /// factor outgrows the initial linear factor, then `d_next`.
    pub fn escalating(p: u32, c0: usize, zeta: f64, eta: f64, theta: f64, d_start: u32, d_next: u32) -> Self {
        let base = crate::caps::pow_sat(p as u64, n_reg(p, c0, zeta) as u64);
        GrowthConfig {
            eta: Box::new(move |_, _| eta),
            theta: Box::new(move |_, _| theta),
            degree: Box::new(move |_, n| if n <= base { d_start } else { d_next.max(d_start) }),
            zeta,
            c0,
            selector_retries: 64,
            policy: RegPolicy::default(),
        }
    }

    /// Spot-checks the declared monotonicity on a grid of arguments.
    pub fn is_monotone(&self) -> bool {
        let norms: Vec<u128> = (0..12).map(|e| 1u128 << e).collect();
        for dd in 1..5u32 {
            for w in norms.windows(2) {
                let (a, b) = (w[0], w[1]);
                if (self.eta)(dd, b) > (self.eta)(dd, a) + 1e-15 || (self.theta)(dd, b) > (self.theta)(dd, a) + 1e-15 {
                    return false;
                }
                if (self.degree)(dd, b) < (self.degree)(dd, a) {
                    return false;
                }
                if (self.eta)(dd + 1, a) > (self.eta)(dd, a) + 1e-15 || (self.degree)(dd + 1, a) < (self.degree)(dd, a) {
                    return false;
                }
            }
        }
        true
    }
}

/// Dimension floor `max(c_0, ⌈log_p(2/ζ)⌉)` for subatom selection.
pub fn n_reg(p: u32, c0: usize, zeta: f64) -> usize {
    let l = ((2.0 / zeta).ln() / (p as f64).ln() - 1e-12).ceil().max(0.0) as usize;
    c0.max(l)
}

/// Output of [`strong_regularity_core`].
#[derive(Debug, Clone)]
pub struct StrongOutput {
    pub coarse: PolynomialFactor,
    pub fine: PolynomialFactor,
    pub decompositions: Vec<Decomposition>,
    /// `(deg B_i, log_p ‖B_i‖, degree used)` per outer round.
    pub rounds: Vec<(u32, u64, u32)>,
    pub trace: Vec<TraceRow>,
    /// Bound `η(d_used, ‖B'‖)` that `f_psr` satisfies in `U^{d_used+1}`.
    pub eta_bound: f64,
    pub degree_used: u32,
    /// `θ(deg B, ‖B‖)` passed to the last standard round.
    pub theta_used: f64,
}

/// The strong engine with an explicit `θ`: each round runs [`regularity`]
/// at degree `d(deg B_i, ‖B_i‖)`; it halts once every energy gain is below
/// `ζ³`, returning `B = B_{m-1}` and `B' = B_m`.
pub fn strong_regularity_core(
    fs: &[Vec<f64>],
    b0: &PolynomialFactor,
    zeta: f64,
    theta: &dyn Fn(u32, u128) -> f64,
    cfg: &GrowthConfig,
    caps: &Caps,
) -> Result<StrongOutput> {
    check_inputs(fs, b0)?;
    let mut cur = b0.clone();
    let mut trace = Vec::new();
    let mut rounds = Vec::new();
    for round in 0..cfg.policy.max_iterations.max(1) {
        let dd = (cfg.degree)(cur.degree(), cur.norm());
        let th = theta(cur.degree(), cur.norm());
        rounds.push((cur.degree(), cur.params().log_norm(), dd));
        let eta_fn = |n: u128| (cfg.eta)(dd, n);
        let reg = regularity(fs, &cur, dd, th, &eta_fn, &cfg.policy, caps)?;
        for mut r in reg.trace {
            r.stage = "reg-3";
            r.round = round;
            trace.push(r);
        }
        let next = reg.factor;
        let before = energies(fs, &cur)?;
        let after = energies(fs, &next)?;
        let settled = before.iter().zip(&after).all(|(a, b)| b - a < zeta.powi(3));
        if settled {
            let eta_bound = (cfg.eta)(dd, next.norm());
            return Ok(StrongOutput {
                coarse: cur,
                fine: next,
                decompositions: reg.decompositions,
                rounds,
                trace,
                eta_bound,
                degree_used: dd,
                theta_used: th,
            });
        }
        cur = next;
    }
    Err(HofaError::SearchExhausted("strong regularity did not settle within the round cap".into()))
}

/// Outcome of checking the selection conclusions for one selector.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionCheck {
    /// Small-norm condition on every selected subatom with `a_{1,0} ≠ 0`.
    pub small_on_selected: bool,
    /// Largest `‖f_sml 1_S‖_2 / ‖1_S‖_2` over checked subatoms.
    pub worst_sml_ratio: f64,
    /// Atoms whose average moves by at least `ζ` under selection, over `|A_I|`.
    pub bad_fraction: f64,
    pub averages_ok: bool,
    /// Nonempty atoms of `B` whose selected subatom is empty.
    pub empty_selected: usize,
    pub linear_slots: u32,
    pub linear_slots_ok: bool,
}

impl SelectionCheck {
    pub fn holds(&self) -> bool {
        self.small_on_selected && self.averages_ok && self.linear_slots_ok
    }
}

/// Checks the selection conclusions exactly. Atoms of `B` with no points,
/// and selected subatoms with no points, satisfy both conditions
/// vacuously.
pub fn check_selection(
    fs: &[Vec<f64>],
    out: &StrongOutput,
    s: &SubatomSelector,
    theta: f64,
    zeta: f64,
    c0: usize,
) -> Result<SelectionCheck> {
    let coarse = &out.coarse;
    let fine = &out.fine;
    let params = coarse.params();
    let fparams = fine.params();
    let mut groups: std::collections::BTreeMap<u128, Vec<usize>> = Default::default();
    for (x, &c) in coarse.codes().iter().enumerate() {
        groups.entry(c).or_default().push(x);
    }
    let mut sub: std::collections::BTreeMap<u128, Vec<usize>> = Default::default();
    for (x, &c) in fine.codes().iter().enumerate() {
        sub.entry(c).or_default().push(x);
    }
    let lin: Vec<usize> = params.slots().iter().enumerate().filter(|(_, s)| **s == (1, 0)).map(|(i, _)| i).collect();
    let total_atoms = params.norm() as f64;
    let mut worst: f64 = 0.0;
    let mut small = true;
    let mut bad = 0usize;
    let mut empty_selected = 0usize;
    for (&code, pts) in &groups {
        let a: AtomIndex = params.atom_decode(code);
        let sa = s.apply(&a)?;
        let scode = fparams.atom_code(&sa);
        let Some(spts) = sub.get(&scode) else {
            empty_selected += 1;
            continue;
        };
        let nonzero_linear = lin.iter().any(|&i| a.entries[i] != 0);
        let mut moved = false;
        for (f, dec) in fs.iter().zip(&out.decompositions) {
            if nonzero_linear {
                let mass: f64 = spts.iter().map(|&x| dec.sml[x] * dec.sml[x]).sum();
                let ratio = (mass / spts.len() as f64).sqrt();
                worst = worst.max(ratio);
                small &= ratio < theta;
            }
            let avg = |xs: &[usize]| xs.iter().map(|&x| f[x]).sum::<f64>() / xs.len() as f64;
            moved |= (avg(pts) - avg(spts)).abs() >= zeta;
        }
        if moved {
            bad += 1;
        }
    }
    let bad_fraction = bad as f64 / total_atoms;
    let linear_slots = params.get(1, 0);
    Ok(SelectionCheck {
        small_on_selected: small,
        worst_sml_ratio: worst,
        bad_fraction,
        averages_ok: bad_fraction <= zeta,
        empty_selected,
        linear_slots,
        linear_slots_ok: linear_slots as usize >= c0,
    })
}

/// Output of [`strong_regularity`].
#[derive(Debug, Clone)]
pub struct SelectionOutput {
    pub strong: StrongOutput,
    pub selector: SubatomSelector,
    pub check: SelectionCheck,
    pub attempts: usize,
    /// `θ(deg B, ‖B‖)` the selection was checked against.
    pub theta: f64,
}

/// Strong regularity followed by a randomized subatom selector.
///
/// Starts from `n_reg` coordinate forms, runs the strong engine with
/// `θ'(D,N) = θ(D,N) / (2 √R N)` and `ζ/4`, then draws selectors with
/// seeded random coefficients until both selection conclusions hold.
pub fn strong_regularity(fs: &[Vec<f64>], p: u32, n: usize, cfg: &GrowthConfig, caps: &Caps) -> Result<SelectionOutput> {
    let nr = n_reg(p, cfg.c0, cfg.zeta);
    if n < nr {
        return invalid(format!("dimension {n} is below the floor {nr}"));
    }
    let b0 = PolynomialFactor::linear_forms(p, n, nr, caps)?;
    let r = fs.len() as f64;
    let theta_prime = |dd: u32, nn: u128| (cfg.theta)(dd, nn) / (2.0 * r.sqrt() * nn as f64);
    let strong = strong_regularity_core(fs, &b0, cfg.zeta / 4.0, &theta_prime, cfg, caps)?;
    let theta = (cfg.theta)(strong.coarse.degree(), strong.coarse.norm());
    let source = strong.coarse.params().clone();
    let target = strong.fine.params().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.policy.seed);
    let mut best: Option<(SelectionCheck, usize)> = None;
    for attempt in 1..=cfg.selector_retries.max(1) {
        let s = SubatomSelector::random(&source, &target, &mut rng, caps)?;
        let check = check_selection(fs, &strong, &s, theta, cfg.zeta, cfg.c0)?;
        if check.holds() {
            return Ok(SelectionOutput { strong, selector: s, check, attempts: attempt, theta });
        }
        if best.as_ref().map_or(true, |(b, _)| check.bad_fraction < b.bad_fraction) {
            best = Some((check, attempt));
        }
    }
    let (b, at) = best.expect("at least one attempt");
    Err(HofaError::SearchExhausted(format!(
        "no selector within {} attempts; best was attempt {at} with bad fraction {:.6} and worst ratio {:.6}",
        cfg.selector_retries, b.bad_fraction, b.worst_sml_ratio
    )))
}

/// Conclusions of the weak engine, checked exactly.
#[derive(Debug, Clone, Serialize)]
pub struct WeakConditions {
    pub str_is_conditional_expectation: bool,
    pub psr_norms: Vec<f64>,
    pub psr_small: bool,
    pub ranges: bool,
    pub reconstructs: bool,
    pub degree_ok: bool,
}

pub fn verify_weak(fs: &[Vec<f64>], out: &WeakOutput, d: u32, eta: f64, caps: &Caps) -> Result<WeakConditions> {
    let mut cond_exp = true;
    let mut norms = Vec::new();
    let mut ranges = true;
    let mut recon = true;
    for (f, dec) in fs.iter().zip(&out.decompositions) {
        let e = out.factor.conditional_expectation(f)?;
        cond_exp &= e.iter().zip(&dec.str_part).all(|(a, b)| (a - b).abs() < 1e-12);
        norms.push(gowers_norm(&to_complex(&dec.psr), &out.factor.space(), d + 1, Mode::Exact, caps)?);
        ranges &= dec.ranges_ok();
        recon &= dec.reconstructs(f);
    }
    Ok(WeakConditions {
        str_is_conditional_expectation: cond_exp,
        psr_small: norms.iter().all(|&n| n < eta),
        psr_norms: norms,
        ranges,
        reconstructs: recon,
        degree_ok: out.factor.degree() <= d,
    })
}

/// Conclusions of the standard engine, checked exactly. `rank_floor`
/// gives the required analytic rank as a function of `‖B‖`.
#[derive(Debug, Clone, Serialize)]
pub struct RegConditions {
    pub str_is_conditional_expectation: bool,
    pub psr_norms: Vec<f64>,
    pub psr_small: bool,
    pub ranges: bool,
    pub rank_ok: bool,
    pub rank: f64,
    pub sml_norms: Vec<f64>,
    pub sml_small: bool,
    pub reconstructs: bool,
}

pub fn verify_regular(
    fs: &[Vec<f64>],
    out: &RegOutput,
    d: u32,
    theta: f64,
    rank_floor: &dyn Fn(u128) -> f64,
    caps: &Caps,
) -> Result<RegConditions> {
    let mut cond_exp = true;
    let mut psr = Vec::new();
    let mut sml = Vec::new();
    let mut ranges = true;
    let mut recon = true;
    for (f, dec) in fs.iter().zip(&out.decompositions) {
        let e = out.factor.conditional_expectation(f)?;
        cond_exp &= e.iter().zip(&dec.str_part).all(|(a, b)| (a - b).abs() < 1e-12);
        psr.push(gowers_norm(&to_complex(&dec.psr), &out.factor.space(), d + 1, Mode::Exact, caps)?);
        sml.push(l2_norm(&dec.sml));
        ranges &= dec.ranges_ok();
        recon &= dec.reconstructs(f);
    }
    let rank = factor_rank(&out.factor, Mode::Exact, 0, caps)?.combination_min.as_f64();
    Ok(RegConditions {
        str_is_conditional_expectation: cond_exp,
        psr_small: psr.iter().all(|&n| n < out.eta_used),
        psr_norms: psr,
        ranges,
        rank_ok: rank >= rank_floor(out.factor.norm()) - 1e-9,
        rank,
        sml_small: sml.iter().all(|&n| n < theta),
        sml_norms: sml,
        reconstructs: recon,
    })
}
