//! Quick invariant checks against small exhaustive oracles.

use hofa_core::analysis::{gowers_norm, phase_function, Mode};
use hofa_core::consistency::{consistency_set, WitnessMode};
use hofa_core::field::{in_dp, mul_mod, ppow, sigma, Space, TorusValue};
use hofa_core::forms::LinearSystem;
use hofa_core::ncpoly::{homogeneous_decomposition, is_homogeneous, MonomialRep};
use hofa_core::patterns::{projectivize, ColorSet, Coloring};
use hofa_core::tester::{blr_rejection_probability, check_locally_characterized, run_tester, Property, SubspaceMode, TesterConfig};
use hofa_core::{Caps, Result};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((pass, detail)) => Check { name, pass, detail },
        Err(e) => Check { name, pass: false, detail: format!("error: {e}") },
    }
}

pub fn run(caps: &Caps) -> Vec<Check> {
    vec![
        check("sigma-multiplicative", || {
            let mut tested = 0;
            for p in [2u32, 3, 5] {
                for d in 1..=8 {
                    for k in (0..=d).filter(|&k| in_dp(p, d, k)) {
                        let m = ppow(p, k + 1)?;
                        for b in 1..p {
                            for c in 1..p {
                                let bc = (b * c) % p;
                                if mul_mod(sigma(p, b, d, k)?, sigma(p, c, d, k)?, m) != sigma(p, bc, d, k)? {
                                    return Ok((false, format!("p={p} (d,k)=({d},{k}) b={b} c={c}")));
                                }
                                tested += 1;
                            }
                        }
                    }
                }
            }
            Ok((true, format!("{tested} products")))
        }),
        check("gowers-u2-x1x2", || {
            let rep = MonomialRep::monomial(2, vec![1, 1], 0, 1)?;
            let t = rep.value_table(caps)?;
            let v = gowers_norm(&phase_function(&t), &t.space(), 2, Mode::Exact, caps)?;
            Ok(((v - 0.5f64.sqrt()).abs() < 1e-9, format!("{v}")))
        }),
        check("gowers-polynomial-phase", || {
            let rep = MonomialRep::new(3, 2, TorusValue::zero(3, 0), &[(vec![2, 1], 0, 1), (vec![1, 0], 0, 2)])?;
            let t = rep.value_table(caps)?;
            let v = gowers_norm(&phase_function(&t), &t.space(), rep.degree() + 1, Mode::Exact, caps)?;
            Ok(((v - 1.0).abs() < 1e-9, format!("{v}")))
        }),
        check("blr-x1x2", || {
            let f = Coloring::new(2, 2, ColorSet::plain(2), vec![0, 0, 0, 1])?;
            let q = blr_rejection_probability(&f)?.reduced();
            Ok((q.num == 3 && q.den == 8, format!("{}/{}", q.num, q.den)))
        }),
        check("consistency-3ap", || {
            let mut sizes = Vec::new();
            for p in [2u32, 3] {
                let s = LinearSystem::new(p, 2, vec![vec![1, 0], vec![0, 1], vec![1, 1]])?;
                let set = consistency_set(1, 0, &s, 3, WitnessMode::Homogeneous, caps)?;
                sizes.push(set.size());
                if set.size() != (p * p) as u128 || !set.stabilized() {
                    return Ok((false, format!("p={p}: size {}", set.size())));
                }
            }
            Ok((true, format!("{sizes:?}")))
        }),
        check("homogeneous-decomposition", || {
            let reps = [
                MonomialRep::new(3, 2, TorusValue::new(3, 0, 1)?, &[(vec![1, 1], 0, 2), (vec![2, 0], 0, 1), (vec![1, 0], 0, 1)])?,
                MonomialRep::new(2, 2, TorusValue::zero(2, 1), &[(vec![1, 0], 1, 1), (vec![1, 1], 0, 1), (vec![0, 1], 0, 1)])?,
            ];
            for rep in &reps {
                let parts = homogeneous_decomposition(rep, caps)?;
                let mut acc = MonomialRep::zero(rep.p(), rep.n())?.value_table(caps)?;
                for h in &parts {
                    if !is_homogeneous(&h.rep, caps)? {
                        return Ok((false, "non-homogeneous part".into()));
                    }
                    acc = acc.add(&h.rep.value_table(caps)?)?;
                }
                if !acc.sub(&rep.value_table(caps)?)?.is_zero() {
                    return Ok((false, "parts do not sum back".into()));
                }
            }
            Ok((true, format!("{} polynomials", reps.len())))
        }),
        check("tester-one-sided", || {
            let space = Space::new(2, 5)?;
            let values = (0..space.size()).map(|x| ((space.digit(x, 0) + space.digit(x, 3)) % 2) as usize).collect();
            let f = Coloring::new(2, 5, ColorSet::plain(2), values)?;
            let cfg = TesterConfig { d: 2, trials: 2000, seed: 1, mode: SubspaceMode::Linear, witness_limit: 0 };
            let r = run_tester(&f, &Property::linearity(2), &cfg, caps)?;
            Ok((r.rejects == 0, format!("{} rejects", r.rejects)))
        }),
        check("projectivize", || {
            let f = Coloring::new(3, 2, ColorSet::plain(2), (0..9).map(|x| x % 2).collect())?;
            let g = projectivize(&f, caps)?;
            Ok((g.is_projective(), format!("{} colors", g.colors.len())))
        }),
        check("linearity-locally-characterized", || {
            let r = check_locally_characterized(&Property::linearity(2), 2, 3, 1 << 16, caps)?;
            Ok((r.holds, format!("{:?}", r.per_n)))
        }),
    ]
}
