//! Consistency sets `Φ_{d,k}(L)` and `Φ_I(L)`.
//!
//! `Φ_{d,k}(L)` is the set of tuples `(P(L_1(x)), ..., P(L_m(x)))` with `P`
//! homogeneous of degree `d` and depth `k` and `x` ranging over `V^l`.
//! Tuples are vectors of residues modulo `p^{k+1}`.

use std::collections::HashSet;

use serde::Serialize;

use crate::caps::{pow_sat, Caps};
use crate::analysis::joint_distribution;
use crate::error::{invalid, shape, Result};
use crate::factors::PolynomialFactor;
use crate::field::{in_dp, max_depth, AtomIndex, ParameterList, Space};
use crate::forms::{Canonical, LinearSystem};
use crate::linalg::Subgroup;
use crate::ncpoly::{character_component, seed_homogeneous, MonomialRep, ValueTable};

/// Which polynomials count as witnesses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WitnessMode {
    /// Every `P` of degree at most `d` and depth at most `k` with
    /// `P(0) = 0` and `P(bx) = σ_b^{(d,k)} P(x)`. Adding an exact witness
    /// on fresh variables shows this gives the same set as exact witnesses.
    Homogeneous,
    /// Only witnesses of degree exactly `d` and depth exactly `k`.
    Exact,
    /// As `Homogeneous`, also admitting nonzero constants fixed by the action.
    WithConstants,
}

/// How stabilization was certified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Certificate {
    /// Two consecutive dimensions produced the same set.
    Consecutive { n: usize },
    /// `n ≥ l`: every witness factors through the span of the tuple.
    SpanDimension { n: usize },
    /// The cap was reached first.
    None,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerN {
    pub n: usize,
    /// Distinct tuples produced directly by generators, before closure.
    pub raw: Option<usize>,
    pub closed: u128,
}

/// `Φ_{d,k}(L)` as a subgroup of `(Z/p^{k+1})^m`.
#[derive(Debug, Clone)]
pub struct ConsistencySet {
    pub p: u32,
    pub d: u32,
    pub k: u32,
    pub m: usize,
    pub group: Subgroup,
    pub per_n: Vec<PerN>,
    pub certificate: Certificate,
}

impl ConsistencySet {
    pub fn size(&self) -> u128 {
        self.group.size()
    }

    pub fn stabilized(&self) -> bool {
        self.certificate != Certificate::None
    }

    pub fn contains(&self, tuple: &[u64]) -> bool {
        tuple.len() == self.m && self.group.contains(tuple)
    }

    pub fn elements(&self, caps: &Caps) -> Result<Vec<Vec<u64>>> {
        self.group.elements(caps.elements)
    }
}

/// Generators of the witness module on `F_p^n`, as tables at depth `k`.
pub fn witness_generators(p: u32, d: u32, k: u32, n: usize, mode: WitnessMode, caps: &Caps) -> Result<Vec<ValueTable>> {
    if !in_dp(p, d, k) {
        return invalid(format!("({d},{k}) is not admissible for p = {p}"));
    }
    let space = Space::new(p, n)?;
    caps.check_table("witness tables", space.size() as u128)?;
    let j = d % (p - 1);
    let mut gens = Vec::new();
    for idx in 1..space.size() {
        let exps = space.digits(idx);
        let s: u32 = exps.iter().sum();
        for kk in 0..=k.min(max_depth(p, d)) {
            if s + kk * (p - 1) > d {
                continue;
            }
            let t = MonomialRep::monomial(p, exps.clone(), kk, 1)?.value_table(caps)?.embed(k)?;
            let g = character_component(&t, j);
            if !g.is_zero() && !gens.contains(&g) {
                gens.push(g);
            }
        }
    }
    match mode {
        WitnessMode::Homogeneous => {}
        WitnessMode::WithConstants => {
            if j == 0 {
                gens.push(ValueTable::new(p, n, k, vec![1; space.size()])?);
            }
        }
        WitnessMode::Exact => {
            let seed = seed_homogeneous(p, d, k, caps)?;
            if seed.rep.n() > n {
                return Ok(Vec::new());
            }
            let e0 = seed.rep.pad(n - seed.rep.n()).value_table(caps)?.embed(k)?;
            let modulus = (p as u64).pow(k + 1);
            let mut exact = vec![e0.clone()];
            for g in gens {
                for c in 0..modulus {
                    let cand = g.add(&e0.zmul(c as i64))?;
                    let (dd, kk) = cand.degree_depth(caps)?;
                    if dd == d && kk == k {
                        exact.push(cand);
                        break;
                    }
                }
            }
            gens = exact;
        }
    }
    Ok(gens)
}

fn tuple_code(t: &[u64], modulus: u64) -> Option<u128> {
    let mut c: u128 = 0;
    for &v in t {
        c = c.checked_mul(modulus as u128)?.checked_add(v as u128)?;
    }
    Some(c)
}

/// `Φ_{d,k}(L)` by enumeration of witnesses and tuples on `F_p^n` for
/// `n = 1..=n_cap`, closed under addition.
pub fn consistency_set(
    d: u32,
    k: u32,
    system: &LinearSystem,
    n_cap: usize,
    mode: WitnessMode,
    caps: &Caps,
) -> Result<ConsistencySet> {
    let p = system.p;
    let m = system.m();
    let l = system.l;
    let modulus = (p as u64).pow(k + 1);
    let mut total = Subgroup::new(p, k + 1, m);
    let mut per_n = Vec::new();
    let mut certificate = Certificate::None;
    for n in 1..=n_cap.max(1) {
        let space = Space::new(p, n)?;
        let gens = witness_generators(p, d, k, n, mode, caps)?;
        let tuples = pow_sat(space.size() as u64, l as u64);
        caps.check_enum("consistency enumeration", tuples.saturating_mul(gens.len().max(1) as u128 * m.max(1) as u128))?;
        let mut group = Subgroup::new(p, k + 1, m);
        let mut raw: Option<HashSet<u128>> = Some(HashSet::new());
        let mut x = vec![0usize; l];
        let mut tuple = vec![0u64; m];
        for t in 0..tuples as usize {
            let mut r = t;
            for xi in x.iter_mut() {
                *xi = r % space.size();
                r /= space.size();
            }
            let pts = system.evaluate(&space, &x)?;
            for g in &gens {
                for (slot, &pt) in tuple.iter_mut().zip(&pts) {
                    *slot = g.values[pt];
                }
                let fresh = match (&mut raw, tuple_code(&tuple, modulus)) {
                    (Some(set), Some(code)) => set.insert(code),
                    _ => {
                        raw = None;
                        true
                    }
                };
                if fresh {
                    group.insert(&tuple);
                }
            }
        }
        let before = total.size();
        for e in group.generators() {
            total.insert(&e);
        }
        per_n.push(PerN { n, raw: raw.map(|s| s.len()), closed: group.size() });
        if mode != WitnessMode::Exact && n >= l {
            certificate = Certificate::SpanDimension { n };
            break;
        }
        if n >= 2 && total.size() == before && group.size() == total.size() && !gens.is_empty() {
            certificate = Certificate::Consecutive { n };
            break;
        }
    }
    Ok(ConsistencySet { p, d, k, m, group: total, per_n, certificate })
}

/// `Φ_{d,k}(L)` computed directly: the witness module on `F_p^l` evaluated
/// at the coefficient vectors of the forms.
pub fn consistency_set_direct(d: u32, k: u32, system: &LinearSystem, mode: WitnessMode, caps: &Caps) -> Result<Subgroup> {
    let p = system.p;
    let l = system.l.max(1);
    let space = Space::new(p, l)?;
    let gens = witness_generators(p, d, k, l, mode, caps)?;
    let pts: Vec<usize> = system.rows.iter().map(|r| {
        let mut padded = r.clone();
        padded.resize(l, 0);
        space.index(&padded)
    }).collect();
    let mut group = Subgroup::new(p, k + 1, system.m());
    for g in &gens {
        let tuple: Vec<u64> = pts.iter().map(|&x| g.values[x]).collect();
        group.insert(&tuple);
    }
    Ok(group)
}

/// `Φ_I(L)` as the product of its slot components.
#[derive(Debug, Clone)]
pub struct ConsistencyProduct {
    pub params: ParameterList,
    pub m: usize,
    /// One component per `(d,k)` key of `I`, in key order.
    pub components: Vec<ConsistencySet>,
}

impl ConsistencyProduct {
    pub fn size(&self) -> u128 {
        let mut acc: u128 = 1;
        for (c, key) in self.components.iter().zip(self.params.keys()) {
            for _ in 0..self.params.get(key.0, key.1) {
                acc = acc.saturating_mul(c.size());
            }
        }
        acc
    }

    fn component_for(&self, key: (u32, u32)) -> &ConsistencySet {
        let pos = self.params.keys().position(|k| k == key).expect("slot key present");
        &self.components[pos]
    }

    /// Membership of a tuple of atoms `(a_1, ..., a_m)`.
    pub fn contains(&self, atoms: &[AtomIndex]) -> Result<bool> {
        if atoms.len() != self.m {
            return shape("wrong number of atoms");
        }
        for (s, key) in self.params.slots().into_iter().enumerate() {
            let tuple: Vec<u64> = atoms.iter().map(|a| a.entries[s]).collect();
            if !self.component_for(key).contains(&tuple) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// All consistent atom tuples.
    pub fn elements(&self, caps: &Caps) -> Result<Vec<Vec<AtomIndex>>> {
        caps.check_elements("consistent tuples", self.size())?;
        let slots = self.params.slots();
        let mut out: Vec<Vec<AtomIndex>> = vec![vec![AtomIndex::new(Vec::new()); self.m]];
        for key in slots {
            let els = self.component_for(key).elements(caps)?;
            let mut next = Vec::with_capacity(out.len() * els.len());
            for base in &out {
                for e in &els {
                    let mut t = base.clone();
                    for (a, &v) in t.iter_mut().zip(e) {
                        a.entries.push(v);
                    }
                    next.push(t);
                }
            }
            out = next;
        }
        Ok(out)
    }
}

pub fn consistency_set_product(
    params: &ParameterList,
    system: &LinearSystem,
    n_cap: usize,
    mode: WitnessMode,
    caps: &Caps,
) -> Result<ConsistencyProduct> {
    system.validate_p(params.p())?;
    let components = params
        .keys()
        .map(|(d, k)| consistency_set(d, k, system, n_cap, mode, caps))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConsistencyProduct { params: params.clone(), m: system.m(), components })
}

/// Result of comparing `|Φ_{d,k}(L)|` with `|Φ_{d,k}(L^l)|`.
#[derive(Debug, Clone, Serialize)]
pub struct FullDimReport {
    pub full_dimensional: bool,
    pub per_pair: Vec<(u32, u32, u128, u128)>,
}

pub fn is_full_dimensional(system: &LinearSystem, pairs: &[(u32, u32)], mode: WitnessMode, caps: &Caps) -> Result<FullDimReport> {
    let full = LinearSystem::canonical(system.p, system.l, Canonical::Full, caps)?;
    let mut per_pair = Vec::new();
    let mut ok = true;
    for &(d, k) in pairs {
        let a = consistency_set(d, k, system, system.l.max(1), mode, caps)?.size();
        let b = consistency_set(d, k, &full, system.l.max(1), mode, caps)?.size();
        ok &= a == b;
        per_pair.push((d, k, a, b));
    }
    Ok(FullDimReport { full_dimensional: ok, per_pair })
}

/// Empirical distribution of `(B(L_1(x)), ..., B(L_m(x)))` against the
/// uniform distribution on `Φ_I(L)`.
#[derive(Debug, Clone, Serialize)]
pub struct EquidistributionReport {
    /// Largest `|P(a) - 1/|Φ_I(L)||` over consistent tuples `a`.
    pub deviation: f64,
    pub consistent_size: u128,
    pub observed_consistent: usize,
    /// Observed tuples outside `Φ_I(L)`; always 0 for a genuine factor.
    pub violations: usize,
    pub total: u128,
    pub stabilized: bool,
}

pub fn equidistribution_report(
    factor: &PolynomialFactor,
    system: &LinearSystem,
    mode: WitnessMode,
    caps: &Caps,
) -> Result<EquidistributionReport> {
    let params = factor.params();
    let phi = consistency_set_product(params, system, system.l.max(1) + 1, mode, caps)?;
    let joint = joint_distribution(system, factor.codes(), &factor.space(), caps)?;
    let total: u64 = joint.values().sum();
    let size = phi.size();
    let uniform = 1.0 / size as f64;
    let mut deviation: f64 = 0.0;
    let mut observed = 0usize;
    let mut violations = 0usize;
    for (codes, &count) in &joint {
        let atoms: Vec<AtomIndex> = codes.iter().map(|&c| params.atom_decode(c)).collect();
        if phi.contains(&atoms)? {
            observed += 1;
            deviation = deviation.max((count as f64 / total as f64 - uniform).abs());
        } else {
            violations += 1;
        }
    }
    if (observed as u128) < size {
        deviation = deviation.max(uniform);
    }
    let stabilized = phi.components.iter().all(|c| c.stabilized());
    Ok(EquidistributionReport {
        deviation,
        consistent_size: size,
        observed_consistent: observed,
        violations,
        total: total as u128,
        stabilized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::closure_brute;
    use proptest::prelude::*;

    fn sys(p: u32, l: usize, rows: &[&[u32]]) -> LinearSystem {
        LinearSystem::new(p, l, rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    /// Tuples from every homogeneous polynomial on `F_p^n` given as an
    /// element of the witness module, evaluated at every `x`, then closed.
    fn brute_phi(d: u32, k: u32, system: &LinearSystem, n: usize) -> HashSet<Vec<u64>> {
        let caps = Caps::default();
        let p = system.p;
        let gens = witness_generators(p, d, k, n, WitnessMode::Homogeneous, &caps).unwrap();
        let space = Space::new(p, n).unwrap();
        let modulus = (p as u64).pow(k + 1);
        let tables: Vec<Vec<u64>> = gens.iter().map(|g| g.values.clone()).collect();
        let module = closure_brute(&tables, modulus, space.size());
        let mut raw = Vec::new();
        for poly in &module {
            let total = space.size().pow(system.l as u32);
            for t in 0..total {
                let mut r = t;
                let x: Vec<usize> = (0..system.l).map(|_| { let v = r % space.size(); r /= space.size(); v }).collect();
                let pts = system.evaluate(&space, &x).unwrap();
                raw.push(pts.iter().map(|&q| poly[q]).collect::<Vec<u64>>());
            }
        }
        closure_brute(&raw, modulus, system.m())
    }

    #[test]
    fn linear_triangle() {
        let caps = Caps::default();
        for p in [2u32, 3] {
            let l = sys(p, 2, &[&[1, 0], &[0, 1], &[1, 1]]);
            let phi = consistency_set(1, 0, &l, 3, WitnessMode::Homogeneous, &caps).unwrap();
            assert_eq!(phi.size(), (p * p) as u128);
            assert!(phi.stabilized());
            let ex = consistency_set(1, 0, &l, 3, WitnessMode::Exact, &caps).unwrap();
            assert_eq!(ex.size(), (p * p) as u128);
            assert!(phi.contains(&[1, 1, 2 % p as u64]));
        }
    }

    #[test]
    fn single_form() {
        let caps = Caps::default();
        let l = sys(3, 1, &[&[1]]);
        let phi = consistency_set(2, 0, &l, 2, WitnessMode::Homogeneous, &caps).unwrap();
        assert_eq!(phi.size(), 3);
    }

    #[test]
    fn equidistribution_examples() {
        let caps = Caps::default();
        let x = sys(2, 1, &[&[1]]);
        let lin = PolynomialFactor::linear_forms(2, 4, 2, &caps).unwrap();
        let r = equidistribution_report(&lin, &x, WitnessMode::Homogeneous, &caps).unwrap();
        assert_eq!((r.deviation, r.violations, r.consistent_size), (0.0, 0, 4));
        let tri = sys(2, 2, &[&[1, 0], &[0, 1], &[1, 1]]);
        let r = equidistribution_report(&lin, &tri, WitnessMode::Homogeneous, &caps).unwrap();
        assert!(r.deviation < 1e-12 && r.violations == 0);

        let i = ParameterList::new(2, &[(1, 0, 2), (2, 1, 1)]).unwrap();
        let (b, _) = crate::factors::build_high_rank_factor(&i, 4.0, 0, &caps).unwrap();
        for l in [&x, &tri] {
            let r = equidistribution_report(&b, l, WitnessMode::Homogeneous, &caps).unwrap();
            assert!(r.deviation <= 0.05 && r.violations == 0, "{r:?}");
        }

        let half = crate::ncpoly::HomogeneousPoly::new(MonomialRep::monomial(2, vec![1], 0, 1).unwrap(), &caps).unwrap();
        let quarter = crate::ncpoly::HomogeneousPoly::new(MonomialRep::monomial(2, vec![1], 1, 1).unwrap(), &caps).unwrap();
        let bad = PolynomialFactor::new(2, 1, vec![half.clone(), half, quarter], &caps).unwrap();
        let r = equidistribution_report(&bad, &x, WitnessMode::Homogeneous, &caps).unwrap();
        assert!(r.deviation >= 0.2 && r.violations == 0);
    }

    #[test]
    fn enumeration_matches_direct_and_brute() {
        let caps = Caps::default();
        let cases: Vec<(u32, u32, u32, LinearSystem)> = vec![
            (2, 1, 0, sys(2, 2, &[&[1, 0], &[0, 1], &[1, 1]])),
            (2, 2, 1, sys(2, 2, &[&[1, 0], &[0, 1], &[1, 1]])),
            (2, 2, 0, sys(2, 2, &[&[1, 0], &[0, 1], &[1, 1]])),
            (3, 2, 0, sys(3, 2, &[&[1, 0], &[1, 1], &[1, 2]])),
            (3, 1, 0, sys(3, 2, &[&[1, 0], &[1, 1], &[1, 2]])),
            (2, 3, 1, sys(2, 2, &[&[1, 0], &[0, 1], &[1, 1]])),
        ];
        for (p, d, k, l) in cases {
            let a = consistency_set(d, k, &l, 2, WitnessMode::Homogeneous, &caps).unwrap();
            let b = consistency_set_direct(d, k, &l, WitnessMode::Homogeneous, &caps).unwrap();
            let brute = brute_phi(d, k, &l, 2);
            assert_eq!(a.size(), b.size(), "p={p} ({d},{k})");
            assert_eq!(a.size(), brute.len() as u128, "p={p} ({d},{k})");
            for t in &brute {
                assert!(a.contains(t));
            }
        }
    }

    #[test]
    fn exact_mode_agrees_once_large_enough() {
        let caps = Caps::default();
        let l = sys(2, 1, &[&[1]]);
        let exact = consistency_set(3, 0, &l, 4, WitnessMode::Exact, &caps).unwrap();
        let hom = consistency_set(3, 0, &l, 1, WitnessMode::Homogeneous, &caps).unwrap();
        assert_eq!(exact.size(), hom.size());
    }

    #[test]
    fn cauchy_schwarz_identity() {
        let caps = Caps::default();
        let cases: Vec<(u32, u32, u32, LinearSystem, Vec<u32>, Vec<Vec<u32>>, usize)> = vec![
            (2, 1, 0, sys(2, 1, &[&[1]]), vec![1], vec![vec![1]], 1),
            (2, 2, 1, sys(2, 2, &[&[1, 0], &[1, 1]]), vec![1], vec![vec![1], vec![0]], 1),
            (3, 2, 0, sys(3, 2, &[&[1, 0], &[1, 1]]), vec![2, 1], vec![vec![1], vec![2], vec![0], vec![1]], 1),
            (3, 1, 0, sys(3, 1, &[&[1], &[2]]), vec![1], vec![vec![1, 0], vec![0, 1]], 2),
        ];
        for (p, d, k, l, c, n_mat, l2) in cases {
            let (l1, l3) = l.cs_extensions(&c, &n_mat, l2).unwrap();
            let size = |s: &LinearSystem| consistency_set_direct(d, k, s, WitnessMode::Homogeneous, &caps).unwrap().size();
            assert_eq!(size(&l) * size(&l3), size(&l1).pow(2), "p={p} ({d},{k})");
        }
        let l = sys(2, 1, &[&[1]]);
        let (l1, l3) = l.cs_extensions(&[1], &[vec![1]], 1).unwrap();
        let size = |s: &LinearSystem| consistency_set(1, 0, s, s.l, WitnessMode::Homogeneous, &caps).unwrap().size();
        assert_eq!(size(&l) * size(&l3), size(&l1).pow(2));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn subgroup_and_dilation_closed(
            pdk in prop::sample::select(vec![(2u32, 1u32, 0u32), (2, 2, 1), (3, 1, 0), (3, 2, 0)]),
            rows in proptest::collection::vec(proptest::collection::vec(0u32..3, 2), 1..4),
        ) {
            let caps = Caps::default();
            let (p, d, k) = pdk;
            let l = LinearSystem::new(p, 2, rows).unwrap();
            let phi = consistency_set(d, k, &l, 2, WitnessMode::Homogeneous, &caps).unwrap();
            let els = phi.elements(&caps).unwrap();
            let modulus = (p as u64).pow(k + 1);
            for a in &els {
                for b in &els {
                    let s: Vec<u64> = a.iter().zip(b).map(|(x, y)| (x + y) % modulus).collect();
                    prop_assert!(phi.contains(&s));
                }
                for c in 1..p {
                    let sig = crate::field::sigma_fast(p, c, d, k);
                    let s: Vec<u64> = a.iter().map(|&x| crate::field::mul_mod(x, sig, modulus)).collect();
                    prop_assert!(phi.contains(&s));
                }
            }
        }
    }
}
