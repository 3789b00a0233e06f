//! Polynomial factors, their atoms, rank estimates, the disjoint-block
//! high-rank construction and subatom selection functions.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{analytic_rank, AnalyticRank, Mode};
use crate::caps::Caps;
use crate::consistency::{consistency_set_product, WitnessMode};
use crate::error::{invalid, shape, HofaError, Result};
use crate::field::{check_prime, mul_mod, valuation, AtomIndex, ParameterList, Space};
use crate::forms::LinearSystem;
use crate::linalg::nullspace_mod_p;
use crate::ncpoly::{homogeneous_decomposition, seed_homogeneous, univariate_homogeneous, HomogeneousPoly, MonomialRep, ValueTable};

/// Homogeneous polynomials grouped by `(d,k)`, with the induced map
/// `V -> A_I` cached as one atom code per point.
#[derive(Debug, Clone)]
pub struct PolynomialFactor {
    p: u32,
    n: usize,
    params: ParameterList,
    polys: Vec<HomogeneousPoly>,
    tables: Vec<ValueTable>,
    codes: Vec<u128>,
}

impl PolynomialFactor {
    /// Builds a factor; polynomials are ordered stably by `(d,k)`.
    pub fn new(p: u32, n: usize, polys: Vec<HomogeneousPoly>, caps: &Caps) -> Result<Self> {
        check_prime(p)?;
        let space = Space::new(p, n)?;
        caps.check_table("factor evaluation", space.size() as u128)?;
        let mut polys = polys;
        polys.sort_by_key(|h| (h.d, h.k));
        let mut params = ParameterList::empty(p)?;
        let mut tables = Vec::with_capacity(polys.len());
        for h in &polys {
            if h.rep.p() != p || h.rep.n() != n {
                return shape("factor polynomial lives on a different space");
            }
            if h.d == 0 {
                return invalid("factor polynomials need positive degree");
            }
            let t = h.rep.value_table(caps)?;
            let t = if t.depth == h.k { t } else { t.embed(h.k)? };
            if t.values[0] != 0 {
                return invalid("factor polynomials must vanish at 0");
            }
            params.push(h.d, h.k, 1)?;
            tables.push(t);
        }
        let moduli: Vec<u128> = tables.iter().map(|t| t.modulus() as u128).collect();
        let codes = (0..space.size())
            .map(|x| tables.iter().zip(&moduli).fold(0u128, |acc, (t, &m)| acc * m + t.values[x] as u128))
            .collect();
        Ok(PolynomialFactor { p, n, params, polys, tables, codes })
    }

    pub fn trivial(p: u32, n: usize, caps: &Caps) -> Result<Self> {
        Self::new(p, n, Vec::new(), caps)
    }

    /// The factor defined by the coordinate functions `x_1, ..., x_count`.
    pub fn linear_forms(p: u32, n: usize, count: usize, caps: &Caps) -> Result<Self> {
        if count > n {
            return invalid("more coordinate forms than variables");
        }
        let polys = (0..count)
            .map(|j| {
                let mut e = vec![0; n];
                e[j] = 1;
                HomogeneousPoly::new(MonomialRep::monomial(p, e, 0, 1)?, caps)
            })
            .collect::<Result<_>>()?;
        Self::new(p, n, polys, caps)
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn space(&self) -> Space {
        Space::new(self.p, self.n).expect("validated at construction")
    }

    pub fn params(&self) -> &ParameterList {
        &self.params
    }

    pub fn polys(&self) -> &[HomogeneousPoly] {
        &self.polys
    }

    pub fn tables(&self) -> &[ValueTable] {
        &self.tables
    }

    pub fn degree(&self) -> u32 {
        self.params.degree()
    }

    pub fn norm(&self) -> u128 {
        self.params.norm()
    }

    /// Atom code of every point.
    pub fn codes(&self) -> &[u128] {
        &self.codes
    }

    pub fn evaluate(&self, x: usize) -> AtomIndex {
        AtomIndex::new(self.tables.iter().map(|t| t.values[x]).collect())
    }

    /// Point counts of the nonempty atoms, keyed by atom code.
    pub fn atom_partition(&self) -> BTreeMap<u128, u64> {
        let mut out = BTreeMap::new();
        for &c in &self.codes {
            *out.entry(c).or_insert(0) += 1;
        }
        out
    }

    /// Point counts of every atom of `A_I`, empty ones included.
    pub fn atom_partition_dense(&self, caps: &Caps) -> Result<Vec<(AtomIndex, u64)>> {
        let sparse = self.atom_partition();
        let atoms = self.params.atoms(caps)?;
        Ok(atoms
            .into_iter()
            .enumerate()
            .map(|(c, a)| {
                let count = sparse.get(&(c as u128)).copied().unwrap_or(0);
                (a, count)
            })
            .collect())
    }

    /// Appends the homogeneous parts of each new polynomial. Constant and
    /// zero parts are dropped, so refining by 0 changes nothing.
    pub fn refine(&self, new_polys: &[MonomialRep], caps: &Caps) -> Result<Self> {
        let mut polys = self.polys.clone();
        for rep in new_polys {
            if rep.p() != self.p || rep.n() != self.n {
                return shape("refining polynomial lives on a different space");
            }
            for part in homogeneous_decomposition(rep, caps)? {
                if part.d > 0 && !part.rep.is_zero() {
                    polys.push(part);
                }
            }
        }
        Self::new(self.p, self.n, polys, caps)
    }

    /// `π(B'(x)) = B(x)` for every `x`.
    pub fn is_refined_by(&self, finer: &Self) -> Result<bool> {
        if !self.params.le(&finer.params) || self.n != finer.n {
            return Ok(false);
        }
        for x in 0..self.space().size() {
            let a = finer.evaluate(x);
            if self.params.project(&finer.params, &a)? != self.evaluate(x) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// `B(cx) = c · B(x)` for all `c` and `x`.
    pub fn is_equivariant(&self) -> Result<bool> {
        let s = self.space();
        for c in 1..self.p {
            for x in 0..s.size() {
                if self.evaluate(s.scale(c, x)) != self.params.act(c, &self.evaluate(x))? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// `E[f | B]`: the average of `f` over the atom of each point.
    pub fn conditional_expectation(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.codes.len() {
            return shape("function length does not match the factor domain");
        }
        let mut sums: BTreeMap<u128, (f64, u64)> = BTreeMap::new();
        for (&c, &v) in self.codes.iter().zip(f) {
            let e = sums.entry(c).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
        Ok(self.codes.iter().map(|c| { let (s, k) = sums[c]; s / k as f64 }).collect())
    }

    /// `‖E[f | B]‖_2^2`.
    pub fn energy(&self, f: &[f64]) -> Result<f64> {
        let g = self.conditional_expectation(f)?;
        Ok(g.iter().map(|v| v * v).sum::<f64>() / g.len() as f64)
    }

    /// Value tables of the polynomials restricted to the hyperplane
    /// `{x : Σ normal_j x_j = 0}`, in coordinates on `F_p^{n-1}`.
    pub fn restrict_to_hyperplane(&self, normal: &[u32]) -> Result<Vec<ValueTable>> {
        if normal.len() != self.n || normal.iter().all(|&c| c % self.p == 0) {
            return invalid("hyperplane needs a nonzero normal of length n");
        }
        let s = self.space();
        let basis: Vec<usize> = nullspace_mod_p(&[normal.to_vec()], self.n, self.p).iter().map(|v| s.index(v)).collect();
        self.tables.iter().map(|t| t.restrict(&basis, 0)).collect()
    }
}

/// Analytic rank of the factor polynomials and of their combinations.
#[derive(Debug, Clone, Serialize)]
pub struct RankEstimate {
    /// Minimum analytic rank of a single polynomial at its own degree.
    pub analytic_rank: AnalyticRank,
    /// Minimum over the tested nonzero combinations `Σ λ_i P_i`, each at
    /// the degree `max_i deg(λ_i P_i)`.
    pub combination_min: AnalyticRank,
    pub combinations_tested: u64,
    pub combinations_total: u128,
    pub exhaustive: bool,
}

/// Combinations are enumerated exhaustively up to this count and sampled
/// beyond it.
pub const COMBINATION_LIMIT: u64 = 10_000;

pub fn factor_rank(b: &PolynomialFactor, mode: Mode, seed: u64, caps: &Caps) -> Result<RankEstimate> {
    let p = b.p;
    let mut single = AnalyticRank::Infinite;
    for (h, t) in b.polys.iter().zip(&b.tables) {
        single = single.min(analytic_rank(t, h.d, mode, caps)?);
    }
    let moduli: Vec<u64> = b.tables.iter().map(|t| t.modulus()).collect();
    let total: u128 = moduli.iter().fold(1u128, |a, &m| a.saturating_mul(m as u128)) - 1;
    let kk = b.tables.iter().map(|t| t.depth).max().unwrap_or(0);
    let lifted: Vec<ValueTable> = b.tables.iter().map(|t| t.embed(kk)).collect::<Result<_>>()?;
    let eval = |lambda: &[u64]| -> Result<AnalyticRank> {
        let mut acc = ValueTable::new(p, b.n, kk, vec![0; b.codes.len()])?;
        let mut d_top = 0;
        for ((l, t), h) in lambda.iter().zip(&lifted).zip(&b.polys) {
            if *l == 0 {
                continue;
            }
            let v = valuation(*l, p, h.k + 1);
            d_top = d_top.max(h.d - v * (p - 1));
            acc = acc.add(&t.zmul(*l as i64))?;
        }
        analytic_rank(&acc, d_top, mode, caps)
    };
    let mut combo = AnalyticRank::Infinite;
    let exhaustive = total <= COMBINATION_LIMIT as u128;
    let mut tested = 0u64;
    if exhaustive {
        for code in 1..=total {
            let mut r = code;
            let mut lambda = vec![0u64; moduli.len()];
            for i in (0..moduli.len()).rev() {
                lambda[i] = (r % moduli[i] as u128) as u64;
                r /= moduli[i] as u128;
            }
            combo = combo.min(eval(&lambda)?);
            tested += 1;
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        while tested < COMBINATION_LIMIT {
            let lambda: Vec<u64> = moduli.iter().map(|&m| rng.gen_range(0..m)).collect();
            if lambda.iter().all(|&l| l == 0) {
                continue;
            }
            combo = combo.min(eval(&lambda)?);
            tested += 1;
        }
    }
    Ok(RankEstimate { analytic_rank: single, combination_min: combo, combinations_tested: tested, combinations_total: total, exhaustive })
}

/// One slot of a built high-rank factor.
#[derive(Debug, Clone, Serialize)]
pub struct BlockReport {
    pub d: u32,
    pub k: u32,
    /// Variables of one copy of the seed.
    pub seed_vars: usize,
    pub seed_rank: AnalyticRank,
    pub copies: u32,
    /// `copies · seed_rank`, the analytic rank of the block sum.
    pub block_rank: AnalyticRank,
}

/// Builds a factor with parameters `I` whose polynomials have analytic
/// rank at least `r`, each a sum of disjoint copies of a seed polynomial
/// on its own block of variables. `pad` extra unused variables are added.
pub fn build_high_rank_factor(
    params: &ParameterList,
    r: f64,
    pad: usize,
    caps: &Caps,
) -> Result<(PolynomialFactor, Vec<BlockReport>)> {
    let p = params.p();
    let mut blocks: Vec<(HomogeneousPoly, u32, BlockReport)> = Vec::new();
    let mut n = 0usize;
    for (d, k) in params.slots() {
        let seed = seed_homogeneous(p, d, k, caps)?;
        let t = seed.rep.value_table(caps)?;
        let rank = analytic_rank(&t, d, Mode::Exact, caps)?;
        let copies = match rank {
            AnalyticRank::Infinite => 1,
            AnalyticRank::Finite(v) if v <= 1e-12 => {
                return Err(HofaError::Internal(format!("seed for ({d},{k}) has analytic rank 0")));
            }
            AnalyticRank::Finite(v) => ((r / v) - 1e-9).ceil().max(1.0) as u32,
        };
        let block_rank = match rank {
            AnalyticRank::Infinite => AnalyticRank::Infinite,
            AnalyticRank::Finite(v) => AnalyticRank::Finite(v * copies as f64),
        };
        let vars = seed.rep.n();
        n += vars * copies as usize;
        blocks.push((seed, copies, BlockReport { d, k, seed_vars: vars, seed_rank: rank, copies, block_rank }));
    }
    n += pad;
    let size = crate::caps::pow_sat(p as u64, n as u64);
    if size > caps.table as u128 {
        let achieved = blocks.iter().map(|b| b.2.block_rank).fold(AnalyticRank::Infinite, AnalyticRank::min);
        return Err(HofaError::CapExceeded {
            what: format!("high-rank factor on {n} variables (block rank {:?})", achieved),
            needed: size,
            cap: caps.table as u128,
        });
    }
    let mut polys = Vec::new();
    let mut offset = 0usize;
    let mut reports = Vec::new();
    for (seed, copies, report) in blocks {
        let vars = seed.rep.n();
        let mut acc = ValueTable::new(p, n, seed.k, vec![0; size as usize])?;
        for c in 0..copies as usize {
            let part = seed.rep.shift(offset + c * vars, n).value_table(caps)?;
            acc = acc.add(&part)?;
        }
        offset += vars * copies as usize;
        let rep = acc.interpolate()?;
        polys.push(HomogeneousPoly::new(rep, caps)?);
        reports.push(report);
    }
    Ok((PolynomialFactor::new(p, n, polys, caps)?, reports))
}

/// A map `s: A_I -> A_{I'}` keeping the slots of `I` and filling each new
/// slot of group `(d,k)` with `Σ_j c_j P_{d,k}(|a^j_{1,0}|)`.
#[derive(Debug, Clone, Serialize)]
pub struct SubatomSelector {
    pub p: u32,
    #[serde(skip)]
    pub source: ParameterList,
    #[serde(skip)]
    pub target: ParameterList,
    /// For every key of `I'` with new slots: one row per new slot, each of
    /// length `I_{1,0}`, entries modulo `p^{k+1}`.
    pub coeffs: BTreeMap<(u32, u32), Vec<Vec<u64>>>,
    /// `P_{d,k}(x)` for `x` in `F_p`, as residues modulo `p^{k+1}`.
    pub univariate: BTreeMap<(u32, u32), Vec<u64>>,
}

impl SubatomSelector {
    pub fn new(
        source: &ParameterList,
        target: &ParameterList,
        coeffs: BTreeMap<(u32, u32), Vec<Vec<u64>>>,
        caps: &Caps,
    ) -> Result<Self> {
        if !source.le(target) {
            return invalid("selector needs I ≤ I'");
        }
        let p = source.p();
        let i10 = source.get(1, 0) as usize;
        let mut univariate = BTreeMap::new();
        for (d, k) in target.keys() {
            let extra = (target.get(d, k) - source.get(d, k)) as usize;
            if extra == 0 {
                continue;
            }
            let rows = coeffs.get(&(d, k)).map_or(0, |r| r.len());
            let m = (p as u64).pow(k + 1);
            if rows != extra || coeffs[&(d, k)].iter().any(|r| r.len() != i10 || r.iter().any(|&c| c >= m)) {
                return shape(format!("coefficients for ({d},{k}) must be {extra} x {i10} residues mod {m}"));
            }
            let h = univariate_homogeneous(p, d, k, caps)?;
            let t = h.rep.value_table(caps)?;
            let t = if t.depth == k { t } else { t.embed(k)? };
            univariate.insert((d, k), t.values);
        }
        if coeffs.keys().any(|key| !univariate.contains_key(key)) {
            return shape("coefficients given for a group without new slots");
        }
        Ok(SubatomSelector { p, source: source.clone(), target: target.clone(), coeffs, univariate })
    }

    fn zero_coeffs(source: &ParameterList, target: &ParameterList) -> BTreeMap<(u32, u32), Vec<Vec<u64>>> {
        let i10 = source.get(1, 0) as usize;
        target
            .keys()
            .filter_map(|(d, k)| {
                let extra = (target.get(d, k) - source.get(d, k)) as usize;
                (extra > 0).then(|| ((d, k), vec![vec![0; i10]; extra]))
            })
            .collect()
    }

    pub fn zero(source: &ParameterList, target: &ParameterList, caps: &Caps) -> Result<Self> {
        if !source.le(target) {
            return invalid("selector needs I ≤ I'");
        }
        Self::new(source, target, Self::zero_coeffs(source, target), caps)
    }

    /// Coefficients drawn uniformly at random.
    pub fn random<R: Rng>(source: &ParameterList, target: &ParameterList, rng: &mut R, caps: &Caps) -> Result<Self> {
        if !source.le(target) {
            return invalid("selector needs I ≤ I'");
        }
        let p = source.p() as u64;
        let mut coeffs = Self::zero_coeffs(source, target);
        for (&(_, k), rows) in coeffs.iter_mut() {
            for row in rows.iter_mut() {
                for c in row.iter_mut() {
                    *c = rng.gen_range(0..p.pow(k + 1));
                }
            }
        }
        Self::new(source, target, coeffs, caps)
    }

    pub fn apply(&self, a: &AtomIndex) -> Result<AtomIndex> {
        self.source.check_atom(a)?;
        let p = self.p as u64;
        let src_slots = self.source.slots();
        let lin: Vec<u64> = src_slots.iter().zip(&a.entries).filter(|(s, _)| **s == (1, 0)).map(|(_, &v)| v).collect();
        let mut src_offset: BTreeMap<(u32, u32), usize> = BTreeMap::new();
        let mut off = 0;
        for key in self.source.keys() {
            src_offset.insert(key, off);
            off += self.source.get(key.0, key.1) as usize;
        }
        let mut out = Vec::with_capacity(self.target.num_slots());
        for (d, k) in self.target.keys() {
            let have = self.source.get(d, k) as usize;
            let start = src_offset.get(&(d, k)).copied().unwrap_or(0);
            out.extend_from_slice(&a.entries[start..start + have]);
            if let Some(rows) = self.coeffs.get(&(d, k)) {
                let m = p.pow(k + 1);
                let uni = &self.univariate[&(d, k)];
                for row in rows {
                    let v = row.iter().zip(&lin).fold(0u64, |acc, (&c, &x)| (acc + mul_mod(c, uni[x as usize], m)) % m);
                    out.push(v);
                }
            }
        }
        Ok(AtomIndex::new(out))
    }
}

/// Outcome of checking the three selector properties.
#[derive(Debug, Clone, Serialize)]
pub struct SelectorReport {
    pub projection_identity: bool,
    pub equivariant: bool,
    /// Per system: every consistent tuple maps to a consistent tuple.
    pub consistency: Vec<bool>,
    pub atoms_checked: u64,
    pub tuples_checked: u64,
}

impl SelectorReport {
    pub fn all_hold(&self) -> bool {
        self.projection_identity && self.equivariant && self.consistency.iter().all(|&b| b)
    }
}

/// Exhaustive check of `π ∘ s = Id`, `b · s(a) = s(b · a)`, and
/// `s(Φ_I(L)) ⊆ Φ_{I'}(L)` for each supplied system.
pub fn verify_selector(s: &SubatomSelector, systems: &[LinearSystem], mode: WitnessMode, caps: &Caps) -> Result<SelectorReport> {
    let atoms = s.source.atoms(caps)?;
    let mut proj = true;
    let mut equi = true;
    for a in &atoms {
        let sa = s.apply(a)?;
        proj &= s.source.project(&s.target, &sa)? == *a;
        for b in 1..s.p {
            equi &= s.target.act(b, &sa)? == s.apply(&s.source.act(b, a)?)?;
        }
    }
    let mut consistency = Vec::new();
    let mut tuples = 0u64;
    for sys in systems {
        let n_cap = sys.l.max(1) + 1;
        let phi = consistency_set_product(&s.source, sys, n_cap, mode, caps)?;
        let phi2 = consistency_set_product(&s.target, sys, n_cap, mode, caps)?;
        let mut ok = true;
        for tuple in phi.elements(caps)? {
            let image: Vec<AtomIndex> = tuple.iter().map(|a| s.apply(a)).collect::<Result<_>>()?;
            ok &= phi2.contains(&image)?;
            tuples += 1;
        }
        consistency.push(ok);
    }
    Ok(SelectorReport { projection_identity: proj, equivariant: equi, consistency, atoms_checked: atoms.len() as u64, tuples_checked: tuples })
}
