//! Colored and labeled patterns, canonical colorings, projectivization and
//! the removal-style recoloring.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{lambda_count, Mode};
use crate::caps::{pow_sat, Caps};
use crate::error::{invalid, shape, HofaError, Result};
use crate::factors::{PolynomialFactor, SubatomSelector};
use crate::field::{check_prime, inv_mod, AtomIndex, ParameterList, Space};
use crate::forms::LinearSystem;
use crate::linalg::{nullspace_mod_p, rank_mod_p};
use crate::ncpoly::{HomogeneousPoly, MonomialRep};
use crate::par;
use crate::regularity::{strong_regularity, GrowthConfig};

/// An exact ratio of counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub num: u128,
    pub den: u128,
}

impl Fraction {
    pub fn value(&self) -> f64 {
        if self.den == 0 {
            f64::NAN
        } else {
            self.num as f64 / self.den as f64
        }
    }

    /// Lowest terms.
    pub fn reduced(&self) -> Self {
        let (mut a, mut b) = (self.num, self.den);
        while b != 0 {
            (a, b) = (b, a % b);
        }
        if a <= 1 {
            *self
        } else {
            Fraction { num: self.num / a, den: self.den / a }
        }
    }
}

/// A finite color set `S`, optionally with an action of `F_p^×`.
///
/// `action[b-1][s]` is `b · s`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorSet {
    #[serde(rename = "colors")]
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<Vec<Vec<usize>>>,
}

impl ColorSet {
    /// Colors `"0", ..., "R-1"` with the trivial action.
    pub fn plain(r: usize) -> Self {
        ColorSet { labels: (0..r).map(|i| i.to_string()).collect(), action: None }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Checks that the table is a group action of `F_p^×`.
    pub fn validate(&self, p: u32) -> Result<()> {
        let r = self.len();
        if r == 0 {
            return invalid("color set is empty");
        }
        let Some(act) = &self.action else { return Ok(()) };
        if act.len() != p as usize - 1 || act.iter().any(|row| row.len() != r || row.iter().any(|&s| s >= r)) {
            return shape(format!("action table must be {} x {r} with entries below {r}", p - 1));
        }
        if act[0].iter().enumerate().any(|(s, &t)| s != t) {
            return invalid("1 must act as the identity");
        }
        for a in 1..p {
            for b in 1..p {
                let ab = (a * b) % p;
                for s in 0..r {
                    if act[ab as usize - 1][s] != act[a as usize - 1][act[b as usize - 1][s]] {
                        return invalid(format!("action table is not an action at ({a},{b}) on color {s}"));
                    }
                }
            }
        }
        Ok(())
    }

    /// `b · s`; identity without an action table.
    pub fn act(&self, b: u32, s: usize) -> usize {
        match &self.action {
            Some(act) => act[b as usize - 1][s],
            None => s,
        }
    }
}

/// Outcome of the exhaustive projectivity check `f(cx) = c · f(x)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProjectivityCertificate {
    pub projective: bool,
    pub checked: u64,
    /// First failing `(c, x)`.
    pub counterexample: Option<(u32, usize)>,
}

/// A function `f: F_p^n -> S` stored as a table of color indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coloring {
    pub p: u32,
    pub n: usize,
    #[serde(flatten)]
    pub colors: ColorSet,
    pub values: Vec<usize>,
}

impl Coloring {
    pub fn new(p: u32, n: usize, colors: ColorSet, values: Vec<usize>) -> Result<Self> {
        let c = Coloring { p, n, colors, values };
        c.validate()?;
        Ok(c)
    }

    /// Checks sizes, color indices and the action table.
    pub fn validate(&self) -> Result<()> {
        check_prime(self.p)?;
        let space = Space::new(self.p, self.n)?;
        self.colors.validate(self.p)?;
        if self.values.len() != space.size() {
            return shape(format!("coloring needs {} values, got {}", space.size(), self.values.len()));
        }
        if let Some(&bad) = self.values.iter().find(|&&v| v >= self.colors.len()) {
            return shape(format!("color index {bad} out of range"));
        }
        Ok(())
    }

    pub fn space(&self) -> Space {
        Space::new(self.p, self.n).expect("validated at construction")
    }

    pub fn constant(p: u32, n: usize, colors: ColorSet, c: usize) -> Result<Self> {
        let size = Space::new(p, n)?.size();
        Self::new(p, n, colors, vec![c; size])
    }

    pub fn certify_projective(&self) -> ProjectivityCertificate {
        let space = self.space();
        let mut checked = 0;
        for c in 2..self.p {
            for x in 0..space.size() {
                checked += 1;
                if self.values[space.scale(c, x)] != self.colors.act(c, self.values[x]) {
                    return ProjectivityCertificate { projective: false, checked, counterexample: Some((c, x)) };
                }
            }
        }
        ProjectivityCertificate { projective: true, checked, counterexample: None }
    }

    pub fn is_projective(&self) -> bool {
        self.certify_projective().projective
    }

    /// Indicator of `f^{-1}(c)`.
    pub fn indicator(&self, c: usize) -> Vec<bool> {
        self.values.iter().map(|&v| v == c).collect()
    }
}

/// `H = (L, ψ)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColoredPattern {
    pub system: LinearSystem,
    pub psi: Vec<usize>,
}

impl ColoredPattern {
    pub fn new(system: LinearSystem, psi: Vec<usize>) -> Result<Self> {
        if psi.len() != system.m() {
            return shape(format!("ψ needs {} colors, got {}", system.m(), psi.len()));
        }
        Ok(ColoredPattern { system, psi })
    }

    fn check_colors(&self, f: &Coloring) -> Result<()> {
        if self.system.p != f.p {
            return shape("pattern and coloring use different primes");
        }
        if self.psi.iter().any(|&c| c >= f.colors.len()) {
            return shape("pattern uses a color outside the color set");
        }
        Ok(())
    }
}

/// `H = (L, ψ, φ)` with atom labels over a common parameter list.
#[derive(Debug, Clone)]
pub struct LabeledPattern {
    pub pattern: ColoredPattern,
    pub params: ParameterList,
    pub phi: Vec<AtomIndex>,
}

impl LabeledPattern {
    pub fn new(pattern: ColoredPattern, params: ParameterList, phi: Vec<AtomIndex>) -> Result<Self> {
        if phi.len() != pattern.system.m() {
            return shape(format!("φ needs {} atoms, got {}", pattern.system.m(), phi.len()));
        }
        for a in &phi {
            params.check_atom(a)?;
        }
        if params.p() != pattern.system.p {
            return shape("labels and system use different primes");
        }
        Ok(LabeledPattern { pattern, params, phi })
    }

    /// Every form labeled by the unique atom of the empty parameter list.
    pub fn unlabeled(pattern: ColoredPattern) -> Result<Self> {
        let params = ParameterList::empty(pattern.system.p)?;
        let phi = vec![AtomIndex::new(Vec::new()); pattern.system.m()];
        Self::new(pattern, params, phi)
    }
}

/// True when the points are linearly independent.
pub fn is_generic(space: &Space, xs: &[usize]) -> bool {
    if xs.len() > space.n() {
        return false;
    }
    if xs.len() == 1 {
        return xs[0] != 0;
    }
    let rows: Vec<Vec<u32>> = xs.iter().map(|&x| space.digits(x)).collect();
    rank_mod_p(&rows, space.p()) == xs.len()
}

/// Decodes tuple number `t` of `V^l`, first coordinate least significant.
fn decode_tuple(space: &Space, mut t: u128, x: &mut [usize]) {
    for xi in x.iter_mut() {
        *xi = (t % space.size() as u128) as usize;
        t /= space.size() as u128;
    }
}

/// Counts tuples `x` in `V^l` accepted by `accept(x, L(x))`, keeping the
/// first `keep` accepted tuples in enumeration order.
fn scan_tuples<F>(space: &Space, system: &LinearSystem, keep: usize, caps: &Caps, accept: F) -> Result<(u128, Vec<Vec<usize>>)>
where
    F: Fn(&[usize], &[usize]) -> bool + Sync,
{
    if system.p != space.p() {
        return shape("system and space use different primes");
    }
    let l = system.l;
    let total = pow_sat(space.size() as u64, l as u64);
    caps.check_enum("pattern enumeration", total)?;
    let chunks = if l == 0 { 1 } else { space.size() };
    let per_chunk = if l == 0 { 1 } else { total / space.size() as u128 };
    let parts = par::map_range(chunks, |c| {
        let mut count = 0u128;
        let mut found = Vec::new();
        let mut x = vec![0usize; l];
        let mut pts = vec![0usize; system.m()];
        for i in 0..per_chunk {
            decode_tuple(space, c as u128 + i * space.size() as u128, &mut x);
            for (pt, row) in pts.iter_mut().zip(&system.rows) {
                *pt = space.combine(row, &x);
            }
            if accept(&x, &pts) {
                count += 1;
                if found.len() < keep {
                    found.push(x.clone());
                }
            }
        }
        (count, found)
    });
    let mut count = 0;
    let mut found: Vec<(u128, Vec<usize>)> = Vec::new();
    for part in parts {
        count += part.0;
        for x in part.1 {
            let idx = x.iter().rev().fold(0u128, |acc, &xi| acc * space.size() as u128 + xi as u128);
            found.push((idx, x));
        }
    }
    found.sort();
    found.truncate(keep);
    Ok((count, found.into_iter().map(|(_, x)| x).collect()))
}

/// Density of a colored pattern, with the first few instances found.
#[derive(Debug, Clone, Serialize)]
pub struct PatternDensity {
    /// Instances over `|V|^l` (exact) or hits over samples (sampled).
    pub density: Fraction,
    pub exact: bool,
    pub witnesses: Vec<Vec<usize>>,
}

impl PatternDensity {
    pub fn value(&self) -> f64 {
        self.density.value()
    }
}

/// `(L,ψ)`-density in `f`. With `generic_only`, only tuples of linearly
/// independent points are counted (the denominator stays `|V|^l`).
pub fn pattern_density(
    f: &Coloring,
    h: &ColoredPattern,
    generic_only: bool,
    mode: Mode,
    witness_limit: usize,
    caps: &Caps,
) -> Result<PatternDensity> {
    h.check_colors(f)?;
    let space = f.space();
    let accept = |x: &[usize], pts: &[usize]| {
        pts.iter().zip(&h.psi).all(|(&pt, &c)| f.values[pt] == c) && (!generic_only || is_generic(&space, x))
    };
    match mode {
        Mode::Exact => {
            let (count, witnesses) = scan_tuples(&space, &h.system, witness_limit, caps, accept)?;
            let den = pow_sat(space.size() as u64, h.system.l as u64);
            Ok(PatternDensity { density: Fraction { num: count, den }, exact: true, witnesses })
        }
        Mode::Sampled { samples, seed } => {
            if samples == 0 {
                return invalid("sampled mode needs at least one sample");
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut x = vec![0usize; h.system.l];
            let mut hits = 0u128;
            let mut witnesses = Vec::new();
            for _ in 0..samples {
                for xi in x.iter_mut() {
                    *xi = rng.gen_range(0..space.size());
                }
                let pts = h.system.evaluate(&space, &x)?;
                if accept(&x, &pts) {
                    hits += 1;
                    if witnesses.len() < witness_limit {
                        witnesses.push(x.clone());
                    }
                }
            }
            Ok(PatternDensity { density: Fraction { num: hits, den: samples as u128 }, exact: false, witnesses })
        }
    }
}

/// Number of generic instances of `h` in `f`.
pub fn generic_instances(f: &Coloring, h: &ColoredPattern, caps: &Caps) -> Result<u128> {
    Ok(pattern_density(f, h, true, Mode::Exact, 0, caps)?.density.num)
}

/// Relative density of a labeled pattern inside a set `X`.
#[derive(Debug, Clone, Serialize)]
pub struct RelativeDensity {
    /// `|V|^l Λ(1_{X ∩ f^{-1}(ψ_i) ∩ B^{-1}(φ_i)})`.
    pub numerator: u128,
    /// `|V|^l Λ(1_X, ..., 1_X)`.
    pub denominator: u128,
    /// `None` when the denominator vanishes.
    pub value: Option<f64>,
}

/// Indicator of a union of atoms of `B`.
pub fn atom_union(b: &PolynomialFactor, atoms: &[AtomIndex]) -> Result<Vec<bool>> {
    let mut codes = BTreeSet::new();
    for a in atoms {
        b.params().check_atom(a)?;
        codes.insert(b.params().atom_code(a));
    }
    Ok(b.codes().iter().map(|c| codes.contains(c)).collect())
}

pub fn labeled_relative_density(
    f: &Coloring,
    b: &PolynomialFactor,
    h: &LabeledPattern,
    x_set: &[bool],
    caps: &Caps,
) -> Result<RelativeDensity> {
    h.pattern.check_colors(f)?;
    if b.p() != f.p || b.n() != f.n || x_set.len() != f.values.len() {
        return shape("coloring, factor and set must live on the same space");
    }
    if b.params() != &h.params {
        return shape("pattern labels use different parameters than the factor");
    }
    let space = f.space();
    let sets: Vec<Vec<bool>> = h
        .pattern
        .psi
        .iter()
        .zip(&h.phi)
        .map(|(&c, a)| {
            let code = b.params().atom_code(a);
            (0..space.size()).map(|x| x_set[x] && f.values[x] == c && b.codes()[x] == code).collect()
        })
        .collect();
    let (numerator, _) = lambda_count(&h.pattern.system, &sets, &space, caps)?;
    let all = vec![x_set.to_vec(); h.pattern.system.m()];
    let (denominator, _) = lambda_count(&h.pattern.system, &all, &space, caps)?;
    let value = (denominator > 0).then(|| numerator as f64 / denominator as f64);
    Ok(RelativeDensity { numerator, denominator, value })
}

/// An isomorphism `ι: V -> F_p^n` given by an invertible matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Iota {
    pub p: u32,
    pub rows: Vec<Vec<u32>>,
}

impl Iota {
    pub fn identity(p: u32, n: usize) -> Self {
        let rows = (0..n).map(|i| (0..n).map(|j| u32::from(i == j)).collect()).collect();
        Iota { p, rows }
    }

    pub fn new(p: u32, rows: Vec<Vec<u32>>) -> Result<Self> {
        check_prime(p)?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return shape("ι must be a square matrix");
        }
        let rows: Vec<Vec<u32>> = rows.into_iter().map(|r| r.into_iter().map(|c| c % p).collect()).collect();
        if rank_mod_p(&rows, p) != n {
            return invalid("ι is not invertible");
        }
        Ok(Iota { p, rows })
    }

    /// `fnz(ι(x))`.
    pub fn fnz(&self, space: &Space, x: usize) -> u32 {
        let d = space.digits(x);
        for row in &self.rows {
            let v = row.iter().zip(&d).fold(0u64, |acc, (&a, &b)| (acc + a as u64 * b as u64) % self.p as u64);
            if v != 0 {
                return v as u32;
            }
        }
        0
    }
}

/// `ξ: F_p × A_I -> S`, stored as `table[t * ‖I‖ + code(a)]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalXi {
    pub p: u32,
    pub params: ParameterList,
    pub colors: ColorSet,
    pub table: Vec<usize>,
}

impl CanonicalXi {
    pub fn new(params: ParameterList, colors: ColorSet, table: Vec<usize>, caps: &Caps) -> Result<Self> {
        let p = params.p();
        colors.validate(p)?;
        let size = (p as u128).saturating_mul(params.norm());
        caps.check_elements("ξ table", size)?;
        if table.len() as u128 != size || table.iter().any(|&c| c >= colors.len()) {
            return shape(format!("ξ table needs {size} entries below {}", colors.len()));
        }
        Ok(CanonicalXi { p, params, colors, table })
    }

    pub fn from_fn(params: ParameterList, colors: ColorSet, f: impl Fn(u32, &AtomIndex) -> usize, caps: &Caps) -> Result<Self> {
        let p = params.p();
        caps.check_elements("ξ table", (p as u128).saturating_mul(params.norm()))?;
        let atoms = params.atoms(caps)?;
        let mut table = Vec::with_capacity(p as usize * atoms.len());
        for t in 0..p {
            for a in &atoms {
                table.push(f(t, a));
            }
        }
        Self::new(params, colors, table, caps)
    }

    pub fn get(&self, t: u32, a: &AtomIndex) -> usize {
        self.get_code(t, self.params.atom_code(a))
    }

    fn get_code(&self, t: u32, code: u128) -> usize {
        self.table[(t as u128 * self.params.norm() + code) as usize]
    }

    /// Exhaustive check of `ξ(cx, c·a) = c · ξ(x, a)`.
    pub fn is_projective(&self, caps: &Caps) -> Result<bool> {
        let atoms = self.params.atoms(caps)?;
        for c in 2..self.p {
            for a in &atoms {
                let ca = self.params.act(c, a)?;
                for t in 0..self.p {
                    if self.get((c * t) % self.p, &ca) != self.colors.act(c, self.get(t, a)) {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    /// Colors that `ξ` takes.
    pub fn range(&self) -> BTreeSet<usize> {
        self.table.iter().copied().collect()
    }
}

/// `Ξ_{ξ,ι,B}(x) = ξ(fnz_ι(x), B(x))`.
pub fn canonical_coloring(xi: &CanonicalXi, iota: &Iota, b: &PolynomialFactor) -> Result<Coloring> {
    if b.params() != &xi.params || iota.rows.len() != b.n() || iota.p != b.p() {
        return shape("ξ, ι and the factor do not agree on parameters or dimension");
    }
    let space = b.space();
    let values = (0..space.size()).map(|x| xi.get_code(iota.fnz(&space, x), b.codes()[x])).collect();
    Coloring::new(b.p(), b.n(), xi.colors.clone(), values)
}

/// Factors searched by [`canonically_induces`].
#[derive(Debug, Clone)]
pub struct InduceBudget {
    /// Every factor with the right parameters on `F_p^n`, `n ≤ n_max`, is
    /// tried when the candidate count is within `factor_limit`.
    pub n_max: usize,
    pub factor_limit: u64,
    /// Also try the high-rank factors built at ranks 2 and 4.
    pub high_rank: bool,
    pub extra: Vec<PolynomialFactor>,
}

impl Default for InduceBudget {
    fn default() -> Self {
        InduceBudget { n_max: 2, factor_limit: 1 << 12, high_rank: true, extra: Vec::new() }
    }
}

/// A generic instance of a labeled pattern in a canonical coloring.
#[derive(Debug, Clone)]
pub struct InduceWitness {
    pub n: usize,
    pub factor: PolynomialFactor,
    pub x: Vec<usize>,
}

#[derive(Debug, Clone)]
pub enum Induces {
    Found(InduceWitness),
    /// Inconclusive: nothing found among the factors tried.
    NotFound { factors_tried: u64 },
    /// `ψ` needs colors that `ξ` never outputs.
    Never { missing: Vec<usize> },
}

/// Homogeneous polynomials of exact degree `d` and depth `k` on `F_p^n`,
/// distinct as functions, or `None` when there are more than `limit`
/// coefficient vectors to try.
fn homogeneous_polys(p: u32, n: usize, d: u32, k: u32, limit: u64, caps: &Caps) -> Result<Option<Vec<HomogeneousPoly>>> {
    let terms: Vec<(Vec<u32>, u32)> =
        crate::analysis::terms_up_to(p, n, d)?.into_iter().filter(|(_, kk)| *kk <= k).collect();
    let combos = pow_sat(p as u64, terms.len() as u64);
    if combos > limit as u128 {
        return Ok(None);
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut coeffs = vec![0u32; terms.len()];
    for _ in 0..combos {
        let list: Vec<(Vec<u32>, u32, u32)> =
            terms.iter().zip(&coeffs).filter(|(_, &c)| c != 0).map(|((e, kk), &c)| (e.clone(), *kk, c)).collect();
        let rep = MonomialRep::new(p, n, crate::field::TorusValue::zero(p, 0), &list)?;
        if rep.degree() == d && rep.depth() == k {
            if let Ok(h) = HomogeneousPoly::new(rep, caps) {
                let t = h.rep.value_table(caps)?;
                if t.values[0] == 0 && seen.insert(t.values) {
                    out.push(h);
                }
            }
        }
        for c in coeffs.iter_mut() {
            *c += 1;
            if *c < p {
                break;
            }
            *c = 0;
        }
    }
    Ok(Some(out))
}

/// All factors with parameters `I` on `F_p^n`, or `None` past `limit`.
fn all_factors(params: &ParameterList, n: usize, limit: u64, caps: &Caps) -> Result<Option<Vec<PolynomialFactor>>> {
    let p = params.p();
    let slots = params.slots();
    let mut per_key: BTreeMap<(u32, u32), Vec<HomogeneousPoly>> = BTreeMap::new();
    for &(d, k) in &slots {
        if let std::collections::btree_map::Entry::Vacant(e) = per_key.entry((d, k)) {
            match homogeneous_polys(p, n, d, k, limit, caps)? {
                Some(v) => e.insert(v),
                None => return Ok(None),
            };
        }
    }
    let sizes: Vec<usize> = slots.iter().map(|key| per_key[key].len()).collect();
    let total = sizes.iter().fold(1u128, |acc, &s| acc.saturating_mul(s as u128));
    if total > limit as u128 {
        return Ok(None);
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; slots.len()];
    for _ in 0..total {
        let polys = slots.iter().zip(&idx).map(|(key, &i)| per_key[key][i].clone()).collect();
        out.push(PolynomialFactor::new(p, n, polys, caps)?);
        for (i, &s) in idx.iter_mut().zip(&sizes) {
            *i += 1;
            if *i < s {
                break;
            }
            *i = 0;
        }
    }
    Ok(Some(out))
}

/// First generic instance of `h` in `(Ξ_{ξ,Id,B}, B)`, in enumeration order.
fn find_instance(xi: &CanonicalXi, h: &LabeledPattern, b: &PolynomialFactor, caps: &Caps) -> Result<Option<Vec<usize>>> {
    let g = canonical_coloring(xi, &Iota::identity(b.p(), b.n()), b)?;
    let space = b.space();
    let codes: Vec<u128> = h.phi.iter().map(|a| h.params.atom_code(a)).collect();
    let (_, found) = scan_tuples(&space, &h.pattern.system, 1, caps, |x, pts| {
        pts.iter().zip(&h.pattern.psi).zip(&codes).all(|((&pt, &c), &a)| g.values[pt] == c && b.codes()[pt] == a)
            && is_generic(&space, x)
    })?;
    Ok(found.into_iter().next())
}

/// Re-evaluates a witness directly from the factor polynomials.
pub fn verify_induce_witness(xi: &CanonicalXi, h: &LabeledPattern, w: &InduceWitness) -> Result<bool> {
    let space = w.factor.space();
    if !is_generic(&space, &w.x) {
        return Ok(false);
    }
    let iota = Iota::identity(w.factor.p(), w.factor.n());
    let pts = h.pattern.system.evaluate(&space, &w.x)?;
    for ((&pt, &c), a) in pts.iter().zip(&h.pattern.psi).zip(&h.phi) {
        let atom = w.factor.evaluate(pt);
        if &atom != a || xi.get(iota.fnz(&space, pt), &atom) != c {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Searches for `n` and a factor `B` on `F_p^n` with a generic `H`-instance
/// in `(Ξ_{ξ,Id,B}, B)`.
pub fn canonically_induces(xi: &CanonicalXi, h: &LabeledPattern, budget: &InduceBudget, caps: &Caps) -> Result<Induces> {
    if h.params != xi.params {
        return shape("pattern labels and ξ use different parameters");
    }
    let range = xi.range();
    let missing: Vec<usize> = h.pattern.psi.iter().copied().filter(|c| !range.contains(c)).collect::<BTreeSet<_>>().into_iter().collect();
    if !missing.is_empty() {
        return Ok(Induces::Never { missing });
    }
    let l = h.pattern.system.l;
    let mut tried = 0u64;
    let attempt = |b: &PolynomialFactor, tried: &mut u64| -> Result<Option<InduceWitness>> {
        if b.n() < l || pow_sat(b.space().size() as u64, l as u64) > caps.enumeration as u128 {
            return Ok(None);
        }
        *tried += 1;
        Ok(find_instance(xi, h, b, caps)?.map(|x| InduceWitness { n: b.n(), factor: b.clone(), x }))
    };
    for n in l.max(1)..=budget.n_max {
        if pow_sat(xi.p as u64, n as u64) > caps.table as u128 {
            break;
        }
        if let Some(family) = all_factors(&h.params, n, budget.factor_limit, caps)? {
            for b in &family {
                if let Some(w) = attempt(b, &mut tried)? {
                    return Ok(Induces::Found(w));
                }
            }
        }
    }
    if budget.high_rank && !h.params.is_empty() {
        for r in [2.0, 4.0] {
            let built = crate::factors::build_high_rank_factor(&h.params, r, l, caps);
            match built {
                Ok((b, _)) => {
                    if let Some(w) = attempt(&b, &mut tried)? {
                        return Ok(Induces::Found(w));
                    }
                }
                Err(e) if e.is_cap() => {}
                Err(e) => return Err(e),
            }
        }
    }
    for b in &budget.extra {
        if b.params() != &h.params {
            return shape("extra factor has the wrong parameters");
        }
        if let Some(w) = attempt(b, &mut tried)? {
            return Ok(Induces::Found(w));
        }
    }
    Ok(Induces::NotFound { factors_tried: tried })
}

/// `f̄(x) = (f(bx))_{b ∈ F_p^×}` over `S^{p-1}` with the shifted action
/// `b'·(c_b)_b = (c_{b'b})_b`. Tuples are indexed with `b = 1` most
/// significant.
pub fn projectivize(f: &Coloring, caps: &Caps) -> Result<Coloring> {
    let p = f.p;
    let r = f.colors.len();
    let q = p as usize - 1;
    let size = pow_sat(r as u64, q as u64);
    caps.check_elements("projectivized color set", size)?;
    let size = size as usize;
    let decode = |mut i: usize| {
        let mut comps = vec![0usize; q];
        for j in (0..q).rev() {
            comps[j] = i % r;
            i /= r;
        }
        comps
    };
    let encode = |comps: &[usize]| comps.iter().fold(0usize, |acc, &c| acc * r + c);
    let labels = (0..size)
        .map(|i| format!("({})", decode(i).iter().map(|&c| f.colors.labels[c].as_str()).collect::<Vec<_>>().join(",")))
        .collect();
    let action = (1..p)
        .map(|bp| {
            (0..size)
                .map(|i| {
                    let comps = decode(i);
                    let shifted: Vec<usize> = (1..p).map(|b| comps[((bp * b) % p) as usize - 1]).collect();
                    encode(&shifted)
                })
                .collect()
        })
        .collect();
    let space = f.space();
    let values = (0..space.size())
        .map(|x| encode(&(1..p).map(|b| f.values[space.scale(b, x)]).collect::<Vec<_>>()))
        .collect();
    Coloring::new(p, f.n, ColorSet { labels, action: Some(action) }, values)
}

/// Hamming distance as an exact fraction of the domain.
pub fn coloring_distance(f: &Coloring, g: &Coloring) -> Result<Fraction> {
    if f.p != g.p || f.n != g.n || f.values.len() != g.values.len() {
        return shape("colorings live on different domains");
    }
    let num = f.values.iter().zip(&g.values).filter(|(a, b)| a != b).count() as u128;
    Ok(Fraction { num, den: f.values.len() as u128 })
}

/// Where the factors of [`removal_recolor`] come from.
pub enum FactorConfig<'a> {
    /// Strong regularity of the color indicators.
    Regularize(&'a GrowthConfig),
    /// A given pair `B ≤ B'` with a selector `s: A_I -> A_{I'}`.
    Fixed { coarse: PolynomialFactor, fine: PolynomialFactor, selector: SubatomSelector },
}

pub struct RecolorParams<'a> {
    pub epsilon: f64,
    /// High-density threshold, `ε/(4R)` when unset.
    pub threshold: Option<f64>,
    pub factor: FactorConfig<'a>,
    /// Candidate `ξ` maps tried on the irregular subspace.
    pub xi_budget: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecolorReport {
    pub distance: Fraction,
    pub threshold: f64,
    pub cleanup_changed: u64,
    pub patch_changed: u64,
    /// `p^{-I_{1,0}}`.
    pub irregular_fraction: f64,
    pub irregular_dim: usize,
    /// Generic instances of each forbidden pattern in `f` and in `g`.
    pub residual_before: Vec<u128>,
    pub residual: Vec<u128>,
    pub xi_tried: u64,
    pub xi_exhaustive: bool,
    /// Set when the procedure would not have lowered the instance count and
    /// `f` was returned instead.
    pub reverted: bool,
    pub linear_slots: u32,
}

#[derive(Debug, Clone)]
pub struct RecolorOutput {
    pub g: Coloring,
    pub xi: Option<CanonicalXi>,
    pub report: RecolorReport,
}

/// Generic instance counts of each pattern, total and inside `inner`.
fn residuals(values: &[usize], space: &Space, family: &[ColoredPattern], inner: &[bool], caps: &Caps) -> Result<Vec<(u128, u128)>> {
    family
        .iter()
        .map(|h| {
            let (total, _) = scan_tuples(space, &h.system, 0, caps, |x, pts| {
                pts.iter().zip(&h.psi).all(|(&pt, &c)| values[pt] == c) && is_generic(space, x)
            })?;
            let (internal, _) = scan_tuples(space, &h.system, 0, caps, |x, pts| {
                pts.iter().zip(&h.psi).all(|(&pt, &c)| values[pt] == c && inner[pt]) && is_generic(space, x)
            })?;
            Ok((total, internal))
        })
        .collect()
}

/// Orbit of `(t, a)` under `F_p^×`: smallest `(b t, code(b·a))` and the
/// multipliers `b` taking the representative to `(t, a)`.
fn pair_orbit(params: &ParameterList, t: u32, a: &AtomIndex) -> Result<((u32, u128), Vec<u32>)> {
    let p = params.p();
    let mut best: Option<(u32, u128)> = None;
    let mut images = Vec::with_capacity(p as usize - 1);
    for b in 1..p {
        let img = ((b * t) % p, params.atom_code(&params.act(b, a)?));
        images.push(img);
        if best.map_or(true, |bst| img < bst) {
            best = Some(img);
        }
    }
    let rep = best.expect("p ≥ 2");
    // b·rep = (t,a) iff b^{-1}·(t,a) = rep
    let mults = (1..p)
        .filter(|&b| images[inv_mod(b as u64, p as u64).unwrap() as usize - 1] == rep)
        .collect();
    Ok((rep, mults))
}

/// Removal-style recoloring: low-density colors on regular atoms are
/// replaced by an orbit-consistent high-density color, and the irregular
/// subspace `Ṽ` is recolored by a canonical coloring chosen among
/// projective `ξ` to avoid generic instances inside `Ṽ`.
pub fn removal_recolor(f: &Coloring, forbidden: &[ColoredPattern], params: &RecolorParams, caps: &Caps) -> Result<RecolorOutput> {
    f.validate()?;
    for h in forbidden {
        h.check_colors(f)?;
    }
    if !(params.epsilon > 0.0 && params.epsilon <= 1.0) {
        return invalid("ε must lie in (0, 1]");
    }
    let p = f.p;
    let space = f.space();
    let r = f.colors.len();
    let threshold = params.threshold.unwrap_or(params.epsilon / (4.0 * r as f64));
    let everywhere = vec![true; space.size()];
    let before: Vec<u128> = residuals(&f.values, &space, forbidden, &everywhere, caps)?.iter().map(|x| x.0).collect();
    let base_report = |residual: Vec<u128>| RecolorReport {
        distance: Fraction { num: 0, den: space.size() as u128 },
        threshold,
        cleanup_changed: 0,
        patch_changed: 0,
        irregular_fraction: 0.0,
        irregular_dim: 0,
        residual_before: before.clone(),
        residual,
        xi_tried: 0,
        xi_exhaustive: true,
        reverted: false,
        linear_slots: 0,
    };
    if before.iter().all(|&c| c == 0) {
        return Ok(RecolorOutput { g: f.clone(), xi: None, report: base_report(before.clone()) });
    }

    let (coarse, fine, selector) = match &params.factor {
        FactorConfig::Regularize(cfg) => {
            let fs: Vec<Vec<f64>> =
                (0..r).map(|c| f.values.iter().map(|&v| if v == c { 1.0 } else { 0.0 }).collect()).collect();
            let out = strong_regularity(&fs, p, f.n, cfg, caps)?;
            (out.strong.coarse, out.strong.fine, out.selector)
        }
        FactorConfig::Fixed { coarse, fine, selector } => {
            if !coarse.is_refined_by(fine)? || &selector.source != coarse.params() || &selector.target != fine.params() {
                return shape("fixed factors must satisfy B ≤ B' with a selector from A_I to A_I'");
            }
            (coarse.clone(), fine.clone(), selector.clone())
        }
    };
    if coarse.p() != p || coarse.n() != f.n {
        return shape("factor lives on a different space than the coloring");
    }
    let cp = coarse.params().clone();
    let lin = cp.get(1, 0) as usize;

    // Color counts per fine atom and per coarse atom.
    let mut fine_counts: BTreeMap<u128, Vec<u64>> = BTreeMap::new();
    let mut coarse_counts: BTreeMap<u128, Vec<u64>> = BTreeMap::new();
    for x in 0..space.size() {
        fine_counts.entry(fine.codes()[x]).or_insert_with(|| vec![0; r])[f.values[x]] += 1;
        coarse_counts.entry(coarse.codes()[x]).or_insert_with(|| vec![0; r])[f.values[x]] += 1;
    }
    let regular = |a: &AtomIndex| a.entries[..lin].iter().any(|&v| v != 0);

    // High-density colors of every nonempty regular atom.
    let mut high: BTreeMap<u128, Vec<bool>> = BTreeMap::new();
    for (&code, counts) in &coarse_counts {
        let a = cp.atom_decode(code);
        if !regular(&a) {
            continue;
        }
        let sa = selector.apply(&a)?;
        let counts = fine_counts.get(&fine.params().atom_code(&sa)).unwrap_or(counts);
        let total: u64 = counts.iter().sum();
        high.insert(code, counts.iter().map(|&c| c as f64 / total as f64 >= threshold).collect());
    }
    // Representative color per orbit, transported along the orbit.
    let mut rep_color: BTreeMap<u128, usize> = BTreeMap::new();
    for (&code, hd) in &high {
        if rep_color.contains_key(&code) {
            continue;
        }
        let a = cp.atom_decode(code);
        let c = match hd.iter().position(|&h| h) {
            Some(c) => c,
            None => {
                let counts = &coarse_counts[&code];
                (0..r).max_by_key(|&c| (counts[c], std::cmp::Reverse(c))).unwrap()
            }
        };
        for b in 1..p {
            let ba = cp.atom_code(&cp.act(b, &a)?);
            rep_color.entry(ba).or_insert(f.colors.act(b, c));
        }
    }
    let mut g = f.values.clone();
    let mut cleanup_changed = 0u64;
    for x in 0..space.size() {
        let code = coarse.codes()[x];
        if let Some(hd) = high.get(&code) {
            if !hd[f.values[x]] {
                g[x] = rep_color[&code];
                cleanup_changed += 1;
            }
        }
    }

    // Irregular subspace and its coordinates.
    let lin_rows: Vec<Vec<u32>> = coarse.tables()[..lin]
        .iter()
        .map(|t| (0..f.n).map(|j| t.values[space.basis(j)] as u32).collect())
        .collect();
    let basis: Vec<usize> = nullspace_mod_p(&lin_rows, f.n, p).iter().map(|v| space.index(v)).collect();
    let dim = basis.len();
    let sub = Space::new(p, dim)?;
    let mut tilde_params = ParameterList::empty(p)?;
    for (d, k) in cp.keys().filter(|&key| key != (1, 0)) {
        tilde_params.push(d, k, cp.get(d, k))?;
    }
    let in_tilde: Vec<bool> = (0..space.size()).map(|x| !regular(&coarse.evaluate(x))).collect();

    // Orbits of (fnz_ι(x), B̃(x)) over the points of Ṽ.
    let mut orbit_index: BTreeMap<(u32, u128), usize> = BTreeMap::new();
    let mut orbit_reps: Vec<(u32, u128)> = Vec::new();
    let mut members: Vec<(usize, usize, u32)> = Vec::new();
    for y in 0..sub.size() {
        let coords = sub.digits(y);
        let x = space.combine(&coords, &basis);
        let t = sub.fnz(y);
        let a = AtomIndex::new(coarse.evaluate(x).entries[lin..].to_vec());
        let (rep, mults) = pair_orbit(&tilde_params, t, &a)?;
        let next = orbit_reps.len();
        let oi = *orbit_index.entry(rep).or_insert(next);
        if oi == next {
            orbit_reps.push(rep);
        }
        members.push((x, oi, mults[0]));
    }
    // Colors allowed at each representative: fixed by its stabilizer.
    let mut allowed: Vec<Vec<usize>> = Vec::with_capacity(orbit_reps.len());
    for &(t, code) in &orbit_reps {
        let a = tilde_params.atom_decode(code);
        let mut stab = Vec::new();
        for b in 1..p {
            if ((b * t) % p, tilde_params.atom_code(&tilde_params.act(b, &a)?)) == (t, code) {
                stab.push(b);
            }
        }
        let ok: Vec<usize> = (0..r).filter(|&c| stab.iter().all(|&b| f.colors.act(b, c) == c)).collect();
        if ok.is_empty() {
            return Err(HofaError::SearchExhausted(format!(
                "no projective ξ: orbit of ({t}, atom {code}) admits no color fixed by its stabilizer"
            )));
        }
        allowed.push(ok);
    }
    // Majority candidate first.
    let mut votes = vec![vec![0u64; r]; orbit_reps.len()];
    for &(x, oi, b) in &members {
        let binv = inv_mod(b as u64, p as u64).unwrap() as u32;
        votes[oi][f.colors.act(binv, f.values[x])] += 1;
    }
    let majority: Vec<usize> = allowed
        .iter()
        .zip(&votes)
        .map(|(ok, v)| *ok.iter().max_by_key(|&&c| (v[c], std::cmp::Reverse(c))).unwrap())
        .collect();

    let combos = allowed.iter().fold(1u128, |acc, ok| acc.saturating_mul(ok.len() as u128));
    let exhaustive = combos <= params.xi_budget.max(1) as u128;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut idx = vec![0usize; orbit_reps.len()];
    let tries = if exhaustive { combos as u64 } else { params.xi_budget.max(1) };
    let mut best: Option<((u128, u64), Vec<usize>, Vec<usize>)> = None;
    let mut min_internal = u128::MAX;
    let mut tried = 0u64;
    for attempt in 0..=tries {
        let choice: Vec<usize> = if attempt == 0 {
            majority.clone()
        } else if exhaustive {
            let c = idx.iter().zip(&allowed).map(|(&i, ok)| ok[i]).collect();
            for (i, ok) in idx.iter_mut().zip(&allowed) {
                *i += 1;
                if *i < ok.len() {
                    break;
                }
                *i = 0;
            }
            c
        } else {
            allowed.iter().map(|ok| ok[rng.gen_range(0..ok.len())]).collect()
        };
        tried += 1;
        let mut cand = g.clone();
        let mut changed = 0u64;
        for &(x, oi, b) in &members {
            cand[x] = f.colors.act(b, choice[oi]);
            if cand[x] != f.values[x] {
                changed += 1;
            }
        }
        let res = residuals(&cand, &space, forbidden, &in_tilde, caps)?;
        let internal: u128 = res.iter().map(|x| x.1).sum();
        min_internal = min_internal.min(internal);
        if internal > 0 {
            continue;
        }
        let total: u128 = res.iter().map(|x| x.0).sum();
        let key = (total, changed);
        if best.as_ref().map_or(true, |b| key < b.0) {
            best = Some((key, choice, cand));
        }
        if total == 0 && changed == 0 {
            break;
        }
    }
    let Some((_, choice, cand)) = best else {
        return Err(HofaError::SearchExhausted(format!(
            "no projective ξ among {tried} candidates avoids the forbidden family on the irregular subspace \
             (dimension {dim}, {} orbits, fewest internal instances {min_internal})",
            orbit_reps.len()
        )));
    };

    // Full ξ table: chosen colors on the occurring orbits, the smallest
    // stabilizer-fixed color elsewhere.
    let norm = tilde_params.norm();
    caps.check_elements("ξ table", (p as u128).saturating_mul(norm))?;
    let mut table = vec![0usize; (p as u128 * norm) as usize];
    for t in 0..p {
        for code in 0..norm {
            let a = tilde_params.atom_decode(code);
            let (rep, mults) = pair_orbit(&tilde_params, t, &a)?;
            let base = match orbit_index.get(&rep) {
                Some(&oi) => choice[oi],
                None => {
                    let ra = tilde_params.atom_decode(rep.1);
                    let stab: Vec<u32> = (1..p)
                        .filter(|&b| {
                            ((b * rep.0) % p, tilde_params.atom_code(&tilde_params.act(b, &ra).unwrap())) == rep
                        })
                        .collect();
                    (0..r).find(|&c| stab.iter().all(|&b| f.colors.act(b, c) == c)).unwrap_or(0)
                }
            };
            table[(t as u128 * norm + code) as usize] = f.colors.act(mults[0], base);
        }
    }
    let xi = CanonicalXi::new(tilde_params, f.colors.clone(), table, caps)?;

    let after: Vec<u128> = residuals(&cand, &space, forbidden, &everywhere, caps)?.iter().map(|x| x.0).collect();
    let patch_changed = members.iter().filter(|&&(x, _, _)| cand[x] != f.values[x]).count() as u64;
    let reverted = after.iter().sum::<u128>() >= before.iter().sum::<u128>();
    let g_values = if reverted { f.values.clone() } else { cand };
    let g = Coloring::new(p, f.n, f.colors.clone(), g_values)?;
    let distance = coloring_distance(f, &g)?;
    let residual = if reverted { before.clone() } else { after };
    let mut report = base_report(residual);
    report.distance = distance;
    report.cleanup_changed = cleanup_changed;
    report.patch_changed = patch_changed;
    report.irregular_fraction = (p as f64).powi(-(lin as i32));
    report.irregular_dim = dim;
    report.xi_tried = tried;
    report.xi_exhaustive = exhaustive;
    report.reverted = reverted;
    report.linear_slots = lin as u32;
    Ok(RecolorOutput { g, xi: Some(xi), report })
}
