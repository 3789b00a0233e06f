//! Subspace testers, restriction, and brute-force checks of hereditary
//! and local properties.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::caps::{pow_sat, Caps};
use crate::error::{invalid, shape, HofaError, Result};
use crate::field::Space;
use crate::forms::{Canonical, LinearSystem};
use crate::ncpoly::ValueTable;
use crate::par;
use crate::patterns::{is_generic, ColorSet, ColoredPattern, Coloring, Fraction};

/// `z` for a two-sided 95% interval.
pub const Z95: f64 = 1.959963984540054;

/// Linear subspaces as in the tester definition, or affine subspaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SubspaceMode {
    Linear,
    Affine,
}

#[derive(Clone)]
pub enum PropertyKind {
    /// Colors read as elements of `F_p`; `f(x+y) = f(x) + f(y)`.
    Linearity,
    /// Colors read as elements of `F_p`; classical degree at most `t`.
    ClassicalDegree(u32),
    /// Every restriction to a 2-dimensional subspace, in every ordered
    /// basis, is one of the listed tables on `F_p^2`. Below dimension 2 the
    /// function must be a restriction of a listed table.
    AllowableMaps2(Vec<Vec<usize>>),
    /// Restrictions to `l`-dimensional subspaces, keyed by `l`, that are
    /// rejected.
    ForbiddenRestrictions(BTreeMap<usize, Vec<Vec<usize>>>),
    Predicate(Arc<dyn Fn(&Coloring) -> bool + Send + Sync>),
}

impl fmt::Debug for PropertyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyKind::Linearity => write!(f, "Linearity"),
            PropertyKind::ClassicalDegree(t) => write!(f, "ClassicalDegree({t})"),
            PropertyKind::AllowableMaps2(v) => write!(f, "AllowableMaps2({} tables)", v.len()),
            PropertyKind::ForbiddenRestrictions(m) => write!(f, "ForbiddenRestrictions({:?})", m.keys().collect::<Vec<_>>()),
            PropertyKind::Predicate(_) => write!(f, "Predicate"),
        }
    }
}

/// A property of functions `F_p^n -> [R]`, for every `n`.
#[derive(Debug, Clone)]
pub struct Property {
    pub p: u32,
    pub colors: usize,
    pub name: String,
    pub kind: PropertyKind,
}

impl Property {
    pub fn linearity(p: u32) -> Self {
        Property { p, colors: p as usize, name: "linearity".into(), kind: PropertyKind::Linearity }
    }

    pub fn classical_degree(p: u32, t: u32) -> Self {
        Property { p, colors: p as usize, name: format!("degree<={t}"), kind: PropertyKind::ClassicalDegree(t) }
    }

    pub fn allowable_maps_2(p: u32, colors: usize, tables: Vec<Vec<usize>>) -> Result<Self> {
        let size = (p * p) as usize;
        if tables.iter().any(|t| t.len() != size || t.iter().any(|&c| c >= colors)) {
            return shape(format!("allowed maps must be tables of {size} colors below {colors}"));
        }
        Ok(Property { p, colors, name: "allowable-2-dim-maps".into(), kind: PropertyKind::AllowableMaps2(tables) })
    }

    pub fn forbidden(p: u32, colors: usize, family: BTreeMap<usize, Vec<Vec<usize>>>) -> Result<Self> {
        for (&l, tables) in &family {
            let size = pow_sat(p as u64, l as u64);
            if tables.iter().any(|t| t.len() as u128 != size || t.iter().any(|&c| c >= colors)) {
                return shape(format!("rejected tables at dimension {l} need {size} colors below {colors}"));
            }
        }
        Ok(Property { p, colors, name: "forbidden-restrictions".into(), kind: PropertyKind::ForbiddenRestrictions(family) })
    }

    pub fn predicate(p: u32, colors: usize, name: &str, f: impl Fn(&Coloring) -> bool + Send + Sync + 'static) -> Self {
        Property { p, colors, name: name.into(), kind: PropertyKind::Predicate(Arc::new(f)) }
    }

    /// Membership of `f`, decided exhaustively.
    pub fn contains(&self, f: &Coloring, caps: &Caps) -> Result<bool> {
        if f.p != self.p {
            return shape("property and function use different primes");
        }
        if f.values.iter().any(|&c| c >= self.colors) {
            return Ok(false);
        }
        let space = f.space();
        match &self.kind {
            PropertyKind::Linearity => {
                let p = self.p as usize;
                let img: Vec<usize> = (0..space.n()).map(|j| f.values[space.basis(j)]).collect();
                Ok((0..space.size()).all(|x| {
                    let d = space.digits(x);
                    d.iter().zip(&img).map(|(&a, &b)| a as usize * b).sum::<usize>() % p == f.values[x]
                }))
            }
            PropertyKind::ClassicalDegree(t) => {
                caps.check_table("degree test", space.size() as u128)?;
                let vals = f.values.iter().map(|&v| v as u64).collect();
                let rep = ValueTable::new(self.p, space.n(), 0, vals)?.interpolate()?;
                Ok(rep.degree() <= *t)
            }
            PropertyKind::AllowableMaps2(tables) => {
                let allowed: BTreeSet<&Vec<usize>> = tables.iter().collect();
                if space.n() >= 2 {
                    let mut ok = true;
                    for_each_basis(&space, 2, caps, |basis| {
                        let t = restrict_values(f, &space, basis, 0);
                        ok = allowed.contains(&t);
                        ok
                    })?;
                    return Ok(ok);
                }
                let plane = Space::new(self.p, 2)?;
                let mut found = false;
                for t in tables {
                    let g = Coloring { p: self.p, n: 2, colors: f.colors.clone(), values: t.clone() };
                    for_each_basis(&plane, space.n(), caps, |basis| {
                        found = restrict_values(&g, &plane, basis, 0) == f.values;
                        !found
                    })?;
                    if found {
                        break;
                    }
                }
                Ok(found)
            }
            PropertyKind::ForbiddenRestrictions(family) => {
                for (&l, tables) in family {
                    if l > space.n() || tables.is_empty() {
                        continue;
                    }
                    let rejected: BTreeSet<&Vec<usize>> = tables.iter().collect();
                    let mut clean = true;
                    for_each_basis(&space, l, caps, |basis| {
                        clean = !rejected.contains(&restrict_values(f, &space, basis, 0));
                        clean
                    })?;
                    if !clean {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            PropertyKind::Predicate(pred) => Ok(pred(f)),
        }
    }
}

/// Visits every ordered basis of every `d`-dimensional subspace, in
/// enumeration order, until `visit` returns false.
pub fn for_each_basis(space: &Space, d: usize, caps: &Caps, mut visit: impl FnMut(&[usize]) -> bool) -> Result<()> {
    if d > space.n() {
        return invalid(format!("no {d}-dimensional subspaces of F_p^{}", space.n()));
    }
    caps.check_enum("basis enumeration", pow_sat(space.size() as u64, d as u64))?;
    let total = space.size().pow(d as u32);
    let mut x = vec![0usize; d];
    for t in 0..total {
        let mut r = t;
        for xi in x.iter_mut() {
            *xi = r % space.size();
            r /= space.size();
        }
        if is_generic(space, &x) && !visit(&x) {
            break;
        }
    }
    Ok(())
}

/// Number of ordered bases of `d`-dimensional subspaces: `Π_{i<d} (p^n - p^i)`.
pub fn ordered_bases(p: u32, n: usize, d: usize) -> u128 {
    let q = pow_sat(p as u64, n as u64);
    (0..d).map(|i| q - pow_sat(p as u64, i as u64)).product()
}

fn restrict_values(f: &Coloring, space: &Space, basis: &[usize], base: usize) -> Vec<usize> {
    let sub = Space::new(space.p(), basis.len()).expect("basis fits");
    (0..sub.size()).map(|y| f.values[space.add(base, space.combine(&sub.digits(y), basis))]).collect()
}

/// A sampled subspace: `base + span(basis)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Subspace {
    pub basis: Vec<usize>,
    pub base: usize,
}

/// Uniform `d`-dimensional subspace by rejection sampling of ordered bases;
/// every subspace has the same number of ordered bases. Affine mode adds
/// a uniform base point.
pub fn sample_subspace<R: Rng>(space: &Space, d: usize, mode: SubspaceMode, rng: &mut R) -> Result<Subspace> {
    if d > space.n() {
        return invalid(format!("cannot sample a {d}-dimensional subspace of F_p^{}", space.n()));
    }
    let basis = loop {
        let b: Vec<usize> = (0..d).map(|_| rng.gen_range(0..space.size())).collect();
        if is_generic(space, &b) {
            break b;
        }
    };
    let base = match mode {
        SubspaceMode::Linear => 0,
        SubspaceMode::Affine => rng.gen_range(0..space.size()),
    };
    Ok(Subspace { basis, base })
}

/// `y -> f(base + Σ y_i b_i)` on `F_p^d`.
pub fn restrict(f: &Coloring, sub: &Subspace) -> Result<Coloring> {
    let space = f.space();
    if sub.basis.iter().any(|&b| b >= space.size()) || sub.base >= space.size() {
        return shape("basis point outside the domain");
    }
    if !is_generic(&space, &sub.basis) {
        return invalid("restriction basis is linearly dependent");
    }
    Coloring::new(f.p, sub.basis.len(), f.colors.clone(), restrict_values(f, &space, &sub.basis, sub.base))
}

#[derive(Debug, Clone, Serialize)]
pub struct TesterConfig {
    pub d: usize,
    pub trials: u64,
    pub seed: u64,
    pub mode: SubspaceMode,
    /// Rejecting subspaces kept in the report.
    pub witness_limit: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TestReport {
    pub trials: u64,
    pub accepts: u64,
    pub rejects: u64,
    pub rate: f64,
    pub ci: [f64; 2],
    pub seed: u64,
    pub mode: SubspaceMode,
    pub d: usize,
    pub witnesses: Vec<Subspace>,
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson(k: u64, n: u64, z: f64) -> [f64; 2] {
    if n == 0 {
        return [0.0, 1.0];
    }
    let nf = n as f64;
    let ph = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (ph + z2 / (2.0 * nf)) / denom;
    let half = z * (ph * (1.0 - ph) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    if k == 0 {
        return [0.0, (center + half).min(1.0)];
    }
    if k == n {
        return [(center - half).max(0.0), 1.0];
    }
    [(center - half).max(0.0), (center + half).min(1.0)]
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Restricts `f` to a random `d`-dimensional subspace per trial and
/// accepts when the restriction has the property. When `n ≤ d`, every
/// trial tests `f` itself.
pub fn run_tester(f: &Coloring, property: &Property, cfg: &TesterConfig, caps: &Caps) -> Result<TestReport> {
    let space = f.space();
    let whole = space.n() <= cfg.d;
    let outcomes = par::map_range(cfg.trials as usize, |t| -> Result<Option<Subspace>> {
        let sub = if whole {
            Subspace { basis: (0..space.n()).map(|j| space.basis(j)).collect(), base: 0 }
        } else {
            sample_subspace(&space, cfg.d, cfg.mode, &mut trial_rng(cfg.seed, t as u64))?
        };
        let g = restrict(f, &sub)?;
        Ok((!property.contains(&g, caps)?).then_some(sub))
    });
    let mut rejects = 0u64;
    let mut witnesses = Vec::new();
    for o in outcomes {
        if let Some(sub) = o? {
            rejects += 1;
            if witnesses.len() < cfg.witness_limit {
                witnesses.push(sub);
            }
        }
    }
    let rate = if cfg.trials == 0 { 0.0 } else { rejects as f64 / cfg.trials as f64 };
    Ok(TestReport {
        trials: cfg.trials,
        accepts: cfg.trials - rejects,
        rejects,
        rate,
        ci: wilson(rejects, cfg.trials, Z95),
        seed: cfg.seed,
        mode: cfg.mode,
        d: cfg.d,
        witnesses,
    })
}

/// Exact per-trial rejection probability over all ordered bases (and all
/// base points in affine mode).
pub fn exact_rejection_probability(f: &Coloring, property: &Property, d: usize, mode: SubspaceMode, caps: &Caps) -> Result<Fraction> {
    let space = f.space();
    if space.n() <= d {
        let bad = !property.contains(f, caps)?;
        return Ok(Fraction { num: u128::from(bad), den: 1 });
    }
    let bases = match mode {
        SubspaceMode::Linear => vec![0],
        SubspaceMode::Affine => (0..space.size()).collect(),
    };
    let (mut num, mut den) = (0u128, 0u128);
    let mut err: Option<HofaError> = None;
    for &base in &bases {
        for_each_basis(&space, d, caps, |basis| {
            den += 1;
            let g = Coloring { p: f.p, n: d, colors: f.colors.clone(), values: restrict_values(f, &space, basis, base) };
            match property.contains(&g, caps) {
                Ok(true) => {}
                Ok(false) => num += 1,
                Err(e) => {
                    err = Some(e);
                    return false;
                }
            }
            true
        })?;
        if let Some(e) = err {
            return Err(e);
        }
    }
    Ok(Fraction { num, den })
}

/// Probability over uniform `(x, y)` that `f(x) + f(y) != f(x + y)`, colors
/// read as elements of `F_p`.
pub fn blr_rejection_probability(f: &Coloring) -> Result<Fraction> {
    if f.colors.len() > f.p as usize {
        return invalid("additivity test needs colors in F_p");
    }
    let space = f.space();
    let p = f.p as usize;
    let mut bad = 0u128;
    for x in 0..space.size() {
        for y in 0..space.size() {
            if (f.values[x] + f.values[y]) % p != f.values[space.add(x, y)] {
                bad += 1;
            }
        }
    }
    Ok(Fraction { num: bad, den: (space.size() as u128).pow(2) })
}

/// The additivity test with uniform `(x, y)` per trial, on the same
/// per-trial RNG streams as [`run_tester`].
pub fn run_blr(f: &Coloring, trials: u64, seed: u64) -> Result<TestReport> {
    if f.colors.len() > f.p as usize {
        return invalid("additivity test needs colors in F_p");
    }
    let space = f.space();
    let p = f.p as usize;
    let outcomes = par::map_range(trials as usize, |t| {
        let mut rng = trial_rng(seed, t as u64);
        let x = rng.gen_range(0..space.size());
        let y = rng.gen_range(0..space.size());
        (f.values[x] + f.values[y]) % p != f.values[space.add(x, y)]
    });
    let rejects = outcomes.iter().filter(|&&b| b).count() as u64;
    Ok(TestReport {
        trials,
        accepts: trials - rejects,
        rejects,
        rate: if trials == 0 { 0.0 } else { rejects as f64 / trials as f64 },
        ci: wilson(rejects, trials, Z95),
        seed,
        mode: SubspaceMode::Linear,
        d: 0,
        witnesses: Vec::new(),
    })
}

/// One pattern `(L^l, table)` per rejected table at dimension `l`.
pub fn property_to_patterns(property: &Property, l: usize, caps: &Caps) -> Result<Vec<ColoredPattern>> {
    let PropertyKind::ForbiddenRestrictions(family) = &property.kind else {
        return invalid("only forbidden-restriction families convert to patterns");
    };
    let Some(tables) = family.get(&l) else { return Ok(Vec::new()) };
    let system = LinearSystem::canonical(property.p, l, Canonical::Full, caps)?;
    let space = Space::new(property.p, l)?;
    tables
        .iter()
        .map(|t| ColoredPattern::new(system.clone(), system.rows.iter().map(|r| t[space.index(r)]).collect()))
        .collect()
}

/// Outcome of a brute-force structural check.
#[derive(Debug, Clone, Serialize)]
pub struct StructureReport {
    pub holds: bool,
    pub counterexample: Option<Counterexample>,
    /// Per dimension: functions checked and whether all were enumerated.
    pub per_n: Vec<(usize, u64, bool)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    pub f: Coloring,
    pub member: bool,
    /// Basis of the offending restriction, when there is one.
    pub basis: Option<Vec<usize>>,
}

/// Functions on `F_p^n` to check: all of them when there are at most
/// `budget`, else `budget` seeded random ones.
fn function_corpus(p: u32, n: usize, colors: usize, budget: u64, seed: u64) -> Result<(Vec<Coloring>, bool)> {
    let space = Space::new(p, n)?;
    let total = pow_sat(colors as u64, space.size() as u64);
    let set = ColorSet::plain(colors);
    if total <= budget as u128 {
        let mut out = Vec::with_capacity(total as usize);
        let mut v = vec![0usize; space.size()];
        for _ in 0..total {
            out.push(Coloring { p, n, colors: set.clone(), values: v.clone() });
            for c in v.iter_mut() {
                *c += 1;
                if *c < colors {
                    break;
                }
                *c = 0;
            }
        }
        return Ok((out, true));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ n as u64);
    let out = (0..budget)
        .map(|_| Coloring { p, n, colors: set.clone(), values: (0..space.size()).map(|_| rng.gen_range(0..colors)).collect() })
        .collect();
    Ok((out, false))
}

/// Whether membership on `F_p^n`, `n ≤ n_max`, is equivalent to every
/// `d`-dimensional restriction being a member. Dimensions `n ≤ d` are
/// vacuous.
pub fn check_locally_characterized(property: &Property, d: usize, n_max: usize, budget: u64, caps: &Caps) -> Result<StructureReport> {
    let mut per_n = Vec::new();
    for n in (d + 1)..=n_max {
        let (corpus, exhaustive) = function_corpus(property.p, n, property.colors, budget, 0)?;
        let space = Space::new(property.p, n)?;
        let results = par::map_range(corpus.len(), |i| -> Result<Option<Counterexample>> {
            let f = &corpus[i];
            let member = property.contains(f, caps)?;
            let mut bad_basis = None;
            let mut err = None;
            for_each_basis(&space, d, caps, |basis| {
                let g = Coloring { p: f.p, n: d, colors: f.colors.clone(), values: restrict_values(f, &space, basis, 0) };
                match property.contains(&g, caps) {
                    Ok(true) => true,
                    Ok(false) => {
                        bad_basis = Some(basis.to_vec());
                        false
                    }
                    Err(e) => {
                        err = Some(e);
                        false
                    }
                }
            })?;
            if let Some(e) = err {
                return Err(e);
            }
            let local = bad_basis.is_none();
            Ok((member != local).then(|| Counterexample { f: f.clone(), member, basis: bad_basis }))
        });
        per_n.push((n, corpus.len() as u64, exhaustive));
        for r in results {
            if let Some(c) = r? {
                return Ok(StructureReport { holds: false, counterexample: Some(c), per_n });
            }
        }
    }
    Ok(StructureReport { holds: true, counterexample: None, per_n })
}

/// Whether every restriction of a member to a subspace of positive
/// dimension is a member, for `n ≤ n_max`.
pub fn check_subspace_hereditary(property: &Property, n_max: usize, budget: u64, caps: &Caps) -> Result<StructureReport> {
    let mut per_n = Vec::new();
    for n in 1..=n_max {
        let (corpus, exhaustive) = function_corpus(property.p, n, property.colors, budget, 1)?;
        let space = Space::new(property.p, n)?;
        let results = par::map_range(corpus.len(), |i| -> Result<Option<Counterexample>> {
            let f = &corpus[i];
            if !property.contains(f, caps)? {
                return Ok(None);
            }
            for k in 1..n {
                let mut bad = None;
                let mut err = None;
                for_each_basis(&space, k, caps, |basis| {
                    let g = Coloring { p: f.p, n: k, colors: f.colors.clone(), values: restrict_values(f, &space, basis, 0) };
                    match property.contains(&g, caps) {
                        Ok(true) => true,
                        Ok(false) => {
                            bad = Some(basis.to_vec());
                            false
                        }
                        Err(e) => {
                            err = Some(e);
                            false
                        }
                    }
                })?;
                if let Some(e) = err {
                    return Err(e);
                }
                if bad.is_some() {
                    return Ok(Some(Counterexample { f: f.clone(), member: true, basis: bad }));
                }
            }
            Ok(None)
        });
        per_n.push((n, corpus.len() as u64, exhaustive));
        for r in results {
            if let Some(c) = r? {
                return Ok(StructureReport { holds: false, counterexample: Some(c), per_n });
            }
        }
    }
    Ok(StructureReport { holds: true, counterexample: None, per_n })
}

/// Compares membership of `f` and `f ∘ A` for random invertible `A`.
/// Returns the first matrix (as images of the basis vectors) that changes
/// the answer.
pub fn invariance_spot_check(property: &Property, f: &Coloring, trials: u64, seed: u64, caps: &Caps) -> Result<Option<Vec<usize>>> {
    let space = f.space();
    let base = property.contains(f, caps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let sub = sample_subspace(&space, space.n(), SubspaceMode::Linear, &mut rng)?;
        let g = restrict(f, &sub)?;
        if property.contains(&g, caps)? != base {
            return Ok(Some(sub.basis));
        }
    }
    Ok(None)
}
