//! Gowers norms, pattern densities, analytic rank and the inverse oracle.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::caps::{pow_sat, Caps};
use crate::error::{invalid, shape, Result};
use crate::field::{max_depth, Space};
use crate::forms::LinearSystem;
use crate::ncpoly::{MonomialRep, ValueTable};
use crate::par;

/// Exact or Monte Carlo evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    Exact,
    Sampled { samples: u64, seed: u64 },
}

/// `e(t) = exp(2πi t)`.
pub fn e(t: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * t)
}

/// `x -> e(P(x))` for a value table.
pub fn phase_function(t: &ValueTable) -> Vec<Complex64> {
    let m = t.modulus() as f64;
    t.values.iter().map(|&v| e(v as f64 / m)).collect()
}

/// A sum `Σ_r counts[r] e(r / p^e)` kept exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CyclotomicSum {
    pub p: u32,
    pub e: u32,
    pub counts: Vec<u64>,
}

impl CyclotomicSum {
    pub fn new(p: u32, e: u32) -> Self {
        CyclotomicSum { p, e, counts: vec![0; (p as usize).pow(e)] }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Exact test for `Σ counts[r] ζ^r = 0`: the cyclotomic polynomial of
    /// order `p^e` divides the count polynomial iff counts are constant on
    /// each residue class modulo `p^{e-1}`.
    pub fn is_zero(&self) -> bool {
        let step = (self.p as usize).pow(self.e - 1);
        (0..step).all(|s| {
            let first = self.counts[s];
            (1..self.p as usize).all(|t| self.counts[s + t * step] == first)
        })
    }

    pub fn value(&self) -> Complex64 {
        let m = self.counts.len() as f64;
        self.counts.iter().enumerate().map(|(r, &c)| e(r as f64 / m) * c as f64).sum()
    }

    pub fn mean(&self) -> Complex64 {
        self.value() / self.total() as f64
    }

    pub fn merge(&mut self, other: &Self) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

/// `‖f‖_{U^d}`.
pub fn gowers_norm(f: &[Complex64], space: &Space, d: u32, mode: Mode, caps: &Caps) -> Result<f64> {
    if f.len() != space.size() {
        return shape("function length does not match the space");
    }
    if d == 0 {
        return invalid("Gowers norms need d ≥ 1");
    }
    let power = match mode {
        Mode::Exact => {
            caps.check_enum("Gowers norm", pow_sat(space.size() as u64, d as u64))?;
            gowers_power_exact(f, space, d)
        }
        Mode::Sampled { samples, seed } => gowers_power_sampled(f, space, d, samples, seed),
    };
    Ok(power.max(0.0).powf(1.0 / (1u64 << d) as f64))
}

/// `‖f‖_{U^d}^{2^d}` by the recursion `E_h ‖Δ_h f‖_{U^{d-1}}^{2^{d-1}}`.
fn gowers_power_exact(f: &[Complex64], space: &Space, d: u32) -> f64 {
    if d == 1 {
        let mean: Complex64 = f.iter().sum::<Complex64>() / f.len() as f64;
        return mean.norm_sqr();
    }
    let per_h: Vec<f64> = par::map_range(space.size(), |h| {
        let g: Vec<Complex64> = (0..space.size()).map(|x| f[space.add(x, h)] * f[x].conj()).collect();
        gowers_power_exact(&g, space, d - 1)
    });
    per_h.iter().sum::<f64>() / space.size() as f64
}

fn gowers_power_sampled(f: &[Complex64], space: &Space, d: u32, samples: u64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = 0.0;
    let mut hs = vec![0usize; d as usize];
    for _ in 0..samples {
        let x = rng.gen_range(0..space.size());
        for h in hs.iter_mut() {
            *h = rng.gen_range(0..space.size());
        }
        let mut prod = Complex64::new(1.0, 0.0);
        for w in 0u32..(1 << d) {
            let mut pt = x;
            for (j, &h) in hs.iter().enumerate() {
                if w >> j & 1 == 1 {
                    pt = space.add(pt, h);
                }
            }
            let v = f[pt];
            prod *= if w.count_ones() % 2 == 1 { v.conj() } else { v };
        }
        acc += prod.re;
    }
    acc / samples.max(1) as f64
}

/// Exact histogram of `D_{h_1} ... D_{h_d} P(x)` over all `x, h_1..h_d`.
pub fn derivative_histogram(t: &ValueTable, d: u32, caps: &Caps) -> Result<CyclotomicSum> {
    let space = t.space();
    caps.check_enum("derivative histogram", pow_sat(space.size() as u64, d as u64 + 1))?;
    fn go(t: &ValueTable, space: &Space, d: u32, acc: &mut CyclotomicSum) {
        if d == 0 {
            for &v in &t.values {
                acc.counts[v as usize] += 1;
            }
            return;
        }
        for h in 0..space.size() {
            go(&t.derivative(h), space, d - 1, acc);
        }
    }
    let parts: Vec<CyclotomicSum> = if d == 0 {
        let mut acc = CyclotomicSum::new(t.p, t.depth + 1);
        go(t, &space, 0, &mut acc);
        vec![acc]
    } else {
        par::map_range(space.size(), |h| {
            let mut acc = CyclotomicSum::new(t.p, t.depth + 1);
            go(&t.derivative(h), &space, d - 1, &mut acc);
            acc
        })
    };
    let mut out = CyclotomicSum::new(t.p, t.depth + 1);
    for part in &parts {
        out.merge(part);
    }
    Ok(out)
}

/// Analytic rank `-log_p |E e(D_{h_1} ... D_{h_d} P(x))|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum AnalyticRank {
    Finite(f64),
    /// The bias is exactly zero.
    Infinite,
}

impl AnalyticRank {
    pub fn at_least(&self, r: f64) -> bool {
        match self {
            AnalyticRank::Infinite => true,
            AnalyticRank::Finite(v) => *v >= r - 1e-9,
        }
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            AnalyticRank::Infinite => f64::INFINITY,
            AnalyticRank::Finite(v) => *v,
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self.as_f64() <= other.as_f64() {
            self
        } else {
            other
        }
    }
}

pub fn analytic_rank(t: &ValueTable, d: u32, mode: Mode, caps: &Caps) -> Result<AnalyticRank> {
    let p = t.p as f64;
    match mode {
        Mode::Exact => {
            let h = derivative_histogram(t, d, caps)?;
            if h.is_zero() {
                return Ok(AnalyticRank::Infinite);
            }
            let bias = h.mean().norm();
            Ok(AnalyticRank::Finite((-bias.ln() / p.ln()).max(0.0)))
        }
        Mode::Sampled { samples, seed } => {
            let space = t.space();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = t.modulus() as f64;
            let mut acc = Complex64::new(0.0, 0.0);
            for _ in 0..samples {
                let x = rng.gen_range(0..space.size());
                let hs: Vec<usize> = (0..d).map(|_| rng.gen_range(0..space.size())).collect();
                let mut total: i128 = 0;
                for w in 0u32..(1 << d) {
                    let mut pt = x;
                    for (j, &h) in hs.iter().enumerate() {
                        if w >> j & 1 == 1 {
                            pt = space.add(pt, h);
                        }
                    }
                    let sign = if (d - w.count_ones()) % 2 == 0 { 1 } else { -1 };
                    total += sign * t.values[pt] as i128;
                }
                let r = total.rem_euclid(t.modulus() as i128) as f64;
                acc += e(r / m);
            }
            let bias = (acc / samples.max(1) as f64).norm();
            if bias == 0.0 {
                return Ok(AnalyticRank::Infinite);
            }
            Ok(AnalyticRank::Finite((-bias.ln() / p.ln()).max(0.0)))
        }
    }
}

/// Enumerates `x` in `V^l` in index order, calling `visit` with the images
/// `L_i(x)`. Work is split over the first coordinate.
fn for_each_tuple<T: Send, F>(space: &Space, system: &LinearSystem, caps: &Caps, init: impl Fn() -> T + Sync, visit: F) -> Result<Vec<T>>
where
    F: Fn(&mut T, &[usize]) + Sync,
{
    if system.p != space.p() {
        return shape("system and space use different primes");
    }
    let l = system.l;
    caps.check_enum("pattern enumeration", pow_sat(space.size() as u64, l as u64))?;
    if l == 0 {
        let mut acc = init();
        visit(&mut acc, &vec![0; system.m()]);
        return Ok(vec![acc]);
    }
    let rest = space.size().pow(l as u32 - 1);
    Ok(par::map_range(space.size(), |x0| {
        let mut acc = init();
        let mut x = vec![0usize; l];
        let mut pts = vec![0usize; system.m()];
        x[0] = x0;
        for t in 0..rest {
            let mut r = t;
            for xi in x.iter_mut().skip(1) {
                *xi = r % space.size();
                r /= space.size();
            }
            for (pt, row) in pts.iter_mut().zip(&system.rows) {
                *pt = space.combine(row, &x);
            }
            visit(&mut acc, &pts);
        }
        acc
    }))
}

/// `Λ_L(f_1, ..., f_m) = E_x Π f_i(L_i(x))`.
pub fn lambda_density(system: &LinearSystem, fs: &[Vec<Complex64>], space: &Space, caps: &Caps) -> Result<Complex64> {
    if fs.len() != system.m() || fs.iter().any(|f| f.len() != space.size()) {
        return shape("need one function per form, each on the whole space");
    }
    let parts = for_each_tuple(space, system, caps, || Complex64::new(0.0, 0.0), |acc, pts| {
        let mut prod = Complex64::new(1.0, 0.0);
        for (f, &pt) in fs.iter().zip(pts) {
            prod *= f[pt];
        }
        *acc += prod;
    })?;
    let total = pow_sat(space.size() as u64, system.l as u64) as f64;
    Ok(parts.iter().sum::<Complex64>() / total)
}

/// Number of `x` with `L_i(x)` in set `i` for every `i`, and `|V|^l`.
pub fn lambda_count(system: &LinearSystem, sets: &[Vec<bool>], space: &Space, caps: &Caps) -> Result<(u128, u128)> {
    if sets.len() != system.m() || sets.iter().any(|f| f.len() != space.size()) {
        return shape("need one indicator per form, each on the whole space");
    }
    let parts = for_each_tuple(space, system, caps, || 0u128, |acc, pts| {
        if sets.iter().zip(pts).all(|(s, &pt)| s[pt]) {
            *acc += 1;
        }
    })?;
    Ok((parts.iter().sum(), pow_sat(space.size() as u64, system.l as u64)))
}

/// Counts of each joint value `(g(L_1(x)), ..., g(L_m(x)))` for a labelling
/// `g` of the points.
pub fn joint_distribution(
    system: &LinearSystem,
    labels: &[u128],
    space: &Space,
    caps: &Caps,
) -> Result<std::collections::BTreeMap<Vec<u128>, u64>> {
    let parts = for_each_tuple(space, system, caps, std::collections::BTreeMap::<Vec<u128>, u64>::new, |acc, pts| {
        let key: Vec<u128> = pts.iter().map(|&pt| labels[pt]).collect();
        *acc.entry(key).or_insert(0) += 1;
    })?;
    let mut out = std::collections::BTreeMap::new();
    for part in parts {
        for (k, v) in part {
            *out.entry(k).or_insert(0) += v;
        }
    }
    Ok(out)
}

/// `Λ_L(f)` together with `min_i ‖f_i‖_{U^{d+1}}`.
pub fn counting_lemma_deficiency(
    system: &LinearSystem,
    d: u32,
    fs: &[Vec<Complex64>],
    space: &Space,
    caps: &Caps,
) -> Result<(Complex64, f64)> {
    let lam = lambda_density(system, fs, space, caps)?;
    let mut min = f64::INFINITY;
    for f in fs {
        min = min.min(gowers_norm(f, space, d + 1, Mode::Exact, caps)?);
    }
    Ok((lam, min))
}

/// `<f, g> = E f conj(g)`.
pub fn inner(f: &[Complex64], g: &[Complex64]) -> Complex64 {
    f.iter().zip(g).map(|(a, b)| a * b.conj()).sum::<Complex64>() / f.len() as f64
}

pub fn l2_norm(f: &[f64]) -> f64 {
    (f.iter().map(|x| x * x).sum::<f64>() / f.len() as f64).sqrt()
}

pub fn to_complex(f: &[f64]) -> Vec<Complex64> {
    f.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

/// Monomial terms `(exps, k)` of degree at most `d`.
pub fn terms_up_to(p: u32, n: usize, d: u32) -> Result<Vec<(Vec<u32>, u32)>> {
    let space = Space::new(p, n)?;
    let mut out = Vec::new();
    for k in 0..=max_depth(p, d.max(1)) {
        for idx in 1..space.size() {
            let exps = space.digits(idx);
            if exps.iter().sum::<u32>() + k * (p - 1) <= d {
                out.push((exps, k));
            }
        }
    }
    Ok(out)
}

/// Result of the inverse oracle.
#[derive(Debug, Clone)]
pub struct Witness {
    pub poly: MonomialRep,
    /// `|E g(x) e(-P(x))|`.
    pub correlation: f64,
    pub exhaustive: bool,
}

/// Searches for `P` of degree at most `d` maximizing `|E g e(-P)|`.
///
/// Exhaustive over all monomial forms with `α = 0` when their number is
/// within `budget`, otherwise `budget` seeded random draws. Ties keep the
/// first polynomial in enumeration order. Returns `None` when the best
/// correlation is below `min_corr`.
pub fn inverse_oracle(
    g: &[Complex64],
    space: &Space,
    d: u32,
    min_corr: f64,
    budget: u64,
    seed: u64,
    caps: &Caps,
) -> Result<Option<Witness>> {
    if g.len() != space.size() {
        return shape("function length does not match the space");
    }
    let p = space.p();
    let terms = terms_up_to(p, space.n(), d)?;
    let kk = terms.iter().map(|t| t.1).max().unwrap_or(0);
    let modulus = (p as u64).pow(kk + 1);
    let tables: Vec<Vec<u64>> = terms
        .iter()
        .map(|(e, k)| Ok(MonomialRep::monomial(p, e.clone(), *k, 1)?.value_table(caps)?.embed(kk)?.values))
        .collect::<Result<_>>()?;
    let phases: Vec<Complex64> = (0..modulus).map(|r| e(-(r as f64) / modulus as f64)).collect();
    let corr = |vals: &[u64]| -> f64 {
        let s: Complex64 = g.iter().zip(vals).map(|(a, &v)| a * phases[v as usize]).sum();
        (s / g.len() as f64).norm()
    };
    let count = pow_sat(p as u64, terms.len() as u64);
    let exhaustive = count <= budget as u128;
    let best: Option<(f64, Vec<u32>)> = if exhaustive {
        caps.check_enum("inverse oracle", count.saturating_mul(space.size() as u128))?;
        let low = terms.len().min(14);
        let high = terms.len() - low;
        let chunks = (p as usize).pow(high as u32);
        let results: Vec<(f64, Vec<u32>)> = par::map_range(chunks, |chunk| {
            let mut coeffs = vec![0u32; terms.len()];
            let mut r = chunk;
            for c in coeffs.iter_mut().skip(low) {
                *c = (r % p as usize) as u32;
                r /= p as usize;
            }
            let mut vals = vec![0u64; space.size()];
            for (j, &c) in coeffs.iter().enumerate().skip(low) {
                for (v, &t) in vals.iter_mut().zip(&tables[j]) {
                    *v = (*v + c as u64 * t) % modulus;
                }
            }
            let mut best = (corr(&vals), coeffs.clone());
            loop {
                let mut j = 0;
                while j < low {
                    if coeffs[j] + 1 < p {
                        coeffs[j] += 1;
                        for (v, &t) in vals.iter_mut().zip(&tables[j]) {
                            *v = (*v + t) % modulus;
                        }
                        break;
                    }
                    coeffs[j] = 0;
                    let back = (p as u64 - 1) % modulus;
                    for (v, &t) in vals.iter_mut().zip(&tables[j]) {
                        *v = (*v + modulus - back * t % modulus) % modulus;
                    }
                    j += 1;
                }
                if j == low {
                    break;
                }
                let c = corr(&vals);
                if c > best.0 + 1e-12 {
                    best = (c, coeffs.clone());
                }
            }
            best
        });
        let mut best: Option<(f64, Vec<u32>)> = None;
        for r in results {
            if best.as_ref().map_or(true, |b| r.0 > b.0 + 1e-12) {
                best = Some(r);
            }
        }
        best
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best: Option<(f64, Vec<u32>)> = None;
        for _ in 0..budget {
            let coeffs: Vec<u32> = (0..terms.len()).map(|_| rng.gen_range(0..p)).collect();
            let mut vals = vec![0u64; space.size()];
            for (j, &c) in coeffs.iter().enumerate() {
                for (v, &t) in vals.iter_mut().zip(&tables[j]) {
                    *v = (*v + c as u64 * t) % modulus;
                }
            }
            let c = corr(&vals);
            if best.as_ref().map_or(true, |b| c > b.0 + 1e-12) {
                best = Some((c, coeffs));
            }
        }
        best
    };
    let Some((c, coeffs)) = best else { return Ok(None) };
    if c < min_corr || c <= 1e-12 {
        return Ok(None);
    }
    let t: Vec<(Vec<u32>, u32, u32)> =
        terms.iter().zip(&coeffs).filter(|(_, &c)| c != 0).map(|((e, k), &c)| (e.clone(), *k, c)).collect();
    let poly = MonomialRep::new(p, space.n(), crate::field::TorusValue::zero(p, 0), &t)?;
    Ok(Some(Witness { poly, correlation: c, exhaustive }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn caps() -> Caps {
        Caps::default()
    }

    /// `‖f‖_{U^d}^{2^d}` straight from the definition.
    fn brute_power(f: &[Complex64], space: &Space, d: u32) -> f64 {
        let total = space.size().pow(d + 1);
        let mut acc = Complex64::new(0.0, 0.0);
        for t in 0..total {
            let mut r = t;
            let x = r % space.size();
            r /= space.size();
            let hs: Vec<usize> = (0..d).map(|_| { let h = r % space.size(); r /= space.size(); h }).collect();
            let mut prod = Complex64::new(1.0, 0.0);
            for w in 0u32..(1 << d) {
                let mut pt = x;
                for (j, &h) in hs.iter().enumerate() {
                    if w >> j & 1 == 1 {
                        pt = space.add(pt, h);
                    }
                }
                prod *= if w.count_ones() % 2 == 1 { f[pt].conj() } else { f[pt] };
            }
            acc += prod;
        }
        acc.re / total as f64
    }

    #[test]
    fn gowers_examples() {
        let s = Space::new(2, 2).unwrap();
        let ones = vec![Complex64::new(1.0, 0.0); 4];
        assert!((gowers_norm(&ones, &s, 3, Mode::Exact, &caps()).unwrap() - 1.0).abs() < 1e-12);
        let f: Vec<Complex64> = (0..4).map(|x| {
            let d = s.digits(x);
            Complex64::new(if d[0] * d[1] == 1 { -1.0 } else { 1.0 }, 0.0)
        }).collect();
        let u2 = gowers_norm(&f, &s, 2, Mode::Exact, &caps()).unwrap();
        assert!((u2 - 0.5f64.sqrt()).abs() < 1e-9);
        let sampled = gowers_norm(&f, &s, 2, Mode::Sampled { samples: 20000, seed: 1 }, &caps()).unwrap();
        assert!((sampled - u2).abs() < 0.05);
    }

    #[test]
    fn gowers_matches_definition() {
        let s = Space::new(3, 2).unwrap();
        let f: Vec<Complex64> = (0..9).map(|x| Complex64::new((x as f64 * 0.37).sin(), (x as f64 * 0.11).cos())).collect();
        for d in 1..=3 {
            let a = gowers_power_exact(&f, &s, d);
            let b = brute_power(&f, &s, d);
            assert!((a - b).abs() < 1e-9, "d={d}: {a} vs {b}");
        }
    }

    #[test]
    fn analytic_rank_examples() {
        let q = MonomialRep::monomial(2, vec![1], 1, 1).unwrap().value_table(&caps()).unwrap();
        let r = analytic_rank(&q, 2, Mode::Exact, &caps()).unwrap();
        assert_eq!(r, AnalyticRank::Finite(1.0));
        let lin = MonomialRep::monomial(3, vec![1, 0], 0, 1).unwrap().value_table(&caps()).unwrap();
        assert_eq!(analytic_rank(&lin, 1, Mode::Exact, &caps()).unwrap(), AnalyticRank::Infinite);
        let both = MonomialRep::new(2, 2, crate::field::TorusValue::zero(2, 0), &[(vec![1, 0], 1, 1), (vec![0, 1], 1, 1)])
            .unwrap()
            .value_table(&caps())
            .unwrap();
        assert_eq!(analytic_rank(&both, 2, Mode::Exact, &caps()).unwrap(), AnalyticRank::Finite(2.0));
    }

    #[test]
    fn cyclotomic_zero_test() {
        let mut c = CyclotomicSum::new(3, 2);
        for r in [1usize, 4, 7] {
            c.counts[r] = 5;
        }
        assert!(c.is_zero());
        assert!(c.value().norm() < 1e-9);
        c.counts[0] = 1;
        assert!(!c.is_zero());
    }

    #[test]
    fn lambda_examples() {
        let s = Space::new(2, 3).unwrap();
        let l = LinearSystem::new(2, 2, vec![vec![1, 0], vec![0, 1], vec![1, 1]]).unwrap();
        let all = vec![true; 8];
        assert_eq!(lambda_count(&l, &[all.clone(), all.clone(), all], &s, &caps()).unwrap(), (64, 64));
        let mut set = vec![false; 8];
        set[0] = true;
        set[3] = true;
        let (c, t) = lambda_count(&l, &[set.clone(), set.clone(), set.clone()], &s, &caps()).unwrap();
        assert_eq!((c, t), (4, 64));
    }

    #[test]
    fn oracle_linear_is_fourier() {
        let s = Space::new(2, 3).unwrap();
        let f: Vec<Complex64> = (0..8).map(|x| Complex64::new(if x == 5 || x == 6 || x == 0 { 1.0 } else { 0.0 }, 0.0)).collect();
        let w = inverse_oracle(&f, &s, 1, 0.0, 1 << 20, 0, &caps()).unwrap().unwrap();
        let mut best: f64 = 0.0;
        for a in 0..8usize {
            let c: Complex64 = (0..8usize)
                .map(|x| f[x] * if (a & x).count_ones() % 2 == 1 { -1.0 } else { 1.0 })
                .sum::<Complex64>() / 8.0;
            best = best.max(c.norm());
        }
        assert!((w.correlation - best).abs() < 1e-12);
        assert!(w.poly.degree() <= 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn gowers_monotone_and_phases_are_one(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = Space::new(2, 3).unwrap();
            let f: Vec<Complex64> = (0..8).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let mut prev = 0.0;
            for d in 1..=3 {
                let u = gowers_norm(&f, &s, d, Mode::Exact, &caps()).unwrap();
                prop_assert!(u >= prev - 1e-9);
                prev = u;
            }
            let rep = crate::ncpoly::random_rep(2, 3, 3, &mut rng).unwrap();
            let ph = phase_function(&rep.value_table(&caps()).unwrap());
            let u = gowers_norm(&ph, &s, rep.degree() + 1, Mode::Exact, &caps()).unwrap();
            prop_assert!((u - 1.0).abs() < 1e-9);
        }

        #[test]
        fn rank_additive_on_disjoint_copies(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rep = crate::ncpoly::random_rep(2, 2, 2, &mut rng).unwrap();
            let d = rep.degree().max(1);
            let single = analytic_rank(&rep.value_table(&caps()).unwrap(), d, Mode::Exact, &caps()).unwrap();
            let double = rep.shift(0, 4).add(&rep.shift(2, 4), &caps()).unwrap();
            let pair = analytic_rank(&double.value_table(&caps()).unwrap(), d, Mode::Exact, &caps()).unwrap();
            match (single, pair) {
                (AnalyticRank::Infinite, AnalyticRank::Infinite) => {}
                (AnalyticRank::Finite(a), AnalyticRank::Finite(b)) => prop_assert!((2.0 * a - b).abs() < 1e-9),
                other => prop_assert!(false, "{:?}", other),
            }
        }
    }
}
