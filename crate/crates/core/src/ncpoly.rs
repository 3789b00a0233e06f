//! Non-classical polynomials `F_p^n -> R/Z`.
//!
//! A polynomial is stored in its unique monomial form
//! `α + Σ c |x_1|^{i_1} ... |x_n|^{i_n} / p^{k+1}` with `c` in `1..p`,
//! exponents in `0..p` and at least one positive exponent. Value tables
//! hold every value as a residue modulo `p^{depth+1}`.

use std::collections::BTreeMap;

use rand::Rng;

use crate::caps::Caps;
use crate::error::{invalid, shape, HofaError, Result};
use crate::field::{check_prime, inv_mod, max_depth, mul_mod, pow_mod, sigma_fast, teichmuller, valuation, Space, TorusValue};

/// Exponent vector and depth of a monomial term.
pub type TermKey = (Vec<u32>, u32);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MonomialRep {
    p: u32,
    n: usize,
    alpha: TorusValue,
    terms: BTreeMap<TermKey, u32>,
}

impl MonomialRep {
    pub fn new(p: u32, n: usize, alpha: TorusValue, terms: &[(Vec<u32>, u32, u32)]) -> Result<Self> {
        check_prime(p)?;
        if alpha.p != p {
            return shape("alpha lives over a different prime");
        }
        let mut map = BTreeMap::new();
        for (exps, k, c) in terms {
            if exps.len() != n {
                return shape(format!("exponent vector of length {} for n = {n}", exps.len()));
            }
            if exps.iter().any(|&e| e >= p) || exps.iter().all(|&e| e == 0) {
                return invalid(format!("exponents {exps:?} must lie in 0..p with a positive entry"));
            }
            if *k > 20 {
                return invalid("term depth too large");
            }
            let c = c % p;
            if c == 0 {
                continue;
            }
            if map.insert((exps.clone(), *k), c).is_some() {
                return invalid(format!("duplicate term {exps:?} at depth {k}"));
            }
        }
        Ok(MonomialRep { p, n, alpha: alpha.reduced(), terms: map })
    }

    pub fn zero(p: u32, n: usize) -> Result<Self> {
        Self::new(p, n, TorusValue::zero(p, 0), &[])
    }

    /// The single term `c |x|^exps / p^{k+1}`.
    pub fn monomial(p: u32, exps: Vec<u32>, k: u32, c: u32) -> Result<Self> {
        let n = exps.len();
        Self::new(p, n, TorusValue::zero(p, 0), &[(exps, k, c)])
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> TorusValue {
        self.alpha
    }

    pub fn terms(&self) -> impl Iterator<Item = (&TermKey, u32)> {
        self.terms.iter().map(|(k, &c)| (k, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() && self.alpha.residue == 0
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    fn term_degree(&self, key: &TermKey) -> u32 {
        key.0.iter().sum::<u32>() + key.1 * (self.p - 1)
    }

    /// Degree read off the monomial form. Constants have degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|t| self.term_degree(t)).max().unwrap_or(0)
    }

    /// Depth read off the monomial form.
    pub fn depth(&self) -> u32 {
        self.terms.keys().map(|t| t.1).max().unwrap_or(0)
    }

    /// Depth of the value table: large enough to hold every term and `α`.
    pub fn table_depth(&self) -> u32 {
        self.depth().max(self.alpha.depth)
    }

    /// Value at a point given by digits.
    pub fn evaluate(&self, x: &[u32]) -> Result<TorusValue> {
        if x.len() != self.n {
            return shape("point has the wrong dimension");
        }
        let kk = self.table_depth();
        let m = (self.p as u64).pow(kk + 1);
        let mut acc = self.alpha.embed(kk)?.residue;
        for ((exps, k), &c) in &self.terms {
            let mut v = c as u64 * (self.p as u64).pow(kk - k) % m;
            for (&xi, &e) in x.iter().zip(exps) {
                if e > 0 {
                    v = mul_mod(v, pow_mod((xi % self.p) as u64, e as u64, m), m);
                }
            }
            acc = (acc + v) % m;
        }
        Ok(TorusValue { p: self.p, depth: kk, residue: acc })
    }

    pub fn value_table(&self, caps: &Caps) -> Result<ValueTable> {
        let space = Space::new(self.p, self.n)?;
        caps.check_table("value table", space.size() as u128)?;
        let kk = self.table_depth();
        let m = (self.p as u64).pow(kk + 1);
        let base = self.alpha.embed(kk)?.residue;
        let mut values = vec![base; space.size()];
        let mono = monomial_tables(&space, m);
        for ((exps, k), &c) in &self.terms {
            let scale = c as u64 * (self.p as u64).pow(kk - k) % m;
            let t = mono.eval(exps);
            for (v, &tv) in values.iter_mut().zip(&t) {
                *v = (*v + mul_mod(scale, tv, m)) % m;
            }
        }
        Ok(ValueTable { p: self.p, n: self.n, depth: kk, values })
    }

    /// The polynomial on `F_p^{n+extra}` ignoring the new variables.
    pub fn pad(&self, extra: usize) -> Self {
        self.shift(0, self.n + extra)
    }

    /// The polynomial with its variables moved to positions
    /// `offset..offset+n` of an `n_total`-variable space.
    pub fn shift(&self, offset: usize, n_total: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|((e, k), &c)| {
                let mut ex = vec![0; n_total];
                ex[offset..offset + self.n].copy_from_slice(e);
                ((ex, *k), c)
            })
            .collect();
        MonomialRep { p: self.p, n: n_total, alpha: self.alpha, terms }
    }

    /// Sum of two polynomials on the same space, computed through value tables.
    pub fn add(&self, other: &Self, caps: &Caps) -> Result<Self> {
        self.value_table(caps)?.add(&other.value_table(caps)?)?.interpolate()
    }
}

/// Tables of `|x_j|^e` over a space, modulo `m`.
struct MonomialTables<'a> {
    space: &'a Space,
    m: u64,
}

fn monomial_tables(space: &Space, m: u64) -> MonomialTables<'_> {
    MonomialTables { space, m }
}

impl MonomialTables<'_> {
    fn eval(&self, exps: &[u32]) -> Vec<u64> {
        let p = self.space.p();
        let pows: Vec<Vec<u64>> =
            exps.iter().map(|&e| (0..p).map(|x| pow_mod(x as u64, e as u64, self.m)).collect()).collect();
        (0..self.space.size())
            .map(|x| {
                let mut v = 1u64;
                for (j, pw) in pows.iter().enumerate() {
                    if exps[j] > 0 {
                        v = mul_mod(v, pw[self.space.digit(x, j) as usize], self.m);
                        if v == 0 {
                            break;
                        }
                    }
                }
                v
            })
            .collect()
    }
}

/// Values of a function `F_p^n -> U_{depth+1}` as residues mod `p^{depth+1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ValueTable {
    pub p: u32,
    pub n: usize,
    pub depth: u32,
    pub values: Vec<u64>,
}

impl ValueTable {
    pub fn new(p: u32, n: usize, depth: u32, values: Vec<u64>) -> Result<Self> {
        let space = Space::new(p, n)?;
        if values.len() != space.size() {
            return shape(format!("table of length {} for p^n = {}", values.len(), space.size()));
        }
        let m = (p as u64).pow(depth + 1);
        if values.iter().any(|&v| v >= m) {
            return invalid("table value out of range");
        }
        Ok(ValueTable { p, n, depth, values })
    }

    pub fn space(&self) -> Space {
        Space::new(self.p, self.n).expect("validated at construction")
    }

    pub fn modulus(&self) -> u64 {
        (self.p as u64).pow(self.depth + 1)
    }

    pub fn get(&self, x: usize) -> TorusValue {
        TorusValue { p: self.p, depth: self.depth, residue: self.values[x] }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0)
    }

    /// Same values at a larger depth.
    pub fn embed(&self, depth: u32) -> Result<Self> {
        if depth < self.depth {
            return invalid("cannot embed into a smaller depth");
        }
        let f = (self.p as u64).pow(depth - self.depth);
        Ok(ValueTable { depth, values: self.values.iter().map(|v| v * f).collect(), ..self.clone() })
    }

    /// Same values at the smallest depth that holds all of them.
    pub fn reduced(&self) -> Self {
        let v = self.values.iter().map(|&x| valuation(x, self.p, self.depth + 1)).min().unwrap_or(0);
        let v = v.min(self.depth);
        let f = (self.p as u64).pow(v);
        ValueTable { depth: self.depth - v, values: self.values.iter().map(|x| x / f).collect(), ..self.clone() }
    }

    fn aligned(&self, other: &Self) -> Result<(Self, Self)> {
        if self.p != other.p || self.n != other.n {
            return shape("value tables over different spaces");
        }
        let d = self.depth.max(other.depth);
        Ok((self.embed(d)?, other.embed(d)?))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let (a, b) = self.aligned(other)?;
        let m = a.modulus();
        let values = a.values.iter().zip(&b.values).map(|(x, y)| (x + y) % m).collect();
        Ok(ValueTable { values, ..a })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.zmul(-1))
    }

    pub fn zmul(&self, z: i64) -> Self {
        let m = self.modulus() as i128;
        ValueTable {
            values: self.values.iter().map(|&v| (v as i128 * z as i128).rem_euclid(m) as u64).collect(),
            ..self.clone()
        }
    }

    /// `(D_h P)(x) = P(x+h) - P(x)`.
    pub fn derivative(&self, h: usize) -> Self {
        let s = self.space();
        let m = self.modulus();
        let values = (0..s.size()).map(|x| (self.values[s.add(x, h)] + m - self.values[x]) % m).collect();
        ValueTable { values, ..self.clone() }
    }

    /// `x -> P(c x)`.
    pub fn dilate(&self, c: u32) -> Self {
        let s = self.space();
        ValueTable { values: (0..s.size()).map(|x| self.values[s.scale(c, x)]).collect(), ..self.clone() }
    }

    /// `y -> P(base + Σ y_j basis_j)` on `F_p^{basis.len()}`.
    pub fn restrict(&self, basis: &[usize], base: usize) -> Result<Self> {
        let s = self.space();
        let sub = Space::new(self.p, basis.len())?;
        let values = (0..sub.size())
            .map(|y| {
                let pt = s.add(base, s.combine(&sub.digits(y), basis));
                self.values[pt]
            })
            .collect();
        Ok(ValueTable { n: basis.len(), values, ..self.clone() })
    }

    /// Degree and depth computed from derivatives alone.
    ///
    /// The degree is the largest `t` for which some `t`-fold derivative is
    /// nonzero. Since `h -> D_h g` vanishes on a subgroup, checking
    /// derivatives along basis vectors suffices.
    pub fn degree_depth(&self, caps: &Caps) -> Result<(u32, u32)> {
        let s = self.space();
        caps.check_table("degree computation", s.size() as u128)?;
        let base = self.values[0];
        let m = self.modulus();
        let min_val = self
            .values
            .iter()
            .map(|&v| valuation((v + m - base) % m, self.p, self.depth + 1))
            .min()
            .unwrap_or(self.depth + 1);
        let depth = self.depth.saturating_sub(min_val);
        let mut best = 0u32;
        let mut steps: u128 = 0;
        let mut stack: Vec<(ValueTable, usize, u32)> = vec![(self.clone(), 0, 0)];
        while let Some((g, first, level)) = stack.pop() {
            for j in first..self.n {
                let dg = g.derivative(s.basis(j));
                steps += s.size() as u128;
                caps.check_enum("degree computation", steps)?;
                if !dg.is_zero() {
                    best = best.max(level + 1);
                    stack.push((dg, j, level + 1));
                }
            }
        }
        Ok((best, depth))
    }

    /// The unique monomial form of the table.
    pub fn interpolate(&self) -> Result<MonomialRep> {
        let s = self.space();
        let p = self.p;
        let kk = self.depth;
        let alpha = TorusValue { p, depth: kk, residue: self.values[0] };
        let mut m = self.modulus();
        let mut num: Vec<u64> = self.values.iter().map(|&v| (v + m - self.values[0]) % m).collect();
        let vinv = vandermonde_inverse(p);
        let mut terms = Vec::new();
        for k in (0..=kk).rev() {
            let low: Vec<u32> = num.iter().map(|&v| (v % p as u64) as u32).collect();
            let coeffs = interpolate_fp(&low, &s, &vinv);
            let mut sub = vec![0u64; s.size()];
            let mono = monomial_tables(&s, m);
            for (idx, &c) in coeffs.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let exps = s.digits(idx);
                if exps.iter().all(|&e| e == 0) {
                    return Err(HofaError::Internal("constant term after removing alpha".into()));
                }
                let t = mono.eval(&exps);
                for (acc, tv) in sub.iter_mut().zip(t) {
                    *acc = (*acc + mul_mod(c as u64, tv, m)) % m;
                }
                terms.push((exps, k, c));
            }
            for (v, sv) in num.iter_mut().zip(&sub) {
                let diff = (*v + m - sv) % m;
                debug_assert_eq!(diff % p as u64, 0);
                *v = diff / p as u64;
            }
            m /= p as u64;
        }
        if num.iter().any(|&v| v != 0) {
            return Err(HofaError::Internal("interpolation left a remainder".into()));
        }
        MonomialRep::new(p, self.n, alpha, &terms)
    }
}

/// Inverse of the matrix `V[x][e] = x^e` over `F_p`, `0^0 = 1`.
fn vandermonde_inverse(p: u32) -> Vec<Vec<u32>> {
    let pu = p as usize;
    let mut a: Vec<Vec<u64>> = (0..pu)
        .map(|x| {
            let mut row: Vec<u64> = (0..pu).map(|e| pow_mod(x as u64, e as u64, p as u64)).collect();
            if x == 0 {
                row[0] = 1;
            }
            row.extend((0..pu).map(|j| (j == x) as u64));
            row
        })
        .collect();
    let p64 = p as u64;
    for c in 0..pu {
        let piv = (c..pu).find(|&r| a[r][c] != 0).expect("Vandermonde matrix is invertible");
        a.swap(c, piv);
        let inv = inv_mod(a[c][c], p64).unwrap();
        for x in a[c].iter_mut() {
            *x = *x * inv % p64;
        }
        for r in 0..pu {
            if r != c && a[r][c] != 0 {
                let f = a[r][c];
                for j in 0..2 * pu {
                    a[r][j] = (a[r][j] + p64 - f * a[c][j] % p64) % p64;
                }
            }
        }
    }
    a.iter().map(|row| row[pu..].iter().map(|&v| v as u32).collect()).collect()
}

/// Reduced-monomial coefficients of `f: F_p^n -> F_p`, indexed like points
/// (the coefficient of `Π x_j^{e_j}` sits at the index with digits `e`).
fn interpolate_fp(f: &[u32], s: &Space, vinv: &[Vec<u32>]) -> Vec<u32> {
    let p = s.p() as usize;
    let mut a: Vec<u32> = f.to_vec();
    for j in 0..s.n() {
        let stride = s.basis(j);
        let mut out = vec![0u32; a.len()];
        for idx in 0..a.len() {
            if (idx / stride) % p != 0 {
                continue;
            }
            for e in 0..p {
                let mut acc = 0u64;
                for x in 0..p {
                    acc += vinv[e][x] as u64 * a[idx + x * stride] as u64;
                }
                out[idx + e * stride] = (acc % p as u64) as u32;
            }
        }
        a = out;
    }
    a
}

/// A polynomial with `P(bx) = σ_b^{(d,k)} P(x)` for every nonzero `b`,
/// together with its degree `d` and depth `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HomogeneousPoly {
    pub rep: MonomialRep,
    pub d: u32,
    pub k: u32,
}

impl HomogeneousPoly {
    /// Certifies homogeneity by exhaustive check.
    pub fn new(rep: MonomialRep, caps: &Caps) -> Result<Self> {
        if !is_homogeneous(&rep, caps)? {
            return invalid("polynomial is not homogeneous");
        }
        let (d, k) = (rep.degree(), rep.depth());
        Ok(HomogeneousPoly { rep, d, k })
    }
}

/// Exhaustive homogeneity check over all nonzero `b`.
pub fn is_homogeneous(rep: &MonomialRep, caps: &Caps) -> Result<bool> {
    let t = rep.value_table(caps)?;
    Ok(table_is_homogeneous(&t, rep.degree()))
}

/// Checks `P(bx) = ω(b)^d P(x)` with `ω` the Teichmüller lift at the table depth.
pub fn table_is_homogeneous(t: &ValueTable, d: u32) -> bool {
    let m = t.modulus();
    for b in 2..t.p {
        let sig = sigma_fast(t.p, b, d, t.depth);
        let tb = t.dilate(b);
        if tb.values.iter().zip(&t.values).any(|(&x, &y)| x != mul_mod(sig, y, m)) {
            return false;
        }
    }
    true
}

/// Character component `(p-1)^{-1} Σ_b ω(b)^{-j} P(b·)` of a table.
pub fn character_component(t: &ValueTable, j: u32) -> ValueTable {
    let p = t.p;
    let m = t.modulus();
    let e = t.depth + 1;
    let mut acc = vec![0u64; t.values.len()];
    for b in 1..p {
        let binv = inv_mod(b as u64, p as u64).unwrap() as u32;
        let w = pow_mod(teichmuller(p, binv, e), j as u64, m);
        let tb = t.dilate(b);
        for (a, &v) in acc.iter_mut().zip(&tb.values) {
            *a = (*a + mul_mod(w, v, m)) % m;
        }
    }
    let inv = inv_mod((p - 1) as u64, m).unwrap();
    ValueTable { values: acc.iter().map(|&v| mul_mod(v, inv, m)).collect(), ..t.clone() }
}

/// Splits `P` into homogeneous parts whose pointwise sum is `P`.
///
/// Parts are the character components of `P - P(0)`, each further split by
/// term degree and depth when every such group is homogeneous on its own,
/// plus a degree-0 part for a nonzero constant. Parts are sorted by
/// `(d, k)`.
pub fn homogeneous_decomposition(rep: &MonomialRep, caps: &Caps) -> Result<Vec<HomogeneousPoly>> {
    let p = rep.p;
    let t = rep.value_table(caps)?;
    let m = t.modulus();
    let base = t.values[0];
    let q = ValueTable { values: t.values.iter().map(|&v| (v + m - base) % m).collect(), ..t.clone() };
    let mut parts = Vec::new();
    if rep.alpha.residue != 0 {
        let c = MonomialRep::new(p, rep.n, rep.alpha, &[])?;
        parts.push(HomogeneousPoly { rep: c, d: 0, k: 0 });
    }
    for j in 0..(p - 1) {
        let comp = character_component(&q, j);
        if comp.is_zero() {
            continue;
        }
        let crep = comp.interpolate()?;
        let mut groups: BTreeMap<(u32, u32), Vec<(Vec<u32>, u32, u32)>> = BTreeMap::new();
        for ((e, k), c) in crep.terms() {
            groups.entry((crep.term_degree(&(e.clone(), *k)), *k)).or_default().push((e.clone(), *k, c));
        }
        let mut split = Vec::new();
        let mut ok = true;
        for terms in groups.values() {
            let g = MonomialRep::new(p, rep.n, TorusValue::zero(p, 0), terms)?;
            if !is_homogeneous(&g, caps)? {
                ok = false;
                break;
            }
            split.push(g);
        }
        let chosen = if ok { split } else { vec![crep] };
        for g in chosen {
            let (d, k) = (g.degree(), g.depth());
            if !is_homogeneous(&g, caps)? {
                return Err(HofaError::Internal("character component is not homogeneous".into()));
            }
            parts.push(HomogeneousPoly { rep: g, d, k });
        }
    }
    parts.sort_by(|a, b| (a.d, a.k).cmp(&(b.d, b.k)).then_with(|| a.rep.terms.cmp(&b.rep.terms)));
    Ok(parts)
}

/// Homogeneous polynomial of exact degree `d` and depth `k` built from the
/// seed `|x_1|^{p-1} ... |x_a|^{p-1} |x_{a+1}|^b / p^{k+1}` with
/// `d = (k+a)(p-1) + b`, `b` in `1..p`. Lives on `F_p^{a+1}`.
pub fn seed_homogeneous(p: u32, d: u32, k: u32, caps: &Caps) -> Result<HomogeneousPoly> {
    check_prime(p)?;
    if d == 0 || k > max_depth(p, d) {
        return invalid(format!("({d},{k}) is not admissible for p = {p}"));
    }
    let rest = d - k * (p - 1);
    let a = (rest - 1) / (p - 1);
    let b = rest - a * (p - 1);
    let mut exps = vec![p - 1; a as usize];
    exps.push(b);
    let seed = MonomialRep::monomial(p, exps, k, 1)?;
    let t = seed.value_table(caps)?;
    let comp = character_component(&t, d % (p - 1)).reduced();
    let rep = comp.interpolate()?;
    if rep.degree() != d || rep.depth() != k || !table_is_homogeneous(&rep.value_table(caps)?, d) {
        return Err(HofaError::Internal(format!("seed construction failed for ({d},{k})")));
    }
    Ok(HomogeneousPoly { rep, d, k })
}

/// The univariate homogeneous polynomial `P_{d,k}`: depth `k` and degree
/// `k(p-1) + i` where `i` in `1..p` is congruent to `d` mod `p-1`.
pub fn univariate_homogeneous(p: u32, d: u32, k: u32, caps: &Caps) -> Result<HomogeneousPoly> {
    check_prime(p)?;
    if d == 0 || k > max_depth(p, d) {
        return invalid(format!("({d},{k}) is not admissible for p = {p}"));
    }
    let i = (d - 1) % (p - 1) + 1;
    seed_homogeneous(p, k * (p - 1) + i, k, caps)
}

/// A random monomial form with degree at most `d_max`.
pub fn random_rep<R: Rng>(p: u32, n: usize, d_max: u32, rng: &mut R) -> Result<MonomialRep> {
    let space = Space::new(p, n)?;
    let mut terms = Vec::new();
    for idx in 1..space.size() {
        let exps = space.digits(idx);
        let s: u32 = exps.iter().sum();
        for k in 0..=max_depth(p, d_max.max(1)) {
            if s + k * (p - 1) <= d_max && rng.gen_bool(0.5) {
                terms.push((exps.clone(), k, rng.gen_range(1..p)));
            }
        }
    }
    let depth = rng.gen_range(0..=max_depth(p, d_max.max(1)));
    let alpha = TorusValue { p, depth, residue: rng.gen_range(0..(p as u64).pow(depth + 1)) };
    MonomialRep::new(p, n, alpha, &terms)
}
