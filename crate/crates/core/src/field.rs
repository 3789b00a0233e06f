//! Scalars, vectors and torus values.
//!
//! Points of `F_p^n` are stored as indices in `0..p^n` using little-endian
//! base-p digits, so `x_1` is the least significant digit.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, shape, HofaError, Result};

/// Largest supported characteristic.
pub const MAX_P: u32 = 251;

pub fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let mut q = 2;
    while q * q <= p {
        if p % q == 0 {
            return false;
        }
        q += 1;
    }
    true
}

pub fn check_prime(p: u32) -> Result<()> {
    if !is_prime(p) || p > MAX_P {
        return invalid(format!("p = {p} is not a supported prime"));
    }
    Ok(())
}

/// `a^e mod m`.
pub fn pow_mod(mut a: u64, mut e: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    a %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, a, m);
        }
        a = mul_mod(a, a, m);
        e >>= 1;
    }
    acc
}

pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

/// Inverse of a unit modulo `m`.
pub fn inv_mod(a: u64, m: u64) -> Option<u64> {
    let (mut r0, mut r1) = (m as i128, (a % m) as i128);
    let (mut s0, mut s1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    if r0 != 1 {
        return None;
    }
    Some(s0.rem_euclid(m as i128) as u64)
}

/// `p^e` with overflow reported as an error.
pub fn ppow(p: u32, e: u32) -> Result<u64> {
    (p as u64)
        .checked_pow(e)
        .ok_or_else(|| HofaError::InvalidParameter(format!("{p}^{e} overflows")))
}

/// p-adic valuation of a nonzero residue, or `cap` for zero.
pub fn valuation(x: u64, p: u32, cap: u32) -> u32 {
    if x == 0 {
        return cap;
    }
    let mut v = 0;
    let mut y = x;
    while y % p as u64 == 0 {
        y /= p as u64;
        v += 1;
    }
    v.min(cap)
}

/// The space `F_p^n` with points encoded as indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Space {
    p: u32,
    n: usize,
    size: usize,
    pw: Vec<usize>,
}

impl Space {
    pub fn new(p: u32, n: usize) -> Result<Self> {
        check_prime(p)?;
        let mut pw = Vec::with_capacity(n + 1);
        let mut acc: usize = 1;
        pw.push(1);
        for _ in 0..n {
            acc = acc
                .checked_mul(p as usize)
                .filter(|&s| s as u64 <= 1 << 40)
                .ok_or_else(|| HofaError::InvalidParameter(format!("F_{p}^{n} is too large")))?;
            pw.push(acc);
        }
        Ok(Space { p, n, size: acc, pw })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn digit(&self, x: usize, j: usize) -> u32 {
        ((x / self.pw[j]) % self.p as usize) as u32
    }

    pub fn digits(&self, x: usize) -> Vec<u32> {
        (0..self.n).map(|j| self.digit(x, j)).collect()
    }

    pub fn index(&self, digits: &[u32]) -> usize {
        digits.iter().enumerate().map(|(j, &d)| (d % self.p) as usize * self.pw[j]).sum()
    }

    /// Basis vector `e_j`.
    pub fn basis(&self, j: usize) -> usize {
        self.pw[j]
    }

    pub fn add(&self, a: usize, b: usize) -> usize {
        if self.p == 2 {
            return a ^ b;
        }
        let p = self.p as usize;
        let (mut a, mut b) = (a, b);
        let mut out = 0;
        for j in 0..self.n {
            let s = (a % p + b % p) % p;
            out += s * self.pw[j];
            a /= p;
            b /= p;
        }
        out
    }

    pub fn neg(&self, a: usize) -> usize {
        self.scale(self.p - 1, a)
    }

    pub fn sub(&self, a: usize, b: usize) -> usize {
        self.add(a, self.neg(b))
    }

    pub fn scale(&self, c: u32, a: usize) -> usize {
        let c = (c % self.p) as usize;
        if c == 1 {
            return a;
        }
        if c == 0 {
            return 0;
        }
        let p = self.p as usize;
        let mut a = a;
        let mut out = 0;
        for j in 0..self.n {
            out += (a % p) * c % p * self.pw[j];
            a /= p;
        }
        out
    }

    /// `Σ c_j v_j` over the given coefficient/point pairs.
    pub fn combine(&self, coeffs: &[u32], points: &[usize]) -> usize {
        let mut acc = 0;
        for (&c, &v) in coeffs.iter().zip(points) {
            if c % self.p != 0 {
                acc = self.add(acc, self.scale(c, v));
            }
        }
        acc
    }

    /// Value of the first nonzero coordinate, 0 for the origin.
    pub fn fnz(&self, x: usize) -> u32 {
        (0..self.n).map(|j| self.digit(x, j)).find(|&d| d != 0).unwrap_or(0)
    }
}

/// A scalar of `F_p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FpScalar {
    pub p: u32,
    pub value: u32,
}

impl FpScalar {
    pub fn new(p: u32, value: u32) -> Result<Self> {
        check_prime(p)?;
        Ok(FpScalar { p, value: value % p })
    }

    pub fn add(self, o: Self) -> Self {
        FpScalar { p: self.p, value: (self.value + o.value) % self.p }
    }

    pub fn mul(self, o: Self) -> Self {
        FpScalar { p: self.p, value: ((self.value as u64 * o.value as u64) % self.p as u64) as u32 }
    }

    pub fn inv(self) -> Option<Self> {
        inv_mod(self.value as u64, self.p as u64).map(|v| FpScalar { p: self.p, value: v as u32 })
    }

    /// The canonical lift `|x|` in `{0, ..., p-1}`.
    pub fn lift(self) -> u32 {
        self.value
    }
}

/// An element of `U_{k+1} = (1/p^{k+1}) Z / Z`, stored as `residue / p^{depth+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TorusValue {
    pub p: u32,
    pub depth: u32,
    pub residue: u64,
}

impl TorusValue {
    pub fn new(p: u32, depth: u32, residue: u64) -> Result<Self> {
        check_prime(p)?;
        let m = ppow(p, depth + 1)?;
        if residue >= m {
            return invalid(format!("residue {residue} out of range for depth {depth}"));
        }
        Ok(TorusValue { p, depth, residue })
    }

    pub fn zero(p: u32, depth: u32) -> Self {
        TorusValue { p, depth, residue: 0 }
    }

    pub fn modulus(&self) -> u64 {
        (self.p as u64).pow(self.depth + 1)
    }

    fn same(&self, o: &Self) -> Result<()> {
        if self.p != o.p || self.depth != o.depth {
            return shape(format!(
                "torus values at (p={}, depth={}) and (p={}, depth={})",
                self.p, self.depth, o.p, o.depth
            ));
        }
        Ok(())
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.same(o)?;
        Ok(TorusValue { residue: (self.residue + o.residue) % self.modulus(), ..*self })
    }

    pub fn neg(&self) -> Self {
        let m = self.modulus();
        TorusValue { residue: (m - self.residue) % m, ..*self }
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.add(&o.neg())
    }

    /// Integer multiple.
    pub fn zmul(&self, z: i64) -> Self {
        let m = self.modulus() as i128;
        let r = (self.residue as i128 * z as i128).rem_euclid(m);
        TorusValue { residue: r as u64, ..*self }
    }

    /// The same value viewed at a larger depth.
    pub fn embed(&self, depth: u32) -> Result<Self> {
        if depth < self.depth {
            return invalid("cannot embed into a smaller depth");
        }
        let f = (self.p as u64).pow(depth - self.depth);
        Ok(TorusValue { p: self.p, depth, residue: self.residue * f })
    }

    /// Smallest depth at which the value is representable.
    pub fn reduced(&self) -> Self {
        let mut t = *self;
        while t.depth > 0 && t.residue % t.p as u64 == 0 {
            t.residue /= t.p as u64;
            t.depth -= 1;
        }
        t
    }

    pub fn to_f64(&self) -> f64 {
        self.residue as f64 / self.modulus() as f64
    }
}

impl std::fmt::Display for TorusValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.residue, self.modulus())
    }
}

/// `floor((d-1)/(p-1))`, the largest admissible depth for degree `d`.
pub fn max_depth(p: u32, d: u32) -> u32 {
    (d.max(1) - 1) / (p - 1)
}

pub fn in_dp(p: u32, d: u32, k: u32) -> bool {
    d > 0 && k <= max_depth(p, d)
}

/// The Teichmüller lift of `b` in `Z/p^e`: the unique `(p-1)`-th root of
/// unity congruent to `b` modulo `p`.
pub fn teichmuller(p: u32, b: u32, e: u32) -> u64 {
    let m = (p as u64).pow(e);
    pow_mod(b as u64 % p as u64, (p as u64).pow(e - 1), m)
}

/// `σ_b^{(d,k)}` found by enumerating `Z/p^{k+1}`.
///
/// Fails if `(d,k)` is not admissible, `b` is zero, or the search does not
/// produce exactly one element.
pub fn sigma(p: u32, b: u32, d: u32, k: u32) -> Result<u64> {
    check_prime(p)?;
    if !in_dp(p, d, k) {
        return invalid(format!("({d},{k}) is not an admissible degree/depth pair for p = {p}"));
    }
    if b % p == 0 {
        return invalid("sigma is defined for nonzero b only");
    }
    let m = ppow(p, k + 1)?;
    let target = pow_mod(b as u64, d as u64, p as u64);
    let mut found = None;
    for s in 0..m {
        if s % p as u64 == target && pow_mod(s, (p - 1) as u64, m) == 1 {
            if found.is_some() {
                return Err(HofaError::Internal(format!("sigma({b},{d},{k}) is not unique")));
            }
            found = Some(s);
        }
    }
    found.ok_or_else(|| HofaError::Internal(format!("sigma({b},{d},{k}) does not exist")))
}

/// `σ_b^{(d,k)}` computed from the Teichmüller lift. Also accepts `d = 0`,
/// where the multiplier is 1.
pub fn sigma_fast(p: u32, b: u32, d: u32, k: u32) -> u64 {
    let m = (p as u64).pow(k + 1);
    pow_mod(teichmuller(p, b, k + 1), d as u64, m)
}

/// Multiplicity table `I_{d,k}` over admissible pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParameterList {
    p: u32,
    map: BTreeMap<(u32, u32), u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ParamEntry {
    pub d: u32,
    pub k: u32,
    pub count: u32,
}

impl ParameterList {
    pub fn empty(p: u32) -> Result<Self> {
        check_prime(p)?;
        Ok(ParameterList { p, map: BTreeMap::new() })
    }

    pub fn new(p: u32, entries: &[(u32, u32, u32)]) -> Result<Self> {
        let mut out = Self::empty(p)?;
        for &(d, k, c) in entries {
            out.push(d, k, c)?;
        }
        Ok(out)
    }

    /// Adds `count` slots at `(d,k)`.
    pub fn push(&mut self, d: u32, k: u32, count: u32) -> Result<()> {
        if !in_dp(self.p, d, k) {
            return invalid(format!("({d},{k}) is not admissible for p = {}", self.p));
        }
        if count > 0 {
            *self.map.entry((d, k)).or_insert(0) += count;
        }
        Ok(())
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn get(&self, d: u32, k: u32) -> u32 {
        self.map.get(&(d, k)).copied().unwrap_or(0)
    }

    pub fn keys(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.map.keys().copied()
    }

    pub fn entries(&self) -> Vec<ParamEntry> {
        self.map.iter().map(|(&(d, k), &count)| ParamEntry { d, k, count }).collect()
    }

    pub fn from_entries(p: u32, entries: &[ParamEntry]) -> Result<Self> {
        let mut out = Self::empty(p)?;
        for e in entries {
            out.push(e.d, e.k, e.count)?;
        }
        Ok(out)
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Largest `d` with a nonzero entry, 0 when empty.
    pub fn degree(&self) -> u32 {
        self.map.keys().map(|&(d, _)| d).max().unwrap_or(0)
    }

    /// `log_p ‖I‖ = Σ (k+1) I_{d,k}`.
    pub fn log_norm(&self) -> u64 {
        self.map.iter().map(|(&(_, k), &c)| (k as u64 + 1) * c as u64).sum()
    }

    /// `‖I‖`, saturating.
    pub fn norm(&self) -> u128 {
        crate::caps::pow_sat(self.p as u64, self.log_norm())
    }

    /// Slots in atom order: `(d,k)` ascending, then slot number.
    pub fn slots(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for (&(d, k), &c) in &self.map {
            for _ in 0..c {
                out.push((d, k));
            }
        }
        out
    }

    pub fn num_slots(&self) -> usize {
        self.map.values().map(|&c| c as usize).sum()
    }

    pub fn slot_moduli(&self) -> Vec<u64> {
        self.slots().iter().map(|&(_, k)| (self.p as u64).pow(k + 1)).collect()
    }

    /// Componentwise `≤`.
    pub fn le(&self, other: &Self) -> bool {
        self.p == other.p && self.map.iter().all(|(&key, &c)| other.map.get(&key).copied().unwrap_or(0) >= c)
    }

    pub fn sum(&self, other: &Self) -> Result<Self> {
        if self.p != other.p {
            return shape("parameter lists over different primes");
        }
        let mut out = self.clone();
        for (&(d, k), &c) in &other.map {
            out.push(d, k, c)?;
        }
        Ok(out)
    }

    /// For each slot of `self`, its position among the slots of `finer`.
    pub fn embedding_into(&self, finer: &Self) -> Result<Vec<usize>> {
        if !self.le(finer) {
            return shape("parameter list is not dominated by the finer list");
        }
        let mut out = Vec::with_capacity(self.num_slots());
        let mut offset = 0;
        for (&key, &c) in &finer.map {
            for i in 0..self.get(key.0, key.1) as usize {
                out.push(offset + i);
            }
            offset += c as usize;
        }
        Ok(out)
    }

    /// Mixed-radix code of an atom, first slot most significant.
    pub fn atom_code(&self, a: &AtomIndex) -> u128 {
        let moduli = self.slot_moduli();
        let mut code: u128 = 0;
        for (r, m) in a.entries.iter().zip(moduli) {
            code = code * m as u128 + *r as u128;
        }
        code
    }

    pub fn atom_decode(&self, mut code: u128) -> AtomIndex {
        let moduli = self.slot_moduli();
        let mut entries = vec![0u64; moduli.len()];
        for i in (0..moduli.len()).rev() {
            entries[i] = (code % moduli[i] as u128) as u64;
            code /= moduli[i] as u128;
        }
        AtomIndex { entries }
    }

    /// All atoms in enumeration order.
    pub fn atoms(&self, caps: &crate::Caps) -> Result<Vec<AtomIndex>> {
        let n = self.norm();
        caps.check_elements("atom enumeration", n)?;
        Ok((0..n).map(|c| self.atom_decode(c)).collect())
    }

    pub fn check_atom(&self, a: &AtomIndex) -> Result<()> {
        let moduli = self.slot_moduli();
        if a.entries.len() != moduli.len() || a.entries.iter().zip(&moduli).any(|(r, m)| r >= m) {
            return shape("atom does not match parameter list");
        }
        Ok(())
    }

    /// `π_{I' → I}`: keeps the first `I_{d,k}` slots of every group.
    pub fn project(&self, finer: &Self, a: &AtomIndex) -> Result<AtomIndex> {
        finer.check_atom(a)?;
        let emb = self.embedding_into(finer)?;
        Ok(AtomIndex { entries: emb.iter().map(|&i| a.entries[i]).collect() })
    }

    /// The action `c · a`, multiplying each slot by `σ_c^{(d,k)}`.
    pub fn act(&self, c: u32, a: &AtomIndex) -> Result<AtomIndex> {
        self.check_atom(a)?;
        if c % self.p == 0 {
            return invalid("action is defined for nonzero scalars");
        }
        let slots = self.slots();
        let entries = a
            .entries
            .iter()
            .zip(&slots)
            .map(|(&r, &(d, k))| {
                let m = (self.p as u64).pow(k + 1);
                mul_mod(r, sigma_fast(self.p, c, d, k), m)
            })
            .collect();
        Ok(AtomIndex { entries })
    }

    /// Torus value of slot `s` of an atom.
    pub fn slot_value(&self, a: &AtomIndex, s: usize) -> TorusValue {
        let (_, k) = self.slots()[s];
        TorusValue { p: self.p, depth: k, residue: a.entries[s] }
    }

    pub fn serialize_entries(&self) -> Vec<ParamEntry> {
        self.entries()
    }
}

/// A point of `A_I`: one residue per slot, slot `s` living in `Z/p^{k_s+1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AtomIndex {
    pub entries: Vec<u64>,
}

impl AtomIndex {
    pub fn new(entries: Vec<u64>) -> Self {
        AtomIndex { entries }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma(2, 1, 1, 0).unwrap(), 1);
        assert_eq!(sigma(3, 2, 1, 0).unwrap(), 2);
        assert_eq!(sigma(3, 2, 3, 1).unwrap(), 8);
        assert!(sigma(3, 1, 1, 1).is_err());
    }

    #[test]
    fn sigma_matches_teichmuller() {
        for p in [2u32, 3, 5, 7] {
            for d in 1..=9 {
                for k in 0..=max_depth(p, d) {
                    for b in 1..p {
                        assert_eq!(sigma(p, b, d, k).unwrap(), sigma_fast(p, b, d, k), "p={p} b={b} d={d} k={k}");
                    }
                }
            }
        }
    }

    #[test]
    fn parameter_list_basics() {
        let i = ParameterList::new(3, &[(1, 0, 2), (3, 1, 1)]).unwrap();
        assert_eq!(i.norm(), 81);
        assert_eq!(i.degree(), 3);
        assert_eq!(ParameterList::empty(3).unwrap().norm(), 1);
        assert_eq!(ParameterList::empty(3).unwrap().degree(), 0);
        assert!(ParameterList::new(3, &[(1, 1, 1)]).is_err());
        assert!(ParameterList::new(2, &[(0, 0, 1)]).is_err());
        let j = ParameterList::new(3, &[(1, 0, 3), (2, 0, 1), (3, 1, 1)]).unwrap();
        assert!(i.le(&j));
        assert!(!j.le(&i));
    }

    #[test]
    fn atom_examples() {
        let i = ParameterList::new(3, &[(1, 0, 1)]).unwrap();
        let a = i.act(2, &AtomIndex::new(vec![1])).unwrap();
        assert_eq!(a.entries, vec![2]);
        let j = ParameterList::new(3, &[(1, 0, 1), (2, 0, 1)]).unwrap();
        assert_eq!(i.project(&j, &AtomIndex::new(vec![1, 2])).unwrap().entries, vec![1]);
        let j2 = ParameterList::new(3, &[(1, 0, 1), (3, 1, 1)]).unwrap();
        let b = j2.act(2, &AtomIndex::new(vec![1, 1])).unwrap();
        assert_eq!(b.entries, vec![2, 8]);
    }

    #[test]
    fn space_fnz() {
        let s = Space::new(3, 3).unwrap();
        assert_eq!(s.fnz(s.index(&[0, 2, 1])), 2);
        assert_eq!(s.fnz(0), 0);
    }

    #[test]
    fn torus_embedding() {
        let t = TorusValue::new(2, 0, 1).unwrap();
        let e = t.embed(1).unwrap();
        assert_eq!(e.residue, 2);
        assert_eq!(e.reduced(), t);
        assert!(t.add(&e).is_err());
    }

    fn arb_params(p: u32) -> impl Strategy<Value = ParameterList> {
        proptest::collection::vec((1u32..6, 0u32..3, 0u32..3), 0..4).prop_map(move |v| {
            let mut out = ParameterList::empty(p).unwrap();
            for (d, k, c) in v {
                let k = k.min(max_depth(p, d));
                out.push(d, k, c).unwrap();
            }
            out
        })
    }

    proptest! {
        #[test]
        fn sigma_multiplicative(b in 1u32..5, c in 1u32..5, d in 1u32..9) {
            let p = 5;
            for k in 0..=max_depth(p, d) {
                let m = 5u64.pow(k + 1);
                let lhs = sigma(p, b * c % p, d, k).unwrap();
                let rhs = mul_mod(sigma(p, b, d, k).unwrap(), sigma(p, c, d, k).unwrap(), m);
                prop_assert_eq!(lhs, rhs);
                if in_dp(p, d + 4, k) {
                    prop_assert_eq!(sigma(p, b, d + 4, k).unwrap(), sigma(p, b, d, k).unwrap());
                }
            }
        }

        #[test]
        fn action_composes(params in arb_params(3), b in 1u32..3, c in 1u32..3, seed in any::<u64>()) {
            let n = params.norm();
            prop_assume!(n > 0 && n < 1 << 20);
            let a = params.atom_decode(seed as u128 % n);
            let lhs = params.act(b * c % 3, &a).unwrap();
            let rhs = params.act(b, &params.act(c, &a).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
            prop_assert_eq!(params.act(1, &a).unwrap(), a.clone());
            prop_assert_eq!(params.atom_decode(params.atom_code(&a)), a);
        }

        #[test]
        fn projection_commutes_with_action(base in arb_params(3), extra in arb_params(3), b in 1u32..3, seed in any::<u64>()) {
            let finer = base.sum(&extra).unwrap();
            let n = finer.norm();
            prop_assume!(n < 1 << 40);
            let a = finer.atom_decode(seed as u128 % n);
            let lhs = base.project(&finer, &finer.act(b, &a).unwrap()).unwrap();
            let rhs = base.act(b, &base.project(&finer, &a).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn space_arith(p in prop::sample::select(vec![2u32, 3, 5]), a in 0usize..125, b in 0usize..125, c in 1u32..5) {
            let s = Space::new(p, 3).unwrap();
            let (a, b) = (a % s.size(), b % s.size());
            let c = c % p;
            let sum = s.add(a, b);
            let da = s.digits(a);
            let db = s.digits(b);
            let ds: Vec<u32> = da.iter().zip(&db).map(|(x, y)| (x + y) % p).collect();
            prop_assert_eq!(s.digits(sum), ds);
            prop_assert_eq!(s.sub(sum, b), a);
            let dc: Vec<u32> = da.iter().map(|x| x * c % p).collect();
            prop_assert_eq!(s.digits(s.scale(c, a)), dc);
        }
    }
}
