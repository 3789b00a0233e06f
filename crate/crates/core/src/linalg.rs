//! Linear algebra over `F_p` and subgroups of `(Z/p^e)^m`.

use std::collections::HashSet;

use crate::error::{HofaError, Result};
use crate::field::{inv_mod, mul_mod, valuation};

/// Rank of a list of vectors over `F_p`.
pub fn rank_mod_p(rows: &[Vec<u32>], p: u32) -> usize {
    row_reduce(rows, p).len()
}

/// Reduced row echelon form of the row span; zero rows dropped.
pub fn row_reduce(rows: &[Vec<u32>], p: u32) -> Vec<Vec<u32>> {
    let mut m: Vec<Vec<u32>> = rows.iter().map(|r| r.iter().map(|&x| x % p).collect()).collect();
    let cols = m.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..cols {
        let Some(piv) = (rank..m.len()).find(|&r| m[r][c] != 0) else { continue };
        m.swap(rank, piv);
        let inv = inv_mod(m[rank][c] as u64, p as u64).unwrap() as u32;
        for x in m[rank].iter_mut() {
            *x = ((*x as u64 * inv as u64) % p as u64) as u32;
        }
        for r in 0..m.len() {
            if r != rank && m[r][c] != 0 {
                let f = m[r][c];
                for j in 0..cols {
                    let sub = (f as u64 * m[rank][j] as u64 % p as u64) as u32;
                    m[r][j] = (m[r][j] + p - sub) % p;
                }
            }
        }
        rank += 1;
    }
    m.truncate(rank);
    m
}

/// Basis of `{x : A x = 0}` for `A` given by rows with `cols` columns.
pub fn nullspace_mod_p(rows: &[Vec<u32>], cols: usize, p: u32) -> Vec<Vec<u32>> {
    let rref = row_reduce(rows, p);
    let pivots: Vec<usize> = rref.iter().map(|r| r.iter().position(|&x| x != 0).unwrap()).collect();
    let mut out = Vec::new();
    for free in (0..cols).filter(|c| !pivots.contains(c)) {
        let mut v = vec![0u32; cols];
        v[free] = 1;
        for (r, &pc) in rref.iter().zip(&pivots) {
            v[pc] = (p - r[free]) % p;
        }
        out.push(v);
    }
    out
}

/// A subgroup of `(Z/p^e)^m` kept in Howell form: echelon rows whose
/// pivots are powers of `p`, closed so that membership can be decided by
/// reduction.
#[derive(Debug, Clone)]
pub struct Subgroup {
    p: u32,
    e: u32,
    m: usize,
    modulus: u64,
    /// Rows sorted by pivot column; `(pivot column, pivot valuation, row)`.
    rows: Vec<(usize, u32, Vec<u64>)>,
}

impl Subgroup {
    pub fn new(p: u32, e: u32, m: usize) -> Self {
        Subgroup { p, e, m, modulus: (p as u64).pow(e), rows: Vec::new() }
    }

    pub fn ambient_dim(&self) -> usize {
        self.m
    }

    pub fn exponent(&self) -> u32 {
        self.e
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    fn reduce(&self, v: &mut [u64]) {
        for (c, val, row) in &self.rows {
            let x = v[*c];
            if x == 0 {
                continue;
            }
            if valuation(x, self.p, self.e) >= *val {
                let f = x / (self.p as u64).pow(*val);
                for j in 0..self.m {
                    v[j] = (v[j] + self.modulus - mul_mod(f, row[j], self.modulus)) % self.modulus;
                }
            }
        }
    }

    pub fn contains(&self, v: &[u64]) -> bool {
        let mut w: Vec<u64> = v.iter().map(|&x| x % self.modulus).collect();
        self.reduce(&mut w);
        w.iter().all(|&x| x == 0)
    }

    /// Adds a generator. Returns true if the subgroup grew.
    pub fn insert(&mut self, v: &[u64]) -> bool {
        assert_eq!(v.len(), self.m, "generator length");
        let v: Vec<u64> = v.iter().map(|&x| x % self.modulus).collect();
        if self.contains(&v) {
            return false;
        }
        let mut queue = vec![v];
        while let Some(mut v) = queue.pop() {
            self.reduce(&mut v);
            let Some(c) = v.iter().position(|&x| x != 0) else { continue };
            let val = valuation(v[c], self.p, self.e);
            let unit = v[c] / (self.p as u64).pow(val);
            let inv = inv_mod(unit, self.modulus).unwrap();
            for x in v.iter_mut() {
                *x = mul_mod(*x, inv, self.modulus);
            }
            match self.rows.iter().position(|r| r.0 == c) {
                Some(i) => {
                    // Existing pivot with larger valuation: swap it out.
                    let old = std::mem::replace(&mut self.rows[i], (c, val, v.clone()));
                    queue.push(old.2);
                }
                None => {
                    let pos = self.rows.iter().position(|r| r.0 > c).unwrap_or(self.rows.len());
                    self.rows.insert(pos, (c, val, v.clone()));
                }
            }
            // Howell closure: p^{e-val} v has its pivot killed.
            if val > 0 {
                let f = (self.p as u64).pow(self.e - val);
                let w: Vec<u64> = v.iter().map(|&x| mul_mod(x, f, self.modulus)).collect();
                queue.push(w);
            }
        }
        true
    }

    /// A generating set (the Howell rows).
    pub fn generators(&self) -> Vec<Vec<u64>> {
        self.rows.iter().map(|r| r.2.clone()).collect()
    }

    /// `log_p` of the subgroup order.
    pub fn log_size(&self) -> u64 {
        self.rows.iter().map(|(_, v, _)| (self.e - v) as u64).sum()
    }

    pub fn size(&self) -> u128 {
        crate::caps::pow_sat(self.p as u64, self.log_size())
    }

    /// All elements, in lexicographic order of their entries.
    pub fn elements(&self, cap: u64) -> Result<Vec<Vec<u64>>> {
        let size = self.size();
        if size > cap as u128 {
            return Err(HofaError::CapExceeded { what: "subgroup elements".into(), needed: size, cap: cap as u128 });
        }
        let mut out: Vec<Vec<u64>> = vec![vec![0; self.m]];
        for (_, val, row) in &self.rows {
            let order = (self.p as u64).pow(self.e - val);
            let mut next = Vec::with_capacity(out.len() * order as usize);
            for base in &out {
                for t in 0..order {
                    next.push(
                        base.iter().zip(row).map(|(&b, &r)| (b + mul_mod(t, r, self.modulus)) % self.modulus).collect(),
                    );
                }
            }
            out = next;
        }
        out.sort();
        Ok(out)
    }
}

/// Brute-force closure of a generator set under addition. Used as a test
/// oracle for [`Subgroup`].
pub fn closure_brute(gens: &[Vec<u64>], modulus: u64, m: usize) -> HashSet<Vec<u64>> {
    let mut set: HashSet<Vec<u64>> = HashSet::new();
    set.insert(vec![0; m]);
    let mut frontier = vec![vec![0u64; m]];
    while let Some(v) = frontier.pop() {
        for g in gens {
            let w: Vec<u64> = v.iter().zip(g).map(|(&a, &b)| (a + b) % modulus).collect();
            if set.insert(w.clone()) {
                frontier.push(w);
            }
        }
    }
    set
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rank_examples() {
        assert_eq!(rank_mod_p(&[vec![1, 0], vec![0, 1], vec![1, 1]], 2), 2);
        assert_eq!(rank_mod_p(&[vec![1, 2], vec![2, 1]], 3), 1);
        let ns = nullspace_mod_p(&[vec![1, 1, 0]], 3, 2);
        assert_eq!(ns.len(), 2);
    }

    #[test]
    fn subgroup_small() {
        let mut g = Subgroup::new(2, 2, 2);
        g.insert(&[2, 0]);
        assert_eq!(g.size(), 2);
        g.insert(&[1, 1]);
        assert_eq!(g.size(), 8);
        assert!(g.contains(&[0, 2]));
        assert!(!g.contains(&[0, 1]));
    }

    proptest! {
        #[test]
        fn subgroup_matches_brute(
            pe in prop::sample::select(vec![(2u32, 1u32), (2, 2), (2, 3), (3, 1), (3, 2)]),
            m in 1usize..4,
            raw in proptest::collection::vec(proptest::collection::vec(0u64..27, 3), 0..5),
        ) {
            let (p, e) = pe;
            let modulus = (p as u64).pow(e);
            let gens: Vec<Vec<u64>> = raw.iter().map(|g| g[..m].iter().map(|x| x % modulus).collect()).collect();
            let mut sg = Subgroup::new(p, e, m);
            for g in &gens {
                sg.insert(g);
            }
            let brute = closure_brute(&gens, modulus, m);
            prop_assert_eq!(sg.size(), brute.len() as u128);
            let els = sg.elements(1 << 20).unwrap();
            prop_assert_eq!(els.len(), brute.len());
            for x in &els {
                prop_assert!(brute.contains(x));
            }
            let mut v = vec![0u64; m];
            for t in 0..modulus.pow(m as u32) {
                let mut r = t;
                for x in v.iter_mut() {
                    *x = r % modulus;
                    r /= modulus;
                }
                prop_assert_eq!(sg.contains(&v), brute.contains(&v));
            }
        }
    }
}
