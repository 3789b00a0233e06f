//! Linear forms and systems of linear forms over `F_p`.

use serde::{Deserialize, Serialize};

use crate::caps::Caps;
use crate::error::{invalid, shape, Result};
use crate::field::{check_prime, Space};
use crate::linalg::rank_mod_p;

/// A system `L = (L_1, ..., L_m)` of linear forms in `l` variables,
/// `L_i(x) = Σ_j rows[i][j] x_j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinearSystem {
    pub p: u32,
    pub l: usize,
    pub rows: Vec<Vec<u32>>,
}

/// Which canonical system to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Canonical {
    /// `L^l`, one form per `i` in `F_p^l`.
    Full,
    /// `\bar L^l`, one form per `i` whose first nonzero coordinate is 1.
    Projective,
}

/// Complexity of a system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Complexity {
    /// Least `d` with independent `(d+1)`-th tensor powers. `cap_hit` is set
    /// when the search stopped at `m - 2` without a witness.
    Finite { d: u32, cap_hit: bool },
    /// Some form is zero or two forms are dependent.
    Infinite,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub finite_complexity: bool,
    pub translation_invariant: bool,
    pub complexity: Complexity,
}

impl LinearSystem {
    pub fn new(p: u32, l: usize, rows: Vec<Vec<u32>>) -> Result<Self> {
        check_prime(p)?;
        if rows.iter().any(|r| r.len() != l) {
            return shape(format!("every form needs {l} coefficients"));
        }
        let rows = rows.into_iter().map(|r| r.into_iter().map(|c| c % p).collect()).collect();
        Ok(LinearSystem { p, l, rows })
    }

    /// `L^l` or `\bar L^l`, rows in lexicographic order with the first
    /// coordinate most significant.
    pub fn canonical(p: u32, l: usize, kind: Canonical, caps: &Caps) -> Result<Self> {
        check_prime(p)?;
        caps.check_elements("canonical system", crate::caps::pow_sat(p as u64, l as u64))?;
        let total = (p as usize).pow(l as u32);
        let mut rows = Vec::new();
        for t in 0..total {
            let mut r = vec![0u32; l];
            let mut x = t;
            for j in (0..l).rev() {
                r[j] = (x % p as usize) as u32;
                x /= p as usize;
            }
            let keep = match kind {
                Canonical::Full => true,
                Canonical::Projective => r.iter().find(|&&c| c != 0) == Some(&1),
            };
            if keep {
                rows.push(r);
            }
        }
        Self::new(p, l, rows)
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    /// Images `L_i(x)` of a tuple of points.
    pub fn evaluate(&self, space: &Space, x: &[usize]) -> Result<Vec<usize>> {
        if x.len() != self.l {
            return shape(format!("expected {} points, got {}", self.l, x.len()));
        }
        if space.p() != self.p {
            return shape("space and system use different primes");
        }
        Ok(self.rows.iter().map(|r| space.combine(r, x)).collect())
    }

    /// The system with one extra form appended.
    pub fn with_form(&self, row: Vec<u32>) -> Result<Self> {
        let mut rows = self.rows.clone();
        rows.push(row);
        Self::new(self.p, self.l, rows)
    }

    fn dependent(&self, a: &[u32], b: &[u32]) -> bool {
        rank_mod_p(&[a.to_vec(), b.to_vec()], self.p) < 2
    }

    pub fn has_finite_complexity(&self) -> bool {
        if self.rows.iter().any(|r| r.iter().all(|&c| c == 0)) {
            return false;
        }
        for i in 0..self.m() {
            for j in (i + 1)..self.m() {
                if self.dependent(&self.rows[i], &self.rows[j]) {
                    return false;
                }
            }
        }
        true
    }

    pub fn is_translation_invariant(&self) -> bool {
        self.l > 0 && self.rows.iter().all(|r| r[0] == 1)
    }

    /// Rank of the `s`-th symmetric tensor powers of the forms, flattened
    /// over multisets of coordinates: the entry at multiset `α` is `v^α`.
    pub fn tensor_power_rank(&self, s: u32) -> usize {
        let multisets = multisets(self.l, s);
        let rows: Vec<Vec<u32>> = self
            .rows
            .iter()
            .map(|v| {
                multisets
                    .iter()
                    .map(|ms| {
                        ms.iter().fold(1u64, |acc, &j| acc * v[j] as u64 % self.p as u64) as u32
                    })
                    .collect()
            })
            .collect();
        rank_mod_p(&rows, self.p)
    }

    pub fn complexity(&self) -> Complexity {
        if !self.has_finite_complexity() {
            return Complexity::Infinite;
        }
        let cap = self.m().max(2) as u32 - 2;
        for d in 0..=cap {
            if self.tensor_power_rank(d + 1) == self.m() {
                return Complexity::Finite { d, cap_hit: false };
            }
        }
        Complexity::Finite { d: cap, cap_hit: true }
    }

    pub fn classify(&self) -> Classification {
        Classification {
            finite_complexity: self.has_finite_complexity(),
            translation_invariant: self.is_translation_invariant(),
            complexity: self.complexity(),
        }
    }

    /// The systems `L'` and `L''` built from `L` (matrix `M`), scalars
    /// `c_1..c_n` and an `mn × l'` matrix `N`:
    /// `L' = [M 0; c_i M N]`, `L'' = [M 0 0; c_i M N 0; c_i M 0 N]`.
    pub fn cs_extensions(&self, c: &[u32], n_mat: &[Vec<u32>], l2: usize) -> Result<(Self, Self)> {
        let m = self.m();
        if n_mat.len() != m * c.len() || n_mat.iter().any(|r| r.len() != l2) {
            return shape(format!("N must be {} x {l2}", m * c.len()));
        }
        let zero = vec![0u32; l2];
        let scaled = |cv: u32, r: &[u32]| -> Vec<u32> { r.iter().map(|&x| x * cv % self.p).collect() };
        let cat = |parts: &[&[u32]]| -> Vec<u32> { parts.concat() };
        let mut rows1: Vec<Vec<u32>> = self.rows.iter().map(|r| cat(&[r, &zero])).collect();
        let mut rows2: Vec<Vec<u32>> = self.rows.iter().map(|r| cat(&[r, &zero, &zero])).collect();
        let mut lower = Vec::new();
        for (ci, &cv) in c.iter().enumerate() {
            for (i, r) in self.rows.iter().enumerate() {
                let nrow = &n_mat[ci * m + i];
                let cm = scaled(cv, r);
                rows1.push(cat(&[&cm, nrow]));
                rows2.push(cat(&[&cm, nrow, &zero]));
                lower.push(cat(&[&cm, &zero, nrow]));
            }
        }
        rows2.extend(lower);
        Ok((Self::new(self.p, self.l + l2, rows1)?, Self::new(self.p, self.l + 2 * l2, rows2)?))
    }

    /// Scalar evaluation of one form at coefficient vector `x` over `F_p`.
    pub fn eval_scalar(&self, i: usize, x: &[u32]) -> u32 {
        self.rows[i].iter().zip(x).map(|(&a, &b)| a as u64 * b as u64).sum::<u64>() as u32 % self.p
    }

    pub fn validate_p(&self, p: u32) -> Result<()> {
        if self.p != p {
            return invalid(format!("system over F_{} used with F_{p}", self.p));
        }
        Ok(())
    }
}

/// Nondecreasing index sequences of length `s` over `0..l`.
fn multisets(l: usize, s: u32) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn go(l: usize, s: u32, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == s as usize {
            out.push(cur.clone());
            return;
        }
        for j in start..l {
            cur.push(j);
            go(l, s, j, cur, out);
            cur.pop();
        }
    }
    go(l, s, 0, &mut cur, &mut out);
    out
}
