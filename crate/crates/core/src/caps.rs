//! Enumeration budgets shared by the exhaustive routines.

use crate::error::{HofaError, Result};

/// Upper bounds on brute-force work. Every exhaustive routine checks its
/// step count against one of these before starting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caps {
    /// Largest number of points of a value table.
    pub table: u64,
    /// Largest number of elementary steps of a single enumeration.
    pub enumeration: u64,
    /// Largest group or atom-space size that is materialized element by element.
    pub elements: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { table: 3125, enumeration: 1 << 28, elements: 1 << 22 }
    }
}

impl Caps {
    /// Caps with every bound replaced by `n`.
    pub fn uniform(n: u64) -> Self {
        Caps { table: n, enumeration: n, elements: n }
    }

    pub fn check_table(&self, what: &str, needed: u128) -> Result<()> {
        check(what, needed, self.table)
    }

    pub fn check_enum(&self, what: &str, needed: u128) -> Result<()> {
        check(what, needed, self.enumeration)
    }

    pub fn check_elements(&self, what: &str, needed: u128) -> Result<()> {
        check(what, needed, self.elements)
    }
}

fn check(what: &str, needed: u128, cap: u64) -> Result<()> {
    if needed > cap as u128 {
        Err(HofaError::CapExceeded { what: what.to_string(), needed, cap: cap as u128 })
    } else {
        Ok(())
    }
}

/// `base^exp` as u128, saturating at `u128::MAX`.
pub fn pow_sat(base: u64, exp: u64) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base as u128);
    }
    acc
}
