//! JSON interchange formats.

use serde::{Deserialize, Serialize};

use crate::caps::Caps;
use crate::consistency::ConsistencySet;
use crate::error::{shape, HofaError, Result};
use crate::factors::PolynomialFactor;
use crate::field::{ParamEntry, ParameterList, TorusValue};
use crate::ncpoly::{HomogeneousPoly, MonomialRep};
use crate::patterns::Coloring;
use crate::tester::{SubspaceMode, TestReport};

/// Parses JSON, reporting line and column on failure.
pub fn parse<T: for<'de> Deserialize<'de>>(what: &str, text: &str) -> Result<T> {
    serde_json::from_str(text)
        .map_err(|e| HofaError::Malformed(format!("{what}: line {}, column {}: {e}", e.line(), e.column())))
}

/// Rounds to 12 decimal places so reruns print identical digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    let r = (x * 1e12).round() / 1e12;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn parse_coloring(text: &str) -> Result<Coloring> {
    let c: Coloring = parse("coloring", text)?;
    c.validate().map_err(|e| HofaError::Malformed(format!("coloring: {e}")))?;
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlphaJson {
    pub num: u64,
    pub depth: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermJson {
    pub exps: Vec<u32>,
    pub k: u32,
    pub c: u32,
}

/// `{p, n, alpha: {num, depth}, terms: [{exps, k, c}]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonomialRepJson {
    pub p: u32,
    pub n: usize,
    pub alpha: AlphaJson,
    pub terms: Vec<TermJson>,
}

impl MonomialRepJson {
    pub fn from_rep(rep: &MonomialRep) -> Self {
        let a = rep.alpha();
        MonomialRepJson {
            p: rep.p(),
            n: rep.n(),
            alpha: AlphaJson { num: a.residue, depth: a.depth },
            terms: rep.terms().map(|((exps, k), c)| TermJson { exps: exps.clone(), k: *k, c }).collect(),
        }
    }

    pub fn to_rep(&self) -> Result<MonomialRep> {
        let alpha = TorusValue::new(self.p, self.alpha.depth, self.alpha.num)?;
        let terms: Vec<(Vec<u32>, u32, u32)> = self.terms.iter().map(|t| (t.exps.clone(), t.k, t.c)).collect();
        MonomialRep::new(self.p, self.n, alpha, &terms)
    }
}

/// `{p, n, params, polys}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorJson {
    pub p: u32,
    pub n: usize,
    pub params: Vec<ParamEntry>,
    pub polys: Vec<MonomialRepJson>,
}

impl FactorJson {
    pub fn from_factor(b: &PolynomialFactor) -> Self {
        FactorJson {
            p: b.p(),
            n: b.n(),
            params: b.params().entries(),
            polys: b.polys().iter().map(|h| MonomialRepJson::from_rep(&h.rep)).collect(),
        }
    }

    /// Rebuilds the factor and checks the declared parameters.
    pub fn to_factor(&self, caps: &Caps) -> Result<PolynomialFactor> {
        let polys = self
            .polys
            .iter()
            .map(|r| HomogeneousPoly::new(r.to_rep()?, caps))
            .collect::<Result<Vec<_>>>()?;
        let b = PolynomialFactor::new(self.p, self.n, polys, caps)?;
        let declared = ParameterList::from_entries(self.p, &self.params)?;
        if &declared != b.params() {
            return shape("declared parameters do not match the polynomials");
        }
        Ok(b)
    }
}

/// `{m, d, k, p, elements, stabilized, per_n_sizes}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencySetJson {
    pub m: usize,
    pub d: u32,
    pub k: u32,
    pub p: u32,
    pub elements: Vec<Vec<u64>>,
    pub stabilized: bool,
    pub per_n_sizes: Vec<u128>,
}

impl ConsistencySetJson {
    pub fn from_set(s: &ConsistencySet, caps: &Caps) -> Result<Self> {
        Ok(ConsistencySetJson {
            m: s.m,
            d: s.d,
            k: s.k,
            p: s.p,
            elements: s.elements(caps)?,
            stabilized: s.stabilized(),
            per_n_sizes: s.per_n.iter().map(|r| r.closed).collect(),
        })
    }
}

/// `{trials, rejects, rate, ci: [lo, hi], seed, mode, d}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReportJson {
    pub trials: u64,
    pub rejects: u64,
    pub rate: f64,
    pub ci: [f64; 2],
    pub seed: u64,
    pub mode: String,
    pub d: usize,
}

impl TestReportJson {
    pub fn from_report(r: &TestReport) -> Self {
        TestReportJson {
            trials: r.trials,
            rejects: r.rejects,
            rate: round12(r.rate),
            ci: [round12(r.ci[0]), round12(r.ci[1])],
            seed: r.seed,
            mode: match r.mode {
                SubspaceMode::Linear => "linear".into(),
                SubspaceMode::Affine => "affine".into(),
            },
            d: r.d,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consistency::{consistency_set, WitnessMode};
    use crate::forms::LinearSystem;
    use crate::patterns::ColorSet;

    #[test]
    fn monomial_round_trip() {
        let rep = MonomialRep::new(3, 2, TorusValue::new(3, 1, 4).unwrap(), &[(vec![1, 1], 0, 2), (vec![2, 0], 1, 1)]).unwrap();
        let j = MonomialRepJson::from_rep(&rep);
        let text = serde_json::to_string(&j).unwrap();
        let back: MonomialRepJson = parse("rep", &text).unwrap();
        assert_eq!(back.to_rep().unwrap(), rep);
    }

    #[test]
    fn factor_round_trip() {
        let caps = Caps::default();
        let b = PolynomialFactor::linear_forms(2, 3, 2, &caps).unwrap();
        let j = FactorJson::from_factor(&b);
        let back: FactorJson = parse("factor", &serde_json::to_string(&j).unwrap()).unwrap();
        assert_eq!(back.to_factor(&caps).unwrap().codes(), b.codes());
        let mut bad = j.clone();
        bad.params[0].count = 3;
        assert!(bad.to_factor(&caps).is_err());
    }

    #[test]
    fn coloring_format() {
        let c = Coloring::new(2, 1, ColorSet::plain(2), vec![0, 1]).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(text, r#"{"p":2,"n":1,"colors":["0","1"],"values":[0,1]}"#);
        assert_eq!(parse_coloring(&text).unwrap(), c);
        let err = parse_coloring("{\"p\":2,\n\"n\":1,\"colors\":[\"a\"],\"values\":[0]}").unwrap_err();
        assert!(matches!(err, HofaError::Malformed(_)), "{err}");
        let err = parse_coloring("{\"p\":2,\n\"n\": oops}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn consistency_format() {
        let caps = Caps::default();
        let sys = LinearSystem::new(2, 2, vec![vec![1, 0], vec![0, 1], vec![1, 1]]).unwrap();
        let s = consistency_set(1, 0, &sys, 3, WitnessMode::Homogeneous, &caps).unwrap();
        let j = ConsistencySetJson::from_set(&s, &caps).unwrap();
        assert_eq!(j.elements.len(), 4);
        assert!(j.stabilized);
    }

    #[test]
    fn rounding() {
        assert_eq!(round12(0.1 + 0.2), 0.3);
        assert_eq!(round12(-1e-15), 0.0);
        assert_eq!(round12(2f64.powf(-0.5)), 0.707106781187);
    }
}
