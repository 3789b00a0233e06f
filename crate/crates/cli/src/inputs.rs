//! Input files, their digests, and the shapes the subcommands accept.

use std::path::{Path, PathBuf};

use hofa_core::factors::PolynomialFactor;
use hofa_core::field::Space;
use hofa_core::io::{parse, FactorJson, MonomialRepJson};
use hofa_core::ncpoly::MonomialRep;
use hofa_core::{Caps, HofaError};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub name: String,
    pub sha256: String,
}

/// Files read during a run, in reading order.
#[derive(Default)]
pub struct Inputs {
    pub digests: Vec<InputDigest>,
}

impl Inputs {
    pub fn read(&mut self, role: &str, path: &Path) -> Result<String, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        self.digests.push(InputDigest { role: role.into(), name, sha256: hex::encode(Sha256::digest(&bytes)) });
        String::from_utf8(bytes).map_err(|_| CliError::Core(HofaError::Malformed(format!("{}: not UTF-8", path.display()))))
    }

    pub fn read_required(&mut self, role: &str, path: &Option<PathBuf>) -> Result<String, CliError> {
        match path {
            Some(p) => self.read(role, p),
            None => Err(CliError::Usage(format!("--in is required for this subcommand ({role})"))),
        }
    }
}

/// `{p, n, values}` or `{p, n, functions}` with real entries.
#[derive(Debug, Deserialize)]
struct RealTableJson {
    p: u32,
    n: usize,
    #[serde(default)]
    values: Option<Vec<f64>>,
    #[serde(default)]
    functions: Option<Vec<Vec<f64>>>,
}

pub struct RealTables {
    pub space: Space,
    pub functions: Vec<Vec<f64>>,
}

pub fn real_tables(text: &str) -> Result<RealTables, CliError> {
    let t: RealTableJson = parse("function table", text)?;
    let space = Space::new(t.p, t.n)?;
    let functions = match (t.values, t.functions) {
        (Some(v), None) => vec![v],
        (None, Some(fs)) if !fs.is_empty() => fs,
        _ => return Err(malformed("function table needs exactly one of `values` or a nonempty `functions`")),
    };
    for (i, f) in functions.iter().enumerate() {
        if f.len() != space.size() {
            return Err(malformed(format!("function {i} has {} values, expected p^n = {}", f.len(), space.size())));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(malformed(format!("function {i} has a non-finite value")));
        }
    }
    Ok(RealTables { space, functions })
}

/// What a numeric input file holds, detected from its keys.
pub enum Numeric {
    Table(RealTables),
    Polynomial(MonomialRep),
    Factor(PolynomialFactor),
}

pub fn numeric(text: &str, caps: &Caps) -> Result<Numeric, CliError> {
    let v: Value = parse("input", text)?;
    if v.get("terms").is_some() {
        Ok(Numeric::Polynomial(polynomial(text)?))
    } else if v.get("polys").is_some() {
        let j: FactorJson = parse("factor", text)?;
        Ok(Numeric::Factor(j.to_factor(caps)?))
    } else {
        Ok(Numeric::Table(real_tables(text)?))
    }
}

pub fn polynomial(text: &str) -> Result<MonomialRep, CliError> {
    let j: MonomialRepJson = parse("polynomial", text)?;
    Ok(j.to_rep().map_err(|e| malformed(format!("polynomial: {e}")))?)
}

pub fn malformed(msg: impl Into<String>) -> CliError {
    CliError::Core(HofaError::Malformed(msg.into()))
}
