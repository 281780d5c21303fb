use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use bmatch_core::gen::{self, Fixture};
use bmatch_core::io::{read_budgets, read_edge_list};
use bmatch_core::{BudgetVector, Graph};

/// A graph given as an edge-list file or as a named fixture (`fixture-F2`).
#[derive(Clone, Debug, PartialEq)]
pub enum GraphSource {
    Fixture(Fixture),
    File(PathBuf),
    /// Built in memory by a suite; the label names it in reports.
    Generated(String),
}

impl FromStr for GraphSource {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.starts_with("fixture-") {
            return Ok(GraphSource::Fixture(s.parse()?));
        }
        Ok(GraphSource::File(PathBuf::from(s)))
    }
}

impl std::fmt::Display for GraphSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GraphSource::Fixture(x) => write!(f, "fixture-{x:?}"),
            GraphSource::File(p) => write!(f, "{}", p.display()),
            GraphSource::Generated(s) => write!(f, "{s}"),
        }
    }
}

impl GraphSource {
    pub fn load(&self) -> Result<Graph> {
        match self {
            GraphSource::Fixture(f) => Ok(gen::fixture(*f)),
            GraphSource::File(p) => {
                let file = File::open(p).with_context(|| format!("opening {}", p.display()))?;
                read_edge_list(BufReader::new(file)).with_context(|| format!("reading {}", p.display()))
            }
            GraphSource::Generated(s) => bail!("`{s}` has no backing file"),
        }
    }

    pub fn path(&self) -> Option<&Path> {
        match self {
            GraphSource::File(p) => Some(p),
            GraphSource::Fixture(_) | GraphSource::Generated(_) => None,
        }
    }
}

/// `constant:B`, `uniform:BMAX` (seeded) or a budget file path.
#[derive(Clone, Debug, PartialEq)]
pub enum BudgetSpec {
    Constant(u32),
    Uniform(u32),
    File(PathBuf),
    /// Supplied directly by a suite.
    Generated,
}

impl FromStr for BudgetSpec {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        let num = |v: &str| -> Result<u32> {
            let b: u32 = v.parse().with_context(|| format!("budget `{v}` is not a positive integer"))?;
            if b == 0 {
                bail!("budgets must be at least 1");
            }
            Ok(b)
        };
        if let Some(v) = s.strip_prefix("constant:") {
            return Ok(BudgetSpec::Constant(num(v)?));
        }
        if let Some(v) = s.strip_prefix("uniform:") {
            return Ok(BudgetSpec::Uniform(num(v)?));
        }
        Ok(BudgetSpec::File(PathBuf::from(s)))
    }
}

impl std::fmt::Display for BudgetSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BudgetSpec::Constant(b) => write!(f, "constant:{b}"),
            BudgetSpec::Uniform(b) => write!(f, "uniform:{b}"),
            BudgetSpec::File(p) => write!(f, "{}", p.display()),
            BudgetSpec::Generated => write!(f, "generated"),
        }
    }
}

impl BudgetSpec {
    pub fn load(&self, n: usize, seed: u64) -> Result<BudgetVector> {
        Ok(match self {
            BudgetSpec::Constant(b) => gen::constant_budgets(n, *b)?,
            BudgetSpec::Uniform(b) => gen::uniform_budgets(n, *b, seed)?,
            BudgetSpec::File(p) => {
                let file = File::open(p).with_context(|| format!("opening {}", p.display()))?;
                read_budgets(BufReader::new(file), n).with_context(|| format!("reading {}", p.display()))?
            }
            BudgetSpec::Generated => bail!("generated budgets have no backing file"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sources_and_budget_specs() {
        assert_eq!("fixture-F2".parse::<GraphSource>().unwrap(), GraphSource::Fixture(Fixture::F2));
        assert_eq!("g.txt".parse::<GraphSource>().unwrap(), GraphSource::File("g.txt".into()));
        assert!("fixture-F9".parse::<GraphSource>().is_err());
        assert_eq!("constant:2".parse::<BudgetSpec>().unwrap(), BudgetSpec::Constant(2));
        assert_eq!("uniform:3".parse::<BudgetSpec>().unwrap(), BudgetSpec::Uniform(3));
        assert!("constant:0".parse::<BudgetSpec>().is_err());
        assert_eq!("b.txt".parse::<BudgetSpec>().unwrap(), BudgetSpec::File("b.txt".into()));
    }

    #[test]
    fn fixture_roundtrips_through_display() {
        let s = GraphSource::Fixture(Fixture::F3);
        assert_eq!(s.to_string().parse::<GraphSource>().unwrap(), s);
        assert_eq!(s.load().unwrap().m(), 3);
    }
}
