use std::io::Write;

use anyhow::Result;
use bmatch_core::gen;
use bmatch_core::{BudgetVector, Graph};
use clap::ValueEnum;
use rayon::prelude::*;
use serde::Serialize;

use crate::input::{BudgetSpec, GraphSource};
use crate::run::{execute, Algorithm, Report, RunConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    /// No instances; produces a header-only CSV.
    Empty,
    /// Tight fractional solutions on gnp(200, d = 10), b uniform in 1..=3.
    Frac,
    /// Constant-factor matching on n in 8..=16, p = 0.35, b <= 3, m <= 24.
    #[value(name = "const")]
    Const,
    /// Unweighted engine on n in 6..=16, p = 0.3, b <= 3, m <= 24.
    Unweighted,
    /// Weighted engine on n in 4..=12, p = 0.4, weights <= 16, b <= 2, m <= 24.
    Weighted,
    /// Streaming engine on the unweighted suite's instances.
    Stream,
}

impl Suite {
    pub fn algorithm(self) -> Option<Algorithm> {
        match self {
            Suite::Empty => None,
            Suite::Frac => Some(Algorithm::Frac),
            Suite::Const => Some(Algorithm::Const),
            Suite::Unweighted => Some(Algorithm::Unweighted),
            Suite::Weighted => Some(Algorithm::Weighted),
            Suite::Stream => Some(Algorithm::Stream),
        }
    }

    /// Oracle ratio a run must reach to count as a success.
    pub fn threshold(self) -> Option<f64> {
        match self {
            Suite::Const => Some(1.0 / 100.0),
            Suite::Unweighted | Suite::Weighted | Suite::Stream => Some(1.0 / 1.5),
            Suite::Empty | Suite::Frac => None,
        }
    }
}

/// The instance a suite runs for `seed`.
pub fn instance(suite: Suite, seed: u64) -> Result<(Graph, BudgetVector)> {
    Ok(match suite {
        Suite::Empty => (Graph::empty(0), BudgetVector::constant(0, 1)),
        Suite::Frac => {
            let g = gen::gnp_avg_degree(200, 10.0, None, seed)?;
            let b = gen::uniform_budgets(200, 3, seed)?;
            (g, b)
        }
        Suite::Const => gen::small_instance(8 + (seed % 9) as usize, 0.35, None, 3, 24, seed)?,
        Suite::Unweighted | Suite::Stream => gen::small_instance(6 + (seed % 11) as usize, 0.3, None, 3, 24, seed)?,
        Suite::Weighted => gen::small_instance(4 + (seed % 9) as usize, 0.4, Some(16), 2, 24, seed)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub suite: Suite,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub sum_b: u64,
    pub value: String,
    pub optimum: Option<String>,
    pub ratio: Option<f64>,
    pub valid: bool,
    pub rounds: Option<u64>,
    pub peak_words: Option<usize>,
    pub passes: Option<usize>,
}

pub const HEADER: [&str; 12] =
    ["suite", "seed", "n", "m", "sum_b", "value", "optimum", "ratio", "valid", "rounds", "peak_words", "passes"];

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub suite: Suite,
    pub runs: usize,
    pub valid_runs: usize,
    pub median_ratio: Option<f64>,
    pub min_ratio: Option<f64>,
    pub threshold: Option<f64>,
    pub success_rate: Option<f64>,
}

fn row(suite: Suite, seed: u64, r: &Report) -> Row {
    let oracle = r.oracle.as_ref();
    Row {
        suite,
        seed,
        n: r.input.n,
        m: r.input.m,
        sum_b: r.input.sum_b,
        value: r.result.value.clone(),
        optimum: oracle.and_then(|o| o.optimum.clone()),
        ratio: oracle.and_then(|o| o.ratio),
        valid: r.checks_passed,
        rounds: r.mpc.as_ref().map(|m| m.rounds),
        peak_words: r.mpc.as_ref().map(|m| m.peak_words).or(r.streaming.as_ref().map(|s| s.peak_words)),
        passes: r.streaming.as_ref().map(|s| s.passes),
    }
}

/// Runs `seeds` through the suite. Seeds run in parallel; rows keep seed order.
pub fn run_suite(suite: Suite, seeds: std::ops::Range<u64>, eps: f64) -> Result<Vec<Row>> {
    let Some(algorithm) = suite.algorithm() else {
        return Ok(vec![]);
    };
    let seeds: Vec<u64> = seeds.collect();
    seeds
        .par_iter()
        .map(|&seed| {
            let (g, b) = instance(suite, seed)?;
            let source = GraphSource::Generated(format!("{suite:?}-{seed}").to_lowercase());
            let cfg = RunConfig {
                eps,
                with_oracle: suite.threshold().is_some(),
                omit_timing: true,
                ..RunConfig::new(algorithm, seed)
            };
            let report = execute(&g, &b, &source, &BudgetSpec::Generated, &cfg)?;
            Ok(row(suite, seed, &report))
        })
        .collect()
}

pub fn summarize(suite: Suite, rows: &[Row]) -> Summary {
    let mut ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let threshold = suite.threshold();
    let success_rate = if rows.is_empty() {
        None
    } else {
        let ok = rows.iter().filter(|r| r.valid && threshold.is_none_or(|t| r.ratio.is_some_and(|x| x >= t))).count();
        Some(ok as f64 / rows.len() as f64)
    };
    Summary {
        suite,
        runs: rows.len(),
        valid_runs: rows.iter().filter(|r| r.valid).count(),
        median_ratio: (!ratios.is_empty()).then(|| ratios[ratios.len() / 2]),
        min_ratio: ratios.first().copied(),
        threshold,
        success_rate,
    }
}

/// Writes the header and one line per row.
pub fn write_csv<W: Write>(rows: &[Row], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
