use std::time::Instant;

use anyhow::{bail, Result};
use bmatch_core::io::{format_decimal, weight_f64};
use bmatch_core::lp::{
    constant_approx_bmatching, dual_certificate, full_mpc, is_feasible, loose_sets, Alpha, LpInstance, LpParams,
};
use bmatch_core::mpc::{MachineCluster, MpcConfig, RoundLog};
use bmatch_core::oracle::{exact_max_bmatching, MAX_ORACLE_EDGES};
use bmatch_core::streaming::{streaming_unweighted, EdgeStream, FileStream, StreamingParams, VecStream};
use bmatch_core::unweighted::{unweighted_one_plus_eps, UnweightedParams};
use bmatch_core::weighted::{weighted_one_plus_eps, WeightedParams};
use bmatch_core::{validate_bmatching, BMatching, BudgetVector, Graph, Weight};
use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Value};

use crate::input::{BudgetSpec, GraphSource};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Frac,
    #[value(name = "const")]
    Const,
    Unweighted,
    Weighted,
    Stream,
    Oracle,
}

/// Knobs shared by every algorithm; unset options keep the library defaults.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub eps: f64,
    pub mpc: MpcConfig,
    pub k_override: Option<usize>,
    pub phase_budget: Option<usize>,
    pub stall_limit: Option<usize>,
    pub repetitions: Option<usize>,
    pub class_repetitions: Option<usize>,
    pub weight_window: Option<u32>,
    pub max_layers: Option<usize>,
    pub memory_constant: Option<f64>,
    pub max_invocations: Option<usize>,
    pub with_oracle: bool,
    pub omit_timing: bool,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, seed: u64) -> Self {
        RunConfig {
            algorithm,
            seed,
            eps: 0.5,
            mpc: MpcConfig::with_seed(seed),
            k_override: None,
            phase_budget: None,
            stall_limit: None,
            repetitions: None,
            class_repetitions: None,
            weight_window: None,
            max_layers: None,
            memory_constant: None,
            max_invocations: None,
            with_oracle: false,
            omit_timing: false,
        }
    }

    pub fn lp_params(&self) -> LpParams {
        LpParams { repetitions: self.repetitions, ..LpParams::default() }
    }

    pub fn unweighted_params(&self) -> UnweightedParams {
        let d = UnweightedParams::default();
        let mut p = UnweightedParams {
            eps: self.eps,
            k_override: self.k_override,
            phase_budget: self.phase_budget.unwrap_or(d.phase_budget),
            stall_limit: self.stall_limit.unwrap_or(d.stall_limit),
            repetitions: self.repetitions,
            ..d
        };
        p.grow.max_invocations = self.max_invocations;
        p
    }

    pub fn weighted_params(&self) -> WeightedParams {
        let d = WeightedParams::default();
        WeightedParams {
            eps: self.eps,
            window_power: self.weight_window.unwrap_or(d.window_power),
            max_layers: self.max_layers.unwrap_or(d.max_layers),
            phase_budget: self.phase_budget.unwrap_or(d.phase_budget),
            stall_limit: self.stall_limit.unwrap_or(d.stall_limit),
            class_repetitions: self.class_repetitions.unwrap_or(d.class_repetitions),
            repetitions: self.repetitions,
            ..d
        }
    }

    pub fn streaming_params(&self) -> StreamingParams {
        let d = StreamingParams::default();
        let mut p = StreamingParams {
            eps: self.eps,
            k_override: self.k_override,
            phase_budget: self.phase_budget.unwrap_or(d.phase_budget),
            stall_limit: self.stall_limit.unwrap_or(d.stall_limit),
            repetitions: self.repetitions,
            memory_constant: self.memory_constant.unwrap_or(d.memory_constant),
            ..d
        };
        p.grow.max_invocations = self.max_invocations;
        p
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InputSummary {
    pub graph: String,
    pub budgets: String,
    pub n: usize,
    pub m: usize,
    pub avg_degree: f64,
    pub sum_b: u64,
    pub weighted: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunResult {
    /// Exact decimal (or `p/q`) value: weight, size or `sum x`.
    pub value: String,
    pub value_f64: f64,
    pub size: usize,
    pub valid: bool,
    pub validity: String,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MpcSummary {
    pub machines: usize,
    pub local_memory_words: usize,
    pub rounds: u64,
    pub peak_words: usize,
    pub peak_traffic: usize,
    pub round_log: RoundLog,
}

#[derive(Clone, Debug, Serialize)]
pub struct StreamingSummary {
    pub passes: usize,
    pub passes_per_copy: Vec<usize>,
    pub peak_words: usize,
    pub memory_budget: usize,
    pub k: usize,
    pub t: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct FractionalSummary {
    pub sum_x: f64,
    pub tight: bool,
    pub feasible: bool,
    pub certificate: bool,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimum: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub algorithm: Algorithm,
    pub input: InputSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    pub seed: u64,
    pub result: RunResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mpc: Option<MpcSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub streaming: Option<StreamingSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fractional: Option<FractionalSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSummary>,
    /// Validity of the output and of the memory meter.
    pub checks_passed: bool,
    pub detail: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

fn render(w: &Weight) -> String {
    format_decimal(w).unwrap_or_else(|| format!("{}/{}", w.numer(), w.denom()))
}

fn matching_result(g: &Graph, b: &BudgetVector, m: &BMatching, weighted: bool) -> RunResult {
    let ids = m.edge_ids();
    let report = validate_bmatching(g, b, &ids);
    let value = if weighted { m.weight(g) } else { Weight::from(m.len() as i64) };
    RunResult {
        value: render(&value),
        value_f64: weight_f64(&value),
        size: m.len(),
        valid: report.is_valid(),
        validity: if report.is_valid() { "ok".into() } else { report.summary() },
        edges: ids.iter().map(|&e| g.endpoints(e)).collect(),
    }
}

fn mpc_summary(cluster: &MachineCluster) -> MpcSummary {
    let log = cluster.log().clone();
    MpcSummary {
        machines: cluster.machine_count(),
        local_memory_words: cluster.local_memory_words(),
        rounds: log.rounds_executed,
        peak_words: log.max_peak(),
        peak_traffic: log.max_traffic(),
        round_log: log,
    }
}

struct Outcome {
    result: RunResult,
    mpc: Option<MpcSummary>,
    streaming: Option<StreamingSummary>,
    fractional: Option<FractionalSummary>,
    detail: Value,
    /// Objective the oracle ratio is taken against.
    weighted: bool,
}

fn run_algorithm(g: &Graph, b: &BudgetVector, source: &GraphSource, cfg: &RunConfig) -> Result<Outcome> {
    let mut cluster = MachineCluster::for_graph(cfg.mpc.clone(), g);
    let out = match cfg.algorithm {
        Algorithm::Frac => {
            let inst = LpInstance::unit(g, b);
            let out = full_mpc(&inst, &mut cluster, &cfg.lp_params())?;
            let alpha = Alpha::FIVE_HUNDREDTHS;
            let tight = loose_sets(&inst, &out.x, alpha).is_tight();
            let feasible = is_feasible(&inst, &out.x);
            let certificate = dual_certificate(&inst, &out.x, alpha).is_ok();
            let sum: bmatch_core::Fixed = out.x.iter().sum();
            let support: Vec<usize> = (0..g.m()).filter(|&e| !out.x[e].is_zero()).collect();
            let frac = FractionalSummary { sum_x: sum.to_f64(), tight, feasible, certificate, iterations: out.iterations };
            Outcome {
                result: RunResult {
                    value: sum.to_string(),
                    value_f64: sum.to_f64(),
                    size: support.len(),
                    valid: feasible && tight,
                    validity: if feasible && tight { "ok".into() } else { format!("feasible={feasible} tight={tight}") },
                    edges: support.iter().map(|&e| g.endpoints(e)).collect(),
                },
                mpc: Some(mpc_summary(&cluster)),
                streaming: None,
                fractional: Some(frac),
                detail: json!({ "branches": out.branches, "active_counts": out.active_counts }),
                weighted: false,
            }
        }
        Algorithm::Const => {
            let out = constant_approx_bmatching(g, b, &mut cluster, &cfg.lp_params())?;
            Outcome {
                result: matching_result(g, b, &out.matching, false),
                mpc: Some(mpc_summary(&cluster)),
                streaming: None,
                fractional: None,
                detail: serde_json::to_value(&out)?,
                weighted: false,
            }
        }
        Algorithm::Unweighted => {
            let out = unweighted_one_plus_eps(g, b, &mut cluster, &cfg.unweighted_params())?;
            Outcome {
                result: matching_result(g, b, &out.matching, false),
                mpc: Some(mpc_summary(&cluster)),
                streaming: None,
                fractional: None,
                detail: serde_json::to_value(&out)?,
                weighted: false,
            }
        }
        Algorithm::Weighted => {
            let out = weighted_one_plus_eps(g, b, &mut cluster, &cfg.weighted_params())?;
            Outcome {
                result: matching_result(g, b, &out.matching, true),
                mpc: Some(mpc_summary(&cluster)),
                streaming: None,
                fractional: None,
                detail: serde_json::to_value(&out)?,
                weighted: true,
            }
        }
        Algorithm::Stream => {
            let mut stream: Box<dyn EdgeStream> = match source.path() {
                Some(p) => Box::new(FileStream::open(p)?),
                None => Box::new(VecStream::from_graph(g)),
            };
            let out = streaming_unweighted(stream.as_mut(), b, &cfg.streaming_params(), cfg.seed)?;
            let m = out.to_bmatching(g, b)?;
            Outcome {
                result: matching_result(g, b, &m, false),
                mpc: None,
                streaming: Some(StreamingSummary {
                    passes: out.passes,
                    passes_per_copy: out.passes_per_copy.clone(),
                    peak_words: out.peak_words,
                    memory_budget: out.budget,
                    k: out.k,
                    t: out.t,
                }),
                fractional: None,
                detail: json!({
                    "best_copy": out.best_copy,
                    "copy_sizes": out.copy_sizes,
                    "invocations_per_copy": out.invocations_per_copy,
                    "size_history": out.size_history,
                    "prime": out.prime,
                }),
                weighted: false,
            }
        }
        Algorithm::Oracle => {
            let weighted = g.is_weighted();
            let out = exact_max_bmatching(g, b, weighted)?;
            Outcome {
                result: matching_result(g, b, &out.witness, weighted),
                mpc: None,
                streaming: None,
                fractional: None,
                detail: json!({ "optimum": render(&out.value) }),
                weighted,
            }
        }
    };
    Ok(out)
}

fn oracle_summary(g: &Graph, b: &BudgetVector, value: f64, weighted: bool) -> Result<OracleSummary> {
    if g.m() > MAX_ORACLE_EDGES {
        return Ok(OracleSummary {
            optimum: None,
            ratio: None,
            skipped: Some(format!("m = {} exceeds the oracle cap of {MAX_ORACLE_EDGES}", g.m())),
        });
    }
    let opt = exact_max_bmatching(g, b, weighted)?;
    let opt_value = if weighted { opt.value } else { Weight::from(opt.witness.len() as i64) };
    let denom = weight_f64(&opt_value);
    let ratio = if denom == 0.0 { 1.0 } else { value / denom };
    Ok(OracleSummary { optimum: Some(render(&opt_value)), ratio: Some(ratio), skipped: None })
}

/// Runs one algorithm and assembles its report.
pub fn execute(g: &Graph, b: &BudgetVector, source: &GraphSource, budgets: &BudgetSpec, cfg: &RunConfig) -> Result<Report> {
    if !(cfg.eps > 0.0 && cfg.eps <= 1.0) {
        bail!("eps must lie in (0, 1], got {}", cfg.eps);
    }
    b.check_for(g)?;
    let start = Instant::now();
    let out = run_algorithm(g, b, source, cfg)?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let oracle = if cfg.with_oracle { Some(oracle_summary(g, b, out.result.value_f64, out.weighted)?) } else { None };
    let memory_ok = out.mpc.as_ref().is_none_or(|m| m.round_log.violations.is_empty());
    let avg = g.avg_degree();
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        algorithm: cfg.algorithm,
        input: InputSummary {
            graph: source.to_string(),
            budgets: budgets.to_string(),
            n: g.n(),
            m: g.m(),
            avg_degree: *avg.numer() as f64 / *avg.denom() as f64,
            sum_b: b.total(),
            weighted: g.is_weighted(),
        },
        eps: matches!(cfg.algorithm, Algorithm::Unweighted | Algorithm::Weighted | Algorithm::Stream).then_some(cfg.eps),
        seed: cfg.seed,
        checks_passed: out.result.valid && memory_ok,
        result: out.result,
        mpc: out.mpc,
        streaming: out.streaming,
        fractional: out.fractional,
        oracle,
        detail: out.detail,
        wall_time_ms: (!cfg.omit_timing).then_some(elapsed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use bmatch_core::gen::Fixture;

    fn run(f: Fixture, algorithm: Algorithm, b: u32, seed: u64) -> Report {
        let source = GraphSource::Fixture(f);
        let spec = BudgetSpec::Constant(b);
        let g = source.load().unwrap();
        let budgets = spec.load(g.n(), seed).unwrap();
        let cfg = RunConfig { with_oracle: true, omit_timing: true, ..RunConfig::new(algorithm, seed) };
        execute(&g, &budgets, &source, &spec, &cfg).unwrap()
    }

    #[test]
    fn frac_on_the_triangle_is_tight() {
        let r = run(Fixture::F2, Algorithm::Frac, 1, 0);
        let f = r.fractional.unwrap();
        assert!(f.tight && f.feasible && f.certificate);
        assert!((f.sum_x - 1.2).abs() < 1e-9, "{}", f.sum_x);
        assert!(r.checks_passed);
    }

    #[test]
    fn oracle_values_on_fixtures() {
        assert_eq!(run(Fixture::F1, Algorithm::Oracle, 1, 0).result.value, "1");
        assert_eq!(run(Fixture::F2, Algorithm::Oracle, 1, 0).result.value, "1");
        assert_eq!(run(Fixture::F2, Algorithm::Oracle, 2, 0).result.value, "3");
    }

    #[test]
    fn every_algorithm_reports_a_valid_result() {
        for a in [Algorithm::Const, Algorithm::Unweighted, Algorithm::Weighted, Algorithm::Stream] {
            let r = run(Fixture::F3, a, 1, 4);
            assert!(r.result.valid, "{a:?}");
            let ratio = r.oracle.unwrap().ratio.unwrap();
            assert!((0.0..=1.0).contains(&ratio));
        }
    }

    #[test]
    fn rejects_bad_eps() {
        let source = GraphSource::Fixture(Fixture::F1);
        let g = source.load().unwrap();
        let b = BudgetVector::constant(2, 1);
        let cfg = RunConfig { eps: 0.0, ..RunConfig::new(Algorithm::Unweighted, 0) };
        assert!(execute(&g, &b, &source, &BudgetSpec::Constant(1), &cfg).is_err());
    }
}
