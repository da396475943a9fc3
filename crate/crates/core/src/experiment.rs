//! Batch runs: feed an instance through a maintainer and stream per-round reports.

use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::instance::{InstanceError, InstanceSpec};
use crate::leveled_tree::LeveledEdge;
use crate::maintainer::{Algorithm, Maintainer, MaintainerConfig, MaintainerError, RoundReport};
use crate::scalar::{Exact, Scalar};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Jsonl,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(ReportFormat::Jsonl),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub instance: PathBuf,
    pub maintainer: MaintainerConfig,
    pub out: Option<PathBuf>,
    pub format: ReportFormat,
    /// Run on exact rationals instead of `f64`.
    pub exact: bool,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("{0}")]
    Input(MaintainerError),
    #[error("invariant violated: {0}")]
    Invariant(MaintainerError),
    #[error("write failed: {0}")]
    Io(String),
}

impl RunError {
    /// 1 for a broken invariant, 2 for bad input or I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Invariant(_) => 1,
            _ => 2,
        }
    }
}

impl From<MaintainerError> for RunError {
    fn from(e: MaintainerError) -> Self {
        if e.is_input_error() {
            RunError::Input(e)
        } else {
            RunError::Invariant(e)
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub instance: String,
    pub algorithm: Algorithm,
    pub rounds: usize,
    pub cum_swaps: usize,
    pub max_swap_count: usize,
    pub final_cost: f64,
    pub mst: f64,
    pub dual_lb: Option<f64>,
    pub steiner_opt: Option<f64>,
    /// Greedy only.
    pub lineage_ratio: Option<Exact>,
}

impl RunSummary {
    pub fn to_json(&self) -> Value {
        json!({
            "type": "summary",
            "instance": self.instance,
            "algorithm": self.algorithm.name(),
            "rounds": self.rounds,
            "cum_swaps": self.cum_swaps,
            "final_cost": self.final_cost,
            "mst": self.mst,
            "dual_lb": self.dual_lb,
            "steiner_opt": self.steiner_opt,
            "max_swap_count": self.max_swap_count,
            "lineage_ratio": self.lineage_ratio.as_ref().map(ToString::to_string),
        })
    }
}

fn edge_json<S: Scalar>(e: &LeveledEdge<S>) -> Value {
    json!([e.u, e.v, e.length.lossy_f64(), e.level])
}

fn edges_csv<S: Scalar>(edges: &[LeveledEdge<S>]) -> String {
    edges
        .iter()
        .map(|e| format!("{}-{}:{}:{}", e.u, e.v, e.length.lossy_f64(), e.level))
        .collect::<Vec<_>>()
        .join(";")
}

fn lossy(x: &Option<Exact>) -> Option<f64> {
    x.as_ref().map(Scalar::lossy_f64)
}

fn round_json<S: Scalar>(r: &RoundReport<S>, steiner: Option<f64>) -> Value {
    json!({
        "type": "round",
        "round": r.round,
        "algorithm": r.algorithm.name(),
        "added": r.trace.added.iter().map(edge_json).collect::<Vec<_>>(),
        "removed": r.trace.removed.iter().map(edge_json).collect::<Vec<_>>(),
        "swap_count": r.swap_count,
        "cum_swaps": r.cum_swaps,
        "tree_cost": r.tree_cost.lossy_f64(),
        "mst_cost": r.mst_cost.lossy_f64(),
        "dual_lb": lossy(&r.dual_lb),
        "weight_rank": lossy(&r.weight_rank),
        "weight_vrank": lossy(&r.weight_vrank),
        "steiner_opt": steiner,
    })
}

const CSV_COLUMNS: [&str; 12] = [
    "round",
    "algorithm",
    "added",
    "removed",
    "swap_count",
    "cum_swaps",
    "tree_cost",
    "mst_cost",
    "dual_lb",
    "weight_rank",
    "weight_vrank",
    "steiner_opt",
];

fn opt_cell(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

enum Sink<'a> {
    Jsonl(&'a mut dyn Write),
    Csv(csv::Writer<&'a mut dyn Write>),
}

impl Sink<'_> {
    fn header(&mut self, v: &Value) -> Result<(), RunError> {
        match self {
            Sink::Jsonl(w) => writeln!(w, "{v}")?,
            Sink::Csv(w) => w.write_record(CSV_COLUMNS)?,
        }
        Ok(())
    }

    fn round<S: Scalar>(&mut self, r: &RoundReport<S>, steiner: Option<f64>) -> Result<(), RunError> {
        match self {
            Sink::Jsonl(w) => writeln!(w, "{}", round_json(r, steiner))?,
            Sink::Csv(w) => w.write_record([
                r.round.to_string(),
                r.algorithm.name().to_string(),
                edges_csv(&r.trace.added),
                edges_csv(&r.trace.removed),
                r.swap_count.to_string(),
                r.cum_swaps.to_string(),
                r.tree_cost.lossy_f64().to_string(),
                r.mst_cost.lossy_f64().to_string(),
                opt_cell(lossy(&r.dual_lb)),
                opt_cell(lossy(&r.weight_rank)),
                opt_cell(lossy(&r.weight_vrank)),
                opt_cell(steiner),
            ])?,
        }
        Ok(())
    }

    /// JSONL streams carry trailing status lines; CSV holds rounds only.
    fn line(&mut self, v: &Value) -> Result<(), RunError> {
        match self {
            Sink::Jsonl(w) => writeln!(w, "{v}")?,
            Sink::Csv(w) => w.flush()?,
        }
        Ok(())
    }
}

/// Run `spec` under `config`, writing one record per arrival to `out`.
pub fn run_spec<S: Scalar>(
    spec: &InstanceSpec,
    config: &MaintainerConfig,
    format: ReportFormat,
    out: &mut dyn Write,
) -> Result<RunSummary, RunError> {
    let rows = spec.arrival_rows::<S>()?;
    spec.metric::<f64>()?;
    let steiner = match spec.steiner_opt_all() {
        Some(r) => Some(r?),
        None => None,
    };
    let mut mt = Maintainer::<S>::new(config.clone())?;
    let mut sink = match format {
        ReportFormat::Jsonl => Sink::Jsonl(out),
        ReportFormat::Csv => Sink::Csv(csv::Writer::from_writer(out)),
    };
    sink.header(&json!({
        "type": "header",
        "instance": spec.name,
        "points": rows.len(),
        "algorithm": config.algorithm.name(),
        "alpha": config.alpha,
        "k": config.k(),
        "epsilon": config.epsilon,
        "delta_inverse": config.delta_inverse,
        "seed": config.seed,
        "verify": config.verify,
    }))?;

    let mut last: Option<RoundReport<S>> = None;
    for row in rows.iter().skip(1) {
        match mt.on_arrival(row) {
            Ok(r) => {
                let opt = steiner.as_ref().map(|s| s[r.round]);
                sink.round(&r, opt)?;
                last = Some(r);
            }
            Err(e) => {
                let round = mt.metric().len();
                sink.line(&json!({"type": "error", "round": round, "message": e.to_string()}))?;
                return Err(e.into());
            }
        }
    }

    let summary = RunSummary {
        instance: spec.name.clone(),
        algorithm: config.algorithm,
        rounds: rows.len().saturating_sub(1),
        cum_swaps: mt.cum_swaps(),
        max_swap_count: mt.max_swaps(),
        final_cost: mt.tree().cost().lossy_f64(),
        mst: last.as_ref().map_or(0.0, |r| r.mst_cost.lossy_f64()),
        dual_lb: match &last {
            Some(r) => lossy(&r.dual_lb),
            None if config.algorithm != Algorithm::Greedy || rows.len() == 1 => Some(0.0),
            None => None,
        },
        steiner_opt: steiner.as_ref().and_then(|s| s.last().copied()),
        lineage_ratio: if config.algorithm == Algorithm::Greedy {
            Some(mt.lineage_ratio().map_err(MaintainerError::from)?)
        } else {
            None
        },
    };
    sink.line(&summary.to_json())?;
    Ok(summary)
}

/// Load `cfg.instance`, run it, and write reports to `cfg.out` or `stdout`.
pub fn run_experiment(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<RunSummary, RunError> {
    let spec = InstanceSpec::load(&cfg.instance)?;
    let mut file;
    let out: &mut dyn Write = match &cfg.out {
        Some(path) => {
            file = std::io::BufWriter::new(
                std::fs::File::create(path).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?,
            );
            &mut file
        }
        None => stdout,
    };
    let summary = if cfg.exact {
        run_spec::<Exact>(&spec, &cfg.maintainer, cfg.format, out)
    } else {
        run_spec::<f64>(&spec, &cfg.maintainer, cfg.format, out)
    };
    out.flush()?;
    summary
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{gen_euclidean, gen_graph, gen_spider, rescale};

    fn jsonl<S: Scalar>(spec: &InstanceSpec, cfg: &MaintainerConfig) -> (String, Result<RunSummary, RunError>) {
        let mut buf = Vec::new();
        let res = run_spec::<S>(spec, cfg, ReportFormat::Jsonl, &mut buf);
        (String::from_utf8(buf).unwrap(), res)
    }

    #[test]
    fn root_only_run() {
        let spec = gen_euclidean(1, 2, 3);
        let (text, res) = jsonl::<f64>(&spec, &MaintainerConfig::default());
        let summary = res.unwrap();
        assert_eq!(summary.rounds, 0);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].contains("\"type\":\"header\""));
        assert!(!text.contains("\"type\":\"round\""));
        assert_eq!(summary.final_cost, 0.0);
    }

    #[test]
    fn single_respects_budget_and_reruns_identically() {
        let (spec, _) = rescale(&gen_euclidean(40, 2, 11), 6.0).unwrap();
        let cfg = MaintainerConfig::new(Algorithm::Single);
        let (a, ra) = jsonl::<f64>(&spec, &cfg);
        let (b, _) = jsonl::<f64>(&spec, &cfg);
        assert_eq!(a, b);
        assert!(ra.unwrap().max_swap_count <= 1);
        assert_eq!(a.lines().count(), 1 + 39 + 1);
    }

    #[test]
    fn graph_run_reports_steiner() {
        let (spec, _) = rescale(&gen_graph(12, 6, 4), 6.0).unwrap();
        let (text, res) = jsonl::<f64>(&spec, &MaintainerConfig::default());
        let s = res.unwrap();
        let opt = s.steiner_opt.unwrap();
        assert!(s.dual_lb.unwrap() <= opt);
        assert!(s.final_cost >= opt);
        let last_round: Value = serde_json::from_str(text.lines().nth(5).unwrap()).unwrap();
        assert_eq!(last_round["steiner_opt"].as_f64(), Some(opt));
    }

    #[test]
    fn exact_and_float_agree_on_integral_instance() {
        let (spec, _) = rescale(&gen_spider(3), 6.0).unwrap();
        for alg in [Algorithm::Constant, Algorithm::Greedy] {
            let cfg = MaintainerConfig::new(alg);
            let (a, ra) = jsonl::<f64>(&spec, &cfg);
            let (b, rb) = jsonl::<Exact>(&spec, &cfg);
            assert_eq!(a, b);
            assert_eq!(ra.unwrap(), rb.unwrap());
        }
    }

    #[test]
    fn unscaled_instance_is_input_error() {
        let spec = gen_euclidean(5, 2, 1);
        let (text, res) = jsonl::<f64>(&spec, &MaintainerConfig::default());
        let err = res.unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(text.contains("\"type\":\"error\""));
    }

    #[test]
    fn csv_has_one_row_per_round() {
        let (spec, _) = rescale(&gen_spider(2), 6.0).unwrap();
        let mut buf = Vec::new();
        run_spec::<f64>(&spec, &MaintainerConfig::new(Algorithm::Greedy), ReportFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 8);
        assert!(text.starts_with("round,algorithm,added"));
    }
}
