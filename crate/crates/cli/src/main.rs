use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use online_steiner::instance::{gen_euclidean, gen_graph, gen_spider, rescale, verify_instance, InstanceSpec};
use online_steiner::{run_experiment, Algorithm, MaintainerConfig, ReportFormat, RunConfig, VerifyLevel};

#[derive(Parser)]
#[command(name = "online-steiner", version, about = "Online spanning trees under swap budgets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance file.
    Gen(GenArgs),
    /// Run a maintainer over an instance and emit per-round reports.
    Run(RunArgs),
    /// Check an instance file: schema, metric axioms, spacing precondition.
    Verify {
        path: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Spider,
    Euclidean,
    Graph,
}

#[derive(Args)]
struct GenArgs {
    #[arg(value_enum)]
    family: Family,
    /// Spider copies.
    #[arg(long, default_value_t = 6)]
    k: usize,
    /// Points including the root (euclidean).
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Graph vertices (graph).
    #[arg(long, default_value_t = 20)]
    vertices: usize,
    /// Arriving terminals (graph).
    #[arg(long, default_value_t = 10)]
    terminals: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 6.0)]
    alpha: f64,
    /// Keep raw distances instead of scaling the minimum up to 2 alpha.
    #[arg(long)]
    no_rescale: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgArg {
    Constant,
    Single,
    Delta,
    Greedy,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Jsonl,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyArg {
    Off,
    Budget,
    Full,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "constant")]
    algorithm: AlgArg,
    #[arg(long, default_value_t = 6.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    /// Swap rate of the delta algorithm, as `1/m` or a decimal.
    #[arg(long, default_value = "1")]
    delta: String,
    #[arg(long)]
    k_override: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "jsonl")]
    format: FormatArg,
    #[arg(long, value_enum, default_value = "full")]
    verify_level: VerifyArg,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use exact rational arithmetic throughout.
    #[arg(long)]
    exact: bool,
}

fn parse_delta_inverse(text: &str) -> Result<u32, String> {
    let value = match text.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| format!("bad delta {text:?}"))?;
            let den: f64 = den.trim().parse().map_err(|_| format!("bad delta {text:?}"))?;
            num / den
        }
        None => text.trim().parse().map_err(|_| format!("bad delta {text:?}"))?,
    };
    if !(value > 0.0 && value <= 1.0) {
        return Err(format!("delta must lie in (0, 1], got {text}"));
    }
    let inv = (1.0 / value).round();
    if (1.0 / value - inv).abs() > 1e-9 {
        return Err(format!("1/delta must be an integer, got {}", 1.0 / value));
    }
    Ok(inv as u32)
}

fn gen(args: GenArgs) -> Result<(), String> {
    let spec = match args.family {
        Family::Spider if args.k == 0 => return Err("--k must be at least 1".into()),
        Family::Spider => gen_spider(args.k),
        Family::Euclidean if args.n == 0 => return Err("--n must be at least 1".into()),
        Family::Euclidean => gen_euclidean(args.n, args.dim, args.seed),
        Family::Graph if args.terminals == 0 || args.terminals > args.vertices => {
            return Err("need 1 <= --terminals <= --vertices".into())
        }
        Family::Graph => gen_graph(args.vertices, args.terminals, args.seed),
    };
    let spec = if args.no_rescale {
        InstanceSpec { alpha_for_scaling: args.alpha, ..spec }
    } else {
        rescale(&spec, args.alpha).map_err(|e| e.to_string())?.0
    };
    match args.out {
        Some(path) => spec.save(&path).map_err(|e| e.to_string()),
        None => writeln!(io::stdout(), "{}", spec.to_json()).map_err(|e| e.to_string()),
    }
}

fn run(args: RunArgs) -> Result<(), (u8, String)> {
    let delta_inverse = parse_delta_inverse(&args.delta).map_err(|e| (2, e))?;
    let algorithm = match args.algorithm {
        AlgArg::Constant => Algorithm::Constant,
        AlgArg::Single => Algorithm::Single,
        AlgArg::Delta => Algorithm::Delta,
        AlgArg::Greedy => Algorithm::Greedy,
    };
    let cfg = RunConfig {
        instance: args.instance,
        maintainer: MaintainerConfig {
            algorithm,
            alpha: args.alpha,
            k_override: args.k_override,
            epsilon: args.epsilon,
            delta_inverse,
            seed: args.seed,
            verify: match args.verify_level {
                VerifyArg::Off => VerifyLevel::Off,
                VerifyArg::Budget => VerifyLevel::Budget,
                VerifyArg::Full => VerifyLevel::Full,
            },
        },
        format: match args.format {
            FormatArg::Jsonl => ReportFormat::Jsonl,
            FormatArg::Csv => ReportFormat::Csv,
        },
        out: args.out,
        exact: args.exact,
    };
    let to_file = cfg.out.is_some();
    let mut stdout = io::stdout().lock();
    match run_experiment(&cfg, &mut stdout) {
        Ok(summary) => {
            if to_file || cfg.format == ReportFormat::Csv {
                let _ = writeln!(stdout, "{}", summary.to_json());
            }
            Ok(())
        }
        Err(e) => Err((e.exit_code() as u8, e.to_string())),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(args) => gen(args).map_err(|e| (2, e)),
        Command::Run(args) => run(args),
        Command::Verify { path } => InstanceSpec::load(&path)
            .and_then(|spec| verify_instance(&spec))
            .map(|s| {
                println!(
                    "ok: {} points, min distance {}",
                    s.points,
                    s.min_pairwise.map_or_else(|| "n/a".to_string(), |d| d.to_string())
                );
            })
            .map_err(|e| (2, e.to_string())),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::parse_delta_inverse;

    #[test]
    fn delta_forms() {
        assert_eq!(parse_delta_inverse("1"), Ok(1));
        assert_eq!(parse_delta_inverse("1/4"), Ok(4));
        assert_eq!(parse_delta_inverse("0.5"), Ok(2));
        assert!(parse_delta_inverse("0.3").is_err());
        assert!(parse_delta_inverse("2").is_err());
    }
}
