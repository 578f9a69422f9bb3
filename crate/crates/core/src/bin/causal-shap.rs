use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use causal_shap::attribution::Method;
use causal_shap::config::RunConfig;
use causal_shap::data::{builtin_spec, sample_sem};
use causal_shap::error::{Error, Result};
use causal_shap::output::{bar_chart_svg, format_table_value, insertion_curves_svg, write_json, write_text};
use causal_shap::pipeline;

#[derive(Parser)]
#[command(name = "causal-shap", version, about = "Causality-aware Shapley attributions")]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "CAUSAL_SHAP_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Dotted-path override such as `attribution.mc_samples=128` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a built-in structural equation model to CSV plus a truth sidecar.
    Generate {
        #[arg(long)]
        spec: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run PC on the training split: cpdag.json, discovery.json, graph.dot.
    Discover(ConfigArgs),
    /// Estimate edge weights and causal weight factors: effects.json.
    Effects(ConfigArgs),
    /// Explain test instances: attributions.json, bars.svg.
    Attribute {
        #[command(flatten)]
        config: ConfigArgs,
        /// Overrides attribution.method.
        #[arg(long)]
        method: Option<String>,
    },
    /// Ground-truth RMSE or insertion curves over the configured seeds: report.json, report.csv, curves.svg.
    Evaluate(ConfigArgs),
    /// Print a four-decimal table of an attributions.json or report.json.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
}

fn load(args: &ConfigArgs) -> Result<RunConfig> {
    RunConfig::load(&args.config, &args.overrides)
}

fn truth_path(out: &Path) -> PathBuf {
    out.with_extension("truth.json")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { spec, n, seed, out } => {
            let spec = builtin_spec(&spec, seed).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            if n == 0 {
                return Err(Error::InvalidArgument("--n must be positive".into()));
            }
            let table = sample_sem(&spec, n)?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| Error::Io {
                    path: parent.into(),
                    source: e,
                })?;
            }
            table.save_csv(&out)?;
            write_json(&truth_path(&out), &pipeline::truth_json(&spec)?)?;
            eprintln!("wrote {} rows to {}", n, out.display());
        }
        Command::Discover(args) => {
            let cfg = load(&args)?;
            let prepared = pipeline::prepare(&cfg)?;
            let result = pipeline::discover(&cfg, &prepared.split.train)?;
            write_json(&cfg.output_dir.join("cpdag.json"), &result.cpdag.to_json())?;
            write_json(&cfg.output_dir.join("discovery.json"), &pipeline::discovery_details_json(&result))?;
            write_text(&cfg.output_dir.join("graph.dot"), &result.cpdag.to_dot())?;
            eprintln!("{} edges", result.cpdag.n_edges());
        }
        Command::Effects(args) => {
            let cfg = load(&args)?;
            let prepared = pipeline::prepare(&cfg)?;
            let result = pipeline::discover(&cfg, &prepared.split.train)?;
            let effects = pipeline::effects(&cfg, &prepared.split.train, &result)?;
            write_json(&cfg.output_dir.join("effects.json"), &effects.to_json())?;
        }
        Command::Attribute { config, method } => {
            let mut cfg = load(&config)?;
            if let Some(m) = method {
                cfg.attribution.method = m.parse::<Method>()?;
            }
            let run = pipeline::attribute(&cfg)?;
            let json = run.to_json()?;
            write_json(&cfg.output_dir.join("attributions.json"), &json)?;
            let mean_abs: Vec<f64> = serde_json::from_value(json["summary"]["mean_abs"].clone())?;
            let svg = bar_chart_svg(
                "Mean |attribution|",
                &run.feature_names,
                &[(run.method.to_string(), mean_abs.clone())],
            );
            write_text(&cfg.output_dir.join("bars.svg"), &svg)?;
            for (name, v) in run.feature_names.iter().zip(&mean_abs) {
                println!("{name:<24} {}", format_table_value(*v));
            }
        }
        Command::Evaluate(args) => {
            let cfg = load(&args)?;
            let report = pipeline::evaluate(&cfg)?;
            write_json(&cfg.output_dir.join("report.json"), &report)?;
            write_text(&cfg.output_dir.join("report.csv"), &report.csv()?)?;
            write_text(&cfg.output_dir.join("curves.svg"), &insertion_curves_svg(&report.insertion))?;
            let series: Vec<(String, Vec<f64>)> = report
                .seeds
                .first()
                .map(|s| s.profiles.iter().map(|p| (p.method.clone(), p.mean_abs.clone())).collect())
                .unwrap_or_default();
            write_text(
                &cfg.output_dir.join("bars.svg"),
                &bar_chart_svg("Mean |attribution| (first seed)", &report.feature_names, &series),
            )?;
            print!("{}", render_report(&serde_json::to_value(&report)?)?);
        }
        Command::Report { input } => {
            let text = std::fs::read_to_string(&input).map_err(|e| Error::InvalidArgument(format!("{}: {e}", input.display())))?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            print!("{}", render_report(&value)?);
        }
    }
    Ok(())
}

fn f(v: &serde_json::Value) -> String {
    v.as_f64().map_or_else(|| "-".into(), format_table_value)
}

/// Human-readable summary of either artifact kind.
fn render_report(value: &serde_json::Value) -> Result<String> {
    let mut out = String::new();
    if let Some(summary) = value.get("summary") {
        let names = value["feature_names"].as_array().cloned().unwrap_or_default();
        out.push_str(&format!("method: {}\n", value["method"].as_str().unwrap_or("?")));
        out.push_str(&format!("{:<24} {:>12} {:>12}\n", "feature", "mean |phi|", "mean phi"));
        for (k, name) in names.iter().enumerate() {
            out.push_str(&format!(
                "{:<24} {:>12} {:>12}\n",
                name.as_str().unwrap_or("?"),
                f(&summary["mean_abs"][k]),
                f(&summary["mean_signed"][k])
            ));
        }
        return Ok(out);
    }
    if let Some(seeds) = value.get("seeds").and_then(|s| s.as_array()) {
        if let Some(reduced) = value["reduced_features"].as_array() {
            let reduced: Vec<&str> = reduced.iter().filter_map(|v| v.as_str()).collect();
            out.push_str(&format!("reduced feature set: {}\n", reduced.join(", ")));
            out.push_str(&format!("{:<10} {:>12} {:>12}\n", "method", "RMSE mean", "RMSE sd"));
            for m in value["rmse_summary"].as_array().into_iter().flatten() {
                out.push_str(&format!(
                    "{:<10} {:>12} {:>12}\n",
                    m["method"].as_str().unwrap_or("?"),
                    f(&m["rmse_mean"]),
                    f(&m["rmse_sd"])
                ));
            }
            if let Some(first) = seeds.first() {
                out.push_str(&format!("seed {} signed mean profiles on the reduced set:\n", first["seed"]));
                for g in first["ground_truth"].as_array().into_iter().flatten() {
                    let exact: Vec<String> = g["exact_values"].as_array().into_iter().flatten().map(f).collect();
                    let got: Vec<String> = g["method_values"].as_array().into_iter().flatten().map(f).collect();
                    out.push_str(&format!(
                        "  {:<10} truth [{}] method [{}]\n",
                        g["method"].as_str().unwrap_or("?"),
                        exact.join(", "),
                        got.join(", ")
                    ));
                }
            }
        }
        let insertion = value["insertion"].as_array().cloned().unwrap_or_default();
        if !insertion.is_empty() {
            out.push_str(&format!(
                "{:<10} {:>18} {:>18} {:>18}\n",
                "method", "AUROC", "cross entropy", "Brier"
            ));
            for r in &insertion {
                let pm = |k: &str| format!("{} ± {}", f(&r["mean"][k]), f(&r["sd"][k]));
                out.push_str(&format!(
                    "{:<10} {:>18} {:>18} {:>18}\n",
                    r["method"].as_str().unwrap_or("?"),
                    pm("auroc"),
                    pm("cross_entropy"),
                    pm("brier")
                ));
            }
        }
        return Ok(out);
    }
    Err(Error::InvalidArgument("input is neither an attributions nor an evaluation report".into()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: could not size the worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
