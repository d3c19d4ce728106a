//! Command-line front end. Exit codes: 0 success, 1 usage, 2 runtime error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::bp::{bf_walk, gw_height, truncated_progeny_law, TreeHeight};
use crate::degrees::{
    check_assumptions, iid_powerlaw_sequence, kn_default, powerlaw_quantile_sequence, DegreeSequence, Exponents,
};
use crate::error::{Error, Result};
use crate::explore::{components, explore_component, mass_profile};
use crate::graph::{critical_p, pair_half_edges, percolate_degrees, realize_percolated, sample_simple, HalfEdgeGraph};
use crate::lab::{records_jsonl, run_experiment, to_rounded_json, ExperimentSpec};
use crate::rng::substream;

#[derive(Parser, Debug)]
#[command(name = "cmlab", version, about = "Critical configuration model simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Output {
    /// Write to this file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Power-law degree sequence (quantile or i.i.d.)
    GenDegrees {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        tau: f64,
        #[arg(long, default_value_t = 1.0)]
        cf: f64,
        #[arg(long)]
        iid: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Configuration model edge list from a degree file
    Realize {
        #[arg(long)]
        degrees: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        simple: bool,
        #[arg(long, default_value_t = crate::graph::DEFAULT_MAX_ATTEMPTS)]
        max_attempts: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Percolation at p_c(lambda), realized as an edge list
    Percolate {
        #[arg(long)]
        degrees: PathBuf,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        lambda: f64,
        #[arg(long, default_value_t = 3.5)]
        tau: f64,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Exploration trace CSV of the component of a vertex
    Explore {
        #[arg(long)]
        graph: PathBuf,
        /// 1-based start vertex
        #[arg(long)]
        start: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Mass profile CSV of the rank-I component
    Mass {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 1)]
        rank: usize,
        /// Comma-separated delta values
        #[arg(long, value_delimiter = ',', required = true)]
        deltas: Vec<f64>,
        #[arg(long, default_value_t = 3.5)]
        tau: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Height versus harmonic functional of dominating trees
    BpHeight {
        #[arg(long)]
        degrees: PathBuf,
        #[arg(long, default_value_t = 3.5)]
        tau: f64,
        #[arg(long)]
        eps: Option<f64>,
        /// Truncation index; K_n when absent
        #[arg(long)]
        index: Option<usize>,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1_000_000)]
        max_steps: usize,
        #[command(flatten)]
        output: Output,
    },
    /// Finite-n assumption diagnostics as JSON
    CheckAssumptions {
        #[arg(long)]
        degrees: PathBuf,
        #[arg(long)]
        tau: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        lambda: f64,
        #[arg(long)]
        k_probe: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// Monte Carlo experiment from a JSON config
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Trial JSONL path; the summary goes to `<out>.summary.json` unless configured
        #[command(flatten)]
        output: Output,
    },
}

fn read(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn emit(output: &Output, text: &str) -> Result<()> {
    match &output.out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::GenDegrees { n, tau, cf, iid, seed, output } => {
            let d = if iid { iid_powerlaw_sequence(n, tau, cf, seed)? } else { powerlaw_quantile_sequence(n, tau, cf)? };
            emit(&output, &d.to_text())
        }
        Command::Realize { degrees, seed, simple, max_attempts, output } => {
            let d = DegreeSequence::from_text(&read(&degrees)?)?;
            let g = if simple { sample_simple(&d, seed, max_attempts)?.graph } else { pair_half_edges(&d, seed)? };
            emit(&output, &g.to_edge_list())
        }
        Command::Percolate { degrees, lambda, tau, seed, output } => {
            let d = DegreeSequence::from_text(&read(&degrees)?)?;
            let exp = Exponents::from_tau(tau, lambda)?;
            let p = critical_p(&d, &exp)?;
            let outcome = percolate_degrees(&d, p, substream(seed, 1))?;
            let g = realize_percolated(&outcome, substream(seed, 2))?;
            eprintln!("p={p} retained_pairs={}", outcome.retained_count);
            emit(&output, &g.to_edge_list())
        }
        Command::Explore { graph, start, output } => {
            let g = HalfEdgeGraph::from_edge_list(&read(&graph)?)?;
            if start == 0 {
                return Err(Error::Domain("vertices are 1-based".into()));
            }
            emit(&output, &explore_component(&g, start - 1)?.to_csv())
        }
        Command::Mass { graph, rank, deltas, tau, output } => {
            let g = HalfEdgeGraph::from_edge_list(&read(&graph)?)?;
            let exp = Exponents::from_tau(tau, 0.0)?;
            let comps = components(&g);
            let comp = rank
                .checked_sub(1)
                .and_then(|r| comps.get(r))
                .ok_or_else(|| Error::Domain(format!("no component of rank {rank}")))?;
            emit(&output, &mass_profile(&g, comp, &deltas, &exp)?.to_csv())
        }
        Command::BpHeight { degrees, tau, eps, index, trials, seed, max_steps, output } => {
            let d = DegreeSequence::from_text(&read(&degrees)?)?;
            let exp = Exponents::from_tau(tau, 0.0)?;
            let eps = eps.unwrap_or(exp.default_eps());
            let i = match index {
                Some(i) => i,
                None => kn_default(d.n(), &exp)?,
            };
            let law = truncated_progeny_law(&d, i, &exp, eps)?;
            let check = crate::bp::height_harmonic_check(&law, seed, trials, max_steps)?;
            let first: TreeHeight = gw_height(&law, 1, substream(seed, 0), max_steps)?;
            let walk = bf_walk(&law, 1, substream(seed, 0), max_steps, &[])?;
            let report = json!({
                "index": i,
                "eps": eps,
                "law_mean": law.mean(),
                "law_variance": law.variance(),
                "trials": trials,
                "violations": check.violations,
                "max_ratio": check.max_ratio,
                "absorbed": check.absorbed,
                "excluded": check.excluded,
                "first_tree": {"height": first.height, "harmonic": walk.harmonic, "sigma": walk.sigma},
            });
            emit(&output, &(to_rounded_json(&report, true)? + "\n"))
        }
        Command::CheckAssumptions { degrees, tau, lambda, k_probe, output } => {
            let d = DegreeSequence::from_text(&read(&degrees)?)?;
            let exp = Exponents::from_tau(tau, lambda)?;
            let k = match k_probe {
                Some(k) => k,
                None => kn_default(d.n(), &exp)?,
            };
            emit(&output, &(to_rounded_json(&check_assumptions(&d, &exp, k)?, true)? + "\n"))
        }
        Command::Experiment { config, output } => {
            let mut spec = ExperimentSpec::from_json(&read(&config)?)?;
            if let Some(p) = &output.out {
                spec.trials_out = Some(p.display().to_string());
                if spec.summary_out.is_none() {
                    spec.summary_out = Some(format!("{}.summary.json", p.display()));
                }
            }
            let out = run_experiment(&spec)?;
            let summary = out.summary_json()? + "\n";
            match &spec.trials_out {
                Some(p) => std::fs::write(p, out.jsonl()?)?,
                None => std::io::stdout().write_all(records_jsonl(&out.records)?.as_bytes())?,
            }
            match &spec.summary_out {
                Some(p) => std::fs::write(p, summary)?,
                None => std::io::stdout().write_all(summary.as_bytes())?,
            }
            Ok(())
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
