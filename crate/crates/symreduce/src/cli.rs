//! The `symreduce` command line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use symreduce_core::bench::{
    add_noise, recovery, sample_problem, BenchConfig, NoiseLevel, Problem,
};
use symreduce_core::beam::{search, BeamConfig, SearchResult, SubTypes};
use symreduce_core::expr::{parse, parse_with, ExprDag, ParseOptions};
use symreduce_core::regress::{solve_pipeline, RegressorSpec};
use symreduce_core::substitution::{verify, InputSub, OutInputSub, SubstError, Substitution};
use symreduce_core::{Dataset, Measure};

use crate::io::{read_dataset_file, write_dataset, write_plot_data, write_report, write_trace, y_map_text};
use crate::runner::{build_regressor, noise_sweep, run_benchmark};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "symreduce", version, about = "Dimension reduction for symbolic regression")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Seed for sampling, noise and the holdout split.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Dependence measure: xi, codec, kmac or volume.
    #[arg(long, global = true, default_value = "codec")]
    pub measure: Measure,
    /// Candidates kept per search level.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub beam_size: u64,
    /// Substitution types: input, outinput or both.
    #[arg(long, global = true, default_value = "both")]
    pub sub_types: SubTypes,
    /// Intermediary nodes allowed in substitution DAGs.
    #[arg(long, global = true, default_value_t = 1)]
    pub max_intermediary: usize,
    /// poly, dagsearch or external:<command>.
    #[arg(long, global = true, default_value = "dagsearch")]
    pub regressor: String,
    /// Timeout in seconds for external regressors.
    #[arg(long, global = true, default_value_t = 600.0)]
    pub timeout: f64,
    /// Noise level gamma (noise std = gamma * RMS(y)).
    #[arg(long, global = true, default_value_t = 0.0)]
    pub noise: f64,
    /// Fraction of rows held out for testing.
    #[arg(long, global = true, default_value_t = 0.2)]
    pub holdout: f64,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Number of samples drawn per formula.
    #[arg(long, global = true, default_value_t = 1000)]
    pub n: usize,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Search substitutions for a CSV dataset and write the reduced problems.
    Reduce { csv: PathBuf },
    /// Reduce, fit every node on the best path and print the best model.
    Solve {
        csv: PathBuf,
        /// Known formula; adds a recovery line.
        #[arg(long)]
        formula: Option<String>,
    },
    /// Run a benchmark over a corpus file or a bundled corpus
    /// (feynman, eponymous, smoke).
    Bench {
        corpus: String,
        /// Skip regression and report reduction metrics only.
        #[arg(long)]
        no_regress: bool,
        /// Also write (noise_level, mean_reduction_rate, measure) records
        /// for a noise sweep of the chosen measure and the volume baseline.
        #[arg(long)]
        plot_data: Option<PathBuf>,
        /// Noise levels of the sweep.
        #[arg(long, value_delimiter = ',', default_value = "0,0.001,0.01,0.1")]
        noise_levels: Vec<f64>,
    },
    /// Check a substitution against a known formula.
    Verify {
        /// The formula over x1..xd.
        formula: String,
        /// g over the original variable names, or h with the response as y.
        substitution: String,
        /// Comma-separated 1-based variables of the substitution; defaults to
        /// those it uses.
        #[arg(long, value_delimiter = ',')]
        indices: Option<Vec<usize>>,
        /// Number of variables of the problem; defaults to the formula's.
        #[arg(long)]
        d: Option<usize>,
    },
    /// Sample a formula to CSV.
    Sample {
        formula: String,
        /// Number of variables; defaults to the formula's.
        #[arg(long)]
        d: Option<usize>,
    },
}

impl Global {
    fn beam(&self) -> BeamConfig {
        let mut cfg = BeamConfig {
            beam_size: self.beam_size as usize,
            measure: self.measure,
            sub_types: self.sub_types,
            ..BeamConfig::default()
        };
        cfg.budget.max_intermediary_nodes = self.max_intermediary;
        cfg
    }

    fn regressor_spec(&self) -> Result<RegressorSpec, CliError> {
        match self.regressor.as_str() {
            "poly" => Ok(RegressorSpec::poly()),
            "dagsearch" => Ok(RegressorSpec::dagsearch()),
            other => match other.strip_prefix("external:") {
                Some(cmd) if !cmd.trim().is_empty() => {
                    Ok(RegressorSpec::External { command: cmd.to_string(), timeout_secs: self.timeout })
                }
                _ => Err(CliError::Usage(format!(
                    "unknown regressor {other:?}; use poly, dagsearch or external:<command>"
                ))),
            },
        }
    }

    fn check(&self) -> Result<(), CliError> {
        if !(self.holdout > 0.0 && self.holdout < 1.0) {
            return Err(CliError::Usage("--holdout must be in (0, 1)".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(CliError::Usage("--noise must be non-negative".into()));
        }
        if self.n == 0 {
            return Err(CliError::Usage("--n must be positive".into()));
        }
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(CliError::Usage("--timeout must be positive".into()));
        }
        self.regressor_spec().map(|_| ())
    }
}

fn load_noisy(csv: &Path, g: &Global) -> Result<Dataset, CliError> {
    let ds = read_dataset_file(csv).map_err(|e| CliError::Data(format!("{}: {e}", csv.display())))?;
    if g.noise == 0.0 {
        return Ok(ds);
    }
    let y = add_noise(ds.y(), g.noise, g.seed);
    Dataset::new(ds.x().clone(), y).map_err(data_err)
}

fn write_out(path: &Path, f: impl FnOnce(&mut fs::File) -> Result<(), crate::io::IoError>) -> Result<(), CliError> {
    let mut file = fs::File::create(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    f(&mut file).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn cmd_reduce(csv: &Path, g: &Global, out: &mut dyn Write) -> Result<(), CliError> {
    let ds = load_noisy(csv, g)?;
    let result = search(ds, &g.beam());
    print_nodes(&result, out)?;
    if let Some(dir) = &g.out {
        fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
        write_out(&dir.join("trace.jsonl"), |f| write_trace("input", &result, f))?;
        for node in &result.nodes {
            write_out(&dir.join(format!("node{}.csv", node.id)), |f| write_dataset(&node.dataset, f))?;
            let mut maps = String::new();
            for (j, m) in node.dataset.var_map().iter().enumerate() {
                maps.push_str(&format!("x{} = {}\n", j + 1, m));
            }
            maps.push_str(&format!("y = {}\n", y_map_text(&node.dataset)));
            fs::write(dir.join(format!("node{}.maps", node.id)), maps).map_err(data_err)?;
        }
    }
    Ok(())
}

fn print_nodes(result: &SearchResult, out: &mut dyn Write) -> Result<(), CliError> {
    for t in result.trace() {
        writeln!(
            out,
            "node\t{}\tdepth\t{}\tvars\t{}\tscore\t{}\tbest_path\t{}\t{}",
            t.node, t.depth, t.n_vars, t.score, t.on_best_path, t.substitution
        )
        .map_err(data_err)?;
    }
    Ok(())
}

fn cmd_solve(csv: &Path, formula: Option<&str>, g: &Global, out: &mut dyn Write) -> Result<(), CliError> {
    let truth = formula.map(parse).transpose().map_err(|e| CliError::Usage(format!("formula: {e}")))?;
    let ds = load_noisy(csv, g)?;
    let result = search(ds, &g.beam());
    let reg = build_regressor(&g.regressor_spec()?);
    let solved = solve_pipeline(&result, reg.as_ref(), g.holdout, g.seed);
    writeln!(out, "expression\t{}", solved.expr).map_err(data_err)?;
    writeln!(out, "nrmse_test\t{}", solved.nrmse_test).map_err(data_err)?;
    writeln!(out, "complexity\t{}", solved.complexity).map_err(data_err)?;
    writeln!(out, "source_node_depth\t{}", solved.source_node_depth).map_err(data_err)?;
    if let Some(f) = truth {
        writeln!(out, "recovered\t{}", recovery(&f, &solved.expr)).map_err(data_err)?;
    }
    Ok(())
}

fn load_corpus(arg: &str) -> Result<Vec<Problem>, CliError> {
    let text = match crate::corpus::bundled(arg) {
        Some(t) => t.to_string(),
        None => fs::read_to_string(arg).map_err(|e| CliError::Data(format!("{arg}: {e}")))?,
    };
    symreduce_core::bench::parse_corpus(&text).map_err(|e| CliError::Data(format!("{arg}: {e}")))
}

fn cmd_bench(
    corpus: &str,
    no_regress: bool,
    plot_data: Option<&Path>,
    noise_levels: &[f64],
    g: &Global,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let problems = load_corpus(corpus)?;
    let cfg = BenchConfig {
        beam: g.beam(),
        noise: NoiseLevel { gamma: g.noise },
        n_samples: g.n,
        holdout_fraction: g.holdout,
        seed: g.seed,
    };
    let spec = if no_regress { None } else { Some(g.regressor_spec()?) };
    let run = run_benchmark(&problems, &cfg, spec.as_ref());
    match &g.out {
        Some(path) => {
            write_out(path, |f| write_report(&run.report, f))?;
            let mut trace_path = path.as_os_str().to_owned();
            trace_path.push(".trace.jsonl");
            write_out(Path::new(&trace_path), |f| {
                for (p, o) in problems.iter().zip(&run.outcomes) {
                    if let Some(o) = o {
                        write_trace(&p.id, &o.search, &mut *f)?;
                    }
                }
                Ok(())
            })?;
        }
        None => write_report(&run.report, &mut *out).map_err(data_err)?,
    }
    if let Some(path) = plot_data {
        let mut measures = vec![g.measure];
        if g.measure != Measure::Volume {
            measures.push(Measure::Volume);
        }
        let points = noise_sweep(&problems, &cfg, noise_levels, &measures);
        write_out(path, |f| write_plot_data(&points, f))?;
    }
    Ok(())
}

/// Parses a substitution given over original variable names (and `y`).
fn parse_substitution(text: &str, d: usize, indices: Option<&[usize]>) -> Result<Substitution, CliError> {
    let usage = |m: String| CliError::Usage(m);
    let e = parse_with(text, &ParseOptions { y_index: Some(d) }).map_err(|e| usage(format!("substitution: {e}")))?;
    let outinput = e.uses_var(d);
    let used: Vec<usize> = e.variables().into_iter().filter(|&v| v != d).collect();
    let idx: Vec<usize> = match indices {
        Some(list) => {
            let mut v: Vec<usize> = list.iter().map(|&i| i.wrapping_sub(1)).collect();
            v.sort_unstable();
            v.dedup();
            v
        }
        None => used.clone(),
    };
    if idx.iter().any(|&i| i >= d) || used.iter().any(|u| !idx.contains(u)) {
        return Err(usage(format!("index set does not match the substitution's variables (d = {d})")));
    }
    let local = e.remap_vars(|v| if v == d { idx.len() } else { idx.iter().position(|&i| i == v).unwrap_or(0) });
    Ok(if outinput {
        Substitution::OutInput(OutInputSub { h: local, indices: idx })
    } else {
        Substitution::Input(InputSub { g: local, indices: idx })
    })
}

fn cmd_verify(
    formula: &str,
    sub: &str,
    indices: Option<&[usize]>,
    d: Option<usize>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let f = parse(formula).map_err(|e| CliError::Usage(format!("formula: {e}")))?;
    let d = d.unwrap_or(f.arity()).max(f.arity());
    let s = parse_substitution(sub, d, indices)?;
    let (verdict, reduced) = match verify(&f, d, &s) {
        Ok(v) if v.valid => ("valid", v.reduced),
        Ok(_) => ("invalid", None),
        Err(SubstError::Unverifiable) => ("unverifiable", None),
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    writeln!(out, "{verdict}").map_err(data_err)?;
    if let Some(r) = reduced {
        writeln!(out, "reduced\t{r}").map_err(data_err)?;
    }
    Ok(())
}

fn cmd_sample(formula: &str, d: Option<usize>, g: &Global, out: &mut dyn Write) -> Result<(), CliError> {
    let f: ExprDag = parse(formula).map_err(|e| CliError::Usage(format!("formula: {e}")))?;
    let d = d.unwrap_or(f.arity()).max(f.arity());
    let p = Problem { id: "sample".into(), d, f_true: f, samples: None };
    let ds = sample_problem(&p, g.n, g.seed).map_err(data_err)?;
    let ds = if g.noise > 0.0 {
        Dataset::new(ds.x().clone(), add_noise(ds.y(), g.noise, g.seed.wrapping_add(1))).map_err(data_err)?
    } else {
        ds
    };
    match &g.out {
        Some(path) => write_out(path, |file| write_dataset(&ds, file)),
        None => write_dataset(&ds, out).map_err(data_err),
    }
}

/// Runs a parsed command line, writing records to `out`.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let g = &cli.global;
    g.check()?;
    #[cfg(feature = "parallel")]
    if let Some(t) = g.threads {
        // A pool that is already initialized keeps its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    match &cli.command {
        Cmd::Reduce { csv } => cmd_reduce(csv, g, out),
        Cmd::Solve { csv, formula } => cmd_solve(csv, formula.as_deref(), g, out),
        Cmd::Bench { corpus, no_regress, plot_data, noise_levels } => {
            cmd_bench(corpus, *no_regress, plot_data.as_deref(), noise_levels, g, out)
        }
        Cmd::Verify { formula, substitution, indices, d } => {
            cmd_verify(formula, substitution, indices.as_deref(), *d, out)
        }
        Cmd::Sample { formula, d } => cmd_sample(formula, *d, g, out),
    }
}

/// Entry point: returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| execute(cli, &mut lock))) {
        Ok(Ok(())) => EXIT_OK,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        Err(_) => {
            eprintln!("error: internal failure");
            EXIT_INTERNAL
        }
    }
}
