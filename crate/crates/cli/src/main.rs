use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mmsmote::experiment::{
    self, child_seed, fit_method, load_source, prepare, DataSource, ExperimentConfig,
    ExperimentResults, Fitted, Method,
};
use mmsmote::kernel::{gram, write_matrix, KernelMatrix};
use mmsmote::metrics::{check_reference_rows, evaluate};
use mmsmote::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

/// Kernel-space minority oversampling benchmark.
#[derive(Debug, Parser)]
#[command(name = "mmsmote", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every ratio × method × repetition cell of a config and write the result CSV.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output path.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fit a single method on one ratio cell; print scores and dump the model.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_method)]
        method: Method,
        /// Defaults to the first ratio in the config.
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long, default_value_t = 0)]
        rep: usize,
        /// Trained model as JSON.
        #[arg(long)]
        model_out: Option<PathBuf>,
        /// Oversampling diagnostics as JSON (mm_smote only).
        #[arg(long)]
        diagnostics_out: Option<PathBuf>,
        /// Training kernel matrix as raw little-endian f64.
        #[arg(long)]
        kernel_dump: Option<PathBuf>,
    },
    /// Run all methods on a Gaussian blob fixture and print the mean scores.
    SynthDemo {
        #[arg(long, default_value_t = 2000)]
        n_majority: usize,
        #[arg(long, default_value_t = 100)]
        n_minority: usize,
        #[arg(long, default_value_t = 1.0)]
        separation: f64,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value = "10")]
        ratios: String,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Recompute F1 and G-mean of the built-in reference table from its precision and recall.
    CheckTables,
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| {
        let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
        format!("unknown method `{s}`; expected one of {}", names.join(", "))
    })
}

fn fail(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(if err.is_data_error() { EXIT_DATA } else { EXIT_CONFIG })
}

fn print_means(results: &ExperimentResults) {
    println!(
        "{:>6}  {:<20} {:>9} {:>9} {:>9} {:>9}  runs",
        "ratio", "method", "precision", "recall", "f1", "gmean"
    );
    for m in &results.means {
        match &m.metrics {
            Some(s) => println!(
                "{:>6}  {:<20} {:>9.4} {:>9.4} {:>9.4} {:>9.4}  {}",
                m.ratio,
                m.method.name(),
                s.precision,
                s.recall,
                s.f1,
                s.gmean,
                m.n_runs
            ),
            None => println!("{:>6}  {:<20} {:>39}  0", m.ratio, m.method.name(), "failed"),
        }
    }
}

fn bench(config: PathBuf, output: Option<PathBuf>) -> ExitCode {
    let mut cfg = match ExperimentConfig::load(&config) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    if let Some(out) = output {
        cfg.output = out;
    }
    match experiment::run_to_file(&cfg) {
        Ok(results) => {
            print_means(&results);
            eprintln!("wrote {}", cfg.output.display());
            if cfg.methods.contains(&Method::MmSmote) {
                eprintln!("wrote {}", experiment::diagnostics_path(&cfg.output).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

struct FitArgs {
    config: PathBuf,
    method: Method,
    ratio: Option<f64>,
    rep: usize,
    model_out: Option<PathBuf>,
    diagnostics_out: Option<PathBuf>,
    kernel_dump: Option<PathBuf>,
}

fn fit(args: FitArgs) -> Result<(), Error> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let ratio = args.ratio.unwrap_or(cfg.ratios[0]);
    let full = load_source(&cfg.data)?;
    let prepared = prepare(&full, &cfg, ratio, args.rep)?;
    let seed = child_seed(cfg.seed, ratio, args.method, args.rep);
    let fitted = fit_method(args.method, &prepared, &cfg, seed)?;
    let pred = fitted.predict(prepared.test.features().view())?;
    let scores = evaluate(prepared.test.labels(), &pred)?;

    let counts = prepared.train.class_counts();
    println!(
        "method {} ratio {ratio} rep {} seed {seed}: train {}+/{}-, test {} rows",
        args.method.name(),
        args.rep,
        counts.positive,
        counts.negative,
        prepared.test.n_samples()
    );
    println!(
        "precision {:.4}  recall {:.4}  f1 {:.4}  gmean {:.4}  converged {}",
        scores.precision,
        scores.recall,
        scores.f1,
        scores.gmean,
        fitted.converged()
    );

    let (model, kernel) = match &fitted {
        Fitted::Svm(m) => {
            let k = gram(&m.spec, m.train_features.view())?.into_inner();
            (&m.model, k)
        }
        Fitted::Mm(m) => {
            let report = m.diagnostics.report()?;
            println!("{report}");
            if let Some(path) = &args.diagnostics_out {
                std::fs::write(path, &report).map_err(|e| io_err(path, e))?;
            }
            (&m.model, m.augmented.matrix().clone())
        }
    };
    if let Some(path) = &args.model_out {
        std::fs::write(path, model.to_json()?).map_err(|e| io_err(path, e))?;
    }
    if let Some(path) = &args.kernel_dump {
        let f = File::create(path).map_err(|e| io_err(path, e))?;
        write_matrix(BufWriter::new(f), &kernel).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

#[allow(clippy::too_many_arguments)]
fn synth_demo(
    n_majority: usize,
    n_minority: usize,
    separation: f64,
    dim: usize,
    ratios: &str,
    reps: usize,
    seed: u64,
) -> ExitCode {
    let ratios: Result<Vec<f64>, _> = ratios.split(',').map(|r| r.trim().parse::<f64>()).collect();
    let Ok(ratios) = ratios else {
        eprintln!("error: --ratios expects a comma-separated list of numbers");
        return ExitCode::from(EXIT_CONFIG);
    };
    let mut cfg = ExperimentConfig::with_data(DataSource::Blobs {
        n_majority,
        n_minority,
        separation,
        dim,
        seed,
    });
    cfg.ratios = ratios;
    cfg.repetitions = reps;
    cfg.seed = seed;
    if let Err(e) = cfg.validate() {
        return fail(&e);
    }
    match experiment::run_experiment(&cfg) {
        Ok(results) => {
            print_means(&results);
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn check_tables() -> ExitCode {
    let checks = check_reference_rows();
    let mut consistent = 0;
    for c in &checks {
        let mark = if c.consistent { "ok" } else { "MISMATCH" };
        println!(
            "{:>3}:1  {:<20} P {:.4} R {:.4} | F1 {:.4} (printed {:.4})  G {:.4} (printed {:.4})  {mark}",
            c.row.ratio,
            c.row.method,
            c.row.precision,
            c.row.recall,
            c.computed.f1,
            c.row.f1,
            c.computed.gmean,
            c.row.gmean
        );
        consistent += usize::from(c.consistent);
    }
    println!("{consistent}/{} rows consistent", checks.len());
    if consistent == checks.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Bench { config, output } => bench(config, output),
        Command::Fit {
            config,
            method,
            ratio,
            rep,
            model_out,
            diagnostics_out,
            kernel_dump,
        } => match fit(FitArgs {
            config,
            method,
            ratio,
            rep,
            model_out,
            diagnostics_out,
            kernel_dump,
        }) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(&e),
        },
        Command::SynthDemo {
            n_majority,
            n_minority,
            separation,
            dim,
            ratios,
            reps,
            seed,
        } => synth_demo(n_majority, n_minority, separation, dim, &ratios, reps, seed),
        Command::CheckTables => check_tables(),
    }
}
