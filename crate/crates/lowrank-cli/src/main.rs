//! `lowrank`: split matrices into low-rank plus sparse parts and denoise
//! impulse-corrupted grayscale images with patch grouping.

mod commands;
mod opts;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lowrank_core::solver::MethodPreset;
use lowrank_core::ErrorClass;

use opts::{PipelineArgs, SolverOverrides, SweepParameter};

#[derive(Parser)]
#[command(
    name = "lowrank",
    version,
    about = "Low-rank plus sparse recovery and impulse-noise image denoising"
)]
struct Cli {
    /// Worker threads for per-anchor work; 0 picks the core count.
    #[arg(long, global = true, env = "LOWRANK_THREADS", default_value_t = 0)]
    threads: usize,

    /// Run per-anchor work sequentially in grid order. Outputs are
    /// byte-identical either way; this only pins down scheduling.
    #[arg(long, global = true)]
    deterministic: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Corrupt an image with salt-and-pepper noise.
    Noise {
        /// Input image (binary PGM).
        input: PathBuf,
        /// Fraction of pixels to corrupt, in (0, 1].
        #[arg(long)]
        noise_level: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output image path.
        #[arg(long)]
        out: PathBuf,
    },

    /// Denoise an impulse-corrupted image.
    Denoise {
        /// Noisy input image (binary PGM).
        input: PathBuf,
        /// Method preset: pcp, wnnm-rpca, wsnm-rpca, dwlp-11 or dwlp.
        #[arg(long, default_value = "dwlp")]
        method: MethodPreset,
        /// Corruption level the parameters are calibrated for.
        #[arg(long)]
        noise_level: Option<f64>,
        #[command(flatten)]
        solver: SolverOverrides,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Clean image; enables PSNR/SSIM in the report.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Write a per-iteration PSNR trace CSV (needs --reference).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Restored image path.
        #[arg(long)]
        out: PathBuf,
        /// Report path; defaults to the output path with `.report.json`.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Seed echoed into the report for provenance.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },

    /// Split a CSV matrix into low-rank and sparse CSV matrices.
    Decompose {
        /// Input matrix (headerless CSV).
        input: PathBuf,
        #[arg(long, default_value = "dwlp")]
        method: MethodPreset,
        #[arg(long)]
        noise_level: Option<f64>,
        #[command(flatten)]
        solver: SolverOverrides,
        /// Low-rank part output path.
        #[arg(long)]
        out_a: PathBuf,
        /// Sparse part output path.
        #[arg(long)]
        out_e: PathBuf,
        /// Optional per-iteration trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },

    /// Write the singular-value spectra of a patch group: clean, optionally
    /// corrupted, and as recovered by every method.
    SvdAnalyze {
        /// Clean image (binary PGM).
        input: PathBuf,
        /// Patch anchor as `row,col`.
        #[arg(long, value_parser = opts::parse_anchor)]
        anchor: (usize, usize),
        /// Corrupt at this level and add corrupted plus recovered spectra.
        #[arg(long)]
        noise_level: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        solver: SolverOverrides,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Spectrum CSV path.
        #[arg(long)]
        out: PathBuf,
    },

    /// Corrupt and denoise a corpus of images over levels and methods.
    Benchmark {
        /// Directory of clean PGM images.
        corpus: PathBuf,
        /// Corruption levels to test.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.3")]
        levels: Vec<f64>,
        /// Method presets to test.
        #[arg(long, value_delimiter = ',', default_value = "pcp,dwlp")]
        methods: Vec<MethodPreset>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        solver: SolverOverrides,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Aggregated JSON report path.
        #[arg(long)]
        out: PathBuf,
        /// CSV table path; defaults to the report path with `.csv`.
        #[arg(long)]
        table: Option<PathBuf>,
    },

    /// Denoise a corpus across a parameter grid and write mean scores.
    Sweep {
        /// Directory of clean PGM images.
        corpus: PathBuf,
        /// Parameter to sweep: k, p, q, ratio, or pq for a 2-D grid.
        #[arg(long)]
        parameter: SweepParameter,
        /// Grid values (the p axis for `pq`).
        #[arg(long, value_delimiter = ',')]
        grid: Vec<f64>,
        /// Second axis of the `pq` grid.
        #[arg(long, value_delimiter = ',')]
        q_grid: Vec<f64>,
        #[arg(long, default_value_t = 0.30)]
        noise_level: f64,
        #[arg(long, default_value = "dwlp")]
        method: MethodPreset,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        solver: SolverOverrides,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Sweep CSV path.
        #[arg(long)]
        out: PathBuf,
    },

    /// Write the built-in repetitive test cards as PGM files.
    MakeCorpus {
        /// Directory to create the card images in.
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> lowrank_core::Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| {
                lowrank_core::Error::InvalidConfig(format!("cannot build thread pool: {e}"))
            })?;
    }
    let deterministic = cli.deterministic;
    match cli.command {
        Command::Noise {
            input,
            noise_level,
            seed,
            out,
        } => commands::run_noise(&input, noise_level, seed, &out),
        Command::Denoise {
            input,
            method,
            noise_level,
            solver,
            pipeline,
            reference,
            trace,
            out,
            report,
            seed,
        } => commands::run_denoise(commands::DenoiseRequest {
            input,
            method,
            noise_level,
            solver,
            pipeline,
            reference,
            trace,
            out,
            report,
            seed,
            deterministic,
        }),
        Command::Decompose {
            input,
            method,
            noise_level,
            solver,
            out_a,
            out_e,
            trace,
        } => commands::run_decompose(&input, method, noise_level, &solver, &out_a, &out_e, trace),
        Command::SvdAnalyze {
            input,
            anchor,
            noise_level,
            seed,
            solver,
            pipeline,
            out,
        } => commands::run_svd_analyze(&input, anchor, noise_level, seed, &solver, &pipeline, &out),
        Command::Benchmark {
            corpus,
            levels,
            methods,
            seed,
            solver,
            pipeline,
            out,
            table,
        } => commands::run_benchmark(commands::BenchmarkRequest {
            corpus,
            levels,
            methods,
            seed,
            solver,
            pipeline,
            out,
            table,
            deterministic,
        }),
        Command::Sweep {
            corpus,
            parameter,
            grid,
            q_grid,
            noise_level,
            method,
            seed,
            solver,
            pipeline,
            out,
        } => commands::run_sweep(commands::SweepRequest {
            corpus,
            parameter,
            grid,
            q_grid,
            noise_level,
            method,
            seed,
            solver,
            pipeline,
            out,
            deterministic,
        }),
        Command::MakeCorpus { out } => commands::run_make_corpus(&out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests surface as clap "errors"; everything
            // else is a usage problem and maps to the validation exit code.
            let usage_error = !matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if usage_error {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(match err.class() {
                ErrorClass::Validation => 1,
                ErrorClass::Io => 2,
                ErrorClass::Numerical => 3,
            })
        }
    }
}
