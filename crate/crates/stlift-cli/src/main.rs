//! `stlift`: STFT computation, Griffin-Lim and lifted-SDP phase retrieval,
//! and the benchmark sweeps, from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use stlift_core::harness::{
    cola_hops, emit_results, rows_to_csv, run_noiseless, run_noisy, ExperimentResults,
    ExperimentSpec, Method, Mode, SolverSettings,
};
use stlift_core::io::{
    read_measurements, read_signal, read_spectrogram, solve_result_to_json, write_signal_json,
    write_signal_text, write_solve_result, write_spectrogram,
};
use stlift_core::{
    griffin_lim_multi, lambda_continuation, magnitude_spec, objective, stft, FrameOperator,
    GlConfig, MeasurementSet, SolverConfig, StepSize, StftConfig,
};

#[derive(Parser)]
#[command(name = "stlift", version, about = "Spectrogram phase retrieval toolkit")]
struct Cli {
    /// Size of the worker thread pool (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the STFT of a signal file and write it as spectrogram JSON.
    Stft(StftArgs),
    /// Recover a signal from spectrogram magnitudes with Griffin-Lim.
    GriffinLim(GriffinLimArgs),
    /// Recover a signal from squared magnitudes via the lifted relaxation.
    Solve(SolveArgs),
    /// Run a benchmark sweep over seeded random signals.
    Bench(BenchArgs),
}

#[derive(Args)]
struct StftParams {
    /// Hann window length (odd).
    #[arg(long)]
    window: usize,
    /// Hop size between frame centers.
    #[arg(long)]
    hop: usize,
    /// FFT size; defaults to the signal length.
    #[arg(long)]
    fft_size: Option<usize>,
}

impl StftParams {
    fn config(&self, n: usize) -> Result<StftConfig, stlift_core::Error> {
        match self.fft_size {
            Some(fft) => StftConfig::new(stlift_core::make_hann(self.window)?, self.hop, fft, n),
            None => StftConfig::hann(self.window, self.hop, n),
        }
    }
}

#[derive(Args)]
struct StftArgs {
    /// Signal file: one sample per line, or JSON {"n", "samples"}.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    stft: StftParams,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GriffinLimArgs {
    /// Spectrogram JSON whose magnitudes are the retrieval target.
    #[arg(long)]
    input: PathBuf,
    /// Length of the signal to recover.
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    stft: StftParams,
    /// Iteration budget per initialization.
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    /// Number of random initializations; the best final objective wins.
    #[arg(long, default_value_t = 10)]
    inits: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path (.json for JSON, otherwise text); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug)]
enum StepArg {
    Auto,
    Fixed(f64),
}

impl std::str::FromStr for StepArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(StepArg::Auto);
        }
        let t: f64 = s
            .parse()
            .map_err(|e| format!("step must be 'auto' or a positive number: {e}"))?;
        if t <= 0.0 || !t.is_finite() {
            return Err("step must be positive and finite".into());
        }
        Ok(StepArg::Fixed(t))
    }
}

#[derive(Args)]
struct SolverArgs {
    /// Gradient step size: 'auto' or a fixed value.
    #[arg(long, default_value = "auto")]
    step: StepArg,
    /// Geometric shrink factor for the lambda continuation path.
    #[arg(long, default_value_t = 0.5)]
    lambda_decay: f64,
    /// sigma_2/sigma_1 threshold for accepting a rank-1 iterate.
    #[arg(long, default_value_t = 1e-3)]
    rank1_tol: f64,
    /// Iteration budget per lambda level.
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            step: match self.step {
                StepArg::Auto => StepSize::Auto,
                StepArg::Fixed(t) => StepSize::Fixed(t),
            },
            lambda_decay: self.lambda_decay,
            rank1_tol: self.rank1_tol,
            max_iters: self.max_iters,
            ..SolverConfig::default()
        }
    }

    fn settings(&self) -> SolverSettings {
        SolverSettings {
            step: match self.step {
                StepArg::Auto => None,
                StepArg::Fixed(t) => Some(t),
            },
            lambda_decay: self.lambda_decay,
            rank1_tol: self.rank1_tol,
            max_iters: self.max_iters,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Measurement JSON {"T","N","b"} or spectrogram JSON (magnitudes squared).
    #[arg(long)]
    input: PathBuf,
    /// Length of the signal to recover.
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    stft: StftParams,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output path for the solve-result JSON; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct BenchArgs {
    #[command(subcommand)]
    mode: BenchMode,
}

#[derive(Subcommand)]
enum BenchMode {
    /// Exact-magnitude recovery sweep; reports per-cell accuracy.
    Noiseless(SweepArgs),
    /// Noise-corrupted sweep; reports per-cell median relative error.
    Noisy(SweepArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Signal length.
    #[arg(long, default_value_t = 16)]
    n: usize,
    /// Hann window lengths to sweep (repeatable).
    #[arg(long = "window", default_values_t = [5usize, 7, 9, 11])]
    windows: Vec<usize>,
    /// Hop sizes to sweep (repeatable); defaults to every overlap-add hop
    /// of each window.
    #[arg(long = "hop")]
    hops: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Noise standard deviation (noisy mode).
    #[arg(long, default_value_t = 0.2)]
    noise_sigma: f64,
    /// Methods to run (repeatable): griffin-lim, stlift.
    #[arg(long = "method", default_values_t = ["griffin-lim".to_string(), "stlift".to_string()])]
    methods: Vec<String>,
    /// Griffin-Lim iteration budget per initialization.
    #[arg(long, default_value_t = 1000)]
    gl_max_iters: usize,
    /// Griffin-Lim random initializations per trial.
    #[arg(long, default_value_t = 10)]
    gl_inits: usize,
    #[command(flatten)]
    solver: SolverArgs,
    /// Trial indices for which original-vs-reconstruction overlays are written.
    #[arg(long = "overlay-trial")]
    overlay_trials: Vec<usize>,
    /// Full experiment spec as a JSON file; overrides the flags above.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output path; summary goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
}

impl SweepArgs {
    fn experiment_spec(&self, mode: Mode) -> Result<ExperimentSpec, String> {
        if let Some(path) = &self.spec {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("{}: {e}", path.display()))?;
            let spec: ExperimentSpec =
                serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
            return Ok(spec);
        }
        let mut cells = Vec::new();
        for &m in &self.windows {
            if self.hops.is_empty() {
                cells.extend(cola_hops(m).into_iter().map(|r| (m, r)));
            } else {
                cells.extend(self.hops.iter().map(|&r| (m, r)));
            }
        }
        let methods = self
            .methods
            .iter()
            .map(|s| s.parse::<Method>())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ExperimentSpec {
            n: self.n,
            cells,
            trials: self.trials,
            seed: self.seed,
            mode,
            noise_sigma: match mode {
                Mode::Noiseless => 0.0,
                Mode::Noisy => self.noise_sigma,
            },
            methods,
            gl_max_iters: self.gl_max_iters,
            gl_inits: self.gl_inits,
            solver: self.solver.settings(),
            overlay_trials: self.overlay_trials.clone(),
        })
    }
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), String> {
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_stft(args: &StftArgs) -> Result<(), String> {
    let x = read_signal(&args.input).map_err(|e| e.to_string())?;
    let cfg = args.stft.config(x.len()).map_err(|e| e.to_string())?;
    let s = stft(&x, &cfg).map_err(|e| e.to_string())?;
    match &args.out {
        Some(path) => write_spectrogram(&s, path).map_err(|e| e.to_string()),
        None => {
            println!("{}", stlift_core::io::spectrogram_to_json(&s));
            Ok(())
        }
    }
}

fn run_griffin_lim(args: &GriffinLimArgs) -> Result<(), String> {
    let s = read_spectrogram(&args.input).map_err(|e| e.to_string())?;
    let cfg = args.stft.config(args.n).map_err(|e| e.to_string())?;
    if s.frames() != cfg.num_frames() || s.fft_size() != cfg.fft_size() {
        return Err(format!(
            "spectrogram is {}x{} but the configuration implies {}x{}",
            s.frames(),
            s.fft_size(),
            cfg.num_frames(),
            cfg.fft_size()
        ));
    }
    let target = magnitude_spec(&s);
    let gl_cfg = GlConfig {
        max_iters: args.max_iters,
        n_inits: args.inits,
        rng_seed: args.seed,
        ..GlConfig::default()
    };
    let res = griffin_lim_multi(&target, &cfg, &gl_cfg).map_err(|e| e.to_string())?;
    eprintln!(
        "objective {:.6e} after {} iterations (init {})",
        res.final_objective(),
        res.iterations_used,
        res.init_index
    );
    match &args.out {
        Some(path) if path.extension().is_some_and(|e| e == "json") => {
            write_signal_json(&res.signal, path).map_err(|e| e.to_string())
        }
        Some(path) => write_signal_text(&res.signal, path).map_err(|e| e.to_string()),
        None => {
            for v in res.signal.samples() {
                println!("{v}");
            }
            Ok(())
        }
    }
}

fn run_solve(args: &SolveArgs) -> Result<(), String> {
    let cfg = args.stft.config(args.n).map_err(|e| e.to_string())?;
    // Accept either a measurement file or a spectrogram to square.
    let b: MeasurementSet = match read_measurements(&args.input) {
        Ok(b) => b,
        Err(_) => {
            let s = read_spectrogram(&args.input).map_err(|e| e.to_string())?;
            MeasurementSet::from_power(&stlift_core::power_spec(&s))
        }
    };
    if b.frames() != cfg.num_frames() || b.fft_size() != cfg.fft_size() {
        return Err(format!(
            "measurements are {}x{} but the configuration implies {}x{}",
            b.frames(),
            b.fft_size(),
            cfg.num_frames(),
            cfg.fft_size()
        ));
    }
    let op = FrameOperator::new(&cfg, args.n);
    let res = lambda_continuation(&op, &b, &args.solver.config()).map_err(|e| e.to_string())?;
    let target_mag =
        stlift_core::PowerSpectrogram::new(b.frames(), b.fft_size(), b.values().to_vec()).sqrt();
    let est_mag = magnitude_spec(&stft(&res.signal, &cfg).map_err(|e| e.to_string())?);
    let fit = objective(&est_mag, &target_mag).map_err(|e| e.to_string())?;
    eprintln!(
        "status {:?}, rank ratio {:.3e}, magnitude objective {:.6e}",
        res.status, res.rank_ratio, fit
    );
    match &args.out {
        Some(path) => write_solve_result(&res, path).map_err(|e| e.to_string()),
        None => {
            let text = serde_json::to_string_pretty(&solve_result_to_json(&res))
                .map_err(|e| e.to_string())?;
            println!("{text}");
            Ok(())
        }
    }
}

fn run_bench(args: &BenchArgs) -> Result<(), String> {
    let (mode, sweep) = match &args.mode {
        BenchMode::Noiseless(s) => (Mode::Noiseless, s),
        BenchMode::Noisy(s) => (Mode::Noisy, s),
    };
    let spec = sweep.experiment_spec(mode)?;
    let results: ExperimentResults = match mode {
        Mode::Noiseless => run_noiseless(&spec),
        Mode::Noisy => run_noisy(&spec),
    }
    .map_err(|e| e.to_string())?;

    match sweep.format {
        OutputFormat::Csv => match &sweep.out {
            Some(path) => emit_results(&spec, &results, path).map_err(|e| e.to_string()),
            None => write_or_print(None, &rows_to_csv(&spec, &results.rows)),
        },
        OutputFormat::Json => {
            let doc = serde_json::json!({
                "spec": spec,
                "rows": results.rows,
                "records": results.records,
                "overlays": results.overlays,
            });
            let text = serde_json::to_string_pretty(&doc).map_err(|e| e.to_string())?;
            write_or_print(sweep.out.as_deref(), &(text + "\n"))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: could not size the thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    let outcome = match &cli.command {
        Command::Stft(args) => run_stft(args),
        Command::GriffinLim(args) => run_griffin_lim(args),
        Command::Solve(args) => run_solve(args),
        Command::Bench(args) => run_bench(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
