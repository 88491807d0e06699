//! `qnn`: run kink checks, network simulations, k-sweeps, MNIST training and
//! digit recognition from the command line.
//!
//! Exit codes: 0 success, 1 a checked criterion failed, 2 usage or I/O error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use qnn_core::experiments::{run_sweep, run_truth_table, Gate, Scheme, SweepPlan, SCHEME_NAMES};
use qnn_core::lattice::{analytic_kink_path, kink_action_analytic, path_self_action, KinkSchedule, LatticeConfig};
use qnn_core::network::NetworkSpec;
use qnn_core::sampler::{run_pooled, SamplerConfig};
use qnn_core::trainer::{
    accuracy, clamp_nonnegative, load_split, load_weights, normalize_weights, recognize, save_weights, train,
    DigitParams, Split, TrainParams, PIXELS,
};

const MNIST_ENV: &str = "QNN_MNIST_DIR";
const KINK_TOLERANCE: f64 = 0.02;

#[derive(Parser)]
#[command(name = "qnn", version, about = "Quantum neuron networks by path-integral Monte Carlo")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare the discrete action of a kink pair with the analytic value.
    KinkCheck(LatticeArgs),
    /// Simulate a network description file and write per-neuron activity.
    Simulate(SimulateArgs),
    /// Sweep the strength factor k of a built-in scheme.
    Sweep(SweepArgs),
    /// Train the classical softmax model on MNIST.
    Train(TrainArgs),
    /// Score one digit image with the quantum network.
    Recognize(RecognizeArgs),
}

#[derive(Args, Clone)]
struct LatticeArgs {
    #[arg(long, default_value_t = 512)]
    n_slices: usize,
    #[arg(long, default_value_t = 0.7)]
    total_time: f64,
    #[arg(long, default_value_t = 5000.0)]
    lambda: f64,
}

impl LatticeArgs {
    fn config(&self) -> Result<LatticeConfig, Failure> {
        LatticeConfig::new(self.n_slices, self.total_time, self.lambda).map_err(Failure::usage)
    }
}

#[derive(Args, Clone)]
struct SamplerArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent chains pooled per run.
    #[arg(long, default_value_t = 1)]
    chains: usize,
    /// Single-site update attempts discarded before measuring.
    #[arg(long, default_value_t = 2_000_000)]
    thermalization: u64,
    #[arg(long, default_value_t = 5000)]
    sweeps: usize,
    /// Sweeps between recorded samples.
    #[arg(long, default_value_t = 10)]
    interval: usize,
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    #[arg(long, default_value_t = 4)]
    levels: usize,
    /// Keep the proposal width fixed.
    #[arg(long)]
    no_tune: bool,
    /// Disable the global reflection move.
    #[arg(long)]
    no_flips: bool,
}

impl SamplerArgs {
    fn config(&self) -> Result<SamplerConfig, Failure> {
        if self.chains == 0 {
            return Err(Failure::usage("--chains must be at least 1"));
        }
        Ok(SamplerConfig {
            thermalization_updates: self.thermalization,
            measurement_sweeps: self.sweeps,
            measure_interval: self.interval,
            step_size: self.step,
            levels: self.levels,
            seed: self.seed,
            tune: !self.no_tune,
            flips: !self.no_flips,
        })
    }
}

#[derive(Args)]
struct SimulateArgs {
    network: PathBuf,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    sampler: SamplerArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// One of two_neuron, chain3, and, not, or, xor, conv_line.
    scheme: String,
    /// `start:stop:step`, stop included within rounding.
    #[arg(long, default_value = "1:1:1")]
    k: String,
    /// Run the gate truth table instead of a k sweep (and, not, or, xor).
    #[arg(long)]
    truth_table: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a matplotlib script plotting the sweep CSV.
    #[arg(long)]
    plot_script: Option<PathBuf>,
    #[command(flatten)]
    lattice: LatticeArgs,
    #[command(flatten)]
    sampler: SamplerArgs,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory with the IDX files; defaults to $QNN_MNIST_DIR or data/mnist.
    #[arg(long)]
    mnist_dir: Option<PathBuf>,
    /// Raw weight file (`.csv` for text, anything else binary).
    #[arg(long, default_value = "weights.csv")]
    out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.9)]
    decay: f64,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 100.0)]
    penalty: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RecognizeArgs {
    /// Trained weights; clamped and normalized before use.
    #[arg(long)]
    weights: PathBuf,
    /// Test-set image index.
    #[arg(long, conflicts_with = "image")]
    index: Option<usize>,
    /// 784 raw bytes, or 784 numbers in [0, 1] separated by commas or whitespace.
    #[arg(long)]
    image: Option<PathBuf>,
    #[arg(long)]
    mnist_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 1000.0)]
    k: f64,
    #[arg(long, default_value_t = 1e-17)]
    output_inhibition: f64,
    #[command(flatten)]
    lattice: LatticeArgs,
    #[command(flatten)]
    sampler: SamplerArgs,
}

#[derive(Debug)]
enum Failure {
    /// A checked criterion did not hold.
    Check(String),
    Usage(String),
}

impl Failure {
    fn usage(e: impl ToString) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<qnn_core::Error> for Failure {
    fn from(e: qnn_core::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    argv: Vec<String>,
    inputs: Vec<String>,
    seed: Option<u64>,
    timestamp_unix: u64,
    version: &'static str,
    outputs: Vec<String>,
    parameters: serde_json::Value,
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Writes `<first output>.manifest.json`.
fn write_manifest(
    command: &str,
    inputs: &[&Path],
    seed: Option<u64>,
    outputs: &[&Path],
    parameters: serde_json::Value,
) -> Result<(), Failure> {
    let m = RunManifest {
        command,
        argv: std::env::args().collect(),
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        seed,
        timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        version: env!("CARGO_PKG_VERSION"),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        parameters,
    };
    let text = serde_json::to_string_pretty(&m).map_err(Failure::usage)?;
    write_file(&manifest_path(outputs[0]), text.as_bytes())
}

/// Text to `out` (with a manifest) or stdout.
fn emit(
    text: &str,
    out: Option<&Path>,
    command: &str,
    inputs: &[&Path],
    seed: Option<u64>,
    parameters: serde_json::Value,
) -> Result<(), Failure> {
    match out {
        Some(path) => {
            write_file(path, text.as_bytes())?;
            write_manifest(command, inputs, seed, &[path], parameters)
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Parses `start:stop:step` into the values `start + i * step <= stop`.
fn parse_range(spec: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = spec.split(':').collect();
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Usage(format!("bad range {spec:?}: {e}")))?;
    let (start, stop, step) = match nums[..] {
        [v] => (v, v, 1.0),
        [a, b, c] => (a, b, c),
        _ => return Err(Failure::Usage(format!("range {spec:?} must be start:stop:step"))),
    };
    if !(start.is_finite() && stop.is_finite() && step.is_finite() && step > 0.0) {
        return Err(Failure::Usage(format!("range {spec:?} needs finite bounds and a positive step")));
    }
    let tol = 1e-9 * step;
    let count = ((stop - start + tol) / step).floor();
    if count < 0.0 {
        return Err(Failure::Usage(format!("range {spec:?} is empty")));
    }
    Ok((0..=count as usize).map(|i| start + i as f64 * step).collect())
}

fn mnist_dir(flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| std::env::var_os(MNIST_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data/mnist"))
}

fn kink_check(args: &LatticeArgs) -> Result<(), Failure> {
    let cfg = args.config()?;
    let t = cfg.total_time;
    let schedule = KinkSchedule::new(vec![t / 4.0, 3.0 * t / 4.0], &cfg)?;
    let path = analytic_kink_path(&schedule, &cfg)?;
    let discrete = path_self_action(&path, &cfg) / 2.0;
    let analytic = kink_action_analytic(cfg.lambda);
    let err = (discrete - analytic).abs() / analytic;
    println!("analytic kink action   {analytic:.6}");
    println!("discrete (pair / 2)    {discrete:.6}");
    println!("relative error         {err:.3e}");
    if err < KINK_TOLERANCE {
        println!("PASS (tolerance {KINK_TOLERANCE})");
        Ok(())
    } else {
        Err(Failure::Check(format!("relative error {err:.3e} exceeds {KINK_TOLERANCE}")))
    }
}

fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let net = NetworkSpec::load(&args.network)?;
    let sampler = args.sampler.config()?;
    let (report, stats) = run_pooled(&net, &sampler, args.sampler.chains)?;
    for (c, s) in stats.iter().enumerate() {
        eprintln!(
            "chain {c}: step {:.4}, acceptance {:?}, {} samples{}",
            s.step_size,
            s.acceptance_rate,
            s.samples_taken,
            if s.tuned { "" } else { " (step tuning did not converge)" }
        );
    }
    emit(
        &report.to_csv(),
        args.out.as_deref(),
        "simulate",
        &[&args.network],
        Some(sampler.seed),
        json!({ "sampler": sampler, "chains": args.sampler.chains, "lattice": net.lattice }),
    )
}

fn plot_script(csv: &Path, scheme: &str) -> String {
    format!(
        "import csv\nimport matplotlib.pyplot as plt\n\n\
         rows = list(csv.DictReader(open({csv:?})))\n\
         for nid in sorted({{r['neuron_id'] for r in rows}}, key=int):\n\
         \x20   pts = [(float(r['k']), float(r['activity']), float(r['std_error'])) for r in rows if r['neuron_id'] == nid]\n\
         \x20   plt.errorbar([p[0] for p in pts], [p[1] for p in pts], yerr=[p[2] for p in pts], marker='o', label=f'neuron {{nid}}')\n\
         plt.xlabel('k')\nplt.ylabel('activity')\nplt.title({scheme:?})\nplt.legend()\n\
         plt.savefig({png:?})\n",
        csv = csv.display().to_string(),
        png = csv.with_extension("png").display().to_string(),
    )
}

fn sweep(args: &SweepArgs) -> Result<(), Failure> {
    let scheme: Scheme = args.scheme.parse().map_err(|_| {
        Failure::Usage(format!("unknown scheme {:?}; expected one of {}", args.scheme, SCHEME_NAMES.join(", ")))
    })?;
    let cfg = args.lattice.config()?;
    let sampler = args.sampler.config()?;
    if args.truth_table {
        let gate: Gate = args.scheme.parse().map_err(Failure::usage)?;
        let table = run_truth_table(gate, cfg, &sampler, args.sampler.chains)?;
        emit(
            &table.to_csv(),
            args.out.as_deref(),
            "sweep --truth-table",
            &[],
            Some(sampler.seed),
            json!({ "gate": args.scheme, "sampler": sampler, "lattice": cfg, "chains": args.sampler.chains }),
        )?;
        eprintln!("separation margin {:.3}", table.margin());
        return if table.passes() {
            Ok(())
        } else {
            Err(Failure::Check(format!("{} truth table does not separate On from Off", args.scheme)))
        };
    }
    let plan = SweepPlan {
        scheme,
        lattice: cfg,
        k_values: parse_range(&args.k)?,
        sampler,
        chains: args.sampler.chains,
        tracked: None,
    };
    let table = run_sweep(&plan)?;
    for f in &table.failures {
        eprintln!("k = {}: {}", f.k, f.message);
    }
    emit(
        &table.to_csv(),
        args.out.as_deref(),
        "sweep",
        &[],
        Some(sampler.seed),
        json!({ "plan": plan }),
    )?;
    if let Some(script) = &args.plot_script {
        let csv = args
            .out
            .as_deref()
            .ok_or_else(|| Failure::usage("--plot-script needs --out for the CSV it reads"))?;
        write_file(script, plot_script(csv, &args.scheme).as_bytes())?;
    }
    Ok(())
}

fn normalized_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or("weights".into(), |s| s.to_string_lossy().into_owned());
    let name = match out.extension() {
        Some(ext) => format!("{stem}.normalized.{}", ext.to_string_lossy()),
        None => format!("{stem}.normalized"),
    };
    out.with_file_name(name)
}

fn train_cmd(args: &TrainArgs) -> Result<(), Failure> {
    let dir = mnist_dir(&args.mnist_dir);
    let train_set = load_split(&dir, Split::Train)?;
    let test_set = load_split(&dir, Split::Test)?;
    let params = TrainParams {
        learning_rate: args.learning_rate,
        decay: args.decay,
        batch_size: args.batch_size,
        epochs: args.epochs,
        penalty: args.penalty,
        seed: args.seed,
    };
    let outcome = train(&train_set, &params)?;
    let w = &outcome.weights;
    let acc = accuracy(w, &test_set);
    let min = w.iter().copied().fold(f64::INFINITY, f64::min);
    let eps_hat = normalize_weights(&clamp_nonnegative(w))?;
    let normalized = normalized_path(&args.out);
    save_weights(w, &args.out)?;
    save_weights(&eps_hat, &normalized)?;
    write_manifest(
        "train",
        &[&dir],
        Some(args.seed),
        &[&args.out, &normalized],
        json!({ "params": params, "test_accuracy": acc, "min_weight": min, "epoch_loss": outcome.epoch_loss }),
    )?;
    println!("test accuracy {acc:.4}");
    println!("min weight    {min:e}");
    println!("weights       {}", args.out.display());
    println!("normalized    {}", normalized.display());
    Ok(())
}

fn read_image(path: &Path) -> Result<Vec<f64>, Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).ok();
    let parsed: Option<Vec<f64>> = text.and_then(|t| {
        t.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().ok())
            .collect()
    });
    let image = match parsed {
        Some(v) if v.len() == PIXELS => v,
        _ if bytes.len() == PIXELS => bytes.iter().map(|&b| f64::from(b) / 255.0).collect(),
        _ => {
            return Err(Failure::Usage(format!(
                "{}: expected {PIXELS} raw bytes or {PIXELS} numbers",
                path.display()
            )))
        }
    };
    if let Some(v) = image.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Failure::Usage(format!("{}: brightness {v} outside [0, 1]", path.display())));
    }
    Ok(image)
}

fn recognize_cmd(args: &RecognizeArgs) -> Result<(), Failure> {
    let w = load_weights(&args.weights)?;
    let eps_hat = normalize_weights(&clamp_nonnegative(&w))?;
    let (image, label) = match (&args.image, args.index) {
        (Some(path), _) => (read_image(path)?, None),
        (None, Some(i)) => {
            let test = load_split(&mnist_dir(&args.mnist_dir), Split::Test)?;
            if i >= test.len() {
                return Err(Failure::Usage(format!("index {i} out of range (test set has {})", test.len())));
            }
            (test.image(i), Some(test.labels[i]))
        }
        (None, None) => return Err(Failure::usage("give --index or --image")),
    };
    let params = DigitParams { k: args.k, output_inhibition: args.output_inhibition };
    let sampler = args.sampler.config()?;
    let r = recognize(&image, &eps_hat, &params, args.lattice.config()?, &sampler, args.sampler.chains)?;
    println!("digit,activity,std_error,score");
    for d in 0..r.scores.len() {
        println!("{d},{},{},{}", r.activities[d], r.std_errors[d], r.scores[d]);
    }
    match label {
        Some(l) => println!("predicted {} (label {l})", r.predicted),
        None => println!("predicted {}", r.predicted),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::KinkCheck(a) => kink_check(a),
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Train(a) => train_cmd(a),
        Command::Recognize(a) => recognize_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("FAIL: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
