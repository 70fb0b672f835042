mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use toric_core::agent::{decode_episode, DecodeTrace, Outcome};
use toric_core::analytic::{
    configuration_count, f_mcc_exact, f_mwpm_exact, mcc_failing_chain_weight, mwpm_failing_chain_weight,
    table_normalizer, AsymptoticRates,
};
use toric_core::evalharness::{
    asymptotic_fail_fraction, evaluate, models_at, sweep, write_csv, AsymptoticDecoder, AsymptoticEstimate,
    AsymptoticSampling, Decoder, EvalError, EvalResult, DEFAULT_WORKERS,
};
use toric_core::lattice::{CodeDistance, Pauli, QubitIndex, Syndrome};
use toric_core::neural::load_checkpoint;
use toric_core::noise::{sample_error, worker_stream, NoiseModel};
use toric_core::trainer::{train, DirectorySink};

use config::{output_root, Provenance, RunConfig};

/// Bad invocation, config or input path; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "toric", version, about = "Toric-code decoder training and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a Q-network decoder.
    Train(TrainArgs),
    /// Success rate of one decoder at one error rate.
    Evaluate(EvalArgs),
    /// Success rates over a list of error rates.
    Sweep(SweepArgs),
    /// Restricted single-line estimate of the asymptotic fail fraction.
    Asymptotic(AsymptoticArgs),
    /// Closed-form low-error-rate fail rates as JSON.
    Analytic(AnalyticArgs),
    /// Step-by-step greedy decode of one syndrome.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Output root; defaults to $TORIC_RUNS_DIR, then ./runs.
    #[arg(long)]
    output_root: Option<PathBuf>,
    /// Run directory name under the output root.
    #[arg(long)]
    run_id: Option<String>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum DecoderKind {
    Mwpm,
    Dqn,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum AsymptoticKind {
    Mcc,
    Mwpm,
    Dqn,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    Depolarizing,
    Bitflip,
    Biased,
}

#[derive(Args, Debug)]
struct DecoderArgs {
    #[arg(long, value_enum)]
    decoder: DecoderKind,
    /// Network checkpoint for the dqn decoder.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Code distance; taken from the checkpoint when omitted.
    #[arg(long)]
    d: Option<usize>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    decoder: DecoderArgs,
    #[arg(long, value_enum, default_value = "depolarizing")]
    model: ModelKind,
    #[arg(long)]
    p: f64,
    /// Relative Z rate for the biased model.
    #[arg(long)]
    p_rel: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    n: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Independent sample streams (results depend on this, not on threads).
    #[arg(long, default_value_t = DEFAULT_WORKERS)]
    workers: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    decoder: DecoderArgs,
    #[arg(long, value_enum, default_value = "depolarizing")]
    model: ModelKind,
    /// Comma-separated error rates.
    #[arg(long, value_delimiter = ',', required = true)]
    p: Vec<f64>,
    /// Comma-separated relative Z rates (biased model); crossed with --p.
    #[arg(long, value_delimiter = ',')]
    p_rel: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    n: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_WORKERS)]
    workers: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct AsymptoticArgs {
    #[arg(long, value_enum)]
    decoder: AsymptoticKind,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Sample this many chains instead of enumerating all of them.
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_WORKERS)]
    workers: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct AnalyticArgs {
    #[arg(long)]
    d: usize,
    /// Physical error rate for the power-law fail rates.
    #[arg(long, default_value_t = 0.01)]
    p: f64,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// JSON file with "vertex" and "plaquette" 0/1 grids.
    #[arg(long, conflicts_with = "seed")]
    syndrome: Option<PathBuf>,
    /// Sample a depolarizing error with this seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0.1)]
    p: f64,
    #[arg(long, default_value_t = 75)]
    max_steps: usize,
    /// Print the trace as JSON.
    #[arg(long)]
    json: bool,
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn distance(d: usize) -> Result<CodeDistance> {
    CodeDistance::new(d).map_err(|e| usage(format!("--d {d}: {e}")))
}

fn noise_model(kind: ModelKind, p: f64, p_rel: Option<f64>) -> Result<NoiseModel> {
    let m = match (kind, p_rel) {
        (ModelKind::Depolarizing, None) => NoiseModel::Depolarizing { p },
        (ModelKind::Bitflip, None) => NoiseModel::BitFlip { p },
        (ModelKind::Biased, Some(p_rel)) => NoiseModel::Biased { p, p_rel },
        (ModelKind::Biased, None) => return Err(usage("--model biased needs --p-rel")),
        (_, Some(_)) => return Err(usage("--p-rel only applies to --model biased")),
    };
    m.validate().map_err(|e| usage(e.to_string()))?;
    Ok(m)
}

fn existing(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        return Err(usage(format!("{what} {} does not exist", path.display())));
    }
    Ok(())
}

fn load_decoder(args: &DecoderArgs) -> Result<(Decoder, CodeDistance)> {
    match args.decoder {
        DecoderKind::Mwpm => {
            if args.checkpoint.is_some() {
                return Err(usage("--checkpoint only applies to --decoder dqn"));
            }
            let d = args.d.ok_or_else(|| usage("--d is required for --decoder mwpm"))?;
            Ok((Decoder::Mwpm, distance(d)?))
        }
        DecoderKind::Dqn => {
            let path = args.checkpoint.as_ref().ok_or_else(|| usage("--decoder dqn needs --checkpoint"))?;
            existing(path, "checkpoint")?;
            let dec = Decoder::from_checkpoint(path, args.d)?;
            let d = match &dec {
                Decoder::Dqn { net, .. } => net.d(),
                Decoder::Mwpm => unreachable!(),
            };
            Ok((dec, distance(d)?))
        }
    }
}

fn results_dir(output: &OutputArgs, default_id: String) -> Result<PathBuf> {
    let dir = output_root(output.output_root.as_deref())
        .join(output.run_id.clone().unwrap_or(default_id))
        .join("results");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

#[derive(Serialize)]
struct EvalInvocation<'a> {
    decoder: &'static str,
    checkpoint: Option<&'a Path>,
    d: usize,
    models: &'a [NoiseModel],
    n: u64,
    seed: u64,
    workers: usize,
}

fn write_results(dir: &Path, name: &str, command: &str, inv: &EvalInvocation, results: &[EvalResult]) -> Result<()> {
    let csv_path = dir.join(format!("{name}.csv"));
    write_csv(fs::File::create(&csv_path)?, results)?;
    #[derive(Serialize)]
    struct Doc<'a, 'b> {
        provenance: Provenance<'a, EvalInvocation<'b>>,
        results: &'a [EvalResult],
    }
    let doc = Doc { provenance: Provenance::new(command, inv), results };
    fs::write(dir.join(format!("{name}.json")), serde_json::to_string_pretty(&doc)? + "\n")?;
    println!("wrote {}", csv_path.display());
    Ok(())
}

fn print_result(r: &EvalResult) {
    println!(
        "{} d={} {} p={} n={}: success {:.6} [{:.6}, {:.6}] (homology fails {}, step-cap fails {})",
        r.decoder, r.d, r.model, r.p, r.n, r.rate, r.ci_low, r.ci_high, r.fail_homology, r.fail_cap
    );
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.training.validate().map_err(|e| usage(e.to_string()))?;
    let root = output_root(args.output.output_root.as_deref().or(cfg.output_root.as_deref()));
    let run_id = args.output.run_id.clone().unwrap_or_else(|| cfg.run_id());
    let dir = root.join(&run_id);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(&Provenance::new("train", &cfg))? + "\n")?;
    let mut sink = DirectorySink::create(&dir)?;
    let out = train(&cfg.training, &mut sink)?;
    let last = sink.checkpoints().last().cloned().expect("initial checkpoint is always written");
    println!(
        "trained {} steps ({} target syncs, {} episodes); {} checkpoints in {}",
        out.steps,
        out.target_syncs,
        out.episodes,
        sink.checkpoints().len(),
        dir.join("checkpoints").display()
    );
    println!("final checkpoint {}", last.display());
    let ev = &cfg.evaluation;
    if ev.n > 0 && !ev.p.is_empty() && out.steps > 0 {
        let d = distance(cfg.training.d)?;
        let models = models_at(&NoiseModel::Depolarizing { p: 0.0 }, &ev.p);
        for m in &models {
            m.validate().map_err(|e| usage(format!("evaluation.p: {e}")))?;
        }
        let decoder = Decoder::dqn(out.policy);
        let results = sweep(&decoder, d, &models, ev.n, ev.seed, ev.workers)?;
        results.iter().for_each(print_result);
        let inv = EvalInvocation {
            decoder: "dqn",
            checkpoint: Some(&last),
            d: d.get(),
            models: &models,
            n: ev.n,
            seed: ev.seed,
            workers: ev.workers,
        };
        let rdir = dir.join("results");
        fs::create_dir_all(&rdir)?;
        write_results(&rdir, "final_eval", "train", &inv, &results)?;
    }
    Ok(())
}

fn cmd_evaluate(args: EvalArgs) -> Result<()> {
    let (decoder, d) = load_decoder(&args.decoder)?;
    let model = noise_model(args.model, args.p, args.p_rel)?;
    let r = evaluate(&decoder, d, &model, args.n, args.seed, args.workers)?;
    print_result(&r);
    let models = [model];
    let inv = EvalInvocation {
        decoder: decoder.id(),
        checkpoint: args.decoder.checkpoint.as_deref(),
        d: d.get(),
        models: &models,
        n: args.n,
        seed: args.seed,
        workers: args.workers,
    };
    let dir = results_dir(&args.output, format!("evaluate-{}-d{}-seed{}", decoder.id(), d.get(), args.seed))?;
    write_results(&dir, &format!("evaluate_{}_p{}", model.name(), args.p), "evaluate", &inv, &[r])
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let (decoder, d) = load_decoder(&args.decoder)?;
    let mut models = Vec::new();
    if args.p_rel.is_empty() {
        for &p in &args.p {
            models.push(noise_model(args.model, p, None)?);
        }
    } else {
        for &p in &args.p {
            for &r in &args.p_rel {
                models.push(noise_model(args.model, p, Some(r))?);
            }
        }
    }
    let results = sweep(&decoder, d, &models, args.n, args.seed, args.workers)?;
    results.iter().for_each(print_result);
    let inv = EvalInvocation {
        decoder: decoder.id(),
        checkpoint: args.decoder.checkpoint.as_deref(),
        d: d.get(),
        models: &models,
        n: args.n,
        seed: args.seed,
        workers: args.workers,
    };
    let model_name = models.first().map_or("none", |m| m.name());
    let dir = results_dir(&args.output, format!("sweep-{}-d{}-seed{}", decoder.id(), d.get(), args.seed))?;
    write_results(&dir, &format!("sweep_{model_name}"), "sweep", &inv, &results)
}

fn cmd_asymptotic(args: AsymptoticArgs) -> Result<()> {
    let (decoder, d) = match args.decoder {
        AsymptoticKind::Mcc | AsymptoticKind::Mwpm => {
            if args.checkpoint.is_some() {
                return Err(usage("--checkpoint only applies to --decoder dqn"));
            }
            let d = distance(args.d.ok_or_else(|| usage("--d is required"))?)?;
            let dec = if args.decoder == AsymptoticKind::Mcc {
                AsymptoticDecoder::MccRestricted
            } else {
                AsymptoticDecoder::Standard(Decoder::Mwpm)
            };
            (dec, d)
        }
        AsymptoticKind::Dqn => {
            let (dec, d) =
                load_decoder(&DecoderArgs { decoder: DecoderKind::Dqn, checkpoint: args.checkpoint.clone(), d: args.d })?;
            (AsymptoticDecoder::Standard(dec), d)
        }
    };
    let sampling = match args.samples {
        Some(n) => AsymptoticSampling::Sampled { n, seed: args.seed },
        None => AsymptoticSampling::Exhaustive,
    };
    let est = asymptotic_fail_fraction(&decoder, d, sampling, args.workers)?;
    let rates = AsymptoticRates::new(d, 0.0);
    println!("decoder {} d={} k={} chains={} ({:?})", est.decoder, est.d, est.k, est.chains, est.sampling);
    println!("  f (restricted estimate)   {:.4e}", est.f);
    if let Some((lo, hi)) = est.f_interval {
        println!("  95% interval              [{lo:.4e}, {hi:.4e}]");
    }
    println!("  f_mcc  (analytic)         {:.4e}", rates.f_mcc);
    println!("  f_mwpm (analytic)         {:.4e}", rates.f_mwpm);
    println!("  physical normalization    {:.4e}", est.f_physical);
    #[derive(Serialize)]
    struct Doc<'a> {
        provenance: Provenance<'a, serde_json::Value>,
        estimate: &'a AsymptoticEstimate,
        f_mcc: f64,
        f_mwpm: f64,
    }
    let inv = serde_json::json!({
        "decoder": est.decoder, "d": d.get(), "checkpoint": args.checkpoint,
        "sampling": sampling, "workers": args.workers,
    });
    let doc = Doc { provenance: Provenance::new("asymptotic", &inv), estimate: &est, f_mcc: rates.f_mcc, f_mwpm: rates.f_mwpm };
    let dir = results_dir(&args.output, format!("asymptotic-{}-d{}", est.decoder, d.get()))?;
    let path = dir.join(format!("asymptotic_{}_d{}.json", est.decoder, d.get()));
    fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_analytic(args: AnalyticArgs) -> Result<()> {
    let d = distance(args.d)?;
    if !(0.0..=1.0).contains(&args.p) {
        return Err(usage(format!("--p {} outside [0, 1]", args.p)));
    }
    let rates = AsymptoticRates::new(d, args.p);
    let doc = serde_json::json!({
        "d": rates.d,
        "k": d.half_ceil(),
        "p": rates.p,
        "f_mcc": rates.f_mcc,
        "f_mwpm": rates.f_mwpm,
        "f_mcc_exact": f_mcc_exact(d).to_string(),
        "f_mwpm_exact": f_mwpm_exact(d).to_string(),
        "mcc_failing_weight": mcc_failing_chain_weight(d).to_string(),
        "mwpm_failing_weight": mwpm_failing_chain_weight(d).to_string(),
        "table_normalizer": table_normalizer(d).to_string(),
        "configuration_count": configuration_count(d).to_string(),
        "p_l_mcc": rates.p_l_mcc,
        "p_l_mwpm": rates.p_l_mwpm,
        "p_l_bitflip": rates.p_l_bitflip,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}

#[derive(Serialize)]
struct InspectReport {
    d: usize,
    /// Sampled error as (qubit, Pauli) pairs.
    error: Option<Vec<(QubitIndex, Pauli)>>,
    trace: DecodeTrace,
    verdict: String,
}

fn cmd_inspect(args: InspectArgs) -> Result<()> {
    existing(&args.checkpoint, "checkpoint")?;
    let ck = load_checkpoint(&args.checkpoint, None)?;
    let d = CodeDistance::new(ck.net.d()).context("checkpoint distance")?;
    let (error, syndrome) = match (&args.syndrome, args.seed) {
        (Some(path), _) => {
            existing(path, "syndrome file")?;
            let text = fs::read_to_string(path)?;
            let s: Syndrome =
                serde_json::from_str(&text).map_err(|e| usage(format!("invalid syndrome file {}: {e}", path.display())))?;
            if s.d() != d.get() {
                return Err(usage(format!("syndrome is {}x{} but the checkpoint is for d={}", s.d(), s.d(), d.get())));
            }
            (None, s)
        }
        (None, Some(seed)) => {
            let model = noise_model(ModelKind::Depolarizing, args.p, None)?;
            let e = sample_error(d, &model, &mut worker_stream(seed, 0))?;
            let s = e.compute_syndrome();
            (Some(e), s)
        }
        (None, None) => return Err(usage("inspect needs --syndrome or --seed")),
    };
    let (correction, trace) = decode_episode(&ck.net, &syndrome, args.max_steps)?;
    let verdict = match (trace.outcome, &error) {
        (Outcome::StepLimit, _) => "failure(StepLimit)".to_string(),
        (Outcome::Cleared, Some(e)) => {
            let class = e.compose(&correction).homology_class().context("cleared residual")?;
            if class.is_logical_failure() {
                "failure(Homology)".into()
            } else {
                "success".into()
            }
        }
        (Outcome::Cleared, None) => "success".into(),
    };
    if args.json {
        let report = InspectReport { d: d.get(), error: error.map(|e| e.support()), trace, verdict };
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", trace.render());
        println!("steps: {}", trace.len());
        println!("verdict: {verdict}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Asymptotic(a) => cmd_asymptotic(a),
        Command::Analytic(a) => cmd_analytic(a),
        Command::Inspect(a) => cmd_inspect(a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<EvalError>() {
        Some(EvalError::CheckpointIncompatible(_)) | Some(EvalError::UnsupportedDistance(_)) => 2,
        Some(EvalError::InvalidInput(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
