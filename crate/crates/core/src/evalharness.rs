//! Monte-Carlo success rates, paired decoder comparison and the restricted
//! single-line estimator of the asymptotic fail fraction.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use num_rational::BigRational;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};
use thiserror::Error;

use crate::agent::{decode_episode, Outcome, DEFAULT_MAX_STEPS};
use crate::analytic::{binomial, configuration_count, table_normalizer};
use crate::lattice::{CodeDistance, Pauli, PauliFrame, Syndrome};
use crate::matching::{decode_mwpm, MatchingError};
use crate::mcc_oracle::{mcc_decode_restricted, OracleError};
use crate::neural::{load_checkpoint, NeuralError, QNetwork};
use crate::noise::{sample_error, sample_row_column_chain, worker_stream, Line, NoiseError, NoiseModel, RngStream};

/// Worker count used when none is given; results depend on it, the thread
/// count does not.
pub const DEFAULT_WORKERS: usize = 8;
const WILSON_Z: f64 = 1.959_963_984_540_054;
/// Largest restricted configuration count enumerated exhaustively.
pub const EXHAUSTIVE_LIMIT: u64 = 5_000_000;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("checkpoint incompatible: {0}")]
    CheckpointIncompatible(String),
    #[error("unsupported distance: {0}")]
    UnsupportedDistance(String),
    #[error("invalid evaluation parameters: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Matching(#[from] MatchingError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub enum Decoder {
    Mwpm,
    Dqn { net: Arc<QNetwork<f32>>, max_steps: usize },
}

/// A decoder's correction and whether it gave up at the step cap.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub correction: PauliFrame,
    pub capped: bool,
}

impl Decoder {
    pub fn dqn(net: QNetwork<f32>) -> Self {
        Decoder::Dqn { net: Arc::new(net), max_steps: DEFAULT_MAX_STEPS }
    }

    /// Loads a network checkpoint, requiring it to match `d` when given.
    pub fn from_checkpoint(path: &Path, d: Option<usize>) -> Result<Self, EvalError> {
        match load_checkpoint(path, d) {
            Ok(ck) => Ok(Self::dqn(ck.net)),
            Err(NeuralError::VersionMismatch(msg)) | Err(NeuralError::ArchitectureMismatch(msg)) => {
                Err(EvalError::CheckpointIncompatible(msg))
            }
            Err(e) => Err(e.into()),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Decoder::Mwpm => "mwpm",
            Decoder::Dqn { .. } => "dqn",
        }
    }

    fn check_distance(&self, d: usize) -> Result<(), EvalError> {
        match self {
            Decoder::Dqn { net, .. } if net.d() != d => Err(EvalError::CheckpointIncompatible(format!(
                "network trained for d={} ({} parameters, {} conv layers), evaluation at d={d}",
                net.d(),
                net.parameter_count(),
                net.config().convs.len()
            ))),
            _ => Ok(()),
        }
    }

    pub fn decode(&self, s: &Syndrome) -> Result<Decoded, EvalError> {
        match self {
            Decoder::Mwpm => Ok(Decoded { correction: decode_mwpm(s)?, capped: false }),
            Decoder::Dqn { net, max_steps } => {
                let (correction, trace) = decode_episode(net, s, *max_steps)?;
                Ok(Decoded { correction, capped: trace.outcome == Outcome::StepLimit })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Success,
    Homology,
    Cap,
}

fn classify(error: &PauliFrame, decoded: &Decoded) -> Verdict {
    let residual = error.compose(&decoded.correction);
    if !residual.compute_syndrome().is_empty() {
        return Verdict::Cap;
    }
    let class = residual.homology_class().expect("syndrome checked empty");
    if class.is_logical_failure() {
        Verdict::Homology
    } else {
        Verdict::Success
    }
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(successes: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let (x, n) = (successes as f64, n as f64);
    let z2 = WILSON_Z * WILSON_Z;
    let centre = (x + z2 / 2.0) / (n + z2);
    let half = WILSON_Z / (n + z2) * (x * (n - x) / n + z2 / 4.0).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub decoder: String,
    pub d: usize,
    pub model: String,
    pub p: f64,
    pub p_rel: Option<f64>,
    pub n: u64,
    pub successes: u64,
    pub fail_homology: u64,
    pub fail_cap: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

impl EvalResult {
    fn new(decoder: &Decoder, d: usize, model: &NoiseModel, seed: u64, counts: [u64; 3]) -> Self {
        let [successes, fail_homology, fail_cap] = counts;
        let n = successes + fail_homology + fail_cap;
        let (ci_low, ci_high) = wilson_interval(successes, n);
        let rate = if n == 0 { 0.0 } else { successes as f64 / n as f64 };
        Self {
            decoder: decoder.id().to_string(),
            d,
            model: model.name().to_string(),
            p: model.p(),
            p_rel: model.p_rel(),
            n,
            successes,
            fail_homology,
            fail_cap,
            rate,
            ci_low,
            ci_high,
            seed,
        }
    }

    pub fn fail_rate(&self) -> f64 {
        1.0 - self.rate
    }

    /// Wilson interval of the fail rate.
    pub fn fail_interval(&self) -> (f64, f64) {
        (1.0 - self.ci_high, 1.0 - self.ci_low)
    }
}

fn worker_share(n: u64, workers: usize, w: usize) -> u64 {
    let workers = workers as u64;
    n / workers + u64::from((w as u64) < n % workers)
}

fn check_workers(workers: usize) -> Result<(), EvalError> {
    if workers == 0 {
        return Err(EvalError::InvalidInput("worker count must be positive".into()));
    }
    Ok(())
}

/// Runs `per_sample` on `n` error frames split over `workers` independent
/// streams; the per-worker outputs are returned in worker order.
fn run_workers<T: Send>(
    d: CodeDistance,
    model: &NoiseModel,
    n: u64,
    seed: u64,
    workers: usize,
    per_sample: impl Fn(&PauliFrame, &mut T) -> Result<(), EvalError> + Sync,
    init: impl Fn() -> T + Sync,
) -> Result<Vec<T>, EvalError> {
    check_workers(workers)?;
    model.validate()?;
    (0..workers)
        .into_par_iter()
        .map(|w| {
            let mut rng: RngStream = worker_stream(seed, w as u64);
            let mut acc = init();
            for _ in 0..worker_share(n, workers, w) {
                let e = sample_error(d, model, &mut rng)?;
                per_sample(&e, &mut acc)?;
            }
            Ok(acc)
        })
        .collect()
}

/// Success rate of `decoder` on `n` i.i.d. error frames.
pub fn evaluate(
    decoder: &Decoder,
    d: CodeDistance,
    model: &NoiseModel,
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<EvalResult, EvalError> {
    decoder.check_distance(d.get())?;
    let parts = run_workers(
        d,
        model,
        n,
        seed,
        workers,
        |e, acc: &mut [u64; 3]| {
            let decoded = decoder.decode(&e.compute_syndrome())?;
            acc[classify(e, &decoded) as usize] += 1;
            Ok(())
        },
        || [0u64; 3],
    )?;
    let counts = parts.iter().fold([0u64; 3], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2]]);
    Ok(EvalResult::new(decoder, d.get(), model, seed, counts))
}

/// Seed for the `i`-th point of a sweep.
pub fn derived_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// [`evaluate`] over a list of noise models with derived seeds.
pub fn sweep(
    decoder: &Decoder,
    d: CodeDistance,
    models: &[NoiseModel],
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<Vec<EvalResult>, EvalError> {
    models.iter().enumerate().map(|(i, m)| evaluate(decoder, d, m, n, derived_seed(seed, i), workers)).collect()
}

/// `template` at each error rate in `ps`.
pub fn models_at(template: &NoiseModel, ps: &[f64]) -> Vec<NoiseModel> {
    ps.iter().map(|&p| template.with_p(p)).collect()
}

pub const CSV_HEADER: [&str; 13] =
    ["decoder", "d", "model", "p", "p_rel", "n", "successes", "fail_homology", "fail_cap", "rate", "ci_low", "ci_high", "seed"];

/// Writes results as CSV with the fixed column set; the header is written
/// even when `results` is empty.
pub fn write_csv<W: Write>(out: W, results: &[EvalResult]) -> Result<(), EvalError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in results {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<EvalResult>, EvalError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// Outcomes of two decoders on identical error frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedResult {
    pub decoder_a: String,
    pub decoder_b: String,
    pub d: usize,
    pub model: String,
    pub p: f64,
    pub n: u64,
    pub seed: u64,
    pub both: u64,
    pub only_a: u64,
    pub only_b: u64,
    pub neither: u64,
    /// Per-sample `(a succeeded, b succeeded)` in worker order.
    pub outcomes: Vec<(bool, bool)>,
}

impl PairedResult {
    /// Two-sided exact McNemar (sign) test on the discordant pairs.
    pub fn sign_test_p(&self) -> f64 {
        sign_test_two_sided(self.only_a, self.only_b)
    }

    /// One-sided probability of at least `only_a` A-wins among the
    /// discordant pairs under the null of equal decoders.
    pub fn sign_test_p_a_better(&self) -> f64 {
        sign_test_upper(self.only_a, self.only_b)
    }
}

fn sign_test_upper(a: u64, b: u64) -> f64 {
    let m = a + b;
    if m == 0 {
        return 1.0;
    }
    let dist = Binomial::new(0.5, m).expect("valid binomial");
    if a == 0 {
        1.0
    } else {
        dist.sf(a - 1)
    }
}

pub fn sign_test_two_sided(a: u64, b: u64) -> f64 {
    (2.0 * sign_test_upper(a.max(b), a.min(b))).min(1.0)
}

pub fn paired_compare(
    a: &Decoder,
    b: &Decoder,
    d: CodeDistance,
    model: &NoiseModel,
    n: u64,
    seed: u64,
    workers: usize,
) -> Result<PairedResult, EvalError> {
    a.check_distance(d.get())?;
    b.check_distance(d.get())?;
    let parts = run_workers(
        d,
        model,
        n,
        seed,
        workers,
        |e, acc: &mut Vec<(bool, bool)>| {
            let s = e.compute_syndrome();
            let ok_a = classify(e, &a.decode(&s)?) == Verdict::Success;
            let ok_b = classify(e, &b.decode(&s)?) == Verdict::Success;
            acc.push((ok_a, ok_b));
            Ok(())
        },
        Vec::new,
    )?;
    let outcomes: Vec<(bool, bool)> = parts.into_iter().flatten().collect();
    let count = |f: fn(&(bool, bool)) -> bool| outcomes.iter().filter(|o| f(o)).count() as u64;
    Ok(PairedResult {
        decoder_a: a.id().into(),
        decoder_b: b.id().into(),
        d: d.get(),
        model: model.name().into(),
        p: model.p(),
        n,
        seed,
        both: count(|o| o.0 && o.1),
        only_a: count(|o| o.0 && !o.1),
        only_b: count(|o| !o.0 && o.1),
        neither: count(|o| !o.0 && !o.1),
        outcomes,
    })
}

/// Decoders the restricted estimator accepts.
#[derive(Debug, Clone)]
pub enum AsymptoticDecoder {
    /// Minimal-correction-chain decoding with ties settled by a fair draw,
    /// scored by its exact failure probability.
    MccRestricted,
    Standard(Decoder),
}

impl AsymptoticDecoder {
    pub fn id(&self) -> &'static str {
        match self {
            AsymptoticDecoder::MccRestricted => "mcc",
            AsymptoticDecoder::Standard(d) => d.id(),
        }
    }

    fn failure(&self, frame: &PauliFrame) -> Result<f64, EvalError> {
        match self {
            AsymptoticDecoder::MccRestricted => Ok(mcc_decode_restricted(frame)?),
            AsymptoticDecoder::Standard(dec) => {
                let decoded = dec.decode(&frame.compute_syndrome())?;
                Ok(if classify(frame, &decoded) == Verdict::Success { 0.0 } else { 1.0 })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AsymptoticSampling {
    /// Every line, position subset and type assignment once.
    Exhaustive,
    Sampled { n: u64, seed: u64 },
}

/// Fail fraction among length-`⌈d/2⌉` chains estimated from chains confined
/// to one row or column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticEstimate {
    pub decoder: String,
    pub d: usize,
    pub k: usize,
    pub sampling: AsymptoticSampling,
    /// Chains decoded.
    pub chains: u64,
    /// Size of the restricted ensemble, `4d·C(d,k)·3^k`.
    pub restricted_count: u64,
    /// Summed failure probability over the decoded chains.
    pub failing_weight: f64,
    /// Mean failure probability over the restricted ensemble.
    pub restricted_fail_fraction: f64,
    /// Failing restricted weight over `C(2d²,k)·k³`.
    pub f: f64,
    /// Failing restricted weight over all `C(2d²,k)·3^k` chains.
    pub f_physical: f64,
    /// Wilson interval of `f` for sampled estimates.
    pub f_interval: Option<(f64, f64)>,
}

fn restricted_count(d: CodeDistance) -> u64 {
    let (n, k) = (d.get() as u64, d.half_ceil() as u32);
    4 * n * binomial(n, k as u64).to_u64().expect("small") * 3u64.pow(k)
}

fn chain(d: CodeDistance, line: Line, mask: u32, mut types: usize) -> PauliFrame {
    let mut frame = PauliFrame::identity(d);
    for pos in 0..d.get() {
        if mask & (1 << pos) != 0 {
            frame.apply_in_place(line.qubit(pos), Pauli::ALL[types % 3]);
            types /= 3;
        }
    }
    frame
}

fn ratio(num: u64, den: &num_bigint::BigUint) -> f64 {
    BigRational::new(num.into(), den.clone().into()).to_f64().expect("finite")
}

pub fn asymptotic_fail_fraction(
    decoder: &AsymptoticDecoder,
    d: CodeDistance,
    sampling: AsymptoticSampling,
    workers: usize,
) -> Result<AsymptoticEstimate, EvalError> {
    check_workers(workers)?;
    if let AsymptoticDecoder::Standard(dec) = decoder {
        dec.check_distance(d.get())?;
    }
    let n = d.get();
    let k = d.half_ceil();
    let total = restricted_count(d);
    let (chains, weight) = match sampling {
        AsymptoticSampling::Exhaustive => {
            if total > EXHAUSTIVE_LIMIT {
                return Err(EvalError::UnsupportedDistance(format!(
                    "{total} restricted chains at d={n} exceed the enumeration limit {EXHAUSTIVE_LIMIT}"
                )));
            }
            let masks: Vec<u32> = (0u32..1 << n).filter(|m| m.count_ones() as usize == k).collect();
            let assignments = 3usize.pow(k as u32);
            let jobs: Vec<(Line, u32)> = Line::all(n).flat_map(|l| masks.iter().map(move |&m| (l, m))).collect();
            let parts: Vec<f64> = jobs
                .par_iter()
                .map(|&(line, mask)| {
                    (0..assignments).map(|t| decoder.failure(&chain(d, line, mask, t))).sum::<Result<f64, _>>()
                })
                .collect::<Result<_, EvalError>>()?;
            (total, parts.iter().sum::<f64>())
        }
        AsymptoticSampling::Sampled { n: samples, seed } => {
            let parts: Vec<f64> = (0..workers)
                .into_par_iter()
                .map(|w| {
                    let mut rng = worker_stream(seed, w as u64);
                    let mut acc = 0.0;
                    for _ in 0..worker_share(samples, workers, w) {
                        acc += decoder.failure(&sample_row_column_chain(d, k, &Pauli::ALL, &mut rng)?)?;
                    }
                    Ok(acc)
                })
                .collect::<Result<_, EvalError>>()?;
            (samples, parts.iter().sum::<f64>())
        }
    };
    let fraction = if chains == 0 { 0.0 } else { weight / chains as f64 };
    let to_table = ratio(total, &table_normalizer(d));
    let to_physical = ratio(total, &configuration_count(d));
    let f_interval = match sampling {
        AsymptoticSampling::Sampled { .. } => {
            let (lo, hi) = wilson_interval(weight.round() as u64, chains);
            Some((lo * to_table, hi * to_table))
        }
        AsymptoticSampling::Exhaustive => None,
    };
    Ok(AsymptoticEstimate {
        decoder: decoder.id().into(),
        d: n,
        k,
        sampling,
        chains,
        restricted_count: total,
        failing_weight: weight,
        restricted_fail_fraction: fraction,
        f: fraction * to_table,
        f_physical: fraction * to_physical,
        f_interval,
    })
}
