//! Deep Q-learning loop: ε-greedy episodes over the perspective
//! observation, prioritized replay, weighted L1 TD updates and a periodically
//! synchronized target network.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agent::{batch_input, q_values, select_action_index};
use crate::lattice::{CodeDistance, Syndrome};
use crate::neural::{
    save_checkpoint, weighted_l1_grad, AdamConfig, AdamState, CheckpointMeta, LossKind, NeuralError, QNetwork,
    QNetworkConfig, Tensor,
};
use crate::noise::{sample_error, worker_stream, NoiseModel, RngStream};
use crate::perspectives::{observation, PERSPECTIVE_CONVENTION};
use crate::replay::{PrioritizedBuffer, ReplayError, Transition};

pub use crate::mcc_oracle::reward;

pub const CURRICULUM_MIN: f64 = 0.10;
pub const CURRICULUM_MAX: f64 = 0.30;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub d: usize,
    /// Defaults to [`QNetworkConfig::desk`] for `d`.
    pub network: Option<QNetworkConfig>,
    pub batch_size: usize,
    pub steps_per_epoch: u64,
    pub total_steps: u64,
    pub replay_capacity: usize,
    pub alpha: f64,
    pub beta: f64,
    pub target_sync: u64,
    pub gamma: f64,
    pub adam: AdamConfig,
    pub epsilon_initial: f64,
    pub epsilon_final: f64,
    /// Fraction of `total_steps` over which ε decays linearly.
    pub epsilon_decay_fraction: f64,
    pub replay_start: usize,
    pub max_steps: usize,
    pub curriculum: Vec<f64>,
    pub loss: LossKind,
    pub metrics_interval: u64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            d: 3,
            network: None,
            batch_size: 32,
            steps_per_epoch: 10_000,
            total_steps: 50_000,
            replay_capacity: 10_000,
            alpha: 0.6,
            beta: 0.4,
            target_sync: 1_000,
            gamma: 0.95,
            adam: AdamConfig::default(),
            epsilon_initial: 1.0,
            epsilon_final: 0.1,
            epsilon_decay_fraction: 0.2,
            replay_start: 1_000,
            max_steps: 75,
            curriculum: vec![0.10, 0.15, 0.20, 0.25, 0.30],
            loss: LossKind::L1,
            metrics_interval: 1_000,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn network_config(&self) -> QNetworkConfig {
        self.network.clone().unwrap_or_else(|| QNetworkConfig::desk(self.d))
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::ConfigInvalid(msg));
        if CodeDistance::new(self.d).is_err() {
            return bad(format!("d={} must be odd and at least 3", self.d));
        }
        let net = self.network_config();
        net.validate()?;
        if net.d != self.d {
            return bad(format!("network built for d={} but training d={}", net.d, self.d));
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return bad(format!("batch {} must be positive and fit in replay {}", self.batch_size, self.replay_capacity));
        }
        if self.replay_start < self.batch_size || self.replay_start > self.replay_capacity {
            return bad(format!(
                "replay_start {} must lie in [batch_size, replay_capacity] = [{}, {}]",
                self.replay_start, self.batch_size, self.replay_capacity
            ));
        }
        if self.steps_per_epoch == 0 || self.target_sync == 0 || self.metrics_interval == 0 || self.max_steps == 0 {
            return bad("steps_per_epoch, target_sync, metrics_interval and max_steps must be positive".into());
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma={} outside [0, 1)", self.gamma));
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.beta <= 1.0) {
            return bad(format!("alpha={} beta={} out of range", self.alpha, self.beta));
        }
        let eps_ok = |e: f64| (0.0..=1.0).contains(&e);
        if !eps_ok(self.epsilon_initial) || !eps_ok(self.epsilon_final) || self.epsilon_final > self.epsilon_initial {
            return bad(format!("epsilon schedule {} -> {} invalid", self.epsilon_initial, self.epsilon_final));
        }
        if !(0.0..=1.0).contains(&self.epsilon_decay_fraction) {
            return bad(format!("epsilon_decay_fraction={} outside [0, 1]", self.epsilon_decay_fraction));
        }
        if !(self.adam.lr > 0.0) {
            return bad(format!("learning rate {} must be positive", self.adam.lr));
        }
        if self.curriculum.is_empty() {
            return bad("curriculum is empty".into());
        }
        if self.curriculum.windows(2).any(|w| w[1] < w[0]) {
            return bad(format!("curriculum {:?} is not nondecreasing", self.curriculum));
        }
        if self.curriculum.iter().any(|p| !(CURRICULUM_MIN..=CURRICULUM_MAX).contains(p)) {
            return bad(format!("curriculum {:?} leaves [{CURRICULUM_MIN}, {CURRICULUM_MAX}]", self.curriculum));
        }
        Ok(())
    }

    /// Hex sha256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Linear decay over the first `epsilon_decay_fraction` of the run, then
    /// constant.
    pub fn epsilon(&self, step: u64) -> f64 {
        let span = self.epsilon_decay_fraction * self.total_steps as f64;
        let t = if span > 0.0 { (step as f64 / span).min(1.0) } else { 1.0 };
        self.epsilon_initial + (self.epsilon_final - self.epsilon_initial) * t
    }

    /// Error rate of the equal-length curriculum phase containing `step`.
    pub fn curriculum_rate(&self, step: u64) -> f64 {
        let n = self.curriculum.len() as u64;
        let phase = if self.total_steps == 0 { 0 } else { (step * n / self.total_steps).min(n - 1) };
        self.curriculum[phase as usize]
    }
}

/// Statistics over one metrics interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetrics {
    pub step: u64,
    pub epoch: u64,
    pub episodes: u64,
    pub mean_episode_length: Option<f64>,
    pub mean_td_loss: Option<f64>,
    pub terminal_fraction: Option<f64>,
    pub epsilon: f64,
    pub curriculum_rate: f64,
    pub target_syncs: u64,
    pub replay_len: usize,
}

/// Receiver of the metrics and checkpoint streams.
pub trait TrainingSink {
    fn metrics(&mut self, m: &TrainingMetrics) -> Result<(), TrainError>;
    fn checkpoint(
        &mut self,
        step: u64,
        net: &QNetwork<f32>,
        adam: &AdamState<f32>,
        meta: &CheckpointMeta,
    ) -> Result<(), TrainError>;
}

/// Keeps everything in memory.
#[derive(Debug, Default)]
pub struct MemorySink {
    pub metrics: Vec<TrainingMetrics>,
    pub checkpoints: Vec<(u64, QNetwork<f32>)>,
}

impl TrainingSink for MemorySink {
    fn metrics(&mut self, m: &TrainingMetrics) -> Result<(), TrainError> {
        self.metrics.push(m.clone());
        Ok(())
    }

    fn checkpoint(&mut self, step: u64, net: &QNetwork<f32>, _: &AdamState<f32>, _: &CheckpointMeta) -> Result<(), TrainError> {
        self.checkpoints.push((step, net.clone()));
        Ok(())
    }
}

/// Writes `metrics.jsonl` and `checkpoints/step_XXXXXXXXXX.tqck` under a run
/// directory.
#[derive(Debug)]
pub struct DirectorySink {
    root: PathBuf,
    metrics: BufWriter<File>,
    written: Vec<PathBuf>,
}

impl DirectorySink {
    pub fn create(root: &Path) -> Result<Self, TrainError> {
        fs::create_dir_all(root.join("checkpoints"))?;
        let metrics = BufWriter::new(File::create(root.join("metrics.jsonl"))?);
        Ok(Self { root: root.to_path_buf(), metrics, written: Vec::new() })
    }

    pub fn checkpoint_path(root: &Path, step: u64) -> PathBuf {
        root.join("checkpoints").join(format!("step_{step:010}.tqck"))
    }

    pub fn checkpoints(&self) -> &[PathBuf] {
        &self.written
    }
}

impl TrainingSink for DirectorySink {
    fn metrics(&mut self, m: &TrainingMetrics) -> Result<(), TrainError> {
        serde_json::to_writer(&mut self.metrics, m)?;
        self.metrics.write_all(b"\n")?;
        self.metrics.flush()?;
        Ok(())
    }

    fn checkpoint(
        &mut self,
        step: u64,
        net: &QNetwork<f32>,
        adam: &AdamState<f32>,
        meta: &CheckpointMeta,
    ) -> Result<(), TrainError> {
        let path = Self::checkpoint_path(&self.root, step);
        save_checkpoint(&path, net, adam, meta)?;
        self.written.push(path);
        Ok(())
    }
}

/// Bootstrapped target `r + γ·max Q_T(s′)`, or `r` for terminal transitions.
pub fn td_target<T: crate::neural::Scalar>(
    transition: &Transition,
    target: &QNetwork<T>,
    gamma: f64,
) -> Result<f64, NeuralError> {
    if transition.terminal {
        return Ok(transition.reward);
    }
    Ok(transition.reward + gamma * max_q(target, &transition.next_syndrome)?)
}

/// Largest Q-value over every perspective and action of `s`.
pub fn max_q<T: crate::neural::Scalar>(net: &QNetwork<T>, s: &Syndrome) -> Result<f64, NeuralError> {
    let obs = match observation(s) {
        Ok(o) => o,
        Err(_) => return Ok(0.0),
    };
    Ok(q_values(net, &obs)?.iter().flat_map(|e| e.q).fold(f64::NEG_INFINITY, f64::max))
}

/// Copies policy parameters into the target network.
pub fn sync_target<T: crate::neural::Scalar>(policy: &QNetwork<T>, target: &mut QNetwork<T>) -> Result<(), NeuralError> {
    target.copy_from(policy)
}

/// Final state of a training run.
#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub policy: QNetwork<f32>,
    pub adam: AdamState<f32>,
    pub steps: u64,
    pub target_syncs: u64,
    pub episodes: u64,
    /// Observed reward values (rounded) and their counts, prefill included.
    pub rewards: BTreeMap<i64, u64>,
    /// Visit counts of the syndromes the agent acted on, keyed by
    /// [`Syndrome::pack`].
    pub visits: HashMap<Vec<u64>, u64>,
}

struct Episode {
    syndrome: Syndrome,
    steps: usize,
}

struct Interval {
    episodes: u64,
    episode_steps: u64,
    cleared: u64,
    loss_sum: f64,
    updates: u64,
}

impl Interval {
    fn new() -> Self {
        Self { episodes: 0, episode_steps: 0, cleared: 0, loss_sum: 0.0, updates: 0 }
    }
}

struct Trainer<'a> {
    cfg: &'a TrainingConfig,
    d: CodeDistance,
    rng: RngStream,
    policy: QNetwork<f32>,
    target: QNetwork<f32>,
    adam: AdamState<f32>,
    replay: PrioritizedBuffer<Transition>,
    target_cache: HashMap<Vec<u64>, f64>,
    episode: Option<Episode>,
    interval: Interval,
    outcome_rewards: BTreeMap<i64, u64>,
    visits: HashMap<Vec<u64>, u64>,
    episodes: u64,
    syncs: u64,
}

impl<'a> Trainer<'a> {
    fn new(cfg: &'a TrainingConfig) -> Result<Self, TrainError> {
        cfg.validate()?;
        let d = CodeDistance::new(cfg.d).expect("validated");
        let mut rng = worker_stream(cfg.seed, 0);
        let policy = QNetwork::<f32>::new(cfg.network_config(), &mut rng)?;
        let target = policy.clone();
        let adam = AdamState::new(policy.parameter_count(), cfg.adam);
        Ok(Self {
            cfg,
            d,
            rng,
            policy,
            target,
            adam,
            replay: PrioritizedBuffer::new(cfg.replay_capacity, cfg.alpha, cfg.beta),
            target_cache: HashMap::new(),
            episode: None,
            interval: Interval::new(),
            outcome_rewards: BTreeMap::new(),
            visits: HashMap::new(),
            episodes: 0,
            syncs: 0,
        })
    }

    fn fresh_syndrome(&mut self, p: f64) -> Syndrome {
        let model = NoiseModel::Depolarizing { p };
        loop {
            let s = sample_error(self.d, &model, &mut self.rng).expect("validated rate").compute_syndrome();
            if !s.is_empty() {
                return s;
            }
        }
    }

    /// One environment step with exploration rate `epsilon`; `None` uses a
    /// uniformly random action without consulting the network.
    fn act(&mut self, epsilon: Option<f64>, p: f64, track: bool) -> Result<(), TrainError> {
        if self.episode.is_none() {
            let syndrome = self.fresh_syndrome(p);
            self.episode = Some(Episode { syndrome, steps: 0 });
        }
        let ep = self.episode.as_ref().expect("episode present");
        let obs = observation(&ep.syndrome).expect("episodes hold nonempty syndromes");
        let (i, op) = match epsilon {
            Some(eps) => {
                let qvals = q_values(&self.policy, &obs)?;
                select_action_index(&qvals, eps, &mut self.rng)
            }
            None => {
                let k = self.rng.gen_range(0..obs.len() * 3);
                (k / 3, crate::lattice::Pauli::ALL[k % 3])
            }
        };
        let persp = obs.perspectives.into_iter().nth(i).expect("index in range");
        let next = ep.syndrome.apply(persp.source_qubit, op);
        let r = reward(&ep.syndrome, &next);
        if track {
            *self.visits.entry(ep.syndrome.pack()).or_insert(0) += 1;
        }
        *self.outcome_rewards.entry(r.round() as i64).or_insert(0) += 1;
        let transition = Transition::new(persp, op, r, next.clone());
        let terminal = transition.terminal;
        self.replay.push(transition);
        let steps = ep.steps + 1;
        if terminal || steps >= self.cfg.max_steps {
            self.episode = None;
            if track {
                self.episodes += 1;
                self.interval.episodes += 1;
                self.interval.episode_steps += steps as u64;
                self.interval.cleared += terminal as u64;
            }
        } else {
            self.episode = Some(Episode { syndrome: next, steps });
        }
        Ok(())
    }

    fn cached_max_q(&mut self, s: &Syndrome) -> Result<f64, TrainError> {
        let key = s.pack();
        if let Some(&v) = self.target_cache.get(&key) {
            return Ok(v);
        }
        let v = max_q(&self.target, s)?;
        self.target_cache.insert(key, v);
        Ok(v)
    }

    fn learn(&mut self) -> Result<(), TrainError> {
        let batch = self.replay.sample(self.cfg.batch_size, &mut self.rng)?;
        let indices = batch.indices.clone();
        let weights: Vec<f32> = batch.weights.iter().map(|&w| w as f32).collect();
        let transitions: Vec<Transition> = batch.items.into_iter().cloned().collect();
        let mut targets = Vec::with_capacity(transitions.len());
        for t in &transitions {
            let y = if t.terminal { t.reward } else { t.reward + self.cfg.gamma * self.cached_max_q(&t.next_syndrome)? };
            targets.push(y as f32);
        }
        let refs: Vec<_> = transitions.iter().map(|t| &t.perspective).collect();
        let d = self.cfg.d;
        let input = Tensor::new(vec![refs.len(), 2, d, d], batch_input::<f32>(&refs))?;
        let (q, cache) = self.policy.forward(&input)?;
        let actions: Vec<usize> = transitions.iter().map(|t| t.action.index()).collect();
        let (loss, grad_q) = weighted_l1_grad(&q.data, &actions, &targets, &weights, self.cfg.loss);
        let grads = self.policy.backward(Some(&cache), &grad_q)?;
        self.adam.step(self.policy.params_mut(), &grads)?;
        let deltas: Vec<f64> =
            actions.iter().enumerate().map(|(j, &a)| targets[j] as f64 - q.data[j * 3 + a] as f64).collect();
        self.replay.update_priorities(&indices, &deltas)?;
        self.interval.loss_sum += loss;
        self.interval.updates += 1;
        Ok(())
    }

    fn meta(&self, step: u64) -> CheckpointMeta {
        CheckpointMeta {
            d: self.cfg.d,
            perspective_convention: PERSPECTIVE_CONVENTION.to_string(),
            config_hash: self.cfg.hash(),
            seed: self.cfg.seed,
            step,
            init: "uniform_glorot".into(),
            extra: serde_json::to_value(self.cfg).expect("config serializes"),
        }
    }

    fn flush_metrics(&mut self, step: u64, sink: &mut dyn TrainingSink) -> Result<(), TrainError> {
        let iv = std::mem::replace(&mut self.interval, Interval::new());
        let ratio = |a: f64, b: u64| (b > 0).then(|| a / b as f64);
        let m = TrainingMetrics {
            step,
            epoch: step / self.cfg.steps_per_epoch,
            episodes: iv.episodes,
            mean_episode_length: ratio(iv.episode_steps as f64, iv.episodes),
            mean_td_loss: ratio(iv.loss_sum, iv.updates),
            terminal_fraction: ratio(iv.cleared as f64, iv.episodes),
            epsilon: self.cfg.epsilon(step),
            curriculum_rate: self.cfg.curriculum_rate(step),
            target_syncs: self.syncs,
            replay_len: self.replay.len(),
        };
        sink.metrics(&m)
    }

    fn run(mut self, sink: &mut dyn TrainingSink) -> Result<TrainingOutcome, TrainError> {
        let cfg = self.cfg;
        sink.checkpoint(0, &self.policy, &self.adam, &self.meta(0))?;
        if cfg.total_steps > 0 {
            let p0 = cfg.curriculum_rate(0);
            for _ in 0..cfg.replay_start {
                self.act(None, p0, false)?;
            }
            self.episode = None;
        }
        for step in 1..=cfg.total_steps {
            let eps = cfg.epsilon(step - 1);
            let p = cfg.curriculum_rate(step - 1);
            self.act(Some(eps), p, true)?;
            self.learn()?;
            if step % cfg.target_sync == 0 {
                sync_target(&self.policy, &mut self.target)?;
                self.target_cache.clear();
                self.syncs += 1;
            }
            if step % cfg.metrics_interval == 0 || step == cfg.total_steps {
                self.flush_metrics(step, sink)?;
            }
            if step % cfg.steps_per_epoch == 0 || step == cfg.total_steps {
                sink.checkpoint(step, &self.policy, &self.adam, &self.meta(step))?;
            }
        }
        Ok(TrainingOutcome {
            policy: self.policy,
            adam: self.adam,
            steps: cfg.total_steps,
            target_syncs: self.syncs,
            episodes: self.episodes,
            rewards: self.outcome_rewards,
            visits: self.visits,
        })
    }
}

/// Runs the full training loop, streaming metrics and per-epoch checkpoints
/// (plus the initial and final ones) into `sink`.
pub fn train(config: &TrainingConfig, sink: &mut dyn TrainingSink) -> Result<TrainingOutcome, TrainError> {
    Trainer::new(config)?.run(sink)
}
