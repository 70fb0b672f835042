//! Acceptance suite. Every test prints one `ACCEPTANCE` line with its verdict
//! straight to stdout, so the lines appear even when output capture is on.

use std::collections::HashMap;
use std::io::Write;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::Rng;
use toric_core::agent::{decode_episode, Outcome};
use toric_core::analytic::{f_mcc, f_mwpm, p_l_bitflip};
use toric_core::evalharness::{
    asymptotic_fail_fraction, evaluate, paired_compare, write_csv, AsymptoticDecoder, AsymptoticSampling, Decoder,
};
use toric_core::lattice::{CodeDistance, Syndrome};
use toric_core::matching::{match_exact, DefectSet, DefectSpecies};
use toric_core::mcc_oracle::{syndrome_from_key, valid_keys, SyndromeTable};
use toric_core::neural::{ConvSpec, Padding, QNetwork, QNetworkConfig, Tensor};
use toric_core::noise::{sample_error, worker_stream, NoiseModel};
use toric_core::trainer::{max_q, train, DirectorySink, MemorySink, TrainingConfig, TrainingOutcome};

/// Training budget for the end-to-end criteria (upper bound 2×10⁵).
const TRAIN_STEPS: u64 = 100_000;
const TRAIN_SEED: u64 = 2024;

fn report(id: &str, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("ACCEPTANCE {id:<3} {verdict} {name}: {detail}\n");
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn cd(n: usize) -> CodeDistance {
    CodeDistance::new(n).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn c1_analytic_fail_fractions() {
    // Hand-evaluated 4d(1+k)C(d,k) / (C(2d²,k)·k³), the quoted exact values,
    // and the published three-digit values.
    let oracle = [
        (5, 4.0 * 5.0 * 4.0 * 10.0 / (19_600.0 * 27.0), 1.5117e-3, 1.51e-3),
        (7, 4.0 * 7.0 * 5.0 * 35.0 / (3_612_280.0 * 64.0), 2.1195e-5, 2.12e-5),
        (9, 4.0 * 9.0 * 6.0 * 126.0 / (873_642_672.0 * 125.0), 2.492e-7, 2.50e-7),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (n, exact, quoted, published) in oracle {
        let f = f_mcc(cd(n));
        let ok = rel(f, exact) < 1e-12 && rel(f, quoted) < 1e-4 && rel(f, published) < 5e-3;
        pass &= ok;
        detail.push(format!("d={n} f={f:.4e} (published {published:.2e}, rel.diff {:.1e})", rel(f, published)));
    }
    report("1", "closed-form f_mcc", pass, &detail.join(", "));
    assert!(pass);
}

#[test]
fn c2_exhaustive_restricted_mcc() {
    let mut pass = true;
    let mut detail = Vec::new();
    for n in [5, 7] {
        let e = asymptotic_fail_fraction(&AsymptoticDecoder::MccRestricted, cd(n), AsymptoticSampling::Exhaustive, 4)
            .unwrap();
        let err = rel(e.f, f_mcc(cd(n)));
        pass &= err < 0.01;
        detail.push(format!("d={n} enumerated {} chains f={:.4e} rel.err={err:.1e}", e.chains, e.f));
    }
    report("2", "exhaustive restricted MCC", pass, &detail.join(", "));
    assert!(pass);
}

#[test]
fn c3_mwpm_asymptotics() {
    let d = cd(5);
    let r = evaluate(&Decoder::Mwpm, d, &NoiseModel::BitFlip { p: 0.01 }, 1_000_000, 31, 8).unwrap();
    let fail = r.fail_rate();
    let (lo, hi) = r.fail_interval();
    let target = p_l_bitflip(d, 0.01);
    let half = (hi - lo) / 2.0;
    let mc_ok = (fail - target).abs() <= 3.0 * half;
    let est = asymptotic_fail_fraction(
        &AsymptoticDecoder::Standard(Decoder::Mwpm),
        d,
        AsymptoticSampling::Exhaustive,
        4,
    )
    .unwrap();
    let restricted_ok = rel(est.f, f_mwpm(d)) < 0.02;
    let pass = mc_ok && restricted_ok;
    report(
        "3",
        "MWPM asymptotics",
        pass,
        &format!(
            "bit-flip p=0.01 fail={fail:.3e} CI=[{lo:.3e},{hi:.3e}] vs {target:.3e}; restricted f={:.4e} vs f_mwpm={:.4e}",
            est.f,
            f_mwpm(d)
        ),
    );
    assert!(pass);
}

fn torus(a: (usize, usize), b: (usize, usize), d: usize) -> u64 {
    let dy = a.0.abs_diff(b.0);
    let dx = a.1.abs_diff(b.1);
    (dy.min(d - dy) + dx.min(d - dx)) as u64
}

/// Minimum over all (2n−1)!! perfect pairings.
fn brute_min(points: &[(usize, usize)], d: usize) -> u64 {
    if points.is_empty() {
        return 0;
    }
    let (first, rest) = (points[0], &points[1..]);
    (0..rest.len())
        .map(|i| {
            let mut others = rest.to_vec();
            let partner = others.remove(i);
            torus(first, partner, d) + brute_min(&others, d)
        })
        .min()
        .unwrap()
}

#[test]
fn c4_matching_exactness() {
    let mut rng = worker_stream(44, 0);
    let mut mismatches = 0;
    let mut cases = 0;
    for t in 0..1_000 {
        let d = if t % 2 == 0 { 5 } else { 7 };
        let n = 2 * rng.gen_range(1..=5);
        let mut cells: Vec<(usize, usize)> = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).collect();
        cells.shuffle(&mut rng);
        cells.truncate(n);
        let set = DefectSet::new(DefectSpecies::Plaquette, cells.clone());
        let got = match_exact(&set, d).unwrap().total_weight;
        cases += 1;
        if got != brute_min(&cells, d) {
            mismatches += 1;
        }
    }
    let pass = mismatches == 0;
    report("4", "matching exactness", pass, &format!("{mismatches} discrepancies in {cases} random sets"));
    assert!(pass);
}

fn finite_difference_error(cfg: QNetworkConfig, seed: u64) -> f64 {
    let mut rng = worker_stream(seed, 9);
    let mut net = QNetwork::<f64>::new(cfg, &mut rng).unwrap();
    for p in net.params_mut() {
        *p += rng.gen_range(-0.05..0.05);
    }
    let batch = 3;
    let input: Vec<f64> = (0..batch * net.input_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let upstream: Vec<f64> = (0..batch * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let objective = |net: &QNetwork<f64>| -> f64 {
        net.predict(&input, batch).unwrap().iter().zip(&upstream).map(|(q, g)| q * g).sum()
    };
    let shape = vec![batch, 2, net.d(), net.d()];
    let (_, cache) = net.forward(&Tensor::new(shape, input.clone()).unwrap()).unwrap();
    let grad = net.backward(Some(&cache), &upstream).unwrap();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for k in 0..net.parameter_count() {
        let orig = net.params()[k];
        net.params_mut()[k] = orig + h;
        let up = objective(&net);
        net.params_mut()[k] = orig - h;
        let down = objective(&net);
        net.params_mut()[k] = orig;
        let numeric = (up - down) / (2.0 * h);
        worst = worst.max((numeric - grad[k]).abs() / numeric.abs().max(grad[k].abs()).max(1e-4));
    }
    worst
}

fn roll(x: &[f32], channels: usize, d: usize, dy: usize, dx: usize) -> Vec<f32> {
    let mut out = vec![0.0; x.len()];
    for c in 0..channels {
        for y in 0..d {
            for z in 0..d {
                out[c * d * d + ((y + dy) % d) * d + (z + dx) % d] = x[c * d * d + y * d + z];
            }
        }
    }
    out
}

#[test]
fn c5_neural_correctness() {
    let configs = [
        QNetworkConfig { d: 3, convs: vec![ConvSpec::new(4, Padding::Periodic), ConvSpec::new(3, Padding::Zero)] },
        QNetworkConfig { d: 5, convs: vec![ConvSpec::new(3, Padding::Periodic), ConvSpec::new(4, Padding::Valid)] },
        QNetworkConfig { d: 3, convs: vec![] },
    ];
    let worst = configs.into_iter().enumerate().map(|(i, c)| finite_difference_error(c, i as u64)).fold(0.0, f64::max);
    let grad_ok = worst < 1e-4;

    let d = 5;
    let periodic = QNetworkConfig { d, convs: vec![ConvSpec::new(6, Padding::Periodic); 3] };
    let mut rng = worker_stream(55, 0);
    let net = QNetwork::<f32>::new(periodic, &mut rng).unwrap();
    let input: Vec<f32> = (0..2 * d * d).map(|_| rng.gen_range(0..2) as f32).collect();
    let maps = |x: Vec<f32>| net.feature_maps(&Tensor::new(vec![1, 2, d, d], x).unwrap()).unwrap();
    let base = maps(input.clone());
    let mut equivariant = true;
    for (dy, dx) in [(1, 0), (0, 3), (2, 4)] {
        let shifted = maps(roll(&input, 2, d, dy, dx));
        for (a, b) in base.iter().zip(&shifted) {
            let rolled = roll(a, 6, d, dy, dx);
            equivariant &= rolled.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits());
        }
    }

    // (in·9 + 1)·out per convolution, then a 3-way dense head.
    let formula = |cfg: &QNetworkConfig| -> usize {
        let mut in_c = 2;
        let mut side = cfg.d;
        let mut total = 0;
        for c in &cfg.convs {
            total += (in_c * 9 + 1) * c.out_channels;
            in_c = c.out_channels;
            if c.padding == Padding::Valid {
                side -= 2;
            }
        }
        total + 3 * in_c * side * side + 3
    };
    let d5 = QNetworkConfig::table_d5();
    let built = QNetwork::<f32>::zeros(d5.clone()).unwrap().parameter_count();
    let count_ok = formula(&d5) == 899_320 && built == 899_320;

    let pass = grad_ok && equivariant && count_ok;
    report(
        "5",
        "neural correctness",
        pass,
        &format!(
            "max rel. gradient error {worst:.2e}; periodic equivariance bit-exact: {equivariant}; d=5 parameters {built} (formula {})",
            formula(&d5)
        ),
    );
    assert!(pass);
}

struct Trained {
    outcome: TrainingOutcome,
    table: SyndromeTable,
    seconds: f64,
}

fn trained() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = TrainingConfig { d: 3, total_steps: TRAIN_STEPS, seed: TRAIN_SEED, ..TrainingConfig::default() };
        let start = std::time::Instant::now();
        let outcome = train(&cfg, &mut MemorySink::default()).unwrap();
        let seconds = start.elapsed().as_secs_f64();
        Trained { outcome, table: SyndromeTable::build(cd(3), 0.95).unwrap(), seconds }
    })
}

#[test]
fn c6_end_to_end_learning() {
    let t = trained();
    let d = cd(3);
    let decoder = Decoder::dqn(t.outcome.policy.clone());
    let r = evaluate(&decoder, d, &NoiseModel::Depolarizing { p: 0.1 }, 10_000, 61, 8).unwrap();
    let cleared = 1.0 - r.fail_cap as f64 / r.n as f64;
    let success_ok = r.rate >= 0.95;

    let mut rng = worker_stream(62, 0);
    let model = NoiseModel::Depolarizing { p: 0.1 };
    let (mut minimal, mut total) = (0, 0);
    while total < 1_000 {
        let s = sample_error(d, &model, &mut rng).unwrap().compute_syndrome();
        if s.is_empty() {
            continue;
        }
        total += 1;
        let (_, trace) = decode_episode(&t.outcome.policy, &s, 75).unwrap();
        if trace.outcome == Outcome::Cleared && trace.len() as u32 == t.table.min_steps(&s).unwrap() {
            minimal += 1;
        }
    }
    let minimal_frac = minimal as f64 / total as f64;
    let minimal_ok = minimal_frac >= 0.90;
    report(
        "6a",
        "d=3 success at p=0.1",
        success_ok,
        &format!(
            "success {:.4} [{:.4},{:.4}] over {} samples (threshold 0.95); syndrome cleared in {cleared:.4}; {} steps in {:.0}s",
            r.rate, r.ci_low, r.ci_high, r.n, t.outcome.steps, t.seconds
        ),
    );
    report("6b", "d=3 minimal-step decoding", minimal_ok, &format!("{minimal}/{total} = {minimal_frac:.3} (threshold 0.90)"));
    assert!(minimal_ok, "minimal-step fraction {minimal_frac}");
    assert!(success_ok, "logical success {} below 0.95", r.rate);
}

#[test]
fn c7_dqn_versus_mwpm() {
    let t = trained();
    let r = paired_compare(
        &Decoder::dqn(t.outcome.policy.clone()),
        &Decoder::Mwpm,
        cd(3),
        &NoiseModel::Depolarizing { p: 0.15 },
        10_000,
        71,
        8,
    )
    .unwrap();
    let dqn = (r.both + r.only_a) as f64 / r.n as f64;
    let mwpm = (r.both + r.only_b) as f64 / r.n as f64;
    let pass = dqn >= mwpm - 0.01;
    report(
        "7",
        "DQN vs MWPM (p=0.15)",
        pass,
        &format!(
            "d=3 DQN {dqn:.4} vs MWPM {mwpm:.4}; only-DQN {} only-MWPM {} (one-sided sign test p={:.2e}); d=5 not trained at this budget, soft part not evaluated",
            r.only_a,
            r.only_b,
            r.sign_test_p_a_better()
        ),
    );
    assert!(pass);
}

fn mid_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            ranks[k] = (i + j) as f64 / 2.0 + 1.0;
        }
        i = j + 1;
    }
    ranks
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (mid_ranks(a), mid_ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn c8_value_function_diagnostic() {
    let t = trained();
    let mut visits: Vec<(&Vec<u64>, &u64)> = t.outcome.visits.iter().collect();
    visits.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
    let top: Vec<Syndrome> = visits.iter().take(50).map(|(k, _)| syndrome_from_key(k[0] as usize)).collect();
    let net_v: Vec<f64> = top.iter().map(|s| max_q(&t.outcome.policy, s).unwrap()).collect();
    let exact_v: Vec<f64> = top.iter().map(|s| t.table.value(s).unwrap()).collect();
    let rho = spearman(&net_v, &exact_v);
    let distinct: std::collections::BTreeSet<u64> = exact_v.iter().map(|v| v.to_bits()).collect();

    let mut worst: f64 = 0.0;
    let mut adjacent = 0;
    for key in valid_keys() {
        let s = syndrome_from_key(key);
        if t.table.min_steps(&s) == Some(1) {
            adjacent += 1;
            worst = worst.max((max_q(&t.outcome.policy, &s).unwrap() - 100.0).abs());
        }
    }
    let mean_abs: f64 = net_v.iter().zip(&exact_v).map(|(a, b)| (a - b).abs()).sum::<f64>() / net_v.len() as f64;
    let rank_ok = rho > 0.9;
    let adjacent_ok = worst <= 10.0;
    report(
        "8",
        "value-function diagnostic",
        rank_ok && adjacent_ok,
        &format!(
            "Spearman {rho:.3} over 50 most-visited syndromes ({} distinct exact values, mean |V-V*| {mean_abs:.2}); \
             {adjacent} one-step syndromes, max |V-100| {worst:.2}",
            distinct.len()
        ),
    );
    assert!(adjacent_ok, "one-step value deviation {worst}");
    assert!(rank_ok, "rank correlation {rho}");
}

#[test]
fn c9_reproducibility() {
    let cfg = TrainingConfig { total_steps: 3_000, steps_per_epoch: 1_000, seed: 99, ..TrainingConfig::default() };
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let mut sink = DirectorySink::create(dir.path()).unwrap();
        train(&cfg, &mut sink).unwrap();
        let metrics = std::fs::read(dir.path().join("metrics.jsonl")).unwrap();
        let ckpt = std::fs::read(sink.checkpoints().last().unwrap()).unwrap();
        (metrics, ckpt)
    };
    let (m1, c1) = run();
    let (m2, c2) = run();
    let train_ok = m1 == m2 && c1 == c2 && !m1.is_empty();

    let csv = |seed: u64| {
        let mut rng = worker_stream(7, 0);
        let net = QNetwork::<f32>::new(QNetworkConfig::desk(3), &mut rng).unwrap();
        let mut buf = Vec::new();
        let rows = [
            evaluate(&Decoder::Mwpm, cd(5), &NoiseModel::Depolarizing { p: 0.12 }, 20_000, seed, 4).unwrap(),
            evaluate(&Decoder::dqn(net), cd(3), &NoiseModel::Depolarizing { p: 0.1 }, 2_000, seed, 4).unwrap(),
        ];
        write_csv(&mut buf, &rows).unwrap();
        buf
    };
    let eval_ok = csv(5) == csv(5) && csv(5) != csv(6);
    let pass = train_ok && eval_ok;
    report(
        "9",
        "reproducibility",
        pass,
        &format!("training metrics and checkpoint bit-identical: {train_ok}; evaluation CSV bit-identical: {eval_ok}"),
    );
    assert!(pass);
}

#[test]
fn visit_counts_cover_every_training_step() {
    // Packed d=3 syndromes fit in one word.
    let t = trained();
    let keys: HashMap<usize, u64> = t.outcome.visits.iter().map(|(k, &v)| (k[0] as usize, v)).collect();
    assert!(keys.keys().all(|&k| !syndrome_from_key(k).is_empty()));
    assert_eq!(keys.values().sum::<u64>(), TRAIN_STEPS);
}
