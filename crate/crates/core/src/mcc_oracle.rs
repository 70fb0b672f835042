//! Exact reference decoders at small scale.
//!
//! For `d = 3` the whole syndrome space (`2^18` keys, `2^16` of them valid) is
//! small enough to tabulate the minimal number of single-qubit actions needed
//! to clear each syndrome and the optimal state value under the defect-count
//! reward. For larger `d` only the single-line chain ensemble is handled, by
//! enumerating every minimal-length correction.

use std::collections::{HashSet, VecDeque};
use std::fs;
use std::io::{Read as _, Write as _};
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lattice::{
    plaquette_qubits, vertex_qubits, CodeDistance, Pauli, PauliFrame, QubitIndex, Syndrome,
};
use crate::noise::Line;

/// Bumped whenever the reward definition changes; part of the cache key.
pub const REWARD_SCHEME_VERSION: u32 = 1;
pub const TERMINAL_REWARD: f64 = 100.0;
pub const VALUE_TOLERANCE: f64 = 1e-10;

const TABLE_D: usize = 3;
const CELLS: usize = TABLE_D * TABLE_D;
const KEYS: usize = 1 << (2 * CELLS);
const UNREACHABLE: u8 = u8::MAX;
const CACHE_MAGIC: &[u8; 4] = b"TQVT";
const CACHE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("exact tables exist only for d=3, got d={0}")]
    UnsupportedDistance(usize),
    #[error("frame is not a single-line chain of length ceil(d/2): {0}")]
    UnsupportedInput(String),
    #[error("discount must lie in [0, 1), got {0}")]
    InvalidDiscount(f64),
    #[error("cache file does not match the requested table: {0}")]
    CacheMismatch(String),
    #[error("cache file corrupt: {0}")]
    CorruptCache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reward for a transition `s -> s'`: terminal bonus, else the defect drop.
pub fn reward(s: &Syndrome, next: &Syndrome) -> f64 {
    if next.is_empty() {
        TERMINAL_REWARD
    } else {
        s.defect_count() as f64 - next.defect_count() as f64
    }
}

/// Bit key of a `d = 3` syndrome: plaquettes in bits `0..9`, vertices in `9..18`.
pub fn syndrome_key(s: &Syndrome) -> usize {
    debug_assert_eq!(s.d(), TABLE_D);
    let mut key = 0usize;
    for (k, &b) in s.plaquette().iter().chain(s.vertex()).enumerate() {
        key |= (b as usize) << k;
    }
    key
}

pub fn syndrome_from_key(key: usize) -> Syndrome {
    let d = CodeDistance::new(TABLE_D).expect("3 is a valid distance");
    let plaquette = (0..CELLS).map(|k| ((key >> k) & 1) as u8).collect();
    let vertex = (0..CELLS).map(|k| ((key >> (CELLS + k)) & 1) as u8).collect();
    Syndrome::from_grids(d, plaquette, vertex).expect("grid sizes match")
}

/// Per-qubit bit masks for the `d = 3` key space.
struct ActionMasks {
    /// Defects a qubit touches (legality test).
    touch: Vec<usize>,
    /// Key toggles for X, Y, Z on each qubit.
    toggle: Vec<[usize; 3]>,
}

impl ActionMasks {
    fn new() -> Self {
        let d = TABLE_D;
        let mut touch = Vec::with_capacity(2 * CELLS);
        let mut toggle = Vec::with_capacity(2 * CELLS);
        for k in 0..2 * CELLS {
            let q = QubitIndex::from_flat(k, d);
            let px = q.plaquettes(d).iter().fold(0, |m, &(i, j)| m ^ (1 << (i * d + j)));
            let vz = q.vertices(d).iter().fold(0, |m, &(i, j)| m ^ (1 << (CELLS + i * d + j)));
            touch.push(px | vz);
            toggle.push([px, px ^ vz, vz]);
        }
        Self { touch, toggle }
    }

    /// Successor keys of all legal actions from `key`.
    fn successors(&self, key: usize) -> impl Iterator<Item = usize> + '_ {
        self.touch
            .iter()
            .zip(&self.toggle)
            .filter(move |(t, _)| key & **t != 0)
            .flat_map(move |(_, ops)| ops.iter().map(move |m| key ^ m))
    }
}

fn valid_key(key: usize) -> bool {
    let mask = (1 << CELLS) - 1;
    (key & mask).count_ones() % 2 == 0 && (key >> CELLS).count_ones() % 2 == 0
}

/// Minimal number of legal actions clearing each `d = 3` syndrome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepTable {
    steps: Vec<u8>,
}

impl StepTable {
    pub fn min_steps(&self, s: &Syndrome) -> Option<u32> {
        if s.d() != TABLE_D {
            return None;
        }
        self.by_key(syndrome_key(s))
    }

    pub fn by_key(&self, key: usize) -> Option<u32> {
        match self.steps.get(key) {
            Some(&UNREACHABLE) | None => None,
            Some(&n) => Some(n as u32),
        }
    }

    pub fn reachable(&self) -> usize {
        self.steps.iter().filter(|&&n| n != UNREACHABLE).count()
    }

    pub fn max_steps(&self) -> u32 {
        self.steps.iter().filter(|&&n| n != UNREACHABLE).max().copied().unwrap_or(0) as u32
    }
}

/// Backward breadth-first search from the empty syndrome. A predecessor
/// `s = s' ^ toggle` is accepted only if the action is legal in `s`.
pub fn build_min_steps_table(d: CodeDistance) -> Result<StepTable, OracleError> {
    if d.get() != TABLE_D {
        return Err(OracleError::UnsupportedDistance(d.get()));
    }
    let masks = ActionMasks::new();
    let mut steps = vec![UNREACHABLE; KEYS];
    steps[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(next) = queue.pop_front() {
        let n = steps[next];
        for (touch, ops) in masks.touch.iter().zip(&masks.toggle) {
            for m in ops {
                let prev = next ^ m;
                if steps[prev] == UNREACHABLE && prev & touch != 0 {
                    steps[prev] = n + 1;
                    queue.push_back(prev);
                }
            }
        }
    }
    Ok(StepTable { steps })
}

/// Optimal state values `V*` for a given discount.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    gamma: f64,
    values: Vec<f64>,
    sweeps: usize,
}

impl ValueTable {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn value(&self, s: &Syndrome) -> Option<f64> {
        if s.d() != TABLE_D {
            return None;
        }
        self.by_key(syndrome_key(s))
    }

    pub fn by_key(&self, key: usize) -> Option<f64> {
        self.values.get(key).copied().filter(|v| v.is_finite())
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }
}

fn bellman(masks: &ActionMasks, values: &[f64], key: usize, gamma: f64) -> f64 {
    let e = key.count_ones() as f64;
    masks
        .successors(key)
        .map(|next| {
            if next == 0 {
                TERMINAL_REWARD
            } else {
                e - next.count_ones() as f64 + gamma * values[next]
            }
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// In-place value iteration, sweeping states in order of increasing distance
/// to the terminal state, until the sup-norm change drops below `1e-10`.
pub fn build_value_table(steps: &StepTable, gamma: f64) -> Result<ValueTable, OracleError> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(OracleError::InvalidDiscount(gamma));
    }
    let masks = ActionMasks::new();
    let mut order: Vec<usize> = (1..KEYS).filter(|&k| steps.by_key(k).is_some()).collect();
    order.sort_by_key(|&k| steps.steps[k]);
    let mut values = vec![f64::NAN; KEYS];
    values[0] = 0.0;
    for &k in &order {
        values[k] = 0.0;
    }
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut delta: f64 = 0.0;
        for &k in &order {
            let v = bellman(&masks, &values, k, gamma);
            delta = delta.max((v - values[k]).abs());
            values[k] = v;
        }
        if delta < VALUE_TOLERANCE {
            break;
        }
    }
    Ok(ValueTable { gamma, values, sweeps })
}

/// Both `d = 3` tables plus the key under which they are cached.
#[derive(Debug, Clone, PartialEq)]
pub struct SyndromeTable {
    pub steps: StepTable,
    pub values: ValueTable,
}

impl SyndromeTable {
    pub fn build(d: CodeDistance, gamma: f64) -> Result<Self, OracleError> {
        let steps = build_min_steps_table(d)?;
        let values = build_value_table(&steps, gamma)?;
        Ok(Self { steps, values })
    }

    /// Loads from `path` if a matching cache exists, else builds and writes it.
    pub fn cached(path: &Path, d: CodeDistance, gamma: f64) -> Result<Self, OracleError> {
        match Self::load(path, d, gamma) {
            Ok(t) => Ok(t),
            Err(OracleError::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => {
                let t = Self::build(d, gamma)?;
                t.save(path)?;
                Ok(t)
            }
            Err(e) => Err(e),
        }
    }

    pub fn min_steps(&self, s: &Syndrome) -> Option<u32> {
        self.steps.min_steps(s)
    }

    pub fn value(&self, s: &Syndrome) -> Option<f64> {
        self.values.value(s)
    }

    /// Largest one-step lookahead `r + γV(s')` from `s` and every action
    /// attaining it. Empty for the terminal state.
    pub fn optimal_actions(&self, s: &Syndrome) -> Vec<(QubitIndex, Pauli)> {
        let key = syndrome_key(s);
        if key == 0 {
            return Vec::new();
        }
        let masks = ActionMasks::new();
        let best = bellman(&masks, &self.values.values, key, self.values.gamma);
        let mut out = Vec::new();
        for (k, (touch, ops)) in masks.touch.iter().zip(&masks.toggle).enumerate() {
            if key & touch == 0 {
                continue;
            }
            for (o, m) in ops.iter().enumerate() {
                let next = key ^ m;
                let q = if next == 0 {
                    TERMINAL_REWARD
                } else {
                    key.count_ones() as f64 - next.count_ones() as f64
                        + self.values.gamma * self.values.values[next]
                };
                if (q - best).abs() < 1e-9 {
                    out.push((QubitIndex::from_flat(k, TABLE_D), Pauli::ALL[o]));
                }
            }
        }
        out
    }

    fn payload(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(KEYS * 9 + 32);
        buf.extend_from_slice(CACHE_MAGIC);
        buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        buf.extend_from_slice(&(TABLE_D as u32).to_le_bytes());
        buf.extend_from_slice(&self.values.gamma.to_le_bytes());
        buf.extend_from_slice(&REWARD_SCHEME_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.values.sweeps as u32).to_le_bytes());
        buf.extend_from_slice(&self.steps.steps);
        for v in &self.values.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf
    }

    pub fn save(&self, path: &Path) -> Result<(), OracleError> {
        let payload = self.payload();
        let digest = Sha256::digest(&payload);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut f = fs::File::create(path)?;
        f.write_all(&payload)?;
        f.write_all(&digest)?;
        Ok(())
    }

    pub fn load(path: &Path, d: CodeDistance, gamma: f64) -> Result<Self, OracleError> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        let header = 4 + 4 + 4 + 8 + 4 + 4;
        let expected = header + KEYS + 8 * KEYS + 32;
        if bytes.len() != expected {
            return Err(OracleError::CorruptCache(format!("length {} != {expected}", bytes.len())));
        }
        let (payload, digest) = bytes.split_at(expected - 32);
        if Sha256::digest(payload).as_slice() != digest {
            return Err(OracleError::CorruptCache("checksum mismatch".into()));
        }
        if &payload[..4] != CACHE_MAGIC {
            return Err(OracleError::CorruptCache("bad magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(payload[o..o + 4].try_into().unwrap());
        let version = u32_at(4);
        let cached_d = u32_at(8) as usize;
        let cached_gamma = f64::from_le_bytes(payload[12..20].try_into().unwrap());
        let scheme = u32_at(20);
        let sweeps = u32_at(24) as usize;
        if version != CACHE_VERSION || scheme != REWARD_SCHEME_VERSION {
            return Err(OracleError::CacheMismatch(format!("format {version}, reward scheme {scheme}")));
        }
        if cached_d != d.get() || cached_gamma.to_bits() != gamma.to_bits() {
            return Err(OracleError::CacheMismatch(format!("d={cached_d}, gamma={cached_gamma}")));
        }
        let steps = payload[header..header + KEYS].to_vec();
        let values = payload[header + KEYS..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { steps: StepTable { steps }, values: ValueTable { gamma, values, sweeps } })
    }
}

/// All valid key values (both parities even).
pub fn valid_keys() -> impl Iterator<Item = usize> {
    (0..KEYS).filter(|&k| valid_key(k))
}

/// Every edge set of at most `budget` edges whose boundary is `defects`.
/// `species` selects plaquette (X) or vertex (Z) geometry.
fn chains_with_boundary(
    d: usize,
    defects: &[(usize, usize)],
    budget: usize,
    plaquette: bool,
) -> Vec<Vec<usize>> {
    let mut grid = vec![0u8; d * d];
    for &(i, j) in defects {
        grid[i * d + j] ^= 1;
    }
    let mut found = HashSet::new();
    let mut chosen = Vec::new();
    chain_search(d, &mut grid, budget, plaquette, &mut chosen, &mut found);
    let mut out: Vec<Vec<usize>> = found.into_iter().collect();
    out.sort();
    out
}

fn chain_search(
    d: usize,
    grid: &mut [u8],
    budget: usize,
    plaquette: bool,
    chosen: &mut Vec<usize>,
    found: &mut HashSet<Vec<usize>>,
) {
    let open = grid.iter().filter(|&&b| b == 1).count();
    if chosen.len() + open.div_ceil(2) > budget {
        return;
    }
    let Some(cell) = grid.iter().position(|&b| b == 1) else {
        let mut set = chosen.clone();
        set.sort_unstable();
        found.insert(set);
        return;
    };
    let (i, j) = (cell / d, cell % d);
    let edges = if plaquette { plaquette_qubits(i, j, d) } else { vertex_qubits(i, j, d) };
    for q in edges {
        let k = q.flat(d);
        if chosen.contains(&k) {
            continue;
        }
        let ends = if plaquette { q.plaquettes(d) } else { q.vertices(d) };
        for (a, b) in ends {
            grid[a * d + b] ^= 1;
        }
        chosen.push(k);
        chain_search(d, grid, budget, plaquette, chosen, found);
        chosen.pop();
        for (a, b) in ends {
            grid[a * d + b] ^= 1;
        }
    }
}

/// The line a restricted chain lives on, if the frame has that form.
pub fn restricted_line(frame: &PauliFrame) -> Result<Line, OracleError> {
    let d = frame.d();
    let k = frame.distance().half_ceil();
    let support = frame.support();
    if support.len() != k {
        return Err(OracleError::UnsupportedInput(format!("weight {} != {k}", support.len())));
    }
    Line::all(d)
        .find(|l| support.iter().all(|(q, _)| l.contains(*q)))
        .ok_or_else(|| OracleError::UnsupportedInput("errors not on one row or column".into()))
}

/// Outcome summary of minimal-correction decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct MccOutcome {
    /// Length of the shortest correction sequence.
    pub min_length: usize,
    /// Number of distinct minimal corrections.
    pub minimal_corrections: usize,
    /// How many of them leave a logical operator behind.
    pub failing: usize,
}

impl MccOutcome {
    pub fn failure_probability(&self) -> f64 {
        self.failing as f64 / self.minimal_corrections as f64
    }
}

/// Enumerates every minimal-length correction of `frame`'s syndrome whose
/// weight does not exceed the frame's own weight and classifies each one.
pub fn mcc_outcome(frame: &PauliFrame) -> MccOutcome {
    let d = frame.d();
    let s = frame.compute_syndrome();
    let budget = frame.weight();
    let xs = chains_with_boundary(d, &s.plaquette_positions(), budget, true);
    let zs = chains_with_boundary(d, &s.vertex_positions(), budget, false);
    let mut best = usize::MAX;
    let mut minimal = Vec::new();
    for cx in &xs {
        for cz in &zs {
            let overlap = cx.iter().filter(|k| cz.binary_search(k).is_ok()).count();
            let len = cx.len() + cz.len() - overlap;
            if len < best {
                best = len;
                minimal.clear();
            }
            if len == best {
                minimal.push((cx, cz));
            }
        }
    }
    let failing = minimal
        .iter()
        .filter(|(cx, cz)| {
            let mut residual = frame.clone();
            for &k in cx.iter() {
                residual.apply_in_place(QubitIndex::from_flat(k, d), Pauli::X);
            }
            for &k in cz.iter() {
                residual.apply_in_place(QubitIndex::from_flat(k, d), Pauli::Z);
            }
            residual
                .homology_class()
                .expect("minimal correction clears the syndrome")
                .is_logical_failure()
        })
        .count();
    MccOutcome { min_length: best, minimal_corrections: minimal.len(), failing }
}

/// Failure probability of the minimal-correction-chain decoder with ties
/// settled by a fair draw among minimal corrections.
pub fn mcc_decode_restricted(frame: &PauliFrame) -> Result<f64, OracleError> {
    restricted_line(frame)?;
    Ok(mcc_outcome(frame).failure_probability())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn cd(n: usize) -> CodeDistance {
        CodeDistance::new(n).unwrap()
    }

    fn table() -> &'static SyndromeTable {
        static T: OnceLock<SyndromeTable> = OnceLock::new();
        T.get_or_init(|| SyndromeTable::build(cd(3), 0.95).unwrap())
    }

    fn syndrome_of(ops: &[(QubitIndex, Pauli)]) -> Syndrome {
        let mut f = PauliFrame::identity(cd(3));
        for &(q, p) in ops {
            f.apply_in_place(q, p);
        }
        f.compute_syndrome()
    }

    #[test]
    fn keys_round_trip() {
        for key in valid_keys().step_by(97) {
            assert_eq!(syndrome_key(&syndrome_from_key(key)), key);
        }
        assert_eq!(valid_keys().count(), 1 << 16);
    }

    #[test]
    fn rejects_larger_distances() {
        assert!(matches!(build_min_steps_table(cd(5)), Err(OracleError::UnsupportedDistance(5))));
    }

    #[test]
    fn every_valid_syndrome_is_reachable() {
        let t = table();
        assert_eq!(t.steps.reachable(), 1 << 16);
        assert!(valid_keys().all(|k| t.steps.by_key(k).is_some()));
    }

    #[test]
    fn step_examples() {
        let t = table();
        assert_eq!(t.min_steps(&Syndrome::empty(cd(3))), Some(0));
        assert_eq!(t.min_steps(&syndrome_of(&[(QubitIndex::h(1, 1), Pauli::X)])), Some(1));
        let pair = syndrome_of(&[(QubitIndex::h(0, 0), Pauli::X), (QubitIndex::h(0, 1), Pauli::X)]);
        assert_eq!(t.min_steps(&pair), Some(2));
        assert_eq!(t.min_steps(&syndrome_of(&[(QubitIndex::v(2, 0), Pauli::Y)])), Some(1));
    }

    #[test]
    fn steps_descend_by_one() {
        let t = table();
        let masks = ActionMasks::new();
        for key in valid_keys().filter(|&k| k != 0) {
            let n = t.steps.by_key(key).unwrap();
            let succ: Vec<u32> = masks.successors(key).map(|s| t.steps.by_key(s).unwrap()).collect();
            assert_eq!(*succ.iter().min().unwrap(), n - 1);
            assert!(succ.iter().all(|&m| m + 1 >= n));
        }
    }

    #[test]
    fn separated_pairs_add() {
        let t = table();
        // Two single-X pairs in disjoint rows of plaquettes.
        let a = [(QubitIndex::v(0, 1), Pauli::X)];
        let b = [(QubitIndex::v(1, 1), Pauli::Z)];
        let both = syndrome_of(&[a[0], b[0]]);
        let sa = t.min_steps(&syndrome_of(&a)).unwrap();
        let sb = t.min_steps(&syndrome_of(&b)).unwrap();
        assert_eq!(t.min_steps(&both), Some(sa + sb));
    }

    #[test]
    fn value_examples() {
        let t = table();
        let one = syndrome_of(&[(QubitIndex::h(1, 1), Pauli::X)]);
        assert!((t.value(&one).unwrap() - 100.0).abs() < 1e-9);
        let two = syndrome_of(&[(QubitIndex::h(0, 0), Pauli::X), (QubitIndex::h(0, 1), Pauli::X)]);
        assert!((t.value(&two).unwrap() - 97.0).abs() < 1e-9);
        let row: Vec<_> = (0..3).map(|j| (QubitIndex::h(1, j), Pauli::X)).collect();
        let three = syndrome_of(&row);
        assert_eq!(three.defect_count(), 6);
        assert_eq!(t.min_steps(&three), Some(3));
        assert!((t.value(&three).unwrap() - 94.15).abs() < 1e-9);
    }

    #[test]
    fn bellman_consistency() {
        let t = table();
        let masks = ActionMasks::new();
        for key in valid_keys().filter(|&k| k != 0) {
            let v = t.values.by_key(key).unwrap();
            let backup = bellman(&masks, &t.values.values, key, 0.95);
            assert!((v - backup).abs() < 1e-8, "key {key}: {v} vs {backup}");
        }
    }

    #[test]
    fn optimal_actions_for_single_x() {
        let t = table();
        let s = syndrome_of(&[(QubitIndex::v(2, 1), Pauli::X)]);
        assert_eq!(t.optimal_actions(&s), vec![(QubitIndex::v(2, 1), Pauli::X)]);
    }

    #[test]
    fn cache_round_trip_and_key_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d3.bin");
        table().save(&path).unwrap();
        let loaded = SyndromeTable::load(&path, cd(3), 0.95).unwrap();
        assert_eq!(loaded.steps, table().steps);
        assert!(loaded.values.values.iter().zip(&table().values.values).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(matches!(SyndromeTable::load(&path, cd(3), 0.9), Err(OracleError::CacheMismatch(_))));
        let mut bytes = fs::read(&path).unwrap();
        bytes[100] ^= 1;
        fs::write(&path, bytes).unwrap();
        assert!(matches!(SyndromeTable::load(&path, cd(3), 0.95), Err(OracleError::CorruptCache(_))));
    }

    fn chain(d: usize, line: Line, ops: &[(usize, Pauli)]) -> PauliFrame {
        let mut f = PauliFrame::identity(cd(d));
        for &(k, p) in ops {
            f.apply_in_place(line.qubit(k), p);
        }
        f
    }

    #[test]
    fn restricted_examples() {
        for d in [5, 7] {
            let k = (d + 1) / 2;
            for line in Line::x_fallible(d).take(2) {
                let xs: Vec<_> = (0..k).map(|i| (i, Pauli::X)).collect();
                assert_eq!(mcc_decode_restricted(&chain(d, line, &xs)).unwrap(), 1.0);
                let mut zx = xs.clone();
                zx[0].1 = Pauli::Z;
                assert_eq!(mcc_decode_restricted(&chain(d, line, &zx)).unwrap(), 0.5);
                let mut yx = xs.clone();
                yx[1].1 = Pauli::Y;
                assert_eq!(mcc_decode_restricted(&chain(d, line, &yx)).unwrap(), 0.5);
                let mut yy = xs.clone();
                yy[0].1 = Pauli::Y;
                yy[2].1 = Pauli::Y;
                assert_eq!(mcc_decode_restricted(&chain(d, line, &yy)).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn spread_out_all_x_chain_fails() {
        let line = Line::HColumn(2);
        let f = chain(7, line, &[(0, Pauli::X), (2, Pauli::X), (4, Pauli::X), (5, Pauli::X)]);
        let out = mcc_outcome(&f);
        assert_eq!(out.min_length, 3);
        assert_eq!(mcc_decode_restricted(&f).unwrap(), 1.0);
    }

    #[test]
    fn unrestricted_input_rejected() {
        let mut f = PauliFrame::identity(cd(5));
        f.apply_in_place(QubitIndex::h(0, 0), Pauli::X);
        assert!(matches!(mcc_decode_restricted(&f), Err(OracleError::UnsupportedInput(_))));
        f.apply_in_place(QubitIndex::h(1, 1), Pauli::X);
        f.apply_in_place(QubitIndex::h(2, 2), Pauli::X);
        assert!(matches!(mcc_decode_restricted(&f), Err(OracleError::UnsupportedInput(_))));
    }

    #[test]
    fn minimal_length_matches_d3_step_table() {
        let t = table();
        let mut rng = crate::noise::worker_stream(3, 0);
        for _ in 0..300 {
            let f = crate::noise::sample_row_column_chain(cd(3), 2, &Pauli::ALL, &mut rng).unwrap();
            let out = mcc_outcome(&f);
            assert_eq!(Some(out.min_length as u32), t.min_steps(&f.compute_syndrome()));
        }
    }
}
