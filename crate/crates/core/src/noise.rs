//! Physical error sampling: depolarizing, bit-flip and biased channels, plus the
//! single-row/column chain ensemble used for low-error-rate estimates.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{CodeDistance, Pauli, PauliFrame, QubitIndex};

/// The random stream type used everywhere in the crate.
pub type RngStream = ChaCha8Rng;

/// Stream for worker `worker` of a run seeded with `seed`. Distinct workers
/// read disjoint ChaCha streams of the same key.
pub fn worker_stream(seed: u64, worker: u64) -> RngStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(worker);
    rng
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("invalid probability {name}={value}")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("chain length {k} exceeds line length {d}")]
    InvalidChainLength { k: usize, d: usize },
    #[error("no Pauli types allowed for chain sampling")]
    NoTypesAllowed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseModel {
    Depolarizing { p: f64 },
    #[serde(rename = "bitflip")]
    BitFlip { p: f64 },
    Biased { p: f64, p_rel: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), NoiseError> {
        let p = self.p();
        if !(0.0..1.0).contains(&p) {
            return Err(NoiseError::InvalidProbability { name: "p", value: p });
        }
        if let NoiseModel::Biased { p_rel, .. } = *self {
            if !(0.0..=1.0).contains(&p_rel) {
                return Err(NoiseError::InvalidProbability { name: "p_rel", value: p_rel });
            }
        }
        Ok(())
    }

    pub fn p(&self) -> f64 {
        match *self {
            NoiseModel::Depolarizing { p } | NoiseModel::BitFlip { p } | NoiseModel::Biased { p, .. } => p,
        }
    }

    pub fn p_rel(&self) -> Option<f64> {
        match *self {
            NoiseModel::Biased { p_rel, .. } => Some(p_rel),
            _ => None,
        }
    }

    pub fn with_p(&self, p: f64) -> Self {
        match *self {
            NoiseModel::Depolarizing { .. } => NoiseModel::Depolarizing { p },
            NoiseModel::BitFlip { .. } => NoiseModel::BitFlip { p },
            NoiseModel::Biased { p_rel, .. } => NoiseModel::Biased { p, p_rel },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NoiseModel::Depolarizing { .. } => "depolarizing",
            NoiseModel::BitFlip { .. } => "bitflip",
            NoiseModel::Biased { .. } => "biased",
        }
    }

    /// Per-qubit `(p_x, p_y, p_z)`.
    pub fn rates(&self) -> (f64, f64, f64) {
        match *self {
            NoiseModel::Depolarizing { p } => (p / 3.0, p / 3.0, p / 3.0),
            NoiseModel::BitFlip { p } => (p, 0.0, 0.0),
            NoiseModel::Biased { p, p_rel } => {
                let pxy = (1.0 - p_rel) * p / 2.0;
                (pxy, pxy, p_rel * p)
            }
        }
    }

    fn draw<R: Rng + ?Sized>(&self, (px, py, pz): (f64, f64, f64), rng: &mut R) -> Option<Pauli> {
        let u: f64 = rng.gen();
        if u < px {
            Some(Pauli::X)
        } else if u < px + py {
            Some(Pauli::Y)
        } else if u < px + py + pz {
            Some(Pauli::Z)
        } else {
            None
        }
    }
}

/// Independent per-qubit error draw over all `2d²` qubits.
pub fn sample_error<R: Rng + ?Sized>(
    d: CodeDistance,
    model: &NoiseModel,
    rng: &mut R,
) -> Result<PauliFrame, NoiseError> {
    model.validate()?;
    let rates = model.rates();
    let n = d.get();
    let mut frame = PauliFrame::identity(d);
    for k in 0..d.num_qubits() {
        if let Some(op) = model.draw(rates, rng) {
            frame.apply_in_place(QubitIndex::from_flat(k, n), op);
        }
    }
    Ok(frame)
}

/// A straight line of `d` qubits along which a length-`d` X or Z string is a
/// logical operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Line {
    /// `H[*][col]`: X string is a logical loop.
    HColumn(usize),
    /// `V[row][*]`: X string is a logical loop.
    VRow(usize),
    /// `H[row][*]`: Z string is a logical loop.
    HRow(usize),
    /// `V[*][col]`: Z string is a logical loop.
    VColumn(usize),
}

impl Line {
    pub fn qubit(self, k: usize) -> QubitIndex {
        match self {
            Line::HColumn(c) => QubitIndex::h(k, c),
            Line::VRow(r) => QubitIndex::v(r, k),
            Line::HRow(r) => QubitIndex::h(r, k),
            Line::VColumn(c) => QubitIndex::v(k, c),
        }
    }

    pub fn qubits(self, d: usize) -> Vec<QubitIndex> {
        (0..d).map(|k| self.qubit(k)).collect()
    }

    /// The Pauli component that fails along this line.
    pub fn fallible_component(self) -> Pauli {
        match self {
            Line::HColumn(_) | Line::VRow(_) => Pauli::X,
            Line::HRow(_) | Line::VColumn(_) => Pauli::Z,
        }
    }

    pub fn contains(self, q: QubitIndex) -> bool {
        use crate::lattice::Sublattice::*;
        match self {
            Line::HColumn(c) => q.sublattice == Horizontal && q.col == c,
            Line::VRow(r) => q.sublattice == Vertical && q.row == r,
            Line::HRow(r) => q.sublattice == Horizontal && q.row == r,
            Line::VColumn(c) => q.sublattice == Vertical && q.col == c,
        }
    }

    /// Lines that fail for X errors (`2d` of them).
    pub fn x_fallible(d: usize) -> impl Iterator<Item = Line> {
        (0..d).map(Line::HColumn).chain((0..d).map(Line::VRow))
    }

    /// Lines that fail for Z errors (`2d` of them).
    pub fn z_fallible(d: usize) -> impl Iterator<Item = Line> {
        (0..d).map(Line::HRow).chain((0..d).map(Line::VColumn))
    }

    /// All `4d` lines, X-fallible first.
    pub fn all(d: usize) -> impl Iterator<Item = Line> {
        Self::x_fallible(d).chain(Self::z_fallible(d))
    }

    /// Lines relevant to a set of allowed error types: X-fallible lines when X
    /// or Y may occur, Z-fallible lines when Z or Y may occur.
    pub fn relevant(d: usize, types: &[Pauli]) -> Vec<Line> {
        let xs = types.iter().any(|p| p.has_x());
        let zs = types.iter().any(|p| p.has_z());
        let mut out = Vec::new();
        if xs {
            out.extend(Self::x_fallible(d));
        }
        if zs {
            out.extend(Self::z_fallible(d));
        }
        out
    }
}

/// `k` distinct errors on one uniformly chosen relevant row or column, with
/// i.i.d. uniform types from `types`.
pub fn sample_row_column_chain<R: Rng + ?Sized>(
    d: CodeDistance,
    k: usize,
    types: &[Pauli],
    rng: &mut R,
) -> Result<PauliFrame, NoiseError> {
    let n = d.get();
    if k > n {
        return Err(NoiseError::InvalidChainLength { k, d: n });
    }
    if types.is_empty() {
        return Err(NoiseError::NoTypesAllowed);
    }
    let mut frame = PauliFrame::identity(d);
    if k == 0 {
        return Ok(frame);
    }
    let lines = Line::relevant(n, types);
    let line = lines[rng.gen_range(0..lines.len())];
    let mut positions = sample_indices(rng, n, k).into_vec();
    positions.sort_unstable();
    for pos in positions {
        let op = types[rng.gen_range(0..types.len())];
        frame.apply_in_place(line.qubit(pos), op);
    }
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(n: usize) -> CodeDistance {
        CodeDistance::new(n).unwrap()
    }

    #[test]
    fn zero_rate_gives_identity() {
        let mut rng = worker_stream(1, 0);
        for model in [
            NoiseModel::Depolarizing { p: 0.0 },
            NoiseModel::BitFlip { p: 0.0 },
            NoiseModel::Biased { p: 0.0, p_rel: 0.5 },
        ] {
            for _ in 0..100 {
                assert!(sample_error(d(5), &model, &mut rng).unwrap().is_identity());
            }
        }
    }

    #[test]
    fn invalid_probabilities_rejected() {
        let mut rng = worker_stream(1, 0);
        assert!(sample_error(d(3), &NoiseModel::Depolarizing { p: 1.0 }, &mut rng).is_err());
        assert!(sample_error(d(3), &NoiseModel::BitFlip { p: -0.1 }, &mut rng).is_err());
        assert!(sample_error(d(3), &NoiseModel::Biased { p: 0.1, p_rel: 1.5 }, &mut rng).is_err());
    }

    #[test]
    fn biased_one_third_is_depolarizing() {
        let (a, b, c) = NoiseModel::Biased { p: 0.3, p_rel: 1.0 / 3.0 }.rates();
        let (x, y, z) = NoiseModel::Depolarizing { p: 0.3 }.rates();
        assert!((a - x).abs() < 1e-15 && (b - y).abs() < 1e-15 && (c - z).abs() < 1e-15);
    }

    #[test]
    fn same_seed_same_frames() {
        let model = NoiseModel::Depolarizing { p: 0.2 };
        let mut a = worker_stream(42, 3);
        let mut b = worker_stream(42, 3);
        for _ in 0..50 {
            assert_eq!(sample_error(d(7), &model, &mut a).unwrap(), sample_error(d(7), &model, &mut b).unwrap());
        }
        let mut c = worker_stream(42, 4);
        let fa: Vec<_> = (0..5).map(|_| sample_error(d(7), &model, &mut a).unwrap()).collect();
        let fc: Vec<_> = (0..5).map(|_| sample_error(d(7), &model, &mut c).unwrap()).collect();
        assert_ne!(fa, fc);
    }

    #[test]
    fn chain_length_checked() {
        let mut rng = worker_stream(0, 0);
        assert_eq!(
            sample_row_column_chain(d(5), 6, &[Pauli::X], &mut rng),
            Err(NoiseError::InvalidChainLength { k: 6, d: 5 })
        );
        assert!(sample_row_column_chain(d(5), 0, &Pauli::ALL, &mut rng).unwrap().is_identity());
    }

    #[test]
    fn x_chains_are_collinear_on_x_fallible_lines() {
        let mut rng = worker_stream(7, 0);
        for _ in 0..2000 {
            let f = sample_row_column_chain(d(5), 3, &[Pauli::X], &mut rng).unwrap();
            let support = f.support();
            assert_eq!(support.len(), 3);
            assert!(support.iter().all(|(_, p)| *p == Pauli::X));
            let on_line = Line::x_fallible(5).any(|l| support.iter().all(|(q, _)| l.contains(*q)));
            assert!(on_line);
        }
    }

    #[test]
    fn line_qubit_counts() {
        assert_eq!(Line::all(5).count(), 20);
        assert_eq!(Line::relevant(5, &[Pauli::X]).len(), 10);
        assert_eq!(Line::relevant(5, &[Pauli::Y]).len(), 20);
        for l in Line::all(5) {
            let qs = l.qubits(5);
            assert!(qs.iter().all(|q| l.contains(*q)));
            let mut flat: Vec<_> = qs.iter().map(|q| q.flat(5)).collect();
            flat.dedup();
            assert_eq!(flat.len(), 5);
        }
    }
}
