//! The d×d toric code: qubit indexing, Pauli frames, syndromes and homology.
//!
//! Layout conventions used throughout the crate:
//!
//! * horizontal-edge qubit `H[i][j]` is the bottom edge of plaquette `(i, j)`;
//! * vertical-edge qubit `V[i][j]` is the left edge of plaquette `(i, j)`;
//! * plaquette `(i, j)` is bounded by `H[i][j]`, `H[i+1][j]`, `V[i][j]`, `V[i][j+1]`;
//! * vertex `(i, j)` touches `H[i][j]`, `H[i][j-1]`, `V[i][j]`, `V[i-1][j]`.
//!
//! All index arithmetic is modulo `d`. Rows grow "upwards" and columns to the
//! right, so plaquette `(i, j)` has its lower-left corner at vertex `(i, j)`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("code distance must be odd and at least 3, got {0}")]
    InvalidDistance(usize),
    #[error("qubit index {0} out of range for distance {1}")]
    QubitOutOfRange(usize, usize),
    #[error("frame has a non-empty syndrome ({0} defects); homology is undefined")]
    NonEmptySyndrome(usize),
    #[error("distance mismatch: expected {expected}, got {got}")]
    DistanceMismatch { expected: usize, got: usize },
    #[error("invalid syndrome grid: {0}")]
    InvalidGrid(String),
}

/// Odd code distance `d >= 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct CodeDistance(usize);

impl CodeDistance {
    pub fn new(d: usize) -> Result<Self, LatticeError> {
        if d < 3 || d % 2 == 0 {
            return Err(LatticeError::InvalidDistance(d));
        }
        Ok(Self(d))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }

    #[inline]
    pub fn num_qubits(self) -> usize {
        2 * self.0 * self.0
    }

    /// Length of the shortest fallible error chain, `⌈d/2⌉`.
    #[inline]
    pub fn half_ceil(self) -> usize {
        self.0.div_ceil(2)
    }
}

impl TryFrom<usize> for CodeDistance {
    type Error = LatticeError;
    fn try_from(d: usize) -> Result<Self, Self::Error> {
        Self::new(d)
    }
}

impl From<CodeDistance> for usize {
    fn from(d: CodeDistance) -> usize {
        d.0
    }
}

impl fmt::Display for CodeDistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sublattice {
    Horizontal,
    Vertical,
}

/// A qubit on the edge `sublattice[row][col]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QubitIndex {
    pub sublattice: Sublattice,
    pub row: usize,
    pub col: usize,
}

impl QubitIndex {
    pub fn new(sublattice: Sublattice, row: usize, col: usize) -> Self {
        Self { sublattice, row, col }
    }

    pub fn h(row: usize, col: usize) -> Self {
        Self::new(Sublattice::Horizontal, row, col)
    }

    pub fn v(row: usize, col: usize) -> Self {
        Self::new(Sublattice::Vertical, row, col)
    }

    /// Flat index in `0..2d²`; horizontal qubits come first.
    #[inline]
    pub fn flat(self, d: usize) -> usize {
        let base = match self.sublattice {
            Sublattice::Horizontal => 0,
            Sublattice::Vertical => d * d,
        };
        base + self.row * d + self.col
    }

    #[inline]
    pub fn from_flat(index: usize, d: usize) -> Self {
        let sublattice = if index < d * d { Sublattice::Horizontal } else { Sublattice::Vertical };
        let rem = index % (d * d);
        Self::new(sublattice, rem / d, rem % d)
    }

    /// The two plaquettes sharing this edge.
    pub fn plaquettes(self, d: usize) -> [(usize, usize); 2] {
        let (i, j) = (self.row, self.col);
        match self.sublattice {
            Sublattice::Horizontal => [(i, j), ((i + d - 1) % d, j)],
            Sublattice::Vertical => [(i, j), (i, (j + d - 1) % d)],
        }
    }

    /// The two vertices at the ends of this edge.
    pub fn vertices(self, d: usize) -> [(usize, usize); 2] {
        let (i, j) = (self.row, self.col);
        match self.sublattice {
            Sublattice::Horizontal => [(i, j), (i, (j + 1) % d)],
            Sublattice::Vertical => [(i, j), ((i + 1) % d, j)],
        }
    }
}

impl fmt::Display for QubitIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.sublattice {
            Sublattice::Horizontal => 'H',
            Sublattice::Vertical => 'V',
        };
        write!(f, "{s}[{}][{}]", self.row, self.col)
    }
}

/// The four qubits bounding plaquette `(i, j)`.
pub fn plaquette_qubits(i: usize, j: usize, d: usize) -> [QubitIndex; 4] {
    [
        QubitIndex::h(i, j),
        QubitIndex::h((i + 1) % d, j),
        QubitIndex::v(i, j),
        QubitIndex::v(i, (j + 1) % d),
    ]
}

/// The four qubits meeting at vertex `(i, j)`.
pub fn vertex_qubits(i: usize, j: usize, d: usize) -> [QubitIndex; 4] {
    [
        QubitIndex::h(i, j),
        QubitIndex::h(i, (j + d - 1) % d),
        QubitIndex::v(i, j),
        QubitIndex::v((i + d - 1) % d, j),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    #[inline]
    pub fn has_x(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    #[inline]
    pub fn has_z(self) -> bool {
        matches!(self, Pauli::Z | Pauli::Y)
    }

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn from_bits(x: bool, z: bool) -> Option<Self> {
        match (x, z) {
            (true, false) => Some(Pauli::X),
            (true, true) => Some(Pauli::Y),
            (false, true) => Some(Pauli::Z),
            (false, false) => None,
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Pauli::X => "X",
            Pauli::Y => "Y",
            Pauli::Z => "Z",
        };
        f.write_str(c)
    }
}

/// X and Z bit-planes over all `2d²` qubits (Y sets both).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliFrame {
    d: usize,
    x: Vec<u8>,
    z: Vec<u8>,
}

impl PauliFrame {
    pub fn identity(d: CodeDistance) -> Self {
        let n = d.num_qubits();
        Self { d: d.get(), x: vec![0; n], z: vec![0; n] }
    }

    pub fn distance(&self) -> CodeDistance {
        CodeDistance(self.d)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn x_bits(&self) -> &[u8] {
        &self.x
    }

    pub fn z_bits(&self) -> &[u8] {
        &self.z
    }

    /// Pure composition: returns a new frame with `op` applied at `q`.
    pub fn apply_pauli(&self, q: QubitIndex, op: Pauli) -> Self {
        let mut out = self.clone();
        out.apply_in_place(q, op);
        out
    }

    #[inline]
    pub fn apply_in_place(&mut self, q: QubitIndex, op: Pauli) {
        let k = q.flat(self.d);
        if op.has_x() {
            self.x[k] ^= 1;
        }
        if op.has_z() {
            self.z[k] ^= 1;
        }
    }

    pub fn get(&self, q: QubitIndex) -> Option<Pauli> {
        let k = q.flat(self.d);
        Pauli::from_bits(self.x[k] == 1, self.z[k] == 1)
    }

    pub fn compose(&self, other: &PauliFrame) -> Self {
        let mut out = self.clone();
        out.compose_in_place(other);
        out
    }

    pub fn compose_in_place(&mut self, other: &PauliFrame) {
        debug_assert_eq!(self.d, other.d);
        for (a, b) in self.x.iter_mut().zip(&other.x) {
            *a ^= b;
        }
        for (a, b) in self.z.iter_mut().zip(&other.z) {
            *a ^= b;
        }
    }

    /// Number of qubits carrying a non-identity Pauli.
    pub fn weight(&self) -> usize {
        self.x.iter().zip(&self.z).filter(|(x, z)| **x | **z != 0).count()
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().all(|&b| b == 0) && self.z.iter().all(|&b| b == 0)
    }

    /// Non-identity entries in flat-index order.
    pub fn support(&self) -> Vec<(QubitIndex, Pauli)> {
        (0..self.x.len())
            .filter_map(|k| {
                Pauli::from_bits(self.x[k] == 1, self.z[k] == 1)
                    .map(|p| (QubitIndex::from_flat(k, self.d), p))
            })
            .collect()
    }

    pub fn compute_syndrome(&self) -> Syndrome {
        let d = self.d;
        let mut s = Syndrome::empty(CodeDistance(d));
        for k in 0..self.x.len() {
            if self.x[k] == 0 && self.z[k] == 0 {
                continue;
            }
            let q = QubitIndex::from_flat(k, d);
            if self.x[k] == 1 {
                for (i, j) in q.plaquettes(d) {
                    s.plaquette[i * d + j] ^= 1;
                }
            }
            if self.z[k] == 1 {
                for (i, j) in q.vertices(d) {
                    s.vertex[i * d + j] ^= 1;
                }
            }
        }
        s
    }

    /// Winding parities of a frame with empty syndrome.
    pub fn homology_class(&self) -> Result<HomologyClass, LatticeError> {
        let defects = self.compute_syndrome().defect_count();
        if defects != 0 {
            return Err(LatticeError::NonEmptySyndrome(defects));
        }
        Ok(self.homology_unchecked(0))
    }

    /// Parities measured against the `cut`-th representative of each of the
    /// four logical cuts. Only meaningful when the syndrome is empty.
    pub fn homology_unchecked(&self, cut: usize) -> HomologyClass {
        let d = self.d;
        let c = cut % d;
        let parity = |bits: &[u8], qs: &mut dyn Iterator<Item = QubitIndex>| {
            qs.fold(0u8, |acc, q| acc ^ bits[q.flat(d)]) == 1
        };
        HomologyClass {
            // X loop along a column of H edges crosses every H row once.
            x_vertical: parity(&self.x, &mut (0..d).map(|j| QubitIndex::h(c, j))),
            // X loop along a row of V edges crosses every V column once.
            x_horizontal: parity(&self.x, &mut (0..d).map(|i| QubitIndex::v(i, c))),
            // Z loop along a row of H edges crosses every H column once.
            z_horizontal: parity(&self.z, &mut (0..d).map(|i| QubitIndex::h(i, c))),
            // Z loop along a column of V edges crosses every V row once.
            z_vertical: parity(&self.z, &mut (0..d).map(|j| QubitIndex::v(c, j))),
        }
    }
}

/// Plaquette and vertex defect grids, row-major `d×d` each.
///
/// Serialized as `{"vertex": [[..]], "plaquette": [[..]]}` with `d` rows of
/// `d` zeros and ones.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "SyndromeGrids", into = "SyndromeGrids")]
pub struct Syndrome {
    d: usize,
    plaquette: Vec<u8>,
    vertex: Vec<u8>,
}

impl Syndrome {
    pub fn empty(d: CodeDistance) -> Self {
        let n = d.get() * d.get();
        Self { d: d.get(), plaquette: vec![0; n], vertex: vec![0; n] }
    }

    /// Builds a syndrome from explicit 0/1 grids.
    pub fn from_grids(d: CodeDistance, plaquette: Vec<u8>, vertex: Vec<u8>) -> Result<Self, LatticeError> {
        let n = d.get() * d.get();
        if plaquette.len() != n || vertex.len() != n {
            return Err(LatticeError::DistanceMismatch {
                expected: n,
                got: plaquette.len().max(vertex.len()),
            });
        }
        Ok(Self {
            d: d.get(),
            plaquette: plaquette.into_iter().map(|b| (b != 0) as u8).collect(),
            vertex: vertex.into_iter().map(|b| (b != 0) as u8).collect(),
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn distance(&self) -> CodeDistance {
        CodeDistance(self.d)
    }

    pub fn plaquette(&self) -> &[u8] {
        &self.plaquette
    }

    pub fn vertex(&self) -> &[u8] {
        &self.vertex
    }

    #[inline]
    pub fn plaquette_at(&self, i: usize, j: usize) -> bool {
        self.plaquette[i * self.d + j] == 1
    }

    #[inline]
    pub fn vertex_at(&self, i: usize, j: usize) -> bool {
        self.vertex[i * self.d + j] == 1
    }

    pub fn defect_count(&self) -> usize {
        self.plaquette_defects() + self.vertex_defects()
    }

    pub fn plaquette_defects(&self) -> usize {
        self.plaquette.iter().map(|&b| b as usize).sum()
    }

    pub fn vertex_defects(&self) -> usize {
        self.vertex.iter().map(|&b| b as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.defect_count() == 0
    }

    pub fn plaquette_positions(&self) -> Vec<(usize, usize)> {
        positions(&self.plaquette, self.d)
    }

    pub fn vertex_positions(&self) -> Vec<(usize, usize)> {
        positions(&self.vertex, self.d)
    }

    /// Flips the defects a single-qubit operation would create or remove.
    #[inline]
    pub fn apply_in_place(&mut self, q: QubitIndex, op: Pauli) {
        let d = self.d;
        if op.has_x() {
            for (i, j) in q.plaquettes(d) {
                self.plaquette[i * d + j] ^= 1;
            }
        }
        if op.has_z() {
            for (i, j) in q.vertices(d) {
                self.vertex[i * d + j] ^= 1;
            }
        }
    }

    pub fn apply(&self, q: QubitIndex, op: Pauli) -> Self {
        let mut s = self.clone();
        s.apply_in_place(q, op);
        s
    }

    pub fn xor(&self, other: &Syndrome) -> Self {
        let mut s = self.clone();
        for (a, b) in s.plaquette.iter_mut().zip(&other.plaquette) {
            *a ^= b;
        }
        for (a, b) in s.vertex.iter_mut().zip(&other.vertex) {
            *a ^= b;
        }
        s
    }

    /// True when `q` borders at least one defect of either species.
    pub fn touches(&self, q: QubitIndex) -> bool {
        let d = self.d;
        q.plaquettes(d).iter().any(|&(i, j)| self.plaquette_at(i, j))
            || q.vertices(d).iter().any(|&(i, j)| self.vertex_at(i, j))
    }

    /// Packs the two grids into a bit key (plaquettes first, then vertices).
    pub fn pack(&self) -> Vec<u64> {
        let n = self.plaquette.len();
        let mut words = vec![0u64; (2 * n).div_ceil(64)];
        for (k, &b) in self.plaquette.iter().chain(&self.vertex).enumerate() {
            if b == 1 {
                words[k / 64] |= 1 << (k % 64);
            }
        }
        words
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SyndromeGrids {
    vertex: Vec<Vec<u8>>,
    plaquette: Vec<Vec<u8>>,
}

impl TryFrom<SyndromeGrids> for Syndrome {
    type Error = LatticeError;

    fn try_from(g: SyndromeGrids) -> Result<Self, Self::Error> {
        let d = CodeDistance::new(g.vertex.len())?;
        let square = |rows: &[Vec<u8>]| rows.len() == d.0 && rows.iter().all(|r| r.len() == d.0);
        if !square(&g.vertex) || !square(&g.plaquette) {
            return Err(LatticeError::DistanceMismatch { expected: d.0, got: g.plaquette.len() });
        }
        if g.vertex.iter().chain(&g.plaquette).flatten().any(|&b| b > 1) {
            return Err(LatticeError::InvalidGrid("entries must be 0 or 1".into()));
        }
        let s = Syndrome::from_grids(d, g.plaquette.concat(), g.vertex.concat())?;
        if s.plaquette_defects() % 2 == 1 || s.vertex_defects() % 2 == 1 {
            return Err(LatticeError::InvalidGrid("defect counts must be even".into()));
        }
        Ok(s)
    }
}

impl From<Syndrome> for SyndromeGrids {
    fn from(s: Syndrome) -> Self {
        let rows = |g: &[u8]| g.chunks(s.d).map(|r| r.to_vec()).collect();
        SyndromeGrids { vertex: rows(&s.vertex), plaquette: rows(&s.plaquette) }
    }
}

fn positions(grid: &[u8], d: usize) -> Vec<(usize, usize)> {
    grid.iter()
        .enumerate()
        .filter(|(_, &b)| b == 1)
        .map(|(k, _)| (k / d, k % d))
        .collect()
}

impl fmt::Display for Syndrome {
    /// Rows printed top (highest index) first; `P` plaquette defect, `v` vertex
    /// defect, `B` both at the same cell index.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.d;
        for i in (0..d).rev() {
            let line: String = (0..d)
                .map(|j| match (self.plaquette_at(i, j), self.vertex_at(i, j)) {
                    (true, true) => 'B',
                    (true, false) => 'P',
                    (false, true) => 'v',
                    (false, false) => '.',
                })
                .collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

/// Winding parities of a syndrome-free operator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HomologyClass {
    pub x_horizontal: bool,
    pub x_vertical: bool,
    pub z_horizontal: bool,
    pub z_vertical: bool,
}

impl HomologyClass {
    pub fn is_logical_failure(&self) -> bool {
        self.x_horizontal || self.x_vertical || self.z_horizontal || self.z_vertical
    }

    pub fn bits(&self) -> u8 {
        (self.x_horizontal as u8)
            | (self.x_vertical as u8) << 1
            | (self.z_horizontal as u8) << 2
            | (self.z_vertical as u8) << 3
    }
}

/// Free-function forms mirroring the method API.
pub fn apply_pauli(frame: &PauliFrame, q: QubitIndex, op: Pauli) -> PauliFrame {
    frame.apply_pauli(q, op)
}

pub fn compute_syndrome(frame: &PauliFrame) -> Syndrome {
    frame.compute_syndrome()
}

pub fn defect_count(s: &Syndrome) -> usize {
    s.defect_count()
}

pub fn homology_class(frame: &PauliFrame) -> Result<HomologyClass, LatticeError> {
    frame.homology_class()
}

pub fn is_logical_failure(h: &HomologyClass) -> bool {
    h.is_logical_failure()
}

/// All `2d²` qubits in flat order.
pub fn all_qubits(d: CodeDistance) -> impl Iterator<Item = QubitIndex> {
    let d = d.get();
    (0..2 * d * d).map(move |k| QubitIndex::from_flat(k, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(n: usize) -> CodeDistance {
        CodeDistance::new(n).unwrap()
    }

    #[test]
    fn even_distance_rejected() {
        assert_eq!(CodeDistance::new(4), Err(LatticeError::InvalidDistance(4)));
        assert!(CodeDistance::new(1).is_err());
        assert_eq!(d(5).num_qubits(), 50);
    }

    #[test]
    fn flat_index_bijection() {
        for n in [3, 5, 7] {
            for k in 0..2 * n * n {
                assert_eq!(QubitIndex::from_flat(k, n).flat(n), k);
            }
        }
    }

    #[test]
    fn syndrome_json_round_trip() {
        let f = PauliFrame::identity(d(3)).apply_pauli(QubitIndex::v(1, 2), Pauli::Y);
        let s = f.compute_syndrome();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<Syndrome>(&json).unwrap(), s);
        let odd = r#"{"vertex":[[1,0,0],[0,0,0],[0,0,0]],"plaquette":[[0,0,0],[0,0,0],[0,0,0]]}"#;
        assert!(serde_json::from_str::<Syndrome>(odd).is_err());
        let ragged = r#"{"vertex":[[0,0],[0,0,0],[0,0,0]],"plaquette":[[0,0,0],[0,0,0],[0,0,0]]}"#;
        assert!(serde_json::from_str::<Syndrome>(ragged).is_err());
    }

    #[test]
    fn incidence_is_consistent() {
        let n = 5;
        let mut plaq_incidence = vec![0; 2 * n * n];
        let mut vert_incidence = vec![0; 2 * n * n];
        for i in 0..n {
            for j in 0..n {
                for q in plaquette_qubits(i, j, n) {
                    assert!(q.plaquettes(n).contains(&(i, j)));
                    plaq_incidence[q.flat(n)] += 1;
                }
                for q in vertex_qubits(i, j, n) {
                    assert!(q.vertices(n).contains(&(i, j)));
                    vert_incidence[q.flat(n)] += 1;
                }
            }
        }
        assert!(plaq_incidence.iter().all(|&c| c == 2));
        assert!(vert_incidence.iter().all(|&c| c == 2));
    }

    #[test]
    fn x_twice_is_identity() {
        let f = PauliFrame::identity(d(5));
        let q = QubitIndex::h(2, 3);
        assert_eq!(f.apply_pauli(q, Pauli::X).apply_pauli(q, Pauli::X), f);
    }

    #[test]
    fn y_sets_both_bits_and_x_then_z_is_y() {
        let f = PauliFrame::identity(d(5));
        let q = QubitIndex::v(1, 4);
        let y = f.apply_pauli(q, Pauli::Y);
        assert_eq!(y.x_bits()[q.flat(5)], 1);
        assert_eq!(y.z_bits()[q.flat(5)], 1);
        let xz = f.apply_pauli(q, Pauli::X).apply_pauli(q, Pauli::Z);
        assert_eq!(xz, y);
        assert_eq!(xz.get(q), Some(Pauli::Y));
    }

    #[test]
    fn single_error_syndromes() {
        let f = PauliFrame::identity(d(5));
        assert!(f.compute_syndrome().is_empty());
        for q in all_qubits(d(5)) {
            let sx = f.apply_pauli(q, Pauli::X).compute_syndrome();
            assert_eq!(sx.plaquette_defects(), 2);
            assert_eq!(sx.vertex_defects(), 0);
            assert_eq!(defect_count(&sx), 2);
            let sy = f.apply_pauli(q, Pauli::Y).compute_syndrome();
            assert_eq!(sy.plaquette_defects(), 2);
            assert_eq!(sy.vertex_defects(), 2);
            assert_eq!(defect_count(&sy), 4);
        }
        let s = f.apply_pauli(QubitIndex::h(0, 0), Pauli::X).compute_syndrome();
        assert_eq!(s.plaquette_positions(), vec![(0, 0), (4, 0)]);
    }

    #[test]
    fn empty_frame_homology_trivial() {
        let h = PauliFrame::identity(d(3)).homology_class().unwrap();
        assert_eq!(h, HomologyClass::default());
        assert!(!h.is_logical_failure());
    }

    #[test]
    fn logical_loops_flip_exactly_one_bit() {
        let n = 5;
        let id = PauliFrame::identity(d(n));
        let mut col_h = id.clone();
        let mut row_v = id.clone();
        let mut row_h = id.clone();
        let mut col_v = id.clone();
        for k in 0..n {
            col_h.apply_in_place(QubitIndex::h(k, 2), Pauli::X);
            row_v.apply_in_place(QubitIndex::v(1, k), Pauli::X);
            row_h.apply_in_place(QubitIndex::h(3, k), Pauli::Z);
            col_v.apply_in_place(QubitIndex::v(k, 0), Pauli::Z);
        }
        let expect = [
            (col_h, HomologyClass { x_vertical: true, ..Default::default() }),
            (row_v, HomologyClass { x_horizontal: true, ..Default::default() }),
            (row_h, HomologyClass { z_horizontal: true, ..Default::default() }),
            (col_v, HomologyClass { z_vertical: true, ..Default::default() }),
        ];
        for (frame, h) in expect {
            assert_eq!(frame.homology_class().unwrap(), h);
            for cut in 0..n {
                assert_eq!(frame.homology_unchecked(cut), h);
            }
        }
    }

    #[test]
    fn stabilizers_are_trivial() {
        let n = 5;
        for i in 0..n {
            for j in 0..n {
                let mut v = PauliFrame::identity(d(n));
                for q in vertex_qubits(i, j, n) {
                    v.apply_in_place(q, Pauli::X);
                }
                assert!(v.compute_syndrome().is_empty());
                assert_eq!(v.homology_class().unwrap(), HomologyClass::default());
                let mut p = PauliFrame::identity(d(n));
                for q in plaquette_qubits(i, j, n) {
                    p.apply_in_place(q, Pauli::Z);
                }
                assert!(p.compute_syndrome().is_empty());
                assert_eq!(p.homology_class().unwrap(), HomologyClass::default());
            }
        }
    }

    #[test]
    fn homology_requires_empty_syndrome() {
        let f = PauliFrame::identity(d(3)).apply_pauli(QubitIndex::h(0, 0), Pauli::X);
        assert_eq!(f.homology_class(), Err(LatticeError::NonEmptySyndrome(2)));
    }

    #[test]
    fn logical_y_is_failure() {
        let h = HomologyClass { x_horizontal: true, z_horizontal: true, ..Default::default() };
        assert!(h.is_logical_failure());
        assert!(HomologyClass { x_horizontal: true, ..Default::default() }.is_logical_failure());
    }

    fn arb_frame(n: usize) -> impl Strategy<Value = PauliFrame> {
        proptest::collection::vec(0u8..4, 2 * n * n).prop_map(move |ops| {
            let mut f = PauliFrame::identity(CodeDistance::new(n).unwrap());
            for (k, op) in ops.into_iter().enumerate() {
                if let Some(p) = Pauli::from_index(op as usize) {
                    f.apply_in_place(QubitIndex::from_flat(k, n), p);
                }
            }
            f
        })
    }

    fn arb_stabilizer(n: usize) -> impl Strategy<Value = PauliFrame> {
        (0..n, 0..n, any::<bool>()).prop_map(move |(i, j, vertex)| {
            let mut f = PauliFrame::identity(CodeDistance::new(n).unwrap());
            if vertex {
                for q in vertex_qubits(i, j, n) {
                    f.apply_in_place(q, Pauli::X);
                }
            } else {
                for q in plaquette_qubits(i, j, n) {
                    f.apply_in_place(q, Pauli::Z);
                }
            }
            f
        })
    }

    proptest! {
        #[test]
        fn defect_counts_even(f in prop_oneof![arb_frame(3), arb_frame(5), arb_frame(7)]) {
            let s = f.compute_syndrome();
            prop_assert_eq!(s.plaquette_defects() % 2, 0);
            prop_assert_eq!(s.vertex_defects() % 2, 0);
        }

        #[test]
        fn syndrome_is_homomorphism(a in arb_frame(5), b in arb_frame(5)) {
            let lhs = a.compose(&b).compute_syndrome();
            let rhs = a.compute_syndrome().xor(&b.compute_syndrome());
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn homology_invariant_under_stabilizers(
            s1 in arb_stabilizer(5), s2 in arb_stabilizer(5), s3 in arb_stabilizer(5), cut in 0usize..5
        ) {
            // A logical X loop dressed with stabilizers keeps its class at every cut.
            let mut base = PauliFrame::identity(CodeDistance::new(5).unwrap());
            for k in 0..5 {
                base.apply_in_place(QubitIndex::v(2, k), Pauli::X);
            }
            let dressed = base.compose(&s1).compose(&s2).compose(&s3);
            prop_assert!(dressed.compute_syndrome().is_empty());
            prop_assert_eq!(dressed.homology_unchecked(cut), base.homology_class().unwrap());
        }
    }
}
