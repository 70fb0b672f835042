//! Minimum-weight perfect matching decoder.
//!
//! Plaquette and vertex defects are matched independently on the complete
//! graph with toroidal Manhattan distances, and each matched pair is joined by
//! a geodesic chain of X (plaquettes) or Z (vertices) operations.

pub mod blossom;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{CodeDistance, Pauli, PauliFrame, QubitIndex, Syndrome};
use blossom::{max_weight_matching, Edge};

pub const BRUTEFORCE_LIMIT: usize = 12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatchingError {
    #[error("odd number of defects ({0}) cannot be perfectly matched")]
    OddDefectCount(usize),
    #[error("{0} defects exceed the exhaustive search limit of {BRUTEFORCE_LIMIT}")]
    TooManyDefects(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DefectSpecies {
    Plaquette,
    Vertex,
}

impl DefectSpecies {
    /// Operator whose chain moves this defect species.
    pub fn correction_op(self) -> Pauli {
        match self {
            DefectSpecies::Plaquette => Pauli::X,
            DefectSpecies::Vertex => Pauli::Z,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefectSet {
    pub species: DefectSpecies,
    pub positions: Vec<(usize, usize)>,
}

impl DefectSet {
    pub fn new(species: DefectSpecies, positions: Vec<(usize, usize)>) -> Self {
        Self { species, positions }
    }

    pub fn from_syndrome(s: &Syndrome, species: DefectSpecies) -> Self {
        let positions = match species {
            DefectSpecies::Plaquette => s.plaquette_positions(),
            DefectSpecies::Vertex => s.vertex_positions(),
        };
        Self { species, positions }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Index pairs `(i, j)` with `i < j`, sorted by `i`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Pairing {
    pub pairs: Vec<(usize, usize)>,
    pub total_weight: u64,
}

#[inline]
fn cyclic(a: usize, b: usize, d: usize) -> usize {
    let diff = a.abs_diff(b);
    diff.min(d - diff)
}

pub fn toroidal_distance(a: (usize, usize), b: (usize, usize), d: usize) -> usize {
    cyclic(a.0, b.0, d) + cyclic(a.1, b.1, d)
}

fn distance_matrix(positions: &[(usize, usize)], d: usize) -> Vec<Vec<u64>> {
    positions
        .iter()
        .map(|&a| positions.iter().map(|&b| toroidal_distance(a, b, d) as u64).collect())
        .collect()
}

/// Exhaustive search over all `(n-1)!!` pairings; lexicographically smallest
/// optimal pairing wins.
pub fn match_bruteforce(defects: &DefectSet, d: usize) -> Result<Pairing, MatchingError> {
    let n = defects.len();
    if n % 2 == 1 {
        return Err(MatchingError::OddDefectCount(n));
    }
    if n > BRUTEFORCE_LIMIT {
        return Err(MatchingError::TooManyDefects(n));
    }
    let dist = distance_matrix(&defects.positions, d);
    let mut best: Option<Pairing> = None;
    let mut current = Vec::with_capacity(n / 2);
    let mut used = vec![false; n];
    enumerate_pairings(&dist, &mut used, &mut current, 0, &mut best);
    Ok(best.unwrap_or_default())
}

fn enumerate_pairings(
    dist: &[Vec<u64>],
    used: &mut [bool],
    current: &mut Vec<(usize, usize)>,
    weight: u64,
    best: &mut Option<Pairing>,
) {
    let Some(i) = used.iter().position(|u| !u) else {
        // Enumeration order is lexicographic, so only strictly better replaces.
        if best.as_ref().is_none_or(|b| weight < b.total_weight) {
            *best = Some(Pairing { pairs: current.clone(), total_weight: weight });
        }
        return;
    };
    used[i] = true;
    for j in i + 1..used.len() {
        if !used[j] {
            used[j] = true;
            current.push((i, j));
            enumerate_pairings(dist, used, current, weight + dist[i][j], best);
            current.pop();
            used[j] = false;
        }
    }
    used[i] = false;
}

/// Optimal perfect-matching weight of the vertices flagged in `active`.
fn optimum_weight(dist: &[Vec<u64>], active: &[usize]) -> u64 {
    let m = active.len();
    if m == 0 {
        return 0;
    }
    if m == 2 {
        return dist[active[0]][active[1]];
    }
    let big = dist.iter().flatten().copied().max().unwrap_or(0) as i64 + 1;
    let mut edges = Vec::with_capacity(m * (m - 1) / 2);
    for a in 0..m {
        for b in a + 1..m {
            edges.push(Edge { i: a, j: b, w: big - dist[active[a]][active[b]] as i64 });
        }
    }
    let mate = max_weight_matching(m, &edges, true);
    let mut total = 0;
    for (a, ma) in mate.iter().enumerate() {
        let b = ma.expect("complete graph on an even vertex set has a perfect matching");
        if a < b {
            total += dist[active[a]][active[b]];
        }
    }
    total
}

/// Exact minimum-weight perfect matching via the blossom algorithm. Among
/// optimal pairings the lexicographically smallest is returned: each lowest
/// unmatched defect takes the lowest partner that keeps the remainder optimal.
pub fn match_exact(defects: &DefectSet, d: usize) -> Result<Pairing, MatchingError> {
    let n = defects.len();
    if n % 2 == 1 {
        return Err(MatchingError::OddDefectCount(n));
    }
    if n == 0 {
        return Ok(Pairing::default());
    }
    let dist = distance_matrix(&defects.positions, d);
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut target = optimum_weight(&dist, &remaining);
    let total_weight = target;
    let mut pairs = Vec::with_capacity(n / 2);
    while !remaining.is_empty() {
        let i = remaining[0];
        let rest: Vec<usize> = remaining[1..].to_vec();
        let mut chosen = None;
        for (pos, &j) in rest.iter().enumerate() {
            let w = dist[i][j];
            if w > target {
                continue;
            }
            let mut others = rest.clone();
            others.remove(pos);
            let sub = optimum_weight(&dist, &others);
            if w + sub == target {
                chosen = Some((j, others, sub));
                break;
            }
        }
        let (j, others, sub) = chosen.expect("an optimal partner always exists");
        pairs.push((i, j));
        remaining = others;
        target = sub;
    }
    Ok(Pairing { pairs, total_weight })
}

/// Signed steps from `a` to `b` along a cycle of length `d`, taking the
/// shorter direction (forward on ties).
fn cyclic_steps(a: usize, b: usize, d: usize) -> isize {
    let fwd = (b + d - a) % d;
    let back = d - fwd;
    if fwd == 0 {
        0
    } else if fwd <= back {
        fwd as isize
    } else {
        -(back as isize)
    }
}

/// Geodesic qubit chain joining two defects of one species: first along the
/// row direction, then along the column direction.
pub fn correction_path(
    a: (usize, usize),
    b: (usize, usize),
    species: DefectSpecies,
    d: usize,
) -> Vec<(QubitIndex, Pauli)> {
    let op = species.correction_op();
    let mut out = Vec::with_capacity(toroidal_distance(a, b, d));
    let (mut r, mut c) = a;
    let dr = cyclic_steps(a.0, b.0, d);
    for _ in 0..dr.unsigned_abs() {
        let next = if dr > 0 { (r + 1) % d } else { (r + d - 1) % d };
        let q = match species {
            // plaquettes (r, c) and (r+1, c) share H[r+1][c]
            DefectSpecies::Plaquette => QubitIndex::h(if dr > 0 { next } else { r }, c),
            // vertices (r, c) and (r+1, c) share V[r][c]
            DefectSpecies::Vertex => QubitIndex::v(if dr > 0 { r } else { next }, c),
        };
        out.push((q, op));
        r = next;
    }
    let dc = cyclic_steps(a.1, b.1, d);
    for _ in 0..dc.unsigned_abs() {
        let next = if dc > 0 { (c + 1) % d } else { (c + d - 1) % d };
        let q = match species {
            // plaquettes (r, c) and (r, c+1) share V[r][c+1]
            DefectSpecies::Plaquette => QubitIndex::v(r, if dc > 0 { next } else { c }),
            // vertices (r, c) and (r, c+1) share H[r][c]
            DefectSpecies::Vertex => QubitIndex::h(r, if dc > 0 { c } else { next }),
        };
        out.push((q, op));
        c = next;
    }
    out
}

/// Correction frame for a syndrome: independent matchings of both species.
pub fn decode_mwpm(s: &Syndrome) -> Result<PauliFrame, MatchingError> {
    let d = s.d();
    let mut frame = PauliFrame::identity(s.distance());
    for species in [DefectSpecies::Plaquette, DefectSpecies::Vertex] {
        let defects = DefectSet::from_syndrome(s, species);
        let pairing = match_exact(&defects, d)?;
        for (i, j) in pairing.pairs {
            for (q, op) in correction_path(defects.positions[i], defects.positions[j], species, d) {
                frame.apply_in_place(q, op);
            }
        }
    }
    Ok(frame)
}

/// Convenience wrapper asserting the distance type.
pub fn decode_mwpm_checked(s: &Syndrome, d: CodeDistance) -> Result<PauliFrame, MatchingError> {
    debug_assert_eq!(s.d(), d.get());
    decode_mwpm(s)
}
