//! Translation/rotation normalised views of a syndrome, one per candidate qubit.
//!
//! A perspective moves the syndrome so that its qubit becomes the horizontal
//! qubit at the reference cell `r0 = (d/2, d/2)`. Vertical qubits are first
//! rotated by 90° about a plaquette centre, which maps vertical edges onto
//! horizontal ones and keeps plaquettes and vertices apart:
//!
//! * plaquette `(i, j)` goes to `(j, -i-1)`,
//! * vertex `(i, j)` goes to `(j, -i)`,
//! * `V[i][j]` goes to `H[j][-i-1]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{all_qubits, Pauli, QubitIndex, Sublattice, Syndrome};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PerspectiveError {
    #[error("observation requested for an empty syndrome")]
    EmptySyndrome,
}

/// Version tag of the layout above, stored in checkpoints.
pub const PERSPECTIVE_CONVENTION: &str = "r0=floor(d/2);rot90=plaquette(i,j)->(j,-i-1);channels=vertex,plaquette";

pub fn reference_cell(d: usize) -> usize {
    d / 2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transform {
    pub rotated: bool,
    pub row_shift: usize,
    pub col_shift: usize,
}

impl Transform {
    /// Position of cell `(i, j)` after the transform. `vertex` selects the
    /// vertex rotation rule.
    fn map(&self, i: usize, j: usize, d: usize, vertex: bool) -> (usize, usize) {
        let (r, c) = if self.rotated {
            let c = if vertex { (d - i) % d } else { d - 1 - i };
            (j, c)
        } else {
            (i, j)
        };
        ((r + self.row_shift) % d, (c + self.col_shift) % d)
    }
}

/// Two stacked `d×d` grids: channel 0 vertex defects, channel 1 plaquette
/// defects.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Perspective {
    pub d: usize,
    pub grid: Vec<u8>,
    pub source_qubit: QubitIndex,
    pub transform: Transform,
}

impl Perspective {
    pub fn vertex_channel(&self) -> &[u8] {
        &self.grid[..self.d * self.d]
    }

    pub fn plaquette_channel(&self) -> &[u8] {
        &self.grid[self.d * self.d..]
    }

    /// Undoes the transform, recovering the original syndrome.
    pub fn original(&self) -> Syndrome {
        let d = self.d;
        let n = d * d;
        let mut plaquette = vec![0u8; n];
        let mut vertex = vec![0u8; n];
        for i in 0..d {
            for j in 0..d {
                let (vr, vc) = self.transform.map(i, j, d, true);
                vertex[i * d + j] = self.grid[vr * d + vc];
                let (pr, pc) = self.transform.map(i, j, d, false);
                plaquette[i * d + j] = self.grid[n + pr * d + pc];
            }
        }
        let cd = crate::lattice::CodeDistance::new(d).expect("perspective built from a valid syndrome");
        Syndrome::from_grids(cd, plaquette, vertex).expect("grid sizes match")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub perspectives: Vec<Perspective>,
}

impl Observation {
    pub fn len(&self) -> usize {
        self.perspectives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perspectives.is_empty()
    }
}

/// Qubits bordering at least one defect, in flat (sublattice, row, col) order.
pub fn active_qubits(s: &Syndrome) -> Vec<QubitIndex> {
    all_qubits(s.distance()).filter(|&q| s.touches(q)).collect()
}

fn transform_for(q: QubitIndex, d: usize) -> Transform {
    let r0 = reference_cell(d);
    let (rotated, row, col) = match q.sublattice {
        Sublattice::Horizontal => (false, q.row, q.col),
        Sublattice::Vertical => (true, q.col, d - 1 - q.row),
    };
    Transform { rotated, row_shift: (r0 + d - row) % d, col_shift: (r0 + d - col) % d }
}

pub fn perspective_for(s: &Syndrome, q: QubitIndex) -> Perspective {
    let d = s.d();
    let n = d * d;
    let t = transform_for(q, d);
    let mut grid = vec![0u8; 2 * n];
    for (i, j) in s.vertex_positions() {
        let (r, c) = t.map(i, j, d, true);
        grid[r * d + c] = 1;
    }
    for (i, j) in s.plaquette_positions() {
        let (r, c) = t.map(i, j, d, false);
        grid[n + r * d + c] = 1;
    }
    Perspective { d, grid, source_qubit: q, transform: t }
}

pub fn observation(s: &Syndrome) -> Result<Observation, PerspectiveError> {
    if s.is_empty() {
        return Err(PerspectiveError::EmptySyndrome);
    }
    Ok(Observation { perspectives: active_qubits(s).into_iter().map(|q| perspective_for(s, q)).collect() })
}

/// Pauli labels are unaffected by the spatial transform.
pub fn map_action_back(p: &Perspective, a: Pauli) -> (QubitIndex, Pauli) {
    (p.source_qubit, a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{CodeDistance, PauliFrame};
    use crate::noise::{sample_error, worker_stream, NoiseModel};
    use proptest::prelude::*;

    fn cd(n: usize) -> CodeDistance {
        CodeDistance::new(n).unwrap()
    }

    fn syndrome(n: usize, ops: &[(QubitIndex, Pauli)]) -> Syndrome {
        let mut f = PauliFrame::identity(cd(n));
        for &(q, p) in ops {
            f.apply_in_place(q, p);
        }
        f.compute_syndrome()
    }

    fn translate(s: &Syndrome, a: usize, b: usize) -> Syndrome {
        let d = s.d();
        let mut p = vec![0; d * d];
        let mut v = vec![0; d * d];
        for (i, j) in s.plaquette_positions() {
            p[((i + a) % d) * d + (j + b) % d] = 1;
        }
        for (i, j) in s.vertex_positions() {
            v[((i + a) % d) * d + (j + b) % d] = 1;
        }
        Syndrome::from_grids(s.distance(), p, v).unwrap()
    }

    #[test]
    fn active_counts() {
        assert!(active_qubits(&Syndrome::empty(cd(5))).is_empty());
        // V[2][2] separates plaquettes (2,1) and (2,2).
        let s = syndrome(5, &[(QubitIndex::v(2, 2), Pauli::X)]);
        assert_eq!(active_qubits(&s).len(), 7);
        assert_eq!(observation(&s).unwrap().len(), 7);
        let y = syndrome(5, &[(QubitIndex::h(1, 1), Pauli::Y)]);
        // 7 around the plaquette pair, 7 around the vertex pair; H[1][1], V[1][1],
        // V[0][1], V[1][2] and V[0][2] border both.
        assert_eq!(active_qubits(&y).len(), 9);
        assert_eq!(observation(&Syndrome::empty(cd(3))), Err(PerspectiveError::EmptySyndrome));
    }

    #[test]
    fn source_qubit_lands_on_reference_cell() {
        let d = 5;
        let r0 = reference_cell(d);
        for q in all_qubits(cd(d)) {
            // The X error on q itself puts its two plaquettes at (r0, r0) and (r0-1, r0).
            let s = syndrome(d, &[(q, Pauli::X)]);
            let p = perspective_for(&s, q);
            let mut cells: Vec<usize> =
                p.plaquette_channel().iter().enumerate().filter(|(_, &b)| b == 1).map(|(k, _)| k).collect();
            cells.sort();
            assert_eq!(cells, vec![(r0 - 1) * d + r0, r0 * d + r0], "{q}");
            let s = syndrome(d, &[(q, Pauli::Z)]);
            let p = perspective_for(&s, q);
            let cells: Vec<usize> =
                p.vertex_channel().iter().enumerate().filter(|(_, &b)| b == 1).map(|(k, _)| k).collect();
            assert_eq!(cells, vec![r0 * d + r0, r0 * d + r0 + 1], "{q}");
        }
    }

    #[test]
    fn rotated_vertical_neighbour() {
        // d=3: vertical qubit V[1][1] with the plaquette to its left, (1,0), flagged.
        let d = 3;
        let mut p = vec![0; 9];
        p[3] = 1;
        let s = Syndrome::from_grids(cd(d), p, vec![0; 9]).unwrap();
        let per = perspective_for(&s, QubitIndex::v(1, 1));
        // Rotating maps plaquette (1,0) to (0,1) and V[1][1] to H[1][1]: the defect
        // sits just below the reference qubit.
        assert_eq!(per.transform, Transform { rotated: true, row_shift: 0, col_shift: 0 });
        let mut expected = vec![0u8; 18];
        expected[9 + 1] = 1;
        assert_eq!(per.grid, expected);
        let mut p2 = vec![0; 9];
        p2[1] = 1;
        let s2 = Syndrome::from_grids(cd(d), p2, vec![0; 9]).unwrap();
        assert_eq!(perspective_for(&s2, QubitIndex::h(1, 1)).grid, expected);
    }

    #[test]
    fn map_back_targets_source() {
        let s = syndrome(5, &[(QubitIndex::v(3, 4), Pauli::Y)]);
        for p in observation(&s).unwrap().perspectives {
            assert_eq!(map_action_back(&p, Pauli::Y), (p.source_qubit, Pauli::Y));
        }
    }

    fn sorted_grids(s: &Syndrome) -> Vec<Vec<u8>> {
        let mut g: Vec<_> = observation(s).unwrap().perspectives.into_iter().map(|p| p.grid).collect();
        g.sort();
        g
    }

    #[test]
    fn translation_equivariance() {
        let mut rng = worker_stream(11, 0);
        for n in [3, 5] {
            let mut done = 0;
            while done < 500 {
                let f = sample_error(cd(n), &NoiseModel::Depolarizing { p: 0.15 }, &mut rng).unwrap();
                let s = f.compute_syndrome();
                if s.is_empty() {
                    continue;
                }
                let (a, b) = (done % n, (done / n) % n);
                assert_eq!(sorted_grids(&s), sorted_grids(&translate(&s, a, b)));
                done += 1;
            }
        }
    }

    proptest! {
        #[test]
        fn transforms_are_invertible_permutations(seed in any::<u64>(), n in prop::sample::select(vec![3usize, 5, 7])) {
            let mut rng = worker_stream(seed, 0);
            let f = sample_error(cd(n), &NoiseModel::Depolarizing { p: 0.2 }, &mut rng).unwrap();
            let s = f.compute_syndrome();
            for q in all_qubits(cd(n)) {
                let p = perspective_for(&s, q);
                prop_assert_eq!(p.vertex_channel().iter().map(|&b| b as usize).sum::<usize>(), s.vertex_defects());
                prop_assert_eq!(p.plaquette_channel().iter().map(|&b| b as usize).sum::<usize>(), s.plaquette_defects());
                prop_assert_eq!(p.original(), s.clone());
            }
        }
    }
}
