//! Closed-form low-error-rate fail rates for depolarizing and bit-flip noise.
//!
//! Combinatorial prefactors and the chain-count ratios `f` are evaluated as
//! exact big rationals and converted to `f64` only at the end.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::CodeDistance;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("rate {rate} outside measured curve support [{lo}, {hi}]")]
    OutOfRange { rate: f64, lo: f64, hi: f64 },
    #[error("curve needs at least one point")]
    EmptyCurve,
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

fn big(n: u64) -> BigUint {
    BigUint::from(n)
}

/// Expected number of failing length-`⌈d/2⌉` single-line chains for the
/// minimal-correction-chain decoder: `4d(1+k)·C(d,k)`.
pub fn mcc_failing_chain_weight(d: CodeDistance) -> BigUint {
    let (n, k) = (d.get() as u64, d.half_ceil() as u64);
    big(4 * n * (1 + k)) * binomial(n, k)
}

/// MWPM counterpart: `4d·2^k·C(d,k)`.
pub fn mwpm_failing_chain_weight(d: CodeDistance) -> BigUint {
    let (n, k) = (d.get() as u64, d.half_ceil() as u64);
    big(4 * n) * (BigUint::one() << k as usize) * binomial(n, k)
}

/// Denominator used by the tabulated `f` values: `C(2d², k)·k³`.
pub fn table_normalizer(d: CodeDistance) -> BigUint {
    let k = d.half_ceil() as u64;
    binomial(d.num_qubits() as u64, k) * big(k * k * k)
}

/// Total number of weight-`k` Pauli configurations: `C(2d², k)·3^k`.
pub fn configuration_count(d: CodeDistance) -> BigUint {
    let k = d.half_ceil() as u64;
    binomial(d.num_qubits() as u64, k) * BigUint::from(3u32).pow(k as u32)
}

fn power_law(prefactor: BigUint, rate: f64, k: usize) -> f64 {
    prefactor.to_f64().unwrap_or(f64::INFINITY) * rate.powi(k as i32)
}

/// `P_L` of the minimal-correction-chain decoder to lowest order in `p`.
pub fn p_l_mcc(d: CodeDistance, p: f64) -> f64 {
    power_law(mcc_failing_chain_weight(d), p / 3.0, d.half_ceil())
}

/// `P_L` of the MWPM decoder to lowest order in `p`.
pub fn p_l_mwpm(d: CodeDistance, p: f64) -> f64 {
    power_law(mwpm_failing_chain_weight(d), p / 3.0, d.half_ceil())
}

/// Bit-flip noise fail rate to lowest order: `2d·C(d,k)·p^k`.
pub fn p_l_bitflip(d: CodeDistance, p: f64) -> f64 {
    let (n, k) = (d.get() as u64, d.half_ceil());
    power_law(big(2 * n) * binomial(n, k as u64), p, k)
}

pub fn f_mcc_exact(d: CodeDistance) -> BigRational {
    BigRational::new(mcc_failing_chain_weight(d).into(), table_normalizer(d).into())
}

pub fn f_mwpm_exact(d: CodeDistance) -> BigRational {
    BigRational::new(mwpm_failing_chain_weight(d).into(), table_normalizer(d).into())
}

pub fn f_mcc(d: CodeDistance) -> f64 {
    ratio_to_f64(&f_mcc_exact(d))
}

pub fn f_mwpm(d: CodeDistance) -> f64 {
    ratio_to_f64(&f_mwpm_exact(d))
}

/// Linear interpolation of a measured `p -> P_S` curve, squared:
/// `P_S ≈ P_{S,X}(rate)²`.
pub fn mwpm_success_approx(curve: &[(f64, f64)], rate: f64) -> Result<f64, AnalyticError> {
    if curve.is_empty() {
        return Err(AnalyticError::EmptyCurve);
    }
    let mut pts: Vec<(f64, f64)> = curve.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (lo, hi) = (pts[0].0, pts[pts.len() - 1].0);
    if rate < lo || rate > hi {
        return Err(AnalyticError::OutOfRange { rate, lo, hi });
    }
    let value = if pts.len() == 1 {
        pts[0].1
    } else {
        let idx = pts.partition_point(|&(x, _)| x < rate).max(1).min(pts.len() - 1);
        let (x0, y0) = pts[idx - 1];
        let (x1, y1) = pts[idx];
        if x1 == x0 {
            y1
        } else {
            y0 + (y1 - y0) * (rate - x0) / (x1 - x0)
        }
    };
    Ok(value * value)
}

/// Effective per-species rate for the squared-bit-flip approximation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectiveRate {
    /// `2p/3`: depolarizing noise viewed as independent X and Z channels.
    TwoThirds,
    /// `p/2`: `p_z = 0` biased noise.
    Half,
}

impl EffectiveRate {
    pub fn apply(self, p: f64) -> f64 {
        match self {
            EffectiveRate::TwoThirds => 2.0 * p / 3.0,
            EffectiveRate::Half => p / 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticRates {
    pub d: usize,
    pub p: f64,
    pub p_l_mcc: f64,
    pub p_l_mwpm: f64,
    pub p_l_bitflip: f64,
    pub f_mcc: f64,
    pub f_mwpm: f64,
}

impl AsymptoticRates {
    pub fn new(d: CodeDistance, p: f64) -> Self {
        Self {
            d: d.get(),
            p,
            p_l_mcc: p_l_mcc(d, p),
            p_l_mwpm: p_l_mwpm(d, p),
            p_l_bitflip: p_l_bitflip(d, p),
            f_mcc: f_mcc(d),
            f_mwpm: f_mwpm(d),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(n: usize) -> CodeDistance {
        CodeDistance::new(n).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 3), big(10));
        assert_eq!(binomial(50, 3), big(19600));
        assert_eq!(binomial(98, 4), big(3_612_280));
        assert_eq!(binomial(3, 5), big(0));
    }

    #[test]
    fn zero_rate() {
        for n in [3, 5, 7] {
            assert_eq!(p_l_mcc(d(n), 0.0), 0.0);
            assert_eq!(p_l_mwpm(d(n), 0.0), 0.0);
            assert_eq!(p_l_bitflip(d(n), 0.0), 0.0);
        }
    }

    #[test]
    fn hand_evaluated_values() {
        assert!(rel(p_l_mcc(d(5), 3e-3), 8.0e-7) < 1e-12);
        assert!(rel(p_l_bitflip(d(5), 0.01), 1.0e-4) < 1e-12);
        assert_eq!(f_mcc_exact(d(5)), BigRational::new(800.into(), 529_200.into()));
    }

    #[test]
    fn ratios_and_scaling() {
        for n in [3usize, 5, 7, 9, 11] {
            let dd = d(n);
            let k = dd.half_ceil() as i32;
            let p = 0.01;
            assert!(rel(p_l_mcc(dd, 2.0 * p) / p_l_mcc(dd, p), 2f64.powi(k)) < 1e-12);
            let expected = 2f64.powi(k) / (1.0 + k as f64);
            assert!(rel(p_l_mwpm(dd, p) / p_l_mcc(dd, p), expected) < 1e-12);
            assert!(rel(p_l_mwpm(dd, p), 2.0 * p_l_bitflip(dd, 2.0 * p / 3.0)) < 1e-12);
            assert!(p_l_mcc(dd, p) <= p_l_mwpm(dd, p));
        }
        assert!(rel(p_l_mwpm(d(5), 0.01) / p_l_mcc(d(5), 0.01), 2.0) < 1e-12);
        assert!(rel(p_l_mwpm(d(7), 0.01) / p_l_mcc(d(7), 0.01), 3.2) < 1e-12);
    }

    #[test]
    fn tabulated_chain_ratios() {
        assert!(rel(f_mcc(d(5)), 1.5117e-3) < 1e-4);
        assert!(rel(f_mcc(d(7)), 2.1195e-5) < 1e-4);
        assert!(rel(f_mcc(d(9)), 2.492e-7) < 2e-4);
        assert!(rel(f_mwpm(d(5)), 1600.0 / 529_200.0) < 1e-12);
    }

    #[test]
    fn f_mcc_strictly_decreasing() {
        let fs: Vec<f64> = [3, 5, 7, 9, 11].iter().map(|&n| f_mcc(d(n))).collect();
        assert!(fs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn success_approximation() {
        let ones = [(0.0, 1.0), (0.3, 1.0)];
        assert_eq!(mwpm_success_approx(&ones, 0.1).unwrap(), 1.0);
        let curve = [(0.05, 0.95), (0.1, 0.9), (0.15, 0.8)];
        assert!((mwpm_success_approx(&curve, 0.1).unwrap() - 0.81).abs() < 1e-12);
        assert!((mwpm_success_approx(&curve, 0.125).unwrap() - 0.85f64.powi(2)).abs() < 1e-12);
        assert!(matches!(mwpm_success_approx(&curve, 0.2), Err(AnalyticError::OutOfRange { .. })));
        assert!((EffectiveRate::TwoThirds.apply(0.15) - 0.1).abs() < 1e-15);
        assert_eq!(EffectiveRate::Half.apply(0.2), 0.1);
    }
}
