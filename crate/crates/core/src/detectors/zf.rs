use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::DetectionResult;
use crate::constellations::{gray_decode, gray_encode};
use crate::error::{Error, Result};

/// Coherent baseline: orthogonal DFT pilots, least-squares channel estimate,
/// zero-forcing equalization and per-user square QAM slicing.
///
/// A frame is `K` pilot slots followed by one data slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ZfLsDesign {
    powers: Vec<f64>,
    rail_bits: u32,
    deltas: Vec<f64>,
}

impl ZfLsDesign {
    /// `bits_per_user` must be even (square QAM). Every symbol and pilot of
    /// user `k` has average power `powers[k]`.
    pub fn new(powers: &[f64], bits_per_user: u32) -> Result<Self> {
        if powers.is_empty() || !powers.iter().all(|p| p.is_finite() && *p > 0.0) {
            return Err(Error::InvalidArgument("powers must be positive".into()));
        }
        if bits_per_user == 0 || bits_per_user % 2 != 0 || bits_per_user > 16 {
            return Err(Error::InvalidArgument(format!(
                "square QAM needs an even bit count, got {bits_per_user}"
            )));
        }
        let rail_bits = bits_per_user / 2;
        let levels = f64::from(1u32 << rail_bits);
        // Average energy of a square QAM with spacing 2 delta: 2 (L^2 - 1) delta^2 / 3.
        let unit = 2.0 * (levels * levels - 1.0) / 3.0;
        Ok(Self {
            powers: powers.to_vec(),
            rail_bits,
            deltas: powers.iter().map(|p| (p / unit).sqrt()).collect(),
        })
    }

    pub fn users(&self) -> usize {
        self.powers.len()
    }

    pub fn bits_per_user(&self) -> u32 {
        2 * self.rail_bits
    }

    /// Pilot column `t` (one entry per user): `sqrt(P_k) exp(-j 2 pi k t / K)`.
    pub fn pilot_column(&self, t: usize) -> Vec<Complex64> {
        let k = self.users() as f64;
        self.powers
            .iter()
            .enumerate()
            .map(|(user, p)| {
                Complex64::from_polar(p.sqrt(), -2.0 * std::f64::consts::PI * user as f64 * t as f64 / k)
            })
            .collect()
    }

    fn rail_value(&self, user: usize, label: usize) -> f64 {
        let level = gray_decode(label) as f64;
        let top = f64::from((1u32 << self.rail_bits) - 1);
        (2.0 * level - top) * self.deltas[user]
    }

    /// QAM symbol of `user` for a label `[in-phase | quadrature]`.
    pub fn symbol(&self, user: usize, label: usize) -> Complex64 {
        let mask = (1 << self.rail_bits) - 1;
        Complex64::new(
            self.rail_value(user, label >> self.rail_bits),
            self.rail_value(user, label & mask),
        )
    }

    /// Data column for the users' bits, concatenated user by user.
    pub fn modulate(&self, bits: &[bool]) -> Vec<Complex64> {
        let n = self.bits_per_user() as usize;
        bits.chunks(n)
            .enumerate()
            .map(|(user, chunk)| {
                let label = chunk.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b));
                self.symbol(user, label)
            })
            .collect()
    }

    fn slice_rail(&self, user: usize, v: f64) -> usize {
        let top = (1usize << self.rail_bits) - 1;
        let level = ((v / self.deltas[user] + top as f64) / 2.0).round().clamp(0.0, top as f64);
        gray_encode(level as usize)
    }

    /// Estimates `H` from the `K` received pilot columns and equalizes the
    /// data column. A rank-deficient estimate yields `None`.
    pub fn equalize(&self, y_pilot: &[Vec<Complex64>], y_data: &[Complex64]) -> Option<Vec<Complex64>> {
        let k = self.users();
        let m = y_data.len();
        let mut h = DMatrix::<Complex64>::zeros(m, k);
        for (t, col) in y_pilot.iter().enumerate() {
            let pilot = self.pilot_column(t);
            for user in 0..k {
                let w = pilot[user].conj() / (k as f64 * self.powers[user]);
                for (row, y) in col.iter().enumerate() {
                    h[(row, user)] += y * w;
                }
            }
        }
        let gram = h.adjoint() * &h;
        let rhs = h.adjoint() * DVector::from_column_slice(y_data);
        let x = gram.cholesky()?.solve(&rhs);
        x.iter().all(|v| v.re.is_finite() && v.im.is_finite()).then(|| x.iter().copied().collect())
    }

    /// Full receiver. An erasure returns all-zero bits with an infinite metric.
    pub fn detect(&self, y_pilot: &[Vec<Complex64>], y_data: &[Complex64]) -> DetectionResult {
        let n = self.bits_per_user();
        let width = self.users() as u32 * n;
        let Some(x) = self.equalize(y_pilot, y_data) else {
            return DetectionResult {
                index: 0,
                bits: vec![false; width as usize],
                metric: f64::INFINITY,
            };
        };
        let mut index = 0usize;
        let mut residual = 0.0;
        for (user, v) in x.iter().enumerate() {
            let label = (self.slice_rail(user, v.re) << self.rail_bits) | self.slice_rail(user, v.im);
            residual += (v - self.symbol(user, label)).norm_sqr();
            index = (index << n) | label;
        }
        DetectionResult {
            index,
            bits: (0..width).rev().map(|b| (index >> b) & 1 == 1).collect(),
            metric: residual,
        }
    }
}
