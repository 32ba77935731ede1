use num_complex::Complex64;

use super::DetectionResult;
use crate::error::{Error, Result};
use crate::mustm::SystemProfile;

/// One-shot energy detector with on/off amplitude levels.
///
/// User `k` sends either `0` or `a_k` in a slot. The received energy per
/// antenna is `sum_k beta_k |x_k|^2` plus noise, so the levels are chosen in
/// the received domain as `g_k = 2^r g` where `r` is the user's rank in
/// `P beta`. The sum set is then the uniform ladder `{0, g, ..., (2^K - 1) g}`
/// and `g` is the largest spacing the average-power caps `a_k^2 / 2 <= P_k`
/// allow.
#[derive(Debug, Clone, PartialEq)]
pub struct MedDesign {
    rank: Vec<u32>,
    step: f64,
    amplitudes: Vec<f64>,
    sigma2: f64,
}

impl MedDesign {
    pub fn new(profile: &SystemProfile) -> Result<Self> {
        let k = profile.users();
        if k > 30 {
            return Err(Error::InvalidArgument(format!("{k} users is too many for an energy ladder")));
        }
        let caps = profile.received_caps();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| caps[a].total_cmp(&caps[b]).then(a.cmp(&b)));
        let mut rank = vec![0; k];
        for (r, &user) in order.iter().enumerate() {
            rank[user] = r as u32;
        }
        // On-level energy may reach 2 P beta because the average is half of it.
        let step = (0..k)
            .map(|user| 2.0 * caps[user] / f64::from(1u32 << rank[user]))
            .fold(f64::INFINITY, f64::min);
        let amplitudes = (0..k)
            .map(|user| (step * f64::from(1u32 << rank[user]) / profile.betas()[user]).sqrt())
            .collect();
        Ok(Self {
            rank,
            step,
            amplitudes,
            sigma2: profile.sigma2(),
        })
    }

    pub fn users(&self) -> usize {
        self.rank.len()
    }

    /// Transmit amplitude of each user when its bit is one.
    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    /// Spacing of the received energy ladder.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Transmitted slot for one bit per user.
    pub fn modulate(&self, bits: &[bool]) -> Vec<Complex64> {
        bits.iter()
            .zip(&self.amplitudes)
            .map(|(&b, &a)| Complex64::new(if b { a } else { 0.0 }, 0.0))
            .collect()
    }

    /// Nearest ladder point to `|y|^2 / M - sigma^2`; one bit per user.
    pub fn detect(&self, y: &[Complex64]) -> DetectionResult {
        let z = y.iter().map(|v| v.norm_sqr()).sum::<f64>() / y.len() as f64 - self.sigma2;
        let top = (1u64 << self.users()) - 1;
        let level = (z / self.step).round().clamp(0.0, top as f64) as u64;
        DetectionResult {
            index: level as usize,
            bits: self.rank.iter().map(|&r| (level >> r) & 1 == 1).collect(),
            metric: z,
        }
    }
}
