use num_complex::Complex64;

use super::{DetectionResult, PairwiseMlDetector};
use crate::constellations::gray_decode;
use crate::error::{Error, Result};
use crate::mustm::{Gram2, SystemProfile};

/// Ring-to-ring energy ratio of the reference two-user 8-DPSK design.
pub const DEFAULT_RING_SCALE: f64 = 1.765;

/// Multiuser differential PSK baseline.
///
/// User `k` sends a real reference `rho_k` followed by `rho_k exp(j theta_k)`
/// with a Gray-labelled PSK phase. In the received (Gram) domain user `k`
/// occupies a ring of energy `r_k^2 = beta_k rho_k^2` with
/// `r_(k+1)^2 = scale * r_k^2`, so the off-diagonal Gram entry ranges over
/// the sum of scaled PSK rings. Detection reuses the pairwise ML metric with
/// these sums as candidates.
#[derive(Debug, Clone)]
pub struct DpskDesign {
    ring_energy: Vec<f64>,
    amplitudes: Vec<f64>,
    phase_bits: u32,
    detector: PairwiseMlDetector,
}

impl DpskDesign {
    /// Rings sized so the per-slot received energy `sum r_k^2` equals
    /// `target_energy`, shrunk if needed so that no user exceeds its cap.
    pub fn new(profile: &SystemProfile, target_energy: f64, scale: f64, phase_bits: u32) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) || !(target_energy.is_finite() && target_energy > 0.0) {
            return Err(Error::InvalidArgument("scale and energy must be positive".into()));
        }
        if phase_bits == 0 || phase_bits as usize * profile.users() > 24 {
            return Err(Error::InvalidArgument(format!("{phase_bits} phase bits per user")));
        }
        let k = profile.users();
        let weights: Vec<f64> = (0..k).map(|j| scale.powi(j as i32)).collect();
        let caps = profile.received_caps();
        let base = (0..k)
            .map(|j| caps[j] / weights[j])
            .fold(target_energy / weights.iter().sum::<f64>(), f64::min);
        let ring_energy: Vec<f64> = weights.iter().map(|w| base * w).collect();
        let amplitudes = ring_energy
            .iter()
            .zip(profile.betas())
            .map(|(r, b)| (r / b).sqrt())
            .collect();

        let sums = ring_sums(&ring_energy, phase_bits);
        check_distinct(&sums)?;
        let diag = ring_energy.iter().sum::<f64>() + profile.sigma2();
        let grams = sums
            .iter()
            .map(|&c| Gram2 {
                r11: diag,
                r12: c,
                r22: diag,
            })
            .collect();
        Ok(Self {
            detector: PairwiseMlDetector::from_grams(grams, phase_bits * k as u32)?,
            ring_energy,
            amplitudes,
            phase_bits,
        })
    }

    pub fn users(&self) -> usize {
        self.ring_energy.len()
    }

    pub fn ring_energy(&self) -> &[f64] {
        &self.ring_energy
    }

    pub fn bits_per_frame(&self) -> u32 {
        self.phase_bits * self.users() as u32
    }

    /// Reference and data columns for a frame label (user 1 most significant).
    pub fn modulate(&self, index: usize) -> [Vec<Complex64>; 2] {
        let phases = phase_indices(index, self.users(), self.phase_bits);
        let order = f64::from(1u32 << self.phase_bits);
        let reference = self.amplitudes.iter().map(|&a| Complex64::new(a, 0.0)).collect();
        let data = self
            .amplitudes
            .iter()
            .zip(&phases)
            .map(|(&a, &i)| Complex64::from_polar(a, 2.0 * std::f64::consts::PI * i as f64 / order))
            .collect();
        [reference, data]
    }

    pub fn detect(&self, y1: &[Complex64], y2: &[Complex64]) -> DetectionResult {
        self.detector.detect(y1, y2)
    }
}

fn phase_indices(mut index: usize, users: usize, bits: u32) -> Vec<usize> {
    let mut out = vec![0; users];
    for k in (0..users).rev() {
        out[k] = gray_decode(index & ((1 << bits) - 1));
        index >>= bits;
    }
    out
}

fn ring_sums(ring_energy: &[f64], bits: u32) -> Vec<Complex64> {
    let users = ring_energy.len();
    let order = 1usize << bits;
    (0..order.pow(users as u32))
        .map(|index| {
            phase_indices(index, users, bits)
                .iter()
                .zip(ring_energy)
                .map(|(&i, &r)| Complex64::from_polar(r, 2.0 * std::f64::consts::PI * i as f64 / order as f64))
                .sum()
        })
        .collect()
}

fn check_distinct(sums: &[Complex64]) -> Result<()> {
    let scale = sums.iter().map(|s| s.norm()).fold(f64::MIN_POSITIVE, f64::max);
    for (i, a) in sums.iter().enumerate() {
        if let Some(j) = sums[i + 1..].iter().position(|b| (a - b).norm() <= 1e-9 * scale) {
            return Err(Error::DegenerateDesign(format!(
                "frames {i} and {} share the sum point {a}",
                i + 1 + j
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelRealization;
    use crate::constellations::gray_encode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_scale_collides() {
        let profile = SystemProfile::normalized(2, 0.1).unwrap();
        assert!(matches!(
            DpskDesign::new(&profile, 1.0, 1.0, 3),
            Err(Error::DegenerateDesign(_))
        ));
        assert!(DpskDesign::new(&profile, 1.0, DEFAULT_RING_SCALE, 3).is_ok());
    }

    #[test]
    fn energy_matching_and_caps() {
        let profile = SystemProfile::new(vec![1.0, 1.0], vec![1.0, 1.0], 0.1).unwrap();
        let d = DpskDesign::new(&profile, 1.0, DEFAULT_RING_SCALE, 3).unwrap();
        assert!((d.ring_energy().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((d.ring_energy()[1] / d.ring_energy()[0] - DEFAULT_RING_SCALE).abs() < 1e-12);
        let capped = DpskDesign::new(&profile, 100.0, DEFAULT_RING_SCALE, 3).unwrap();
        assert!((capped.ring_energy()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_user_is_differential_phase_detection() {
        let profile = SystemProfile::normalized(1, 0.01).unwrap();
        let d = DpskDesign::new(&profile, 1.0, DEFAULT_RING_SCALE, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for index in 0..8 {
            let ch = ChannelRealization::draw(4, profile.betas(), &mut rng);
            let y = ch.receive(&d.modulate(index), profile.sigma2(), &mut rng);
            let cross: Complex64 = y[0].iter().zip(&y[1]).map(|(a, b)| a.conj() * b).sum();
            let step = std::f64::consts::PI / 4.0;
            let phase = (cross.arg() / step).round().rem_euclid(8.0) as usize;
            assert_eq!(d.detect(&y[0], &y[1]).index, gray_encode(phase));
        }
    }
}
