//! Shared fixtures for the criterion benchmarks.

use nalgebra::DMatrix;
use nnmimo_core::channel::{transmit, ChannelRealization};
use nnmimo_core::constellations::{build_qam_udcg, RateAllocation};
use nnmimo_core::mustm::{Codebook, SystemProfile};
use nnmimo_core::rng::{substream, Purpose};
use nnmimo_core::{solve_design, Complex64};

/// A designed 4-QAM-per-user codebook and one received block.
pub struct DetectionFixture {
    pub profile: SystemProfile,
    pub codebook: Codebook,
    pub candidates: Vec<DMatrix<Complex64>>,
    pub y: DMatrix<Complex64>,
    pub y1: Vec<Complex64>,
    pub y2: Vec<Complex64>,
}

pub fn detection_fixture(users: usize, antennas: usize) -> DetectionFixture {
    let caps: Vec<f64> = (0..users).map(|k| 1.0 + k as f64).collect();
    let profile = SystemProfile::new(caps, vec![1.0; users], 0.2).expect("valid profile");
    let shape = build_qam_udcg(&RateAllocation::uniform(users, 1, 1).expect("rate"), 1.0).expect("udcg");
    let design = solve_design(&profile, &shape).expect("design");
    let u = shape.with_spacing(design.d_star).expect("spacing");
    let codebook = Codebook::build(&u, &design.p_star, &design.pi_star, &profile).expect("codebook");
    let candidates = codebook
        .entries()
        .iter()
        .map(|x| DMatrix::from_fn(users, 2, |k, t| x.x_rows()[k][t]))
        .collect();
    let mut rng = substream(7, Purpose::Fading, &[users as u64, antennas as u64], 0);
    let channel = ChannelRealization::draw(antennas, profile.betas(), &mut rng);
    let y = transmit(codebook.entry(codebook.len() / 3), &channel, profile.sigma2(), &mut rng).expect("transmit");
    let y1 = y.column(0).iter().copied().collect();
    let y2 = y.column(1).iter().copied().collect();
    DetectionFixture {
        profile,
        codebook,
        candidates,
        y,
        y1,
        y2,
    }
}
