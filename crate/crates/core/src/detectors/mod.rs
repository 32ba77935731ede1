//! Noncoherent ML detection and the baseline receivers.

mod dpsk;
mod med;
mod ml;
mod zf;

pub use dpsk::{DpskDesign, DEFAULT_RING_SCALE};
pub use med::MedDesign;
pub use ml::{ml_noncoherent_generic, ml_noncoherent_pairwise, PairwiseMlDetector};
pub use zf::ZfLsDesign;

use serde::{Deserialize, Serialize};

/// A detector decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub index: usize,
    pub bits: Vec<bool>,
    pub metric: f64,
}
