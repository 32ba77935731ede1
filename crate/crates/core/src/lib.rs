//! Non-orthogonal, noncoherent multiuser massive-MIMO uplink.
//!
//! Users superimpose symbols from a uniquely-decomposable constellation group
//! over a reference slot and a data slot; the base station detects the sum
//! constellation point from second-order statistics of the received block,
//! without instantaneous channel knowledge.
//!
//! * [`constellations`]: PAM/QAM uniquely-decomposable groups.
//! * [`mustm`]: codeword construction, Gram matrices, identifiability.
//! * [`optimizer`]: KL-divergence objective and the max-min power/assignment design.
//! * [`channel`]: path loss, shadowing, placement, Rayleigh block fading.
//! * [`detectors`]: noncoherent ML detection and the MED, ZF-LS and DPSK baselines.
//! * [`harness`]: Monte Carlo BER sweeps and CSV/JSON output.

pub mod channel;
pub mod constellations;
pub mod detectors;
pub mod error;
pub mod harness;
pub mod mustm;
pub mod optimizer;
pub mod rng;

pub use num_complex::Complex64;

pub use constellations::{
    build_pam_udcg, build_qam_udcg, normalized_energy, verify_unique_decomposition, Constellation,
    RateAllocation, UdcgDecomposition,
};
pub use error::{Error, Result};
pub use mustm::{encode, gram, verify_identifiability, Codebook, Gram2, Permutation, SignalMatrix, SystemProfile};
pub use optimizer::{kl_breakdown, kl_divergence, solve_design, DesignSolution, KlBreakdown};
