use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::PropagationParams;
use crate::constellations::RateAllocation;
use crate::error::{Error, Result};

/// Transmission schemes a sweep can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "proposed")]
    Proposed,
    #[serde(rename = "med")]
    Med,
    #[serde(rename = "zf-ls")]
    ZfLs,
    #[serde(rename = "dpsk")]
    Dpsk,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Med => "med",
            Scheme::ZfLs => "zf-ls",
            Scheme::Dpsk => "dpsk",
        }
    }

    pub(crate) fn id(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown scheme {s:?}")))
    }
}

/// How users are positioned in each drop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// Uniform over the cell annulus; one sweep cell per `M`.
    Uniform,
    /// Every user at the same distance, one sweep cell per grid distance.
    Grid,
    /// User `k` at `distances_m[k]`.
    Fixed,
}

/// A sweep description. Every field has a default, so a config file only
/// lists what it changes. Propagation settings sit at the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub schemes: Vec<Scheme>,
    pub users: usize,
    /// Per-user in-phase bits; empty means one bit for every user.
    pub in_phase_bits: Vec<u32>,
    /// Per-user quadrature bits; empty means one bit for every user.
    pub quadrature_bits: Vec<u32>,
    /// Frame length of the proposed scheme (one reference slot included).
    pub frame_slots: usize,
    pub antennas: Vec<usize>,
    pub placement: Placement,
    pub distances_m: Vec<f64>,
    /// Trial budget per drop and sweep cell.
    pub trials: u64,
    /// Trials added to every drop per round; 0 picks `trials / 8`.
    pub batch_trials: u64,
    pub drops: usize,
    pub seed: u64,
    /// Per-user average power caps (W); a single value applies to all users.
    pub power_w: Vec<f64>,
    pub early_stop: bool,
    /// Stop once the CI half-width is below this fraction of the BER.
    pub relative_half_width: f64,
    pub dpsk_scale: f64,
    pub dpsk_phase_bits: u32,
    pub zf_bits_per_user: u32,
    #[serde(flatten)]
    pub channel: PropagationParams,
    pub csv_path: Option<PathBuf>,
    pub json_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schemes: vec![Scheme::Proposed],
            users: 2,
            in_phase_bits: Vec::new(),
            quadrature_bits: Vec::new(),
            frame_slots: 2,
            antennas: vec![50, 100, 200],
            placement: Placement::Uniform,
            distances_m: Vec::new(),
            trials: 10_000,
            batch_trials: 0,
            drops: 100,
            seed: 1,
            power_w: vec![0.316],
            early_stop: true,
            relative_half_width: 0.1,
            dpsk_scale: crate::detectors::DEFAULT_RING_SCALE,
            dpsk_phase_bits: 3,
            zf_bits_per_user: 6,
            channel: PropagationParams::default(),
            csv_path: None,
            json_path: None,
        }
    }
}

impl RunConfig {
    /// Parses a JSON document, rejecting unknown keys, and validates it.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed JSON: {e}")))?;
        let object = value
            .as_object()
            .ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
        let known = Self::known_keys();
        if let Some(key) = object.keys().find(|k| !known.contains(k.as_str())) {
            return Err(Error::Config(format!("unknown key {key:?}")));
        }
        let config: Self = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn known_keys() -> BTreeSet<String> {
        match serde_json::to_value(Self::default()) {
            Ok(serde_json::Value::Object(map)) => map.keys().cloned().collect(),
            _ => BTreeSet::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.schemes.is_empty() {
            return fail("no schemes selected".into());
        }
        if self.users == 0 {
            return fail("users must be positive".into());
        }
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if self.drops == 0 {
            return fail("drops must be at least 1".into());
        }
        if self.frame_slots < 2 {
            return fail("a frame needs a reference slot and a data slot".into());
        }
        if self.antennas.is_empty() || self.antennas[0] == 0 || self.antennas.windows(2).any(|w| w[0] >= w[1]) {
            return fail("antennas must be a strictly increasing list of positive counts".into());
        }
        if self.power_w.len() != 1 && self.power_w.len() != self.users {
            return fail(format!("{} power caps for {} users", self.power_w.len(), self.users));
        }
        if !self.power_w.iter().all(|p| p.is_finite() && *p > 0.0) {
            return fail("power caps must be positive".into());
        }
        if !(self.relative_half_width > 0.0) {
            return fail("relative_half_width must be positive".into());
        }
        self.channel.validate()?;
        match self.placement {
            Placement::Uniform => {}
            Placement::Grid if self.distances_m.is_empty() => return fail("grid placement needs distances_m".into()),
            Placement::Fixed if self.distances_m.len() != self.users => {
                return fail(format!("fixed placement needs {} distances", self.users))
            }
            _ => {}
        }
        let (lo, hi) = (self.channel.d0, self.channel.cell_radius);
        if self.placement != Placement::Uniform && self.distances_m.iter().any(|d| !(*d >= lo && *d <= hi)) {
            return fail(format!("distances must lie in [{lo}, {hi}] m"));
        }
        self.rate_allocation()?;
        if self.schemes.contains(&Scheme::ZfLs) && (self.zf_bits_per_user == 0 || self.zf_bits_per_user % 2 != 0) {
            return fail("zf_bits_per_user must be even".into());
        }
        if self.schemes.contains(&Scheme::Dpsk) && !(1..=8).contains(&self.dpsk_phase_bits) {
            return fail("dpsk_phase_bits must be between 1 and 8".into());
        }
        Ok(())
    }

    pub fn rate_allocation(&self) -> Result<RateAllocation> {
        let pick = |v: &[u32]| if v.is_empty() { vec![1; self.users] } else { v.to_vec() };
        let (i, q) = (pick(&self.in_phase_bits), pick(&self.quadrature_bits));
        if i.len() != self.users || q.len() != self.users {
            return Err(Error::Config(format!("rate allocation must list {} users", self.users)));
        }
        RateAllocation::new(i, q).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn powers(&self) -> Vec<f64> {
        if self.power_w.len() == 1 {
            vec![self.power_w[0]; self.users]
        } else {
            self.power_w.clone()
        }
    }

    pub fn batch(&self) -> u64 {
        match self.batch_trials {
            0 => self.trials.div_ceil(8),
            b => b.min(self.trials),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_flat_overrides() {
        let c = RunConfig::from_json(r#"{"users": 3, "gamma": 3.0, "schemes": ["proposed", "zf-ls"]}"#).unwrap();
        assert_eq!(c.users, 3);
        assert_eq!(c.channel.gamma, 3.0);
        assert_eq!(c.channel.fc, 3e9);
        assert_eq!(c.schemes, vec![Scheme::Proposed, Scheme::ZfLs]);
        assert_eq!(c.rate_allocation().unwrap().total_bits(), 6);
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            r#"{"trials": 0}"#,
            r#"{"antennas": [100, 50]}"#,
            r#"{"schemes": ["ofdm"]}"#,
            r#"{"unknown": 1}"#,
            r#"{"placement": "grid"}"#,
            r#"{"power_w": [-1.0]}"#,
            r#"[1, 2]"#,
        ] {
            assert!(matches!(RunConfig::from_json(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn scheme_names() {
        for s in [Scheme::Proposed, Scheme::Med, Scheme::ZfLs, Scheme::Dpsk] {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
    }
}
