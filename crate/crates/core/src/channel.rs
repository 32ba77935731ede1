//! Large-scale and small-scale channel model.
//!
//! Path loss in dB is `20 log10(lambda / (4 pi d0)) - 10 gamma log10(d / d0) - psi`
//! with log-normal shadowing `psi ~ N(0, sigma_psi^2)` in dB. Users fall
//! uniformly over the annulus `d0 <= r <= R`. Small-scale fading is i.i.d.
//! Rayleigh and stays constant over one frame.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mustm::SignalMatrix;

const SPEED_OF_LIGHT: f64 = 3e8;
const BOLTZMANN: f64 = 1.380_649e-23;

/// Propagation and receiver parameters. Defaults are the reference
/// simulation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagationParams {
    /// Reference distance (m).
    pub d0: f64,
    /// Carrier frequency (Hz).
    pub fc: f64,
    /// Path-loss exponent.
    pub gamma: f64,
    /// Shadowing standard deviation (dB).
    pub sigma_psi: f64,
    /// Cell radius (m).
    pub cell_radius: f64,
    /// Bandwidth (Hz).
    pub bandwidth: f64,
    /// Receiver noise figure (dB).
    pub noise_figure_db: f64,
    /// Noise temperature (K).
    pub temperature: f64,
    /// Explicit noise power (dBW). When absent the thermal value
    /// `k T B F` is used.
    pub noise_power_dbw: Option<f64>,
}

impl Default for PropagationParams {
    fn default() -> Self {
        Self {
            d0: 100.0,
            fc: 3e9,
            gamma: 3.71,
            sigma_psi: 3.16,
            cell_radius: 1000.0,
            bandwidth: 20e6,
            noise_figure_db: 6.0,
            temperature: 290.0,
            noise_power_dbw: Some(-125.97),
        }
    }
}

impl PropagationParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d0", self.d0),
            ("fc", self.fc),
            ("gamma", self.gamma),
            ("bandwidth", self.bandwidth),
            ("temperature", self.temperature),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.sigma_psi.is_finite() && self.sigma_psi >= 0.0) {
            return Err(Error::Config(format!("sigma_psi must be nonnegative, got {}", self.sigma_psi)));
        }
        if !(self.cell_radius.is_finite() && self.cell_radius >= self.d0) {
            return Err(Error::Config(format!(
                "cell radius {} is below the reference distance {}",
                self.cell_radius, self.d0
            )));
        }
        if !self.noise_figure_db.is_finite() || self.noise_power_dbw.is_some_and(|v| !v.is_finite()) {
            return Err(Error::Config("noise settings must be finite".into()));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.fc
    }
}

/// Path gain in dB at `distance` with shadowing term `psi_db`.
pub fn path_loss_db(distance: f64, params: &PropagationParams, psi_db: f64) -> Result<f64> {
    if !(distance >= params.d0) {
        return Err(Error::InvalidArgument(format!(
            "distance {distance} m is inside the reference distance {} m",
            params.d0
        )));
    }
    let reference = 20.0 * (params.wavelength() / (4.0 * std::f64::consts::PI * params.d0)).log10();
    Ok(reference - 10.0 * params.gamma * (distance / params.d0).log10() - psi_db)
}

/// Linear large-scale gain `beta`.
pub fn path_loss_linear(distance: f64, params: &PropagationParams, psi_db: f64) -> Result<f64> {
    Ok(db_to_linear(path_loss_db(distance, params, psi_db)?))
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `10 log10(k T B F)` in dBW.
pub fn thermal_noise_dbw(params: &PropagationParams) -> f64 {
    10.0 * (BOLTZMANN * params.temperature * params.bandwidth).log10() + params.noise_figure_db
}

/// Receiver noise power in watts.
pub fn noise_power(params: &PropagationParams) -> f64 {
    db_to_linear(params.noise_power_dbw.unwrap_or_else(|| thermal_noise_dbw(params)))
}

/// `k` distances with density proportional to `r` on `[d0, R]`.
pub fn place_users_uniform<R: Rng + ?Sized>(k: usize, params: &PropagationParams, rng: &mut R) -> Vec<f64> {
    let (r0, r1) = (params.d0 * params.d0, params.cell_radius * params.cell_radius);
    (0..k)
        .map(|_| {
            let u: f64 = rng.random();
            (r0 + u * (r1 - r0)).sqrt()
        })
        .collect()
}

/// `k` shadowing terms in dB.
pub fn draw_shadowing<R: Rng + ?Sized>(k: usize, sigma_db: f64, rng: &mut R) -> Vec<f64> {
    (0..k)
        .map(|_| sigma_db * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Linear gains for users at `distances` with shadowing `psi_db`.
pub fn large_scale_gains(distances: &[f64], psi_db: &[f64], params: &PropagationParams) -> Result<Vec<f64>> {
    distances
        .iter()
        .zip(psi_db)
        .map(|(&d, &psi)| path_loss_linear(d, params, psi))
        .collect()
}

/// One circularly-symmetric complex Gaussian sample with variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (0.5 * var).sqrt();
    Complex64::new(
        s * rng.sample::<f64, _>(StandardNormal),
        s * rng.sample::<f64, _>(StandardNormal),
    )
}

/// Small-scale fading `G` (M x K, row-major) plus the large-scale gains.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    g: Vec<Complex64>,
    beta: Vec<f64>,
    antennas: usize,
}

impl ChannelRealization {
    /// Draws `G` with i.i.d. `CN(0, 1)` entries.
    pub fn draw<R: Rng + ?Sized>(antennas: usize, beta: &[f64], rng: &mut R) -> Self {
        let g = (0..antennas * beta.len())
            .map(|_| complex_gaussian(rng, 1.0))
            .collect();
        Self {
            g,
            beta: beta.to_vec(),
            antennas,
        }
    }

    pub fn from_parts(g: Vec<Complex64>, beta: Vec<f64>, antennas: usize) -> Result<Self> {
        if g.len() != antennas * beta.len() {
            return Err(Error::Dimension(format!(
                "{} fading entries for {antennas} x {} users",
                g.len(),
                beta.len()
            )));
        }
        Ok(Self { g, beta, antennas })
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn users(&self) -> usize {
        self.beta.len()
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// `G[m, k]`.
    pub fn fading(&self, m: usize, k: usize) -> Complex64 {
        self.g[m * self.beta.len() + k]
    }

    /// `H = G D^{1/2}` as a dense matrix.
    pub fn h_matrix(&self) -> DMatrix<Complex64> {
        let k = self.users();
        DMatrix::from_fn(self.antennas, k, |m, j| self.fading(m, j) * self.beta[j].sqrt())
    }

    /// Received columns `H x_t + noise` for each transmitted column `x_t`.
    /// Noise is drawn column by column, antenna by antenna.
    pub fn receive<R: Rng + ?Sized>(&self, columns: &[Vec<Complex64>], sigma2: f64, rng: &mut R) -> Vec<Vec<Complex64>> {
        let k = self.users();
        let roots: Vec<f64> = self.beta.iter().map(|b| b.sqrt()).collect();
        columns
            .iter()
            .map(|x| {
                let scaled: Vec<Complex64> = x.iter().zip(&roots).map(|(v, r)| v * r).collect();
                (0..self.antennas)
                    .map(|m| {
                        let row = &self.g[m * k..(m + 1) * k];
                        let signal: Complex64 = row.iter().zip(&scaled).map(|(g, v)| g * v).sum();
                        signal + complex_gaussian(rng, sigma2)
                    })
                    .collect()
            })
            .collect()
    }
}

/// `Y = H X_2 + Xi` as an `M x 2` matrix.
pub fn transmit<R: Rng + ?Sized>(
    x: &SignalMatrix,
    ch: &ChannelRealization,
    sigma2: f64,
    rng: &mut R,
) -> Result<DMatrix<Complex64>> {
    if x.users() != ch.users() {
        return Err(Error::Dimension(format!(
            "block has {} users, channel has {}",
            x.users(),
            ch.users()
        )));
    }
    let cols = ch.receive(&[x.x_column(0), x.x_column(1)], sigma2, rng);
    Ok(DMatrix::from_fn(ch.antennas(), 2, |m, t| cols[t][m]))
}
