use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Placement, RunConfig, Scheme};
use super::output::wilson_interval;
use crate::channel::{draw_shadowing, large_scale_gains, noise_power, place_users_uniform, ChannelRealization};
use crate::constellations::{build_qam_udcg, UdcgDecomposition};
use crate::detectors::{DpskDesign, MedDesign, PairwiseMlDetector, ZfLsDesign};
use crate::error::{Error, Result};
use crate::mustm::{Codebook, SystemProfile};
use crate::optimizer::solve_design;
use crate::rng::{substream, Purpose};

/// Bit-error counts of one scheme, antenna count, distance cell and drop.
///
/// Per-user counts are indexed by rank in `P_k beta_k` (weakest first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub scheme: Scheme,
    pub antennas: usize,
    pub distance_m: Option<f64>,
    pub drop: usize,
    pub trials: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub user_bits: Vec<u64>,
    pub user_errors: Vec<u64>,
}

impl BerRecord {
    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / self.bits as f64
    }

    pub fn per_user_ber(&self) -> Vec<f64> {
        self.user_errors
            .iter()
            .zip(&self.user_bits)
            .map(|(&e, &n)| e as f64 / n as f64)
            .collect()
    }
}

/// Runs every cell of the sweep on the global rayon pool.
pub fn run_sweep(config: &RunConfig) -> Result<Vec<BerRecord>> {
    config.validate()?;
    let rate = config.rate_allocation()?;
    let shape = build_qam_udcg(&rate, 1.0).map_err(|e| Error::Config(e.to_string()))?;
    let cells: Vec<Option<f64>> = match config.placement {
        Placement::Grid => config.distances_m.iter().copied().map(Some).collect(),
        Placement::Uniform | Placement::Fixed => vec![None],
    };
    let mut records = Vec::new();
    for (cell, &distance) in cells.iter().enumerate() {
        let profiles = (0..config.drops)
            .map(|drop| draw_profile(config, cell, distance, drop))
            .collect::<Result<Vec<_>>>()?;
        for &scheme in &config.schemes {
            let runners = profiles
                .iter()
                .map(|p| Runner::build(scheme, config, &shape, p))
                .collect::<Result<Vec<_>>>()?;
            for (m_index, &antennas) in config.antennas.iter().enumerate() {
                let key = [scheme.id(), m_index as u64, cell as u64];
                let tallies = run_cell(config, &runners, &profiles, antennas, key);
                records.extend(tallies.into_iter().enumerate().map(|(drop, t)| BerRecord {
                    scheme,
                    antennas,
                    distance_m: distance,
                    drop,
                    trials: t.trials,
                    bits: t.user_bits.iter().sum(),
                    bit_errors: t.user_errors.iter().sum(),
                    user_bits: t.user_bits,
                    user_errors: t.user_errors,
                }));
            }
        }
    }
    Ok(records)
}

/// [`run_sweep`] on a dedicated pool of `threads` workers (`None` keeps the
/// global pool). Output does not depend on the thread count.
pub fn run_sweep_with_threads(config: &RunConfig, threads: Option<usize>) -> Result<Vec<BerRecord>> {
    match threads {
        None => run_sweep(config),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| run_sweep(config)),
    }
}

/// Large-scale profile of one drop, users sorted by `P_k beta_k`.
fn draw_profile(config: &RunConfig, cell: usize, distance: Option<f64>, drop: usize) -> Result<SystemProfile> {
    let k = config.users;
    let path = [cell as u64, drop as u64];
    let distances = match (config.placement, distance) {
        (Placement::Grid, Some(d)) => vec![d; k],
        (Placement::Fixed, _) => config.distances_m.clone(),
        _ => place_users_uniform(k, &config.channel, &mut substream(config.seed, Purpose::Placement, &path, 0)),
    };
    let psi = draw_shadowing(
        k,
        config.channel.sigma_psi,
        &mut substream(config.seed, Purpose::Shadowing, &path, 0),
    );
    let betas = large_scale_gains(&distances, &psi, &config.channel)?;
    let profile = SystemProfile::new(config.powers(), betas, noise_power(&config.channel))?;
    Ok(profile.sorted().0)
}

#[derive(Debug, Clone)]
struct Tally {
    trials: u64,
    user_bits: Vec<u64>,
    user_errors: Vec<u64>,
}

fn run_cell(
    config: &RunConfig,
    runners: &[Runner],
    profiles: &[SystemProfile],
    antennas: usize,
    key: [u64; 3],
) -> Vec<Tally> {
    let k = config.users;
    let mut tallies = vec![
        Tally {
            trials: 0,
            user_bits: vec![0; k],
            user_errors: vec![0; k],
        };
        runners.len()
    ];
    let batch = config.batch();
    let mut done = 0;
    while done < config.trials {
        let target = (done + batch).min(config.trials);
        tallies.par_iter_mut().enumerate().for_each(|(drop, tally)| {
            let path = [key[0], key[1], key[2], drop as u64];
            for trial in done..target {
                let mut rngs = TrialRngs {
                    fading: substream(config.seed, Purpose::Fading, &path, trial),
                    noise: substream(config.seed, Purpose::Noise, &path, trial),
                    bits: substream(config.seed, Purpose::Bits, &path, trial),
                };
                runners[drop].trial(antennas, &profiles[drop], &mut rngs, tally);
                tally.trials += 1;
            }
        });
        done = target;
        if config.early_stop {
            let errors: u64 = tallies.iter().flat_map(|t| &t.user_errors).sum();
            let bits: u64 = tallies.iter().flat_map(|t| &t.user_bits).sum();
            if errors > 0 {
                let (lo, hi) = wilson_interval(errors, bits);
                let ber = errors as f64 / bits as f64;
                if (hi - lo) / 2.0 < config.relative_half_width * ber {
                    break;
                }
            }
        }
    }
    tallies
}

struct TrialRngs {
    fading: ChaCha8Rng,
    noise: ChaCha8Rng,
    bits: ChaCha8Rng,
}

/// Per-user bit masks for labels of `widths` (user 1 most significant).
fn user_masks(widths: &[u32]) -> Vec<u64> {
    let total: u32 = widths.iter().sum();
    let mut offset = total;
    widths
        .iter()
        .map(|&w| {
            offset -= w;
            ((1u64 << w) - 1) << offset
        })
        .collect()
}

fn count(masks: &[u64], sent: u64, decided: u64, tally: &mut Tally) {
    let diff = sent ^ decided;
    for (k, &mask) in masks.iter().enumerate() {
        tally.user_bits[k] += u64::from(mask.count_ones());
        tally.user_errors[k] += u64::from((diff & mask).count_ones());
    }
}

fn bits_to_label(bits: &[bool]) -> u64 {
    bits.iter().fold(0, |acc, &b| (acc << 1) | u64::from(b))
}

enum Runner {
    Proposed {
        codebook: Codebook,
        detector: PairwiseMlDetector,
        data_slots: usize,
        masks: Vec<u64>,
    },
    Med {
        design: MedDesign,
        slots: usize,
        masks: Vec<u64>,
    },
    ZfLs {
        design: ZfLsDesign,
        masks: Vec<u64>,
    },
    Dpsk {
        design: DpskDesign,
        masks: Vec<u64>,
    },
}

impl Runner {
    fn build(scheme: Scheme, config: &RunConfig, shape: &UdcgDecomposition, profile: &SystemProfile) -> Result<Self> {
        let k = profile.users();
        Ok(match scheme {
            Scheme::Proposed => {
                let sol = solve_design(profile, shape)?;
                let u = shape.with_spacing(sol.d_star)?;
                let codebook = Codebook::build(&u, &sol.p_star, &sol.pi_star, profile)?;
                let detector = PairwiseMlDetector::new(&codebook, profile);
                // Label bits belong to sub-constellations; map them to users.
                let inv = sol.pi_star.inverse();
                let widths: Vec<u32> = (0..k).map(|j| u.user(j).bits()).collect();
                let by_sub = user_masks(&widths);
                let mut masks = vec![0; k];
                for (j, m) in by_sub.into_iter().enumerate() {
                    masks[inv.apply(j)] = m;
                }
                Runner::Proposed {
                    codebook,
                    detector,
                    data_slots: config.frame_slots - 1,
                    masks,
                }
            }
            Scheme::Med => Runner::Med {
                design: MedDesign::new(profile)?,
                slots: config.frame_slots,
                masks: user_masks(&vec![1; k]),
            },
            Scheme::ZfLs => Runner::ZfLs {
                design: ZfLsDesign::new(profile.powers(), config.zf_bits_per_user)?,
                masks: user_masks(&vec![config.zf_bits_per_user; k]),
            },
            Scheme::Dpsk => {
                let sol = solve_design(profile, shape)?;
                let energy = sol.d_star * sol.energies.iter().map(|e| e.sqrt()).sum::<f64>();
                Runner::Dpsk {
                    design: DpskDesign::new(profile, energy, config.dpsk_scale, config.dpsk_phase_bits)?,
                    masks: user_masks(&vec![config.dpsk_phase_bits; k]),
                }
            }
        })
    }

    fn trial(&self, antennas: usize, profile: &SystemProfile, rngs: &mut TrialRngs, tally: &mut Tally) {
        let sigma2 = profile.sigma2();
        let channel = ChannelRealization::draw(antennas, profile.betas(), &mut rngs.fading);
        match self {
            Runner::Proposed {
                codebook,
                detector,
                data_slots,
                masks,
            } => {
                let sent: Vec<usize> = (0..*data_slots).map(|_| rngs.bits.random_range(0..codebook.len())).collect();
                let y = channel.receive(&codebook.frame_columns(&sent), sigma2, &mut rngs.noise);
                for (t, &s) in sent.iter().enumerate() {
                    let decided = detector.detect(&y[0], &y[t + 1]).index;
                    count(masks, s as u64, decided as u64, tally);
                }
            }
            Runner::Med { design, slots, masks } => {
                let bits: Vec<Vec<bool>> = (0..*slots)
                    .map(|_| (0..design.users()).map(|_| rngs.bits.random()).collect())
                    .collect();
                let columns: Vec<_> = bits.iter().map(|b| design.modulate(b)).collect();
                let y = channel.receive(&columns, sigma2, &mut rngs.noise);
                for (b, col) in bits.iter().zip(&y) {
                    count(masks, bits_to_label(b), bits_to_label(&design.detect(col).bits), tally);
                }
            }
            Runner::ZfLs { design, masks } => {
                let width = design.users() * design.bits_per_user() as usize;
                let bits: Vec<bool> = (0..width).map(|_| rngs.bits.random()).collect();
                let mut columns: Vec<_> = (0..design.users()).map(|t| design.pilot_column(t)).collect();
                columns.push(design.modulate(&bits));
                let y = channel.receive(&columns, sigma2, &mut rngs.noise);
                let decided = design.detect(&y[..design.users()], &y[design.users()]);
                count(masks, bits_to_label(&bits), bits_to_label(&decided.bits), tally);
            }
            Runner::Dpsk { design, masks } => {
                let index = rngs.bits.random_range(0..1usize << design.bits_per_frame());
                let y = channel.receive(&design.modulate(index), sigma2, &mut rngs.noise);
                let decided = design.detect(&y[0], &y[1]).index;
                count(masks, index as u64, decided as u64, tally);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(schemes: Vec<Scheme>) -> RunConfig {
        RunConfig {
            schemes,
            users: 2,
            antennas: vec![16, 32],
            trials: 40,
            batch_trials: 10,
            drops: 3,
            seed: 9,
            ..RunConfig::default()
        }
    }

    #[test]
    fn masks_cover_labels() {
        assert_eq!(user_masks(&[2, 1, 3]), vec![0b110000, 0b001000, 0b000111]);
    }

    #[test]
    fn every_scheme_runs_and_counts_bits() {
        let config = small(vec![Scheme::Proposed, Scheme::Med, Scheme::ZfLs, Scheme::Dpsk]);
        let records = run_sweep(&config).unwrap();
        assert_eq!(records.len(), 4 * 2 * 3);
        for r in &records {
            let per_trial = match r.scheme {
                Scheme::Proposed => 4,
                Scheme::Med => 4,
                Scheme::ZfLs => 12,
                Scheme::Dpsk => 6,
            };
            assert_eq!(r.bits, r.trials * per_trial, "{:?}", r.scheme);
            assert!(r.bit_errors <= r.bits);
            assert_eq!(r.user_bits.len(), 2);
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let config = small(vec![Scheme::Proposed, Scheme::Med]);
        let one = run_sweep_with_threads(&config, Some(1)).unwrap();
        let three = run_sweep_with_threads(&config, Some(3)).unwrap();
        assert_eq!(one, three);
    }

    #[test]
    fn grid_and_fixed_placements() {
        let mut config = small(vec![Scheme::Proposed]);
        config.placement = Placement::Grid;
        config.distances_m = vec![200.0, 900.0];
        let records = run_sweep(&config).unwrap();
        assert_eq!(records.iter().filter(|r| r.distance_m == Some(900.0)).count(), 6);

        config.placement = Placement::Fixed;
        config.distances_m = vec![500.0, 900.0];
        assert!(run_sweep(&config).unwrap().iter().all(|r| r.distance_m.is_none()));
    }
}
