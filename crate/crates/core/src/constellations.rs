//! PAM and QAM uniquely-decomposable constellation groups (UDCG).
//!
//! A group of sub-constellations `X_1, ..., X_K` is uniquely decomposable when
//! the map `(x_1, ..., x_K) -> x_1 + ... + x_K` is injective over the
//! Cartesian product. The canonical construction gives user `k` a PAM
//! alphabet whose spacing is `2^(N_1 + ... + N_(k-1))` times the grid spacing
//! `d`, so that the sum of all users' symbols is a regular `2^N`-ary PAM
//! grid and each user's symbol is one "digit" of the sum. QAM groups apply
//! the same construction independently to the in-phase and quadrature rails.
//!
//! Bits are labelled per user as `[in-phase bits | quadrature bits]`, each
//! rail Gray coded over its levels in ascending order.

use std::cmp::Ordering;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of Cartesian-product points enumerated by the
/// uniqueness verifier.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 20;

const REL_TOL: f64 = 1e-12;

/// Lexicographic order on `(re, im)`.
pub fn canonical_cmp(a: &Complex64, b: &Complex64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

pub fn gray_encode(index: usize) -> usize {
    index ^ (index >> 1)
}

pub fn gray_decode(mut label: usize) -> usize {
    let mut index = label;
    label >>= 1;
    while label != 0 {
        index ^= label;
        label >>= 1;
    }
    index
}

/// A finite set of distinct complex signal points in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constellation {
    points: Vec<Complex64>,
    min_distance: f64,
}

impl Constellation {
    /// Builds a constellation, sorting the points canonically.
    ///
    /// Rejects empty sets, sizes that are not a power of two and repeated
    /// points. A single-point constellation has an infinite minimum distance.
    pub fn new(mut points: Vec<Complex64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidConstellation("empty point set".into()));
        }
        if !points.len().is_power_of_two() {
            return Err(Error::InvalidConstellation(format!(
                "cardinality {} is not a power of two",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.re.is_finite() || !p.im.is_finite()) {
            return Err(Error::InvalidConstellation("non-finite point".into()));
        }
        points.sort_by(canonical_cmp);
        let min_distance = min_pairwise_distance(&points);
        let scale = points.iter().map(|p| p.norm()).fold(0.0, f64::max);
        if min_distance <= REL_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidConstellation("repeated point".into()));
        }
        Ok(Self {
            points,
            min_distance,
        })
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn min_distance(&self) -> f64 {
        self.min_distance
    }

    /// Uniform average of `|s|^2` over the points.
    pub fn average_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }

    pub fn bits(&self) -> u32 {
        self.points.len().trailing_zeros()
    }
}

fn min_pairwise_distance(points: &[Complex64]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            best = best.min((a - b).norm());
        }
    }
    best
}

/// Per-user bit counts on the in-phase and quadrature rails.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRate")]
pub struct RateAllocation {
    in_phase: Vec<u32>,
    quadrature: Vec<u32>,
}

#[derive(Deserialize)]
struct RawRate {
    in_phase: Vec<i64>,
    quadrature: Vec<i64>,
}

impl TryFrom<RawRate> for RateAllocation {
    type Error = Error;

    fn try_from(raw: RawRate) -> Result<Self> {
        Self::from_signed(&raw.in_phase, &raw.quadrature)
    }
}

impl RateAllocation {
    /// Users with zero bits on both rails are allowed here (they get the
    /// singleton alphabet `{0}`); the QAM builder rejects them.
    pub fn new(in_phase: Vec<u32>, quadrature: Vec<u32>) -> Result<Self> {
        if in_phase.is_empty() {
            return Err(Error::InvalidRate("no users".into()));
        }
        if in_phase.len() != quadrature.len() {
            return Err(Error::InvalidRate(format!(
                "{} in-phase entries vs {} quadrature entries",
                in_phase.len(),
                quadrature.len()
            )));
        }
        let total: u64 = in_phase
            .iter()
            .chain(&quadrature)
            .map(|&n| u64::from(n))
            .sum();
        if total == 0 {
            return Err(Error::InvalidRate("total rate is zero".into()));
        }
        if total > 40 {
            return Err(Error::InvalidRate(format!("total rate {total} bits is too large")));
        }
        Ok(Self {
            in_phase,
            quadrature,
        })
    }

    pub fn from_signed(in_phase: &[i64], quadrature: &[i64]) -> Result<Self> {
        let convert = |v: &[i64], rail: &str| -> Result<Vec<u32>> {
            v.iter()
                .enumerate()
                .map(|(k, &n)| {
                    u32::try_from(n).map_err(|_| {
                        Error::InvalidRate(format!("{rail} bits of user {k} is {n}"))
                    })
                })
                .collect()
        };
        Self::new(
            convert(in_phase, "in-phase")?,
            convert(quadrature, "quadrature")?,
        )
    }

    /// Real-valued (PAM) allocation.
    pub fn pam(bits: Vec<u32>) -> Result<Self> {
        let zeros = vec![0; bits.len()];
        Self::new(bits, zeros)
    }

    /// `users` users, each with the same rail split.
    pub fn uniform(users: usize, in_phase: u32, quadrature: u32) -> Result<Self> {
        Self::new(vec![in_phase; users], vec![quadrature; users])
    }

    pub fn users(&self) -> usize {
        self.in_phase.len()
    }

    pub fn in_phase(&self) -> &[u32] {
        &self.in_phase
    }

    pub fn quadrature(&self) -> &[u32] {
        &self.quadrature
    }

    pub fn rail(&self, rail: Rail) -> &[u32] {
        match rail {
            Rail::InPhase => &self.in_phase,
            Rail::Quadrature => &self.quadrature,
        }
    }

    /// `N_k = N_I,k + N_Q,k`.
    pub fn user_bits(&self, k: usize) -> u32 {
        self.in_phase[k] + self.quadrature[k]
    }

    pub fn total_in_phase(&self) -> u32 {
        self.in_phase.iter().sum()
    }

    pub fn total_quadrature(&self) -> u32 {
        self.quadrature.iter().sum()
    }

    pub fn total_bits(&self) -> u32 {
        self.total_in_phase() + self.total_quadrature()
    }

    /// Bit offset of user `k` on a rail: `sum_{l<k} N_rail,l`.
    pub fn rail_offset(&self, rail: Rail, k: usize) -> u32 {
        self.rail(rail)[..k].iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rail {
    InPhase,
    Quadrature,
}

/// Level of user `k` on one rail, in units of `d`.
///
/// `level` runs over `0..2^bits` in ascending order of value; the value is
/// `(level - (2^bits - 1)/2) * 2^offset`, which is `±(m - 1/2) 2^offset`.
pub fn rail_level(bits: u32, offset: u32, level: usize) -> f64 {
    let half_span = ((1u64 << bits) as f64 - 1.0) / 2.0;
    (level as f64 - half_span) * (1u64 << offset) as f64
}

/// One user's alphabet together with its bit labelling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserAlphabet {
    constellation: Constellation,
    /// `by_label[l]` is the point carrying bit label `l` (MSB first).
    by_label: Vec<Complex64>,
}

impl UserAlphabet {
    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn point(&self, label: usize) -> Complex64 {
        self.by_label[label]
    }

    pub fn labels(&self) -> &[Complex64] {
        &self.by_label
    }

    pub fn bits(&self) -> u32 {
        self.constellation.bits()
    }
}

/// Sub-constellations of a UDCG plus the rate allocation and grid spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UdcgDecomposition {
    users: Vec<UserAlphabet>,
    rate_allocation: RateAllocation,
    d: f64,
    canonical: bool,
}

impl UdcgDecomposition {
    /// Wraps arbitrary sub-constellations without checking uniqueness.
    ///
    /// Labels follow the canonical point order (natural binary). The rate
    /// allocation records each user's bits on the in-phase rail.
    pub fn from_parts(sub_constellations: Vec<Constellation>, d: f64) -> Result<Self> {
        check_spacing(d)?;
        if sub_constellations.is_empty() {
            return Err(Error::InvalidRate("no users".into()));
        }
        // Built directly: a lone singleton alphabet (zero total bits) is legal here.
        let bits: Vec<u32> = sub_constellations.iter().map(|c| c.bits()).collect();
        let rate = RateAllocation {
            quadrature: vec![0; bits.len()],
            in_phase: bits,
        };
        let users = sub_constellations
            .into_iter()
            .map(|c| UserAlphabet {
                by_label: c.points().to_vec(),
                constellation: c,
            })
            .collect();
        Ok(Self {
            users,
            rate_allocation: rate,
            d,
            canonical: false,
        })
    }

    pub fn users(&self) -> usize {
        self.users.len()
    }

    pub fn user(&self, k: usize) -> &UserAlphabet {
        &self.users[k]
    }

    pub fn sub_constellations(&self) -> impl Iterator<Item = &Constellation> {
        self.users.iter().map(|u| &u.constellation)
    }

    pub fn rate_allocation(&self) -> &RateAllocation {
        &self.rate_allocation
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    /// True for the canonical binary-offset construction built by [`build_pam_udcg`] or
    /// [`build_qam_udcg`].
    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    pub fn total_bits(&self) -> u32 {
        self.users.iter().map(|u| u.bits()).sum()
    }

    /// `E_k = E|s_k|^2 / d^2` for every user.
    pub fn normalized_energies(&self) -> Vec<f64> {
        self.users
            .iter()
            .map(|u| normalized_energy(&u.constellation, self.d))
            .collect()
    }

    /// Same group with grid spacing `d` (all points scale linearly).
    pub fn with_spacing(&self, d: f64) -> Result<Self> {
        check_spacing(d)?;
        let factor = d / self.d;
        let users = self
            .users
            .iter()
            .map(|u| {
                let points = u.constellation.points().iter().map(|p| p * factor).collect();
                Ok(UserAlphabet {
                    constellation: Constellation::new(points)?,
                    by_label: u.by_label.iter().map(|p| p * factor).collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            users,
            rate_allocation: self.rate_allocation.clone(),
            d,
            canonical: self.canonical,
        })
    }

    /// Number of points in the Cartesian product of the sub-constellations.
    pub fn product_size(&self) -> u128 {
        self.users.iter().map(|u| u.constellation.len() as u128).product()
    }

    /// Every sum `x_1 + ... + x_K`, in label order (user 1 most significant).
    pub fn sums(&self, cap: u64) -> Result<Vec<Complex64>> {
        let needed = self.product_size();
        if needed > u128::from(cap) {
            return Err(Error::CapExceeded { needed, cap });
        }
        let mut sums = vec![Complex64::new(0.0, 0.0)];
        for user in &self.users {
            let mut next = Vec::with_capacity(sums.len() * user.by_label.len());
            for s in &sums {
                for p in &user.by_label {
                    next.push(s + p);
                }
            }
            sums = next;
        }
        Ok(sums)
    }

    /// The Minkowski sum as a constellation (fails if sums collide).
    pub fn sum_constellation(&self, cap: u64) -> Result<Constellation> {
        Constellation::new(self.sums(cap)?)
    }
}

fn check_spacing(d: f64) -> Result<()> {
    if d.is_finite() && d > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("grid spacing must be positive, got {d}")))
    }
}

/// Levels (in units of `d`, ascending) of every user on one PAM rail.
fn pam_rail_levels(bits: &[u32]) -> Vec<Vec<f64>> {
    let mut offset = 0;
    bits.iter()
        .map(|&n| {
            let levels = (0..1usize << n).map(|l| rail_level(n, offset, l)).collect();
            offset += n;
            levels
        })
        .collect()
}

/// Real-valued UDCG: user `k` gets `{±(m - 1/2) 2^(N_1+...+N_(k-1)) d}`.
///
/// Users with zero bits get the singleton `{0}`.
pub fn build_pam_udcg(bits: &[i64], d: f64) -> Result<UdcgDecomposition> {
    let zeros = vec![0; bits.len()];
    let rate = RateAllocation::from_signed(bits, &zeros)?;
    build_canonical(rate, d)
}

/// Complex UDCG: `X_k = X_I,k + j X_Q,k` with both rails built as PAM groups.
pub fn build_qam_udcg(rate_allocation: &RateAllocation, d: f64) -> Result<UdcgDecomposition> {
    if let Some(k) = (0..rate_allocation.users()).find(|&k| rate_allocation.user_bits(k) == 0) {
        return Err(Error::InvalidRate(format!("user {k} carries no bits")));
    }
    build_canonical(rate_allocation.clone(), d)
}

fn build_canonical(rate: RateAllocation, d: f64) -> Result<UdcgDecomposition> {
    check_spacing(d)?;
    let in_phase = pam_rail_levels(rate.in_phase());
    let quadrature = pam_rail_levels(rate.quadrature());
    let users = (0..rate.users())
        .map(|k| {
            let nq = rate.quadrature()[k];
            let (re_levels, im_levels) = (&in_phase[k], &quadrature[k]);
            let by_label: Vec<Complex64> = (0..re_levels.len() * im_levels.len())
                .map(|label| {
                    let li = gray_decode(label >> nq);
                    let lq = gray_decode(label & ((1 << nq) - 1));
                    Complex64::new(re_levels[li], im_levels[lq]) * d
                })
                .collect();
            Ok(UserAlphabet {
                constellation: Constellation::new(by_label.clone())?,
                by_label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UdcgDecomposition {
        users,
        rate_allocation: rate,
        d,
        canonical: true,
    })
}

/// `E|s|^2 / d^2` under a uniform prior on the points.
pub fn normalized_energy(c: &Constellation, d: f64) -> f64 {
    c.average_energy() / (d * d)
}

/// True iff every tuple of user symbols has a distinct sum.
///
/// Returns [`Error::CapExceeded`] when the Cartesian product is larger than
/// `cap` rather than answering `false`.
pub fn verify_unique_decomposition(u: &UdcgDecomposition, cap: u64) -> Result<bool> {
    let mut sums = u.sums(cap)?;
    let scale = sums.iter().map(|s| s.norm()).fold(u.d(), f64::max);
    let tol = REL_TOL * scale;
    sums.sort_by(|a, b| a.re.total_cmp(&b.re));
    for (i, a) in sums.iter().enumerate() {
        for b in &sums[i + 1..] {
            if b.re - a.re > tol {
                break;
            }
            if (b.im - a.im).abs() <= tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
