//! Uniquely-factorable multiuser space-time modulation over two slots.
//!
//! Sub-constellation `j` is encoded as the row `[1/sqrt(p_j), sqrt(p_j) s_j]`
//! of `S_2`. User `k` transmits row `pi(k)` of `S_2`, divided by
//! `sqrt(beta_k)` so that every user arrives at the base station with the
//! same large-scale gain. The resulting Gram matrix
//!
//! ```text
//! R_2 = X_2^H D X_2 + sigma^2 I = [ sum 1/p_k + sigma^2     sum s_k                 ]
//!                                 [ conj(sum s_k)           sum p_k |s_k|^2 + sigma^2 ]
//! ```
//!
//! does not depend on the permutation, and the off-diagonal entry is the
//! point of the sum constellation, which identifies every user's symbol.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constellations::{RateAllocation, UdcgDecomposition, DEFAULT_ENUMERATION_CAP};
use crate::error::{Error, PowerBound, Result};

/// Relative slack allowed when checking the power box at a boundary point.
const POWER_TOL: f64 = 1e-9;

/// Default absolute tolerance for Gram equality (applied to Grams scaled by
/// the largest Gram entry of the codebook).
pub const GRAM_TOL: f64 = 1e-10;

/// Per-user power caps, large-scale gains and the receiver noise power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemProfile {
    powers: Vec<f64>,
    betas: Vec<f64>,
    sigma2: f64,
}

impl SystemProfile {
    pub fn new(powers: Vec<f64>, betas: Vec<f64>, sigma2: f64) -> Result<Self> {
        if powers.is_empty() {
            return Err(Error::InvalidProfile("no users".into()));
        }
        if powers.len() != betas.len() {
            return Err(Error::InvalidProfile(format!(
                "{} power caps vs {} gains",
                powers.len(),
                betas.len()
            )));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !powers.iter().chain(&betas).all(|&v| positive(v)) {
            return Err(Error::InvalidProfile("caps and gains must be positive and finite".into()));
        }
        if !positive(sigma2) {
            return Err(Error::InvalidProfile(format!("noise power must be positive, got {sigma2}")));
        }
        Ok(Self {
            powers,
            betas,
            sigma2,
        })
    }

    /// Unit gains and caps; handy for normalized experiments.
    pub fn normalized(users: usize, sigma2: f64) -> Result<Self> {
        Self::new(vec![1.0; users], vec![1.0; users], sigma2)
    }

    pub fn users(&self) -> usize {
        self.powers.len()
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// `P_k * beta_k` for every user.
    pub fn received_caps(&self) -> Vec<f64> {
        self.powers.iter().zip(&self.betas).map(|(p, b)| p * b).collect()
    }

    /// Whether users are labelled with nondecreasing `P_k * beta_k`.
    pub fn is_sorted(&self) -> bool {
        self.received_caps().windows(2).all(|w| w[0] <= w[1])
    }

    /// Reorders users by ascending `P_k * beta_k`. The returned map gives,
    /// for each new position, the original user index.
    pub fn sorted(&self) -> (Self, Vec<usize>) {
        let caps = self.received_caps();
        let mut order: Vec<usize> = (0..self.users()).collect();
        order.sort_by(|&a, &b| caps[a].total_cmp(&caps[b]).then(a.cmp(&b)));
        let profile = Self {
            powers: order.iter().map(|&i| self.powers[i]).collect(),
            betas: order.iter().map(|&i| self.betas[i]).collect(),
            sigma2: self.sigma2,
        };
        (profile, order)
    }

    pub fn with_sigma2(&self, sigma2: f64) -> Result<Self> {
        Self::new(self.powers.clone(), self.betas.clone(), sigma2)
    }
}

/// User-to-sub-constellation assignment: user `k` carries sub-constellation
/// `map[k]` (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &j in &map {
            if j >= map.len() || std::mem::replace(&mut seen[j], true) {
                return Err(Error::InvalidPermutation(format!("{map:?} is not a bijection")));
            }
        }
        Ok(Self(map))
    }

    pub fn identity(k: usize) -> Self {
        Self((0..k).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Sub-constellation carried by user `k`.
    pub fn apply(&self, k: usize) -> usize {
        self.0[k]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (k, &j) in self.0.iter().enumerate() {
            inv[j] = k;
        }
        Self(inv)
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(k, &j)| k == j)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;

    fn try_from(map: Vec<usize>) -> Result<Self> {
        Self::new(map)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.0
    }
}

/// The pre-compensation codeword `S_2` and the transmitted block `X_2`,
/// stored row-per-user as `[slot 1, slot 2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    s: Vec<[Complex64; 2]>,
    x: Vec<[Complex64; 2]>,
}

impl SignalMatrix {
    /// Raw constructor for blocks that do not come from [`encode`]
    /// (baselines, oracles).
    pub fn from_parts(s: Vec<[Complex64; 2]>, x: Vec<[Complex64; 2]>) -> Result<Self> {
        if s.len() != x.len() {
            return Err(Error::Dimension(format!("S has {} rows, X has {}", s.len(), x.len())));
        }
        Ok(Self { s, x })
    }

    /// A block given only by its transmitted rows; `S` is left equal to `X`.
    pub fn from_transmitted(x: Vec<[Complex64; 2]>) -> Self {
        Self { s: x.clone(), x }
    }

    pub fn users(&self) -> usize {
        self.x.len()
    }

    pub fn s_rows(&self) -> &[[Complex64; 2]] {
        &self.s
    }

    pub fn x_rows(&self) -> &[[Complex64; 2]] {
        &self.x
    }

    /// Column `t` (0 or 1) of `X_2`.
    pub fn x_column(&self, t: usize) -> Vec<Complex64> {
        self.x.iter().map(|row| row[t]).collect()
    }
}

/// A 2x2 Hermitian matrix `[[r11, r12], [conj(r12), r22]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gram2 {
    pub r11: f64,
    pub r12: Complex64,
    pub r22: f64,
}

impl Gram2 {
    pub fn det(&self) -> f64 {
        self.r11 * self.r22 - self.r12.norm_sqr()
    }

    pub fn max_abs(&self) -> f64 {
        self.r11.abs().max(self.r22.abs()).max(self.r12.norm())
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        (self.r11 - other.r11).abs() <= tol
            && (self.r22 - other.r22).abs() <= tol
            && (self.r12 - other.r12).norm() <= tol
    }

    /// Closed form from the information vector and the power vector.
    pub fn from_symbols(symbols: &[Complex64], p: &[f64], sigma2: f64) -> Self {
        Self {
            r11: p.iter().map(|pk| 1.0 / pk).sum::<f64>() + sigma2,
            r12: symbols.iter().sum(),
            r22: symbols.iter().zip(p).map(|(s, pk)| pk * s.norm_sqr()).sum::<f64>() + sigma2,
        }
    }
}

/// `R_2 = X_2^H D X_2 + sigma^2 I_2`.
pub fn gram(x: &SignalMatrix, profile: &SystemProfile) -> Gram2 {
    let mut r11 = profile.sigma2();
    let mut r22 = profile.sigma2();
    let mut r12 = Complex64::new(0.0, 0.0);
    for (row, &beta) in x.x_rows().iter().zip(profile.betas()) {
        r11 += beta * row[0].norm_sqr();
        r22 += beta * row[1].norm_sqr();
        r12 += row[0].conj() * row[1] * beta;
    }
    Gram2 { r11, r12, r22 }
}

/// Checks the per-sub-constellation power box
/// `1/(P beta) <= p_j <= P beta / (E_j d^2)` where `P beta` belongs to the
/// user carrying sub-constellation `j`.
pub fn check_power_box(
    u: &UdcgDecomposition,
    p: &[f64],
    pi: &Permutation,
    profile: &SystemProfile,
) -> Result<()> {
    let k = u.users();
    if p.len() != k || pi.len() != k || profile.users() != k {
        return Err(Error::Dimension(format!(
            "{k} sub-constellations, {} powers, permutation of {}, {} users",
            p.len(),
            pi.len(),
            profile.users()
        )));
    }
    let caps = profile.received_caps();
    let energies = u.normalized_energies();
    let inv = pi.inverse();
    let d2 = u.d() * u.d();
    for (j, &pj) in p.iter().enumerate() {
        if !pj.is_finite() || pj <= 0.0 {
            return Err(Error::InfeasiblePower {
                index: j,
                bound: PowerBound::NotFinite,
                value: pj,
                limit: f64::NAN,
            });
        }
        let cap = caps[inv.apply(j)];
        if 1.0 / pj > cap * (1.0 + POWER_TOL) {
            return Err(Error::InfeasiblePower {
                index: j,
                bound: PowerBound::Reference,
                value: 1.0 / pj,
                limit: cap,
            });
        }
        let data = pj * energies[j] * d2;
        if data > cap * (1.0 + POWER_TOL) {
            return Err(Error::InfeasiblePower {
                index: j,
                bound: PowerBound::Data,
                value: data,
                limit: cap,
            });
        }
    }
    Ok(())
}

fn split_labels(u: &UdcgDecomposition, index: usize) -> Vec<usize> {
    let mut labels = vec![0; u.users()];
    let mut rest = index;
    for k in (0..u.users()).rev() {
        let bits = u.user(k).bits();
        labels[k] = rest & ((1 << bits) - 1);
        rest >>= bits;
    }
    labels
}

/// Bits (MSB first) of a codebook index with `n` bits.
pub fn index_to_bits(index: usize, n: u32) -> Vec<bool> {
    (0..n).rev().map(|b| (index >> b) & 1 == 1).collect()
}

pub fn bits_to_index(bits: &[bool]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b))
}

fn build_matrix(
    u: &UdcgDecomposition,
    index: usize,
    p: &[f64],
    pi: &Permutation,
    profile: &SystemProfile,
) -> SignalMatrix {
    let labels = split_labels(u, index);
    let s: Vec<[Complex64; 2]> = labels
        .iter()
        .enumerate()
        .map(|(j, &label)| {
            let root = p[j].sqrt();
            [Complex64::new(1.0 / root, 0.0), u.user(j).point(label) * root]
        })
        .collect();
    let x = (0..u.users())
        .map(|k| {
            let scale = 1.0 / profile.betas()[k].sqrt();
            let row = s[pi.apply(k)];
            [row[0] * scale, row[1] * scale]
        })
        .collect();
    SignalMatrix { s, x }
}

/// Maps `N` information bits onto `S_2` and `X_2 = D^{-1/2} Pi S_2`.
///
/// Bits are consumed user by user (user 1 first), each user's chunk laid out
/// as `[in-phase | quadrature]`.
pub fn encode(
    info_bits: &[bool],
    u: &UdcgDecomposition,
    p: &[f64],
    pi: &Permutation,
    profile: &SystemProfile,
) -> Result<SignalMatrix> {
    if info_bits.len() != u.total_bits() as usize {
        return Err(Error::Dimension(format!(
            "{} info bits for a {}-bit codebook",
            info_bits.len(),
            u.total_bits()
        )));
    }
    check_power_box(u, p, pi, profile)?;
    Ok(build_matrix(u, bits_to_index(info_bits), p, pi, profile))
}

/// Every codeword of a UF-MUSTM design, indexed by its information bits.
#[derive(Debug, Clone)]
pub struct Codebook {
    entries: Vec<SignalMatrix>,
    decomposition: UdcgDecomposition,
    p: Vec<f64>,
    pi: Permutation,
}

impl Codebook {
    pub fn build(
        u: &UdcgDecomposition,
        p: &[f64],
        pi: &Permutation,
        profile: &SystemProfile,
    ) -> Result<Self> {
        Self::build_capped(u, p, pi, profile, DEFAULT_ENUMERATION_CAP)
    }

    pub fn build_capped(
        u: &UdcgDecomposition,
        p: &[f64],
        pi: &Permutation,
        profile: &SystemProfile,
        cap: u64,
    ) -> Result<Self> {
        check_power_box(u, p, pi, profile)?;
        let needed = u.product_size();
        if needed > u128::from(cap) {
            return Err(Error::CapExceeded { needed, cap });
        }
        let entries = (0..needed as usize)
            .map(|i| build_matrix(u, i, p, pi, profile))
            .collect();
        Ok(Self {
            entries,
            decomposition: u.clone(),
            p: p.to_vec(),
            pi: pi.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[SignalMatrix] {
        &self.entries
    }

    pub fn entry(&self, index: usize) -> &SignalMatrix {
        &self.entries[index]
    }

    pub fn decomposition(&self) -> &UdcgDecomposition {
        &self.decomposition
    }

    pub fn powers(&self) -> &[f64] {
        &self.p
    }

    pub fn permutation(&self) -> &Permutation {
        &self.pi
    }

    pub fn bits_per_codeword(&self) -> u32 {
        self.decomposition.total_bits()
    }

    pub fn bits(&self, index: usize) -> Vec<bool> {
        index_to_bits(index, self.bits_per_codeword())
    }

    /// Information vector `s` (one symbol per sub-constellation) of an entry.
    pub fn symbols(&self, index: usize) -> Vec<Complex64> {
        split_labels(&self.decomposition, index)
            .iter()
            .enumerate()
            .map(|(j, &label)| self.decomposition.user(j).point(label))
            .collect()
    }

    /// Transmitted columns of a frame: the shared reference slot followed by
    /// the data slot of each listed entry.
    pub fn frame_columns(&self, indices: &[usize]) -> Vec<Vec<Complex64>> {
        let mut columns = Vec::with_capacity(indices.len() + 1);
        columns.push(self.entries[0].x_column(0));
        columns.extend(indices.iter().map(|&i| self.entries[i].x_column(1)));
        columns
    }

    pub fn to_document(&self) -> CodebookDocument {
        let pair = |c: Complex64| [c.re, c.im];
        let rows = |m: &[[Complex64; 2]]| m.iter().map(|r| [pair(r[0]), pair(r[1])]).collect();
        CodebookDocument {
            rate_allocation: self.decomposition.rate_allocation().clone(),
            d: self.decomposition.d(),
            powers: self.p.clone(),
            permutation: self.pi.clone(),
            sub_constellations: self
                .decomposition
                .sub_constellations()
                .map(|c| c.points().iter().map(|&p| pair(p)).collect())
                .collect(),
            entries: self
                .entries
                .iter()
                .enumerate()
                .map(|(i, e)| CodebookEntry {
                    index: i,
                    bits: self
                        .bits(i)
                        .iter()
                        .map(|&b| if b { '1' } else { '0' })
                        .collect(),
                    symbols: self.symbols(i).into_iter().map(pair).collect(),
                    s_matrix: rows(e.s_rows()),
                    x_matrix: rows(e.x_rows()),
                })
                .collect(),
        }
    }
}

/// JSON form of a codebook; complex numbers are `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookDocument {
    pub rate_allocation: RateAllocation,
    pub d: f64,
    pub powers: Vec<f64>,
    pub permutation: Permutation,
    pub sub_constellations: Vec<Vec<[f64; 2]>>,
    pub entries: Vec<CodebookEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookEntry {
    pub index: usize,
    pub bits: String,
    pub symbols: Vec<[f64; 2]>,
    pub s_matrix: Vec<[[f64; 2]; 2]>,
    pub x_matrix: Vec<[[f64; 2]; 2]>,
}

/// True iff equal Grams imply equal codewords across the whole codebook.
///
/// Grams are compared entrywise after dividing by the largest Gram entry in
/// the codebook, with absolute tolerance `GRAM_TOL`. The scan covers
/// `|entries|^2` ordered pairs and fails with [`Error::CapExceeded`] past
/// `cap`.
pub fn verify_identifiability(cb: &Codebook, profile: &SystemProfile, cap: u64) -> Result<bool> {
    let n = cb.len() as u128;
    if n * n > u128::from(cap) {
        return Err(Error::CapExceeded {
            needed: n * n,
            cap,
        });
    }
    let grams: Vec<Gram2> = cb.entries().iter().map(|e| gram(e, profile)).collect();
    let scale = grams.iter().map(Gram2::max_abs).fold(f64::MIN_POSITIVE, f64::max);
    let tol = GRAM_TOL * scale;
    let x_scale = cb
        .entries()
        .iter()
        .flat_map(|e| e.x_rows().iter().flat_map(|r| r.iter().map(|c| c.norm())))
        .fold(f64::MIN_POSITIVE, f64::max);
    let collision = (0..cb.len()).into_par_iter().any(|i| {
        (i + 1..cb.len()).any(|j| {
            grams[i].approx_eq(&grams[j], tol)
                && !same_block(cb.entry(i), cb.entry(j), GRAM_TOL * x_scale)
        })
    });
    Ok(!collision)
}

fn same_block(a: &SignalMatrix, b: &SignalMatrix, tol: f64) -> bool {
    a.x_rows()
        .iter()
        .zip(b.x_rows())
        .all(|(ra, rb)| (ra[0] - rb[0]).norm() <= tol && (ra[1] - rb[1]).norm() <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellations::{build_qam_udcg, Constellation};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn four_qam_pair() -> UdcgDecomposition {
        build_qam_udcg(&RateAllocation::uniform(2, 1, 1).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn encode_single_user_zero_bits() {
        let u = build_qam_udcg(&RateAllocation::uniform(1, 1, 1).unwrap(), 1.0).unwrap();
        let profile = SystemProfile::new(vec![1.0], vec![1.0], 0.1).unwrap();
        let x = encode(&[false, false], &u, &[1.0], &Permutation::identity(1), &profile).unwrap();
        assert_eq!(x.s_rows(), &[[c(1.0, 0.0), c(-0.5, -0.5)]]);
        assert_eq!(x.x_rows(), x.s_rows());
    }

    #[test]
    fn encode_rejects_infinite_power() {
        let u = four_qam_pair();
        let profile = SystemProfile::normalized(2, 0.1).unwrap();
        let err = encode(
            &[false; 4],
            &u,
            &[f64::INFINITY, 1.0],
            &Permutation::identity(2),
            &profile,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::InfeasiblePower {
                index: 0,
                bound: PowerBound::NotFinite,
                ..
            }
        ));
    }

    #[test]
    fn encode_reports_violated_bound() {
        let u = four_qam_pair();
        let profile = SystemProfile::normalized(2, 0.1).unwrap();
        let id = Permutation::identity(2);
        // 1/p = 2 > P beta = 1 on sub-constellation 1.
        let err = encode(&[false; 4], &u, &[1.0, 0.5], &id, &profile).unwrap_err();
        assert!(matches!(err, Error::InfeasiblePower { index: 1, bound: PowerBound::Reference, .. }));
        // p E d^2 = 1.0 * 2.0 > 1 on sub-constellation 1.
        let err = encode(&[false; 4], &u, &[1.0, 1.0], &id, &profile).unwrap_err();
        assert!(matches!(err, Error::InfeasiblePower { index: 1, bound: PowerBound::Data, .. }));
    }

    #[test]
    fn encode_structure_and_slot_powers() {
        let u = four_qam_pair();
        let profile = SystemProfile::new(vec![2.0, 3.0], vec![0.5, 2.0], 0.2).unwrap();
        let p = [1.0, 0.4];
        let pi = Permutation::identity(2);
        let energies = u.normalized_energies();
        for index in 0..16 {
            let bits = index_to_bits(index, 4);
            let x = encode(&bits, &u, &p, &pi, &profile).unwrap();
            for (j, row) in x.s_rows().iter().enumerate() {
                assert!((row[0].re - 1.0 / p[j].sqrt()).abs() < 1e-15);
                assert_eq!(row[0].im, 0.0);
            }
            for k in 0..2 {
                let ref_power = x.x_rows()[k][0].norm_sqr();
                assert!(ref_power <= profile.powers()[k] * (1.0 + 1e-12));
                assert!((ref_power - 1.0 / (p[k] * profile.betas()[k])).abs() < 1e-12);
            }
        }
        // Average data-slot power over the codebook equals p_k E_k d^2 / beta_k.
        let cb = Codebook::build(&u, &p, &pi, &profile).unwrap();
        for k in 0..2 {
            let avg: f64 = cb.entries().iter().map(|e| e.x_rows()[k][1].norm_sqr()).sum::<f64>()
                / cb.len() as f64;
            let expected = p[k] * energies[k] / profile.betas()[k];
            assert!((avg - expected).abs() < 1e-12);
            assert!(avg <= profile.powers()[k]);
        }
    }

    #[test]
    fn encode_applies_permutation() {
        let u = four_qam_pair();
        let profile = SystemProfile::new(vec![4.0, 4.0], vec![1.0, 0.25], 0.1).unwrap();
        let pi = Permutation::new(vec![1, 0]).unwrap();
        let p = [1.0, 0.5];
        let x = encode(&index_to_bits(5, 4), &u, &p, &pi, &profile).unwrap();
        for k in 0..2 {
            let j = pi.apply(k);
            let scale = profile.betas()[k].sqrt();
            assert!((x.x_rows()[k][0] * scale - x.s_rows()[j][0]).norm() < 1e-15);
            assert!((x.x_rows()[k][1] * scale - x.s_rows()[j][1]).norm() < 1e-15);
        }
    }

    #[test]
    fn gram_of_zero_block_is_noise() {
        let profile = SystemProfile::normalized(2, 0.3).unwrap();
        let zero = SignalMatrix::from_transmitted(vec![[c(0.0, 0.0); 2]; 2]);
        let g = gram(&zero, &profile);
        assert_eq!(g, Gram2 { r11: 0.3, r12: c(0.0, 0.0), r22: 0.3 });
    }

    #[test]
    fn gram_matches_closed_form() {
        let u = four_qam_pair();
        let profile = SystemProfile::new(vec![1.0, 2.0], vec![1.5, 1.0], 0.05).unwrap();
        let p = [0.9, 0.6];
        let cb = Codebook::build(&u, &p, &Permutation::identity(2), &profile).unwrap();
        for i in 0..cb.len() {
            let direct = gram(cb.entry(i), &profile);
            let closed = Gram2::from_symbols(&cb.symbols(i), &p, profile.sigma2());
            assert!(direct.approx_eq(&closed, 1e-12), "{direct:?} vs {closed:?}");
        }
    }

    #[test]
    fn identifiability() {
        let u = four_qam_pair();
        let profile = SystemProfile::new(vec![1.0, 4.0], vec![1.0, 1.0], 0.1).unwrap();
        let cb = Codebook::build(&u, &[1.0, 0.5], &Permutation::identity(2), &profile).unwrap();
        assert_eq!(cb.len(), 16);
        assert!(verify_identifiability(&cb, &profile, DEFAULT_ENUMERATION_CAP).unwrap());

        let half = Constellation::new(vec![c(-0.5, 0.0), c(0.5, 0.0)]).unwrap();
        let bad = UdcgDecomposition::from_parts(vec![half.clone(), half.clone()], 1.0).unwrap();
        let cb = Codebook::build(&bad, &[1.0, 1.0], &Permutation::identity(2), &profile).unwrap();
        assert!(!verify_identifiability(&cb, &profile, DEFAULT_ENUMERATION_CAP).unwrap());

        let single = UdcgDecomposition::from_parts(
            vec![Constellation::new(vec![c(0.0, 0.0)]).unwrap()],
            1.0,
        )
        .unwrap();
        let one = SystemProfile::normalized(1, 0.1).unwrap();
        let cb = Codebook::build(&single, &[1.0], &Permutation::identity(1), &one).unwrap();
        assert_eq!(cb.len(), 1);
        assert!(verify_identifiability(&cb, &one, DEFAULT_ENUMERATION_CAP).unwrap());
    }

    #[test]
    fn identifiability_cap_is_an_error() {
        let u = four_qam_pair();
        let profile = SystemProfile::new(vec![1.0, 4.0], vec![1.0, 1.0], 0.1).unwrap();
        let cb = Codebook::build(&u, &[1.0, 0.5], &Permutation::identity(2), &profile).unwrap();
        assert!(matches!(
            verify_identifiability(&cb, &profile, 100),
            Err(Error::CapExceeded { needed: 256, cap: 100 })
        ));
    }

    #[test]
    fn permutation_validation() {
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![0, 2]).is_err());
        let p = Permutation::new(vec![2, 0, 1]).unwrap();
        assert_eq!(p.inverse().as_slice(), &[1, 2, 0]);
        assert!(!p.is_identity());
        assert!(serde_json::from_str::<Permutation>("[1,1]").is_err());
    }

    #[test]
    fn profile_sorting() {
        let profile = SystemProfile::new(vec![1.0, 1.0, 2.0], vec![3.0, 1.0, 1.0], 1.0).unwrap();
        assert!(!profile.is_sorted());
        let (sorted, order) = profile.sorted();
        assert_eq!(order, vec![1, 2, 0]);
        assert!(sorted.is_sorted());
        assert!(SystemProfile::new(vec![1.0], vec![0.0], 1.0).is_err());
        assert!(SystemProfile::new(vec![1.0], vec![1.0], 0.0).is_err());
    }

    #[test]
    fn bit_index_round_trip() {
        for i in 0..64 {
            assert_eq!(bits_to_index(&index_to_bits(i, 6)), i);
        }
        assert_eq!(index_to_bits(0b1011, 4), vec![true, false, true, true]);
    }
}
