//! KL-divergence objective and the max-min power/assignment design.
//!
//! For a single antenna the divergence between the received distributions of
//! two codewords is `tr(R R~^-1) - ln det(R R~^-1) - 2`. With the codeword
//! structure of [`crate::mustm`] it splits into
//!
//! ```text
//! f1 = det R / det R~ - ln(det R / det R~) - 1
//! f2 = |sum s - sum s~|^2 / det R~
//! ```
//!
//! The design maximizes the worst pairwise divergence, which leads to the
//! closed form `d* = min_k P_k beta_k / sqrt(E_k)`, `p*_k = 1/(sqrt(E_k) d*)`
//! with users and sub-constellations matched in sorted order.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constellations::{gray_encode, rail_level, Rail, UdcgDecomposition};
use crate::error::{Error, Result};
use crate::mustm::{check_power_box, gram, Gram2, Permutation, SignalMatrix, SystemProfile};

/// Divergence split into the determinant-ratio part and the cross-term part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlBreakdown {
    pub total: f64,
    pub f1: f64,
    pub f2: f64,
}

/// Single-antenna KL divergence `D(CN(0, R) || CN(0, R~))` between two Grams.
pub fn kl_from_grams(r: &Gram2, r_tilde: &Gram2) -> Result<f64> {
    let det_t = r_tilde.det();
    let det = r.det();
    if !(det_t > 0.0 && det > 0.0) {
        return Err(Error::Singular(format!("Gram determinants {det} and {det_t}")));
    }
    let trace = (r.r11 * r_tilde.r22 + r.r22 * r_tilde.r11
        - 2.0 * (r.r12 * r_tilde.r12.conj()).re)
        / det_t;
    Ok(trace - (det / det_t).ln() - 2.0)
}

/// Single-antenna divergence between the received distributions of two
/// blocks. The `M`-antenna value is `M` times this.
pub fn kl_divergence(x: &SignalMatrix, x_tilde: &SignalMatrix, profile: &SystemProfile) -> Result<f64> {
    kl_from_grams(&gram(x, profile), &gram(x_tilde, profile))
}

/// `f1` and `f2` for the information vectors `s` and `s~` under powers `p`.
pub fn kl_breakdown(
    p: &[f64],
    s: &[Complex64],
    s_tilde: &[Complex64],
    profile: &SystemProfile,
) -> Result<KlBreakdown> {
    if s.len() != p.len() || s_tilde.len() != p.len() {
        return Err(Error::Dimension(format!(
            "{} powers, {} and {} symbols",
            p.len(),
            s.len(),
            s_tilde.len()
        )));
    }
    let r = Gram2::from_symbols(s, p, profile.sigma2());
    let rt = Gram2::from_symbols(s_tilde, p, profile.sigma2());
    let det_t = rt.det();
    if !(det_t > 0.0 && r.det() > 0.0) {
        return Err(Error::Singular(format!("Gram determinants {} and {det_t}", r.det())));
    }
    let ratio = r.det() / det_t;
    // ln(1 + x) keeps f1 accurate when the ratio is close to one.
    let f1 = ((ratio - 1.0) - (ratio - 1.0).ln_1p()).max(0.0);
    let f2 = (r.r12 - rt.r12).norm_sqr() / det_t;
    Ok(KlBreakdown {
        total: f1 + f2,
        f1,
        f2,
    })
}

/// A pair of codewords attaining the smallest `f2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstPair {
    pub s_index: usize,
    pub s_tilde_index: usize,
    pub s: Vec<Complex64>,
    pub s_tilde: Vec<Complex64>,
    pub value: f64,
}

/// Closed-form worst-case pair of a canonical UDCG.
///
/// On each rail the denominator codeword puts every user at its extreme
/// negative level except the last user carrying bits on that rail, which sits
/// at its extreme positive level. This maximizes `det R~` and the sum point
/// lies half a grid step from the origin. The partner codeword is the grid
/// neighbour one step down on the quadrature rail (in-phase if the group has
/// no quadrature bits).
pub fn worst_case_pair_closed_form(
    u: &UdcgDecomposition,
    p: &[f64],
    profile: &SystemProfile,
) -> Result<WorstPair> {
    if !u.is_canonical() {
        return Err(Error::InvalidArgument(
            "closed-form worst pair needs a canonical decomposition".into(),
        ));
    }
    if p.len() != u.users() {
        return Err(Error::Dimension(format!("{} powers for {} users", p.len(), u.users())));
    }
    let rate = u.rate_allocation();
    let k = u.users();
    let extreme = |rail: Rail| -> Vec<usize> {
        let bits = rate.rail(rail);
        let last = (0..k).rev().find(|&j| bits[j] > 0);
        (0..k)
            .map(|j| if Some(j) == last { (1usize << bits[j]) - 1 } else { 0 })
            .collect()
    };
    let tilde_i = extreme(Rail::InPhase);
    let tilde_q = extreme(Rail::Quadrature);
    let step_rail = if rate.total_quadrature() > 0 {
        Rail::Quadrature
    } else {
        Rail::InPhase
    };
    let (mut near_i, mut near_q) = (tilde_i.clone(), tilde_q.clone());
    let target = match step_rail {
        Rail::InPhase => &mut near_i,
        Rail::Quadrature => &mut near_q,
    };
    let sum_index = rail_index(rate.rail(step_rail), target);
    *target = rail_digits(rate.rail(step_rail), sum_index - 1);

    let (s_tilde, s_tilde_index) = levels_to_codeword(u, &tilde_i, &tilde_q);
    let (s, s_index) = levels_to_codeword(u, &near_i, &near_q);
    let rt = Gram2::from_symbols(&s_tilde, p, profile.sigma2());
    let value = (s.iter().sum::<Complex64>() - rt.r12).norm_sqr() / rt.det();
    Ok(WorstPair {
        s_index,
        s_tilde_index,
        s,
        s_tilde,
        value,
    })
}

fn rail_index(bits: &[u32], levels: &[usize]) -> usize {
    let mut offset = 0;
    let mut index = 0;
    for (&n, &l) in bits.iter().zip(levels) {
        index += l << offset;
        offset += n;
    }
    index
}

fn rail_digits(bits: &[u32], mut index: usize) -> Vec<usize> {
    bits.iter()
        .map(|&n| {
            let l = index & ((1 << n) - 1);
            index >>= n;
            l
        })
        .collect()
}

fn levels_to_codeword(u: &UdcgDecomposition, li: &[usize], lq: &[usize]) -> (Vec<Complex64>, usize) {
    let rate = u.rate_allocation();
    let d = u.d();
    let mut index = 0;
    let mut offsets = (0, 0);
    let symbols = (0..u.users())
        .map(|k| {
            let (ni, nq) = (rate.in_phase()[k], rate.quadrature()[k]);
            let label = (gray_encode(li[k]) << nq) | gray_encode(lq[k]);
            index = (index << (ni + nq)) | label;
            let point = Complex64::new(
                rail_level(ni, offsets.0, li[k]),
                rail_level(nq, offsets.1, lq[k]),
            ) * d;
            offsets = (offsets.0 + ni, offsets.1 + nq);
            point
        })
        .collect();
    (symbols, index)
}

/// Assignment maximizing `min_k a_k / b_pi(k)` for nondecreasing `a` and `b`:
/// the identity. Returns it together with the attained value.
pub fn maximin_ratio_assignment(a: &[f64], b: &[f64]) -> Result<(Permutation, f64)> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Dimension(format!("sequences of length {} and {}", a.len(), b.len())));
    }
    if !a.iter().chain(b).all(|v| v.is_finite() && *v > 0.0) {
        return Err(Error::InvalidArgument("entries must be positive".into()));
    }
    let sorted = |v: &[f64]| v.windows(2).all(|w| w[0] <= w[1]);
    if !sorted(a) || !sorted(b) {
        return Err(Error::InvalidArgument("sequences must be nondecreasing".into()));
    }
    let value = a.iter().zip(b).map(|(x, y)| x / y).fold(f64::INFINITY, f64::min);
    Ok((Permutation::identity(a.len()), value))
}

/// Optimal design for a profile: spacing, per-user powers and the user-to-group assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSolution {
    pub d_star: f64,
    pub p_star: Vec<f64>,
    pub pi_star: Permutation,
    pub worst_pair_value: f64,
    /// Users attaining the minimum in `d*`.
    pub binding_users: Vec<usize>,
    /// Normalized sub-constellation energies `E_k`.
    pub energies: Vec<f64>,
    /// `(sum 1/p + sigma^2)(sum p E + sigma^2/d^2)` at the solution.
    pub objective: f64,
}

/// Outer design objective `(sum_k 1/p_k + sigma^2)(sum_k p_k E_k + sigma^2/d^2)`.
pub fn design_objective(p: &[f64], energies: &[f64], d: f64, sigma2: f64) -> f64 {
    let a: f64 = p.iter().map(|v| 1.0 / v).sum::<f64>() + sigma2;
    let b: f64 = p.iter().zip(energies).map(|(v, e)| v * e).sum::<f64>() + sigma2 / (d * d);
    a * b
}

/// Closed-form max-min design.
///
/// Users must be labelled by nondecreasing `P_k beta_k`. Sub-constellations
/// are matched to users in order of increasing energy, which is the identity
/// for canonical groups with equal per-user rates. `u` only supplies the
/// shape; its spacing is replaced by `d*`.
pub fn solve_design(profile: &SystemProfile, u: &UdcgDecomposition) -> Result<DesignSolution> {
    let k = u.users();
    if profile.users() != k {
        return Err(Error::Dimension(format!("{} users, {k} sub-constellations", profile.users())));
    }
    if !profile.is_sorted() {
        return Err(Error::InvalidProfile(
            "users must be ordered by nondecreasing P*beta".into(),
        ));
    }
    let energies = u.normalized_energies();
    if energies.iter().any(|&e| e <= 0.0) {
        return Err(Error::DegenerateDesign("a sub-constellation has zero energy".into()));
    }
    let mut by_energy: Vec<usize> = (0..k).collect();
    by_energy.sort_by(|&i, &j| energies[i].total_cmp(&energies[j]).then(i.cmp(&j)));
    let pi = Permutation::new(by_energy)?;

    let caps = profile.received_caps();
    let limits: Vec<f64> = (0..k).map(|user| caps[user] / energies[pi.apply(user)].sqrt()).collect();
    let d_star = limits.iter().copied().fold(f64::INFINITY, f64::min);
    let binding_users = (0..k)
        .filter(|&user| limits[user] <= d_star * (1.0 + 1e-12))
        .collect();
    let p_star: Vec<f64> = energies.iter().map(|e| 1.0 / (e.sqrt() * d_star)).collect();

    let scaled = u.with_spacing(d_star)?;
    check_power_box(&scaled, &p_star, &pi, profile)?;
    let worst_pair_value = if scaled.is_canonical() {
        worst_case_pair_closed_form(&scaled, &p_star, profile)?.value
    } else {
        oracle::exhaustive_min_f2(&scaled, &p_star, profile, crate::constellations::DEFAULT_ENUMERATION_CAP)?.value
    };
    let objective = design_objective(&p_star, &energies, d_star, profile.sigma2());
    Ok(DesignSolution {
        d_star,
        p_star,
        pi_star: pi,
        worst_pair_value,
        binding_users,
        energies,
        objective,
    })
}

/// Brute-force references for the closed forms above. They share no code
/// with the closed forms beyond Gram evaluation.
pub mod oracle {
    use super::*;

    /// Smallest `f2` over all ordered pairs of distinct codewords. Ties keep
    /// the first pair in `(s_tilde, s)` index order.
    pub fn exhaustive_min_f2(
        u: &UdcgDecomposition,
        p: &[f64],
        profile: &SystemProfile,
        cap: u64,
    ) -> Result<WorstPair> {
        let sums = u.sums(cap)?;
        let n = sums.len();
        if n < 2 {
            return Err(Error::InvalidArgument("need at least two codewords".into()));
        }
        let symbols: Vec<Vec<Complex64>> = (0..n).map(|i| symbols_of(u, i)).collect();
        let dets: Vec<f64> = symbols
            .iter()
            .map(|s| Gram2::from_symbols(s, p, profile.sigma2()).det())
            .collect();
        let mut best = (f64::INFINITY, 0, 0);
        for t in 0..n {
            for i in 0..n {
                if i == t {
                    continue;
                }
                let v = (sums[i] - sums[t]).norm_sqr() / dets[t];
                if v < best.0 {
                    best = (v, i, t);
                }
            }
        }
        let (value, i, t) = best;
        Ok(WorstPair {
            s_index: i,
            s_tilde_index: t,
            s: symbols[i].clone(),
            s_tilde: symbols[t].clone(),
            value,
        })
    }

    fn symbols_of(u: &UdcgDecomposition, mut index: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); u.users()];
        for k in (0..u.users()).rev() {
            let bits = u.user(k).bits();
            out[k] = u.user(k).point(index & ((1 << bits) - 1));
            index >>= bits;
        }
        out
    }

    /// Calls `f` on every permutation of `0..k` (Heap's algorithm).
    pub fn for_each_permutation(k: usize, mut f: impl FnMut(&[usize])) {
        let mut perm: Vec<usize> = (0..k).collect();
        let mut c = vec![0; k];
        f(&perm);
        let mut i = 1;
        while i < k {
            if c[i] < i {
                let j = if i % 2 == 0 { 0 } else { c[i] };
                perm.swap(j, i);
                f(&perm);
                c[i] += 1;
                i = 1;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
    }

    /// `max over pi of min_k a_k / b_pi(k)` by enumeration.
    pub fn exhaustive_maximin(a: &[f64], b: &[f64]) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for_each_permutation(a.len(), |perm| {
            let v = a
                .iter()
                .zip(perm)
                .map(|(x, &j)| x / b[j])
                .fold(f64::INFINITY, f64::min);
            best = best.max(v);
        });
        best
    }

    /// Result of the grid search over powers and assignments.
    #[derive(Debug, Clone, PartialEq)]
    pub struct GridOptimum {
        pub objective: f64,
        pub p: Vec<f64>,
        pub d: f64,
        pub pi: Vec<usize>,
    }

    /// Minimizes the outer objective over every assignment and a logarithmic
    /// power grid (`points` per axis) followed by zoom refinement.
    ///
    /// For a given `p` the spacing is the largest one the power box allows,
    /// since the objective decreases in `d`.
    pub fn design_grid_search(profile: &SystemProfile, energies: &[f64], points: usize) -> GridOptimum {
        let k = energies.len();
        let caps = profile.received_caps();
        let sigma2 = profile.sigma2();
        let spread = caps.iter().copied().fold(0.0, f64::max) / caps.iter().copied().fold(f64::INFINITY, f64::min);
        let e_spread = energies.iter().copied().fold(0.0, f64::max) / energies.iter().copied().fold(f64::INFINITY, f64::min);
        let span = (100.0 * spread * e_spread.sqrt()).ln();

        let mut best: Option<GridOptimum> = None;
        for_each_permutation(k, |perm| {
            // perm[user] = sub-constellation; owner[j] = user carrying j.
            let mut owner = vec![0; k];
            for (user, &j) in perm.iter().enumerate() {
                owner[j] = user;
            }
            let lower: Vec<f64> = (0..k).map(|j| (1.0 / caps[owner[j]]).ln()).collect();
            let eval = |logp: &[f64]| -> (f64, f64) {
                let p: Vec<f64> = logp.iter().map(|v| v.exp()).collect();
                let d = (0..k)
                    .map(|j| (caps[owner[j]] / (p[j] * energies[j])).sqrt())
                    .fold(f64::INFINITY, f64::min);
                (design_objective(&p, energies, d, sigma2), d)
            };
            let mut center: Vec<f64> = lower.iter().map(|l| l + span / 2.0).collect();
            let mut half = span / 2.0;
            let mut n = points;
            let mut found = (f64::INFINITY, 0.0, center.clone());
            for _ in 0..60 {
                let step = 2.0 * half / (n - 1) as f64;
                let mut idx = vec![0usize; k];
                loop {
                    let logp: Vec<f64> = (0..k)
                        .map(|j| (center[j] - half + step * idx[j] as f64).max(lower[j]))
                        .collect();
                    let (v, d) = eval(&logp);
                    if v < found.0 {
                        found = (v, d, logp);
                    }
                    let mut axis = 0;
                    while axis < k {
                        idx[axis] += 1;
                        if idx[axis] < n {
                            break;
                        }
                        idx[axis] = 0;
                        axis += 1;
                    }
                    if axis == k {
                        break;
                    }
                }
                center = found.2.clone();
                half = 2.0 * step;
                n = 11;
            }
            let candidate = GridOptimum {
                objective: found.0,
                p: found.2.iter().map(|v| v.exp()).collect(),
                d: found.1,
                pi: perm.to_vec(),
            };
            if best.as_ref().map_or(true, |b| candidate.objective < b.objective) {
                best = Some(candidate);
            }
        });
        best.expect("at least one permutation")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellations::{build_pam_udcg, build_qam_udcg, RateAllocation};
    use crate::mustm::Codebook;
    use nalgebra::DMatrix;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn two_user() -> (UdcgDecomposition, SystemProfile, Vec<f64>) {
        let u = build_qam_udcg(&RateAllocation::uniform(2, 1, 1).unwrap(), 1.0).unwrap();
        let profile = SystemProfile::new(vec![1.0, 4.0], vec![1.0, 1.0], 0.1).unwrap();
        (u, profile, vec![1.0, 0.5])
    }

    #[test]
    fn kl_zero_on_identical_blocks() {
        let (u, profile, p) = two_user();
        let cb = Codebook::build(&u, &p, &Permutation::identity(2), &profile).unwrap();
        for e in cb.entries() {
            assert!(kl_divergence(e, e, &profile).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn kl_is_asymmetric() {
        let (u, profile, p) = two_user();
        let cb = Codebook::build(&u, &p, &Permutation::identity(2), &profile).unwrap();
        // Pairs with different determinants give different divergences.
        let (i, j) = (0..cb.len())
            .flat_map(|i| (0..cb.len()).map(move |j| (i, j)))
            .find(|&(i, j)| (gram(cb.entry(i), &profile).det() - gram(cb.entry(j), &profile).det()).abs() > 1e-3)
            .unwrap();
        let ab = kl_divergence(cb.entry(i), cb.entry(j), &profile).unwrap();
        let ba = kl_divergence(cb.entry(j), cb.entry(i), &profile).unwrap();
        assert!((ab - ba).abs() > 1e-6, "{ab} vs {ba}");
    }

    #[test]
    fn breakdown_matches_divergence() {
        let (u, profile, p) = two_user();
        let cb = Codebook::build(&u, &p, &Permutation::identity(2), &profile).unwrap();
        for i in 0..cb.len() {
            for j in 0..cb.len() {
                let direct = kl_divergence(cb.entry(i), cb.entry(j), &profile).unwrap();
                let b = kl_breakdown(&p, &cb.symbols(i), &cb.symbols(j), &profile).unwrap();
                assert!((b.total - direct).abs() < 1e-10, "{i},{j}");
                assert!(b.f1 >= 0.0 && b.f2 >= 0.0);
            }
        }
        let same = kl_breakdown(&p, &cb.symbols(5), &cb.symbols(5), &profile).unwrap();
        assert_eq!((same.f1, same.f2), (0.0, 0.0));
    }

    #[test]
    fn f1_vanishes_for_equal_energy_and_magnitude() {
        let profile = SystemProfile::normalized(2, 0.3).unwrap();
        let p = [1.0, 1.0];
        let s = [c(0.5, 0.5), c(1.0, -1.0)];
        let t = [c(0.5, -0.5), c(1.0, 1.0)];
        let b = kl_breakdown(&p, &s, &t, &profile).unwrap();
        assert!(b.f1.abs() < 1e-15);
        assert!(b.f2 > 0.0);
    }

    #[test]
    fn divergence_scales_with_antennas() {
        let (u, profile, p) = two_user();
        let cb = Codebook::build(&u, &p, &Permutation::identity(2), &profile).unwrap();
        let (r, rt) = (gram(cb.entry(1), &profile), gram(cb.entry(14), &profile));
        let single = kl_from_grams(&r, &rt).unwrap();
        let m = 3;
        let block = |g: &Gram2| {
            let mut out = DMatrix::<Complex64>::zeros(2 * m, 2 * m);
            for a in 0..m {
                out[(2 * a, 2 * a)] = c(g.r11, 0.0);
                out[(2 * a, 2 * a + 1)] = g.r12;
                out[(2 * a + 1, 2 * a)] = g.r12.conj();
                out[(2 * a + 1, 2 * a + 1)] = c(g.r22, 0.0);
            }
            out
        };
        let prod = block(&r) * block(&rt).try_inverse().unwrap();
        let general = prod.trace().re - prod.determinant().re.ln() - (2 * m) as f64;
        assert!((general - m as f64 * single).abs() < 1e-9 * general.abs());
    }

    #[test]
    fn worst_pair_two_user_qam() {
        let (u, profile, p) = two_user();
        let w = worst_case_pair_closed_form(&u, &p, &profile).unwrap();
        let sum_t: Complex64 = w.s_tilde.iter().sum();
        let sum_s: Complex64 = w.s.iter().sum();
        assert!((sum_t - c(0.5, 0.5)).norm() < 1e-12);
        assert!((sum_s - c(0.5, -0.5)).norm() < 1e-12);
        let b = kl_breakdown(&p, &w.s, &w.s_tilde, &profile).unwrap();
        assert!(b.f1.abs() < 1e-12);
        assert!((b.f2 - w.value).abs() < 1e-15);
        let oracle = oracle::exhaustive_min_f2(&u, &p, &profile, 1 << 20).unwrap();
        assert!((oracle.value - w.value).abs() < 1e-10);
        let cb = Codebook::build(&u, &p, &Permutation::identity(2), &profile).unwrap();
        assert_eq!(cb.symbols(w.s_index), w.s);
        assert_eq!(cb.symbols(w.s_tilde_index), w.s_tilde);
    }

    #[test]
    fn worst_pair_single_user_pam_is_a_neighbour() {
        let u = build_pam_udcg(&[2], 1.0).unwrap();
        let profile = SystemProfile::normalized(1, 0.5).unwrap();
        let w = worst_case_pair_closed_form(&u, &[1.0], &profile).unwrap();
        assert!(((w.s[0] - w.s_tilde[0]).norm() - 1.0).abs() < 1e-12);
        let oracle = oracle::exhaustive_min_f2(&u, &[1.0], &profile, 1 << 20).unwrap();
        assert!((oracle.value - w.value).abs() < 1e-12);
    }

    #[test]
    fn maximin_example() {
        let (pi, v) = maximin_ratio_assignment(&[1.0, 2.0, 3.0], &[2.0, 4.0, 9.0]).unwrap();
        assert!(pi.is_identity());
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
        assert!(oracle::exhaustive_maximin(&[1.0, 2.0, 3.0], &[2.0, 4.0, 9.0]) <= v);
        let (_, v) = maximin_ratio_assignment(&[2.0, 5.0], &[2.0, 5.0]).unwrap();
        assert_eq!(v, 1.0);
        assert!(maximin_ratio_assignment(&[1.0], &[1.0, 2.0]).is_err());
        assert!(maximin_ratio_assignment(&[0.0], &[1.0]).is_err());
        assert!(maximin_ratio_assignment(&[2.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn heap_visits_every_permutation_once() {
        let mut seen = std::collections::HashSet::new();
        oracle::for_each_permutation(4, |p| {
            assert!(seen.insert(p.to_vec()));
        });
        assert_eq!(seen.len(), 24);
    }

    #[test]
    fn design_two_user_example() {
        let (u, profile, _) = two_user();
        let sol = solve_design(&profile, &u).unwrap();
        assert!((sol.d_star - 2f64.sqrt()).abs() < 1e-12);
        assert!((sol.p_star[0] - 1.0).abs() < 1e-12);
        assert!((sol.p_star[1] - 0.5).abs() < 1e-12);
        assert!(sol.pi_star.is_identity());
        assert_eq!(sol.binding_users, vec![0]);
        let expected = (0.5f64.sqrt() + 2f64.sqrt() + 0.1 / sol.d_star).powi(2);
        assert!((sol.objective - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn design_single_user_meets_cap() {
        let u = build_qam_udcg(&RateAllocation::uniform(1, 1, 1).unwrap(), 1.0).unwrap();
        let profile = SystemProfile::new(vec![2.0], vec![0.5], 0.01).unwrap();
        let sol = solve_design(&profile, &u).unwrap();
        let e = sol.energies[0];
        assert!((sol.p_star[0] * e * sol.d_star.powi(2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn design_rejects_unsorted_users() {
        let (u, _, _) = two_user();
        let profile = SystemProfile::new(vec![4.0, 1.0], vec![1.0, 1.0], 0.1).unwrap();
        assert!(matches!(solve_design(&profile, &u), Err(Error::InvalidProfile(_))));
    }

    #[test]
    fn grid_search_does_not_beat_closed_form() {
        let (u, profile, _) = two_user();
        let sol = solve_design(&profile, &u).unwrap();
        let grid = oracle::design_grid_search(&profile, &sol.energies, 30);
        assert!(grid.objective >= sol.objective * (1.0 - 1e-6));
        assert!(grid.objective <= sol.objective * (1.0 + 1e-6));
    }

    #[test]
    fn design_serializes() {
        let (u, profile, _) = two_user();
        let sol = solve_design(&profile, &u).unwrap();
        let json = serde_json::to_string(&sol).unwrap();
        let back: DesignSolution = serde_json::from_str(&json).unwrap();
        assert_eq!(back, sol);
    }
}
