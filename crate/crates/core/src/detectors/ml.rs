use nalgebra::DMatrix;
use num_complex::Complex64;

use super::DetectionResult;
use crate::error::{Error, Result};
use crate::mustm::{gram, index_to_bits, Codebook, Gram2, SystemProfile};

/// Pairwise noncoherent ML detector over a reference slot `y1` and a data
/// slot `y2`.
///
/// For the Gram `[[a, c], [conj(c), b]]` of each candidate the metric is
///
/// ```text
/// (a |y2|^2 + b |y1|^2 - 2 Re(c y2^H y1)) / (a b - |c|^2) + M ln(a b - |c|^2)
/// ```
///
/// and the smallest value wins, ties going to the lowest index.
#[derive(Debug, Clone)]
pub struct PairwiseMlDetector {
    candidates: Vec<Candidate>,
    bits: u32,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    a: f64,
    b: f64,
    c: Complex64,
    inv_det: f64,
    ln_det: f64,
}

impl PairwiseMlDetector {
    pub fn new(cb: &Codebook, profile: &SystemProfile) -> Self {
        let grams = cb.entries().iter().map(|e| gram(e, profile)).collect();
        Self::from_grams(grams, cb.bits_per_codeword()).expect("codebook Grams are positive definite")
    }

    /// Detector over arbitrary candidate Grams; `bits` is the label width.
    pub fn from_grams(grams: Vec<Gram2>, bits: u32) -> Result<Self> {
        if grams.is_empty() {
            return Err(Error::InvalidArgument("no candidates".into()));
        }
        let candidates = grams
            .iter()
            .map(|g| {
                let det = g.det();
                if !(det > 0.0 && g.r11 > 0.0) {
                    return Err(Error::Singular(format!("candidate Gram {g:?}")));
                }
                Ok(Candidate {
                    a: g.r11,
                    b: g.r22,
                    c: g.r12,
                    inv_det: 1.0 / det,
                    ln_det: det.ln(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { candidates, bits })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Decision from the sufficient statistics `|y1|^2`, `|y2|^2`, `y2^H y1`.
    pub fn decide(&self, e1: f64, e2: f64, cross: Complex64, antennas: usize) -> (usize, f64) {
        let m = antennas as f64;
        let mut best = (0, f64::INFINITY);
        for (i, cand) in self.candidates.iter().enumerate() {
            let quad = (cand.a * e2 + cand.b * e1 - 2.0 * (cand.c * cross).re) * cand.inv_det;
            let metric = quad + m * cand.ln_det;
            if metric < best.1 {
                best = (i, metric);
            }
        }
        best
    }

    pub fn detect(&self, y1: &[Complex64], y2: &[Complex64]) -> DetectionResult {
        let (e1, e2, cross) = slot_statistics(y1, y2);
        let (index, metric) = self.decide(e1, e2, cross, y1.len());
        DetectionResult {
            index,
            bits: index_to_bits(index, self.bits),
            metric,
        }
    }
}

/// `(|y1|^2, |y2|^2, y2^H y1)`.
pub fn slot_statistics(y1: &[Complex64], y2: &[Complex64]) -> (f64, f64, Complex64) {
    let mut e1 = 0.0;
    let mut e2 = 0.0;
    let mut cross = Complex64::new(0.0, 0.0);
    for (a, b) in y1.iter().zip(y2) {
        e1 += a.norm_sqr();
        e2 += b.norm_sqr();
        cross += b.conj() * a;
    }
    (e1, e2, cross)
}

/// One-shot pairwise detection; builds the candidate Grams on every call.
pub fn ml_noncoherent_pairwise(
    y1: &[Complex64],
    y2: &[Complex64],
    cb: &Codebook,
    profile: &SystemProfile,
) -> DetectionResult {
    PairwiseMlDetector::new(cb, profile).detect(y1, y2)
}

/// Generic noncoherent ML over a `M x T` block: the candidate `X` (`K x T`)
/// minimizing `tr(R^-1 Y^H Y) + M ln det R`, `R = X^H D X + sigma^2 I`.
pub fn ml_noncoherent_generic(
    y: &DMatrix<Complex64>,
    candidates: &[DMatrix<Complex64>],
    profile: &SystemProfile,
) -> Result<usize> {
    let t = y.ncols();
    let m = y.nrows() as f64;
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        profile.users(),
        profile.betas().iter().map(|&b| Complex64::new(b, 0.0)),
    ));
    let sample = y.adjoint() * y;
    let mut best = (0, f64::INFINITY);
    for (i, x) in candidates.iter().enumerate() {
        if x.nrows() != profile.users() || x.ncols() != t {
            return Err(Error::Dimension(format!(
                "candidate {i} is {}x{}, expected {}x{t}",
                x.nrows(),
                x.ncols(),
                profile.users()
            )));
        }
        let mut r = x.adjoint() * &d * x;
        for j in 0..t {
            r[(j, j)] += profile.sigma2();
        }
        let chol = r
            .cholesky()
            .ok_or_else(|| Error::Singular(format!("candidate {i}")))?;
        let ln_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.re.ln()).sum::<f64>();
        let metric = chol.solve(&sample).trace().re + m * ln_det;
        if metric < best.1 {
            best = (i, metric);
        }
    }
    Ok(best.0)
}
