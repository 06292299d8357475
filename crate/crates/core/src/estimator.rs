//! Beam alignment from sounding observations.
//!
//! All indices are zero-based. Every argmax breaks ties toward the smallest
//! index.
//!
//! Soft alignment scores a codeword `e` against a stream `y` by the
//! normalized likelihood sample `|y^H C^H e|² / ‖C^H e‖²`; the joint variant
//! sums the scores of the four polarization streams. Two rounds are run over
//! the same observations: round 1 over the level-1 codebook, round 2 over the
//! level-2 codewords that fall inside the round-1 winner's sector and its two
//! neighbors.

use num_complex::Complex64;
use serde::Serialize;

use crate::channel::{ChannelForm, DualPolChannel};
use crate::linalg::{self, dominant_svd, inner, Mat2};
use crate::manifold::{quantize_phases, BeamCodebook};
use crate::sounding::{ObservationSet, TrainingCodebook, STREAMS};
use crate::{invalid, Error, Result};

const ZERO_PROJECTION: f64 = 1e-24;

fn argmax_first(scores: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.into_iter().enumerate() {
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((i, s)),
        }
    }
    best.map(|(i, _)| i)
}

/// `argmax_ℓ |y[ℓ]|²` over a single stream.
pub fn hard_align(y: &[Complex64]) -> Result<usize> {
    argmax_first(y.iter().map(|z| z.norm_sqr())).ok_or_else(|| invalid("empty observation"))
}

/// Hard alignment summing the sample powers of all four streams.
pub fn hard_align_joint(obs: &ObservationSet) -> Result<usize> {
    let l = obs.l;
    argmax_first((0..l).map(|i| obs.streams.iter().map(|s| s[i].norm_sqr()).sum::<f64>()))
        .ok_or_else(|| invalid("empty observation"))
}

/// `|y^H C^H e|² / ‖C^H e‖²`.
pub fn soft_score(y: &[Complex64], cb: &TrainingCodebook, e: &[Complex64]) -> Result<f64> {
    if y.len() != cb.l_count {
        return Err(Error::DimensionMismatch { expected: cb.l_count, actual: y.len() });
    }
    let g = cb.project(e)?;
    let den = linalg::norm_sqr(&g);
    if den <= ZERO_PROJECTION * linalg::norm_sqr(e).max(f64::MIN_POSITIVE) {
        return Err(Error::Degenerate("codeword has no projection onto the training span".into()));
    }
    Ok(inner(y, &g).norm_sqr() / den)
}

/// Codewords projected through the training matrix, `g_q = C^H e_q`.
#[derive(Debug, Clone)]
pub struct ProjectedBook {
    proj: Vec<Vec<Complex64>>,
    inv_norm: Vec<f64>,
}

impl ProjectedBook {
    pub fn new(cb: &TrainingCodebook, book: &BeamCodebook) -> Result<Self> {
        if book.dim() != cb.dim() {
            return Err(Error::DimensionMismatch { expected: cb.dim(), actual: book.dim() });
        }
        Self::from_codewords(cb, &book.codewords)
    }

    pub fn from_codewords(cb: &TrainingCodebook, codewords: &[Vec<Complex64>]) -> Result<Self> {
        let mut proj = Vec::with_capacity(codewords.len());
        let mut inv_norm = Vec::with_capacity(codewords.len());
        for e in codewords {
            let g = cb.project(e)?;
            let den = linalg::norm_sqr(&g);
            if den <= ZERO_PROJECTION * linalg::norm_sqr(e).max(f64::MIN_POSITIVE) {
                return Err(Error::Degenerate("codeword has no projection onto the training span".into()));
            }
            proj.push(g);
            inv_norm.push(1.0 / den);
        }
        Ok(Self { proj, inv_norm })
    }

    pub fn len(&self) -> usize {
        self.proj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proj.is_empty()
    }

    /// Sum over streams of `|y^H g_q|² / ‖g_q‖²`.
    pub fn joint_score(&self, streams: &[&[Complex64]], q: usize) -> f64 {
        let g = &self.proj[q];
        streams.iter().map(|y| inner(y, g).norm_sqr()).sum::<f64>() * self.inv_norm[q]
    }

    /// Scores and winning index over `candidates` (ties to the smallest codeword index).
    pub fn joint_argmax(&self, streams: &[&[Complex64]], candidates: &[usize]) -> Result<(usize, Vec<f64>)> {
        if candidates.is_empty() {
            return Err(invalid("empty candidate set"));
        }
        if let Some(&bad) = candidates.iter().find(|&&q| q >= self.len()) {
            return Err(invalid(format!("candidate {bad} outside codebook of size {}", self.len())));
        }
        let scores: Vec<f64> = candidates.iter().map(|&q| self.joint_score(streams, q)).collect();
        let mut best = 0usize;
        for i in 1..candidates.len() {
            let better = scores[i] > scores[best]
                || (scores[i] == scores[best] && candidates[i] < candidates[best]);
            if better {
                best = i;
            }
        }
        Ok((candidates[best], scores))
    }
}

fn stream_refs(obs: &ObservationSet) -> [&[Complex64]; 4] {
    [&obs.streams[0], &obs.streams[1], &obs.streams[2], &obs.streams[3]]
}

pub fn soft_align_joint(
    obs: &ObservationSet,
    cb: &TrainingCodebook,
    book: &BeamCodebook,
    candidate_set: &[usize],
) -> Result<usize> {
    if obs.l != cb.l_count {
        return Err(Error::DimensionMismatch { expected: cb.l_count, actual: obs.l });
    }
    let pb = ProjectedBook::new(cb, book)?;
    Ok(pb.joint_argmax(&stream_refs(obs), candidate_set)?.0)
}

/// Level-2 codewords whose ψ-centers lie in sectors `q₁-1 ..= q₁+1` of the
/// level-1 grid, clipped at the range edges.
pub fn round2_candidates(book1: &BeamCodebook, book2: &BeamCodebook, q1: usize) -> Vec<usize> {
    let last = book1.grid.q_count - 1;
    let lo = book1.grid.sector_bounds(q1.saturating_sub(1)).0;
    let hi = book1.grid.sector_bounds((q1 + 1).min(last)).1;
    book2
        .grid
        .centers
        .iter()
        .enumerate()
        .filter(|(_, &psi)| psi >= lo && psi <= hi)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentResult {
    pub round1_index: usize,
    pub round2_index: Option<usize>,
    pub h_hat: Vec<Complex64>,
    pub a_hat: Mat2,
    pub z_hat: [Complex64; 2],
    pub f_hat: Vec<Complex64>,
    pub z_norm: f64,
    pub f_norm: f64,
    /// Joint likelihood score of every level-1 codeword.
    pub round1_scores: Vec<f64>,
    /// `(level-2 index, score)` for each round-2 candidate.
    pub round2_scores: Vec<(usize, f64)>,
    /// Set when the estimated polarization matrix was zero.
    pub degenerate: bool,
}

/// Two-round soft aligner with codebook projections cached for one training codebook.
#[derive(Debug, Clone)]
pub struct Aligner {
    pub book1: BeamCodebook,
    pub book2: BeamCodebook,
    proj1: ProjectedBook,
    proj2: ProjectedBook,
    all1: Vec<usize>,
}

impl Aligner {
    pub fn new(cb: &TrainingCodebook, book1: &BeamCodebook, book2: &BeamCodebook) -> Result<Self> {
        if book1.mt != book2.mt || book1.grid.psi_lb != book2.grid.psi_lb || book1.grid.psi_ub != book2.grid.psi_ub {
            return Err(invalid("level-1 and level-2 codebooks must share M_t and the angular range"));
        }
        Ok(Self {
            book1: book1.clone(),
            book2: book2.clone(),
            proj1: ProjectedBook::new(cb, book1)?,
            proj2: ProjectedBook::new(cb, book2)?,
            all1: (0..book1.len()).collect(),
        })
    }

    /// Round-1 winner and the scores of every level-1 codeword.
    pub fn round1(&self, streams: &[&[Complex64]]) -> Result<(usize, Vec<f64>)> {
        self.proj1.joint_argmax(streams, &self.all1)
    }

    /// Both rounds; returns `(q̂₁, q̂₂, round-1 scores, round-2 scores)`.
    pub fn rounds(&self, streams: &[&[Complex64]]) -> Result<(usize, usize, Vec<f64>, Vec<(usize, f64)>)> {
        let (q1, s1) = self.round1(streams)?;
        let cands = round2_candidates(&self.book1, &self.book2, q1);
        let (q2, s2) = self.proj2.joint_argmax(streams, &cands)?;
        Ok((q1, q2, s1, cands.into_iter().zip(s2).collect()))
    }

    pub fn align(&self, obs: &ObservationSet, cb: &TrainingCodebook, phase_bits: u32) -> Result<AlignmentResult> {
        if obs.l != cb.l_count {
            return Err(Error::DimensionMismatch { expected: cb.l_count, actual: obs.l });
        }
        let (q1, q2, s1, s2) = self.rounds(&stream_refs(obs))?;
        let scale = (self.book2.dim() as f64).sqrt();
        let h_hat = linalg::scale(&self.book2.codewords[q2], scale);
        let a_hat = estimate_polarization(obs, cb, &h_hat)?;
        let bf = build_beamformers(&a_hat, &h_hat, phase_bits)?;
        Ok(AlignmentResult {
            round1_index: q1,
            round2_index: Some(q2),
            z_norm: (bf.z[0].norm_sqr() + bf.z[1].norm_sqr()).sqrt(),
            f_norm: linalg::norm(&bf.f),
            h_hat,
            a_hat,
            z_hat: bf.z,
            f_hat: bf.f,
            round1_scores: s1,
            round2_scores: s2,
            degenerate: bf.degenerate,
        })
    }
}

pub fn two_round_align(
    obs: &ObservationSet,
    cb: &TrainingCodebook,
    book1: &BeamCodebook,
    book2: &BeamCodebook,
    phase_bits: u32,
) -> Result<AlignmentResult> {
    Aligner::new(cb, book1, book2)?.align(obs, cb, phase_bits)
}

/// Hard alignment: the estimated sub-channel is the winning training vector itself.
pub fn hard_alignment(obs: &ObservationSet, cb: &TrainingCodebook, phase_bits: u32) -> Result<AlignmentResult> {
    let idx = hard_align_joint(obs)?;
    let c = &cb.columns[idx];
    let h_hat = linalg::scale(c, (cb.dim() as f64).sqrt() / linalg::norm(c));
    let a_hat = estimate_polarization(obs, cb, &h_hat)?;
    let bf = build_beamformers(&a_hat, &h_hat, phase_bits)?;
    Ok(AlignmentResult {
        round1_index: idx,
        round2_index: None,
        z_norm: (bf.z[0].norm_sqr() + bf.z[1].norm_sqr()).sqrt(),
        f_norm: linalg::norm(&bf.f),
        h_hat,
        a_hat,
        z_hat: bf.z,
        f_hat: bf.f,
        round1_scores: (0..obs.l).map(|i| obs.streams.iter().map(|s| s[i].norm_sqr()).sum()).collect(),
        round2_scores: Vec::new(),
        degenerate: bf.degenerate,
    })
}

/// Channel-gain estimate `y^H C^H h̄ / (√ρ ‖C^H h̄‖²)`.
pub fn estimate_alpha(y: &[Complex64], cb: &TrainingCodebook, h_bar: &[Complex64], snr: f64) -> Result<Complex64> {
    if y.len() != cb.l_count {
        return Err(Error::DimensionMismatch { expected: cb.l_count, actual: y.len() });
    }
    if !(snr > 0.0) {
        return Err(invalid("gain estimation needs a positive SNR"));
    }
    let g = cb.project(h_bar)?;
    let den = linalg::norm_sqr(&g);
    if den <= ZERO_PROJECTION * linalg::norm_sqr(h_bar).max(f64::MIN_POSITIVE) {
        return Err(Error::Degenerate("estimated sub-channel has no projection onto the training span".into()));
    }
    Ok(inner(y, &g) / (snr.sqrt() * den))
}

/// `Â` with every entry from [`estimate_alpha`] on its own stream.
pub fn estimate_polarization(obs: &ObservationSet, cb: &TrainingCodebook, h_hat: &[Complex64]) -> Result<Mat2> {
    let mut m = [[Complex64::default(); 2]; 2];
    for (a, b) in STREAMS {
        m[a][b] = estimate_alpha(obs.stream(a, b), cb, h_hat, obs.snr)?;
    }
    Ok(Mat2(m))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Beamformers {
    pub z: [Complex64; 2],
    /// Baseband transmit weights.
    pub v: [Complex64; 2],
    /// Unit-norm equal-gain analog part (dimension M_t/2).
    pub analog: Vec<Complex64>,
    /// `v ⊗ analog`.
    pub f: Vec<Complex64>,
    pub degenerate: bool,
}

fn assemble(z: [Complex64; 2], v: [Complex64; 2], analog: Vec<Complex64>, degenerate: bool) -> Beamformers {
    let mut f = Vec::with_capacity(2 * analog.len());
    for vb in v {
        f.extend(analog.iter().map(|x| vb * x));
    }
    Beamformers { z, v, analog, f, degenerate }
}

/// `ẑ, v̂` from the dominant singular pair of `Â`; `f̂ = v̂ ⊗ quantize(ĥ/‖ĥ‖)`.
pub fn build_beamformers(a_hat: &Mat2, h_hat: &[Complex64], phase_bits: u32) -> Result<Beamformers> {
    if !a_hat.is_finite() {
        return Err(invalid("polarization estimate is not finite"));
    }
    let hn = linalg::norm(h_hat);
    if !(hn > 0.0) {
        return Err(invalid("sub-channel estimate is zero"));
    }
    let analog = quantize_phases(&linalg::scale(h_hat, 1.0 / hn), phase_bits);
    let e1 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    Ok(match dominant_svd(a_hat) {
        Some(svd) => assemble(svd.left, svd.right, analog, false),
        None => assemble(e1, e1, analog, true),
    })
}

/// Beamformers from perfect channel knowledge.
///
/// Single-path channel: the dominant singular pair of the true `A` and the
/// true `h`. Ray-sum channel: the analog beam is steered at the LOS ray and
/// the baseband pair is the dominant singular pair of the resulting 2×2
/// effective channel, which is not guaranteed to be the global optimum.
pub fn full_csi_baseline(channel: &DualPolChannel, phase_bits: u32) -> Result<Beamformers> {
    match channel.form {
        ChannelForm::Simplified => build_beamformers(&channel.pol.entries, &channel.sub_channel.entries, phase_bits),
        ChannelForm::RaySum => {
            let h = &channel.sub_channel.entries;
            let analog = quantize_phases(&linalg::scale(h, 1.0 / linalg::norm(h)), phase_bits);
            let n = channel.mt / 2;
            let mut m = [[Complex64::default(); 2]; 2];
            for (a, row) in m.iter_mut().enumerate() {
                for (b, entry) in row.iter_mut().enumerate() {
                    *entry = channel.block[a][b * n..(b + 1) * n].iter().zip(&analog).map(|(x, y)| x * y).sum();
                }
            }
            let e1 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
            Ok(match dominant_svd(&Mat2(m)) {
                Some(svd) => assemble(svd.left, svd.right, analog, false),
                None => assemble(e1, e1, analog, true),
            })
        }
    }
}
