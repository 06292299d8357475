//! Misalignment-probability bound and sounding-length planning.
//!
//! Round-1 alignment fails when a noise-only likelihood sample beats the
//! sample of the correct sector. Treating the correct sample `X` as a
//! noncentral exponential with noncentrality `μ` and the `Q₁ − 3` samples
//! outside the correct sector and its neighbors as unit exponentials gives
//!
//! ```text
//! P_mis ≤ Σ_{q=1}^{Q₁−3} C(Q₁−3, q) (−1)^{q+1} exp(−μ q/(1+q)) / (1+q)
//! ```
//!
//! The planner picks the shortest sounding length whose bound, evaluated at
//! the worst-case noncentrality `ν(ℓ)`, is below the target.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{self, ChannelConfig, ChannelForm, DualPolChannel};
use crate::ddouble::Dd;
use crate::estimator::ProjectedBook;
use crate::manifold::{build_codebook, gain_gamma};
use crate::sounding::{dft_training, observe, observe_scaled};
use crate::stats::{proportion, Proportion};
use crate::{invalid, rng, Result};

/// Largest sounding length the planner searches.
pub const L_SEARCH_CAP: usize = 1_000_000;

/// Largest level-1 codebook accepted by [`pmis_upper`].
pub const MAX_Q1: usize = 64;

/// `e^{-x} I_k(x)` for `k = 0..=kmax` by Miller's backward recurrence,
/// normalized with `I_0 + 2 Σ I_k = e^x`.
fn scaled_bessel_i(x: f64, kmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = kmax + 30 + (10.0 * x.sqrt()) as usize;
    let mut next = 0.0f64;
    let mut cur = 1e-30f64;
    let mut norm = 0.0f64;
    for k in (1..=start).rev() {
        if k <= kmax {
            out[k] = cur;
        }
        norm += 2.0 * cur;
        let prev = (2.0 * k as f64 / x) * cur + next;
        next = cur;
        cur = prev;
        if cur > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut().skip(k) {
                *v *= 1e-250;
            }
        }
    }
    out[0] = cur;
    norm += cur;
    for v in &mut out {
        *v /= norm;
    }
    out
}

/// First-order Marcum Q function `Q₁(a, b)`.
///
/// Uses the Neumann series in exponentially scaled Bessel functions; the
/// series is taken on the side that keeps the ratio `min/max(a, b)` below one.
pub fn marcum_q1(a: f64, b: f64) -> f64 {
    assert!(a >= 0.0 && b >= 0.0, "marcum_q1 needs nonnegative arguments");
    if b == 0.0 {
        return 1.0;
    }
    if a == 0.0 {
        return (-0.5 * b * b).exp();
    }
    let x = a * b;
    let d = a - b;
    let scale = (-0.5 * d * d).exp();
    if scale == 0.0 {
        return if a > b { 1.0 } else { 0.0 };
    }
    let kmax = 40 + (12.0 * x.sqrt()) as usize;
    let ik = scaled_bessel_i(x, kmax);
    let (ratio, first) = if a <= b { (a / b, 0) } else { (b / a, 1) };
    let mut sum = 0.0;
    let mut pow = if first == 0 { 1.0 } else { ratio };
    for &i in &ik[first..] {
        let term = pow * i;
        sum += term;
        if term <= 1e-17 * sum {
            break;
        }
        pow *= ratio;
    }
    let q = if a <= b { scale * sum } else { 1.0 - scale * sum };
    q.clamp(0.0, 1.0)
}

/// Approximate CDF of the correct-sector likelihood sample,
/// `1 − Q₁(√(2μ), √(2x))`.
pub fn x_cdf_approx(x: f64, mu_sq: f64) -> f64 {
    assert!(x >= 0.0 && mu_sq >= 0.0, "x_cdf_approx needs nonnegative arguments");
    1.0 - marcum_q1((2.0 * mu_sq).sqrt(), (2.0 * x).sqrt())
}

fn binomial_dd(n: usize, k: usize) -> Dd {
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    let hi = c as f64;
    let lo = (c as i128 - hi as i128) as f64;
    Dd::from_f64(hi) + Dd::from_f64(lo)
}

/// Upper bound on the round-1 misalignment probability for noncentrality
/// `mu_sq` and a level-1 codebook of `q1` codewords.
///
/// The alternating binomial sum cancels badly in `f64` once `q1` reaches a
/// few dozen, so it is accumulated in double-double arithmetic.
pub fn pmis_upper(mu_sq: f64, q1: usize) -> Result<f64> {
    if q1 < 4 {
        return Err(invalid(format!("misalignment bound needs Q1 >= 4, got {q1}")));
    }
    if q1 > MAX_Q1 {
        return Err(invalid(format!("misalignment bound supports Q1 <= {MAX_Q1}, got {q1}")));
    }
    if mu_sq.is_nan() || mu_sq < 0.0 {
        return Err(invalid("noncentrality must be nonnegative"));
    }
    if mu_sq == f64::INFINITY {
        return Ok(0.0);
    }
    let n = q1 - 3;
    let mu = Dd::from_f64(mu_sq);
    let mut sum = Dd::ZERO;
    for q in 1..=n {
        let qd = Dd::from_f64(q as f64);
        let qp1 = Dd::from_f64((q + 1) as f64);
        let term = binomial_dd(n, q) * (-(mu * qd / qp1)).exp() / qp1;
        sum = if q % 2 == 1 { sum + term } else { sum - term };
    }
    Ok(sum.to_f64().clamp(0.0, 1.0))
}

/// Upper bound `ς²` on the mean gain of the best level-1 codeword:
/// `Γ_{M_t/2}(T/2)` with `T = (sin θ_UB − sin θ_LB)/M_t`.
pub fn varsigma_sq(mt: usize, theta_lb: f64, theta_ub: f64) -> Result<f64> {
    if mt < 4 || !mt.is_multiple_of(4) {
        return Err(invalid(format!("M_t must be a positive multiple of 4, got {mt}")));
    }
    gain_bound(mt / 2, mt / 2, theta_lb, theta_ub)
}

/// `Γ_n(T/2)` for a `q`-sector codebook over `[θ_LB, θ_UB]`, where `T` is the
/// ψ-domain sector half-width. Bounds the mean gain of the best codeword on an
/// `n`-element array when sectors are no wider than the main lobe (`q ≥ n`).
pub fn gain_bound(n: usize, q: usize, theta_lb: f64, theta_ub: f64) -> Result<f64> {
    if n == 0 || q == 0 {
        return Err(invalid("array size and codebook size must be positive"));
    }
    if !(theta_lb < theta_ub) || theta_lb < -PI / 2.0 || theta_ub > PI / 2.0 {
        return Err(invalid("need -π/2 <= θ_LB < θ_UB <= π/2"));
    }
    let t = (theta_ub.sin() - theta_lb.sin()) / (2 * q) as f64;
    Ok(gain_gamma(n, t / 2.0))
}

/// Inputs of [`select_l`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanRequest {
    /// Linear SNR ρ.
    pub snr: f64,
    pub mt: usize,
    /// Planning value of `|α|²`.
    pub alpha_sq: f64,
    /// Target misalignment probability ε.
    pub epsilon: f64,
    pub theta_lb: f64,
    pub theta_ub: f64,
    /// Rician K-factor of the deployment channel. The noncentrality is scaled
    /// by the line-of-sight power fraction `K/(1+K)` because only the LOS ray
    /// feeds the correct-sector sample. `None` plans for a pure single path.
    pub k_factor_db: Option<f64>,
}

impl Default for PlanRequest {
    fn default() -> Self {
        Self {
            snr: 0.1,
            mt: 32,
            alpha_sq: 0.5,
            epsilon: 0.6,
            theta_lb: -PI / 3.0,
            theta_ub: PI / 3.0,
            k_factor_db: Some(13.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SoundingPlan {
    pub snr: f64,
    pub mt: usize,
    pub q1: usize,
    pub alpha_sq: f64,
    pub epsilon: f64,
    pub varsigma_sq: f64,
    /// Fraction of channel power the noncentrality is credited with.
    pub los_fraction: f64,
    /// Smallest ℓ meeting the target (the search cap when `capped`).
    pub l_hat: usize,
    /// `max(l_hat, M_t/2)`.
    pub l_final: usize,
    pub pmis_at_l: f64,
    /// True when no ℓ up to the search cap met the target.
    pub capped: bool,
}

impl SoundingPlan {
    /// Worst-case noncentrality `ν(ℓ) = (ρℓ/2)·|α|²·ς²·K/(1+K)`.
    pub fn nu(&self, ell: usize) -> f64 {
        nu(self.snr, ell, self.alpha_sq, self.varsigma_sq, self.los_fraction)
    }

    /// Bound value at each ℓ in `ells`.
    pub fn bound_curve(&self, ells: &[usize]) -> Result<Vec<(usize, f64)>> {
        ells.iter().map(|&l| Ok((l, pmis_upper(self.nu(l), self.q1)?))).collect()
    }
}

fn nu(snr: f64, ell: usize, alpha_sq: f64, varsigma_sq: f64, los: f64) -> f64 {
    0.5 * snr * ell as f64 * alpha_sq * varsigma_sq * los
}

/// Shortest sounding length whose misalignment bound is below ε.
///
/// The bound decreases in ℓ, so the "largest bound still under ε" and the
/// "smallest feasible ℓ" coincide; it is found by galloping then bisection.
/// The result is floored at `M_t/2` so the DFT training stays tight.
pub fn select_l(req: &PlanRequest) -> Result<SoundingPlan> {
    if !(req.snr > 0.0 && req.snr.is_finite()) {
        return Err(invalid("planning SNR must be positive and finite"));
    }
    if !(req.epsilon > 0.0 && req.epsilon < 1.0) {
        return Err(invalid(format!("ε must lie in (0, 1), got {}", req.epsilon)));
    }
    if !(req.alpha_sq > 0.0 && req.alpha_sq.is_finite()) {
        return Err(invalid("planning |α|² must be positive"));
    }
    let vs = varsigma_sq(req.mt, req.theta_lb, req.theta_ub)?;
    let q1 = req.mt / 2;
    let los = match req.k_factor_db {
        Some(k) if k.is_nan() => return Err(invalid("K-factor must be a number")),
        Some(k) => channel::los_fraction(k),
        None => 1.0,
    };
    let bound = |ell: usize| pmis_upper(nu(req.snr, ell, req.alpha_sq, vs, los), q1);
    let feasible = |ell: usize| -> Result<bool> { Ok(bound(ell)? < req.epsilon) };

    let mut lo = 0usize;
    let mut hi = 1usize;
    let mut capped = false;
    while !feasible(hi)? {
        lo = hi;
        if hi == L_SEARCH_CAP {
            capped = true;
            break;
        }
        hi = (hi * 2).min(L_SEARCH_CAP);
    }
    let l_hat = if capped {
        L_SEARCH_CAP
    } else {
        // invariant: lo infeasible (or 0), hi feasible
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if feasible(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let l_final = l_hat.max(req.mt / 2);
    Ok(SoundingPlan {
        snr: req.snr,
        mt: req.mt,
        q1,
        alpha_sq: req.alpha_sq,
        epsilon: req.epsilon,
        varsigma_sq: vs,
        los_fraction: los,
        l_hat,
        l_final,
        pmis_at_l: bound(l_final)?,
        capped,
    })
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Plan table: `snr_db, mt, epsilon, alpha_sq, varsigma_sq, l_hat, l_final, pmis_bound`.
pub fn write_plan_csv<W: Write>(out: W, plans: &[SoundingPlan]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["snr_db", "mt", "epsilon", "alpha_sq", "varsigma_sq", "l_hat", "l_final", "pmis_bound"])?;
    for p in plans {
        w.write_record([
            format!("{}", round_db(linear_to_db(p.snr))),
            p.mt.to_string(),
            p.epsilon.to_string(),
            p.alpha_sq.to_string(),
            format!("{:.9}", p.varsigma_sq),
            p.l_hat.to_string(),
            p.l_final.to_string(),
            format!("{:.9}", p.pmis_at_l),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Strips float noise from a dB value that came from `db_to_linear`.
pub(crate) fn round_db(db: f64) -> f64 {
    (db * 1e9).round() / 1e9
}

/// Channel draws used by [`pmis_empirical`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum MisalignmentModel {
    /// The conditions the bound is stated for: one line-of-sight path with
    /// `|α|² = plan.alpha_sq` (uniform phase) observed on a single stream.
    FixedGain,
    /// Full channel draws from the config, scored jointly over all streams.
    Channel(ChannelForm),
}

/// Monte Carlo round-1 misalignment frequency.
///
/// Each trial draws a channel, finds the noise-free argmax `q̌`, then sounds
/// with noise for `plan.l_final` slots and counts a miss when the noisy
/// winner is not within one sector of `q̌`. Trials run in parallel on the
/// current rayon pool with per-trial streams derived from `seed`.
pub fn pmis_empirical(
    cfg: &ChannelConfig,
    model: MisalignmentModel,
    plan: &SoundingPlan,
    n_trials: usize,
    seed: u64,
) -> Result<Proportion> {
    if n_trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    if cfg.mt != plan.mt {
        return Err(invalid("channel and plan disagree on M_t"));
    }
    cfg.validate()?;
    let cb = dft_training(plan.mt, plan.l_final)?;
    let book = build_codebook(1, plan.mt, cfg.theta_lb, cfg.theta_ub, 0)?;
    let proj = ProjectedBook::new(&cb, &book)?;
    let all: Vec<usize> = (0..book.len()).collect();
    let model_id = match model {
        MisalignmentModel::FixedGain => 0,
        MisalignmentModel::Channel(f) => 1 + f as u64,
    };
    let key = rng::derive_key(seed, &[model_id, plan.mt as u64, plan.l_final as u64, plan.snr.to_bits()]);
    let misses: Vec<bool> = (0..n_trials as u64)
        .into_par_iter()
        .map(|t| -> Result<bool> {
            let mut r = rng::stream_rng(key, t);
            let (q_check, q_hat) = match model {
                MisalignmentModel::FixedGain => {
                    let theta = r.random_range(cfg.theta_lb..=cfg.theta_ub);
                    let alpha = Complex64::from_polar(plan.alpha_sq.sqrt(), r.random_range(0.0..2.0 * PI));
                    let zero = Complex64::default();
                    let pol = channel::polarization_matrix(0.0, [alpha, zero, zero, zero]);
                    let ch = DualPolChannel::simplified(plan.mt, pol, theta, cfg.spacing_ratio)?;
                    let amp = plan.snr.sqrt();
                    let clean: Vec<Complex64> = cb.project(&ch.sub_channel_ab(0, 0))?.into_iter().map(|s| s * amp).collect();
                    let noisy: Vec<Complex64> = clean.iter().map(|s| s + channel::complex_gaussian(&mut r, 1.0)).collect();
                    (proj.joint_argmax(&[&clean], &all)?.0, proj.joint_argmax(&[&noisy], &all)?.0)
                }
                MisalignmentModel::Channel(form) => {
                    let ch = channel::sample(form, cfg, &mut r)?;
                    let clean = observe_scaled(&ch, &cb, plan.snr, 0.0, &mut r)?;
                    let noisy = observe(&ch, &cb, plan.snr, &mut r)?;
                    let q_check = proj.joint_argmax(&clean.streams.each_ref().map(|s| s.as_slice()), &all)?.0;
                    (q_check, proj.joint_argmax(&noisy.streams.each_ref().map(|s| s.as_slice()), &all)?.0)
                }
            };
            Ok(q_hat.abs_diff(q_check) > 1)
        })
        .collect::<Result<_>>()?;
    Ok(proportion(misses.iter().filter(|&&m| m).count(), n_trials))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::complex_gaussian;
    use crate::oracle;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn marcum_edges() {
        assert_eq!(marcum_q1(3.0, 0.0), 1.0);
        for b in [0.1, 1.0, 2.5, 7.0] {
            assert!((marcum_q1(0.0, b) - (-b * b / 2.0f64).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn marcum_equal_arguments() {
        // Q₁(a, a) = (1 + e^{-a²} I₀(a²)) / 2
        for a in [0.5f64, 1.0, 3.0, 10.0] {
            let i0 = scaled_bessel_i(a * a, 0)[0];
            assert!((marcum_q1(a, a) - 0.5 * (1.0 + i0)).abs() < 1e-14);
        }
    }

    #[test]
    fn scaled_bessel_known_values() {
        // e^{-1} I_0(1), e^{-1} I_1(1), e^{-10} I_0(10)
        let v = scaled_bessel_i(1.0, 3);
        assert!((v[0] - 0.465_759_607_593_640_6).abs() < 1e-15);
        assert!((v[1] - 0.207_910_415_349_708_4).abs() < 1e-15);
        assert!((scaled_bessel_i(10.0, 0)[0] - 0.127_833_337_163_428_6).abs() < 1e-15);
    }

    #[test]
    fn marcum_matches_quadrature_spot() {
        for (a, b) in [(1.0, 2.0), (2.0, 1.0), (5.0, 5.5), (0.3, 0.2), (12.0, 9.0)] {
            let q = marcum_q1(a, b);
            let o = oracle::marcum_q1_quadrature(a, b);
            assert!((q - o).abs() < 1e-10, "({a},{b}): {q} vs {o}");
        }
    }

    #[test]
    fn x_cdf_edges() {
        assert_eq!(x_cdf_approx(0.0, 3.0), 0.0);
        for x in [0.1, 1.0, 4.0] {
            assert!((x_cdf_approx(x, 0.0) - (1.0 - (-x).exp())).abs() < 1e-15);
        }
    }

    #[test]
    fn x_cdf_matches_sampler() {
        // X = |m + n|² with |m|² = 1.5, n ~ CN(0, 1)
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = 1.5f64.sqrt();
        let n = 1_000_000;
        let hits = (0..n)
            .filter(|_| (complex_gaussian(&mut rng, 1.0) + m).norm_sqr() <= 2.0)
            .count();
        let emp = hits as f64 / n as f64;
        assert!((emp - x_cdf_approx(2.0, 1.5)).abs() < 0.003);
    }

    #[test]
    fn x_cdf_is_a_cdf() {
        for mu in [0.0, 0.5, 3.0, 20.0] {
            let mut prev = 0.0;
            for i in 0..=400 {
                let f = x_cdf_approx(i as f64 * 0.25, mu);
                assert!(f >= prev - 1e-15);
                prev = f;
            }
            assert!(prev > 1.0 - 1e-9);
        }
    }

    #[test]
    fn pmis_at_zero_is_harmonic() {
        assert!((pmis_upper(0.0, 16).unwrap() - 13.0 / 14.0).abs() < 1e-12);
        for q1 in 4..=MAX_Q1 {
            let n = (q1 - 3) as f64;
            assert!((pmis_upper(0.0, q1).unwrap() - n / (n + 1.0)).abs() < 1e-12, "q1 = {q1}");
        }
    }

    #[test]
    fn pmis_guards() {
        assert!(pmis_upper(1.0, 3).is_err());
        assert!(pmis_upper(1.0, 65).is_err());
        assert!(pmis_upper(-1.0, 16).is_err());
        assert_eq!(pmis_upper(f64::INFINITY, 16).unwrap(), 0.0);
    }

    #[test]
    fn pmis_matches_quadrature() {
        for q1 in [16, 32] {
            for mu in [0.5, 2.0, 8.0] {
                let b = pmis_upper(mu, q1).unwrap();
                let o = oracle::pmis_quadrature(mu, q1);
                assert!((b - o).abs() < 1e-6, "μ={mu}, Q1={q1}: {b} vs {o}");
            }
        }
    }

    #[test]
    fn pmis_in_unit_interval_and_monotone() {
        for q1 in [8, 16, 32] {
            let mut prev = 1.0;
            for i in 0..=500 {
                let p = pmis_upper(i as f64 * 0.1, q1).unwrap();
                assert!(p > 0.0 && p < 1.0, "Q1={q1} μ={}", i as f64 * 0.1);
                assert!(p <= prev + 1e-15);
                prev = p;
            }
        }
    }

    #[test]
    fn varsigma_values() {
        let v32 = varsigma_sq(32, -PI / 3.0, PI / 3.0).unwrap();
        let v64 = varsigma_sq(64, -PI / 3.0, PI / 3.0).unwrap();
        assert!((v32 - gain_gamma(16, 0.027_063_293_868_263_7)).abs() < 1e-12);
        assert!((v32 - 0.855_508).abs() < 1e-5);
        assert!((v64 - gain_gamma(32, (PI / 3.0).sin() / 64.0)).abs() < 1e-15);
        assert!(varsigma_sq(32, -PI / 6.0, PI / 6.0).unwrap() > v32);
        assert!(varsigma_sq(30, -1.0, 1.0).is_err());
    }

    fn table_row(mt: usize) -> Vec<usize> {
        [-10.0, -8.0, -6.0, -4.0, -2.0, 0.0, 2.0]
            .iter()
            .map(|&db| select_l(&PlanRequest { snr: db_to_linear(db), mt, ..Default::default() }).unwrap().l_final)
            .collect()
    }

    #[test]
    fn planner_table() {
        assert_eq!(table_row(32), vec![93, 59, 37, 24, 16, 16, 16]);
        assert_eq!(table_row(64), vec![129, 81, 52, 33, 32, 32, 32]);
    }

    #[test]
    fn plan_invariants() {
        let p = select_l(&PlanRequest::default()).unwrap();
        assert!(p.l_final >= p.mt / 2 && !p.capped);
        assert!(p.pmis_at_l < p.epsilon);
        let before = pmis_upper(p.nu(p.l_hat - 1), p.q1).unwrap();
        assert!(before >= p.epsilon);
        let slack = select_l(&PlanRequest { epsilon: 0.9999, ..Default::default() }).unwrap();
        assert_eq!(slack.l_final, 16);
    }

    #[test]
    fn plan_capped_and_errors() {
        let p = select_l(&PlanRequest { snr: 1e-12, epsilon: 0.01, ..Default::default() }).unwrap();
        assert!(p.capped);
        assert_eq!(p.l_hat, L_SEARCH_CAP);
        assert!(select_l(&PlanRequest { epsilon: 1.0, ..Default::default() }).is_err());
        assert!(select_l(&PlanRequest { snr: 0.0, ..Default::default() }).is_err());
        assert!(select_l(&PlanRequest { mt: 256, ..Default::default() }).is_err());
    }

    #[test]
    fn plan_without_k_factor_needs_less() {
        let with = select_l(&PlanRequest::default()).unwrap();
        let without = select_l(&PlanRequest { k_factor_db: None, ..Default::default() }).unwrap();
        assert!(without.l_hat < with.l_hat);
        assert_eq!(without.los_fraction, 1.0);
    }

    proptest! {
        #[test]
        fn select_l_monotone(db in -12.0f64..4.0, step in 0.1f64..3.0, eps in 0.3f64..0.9, de in 0.01f64..0.09) {
            for mt in [32usize, 64] {
                let base = PlanRequest { snr: db_to_linear(db), mt, epsilon: eps, ..Default::default() };
                let l0 = select_l(&base).unwrap().l_final;
                let l_snr = select_l(&PlanRequest { snr: db_to_linear(db + step), ..base.clone() }).unwrap().l_final;
                let l_eps = select_l(&PlanRequest { epsilon: eps + de, ..base }).unwrap().l_final;
                prop_assert!(l_snr <= l0);
                prop_assert!(l_eps <= l0);
            }
        }
    }

    #[test]
    fn plan_csv_columns() {
        let plans = vec![select_l(&PlanRequest::default()).unwrap()];
        let mut buf = Vec::new();
        write_plan_csv(&mut buf, &plans).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "snr_db,mt,epsilon,alpha_sq,varsigma_sq,l_hat,l_final,pmis_bound");
        assert!(lines.next().unwrap().starts_with("-10,32,0.6,0.5,0.8555"));
    }

    #[test]
    fn empirical_noiseless_surrogate_is_zero() {
        let cfg = ChannelConfig::default();
        let plan = select_l(&PlanRequest { snr: 1e8, ..Default::default() }).unwrap();
        for model in [MisalignmentModel::FixedGain, MisalignmentModel::Channel(ChannelForm::Simplified)] {
            assert_eq!(pmis_empirical(&cfg, model, &plan, 200, 3).unwrap().successes, 0);
        }
        let mut cfg64 = cfg;
        cfg64.mt = 64;
        assert!(pmis_empirical(&cfg64, MisalignmentModel::FixedGain, &plan, 10, 3).is_err());
    }
}
