//! Array manifold, beam-gain function and the two-level beam codebooks.
//!
//! Sectors and codeword directions live in the ψ-domain (`ψ = sin θ`), where a
//! ULA beam has constant width. A level-1 codebook splits `[sin θ_LB, sin θ_UB]`
//! into `Q₁ = M_t/2` equal sectors and a level-2 codebook into `Q₂ = 2·M_t`,
//! so every level-1 sector holds exactly four level-2 centers.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::{invalid, linalg, Result};

/// Element spacing in wavelengths used when none is given.
pub const DEFAULT_SPACING: f64 = 0.5;

/// ULA array response `a_N(θ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteeringVector {
    pub n_elements: usize,
    pub aod_rad: f64,
    pub spacing_ratio: f64,
    pub entries: Vec<Complex64>,
}

impl SteeringVector {
    pub fn as_slice(&self) -> &[Complex64] {
        &self.entries
    }
}

/// Entries `exp(j·2π·(d/λ)·k·ψ)` for `k = 0..n`.
pub(crate) fn phase_ramp(n: usize, psi: f64, spacing: f64) -> Vec<Complex64> {
    (0..n)
        .map(|k| Complex64::from_polar(1.0, 2.0 * PI * spacing * k as f64 * psi))
        .collect()
}

pub fn steering_vector(n: usize, aod: f64, spacing: f64) -> Result<SteeringVector> {
    if n == 0 {
        return Err(invalid("steering vector needs at least one element"));
    }
    if !aod.is_finite() {
        return Err(invalid("angle of departure must be finite"));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(invalid("element spacing must be positive"));
    }
    Ok(SteeringVector {
        n_elements: n,
        aod_rad: aod,
        spacing_ratio: spacing,
        entries: phase_ramp(n, aod.sin(), spacing),
    })
}

/// Normalized beam gain `Γ_n(η) = sin²(πηn/2) / (n² sin²(πη/2))`.
pub fn gain_gamma(n: usize, eta: f64) -> f64 {
    let n = n as f64;
    let den = (PI * eta / 2.0).sin();
    if den.abs() < 1e-12 {
        return 1.0;
    }
    let num = (PI * eta * n / 2.0).sin();
    (num * num) / (n * n * den * den)
}

/// Approximate θ-domain half beam-width `T / cos θ` of a sector centered at θ.
pub fn angular_beamwidth(theta: f64, half_width_t: f64) -> Result<f64> {
    let c = theta.cos();
    if !(c > 0.0) || theta.abs() >= PI / 2.0 {
        return Err(invalid("beam-width needs |θ| < π/2"));
    }
    Ok(half_width_t / c)
}

/// Equal ψ-domain partition of `[psi_lb, psi_ub]` into `q_count` sectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorGrid {
    pub q_count: usize,
    pub psi_lb: f64,
    pub psi_ub: f64,
    pub half_width_t: f64,
    pub centers: Vec<f64>,
}

impl SectorGrid {
    pub fn new(q_count: usize, theta_lb: f64, theta_ub: f64) -> Result<Self> {
        if q_count == 0 {
            return Err(invalid("sector grid needs at least one sector"));
        }
        if !(theta_lb < theta_ub) || theta_lb < -PI / 2.0 || theta_ub > PI / 2.0 {
            return Err(invalid("need -π/2 <= θ_LB < θ_UB <= π/2"));
        }
        let psi_lb = theta_lb.sin();
        let psi_ub = theta_ub.sin();
        let t = (psi_ub - psi_lb) / (2.0 * q_count as f64);
        let centers = (1..=q_count)
            .map(|q| psi_lb + (2 * q - 1) as f64 * t)
            .collect();
        Ok(Self {
            q_count,
            psi_lb,
            psi_ub,
            half_width_t: t,
            centers,
        })
    }

    /// ψ-interval `[lo, hi]` covered by zero-based sector `idx`.
    pub fn sector_bounds(&self, idx: usize) -> (f64, f64) {
        let c = self.centers[idx];
        (c - self.half_width_t, c + self.half_width_t)
    }

    /// Zero-based sector holding `psi`, clamped to the grid.
    pub fn sector_of(&self, psi: f64) -> usize {
        let raw = ((psi - self.psi_lb) / (2.0 * self.half_width_t)).floor();
        raw.clamp(0.0, (self.q_count - 1) as f64) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CodebookLevel {
    First,
    Second,
}

impl CodebookLevel {
    pub fn from_number(level: u8) -> Result<Self> {
        match level {
            1 => Ok(Self::First),
            2 => Ok(Self::Second),
            other => Err(invalid(format!("codebook level must be 1 or 2, got {other}"))),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Self::First => 1,
            Self::Second => 2,
        }
    }

    pub fn size(self, mt: usize) -> usize {
        match self {
            Self::First => mt / 2,
            Self::Second => 2 * mt,
        }
    }
}

/// Equal-gain codewords of dimension `M_t/2` steered to ψ-sector centers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamCodebook {
    pub level: CodebookLevel,
    pub mt: usize,
    pub grid: SectorGrid,
    pub codewords: Vec<Vec<Complex64>>,
    pub phase_bits: u32,
    pub spacing_ratio: f64,
}

impl BeamCodebook {
    pub fn build(
        level: CodebookLevel,
        mt: usize,
        theta_lb: f64,
        theta_ub: f64,
        phase_bits: u32,
        spacing: f64,
    ) -> Result<Self> {
        if mt < 4 || !mt.is_multiple_of(4) {
            return Err(invalid(format!("M_t must be a positive multiple of 4, got {mt}")));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(invalid("element spacing must be positive"));
        }
        let n = mt / 2;
        let grid = SectorGrid::new(level.size(mt), theta_lb, theta_ub)?;
        let amp = 1.0 / (n as f64).sqrt();
        let codewords = grid
            .centers
            .iter()
            .map(|&psi| {
                let cw = linalg::scale(&phase_ramp(n, psi, spacing), amp);
                if phase_bits > 0 {
                    quantize_phases(&cw, phase_bits)
                } else {
                    cw
                }
            })
            .collect();
        Ok(Self {
            level,
            mt,
            grid,
            codewords,
            phase_bits,
            spacing_ratio: spacing,
        })
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.mt / 2
    }

    /// One row per codeword: index, ψ-center, then interleaved re/im entries.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["index".to_string(), "psi_center".to_string()];
        for k in 0..self.dim() {
            header.push(format!("re{k}"));
            header.push(format!("im{k}"));
        }
        w.write_record(&header)?;
        for (i, (cw, psi)) in self.codewords.iter().zip(&self.grid.centers).enumerate() {
            let mut row = vec![i.to_string(), psi.to_string()];
            for z in cw {
                row.push(z.re.to_string());
                row.push(z.im.to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Codebook with the default half-wavelength spacing.
pub fn build_codebook(
    level: u8,
    mt: usize,
    theta_lb: f64,
    theta_ub: f64,
    phase_bits: u32,
) -> Result<BeamCodebook> {
    BeamCodebook::build(
        CodebookLevel::from_number(level)?,
        mt,
        theta_lb,
        theta_ub,
        phase_bits,
        DEFAULT_SPACING,
    )
}

/// Round every phase to the nearest multiple of `2π / 2^bits`, keeping moduli.
pub fn quantize_phases(v: &[Complex64], bits: u32) -> Vec<Complex64> {
    if bits == 0 {
        return v.to_vec();
    }
    let step = 2.0 * PI / (1u64 << bits.min(52)) as f64;
    v.iter()
        .map(|z| {
            let (r, phase) = z.to_polar();
            Complex64::from_polar(r, (phase / step).round() * step)
        })
        .collect()
}

/// Gain at the sector edge, `Γ_N(T)`; reported as a diagnostic lower level.
pub fn sector_edge_gain(n: usize, half_width_t: f64) -> f64 {
    gain_gamma(n, half_width_t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn boresight_is_all_ones() {
        let sv = steering_vector(4, 0.0, 0.5).unwrap();
        for z in &sv.entries {
            assert_abs_diff_eq!(z.re, 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn endfire_alternates() {
        let sv = steering_vector(2, PI / 2.0, 0.5).unwrap();
        assert_abs_diff_eq!(sv.entries[1].re, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sv.entries[1].im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn entry_phase_matches_scalar_loop() {
        let sv = steering_vector(16, PI / 6.0, 0.5).unwrap();
        // independent scalar evaluation: phase of entry 5 is 2π·0.5·5·sin(π/6) = 2.5π ≡ π/2
        let expect = Complex64::new(0.0, 1.0);
        assert!((sv.entries[5] - expect).norm() < 1e-12);
        for (k, z) in sv.entries.iter().enumerate() {
            let ph = 2.0 * PI * 0.5 * k as f64 * 0.5;
            assert!((z - Complex64::new(ph.cos(), ph.sin())).norm() < 1e-12);
            assert_abs_diff_eq!(z.norm(), 1.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(linalg::norm_sqr(&sv.entries), 16.0, epsilon = 1e-9);
    }

    #[test]
    fn steering_rejects_bad_input() {
        assert!(steering_vector(0, 0.1, 0.5).is_err());
        assert!(steering_vector(4, f64::NAN, 0.5).is_err());
        assert!(steering_vector(4, f64::INFINITY, 0.5).is_err());
    }

    #[test]
    fn gamma_boresight_and_null() {
        assert_eq!(gain_gamma(16, 0.0), 1.0);
        assert_abs_diff_eq!(gain_gamma(16, 2.0 / 16.0), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn gamma_matches_high_precision_value() {
        // Frozen from a 40-digit evaluation of sin²(πη·8)/(256 sin²(πη/2)).
        assert_abs_diff_eq!(gain_gamma(16, 0.0270632), 0.855508230763212, epsilon = 1e-12);
    }

    #[test]
    fn gamma_grid_even_and_bounded() {
        for &n in &[8usize, 16, 32] {
            for i in -400..=400 {
                let eta = i as f64 / 200.0;
                let g = gain_gamma(n, eta);
                assert!(g <= 1.0 + 1e-12, "n={n} eta={eta} g={g}");
                assert!(g >= 0.0);
                assert_abs_diff_eq!(g, gain_gamma(n, -eta), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn gamma_exact_nulls() {
        for &n in &[8usize, 16, 32] {
            for k in 1..(3 * n) {
                if k % n == 0 {
                    continue;
                }
                let g = gain_gamma(n, 2.0 * k as f64 / n as f64);
                assert!(g < 1e-20, "n={n} k={k} g={g}");
            }
        }
    }

    #[test]
    fn angular_beamwidth_examples() {
        assert_abs_diff_eq!(angular_beamwidth(0.0, 0.05).unwrap(), 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(angular_beamwidth(PI / 3.0, 0.05).unwrap(), 0.10, epsilon = 1e-12);
        assert_abs_diff_eq!(
            angular_beamwidth(PI / 4.0, 0.0541).unwrap(),
            0.0541 * 2f64.sqrt(),
            epsilon = 1e-12
        );
        assert!(angular_beamwidth(PI / 2.0, 0.05).is_err());
        assert!(angular_beamwidth(-2.0, 0.05).is_err());
    }

    #[test]
    fn level1_geometry() {
        let b = build_codebook(1, 32, -PI / 3.0, PI / 3.0, 0).unwrap();
        assert_eq!(b.len(), 16);
        let spacing = (PI / 3.0).sin() / 8.0;
        for w in b.grid.centers.windows(2) {
            assert_abs_diff_eq!(w[1] - w[0], spacing, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(2.0 * b.grid.half_width_t, spacing, epsilon = 1e-15);
        for cw in &b.codewords {
            assert_abs_diff_eq!(linalg::norm_sqr(cw), 1.0, epsilon = 1e-9);
            for z in cw {
                assert_abs_diff_eq!(z.norm(), 1.0 / 4.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn level2_nests_four_per_sector() {
        let b1 = build_codebook(1, 32, -PI / 3.0, PI / 3.0, 0).unwrap();
        let b2 = build_codebook(2, 32, -PI / 3.0, PI / 3.0, 0).unwrap();
        assert_eq!(b2.len(), 64);
        let mut counts = vec![0usize; b1.len()];
        for &psi in &b2.grid.centers {
            counts[b1.grid.sector_of(psi)] += 1;
        }
        assert!(counts.iter().all(|&c| c == 4), "{counts:?}");
    }

    #[test]
    fn smallest_codebook_is_symmetric() {
        let b = build_codebook(1, 4, -PI / 2.0, PI / 2.0, 0).unwrap();
        assert_eq!(b.len(), 2);
        assert_abs_diff_eq!(b.grid.centers[0], -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b.grid.centers[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn codebook_rejects_bad_mt() {
        assert!(build_codebook(1, 6, -1.0, 1.0, 0).is_err());
        assert!(build_codebook(1, 2, -1.0, 1.0, 0).is_err());
        assert!(build_codebook(3, 8, -1.0, 1.0, 0).is_err());
        assert!(build_codebook(1, 8, 1.0, -1.0, 0).is_err());
    }

    #[test]
    fn level1_near_orthogonality() {
        let b = build_codebook(1, 32, -PI / 3.0, PI / 3.0, 0).unwrap();
        let mut worst = 0.0f64;
        for c in 0..b.len() {
            for d in 0..b.len() {
                if c != d {
                    worst = worst.max(linalg::inner(&b.codewords[c], &b.codewords[d]).norm_sqr());
                }
            }
        }
        assert!(worst <= 0.05, "max cross-correlation {worst}");
    }

    #[test]
    fn quantized_codebook_lies_on_lattice() {
        let b = build_codebook(2, 16, -PI / 3.0, PI / 3.0, 6).unwrap();
        let step = 2.0 * PI / 64.0;
        for cw in &b.codewords {
            for z in cw {
                let k = z.arg() / step;
                assert_abs_diff_eq!(k, k.round(), epsilon = 1e-9);
                assert_abs_diff_eq!(z.norm(), 1.0 / 8f64.sqrt(), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn codebook_is_deterministic() {
        let a = build_codebook(2, 32, -PI / 3.0, PI / 3.0, 6).unwrap();
        let b = build_codebook(2, 32, -PI / 3.0, PI / 3.0, 6).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn quantize_examples() {
        let q = quantize_phases(&[Complex64::from_polar(1.0, 0.0)], 6);
        assert_abs_diff_eq!(q[0].arg(), 0.0, epsilon = 1e-15);
        let q = quantize_phases(&[Complex64::from_polar(2.0, PI / 64.0 + 1e-9)], 6);
        assert_abs_diff_eq!(q[0].arg(), 2.0 * PI / 64.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q[0].norm(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn codebook_csv_layout() {
        let b = build_codebook(1, 8, -PI / 3.0, PI / 3.0, 0).unwrap();
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0].split(',').count(), 2 + 2 * 4);
        assert!(lines[1].starts_with("0,"));
    }

    proptest! {
        #[test]
        fn quantization_error_within_half_step(phases in prop::collection::vec(-PI..PI, 16)) {
            let v: Vec<_> = phases.iter().map(|&p| Complex64::from_polar(0.25, p)).collect();
            let q = quantize_phases(&v, 6);
            for (a, b) in v.iter().zip(&q) {
                let err = (a / b).arg().abs();
                prop_assert!(err <= PI / 64.0 + 1e-12);
                prop_assert!((b.norm() - 0.25).abs() < 1e-12);
            }
        }

        #[test]
        fn steering_correlation_is_gamma(n in 1usize..40, t1 in -1.5f64..1.5, t2 in -1.5f64..1.5) {
            let a = steering_vector(n, t1, 0.5).unwrap();
            let b = steering_vector(n, t2, 0.5).unwrap();
            let corr = linalg::inner(&a.entries, &b.entries).norm_sqr() / (n * n) as f64;
            prop_assert!((corr - gain_gamma(n, t1.sin() - t2.sin())).abs() < 1e-9);
        }
    }
}
