//! Dual-polarized channel realizations.
//!
//! The 2×M_t channel is stored as its block matrix
//! `H = [[h_vv^H, h_vh^H], [h_hv^H, h_hh^H]]`, row `a` being the receive
//! polarization and the column half `b` the transmit polarization group.
//!
//! Two generators are provided. The single-path form is `H = A ⊗ h^H` with a
//! Malus-law polarization matrix `A`. The ray-sum form stands in for a street
//! geometry with one LOS ray and a few first-order reflections; its reflection
//! coefficients and wall geometry are not modeled, only the Ricean power split.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::Mat2;
use crate::manifold::{self, SteeringVector};
use crate::{invalid, Result};

/// Circular complex Gaussian sample with the given variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// Malus-law polarization matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolarizationMatrix {
    pub entries: Mat2,
    pub rotation: f64,
    /// `[β_vv, β_vh, β_hv, β_hh]`
    pub gains: [Complex64; 4],
}

impl PolarizationMatrix {
    pub fn alpha(&self, a: usize, b: usize) -> Complex64 {
        self.entries.get(a, b)
    }
}

pub fn polarization_matrix(zeta: f64, betas: [Complex64; 4]) -> PolarizationMatrix {
    let (s, c) = zeta.sin_cos();
    let [bvv, bvh, bhv, bhh] = betas;
    PolarizationMatrix {
        entries: Mat2::new(bvv * c, -bvh * s, bhv * s, bhh * c),
        rotation: zeta,
        gains: betas,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelForm {
    Simplified,
    RaySum,
}

impl ChannelForm {
    pub fn name(self) -> &'static str {
        match self {
            Self::Simplified => "simplified",
            Self::RaySum => "ray_sum",
        }
    }
}

/// Distribution of the BS/UE orientation mismatch ζ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ZetaDist {
    Fixed(f64),
    /// ζ ~ U(0, π/2)
    Uniform,
}

impl ZetaDist {
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Self::Fixed(z) => z,
            Self::Uniform => rng.random_range(0.0..PI / 2.0),
        }
    }

    pub fn label(self) -> String {
        match self {
            Self::Fixed(z) => format!("{z}"),
            Self::Uniform => "uniform".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelConfig {
    pub mt: usize,
    pub k_factor_db: f64,
    /// Inverse XPD: cross-polar gains have variance χ.
    pub chi: f64,
    pub theta_lb: f64,
    pub theta_ub: f64,
    pub zeta_dist: ZetaDist,
    pub n_reflections: usize,
    pub spacing_ratio: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            mt: 32,
            k_factor_db: 13.5,
            chi: 0.2,
            theta_lb: -PI / 3.0,
            theta_ub: PI / 3.0,
            zeta_dist: ZetaDist::Uniform,
            n_reflections: 3,
            spacing_ratio: manifold::DEFAULT_SPACING,
        }
    }
}

impl ChannelConfig {
    pub fn with_mt(mt: usize) -> Self {
        Self {
            mt,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mt < 2 || !self.mt.is_multiple_of(2) {
            return Err(invalid(format!("M_t must be even and >= 2, got {}", self.mt)));
        }
        if !(0.0..=1.0).contains(&self.chi) {
            return Err(invalid(format!("chi must lie in [0, 1], got {}", self.chi)));
        }
        if self.k_factor_db.is_nan() {
            return Err(invalid("K-factor must not be NaN"));
        }
        if !(self.theta_lb < self.theta_ub) {
            return Err(invalid("need θ_LB < θ_UB"));
        }
        if !(self.spacing_ratio > 0.0) {
            return Err(invalid("element spacing must be positive"));
        }
        Ok(())
    }

    /// Linear Ricean K.
    pub fn k_linear(&self) -> f64 {
        10f64.powf(self.k_factor_db / 10.0)
    }

    /// Fraction `K/(1+K)` of the channel power carried by the LOS ray.
    pub fn los_fraction(&self) -> f64 {
        los_fraction(self.k_factor_db)
    }

    fn sample_aod<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rng.random_range(self.theta_lb..=self.theta_ub)
    }

    fn sample_pol<R: Rng + ?Sized>(&self, zeta: f64, rng: &mut R) -> PolarizationMatrix {
        let bvv = complex_gaussian(rng, 1.0);
        let bvh = complex_gaussian(rng, self.chi);
        let bhv = complex_gaussian(rng, self.chi);
        let bhh = complex_gaussian(rng, 1.0);
        polarization_matrix(zeta, [bvv, bvh, bhv, bhh])
    }
}

/// `K/(1+K)` for a K-factor in dB; an infinite K gives 1.
pub fn los_fraction(k_factor_db: f64) -> f64 {
    if k_factor_db == f64::INFINITY {
        return 1.0;
    }
    let k = 10f64.powf(k_factor_db / 10.0);
    k / (1.0 + k)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayComponent {
    pub aod: f64,
    pub pol: PolarizationMatrix,
    pub power_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualPolChannel {
    pub form: ChannelForm,
    pub mt: usize,
    pub spacing_ratio: f64,
    /// Polarization matrix of the single path, or of the LOS ray for the ray sum.
    pub pol: PolarizationMatrix,
    /// AoD of the single path, or of the LOS ray.
    pub aod: f64,
    /// `h = a_{M_t/2}(θ)` of the single path, or of the LOS ray.
    pub sub_channel: SteeringVector,
    pub rays: Vec<RayComponent>,
    /// Two rows of length M_t.
    pub block: [Vec<Complex64>; 2],
}

impl DualPolChannel {
    /// `H = A ⊗ h^H`.
    pub fn simplified(mt: usize, pol: PolarizationMatrix, aod: f64, spacing: f64) -> Result<Self> {
        if mt < 2 || !mt.is_multiple_of(2) {
            return Err(invalid("M_t must be even"));
        }
        let h = manifold::steering_vector(mt / 2, aod, spacing)?;
        let block = kron_rows(&pol.entries, &h.entries, 1.0);
        Ok(Self {
            form: ChannelForm::Simplified,
            mt,
            spacing_ratio: spacing,
            pol,
            aod,
            sub_channel: h,
            rays: Vec::new(),
            block,
        })
    }

    /// `H = Σ_i √w_i · A_i ⊗ a(θ_i)^H`; the first ray is treated as the LOS path.
    pub fn from_rays(mt: usize, rays: Vec<RayComponent>, spacing: f64) -> Result<Self> {
        if mt < 2 || !mt.is_multiple_of(2) {
            return Err(invalid("M_t must be even"));
        }
        let first = rays.first().ok_or_else(|| invalid("ray sum needs at least one ray"))?;
        if rays.iter().any(|r| !(r.power_weight > 0.0)) {
            return Err(invalid("ray power weights must be positive"));
        }
        let mut block = [vec![Complex64::default(); mt], vec![Complex64::default(); mt]];
        for ray in &rays {
            let a = manifold::steering_vector(mt / 2, ray.aod, spacing)?;
            let part = kron_rows(&ray.pol.entries, &a.entries, ray.power_weight.sqrt());
            for r in 0..2 {
                for (acc, z) in block[r].iter_mut().zip(&part[r]) {
                    *acc += z;
                }
            }
        }
        Ok(Self {
            form: ChannelForm::RaySum,
            mt,
            spacing_ratio: spacing,
            pol: first.pol,
            aod: first.aod,
            sub_channel: manifold::steering_vector(mt / 2, first.aod, spacing)?,
            rays,
            block,
        })
    }

    /// `h_ab` (length M_t/2) such that block row `a`, half `b` equals `h_ab^H`.
    pub fn sub_channel_ab(&self, a: usize, b: usize) -> Vec<Complex64> {
        let n = self.mt / 2;
        self.block[a][b * n..(b + 1) * n].iter().map(|z| z.conj()).collect()
    }

    /// `|z^H H f|²`.
    pub fn effective_gain(&self, z: &[Complex64; 2], f: &[Complex64]) -> f64 {
        debug_assert_eq!(f.len(), self.mt);
        let hf: [Complex64; 2] = [
            self.block[0].iter().zip(f).map(|(h, x)| h * x).sum(),
            self.block[1].iter().zip(f).map(|(h, x)| h * x).sum(),
        ];
        (z[0].conj() * hf[0] + z[1].conj() * hf[1]).norm_sqr()
    }

    pub fn frobenius_sqr(&self) -> f64 {
        self.block.iter().flatten().map(|z| z.norm_sqr()).sum()
    }
}

fn kron_rows(a: &Mat2, h: &[Complex64], amp: f64) -> [Vec<Complex64>; 2] {
    let row = |r: usize| -> Vec<Complex64> {
        let mut out = Vec::with_capacity(2 * h.len());
        for c in 0..2 {
            let alpha = a.get(r, c) * amp;
            out.extend(h.iter().map(|x| alpha * x.conj()));
        }
        out
    };
    [row(0), row(1)]
}

/// Single-path channel with θ ~ U(θ_LB, θ_UB).
pub fn sample_simplified<R: Rng + ?Sized>(cfg: &ChannelConfig, rng: &mut R) -> Result<DualPolChannel> {
    cfg.validate()?;
    let aod = cfg.sample_aod(rng);
    let zeta = cfg.zeta_dist.sample(rng);
    let pol = cfg.sample_pol(zeta, rng);
    DualPolChannel::simplified(cfg.mt, pol, aod, cfg.spacing_ratio)
}

/// LOS ray plus `n_reflections` rays; reflections share `1/(1+K)` of the power equally.
pub fn sample_realistic<R: Rng + ?Sized>(cfg: &ChannelConfig, rng: &mut R) -> Result<DualPolChannel> {
    cfg.validate()?;
    let zeta = cfg.zeta_dist.sample(rng);
    let los_w = if cfg.n_reflections == 0 { 1.0 } else { cfg.los_fraction() };
    let refl_w = if cfg.n_reflections == 0 {
        0.0
    } else {
        (1.0 - los_w) / cfg.n_reflections as f64
    };
    let mut rays = Vec::with_capacity(1 + cfg.n_reflections);
    for i in 0..=cfg.n_reflections {
        let aod = cfg.sample_aod(rng);
        let pol = cfg.sample_pol(zeta, rng);
        let power_weight = if i == 0 { los_w } else { refl_w };
        // An infinite K leaves reflections with zero power; keep them out of the sum.
        if power_weight > 0.0 {
            rays.push(RayComponent { aod, pol, power_weight });
        }
    }
    DualPolChannel::from_rays(cfg.mt, rays, cfg.spacing_ratio)
}

pub fn sample<R: Rng + ?Sized>(
    form: ChannelForm,
    cfg: &ChannelConfig,
    rng: &mut R,
) -> Result<DualPolChannel> {
    match form {
        ChannelForm::Simplified => sample_simplified(cfg, rng),
        ChannelForm::RaySum => sample_realistic(cfg, rng),
    }
}

/// Mono-polarized 1×M_t row `β cos ζ · a_{M_t}(θ)^H`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonoChannel {
    pub aod: f64,
    pub zeta: f64,
    pub beta: Complex64,
    /// Row entries of `h_mono`.
    pub row: Vec<Complex64>,
}

impl MonoChannel {
    pub fn new(n_elements: usize, aod: f64, zeta: f64, beta: Complex64, spacing: f64) -> Result<Self> {
        let a = manifold::steering_vector(n_elements, aod, spacing)?;
        let g = beta * zeta.cos();
        let row = a.entries.iter().map(|x| g * x.conj()).collect();
        Ok(Self { aod, zeta, beta, row })
    }

    /// Mono-polarized counterpart of a dual-polarized realization: keeps only
    /// the vertical-to-vertical gain of every ray, on an `n_elements` array.
    pub fn from_dual(ch: &DualPolChannel, n_elements: usize) -> Result<Self> {
        let zeta = ch.pol.rotation;
        if ch.rays.is_empty() {
            return Self::new(n_elements, ch.aod, zeta, ch.pol.gains[0], ch.spacing_ratio);
        }
        let mut row = vec![Complex64::default(); n_elements];
        for ray in &ch.rays {
            let a = manifold::steering_vector(n_elements, ray.aod, ch.spacing_ratio)?;
            let g = ray.pol.gains[0] * zeta.cos() * ray.power_weight.sqrt();
            for (acc, x) in row.iter_mut().zip(&a.entries) {
                *acc += g * x.conj();
            }
        }
        Ok(Self { aod: ch.aod, zeta, beta: ch.pol.gains[0], row })
    }

    pub fn n_elements(&self) -> usize {
        self.row.len()
    }

    /// The column vector `h` with `row = h^H`.
    pub fn column(&self) -> Vec<Complex64> {
        self.row.iter().map(|z| z.conj()).collect()
    }

    /// `|h_mono f|²`.
    pub fn effective_gain(&self, f: &[Complex64]) -> f64 {
        self.row.iter().zip(f).map(|(h, x)| h * x).sum::<Complex64>().norm_sqr()
    }
}

pub fn sample_mono<R: Rng + ?Sized>(cfg: &ChannelConfig, rng: &mut R) -> Result<MonoChannel> {
    cfg.validate()?;
    let aod = cfg.sample_aod(rng);
    let zeta = cfg.zeta_dist.sample(rng);
    let beta = complex_gaussian(rng, 1.0);
    MonoChannel::new(cfg.mt, aod, zeta, beta, cfg.spacing_ratio)
}

/// One CSV row per realization: trial id, form, θ, ζ, then the flattened block
/// matrix (row 0 then row 1) as interleaved re/im.
pub fn write_channels_csv<W: Write>(out: W, channels: &[(u64, &DualPolChannel)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mt = channels.first().map(|(_, c)| c.mt).unwrap_or(0);
    let mut header = vec!["trial".to_string(), "form".into(), "theta".into(), "zeta".into()];
    for r in 0..2 {
        for k in 0..mt {
            header.push(format!("re_{r}_{k}"));
            header.push(format!("im_{r}_{k}"));
        }
    }
    w.write_record(&header)?;
    for (id, ch) in channels {
        if ch.mt != mt {
            return Err(crate::Error::DimensionMismatch { expected: mt, actual: ch.mt });
        }
        let mut row = vec![
            id.to_string(),
            ch.form.name().to_string(),
            ch.aod.to_string(),
            ch.pol.rotation.to_string(),
        ];
        for z in ch.block.iter().flatten() {
            row.push(z.re.to_string());
            row.push(z.im.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn mono_counterpart_matches_vv_quadrant() {
        let cfg = ChannelConfig::with_mt(16);
        for form in [ChannelForm::Simplified, ChannelForm::RaySum] {
            let ch = sample(form, &cfg, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
            let m = MonoChannel::from_dual(&ch, 8).unwrap();
            assert!(m.row.iter().zip(&ch.block[0][..8]).all(|(a, b)| close(*a, *b)), "{form:?}");
            assert_eq!(MonoChannel::from_dual(&ch, 16).unwrap().n_elements(), 16);
        }
    }

    #[test]
    fn malus_examples() {
        let one = c(1.0, 0.0);
        let a = polarization_matrix(0.0, [one; 4]).entries;
        assert!(close(a.get(0, 0), one) && close(a.get(1, 1), one));
        assert!(close(a.get(0, 1), c(0.0, 0.0)) && close(a.get(1, 0), c(0.0, 0.0)));

        let a = polarization_matrix(PI / 2.0, [one; 4]).entries;
        assert!(close(a.get(0, 0), c(0.0, 0.0)));
        assert!(close(a.get(0, 1), c(-1.0, 0.0)));
        assert!(close(a.get(1, 0), one));
        assert!(close(a.get(1, 1), c(0.0, 0.0)));

        let a = polarization_matrix(PI / 4.0, [c(2.0, 0.0), one, one, one]).entries;
        let h = 2f64.sqrt() / 2.0;
        assert!(close(a.get(0, 0), c(2f64.sqrt(), 0.0)));
        assert!(close(a.get(0, 1), c(-h, 0.0)));
        assert!(close(a.get(1, 0), c(h, 0.0)));
        assert!(close(a.get(1, 1), c(h, 0.0)));
    }

    #[test]
    fn simplified_is_kronecker() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = ChannelConfig::default();
        let ch = sample_simplified(&cfg, &mut rng).unwrap();
        let n = cfg.mt / 2;
        assert_abs_diff_eq!(crate::linalg::norm_sqr(&ch.sub_channel.entries), n as f64, epsilon = 1e-9);
        for a in 0..2 {
            for b in 0..2 {
                for k in 0..n {
                    let expect = ch.pol.alpha(a, b) * ch.sub_channel.entries[k].conj();
                    assert!((ch.block[a][b * n + k] - expect).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn seeded_determinism() {
        let cfg = ChannelConfig::default();
        let a = sample_realistic(&cfg, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = sample_realistic(&cfg, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
        let a = sample_simplified(&cfg, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = sample_simplified(&cfg, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_chi_kills_cross_pol() {
        let cfg = ChannelConfig { chi: 0.0, zeta_dist: ZetaDist::Fixed(0.7), ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let ch = sample_simplified(&cfg, &mut rng).unwrap();
            assert_eq!(ch.pol.alpha(0, 1).norm(), 0.0);
            assert_eq!(ch.pol.alpha(1, 0).norm(), 0.0);
        }
    }

    #[test]
    fn cross_to_co_power_ratio_is_chi() {
        let cfg = ChannelConfig { zeta_dist: ZetaDist::Fixed(PI / 4.0), ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (mut cross, mut co) = (0.0, 0.0);
        for _ in 0..100_000 {
            let p = cfg.sample_pol(PI / 4.0, &mut rng);
            cross += p.alpha(0, 1).norm_sqr();
            co += p.alpha(0, 0).norm_sqr();
        }
        let ratio = cross / co;
        assert!((ratio / 0.2 - 1.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn huge_k_matches_single_path() {
        let cfg = ChannelConfig { k_factor_db: 90.0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let ray = sample_realistic(&cfg, &mut rng).unwrap();
            assert_eq!(ray.rays.len(), 4);
            let single = DualPolChannel::simplified(cfg.mt, ray.pol, ray.aod, cfg.spacing_ratio).unwrap();
            let diff: f64 = ray
                .block
                .iter()
                .flatten()
                .zip(single.block.iter().flatten())
                .map(|(x, y)| (x - y).norm_sqr())
                .sum();
            assert!((diff / single.frobenius_sqr()).sqrt() < 1e-3);
        }
    }

    #[test]
    fn los_only_ray_sum_equals_simplified() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let cfg = ChannelConfig::default();
        let pol = cfg.sample_pol(0.3, &mut rng);
        let los = RayComponent { aod: 0.4, pol, power_weight: 1.0 };
        let ray = DualPolChannel::from_rays(cfg.mt, vec![los], 0.5).unwrap();
        let single = DualPolChannel::simplified(cfg.mt, pol, 0.4, 0.5).unwrap();
        assert_eq!(ray.block, single.block);
    }

    #[test]
    fn los_power_fraction() {
        let cfg = ChannelConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let (mut los, mut total) = (0.0, 0.0);
        let n = cfg.mt as f64 / 2.0;
        for _ in 0..100_000 {
            let ch = sample_realistic(&cfg, &mut rng).unwrap();
            let r0 = &ch.rays[0];
            los += r0.power_weight * r0.pol.entries.frobenius_sqr() * n;
            total += ch.frobenius_sqr();
        }
        let k = cfg.k_linear();
        let frac = los / total;
        assert!((frac / (k / (1.0 + k)) - 1.0).abs() < 0.02, "frac {frac}");
    }

    #[test]
    fn mono_examples() {
        let beta = c(0.6, -0.8);
        let m = MonoChannel::new(32, 0.3, 0.0, beta, 0.5).unwrap();
        assert_abs_diff_eq!(crate::linalg::norm_sqr(&m.row), 32.0 * beta.norm_sqr(), epsilon = 1e-9);
        let m = MonoChannel::new(32, 0.3, PI / 2.0, beta, 0.5).unwrap();
        assert!(crate::linalg::norm_sqr(&m.row) < 1e-25);
    }

    #[test]
    fn mono_mean_power_halves_under_uniform_zeta() {
        let cfg = ChannelConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let trials = 100_000;
        let mean: f64 = (0..trials)
            .map(|_| crate::linalg::norm_sqr(&sample_mono(&cfg, &mut rng).unwrap().row))
            .sum::<f64>()
            / trials as f64;
        // E[cos²ζ] = 1/2 and E|β|² = 1
        assert!((mean / 16.0 - 1.0).abs() < 0.03, "mean {mean}");
    }

    #[test]
    fn config_validation() {
        assert!(ChannelConfig { chi: 1.5, ..Default::default() }.validate().is_err());
        assert!(ChannelConfig { mt: 7, ..Default::default() }.validate().is_err());
        assert!(ChannelConfig { k_factor_db: f64::NAN, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn channel_csv_rows() {
        let cfg = ChannelConfig::with_mt(8);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let a = sample_simplified(&cfg, &mut rng).unwrap();
        let b = sample_realistic(&cfg, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_channels_csv(&mut buf, &[(0, &a), (1, &b)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0].split(',').count(), 4 + 2 * 2 * 8);
        assert!(lines[2].starts_with("1,ray_sum,"));
    }
}
