//! Experiment configuration: presets, a sectioned TOML file format and flat
//! `key=value` overrides.
//!
//! Every key has a default matching the reference deployment (K = 13.5 dB,
//! χ = 0.2, θ ∈ ±60°, ζ uniform, 6 phase bits). Keys may be written with
//! their section (`channel.chi`) or bare (`chi`).

use std::fmt;

use serde::Serialize;
use toml::Value;

use crate::channel::{ChannelConfig, ChannelForm, ZetaDist};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Table1,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig9,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 8] = [
        Preset::Table1,
        Preset::Fig3,
        Preset::Fig4,
        Preset::Fig5,
        Preset::Fig6,
        Preset::Fig7,
        Preset::Fig9,
        Preset::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Table1 => "table1",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
            Preset::Fig7 => "fig7",
            Preset::Fig9 => "fig9",
            Preset::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| cfg_err(format!("unknown preset '{s}'")))
    }

    /// Stable id mixed into the random streams of this preset.
    pub fn stream_id(self) -> u64 {
        self as u64 + 1
    }
}

/// How the transmit beam is chosen in a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Two-round joint soft alignment.
    Soft,
    /// Best training vector by summed stream power.
    Hard,
    /// Unquantized full-CSI beamformers (the normalizer of the gain ratio).
    FullCsi,
    /// Full-CSI beamformers with quantized analog phases.
    FullCsiQuantized,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Soft => "soft",
            Scheme::Hard => "hard",
            Scheme::FullCsi => "full_csi",
            Scheme::FullCsiQuantized => "full_csi_quantized",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        [Scheme::Soft, Scheme::Hard, Scheme::FullCsi, Scheme::FullCsiQuantized]
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| cfg_err(format!("unknown scheme '{s}'")))
    }
}

/// Sounding length of a grid point: fixed, or chosen by the planner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LSpec {
    Fixed(usize),
    Adaptive,
}

impl fmt::Display for LSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LSpec::Fixed(l) => write!(f, "{l}"),
            LSpec::Adaptive => f.write_str("adaptive"),
        }
    }
}

/// ζ setting in degrees, or uniform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ZetaSpec {
    Degrees(f64),
    Uniform,
}

impl ZetaSpec {
    pub fn dist(self) -> ZetaDist {
        match self {
            ZetaSpec::Degrees(d) => ZetaDist::Fixed(d.to_radians()),
            ZetaSpec::Uniform => ZetaDist::Uniform,
        }
    }
}

impl fmt::Display for ZetaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ZetaSpec::Degrees(d) => write!(f, "{d}"),
            ZetaSpec::Uniform => f.write_str("uniform"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub mt: Vec<usize>,
    pub snr_db: Vec<f64>,
    /// Empty means the preset's default grid for each M_t.
    pub l: Vec<LSpec>,
    pub epsilon: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub trials: usize,
    pub seed: u64,
    pub phase_bits: u32,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub form: ChannelForm,
    pub zeta: Vec<ZetaSpec>,
    pub k_factor_db: f64,
    pub chi: f64,
    pub theta_lb_deg: f64,
    pub theta_ub_deg: f64,
    pub n_reflections: usize,
    pub spacing: f64,
    pub alpha_sq: f64,
    /// Scale the planning noncentrality by the LOS power fraction of `k_factor_db`.
    pub plan_use_k_factor: bool,
    /// Codebook sizes of the gain-bound sweep, as multiples of the array size.
    pub gain_bound_q_ratio: Vec<usize>,
    /// Symmetric angular ranges `±θ_UB` of the gain-bound sweep, degrees.
    pub gain_bound_range_deg: Vec<f64>,
    /// Points of the CDF grid in the CDF comparison.
    pub cdf_grid_points: usize,
}

const TABLE_SNR: [f64; 7] = [-10.0, -8.0, -6.0, -4.0, -2.0, 0.0, 2.0];

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            preset: Preset::Custom,
            mt: vec![32],
            snr_db: vec![-10.0],
            l: vec![LSpec::Fixed(32)],
            epsilon: vec![0.6],
            schemes: vec![Scheme::Soft],
            trials: 10_000,
            seed: 1,
            phase_bits: 6,
            threads: 0,
            form: ChannelForm::RaySum,
            zeta: vec![ZetaSpec::Uniform],
            k_factor_db: 13.5,
            chi: 0.2,
            theta_lb_deg: -60.0,
            theta_ub_deg: 60.0,
            n_reflections: 3,
            spacing: 0.5,
            alpha_sq: 0.5,
            plan_use_k_factor: true,
            gain_bound_q_ratio: vec![1, 2, 4, 8],
            gain_bound_range_deg: vec![15.0, 30.0, 45.0, 60.0, 75.0],
            cdf_grid_points: 200,
        }
    }
}

impl ExperimentConfig {
    pub fn for_preset(preset: Preset) -> Self {
        let base = Self { preset, ..Self::default() };
        match preset {
            Preset::Table1 => Self { mt: vec![32, 64], snr_db: TABLE_SNR.to_vec(), l: vec![], ..base },
            Preset::Fig3 => Self {
                snr_db: vec![-4.0, -6.0],
                l: [16, 32, 48, 64, 80, 96, 112, 128].map(LSpec::Fixed).to_vec(),
                zeta: vec![ZetaSpec::Degrees(22.5), ZetaSpec::Degrees(45.0), ZetaSpec::Uniform],
                ..base
            },
            Preset::Fig4 => Self {
                mt: vec![32, 64],
                snr_db: vec![-8.0, -10.0, -12.0],
                l: vec![],
                schemes: vec![Scheme::Soft, Scheme::Hard],
                ..base
            },
            Preset::Fig5 => Self {
                mt: vec![32, 64],
                snr_db: TABLE_SNR.to_vec(),
                l: vec![LSpec::Adaptive, LSpec::Fixed(60)],
                schemes: vec![Scheme::Soft, Scheme::Hard],
                ..base
            },
            Preset::Fig6 => Self {
                mt: vec![32, 64],
                snr_db: TABLE_SNR.to_vec(),
                l: vec![LSpec::Adaptive],
                epsilon: vec![0.45, 0.5, 0.55, 0.6],
                ..base
            },
            Preset::Fig7 => Self { mt: vec![32, 64], l: vec![], trials: 100_000, ..base },
            Preset::Fig9 => Self { mt: vec![32, 64], l: vec![], trials: 100_000, ..base },
            Preset::Custom => base,
        }
    }

    /// Parses a TOML config. The `[experiment] preset` key, if present,
    /// selects the defaults the remaining keys are applied on top of.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e| cfg_err(format!("{e}")))?;
        let mut entries = Vec::new();
        for (section, body) in &table {
            let Value::Table(body) = body else {
                return Err(cfg_err(format!("top-level key '{section}' must be a [section]")));
            };
            for (k, v) in body {
                entries.push((format!("{section}.{k}"), v.clone()));
            }
        }
        let preset = match entries.iter().find(|(k, _)| k == "experiment.preset") {
            Some((_, Value::String(s))) => Preset::parse(s)?,
            Some(_) => return Err(cfg_err("experiment.preset must be a string")),
            None => Preset::Custom,
        };
        let mut cfg = Self::for_preset(preset);
        for (k, v) in &entries {
            if k != "experiment.preset" {
                cfg.apply(k, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key=value` override; the value uses TOML syntax, falling
    /// back to a bare string (so `mt=32,64` and `zeta=uniform` both work).
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| cfg_err(format!("override '{kv}' is not key=value")))?;
        let (k, v) = (k.trim(), v.trim());
        let value = format!("v = {v}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(v.to_string()));
        self.apply(k, &value)
    }

    pub fn apply(&mut self, key: &str, v: &Value) -> Result<()> {
        let full = resolve_key(key)?;
        match full {
            "experiment.preset" => {
                return Err(cfg_err("the preset is chosen with --preset or in the config file"));
            }
            "experiment.mt" => self.mt = usize_list(full, v)?,
            "experiment.snr_db" => self.snr_db = f64_list(full, v)?,
            "experiment.l" => self.l = list(full, v, parse_lspec)?,
            "experiment.epsilon" => self.epsilon = f64_list(full, v)?,
            "experiment.schemes" => self.schemes = list(full, v, Scheme::parse)?,
            "experiment.trials" => self.trials = usize_scalar(full, v)?,
            "experiment.seed" => self.seed = usize_scalar(full, v)? as u64,
            "experiment.phase_bits" => self.phase_bits = usize_scalar(full, v)? as u32,
            "experiment.threads" => self.threads = usize_scalar(full, v)?,
            "channel.form" => {
                self.form = match str_scalar(full, v)?.as_str() {
                    "simplified" => ChannelForm::Simplified,
                    "ray_sum" => ChannelForm::RaySum,
                    other => return Err(cfg_err(format!("unknown channel form '{other}'"))),
                }
            }
            "channel.zeta" => self.zeta = list(full, v, parse_zeta)?,
            "channel.k_factor_db" => self.k_factor_db = f64_scalar(full, v)?,
            "channel.chi" => self.chi = f64_scalar(full, v)?,
            "channel.theta_lb_deg" => self.theta_lb_deg = f64_scalar(full, v)?,
            "channel.theta_ub_deg" => self.theta_ub_deg = f64_scalar(full, v)?,
            "channel.n_reflections" => self.n_reflections = usize_scalar(full, v)?,
            "channel.spacing" => self.spacing = f64_scalar(full, v)?,
            "planner.alpha_sq" => self.alpha_sq = f64_scalar(full, v)?,
            "planner.use_k_factor" => self.plan_use_k_factor = bool_scalar(full, v)?,
            "gain_bound.q_ratio" => self.gain_bound_q_ratio = usize_list(full, v)?,
            "gain_bound.range_deg" => self.gain_bound_range_deg = f64_list(full, v)?,
            "cdf.grid_points" => self.cdf_grid_points = usize_scalar(full, v)?,
            _ => unreachable!("resolve_key returned an unhandled key"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let nonempty = |name: &str, len: usize| {
            if len == 0 {
                Err(cfg_err(format!("{name} must not be empty")))
            } else {
                Ok(())
            }
        };
        nonempty("mt", self.mt.len())?;
        nonempty("snr_db", self.snr_db.len())?;
        nonempty("epsilon", self.epsilon.len())?;
        nonempty("schemes", self.schemes.len())?;
        nonempty("zeta", self.zeta.len())?;
        if self.trials == 0 {
            return Err(cfg_err("trials must be at least 1"));
        }
        if let Some(&m) = self.mt.iter().find(|&&m| m < 8 || !m.is_multiple_of(4) || m > 128) {
            return Err(cfg_err(format!("mt must be a multiple of 4 in 8..=128, got {m}")));
        }
        if self.l.contains(&LSpec::Fixed(0)) {
            return Err(cfg_err("sounding lengths must be positive"));
        }
        if let Some(e) = self.epsilon.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(cfg_err(format!("epsilon must lie in (0, 1), got {e}")));
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(cfg_err("snr_db values must be finite"));
        }
        if !(self.alpha_sq > 0.0) {
            return Err(cfg_err("alpha_sq must be positive"));
        }
        if self.phase_bits > 16 {
            return Err(cfg_err("phase_bits must be at most 16"));
        }
        if self.gain_bound_q_ratio.contains(&0) {
            return Err(cfg_err("gain_bound.q_ratio entries must be positive"));
        }
        if self.gain_bound_range_deg.iter().any(|d| !(*d > 0.0 && *d < 90.0)) {
            return Err(cfg_err("gain_bound.range_deg entries must lie in (0, 90)"));
        }
        if self.cdf_grid_points < 2 {
            return Err(cfg_err("cdf.grid_points must be at least 2"));
        }
        if !(-90.0..=90.0).contains(&self.theta_lb_deg) || !(-90.0..=90.0).contains(&self.theta_ub_deg) {
            return Err(cfg_err("theta bounds must lie in [-90, 90] degrees"));
        }
        for &mt in &self.mt {
            self.channel_config(mt, ZetaSpec::Uniform)
                .validate()
                .map_err(|e| cfg_err(e.to_string()))?;
        }
        Ok(())
    }

    pub fn theta_lb(&self) -> f64 {
        self.theta_lb_deg.to_radians()
    }

    pub fn theta_ub(&self) -> f64 {
        self.theta_ub_deg.to_radians()
    }

    pub fn channel_config(&self, mt: usize, zeta: ZetaSpec) -> ChannelConfig {
        ChannelConfig {
            mt,
            k_factor_db: self.k_factor_db,
            chi: self.chi,
            theta_lb: self.theta_lb(),
            theta_ub: self.theta_ub(),
            zeta_dist: zeta.dist(),
            n_reflections: self.n_reflections,
            spacing_ratio: self.spacing,
        }
    }

    /// Every setting as canonical `section.key` / value pairs. Feeding the
    /// pairs back through [`apply_override`](Self::apply_override) on the same
    /// preset reproduces the config.
    pub fn to_flat(&self) -> Vec<(String, String)> {
        fn join<T: ToString>(xs: &[T]) -> String {
            xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
        }
        vec![
            ("experiment.preset".into(), self.preset.name().into()),
            ("experiment.mt".into(), join(&self.mt)),
            ("experiment.snr_db".into(), join(&self.snr_db)),
            ("experiment.l".into(), join(&self.l)),
            ("experiment.epsilon".into(), join(&self.epsilon)),
            ("experiment.schemes".into(), self.schemes.iter().map(|s| s.name()).collect::<Vec<_>>().join(",")),
            ("experiment.trials".into(), self.trials.to_string()),
            ("experiment.seed".into(), self.seed.to_string()),
            ("experiment.phase_bits".into(), self.phase_bits.to_string()),
            ("experiment.threads".into(), self.threads.to_string()),
            ("channel.form".into(), self.form.name().into()),
            ("channel.zeta".into(), join(&self.zeta)),
            ("channel.k_factor_db".into(), self.k_factor_db.to_string()),
            ("channel.chi".into(), self.chi.to_string()),
            ("channel.theta_lb_deg".into(), self.theta_lb_deg.to_string()),
            ("channel.theta_ub_deg".into(), self.theta_ub_deg.to_string()),
            ("channel.n_reflections".into(), self.n_reflections.to_string()),
            ("channel.spacing".into(), self.spacing.to_string()),
            ("planner.alpha_sq".into(), self.alpha_sq.to_string()),
            ("planner.use_k_factor".into(), self.plan_use_k_factor.to_string()),
            ("gain_bound.q_ratio".into(), join(&self.gain_bound_q_ratio)),
            ("gain_bound.range_deg".into(), join(&self.gain_bound_range_deg)),
            ("cdf.grid_points".into(), self.cdf_grid_points.to_string()),
        ]
    }
}

const KEYS: [&str; 23] = [
    "experiment.preset",
    "experiment.mt",
    "experiment.snr_db",
    "experiment.l",
    "experiment.epsilon",
    "experiment.schemes",
    "experiment.trials",
    "experiment.seed",
    "experiment.phase_bits",
    "experiment.threads",
    "channel.form",
    "channel.zeta",
    "channel.k_factor_db",
    "channel.chi",
    "channel.theta_lb_deg",
    "channel.theta_ub_deg",
    "channel.n_reflections",
    "channel.spacing",
    "planner.alpha_sq",
    "planner.use_k_factor",
    "gain_bound.q_ratio",
    "gain_bound.range_deg",
    "cdf.grid_points",
];

fn resolve_key(key: &str) -> Result<&'static str> {
    if key.contains('.') {
        return KEYS.iter().copied().find(|k| *k == key).ok_or_else(|| cfg_err(format!("unknown key '{key}'")));
    }
    let mut hits = KEYS.iter().copied().filter(|k| k.rsplit('.').next() == Some(key));
    match hits.next() {
        Some(k) => Ok(k),
        None => Err(cfg_err(format!("unknown key '{key}'"))),
    }
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn type_err(key: &str, want: &str, v: &Value) -> Error {
    cfg_err(format!("{key}: expected {want}, got {v}"))
}

fn f64_scalar(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        Value::String(s) if s == "inf" => Ok(f64::INFINITY),
        Value::String(s) => s.trim().parse().map_err(|_| type_err(key, "a number", v)),
        _ => Err(type_err(key, "a number", v)),
    }
}

fn usize_scalar(key: &str, v: &Value) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        Value::String(s) => s.trim().parse().map_err(|_| type_err(key, "a nonnegative integer", v)),
        _ => Err(type_err(key, "a nonnegative integer", v)),
    }
}

fn bool_scalar(key: &str, v: &Value) -> Result<bool> {
    match v {
        Value::Boolean(b) => Ok(*b),
        Value::String(s) => s.trim().parse().map_err(|_| type_err(key, "true or false", v)),
        _ => Err(type_err(key, "true or false", v)),
    }
}

fn str_scalar(key: &str, v: &Value) -> Result<String> {
    match v {
        Value::String(s) => Ok(s.trim().to_string()),
        _ => Err(type_err(key, "a string", v)),
    }
}

/// Accepts a scalar, an array, or a comma-separated string.
fn list<T>(key: &str, v: &Value, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let items: Vec<String> = match v {
        Value::Array(xs) => xs
            .iter()
            .map(|x| match x {
                Value::String(s) => Ok(s.clone()),
                Value::Integer(_) | Value::Float(_) => Ok(x.to_string()),
                _ => Err(type_err(key, "a list of scalars", v)),
            })
            .collect::<Result<_>>()?,
        Value::String(s) => s.split(',').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect(),
        Value::Integer(_) | Value::Float(_) => vec![v.to_string()],
        _ => return Err(type_err(key, "a scalar or list", v)),
    };
    items
        .iter()
        .map(|s| parse(s).map_err(|e| cfg_err(format!("{key}: {}", strip(e)))))
        .collect()
}

fn strip(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}

fn usize_list(key: &str, v: &Value) -> Result<Vec<usize>> {
    list(key, v, |s| s.parse().map_err(|_| cfg_err(format!("'{s}' is not a nonnegative integer"))))
}

fn f64_list(key: &str, v: &Value) -> Result<Vec<f64>> {
    list(key, v, |s| s.parse().map_err(|_| cfg_err(format!("'{s}' is not a number"))))
}

fn parse_lspec(s: &str) -> Result<LSpec> {
    if s == "adaptive" {
        return Ok(LSpec::Adaptive);
    }
    s.parse()
        .map(LSpec::Fixed)
        .map_err(|_| cfg_err(format!("'{s}' is neither a length nor 'adaptive'")))
}

fn parse_zeta(s: &str) -> Result<ZetaSpec> {
    if s == "uniform" {
        return Ok(ZetaSpec::Uniform);
    }
    let d: f64 = s.parse().map_err(|_| cfg_err(format!("'{s}' is neither degrees nor 'uniform'")))?;
    if !(0.0..=90.0).contains(&d) {
        return Err(cfg_err(format!("zeta must lie in [0, 90] degrees, got {d}")));
    }
    Ok(ZetaSpec::Degrees(d))
}
