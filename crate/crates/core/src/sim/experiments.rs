//! Experiment presets and the top-level runner.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::adaptive::{db_to_linear, gain_bound, select_l, write_plan_csv, x_cdf_approx, PlanRequest, SoundingPlan};
use crate::channel::{polarization_matrix, DualPolChannel};
use crate::estimator::ProjectedBook;
use crate::manifold::{build_codebook, gain_gamma};
use crate::sounding::dft_training;
use crate::stats::{empirical_cdf, ks_distance, mean_ci, proportion, MeanCi};
use crate::{linalg, rng, Error, Result};

use super::config::{ExperimentConfig, LSpec, Preset, Scheme};
use super::engine::{run_mono_dual_trial, run_trial, run_trials, MonoSetup, StreamKeys, TrialSetup};
use super::output::{write_manifest, LongTable};

/// Plan for one grid point using the experiment's planner settings.
pub fn plan_for(cfg: &ExperimentConfig, mt: usize, snr_db: f64, epsilon: f64) -> Result<SoundingPlan> {
    let plan = select_l(&PlanRequest {
        snr: db_to_linear(snr_db),
        mt,
        alpha_sq: cfg.alpha_sq,
        epsilon,
        theta_lb: cfg.theta_lb(),
        theta_ub: cfg.theta_ub(),
        k_factor_db: cfg.plan_use_k_factor.then_some(cfg.k_factor_db),
    })?;
    if plan.capped {
        return Err(Error::Config(format!(
            "target ε = {epsilon} is not reachable at {snr_db} dB with M_t = {mt}"
        )));
    }
    Ok(plan)
}

/// Planned lengths for every `(M_t, SNR, ε)` combination.
pub fn table1(cfg: &ExperimentConfig) -> Result<Vec<SoundingPlan>> {
    let mut out = Vec::new();
    for &mt in &cfg.mt {
        for &eps in &cfg.epsilon {
            for &snr in &cfg.snr_db {
                out.push(plan_for(cfg, mt, snr, eps)?);
            }
        }
    }
    Ok(out)
}

/// Default sounding lengths for `mt` when the config leaves `l` empty.
pub fn default_l_grid(cfg: &ExperimentConfig, mt: usize) -> Result<Vec<LSpec>> {
    let mut ls = match cfg.preset {
        Preset::Fig7 => vec![mt / 2, 2 * mt],
        _ => {
            let planned = plan_for(cfg, mt, -10.0, 0.6)?.l_final;
            vec![mt / 2, mt, 2 * mt, planned]
        }
    };
    ls.sort_unstable();
    ls.dedup();
    Ok(ls.into_iter().map(LSpec::Fixed).collect())
}

fn l_grid(cfg: &ExperimentConfig, mt: usize) -> Result<Vec<LSpec>> {
    if cfg.l.is_empty() {
        default_l_grid(cfg, mt)
    } else {
        Ok(cfg.l.clone())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepCounters {
    pub trials: usize,
    pub clamped: usize,
}

/// Gain ratio, rate and misalignment over `mt × ζ × SNR × (L, ε) × scheme`.
pub fn sweep(cfg: &ExperimentConfig) -> Result<(LongTable, SweepCounters)> {
    let mut table = LongTable::new(&["mt", "snr_db", "zeta", "epsilon", "l_mode", "l", "scheme"]);
    let mut counters = SweepCounters::default();
    let pid = cfg.preset.stream_id();
    for &mt in &cfg.mt {
        let lspecs = l_grid(cfg, mt)?;
        for (zi, &zeta) in cfg.zeta.iter().enumerate() {
            let ch_cfg = cfg.channel_config(mt, zeta);
            for (si, &snr_db) in cfg.snr_db.iter().enumerate() {
                let mut points: Vec<(String, LSpec, usize)> = Vec::new();
                for &ls in &lspecs {
                    match ls {
                        LSpec::Fixed(l) => points.push((String::new(), ls, l)),
                        LSpec::Adaptive => {
                            for &eps in &cfg.epsilon {
                                points.push((eps.to_string(), ls, plan_for(cfg, mt, snr_db, eps)?.l_final));
                            }
                        }
                    }
                }
                for (eps_label, ls, l) in points {
                    for &scheme in &cfg.schemes {
                        let setup = TrialSetup::new(ch_cfg.clone(), cfg.form, db_to_linear(snr_db), l, scheme, cfg.phase_bits)?;
                        let keys = StreamKeys {
                            seed: cfg.seed,
                            channel_coords: vec![pid, mt as u64, zi as u64],
                            noise_coords: vec![pid, mt as u64, zi as u64, si as u64, l as u64],
                        };
                        let metrics = run_trials(cfg.trials, |t| run_trial(&setup, &mut keys.channel_rng(t), &mut keys.noise_rng(t)))?;
                        counters.trials += metrics.len();
                        counters.clamped += metrics.iter().filter(|m| m.clamped).count();
                        let grid = [
                            mt.to_string(),
                            snr_db.to_string(),
                            zeta.to_string(),
                            eps_label.clone(),
                            match ls {
                                LSpec::Fixed(_) => "fixed".into(),
                                LSpec::Adaptive => "adaptive".into(),
                            },
                            l.to_string(),
                            scheme.name().to_string(),
                        ];
                        let col = |f: fn(&super::engine::TrialMetrics) -> f64| metrics.iter().map(f).collect::<Vec<_>>();
                        table.push_mean(&grid, "gbf", mean_ci(&col(|m| m.bf_gain_ratio)));
                        table.push_mean(&grid, "rate", mean_ci(&col(|m| m.rate_bps_hz)));
                        let miss = metrics.iter().filter(|m| m.misaligned).count();
                        table.push_proportion(&grid, "misaligned", proportion(miss, metrics.len()));
                    }
                }
            }
        }
    }
    Ok((table, counters))
}

/// Dual-polarized soft alignment against mono-polarized arrays with the same
/// and with half the number of elements, on shared channel realizations.
pub fn compare_mono_dual(cfg: &ExperimentConfig) -> Result<(LongTable, SweepCounters)> {
    let mut table = LongTable::new(&["mt", "snr_db", "zeta", "l", "system"]);
    let mut counters = SweepCounters::default();
    let pid = cfg.preset.stream_id();
    for &mt in &cfg.mt {
        let lspecs = l_grid(cfg, mt)?;
        for (zi, &zeta) in cfg.zeta.iter().enumerate() {
            let ch_cfg = cfg.channel_config(mt, zeta);
            for (si, &snr_db) in cfg.snr_db.iter().enumerate() {
                for &ls in &lspecs {
                    let l = match ls {
                        LSpec::Fixed(l) => l,
                        LSpec::Adaptive => plan_for(cfg, mt, snr_db, cfg.epsilon[0])?.l_final,
                    };
                    let dual = TrialSetup::new(ch_cfg.clone(), cfg.form, db_to_linear(snr_db), l, Scheme::Soft, cfg.phase_bits)?;
                    let same = MonoSetup::new(mt, l, cfg.theta_lb(), cfg.theta_ub())?;
                    let half = MonoSetup::new(mt / 2, l, cfg.theta_lb(), cfg.theta_ub())?;
                    let keys: [StreamKeys; 3] = [0u64, 1, 2].map(|sys| StreamKeys {
                        seed: cfg.seed,
                        channel_coords: vec![pid, mt as u64, zi as u64],
                        noise_coords: vec![pid, mt as u64, zi as u64, si as u64, l as u64, sys],
                    });
                    let rates = run_trials(cfg.trials, |t| {
                        let [mut a, mut b, mut c] = [keys[0].noise_rng(t), keys[1].noise_rng(t), keys[2].noise_rng(t)];
                        run_mono_dual_trial(&dual, &same, &half, &mut keys[0].channel_rng(t), [&mut a, &mut b, &mut c])
                    })?;
                    counters.trials += rates.len();
                    for (name, pick) in [
                        ("dual", (|r: &super::engine::MonoDualRates| r.dual) as fn(&_) -> f64),
                        ("mono_same", |r| r.mono_same),
                        ("mono_half", |r| r.mono_half),
                    ] {
                        let grid = [mt.to_string(), snr_db.to_string(), zeta.to_string(), l.to_string(), name.to_string()];
                        table.push_mean(&grid, "rate", mean_ci(&rates.iter().map(pick).collect::<Vec<_>>()));
                    }
                }
            }
        }
    }
    Ok((table, counters))
}

/// Samples of the correct-sector likelihood sample `X` on one stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfCheck {
    pub mt: usize,
    pub l: usize,
    pub snr: f64,
    pub samples: Vec<f64>,
    /// Sample mean of the normalized gain `G` of the noise-free best codeword.
    pub mean_gain: MeanCi,
    /// `(ρL/2)|α|² E[G]` with `|α|² = 1/2`.
    pub mu_sq: f64,
    pub ks: f64,
}

/// Draws `n` values of `X` with `|α|² = 1/2` (uniform phase), θ uniform over
/// the range, and the codeword fixed to the noise-free level-1 winner, then
/// measures the Kolmogorov distance to the noncentral approximation.
pub fn cdf_check(mt: usize, l: usize, snr: f64, theta_lb: f64, theta_ub: f64, n: usize, seed: u64) -> Result<CdfCheck> {
    let cb = dft_training(mt, l)?;
    let book = build_codebook(1, mt, theta_lb, theta_ub, 0)?;
    let proj = ProjectedBook::new(&cb, &book)?;
    let all: Vec<usize> = (0..book.len()).collect();
    let key = rng::derive_key(seed, &[Preset::Fig7.stream_id(), mt as u64, l as u64]);
    let amp = snr.sqrt();
    let draws = run_trials(n, |t| -> Result<(f64, f64)> {
        let mut r = rng::stream_rng(key, t);
        let theta = r.random_range(theta_lb..=theta_ub);
        let alpha = Complex64::from_polar(0.5f64.sqrt(), r.random_range(0.0..2.0 * PI));
        let zero = Complex64::default();
        let pol = polarization_matrix(0.0, [alpha, zero, zero, alpha]);
        let ch = DualPolChannel::simplified(mt, pol, theta, 0.5)?;
        let clean: Vec<Complex64> = cb.project(&ch.sub_channel_ab(0, 0))?.into_iter().map(|s| s * amp).collect();
        let (q_check, _) = proj.joint_argmax(&[&clean], &all)?;
        let noisy: Vec<Complex64> = clean.iter().map(|s| s + crate::channel::complex_gaussian(&mut r, 1.0)).collect();
        let x = proj.joint_score(&[&noisy], q_check);
        let g = linalg::inner(&ch.sub_channel.entries, &book.codewords[q_check]).norm_sqr() / (mt / 2) as f64;
        Ok((x, g))
    })?;
    let samples: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let mean_gain = mean_ci(&draws.iter().map(|d| d.1).collect::<Vec<_>>());
    let mu_sq = 0.5 * snr * l as f64 * 0.5 * mean_gain.mean;
    let ks = ks_distance(&samples, |x| x_cdf_approx(x.max(0.0), mu_sq));
    Ok(CdfCheck { mt, l, snr, samples, mean_gain, mu_sq, ks })
}

fn fig7(cfg: &ExperimentConfig) -> Result<LongTable> {
    let mut table = LongTable::new(&["mt", "snr_db", "l", "x"]);
    for &mt in &cfg.mt {
        for &snr_db in &cfg.snr_db {
            for ls in l_grid(cfg, mt)? {
                let LSpec::Fixed(l) = ls else {
                    return Err(Error::Config("the CDF comparison needs fixed sounding lengths".into()));
                };
                let chk = cdf_check(mt, l, db_to_linear(snr_db), cfg.theta_lb(), cfg.theta_ub(), cfg.trials, cfg.seed)?;
                let base = [mt.to_string(), snr_db.to_string(), l.to_string()];
                let with_x = |x: String| {
                    let mut g = base.to_vec();
                    g.push(x);
                    g
                };
                table.push(&with_x(String::new()), "mu_sq", chk.mu_sq, 0.0);
                table.push_mean(&with_x(String::new()), "mean_gain", chk.mean_gain);
                table.push(&with_x(String::new()), "ks_distance", chk.ks, 0.0);
                let mut sorted = chk.samples.clone();
                sorted.sort_by(f64::total_cmp);
                let x_max = sorted[((sorted.len() - 1) as f64 * 0.999) as usize];
                let pts = cfg.cdf_grid_points;
                let grid: Vec<f64> = (0..pts).map(|i| x_max * i as f64 / (pts - 1) as f64).collect();
                let emp = empirical_cdf(&sorted, &grid);
                for (x, f) in grid.iter().zip(emp) {
                    let hw = 1.959_963_984_540_054 * (f * (1.0 - f) / sorted.len() as f64).sqrt();
                    table.push(&with_x(x.to_string()), "empirical_cdf", f, hw);
                    table.push(&with_x(x.to_string()), "approx_cdf", x_cdf_approx(*x, chk.mu_sq), 0.0);
                }
            }
        }
    }
    Ok(table)
}

/// Empirical `E[Γ_n(|η|)]` for the best codeword of a `q`-sector codebook:
/// θ uniform over the range, the in-sector offset ϕ uniform over the
/// approximate beam-width `±T/cos θ`, and `η = sin θ − sin(θ + ϕ)`.
pub fn gain_bound_mean(n: usize, q: usize, theta_lb: f64, theta_ub: f64, draws: usize, seed: u64) -> Result<MeanCi> {
    if n == 0 || q == 0 || draws == 0 {
        return Err(crate::invalid("array size, codebook size and draw count must be positive"));
    }
    let t = (theta_ub.sin() - theta_lb.sin()) / (2 * q) as f64;
    let key = rng::derive_key(seed, &[Preset::Fig9.stream_id(), n as u64, q as u64, theta_ub.to_bits()]);
    let g = run_trials(draws, |i| {
        let mut r = rng::stream_rng(key, i);
        let theta = r.random_range(theta_lb..=theta_ub);
        let w = t / theta.cos();
        let phi = r.random_range(-w..=w);
        Ok(gain_gamma(n, (theta.sin() - (theta + phi).sin()).abs()))
    })?;
    Ok(mean_ci(&g))
}

fn fig9(cfg: &ExperimentConfig) -> Result<LongTable> {
    let mut table = LongTable::new(&["n", "q", "theta_ub_deg"]);
    for &mt in &cfg.mt {
        let n = mt / 2;
        for &ratio in &cfg.gain_bound_q_ratio {
            let q = ratio * n;
            for &ub in &cfg.gain_bound_range_deg {
                let (lb, ub_rad) = (-ub.to_radians(), ub.to_radians());
                let grid = [n.to_string(), q.to_string(), ub.to_string()];
                table.push_mean(&grid, "e_gamma", gain_bound_mean(n, q, lb, ub_rad, cfg.trials, cfg.seed)?);
                table.push(&grid, "varsigma_sq", gain_bound(n, q, lb, ub_rad)?, 0.0);
            }
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub trials: usize,
    pub clamped: usize,
}

/// Runs the configured preset on a pool of `cfg.threads` workers and writes
/// `<preset>.csv` plus `manifest.txt` into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path, overrides: &[String]) -> Result<RunSummary> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(format!("{}.csv", cfg.preset.name()));
    let mut counters = SweepCounters::default();
    pool.install(|| -> Result<()> {
        match cfg.preset {
            Preset::Table1 => {
                let plans = table1(cfg)?;
                write_plan_csv(std::io::BufWriter::new(fs::File::create(&csv_path)?), &plans)?;
            }
            Preset::Fig3 => {
                let (t, c) = compare_mono_dual(cfg)?;
                counters = c;
                t.write_file(&csv_path)?;
            }
            Preset::Fig7 => fig7(cfg)?.write_file(&csv_path)?,
            Preset::Fig9 => fig9(cfg)?.write_file(&csv_path)?,
            Preset::Fig4 | Preset::Fig5 | Preset::Fig6 | Preset::Custom => {
                let (t, c) = sweep(cfg)?;
                counters = c;
                t.write_file(&csv_path)?;
            }
        }
        Ok(())
    })?;
    let mut entries = vec![
        ("tool".to_string(), "polalign".to_string()),
        ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
    ];
    entries.extend(cfg.to_flat());
    for (i, o) in overrides.iter().enumerate() {
        entries.push((format!("override.{i}"), o.clone()));
    }
    entries.push(("output".into(), csv_path.file_name().unwrap().to_string_lossy().into_owned()));
    entries.push(("trials_run".into(), counters.trials.to_string()));
    entries.push(("clamped_trials".into(), counters.clamped.to_string()));
    let manifest = out_dir.join("manifest.txt");
    write_manifest(&manifest, &entries)?;
    Ok(RunSummary { files: vec![csv_path, manifest], trials: counters.trials, clamped: counters.clamped })
}
