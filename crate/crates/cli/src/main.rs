use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use polalign::adaptive::{db_to_linear, select_l, write_plan_csv, PlanRequest, SoundingPlan};
use polalign::channel;
use polalign::estimator::hard_alignment;
use polalign::manifold::build_codebook;
use polalign::sim::{self, ExperimentConfig, LSpec, Preset, Scheme, StreamKeys, TrialSetup};
use polalign::sounding::observe;
use polalign::validate::{self, Suite, ValidateOptions};
use polalign::Error;
use serde_json::json;

#[derive(Parser)]
#[command(name = "polalign", version, about = "Dual-polarized mmWave beam-alignment simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment preset or config file and write CSV results.
    Run(RunArgs),
    /// Choose the sounding length for a target misalignment probability.
    Plan(PlanArgs),
    /// Run an oracle or property suite; exits 1 if any check fails.
    Validate(ValidateArgs),
    /// Write a beam codebook as CSV.
    DumpCodebook(CodebookArgs),
    /// Write the channel, observations and alignment of a single trial.
    DumpTrial(DumpTrialArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Built-in experiment (table1, fig3, fig4, fig5, fig6, fig7, fig9, custom).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set snr_db=-6` or `--set experiment.mt=32,64`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads (0 uses every core).
    #[arg(long)]
    threads: Option<usize>,
}

impl ConfigArgs {
    /// Loads the config and applies overrides. Returns every override applied,
    /// including the dedicated flags, in application order.
    fn load(&self) -> polalign::Result<(ExperimentConfig, Vec<String>)> {
        let mut cfg = match (&self.preset, &self.config) {
            (_, Some(path)) => ExperimentConfig::from_toml_str(&fs::read_to_string(path)?)?,
            (Some(name), None) => ExperimentConfig::for_preset(Preset::parse(name)?),
            (None, None) => return Err(Error::Config("either --preset or --config is required".into())),
        };
        let mut applied = self.overrides.clone();
        if let Some(s) = self.seed {
            applied.push(format!("experiment.seed={s}"));
        }
        if let Some(t) = self.trials {
            applied.push(format!("experiment.trials={t}"));
        }
        if let Some(t) = self.threads {
            applied.push(format!("experiment.threads={t}"));
        }
        for kv in &applied {
            cfg.apply_override(kv)?;
        }
        cfg.validate()?;
        Ok((cfg, applied))
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long, allow_negative_numbers = true)]
    snr_db: f64,
    #[arg(long, default_value_t = 32)]
    mt: usize,
    #[arg(long, default_value_t = 0.6)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha_sq: f64,
    #[arg(long, default_value_t = -60.0, allow_negative_numbers = true)]
    theta_lb_deg: f64,
    #[arg(long, default_value_t = 60.0, allow_negative_numbers = true)]
    theta_ub_deg: f64,
    /// Rician K-factor used to scale the planning SNR.
    #[arg(long, default_value_t = 13.5, allow_negative_numbers = true)]
    k_factor_db: f64,
    /// Plan with the full channel power instead of the line-of-sight share.
    #[arg(long)]
    no_k_factor: bool,
    /// Append the plan row to this CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// marcum, pmis, welch, gain-bound or cdf.
    suite: String,
    /// Monte Carlo draws per point for the gain-bound and cdf suites.
    #[arg(long, default_value_t = 100_000)]
    draws: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct CodebookArgs {
    #[arg(long, default_value_t = 32)]
    mt: usize,
    /// Codebook level (1 or 2).
    #[arg(long, default_value_t = 1)]
    level: u8,
    /// Phase-shifter resolution in bits (0 keeps ideal phases).
    #[arg(long, default_value_t = 0)]
    phase_bits: u32,
    #[arg(long, default_value_t = -60.0, allow_negative_numbers = true)]
    theta_lb_deg: f64,
    #[arg(long, default_value_t = 60.0, allow_negative_numbers = true)]
    theta_ub_deg: f64,
    /// Output file (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DumpFormat {
    Json,
    Csv,
}

#[derive(Args)]
struct DumpTrialArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Array size (defaults to the first configured value).
    #[arg(long)]
    mt: Option<usize>,
    /// SNR in dB; must be on the configured grid (defaults to the first).
    #[arg(long, allow_negative_numbers = true)]
    snr_db: Option<f64>,
    /// Position in the configured polarization-angle list.
    #[arg(long, default_value_t = 0)]
    zeta_index: usize,
    /// Sounding length (defaults to M_t).
    #[arg(long)]
    l: Option<usize>,
    /// soft, hard, full_csi or full_csi_quantized.
    #[arg(long, default_value = "soft")]
    scheme: String,
    /// Trial index within the grid point.
    #[arg(long, default_value_t = 0)]
    trial: u64,
    /// `json` writes everything; `csv` writes the observations only.
    #[arg(long, value_enum, default_value = "json")]
    format: DumpFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => 2,
        Error::Io(_) | Error::Csv(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Plan(a) => cmd_plan(&a),
        Command::Validate(a) => cmd_validate(&a),
        Command::DumpCodebook(a) => cmd_dump_codebook(&a),
        Command::DumpTrial(a) => cmd_dump_trial(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn cmd_run(a: &RunArgs) -> polalign::Result<ExitCode> {
    let (cfg, applied) = a.config.load()?;
    let summary = sim::run_experiment(&cfg, &a.out, &applied)?;
    for f in &summary.files {
        println!("wrote {}", f.display());
    }
    if summary.trials > 0 {
        println!("{} trials, {} clamped gain ratios", summary.trials, summary.clamped);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_plan(a: &PlanArgs) -> polalign::Result<ExitCode> {
    let plan = select_l(&PlanRequest {
        snr: db_to_linear(a.snr_db),
        mt: a.mt,
        alpha_sq: a.alpha_sq,
        epsilon: a.epsilon,
        theta_lb: a.theta_lb_deg.to_radians(),
        theta_ub: a.theta_ub_deg.to_radians(),
        k_factor_db: (!a.no_k_factor).then_some(a.k_factor_db),
    })?;
    if plan.capped {
        return Err(Error::Config(format!(
            "target ε = {} is not reachable at {} dB with M_t = {}",
            a.epsilon, a.snr_db, a.mt
        )));
    }
    print_plan(&plan, a.snr_db);
    if let Some(path) = &a.csv {
        append_plan(path, &plan)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn print_plan(p: &SoundingPlan, snr_db: f64) {
    println!("L = {}", p.l_final);
    println!(
        "snr_db={snr_db} mt={} q1={} epsilon={} alpha_sq={} varsigma_sq={:.6} l_hat={} l_final={} pmis_bound={:.6}",
        p.mt, p.q1, p.epsilon, p.alpha_sq, p.varsigma_sq, p.l_hat, p.l_final, p.pmis_at_l
    );
}

/// Appends one row, writing the header only when the file is new or empty.
fn append_plan(path: &Path, plan: &SoundingPlan) -> polalign::Result<()> {
    let mut buf = Vec::new();
    write_plan_csv(&mut buf, std::slice::from_ref(plan))?;
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let text = String::from_utf8_lossy(&buf);
    let body = if fresh { &text[..] } else { text.split_once('\n').map_or("", |(_, rest)| rest) };
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(body.as_bytes())?;
    Ok(())
}

fn cmd_validate(a: &ValidateArgs) -> polalign::Result<ExitCode> {
    let suite: Suite = a.suite.parse()?;
    let report = validate::run_suite(suite, &ValidateOptions { draws: a.draws, seed: a.seed })?;
    println!("{report}");
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn output(path: Option<&Path>) -> polalign::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn cmd_dump_codebook(a: &CodebookArgs) -> polalign::Result<ExitCode> {
    let book = build_codebook(a.level, a.mt, a.theta_lb_deg.to_radians(), a.theta_ub_deg.to_radians(), a.phase_bits)?;
    book.write_csv(output(a.out.as_deref())?)?;
    Ok(ExitCode::SUCCESS)
}

/// Re-creates one trial of a sweep with the same random streams the runner
/// uses for that grid point.
fn cmd_dump_trial(a: &DumpTrialArgs) -> polalign::Result<ExitCode> {
    let (cfg, _) = a.config.load()?;
    let mt = a.mt.unwrap_or(cfg.mt[0]);
    let snr_db = a.snr_db.unwrap_or(cfg.snr_db[0]);
    let si = cfg
        .snr_db
        .iter()
        .position(|&s| s == snr_db)
        .ok_or_else(|| Error::Config(format!("{snr_db} dB is not on the configured SNR grid")))?;
    let zeta = *cfg
        .zeta
        .get(a.zeta_index)
        .ok_or_else(|| Error::Config(format!("zeta index {} is out of range", a.zeta_index)))?;
    let l = match a.l {
        Some(l) => l,
        None => match cfg.l.first() {
            Some(LSpec::Fixed(l)) => *l,
            _ => mt,
        },
    };
    let scheme = Scheme::parse(&a.scheme)?;
    let setup = TrialSetup::new(cfg.channel_config(mt, zeta), cfg.form, db_to_linear(snr_db), l, scheme, cfg.phase_bits)?;
    let pid = cfg.preset.stream_id();
    let keys = StreamKeys {
        seed: cfg.seed,
        channel_coords: vec![pid, mt as u64, a.zeta_index as u64],
        noise_coords: vec![pid, mt as u64, a.zeta_index as u64, si as u64, l as u64],
    };
    let ch = channel::sample(cfg.form, &setup.channel, &mut keys.channel_rng(a.trial))?;
    let obs = observe(&ch, &setup.training, setup.snr, &mut keys.noise_rng(a.trial))?;
    let mut out = output(a.out.as_deref())?;
    match a.format {
        DumpFormat::Csv => obs.write_csv(&mut out)?,
        DumpFormat::Json => {
            let alignment = match scheme {
                Scheme::Soft => Some(setup.aligner().align(&obs, &setup.training, setup.phase_bits)?),
                Scheme::Hard => Some(hard_alignment(&obs, &setup.training, setup.phase_bits)?),
                Scheme::FullCsi | Scheme::FullCsiQuantized => None,
            };
            let metrics = sim::run_trial_on(&setup, &ch, &mut keys.noise_rng(a.trial))?;
            let doc = json!({
                "preset": cfg.preset.name(),
                "seed": cfg.seed,
                "trial": a.trial,
                "mt": mt,
                "snr_db": snr_db,
                "zeta": zeta.to_string(),
                "l": l,
                "scheme": scheme.name(),
                "form": cfg.form.name(),
                "channel": ch,
                "observations": obs,
                "alignment": alignment,
                "metrics": metrics,
            });
            serde_json::to_writer_pretty(&mut out, &doc).map_err(io::Error::from)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}
