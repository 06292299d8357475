//! Oracle and property suites with per-check pass/fail reports.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;

use crate::adaptive::{db_to_linear, gain_bound, marcum_q1, pmis_upper};
use crate::oracle::{marcum_q1_quadrature, pmis_quadrature};
use crate::sim::{cdf_check, gain_bound_mean};
use crate::sounding::{dft_training, TrainingCodebook};
use crate::{invalid, Error, Result};

pub const MARCUM_TOL: f64 = 1e-8;
pub const PMIS_EXACT_TOL: f64 = 1e-12;
pub const PMIS_ORACLE_TOL: f64 = 1e-6;
pub const WELCH_TOL: f64 = 1e-10;
pub const KS_LIMIT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Suite {
    Marcum,
    Pmis,
    Welch,
    GainBound,
    Cdf,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Marcum, Suite::Pmis, Suite::Welch, Suite::GainBound, Suite::Cdf];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Marcum => "marcum",
            Suite::Pmis => "pmis",
            Suite::Welch => "welch",
            Suite::GainBound => "gain-bound",
            Suite::Cdf => "cdf",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown validation suite `{s}`")))
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One comparison: `value` is checked against `limit` (an error tolerance or
/// an upper bound, depending on the suite).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: String, value: f64, limit: f64) -> Self {
        Self { pass: value <= limit, name, value, limit }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {}: {:.3e} (limit {:.3e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.limit)?;
        }
        let bad = self.failures().count();
        write!(f, "{}: {}/{} checks passed", self.suite, self.checks.len() - bad, self.checks.len())
    }
}

/// Sample counts for the Monte Carlo suites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidateOptions {
    pub draws: usize,
    pub seed: u64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self { draws: 100_000, seed: 1 }
    }
}

pub fn run_suite(suite: Suite, opts: &ValidateOptions) -> Result<SuiteReport> {
    let checks = match suite {
        Suite::Marcum => marcum_checks(),
        Suite::Pmis => pmis_checks()?,
        Suite::Welch => welch_checks()?,
        Suite::GainBound => gain_bound_checks(opts)?,
        Suite::Cdf => cdf_checks(opts)?,
    };
    Ok(SuiteReport { suite, checks })
}

/// 10×10 grid of `(a, b)` covering both tails and the transition region.
pub fn marcum_grid() -> Vec<(f64, f64)> {
    const A: [f64; 10] = [0.0, 0.25, 0.5, 1.0, 2.0, 3.5, 5.0, 8.0, 12.0, 20.0];
    const B: [f64; 10] = [0.05, 0.3, 0.75, 1.5, 2.5, 4.0, 6.0, 9.0, 13.0, 22.0];
    A.iter().flat_map(|&a| B.iter().map(move |&b| (a, b))).collect()
}

fn marcum_checks() -> Vec<Check> {
    marcum_grid()
        .into_iter()
        .map(|(a, b)| {
            let err = (marcum_q1(a, b) - marcum_q1_quadrature(a, b)).abs();
            Check::at_most(format!("Q1(a={a}, b={b})"), err, MARCUM_TOL)
        })
        .collect()
}

fn pmis_checks() -> Result<Vec<Check>> {
    let mut out = vec![Check::at_most(
        "pmis(0, 16) = 13/14".into(),
        (pmis_upper(0.0, 16)? - 13.0 / 14.0).abs(),
        PMIS_EXACT_TOL,
    )];
    for q1 in [16usize, 32] {
        for mu in [0.5, 2.0, 8.0] {
            let err = (pmis_upper(mu, q1)? - pmis_quadrature(mu, q1)).abs();
            out.push(Check::at_most(format!("pmis(mu_sq={mu}, Q1={q1})"), err, PMIS_ORACLE_TOL));
        }
    }
    Ok(out)
}

/// Largest entrywise deviation of the Gram matrix from `(L/M_t)·I`.
pub fn gram_deviation(cb: &TrainingCodebook) -> f64 {
    let scale = cb.l_count as f64 / cb.mt as f64;
    let mut worst = 0.0f64;
    for (i, row) in cb.gram().iter().enumerate() {
        for (j, z) in row.iter().enumerate() {
            let target = if i == j { scale } else { 0.0 };
            worst = worst.max((z - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

fn welch_checks() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for mt in [32usize, 64] {
        for l in (mt / 2)..=(3 * mt) {
            let dev = gram_deviation(&dft_training(mt, l)?);
            out.push(Check::at_most(format!("gram(M_t={mt}, L={l})"), dev, WELCH_TOL));
        }
    }
    Ok(out)
}

/// Codebook sizes (as multiples of the sub-array size) and angular half-ranges
/// in degrees used by the gain-bound suite.
pub const GAIN_BOUND_Q_RATIOS: [usize; 4] = [1, 2, 4, 8];
pub const GAIN_BOUND_RANGES_DEG: [f64; 5] = [15.0, 30.0, 45.0, 60.0, 75.0];

fn gain_bound_checks(opts: &ValidateOptions) -> Result<Vec<Check>> {
    if opts.draws == 0 {
        return Err(invalid("draw count must be positive"));
    }
    let mut out = Vec::new();
    for n in [16usize, 32] {
        for ratio in GAIN_BOUND_Q_RATIOS {
            let q = ratio * n;
            for deg in GAIN_BOUND_RANGES_DEG {
                let (lb, ub) = (-deg.to_radians(), deg.to_radians());
                let m = gain_bound_mean(n, q, lb, ub, opts.draws, opts.seed)?;
                let bound = gain_bound(n, q, lb, ub)?;
                out.push(Check::at_most(format!("E[gamma](N={n}, Q={q}, range=±{deg}°)"), m.mean, bound));
            }
        }
    }
    Ok(out)
}

fn cdf_checks(opts: &ValidateOptions) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for mt in [32usize, 64] {
        for l in [mt / 2, 2 * mt] {
            let c = cdf_check(mt, l, db_to_linear(-10.0), -PI / 3.0, PI / 3.0, opts.draws, opts.seed)?;
            out.push(Check::at_most(format!("KS(M_t={mt}, L={l}, snr=-10 dB)"), c.ks, KS_LIMIT));
        }
    }
    Ok(out)
}
