//! DFT training codebooks and synthesis of the decoupled sounding outputs.
//!
//! The reference-signal decoupling is ideal: each of the four polarization
//! pairs `ab ∈ {vv, vh, hv, hh}` yields `y_ab = √ρ·C^H h_ab + n_ab`. On the
//! single-path channel `h_ab = α*_ab·h`; note the conjugate on α.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::channel::{complex_gaussian, DualPolChannel, MonoChannel};
use crate::linalg::inner;
use crate::{invalid, Error, Result};

/// Stream order used everywhere: vv, vh, hv, hh (receive pol, transmit pol).
pub const STREAMS: [(usize, usize); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];
pub const STREAM_NAMES: [&str; 4] = ["vv", "vh", "hv", "hh"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingCodebook {
    /// Normalization parameter: entries have modulus `1/√mt`, columns have `mt/2` entries.
    pub mt: usize,
    pub l_count: usize,
    pub columns: Vec<Vec<Complex64>>,
    /// False when `L < mt/2`, where `C C^H ∝ I` cannot hold.
    pub welch_equality: bool,
}

impl TrainingCodebook {
    pub fn dim(&self) -> usize {
        self.mt / 2
    }

    /// `C^H v`, length L.
    pub fn project(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: v.len() });
        }
        Ok(self.columns.iter().map(|c| inner(c, v)).collect())
    }

    /// Gram matrix `C C^H` (row-major, `dim × dim`).
    pub fn gram(&self) -> Vec<Vec<Complex64>> {
        let n = self.dim();
        let mut g = vec![vec![Complex64::default(); n]; n];
        for col in &self.columns {
            for (i, gi) in g.iter_mut().enumerate() {
                for (j, gij) in gi.iter_mut().enumerate() {
                    *gij += col[i] * col[j].conj();
                }
            }
        }
        g
    }

    /// Training codebook for a mono-polarized array of `n_elements` antennas.
    pub fn mono(n_elements: usize, l: usize) -> Result<Self> {
        dft_training(2 * n_elements, l)
    }
}

/// `c[ℓ]_k = exp(j·2π·k·ℓ/L)/√mt` for `k < mt/2`, `ℓ = 1..=L`.
pub fn dft_training(mt: usize, l: usize) -> Result<TrainingCodebook> {
    if mt < 2 || !mt.is_multiple_of(2) {
        return Err(invalid(format!("M_t must be even, got {mt}")));
    }
    if l == 0 {
        return Err(invalid("sounding length must be at least 1"));
    }
    let n = mt / 2;
    let amp = 1.0 / (mt as f64).sqrt();
    let columns = (1..=l)
        .map(|ell| {
            (0..n)
                .map(|k| {
                    // reduce k·ℓ mod L first to keep the phase argument small
                    let m = (k * ell) % l;
                    Complex64::from_polar(amp, 2.0 * PI * m as f64 / l as f64)
                })
                .collect()
        })
        .collect();
    Ok(TrainingCodebook {
        mt,
        l_count: l,
        columns,
        welch_equality: l >= n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservationSet {
    /// `[y_vv, y_vh, y_hv, y_hh]`, each of length L.
    pub streams: [Vec<Complex64>; 4],
    pub snr: f64,
    pub mt: usize,
    pub l: usize,
}

impl ObservationSet {
    pub fn stream(&self, a: usize, b: usize) -> &[Complex64] {
        &self.streams[2 * a + b]
    }

    /// Long-format CSV: `l, stream, real, imag` (ℓ is 1-based).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["l", "stream", "real", "imag"])?;
        for (name, ys) in STREAM_NAMES.iter().zip(&self.streams) {
            for (i, y) in ys.iter().enumerate() {
                w.write_record([(i + 1).to_string(), name.to_string(), y.re.to_string(), y.im.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub fn observe<R: Rng + ?Sized>(
    channel: &DualPolChannel,
    cb: &TrainingCodebook,
    snr: f64,
    rng: &mut R,
) -> Result<ObservationSet> {
    observe_scaled(channel, cb, snr, 1.0, rng)
}

/// As [`observe`], with the unit-variance noise multiplied by `noise_scale`
/// (0 gives the noiseless observation). Noise is drawn stream by stream in
/// the order vv, vh, hv, hh regardless of the scale.
pub fn observe_scaled<R: Rng + ?Sized>(
    channel: &DualPolChannel,
    cb: &TrainingCodebook,
    snr: f64,
    noise_scale: f64,
    rng: &mut R,
) -> Result<ObservationSet> {
    if channel.mt != cb.mt {
        return Err(Error::DimensionMismatch { expected: cb.mt, actual: channel.mt });
    }
    if !(snr >= 0.0) {
        return Err(invalid("SNR must be nonnegative"));
    }
    let amp = snr.sqrt();
    let streams = STREAMS.map(|(a, b)| -> Result<Vec<Complex64>> {
        let h_ab = channel.sub_channel_ab(a, b);
        let clean = cb.project(&h_ab)?;
        Ok(clean
            .into_iter()
            .map(|s| s * amp + complex_gaussian(rng, 1.0) * noise_scale)
            .collect())
    });
    let [vv, vh, hv, hh] = streams;
    Ok(ObservationSet {
        streams: [vv?, vh?, hv?, hh?],
        snr,
        mt: channel.mt,
        l: cb.l_count,
    })
}

/// Single observation vector `y = √ρ·C^H h + n` for a mono-polarized link.
pub fn observe_mono<R: Rng + ?Sized>(
    channel: &MonoChannel,
    cb: &TrainingCodebook,
    snr: f64,
    noise_scale: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let h = channel.column();
    let clean = cb.project(&h)?;
    let amp = snr.sqrt();
    Ok(clean
        .into_iter()
        .map(|s| s * amp + complex_gaussian(rng, 1.0) * noise_scale)
        .collect())
}
