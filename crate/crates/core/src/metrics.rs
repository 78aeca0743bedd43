//! Rates, power ratio and complexity accounting.

use std::time::Instant;

use crate::error::Result;
use crate::params::{lin_to_db, SystemConfig};
use crate::waveform::Synthesizer;

/// `W log2(1 + s_energy / sigma2)`.
pub fn bd_rate(s_energy: f64, sigma2: f64, bandwidth_hz: f64) -> f64 {
    bandwidth_hz * (1.0 + (s_energy / sigma2).max(0.0)).log2()
}

/// `W log2(1 + gamma_p)`.
pub fn primary_rate(gamma_p: f64, bandwidth_hz: f64) -> f64 {
    bandwidth_hz * (1.0 + gamma_p.max(0.0)).log2()
}

/// `10 log10(P_pilot / P_data)`.
pub fn power_ratio_eta(p_pilot: f64, p_data: f64) -> f64 {
    lin_to_db(p_pilot / p_data)
}

/// Sensing SNR `E_pilot / N0` (linear).
pub fn sensing_snr(pilot_energy: f64, sigma2: f64) -> f64 {
    pilot_energy / sigma2
}

/// Link rates of one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub bandwidth_hz: f64,
    pub snr_primary: f64,
    pub r_primary_bps: f64,
    pub snr_bd: Vec<f64>,
    pub r_bd_bps: Vec<f64>,
    /// `r_primary_bps + sum(r_bd_bps)`.
    pub r_sum_bps: f64,
}

impl RateReport {
    /// Primary link over `bandwidth_hz`; each device over its own share
    /// `bd_bandwidth_hz`.
    pub fn new(bandwidth_hz: f64, snr_primary: f64, snr_bd: Vec<f64>, bd_bandwidth_hz: f64) -> Self {
        let r_primary_bps = primary_rate(snr_primary, bandwidth_hz);
        let r_bd_bps: Vec<f64> = snr_bd.iter().map(|&s| bd_rate(s, 1.0, bd_bandwidth_hz)).collect();
        let r_sum_bps = r_primary_bps + r_bd_bps.iter().sum::<f64>();
        Self {
            bandwidth_hz,
            snr_primary,
            r_primary_bps,
            snr_bd,
            r_bd_bps,
            r_sum_bps,
        }
    }
}

/// Operation counts of one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexityReport {
    pub n: usize,
    /// `2 N log2 N + N`: one IDFT for the data, one transform-sized pass for
    /// the pilot, and the superposition.
    pub transmit_ops: f64,
    /// One switching decision per device per block.
    pub bd_ops: usize,
    /// Receiver: one DFT, one DAFT and `Z K` energy accumulations.
    pub receive_ops: f64,
}

pub fn complexity_counters(cfg: &SystemConfig, z: usize, forward_taps: usize) -> ComplexityReport {
    let n = cfg.n() as f64;
    let nlogn = n * n.log2();
    ComplexityReport {
        n: cfg.n(),
        transmit_ops: 2.0 * nlogn + n,
        bd_ops: z,
        receive_ops: 2.0 * nlogn + 2.0 * n + (z * forward_taps) as f64,
    }
}

/// Best-of-`reps` wall time (seconds) to synthesize one block.
pub fn time_synthesis(cfg: &SystemConfig, reps: usize) -> Result<f64> {
    let syn = Synthesizer::<f64>::new(cfg)?;
    let bits: Vec<u8> = (0..syn.bits_per_block()).map(|k| (k % 3 == 0) as u8).collect();
    let mut best = f64::INFINITY;
    for _ in 0..reps.max(1) {
        let b = bits.clone();
        let t = Instant::now();
        let tx = syn.synthesize(b)?;
        std::hint::black_box(&tx);
        best = best.min(t.elapsed().as_secs_f64());
    }
    Ok(best)
}

/// Least-squares fit `t = a N log2 N` through the origin; returns `a` and
/// the largest relative deviation of any point from the fit.
pub fn fit_nlogn(points: &[(usize, f64)]) -> (f64, f64) {
    let x: Vec<f64> = points.iter().map(|&(n, _)| n as f64 * (n as f64).log2()).collect();
    let num: f64 = x.iter().zip(points).map(|(xi, &(_, t))| xi * t).sum();
    let den: f64 = x.iter().map(|xi| xi * xi).sum();
    let a = num / den;
    let dev = x
        .iter()
        .zip(points)
        .map(|(xi, &(_, t))| ((t - a * xi) / (a * xi)).abs())
        .fold(0.0, f64::max);
    (a, dev)
}
