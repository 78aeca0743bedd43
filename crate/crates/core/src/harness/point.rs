//! Parallel execution and aggregation of one operating point.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{power_ratio_eta, primary_rate, bd_rate};
use crate::params::lin_to_db;
use crate::sensing::{to_range, RmseAccumulator};

use super::trial::{run_trial, PointContext, TrialRecord};


/// Two-sided 99% standard-normal quantile.
pub const Z99: f64 = 2.575_829_303_548_900_4;

const CHUNK: usize = 4096;

/// RNG for `(master seed, point, trial, purpose)`; streams of different
/// trials never overlap, whatever thread runs them.
pub fn trial_rng(master_seed: u64, point_id: u64, trial: u64, purpose: u8) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&point_id.to_le_bytes());
    key[16] = purpose;
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(trial);
    rng
}

/// Independent random sources of one trial.
///
/// Splitting by purpose keeps, for example, the direct channel, the data
/// and the receiver noise identical between two points that differ only in
/// the device population.
#[derive(Debug, Clone)]
pub struct TrialStreams {
    pub channel: ChaCha8Rng,
    pub data: ChaCha8Rng,
    pub devices: ChaCha8Rng,
    pub noise: ChaCha8Rng,
    pub sensing: ChaCha8Rng,
}

impl TrialStreams {
    pub fn new(master_seed: u64, point_id: u64, trial: u64) -> Self {
        let r = |p| trial_rng(master_seed, point_id, trial, p);
        Self {
            channel: r(0),
            data: r(1),
            devices: r(2),
            noise: r(3),
            sensing: r(4),
        }
    }
}

/// One aggregated figure of merit.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: &'static str,
    pub value: f64,
    /// Half-width of a 99% confidence interval (0 when not applicable).
    pub ci99: f64,
}

/// Aggregated result of one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub point_id: u64,
    pub trials: usize,
    pub failed: usize,
    pub z: usize,
    pub metrics: Vec<Metric>,
}

impl PointResult {
    pub fn get(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.get(name).map(|m| m.value)
    }
}

/// `p` and the normal-approximation 99% half-width; with no events the
/// half-width is the exact 99% upper bound `ln(100) / n`.
pub fn binomial(events: u64, n: u64) -> (f64, f64) {
    let p = events as f64 / n as f64;
    if events == 0 {
        return (0.0, 100f64.ln() / n as f64);
    }
    (p, Z99 * (p * (1.0 - p) / n as f64).sqrt())
}

#[derive(Debug, Default, Clone)]
struct Moments {
    n: u64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    /// 99% half-width of the mean.
    fn ci(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let m = self.mean();
        let var = ((self.sum_sq - self.n as f64 * m * m) / (self.n as f64 - 1.0)).max(0.0);
        Z99 * (var / self.n as f64).sqrt()
    }
}

#[derive(Debug, Default, Clone)]
struct Aggregate {
    ones: u64,
    misses: u64,
    zeros: u64,
    false_alarms: u64,
    analytic: Moments,
    block_ber: Moments,
    bit_errors: u64,
    bits: u64,
    block_rate: Moments,
    s_energy_sum: Vec<f64>,
    s_energy_n: Vec<u64>,
    sq_range: Moments,
    rmse: RmseAccumulator,
    exact: u64,
    ranged: u64,
}

impl Aggregate {
    fn push(&mut self, r: &TrialRecord, ctx: &PointContext) {
        if self.s_energy_sum.len() < r.bd_bits.len() {
            self.s_energy_sum.resize(r.bd_bits.len(), 0.0);
            self.s_energy_n.resize(r.bd_bits.len(), 0);
        }
        for (z, (&b, &d)) in r.bd_bits.iter().zip(&r.decisions).enumerate() {
            if b == 1 {
                self.ones += 1;
                self.misses += u64::from(d == 0);
                if let Some(&p) = r.pmd_analytic.get(z) {
                    self.analytic.push(p);
                }
                self.s_energy_sum[z] += r.s_energy[z];
                self.s_energy_n[z] += 1;
            } else {
                self.zeros += 1;
                self.false_alarms += u64::from(d == 1);
            }
        }
        if r.bits > 0 {
            self.bit_errors += r.bit_errors as u64;
            self.bits += r.bits as u64;
            self.block_ber.push(r.bit_errors as f64 / r.bits as f64);
            self.block_rate.push(r.spectral_efficiency);
        }
        let mode = ctx.scenario.range_mode;
        for (&hat, &truth) in r.tau_hat.iter().zip(&r.tau_true) {
            self.rmse.push(hat, truth, mode);
            self.sq_range.push((to_range(hat, mode) - to_range(truth, mode)).powi(2));
            self.ranged += 1;
            self.exact += u64::from(hat == truth);
        }
    }

    fn metrics(&self, ctx: &PointContext, failed: usize) -> Vec<Metric> {
        let cfg = &ctx.cfg;
        let mut out = Vec::new();
        let mut put = |name: &'static str, value: f64, ci99: f64| out.push(Metric { name, value, ci99 });
        put("z_effective", ctx.z() as f64, 0.0);
        if self.ones > 0 {
            let (p, ci) = binomial(self.misses, self.ones);
            put("pmd", p, ci);
        }
        if self.analytic.n > 0 {
            put("pmd_analytic", self.analytic.mean(), self.analytic.ci());
        }
        if self.zeros > 0 {
            let (p, ci) = binomial(self.false_alarms, self.zeros);
            put("pfa", p, ci);
        }
        let w = cfg.bandwidth_hz();
        let mut r_primary = None;
        if self.bits > 0 {
            put("ber", self.bit_errors as f64 / self.bits as f64, self.block_ber.ci());
            // ergodic spectral efficiency over blocks; gamma_p is its SNR equivalent
            let se = self.block_rate.mean();
            put("gamma_p", se.exp2() - 1.0, 0.0);
            let r = primary_rate(se.exp2() - 1.0, w);
            put("rate_primary_bps", r, w * self.block_rate.ci());
            r_primary = Some(r);
        }
        if ctx.z() > 0 {
            let k = ctx.scenario.forward_taps as f64;
            let bw = w * k / cfg.n() as f64;
            let r_bd: f64 = self
                .s_energy_sum
                .iter()
                .zip(&self.s_energy_n)
                .filter(|(_, &n)| n > 0)
                .map(|(&s, &n)| bd_rate(s / n as f64, k * cfg.noise_var(), bw))
                .sum();
            put("rate_bd_bps", r_bd, 0.0);
            if let Some(rp) = r_primary {
                put("rate_sum_bps", rp + r_bd, 0.0);
            }
        } else if let Some(rp) = r_primary {
            put("rate_bd_bps", 0.0, 0.0);
            put("rate_sum_bps", rp, 0.0);
        }
        if self.ranged > 0 {
            let rmse = self.rmse.rmse_range().unwrap_or(0.0);
            let ci = if rmse > 0.0 { self.sq_range.ci() / (2.0 * rmse) } else { 0.0 };
            put("rmse_m", rmse, ci);
            put("rmse_tau_s", self.rmse.rmse_tau().unwrap_or(0.0), 0.0);
            put("sensing_exact", self.exact as f64 / self.ranged as f64, 0.0);
        }
        put("eta_db", power_ratio_eta(cfg.p_pilot(), cfg.p_data()), 0.0);
        put("gamma_rmse_db", lin_to_db(cfg.p_pilot() / cfg.noise_var()), 0.0);
        put("trial_errors", failed as f64, 0.0);
        out
    }
}

/// Name of the metric that closes every point's block of rows.
pub const LAST_METRIC: &str = "trial_errors";

/// Runs `trials` trials on `pool` (or the global pool) and aggregates them
/// in trial order.
///
/// Individual trial failures are tolerated up to 1% of the budget.
pub fn run_point(
    ctx: &PointContext,
    trials: usize,
    master_seed: u64,
    point_id: u64,
    pool: Option<&rayon::ThreadPool>,
) -> Result<PointResult> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    let mut agg = Aggregate::default();
    let mut failed = 0usize;
    let mut first_error: Option<Error> = None;
    let mut start = 0usize;
    while start < trials {
        let end = (start + CHUNK).min(trials);
        let work = || {
            (start..end)
                .into_par_iter()
                .map(|t| {
                    let mut streams = TrialStreams::new(master_seed, point_id, t as u64);
                    run_trial(ctx, t as u64, &mut streams)
                })
                .collect::<Vec<_>>()
        };
        let batch = match pool {
            Some(p) => p.install(work),
            None => work(),
        };
        for r in batch {
            match r {
                Ok(rec) => agg.push(&rec, ctx),
                Err(e) => {
                    failed += 1;
                    first_error.get_or_insert(e);
                }
            }
        }
        start = end;
    }
    if failed * 100 > trials {
        return Err(Error::TooManyTrialErrors {
            point_id: point_id as usize,
            failed,
            trials,
            first: first_error.map(|e| e.to_string()).unwrap_or_default(),
        });
    }
    Ok(PointResult {
        point_id,
        trials,
        failed,
        z: ctx.z(),
        metrics: agg.metrics(ctx, failed),
    })
}
