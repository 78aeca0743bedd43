//! Dechirp-based delay and range estimation.
//!
//! Dechirping a pilot echo delayed by `l` samples leaves a tone in DFT bin
//! `c1' l`, i.e. the discrete chirp rate is `R_t = c1' / N` cycles per
//! sample squared and `tau = bin / c1'` samples.

use rand::Rng;

use crate::block::{ComplexBlock, Domain};
use crate::channel::{add_noise, Tap};
use crate::error::{Error, Result};
use crate::params::SystemConfig;
use crate::scalar::Real;
use crate::stats::{chi2_isf, noncentral_chi2_cdf};
use crate::waveform::Dft;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// `y[n] conj(p[n]) / |p[n]|`.
pub fn dechirp<T: Real>(y: &ComplexBlock<T>, pilot: &ComplexBlock<T>) -> Result<ComplexBlock<T>> {
    y.expect_len(pilot.len())?;
    let samples = y
        .samples()
        .iter()
        .zip(pilot.samples())
        .map(|(a, p)| {
            let mag = p.norm();
            if mag > T::zero() {
                a * p.conj() / mag
            } else {
                num_complex::Complex::new(T::zero(), T::zero())
            }
        })
        .collect();
    Ok(ComplexBlock::new(samples, Domain::Time))
}

/// One detected echo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayEstimate {
    pub peak_bin: usize,
    /// Delay in samples.
    pub tau_samples: f64,
    /// Delay in seconds.
    pub tau_s: f64,
    pub peak_mag: f64,
}

/// Spectrum magnitudes (unitary DFT) of a dechirped block.
pub fn beat_spectrum<T: Real>(dechirped: &ComplexBlock<T>, dft: &Dft<T>) -> Result<Vec<f64>> {
    let f = dft.forward(dechirped)?;
    Ok(f.samples().iter().map(|v| v.norm().as_f64()).collect())
}

/// The `expected_count` strongest peaks at least `c1'` bins apart
/// (cyclically), ties going to the lower bin, sorted by delay.
pub fn estimate_delays<T: Real>(
    dechirped: &ComplexBlock<T>,
    cfg: &SystemConfig,
    expected_count: usize,
) -> Result<Vec<DelayEstimate>> {
    let dft = Dft::new(cfg.n());
    estimate_delays_with(dechirped, cfg, &dft, expected_count)
}

/// As [`estimate_delays`] with a caller-provided transform.
pub fn estimate_delays_with<T: Real>(
    dechirped: &ComplexBlock<T>,
    cfg: &SystemConfig,
    dft: &Dft<T>,
    expected_count: usize,
) -> Result<Vec<DelayEstimate>> {
    if expected_count == 0 {
        return Err(Error::invalid("expected_count", "must be at least 1"));
    }
    let n = cfg.n();
    let sep = cfg.c1_prime();
    let mags = beat_spectrum(dechirped, dft)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| mags[b].total_cmp(&mags[a]).then(a.cmp(&b)));
    let mut picked: Vec<usize> = Vec::with_capacity(expected_count);
    for k in order {
        if picked.len() == expected_count {
            break;
        }
        let clear = picked.iter().all(|&p| {
            let d = k.abs_diff(p);
            d.min(n - d) >= sep
        });
        if clear {
            picked.push(k);
        }
    }
    if picked.len() < expected_count {
        return Err(Error::TooFewPeaks {
            expected: expected_count,
            found: picked.len(),
        });
    }
    picked.sort_unstable();
    Ok(picked
        .into_iter()
        .map(|bin| {
            let tau_samples = bin as f64 / sep as f64;
            DelayEstimate {
                peak_bin: bin,
                tau_samples,
                tau_s: tau_samples / cfg.sample_rate_hz(),
                peak_mag: mags[bin],
            }
        })
        .collect())
}

/// Delay-to-range mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RangeMode {
    /// Round trip: `r = c tau / 2`.
    #[default]
    Monostatic,
    /// One way: `r = c tau`.
    Bistatic,
}

pub fn to_range(tau_s: f64, mode: RangeMode) -> f64 {
    match mode {
        RangeMode::Monostatic => SPEED_OF_LIGHT * tau_s / 2.0,
        RangeMode::Bistatic => SPEED_OF_LIGHT * tau_s,
    }
}

/// Root mean squared difference.
pub fn rmse(estimates: &[f64], truths: &[f64]) -> Result<f64> {
    if estimates.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            actual: estimates.len(),
        });
    }
    if estimates.is_empty() {
        return Err(Error::EmptyInput);
    }
    let ss: f64 = estimates.iter().zip(truths).map(|(e, t)| (e - t).powi(2)).sum();
    Ok((ss / estimates.len() as f64).sqrt())
}

/// Streaming squared-error accumulator in both delay (s) and range (m).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RmseAccumulator {
    pub count: u64,
    pub sum_sq_tau: f64,
    pub sum_sq_range: f64,
}

impl RmseAccumulator {
    pub fn push(&mut self, tau_hat_s: f64, tau_true_s: f64, mode: RangeMode) {
        self.count += 1;
        self.sum_sq_tau += (tau_hat_s - tau_true_s).powi(2);
        self.sum_sq_range += (to_range(tau_hat_s, mode) - to_range(tau_true_s, mode)).powi(2);
    }

    pub fn merge(&mut self, other: &Self) {
        self.count += other.count;
        self.sum_sq_tau += other.sum_sq_tau;
        self.sum_sq_range += other.sum_sq_range;
    }

    pub fn rmse_tau(&self) -> Option<f64> {
        (self.count > 0).then(|| (self.sum_sq_tau / self.count as f64).sqrt())
    }

    pub fn rmse_range(&self) -> Option<f64> {
        (self.count > 0).then(|| (self.sum_sq_range / self.count as f64).sqrt())
    }
}

/// Outcome of the pilot-only environment probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeResult {
    pub ell_dmax: usize,
    /// Analytical detection probability of the path reported as the last
    /// one, evaluated at its measured strength.
    pub confidence: f64,
}

/// Sends the pilot alone through the direct taps, dechirps, and returns the
/// largest integer delay whose beat bin exceeds a threshold set for
/// `p_fa / N` per bin.
pub fn probe_environment<T: Real, R: Rng + ?Sized>(
    cfg: &SystemConfig,
    pilot: &ComplexBlock<T>,
    direct: &[Tap<T>],
    sigma2: f64,
    rng: &mut R,
) -> Result<ProbeResult> {
    let n = cfg.n();
    pilot.expect_len(n)?;
    let mut y = ComplexBlock::zeros(n, Domain::Time);
    for tap in direct {
        y = y.add(&pilot.circular_delay(tap.delay).scale(tap.gain))?;
    }
    add_noise(&mut y, sigma2, rng);
    let mags = beat_spectrum(&dechirp(&y, pilot)?, &Dft::new(n))?;
    let power: Vec<f64> = mags.iter().map(|m| m * m).collect();
    let q = cfg.p_fa_target() / n as f64;
    let isf = chi2_isf(q, 2.0)?;
    let floor = 1e-12 * power.iter().cloned().fold(0.0, f64::max);
    let xi = (0.5 * sigma2 * isf).max(floor);
    let last = (0..cfg.m())
        .rev()
        .find(|&l| power[(l * cfg.c1_prime()) % n] > xi)
        .ok_or(Error::NoPathDetected)?;
    let confidence = if sigma2 > 0.0 {
        let p = power[last * cfg.c1_prime() % n];
        let lambda = 2.0 * (p - sigma2).max(0.0) / sigma2;
        1.0 - noncentral_chi2_cdf(isf, 2.0, lambda)?
    } else {
        1.0
    };
    Ok(ProbeResult {
        ell_dmax: last,
        confidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::generate_pilot_time;
    use num_complex::Complex;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_delay_dechirps_to_constant() {
        let cfg = SystemConfig::table1();
        let p: ComplexBlock<f64> = generate_pilot_time(&cfg);
        let d = dechirp(&p, &p).unwrap();
        let c = d.samples()[0];
        assert!(d.samples().iter().all(|v| (v - c).norm() < 1e-12));
        let est = estimate_delays(&d, &cfg, 1).unwrap();
        assert_eq!(est[0].tau_samples, 0.0);
    }

    #[test]
    fn single_delay_is_exact() {
        let cfg = SystemConfig::table1();
        let p: ComplexBlock<f64> = generate_pilot_time(&cfg);
        let d = dechirp(&p.circular_delay(5), &p).unwrap();
        let est = estimate_delays(&d, &cfg, 1).unwrap();
        assert_eq!(est[0].peak_bin, 40);
        assert_eq!(est[0].tau_samples, 5.0);
    }

    #[test]
    fn two_echoes_scale_with_alpha() {
        let cfg = SystemConfig::table1();
        let p: ComplexBlock<f64> = generate_pilot_time(&cfg);
        let y = p
            .circular_delay(3)
            .add(&p.circular_delay(9).scale(Complex::new(0.25, 0.0)))
            .unwrap();
        let est = estimate_delays(&dechirp(&y, &p).unwrap(), &cfg, 2).unwrap();
        assert_eq!((est[0].tau_samples, est[1].tau_samples), (3.0, 9.0));
        assert!((est[1].peak_mag / est[0].peak_mag - 0.25).abs() < 1e-9);
    }

    #[test]
    fn too_few_peaks() {
        let cfg = SystemConfig::table1()
            .with(&[("n", 8.0), ("c1_prime", 2.0), ("cp_len", 2.0)])
            .unwrap();
        let z = ComplexBlock::<f64>::zeros(8, Domain::Time);
        assert!(matches!(estimate_delays(&z, &cfg, 5), Err(Error::TooFewPeaks { expected: 5, found: 4 })));
    }

    #[test]
    fn range_arithmetic() {
        assert_eq!(to_range(0.0, RangeMode::Monostatic), 0.0);
        assert!((to_range(1e-6, RangeMode::Monostatic) - 149.896229).abs() < 1e-6);
        assert!((to_range(1.0 / 7.68e6, RangeMode::Monostatic) - 19.5177).abs() < 1e-3);
        assert_eq!(to_range(2e-6, RangeMode::Bistatic), 2.0 * to_range(2e-6, RangeMode::Monostatic));
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[1.0, -1.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert!(matches!(rmse(&[], &[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn probe_finds_last_tap() {
        let cfg = SystemConfig::table1();
        let p: ComplexBlock<f64> = generate_pilot_time(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let taps: Vec<Tap<f64>> = (0..3)
            .map(|d| Tap {
                gain: Complex::new(0.6 / (d as f64 + 1.0), 0.2),
                delay: d,
            })
            .collect();
        assert_eq!(probe_environment(&cfg, &p, &taps, 0.0, &mut rng).unwrap().ell_dmax, 2);
        let flat = [Tap { gain: Complex::new(1.0, 0.0), delay: 0 }];
        assert_eq!(probe_environment(&cfg, &p, &flat, 0.0, &mut rng).unwrap().ell_dmax, 0);
        let r = probe_environment(&cfg, &p, &taps, 0.01, &mut rng).unwrap();
        assert_eq!(r.ell_dmax, 2);
        assert!(r.confidence > 0.99);
        let silent = [Tap { gain: Complex::new(0.0, 0.0), delay: 0 }];
        assert!(matches!(
            probe_environment(&cfg, &p, &silent, 1.0, &mut rng),
            Err(Error::NoPathDetected)
        ));
    }
}
