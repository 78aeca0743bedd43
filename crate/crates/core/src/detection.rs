//! Affine-domain energy detection of backscatter bits and coherent OFDM
//! reception.
//!
//! Noise convention: every affine bin carries `CN(0, sigma2)` noise, so an
//! energy statistic over `K` bins is `(sigma2 / 2) * chi2(2K, lambda)` with
//! `lambda = 2 * sum |S|^2 / sigma2`.

use num_complex::Complex;

use crate::block::{ComplexBlock, Domain};
use crate::channel::DelayPlan;
use crate::error::{Error, Result};
use crate::params::SystemConfig;
use crate::scalar::Real;
use crate::stats::{chi2_isf, noncentral_chi2_cdf};
use crate::waveform::{AffineTransform, Qam};

/// Received block after prefix removal, in the affine domain.
pub fn afdm_demodulate<T: Real>(y_no_cp: &ComplexBlock<T>, tr: &AffineTransform<T>) -> Result<ComplexBlock<T>> {
    tr.daft(y_no_cp)
}

/// Affine bins `(i + c1' (ell_total,z + f)) mod N`, `f = 0..L_f`, of device
/// `z`. Fails when the set meets another device's set.
pub fn bd_bin_set(z: usize, plan: &DelayPlan, cfg: &SystemConfig) -> Result<Vec<usize>> {
    if z >= plan.len() {
        return Err(Error::invalid("z", format!("device {z} not in a plan of {}", plan.len())));
    }
    let own = raw_bins(z, plan, cfg);
    for other in 0..plan.len() {
        if other != z && raw_bins(other, plan, cfg).iter().any(|b| own.contains(b)) {
            return Err(Error::OverlapDetected {
                a: z.min(other),
                b: z.max(other),
            });
        }
    }
    Ok(own)
}

/// Bin sets of every device in the plan, checked pairwise for overlap.
pub fn all_bin_sets(plan: &DelayPlan, cfg: &SystemConfig) -> Result<Vec<Vec<usize>>> {
    let sets: Vec<Vec<usize>> = (0..plan.len()).map(|z| raw_bins(z, plan, cfg)).collect();
    for a in 0..sets.len() {
        for b in a + 1..sets.len() {
            if sets[a].iter().any(|k| sets[b].contains(k)) {
                return Err(Error::OverlapDetected { a, b });
            }
        }
    }
    Ok(sets)
}

/// Affine bins hit by the direct path with `direct_taps` consecutive taps.
pub fn direct_bin_set(direct_taps: usize, cfg: &SystemConfig) -> Vec<usize> {
    (0..direct_taps).map(|d| affine_bin(cfg, d)).collect()
}

/// `(i + c1' * delay) mod N`.
pub fn affine_bin(cfg: &SystemConfig, delay: usize) -> usize {
    (cfg.pilot_index() + cfg.c1_prime() * delay) % cfg.n()
}

fn raw_bins(z: usize, plan: &DelayPlan, cfg: &SystemConfig) -> Vec<usize> {
    (0..plan.forward_taps)
        .map(|f| affine_bin(cfg, plan.total_delay(z) + f))
        .collect()
}

/// `sum_{k in bins} |Y[k]|^2`.
pub fn energy_statistic<T: Real>(y: &ComplexBlock<T>, bins: &[usize]) -> f64 {
    bins.iter().map(|&k| y.samples()[k].norm_sqr().as_f64()).sum()
}

/// Threshold for a target false-alarm rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorCalibration {
    pub sigma2: f64,
    pub k: usize,
    pub p_fa: f64,
    pub xi: f64,
}

/// `xi = (sigma2 / 2) * F^{-1}_{chi2(2K)}(1 - p_fa)`.
pub fn calibrate_threshold(sigma2: f64, k: usize, p_fa: f64) -> Result<DetectorCalibration> {
    if k == 0 {
        return Err(Error::DomainError("K must be at least 1".into()));
    }
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::DomainError(format!("sigma2 = {sigma2} must be non-negative")));
    }
    let xi = 0.5 * sigma2 * chi2_isf(p_fa, 2.0 * k as f64)?;
    Ok(DetectorCalibration { sigma2, k, p_fa, xi })
}

/// Non-centrality `2 * s_energy / sigma2` of a statistic whose deterministic
/// part has energy `s_energy`.
pub fn lambda_from_energy(s_energy: f64, sigma2: f64) -> f64 {
    2.0 * s_energy / sigma2
}

/// Missed-detection probability `F_{chi2(2K, lambda)}(F^{-1}_{chi2(2K)}(1 - p_fa))`.
pub fn analytical_pmd(lambda: f64, k: usize, p_fa: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::DomainError("K must be at least 1".into()));
    }
    let dof = 2.0 * k as f64;
    noncentral_chi2_cdf(chi2_isf(p_fa, dof)?, dof, lambda)
}

/// One device's detection outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct BdObservation {
    pub z: usize,
    pub bin_set: Vec<usize>,
    pub energy: f64,
    pub threshold: f64,
    pub decision: u8,
}

/// `b = 1` iff `E_z > xi`.
pub fn decide(energy: f64, xi: f64) -> u8 {
    u8::from(energy > xi)
}

/// Independent threshold test for every bin set.
pub fn detect_bits<T: Real>(y: &ComplexBlock<T>, bin_sets: &[Vec<usize>], cal: &DetectorCalibration) -> Vec<BdObservation> {
    bin_sets
        .iter()
        .enumerate()
        .map(|(z, bins)| {
            let energy = energy_statistic(y, bins);
            BdObservation {
                z,
                bin_set: bins.clone(),
                energy,
                threshold: cal.xi,
                decision: decide(energy, cal.xi),
            }
        })
        .collect()
}

/// How pilot-bin estimates are spread to the data bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// Straight line in the complex plane between neighbouring pilot bins
    /// (cyclic at the band edges).
    Linear,
    /// Transform-domain: the `M` comb samples are mapped to an `M`-tap
    /// impulse response and re-evaluated on every bin. Exact whenever the
    /// channel spread is below `M`.
    Dft,
}

/// Least-squares gains on `pilot_bins` interpolated to all `N` bins.
pub fn estimate_h_eff<T: Real>(
    y_freq: &ComplexBlock<T>,
    pilot_freq: &ComplexBlock<T>,
    pilot_bins: &[usize],
    mode: Interpolation,
) -> Result<Vec<Complex<T>>> {
    let n = y_freq.len();
    pilot_freq.expect_len(n)?;
    if pilot_bins.is_empty() {
        return Err(Error::EmptyInput);
    }
    let peak = pilot_bins
        .iter()
        .map(|&b| pilot_freq.samples()[b].norm_sqr().as_f64())
        .fold(0.0, f64::max);
    let mut ls = Vec::with_capacity(pilot_bins.len());
    for &b in pilot_bins {
        let p = pilot_freq.samples()[b];
        if !(p.norm_sqr().as_f64() > peak * 1e-20) || peak == 0.0 {
            return Err(Error::SingularPilot(b));
        }
        ls.push(y_freq.samples()[b] / p);
    }
    Ok(match mode {
        Interpolation::Linear => linear_interp(n, pilot_bins, &ls),
        Interpolation::Dft => dft_interp(n, pilot_bins, &ls)?,
    })
}

fn linear_interp<T: Real>(n: usize, bins: &[usize], ls: &[Complex<T>]) -> Vec<Complex<T>> {
    let p = bins.len();
    let mut out = vec![Complex::new(T::zero(), T::zero()); n];
    if p == 1 {
        out.iter_mut().for_each(|v| *v = ls[0]);
        return out;
    }
    for j in 0..p {
        let (b0, h0) = (bins[j], ls[j]);
        let (b1, h1) = if j + 1 < p { (bins[j + 1], ls[j + 1]) } else { (bins[0] + n, ls[0]) };
        let span = (b1 - b0) as f64;
        for k in b0..b1 {
            let t = T::of((k - b0) as f64 / span);
            out[k % n] = h0 + (h1 - h0) * t;
        }
    }
    // bins before the first pilot wrap from the last segment
    out
}

fn dft_interp<T: Real>(n: usize, bins: &[usize], ls: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    let m = bins.len();
    let step = n / m;
    if step * m != n || bins.iter().enumerate().any(|(q, &b)| b != bins[0] + q * step) {
        return Err(Error::invalid("pilot_bins", "transform interpolation needs a uniform comb"));
    }
    let r = bins[0];
    // g[l] = (1/M) sum_q H[r + step q] exp(+j2pi q l / M) = h[l] exp(-j2pi r l / N)
    let mut g: Vec<Complex<T>> = ls.to_vec();
    let dft = crate::waveform::Dft::<T>::new(m);
    dft.inverse_in_place(&mut g);
    let norm = T::of((m as f64).sqrt().recip());
    let taps: Vec<Complex<T>> = g
        .iter()
        .enumerate()
        .map(|(l, v)| v * norm * crate::waveform::cis::<T>(((r * l) % n) as f64 / n as f64))
        .collect();
    // H[k] = sum_l h[l] exp(-j2pi k l / N)
    let mut padded = vec![Complex::new(T::zero(), T::zero()); n];
    padded[..m].copy_from_slice(&taps);
    let big = crate::waveform::Dft::<T>::new(n);
    big.forward_in_place(&mut padded);
    let scale = T::of((n as f64).sqrt());
    Ok(padded.into_iter().map(|v| v * scale).collect())
}

/// Equalized data and the bit errors against a reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Equalized<T> {
    /// `Y[m] / (H[m] * a)` on each data bin, `a` the per-symbol amplitude.
    pub symbols: Vec<Complex<T>>,
    pub bits: Vec<u8>,
    pub bit_errors: usize,
    /// Data bins skipped because their gain vanished; their bits count as
    /// errors.
    pub erasures: usize,
}

/// Zero-forcing equalization and hard QAM demapping.
pub fn ofdm_equalize_demap<T: Real>(
    y_freq: &ComplexBlock<T>,
    h_eff: &[Complex<T>],
    data_bins: &[usize],
    data_amp: T,
    qam: &Qam,
    reference_bits: &[u8],
) -> Result<Equalized<T>> {
    if h_eff.len() != y_freq.len() {
        return Err(Error::DimensionMismatch {
            expected: y_freq.len(),
            actual: h_eff.len(),
        });
    }
    let bps = qam.bits_per_symbol();
    if reference_bits.len() != data_bins.len() * bps {
        return Err(Error::DimensionMismatch {
            expected: data_bins.len() * bps,
            actual: reference_bits.len(),
        });
    }
    let mut symbols = Vec::with_capacity(data_bins.len());
    let mut bits = Vec::with_capacity(reference_bits.len());
    let mut erasures = 0;
    for &b in data_bins {
        let h = h_eff[b] * data_amp;
        if !(h.norm_sqr().as_f64() > 1e-300) {
            erasures += 1;
            symbols.push(Complex::new(T::zero(), T::zero()));
            bits.extend(std::iter::repeat_n(2u8, bps));
            continue;
        }
        let s = y_freq.samples()[b] / h;
        symbols.push(s);
        qam.demap(s, &mut bits);
    }
    let bit_errors = bits.iter().zip(reference_bits).filter(|(a, b)| a != b).count();
    Ok(Equalized {
        symbols,
        bits,
        bit_errors,
        erasures,
    })
}

/// Frequency-domain view of a time block.
pub fn to_frequency<T: Real>(y_no_cp: &ComplexBlock<T>, dft: &crate::waveform::Dft<T>) -> Result<ComplexBlock<T>> {
    let f = dft.forward(y_no_cp)?;
    Ok(ComplexBlock::new(f.into_samples(), Domain::Frequency))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::plan_delays;
    use crate::waveform::{generate_pilot_time, Dft, Synthesizer};

    #[test]
    fn energy_arithmetic() {
        let y = ComplexBlock::new(vec![Complex::new(1.0, 1.0), Complex::new(2.0, 0.0)], Domain::Affine);
        assert_eq!(energy_statistic(&y, &[0, 1]), 6.0);
        assert_eq!(energy_statistic(&ComplexBlock::<f64>::zeros(4, Domain::Affine), &[0, 3]), 0.0);
    }

    #[test]
    fn threshold_closed_form_and_boundary() {
        let cal = calibrate_threshold(1.0, 1, 1e-3).unwrap();
        assert!((cal.xi - 1000f64.ln()).abs() < 1e-9);
        assert!((cal.xi - 6.9078).abs() < 1e-4);
        assert_eq!(decide(6.91, cal.xi), 1);
        assert_eq!(decide(cal.xi, cal.xi), 0);
        let loose = calibrate_threshold(1.0, 1, 1.0 - 1e-9).unwrap();
        assert!(loose.xi < 1e-8);
    }

    #[test]
    fn pmd_limits_and_monotonicity() {
        assert!((analytical_pmd(0.0, 1, 1e-3).unwrap() - 0.999).abs() < 1e-12);
        assert!(analytical_pmd(500.0, 1, 1e-3).unwrap() < 1e-12);
        let mut prev = 1.0;
        for k in 0..40 {
            let v = analytical_pmd(k as f64 * 1.5, 2, 1e-3).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn bin_sets_follow_delays() {
        let cfg = SystemConfig::table1();
        let plan = plan_delays(&cfg, 2, 2, 3, 3).unwrap();
        let sets = all_bin_sets(&plan, &cfg).unwrap();
        // totals 7, 11, 15 with forward taps 0 and 1
        assert_eq!(sets[0], vec![1 + 8 * 7, 1 + 8 * 8]);
        assert_eq!(sets[2], vec![1 + 8 * 15, 1 + 8 * 16]);
        assert_eq!(bd_bin_set(1, &plan, &cfg).unwrap(), sets[1]);
        let single = plan_delays(&cfg, 2, 1, 3, 1).unwrap();
        assert_eq!(bd_bin_set(0, &single, &cfg).unwrap().len(), 1);
    }

    #[test]
    fn overlapping_plan_is_reported() {
        let cfg = SystemConfig::table1();
        let mut plan = plan_delays(&cfg, 2, 2, 3, 2).unwrap();
        plan.delays[1] = plan.delays[0] + 1;
        assert!(matches!(bd_bin_set(0, &plan, &cfg), Err(Error::OverlapDetected { a: 0, b: 1 })));
    }

    #[test]
    fn demodulated_pilot_peaks_at_index() {
        let cfg = SystemConfig::table1();
        let tr = AffineTransform::<f64>::from_config(&cfg);
        let p: ComplexBlock<f64> = generate_pilot_time(&cfg);
        for ell in [0usize, 5] {
            let y = afdm_demodulate(&p.circular_delay(ell), &tr).unwrap();
            let arg = (0..256)
                .max_by(|&a, &b| y.samples()[a].norm().total_cmp(&y.samples()[b].norm()))
                .unwrap();
            assert_eq!(arg, (1 + 8 * ell) % 256);
        }
    }

    fn freq_response(taps: &[(Complex<f64>, usize)], n: usize) -> Vec<Complex<f64>> {
        (0..n)
            .map(|k| {
                taps.iter().fold(Complex::new(0.0, 0.0), |acc, &(h, d)| {
                    acc + h * Complex::from_polar(1.0, -2.0 * std::f64::consts::PI * (k * d) as f64 / n as f64)
                })
            })
            .collect()
    }

    fn received_freq(syn: &Synthesizer<f64>, taps: &[(Complex<f64>, usize)]) -> ComplexBlock<f64> {
        let mut y = ComplexBlock::<f64>::zeros(syn.n(), Domain::Time);
        for &(h, d) in taps {
            y = y.add(&syn.pilot_time().circular_delay(d).scale(h)).unwrap();
        }
        to_frequency(&y, syn.dft()).unwrap()
    }

    #[test]
    fn flat_channel_estimate_is_exact() {
        let cfg = SystemConfig::table1();
        let syn = Synthesizer::<f64>::new(&cfg).unwrap();
        let h0 = Complex::new(0.3, -0.8);
        let yf = received_freq(&syn, &[(h0, 0)]);
        for mode in [Interpolation::Linear, Interpolation::Dft] {
            let h = estimate_h_eff(&yf, syn.pilot_freq(), &syn.pilot_spec().afdm_bins, mode).unwrap();
            assert!(h.iter().all(|v| (v - h0).norm() < 1e-10));
        }
    }

    #[test]
    fn three_tap_interpolation_accuracy() {
        let cfg = SystemConfig::table1();
        let syn = Synthesizer::<f64>::new(&cfg).unwrap();
        let taps = [
            (Complex::new(0.7, 0.2), 0),
            (Complex::new(-0.3, 0.4), 1),
            (Complex::new(0.1, -0.25), 2),
        ];
        let truth = freq_response(&taps, 256);
        let yf = received_freq(&syn, &taps);
        let bins = &syn.pilot_spec().afdm_bins;
        let lin = estimate_h_eff(&yf, syn.pilot_freq(), bins, Interpolation::Linear).unwrap();
        let (first, last) = (bins[0], bins[bins.len() - 1]);
        let (mut err, mut pow) = (0.0, 0.0);
        for k in first..=last {
            err += (lin[k] - truth[k]).norm_sqr();
            pow += truth[k].norm_sqr();
        }
        assert!((err / pow).sqrt() < 0.02, "rms {}", (err / pow).sqrt());
        let dft = estimate_h_eff(&yf, syn.pilot_freq(), bins, Interpolation::Dft).unwrap();
        assert!(dft.iter().zip(&truth).all(|(a, b)| (a - b).norm() < 1e-10));
    }

    #[test]
    fn singular_pilot_is_reported() {
        let y = ComplexBlock::<f64>::zeros(8, Domain::Frequency);
        let mut p = ComplexBlock::<f64>::zeros(8, Domain::Frequency);
        p.samples_mut()[0] = Complex::new(1.0, 0.0);
        assert!(matches!(
            estimate_h_eff(&y, &p, &[0, 4], Interpolation::Linear),
            Err(Error::SingularPilot(4))
        ));
    }

    #[test]
    fn identity_channel_equalizes_exactly() {
        let cfg = SystemConfig::table1();
        let syn = Synthesizer::<f64>::new(&cfg).unwrap();
        let bits: Vec<u8> = (0..syn.bits_per_block()).map(|k| (k * 5 / 3 % 2) as u8).collect();
        let tx = syn.synthesize(bits.clone()).unwrap();
        let yf = to_frequency(&tx.time, &Dft::new(256)).unwrap();
        let h = vec![Complex::new(1.0, 0.0); 256];
        let eq = ofdm_equalize_demap(&yf, &h, syn.data_bins(), syn.data_amplitude(), syn.qam(), &bits).unwrap();
        assert_eq!(eq.bit_errors, 0);
        for (a, b) in eq.symbols.iter().zip(&tx.symbols) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
