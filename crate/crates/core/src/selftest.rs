//! Fast invariant suite run by `isabc-sim selftest`.
//!
//! Every check is deterministic (fixed seeds) and finishes in well under a
//! second in release builds.

use std::f64::consts::PI;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{complex_gaussian, plan_delays};
use crate::detection::{calibrate_threshold, decide, energy_statistic};
use crate::harness::{binomial, Z99};
use crate::waveform::{pilot_to_frequency, verify_orthogonality, AffineTransform, Synthesizer};
use crate::{ComplexBlock, Domain, Result, SystemConfig};

/// Outcome of one invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn from(name: &'static str, outcome: Result<(bool, String)>) -> Self {
        match outcome {
            Ok((passed, detail)) => Self { name, passed, detail },
            Err(e) => Self {
                name,
                passed: false,
                detail: format!("error: {e}"),
            },
        }
    }
}

fn random_block(n: usize, rng: &mut ChaCha8Rng, domain: Domain) -> ComplexBlock<f64> {
    ComplexBlock::new((0..n).map(|_| complex_gaussian(rng, 1.0)).collect(), domain)
}

fn max_abs_diff(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Reference `s[t] = N^-1/2 sum_m x[m] exp(j2pi(-c1 t^2 + t m / N + c2 m^2))`.
fn idaft_direct(x: &[Complex<f64>], c1: f64, c2: f64) -> Vec<Complex<f64>> {
    let n = x.len();
    (0..n)
        .map(|t| {
            let acc: Complex<f64> = x
                .iter()
                .enumerate()
                .map(|(m, xm)| {
                    let frac = -c1 * (t * t) as f64 + (t * m) as f64 / n as f64 + c2 * (m * m) as f64;
                    xm * Complex::from_polar(1.0, 2.0 * PI * frac)
                })
                .sum();
            acc / (n as f64).sqrt()
        })
        .collect()
}

fn transform_round_trip(cfg: &SystemConfig) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let tr = AffineTransform::<f64>::from_config(cfg);
    let x = random_block(cfg.n(), &mut rng, Domain::Affine);
    let back = tr.daft(&tr.idaft(&x)?)?;
    let err = max_abs_diff(back.samples(), x.samples());
    Ok((err < 1e-10, format!("max |daft(idaft(x)) - x| = {err:.2e}")))
}

fn transform_direct_kernel() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for n in [8usize, 16, 32, 64] {
        let c1 = 2.0 / (2.0 * n as f64);
        let c2 = 1.0 / (2.0 * (n * n) as f64);
        let tr = AffineTransform::<f64>::with_params(n, c1, c2);
        let x = random_block(n, &mut rng, Domain::Affine);
        let fast = tr.idaft(&x)?;
        worst = worst.max(max_abs_diff(fast.samples(), &idaft_direct(x.samples(), c1, c2)));
    }
    Ok((worst < 1e-9, format!("max fast-vs-direct error {worst:.2e} for N <= 64")))
}

fn pilot_comb(cfg: &SystemConfig) -> Result<(bool, String)> {
    let syn = Synthesizer::<f64>::new(cfg)?;
    let (spec, freq) = pilot_to_frequency(syn.pilot_time(), cfg)?;
    let total = freq.energy();
    let peak = freq.samples().iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    let nonzero: Vec<usize> = (0..cfg.n())
        .filter(|&k| freq.samples()[k].norm_sqr() > 1e-12 * peak)
        .collect();
    let spaced = nonzero.windows(2).all(|w| w[1] - w[0] == cfg.c1_prime());
    let captured: f64 = spec.afdm_bins.iter().map(|&b| freq.samples()[b].norm_sqr()).sum::<f64>() / total;
    let ok = nonzero.len() == cfg.m() && spaced && nonzero == spec.afdm_bins && captured >= 1.0 - 1e-10;
    Ok((
        ok,
        format!("{} non-zero bins (M = {}), captured energy 1 - {:.1e}", nonzero.len(), cfg.m(), 1.0 - captured),
    ))
}

fn orthogonality(cfg: &SystemConfig) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let syn = Synthesizer::<f64>::new(cfg)?;
    let bits = (0..syn.bits_per_block()).map(|_| rand::Rng::random_range(&mut rng, 0..2u8)).collect();
    let tx = syn.synthesize(bits)?;
    let data_time = tx.time.add(&syn.pilot_time().scale(Complex::new(-1.0, 0.0)))?;
    let data_freq = syn.dft().forward(&data_time)?;
    let residual = verify_orthogonality(syn.pilot_freq(), &data_freq)?;
    let rel = residual / (syn.pilot_freq().energy() * data_freq.energy()).sqrt();
    Ok((rel < 1e-10, format!("relative pilot/data inner product {rel:.2e}")))
}

fn delay_shift(cfg: &SystemConfig) -> Result<(bool, String)> {
    let syn = Synthesizer::<f64>::new(cfg)?;
    let (n, cp, i, step) = (cfg.n(), cfg.cp_len(), cfg.pilot_index(), cfg.c1_prime());
    let with_cp = syn.pilot_time().with_cyclic_prefix(cp)?;
    let mut worst: f64 = 1.0;
    for ell in 0..cp {
        let mut delayed = ComplexBlock::<f64>::zeros(with_cp.len(), Domain::Time);
        for t in ell..with_cp.len() {
            delayed.samples_mut()[t] = with_cp.samples()[t - ell];
        }
        let y = syn.transform().daft(&delayed.strip_cyclic_prefix(cp, n)?)?;
        let target = (i + step * ell) % n;
        let frac = y.samples()[target].norm_sqr() / y.energy();
        worst = worst.min(frac);
    }
    Ok((worst >= 0.9999, format!("worst single-bin energy fraction {worst:.6} over delays 0..{cp}")))
}

fn capacity(cfg: &SystemConfig) -> Result<(bool, String)> {
    let plan = plan_delays(cfg, 2, 2, 3, 0)?;
    Ok((
        plan.delta_min == 4 && plan.z_max == 10,
        format!("delta_min = {}, z_max = {}", plan.delta_min, plan.z_max),
    ))
}

fn false_alarm(cfg: &SystemConfig, k: usize, observations: usize) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(4 + k as u64);
    let n = cfg.n();
    let sigma2 = cfg.noise_var();
    let cal = calibrate_threshold(sigma2, k, cfg.p_fa_target())?;
    let tr = AffineTransform::<f64>::from_config(cfg);
    let sets: Vec<Vec<usize>> = (0..n / k).map(|s| (s * k..(s + 1) * k).collect()).collect();
    let (mut hits, mut total) = (0u64, 0u64);
    while (total as usize) < observations {
        let noise = ComplexBlock::new((0..n).map(|_| complex_gaussian(&mut rng, sigma2)).collect(), Domain::Time);
        let y = tr.daft(&noise)?;
        for set in &sets {
            hits += u64::from(decide(energy_statistic(&y, set), cal.xi));
            total += 1;
        }
    }
    let (p, ci) = binomial(hits, total);
    let target = cfg.p_fa_target();
    let half = Z99 * (target * (1.0 - target) / total as f64).sqrt();
    Ok(((p - target).abs() <= half, format!("K = {k}: P_FA = {p:.3e} +/- {ci:.1e} over {total}")))
}

/// Runs every invariant on the reference configuration.
pub fn run() -> Vec<Check> {
    let cfg = SystemConfig::table1();
    vec![
        Check::from("transform round trip", transform_round_trip(&cfg)),
        Check::from("transform matches direct kernel", transform_direct_kernel()),
        Check::from("pilot frequency comb", pilot_comb(&cfg)),
        Check::from("pilot/data orthogonality", orthogonality(&cfg)),
        Check::from("delay-shift theorem", delay_shift(&cfg)),
        Check::from("capacity worked example", capacity(&cfg)),
        Check::from("false-alarm calibration", false_alarm(&cfg, 2, 200_000)),
    ]
}
