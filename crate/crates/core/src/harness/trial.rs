//! One Monte-Carlo trial of the full transmit/receive chain.

use std::time::{Duration, Instant};

use num_complex::Complex;
use rand::Rng;

use crate::block::{ComplexBlock, Domain};
use crate::channel::{add_noise, draw_channel, plan_delays_truncating, propagate, BdDevice, ChannelModel, DelayPlan};
use crate::detection::{
    afdm_demodulate, all_bin_sets, analytical_pmd, calibrate_threshold, detect_bits, estimate_h_eff,
    lambda_from_energy, ofdm_equalize_demap, to_frequency, DetectorCalibration,
};
use crate::error::Result;
use crate::params::{db_to_lin, SystemConfig};
use crate::sensing::{dechirp, estimate_delays_with};
use crate::waveform::Synthesizer;

use super::point::TrialStreams;
use super::scenario::Scenario;

/// Everything shared by the trials of one operating point.
#[derive(Debug, Clone)]
pub struct PointContext {
    pub cfg: SystemConfig,
    pub scenario: Scenario,
    pub syn: Synthesizer<f64>,
    pub model: ChannelModel,
    pub plan: DelayPlan,
    pub devices: Vec<BdDevice>,
    pub bin_sets: Vec<Vec<usize>>,
    pub cal: DetectorCalibration,
    /// Linear backscatter path loss (power).
    pub beta: f64,
}

impl PointContext {
    /// Resolves the scenario against `cfg` and plans the device delays.
    ///
    /// Devices are scheduled up to the capacity bound and further limited to
    /// those whose affine clusters do not wrap onto the direct path or onto
    /// one another.
    pub fn new(cfg: &SystemConfig, scenario: &Scenario) -> Result<Self> {
        let cfg = scenario.resolve(cfg)?;
        let syn = Synthesizer::new(&cfg)?;
        let ell_dmax = scenario.direct_taps.saturating_sub(1);
        let full = plan_delays_truncating(&cfg, ell_dmax, scenario.forward_taps, scenario.direct_taps, scenario.devices)?;
        let plan = full.truncated(full.alias_free_len(&cfg));
        let devices = BdDevice::from_plan(&plan, cfg.alpha(), scenario.beta_db);
        let bin_sets = all_bin_sets(&plan, &cfg)?;
        let cal = calibrate_threshold(cfg.noise_var(), scenario.forward_taps, cfg.p_fa_target())?;
        let mut model = scenario.channel_model();
        model.devices = plan.len();
        Ok(Self {
            beta: db_to_lin(scenario.beta_db),
            cfg,
            scenario: scenario.clone(),
            syn,
            model,
            plan,
            devices,
            bin_sets,
            cal,
        })
    }

    pub fn z(&self) -> usize {
        self.plan.len()
    }

    /// Delay (samples) of device `z`'s first echo.
    pub fn echo_delay(&self, z: usize) -> usize {
        self.plan.total_delay(z)
    }
}

/// Per-trial observations.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    pub bd_bits: Vec<u8>,
    pub decisions: Vec<u8>,
    pub energies: Vec<f64>,
    /// Energy of the deterministic part of each device's statistic.
    pub s_energy: Vec<f64>,
    /// Non-centrality `2 s_energy / sigma2`.
    pub lambdas: Vec<f64>,
    pub xi: f64,
    /// Analytical missed-detection probability at this realization (empty
    /// when disabled).
    pub pmd_analytic: Vec<f64>,
    pub bit_errors: usize,
    pub bits: usize,
    /// Mean over data bins of `log2(1 + |H_k|^2 a^2 / sigma2)` using the
    /// estimated channel.
    pub spectral_efficiency: f64,
    /// Delays in seconds, sorted.
    pub tau_true: Vec<f64>,
    pub tau_hat: Vec<f64>,
    pub elapsed: Duration,
}

fn random_bits<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random::<bool>() as u8).collect()
}

/// Runs one trial.
pub fn run_trial(ctx: &PointContext, trial: u64, rng: &mut TrialStreams) -> Result<TrialRecord> {
    let start = Instant::now();
    let cfg = &ctx.cfg;
    let n = cfg.n();
    let cp = cfg.cp_len();
    let sigma2 = cfg.noise_var();
    let z = ctx.z();

    let chan = draw_channel::<f64, _>(cfg, &ctx.model, &mut rng.channel)?;
    let data_bits = random_bits(&mut rng.data, ctx.syn.bits_per_block());
    let bd_bits = random_bits(&mut rng.devices, z);
    let tx = ctx.syn.synthesize(data_bits)?;
    let tx_cp = tx.time.with_cyclic_prefix(cp)?;

    let y = propagate(&tx_cp, &ctx.devices, &chan, ctx.plan.ell_fmax, cp, &bd_bits, sigma2, &mut rng.noise)?;
    let y = y.strip_cyclic_prefix(cp, n)?;

    // backscatter detection
    let y_aff = afdm_demodulate(&y, ctx.syn.transform())?;
    let obs = detect_bits(&y_aff, &ctx.bin_sets, &ctx.cal);
    let amp2 = cfg.alpha() * cfg.alpha() * ctx.beta * cfg.p_pilot();
    let s_energy: Vec<f64> = (0..z)
        .map(|k| {
            let fwd: f64 = chan.forward[k].iter().map(|t| t.gain.norm_sqr()).sum();
            amp2 * fwd * chan.backward[k].gain.norm_sqr()
        })
        .collect();
    let lambdas: Vec<f64> = s_energy.iter().map(|&s| lambda_from_energy(s, sigma2)).collect();
    let pmd_analytic = if ctx.scenario.analytic {
        lambdas
            .iter()
            .map(|&l| analytical_pmd(l, ctx.cal.k, ctx.cal.p_fa))
            .collect::<Result<Vec<f64>>>()?
    } else {
        Vec::new()
    };

    // primary link
    let (mut bit_errors, mut bits, mut spectral_efficiency) = (0, 0, 0.0);
    if ctx.scenario.ofdm {
        let yf = to_frequency(&y, ctx.syn.dft())?;
        let h = estimate_h_eff(&yf, ctx.syn.pilot_freq(), &ctx.syn.pilot_spec().afdm_bins, ctx.scenario.interpolation)?;
        let eq = ofdm_equalize_demap(&yf, &h, ctx.syn.data_bins(), ctx.syn.data_amplitude(), ctx.syn.qam(), &tx.bits)?;
        bit_errors = eq.bit_errors;
        bits = tx.bits.len();
        let snr = ctx.syn.data_amplitude().powi(2) / ctx.cfg.noise_var();
        let bins = ctx.syn.data_bins();
        spectral_efficiency =
            bins.iter().map(|&k| (1.0 + h[k].norm_sqr() * snr).log2()).sum::<f64>() / bins.len() as f64;
    }

    // ranging: every device reflects the composite block
    let (mut tau_true, mut tau_hat) = (Vec::new(), Vec::new());
    if ctx.scenario.sensing && z > 0 {
        let alpha = Complex::new(cfg.alpha(), 0.0);
        let mut ys = ComplexBlock::<f64>::zeros(n, Domain::Time);
        for k in 0..z {
            ys = ys.add(&tx.time.circular_delay(ctx.echo_delay(k)).scale(alpha))?;
        }
        add_noise(&mut ys, sigma2, &mut rng.sensing);
        let d = dechirp(&ys, ctx.syn.pilot_time())?;
        let est = estimate_delays_with(&d, cfg, ctx.syn.dft(), z)?;
        let fs = cfg.sample_rate_hz();
        let mut truth: Vec<f64> = (0..z).map(|k| ctx.echo_delay(k) as f64 / fs).collect();
        truth.sort_by(f64::total_cmp);
        tau_true = truth;
        tau_hat = est.iter().map(|e| e.tau_s).collect();
    }

    Ok(TrialRecord {
        trial,
        decisions: obs.iter().map(|o| o.decision).collect(),
        energies: obs.iter().map(|o| o.energy).collect(),
        bd_bits,
        s_energy,
        lambdas,
        xi: ctx.cal.xi,
        pmd_analytic,
        bit_errors,
        bits,
        spectral_efficiency,
        tau_true,
        tau_hat,
        elapsed: start.elapsed(),
    })
}
