//! Tap-delay-line channels, backscatter delay-shift keying and delay planning.

use std::io::{BufRead, Write};

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::block::{ComplexBlock, Domain};
use crate::error::{Error, Result};
use crate::params::{db_to_lin, SystemConfig};
use crate::scalar::Real;

/// One channel tap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap<T> {
    pub gain: Complex<T>,
    pub delay: usize,
}

/// Direct, forward (BS to device) and backward (device to receiver) links.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization<T> {
    pub direct: Vec<Tap<T>>,
    /// One tap list per device.
    pub forward: Vec<Vec<Tap<T>>>,
    /// One tap per device.
    pub backward: Vec<Tap<T>>,
}

/// How the forward-link taps are scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardNormalization {
    /// Every realization has unit total power.
    PerRealization,
    /// Unit total power on average; individual realizations fade.
    Average,
}

/// Statistical description used by [`draw_channel`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    pub direct_taps: usize,
    pub forward_taps: usize,
    pub devices: usize,
    /// Exponential power-delay profile slope.
    pub decay_db_per_tap: f64,
    pub forward_normalization: ForwardNormalization,
}

impl ChannelModel {
    pub fn new(direct_taps: usize, forward_taps: usize, devices: usize) -> Self {
        Self {
            direct_taps,
            forward_taps,
            devices,
            decay_db_per_tap: 3.0,
            forward_normalization: ForwardNormalization::Average,
        }
    }

    fn profile(&self, taps: usize) -> Vec<f64> {
        let p: Vec<f64> = (0..taps)
            .map(|k| db_to_lin(-self.decay_db_per_tap * k as f64))
            .collect();
        let total: f64 = p.iter().sum();
        p.into_iter().map(|v| v / total).collect()
    }
}

/// Circularly-symmetric complex Gaussian sample with `E|x|^2 = var`.
pub fn complex_gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex<T> {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(T::of(re * s), T::of(im * s))
}

fn rayleigh_link<T: Real, R: Rng + ?Sized>(rng: &mut R, profile: &[f64], renormalize: bool) -> Vec<Tap<T>> {
    let mut taps: Vec<Tap<T>> = profile
        .iter()
        .enumerate()
        .map(|(delay, &p)| Tap {
            gain: complex_gaussian(rng, p),
            delay,
        })
        .collect();
    if renormalize {
        let power: f64 = taps.iter().map(|t| t.gain.norm_sqr().as_f64()).sum();
        let s = T::of(power.sqrt().recip());
        taps.iter_mut().for_each(|t| t.gain = t.gain * s);
    }
    taps
}

/// Draws Rayleigh taps at consecutive delays `0..D` (direct) and `0..L_f`
/// (forward, per device) plus a unit-modulus random-phase backward tap.
///
/// The direct link is renormalized to unit power.
pub fn draw_channel<T: Real, R: Rng + ?Sized>(
    cfg: &SystemConfig,
    model: &ChannelModel,
    rng: &mut R,
) -> Result<ChannelRealization<T>> {
    if model.direct_taps == 0 {
        return Err(Error::invalid("direct_taps", "at least one tap"));
    }
    if model.forward_taps == 0 {
        return Err(Error::invalid("forward_taps", "at least one tap"));
    }
    if model.direct_taps > cfg.cp_len() {
        return Err(Error::InvalidSpread {
            delay: model.direct_taps - 1,
            cp_len: cfg.cp_len(),
        });
    }
    let direct = rayleigh_link(rng, &model.profile(model.direct_taps), true);
    let fwd_profile = model.profile(model.forward_taps);
    let per_real = model.forward_normalization == ForwardNormalization::PerRealization;
    let mut forward = Vec::with_capacity(model.devices);
    let mut backward = Vec::with_capacity(model.devices);
    for _ in 0..model.devices {
        forward.push(rayleigh_link(rng, &fwd_profile, per_real));
        let phase: f64 = rng.random();
        backward.push(Tap {
            gain: crate::waveform::cis(phase),
            delay: 0,
        });
    }
    Ok(ChannelRealization {
        direct,
        forward,
        backward,
    })
}

impl<T: Real> ChannelRealization<T> {
    /// Single unit tap on every link.
    pub fn identity(devices: usize) -> Self {
        let unit = Tap {
            gain: Complex::new(T::one(), T::zero()),
            delay: 0,
        };
        Self {
            direct: vec![unit],
            forward: vec![vec![unit]; devices],
            backward: vec![unit; devices],
        }
    }

    pub fn ell_dmax(&self) -> usize {
        max_delay(&self.direct)
    }

    pub fn ell_fmax(&self) -> usize {
        self.forward.iter().map(|f| max_delay(f)).max().unwrap_or(0)
    }

    /// Writes `link,tap,delay,re,im` rows; links are `direct`, `forward<z>`,
    /// `backward<z>`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "link,tap,delay,re,im")?;
        let mut row = |link: &str, taps: &[Tap<T>]| -> Result<()> {
            for (k, t) in taps.iter().enumerate() {
                writeln!(out, "{link},{k},{},{:e},{:e}", t.delay, t.gain.re.as_f64(), t.gain.im.as_f64())?;
            }
            Ok(())
        };
        row("direct", &self.direct)?;
        for (z, f) in self.forward.iter().enumerate() {
            row(&format!("forward{z}"), f)?;
        }
        for (z, b) in self.backward.iter().enumerate() {
            row(&format!("backward{z}"), std::slice::from_ref(b))?;
        }
        Ok(())
    }

    /// Inverse of [`Self::write_csv`].
    pub fn read_csv<B: BufRead>(input: B) -> Result<Self> {
        let mut chan = ChannelRealization {
            direct: Vec::new(),
            forward: Vec::new(),
            backward: Vec::new(),
        };
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            if lineno == 0 || line.trim().is_empty() {
                continue;
            }
            let bad = || Error::invalid("channel csv", format!("malformed line {}", lineno + 1));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad());
            }
            let delay: usize = f[2].parse().map_err(|_| bad())?;
            let re: f64 = f[3].parse().map_err(|_| bad())?;
            let im: f64 = f[4].parse().map_err(|_| bad())?;
            let tap = Tap {
                gain: Complex::new(T::of(re), T::of(im)),
                delay,
            };
            let link = f[0];
            if link == "direct" {
                chan.direct.push(tap);
            } else if let Some(z) = link.strip_prefix("forward") {
                let z: usize = z.parse().map_err(|_| bad())?;
                if chan.forward.len() <= z {
                    chan.forward.resize(z + 1, Vec::new());
                }
                chan.forward[z].push(tap);
            } else if let Some(z) = link.strip_prefix("backward") {
                let z: usize = z.parse().map_err(|_| bad())?;
                if z != chan.backward.len() {
                    return Err(bad());
                }
                chan.backward.push(tap);
            } else {
                return Err(bad());
            }
        }
        Ok(chan)
    }
}

fn max_delay<T>(taps: &[Tap<T>]) -> usize {
    taps.iter().map(|t| t.delay).max().unwrap_or(0)
}

/// Per-device intentional delays.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayPlan {
    /// `ell_BD,z` for `z = 1..=Z`.
    pub delays: Vec<usize>,
    pub delta_min: usize,
    pub z_max: usize,
    pub ell_dmax: usize,
    /// Protocol guard added at every device, equal to the largest forward
    /// tap delay `L_f - 1`.
    pub ell_fmax: usize,
    pub forward_taps: usize,
    pub direct_taps: usize,
}

impl DelayPlan {
    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    /// `ell_fmax + ell_BD,z`, the offset at which device `z`'s first forward
    /// tap lands.
    pub fn total_delay(&self, z: usize) -> usize {
        self.ell_fmax + self.delays[z]
    }

    /// Largest delay of any path through device `z`.
    pub fn path_delay_end(&self, z: usize) -> usize {
        self.total_delay(z) + self.forward_taps - 1
    }

    /// Same plan with only the first `z` devices.
    pub fn truncated(&self, z: usize) -> Self {
        let mut p = self.clone();
        p.delays.truncate(z);
        p
    }

    /// Number of leading devices whose affine clusters (modulo the `M`
    /// distinct chirp offsets) neither wrap onto the direct-path cluster nor
    /// onto an earlier device.
    pub fn alias_free_len(&self, cfg: &SystemConfig) -> usize {
        let m = cfg.m();
        let mut used = vec![false; m];
        used[..self.direct_taps.min(m)].fill(true);
        for z in 0..self.len() {
            let offs: Vec<usize> = (0..self.forward_taps)
                .map(|f| (self.total_delay(z) + f) % m)
                .collect();
            if offs.iter().any(|&o| used[o]) {
                return z;
            }
            offs.into_iter().for_each(|o| used[o] = true);
        }
        self.len()
    }
}

/// `Delta_min = delta_tau + L_f + 1`.
pub fn delta_min(cfg: &SystemConfig, forward_taps: usize) -> usize {
    cfg.delta_tau() + forward_taps + 1
}

/// Capacity bound: the smaller of the cyclic-prefix budget and the number of
/// usable chirp offsets.
///
/// The prefix term reserves room for the guard and forward spread so that
/// every planned path ends strictly inside the prefix.
pub fn z_max(cfg: &SystemConfig, ell_dmax: usize, forward_taps: usize, direct_taps: usize) -> usize {
    let delta = delta_min(cfg, forward_taps);
    let ell_fmax = forward_taps.saturating_sub(1);
    let cp_room = cfg.cp_len() as i64 - ell_dmax as i64 - 1 - 2 * ell_fmax as i64;
    let by_cp = if cp_room < 0 { 0 } else { cp_room as usize / delta };
    let bins = cfg.m() as i64 - direct_taps as i64 + 1;
    let by_bins = if bins < 0 { 0 } else { bins as usize / (forward_taps + 1) };
    by_cp.min(by_bins)
}

/// Assigns `ell_BD,z = ell_dmax + z * Delta_min` for `z = 1..=Z`.
///
/// Fails with [`Error::CapacityExceeded`] when `Z > z_max`; use
/// [`plan_delays_truncating`] to clip instead.
pub fn plan_delays(
    cfg: &SystemConfig,
    ell_dmax: usize,
    forward_taps: usize,
    direct_taps: usize,
    z_requested: usize,
) -> Result<DelayPlan> {
    let plan = plan_delays_truncating(cfg, ell_dmax, forward_taps, direct_taps, z_requested)?;
    if z_requested > plan.z_max {
        return Err(Error::CapacityExceeded {
            requested: z_requested,
            z_max: plan.z_max,
        });
    }
    Ok(plan)
}

/// As [`plan_delays`] but silently keeps only `min(Z, z_max)` devices.
pub fn plan_delays_truncating(
    cfg: &SystemConfig,
    ell_dmax: usize,
    forward_taps: usize,
    direct_taps: usize,
    z_requested: usize,
) -> Result<DelayPlan> {
    if ell_dmax >= cfg.cp_len() {
        return Err(Error::InvalidSpread {
            delay: ell_dmax,
            cp_len: cfg.cp_len(),
        });
    }
    if forward_taps == 0 || direct_taps == 0 {
        return Err(Error::invalid("taps", "links need at least one tap"));
    }
    let delta = delta_min(cfg, forward_taps);
    let zm = z_max(cfg, ell_dmax, forward_taps, direct_taps);
    let z = z_requested.min(zm);
    Ok(DelayPlan {
        delays: (1..=z).map(|k| ell_dmax + k * delta).collect(),
        delta_min: delta,
        z_max: zm,
        ell_dmax,
        ell_fmax: forward_taps - 1,
        forward_taps,
        direct_taps,
    })
}

/// Independent check of a plan against spacing, capacity and prefix rules.
pub fn validate_plan(plan: &DelayPlan, cfg: &SystemConfig) -> Result<()> {
    let fail = |why: String| Err(Error::invalid("delay plan", why));
    let need = cfg.delta_tau() + plan.forward_taps + 1;
    if plan.delta_min != need {
        return fail(format!("spacing {} differs from {need}", plan.delta_min));
    }
    let mut sorted = plan.delays.clone();
    sorted.sort_unstable();
    for w in sorted.windows(2) {
        if w[1] - w[0] < need {
            return fail(format!("delays {} and {} closer than {need}", w[0], w[1]));
        }
    }
    let bins_cap = (cfg.m() + 1).saturating_sub(plan.direct_taps) / (plan.forward_taps + 1);
    if plan.len() > bins_cap {
        return fail(format!("{} devices exceed the affine capacity {bins_cap}", plan.len()));
    }
    for (z, &d) in plan.delays.iter().enumerate() {
        if d <= plan.ell_dmax {
            return fail(format!("device {z} delay {d} inside the direct spread"));
        }
        let end = plan.ell_fmax + d + plan.forward_taps - 1;
        if end >= cfg.cp_len() {
            return Err(Error::CpOverflow {
                delay: end,
                cp_len: cfg.cp_len(),
            });
        }
    }
    Ok(())
}

/// A backscatter device.
#[derive(Debug, Clone, PartialEq)]
pub struct BdDevice {
    pub z: usize,
    pub ell_bd: usize,
    pub alpha: f64,
    /// Amplitude of the cascaded path loss applied to the reflection.
    pub link_gain: f64,
}

impl BdDevice {
    /// Devices for every delay in `plan`, sharing `alpha` and the path loss
    /// `beta_db` (power).
    pub fn from_plan(plan: &DelayPlan, alpha: f64, beta_db: f64) -> Vec<Self> {
        let link_gain = db_to_lin(beta_db).sqrt();
        plan.delays
            .iter()
            .enumerate()
            .map(|(z, &ell_bd)| BdDevice {
                z,
                ell_bd,
                alpha,
                link_gain,
            })
            .collect()
    }
}

/// Adds `gain * x[n - delay]` into `acc` (samples before the block are zero).
fn accumulate_delayed<T: Real>(acc: &mut [Complex<T>], x: &[Complex<T>], gain: Complex<T>, delay: usize) {
    for (a, v) in acc.iter_mut().skip(delay).zip(x) {
        *a = *a + v * gain;
    }
}

/// Device output: zero for `bit = 0`, otherwise the forward-filtered block
/// delayed by `ell_fmax + ell_BD` and scaled by `alpha * link_gain`.
pub fn bd_reflect<T: Real>(
    s_with_cp: &ComplexBlock<T>,
    dev: &BdDevice,
    forward: &[Tap<T>],
    ell_fmax: usize,
    cp_len: usize,
    bit: u8,
) -> Result<ComplexBlock<T>> {
    let end = ell_fmax + dev.ell_bd + max_delay(forward);
    if end >= cp_len {
        return Err(Error::CpOverflow { delay: end, cp_len });
    }
    let mut out = ComplexBlock::zeros(s_with_cp.len(), Domain::Time);
    if bit == 0 || dev.alpha == 0.0 {
        return Ok(out);
    }
    let scale = T::of(dev.alpha * dev.link_gain);
    for tap in forward {
        accumulate_delayed(
            out.samples_mut(),
            s_with_cp.samples(),
            tap.gain * scale,
            ell_fmax + dev.ell_bd + tap.delay,
        );
    }
    Ok(out)
}

/// Received block (still carrying its prefix): direct multipath, every
/// reflecting device through its backward tap, and `CN(0, sigma2)` noise.
#[allow(clippy::too_many_arguments)]
pub fn propagate<T: Real, R: Rng + ?Sized>(
    s_with_cp: &ComplexBlock<T>,
    bds: &[BdDevice],
    chan: &ChannelRealization<T>,
    ell_fmax: usize,
    cp_len: usize,
    bits: &[u8],
    sigma2: f64,
    rng: &mut R,
) -> Result<ComplexBlock<T>> {
    if bits.len() != bds.len() {
        return Err(Error::DimensionMismatch {
            expected: bds.len(),
            actual: bits.len(),
        });
    }
    if chan.forward.len() < bds.len() || chan.backward.len() < bds.len() {
        return Err(Error::DimensionMismatch {
            expected: bds.len(),
            actual: chan.forward.len().min(chan.backward.len()),
        });
    }
    let mut y = vec![Complex::new(T::zero(), T::zero()); s_with_cp.len()];
    for tap in &chan.direct {
        accumulate_delayed(&mut y, s_with_cp.samples(), tap.gain, tap.delay);
    }
    for (dev, &bit) in bds.iter().zip(bits) {
        let back = chan.backward[dev.z];
        if back.delay + ell_fmax + dev.ell_bd + max_delay(&chan.forward[dev.z]) >= cp_len {
            return Err(Error::CpOverflow {
                delay: back.delay + ell_fmax + dev.ell_bd + max_delay(&chan.forward[dev.z]),
                cp_len,
            });
        }
        if bit == 0 {
            continue;
        }
        let x = bd_reflect(s_with_cp, dev, &chan.forward[dev.z], ell_fmax, cp_len, bit)?;
        accumulate_delayed(&mut y, x.samples(), back.gain, back.delay);
    }
    let mut y = ComplexBlock::new(y, Domain::Time);
    add_noise(&mut y, sigma2, rng);
    Ok(y)
}

/// Adds i.i.d. `CN(0, sigma2)` samples in place.
pub fn add_noise<T: Real, R: Rng + ?Sized>(block: &mut ComplexBlock<T>, sigma2: f64, rng: &mut R) {
    if sigma2 <= 0.0 {
        return;
    }
    for v in block.samples_mut() {
        *v = *v + complex_gaussian::<T, R>(rng, sigma2);
    }
}
