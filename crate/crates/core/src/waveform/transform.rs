//! Unitary DFT and discrete affine Fourier transform (DAFT).
//!
//! Sign convention: the affine kernel carries a *down*-chirp in time,
//!
//! ```text
//! idaft:  s[n] = 1/sqrt(N) sum_m x[m] exp(j2pi(-c1 n^2 + n m / N + c2 m^2))
//! daft:   x[k] = 1/sqrt(N) sum_n s[n] exp(-j2pi(-c1 n^2 + n k / N + c2 k^2))
//! ```
//!
//! With this orientation an integer delay `l` of a block moves the energy of
//! affine index `i` to `(i + c1' l) mod N`, and dechirping a delayed pilot
//! yields a tone in DFT bin `c1' l`. Both transforms are computed as a phase
//! twist, an N-point FFT and a second phase twist.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::block::{ComplexBlock, Domain};
use crate::error::Result;
use crate::params::SystemConfig;
use crate::scalar::Real;

/// `exp(j 2 pi frac)` evaluated in f64.
pub(crate) fn cis<T: Real>(frac: f64) -> Complex<T> {
    let phase = 2.0 * std::f64::consts::PI * (frac - frac.floor());
    Complex::new(T::of(phase.cos()), T::of(phase.sin()))
}

/// Unitary N-point DFT pair (`1/sqrt(N)` on both directions).
#[derive(Clone)]
pub struct Dft<T: Real> {
    n: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    scale: T,
}

impl<T: Real> std::fmt::Debug for Dft<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dft").field("n", &self.n).finish()
    }
}

impl<T: Real> Dft<T> {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            scale: T::of((n as f64).sqrt().recip()),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward_in_place(&self, buf: &mut [Complex<T>]) {
        self.forward.process(buf);
        buf.iter_mut().for_each(|v| *v = *v * self.scale);
    }

    pub fn inverse_in_place(&self, buf: &mut [Complex<T>]) {
        self.inverse.process(buf);
        buf.iter_mut().for_each(|v| *v = *v * self.scale);
    }

    /// Time block to frequency block.
    pub fn forward(&self, block: &ComplexBlock<T>) -> Result<ComplexBlock<T>> {
        block.expect_len(self.n)?;
        let mut buf = block.samples().to_vec();
        self.forward_in_place(&mut buf);
        Ok(ComplexBlock::new(buf, Domain::Frequency))
    }

    /// Frequency block to time block.
    pub fn inverse(&self, block: &ComplexBlock<T>) -> Result<ComplexBlock<T>> {
        block.expect_len(self.n)?;
        let mut buf = block.samples().to_vec();
        self.inverse_in_place(&mut buf);
        Ok(ComplexBlock::new(buf, Domain::Time))
    }
}

/// Chirp parameter `c1`. Kept as the ratio `c1' / 2N` when it comes from a
/// configuration so the quadratic phase is reduced exactly in integers.
#[derive(Debug, Clone, Copy, PartialEq)]
enum ChirpRate {
    Grid { c1_prime: usize, n: usize },
    Free(f64),
}

impl ChirpRate {
    /// Fractional part of `c1 * n^2`.
    fn quad_phase(self, idx: usize) -> f64 {
        match self {
            ChirpRate::Grid { c1_prime, n } => {
                let modulus = 2 * n as u128;
                let r = (c1_prime as u128 * (idx as u128 * idx as u128)) % modulus;
                r as f64 / modulus as f64
            }
            ChirpRate::Free(c1) => {
                let x = c1 * (idx as f64) * (idx as f64);
                x - x.floor()
            }
        }
    }

    fn value(self) -> f64 {
        match self {
            ChirpRate::Grid { c1_prime, n } => c1_prime as f64 / (2.0 * n as f64),
            ChirpRate::Free(c1) => c1,
        }
    }
}

/// Fast DAFT/IDAFT pair for one `(N, c1, c2)`.
#[derive(Debug, Clone)]
pub struct AffineTransform<T: Real> {
    dft: Dft<T>,
    c1: ChirpRate,
    c2: f64,
    /// `exp(-j2pi c1 n^2)`
    time_twist: Vec<Complex<T>>,
    /// `exp(j2pi c2 m^2)`
    affine_twist: Vec<Complex<T>>,
}

impl<T: Real> AffineTransform<T> {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        Self::build(
            cfg.n(),
            ChirpRate::Grid {
                c1_prime: cfg.c1_prime(),
                n: cfg.n(),
            },
            cfg.c2(),
        )
    }

    /// Transform with an arbitrary (possibly off-grid) `c1`.
    pub fn with_params(n: usize, c1: f64, c2: f64) -> Self {
        Self::build(n, ChirpRate::Free(c1), c2)
    }

    fn build(n: usize, c1: ChirpRate, c2: f64) -> Self {
        let time_twist = (0..n).map(|k| cis(-c1.quad_phase(k))).collect();
        let affine_twist = (0..n).map(|m| cis(c2_phase(c2, m))).collect();
        Self {
            dft: Dft::new(n),
            c1,
            c2,
            time_twist,
            affine_twist,
        }
    }

    pub fn len(&self) -> usize {
        self.dft.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dft.is_empty()
    }

    pub fn c1(&self) -> f64 {
        self.c1.value()
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn dft(&self) -> &Dft<T> {
        &self.dft
    }

    /// `exp(-j2pi c1 n^2)` for `n` in `0..N`.
    pub fn time_twist(&self) -> &[Complex<T>] {
        &self.time_twist
    }

    /// `exp(j2pi c2 m^2)` for `m` in `0..N`.
    pub fn affine_twist(&self) -> &[Complex<T>] {
        &self.affine_twist
    }

    /// Affine domain to time domain.
    pub fn idaft(&self, affine: &ComplexBlock<T>) -> Result<ComplexBlock<T>> {
        affine.expect_len(self.len())?;
        let mut buf: Vec<Complex<T>> = affine
            .samples()
            .iter()
            .zip(&self.affine_twist)
            .map(|(x, t)| x * t)
            .collect();
        self.dft.inverse_in_place(&mut buf);
        buf.iter_mut()
            .zip(&self.time_twist)
            .for_each(|(s, t)| *s = *s * t);
        Ok(ComplexBlock::new(buf, Domain::Time))
    }

    /// Time domain to affine domain.
    pub fn daft(&self, time: &ComplexBlock<T>) -> Result<ComplexBlock<T>> {
        time.expect_len(self.len())?;
        Ok(ComplexBlock::new(self.daft_slice(time.samples()), Domain::Affine))
    }

    pub(crate) fn daft_slice(&self, time: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut buf: Vec<Complex<T>> = time
            .iter()
            .zip(&self.time_twist)
            .map(|(s, t)| s * t.conj())
            .collect();
        self.dft.forward_in_place(&mut buf);
        buf.iter_mut()
            .zip(&self.affine_twist)
            .for_each(|(x, t)| *x = *x * t.conj());
        buf
    }
}

/// Fractional part of `c2 m^2`.
pub(crate) fn c2_phase(c2: f64, m: usize) -> f64 {
    let x = c2 * (m as f64) * (m as f64);
    x - x.floor()
}

/// Fractional part of `c1 n^2` for a configuration (exact integer reduction).
#[cfg(test)]
pub(crate) fn c1_phase(cfg: &SystemConfig, idx: usize) -> f64 {
    ChirpRate::Grid {
        c1_prime: cfg.c1_prime(),
        n: cfg.n(),
    }
    .quad_phase(idx)
}
