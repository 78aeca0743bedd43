//! Unified OFDM + AFDM block synthesis.
//!
//! The AFDM pilot occupies one affine index `i`; in frequency its energy sits
//! on `M = N / c1'` bins spaced `c1'` apart. OFDM data fills the complementary
//! bins, so the two parts are orthogonal and their energies add.

mod qam;
mod transform;

pub use qam::Qam;
pub use transform::{AffineTransform, Dft};

pub(crate) use transform::cis;

use num_complex::Complex;

use crate::block::{ComplexBlock, Domain};
use crate::error::{Error, Result};
use crate::params::SystemConfig;
use crate::scalar::Real;

/// OFDM data symbols together with the subcarriers that carry them.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmGrid<T> {
    data_symbols: Vec<Complex<T>>,
    active_bins: Vec<usize>,
}

impl<T: Real> OfdmGrid<T> {
    /// `active_bins` must be strictly increasing and match `data_symbols` in
    /// length.
    pub fn new(data_symbols: Vec<Complex<T>>, active_bins: Vec<usize>) -> Result<Self> {
        if data_symbols.len() != active_bins.len() {
            return Err(Error::DimensionMismatch {
                expected: active_bins.len(),
                actual: data_symbols.len(),
            });
        }
        if active_bins.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("active_bins", "must be strictly increasing"));
        }
        Ok(Self {
            data_symbols,
            active_bins,
        })
    }

    /// Grid on the bins left free by `afdm_bins`, with all-zero symbols.
    pub fn empty(n: usize, afdm_bins: &[usize]) -> Self {
        let bins = complementary_bins(n, afdm_bins);
        Self {
            data_symbols: vec![Complex::new(T::zero(), T::zero()); bins.len()],
            active_bins: bins,
        }
    }

    pub fn data_symbols(&self) -> &[Complex<T>] {
        &self.data_symbols
    }

    pub fn active_bins(&self) -> &[usize] {
        &self.active_bins
    }

    /// Length-`n` frequency block with zeros on inactive bins.
    pub fn to_frequency(&self, n: usize) -> Result<ComplexBlock<T>> {
        let mut out = ComplexBlock::zeros(n, Domain::Frequency);
        for (&bin, &sym) in self.active_bins.iter().zip(&self.data_symbols) {
            if bin >= n {
                return Err(Error::invalid("active_bins", format!("bin {bin} outside 0..{n}")));
            }
            out.samples_mut()[bin] = sym;
        }
        Ok(out)
    }
}

/// Bins in `0..n` not contained in `occupied`, ascending.
pub fn complementary_bins(n: usize, occupied: &[usize]) -> Vec<usize> {
    let mut used = vec![false; n];
    for &b in occupied {
        if b < n {
            used[b] = true;
        }
    }
    (0..n).filter(|&b| !used[b]).collect()
}

/// Unitary IDFT of the grid.
pub fn ofdm_modulate<T: Real>(grid: &OfdmGrid<T>, dft: &Dft<T>) -> Result<ComplexBlock<T>> {
    dft.inverse(&grid.to_frequency(dft.len())?)
}

/// AFDM affine-domain to time-domain transform for `cfg`.
pub fn idaft<T: Real>(affine: &ComplexBlock<T>, cfg: &SystemConfig) -> Result<ComplexBlock<T>> {
    AffineTransform::from_config(cfg).idaft(affine)
}

/// Time-domain to AFDM affine-domain transform for `cfg`.
pub fn daft<T: Real>(time: &ComplexBlock<T>, cfg: &SystemConfig) -> Result<ComplexBlock<T>> {
    AffineTransform::from_config(cfg).daft(time)
}

/// Chirp pilot `sqrt(P) / sqrt(N) * exp(j2pi(-c1 n^2 + n i / N + c2 i^2))`,
/// i.e. the IDAFT of `sqrt(P)` placed on affine index `index`.
pub fn chirp_pilot<T: Real>(tr: &AffineTransform<T>, index: usize, energy: f64) -> ComplexBlock<T> {
    let n = tr.len();
    let amp = T::of((energy / n as f64).sqrt());
    let c2_term = transform::c2_phase(tr.c2(), index);
    let samples = tr
        .time_twist()
        .iter()
        .enumerate()
        .map(|(k, tw)| {
            let lin = ((k * index) % n) as f64 / n as f64;
            tw * cis::<T>(lin + c2_term) * amp
        })
        .collect();
    ComplexBlock::new(samples, Domain::Time)
}

/// Pilot for `cfg`; total block energy equals `P_pilot`.
pub fn generate_pilot_time<T: Real>(cfg: &SystemConfig) -> ComplexBlock<T> {
    chirp_pilot(&AffineTransform::from_config(cfg), cfg.pilot_index(), cfg.p_pilot())
}

/// Location and strength of the pilot in the frequency domain.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotSpec {
    pub index: usize,
    pub amplitude: f64,
    /// Ascending, spaced exactly `c1'` apart.
    pub afdm_bins: Vec<usize>,
}

/// DFT of the pilot and the `M` bins that carry its energy.
///
/// Fails with [`Error::SparsityViolation`] when fewer than `1 - tol` of the
/// energy lies on a single comb of `M` bins spaced `c1'` apart, where
/// `tol = max(1e-10, 100 eps_T)` (`1e-10` for `f64`).
pub fn pilot_to_frequency<T: Real>(
    pilot: &ComplexBlock<T>,
    cfg: &SystemConfig,
) -> Result<(PilotSpec, ComplexBlock<T>)> {
    let n = cfg.n();
    let m = cfg.m();
    let step = cfg.c1_prime();
    let freq = Dft::new(n).forward(pilot)?;
    let total: f64 = freq.energy().as_f64();
    if total <= 0.0 {
        return Err(Error::SparsityViolation { captured: 0.0 });
    }
    let power: Vec<f64> = freq.samples().iter().map(|v| v.norm_sqr().as_f64()).collect();
    // best comb offset
    let (offset, captured) = (0..step)
        .map(|r| (r, (r..n).step_by(step).map(|b| power[b]).sum::<f64>()))
        .fold((0, f64::MIN), |best, cur| if cur.1 > best.1 { cur } else { best });
    let captured = captured / total;
    let tol = 1e-10f64.max(100.0 * T::epsilon().as_f64());
    if captured < 1.0 - tol {
        return Err(Error::SparsityViolation { captured });
    }
    let afdm_bins: Vec<usize> = (offset..n).step_by(step).collect();
    debug_assert_eq!(afdm_bins.len(), m);
    Ok((
        PilotSpec {
            index: cfg.pilot_index(),
            amplitude: cfg.p_pilot().sqrt(),
            afdm_bins,
        },
        freq,
    ))
}

/// Elementwise superposition of the OFDM and pilot parts.
pub fn compose<T: Real>(s_ofdm: &ComplexBlock<T>, pilot: &ComplexBlock<T>) -> Result<ComplexBlock<T>> {
    Ok(ComplexBlock::new(s_ofdm.add(pilot)?.into_samples(), Domain::Time))
}

/// `|sum_m P[m] X[m]|` over the frequency grid.
pub fn verify_orthogonality<T: Real>(pilot_freq: &ComplexBlock<T>, ofdm_freq: &ComplexBlock<T>) -> Result<f64> {
    ofdm_freq.expect_len(pilot_freq.len())?;
    let acc = pilot_freq
        .samples()
        .iter()
        .zip(ofdm_freq.samples())
        .fold(Complex::new(0.0, 0.0), |acc, (p, x)| {
            acc + Complex::new(p.re.as_f64(), p.im.as_f64()) * Complex::new(x.re.as_f64(), x.im.as_f64())
        });
    Ok(acc.norm())
}

/// One transmitted block and the data it carries.
#[derive(Debug, Clone)]
pub struct TxBlock<T> {
    /// Composite time-domain block without cyclic prefix.
    pub time: ComplexBlock<T>,
    /// Unit-energy QAM symbols before power scaling, one per data bin.
    pub symbols: Vec<Complex<T>>,
    pub bits: Vec<u8>,
}

/// Everything needed to synthesize blocks for a fixed configuration.
#[derive(Debug, Clone)]
pub struct Synthesizer<T: Real> {
    affine: AffineTransform<T>,
    qam: Qam,
    pilot_time: ComplexBlock<T>,
    pilot_freq: ComplexBlock<T>,
    spec: PilotSpec,
    data_bins: Vec<usize>,
    data_amp: T,
}

impl<T: Real> Synthesizer<T> {
    pub fn new(cfg: &SystemConfig) -> Result<Self> {
        let affine = AffineTransform::from_config(cfg);
        let pilot_time = chirp_pilot(&affine, cfg.pilot_index(), cfg.p_pilot());
        let (spec, pilot_freq) = pilot_to_frequency(&pilot_time, cfg)?;
        let data_bins = complementary_bins(cfg.n(), &spec.afdm_bins);
        Ok(Self {
            affine,
            qam: Qam::new(cfg.mod_order())?,
            pilot_time,
            pilot_freq,
            spec,
            data_bins,
            data_amp: T::of(cfg.p_data().sqrt()),
        })
    }

    pub fn n(&self) -> usize {
        self.affine.len()
    }

    pub fn transform(&self) -> &AffineTransform<T> {
        &self.affine
    }

    pub fn dft(&self) -> &Dft<T> {
        self.affine.dft()
    }

    pub fn qam(&self) -> &Qam {
        &self.qam
    }

    pub fn pilot_time(&self) -> &ComplexBlock<T> {
        &self.pilot_time
    }

    pub fn pilot_freq(&self) -> &ComplexBlock<T> {
        &self.pilot_freq
    }

    pub fn pilot_spec(&self) -> &PilotSpec {
        &self.spec
    }

    pub fn data_bins(&self) -> &[usize] {
        &self.data_bins
    }

    /// Per-symbol amplitude applied to the unit-energy constellation.
    pub fn data_amplitude(&self) -> T {
        self.data_amp
    }

    pub fn bits_per_block(&self) -> usize {
        self.data_bins.len() * self.qam.bits_per_symbol()
    }

    /// Builds a block carrying `bits` (length [`Self::bits_per_block`]).
    pub fn synthesize(&self, bits: Vec<u8>) -> Result<TxBlock<T>> {
        if bits.len() != self.bits_per_block() {
            return Err(Error::DimensionMismatch {
                expected: self.bits_per_block(),
                actual: bits.len(),
            });
        }
        let symbols: Vec<Complex<T>> = self.qam.map_all(&bits);
        let scaled = symbols.iter().map(|s| s * self.data_amp).collect();
        let grid = OfdmGrid::new(scaled, self.data_bins.clone())?;
        let ofdm = ofdm_modulate(&grid, self.dft())?;
        let time = compose(&ofdm, &self.pilot_time)?;
        Ok(TxBlock { time, symbols, bits })
    }
}
