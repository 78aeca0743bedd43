//! Tagged sequences of complex baseband samples.

use std::io::Write;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Which domain the samples of a [`ComplexBlock`] live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Time,
    Frequency,
    Affine,
}

/// A finite block of complex samples together with its domain tag.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexBlock<T> {
    samples: Vec<Complex<T>>,
    domain: Domain,
}

impl<T: Real> ComplexBlock<T> {
    pub fn new(samples: Vec<Complex<T>>, domain: Domain) -> Self {
        Self { samples, domain }
    }

    pub fn zeros(len: usize, domain: Domain) -> Self {
        Self::new(vec![Complex::new(T::zero(), T::zero()); len], domain)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn samples(&self) -> &[Complex<T>] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex<T>> {
        self.samples
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> T {
        self.samples
            .iter()
            .fold(T::zero(), |acc, s| acc + s.norm_sqr())
    }

    pub fn expect_len(&self, expected: usize) -> Result<()> {
        if self.len() == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected,
                actual: self.len(),
            })
        }
    }

    /// Elementwise sum of two blocks of the same length. The result keeps
    /// the domain of `self`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        other.expect_len(self.len())?;
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self::new(samples, self.domain))
    }

    pub fn scale(&self, gain: Complex<T>) -> Self {
        Self::new(self.samples.iter().map(|s| s * gain).collect(), self.domain)
    }

    /// Circular delay by `shift` samples: `out[n] = in[(n - shift) mod len]`.
    pub fn circular_delay(&self, shift: usize) -> Self {
        let mut samples = self.samples.clone();
        if !samples.is_empty() {
            let len = samples.len();
            samples.rotate_right(shift % len);
        }
        Self::new(samples, self.domain)
    }

    /// Prepends a cyclic prefix made of the last `cp_len` samples.
    pub fn with_cyclic_prefix(&self, cp_len: usize) -> Result<Self> {
        if cp_len > self.len() {
            return Err(Error::invalid(
                "cp_len",
                format!("{cp_len} exceeds block length {}", self.len()),
            ));
        }
        let mut samples = Vec::with_capacity(self.len() + cp_len);
        samples.extend_from_slice(&self.samples[self.len() - cp_len..]);
        samples.extend_from_slice(&self.samples);
        Ok(Self::new(samples, self.domain))
    }

    /// Drops the first `cp_len` samples and keeps the next `n`.
    pub fn strip_cyclic_prefix(&self, cp_len: usize, n: usize) -> Result<Self> {
        if self.len() < cp_len + n {
            return Err(Error::DimensionMismatch {
                expected: cp_len + n,
                actual: self.len(),
            });
        }
        Ok(Self::new(
            self.samples[cp_len..cp_len + n].to_vec(),
            self.domain,
        ))
    }

    /// Writes `index,re,im` rows, one per sample.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,re,im")?;
        for (k, s) in self.samples.iter().enumerate() {
            writeln!(out, "{k},{:e},{:e}", s.re.as_f64(), s.im.as_f64())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn cyclic_prefix_copies_tail() {
        let b = ComplexBlock::new(vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)], Domain::Time);
        let with = b.with_cyclic_prefix(2).unwrap();
        let re: Vec<f64> = with.samples().iter().map(|s| s.re).collect();
        assert_eq!(re, vec![3.0, 4.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(with.strip_cyclic_prefix(2, 4).unwrap(), b);
    }

    #[test]
    fn circular_delay_wraps() {
        let b = ComplexBlock::new(vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)], Domain::Time);
        let d = b.circular_delay(1);
        assert_eq!(d.samples()[0], c(3.0, 0.0));
        assert_eq!(d.samples()[1], c(1.0, 0.0));
    }

    #[test]
    fn add_rejects_mismatched_lengths() {
        let a = ComplexBlock::<f64>::zeros(4, Domain::Time);
        let b = ComplexBlock::<f64>::zeros(5, Domain::Time);
        assert!(matches!(a.add(&b), Err(Error::DimensionMismatch { expected: 4, actual: 5 })));
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let b = ComplexBlock::new(vec![c(0.5, -0.25)], Domain::Frequency);
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("index,re,im"));
        assert!(text.lines().nth(1).unwrap().starts_with("0,5e-1,-2.5e-1"));
    }
}
