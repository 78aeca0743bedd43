//! Gray-coded square QAM with unit average symbol energy.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Qam {
    order: usize,
    bits_per_axis: usize,
    levels: usize,
    scale: f64,
}

impl Qam {
    pub fn new(order: usize) -> Result<Self> {
        if order < 4 || !order.is_power_of_two() || !order.trailing_zeros().is_multiple_of(2) {
            return Err(Error::invalid("mod_order", "square QAM needs a power of four"));
        }
        let bits_per_axis = order.trailing_zeros() as usize / 2;
        let levels = 1 << bits_per_axis;
        // mean of (2k - L + 1)^2 over k, times two axes, equals 2 (M - 1) / 3
        let scale = (2.0 * (order as f64 - 1.0) / 3.0).sqrt().recip();
        Ok(Self {
            order,
            bits_per_axis,
            levels,
            scale,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        2 * self.bits_per_axis
    }

    /// Maps `bits_per_symbol()` bits (first half in-phase, second half
    /// quadrature, MSB first) onto one symbol.
    pub fn map<T: Real>(&self, bits: &[u8]) -> Complex<T> {
        debug_assert_eq!(bits.len(), self.bits_per_symbol());
        let (i_bits, q_bits) = bits.split_at(self.bits_per_axis);
        Complex::new(
            T::of(self.axis_level(i_bits)),
            T::of(self.axis_level(q_bits)),
        )
    }

    /// Nearest-neighbour decision, appending the recovered bits to `out`.
    pub fn demap<T: Real>(&self, symbol: Complex<T>, out: &mut Vec<u8>) {
        self.axis_bits(symbol.re.as_f64(), out);
        self.axis_bits(symbol.im.as_f64(), out);
    }

    pub fn map_all<T: Real>(&self, bits: &[u8]) -> Vec<Complex<T>> {
        bits.chunks_exact(self.bits_per_symbol())
            .map(|b| self.map(b))
            .collect()
    }

    fn axis_level(&self, bits: &[u8]) -> f64 {
        let gray = bits.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
        let idx = gray_to_binary(gray);
        (2.0 * idx as f64 - (self.levels as f64 - 1.0)) * self.scale
    }

    fn axis_bits(&self, value: f64, out: &mut Vec<u8>) {
        let l = self.levels as f64;
        let idx = ((value / self.scale + l - 1.0) / 2.0).round().clamp(0.0, l - 1.0) as usize;
        let gray = idx ^ (idx >> 1);
        for k in (0..self.bits_per_axis).rev() {
            out.push(((gray >> k) & 1) as u8);
        }
    }
}

fn gray_to_binary(mut g: usize) -> usize {
    let mut b = g;
    while g > 0 {
        g >>= 1;
        b ^= g;
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_words(bits: usize) -> impl Iterator<Item = Vec<u8>> {
        (0..1usize << bits).map(move |w| (0..bits).rev().map(|k| ((w >> k) & 1) as u8).collect())
    }

    #[test]
    fn unit_average_energy_and_round_trip() {
        for order in [4, 16, 64] {
            let q = Qam::new(order).unwrap();
            let mut energy = 0.0;
            for word in all_words(q.bits_per_symbol()) {
                let s: Complex<f64> = q.map(&word);
                energy += s.norm_sqr();
                let mut back = Vec::new();
                q.demap(s, &mut back);
                assert_eq!(back, word);
            }
            assert!((energy / order as f64 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn neighbours_differ_in_one_bit() {
        let q = Qam::new(16).unwrap();
        let step = 2.0 * q.scale;
        for word in all_words(4) {
            let s: Complex<f64> = q.map(&word);
            let mut right = Vec::new();
            q.demap(s + Complex::new(step, 0.0), &mut right);
            let moved: Complex<f64> = q.map(&right);
            if (moved - s).norm() > 1e-9 {
                let diff = right.iter().zip(&word).filter(|(a, b)| a != b).count();
                assert_eq!(diff, 1);
            }
        }
    }

    #[test]
    fn four_qam_is_qpsk() {
        let q = Qam::new(4).unwrap();
        let s: Complex<f64> = q.map(&[0, 1]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s - Complex::new(-h, h)).norm() < 1e-12);
        assert!(Qam::new(8).is_err());
    }
}
