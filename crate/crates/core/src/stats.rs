//! Central and non-central chi-square distribution functions.
//!
//! `dof` is a real number of degrees of freedom; the detector uses `2K`.

use statrs::function::erf::erfc_inv;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};

const CDF_TOL: f64 = 1e-12;
const MIXTURE_TAIL: f64 = 1e-14;

fn check_x_dof(x: f64, dof: f64) -> Result<()> {
    if !(x >= 0.0) {
        return Err(Error::DomainError(format!("x = {x} must be non-negative")));
    }
    if !(dof >= 1.0 && dof.is_finite()) {
        return Err(Error::DomainError(format!("dof = {dof} must be at least 1")));
    }
    Ok(())
}

/// `P(X <= x)` for `X ~ chi2(dof)`.
pub fn chi2_cdf(x: f64, dof: f64) -> Result<f64> {
    check_x_dof(x, dof)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    Ok(gamma_lr(dof / 2.0, x / 2.0))
}

/// `P(X > x)` for `X ~ chi2(dof)`, accurate deep into the tail.
pub fn chi2_sf(x: f64, dof: f64) -> Result<f64> {
    check_x_dof(x, dof)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(gamma_ur(dof / 2.0, x / 2.0))
}

/// `x` with `chi2_cdf(x, dof) = p`.
pub fn chi2_quantile(p: f64, dof: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::DomainError(format!("p = {p} must lie in (0, 1)")));
    }
    if p > 0.5 {
        chi2_isf(1.0 - p, dof)
    } else {
        solve(dof, p, |x| chi2_cdf(x, dof), true)
    }
}

/// `x` with `chi2_sf(x, dof) = q` (inverse survival function).
pub fn chi2_isf(q: f64, dof: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::DomainError(format!("q = {q} must lie in (0, 1)")));
    }
    solve(dof, q, |x| chi2_sf(x, dof), false)
}

/// Wilson-Hilferty approximation of the upper-`q` point.
fn wilson_hilferty(q: f64, dof: f64) -> f64 {
    let z = std::f64::consts::SQRT_2 * erfc_inv(2.0 * q);
    let h = 2.0 / (9.0 * dof);
    (dof * (1.0 - h + z * h.sqrt()).powi(3)).max(1e-300)
}

/// Bisection for `f(x) = target` where `f` is monotone (increasing when
/// `increasing`), seeded by Wilson-Hilferty.
fn solve(dof: f64, target: f64, f: impl Fn(f64) -> Result<f64>, increasing: bool) -> Result<f64> {
    let upper_q = if increasing { 1.0 - target } else { target };
    let seed = wilson_hilferty(upper_q, dof);
    // below(x): true when x is left of the root
    let below = |x: f64| -> Result<bool> {
        let v = f(x)?;
        Ok(if increasing { v < target } else { v > target })
    };
    let (mut lo, mut hi) = (seed, seed);
    let mut guard = 0;
    while lo > 0.0 && !below(lo)? {
        lo = if lo < 1e-300 { 0.0 } else { lo / 2.0 };
        guard += 1;
        if guard > 2100 {
            return Err(Error::NumericalFailure("quantile bracket (low side)".into()));
        }
    }
    guard = 0;
    while below(hi)? {
        hi *= 2.0;
        guard += 1;
        if guard > 2100 || !hi.is_finite() {
            return Err(Error::NumericalFailure("quantile bracket (high side)".into()));
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    let err = (f(x)? - target).abs();
    if err > CDF_TOL.max(target * 1e-9) {
        return Err(Error::NumericalFailure(format!(
            "quantile residual {err:e} exceeds tolerance"
        )));
    }
    Ok(x)
}

/// `P(X <= x)` for a non-central `X ~ chi2(dof, lambda)`, as the Poisson
/// mixture `sum_j Pois(j; lambda/2) F_{chi2(dof + 2j)}(x)`.
///
/// Terms are added in increasing `j`. Because `F_{chi2(nu)}(x)` decreases in
/// `nu`, the neglected remainder after term `j` is at most
/// `(1 - sum of weights so far) * F_{chi2(dof + 2j)}(x)`; summation stops once
/// that bound drops below `1e-14`.
pub fn noncentral_chi2_cdf(x: f64, dof: f64, lambda: f64) -> Result<f64> {
    check_x_dof(x, dof)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::DomainError(format!("lambda = {lambda} must be non-negative")));
    }
    if lambda == 0.0 {
        return chi2_cdf(x, dof);
    }
    let mu = lambda / 2.0;
    let ln_mu = mu.ln();
    let max_terms = 1000.0 + mu + 60.0 * mu.sqrt();
    let mut mass = 0.0;
    let mut acc = 0.0;
    let mut j = 0.0;
    loop {
        let w = (-mu + j * ln_mu - ln_gamma(j + 1.0)).exp();
        let f = chi2_cdf(x, dof + 2.0 * j)?;
        mass += w;
        acc += w * f;
        if (1.0 - mass).max(0.0) * f < MIXTURE_TAIL {
            break;
        }
        j += 1.0;
        if j > max_terms {
            return Err(Error::NumericalFailure("non-central mixture did not converge".into()));
        }
    }
    Ok(acc.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Modified Bessel function of the first kind by its power series.
    fn bessel_i(k: u32, x: f64) -> f64 {
        let half = x / 2.0;
        let log_first = k as f64 * half.ln() - (1..=k).map(|j| f64::from(j).ln()).sum::<f64>();
        let mut term = log_first.exp();
        if term == 0.0 {
            return 0.0;
        }
        let mut sum = term;
        for m in 1..500 {
            let m = m as f64;
            term *= half * half / (m * (m + k as f64));
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        sum
    }

    /// First-order Marcum Q function by its Bessel series.
    fn marcum_q1(a: f64, b: f64) -> f64 {
        let pre = (-(a * a + b * b) / 2.0).exp();
        if a < b {
            let mut s = 0.0;
            for k in 0..400 {
                s += (a / b).powi(k) * bessel_i(k as u32, a * b);
            }
            pre * s
        } else {
            let mut s = 0.0;
            for k in 1..400 {
                s += (b / a).powi(k) * bessel_i(k as u32, a * b);
            }
            1.0 - pre * s
        }
    }

    #[test]
    fn two_dof_closed_form() {
        let x = 2.0 * 1000f64.ln();
        assert!((chi2_cdf(x, 2.0).unwrap() - 0.999).abs() < 1e-14);
        for &x in &[0.1, 1.0, 5.0, 20.0] {
            assert!((chi2_cdf(x, 2.0).unwrap() - (1.0 - (-x / 2.0).exp())).abs() < 1e-14);
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &dof in &[2.0, 4.0, 8.0, 17.0] {
            for &p in &[1e-6, 0.01, 0.5, 0.9, 0.999, 1.0 - 1e-8] {
                let x = chi2_quantile(p, dof).unwrap();
                assert!((chi2_cdf(x, dof).unwrap() - p).abs() <= 1e-12, "dof {dof} p {p}");
            }
        }
        let x = chi2_isf(1e-3, 2.0).unwrap();
        assert!((x - 2.0 * 1000f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn domain_errors() {
        assert!(chi2_cdf(-1.0, 2.0).is_err());
        assert!(chi2_cdf(1.0, 0.5).is_err());
        assert!(chi2_quantile(1.0, 2.0).is_err());
        assert!(noncentral_chi2_cdf(1.0, 2.0, -1.0).is_err());
    }

    #[test]
    fn noncentral_reduces_to_central() {
        for &x in &[0.5, 3.0, 10.0] {
            assert_eq!(noncentral_chi2_cdf(x, 4.0, 0.0).unwrap(), chi2_cdf(x, 4.0).unwrap());
        }
    }

    #[test]
    fn noncentral_matches_marcum_q() {
        let mut n = 0;
        for &lambda in &[0.5f64, 2.0, 6.0, 12.0, 25.0] {
            for &x in &[0.3, 2.0, 8.0, 20.0] {
                let want = 1.0 - marcum_q1(lambda.sqrt(), f64::sqrt(x));
                let got = noncentral_chi2_cdf(x, 2.0, lambda).unwrap();
                assert!((got - want).abs() < 1e-10, "lambda {lambda} x {x}: {got} vs {want}");
                n += 1;
            }
        }
        assert_eq!(n, 20);
    }

    #[test]
    fn noncentral_large_lambda_is_finite() {
        let v = noncentral_chi2_cdf(3000.0, 4.0, 3000.0).unwrap();
        assert!(v > 0.4 && v < 0.6);
        assert!(noncentral_chi2_cdf(10.0, 2.0, 5000.0).unwrap() < 1e-100);
    }
}
