//! Normal quantile and the regularized incomplete Beta function.

use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use super::DduError;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile.
///
/// Acklam's rational approximation (relative error about 1e-9) followed by
/// one Halley step against `erfc`. The result is limited by `erfc` itself,
/// about 1e-12 absolute in the CDF, so roughly 1e-10 in the quantile.
pub fn normal_quantile(p: f64) -> Result<f64, DduError> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(DduError::Domain(format!("normal quantile of {p}")));
    }
    if p == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if p == 1.0 {
        return Ok(f64::INFINITY);
    }
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996, 3.754408661907416];
    let lo = 0.02425;
    let x = if p < lo {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - lo {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = normal_cdf(x) - p;
    let u = e / normal_pdf(x);
    Ok(x - u / (1.0 + 0.5 * x * u))
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Continued fraction for I_x(a, b), modified Lentz.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=1000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

fn check_shape(a: f64, b: f64) -> Result<(), DduError> {
    if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() {
        Ok(())
    } else {
        Err(DduError::Domain(format!("beta shape ({a}, {b})")))
    }
}

/// Regularized incomplete Beta function I_x(a, b).
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> Result<f64, DduError> {
    check_shape(a, b)?;
    if !(0.0..=1.0).contains(&x) || x.is_nan() {
        return Err(DduError::Domain(format!("beta argument {x}")));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(x);
    }
    let front = (a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b)).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_cf(a, b, x) / a)
    } else {
        Ok(1.0 - front * beta_cf(b, a, 1.0 - x) / b)
    }
}

/// Inverse of `reg_inc_beta` in `x`: Newton steps kept inside a shrinking
/// bisection bracket.
pub fn inv_reg_inc_beta(a: f64, b: f64, q: f64) -> Result<f64, DduError> {
    check_shape(a, b)?;
    if !(0.0..=1.0).contains(&q) || q.is_nan() {
        return Err(DduError::Domain(format!("beta quantile level {q}")));
    }
    if q == 0.0 || q == 1.0 {
        return Ok(q);
    }
    let lnb = ln_beta(a, b);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x = a / (a + b);
    for _ in 0..300 {
        let f = reg_inc_beta(a, b, x)? - q;
        if f.abs() < 1e-15 {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let dens = ((a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - lnb).exp();
        let mut next = x - f / dens;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() < 1e-15 * x.max(1e-300) || hi - lo < 1e-16 {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_beta_is_identity() {
        for x in [0.0, 0.3, 1.0] {
            assert!((reg_inc_beta(1.0, 1.0, x).unwrap() - x).abs() < 1e-14);
        }
    }

    #[test]
    fn symmetric_median() {
        assert!((inv_reg_inc_beta(2.0, 2.0, 0.5).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn closed_form_beta_2_2() {
        // I_x(2,2) = 3x^2 - 2x^3
        for x in [0.1, 0.25, 0.6, 0.95] {
            let want = 3.0 * x * x - 2.0 * x * x * x;
            assert!((reg_inc_beta(2.0, 2.0, x).unwrap() - want).abs() < 1e-13);
        }
    }

    #[test]
    fn domain_errors() {
        assert!(reg_inc_beta(0.0, 1.0, 0.5).is_err());
        assert!(reg_inc_beta(1.0, 1.0, 1.5).is_err());
        assert!(inv_reg_inc_beta(1.0, -1.0, 0.5).is_err());
        assert!(normal_quantile(1.2).is_err());
    }

    #[test]
    fn normal_quantile_known_values() {
        assert!(normal_quantile(0.5).unwrap().abs() < 1e-15);
        let z = normal_quantile(0.975).unwrap();
        assert!((z - 1.959963984540054).abs() < 1e-10, "{z:e}");
        assert!((normal_quantile(0.001).unwrap() + 3.090232306167814).abs() < 1e-10);
    }
}
