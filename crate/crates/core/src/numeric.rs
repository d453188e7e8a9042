//! Small numerical helpers shared by the integration kernels.

/// ln(e^a + e^b) without overflow.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// ln Σ e^{x_i}; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// ∫_0^L e^{k y} dy for finite `len >= 0`, or `len = inf` with `k < 0`.
#[inline]
pub fn int_exp(k: f64, len: f64) -> f64 {
    if len == f64::INFINITY {
        debug_assert!(k < 0.0);
        return -1.0 / k;
    }
    if k == 0.0 {
        len
    } else {
        (k * len).exp_m1() / k
    }
}

/// ln ∫_0^L e^{k y} dy, valid for any sign of `k` without overflow.
#[inline]
pub fn ln_int_exp(k: f64, len: f64) -> f64 {
    if len <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if len == f64::INFINITY {
        debug_assert!(k < 0.0);
        return -(-k).ln();
    }
    let kl = k * len;
    if kl == 0.0 {
        len.ln()
    } else if kl > 0.0 {
        kl + (-(-kl).exp_m1() / k).ln()
    } else {
        (kl.exp_m1() / k).ln()
    }
}

/// (∫_0^L e^{ky} dy, ∫_0^L y e^{ky} dy); `len` may be infinite when `k < 0`.
pub fn int_exp_moments(k: f64, len: f64) -> (f64, f64) {
    if len == f64::INFINITY {
        debug_assert!(k < 0.0);
        return (-1.0 / k, 1.0 / (k * k));
    }
    let kl = k * len;
    if kl.abs() < 0.5 {
        // power series: Σ_j k^j L^{j+n+1} / (j! (j+n+1))
        let mut term = 1.0; // (kL)^j / j!
        let mut m0 = 0.0;
        let mut m1 = 0.0;
        for j in 0..30 {
            let jf = j as f64;
            m0 += term / (jf + 1.0);
            m1 += term / (jf + 2.0);
            term *= kl / (jf + 1.0);
            if term.abs() < 1e-18 {
                break;
            }
        }
        (m0 * len, m1 * len * len)
    } else {
        let m0 = kl.exp_m1() / k;
        let m1 = (len * kl.exp() - m0) / k;
        (m0, m1)
    }
}

/// Golden-section search for the maximiser of a unimodal `f` on `[a, b]`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_match_closed_form_on_both_branches() {
        for &(k, l) in &[(0.3f64, 1.0f64), (-2.0, 0.7), (1e-3, 2.0), (5.0, 1.0), (-0.1, 3.0)] {
            let e = (k * l).exp();
            let m0 = (e - 1.0) / k;
            let m1 = (l * e - m0) / k;
            let (a0, a1) = int_exp_moments(k, l);
            assert!((a0 - m0).abs() < 1e-9 * m0.abs().max(1.0), "{k} {l}");
            assert!((a1 - m1).abs() < 1e-7 * m1.abs().max(1.0), "{k} {l}");
        }
        let (z0, z1) = int_exp_moments(0.0, 2.0);
        assert_eq!(z0, 2.0);
        assert_eq!(z1, 2.0);
    }

    #[test]
    fn ln_int_exp_agrees_with_int_exp() {
        for &(k, l) in &[(0.3, 1.0), (-2.0, 0.7), (40.0, 1.0), (-40.0, 1.0)] {
            assert!((ln_int_exp(k, l) - int_exp(k, l).ln()).abs() < 1e-12);
        }
        // no overflow where the direct form would
        assert!(ln_int_exp(800.0, 1.0).is_finite());
    }

    #[test]
    fn log_sum_exp_shifts() {
        let v = log_sum_exp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, _) = golden_max(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
    }
}
