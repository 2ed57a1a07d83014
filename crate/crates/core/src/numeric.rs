//! Scalar root finding and a Dormand–Prince 5(4) integrator.

use crate::error::{Error, Result};

/// Bisection on a sign change of `g` over `[lo, hi]`, run until the bracket
/// stops shrinking in floating point or its width drops below `tol`.
pub fn bisect<G: FnMut(f64) -> f64>(mut g: G, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut ga = g(a);
    let gb = g(b);
    if ga == 0.0 {
        return Ok(a);
    }
    if gb == 0.0 {
        return Ok(b);
    }
    if ga.signum() == gb.signum() || !ga.is_finite() || !gb.is_finite() {
        return Err(Error::Bracket(format!(
            "no sign change on [{a:e}, {b:e}]: g(a)={ga:e}, g(b)={gb:e}"
        )));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b || b - a <= tol {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            return Ok(m);
        }
        if gm.signum() == ga.signum() {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Full-precision bisection (the bracket is shrunk until it cannot shrink further).
pub fn bisect_exact<G: FnMut(f64) -> f64>(g: G, lo: f64, hi: f64) -> Result<f64> {
    bisect(g, lo, hi, 0.0)
}

/// Statistics of one adaptive integration.
#[derive(Debug, Clone, Copy, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Integrates the scalar ODE `y' = g(t, y)` from `(t0, y0)` to `t1` (either direction)
/// with an embedded Dormand–Prince 5(4) pair and step-size control.
pub fn dopri45<G: FnMut(f64, f64) -> f64>(
    mut g: G,
    t0: f64,
    y0: f64,
    t1: f64,
    rtol: f64,
    atol: f64,
) -> Result<(f64, OdeStats)> {
    const C2: f64 = 1.0 / 5.0;
    const C3: f64 = 3.0 / 10.0;
    const C4: f64 = 4.0 / 5.0;
    const C5: f64 = 8.0 / 9.0;
    const A21: f64 = 1.0 / 5.0;
    const A31: f64 = 3.0 / 40.0;
    const A32: f64 = 9.0 / 40.0;
    const A41: f64 = 44.0 / 45.0;
    const A42: f64 = -56.0 / 15.0;
    const A43: f64 = 32.0 / 9.0;
    const A51: f64 = 19372.0 / 6561.0;
    const A52: f64 = -25360.0 / 2187.0;
    const A53: f64 = 64448.0 / 6561.0;
    const A54: f64 = -212.0 / 729.0;
    const A61: f64 = 9017.0 / 3168.0;
    const A62: f64 = -355.0 / 33.0;
    const A63: f64 = 46732.0 / 5247.0;
    const A64: f64 = 49.0 / 176.0;
    const A65: f64 = -5103.0 / 18656.0;
    const B1: f64 = 35.0 / 384.0;
    const B3: f64 = 500.0 / 1113.0;
    const B4: f64 = 125.0 / 192.0;
    const B5: f64 = -2187.0 / 6784.0;
    const B6: f64 = 11.0 / 84.0;
    const E1: f64 = 71.0 / 57600.0;
    const E3: f64 = -71.0 / 16695.0;
    const E4: f64 = 71.0 / 1920.0;
    const E5: f64 = -17253.0 / 339200.0;
    const E6: f64 = 22.0 / 525.0;
    const E7: f64 = -1.0 / 40.0;

    let span = t1 - t0;
    let mut stats = OdeStats::default();
    if span == 0.0 {
        return Ok((y0, stats));
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0;
    let mut h = span.abs() / 64.0;
    let hmin = span.abs() * 1e-14;
    let mut k1 = g(t, y);
    while dir * (t1 - t) > 0.0 {
        if h > (t1 - t).abs() {
            h = (t1 - t).abs();
        }
        let s = dir * h;
        let k2 = g(t + C2 * s, y + s * A21 * k1);
        let k3 = g(t + C3 * s, y + s * (A31 * k1 + A32 * k2));
        let k4 = g(t + C4 * s, y + s * (A41 * k1 + A42 * k2 + A43 * k3));
        let k5 = g(t + C5 * s, y + s * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
        let k6 = g(t + s, y + s * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5));
        let y5 = y + s * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        let k7 = g(t + s, y5);
        let err = (s * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)).abs();
        let sc = atol + rtol * y.abs().max(y5.abs());
        let ratio = err / sc;
        if !ratio.is_finite() {
            return Err(Error::Domain("non-finite right-hand side during integration".into()));
        }
        if ratio <= 1.0 {
            t = if (t1 - (t + s)).abs() <= hmin { t1 } else { t + s };
            y = y5;
            k1 = k7;
            stats.accepted += 1;
        } else {
            stats.rejected += 1;
        }
        let fac = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
        if h < hmin {
            if ratio > 1.0 {
                return Err(Error::Domain(format!("step size underflow near t={t:e}")));
            }
            h = hmin;
        }
        if stats.accepted + stats.rejected > 1_000_000 {
            return Err(Error::Domain("integrator exceeded its step budget".into()));
        }
    }
    Ok((y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt_two() {
        let r = bisect_exact(|x| x * x - 2.0, 0.0, 2.0).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bisect_rejects_missing_sign_change() {
        assert!(bisect_exact(|x| x * x + 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn dopri_matches_exponential_backwards() {
        let (y, _) = dopri45(|_, y| y, 1.0, 1f64.exp(), 0.0, 1e-12, 1e-14).unwrap();
        assert!((y - 1.0).abs() < 1e-10);
    }

    #[test]
    fn dopri_handles_singular_linear_ode() {
        // z' = A + z/(2t) has z = 2At + K sqrt(t).
        let a = -0.3;
        let k = 0.7;
        let z = |t: f64| 2.0 * a * t + k * t.sqrt();
        let (y, _) = dopri45(|t, z| a + z / (2.0 * t), 2.0, z(2.0), 0.05, 1e-12, 1e-14).unwrap();
        assert!((y - z(0.05)).abs() < 1e-10);
    }
}
