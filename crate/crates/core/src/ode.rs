//! Fixed-step classical Runge-Kutta integration for small dense systems.

/// One classical fourth-order step of `dx/ds = f(s, x)` from `s` to `s + h`.
///
/// The right-hand side is fallible so admissibility violations inside a stage
/// abort the step instead of producing garbage.
pub fn rk4_step<const N: usize, E, F>(f: &mut F, s: f64, x: &[f64; N], h: f64) -> Result<[f64; N], E>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N], E>,
{
    let k1 = f(s, x)?;
    let k2 = f(s + 0.5 * h, &axpy(x, 0.5 * h, &k1))?;
    let k3 = f(s + 0.5 * h, &axpy(x, 0.5 * h, &k2))?;
    let k4 = f(s + h, &axpy(x, h, &k3))?;
    let mut out = *x;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(out)
}

/// Integrates on the uniform grid `s0 + j*h`, `j = 0..=steps`, returning every node.
pub fn rk4_integrate<const N: usize, E, F>(mut f: F, s0: f64, x0: [f64; N], h: f64, steps: usize) -> Result<Vec<[f64; N]>, E>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N], E>,
{
    let mut out = Vec::with_capacity(steps + 1);
    out.push(x0);
    let mut x = x0;
    for j in 0..steps {
        let s = s0 + j as f64 * h;
        x = rk4_step(&mut f, s, &x, h)?;
        out.push(x);
    }
    Ok(out)
}

#[inline]
fn axpy<const N: usize>(x: &[f64; N], a: f64, y: &[f64; N]) -> [f64; N] {
    let mut out = *x;
    for i in 0..N {
        out[i] += a * y[i];
    }
    out
}

/// Cubic Hermite value at the midpoint of a step of length `h`.
#[inline]
pub fn hermite_midpoint(x0: f64, x1: f64, d0: f64, d1: f64, h: f64) -> f64 {
    0.5 * (x0 + x1) + h / 8.0 * (d0 - d1)
}

/// Cubic Hermite interpolation at fraction `t` in `[0, 1]` of a step of length `h`.
#[inline]
pub fn hermite(x0: f64, x1: f64, d0: f64, d1: f64, h: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * x0 + h10 * h * d0 + h01 * x1 + h11 * h * d1
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    #[test]
    fn exponential_decay_is_fourth_order() {
        let err = |steps: usize| {
            let h = 1.0 / steps as f64;
            let xs = rk4_integrate(|_s, x: &[f64; 1]| Ok::<_, Infallible>([-x[0]]), 0.0, [1.0], h, steps).unwrap();
            (xs[steps][0] - (-1.0f64).exp()).abs()
        };
        let ratio = err(20) / err(40);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let p = |s: f64| 1.0 + 2.0 * s - s * s + 0.5 * s * s * s;
        let dp = |s: f64| 2.0 - 2.0 * s + 1.5 * s * s;
        let (a, h) = (0.3, 0.7);
        let mid = hermite_midpoint(p(a), p(a + h), dp(a), dp(a + h), h);
        assert!((mid - p(a + 0.5 * h)).abs() < 1e-14);
        let q = hermite(p(a), p(a + h), dp(a), dp(a + h), h, 0.25);
        assert!((q - p(a + 0.25 * h)).abs() < 1e-14);
    }

    #[test]
    fn errors_propagate() {
        let r = rk4_integrate(|s, _x: &[f64; 1]| if s > 0.5 { Err(s) } else { Ok([1.0]) }, 0.0, [0.0], 0.1, 10);
        assert!(r.is_err());
    }
}
