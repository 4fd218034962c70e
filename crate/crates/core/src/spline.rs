//! Interpolation helpers: uniform periodic cubic splines and monotone cubic
//! (Fritsch-Carlson) interpolation on nonuniform knots.

/// Interpolating cubic spline through uniformly spaced samples of a periodic function.
#[derive(Debug, Clone)]
pub struct PeriodicSpline {
    h: f64,
    values: Vec<f64>,
    /// Second derivatives at the knots.
    moments: Vec<f64>,
}

impl PeriodicSpline {
    /// `values[k]` is the sample at `k * h`; the period is `values.len() * h`.
    pub fn new(values: Vec<f64>, h: f64) -> Self {
        let n = values.len();
        assert!(n >= 3, "periodic spline needs at least three samples");
        let rhs: Vec<f64> = (0..n)
            .map(|k| {
                let prev = values[(k + n - 1) % n];
                let next = values[(k + 1) % n];
                6.0 * (next - 2.0 * values[k] + prev) / (h * h)
            })
            .collect();
        let moments = solve_cyclic(1.0, 4.0, 1.0, &rhs);
        PeriodicSpline { h, values, moments }
    }

    pub fn period(&self) -> f64 {
        self.h * self.values.len() as f64
    }

    pub fn samples(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    fn locate(&self, s: f64) -> (usize, usize, f64) {
        let n = self.values.len();
        let u = s / self.h;
        let fl = u.floor();
        let t = u - fl;
        let k = (fl as i64).rem_euclid(n as i64) as usize;
        (k, (k + 1) % n, t)
    }

    /// Value at `s` (any real; wrapped by periodicity).
    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        let (k, k1, t) = self.locate(s);
        let (y0, y1) = (self.values[k], self.values[k1]);
        let (m0, m1) = (self.moments[k], self.moments[k1]);
        let h2 = self.h * self.h;
        let a = 1.0 - t;
        a * y0 + t * y1 + h2 / 6.0 * ((a * a * a - a) * m0 + (t * t * t - t) * m1)
    }

    /// Value, first and second derivative at `s`.
    #[inline]
    pub fn eval_all(&self, s: f64) -> (f64, f64, f64) {
        let (k, k1, t) = self.locate(s);
        let (y0, y1) = (self.values[k], self.values[k1]);
        let (m0, m1) = (self.moments[k], self.moments[k1]);
        let h = self.h;
        let a = 1.0 - t;
        let v = a * y0 + t * y1 + h * h / 6.0 * ((a * a * a - a) * m0 + (t * t * t - t) * m1);
        let d = (y1 - y0) / h + h / 6.0 * ((1.0 - 3.0 * a * a) * m0 + (3.0 * t * t - 1.0) * m1);
        let dd = a * m0 + t * m1;
        (v, d, dd)
    }
}

/// Solves the cyclic tridiagonal system with constant bands
/// `lower*x[k-1] + diag*x[k] + upper*x[k+1] = rhs[k]` (indices mod n)
/// using the Sherman-Morrison correction of the Thomas algorithm.
fn solve_cyclic(lower: f64, diag: f64, upper: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let gamma = -diag;
    let alpha = upper; // corner element a[n-1][0]
    let beta = lower; // corner element a[0][n-1]
    let mut b = vec![diag; n];
    b[0] = diag - gamma;
    b[n - 1] = diag - alpha * beta / gamma;
    let x = solve_tridiagonal(lower, &b, upper, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve_tridiagonal(lower, &b, upper, &u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

fn solve_tridiagonal(lower: f64, diag: &[f64], upper: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower * c[i - 1];
        c[i] = upper / m;
        d[i] = (rhs[i] - lower * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Shape-preserving cubic interpolant through strictly increasing knots.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        assert!(n >= 2 && ys.len() == n);
        let secants: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])).collect();
        let mut slopes = vec![0.0; n];
        slopes[0] = secants[0];
        slopes[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            let (a, b) = (secants[i - 1], secants[i]);
            slopes[i] = if a * b <= 0.0 {
                0.0
            } else {
                // weighted harmonic mean (Fritsch-Butland)
                let (h0, h1) = (xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                (w1 + w2) / (w1 / a + w2 / b)
            };
        }
        MonotoneCubic { xs, ys, slopes }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let i = match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        crate::ode::hermite(self.ys[i], self.ys[i + 1], self.slopes[i], self.slopes[i + 1], h, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn periodic_spline_tracks_trig() {
        let n = 256;
        let h = TAU / n as f64;
        let ys: Vec<f64> = (0..n).map(|k| (k as f64 * h).sin()).collect();
        let sp = PeriodicSpline::new(ys, h);
        for i in 0..1000 {
            let s = -3.0 + i as f64 * 0.0137;
            let (v, d, dd) = sp.eval_all(s);
            assert!((v - s.sin()).abs() < 1e-8);
            assert!((d - s.cos()).abs() < 1e-6);
            assert!((dd + s.sin()).abs() < 1e-3);
            assert_eq!(v, sp.eval(s));
        }
    }

    #[test]
    fn cyclic_solver_matches_direct_check() {
        let rhs = vec![1.0, -2.0, 0.5, 3.0, 0.0];
        let x = solve_cyclic(1.0, 4.0, 1.0, &rhs);
        let n = rhs.len();
        for k in 0..n {
            let lhs = x[(k + n - 1) % n] + 4.0 * x[k] + x[(k + 1) % n];
            assert!((lhs - rhs[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_cubic_stays_monotone() {
        let xs = vec![0.0, 1.0, 1.1, 3.0, 3.05, 6.0];
        let ys = vec![0.0, 0.1, 2.0, 2.1, 5.0, 5.0];
        let mc = MonotoneCubic::new(xs.clone(), ys.clone());
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=600 {
            let v = mc.eval(i as f64 * 0.01);
            assert!(v >= prev - 1e-12);
            prev = v;
        }
        for (x, y) in xs.iter().zip(&ys) {
            assert!((mc.eval(*x) - y).abs() < 1e-12);
        }
    }
}
