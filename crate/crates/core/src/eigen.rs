//! Cyclic Jacobi eigensolver for symmetric 3x3 matrices.

pub type Mat3 = [[f64; 3]; 3];

/// Eigen-decomposition with eigenvalues sorted descending; `vectors[k]` is
/// the unit eigenvector of `values[k]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymEigen {
    pub values: [f64; 3],
    pub vectors: [[f64; 3]; 3],
    pub sweeps: usize,
}

const MAX_SWEEPS: usize = 50;

fn off_norm(a: &Mat3) -> f64 {
    (2.0 * (a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2])).sqrt()
}

/// Eigenvalues and eigenvectors of a symmetric matrix by Jacobi rotations.
///
/// Only the upper triangle is read. Iteration stops once the off-diagonal
/// norm is below `1e-12` times the trace magnitude (or the Frobenius norm for
/// traceless input).
pub fn eigen_sym3(m: &Mat3) -> SymEigen {
    let mut a = *m;
    for i in 0..3 {
        for j in 0..i {
            a[i][j] = a[j][i];
        }
    }
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let fro = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let scale = (a[0][0] + a[1][1] + a[2][2]).abs().max(fro);
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS && off_norm(&a) > 1e-12 * scale && scale > 0.0 {
        sweeps += 1;
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let apq = a[p][q];
            if apq == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let vp = row[p];
                let vq = row[q];
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.map(|k| a[k][k]);
    let vectors = order.map(|k| [v[0][k], v[1][k], v[2][k]]);
    SymEigen { values, vectors, sweeps }
}

/// Eigenvalues sorted descending.
pub fn eigenvalues_sym3(m: &Mat3) -> [f64; 3] {
    eigen_sym3(m).values
}

pub fn mat_vec(m: &Mat3, x: &[f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| m[i][0] * x[0] + m[i][1] * x[1] + m[i][2] * x[2])
}

pub fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}
