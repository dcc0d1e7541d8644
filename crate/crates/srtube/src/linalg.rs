//! Small dense linear algebra sized for this crate: frame decompositions are
//! at most 4x4, the expansion fit is an n x 3 least-squares problem.

use crate::jet::Scalar;
use crate::{Error, Result};

/// Gaussian elimination with partial pivoting, generic over jets so that
/// structure constants can carry their coordinate gradients through the solve.
/// Pivoting compares the value part only.
pub fn solve<S: Scalar, const N: usize>(mut a: [[S; N]; N], mut b: [S; N]) -> Result<[S; N]> {
    for col in 0..N {
        let mut piv = col;
        for row in col + 1..N {
            if a[row][col].val().abs() > a[piv][col].val().abs() {
                piv = row;
            }
        }
        if a[piv][col].val().abs() < 1e-13 {
            return Err(Error::domain(format!(
                "singular {N}x{N} system (pivot {:.3e} in column {col})",
                a[piv][col].val()
            )));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..N {
            let f = a[row][col] / a[col][col];
            for k in col..N {
                a[row][k] = a[row][k] - f * a[col][k];
            }
            b[row] = b[row] - f * b[col];
        }
    }
    let mut x = [S::constant(0.0); N];
    for col in (0..N).rev() {
        let mut acc = b[col];
        for k in col + 1..N {
            acc = acc - a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Ok(x)
}

pub fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn det4(m: [[f64; 4]; 4]) -> f64 {
    let minor = |col: usize| -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for (r, row) in m[1..].iter().enumerate() {
            let mut c3 = 0;
            for (c, &v) in row.iter().enumerate() {
                if c != col {
                    out[r][c3] = v;
                    c3 += 1;
                }
            }
        }
        out
    };
    let mut det = 0.0;
    for col in 0..4 {
        let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
        det += sign * m[0][col] * det3(minor(col));
    }
    det
}

/// Least-squares solution of an overdetermined m x 3 system by Householder QR.
/// Returns the solution together with the upper-triangular factor, from which
/// the caller can derive the spectral condition number of the design matrix.
pub struct Qr3 {
    pub x: [f64; 3],
    pub r: [[f64; 3]; 3],
}

pub fn lstsq3(a: &[[f64; 3]], b: &[f64]) -> Result<Qr3> {
    let m = a.len();
    assert_eq!(m, b.len());
    if m < 3 {
        return Err(Error::domain(format!(
            "least-squares system needs at least 3 rows, got {m}"
        )));
    }
    let mut work: Vec<[f64; 4]> = a
        .iter()
        .zip(b)
        .map(|(row, &rhs)| [row[0], row[1], row[2], rhs])
        .collect();

    for k in 0..3 {
        let mut norm2 = 0.0;
        for row in work[k..].iter() {
            norm2 += row[k] * row[k];
        }
        let norm = norm2.sqrt();
        if norm < 1e-300 {
            return Err(Error::IllConditioned { cond: f64::INFINITY });
        }
        let alpha = if work[k][k] >= 0.0 { -norm } else { norm };
        // Householder vector v = x - alpha e_k, stored in place of column k.
        let mut vtv = 0.0;
        work[k][k] -= alpha;
        for row in work[k..].iter() {
            vtv += row[k] * row[k];
        }
        for col in k + 1..4 {
            let mut vtx = 0.0;
            for row in work[k..].iter() {
                vtx += row[k] * row[col];
            }
            let f = 2.0 * vtx / vtv;
            for row in work[k..].iter_mut() {
                row[col] -= f * row[k];
            }
        }
        work[k][k] = alpha;
        for row in work[k + 1..].iter_mut() {
            row[k] = 0.0;
        }
    }

    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            r[i][j] = work[i][j];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let mut acc = work[i][3];
        for j in i + 1..3 {
            acc -= r[i][j] * x[j];
        }
        if r[i][i].abs() < 1e-300 {
            return Err(Error::IllConditioned { cond: f64::INFINITY });
        }
        x[i] = acc / r[i][i];
    }
    Ok(Qr3 { x, r })
}

/// Spectral condition number of the matrix whose QR factor is `r`:
/// square root of the eigenvalue ratio of R^T R (Jacobi iteration).
pub fn cond_from_r(r: [[f64; 3]; 3]) -> f64 {
    let mut s = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = 0.0;
            for k in 0..3 {
                acc += r[k][i] * r[k][j];
            }
            s[i][j] = acc;
        }
    }
    let eig = sym3_eigenvalues(s);
    let lo = eig[0].max(0.0);
    let hi = eig[2];
    if lo <= 0.0 {
        return f64::INFINITY;
    }
    (hi / lo).sqrt()
}

/// Eigenvalues of a symmetric 3x3 matrix, ascending, by cyclic Jacobi.
pub fn sym3_eigenvalues(mut a: [[f64; 3]; 3]) -> [f64; 3] {
    for _ in 0..64 {
        let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
        let scale = a[0][0].abs() + a[1][1].abs() + a[2][2].abs() + off;
        if off <= 1e-16 * scale.max(1e-300) {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            if a[p][q].abs() <= 1e-300 {
                continue;
            }
            let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut b = a;
            for k in 0..3 {
                b[p][k] = c * a[p][k] - s * a[q][k];
                b[q][k] = s * a[p][k] + c * a[q][k];
            }
            a = b;
            let b2 = a;
            for k in 0..3 {
                a[k][p] = c * b2[k][p] - s * b2[k][q];
                a[k][q] = s * b2[k][p] + c * b2[k][q];
            }
        }
    }
    let mut eig = [a[0][0], a[1][1], a[2][2]];
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eig
}
