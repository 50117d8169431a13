//! Dense least squares via column-pivoted Householder QR.

use nalgebra::DMatrix;

/// A column-pivoted QR factorization `A P = Q R` of a tall matrix.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    // Householder vectors below the diagonal, R on and above it.
    qr: DMatrix<f64>,
    tau: Vec<f64>,
    perm: Vec<usize>,
    rank: usize,
}

impl PivotedQr {
    /// Factorize `a` (rows >= cols). Columns whose remaining norm drops
    /// below `rel_tol * |R[0,0]|` are treated as dependent.
    pub fn new(a: &DMatrix<f64>, rel_tol: f64) -> Self {
        let (m, n) = a.shape();
        assert!(m >= n, "least squares needs rows >= cols");
        let mut qr = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut tau = vec![0.0; n];
        let mut col_norms: Vec<f64> = (0..n).map(|j| qr.column(j).norm_squared()).collect();
        let mut rank = n;
        let mut r00 = 0.0f64;

        for k in 0..n {
            // pivot: largest remaining column norm
            let (p, _) = col_norms
                .iter()
                .enumerate()
                .skip(k)
                .fold(
                    (k, -1.0),
                    |best, (j, &v)| if v > best.1 { (j, v) } else { best },
                );
            if p != k {
                qr.swap_columns(k, p);
                col_norms.swap(k, p);
                perm.swap(k, p);
            }

            let alpha_norm = qr.view((k, k), (m - k, 1)).norm();
            if k == 0 {
                r00 = alpha_norm;
            }
            if alpha_norm <= rel_tol * r00 || alpha_norm == 0.0 {
                rank = k;
                break;
            }
            let x0 = qr[(k, k)];
            let beta = if x0 >= 0.0 { -alpha_norm } else { alpha_norm };
            let v0 = x0 - beta;
            for i in k + 1..m {
                qr[(i, k)] /= v0;
            }
            tau[k] = (beta - x0) / beta;
            qr[(k, k)] = beta;

            for j in k + 1..n {
                let mut s = qr[(k, j)];
                for i in k + 1..m {
                    s += qr[(i, k)] * qr[(i, j)];
                }
                s *= tau[k];
                qr[(k, j)] -= s;
                for i in k + 1..m {
                    qr[(i, j)] -= s * qr[(i, k)];
                }
                // downdate is cheap but loses accuracy; recompute instead
                col_norms[j] = qr.view((k + 1, j), (m - k - 1, 1)).norm_squared();
            }
        }
        Self {
            qr,
            tau,
            perm,
            rank,
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.qr.ncols()
    }

    /// Solve `min ||A x - b||` for each column of `b`. Requires full rank.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let (m, n) = self.qr.shape();
        assert_eq!(b.nrows(), m);
        assert!(self.is_full_rank());
        let mut y = b.clone();
        // apply Q^T
        for k in 0..n {
            for c in 0..y.ncols() {
                let mut s = y[(k, c)];
                for i in k + 1..m {
                    s += self.qr[(i, k)] * y[(i, c)];
                }
                s *= self.tau[k];
                y[(k, c)] -= s;
                for i in k + 1..m {
                    y[(i, c)] -= s * self.qr[(i, k)];
                }
            }
        }
        // back substitution on R, then undo the permutation
        let mut x = DMatrix::zeros(n, y.ncols());
        for c in 0..y.ncols() {
            let mut z = vec![0.0; n];
            for k in (0..n).rev() {
                let mut s = y[(k, c)];
                for j in k + 1..n {
                    s -= self.qr[(k, j)] * z[j];
                }
                z[k] = s / self.qr[(k, k)];
            }
            for k in 0..n {
                x[(self.perm[k], c)] = z[k];
            }
        }
        x
    }
}
