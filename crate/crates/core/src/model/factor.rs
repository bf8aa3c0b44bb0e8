//! Dense symmetric indefinite factorisation `P A P^T = L D L^T` with
//! Bunch–Kaufman pivoting (1x1 and 2x2 diagonal blocks).
//!
//! The factor reports the inertia of `A` (Sylvester's law) and `log|det A|`,
//! which replace raw determinant monitoring along equilibrium paths.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const BK_ALPHA: f64 = 0.640_388_203_202_208_4; // (1 + sqrt(17)) / 8

/// Counts of positive, negative and zero pivots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

#[derive(Debug, Clone, Copy)]
enum Block {
    One(f64),
    // [[a, b], [b, c]]
    Two(f64, f64, f64),
}

/// Factor of a symmetric matrix, reusable for any number of right-hand sides.
#[derive(Debug, Clone)]
pub struct SymmetricFactor {
    n: usize,
    // unit lower-triangular L stored below the diagonal, row-major
    l: Vec<f64>,
    // perm[i] = original index of row i of the factored matrix
    perm: Vec<usize>,
    blocks: Vec<(usize, Block)>,
}

/// Result of [`factorize_symmetric`].
#[derive(Debug, Clone)]
pub struct FactorizationReport {
    pub factor: SymmetricFactor,
    pub inertia: Inertia,
    /// `log|det A|`; `-inf` when a zero pivot occurred.
    pub log_abs_det: f64,
    /// Smallest pivot magnitude (eigenvalue magnitude for 2x2 blocks).
    pub min_abs_pivot: f64,
    /// Largest absolute entry of the factored matrix.
    pub max_abs_entry: f64,
}

impl FactorizationReport {
    pub fn is_singular(&self) -> bool {
        self.inertia.zero > 0
    }

    /// Solves `A x = rhs`; refused when a zero pivot was found.
    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        if self.is_singular() {
            return Err(Error::SingularMatrix { zero_pivots: self.inertia.zero });
        }
        if rhs.len() != self.factor.n {
            return Err(Error::DimensionMismatch { what: "right-hand side", expected: self.factor.n, actual: rhs.len() });
        }
        Ok(self.factor.solve(rhs))
    }
}

impl SymmetricFactor {
    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        // L y = b
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s: f64 = row.iter().zip(&y[..i]).map(|(l, v)| l * v).sum();
            y[i] -= s;
        }
        // D z = y
        for &(k, block) in &self.blocks {
            match block {
                Block::One(d) => y[k] /= d,
                Block::Two(a, b, c) => {
                    let det = a * c - b * b;
                    let (y0, y1) = (y[k], y[k + 1]);
                    y[k] = (c * y0 - b * y1) / det;
                    y[k + 1] = (a * y1 - b * y0) / det;
                }
            }
        }
        // L^T w = z
        for i in (0..n).rev() {
            let yi = y[i];
            for j in 0..i {
                y[j] -= self.l[i * n + j] * yi;
            }
        }
        let mut x = DVector::zeros(n);
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }
}

/// Factorises a symmetric matrix and reports its inertia.
///
/// Only the lower triangle of `k` is read. A pivot is counted as zero when
/// its magnitude is below `4 n eps max|A_ij|`.
pub fn factorize_symmetric(k: &DMatrix<f64>) -> Result<FactorizationReport> {
    let n = k.nrows();
    if k.ncols() != n {
        return Err(Error::DimensionMismatch { what: "square matrix", expected: n, actual: k.ncols() });
    }
    let mut a = vec![0.0; n * n];
    let mut max_abs_entry = 0.0_f64;
    for i in 0..n {
        for j in 0..=i {
            let v = k[(i, j)];
            a[i * n + j] = v;
            a[j * n + i] = v;
            max_abs_entry = max_abs_entry.max(v.abs());
        }
    }
    let zero_tol = 4.0 * n as f64 * f64::EPSILON * max_abs_entry;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut blocks = Vec::new();

    let swap = |a: &mut [f64], perm: &mut [usize], p: usize, q: usize| {
        if p == q {
            return;
        }
        for j in 0..n {
            a.swap(p * n + j, q * n + j);
        }
        for i in 0..n {
            a.swap(i * n + p, i * n + q);
        }
        perm.swap(p, q);
    };

    let mut col = 0;
    while col < n {
        let absakk = a[col * n + col].abs();
        let (imax, colmax) = ((col + 1)..n)
            .map(|i| (i, a[i * n + col].abs()))
            .fold((col, 0.0), |best, c| if c.1 > best.1 { c } else { best });

        if absakk.max(colmax) <= zero_tol {
            // column already eliminated; record a zero pivot
            blocks.push((col, Block::One(a[col * n + col])));
            for i in (col + 1)..n {
                a[i * n + col] = 0.0;
            }
            col += 1;
            continue;
        }

        let two_by_two = if absakk >= BK_ALPHA * colmax {
            false
        } else {
            let rowmax = (col..n)
                .filter(|&j| j != imax)
                .map(|j| a[imax * n + j].abs())
                .fold(0.0, f64::max);
            if absakk >= BK_ALPHA * colmax * (colmax / rowmax) {
                false
            } else if a[imax * n + imax].abs() >= BK_ALPHA * rowmax {
                swap(&mut a, &mut perm, col, imax);
                false
            } else {
                swap(&mut a, &mut perm, col + 1, imax);
                true
            }
        };

        if !two_by_two {
            let d = a[col * n + col];
            for i in (col + 1)..n {
                a[i * n + col] /= d;
            }
            for i in (col + 1)..n {
                let li = a[i * n + col];
                if li == 0.0 {
                    continue;
                }
                for j in (col + 1)..=i {
                    a[i * n + j] -= li * d * a[j * n + col];
                }
            }
            for i in (col + 1)..n {
                for j in (i + 1)..n {
                    a[i * n + j] = a[j * n + i];
                }
            }
            blocks.push((col, Block::One(d)));
            col += 1;
        } else {
            let (p, q) = (col, col + 1);
            let d11 = a[p * n + p];
            let d21 = a[q * n + p];
            let d22 = a[q * n + q];
            let det = d11 * d22 - d21 * d21;
            // rows of L: [l_ip, l_iq] = [a_ip, a_iq] D^{-1}
            let mut w = vec![(0.0, 0.0); n];
            for i in (q + 1)..n {
                let (x, y) = (a[i * n + p], a[i * n + q]);
                w[i] = (x, y);
                a[i * n + p] = (d22 * x - d21 * y) / det;
                a[i * n + q] = (d11 * y - d21 * x) / det;
            }
            for i in (q + 1)..n {
                let (lp, lq) = (a[i * n + p], a[i * n + q]);
                for j in (q + 1)..=i {
                    a[i * n + j] -= lp * w[j].0 + lq * w[j].1;
                }
            }
            for i in (q + 1)..n {
                for j in (i + 1)..n {
                    a[i * n + j] = a[j * n + i];
                }
            }
            a[q * n + p] = 0.0;
            blocks.push((col, Block::Two(d11, d21, d22)));
            col += 2;
        }
    }

    let mut inertia = Inertia::default();
    let mut log_abs_det = 0.0;
    let mut min_abs_pivot = f64::INFINITY;
    let mut classify = |v: f64, inertia: &mut Inertia| {
        min_abs_pivot = min_abs_pivot.min(v.abs());
        if v.abs() <= zero_tol {
            inertia.zero += 1;
        } else if v > 0.0 {
            inertia.positive += 1;
        } else {
            inertia.negative += 1;
        }
    };
    for &(_, block) in &blocks {
        match block {
            Block::One(d) => {
                classify(d, &mut inertia);
                log_abs_det += d.abs().ln();
            }
            Block::Two(p, q, r) => {
                let mean = 0.5 * (p + r);
                let rad = (0.25 * (p - r) * (p - r) + q * q).sqrt();
                let (e1, e2) = (mean + rad, mean - rad);
                classify(e1, &mut inertia);
                classify(e2, &mut inertia);
                log_abs_det += (p * r - q * q).abs().ln();
            }
        }
    }
    if inertia.zero > 0 {
        log_abs_det = f64::NEG_INFINITY;
    }
    if n == 0 {
        min_abs_pivot = 0.0;
    }

    // clear the upper triangle so only L remains
    for i in 0..n {
        for j in i..n {
            a[i * n + j] = 0.0;
        }
    }

    Ok(FactorizationReport {
        factor: SymmetricFactor { n, l: a, perm, blocks },
        inertia,
        log_abs_det,
        min_abs_pivot,
        max_abs_entry,
    })
}
