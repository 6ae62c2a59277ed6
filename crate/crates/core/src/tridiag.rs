//! Real symmetric tridiagonal eigenproblems.
//!
//! [`SymTridiagonal::eigh`] runs the implicit-shift QL iteration, optionally
//! accumulating eigenvectors; [`SymTridiagonal::eigenvalues_bisection`] counts
//! Sturm sign changes and needs no vectors at all.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Symmetric tridiagonal matrix given by its diagonal and first off-diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTridiagonal<T> {
    diagonal: Vec<T>,
    off_diagonal: Vec<T>,
}

/// Eigenvalues in ascending order, with optional eigenvectors stored
/// row-major: `vectors[row * dim + col]` is component `row` of eigenvector
/// `col`.
#[derive(Clone, Debug, PartialEq)]
pub struct TridiagonalEigen<T> {
    pub values: Vec<T>,
    pub vectors: Option<Vec<T>>,
}

const MAX_QL_SWEEPS: usize = 60;

impl<T: Real> SymTridiagonal<T> {
    pub fn new(diagonal: Vec<T>, off_diagonal: Vec<T>) -> Result<Self> {
        if diagonal.is_empty() {
            return Err(Error::domain("SymTridiagonal::new", "empty matrix"));
        }
        if off_diagonal.len() + 1 != diagonal.len() {
            return Err(Error::domain(
                "SymTridiagonal::new",
                format!(
                    "off-diagonal has length {}, expected {}",
                    off_diagonal.len(),
                    diagonal.len() - 1
                ),
            ));
        }
        Ok(Self {
            diagonal,
            off_diagonal,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn diagonal(&self) -> &[T] {
        &self.diagonal
    }

    pub fn off_diagonal(&self) -> &[T] {
        &self.off_diagonal
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(x.len(), n);
        (0..n)
            .map(|i| {
                let mut y = self.diagonal[i] * x[i];
                if i > 0 {
                    y = y + self.off_diagonal[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y = y + self.off_diagonal[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// Largest absolute row sum, an upper bound on the spectral radius.
    pub fn norm_inf(&self) -> T {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut s = self.diagonal[i].abs();
                if i > 0 {
                    s = s + self.off_diagonal[i - 1].abs();
                }
                if i + 1 < n {
                    s = s + self.off_diagonal[i].abs();
                }
                s
            })
            .fold(T::zero(), T::max)
    }

    /// Full eigendecomposition by implicit QL, eigenvalues ascending.
    pub fn eigh(&self, want_vectors: bool) -> Result<TridiagonalEigen<T>> {
        let n = self.dim();
        let mut d = self.diagonal.clone();
        let mut e = self.off_diagonal.clone();
        e.push(T::zero());
        let mut z = want_vectors.then(|| {
            let mut z = vec![T::zero(); n * n];
            for i in 0..n {
                z[i * n + i] = T::one();
            }
            z
        });

        let two = T::lit(2.0);
        for l in 0..n {
            let mut iterations = 0;
            loop {
                // Find a negligible off-diagonal element to split at.
                let mut m = l;
                while m + 1 < n {
                    let dd = d[m].abs() + d[m + 1].abs();
                    if e[m].abs() <= T::epsilon() * dd || e[m].abs() <= T::min_positive_value() {
                        break;
                    }
                    m += 1;
                }
                if m == l {
                    break;
                }
                if iterations == MAX_QL_SWEEPS {
                    return Err(Error::NoConvergence {
                        op: "SymTridiagonal::eigh",
                        iterations,
                    });
                }
                iterations += 1;

                let mut g = (d[l + 1] - d[l]) / (two * e[l]);
                let mut r = g.hypot(T::one());
                g = d[m] - d[l] + e[l] / (g + r.copysign(g));
                let (mut s, mut c, mut p) = (T::one(), T::one(), T::zero());
                let mut deflated = false;
                let mut i = m;
                while i > l {
                    i -= 1;
                    let f = s * e[i];
                    let b = c * e[i];
                    r = f.hypot(g);
                    e[i + 1] = r;
                    if r == T::zero() {
                        d[i + 1] = d[i + 1] - p;
                        e[m] = T::zero();
                        deflated = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + two * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    if let Some(z) = z.as_mut() {
                        for k in 0..n {
                            let zk1 = z[k * n + i + 1];
                            let zk = z[k * n + i];
                            z[k * n + i + 1] = s * zk + c * zk1;
                            z[k * n + i] = c * zk - s * zk1;
                        }
                    }
                }
                if deflated {
                    continue;
                }
                d[l] = d[l] - p;
                e[l] = g;
                e[m] = T::zero();
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).expect("finite eigenvalues"));
        let values: Vec<T> = order.iter().map(|&i| d[i]).collect();
        let vectors = z.map(|z| {
            let mut sorted = vec![T::zero(); n * n];
            for (col, &src) in order.iter().enumerate() {
                for row in 0..n {
                    sorted[row * n + col] = z[row * n + src];
                }
            }
            sorted
        });
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NoConvergence {
                op: "SymTridiagonal::eigh",
                iterations: MAX_QL_SWEEPS,
            });
        }
        Ok(TridiagonalEigen { values, vectors })
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    pub fn count_below(&self, x: T) -> usize {
        let n = self.dim();
        let tiny = T::min_positive_value();
        let mut count = 0;
        let mut q = self.diagonal[0] - x;
        if q < T::zero() {
            count += 1;
        }
        for i in 1..n {
            let denom = if q.abs() < tiny { tiny.copysign(q) } else { q };
            let b = self.off_diagonal[i - 1];
            q = self.diagonal[i] - x - b * b / denom;
            if q < T::zero() {
                count += 1;
            }
        }
        count
    }

    /// All eigenvalues, ascending, by bisection on the Sturm count.
    pub fn eigenvalues_bisection(&self) -> Result<Vec<T>> {
        let n = self.dim();
        let radius = self.norm_inf();
        let pad = radius * T::lit(1e-12) + T::min_positive_value();
        let (lo0, hi0) = (-radius - pad, radius + pad);
        let tol = T::lit(4.0) * T::epsilon() * radius.max(T::one());
        let half = T::lit(0.5);
        let mut values = Vec::with_capacity(n);
        let mut lo_prev = lo0;
        for k in 0..n {
            // Smallest x with count_below(x) > k.
            let (mut lo, mut hi) = (lo_prev, hi0);
            let mut steps = 0;
            while hi - lo > tol {
                let mid = (lo + hi) * half;
                if mid == lo || mid == hi {
                    break;
                }
                if self.count_below(mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
                steps += 1;
                if steps > 4096 {
                    return Err(Error::NoConvergence {
                        op: "SymTridiagonal::eigenvalues_bisection",
                        iterations: steps,
                    });
                }
            }
            let value = (lo + hi) * half;
            values.push(value);
            lo_prev = lo;
        }
        Ok(values)
    }
}
