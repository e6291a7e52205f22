//! Symmetric tridiagonal eigenvalue kernels for the Lanczos convergence checks:
//! single eigenvalues by Sturm bisection and last eigenvector components by
//! inverse iteration, each O(k).

/// A symmetric tridiagonal matrix with diagonal `d` and off-diagonal `e`.
pub(crate) struct Tridiag<'a> {
    d: &'a [f64],
    e: &'a [f64],
    lo: f64,
    hi: f64,
}

impl<'a> Tridiag<'a> {
    pub(crate) fn new(d: &'a [f64], e: &'a [f64]) -> Self {
        assert!(!d.is_empty() && e.len() + 1 >= d.len());
        let k = d.len();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..k {
            let r = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < k { e[i].abs() } else { 0.0 };
            lo = lo.min(d[i] - r);
            hi = hi.max(d[i] + r);
        }
        Self { d, e, lo, hi }
    }

    pub(crate) fn len(&self) -> usize {
        self.d.len()
    }

    fn norm(&self) -> f64 {
        self.lo.abs().max(self.hi.abs()).max(f64::MIN_POSITIVE)
    }

    /// Number of eigenvalues strictly below `x`.
    pub(crate) fn count_below(&self, x: f64) -> usize {
        let tiny = f64::EPSILON * self.norm();
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.d.len() {
            let off = if i == 0 { 0.0 } else { self.e[i - 1] * self.e[i - 1] / q };
            q = self.d[i] - x - off;
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `j`-th smallest eigenvalue (0-based).
    pub(crate) fn eigenvalue(&self, j: usize) -> f64 {
        assert!(j < self.len());
        if self.len() == 1 {
            return self.d[0];
        }
        let (mut lo, mut hi) = (self.lo - f64::EPSILON * self.norm(), self.hi + f64::EPSILON * self.norm());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
                break;
            }
            if self.count_below(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `|x_k|` for the normalized eigenvector `x` of eigenvalue `theta`.
    pub(crate) fn last_component(&self, theta: f64) -> f64 {
        let k = self.len();
        if k == 1 {
            return 1.0;
        }
        let f = GtFactor::new(self, theta);
        let mut x: Vec<f64> = (0..k).map(|i| 1.0 + 0.1 * (i as f64).sin()).collect();
        for _ in 0..3 {
            f.solve(&mut x);
            let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(nrm.is_finite() && nrm > 0.0) {
                return f64::NAN;
            }
            x.iter_mut().for_each(|v| *v /= nrm);
        }
        x[k - 1].abs()
    }
}

/// LU with partial pivoting of `T - σI`, laid out as in LAPACK's `gttrf`.
struct GtFactor {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl GtFactor {
    fn new(t: &Tridiag<'_>, sigma: f64) -> Self {
        let k = t.len();
        let mut dl: Vec<f64> = t.e[..k - 1].to_vec();
        let mut d: Vec<f64> = t.d.iter().map(|v| v - sigma).collect();
        let mut du: Vec<f64> = t.e[..k - 1].to_vec();
        let mut du2 = vec![0.0; k.saturating_sub(2)];
        let mut swapped = vec![false; k - 1];
        for i in 0..k - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < k {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        // an exact shift leaves a zero pivot; inverse iteration only needs a tiny one
        let tiny = f64::EPSILON * t.norm();
        for p in d.iter_mut() {
            if p.abs() < tiny {
                *p = if *p < 0.0 { -tiny } else { tiny };
            }
        }
        Self { dl, d, du, du2, swapped }
    }

    fn solve(&self, b: &mut [f64]) {
        let k = self.d.len();
        for i in 0..k - 1 {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[k - 1] /= self.d[k - 1];
        b[k - 2] = (b[k - 2] - self.du[k - 2] * b[k - 1]) / self.d[k - 2];
        for i in (0..k.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}
