//! Small dense vector helpers over `f64` slices.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn scale(alpha: f64, x: &mut [f64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Dense symmetric matrix stored row-major, used for closed-form constants
/// at desk scale.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    /// `self += w * a aᵀ`
    pub fn add_outer(&mut self, w: f64, a: &[f64]) {
        for i in 0..self.n {
            if a[i] == 0.0 {
                continue;
            }
            for j in 0..self.n {
                self.data[i * self.n + j] += w * a[i] * a[j];
            }
        }
    }

    pub fn add_identity(&mut self, c: f64) {
        for i in 0..self.n {
            self.data[i * self.n + i] += c;
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| dot(&self.data[i * self.n..(i + 1) * self.n], v))
            .collect()
    }

    /// Solve `self * x = rhs` by Cholesky; `None` if not positive definite.
    pub fn cholesky_solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = self.n;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = self.get(i, j);
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if sum <= 0.0 {
                        return None;
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut sum = rhs[i];
            for k in 0..i {
                sum -= l[i * n + k] * y[k];
            }
            y[i] = sum / l[i * n + i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut sum = y[i];
            for k in i + 1..n {
                sum -= l[k * n + i] * x[k];
            }
            x[i] = sum / l[i * n + i];
        }
        Some(x)
    }
}

/// Estimate of the spectral norm (largest |eigenvalue|) of a symmetric
/// operator by power iteration from a fixed start vector.
pub fn power_iteration<F>(dim: usize, iters: usize, mut apply: F) -> f64
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    if dim == 0 {
        return 0.0;
    }
    // Fixed, non-degenerate start vector.
    let mut v: Vec<f64> = (0..dim)
        .map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.618_033_988_749_895).fract())
        .collect();
    let n0 = norm(&v);
    scale(1.0 / n0, &mut v);
    let mut estimate = 0.0;
    for _ in 0..iters {
        let w = apply(&v);
        let nw = norm(&w);
        if nw == 0.0 || !nw.is_finite() {
            return if nw.is_finite() {
                estimate
            } else {
                f64::INFINITY
            };
        }
        estimate = nw;
        v = w;
        scale(1.0 / nw, &mut v);
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_small_system() {
        let mut m = SymMatrix::zeros(2);
        m.add_outer(1.0, &[1.0, 1.0]);
        m.add_identity(1.0);
        // [[2,1],[1,2]] x = [3,3] -> x = [1,1]
        let x = m.cholesky_solve(&[3.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cholesky_rejects_singular() {
        let mut m = SymMatrix::zeros(2);
        m.add_outer(1.0, &[1.0, 0.0]);
        assert!(m.cholesky_solve(&[1.0, 0.0]).is_none());
    }

    #[test]
    fn power_iteration_finds_dominant_magnitude() {
        // diag(1, -3, 2)
        let d = [1.0, -3.0, 2.0];
        let est = power_iteration(3, 200, |v| v.iter().zip(&d).map(|(a, b)| a * b).collect());
        assert!((est - 3.0).abs() < 1e-9);
    }
}
