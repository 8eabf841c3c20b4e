//! Built-in benchmark objectives over a [`Dataset`]: least squares,
//! ℓ2-regularized logistic regression and a smooth bounded nonconvex loss.
//!
//! Every objective has the form `f_i(x) = φ(a_iᵀx, y_i) + (reg/2)‖x‖²`, so
//! gradients, Hessian-vector products and Lipschitz constants follow from the
//! scalar loss `φ` and its curvature bound `sup |φ''|`.

mod data;
mod libsvm;
mod synth;

use std::str::FromStr;

pub use data::{Dataset, Row};
pub use libsvm::{parse_libsvm, write_libsvm};
pub use synth::{synth_data, synth_data_with_truth, SynthKind};

use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::linalg::{self, SymMatrix};
use crate::problem::{ClosedFormConstants, FiniteSum};

/// Scalar loss applied to the margin `m = a_iᵀx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// `½(m − y)²`
    LeastSquares,
    /// `ln(1 + exp(−y m))`, labels in {−1, +1}.
    Logistic,
    /// `r²/(1 + r²)` with `r = m − y`.
    RobustNonconvex,
}

impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "least_squares" => Ok(Loss::LeastSquares),
            "logistic" => Ok(Loss::Logistic),
            "robust_nonconvex" => Ok(Loss::RobustNonconvex),
            other => Err(Error::Input(format!("unknown problem kind `{other}`"))),
        }
    }
}

impl Loss {
    pub fn as_str(self) -> &'static str {
        match self {
            Loss::LeastSquares => "least_squares",
            Loss::Logistic => "logistic",
            Loss::RobustNonconvex => "robust_nonconvex",
        }
    }

    pub fn value(self, m: f64, y: f64) -> f64 {
        match self {
            Loss::LeastSquares => 0.5 * (m - y) * (m - y),
            Loss::Logistic => softplus(-y * m),
            Loss::RobustNonconvex => {
                let r2 = (m - y) * (m - y);
                r2 / (1.0 + r2)
            }
        }
    }

    /// `∂φ/∂m`
    pub fn derivative(self, m: f64, y: f64) -> f64 {
        match self {
            Loss::LeastSquares => m - y,
            Loss::Logistic => -y * sigmoid(-y * m),
            Loss::RobustNonconvex => {
                let r = m - y;
                let q = 1.0 + r * r;
                2.0 * r / (q * q)
            }
        }
    }

    /// `∂²φ/∂m²`
    pub fn curvature(self, m: f64, y: f64) -> f64 {
        match self {
            Loss::LeastSquares => 1.0,
            Loss::Logistic => sigmoid(m) * sigmoid(-m),
            Loss::RobustNonconvex => {
                let r2 = (m - y) * (m - y);
                let q = 1.0 + r2;
                (2.0 - 6.0 * r2) / (q * q * q)
            }
        }
    }

    /// `sup_m |φ''(m)|`.
    pub fn curvature_bound(self) -> f64 {
        match self {
            Loss::LeastSquares => 1.0,
            Loss::Logistic => 0.25,
            // (2 − 6r²)/(1 + r²)³ peaks in magnitude at r = 0.
            Loss::RobustNonconvex => 2.0,
        }
    }
}

/// `ln(1 + eᵗ)` without overflow.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// A finite sum `f_i(x) = φ(a_iᵀx, y_i) + (reg/2)‖x‖²` over a dataset.
#[derive(Debug, Clone)]
pub struct LinearModelProblem {
    name: String,
    dataset: Dataset,
    reg: f64,
    loss: Loss,
    exec: Exec,
}

impl LinearModelProblem {
    pub fn new(dataset: Dataset, reg: f64, loss: Loss) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::Input("dataset is empty".into()));
        }
        if dataset.feature_dim() == 0 {
            return Err(Error::Input("dataset has zero feature dimension".into()));
        }
        if !(reg >= 0.0) || !reg.is_finite() {
            return Err(Error::Input(format!(
                "regularization must be >= 0, got {reg}"
            )));
        }
        if loss == Loss::Logistic {
            if let Some((i, y)) = dataset
                .labels()
                .iter()
                .enumerate()
                .find(|(_, &y)| y != 1.0 && y != -1.0)
            {
                return Err(Error::Input(format!(
                    "logistic labels must be -1 or +1; row {i} has {y}"
                )));
            }
        }
        Ok(Self {
            name: format!(
                "{}(N={}, d={}, reg={reg})",
                loss.as_str(),
                dataset.len(),
                dataset.feature_dim()
            ),
            dataset,
            reg,
            loss,
            exec: Exec::default(),
        })
    }

    /// Execution strategy used for Hessian products and Gram matrices.
    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn reg(&self) -> f64 {
        self.reg
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    /// Lipschitz constant of `∇f_i`: `sup|φ''|·‖a_i‖² + reg`.
    pub fn component_lipschitz(&self, i: usize) -> f64 {
        self.loss.curvature_bound() * self.dataset.row(i).norm_sq() + self.reg
    }

    /// `λ_max((1/N) Σ a_i a_iᵀ)` by power iteration.
    pub fn gram_spectral_norm(&self) -> f64 {
        let n = self.dataset.len() as f64;
        let idx: Vec<usize> = (0..self.dataset.len()).collect();
        let d = self.dataset.feature_dim();
        let apply = |v: &[f64]| {
            let mut w = exec::sum_vectors(self.exec, &idx, d, |&i, acc| {
                let row = self.dataset.row(i);
                row.axpy_into(row.dot(v), acc);
                Ok(())
            })
            .expect("gram product has no failure path");
            linalg::scale(1.0 / n, &mut w);
            w
        };
        converged_power_iteration(d, apply)
    }

    fn least_squares_infimum(&self) -> Option<f64> {
        let d = self.dataset.feature_dim();
        if d > 500 {
            return None;
        }
        let n = self.dataset.len() as f64;
        let mut gram = SymMatrix::zeros(d);
        let mut rhs = vec![0.0; d];
        for (row, &y) in self.dataset.rows().iter().zip(self.dataset.labels()) {
            let a = row.to_dense(d);
            gram.add_outer(1.0 / n, &a);
            linalg::axpy(y / n, &a, &mut rhs);
        }
        gram.add_identity(self.reg);
        let xstar = gram.cholesky_solve(&rhs)?;
        let idx: Vec<usize> = (0..self.dataset.len()).collect();
        let total =
            exec::sum_scalars(self.exec, &idx, |&i| Ok(self.component_value(i, &xstar))).ok()?;
        // Rounding may leave the computed minimum slightly above the true one.
        Some((total / n - 1e-12 * (1.0 + total.abs() / n)).max(0.0))
    }
}

/// Power iteration run until the estimate stabilizes (at most 2000 steps).
fn converged_power_iteration<F>(dim: usize, mut apply: F) -> f64
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let mut prev = 0.0;
    let mut v: Vec<f64> = (0..dim)
        .map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.618_033_988_749_895).fract())
        .collect();
    let n0 = linalg::norm(&v);
    linalg::scale(1.0 / n0, &mut v);
    for _ in 0..2000 {
        let w = apply(&v);
        let nw = linalg::norm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        v = w;
        linalg::scale(1.0 / nw, &mut v);
        if (nw - prev).abs() <= 1e-14 * nw {
            return nw;
        }
        prev = nw;
    }
    prev
}

impl FiniteSum for LinearModelProblem {
    fn name(&self) -> &str {
        &self.name
    }

    fn num_components(&self) -> usize {
        self.dataset.len()
    }

    fn dim(&self) -> usize {
        self.dataset.feature_dim()
    }

    fn component_value(&self, i: usize, x: &[f64]) -> f64 {
        let m = self.dataset.row(i).dot(x);
        let mut v = self.loss.value(m, self.dataset.label(i));
        if self.reg != 0.0 {
            v += 0.5 * self.reg * linalg::norm_sq(x);
        }
        v
    }

    fn add_component_gradient(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let row = self.dataset.row(i);
        let m = row.dot(x);
        row.axpy_into(self.loss.derivative(m, self.dataset.label(i)), out);
        if self.reg != 0.0 {
            linalg::axpy(self.reg, x, out);
        }
    }

    fn hessian_vector_product(&self, x: &[f64], v: &[f64]) -> Option<Vec<f64>> {
        let idx: Vec<usize> = (0..self.dataset.len()).collect();
        let mut hv = exec::sum_vectors(self.exec, &idx, self.dim(), |&i, acc| {
            let row = self.dataset.row(i);
            let w = self.loss.curvature(row.dot(x), self.dataset.label(i));
            row.axpy_into(w * row.dot(v), acc);
            Ok(())
        })
        .ok()?;
        linalg::scale(1.0 / self.dataset.len() as f64, &mut hv);
        linalg::axpy(self.reg, v, &mut hv);
        Some(hv)
    }

    fn hessian_diagonal(&self, x: &[f64]) -> Option<Vec<f64>> {
        let idx: Vec<usize> = (0..self.dataset.len()).collect();
        let mut diag = exec::sum_vectors(self.exec, &idx, self.dim(), |&i, acc| {
            let row = self.dataset.row(i);
            let w = self.loss.curvature(row.dot(x), self.dataset.label(i));
            row.for_each_entry(|j, a| acc[j] += w * a * a);
            Ok(())
        })
        .ok()?;
        let n = self.dataset.len() as f64;
        diag.iter_mut().for_each(|h| *h = *h / n + self.reg);
        Some(diag)
    }

    fn closed_form_constants(&self) -> Option<ClosedFormConstants> {
        let c = self.loss.curvature_bound();
        let lipschitz_grad = c * self.gram_spectral_norm() + self.reg;
        let lipschitz_component = (0..self.dataset.len())
            .map(|i| self.component_lipschitz(i))
            .fold(0.0, f64::max);
        let f_inf = match self.loss {
            Loss::LeastSquares => self.least_squares_infimum().unwrap_or(0.0),
            Loss::Logistic | Loss::RobustNonconvex => 0.0,
        };
        Some(ClosedFormConstants {
            lipschitz_grad,
            hessian_bound: lipschitz_grad,
            lipschitz_component,
            f_inf,
        })
    }
}

/// `f_i(x) = ½(a_iᵀx − y_i)² + (reg/2)‖x‖²`.
pub fn make_least_squares(dataset: Dataset, reg: f64) -> Result<LinearModelProblem> {
    LinearModelProblem::new(dataset, reg, Loss::LeastSquares)
}

/// `f_i(x) = ln(1 + exp(−y_i a_iᵀx)) + (reg/2)‖x‖²`, labels in {−1, +1}.
pub fn make_logistic(dataset: Dataset, reg: f64) -> Result<LinearModelProblem> {
    LinearModelProblem::new(dataset, reg, Loss::Logistic)
}

/// `f_i(x) = r_i²/(1 + r_i²) + (reg/2)‖x‖²` with `r_i = a_iᵀx − y_i`.
pub fn make_robust_nonconvex(dataset: Dataset, reg: f64) -> Result<LinearModelProblem> {
    LinearModelProblem::new(dataset, reg, Loss::RobustNonconvex)
}
