use crate::error::{Error, Result};

/// One feature vector, stored densely or as sorted `(index, value)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub enum Row {
    Dense(Vec<f64>),
    Sparse {
        indices: Vec<usize>,
        values: Vec<f64>,
    },
}

impl Row {
    pub fn dot(&self, x: &[f64]) -> f64 {
        match self {
            Row::Dense(a) => crate::linalg::dot(a, x),
            Row::Sparse { indices, values } => {
                indices.iter().zip(values).map(|(&j, v)| v * x[j]).sum()
            }
        }
    }

    /// `out += alpha * row`
    pub fn axpy_into(&self, alpha: f64, out: &mut [f64]) {
        match self {
            Row::Dense(a) => crate::linalg::axpy(alpha, a, out),
            Row::Sparse { indices, values } => {
                for (&j, v) in indices.iter().zip(values) {
                    out[j] += alpha * v;
                }
            }
        }
    }

    pub fn norm_sq(&self) -> f64 {
        match self {
            Row::Dense(a) => crate::linalg::norm_sq(a),
            Row::Sparse { values, .. } => crate::linalg::norm_sq(values),
        }
    }

    /// Visits stored `(index, value)` pairs in increasing index order.
    pub fn for_each_entry(&self, mut f: impl FnMut(usize, f64)) {
        match self {
            Row::Dense(a) => a.iter().enumerate().for_each(|(j, &v)| f(j, v)),
            Row::Sparse { indices, values } => {
                indices.iter().zip(values).for_each(|(&j, &v)| f(j, v))
            }
        }
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        self.axpy_into(1.0, &mut out);
        out
    }

    fn scale(&mut self, c: f64) {
        let vals = match self {
            Row::Dense(a) => a,
            Row::Sparse { values, .. } => values,
        };
        vals.iter_mut().for_each(|v| *v *= c);
    }
}

/// Feature rows with one label each.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Vec<Row>,
    labels: Vec<f64>,
    feature_dim: usize,
}

impl Dataset {
    pub fn new(rows: Vec<Row>, labels: Vec<f64>, feature_dim: usize) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Input(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        for (r, row) in rows.iter().enumerate() {
            match row {
                Row::Dense(a) if a.len() != feature_dim => {
                    return Err(Error::Input(format!(
                        "row {r} has length {}, expected {feature_dim}",
                        a.len()
                    )));
                }
                Row::Sparse { indices, values } => {
                    if indices.len() != values.len() {
                        return Err(Error::Input(format!(
                            "row {r}: index/value length mismatch"
                        )));
                    }
                    if indices.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(Error::Input(format!(
                            "row {r}: indices not strictly increasing"
                        )));
                    }
                    if indices.last().is_some_and(|&j| j >= feature_dim) {
                        return Err(Error::Input(format!("row {r}: index out of range")));
                    }
                }
                _ => {}
            }
        }
        Ok(Self {
            rows,
            labels,
            feature_dim,
        })
    }

    /// Dense dataset from row vectors.
    pub fn from_dense(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        Self::new(rows.into_iter().map(Row::Dense).collect(), labels, dim)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &Row {
        &self.rows[i]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    /// Rescales every nonzero row to unit Euclidean norm.
    pub fn normalize_rows(&mut self) {
        for row in &mut self.rows {
            let n = row.norm_sq().sqrt();
            if n > 0.0 {
                row.scale(1.0 / n);
            }
        }
    }

    /// First `n` rows.
    pub fn truncated(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            rows: self.rows[..n].to_vec(),
            labels: self.labels[..n].to_vec(),
            feature_dim: self.feature_dim,
        }
    }
}
