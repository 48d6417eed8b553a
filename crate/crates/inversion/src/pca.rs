use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::InversionError;

/// Mean and leading principal directions of an embedding table.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSubspace {
    pub mean: DVector<f64>,
    /// `D × d`, orthonormal columns.
    pub basis: DMatrix<f64>,
    /// Non-increasing, non-negative.
    pub eigenvalues: Vec<f64>,
}

impl EmbeddingSubspace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// `W_p q`.
    pub fn lift(&self, q: &[f64]) -> DVector<f64> {
        &self.basis * DVector::from_column_slice(q)
    }

    /// `W_pᵀ v`.
    pub fn coefficients(&self, v: &DVector<f64>) -> DVector<f64> {
        self.basis.tr_mul(v)
    }

    /// Norm of the part of `v` outside the span of the basis.
    pub fn residual_norm(&self, v: &DVector<f64>) -> f64 {
        (v - &self.basis * self.coefficients(v)).norm()
    }
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
fn canonical_sign(mut v: DVector<f64>) -> DVector<f64> {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
    v
}

/// Top-`d` principal components of the rows of `embeddings` (sample
/// covariance, divisor `V − 1`). Uses the `D × D` covariance when
/// `D ≤ V` and the `V × V` Gram matrix otherwise.
pub fn pca_fit(embeddings: &DMatrix<f64>, d: usize) -> Result<EmbeddingSubspace, InversionError> {
    let (v, dim) = embeddings.shape();
    if d == 0 || d >= v || d > dim {
        return Err(InversionError::InvalidArgument(format!(
            "subspace dimension {d} needs 1 <= d < V={v} and d <= D={dim}"
        )));
    }
    let mean = embeddings.row_mean().transpose();
    let mut centered = embeddings.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let denom = (v - 1) as f64;
    let (values, vectors) = if dim <= v {
        let cov = centered.tr_mul(&centered) / denom;
        let eig = SymmetricEigen::new(cov);
        (eig.eigenvalues, eig.eigenvectors)
    } else {
        let gram = &centered * centered.transpose() / denom;
        let eig = SymmetricEigen::new(gram);
        let mut vectors = centered.tr_mul(&eig.eigenvectors);
        for mut c in vectors.column_iter_mut() {
            let n = c.norm();
            if n > 0.0 {
                c /= n;
            }
        }
        (eig.eigenvalues, vectors)
    };
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut basis = DMatrix::zeros(dim, d);
    let mut eigenvalues = Vec::with_capacity(d);
    for (k, &i) in order.iter().take(d).enumerate() {
        basis.set_column(k, &canonical_sign(vectors.column(i).into_owned()));
        eigenvalues.push(values[i].max(0.0));
    }
    if basis.iter().any(|x| !x.is_finite()) {
        return Err(InversionError::InvalidArgument(
            "principal directions are undefined for this table".into(),
        ));
    }
    Ok(EmbeddingSubspace {
        mean,
        basis,
        eigenvalues,
    })
}
