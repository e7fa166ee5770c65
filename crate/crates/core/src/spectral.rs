//! Eigendecomposition of graph Laplacians and the k-smallest-eigenvector embedding.
//!
//! The embedding X (N×k) minimizes Tr(HᵀLH) over all H with orthonormal
//! columns; its rows are the points handed to k-means++. When the k smallest
//! eigenvalues coincide only the spanned subspace is meaningful, so callers
//! must not rely on individual columns.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::graph::SimilarityGraph;
use crate::linalg::{quadratic_trace, symmetric_eigen};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    /// Ascending.
    pub eigenvalues: DVector<f64>,
    /// Orthonormal columns aligned with `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedding {
    /// N×k eigenvectors of the k smallest eigenvalues.
    pub x: DMatrix<f64>,
    pub eigenvalues_k: Vec<f64>,
    /// λ_{k+1}.
    pub next_eigenvalue: f64,
}

impl SpectralEmbedding {
    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    /// Rows of X next to their meter ids: `meter_id,x_0,...,x_{k-1}`.
    pub fn write_csv(&self, meter_ids: &[String], path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let err = |e: csv::Error| Error::csv(path, e.to_string());
        let mut header = vec!["meter_id".to_owned()];
        header.extend((0..self.k()).map(|j| format!("x_{j}")));
        w.write_record(&header).map_err(err)?;
        for (i, id) in meter_ids.iter().enumerate() {
            let mut row = vec![id.clone()];
            row.extend(self.x.row(i).iter().map(|v| v.to_string()));
            w.write_record(&row).map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

impl EigenDecomposition {
    /// Decomposes any symmetric matrix; indefinite inputs are fine.
    pub fn of_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let (eigenvalues, eigenvectors) = symmetric_eigen(m)?;
        Ok(Self {
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Embedding from the first k eigenpairs; requires 1 ≤ k < N.
    pub fn leading(&self, k: usize) -> Result<SpectralEmbedding> {
        let n = self.n();
        if k == 0 || k >= n {
            return Err(Error::invalid(format!("k = {k} must satisfy 1 <= k < N = {n}")));
        }
        Ok(SpectralEmbedding {
            x: self.eigenvectors.columns(0, k).into_owned(),
            eigenvalues_k: self.eigenvalues.iter().take(k).copied().collect(),
            next_eigenvalue: self.eigenvalues[k],
        })
    }
}

pub fn eigendecompose(g: &SimilarityGraph) -> Result<EigenDecomposition> {
    EigenDecomposition::of_matrix(&g.laplacian)
}

/// Spectral embedding of a graph: eigenvectors of the k smallest Laplacian eigenvalues.
pub fn embed(g: &SimilarityGraph, k: usize) -> Result<SpectralEmbedding> {
    embed_matrix(&g.laplacian, k)
}

pub fn embed_matrix(m: &DMatrix<f64>, k: usize) -> Result<SpectralEmbedding> {
    let n = m.nrows();
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("k = {k} must satisfy 1 <= k < N = {n}")));
    }
    EigenDecomposition::of_matrix(m)?.leading(k)
}

/// Tr(HᵀLH).
pub fn trace_objective(l: &DMatrix<f64>, h: &DMatrix<f64>) -> f64 {
    quadratic_trace(l, h)
}
