//! Co-regularized two-view spectral clustering.
//!
//! The joint objective over the voltage embedding H_v and the location
//! embedding H_l is
//!
//! ```text
//! J(H_v, H_l) = Tr(H_vᵀ L_v H_v) + Tr(H_lᵀ L_l H_l) − λ·Tr(H_v H_vᵀ H_l H_lᵀ)
//! ```
//!
//! and is minimized by alternating exact trace minimizations: with H_l fixed
//! the optimal H_v spans the k smallest eigenvectors of L_v − λ H_l H_lᵀ, and
//! symmetrically for H_l. The shifted matrix may be indefinite.

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cluster::{kmeans_pp, KMeansConfig, KMeansResult};
use crate::graph::SimilarityGraph;
use crate::spectral::{embed, embed_matrix, trace_objective, SpectralEmbedding};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinalView {
    #[default]
    Voltage,
    Location,
    /// Leading eigenvectors of the averaged projector (H_vH_vᵀ + H_lH_lᵀ)/2.
    Average,
}

impl std::str::FromStr for FinalView {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "voltage" => Ok(FinalView::Voltage),
            "location" => Ok(FinalView::Location),
            "average" => Ok(FinalView::Average),
            other => Err(Error::invalid(format!("unknown final view '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiViewConfig {
    /// Coupling multiplier λ ≥ 0.
    pub lambda_reg: f64,
    pub max_outer_iters: usize,
    /// Relative change of the joint objective that ends the iteration.
    pub tol: f64,
    pub final_view: FinalView,
}

impl Default for MultiViewConfig {
    fn default() -> Self {
        Self {
            lambda_reg: 0.5,
            max_outer_iters: 50,
            tol: 1e-9,
            final_view: FinalView::Voltage,
        }
    }
}

impl MultiViewConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_reg >= 0.0 && self.lambda_reg.is_finite()) {
            return Err(Error::invalid(format!(
                "lambda must be a finite non-negative number, got {}",
                self.lambda_reg
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewState {
    pub h_v: DMatrix<f64>,
    pub h_l: DMatrix<f64>,
    /// Joint objective at initialization and after every half-step.
    pub objective_trace: Vec<f64>,
    /// Disagreement −Tr(H_vH_vᵀH_lH_lᵀ) after every half-step.
    pub disagreement_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewOutcome {
    /// Embedding of the configured final view.
    pub embedding: SpectralEmbedding,
    pub state: MultiViewState,
    pub kmeans: KMeansResult,
}

/// −Tr(H_aH_aᵀ H_bH_bᵀ) = −‖H_aᵀH_b‖²_F.
pub fn disagreement(h_a: &DMatrix<f64>, h_b: &DMatrix<f64>) -> Result<f64> {
    if h_a.shape() != h_b.shape() {
        return Err(Error::invalid(format!(
            "embedding shapes differ: {:?} vs {:?}",
            h_a.shape(),
            h_b.shape()
        )));
    }
    Ok(-(h_a.transpose() * h_b).norm_squared())
}

/// L − λ·H Hᵀ, exactly symmetric.
pub fn combined_laplacian(l: &DMatrix<f64>, h_other: &DMatrix<f64>, lambda_reg: f64) -> Result<DMatrix<f64>> {
    let n = l.nrows();
    if l.ncols() != n || h_other.nrows() != n {
        return Err(Error::invalid(format!(
            "shape mismatch: L is {:?}, H is {:?}",
            l.shape(),
            h_other.shape()
        )));
    }
    if lambda_reg == 0.0 {
        return Ok(l.clone());
    }
    let hh = h_other * h_other.transpose();
    let mut out = l - hh * lambda_reg;
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = avg;
            out[(j, i)] = avg;
        }
    }
    Ok(out)
}

/// J(H_v, H_l).
pub fn joint_objective(
    l_v: &DMatrix<f64>,
    l_l: &DMatrix<f64>,
    h_v: &DMatrix<f64>,
    h_l: &DMatrix<f64>,
    lambda_reg: f64,
) -> f64 {
    trace_objective(l_v, h_v) + trace_objective(l_l, h_l) - lambda_reg * (h_v.transpose() * h_l).norm_squared()
}

/// Leading k eigenvectors of the averaged projector of both views.
fn average_embedding(h_v: &DMatrix<f64>, h_l: &DMatrix<f64>, k: usize) -> Result<SpectralEmbedding> {
    let p = (h_v * h_v.transpose() + h_l * h_l.transpose()) * 0.5;
    // Negate so that the largest projector eigenvalues come first.
    let mut emb = embed_matrix(&(-p), k)?;
    emb.eigenvalues_k.iter_mut().for_each(|v| *v = -*v);
    emb.next_eigenvalue = -emb.next_eigenvalue;
    Ok(emb)
}

/// Alternating minimization of the joint objective starting from the
/// single-view embeddings, then k-means++ on the final view's rows.
pub fn solve_multiview(
    g_v: &SimilarityGraph,
    g_l: &SimilarityGraph,
    k: usize,
    cfg: &MultiViewConfig,
    kmeans: &KMeansConfig,
    seed: u64,
) -> Result<MultiViewOutcome> {
    cfg.validate()?;
    if g_v.n() != g_l.n() {
        return Err(Error::invalid(format!(
            "views disagree on meter count: {} vs {}",
            g_v.n(),
            g_l.n()
        )));
    }
    let (l_v, l_l) = (&g_v.laplacian, &g_l.laplacian);
    let lambda = cfg.lambda_reg;

    let mut emb_v = embed(g_v, k)?;
    let mut emb_l = embed(g_l, k)?;
    let mut objective = joint_objective(l_v, l_l, &emb_v.x, &emb_l.x, lambda);
    let mut objective_trace = vec![objective];
    let mut disagreement_trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    // λ = 0 decouples the views; the initial embeddings are already optimal.
    if lambda == 0.0 {
        converged = true;
    }
    while !converged && iterations < cfg.max_outer_iters {
        iterations += 1;
        emb_v = embed_matrix(&combined_laplacian(l_v, &emb_l.x, lambda)?, k)?;
        objective_trace.push(joint_objective(l_v, l_l, &emb_v.x, &emb_l.x, lambda));
        disagreement_trace.push(disagreement(&emb_v.x, &emb_l.x)?);

        emb_l = embed_matrix(&combined_laplacian(l_l, &emb_v.x, lambda)?, k)?;
        let next = joint_objective(l_v, l_l, &emb_v.x, &emb_l.x, lambda);
        objective_trace.push(next);
        disagreement_trace.push(disagreement(&emb_v.x, &emb_l.x)?);

        converged = (objective - next).abs() <= cfg.tol * objective.abs().max(1.0);
        objective = next;
    }
    if !converged {
        warn!(
            "co-regularized spectral clustering stopped after {} iterations without meeting tol {}",
            iterations, cfg.tol
        );
    }

    let embedding = match cfg.final_view {
        FinalView::Voltage => emb_v.clone(),
        FinalView::Location => emb_l.clone(),
        FinalView::Average => average_embedding(&emb_v.x, &emb_l.x, k)?,
    };
    let km = kmeans_pp(&embedding.x, k, seed, kmeans)?;
    Ok(MultiViewOutcome {
        embedding,
        state: MultiViewState {
            h_v: emb_v.x,
            h_l: emb_l.x,
            objective_trace,
            disagreement_trace,
            iterations,
            converged,
        },
        kmeans: km,
    })
}
