//! End-to-end mapping: similarity graph → embedding → k-means++ → transformer assignment.

use crate::cluster::{assign_transformers, evaluate, kmeans_pp, EvalReport, KMeansConfig, MappingResult, Method};
use crate::feeder_sim::{simulate, FeederSpec};
use crate::geo::GeoMetric;
use crate::graph::{location_similarity, voltage_similarity, Scale, SimilarityGraph};
use crate::ingest::{MeterDataset, TransformerSet};
use crate::multiview::{solve_multiview, MultiViewConfig, MultiViewState};
use crate::spectral::{embed, SpectralEmbedding};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOptions {
    pub k: usize,
    pub method: Method,
    pub sigma: Scale,
    pub sigma_l: Scale,
    pub geo_metric: GeoMetric,
    pub multiview: MultiViewConfig,
    pub kmeans: KMeansConfig,
    pub seed: u64,
}

impl ClusterOptions {
    pub fn new(k: usize, method: Method, seed: u64) -> Self {
        Self {
            k,
            method,
            sigma: Scale::Auto,
            sigma_l: Scale::Auto,
            geo_metric: GeoMetric::Haversine,
            multiview: MultiViewConfig::default(),
            kmeans: KMeansConfig::default(),
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub mapping: MappingResult,
    /// Voltage-view graph; absent for the raw k-means baseline.
    pub graph: Option<SimilarityGraph>,
    /// Embedding the labels were computed from.
    pub embedding: Option<SpectralEmbedding>,
    pub multiview: Option<MultiViewState>,
}

/// Clusters the meters of `data` into `opts.k` groups and, when transformer
/// and meter locations are known, names each group after its transformer.
pub fn run(data: &MeterDataset, xfmrs: Option<&TransformerSet>, opts: &ClusterOptions) -> Result<PipelineOutput> {
    let n = data.n_meters();
    if opts.k == 0 || opts.k > n {
        return Err(Error::invalid(format!("k = {} must satisfy 1 <= k <= N = {n}", opts.k)));
    }
    if let Some(x) = xfmrs {
        if x.len() < opts.k {
            return Err(Error::invalid(format!(
                "{} transformers cannot host {} clusters",
                x.len(),
                opts.k
            )));
        }
    }
    match opts.method {
        Method::KmeansBaseline => {
            let km = kmeans_pp(&data.voltages, opts.k, opts.seed, &opts.kmeans)?;
            Ok(PipelineOutput {
                mapping: assign_transformers(&km, opts.k, data, xfmrs, opts.method)?,
                graph: None,
                embedding: None,
                multiview: None,
            })
        }
        Method::Spectral => {
            let g = voltage_similarity(data, opts.sigma)?;
            let emb = embed_k(&g, opts.k)?;
            let km = kmeans_pp(&emb.x, opts.k, opts.seed, &opts.kmeans)?;
            Ok(PipelineOutput {
                mapping: assign_transformers(&km, opts.k, data, xfmrs, opts.method)?,
                graph: Some(g),
                embedding: Some(emb),
                multiview: None,
            })
        }
        Method::Multiview => {
            if data.locations.is_none() {
                return Err(Error::invalid("multiview clustering needs meter locations"));
            }
            let g_v = voltage_similarity(data, opts.sigma)?;
            let g_l = location_similarity(data, opts.sigma_l, opts.geo_metric)?;
            let out = solve_multiview(&g_v, &g_l, opts.k, &opts.multiview, &opts.kmeans, opts.seed)?;
            Ok(PipelineOutput {
                mapping: assign_transformers(&out.kmeans, opts.k, data, xfmrs, opts.method)?,
                graph: Some(g_v),
                embedding: Some(out.embedding),
                multiview: Some(out.state),
            })
        }
    }
}

/// Spectral embedding that also accepts k = N (every meter its own cluster).
fn embed_k(g: &SimilarityGraph, k: usize) -> Result<SpectralEmbedding> {
    if k < g.n() {
        return embed(g, k);
    }
    let e = crate::spectral::eigendecompose(g)?;
    Ok(SpectralEmbedding {
        x: e.eigenvectors.clone(),
        eigenvalues_k: e.eigenvalues.iter().copied().collect(),
        next_eigenvalue: f64::INFINITY,
    })
}

/// Simulates a feeder, clusters it with `opts` (k taken from the spec) and
/// scores the result against the simulator's ground truth.
pub fn simulate_and_evaluate(spec: &FeederSpec, opts: &ClusterOptions) -> Result<EvalReport> {
    let sim = simulate(spec)?;
    let opts = ClusterOptions {
        k: spec.k,
        ..opts.clone()
    };
    let out = run(&sim.dataset, Some(&sim.transformers), &opts)?;
    evaluate(&out.mapping, &sim.truth)
}
