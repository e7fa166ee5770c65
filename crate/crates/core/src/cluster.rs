//! k-means++ labeling, cluster-to-transformer assignment, and evaluation
//! against ground truth.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geo::{haversine, GeoPoint};
use crate::ingest::{GroundTruth, MeterDataset, TransformerSet};
use crate::{Error, Result, VERSION};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub restarts: usize,
    /// Relative inertia change below which Lloyd iterations stop.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            tol: 1e-9,
            max_iter: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    /// k×d.
    pub centroids: DMatrix<f64>,
    pub inertia: f64,
    pub seed: u64,
    pub restarts_used: usize,
    /// Index of the winning restart.
    pub best_restart: usize,
    /// Inertia after every assignment step of the winning restart.
    pub inertia_history: Vec<f64>,
}

fn sq_dist(points: &DMatrix<f64>, i: usize, centroids: &DMatrix<f64>, c: usize) -> f64 {
    (0..points.ncols())
        .map(|d| {
            let diff = points[(i, d)] - centroids[(c, d)];
            diff * diff
        })
        .sum()
}

fn nearest(points: &DMatrix<f64>, i: usize, centroids: &DMatrix<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.nrows() {
        let d = sq_dist(points, i, centroids, c);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn assign(points: &DMatrix<f64>, centroids: &DMatrix<f64>) -> (Vec<usize>, f64) {
    let mut inertia = 0.0;
    let labels = (0..points.nrows())
        .map(|i| {
            let (c, d) = nearest(points, i, centroids);
            inertia += d;
            c
        })
        .collect();
    (labels, inertia)
}

fn inertia_of(points: &DMatrix<f64>, labels: &[usize], centroids: &DMatrix<f64>) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &c)| sq_dist(points, i, centroids, c))
        .sum()
}

/// Cluster means; rows of empty clusters keep their previous value.
fn means(points: &DMatrix<f64>, labels: &[usize], previous: &DMatrix<f64>) -> DMatrix<f64> {
    let k = previous.nrows();
    let mut sums = DMatrix::zeros(k, points.ncols());
    let mut counts = vec![0usize; k];
    for (i, &c) in labels.iter().enumerate() {
        counts[c] += 1;
        for d in 0..points.ncols() {
            sums[(c, d)] += points[(i, d)];
        }
    }
    for c in 0..k {
        if counts[c] == 0 {
            sums.set_row(c, &previous.row(c));
        } else {
            let n = counts[c] as f64;
            for d in 0..points.ncols() {
                sums[(c, d)] /= n;
            }
        }
    }
    sums
}

/// D² seeding.
fn seed_centroids(points: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = points.nrows();
    let mut centroids = DMatrix::zeros(k, points.ncols());
    let first = rng.random_range(0..n);
    centroids.set_row(0, &points.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(points, i, &centroids, 0)).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centroids.set_row(c, &points.row(pick));
        for (i, slot) in d2.iter_mut().enumerate() {
            *slot = slot.min(sq_dist(points, i, &centroids, c));
        }
    }
    centroids
}

struct Run {
    labels: Vec<usize>,
    centroids: DMatrix<f64>,
    inertia: f64,
    history: Vec<f64>,
}

/// Moves every empty cluster onto the point farthest from its own centroid
/// and assigns that point to it.
fn fill_empty(points: &DMatrix<f64>, labels: &mut [usize], centroids: &mut DMatrix<f64>) -> bool {
    let k = centroids.nrows();
    let mut changed = false;
    for c in 0..k {
        if labels.iter().any(|&l| l == c) {
            continue;
        }
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        // Only take points from clusters that can spare one.
        let far = (0..points.nrows())
            .filter(|&i| counts[labels[i]] > 1)
            .map(|i| (i, sq_dist(points, i, centroids, labels[i])))
            .fold(None::<(usize, f64)>, |best, (i, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            });
        if let Some((i, _)) = far {
            centroids.set_row(c, &points.row(i));
            labels[i] = c;
            changed = true;
        }
    }
    changed
}

fn lloyd(points: &DMatrix<f64>, init: DMatrix<f64>, cfg: &KMeansConfig) -> Run {
    let mut centroids = init;
    let (mut labels, mut inertia) = assign(points, &centroids);
    let mut history = vec![inertia];
    for _ in 0..cfg.max_iter {
        if fill_empty(points, &mut labels, &mut centroids) {
            inertia = inertia_of(points, &labels, &centroids);
            history.push(inertia);
        }
        let next_centroids = means(points, &labels, &centroids);
        let (next_labels, next_inertia) = assign(points, &next_centroids);
        history.push(next_inertia);
        let converged = next_labels == labels
            || (inertia - next_inertia).abs() <= cfg.tol * inertia.max(f64::MIN_POSITIVE);
        centroids = next_centroids;
        labels = next_labels;
        inertia = next_inertia;
        if converged {
            break;
        }
    }
    if fill_empty(points, &mut labels, &mut centroids) {
        centroids = means(points, &labels, &centroids);
        inertia = inertia_of(points, &labels, &centroids);
        history.push(inertia);
    }
    Run {
        labels,
        centroids,
        inertia,
        history,
    }
}

/// Restart `r` draws from stream `r` of a ChaCha8 generator keyed by `seed`.
fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// k-means++ seeding followed by Lloyd iterations, best of `cfg.restarts` by
/// inertia (ties to the lowest restart index).
pub fn kmeans_pp(
    points: &DMatrix<f64>,
    k: usize,
    seed: u64,
    cfg: &KMeansConfig,
) -> Result<KMeansResult> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} must satisfy 1 <= k <= N = {n}")));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("k-means input has non-finite values"));
    }
    let restarts = cfg.restarts.max(1);
    let runs: Vec<Run> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(seed, r);
            let init = seed_centroids(points, k, &mut rng);
            lloyd(points, init, cfg)
        })
        .collect();
    let (best_restart, best) = runs
        .into_iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| a.inertia.total_cmp(&b.inertia).then(ia.cmp(ib)))
        .expect("at least one restart");
    Ok(KMeansResult {
        labels: best.labels,
        centroids: best.centroids,
        inertia: best.inertia,
        seed,
        restarts_used: restarts,
        best_restart,
        inertia_history: best.history,
    })
}

/// Minimum-cost assignment of rows to distinct columns (rows ≤ cols).
/// Returns the column chosen for every row.
pub fn min_cost_assignment(cost: &DMatrix<f64>) -> Vec<usize> {
    let (rows, cols) = cost.shape();
    if rows > cols {
        let t = min_cost_assignment(&cost.transpose());
        let mut out = vec![usize::MAX; rows];
        for (c, &r) in t.iter().enumerate() {
            out[r] = c;
        }
        return out;
    }
    // Shortest augmenting path formulation with potentials, 1-based sentinels.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut p = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=cols {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![usize::MAX; rows];
    for j in 1..=cols {
        if p[j] != 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Spectral,
    Multiview,
    KmeansBaseline,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(Method::Spectral),
            "multiview" => Ok(Method::Multiview),
            "kmeans-baseline" => Ok(Method::KmeansBaseline),
            other => Err(Error::invalid(format!("unknown method '{other}'"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Spectral => "spectral",
            Method::Multiview => "multiview",
            Method::KmeansBaseline => "kmeans-baseline",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappingResult {
    pub meter_ids: Vec<String>,
    /// Cluster index per meter, in [0, k).
    pub labels: Vec<usize>,
    pub k: usize,
    /// Transformer id per cluster; absent when locations are unavailable.
    pub assignment: Option<Vec<String>>,
    /// k×d centroids in the clustered space.
    pub centroids_embedding: DMatrix<f64>,
    pub centroids_geo: Option<Vec<GeoPoint>>,
    pub seed: u64,
    pub restarts_used: usize,
    pub inertia: f64,
    pub method: Method,
}

impl MappingResult {
    /// meter_id → xfmr_id, when an assignment exists.
    pub fn mapping(&self) -> Option<BTreeMap<String, String>> {
        let assignment = self.assignment.as_ref()?;
        Some(
            self.meter_ids
                .iter()
                .zip(&self.labels)
                .map(|(m, &c)| (m.clone(), assignment[c].clone()))
                .collect(),
        )
    }

    pub fn to_json(&self) -> MappingFile {
        let meters = self
            .meter_ids
            .iter()
            .zip(&self.labels)
            .map(|(m, &c)| {
                (
                    m.clone(),
                    MeterEntry {
                        cluster: c,
                        transformer: self.assignment.as_ref().map(|a| a[c].clone()),
                    },
                )
            })
            .collect();
        MappingFile {
            meters,
            seed: self.seed,
            k: self.k,
            method: self.method,
            version: VERSION.to_owned(),
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        write_json(path, &self.to_json())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeterEntry {
    pub cluster: usize,
    pub transformer: Option<String>,
}

/// On-disk `mapping.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingFile {
    pub meters: BTreeMap<String, MeterEntry>,
    pub seed: u64,
    pub k: usize,
    pub method: Method,
    pub version: String,
}

impl MappingFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn meter_ids(&self) -> Vec<String> {
        self.meters.keys().cloned().collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.meters.values().map(|e| e.cluster).collect()
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Arithmetic mean of member coordinates, per cluster.
pub fn geo_centroids(labels: &[usize], k: usize, locations: &[GeoPoint]) -> Result<Vec<GeoPoint>> {
    let mut sums = vec![(0.0, 0.0, 0usize); k];
    for (&c, p) in labels.iter().zip(locations) {
        sums[c].0 += p.lat;
        sums[c].1 += p.lon;
        sums[c].2 += 1;
    }
    sums.into_iter()
        .enumerate()
        .map(|(c, (lat, lon, n))| {
            if n == 0 {
                return Err(Error::invalid(format!("cluster {c} is empty")));
            }
            GeoPoint::new(lat / n as f64, lon / n as f64)
        })
        .collect()
}

/// Maps each cluster to a transformer by Haversine distance between the
/// cluster's geographic centroid and the transformer. With as many clusters
/// as transformers the mapping is one-to-one (minimum total distance when
/// nearest choices collide); otherwise every cluster takes its nearest.
pub fn match_clusters_to_transformers(centroids: &[GeoPoint], xfmrs: &TransformerSet) -> Vec<usize> {
    let cost = DMatrix::from_fn(centroids.len(), xfmrs.len(), |c, j| {
        haversine(centroids[c], xfmrs.locations[j])
    });
    let nearest: Vec<usize> = (0..centroids.len())
        .map(|c| {
            (0..xfmrs.len())
                .min_by(|&a, &b| cost[(c, a)].total_cmp(&cost[(c, b)]).then(a.cmp(&b)))
                .expect("non-empty transformer set")
        })
        .collect();
    if centroids.len() != xfmrs.len() {
        return nearest;
    }
    let mut seen = vec![false; xfmrs.len()];
    let collision = nearest.iter().any(|&j| std::mem::replace(&mut seen[j], true));
    if collision {
        min_cost_assignment(&cost)
    } else {
        nearest
    }
}

/// Turns cluster labels into a meter → transformer mapping.
pub fn assign_transformers(
    km: &KMeansResult,
    k: usize,
    data: &MeterDataset,
    xfmrs: Option<&TransformerSet>,
    method: Method,
) -> Result<MappingResult> {
    if km.labels.len() != data.n_meters() {
        return Err(Error::invalid("labels do not match the dataset"));
    }
    let (assignment, centroids_geo) = match (data.locations.as_deref(), xfmrs) {
        (Some(locs), Some(xfmrs)) => {
            let centroids = geo_centroids(&km.labels, k, locs)?;
            let chosen = match_clusters_to_transformers(&centroids, xfmrs);
            let ids = chosen.iter().map(|&j| xfmrs.xfmr_ids[j].clone()).collect();
            (Some(ids), Some(centroids))
        }
        _ => (None, None),
    };
    Ok(MappingResult {
        meter_ids: data.meter_ids.clone(),
        labels: km.labels.clone(),
        k,
        assignment,
        centroids_embedding: km.centroids.clone(),
        centroids_geo,
        seed: km.seed,
        restarts_used: km.restarts_used,
        inertia: km.inertia,
        method,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub exact_recovery: bool,
    /// Fraction of meters correct under the best cluster ↔ transformer matching.
    pub accuracy: f64,
    /// Rows: predicted clusters, columns: true transformers.
    pub confusion: Vec<Vec<usize>>,
}

/// Accuracy of `pred` against `truth`, maximized over label permutations.
pub fn evaluate_labels(pred: &[usize], k_pred: usize, truth: &[usize], k_truth: usize) -> Result<EvalReport> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::invalid(format!(
            "meter-set mismatch: {} predicted vs {} true labels",
            pred.len(),
            truth.len()
        )));
    }
    let mut confusion = vec![vec![0usize; k_truth]; k_pred];
    for (&p, &t) in pred.iter().zip(truth) {
        if p >= k_pred || t >= k_truth {
            return Err(Error::invalid("label out of range"));
        }
        confusion[p][t] += 1;
    }
    let cost = DMatrix::from_fn(k_pred, k_truth, |i, j| -(confusion[i][j] as f64));
    let matched: usize = min_cost_assignment(&cost)
        .iter()
        .enumerate()
        .filter(|(_, &j)| j != usize::MAX)
        .map(|(i, &j)| confusion[i][j])
        .sum();
    Ok(EvalReport {
        exact_recovery: matched == pred.len(),
        accuracy: matched as f64 / pred.len() as f64,
        confusion,
    })
}

pub fn evaluate(pred: &MappingResult, truth: &GroundTruth) -> Result<EvalReport> {
    let truth_labels = truth.labels_for(&pred.meter_ids)?;
    evaluate_labels(&pred.labels, pred.k, &truth_labels, truth.k())
}
