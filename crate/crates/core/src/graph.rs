//! Similarity graphs and unnormalized Laplacians for the voltage, location and
//! ideal (ground-truth) views.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::geo::GeoMetric;
use crate::ingest::{GroundTruth, MeterDataset};
use crate::linalg::asymmetry;
use crate::{Error, Result};

/// Largest tolerated |m_ij − m_ji| before a similarity matrix is rejected.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Voltage,
    Location,
    Ideal,
}

/// Kernel scale: a fixed positive value or the median pairwise distance.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Scale {
    #[default]
    Auto,
    Fixed(f64),
}

impl std::str::FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Scale::Auto);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::invalid(format!("scale must be a number or 'auto', got '{s}'")))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("scale must be positive, got {v}")));
        }
        Ok(Scale::Fixed(v))
    }
}

impl std::fmt::Display for Scale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scale::Auto => f.write_str("auto"),
            Scale::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for Scale {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Scale::Auto => s.serialize_str("auto"),
            Scale::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Scale {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Scale::Fixed(v).validated().map_err(serde::de::Error::custom),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl Scale {
    fn validated(self) -> Result<Self> {
        match self {
            Scale::Fixed(v) if !(v > 0.0 && v.is_finite()) => {
                Err(Error::invalid(format!("scale must be positive, got {v}")))
            }
            s => Ok(s),
        }
    }

    /// Resolves against a symmetric distance matrix.
    pub fn resolve(self, distances: &DMatrix<f64>) -> Result<f64> {
        match self.validated()? {
            Scale::Fixed(v) => Ok(v),
            Scale::Auto => Ok(median_scale(distances)),
        }
    }
}

/// Median of the strictly upper-triangular distances. Falls back to the mean
/// of the positive distances when the median is zero, and to 1 when every
/// distance is zero.
pub fn median_scale(distances: &DMatrix<f64>) -> f64 {
    let n = distances.nrows();
    let mut d: Vec<f64> = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            d.push(distances[(i, j)]);
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    let median = if d.len() % 2 == 0 {
        0.5 * (d[mid - 1] + d[mid])
    } else {
        d[mid]
    };
    if median > 0.0 {
        return median;
    }
    let positive: Vec<f64> = d.into_iter().filter(|&x| x > 0.0).collect();
    if positive.is_empty() {
        1.0
    } else {
        positive.iter().sum::<f64>() / positive.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    /// Symmetric N×N similarities in [0, 1] with unit diagonal.
    pub similarity: DMatrix<f64>,
    /// Degrees d_ii = Σ_j m_ij.
    pub degree: DVector<f64>,
    /// L = D − M.
    pub laplacian: DMatrix<f64>,
    pub view: View,
    /// Kernel scale actually used; `None` for the ideal graph.
    pub sigma: Option<f64>,
}

impl SimilarityGraph {
    pub fn n(&self) -> usize {
        self.similarity.nrows()
    }

    /// The graph with vertices reordered: vertex `i` of the result is vertex `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let m = self.similarity.select_rows(perm).select_columns(perm);
        laplacian(m, self.view, self.sigma).expect("permutation preserves validity")
    }

    /// Writes M as a dense CSV without header.
    pub fn write_similarity_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        for i in 0..self.n() {
            w.write_record(self.similarity.row(i).iter().map(|v| v.to_string()))
                .map_err(|e| Error::csv(path, e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Builds degree and Laplacian for a similarity matrix.
pub fn laplacian(m: DMatrix<f64>, view: View, sigma: Option<f64>) -> Result<SimilarityGraph> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::invalid(format!(
            "similarity matrix must be square, got {}x{}",
            n,
            m.ncols()
        )));
    }
    if let Some(bad) = m.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
        return Err(Error::invalid(format!("similarity entry {bad} outside [0, 1]")));
    }
    let asym = asymmetry(&m);
    if asym > SYMMETRY_TOL {
        return Err(Error::invalid(format!(
            "similarity matrix asymmetric by {asym:e}"
        )));
    }
    // Symmetrize exactly so that L is exactly symmetric.
    let m = DMatrix::from_fn(n, n, |i, j| if i <= j { m[(i, j)] } else { m[(j, i)] });
    let degree = DVector::from_iterator(n, m.row_iter().map(|r| r.sum()));
    let mut lap = -&m;
    for i in 0..n {
        // Off-diagonal row sum written directly keeps the row sums at rounding level.
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)]).sum();
        lap[(i, i)] = off;
    }
    Ok(SimilarityGraph {
        similarity: m,
        degree,
        laplacian: lap,
        view,
        sigma,
    })
}

/// Gaussian kernel exp(−d²/σ²) with unit diagonal.
pub fn gaussian_kernel(distances: &DMatrix<f64>, sigma: f64) -> DMatrix<f64> {
    let n = distances.nrows();
    let s2 = sigma * sigma;
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            let d = distances[(i.min(j), i.max(j))];
            (-(d * d) / s2).exp()
        }
    })
}

/// Pairwise Euclidean distances between rows.
pub fn row_distances(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let dist = (x.row(i) - x.row(j)).norm();
            d[(i, j)] = dist;
            d[(j, i)] = dist;
        }
    }
    d
}

/// Similarity over voltage profiles: m_ij = exp(−‖v_i − v_j‖² / σ²).
pub fn voltage_similarity(data: &MeterDataset, sigma: Scale) -> Result<SimilarityGraph> {
    if data.n_meters() < 2 {
        return Err(Error::invalid("need at least 2 meters"));
    }
    if data.voltages.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite voltage"));
    }
    let d = row_distances(&data.voltages);
    let s = sigma.resolve(&d)?;
    laplacian(gaussian_kernel(&d, s), View::Voltage, Some(s))
}

/// Pairwise geodesic distances (km) between meter locations.
pub fn geo_distances(data: &MeterDataset, metric: GeoMetric) -> Result<DMatrix<f64>> {
    let locs = data
        .locations
        .as_ref()
        .ok_or_else(|| Error::invalid("dataset has no meter locations"))?;
    let n = locs.len();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let dist = metric.distance_km(locs[i], locs[j]);
            d[(i, j)] = dist;
            d[(j, i)] = dist;
        }
    }
    Ok(d)
}

/// Similarity over meter locations with the same Gaussian kernel; σ in km.
pub fn location_similarity(
    data: &MeterDataset,
    sigma_l: Scale,
    metric: GeoMetric,
) -> Result<SimilarityGraph> {
    let d = geo_distances(data, metric)?;
    let s = sigma_l.resolve(&d)?;
    laplacian(gaussian_kernel(&d, s), View::Location, Some(s))
}

/// Binary graph linking meters fed by the same transformer.
pub fn ideal_graph(truth: &GroundTruth) -> SimilarityGraph {
    ideal_graph_from_labels(&truth.labels)
}

pub fn ideal_graph_from_labels(labels: &[usize]) -> SimilarityGraph {
    let n = labels.len();
    let m = DMatrix::from_fn(n, n, |i, j| if labels[i] == labels[j] { 1.0 } else { 0.0 });
    laplacian(m, View::Ideal, None).expect("binary symmetric matrix is a valid similarity")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;
    use crate::linalg::symmetric_eigen;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset(rows: &[&[f64]]) -> MeterDataset {
        let n = rows.len();
        let t = rows[0].len();
        MeterDataset::new(
            (0..n).map(|i| format!("m{i}")).collect(),
            DMatrix::from_fn(n, t, |i, j| rows[i][j]),
            None,
            (0..t).map(|j| format!("t_{j}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn kernel_values() {
        let ds = dataset(&[&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.5]]);
        let g = voltage_similarity(&ds, Scale::Fixed(0.5)).unwrap();
        assert_eq!(g.similarity[(0, 1)], 1.0);
        assert_relative_eq!(g.similarity[(0, 2)], (-1.0f64).exp(), max_relative = 1e-15);
        assert_eq!(g.sigma, Some(0.5));
        for i in 0..3 {
            assert_eq!(g.similarity[(i, i)], 1.0);
        }
    }

    #[test]
    fn direct_substitution() {
        // v_i = (1, 1), v_j = (1, 2), sigma = 1: d^2 = 1.
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0]);
        let m = gaussian_kernel(&row_distances(&x), 1.0);
        assert_relative_eq!(m[(0, 1)], (-1.0f64).exp(), max_relative = 1e-15);
        assert!((m[(0, 1)] - 0.367879).abs() < 5e-7);
    }

    #[test]
    fn non_positive_sigma_rejected() {
        let ds = dataset(&[&[1.0, 1.0], &[1.0, 1.1]]);
        assert!(voltage_similarity(&ds, Scale::Fixed(0.0)).is_err());
        assert!(voltage_similarity(&ds, Scale::Fixed(-1.0)).is_err());
        assert!("-2".parse::<Scale>().is_err());
        assert_eq!("auto".parse::<Scale>().unwrap(), Scale::Auto);
    }

    #[test]
    fn auto_sigma_is_median_distance() {
        // distances: 0.1, 0.3, 0.2 -> median 0.2
        let ds = dataset(&[&[1.0, 1.0], &[1.1, 1.0], &[1.3, 1.0]]);
        let g = voltage_similarity(&ds, Scale::Auto).unwrap();
        assert_relative_eq!(g.sigma.unwrap(), 0.2, max_relative = 1e-12);
    }

    #[test]
    fn location_kernel() {
        let mut ds = dataset(&[&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]]);
        ds.locations = Some(vec![
            GeoPoint::new(0.0, 0.0).unwrap(),
            GeoPoint::new(0.0, 0.0).unwrap(),
            GeoPoint::new(0.0, std::f64::consts::PI).unwrap(),
        ]);
        let g = location_similarity(&ds, Scale::Fixed(1000.0), GeoMetric::Haversine).unwrap();
        assert_eq!(g.similarity[(0, 1)], 1.0);
        // (pi * 6371)^2 / 1000^2 = 400.6036...
        let expected = (-400.60372_f64).exp();
        assert_relative_eq!(g.similarity[(0, 2)], expected, max_relative = 1e-4);

        let km = crate::geo::haversine(
            GeoPoint::new(0.0, 0.0).unwrap(),
            GeoPoint::new(0.0, 0.01).unwrap(),
        );
        ds.locations.as_mut().unwrap()[2] = GeoPoint::new(0.0, 0.01).unwrap();
        let g = location_similarity(&ds, Scale::Fixed(km), GeoMetric::Haversine).unwrap();
        assert_relative_eq!(g.similarity[(0, 2)], (-1.0f64).exp(), max_relative = 1e-12);

        ds.locations = None;
        assert!(location_similarity(&ds, Scale::Auto, GeoMetric::Haversine).is_err());
    }

    #[test]
    fn two_by_two_laplacian() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let g = laplacian(m, View::Voltage, None).unwrap();
        assert_eq!(
            g.laplacian,
            DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5])
        );
        let (vals, _) = symmetric_eigen(&g.laplacian).unwrap();
        assert_relative_eq!(vals[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(vals[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn identity_similarity_gives_zero_laplacian() {
        let g = laplacian(DMatrix::identity(4, 4), View::Voltage, None).unwrap();
        assert!(g.laplacian.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn asymmetric_or_out_of_range_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5 + 1e-9, 1.0]);
        assert!(laplacian(m, View::Voltage, None).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.5, 1.5, 1.0]);
        assert!(laplacian(m, View::Voltage, None).is_err());
    }

    #[test]
    fn ideal_graph_spectra() {
        let (vals, _) = symmetric_eigen(&ideal_graph_from_labels(&[0; 5]).laplacian).unwrap();
        assert!(vals[0].abs() < 1e-12);
        assert!(vals.iter().skip(1).all(|v| (v - 5.0).abs() < 1e-12));

        let (vals, _) = symmetric_eigen(&ideal_graph_from_labels(&[0, 0, 1, 1]).laplacian).unwrap();
        let expected = [0.0, 0.0, 2.0, 2.0];
        for (v, e) in vals.iter().zip(expected) {
            assert!((v - e).abs() < 1e-12);
        }
    }

    #[test]
    fn block_diagonal_similarity_has_block_null_space() {
        let mut m = DMatrix::zeros(5, 5);
        for (i, j, w) in [(0, 1, 0.3), (2, 3, 0.8), (2, 4, 0.1), (3, 4, 0.6)] {
            m[(i, j)] = w;
            m[(j, i)] = w;
        }
        for i in 0..5 {
            m[(i, i)] = 1.0;
        }
        let g = laplacian(m, View::Voltage, None).unwrap();
        let (vals, _) = symmetric_eigen(&g.laplacian).unwrap();
        assert!(vals[0].abs() < 1e-12 && vals[1].abs() < 1e-12);
        assert!(vals[2] > 1e-3);
    }

    fn check_laplacian_properties(g: &SimilarityGraph, rng: &mut ChaCha8Rng) {
        let n = g.n();
        let l = &g.laplacian;
        let scale = l.norm().max(1.0);
        for i in 0..n {
            assert!(l.row(i).sum().abs() <= 1e-12 * scale);
            assert!(l.column(i).sum().abs() <= 1e-12 * scale);
        }
        for _ in 0..100 {
            let x = DVector::from_fn(n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let q = (x.transpose() * l * &x)[(0, 0)];
            assert!(q >= -1e-10 * scale * x.norm_squared());
        }
    }

    #[test]
    fn produced_graphs_are_psd_with_zero_row_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..10 {
            let n = 3 + trial;
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..6).map(|_| 0.95 + 0.1 * rng.random::<f64>()).collect())
                .collect();
            let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            let g = voltage_similarity(&dataset(&refs), Scale::Auto).unwrap();
            check_laplacian_properties(&g, &mut rng);
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
            check_laplacian_properties(&ideal_graph_from_labels(&labels), &mut rng);
        }
    }

    #[test]
    fn ideal_graph_commutes_with_permutation() {
        let labels = [0, 1, 0, 2, 1, 2, 2];
        let perm = [3, 0, 6, 1, 5, 2, 4];
        let g = ideal_graph_from_labels(&labels);
        let permuted_labels: Vec<usize> = perm.iter().map(|&i| labels[i]).collect();
        let direct = ideal_graph_from_labels(&permuted_labels);
        let mut p = DMatrix::zeros(7, 7);
        for (row, &src) in perm.iter().enumerate() {
            p[(row, src)] = 1.0;
        }
        let conj = &p * &g.laplacian * p.transpose();
        assert_eq!(direct.laplacian, conj);
        assert_eq!(g.permuted(&perm).laplacian, conj);
    }
}
