//! Numerical certificates for a spectral clustering result.
//!
//! Two checks are provided:
//!
//! * the eigengap assumption: the k smallest eigenvalues of the real voltage
//!   Laplacian must lie strictly below λ_{k+1} of the ideal (ground-truth)
//!   Laplacian, i.e. `delta = λ_{k+1}(ideal) − λ_k(real) > 0`;
//! * the invariant-subspace perturbation bound
//!   `‖tan Θ(X̃, X)‖ ≤ ‖R‖ / δ` where X spans the null space of the ideal
//!   Laplacian, X̃ is an approximation (typically the real embedding),
//!   `R = L X̃ − X̃ P̃` with `P̃ = X̃ᵀ L X̃`, and δ is the separation between the
//!   Ritz values eig(P̃) and the rest of the ideal spectrum. It is evaluated
//!   in the spectral and Frobenius norms.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Serialize, Serializer};

use crate::graph::{ideal_graph, SimilarityGraph};
use crate::ingest::GroundTruth;
use crate::linalg::{orthonormality_error, singular_values, spectral_norm, symmetric_eigen};
use crate::spectral::{eigendecompose, embed};
use crate::{Error, Result, VERSION};

/// Absolute tolerance on δ comparisons.
pub const DELTA_TOL: f64 = 1e-10;
/// Cosines at or below this are treated as a right angle (tan reported as +∞).
pub const COS_FLOOR: f64 = 1e-15;
/// Largest tolerated ‖XᵀX − I‖ entry for inputs that must be orthonormal.
pub const ORTHONORMAL_TOL: f64 = 1e-8;
/// Rounding slack when comparing the two sides of the subspace bound.
pub const BOUND_SLACK: f64 = 1e-12;

/// Serializes non-finite floats as strings (`"inf"`, `"-inf"`, `"nan"`).
fn ser_f64<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

fn ser_f64_vec<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    #[derive(Serialize)]
    struct W(#[serde(serialize_with = "ser_f64")] f64);
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        seq.serialize_element(&W(*x))?;
    }
    seq.end()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormPair {
    #[serde(serialize_with = "ser_f64")]
    pub two: f64,
    #[serde(serialize_with = "ser_f64")]
    pub frobenius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoundPair {
    pub two: bool,
    pub frobenius: bool,
}

impl BoundPair {
    pub fn both(&self) -> bool {
        self.two && self.frobenius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub ideal_eigs: Vec<f64>,
    pub real_eigs: Vec<f64>,
    /// λ_{k+1}(ideal) − λ_k(real).
    pub delta: f64,
    pub holds: bool,
}

/// Compares the spectrum of a real Laplacian against the ideal Laplacian of `truth`.
pub fn check_assumption(real: &SimilarityGraph, truth: &GroundTruth, k: usize) -> Result<AssumptionCheck> {
    let n = real.n();
    if truth.meter_ids.len() != n {
        return Err(Error::invalid(format!(
            "graph has {n} meters, ground truth {}",
            truth.meter_ids.len()
        )));
    }
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("k = {k} must satisfy 1 <= k < N = {n}")));
    }
    if k != truth.k() {
        return Err(Error::invalid(format!(
            "k = {k} differs from the {} transformers in the ground truth",
            truth.k()
        )));
    }
    let ideal = eigendecompose(&ideal_graph(truth))?;
    let real_e = eigendecompose(real)?;
    let delta = ideal.eigenvalues[k] - real_e.eigenvalues[k - 1];
    Ok(AssumptionCheck {
        ideal_eigs: ideal.eigenvalues.iter().copied().collect(),
        real_eigs: real_e.eigenvalues.iter().copied().collect(),
        delta,
        holds: delta > DELTA_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CanonicalAngles {
    /// Descending (ascending angle).
    pub cosines: Vec<f64>,
    /// Ascending, paired with `cosines`.
    pub sines: Vec<f64>,
    pub angles: Vec<f64>,
    #[serde(serialize_with = "ser_f64_vec")]
    pub tangents: Vec<f64>,
    /// ‖tan Θ‖₂ and ‖tan Θ‖_F; +∞ when some angle is a right angle.
    pub tan_norm: NormPair,
}

fn require_orthonormal(x: &DMatrix<f64>, what: &str) -> Result<()> {
    let err = orthonormality_error(x);
    if !(err <= ORTHONORMAL_TOL) {
        return Err(Error::numerical(format!(
            "{what} is not orthonormal (max |XᵀX − I| = {err:e}); rank-deficient input"
        )));
    }
    Ok(())
}

/// Principal angles between the column spaces of two N×k orthonormal matrices.
pub fn canonical_angles(x1: &DMatrix<f64>, x1_tilde: &DMatrix<f64>) -> Result<CanonicalAngles> {
    if x1.shape() != x1_tilde.shape() {
        return Err(Error::invalid(format!(
            "shape mismatch: {:?} vs {:?}",
            x1.shape(),
            x1_tilde.shape()
        )));
    }
    require_orthonormal(x1, "X1")?;
    require_orthonormal(x1_tilde, "X1_tilde")?;

    let cross = x1.transpose() * x1_tilde;
    let mut cosines: Vec<f64> = singular_values(&cross)
        .into_iter()
        .map(|c| c.clamp(0.0, 1.0))
        .collect();
    cosines.sort_by(|a, b| b.total_cmp(a));
    // Sines from the component of X̃ orthogonal to X; accurate for tiny angles.
    let orth = x1_tilde - x1 * cross;
    let mut sines: Vec<f64> = singular_values(&orth)
        .into_iter()
        .map(|s| s.clamp(0.0, 1.0))
        .collect();
    sines.sort_by(f64::total_cmp);

    let angles: Vec<f64> = cosines.iter().zip(&sines).map(|(c, s)| s.atan2(*c)).collect();
    let tangents: Vec<f64> = cosines
        .iter()
        .zip(&sines)
        .map(|(&c, &s)| if c <= COS_FLOOR { f64::INFINITY } else { s / c })
        .collect();
    let two = tangents.iter().copied().fold(0.0, f64::max);
    let frobenius = tangents.iter().map(|t| t * t).sum::<f64>().sqrt();
    Ok(CanonicalAngles {
        cosines,
        sines,
        angles,
        tangents,
        tan_norm: NormPair { two, frobenius },
    })
}

/// R = L X̃ − X̃ P̃ and P̃ = X̃ᵀ L X̃.
pub fn residual(l: &DMatrix<f64>, x_tilde: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if l.nrows() != l.ncols() || l.nrows() != x_tilde.nrows() {
        return Err(Error::invalid(format!(
            "shape mismatch: L {:?}, X {:?}",
            l.shape(),
            x_tilde.shape()
        )));
    }
    let lx = l * x_tilde;
    let mut p = x_tilde.transpose() * &lx;
    let k = p.nrows();
    for i in 0..k {
        for j in (i + 1)..k {
            let avg = 0.5 * (p[(i, j)] + p[(j, i)]);
            p[(i, j)] = avg;
            p[(j, i)] = avg;
        }
    }
    let r = lx - x_tilde * &p;
    Ok((r, p))
}

/// min over μ in `values` of the distance from μ to [a, b].
pub fn separation(interval: (f64, f64), values: &[f64]) -> f64 {
    let (a, b) = interval;
    values
        .iter()
        .map(|&mu| {
            if mu < a {
                a - mu
            } else if mu > b {
                mu - b
            } else {
                0.0
            }
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubspaceBound {
    /// [a, b] = [min, max] of eig(P̃).
    pub ritz_interval: (f64, f64),
    /// sep([a, b], Λ₂), Λ₂ the ideal spectrum without the k-fold invariant eigenvalue.
    #[serde(serialize_with = "ser_f64")]
    pub sep: f64,
    /// False when the Ritz interval touches Λ₂: no guarantee exists.
    pub guaranteed: bool,
    pub residual_norm: NormPair,
    pub tan_theta_norm: NormPair,
    /// ‖R‖ / δ per norm, present only when `guaranteed`.
    pub bound_rhs: Option<NormPair>,
    pub bound_holds: Option<BoundPair>,
    /// max |X̃ᵀR|, zero up to rounding.
    pub galerkin_error: f64,
    pub angles: CanonicalAngles,
}

struct IdealSplit {
    x1: DMatrix<f64>,
    invariant_eig: f64,
    rest: Vec<f64>,
}

fn split_ideal(l_ideal: &DMatrix<f64>, k: usize) -> Result<IdealSplit> {
    let n = l_ideal.nrows();
    if k == 0 || k >= n {
        return Err(Error::invalid(format!("k = {k} must satisfy 1 <= k < N = {n}")));
    }
    let (vals, vecs) = symmetric_eigen(l_ideal)?;
    Ok(IdealSplit {
        x1: vecs.columns(0, k).into_owned(),
        invariant_eig: vals.iter().take(k).sum::<f64>() / k as f64,
        rest: vals.iter().skip(k).copied().collect(),
    })
}

fn ritz_interval(p: &DMatrix<f64>) -> Result<(f64, f64)> {
    let (vals, _) = symmetric_eigen(p)?;
    Ok((vals[0], vals[vals.len() - 1]))
}

/// Evaluates ‖tan Θ‖ ≤ ‖R‖/δ for an approximation `x_tilde` of the k-dimensional
/// invariant subspace of `l_ideal` belonging to its smallest eigenvalue.
pub fn verify_subspace_bound(l_ideal: &DMatrix<f64>, x_tilde: &DMatrix<f64>, k: usize) -> Result<SubspaceBound> {
    if x_tilde.ncols() != k {
        return Err(Error::invalid(format!(
            "X_tilde has {} columns, expected k = {k}",
            x_tilde.ncols()
        )));
    }
    let split = split_ideal(l_ideal, k)?;
    let angles = canonical_angles(&split.x1, x_tilde)?;
    let (r, p) = residual(l_ideal, x_tilde)?;
    let interval = ritz_interval(&p)?;
    let sep = separation(interval, &split.rest);
    let guaranteed = sep > DELTA_TOL;
    let residual_norm = NormPair {
        two: spectral_norm(&r),
        frobenius: r.norm(),
    };
    let tan = angles.tan_norm;
    let (bound_rhs, bound_holds) = if guaranteed {
        let rhs = NormPair {
            two: residual_norm.two / sep,
            frobenius: residual_norm.frobenius / sep,
        };
        let holds = BoundPair {
            two: tan.two <= rhs.two * (1.0 + BOUND_SLACK) + BOUND_SLACK,
            frobenius: tan.frobenius <= rhs.frobenius * (1.0 + BOUND_SLACK) + BOUND_SLACK,
        };
        (Some(rhs), Some(holds))
    } else {
        (None, None)
    };
    let galerkin_error = (x_tilde.transpose() * &r).amax();
    Ok(SubspaceBound {
        ritz_interval: interval,
        sep,
        guaranteed,
        residual_norm,
        tan_theta_norm: tan,
        bound_rhs,
        bound_holds,
        galerkin_error,
        angles,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapCheck {
    /// Eigenvalue of the invariant subspace (mean of the k smallest ideal eigenvalues).
    pub invariant_eig: f64,
    /// min over Λ₂ of |λ − λ_ii|.
    pub eigengap: f64,
    /// sep(eig(P̃), Λ₂).
    pub sep: f64,
    /// eigengap / sep.
    pub ratio: f64,
    pub holds: bool,
}

/// Slack on the eigengap-versus-separation comparison.
pub const GAP_SLACK: f64 = 1e-8;

/// Checks that the eigengap of `l_ideal` is at least the separation of the
/// Ritz values of `x_tilde` from the rest of the spectrum.
pub fn verify_eigengap(l_ideal: &DMatrix<f64>, x_tilde: &DMatrix<f64>, k: usize) -> Result<GapCheck> {
    if x_tilde.ncols() != k || x_tilde.nrows() != l_ideal.nrows() {
        return Err(Error::invalid("X_tilde shape does not match L and k"));
    }
    require_orthonormal(x_tilde, "X_tilde")?;
    let split = split_ideal(l_ideal, k)?;
    let (_, p) = residual(l_ideal, x_tilde)?;
    let sep = separation(ritz_interval(&p)?, &split.rest);
    if !(sep > DELTA_TOL) {
        return Err(Error::invalid(format!(
            "separation {sep:e} is not positive; the gap comparison does not apply"
        )));
    }
    let eigengap = split
        .rest
        .iter()
        .map(|&mu| (split.invariant_eig - mu).abs())
        .fold(f64::INFINITY, f64::min);
    Ok(GapCheck {
        invariant_eig: split.invariant_eig,
        eigengap,
        sep,
        ratio: eigengap / sep,
        holds: eigengap >= sep - GAP_SLACK,
    })
}

/// Everything `validate-assumption` reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuaranteeReport {
    pub k: usize,
    pub ideal_eigs: Vec<f64>,
    pub real_eigs: Vec<f64>,
    /// λ_{k+1}(ideal) − λ_k(real).
    pub delta: f64,
    pub assumption_holds: bool,
    /// Subspace bound for the real embedding against the ideal Laplacian.
    #[serde(serialize_with = "ser_f64")]
    pub sep_delta: f64,
    pub guaranteed: bool,
    pub residual_norm: NormPair,
    pub tan_theta_norm: NormPair,
    pub bound_rhs: Option<NormPair>,
    pub bound_holds: Option<BoundPair>,
    pub canonical_angles: Vec<f64>,
    pub sigma: Option<f64>,
    pub seed: u64,
    pub method: String,
    pub version: String,
}

impl GuaranteeReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        crate::cluster::write_json(path, self)
    }

    /// `index,ideal,real`, one row per eigenvalue.
    pub fn write_eigs_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let err = |e: csv::Error| Error::csv(path, e.to_string());
        w.write_record(["index", "ideal", "real"]).map_err(err)?;
        for (i, (a, b)) in self.ideal_eigs.iter().zip(&self.real_eigs).enumerate() {
            w.write_record([(i + 1).to_string(), a.to_string(), b.to_string()])
                .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Assumption check plus the subspace bound for the real k-dimensional embedding.
pub fn validate(real: &SimilarityGraph, truth: &GroundTruth, k: usize, seed: u64) -> Result<GuaranteeReport> {
    let assumption = check_assumption(real, truth, k)?;
    let x_tilde = embed(real, k)?.x;
    let bound = verify_subspace_bound(&ideal_graph(truth).laplacian, &x_tilde, k)?;
    Ok(GuaranteeReport {
        k,
        ideal_eigs: assumption.ideal_eigs,
        real_eigs: assumption.real_eigs,
        delta: assumption.delta,
        assumption_holds: assumption.holds,
        sep_delta: bound.sep,
        guaranteed: bound.guaranteed,
        residual_norm: bound.residual_norm,
        tan_theta_norm: bound.tan_theta_norm,
        bound_rhs: bound.bound_rhs,
        bound_holds: bound.bound_holds,
        canonical_angles: bound.angles.angles,
        sigma: real.sigma,
        seed,
        method: "spectral".to_owned(),
        version: VERSION.to_owned(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ideal_graph_from_labels, laplacian, View};
    use crate::linalg::random_orthonormal;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn truth(sizes: &[usize]) -> GroundTruth {
        let labels: Vec<usize> = sizes
            .iter()
            .enumerate()
            .flat_map(|(j, &n)| std::iter::repeat_n(j, n))
            .collect();
        GroundTruth::new(
            (0..labels.len()).map(|i| format!("m{i}")).collect(),
            (0..sizes.len()).map(|j| format!("x{j}")).collect(),
            labels,
        )
        .unwrap()
    }

    /// Symmetric perturbation with zero row sums scaled to spectral norm `eps`.
    fn laplacian_perturbation(rng: &mut ChaCha8Rng, n: usize, eps: f64) -> DMatrix<f64> {
        let mut w = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = rng.random::<f64>();
                w[(i, j)] = -v;
                w[(j, i)] = -v;
            }
        }
        for i in 0..n {
            w[(i, i)] = -w.row(i).sum();
        }
        let s = spectral_norm(&w);
        w * (eps / s)
    }

    #[test]
    fn ideal_real_graph_has_delta_four() {
        let t = truth(&[4, 5, 6]);
        let g = ideal_graph(&t);
        let c = check_assumption(&g, &t, 3).unwrap();
        assert!((c.delta - 4.0).abs() < 1e-10);
        assert!(c.holds);
        assert!(check_assumption(&g, &t, 2).is_err());
    }

    #[test]
    fn small_perturbation_keeps_delta_near_four() {
        let t = truth(&[4, 5, 6]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = ideal_graph(&t).laplacian + laplacian_perturbation(&mut rng, 15, 0.01);
        let (vals, _) = symmetric_eigen(&l).unwrap();
        let delta = 4.0 - vals[2];
        assert!(delta > 3.9 && delta < 4.0 + 1e-12, "{delta}");
    }

    #[test]
    fn fully_connected_real_graph_fails() {
        let t = truth(&[3, 3]);
        let g = laplacian(DMatrix::from_element(6, 6, 1.0), View::Voltage, None).unwrap();
        let c = check_assumption(&g, &t, 2).unwrap();
        // λ_2(real) = 6, λ_3(ideal) = 3.
        assert!((c.delta + 3.0).abs() < 1e-10);
        assert!(!c.holds);
    }

    #[test]
    fn angles_of_rotated_basis_vanish() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_orthonormal(&mut rng, 8, 3);
        let q = random_orthonormal(&mut rng, 3, 3);
        let a = canonical_angles(&x, &(&x * q)).unwrap();
        assert!(a.tan_norm.two < 1e-12 && a.tan_norm.frobenius < 1e-12);
    }

    #[test]
    fn orthogonal_subspaces_give_infinite_tangent() {
        let mut x = DMatrix::zeros(4, 1);
        x[(0, 0)] = 1.0;
        let mut y = DMatrix::zeros(4, 1);
        y[(1, 0)] = 1.0;
        let a = canonical_angles(&x, &y).unwrap();
        assert_eq!(a.cosines, vec![0.0]);
        assert!(a.tan_norm.two.is_infinite());
        let json = serde_json::to_string(&a.tan_norm).unwrap();
        assert_eq!(json, r#"{"two":"inf","frobenius":"inf"}"#);
    }

    #[test]
    fn planted_rotation_angle() {
        let theta: f64 = 0.3;
        let mut x = DMatrix::zeros(5, 2);
        x[(0, 0)] = 1.0;
        x[(1, 1)] = 1.0;
        let mut y = x.clone();
        y[(1, 1)] = theta.cos();
        y[(3, 1)] = theta.sin();
        let a = canonical_angles(&x, &y).unwrap();
        assert!(a.angles[0].abs() < 1e-15);
        assert!((a.angles[1] - theta).abs() < 1e-14);
        // tan 0.3 = 0.30933624960962325
        assert!((a.tan_norm.two - 0.30933624960962325).abs() < 1e-14);
    }

    #[test]
    fn rank_deficient_input_rejected() {
        let x = DMatrix::from_element(4, 2, 0.5);
        let y = random_orthonormal(&mut ChaCha8Rng::seed_from_u64(0), 4, 2);
        assert!(canonical_angles(&x, &y).is_err());
    }

    #[test]
    fn residual_identities() {
        let t = truth(&[3, 4]);
        let l = ideal_graph(&t).laplacian;
        let (_, vecs) = symmetric_eigen(&l).unwrap();
        let exact = vecs.columns(0, 2).into_owned();
        let (r, _) = residual(&l, &exact).unwrap();
        assert!(r.amax() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let x = random_orthonormal(&mut rng, 7, 2);
            let (r, _) = residual(&l, &x).unwrap();
            assert!((x.transpose() * r).amax() <= 1e-10);
        }
    }

    #[test]
    fn residual_bounded_by_twice_perturbation() {
        let t = truth(&[3, 4]);
        let l = ideal_graph(&t).laplacian;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let eps = 0.5 * rng.random::<f64>();
            let dl = laplacian_perturbation(&mut rng, 7, eps);
            let (_, vecs) = symmetric_eigen(&(&l + &dl)).unwrap();
            let x = vecs.columns(0, 2).into_owned();
            let (r, _) = residual(&l, &x).unwrap();
            assert!(spectral_norm(&r) <= 2.0 * spectral_norm(&dl) + 1e-12);
        }
    }

    #[test]
    fn exact_null_space_gives_zero_bound() {
        let l = ideal_graph(&truth(&[2, 3, 3])).laplacian;
        let (_, vecs) = symmetric_eigen(&l).unwrap();
        let b = verify_subspace_bound(&l, &vecs.columns(0, 3).into_owned(), 3).unwrap();
        assert!(b.guaranteed);
        assert!((b.sep - 2.0).abs() < 1e-10);
        assert!(b.tan_theta_norm.two < 1e-12);
        assert!(b.bound_holds.unwrap().both());
    }

    #[test]
    fn bound_holds_under_moderate_perturbation() {
        let l = ideal_graph(&truth(&[3, 4, 5])).laplacian;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let eps = 0.1 * 3.0 * rng.random::<f64>();
            let dl = laplacian_perturbation(&mut rng, 12, eps);
            let (_, vecs) = symmetric_eigen(&(&l + dl)).unwrap();
            let x = vecs.columns(0, 3).into_owned();
            let b = verify_subspace_bound(&l, &x, 3).unwrap();
            assert!(b.guaranteed);
            assert!(b.bound_holds.unwrap().both(), "{b:?}");
            assert!(b.galerkin_error <= 1e-10);
            let g = verify_eigengap(&l, &x, 3).unwrap();
            assert!(g.holds);
        }
    }

    #[test]
    fn large_perturbation_removes_guarantee() {
        let l = ideal_graph(&truth(&[2, 2])).laplacian;
        // Rotate one null-space direction fully into the eigenvalue-2 space.
        let (_, vecs) = symmetric_eigen(&l).unwrap();
        let mut x = vecs.columns(0, 2).into_owned();
        x.set_column(1, &vecs.column(2));
        let b = verify_subspace_bound(&l, &x, 2).unwrap();
        assert!(!b.guaranteed);
        assert!(b.bound_rhs.is_none() && b.bound_holds.is_none());
        assert!(verify_eigengap(&l, &x, 2).is_err());
    }

    #[test]
    fn planted_gap_ratio() {
        let l = ideal_graph_from_labels(&[0, 0, 1, 1]).laplacian;
        let (_, vecs) = symmetric_eigen(&l).unwrap();
        for theta in [0.0f64, 0.3] {
            let mut x = vecs.columns(0, 2).into_owned();
            let rotated = vecs.column(1) * theta.cos() + vecs.column(2) * theta.sin();
            x.set_column(1, &rotated);
            let g = verify_eigengap(&l, &x, 2).unwrap();
            let expected = 1.0 / theta.cos().powi(2);
            assert!((g.ratio - expected).abs() <= 1e-10 * expected, "{} vs {expected}", g.ratio);
            assert!(g.holds);
        }
    }

    #[test]
    fn separation_examples() {
        assert_eq!(separation((0.0, 1.0), &[3.0, 4.0]), 2.0);
        assert_eq!(separation((0.0, 1.0), &[0.5]), 0.0);
        assert_eq!(separation((1.0, 2.0), &[0.25, 5.0]), 0.75);
    }
}
