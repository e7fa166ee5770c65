//! Synthetic radial secondary feeders with known meter-to-transformer ground truth.
//!
//! Voltages follow a resistive linearized drop model. For meter i on
//! transformer j at time t:
//!
//! ```text
//! v_i(t) = v_0 − z_j·Σ_{m∈C_j} P_m(t) − Σ_{s on path to i} r_s·(load downstream of s)(t) + ε
//! ```
//!
//! Meters on one transformer share the transformer drop, which is the
//! within-cluster correlation the clustering relies on.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geo::{GeoPoint, EARTH_RADIUS_KM};
use crate::ingest::{GroundTruth, MeterDataset, TransformerSet};
use crate::{Error, Result};

// Independent PRNG streams per purpose, all keyed by the spec seed.
const STREAM_PROFILES: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_PLACEMENT: u64 = 3;

/// Upper bound on resampling attempts for a colliding load profile.
const MAX_RESAMPLES: usize = 1000;

/// A scalar applied to every item, or one value per item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerItem {
    All(f64),
    Each(Vec<f64>),
}

impl PerItem {
    pub fn resolve(&self, len: usize, what: &str) -> Result<Vec<f64>> {
        let values = match self {
            PerItem::All(v) => vec![*v; len],
            PerItem::Each(v) if v.len() == len => v.clone(),
            PerItem::Each(v) => {
                return Err(Error::invalid(format!(
                    "{what}: {} values given, {len} required",
                    v.len()
                )))
            }
        };
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!("{what}: negative or non-finite value {bad}")));
        }
        Ok(values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// Meters in series along the secondary, in meter order.
    #[default]
    Chain,
    /// Every meter on its own service drop from the transformer.
    Star,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Placement {
    pub origin_lat_deg: f64,
    pub origin_lon_deg: f64,
    /// Distance between neighbouring transformers on the placement grid.
    pub grid_spacing_km: f64,
    /// Grid width; 0 picks ⌈√k⌉.
    pub grid_columns: usize,
    /// Meters are spread uniformly over a disc of this radius around their transformer.
    pub meter_radius_km: f64,
}

impl Default for Placement {
    fn default() -> Self {
        Self {
            origin_lat_deg: 40.0,
            origin_lon_deg: -88.0,
            grid_spacing_km: 0.3,
            grid_columns: 0,
            meter_radius_km: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileParams {
    pub base_pu: f64,
    pub amplitude_pu: f64,
    /// Per-meter amplitude factor drawn from 1 ± jitter.
    pub amplitude_jitter: f64,
    /// Per-meter phase drawn from [0, phase_spread).
    pub phase_spread: f64,
    /// Std. dev. of i.i.d. Gaussian load noise.
    pub noise_pu: f64,
    pub steps_per_day: usize,
    /// Fraction of meters with rooftop PV injection.
    pub der_fraction: f64,
    pub der_p_max_pu: f64,
}

impl Default for ProfileParams {
    fn default() -> Self {
        Self {
            base_pu: 0.01,
            amplitude_pu: 0.005,
            amplitude_jitter: 0.5,
            phase_spread: TAU,
            noise_pu: 0.002,
            steps_per_day: 96,
            der_fraction: 0.0,
            der_p_max_pu: 0.0,
        }
    }
}

fn default_substation_voltage() -> f64 {
    1.0
}

/// Feeder description; the JSON form is a flat object with these fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeederSpec {
    pub k: usize,
    pub meters_per_xfmr: Vec<usize>,
    /// Transformer resistance, one value or one per transformer.
    pub xfmr_impedance_pu: PerItem,
    /// Resistance of the secondary segment feeding each meter, one value or one per meter.
    pub line_resistance_pu: PerItem,
    #[serde(default = "default_substation_voltage")]
    pub substation_voltage_pu: f64,
    /// Explicit (lat, lon) in radians; generated from `placement` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xfmr_locations: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meter_locations: Option<Vec<[f64; 2]>>,
    #[serde(rename = "T", alias = "steps")]
    pub steps: usize,
    pub noise_std_pu: f64,
    pub seed: u64,
    #[serde(default)]
    pub topology: Topology,
    #[serde(default)]
    pub placement: Placement,
    #[serde(default)]
    pub profile: ProfileParams,
}

impl FeederSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn n_meters(&self) -> usize {
        self.meters_per_xfmr.iter().sum()
    }

    /// Transformer index of every meter, meters numbered transformer by transformer.
    pub fn labels(&self) -> Vec<usize> {
        self.meters_per_xfmr
            .iter()
            .enumerate()
            .flat_map(|(j, &n)| std::iter::repeat_n(j, n))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if self.meters_per_xfmr.len() != self.k {
            return Err(Error::invalid(format!(
                "meters_per_xfmr has {} entries for k = {}",
                self.meters_per_xfmr.len(),
                self.k
            )));
        }
        if self.meters_per_xfmr.contains(&0) {
            return Err(Error::invalid("every transformer needs at least one meter"));
        }
        let n = self.n_meters();
        if n < 2 || self.steps < 2 {
            return Err(Error::invalid("need at least 2 meters and 2 timesteps"));
        }
        self.xfmr_impedance_pu.resolve(self.k, "xfmr_impedance_pu")?;
        self.line_resistance_pu.resolve(n, "line_resistance_pu")?;
        if !(self.substation_voltage_pu > 0.0 && self.substation_voltage_pu < 2.0) {
            return Err(Error::invalid("substation_voltage_pu must lie in (0, 2)"));
        }
        if !(self.noise_std_pu >= 0.0 && self.noise_std_pu.is_finite()) {
            return Err(Error::invalid("noise_std_pu must be non-negative"));
        }
        let p = &self.profile;
        let finite_nonneg = [
            p.base_pu,
            p.amplitude_pu,
            p.amplitude_jitter,
            p.phase_spread,
            p.noise_pu,
            p.der_p_max_pu,
        ];
        if finite_nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("profile parameters must be finite and non-negative"));
        }
        if !(0.0..=1.0).contains(&p.der_fraction) || p.steps_per_day == 0 {
            return Err(Error::invalid("der_fraction must lie in [0, 1] and steps_per_day > 0"));
        }
        let pl = &self.placement;
        if !(pl.grid_spacing_km >= 0.0 && pl.meter_radius_km >= 0.0) {
            return Err(Error::invalid("placement distances must be non-negative"));
        }
        GeoPoint::from_degrees(pl.origin_lat_deg, pl.origin_lon_deg)?;
        if let Some(locs) = &self.xfmr_locations {
            if locs.len() != self.k {
                return Err(Error::invalid("xfmr_locations must have k rows"));
            }
            for l in locs {
                GeoPoint::new(l[0], l[1])?;
            }
        }
        if let Some(locs) = &self.meter_locations {
            if locs.len() != n {
                return Err(Error::invalid("meter_locations must have N rows"));
            }
            for l in locs {
                GeoPoint::new(l[0], l[1])?;
            }
        }
        Ok(())
    }

    pub fn meter_ids(&self) -> Vec<String> {
        (0..self.n_meters()).map(|i| format!("m{i:04}")).collect()
    }

    pub fn xfmr_ids(&self) -> Vec<String> {
        (0..self.k).map(|j| format!("T{j:02}")).collect()
    }
}

/// N×T active-power draws in per-unit.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadProfileSet {
    pub loads: DMatrix<f64>,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct MeterDraw {
    amplitude: f64,
    phase: f64,
    der: bool,
}

fn profile_row(p: &ProfileParams, draw: &MeterDraw, steps: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let noise = if p.noise_pu > 0.0 {
        Some(Normal::new(0.0, p.noise_pu).map_err(|e| Error::invalid(e.to_string()))?)
    } else {
        None
    };
    let lower = if draw.der { -p.der_p_max_pu } else { 0.0 };
    Ok((0..steps)
        .map(|t| {
            let day = TAU * t as f64 / p.steps_per_day as f64;
            let mut v = p.base_pu + draw.amplitude * (day + draw.phase).sin();
            if let Some(n) = &noise {
                v += n.sample(rng);
            }
            if draw.der {
                // PV output peaks at midday.
                v -= p.der_p_max_pu * (-day.cos()).max(0.0);
            }
            v.max(lower)
        })
        .collect())
}

/// Per-meter load profiles: base + daily sinusoid with random per-meter
/// amplitude and phase + i.i.d. noise. A profile identical to one of a meter
/// on a different transformer is redrawn with a fresh phase.
pub fn generate_profiles(spec: &FeederSpec) -> Result<LoadProfileSet> {
    spec.validate()?;
    let p = &spec.profile;
    let labels = spec.labels();
    let n = labels.len();
    let mut rng = stream_rng(spec.seed, STREAM_PROFILES);
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (i, &label) in labels.iter().enumerate() {
        let jitter = p.amplitude_jitter * (2.0 * rng.random::<f64>() - 1.0);
        let mut draw = MeterDraw {
            amplitude: p.amplitude_pu * (1.0 + jitter).max(0.0),
            phase: p.phase_spread * rng.random::<f64>(),
            der: rng.random::<f64>() < p.der_fraction,
        };
        let mut row = profile_row(p, &draw, spec.steps, &mut rng)?;
        let mut attempts = 0;
        while rows
            .iter()
            .zip(&labels)
            .any(|(other, &l)| l != label && *other == row)
        {
            attempts += 1;
            if attempts > MAX_RESAMPLES {
                return Err(Error::invalid(format!(
                    "meter {i}: could not draw a profile distinct from other transformers"
                )));
            }
            draw.phase = TAU * rng.random::<f64>();
            if draw.amplitude == 0.0 {
                draw.amplitude = p.amplitude_pu.max(1e-6) * rng.random::<f64>();
            }
            row = profile_row(p, &draw, spec.steps, &mut rng)?;
        }
        rows.push(row);
    }
    Ok(LoadProfileSet {
        loads: DMatrix::from_fn(n, spec.steps, |i, t| rows[i][t]),
    })
}

fn offset_point(origin: GeoPoint, north_km: f64, east_km: f64) -> Result<GeoPoint> {
    let lat = origin.lat + north_km / EARTH_RADIUS_KM;
    let lon = origin.lon + east_km / (EARTH_RADIUS_KM * lat.cos());
    let lon = if lon > PI {
        lon - TAU
    } else if lon < -PI {
        lon + TAU
    } else {
        lon
    };
    GeoPoint::new(lat, lon)
}

/// Transformer and meter coordinates: explicit ones from the spec, otherwise
/// transformers on a grid and meters uniform in a disc around their transformer.
pub fn place(spec: &FeederSpec) -> Result<(Vec<GeoPoint>, Vec<GeoPoint>)> {
    let pl = &spec.placement;
    let origin = GeoPoint::from_degrees(pl.origin_lat_deg, pl.origin_lon_deg)?;
    let mut rng = stream_rng(spec.seed, STREAM_PLACEMENT);
    let xfmrs: Vec<GeoPoint> = match &spec.xfmr_locations {
        Some(locs) => locs
            .iter()
            .map(|l| GeoPoint::new(l[0], l[1]))
            .collect::<Result<_>>()?,
        None => {
            let cols = if pl.grid_columns > 0 {
                pl.grid_columns
            } else {
                (spec.k as f64).sqrt().ceil() as usize
            };
            (0..spec.k)
                .map(|j| {
                    let (r, c) = ((j / cols) as f64, (j % cols) as f64);
                    offset_point(origin, r * pl.grid_spacing_km, c * pl.grid_spacing_km)
                })
                .collect::<Result<_>>()?
        }
    };
    let meters: Vec<GeoPoint> = match &spec.meter_locations {
        Some(locs) => locs
            .iter()
            .map(|l| GeoPoint::new(l[0], l[1]))
            .collect::<Result<_>>()?,
        None => spec
            .labels()
            .iter()
            .map(|&j| {
                let r = pl.meter_radius_km * rng.random::<f64>().sqrt();
                let a = TAU * rng.random::<f64>();
                offset_point(xfmrs[j], r * a.sin(), r * a.cos())
            })
            .collect::<Result<_>>()?,
    };
    Ok((xfmrs, meters))
}

/// Noise-free voltage drops below the substation voltage, N×T.
pub fn voltage_drops(spec: &FeederSpec, loads: &LoadProfileSet) -> Result<DMatrix<f64>> {
    let labels = spec.labels();
    let n = labels.len();
    let steps = spec.steps;
    if loads.loads.shape() != (n, steps) {
        return Err(Error::invalid(format!(
            "load matrix is {:?}, expected {n}x{steps}",
            loads.loads.shape()
        )));
    }
    if loads.loads.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite load"));
    }
    let z = spec.xfmr_impedance_pu.resolve(spec.k, "xfmr_impedance_pu")?;
    let r = spec.line_resistance_pu.resolve(n, "line_resistance_pu")?;
    let p = &loads.loads;
    let mut drops = DMatrix::zeros(n, steps);
    let mut start = 0;
    for (j, &size) in spec.meters_per_xfmr.iter().enumerate() {
        let members = start..start + size;
        for t in 0..steps {
            let total: f64 = members.clone().map(|m| p[(m, t)]).sum();
            let xfmr_drop = z[j] * total;
            match spec.topology {
                Topology::Star => {
                    for m in members.clone() {
                        drops[(m, t)] = xfmr_drop + r[m] * p[(m, t)];
                    }
                }
                Topology::Chain => {
                    // Segment feeding meter m carries the load of m and everything after it.
                    let mut downstream = total;
                    let mut acc = xfmr_drop;
                    for m in members.clone() {
                        acc += r[m] * downstream;
                        drops[(m, t)] = acc;
                        downstream -= p[(m, t)];
                    }
                }
            }
        }
        start += size;
    }
    Ok(drops)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub dataset: MeterDataset,
    pub transformers: TransformerSet,
    pub truth: GroundTruth,
    pub loads: LoadProfileSet,
}

/// Voltages for given loads, with measurement noise from the spec's seed.
pub fn simulate_voltages(spec: &FeederSpec, loads: &LoadProfileSet) -> Result<Simulation> {
    spec.validate()?;
    let drops = voltage_drops(spec, loads)?;
    let (n, steps) = drops.shape();
    let mut voltages = drops.map(|d| spec.substation_voltage_pu - d);
    if spec.noise_std_pu > 0.0 {
        let normal = Normal::new(0.0, spec.noise_std_pu).map_err(|e| Error::invalid(e.to_string()))?;
        let mut rng = stream_rng(spec.seed, STREAM_NOISE);
        // Row-major draw order keeps the stream independent of matrix layout.
        for i in 0..n {
            for t in 0..steps {
                voltages[(i, t)] += normal.sample(&mut rng);
            }
        }
    }
    if let Some(v) = voltages.iter().find(|v| !(**v > 0.0 && **v < 2.0)) {
        return Err(Error::invalid(format!(
            "infeasible feeder: simulated voltage {v} p.u. outside (0, 2)"
        )));
    }

    let (xfmr_locs, meter_locs) = place(spec)?;
    let meter_ids = spec.meter_ids();
    let xfmr_ids = spec.xfmr_ids();
    let dataset = MeterDataset::new(
        meter_ids.clone(),
        voltages,
        Some(meter_locs),
        (0..steps).map(|t| format!("t_{t}")).collect(),
    )?;
    let transformers = TransformerSet::new(xfmr_ids.clone(), xfmr_locs)?;
    let truth = GroundTruth::new(meter_ids, xfmr_ids, spec.labels())?;
    Ok(Simulation {
        dataset,
        transformers,
        truth,
        loads: loads.clone(),
    })
}

/// Profiles and voltages in one call.
pub fn simulate(spec: &FeederSpec) -> Result<Simulation> {
    let loads = generate_profiles(spec)?;
    simulate_voltages(spec, &loads)
}
