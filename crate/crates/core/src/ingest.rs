//! Loading, validation and imputation of meter, transformer and ground-truth files.
//!
//! File formats (UTF-8, comma separated, `.` decimal point):
//!
//! * `voltages.csv`: `meter_id,t_0,...,t_{T-1}`, one row per meter, blank cell = missing.
//! * `locations.csv`: `meter_id,lat_deg,lon_deg`.
//! * `transformers.csv`: `xfmr_id,lat_deg,lon_deg`.
//! * `ground_truth.csv`: `meter_id,xfmr_id`.
//!
//! Coordinates are degrees on disk and radians in memory.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use log::warn;
use nalgebra::DMatrix;

use crate::geo::GeoPoint;
use crate::{Error, Result};

/// Meters missing more than this fraction of their series are dropped.
pub const MAX_MISSING_FRACTION: f64 = 0.20;

#[derive(Debug, Clone, PartialEq)]
pub struct MeterDataset {
    pub meter_ids: Vec<String>,
    /// N×T per-unit voltage magnitudes, one row per meter.
    pub voltages: DMatrix<f64>,
    pub locations: Option<Vec<GeoPoint>>,
    /// Column labels of the voltage file; informational only.
    pub timestamps: Vec<String>,
}

impl MeterDataset {
    pub fn new(
        meter_ids: Vec<String>,
        voltages: DMatrix<f64>,
        locations: Option<Vec<GeoPoint>>,
        timestamps: Vec<String>,
    ) -> Result<Self> {
        let ds = Self {
            meter_ids,
            voltages,
            locations,
            timestamps,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, t) = self.voltages.shape();
        if n < 2 || t < 2 {
            return Err(Error::invalid(format!(
                "dataset needs at least 2 meters and 2 timesteps, got {n}x{t}"
            )));
        }
        if self.meter_ids.len() != n {
            return Err(Error::invalid(format!(
                "{} meter ids for {n} voltage rows",
                self.meter_ids.len()
            )));
        }
        if self.timestamps.len() != t {
            return Err(Error::invalid(format!(
                "{} timestamps for {t} voltage columns",
                self.timestamps.len()
            )));
        }
        check_unique(&self.meter_ids, "meter_id")?;
        for i in 0..n {
            for j in 0..t {
                let v = self.voltages[(i, j)];
                if !(v.is_finite() && v > 0.0 && v < 2.0) {
                    return Err(Error::invalid(format!(
                        "meter {} timestep {j}: voltage {v} outside (0, 2) p.u.",
                        self.meter_ids[i]
                    )));
                }
            }
        }
        if let Some(locs) = &self.locations {
            if locs.len() != n {
                return Err(Error::invalid(format!(
                    "{} locations for {n} meters",
                    locs.len()
                )));
            }
            for p in locs {
                GeoPoint::new(p.lat, p.lon)?;
            }
        }
        Ok(())
    }

    pub fn n_meters(&self) -> usize {
        self.voltages.nrows()
    }

    pub fn n_steps(&self) -> usize {
        self.voltages.ncols()
    }

    pub fn index_of(&self, meter_id: &str) -> Option<usize> {
        self.meter_ids.iter().position(|m| m == meter_id)
    }

    /// Returns the dataset with rows reordered so that row `i` of the result is row `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let voltages = self.voltages.select_rows(perm);
        Self {
            meter_ids: perm.iter().map(|&i| self.meter_ids[i].clone()).collect(),
            voltages,
            locations: self
                .locations
                .as_ref()
                .map(|l| perm.iter().map(|&i| l[i]).collect()),
            timestamps: self.timestamps.clone(),
        }
    }
}

/// What the loader had to repair or discard.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestReport {
    pub imputed_cells: usize,
    pub dropped_meters: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformerSet {
    pub xfmr_ids: Vec<String>,
    pub locations: Vec<GeoPoint>,
}

impl TransformerSet {
    pub fn new(xfmr_ids: Vec<String>, locations: Vec<GeoPoint>) -> Result<Self> {
        if xfmr_ids.is_empty() {
            return Err(Error::invalid("transformer set is empty"));
        }
        if xfmr_ids.len() != locations.len() {
            return Err(Error::invalid(format!(
                "{} transformer ids for {} locations",
                xfmr_ids.len(),
                locations.len()
            )));
        }
        check_unique(&xfmr_ids, "xfmr_id")?;
        for p in &locations {
            GeoPoint::new(p.lat, p.lon)?;
        }
        Ok(Self {
            xfmr_ids,
            locations,
        })
    }

    pub fn len(&self) -> usize {
        self.xfmr_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xfmr_ids.is_empty()
    }

    pub fn index_of(&self, xfmr_id: &str) -> Option<usize> {
        self.xfmr_ids.iter().position(|x| x == xfmr_id)
    }
}

/// Known meter → transformer mapping, stored as per-meter indices into `xfmr_ids`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub meter_ids: Vec<String>,
    pub xfmr_ids: Vec<String>,
    pub labels: Vec<usize>,
}

impl GroundTruth {
    pub fn new(meter_ids: Vec<String>, xfmr_ids: Vec<String>, labels: Vec<usize>) -> Result<Self> {
        if meter_ids.len() != labels.len() {
            return Err(Error::invalid("ground truth: one label per meter required"));
        }
        if xfmr_ids.is_empty() {
            return Err(Error::invalid("ground truth: no transformers"));
        }
        check_unique(&meter_ids, "meter_id")?;
        check_unique(&xfmr_ids, "xfmr_id")?;
        let mut sizes = vec![0usize; xfmr_ids.len()];
        for &l in &labels {
            if l >= xfmr_ids.len() {
                return Err(Error::invalid(format!("ground truth: label {l} out of range")));
            }
            sizes[l] += 1;
        }
        if let Some(j) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::invalid(format!(
                "ground truth: transformer {} has no meters",
                xfmr_ids[j]
            )));
        }
        Ok(Self {
            meter_ids,
            xfmr_ids,
            labels,
        })
    }

    /// Number of transformers (clusters).
    pub fn k(&self) -> usize {
        self.xfmr_ids.len()
    }

    /// Cluster sizes n_j in transformer order.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn mapping(&self) -> BTreeMap<String, String> {
        self.meter_ids
            .iter()
            .zip(&self.labels)
            .map(|(m, &l)| (m.clone(), self.xfmr_ids[l].clone()))
            .collect()
    }

    pub fn transformer_of(&self, meter_id: &str) -> Option<&str> {
        self.meter_ids
            .iter()
            .position(|m| m == meter_id)
            .map(|i| self.xfmr_ids[self.labels[i]].as_str())
    }

    /// Labels re-expressed in the given meter order.
    pub fn labels_for(&self, meter_ids: &[String]) -> Result<Vec<usize>> {
        let index: HashMap<&str, usize> = self
            .meter_ids
            .iter()
            .enumerate()
            .map(|(i, m)| (m.as_str(), i))
            .collect();
        if meter_ids.len() != self.meter_ids.len() {
            return Err(Error::invalid(format!(
                "meter set mismatch: {} meters vs {} in ground truth",
                meter_ids.len(),
                self.meter_ids.len()
            )));
        }
        meter_ids
            .iter()
            .map(|m| {
                index
                    .get(m.as_str())
                    .map(|&i| self.labels[i])
                    .ok_or_else(|| Error::invalid(format!("meter {m} missing from ground truth")))
            })
            .collect()
    }
}

fn check_unique(ids: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if id.is_empty() {
            return Err(Error::invalid(format!("empty {what}")));
        }
        if !seen.insert(id.as_str()) {
            return Err(Error::invalid(format!("duplicate {what} '{id}'")));
        }
    }
    Ok(())
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn expect_header(path: &Path, header: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(Error::csv(
            path,
            format!("expected header {:?}, found {:?}", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

fn parse_f64(path: &Path, line: u64, field: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::csv(path, format!("line {line}: '{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::csv(path, format!("line {line}: non-finite value '{field}'")));
    }
    Ok(v)
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

/// Fills gaps by linear interpolation in time; leading and trailing gaps take
/// the nearest observed value. Returns the number of filled cells, or `None`
/// when nothing was observed.
pub fn impute_series(series: &mut [Option<f64>]) -> Option<usize> {
    let observed: Vec<usize> = (0..series.len()).filter(|&i| series[i].is_some()).collect();
    let (&first, &last) = (observed.first()?, observed.last()?);
    let mut filled = 0;
    for i in 0..first {
        series[i] = series[first];
        filled += 1;
    }
    for i in (last + 1)..series.len() {
        series[i] = series[last];
        filled += 1;
    }
    for w in observed.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi - lo < 2 {
            continue;
        }
        let (a, b) = (series[lo].unwrap(), series[hi].unwrap());
        for i in (lo + 1)..hi {
            let frac = (i - lo) as f64 / (hi - lo) as f64;
            series[i] = Some(a + (b - a) * frac);
            filled += 1;
        }
    }
    Some(filled)
}

/// Loads `voltages.csv` and, when given, `locations.csv`.
pub fn load_dataset(
    voltages_path: &Path,
    locations_path: Option<&Path>,
) -> Result<(MeterDataset, IngestReport)> {
    let mut rdr = reader(voltages_path)?;
    let header = rdr
        .headers()
        .map_err(|e| Error::csv(voltages_path, e.to_string()))?
        .clone();
    if header.get(0) != Some("meter_id") {
        return Err(Error::csv(voltages_path, "first column must be 'meter_id'"));
    }
    let timestamps: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let t = timestamps.len();
    if t < 2 {
        return Err(Error::csv(voltages_path, "need at least 2 timestep columns"));
    }

    let mut report = IngestReport::default();
    let mut ids = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::csv(voltages_path, e.to_string()))?;
        let line = line_of(&record);
        if record.len() != t + 1 {
            return Err(Error::csv(
                voltages_path,
                format!("line {line}: {} fields, expected {}", record.len(), t + 1),
            ));
        }
        let id = record[0].to_owned();
        if id.is_empty() {
            return Err(Error::csv(voltages_path, format!("line {line}: empty meter_id")));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::invalid(format!("duplicate meter_id '{id}'")));
        }
        let mut series = Vec::with_capacity(t);
        for field in record.iter().skip(1) {
            if field.is_empty() {
                series.push(None);
                continue;
            }
            let v = parse_f64(voltages_path, line, field)?;
            if !(v > 0.0 && v < 2.0) {
                return Err(Error::invalid(format!(
                    "meter {id}: voltage {v} outside (0, 2) p.u."
                )));
            }
            series.push(Some(v));
        }
        let missing = series.iter().filter(|v| v.is_none()).count();
        if missing as f64 > MAX_MISSING_FRACTION * t as f64 {
            let msg = format!(
                "meter {id}: {missing}/{t} values missing (> {:.0}%), meter dropped",
                MAX_MISSING_FRACTION * 100.0
            );
            warn!("{msg}");
            report.warnings.push(msg);
            report.dropped_meters.push(id);
            continue;
        }
        report.imputed_cells += impute_series(&mut series).unwrap_or(0);
        ids.push(id);
        rows.push(series.into_iter().map(|v| v.unwrap()).collect());
    }

    let n = rows.len();
    let voltages = DMatrix::from_fn(n, t, |i, j| rows[i][j]);
    let locations = match locations_path {
        Some(p) => Some(load_locations(p, &ids, &report.dropped_meters)?),
        None => None,
    };
    let ds = MeterDataset::new(ids, voltages, locations, timestamps)?;
    Ok((ds, report))
}

/// Reads `meter_id,lat_deg,lon_deg` and aligns the rows with `meter_ids`.
/// Rows for meters in `dropped` are ignored.
fn load_locations(path: &Path, meter_ids: &[String], dropped: &[String]) -> Result<Vec<GeoPoint>> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| Error::csv(path, e.to_string()))?.clone();
    expect_header(path, &header, &["meter_id", "lat_deg", "lon_deg"])?;
    let index: HashMap<&str, usize> = meter_ids
        .iter()
        .enumerate()
        .map(|(i, m)| (m.as_str(), i))
        .collect();
    let mut out: Vec<Option<GeoPoint>> = vec![None; meter_ids.len()];
    for record in rdr.records() {
        let record = record.map_err(|e| Error::csv(path, e.to_string()))?;
        let line = line_of(&record);
        if record.len() != 3 {
            return Err(Error::csv(path, format!("line {line}: expected 3 fields")));
        }
        let id = &record[0];
        let point = GeoPoint::from_degrees(
            parse_f64(path, line, &record[1])?,
            parse_f64(path, line, &record[2])?,
        )
        .map_err(|e| Error::invalid(format!("meter {id}: {e}")))?;
        match index.get(id) {
            Some(&i) => {
                if out[i].replace(point).is_some() {
                    return Err(Error::invalid(format!("duplicate location for meter '{id}'")));
                }
            }
            None if dropped.iter().any(|d| d == id) => {}
            None => return Err(Error::invalid(format!("location for unknown meter '{id}'"))),
        }
    }
    out.into_iter()
        .zip(meter_ids)
        .map(|(p, id)| p.ok_or_else(|| Error::invalid(format!("no location for meter '{id}'"))))
        .collect()
}

pub fn load_transformers(path: &Path) -> Result<TransformerSet> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| Error::csv(path, e.to_string()))?.clone();
    expect_header(path, &header, &["xfmr_id", "lat_deg", "lon_deg"])?;
    let mut ids = Vec::new();
    let mut locations = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::csv(path, e.to_string()))?;
        let line = line_of(&record);
        if record.len() != 3 {
            return Err(Error::csv(path, format!("line {line}: expected 3 fields")));
        }
        let id = record[0].to_owned();
        let point = GeoPoint::from_degrees(
            parse_f64(path, line, &record[1])?,
            parse_f64(path, line, &record[2])?,
        )
        .map_err(|e| Error::invalid(format!("transformer {id}: {e}")))?;
        ids.push(id);
        locations.push(point);
    }
    TransformerSet::new(ids, locations)
}

/// Loads a ground-truth file against a known meter and transformer universe.
pub fn load_ground_truth(
    path: &Path,
    meters: &MeterDataset,
    xfmrs: &TransformerSet,
) -> Result<GroundTruth> {
    load_ground_truth_for(path, &meters.meter_ids, Some(&xfmrs.xfmr_ids))
}

/// Like [`load_ground_truth`], but only meter ids are required. Without a
/// transformer list the ids are taken from the file in order of first appearance.
pub fn load_ground_truth_for(
    path: &Path,
    meter_ids: &[String],
    xfmr_ids: Option<&[String]>,
) -> Result<GroundTruth> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| Error::csv(path, e.to_string()))?.clone();
    expect_header(path, &header, &["meter_id", "xfmr_id"])?;

    let meter_index: HashMap<&str, usize> = meter_ids
        .iter()
        .enumerate()
        .map(|(i, m)| (m.as_str(), i))
        .collect();
    let mut xfmrs: Vec<String> = xfmr_ids.map(<[String]>::to_vec).unwrap_or_default();
    let fixed_xfmrs = xfmr_ids.is_some();
    let mut labels: Vec<Option<usize>> = vec![None; meter_ids.len()];

    for record in rdr.records() {
        let record = record.map_err(|e| Error::csv(path, e.to_string()))?;
        let line = line_of(&record);
        if record.len() != 2 {
            return Err(Error::csv(path, format!("line {line}: expected 2 fields")));
        }
        let (meter, xfmr) = (&record[0], &record[1]);
        let &i = meter_index
            .get(meter)
            .ok_or_else(|| Error::invalid(format!("ground truth: unknown meter '{meter}'")))?;
        let j = match xfmrs.iter().position(|x| x == xfmr) {
            Some(j) => j,
            None if !fixed_xfmrs && !xfmr.is_empty() => {
                xfmrs.push(xfmr.to_owned());
                xfmrs.len() - 1
            }
            None => {
                return Err(Error::invalid(format!(
                    "ground truth: unknown transformer '{xfmr}'"
                )))
            }
        };
        if labels[i].replace(j).is_some() {
            return Err(Error::invalid(format!(
                "ground truth: meter '{meter}' listed twice"
            )));
        }
    }
    let labels = labels
        .into_iter()
        .zip(meter_ids)
        .map(|(l, m)| l.ok_or_else(|| Error::invalid(format!("ground truth: meter '{m}' not mapped"))))
        .collect::<Result<Vec<_>>>()?;
    GroundTruth::new(meter_ids.to_vec(), xfmrs, labels)
}

/// Degree value that converts back to exactly `rad` through `to_radians`,
/// so that files written here reload bit-identically.
pub fn exact_degrees(rad: f64) -> f64 {
    let guess = rad.to_degrees();
    if guess.to_radians() == rad {
        return guess;
    }
    let mut lo = guess;
    let mut hi = guess;
    for _ in 0..64 {
        lo = lo.next_down();
        hi = hi.next_up();
        if lo.to_radians() == rad {
            return lo;
        }
        if hi.to_radians() == rad {
            return hi;
        }
    }
    guess
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().from_writer(file))
}

fn csv_write_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::csv(path, e.to_string())
}

pub fn write_voltages(ds: &MeterDataset, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_write_err(path);
    let mut header = vec!["meter_id".to_owned()];
    header.extend(ds.timestamps.iter().cloned());
    w.write_record(&header).map_err(&err)?;
    for (i, id) in ds.meter_ids.iter().enumerate() {
        let mut row = vec![id.clone()];
        row.extend(ds.voltages.row(i).iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_points(path: &Path, id_col: &str, ids: &[String], points: &[GeoPoint]) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_write_err(path);
    w.write_record([id_col, "lat_deg", "lon_deg"]).map_err(&err)?;
    for (id, p) in ids.iter().zip(points) {
        w.write_record([
            id.clone(),
            exact_degrees(p.lat).to_string(),
            exact_degrees(p.lon).to_string(),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_locations(ds: &MeterDataset, path: &Path) -> Result<()> {
    let locs = ds
        .locations
        .as_ref()
        .ok_or_else(|| Error::invalid("dataset has no locations"))?;
    write_points(path, "meter_id", &ds.meter_ids, locs)
}

pub fn write_transformers(xfmrs: &TransformerSet, path: &Path) -> Result<()> {
    write_points(path, "xfmr_id", &xfmrs.xfmr_ids, &xfmrs.locations)
}

pub fn write_ground_truth(truth: &GroundTruth, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_write_err(path);
    w.write_record(["meter_id", "xfmr_id"]).map_err(&err)?;
    for (m, &l) in truth.meter_ids.iter().zip(&truth.labels) {
        w.write_record([m.as_str(), truth.xfmr_ids[l].as_str()])
            .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::File::create(&p)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        p
    }

    #[test]
    fn complete_file_loads_without_imputation() {
        let dir = tempfile::tempdir().unwrap();
        let v = write(
            dir.path(),
            "v.csv",
            "meter_id,t_0,t_1,t_2\nm1,1.0,0.99,0.98\nm2,1.01,1.0,0.97\nm3,0.995,0.99,0.99\n",
        );
        let (ds, report) = load_dataset(&v, None).unwrap();
        assert_eq!(ds.n_meters(), 3);
        assert_eq!(ds.n_steps(), 3);
        assert_eq!(report.imputed_cells, 0);
        assert!(report.dropped_meters.is_empty());
        assert_eq!(ds.voltages[(1, 2)], 0.97);
        assert_eq!(ds.timestamps, vec!["t_0", "t_1", "t_2"]);
    }

    #[test]
    fn sparse_gaps_are_imputed_and_counted() {
        // 1.73% of 10x100 cells = 17.3 -> 17 blanks, spread across meters.
        let dir = tempfile::tempdir().unwrap();
        let mut body = String::from("meter_id");
        for t in 0..100 {
            body.push_str(&format!(",t_{t}"));
        }
        body.push('\n');
        let mut blanks = 0;
        for m in 0..10 {
            body.push_str(&format!("m{m}"));
            for t in 0..100 {
                let blank = (m * 100 + t) % 59 == 7 && blanks < 17;
                if blank {
                    blanks += 1;
                    body.push(',');
                } else {
                    body.push_str(&format!(",{}", 1.0 - 0.0001 * ((m * t) % 13) as f64));
                }
            }
            body.push('\n');
        }
        assert_eq!(blanks, 17);
        let v = write(dir.path(), "v.csv", &body);
        let (ds, report) = load_dataset(&v, None).unwrap();
        assert_eq!(report.imputed_cells, (0.0173f64 * 10.0 * 100.0).round() as usize);
        assert!(ds.voltages.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn heavily_missing_meter_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let v = write(
            dir.path(),
            "v.csv",
            "meter_id,t_0,t_1,t_2,t_3\nm1,1,1,1,1\nm2,1,,1,1\nm3,0.99,0.98,0.97,0.96\n",
        );
        // m2 misses 25% > 20%
        let (ds, report) = load_dataset(&v, None).unwrap();
        assert_eq!(ds.n_meters(), 2);
        assert_eq!(report.dropped_meters, vec!["m2"]);
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn malformed_inputs_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            "meter_id,t_0,t_1\nm1,1,1\nm1,1,1\n",
            "meter_id,t_0,t_1\nm1,1,1\nm2,1\n",
            "meter_id,t_0,t_1\nm1,1,abc\nm2,1,1\n",
            "meter_id,t_0,t_1\nm1,1,2.5\nm2,1,1\n",
            "id,t_0,t_1\nm1,1,1\nm2,1,1\n",
            "meter_id,t_0,t_1\nm1,1,1\n",
        ];
        for (i, body) in cases.iter().enumerate() {
            let v = write(dir.path(), &format!("v{i}.csv"), body);
            assert!(load_dataset(&v, None).is_err(), "case {i} accepted");
        }
    }

    #[test]
    fn locations_converted_and_validated() {
        let dir = tempfile::tempdir().unwrap();
        let v = write(dir.path(), "v.csv", "meter_id,t_0,t_1\nm1,1,1\nm2,0.99,1\n");
        let l = write(dir.path(), "l.csv", "meter_id,lat_deg,lon_deg\nm2,10,20\nm1,-30,45\n");
        let (ds, _) = load_dataset(&v, Some(&l)).unwrap();
        let locs = ds.locations.unwrap();
        assert_eq!(locs[0].lat, (-30f64).to_radians());
        assert_eq!(locs[1].lon, 20f64.to_radians());

        let bad = write(dir.path(), "b.csv", "meter_id,lat_deg,lon_deg\nm2,91,20\nm1,-30,45\n");
        assert!(load_dataset(&v, Some(&bad)).is_err());
        let missing = write(dir.path(), "c.csv", "meter_id,lat_deg,lon_deg\nm2,10,20\n");
        assert!(load_dataset(&v, Some(&missing)).is_err());
    }

    #[test]
    fn transformer_file_rules() {
        let dir = tempfile::tempdir().unwrap();
        let ok = write(dir.path(), "x.csv", "xfmr_id,lat_deg,lon_deg\nA,40,-88\nB,40.01,-88\n");
        assert_eq!(load_transformers(&ok).unwrap().len(), 2);
        let dup = write(dir.path(), "d.csv", "xfmr_id,lat_deg,lon_deg\nA,40,-88\nA,40.01,-88\n");
        assert!(load_transformers(&dup).is_err());
        let lat = write(dir.path(), "l.csv", "xfmr_id,lat_deg,lon_deg\nA,91,-88\n");
        assert!(load_transformers(&lat).is_err());
    }

    #[test]
    fn ground_truth_rules() {
        let dir = tempfile::tempdir().unwrap();
        let v = write(
            dir.path(),
            "v.csv",
            "meter_id,t_0,t_1\nm1,1,1\nm2,0.99,1\nm3,0.98,1\nm4,0.97,1\n",
        );
        let x = write(dir.path(), "x.csv", "xfmr_id,lat_deg,lon_deg\nA,40,-88\nB,40.01,-88\n");
        let (ds, _) = load_dataset(&v, None).unwrap();
        let xs = load_transformers(&x).unwrap();

        let g = write(dir.path(), "g.csv", "meter_id,xfmr_id\nm1,A\nm2,A\nm3,B\nm4,B\n");
        let truth = load_ground_truth(&g, &ds, &xs).unwrap();
        assert_eq!(truth.cluster_sizes(), vec![2, 2]);
        assert_eq!(truth.transformer_of("m3"), Some("B"));

        let cases = [
            "meter_id,xfmr_id\nm1,A\nm2,A\nm3,B\n",
            "meter_id,xfmr_id\nm1,A\nm2,A\nm3,B\nm4,C\n",
            "meter_id,xfmr_id\nm1,A\nm2,A\nm3,B\nm4,B\nm4,B\n",
            "meter_id,xfmr_id\nm1,A\nm2,A\nm3,A\nm4,A\n",
            "meter_id,xfmr_id\nm1,A\nm2,A\nm3,B\nm9,B\n",
        ];
        for (i, body) in cases.iter().enumerate() {
            let g = write(dir.path(), &format!("g{i}.csv"), body);
            assert!(load_ground_truth(&g, &ds, &xs).is_err(), "case {i} accepted");
        }
    }

    #[test]
    fn write_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let ds = MeterDataset::new(
            vec!["a".into(), "b".into(), "c".into()],
            DMatrix::from_row_slice(3, 2, &[1.0 / 3.0, 0.987654321, 1.1, 0.9, 0.95, 1.05]),
            Some(vec![
                GeoPoint::from_degrees(40.123456789, -88.2).unwrap(),
                GeoPoint::new(0.7, -1.5).unwrap(),
                GeoPoint::new(0.1 + 0.2, 3.0).unwrap(),
            ]),
            vec!["2020-01-01T00:00".into(), "2020-01-01T00:15".into()],
        )
        .unwrap();
        let vp = dir.path().join("v.csv");
        let lp = dir.path().join("l.csv");
        write_voltages(&ds, &vp).unwrap();
        write_locations(&ds, &lp).unwrap();
        let (back, report) = load_dataset(&vp, Some(&lp)).unwrap();
        assert_eq!(report.imputed_cells, 0);
        assert_eq!(back, ds);
    }

    proptest! {
        #[test]
        fn imputation_keeps_observed_and_stays_in_range(
            raw in prop::collection::vec(prop::option::weighted(0.7, 0.9f64..1.1), 2..60)
        ) {
            let mut series = raw.clone();
            let observed: Vec<f64> = raw.iter().flatten().copied().collect();
            let filled = impute_series(&mut series);
            if observed.is_empty() {
                prop_assert!(filled.is_none());
            } else {
                prop_assert_eq!(filled.unwrap(), raw.len() - observed.len());
                let lo = observed.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = observed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                for (before, after) in raw.iter().zip(&series) {
                    let after = after.unwrap();
                    if let Some(b) = before {
                        prop_assert_eq!(*b, after);
                    }
                    prop_assert!(after >= lo && after <= hi);
                }
            }
        }

        #[test]
        fn degrees_round_trip_exactly(deg in -180.0f64..180.0) {
            let rad = deg.to_radians();
            prop_assert_eq!(exact_degrees(rad).to_radians(), rad);
        }
    }
}
