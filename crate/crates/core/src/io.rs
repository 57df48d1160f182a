//! Run manifests and plot-ready CSV/JSON artifacts.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::experiments::{BathReference, CurvePoint, PropagatorKind, ThermalizationCurve};
use crate::stats::{EnergyHistogram, TemperatureFit};

pub const CURVE_HEADER: &str = "omega,T_tp,T_tp_err,goodness,overflow_frac,T_bath_init,T_bath_final";
pub const HISTOGRAM_HEADER: &str = "bin_lo,bin_hi,count";

/// Everything needed to rerun an artifact bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: Value,
    pub seeds: Vec<u64>,
    pub version: String,
    pub propagator: PropagatorKind,
    pub dt: Option<f64>,
    pub delta_t_steps: Option<u64>,
    pub max_snap: f64,
    pub started_unix: u64,
    pub finished_unix: u64,
    /// Per grid point, per bath.
    pub bath_temperatures: Vec<(f64, Vec<BathReference>)>,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(config: Value, seeds: Vec<u64>, propagator: PropagatorKind, started_unix: u64) -> Self {
        RunManifest {
            config,
            seeds,
            version: env!("CARGO_PKG_VERSION").to_string(),
            propagator,
            dt: None,
            delta_t_steps: None,
            max_snap: 0.0,
            started_unix,
            finished_unix: started_unix,
            bath_temperatures: vec![],
        }
    }

    /// Copies integrator details and bath fits from a finished curve.
    pub fn record_curve(&mut self, curve: &ThermalizationCurve) {
        self.dt = self.dt.or(curve.dt);
        self.delta_t_steps = self.delta_t_steps.or(curve.delta_t_steps);
        self.max_snap = self.max_snap.max(curve.max_snap);
        self.bath_temperatures
            .extend(curve.points.iter().map(|p| (p.omega, p.baths.clone())));
        self.finished_unix = unix_now();
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Io(format!("line {line}: cannot parse `{field}` as a number")))
}

/// Writes one row per grid point with 17 significant digits.
pub fn emit_curve(curve: &ThermalizationCurve, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{CURVE_HEADER}")?;
    for p in &curve.points {
        let row = [
            p.omega,
            p.t_tp,
            p.t_tp_err,
            p.goodness,
            p.overflow_frac,
            p.t_bath_init,
            p.t_bath_final,
        ];
        writeln!(w, "{}", row.map(fmt).join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// One parsed row of a curve CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow {
    pub omega: f64,
    pub t_tp: f64,
    pub t_tp_err: f64,
    pub goodness: f64,
    pub overflow_frac: f64,
    pub t_bath_init: f64,
    pub t_bath_final: f64,
}

impl From<&CurvePoint> for CurveRow {
    fn from(p: &CurvePoint) -> Self {
        CurveRow {
            omega: p.omega,
            t_tp: p.t_tp,
            t_tp_err: p.t_tp_err,
            goodness: p.goodness,
            overflow_frac: p.overflow_frac,
            t_bath_init: p.t_bath_init,
            t_bath_final: p.t_bath_final,
        }
    }
}

fn read_rows(path: &Path, header: &str, width: usize) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == header => {}
        other => {
            return Err(Error::Io(format!(
                "{}: expected header `{header}`, found `{}`",
                path.display(),
                other.unwrap_or("")
            )))
        }
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let fields: Vec<String> = l.split(',').map(str::to_string).collect();
            if fields.len() != width {
                return Err(Error::Io(format!("line {}: expected {width} fields", i + 2)));
            }
            Ok(fields)
        })
        .collect()
}

pub fn read_curve(path: &Path) -> Result<Vec<CurveRow>> {
    read_rows(path, CURVE_HEADER, 7)?
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let v = f
                .iter()
                .map(|s| parse_f64(s, i + 2))
                .collect::<Result<Vec<f64>>>()?;
            Ok(CurveRow {
                omega: v[0],
                t_tp: v[1],
                t_tp_err: v[2],
                goodness: v[3],
                overflow_frac: v[4],
                t_bath_init: v[5],
                t_bath_final: v[6],
            })
        })
        .collect()
}

/// JSON sidecar written next to a histogram CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramSidecar {
    pub fit: Option<TemperatureFit>,
    pub fit_error: Option<String>,
    pub overflow: u64,
    pub total: u64,
    pub manifest: Option<String>,
}

pub fn sidecar_path(csv: &Path) -> std::path::PathBuf {
    csv.with_extension("json")
}

/// Writes `bin_lo,bin_hi,count` rows plus a sidecar at `path` with a `.json`
/// extension. An empty histogram gives a header-only file.
pub fn emit_histogram(
    hist: Option<&EnergyHistogram>,
    fit: std::result::Result<&TemperatureFit, &Error>,
    manifest: Option<&Path>,
    path: &Path,
) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{HISTOGRAM_HEADER}")?;
    if let Some(h) = hist {
        for (i, c) in h.counts.iter().enumerate() {
            writeln!(w, "{},{},{c}", fmt(h.bin_edges[i]), fmt(h.bin_edges[i + 1]))?;
        }
    }
    w.flush()?;
    let sidecar = HistogramSidecar {
        fit: fit.ok().cloned(),
        fit_error: fit.err().map(|e| e.to_string()),
        overflow: hist.map_or(0, |h| h.overflow),
        total: hist.map_or(0, |h| h.total),
        manifest: manifest.map(|p| p.display().to_string()),
    };
    write_json(&sidecar_path(path), &sidecar)
}

/// Reads a histogram CSV and its sidecar; `None` for a header-only file.
pub fn read_histogram(path: &Path) -> Result<Option<EnergyHistogram>> {
    let rows = read_rows(path, HISTOGRAM_HEADER, 3)?;
    if rows.is_empty() {
        return Ok(None);
    }
    let mut edges = Vec::with_capacity(rows.len() + 1);
    let mut counts = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        let lo = parse_f64(&r[0], i + 2)?;
        let hi = parse_f64(&r[1], i + 2)?;
        if i == 0 {
            edges.push(lo);
        } else if lo != edges[i] {
            return Err(Error::Io(format!("line {}: bins are not contiguous", i + 2)));
        }
        edges.push(hi);
        counts.push(
            r[2].trim()
                .parse()
                .map_err(|_| Error::Io(format!("line {}: bad count `{}`", i + 2, r[2])))?,
        );
    }
    let side = sidecar_path(path);
    let overflow = if side.exists() {
        read_json::<HistogramSidecar>(&side)?.overflow
    } else {
        0
    };
    EnergyHistogram::from_parts(edges, counts, overflow).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{build_histogram, fit_temperature};

    fn point(omega: f64, t: f64) -> CurvePoint {
        CurvePoint {
            omega,
            t_tp: t,
            t_tp_err: 0.1 / 3.0,
            goodness: 1.25,
            overflow_frac: 0.001,
            t_bath_init: 5.0,
            t_bath_final: 4.9,
            baths: vec![],
            mean_energy: t,
            skewness: 2.0,
            seed_temperatures: vec![t],
            failures: vec![],
        }
    }

    fn curve(points: Vec<CurvePoint>) -> ThermalizationCurve {
        ThermalizationCurve {
            points,
            dt: None,
            delta_t_steps: None,
            max_snap: 0.0,
        }
    }

    #[test]
    fn empty_curve_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        emit_curve(&curve(vec![]), &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), format!("{CURVE_HEADER}\n"));
        assert!(read_curve(&path).unwrap().is_empty());
    }

    #[test]
    fn curve_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let mut pts = vec![point(0.1, 1.0 / 3.0), point(0.5, 4.99999999999), point(1.0, 2.0)];
        pts[2].t_tp = f64::NAN;
        let c = curve(pts);
        emit_curve(&c, &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 4);
        let rows = read_curve(&path).unwrap();
        for (r, p) in rows.iter().zip(&c.points) {
            let expect = CurveRow::from(p);
            assert_eq!(r.omega.to_bits(), expect.omega.to_bits());
            assert_eq!(r.t_tp_err.to_bits(), expect.t_tp_err.to_bits());
            if expect.t_tp.is_nan() {
                assert!(r.t_tp.is_nan());
            } else {
                assert_eq!(r.t_tp.to_bits(), expect.t_tp.to_bits());
            }
        }
    }

    #[test]
    fn histogram_round_trip_preserves_counts() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        let energies: Vec<f64> = (1..=500).map(|i| (i as f64 * 0.37) % 7.0 + 0.01).collect();
        let h = build_histogram(&energies, 12, 6.0).unwrap();
        let fit = fit_temperature(&h);
        emit_histogram(Some(&h), fit.as_ref(), None, &path).unwrap();
        let back = read_histogram(&path).unwrap().unwrap();
        assert_eq!(back, h);
        assert_eq!(back.counts.iter().sum::<u64>() + back.overflow, 500);
        let side: HistogramSidecar = read_json(&sidecar_path(&path)).unwrap();
        assert_eq!(side.total, 500);
    }

    #[test]
    fn empty_histogram_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        let err = Error::EmptyInput("none");
        emit_histogram(None, Err(&err), None, &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), format!("{HISTOGRAM_HEADER}\n"));
        assert!(read_histogram(&path).unwrap().is_none());
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let mut m = RunManifest::new(serde_json::json!({"bath1_n": 4}), vec![1, 2], PropagatorKind::Eigen, 7);
        m.record_curve(&curve(vec![point(0.5, 5.0)]));
        m.write(&path).unwrap();
        assert_eq!(RunManifest::read(&path).unwrap(), m);
    }
}
