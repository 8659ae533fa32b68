//! File formats.
//!
//! * Pattern CSV: optional `# key: value` comment lines, then the header
//!   `theta_deg,phi_deg,re_etheta,im_etheta,re_ephi,im_ephi` (or the
//!   `theta_rad,phi_rad` variant) and one θ-major row per grid point.
//! * `evm_map.csv`: `theta_deg,phi_deg,evm_linear,evm_db,masked`.
//! * `cdf_stream{1,2}.csv`: `error,cumulative_probability`.
//! * `constellation.csv`: ideal and actual symbol estimates, see
//!   [`save_constellation_csv`].
//! * `metrics.json` and run reports: JSON, with non-finite numbers written as
//!   the strings `"-inf"`, `"inf"` or `"nan"`.
//!
//! Numbers use Rust's shortest round-trip formatting, which is lossless and
//! locale-independent.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::de::{self, DeserializeOwned, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::beamspace::EvmMap;
use crate::constellation::RatioSet;
use crate::error::{Error, Result};
use crate::pipeline::ConstellationRow;
use crate::sphere::{SphericalGrid, VectorPattern};
use crate::stats::EmpiricalCdf;

pub const PATTERN_COLUMNS: [&str; 6] = ["theta_deg", "phi_deg", "re_etheta", "im_etheta", "re_ephi", "im_ephi"];

/// Maximum deviation, in degrees, between a file angle and the regular grid.
const ANGLE_TOLERANCE_DEG: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnit {
    Deg,
    Rad,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternFileHeader {
    pub n_theta: usize,
    pub n_phi: usize,
    pub angle_unit: AngleUnit,
    pub frequency: Option<String>,
    pub state: Option<String>,
}

/// Formats a float losslessly; non-finite values become `inf`, `-inf`, `nan`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v != 0.0 && !(1e-5..1e16).contains(&v.abs()) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn load_pattern_csv(path: impl AsRef<Path>) -> Result<VectorPattern> {
    load_pattern_file(path).map(|(_, p)| p)
}

/// Reads a pattern CSV and rebuilds its grid. Rows must follow the regular
/// grid exactly; nothing is reordered or interpolated.
pub fn load_pattern_file(path: impl AsRef<Path>) -> Result<(PatternFileHeader, VectorPattern)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;

    let mut frequency = None;
    let mut state = None;
    for line in text.lines().take_while(|l| l.trim_start().starts_with('#')) {
        let body = line.trim_start().trim_start_matches('#').trim();
        if let Some((key, value)) = body.split_once(':') {
            match key.trim().to_ascii_lowercase().as_str() {
                "frequency" => frequency = Some(value.trim().to_string()),
                "state" => state = Some(value.trim().to_string()),
                _ => {}
            }
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(csv_err(path))?.clone();

    let angle_unit = if headers.iter().any(|h| h == "theta_rad") {
        AngleUnit::Rad
    } else {
        AngleUnit::Deg
    };
    let names: [&str; 6] = match angle_unit {
        AngleUnit::Deg => PATTERN_COLUMNS,
        AngleUnit::Rad => ["theta_rad", "phi_rad", "re_etheta", "im_etheta", "re_ephi", "im_ephi"],
    };
    let mut cols = [0usize; 6];
    for (slot, name) in cols.iter_mut().zip(names) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })?;
    }

    let mut rows: Vec<(u64, [f64; 6])> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::Parse {
                path: path.to_path_buf(),
                line,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let mut vals = [0.0; 6];
        for (v, (&c, name)) in vals.iter_mut().zip(cols.iter().zip(names)) {
            let field = record.get(c).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("missing value for `{name}`"),
            })?;
            let x: f64 = field.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("`{name}` is not a number: {field:?}"),
            })?;
            if !x.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("`{name}` is not finite"),
                });
            }
            *v = match (angle_unit, name) {
                (AngleUnit::Rad, "theta_rad" | "phi_rad") => x.to_degrees(),
                _ => x,
            };
        }
        rows.push((line, vals));
    }
    if rows.is_empty() {
        return Err(Error::IrregularGrid {
            path: path.to_path_buf(),
            message: "no data rows".into(),
        });
    }

    let irregular = |message: String| Error::IrregularGrid {
        path: path.to_path_buf(),
        message,
    };
    let first_theta = rows[0].1[0];
    let n_phi = rows
        .iter()
        .take_while(|(_, v)| (v[0] - first_theta).abs() <= ANGLE_TOLERANCE_DEG)
        .count();
    if rows.len() % n_phi != 0 {
        return Err(irregular(format!(
            "{} rows is not a multiple of the {n_phi} azimuth samples in the first ring",
            rows.len()
        )));
    }
    let n_theta = rows.len() / n_phi;
    let grid = Arc::new(SphericalGrid::new(n_theta, n_phi).map_err(|e| irregular(e.to_string()))?);

    let mut e_theta = Vec::with_capacity(rows.len());
    let mut e_phi = Vec::with_capacity(rows.len());
    for (k, (line, v)) in rows.iter().enumerate() {
        let (t, p) = grid.coords(k);
        if (v[0] - t.to_degrees()).abs() > ANGLE_TOLERANCE_DEG || (v[1] - p.to_degrees()).abs() > ANGLE_TOLERANCE_DEG {
            return Err(irregular(format!(
                "line {line}: expected (theta, phi) = ({}, {}) deg, found ({}, {})",
                t.to_degrees(),
                p.to_degrees(),
                v[0],
                v[1]
            )));
        }
        e_theta.push(Complex64::new(v[2], v[3]));
        e_phi.push(Complex64::new(v[4], v[5]));
    }

    let header = PatternFileHeader {
        n_theta,
        n_phi,
        angle_unit,
        frequency,
        state,
    };
    Ok((header, VectorPattern::new(grid, e_theta, e_phi)?))
}

/// Writes a pattern in degrees with optional `state` and `frequency`
/// metadata comments.
pub fn save_pattern_csv(
    path: impl AsRef<Path>,
    pattern: &VectorPattern,
    state: Option<&str>,
    frequency: Option<&str>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    let mut body = || -> std::io::Result<()> {
        if let Some(s) = state {
            writeln!(out, "# state: {s}")?;
        }
        if let Some(f) = frequency {
            writeln!(out, "# frequency: {f}")?;
        }
        writeln!(out, "{}", PATTERN_COLUMNS.join(","))?;
        let grid = pattern.grid();
        for k in 0..grid.len() {
            let (t, p) = grid.coords(k);
            let [a, b] = pattern.at(k);
            writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_f64(t.to_degrees()),
                fmt_f64(p.to_degrees()),
                fmt_f64(a.re),
                fmt_f64(a.im),
                fmt_f64(b.re),
                fmt_f64(b.im)
            )?;
        }
        out.flush()
    };
    body().map_err(io_err(path))
}

pub fn save_evm_map_csv(path: impl AsRef<Path>, map: &EvmMap) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    let mut body = || -> std::io::Result<()> {
        writeln!(out, "theta_deg,phi_deg,evm_linear,evm_db,masked")?;
        let grid = map.grid();
        for k in 0..grid.len() {
            let (t, p) = grid.coords(k);
            let (lin, db, flag) = if map.masked[k] {
                (f64::NAN, f64::NAN, 1)
            } else {
                let e = map.evm.at(k);
                (e, 20.0 * e.log10(), 0)
            };
            writeln!(
                out,
                "{},{},{},{},{}",
                fmt_f64(t.to_degrees()),
                fmt_f64(p.to_degrees()),
                fmt_f64(lin),
                fmt_f64(db),
                flag
            )?;
        }
        out.flush()
    };
    body().map_err(io_err(path))
}

pub fn save_cdf_csv(path: impl AsRef<Path>, cdf: &EmpiricalCdf) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    let mut body = || -> std::io::Result<()> {
        writeln!(out, "error,cumulative_probability")?;
        for (v, p) in cdf.points() {
            writeln!(out, "{},{}", fmt_f64(v), fmt_f64(p))?;
        }
        out.flush()
    };
    body().map_err(io_err(path))
}

/// `side,ratio,x1_re,x1_im,x2_re,x2_im,est1_re,est1_im,est2_re,est2_im,error1,error2`.
/// `x` is the ideal point, `est` the actual one.
pub fn save_constellation_csv(path: impl AsRef<Path>, rows: &[ConstellationRow], ratios: &RatioSet) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    let mut body = || -> std::io::Result<()> {
        writeln!(
            out,
            "side,ratio,x1_re,x1_im,x2_re,x2_im,est1_re,est1_im,est2_re,est2_im,error1,error2"
        )?;
        for r in rows {
            let values = [
                r.x1.re,
                r.x1.im,
                r.x2.re,
                r.x2.im,
                r.actual[0].re,
                r.actual[0].im,
                r.actual[1].re,
                r.actual[1].im,
                (r.actual[0] - r.x1).norm(),
                (r.actual[1] - r.x2).norm(),
            ];
            write!(out, "{},{}", r.side.as_str(), ratios.label(r.ratio_index))?;
            for v in values {
                write!(out, ",{}", fmt_f64(v))?;
            }
            writeln!(out)?;
        }
        out.flush()
    };
    body().map_err(io_err(path))
}

pub fn load_cdf_csv(path: impl AsRef<Path>) -> Result<EmpiricalCdf> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err(path))?;
    let headers = reader.headers().map_err(csv_err(path))?.clone();
    let col = headers
        .iter()
        .position(|h| h == "error")
        .ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            column: "error".into(),
        })?;
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err(path))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = record.get(col).unwrap_or("");
        let v: f64 = field.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("`error` is not a number: {field:?}"),
        })?;
        values.push(v);
    }
    EmpiricalCdf::from_sorted(values)
}

pub fn save_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn load_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn ensure_dir(dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Writes whichever of `metrics.json`, `evm_map.csv` and `cdf_stream{1,2}.csv`
/// are supplied into `out_dir` and returns the paths written.
pub fn save_results<M: Serialize>(
    out_dir: impl AsRef<Path>,
    metrics: Option<&M>,
    evm: Option<&EvmMap>,
    cdfs: Option<[&EmpiricalCdf; 2]>,
) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    ensure_dir(dir)?;
    let mut written = Vec::new();
    if let Some(m) = metrics {
        let p = dir.join("metrics.json");
        save_json(&p, m)?;
        written.push(p);
    }
    if let Some(map) = evm {
        let p = dir.join("evm_map.csv");
        save_evm_map_csv(&p, map)?;
        written.push(p);
    }
    if let Some(cdfs) = cdfs {
        for (i, cdf) in cdfs.iter().enumerate() {
            let p = dir.join(format!("cdf_stream{}.csv", i + 1));
            save_cdf_csv(&p, cdf)?;
            written.push(p);
        }
    }
    Ok(written)
}

/// `f64` that survives JSON even when infinite or NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JsonF64(pub f64);

impl From<f64> for JsonF64 {
    fn from(v: f64) -> Self {
        Self(v)
    }
}

impl Serialize for JsonF64 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str(&fmt_f64(self.0))
        }
    }
}

impl<'de> Deserialize<'de> for JsonF64 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = JsonF64;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<JsonF64, E> {
                Ok(JsonF64(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<JsonF64, E> {
                Ok(JsonF64(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<JsonF64, E> {
                Ok(JsonF64(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<JsonF64, E> {
                match v {
                    "inf" => Ok(JsonF64(f64::INFINITY)),
                    "-inf" => Ok(JsonF64(f64::NEG_INFINITY)),
                    "nan" => Ok(JsonF64(f64::NAN)),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}
