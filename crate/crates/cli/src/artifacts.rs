//! CSV artifacts: row types, encoders, strict decoders, atomic writes.
//!
//! Floats are written with 17 significant digits so they read back bit for
//! bit; missing values are empty fields.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("{file}: {source}")]
    Io { file: String, source: io::Error },
    #[error("{file}: {source}")]
    Csv { file: String, source: csv::Error },
    #[error("{file}: expected header `{expected}`, found `{found}`")]
    Header { file: String, expected: String, found: String },
    #[error("{file}, row {row}: {reason}")]
    Value { file: String, row: usize, reason: String },
    #[error("{file}: {reason}")]
    Shape { file: String, reason: String },
}

pub type Result<T, E = ArtifactError> = std::result::Result<T, E>;

pub const OBJECT: &str = "object.csv";
pub const TRAJECTORY: &str = "trajectory.csv";
pub const ARM: &str = "arm.csv";
pub const REFERENCE: &str = "reference.csv";
pub const COST: &str = "cost.csv";
pub const QUALITY_MAP: &str = "quality_map.csv";
pub const OPTIMUM: &str = "optimum.csv";

/// File holding the overlay arm for a metric, e.g. `arm_Q1.csv`.
pub fn overlay_arm_file(metric: &str) -> String {
    format!("arm_{metric}.csv")
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct ObjectRow {
    pub s_o: f64,
    pub x: f64,
    pub y: f64,
    pub phi: f64,
    pub kappa_o: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct TrajectoryRow {
    pub s: f64,
    pub rho: f64,
    pub alpha: f64,
    pub s_o: f64,
    pub nu_o: f64,
    pub delta: f64,
    pub in_contact: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct ArmRow {
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub radius: f64,
}

/// Target or equilibrium values plotted next to the trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct ReferenceRow {
    pub s: f64,
    pub rho_ref: Option<f64>,
    pub alpha_ref: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct CostRow {
    pub iteration: usize,
    pub cost: f64,
    pub barrier: f64,
    pub stationarity: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct QualityRow {
    pub d: f64,
    pub psi: f64,
    pub x0: Option<f64>,
    pub y0: Option<f64>,
    pub theta0: Option<f64>,
    #[serde(rename = "Q1")]
    pub q1: Option<f64>,
    #[serde(rename = "Q2")]
    pub q2: Option<f64>,
    #[serde(rename = "Q3")]
    pub q3: Option<f64>,
    pub status: String,
}

impl QualityRow {
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "Q1" => self.q1,
            "Q2" => self.q2,
            "Q3" => self.q3,
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct OptimumRow {
    pub metric: String,
    pub d: f64,
    pub psi: f64,
    pub x0: f64,
    pub y0: f64,
    pub theta0: f64,
    #[serde(rename = "Q1")]
    pub q1: f64,
    #[serde(rename = "Q2")]
    pub q2: f64,
    #[serde(rename = "Q3")]
    pub q3: f64,
    pub evaluations: usize,
}

/// A table schema: column names and per-row encoding.
pub trait Table: Sized + DeserializeOwned {
    const HEADER: &'static [&'static str];
    fn encode(&self) -> Vec<String>;
    /// Domain checks beyond parsing.
    fn check(&self) -> std::result::Result<(), String> {
        Ok(())
    }
}

fn finite(name: &str, v: f64) -> std::result::Result<(), String> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(format!("{name} is not finite"))
    }
}

fn finite_opt(name: &str, v: Option<f64>) -> std::result::Result<(), String> {
    v.map_or(Ok(()), |v| finite(name, v))
}

impl Table for ObjectRow {
    const HEADER: &'static [&'static str] = &["s_o", "x", "y", "phi", "kappa_o"];
    fn encode(&self) -> Vec<String> {
        [self.s_o, self.x, self.y, self.phi, self.kappa_o].map(fmt_f64).to_vec()
    }
    fn check(&self) -> std::result::Result<(), String> {
        [self.s_o, self.x, self.y, self.phi, self.kappa_o].iter().try_for_each(|v| finite("value", *v))
    }
}

impl Table for TrajectoryRow {
    const HEADER: &'static [&'static str] = &["s", "rho", "alpha", "s_o", "nu_o", "delta", "in_contact"];
    fn encode(&self) -> Vec<String> {
        let mut v: Vec<String> = [self.s, self.rho, self.alpha, self.s_o, self.nu_o, self.delta].map(fmt_f64).to_vec();
        v.push(self.in_contact.to_string());
        v
    }
    fn check(&self) -> std::result::Result<(), String> {
        [self.s, self.rho, self.alpha, self.s_o, self.nu_o, self.delta].iter().try_for_each(|v| finite("value", *v))?;
        if self.in_contact > 1 {
            return Err("in_contact must be 0 or 1".into());
        }
        Ok(())
    }
}

impl Table for ArmRow {
    const HEADER: &'static [&'static str] = &["s", "x", "y", "theta", "radius"];
    fn encode(&self) -> Vec<String> {
        [self.s, self.x, self.y, self.theta, self.radius].map(fmt_f64).to_vec()
    }
    fn check(&self) -> std::result::Result<(), String> {
        [self.s, self.x, self.y, self.theta].iter().try_for_each(|v| finite("value", *v))?;
        if !(self.radius >= 0.0 && self.radius.is_finite()) {
            return Err("radius must be non-negative".into());
        }
        Ok(())
    }
}

impl Table for ReferenceRow {
    const HEADER: &'static [&'static str] = &["s", "rho_ref", "alpha_ref"];
    fn encode(&self) -> Vec<String> {
        vec![fmt_f64(self.s), fmt_opt(self.rho_ref), fmt_opt(self.alpha_ref)]
    }
    fn check(&self) -> std::result::Result<(), String> {
        finite("s", self.s)?;
        finite_opt("rho_ref", self.rho_ref)?;
        finite_opt("alpha_ref", self.alpha_ref)
    }
}

impl Table for CostRow {
    const HEADER: &'static [&'static str] = &["iteration", "cost", "barrier", "stationarity"];
    fn encode(&self) -> Vec<String> {
        let mut v = vec![self.iteration.to_string()];
        v.extend([self.cost, self.barrier, self.stationarity].map(fmt_f64));
        v
    }
    fn check(&self) -> std::result::Result<(), String> {
        [self.cost, self.barrier, self.stationarity].iter().try_for_each(|v| finite("value", *v))
    }
}

impl Table for QualityRow {
    const HEADER: &'static [&'static str] = &["d", "psi", "x0", "y0", "theta0", "Q1", "Q2", "Q3", "status"];
    fn encode(&self) -> Vec<String> {
        let mut v = vec![fmt_f64(self.d), fmt_f64(self.psi)];
        v.extend([self.x0, self.y0, self.theta0, self.q1, self.q2, self.q3].map(fmt_opt));
        v.push(self.status.clone());
        v
    }
    fn check(&self) -> std::result::Result<(), String> {
        finite("d", self.d)?;
        finite("psi", self.psi)?;
        for (n, v) in
            [("x0", self.x0), ("y0", self.y0), ("theta0", self.theta0), ("Q1", self.q1), ("Q2", self.q2), ("Q3", self.q3)]
        {
            finite_opt(n, v)?;
        }
        self.status
            .parse::<continuum_grasp::quality::CellStatus>()
            .map(|_| ())
            .map_err(|_| format!("unknown status `{}`", self.status))
    }
}

impl Table for OptimumRow {
    const HEADER: &'static [&'static str] = &["metric", "d", "psi", "x0", "y0", "theta0", "Q1", "Q2", "Q3", "evaluations"];
    fn encode(&self) -> Vec<String> {
        let mut v = vec![self.metric.clone()];
        v.extend([self.d, self.psi, self.x0, self.y0, self.theta0, self.q1, self.q2, self.q3].map(fmt_f64));
        v.push(self.evaluations.to_string());
        v
    }
    fn check(&self) -> std::result::Result<(), String> {
        if !matches!(self.metric.as_str(), "Q1" | "Q2" | "Q3") {
            return Err(format!("unknown metric `{}`", self.metric));
        }
        [self.d, self.psi, self.x0, self.y0, self.theta0, self.q1, self.q2, self.q3].iter().try_for_each(|v| finite("value", *v))
    }
}

pub fn encode<T: Table>(rows: &[T]) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(T::HEADER).expect("in-memory write");
    for r in rows {
        w.write_record(r.encode()).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Decodes a table, requiring the exact header and valid values.
pub fn decode<T: Table, R: Read>(file: &str, reader: R) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let csv_err = |source| ArtifactError::Csv { file: file.to_string(), source };
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().ne(T::HEADER.iter().copied()) {
        return Err(ArtifactError::Header {
            file: file.to_string(),
            expected: T::HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<T>().enumerate() {
        let row = rec.map_err(csv_err)?;
        row.check().map_err(|reason| ArtifactError::Value { file: file.to_string(), row: i + 1, reason })?;
        rows.push(row);
    }
    Ok(rows)
}

/// Writes `bytes` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "no file name"))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Every table a task can produce. Tasks fill what they compute; rendering
/// reads only this, so a reloaded set renders identically.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Artifacts {
    pub object: Vec<ObjectRow>,
    pub trajectory: Option<Vec<TrajectoryRow>>,
    pub arm: Option<Vec<ArmRow>>,
    pub reference: Option<Vec<ReferenceRow>>,
    pub cost: Option<Vec<CostRow>>,
    pub quality: Option<Vec<QualityRow>>,
    pub optimum: Option<Vec<OptimumRow>>,
    /// Overlay arms keyed by metric name.
    pub overlay_arms: Vec<(String, Vec<ArmRow>)>,
}

fn io_err(file: &Path) -> impl Fn(io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io { file: file.display().to_string(), source }
}

fn save<T: Table>(dir: &Path, name: &str, rows: &[T], written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    write_atomic(&path, &encode(rows)).map_err(io_err(&path))?;
    written.push(path);
    Ok(())
}

fn load<T: Table>(dir: &Path, name: &str) -> Result<Option<Vec<T>>> {
    let path = dir.join(name);
    match fs::File::open(&path) {
        Ok(f) => decode(name, io::BufReader::new(f)).map(Some),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(io_err(&path)(e)),
    }
}

impl Artifacts {
    /// Writes every present table; returns the paths written.
    pub fn save(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut written = Vec::new();
        save(dir, OBJECT, &self.object, &mut written)?;
        if let Some(t) = &self.trajectory {
            save(dir, TRAJECTORY, t, &mut written)?;
        }
        if let Some(t) = &self.arm {
            save(dir, ARM, t, &mut written)?;
        }
        if let Some(t) = &self.reference {
            save(dir, REFERENCE, t, &mut written)?;
        }
        if let Some(t) = &self.cost {
            save(dir, COST, t, &mut written)?;
        }
        if let Some(t) = &self.quality {
            save(dir, QUALITY_MAP, t, &mut written)?;
        }
        if let Some(t) = &self.optimum {
            save(dir, OPTIMUM, t, &mut written)?;
        }
        for (m, arm) in &self.overlay_arms {
            save(dir, &overlay_arm_file(m), arm, &mut written)?;
        }
        Ok(written)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let object = load(dir, OBJECT)?.ok_or_else(|| ArtifactError::Shape {
            file: dir.join(OBJECT).display().to_string(),
            reason: "not found; run a task first".into(),
        })?;
        let mut overlay_arms = Vec::new();
        for m in ["Q1", "Q2", "Q3"] {
            if let Some(arm) = load(dir, &overlay_arm_file(m))? {
                overlay_arms.push((m.to_string(), arm));
            }
        }
        Ok(Artifacts {
            object,
            trajectory: load(dir, TRAJECTORY)?,
            arm: load(dir, ARM)?,
            reference: load(dir, REFERENCE)?,
            cost: load(dir, COST)?,
            quality: load(dir, QUALITY_MAP)?,
            optimum: load(dir, OPTIMUM)?,
            overlay_arms,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        let rows = vec![
            ArmRow { s: 0.1, x: -1.0 / 3.0, y: 1e-300, theta: std::f64::consts::PI, radius: 0.0 },
            ArmRow { s: 2.0, x: 123456.789, y: -0.0, theta: -7.25e10, radius: 5e-324 },
        ];
        let bytes = encode(&rows);
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("s,x,y,theta,radius\n"));
        assert!(text.contains("-3.3333333333333331e-1"));
        let back: Vec<ArmRow> = decode("arm.csv", bytes.as_slice()).unwrap();
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(a.y.to_bits(), b.y.to_bits());
            assert_eq!(a.radius.to_bits(), b.radius.to_bits());
        }
    }

    #[test]
    fn missing_values_are_empty_fields() {
        let row = QualityRow {
            d: 13.0,
            psi: 0.0,
            x0: Some(18.0),
            y0: Some(0.0),
            theta0: Some(1.5),
            q1: None,
            q2: None,
            q3: None,
            status: "empty_contact".into(),
        };
        let bytes = encode(std::slice::from_ref(&row));
        assert!(String::from_utf8_lossy(&bytes).lines().nth(1).unwrap().ends_with(",,,,empty_contact"));
        assert_eq!(decode::<QualityRow, _>("q.csv", bytes.as_slice()).unwrap(), vec![row]);
    }

    #[test]
    fn decoder_rejects_bad_input() {
        let bad_header = "s,rho\n0,1\n";
        assert!(matches!(decode::<TrajectoryRow, _>("t", bad_header.as_bytes()), Err(ArtifactError::Header { .. })));
        let nan = "s,x,y,theta,radius\n0,NaN,0,0,1\n";
        assert!(matches!(decode::<ArmRow, _>("a", nan.as_bytes()), Err(ArtifactError::Value { .. })));
        let short = "s,x,y,theta,radius\n0,1\n";
        assert!(decode::<ArmRow, _>("a", short.as_bytes()).is_err());
        let status = "d,psi,x0,y0,theta0,Q1,Q2,Q3,status\n1,0,,,,,,,bogus\n";
        assert!(decode::<QualityRow, _>("q", status.as_bytes()).is_err());
    }

    #[test]
    fn atomic_write_leaves_no_temp_files() {
        let dir = std::env::temp_dir().join(format!("cgrasp-atomic-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let p = dir.join("x.csv");
        write_atomic(&p, b"a\n").unwrap();
        write_atomic(&p, b"b\n").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"b\n");
        assert_eq!(fs::read_dir(&dir).unwrap().count(), 1);
        fs::remove_dir_all(&dir).unwrap();
    }
}
