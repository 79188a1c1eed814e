//! File formats: headerless CSV observations, model JSON and JSONL traces.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use mmlmix_core::gaussian::GaussianParams;
use mmlmix_core::mixture::{Component, Family, MessageLengthBreakdown, MixtureModel};
use mmlmix_core::search::SearchRound;
use mmlmix_core::vmf::{angles_to_unit, VmfParams};
use mmlmix_core::DataSet;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub enum IoError {
    Io(std::io::Error),
    /// Malformed input; `line` is 1-based.
    Parse { line: usize, message: String },
    Data(mmlmix_core::Error),
    Json(serde_json::Error),
}

impl fmt::Display for IoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IoError::Io(e) => write!(f, "{e}"),
            IoError::Parse { line, message } => write!(f, "line {line}: {message}"),
            IoError::Data(e) => write!(f, "{e}"),
            IoError::Json(e) => write!(f, "model file: {e}"),
        }
    }
}

impl std::error::Error for IoError {}

impl From<std::io::Error> for IoError {
    fn from(e: std::io::Error) -> Self {
        IoError::Io(e)
    }
}

impl From<mmlmix_core::Error> for IoError {
    fn from(e: mmlmix_core::Error) -> Self {
        IoError::Data(e)
    }
}

impl From<serde_json::Error> for IoError {
    fn from(e: serde_json::Error) -> Self {
        IoError::Json(e)
    }
}

/// How raw CSV rows become observations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum RowFormat {
    #[default]
    Raw,
    /// Rows are directions and are checked to have unit norm.
    Unit,
    /// Rows are arbitrary nonzero vectors projected onto the sphere.
    Normalize,
    /// Rows are `(θ, φ)` pairs in degrees: co-latitude and longitude.
    Angles,
}

/// Parses headerless comma-separated numbers; the column count fixes `d`.
pub fn parse_rows(text: &str) -> Result<(Vec<f64>, usize), IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    let mut d = 0;
    for record in reader.records() {
        let record = record.map_err(|e| IoError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if d == 0 {
            d = record.len();
        } else if record.len() != d {
            return Err(IoError::Parse { line, message: format!("expected {d} columns, found {}", record.len()) });
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| IoError::Parse { line, message: format!("not a number: {field:?}") })?;
            if !v.is_finite() {
                return Err(IoError::Parse { line, message: format!("non-finite value {field:?}") });
            }
            values.push(v);
        }
    }
    if d == 0 {
        return Err(IoError::Parse { line: 0, message: "no observations".into() });
    }
    Ok((values, d))
}

pub fn parse_dataset(text: &str, format: RowFormat) -> Result<DataSet, IoError> {
    let (values, d) = parse_rows(text)?;
    Ok(match format {
        RowFormat::Raw => DataSet::new(values, d)?,
        RowFormat::Unit => DataSet::unit_vectors(values, d)?,
        RowFormat::Normalize => DataSet::normalized(values, d)?,
        RowFormat::Angles => {
            if d != 2 {
                return Err(IoError::Parse { line: 1, message: format!("angle files need 2 columns, found {d}") });
            }
            let units = values.chunks_exact(2).flat_map(|p| angles_to_unit(p[0].to_radians(), p[1].to_radians())).collect();
            DataSet::normalized(units, 3)?
        }
    })
}

pub fn read_dataset(path: &Path, format: RowFormat) -> Result<DataSet, IoError> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_dataset(&text, format)
}

pub fn write_rows(path: &Path, values: &[f64], d: usize) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in values.chunks_exact(d) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComponentJson {
    Gaussian { weight: f64, mean: Vec<f64>, covariance: Vec<Vec<f64>> },
    Vmf { weight: f64, mean_direction: Vec<f64>, kappa: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelJson {
    pub family: String,
    pub d: usize,
    pub components: Vec<ComponentJson>,
}

impl ModelJson {
    pub fn from_model(model: &MixtureModel) -> Self {
        let components = model
            .components()
            .iter()
            .zip(model.weights())
            .map(|(c, &weight)| match c {
                Component::Gaussian(g) => {
                    let cov = g.covariance();
                    ComponentJson::Gaussian {
                        weight,
                        mean: g.mean().to_vec(),
                        covariance: (0..cov.nrows()).map(|i| cov.row(i).iter().copied().collect()).collect(),
                    }
                }
                Component::Vmf(v) => {
                    ComponentJson::Vmf { weight, mean_direction: v.mean_direction.clone(), kappa: v.kappa }
                }
            })
            .collect();
        ModelJson { family: model.family().name().to_string(), d: model.d(), components }
    }

    pub fn to_model(&self) -> Result<MixtureModel, IoError> {
        let family = Family::parse(&self.family)
            .ok_or_else(|| IoError::Parse { line: 0, message: format!("unknown family {:?}", self.family) })?;
        let mut comps = Vec::with_capacity(self.components.len());
        let mut weights = Vec::with_capacity(self.components.len());
        for c in &self.components {
            match (family, c) {
                (Family::Gaussian, ComponentJson::Gaussian { weight, mean, covariance }) => {
                    let d = mean.len();
                    if covariance.len() != d || covariance.iter().any(|r| r.len() != d) {
                        return Err(IoError::Parse { line: 0, message: "covariance must be d×d".into() });
                    }
                    let cov = DMatrix::from_fn(d, d, |i, j| covariance[i][j]);
                    comps.push(Component::Gaussian(GaussianParams::new(mean.clone(), cov)?));
                    weights.push(*weight);
                }
                (Family::Vmf, ComponentJson::Vmf { weight, mean_direction, kappa }) => {
                    comps.push(Component::Vmf(VmfParams::new(mean_direction.clone(), *kappa)?));
                    weights.push(*weight);
                }
                _ => {
                    return Err(IoError::Parse { line: 0, message: format!("component does not match family {}", self.family) })
                }
            }
        }
        let model = MixtureModel::new(comps, weights)?;
        if model.d() != self.d {
            return Err(IoError::Data(mmlmix_core::Error::DimensionMismatch { expected: self.d, found: model.d() }));
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownJson {
    pub i_m: f64,
    pub i_w: f64,
    pub i_theta: Vec<f64>,
    pub i_data: f64,
    pub constants: f64,
    pub total: f64,
}

impl From<&MessageLengthBreakdown> for BreakdownJson {
    fn from(b: &MessageLengthBreakdown) -> Self {
        BreakdownJson { i_m: b.i_m, i_w: b.i_w, i_theta: b.i_theta.clone(), i_data: b.i_data, constants: b.constants, total: b.total }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn save_model(path: &Path, model: &MixtureModel) -> Result<(), IoError> {
    write_json(path, &ModelJson::from_model(model))
}

pub fn load_model(path: &Path) -> Result<MixtureModel, IoError> {
    let file = File::open(path)?;
    let json: ModelJson = serde_json::from_reader(std::io::BufReader::new(file))?;
    json.to_model()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundJson {
    pub iteration: usize,
    pub score_before: f64,
    pub m_before: usize,
    pub m_after: usize,
    pub operation: Option<&'static str>,
    pub target: Option<usize>,
    pub best_score: Option<f64>,
    pub accepted: bool,
    pub failed: usize,
}

impl From<&SearchRound> for RoundJson {
    fn from(r: &SearchRound) -> Self {
        RoundJson {
            iteration: r.iteration,
            score_before: r.score_before,
            m_before: r.m_before,
            m_after: r.m_after,
            operation: r.best.map(|b| b.kind.name()),
            target: r.best.map(|b| b.target),
            best_score: r.best_score,
            accepted: r.accepted,
            failed: r.failed,
        }
    }
}

/// One JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
