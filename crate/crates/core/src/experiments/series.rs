use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether point values are rank correlations or raw distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Correlation,
    Distance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPoint {
    pub step: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_rescaled: Option<f64>,
    pub value: f64,
    pub n_pairs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSeries {
    pub name: String,
    pub value_kind: ValueKind,
    pub points: Vec<CorrelationPoint>,
}

impl CorrelationSeries {
    pub fn new(name: impl Into<String>, value_kind: ValueKind) -> Self {
        CorrelationSeries {
            name: name.into(),
            value_kind,
            points: Vec::new(),
        }
    }

    pub fn steps(&self) -> Vec<u64> {
        self.points.iter().map(|p| p.step).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn last(&self) -> Option<&CorrelationPoint> {
        self.points.last()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV with columns `series,step,x_rescaled,value,n_pairs,std`; absent
/// optional values are empty cells.
pub fn write_series_csv<W: Write>(w: W, series: &[CorrelationSeries]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let wrap = |e: csv::Error| Error::Invalid(format!("writing CSV: {e}"));
    out.write_record(["series", "step", "x_rescaled", "value", "n_pairs", "std"])
        .map_err(wrap)?;
    for s in series {
        for p in &s.points {
            out.write_record([
                s.name.clone(),
                p.step.to_string(),
                opt(p.x_rescaled),
                p.value.to_string(),
                p.n_pairs.to_string(),
                opt(p.std),
            ])
            .map_err(wrap)?;
        }
    }
    out.flush().map_err(|e| Error::Invalid(format!("writing CSV: {e}")))
}

/// Writes `<stem>.csv` and its JSON mirror `<stem>.json` into `dir`.
pub fn save_series(dir: impl AsRef<Path>, stem: &str, series: &[CorrelationSeries]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let file = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    write_series_csv(std::io::BufWriter::new(file), series)?;
    let json_path = dir.join(format!("{stem}.json"));
    let text = serde_json::to_string_pretty(series)?;
    std::fs::write(&json_path, text + "\n").map_err(|e| Error::io(&json_path, e))
}

pub fn load_series_json(path: impl AsRef<Path>) -> Result<Vec<CorrelationSeries>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<CorrelationSeries> {
        vec![CorrelationSeries {
            name: "bucket, 1".into(),
            value_kind: ValueKind::Correlation,
            points: vec![
                CorrelationPoint { step: 0, x_rescaled: Some(0.0), value: 0.25, n_pairs: 45, std: None },
                CorrelationPoint { step: 10, x_rescaled: Some(2.5), value: 1.0, n_pairs: 45, std: Some(0.01) },
            ],
        }]
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_series_csv(&mut buf, &sample()).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "series,step,x_rescaled,value,n_pairs,std\n\"bucket, 1\",0,0,0.25,45,\n\"bucket, 1\",10,2.5,1,45,0.01\n"
        );
    }

    #[test]
    fn json_mirror_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        save_series(dir.path(), "conv", &sample()).unwrap();
        assert_eq!(load_series_json(dir.path().join("conv.json")).unwrap(), sample());
        assert!(dir.path().join("conv.csv").exists());
    }
}
