//! Long-format CSV: one row per observation, `series_id, t, <channels…>, label`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::interpolation::TimeSeriesSample;
use crate::tensor::{Real, Tensor};

/// Names of the structural columns; every other column is a channel, in header order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsvSchema {
    pub id: String,
    pub time: String,
    pub label: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            id: "series_id".into(),
            time: "t".into(),
            label: "label".into(),
        }
    }
}

pub fn parse_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut ds = parse_csv_str(&text, schema)?;
    ds.name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    ds.provenance = format!("csv:{}", path.display());
    Ok(ds)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        line,
        msg: e.to_string(),
    }
}

struct Row {
    t: Real,
    values: Vec<Real>,
    label: String,
}

/// Series are ordered by id, observations by time, class names lexicographically,
/// so the result does not depend on row order.
pub fn parse_csv_str(text: &str, schema: &CsvSchema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(csv_error)?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            msg: format!("missing column {name:?}"),
        })
    };
    let (id_col, t_col, label_col) = (find(&schema.id)?, find(&schema.time)?, find(&schema.label)?);
    let channel_cols: Vec<usize> = (0..headers.len())
        .filter(|c| ![id_col, t_col, label_col].contains(c))
        .collect();
    if channel_cols.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: "no channel columns".into(),
        });
    }

    let mut series: BTreeMap<String, Vec<Row>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let num = |c: usize| -> Result<Real> {
            record[c].parse::<Real>().map_err(|_| Error::Parse {
                line,
                msg: format!("invalid number {:?} in column {:?}", &record[c], &headers[c]),
            })
        };
        let row = Row {
            t: num(t_col)?,
            values: channel_cols.iter().map(|&c| num(c)).collect::<Result<_>>()?,
            label: record[label_col].to_string(),
        };
        series.entry(record[id_col].to_string()).or_default().push(row);
    }

    let class_names: Vec<String> = series
        .values()
        .flatten()
        .map(|r| r.label.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let u = channel_cols.len();
    let mut samples = Vec::with_capacity(series.len());
    for (id, mut rows) in series {
        rows.sort_by(|a, b| a.t.total_cmp(&b.t));
        if rows.windows(2).any(|w| w[0].t == w[1].t) {
            return Err(Error::Input(format!("series {id:?} has duplicate timestamps")));
        }
        let label = &rows[0].label;
        if rows.iter().any(|r| &r.label != label) {
            return Err(Error::Input(format!("series {id:?} has more than one label")));
        }
        let label = class_names.iter().position(|c| c == label);
        let times = rows.iter().map(|r| r.t).collect();
        let data = rows.iter().flat_map(|r| r.values.iter().copied()).collect();
        let values = Tensor::matrix(rows.len(), u, data)?;
        let s = TimeSeriesSample::new(times, values, label).map_err(|e| Error::Input(format!("series {id:?}: {e}")))?;
        samples.push(s);
    }
    let mut ds = Dataset::new(String::new(), samples, class_names)?;
    ds.provenance = "csv".into();
    Ok(ds)
}

/// Writes `series_id,t,c_1..c_u,label`, ids zero-padded so lexicographic order
/// matches sample order.
pub fn write_csv(ds: &Dataset) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["series_id".to_string(), "t".to_string()];
    header.extend((1..=ds.channels).map(|c| format!("c_{c}")));
    header.push("label".into());
    w.write_record(&header)?;
    let width = ds.len().to_string().len().max(6);
    for (i, s) in ds.samples.iter().enumerate() {
        let label = s.label.map(|l| ds.class_names[l].clone()).unwrap_or_default();
        for k in 0..s.len() {
            let mut rec = vec![format!("{i:0width$}"), format!("{}", s.times[k])];
            rec.extend(s.row(k).iter().map(|v| format!("{v}")));
            rec.push(label.clone());
            w.write_record(&rec)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
