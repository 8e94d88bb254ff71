//! The UEA/sktime `.ts` text format.
//!
//! Header lines start with `@` (`@problemName`, `@timeStamps`, `@missing`,
//! `@univariate`, `@dimensions`, `@equalLength`, `@seriesLength`,
//! `@classLabel`, `@data`). Each following line is one case: dimensions
//! separated by `:`, comma-separated values, class label after the final `:`.
//! With `@timeStamps true` every value is written `(t,v)`.

use std::fmt::Write as _;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::interpolation::TimeSeriesSample;
use crate::tensor::{Real, Tensor};

#[derive(Default)]
struct Header {
    name: Option<String>,
    timestamps: bool,
    dimensions: Option<usize>,
    univariate: Option<bool>,
    labels: Option<Vec<String>>,
}

pub fn parse_ts(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut ds = parse_ts_str(&text)?;
    if ds.name.is_empty() {
        ds.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    ds.provenance = format!("ts:{}", path.display());
    Ok(ds)
}

fn parse_bool(value: Option<&str>, line: usize) -> Result<bool> {
    match value.map(str::to_ascii_lowercase).as_deref() {
        Some("true") => Ok(true),
        Some("false") => Ok(false),
        other => Err(Error::Parse {
            line,
            msg: format!("expected true or false, found {other:?}"),
        }),
    }
}

pub fn parse_ts_str(text: &str) -> Result<Dataset> {
    let mut header = Header::default();
    let mut in_data = false;
    let mut samples = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !in_data && line.starts_with('@') {
            let mut parts = line[1..].split_whitespace();
            let tag = parts.next().unwrap_or("").to_ascii_lowercase();
            let value = parts.next();
            match tag.as_str() {
                "problemname" => {
                    header.name = Some(
                        value
                            .ok_or(Error::Parse {
                                line: line_no,
                                msg: "missing problem name".into(),
                            })?
                            .to_string(),
                    )
                }
                "timestamps" => header.timestamps = parse_bool(value, line_no)?,
                "missing" => {
                    if parse_bool(value, line_no)? {
                        return Err(Error::Parse {
                            line: line_no,
                            msg: "missing values are not supported".into(),
                        });
                    }
                }
                "univariate" => header.univariate = Some(parse_bool(value, line_no)?),
                "dimension" | "dimensions" => {
                    let d = value.and_then(|v| v.parse::<usize>().ok()).filter(|&d| d > 0);
                    header.dimensions = Some(d.ok_or(Error::Parse {
                        line: line_no,
                        msg: format!("invalid dimension count {value:?}"),
                    })?);
                }
                "equallength" => {
                    parse_bool(value, line_no)?;
                }
                "serieslength" => {
                    value.and_then(|v| v.parse::<usize>().ok()).ok_or(Error::Parse {
                        line: line_no,
                        msg: format!("invalid series length {value:?}"),
                    })?;
                }
                "classlabel" => {
                    if parse_bool(value, line_no)? {
                        let names: Vec<String> = parts.map(str::to_string).collect();
                        if names.is_empty() {
                            return Err(Error::Parse {
                                line: line_no,
                                msg: "classLabel true without labels".into(),
                            });
                        }
                        header.labels = Some(names);
                    }
                }
                "targetlabel" => {
                    if parse_bool(value, line_no)? {
                        return Err(Error::Parse {
                            line: line_no,
                            msg: "regression targets are not supported".into(),
                        });
                    }
                }
                "data" => in_data = true,
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("unknown header @{other}"),
                    })
                }
            }
            continue;
        }
        // A case line; `@data` itself is optional.
        in_data = true;
        let case = samples.len();
        samples.push(parse_case(line, case, &header)?);
    }

    let class_names = header.labels.clone().unwrap_or_default();
    if samples.is_empty() {
        return Err(Error::Parse {
            line: text.lines().count(),
            msg: "no cases".into(),
        });
    }
    let mut ds = Dataset::new(header.name.unwrap_or_default(), samples, class_names)?;
    ds.provenance = "ts".into();
    Ok(ds)
}

fn parse_case(line: &str, case: usize, header: &Header) -> Result<TimeSeriesSample> {
    let err = |msg: String| Error::ParseCase { case, msg };
    let mut parts: Vec<&str> = line.split(':').collect();
    let label = match &header.labels {
        Some(names) => {
            let raw = parts.pop().unwrap_or("").trim();
            let idx = names
                .iter()
                .position(|n| n == raw)
                .ok_or_else(|| err(format!("unknown class label {raw:?}")))?;
            Some(idx)
        }
        None => None,
    };
    let expected = header.dimensions.or(match header.univariate {
        Some(true) => Some(1),
        _ => None,
    });
    if let Some(d) = expected {
        if parts.len() != d {
            return Err(err(format!("expected {d} dimensions, found {}", parts.len())));
        }
    }
    let mut times: Option<Vec<Real>> = None;
    let mut columns: Vec<Vec<Real>> = Vec::with_capacity(parts.len());
    for (dim, part) in parts.iter().enumerate() {
        let (t, v) = if header.timestamps {
            parse_timed(part).map_err(|m| err(format!("dimension {dim}: {m}")))?
        } else {
            let v = parse_values(part).map_err(|m| err(format!("dimension {dim}: {m}")))?;
            ((0..v.len()).map(|i| i as Real).collect(), v)
        };
        if v.len() < 2 {
            return Err(err(format!(
                "dimension {dim} has {} observations, need at least 2",
                v.len()
            )));
        }
        match &times {
            None => times = Some(t),
            Some(prev) if *prev != t => {
                return Err(err(format!("dimension {dim} is not aligned with dimension 0")));
            }
            _ => {}
        }
        columns.push(v);
    }
    let times = times.ok_or_else(|| err("no dimensions".into()))?;
    let (n, u) = (times.len(), columns.len());
    let mut data = vec![0.0; n * u];
    for (c, col) in columns.iter().enumerate() {
        for (i, &x) in col.iter().enumerate() {
            data[i * u + c] = x;
        }
    }
    let values = Tensor::matrix(n, u, data).map_err(|e| err(e.to_string()))?;
    TimeSeriesSample::new(times, values, label).map_err(|e| err(e.to_string()))
}

fn parse_number(s: &str) -> std::result::Result<Real, String> {
    let s = s.trim();
    if s == "?" || s.eq_ignore_ascii_case("nan") {
        return Err("missing values are not supported".into());
    }
    s.parse::<Real>().map_err(|_| format!("invalid number {s:?}"))
}

fn parse_values(part: &str) -> std::result::Result<Vec<Real>, String> {
    if part.trim().is_empty() {
        return Ok(Vec::new());
    }
    part.split(',').map(parse_number).collect()
}

fn parse_timed(part: &str) -> std::result::Result<(Vec<Real>, Vec<Real>), String> {
    let (mut times, mut vals) = (Vec::new(), Vec::new());
    let mut rest = part.trim();
    while !rest.is_empty() {
        let open = rest.strip_prefix('(').ok_or("expected '('")?;
        let close = open.find(')').ok_or("unclosed '('")?;
        let (t, v) = open[..close].split_once(',').ok_or("expected (t,v)")?;
        times.push(parse_number(t)?);
        vals.push(parse_number(v)?);
        rest = open[close + 1..].trim_start_matches(',').trim();
    }
    Ok((times, vals))
}

fn has_index_times(s: &TimeSeriesSample) -> bool {
    s.times.iter().enumerate().all(|(i, &t)| t == i as Real)
}

/// Serializes a dataset in the `.ts` layout accepted by [`parse_ts_str`].
pub fn write_ts(ds: &Dataset) -> String {
    let timed = !ds.samples.iter().all(has_index_times);
    let equal = ds.samples.windows(2).all(|w| w[0].len() == w[1].len());
    let mut out = String::new();
    if !ds.name.is_empty() {
        let _ = writeln!(out, "@problemName {}", ds.name);
    }
    let _ = writeln!(out, "@timeStamps {timed}");
    let _ = writeln!(out, "@missing false");
    let _ = writeln!(out, "@univariate {}", ds.channels == 1);
    if ds.channels > 1 {
        let _ = writeln!(out, "@dimensions {}", ds.channels);
    }
    let _ = writeln!(out, "@equalLength {equal}");
    if equal {
        let _ = writeln!(out, "@seriesLength {}", ds.samples[0].len());
    }
    let labelled = !ds.class_names.is_empty();
    if labelled {
        let _ = writeln!(out, "@classLabel true {}", ds.class_names.join(" "));
    } else {
        let _ = writeln!(out, "@classLabel false");
    }
    let _ = writeln!(out, "@data");
    for s in &ds.samples {
        let dims: Vec<String> = (0..s.channels())
            .map(|c| {
                (0..s.len())
                    .map(|i| {
                        let v = s.values.get(i, c);
                        if timed {
                            format!("({},{})", s.times[i], v)
                        } else {
                            format!("{v}")
                        }
                    })
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect();
        out.push_str(&dims.join(":"));
        if let (true, Some(l)) = (labelled, s.label) {
            let _ = write!(out, ":{}", ds.class_names[l]);
        }
        out.push('\n');
    }
    out
}
