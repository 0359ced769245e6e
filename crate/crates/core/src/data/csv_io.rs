use std::collections::HashMap;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Ingestion policy for [`load_csv`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvOptions {
    /// Expected number of `f_*` columns; `None` accepts whatever is present.
    pub expected_features: Option<usize>,
    /// Replace empty or non-numeric feature cells with zero instead of failing.
    pub impute_missing: bool,
    /// Keep only these feature columns, in this order.
    pub include_features: Option<Vec<String>>,
    /// When false, `target` and `time_id` may be absent (inference files).
    pub require_target: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            expected_features: None,
            impute_missing: false,
            include_features: None,
            require_target: true,
        }
    }
}

const ROW_ID: &str = "row_id";
const TIME_ID: &str = "time_id";
const INVESTMENT_ID: &str = "investment_id";
const TARGET: &str = "target";

struct Layout {
    row_id: usize,
    time_id: Option<usize>,
    investment_id: usize,
    target: Option<usize>,
    /// Column index of f_0, f_1, ...
    features: Vec<usize>,
}

fn layout(header: &csv::StringRecord, opts: &CsvOptions) -> Result<Layout> {
    let mut named: HashMap<&str, usize> = HashMap::new();
    let mut features: HashMap<usize, usize> = HashMap::new();
    for (col, name) in header.iter().enumerate() {
        let name = name.trim();
        let feature_index = name
            .strip_prefix("f_")
            .and_then(|s| s.parse::<usize>().ok());
        let slot = match (name, feature_index) {
            (ROW_ID | TIME_ID | INVESTMENT_ID | TARGET, _) => named.insert(name, col),
            (_, Some(i)) => features.insert(i, col),
            _ => return Err(Error::Schema(format!("unknown column {name}"))),
        };
        if slot.is_some() {
            return Err(Error::Schema(format!("duplicate column {name}")));
        }
    }
    let required = |name: &str| {
        named
            .get(name)
            .copied()
            .ok_or_else(|| Error::Schema(format!("missing column {name}")))
    };
    let optional = |name: &str| -> Result<Option<usize>> {
        if opts.require_target {
            required(name).map(Some)
        } else {
            Ok(named.get(name).copied())
        }
    };

    let count = opts.expected_features.unwrap_or(features.len());
    let mut cols = Vec::with_capacity(count);
    for i in 0..count {
        match features.get(&i) {
            Some(&c) => cols.push(c),
            None => return Err(Error::Schema(format!("missing column f_{i}"))),
        }
    }
    if let Some(extra) = features.keys().filter(|&&i| i >= count).min() {
        return Err(Error::Schema(format!(
            "column f_{extra} exceeds the expected {count} feature columns"
        )));
    }
    Ok(Layout {
        row_id: required(ROW_ID)?,
        time_id: optional(TIME_ID)?,
        investment_id: required(INVESTMENT_ID)?,
        target: optional(TARGET)?,
        features: cols,
    })
}

fn parse_int(rec: &csv::StringRecord, col: usize, name: &str, row: usize) -> Result<i64> {
    let cell = rec.get(col).unwrap_or("").trim();
    cell.parse().map_err(|_| Error::Parse {
        row,
        column: name.to_string(),
        message: format!("expected an integer, found {cell:?}"),
    })
}

fn parse_real(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a CSV file with header `row_id,time_id,investment_id,target,f_0,...`.
///
/// Rows are 1-based in error messages, counting the header as row 0.
pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(std::io::BufReader::new(file));
    let header = reader.headers().map_err(csv_err)?.clone();
    let lay = layout(&header, opts)?;
    let feature_names: Vec<String> = (0..lay.features.len()).map(|i| format!("f_{i}")).collect();

    let mut row_ids = Vec::new();
    let mut time_id = Vec::new();
    let mut investment_id = Vec::new();
    let mut target = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = i + 1;
        row_ids.push(rec.get(lay.row_id).unwrap_or("").trim().to_string());
        time_id.push(match lay.time_id {
            Some(c) => parse_int(&rec, c, TIME_ID, row)?,
            None => 0,
        });
        investment_id.push(parse_int(&rec, lay.investment_id, INVESTMENT_ID, row)?);
        target.push(match lay.target {
            Some(c) => {
                let cell = rec.get(c).unwrap_or("");
                parse_real(cell).ok_or_else(|| Error::Parse {
                    row,
                    column: TARGET.into(),
                    message: format!("expected a finite number, found {cell:?}"),
                })?
            }
            None => 0.0,
        });
        for (f, &c) in lay.features.iter().enumerate() {
            let cell = rec.get(c).unwrap_or("");
            let v = match parse_real(cell) {
                Some(v) => v as f32,
                None if opts.impute_missing => 0.0,
                None => {
                    return Err(Error::Parse {
                        row,
                        column: format!("f_{f}"),
                        message: format!("missing or non-numeric value {cell:?}"),
                    })
                }
            };
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: format!("f_{f}"),
                    message: format!("value {cell} overflows 32-bit range"),
                });
            }
            values.push(v);
        }
    }
    let n = row_ids.len();
    let features = Matrix::from_vec(n, lay.features.len(), values)?;
    let ds = Dataset::new(
        row_ids,
        time_id,
        investment_id,
        target,
        features,
        feature_names,
    )?;
    match &opts.include_features {
        Some(names) => ds.select_features(names),
        None => Ok(ds),
    }
}

/// Writes `ds` in the layout [`load_csv`] reads. Reals use the shortest
/// representation that parses back to the same value.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec![
        ROW_ID.to_string(),
        TIME_ID.to_string(),
        INVESTMENT_ID.to_string(),
        TARGET.to_string(),
    ];
    header.extend(ds.feature_names().iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    let mut rec = Vec::with_capacity(header.len());
    for i in 0..ds.len() {
        rec.clear();
        rec.push(ds.row_ids()[i].clone());
        rec.push(ds.time_id()[i].to_string());
        rec.push(ds.investment_id()[i].to_string());
        rec.push(ds.target()[i].to_string());
        rec.extend(ds.features().row(i).iter().map(f32::to_string));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    const SMALL: &str = "row_id,time_id,investment_id,target,f_0,f_1,f_2\n\
        0_42,0,42,-0.25,1.5,2,-3.125\n\
        0_7,0,7,0.5,0,1e-3,4\n\
        1_42,1,42,1.75,-1,0.5,0.25\n";

    #[test]
    fn parses_small_file_exactly() {
        let f = file(SMALL);
        let ds = load_csv(f.path(), &CsvOptions::default()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.row_ids(), &["0_42", "0_7", "1_42"]);
        assert_eq!(ds.time_id(), &[0, 0, 1]);
        assert_eq!(ds.target(), &[-0.25, 0.5, 1.75]);
        assert_eq!(ds.features().row(0), &[1.5, 2.0, -3.125]);
        assert_eq!(ds.features().row(1), &[0.0, 1e-3, 4.0]);
        let dense = ds.dense_ids();
        assert_eq!(dense[0], dense[2]);
        assert_ne!(dense[0], dense[1]);
        assert_eq!(ds.vocab().len(), 3);
    }

    #[test]
    fn missing_feature_column_named() {
        let f = file("row_id,time_id,investment_id,target,f_0,f_2\n0_1,0,1,0.1,1,2\n");
        let opts = CsvOptions {
            expected_features: Some(3),
            ..Default::default()
        };
        let err = load_csv(f.path(), &opts).unwrap_err();
        assert!(
            matches!(&err, Error::Schema(m) if m.contains("f_1")),
            "{err}"
        );
    }

    #[test]
    fn other_schema_errors() {
        let f = file("row_id,time_id,target,f_0\n0_1,0,0.1,1\n");
        let err = load_csv(f.path(), &CsvOptions::default()).unwrap_err();
        assert!(err.to_string().contains("investment_id"), "{err}");

        let f = file("row_id,time_id,investment_id,target,f_0,extra\n0_1,0,1,0.1,1,2\n");
        let err = load_csv(f.path(), &CsvOptions::default()).unwrap_err();
        assert!(err.to_string().contains("extra"), "{err}");

        let f = file(SMALL);
        let opts = CsvOptions {
            expected_features: Some(2),
            ..Default::default()
        };
        assert!(matches!(load_csv(f.path(), &opts), Err(Error::Schema(_))));
    }

    #[test]
    fn missing_cells_error_or_impute() {
        let f =
            file("row_id,time_id,investment_id,target,f_0,f_1\n0_1,0,1,0.1,1,\n0_2,0,2,0.2,x,3\n");
        let err = load_csv(f.path(), &CsvOptions::default()).unwrap_err();
        assert!(
            matches!(&err, Error::Parse { row: 1, column, .. } if column == "f_1"),
            "{err}"
        );
        let opts = CsvOptions {
            impute_missing: true,
            ..Default::default()
        };
        let ds = load_csv(f.path(), &opts).unwrap();
        assert_eq!(ds.features().row(0), &[1.0, 0.0]);
        assert_eq!(ds.features().row(1), &[0.0, 3.0]);
    }

    #[test]
    fn include_list_restricts_features() {
        let f = file(SMALL);
        let opts = CsvOptions {
            include_features: Some(vec!["f_2".into(), "f_0".into()]),
            ..Default::default()
        };
        let ds = load_csv(f.path(), &opts).unwrap();
        assert_eq!(ds.feature_names(), &["f_2", "f_0"]);
        assert_eq!(ds.features().row(0), &[-3.125, 1.5]);
        let opts = CsvOptions {
            include_features: Some(vec!["f_9".into()]),
            ..Default::default()
        };
        assert!(matches!(load_csv(f.path(), &opts), Err(Error::Schema(_))));
    }

    #[test]
    fn inference_file_without_target() {
        let f = file("row_id,investment_id,f_0\na,3,1.0\nb,4,2.0\n");
        let opts = CsvOptions {
            require_target: false,
            ..Default::default()
        };
        let ds = load_csv(f.path(), &opts).unwrap();
        assert_eq!(ds.len(), 2);
        assert!(load_csv(f.path(), &CsvOptions::default()).is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_csv("/nonexistent/x.csv", &CsvOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }), "{err}");
        assert!(err.to_string().contains("/nonexistent/x.csv"));
    }
}
