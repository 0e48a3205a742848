//! Price ingestion, arithmetic returns and rolling-window planning.

use std::collections::HashSet;
use std::ops::Range;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Daily closing prices, one column per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub dates: Vec<String>,
    pub assets: Vec<String>,
    /// `n_days × p`, strictly positive.
    pub prices: DMatrix<f64>,
}

/// Arithmetic returns; row `t` is the return from day `t` to day `t + 1`
/// and is labelled with the date of day `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsMatrix {
    pub dates: Vec<String>,
    pub assets: Vec<String>,
    pub returns: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestConfig {
    /// Drop rows with an empty cell instead of failing.
    pub drop_incomplete_rows: bool,
}

impl ReturnsMatrix {
    pub fn n_obs(&self) -> usize {
        self.returns.nrows()
    }

    pub fn n_assets(&self) -> usize {
        self.returns.ncols()
    }

    /// Rows `range` as an owned `len × p` matrix.
    pub fn slice(&self, range: &Range<usize>) -> DMatrix<f64> {
        self.returns.rows(range.start, range.len()).into_owned()
    }
}

/// Reads `date,ASSET1,ASSET2,...` CSV.
pub fn load_prices(path: impl AsRef<Path>, config: IngestConfig) -> Result<PriceSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_prices(file, &path.display().to_string(), config)
}

/// Same as [`load_prices`] but from any reader; `origin` is used in error messages.
pub fn read_prices(
    reader: impl std::io::Read,
    origin: &str,
    config: IngestConfig,
) -> Result<PriceSeries> {
    let malformed = |message: String| Error::MalformedCsv {
        path: origin.to_string(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| malformed(e.to_string()))?.clone();
    if headers.len() < 2 {
        return Err(malformed(
            "expected a date column and at least one asset column".into(),
        ));
    }
    let assets: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let p = assets.len();

    let mut dates = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut seen = HashSet::new();
    for (k, record) in rdr.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| malformed(e.to_string()))?;
        if record.len() != p + 1 {
            return Err(malformed(format!(
                "line {line}: expected {} fields, found {}",
                p + 1,
                record.len()
            )));
        }
        let date = record[0].to_string();
        let mut row = Vec::with_capacity(p);
        let mut incomplete = false;
        for (j, cell) in record.iter().skip(1).enumerate() {
            if cell.is_empty()
                || cell.eq_ignore_ascii_case("na")
                || cell.eq_ignore_ascii_case("nan")
            {
                if config.drop_incomplete_rows {
                    incomplete = true;
                    break;
                }
                return Err(Error::MissingValue {
                    line,
                    column: assets[j].clone(),
                });
            }
            let value: f64 = cell.parse().map_err(|_| {
                malformed(format!("line {line}: cannot parse '{cell}' as a number"))
            })?;
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositivePrice {
                    line,
                    column: assets[j].clone(),
                    value,
                });
            }
            row.push(value);
        }
        if incomplete {
            log::warn!("{origin}: dropping incomplete row at line {line}");
            continue;
        }
        if !seen.insert(date.clone()) {
            return Err(Error::DuplicateDate(date));
        }
        dates.push(date);
        values.extend(row);
    }
    if dates.len() < 2 {
        return Err(Error::InsufficientData {
            required: 2,
            actual: dates.len(),
        });
    }
    for pair in dates.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::UnorderedDates(pair[1].clone()));
        }
    }
    let prices = DMatrix::from_row_slice(dates.len(), p, &values);
    Ok(PriceSeries {
        dates,
        assets,
        prices,
    })
}

/// Writes `date,ASSET...` CSV with shortest round-trip number formatting.
pub fn write_prices(prices: &PriceSeries, writer: impl std::io::Write) -> Result<()> {
    write_dated(&prices.dates, &prices.assets, &prices.prices, writer)
}

/// Returns in the same layout as prices; [`read_returns`] reads them back exactly.
pub fn write_returns(returns: &ReturnsMatrix, writer: impl std::io::Write) -> Result<()> {
    write_dated(&returns.dates, &returns.assets, &returns.returns, writer)
}

fn write_dated(
    dates: &[String],
    assets: &[String],
    values: &DMatrix<f64>,
    writer: impl std::io::Write,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::MalformedCsv {
        path: "<output>".into(),
        message: e.to_string(),
    };
    let header = std::iter::once("date").chain(assets.iter().map(String::as_str));
    w.write_record(header).map_err(csv_err)?;
    for (t, date) in dates.iter().enumerate() {
        let row: Vec<String> = std::iter::once(date.clone())
            .chain(values.row(t).iter().map(|v| v.to_string()))
            .collect();
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<output>".into(),
        source,
    })
}

/// Reads a returns CSV written by [`write_returns`]. Every cell must be a finite number.
pub fn read_returns(reader: impl std::io::Read, origin: &str) -> Result<ReturnsMatrix> {
    let malformed = |message: String| Error::MalformedCsv {
        path: origin.to_string(),
        message,
    };
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(|e| malformed(e.to_string()))?.clone();
    if headers.len() < 2 {
        return Err(malformed(
            "expected a date column and at least one asset column".into(),
        ));
    }
    let assets: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| malformed(e.to_string()))?;
        if record.len() != assets.len() + 1 {
            return Err(malformed(format!(
                "line {line}: expected {} fields",
                assets.len() + 1
            )));
        }
        dates.push(record[0].to_string());
        for cell in record.iter().skip(1) {
            let v: f64 = cell.parse().map_err(|_| {
                malformed(format!("line {line}: cannot parse '{cell}' as a number"))
            })?;
            if !v.is_finite() {
                return Err(malformed(format!("line {line}: non-finite return")));
            }
            values.push(v);
        }
    }
    if dates.is_empty() {
        return Err(Error::InsufficientData {
            required: 1,
            actual: 0,
        });
    }
    let returns = DMatrix::from_row_slice(dates.len(), assets.len(), &values);
    Ok(ReturnsMatrix {
        dates,
        assets,
        returns,
    })
}

/// `r[t][i] = P[t+1][i] / P[t][i] - 1`
pub fn compute_returns(prices: &PriceSeries) -> Result<ReturnsMatrix> {
    let n_days = prices.prices.nrows();
    if n_days < 2 {
        return Err(Error::InsufficientData {
            required: 2,
            actual: n_days,
        });
    }
    let p = prices.prices.ncols();
    let returns = DMatrix::from_fn(n_days - 1, p, |t, i| {
        prices.prices[(t + 1, i)] / prices.prices[(t, i)] - 1.0
    });
    Ok(ReturnsMatrix {
        dates: prices.dates[1..].to_vec(),
        assets: prices.assets.clone(),
        returns,
    })
}

/// One rolling window: estimation rows followed immediately by evaluation rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub insample: Range<usize>,
    pub outsample: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub insample_len: usize,
    pub outsample_len: usize,
    pub windows: Vec<Window>,
}

impl WindowPlan {
    pub fn count(&self) -> usize {
        self.windows.len()
    }

    /// Total number of out-of-sample days across all windows.
    pub fn oos_days(&self) -> usize {
        self.windows.len() * self.outsample_len
    }
}

/// Rolls the estimation window forward by `outsample_len` each step;
/// `floor((n - insample_len) / outsample_len)` windows.
pub fn plan_windows(n_obs: usize, insample_len: usize, outsample_len: usize) -> Result<WindowPlan> {
    if insample_len == 0 || outsample_len == 0 {
        return Err(Error::InvalidParameter(
            "in-sample and out-of-sample lengths must be positive".into(),
        ));
    }
    if n_obs < insample_len + outsample_len {
        return Err(Error::InsufficientData {
            required: insample_len + outsample_len,
            actual: n_obs,
        });
    }
    let count = (n_obs - insample_len) / outsample_len;
    let windows = (0..count)
        .map(|k| {
            let start = k * outsample_len;
            Window {
                insample: start..start + insample_len,
                outsample: start + insample_len..start + insample_len + outsample_len,
            }
        })
        .collect();
    Ok(WindowPlan {
        insample_len,
        outsample_len,
        windows,
    })
}
