//! CSV ingestion of price panels and aggregation to daily/weekly/monthly
//! simple returns (in percent).

use chrono::{Datelike, NaiveDate};
use nalgebra::DMatrix;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReturnsError {
    #[error("missing column: {0}")]
    MissingColumn(String),
    #[error("unparseable date '{value}' at row {row}")]
    UnparseableDate { value: String, row: usize },
    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),
    #[error("empty panel: no valid price rows")]
    EmptyPanel,
    #[error("insufficient data: need at least {required} observations after aggregation, got {actual}")]
    InsufficientData { required: usize, actual: usize },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Sampling period of a return panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Period {
    Daily,
    Weekly,
    Monthly,
}

impl Period {
    pub const ALL: [Period; 3] = [Period::Daily, Period::Weekly, Period::Monthly];

    /// Nominal horizon in trading days, used by the scaling-law regression.
    pub fn trading_days(self) -> f64 {
        match self {
            Period::Daily => 1.0,
            Period::Weekly => 5.0,
            Period::Monthly => 21.0,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Period::Daily => "D",
            Period::Weekly => "W",
            Period::Monthly => "M",
        }
    }

    pub fn from_code(code: &str) -> Option<Period> {
        match code {
            "D" | "d" => Some(Period::Daily),
            "W" | "w" => Some(Period::Weekly),
            "M" | "m" => Some(Period::Monthly),
            _ => None,
        }
    }
}

impl std::fmt::Display for Period {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.code())
    }
}

/// Column mapping for [`load_csv`]. The defaults take the first column as
/// the date and every remaining column as a price series.
#[derive(Debug, Clone, Default)]
pub struct CsvSchema {
    /// Header name of the date column; first column when `None`.
    pub date_column: Option<String>,
    /// Header names of the price columns to keep; all non-date columns when `None`.
    pub price_columns: Option<Vec<String>>,
}

/// Close prices on an ordered calendar-date grid.
#[derive(Debug, Clone)]
pub struct PricePanel {
    pub dates: Vec<NaiveDate>,
    pub assets: Vec<String>,
    /// Rows = dates, columns = assets; strictly positive and finite.
    pub prices: DMatrix<f64>,
    /// Rows discarded because a price cell was missing or unparseable.
    pub dropped_rows: usize,
}

/// Simple returns in percent on a fixed period grid.
#[derive(Debug, Clone)]
pub struct ReturnPanel {
    pub period: Period,
    pub assets: Vec<String>,
    /// Rows = periods, columns = assets; `100 * (P_t / P_{t-1} - 1)`.
    pub returns: DMatrix<f64>,
    /// Close date of the bucket each return row ends on.
    pub dates: Vec<NaiveDate>,
}

/// Loads a price panel from CSV: ISO-8601 dates in the date column, '.'
/// decimal prices elsewhere, header row required.
///
/// Rows are sorted by date before validation. A row with any missing,
/// unparseable or non-positive price cell is dropped and counted.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<PricePanel, ReturnsError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if headers.is_empty() {
        return Err(ReturnsError::EmptyPanel);
    }

    let date_idx = match &schema.date_column {
        Some(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ReturnsError::MissingColumn(name.clone()))?,
        None => 0,
    };
    let price_idx: Vec<usize> = match &schema.price_columns {
        Some(names) => names
            .iter()
            .map(|name| {
                headers
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| ReturnsError::MissingColumn(name.clone()))
            })
            .collect::<Result<_, _>>()?,
        None => (0..headers.len()).filter(|&i| i != date_idx).collect(),
    };
    if price_idx.is_empty() {
        return Err(ReturnsError::MissingColumn("<price columns>".into()));
    }
    let assets: Vec<String> = price_idx.iter().map(|&i| headers[i].clone()).collect();

    let mut rows: Vec<(NaiveDate, Vec<f64>)> = Vec::new();
    let mut dropped = 0usize;
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        let raw_date = record.get(date_idx).unwrap_or("").trim();
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|_| {
            ReturnsError::UnparseableDate { value: raw_date.to_string(), row: row_no + 2 }
        })?;
        let mut prices = Vec::with_capacity(price_idx.len());
        let mut valid = true;
        for &i in &price_idx {
            let cell = record.get(i).unwrap_or("").trim();
            match cell.parse::<f64>() {
                Ok(p) if p.is_finite() && p > 0.0 => prices.push(p),
                _ => {
                    valid = false;
                    break;
                }
            }
        }
        if valid {
            rows.push((date, prices));
        } else {
            dropped += 1;
        }
    }
    if rows.is_empty() {
        return Err(ReturnsError::EmptyPanel);
    }
    rows.sort_by_key(|(date, _)| *date);
    for pair in rows.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(ReturnsError::DuplicateDate(pair[0].0));
        }
    }

    let dates: Vec<NaiveDate> = rows.iter().map(|(d, _)| *d).collect();
    let prices = DMatrix::from_fn(rows.len(), assets.len(), |r, c| rows[r].1[c]);
    Ok(PricePanel { dates, assets, prices, dropped_rows: dropped })
}

/// Bucket key for period aggregation: ISO week for `W`, calendar month for `M`.
fn bucket_key(date: NaiveDate, period: Period) -> (i32, u32) {
    match period {
        Period::Daily => (date.year(), date.ordinal()),
        Period::Weekly => {
            let iso = date.iso_week();
            (iso.year(), iso.week())
        }
        Period::Monthly => (date.year(), date.month()),
    }
}

/// Aggregates to last-observation-per-bucket prices and converts to simple
/// percent returns. Partial first/last buckets are kept.
pub fn to_returns(panel: &PricePanel, period: Period) -> Result<ReturnPanel, ReturnsError> {
    // index of the last row in each bucket
    let mut closes: Vec<usize> = Vec::new();
    for (i, &date) in panel.dates.iter().enumerate() {
        let key = bucket_key(date, period);
        match closes.last() {
            Some(&prev) if bucket_key(panel.dates[prev], period) == key => {
                *closes.last_mut().unwrap() = i;
            }
            _ => closes.push(i),
        }
    }
    if closes.len() < 2 {
        return Err(ReturnsError::InsufficientData { required: 2, actual: closes.len() });
    }

    let n_assets = panel.assets.len();
    let n_rets = closes.len() - 1;
    let returns = DMatrix::from_fn(n_rets, n_assets, |r, c| {
        let prev = panel.prices[(closes[r], c)];
        let next = panel.prices[(closes[r + 1], c)];
        100.0 * (next / prev - 1.0)
    });
    let dates: Vec<NaiveDate> = closes[1..].iter().map(|&i| panel.dates[i]).collect();
    Ok(ReturnPanel { period, assets: panel.assets.clone(), returns, dates })
}

impl ReturnPanel {
    /// Return series of one asset as a plain vector.
    pub fn column(&self, asset: usize) -> Vec<f64> {
        self.returns.column(asset).iter().cloned().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    fn panel_from(content: &str) -> PricePanel {
        load_csv(write_csv(content).path(), &CsvSchema::default()).unwrap()
    }

    #[test]
    fn parses_simple_panel() {
        let p = panel_from("date,SPX\n2020-01-02,100\n2020-01-03,101\n2020-01-06,99\n");
        assert_eq!(p.dates.len(), 3);
        assert_eq!(p.assets, vec!["SPX"]);
        assert_eq!(p.dropped_rows, 0);
        assert_eq!(p.prices[(0, 0)], 100.0);
        assert_eq!(p.prices[(2, 0)], 99.0);
    }

    #[test]
    fn drops_rows_with_blank_cells() {
        let p = panel_from("date,SPX\n2020-01-02,100\n2020-01-03,\n2020-01-06,99\n");
        assert_eq!(p.dates.len(), 2);
        assert_eq!(p.dropped_rows, 1);
    }

    #[test]
    fn sorts_non_monotone_dates() {
        let p = panel_from("date,SPX\n2020-01-06,99\n2020-01-02,100\n2020-01-03,101\n");
        let mut sorted = p.dates.clone();
        sorted.sort();
        assert_eq!(p.dates, sorted);
        assert_eq!(p.prices[(0, 0)], 100.0);
        assert_eq!(p.prices[(2, 0)], 99.0);
    }

    #[test]
    fn rejects_empty_and_bad_date() {
        let empty = load_csv(write_csv("date,SPX\n").path(), &CsvSchema::default());
        assert!(matches!(empty, Err(ReturnsError::EmptyPanel)));
        let bad = load_csv(write_csv("date,SPX\nnot-a-date,100\n").path(), &CsvSchema::default());
        assert!(matches!(bad, Err(ReturnsError::UnparseableDate { .. })));
    }

    #[test]
    fn rejects_missing_column() {
        let schema = CsvSchema { date_column: None, price_columns: Some(vec!["XXX".into()]) };
        let res = load_csv(write_csv("date,SPX\n2020-01-02,100\n").path(), &schema);
        assert!(matches!(res, Err(ReturnsError::MissingColumn(_))));
    }

    #[test]
    fn daily_returns_are_simple_percent() {
        let p = panel_from("date,A\n2020-01-02,100\n2020-01-03,101\n");
        let r = to_returns(&p, Period::Daily).unwrap();
        assert_eq!(r.returns.nrows(), 1);
        assert!((r.returns[(0, 0)] - 1.0).abs() < 1e-12);

        let p = panel_from("date,A\n2020-01-02,100\n2020-01-03,110\n2020-01-06,99\n");
        let r = to_returns(&p, Period::Daily).unwrap();
        assert!((r.returns[(0, 0)] - 10.0).abs() < 1e-12);
        assert!((r.returns[(1, 0)] + 10.0).abs() < 1e-12);
    }

    #[test]
    fn weekly_aggregation_uses_iso_week_closes() {
        // two full ISO weeks, Mon 2020-01-06 .. Fri 2020-01-17
        let mut csv = String::from("date,A\n");
        let days = [
            ("2020-01-06", 100.0),
            ("2020-01-07", 101.0),
            ("2020-01-08", 102.0),
            ("2020-01-09", 103.0),
            ("2020-01-10", 104.0), // week 2 close
            ("2020-01-13", 105.0),
            ("2020-01-14", 106.0),
            ("2020-01-15", 107.0),
            ("2020-01-16", 108.0),
            ("2020-01-17", 110.0), // week 3 close
        ];
        for (d, px) in days {
            csv.push_str(&format!("{d},{px}\n"));
        }
        let p = panel_from(&csv);
        let r = to_returns(&p, Period::Weekly).unwrap();
        assert_eq!(r.returns.nrows(), 1);
        // hand-computed: 100 * (110/104 - 1)
        assert!((r.returns[(0, 0)] - 100.0 * (110.0 / 104.0 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn monthly_aggregation_uses_calendar_months() {
        let p = panel_from(
            "date,A\n2020-01-15,100\n2020-01-31,102\n2020-02-14,103\n2020-02-28,105\n2020-03-31,110\n",
        );
        let r = to_returns(&p, Period::Monthly).unwrap();
        assert_eq!(r.returns.nrows(), 2);
        assert!((r.returns[(0, 0)] - 100.0 * (105.0 / 102.0 - 1.0)).abs() < 1e-12);
        assert!((r.returns[(1, 0)] - 100.0 * (110.0 / 105.0 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn constant_prices_give_zero_returns_every_period() {
        let mut csv = String::from("date,A,B\n");
        for day in 1..=60 {
            let date = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap()
                + chrono::Duration::days(day as i64);
            csv.push_str(&format!("{},50,70\n", date.format("%Y-%m-%d")));
        }
        let p = panel_from(&csv);
        for period in Period::ALL {
            let r = to_returns(&p, period).unwrap();
            assert!(r.returns.iter().all(|&x| x.abs() < 1e-12));
        }
    }

    #[test]
    fn compounding_daily_within_week_matches_weekly() {
        let mut csv = String::from("date,A\n");
        let days = [
            ("2020-01-06", 100.0),
            ("2020-01-07", 103.0),
            ("2020-01-08", 99.5),
            ("2020-01-09", 101.2),
            ("2020-01-10", 104.3),
            ("2020-01-13", 102.0),
            ("2020-01-14", 108.0),
            ("2020-01-15", 107.1),
            ("2020-01-16", 109.9),
            ("2020-01-17", 111.4),
        ];
        for (d, px) in days {
            csv.push_str(&format!("{d},{px}\n"));
        }
        let p = panel_from(&csv);
        let daily = to_returns(&p, Period::Daily).unwrap();
        let weekly = to_returns(&p, Period::Weekly).unwrap();
        // compound the second week's daily returns (rows 5..9 of the daily panel)
        let compounded = (5..10)
            .map(|i| 1.0 + daily.returns[(i - 1, 0)] / 100.0)
            .product::<f64>();
        let w = weekly.returns[(0, 0)] / 100.0 + 1.0;
        assert!(((compounded - w) / w).abs() < 1e-10);
    }

    #[test]
    fn insufficient_data_after_aggregation() {
        let p = panel_from("date,A\n2020-01-02,100\n2020-01-03,101\n");
        assert!(matches!(
            to_returns(&p, Period::Monthly),
            Err(ReturnsError::InsufficientData { .. })
        ));
    }
}
