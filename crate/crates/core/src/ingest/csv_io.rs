use std::io::{Read, Write};

use chrono::{DateTime, SecondsFormat, Utc};

use super::series::{BlockTimeSeries, DropEntry};
use super::{BlockRecord, IngestError, Result};

/// Column names and strictness for [`parse_csv`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub height_col: String,
    pub time_col: String,
    /// Skip malformed rows (reporting them) instead of failing.
    pub lenient: bool,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            height_col: "height".into(),
            time_col: "time".into(),
            lenient: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeFormat {
    Rfc3339,
    /// Unix seconds, optionally with up to nine fractional digits.
    Epoch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    /// 1-based line number in the input, the header being line 1.
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCsv {
    pub records: Vec<BlockRecord>,
    /// Rows skipped in lenient mode.
    pub rejected: Vec<RowError>,
    /// Format detected for the time column; `None` if no row was read.
    pub time_format: Option<TimeFormat>,
}

fn classify(s: &str) -> TimeFormat {
    let body = s.strip_prefix('-').unwrap_or(s);
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    let digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    if !int.is_empty() && digits(int) && digits(frac) && !(body.contains('.') && frac.is_empty()) {
        TimeFormat::Epoch
    } else {
        TimeFormat::Rfc3339
    }
}

fn parse_epoch(s: &str) -> std::result::Result<DateTime<Utc>, String> {
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if frac.len() > 9 {
        return Err(format!("epoch {s:?} has more than 9 fractional digits"));
    }
    let secs: i64 = int.parse().map_err(|_| format!("epoch {s:?} out of range"))?;
    let nanos: u32 = if frac.is_empty() {
        0
    } else {
        format!("{frac:0<9}").parse().expect("nine ascii digits")
    };
    let (secs, nanos) = match (negative, nanos) {
        (false, _) => (secs, nanos),
        (true, 0) => (-secs, 0),
        (true, n) => (-secs - 1, 1_000_000_000 - n),
    };
    DateTime::from_timestamp(secs, nanos).ok_or_else(|| format!("epoch {s:?} out of range"))
}

fn parse_time(s: &str, format: TimeFormat) -> std::result::Result<DateTime<Utc>, String> {
    match format {
        TimeFormat::Epoch => parse_epoch(s),
        TimeFormat::Rfc3339 => DateTime::parse_from_rfc3339(s)
            .map(|t| t.with_timezone(&Utc))
            .map_err(|e| format!("bad RFC 3339 time {s:?}: {e}")),
    }
}

/// Read block records from CSV with a header row.
///
/// The time column holds either RFC 3339 or epoch seconds, detected from
/// the first row; a later row in the other format is a format error even
/// in lenient mode.
pub fn parse_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<ParsedCsv> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let (hi, ti) = match (find(&schema.height_col), find(&schema.time_col)) {
        (Some(h), Some(t)) => (h, t),
        (h, t) => {
            let missing: Vec<&str> = [(h, &schema.height_col), (t, &schema.time_col)]
                .into_iter()
                .filter(|(i, _)| i.is_none())
                .map(|(_, n)| n.as_str())
                .collect();
            return Err(IngestError::Schema(format!(
                "missing column(s) {missing:?}; header has {:?}",
                headers.iter().collect::<Vec<_>>()
            )));
        }
    };

    let mut records = Vec::new();
    let mut rejected = Vec::new();
    let mut format = None;
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let height = row.get(hi).unwrap_or("");
        let time = row.get(ti).unwrap_or("");
        let parsed = (|| {
            let height: u64 = height
                .parse()
                .map_err(|_| format!("height {height:?} is not an integer"))?;
            if height == 0 {
                return Err("height must be positive".to_string());
            }
            if time.is_empty() {
                return Err("empty time field".to_string());
            }
            Ok(height)
        })();
        let height = match parsed {
            Ok(h) => h,
            Err(message) => {
                rejected.push(RowError { line, message });
                continue;
            }
        };
        let this = classify(time);
        let expected = *format.get_or_insert(this);
        if this != expected {
            return Err(IngestError::Format {
                line,
                message: format!("time {time:?} is {this:?} but the column started as {expected:?}"),
            });
        }
        match parse_time(time, this) {
            Ok(time) => records.push(BlockRecord { height, time }),
            Err(message) => rejected.push(RowError { line, message }),
        }
    }
    if !schema.lenient && !rejected.is_empty() {
        return Err(IngestError::MalformedRows(rejected));
    }
    Ok(ParsedCsv {
        records,
        rejected,
        time_format: format,
    })
}

/// Write records as `height,time` with RFC 3339 nanosecond timestamps.
pub fn write_csv<W: Write>(records: &[BlockRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["height", "time"])?;
    for r in records {
        w.write_record([
            r.height.to_string(),
            r.time.to_rfc3339_opts(SecondsFormat::Nanos, true),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write retained intervals as `height_from,height_to,interval_seconds`.
pub fn write_intervals<W: Write>(series: &BlockTimeSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["height_from", "height_to", "interval_seconds"])?;
    for iv in &series.intervals {
        w.write_record([
            iv.height_from.to_string(),
            iv.height_to.to_string(),
            iv.seconds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write dropped pairs as `height_from,height_to,reason`.
pub fn write_drop_log<W: Write>(drops: &[DropEntry], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["height_from", "height_to", "reason"])?;
    for d in drops {
        w.write_record([
            d.height_from.to_string(),
            d.height_to.to_string(),
            d.reason.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Read the `interval_seconds` column of a CSV file.
pub fn read_interval_seconds<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let col = rdr
        .headers()?
        .iter()
        .position(|h| h == "interval_seconds")
        .ok_or_else(|| IngestError::Schema("missing column \"interval_seconds\"".into()))?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let field = row.get(col).unwrap_or("");
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            _ => {
                return Err(IngestError::Format {
                    line,
                    message: format!("interval {field:?} is not a finite number"),
                })
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strict() -> CsvSchema {
        CsvSchema::default()
    }

    #[test]
    fn rfc3339_rows() {
        let text = "height,time\n1,2024-01-01T00:00:00Z\n2,2024-01-01T00:00:06Z";
        let p = parse_csv(text.as_bytes(), &strict()).unwrap();
        assert_eq!(p.records.len(), 2);
        assert_eq!(p.time_format, Some(TimeFormat::Rfc3339));
        let dt = p.records[1].time - p.records[0].time;
        assert_eq!(dt.num_seconds(), 6);
    }

    #[test]
    fn epoch_column() {
        let p = parse_csv("height,time\n5,1700000000\n".as_bytes(), &strict()).unwrap();
        assert_eq!(
            p.records[0].time,
            DateTime::from_timestamp(1_700_000_000, 0).unwrap()
        );
        assert_eq!(p.time_format, Some(TimeFormat::Epoch));
        let p = parse_csv("height,time\n5,1700000000.000000001\n".as_bytes(), &strict()).unwrap();
        assert_eq!(p.records[0].time.timestamp_subsec_nanos(), 1);
        assert_eq!(
            parse_epoch("-1.25").unwrap(),
            DateTime::from_timestamp(-2, 750_000_000).unwrap()
        );
        assert!(parse_epoch("1.0000000001").is_err());
    }

    #[test]
    fn bad_height_names_line() {
        let text = "height,time\n1,1700000000\nabc,1700000006\n";
        match parse_csv(text.as_bytes(), &strict()) {
            Err(IngestError::MalformedRows(rows)) => {
                assert_eq!(rows.len(), 1);
                assert_eq!(rows[0].line, 3);
                assert!(rows[0].message.contains("abc"));
            }
            other => panic!("{other:?}"),
        }
        let lenient = CsvSchema {
            lenient: true,
            ..strict()
        };
        let p = parse_csv(text.as_bytes(), &lenient).unwrap();
        assert_eq!(p.records.len(), 1);
        assert_eq!(p.rejected[0].line, 3);
    }

    #[test]
    fn mixed_formats_rejected() {
        let text = "height,time\n1,1700000000\n2,2024-01-01T00:00:06Z\n";
        let lenient = CsvSchema {
            lenient: true,
            ..strict()
        };
        assert!(matches!(
            parse_csv(text.as_bytes(), &lenient),
            Err(IngestError::Format { line: 3, .. })
        ));
    }

    #[test]
    fn missing_columns() {
        let err = parse_csv("h,time\n1,1\n".as_bytes(), &strict()).unwrap_err();
        assert!(matches!(err, IngestError::Schema(ref m) if m.contains("height")));
        let custom = CsvSchema {
            height_col: "h".into(),
            time_col: "ts".into(),
            lenient: false,
        };
        assert_eq!(
            parse_csv("ts,h\n7,3\n".as_bytes(), &custom).unwrap().records[0].height,
            3
        );
    }

    #[test]
    fn round_trip_nanoseconds() {
        let text = "height,time\n10,2024-03-05T12:00:00.123456789Z\n11,2024-03-05T12:00:06.5+02:00\n";
        let p = parse_csv(text.as_bytes(), &strict()).unwrap();
        let mut out = Vec::new();
        write_csv(&p.records, &mut out).unwrap();
        let back = parse_csv(out.as_slice(), &strict()).unwrap();
        assert_eq!(back.records, p.records);
        let mut again = Vec::new();
        write_csv(&back.records, &mut again).unwrap();
        assert_eq!(out, again);
        assert!(String::from_utf8(out)
            .unwrap()
            .contains("2024-03-05T10:00:06.500000000Z"));
    }

    #[test]
    fn interval_reader() {
        let v = read_interval_seconds("interval_seconds\n6\n0.25\n".as_bytes()).unwrap();
        assert_eq!(v, vec![6.0, 0.25]);
        assert!(read_interval_seconds("seconds\n1\n".as_bytes()).is_err());
        assert!(matches!(
            read_interval_seconds("interval_seconds\n1\nNaN\n".as_bytes()),
            Err(IngestError::Format { line: 3, .. })
        ));
    }
}
