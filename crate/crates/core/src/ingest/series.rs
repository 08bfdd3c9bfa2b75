use super::{BlockRecord, IngestError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub height_from: u64,
    pub height_to: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    /// The later block is not timestamped after the earlier one.
    NonPositive,
    /// The heights are not adjacent.
    NonConsecutive,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::NonPositive => "non-positive",
            Self::NonConsecutive => "non-consecutive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DropEntry {
    pub height_from: u64,
    pub height_to: u64,
    pub reason: DropReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockTimeSeries {
    /// Unique heights in ascending order.
    pub records: Vec<BlockRecord>,
    pub intervals: Vec<Interval>,
    pub drop_log: Vec<DropEntry>,
}

impl BlockTimeSeries {
    pub fn interval_seconds(&self) -> Vec<f64> {
        self.intervals.iter().map(|i| i.seconds).collect()
    }
}

/// Sort by height and difference adjacent blocks.
///
/// Repeated identical records collapse to one; the same height with two
/// different times is an integrity error.
pub fn compute_intervals(records: &[BlockRecord]) -> Result<BlockTimeSeries> {
    if records.len() < 2 {
        return Err(IngestError::Domain(format!(
            "need at least 2 records, got {}",
            records.len()
        )));
    }
    let mut sorted = records.to_vec();
    sorted.sort();
    let mut unique: Vec<BlockRecord> = Vec::with_capacity(sorted.len());
    for r in sorted {
        match unique.last() {
            Some(prev) if prev.height == r.height => {
                if prev.time != r.time {
                    return Err(IngestError::Integrity(format!(
                        "height {} appears with times {} and {}",
                        r.height, prev.time, r.time
                    )));
                }
            }
            _ => unique.push(r),
        }
    }

    let mut intervals = Vec::new();
    let mut drop_log = Vec::new();
    for w in unique.windows(2) {
        let (a, b) = (w[0], w[1]);
        let reason = if b.height != a.height + 1 {
            Some(DropReason::NonConsecutive)
        } else if b.time <= a.time {
            Some(DropReason::NonPositive)
        } else {
            None
        };
        match reason {
            Some(reason) => drop_log.push(DropEntry {
                height_from: a.height,
                height_to: b.height,
                reason,
            }),
            None => {
                let delta = b.time - a.time;
                let seconds = match delta.num_nanoseconds() {
                    Some(ns) => ns as f64 / 1e9,
                    None => delta.num_milliseconds() as f64 / 1e3,
                };
                intervals.push(Interval {
                    height_from: a.height,
                    height_to: b.height,
                    seconds,
                });
            }
        }
    }
    Ok(BlockTimeSeries {
        records: unique,
        intervals,
        drop_log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::DateTime;

    fn rec(height: u64, secs: i64) -> BlockRecord {
        BlockRecord {
            height,
            time: DateTime::from_timestamp(secs, 0).unwrap(),
        }
    }

    #[test]
    fn simple_intervals() {
        let s = compute_intervals(&[rec(1, 10), rec(2, 16), rec(3, 23)]).unwrap();
        assert_eq!(s.interval_seconds(), vec![6.0, 7.0]);
        assert!(s.drop_log.is_empty());
    }

    #[test]
    fn gap_dropped() {
        let s = compute_intervals(&[rec(1, 10), rec(2, 16), rec(4, 30)]).unwrap();
        assert_eq!(s.interval_seconds(), vec![6.0]);
        assert_eq!(
            s.drop_log,
            vec![DropEntry {
                height_from: 2,
                height_to: 4,
                reason: DropReason::NonConsecutive
            }]
        );
    }

    #[test]
    fn equal_times_dropped() {
        let s = compute_intervals(&[rec(1, 10), rec(2, 10), rec(3, 9)]).unwrap();
        assert!(s.intervals.is_empty());
        assert_eq!(s.drop_log.len(), 2);
        assert!(s.drop_log.iter().all(|d| d.reason.as_str() == "non-positive"));
    }

    #[test]
    fn duplicates() {
        let s = compute_intervals(&[rec(2, 16), rec(1, 10), rec(2, 16)]).unwrap();
        assert_eq!(s.records.len(), 2);
        assert!(matches!(
            compute_intervals(&[rec(1, 10), rec(1, 11)]),
            Err(IngestError::Integrity(_))
        ));
        assert!(compute_intervals(&[rec(1, 10)]).is_err());
    }

    #[test]
    fn subsecond_precision() {
        let a = BlockRecord {
            height: 1,
            time: DateTime::from_timestamp(100, 250_000_000).unwrap(),
        };
        let b = BlockRecord {
            height: 2,
            time: DateTime::from_timestamp(106, 0).unwrap(),
        };
        assert_eq!(compute_intervals(&[a, b]).unwrap().intervals[0].seconds, 5.75);
    }
}
