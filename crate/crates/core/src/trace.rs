//! Carbon-intensity traces: fixed-interval step functions over epoch time.
//!
//! A trace holds one intensity sample per interval. The value at timestamp
//! `t` is the sample whose step window `[t_k, t_k + interval)` contains `t`,
//! i.e. intensity is held constant across each step.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

/// Errors from trace parsing, construction, and lookups.
#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace has no samples")]
    Empty,
    #[error("csv header must be `timestamp,intensity_gco2_kwh`, got `{found}`")]
    BadHeader { found: String },
    #[error("row {index}: {message}")]
    MalformedRow { index: usize, message: String },
    #[error("cannot infer interval from fewer than two samples")]
    CannotInferInterval,
    #[error("interval must be positive, got {interval_s}")]
    BadInterval { interval_s: i64 },
    #[error("duplicate timestamp {t} at index {index}")]
    DuplicateTimestamp { index: usize, t: i64 },
    #[error("gap at index {index}: expected timestamp {expected}, found {found}")]
    Gap {
        index: usize,
        expected: i64,
        found: i64,
    },
    #[error("intensity at index {index} is not finite")]
    NonFinite { index: usize },
    #[error("negative intensity {value} at index {index}")]
    Negative { index: usize, value: f64 },
    #[error("timestamp {t} outside trace [{start}, {end})")]
    OutOfRange { t: i64, start: i64, end: i64 },
    #[error("window [{start}, {end}) overlaps no trace step")]
    EmptyWindow { start: i64, end: i64 },
    #[error("malformed trace json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed trace csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Errors from [`fetch_trace`], carrying the source and requested window.
#[derive(Debug, thiserror::Error)]
pub enum FetchError {
    #[error("read {path} for window [{start}, {end}): {source}")]
    Io {
        path: String,
        start: i64,
        end: i64,
        #[source]
        source: std::io::Error,
    },
    #[error("fetch {url} for window [{start}, {end}): {source}")]
    Network {
        url: String,
        start: i64,
        end: i64,
        #[source]
        source: reqwest::Error,
    },
    #[error("fetch {url} for window [{start}, {end}): http status {status}")]
    Status {
        url: String,
        start: i64,
        end: i64,
        status: u16,
    },
    #[error("{origin} window [{start}, {end}): {source}")]
    Schema {
        origin: String,
        start: i64,
        end: i64,
        #[source]
        source: TraceError,
    },
}

/// Wire/file formats a trace can be read from or written to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    /// `timestamp,intensity_gco2_kwh` rows; interval inferred from spacing.
    Csv,
    /// `{"interval_s": <int>, "points": [{"t": <epoch s>, "ci": <g/kWh>}]}`.
    Json,
}

/// What to do with missing steps while parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FillPolicy {
    /// Any gap is an error.
    #[default]
    Reject,
    /// A single missing step is forward-filled with the previous value;
    /// two or more consecutive missing steps are still an error.
    HoldSingle,
}

/// Where a trace comes from.
#[derive(Debug, Clone)]
pub enum TraceSource {
    /// Local file; format chosen by extension (`.csv` => CSV, else JSON).
    File(PathBuf),
    /// HTTP endpoint queried with `start`/`end`/`region` parameters,
    /// returning the JSON trace format.
    Http { endpoint: String, region: String },
}

#[derive(Serialize, Deserialize)]
struct TraceDoc {
    interval_s: i64,
    points: Vec<TracePoint>,
}

#[derive(Serialize, Deserialize)]
struct TracePoint {
    t: i64,
    ci: f64,
}

/// A non-empty, uniformly spaced carbon-intensity series.
///
/// Sample `k` covers `[start_time + k*interval_s, start_time + (k+1)*interval_s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CarbonTrace {
    start_time: i64,
    interval_s: i64,
    intensities: Vec<f64>,
}

impl CarbonTrace {
    /// Builds a trace from already-uniform samples, validating values.
    pub fn new(
        start_time: i64,
        interval_s: i64,
        intensities: Vec<f64>,
    ) -> Result<Self, TraceError> {
        if interval_s <= 0 {
            return Err(TraceError::BadInterval { interval_s });
        }
        if intensities.is_empty() {
            return Err(TraceError::Empty);
        }
        for (index, &v) in intensities.iter().enumerate() {
            if !v.is_finite() {
                return Err(TraceError::NonFinite { index });
            }
            if v < 0.0 {
                return Err(TraceError::Negative { index, value: v });
            }
        }
        Ok(Self {
            start_time,
            interval_s,
            intensities,
        })
    }

    pub fn start_time(&self) -> i64 {
        self.start_time
    }

    pub fn interval_s(&self) -> i64 {
        self.interval_s
    }

    /// First timestamp past the covered range.
    pub fn end_time(&self) -> i64 {
        self.start_time + self.len() as i64 * self.interval_s
    }

    pub fn len(&self) -> usize {
        self.intensities.len()
    }

    /// Always false: empty traces cannot be constructed.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.intensities
    }

    /// Start timestamp of sample `index`.
    pub fn timestamp(&self, index: usize) -> i64 {
        self.start_time + index as i64 * self.interval_s
    }

    /// Index of the step whose window contains `t`, if inside the trace.
    pub fn step_index(&self, t: i64) -> Option<usize> {
        if t < self.start_time || t >= self.end_time() {
            return None;
        }
        Some(((t - self.start_time) / self.interval_s) as usize)
    }

    /// Step-function lookup: the sample whose window contains `t`.
    pub fn intensity_at(&self, t: i64) -> Result<f64, TraceError> {
        match self.step_index(t) {
            Some(i) => Ok(self.intensities[i]),
            None => Err(TraceError::OutOfRange {
                t,
                start: self.start_time,
                end: self.end_time(),
            }),
        }
    }

    /// Maximum sample among steps overlapping `[start, end)`.
    pub fn window_max(&self, start: i64, end: i64) -> Result<f64, TraceError> {
        let mut max: Option<f64> = None;
        for (k, &v) in self.intensities.iter().enumerate() {
            let t = self.timestamp(k);
            if t < end && t + self.interval_s > start {
                max = Some(match max {
                    Some(m) if m >= v => m,
                    _ => v,
                });
            }
        }
        max.ok_or(TraceError::EmptyWindow { start, end })
    }

    /// Sub-trace of samples whose start timestamps fall in `[start, end)`.
    pub fn slice(&self, start: i64, end: i64) -> Result<CarbonTrace, TraceError> {
        let mut first: Option<usize> = None;
        let mut values = Vec::new();
        for k in 0..self.len() {
            let t = self.timestamp(k);
            if t >= start && t < end {
                if first.is_none() {
                    first = Some(k);
                }
                values.push(self.intensities[k]);
            }
        }
        match first {
            Some(k) => CarbonTrace::new(self.timestamp(k), self.interval_s, values),
            None => Err(TraceError::EmptyWindow { start, end }),
        }
    }

    /// Serializes to the canonical CSV format.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("timestamp,intensity_gco2_kwh\n");
        for (k, &v) in self.intensities.iter().enumerate() {
            out.push_str(&format!("{},{}\n", self.timestamp(k), v));
        }
        out
    }

    /// Serializes to the canonical JSON format.
    pub fn to_json(&self) -> String {
        let doc = TraceDoc {
            interval_s: self.interval_s,
            points: self
                .intensities
                .iter()
                .enumerate()
                .map(|(k, &ci)| TracePoint {
                    t: self.timestamp(k),
                    ci,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("trace serialization cannot fail")
    }

    pub fn serialize(&self, format: TraceFormat) -> String {
        match format {
            TraceFormat::Csv => self.to_csv(),
            TraceFormat::Json => self.to_json(),
        }
    }
}

impl fmt::Display for CarbonTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} samples @ {} s from {}",
            self.len(),
            self.interval_s,
            self.start_time
        )
    }
}

/// Parses a trace, rejecting any gap or irregular spacing.
pub fn parse_trace(text: &str, format: TraceFormat) -> Result<CarbonTrace, TraceError> {
    let (trace, _) = parse_trace_filled(text, format, FillPolicy::Reject)?;
    Ok(trace)
}

/// Parses a trace under a fill policy; returns the timestamps of any steps
/// that were forward-filled so callers can report them.
pub fn parse_trace_filled(
    text: &str,
    format: TraceFormat,
    policy: FillPolicy,
) -> Result<(CarbonTrace, Vec<i64>), TraceError> {
    let (declared_interval, mut points) = match format {
        TraceFormat::Csv => (None, read_csv(text)?),
        TraceFormat::Json => {
            let doc: TraceDoc = serde_json::from_str(text)?;
            if doc.interval_s <= 0 {
                return Err(TraceError::BadInterval {
                    interval_s: doc.interval_s,
                });
            }
            (
                Some(doc.interval_s),
                doc.points.into_iter().map(|p| (p.t, p.ci)).collect(),
            )
        }
    };
    if points.is_empty() {
        return Err(TraceError::Empty);
    }
    points.sort_by_key(|&(t, _)| t);
    for (index, pair) in points.windows(2).enumerate() {
        if pair[0].0 == pair[1].0 {
            return Err(TraceError::DuplicateTimestamp {
                index: index + 1,
                t: pair[1].0,
            });
        }
    }
    let interval_s = match declared_interval {
        Some(v) => v,
        None if points.len() < 2 => return Err(TraceError::CannotInferInterval),
        None => points[1].0 - points[0].0,
    };
    if interval_s <= 0 {
        return Err(TraceError::BadInterval { interval_s });
    }

    let start_time = points[0].0;
    let mut values = Vec::with_capacity(points.len());
    let mut filled = Vec::new();
    let mut expected = start_time;
    for (index, &(t, ci)) in points.iter().enumerate() {
        while t != expected {
            let gap = TraceError::Gap {
                index,
                expected,
                found: t,
            };
            if policy == FillPolicy::HoldSingle && t == expected + interval_s {
                let held = *values.last().ok_or(gap)?;
                values.push(held);
                filled.push(expected);
                expected += interval_s;
            } else {
                return Err(gap);
            }
        }
        values.push(ci);
        expected += interval_s;
    }
    let trace = CarbonTrace::new(start_time, interval_s, values)?;
    Ok((trace, filled))
}

fn read_csv(text: &str) -> Result<Vec<(i64, f64)>, TraceError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    let fields: Vec<&str> = header.iter().collect();
    if fields != ["timestamp", "intensity_gco2_kwh"] {
        return Err(TraceError::BadHeader {
            found: fields.join(","),
        });
    }
    let mut points = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != 2 {
            return Err(TraceError::MalformedRow {
                index,
                message: format!("expected 2 fields, got {}", record.len()),
            });
        }
        let t: i64 = record[0].parse().map_err(|e| TraceError::MalformedRow {
            index,
            message: format!("bad timestamp `{}`: {e}", &record[0]),
        })?;
        let ci: f64 = record[1].parse().map_err(|e| TraceError::MalformedRow {
            index,
            message: format!("bad intensity `{}`: {e}", &record[1]),
        })?;
        points.push((t, ci));
    }
    Ok(points)
}

/// Fetches a trace from a file or an HTTP endpoint and slices it to
/// `[window.0, window.1)`.
///
/// HTTP sources are queried as `GET {endpoint}?start=..&end=..&region=..`
/// and must answer with the JSON trace format.
pub fn fetch_trace(source: &TraceSource, window: (i64, i64)) -> Result<CarbonTrace, FetchError> {
    let (start, end) = window;
    match source {
        TraceSource::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| FetchError::Io {
                path: path.display().to_string(),
                start,
                end,
                source,
            })?;
            let format = match path.extension().and_then(|e| e.to_str()) {
                Some("csv") => TraceFormat::Csv,
                _ => TraceFormat::Json,
            };
            let origin = format!("parse {}", path.display());
            parse_and_slice(&text, format, origin, window)
        }
        TraceSource::Http { endpoint, region } => {
            let url = format!("{endpoint}?start={start}&end={end}&region={region}");
            let response = reqwest::blocking::get(&url).map_err(|source| FetchError::Network {
                url: url.clone(),
                start,
                end,
                source,
            })?;
            let status = response.status();
            if !status.is_success() {
                return Err(FetchError::Status {
                    url,
                    start,
                    end,
                    status: status.as_u16(),
                });
            }
            let body = response.text().map_err(|source| FetchError::Network {
                url: url.clone(),
                start,
                end,
                source,
            })?;
            parse_and_slice(&body, TraceFormat::Json, format!("parse {url}"), window)
        }
    }
}

fn parse_and_slice(
    text: &str,
    format: TraceFormat,
    origin: String,
    (start, end): (i64, i64),
) -> Result<CarbonTrace, FetchError> {
    let schema = |source| FetchError::Schema {
        origin: origin.clone(),
        start,
        end,
        source,
    };
    let trace = parse_trace(text, format).map_err(schema)?;
    trace.slice(start, end).map_err(schema)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace_345() -> CarbonTrace {
        CarbonTrace::new(0, 1800, vec![400.0, 500.0, 450.0]).unwrap()
    }

    #[test]
    fn intensity_at_uses_step_windows() {
        let t = trace_345();
        assert_eq!(t.intensity_at(0).unwrap(), 400.0);
        assert_eq!(t.intensity_at(1799).unwrap(), 400.0);
        assert_eq!(t.intensity_at(1800).unwrap(), 500.0);
        assert_eq!(t.intensity_at(5399).unwrap(), 450.0);
        assert!(matches!(
            t.intensity_at(5400),
            Err(TraceError::OutOfRange { t: 5400, .. })
        ));
        assert!(matches!(
            t.intensity_at(-1),
            Err(TraceError::OutOfRange { .. })
        ));
    }

    #[test]
    fn window_max_over_overlapping_steps() {
        let t = trace_345();
        assert_eq!(t.window_max(0, 5400).unwrap(), 500.0);
        assert_eq!(t.window_max(3600, 3601).unwrap(), 450.0);
        assert_eq!(t.window_max(1799, 1800).unwrap(), 400.0);
        assert!(matches!(
            t.window_max(5400, 7200),
            Err(TraceError::EmptyWindow { .. })
        ));
    }

    #[test]
    fn slice_keeps_sample_starts_in_window() {
        let t = trace_345();
        let s = t.slice(1800, 5400).unwrap();
        assert_eq!(s.start_time(), 1800);
        assert_eq!(s.values(), &[500.0, 450.0]);
        let one = t.slice(0, 1801).unwrap();
        assert_eq!(one.values(), &[400.0, 500.0]);
        assert!(t.slice(5400, 9000).is_err());
    }

    #[test]
    fn csv_round_trip_is_identity() {
        let t = trace_345();
        let csv = t.to_csv();
        assert!(csv.starts_with("timestamp,intensity_gco2_kwh\n0,400\n"));
        let back = parse_trace(&csv, TraceFormat::Csv).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn json_round_trip_is_identity() {
        let t = CarbonTrace::new(1_673_740_800, 1800, vec![350.25, 351.125, 349.5]).unwrap();
        let back = parse_trace(&t.to_json(), TraceFormat::Json).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn csv_gap_is_rejected_with_index() {
        let text = "timestamp,intensity_gco2_kwh\n0,400\n1800,410\n5400,420\n";
        let err = parse_trace(text, TraceFormat::Csv).unwrap_err();
        match err {
            TraceError::Gap {
                index,
                expected,
                found,
            } => {
                assert_eq!((index, expected, found), (2, 3600, 5400));
            }
            other => panic!("expected gap error, got {other:?}"),
        }
    }

    #[test]
    fn hold_fill_covers_single_gaps_only() {
        let text = "timestamp,intensity_gco2_kwh\n0,400\n1800,410\n5400,420\n";
        let (t, filled) =
            parse_trace_filled(text, TraceFormat::Csv, FillPolicy::HoldSingle).unwrap();
        assert_eq!(t.values(), &[400.0, 410.0, 410.0, 420.0]);
        assert_eq!(filled, vec![3600]);

        let double = "timestamp,intensity_gco2_kwh\n0,400\n1800,410\n7200,420\n";
        assert!(parse_trace_filled(double, TraceFormat::Csv, FillPolicy::HoldSingle).is_err());
    }

    #[test]
    fn unsorted_input_is_sorted_and_duplicates_rejected() {
        let text = "timestamp,intensity_gco2_kwh\n1800,410\n0,400\n";
        let t = parse_trace(text, TraceFormat::Csv).unwrap();
        assert_eq!(t.values(), &[400.0, 410.0]);

        let dup = "timestamp,intensity_gco2_kwh\n0,400\n0,410\n1800,420\n";
        assert!(matches!(
            parse_trace(dup, TraceFormat::Csv),
            Err(TraceError::DuplicateTimestamp { t: 0, .. })
        ));
    }

    #[test]
    fn reject_bad_values_and_headers() {
        assert!(matches!(
            parse_trace("timestamp,intensity\n0,400\n", TraceFormat::Csv),
            Err(TraceError::BadHeader { .. })
        ));
        assert!(matches!(
            parse_trace(
                "timestamp,intensity_gco2_kwh\n0,400\n1800,-1\n",
                TraceFormat::Csv
            ),
            Err(TraceError::Negative { index: 1, .. })
        ));
        assert!(matches!(
            parse_trace(
                "timestamp,intensity_gco2_kwh\n0,nan\n1800,1\n",
                TraceFormat::Csv
            ),
            Err(TraceError::NonFinite { index: 0 })
        ));
        assert!(matches!(
            parse_trace("timestamp,intensity_gco2_kwh\n0,400\n", TraceFormat::Csv),
            Err(TraceError::CannotInferInterval)
        ));
        assert!(matches!(
            parse_trace("{\"interval_s\": 0, \"points\": []}", TraceFormat::Json),
            Err(TraceError::BadInterval { interval_s: 0 })
        ));
    }

    #[test]
    fn single_point_json_is_valid() {
        let t = parse_trace(
            "{\"interval_s\": 1800, \"points\": [{\"t\": 0, \"ci\": 420.0}]}",
            TraceFormat::Json,
        )
        .unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.end_time(), 1800);
    }

    #[test]
    fn fetch_from_file_slices_to_window() {
        let dir = std::env::temp_dir().join("chase_trace_fetch_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.csv");
        std::fs::write(&path, trace_345().to_csv()).unwrap();
        let got = fetch_trace(&TraceSource::File(path.clone()), (1800, 5400)).unwrap();
        assert_eq!(got.values(), &[500.0, 450.0]);
        let err = fetch_trace(&TraceSource::File(path), (9000, 10800)).unwrap_err();
        assert!(err.to_string().contains("[9000, 10800)"));
    }
}
