//! Check-in CSV files: `user_id,timestamp,x,y,venue_id,category[,community]`.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Event, Point, Region, Trace, Venue};

pub const TRACE_HEADER: [&str; 6] = ["user_id", "timestamp", "x", "y", "venue_id", "category"];
const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinateMode {
    /// `x`, `y` used as given.
    #[default]
    Planar,
    /// `x` is longitude and `y` latitude in degrees, projected equirectangularly
    /// about the venue centroid to kilometres.
    LatLon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadOptions {
    /// Raw timestamps are divided by this (3600 turns seconds into hours).
    pub time_scale: f64,
    /// Subtracted from the scaled timestamps.
    pub time_origin: f64,
    pub coordinates: CoordinateMode,
    /// Observation horizon; defaults to the last event time.
    pub horizon: Option<f64>,
    /// Spatial window; defaults to the venue bounding box.
    pub region: Option<Region>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { time_scale: 1.0, time_origin: 0.0, coordinates: CoordinateMode::Planar, horizon: None, region: None }
    }
}

/// A trace plus the original identifiers behind its dense indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadedTrace {
    pub trace: Trace,
    /// Original `user_id` per user index.
    pub users: Vec<String>,
    /// Original `venue_id` per venue index.
    pub venue_ids: Vec<String>,
}

impl LoadedTrace {
    /// Labels `0..n` for traces built in memory.
    pub fn from_trace(trace: Trace) -> Self {
        let users = (0..trace.n_users).map(|i| i.to_string()).collect();
        let venue_ids = (0..trace.venues.len()).map(|v| v.to_string()).collect();
        LoadedTrace { trace, users, venue_ids }
    }
}

struct Row {
    line: u64,
    user: String,
    t: f64,
    x: f64,
    y: f64,
    venue: String,
    category: String,
    community: Option<usize>,
}

fn parse_rows(path: &Path, text: &str) -> Result<(Vec<Row>, bool)> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let has_community = match names.as_slice() {
        [a @ .., "community"] if a == TRACE_HEADER => true,
        a if a == TRACE_HEADER => false,
        _ => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("expected header {}[,community], found {}", TRACE_HEADER.join(","), names.join(",")),
            })
        }
    };
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let err = |message: String| Error::Parse { path: path.to_path_buf(), line, message };
        if record.len() != names.len() {
            return Err(err(format!("expected {} fields, found {}", names.len(), record.len())));
        }
        let number = |i: usize| -> Result<f64> {
            let v: f64 = record[i].parse().map_err(|e| err(format!("{} {:?}: {e}", names[i], &record[i])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(err(format!("{} is not finite", names[i])))
            }
        };
        let text = |i: usize| -> Result<String> {
            if record[i].is_empty() {
                Err(err(format!("empty {}", names[i])))
            } else {
                Ok(record[i].to_string())
            }
        };
        let community = if has_community && !record[6].is_empty() {
            Some(record[6].parse().map_err(|e| err(format!("community {:?}: {e}", &record[6])))?)
        } else {
            None
        };
        rows.push(Row {
            line,
            user: text(0)?,
            t: number(1)?,
            x: number(2)?,
            y: number(3)?,
            venue: text(4)?,
            category: text(5)?,
            community,
        });
    }
    Ok((rows, has_community))
}

fn bounding_region(points: &[Point], t_end: f64) -> Result<Region> {
    let (mut x_min, mut x_max, mut y_min, mut y_max) = (0.0, 1.0, 0.0, 1.0);
    if let Some(first) = points.first() {
        (x_min, x_max, y_min, y_max) = (first.x, first.x, first.y, first.y);
        for p in points {
            x_min = p.x.min(x_min);
            x_max = p.x.max(x_max);
            y_min = p.y.min(y_min);
            y_max = p.y.max(y_max);
        }
        if x_max - x_min <= 0.0 {
            (x_min, x_max) = (x_min - 0.5, x_max + 0.5);
        }
        if y_max - y_min <= 0.0 {
            (y_min, y_max) = (y_min - 0.5, y_max + 0.5);
        }
    }
    Region::new(t_end, x_min, x_max, y_min, y_max)
}

fn intern(map: &mut HashMap<String, usize>, labels: &mut Vec<String>, key: &str) -> usize {
    if let Some(&i) = map.get(key) {
        return i;
    }
    labels.push(key.to_string());
    map.insert(key.to_string(), labels.len() - 1);
    labels.len() - 1
}

/// Parses a trace. Events are stably sorted by time; users, venues and
/// categories are indexed by first appearance in that order.
pub fn parse_trace(text: &str, path: &Path, options: &LoadOptions) -> Result<LoadedTrace> {
    if !(options.time_scale > 0.0 && options.time_scale.is_finite()) {
        return Err(Error::config(format!("time_scale {} must be positive", options.time_scale)));
    }
    let (mut rows, _) = parse_rows(path, text)?;
    if rows.windows(2).any(|w| w[1].t < w[0].t) {
        log::warn!("{}: events are not sorted by timestamp; sorting", path.display());
        rows.sort_by(|a, b| a.t.total_cmp(&b.t));
    }

    let mut user_index = HashMap::new();
    let mut users = Vec::new();
    let mut venue_index = HashMap::new();
    let mut venue_ids = Vec::new();
    let mut category_index = HashMap::new();
    let mut category_labels = Vec::new();
    let mut raw_venues: Vec<(Point, usize, u64)> = Vec::new();
    let mut events = Vec::with_capacity(rows.len());
    for row in &rows {
        let user = intern(&mut user_index, &mut users, &row.user);
        let category = intern(&mut category_index, &mut category_labels, &row.category);
        let venue = intern(&mut venue_index, &mut venue_ids, &row.venue);
        let at = Point::new(row.x, row.y);
        if venue == raw_venues.len() {
            raw_venues.push((at, category, row.line));
        } else {
            let (first_at, first_category, first_line) = raw_venues[venue];
            if first_at != at || first_category != category {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: row.line,
                    message: format!("venue {:?} conflicts with its definition on line {first_line}", row.venue),
                });
            }
        }
        let t = row.t / options.time_scale - options.time_origin;
        if t < 0.0 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: row.line,
                message: format!("timestamp maps to negative model time {t}"),
            });
        }
        events.push(Event { t, venue, user, category, community: row.community });
    }

    let mut coords: Vec<Point> = raw_venues.iter().map(|v| v.0).collect();
    if options.coordinates == CoordinateMode::LatLon {
        coords = project_equirectangular(&coords);
    }
    let venues: Vec<Venue> = coords
        .iter()
        .zip(&raw_venues)
        .enumerate()
        .map(|(id, (&coords, &(_, category, _)))| Venue { id, coords, category })
        .collect();
    let last = events.last().map_or(0.0, |e| e.t);
    let t_end = options.horizon.unwrap_or(last);
    if t_end < last {
        return Err(Error::config(format!("horizon {t_end} precedes the last event at {last}")));
    }
    let region = match options.region {
        Some(r) => Region { t_end, ..r },
        None => bounding_region(&coords, t_end)?,
    };
    let trace = Trace { events, venues, region, n_users: users.len(), n_categories: category_labels.len(), category_labels };
    trace.validate()?;
    Ok(LoadedTrace { trace, users, venue_ids })
}

pub fn load_trace(path: &Path, options: &LoadOptions) -> Result<LoadedTrace> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace(&text, path, options)
}

/// Longitude/latitude degrees to kilometres about the centroid.
pub fn project_equirectangular(points: &[Point]) -> Vec<Point> {
    if points.is_empty() {
        return Vec::new();
    }
    let n = points.len() as f64;
    let lon0 = points.iter().map(|p| p.x).sum::<f64>() / n;
    let lat0 = points.iter().map(|p| p.y).sum::<f64>() / n;
    let cos0 = lat0.to_radians().cos();
    points
        .iter()
        .map(|p| Point::new(EARTH_RADIUS_KM * (p.x - lon0).to_radians() * cos0, EARTH_RADIUS_KM * (p.y - lat0).to_radians()))
        .collect()
}

/// Canonical CSV text; the community column is written when every event has one.
pub fn trace_to_csv(loaded: &LoadedTrace) -> Result<String> {
    let trace = &loaded.trace;
    let with_community = !trace.is_empty() && trace.events.iter().all(|e| e.community.is_some());
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = TRACE_HEADER.to_vec();
    if with_community {
        header.push("community");
    }
    writer.write_record(&header)?;
    for e in &trace.events {
        let at = trace.coords_of(e);
        let mut record = vec![
            loaded.users[e.user].clone(),
            e.t.to_string(),
            at.x.to_string(),
            at.y.to_string(),
            loaded.venue_ids[e.venue].clone(),
            trace.category_labels[e.category].clone(),
        ];
        if let (true, Some(g)) = (with_community, e.community) {
            record.push(g.to_string());
        }
        writer.write_record(&record)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::domain(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn save_trace(loaded: &LoadedTrace, path: &Path) -> Result<()> {
    std::fs::write(path, trace_to_csv(loaded)?).map_err(|e| Error::io(path, e))
}
