//! Raw GPS ingestion and day-level segmentation.
//!
//! The pipeline consumes flat CSV exports with columns `user_id`,
//! `timestamp`, `lat`, `lon` (header-addressed, extra columns ignored).
//! Rows that fail to parse or carry out-of-range coordinates are counted
//! and skipped, never silently dropped. Records are then split into one
//! trajectory per local calendar day and projected into a planar frame.

use crate::error::{Error, Result};
use crate::linalg::Vec2;
use chrono::{DateTime, NaiveDate, NaiveTime};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// Mean Earth radius in meters, used by the equirectangular projection.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// A single validated GPS fix.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoRecord {
    user_id: String,
    /// Unix seconds (UTC).
    timestamp: i64,
    lat: f64,
    lon: f64,
}

impl GeoRecord {
    pub fn new(user_id: impl Into<String>, timestamp: i64, lat: f64, lon: f64) -> Result<GeoRecord> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(Error::InvalidInput(format!("latitude {lat} out of range")));
        }
        if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::InvalidInput(format!("longitude {lon} out of range")));
        }
        Ok(GeoRecord {
            user_id: user_id.into(),
            timestamp,
            lat,
            lon,
        })
    }

    pub fn user_id(&self) -> &str {
        &self.user_id
    }

    pub fn timestamp(&self) -> i64 {
        self.timestamp
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

/// How raw coordinates become planar points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ProjectionMode {
    /// Identity: `x = lat`, `y = lon`. Suitable for data that is already
    /// planar (e.g. synthetic traces) or for quick looks at small extents.
    RawDegrees,
    /// Local equirectangular frame around a reference point, in meters:
    /// `x = R * dlon * cos(lat_ref)`, `y = R * dlat` (angles in radians).
    LocalEquirectangular {
        /// `[lat, lon]` of the frame origin, in degrees.
        reference: Vec2,
    },
}

/// Projection choice plus the clock offset that defines local calendar days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionConfig {
    #[serde(flatten)]
    pub mode: ProjectionMode,
    /// Minutes added to UTC before taking the calendar date.
    #[serde(default)]
    pub tz_offset_minutes: i32,
}

impl ProjectionConfig {
    pub fn raw_degrees() -> ProjectionConfig {
        ProjectionConfig {
            mode: ProjectionMode::RawDegrees,
            tz_offset_minutes: 0,
        }
    }

    pub fn project(&self, record: &GeoRecord) -> Vec2 {
        match &self.mode {
            ProjectionMode::RawDegrees => Vec2::new(record.lat, record.lon),
            ProjectionMode::LocalEquirectangular { reference } => {
                let dlat = (record.lat - reference.x).to_radians();
                let dlon = (record.lon - reference.y).to_radians();
                Vec2::new(
                    EARTH_RADIUS_M * dlon * reference.x.to_radians().cos(),
                    EARTH_RADIUS_M * dlat,
                )
            }
        }
    }

    fn local_date(&self, timestamp: i64) -> Result<NaiveDate> {
        let shifted = timestamp + 60 * i64::from(self.tz_offset_minutes);
        DateTime::from_timestamp(shifted, 0)
            .map(|dt| dt.date_naive())
            .ok_or_else(|| Error::InvalidInput(format!("timestamp {timestamp} out of range")))
    }
}

/// One calendar day of projected points, kept in time order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyTrajectory {
    day_id: NaiveDate,
    points: Vec<Vec2>,
}

impl DailyTrajectory {
    pub fn new(day_id: NaiveDate, points: Vec<Vec2>) -> DailyTrajectory {
        DailyTrajectory { day_id, points }
    }

    pub fn day_id(&self) -> NaiveDate {
        self.day_id
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn point_count(&self) -> usize {
        self.points.len()
    }

    /// Whether the day carries enough points to support a density fit.
    pub fn fittable(&self, min_points: usize) -> bool {
        self.points.len() >= min_points
    }
}

/// All of one user's days, unique and ascending by date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDataset")]
pub struct UserDataset {
    user_id: String,
    days: Vec<DailyTrajectory>,
}

#[derive(Deserialize)]
struct RawDataset {
    user_id: String,
    days: Vec<DailyTrajectory>,
}

impl TryFrom<RawDataset> for UserDataset {
    type Error = Error;
    fn try_from(raw: RawDataset) -> Result<UserDataset> {
        UserDataset::new(raw.user_id, raw.days)
    }
}

impl UserDataset {
    pub fn new(user_id: impl Into<String>, days: Vec<DailyTrajectory>) -> Result<UserDataset> {
        for pair in days.windows(2) {
            if pair[1].day_id <= pair[0].day_id {
                return Err(Error::DuplicateDay(pair[1].day_id));
            }
        }
        Ok(UserDataset {
            user_id: user_id.into(),
            days,
        })
    }

    pub fn user_id(&self) -> &str {
        &self.user_id
    }

    pub fn days(&self) -> &[DailyTrajectory] {
        &self.days
    }

    pub fn n_days(&self) -> usize {
        self.days.len()
    }
}

/// Parse a CSV export. Returns the validated records in file order together
/// with the number of rejected rows (unparseable fields, out-of-range
/// coordinates, malformed lines). A missing or incomplete header is an
/// error for the whole file, not a per-row rejection.
pub fn parse_records<R: Read>(reader: R) -> Result<(Vec<GeoRecord>, usize)> {
    let mut csv = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = csv.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidInput(format!("missing column {name:?}")))
    };
    let (ci_user, ci_ts, ci_lat, ci_lon) = (col("user_id")?, col("timestamp")?, col("lat")?, col("lon")?);

    let mut records = Vec::new();
    let mut rejected = 0usize;
    for row in csv.records() {
        let row = match row {
            Ok(r) => r,
            Err(_) => {
                rejected += 1;
                continue;
            }
        };
        let parsed = (|| -> Option<GeoRecord> {
            let user = row.get(ci_user)?;
            let ts = parse_timestamp(row.get(ci_ts)?)?;
            let lat: f64 = row.get(ci_lat)?.trim().parse().ok()?;
            let lon: f64 = row.get(ci_lon)?.trim().parse().ok()?;
            GeoRecord::new(user, ts, lat, lon).ok()
        })();
        match parsed {
            Some(r) => records.push(r),
            None => rejected += 1,
        }
    }
    Ok((records, rejected))
}

/// Accepts integer Unix seconds or an RFC 3339 datetime.
fn parse_timestamp(field: &str) -> Option<i64> {
    let field = field.trim();
    if let Ok(secs) = field.parse::<i64>() {
        return Some(secs);
    }
    DateTime::parse_from_rfc3339(field).ok().map(|dt| dt.timestamp())
}

/// Split one user's records into per-day projected trajectories. Records
/// may arrive in any order; they are sorted by timestamp (stable, so equal
/// stamps keep file order) and grouped by local calendar date. Mixing user
/// ids is an error, and an empty record list yields an empty dataset.
pub fn segment_by_day(records: &[GeoRecord], cfg: &ProjectionConfig) -> Result<UserDataset> {
    let Some(first) = records.first() else {
        return UserDataset::new("", Vec::new());
    };
    for r in records {
        if r.user_id != first.user_id {
            return Err(Error::MixedUsers {
                expected: first.user_id.clone(),
                found: r.user_id.clone(),
            });
        }
    }

    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by_key(|&i| records[i].timestamp);

    let mut days: Vec<DailyTrajectory> = Vec::new();
    for i in order {
        let r = &records[i];
        let date = cfg.local_date(r.timestamp)?;
        let point = cfg.project(r);
        match days.last_mut() {
            Some(day) if day.day_id == date => day.points.push(point),
            _ => days.push(DailyTrajectory::new(date, vec![point])),
        }
    }
    UserDataset::new(first.user_id.clone(), days)
}

/// Serialize a dataset back to the ingestible CSV schema. Points are
/// interpreted as raw degrees (`x = lat`, `y = lon`), which is the frame
/// synthetic data is generated in; coordinates outside geographic ranges
/// are an error. Timestamps are synthesized to spread each day's points
/// evenly from local midnight, preserving point order.
pub fn write_csv<W: Write>(dataset: &UserDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["user_id", "timestamp", "lat", "lon"])?;
    for day in dataset.days() {
        let n = day.point_count() as i64;
        let start = day
            .day_id()
            .and_time(NaiveTime::MIN)
            .and_utc()
            .timestamp();
        let step = if n > 0 { (24 * 3600) / n } else { 0 };
        for (i, p) in day.points().iter().enumerate() {
            if !(-90.0..=90.0).contains(&p.x) || !(-180.0..=180.0).contains(&p.y) {
                return Err(Error::InvalidInput(format!(
                    "point ({}, {}) on {} is not expressible as raw degrees",
                    p.x,
                    p.y,
                    day.day_id()
                )));
            }
            w.write_record([
                dataset.user_id(),
                &(start + i as i64 * step).to_string(),
                &format!("{:.12}", p.x),
                &format!("{:.12}", p.y),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
