//! Parsing of VED-format telemetry and assembly into per-trip series.
//!
//! Two inputs are consumed: the dynamic per-second logs (one CSV per week in
//! the published dataset) and one static table describing each vehicle. Column
//! names are resolved through a [`ColumnMap`] so dataset revisions can be
//! absorbed through configuration. The canonical intermediate format written by
//! [`write_trips`] is itself a dynamic CSV under [`ColumnMap::canonical`], so
//! reading it back goes through the same parser.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, NaiveDateTime};
use rayon::prelude::*;
use serde::Serialize;

use crate::energy;
use crate::error::{Error, Result};

/// Header of the canonical `trips.csv` file.
pub const TRIPS_HEADER: [&str; 18] = [
    "veh_id",
    "trip_id",
    "timestamp_ms",
    "day_num",
    "lat",
    "lon",
    "speed_kmh",
    "engine_rpm",
    "maf_gps",
    "fuel_rate_lph",
    "abs_load_pct",
    "stft_b1",
    "stft_b2",
    "ltft_b1",
    "ltft_b2",
    "oat_c",
    "hv_current_a",
    "hv_voltage_v",
];

/// First day of the published dataset period.
pub fn default_epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(2017, 11, 1).expect("valid date")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum VehicleType {
    #[serde(rename = "ICE")]
    Ice,
    #[serde(rename = "HEV")]
    Hev,
    #[serde(rename = "PHEV")]
    Phev,
    #[serde(rename = "EV")]
    Ev,
}

impl VehicleType {
    pub const ALL: [VehicleType; 4] = [
        VehicleType::Ice,
        VehicleType::Hev,
        VehicleType::Phev,
        VehicleType::Ev,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VehicleType::Ice => "ICE",
            VehicleType::Hev => "HEV",
            VehicleType::Phev => "PHEV",
            VehicleType::Ev => "EV",
        }
    }

    /// Parses the spelling used in the static table ("ICE Vehicle", "HEV", ...).
    pub fn from_static_label(label: &str) -> Option<Self> {
        match label.trim().to_ascii_uppercase().as_str() {
            "ICE VEHICLE" | "ICE" => Some(VehicleType::Ice),
            "HEV" => Some(VehicleType::Hev),
            "PHEV" => Some(VehicleType::Phev),
            "EV" => Some(VehicleType::Ev),
            _ => None,
        }
    }

    pub fn static_label(self) -> &'static str {
        match self {
            VehicleType::Ice => "ICE Vehicle",
            other => other.as_str(),
        }
    }

    pub fn has_fuel(self) -> bool {
        !matches!(self, VehicleType::Ev)
    }

    pub fn has_battery(self) -> bool {
        !matches!(self, VehicleType::Ice)
    }
}

impl fmt::Display for VehicleType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VehicleType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_static_label(s).ok_or_else(|| Error::parse("vehicle type", s))
    }
}

/// One telemetry record. Channels other than the identifiers and timing are
/// sparsely populated in the source data and therefore optional.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SamplePoint {
    pub day_num: f64,
    pub timestamp_ms: i64,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    /// km/h
    pub speed: Option<f64>,
    pub engine_rpm: Option<f64>,
    /// g/s
    pub maf: Option<f64>,
    /// L/h
    pub fuel_rate: Option<f64>,
    /// percent
    pub abs_load: Option<f64>,
    pub stft_b1: Option<f64>,
    pub stft_b2: Option<f64>,
    pub ltft_b1: Option<f64>,
    pub ltft_b2: Option<f64>,
    /// outside air temperature, °C
    pub oat: Option<f64>,
    pub hv_current: Option<f64>,
    pub hv_voltage: Option<f64>,
}

impl SamplePoint {
    /// Field-range invariants of a single record.
    pub fn is_valid(&self) -> bool {
        self.timestamp_ms >= 0
            && self.day_num.is_finite()
            && self.speed.is_none_or(|v| v >= 0.0)
            && self.lat.is_none_or(|v| (-90.0..=90.0).contains(&v))
            && self.lon.is_none_or(|v| (-180.0..=180.0).contains(&v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleMeta {
    pub veh_id: String,
    pub vehicle_type: VehicleType,
    pub vehicle_class: Option<String>,
    pub engine_config: Option<String>,
    pub displacement_l: Option<f64>,
    pub transmission: Option<String>,
    pub drive_wheels: Option<String>,
    pub weight_lb: Option<f64>,
}

impl VehicleMeta {
    pub fn new(veh_id: impl Into<String>, vehicle_type: VehicleType) -> Self {
        VehicleMeta {
            veh_id: veh_id.into(),
            vehicle_type,
            vehicle_class: None,
            engine_config: None,
            displacement_l: None,
            transmission: None,
            drive_wheels: None,
            weight_lb: None,
        }
    }
}

/// Vehicle and trip identifier pair. Numeric identifiers order numerically.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TripKey {
    pub veh_id: String,
    pub trip_id: String,
}

impl TripKey {
    pub fn new(veh_id: impl Into<String>, trip_id: impl Into<String>) -> Self {
        TripKey {
            veh_id: veh_id.into(),
            trip_id: trip_id.into(),
        }
    }
}

pub(crate) fn id_cmp(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        _ => a.cmp(b),
    }
}

impl Ord for TripKey {
    fn cmp(&self, other: &Self) -> Ordering {
        id_cmp(&self.veh_id, &other.veh_id).then_with(|| id_cmp(&self.trip_id, &other.trip_id))
    }
}

impl PartialOrd for TripKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for TripKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.veh_id, self.trip_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripSeries {
    pub veh_id: String,
    pub trip_id: String,
    pub meta: VehicleMeta,
    pub samples: Vec<SamplePoint>,
    pub start_datetime: NaiveDateTime,
}

impl TripSeries {
    pub fn key(&self) -> TripKey {
        TripKey::new(self.veh_id.clone(), self.trip_id.clone())
    }

    /// Elapsed time between first and last sample in seconds.
    pub fn duration_s(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => (b.timestamp_ms - a.timestamp_ms) as f64 / 1000.0,
            _ => 0.0,
        }
    }

    pub fn month(&self) -> u32 {
        self.start_datetime.month()
    }

    pub fn origin(&self) -> Option<(f64, f64)> {
        self.samples.iter().find_map(|s| Some((s.lat?, s.lon?)))
    }

    pub fn destination(&self) -> Option<(f64, f64)> {
        self.samples
            .iter()
            .rev()
            .find_map(|s| Some((s.lat?, s.lon?)))
    }
}

/// Maps each channel to the header name used in an input file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMap {
    pub veh_id: String,
    pub trip_id: String,
    pub day_num: String,
    pub timestamp: String,
    pub lat: String,
    pub lon: String,
    pub speed: String,
    pub engine_rpm: String,
    pub maf: String,
    pub fuel_rate: String,
    pub abs_load: String,
    pub stft_b1: String,
    pub stft_b2: String,
    pub ltft_b1: String,
    pub ltft_b2: String,
    pub oat: String,
    pub hv_current: String,
    pub hv_voltage: String,
}

impl Default for ColumnMap {
    /// Header names of the published dynamic files.
    fn default() -> Self {
        ColumnMap {
            veh_id: "VehId".into(),
            trip_id: "Trip".into(),
            day_num: "DayNum".into(),
            timestamp: "Timestamp(ms)".into(),
            lat: "Latitude[deg]".into(),
            lon: "Longitude[deg]".into(),
            speed: "Vehicle Speed[km/h]".into(),
            engine_rpm: "Engine RPM[RPM]".into(),
            maf: "MAF[g/sec]".into(),
            fuel_rate: "Fuel Rate[L/hr]".into(),
            abs_load: "Absolute Load[%]".into(),
            stft_b1: "Short Term Fuel Trim Bank 1[%]".into(),
            stft_b2: "Short Term Fuel Trim Bank 2[%]".into(),
            ltft_b1: "Long Term Fuel Trim Bank 1[%]".into(),
            ltft_b2: "Long Term Fuel Trim Bank 2[%]".into(),
            oat: "OAT[DegC]".into(),
            hv_current: "HV Battery Current[A]".into(),
            hv_voltage: "HV Battery Voltage[V]".into(),
        }
    }
}

impl ColumnMap {
    /// Header names of the canonical `trips.csv`.
    pub fn canonical() -> Self {
        let h = TRIPS_HEADER;
        ColumnMap {
            veh_id: h[0].into(),
            trip_id: h[1].into(),
            timestamp: h[2].into(),
            day_num: h[3].into(),
            lat: h[4].into(),
            lon: h[5].into(),
            speed: h[6].into(),
            engine_rpm: h[7].into(),
            maf: h[8].into(),
            fuel_rate: h[9].into(),
            abs_load: h[10].into(),
            stft_b1: h[11].into(),
            stft_b2: h[12].into(),
            ltft_b1: h[13].into(),
            ltft_b2: h[14].into(),
            oat: h[15].into(),
            hv_current: h[16].into(),
            hv_voltage: h[17].into(),
        }
    }

    /// Header names in the canonical column order.
    pub fn headers(&self) -> [&str; 18] {
        [
            &self.veh_id,
            &self.trip_id,
            &self.timestamp,
            &self.day_num,
            &self.lat,
            &self.lon,
            &self.speed,
            &self.engine_rpm,
            &self.maf,
            &self.fuel_rate,
            &self.abs_load,
            &self.stft_b1,
            &self.stft_b2,
            &self.ltft_b1,
            &self.ltft_b2,
            &self.oat,
            &self.hv_current,
            &self.hv_voltage,
        ]
    }

    fn slot_mut(&mut self, key: &str) -> Option<&mut String> {
        Some(match key {
            "veh_id" => &mut self.veh_id,
            "trip_id" => &mut self.trip_id,
            "day_num" => &mut self.day_num,
            "timestamp" => &mut self.timestamp,
            "lat" => &mut self.lat,
            "lon" => &mut self.lon,
            "speed" => &mut self.speed,
            "engine_rpm" => &mut self.engine_rpm,
            "maf" => &mut self.maf,
            "fuel_rate" => &mut self.fuel_rate,
            "abs_load" => &mut self.abs_load,
            "stft_b1" => &mut self.stft_b1,
            "stft_b2" => &mut self.stft_b2,
            "ltft_b1" => &mut self.ltft_b1,
            "ltft_b2" => &mut self.ltft_b2,
            "oat" => &mut self.oat,
            "hv_current" => &mut self.hv_current,
            "hv_voltage" => &mut self.hv_voltage,
            _ => return None,
        })
    }

    /// Replaces header names for the given channel keys (e.g. `speed`).
    pub fn with_overrides<'a>(
        mut self,
        overrides: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self> {
        for (key, header) in overrides {
            let slot = self
                .slot_mut(key)
                .ok_or_else(|| Error::InvalidInput(format!("unknown column key {key:?}")))?;
            *slot = header.to_string();
        }
        Ok(self)
    }
}

/// Rows dropped while parsing, with per-reason counts and a few examples.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SkipReport {
    pub rows_read: usize,
    pub rows_skipped: usize,
    pub by_reason: BTreeMap<String, usize>,
    pub examples: Vec<String>,
}

impl SkipReport {
    const MAX_EXAMPLES: usize = 20;

    fn skip(&mut self, line: u64, reason: String, detail: String) {
        self.rows_skipped += 1;
        if self.examples.len() < Self::MAX_EXAMPLES {
            self.examples
                .push(format!("line {line}: {reason}: {detail}"));
        }
        *self.by_reason.entry(reason).or_default() += 1;
    }

    pub fn merge(&mut self, other: SkipReport) {
        self.rows_read += other.rows_read;
        self.rows_skipped += other.rows_skipped;
        for (k, v) in other.by_reason {
            *self.by_reason.entry(k).or_default() += v;
        }
        for e in other.examples {
            if self.examples.len() < Self::MAX_EXAMPLES {
                self.examples.push(e);
            }
        }
    }
}

pub type SampleGroups = BTreeMap<TripKey, Vec<SamplePoint>>;

#[derive(Debug, Clone, Default)]
pub struct DynamicParse {
    pub groups: SampleGroups,
    pub skips: SkipReport,
}

impl DynamicParse {
    /// Appends another file's samples, keeping per-trip arrival order.
    pub fn merge(&mut self, other: DynamicParse) {
        for (key, mut samples) in other.groups {
            self.groups.entry(key).or_default().append(&mut samples);
        }
        self.skips.merge(other.skips);
    }

    pub fn n_samples(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("nan") || cell.eq_ignore_ascii_case("no data")
}

fn header_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| {
        h.trim()
            .trim_start_matches('\u{feff}')
            .eq_ignore_ascii_case(name.trim())
    })
}

struct DynamicColumns {
    veh_id: usize,
    trip_id: usize,
    timestamp: usize,
    speed: usize,
    day_num: Option<usize>,
    optional: [(Option<usize>, &'static str); 13],
}

impl DynamicColumns {
    fn resolve(headers: &csv::StringRecord, map: &ColumnMap) -> Result<Self> {
        let required = [
            ("veh_id", &map.veh_id),
            ("trip_id", &map.trip_id),
            ("timestamp", &map.timestamp),
            ("speed", &map.speed),
        ];
        let missing: Vec<String> = required
            .iter()
            .filter(|(_, name)| header_index(headers, name).is_none())
            .map(|(key, name)| format!("{key} ({name:?})"))
            .collect();
        if !missing.is_empty() {
            return Err(Error::Schema { missing });
        }
        let idx = |name: &str| header_index(headers, name);
        Ok(DynamicColumns {
            veh_id: idx(&map.veh_id).unwrap(),
            trip_id: idx(&map.trip_id).unwrap(),
            timestamp: idx(&map.timestamp).unwrap(),
            speed: idx(&map.speed).unwrap(),
            day_num: idx(&map.day_num),
            optional: [
                (idx(&map.lat), "lat"),
                (idx(&map.lon), "lon"),
                (idx(&map.engine_rpm), "engine_rpm"),
                (idx(&map.maf), "maf"),
                (idx(&map.fuel_rate), "fuel_rate"),
                (idx(&map.abs_load), "abs_load"),
                (idx(&map.stft_b1), "stft_b1"),
                (idx(&map.stft_b2), "stft_b2"),
                (idx(&map.ltft_b1), "ltft_b1"),
                (idx(&map.ltft_b2), "ltft_b2"),
                (idx(&map.oat), "oat"),
                (idx(&map.hv_current), "hv_current"),
                (idx(&map.hv_voltage), "hv_voltage"),
            ],
        })
    }
}

enum RowError {
    Unparseable(&'static str, String),
    MissingId(&'static str),
    OutOfRange(&'static str, f64),
}

fn optional_cell(
    record: &csv::StringRecord,
    idx: Option<usize>,
    name: &'static str,
) -> std::result::Result<Option<f64>, RowError> {
    let Some(cell) = idx.and_then(|i| record.get(i)).map(str::trim) else {
        return Ok(None);
    };
    if is_missing(cell) {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        Ok(v) if v.is_nan() => Ok(None),
        _ => Err(RowError::Unparseable(name, cell.to_string())),
    }
}

fn parse_row(
    record: &csv::StringRecord,
    cols: &DynamicColumns,
) -> std::result::Result<(TripKey, SamplePoint), RowError> {
    let id = |i: usize, name: &'static str| -> std::result::Result<String, RowError> {
        let cell = record.get(i).map(str::trim).unwrap_or("");
        if cell.is_empty() {
            return Err(RowError::MissingId(name));
        }
        // VED writes ids as plain integers but some exports carry "8.0"
        match cell.parse::<f64>() {
            Ok(v) if v.fract() == 0.0 && v >= 0.0 && !cell.contains(['e', 'E']) => {
                Ok(format!("{}", v as u64))
            }
            _ => Ok(cell.to_string()),
        }
    };
    let veh_id = id(cols.veh_id, "veh_id")?;
    let trip_id = id(cols.trip_id, "trip_id")?;
    let timestamp = optional_cell(record, Some(cols.timestamp), "timestamp")?
        .ok_or(RowError::MissingId("timestamp"))?;
    if timestamp < 0.0 {
        return Err(RowError::OutOfRange("timestamp", timestamp));
    }
    let day_num = optional_cell(record, cols.day_num, "day_num")?.unwrap_or(0.0);
    let speed = optional_cell(record, Some(cols.speed), "speed")?;

    let mut values = [None; 13];
    for (slot, (idx, name)) in values.iter_mut().zip(cols.optional.iter()) {
        *slot = optional_cell(record, *idx, name)?;
    }
    let [lat, lon, engine_rpm, maf, fuel_rate, abs_load, stft_b1, stft_b2, ltft_b1, ltft_b2, oat, hv_current, hv_voltage] =
        values;
    let point = SamplePoint {
        day_num,
        timestamp_ms: timestamp.round() as i64,
        lat,
        lon,
        speed,
        engine_rpm,
        maf,
        fuel_rate,
        abs_load,
        stft_b1,
        stft_b2,
        ltft_b1,
        ltft_b2,
        oat,
        hv_current,
        hv_voltage,
    };
    if let Some(v) = speed.filter(|v| *v < 0.0) {
        return Err(RowError::OutOfRange("speed", v));
    }
    if let Some(v) = lat.filter(|v| !(-90.0..=90.0).contains(v)) {
        return Err(RowError::OutOfRange("lat", v));
    }
    if let Some(v) = lon.filter(|v| !(-180.0..=180.0).contains(v)) {
        return Err(RowError::OutOfRange("lon", v));
    }
    Ok((TripKey::new(veh_id, trip_id), point))
}

/// Parses one dynamic CSV stream. Unknown columns are ignored; rows with
/// unparseable numbers are skipped and counted rather than failing the file.
pub fn parse_dynamic<R: Read>(input: R, map: &ColumnMap) -> Result<DynamicParse> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let cols = DynamicColumns::resolve(&headers, map)?;

    let mut out = DynamicParse::default();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                // a broken record (e.g. bad UTF-8) costs one row, not the file
                out.skips.rows_read += 1;
                let line = e.position().map_or(0, |p| p.line());
                out.skips
                    .skip(line, "malformed_record".into(), e.to_string());
                continue;
            }
        }
        out.skips.rows_read += 1;
        let line = record.position().map_or(0, |p| p.line());
        match parse_row(&record, &cols) {
            Ok((key, point)) => out.groups.entry(key).or_default().push(point),
            Err(RowError::Unparseable(col, cell)) => {
                out.skips.skip(line, format!("unparseable_{col}"), cell)
            }
            Err(RowError::MissingId(col)) => {
                out.skips
                    .skip(line, format!("missing_{col}"), String::new())
            }
            Err(RowError::OutOfRange(col, v)) => {
                out.skips
                    .skip(line, format!("out_of_range_{col}"), v.to_string())
            }
        }
    }
    Ok(out)
}

/// Parses several dynamic files concurrently and merges them in path order.
pub fn parse_dynamic_files(paths: &[PathBuf], map: &ColumnMap) -> Result<DynamicParse> {
    let parsed: Vec<Result<DynamicParse>> = paths
        .par_iter()
        .map(|p| {
            let file = std::fs::File::open(p).map_err(|e| Error::io(p, e))?;
            parse_dynamic(std::io::BufReader::new(file), map)
        })
        .collect();
    let mut all = DynamicParse::default();
    for p in parsed {
        all.merge(p?);
    }
    Ok(all)
}

#[derive(Debug, Clone, Default)]
pub struct StaticParse {
    pub vehicles: BTreeMap<String, VehicleMeta>,
    /// (line, reason) for rows that were rejected
    pub rejected: Vec<(u64, String)>,
}

fn text_cell(record: &csv::StringRecord, idx: Option<usize>) -> Option<String> {
    let cell = idx.and_then(|i| record.get(i))?.trim();
    (!is_missing(cell)).then(|| cell.to_string())
}

/// Extracts liters from text such as `"2.0L"` or `"I4 2.0L"`.
pub fn parse_displacement(text: &str) -> Option<f64> {
    text.split_whitespace().find_map(|tok| {
        let tok = tok.trim_end_matches(['l', 'L']);
        let v: f64 = tok.parse().ok()?;
        (v.is_finite() && v > 0.0).then_some(v)
    })
}

fn parse_weight(text: &str) -> Option<f64> {
    let digits: String = text
        .chars()
        .filter(|c| c.is_ascii_digit() || *c == '.')
        .collect();
    digits.parse::<f64>().ok().filter(|v| *v > 0.0)
}

/// Parses the static vehicle table.
///
/// Accepts either separate `Engine Configuration` / `Displacement` columns or
/// the combined `Engine Configuration & Displacement` column of the published
/// spreadsheet. Rows with an unknown vehicle type are rejected and reported; a
/// repeated vehicle id is an error.
pub fn parse_static<R: Read>(input: R) -> Result<StaticParse> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let idx = |name: &str| header_index(&headers, name);
    let (Some(id_col), Some(type_col)) = (idx("VehId"), idx("Vehicle Type")) else {
        let missing = ["VehId", "Vehicle Type"]
            .into_iter()
            .filter(|n| idx(n).is_none())
            .map(String::from)
            .collect();
        return Err(Error::Schema { missing });
    };
    let class_col = idx("Vehicle Class");
    let combined_col = idx("Engine Configuration & Displacement");
    let config_col = idx("Engine Configuration");
    let disp_col = idx("Displacement");
    let trans_col = idx("Transmission");
    let drive_col = idx("Drive Wheels");
    let weight_col = idx("Generalized_Weight").or_else(|| idx("Weight"));

    let mut out = StaticParse::default();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let Some(veh_id) = text_cell(&record, Some(id_col)) else {
            out.rejected.push((line, "missing VehId".into()));
            continue;
        };
        let type_text = text_cell(&record, Some(type_col)).unwrap_or_default();
        let Some(vehicle_type) = VehicleType::from_static_label(&type_text) else {
            out.rejected
                .push((line, format!("unknown vehicle type {type_text:?}")));
            continue;
        };
        let (engine_config, displacement_l) = match (combined_col, config_col, disp_col) {
            (_, Some(_), _) | (_, _, Some(_)) => (
                text_cell(&record, config_col),
                text_cell(&record, disp_col)
                    .as_deref()
                    .and_then(parse_displacement),
            ),
            (Some(_), None, None) => {
                let text = text_cell(&record, combined_col);
                let config = text
                    .as_deref()
                    .and_then(|t| {
                        t.split_whitespace()
                            .find(|tok| parse_displacement(tok).is_none())
                    })
                    .map(String::from);
                (config, text.as_deref().and_then(parse_displacement))
            }
            (None, None, None) => (None, None),
        };
        let meta = VehicleMeta {
            veh_id: veh_id.clone(),
            vehicle_type,
            vehicle_class: text_cell(&record, class_col),
            engine_config,
            displacement_l,
            transmission: text_cell(&record, trans_col),
            drive_wheels: text_cell(&record, drive_col),
            weight_lb: text_cell(&record, weight_col)
                .as_deref()
                .and_then(parse_weight),
        };
        if out.vehicles.insert(veh_id.clone(), meta).is_some() {
            return Err(Error::DuplicateVehicle(veh_id));
        }
    }
    Ok(out)
}

/// Header of the canonical static table written next to `trips.csv`.
pub const STATIC_HEADER: [&str; 8] = [
    "VehId",
    "Vehicle Type",
    "Vehicle Class",
    "Engine Configuration",
    "Displacement",
    "Transmission",
    "Drive Wheels",
    "Generalized_Weight",
];

pub fn write_static<W: Write>(out: W, vehicles: &BTreeMap<String, VehicleMeta>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STATIC_HEADER)?;
    let mut metas: Vec<&VehicleMeta> = vehicles.values().collect();
    metas.sort_by(|a, b| id_cmp(&a.veh_id, &b.veh_id));
    let text = |v: &Option<String>| v.clone().unwrap_or_else(|| "NO DATA".into());
    for m in metas {
        w.write_record([
            m.veh_id.clone(),
            m.vehicle_type.static_label().to_string(),
            text(&m.vehicle_class),
            text(&m.engine_config),
            m.displacement_l
                .map_or_else(|| "NO DATA".into(), |d| format!("{d}L")),
            text(&m.transmission),
            text(&m.drive_wheels),
            m.weight_lb
                .map_or_else(|| "NO DATA".into(), |v| v.to_string()),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<static>", e))?;
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct Assembly {
    pub trips: Vec<TripSeries>,
    pub dropped_trips_without_meta: usize,
    pub vehicles_without_meta: BTreeSet<String>,
    pub duplicate_timestamps: usize,
}

/// Groups samples into trips, orders them by timestamp and attaches vehicle
/// metadata. The trip start is `epoch + day_num` of its first sample.
pub fn assemble_trips(
    groups: SampleGroups,
    vehicles: &BTreeMap<String, VehicleMeta>,
    epoch: NaiveDate,
) -> Assembly {
    let mut out = Assembly::default();
    let epoch = epoch.and_hms_opt(0, 0, 0).expect("midnight");
    for (key, mut samples) in groups {
        let Some(meta) = vehicles.get(&key.veh_id) else {
            out.dropped_trips_without_meta += 1;
            out.vehicles_without_meta.insert(key.veh_id);
            continue;
        };
        samples.sort_by_key(|s| s.timestamp_ms);
        let before = samples.len();
        samples.dedup_by_key(|s| s.timestamp_ms);
        out.duplicate_timestamps += before - samples.len();
        let Some(first) = samples.first() else {
            continue;
        };
        let start_datetime = day_num_to_datetime(epoch, first.day_num);
        out.trips.push(TripSeries {
            veh_id: key.veh_id,
            trip_id: key.trip_id,
            meta: meta.clone(),
            samples,
            start_datetime,
        });
    }
    out
}

pub fn day_num_to_datetime(epoch: NaiveDateTime, day_num: f64) -> NaiveDateTime {
    let ms = (day_num * 86_400_000.0).round() as i64;
    epoch + chrono::Duration::milliseconds(ms)
}

/// Writes trips in the canonical format; missing values become empty fields.
pub fn write_trips<W: Write>(out: W, trips: &[TripSeries]) -> Result<()> {
    write_dynamic(out, &ColumnMap::canonical(), trips)
}

/// Writes per-sample rows under the header names of `map`.
pub fn write_dynamic<W: Write>(out: W, map: &ColumnMap, trips: &[TripSeries]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(map.headers())?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for t in trips {
        for s in &t.samples {
            w.write_record([
                t.veh_id.clone(),
                t.trip_id.clone(),
                s.timestamp_ms.to_string(),
                s.day_num.to_string(),
                opt(s.lat),
                opt(s.lon),
                opt(s.speed),
                opt(s.engine_rpm),
                opt(s.maf),
                opt(s.fuel_rate),
                opt(s.abs_load),
                opt(s.stft_b1),
                opt(s.stft_b2),
                opt(s.ltft_b1),
                opt(s.ltft_b2),
                opt(s.oat),
                opt(s.hv_current),
                opt(s.hv_voltage),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<trips>", e))?;
    Ok(())
}

/// Reads a canonical `trips.csv` back into assembled trips.
pub fn read_trips<R: Read>(
    input: R,
    vehicles: &BTreeMap<String, VehicleMeta>,
    epoch: NaiveDate,
) -> Result<Vec<TripSeries>> {
    let parsed = parse_dynamic(input, &ColumnMap::canonical())?;
    if parsed.skips.rows_skipped > 0 {
        return Err(Error::InvalidInput(format!(
            "canonical trip file has {} malformed rows: {:?}",
            parsed.skips.rows_skipped, parsed.skips.examples
        )));
    }
    Ok(assemble_trips(parsed.groups, vehicles, epoch).trips)
}

pub fn read_trips_file(
    path: &Path,
    vehicles: &BTreeMap<String, VehicleMeta>,
    epoch: NaiveDate,
) -> Result<Vec<TripSeries>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_trips(std::io::BufReader::new(file), vehicles, epoch)
}

pub fn read_static_file(path: &Path) -> Result<StaticParse> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_static(std::io::BufReader::new(file))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub n_vehicles: usize,
    pub n_trips: usize,
    pub total_distance_km: f64,
    pub avg_trips_per_day: f64,
    pub avg_trip_duration_min: f64,
    pub trips_per_type: BTreeMap<VehicleType, usize>,
    pub vehicles_per_type: BTreeMap<VehicleType, usize>,
}

/// Definitional dataset statistics; distance comes from speed integration.
pub fn summarize(trips: &[TripSeries]) -> DatasetSummary {
    if trips.is_empty() {
        return DatasetSummary::default();
    }
    let mut summary = DatasetSummary {
        n_trips: trips.len(),
        ..Default::default()
    };
    let mut vehicles: BTreeMap<&str, VehicleType> = BTreeMap::new();
    let mut days = BTreeSet::new();
    let mut duration_s = 0.0;
    for t in trips {
        summary.total_distance_km += energy::trip_distance(t).unwrap_or(0.0);
        duration_s += t.duration_s();
        days.insert(t.start_datetime.date());
        vehicles.insert(&t.veh_id, t.meta.vehicle_type);
        *summary
            .trips_per_type
            .entry(t.meta.vehicle_type)
            .or_default() += 1;
    }
    summary.n_vehicles = vehicles.len();
    for vt in vehicles.values() {
        *summary.vehicles_per_type.entry(*vt).or_default() += 1;
    }
    summary.avg_trips_per_day = trips.len() as f64 / days.len() as f64;
    summary.avg_trip_duration_min = duration_s / 60.0 / trips.len() as f64;
    summary
}

/// Vehicle counts per type over the whole static table, including vehicles
/// that never appear in the dynamic logs.
pub fn fleet_counts(vehicles: &BTreeMap<String, VehicleMeta>) -> BTreeMap<VehicleType, usize> {
    let mut counts = BTreeMap::new();
    for m in vehicles.values() {
        *counts.entry(m.vehicle_type).or_default() += 1;
    }
    counts
}
