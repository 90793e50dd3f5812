//! Per-trip feature vectors, origin–destination clustering, the month
//! stratified split and feature standardization.
//!
//! The canonical feature order is cyclic time encodings, trip duration, five
//! speed statistics, mean outside temperature and a one-hot cluster block.
//! Raw hour/minute/month integers never enter the vector; the month is kept
//! as metadata for stratification and reporting.

mod kmeans;
mod speed;
mod split;
mod standardize;
mod time;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDateTime;

pub use kmeans::{
    assign_cluster, fit_kmeans, fit_od_clusters, od_vector, ClusterFit, ClusterModel, OdPoint,
};
pub use speed::{speed_features, speed_stats, SpeedStats};
pub use split::stratified_indices;
pub use standardize::Standardizer;
pub use time::{time_features, TimeFeatures};

use crate::energy::{format_iso, parse_iso, LabeledEnergy};
use crate::error::{Error, Result};
use crate::ved::{TripKey, TripSeries, VehicleType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Energy {
    Fuel,
    Battery,
}

impl Energy {
    pub fn as_str(self) -> &'static str {
        match self {
            Energy::Fuel => "FUEL",
            Energy::Battery => "BATTERY",
        }
    }

    /// Target unit for reporting.
    pub fn unit(self) -> &'static str {
        match self {
            Energy::Fuel => "km/L",
            Energy::Battery => "km/kWh",
        }
    }
}

impl fmt::Display for Energy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Energy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FUEL" => Ok(Energy::Fuel),
            "BATTERY" => Ok(Energy::Battery),
            _ => Err(Error::parse("energy type", s)),
        }
    }
}

/// One of the per-vehicle-type prediction tasks, e.g. HEV battery efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaskId {
    pub vehicle_type: VehicleType,
    pub energy: Energy,
}

impl TaskId {
    /// The six tasks with a physically meaningful label.
    pub const ALL: [TaskId; 6] = [
        TaskId::new(VehicleType::Ice, Energy::Fuel),
        TaskId::new(VehicleType::Phev, Energy::Fuel),
        TaskId::new(VehicleType::Hev, Energy::Fuel),
        TaskId::new(VehicleType::Phev, Energy::Battery),
        TaskId::new(VehicleType::Hev, Energy::Battery),
        TaskId::new(VehicleType::Ev, Energy::Battery),
    ];

    pub const fn new(vehicle_type: VehicleType, energy: Energy) -> Self {
        TaskId {
            vehicle_type,
            energy,
        }
    }

    /// Directory-safe key such as `ice_fuel`.
    pub fn key(&self) -> String {
        format!("{}_{}", self.vehicle_type.as_str(), self.energy.as_str()).to_ascii_lowercase()
    }

    pub fn parse_key(key: &str) -> Result<Self> {
        let (vt, e) = key
            .split_once('_')
            .ok_or_else(|| Error::parse("task key", key))?;
        Ok(TaskId::new(vt.parse()?, e.parse()?))
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.vehicle_type, self.energy)
    }
}

/// A trip's feature vector with its efficiency target.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTrip {
    pub key: TripKey,
    pub task: TaskId,
    pub start: NaiveDateTime,
    pub month: u32,
    pub target: f64,
    pub features: Vec<f64>,
}

/// Rows of one task sharing a feature order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub rows: Vec<LabeledTrip>,
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn features(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.features.clone()).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.target).collect()
    }

    pub fn months(&self) -> Vec<u32> {
        self.rows.iter().map(|r| r.month).collect()
    }

    pub fn subset(&self, idx: &[usize]) -> FeatureTable {
        FeatureTable {
            names: self.names.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Month-stratified train/test partition; see [`stratified_indices`].
    pub fn stratified_split(
        &self,
        train_frac: f64,
        seed: u64,
    ) -> Result<(FeatureTable, FeatureTable)> {
        let (tr, te) = stratified_indices(&self.months(), train_frac, seed)?;
        Ok((self.subset(&tr), self.subset(&te)))
    }
}

pub const BASE_FEATURES: [&str; 15] = [
    "hour_sin",
    "hour_cos",
    "minute_sin",
    "minute_cos",
    "dow_sin",
    "dow_cos",
    "month_sin",
    "month_cos",
    "duration_s",
    "speed_mean",
    "speed_std",
    "speed_min",
    "speed_max",
    "speed_median",
    "oat_mean",
];

pub fn feature_names(k: usize) -> Vec<String> {
    BASE_FEATURES
        .iter()
        .map(|s| s.to_string())
        .chain((0..k).map(|i| format!("cluster_{i}")))
        .collect()
}

fn mean_oat(trip: &TripSeries) -> Option<f64> {
    let vals: Vec<f64> = trip.samples.iter().filter_map(|s| s.oat).collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Feature vector of one trip, or `None` if it lacks speed or GPS data.
/// `oat_fill` replaces a missing temperature.
pub fn trip_features(
    trip: &TripSeries,
    clusters: &ClusterModel,
    oat_fill: f64,
) -> Option<Vec<f64>> {
    let t = time_features(&trip.start_datetime);
    let s = speed_features(trip)?;
    let cluster = assign_cluster(clusters, trip)?;
    let mut v = vec![
        t.hour_sin,
        t.hour_cos,
        t.minute_sin,
        t.minute_cos,
        t.dow_sin,
        t.dow_cos,
        t.month_sin,
        t.month_cos,
        s.duration_s,
        s.mean,
        s.std,
        s.min,
        s.max,
        s.median,
        mean_oat(trip).unwrap_or(oat_fill),
    ];
    v.extend((0..clusters.k()).map(|i| if i == cluster { 1.0 } else { 0.0 }));
    Some(v)
}

#[derive(Debug, Clone, Default)]
pub struct FeatureBuild {
    pub tables: BTreeMap<TaskId, FeatureTable>,
    /// Labeled trips with no matching telemetry or lacking speed/GPS.
    pub excluded: Vec<TripKey>,
    pub oat_fill: f64,
}

/// Joins efficiency labels to trips and builds one table per task.
/// Missing mean temperatures are filled with the mean over all trips that have
/// one.
pub fn build_feature_tables(
    trips: &[TripSeries],
    labels: &[LabeledEnergy],
    clusters: &ClusterModel,
) -> FeatureBuild {
    let by_key: HashMap<TripKey, &TripSeries> = trips.iter().map(|t| (t.key(), t)).collect();
    let oats: Vec<f64> = trips.iter().filter_map(mean_oat).collect();
    let oat_fill = if oats.is_empty() {
        0.0
    } else {
        oats.iter().sum::<f64>() / oats.len() as f64
    };
    let names = feature_names(clusters.k());
    let mut out = FeatureBuild {
        oat_fill,
        ..Default::default()
    };
    for label in labels.iter().filter(|l| l.is_accepted()) {
        let Some(features) = by_key
            .get(&label.key)
            .and_then(|trip| trip_features(trip, clusters, oat_fill))
        else {
            out.excluded.push(label.key.clone());
            continue;
        };
        let targets = [
            (Energy::Fuel, label.energy.fuel_eff_km_per_l),
            (Energy::Battery, label.energy.batt_eff_km_per_kwh),
        ];
        for (energy, target) in targets {
            let Some(target) = target else { continue };
            let task = TaskId::new(label.vehicle_type, energy);
            let table = out.tables.entry(task).or_insert_with(|| FeatureTable {
                names: names.clone(),
                rows: Vec::new(),
            });
            table.rows.push(LabeledTrip {
                key: label.key.clone(),
                task,
                start: label.start,
                month: label.month(),
                target,
                features: features.clone(),
            });
        }
    }
    out
}

pub const FEATURE_META_COLUMNS: [&str; 7] = [
    "veh_id",
    "trip_id",
    "vehicle_type",
    "task",
    "start_iso",
    "month",
    "target",
];

pub fn write_features<W: Write>(out: W, table: &FeatureTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<&str> = FEATURE_META_COLUMNS
        .iter()
        .copied()
        .chain(table.names.iter().map(String::as_str))
        .collect();
    w.write_record(&header)?;
    for r in &table.rows {
        let mut rec = vec![
            r.key.veh_id.clone(),
            r.key.trip_id.clone(),
            r.task.vehicle_type.to_string(),
            r.task.energy.to_string(),
            format_iso(&r.start),
            r.month.to_string(),
            r.target.to_string(),
        ];
        rec.extend(r.features.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<features>", e))?;
    Ok(())
}

pub fn read_features<R: Read>(input: R) -> Result<FeatureTable> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    let meta: Vec<&str> = headers.iter().take(FEATURE_META_COLUMNS.len()).collect();
    if meta != FEATURE_META_COLUMNS {
        return Err(Error::InvalidInput(format!(
            "feature file metadata columns {meta:?}"
        )));
    }
    let names: Vec<String> = headers
        .iter()
        .skip(FEATURE_META_COLUMNS.len())
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let r = rec?;
        let num = |i: usize| -> Result<f64> {
            let v: f64 = r[i]
                .parse()
                .map_err(|_| Error::parse(headers[i].to_string(), &r[i]))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::parse(headers[i].to_string(), &r[i]))
            }
        };
        let month: u32 = r[5].parse().map_err(|_| Error::parse("month", &r[5]))?;
        if !(1..=12).contains(&month) {
            return Err(Error::parse("month", &r[5]));
        }
        let features = (FEATURE_META_COLUMNS.len()..r.len())
            .map(num)
            .collect::<Result<Vec<_>>>()?;
        if features.len() != names.len() {
            return Err(Error::InvalidInput(format!(
                "row for {}/{} has {} features, header {}",
                &r[0],
                &r[1],
                features.len(),
                names.len()
            )));
        }
        rows.push(LabeledTrip {
            key: TripKey::new(&r[0], &r[1]),
            task: TaskId::new(r[2].parse()?, r[3].parse()?),
            start: parse_iso(&r[4])?,
            month,
            target: num(6)?,
            features,
        });
    }
    Ok(FeatureTable { names, rows })
}
