//! Per-trip distance, fuel and battery energy, and efficiency labels.
//!
//! Fuel consumption rate per sample follows a three-branch priority: a direct
//! fuel-rate reading, else mass air flow, else air flow reconstructed from
//! absolute load, engine speed and displacement. Air-flow branches produce a
//! fuel mass flow which is converted to L/h through the fuel density so every
//! branch shares one unit. Rates are integrated with the trapezoidal rule.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::{Datelike, NaiveDateTime};

use crate::error::{Error, Result};
use crate::ved::{SamplePoint, TripKey, TripSeries, VehicleMeta, VehicleType};

pub const ISO_FORMAT: &str = "%Y-%m-%dT%H:%M:%S%.3f";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FcrConstants {
    /// Air-fuel ratio (g air per g fuel).
    pub afr: f64,
    /// Air density, g/L.
    pub rho_air: f64,
    /// Fuel density, g/L.
    pub fuel_density: f64,
    /// Minimum fraction of samples with a rate for a trip fuel total.
    pub min_coverage: f64,
}

impl Default for FcrConstants {
    fn default() -> Self {
        FcrConstants {
            afr: 14.7,
            rho_air: 1.225,
            fuel_density: 745.0,
            min_coverage: 0.5,
        }
    }
}

impl FcrConstants {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.afr, self.rho_air, self.fuel_density]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
            && (0.0..=1.0).contains(&self.min_coverage);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "invalid fuel constants {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FcrSource {
    FuelRate,
    Maf,
    AbsLoad,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FcrValue {
    /// Fuel consumption rate, L/h.
    pub lph: f64,
    pub source: FcrSource,
    /// The computed rate was negative and has been clamped to zero.
    pub clamped: bool,
}

/// Intake air flow (g/s) implied by absolute load.
pub fn maf_from_load(abs_load_pct: f64, rho_air: f64, displacement_l: f64, rpm: f64) -> f64 {
    abs_load_pct / 100.0 * rho_air * displacement_l * rpm / 120.0
}

/// Fuel consumption rate for one sample, or `None` when no branch applies.
pub fn fcr_at_sample(
    sample: &SamplePoint,
    meta: &VehicleMeta,
    k: &FcrConstants,
) -> Option<FcrValue> {
    if let Some(rate) = sample.fuel_rate {
        return Some(FcrValue {
            lph: rate,
            source: FcrSource::FuelRate,
            clamped: false,
        });
    }
    let correction =
        (1.0 + sample.stft_b1.unwrap_or(0.0) / 100.0 + sample.ltft_b1.unwrap_or(0.0) / 100.0)
            / k.afr;
    let (maf, source) = match (
        sample.maf,
        sample.abs_load,
        sample.engine_rpm,
        meta.displacement_l,
    ) {
        (Some(maf), ..) => (maf, FcrSource::Maf),
        (None, Some(load), Some(rpm), Some(disp)) => (
            maf_from_load(load, k.rho_air, disp, rpm),
            FcrSource::AbsLoad,
        ),
        _ => return None,
    };
    let grams_per_s = maf * correction;
    let lph = grams_per_s * 3600.0 / k.fuel_density;
    Some(if lph < 0.0 {
        FcrValue {
            lph: 0.0,
            source,
            clamped: true,
        }
    } else {
        FcrValue {
            lph,
            source,
            clamped: false,
        }
    })
}

/// Trapezoidal integral of `(time_s, value)` pairs; `None` below two points.
fn trapezoid(points: impl Iterator<Item = (f64, f64)>) -> Option<f64> {
    let mut prev: Option<(f64, f64)> = None;
    let mut total = 0.0;
    let mut n = 0usize;
    for (t, v) in points {
        if let Some((t0, v0)) = prev {
            total += 0.5 * (v0 + v) * (t - t0);
        }
        prev = Some((t, v));
        n += 1;
    }
    (n >= 2).then_some(total)
}

fn seconds(s: &SamplePoint) -> f64 {
    s.timestamp_ms as f64 / 1000.0
}

/// Distance in km from the speed channel.
pub fn trip_distance(trip: &TripSeries) -> Option<f64> {
    trapezoid(
        trip.samples
            .iter()
            .filter_map(|s| Some((seconds(s), s.speed?))),
    )
    .map(|v| v / 3600.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FuelIntegral {
    pub liters: Option<f64>,
    /// Fraction of samples for which a rate was available.
    pub coverage: f64,
    pub clamped_samples: usize,
    /// Samples served by the fuel-rate, MAF and load branches.
    pub by_source: [usize; 3],
}

/// Integrates per-sample fuel rates, recording branch usage and coverage.
pub fn fuel_integral(trip: &TripSeries, meta: &VehicleMeta, k: &FcrConstants) -> FuelIntegral {
    let mut out = FuelIntegral::default();
    let mut points = Vec::with_capacity(trip.samples.len());
    for s in &trip.samples {
        if let Some(v) = fcr_at_sample(s, meta, k) {
            out.by_source[v.source as usize] += 1;
            out.clamped_samples += usize::from(v.clamped);
            points.push((seconds(s), v.lph));
        }
    }
    if trip.samples.is_empty() {
        return out;
    }
    out.coverage = points.len() as f64 / trip.samples.len() as f64;
    if out.coverage >= k.min_coverage {
        out.liters = trapezoid(points.into_iter()).map(|lph_s| lph_s / 3600.0);
    }
    out
}

/// Liters of fuel consumed over the trip.
pub fn trip_fuel(trip: &TripSeries, meta: &VehicleMeta, k: &FcrConstants) -> Option<f64> {
    fuel_integral(trip, meta, k).liters
}

/// Net battery energy discharged in kWh; discharge is positive current.
/// Regeneration-dominated trips (net negative) yield `None`.
pub fn trip_battery(trip: &TripSeries) -> Option<f64> {
    trip_battery_signed(trip, 1.0)
}

/// As [`trip_battery`], with `current_sign = -1.0` for logs that record
/// discharge as negative current.
pub fn trip_battery_signed(trip: &TripSeries, current_sign: f64) -> Option<f64> {
    let joules = trapezoid(
        trip.samples
            .iter()
            .filter_map(|s| Some((seconds(s), current_sign * s.hv_current? * s.hv_voltage?))),
    )?;
    let kwh = joules / 3.6e6;
    (kwh >= 0.0).then_some(kwh)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelFilters {
    pub min_duration_s: f64,
    pub min_distance_km: f64,
    pub max_fuel_eff: f64,
    pub max_batt_eff: f64,
    /// +1 when the log records discharge as positive current.
    pub current_sign: f64,
}

impl Default for LabelFilters {
    fn default() -> Self {
        LabelFilters {
            min_duration_s: 60.0,
            min_distance_km: 0.5,
            max_fuel_eff: 50.0,
            max_batt_eff: 20.0,
            current_sign: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RejectReason {
    NoDistance,
    ShortDuration,
    ShortDistance,
    NoFuel,
    NoBattery,
    FuelEffOutOfRange,
    BattEffOutOfRange,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::NoDistance => "no_distance",
            RejectReason::ShortDuration => "short_duration",
            RejectReason::ShortDistance => "short_distance",
            RejectReason::NoFuel => "no_fuel",
            RejectReason::NoBattery => "no_battery",
            RejectReason::FuelEffOutOfRange => "fuel_eff_out_of_range",
            RejectReason::BattEffOutOfRange => "batt_eff_out_of_range",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RejectReason {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            RejectReason::NoDistance,
            RejectReason::ShortDuration,
            RejectReason::ShortDistance,
            RejectReason::NoFuel,
            RejectReason::NoBattery,
            RejectReason::FuelEffOutOfRange,
            RejectReason::BattEffOutOfRange,
        ]
        .into_iter()
        .find(|r| r.as_str() == s)
        .ok_or_else(|| Error::parse("reject reason", s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TripEnergy {
    pub distance_km: f64,
    pub duration_s: f64,
    pub fuel_l: Option<f64>,
    pub battery_kwh: Option<f64>,
    pub fuel_eff_km_per_l: Option<f64>,
    pub batt_eff_km_per_kwh: Option<f64>,
}

/// Labeling outcome for one trip. A trip is usable when at least one
/// efficiency label survived; `reasons` lists every dropped label or failed
/// filter.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEnergy {
    pub key: TripKey,
    pub vehicle_type: VehicleType,
    pub start: NaiveDateTime,
    pub energy: TripEnergy,
    pub reasons: Vec<RejectReason>,
}

impl LabeledEnergy {
    pub fn month(&self) -> u32 {
        self.start.month()
    }

    pub fn is_accepted(&self) -> bool {
        self.energy.fuel_eff_km_per_l.is_some() || self.energy.batt_eff_km_per_kwh.is_some()
    }
}

/// Measures the trip and derives its efficiency labels. ICE trips get a fuel
/// label only, EV a battery label only, hybrids whichever is available.
pub fn label_trip(trip: &TripSeries, k: &FcrConstants, filters: &LabelFilters) -> LabeledEnergy {
    let vt = trip.meta.vehicle_type;
    let mut energy = TripEnergy {
        duration_s: trip.duration_s(),
        ..Default::default()
    };
    let mut reasons = Vec::new();
    let distance = trip_distance(trip);
    energy.distance_km = distance.unwrap_or(0.0);
    if vt.has_fuel() {
        energy.fuel_l = trip_fuel(trip, &trip.meta, k);
    }
    if vt.has_battery() {
        energy.battery_kwh = trip_battery_signed(trip, filters.current_sign);
    }

    let mut usable = true;
    if distance.is_none() {
        reasons.push(RejectReason::NoDistance);
        usable = false;
    }
    if energy.duration_s < filters.min_duration_s || energy.duration_s <= 0.0 {
        reasons.push(RejectReason::ShortDuration);
        usable = false;
    }
    if distance.is_some() && energy.distance_km < filters.min_distance_km {
        reasons.push(RejectReason::ShortDistance);
        usable = false;
    }

    if vt.has_fuel() {
        match energy.fuel_l.filter(|l| *l > 0.0) {
            None => reasons.push(RejectReason::NoFuel),
            Some(liters) if usable => {
                let eff = energy.distance_km / liters;
                if eff.is_finite() && eff <= filters.max_fuel_eff {
                    energy.fuel_eff_km_per_l = Some(eff);
                } else {
                    reasons.push(RejectReason::FuelEffOutOfRange);
                }
            }
            Some(_) => {}
        }
    }
    if vt.has_battery() {
        match energy.battery_kwh.filter(|e| *e > 0.0) {
            None => reasons.push(RejectReason::NoBattery),
            Some(kwh) if usable => {
                let eff = energy.distance_km / kwh;
                if eff.is_finite() && eff <= filters.max_batt_eff {
                    energy.batt_eff_km_per_kwh = Some(eff);
                } else {
                    reasons.push(RejectReason::BattEffOutOfRange);
                }
            }
            Some(_) => {}
        }
    }
    reasons.sort();
    LabeledEnergy {
        key: trip.key(),
        vehicle_type: vt,
        start: trip.start_datetime,
        energy,
        reasons,
    }
}

pub const LABELED_HEADER: [&str; 12] = [
    "veh_id",
    "trip_id",
    "vehicle_type",
    "start_iso",
    "month",
    "distance_km",
    "duration_s",
    "fuel_l",
    "battery_kwh",
    "fuel_eff",
    "batt_eff",
    "reject_reason",
];

pub fn format_iso(dt: &NaiveDateTime) -> String {
    dt.format(ISO_FORMAT).to_string()
}

pub fn parse_iso(text: &str) -> Result<NaiveDateTime> {
    NaiveDateTime::parse_from_str(text, ISO_FORMAT)
        .or_else(|_| NaiveDateTime::parse_from_str(text, "%Y-%m-%dT%H:%M:%S"))
        .map_err(|_| Error::parse("timestamp", text))
}

pub fn write_labeled<W: Write>(out: W, labels: &[LabeledEnergy]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LABELED_HEADER)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for l in labels {
        let reasons: Vec<&str> = l.reasons.iter().map(|r| r.as_str()).collect();
        w.write_record([
            l.key.veh_id.clone(),
            l.key.trip_id.clone(),
            l.vehicle_type.to_string(),
            format_iso(&l.start),
            l.month().to_string(),
            l.energy.distance_km.to_string(),
            l.energy.duration_s.to_string(),
            opt(l.energy.fuel_l),
            opt(l.energy.battery_kwh),
            opt(l.energy.fuel_eff_km_per_l),
            opt(l.energy.batt_eff_km_per_kwh),
            reasons.join(";"),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<labeled>", e))?;
    Ok(())
}

pub fn read_labeled<R: Read>(input: R) -> Result<Vec<LabeledEnergy>> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.iter().ne(LABELED_HEADER.iter().copied()) {
        return Err(Error::InvalidInput(format!(
            "labeled file header mismatch: {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let num = |text: &str, what: &str| -> Result<f64> {
        text.parse().map_err(|_| Error::parse(what, text))
    };
    let opt = |text: &str, what: &str| -> Result<Option<f64>> {
        if text.is_empty() {
            Ok(None)
        } else {
            num(text, what).map(Some)
        }
    };
    let mut out = Vec::new();
    for rec in reader.records() {
        let r = rec?;
        let reasons = r[11]
            .split(';')
            .filter(|s| !s.is_empty())
            .map(RejectReason::from_str)
            .collect::<Result<Vec<_>>>()?;
        out.push(LabeledEnergy {
            key: TripKey::new(&r[0], &r[1]),
            vehicle_type: r[2].parse()?,
            start: parse_iso(&r[3])?,
            energy: TripEnergy {
                distance_km: num(&r[5], "distance_km")?,
                duration_s: num(&r[6], "duration_s")?,
                fuel_l: opt(&r[7], "fuel_l")?,
                battery_kwh: opt(&r[8], "battery_kwh")?,
                fuel_eff_km_per_l: opt(&r[9], "fuel_eff")?,
                batt_eff_km_per_kwh: opt(&r[10], "batt_eff")?,
            },
            reasons,
        });
    }
    Ok(out)
}
