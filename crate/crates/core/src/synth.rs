//! Deterministic VED-format synthetic telemetry with planted efficiencies.
//!
//! Each trip gets a realized efficiency
//!
//! ```text
//! clean = base · (1 - speed_curv · ((v̄ - 60) / 50)²) · (1 - temp_coef · |oat - 21| / 10)
//! eff   = clean · (1 + noise_scale · month_factor(month) · ε),  ε ~ N(0, 1)
//! ```
//!
//! and its fuel and battery channels are scaled so that the trip integrals
//! reproduce `distance / eff` exactly. Fuel is planted through one of the
//! three estimator branches per trip (direct rate, MAF with trims, or
//! absolute load with RPM).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate, NaiveDateTime};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::energy::{FcrConstants, FcrSource};
use crate::error::{Error, Result};
use crate::ved::{
    day_num_to_datetime, default_epoch, write_dynamic, write_static, ColumnMap, SamplePoint,
    TripKey, TripSeries, VehicleMeta, VehicleType,
};

/// Reference point of the synthetic OD anchors.
const CENTER: (f64, f64) = (42.28, -83.74);
const N_ANCHORS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub vehicles: Vec<(VehicleType, usize)>,
    pub days: u32,
    /// trips per vehicle per day
    pub trips_per_day: f64,
    /// overrides `trips_per_day` when set
    pub total_trips: Option<usize>,
    pub seed: u64,
    pub epoch: NaiveDate,
    pub fuel_base: BTreeMap<VehicleType, f64>,
    pub batt_base: BTreeMap<VehicleType, f64>,
    pub speed_curv: f64,
    pub temp_coef: f64,
    /// relative noise at month factor 1
    pub noise_scale: f64,
    /// noise multiplier per calendar month, index 0 = January
    pub month_noise: [f64; 12],
    pub fuel_rate_frac: f64,
    pub maf_frac: f64,
    pub oat_missing_frac: f64,
    pub min_duration_s: u32,
    pub max_duration_s: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        use VehicleType::*;
        SynthConfig {
            vehicles: vec![(Ice, 6), (Hev, 3), (Phev, 2), (Ev, 2)],
            days: 365,
            trips_per_day: 0.4,
            total_trips: None,
            seed: 7,
            epoch: default_epoch(),
            fuel_base: [(Ice, 11.0), (Hev, 19.0), (Phev, 17.0)]
                .into_iter()
                .collect(),
            batt_base: [(Hev, 9.0), (Phev, 6.0), (Ev, 6.5)].into_iter().collect(),
            speed_curv: 0.35,
            temp_coef: 0.08,
            noise_scale: 0.05,
            month_noise: [2.5, 1.0, 1.0, 1.0, 1.0, 1.0, 1.6, 1.6, 1.0, 1.0, 2.5, 2.5],
            fuel_rate_frac: 0.4,
            maf_frac: 0.3,
            oat_missing_frac: 0.03,
            min_duration_s: 240,
            max_duration_s: 900,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("synth config: {m}")));
        if self.vehicles.iter().all(|(_, n)| *n == 0) {
            return bad("no vehicles");
        }
        if self.days == 0 || !(self.trips_per_day > 0.0) {
            return bad("days and trips_per_day must be positive");
        }
        if self.min_duration_s < 60 || self.max_duration_s < self.min_duration_s {
            return bad("trip duration range must start at 60 s or more");
        }
        let fracs = [self.fuel_rate_frac, self.maf_frac, self.oat_missing_frac];
        if fracs.iter().any(|f| !(0.0..=1.0).contains(f))
            || self.fuel_rate_frac + self.maf_frac > 1.0
        {
            return bad("fractions must lie in [0,1] and fuel_rate_frac + maf_frac <= 1");
        }
        if self.noise_scale < 0.0 || self.month_noise.iter().any(|f| *f < 0.0) {
            return bad("noise must be non-negative");
        }
        for (vt, _) in &self.vehicles {
            if vt.has_fuel() && !self.fuel_base.get(vt).is_some_and(|b| *b > 0.0) {
                return bad(&format!("missing positive fuel base for {vt}"));
            }
            if vt.has_battery() && !self.batt_base.get(vt).is_some_and(|b| *b > 0.0) {
                return bad(&format!("missing positive battery base for {vt}"));
            }
        }
        Ok(())
    }

    pub fn n_vehicles(&self) -> usize {
        self.vehicles.iter().map(|(_, n)| n).sum()
    }

    pub fn n_trips(&self) -> usize {
        self.total_trips.unwrap_or_else(|| {
            (self.trips_per_day * self.days as f64 * self.n_vehicles() as f64).round() as usize
        })
    }

    /// Planted relative noise sd for a calendar month.
    pub fn relative_noise(&self, month: u32) -> f64 {
        self.noise_scale * self.month_noise[month as usize - 1]
    }

    pub fn clean_efficiency(&self, base: f64, mean_speed: f64, oat: f64) -> f64 {
        let s = (mean_speed - 60.0) / 50.0;
        base * (1.0 - self.speed_curv * s * s) * (1.0 - self.temp_coef * (oat - 21.0).abs() / 10.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedValue {
    /// realized efficiency the telemetry integrates to
    pub value: f64,
    pub clean: f64,
    /// planted noise sd in target units
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthRecord {
    pub key: TripKey,
    pub vehicle_type: VehicleType,
    pub month: u32,
    pub fuel: Option<PlantedValue>,
    pub battery: Option<PlantedValue>,
    pub fuel_branch: Option<FcrSource>,
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub vehicles: BTreeMap<String, VehicleMeta>,
    pub trips: Vec<TripSeries>,
    pub truth: Vec<TruthRecord>,
}

fn trapezoid_s(values: &[f64]) -> f64 {
    // samples are one second apart
    values.windows(2).map(|w| (w[0] + w[1]) / 2.0).sum()
}

fn speed_profile(rng: &mut ChaCha8Rng, duration: usize) -> Vec<f64> {
    let cruise = rng.random_range(15.0..110.0);
    let jitter = Normal::new(0.0, 1.5).expect("valid sd");
    let mut v = 0.0f64;
    let mut out = Vec::with_capacity(duration + 1);
    for t in 0..=duration {
        let target = if duration - t < 25 { 0.0 } else { cruise };
        v = (v + 0.08 * (target - v) + jitter.sample(rng)).clamp(0.0, 130.0);
        if t == duration {
            v = 0.0;
        }
        out.push(v);
    }
    out[0] = 0.0;
    out
}

fn make_vehicles(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<VehicleMeta> {
    let mut out = Vec::new();
    let mut id = 1;
    for &(vt, n) in &cfg.vehicles {
        for _ in 0..n {
            let mut meta = VehicleMeta::new(id.to_string(), vt);
            if vt.has_fuel() {
                let disp = [1.5, 1.8, 2.0, 2.4, 2.5, 3.5][rng.random_range(0..6)];
                meta.engine_config = Some(format!("I4 {disp}L"));
                meta.displacement_l = Some(disp);
            }
            meta.vehicle_class = Some(["Car", "SUV"][rng.random_range(0..2)].to_string());
            meta.transmission = Some("CVT".into());
            meta.drive_wheels = Some("FWD".into());
            meta.weight_lb = Some([3000.0, 3500.0, 4000.0][rng.random_range(0..3)]);
            out.push(meta);
            id += 1;
        }
    }
    out
}

/// Builds vehicles, trips and ground truth from one seeded stream.
pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let k = FcrConstants::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let vehicles = make_vehicles(cfg, &mut rng);
    let anchors: Vec<(f64, f64)> = (0..N_ANCHORS)
        .map(|_| {
            (
                CENTER.0 + rng.random_range(-0.12..0.12),
                CENTER.1 + rng.random_range(-0.15..0.15),
            )
        })
        .collect();
    let epoch = cfg.epoch.and_hms_opt(0, 0, 0).expect("midnight");

    // (day, seconds after midnight, vehicle index) sorted chronologically
    let mut slots: Vec<(u32, u32, usize)> = (0..cfg.n_trips())
        .map(|_| {
            let day = rng.random_range(0..cfg.days);
            let hour: f64 = match rng.random_range(0..3) {
                0 => rng.random_range(7.0..9.5),
                1 => rng.random_range(16.0..18.5),
                _ => rng.random_range(6.0..22.0),
            };
            (
                day,
                (hour * 3600.0) as u32,
                rng.random_range(0..vehicles.len()),
            )
        })
        .collect();
    slots.sort_unstable();

    let mut trips = Vec::with_capacity(slots.len());
    let mut truth = Vec::with_capacity(slots.len());
    for (trip_no, (day, secs, vi)) in slots.into_iter().enumerate() {
        let meta = &vehicles[vi];
        let vt = meta.vehicle_type;
        let duration = rng.random_range(cfg.min_duration_s..=cfg.max_duration_s) as usize;
        let speeds = speed_profile(&mut rng, duration);
        let day0 = day as f64 + secs as f64 / 86_400.0;
        let start = day_num_to_datetime(epoch, day0);
        let month = start.month();
        let doy = start.ordinal() as f64;
        let seasonal = 9.5 - 13.5 * (2.0 * std::f64::consts::PI * (doy - 20.0) / 365.0).cos();
        let oat = seasonal + 3.0 * std_normal.sample(&mut rng);
        let oat_missing = rng.random_bool(cfg.oat_missing_frac);
        let mean_speed = speeds.iter().sum::<f64>() / speeds.len() as f64;
        let distance_km = trapezoid_s(&speeds) / 3600.0;

        let (o, d) = (
            anchors[rng.random_range(0..N_ANCHORS)],
            anchors[rng.random_range(0..N_ANCHORS)],
        );
        let blob = Normal::new(0.0, 0.003).expect("valid sd");
        let origin = (o.0 + blob.sample(&mut rng), o.1 + blob.sample(&mut rng));
        let dest = (d.0 + blob.sample(&mut rng), d.1 + blob.sample(&mut rng));

        let plant = |base: f64, rng: &mut ChaCha8Rng| {
            let clean = cfg.clean_efficiency(base, mean_speed, oat);
            let rel = cfg.relative_noise(month);
            let factor = (1.0 + rel * std_normal.sample(rng)).max(0.2);
            PlantedValue {
                value: clean * factor,
                clean,
                sigma: clean * rel,
            }
        };
        let fuel = vt.has_fuel().then(|| plant(cfg.fuel_base[&vt], &mut rng));
        let battery = vt
            .has_battery()
            .then(|| plant(cfg.batt_base[&vt], &mut rng));

        let n = speeds.len();
        let mut samples: Vec<SamplePoint> = (0..n)
            .map(|t| {
                let f = t as f64 / (n - 1) as f64;
                SamplePoint {
                    day_num: day0 + t as f64 / 86_400.0,
                    timestamp_ms: t as i64 * 1000,
                    lat: Some(origin.0 + f * (dest.0 - origin.0)),
                    lon: Some(origin.1 + f * (dest.1 - origin.1)),
                    speed: Some(speeds[t]),
                    oat: (!oat_missing).then_some(oat),
                    ..SamplePoint::default()
                }
            })
            .collect();

        let mut fuel_branch = None;
        if let Some(f) = fuel {
            let liters = distance_km / f.value;
            let shape: Vec<f64> = speeds.iter().map(|v| 0.6 + v / 25.0).collect();
            let scale = liters * 3600.0 / trapezoid_s(&shape);
            let u: f64 = rng.random();
            let branch = if u < cfg.fuel_rate_frac {
                FcrSource::FuelRate
            } else if u < cfg.fuel_rate_frac + cfg.maf_frac {
                FcrSource::Maf
            } else {
                FcrSource::AbsLoad
            };
            fuel_branch = Some(branch);
            let disp = meta
                .displacement_l
                .expect("fuel vehicles carry displacement");
            for (s, sh) in samples.iter_mut().zip(&shape) {
                let lph = scale * sh;
                let rpm = 750.0 + 28.0 * s.speed.unwrap_or(0.0);
                match branch {
                    FcrSource::FuelRate => s.fuel_rate = Some(lph),
                    FcrSource::Maf | FcrSource::AbsLoad => {
                        let stft = rng.random_range(-3.0..3.0);
                        let ltft = rng.random_range(-5.0..5.0);
                        let correction = (1.0 + stft / 100.0 + ltft / 100.0) / k.afr;
                        let maf = lph * k.fuel_density / 3600.0 / correction;
                        s.stft_b1 = Some(stft);
                        s.ltft_b1 = Some(ltft);
                        s.engine_rpm = Some(rpm);
                        if branch == FcrSource::Maf {
                            s.maf = Some(maf);
                        } else {
                            s.abs_load = Some(maf * 120.0 * 100.0 / (k.rho_air * disp * rpm));
                        }
                    }
                }
            }
        }
        if let Some(b) = battery {
            let kwh = distance_km / b.value;
            let mut shape: Vec<f64> = speeds
                .windows(2)
                .map(|w| {
                    if w[1] < w[0] - 1.0 {
                        -0.3
                    } else {
                        0.5 + w[1] / 40.0
                    }
                })
                .collect();
            shape.insert(0, 0.5);
            if trapezoid_s(&shape) <= 0.0 {
                shape.iter_mut().for_each(|v| *v = v.abs());
            }
            let scale = kwh * 3.6e6 / trapezoid_s(&shape);
            for (t, (s, sh)) in samples.iter_mut().zip(&shape).enumerate() {
                let volts = 355.0 + 5.0 * (t as f64 / 30.0).sin();
                s.hv_voltage = Some(volts);
                s.hv_current = Some(scale * sh / volts);
            }
        }

        let trip_id = (trip_no + 1).to_string();
        truth.push(TruthRecord {
            key: TripKey::new(meta.veh_id.clone(), trip_id.clone()),
            vehicle_type: vt,
            month,
            fuel,
            battery,
            fuel_branch,
        });
        trips.push(TripSeries {
            veh_id: meta.veh_id.clone(),
            trip_id,
            meta: meta.clone(),
            samples,
            start_datetime: start,
        });
    }
    Ok(SynthData {
        vehicles: vehicles
            .into_iter()
            .map(|m| (m.veh_id.clone(), m))
            .collect(),
        trips,
        truth,
    })
}

pub const TRUTH_HEADER: [&str; 4] = ["veh_id", "trip_id", "true_fuel_eff", "true_batt_eff"];
pub const STATIC_FILE: &str = "VED_Static_Data.csv";
pub const TRUTH_FILE: &str = "truth.csv";

pub fn write_truth<W: Write>(out: W, truth: &[TruthRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRUTH_HEADER)?;
    let opt = |v: Option<PlantedValue>| v.map(|p| p.value.to_string()).unwrap_or_default();
    for t in truth {
        w.write_record([
            t.key.veh_id.clone(),
            t.key.trip_id.clone(),
            opt(t.fuel),
            opt(t.battery),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<truth>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthFiles {
    pub dynamic: Vec<PathBuf>,
    pub static_table: PathBuf,
    pub truth: PathBuf,
}

fn week_file(epoch: NaiveDateTime, start: NaiveDateTime) -> String {
    let week = (start - epoch).num_days() / 7;
    let monday = epoch + chrono::Duration::days(week * 7);
    format!("VED_{}_week.csv", monday.format("%y%m%d"))
}

/// Writes weekly dynamic files with the published headers, the static
/// table and `truth.csv` into `dir`.
pub fn write_dataset(dir: &Path, data: &SynthData, epoch: NaiveDate) -> Result<SynthFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let epoch = epoch.and_hms_opt(0, 0, 0).expect("midnight");
    let mut weeks: BTreeMap<String, Vec<TripSeries>> = BTreeMap::new();
    for t in &data.trips {
        weeks
            .entry(week_file(epoch, t.start_datetime))
            .or_default()
            .push(t.clone());
    }
    let map = ColumnMap::default();
    let mut dynamic = Vec::with_capacity(weeks.len());
    for (name, trips) in &weeks {
        let path = dir.join(name);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_dynamic(std::io::BufWriter::new(file), &map, trips)?;
        dynamic.push(path);
    }
    let static_table = dir.join(STATIC_FILE);
    let file = fs::File::create(&static_table).map_err(|e| Error::io(&static_table, e))?;
    write_static(file, &data.vehicles)?;
    let truth = dir.join(TRUTH_FILE);
    let file = fs::File::create(&truth).map_err(|e| Error::io(&truth, e))?;
    write_truth(std::io::BufWriter::new(file), &data.truth)?;
    Ok(SynthFiles {
        dynamic,
        static_table,
        truth,
    })
}
