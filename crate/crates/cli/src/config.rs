//! Run configuration: built-in defaults, then a flat `key=value` file, then
//! command-line flags. The resolved values are written next to every output
//! so a stage can be re-run from the snapshot alone.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDate;
use effiq_core::baselines::DEFAULT_RIDGE;
use effiq_core::energy::{FcrConstants, LabelFilters};
use effiq_core::ensemble::{TrainConfig, DEFAULT_LR_GRID};
use effiq_core::features::{Energy, TaskId};
use effiq_core::synth::SynthConfig;
use effiq_core::ved::{default_epoch, ColumnMap};
use effiq_core::VehicleType;

pub const SNAPSHOT_FILE: &str = "run_config.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub train: TrainConfig,
    pub clusters: usize,
    pub kmeans_max_iter: usize,
    pub train_frac: f64,
    pub vehicle_type: Option<VehicleType>,
    pub energy: Option<Energy>,
    pub lr_grid: Vec<f64>,
    pub grid_epochs: usize,
    pub ridge: f64,
    pub epoch: NaiveDate,
    pub fcr: FcrConstants,
    pub filters: LabelFilters,
    pub synth: SynthConfig,
    /// header overrides keyed by channel, e.g. `column.speed`
    pub columns: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let seed = 42;
        RunConfig {
            seed,
            train: TrainConfig {
                seed,
                ..TrainConfig::default()
            },
            clusters: 8,
            kmeans_max_iter: 100,
            train_frac: 0.7,
            vehicle_type: None,
            energy: None,
            lr_grid: DEFAULT_LR_GRID.to_vec(),
            grid_epochs: 10,
            ridge: DEFAULT_RIDGE,
            epoch: default_epoch(),
            fcr: FcrConstants::default(),
            filters: LabelFilters::default(),
            synth: SynthConfig {
                seed,
                ..SynthConfig::default()
            },
            columns: BTreeMap::new(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| anyhow!("config key {key}: cannot parse {value:?}"))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn optional<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value.trim() {
        "" | "all" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

impl RunConfig {
    /// Sets one key. `seed` also reseeds training and synthesis.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "seed" => {
                self.seed = parse(key, v)?;
                self.train.seed = self.seed;
                self.synth.seed = self.seed;
            }
            "members" => self.train.members = parse(key, v)?,
            "epochs" => self.train.epochs = parse(key, v)?,
            "batch" => self.train.batch = parse(key, v)?,
            "lr" => self.train.lr = parse(key, v)?,
            "adv_eps" => self.train.adv_eps = parse(key, v)?,
            "hidden" => self.train.hidden = parse_list(key, v)?,
            "clusters" => self.clusters = parse(key, v)?,
            "kmeans_max_iter" => self.kmeans_max_iter = parse(key, v)?,
            "train_frac" => self.train_frac = parse(key, v)?,
            "vehicle_type" => self.vehicle_type = optional(key, v)?,
            "energy" => self.energy = optional(key, v)?,
            "lr_grid" => self.lr_grid = parse_list(key, v)?,
            "grid_epochs" => self.grid_epochs = parse(key, v)?,
            "ridge" => self.ridge = parse(key, v)?,
            "epoch_date" => {
                self.epoch = parse(key, v)?;
                self.synth.epoch = self.epoch;
            }
            "afr" => self.fcr.afr = parse(key, v)?,
            "rho_air" => self.fcr.rho_air = parse(key, v)?,
            "fuel_density" => self.fcr.fuel_density = parse(key, v)?,
            "min_fcr_coverage" => self.fcr.min_coverage = parse(key, v)?,
            "min_duration_s" => self.filters.min_duration_s = parse(key, v)?,
            "min_distance_km" => self.filters.min_distance_km = parse(key, v)?,
            "max_fuel_eff" => self.filters.max_fuel_eff = parse(key, v)?,
            "max_batt_eff" => self.filters.max_batt_eff = parse(key, v)?,
            "current_sign" => self.filters.current_sign = parse(key, v)?,
            "synth_fleet" => self.synth.vehicles = parse_fleet(v)?,
            "synth_days" => self.synth.days = parse(key, v)?,
            "synth_trips" => self.synth.total_trips = optional(key, v)?,
            "synth_trips_per_day" => self.synth.trips_per_day = parse(key, v)?,
            "synth_noise" => self.synth.noise_scale = parse(key, v)?,
            "synth_month_noise" => {
                let f: Vec<f64> = parse_list(key, v)?;
                self.synth.month_noise = f.try_into().map_err(|f: Vec<f64>| {
                    anyhow!("synth_month_noise needs 12 values, got {}", f.len())
                })?;
            }
            "synth_fuel_rate_frac" => self.synth.fuel_rate_frac = parse(key, v)?,
            "synth_maf_frac" => self.synth.maf_frac = parse(key, v)?,
            _ => match key.strip_prefix("column.") {
                Some(channel) => {
                    ColumnMap::default().with_overrides([(channel, v)])?;
                    self.columns.insert(channel.to_string(), v.to_string());
                }
                None => bail!("unknown config key {key:?}"),
            },
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key=value, got {line:?}", i + 1))?;
            self.set(k.trim(), v)
                .with_context(|| format!("line {}", i + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        self.apply_text(&text)
            .with_context(|| format!("config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.fcr.validate()?;
        self.synth.validate()?;
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            bail!("train_frac must lie in (0,1), got {}", self.train_frac);
        }
        if self.clusters == 0 {
            bail!("clusters must be positive");
        }
        if self.lr_grid.is_empty() || self.grid_epochs == 0 {
            bail!("lr_grid and grid_epochs must be non-empty");
        }
        if self.tasks().is_empty() {
            bail!(
                "no task matches vehicle_type={} energy={}",
                self.vehicle_type.map_or("all".into(), |v| v.to_string()),
                self.energy.map_or("all".into(), |e| e.to_string())
            );
        }
        Ok(())
    }

    /// Tasks selected by `vehicle_type` and `energy`.
    pub fn tasks(&self) -> Vec<TaskId> {
        TaskId::ALL
            .into_iter()
            .filter(|t| self.vehicle_type.is_none_or(|v| v == t.vehicle_type))
            .filter(|t| self.energy.is_none_or(|e| e == t.energy))
            .collect()
    }

    pub fn column_map(&self) -> Result<ColumnMap> {
        Ok(ColumnMap::default()
            .with_overrides(self.columns.iter().map(|(k, v)| (k.as_str(), v.as_str())))?)
    }

    /// Every key with its resolved value, in a fixed order.
    pub fn render(&self) -> String {
        let t = &self.train;
        let s = &self.synth;
        let opt = |o: Option<String>| o.unwrap_or_else(|| "all".into());
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("seed", self.seed.to_string());
        kv("members", t.members.to_string());
        kv("epochs", t.epochs.to_string());
        kv("batch", t.batch.to_string());
        kv("lr", t.lr.to_string());
        kv("adv_eps", t.adv_eps.to_string());
        kv("hidden", join(&t.hidden));
        kv("clusters", self.clusters.to_string());
        kv("kmeans_max_iter", self.kmeans_max_iter.to_string());
        kv("train_frac", self.train_frac.to_string());
        kv(
            "vehicle_type",
            opt(self.vehicle_type.map(|v| v.to_string())),
        );
        kv("energy", opt(self.energy.map(|e| e.to_string())));
        kv("lr_grid", join(&self.lr_grid));
        kv("grid_epochs", self.grid_epochs.to_string());
        kv("ridge", self.ridge.to_string());
        kv("epoch_date", self.epoch.to_string());
        kv("afr", self.fcr.afr.to_string());
        kv("rho_air", self.fcr.rho_air.to_string());
        kv("fuel_density", self.fcr.fuel_density.to_string());
        kv("min_fcr_coverage", self.fcr.min_coverage.to_string());
        kv("min_duration_s", self.filters.min_duration_s.to_string());
        kv("min_distance_km", self.filters.min_distance_km.to_string());
        kv("max_fuel_eff", self.filters.max_fuel_eff.to_string());
        kv("max_batt_eff", self.filters.max_batt_eff.to_string());
        kv("current_sign", self.filters.current_sign.to_string());
        kv("synth_fleet", render_fleet(&s.vehicles));
        kv("synth_days", s.days.to_string());
        kv(
            "synth_trips",
            s.total_trips
                .map_or_else(|| "all".into(), |n| n.to_string()),
        );
        kv("synth_trips_per_day", s.trips_per_day.to_string());
        kv("synth_noise", s.noise_scale.to_string());
        kv("synth_month_noise", join(&s.month_noise));
        kv("synth_fuel_rate_frac", s.fuel_rate_frac.to_string());
        kv("synth_maf_frac", s.maf_frac.to_string());
        for (k, v) in &self.columns {
            kv(&format!("column.{k}"), v.clone());
        }
        out
    }

    pub fn write_snapshot(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(SNAPSHOT_FILE);
        std::fs::write(&path, self.render()).with_context(|| format!("writing {}", path.display()))
    }
}

/// `ice:16,hev:1,ev:1`
fn parse_fleet(text: &str) -> Result<Vec<(VehicleType, usize)>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|part| {
            let (vt, n) = part
                .split_once(':')
                .ok_or_else(|| anyhow!("synth_fleet entry {part:?} is not type:count"))?;
            Ok((vt.trim().parse()?, parse("synth_fleet", n)?))
        })
        .collect()
}

fn render_fleet(fleet: &[(VehicleType, usize)]) -> String {
    fleet
        .iter()
        .map(|(vt, n)| format!("{}:{n}", vt.as_str().to_ascii_lowercase()))
        .collect::<Vec<_>>()
        .join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.apply_text(
            "seed=9\nlr=0.01\nsynth_fleet=ice:3,ev:1\nvehicle_type=HEV\ncolumn.speed=Speed\n",
        )
        .unwrap();
        assert_eq!(cfg.train.seed, 9);
        assert_eq!(cfg.synth.seed, 9);
        let mut back = RunConfig::default();
        back.apply_text(&cfg.render()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.tasks().len(), 2);
    }

    #[test]
    fn unknown_and_malformed_keys() {
        let mut cfg = RunConfig::default();
        assert!(cfg.apply_text("nonsense=1").is_err());
        assert!(cfg.apply_text("epochs=ten").is_err());
        assert!(cfg.apply_text("column.bogus=x").is_err());
        assert!(cfg.apply_text("just text").is_err());
    }

    #[test]
    fn impossible_task_selection() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("vehicle_type=EV\nenergy=fuel").unwrap();
        assert!(cfg.validate().is_err());
    }
}
