//! The pipeline stages. Each stage reads the files of the stage before it
//! from a fixed location under the run directory and writes its own.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use effiq_core::baselines::{single_nn_table, LinearBaseline};
use effiq_core::energy::{label_trip, read_labeled, write_labeled, LabeledEnergy};
use effiq_core::ensemble::{
    grid_search_lr, read_preds, write_preds, EnsembleModel, PredictionRecord,
};
use effiq_core::features::{
    build_feature_tables, fit_od_clusters, od_vector, read_features, write_features, ClusterModel,
    FeatureTable, TaskId,
};
use effiq_core::stats::{
    evaluate_task, monthly_report, render_report_csv, z_for_level, EvalReport,
};
use effiq_core::synth::{generate, write_dataset};
use effiq_core::ved::{
    assemble_trips, fleet_counts, parse_dynamic_files, parse_static, read_static_file,
    read_trips_file, summarize, write_static, write_trips, DatasetSummary, SkipReport,
};
use effiq_core::{TripSeries, VehicleMeta, VehicleType};
use serde::Serialize;

use crate::config::RunConfig;
use crate::svg;

/// Name of the reference model in reports.
pub const ENN: &str = "ENN";
pub const NN: &str = "NN";
pub const LR: &str = "LR";

/// File locations under one run directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn raw(&self) -> PathBuf {
        self.root.join("raw")
    }

    pub fn ingest(&self) -> PathBuf {
        self.root.join("ingest")
    }

    pub fn label(&self) -> PathBuf {
        self.root.join("label")
    }

    pub fn features(&self) -> PathBuf {
        self.root.join("features")
    }

    pub fn split(&self, task: TaskId) -> PathBuf {
        self.root.join("split").join(task.key())
    }

    pub fn grid(&self) -> PathBuf {
        self.root.join("gridsearch")
    }

    pub fn models(&self, task: TaskId) -> PathBuf {
        self.root.join("models").join(task.key())
    }

    pub fn preds(&self, task: TaskId) -> PathBuf {
        self.root.join("preds").join(task.key())
    }

    pub fn eval(&self) -> PathBuf {
        self.root.join("eval")
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report")
    }
}

/// Fails with the stage that should have produced `path`.
fn require(path: &Path, producer: &str) -> Result<()> {
    if !path.exists() {
        bail!(
            "missing {}; it is produced by `effiq {producer}`",
            path.display()
        );
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn open(path: &Path, producer: &str) -> Result<std::io::BufReader<fs::File>> {
    require(path, producer)?;
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(std::io::BufReader::new(f))
}

fn stage_dir(cfg: &RunConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    cfg.write_snapshot(dir)
}

pub fn synth(cfg: &RunConfig, layout: &Layout) -> Result<()> {
    let data = generate(&cfg.synth)?;
    let dir = layout.raw();
    stage_dir(cfg, &dir)?;
    let files = write_dataset(&dir, &data, cfg.epoch)?;
    eprintln!(
        "synth: {} vehicles, {} trips in {} weekly files under {}",
        data.vehicles.len(),
        data.trips.len(),
        files.dynamic.len(),
        dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct IngestSummary {
    all: DatasetSummary,
    per_type: BTreeMap<VehicleType, DatasetSummary>,
    /// every vehicle in the static tables, whether or not it logged trips
    static_fleet: BTreeMap<VehicleType, usize>,
    static_vehicles: usize,
    static_rejected: Vec<String>,
    dynamic_files: usize,
    skips: SkipReport,
    dropped_trips_without_meta: usize,
    vehicles_without_meta: Vec<String>,
    duplicate_timestamps: usize,
}

fn is_static_file(name: &str) -> bool {
    name.to_ascii_lowercase().contains("static")
}

/// Reads every `*.csv` in `input`; files with "static" in the name are
/// vehicle tables, the rest are dynamic logs.
pub fn ingest(cfg: &RunConfig, layout: &Layout, input: Option<&Path>) -> Result<()> {
    let input = input.map_or_else(|| layout.raw(), Path::to_path_buf);
    if !input.is_dir() {
        bail!(
            "input directory {} does not exist; create it with `effiq synth` or pass --input",
            input.display()
        );
    }
    let mut dynamic = Vec::new();
    let mut statics = Vec::new();
    for entry in fs::read_dir(&input).with_context(|| format!("listing {}", input.display()))? {
        let path = entry?.path();
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        if !name.to_ascii_lowercase().ends_with(".csv") || name == effiq_core::synth::TRUTH_FILE {
            continue;
        }
        if is_static_file(&name) {
            statics.push(path);
        } else {
            dynamic.push(path);
        }
    }
    dynamic.sort();
    statics.sort();
    if statics.is_empty() || dynamic.is_empty() {
        bail!(
            "{} holds {} static and {} dynamic CSV files; both kinds are required",
            input.display(),
            statics.len(),
            dynamic.len()
        );
    }
    let mut vehicles: BTreeMap<String, VehicleMeta> = BTreeMap::new();
    let mut static_rejected = Vec::new();
    for path in &statics {
        let parsed = parse_static(open(path, "synth")?)
            .with_context(|| format!("static table {}", path.display()))?;
        for (id, meta) in parsed.vehicles {
            if vehicles.insert(id.clone(), meta).is_some() {
                bail!("vehicle {id} appears in more than one static table");
            }
        }
        static_rejected.extend(
            parsed
                .rejected
                .into_iter()
                .map(|(line, why)| format!("{}:{line}: {why}", path.display())),
        );
    }
    let parsed = parse_dynamic_files(&dynamic, &cfg.column_map()?)?;
    let skips = parsed.skips.clone();
    let assembly = assemble_trips(parsed.groups, &vehicles, cfg.epoch);

    let dir = layout.ingest();
    stage_dir(cfg, &dir)?;
    write_trips(create(&dir.join("trips.csv"))?, &assembly.trips)?;
    write_static(create(&dir.join("vehicles.csv"))?, &vehicles)?;
    let mut per_type = BTreeMap::new();
    for vt in VehicleType::ALL {
        let trips: Vec<TripSeries> = assembly
            .trips
            .iter()
            .filter(|t| t.meta.vehicle_type == vt)
            .cloned()
            .collect();
        if !trips.is_empty() {
            per_type.insert(vt, summarize(&trips));
        }
    }
    let summary = IngestSummary {
        all: summarize(&assembly.trips),
        per_type,
        static_fleet: fleet_counts(&vehicles),
        static_vehicles: vehicles.len(),
        static_rejected,
        dynamic_files: dynamic.len(),
        skips,
        dropped_trips_without_meta: assembly.dropped_trips_without_meta,
        vehicles_without_meta: assembly.vehicles_without_meta.into_iter().collect(),
        duplicate_timestamps: assembly.duplicate_timestamps,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    eprintln!(
        "ingest: {} trips, {:.0} km, {} rows skipped",
        summary.all.n_trips, summary.all.total_distance_km, summary.skips.rows_skipped
    );
    Ok(())
}

fn load_trips(cfg: &RunConfig, layout: &Layout) -> Result<Vec<TripSeries>> {
    let dir = layout.ingest();
    let (trips, vehicles) = (dir.join("trips.csv"), dir.join("vehicles.csv"));
    require(&trips, "ingest")?;
    require(&vehicles, "ingest")?;
    let statics = read_static_file(&vehicles)?;
    Ok(read_trips_file(&trips, &statics.vehicles, cfg.epoch)?)
}

fn load_labels(layout: &Layout) -> Result<Vec<LabeledEnergy>> {
    Ok(read_labeled(open(
        &layout.label().join("labels.csv"),
        "label",
    )?)?)
}

#[derive(Serialize)]
struct LabelSummary {
    trips: usize,
    accepted: usize,
    reasons: BTreeMap<String, usize>,
    labels_per_task: BTreeMap<String, usize>,
}

pub fn label(cfg: &RunConfig, layout: &Layout) -> Result<()> {
    let trips = load_trips(cfg, layout)?;
    let labels: Vec<LabeledEnergy> = trips
        .iter()
        .map(|t| label_trip(t, &cfg.fcr, &cfg.filters))
        .collect();
    let dir = layout.label();
    stage_dir(cfg, &dir)?;
    write_labeled(create(&dir.join("labels.csv"))?, &labels)?;
    let mut summary = LabelSummary {
        trips: labels.len(),
        accepted: labels.iter().filter(|l| l.is_accepted()).count(),
        reasons: BTreeMap::new(),
        labels_per_task: BTreeMap::new(),
    };
    for l in &labels {
        for r in &l.reasons {
            *summary.reasons.entry(r.to_string()).or_default() += 1;
        }
        for task in TaskId::ALL
            .iter()
            .filter(|t| t.vehicle_type == l.vehicle_type)
        {
            let has = match task.energy {
                effiq_core::features::Energy::Fuel => l.energy.fuel_eff_km_per_l.is_some(),
                effiq_core::features::Energy::Battery => l.energy.batt_eff_km_per_kwh.is_some(),
            };
            if has {
                *summary.labels_per_task.entry(task.key()).or_default() += 1;
            }
        }
    }
    write_json(&dir.join("summary.json"), &summary)?;
    eprintln!(
        "label: {} of {} trips carry a label",
        summary.accepted, summary.trips
    );
    Ok(())
}

#[derive(Serialize)]
struct FeatureSummary {
    clusters: usize,
    kmeans_converged: bool,
    final_inertia: Option<f64>,
    oat_fill: f64,
    excluded_trips: usize,
    rows_per_task: BTreeMap<String, usize>,
}

pub fn featurize(cfg: &RunConfig, layout: &Layout) -> Result<()> {
    let trips = load_trips(cfg, layout)?;
    let labels = load_labels(layout)?;
    let fit = fit_od_clusters(&trips, cfg.clusters, cfg.seed, cfg.kmeans_max_iter)?;
    let build = build_feature_tables(&trips, &labels, &fit.model);
    let dir = layout.features();
    stage_dir(cfg, &dir)?;
    fit.model.write(create(&dir.join("clusters.txt"))?)?;
    let mut rows_per_task = BTreeMap::new();
    for task in cfg.tasks() {
        let Some(table) = build.tables.get(&task) else {
            eprintln!("featurize: no labeled trips for {task}");
            continue;
        };
        write_features(create(&dir.join(format!("{}.csv", task.key())))?, table)?;
        rows_per_task.insert(task.key(), table.len());
    }
    let summary = FeatureSummary {
        clusters: fit.model.k(),
        kmeans_converged: fit.converged,
        final_inertia: fit.inertia_history.last().copied(),
        oat_fill: build.oat_fill,
        excluded_trips: build.excluded.len(),
        rows_per_task,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    eprintln!(
        "featurize: {} tasks, {} trips excluded",
        summary.rows_per_task.len(),
        summary.excluded_trips
    );
    Ok(())
}

/// Selected tasks whose `file` exists under `dir(task)`; the first stage
/// output dir must exist at all.
fn available_tasks(
    cfg: &RunConfig,
    base: &Path,
    producer: &str,
    file: impl Fn(TaskId) -> PathBuf,
) -> Result<Vec<TaskId>> {
    require(base, producer)?;
    let tasks: Vec<TaskId> = cfg
        .tasks()
        .into_iter()
        .filter(|&t| file(t).exists())
        .collect();
    if tasks.is_empty() {
        bail!(
            "no selected task has output under {}; rerun `effiq {producer}`",
            base.display()
        );
    }
    for t in cfg.tasks().into_iter().filter(|t| !tasks.contains(t)) {
        eprintln!("skipping {t}: nothing under {}", base.display());
    }
    Ok(tasks)
}

fn read_table(path: &Path, producer: &str) -> Result<FeatureTable> {
    read_features(open(path, producer)?).with_context(|| format!("reading {}", path.display()))
}

pub fn split(cfg: &RunConfig, layout: &Layout) -> Result<()> {
    let feature_file = |t: TaskId| layout.features().join(format!("{}.csv", t.key()));
    for task in available_tasks(cfg, &layout.features(), "featurize", feature_file)? {
        let table = read_table(&feature_file(task), "featurize")?;
        let (train, test) = table.stratified_split(cfg.train_frac, cfg.seed)?;
        let dir = layout.split(task);
        stage_dir(cfg, &dir)?;
        write_features(create(&dir.join("train.csv"))?, &train)?;
        write_features(create(&dir.join("test.csv"))?, &test)?;
        eprintln!("split {task}: {} train, {} test", train.len(), test.len());
    }
    Ok(())
}

fn split_tasks(cfg: &RunConfig, layout: &Layout) -> Result<Vec<TaskId>> {
    available_tasks(cfg, &layout.root.join("split"), "split", |t| {
        layout.split(t).join("train.csv")
    })
}

pub fn gridsearch(cfg: &RunConfig, layout: &Layout) -> Result<()> {
    let dir = layout.grid();
    stage_dir(cfg, &dir)?;
    let mut all = BTreeMap::new();
    for task in split_tasks(cfg, layout)? {
        let train = read_table(&layout.split(task).join("train.csv"), "split")?;
        let result = grid_search_lr(&train, &cfg.train, &cfg.lr_grid, cfg.grid_epochs)
            .with_context(|| format!("grid search for {task}"))?;
        let mut text = String::new();
        for (lr, loss) in &result.losses {
            let shown = loss.map_or_else(|| "diverged".to_string(), |l| l.to_string());
            text.push_str(&format!("lr={lr} val_nll={shown}\n"));
        }
        text.push_str(&format!("best_lr={}\n", result.best_lr));
        fs::write(dir.join(format!("{}.txt", task.key())), &text)?;
        eprintln!("gridsearch {task}: best lr {}", result.best_lr);
        all.insert(task.key(), result.best_lr);
    }
    write_json(&dir.join("best_lr.json"), &all)
}

pub fn train(cfg: &RunConfig, layout: &Layout) -> Result<()> {
    for task in split_tasks(cfg, layout)? {
        let train = read_table(&layout.split(task).join("train.csv"), "split")?;
        let dir = layout.models(task);
        stage_dir(cfg, &dir)?;
        let (enn, enn_log) = EnsembleModel::fit_table(&train, &cfg.train)
            .with_context(|| format!("ensemble for {task}"))?;
        enn.save(&dir.join("enn"))?;
        let (nn, nn_log) = single_nn_table(&train, &cfg.train)
            .with_context(|| format!("single network for {task}"))?;
        nn.save(&dir.join("nn"))?;
        let lr = LinearBaseline::fit(&train, cfg.ridge)
            .with_context(|| format!("linear baseline for {task}"))?;
        fs::write(dir.join("lr.txt"), lr.render())?;
        let log = format!("[{ENN}]\n{}[{NN}]\n{}", enn_log.render(), nn_log.render());
        fs::write(dir.join("train_log.txt"), log)?;
        for (name, l) in [(ENN, &enn_log), (NN, &nn_log)] {
            if l.diverged() > 0 {
                eprintln!(
                    "train {task}: {} of {} {name} members diverged and were stopped at their last finite state",
                    l.diverged(),
                    l.members.len()
                );
            }
        }
        eprintln!(
            "train {task}: {} members on {} trips",
            enn.members.len(),
            train.len()
        );
    }
    Ok(())
}

fn load_models(
    layout: &Layout,
    task: TaskId,
) -> Result<(EnsembleModel, EnsembleModel, LinearBaseline)> {
    let dir = layout.models(task);
    require(&dir.join("enn"), "train")?;
    let enn = EnsembleModel::load(&dir.join("enn"))?;
    let nn = EnsembleModel::load(&dir.join("nn"))?;
    let lr_path = dir.join("lr.txt");
    require(&lr_path, "train")?;
    let lr = LinearBaseline::parse(&fs::read_to_string(&lr_path)?)?;
    Ok((enn, nn, lr))
}

pub fn predict(cfg: &RunConfig, layout: &Layout) -> Result<()> {
    let tasks = available_tasks(cfg, &layout.root.join("models"), "train", |t| {
        layout.models(t).join("enn")
    })?;
    for task in tasks {
        let test = read_table(&layout.split(task).join("test.csv"), "split")?;
        let (enn, nn, lr) = load_models(layout, task)?;
        let dir = layout.preds(task);
        stage_dir(cfg, &dir)?;
        let outputs = [
            (ENN, enn.predict(&test)?),
            (NN, nn.predict(&test)?),
            (LR, lr.predict(&test)?),
        ];
        for (name, records) in &outputs {
            write_preds(create(&dir.join(format!("{name}.csv")))?, records)?;
        }
        eprintln!("predict {task}: {} test trips", test.len());
    }
    Ok(())
}

fn pred_tasks(cfg: &RunConfig, layout: &Layout) -> Result<Vec<TaskId>> {
    available_tasks(cfg, &layout.root.join("preds"), "predict", |t| {
        layout.preds(t).join(format!("{ENN}.csv"))
    })
}

fn read_pred_file(path: &Path, producer: &str) -> Result<Vec<PredictionRecord>> {
    read_preds(open(path, producer)?).with_context(|| format!("reading {}", path.display()))
}

/// Scores every model per task; `external` files follow the prediction
/// schema and are named after their file stem.
pub fn evaluate(cfg: &RunConfig, layout: &Layout, external: &[PathBuf]) -> Result<()> {
    let mut extra: Vec<(String, BTreeMap<TaskId, Vec<PredictionRecord>>)> = Vec::new();
    for path in external {
        if !path.exists() {
            bail!("external predictions {} not found", path.display());
        }
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("external")
            .to_string();
        let mut by_task: BTreeMap<TaskId, Vec<PredictionRecord>> = BTreeMap::new();
        for r in read_pred_file(path, "evaluate --external")? {
            by_task.entry(r.task).or_default().push(r);
        }
        extra.push((name, by_task));
    }
    let mut reports = Vec::new();
    for task in pred_tasks(cfg, layout)? {
        let dir = layout.preds(task);
        let mut models = Vec::new();
        for name in [ENN, NN, LR] {
            models.push((
                name.to_string(),
                read_pred_file(&dir.join(format!("{name}.csv")), "predict")?,
            ));
        }
        for (name, by_task) in &extra {
            if let Some(recs) = by_task.get(&task) {
                models.push((name.clone(), recs.clone()));
            }
        }
        reports.push(evaluate_task(task, &models, ENN).with_context(|| format!("scoring {task}"))?);
    }
    let report = EvalReport::new(reports);
    let dir = layout.eval();
    stage_dir(cfg, &dir)?;
    write_json(&dir.join("report.json"), &report)?;
    fs::write(dir.join("report.csv"), render_report_csv(&report))?;
    for t in &report.tasks {
        let cells: Vec<String> = t
            .models
            .iter()
            .map(|m| format!("{} {:.3}", m.model, m.rmse))
            .collect();
        eprintln!("evaluate {}: rmse {}", t.task, cells.join(", "));
    }
    Ok(())
}

pub fn report(cfg: &RunConfig, layout: &Layout) -> Result<()> {
    let dir = layout.report();
    stage_dir(cfg, &dir)?;
    let z = z_for_level(0.95);
    let mut written = 0;
    for task in pred_tasks(cfg, layout)? {
        let preds = read_pred_file(&layout.preds(task).join(format!("{ENN}.csv")), "predict")?;
        let monthly = monthly_report(&preds)?;
        let title = format!(
            "{} {} efficiency, {ENN} test predictions",
            task.vehicle_type,
            task.energy.as_str().to_lowercase()
        );
        let chart = svg::month_band_chart(&title, task.energy.unit(), &monthly.months, z);
        fs::write(dir.join(format!("{}.svg", task.key())), chart)?;
        written += 1;
    }

    let trips = load_trips(cfg, layout)?;
    for vt in VehicleType::ALL {
        let minutes: Vec<f64> = trips
            .iter()
            .filter(|t| t.meta.vehicle_type == vt)
            .map(|t| t.duration_s() / 60.0)
            .collect();
        if minutes.is_empty() {
            continue;
        }
        let chart = svg::histogram(
            &format!("{vt} trip durations"),
            "duration (min)",
            &minutes,
            30,
        );
        fs::write(
            dir.join(format!("duration_{}.svg", vt.as_str().to_lowercase())),
            chart,
        )?;
    }

    let clusters_path = layout.features().join("clusters.txt");
    let clusters = ClusterModel::read(open(&clusters_path, "featurize")?)?;
    let points: Vec<(f64, f64, usize)> = trips
        .iter()
        .filter_map(od_vector)
        .map(|od| (od[1], od[0], clusters.assign(&od)))
        .collect();
    let centers: Vec<(f64, f64)> = clusters.centroids.iter().map(|c| (c[1], c[0])).collect();
    let chart = svg::scatter(
        "trip origins by origin-destination cluster",
        "longitude",
        "latitude",
        &points,
        &centers,
    );
    fs::write(dir.join("clusters.svg"), chart)?;
    eprintln!(
        "report: {written} task figures, duration histograms and cluster scatter in {}",
        dir.display()
    );
    Ok(())
}
