//! Pipeline stages. Each one reads artifacts from a run directory,
//! computes, and writes new artifacts; chaining them reproduces the whole
//! system from an empty directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use csiloc_core::csi::{preprocess, preprocess_database, Database, NormalizationContext};
use csiloc_core::metrics::{count_ambiguous, zero_ambiguity_fraction, AmbiguityConfig, ErrorReport};
use csiloc_core::quantifier::{predict_cnn_only, train_cnn, TrainedQuantifier};
use csiloc_core::sim::{build_database, default_schedule, SnapshotPlan};
use csiloc_core::tracker::{generate_trajectories, train_lstm, FeatureStore, Tracker};
use csiloc_core::{math, rng};
use rand::Rng;

use crate::config::RunConfig;
use crate::formats;
use crate::report::{self, ErrorRow};

/// Fixed artifact names inside one run directory. Every stage knows where
/// its inputs live, so commands compose without path plumbing.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub dir: PathBuf,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Self {
        Artifacts { dir: dir.to_path_buf() }
    }

    fn file(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn train_raw(&self) -> PathBuf {
        self.file("train_raw.csid")
    }
    pub fn val_raw(&self) -> PathBuf {
        self.file("val_raw.csid")
    }
    pub fn test_raw(&self) -> PathBuf {
        self.file("test_raw.csid")
    }
    pub fn context(&self) -> PathBuf {
        self.file("context.txt")
    }
    pub fn train(&self) -> PathBuf {
        self.file("train.csid")
    }
    pub fn val(&self) -> PathBuf {
        self.file("val.csid")
    }
    pub fn test(&self) -> PathBuf {
        self.file("test.csid")
    }
    pub fn quantifier(&self) -> PathBuf {
        self.file("quantifier.nnck")
    }
    pub fn cnn_curve(&self) -> PathBuf {
        self.file("cnn_curve.csv")
    }
    pub fn features(&self) -> PathBuf {
        self.file("features.feat")
    }
    pub fn train_trajectories(&self) -> PathBuf {
        self.file("train.traj")
    }
    pub fn val_trajectories(&self) -> PathBuf {
        self.file("val.traj")
    }
    pub fn tracker(&self) -> PathBuf {
        self.file("tracker.nnck")
    }
    pub fn lstm_curve(&self) -> PathBuf {
        self.file("lstm_curve.csv")
    }
    pub fn errors(&self, label: &str) -> PathBuf {
        self.file(&format!("errors_{}.csv", label.replace('-', "_")))
    }
    pub fn cdf(&self, label: &str) -> PathBuf {
        self.file(&format!("cdf_{}.csv", label.replace('-', "_")))
    }
    pub fn ambiguity(&self) -> PathBuf {
        self.file("ambiguity.csv")
    }
    pub fn summary(&self) -> PathBuf {
        self.file("summary.csv")
    }
    pub fn manifest(&self) -> PathBuf {
        self.file("manifest.txt")
    }
}

/// Simulate one site and write the raw survey, held-out, and test
/// databases.
pub fn synth(cfg: &RunConfig, arts: &Artifacts, force: bool) -> Result<()> {
    let site = cfg.site();
    let plan = cfg.sampling_plan();
    let world = build_database(
        &site,
        &plan,
        &SnapshotPlan::new(cfg.seed),
        &default_schedule(),
        &cfg.profile.device(),
        cfg.seed,
    )?;
    formats::write_database(&arts.train_raw(), &world.train, &[], force)?;
    formats::write_database(&arts.val_raw(), &world.val, &[], force)?;
    formats::write_database(&arts.test_raw(), &world.test, &world.routes, force)?;
    println!(
        "synth: {} reference points, {} train / {} held-out / {} test images, {} routes",
        world.train.rp_count(),
        world.train.records.len(),
        world.val.records.len(),
        world.test.records.len(),
        world.routes.len()
    );
    Ok(())
}

/// Fit the normalization context on the raw survey and preprocess every
/// database present in the run directory.
pub fn preprocess_stage(cfg: &RunConfig, arts: &Artifacts, force: bool) -> Result<()> {
    let (train_raw, _) = formats::read_database(&arts.train_raw())?;
    let source = arts
        .train_raw()
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ctx = NormalizationContext::fit(&train_raw, cfg.window, &source)?;
    formats::write_context(&arts.context(), &ctx, force)?;
    let train = preprocess_database(&train_raw, &ctx)?;
    formats::write_database(&arts.train(), &train, &[], force)?;
    let mut done = vec!["train"];
    if arts.val_raw().exists() {
        let (val_raw, _) = formats::read_database(&arts.val_raw())?;
        let val = preprocess_database(&val_raw, &ctx)?;
        formats::write_database(&arts.val(), &val, &[], force)?;
        done.push("val");
    }
    if arts.test_raw().exists() {
        let (test_raw, routes) = formats::read_database(&arts.test_raw())?;
        let test = preprocess_database(&test_raw, &ctx)?;
        formats::write_database(&arts.test(), &test, &routes, force)?;
        done.push("test");
    }
    println!(
        "preprocess: context over {} reference points, databases: {}",
        ctx.rp_averages.len(),
        done.join(", ")
    );
    Ok(())
}

/// Train the location quantifier on preprocessed databases and write the
/// checkpoint plus its training curve.
pub fn train_cnn_stage(cfg: &RunConfig, arts: &Artifacts, force: bool) -> Result<()> {
    let (train, _) = formats::read_database(&arts.train())?;
    let (val, _) = formats::read_database(&arts.val())?;
    let config = cfg.cnn_config();
    let (model, curve) = train_cnn(&train, &val, &config, cfg.seed)?;
    let context = formats::read_context(&arts.context())?;
    let q = TrainedQuantifier { model, context };
    formats::write_quantifier(&arts.quantifier(), &q, force)?;
    report::write_curve(&arts.cnn_curve(), &curve, force)?;
    let best = curve
        .iter()
        .map(|s| s.val_error)
        .fold(f64::INFINITY, f64::min);
    println!(
        "train-cnn: {} epochs, best held-out error {best:.3} m",
        curve.len()
    );
    Ok(())
}

/// Run every survey image through the trained quantifier and store the
/// resulting fingerprint features.
pub fn extract_features_stage(cfg: &RunConfig, arts: &Artifacts, force: bool) -> Result<()> {
    let (train, _) = formats::read_database(&arts.train())?;
    let q = formats::read_quantifier(&arts.quantifier())?;
    let store = FeatureStore::from_database(&train, &q.model, cfg.batch)?;
    formats::write_features(&arts.features(), &store, force)?;
    println!(
        "extract-features: {} rows of dimension {} over {} reference points",
        store.row_count(),
        store.dim(),
        store.rp_count()
    );
    Ok(())
}

/// Sample bounded random walks over the survey grid and split them into
/// training and validation sets.
pub fn gen_traj_stage(cfg: &RunConfig, arts: &Artifacts, force: bool) -> Result<()> {
    let store = formats::read_features(&arts.features())?;
    let tc = cfg.trajectory_config();
    // one generation covers both splits; per-walk seed streams keep the
    // split boundary from changing any walk
    let total = tc.train_count + tc.validation_count;
    let walks = generate_trajectories(&store, &tc, total, cfg.seed)?;
    formats::write_trajectories(&arts.train_trajectories(), &walks[..tc.train_count], force)?;
    formats::write_trajectories(&arts.val_trajectories(), &walks[tc.train_count..], force)?;
    println!(
        "gen-traj: {} train and {} validation walks of {} steps",
        tc.train_count, tc.validation_count, tc.memory_length
    );
    Ok(())
}

/// Train the trajectory tracker on generated walks and write the
/// checkpoint plus its training curve.
pub fn train_lstm_stage(cfg: &RunConfig, arts: &Artifacts, force: bool) -> Result<()> {
    let store = formats::read_features(&arts.features())?;
    let train = formats::read_trajectories(&arts.train_trajectories())?;
    let val = formats::read_trajectories(&arts.val_trajectories())?;
    let config = cfg.lstm_config(store.dim());
    let (model, curve) = train_lstm(&store, &train, &val, &config, cfg.seed)?;
    let memory = train.first().map(|t| t.steps.len()).unwrap_or(cfg.memory);
    formats::write_tracker(&arts.tracker(), &model, memory, force)?;
    report::write_curve(&arts.lstm_curve(), &curve, force)?;
    let best = curve
        .iter()
        .map(|s| s.val_error)
        .fold(f64::INFINITY, f64::min);
    println!(
        "train-lstm: {} epochs, best held-out error {best:.3} m",
        curve.len()
    );
    Ok(())
}

/// Replay the raw test routes through the full pipeline (or the
/// quantifier alone) and write per-point errors plus the distribution.
pub fn evaluate_stage(
    cfg: &RunConfig,
    arts: &Artifacts,
    cnn_only: bool,
    force: bool,
) -> Result<ErrorReport> {
    let (test, mut routes) = formats::read_database(&arts.test_raw())?;
    if test.records.is_empty() {
        bail!("test database holds no captures");
    }
    if routes.is_empty() {
        // a database without routes evaluates as one continuous sequence
        routes = vec![(0..test.records.len()).collect()];
    }
    let q = formats::read_quantifier(&arts.quantifier())?;
    let label = if cnn_only { "cnn-only" } else { "cnn-lstm" };
    let tracker_state = if cnn_only {
        None
    } else {
        let (model, memory) = formats::read_tracker(&arts.tracker())?;
        Some((model, memory))
    };

    let mut rows: Vec<ErrorRow> = Vec::new();
    for (route_idx, route) in routes.iter().enumerate() {
        let mut tracker = match &tracker_state {
            Some((model, memory)) => {
                Some(Tracker::new(&q.model, model, *memory, cfg.warmup)?)
            }
            None => None,
        };
        for &idx in route {
            let rec = test
                .records
                .get(idx)
                .ok_or_else(|| anyhow::anyhow!("route references record {idx}"))?;
            let image = preprocess(&rec.image, &q.context, None)?;
            let pred = match tracker.as_mut() {
                Some(t) => t.push(&image)?,
                None => predict_cnn_only(&q.model, &image)?,
            };
            let truth = rec.image.location;
            rows.push(ErrorRow {
                index: idx,
                route: route_idx,
                day: (rec.image.time / 86_400.0).floor().max(0.0) as usize,
                truth,
                pred,
                error: math::distance(truth, pred),
            });
        }
    }
    let errors: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let rep = ErrorReport::from_errors(&errors)?.with_label(label);
    report::write_errors(&arts.errors(label), &rows, force)?;
    report::write_cdf(&arts.cdf(label), &rep, force)?;
    println!("evaluate {}", report::summary_line(&rep));
    Ok(rep)
}

/// Stationary fingerprint windows at one reference point: each sample
/// concatenates `memory` feature rows drawn uniformly from the point's
/// snapshots, mirroring what the tracker sees when the user stands still.
pub fn concatenated_feature_groups(
    store: &FeatureStore,
    memory: usize,
    per_rp: usize,
    seed: u64,
) -> Result<Vec<Vec<Vec<f64>>>> {
    if memory == 0 {
        bail!("fingerprint windows need at least one step");
    }
    let mut groups = Vec::with_capacity(store.rp_count());
    for rp in 0..store.rp_count() as u32 {
        let rows = store.rows_of(rp);
        let samples = if per_rp == 0 {
            rows.len()
        } else {
            per_rp.min(rows.len())
        };
        let mut group = Vec::with_capacity(samples);
        for j in 0..samples {
            let mut r = rng::stream(seed, &[rng::role::AMBIGUITY, rp as u64, j as u64]);
            let mut window = Vec::with_capacity(memory * store.dim());
            for _ in 0..memory {
                let row = rows[r.random_range(0..rows.len())];
                window.extend_from_slice(store.row(row));
            }
            group.push(window);
        }
        groups.push(group);
    }
    Ok(groups)
}

/// Flattened preprocessed images grouped by reference point.
pub fn raw_image_groups(db: &Database) -> Vec<Vec<Vec<f64>>> {
    let mut groups = vec![Vec::new(); db.rp_count()];
    for rec in &db.records {
        if let Some(rp) = rec.rp_index {
            groups[rp as usize].push(rec.image.amplitudes.clone());
        }
    }
    groups
}

/// Counts from one ambiguity sweep over both representations.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityOutcome {
    pub raw_counts: Vec<usize>,
    pub feature_counts: Vec<usize>,
}

impl AmbiguityOutcome {
    pub fn raw_zero_fraction(&self) -> f64 {
        zero_ambiguity_fraction(&self.raw_counts)
    }
    pub fn feature_zero_fraction(&self) -> f64 {
        zero_ambiguity_fraction(&self.feature_counts)
    }
    pub fn raw_max(&self) -> usize {
        self.raw_counts.iter().copied().max().unwrap_or(0)
    }
    pub fn feature_max(&self) -> usize {
        self.feature_counts.iter().copied().max().unwrap_or(0)
    }
}

/// Sweep every reference-point pair for lookalikes, comparing raw
/// preprocessed images against concatenated fingerprint windows.
pub fn ambiguity_sweep(
    cfg: &RunConfig,
    db: &Database,
    store: &FeatureStore,
) -> Result<AmbiguityOutcome> {
    let locations = db.rp_locations.clone();
    let amb = AmbiguityConfig {
        min_distance: cfg.grid,
        correlation_threshold: cfg.threshold,
        images_per_rp: cfg.ambiguity_images,
    };
    let raw_groups = raw_image_groups(db);
    let raw_counts = count_ambiguous(&raw_groups, &locations, &amb)?;
    let mut feature_groups = Vec::with_capacity(db.rp_count());
    {
        let groups =
            concatenated_feature_groups(store, cfg.memory, cfg.ambiguity_images, cfg.seed)?;
        feature_groups.extend(groups);
    }
    // the thinning already happened while sampling windows
    let amb_features = AmbiguityConfig {
        images_per_rp: 0,
        ..amb
    };
    let feature_counts = count_ambiguous(&feature_groups, &locations, &amb_features)?;
    Ok(AmbiguityOutcome {
        raw_counts,
        feature_counts,
    })
}

/// Compare location ambiguity before and after the learned fingerprint
/// transform and write the per-point counts.
pub fn ambiguity_stage(cfg: &RunConfig, arts: &Artifacts, force: bool) -> Result<AmbiguityOutcome> {
    let (db, _) = formats::read_database(&arts.train())?;
    let store = formats::read_features(&arts.features())?;
    if db.rp_count() != store.rp_count() {
        bail!(
            "database covers {} reference points, feature store {}",
            db.rp_count(),
            store.rp_count()
        );
    }
    let outcome = ambiguity_sweep(cfg, &db, &store)?;
    let mut w = formats::create_output(&arts.ambiguity(), force)?;
    use std::io::Write;
    writeln!(w, "rp,x,y,raw_count,feature_count")?;
    for (rp, (x, y)) in db.rp_locations.iter().enumerate() {
        writeln!(
            w,
            "{rp},{x:?},{y:?},{},{}",
            outcome.raw_counts[rp], outcome.feature_counts[rp]
        )?;
    }
    w.flush()?;
    println!(
        "ambiguity: raw zero-fraction {:.3} max {}, fingerprint zero-fraction {:.3} max {}",
        outcome.raw_zero_fraction(),
        outcome.raw_max(),
        outcome.feature_zero_fraction(),
        outcome.feature_max()
    );
    Ok(outcome)
}

/// Summarize labeled error files into one table.
pub fn report_stage(
    arts: &Artifacts,
    inputs: &[(String, PathBuf)],
    force: bool,
) -> Result<()> {
    if inputs.is_empty() {
        bail!("report needs at least one label=errors.csv input");
    }
    let mut reports = Vec::with_capacity(inputs.len());
    for (label, path) in inputs {
        let errors = report::read_column(path, "error_m")
            .with_context(|| format!("reading errors for '{label}'"))?;
        reports.push(ErrorReport::from_errors(&errors)?.with_label(label));
    }
    report::write_summary(&arts.summary(), &reports, force)?;
    for r in &reports {
        println!("report {}", report::summary_line(r));
    }
    Ok(())
}
