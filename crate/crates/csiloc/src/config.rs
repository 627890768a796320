//! Flat key=value run configuration shared by every pipeline stage.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use csiloc_core::csi::DeviceProfile;
use csiloc_core::quantifier::CnnConfig;
use csiloc_core::sim::{SamplingPlan, SiteModel};
use csiloc_core::tracker::{LstmConfig, TrajectoryConfig, WarmupRule};
use thiserror::Error;

/// A malformed or unknown configuration entry. Distinct from data and
/// numeric failures so the process can exit with the configuration code.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct ConfigParseError(pub String);

fn bad(msg: String) -> anyhow::Error {
    ConfigParseError(msg).into()
}

/// Capture hardware the run models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Desktop NIC: 30 scans x 30 subcarriers x 3 antennae.
    Nic,
    /// Phone: 10 scans x 47 subcarriers x 1 antenna.
    Phone,
}

impl Profile {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "nic" => Ok(Profile::Nic),
            "phone" => Ok(Profile::Phone),
            other => Err(bad(format!("unknown profile '{other}' (expected nic or phone)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::Nic => "nic",
            Profile::Phone => "phone",
        }
    }

    pub fn device(self) -> DeviceProfile {
        match self {
            Profile::Nic => DeviceProfile::nic(),
            Profile::Phone => DeviceProfile::phone(),
        }
    }
}

/// Every knob of the pipeline with its default value. Values come from a
/// config file and `--set key=value` overrides, later entries winning.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub profile: Profile,
    pub seed: u64,
    /// Site extent in meters and the access-point position inside it.
    pub area_w: f64,
    pub area_h: f64,
    pub ap_x: f64,
    pub ap_y: f64,
    /// Survey grid spacing and keep-out from the walls, meters.
    pub grid: f64,
    pub margin: f64,
    pub train_per_rp: usize,
    pub val_per_rp: usize,
    pub test_points: usize,
    pub images_per_test_point: usize,
    /// Median filter window of the preprocessing chain.
    pub window: usize,
    pub cnn_epochs: usize,
    pub batch: usize,
    pub lr: f64,
    /// Training images kept per reference point; 0 keeps all.
    pub cnn_images_per_rp: usize,
    /// Tracker memory length: images per trajectory.
    pub memory: usize,
    /// Trajectory step bound in meters.
    pub sigma: f64,
    /// Seconds between trajectory steps.
    pub dt: f64,
    pub train_traj: usize,
    pub val_traj: usize,
    pub lstm_epochs: usize,
    pub dropout: f64,
    /// Ambiguity correlation threshold.
    pub threshold: f64,
    /// Snapshots per point entering the ambiguity sweep; 0 keeps all.
    pub ambiguity_images: usize,
    pub warmup: WarmupRule,
}

impl RunConfig {
    /// Defaults for one capture profile. The two profiles differ only in
    /// image geometry and quantifier epoch budget.
    pub fn new(profile: Profile) -> Self {
        RunConfig {
            profile,
            seed: 7,
            area_w: 21.0,
            area_h: 16.0,
            ap_x: 3.3,
            ap_y: 4.7,
            grid: 0.5,
            margin: 0.5,
            train_per_rp: 20,
            val_per_rp: 2,
            test_points: 195,
            images_per_test_point: 1,
            window: 3,
            cnn_epochs: match profile {
                Profile::Nic => 100,
                Profile::Phone => 300,
            },
            batch: 32,
            lr: 1e-3,
            cnn_images_per_rp: 0,
            memory: 5,
            sigma: 2.0,
            dt: 1.0,
            train_traj: 30_000,
            val_traj: 15_000,
            lstm_epochs: 100,
            dropout: 0.2,
            threshold: 0.8,
            ambiguity_images: 0,
            warmup: WarmupRule::RepeatOldest,
        }
    }

    /// Build from an optional config file plus override pairs, applied in
    /// that order. The profile key is resolved first because it selects
    /// the defaults every other key patches.
    pub fn from_sources(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            for (ln, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    bad(format!("{}:{}: expected key=value, got '{line}'", path.display(), ln + 1))
                })?;
                pairs.push((k.trim().to_string(), v.trim().to_string()));
            }
        }
        for s in overrides {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| bad(format!("override '{s}' is not key=value")))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }

        let profile = match pairs.iter().rev().find(|(k, _)| k == "profile") {
            Some((_, v)) => Profile::parse(v)?,
            None => Profile::Nic,
        };
        let mut cfg = RunConfig::new(profile);
        for (k, v) in &pairs {
            if k != "profile" {
                cfg.apply(k, v)?;
            }
        }
        Ok(cfg)
    }

    /// Set one key. Unknown keys and unparsable values are configuration
    /// errors.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse::<T>()
                .map_err(|_| bad(format!("key '{key}': cannot parse '{value}'")))
        }
        match key {
            "profile" => self.profile = Profile::parse(value)?,
            "seed" => self.seed = num(key, value)?,
            "area_w" => self.area_w = num(key, value)?,
            "area_h" => self.area_h = num(key, value)?,
            "ap_x" => self.ap_x = num(key, value)?,
            "ap_y" => self.ap_y = num(key, value)?,
            "grid" => self.grid = num(key, value)?,
            "margin" => self.margin = num(key, value)?,
            "train_per_rp" => self.train_per_rp = num(key, value)?,
            "val_per_rp" => self.val_per_rp = num(key, value)?,
            "test_points" => self.test_points = num(key, value)?,
            "images_per_test_point" => self.images_per_test_point = num(key, value)?,
            "window" => self.window = num(key, value)?,
            "cnn_epochs" => self.cnn_epochs = num(key, value)?,
            "batch" => self.batch = num(key, value)?,
            "lr" => self.lr = num(key, value)?,
            "cnn_images_per_rp" => self.cnn_images_per_rp = num(key, value)?,
            "memory" => self.memory = num(key, value)?,
            "sigma" => self.sigma = num(key, value)?,
            "dt" => self.dt = num(key, value)?,
            "train_traj" => self.train_traj = num(key, value)?,
            "val_traj" => self.val_traj = num(key, value)?,
            "lstm_epochs" => self.lstm_epochs = num(key, value)?,
            "dropout" => self.dropout = num(key, value)?,
            "threshold" => self.threshold = num(key, value)?,
            "ambiguity_images" => self.ambiguity_images = num(key, value)?,
            "warmup" => {
                self.warmup = match value {
                    "repeat" => WarmupRule::RepeatOldest,
                    "cnn" => WarmupRule::CnnOnly,
                    other => {
                        return Err(bad(format!(
                            "key 'warmup': unknown rule '{other}' (expected repeat or cnn)"
                        )))
                    }
                }
            }
            other => return Err(bad(format!("unknown configuration key '{other}'"))),
        }
        Ok(())
    }

    /// Canonical text form: one key=value per line in fixed order. Feeds
    /// the manifest hash, so equal configurations hash equally.
    pub fn normalized(&self) -> String {
        let mut s = String::new();
        let w = &mut s;
        let _ = writeln!(w, "profile={}", self.profile.name());
        let _ = writeln!(w, "seed={}", self.seed);
        let _ = writeln!(w, "area_w={:?}", self.area_w);
        let _ = writeln!(w, "area_h={:?}", self.area_h);
        let _ = writeln!(w, "ap_x={:?}", self.ap_x);
        let _ = writeln!(w, "ap_y={:?}", self.ap_y);
        let _ = writeln!(w, "grid={:?}", self.grid);
        let _ = writeln!(w, "margin={:?}", self.margin);
        let _ = writeln!(w, "train_per_rp={}", self.train_per_rp);
        let _ = writeln!(w, "val_per_rp={}", self.val_per_rp);
        let _ = writeln!(w, "test_points={}", self.test_points);
        let _ = writeln!(w, "images_per_test_point={}", self.images_per_test_point);
        let _ = writeln!(w, "window={}", self.window);
        let _ = writeln!(w, "cnn_epochs={}", self.cnn_epochs);
        let _ = writeln!(w, "batch={}", self.batch);
        let _ = writeln!(w, "lr={:?}", self.lr);
        let _ = writeln!(w, "cnn_images_per_rp={}", self.cnn_images_per_rp);
        let _ = writeln!(w, "memory={}", self.memory);
        let _ = writeln!(w, "sigma={:?}", self.sigma);
        let _ = writeln!(w, "dt={:?}", self.dt);
        let _ = writeln!(w, "train_traj={}", self.train_traj);
        let _ = writeln!(w, "val_traj={}", self.val_traj);
        let _ = writeln!(w, "lstm_epochs={}", self.lstm_epochs);
        let _ = writeln!(w, "dropout={:?}", self.dropout);
        let _ = writeln!(w, "threshold={:?}", self.threshold);
        let _ = writeln!(w, "ambiguity_images={}", self.ambiguity_images);
        let _ = writeln!(
            w,
            "warmup={}",
            match self.warmup {
                WarmupRule::RepeatOldest => "repeat",
                WarmupRule::CnnOnly => "cnn",
            }
        );
        s
    }

    pub fn site(&self) -> SiteModel {
        let mut site = SiteModel::reference();
        site.width = self.area_w;
        site.depth = self.area_h;
        site.ap_position = (self.ap_x, self.ap_y);
        site.walls = vec![
            ((0.0, 0.0), (self.area_w, 0.0)),
            ((self.area_w, 0.0), (self.area_w, self.area_h)),
            ((self.area_w, self.area_h), (0.0, self.area_h)),
            ((0.0, self.area_h), (0.0, 0.0)),
        ];
        site
    }

    pub fn sampling_plan(&self) -> SamplingPlan {
        let mut plan = SamplingPlan::reference();
        plan.rp_grid_spacing = self.grid;
        plan.wall_margin = self.margin;
        plan.train_per_rp = self.train_per_rp;
        plan.val_per_rp = self.val_per_rp;
        plan.test_point_count = self.test_points;
        plan.images_per_test_point = self.images_per_test_point;
        plan
    }

    pub fn cnn_config(&self) -> CnnConfig {
        let mut c = match self.profile {
            Profile::Nic => CnnConfig::nic(),
            Profile::Phone => CnnConfig::phone(),
        };
        c.epochs = self.cnn_epochs;
        c.batch_size = self.batch;
        c.learning_rate = self.lr;
        c.images_per_rp = match self.cnn_images_per_rp {
            0 => None,
            n => Some(n),
        };
        c
    }

    pub fn trajectory_config(&self) -> TrajectoryConfig {
        TrajectoryConfig {
            memory_length: self.memory,
            step_bound: self.sigma,
            sample_interval: self.dt,
            train_count: self.train_traj,
            validation_count: self.val_traj,
        }
    }

    pub fn lstm_config(&self, feature_dim: usize) -> LstmConfig {
        LstmConfig {
            hidden: feature_dim,
            dropout: self.dropout,
            learning_rate: self.lr,
            epochs: self.lstm_epochs,
            batch_size: self.batch,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::new(Profile::Nic)
    }
}
