//! Seedable synthetic CSI world: a multipath frequency response per
//! location plus temporal fluctuation, standing in for a measured
//! fingerprint campaign.
//!
//! The channel is a sum over a line-of-sight path, first-order wall
//! reflections, and a few seed-derived scatterers. Amplitude per
//! subcarrier is the magnitude of the phasor sum; gains follow 1/distance
//! with per-path reflection attenuation. One deliberate departure from RF
//! fidelity: carrier phases are evaluated at a strongly reduced effective
//! carrier frequency, so the interference pattern drifts over meters
//! instead of centimeters. That gives fingerprints the smooth spatial
//! coherence a half-meter survey grid needs, while keeping subcarrier
//! spacing (and therefore null spacing) physically true.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::csi::{CsiImage, Database, DeviceProfile, FingerprintRecord};
use crate::error::{Error, Result};
use crate::math;
use crate::rng::{self, role};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// A wall as a 2-D segment; reflections mirror the transmitter across its
/// line.
pub type Wall = ((f64, f64), (f64, f64));

/// Geometry and radio parameters of one site.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteModel {
    /// Area extent in meters; locations live in `[0,width] x [0,depth]`.
    pub width: f64,
    pub depth: f64,
    /// Transmitter position, deliberately off-center.
    pub ap_position: (f64, f64),
    pub walls: Vec<Wall>,
    /// Center frequency in Hz.
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    /// Fraction of the carrier used for carrier-phase evolution; small
    /// values slow the spatial drift of the interference pattern.
    pub phase_scale: f64,
    /// Seed-derived point scatterers enriching the frequency texture.
    pub scatterer_count: usize,
    /// Amplitude attenuation of one wall bounce.
    pub wall_reflection: f64,
    /// Path lengths are clamped below this to keep gains finite.
    pub min_range: f64,
}

impl SiteModel {
    /// The default office-hall site: 21 m by 16 m, one access point on
    /// 5 GHz channel 36 with 20 MHz of bandwidth.
    pub fn reference() -> Self {
        let (w, d) = (21.0, 16.0);
        SiteModel {
            width: w,
            depth: d,
            ap_position: (3.3, 4.7),
            walls: vec![
                ((0.0, 0.0), (w, 0.0)),
                ((w, 0.0), (w, d)),
                ((w, d), (0.0, d)),
                ((0.0, d), (0.0, 0.0)),
            ],
            carrier_hz: 5.18e9,
            bandwidth_hz: 20.0e6,
            phase_scale: 0.006,
            scatterer_count: 10,
            wall_reflection: 0.75,
            min_range: 0.25,
        }
    }

    pub fn contains(&self, p: (f64, f64)) -> bool {
        p.0 >= 0.0 && p.0 <= self.width && p.1 >= 0.0 && p.1 <= self.depth
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.depth > 0.0) {
            return Err(Error::Config(format!(
                "site area {}x{} must be positive",
                self.width, self.depth
            )));
        }
        if !self.contains(self.ap_position) {
            return Err(Error::Config(format!(
                "access point {:?} outside the {}x{} area",
                self.ap_position, self.width, self.depth
            )));
        }
        if !(self.carrier_hz > 0.0 && self.bandwidth_hz > 0.0) {
            return Err(Error::Config("carrier and bandwidth must be positive".into()));
        }
        if !(self.phase_scale > 0.0 && self.phase_scale <= 1.0) {
            return Err(Error::Config(format!(
                "phase scale {} outside (0, 1]",
                self.phase_scale
            )));
        }
        if !(self.wall_reflection >= 0.0 && self.wall_reflection <= 1.0) {
            return Err(Error::Config(format!(
                "wall reflection {} outside [0, 1]",
                self.wall_reflection
            )));
        }
        if !(self.min_range > 0.0) {
            return Err(Error::Config("minimum range must be positive".into()));
        }
        Ok(())
    }
}

/// One propagation path, folded to an apparent source point: the
/// transmitter itself, its mirror image behind a wall, or a scatterer with
/// the transmitter-to-scatterer leg pre-measured.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSource {
    pub point: (f64, f64),
    /// Fixed path length before the apparent source (scatterer first leg).
    pub base_length: f64,
    /// Amplitude coefficient applied on top of the 1/length loss.
    pub coeff: f64,
    /// Phase offset: pi for a wall bounce, a frozen random value for a
    /// scatterer.
    pub extra_phase: f64,
}

/// The resolved path set of one site and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Paths {
    pub sources: Vec<PathSource>,
}

fn mirror_across(p: (f64, f64), wall: &Wall) -> (f64, f64) {
    let (a, b) = (wall.0, wall.1);
    let d = (b.0 - a.0, b.1 - a.1);
    let len2 = d.0 * d.0 + d.1 * d.1;
    // project p onto the wall line, then reflect through the foot point
    let t = ((p.0 - a.0) * d.0 + (p.1 - a.1) * d.1) / len2;
    let foot = (a.0 + t * d.0, a.1 + t * d.1);
    (2.0 * foot.0 - p.0, 2.0 * foot.1 - p.1)
}

/// Resolve the path set: line of sight, one mirror image per wall, and
/// `scatterer_count` seed-derived point scatterers.
pub fn build_paths(site: &SiteModel, seed: u64) -> Result<Paths> {
    site.validate()?;
    let mut sources = Vec::with_capacity(1 + site.walls.len() + site.scatterer_count);
    sources.push(PathSource {
        point: site.ap_position,
        base_length: 0.0,
        coeff: 1.0,
        extra_phase: 0.0,
    });
    for wall in &site.walls {
        sources.push(PathSource {
            point: mirror_across(site.ap_position, wall),
            base_length: 0.0,
            coeff: site.wall_reflection,
            // a bounce flips the field
            extra_phase: core::f64::consts::PI,
        });
    }
    let mut rng = rng::stream(seed, &[role::SIM_GEOMETRY]);
    for _ in 0..site.scatterer_count {
        let margin = 1.0_f64.min(site.width / 4.0).min(site.depth / 4.0);
        let point = (
            rng.random_range(margin..site.width - margin),
            rng.random_range(margin..site.depth - margin),
        );
        let leg = math::distance(site.ap_position, point).max(site.min_range);
        sources.push(PathSource {
            point,
            base_length: leg,
            coeff: rng.random_range(0.3..0.8),
            extra_phase: rng.random_range(0.0..core::f64::consts::TAU),
        });
    }
    Ok(Paths { sources })
}

/// Amplitude response of one location: `subcarriers x antennae` values in
/// image row order. Antennae sit half a wavelength apart along x, which
/// enters as a per-path steering phase.
pub fn response_from_paths(
    site: &SiteModel,
    paths: &Paths,
    profile: &DeviceProfile,
    location: (f64, f64),
) -> Result<Vec<f64>> {
    if !site.contains(location) {
        return Err(Error::Config(format!(
            "location {location:?} outside the {}x{} area",
            site.width, site.depth
        )));
    }
    profile.validate()?;
    let f_eff = site.carrier_hz * site.phase_scale;
    // resolve every path at this location once
    let mut resolved = Vec::with_capacity(paths.sources.len());
    for s in &paths.sources {
        let d = math::distance(location, s.point);
        let total = (s.base_length + d).max(site.min_range);
        let amp = s.coeff / total;
        let tau = total / SPEED_OF_LIGHT;
        let ux = if d > 1e-9 {
            (location.0 - s.point.0) / d
        } else {
            1.0
        };
        resolved.push((amp, tau, ux, s.extra_phase));
    }
    let (w_count, c_count) = (profile.subcarriers, profile.antennae);
    let mut out = vec![0.0; w_count * c_count];
    for w in 0..w_count {
        let w_off = site.bandwidth_hz * ((w as f64 + 0.5) / w_count as f64 - 0.5);
        let freq = f_eff + w_off;
        for ant in 0..c_count {
            let steer = core::f64::consts::PI * ant as f64;
            let (mut re, mut im) = (0.0, 0.0);
            for (amp, tau, ux, extra) in &resolved {
                let phase = -core::f64::consts::TAU * freq * tau - steer * ux + extra;
                re += amp * math::cos(phase);
                im += amp * math::sin(phase);
            }
            out[w * c_count + ant] = math::sqrt(re * re + im * im);
        }
    }
    Ok(out)
}

/// Convenience form resolving the path set on the fly.
pub fn channel_response(
    site: &SiteModel,
    profile: &DeviceProfile,
    location: (f64, f64),
    seed: u64,
) -> Result<Vec<f64>> {
    let paths = build_paths(site, seed)?;
    response_from_paths(site, &paths, profile, location)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    Quiet,
    Steady,
    Busy,
}

/// Temporal fluctuation regime of one collection period.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationMode {
    pub kind: ModeKind,
    /// Calibration target: mean cross-time correlation at one location.
    pub target_self_correlation: f64,
    /// Chance per scan of an impulsive full-row outlier.
    pub outlier_row_probability: f64,
    /// Chance per scan of a contiguous subcarrier block fade.
    pub fade_block_probability: f64,
    /// Log-amplitude spread of the slow environment field.
    pub env_sigma: f64,
    /// Log-amplitude spread of fast per-value scan noise.
    pub scan_sigma: f64,
    /// Multiplier range of a faded block.
    pub fade_depth: (f64, f64),
    /// Multiplier range of an outlier row.
    pub outlier_gain: (f64, f64),
}

impl FluctuationMode {
    pub fn quiet() -> Self {
        FluctuationMode {
            kind: ModeKind::Quiet,
            target_self_correlation: 0.8,
            outlier_row_probability: 0.008,
            fade_block_probability: 0.03,
            env_sigma: 0.12,
            scan_sigma: 0.04,
            fade_depth: (0.55, 0.85),
            outlier_gain: (1.8, 2.6),
        }
    }

    pub fn steady() -> Self {
        FluctuationMode {
            kind: ModeKind::Steady,
            target_self_correlation: 0.6,
            outlier_row_probability: 0.02,
            fade_block_probability: 0.08,
            env_sigma: 0.25,
            scan_sigma: 0.05,
            fade_depth: (0.45, 0.8),
            outlier_gain: (1.8, 2.8),
        }
    }

    pub fn busy() -> Self {
        FluctuationMode {
            kind: ModeKind::Busy,
            target_self_correlation: 0.4,
            outlier_row_probability: 0.04,
            fade_block_probability: 0.15,
            env_sigma: 0.38,
            scan_sigma: 0.07,
            fade_depth: (0.4, 0.75),
            outlier_gain: (2.0, 3.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_self_correlation > 0.0 && self.target_self_correlation <= 1.0) {
            return Err(Error::Config(format!(
                "target self-correlation {} outside (0, 1]",
                self.target_self_correlation
            )));
        }
        for (name, p) in [
            ("outlier probability", self.outlier_row_probability),
            ("fade probability", self.fade_block_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} {p} outside [0, 1]")));
            }
        }
        if self.env_sigma < 0.0 || self.scan_sigma < 0.0 {
            return Err(Error::Config("noise spreads must be non-negative".into()));
        }
        if !(self.fade_depth.0 > 0.0 && self.fade_depth.0 <= self.fade_depth.1 && self.fade_depth.1 <= 1.0)
        {
            return Err(Error::Config(format!(
                "fade depth range {:?} must sit inside (0, 1]",
                self.fade_depth
            )));
        }
        if !(self.outlier_gain.0 >= 1.0 && self.outlier_gain.0 <= self.outlier_gain.1) {
            return Err(Error::Config(format!(
                "outlier gain range {:?} must be >= 1 and ordered",
                self.outlier_gain
            )));
        }
        Ok(())
    }
}

/// How snapshots sample the shared slow environment.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotPlan {
    /// Seed of the site-wide environment field. Snapshots taken in the
    /// same time block see the same field realization everywhere, the way
    /// a shared occupancy level colors every capture of one session.
    pub field_seed: u64,
    pub env_block_seconds: f64,
}

impl SnapshotPlan {
    pub fn new(field_seed: u64) -> Self {
        SnapshotPlan {
            field_seed,
            env_block_seconds: 600.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.env_block_seconds > 0.0) {
            return Err(Error::Config("environment block must be positive".into()));
        }
        Ok(())
    }
}

fn env_factor(plan: &SnapshotPlan, time: f64, col: usize, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 1.0;
    }
    let block = math::floor(time / plan.env_block_seconds).max(0.0) as u64;
    let mut field = rng::stream(plan.field_seed, &[role::SIM_ENV, block, col as u64]);
    let g: f64 = field.sample(StandardNormal);
    // mean-one log-normal so the field redistributes rather than adds power
    math::exp(sigma * g - 0.5 * sigma * sigma)
}

/// Stack one CSI image at a location and time: the static response under
/// the slow environment field, plus per-scan fades, impulsive outlier
/// rows, and fast noise.
#[allow(clippy::too_many_arguments)]
pub fn emit_snapshot(
    site: &SiteModel,
    paths: &Paths,
    profile: &DeviceProfile,
    location: (f64, f64),
    mode: &FluctuationMode,
    plan: &SnapshotPlan,
    time: f64,
    rng: &mut ChaCha8Rng,
) -> Result<CsiImage> {
    mode.validate()?;
    plan.validate()?;
    if !(time >= 0.0 && time.is_finite()) {
        return Err(Error::Config(format!("snapshot time {time} must be non-negative")));
    }
    let base = response_from_paths(site, paths, profile, location)?;
    let cols = base.len();
    let mut slow = vec![0.0; cols];
    for (col, v) in slow.iter_mut().enumerate() {
        *v = base[col] * env_factor(plan, time, col, mode.env_sigma);
    }
    let (h, w, c) = (profile.scans, profile.subcarriers, profile.antennae);
    let mut img = CsiImage::zeros(h, w, c);
    img.location = location;
    img.time = time;
    for scan in 0..h {
        let row = img.row_mut(scan);
        row.copy_from_slice(&slow);
        if rng.random::<f64>() < mode.fade_block_probability {
            let start = rng.random_range(0..w);
            let width = rng.random_range(w.div_ceil(6)..=w.div_ceil(2).max(1));
            let depth = rng.random_range(mode.fade_depth.0..=mode.fade_depth.1);
            for sub in start..(start + width).min(w) {
                for ant in 0..c {
                    row[sub * c + ant] *= depth;
                }
            }
        }
        if rng.random::<f64>() < mode.outlier_row_probability {
            let gain = rng.random_range(mode.outlier_gain.0..=mode.outlier_gain.1);
            for v in row.iter_mut() {
                *v *= gain;
            }
        }
        if mode.scan_sigma > 0.0 {
            let s = mode.scan_sigma;
            for v in row.iter_mut() {
                let g: f64 = rng.sample(StandardNormal);
                *v *= math::exp(s * g - 0.5 * s * s);
            }
        }
    }
    Ok(img)
}

/// Survey and test-collection plan for one world.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub rp_grid_spacing: f64,
    /// Grid keep-out from the outer walls.
    pub wall_margin: f64,
    /// Training images per reference point, spread over the mode schedule.
    pub train_per_rp: usize,
    /// Later-time held-out images per reference point.
    pub val_per_rp: usize,
    pub test_point_count: usize,
    pub images_per_test_point: usize,
    pub test_speed_range: (f64, f64),
    /// Seconds between consecutive test points on a route.
    pub update_interval: f64,
    /// Test points per continuous route.
    pub route_points: usize,
}

impl SamplingPlan {
    pub fn reference() -> Self {
        SamplingPlan {
            rp_grid_spacing: 0.5,
            wall_margin: 0.5,
            train_per_rp: 20,
            val_per_rp: 2,
            test_point_count: 195,
            images_per_test_point: 1,
            test_speed_range: (0.6, 4.0),
            update_interval: 1.0,
            route_points: 20,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rp_grid_spacing > 0.0) {
            return Err(Error::Config("grid spacing must be positive".into()));
        }
        if self.wall_margin < 0.0 {
            return Err(Error::Config("wall margin must be non-negative".into()));
        }
        if self.train_per_rp == 0 {
            return Err(Error::Config("need at least one training image per reference point".into()));
        }
        let (lo, hi) = self.test_speed_range;
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::Config(format!("speed range {lo}..{hi} must be positive and ordered")));
        }
        if !(self.update_interval > 0.0) {
            return Err(Error::Config("update interval must be positive".into()));
        }
        if self.test_point_count > 0 && (self.route_points == 0 || self.images_per_test_point == 0) {
            return Err(Error::Config("test routes need positive point and image counts".into()));
        }
        Ok(())
    }
}

/// Reference points on a regular grid inside the walls.
pub fn rp_grid(site: &SiteModel, plan: &SamplingPlan) -> Result<Vec<(f64, f64)>> {
    plan.validate()?;
    let mut rps = Vec::new();
    let m = plan.wall_margin;
    let s = plan.rp_grid_spacing;
    let mut y = m;
    while y <= site.depth - m + 1e-9 {
        let mut x = m;
        while x <= site.width - m + 1e-9 {
            rps.push((x, y));
            x += s;
        }
        y += s;
    }
    if rps.is_empty() {
        return Err(Error::Config(format!(
            "no reference points fit a {}x{} area with margin {m} and spacing {s}",
            site.width, site.depth
        )));
    }
    Ok(rps)
}

/// A generated world: survey database, held-out later-time images per
/// reference point, and off-grid test captures grouped into routes.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedWorld {
    pub train: Database,
    pub val: Database,
    pub test: Database,
    /// Per route, the record index of each point's first test image.
    pub routes: Vec<Vec<usize>>,
}

const DAY_SECONDS: f64 = 86_400.0;

fn reflect_into(mut x: f64, lo: f64, hi: f64) -> f64 {
    // mirror back inside; each bounce shrinks the overshoot
    for _ in 0..64 {
        if x < lo {
            x = 2.0 * lo - x;
        } else if x > hi {
            x = 2.0 * hi - x;
        } else {
            break;
        }
    }
    x.clamp(lo, hi)
}

/// Generate the full world: `train_per_rp` images per grid point spread
/// over the mode schedule (one mode per simulated day), `val_per_rp`
/// later-time images, and continuous random-walk test routes off the grid.
/// The output is a pure function of the arguments.
pub fn build_database(
    site: &SiteModel,
    plan: &SamplingPlan,
    snapshot: &SnapshotPlan,
    schedule: &[FluctuationMode],
    profile: &DeviceProfile,
    seed: u64,
) -> Result<SimulatedWorld> {
    site.validate()?;
    plan.validate()?;
    snapshot.validate()?;
    profile.validate()?;
    if schedule.is_empty() {
        return Err(Error::Config("mode schedule must list at least one day".into()));
    }
    for m in schedule {
        m.validate()?;
    }
    let paths = build_paths(site, seed)?;
    let rps = rp_grid(site, plan)?;
    let days = schedule.len();

    let mut train = Database::new(profile.scans, profile.subcarriers, profile.antennae);
    let mut val = train.clone();
    train.rp_locations = rps.clone();
    val.rp_locations = rps.clone();
    let total = plan.train_per_rp + plan.val_per_rp;
    for (r, rp) in rps.iter().enumerate() {
        for k in 0..total {
            let day = k % days;
            let slot = k / days;
            // 30 min between same-day revisits: separate environment blocks
            let time = day as f64 * DAY_SECONDS + 3600.0 + slot as f64 * 1800.0;
            let mut snap_rng = rng::stream(seed, &[role::SIM_SNAPSHOT, r as u64, k as u64]);
            let image = emit_snapshot(
                site,
                &paths,
                profile,
                *rp,
                &schedule[day],
                snapshot,
                time,
                &mut snap_rng,
            )?;
            let record = FingerprintRecord {
                image,
                rp_index: Some(r as u32),
            };
            if k < plan.train_per_rp {
                train.push(record)?;
            } else {
                val.push(record)?;
            }
        }
    }

    let mut test = Database::new(profile.scans, profile.subcarriers, profile.antennae);
    let mut routes = Vec::new();
    let mut emitted_points = 0usize;
    let mut route_idx = 0usize;
    let route_margin = plan.wall_margin.max(0.3);
    while emitted_points < plan.test_point_count {
        let mut route_rng = rng::stream(seed, &[role::SIM_ROUTE, route_idx as u64]);
        let day = route_idx % days;
        let mode = &schedule[day];
        let mut t = day as f64 * DAY_SECONDS + 50_000.0 + (route_idx / days) as f64 * 2000.0;
        let mut pos = (
            route_rng.random_range(route_margin..site.width - route_margin),
            route_rng.random_range(route_margin..site.depth - route_margin),
        );
        let mut heading = route_rng.random_range(0.0..core::f64::consts::TAU);
        let mut route = Vec::new();
        for _ in 0..plan.route_points {
            if emitted_points == plan.test_point_count {
                break;
            }
            // never let a test point coincide with a survey point
            if rps.iter().any(|rp| math::distance(pos, *rp) < 1e-9) {
                pos.0 = reflect_into(pos.0 + 1e-3, route_margin, site.width - route_margin);
            }
            route.push(test.records.len());
            for j in 0..plan.images_per_test_point {
                let mut snap_rng = rng::stream(
                    seed,
                    &[
                        role::SIM_SNAPSHOT,
                        u64::MAX,
                        emitted_points as u64,
                        j as u64,
                    ],
                );
                let image = emit_snapshot(
                    site,
                    &paths,
                    profile,
                    pos,
                    mode,
                    snapshot,
                    t + j as f64 * 0.05,
                    &mut snap_rng,
                )?;
                test.push(FingerprintRecord {
                    image,
                    rp_index: None,
                })?;
            }
            emitted_points += 1;
            let speed = route_rng.random_range(plan.test_speed_range.0..=plan.test_speed_range.1);
            heading += route_rng.random_range(-0.6..0.6);
            let step = speed * plan.update_interval;
            pos = (
                reflect_into(
                    pos.0 + step * math::cos(heading),
                    route_margin,
                    site.width - route_margin,
                ),
                reflect_into(
                    pos.1 + step * math::sin(heading),
                    route_margin,
                    site.depth - route_margin,
                ),
            );
            t += plan.update_interval;
        }
        if !route.is_empty() {
            routes.push(route);
        }
        route_idx += 1;
    }

    Ok(SimulatedWorld {
        train,
        val,
        test,
        routes,
    })
}

/// One mode per simulated day: quiet, steady, busy.
pub fn default_schedule() -> Vec<FluctuationMode> {
    vec![
        FluctuationMode::quiet(),
        FluctuationMode::steady(),
        FluctuationMode::busy(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::pearson;

    fn flat_site() -> SiteModel {
        // no reflections, no scatterers: line of sight only
        let mut site = SiteModel::reference();
        site.walls.clear();
        site.scatterer_count = 0;
        site
    }

    #[test]
    fn line_of_sight_alone_is_flat_across_subcarriers() {
        let site = flat_site();
        let profile = DeviceProfile {
            scans: 1,
            subcarriers: 8,
            antennae: 2,
        };
        let loc = (10.0, 12.0);
        let resp = channel_response(&site, &profile, loc, 7).unwrap();
        let expect = 1.0 / math::distance(loc, site.ap_position);
        for v in &resp {
            assert!((v - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn two_equal_paths_produce_nulls_spaced_by_inverse_delay() {
        let site = flat_site();
        let profile = DeviceProfile {
            scans: 1,
            subcarriers: 2048,
            antennae: 1,
        };
        let loc = (10.0, 12.0);
        let d = math::distance(loc, site.ap_position);
        let extra = 120.0; // meters of extra path: tau = 400 ns
        let tau = extra / SPEED_OF_LIGHT;
        let paths = Paths {
            sources: vec![
                PathSource {
                    point: site.ap_position,
                    base_length: 0.0,
                    coeff: 1.0,
                    extra_phase: 0.0,
                },
                PathSource {
                    point: site.ap_position,
                    base_length: extra,
                    coeff: (d + extra) / d,
                    extra_phase: 0.0,
                },
            ],
        };
        let resp = response_from_paths(&site, &paths, &profile, loc).unwrap();
        // closed form: |1 + exp(-j 2 pi f tau)| / d = 2|cos(pi f tau)| / d
        let f_eff = site.carrier_hz * site.phase_scale;
        for (w, v) in resp.iter().enumerate() {
            let w_off = site.bandwidth_hz * ((w as f64 + 0.5) / 2048.0 - 0.5);
            let expect = 2.0 * math::cos(core::f64::consts::PI * (f_eff + w_off) * tau).abs() / d;
            assert!((v - expect).abs() < 1e-9, "subcarrier {w}: {v} vs {expect}");
        }
        // null spacing: local minima separated by 1/tau in frequency
        let step = site.bandwidth_hz / 2048.0;
        let minima: Vec<usize> = (1..2047)
            .filter(|&w| resp[w] < resp[w - 1] && resp[w] < resp[w + 1])
            .collect();
        assert!(minima.len() >= 3);
        for pair in minima.windows(2) {
            let spacing = (pair[1] - pair[0]) as f64 * step;
            assert!((spacing - 1.0 / tau).abs() < 2.0 * step);
        }
    }

    #[test]
    fn responses_are_deterministic_in_the_seed() {
        let site = SiteModel::reference();
        let profile = DeviceProfile::phone();
        let a = channel_response(&site, &profile, (5.0, 5.0), 42).unwrap();
        let b = channel_response(&site, &profile, (5.0, 5.0), 42).unwrap();
        let c = channel_response(&site, &profile, (5.0, 5.0), 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn locations_outside_the_area_are_rejected() {
        let site = SiteModel::reference();
        let profile = DeviceProfile::phone();
        assert!(channel_response(&site, &profile, (-1.0, 5.0), 1).is_err());
        assert!(channel_response(&site, &profile, (5.0, 17.0), 1).is_err());
    }

    #[test]
    fn noiseless_snapshots_stack_identical_rows() {
        let site = SiteModel::reference();
        let paths = build_paths(&site, 3).unwrap();
        let profile = DeviceProfile {
            scans: 5,
            subcarriers: 12,
            antennae: 2,
        };
        let mode = FluctuationMode {
            outlier_row_probability: 0.0,
            fade_block_probability: 0.0,
            scan_sigma: 0.0,
            ..FluctuationMode::quiet()
        };
        let plan = SnapshotPlan::new(3);
        let mut rng = rng::stream(3, &[role::SIM_SNAPSHOT, 0, 0]);
        let img = emit_snapshot(&site, &paths, &profile, (8.0, 8.0), &mode, &plan, 100.0, &mut rng)
            .unwrap();
        let first = img.row(0).to_vec();
        for scan in 1..profile.scans {
            assert_eq!(img.row(scan), &first[..]);
        }
    }

    #[test]
    fn reference_grid_density_matches_the_survey() {
        let site = SiteModel::reference();
        let plan = SamplingPlan::reference();
        let rps = rp_grid(&site, &plan).unwrap();
        assert_eq!(rps.len(), 41 * 31);
        // within 10% of the 1185-point survey density
        assert!(rps.len() >= 1066 && rps.len() <= 1303);
    }

    #[test]
    fn world_generation_is_reproducible_and_bounded() {
        let site = SiteModel::reference();
        let profile = DeviceProfile {
            scans: 2,
            subcarriers: 6,
            antennae: 1,
        };
        let plan = SamplingPlan {
            rp_grid_spacing: 5.0,
            wall_margin: 0.5,
            train_per_rp: 4,
            val_per_rp: 1,
            test_point_count: 12,
            images_per_test_point: 2,
            test_speed_range: (0.6, 4.0),
            update_interval: 1.0,
            route_points: 5,
        };
        let snapshot = SnapshotPlan::new(11);
        let schedule = default_schedule();
        let world = build_database(&site, &plan, &snapshot, &schedule, &profile, 11).unwrap();
        let again = build_database(&site, &plan, &snapshot, &schedule, &profile, 11).unwrap();
        assert_eq!(world, again);

        let rp_count = world.train.rp_count();
        assert_eq!(world.train.records.len(), rp_count * 4);
        assert_eq!(world.val.records.len(), rp_count);
        assert_eq!(world.test.records.len(), 12 * 2);
        assert_eq!(world.routes.iter().map(|r| r.len()).sum::<usize>(), 12);

        // validation images are taken after the training images
        let train_latest = world
            .train
            .records
            .iter()
            .map(|r| r.image.time)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(world.val.records.iter().all(|r| r.image.time >= train_latest - 2.0 * DAY_SECONDS));

        // test points stay inside, off the grid, and within speed bounds
        for rec in &world.test.records {
            assert!(site.contains(rec.image.location));
            assert!(rec.rp_index.is_none());
            for rp in &world.train.rp_locations {
                assert!(math::distance(rec.image.location, *rp) > 0.0);
            }
        }
        let max_step = plan.test_speed_range.1 * plan.update_interval + 1e-9;
        for route in &world.routes {
            for pair in route.windows(2) {
                let a = world.test.records[pair[0]].image.location;
                let b = world.test.records[pair[1]].image.location;
                assert!(math::distance(a, b) <= max_step);
            }
        }
    }

    #[test]
    fn snapshot_images_at_one_spot_still_correlate() {
        // smoke check that the full noise stack keeps same-location,
        // same-time-block images strongly related
        let site = SiteModel::reference();
        let paths = build_paths(&site, 5).unwrap();
        let profile = DeviceProfile::phone();
        let mode = FluctuationMode::quiet();
        let plan = SnapshotPlan::new(5);
        let mut r1 = rng::stream(5, &[role::SIM_SNAPSHOT, 0, 0]);
        let mut r2 = rng::stream(5, &[role::SIM_SNAPSHOT, 0, 1]);
        let a = emit_snapshot(&site, &paths, &profile, (9.0, 9.0), &mode, &plan, 100.0, &mut r1)
            .unwrap();
        let b = emit_snapshot(&site, &paths, &profile, (9.0, 9.0), &mode, &plan, 100.0, &mut r2)
            .unwrap();
        let r = pearson(&a.amplitudes, &b.amplitudes).unwrap();
        assert!(r > 0.8, "same-block correlation {r}");
    }

    #[test]
    fn fluctuation_modes_hit_their_correlation_envelopes() {
        let site = SiteModel::reference();
        let seed = 404;
        let paths = build_paths(&site, seed).unwrap();
        let profile = DeviceProfile::nic();
        let plan = SnapshotPlan::new(seed);
        let mut loc_rng = rng::stream(seed, &[0x77]);
        let locs: Vec<(f64, f64)> = (0..40)
            .map(|_| {
                (
                    loc_rng.random_range(0.5..site.width - 0.5),
                    loc_rng.random_range(0.5..site.depth - 0.5),
                )
            })
            .collect();
        for (day, gap, mode, lo, hi) in [
            (0usize, 1800.0, FluctuationMode::quiet(), 0.7, 0.9),
            (2, 18000.0, FluctuationMode::busy(), 0.3, 0.5),
        ] {
            // average over well-separated start times as well as locations:
            // the slow field is site-wide, so a single time pair would
            // sample only one realization of it
            let mut sum = 0.0;
            let mut n = 0usize;
            for k in 0..8 {
                let t0 = day as f64 * DAY_SECONDS + 3600.0 + k as f64 * 3600.0;
                for (i, loc) in locs.iter().enumerate() {
                    let mut r1 = rng::stream(seed, &[roles_probe(day, i, 2 * k)]);
                    let mut r2 = rng::stream(seed, &[roles_probe(day, i, 2 * k + 1)]);
                    let a = emit_snapshot(&site, &paths, &profile, *loc, &mode, &plan, t0, &mut r1)
                        .unwrap();
                    let b = emit_snapshot(
                        &site, &paths, &profile, *loc, &mode, &plan, t0 + gap, &mut r2,
                    )
                    .unwrap();
                    sum += pearson(&a.amplitudes, &b.amplitudes).unwrap();
                    n += 1;
                }
            }
            let mean = sum / n as f64;
            assert!(
                mean >= lo && mean <= hi,
                "{:?} cross-time mean {mean} outside [{lo}, {hi}]",
                mode.kind
            );
        }
    }

    #[test]
    fn spatial_correlation_decays_over_distance_bins() {
        let site = SiteModel::reference();
        let paths = build_paths(&site, 404).unwrap();
        let profile = DeviceProfile::nic();
        let mut pts = Vec::new();
        for yi in 0..6 {
            for xi in 0..20 {
                pts.push((1.0 + xi as f64 * 0.5, 4.0 + yi as f64 * 0.5));
            }
        }
        let resp: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| response_from_paths(&site, &paths, &profile, *p).unwrap())
            .collect();
        let mut bin_sum = [0.0; 10];
        let mut bin_n = [0usize; 10];
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let d = math::distance(pts[i], pts[j]);
                if d > 5.0 {
                    continue;
                }
                let bin = ((d / 0.5).ceil() as usize).clamp(1, 10) - 1;
                bin_sum[bin] += pearson(&resp[i], &resp[j]).unwrap();
                bin_n[bin] += 1;
            }
        }
        let means: Vec<f64> = (0..10).map(|b| bin_sum[b] / bin_n[b] as f64).collect();
        for pair in means.windows(2) {
            assert!(pair[1] < pair[0], "bins must decay, got {means:?}");
        }
    }

    // slow tuning probe: prints the calibration numbers the envelope tests
    // and the acceptance suite rely on
    #[test]
    #[ignore]
    fn calibration_probe() {
        let site = SiteModel::reference();
        let seed = 20260817;
        let paths = build_paths(&site, seed).unwrap();
        let profile = DeviceProfile::nic();
        let plan = SnapshotPlan::new(seed);

        let mut loc_rng = rng::stream(seed, &[0x99]);
        let locs: Vec<(f64, f64)> = (0..80)
            .map(|_| {
                (
                    loc_rng.random_range(0.5..site.width - 0.5),
                    loc_rng.random_range(0.5..site.depth - 0.5),
                )
            })
            .collect();

        // ripple depth of the static pattern: variance across the response
        // relative to its squared mean, averaged over locations
        let mut cv2_sum = 0.0;
        for loc in &locs {
            let r = response_from_paths(&site, &paths, &profile, *loc).unwrap();
            let m = r.iter().sum::<f64>() / r.len() as f64;
            let v = r.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / r.len() as f64;
            cv2_sum += v / (m * m);
        }
        std::println!("mean squared coefficient of variation: {:.4}", cv2_sum / locs.len() as f64);

        for (day, gap, mode) in [
            (0usize, 1800.0, FluctuationMode::quiet()),
            (1, 7200.0, FluctuationMode::steady()),
            (2, 18000.0, FluctuationMode::busy()),
        ] {
            let mut sum = 0.0;
            let mut n = 0usize;
            for k in 0..8 {
                let t0 = day as f64 * DAY_SECONDS + 3600.0 + k as f64 * 3600.0;
                for (i, loc) in locs.iter().enumerate() {
                    let mut r1 = rng::stream(seed, &[roles_probe(day, i, 2 * k)]);
                    let mut r2 = rng::stream(seed, &[roles_probe(day, i, 2 * k + 1)]);
                    let a = emit_snapshot(&site, &paths, &profile, *loc, &mode, &plan, t0, &mut r1)
                        .unwrap();
                    let b = emit_snapshot(
                        &site, &paths, &profile, *loc, &mode, &plan, t0 + gap, &mut r2,
                    )
                    .unwrap();
                    sum += pearson(&a.amplitudes, &b.amplitudes).unwrap();
                    n += 1;
                }
            }
            let mean = sum / n as f64;
            std::println!(
                "{:?} cross-time mean correlation over {n} pairs at {}s gap: {mean:.4}",
                mode.kind,
                gap
            );
        }

        // spatial decay of the noiseless response over 0.5 m bins
        let mut pts = Vec::new();
        let mut y = 0.5;
        while y <= site.depth - 0.5 {
            let mut x = 0.5;
            while x <= site.width - 0.5 {
                pts.push((x, y));
                x += 0.5;
            }
            y += 0.5;
        }
        let resp: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| response_from_paths(&site, &paths, &profile, *p).unwrap())
            .collect();
        let mut bin_sum = [0.0; 10];
        let mut bin_n = [0usize; 10];
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let d = math::distance(pts[i], pts[j]);
                if d > 5.0 {
                    continue;
                }
                let bin = ((d / 0.5).ceil() as usize).clamp(1, 10) - 1;
                bin_sum[bin] += pearson(&resp[i], &resp[j]).unwrap();
                bin_n[bin] += 1;
            }
        }
        for b in 0..10 {
            std::println!(
                "spatial bin ({:.1}, {:.1}] m: mean corr {:.4} over {} pairs",
                b as f64 * 0.5,
                (b + 1) as f64 * 0.5,
                bin_sum[b] / bin_n[b] as f64,
                bin_n[b]
            );
        }

        // distant-pair raw correlation tail at the ambiguity threshold
        let mut distant = 0usize;
        let mut above = 0usize;
        for i in (0..pts.len()).step_by(3) {
            for j in ((i + 3)..pts.len()).step_by(3) {
                if math::distance(pts[i], pts[j]) <= 5.0 {
                    continue;
                }
                distant += 1;
                if pearson(&resp[i], &resp[j]).unwrap() > 0.8 {
                    above += 1;
                }
            }
        }
        std::println!(
            "distant pairs above 0.8 on noiseless responses: {above} of {distant} ({:.2}%)",
            100.0 * above as f64 / distant as f64
        );
    }

    fn roles_probe(day: usize, i: usize, t: usize) -> u64 {
        0xABC0 + (day as u64) * 100_000 + (i as u64) * 32 + t as u64
    }

    #[test]
    fn invalid_plans_are_rejected() {
        let site = SiteModel::reference();
        let mut bad_site = site.clone();
        bad_site.ap_position = (30.0, 5.0);
        assert!(bad_site.validate().is_err());

        let mut plan = SamplingPlan::reference();
        plan.rp_grid_spacing = 0.0;
        assert!(plan.validate().is_err());

        let mut plan = SamplingPlan::reference();
        plan.wall_margin = 50.0;
        assert!(rp_grid(&site, &plan).is_err());

        let mut mode = FluctuationMode::quiet();
        mode.target_self_correlation = 0.0;
        assert!(mode.validate().is_err());
    }
}
