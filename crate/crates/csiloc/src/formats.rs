//! Artifact files the pipeline stages exchange: fingerprint databases,
//! normalization contexts, network checkpoints, feature stores, and
//! trajectory sets. All binary layouts are little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use byteorder::{ReadBytesExt, WriteBytesExt, LE};
use csiloc_core::csi::{CsiImage, Database, FingerprintRecord, NormalizationContext};
use csiloc_core::nn::conv::Conv2d;
use csiloc_core::nn::dense::Dense;
use csiloc_core::nn::lstm::LstmParams;
use csiloc_core::quantifier::{CnnConfig, CnnModel, TrainedQuantifier};
use csiloc_core::tracker::{FeatureStore, LstmConfig, LstmModel, Trajectory, TrajectoryStep};
use csiloc_core::Tensor;

const FORMAT_VERSION: u16 = 1;

/// Open a path for writing. Existing files are kept unless `force` is
/// set, so no stage silently destroys an artifact.
pub fn create_output(path: &Path, force: bool) -> Result<BufWriter<File>> {
    if path.exists() && !force {
        bail!(
            "output {} already exists; pass --force to overwrite",
            path.display()
        );
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)
                .with_context(|| format!("creating directory {}", dir.display()))?;
        }
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn open_input(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(file))
}

fn expect_magic(r: &mut impl Read, expected: &[u8; 4], path: &Path) -> Result<()> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .with_context(|| format!("reading magic of {}", path.display()))?;
    if &magic != expected {
        bail!(
            "{} is not a {} file (magic {:?})",
            path.display(),
            String::from_utf8_lossy(expected),
            magic
        );
    }
    let version = r.read_u16::<LE>()?;
    if version != FORMAT_VERSION {
        bail!(
            "{}: unsupported format version {version}",
            path.display()
        );
    }
    Ok(())
}

fn write_len(w: &mut impl Write, len: usize, what: &str) -> Result<()> {
    let n: u32 = len
        .try_into()
        .map_err(|_| anyhow::anyhow!("{what} count {len} does not fit the format"))?;
    w.write_u32::<LE>(n)?;
    Ok(())
}

fn read_finite_f64(r: &mut impl Read, what: &str) -> Result<f64> {
    let v = r.read_f64::<LE>()?;
    if !v.is_finite() {
        bail!("non-finite {what} in file: {v}");
    }
    Ok(v)
}

// ---------------------------------------------------------------------
// Fingerprint databases: CSID.
//
// magic "CSID", version u16, scans/subcarriers/antennae u16,
// rp_count u32 + (x, y) f64 each, record_count u32 + per record
// x/y/time f64, rp_index i32 (-1 = off-grid), amplitudes f32 each,
// route_count u32 + per route len u32 + record indices u32 each.
// ---------------------------------------------------------------------

pub fn write_database(
    path: &Path,
    db: &Database,
    routes: &[Vec<usize>],
    force: bool,
) -> Result<()> {
    let mut w = create_output(path, force)?;
    w.write_all(b"CSID")?;
    w.write_u16::<LE>(FORMAT_VERSION)?;
    for dim in [db.scans, db.subcarriers, db.antennae] {
        let d: u16 = dim
            .try_into()
            .map_err(|_| anyhow::anyhow!("image dimension {dim} does not fit the format"))?;
        w.write_u16::<LE>(d)?;
    }
    write_len(&mut w, db.rp_locations.len(), "reference point")?;
    for (x, y) in &db.rp_locations {
        w.write_f64::<LE>(*x)?;
        w.write_f64::<LE>(*y)?;
    }
    write_len(&mut w, db.records.len(), "record")?;
    for rec in &db.records {
        w.write_f64::<LE>(rec.image.location.0)?;
        w.write_f64::<LE>(rec.image.location.1)?;
        w.write_f64::<LE>(rec.image.time)?;
        let rp: i32 = match rec.rp_index {
            Some(r) => r
                .try_into()
                .map_err(|_| anyhow::anyhow!("reference point index {r} does not fit the format"))?,
            None => -1,
        };
        w.write_i32::<LE>(rp)?;
        for a in &rec.image.amplitudes {
            w.write_f32::<LE>(*a as f32)?;
        }
    }
    write_len(&mut w, routes.len(), "route")?;
    for route in routes {
        write_len(&mut w, route.len(), "route point")?;
        for idx in route {
            write_len(&mut w, *idx, "record index")?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_database(path: &Path) -> Result<(Database, Vec<Vec<usize>>)> {
    let mut r = open_input(path)?;
    expect_magic(&mut r, b"CSID", path)?;
    let scans = r.read_u16::<LE>()? as usize;
    let subcarriers = r.read_u16::<LE>()? as usize;
    let antennae = r.read_u16::<LE>()? as usize;
    let mut db = Database::new(scans, subcarriers, antennae);
    let rp_count = r.read_u32::<LE>()? as usize;
    for _ in 0..rp_count {
        let x = read_finite_f64(&mut r, "reference point coordinate")?;
        let y = read_finite_f64(&mut r, "reference point coordinate")?;
        db.rp_locations.push((x, y));
    }
    let record_count = r.read_u32::<LE>()? as usize;
    let image_len = scans * subcarriers * antennae;
    for i in 0..record_count {
        let x = read_finite_f64(&mut r, "record location")?;
        let y = read_finite_f64(&mut r, "record location")?;
        let time = read_finite_f64(&mut r, "record time")?;
        let rp = r.read_i32::<LE>()?;
        let rp_index = if rp < 0 { None } else { Some(rp as u32) };
        let mut amplitudes = vec![0.0f64; image_len];
        for a in &mut amplitudes {
            let v = r.read_f32::<LE>()?;
            if !v.is_finite() {
                bail!("{}: record {i} holds a non-finite amplitude", path.display());
            }
            *a = v as f64;
        }
        let image = CsiImage::new(scans, subcarriers, antennae, amplitudes, (x, y), time)
            .with_context(|| format!("{}: record {i}", path.display()))?;
        db.push(FingerprintRecord { image, rp_index })
            .with_context(|| format!("{}: record {i}", path.display()))?;
    }
    let route_count = r.read_u32::<LE>()? as usize;
    let mut routes = Vec::with_capacity(route_count);
    for _ in 0..route_count {
        let len = r.read_u32::<LE>()? as usize;
        let mut route = Vec::with_capacity(len);
        for _ in 0..len {
            let idx = r.read_u32::<LE>()? as usize;
            if idx >= db.records.len() {
                bail!(
                    "{}: route references record {idx} of {}",
                    path.display(),
                    db.records.len()
                );
            }
            route.push(idx);
        }
        routes.push(route);
    }
    Ok((db, routes))
}

// ---------------------------------------------------------------------
// Normalization contexts: plain key=value text.
// ---------------------------------------------------------------------

pub fn write_context(path: &Path, ctx: &NormalizationContext, force: bool) -> Result<()> {
    if ctx.source.contains('\n') {
        bail!("context source note must be a single line");
    }
    let mut w = create_output(path, force)?;
    writeln!(w, "window={}", ctx.window)?;
    writeln!(w, "a_max={:?}", ctx.a_max)?;
    writeln!(w, "source={}", ctx.source)?;
    for a in &ctx.rp_averages {
        writeln!(w, "rp_average={a:?}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_context(path: &Path) -> Result<NormalizationContext> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading context {}", path.display()))?;
    let mut window = None;
    let mut a_max = None;
    let mut source = None;
    let mut rp_averages = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow::anyhow!("{}:{}: expected key=value", path.display(), ln + 1))?;
        match key {
            "window" => window = Some(value.parse::<usize>()?),
            "a_max" => a_max = Some(value.parse::<f64>()?),
            "source" => source = Some(value.to_string()),
            "rp_average" => rp_averages.push(value.parse::<f64>()?),
            other => bail!("{}:{}: unknown context key '{other}'", path.display(), ln + 1),
        }
    }
    let ctx = NormalizationContext {
        rp_averages,
        a_max: a_max.ok_or_else(|| anyhow::anyhow!("{}: missing a_max", path.display()))?,
        window: window.ok_or_else(|| anyhow::anyhow!("{}: missing window", path.display()))?,
        source: source.unwrap_or_default(),
    };
    ctx.validate()?;
    Ok(ctx)
}

// ---------------------------------------------------------------------
// Network checkpoints: NNCK.
//
// magic "NNCK", version u16, kind u8 (1 quantifier, 2 tracker), clamp
// box 4 x f64, a kind-specific config block, then every parameter
// tensor in the model's fixed order: rank u8, dims u32 each, f64 data.
// ---------------------------------------------------------------------

const KIND_QUANTIFIER: u8 = 1;
const KIND_TRACKER: u8 = 2;

fn write_bbox(w: &mut impl Write, bbox: (f64, f64, f64, f64)) -> Result<()> {
    for v in [bbox.0, bbox.1, bbox.2, bbox.3] {
        w.write_f64::<LE>(v)?;
    }
    Ok(())
}

fn read_bbox(r: &mut impl Read) -> Result<(f64, f64, f64, f64)> {
    Ok((
        read_finite_f64(r, "clamp box")?,
        read_finite_f64(r, "clamp box")?,
        read_finite_f64(r, "clamp box")?,
        read_finite_f64(r, "clamp box")?,
    ))
}

fn write_tensors(w: &mut impl Write, tensors: &[&Tensor]) -> Result<()> {
    let count: u16 = tensors.len().try_into().expect("tensor count fits u16");
    w.write_u16::<LE>(count)?;
    for t in tensors {
        let rank: u8 = t.dims().len().try_into().expect("rank fits u8");
        w.write_u8(rank)?;
        for d in t.dims() {
            write_len(w, *d, "tensor dimension")?;
        }
        for v in t.data() {
            w.write_f64::<LE>(*v)?;
        }
    }
    Ok(())
}

fn read_tensors(r: &mut impl Read, into: &mut [&mut Tensor], path: &Path) -> Result<()> {
    let count = r.read_u16::<LE>()? as usize;
    if count != into.len() {
        bail!(
            "{}: checkpoint holds {count} tensors, model needs {}",
            path.display(),
            into.len()
        );
    }
    for (i, t) in into.iter_mut().enumerate() {
        let rank = r.read_u8()? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.read_u32::<LE>()? as usize);
        }
        if dims != t.dims() {
            bail!(
                "{}: tensor {i} has shape {dims:?}, model expects {:?}",
                path.display(),
                t.dims()
            );
        }
        for v in t.data_mut() {
            *v = read_finite_f64(r, "parameter")?;
        }
    }
    Ok(())
}

fn write_context_block(w: &mut impl Write, ctx: &NormalizationContext) -> Result<()> {
    write_len(w, ctx.window, "filter window")?;
    w.write_f64::<LE>(ctx.a_max)?;
    write_len(w, ctx.source.len(), "source note byte")?;
    w.write_all(ctx.source.as_bytes())?;
    write_len(w, ctx.rp_averages.len(), "reference point average")?;
    for a in &ctx.rp_averages {
        w.write_f64::<LE>(*a)?;
    }
    Ok(())
}

fn read_context_block(r: &mut impl Read) -> Result<NormalizationContext> {
    let window = r.read_u32::<LE>()? as usize;
    let a_max = read_finite_f64(r, "context maximum")?;
    let source_len = r.read_u32::<LE>()? as usize;
    let mut source = vec![0u8; source_len];
    r.read_exact(&mut source)?;
    let rp_count = r.read_u32::<LE>()? as usize;
    let mut rp_averages = Vec::with_capacity(rp_count);
    for _ in 0..rp_count {
        rp_averages.push(read_finite_f64(r, "reference point average")?);
    }
    let ctx = NormalizationContext {
        rp_averages,
        a_max,
        window,
        source: String::from_utf8(source).context("context source note is not UTF-8")?,
    };
    ctx.validate()?;
    Ok(ctx)
}

/// Write a trained quantifier with its normalization context, so one file
/// carries everything raw-capture inference needs.
pub fn write_quantifier(path: &Path, q: &TrainedQuantifier, force: bool) -> Result<()> {
    q.validate()?;
    let mut w = create_output(path, force)?;
    w.write_all(b"NNCK")?;
    w.write_u16::<LE>(FORMAT_VERSION)?;
    w.write_u8(KIND_QUANTIFIER)?;
    write_bbox(&mut w, q.model.bbox)?;
    let c = &q.model.config;
    for v in [
        c.scans, c.subcarriers, c.antennae, c.kernel, c.filters, c.fc1, c.fc2, c.epochs,
        c.batch_size,
    ] {
        write_len(&mut w, v, "config value")?;
    }
    write_len(&mut w, c.images_per_rp.unwrap_or(0), "per-point image cap")?;
    w.write_f64::<LE>(c.learning_rate)?;
    write_context_block(&mut w, &q.context)?;
    write_tensors(&mut w, &q.model.param_tensors())?;
    w.flush()?;
    Ok(())
}

pub fn read_quantifier(path: &Path) -> Result<TrainedQuantifier> {
    let mut r = open_input(path)?;
    expect_magic(&mut r, b"NNCK", path)?;
    let kind = r.read_u8()?;
    if kind != KIND_QUANTIFIER {
        bail!("{}: checkpoint kind {kind} is not a quantifier", path.display());
    }
    let bbox = read_bbox(&mut r)?;
    let mut raw = [0usize; 9];
    for v in &mut raw {
        *v = r.read_u32::<LE>()? as usize;
    }
    let images_per_rp = match r.read_u32::<LE>()? as usize {
        0 => None,
        n => Some(n),
    };
    let learning_rate = read_finite_f64(&mut r, "learning rate")?;
    let config = CnnConfig {
        scans: raw[0],
        subcarriers: raw[1],
        antennae: raw[2],
        kernel: raw[3],
        filters: raw[4],
        fc1: raw[5],
        fc2: raw[6],
        epochs: raw[7],
        batch_size: raw[8],
        learning_rate,
        images_per_rp,
    };
    config.validate()?;
    let context = read_context_block(&mut r)?;
    // Assemble with zeroed layers, then load every tensor; avoids paying
    // for a random initialization that is immediately overwritten.
    let mut model = CnnModel {
        conv1: Conv2d::new(config.kernel, config.kernel, config.antennae, config.filters)?,
        conv2: Conv2d::new(config.kernel, config.kernel, config.filters, config.filters)?,
        conv3: Conv2d::new(config.kernel, config.kernel, config.filters, config.filters)?,
        fc1: Dense::new(config.flat_len(), config.fc1)?,
        fc2: Dense::new(config.fc1, config.fc2)?,
        head: Dense::new(config.fc2, 2)?,
        config,
        bbox,
    };
    read_tensors(&mut r, &mut model.param_tensors_mut(), path)?;
    let q = TrainedQuantifier { model, context };
    q.validate()?;
    Ok(q)
}

/// Write a trained tracker along with the memory length its windows use.
pub fn write_tracker(path: &Path, model: &LstmModel, memory: usize, force: bool) -> Result<()> {
    let mut w = create_output(path, force)?;
    w.write_all(b"NNCK")?;
    w.write_u16::<LE>(FORMAT_VERSION)?;
    w.write_u8(KIND_TRACKER)?;
    write_bbox(&mut w, model.bbox)?;
    let c = &model.config;
    for v in [c.hidden, c.epochs, c.batch_size, memory] {
        write_len(&mut w, v, "config value")?;
    }
    w.write_f64::<LE>(c.dropout)?;
    w.write_f64::<LE>(c.learning_rate)?;
    write_tensors(&mut w, &model.param_tensors())?;
    w.flush()?;
    Ok(())
}

pub fn read_tracker(path: &Path) -> Result<(LstmModel, usize)> {
    let mut r = open_input(path)?;
    expect_magic(&mut r, b"NNCK", path)?;
    let kind = r.read_u8()?;
    if kind != KIND_TRACKER {
        bail!("{}: checkpoint kind {kind} is not a tracker", path.display());
    }
    let bbox = read_bbox(&mut r)?;
    let hidden = r.read_u32::<LE>()? as usize;
    let epochs = r.read_u32::<LE>()? as usize;
    let batch_size = r.read_u32::<LE>()? as usize;
    let memory = r.read_u32::<LE>()? as usize;
    let dropout = r.read_f64::<LE>()?;
    let learning_rate = read_finite_f64(&mut r, "learning rate")?;
    let config = LstmConfig {
        hidden,
        dropout,
        learning_rate,
        epochs,
        batch_size,
    };
    config.validate()?;
    if memory == 0 {
        bail!("{}: tracker memory length must be positive", path.display());
    }
    let mut model = LstmModel {
        cell: LstmParams::new(hidden, hidden)?,
        head: Dense::new(hidden, 2)?,
        config,
        bbox,
    };
    read_tensors(&mut r, &mut model.param_tensors_mut(), path)?;
    Ok((model, memory))
}

// ---------------------------------------------------------------------
// Feature stores: FEAT.
//
// magic "FEAT", version u16, dim u32, rp_count u32 + (x, y) f64 each,
// row_count u32 + per row rp u32 and f64 feature values.
// ---------------------------------------------------------------------

pub fn write_features(path: &Path, store: &FeatureStore, force: bool) -> Result<()> {
    let mut w = create_output(path, force)?;
    w.write_all(b"FEAT")?;
    w.write_u16::<LE>(FORMAT_VERSION)?;
    write_len(&mut w, store.dim(), "feature dimension")?;
    write_len(&mut w, store.rp_locations.len(), "reference point")?;
    for (x, y) in &store.rp_locations {
        w.write_f64::<LE>(*x)?;
        w.write_f64::<LE>(*y)?;
    }
    let mut row_rp = vec![u32::MAX; store.row_count()];
    for rp in 0..store.rp_count() as u32 {
        for &row in store.rows_of(rp) {
            row_rp[row] = rp;
        }
    }
    write_len(&mut w, store.row_count(), "feature row")?;
    for (row, rp) in row_rp.iter().enumerate() {
        w.write_u32::<LE>(*rp)?;
        for v in store.row(row) {
            w.write_f64::<LE>(*v)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_features(path: &Path) -> Result<FeatureStore> {
    let mut r = open_input(path)?;
    expect_magic(&mut r, b"FEAT", path)?;
    let dim = r.read_u32::<LE>()? as usize;
    let rp_count = r.read_u32::<LE>()? as usize;
    let mut rp_locations = Vec::with_capacity(rp_count);
    for _ in 0..rp_count {
        let x = read_finite_f64(&mut r, "reference point coordinate")?;
        let y = read_finite_f64(&mut r, "reference point coordinate")?;
        rp_locations.push((x, y));
    }
    let mut store = FeatureStore::new(dim, rp_locations)?;
    let row_count = r.read_u32::<LE>()? as usize;
    let mut feature = vec![0.0f64; dim];
    for _ in 0..row_count {
        let rp = r.read_u32::<LE>()?;
        for v in &mut feature {
            *v = read_finite_f64(&mut r, "feature value")?;
        }
        store.push(rp, &feature)?;
    }
    Ok(store)
}

// ---------------------------------------------------------------------
// Trajectory sets: TRAJ.
//
// magic "TRAJ", version u16, steps-per-trajectory u16, count u32, then
// per step the reference point u32 and the feature row u64.
// ---------------------------------------------------------------------

pub fn write_trajectories(path: &Path, trajectories: &[Trajectory], force: bool) -> Result<()> {
    let t = match trajectories.first() {
        Some(first) => first.steps.len(),
        None => bail!("refusing to write an empty trajectory set"),
    };
    let t16: u16 = t
        .try_into()
        .map_err(|_| anyhow::anyhow!("trajectory length {t} does not fit the format"))?;
    let mut w = create_output(path, force)?;
    w.write_all(b"TRAJ")?;
    w.write_u16::<LE>(FORMAT_VERSION)?;
    w.write_u16::<LE>(t16)?;
    write_len(&mut w, trajectories.len(), "trajectory")?;
    for traj in trajectories {
        if traj.steps.len() != t {
            bail!("trajectory lengths differ: {} and {t}", traj.steps.len());
        }
        for step in &traj.steps {
            w.write_u32::<LE>(step.rp)?;
            w.write_u64::<LE>(step.row as u64)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    let mut r = open_input(path)?;
    expect_magic(&mut r, b"TRAJ", path)?;
    let t = r.read_u16::<LE>()? as usize;
    if t == 0 {
        bail!("{}: trajectories must hold at least one step", path.display());
    }
    let count = r.read_u32::<LE>()? as usize;
    let mut trajectories = Vec::with_capacity(count);
    for _ in 0..count {
        let mut steps = Vec::with_capacity(t);
        for _ in 0..t {
            let rp = r.read_u32::<LE>()?;
            let row = r.read_u64::<LE>()?;
            let row: usize = row
                .try_into()
                .map_err(|_| anyhow::anyhow!("{}: feature row out of range", path.display()))?;
            steps.push(TrajectoryStep { rp, row });
        }
        trajectories.push(Trajectory { steps });
    }
    Ok(trajectories)
}

#[cfg(test)]
mod tests {
    use super::*;
    use csiloc_core::csi::DeviceProfile;
    use csiloc_core::quantifier::train_cnn;
    use csiloc_core::tracker::{generate_trajectories, train_lstm, TrajectoryConfig};
    use csiloc_core::{rng, Error};
    use rand::Rng;

    fn tiny_database(seed: u64) -> Database {
        let profile = DeviceProfile {
            scans: 4,
            subcarriers: 5,
            antennae: 2,
        };
        let mut db = Database::new(profile.scans, profile.subcarriers, profile.antennae);
        db.rp_locations = vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.5)];
        let mut r = rng::stream(seed, &[0x77]);
        for k in 0..12 {
            let rp = (k % 3) as u32;
            let amplitudes: Vec<f64> = (0..profile.image_len())
                .map(|_| r.random_range(0.05..2.0))
                .collect();
            let image = CsiImage::new(
                profile.scans,
                profile.subcarriers,
                profile.antennae,
                amplitudes,
                db.rp_locations[rp as usize],
                k as f64,
            )
            .unwrap();
            db.push(FingerprintRecord {
                image,
                rp_index: Some(rp),
            })
            .unwrap();
        }
        // two off-grid captures
        for k in 0..2 {
            let amplitudes: Vec<f64> = (0..profile.image_len())
                .map(|_| r.random_range(0.05..2.0))
                .collect();
            let image = CsiImage::new(
                profile.scans,
                profile.subcarriers,
                profile.antennae,
                amplitudes,
                (0.3 + k as f64, 0.8),
                100.0 + k as f64,
            )
            .unwrap();
            db.push(FingerprintRecord {
                image,
                rp_index: None,
            })
            .unwrap();
        }
        db
    }

    fn assert_db_eq(a: &Database, b: &Database) {
        assert_eq!(a.rp_locations, b.rp_locations);
        assert_eq!(a.records.len(), b.records.len());
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.rp_index, y.rp_index);
            assert_eq!(x.image.location, y.image.location);
            assert_eq!(x.image.time, y.image.time);
            assert_eq!(x.image.amplitudes, y.image.amplitudes);
        }
    }

    #[test]
    fn database_round_trip_preserves_records_and_routes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("db.csid");
        let db = tiny_database(1);
        let routes = vec![vec![12, 13], vec![0]];
        write_database(&path, &db, &routes, false).unwrap();
        let (back, back_routes) = read_database(&path).unwrap();
        // f32 storage quantizes amplitudes; everything else is exact
        assert_eq!(back_routes, routes);
        assert_eq!(back.rp_locations, db.rp_locations);
        for (x, y) in db.records.iter().zip(&back.records) {
            assert_eq!(x.rp_index, y.rp_index);
            assert_eq!(x.image.location, y.image.location);
            for (a, b) in x.image.amplitudes.iter().zip(&y.image.amplitudes) {
                assert_eq!(*a as f32, *b as f32);
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn preprocessed_database_round_trips_bit_exactly() {
        // preprocessing happens after the f32 quantization, so a second
        // pass through the file must change nothing
        let dir = tempfile::tempdir().unwrap();
        let raw = tiny_database(2);
        let path_raw = dir.path().join("raw.csid");
        write_database(&path_raw, &raw, &[], false).unwrap();
        let (raw_back, _) = read_database(&path_raw).unwrap();
        let ctx = NormalizationContext::fit(&raw_back, 3, "raw.csid").unwrap();
        let pp = csiloc_core::csi::preprocess_database(&raw_back, &ctx).unwrap();
        let path_pp = dir.path().join("pp.csid");
        write_database(&path_pp, &pp, &[], false).unwrap();
        let (pp_back, _) = read_database(&path_pp).unwrap();
        let path_pp2 = dir.path().join("pp2.csid");
        write_database(&path_pp2, &pp_back, &[], false).unwrap();
        let bytes1 = std::fs::read(&path_pp).unwrap();
        let bytes2 = std::fs::read(&path_pp2).unwrap();
        assert_eq!(bytes1, bytes2);
    }

    #[test]
    fn context_file_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("context.txt");
        let db = tiny_database(3);
        let ctx = NormalizationContext::fit(&db, 3, "train.csid").unwrap();
        write_context(&path, &ctx, false).unwrap();
        let back = read_context(&path).unwrap();
        assert_eq!(ctx, back);
    }

    #[test]
    fn quantifier_checkpoint_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.nnck");
        let db = tiny_database(4);
        let ctx = NormalizationContext::fit(&db, 3, "train.csid").unwrap();
        let pp = csiloc_core::csi::preprocess_database(&db, &ctx).unwrap();
        let config = CnnConfig {
            scans: 4,
            subcarriers: 5,
            antennae: 2,
            kernel: 3,
            filters: 3,
            fc1: 60,
            fc2: 6,
            epochs: 2,
            batch_size: 4,
            learning_rate: 1e-3,
            images_per_rp: None,
        };
        let (model, _) = train_cnn(&pp, &pp, &config, 11).unwrap();
        let q = TrainedQuantifier {
            model,
            context: ctx,
        };
        write_quantifier(&path, &q, false).unwrap();
        let back = read_quantifier(&path).unwrap();
        assert_eq!(back.context, q.context);
        assert_eq!(back.model.bbox, q.model.bbox);
        for (a, b) in q
            .model
            .param_tensors()
            .iter()
            .zip(back.model.param_tensors().iter())
        {
            assert_eq!(a.dims(), b.dims());
            let same = a
                .data()
                .iter()
                .zip(b.data())
                .all(|(x, y)| x.to_bits() == y.to_bits());
            assert!(same, "checkpoint altered a parameter");
        }
        // behavior carries over too
        let probe = &q.model;
        let img = &pp.records[0].image;
        let f1 = csiloc_core::quantifier::extract_features(probe, img).unwrap();
        let f2 = csiloc_core::quantifier::extract_features(&back.model, img).unwrap();
        assert_eq!(f1, f2);
    }

    #[test]
    fn tracker_checkpoint_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.nnck");
        let mut store = FeatureStore::new(3, vec![(0.0, 0.0), (1.0, 0.0)]).unwrap();
        let mut r = rng::stream(5, &[0x78]);
        for k in 0..8 {
            let f: Vec<f64> = (0..3).map(|_| r.random_range(0.0..1.0)).collect();
            store.push((k % 2) as u32, &f).unwrap();
        }
        let tc = TrajectoryConfig {
            memory_length: 3,
            train_count: 6,
            validation_count: 2,
            ..TrajectoryConfig::default()
        };
        let trajs = generate_trajectories(&store, &tc, 8, 5).unwrap();
        let config = LstmConfig {
            hidden: 3,
            dropout: 0.0,
            learning_rate: 1e-3,
            epochs: 2,
            batch_size: 4,
        };
        let (model, _) = train_lstm(&store, &trajs[..6], &trajs[6..], &config, 6).unwrap();
        write_tracker(&path, &model, 3, false).unwrap();
        let (back, memory) = read_tracker(&path).unwrap();
        assert_eq!(memory, 3);
        assert_eq!(back.bbox, model.bbox);
        for (a, b) in model
            .param_tensors()
            .iter()
            .zip(back.param_tensors().iter())
        {
            let same = a
                .data()
                .iter()
                .zip(b.data())
                .all(|(x, y)| x.to_bits() == y.to_bits());
            assert!(same, "checkpoint altered a parameter");
        }
    }

    #[test]
    fn feature_and_trajectory_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = FeatureStore::new(4, vec![(0.0, 0.0), (2.0, 0.0), (0.0, 2.0)]).unwrap();
        let mut r = rng::stream(9, &[0x79]);
        for k in 0..9 {
            let f: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
            store.push((k % 3) as u32, &f).unwrap();
        }
        let fpath = dir.path().join("features.feat");
        write_features(&fpath, &store, false).unwrap();
        let back = read_features(&fpath).unwrap();
        assert_eq!(back.dim(), store.dim());
        assert_eq!(back.rp_locations, store.rp_locations);
        assert_eq!(back.row_count(), store.row_count());
        for row in 0..store.row_count() {
            assert_eq!(store.row(row), back.row(row));
        }
        for rp in 0..3u32 {
            assert_eq!(store.rows_of(rp), back.rows_of(rp));
        }

        let tc = TrajectoryConfig {
            memory_length: 4,
            step_bound: 2.0,
            train_count: 5,
            validation_count: 2,
            ..TrajectoryConfig::default()
        };
        let trajs = generate_trajectories(&store, &tc, 7, 13).unwrap();
        let tpath = dir.path().join("walks.traj");
        write_trajectories(&tpath, &trajs, false).unwrap();
        let back = read_trajectories(&tpath).unwrap();
        assert_eq!(back, trajs);
    }

    #[test]
    fn existing_outputs_need_force() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("db.csid");
        let db = tiny_database(6);
        write_database(&path, &db, &[], false).unwrap();
        let err = write_database(&path, &db, &[], false).unwrap_err();
        assert!(err.to_string().contains("--force"), "{err}");
        write_database(&path, &db, &[], true).unwrap();
    }

    #[test]
    fn corrupt_headers_are_rejected_with_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bogus.csid");
        std::fs::write(&path, b"NOPE\x01\x00rest").unwrap();
        let err = read_database(&path).unwrap_err();
        assert!(err.to_string().contains("bogus.csid"), "{err}");
        let db = tiny_database(7);
        let good = dir.path().join("good.csid");
        write_database(&good, &db, &[], false).unwrap();
        let wrong = read_features(&good).unwrap_err();
        assert!(wrong.to_string().contains("FEAT"), "{wrong}");
    }

    #[test]
    fn checkpoint_kinds_do_not_cross_load() {
        let dir = tempfile::tempdir().unwrap();
        let db = tiny_database(8);
        let ctx = NormalizationContext::fit(&db, 3, "x").unwrap();
        let pp = csiloc_core::csi::preprocess_database(&db, &ctx).unwrap();
        let config = CnnConfig {
            scans: 4,
            subcarriers: 5,
            antennae: 2,
            kernel: 3,
            filters: 2,
            fc1: 40,
            fc2: 4,
            epochs: 1,
            batch_size: 4,
            learning_rate: 1e-3,
            images_per_rp: None,
        };
        let (model, _) = train_cnn(&pp, &pp, &config, 3).unwrap();
        let q = TrainedQuantifier {
            model,
            context: ctx,
        };
        let path = dir.path().join("q.nnck");
        write_quantifier(&path, &q, false).unwrap();
        let err = read_tracker(&path).unwrap_err();
        assert!(err.to_string().contains("not a tracker"), "{err}");
    }

    #[test]
    fn truncated_files_fail_cleanly() {
        let dir = tempfile::tempdir().unwrap();
        let db = tiny_database(9);
        let path = dir.path().join("db.csid");
        write_database(&path, &db, &[], false).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let cut = dir.path().join("cut.csid");
        std::fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
        assert!(read_database(&cut).is_err());
    }

    #[test]
    fn loaded_database_still_validates_against_core_checks() {
        let dir = tempfile::tempdir().unwrap();
        let db = tiny_database(10);
        let path = dir.path().join("db.csid");
        write_database(&path, &db, &[], false).unwrap();
        let (back, _) = read_database(&path).unwrap();
        back.check_finite().unwrap();
        assert!(matches!(
            NormalizationContext::fit(&Database::new(2, 2, 1), 3, "x"),
            Err(Error::Config(_) | Error::Inconsistent(_))
        ));
        assert_db_eq(
            &back,
            &read_database(&path).map(|(d, _)| d).unwrap(),
        );
    }
}
