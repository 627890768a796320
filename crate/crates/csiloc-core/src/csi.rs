//! CSI amplitude images, fingerprint databases, and the preprocessing
//! chain that turns raw amplitudes into network inputs.
//!
//! An image stacks `scans` consecutive packets; each packet carries one
//! amplitude per subcarrier per antenna. Preprocessing median-filters each
//! subcarrier column over time, min-max normalizes each scan row into
//! `[0, 1]`, and then rescales the whole image by its average power
//! relative to the strongest reference point, so absolute signal strength
//! survives normalization as a learnable cue.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Image dimensions of one capture device.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeviceProfile {
    pub scans: usize,
    pub subcarriers: usize,
    pub antennae: usize,
}

impl DeviceProfile {
    /// Three-antenna NIC capture: 30 scans of 30 grouped subcarriers.
    pub fn nic() -> Self {
        DeviceProfile {
            scans: 30,
            subcarriers: 30,
            antennae: 3,
        }
    }

    /// Single-antenna phone capture: 10 scans of 47 subcarriers.
    pub fn phone() -> Self {
        DeviceProfile {
            scans: 10,
            subcarriers: 47,
            antennae: 1,
        }
    }

    pub fn image_len(&self) -> usize {
        self.scans * self.subcarriers * self.antennae
    }

    pub fn validate(&self) -> Result<()> {
        if self.scans == 0 || self.subcarriers == 0 || self.antennae == 0 {
            return Err(Error::Config(format!(
                "device profile must have positive dimensions, got {}x{}x{}",
                self.scans, self.subcarriers, self.antennae
            )));
        }
        Ok(())
    }
}

/// One CSI amplitude image: `[scan][subcarrier][antenna]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiImage {
    scans: usize,
    subcarriers: usize,
    antennae: usize,
    pub amplitudes: Vec<f64>,
    /// Ground-truth location in meters.
    pub location: (f64, f64),
    /// Capture time in seconds since the start of the collection.
    pub time: f64,
}

impl CsiImage {
    pub fn new(
        scans: usize,
        subcarriers: usize,
        antennae: usize,
        amplitudes: Vec<f64>,
        location: (f64, f64),
        time: f64,
    ) -> Result<Self> {
        if scans == 0 || subcarriers == 0 || antennae == 0 {
            return Err(Error::Config(format!(
                "image dimensions must be positive, got {scans}x{subcarriers}x{antennae}"
            )));
        }
        if amplitudes.len() != scans * subcarriers * antennae {
            return Err(Error::Shape(format!(
                "{} amplitudes do not fill {scans}x{subcarriers}x{antennae}",
                amplitudes.len()
            )));
        }
        Ok(CsiImage {
            scans,
            subcarriers,
            antennae,
            amplitudes,
            location,
            time,
        })
    }

    pub fn zeros(scans: usize, subcarriers: usize, antennae: usize) -> Self {
        CsiImage {
            scans,
            subcarriers,
            antennae,
            amplitudes: vec![0.0; scans * subcarriers * antennae],
            location: (0.0, 0.0),
            time: 0.0,
        }
    }

    pub fn scans(&self) -> usize {
        self.scans
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn antennae(&self) -> usize {
        self.antennae
    }

    /// Values per scan row.
    pub fn row_len(&self) -> usize {
        self.subcarriers * self.antennae
    }

    pub fn at(&self, scan: usize, subcarrier: usize, antenna: usize) -> f64 {
        self.amplitudes[(scan * self.subcarriers + subcarrier) * self.antennae + antenna]
    }

    pub fn row(&self, scan: usize) -> &[f64] {
        &self.amplitudes[scan * self.row_len()..][..self.row_len()]
    }

    pub fn row_mut(&mut self, scan: usize) -> &mut [f64] {
        let len = self.row_len();
        &mut self.amplitudes[scan * len..][..len]
    }

    pub fn check_finite(&self) -> Result<()> {
        for (i, v) in self.amplitudes.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("amplitude[{i}] = {v}")));
            }
        }
        Ok(())
    }
}

/// Average amplitude of an image: the mean over every scan, subcarrier,
/// and antenna.
pub fn average_amplitude(image: &CsiImage) -> f64 {
    let mut sum = 0.0;
    for v in &image.amplitudes {
        sum += v;
    }
    sum / image.amplitudes.len() as f64
}

fn median_in_place(buf: &mut [f64]) -> f64 {
    buf.sort_unstable_by(|a, b| a.partial_cmp(b).expect("median of non-finite values"));
    buf[buf.len() / 2]
}

/// Median filter along the scan axis, one subcarrier/antenna column at a
/// time, with edge replication. `window` must be odd.
pub fn median_filter_columns(image: &CsiImage, window: usize) -> Result<CsiImage> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::Config(format!(
            "median window must be odd and positive, got {window}"
        )));
    }
    let mut out = image.clone();
    if window == 1 || image.scans == 1 {
        return Ok(out);
    }
    let half = window / 2;
    let cols = image.row_len();
    let h = image.scans;
    let mut buf = vec![0.0; window];
    for col in 0..cols {
        for y in 0..h {
            for (slot, off) in buf.iter_mut().zip(0..window) {
                // replicate the first and last scans past the borders
                let sy = (y + off).saturating_sub(half).min(h - 1);
                *slot = image.amplitudes[sy * cols + col];
            }
            out.amplitudes[y * cols + col] = median_in_place(&mut buf);
        }
    }
    Ok(out)
}

/// Min-max normalize each scan row into `[0, 1]`. A flat row (max equals
/// min) maps to 0.5 everywhere.
pub fn minmax_normalize_rows(image: &CsiImage) -> CsiImage {
    let mut out = image.clone();
    for y in 0..image.scans {
        let row = out.row_mut(y);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in row.iter() {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
        if hi > lo {
            // true division keeps the row exactly inside [0, 1] with the
            // extremes landing on the endpoints
            let span = hi - lo;
            for v in row.iter_mut() {
                *v = (*v - lo) / span;
            }
        } else {
            for v in row.iter_mut() {
                *v = 0.5;
            }
        }
    }
    out
}

/// Multiply every amplitude by `scale` (the average-power ratio of this
/// image's source against the strongest reference point).
pub fn power_rescale(image: &CsiImage, scale: f64) -> Result<CsiImage> {
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::Config(format!("power scale must be finite and non-negative, got {scale}")));
    }
    let mut out = image.clone();
    for v in out.amplitudes.iter_mut() {
        *v *= scale;
    }
    Ok(out)
}

/// One stored fingerprint: an image plus which reference point it belongs
/// to (`None` for test captures away from the grid).
#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintRecord {
    pub image: CsiImage,
    pub rp_index: Option<u32>,
}

/// A fingerprint database: images of fixed dimensions, grouped by
/// reference point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Database {
    pub scans: usize,
    pub subcarriers: usize,
    pub antennae: usize,
    pub records: Vec<FingerprintRecord>,
    /// Location of each reference point, indexed by `rp_index`.
    pub rp_locations: Vec<(f64, f64)>,
}

impl Database {
    pub fn new(scans: usize, subcarriers: usize, antennae: usize) -> Self {
        Database {
            scans,
            subcarriers,
            antennae,
            records: Vec::new(),
            rp_locations: Vec::new(),
        }
    }

    pub fn rp_count(&self) -> usize {
        self.rp_locations.len()
    }

    pub fn push(&mut self, record: FingerprintRecord) -> Result<()> {
        let img = &record.image;
        if (img.scans, img.subcarriers, img.antennae)
            != (self.scans, self.subcarriers, self.antennae)
        {
            return Err(Error::Shape(format!(
                "image {}x{}x{} does not match database profile {}x{}x{}",
                img.scans, img.subcarriers, img.antennae, self.scans, self.subcarriers, self.antennae
            )));
        }
        if let Some(rp) = record.rp_index {
            if (rp as usize) >= self.rp_locations.len() {
                return Err(Error::Inconsistent(format!(
                    "record references reference point {rp} of {}",
                    self.rp_locations.len()
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    /// Indices of records belonging to one reference point, in insertion
    /// order.
    pub fn records_of(&self, rp: u32) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.rp_index == Some(rp))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn check_finite(&self) -> Result<()> {
        for r in &self.records {
            r.image.check_finite()?;
        }
        Ok(())
    }
}

/// Frozen normalization state fitted on a training database: the mean
/// filtered average amplitude of each reference point and the maximum over
/// them. New captures are rescaled against these values.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationContext {
    pub rp_averages: Vec<f64>,
    pub a_max: f64,
    pub window: usize,
    /// Free-form note naming the database the context was fitted on.
    pub source: String,
}

impl NormalizationContext {
    /// Fit on a training database: each reference point's average is the
    /// mean of its images' filtered averages.
    pub fn fit(db: &Database, window: usize, source: &str) -> Result<Self> {
        if db.rp_count() == 0 {
            return Err(Error::Config("cannot fit normalization on a database without reference points".into()));
        }
        let mut sums = vec![0.0; db.rp_count()];
        let mut counts = vec![0usize; db.rp_count()];
        for rec in &db.records {
            if let Some(rp) = rec.rp_index {
                let filtered = median_filter_columns(&rec.image, window)?;
                sums[rp as usize] += average_amplitude(&filtered);
                counts[rp as usize] += 1;
            }
        }
        let mut rp_averages = vec![0.0; db.rp_count()];
        for (i, (s, c)) in sums.iter().zip(&counts).enumerate() {
            if *c == 0 {
                return Err(Error::Config(format!(
                    "reference point {i} has no training images"
                )));
            }
            rp_averages[i] = s / *c as f64;
        }
        let a_max = rp_averages.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ctx = NormalizationContext {
            rp_averages,
            a_max,
            window,
            source: source.into(),
        };
        ctx.validate()?;
        Ok(ctx)
    }

    /// Reject contexts that cannot have come from a successful fit.
    pub fn validate(&self) -> Result<()> {
        if self.rp_averages.is_empty() {
            return Err(Error::Inconsistent("normalization context has no reference points".into()));
        }
        if self.window == 0 || self.window % 2 == 0 {
            return Err(Error::Inconsistent(format!(
                "normalization context window {} is not odd",
                self.window
            )));
        }
        if !(self.a_max.is_finite() && self.a_max > 0.0) {
            return Err(Error::Inconsistent(format!(
                "normalization context peak average {} is not positive",
                self.a_max
            )));
        }
        let mut max_seen = f64::NEG_INFINITY;
        for (i, v) in self.rp_averages.iter().enumerate() {
            if !(v.is_finite() && *v > 0.0) {
                return Err(Error::Inconsistent(format!(
                    "reference point {i} average {v} is not positive"
                )));
            }
            max_seen = max_seen.max(*v);
        }
        if (max_seen - self.a_max).abs() > 1e-9 * self.a_max.abs() {
            return Err(Error::Inconsistent(format!(
                "peak average {} does not match the reference point maximum {max_seen}",
                self.a_max
            )));
        }
        Ok(())
    }

    /// Rescale factor for a training image of a known reference point.
    pub fn scale_for_rp(&self, rp: u32) -> Result<f64> {
        self.rp_averages
            .get(rp as usize)
            .map(|a| a / self.a_max)
            .ok_or_else(|| {
                Error::Inconsistent(format!(
                    "reference point {rp} outside context of {}",
                    self.rp_averages.len()
                ))
            })
    }
}

/// Full preprocessing of one image. Training images of a known reference
/// point rescale by that point's fitted average; unseen captures rescale by
/// their own filtered average against the frozen maximum.
pub fn preprocess(
    image: &CsiImage,
    ctx: &NormalizationContext,
    rp: Option<u32>,
) -> Result<CsiImage> {
    let filtered = median_filter_columns(image, ctx.window)?;
    let scale = match rp {
        Some(rp) => ctx.scale_for_rp(rp)?,
        None => average_amplitude(&filtered) / ctx.a_max,
    };
    let normalized = minmax_normalize_rows(&filtered);
    power_rescale(&normalized, scale)
}

/// Preprocess every record of a database against a fitted context.
pub fn preprocess_database(db: &Database, ctx: &NormalizationContext) -> Result<Database> {
    if db.rp_count() > 0 && db.rp_count() != ctx.rp_averages.len() {
        return Err(Error::Inconsistent(format!(
            "context covers {} reference points, database has {}",
            ctx.rp_averages.len(),
            db.rp_count()
        )));
    }
    let mut out = Database::new(db.scans, db.subcarriers, db.antennae);
    out.rp_locations = db.rp_locations.clone();
    for rec in &db.records {
        let image = preprocess(&rec.image, ctx, rec.rp_index)?;
        out.records.push(FingerprintRecord {
            image,
            rp_index: rec.rp_index,
        });
    }
    Ok(out)
}
