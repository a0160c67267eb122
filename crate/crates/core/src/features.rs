//! L×B SRP-PHAT feature extraction, labeled samples and mirror augmentation.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::beamform::{srp_phat, AzimuthGrid, DoaResponse, DEFAULT_AZIMUTH_BINS};
use crate::error::{Error, Result};
use crate::signal::{ArrayGeometry, AudioClip};
use crate::stft::{band_select, frame_count, stft, StftStack, DEFAULT_FRAME_LEN, DEFAULT_HOP};

/// Classes in their fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Left,
    Front,
    Right,
    None,
}

impl Class {
    pub const ALL: [Class; 4] = [Class::Left, Class::Front, Class::Right, Class::None];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Class> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Class::Left => "left",
            Class::Front => "front",
            Class::Right => "right",
            Class::None => "none",
        }
    }

    /// Label under left-right reflection of the scene.
    pub fn mirrored(self) -> Class {
        match self {
            Class::Left => Class::Right,
            Class::Right => Class::Left,
            other => other,
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Class {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "left" => Ok(Class::Left),
            "front" => Ok(Class::Front),
            "right" => Ok(Class::Right),
            "none" => Ok(Class::None),
            other => Err(Error::config(format!("unknown class label '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Environment {
    A,
    B,
}

impl fmt::Display for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Environment::A => "A",
            Environment::B => "B",
        })
    }
}

impl FromStr for Environment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Environment::A),
            "B" | "b" => Ok(Environment::B),
            other => Err(Error::config(format!("unknown environment '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Motion {
    Static,
    Dynamic,
}

impl fmt::Display for Motion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Motion::Static => "static",
            Motion::Dynamic => "dynamic",
        })
    }
}

impl FromStr for Motion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "static" => Ok(Motion::Static),
            "dynamic" => Ok(Motion::Dynamic),
            other => Err(Error::config(format!("unknown motion tag '{other}'"))),
        }
    }
}

/// Feature pipeline parameters. Defaults are the reference configuration:
/// 1 s windows, two segments, 30 azimuth bins and a 50–1500 Hz band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Window length δt in seconds.
    pub sample_len: f64,
    pub segments: usize,
    pub bins: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub frame_len: usize,
    pub hop: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sample_len: 1.0,
            segments: 2,
            bins: DEFAULT_AZIMUTH_BINS,
            f_min: 50.0,
            f_max: 1500.0,
            frame_len: DEFAULT_FRAME_LEN,
            hop: DEFAULT_HOP,
        }
    }
}

impl PipelineConfig {
    pub fn feature_dim(&self) -> usize {
        self.segments * self.bins
    }

    pub fn window_samples(&self, sample_rate: u32) -> usize {
        (self.sample_len * f64::from(sample_rate)).round() as usize
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        if !(self.sample_len.is_finite() && self.sample_len > 0.0) {
            return Err(Error::config("sample length must be positive"));
        }
        if self.segments == 0 {
            return Err(Error::config("at least one segment is required"));
        }
        if self.bins < 2 {
            return Err(Error::config("at least two azimuth bins are required"));
        }
        if !(self.f_min >= 0.0 && self.f_min < self.f_max) {
            return Err(Error::config("band must satisfy 0 <= f_min < f_max"));
        }
        if self.frame_len == 0 || !self.frame_len.is_multiple_of(2) || self.hop == 0 {
            return Err(Error::config("frame length must be even and hop positive"));
        }
        let per_segment = self.sample_len * f64::from(sample_rate) / self.segments as f64;
        if per_segment < self.frame_len as f64 {
            return Err(Error::config(format!(
                "each of the {} segments spans {per_segment:.0} samples, shorter than a {}-sample frame",
                self.segments, self.frame_len
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<AzimuthGrid> {
        AzimuthGrid::new(self.bins)
    }
}

/// SRP-PHAT energies for `segments` consecutive segments, stored
/// segment-major: `x = [r_1, ..., r_L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoaFeature {
    values: Vec<f64>,
    segments: usize,
    bins: usize,
}

impl DoaFeature {
    pub fn new(values: Vec<f64>, segments: usize, bins: usize) -> Result<Self> {
        if values.len() != segments * bins {
            return Err(Error::DimensionMismatch {
                expected: segments * bins,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invariant(
                "feature entries must be finite and non-negative",
            ));
        }
        Ok(Self {
            values,
            segments,
            bins,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let bins = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != bins) {
            return Err(Error::invariant("feature rows differ in length"));
        }
        Self::new(rows.concat(), rows.len(), bins)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn row(&self, segment: usize) -> &[f64] {
        &self.values[segment * self.bins..(segment + 1) * self.bins]
    }

    /// Every row in reversed bin order.
    pub fn mirrored(&self) -> DoaFeature {
        let mut values = Vec::with_capacity(self.values.len());
        for l in 0..self.segments {
            values.extend(self.row(l).iter().rev());
        }
        DoaFeature {
            values,
            segments: self.segments,
            bins: self.bins,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub recording_id: String,
    pub environment: Option<Environment>,
    pub motion: Motion,
    /// Window end time in seconds from stream start.
    pub t_e: f64,
    #[serde(default)]
    pub augmented: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub feature: DoaFeature,
    pub label: Class,
    pub meta: SampleMeta,
}

/// Splits `frames` into `segments` contiguous ranges; the last range takes the
/// remainder.
pub fn segment_ranges(frames: usize, segments: usize) -> Vec<std::ops::Range<usize>> {
    let base = frames / segments;
    (0..segments)
        .map(|l| {
            let start = l * base;
            let end = if l + 1 == segments {
                frames
            } else {
                start + base
            };
            start..end
        })
        .collect()
}

/// Feature of the trailing `config.sample_len` seconds of `clip`.
pub fn extract_feature(
    clip: &AudioClip,
    geometry: &ArrayGeometry,
    config: &PipelineConfig,
) -> Result<DoaFeature> {
    config.validate(clip.sample_rate())?;
    let window = config.window_samples(clip.sample_rate());
    if clip.len() < window {
        return Err(Error::ClipTooShort {
            required: window,
            available: clip.len(),
        });
    }
    let tail = clip.tail(window)?;
    let stack = band_select(
        &stft(&tail, config.frame_len, config.hop)?,
        config.f_min,
        config.f_max,
    )?;
    feature_from_stack(&stack, geometry, config)
}

/// SRP-PHAT response of the whole trailing window, as used by the
/// direction-only baseline.
pub fn doa_response(
    clip: &AudioClip,
    geometry: &ArrayGeometry,
    config: &PipelineConfig,
) -> Result<DoaResponse> {
    config.validate(clip.sample_rate())?;
    let window = config.window_samples(clip.sample_rate());
    if clip.len() < window {
        return Err(Error::ClipTooShort {
            required: window,
            available: clip.len(),
        });
    }
    let stack = band_select(
        &stft(&clip.tail(window)?, config.frame_len, config.hop)?,
        config.f_min,
        config.f_max,
    )?;
    srp_phat(&stack, geometry, &config.grid()?)
}

pub(crate) fn feature_from_stack(
    stack: &StftStack,
    geometry: &ArrayGeometry,
    config: &PipelineConfig,
) -> Result<DoaFeature> {
    let grid = config.grid()?;
    let frames = stack.frames();
    debug_assert_eq!(
        frames,
        frame_count(
            config.window_samples(stack.sample_rate()),
            config.frame_len,
            config.hop
        )
    );
    if frames < config.segments {
        return Err(Error::config(format!(
            "{frames} frames cannot be split into {} segments",
            config.segments
        )));
    }
    let mut values = Vec::with_capacity(config.feature_dim());
    for range in segment_ranges(frames, config.segments) {
        let part = stack.frame_range(range)?;
        values.extend(srp_phat(&part, geometry, &grid)?.energies);
    }
    DoaFeature::new(values, config.segments, config.bins)
}

/// Reverses every row and swaps left/right; the result is flagged as
/// augmented.
pub fn mirror(sample: &LabeledSample) -> LabeledSample {
    LabeledSample {
        feature: sample.feature.mirrored(),
        label: sample.label.mirrored(),
        meta: SampleMeta {
            augmented: !sample.meta.augmented,
            ..sample.meta.clone()
        },
    }
}

/// Appends the mirror of every left and right sample. Training data only.
pub fn augment_training_set(samples: &[LabeledSample]) -> Vec<LabeledSample> {
    let mut out = samples.to_vec();
    out.extend(
        samples
            .iter()
            .filter(|s| matches!(s.label, Class::Left | Class::Right))
            .map(mirror),
    );
    out
}

pub fn class_counts(samples: &[LabeledSample]) -> [usize; Class::COUNT] {
    let mut counts = [0; Class::COUNT];
    for s in samples {
        counts[s.label.index()] += 1;
    }
    counts
}

pub const FEATURE_CSV_FIXED: [&str; 5] = ["recording_id", "label", "env", "motion", "t_e"];

/// Feature cache CSV. `preamble` lines are written first as `# ` comments.
pub fn features_to_csv(samples: &[LabeledSample], preamble: &[String]) -> Result<String> {
    let dim = samples.first().map_or(0, |s| s.feature.dim());
    let mut out = String::new();
    for line in preamble {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = FEATURE_CSV_FIXED.iter().map(|s| s.to_string()).collect();
    header.extend((0..dim).map(|i| format!("x_{i}")));
    writer.write_record(&header)?;
    for s in samples {
        if s.feature.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: s.feature.dim(),
            });
        }
        let mut record = vec![
            s.meta.recording_id.clone(),
            s.label.to_string(),
            s.meta
                .environment
                .map(|e| e.to_string())
                .unwrap_or_default(),
            s.meta.motion.to_string(),
            s.meta.t_e.to_string(),
        ];
        record.extend(s.feature.as_slice().iter().map(|v| v.to_string()));
        writer.write_record(&record)?;
    }
    let body = writer
        .into_inner()
        .map_err(|e| Error::invariant(e.to_string()))?;
    out.push_str(&String::from_utf8(body).map_err(|e| Error::invariant(e.to_string()))?);
    Ok(out)
}

/// Parses a feature cache; `segments` restores the row structure.
pub fn features_from_csv(text: &str, segments: usize) -> Result<Vec<LabeledSample>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.len() < FEATURE_CSV_FIXED.len()
        || header.iter().take(5).ne(FEATURE_CSV_FIXED.iter().copied())
    {
        return Err(Error::config(
            "feature CSV header does not match the cache layout",
        ));
    }
    let dim = header.len() - FEATURE_CSV_FIXED.len();
    if segments == 0 || !dim.is_multiple_of(segments) {
        return Err(Error::config(format!(
            "feature dimension {dim} is not divisible into {segments} segments"
        )));
    }
    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record?;
        let num = |i: usize| -> Result<f64> {
            record[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::config(format!("column {i}: {e}")))
        };
        let environment = match record[2].trim() {
            "" => None,
            s => Some(s.parse()?),
        };
        let values = (5..record.len()).map(num).collect::<Result<Vec<_>>>()?;
        samples.push(LabeledSample {
            feature: DoaFeature::new(values, segments, dim / segments)?,
            label: record[1].parse()?,
            meta: SampleMeta {
                recording_id: record[0].to_string(),
                environment,
                motion: record[3].parse()?,
                t_e: num(4)?,
                augmented: false,
            },
        });
    }
    Ok(samples)
}

pub fn read_features_csv(path: impl AsRef<Path>, segments: usize) -> Result<Vec<LabeledSample>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    features_from_csv(&text, segments)
}
