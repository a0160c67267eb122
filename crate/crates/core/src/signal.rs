//! Multichannel audio clips, microphone array geometry, WAV I/O and window
//! functions.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 48_000;
pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

/// Synchronized M-channel recording. Samples are stored channel-major
/// (`channels × frames`) and are dimensionless amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    sample_rate: u32,
    samples: Array2<f64>,
}

impl AudioClip {
    pub fn new(samples: Array2<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invariant("sample rate must be positive"));
        }
        if samples.nrows() == 0 {
            return Err(Error::invariant("clip needs at least one channel"));
        }
        if samples.ncols() == 0 {
            return Err(Error::invariant("clip needs at least one sample"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invariant("clip contains non-finite samples"));
        }
        Ok(Self {
            sample_rate,
            samples,
        })
    }

    pub fn from_channels(channels: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self> {
        let m = channels.len();
        let n = channels.first().map_or(0, Vec::len);
        if channels.iter().any(|c| c.len() != n) {
            return Err(Error::invariant("all channels must have identical length"));
        }
        let flat: Vec<f64> = channels.into_iter().flatten().collect();
        let samples =
            Array2::from_shape_vec((m, n), flat).map_err(|e| Error::invariant(e.to_string()))?;
        Self::new(samples, sample_rate)
    }

    pub fn channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / f64::from(self.sample_rate)
    }

    pub fn samples(&self) -> &Array2<f64> {
        &self.samples
    }

    pub fn channel(&self, index: usize) -> ArrayView1<'_, f64> {
        self.samples.row(index)
    }

    /// Copy of samples `[start, start + len)` on every channel.
    pub fn slice(&self, start: usize, len: usize) -> Result<AudioClip> {
        if len == 0 || start + len > self.len() {
            return Err(Error::ClipTooShort {
                required: start + len.max(1),
                available: self.len(),
            });
        }
        let part = self
            .samples
            .slice(ndarray::s![.., start..start + len])
            .to_owned();
        Ok(AudioClip {
            sample_rate: self.sample_rate,
            samples: part,
        })
    }

    /// The trailing `len` samples.
    pub fn tail(&self, len: usize) -> Result<AudioClip> {
        if len > self.len() {
            return Err(Error::ClipTooShort {
                required: len,
                available: self.len(),
            });
        }
        self.slice(self.len() - len, len)
    }

    /// Keeps the listed channels in the listed order.
    pub fn select_channels(&self, indices: &[usize]) -> Result<AudioClip> {
        if indices.is_empty() {
            return Err(Error::invariant("channel selection is empty"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.channels()) {
            return Err(Error::invariant(format!(
                "channel {bad} out of range for {} channels",
                self.channels()
            )));
        }
        Ok(AudioClip {
            sample_rate: self.sample_rate,
            samples: self.samples.select(Axis(0), indices),
        })
    }

    pub fn scaled(&self, gain: f64) -> AudioClip {
        AudioClip {
            sample_rate: self.sample_rate,
            samples: &self.samples * gain,
        }
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn mean_square(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum::<f64>() / self.samples.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WavEncoding {
    Pcm24,
    Float32,
}

fn hound_error(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(source) => Error::Unreadable {
            path: path.to_path_buf(),
            source,
        },
        hound::Error::Unsupported => Error::UnsupportedEncoding("unsupported WAV subformat".into()),
        hound::Error::TooWide => Error::UnsupportedEncoding("sample width exceeds 32 bits".into()),
        hound::Error::FormatError(msg) => Error::MalformedWav(msg.to_string()),
        other => Error::MalformedWav(other.to_string()),
    }
}

/// Reads 16/24-bit integer PCM or 32-bit IEEE float WAV data. Integer PCM is
/// scaled by `2^(bits-1)`.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader =
        hound::WavReader::new(BufReader::new(file)).map_err(|e| hound_error(path, e))?;
    let spec = reader.spec();
    let m = usize::from(spec.channels);
    if m == 0 {
        return Err(Error::MalformedWav("zero channels".into()));
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, bits @ (16 | 24)) => {
            let scale = f64::from(1_u32 << (bits - 1));
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| hound_error(path, e))?
        }
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| hound_error(path, e))?,
        (format, bits) => {
            return Err(Error::UnsupportedEncoding(format!("{format:?} {bits}-bit")));
        }
    };

    if interleaved.is_empty() {
        return Err(Error::EmptyStream);
    }
    if !interleaved.len().is_multiple_of(m) {
        return Err(Error::MalformedWav("truncated final frame".into()));
    }
    let n = interleaved.len() / m;
    let samples = Array2::from_shape_vec((n, m), interleaved)
        .map_err(|e| Error::MalformedWav(e.to_string()))?
        .reversed_axes()
        .as_standard_layout()
        .to_owned();
    AudioClip::new(samples, spec.sample_rate)
}

/// Writes a clip; amplitudes outside `[-1, 1]` are rejected, never clipped.
pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>, encoding: WavEncoding) -> Result<()> {
    let path = path.as_ref();
    for (ch, row) in clip.samples.outer_iter().enumerate() {
        if let Some(&value) = row.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::AmplitudeOutOfRange { channel: ch, value });
        }
    }
    let channels = u16::try_from(clip.channels())
        .map_err(|_| Error::UnsupportedEncoding("more than 65535 channels".into()))?;
    let spec = match encoding {
        WavEncoding::Pcm24 => hound::WavSpec {
            channels,
            sample_rate: clip.sample_rate,
            bits_per_sample: 24,
            sample_format: hound::SampleFormat::Int,
        },
        WavEncoding::Float32 => hound::WavSpec {
            channels,
            sample_rate: clip.sample_rate,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        },
    };
    let to_write = |e: hound::Error| match e {
        hound::Error::IoError(source) => Error::Unwritable {
            path: path.to_path_buf(),
            source,
        },
        other => Error::MalformedWav(other.to_string()),
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(to_write)?;
    const PCM24_MAX: f64 = 8_388_607.0;
    for t in 0..clip.len() {
        for ch in 0..clip.channels() {
            let v = clip.samples[[ch, t]];
            match encoding {
                WavEncoding::Pcm24 => {
                    let q = (v * 8_388_608.0).round().clamp(-8_388_608.0, PCM24_MAX) as i32;
                    writer.write_sample(q).map_err(to_write)?;
                }
                WavEncoding::Float32 => writer.write_sample(v as f32).map_err(to_write)?,
            }
        }
    }
    writer.finalize().map_err(to_write)
}

/// Periodic (DFT-even) Hann window; `n = 1` yields `[1.0]`.
pub fn hann_window(n: usize) -> Result<Vec<f64>> {
    match n {
        0 => Err(Error::config("window length must be positive")),
        1 => Ok(vec![1.0]),
        _ => Ok((0..n)
            .map(|k| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()))
            .collect()),
    }
}

/// Microphone positions in the array-local frame (x right, y up, z forward),
/// in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub speed_of_sound: f64,
    pub positions: Vec<[f64; 3]>,
}

impl ArrayGeometry {
    pub fn new(positions: Vec<[f64; 3]>, speed_of_sound: f64) -> Result<Self> {
        let geometry = Self {
            speed_of_sound,
            positions,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.speed_of_sound.is_finite() && self.speed_of_sound > 0.0) {
            return Err(Error::invariant("speed of sound must be positive"));
        }
        if self.positions.is_empty() {
            return Err(Error::invariant("geometry has no microphones"));
        }
        if self.positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invariant("non-finite microphone coordinate"));
        }
        for (i, a) in self.positions.iter().enumerate() {
            if self.positions[i + 1..].contains(a) {
                return Err(Error::invariant(format!(
                    "microphone {i} shares its coordinates with another microphone"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
        let geometry: Self = serde_json::from_str(&text).map_err(|e| Error::Corrupt {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        geometry.validate()?;
        Ok(geometry)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|source| Error::Unwritable {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let positions = indices
            .iter()
            .map(|&i| {
                self.positions.get(i).copied().ok_or_else(|| {
                    Error::invariant(format!("microphone {i} out of range for {}", self.len()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(positions, self.speed_of_sound)
    }

    /// Reflects the array across its median (y-z) plane.
    pub fn mirrored(&self) -> Self {
        Self {
            speed_of_sound: self.speed_of_sound,
            positions: self.positions.iter().map(|p| [-p[0], p[1], p[2]]).collect(),
        }
    }

    pub fn centroid(&self) -> [f64; 3] {
        let n = self.len() as f64;
        let mut c = [0.0; 3];
        for p in &self.positions {
            for (acc, v) in c.iter_mut().zip(p) {
                *acc += v / n;
            }
        }
        c
    }

    /// Semi-random planar layout in the x-y plane (z = 0), centered on the
    /// origin: jittered cells of a near-square grid over a `width × height`
    /// frame, so the density stays homogeneous while inter-microphone
    /// distances vary.
    pub fn random_planar(count: usize, width: f64, height: f64, seed: u64) -> Result<Self> {
        if count < 2 {
            return Err(Error::config(
                "a planar array needs at least two microphones",
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols = ((count as f64 * width / height).sqrt().ceil() as usize).max(1);
        let rows = count.div_ceil(cols);
        let mut cells: Vec<(usize, usize)> = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| (r, c)))
            .collect();
        cells.shuffle(&mut rng);
        cells.truncate(count);
        cells.sort_unstable();
        let (cw, ch) = (width / cols as f64, height / rows as f64);
        let positions = cells
            .into_iter()
            .map(|(r, c)| {
                let x = -width / 2.0 + (c as f64 + rng.random_range(0.15..0.85)) * cw;
                let y = -height / 2.0 + (r as f64 + rng.random_range(0.15..0.85)) * ch;
                [x, y, 0.0]
            })
            .collect();
        Self::new(positions, DEFAULT_SPEED_OF_SOUND)
    }

    /// Mirror-symmetric planar layout: `pairs` microphones at random positions
    /// with `x > 0` plus their reflections at `-x`.
    pub fn symmetric_planar(pairs: usize, width: f64, height: f64, seed: u64) -> Result<Self> {
        let half = Self::random_planar(pairs.max(2), width / 2.0, height, seed)?;
        let mut positions: Vec<[f64; 3]> = half
            .positions
            .iter()
            .take(pairs)
            .map(|p| [p[0] + width / 4.0, p[1], p[2]])
            .collect();
        let mirrored: Vec<[f64; 3]> = positions.iter().map(|p| [-p[0], p[1], p[2]]).collect();
        positions.extend(mirrored);
        Self::new(positions, DEFAULT_SPEED_OF_SOUND)
    }
}
