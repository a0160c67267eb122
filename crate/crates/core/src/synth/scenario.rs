//! Scene description: walls, source trajectory, source signal and array pose.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::geometry::{Point, Wall};
use crate::error::{Error, Result};
use crate::features::{Class, Environment};
use crate::signal::{ArrayGeometry, DEFAULT_SAMPLE_RATE};

/// Source position at time `t` seconds after the recording starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// Harmonic comb `Σ_h sin(2π h f0 t + φ_h) / h` mixed into the source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TonalSpec {
    pub f0: f64,
    pub harmonics: usize,
    /// RMS of the comb relative to the RMS of the noise component.
    pub gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    /// RMS amplitude of the source signal at 1 m.
    pub level: f64,
    pub f_min: f64,
    pub f_max: f64,
    pub tonal: Option<TonalSpec>,
}

impl Default for SignalSpec {
    fn default() -> Self {
        Self {
            level: 0.05,
            f_min: 50.0,
            f_max: 1500.0,
            tonal: None,
        }
    }
}

/// Array placement in the plan view. Heading 0 faces +y; positive headings
/// turn clockwise (toward +x). Array-local x maps to the right, z to the
/// forward direction and y to height above the propagation plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayPose {
    pub x: f64,
    pub y: f64,
    pub heading_deg: f64,
    pub geometry: ArrayGeometry,
}

impl ArrayPose {
    pub fn center(&self) -> Point {
        Point::new(self.x, self.y)
    }

    /// Plan position and height offset of every microphone.
    pub fn microphones(&self) -> Vec<(Point, f64)> {
        let h = self.heading_deg.to_radians();
        let (s, c) = h.sin_cos();
        self.geometry
            .positions
            .iter()
            .map(|p| {
                let x = self.x + p[0] * c + p[2] * s;
                let y = self.y - p[0] * s + p[2] * c;
                (Point::new(x, y), p[1])
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub walls: Vec<Wall>,
    /// Piecewise-linear source trajectory; empty when no source is present.
    pub path: Vec<Waypoint>,
    pub signal: SignalSpec,
    pub array: ArrayPose,
    pub label: Class,
    pub duration: f64,
    pub sample_rate: u32,
    pub seed: u64,
    /// Background white noise relative to the source level at 10 m.
    pub snr_db: f64,
    #[serde(default = "unit_gain")]
    pub reflection_gain: f64,
    #[serde(default)]
    pub environment: Option<Environment>,
}

fn unit_gain() -> f64 {
    1.0
}

pub const DEFAULT_SNR_DB: f64 = 15.0;

impl Scenario {
    /// A scene with no walls, no source and default signal settings.
    pub fn empty(array: ArrayPose, duration: f64, seed: u64) -> Self {
        Self {
            walls: Vec::new(),
            path: Vec::new(),
            signal: SignalSpec::default(),
            array,
            label: Class::None,
            duration,
            sample_rate: DEFAULT_SAMPLE_RATE,
            seed,
            snr_db: DEFAULT_SNR_DB,
            reflection_gain: 1.0,
            environment: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::config("scenario duration must be positive"));
        }
        if self.sample_rate == 0 {
            return Err(Error::config("sample rate must be positive"));
        }
        if matches!(self.label, Class::Front) {
            return Err(Error::config("scenario label must be left, right or none"));
        }
        if self.label == Class::None && !self.path.is_empty() {
            return Err(Error::config("a none scenario has no source path"));
        }
        if self.label != Class::None && self.path.is_empty() {
            return Err(Error::config(format!(
                "a {} scenario needs a source path",
                self.label
            )));
        }
        for (i, w) in self.walls.iter().enumerate() {
            let finite = [w.a.x, w.a.y, w.b.x, w.b.y].iter().all(|v| v.is_finite());
            if !finite || w.length() <= 0.0 {
                return Err(Error::config(format!("wall {i} is degenerate")));
            }
        }
        for pair in self.path.windows(2) {
            if !(pair[1].t > pair[0].t) {
                return Err(Error::config("waypoint times must increase strictly"));
            }
        }
        if self
            .path
            .iter()
            .any(|p| !(p.t.is_finite() && p.x.is_finite() && p.y.is_finite()))
        {
            return Err(Error::config("non-finite waypoint"));
        }
        let s = &self.signal;
        if !(s.level > 0.0 && s.f_min >= 0.0 && s.f_min < s.f_max) {
            return Err(Error::config(
                "signal needs a positive level and f_min < f_max",
            ));
        }
        if f64::from(self.sample_rate) / 2.0 < s.f_max {
            return Err(Error::config("signal band exceeds Nyquist"));
        }
        if let Some(t) = s.tonal {
            if !(t.f0 > 0.0 && t.harmonics >= 1 && t.gain >= 0.0) {
                return Err(Error::config(
                    "tonal comb needs f0 > 0, harmonics >= 1, gain >= 0",
                ));
            }
        }
        if !self.snr_db.is_finite() || !(self.reflection_gain >= 0.0) {
            return Err(Error::config(
                "snr and reflection gain must be finite and non-negative",
            ));
        }
        self.array.geometry.validate()
    }

    /// Source position at time `t`, clamped to the ends of the path.
    pub fn source_at(&self, t: f64) -> Option<Point> {
        let path = &self.path;
        let first = path.first()?;
        let last = path.last()?;
        if t <= first.t {
            return Some(Point::new(first.x, first.y));
        }
        if t >= last.t {
            return Some(Point::new(last.x, last.y));
        }
        let i = path.partition_point(|w| w.t <= t);
        let (a, b) = (path[i - 1], path[i]);
        let u = (t - a.t) / (b.t - a.t);
        Some(Point::new(a.x + u * (b.x - a.x), a.y + u * (b.y - a.y)))
    }

    /// Speeds of every path segment in m/s.
    pub fn speeds(&self) -> Vec<f64> {
        self.path
            .windows(2)
            .map(|p| (p[1].x - p[0].x).hypot(p[1].y - p[0].y) / (p[1].t - p[0].t))
            .collect()
    }

    /// Reflection of the whole scene across the array's forward axis
    /// (`x → 2·x_array − x`), including the microphone layout.
    pub fn mirrored(&self) -> Scenario {
        let axis = self.array.x;
        let flip = |p: Point| Point::new(2.0 * axis - p.x, p.y);
        let mut out = self.clone();
        out.walls = self
            .walls
            .iter()
            .map(|w| Wall::new(flip(w.a), flip(w.b)))
            .collect();
        out.path = self
            .path
            .iter()
            .map(|w| Waypoint {
                t: w.t,
                x: 2.0 * axis - w.x,
                y: w.y,
            })
            .collect();
        out.array.heading_deg = -self.array.heading_deg;
        out.array.geometry = self.array.geometry.mirrored();
        out.label = self.label.mirrored();
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
        let scenario: Scenario = serde_json::from_str(&text).map_err(|e| Error::Corrupt {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n").map_err(|source| {
            Error::Unwritable {
                path: path.to_path_buf(),
                source,
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pose() -> ArrayPose {
        ArrayPose {
            x: 0.0,
            y: 0.0,
            heading_deg: 0.0,
            geometry: ArrayGeometry::new(vec![[-0.2, 0.0, 0.0], [0.3, 0.1, 0.05]], 343.0).unwrap(),
        }
    }

    #[test]
    fn path_interpolation_and_clamping() {
        let mut s = Scenario::empty(pose(), 4.0, 1);
        s.label = Class::Right;
        s.path = vec![
            Waypoint {
                t: 0.0,
                x: 10.0,
                y: 5.0,
            },
            Waypoint {
                t: 2.0,
                x: 0.0,
                y: 5.0,
            },
        ];
        s.validate().unwrap();
        assert_eq!(s.source_at(1.0), Some(Point::new(5.0, 5.0)));
        assert_eq!(s.source_at(-1.0), Some(Point::new(10.0, 5.0)));
        assert_eq!(s.source_at(3.0), Some(Point::new(0.0, 5.0)));
        assert_eq!(s.speeds(), vec![5.0]);
    }

    #[test]
    fn heading_rotates_clockwise() {
        let mut p = pose();
        p.heading_deg = 90.0;
        let mics = p.microphones();
        // Facing +x, the array's right points to -y.
        assert!((mics[0].0.x - 0.0).abs() < 1e-12 && (mics[0].0.y - 0.2).abs() < 1e-12);
        assert!((mics[1].0.x - 0.05).abs() < 1e-12 && (mics[1].0.y + 0.3).abs() < 1e-12);
        assert_eq!(mics[1].1, 0.1);
    }

    #[test]
    fn mirroring_is_an_involution() {
        let mut s = Scenario::empty(pose(), 4.0, 1);
        s.array.x = 1.5;
        s.array.heading_deg = 10.0;
        s.label = Class::Left;
        s.walls = vec![Wall::new(Point::new(-3.0, 0.0), Point::new(-3.0, 9.0))];
        s.path = vec![
            Waypoint {
                t: 0.0,
                x: -8.0,
                y: 12.0,
            },
            Waypoint {
                t: 4.0,
                x: 6.0,
                y: 12.0,
            },
        ];
        let m = s.mirrored();
        assert_eq!(m.label, Class::Right);
        assert_eq!(m.walls[0].a, Point::new(6.0, 0.0));
        let (a, b) = (s.array.microphones(), m.array.microphones());
        for ((pa, _), (pb, _)) in a.iter().zip(&b) {
            assert!((pa.x - (3.0 - pb.x)).abs() < 1e-12 && (pa.y - pb.y).abs() < 1e-12);
        }
        assert_eq!(m.mirrored(), s);
    }

    #[test]
    fn invalid_scenarios() {
        let mut s = Scenario::empty(pose(), 4.0, 1);
        s.walls = vec![Wall::new(Point::new(1.0, 1.0), Point::new(1.0, 1.0))];
        assert!(s.validate().is_err());
        let mut s = Scenario::empty(pose(), 4.0, 1);
        s.label = Class::Left;
        assert!(s.validate().is_err());
        s.path = vec![
            Waypoint {
                t: 1.0,
                x: 0.0,
                y: 0.0,
            },
            Waypoint {
                t: 1.0,
                x: 1.0,
                y: 0.0,
            },
        ];
        assert!(s.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = Scenario::empty(pose(), 4.0, 1);
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<Scenario>(&text).unwrap(), s);
    }
}
