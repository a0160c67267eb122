//! Seeded T-junction benchmarks in the layout expected by the dataset module.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::geometry::{Point, Wall};
use super::render::{render, RenderedRecording};
use super::scenario::{ArrayPose, Scenario, SignalSpec, TonalSpec, Waypoint};
use crate::beamform::argmax_doa;
use crate::dataset::{extract_windows, ManifestEntry, RecordingManifest};
use crate::error::{Error, Result};
use crate::features::{
    doa_response, extract_feature, Class, Environment, LabeledSample, Motion, PipelineConfig,
};
use crate::seed::derive_seed;
use crate::signal::{write_wav, ArrayGeometry, WavEncoding, DEFAULT_SAMPLE_RATE};

/// How far the buildings extend away from the junction, in meters.
const BUILDING_REACH: f64 = 60.0;
const EGO_STREET_LENGTH: f64 = 30.0;

/// Inclusive `[lo, hi]` draw range.
pub type Range = (f64, f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub environment: Environment,
    pub per_class: usize,
    pub seed: u64,
    pub microphones: usize,
    pub array_width: f64,
    pub array_height: f64,
    /// Distance from the array to the near building line of the cross street.
    pub standoff: Range,
    pub ego_street_width: Range,
    pub cross_street_width: Range,
    pub speed_kmh: Range,
    /// Speed while crossing the junction; the source slows to it at t0 if
    /// it is approaching faster.
    pub crossing_speed_kmh: Range,
    /// Lane of right approaches as a fraction of the cross-street width,
    /// measured from the near building line; left approaches use the
    /// complementary lane.
    pub lane_position: Range,
    /// Time the source travels before it becomes visible.
    pub lead_time: Range,
    /// Recording time kept after the source becomes visible.
    pub after_t0: f64,
    pub none_duration: Range,
    pub snr_db: Range,
    pub tonal_probability: f64,
    pub reflection_gain: f64,
    pub sample_rate: u32,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            environment: Environment::A,
            per_class: 10,
            seed: 0,
            microphones: 56,
            array_width: 0.8,
            array_height: 0.7,
            standoff: (7.0, 10.0),
            ego_street_width: (6.0, 8.0),
            cross_street_width: (6.0, 8.0),
            speed_kmh: (10.0, 30.0),
            crossing_speed_kmh: (6.0, 12.0),
            lane_position: (0.6, 0.8),
            lead_time: (3.5, 6.0),
            after_t0: 3.0,
            none_duration: (6.0, 10.0),
            snr_db: (10.0, 20.0),
            tonal_probability: 0.5,
            reflection_gain: 1.0,
            sample_rate: DEFAULT_SAMPLE_RATE,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.per_class == 0 {
            return Err(Error::config("per_class must be at least 1"));
        }
        if self.microphones < 2 {
            return Err(Error::config(
                "the benchmark array needs at least two microphones",
            ));
        }
        let ranges = [
            ("standoff", self.standoff),
            ("ego_street_width", self.ego_street_width),
            ("cross_street_width", self.cross_street_width),
            ("speed_kmh", self.speed_kmh),
            ("crossing_speed_kmh", self.crossing_speed_kmh),
            ("lane_position", self.lane_position),
            ("lead_time", self.lead_time),
            ("none_duration", self.none_duration),
            ("snr_db", self.snr_db),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::config(format!("{name} range [{lo}, {hi}] is empty")));
            }
        }
        if self.standoff.0 <= 0.0
            || self.ego_street_width.0 <= 0.0
            || self.cross_street_width.0 <= 0.0
        {
            return Err(Error::config("street dimensions must be positive"));
        }
        if self.speed_kmh.0 <= 0.0
            || self.crossing_speed_kmh.0 <= 0.0
            || self.lead_time.0 <= 0.0
            || self.after_t0 <= 0.0
        {
            return Err(Error::config(
                "speed, lead time and after_t0 must be positive",
            ));
        }
        if !(self.lane_position.0 > 0.0 && self.lane_position.1 < 1.0) {
            return Err(Error::config(
                "lane_position must lie strictly inside (0, 1)",
            ));
        }
        if !(0.0..=1.0).contains(&self.tonal_probability) {
            return Err(Error::config("tonal_probability must lie in [0, 1]"));
        }
        Ok(())
    }

    /// The shared array used by every recording of the benchmark.
    pub fn geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::random_planar(
            self.microphones,
            self.array_width,
            self.array_height,
            derive_seed(self.seed, "geometry"),
        )
    }
}

/// T-junction dimensions in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Junction {
    pub standoff: f64,
    pub ego_width: f64,
    pub cross_width: f64,
}

/// Walls of a T-junction in plan view. The ego street runs along +y between
/// `x = ±ego_width/2` up to the cross street at `y = standoff`; type A adds
/// the facade across the junction at `y = standoff + cross_width`.
pub fn t_junction(environment: Environment, j: Junction) -> Vec<Wall> {
    let (h, d) = (j.ego_width / 2.0, j.standoff);
    let mut walls = vec![
        Wall::new(Point::new(-h, -EGO_STREET_LENGTH), Point::new(-h, d)),
        Wall::new(Point::new(-BUILDING_REACH, d), Point::new(-h, d)),
        Wall::new(Point::new(h, -EGO_STREET_LENGTH), Point::new(h, d)),
        Wall::new(Point::new(h, d), Point::new(BUILDING_REACH, d)),
    ];
    if environment == Environment::A {
        let far = d + j.cross_width;
        walls.push(Wall::new(
            Point::new(-BUILDING_REACH, far),
            Point::new(BUILDING_REACH, far),
        ));
    }
    walls
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): Range) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Scenario number `index` of class `label` (left, right or none).
pub fn benchmark_scenario(
    config: &BenchmarkConfig,
    geometry: &ArrayGeometry,
    label: Class,
    index: usize,
) -> Result<Scenario> {
    if label == Class::Front {
        return Err(Error::config("benchmark scenes are left, right or none"));
    }
    let seed = derive_seed(config.seed, &format!("scene/{label}/{index}"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let junction = Junction {
        standoff: draw(&mut rng, config.standoff),
        ego_width: draw(&mut rng, config.ego_street_width),
        cross_width: draw(&mut rng, config.cross_street_width),
    };
    let array_x = rng.random_range(-0.5..=0.5);
    let signal = SignalSpec {
        tonal: (rng.random::<f64>() < config.tonal_probability).then(|| TonalSpec {
            f0: rng.random_range(90.0..=140.0),
            harmonics: 4,
            gain: rng.random_range(0.3..=1.0),
        }),
        ..SignalSpec::default()
    };
    let snr_db = draw(&mut rng, config.snr_db);

    let (path, duration) = if label == Class::None {
        (Vec::new(), draw(&mut rng, config.none_duration))
    } else {
        let v = draw(&mut rng, config.speed_kmh) / 3.6;
        let v_cross = v.min(draw(&mut rng, config.crossing_speed_kmh) / 3.6);
        let lead = draw(&mut rng, config.lead_time);
        // Right-hand traffic: vehicles coming from the right drive in the far
        // lane, vehicles from the left in the near one.
        let lane = draw(&mut rng, config.lane_position);
        let lane = if label == Class::Right {
            lane
        } else {
            1.0 - lane
        };
        let lane_y = junction.standoff + junction.cross_width * lane;
        // Lateral offset at which the near corner stops occluding the lane.
        let h = junction.ego_width / 2.0;
        let x_los = array_x + (h - array_x) * lane_y / junction.standoff;
        let start = x_los + v * lead;
        let duration = lead + config.after_t0;
        let side = if label == Class::Right { 1.0 } else { -1.0 };
        let path = vec![
            Waypoint {
                t: 0.0,
                x: side * start,
                y: lane_y,
            },
            Waypoint {
                t: lead,
                x: side * x_los,
                y: lane_y,
            },
            Waypoint {
                t: duration,
                x: side * (x_los - v_cross * config.after_t0),
                y: lane_y,
            },
        ];
        (path, duration)
    };
    let mut walls = t_junction(config.environment, junction);
    let mut array_x = array_x;
    if label == Class::Left {
        array_x = -array_x;
        for w in &mut walls {
            *w = w.mirrored();
        }
    }
    Ok(Scenario {
        walls,
        path,
        signal,
        array: ArrayPose {
            x: array_x,
            y: 0.0,
            heading_deg: 0.0,
            geometry: geometry.clone(),
        },
        label,
        duration,
        sample_rate: config.sample_rate,
        seed,
        snr_db,
        reflection_gain: config.reflection_gain,
        environment: Some(config.environment),
    })
}

/// Every scenario of the benchmark: `per_class` each of left, right and none,
/// interleaved in that order.
pub fn benchmark_scenarios(config: &BenchmarkConfig) -> Result<(ArrayGeometry, Vec<Scenario>)> {
    config.validate()?;
    let geometry = config.geometry()?;
    let mut scenarios = Vec::with_capacity(3 * config.per_class);
    for i in 0..config.per_class {
        for label in [Class::Left, Class::Right, Class::None] {
            scenarios.push(benchmark_scenario(config, &geometry, label, i)?);
        }
    }
    Ok((geometry, scenarios))
}

/// Renders scenarios in parallel; output order follows input order.
pub fn render_all(scenarios: &[Scenario]) -> Result<Vec<RenderedRecording>> {
    scenarios.par_iter().map(render).collect()
}

pub fn recording_name(index: usize, label: Class) -> String {
    format!("rec_{index:04}_{label}")
}

/// One extracted sample of an in-memory benchmark with the direction-only
/// baseline's peak azimuth over the same window.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSample {
    pub sample: LabeledSample,
    pub azimuth: f64,
}

/// Renders every scene and extracts its samples without touching disk.
/// Recordings are dropped as soon as their windows are featurized.
pub fn benchmark_samples(
    config: &BenchmarkConfig,
    pipeline: &PipelineConfig,
) -> Result<(ArrayGeometry, Vec<BenchmarkSample>)> {
    let (geometry, scenarios) = benchmark_scenarios(config)?;
    let per_scene = scenarios
        .par_iter()
        .enumerate()
        .map(|(i, scenario)| -> Result<Vec<BenchmarkSample>> {
            let rec = render(scenario)?;
            let entry = ManifestEntry {
                wav: PathBuf::from(format!("{}.wav", recording_name(i, scenario.label))),
                geometry: PathBuf::from("geometry.json"),
                situation: scenario.label,
                environment: config.environment,
                motion: Motion::Static,
                t0: rec.t0,
                tau0: None,
            };
            extract_windows(&entry, &rec.clip, pipeline)?
                .into_iter()
                .map(|w| {
                    Ok(BenchmarkSample {
                        azimuth: argmax_doa(&doa_response(&w.audio, &geometry, pipeline)?),
                        sample: LabeledSample {
                            feature: extract_feature(&w.audio, &geometry, pipeline)?,
                            label: w.label,
                            meta: w.meta,
                        },
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((geometry, per_scene.into_iter().flatten().collect()))
}

/// Renders the benchmark into `out_dir`: one 24-bit WAV and one scenario JSON
/// per recording, `geometry.json` and `manifest.csv`.
pub fn make_benchmark(
    config: &BenchmarkConfig,
    out_dir: &Path,
    preamble: &[String],
) -> Result<RecordingManifest> {
    let (geometry, scenarios) = benchmark_scenarios(config)?;
    let unwritable = |path: &Path, source| Error::Unwritable {
        path: path.to_path_buf(),
        source,
    };
    std::fs::create_dir_all(out_dir.join("scenarios")).map_err(|e| unwritable(out_dir, e))?;
    let geometry_path = out_dir.join("geometry.json");
    geometry.save(&geometry_path)?;

    let entries = scenarios
        .par_iter()
        .enumerate()
        .map(|(i, scenario)| -> Result<ManifestEntry> {
            let name = recording_name(i, scenario.label);
            let rec = render(scenario)?;
            let wav: PathBuf = out_dir.join(format!("{name}.wav"));
            write_wav(&rec.clip, &wav, WavEncoding::Pcm24)?;
            scenario.save(out_dir.join("scenarios").join(format!("{name}.json")))?;
            Ok(ManifestEntry {
                wav,
                geometry: geometry_path.clone(),
                situation: scenario.label,
                environment: config.environment,
                motion: Motion::Static,
                t0: rec.t0,
                tau0: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = RecordingManifest { entries };
    let manifest_path = out_dir.join("manifest.csv");
    std::fs::write(&manifest_path, manifest.to_csv(out_dir, preamble)?)
        .map_err(|e| unwritable(&manifest_path, e))?;
    Ok(manifest)
}
