//! Time-domain rendering of scenarios: moving-delay direct and first-order
//! reflected paths plus white background noise.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::geometry::{image_sources, line_of_sight, Point};
use super::scenario::{Scenario, SignalSpec};
use crate::error::{Error, Result};
use crate::features::Class;
use crate::seed::derive_seed;
use crate::signal::{ArrayGeometry, AudioClip};

/// Path validity is re-evaluated once per block of this many samples.
pub const VALIDITY_BLOCK: usize = 256;
/// Longest propagation delay the renderer can represent.
pub const MAX_DELAY_SECONDS: f64 = 1.0;
/// Distance at which the scenario's SNR is referenced.
pub const NOISE_REFERENCE_DISTANCE: f64 = 10.0;
const MIN_DISTANCE: f64 = 0.5;
const PEAK_LIMIT: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedRecording {
    pub clip: AudioClip,
    pub label: Class,
    /// First time the source is visible from the array center.
    pub t0: Option<f64>,
    pub scenario: Scenario,
}

/// Pink noise band-limited to `[f_min, f_max]`, plus the optional harmonic
/// comb, scaled to RMS `spec.level`.
pub fn source_signal(spec: &SignalSpec, len: usize, sample_rate: u32, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let fs = f64::from(sample_rate);
    let mut spectrum = vec![Complex64::new(0.0, 0.0); len];
    for k in 1..len.div_ceil(2) {
        let f = k as f64 * fs / len as f64;
        let (re, im): (f64, f64) = (normal.sample(&mut rng), normal.sample(&mut rng));
        if f >= spec.f_min && f <= spec.f_max {
            let c = Complex64::new(re, im) / f.sqrt();
            spectrum[k] = c;
            spectrum[len - k] = c.conj();
        }
    }
    FftPlanner::<f64>::new()
        .plan_fft_inverse(len)
        .process(&mut spectrum);
    let mut out: Vec<f64> = spectrum.iter().map(|c| c.re).collect();
    normalize_rms(&mut out);

    if let Some(tonal) = spec.tonal {
        let mut comb = vec![0.0; len];
        for h in 1..=tonal.harmonics {
            let phase = rand::Rng::random_range(&mut rng, 0.0..std::f64::consts::TAU);
            let w = std::f64::consts::TAU * h as f64 * tonal.f0 / fs;
            for (n, v) in comb.iter_mut().enumerate() {
                *v += (w * n as f64 + phase).sin() / h as f64;
            }
        }
        normalize_rms(&mut comb);
        for (o, c) in out.iter_mut().zip(&comb) {
            *o += tonal.gain * c;
        }
        normalize_rms(&mut out);
    }
    for v in &mut out {
        *v *= spec.level;
    }
    out
}

fn normalize_rms(x: &mut [f64]) {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        for v in x.iter_mut() {
            *v /= rms;
        }
    }
}

fn interpolate(signal: &[f64], pos: f64) -> f64 {
    if pos < 0.0 {
        return 0.0;
    }
    let i = pos.floor() as usize;
    if i + 1 >= signal.len() {
        return 0.0;
    }
    let frac = pos - i as f64;
    signal[i] * (1.0 - frac) + signal[i + 1] * frac
}

/// White-noise standard deviation implied by the scenario's SNR.
pub fn noise_std(scenario: &Scenario) -> f64 {
    scenario.signal.level / NOISE_REFERENCE_DISTANCE / 10f64.powf(scenario.snr_db / 20.0)
}

/// Time of the first output sample at which the source is visible from the
/// array center.
pub fn first_line_of_sight(scenario: &Scenario) -> Option<f64> {
    let fs = f64::from(scenario.sample_rate);
    let n = (scenario.duration * fs).round() as usize;
    let center = scenario.array.center();
    (0..n).map(|i| i as f64 / fs).find(|&t| {
        scenario
            .source_at(t)
            .is_some_and(|p| line_of_sight(&scenario.walls, p, center))
    })
}

pub fn render(scenario: &Scenario) -> Result<RenderedRecording> {
    scenario.validate()?;
    let fs = f64::from(scenario.sample_rate);
    let n_out = (scenario.duration * fs).round() as usize;
    if n_out == 0 {
        return Err(Error::config("scenario renders to zero samples"));
    }
    let c = scenario.array.geometry.speed_of_sound;
    let pad = (MAX_DELAY_SECONDS * fs).ceil() as usize;
    let mics = scenario.array.microphones();

    let t0 =
        match scenario.label {
            Class::Left | Class::Right => Some(first_line_of_sight(scenario).ok_or_else(|| {
                Error::invariant("the source never becomes visible from the array")
            })?),
            _ => None,
        };

    let has_source = !scenario.path.is_empty();
    let source = if has_source {
        source_signal(
            &scenario.signal,
            n_out + pad,
            scenario.sample_rate,
            derive_seed(scenario.seed, "source"),
        )
    } else {
        Vec::new()
    };
    let positions: Vec<Point> = if has_source {
        (0..n_out)
            .map(|n| scenario.source_at(n as f64 / fs).expect("path present"))
            .collect()
    } else {
        Vec::new()
    };
    let sigma = noise_std(scenario);
    let walls = &scenario.walls;
    let blocks = n_out.div_ceil(VALIDITY_BLOCK);

    let channels: Vec<Vec<f64>> = mics
        .par_iter()
        .enumerate()
        .map(|(m, &(mic, height))| {
            let mut out = vec![0.0; n_out];
            if has_source {
                let samples_per_meter = fs / c;
                let add_path = |n: usize, p: Point, gain: f64, out: &mut [f64]| {
                    let (dx, dy) = (p.x - mic.x, p.y - mic.y);
                    let d = (dx * dx + dy * dy + height * height).sqrt();
                    let pos = (n + pad) as f64 - d * samples_per_meter;
                    out[n] += gain / d.max(MIN_DISTANCE) * interpolate(&source, pos);
                };
                let reflections: Vec<_> = walls.iter().map(|w| w.reflection()).collect();
                for b in 0..blocks {
                    let range = b * VALIDITY_BLOCK..((b + 1) * VALIDITY_BLOCK).min(n_out);
                    let mid = positions[(range.start + range.end) / 2];
                    if line_of_sight(walls, mid, mic) {
                        for n in range.clone() {
                            add_path(n, positions[n], 1.0, &mut out);
                        }
                    }
                    if scenario.reflection_gain == 0.0 {
                        continue;
                    }
                    for image in image_sources(walls, mid) {
                        if image.reflection_point(walls, mid, mic).is_none() {
                            continue;
                        }
                        let map = reflections[image.wall];
                        for n in range.clone() {
                            add_path(
                                n,
                                map.apply(positions[n]),
                                scenario.reflection_gain,
                                &mut out,
                            );
                        }
                    }
                }
            }
            if sigma > 0.0 {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(scenario.seed, &format!("noise/{m}")));
                let normal = Normal::new(0.0, sigma).expect("positive std");
                for v in &mut out {
                    *v += normal.sample(&mut rng);
                }
            }
            out
        })
        .collect();

    let mut clip = AudioClip::from_channels(channels, scenario.sample_rate)?;
    let peak = clip.peak();
    if peak > PEAK_LIMIT {
        clip = clip.scaled(PEAK_LIMIT / peak);
    }
    Ok(RenderedRecording {
        clip,
        label: scenario.label,
        t0,
        scenario: scenario.clone(),
    })
}

/// Far-field plane wave from `azimuth_deg` on `geometry`: channel `i` is
/// `signal` delayed by the steering delay of microphone `i`, applied as an
/// exact (circular) phase shift in the frequency domain.
pub fn plane_wave(
    geometry: &ArrayGeometry,
    azimuth_deg: f64,
    signal: &[f64],
    sample_rate: u32,
) -> Result<AudioClip> {
    let delays = crate::beamform::steering_delays(geometry, azimuth_deg)?;
    let n = signal.len();
    if n == 0 {
        return Err(Error::EmptyStream);
    }
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let mut spectrum: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    forward.process(&mut spectrum);
    let fs = f64::from(sample_rate);
    let channels = delays
        .iter()
        .map(|&d| {
            let mut buf: Vec<Complex64> = spectrum
                .iter()
                .enumerate()
                .map(|(k, &x)| {
                    if 2 * k == n {
                        return Complex64::new(0.0, 0.0);
                    }
                    let f = if 2 * k < n {
                        k as f64
                    } else {
                        k as f64 - n as f64
                    } * fs
                        / n as f64;
                    x * Complex64::from_polar(1.0, -std::f64::consts::TAU * f * d)
                })
                .collect();
            inverse.process(&mut buf);
            buf.iter().map(|v| v.re / n as f64).collect()
        })
        .collect();
    AudioClip::from_channels(channels, sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::geometry::Wall;
    use crate::synth::scenario::{ArrayPose, Waypoint};

    fn array() -> ArrayPose {
        ArrayPose {
            x: 0.0,
            y: 0.0,
            heading_deg: 0.0,
            geometry: ArrayGeometry::random_planar(8, 0.8, 0.7, 3).unwrap(),
        }
    }

    #[test]
    fn source_spectrum_stays_in_band() {
        let spec = SignalSpec::default();
        let x = source_signal(&spec, 48_000, 48_000, 9);
        let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
        assert!((rms - spec.level).abs() < 1e-12);
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::<f64>::new()
            .plan_fft_forward(x.len())
            .process(&mut buf);
        // 1 Hz bins; energy outside [50, 1500] is numerical residue only.
        let outside: f64 = buf[..50]
            .iter()
            .chain(&buf[1501..24_000])
            .map(|c| c.norm_sqr())
            .sum();
        let inside: f64 = buf[50..=1500].iter().map(|c| c.norm_sqr()).sum();
        assert!(outside < 1e-20 * inside);
        // Pink: the octave 100-200 Hz carries about as much energy as 800-1600 Hz would.
        let low: f64 = buf[100..200].iter().map(|c| c.norm_sqr()).sum();
        let high: f64 = buf[700..1400].iter().map(|c| c.norm_sqr()).sum();
        assert!((low / high - 1.0).abs() < 0.3, "{}", low / high);
    }

    #[test]
    fn free_field_delay_and_gain() {
        // One mic at the origin, static source 3.43 m ahead: 10 ms = 480 samples.
        let pose = ArrayPose {
            geometry: ArrayGeometry::new(vec![[0.0, 0.0, 0.0], [0.5, 0.0, 0.0]], 343.0).unwrap(),
            ..array()
        };
        let mut s = Scenario::empty(pose, 0.5, 4);
        s.label = Class::Right;
        s.snr_db = 300.0;
        s.path = vec![
            Waypoint {
                t: 0.0,
                x: 0.0,
                y: 3.43,
            },
            Waypoint {
                t: 1.0,
                x: 0.0,
                y: 3.43,
            },
        ];
        let r = render(&s).unwrap();
        assert_eq!(r.t0, Some(0.0));
        let src = source_signal(&s.signal, 24_000 + 48_000, 48_000, derive_seed(4, "source"));
        for n in 1000..1100 {
            let expected = src[n + 48_000 - 480] / 3.43;
            assert!((r.clip.samples()[[0, n]] - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn none_scene_is_noise_only() {
        let s = Scenario::empty(array(), 1.0, 5);
        let r = render(&s).unwrap();
        assert_eq!(r.t0, None);
        let sigma = noise_std(&s);
        assert!(r.clip.mean_square() < 1.1 * sigma * sigma);
        assert!(r.clip.mean_square() > 0.9 * sigma * sigma);
    }

    #[test]
    fn occluded_source_is_silent_apart_from_noise() {
        let mut s = Scenario::empty(array(), 1.0, 6);
        s.label = Class::Left;
        s.snr_db = 300.0;
        s.reflection_gain = 0.0;
        s.walls = vec![Wall::new(Point::new(-5.0, 2.0), Point::new(5.0, 2.0))];
        s.path = vec![
            Waypoint {
                t: 0.0,
                x: 0.0,
                y: 4.0,
            },
            Waypoint {
                t: 1.0,
                x: -28.0,
                y: 4.0,
            },
        ];
        let r = render(&s).unwrap();
        let t0 = r.t0.unwrap();
        let n0 = (t0 * 48_000.0) as usize;
        // The center sees the source at x = -10 m (t = 0.357 s); no microphone
        // hears anything 0.1 s earlier.
        assert!(r
            .clip
            .samples()
            .slice(ndarray::s![.., ..n0 - 4800])
            .iter()
            .all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn never_visible_left_scene_is_rejected() {
        let mut s = Scenario::empty(array(), 0.2, 6);
        s.label = Class::Left;
        s.walls = vec![Wall::new(Point::new(-50.0, 2.0), Point::new(50.0, 2.0))];
        s.path = vec![
            Waypoint {
                t: 0.0,
                x: 0.0,
                y: 4.0,
            },
            Waypoint {
                t: 0.2,
                x: -1.0,
                y: 4.0,
            },
        ];
        assert!(render(&s).is_err());
    }

    #[test]
    fn plane_wave_integer_delay_is_a_shift() {
        // Mic at x = 343/48000·5 m receives a wave from +90° five samples early.
        let dx = 343.0 / 48_000.0 * 5.0;
        let g = ArrayGeometry::new(vec![[0.0, 0.0, 0.0], [dx, 0.0, 0.0]], 343.0).unwrap();
        let x: Vec<f64> = (0..256)
            .map(|i| ((i * 37 % 17) as f64 - 8.0) / 10.0)
            .collect();
        let clip = plane_wave(&g, 90.0, &x, 48_000).unwrap();
        // Remove the Nyquist component from the reference the same way.
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut planner = FftPlanner::<f64>::new();
        planner.plan_fft_forward(256).process(&mut buf);
        buf[128] = Complex64::new(0.0, 0.0);
        planner.plan_fft_inverse(256).process(&mut buf);
        let reference: Vec<f64> = buf.iter().map(|c| c.re / 256.0).collect();
        for n in 0..256 {
            assert!((clip.samples()[[0, n]] - reference[n]).abs() < 1e-12);
            assert!((clip.samples()[[1, n]] - reference[(n + 5) % 256]).abs() < 1e-12);
        }
    }
}
