use blindcorner::beamform::{argmax_doa, srp_phat, AzimuthGrid};
use blindcorner::features::{extract_feature, Class, PipelineConfig};
use blindcorner::signal::{ArrayGeometry, AudioClip};
use blindcorner::stft::{band_select, stft};
use blindcorner::synth::{
    benchmark_scenarios, first_line_of_sight, line_of_sight, plane_wave, render, source_signal,
    ArrayPose, BenchmarkConfig, Scenario, SignalSpec, Waypoint,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn white(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(-0.2..0.2)).collect()
}

fn band_stack(clip: &AudioClip) -> blindcorner::stft::StftStack {
    band_select(&stft(clip, 2048, 1024).unwrap(), 50.0, 1500.0).unwrap()
}

#[test]
fn broadside_plane_wave_peaks_in_the_center_bin() {
    let geometry = ArrayGeometry::random_planar(8, 0.8, 0.7, 4).unwrap();
    let grid = AzimuthGrid::new(30).unwrap();
    let clip = plane_wave(&geometry, 0.0, &white(48_000, 1), 48_000).unwrap();
    let r = srp_phat(&band_stack(&clip), &geometry, &grid).unwrap();
    assert_eq!(argmax_doa(&r).abs(), 3.0);
}

#[test]
fn mirrored_geometry_reverses_the_response() {
    let geometry = ArrayGeometry::random_planar(8, 0.8, 0.7, 5).unwrap();
    let grid = AzimuthGrid::new(30).unwrap();
    let clip = plane_wave(&geometry, 33.0, &white(48_000, 2), 48_000).unwrap();
    let stack = band_stack(&clip);
    let a = srp_phat(&stack, &geometry, &grid).unwrap();
    let b = srp_phat(&stack, &geometry.mirrored(), &grid).unwrap();
    for (x, y) in a.energies.iter().zip(b.energies.iter().rev()) {
        assert!((x - y).abs() <= 1e-6, "{x} vs {y}");
    }
}

/// Energies are clamped at zero, so incoherent input leaves most bins at
/// exactly 0 and a max/mean ratio is unbounded. Flatness is checked against
/// the coherent level instead.
#[test]
fn independent_noise_stays_far_below_a_coherent_source() {
    let geometry = ArrayGeometry::random_planar(8, 0.8, 0.7, 6).unwrap();
    let grid = AzimuthGrid::new(30).unwrap();
    let mut noise_peak = 0.0;
    for seed in 0..20 {
        let rows = (0..8).map(|m| white(48_000, 1000 * seed + m)).collect();
        let clip = AudioClip::from_channels(rows, 48_000).unwrap();
        let r = srp_phat(&band_stack(&clip), &geometry, &grid).unwrap();
        noise_peak += r.energies.iter().copied().fold(0.0, f64::max) / 20.0;
    }
    let clip = plane_wave(&geometry, 20.0, &white(48_000, 1), 48_000).unwrap();
    let r = srp_phat(&band_stack(&clip), &geometry, &grid).unwrap();
    let coherent_peak = r.energies.iter().copied().fold(0.0, f64::max);
    assert!(noise_peak < 0.05, "noise peak {noise_peak}");
    assert!(coherent_peak > 0.9, "coherent peak {coherent_peak}");
}

#[test]
fn repeating_frames_leaves_the_response_unchanged() {
    let geometry = ArrayGeometry::random_planar(4, 0.8, 0.7, 7).unwrap();
    let grid = AzimuthGrid::new(30).unwrap();
    let clip = plane_wave(&geometry, -20.0, &white(24_000, 3), 48_000).unwrap();
    let stack = band_stack(&clip);
    let a = srp_phat(&stack, &geometry, &grid).unwrap();
    let b = srp_phat(&stack.concat_frames(&stack).unwrap(), &geometry, &grid).unwrap();
    for (x, y) in a.energies.iter().zip(&b.energies) {
        assert!((x - y).abs() <= 1e-12);
    }
}

#[test]
fn features_ignore_uniform_gain() {
    let geometry = ArrayGeometry::random_planar(8, 0.8, 0.7, 8).unwrap();
    let config = PipelineConfig::default();
    let clip = plane_wave(&geometry, 40.0, &white(48_000, 4), 48_000).unwrap();
    let base = extract_feature(&clip, &geometry, &config).unwrap();
    for gain in [0.1, 10.0] {
        let scaled = extract_feature(&clip.scaled(gain), &geometry, &config).unwrap();
        for (x, y) in base.as_slice().iter().zip(scaled.as_slice()) {
            assert!((x - y).abs() <= 1e-6);
        }
    }
}

#[test]
fn symmetric_array_mirrors_the_feature() {
    let geometry = ArrayGeometry::symmetric_planar(4, 0.8, 0.7, 9).unwrap();
    let config = PipelineConfig::default();
    let signal = white(48_000, 5);
    let right = extract_feature(
        &plane_wave(&geometry, 35.0, &signal, 48_000).unwrap(),
        &geometry,
        &config,
    )
    .unwrap();
    let left = extract_feature(
        &plane_wave(&geometry, -35.0, &signal, 48_000).unwrap(),
        &geometry,
        &config,
    )
    .unwrap();
    for (x, y) in left.as_slice().iter().zip(right.mirrored().as_slice()) {
        assert!((x - y).abs() <= 1e-5, "{x} vs {y}");
    }
}

fn free_field(azimuth_deg: f64, distance: f64) -> Scenario {
    let a = azimuth_deg.to_radians();
    let pose = ArrayPose {
        x: 0.0,
        y: 0.0,
        heading_deg: 0.0,
        geometry: ArrayGeometry::random_planar(8, 0.8, 0.7, 10).unwrap(),
    };
    let mut s = Scenario::empty(pose, 1.5, 11);
    s.label = Class::Right;
    s.snr_db = 30.0;
    s.path = vec![Waypoint {
        t: 0.0,
        x: distance * a.sin(),
        y: distance * a.cos(),
    }];
    s
}

#[test]
fn stationary_source_is_located() {
    let s = free_field(45.0, 20.0);
    let rec = render(&s).unwrap();
    assert_eq!(rec.t0, Some(0.0));
    let config = PipelineConfig::default();
    let grid = config.grid().unwrap();
    let r = srp_phat(
        &band_stack(&rec.clip.tail(48_000).unwrap()),
        &s.array.geometry,
        &grid,
    )
    .unwrap();
    let peak = argmax_doa(&r);
    assert!((peak - 45.0).abs() <= 6.0, "peak at {peak}");
}

#[test]
fn t0_is_the_first_visible_instant() {
    let config = BenchmarkConfig {
        per_class: 4,
        microphones: 4,
        ..BenchmarkConfig::default()
    };
    let (_, scenarios) = benchmark_scenarios(&config).unwrap();
    for s in scenarios.iter().filter(|s| s.label != Class::None) {
        let t0 = first_line_of_sight(s).unwrap();
        let center = s.array.center();
        assert!(line_of_sight(&s.walls, s.source_at(t0).unwrap(), center));
        let steps = (t0 * 100.0) as usize;
        for k in 0..steps {
            let t = k as f64 / 100.0;
            assert!(
                !line_of_sight(&s.walls, s.source_at(t).unwrap(), center),
                "visible at {t}"
            );
        }
        let before = t0 - 1.0 / f64::from(s.sample_rate);
        assert!(!line_of_sight(
            &s.walls,
            s.source_at(before).unwrap(),
            center
        ));
    }
}

#[test]
fn mirrored_scene_gives_row_reversed_features() {
    let config = BenchmarkConfig {
        per_class: 1,
        microphones: 8,
        ..BenchmarkConfig::default()
    };
    let (_, scenarios) = benchmark_scenarios(&config).unwrap();
    let pipeline = PipelineConfig::default();
    let s = &scenarios[1];
    assert_eq!(s.label, Class::Right);
    let m = s.mirrored();
    assert_eq!(m.label, Class::Left);
    let (a, b) = (render(s).unwrap(), render(&m).unwrap());
    assert_eq!(a.t0, b.t0);
    let t_e = a.t0.unwrap();
    let window = |clip: &AudioClip| blindcorner::dataset::clip_window(clip, t_e, 1.0).unwrap();
    let fa = extract_feature(&window(&a.clip), &s.array.geometry, &pipeline).unwrap();
    let fb = extract_feature(&window(&b.clip), &m.array.geometry, &pipeline).unwrap();
    for (x, y) in fa.mirrored().as_slice().iter().zip(fb.as_slice()) {
        assert!((x - y).abs() <= 1e-4, "{x} vs {y}");
    }
}

#[test]
fn doubling_the_source_leaves_features_unchanged() {
    let config = BenchmarkConfig {
        per_class: 1,
        microphones: 8,
        ..BenchmarkConfig::default()
    };
    let (_, scenarios) = benchmark_scenarios(&config).unwrap();
    let pipeline = PipelineConfig::default();
    let s = scenarios[0].clone();
    let mut loud = s.clone();
    loud.signal.level *= 2.0;
    let (a, b) = (render(&s).unwrap(), render(&loud).unwrap());
    let t_e = a.t0.unwrap();
    let fa = extract_feature(
        &blindcorner::dataset::clip_window(&a.clip, t_e, 1.0).unwrap(),
        &s.array.geometry,
        &pipeline,
    )
    .unwrap();
    let fb = extract_feature(
        &blindcorner::dataset::clip_window(&b.clip, t_e, 1.0).unwrap(),
        &s.array.geometry,
        &pipeline,
    )
    .unwrap();
    for (x, y) in fa.as_slice().iter().zip(fb.as_slice()) {
        assert!((x - y).abs() <= 1e-6);
    }
}

#[test]
fn source_signal_is_reproducible() {
    let spec = SignalSpec::default();
    assert_eq!(
        source_signal(&spec, 4800, 48_000, 3),
        source_signal(&spec, 4800, 48_000, 3)
    );
    assert_ne!(
        source_signal(&spec, 4800, 48_000, 3),
        source_signal(&spec, 4800, 48_000, 4)
    );
}

#[test]
fn localization_holds_across_frame_settings() {
    let geometry = ArrayGeometry::random_planar(8, 0.8, 0.7, 12).unwrap();
    let grid = AzimuthGrid::new(30).unwrap();
    let clip = plane_wave(&geometry, 30.0, &white(48_000, 6), 48_000).unwrap();
    for (frame, hop) in [(512, 256), (1024, 512), (2048, 1024), (4096, 1024), (4096, 2048)] {
        let stack = band_select(&stft(&clip, frame, hop).unwrap(), 50.0, 1500.0).unwrap();
        let peak = argmax_doa(&srp_phat(&stack, &geometry, &grid).unwrap());
        assert!((peak - 30.0).abs() <= 6.0, "frame {frame} hop {hop}: peak at {peak}");
    }
}
