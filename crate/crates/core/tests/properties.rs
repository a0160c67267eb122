use blindcorner::beamform::{srp_phat, AzimuthGrid};
use blindcorner::dataset::stratified_folds;
use blindcorner::eval::{accuracy, jaccard, ConfusionMatrix};
use blindcorner::features::{
    augment_training_set, class_counts, mirror, segment_ranges, Class, DoaFeature, LabeledSample,
    Motion, SampleMeta,
};
use blindcorner::signal::{hann_window, ArrayGeometry, AudioClip};
use blindcorner::stft::stft;
use proptest::prelude::*;

fn sample(
    label: Class,
    values: Vec<f64>,
    segments: usize,
    bins: usize,
    id: String,
) -> LabeledSample {
    LabeledSample {
        feature: DoaFeature::new(values, segments, bins).unwrap(),
        label,
        meta: SampleMeta {
            recording_id: id,
            environment: None,
            motion: Motion::Static,
            t_e: 1.0,
            augmented: false,
        },
    }
}

fn class() -> impl Strategy<Value = Class> {
    (0usize..4).prop_map(|i| Class::ALL[i])
}

fn feature_parts() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (1usize..4, 2usize..8)
        .prop_flat_map(|(l, b)| (Just(l), Just(b), prop::collection::vec(0.0f64..1.0, l * b)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mirror_is_an_involution((l, b, values) in feature_parts(), label in class()) {
        let s = sample(label, values, l, b, "r".into());
        let twice = mirror(&mirror(&s));
        prop_assert_eq!(&twice.feature, &s.feature);
        prop_assert_eq!(twice.label, s.label);
        prop_assert!(!twice.meta.augmented);
        prop_assert!(mirror(&s).meta.augmented);
    }

    #[test]
    fn mirror_keeps_each_rows_energies((l, b, values) in feature_parts()) {
        let f = DoaFeature::new(values, l, b).unwrap();
        let m = f.mirrored();
        for seg in 0..l {
            let mut a = f.row(seg).to_vec();
            let mut r = m.row(seg).to_vec();
            a.sort_by(f64::total_cmp);
            r.sort_by(f64::total_cmp);
            prop_assert_eq!(a, r);
            let reversed: Vec<f64> = f.row(seg).iter().rev().copied().collect();
            prop_assert_eq!(m.row(seg).to_vec(), reversed);
        }
    }

    #[test]
    fn augmentation_adds_one_copy_per_directional_sample(labels in prop::collection::vec(class(), 0..40)) {
        let samples: Vec<_> = labels
            .iter()
            .enumerate()
            .map(|(i, &c)| sample(c, vec![0.5, 0.25], 1, 2, format!("r{i}")))
            .collect();
        let before = class_counts(&samples);
        let out = augment_training_set(&samples);
        let after = class_counts(&out);
        prop_assert_eq!(out.len(), samples.len() + before[0] + before[2]);
        prop_assert_eq!(after[0], before[0] + before[2]);
        prop_assert_eq!(after[2], before[0] + before[2]);
        prop_assert_eq!(after[1], before[1]);
        prop_assert_eq!(after[3], before[3]);
    }

    #[test]
    fn segments_partition_the_frames(frames in 1usize..200, segments in 1usize..10) {
        prop_assume!(segments <= frames);
        let ranges = segment_ranges(frames, segments);
        prop_assert_eq!(ranges.len(), segments);
        prop_assert_eq!(ranges[0].start, 0);
        prop_assert_eq!(ranges[segments - 1].end, frames);
        for w in ranges.windows(2) {
            prop_assert_eq!(w[0].end, w[1].start);
        }
        let base = frames / segments;
        prop_assert!(ranges[..segments - 1].iter().all(|r| r.len() == base));
    }

    #[test]
    fn folds_never_split_a_recording(
        recs in prop::collection::vec((class(), 1usize..3), 10..40),
        k in 2usize..5,
        seed in any::<u64>(),
    ) {
        let mut samples = Vec::new();
        for (i, &(c, n)) in recs.iter().enumerate() {
            for _ in 0..n {
                samples.push(sample(c, vec![0.1, 0.2], 1, 2, format!("rec{i}")));
            }
        }
        if let Ok(folds) = stratified_folds(&samples, k, seed) {
            let mut seen = vec![None; recs.len()];
            let mut total = 0;
            for (f, idx) in folds.iter().enumerate() {
                total += idx.len();
                for &i in idx {
                    let rec: usize = samples[i].meta.recording_id[3..].parse().unwrap();
                    prop_assert!(seen[rec].is_none() || seen[rec] == Some(f));
                    seen[rec] = Some(f);
                }
            }
            prop_assert_eq!(total, samples.len());
            prop_assert_eq!(&folds, &stratified_folds(&samples, k, seed).unwrap());
        }
    }

    #[test]
    fn metrics_stay_in_range(counts in prop::array::uniform4(prop::array::uniform4(0u64..20))) {
        let cm = ConfusionMatrix::from_counts(counts);
        prop_assume!(cm.total() > 0);
        let acc = accuracy(&cm).unwrap();
        prop_assert!((0.0..=1.0).contains(&acc));
        for c in Class::ALL {
            let j = jaccard(&cm, c);
            prop_assert!((0.0..=1.0).contains(&j.value));
            prop_assert!(j.value <= 1.0);
        }
        if acc == 1.0 {
            for c in Class::ALL {
                let j = jaccard(&cm, c);
                prop_assert!(j.degenerate || j.value == 1.0);
            }
        }
    }

    #[test]
    fn hann_is_symmetric(n in 1usize..300) {
        let w = hann_window(n).unwrap();
        for k in 1..n {
            prop_assert!((w[k] - w[n - k]).abs() < 1e-12);
        }
    }

    #[test]
    fn srp_is_non_negative_and_gain_free(
        seed in any::<u64>(),
        gain in prop_oneof![Just(0.1), Just(10.0), 0.01f64..100.0],
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..1024).map(|_| rng.random_range(-0.1..0.1)).collect())
            .collect();
        let clip = AudioClip::from_channels(rows, 8000).unwrap();
        let geometry =
            ArrayGeometry::new(vec![[-0.3, 0.0, 0.0], [0.1, 0.2, 0.0], [0.35, -0.1, 0.0]], 343.0).unwrap();
        let grid = AzimuthGrid::new(12).unwrap();
        let a = srp_phat(&stft(&clip, 256, 128).unwrap(), &geometry, &grid).unwrap();
        let b = srp_phat(&stft(&clip.scaled(gain), 256, 128).unwrap(), &geometry, &grid).unwrap();
        prop_assert!(a.energies.iter().all(|&e| e >= 0.0 && e.is_finite()));
        for (x, y) in a.energies.iter().zip(&b.energies) {
            prop_assert!((x - y).abs() <= 1e-6);
        }
    }
}
