//! Recording manifests, annotation-driven sample extraction and grouped,
//! class-stratified folds.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    extract_feature, Class, Environment, LabeledSample, Motion, PipelineConfig, SampleMeta,
};
use crate::signal::{load_wav, ArrayGeometry, AudioClip};

/// Front samples trail the left/right sample by this many seconds.
pub const FRONT_OFFSET: f64 = 1.5;
/// Dynamic left/right samples are taken this long after the alignment time.
pub const DYNAMIC_OFFSET: f64 = 0.5;

pub const MANIFEST_HEADER: [&str; 7] = [
    "wav",
    "geometry",
    "situation",
    "environment",
    "motion",
    "t0",
    "tau0",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub wav: PathBuf,
    pub geometry: PathBuf,
    /// One of left, right, none.
    pub situation: Class,
    pub environment: Environment,
    pub motion: Motion,
    pub t0: Option<f64>,
    pub tau0: Option<f64>,
}

impl ManifestEntry {
    /// File stem of the WAV path.
    pub fn recording_id(&self) -> String {
        self.wav
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.wav.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        match (self.situation, self.motion) {
            (Class::Front, _) => Err(Error::invariant(format!(
                "{}: situation must be left, right or none",
                self.recording_id()
            ))),
            (Class::Left | Class::Right, Motion::Static) if self.t0.is_none() => Err(
                Error::invariant(format!("{}: static approach needs t0", self.recording_id())),
            ),
            (Class::Left | Class::Right, Motion::Dynamic) if self.tau0.is_none() => {
                Err(Error::invariant(format!(
                    "{}: dynamic approach needs tau0",
                    self.recording_id()
                )))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RecordingManifest {
    pub entries: Vec<ManifestEntry>,
}

fn opt_time(field: &str, col: &str) -> Result<Option<f64>> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse::<f64>()
        .map(Some)
        .map_err(|e| Error::config(format!("manifest column {col}: {e}")))
}

fn fmt_time(t: Option<f64>) -> String {
    t.map(|v| v.to_string()).unwrap_or_default()
}

impl RecordingManifest {
    /// Parses manifest CSV; relative paths are resolved against `base_dir`.
    /// Lines starting with `#` are ignored.
    pub fn from_csv(text: &str, base_dir: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = reader.headers()?.clone();
        if header.iter().ne(MANIFEST_HEADER.iter().copied()) {
            return Err(Error::config(format!(
                "manifest header must be {}",
                MANIFEST_HEADER.join(",")
            )));
        }
        let mut entries = Vec::new();
        for record in reader.records() {
            let record = record?;
            let resolve = |p: &str| {
                let p = PathBuf::from(p.trim());
                if p.is_absolute() {
                    p
                } else {
                    base_dir.join(p)
                }
            };
            let entry = ManifestEntry {
                wav: resolve(&record[0]),
                geometry: resolve(&record[1]),
                situation: record[2].parse()?,
                environment: record[3].parse()?,
                motion: record[4].parse()?,
                t0: opt_time(&record[5], "t0")?,
                tau0: opt_time(&record[6], "tau0")?,
            };
            entry.validate()?;
            entries.push(entry);
        }
        Ok(Self { entries })
    }

    /// Loads a manifest and checks that every referenced file exists.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let manifest = Self::from_csv(&text, base)?;
        for entry in &manifest.entries {
            for file in [&entry.wav, &entry.geometry] {
                if !file.is_file() {
                    return Err(Error::Unreadable {
                        path: file.clone(),
                        source: std::io::Error::new(
                            std::io::ErrorKind::NotFound,
                            "referenced by manifest",
                        ),
                    });
                }
            }
        }
        Ok(manifest)
    }

    /// Manifest CSV with paths made relative to `base_dir` where possible.
    pub fn to_csv(&self, base_dir: &Path, preamble: &[String]) -> Result<String> {
        let mut out = String::new();
        for line in preamble {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(MANIFEST_HEADER)?;
        let rel = |p: &Path| {
            p.strip_prefix(base_dir)
                .unwrap_or(p)
                .to_string_lossy()
                .into_owned()
        };
        for e in &self.entries {
            writer.write_record([
                rel(&e.wav),
                rel(&e.geometry),
                e.situation.to_string(),
                e.environment.to_string(),
                e.motion.to_string(),
                fmt_time(e.t0),
                fmt_time(e.tau0),
            ])?;
        }
        let body = writer
            .into_inner()
            .map_err(|e| Error::invariant(e.to_string()))?;
        out.push_str(&String::from_utf8(body).map_err(|e| Error::invariant(e.to_string()))?);
        Ok(out)
    }
}

/// Samples `[t_e - sample_len, t_e)` of `clip`, rounded to whole samples.
pub fn clip_window(clip: &AudioClip, t_e: f64, sample_len: f64) -> Result<AudioClip> {
    let fs = f64::from(clip.sample_rate());
    let end = (t_e * fs).round();
    let len = (sample_len * fs).round();
    let start = end - len;
    if start < 0.0 || end > clip.len() as f64 || len < 1.0 {
        return Err(Error::WindowOutOfBounds {
            start: t_e - sample_len,
            end: t_e,
            duration: clip.duration(),
        });
    }
    clip.slice(start as usize, len as usize)
}

/// Extraction times and labels implied by an entry's annotations.
pub fn extraction_plan(entry: &ManifestEntry, duration: f64) -> Result<Vec<(Class, f64)>> {
    entry.validate()?;
    Ok(match (entry.situation, entry.motion) {
        (label @ (Class::Left | Class::Right), Motion::Static) => {
            let t0 = entry.t0.expect("validated");
            vec![(label, t0), (Class::Front, t0 + FRONT_OFFSET)]
        }
        (label @ (Class::Left | Class::Right), Motion::Dynamic) => {
            let t = entry.tau0.expect("validated") + DYNAMIC_OFFSET;
            vec![(label, t), (Class::Front, t + FRONT_OFFSET)]
        }
        _ => vec![(Class::None, duration / 2.0)],
    })
}

/// Loads the entry's audio and geometry, then extracts its samples.
pub fn extract_samples(
    entry: &ManifestEntry,
    config: &PipelineConfig,
) -> Result<Vec<LabeledSample>> {
    let clip = load_wav(&entry.wav)?;
    let geometry = ArrayGeometry::load(&entry.geometry)?;
    extract_samples_from_clip(entry, &clip, &geometry, config)
}

pub fn extract_samples_from_clip(
    entry: &ManifestEntry,
    clip: &AudioClip,
    geometry: &ArrayGeometry,
    config: &PipelineConfig,
) -> Result<Vec<LabeledSample>> {
    featurize(&extract_windows(entry, clip, config)?, geometry, config)
}

/// Audio of one sample before feature extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWindow {
    pub audio: AudioClip,
    pub label: Class,
    pub meta: SampleMeta,
}

/// The `[t_e - δt, t_e)` windows of every sample an entry yields.
pub fn extract_windows(
    entry: &ManifestEntry,
    clip: &AudioClip,
    config: &PipelineConfig,
) -> Result<Vec<SampleWindow>> {
    extraction_plan(entry, clip.duration())?
        .into_iter()
        .map(|(label, t_e)| {
            Ok(SampleWindow {
                audio: clip_window(clip, t_e, config.sample_len)?,
                label,
                meta: SampleMeta {
                    recording_id: entry.recording_id(),
                    environment: Some(entry.environment),
                    motion: entry.motion,
                    t_e,
                    augmented: false,
                },
            })
        })
        .collect()
}

/// Features of every window, in input order.
pub fn featurize(
    windows: &[SampleWindow],
    geometry: &ArrayGeometry,
    config: &PipelineConfig,
) -> Result<Vec<LabeledSample>> {
    windows
        .par_iter()
        .map(|w| {
            Ok(LabeledSample {
                feature: extract_feature(&w.audio, geometry, config)?,
                label: w.label,
                meta: w.meta.clone(),
            })
        })
        .collect()
}

/// `k` disjoint folds of sample indices. All samples of a recording share a
/// fold; within that constraint per-class counts are balanced greedily.
pub fn stratified_folds(samples: &[LabeledSample], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::config("at least two folds are required"));
    }
    let mut counts = [0usize; Class::COUNT];
    for s in samples {
        counts[s.label.index()] += 1;
    }
    for class in Class::ALL {
        let n = counts[class.index()];
        if n > 0 && n < k {
            return Err(Error::config(format!(
                "class {class} has {n} samples, fewer than {k} folds"
            )));
        }
    }

    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        groups.entry(&s.meta.recording_id).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
    groups.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let signature = |g: &[usize]| {
        let mut c = [0usize; Class::COUNT];
        for &i in g {
            c[samples[i].label.index()] += 1;
        }
        c
    };
    // Groups with the same label signature stay contiguous (stable sort).
    groups.sort_by_key(|g| std::cmp::Reverse(signature(g)));

    let mut fold_counts = vec![[0usize; Class::COUNT]; k];
    let mut fold_sizes = vec![0usize; k];
    let mut folds = vec![Vec::new(); k];
    for g in &groups {
        let sig = signature(g);
        let present: Vec<usize> = (0..Class::COUNT).filter(|&c| sig[c] > 0).collect();
        let target = (0..k)
            .min_by_key(|&f| {
                let worst = present
                    .iter()
                    .map(|&c| fold_counts[f][c])
                    .max()
                    .unwrap_or(0);
                let sum: usize = present.iter().map(|&c| fold_counts[f][c]).sum();
                (worst, sum, fold_sizes[f], f)
            })
            .expect("k >= 2");
        for c in 0..Class::COUNT {
            fold_counts[target][c] += sig[c];
        }
        fold_sizes[target] += g.len();
        folds[target].extend_from_slice(g);
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::DoaFeature;

    fn entry(
        situation: Class,
        motion: Motion,
        t0: Option<f64>,
        tau0: Option<f64>,
    ) -> ManifestEntry {
        ManifestEntry {
            wav: PathBuf::from("rec.wav"),
            geometry: PathBuf::from("geo.json"),
            situation,
            environment: Environment::A,
            motion,
            t0,
            tau0,
        }
    }

    fn sample(label: Class, id: &str) -> LabeledSample {
        LabeledSample {
            feature: DoaFeature::new(vec![0.0; 4], 2, 2).unwrap(),
            label,
            meta: SampleMeta {
                recording_id: id.into(),
                environment: None,
                motion: Motion::Static,
                t_e: 0.0,
                augmented: false,
            },
        }
    }

    #[test]
    fn extraction_rules() {
        let plan =
            extraction_plan(&entry(Class::Right, Motion::Static, Some(8.0), None), 12.0).unwrap();
        assert_eq!(plan, vec![(Class::Right, 8.0), (Class::Front, 9.5)]);
        let plan =
            extraction_plan(&entry(Class::Left, Motion::Dynamic, None, Some(6.0)), 12.0).unwrap();
        assert_eq!(plan, vec![(Class::Left, 6.5), (Class::Front, 8.0)]);
        let plan = extraction_plan(&entry(Class::None, Motion::Static, None, None), 10.0).unwrap();
        assert_eq!(plan, vec![(Class::None, 5.0)]);
    }

    #[test]
    fn missing_annotation_rejected() {
        assert!(entry(Class::Left, Motion::Static, None, Some(1.0))
            .validate()
            .is_err());
        assert!(entry(Class::Right, Motion::Dynamic, Some(1.0), None)
            .validate()
            .is_err());
        assert!(entry(Class::Front, Motion::Static, Some(1.0), None)
            .validate()
            .is_err());
        assert!(entry(Class::None, Motion::Dynamic, None, None)
            .validate()
            .is_ok());
    }

    #[test]
    fn window_bounds() {
        let clip = AudioClip::from_channels(vec![vec![0.0; 480]], 480).unwrap();
        assert_eq!(clip_window(&clip, 1.0, 0.5).unwrap().len(), 240);
        assert!(matches!(
            clip_window(&clip, 0.4, 0.5),
            Err(Error::WindowOutOfBounds { .. })
        ));
        assert!(clip_window(&clip, 1.01, 0.5).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let text = "wav,geometry,situation,environment,motion,t0,tau0\n\
                    a.wav,g.json,left,A,static,8,\n\
                    b.wav,g.json,none,B,dynamic,,\n";
        let m = RecordingManifest::from_csv(text, Path::new("/data")).unwrap();
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.entries[0].wav, PathBuf::from("/data/a.wav"));
        assert_eq!(m.entries[0].t0, Some(8.0));
        assert_eq!(m.entries[1].recording_id(), "b");
        let out = m.to_csv(Path::new("/data"), &[]).unwrap();
        assert_eq!(out, text);
        let bad =
            "wav,geometry,situation,environment,motion,t0,tau0\na.wav,g.json,left,A,static,,\n";
        assert!(RecordingManifest::from_csv(bad, Path::new(".")).is_err());
    }

    fn per_class_fold_counts(samples: &[LabeledSample], folds: &[Vec<usize>]) -> Vec<[usize; 4]> {
        folds
            .iter()
            .map(|f| {
                let mut c = [0; 4];
                for &i in f {
                    c[samples[i].label.index()] += 1;
                }
                c
            })
            .collect()
    }

    #[test]
    fn exact_division() {
        let mut set = Vec::new();
        for class in Class::ALL {
            set.extend((0..20).map(|i| sample(class, &format!("{class}-{i}"))));
        }
        let folds = stratified_folds(&set, 5, 3).unwrap();
        for c in per_class_fold_counts(&set, &folds) {
            assert_eq!(c, [4, 4, 4, 4]);
        }
    }

    #[test]
    fn pigeonhole_and_determinism() {
        let set: Vec<_> = (0..21)
            .map(|i| sample(Class::Left, &format!("l{i}")))
            .collect();
        let folds = stratified_folds(&set, 5, 9).unwrap();
        let mut sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![4, 4, 4, 4, 5]);
        assert_eq!(folds, stratified_folds(&set, 5, 9).unwrap());
        assert!(stratified_folds(&set[..4], 5, 9).is_err());
        assert!(stratified_folds(&set, 1, 9).is_err());
    }

    #[test]
    fn recordings_never_straddle_folds() {
        // Approach recordings yield {left|right, front} pairs.
        let mut set = Vec::new();
        for i in 0..23 {
            set.push(sample(Class::Left, &format!("L{i}")));
            set.push(sample(Class::Front, &format!("L{i}")));
        }
        for i in 0..19 {
            set.push(sample(Class::Right, &format!("R{i}")));
            set.push(sample(Class::Front, &format!("R{i}")));
        }
        set.extend((0..31).map(|i| sample(Class::None, &format!("N{i}"))));
        let folds = stratified_folds(&set, 5, 1).unwrap();
        let mut owner = BTreeMap::new();
        for (f, fold) in folds.iter().enumerate() {
            for &i in fold {
                let prev = owner.insert(set[i].meta.recording_id.clone(), f);
                assert!(prev.is_none() || prev == Some(f));
            }
        }
        let counts = per_class_fold_counts(&set, &folds);
        for c in 0..4 {
            let hi = counts.iter().map(|f| f[c]).max().unwrap();
            let lo = counts.iter().map(|f| f[c]).min().unwrap();
            assert!(hi - lo <= 1, "class {c}: {counts:?}");
        }
        assert_eq!(folds.iter().map(Vec::len).sum::<usize>(), set.len());
    }
}
