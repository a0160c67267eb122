use blindcorner::signal::{load_wav, write_wav, AudioClip, WavEncoding};
use blindcorner::Error;

/// Plain RIFF/WAVE writer (format tag 1 or 3) built byte by byte.
fn reference_wav(
    channels: u16,
    sample_rate: u32,
    bits: u16,
    float: bool,
    payload: &[u8],
) -> Vec<u8> {
    let block_align = channels * bits / 8;
    let mut out = Vec::new();
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + payload.len() as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&(if float { 3u16 } else { 1u16 }).to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * u32::from(block_align)).to_le_bytes());
    out.extend_from_slice(&block_align.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(payload);
    out
}

/// Bytes of the `data` chunk.
fn data_chunk(bytes: &[u8]) -> &[u8] {
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let len = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        if id == b"data" {
            return &bytes[pos + 8..pos + 8 + len];
        }
        pos += 8 + len + (len & 1);
    }
    panic!("no data chunk");
}

fn pcm24_payload(frames: &[Vec<i32>]) -> Vec<u8> {
    frames
        .iter()
        .flatten()
        .flat_map(|v| v.to_le_bytes()[..3].to_vec())
        .collect()
}

#[test]
fn silence_loads_as_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zeros.wav");
    std::fs::write(&path, reference_wav(1, 48_000, 16, false, &[0u8; 20])).unwrap();
    let clip = load_wav(&path).unwrap();
    assert_eq!(
        (clip.channels(), clip.len(), clip.sample_rate()),
        (1, 10, 48_000)
    );
    assert!(clip.samples().iter().all(|&v| v == 0.0));
}

#[test]
fn sixteen_bit_scaling() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s16.wav");
    let payload: Vec<u8> = [16384i16, -32768, 32767, -1]
        .iter()
        .flat_map(|v| v.to_le_bytes())
        .collect();
    std::fs::write(&path, reference_wav(2, 16_000, 16, false, &payload)).unwrap();
    let clip = load_wav(&path).unwrap();
    assert_eq!(clip.channel(0).to_vec(), vec![0.5, 32767.0 / 32768.0]);
    assert_eq!(clip.channel(1).to_vec(), vec![-1.0, -1.0 / 32768.0]);
}

#[test]
fn pcm24_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("ref.wav");
    let frames: Vec<Vec<i32>> = (0..50)
        .map(|t| {
            (0..3)
                .map(|c| ((t * 48_271 + c * 7919) % 16_777_216) - 8_388_608)
                .collect()
        })
        .collect();
    let payload = pcm24_payload(&frames);
    std::fs::write(&src, reference_wav(3, 48_000, 24, false, &payload)).unwrap();
    let clip = load_wav(&src).unwrap();
    assert_eq!(
        clip.samples()[[1, 0]],
        (7919 - 8_388_608) as f64 / 8_388_608.0
    );
    let dst = dir.path().join("out.wav");
    write_wav(&clip, &dst, WavEncoding::Pcm24).unwrap();
    let written = std::fs::read(&dst).unwrap();
    assert_eq!(data_chunk(&written), payload.as_slice());
}

#[test]
fn fifty_six_channels() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("array.wav");
    let frames: Vec<Vec<i32>> = (0..4)
        .map(|t| (0..56).map(|c| c * 1000 + t).collect())
        .collect();
    std::fs::write(
        &path,
        reference_wav(56, 48_000, 24, false, &pcm24_payload(&frames)),
    )
    .unwrap();
    let clip = load_wav(&path).unwrap();
    assert_eq!((clip.channels(), clip.sample_rate()), (56, 48_000));
    // Channel order is preserved.
    for c in 0..56 {
        assert_eq!(
            clip.samples()[[c, 2]],
            f64::from(c as i32 * 1000 + 2) / 8_388_608.0
        );
    }
}

fn test_clip(channels: usize, len: usize) -> AudioClip {
    let rows = (0..channels)
        .map(|c| {
            (0..len)
                .map(|t| ((t as f64 * 0.37 + c as f64).sin() * 0.9).clamp(-1.0, 1.0))
                .collect()
        })
        .collect();
    AudioClip::from_channels(rows, 44_100).unwrap()
}

#[test]
fn float32_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.wav");
    let clip = test_clip(5, 300);
    write_wav(&clip, &path, WavEncoding::Float32).unwrap();
    let back = load_wav(&path).unwrap();
    assert_eq!(
        (back.channels(), back.len(), back.sample_rate()),
        (5, 300, 44_100)
    );
    for (a, b) in clip.samples().iter().zip(back.samples()) {
        assert_eq!((*a as f32).to_bits(), (*b as f32).to_bits());
        assert_eq!(*b, f64::from(*a as f32));
    }
}

#[test]
fn pcm24_round_trip_within_quantization() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.wav");
    let mut rows: Vec<Vec<f64>> = (0..4)
        .map(|c| test_clip(4, 200).channel(c).to_vec())
        .collect();
    rows[0][0] = 1.0;
    rows[0][1] = -1.0;
    let clip = AudioClip::from_channels(rows, 44_100).unwrap();
    write_wav(&clip, &path, WavEncoding::Pcm24).unwrap();
    let back = load_wav(&path).unwrap();
    let bound = 2f64.powi(-23);
    for (a, b) in clip.samples().iter().zip(back.samples()) {
        assert!((a - b).abs() <= bound, "{a} vs {b}");
    }
}

#[test]
fn zeros_write_zero_samples() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("z.wav");
    let clip = AudioClip::from_channels(vec![vec![0.0; 16]; 2], 48_000).unwrap();
    write_wav(&clip, &path, WavEncoding::Pcm24).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(data_chunk(&bytes).len(), 16 * 2 * 3);
    assert!(data_chunk(&bytes).iter().all(|&b| b == 0));
}

#[test]
fn errors_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        load_wav(dir.path().join("missing.wav")),
        Err(Error::Unreadable { .. })
    ));

    let empty = dir.path().join("empty.wav");
    std::fs::write(&empty, reference_wav(2, 48_000, 16, false, &[])).unwrap();
    assert!(matches!(load_wav(&empty), Err(Error::EmptyStream)));

    let eight = dir.path().join("u8.wav");
    std::fs::write(&eight, reference_wav(1, 8_000, 8, false, &[128, 128])).unwrap();
    assert!(matches!(
        load_wav(&eight),
        Err(Error::UnsupportedEncoding(_))
    ));

    let garbage = dir.path().join("garbage.wav");
    std::fs::write(&garbage, b"not a wave file at all").unwrap();
    assert!(load_wav(&garbage).is_err());

    let loud = AudioClip::from_channels(vec![vec![0.0, 1.5]], 48_000).unwrap();
    let err = write_wav(&loud, dir.path().join("loud.wav"), WavEncoding::Float32).unwrap_err();
    assert!(matches!(err, Error::AmplitudeOutOfRange { channel: 0, .. }));

    let clip = AudioClip::from_channels(vec![vec![0.0]], 48_000).unwrap();
    let err = write_wav(
        &clip,
        dir.path().join("no/such/dir.wav"),
        WavEncoding::Pcm24,
    )
    .unwrap_err();
    assert!(matches!(err, Error::Unwritable { .. }));
}
