//! Per-channel short-time Fourier transform and band-limited bin selection.

use std::ops::Range;

use ndarray::{s, Array3, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::signal::{hann_window, AudioClip};

pub const DEFAULT_FRAME_LEN: usize = 2048;
pub const DEFAULT_HOP: usize = 1024;

/// One-sided spectra of every channel, shaped `channels × frames × bins`.
///
/// `bin_indices` are DFT indices of the retained bins; after [`stft`] they are
/// `0..=frame_len/2`, after [`band_select`] a contiguous subset.
#[derive(Debug, Clone, PartialEq)]
pub struct StftStack {
    data: Array3<Complex64>,
    sample_rate: u32,
    frame_len: usize,
    hop: usize,
    bin_indices: Vec<usize>,
}

impl StftStack {
    pub fn data(&self) -> &Array3<Complex64> {
        &self.data
    }

    pub fn channels(&self) -> usize {
        self.data.len_of(Axis(0))
    }

    pub fn frames(&self) -> usize {
        self.data.len_of(Axis(1))
    }

    pub fn bins(&self) -> usize {
        self.data.len_of(Axis(2))
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn bin_indices(&self) -> &[usize] {
        &self.bin_indices
    }

    pub fn bin_freq(&self, k: usize) -> f64 {
        bin_frequency(self.bin_indices[k], self.sample_rate, self.frame_len)
    }

    pub fn bin_freqs(&self) -> Vec<f64> {
        (0..self.bins()).map(|k| self.bin_freq(k)).collect()
    }

    /// Restriction to a contiguous range of frames.
    pub fn frame_range(&self, range: Range<usize>) -> Result<StftStack> {
        if range.is_empty() || range.end > self.frames() {
            return Err(Error::invariant(format!(
                "frame range {range:?} invalid for {} frames",
                self.frames()
            )));
        }
        Ok(StftStack {
            data: self.data.slice(s![.., range, ..]).to_owned(),
            sample_rate: self.sample_rate,
            frame_len: self.frame_len,
            hop: self.hop,
            bin_indices: self.bin_indices.clone(),
        })
    }

    /// Joins two stacks along the frame axis (same channels and bins).
    pub fn concat_frames(&self, other: &StftStack) -> Result<StftStack> {
        if self.bin_indices != other.bin_indices || self.channels() != other.channels() {
            return Err(Error::invariant("stacks differ in channels or bins"));
        }
        let data = ndarray::concatenate(Axis(1), &[self.data.view(), other.data.view()])
            .map_err(|e| Error::invariant(e.to_string()))?;
        Ok(StftStack {
            data,
            ..self.clone()
        })
    }

    pub fn select_channels(&self, indices: &[usize]) -> StftStack {
        StftStack {
            data: self.data.select(Axis(0), indices),
            ..self.clone()
        }
    }
}

pub fn bin_frequency(index: usize, sample_rate: u32, frame_len: usize) -> f64 {
    index as f64 * f64::from(sample_rate) / frame_len as f64
}

pub fn frame_count(samples: usize, frame_len: usize, hop: usize) -> usize {
    if samples < frame_len || hop == 0 {
        0
    } else {
        (samples - frame_len) / hop + 1
    }
}

/// Hann-windowed one-sided STFT of every channel. Frame `t` starts at sample
/// `t * hop`; trailing samples past the last full frame are dropped.
pub fn stft(clip: &AudioClip, frame_len: usize, hop: usize) -> Result<StftStack> {
    if frame_len == 0 || !frame_len.is_multiple_of(2) {
        return Err(Error::config(format!(
            "frame length {frame_len} must be even and positive"
        )));
    }
    if hop == 0 {
        return Err(Error::config("hop must be at least one sample"));
    }
    if clip.len() < frame_len {
        return Err(Error::ClipTooShort {
            required: frame_len,
            available: clip.len(),
        });
    }
    let frames = frame_count(clip.len(), frame_len, hop);
    let bins = frame_len / 2 + 1;
    let window = hann_window(frame_len)?;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(frame_len);

    let per_channel: Vec<Vec<Complex64>> = (0..clip.channels())
        .into_par_iter()
        .map(|ch| {
            let signal = clip.channel(ch);
            let mut out = Vec::with_capacity(frames * bins);
            let mut buf = vec![Complex64::new(0.0, 0.0); frame_len];
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            for t in 0..frames {
                let start = t * hop;
                for (k, slot) in buf.iter_mut().enumerate() {
                    *slot = Complex64::new(signal[start + k] * window[k], 0.0);
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                out.extend_from_slice(&buf[..bins]);
            }
            out
        })
        .collect();

    let flat: Vec<Complex64> = per_channel.into_iter().flatten().collect();
    let data = Array3::from_shape_vec((clip.channels(), frames, bins), flat)
        .map_err(|e| Error::invariant(e.to_string()))?;
    Ok(StftStack {
        data,
        sample_rate: clip.sample_rate(),
        frame_len,
        hop,
        bin_indices: (0..bins).collect(),
    })
}

/// Keeps bins whose frequency lies in `[f_min, f_max]`, both ends inclusive.
pub fn band_select(stack: &StftStack, f_min: f64, f_max: f64) -> Result<StftStack> {
    let nyquist = f64::from(stack.sample_rate) / 2.0;
    if !(f_min >= 0.0 && f_min < f_max && f_max <= nyquist) {
        return Err(Error::config(format!(
            "band [{f_min}, {f_max}] Hz must satisfy 0 <= f_min < f_max <= {nyquist}"
        )));
    }
    let keep: Vec<usize> = (0..stack.bins())
        .filter(|&k| {
            let f = stack.bin_freq(k);
            f >= f_min && f <= f_max
        })
        .collect();
    if keep.is_empty() {
        return Err(Error::config(format!(
            "no DFT bin falls inside [{f_min}, {f_max}] Hz"
        )));
    }
    Ok(StftStack {
        data: stack.data.select(Axis(2), &keep),
        sample_rate: stack.sample_rate,
        frame_len: stack.frame_len,
        hop: stack.hop,
        bin_indices: keep.iter().map(|&k| stack.bin_indices[k]).collect(),
    })
}
