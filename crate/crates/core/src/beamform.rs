//! GCC-PHAT cross-spectra and azimuthal SRP-PHAT energy.
//!
//! The steered response for azimuth bin `b` is
//!
//! ```text
//! r(α_b) = max(0, Σ_{i<j} Σ_t Σ_k Re{ G_ij[t,k] · exp(+2πi f_k (d_i(α_b) − d_j(α_b))) }) / (P·T·K)
//! ```
//!
//! with `G_ij` the PHAT-weighted cross-spectrum, `d` the far-field steering
//! delays, and `P`, `T`, `K` the pair, frame and bin counts. Frames are summed
//! before steering since the steering phase does not depend on time.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::ArrayGeometry;
use crate::stft::StftStack;

pub const PHAT_EPSILON: f64 = 1e-12;
pub const DEFAULT_AZIMUTH_BINS: usize = 30;

/// `B` equal-width bins partitioning `[-90°, +90°]`; bin 0 is leftmost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AzimuthGrid {
    bins: usize,
}

impl AzimuthGrid {
    pub fn new(bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::config("azimuth grid needs at least one bin"));
        }
        Ok(Self { bins })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn width(&self) -> f64 {
        180.0 / self.bins as f64
    }

    pub fn center(&self, b: usize) -> f64 {
        -90.0 + (b as f64 + 0.5) * self.width()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.bins).map(|b| self.center(b)).collect()
    }

    /// Bin containing `azimuth`; the upper edge `+90°` belongs to the last bin.
    pub fn bin_of(&self, azimuth: f64) -> usize {
        let b = ((azimuth + 90.0) / self.width()).floor();
        (b.max(0.0) as usize).min(self.bins - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoaResponse {
    pub energies: Vec<f64>,
    pub grid: AzimuthGrid,
}

impl DoaResponse {
    pub fn new(energies: Vec<f64>, grid: AzimuthGrid) -> Result<Self> {
        if energies.len() != grid.bins() {
            return Err(Error::DimensionMismatch {
                expected: grid.bins(),
                found: energies.len(),
            });
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::invariant("DoA energies must be finite"));
        }
        Ok(Self { energies, grid })
    }

    /// `azimuth_deg,energy` rows, one per bin.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("azimuth_deg,energy\n");
        for (b, e) in self.energies.iter().enumerate() {
            out.push_str(&format!("{},{}\n", self.grid.center(b), e));
        }
        out
    }
}

fn unit_direction(azimuth_deg: f64) -> [f64; 3] {
    let a = azimuth_deg.to_radians();
    [a.sin(), 0.0, a.cos()]
}

/// Far-field relative arrival delays (seconds) of a plane wave from
/// `azimuth_deg`: `d_i = -(u · p_i) / c`.
pub fn steering_delays(geometry: &ArrayGeometry, azimuth_deg: f64) -> Result<Vec<f64>> {
    if !(-90.0..=90.0).contains(&azimuth_deg) {
        return Err(Error::config(format!(
            "azimuth {azimuth_deg}° outside [-90°, 90°]"
        )));
    }
    let u = unit_direction(azimuth_deg);
    Ok(geometry
        .positions
        .iter()
        .map(|p| -(u[0] * p[0] + u[1] * p[1] + u[2] * p[2]) / geometry.speed_of_sound)
        .collect())
}

/// PHAT-weighted cross-spectrum of channels `i` and `j`, shaped
/// `frames × bins`.
pub fn gcc_phat_cross(stack: &StftStack, i: usize, j: usize) -> Result<Array2<Complex64>> {
    let m = stack.channels();
    if i == j || i >= m || j >= m {
        return Err(Error::config(format!(
            "channel pair ({i}, {j}) invalid for {m} channels"
        )));
    }
    let data = stack.data();
    Ok(Array2::from_shape_fn(
        (stack.frames(), stack.bins()),
        |(t, k)| phat(data[[i, t, k]] * data[[j, t, k]].conj()),
    ))
}

fn phat(cross: Complex64) -> Complex64 {
    cross / cross.norm().max(PHAT_EPSILON)
}

/// Azimuthal SRP-PHAT energy over `grid`.
///
/// Summation order is fixed (pairs in lexicographic order, bins ascending),
/// so results are bit-identical regardless of thread scheduling.
pub fn srp_phat(
    stack: &StftStack,
    geometry: &ArrayGeometry,
    grid: &AzimuthGrid,
) -> Result<DoaResponse> {
    let m = stack.channels();
    if m < 2 {
        return Err(Error::invariant("SRP-PHAT needs at least two channels"));
    }
    if geometry.len() != m {
        return Err(Error::DimensionMismatch {
            expected: geometry.len(),
            found: m,
        });
    }
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
        .collect();
    let (frames, bins) = (stack.frames(), stack.bins());
    let data = stack.data();

    // Σ_t G_ij[t, k] per pair.
    let summed: Vec<Vec<Complex64>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            (0..bins)
                .map(|k| {
                    (0..frames)
                        .map(|t| phat(data[[i, t, k]] * data[[j, t, k]].conj()))
                        .fold(Complex64::new(0.0, 0.0), |acc, g| acc + g)
                })
                .collect()
        })
        .collect();

    let freqs = stack.bin_freqs();
    let norm = (pairs.len() * frames * bins) as f64;
    let energies = (0..grid.bins())
        .into_par_iter()
        .map(|b| -> Result<f64> {
            let delays = steering_delays(geometry, grid.center(b))?;
            let mut total = 0.0;
            for (p, &(i, j)) in pairs.iter().enumerate() {
                let dd = delays[i] - delays[j];
                for (k, g) in summed[p].iter().enumerate() {
                    let phase = 2.0 * std::f64::consts::PI * freqs[k] * dd;
                    let (s, c) = phase.sin_cos();
                    total += g.re * c - g.im * s;
                }
            }
            Ok(total.max(0.0) / norm)
        })
        .collect::<Result<Vec<f64>>>()?;
    DoaResponse::new(energies, *grid)
}

/// Center of the maximal bin. Ties go to the bin nearest 0°, then to the left.
pub fn argmax_doa(response: &DoaResponse) -> f64 {
    let grid = response.grid;
    let best = (0..grid.bins())
        .min_by(|&a, &b| {
            let (ea, eb) = (response.energies[a], response.energies[b]);
            eb.total_cmp(&ea)
                .then(grid.center(a).abs().total_cmp(&grid.center(b).abs()))
                .then(a.cmp(&b))
        })
        .expect("grid has at least one bin");
    grid.center(best)
}
