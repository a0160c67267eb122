//! Synthetic T-junction scenes: a broadband moving source, occluding
//! buildings and first-order specular wall reflections.

pub mod benchmark;
pub mod geometry;
pub mod render;
pub mod scenario;

pub use benchmark::{
    benchmark_samples, benchmark_scenario, benchmark_scenarios, make_benchmark, render_all,
    t_junction, BenchmarkConfig, BenchmarkSample, Junction,
};
pub use geometry::{
    image_sources, line_of_sight, segments_intersect, ImageSource, Point, Reflection, Wall,
};
pub use render::{
    first_line_of_sight, noise_std, plane_wave, render, source_signal, RenderedRecording,
};
pub use scenario::{ArrayPose, Scenario, SignalSpec, TonalSpec, Waypoint, DEFAULT_SNR_DB};
