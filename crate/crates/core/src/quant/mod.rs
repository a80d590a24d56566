//! Per-Gaussian removal error from a single forward pass.
//!
//! For a pixel with front-to-back contributions `(c_k, α_k)` and final color `C`, removing
//! contributor `k` changes the pixel by exactly `T_k α_k (c_k − b_{k+1})`, where `b_{k+1}` is
//! the unattenuated color of everything behind `k` (background included). `b_{k+1}` is
//! recovered from cached prefix sums as `(C − P_k) / (T_{k+1} + ε)`, so no re-render is needed.

mod histogram;
mod scores;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use histogram::{histogram, write_histogram, HistogramRow};
pub use scores::{read_scores, write_scores};

use crate::camera::{project, CameraView, ViewSet};
use crate::model::GaussianScene;
use crate::raster::{blend_step, finish_pixel, PixelContribution, PixelScratch, PreparedView, RenderOptions, DEFAULT_N_MAX};
use crate::real::{rgb, Real};

pub const DEFAULT_EPSILON: f64 = 1e-9;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QuantError {
    #[error("histogram needs at least 2 bins, got {0}")]
    BinCount(usize),
    #[error("error buffer covers {buffer} ids but the scene has {scene}")]
    SizeMismatch { buffer: usize, scene: usize },
}

/// Fixed parameters of a quantification run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantConstants {
    /// Guard added to `T_{k+1}` in the background back-solve.
    pub epsilon: f64,
    /// Maximum recorded contributions per pixel.
    pub n_max: usize,
    pub background: [f64; 3],
    pub sh_degree: usize,
}

impl Default for QuantConstants {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            n_max: DEFAULT_N_MAX,
            background: [0.0; 3],
            sh_degree: 3,
        }
    }
}

impl QuantConstants {
    pub fn render_options(&self) -> RenderOptions {
        RenderOptions {
            background: self.background,
            sh_degree: self.sh_degree,
            record: true,
            n_max: self.n_max,
            track_overflow: false,
        }
    }
}

/// How pixel work is scheduled. `Sequential` is the bit-exact reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Sequential,
    /// Row chunks on the current rayon pool, each accumulating into its own shard.
    Parallel,
}

/// Cached prefix sums of one pixel: `prefix_color[k] = P_k`, `transmittance[k] = T_{k+1}`
/// (zero-based `k`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BlendState<T> {
    pub prefix_color: Vec<[T; 3]>,
    pub transmittance: Vec<T>,
}

impl<T: Real> BlendState<T> {
    /// Refills the state from `h` and returns the final pixel color with `background` folded in.
    pub fn fill(&mut self, h: &[PixelContribution<T>], background: [T; 3]) -> [T; 3] {
        self.prefix_color.clear();
        self.transmittance.clear();
        let mut color = [T::zero(); 3];
        let mut t = T::one();
        for e in h {
            blend_step(&mut color, &mut t, e.color, e.alpha);
            self.prefix_color.push(color);
            self.transmittance.push(t);
        }
        finish_pixel(color, t, background)
    }
}

/// Composites `h` front to back, returning `C_render` and the cached prefix state.
pub fn blend_prefix<T: Real>(h: &[PixelContribution<T>], background: [T; 3]) -> ([T; 3], BlendState<T>) {
    let mut state = BlendState::default();
    let c = state.fill(h, background);
    (c, state)
}

/// `(C − P_k) / (T_{k+1} + ε)`, unclamped.
#[inline]
pub fn solve_background<T: Real>(c_render: [T; 3], prefix: [T; 3], t_next: T, epsilon: T) -> [T; 3] {
    let denom = t_next + epsilon;
    [0, 1, 2].map(|ch| (c_render[ch] - prefix[ch]) / denom)
}

/// `‖T_k α_k (c_k − b_{k+1})‖²`.
#[inline]
pub fn delta_se<T: Real>(t_k: T, alpha_k: T, c_k: [T; 3], b_next: [T; 3]) -> T {
    let w = t_k * alpha_k;
    (0..3).fold(T::zero(), |acc, ch| {
        let d = w * (c_k[ch] - b_next[ch]);
        acc + d * d
    })
}

fn for_each_delta<T: Real>(
    h: &[PixelContribution<T>],
    c_render: [T; 3],
    state: &BlendState<T>,
    epsilon: T,
    mut emit: impl FnMut(u32, T),
) {
    for (k, e) in h.iter().enumerate() {
        let t_k = if k == 0 { T::one() } else { state.transmittance[k - 1] };
        let t_next = state.transmittance[k];
        let b = solve_background(c_render, state.prefix_color[k], t_next, epsilon);
        emit(e.id, delta_se(t_k, e.alpha, e.color, b));
    }
}

/// Removal error of every contributor of one pixel, in list order.
///
/// `c_render` and `state` must come from [`blend_prefix`] on the same list; the background is
/// already folded into `c_render`.
pub fn quantify_pixel<T: Real>(
    h: &[PixelContribution<T>],
    c_render: [T; 3],
    state: &BlendState<T>,
    epsilon: T,
) -> Vec<(u32, T)> {
    let mut out = Vec::with_capacity(h.len());
    for_each_delta(h, c_render, state, epsilon, |id, d| out.push((id, d)));
    out
}

/// Accumulated removal error per Gaussian id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBuffer {
    pub delta_se: Vec<f64>,
    /// Number of pixel contributions per id.
    pub touch_count: Vec<u64>,
    pub views: usize,
    pub capped_pixels: u64,
    pub terminated_pixels: u64,
}

impl ErrorBuffer {
    pub fn zeros(len: usize) -> Self {
        Self {
            delta_se: vec![0.0; len],
            touch_count: vec![0; len],
            views: 0,
            capped_pixels: 0,
            terminated_pixels: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.delta_se.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta_se.is_empty()
    }

    /// Elementwise sum.
    pub fn add(&mut self, other: &ErrorBuffer) {
        assert_eq!(self.len(), other.len());
        for (a, b) in self.delta_se.iter_mut().zip(&other.delta_se) {
            *a += b;
        }
        for (a, b) in self.touch_count.iter_mut().zip(&other.touch_count) {
            *a += b;
        }
        self.views += other.views;
        self.capped_pixels += other.capped_pixels;
        self.terminated_pixels += other.terminated_pixels;
    }

    pub fn total(&self) -> f64 {
        self.delta_se.iter().sum()
    }

    fn accumulate_rows<T: Real>(
        &mut self,
        prepared: &PreparedView<T>,
        rows: std::ops::Range<u32>,
        opts: &RenderOptions,
        background: [T; 3],
        epsilon: T,
    ) {
        let mut scratch = PixelScratch::default();
        let mut state = BlendState::default();
        for y in rows {
            for x in 0..prepared.width {
                let pixel = prepared.shade(x, y, opts, background, &mut scratch);
                let h = &scratch.entries;
                let c_render = state.fill(h, background);
                debug_assert_eq!(c_render, pixel);
                self.capped_pixels += scratch.flags.capped as u64;
                self.terminated_pixels += scratch.flags.terminated as u64;
                let (delta, touch) = (&mut self.delta_se, &mut self.touch_count);
                for_each_delta(h, c_render, &state, epsilon, |id, d| {
                    delta[id as usize] += d.as_f64();
                    touch[id as usize] += 1;
                });
            }
        }
    }
}

/// Error buffer of a single view.
pub fn quantify_view<T: Real>(
    scene: &GaussianScene,
    view: &CameraView,
    consts: &QuantConstants,
    execution: Execution,
) -> ErrorBuffer {
    let opts = consts.render_options();
    let projected = project(scene, view, consts.sh_degree);
    let prepared = PreparedView::<T>::new(&projected, view);
    let background = rgb::<T>(consts.background);
    let epsilon = T::from_f64(consts.epsilon);
    let mut buffer = ErrorBuffer::zeros(scene.len());
    match execution {
        Execution::Sequential => {
            buffer.accumulate_rows(&prepared, 0..view.height, &opts, background, epsilon);
        }
        Execution::Parallel => {
            let chunks = rayon::current_num_threads().clamp(1, view.height as usize) as u32;
            let per = view.height.div_ceil(chunks);
            let shards: Vec<ErrorBuffer> = (0..chunks)
                .into_par_iter()
                .map(|i| {
                    let mut shard = ErrorBuffer::zeros(scene.len());
                    let rows = (i * per).min(view.height)..((i + 1) * per).min(view.height);
                    shard.accumulate_rows(&prepared, rows, &opts, background, epsilon);
                    shard
                })
                .collect();
            for shard in &shards {
                buffer.add(shard);
            }
        }
    }
    buffer.views = 1;
    buffer
}

/// Sums per-view buffers over `views` in order. Ground-truth images are never consulted.
pub fn quantify_scene<T: Real>(
    scene: &GaussianScene,
    views: &ViewSet,
    consts: &QuantConstants,
    execution: Execution,
) -> ErrorBuffer {
    let mut total = ErrorBuffer::zeros(scene.len());
    for view in views.views() {
        total.add(&quantify_view::<T>(scene, view, consts, execution));
    }
    total
}

/// [`quantify_scene`] plus its wall time in seconds.
pub fn quantify_scene_timed<T: Real>(
    scene: &GaussianScene,
    views: &ViewSet,
    consts: &QuantConstants,
    execution: Execution,
) -> (ErrorBuffer, f64) {
    let start = Instant::now();
    let buffer = quantify_scene::<T>(scene, views, consts, execution);
    (buffer, start.elapsed().as_secs_f64())
}

#[cfg(test)]
mod tests;
