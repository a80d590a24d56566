//! Tile-binned front-to-back alpha-blending rasterizer.
//!
//! Besides the image, a render can record for every pixel the ordered list of contributions
//! that were actually blended. The image value of a recorded pixel is, bit for bit, the
//! [`blend_step`] fold of that list followed by the residual-transmittance background.

mod image;

use rayon::prelude::*;

pub use image::{read_raw, write_png, write_raw};

use crate::camera::{project, CameraView, ProjectedGaussian};
use crate::model::GaussianScene;
use crate::real::{rgb, Real};

pub const TILE_SIZE: u32 = 16;
/// Contributions with a pixel opacity below this are skipped.
pub const ALPHA_MIN: f64 = 1.0 / 255.0;
pub const ALPHA_MAX: f64 = 0.99;
/// Blending stops before the contribution that would push transmittance below this.
pub const TRANSMITTANCE_MIN: f64 = 1e-4;
pub const DEFAULT_N_MAX: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelContribution<T> {
    pub id: u32,
    pub color: [T; 3],
    pub alpha: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PixelFlags {
    /// The recorded list was truncated at `n_max`.
    pub capped: bool,
    /// Early termination fired.
    pub terminated: bool,
}

impl PixelFlags {
    pub fn any(self) -> bool {
        self.capped || self.terminated
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    pub background: [f64; 3],
    pub sh_degree: usize,
    /// Record per-pixel contribution lists, capped at `n_max`.
    pub record: bool,
    pub n_max: usize,
    /// When recording, also collect the ids that would have contributed after a cap or
    /// termination.
    pub track_overflow: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            background: [0.0; 3],
            sh_degree: 3,
            record: false,
            n_max: DEFAULT_N_MAX,
            track_overflow: false,
        }
    }
}

/// Recorded per-pixel data of a render, in row-major pixel order.
#[derive(Debug, Clone, Default)]
pub struct Contributions<T> {
    offsets: Vec<usize>,
    entries: Vec<PixelContribution<T>>,
    flags: Vec<PixelFlags>,
    overflow_offsets: Vec<usize>,
    overflow: Vec<u32>,
}

impl<T> Contributions<T> {
    pub fn pixel(&self, index: usize) -> &[PixelContribution<T>] {
        &self.entries[self.offsets[index]..self.offsets[index + 1]]
    }

    pub fn flags(&self, index: usize) -> PixelFlags {
        self.flags[index]
    }

    /// Ids past the cap or termination point (empty unless overflow tracking was enabled).
    pub fn overflow(&self, index: usize) -> &[u32] {
        &self.overflow[self.overflow_offsets[index]..self.overflow_offsets[index + 1]]
    }

    pub fn pixel_count(&self) -> usize {
        self.flags.len()
    }
}

#[derive(Debug, Clone)]
pub struct RenderOutput<T> {
    pub width: u32,
    pub height: u32,
    /// Linear RGB, unclamped, row-major.
    pub image: Vec<[T; 3]>,
    pub background: [T; 3],
    pub contributions: Option<Contributions<T>>,
}

impl<T: Real> RenderOutput<T> {
    pub fn pixel(&self, x: u32, y: u32) -> [T; 3] {
        self.image[(y * self.width + x) as usize]
    }

    pub fn image_f64(&self) -> Vec<[f64; 3]> {
        self.image.iter().map(|p| p.map(T::as_f64)).collect()
    }
}

/// One compositing step: `P += T·α·c`, `T *= 1 − α`.
#[inline]
pub fn blend_step<T: Real>(color: &mut [T; 3], transmittance: &mut T, c: [T; 3], alpha: T) {
    let w = *transmittance * alpha;
    for ch in 0..3 {
        color[ch] = color[ch] + w * c[ch];
    }
    *transmittance = *transmittance * (T::one() - alpha);
}

/// `P + T·background`, the final step of every pixel.
#[inline]
pub fn finish_pixel<T: Real>(color: [T; 3], transmittance: T, background: [T; 3]) -> [T; 3] {
    [0, 1, 2].map(|ch| color[ch] + transmittance * background[ch])
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Splat<T> {
    id: u32,
    mean: [T; 2],
    conic: [T; 3],
    opacity: T,
    color: [T; 3],
    rect: [u32; 4],
}

impl<T: Real> Splat<T> {
    fn new(p: &ProjectedGaussian) -> Self {
        Self {
            id: p.id,
            mean: [T::from_f64(p.mean[0]), T::from_f64(p.mean[1])],
            conic: p.conic.map(T::from_f64),
            opacity: T::from_f64(p.opacity),
            color: rgb(p.color),
            rect: p.rect,
        }
    }

    /// Pixel opacity at `(x, y)`, or `None` when outside the footprint or below `ALPHA_MIN`.
    #[inline]
    fn alpha_at(&self, x: u32, y: u32) -> Option<T> {
        let [x0, y0, x1, y1] = self.rect;
        if x < x0 || x > x1 || y < y0 || y > y1 {
            return None;
        }
        let half = T::from_f64(0.5);
        let dx = T::from_f64(x as f64) + half - self.mean[0];
        let dy = T::from_f64(y as f64) + half - self.mean[1];
        let power = -half * (self.conic[0] * dx * dx + self.conic[2] * dy * dy)
            - self.conic[1] * dx * dy;
        if power > T::zero() {
            return None;
        }
        let alpha = (self.opacity * power.exp()).min(T::from_f64(ALPHA_MAX));
        if alpha < T::from_f64(ALPHA_MIN) {
            None
        } else {
            Some(alpha)
        }
    }
}

#[derive(Debug, Default)]
pub(crate) struct PixelScratch<T> {
    pub entries: Vec<PixelContribution<T>>,
    pub overflow: Vec<u32>,
    pub flags: PixelFlags,
}

/// Splats of one view binned into depth-sorted tile lists.
pub(crate) struct PreparedView<T> {
    pub width: u32,
    splats: Vec<Splat<T>>,
    tiles_x: u32,
    tiles: Vec<Vec<u32>>,
}

impl<T: Real> PreparedView<T> {
    pub fn new(projected: &[ProjectedGaussian], view: &CameraView) -> Self {
        let tiles_x = view.width.div_ceil(TILE_SIZE);
        let tiles_y = view.height.div_ceil(TILE_SIZE);
        let mut order: Vec<usize> = (0..projected.len()).collect();
        order.sort_by(|&a, &b| {
            let (pa, pb) = (&projected[a], &projected[b]);
            pa.depth.total_cmp(&pb.depth).then(pa.id.cmp(&pb.id))
        });
        let mut tiles = vec![Vec::new(); (tiles_x * tiles_y) as usize];
        let mut splats = Vec::with_capacity(projected.len());
        for &i in &order {
            let p = &projected[i];
            let s = splats.len() as u32;
            splats.push(Splat::new(p));
            let [x0, y0, x1, y1] = p.rect;
            for ty in y0 / TILE_SIZE..=y1 / TILE_SIZE {
                for tx in x0 / TILE_SIZE..=x1 / TILE_SIZE {
                    tiles[(ty * tiles_x + tx) as usize].push(s);
                }
            }
        }
        Self {
            width: view.width,
            splats,
            tiles_x,
            tiles,
        }
    }

    /// Composites pixel `(x, y)` front to back. With `record`, `scratch` receives the blended
    /// contributions (at most `n_max`) and the image value excludes anything past the cap.
    pub fn shade(&self, x: u32, y: u32, opts: &RenderOptions, background: [T; 3], scratch: &mut PixelScratch<T>) -> [T; 3] {
        scratch.entries.clear();
        scratch.overflow.clear();
        scratch.flags = PixelFlags::default();

        let list = &self.tiles[((y / TILE_SIZE) * self.tiles_x + x / TILE_SIZE) as usize];
        let t_min = T::from_f64(TRANSMITTANCE_MIN);
        let mut color = [T::zero(); 3];
        let mut t = T::one();
        let mut rest = list.iter();
        for &s in rest.by_ref() {
            let splat = &self.splats[s as usize];
            let Some(alpha) = splat.alpha_at(x, y) else {
                continue;
            };
            if t * (T::one() - alpha) < t_min {
                scratch.flags.terminated = true;
                scratch.overflow.push(splat.id);
                break;
            }
            if opts.record {
                if scratch.entries.len() == opts.n_max {
                    scratch.flags.capped = true;
                    scratch.overflow.push(splat.id);
                    break;
                }
                scratch.entries.push(PixelContribution {
                    id: splat.id,
                    color: splat.color,
                    alpha,
                });
            }
            blend_step(&mut color, &mut t, splat.color, alpha);
        }
        if opts.record && opts.track_overflow && scratch.flags.any() {
            for &s in rest {
                let splat = &self.splats[s as usize];
                if splat.alpha_at(x, y).is_some() {
                    scratch.overflow.push(splat.id);
                }
            }
        } else {
            scratch.overflow.clear();
        }
        finish_pixel(color, t, background)
    }
}

struct RowOutput<T> {
    image: Vec<[T; 3]>,
    counts: Vec<usize>,
    entries: Vec<PixelContribution<T>>,
    flags: Vec<PixelFlags>,
    overflow_counts: Vec<usize>,
    overflow: Vec<u32>,
}

/// Renders `scene` from `view`.
pub fn render<T: Real>(scene: &GaussianScene, view: &CameraView, opts: &RenderOptions) -> RenderOutput<T> {
    let projected = project(scene, view, opts.sh_degree);
    render_projected(&projected, view, opts)
}

pub fn render_projected<T: Real>(
    projected: &[ProjectedGaussian],
    view: &CameraView,
    opts: &RenderOptions,
) -> RenderOutput<T> {
    let prepared = PreparedView::<T>::new(projected, view);
    let background = rgb::<T>(opts.background);
    let width = view.width;
    let rows: Vec<RowOutput<T>> = (0..view.height)
        .into_par_iter()
        .map(|y| {
            let mut scratch = PixelScratch::default();
            let mut row = RowOutput {
                image: Vec::with_capacity(width as usize),
                counts: Vec::new(),
                entries: Vec::new(),
                flags: Vec::new(),
                overflow_counts: Vec::new(),
                overflow: Vec::new(),
            };
            for x in 0..width {
                row.image.push(prepared.shade(x, y, opts, background, &mut scratch));
                if opts.record {
                    row.counts.push(scratch.entries.len());
                    row.entries.extend_from_slice(&scratch.entries);
                    row.flags.push(scratch.flags);
                    row.overflow_counts.push(scratch.overflow.len());
                    row.overflow.extend_from_slice(&scratch.overflow);
                }
            }
            row
        })
        .collect();

    let mut image = Vec::with_capacity(view.pixel_count());
    let mut contributions = opts.record.then(|| Contributions {
        offsets: vec![0],
        ..Default::default()
    });
    for row in rows {
        image.extend_from_slice(&row.image);
        if let Some(c) = contributions.as_mut() {
            for n in row.counts {
                c.offsets.push(c.offsets.last().unwrap() + n);
            }
            for n in row.overflow_counts {
                c.overflow_offsets.push(c.overflow_offsets.last().copied().unwrap_or(0) + n);
            }
            c.entries.extend(row.entries);
            c.flags.extend(row.flags);
            c.overflow.extend(row.overflow);
        }
    }
    if let Some(c) = contributions.as_mut() {
        c.overflow_offsets.insert(0, 0);
    }
    RenderOutput {
        width: view.width,
        height: view.height,
        image,
        background,
        contributions,
    }
}
