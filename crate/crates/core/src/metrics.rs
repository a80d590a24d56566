//! Image-quality metrics between renders. Inputs are clamped to `[0, 1]` first; comparison is
//! in the rasterizer's linear space.

use std::fmt::Write as _;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::camera::ViewSet;
use crate::model::GaussianScene;
use crate::raster::{render, RenderOptions, RenderOutput};
use crate::real::Real;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("image sizes differ: {0}x{1} vs {2}x{3}")]
    SizeMismatch(u32, u32, u32, u32),
    #[error("image {0}x{1} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")]
    TooSmall(u32, u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<[f64; 3]>,
}

impl Image {
    pub fn new(width: u32, height: u32, pixels: Vec<[f64; 3]>) -> Self {
        assert_eq!(pixels.len(), width as usize * height as usize);
        Self { width, height, pixels }
    }

    pub fn constant(width: u32, height: u32, value: f64) -> Self {
        Self::new(width, height, vec![[value; 3]; width as usize * height as usize])
    }

    pub fn from_render<T: Real>(out: &RenderOutput<T>) -> Self {
        Self::new(out.width, out.height, out.image_f64())
    }

    fn clamped(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.pixels.iter().map(|p| p.map(|v| v.clamp(0.0, 1.0)))
    }

    fn luma(&self) -> Vec<f64> {
        self.clamped()
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect()
    }
}

fn same_size(a: &Image, b: &Image) -> Result<(), MetricError> {
    if a.width != b.width || a.height != b.height {
        return Err(MetricError::SizeMismatch(a.width, a.height, b.width, b.height));
    }
    Ok(())
}

/// Mean squared difference over all pixels and channels.
pub fn mse(a: &Image, b: &Image) -> Result<f64, MetricError> {
    same_size(a, b)?;
    let sum: f64 = a
        .clamped()
        .zip(b.clamped())
        .map(|(p, q)| (0..3).map(|c| (p[c] - q[c]) * (p[c] - q[c])).sum::<f64>())
        .sum();
    Ok(sum / (a.pixels.len() * 3) as f64)
}

/// `10·log10(1 / MSE)`; `+∞` for identical images.
pub fn psnr(a: &Image, b: &Image) -> Result<f64, MetricError> {
    Ok(psnr_from_mse(mse(a, b)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    }
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let r = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

/// Separable "valid" filtering of a `width × height` plane.
fn filter_valid(plane: &[f64], width: usize, height: usize, w: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = width - SSIM_WINDOW + 1;
    let oh = height - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; ow * height];
    for y in 0..height {
        for x in 0..ow {
            rows[y * ow + x] = (0..SSIM_WINDOW).map(|k| w[k] * plane[y * width + x + k]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|k| w[k] * rows[(y + k) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM of the luma planes (0.299R + 0.587G + 0.114B), 11×11 Gaussian window with
/// σ = 1.5, K1 = 0.01, K2 = 0.03, L = 1, over window positions fully inside the image.
pub fn ssim(a: &Image, b: &Image) -> Result<f64, MetricError> {
    same_size(a, b)?;
    let (w, h) = (a.width as usize, a.height as usize);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricError::TooSmall(a.width, a.height));
    }
    let x = a.luma();
    let y = b.luma();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
    let win = gaussian_window();
    let [mx, my, exx, eyy, exy] = [&x, &y, &xx, &yy, &xy].map(|p| filter_valid(p, w, h, &win));
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let n = mx.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = exx[i] - ux * ux;
            let vy = eyy[i] - uy * uy;
            let cxy = exy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / n as f64)
}

fn finite_or_inf<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViewMetrics {
    pub name: String,
    pub mse: f64,
    #[serde(serialize_with = "finite_or_inf")]
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub views: Vec<ViewMetrics>,
    pub view_count: usize,
    pub mean_mse: f64,
    /// Mean of per-view PSNR values.
    #[serde(serialize_with = "finite_or_inf")]
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

impl MetricReport {
    pub fn from_views(views: Vec<ViewMetrics>) -> Self {
        let n = views.len() as f64;
        Self {
            view_count: views.len(),
            mean_mse: views.iter().map(|v| v.mse).sum::<f64>() / n,
            mean_psnr: views.iter().map(|v| v.psnr).sum::<f64>() / n,
            mean_ssim: views.iter().map(|v| v.ssim).sum::<f64>() / n,
            views,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut out = format!("{:<24} {:>12} {:>10} {:>8}\n", "view", "mse", "psnr_db", "ssim");
        let row = |out: &mut String, name: &str, mse: f64, psnr: f64, ssim: f64| {
            let _ = writeln!(out, "{name:<24} {mse:>12.4e} {psnr:>10.3} {ssim:>8.5}");
        };
        for v in &self.views {
            row(&mut out, &v.name, v.mse, v.psnr, v.ssim);
        }
        row(&mut out, "mean", self.mean_mse, self.mean_psnr, self.mean_ssim);
        out
    }
}

/// Renders both scenes in every view (32-bit) and compares `scene_b` against `scene_a`.
pub fn eval_views(
    scene_a: &GaussianScene,
    scene_b: &GaussianScene,
    views: &ViewSet,
    background: [f64; 3],
    sh_degree: usize,
) -> Result<MetricReport, MetricError> {
    let opts = RenderOptions {
        background,
        sh_degree,
        ..Default::default()
    };
    let per_view = views
        .views()
        .iter()
        .map(|v| {
            let a = Image::from_render(&render::<f32>(scene_a, v, &opts));
            let b = Image::from_render(&render::<f32>(scene_b, v, &opts));
            let m = mse(&a, &b)?;
            Ok(ViewMetrics {
                name: v.name.clone(),
                mse: m,
                psnr: psnr_from_mse(m),
                ssim: ssim(&a, &b)?,
            })
        })
        .collect::<Result<Vec<_>, MetricError>>()?;
    Ok(MetricReport::from_views(per_view))
}
