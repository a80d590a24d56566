use rayon::prelude::*;

use super::{dot, normalize, sh, sub, CameraView};
use crate::model::{GaussianScene, MAX_SH_DEGREE};

/// Gaussians at or in front of this view-space depth are culled.
pub const NEAR_PLANE: f64 = 0.2;
/// Screen-space dilation added to the covariance diagonal, in px².
pub const LOW_PASS: f64 = 0.3;
/// Extent of the screen bounding box in standard deviations.
const EXTENT_SIGMA: f64 = 3.0;
/// Off-screen clamp of the Jacobian evaluation point, as a multiple of the half field of view.
const FRUSTUM_CLAMP: f64 = 1.3;

/// One Gaussian after projection into a view.
///
/// Always computed in 64-bit so that culling and pixel footprints are identical for the
/// 32-bit and 64-bit rasterizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedGaussian {
    pub id: u32,
    /// Screen position in pixels; pixel `(i, j)` is sampled at `(i + 0.5, j + 0.5)`.
    pub mean: [f64; 2],
    /// Screen covariance `(xx, xy, yy)` in px², low-pass floor included.
    pub cov: [f64; 3],
    /// Inverse of `cov`, same layout.
    pub conic: [f64; 3],
    pub depth: f64,
    pub color: [f64; 3],
    pub opacity: f64,
    /// Inclusive pixel rectangle `[x0, y0, x1, y1]` whose centers lie inside the 3σ box,
    /// clipped to the image.
    pub rect: [u32; 4],
}

/// Projects every visible Gaussian of `scene` into `view`, in id order.
pub fn project(scene: &GaussianScene, view: &CameraView, sh_degree: usize) -> Vec<ProjectedGaussian> {
    assert!(sh_degree <= MAX_SH_DEGREE, "sh_degree {sh_degree} > {MAX_SH_DEGREE}");
    let center = view.center();
    scene
        .gaussians()
        .par_iter()
        .enumerate()
        .filter_map(|(id, g)| {
            let pos = g.position.map(|v| v as f64);
            let t = view.to_camera(pos);
            // written so a NaN depth is culled too
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(t[2] > NEAR_PLANE) {
                return None;
            }
            let cov = screen_covariance(view, t, &covariance_3d(g.unit_rotation(), g.scales()));
            let cov = [cov[0] + LOW_PASS, cov[1], cov[2] + LOW_PASS];
            let det = cov[0] * cov[2] - cov[1] * cov[1];
            if !(det > 0.0 && det.is_finite()) {
                return None;
            }
            let conic = [cov[2] / det, -cov[1] / det, cov[0] / det];
            let mean = [
                view.fx * t[0] / t[2] + view.cx,
                view.fy * t[1] / t[2] + view.cy,
            ];
            let rx = EXTENT_SIGMA * cov[0].sqrt();
            let ry = EXTENT_SIGMA * cov[2].sqrt();
            let rect = pixel_rect(mean, rx, ry, view.width, view.height)?;
            let dir = normalize(sub(pos, center));
            Some(ProjectedGaussian {
                id: id as u32,
                mean,
                cov,
                conic,
                depth: t[2],
                color: sh::eval_color(g, sh_degree, dir),
                opacity: g.opacity(),
                rect,
            })
        })
        .collect()
}

/// `R · diag(s)² · Rᵀ` for unit quaternion `q = (w, x, y, z)`.
pub(crate) fn covariance_3d(q: [f64; 4], s: [f64; 3]) -> [[f64; 3]; 3] {
    let [w, x, y, z] = q;
    let r = [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ];
    let m = r.map(|row| [row[0] * s[0], row[1] * s[1], row[2] * s[2]]);
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = dot(m[i], m[j]);
        }
    }
    out
}

/// `J · W · Σ · Wᵀ · Jᵀ` as `(xx, xy, yy)`, without the low-pass floor.
pub(crate) fn screen_covariance(view: &CameraView, t: [f64; 3], sigma: &[[f64; 3]; 3]) -> [f64; 3] {
    let lim_x = FRUSTUM_CLAMP * view.width as f64 / (2.0 * view.fx);
    let lim_y = FRUSTUM_CLAMP * view.height as f64 / (2.0 * view.fy);
    let z = t[2];
    let tx = (t[0] / z).clamp(-lim_x, lim_x) * z;
    let ty = (t[1] / z).clamp(-lim_y, lim_y) * z;
    let j = [
        [view.fx / z, 0.0, -view.fx * tx / (z * z)],
        [0.0, view.fy / z, -view.fy * ty / (z * z)],
    ];
    let w = view.rotation();
    // T = J · W (2×3)
    let mut jw = [[0.0; 3]; 2];
    for r in 0..2 {
        for c in 0..3 {
            jw[r][c] = (0..3).map(|k| j[r][k] * w[k][c]).sum();
        }
    }
    let mut ts = [[0.0; 3]; 2];
    for r in 0..2 {
        for c in 0..3 {
            ts[r][c] = (0..3).map(|k| jw[r][k] * sigma[k][c]).sum();
        }
    }
    let xx = dot(ts[0], jw[0]);
    let xy = dot(ts[0], jw[1]);
    let yy = dot(ts[1], jw[1]);
    [xx, xy, yy]
}

fn pixel_rect(mean: [f64; 2], rx: f64, ry: f64, width: u32, height: u32) -> Option<[u32; 4]> {
    // pixel i is inside when |i + 0.5 - mean| <= r
    let x0 = (mean[0] - rx - 0.5).ceil().max(0.0);
    let x1 = (mean[0] + rx - 0.5).floor().min(width as f64 - 1.0);
    let y0 = (mean[1] - ry - 0.5).ceil().max(0.0);
    let y1 = (mean[1] + ry - 0.5).floor().min(height as f64 - 1.0);
    if !(x0 <= x1 && y0 <= y1) {
        return None;
    }
    Some([x0 as u32, y0 as u32, x1 as u32, y1 as u32])
}
