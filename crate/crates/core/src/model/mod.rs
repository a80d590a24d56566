//! Scene data and the 3DGS PLY codec.
//!
//! Attributes are kept exactly as stored on disk (log-scales, opacity logits, unnormalized
//! quaternions); activations are applied on read through the accessor methods.

mod ply;

use std::collections::BTreeSet;

pub use ply::{load_ply, read_ply, save_ply, write_ply, PlyError, PLY_PROPERTIES};
use thiserror::Error;

/// Number of higher-order SH coefficients per channel for degree 3.
pub const SH_REST_PER_CHANNEL: usize = 15;
pub const SH_REST_LEN: usize = 3 * SH_REST_PER_CHANNEL;
pub const MAX_SH_DEGREE: usize = 3;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SceneError {
    #[error("scene must contain at least one gaussian")]
    Empty,
    #[error("unknown gaussian id {id} (scene has {len})")]
    UnknownId { id: usize, len: usize },
}

/// One anisotropic 3D Gaussian in raw (pre-activation) storage form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub position: [f32; 3],
    /// Read and written back, never used.
    pub normal: [f32; 3],
    pub sh_dc: [f32; 3],
    /// Channel-major: `sh_rest[ch * 15 + i]` is coefficient `i + 1` of channel `ch`.
    pub sh_rest: [f32; SH_REST_LEN],
    pub opacity_logit: f32,
    /// Natural-log scales.
    pub scale: [f32; 3],
    /// Quaternion (w, x, y, z), not necessarily normalized.
    pub rotation: [f32; 4],
}

impl Default for Gaussian {
    fn default() -> Self {
        Self {
            position: [0.0; 3],
            normal: [0.0; 3],
            sh_dc: [0.0; 3],
            sh_rest: [0.0; SH_REST_LEN],
            opacity_logit: 0.0,
            scale: [0.0; 3],
            rotation: [1.0, 0.0, 0.0, 0.0],
        }
    }
}

impl Gaussian {
    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_logit as f64)
    }

    pub fn scales(&self) -> [f64; 3] {
        self.scale.map(|s| (s as f64).exp())
    }

    /// Unit quaternion (w, x, y, z). A zero quaternion maps to the identity.
    pub fn unit_rotation(&self) -> [f64; 4] {
        let q = self.rotation.map(|v| v as f64);
        let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
        if n == 0.0 || !n.is_finite() {
            [1.0, 0.0, 0.0, 0.0]
        } else {
            q.map(|v| v / n)
        }
    }

    /// SH coefficient `coeff` (0 = DC) of channel `ch`.
    #[inline]
    pub fn sh(&self, ch: usize, coeff: usize) -> f64 {
        if coeff == 0 {
            self.sh_dc[ch] as f64
        } else {
            self.sh_rest[ch * SH_REST_PER_CHANNEL + coeff - 1] as f64
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// An ordered, nonempty set of Gaussians. A Gaussian's id is its index.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianScene {
    gaussians: Vec<Gaussian>,
}

impl GaussianScene {
    pub fn new(gaussians: Vec<Gaussian>) -> Result<Self, SceneError> {
        if gaussians.is_empty() {
            return Err(SceneError::Empty);
        }
        Ok(Self { gaussians })
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    /// Always false; kept for API symmetry with collections.
    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    pub fn gaussians(&self) -> &[Gaussian] {
        &self.gaussians
    }

    pub fn get(&self, id: usize) -> Option<&Gaussian> {
        self.gaussians.get(id)
    }

    pub fn into_gaussians(self) -> Vec<Gaussian> {
        self.gaussians
    }

    /// Keeps exactly the Gaussians in `keep`, in their original relative order.
    ///
    /// Returns the new scene and the old→new id mapping (`None` for removed ids).
    pub fn subset(
        &self,
        keep: &BTreeSet<usize>,
    ) -> Result<(GaussianScene, Vec<Option<usize>>), SceneError> {
        if let Some(&id) = keep.iter().next_back() {
            if id >= self.len() {
                return Err(SceneError::UnknownId { id, len: self.len() });
            }
        }
        let mut mapping = vec![None; self.len()];
        let mut kept = Vec::with_capacity(keep.len());
        for &id in keep {
            mapping[id] = Some(kept.len());
            kept.push(self.gaussians[id]);
        }
        Ok((GaussianScene::new(kept)?, mapping))
    }

    /// Complement form of [`subset`](Self::subset).
    pub fn without(
        &self,
        remove: &BTreeSet<usize>,
    ) -> Result<(GaussianScene, Vec<Option<usize>>), SceneError> {
        if let Some(&id) = remove.iter().next_back() {
            if id >= self.len() {
                return Err(SceneError::UnknownId { id, len: self.len() });
            }
        }
        let keep = (0..self.len()).filter(|i| !remove.contains(i)).collect();
        self.subset(&keep)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene(n: usize) -> GaussianScene {
        GaussianScene::new(
            (0..n)
                .map(|i| Gaussian {
                    position: [i as f32, 0.0, 0.0],
                    ..Default::default()
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_logit_is_half_opacity() {
        assert_eq!(Gaussian::default().opacity(), 0.5);
    }

    #[test]
    fn empty_scene_rejected() {
        assert_eq!(GaussianScene::new(vec![]), Err(SceneError::Empty));
    }

    #[test]
    fn subset_all_is_identity() {
        let s = scene(4);
        let (sub, map) = s.subset(&(0..4).collect()).unwrap();
        assert_eq!(sub, s);
        assert_eq!(map, vec![Some(0), Some(1), Some(2), Some(3)]);
    }

    #[test]
    fn subset_preserves_order() {
        let s = scene(3);
        let (sub, map) = s.subset(&[0, 2].into_iter().collect()).unwrap();
        assert_eq!(sub.len(), 2);
        assert_eq!(sub.gaussians()[1].position[0], 2.0);
        assert_eq!(map, vec![Some(0), None, Some(1)]);
    }

    #[test]
    fn subset_errors() {
        let s = scene(3);
        assert_eq!(s.subset(&BTreeSet::new()).unwrap_err(), SceneError::Empty);
        assert_eq!(
            s.subset(&[1, 3].into_iter().collect()).unwrap_err(),
            SceneError::UnknownId { id: 3, len: 3 }
        );
    }

    #[test]
    fn zero_quaternion_maps_to_identity() {
        let g = Gaussian {
            rotation: [0.0; 4],
            ..Default::default()
        };
        assert_eq!(g.unit_rotation(), [1.0, 0.0, 0.0, 0.0]);
        let g = Gaussian {
            rotation: [2.0, 0.0, 0.0, 0.0],
            ..Default::default()
        };
        assert_eq!(g.unit_rotation(), [1.0, 0.0, 0.0, 0.0]);
    }
}
