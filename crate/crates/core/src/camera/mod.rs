//! Pinhole cameras, view-set ingestion and projection of Gaussians to screen space.

mod project;
pub mod sh;

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use project::{project, ProjectedGaussian, LOW_PASS, NEAR_PLANE};

use crate::error::Error;

const ROTATION_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error, PartialEq)]
pub enum ViewError {
    #[error("view set is empty")]
    Empty,
    #[error("duplicate view name `{0}`")]
    DuplicateName(String),
    #[error("view `{name}`: {msg}")]
    Invalid { name: String, msg: String },
}

/// Pinhole camera. Camera space is x right, y down, z forward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraView {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Row-major 4×4 rigid transform.
    pub world_to_camera: [f64; 16],
}

impl CameraView {
    pub fn rotation(&self) -> [[f64; 3]; 3] {
        let m = &self.world_to_camera;
        [[m[0], m[1], m[2]], [m[4], m[5], m[6]], [m[8], m[9], m[10]]]
    }

    pub fn translation(&self) -> [f64; 3] {
        let m = &self.world_to_camera;
        [m[3], m[7], m[11]]
    }

    /// Camera center in world coordinates, `-Rᵀ t`.
    pub fn center(&self) -> [f64; 3] {
        let r = self.rotation();
        let t = self.translation();
        [0, 1, 2].map(|i| -(r[0][i] * t[0] + r[1][i] * t[1] + r[2][i] * t[2]))
    }

    pub fn to_camera(&self, p: [f64; 3]) -> [f64; 3] {
        let m = &self.world_to_camera;
        [0, 1, 2].map(|r| m[4 * r] * p[0] + m[4 * r + 1] * p[1] + m[4 * r + 2] * p[2] + m[4 * r + 3])
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Camera at `eye` looking at `target`, with world `up` mapping to screen up.
    pub fn look_at(
        name: impl Into<String>,
        width: u32,
        height: u32,
        focal: f64,
        eye: [f64; 3],
        target: [f64; 3],
        up: [f64; 3],
    ) -> Self {
        let forward = normalize(sub(target, eye));
        let right = normalize(cross(forward, up));
        let down = cross(forward, right);
        let rows = [right, down, forward];
        let mut m = [0.0; 16];
        for (r, axis) in rows.iter().enumerate() {
            m[4 * r..4 * r + 3].copy_from_slice(axis);
            m[4 * r + 3] = -dot(*axis, eye);
        }
        m[15] = 1.0;
        Self {
            name: name.into(),
            width,
            height,
            fx: focal,
            fy: focal,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            world_to_camera: m,
        }
    }

    pub fn validate(&self) -> Result<(), ViewError> {
        let invalid = |msg: String| ViewError::Invalid {
            name: self.name.clone(),
            msg,
        };
        if self.width == 0 || self.height == 0 {
            return Err(invalid(format!("image size {}x{}", self.width, self.height)));
        }
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(invalid(format!("focal lengths must be positive ({}, {})", self.fx, self.fy)));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(invalid("non-finite principal point".into()));
        }
        if self.world_to_camera.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite world_to_camera".into()));
        }
        let m = &self.world_to_camera;
        if m[12] != 0.0 || m[13] != 0.0 || m[14] != 0.0 || m[15] != 1.0 {
            return Err(invalid("world_to_camera bottom row must be [0, 0, 0, 1]".into()));
        }
        let r = self.rotation();
        for i in 0..3 {
            for j in 0..3 {
                let d = dot(r[i], r[j]);
                let expect = if i == j { 1.0 } else { 0.0 };
                if (d - expect).abs() > ROTATION_TOLERANCE {
                    return Err(invalid("rotation block is not orthonormal".into()));
                }
            }
        }
        if dot(cross(r[0], r[1]), r[2]) < 0.0 {
            return Err(invalid("rotation block is a reflection".into()));
        }
        Ok(())
    }
}

/// Nonempty list of uniquely named views.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSet {
    views: Vec<CameraView>,
}

impl ViewSet {
    pub fn new(views: Vec<CameraView>) -> Result<Self, ViewError> {
        if views.is_empty() {
            return Err(ViewError::Empty);
        }
        let mut names = HashSet::new();
        for v in &views {
            v.validate()?;
            if !names.insert(v.name.as_str()) {
                return Err(ViewError::DuplicateName(v.name.clone()));
            }
        }
        Ok(Self { views })
    }

    pub fn views(&self) -> &[CameraView] {
        &self.views
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn from_json(json: &str) -> Result<Self, Error> {
        let views: Vec<CameraView> = serde_json::from_str(json)?;
        Ok(Self::new(views)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.views).expect("views serialize")
    }
}

pub fn load_views(path: impl AsRef<Path>) -> Result<ViewSet, Error> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ViewSet::from_json(&text)
}

pub fn save_views(views: &ViewSet, path: impl AsRef<Path>) -> Result<(), Error> {
    let path = path.as_ref();
    std::fs::write(path, views.to_json()).map_err(|e| Error::io(path, e))
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = dot(a, a).sqrt();
    a.map(|v| v / n)
}
