//! Seeded synthetic scenes for tests and acceptance runs.
//!
//! Randomness comes from SplitMix64 (Steele, Lea & Flood 2014): the state advances by
//! `0x9E3779B97F4A7C15` and each output is mixed with
//! `z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31`.
//! Uniform doubles take the top 53 bits. All draws happen in a fixed order, so a spec maps to
//! the same scene on every platform.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::camera::sh::rgb_to_dc;
use crate::camera::{CameraView, ViewSet};
use crate::model::{logit, Gaussian, GaussianScene, SH_REST_LEN};

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        (self.next_f64() * n as f64) as usize
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            items.swap(i, self.below(i + 1));
        }
    }

    /// Uniformly distributed unit quaternion (w, x, y, z).
    pub fn rotation(&mut self) -> [f64; 4] {
        let (u1, u2, u3) = (self.next_f64(), self.next_f64(), self.next_f64());
        let tau = std::f64::consts::TAU;
        let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
        [
            b * (tau * u3).cos(),
            a * (tau * u2).sin(),
            a * (tau * u2).cos(),
            b * (tau * u3).sin(),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layering {
    /// Gaussians scattered uniformly through the extent cube.
    Random,
    /// Semi-transparent camera-facing layers stacked in depth.
    Layered,
    /// An opaque wall in front of small Gaussians that no camera can see.
    WallOccluder,
    /// Pairs of identical Gaussians at the same location.
    CoincidentPairs,
}

impl std::str::FromStr for Layering {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random" => Ok(Self::Random),
            "layered" => Ok(Self::Layered),
            "wall-occluder" => Ok(Self::WallOccluder),
            "coincident-pairs" => Ok(Self::CoincidentPairs),
            _ => Err(format!(
                "unknown mode `{s}` (random, layered, wall-occluder, coincident-pairs)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub seed: u64,
    pub count: usize,
    /// Half-size of the region holding the Gaussians.
    pub extent: f64,
    /// Activated opacity range.
    pub opacity: [f64; 2],
    /// Linear scale range, in world units.
    pub scale: [f64; 2],
    /// Higher-order SH coefficients are drawn from `±sh_rest`.
    pub sh_rest: f64,
    pub layering: Layering,
    pub views: usize,
    pub width: u32,
    pub height: u32,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            count: 50,
            extent: 1.0,
            opacity: [0.05, 0.4],
            scale: [0.08, 0.3],
            sh_rest: 0.05,
            layering: Layering::Layered,
            views: 3,
            width: 64,
            height: 64,
        }
    }
}

const LAYER_SIZE: usize = 10;
const WALL_MIN: usize = 4;
const CAMERA_DISTANCE: f64 = 4.0;
const ORBIT_HALF_ARC_DEG: f64 = 15.0;

impl SynthSpec {
    /// Ids of the Gaussians hidden behind the wall in [`Layering::WallOccluder`] mode.
    pub fn hidden_ids(&self) -> Range<usize> {
        match self.layering {
            Layering::WallOccluder => {
                let total = self.count.max(WALL_MIN + 1);
                let hidden = (total / 10).max(1);
                total - hidden..total
            }
            _ => 0..0,
        }
    }
}

struct Builder<'a> {
    spec: &'a SynthSpec,
    rng: SplitMix64,
}

impl Builder<'_> {
    fn gaussian(&mut self, position: [f64; 3], scale: [f64; 3], rotation: [f64; 4], opacity: f64) -> Gaussian {
        let color = [0, 1, 2].map(|_| self.rng.uniform(0.05, 0.95));
        let mut sh_rest = [0f32; SH_REST_LEN];
        for v in sh_rest.iter_mut() {
            *v = self.rng.uniform(-self.spec.sh_rest, self.spec.sh_rest) as f32;
        }
        Gaussian {
            position: position.map(|v| v as f32),
            normal: [0.0; 3],
            sh_dc: color.map(|c| rgb_to_dc(c) as f32),
            sh_rest,
            opacity_logit: logit(opacity) as f32,
            scale: scale.map(|s| s.ln() as f32),
            rotation: rotation.map(|v| v as f32),
        }
    }

    fn scale(&mut self) -> f64 {
        let [lo, hi] = self.spec.scale;
        self.rng.uniform(lo.ln(), hi.ln()).exp()
    }

    fn opacity(&mut self) -> f64 {
        let [lo, hi] = self.spec.opacity;
        self.rng.uniform(lo, hi)
    }

    fn random(&mut self) -> Gaussian {
        let e = self.spec.extent;
        let p = [0, 1, 2].map(|_| self.rng.uniform(-e, e));
        let s = [0, 1, 2].map(|_| self.scale());
        let q = self.rng.rotation();
        let a = self.opacity();
        self.gaussian(p, s, q, a)
    }

    /// Disk facing the cameras at depth `z`, optionally pinned near the optical axis.
    fn disk(&mut self, z: f64, centered: bool) -> Gaussian {
        let e = self.spec.extent;
        let spread = if centered { 0.05 * e } else { 0.6 * e };
        let x = self.rng.uniform(-spread, spread);
        let y = self.rng.uniform(-spread, spread);
        let s = [self.scale(), self.scale(), 0.02 * e];
        let half = self.rng.uniform(0.0, std::f64::consts::PI);
        let q = [half.cos(), 0.0, 0.0, half.sin()];
        let a = self.opacity();
        self.gaussian([x, y, z], s, q, a)
    }
}

/// Builds the scene and a small orbit of cameras facing it.
///
/// Cameras sit at distance `4·extent` on the −z side, spread over ±15° around the y axis.
/// Wall-occluder mode always holds at least five Gaussians.
pub fn generate(spec: &SynthSpec) -> (GaussianScene, ViewSet) {
    let mut b = Builder {
        spec,
        rng: SplitMix64::new(spec.seed),
    };
    let e = spec.extent;
    let count = spec.count.max(1);
    let gaussians: Vec<Gaussian> = match spec.layering {
        Layering::Random => (0..count).map(|_| b.random()).collect(),
        Layering::Layered => {
            let layers = count.div_ceil(LAYER_SIZE);
            (0..count)
                .map(|i| {
                    let layer = i / LAYER_SIZE;
                    let z = if layers == 1 {
                        0.0
                    } else {
                        -e + 2.0 * e * layer as f64 / (layers - 1) as f64
                    };
                    b.disk(z, i % LAYER_SIZE == 0)
                })
                .collect()
        }
        Layering::WallOccluder => {
            let hidden = spec.hidden_ids();
            let total = hidden.end;
            let mut out = Vec::with_capacity(total);
            for i in 0..hidden.start {
                let z = -0.5 * e - 0.01 * e * i as f64;
                if i < WALL_MIN {
                    // screen-filling, nearly opaque
                    let p = [b.rng.uniform(-0.1, 0.1) * e, b.rng.uniform(-0.1, 0.1) * e, z];
                    let g = b.gaussian(p, [1.5 * e, 1.5 * e, 0.02 * e], [1.0, 0.0, 0.0, 0.0], 0.999);
                    out.push(g);
                } else {
                    let mut g = b.disk(z, false);
                    g.opacity_logit = logit(0.9) as f32;
                    out.push(g);
                }
            }
            for _ in hidden {
                let p = [b.rng.uniform(-0.2, 0.2) * e, b.rng.uniform(-0.2, 0.2) * e, 0.5 * e];
                let s = 0.03 * e;
                let q = b.rng.rotation();
                let a = b.opacity();
                out.push(b.gaussian(p, [s; 3], q, a));
            }
            out
        }
        Layering::CoincidentPairs => {
            let mut out = Vec::with_capacity(count);
            while out.len() < count {
                let g = b.random();
                out.push(g);
                if out.len() < count {
                    out.push(g);
                }
            }
            out
        }
    };

    let focal = 1.2 * spec.width.max(spec.height) as f64;
    let n = spec.views.max(1);
    let views = (0..n)
        .map(|i| {
            let t = if n == 1 { 0.0 } else { -1.0 + 2.0 * i as f64 / (n - 1) as f64 };
            let theta = (ORBIT_HALF_ARC_DEG * t).to_radians();
            let d = CAMERA_DISTANCE * e;
            let eye = [d * theta.sin(), 0.1 * e * (i as f64).sin(), -d * theta.cos()];
            CameraView::look_at(format!("view_{i:03}"), spec.width, spec.height, focal, eye, [0.0; 3], [0.0, 1.0, 0.0])
        })
        .collect();
    (
        GaussianScene::new(gaussians).expect("count >= 1"),
        ViewSet::new(views).expect("generated views are valid"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::write_ply;
    use crate::raster::{render, RenderOptions};

    #[test]
    fn splitmix_reference_values() {
        // first outputs for seed 1234567, from the reference C implementation
        let mut rng = SplitMix64::new(1234567);
        let expect = [
            6457827717110365317u64,
            3203168211198807973,
            9817491932198370423,
            4593380528125082431,
            16408922859458223821,
        ];
        for e in expect {
            assert_eq!(rng.next_u64(), e);
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        for layering in [Layering::Random, Layering::Layered, Layering::WallOccluder, Layering::CoincidentPairs] {
            let spec = SynthSpec {
                seed: 42,
                layering,
                ..Default::default()
            };
            let (a, va) = generate(&spec);
            let (b, vb) = generate(&spec);
            assert_eq!(write_ply(&a), write_ply(&b));
            assert_eq!(va, vb);
            assert_eq!(a.len(), 50);
            let other = generate(&SynthSpec { seed: 43, ..spec }).0;
            assert_ne!(write_ply(&a), write_ply(&other));
        }
    }

    #[test]
    fn layered_center_has_overlap() {
        let spec = SynthSpec::default();
        let (scene, views) = generate(&spec);
        let opts = RenderOptions {
            record: true,
            ..Default::default()
        };
        for v in views.views() {
            let out = render::<f32>(&scene, v, &opts);
            let h = out.contributions.unwrap();
            let center = (v.height / 2 * v.width + v.width / 2) as usize;
            assert!(h.pixel(center).len() >= 2, "{} has {}", v.name, h.pixel(center).len());
        }
    }

    #[test]
    fn wall_hides_its_hidden_gaussians() {
        let spec = SynthSpec {
            seed: 5,
            layering: Layering::WallOccluder,
            ..Default::default()
        };
        let (scene, views) = generate(&spec);
        let hidden = spec.hidden_ids();
        assert!(!hidden.is_empty());
        let opts = RenderOptions {
            record: true,
            ..Default::default()
        };
        for v in views.views() {
            let projected = crate::camera::project(&scene, v, 3);
            // the hidden Gaussians are on screen, so only the wall keeps them out
            assert!(projected.iter().any(|p| hidden.contains(&(p.id as usize))));
            let out = render::<f32>(&scene, v, &opts);
            let h = out.contributions.unwrap();
            for i in 0..h.pixel_count() {
                assert!(h.pixel(i).iter().all(|c| !hidden.contains(&(c.id as usize))));
            }
        }
    }

    #[test]
    fn coincident_pairs_are_identical() {
        let (scene, _) = generate(&SynthSpec {
            layering: Layering::CoincidentPairs,
            count: 7,
            ..Default::default()
        });
        let g = scene.gaussians();
        assert_eq!(g.len(), 7);
        assert_eq!(g[0], g[1]);
        assert_eq!(g[4], g[5]);
        assert_ne!(g[1], g[2]);
    }

    #[test]
    fn mode_names_parse() {
        assert_eq!("wall-occluder".parse::<Layering>(), Ok(Layering::WallOccluder));
        assert!("walls".parse::<Layering>().is_err());
        let json = serde_json::to_string(&Layering::CoincidentPairs).unwrap();
        assert_eq!(json, "\"coincident-pairs\"");
    }
}
