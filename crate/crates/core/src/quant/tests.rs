use proptest::prelude::*;

use super::*;
use crate::camera::{project, ViewSet};
use crate::oracle::background_direct;
use crate::raster::{ALPHA_MAX, ALPHA_MIN};
use crate::synth::{self, Layering, SynthSpec};

fn gray(id: u32, alpha: f64, c: f64) -> PixelContribution<f64> {
    PixelContribution {
        id,
        color: [c; 3],
        alpha,
    }
}

/// Pixel color after removing entry `k` (zero-based), by re-blending the rest.
fn leave_out(h: &[PixelContribution<f64>], k: usize, bg: [f64; 3]) -> [f64; 3] {
    let mut c = [0.0; 3];
    let mut t = 1.0;
    for (j, e) in h.iter().enumerate() {
        if j != k {
            blend_step(&mut c, &mut t, e.color, e.alpha);
        }
    }
    finish_pixel(c, t, bg)
}

fn se(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|c| (a[c] - b[c]) * (a[c] - b[c])).sum()
}

#[test]
fn blend_prefix_empty() {
    let (c, state) = blend_prefix::<f64>(&[], [0.2, 0.3, 0.4]);
    assert_eq!(c, [0.2, 0.3, 0.4]);
    assert!(state.prefix_color.is_empty() && state.transmittance.is_empty());
}

#[test]
fn blend_prefix_single_and_pair() {
    let (c, state) = blend_prefix(&[gray(0, 0.5, 1.0)], [0.0; 3]);
    assert_eq!(c, [0.5; 3]);
    assert_eq!(state.prefix_color, vec![[0.5; 3]]);
    assert_eq!(state.transmittance, vec![0.5]);

    let (c, state) = blend_prefix(&[gray(0, 0.5, 1.0), gray(1, 0.5, 1.0)], [0.0; 3]);
    assert_eq!(c, [0.75; 3]);
    assert_eq!(state.prefix_color, vec![[0.5; 3], [0.75; 3]]);
    assert_eq!(state.transmittance, vec![0.5, 0.25]);
}

#[test]
fn solve_background_cases() {
    assert_eq!(solve_background([0.3; 3], [0.3; 3], 0.5, 1e-9), [0.0; 3]);
    assert_eq!(solve_background([0.1, 0.2, 0.3], [0.0; 3], 1.0, 0.0), [0.1, 0.2, 0.3]);
    let h = [gray(0, 0.5, 1.0), gray(1, 0.5, 1.0)];
    let (c, s) = blend_prefix(&h, [0.0; 3]);
    let b = solve_background(c, s.prefix_color[0], s.transmittance[0], 1e-9);
    let direct = background_direct(&h, 1, [0.0; 3]);
    assert_eq!(direct, [0.5; 3]);
    for ch in 0..3 {
        assert!((b[ch] - direct[ch]).abs() <= 0.5 * 2e-9 / 0.5);
    }
}

#[test]
fn delta_se_cases() {
    assert_eq!(delta_se(0.7, 0.3, [0.2, 0.4, 0.6], [0.2, 0.4, 0.6]), 0.0);
    assert_eq!(delta_se(1.0, 1.0, [1.0, 0.0, 0.0], [0.0; 3]), 1.0);
    assert_eq!(delta_se(1.0, 0.5, [1.0; 3], [0.5; 3]), 3.0 * 0.0625);
}

#[test]
fn two_gaussian_pixel_matches_leave_one_out() {
    // single channel carries the worked example; the others are zero
    let h = [
        PixelContribution { id: 4, color: [1.0, 0.0, 0.0], alpha: 0.5 },
        PixelContribution { id: 9, color: [1.0, 0.0, 0.0], alpha: 0.5 },
    ];
    let (c, s) = blend_prefix(&h, [0.0; 3]);
    let out = quantify_pixel(&h, c, &s, 1e-9);
    assert_eq!(out.len(), 2);
    for (k, (id, d)) in out.into_iter().enumerate() {
        assert_eq!(id, h[k].id);
        let oracle = se(c, leave_out(&h, k, [0.0; 3]));
        assert_eq!(oracle, 0.0625);
        assert!((d - 0.0625).abs() < 1e-9, "{d}");
    }
    // with ε = 0 the dyadic example is exact
    let (c, s) = blend_prefix(&h, [0.0; 3]);
    assert_eq!(quantify_pixel(&h, c, &s, 0.0), vec![(4, 0.0625), (9, 0.0625)]);
}

#[test]
fn occluded_rear_contributor_is_suppressed() {
    let h = [gray(0, 0.99, 0.2), gray(1, 0.6, 0.9)];
    let (c, s) = blend_prefix(&h, [0.0; 3]);
    let out = quantify_pixel(&h, c, &s, 1e-9);
    let rear = out[1].1;
    let b2 = background_direct(&h, 2, [0.0; 3]);
    let bound = (0.01 * 0.6f64 * (se([0.9; 3], b2)).sqrt()).powi(2);
    assert!(rear <= bound * (1.0 + 1e-6));
    assert!((rear - se(c, leave_out(&h, 1, [0.0; 3]))).abs() < 1e-12);
    // same contributor unoccluded
    let alone = delta_se(1.0, 0.6, [0.9; 3], b2);
    assert!(rear <= 1e-4 * alone * (1.0 + 1e-9));
}

#[test]
fn empty_list_emits_nothing() {
    let (c, s) = blend_prefix::<f32>(&[], [0.0; 3]);
    assert!(quantify_pixel(&[], c, &s, 1e-9).is_empty());
}

#[test]
fn redundant_contributors_have_zero_error() {
    // every contributor equals the background behind it: all dyadic, exact with ε = 0
    let bg = [0.25; 3];
    let h = [gray(0, 0.5, 0.25), gray(1, 0.25, 0.25), gray(2, 0.75, 0.25)];
    let (c, s) = blend_prefix(&h, bg);
    for (k, (_, d)) in quantify_pixel(&h, c, &s, 0.0).into_iter().enumerate() {
        let b = solve_background(c, s.prefix_color[k], s.transmittance[k], 0.0);
        assert_eq!(b, h[k].color);
        assert_eq!(d, 0.0);
    }
    // in 32-bit the default ε is absorbed by T_{k+1} and the result is still exact
    let h32: Vec<PixelContribution<f32>> = h
        .iter()
        .map(|e| PixelContribution { id: e.id, color: e.color.map(|v| v as f32), alpha: e.alpha as f32 })
        .collect();
    let (c, s) = blend_prefix(&h32, [0.25f32; 3]);
    assert!(quantify_pixel(&h32, c, &s, 1e-9).iter().all(|&(_, d)| d == 0.0));
}

fn random_list(seed: u64, len: usize) -> (Vec<PixelContribution<f64>>, [f64; 3]) {
    let mut rng = synth::SplitMix64::new(seed);
    let h = (0..len)
        .map(|i| PixelContribution {
            id: i as u32,
            color: [0, 1, 2].map(|_| rng.uniform(0.0, 1.5)),
            alpha: rng.uniform(ALPHA_MIN, ALPHA_MAX),
        })
        .collect();
    let bg = [0, 1, 2].map(|_| rng.uniform(0.0, 1.0));
    (h, bg)
}

proptest! {
    #[test]
    fn analytic_matches_leave_one_out_per_pixel(seed in any::<u64>(), len in 1usize..12) {
        let (h, bg) = random_list(seed, len);
        let (c, s) = blend_prefix(&h, bg);
        for (k, (_, d)) in quantify_pixel(&h, c, &s, 0.0).into_iter().enumerate() {
            let oracle = se(c, leave_out(&h, k, bg));
            prop_assert!(d >= 0.0);
            prop_assert!((d - oracle).abs() <= 1e-9 * oracle + 1e-15, "k={} d={} oracle={}", k, d, oracle);
        }
    }

    #[test]
    fn delta_se_non_negative(t in 0.0001f32..1.0, a in 0.004f32..0.99, c in prop::array::uniform3(-2.0f32..2.0), b in prop::array::uniform3(-2.0f32..2.0)) {
        prop_assert!(delta_se(t, a, c, b) >= 0.0);
    }
}

fn scene_and_views(seed: u64) -> (crate::model::GaussianScene, ViewSet) {
    synth::generate(&SynthSpec {
        seed,
        count: 30,
        width: 32,
        height: 32,
        ..SynthSpec::default()
    })
}

#[test]
fn view_additivity_is_bit_exact() {
    let (scene, views) = scene_and_views(11);
    let consts = QuantConstants::default();
    let all = quantify_scene::<f32>(&scene, &views, &consts, Execution::Sequential);
    let a = ViewSet::new(views.views()[..1].to_vec()).unwrap();
    let b = ViewSet::new(views.views()[1..].to_vec()).unwrap();
    let mut sum = quantify_scene::<f32>(&scene, &a, &consts, Execution::Sequential);
    sum.add(&quantify_scene::<f32>(&scene, &b, &consts, Execution::Sequential));
    assert_eq!(all, sum);

    // duplicating every view doubles every score exactly
    let mut doubled = views.views().to_vec();
    for v in views.views() {
        doubled.push(crate::camera::CameraView { name: format!("{}_dup", v.name), ..v.clone() });
    }
    let twice = quantify_scene::<f32>(&scene, &ViewSet::new(doubled).unwrap(), &consts, Execution::Sequential);
    for (x, y) in twice.delta_se.iter().zip(&all.delta_se) {
        assert_eq!(*x, 2.0 * y);
    }
}

#[test]
fn parallel_agrees_with_sequential() {
    let (scene, views) = scene_and_views(12);
    let consts = QuantConstants::default();
    let seq = quantify_scene::<f32>(&scene, &views, &consts, Execution::Sequential);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let par = pool.install(|| quantify_scene::<f32>(&scene, &views, &consts, Execution::Parallel));
    assert_eq!(seq.touch_count, par.touch_count);
    for (a, b) in seq.delta_se.iter().zip(&par.delta_se) {
        assert!((a - b).abs() <= 1e-4 * a.abs().max(1e-30), "{a} vs {b}");
    }
}

#[test]
fn zero_coverage_scores_zero() {
    let (scene, views) = scene_and_views(13);
    let far: Vec<_> = scene
        .gaussians()
        .iter()
        .map(|g| crate::model::Gaussian { position: [g.position[0] + 100.0, g.position[1], g.position[2]], ..*g })
        .collect();
    let far = crate::model::GaussianScene::new(far).unwrap();
    let buf = quantify_scene::<f32>(&far, &views, &QuantConstants::default(), Execution::Sequential);
    assert!(buf.delta_se.iter().all(|&d| d == 0.0));
    assert!(buf.touch_count.iter().all(|&t| t == 0));
}

#[test]
fn single_gaussian_closed_form() {
    let (scene, views) = synth::generate(&SynthSpec {
        seed: 2,
        count: 1,
        views: 1,
        layering: Layering::Random,
        scale: [0.3, 0.4],
        opacity: [0.7, 0.8],
        ..SynthSpec::default()
    });
    let bg = [0.1, 0.5, 0.9];
    let consts = QuantConstants { background: bg, ..QuantConstants::default() };
    let view = &views.views()[0];
    let buf = quantify_scene::<f64>(&scene, &views, &consts, Execution::Sequential);

    // Σ_p (α(p) ‖c − bg‖)² evaluated straight from the projected footprint
    let p = project(&scene, view, 3)[0];
    let mut expect = 0.0;
    let mut pixels = 0u64;
    for y in p.rect[1]..=p.rect[3] {
        for x in p.rect[0]..=p.rect[2] {
            let dx = x as f64 + 0.5 - p.mean[0];
            let dy = y as f64 + 0.5 - p.mean[1];
            let q = p.conic[0] * dx * dx + 2.0 * p.conic[1] * dx * dy + p.conic[2] * dy * dy;
            let a = (p.opacity * (-0.5 * q).exp()).min(ALPHA_MAX);
            if a >= ALPHA_MIN {
                expect += a * a * se(p.color, bg);
                pixels += 1;
            }
        }
    }
    assert!(pixels > 50);
    assert_eq!(buf.touch_count[0], pixels);
    assert!((buf.delta_se[0] - expect).abs() <= 1e-6 * expect, "{} vs {expect}", buf.delta_se[0]);
}

#[test]
fn skipped_faint_contributor_changes_nothing() {
    let (scene, views) = scene_and_views(14);
    let consts = QuantConstants::default();
    let base = quantify_scene::<f32>(&scene, &views, &consts, Execution::Sequential);
    // a near, huge, nearly transparent Gaussian: its pixel opacity never reaches ALPHA_MIN
    let mut g = scene.gaussians().to_vec();
    g.insert(0, crate::model::Gaussian {
        position: [0.0, 0.0, -2.0],
        scale: [0.0; 3],
        opacity_logit: crate::model::logit(0.003) as f32,
        ..Default::default()
    });
    let with = crate::model::GaussianScene::new(g).unwrap();
    let buf = quantify_scene::<f32>(&with, &views, &consts, Execution::Sequential);
    assert_eq!(buf.delta_se[0], 0.0);
    assert_eq!(buf.touch_count[0], 0);
    assert_eq!(&buf.delta_se[1..], &base.delta_se[..]);
}

#[test]
fn wall_occluded_gaussians_score_zero() {
    let spec = SynthSpec { seed: 8, layering: Layering::WallOccluder, ..SynthSpec::default() };
    let (scene, views) = synth::generate(&spec);
    let buf = quantify_scene::<f32>(&scene, &views, &QuantConstants::default(), Execution::Sequential);
    for id in spec.hidden_ids() {
        assert_eq!(buf.delta_se[id], 0.0);
        assert_eq!(buf.touch_count[id], 0);
    }
    assert!(buf.terminated_pixels > 0);
}
