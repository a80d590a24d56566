//! Real spherical harmonics up to degree 3, in the 3DGS sign and ordering convention.

use crate::model::Gaussian;

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
pub const SH_C1: f64 = 0.488_602_511_902_919_9;
pub const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
pub const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// Basis values for the 16 coefficients along unit direction `d`; entries beyond `degree`
/// are zero.
pub fn basis(degree: usize, d: [f64; 3]) -> [f64; 16] {
    let mut b = [0.0; 16];
    b[0] = SH_C0;
    if degree == 0 {
        return b;
    }
    let [x, y, z] = d;
    b[1] = -SH_C1 * y;
    b[2] = SH_C1 * z;
    b[3] = -SH_C1 * x;
    if degree == 1 {
        return b;
    }
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, yz, xz) = (x * y, y * z, x * z);
    b[4] = SH_C2[0] * xy;
    b[5] = SH_C2[1] * yz;
    b[6] = SH_C2[2] * (2.0 * zz - xx - yy);
    b[7] = SH_C2[3] * xz;
    b[8] = SH_C2[4] * (xx - yy);
    if degree == 2 {
        return b;
    }
    b[9] = SH_C3[0] * y * (3.0 * xx - yy);
    b[10] = SH_C3[1] * xy * z;
    b[11] = SH_C3[2] * y * (4.0 * zz - xx - yy);
    b[12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    b[13] = SH_C3[4] * x * (4.0 * zz - xx - yy);
    b[14] = SH_C3[5] * z * (xx - yy);
    b[15] = SH_C3[6] * x * (xx - 3.0 * yy);
    b
}

/// View-dependent RGB along unit direction `dir` (Gaussian center minus camera center),
/// offset by 0.5 and clamped below at zero.
pub fn eval_color(g: &Gaussian, degree: usize, dir: [f64; 3]) -> [f64; 3] {
    let b = basis(degree, dir);
    let n = (degree + 1) * (degree + 1);
    [0, 1, 2].map(|ch| {
        let v: f64 = (0..n).map(|i| b[i] * g.sh(ch, i)).sum();
        (v + 0.5).max(0.0)
    })
}

/// Inverse of the degree-0 color mapping, for building scenes from target colors.
pub fn rgb_to_dc(rgb: f64) -> f64 {
    (rgb - 0.5) / SH_C0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_zero_is_constant() {
        let g = Gaussian {
            sh_dc: [1.0, -2.0, 0.25],
            ..Default::default()
        };
        let a = eval_color(&g, 0, [0.0, 0.0, 1.0]);
        let b = eval_color(&g, 0, [0.6, 0.0, 0.8]);
        assert_eq!(a, b);
        assert_eq!(a[0], SH_C0 + 0.5);
        assert_eq!(a[1], 0.0); // clamped: 0.5 - 2 * C0 < 0
        assert_eq!(a[2], 0.25 * SH_C0 + 0.5);
    }

    #[test]
    fn basis_is_orthonormal_on_sphere() {
        // Monte-Carlo-free check: Fibonacci sphere quadrature of the Gram matrix.
        let n = 20_000;
        let mut gram = [[0.0f64; 16]; 16];
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        for k in 0..n {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * k as f64;
            let b = basis(3, [r * phi.cos(), r * phi.sin(), z]);
            for i in 0..16 {
                for j in 0..16 {
                    gram[i][j] += b[i] * b[j];
                }
            }
        }
        let w = 4.0 * std::f64::consts::PI / n as f64;
        for i in 0..16 {
            for j in 0..16 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[i][j] * w - expect).abs() < 1e-3, "({i},{j}) = {}", gram[i][j] * w);
            }
        }
    }

    #[test]
    fn rest_coefficients_are_channel_major() {
        let mut g = Gaussian::default();
        // coefficient 2 (z-linear) of the green channel
        g.sh_rest[15 + 1] = 1.0;
        let c = eval_color(&g, 1, [0.0, 0.0, 1.0]);
        assert_eq!(c, [0.5, 0.5 + SH_C1, 0.5]);
        let c = eval_color(&g, 0, [0.0, 0.0, 1.0]);
        assert_eq!(c, [0.5; 3]);
    }

    #[test]
    fn dc_inverse() {
        assert!((rgb_to_dc(0.8) * SH_C0 + 0.5 - 0.8).abs() < 1e-15);
    }
}
