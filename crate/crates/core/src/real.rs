use std::fmt::Debug;

use num_traits::Float;

/// Floating point type the rasterizer and quantifier are generic over.
///
/// `f32` is the production pipeline; `f64` is the validation path used by the oracle.
pub trait Real: Float + Debug + Default + Send + Sync + 'static {
    const NAME: &'static str;

    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    const NAME: &'static str = "f32";

    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    const NAME: &'static str = "f64";

    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

#[inline]
pub(crate) fn rgb<T: Real>(c: [f64; 3]) -> [T; 3] {
    [T::from_f64(c[0]), T::from_f64(c[1]), T::from_f64(c[2])]
}
