/// Affine map taking a physical range onto `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub offset: f64,
    pub scale: f64,
}

impl Affine {
    pub const IDENTITY: Affine = Affine {
        offset: 0.0,
        scale: 1.0,
    };

    /// Maps `[lo, hi]` onto `[-1, 1]`. A degenerate range keeps unit scale and
    /// centres on `lo`.
    pub fn from_range(lo: f64, hi: f64) -> Self {
        let half = 0.5 * (hi - lo);
        let scale = if half.abs() > f64::EPSILON * lo.abs().max(hi.abs()).max(1.0) {
            half
        } else {
            1.0
        };
        Self {
            offset: 0.5 * (lo + hi),
            scale,
        }
    }

    /// Range-based map fitted to the data extremes.
    pub fn fit(values: &[f64]) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo.is_finite() && hi.is_finite() {
            Self::from_range(lo, hi)
        } else {
            Self::IDENTITY
        }
    }

    #[inline]
    pub fn normalize(&self, v: f64) -> f64 {
        (v - self.offset) / self.scale
    }

    #[inline]
    pub fn denormalize(&self, v: f64) -> f64 {
        v * self.scale + self.offset
    }
}
