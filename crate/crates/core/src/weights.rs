//! Compactly supported radial weights `w(x, x_j) = φ(‖x − x_j‖₂ / δ)`.

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum WeightKind {
    /// `(1 − r)⁴ (4r + 1)`, C² across the support boundary.
    #[default]
    WendlandC2,
    /// `1 − 6r² + 8r³ − 3r⁴`.
    Quartic,
    /// `e · exp(−1 / (1 − r²))`, C^∞.
    Bump,
}

impl std::str::FromStr for WeightKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "wendland-c2" | "wendland" => Ok(Self::WendlandC2),
            "quartic" => Ok(Self::Quartic),
            "bump" => Ok(Self::Bump),
            other => Err(format!(
                "unknown weight '{other}' (expected wendland-c2, quartic or bump)"
            )),
        }
    }
}

impl WeightKind {
    /// Profile value at scaled radius `r ≥ 0`; exactly zero for `r ≥ 1`.
    pub fn profile(self, r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        match self {
            Self::WendlandC2 => {
                let t = 1.0 - r;
                let t2 = t * t;
                t2 * t2 * (4.0 * r + 1.0)
            }
            Self::Quartic => 1.0 - r * r * (6.0 - r * (8.0 - 3.0 * r)),
            Self::Bump => (1.0 - 1.0 / (1.0 - r * r)).exp(),
        }
    }
}

/// Checked profile evaluation.
pub fn weight_value(kind: WeightKind, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(invalid(format!("scaled radius must be nonnegative, got {r}")));
    }
    Ok(kind.profile(r))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSpec {
    pub kind: WeightKind,
    pub radius: f64,
}

impl WeightSpec {
    pub fn new(kind: WeightKind, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid(format!("support radius must be positive, got {radius}")));
        }
        Ok(Self { kind, radius })
    }

    /// `K((x − x_j)/δ)` for a precomputed distance.
    pub fn at_distance(&self, dist: f64) -> f64 {
        self.kind.profile(dist / self.radius)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KINDS: [WeightKind; 3] = [WeightKind::WendlandC2, WeightKind::Quartic, WeightKind::Bump];

    #[test]
    fn wendland_values() {
        assert_eq!(weight_value(WeightKind::WendlandC2, 0.0).unwrap(), 1.0);
        assert_eq!(weight_value(WeightKind::WendlandC2, 0.5).unwrap(), 0.1875);
    }

    #[test]
    fn compact_support_is_exact() {
        for k in KINDS {
            assert_eq!(weight_value(k, 0.0).unwrap(), 1.0);
            assert_eq!(weight_value(k, 1.0).unwrap(), 0.0);
            assert_eq!(weight_value(k, 1.5).unwrap(), 0.0);
            assert!(weight_value(k, -0.1).is_err());
        }
    }

    #[test]
    fn positive_inside_half_radius_and_nonnegative() {
        for k in KINDS {
            for i in 0..=1000 {
                let r = i as f64 * 0.002;
                let w = k.profile(r);
                assert!(w >= 0.0);
                if r <= 0.5 {
                    assert!(w > 0.0, "{k:?} at {r}");
                }
            }
        }
    }

    #[test]
    fn continuous_at_support_boundary() {
        for k in KINDS {
            let a = k.profile(1.0 - 1e-4);
            let b = k.profile(1.0 - 1e-8);
            assert!(a < 1e-6, "{k:?}: {a}");
            assert!(b <= a && b < 1e-14, "{k:?}: {b}");
        }
    }
}
