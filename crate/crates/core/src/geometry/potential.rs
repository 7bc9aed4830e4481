//! Named potential profiles.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum Potential {
    #[default]
    Zero,
    /// `amplitude * exp(-rate r)`; short range.
    ExpDecay { amplitude: f64, rate: f64 },
    /// `-depth` on `|x| <= half_width` in the line coordinate.
    SquareWell { depth: f64, half_width: f64 },
    /// Smooth compactly supported bump `amplitude * exp(1 - 1/(1 - s^2))`,
    /// `s = (x - center)/width`, in the line coordinate.
    Bump {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// `amplitude / r`; declared long range, so it is housed in `q1`.
    InverseR { amplitude: f64 },
    /// Bump times `cos(theta)`; not separable.
    AngularBump {
        amplitude: f64,
        center: f64,
        width: f64,
    },
}

fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

impl Potential {
    pub fn is_separable(&self) -> bool {
        !matches!(self, Potential::AngularBump { .. })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Potential::Zero)
    }

    /// Value at line coordinate `x`, radius `r` and angle `theta`.
    pub fn value(&self, x: f64, r: f64, theta: f64) -> f64 {
        match *self {
            Potential::AngularBump {
                amplitude,
                center,
                width,
            } => amplitude * bump((x - center) / width) * theta.cos(),
            _ => self.radial_value(x, r),
        }
    }

    /// Angle-independent value; the angular part of non-separable profiles
    /// is dropped.
    pub fn radial_value(&self, x: f64, r: f64) -> f64 {
        match *self {
            Potential::Zero => 0.0,
            Potential::ExpDecay { amplitude, rate } => amplitude * (-rate * r).exp(),
            Potential::SquareWell { depth, half_width } => {
                let d = x.abs() - half_width;
                let tol = 1e-9 * half_width.abs().max(1.0);
                if d.abs() <= tol {
                    -0.5 * depth
                } else if d < 0.0 {
                    -depth
                } else {
                    0.0
                }
            }
            Potential::Bump {
                amplitude,
                center,
                width,
            } => amplitude * bump((x - center) / width),
            Potential::InverseR { amplitude } => amplitude / r,
            Potential::AngularBump { .. } => 0.0,
        }
    }

    /// Part of the potential declared long range (goes into `q1`).
    pub fn long_range(&self, r: f64) -> f64 {
        match *self {
            Potential::InverseR { amplitude } => amplitude / r,
            _ => 0.0,
        }
    }

    /// Radius beyond which the short-range part vanishes identically, if any.
    pub fn compact_support_radius(&self) -> Option<f64> {
        match *self {
            Potential::Zero | Potential::InverseR { .. } => Some(0.0),
            Potential::SquareWell { half_width, .. } => Some(half_width.abs()),
            Potential::Bump { center, width, .. }
            | Potential::AngularBump { center, width, .. } => Some(center.abs() + width.abs()),
            Potential::ExpDecay { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_well_averages_at_the_edge() {
        let v = Potential::SquareWell {
            depth: 1.0,
            half_width: 1.0,
        };
        assert_eq!(v.radial_value(0.3, 1.0), -1.0);
        assert_eq!(v.radial_value(-1.0, 1.0), -0.5);
        assert_eq!(v.radial_value(1.5, 1.5), 0.0);
    }

    #[test]
    fn bump_is_compact_and_peaks_at_amplitude() {
        let v = Potential::Bump {
            amplitude: 0.7,
            center: 1.0,
            width: 0.5,
        };
        assert!((v.radial_value(1.0, 0.0) - 0.7).abs() < 1e-15);
        assert_eq!(v.radial_value(1.6, 0.0), 0.0);
        assert!(v.is_separable());
        let a = Potential::AngularBump {
            amplitude: 1.0,
            center: 0.0,
            width: 1.0,
        };
        assert!(!a.is_separable());
        assert!((a.value(0.0, 1.0, std::f64::consts::PI) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn json_names() {
        let v: Potential =
            serde_json::from_str(r#"{"profile":"exp_decay","amplitude":3,"rate":1}"#).unwrap();
        assert_eq!(
            v,
            Potential::ExpDecay {
                amplitude: 3.0,
                rate: 1.0
            }
        );
        assert!(serde_json::from_str::<Potential>(r#"{"profile":"nope"}"#).is_err());
    }
}
