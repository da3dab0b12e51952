use crate::error::{LabError, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Unit vector `(cos θ, sin θ)` with `θ ∈ [0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    theta: f64,
}

impl Direction {
    pub fn new(theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(LabError::invalid(format!("angle {theta} is not finite")));
        }
        let mut t = theta.rem_euclid(TAU);
        if t >= TAU {
            t = 0.0;
        }
        Ok(Direction { theta: t })
    }

    pub fn from_vector(v: [f64; 2]) -> Result<Self> {
        if v == [0.0, 0.0] {
            return Err(LabError::DegeneratePair);
        }
        Direction::new(v[1].atan2(v[0]))
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn vector(&self) -> [f64; 2] {
        [self.theta.cos(), self.theta.sin()]
    }

    pub fn rotated(&self, delta: f64) -> Self {
        Direction::new(self.theta + delta).expect("finite angle")
    }

    pub fn opposite(&self) -> Self {
        self.rotated(PI)
    }

    /// `v · p`.
    pub fn project(&self, p: [f64; 2]) -> f64 {
        let v = self.vector();
        v[0] * p[0] + v[1] * p[1]
    }

    /// Euclidean distance `|v - v'|` between the unit vectors.
    pub fn chord(&self, other: &Direction) -> f64 {
        2.0 * (angle_between(self.theta, other.theta) / 2.0).sin()
    }
}

/// Circular distance between two angles, in `[0, π]`.
pub fn angle_between(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Acute angle between the lines with angles `a` and `b`, in `[0, π/2]`.
pub fn line_angle_between(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(PI);
    d.min(PI - d)
}

/// `σ(x, y) = (x - y) / |x - y|`.
pub fn direction(x: &[f64], y: &[f64]) -> Result<Direction> {
    for p in [x, y] {
        if p.len() != 2 {
            return Err(LabError::DimensionMismatch {
                expected: 2,
                got: p.len(),
            });
        }
    }
    Direction::from_vector([x[0] - y[0], x[1] - y[1]])
}

/// Two-sided cone `X(a, β, v)`; `β` is the half-angle of each nappe.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub apex: [f64; 2],
    pub beta: f64,
    pub direction: Direction,
}

impl Cone {
    pub fn new(apex: [f64; 2], beta: f64, direction: Direction) -> Result<Self> {
        check_beta(beta)?;
        Ok(Cone {
            apex,
            beta,
            direction,
        })
    }
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < PI / 2.0) {
        return Err(LabError::invalid(format!("cone opening {beta} outside (0, π/2)")));
    }
    Ok(())
}

pub fn in_cone(cone: &Cone, y: [f64; 2]) -> Result<bool> {
    let d = [y[0] - cone.apex[0], y[1] - cone.apex[1]];
    if d == [0.0, 0.0] {
        return Err(LabError::DegeneratePair);
    }
    let a = d[1].atan2(d[0]);
    Ok(line_angle_between(a, cone.direction.theta()) < cone.beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direction_examples() {
        assert_eq!(direction(&[1.0, 0.0], &[0.0, 0.0]).unwrap().theta(), 0.0);
        assert!((direction(&[0.0, 0.0], &[1.0, 0.0]).unwrap().theta() - PI).abs() < 1e-15);
        let t = direction(&[0.0, 0.0], &[1.0, 1.0]).unwrap().theta();
        assert!((t - 5.0 * PI / 4.0).abs() < 1e-15);
        assert!(matches!(
            direction(&[0.2, 0.2], &[0.2, 0.2]),
            Err(LabError::DegeneratePair)
        ));
    }

    #[test]
    fn normalization() {
        assert!((Direction::new(-PI / 2.0).unwrap().theta() - 1.5 * PI).abs() < 1e-15);
        assert!(Direction::new(TAU).unwrap().theta() < 1e-15);
        let v = Direction::new(1.0).unwrap().vector();
        assert!((v[0].hypot(v[1]) - 1.0).abs() < 1e-15);
        assert!(Direction::new(f64::NAN).is_err());
    }

    #[test]
    fn chord_length() {
        let a = Direction::new(0.1).unwrap();
        let b = Direction::new(TAU - 0.1).unwrap();
        let (va, vb) = (a.vector(), b.vector());
        let direct = (va[0] - vb[0]).hypot(va[1] - vb[1]);
        assert!((a.chord(&b) - direct).abs() < 1e-15);
    }

    #[test]
    fn cone_examples() {
        let c = Cone::new([0.0, 0.0], PI / 4.0, Direction::new(0.0).unwrap()).unwrap();
        assert!(in_cone(&c, [1.0, 0.5]).unwrap());
        assert!(in_cone(&c, [-1.0, -0.5]).unwrap());
        assert!(!in_cone(&c, [0.0, 1.0]).unwrap());
        assert!(in_cone(&c, [0.0, 0.0]).is_err());
        assert!(Cone::new([0.0, 0.0], PI / 2.0, Direction::new(0.0).unwrap()).is_err());
    }
}
