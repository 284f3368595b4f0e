//! Swimmer physics: helix description, resistive-force coefficients, the
//! planar reduced plant and the gravity-compensating feedforward.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::Vec2;

/// Geometry of the helical tail and magnetic head. Lengths in metres,
/// angles in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HelixGeometry {
    /// Helix pitch angle.
    pub theta_h: f64,
    /// Number of turns.
    pub n_h: f64,
    /// Helix radius.
    pub r_h: f64,
    /// Coil thickness (informational).
    pub r_c: f64,
    /// Magnetic head radius (informational).
    pub r_m: f64,
    /// Distance from the helix centre to the head, |k_h|.
    pub k_h_mag: f64,
}

impl HelixGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.theta_h.sin().abs() <= f64::EPSILON {
            return Err(Error::DegenerateHelix);
        }
        if !(self.theta_h > 0.0 && self.theta_h < FRAC_PI_2) {
            return Err(Error::invalid("theta_h", "must lie in (0, pi/2)"));
        }
        if !(self.n_h > 0.0) {
            return Err(Error::invalid("n_h", "must be positive"));
        }
        if !(self.r_h > 0.0) {
            return Err(Error::invalid("r_h", "must be positive"));
        }
        if !(self.k_h_mag >= 0.0) {
            return Err(Error::invalid("k_h_mag", "must be non-negative"));
        }
        Ok(())
    }
}

/// Resistive-force drag coefficients of the tail (per unit length) and of
/// the head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DragCoefficients {
    pub xi_par: f64,
    pub xi_perp: f64,
    pub xi_vm: f64,
}

impl DragCoefficients {
    /// Positivity checks only. `xi_perp > xi_par` is what makes `e11 > 0`,
    /// but the isotropic case is accepted and simply yields `e11 = 0`.
    pub fn validate(&self) -> Result<()> {
        if !(self.xi_par > 0.0) {
            return Err(Error::invalid("xi_par", "must be positive"));
        }
        if !(self.xi_perp > 0.0) {
            return Err(Error::invalid("xi_perp", "must be positive"));
        }
        if !(self.xi_vm >= 0.0) {
            return Err(Error::invalid("xi_vm", "must be non-negative"));
        }
        Ok(())
    }
}

/// Coefficients of the body-frame mobility matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    pub a1: f64,
    pub a2: f64,
    pub b11: f64,
    pub b13: f64,
    pub b22: f64,
    pub b23: f64,
    pub b33: f64,
    /// Forward speed per unit axial angular speed (m).
    pub e11: f64,
}

/// Evaluates the drag/coupling table for a helix and `e11 = -b11 / a1`.
pub fn compute_derived_params(
    geom: &HelixGeometry,
    drag: &DragCoefficients,
) -> Result<DerivedParams> {
    geom.validate()?;
    drag.validate()?;

    let (s, c) = geom.theta_h.sin_cos();
    let two_pi_n_r = 2.0 * std::f64::consts::PI * geom.n_h * geom.r_h;

    let a_h1 = two_pi_n_r * (drag.xi_par * c * c + drag.xi_perp * s * s) / s;
    let a_h2 = 0.5 * two_pi_n_r * (drag.xi_perp + drag.xi_par * s * s + drag.xi_perp * c * c) / s;
    let a1 = a_h1 + drag.xi_vm;
    let a2 = a_h2 + drag.xi_vm;

    let b11 = two_pi_n_r * geom.r_h * (drag.xi_par - drag.xi_perp) * c;
    let b13 = -b11 / geom.theta_h.tan();
    let b22 = -3.0 * b11 / 4.0;
    let b33 = -b11 / 4.0;
    let b23 = drag.xi_vm * geom.k_h_mag;

    Ok(DerivedParams {
        a1,
        a2,
        b11,
        b13,
        b22,
        b23,
        b33,
        e11: -b11 / a1,
    })
}

/// Propulsion gain written directly in terms of the physical parameters,
/// without going through the coefficient table.
pub fn e11_closed_form(geom: &HelixGeometry, drag: &DragCoefficients) -> Result<f64> {
    geom.validate()?;
    drag.validate()?;
    let (s, c) = geom.theta_h.sin_cos();
    let two_pi_n = 2.0 * std::f64::consts::PI * geom.n_h;
    let num = -two_pi_n * geom.r_h * geom.r_h * (drag.xi_par - drag.xi_perp) * c * s;
    let den = two_pi_n * geom.r_h * (drag.xi_par * c * c + drag.xi_perp * s * s) + drag.xi_vm * s;
    Ok(num / den)
}

/// How the propulsion gain is obtained: stated directly, or derived from
/// geometry and drag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SwimmerParams {
    Direct {
        e11: f64,
    },
    Physical {
        geometry: HelixGeometry,
        drag: DragCoefficients,
    },
}

impl SwimmerParams {
    pub fn e11(&self) -> Result<f64> {
        match self {
            SwimmerParams::Direct { e11 } => {
                if !e11.is_finite() {
                    return Err(Error::invalid("e11", "must be finite"));
                }
                Ok(*e11)
            }
            SwimmerParams::Physical { geometry, drag } => {
                Ok(compute_derived_params(geometry, drag)?.e11)
            }
        }
    }

    /// Full coefficient set, when the physical route was used.
    pub fn derived(&self) -> Option<Result<DerivedParams>> {
        match self {
            SwimmerParams::Direct { .. } => None,
            SwimmerParams::Physical { geometry, drag } => {
                Some(compute_derived_params(geometry, drag))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantState {
    pub p: Vec2,
    pub t: f64,
}

/// One segment of a piecewise-constant disturbance, active from `start`
/// until the next segment begins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceSegment {
    pub start: f64,
    pub d_mu: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisturbanceKind {
    Constant,
    PiecewiseConstant,
}

/// Velocity-domain disturbance `d_μ(t)` (m/s), already mapped through the
/// mobility matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceSpec {
    segments: Vec<DisturbanceSegment>,
    d_star: f64,
}

impl DisturbanceSpec {
    pub fn zero() -> Self {
        Self::constant(Vec2::zeros())
    }

    /// Constant disturbance; the declared bound is the next float above its
    /// norm.
    pub fn constant(d_mu: Vec2) -> Self {
        DisturbanceSpec {
            segments: vec![DisturbanceSegment { start: 0.0, d_mu }],
            d_star: d_mu.norm().next_up(),
        }
    }

    /// Piecewise-constant schedule. Segments must have strictly increasing
    /// start times; before the first start the disturbance is zero. Every
    /// segment must satisfy `|d_mu| < d_star`.
    pub fn schedule(segments: Vec<DisturbanceSegment>, d_star: f64) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::invalid(
                "disturbance",
                "schedule needs at least one segment",
            ));
        }
        if segments.windows(2).any(|w| !(w[1].start > w[0].start)) {
            return Err(Error::invalid(
                "disturbance",
                "segment start times must increase",
            ));
        }
        for seg in &segments {
            if !(seg.d_mu.norm() < d_star) {
                return Err(Error::invalid(
                    "disturbance",
                    format!("segment at t = {} exceeds d_star = {}", seg.start, d_star),
                ));
            }
        }
        Ok(DisturbanceSpec { segments, d_star })
    }

    pub fn kind(&self) -> DisturbanceKind {
        if self.segments.len() == 1 && self.segments[0].start <= 0.0 {
            DisturbanceKind::Constant
        } else {
            DisturbanceKind::PiecewiseConstant
        }
    }

    pub fn segments(&self) -> &[DisturbanceSegment] {
        &self.segments
    }

    pub fn d_star(&self) -> f64 {
        self.d_star
    }

    pub fn at(&self, t: f64) -> Vec2 {
        self.segments
            .iter()
            .rev()
            .find(|seg| seg.start <= t)
            .map_or_else(Vec2::zeros, |seg| seg.d_mu)
    }
}

/// Reduced planar plant: `ṗ = e11·u + d_μ(t)`.
pub fn plant_derivative(state: &PlantState, u: &Vec2, e11: f64, d: &DisturbanceSpec) -> Vec2 {
    e11 * u + d.at(state.t)
}

/// Feedforward rotation command: angle `psi` of the helix axis measured from
/// `v_des`, and the angular speed `u_mag` along that axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feedforward {
    pub psi: f64,
    pub u_mag: f64,
}

/// Gravity-compensating feedforward for a known force of magnitude
/// `f_d_mag`.
///
/// `alpha` is the angle from `v_des` to the direction the propulsion has to
/// push against, i.e. the direction opposite to the applied force `f_d`.
/// With that convention the command makes `e11·u + D·f_d = v_des`; see
/// [`feedforward_velocity`].
pub fn feedforward_command(
    v_des: &Vec2,
    f_d_mag: f64,
    alpha: f64,
    params: &DerivedParams,
) -> Result<Feedforward> {
    if params.e11 == 0.0 {
        return Err(Error::NoPropulsion);
    }
    if !(f_d_mag >= 0.0) {
        return Err(Error::invalid("f_d_mag", "must be non-negative"));
    }
    let speed = v_des.norm();
    let lateral = f_d_mag / params.a2;
    let num = lateral * alpha.sin();
    let den = speed + lateral * alpha.cos();
    if den.abs() <= f64::EPSILON * (speed + lateral) || (speed == 0.0 && f_d_mag == 0.0) {
        return Err(Error::SingularFeedforward);
    }
    let psi = (num / den).atan();
    let u_mag = (speed * psi.cos() + f_d_mag * (alpha - psi).cos() / params.a1) / params.e11;
    Ok(Feedforward { psi, u_mag })
}

/// Closed-loop velocity `e11·u + D·f_d` produced by a feedforward command,
/// reconstructed in the helix frame: the force is split along the helix
/// axis (mobility `1/a1`) and normal to it (mobility `1/a2`).
pub fn feedforward_velocity(
    v_des: &Vec2,
    f_d_mag: f64,
    alpha: f64,
    cmd: &Feedforward,
    params: &DerivedParams,
) -> Vec2 {
    let heading = v_des.y.atan2(v_des.x);
    let axis = Vec2::new((heading + cmd.psi).cos(), (heading + cmd.psi).sin());
    let normal = Vec2::new(-axis.y, axis.x);
    let f_d = -f_d_mag * Vec2::new((heading + alpha).cos(), (heading + alpha).sin());
    let d_mu = f_d.dot(&axis) / params.a1 * axis + f_d.dot(&normal) / params.a2 * normal;
    params.e11 * cmd.u_mag * axis + d_mu
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn paper_geometry() -> HelixGeometry {
        HelixGeometry {
            theta_h: 45f64.to_radians(),
            n_h: 3.5,
            r_h: 420e-6,
            r_c: 0.0,
            r_m: 0.0,
            k_h_mag: 0.0,
        }
    }

    #[test]
    fn isotropic_drag_gives_no_propulsion() {
        let drag = DragCoefficients {
            xi_par: 1.0,
            xi_perp: 1.0,
            xi_vm: 0.3,
        };
        let d = compute_derived_params(&paper_geometry(), &drag).unwrap();
        assert_eq!(d.b11, 0.0);
        assert_eq!(d.e11, 0.0);
    }

    #[test]
    fn table_route_matches_direct_formula() {
        let drag = DragCoefficients {
            xi_par: 1.0,
            xi_perp: 2.0,
            xi_vm: 0.0,
        };
        let d = compute_derived_params(&paper_geometry(), &drag).unwrap();
        let direct = e11_closed_form(&paper_geometry(), &drag).unwrap();
        assert_relative_eq!(d.e11, direct, max_relative = 1e-12);
        // At 45 degrees with no head, e11 = r_h (xi_perp - xi_par) / (xi_perp + xi_par).
        assert_relative_eq!(d.e11, 1.4e-4, max_relative = 1e-12);
    }

    #[test]
    fn drag_ratio_can_reproduce_prototype_gain() {
        // e11 = r_h (rho - 1) / (rho + 1) at 45 degrees; pick rho for 9.3e-5 m.
        let g = 9.3e-5 / 420e-6;
        let rho = (1.0 + g) / (1.0 - g);
        let drag = DragCoefficients {
            xi_par: 1.0,
            xi_perp: rho,
            xi_vm: 0.0,
        };
        let d = compute_derived_params(&paper_geometry(), &drag).unwrap();
        assert_relative_eq!(d.e11, 9.3e-5, max_relative = 1e-12);
    }

    #[test]
    fn rejects_flat_helix() {
        let mut geom = paper_geometry();
        geom.theta_h = 0.0;
        let drag = DragCoefficients {
            xi_par: 1.0,
            xi_perp: 2.0,
            xi_vm: 0.0,
        };
        assert_eq!(
            compute_derived_params(&geom, &drag),
            Err(Error::DegenerateHelix)
        );
    }

    #[test]
    fn plant_derivative_examples() {
        let state = PlantState {
            p: Vec2::zeros(),
            t: 0.0,
        };
        let zero = DisturbanceSpec::zero();
        assert_eq!(
            plant_derivative(&state, &Vec2::zeros(), 1.0, &zero),
            Vec2::zeros()
        );

        let d = DisturbanceSpec::constant(Vec2::new(0.5, 0.0));
        assert_eq!(
            plant_derivative(&state, &Vec2::new(1.0, -1.0), 2.0, &d),
            Vec2::new(2.5, -2.0)
        );

        let d = DisturbanceSpec::constant(Vec2::new(0.0, -1e-4));
        let v = plant_derivative(&state, &Vec2::new(1000.0, 0.0), 9.3e-5, &d);
        assert_relative_eq!(v.x, 0.093, max_relative = 1e-14);
        assert_eq!(v.y, -1e-4);
    }

    #[test]
    fn schedule_switches_at_start_times() {
        let d = DisturbanceSpec::schedule(
            vec![
                DisturbanceSegment {
                    start: 1.0,
                    d_mu: Vec2::new(1.0, 0.0),
                },
                DisturbanceSegment {
                    start: 2.0,
                    d_mu: Vec2::new(0.0, -1.0),
                },
            ],
            1.5,
        )
        .unwrap();
        assert_eq!(d.kind(), DisturbanceKind::PiecewiseConstant);
        assert_eq!(d.at(0.5), Vec2::zeros());
        assert_eq!(d.at(1.0), Vec2::new(1.0, 0.0));
        assert_eq!(d.at(3.0), Vec2::new(0.0, -1.0));
        assert!(DisturbanceSpec::schedule(
            vec![DisturbanceSegment {
                start: 0.0,
                d_mu: Vec2::new(2.0, 0.0)
            }],
            1.5
        )
        .is_err());
    }

    fn unit_params(e11: f64) -> DerivedParams {
        DerivedParams {
            a1: 1.0,
            a2: 1.0,
            b11: -e11,
            b13: 0.0,
            b22: 0.0,
            b23: 0.0,
            b33: 0.0,
            e11,
        }
    }

    #[test]
    fn feedforward_without_force_points_along_velocity() {
        let params = unit_params(0.5);
        let ff = feedforward_command(&Vec2::new(3.0, 4.0), 0.0, 1.0, &params).unwrap();
        assert_eq!(ff.psi, 0.0);
        assert_relative_eq!(ff.u_mag, 10.0, max_relative = 1e-15);
    }

    #[test]
    fn feedforward_quarter_turn_force() {
        let params = unit_params(1.0);
        let ff = feedforward_command(
            &Vec2::new(1.0, 0.0),
            1.0,
            std::f64::consts::FRAC_PI_2,
            &params,
        )
        .unwrap();
        assert_relative_eq!(ff.psi, std::f64::consts::FRAC_PI_4, max_relative = 1e-15);
    }

    #[test]
    fn feedforward_errors() {
        assert_eq!(
            feedforward_command(&Vec2::new(1.0, 0.0), 1.0, 0.0, &unit_params(0.0)),
            Err(Error::NoPropulsion)
        );
        // |v| + |f| cos(alpha) / a2 = 1 - 1 = 0
        assert_eq!(
            feedforward_command(
                &Vec2::new(1.0, 0.0),
                1.0,
                std::f64::consts::PI,
                &unit_params(1.0)
            ),
            Err(Error::SingularFeedforward)
        );
    }
}
