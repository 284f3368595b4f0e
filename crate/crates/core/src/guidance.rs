//! Integral line-of-sight guidance toward a straight line through the
//! origin, and stability certification of the resulting cross-track error
//! system `ẋ = A x + G(x) x + d`, with `x = [ε, s]`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation2, Vector3};

use crate::error::{Error, Result};
use crate::{Mat2, Vec2};

/// Straight line through the origin at angle `theta_r` from ê_x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSpec {
    theta_r: f64,
}

impl PathSpec {
    /// Wraps the angle into (-π, π].
    pub fn new(theta_r: f64) -> Self {
        PathSpec {
            theta_r: wrap_angle(theta_r),
        }
    }

    pub fn theta_r(&self) -> f64 {
        self.theta_r
    }

    /// Unit vector along the line.
    pub fn tangent(&self) -> Vec2 {
        Vec2::new(self.theta_r.cos(), self.theta_r.sin())
    }

    /// Unit vector normal to the line (tangent rotated by +π/2).
    pub fn normal(&self) -> Vec2 {
        Vec2::new(-self.theta_r.sin(), self.theta_r.cos())
    }
}

/// Reduces an angle to (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// ILOS gains. `sigma0 = 0` is the conventional LOS law.
///
/// `alpha_d` implicitly carries units of 1/s so that `alpha_d·delta_los` is
/// a speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuidanceParams {
    pub alpha_d: f64,
    pub sigma0: f64,
    pub k_d: f64,
    pub delta_los: f64,
}

impl GuidanceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_d > 0.0 && self.alpha_d.is_finite()) {
            return Err(Error::invalid("alpha_d", "must be positive"));
        }
        if !(self.delta_los > 0.0 && self.delta_los.is_finite()) {
            return Err(Error::invalid("delta_los", "must be positive"));
        }
        if !(self.sigma0 >= 0.0 && self.sigma0.is_finite()) {
            return Err(Error::invalid("sigma0", "must be non-negative"));
        }
        if !(self.k_d >= 0.0 && self.k_d.is_finite()) {
            return Err(Error::invalid("k_d", "must be non-negative"));
        }
        Ok(())
    }

    /// Same gains with the integral action removed.
    pub fn conventional(&self) -> Self {
        GuidanceParams {
            sigma0: 0.0,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GuidanceState {
    pub s: f64,
}

/// Cross-track error `eps` and along-track position `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorCoords {
    pub eps: f64,
    pub z: f64,
}

pub fn to_path_frame(p: &Vec2, path: &PathSpec) -> ErrorCoords {
    ErrorCoords {
        eps: path.normal().dot(p),
        z: path.tangent().dot(p),
    }
}

/// Same coordinates through the polar form `|p|·sin Δθ`, `|p|·cos Δθ` with
/// `Δθ = atan2(p_z, p_x) − θ_r` reduced to (-π, π].
pub fn to_path_frame_polar(p: &Vec2, path: &PathSpec) -> ErrorCoords {
    let r = p.norm();
    let dtheta = wrap_angle(p.y.atan2(p.x) - path.theta_r());
    ErrorCoords {
        eps: r * dtheta.sin(),
        z: r * dtheta.cos(),
    }
}

/// ILOS reference velocity `α_d·R(θ_r)·[Δ_LOS, −ε − σ0·s]`.
pub fn ilos_field(p: &Vec2, s: &GuidanceState, path: &PathSpec, g: &GuidanceParams) -> Vec2 {
    let eps = to_path_frame(p, path).eps;
    ilos_field_from_error(eps, s.s, path, g)
}

pub fn ilos_field_from_error(eps: f64, s: f64, path: &PathSpec, g: &GuidanceParams) -> Vec2 {
    let local = Vec2::new(g.delta_los, -eps - g.sigma0 * s);
    g.alpha_d * (Rotation2::new(path.theta_r()) * local)
}

/// `ṡ = −k_d·s + Δ_LOS·ε / ((ε + σ0·s)² + Δ_LOS²)`.
pub fn integral_state_derivative(eps: f64, s: &GuidanceState, g: &GuidanceParams) -> f64 {
    let lead = eps + g.sigma0 * s.s;
    -g.k_d * s.s + g.delta_los * eps / (lead * lead + g.delta_los * g.delta_los)
}

/// Matrices of the error system `ẋ = A x + G(x) x + [d⊥, 0]`, where
/// `G(x) = Δ_LOS / (xᵀHx + Δ_LOS²)·B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSystem {
    pub a: Mat2,
    pub h: Mat2,
    pub b: Mat2,
    pub delta_los: f64,
}

impl ErrorSystem {
    pub fn nonlinear_gain(&self, x: &Vec2) -> f64 {
        let quad = x.dot(&(self.h * x));
        self.delta_los / (quad + self.delta_los * self.delta_los)
    }

    /// Right-hand side for the unit-gain plant under the unsaturated law;
    /// the disturbance enters the ε row unscaled.
    pub fn derivative(&self, x: &Vec2, d_perp: f64) -> Vec2 {
        self.a * x + self.nonlinear_gain(x) * (self.b * x) + Vec2::new(d_perp, 0.0)
    }
}

pub fn error_system_matrices(g: &GuidanceParams) -> ErrorSystem {
    let a = -g.alpha_d * Mat2::new(1.0, g.sigma0, 0.0, g.k_d / g.alpha_d);
    let h = Mat2::new(1.0, g.sigma0, g.sigma0, g.sigma0 * g.sigma0);
    let b = Mat2::new(0.0, 0.0, 1.0, 0.0);
    ErrorSystem {
        a,
        h,
        b,
        delta_los: g.delta_los,
    }
}

/// Eigenvalues `(min, max)` of a symmetric 2×2 matrix.
pub fn symmetric_eigenvalues(m: &Mat2) -> (f64, f64) {
    let mean = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let half_diff = 0.5 * (m[(0, 0)] - m[(1, 1)]);
    let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let r = half_diff.hypot(off);
    (mean - r, mean + r)
}

/// Result of checking the Lyapunov conditions for a gain tuple and a
/// candidate `P`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityCertificate {
    pub p: Mat2,
    pub gamma: Mat2,
    pub ges_ok: bool,
    pub iss_ok: bool,
    /// `λmax(P)/λmin(P)`: radius of the ultimate ball per unit disturbance
    /// bound.
    pub iss_radius_per_dstar: f64,
    pub simplified_lhs: f64,
}

impl StabilityCertificate {
    pub fn iss_radius(&self, d_star: f64) -> f64 {
        d_star * self.iss_radius_per_dstar
    }

    pub fn lyapunov_value(&self, x: &Vec2) -> f64 {
        x.dot(&(self.p * x))
    }
}

/// Checks the GES and ISS conditions with `Γ = −(AᵀP + PA)`:
///
/// - GES: `Γ ≻ 0` and `λmin(Γ) > (p12 + √(p12² + p22²)) / Δ_LOS`
/// - ISS: `λmin(Γ) > p12/Δ_LOS + √(p12² + p22²)·(α_d + 1/Δ_LOS)`
pub fn certify_stability(g: &GuidanceParams, p: &Mat2) -> Result<StabilityCertificate> {
    g.validate()?;
    let asym = (p[(0, 1)] - p[(1, 0)]).abs();
    if !(asym <= 1e-12 * p.abs().max().max(1.0)) {
        return Err(Error::InvalidCertificate("P is not symmetric".into()));
    }
    let (p_min, p_max) = symmetric_eigenvalues(p);
    if !(p_min > 0.0) {
        return Err(Error::InvalidCertificate(format!(
            "P is not positive definite (min eigenvalue {p_min})"
        )));
    }

    let sys = error_system_matrices(g);
    let gamma = -(sys.a.transpose() * p + p * sys.a);
    let (gamma_min, _) = symmetric_eigenvalues(&gamma);

    let p12 = p[(0, 1)];
    let p22 = p[(1, 1)];
    let r = p12.hypot(p22);
    let ges_bound = (p12 + r) / g.delta_los;
    let iss_bound = p12 / g.delta_los + r * (g.alpha_d + 1.0 / g.delta_los);

    Ok(StabilityCertificate {
        p: *p,
        gamma,
        ges_ok: gamma_min > 0.0 && gamma_min > ges_bound,
        iss_ok: gamma_min > 0.0 && gamma_min > iss_bound,
        iss_radius_per_dstar: p_max / p_min,
        simplified_lhs: check_simplified_gains(g).lhs,
    })
}

/// Solves `AᵀP + PA = −Q` for symmetric `P`.
pub fn solve_lyapunov(a: &Mat2, q: &Mat2) -> Result<Mat2> {
    let (a11, a12, a21, a22) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
    // Unknowns (p11, p12, p22).
    let m = Matrix3::new(
        2.0 * a11,
        2.0 * a21,
        0.0,
        a12,
        a11 + a22,
        a21,
        0.0,
        2.0 * a12,
        2.0 * a22,
    );
    let rhs = -Vector3::new(q[(0, 0)], 0.5 * (q[(0, 1)] + q[(1, 0)]), q[(1, 1)]);
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidCertificate("Lyapunov equation is singular".into()))?;
    Ok(Mat2::new(sol[0], sol[1], sol[1], sol[2]))
}

/// Default certificate: solve the Lyapunov equation with `Γ = I`, then scale
/// `P` to unit largest eigenvalue. The verdicts are invariant under the
/// scaling; failure is reported, not searched around.
pub fn lyapunov_certificate(g: &GuidanceParams) -> Result<StabilityCertificate> {
    g.validate()?;
    let sys = error_system_matrices(g);
    let p = solve_lyapunov(&sys.a, &Mat2::identity())?;
    let (_, p_max) = symmetric_eigenvalues(&p);
    if !(p_max > 0.0) {
        return Err(Error::InvalidCertificate(
            "Lyapunov solution is not positive definite".into(),
        ));
    }
    certify_stability(g, &(p / p_max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplifiedGainCheck {
    pub lhs: f64,
    pub ok: bool,
}

/// Sufficient gain inequality: `k_d/α_d ≥ 0` and
/// `(σ0·α_d·Δ_LOS)² + 2·α_d·Δ_LOS·(1 + k_d/α_d) ≤ 1`.
pub fn check_simplified_gains(g: &GuidanceParams) -> SimplifiedGainCheck {
    let ad = g.alpha_d * g.delta_los;
    let ratio = g.k_d / g.alpha_d;
    let lhs = (g.sigma0 * ad).powi(2) + 2.0 * ad * (1.0 + ratio);
    SimplifiedGainCheck {
        lhs,
        ok: ratio >= 0.0 && lhs <= 1.0,
    }
}

/// Speed along the path once it has been made invariant: `e11·α_d·Δ_LOS`.
pub fn steady_state_speed(g: &GuidanceParams, e11: f64) -> f64 {
    e11 * g.alpha_d * g.delta_los
}
