//! Pointwise optimal rotation command under the step-out limit.
//!
//! At each instant the controller picks the angular velocity whose
//! resulting swimmer velocity is closest, in a diagonal weighted norm, to
//! the guidance field, subject to `|u| ≤ Ω_SO`. That is a trust-region
//! subproblem
//!
//! ```text
//! min ½ uᵀ A u + Gᵀ u   s.t.  uᵀu ≤ Ω_SO²,   A = ê11²·diag(q1, q2)
//! ```
//!
//! solved here by bisection on the multiplier ([`solve_trs`]), through a
//! quartic in the shifted multiplier ([`solve_trs_quartic`]), or in closed
//! form when the weights are equal ([`control_law`]).

mod quartic;

pub use quartic::{quartic_real_roots, shifted_quartic, solve_trs_quartic};

use crate::error::{Error, Result};
use crate::guidance::{ilos_field, GuidanceParams, GuidanceState, PathSpec};
use crate::Vec2;

pub const MAX_BISECTION_ITERATIONS: usize = 200;

/// Weighting of the velocity-deviation norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weights {
    /// `q1 = q2 = 1/(Ω0·ê11²)`: the choice for which the optimal command is
    /// absolutely continuous in the state.
    Equal {
        omega0: f64,
    },
    Diagonal {
        q1: f64,
        q2: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerParams {
    /// Step-out limit in rad/s.
    pub omega_so: f64,
    pub weights: Weights,
    /// Estimated propulsion gain; 1 when nothing is known.
    pub e11_hat: f64,
    /// Estimated disturbance velocity; zero when nothing is known.
    pub d_mu_hat: Vec2,
}

impl ControllerParams {
    pub fn continuous(omega_so: f64, omega0: f64) -> Self {
        ControllerParams {
            omega_so,
            weights: Weights::Equal { omega0 },
            e11_hat: 1.0,
            d_mu_hat: Vec2::zeros(),
        }
    }

    pub fn q1(&self) -> f64 {
        match self.weights {
            Weights::Equal { omega0 } => 1.0 / (omega0 * self.e11_hat * self.e11_hat),
            Weights::Diagonal { q1, .. } => q1,
        }
    }

    pub fn q2(&self) -> f64 {
        match self.weights {
            Weights::Equal { omega0 } => 1.0 / (omega0 * self.e11_hat * self.e11_hat),
            Weights::Diagonal { q2, .. } => q2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_so > 0.0 && self.omega_so.is_finite()) {
            return Err(Error::invalid("omega_so", "must be positive"));
        }
        if !(self.e11_hat != 0.0 && self.e11_hat.is_finite()) {
            return Err(Error::invalid("e11_hat", "must be finite and non-zero"));
        }
        if !(self.d_mu_hat.x.is_finite() && self.d_mu_hat.y.is_finite()) {
            return Err(Error::invalid("d_mu_hat", "must be finite"));
        }
        match self.weights {
            Weights::Equal { omega0 } if !(omega0 > 0.0 && omega0.is_finite()) => {
                Err(Error::invalid("omega0", "must be positive"))
            }
            Weights::Diagonal { q1, q2 } if !(q1 > 0.0 && q2 > 0.0) => {
                Err(Error::invalid("q1/q2", "weights must be positive"))
            }
            _ => Ok(()),
        }
    }
}

/// `min ½ uᵀ diag(a) u + gᵀu` over the disk of radius `omega_so`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrsProblem {
    /// Diagonal of `A_μ`.
    pub a_diag: Vec2,
    pub g_mu: Vec2,
    pub omega_so: f64,
}

impl TrsProblem {
    pub fn objective(&self, u: &Vec2) -> f64 {
        0.5 * (self.a_diag.x * u.x * u.x + self.a_diag.y * u.y * u.y) + self.g_mu.dot(u)
    }

    /// `A_μ⁻¹ G_μ` negated: the minimiser without the disk constraint.
    pub fn unconstrained_minimizer(&self) -> Vec2 {
        -self.g_mu.component_div(&self.a_diag)
    }

    /// `−(A_μ + λI)⁻¹ G_μ`.
    pub fn shifted_minimizer(&self, lambda: f64) -> Vec2 {
        Vec2::new(
            -self.g_mu.x / (self.a_diag.x + lambda),
            -self.g_mu.y / (self.a_diag.y + lambda),
        )
    }

    /// Left side minus right side of the boundary equation
    /// `Σ G_i² / (a_i + λ)² = Ω_SO²`; strictly decreasing in `λ ≥ 0`.
    pub fn secular(&self, lambda: f64) -> f64 {
        self.shifted_minimizer(lambda).norm_squared() - self.omega_so * self.omega_so
    }

    fn check(&self) -> Result<()> {
        if !(self.a_diag.x > 0.0 && self.a_diag.y > 0.0) {
            return Err(Error::invalid("a_mu", "must be positive definite"));
        }
        if !(self.omega_so > 0.0) {
            return Err(Error::invalid("omega_so", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrsSolution {
    pub u_star: Vec2,
    pub lambda_star: f64,
    pub saturated: bool,
    pub kkt_residual: f64,
}

/// Builds the subproblem for a desired velocity. The linear term is chosen
/// so that the unconstrained minimiser is `(v_des − d̂_μ)/ê11`.
pub fn build_trs(v_des: &Vec2, params: &ControllerParams) -> TrsProblem {
    let e2 = params.e11_hat * params.e11_hat;
    let a_diag = Vec2::new(e2 * params.q1(), e2 * params.q2());
    let g_mu = a_diag.component_mul(&(params.d_mu_hat - v_des)) / params.e11_hat;
    TrsProblem {
        a_diag,
        g_mu,
        omega_so: params.omega_so,
    }
}

/// Interior branch when the unconstrained minimiser is strictly inside the
/// disk; otherwise bisection for the unique non-negative root of the
/// boundary equation on `[0, |G_μ|/Ω_SO]`.
pub fn solve_trs(prob: &TrsProblem) -> Result<TrsSolution> {
    prob.check()?;
    let interior = prob.unconstrained_minimizer();
    if interior.norm() < prob.omega_so {
        return Ok(finish(prob, interior, 0.0, false));
    }

    // secular(lo) >= 0 > secular(hi); keeping the `hi` end makes |u| <= Ω_SO.
    let mut lo = 0.0_f64;
    let mut hi = prob.g_mu.norm() / prob.omega_so;
    let scale = prob.a_diag.x.min(prob.a_diag.y);
    let mut converged = false;
    for _ in 0..MAX_BISECTION_ITERATIONS {
        if hi - lo <= f64::EPSILON * (hi + scale) {
            converged = true;
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f = prob.secular(mid);
        if f > 0.0 {
            lo = mid;
        } else if f <= 0.0 {
            hi = mid;
        } else {
            break;
        }
    }
    if !converged {
        return Err(Error::NumericalFailure(MAX_BISECTION_ITERATIONS));
    }
    Ok(finish(prob, prob.shifted_minimizer(hi), hi, true))
}

fn finish(prob: &TrsProblem, u_star: Vec2, lambda_star: f64, saturated: bool) -> TrsSolution {
    let mut sol = TrsSolution {
        u_star,
        lambda_star,
        saturated,
        kkt_residual: 0.0,
    };
    sol.kkt_residual = verify_kkt(prob, &sol).max_residual;
    sol
}

/// Residuals of the optimality system: norm bound, stationarity,
/// complementary slackness, dual feasibility and `A_μ + λI ⪰ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    pub norm_violation: f64,
    pub stationarity: f64,
    pub complementarity: f64,
    pub dual_violation: f64,
    pub psd_violation: f64,
    pub max_residual: f64,
}

pub fn verify_kkt(prob: &TrsProblem, sol: &TrsSolution) -> KktReport {
    let u = sol.u_star;
    let lambda = sol.lambda_star;
    let norm = u.norm();
    let shifted = prob.a_diag.add_scalar(lambda);
    let norm_violation = (norm - prob.omega_so).max(0.0);
    let stationarity = (shifted.component_mul(&u) + prob.g_mu).norm();
    let complementarity = (lambda * (prob.omega_so - norm)).abs();
    let dual_violation = (-lambda).max(0.0);
    let psd_violation = (-shifted.x.min(shifted.y)).max(0.0);
    let max_residual = [
        norm_violation,
        stationarity,
        complementarity,
        dual_violation,
        psd_violation,
    ]
    .into_iter()
    .fold(0.0, f64::max);
    KktReport {
        norm_violation,
        stationarity,
        complementarity,
        dual_violation,
        psd_violation,
        max_residual,
    }
}

/// One evaluation of the feedback law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub u: Vec2,
    pub saturated: bool,
}

/// Rotation command for the current position and integral state.
///
/// With equal weights the closed form is used: `u = −Ω0·G_μ` while
/// `|G_μ| < Ω_SO/Ω0`, else `u = −Ω_SO·G_μ/|G_μ|`. With unequal weights the
/// subproblem is solved by bisection.
pub fn control_law(
    p: &Vec2,
    s: &GuidanceState,
    path: &PathSpec,
    g: &GuidanceParams,
    params: &ControllerParams,
) -> Result<ControlOutput> {
    let v_des = ilos_field(p, s, path, g);
    command_for_velocity(&v_des, params)
}

/// Controller stage alone, for a given desired velocity.
pub fn command_for_velocity(v_des: &Vec2, params: &ControllerParams) -> Result<ControlOutput> {
    let prob = build_trs(v_des, params);
    match params.weights {
        Weights::Equal { omega0 } => {
            let g_norm = prob.g_mu.norm();
            if g_norm < params.omega_so / omega0 {
                Ok(ControlOutput {
                    u: -omega0 * prob.g_mu,
                    saturated: false,
                })
            } else {
                Ok(ControlOutput {
                    u: -params.omega_so / g_norm * prob.g_mu,
                    saturated: true,
                })
            }
        }
        Weights::Diagonal { .. } => {
            let sol = solve_trs(&prob)?;
            Ok(ControlOutput {
                u: sol.u_star,
                saturated: sol.saturated,
            })
        }
    }
}

/// Lipschitz constant of the equal-weight law with respect to `(p, s)`:
/// `α_d·√(1 + σ0²)/|ê11|`. The projection onto the disk is 1-Lipschitz, so
/// saturation does not increase it.
pub fn lipschitz_bound(g: &GuidanceParams, params: &ControllerParams) -> f64 {
    g.alpha_d * g.sigma0.hypot(1.0) / params.e11_hat.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unit_estimates_reduce_to_nominal_law() {
        let params = ControllerParams::continuous(10.0, 1.0);
        let v = Vec2::new(0.3, -0.4);
        let prob = build_trs(&v, &params);
        assert_eq!(prob.g_mu, -v);
        let sol = solve_trs(&prob).unwrap();
        assert_eq!(sol.u_star, v);
        assert_eq!(sol.lambda_star, 0.0);
    }

    #[test]
    fn on_target_gives_zero_command() {
        let mut params = ControllerParams::continuous(1.0, 1.0);
        params.d_mu_hat = Vec2::new(0.2, 0.1);
        let prob = build_trs(&Vec2::new(0.2, 0.1), &params);
        assert_eq!(prob.g_mu, Vec2::zeros());
        let sol = solve_trs(&prob).unwrap();
        assert_eq!(sol.u_star, Vec2::zeros());
        assert!(!sol.saturated);
    }

    #[test]
    fn weighted_build_example() {
        let params = ControllerParams {
            omega_so: 1.0,
            weights: Weights::Diagonal { q1: 1.0, q2: 3.0 },
            e11_hat: 2.0,
            d_mu_hat: Vec2::new(0.1, 0.0),
        };
        let prob = build_trs(&Vec2::new(1.0, 1.0), &params);
        assert_eq!(prob.a_diag, Vec2::new(4.0, 12.0));
        assert_relative_eq!(prob.g_mu, Vec2::new(-1.8, -6.0), epsilon = 1e-15);
    }

    #[test]
    fn equal_weight_saturation_example() {
        let prob = TrsProblem {
            a_diag: Vec2::new(1.0, 1.0),
            g_mu: Vec2::new(-3.0, -4.0),
            omega_so: 2.8,
        };
        let sol = solve_trs(&prob).unwrap();
        assert!(sol.saturated);
        assert_relative_eq!(sol.u_star, Vec2::new(1.68, 2.24), epsilon = 1e-12);
        // |G|/Ω_SO − 1/Ω0
        assert_relative_eq!(sol.lambda_star, 5.0 / 2.8 - 1.0, epsilon = 1e-12);
        assert!(sol.kkt_residual < 1e-12);
    }

    #[test]
    fn closed_form_law_examples() {
        let path = PathSpec::new(0.0);
        let params = ControllerParams::continuous(2.8, 1.0);
        let g = GuidanceParams {
            alpha_d: 1.0,
            sigma0: 0.0,
            k_d: 0.0,
            delta_los: 1.0,
        };
        // |v_des| = √2 < 2.8
        let out = control_law(
            &Vec2::new(0.0, 1.0),
            &GuidanceState::default(),
            &path,
            &g,
            &params,
        )
        .unwrap();
        assert_eq!(out.u, Vec2::new(1.0, -1.0));
        assert!(!out.saturated);

        let g = GuidanceParams {
            delta_los: 3.0,
            ..g
        };
        // v_des = (3, -4), |v_des| = 5
        let out = control_law(
            &Vec2::new(0.0, 4.0),
            &GuidanceState::default(),
            &path,
            &g,
            &params,
        )
        .unwrap();
        assert!(out.saturated);
        assert_relative_eq!(out.u.norm(), 2.8, epsilon = 1e-15);
        assert_relative_eq!(out.u, Vec2::new(3.0, -4.0) * (2.8 / 5.0), epsilon = 1e-15);
    }

    #[test]
    fn continuity_at_switching_surface() {
        let params = ControllerParams::continuous(2.8, 1.0);
        let dir = Vec2::new(0.6, 0.8);
        let below = command_for_velocity(&(dir * (2.8 - 1e-12)), &params).unwrap();
        let at = command_for_velocity(&(dir * 2.8), &params).unwrap();
        let above = command_for_velocity(&(dir * (2.8 + 1e-12)), &params).unwrap();
        assert!(!below.saturated);
        assert!(at.saturated);
        assert!((below.u - at.u).norm() < 1e-11);
        assert!((above.u - at.u).norm() < 1e-11);
    }

    #[test]
    fn invalid_problem_rejected() {
        let prob = TrsProblem {
            a_diag: Vec2::new(0.0, 1.0),
            g_mu: Vec2::new(1.0, 1.0),
            omega_so: 1.0,
        };
        assert!(solve_trs(&prob).is_err());
    }

    #[test]
    fn non_finite_input_reports_numerical_failure() {
        let prob = TrsProblem {
            a_diag: Vec2::new(1.0, 1.0),
            g_mu: Vec2::new(f64::NAN, 1.0),
            omega_so: 1.0,
        };
        assert_eq!(
            solve_trs(&prob),
            Err(Error::NumericalFailure(MAX_BISECTION_ITERATIONS))
        );
    }

    #[test]
    fn interior_solution_has_zero_stationarity_residual() {
        let prob = TrsProblem {
            a_diag: Vec2::new(2.0, 4.0),
            g_mu: Vec2::new(-1.0, 2.0),
            omega_so: 10.0,
        };
        let sol = solve_trs(&prob).unwrap();
        let report = verify_kkt(&prob, &sol);
        assert_eq!(sol.lambda_star, 0.0);
        assert_eq!(report.stationarity, 0.0);
    }
}
