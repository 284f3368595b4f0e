//! Boundary multiplier through a quartic in `λ̃ = λ + Ω1`.
//!
//! With `Ω1 = ê11²q1`, `Ω2 = ê11²q2` and `Ω̃ = Ω2 − Ω1`, clearing the
//! denominators of `G1²/λ̃² + G2²/(λ̃ + Ω̃)² = Ω_SO²` gives
//!
//! ```text
//! λ̃⁴ + 2Ω̃λ̃³ + (Ω̃² − |G|²/Ω_SO²)λ̃² − 2Ω̃G1²/Ω_SO²·λ̃ − G1²Ω̃²/Ω_SO² = 0
//! ```
//!
//! whose only real root with `λ̃ ≥ Ω1` is the optimal multiplier.

use nalgebra::{Complex, Matrix4, Schur};

use super::{finish, TrsProblem, TrsSolution};
use crate::error::{Error, Result};

/// Coefficients `[1, c3, c2, c1, c0]`, highest degree first.
pub fn shifted_quartic(prob: &TrsProblem) -> [f64; 5] {
    let omega1 = prob.a_diag.x;
    let tilde = prob.a_diag.y - omega1;
    let r2 = prob.omega_so * prob.omega_so;
    let g1_sq = prob.g_mu.x * prob.g_mu.x;
    let g_sq = prob.g_mu.norm_squared();
    [
        1.0,
        2.0 * tilde,
        tilde * tilde - g_sq / r2,
        -2.0 * tilde * g1_sq / r2,
        -g1_sq * tilde * tilde / r2,
    ]
}

fn horner(c: &[f64; 5], x: f64) -> (f64, f64) {
    let mut p = c[0];
    let mut dp = 0.0;
    for &ci in &c[1..] {
        dp = dp * x + p;
        p = p * x + ci;
    }
    (p, dp)
}

/// Real roots of `c[0]x⁴ + … + c[4]`, from the eigenvalues of the companion
/// matrix followed by Newton polishing. The variable is rescaled by a root
/// bound first so that the eigenproblem is well conditioned. Returned in
/// ascending order.
pub fn quartic_real_roots(c: &[f64; 5]) -> Vec<f64> {
    if c[0] == 0.0 || c.iter().any(|v| !v.is_finite()) {
        return Vec::new();
    }
    let monic = c.map(|v| v / c[0]);
    // Fujiwara-style bound on root magnitudes.
    let scale = (1..5)
        .map(|k| (monic[k].abs()).powf(1.0 / k as f64))
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return vec![0.0];
    }
    let mut scaled = monic;
    for (k, v) in scaled.iter_mut().enumerate() {
        *v /= scale.powi(k as i32);
    }

    let Some(eig) = companion_eigenvalues(&scaled) else {
        return Vec::new();
    };

    let mut roots: Vec<f64> = eig
        .iter()
        .filter(|z| z.im.abs() <= 1e-7 * z.re.abs().max(1.0))
        .map(|z| {
            let mut y = z.re;
            let (mut p, _) = horner(&scaled, y);
            for _ in 0..4 {
                let (_, dp) = horner(&scaled, y);
                if dp == 0.0 {
                    break;
                }
                let next = y - p / dp;
                let (pn, _) = horner(&scaled, next);
                if pn.abs() >= p.abs() {
                    break;
                }
                y = next;
                p = pn;
            }
            y * scale
        })
        .collect();
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE));
    roots
}

/// Eigenvalues of the companion matrix of a monic quartic. Francis QR can
/// stall on highly symmetric companions (e.g. `x⁴ + 1`); in that case the
/// polynomial is re-expanded about a shifted origin and the shift added
/// back.
fn companion_eigenvalues(monic: &[f64; 5]) -> Option<Vec<Complex<f64>>> {
    for shift in [0.0, 0.1, -0.3, 0.7] {
        let c = taylor_shift(monic, shift);
        #[rustfmt::skip]
        let companion = Matrix4::new(
            -c[1], -c[2], -c[3], -c[4],
            1.0,   0.0,   0.0,   0.0,
            0.0,   1.0,   0.0,   0.0,
            0.0,   0.0,   1.0,   0.0,
        );
        if let Some(schur) = Schur::try_new(companion, f64::EPSILON, 1000) {
            return Some(
                schur
                    .complex_eigenvalues()
                    .iter()
                    .map(|z| z + shift)
                    .collect(),
            );
        }
    }
    None
}

/// Coefficients of `p(y + shift)`.
fn taylor_shift(c: &[f64; 5], shift: f64) -> [f64; 5] {
    let mut out = *c;
    if shift == 0.0 {
        return out;
    }
    // Repeated synthetic division, highest degree first.
    for i in 0..4 {
        for j in 1..(5 - i) {
            out[j] += shift * out[j - 1];
        }
    }
    out
}

/// Boundary solution through the quartic. Requires the unconstrained
/// minimiser to lie on or outside the disk.
pub fn solve_trs_quartic(prob: &TrsProblem) -> Result<TrsSolution> {
    prob.check()?;
    if prob.unconstrained_minimizer().norm() < prob.omega_so {
        return Err(Error::NotSaturated);
    }
    let omega1 = prob.a_diag.x;
    let roots = quartic_real_roots(&shifted_quartic(prob));
    let tol = 1e-12 * omega1.max(prob.g_mu.norm() / prob.omega_so);
    let shifted = roots
        .into_iter()
        .filter(|&r| r >= omega1 - tol)
        .min_by(|a, b| {
            let fa = prob.secular((a - omega1).max(0.0)).abs();
            let fb = prob.secular((b - omega1).max(0.0)).abs();
            fa.total_cmp(&fb)
        })
        .ok_or(Error::InconsistentProblem(omega1))?;
    let lambda = (shifted - omega1).max(0.0);
    Ok(finish(prob, prob.shifted_minimizer(lambda), lambda, true))
}
