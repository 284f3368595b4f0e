//! Helpers shared by the integration tests: scenario loaders and oracles
//! written independently of the library code paths they check.

#![allow(dead_code)]

use std::path::PathBuf;

use helix_ilos::cli::{load_config, LoadedConfig};
use helix_ilos::controller::TrsProblem;
use helix_ilos::guidance::GuidanceParams;
use helix_ilos::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

pub fn load_scenario(name: &str) -> LoadedConfig {
    load_config(&scenario_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn reference_gains() -> GuidanceParams {
    GuidanceParams {
        alpha_d: 600.0,
        sigma0: 0.01,
        k_d: 0.15,
        delta_los: 0.75e-3,
    }
}

/// `½ uᵀ diag(a) u + gᵀu`, spelled out.
pub fn objective(a: &Vec2, g: &Vec2, u: &Vec2) -> f64 {
    0.5 * (a.x * u.x * u.x + a.y * u.y * u.y) + g.x * u.x + g.y * u.y
}

/// Random subproblem. Roughly half the instances have their unconstrained
/// minimiser inside the disk; a quarter use equal weights.
pub fn random_trs(rng: &mut ChaCha8Rng) -> TrsProblem {
    let a1 = 10f64.powf(rng.gen_range(-1.0..1.0));
    let a2 = if rng.gen_bool(0.25) {
        a1
    } else {
        10f64.powf(rng.gen_range(-1.0..1.0))
    };
    let omega_so = 10f64.powf(rng.gen_range(-1.0..0.7));
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    // Unconstrained minimiser at a chosen multiple of the radius.
    let reach = if rng.gen_bool(0.5) {
        rng.gen_range(0.0..0.95)
    } else {
        rng.gen_range(1.05..20.0)
    };
    let target = reach * omega_so * Vec2::new(phi.cos(), phi.sin());
    TrsProblem {
        a_diag: Vec2::new(a1, a2),
        g_mu: Vec2::new(-a1 * target.x, -a2 * target.y),
        omega_so,
    }
}

/// Exact minimum of the objective over the polar grid
/// `r_j = Ω·j/n_r (j = 1..n_r)`, `φ_k = 2πk/n_phi`, plus the origin.
/// Along each ray the objective is a convex quadratic in `r`, so only the
/// two grid radii bracketing its minimiser need evaluating.
pub fn polar_grid_min(prob: &TrsProblem, n_r: usize, n_phi: usize) -> f64 {
    let (a, g, big) = (prob.a_diag, prob.g_mu, prob.omega_so);
    let h = big / n_r as f64;
    let mut best = 0.0f64;
    for k in 0..n_phi {
        let phi = std::f64::consts::TAU * k as f64 / n_phi as f64;
        let d = Vec2::new(phi.cos(), phi.sin());
        let curv = a.x * d.x * d.x + a.y * d.y * d.y;
        let slope = g.x * d.x + g.y * d.y;
        let r_star = (-slope / curv).clamp(h, big);
        let j = (r_star / h).floor() as usize;
        for jj in [j.max(1), (j + 1).min(n_r)] {
            let u = (jj as f64 * h) * d;
            best = best.min(objective(&a, &g, &u));
        }
    }
    best
}

/// Same grid, every point evaluated.
pub fn polar_grid_min_literal(prob: &TrsProblem, n_r: usize, n_phi: usize) -> f64 {
    let (a, g, big) = (prob.a_diag, prob.g_mu, prob.omega_so);
    let h = big / n_r as f64;
    let mut best = 0.0f64;
    for k in 0..n_phi {
        let phi = std::f64::consts::TAU * k as f64 / n_phi as f64;
        let d = Vec2::new(phi.cos(), phi.sin());
        for j in 1..=n_r {
            best = best.min(objective(&a, &g, &((j as f64 * h) * d)));
        }
    }
    best
}

/// Farthest any disk point can be from the polar grid.
pub fn polar_grid_resolution(omega_so: f64, n_r: usize, n_phi: usize) -> f64 {
    omega_so / n_r as f64 + omega_so * std::f64::consts::PI / n_phi as f64
}

/// `ṡ = −k_d·s + Δ·ε/((ε + σ0·s)² + Δ²)`, written out for the oracle.
pub fn s_dot(g: &GuidanceParams, eps: f64, s: f64) -> f64 {
    let lead = eps + g.sigma0 * s;
    -g.k_d * s + g.delta_los * eps / (lead * lead + g.delta_los * g.delta_los)
}
