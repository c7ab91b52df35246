//! Third-order high-frequency (Magnus) effective couplings.
//!
//! To third order in `1/gamma` the stroboscopic Hamiltonian acquires
//! `-g' P^2 cos(phi)`, `-g'' (d_x phi)^2 cos(phi)` and `-g~ cos(2 phi)`
//! terms. The first renormalises the kinetic coefficient to `K_eff`, whose
//! sign change marks the loss of stability of `phi = 0`; the competition of
//! `g0 cos(phi)` with `g~ cos(2 phi)` decides whether `phi = pi` is stable.
//!
//! Couplings follow the normalisation `H = int dx [K/2 P^2 + (1/2K)(d_x phi)^2 - g cos(phi)]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::chain::ChainSolver;
use crate::error::{Error, Result};
use crate::floquet::bisect_verdict;
use crate::params::{ModelParams, Reduced};

/// Expansion parameter reported with every coefficient set.
pub const VALIDITY_NOTE: &str = "high-frequency expansion, valid for g0/gamma^2 << 1";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoefficientOptions {
    /// Add the fifth-order cutoff-dependent renormalisation of `g'`.
    pub fifth_order: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnusCoefficients {
    /// Coefficient of `-int P^2 cos(phi)`.
    pub g_prime: f64,
    /// Coefficient of `-int (d_x phi)^2 cos(phi)`.
    pub g_dblprime: f64,
    /// Coefficient of `-int cos(2 phi)`.
    pub g_tilde: f64,
    #[serde(rename = "K_eff")]
    pub k_eff: f64,
    /// `g0 / gamma^2`, the small parameter of the expansion.
    pub expansion_parameter: f64,
    pub fifth_order: bool,
    pub note: String,
}

/// Effective couplings for `params`.
pub fn coefficients(params: &ModelParams, opts: CoefficientOptions) -> MagnusCoefficients {
    let g2 = params.gamma * params.gamma;
    let drive = params.g1 / g2;
    let k = params.k;
    let mut g_prime = drive * k * k;
    let mut k_eff = k * (1.0 - 2.0 * k * drive);
    if opts.fifth_order {
        let cutoff = params.lambda / params.gamma;
        let correction = 8.0 * drive * drive * cutoff * cutoff;
        g_prime += correction;
        k_eff -= 2.0 * correction;
    }
    MagnusCoefficients {
        g_prime,
        g_dblprime: drive,
        g_tilde: k * drive * (0.25 * params.g1 - params.g0),
        k_eff,
        expansion_parameter: params.g0 / g2,
        fifth_order: opts.fifth_order,
        note: VALIDITY_NOTE.to_string(),
    }
}

/// High-frequency criterion for the inverted extremum: `g0 < g1^2 K / gamma^2`.
pub fn upper_extremum_stable_highfreq(params: &ModelParams) -> bool {
    params.g0 < params.g1 * params.g1 * params.k / (params.gamma * params.gamma)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n and its derivative.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n <= 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Nested Gauss-Legendre over the ordered simplex `0 < t3 < t2 < t1 < 2 pi`.
fn simplex_integral<F: Fn(f64, f64, f64) -> f64>(f: &F, n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    let nodes: Vec<(f64, f64)> = x.iter().zip(&w).map(|(&x, &w)| (0.5 * (x + 1.0), 0.5 * w)).collect();
    let mut total = 0.0;
    for &(u, wu) in &nodes {
        let t1 = 2.0 * PI * u;
        let mut inner2 = 0.0;
        for &(v, wv) in &nodes {
            let t2 = t1 * v;
            let mut inner3 = 0.0;
            for &(s, ws) in &nodes {
                inner3 += ws * f(t1, t2, t2 * s);
            }
            inner2 += wv * t2 * inner3;
        }
        total += wu * 2.0 * PI * t1 * inner2;
    }
    total
}

/// Default nested quadrature order; refinement doubles it.
pub const APPENDIX_QUADRATURE_ORDER: usize = 24;
pub const APPENDIX_REFINEMENT_TOL: f64 = 1e-6;

/// The two third-order time-ordered drive integrals, in drive-phase time
/// (`g(t) = g0 + g1 cos t`), each normalised by `1 / (12 pi)`. Their closed
/// forms are `g1` and `g0 g1 - g1^2 / 4`.
pub fn appendix_integrals(g0: f64, g1: f64) -> Result<(f64, f64)> {
    let g = |t: f64| g0 + g1 * t.cos();
    let first = |t1: f64, t2: f64, t3: f64| g(t3) - g(t2) + g(t1) - g(t2);
    let second = |t1: f64, t2: f64, t3: f64| g(t1) * (g(t3) - g(t2)) + g(t3) * (g(t1) - g(t2));
    let norm = 1.0 / (12.0 * PI);
    let scale_1 = g0.abs() + g1.abs();
    let scale_2 = scale_1 * scale_1;
    let mut out = [0.0; 2];
    for (slot, (integrand, scale)) in out.iter_mut().zip([
        (&first as &dyn Fn(f64, f64, f64) -> f64, scale_1),
        (&second as &dyn Fn(f64, f64, f64) -> f64, scale_2),
    ]) {
        let coarse = norm * simplex_integral(&integrand, APPENDIX_QUADRATURE_ORDER);
        let fine = norm * simplex_integral(&integrand, 2 * APPENDIX_QUADRATURE_ORDER);
        let reference = fine.abs().max(scale * f64::EPSILON.sqrt());
        let change = if reference > 0.0 { (fine - coarse).abs() / reference } else { 0.0 };
        if change > APPENDIX_REFINEMENT_TOL {
            return Err(Error::Quadrature { change });
        }
        *slot = fine;
    }
    Ok((out[0], out[1]))
}

/// Comparison of the `K_eff = 0` threshold with the quadratic chain's
/// first-lobe edge at vanishing `g0` and cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeffConsistency {
    /// `K g1 / gamma^2` at which `K_eff` changes sign.
    pub magnus_threshold: f64,
    /// Exact per-mode boundary at `g0 = 0`, small cutoff.
    pub chain_threshold: f64,
    pub lambda_over_gamma: f64,
    pub relative_difference: f64,
    /// Whether the two agree within 25% relative.
    pub consistent: bool,
}

/// Relative accuracy of the chain-edge bisection in [`keff_consistency`].
pub const CONSISTENCY_BISECTION_TOL: f64 = 1e-4;

pub fn keff_consistency(solver: &ChainSolver, lambda_over_gamma: f64) -> Result<KeffConsistency> {
    // K_eff = K (1 - 2 K g1 / gamma^2) vanishes at K g1 / gamma^2 = 1/2.
    let magnus_threshold = 0.5;
    let chain_threshold = bisect_verdict(
        |kg1| Ok(solver.cell(Reduced { kg0: 0.0, kg1, lambda: lambda_over_gamma })?.stable_exact),
        0.05,
        1.0,
        CONSISTENCY_BISECTION_TOL,
    )?;
    let relative_difference = (magnus_threshold - chain_threshold).abs() / magnus_threshold;
    Ok(KeffConsistency {
        magnus_threshold,
        chain_threshold,
        lambda_over_gamma,
        relative_difference,
        consistent: relative_difference < 0.25,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(k: f64, g0: f64, g1: f64) -> ModelParams {
        ModelParams::new(k, g0, g1, 1.0, 0.1).unwrap()
    }

    #[test]
    fn keff_reference_values() {
        let c = coefficients(&params(1.0, 0.0, 0.25), CoefficientOptions::default());
        assert_eq!(c.k_eff, 0.5);
        let c = coefficients(&params(1.0, 0.0, 0.5), CoefficientOptions::default());
        assert_eq!(c.k_eff, 0.0);
        let c = coefficients(&params(1.0, 0.0, 0.6), CoefficientOptions::default());
        assert!(c.k_eff < 0.0);
    }

    #[test]
    fn coefficient_algebra() {
        let gamma = 2.0;
        let p = ModelParams::new(0.7, 0.3, 1.1, gamma, 0.4).unwrap();
        let c = coefficients(&p, CoefficientOptions::default());
        let d = 1.1 / 4.0;
        assert!((c.g_prime - d * 0.49).abs() < 1e-15);
        assert!((c.g_dblprime - d).abs() < 1e-15);
        assert!((c.g_tilde - 0.7 * d * (1.1 / 4.0 - 0.3)).abs() < 1e-15);
        assert!((c.k_eff - (0.7 - 2.0 * c.g_prime)).abs() < 1e-15);
        assert!((c.expansion_parameter - 0.075).abs() < 1e-15);
    }

    #[test]
    fn g_tilde_vanishes_at_quarter_drive() {
        let c = coefficients(&params(0.8, 0.1, 0.4), CoefficientOptions::default());
        assert_eq!(c.g_tilde, 0.0);
    }

    #[test]
    fn fifth_order_lowers_keff_with_cutoff() {
        let base = ModelParams::new(1.0, 0.0, 0.3, 1.0, 0.3).unwrap();
        let off = coefficients(&base, CoefficientOptions::default());
        let on = coefficients(&base, CoefficientOptions { fifth_order: true });
        assert!(on.g_prime > off.g_prime);
        assert!(on.k_eff < off.k_eff);
        let wider = coefficients(&ModelParams { lambda: 0.5, ..base }, CoefficientOptions { fifth_order: true });
        assert!(wider.k_eff < on.k_eff);
    }

    #[test]
    fn upper_extremum_criterion() {
        assert!(upper_extremum_stable_highfreq(&params(1.0, 0.05, 0.3)));
        assert!(!upper_extremum_stable_highfreq(&params(1.0, 0.05, 0.0)));
        // The criterion tightens with vanishing K at fixed g0, g1.
        assert!(!upper_extremum_stable_highfreq(&params(1e-3, 0.05, 0.3)));
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(5);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // Exact through degree 9.
        let i8: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((i8 - 2.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn simplex_volume() {
        let v = simplex_integral(&|_, _, _| 1.0, 8);
        let expect = (2.0 * PI).powi(3) / 6.0;
        assert!((v - expect).abs() < 1e-10 * expect);
    }

    #[test]
    fn appendix_reference_values() {
        let (i1, i2) = appendix_integrals(1.0, 0.0).unwrap();
        assert!(i1.abs() < 1e-12 && i2.abs() < 1e-12);
        let (i1, i2) = appendix_integrals(0.3, 0.2).unwrap();
        assert!((i1 - 0.2).abs() < 1e-5 * 0.2, "{i1}");
        assert!((i2 - 0.05).abs() < 1e-5 * 0.05, "{i2}");
        let (i1, i2) = appendix_integrals(0.0, 1.0).unwrap();
        assert!((i1 - 1.0).abs() < 1e-5);
        assert!((i2 + 0.25).abs() < 1e-5 * 0.25);
    }

    #[test]
    fn keff_threshold_close_to_chain_edge() {
        let r = keff_consistency(&ChainSolver::new(64, 1024).unwrap(), 0.01).unwrap();
        assert!(r.consistent, "{r:?}");
        assert!(r.chain_threshold < r.magnus_threshold);
    }
}
