use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::lattice::{LatticeField, LatticeSpec};

/// Ground-state Wigner ensemble of the undriven quadratic lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialEnsemble {
    /// Massless modes; the zero mode is pinned to zero.
    Gapless,
    /// Every mode carries the mass `delta`.
    Gapped { delta: f64 },
}

impl InitialEnsemble {
    pub fn frequency(&self, spec: &LatticeSpec, q: f64) -> f64 {
        let w = spec.dispersion(q);
        match *self {
            InitialEnsemble::Gapless => w,
            InitialEnsemble::Gapped { delta } => (w * w + delta * delta).sqrt(),
        }
    }

    /// Analytic `⟨(1/K)((φ_{i+1} − φ_i)/dx)²⟩` at `t = 0`.
    pub fn gradient_energy(&self, spec: &LatticeSpec) -> f64 {
        (1..spec.n)
            .map(|m| {
                let q = spec.wavenumber(m);
                let wt = spec.dispersion(q);
                wt * wt / (2.0 * self.frequency(spec, q))
            })
            .sum::<f64>()
            / spec.l
    }
}

/// Draw one field with `⟨|φ_q|²⟩ = K/(2ω_q)` and `⟨|P_q|²⟩ = ω_q/(2K)`,
/// `φ_i = L^{-1/2} Σ_q φ_q e^{i q x_i}`.
pub fn sample_initial(spec: &LatticeSpec, k: f64, ensemble: InitialEnsemble, seed: u64) -> LatticeField {
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };
    let mut phi_q = vec![Complex64::new(0.0, 0.0); n];
    let mut p_q = vec![Complex64::new(0.0, 0.0); n];
    for m in 0..=n / 2 {
        let w = ensemble.frequency(spec, spec.wavenumber(m));
        if w == 0.0 {
            continue;
        }
        let var_phi = k / (2.0 * w);
        let var_p = w / (2.0 * k);
        if m == 0 || m == n / 2 {
            phi_q[m] = Complex64::new(var_phi.sqrt() * gauss(), 0.0);
            p_q[m] = Complex64::new(var_p.sqrt() * gauss(), 0.0);
        } else {
            let (sp, sm) = ((0.5 * var_phi).sqrt(), (0.5 * var_p).sqrt());
            phi_q[m] = Complex64::new(sp * gauss(), sp * gauss());
            p_q[m] = Complex64::new(sm * gauss(), sm * gauss());
            phi_q[n - m] = phi_q[m].conj();
            p_q[n - m] = p_q[m].conj();
        }
    }
    let ifft = FftPlanner::new().plan_fft_inverse(n);
    ifft.process(&mut phi_q);
    ifft.process(&mut p_q);
    let norm = 1.0 / spec.l.sqrt();
    LatticeField {
        phi: phi_q.iter().map(|c| c.re * norm).collect(),
        p: p_q.iter().map(|c| c.re * norm).collect(),
        t: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::num_complex::Complex64;

    fn mean_and_err(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    #[test]
    fn gradient_energy_matches_mode_sum() {
        let spec = LatticeSpec::new(200.0, 400).unwrap();
        let k = 0.4 * std::f64::consts::PI;
        for ens in [InitialEnsemble::Gapless, InitialEnsemble::Gapped { delta: 0.7 }] {
            let samples: Vec<f64> =
                (0..100).map(|s| sample_initial(&spec, k, ens, s).mean_gradient_sq(&spec) / k).collect();
            let (m, err) = mean_and_err(&samples);
            let exact = ens.gradient_energy(&spec);
            assert!((m - exact).abs() < 3.0 * err, "{m} vs {exact} +- {err}");
        }
    }

    #[test]
    fn fields_are_real_and_zero_mode_pinned() {
        let spec = LatticeSpec::new(10.0, 32).unwrap();
        let f = sample_initial(&spec, 1.0, InitialEnsemble::Gapless, 7);
        assert!(f.phi.iter().sum::<f64>().abs() < 1e-12);
        assert!(f.p.iter().sum::<f64>().abs() < 1e-12);
        assert_eq!(f, sample_initial(&spec, 1.0, InitialEnsemble::Gapless, 7));
        assert_ne!(f, sample_initial(&spec, 1.0, InitialEnsemble::Gapless, 8));
    }

    #[test]
    fn no_field_momentum_correlation() {
        let spec = LatticeSpec::new(50.0, 64).unwrap();
        let k = 1.0;
        let fft = FftPlanner::new().plan_fft_forward(spec.n);
        let (mut cross, mut scale) = (Vec::new(), 0.0);
        for s in 0..200 {
            let f = sample_initial(&spec, k, InitialEnsemble::Gapless, s);
            let mut a: Vec<Complex64> = f.phi.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            let mut b: Vec<Complex64> = f.p.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            fft.process(&mut a);
            fft.process(&mut b);
            let c = (a[3] * b[3].conj()).re;
            cross.push(k * c);
            scale += (a[3].norm_sqr() * b[3].norm_sqr()).sqrt() * k;
        }
        let (m, err) = mean_and_err(&cross);
        assert!(m.abs() < 4.0 * err, "{m} +- {err}");
        assert!(scale > 0.0);
    }

    #[test]
    fn large_gap_suppresses_fluctuations() {
        let spec = LatticeSpec::new(20.0, 40).unwrap();
        let var = |delta: f64| {
            (0..20)
                .map(|s| {
                    let f = sample_initial(&spec, 1.0, InitialEnsemble::Gapped { delta }, s);
                    f.phi.iter().map(|v| v * v).sum::<f64>() / spec.n as f64
                })
                .sum::<f64>()
                / 20.0
        };
        let (a, b) = (var(1.0), var(1e4));
        assert!(b < 1e-3 * a, "{a} {b}");
    }
}
