use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ModelParams, Reduced};

pub const BLOWUP_THRESHOLD: f64 = 1e8;

/// Periodic ring of `n` sites and length `l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

impl LatticeSpec {
    pub fn new(l: f64, n: usize) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidParams(format!("N must be even and at least 4, got {n}")));
        }
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::InvalidParams(format!("L must be positive, got {l}")));
        }
        Ok(Self { l, n })
    }

    pub fn dx(&self) -> f64 {
        self.l / self.n as f64
    }

    /// Cutoff `Λ = 2/dx`, the top of the lattice band.
    pub fn lambda(&self) -> f64 {
        2.0 / self.dx()
    }

    /// Wave number of FFT index `m`, folded into `(-π/dx, π/dx]`.
    pub fn wavenumber(&self, m: usize) -> f64 {
        let m = if m > self.n / 2 { m as f64 - self.n as f64 } else { m as f64 };
        2.0 * std::f64::consts::PI * m / self.l
    }

    /// Lattice dispersion `(2/dx)|sin(q dx/2)|`.
    pub fn dispersion(&self, q: f64) -> f64 {
        self.lambda() * (0.5 * q * self.dx()).sin().abs()
    }

    /// Model parameters realising `reduced` on this lattice: `γ` is fixed by
    /// `Λ/γ` and the couplings follow from `K`.
    pub fn params(&self, k: f64, reduced: Reduced) -> Result<ModelParams> {
        if !(reduced.lambda > 0.0) {
            return Err(Error::InvalidParams("Lambda/gamma must be positive".into()));
        }
        let gamma = self.lambda() / reduced.lambda;
        let g2 = gamma * gamma;
        ModelParams::new(k, reduced.kg0 * g2 / k, reduced.kg1 * g2 / k, gamma, self.lambda())
    }

    pub fn check(&self, params: &ModelParams) -> Result<()> {
        params.validate()?;
        if ((params.lambda - self.lambda()) / self.lambda()).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "lattice cutoff 2/dx = {} does not match Lambda = {}",
                self.lambda(),
                params.lambda
            )));
        }
        Ok(())
    }

    /// Default step: `T/256`, capped at `0.1/Λ`.
    pub fn default_dt(&self, params: &ModelParams) -> f64 {
        (params.period() / 256.0).min(0.1 / self.lambda())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeField {
    pub phi: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
}

impl LatticeField {
    pub fn zeros(n: usize) -> Self {
        Self { phi: vec![0.0; n], p: vec![0.0; n], t: 0.0 }
    }

    /// Total energy with the instantaneous drive `g`.
    pub fn energy(&self, spec: &LatticeSpec, k: f64, g: f64) -> f64 {
        let dx = spec.dx();
        let n = self.phi.len();
        let mut e = 0.0;
        for i in 0..n {
            let grad = (self.phi[(i + 1) % n] - self.phi[i]) / dx;
            e += 0.5 * k * self.p[i] * self.p[i] + 0.5 / k * grad * grad - g * self.phi[i].cos();
        }
        e * dx
    }

    /// Site average of `((φ_{i+1} − φ_i)/dx)²`.
    pub fn mean_gradient_sq(&self, spec: &LatticeSpec) -> f64 {
        let dx = spec.dx();
        let n = self.phi.len();
        let mut s = 0.0;
        for i in 0..n {
            let d = self.phi[(i + 1) % n] - self.phi[i];
            s += d * d;
        }
        s / (n as f64 * dx * dx)
    }

    pub fn mean_cos2phi(&self) -> f64 {
        self.phi.iter().map(|v| (2.0 * v).cos()).sum::<f64>() / self.phi.len() as f64
    }

    pub fn is_blown_up(&self) -> bool {
        self.phi.iter().chain(&self.p).any(|v| !v.is_finite()) || self.phi.iter().any(|v| v.abs() > BLOWUP_THRESHOLD)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Continue,
    Stop,
}

fn force(spec: &LatticeSpec, params: &ModelParams, t: f64, phi: &[f64], out: &mut [f64]) {
    let n = phi.len();
    let c = 1.0 / (params.k * spec.dx() * spec.dx());
    let g = params.drive(t);
    out[0] = c * (phi[1] - 2.0 * phi[0] + phi[n - 1]) - g * phi[0].sin();
    for i in 1..n - 1 {
        out[i] = c * (phi[i + 1] - 2.0 * phi[i] + phi[i - 1]) - g * phi[i].sin();
    }
    out[n - 1] = c * (phi[0] - 2.0 * phi[n - 1] + phi[n - 2]) - g * phi[n - 1].sin();
}

/// Kick-drift-kick integration of `φ̇ = K P`, `Ṗ = (1/K)Δφ/dx² − g(t) sin φ`
/// for `steps` steps of size `dt`. `observe(step_index, field)` runs after
/// every step; a blown-up field is reported as an error carrying the time.
pub fn evolve_leapfrog<O>(
    field: &mut LatticeField,
    params: &ModelParams,
    spec: &LatticeSpec,
    dt: f64,
    steps: usize,
    mut observe: O,
) -> Result<()>
where
    O: FnMut(usize, &LatticeField) -> Step,
{
    spec.check(params)?;
    if field.phi.len() != spec.n || field.p.len() != spec.n {
        return Err(Error::InvalidParams("field size does not match the lattice".into()));
    }
    if !(dt > 0.0) || dt > 0.1 / spec.lambda() * (1.0 + 1e-12) {
        return Err(Error::Config(format!("dt = {dt} must lie in (0, 0.1/Lambda]")));
    }
    let mut f = vec![0.0; spec.n];
    force(spec, params, field.t, &field.phi, &mut f);
    let t0 = field.t;
    for s in 1..=steps {
        for (p, fi) in field.p.iter_mut().zip(&f) {
            *p += 0.5 * dt * fi;
        }
        for (phi, p) in field.phi.iter_mut().zip(&field.p) {
            *phi += dt * params.k * p;
        }
        field.t = t0 + s as f64 * dt;
        force(spec, params, field.t, &field.phi, &mut f);
        for (p, fi) in field.p.iter_mut().zip(&f) {
            *p += 0.5 * dt * fi;
        }
        if field.is_blown_up() {
            return Err(Error::NumericOverflow { t: field.t });
        }
        if observe(s, field) == Step::Stop {
            break;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn spec_validation_and_cutoff() {
        assert!(LatticeSpec::new(10.0, 7).is_err());
        assert!(LatticeSpec::new(-1.0, 8).is_err());
        let s = LatticeSpec::new(200.0, 400).unwrap();
        assert_eq!(s.dx(), 0.5);
        assert_eq!(s.lambda(), 4.0);
        assert!((s.dispersion(PI / s.dx()) - s.lambda()).abs() < 1e-12);
        assert_eq!(s.wavenumber(0), 0.0);
        assert!((s.wavenumber(399) + 2.0 * PI / 200.0).abs() < 1e-15);
        let p = s.params(0.4 * PI, Reduced { kg0: 0.0, kg1: 0.3, lambda: 0.04 }).unwrap();
        assert!((p.gamma - 100.0).abs() < 1e-12);
        let r = p.reduced();
        assert!((r.kg1 - 0.3).abs() < 1e-12 && (r.lambda - 0.04).abs() < 1e-15);
        assert!(s.check(&p).is_ok());
        assert!(s.check(&ModelParams { lambda: PI / s.dx(), ..p }).is_err());
    }

    #[test]
    fn single_mode_oscillates_at_lattice_frequency() {
        let spec = LatticeSpec::new(20.0, 64).unwrap();
        let params = spec.params(0.4 * PI, Reduced { kg0: 0.0, kg1: 0.0, lambda: 0.04 }).unwrap();
        let dt = spec.default_dt(&params);
        for m in [1usize, 5, 32] {
            let q = spec.wavenumber(m);
            let w = spec.dispersion(q);
            let amp = 1e-3;
            let mut field = LatticeField::zeros(spec.n);
            for (i, phi) in field.phi.iter_mut().enumerate() {
                *phi = amp * (q * i as f64 * spec.dx()).cos();
            }
            let steps = (10.0 * params.period() / dt).round() as usize;
            let mut worst = 0.0f64;
            evolve_leapfrog(&mut field, &params, &spec, dt, steps, |_, f| {
                for (i, phi) in f.phi.iter().enumerate() {
                    let exact = amp * (q * i as f64 * spec.dx()).cos() * (w * f.t).cos();
                    worst = worst.max((phi - exact).abs());
                }
                Step::Continue
            })
            .unwrap();
            assert!(worst / amp < 1e-6, "m={m}: {worst}");
        }
    }

    #[test]
    fn static_nonlinear_energy_is_conserved() {
        let spec = LatticeSpec::new(20.0, 40).unwrap();
        let params = spec.params(0.4 * PI, Reduced { kg0: 0.2, kg1: 0.0, lambda: 0.1 }).unwrap();
        let mut field = LatticeField::zeros(spec.n);
        for i in 0..spec.n {
            field.phi[i] = 0.8 * (0.7 * i as f64).sin();
            field.p[i] = 0.3 * (1.3 * i as f64).cos();
        }
        let e0 = field.energy(&spec, params.k, params.g0);
        let dt = spec.default_dt(&params);
        let steps = (100.0 * params.period() / dt).round() as usize;
        let mut worst = 0.0f64;
        evolve_leapfrog(&mut field, &params, &spec, dt, steps, |_, f| {
            worst = worst.max((f.energy(&spec, params.k, params.g0) / e0 - 1.0).abs());
            Step::Continue
        })
        .unwrap();
        assert!(worst < 1e-4, "{worst}");
    }

    #[test]
    fn rejects_large_steps_and_flags_blowup() {
        let spec = LatticeSpec::new(8.0, 8).unwrap();
        let params = spec.params(1.0, Reduced { kg0: 0.0, kg1: 0.0, lambda: 0.1 }).unwrap();
        let mut field = LatticeField::zeros(8);
        assert!(matches!(evolve_leapfrog(&mut field, &params, &spec, 1.0, 1, |_, _| Step::Continue), Err(Error::Config(_))));
        field.phi[3] = f64::NAN;
        let r = evolve_leapfrog(&mut field, &params, &spec, 0.01, 5, |_, _| Step::Continue);
        assert!(matches!(r, Err(Error::NumericOverflow { .. })));
    }
}
