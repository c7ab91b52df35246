//! Dynamical stability of the periodically driven sine-Gordon model.
//!
//! Several cross-checking routes to the stability phase diagram:
//!
//! * [`floquet`]: monodromy analysis of a single Hill equation, reused for
//!   both fixed points of the driven pendulum;
//! * [`chain`]: one Hill equation per momentum mode of the quadratic chain;
//! * [`magnus`]: closed-form high-frequency effective couplings;
//! * [`variational`]: self-consistent Gaussian dynamics;
//! * [`twa`]: truncated-Wigner ensembles of the classical lattice field.
//!
//! [`scaling`] fits finite-time shifts of the critical drive and [`ode`] holds
//! the adaptive integrator used by the Gaussian dynamics.

pub mod chain;
pub mod diagram;
pub mod error;
pub mod floquet;
pub mod magnus;
pub mod ode;
pub mod params;
pub mod scaling;
pub mod twa;
pub mod variational;

pub use diagram::{Axis, CellRecord, Method, PhaseDiagram, QuadraticCell};
pub use error::{Error, Result};
pub use params::{ModelParams, Reduced};
