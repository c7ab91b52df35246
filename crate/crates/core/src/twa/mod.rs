//! Truncated-Wigner ensembles of the classical driven sine-Gordon lattice.
//!
//! The lattice Hamiltonian is
//! `H = Σ_i dx [K/2 P_i² + (1/2K)((φ_{i+1} − φ_i)/dx)² − g(t) cos φ_i]`
//! on a ring of `N` sites. The UV cutoff is identified with the largest
//! lattice frequency `2/dx`.

mod critical;
mod ensemble;
mod lattice;
mod sampling;

pub use critical::{detect_critical, CriticalEstimates, Estimate, ScanPoint, MIN_SCAN_POINTS};
pub use ensemble::{run_ensemble, steps_per_period, EnsembleStats, ObservableConfig};
pub use lattice::{evolve_leapfrog, LatticeField, LatticeSpec, Step, BLOWUP_THRESHOLD};
pub use sampling::{sample_initial, InitialEnsemble};
