//! Exact time evolution of the Dicke-state populations of `N` collectively
//! decaying two-level emitters.
//!
//! The same populations `ρ_m(t)` are produced by several independent routes
//! so they can certify each other:
//!
//! - [`residue`]: closed-form residue sums with exact rational coefficients,
//! - [`spectral`]: Jordan decomposition of the rate matrix and resolvent
//!   inversion,
//! - [`oracle`]: power series, discrete-time Markov chain, constrained sums
//!   and an adaptive Runge–Kutta integrator,
//! - [`trajectory`]: quantum-jump Monte Carlo.
//!
//! [`observables`] turns populations into the radiated power and burst
//! statistics.
//!
//! Populations are indexed by the physical excitation number `m`
//! (`0` = ground state) everywhere in the public API.

pub mod error;
pub mod ladder;
pub mod observables;
pub mod onset;
pub mod oracle;
pub mod par;
pub mod precision;
pub mod residue;
pub mod solve;
pub mod spectral;
pub mod table;
pub mod trajectory;

pub use error::{Error, Result};
pub use ladder::{classify_poles, DickeLadder, Pole, PoleSet, RateMatrix};
pub use observables::{burst_summary, emission_curve, BurstSummary, EmissionCurve};
pub use precision::{PrecisionMode, PrecisionPolicy};
pub use residue::{ResidueExpansion, ResidueTerm};
pub use solve::{solve, SolveOptions};
pub use spectral::{JordanDecomposition, ResolventElement};
pub use table::{DiagonalState, EvolutionTable, Method};
pub use trajectory::{McEstimate, TrajectoryRecord};
