//! Scenario optimization for uncertain linear programs with
//! compression-learning certificates on the probability of constraint
//! violation.
//!
//! The crate covers three designs that share one certificate machinery:
//!
//! * [`scenario`]: enforce every sampled constraint, identify support
//!   constraints and compression sets, optionally discard samples greedily.
//! * [`robust_box`]: fit the smallest axis-aligned box to the samples and
//!   solve the robust program over it.
//! * [`cascade`]: solve a second program parameterized by the first
//!   minimizer on the same samples.
//!
//! [`bounds`] evaluates and inverts the confidence functions q(m, ε),
//! [`lp`] is the dense simplex underneath, [`sampling`] produces seeded
//! i.i.d. scenarios and [`validate`] replays certificates by Monte Carlo.
//!
//! ```
//! use scenario_cert::canonical::CanonicalForm;
//! use scenario_cert::sampling::{draw, DistributionSpec};
//! use scenario_cert::scenario::{certify, solve_scenario, CertTarget};
//! use scenario_cert::BoundKind;
//!
//! // min x  s.t.  x >= δ,  δ ~ Uniform[0, 1]
//! let problem = CanonicalForm::LowerMax.problem();
//! let samples = draw(&DistributionSpec::uniform_unit(1), 44, 42)?;
//! let (solution, record) = solve_scenario(&problem, &samples)?;
//! let cert = certify(&record, CertTarget::Epsilon(0.1), BoundKind::ExactBinomial, false)?;
//! assert!(cert.beta < 0.01);
//! assert_eq!(record.support_indices.len(), 1);
//! assert!(solution.x[0] > 0.0 && solution.x[0] < 1.0);
//! # Ok::<(), scenario_cert::Error>(())
//! ```

pub mod bounds;
pub mod canonical;
pub mod cascade;
pub mod error;
pub mod lp;
pub mod robust_box;
pub mod sampling;
pub mod scenario;
mod serde_ext;
pub mod validate;

pub use bounds::BoundKind;
pub use error::{Error, Result};
pub use lp::{LinearProgram, LpSolution, LpStatus};
