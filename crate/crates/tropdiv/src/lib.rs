//! Exact divisor theory on metric graphs.
//!
//! The crate computes with divisors on metric graphs using exact rational
//! arithmetic throughout: reduced divisors via the burning algorithm, the
//! Baker-Norine rank, Clifford indices, the `w^r_d` invariant, and finite
//! harmonic morphisms. On top of the library sits a claim-verification
//! driver (see [`verify`]) and a CLI that exercise these tools on a family
//! of graphs `G_n` of genus `n + 3` built from a genus-2 core with loops
//! attached.
//!
//! Layout:
//! - [`metric_graph`]: graph models, points, refinement, distances
//! - [`divisor`]: divisors, canonical divisor, reduction, linear equivalence
//! - [`rank_bn`]: rank, Riemann-Roch checks, Clifford index, `w^r_d`
//! - [`family`]: constructors for the `G_0`/`G_n` family and modifications
//! - [`harmonic`]: morphisms, harmonicity, degree-2 quotient search
//! - [`oracle`]: independent brute-force discrete references used by tests
//! - [`format`], [`report`], [`verify`]: file formats, reports, claim drivers

pub mod divisor;
pub mod family;
pub mod format;
pub mod harmonic;
pub mod metric_graph;
pub mod oracle;
pub mod rank_bn;
pub mod rat;
pub mod report;
pub mod verify;
