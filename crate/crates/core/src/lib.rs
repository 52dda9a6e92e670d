//! Simulation library for bounded local-set geometries of the 2D Gaussian
//! free field: Brownian first-exit machinery, radial/chordal Loewner chains,
//! the branching radial SLE4(-2) driver, per-point CLE4^M records, two-valued
//! sets built from iterated level lines, a discrete GFF laboratory, and the
//! statistical harness that checks every sampled law against analytic oracles.
//!
//! All numerics are generic over the scalar type (`f32` or `f64`) through the
//! [`Scalar`] trait; the `f64` instantiations are what the experiment suites
//! and the acceptance gates run.

pub mod cle;
pub mod dgff;
pub mod error;
pub mod harness;
pub mod loewner;
pub mod paths;
pub mod scalar;
pub mod seed;
pub mod sle;
pub mod tvs;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use seed::Seed;

/// Default scalar for the experiment suites.
pub type Real = f64;

pub type BrownianPath64 = paths::BrownianPath<Real>;
pub type RadialChain64 = loewner::RadialChain<Real>;
pub type ChordalChain64 = loewner::ChordalChain<Real>;
pub type RadialSle42Driver64 = sle::RadialSle42Driver<Real>;
pub type TargetRecord64 = cle::TargetRecord<Real>;
pub type TwoValuedSpec64 = tvs::TwoValuedSpec<Real>;
pub type LatticeField64 = dgff::LatticeField<Real>;
pub type Estimate64 = harness::Estimate<Real>;

/// The height-gap constant `lambda = sqrt(pi/8)` for the Green's function
/// normalized so that `G(x,y) ~ log(1/|x-y|) / (2*pi)`. Always computed,
/// never a decimal literal.
pub fn lambda<T: Scalar>() -> T {
    (T::PI() / scalar::flt::<T>(8.0)).sqrt()
}
