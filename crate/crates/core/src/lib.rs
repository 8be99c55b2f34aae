//! Harmonic mean curvature flow and curvature inequalities for convex
//! surfaces in three-dimensional model spaces of constant curvature `a <= 0`.

pub mod ambient;
pub mod audit;
pub mod closedform;
pub mod error;
pub mod flow;
pub mod parallel;
pub mod suite;
pub mod surface;

pub use ambient::{ct, dist_to_disc, sn, DiscBody, ModelSpace, Point, TangentVector};
pub use error::{Error, Result};
pub use surface::{
    fundamental_forms, gauss_bonnet_residual, integrals, perturbed_sphere, Convexity, CurvatureField, Grid, Mode,
    RadialSurface, SurfaceIntegrals, ThetaGrid,
};
