//! Exact quantities for geodesic spheres and for the flattened-disc family.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::ambient::ModelSpace;
use crate::error::{Error, Result};
use crate::surface::SurfaceIntegrals;

/// Integrals of the geodesic sphere of radius `rho` in curvature `a`.
pub fn sphere_quantities(a: f64, rho: f64) -> Result<SurfaceIntegrals> {
    let space = ModelSpace::new(a)?;
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("sphere radius must be positive, got {rho}")));
    }
    let s = space.sn(rho);
    let c = space.cs(rho);
    Ok(SurfaceIntegrals {
        area: 4.0 * PI * s * s,
        m: 8.0 * PI * s * c,
        gtot: 4.0 * PI * c * c,
        volume: 4.0 * PI * space.sn2_integral(rho),
    })
}

/// `phi_lambda = M^2 - 16 pi |Gamma| + lambda a |Gamma|^2`.
pub fn phi(m: f64, area: f64, a: f64, lambda: f64) -> f64 {
    m * m - 16.0 * PI * area + lambda * a * area * area
}

/// Limits of the `eps`-neighbourhood of a totally geodesic disc of radius `r`
/// as `eps -> 0`, at curvature `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NsLimits {
    pub r: f64,
    pub area_limit: f64,
    #[serde(rename = "M_limit")]
    pub m_limit: f64,
    pub lambda_threshold: f64,
}

/// Largest `lambda` with `phi_lambda >= 0` on the disc limit.
pub fn lambda_threshold(r: f64) -> Result<f64> {
    Ok(ns_limits(r)?.lambda_threshold)
}

pub fn ns_limits(r: f64) -> Result<NsLimits> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("disc radius must be positive and finite, got {r}")));
    }
    // cosh r - 1 = 2 sinh^2(r/2) without cancellation
    let c1 = 2.0 * (0.5 * r).sinh().powi(2);
    let s = r.sinh();
    let area_limit = 4.0 * PI * c1;
    let m_limit = 2.0 * PI * PI * s;
    // (pi^2 sinh^2 r - 16 c1) / (4 c1^2), using sinh^2 r = c1 (c1 + 2)
    let lambda_threshold = PI * PI / 4.0 * (1.0 + 2.0 / c1) - 4.0 / c1;
    Ok(NsLimits { r, area_limit, m_limit, lambda_threshold })
}

/// Right-hand side of the Bonnesen-type bound: the Euclidean volume between
/// balls of radii `R - inrad` and `R`, with `4 pi R^2 = area`.
pub fn bonnesen_rhs(area: f64, inrad: f64) -> Result<f64> {
    if !(area > 0.0) {
        return Err(Error::Domain(format!("area must be positive, got {area}")));
    }
    if !(inrad >= 0.0) {
        return Err(Error::Domain(format!("inradius must be non-negative, got {inrad}")));
    }
    let big_r = (area / (4.0 * PI)).sqrt();
    if inrad > big_r + 1e-12 {
        return Err(Error::InradExceedsRadius { inrad, radius: big_r });
    }
    let inner = (big_r - inrad).max(0.0);
    Ok(4.0 * PI / 3.0 * (big_r.powi(3) - inner.powi(3)))
}
