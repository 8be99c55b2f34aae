//! Fundamental forms, principal curvatures and curvature integrals.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{graph_point, Directions, Derivatives, Grid, RadialSurface};
use crate::ambient::{lorentz, ModelSpace, Point, TangentVector, Vec4};
use crate::error::{Error, Result};

/// Whether [`fundamental_forms`] should reject surfaces with `kappa1 <= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convexity {
    Strict,
    Any,
}

/// Curvature data at one node.
#[derive(Debug, Clone, Copy)]
pub struct NodeCurvature {
    pub position: Point,
    pub nu: Vec4,
    /// First fundamental form `(g_tt, g_tp, g_pp)`.
    pub g: [f64; 3],
    /// Second fundamental form, same layout.
    pub ii: [f64; 3],
    pub kappa1: f64,
    pub kappa2: f64,
    pub h: f64,
    pub gauss: f64,
    /// `sqrt(det g)` per unit `dtheta dphi`.
    pub area_density: f64,
    /// `1 / <nu, radial>`
    pub w: f64,
}

impl NodeCurvature {
    pub fn normal(&self) -> TangentVector {
        TangentVector { base: self.position, components: self.nu }
    }
}

#[derive(Debug, Clone)]
pub struct CurvatureField {
    grid: Arc<Grid>,
    nodes: Vec<NodeCurvature>,
    derivatives: Derivatives,
}

impl CurvatureField {
    pub fn nodes(&self) -> &[NodeCurvature] {
        &self.nodes
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Angular derivatives of the radius function the field was built from.
    pub fn derivatives(&self) -> &Derivatives {
        &self.derivatives
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn min_kappa1(&self) -> f64 {
        self.nodes.iter().map(|n| n.kappa1).fold(f64::INFINITY, f64::min)
    }

    pub fn max_kappa2(&self) -> f64 {
        self.nodes.iter().map(|n| n.kappa2).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Node index and value of the smallest `kappa1`.
    pub fn argmin_kappa1(&self) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, n) in self.nodes.iter().enumerate() {
            if n.kappa1 < best.1 || n.kappa1.is_nan() {
                best = (i, n.kappa1);
            }
        }
        best
    }

    /// Quadrature of `f(node) dmu` with fixed summation order.
    pub fn integrate(&self, f: impl Fn(&NodeCurvature) -> f64) -> f64 {
        let w = self.grid.node_weights();
        self.nodes.iter().zip(&w).map(|(n, w)| w * n.area_density * f(n)).sum()
    }
}

/// `|Gamma|`, `M`, `G(Gamma)` and `|Omega|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceIntegrals {
    pub area: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "Gtot")]
    pub gtot: f64,
    pub volume: f64,
}

/// Fundamental forms and principal curvatures at every node.
pub fn fundamental_forms(s: &RadialSurface, convexity: Convexity) -> Result<CurvatureField> {
    let grid = s.grid().clone();
    let d = grid.derivatives(s.radii());
    let space = *s.space();
    let center = *s.center().coords();
    let dirs = s.node_directions();
    let radii = s.radii();
    let nodes: Vec<NodeCurvature> = (0..grid.len())
        .into_par_iter()
        .map(|n| {
            node_curvature(
                &space,
                &center,
                &dirs[n],
                [radii[n], d.d_theta[n], d.d_phi[n], d.d_thetatheta[n], d.d_thetaphi[n], d.d_phiphi[n]],
            )
        })
        .collect();
    for (node, nc) in nodes.iter().enumerate() {
        let det = nc.g[0] * nc.g[2] - nc.g[1] * nc.g[1];
        if !(det > 0.0) || !nc.kappa1.is_finite() || !nc.kappa2.is_finite() {
            return Err(Error::SingularMetric { node, det });
        }
    }
    let field = CurvatureField { grid, nodes, derivatives: d };
    if convexity == Convexity::Strict {
        let (node, min_kappa) = field.argmin_kappa1();
        if !(min_kappa > 0.0) {
            return Err(Error::NonConvex { min_kappa, node });
        }
    }
    Ok(field)
}

/// Curvature at one point from the second jet `(r, r_t, r_p, r_tt, r_tp, r_pp)`.
pub(crate) fn node_curvature(space: &ModelSpace, center: &Vec4, d: &Directions, jet: [f64; 6]) -> NodeCurvature {
    let [r, r_t, r_p, r_tt, r_tp, r_pp] = jet;
    let gp = graph_point(space, center, d, r, r_t, r_p);
    let c = space.cs(r);
    let s = space.sn(r);
    let nu = &gp.nu;
    let a_nu = gp.cos_angle;
    let ut_nu = lorentz(&d.u_t, nu);
    let up_nu = lorentz(&d.u_p, nu);
    let u_nu = lorentz(&d.u, nu);
    let utp_nu = lorentz(&d.u_tp, nu);
    let upp_nu = lorentz(&d.u_pp, nu);
    // X_ij = r_ij A + r_i dA_j + C r_j u_i + S u_ij, and <X, nu> = 0
    let ii = [
        -(r_tt * a_nu + 2.0 * c * r_t * ut_nu - s * u_nu),
        -(r_tp * a_nu + c * (r_t * up_nu + r_p * ut_nu) + s * utp_nu),
        -(r_pp * a_nu + 2.0 * c * r_p * up_nu + s * upp_nu),
    ];
    let (kappa1, kappa2) = principal_curvatures(&gp.g, &ii);
    NodeCurvature {
        position: Point(gp.x),
        nu: gp.nu,
        g: gp.g,
        ii,
        kappa1,
        kappa2,
        h: kappa1 + kappa2,
        gauss: kappa1 * kappa2,
        area_density: gp.det_g.sqrt(),
        w: 1.0 / gp.cos_angle,
    }
}

/// Eigenvalues of `g^{-1} II` via the Cholesky factor of `g`.
pub(crate) fn principal_curvatures(g: &[f64; 3], ii: &[f64; 3]) -> (f64, f64) {
    let l11 = g[0].sqrt();
    let l21 = g[1] / l11;
    let l22 = (g[2] - l21 * l21).sqrt();
    let p = 1.0 / l11;
    let q = -l21 / (l11 * l22);
    let t = 1.0 / l22;
    let b11 = p * p * ii[0];
    let b12 = p * (q * ii[0] + t * ii[1]);
    let b22 = q * q * ii[0] + 2.0 * q * t * ii[1] + t * t * ii[2];
    let mean = 0.5 * (b11 + b22);
    let rad = (0.5 * (b11 - b22)).hypot(b12);
    (mean - rad, mean + rad)
}

pub fn integrals(f: &CurvatureField, s: &RadialSurface) -> SurfaceIntegrals {
    let w = f.grid.node_weights();
    let (mut area, mut m, mut gtot) = (0.0, 0.0, 0.0);
    for (n, wn) in f.nodes.iter().zip(&w) {
        let da = wn * n.area_density;
        area += da;
        m += n.h * da;
        gtot += n.gauss * da;
    }
    SurfaceIntegrals { area, m, gtot, volume: s.volume() }
}

/// `|Gtot - 4 pi + a area|`, which vanishes for exact integrals.
pub fn gauss_bonnet_residual(i: &SurfaceIntegrals, a: f64) -> f64 {
    (i.gtot - 4.0 * PI + a * i.area).abs()
}
