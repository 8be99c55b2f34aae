//! Closed star-shaped surfaces as radial graphs over a sphere grid.

mod curvature;
pub mod grid;
pub mod snapshot;

use std::sync::Arc;

use rayon::prelude::*;

use crate::ambient::{lin2, ModelSpace, Point, Vec4};
use crate::error::{Error, Result};

pub use curvature::{
    fundamental_forms, gauss_bonnet_residual, integrals, Convexity, CurvatureField, NodeCurvature,
    SurfaceIntegrals,
};
pub use grid::{Derivatives, Grid, ThetaGrid};

/// A closed surface `{exp_c(r(u) u)}` about a center point `c`.
#[derive(Debug, Clone)]
pub struct RadialSurface {
    space: ModelSpace,
    center: Point,
    frame: [Vec4; 3],
    grid: Arc<Grid>,
    radii: Vec<f64>,
    dirs: Arc<Vec<Directions>>,
}

impl RadialSurface {
    pub fn new(space: ModelSpace, center: Point, frame: [Vec4; 3], grid: Arc<Grid>, radii: Vec<f64>) -> Result<Self> {
        let center = space.point(*center.coords())?;
        if !space.is_orthonormal_frame(&center, &frame, 1e-10) {
            return Err(Error::Domain("frame is not an orthonormal basis of the tangent space at the center".into()));
        }
        if radii.len() != grid.len() {
            return Err(Error::InvalidGrid(format!("{} radii for a grid of {} nodes", radii.len(), grid.len())));
        }
        let dirs = Arc::new(
            (0..grid.len())
                .map(|n| {
                    let (t, p) = grid.angles(n);
                    Directions::new(&frame, t, p)
                })
                .collect(),
        );
        let s = Self { space, center, frame, grid, radii, dirs };
        s.check_radii()?;
        Ok(s)
    }

    /// Geodesic sphere of radius `rho` about the origin.
    pub fn sphere(space: ModelSpace, rho: f64, grid: Arc<Grid>) -> Result<Self> {
        let center = space.origin();
        let frame = space.frame_at(&center);
        let n = grid.len();
        Self::new(space, center, frame, grid, vec![rho; n])
    }

    /// Sample a radius function `f(theta, phi)` on the grid.
    pub fn from_fn(
        space: ModelSpace,
        center: Point,
        frame: [Vec4; 3],
        grid: Arc<Grid>,
        f: impl Fn(f64, f64) -> f64 + Sync,
    ) -> Result<Self> {
        let radii = (0..grid.len())
            .into_par_iter()
            .map(|n| {
                let (t, p) = grid.angles(n);
                f(t, p)
            })
            .collect();
        Self::new(space, center, frame, grid, radii)
    }

    /// Same center, frame and grid with new radii.
    pub fn with_radii(&self, radii: Vec<f64>) -> Result<Self> {
        if radii.len() != self.grid.len() {
            return Err(Error::InvalidGrid(format!("{} radii for a grid of {} nodes", radii.len(), self.grid.len())));
        }
        let s = Self { radii, ..self.clone() };
        s.check_radii()?;
        Ok(s)
    }

    fn check_radii(&self) -> Result<()> {
        for (node, &r) in self.radii.iter().enumerate() {
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::NegativeRadius { node, radius: r });
            }
        }
        Ok(())
    }

    pub fn space(&self) -> &ModelSpace {
        &self.space
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn frame(&self) -> &[Vec4; 3] {
        &self.frame
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Radial directions and their angular derivatives at the nodes.
    pub(crate) fn node_directions(&self) -> &[Directions] {
        &self.dirs
    }

    /// Node positions `exp_c(r u)`.
    pub fn embed(&self) -> Vec<Point> {
        (0..self.grid.len())
            .into_par_iter()
            .map(|n| Point(self.space.geodesic_raw(self.center.coords(), &self.dirs[n].u, self.radii[n])))
            .collect()
    }

    /// Radius in an arbitrary direction by interpolation on the grid.
    pub fn radius_at(&self, theta: f64, phi: f64) -> f64 {
        let mut out = [0.0];
        self.grid.interpolate(&[(&self.radii, false)], theta, phi, &mut out);
        out[0]
    }

    /// Interpolate onto a fresh grid with the same colatitude map.
    pub fn resample(&self, n_theta: usize, n_phi: usize) -> Result<Self> {
        let grid = Grid::new(self.grid.theta().with_len(n_theta), n_phi)?;
        self.resample_onto(Arc::new(grid))
    }

    pub fn resample_onto(&self, grid: Arc<Grid>) -> Result<Self> {
        if *grid == *self.grid {
            return Ok(self.clone());
        }
        let radii = (0..grid.len())
            .into_par_iter()
            .map(|n| {
                let (t, p) = grid.angles(n);
                self.radius_at(t, p)
            })
            .collect();
        Self::new(self.space, self.center, self.frame, grid, radii)
    }

    /// `|Omega|`, the volume of the enclosed star-shaped region.
    pub fn volume(&self) -> f64 {
        let w = self.grid.node_weights();
        let mut v = 0.0;
        for (n, r) in self.radii.iter().enumerate() {
            let (t, _) = self.grid.angles(n);
            v += w[n] * t.sin() * self.space.sn2_integral(*r);
        }
        v
    }
}

/// Unit direction `u(theta, phi)` in the tangent frame and its derivatives.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Directions {
    pub u: Vec4,
    pub u_t: Vec4,
    pub u_p: Vec4,
    pub u_tp: Vec4,
    pub u_pp: Vec4,
    pub sin_theta: f64,
}

impl Directions {
    pub fn new(frame: &[Vec4; 3], theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        let combine = |c: [f64; 3]| -> Vec4 {
            let mut v = [0.0; 4];
            for (e, ci) in frame.iter().zip(c) {
                for k in 0..4 {
                    v[k] += ci * e[k];
                }
            }
            v
        };
        Self {
            u: combine([st * cp, st * sp, ct]),
            u_t: combine([ct * cp, ct * sp, -st]),
            u_p: combine([-st * sp, st * cp, 0.0]),
            u_tp: combine([-ct * sp, ct * cp, 0.0]),
            u_pp: combine([-st * cp, -st * sp, 0.0]),
            sin_theta: st,
        }
    }
}

/// Position and outward normal of a radial graph from its first jet.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GraphPoint {
    pub x: Vec4,
    pub nu: Vec4,
    /// `g_tt, g_tp, g_pp`
    pub g: [f64; 3],
    pub det_g: f64,
    /// `<nu, A>` with `A` the unit radial direction at `x`
    pub cos_angle: f64,
}

pub(crate) fn graph_point(space: &ModelSpace, center: &Vec4, d: &Directions, r: f64, r_t: f64, r_p: f64) -> GraphPoint {
    let a = space.curvature();
    let c = space.cs(r);
    let s = space.sn(r);
    let dc = -a * s;
    let x = space.renormalize(lin2(c, center, s, &d.u));
    let radial = lin2(dc, center, c, &d.u);
    let x_t = lin2(r_t, &radial, s, &d.u_t);
    let x_p = lin2(r_p, &radial, s, &d.u_p);
    let s2 = s * s;
    let g = [r_t * r_t + s2, r_t * r_p, r_p * r_p + s2 * d.sin_theta * d.sin_theta];
    let det_g = g[0] * g[2] - g[1] * g[1];
    // nu = (A - g^{ij} r_j X_i) / |.|, with |.|^2 = 1 - g^{ij} r_i r_j = s^4 sin^2 / det g
    let ct = (g[2] * r_t - g[1] * r_p) / det_g;
    let cp = (g[0] * r_p - g[1] * r_t) / det_g;
    let cos_angle = s2 * d.sin_theta / det_g.sqrt();
    let mut nu = [0.0; 4];
    for k in 0..4 {
        nu[k] = (radial[k] - ct * x_t[k] - cp * x_p[k]) / cos_angle;
    }
    GraphPoint { x, nu, g, det_g, cos_angle }
}

/// Schmidt semi-normalized associated Legendre function `P_l^m(cos theta)`.
pub fn legendre_schmidt(l: usize, m: usize, theta: f64) -> f64 {
    if m > l {
        return 0.0;
    }
    let (s, x) = theta.sin_cos();
    let mut pmm = 1.0;
    for k in 1..=m {
        pmm *= (2 * k - 1) as f64 * s;
    }
    let p = if l == m {
        pmm
    } else {
        let mut p0 = pmm;
        let mut p1 = x * (2 * m + 1) as f64 * pmm;
        for ll in m + 2..=l {
            let p2 = ((2 * ll - 1) as f64 * x * p1 - (ll + m - 1) as f64 * p0) / (ll - m) as f64;
            p0 = p1;
            p1 = p2;
        }
        p1
    };
    if m == 0 {
        p
    } else {
        // sqrt(2 (l-m)! / (l+m)!)
        let mut ratio = 2.0;
        for k in (l - m + 1)..=(l + m) {
            ratio /= k as f64;
        }
        p * ratio.sqrt()
    }
}

/// Real spherical harmonic: `cos(m phi)` for `m >= 0`, `sin(|m| phi)` for `m < 0`.
pub fn real_harmonic(l: usize, m: i32, theta: f64, phi: f64) -> f64 {
    let am = m.unsigned_abs() as usize;
    let p = legendre_schmidt(l, am, theta);
    if m >= 0 {
        p * (am as f64 * phi).cos()
    } else {
        p * (am as f64 * phi).sin()
    }
}

/// One spherical-harmonic bump `amplitude * Y_lm`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Mode {
    pub l: usize,
    pub m: i32,
    pub amplitude: f64,
}

impl Mode {
    pub fn new(l: usize, m: i32, amplitude: f64) -> Self {
        Self { l, m, amplitude }
    }
}

/// `r = rho0 + sum amplitude * Y_lm`, validated strictly convex.
pub fn perturbed_sphere(space: ModelSpace, center: Point, rho0: f64, modes: &[Mode], grid: Arc<Grid>) -> Result<RadialSurface> {
    if !(rho0 > 0.0) {
        return Err(Error::Domain(format!("rho0 must be positive, got {rho0}")));
    }
    for md in modes {
        if md.m.unsigned_abs() as usize > md.l {
            return Err(Error::Domain(format!("mode ({}, {}) has |m| > l", md.l, md.m)));
        }
    }
    let frame = space.frame_at(&center);
    let radii: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|n| {
            let (t, p) = grid.angles(n);
            rho0 + modes.iter().map(|md| md.amplitude * real_harmonic(md.l, md.m, t, p)).sum::<f64>()
        })
        .collect();
    if let Some(node) = radii.iter().position(|r| !(*r > 0.0)) {
        return Err(Error::NonConvex { min_kappa: f64::NEG_INFINITY, node });
    }
    let s = RadialSurface::new(space, center, frame, grid, radii)?;
    fundamental_forms(&s, Convexity::Strict)?;
    Ok(s)
}
