//! Constant-curvature model spaces of curvature `a <= 0`.
//!
//! Both cases share one flat realization in four coordinates with the
//! product `<x,y> = -x0*y0 + x1*y1 + x2*y2 + x3*y3`:
//!
//! - `a = 0`: Euclidean 3-space, points are `(0, x, y, z)`;
//! - `a < 0`: the upper sheet `{<x,x> = 1/a, x0 > 0}` of the hyperboloid.
//!
//! With `C(t) = sn'(a, t)` and `S(t) = sn(a, t)` the exponential map reads
//! `exp_x(t v) = C(t) x + S(t) v` in both cases, which is what lets the
//! surface code treat the two geometries uniformly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec4 = [f64; 4];

/// Tolerance on the hyperboloid constraint `|a<x,x> - 1|`.
pub const CONSTRAINT_TOL: f64 = 1e-10;

#[inline]
pub(crate) fn lorentz(u: &Vec4, v: &Vec4) -> f64 {
    -u[0] * v[0] + u[1] * v[1] + u[2] * v[2] + u[3] * v[3]
}

#[inline]
pub(crate) fn sub(u: &Vec4, v: &Vec4) -> Vec4 {
    [u[0] - v[0], u[1] - v[1], u[2] - v[2], u[3] - v[3]]
}

#[inline]
pub(crate) fn scale(s: f64, u: &Vec4) -> Vec4 {
    [s * u[0], s * u[1], s * u[2], s * u[3]]
}

/// `s*u + t*v`
#[inline]
pub(crate) fn lin2(s: f64, u: &Vec4, t: f64, v: &Vec4) -> Vec4 {
    [
        s * u[0] + t * v[0],
        s * u[1] + t * v[1],
        s * u[2] + t * v[2],
        s * u[3] + t * v[3],
    ]
}

/// A point of the model space in flat coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point(pub(crate) Vec4);

impl Point {
    pub fn coords(&self) -> &Vec4 {
        &self.0
    }

    /// Cartesian coordinates of a Euclidean point.
    pub fn cartesian(&self) -> [f64; 3] {
        [self.0[1], self.0[2], self.0[3]]
    }
}

/// A tangent vector attached to a base point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentVector {
    pub base: Point,
    pub components: Vec4,
}

/// The ambient space, a simply connected 3-space of constant curvature `a <= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpace {
    a: f64,
}

impl ModelSpace {
    pub fn new(a: f64) -> Result<Self> {
        if !a.is_finite() || a > 0.0 {
            return Err(Error::Domain(format!("curvature must be finite and <= 0, got {a}")));
        }
        // -0.0 would otherwise leak into the formatted snapshots
        Ok(Self { a: if a == 0.0 { 0.0 } else { a } })
    }

    pub fn euclidean() -> Self {
        Self { a: 0.0 }
    }

    pub fn curvature(&self) -> f64 {
        self.a
    }

    pub fn is_flat(&self) -> bool {
        self.a == 0.0
    }

    /// `sqrt(-a)`
    #[inline]
    pub fn k(&self) -> f64 {
        (-self.a).sqrt()
    }

    /// The flat product of the embedding.
    #[inline]
    pub fn dot(&self, u: &Vec4, v: &Vec4) -> f64 {
        lorentz(u, v)
    }

    /// Warped-product coefficient `sn(a, t)`, extended oddly to all `t`.
    #[inline]
    pub fn sn(&self, t: f64) -> f64 {
        if self.a == 0.0 {
            t
        } else {
            let k = self.k();
            (k * t).sinh() / k
        }
    }

    /// `sn'(a, t)`
    #[inline]
    pub fn cs(&self, t: f64) -> f64 {
        if self.a == 0.0 {
            1.0
        } else {
            (self.k() * t).cosh()
        }
    }

    /// `ct = sn'/sn`; the principal curvature of a geodesic sphere of radius `t`.
    #[inline]
    pub fn ct(&self, t: f64) -> f64 {
        if self.a == 0.0 {
            1.0 / t
        } else {
            let k = self.k();
            k / (k * t).tanh()
        }
    }

    /// `int_0^t sn(a, s)^2 ds`, the radial volume factor.
    pub fn sn2_integral(&self, t: f64) -> f64 {
        if self.a == 0.0 {
            return t * t * t / 3.0;
        }
        let k = self.k();
        let x = 2.0 * k * t;
        // (sinh x - x) / (4 k^3), with a series where the difference cancels
        let sinh_minus = if x.abs() < 1e-2 {
            let x3 = x * x * x;
            x3 / 6.0 * (1.0 + x * x / 20.0 * (1.0 + x * x / 42.0))
        } else {
            x.sinh() - x
        };
        sinh_minus / (4.0 * k * k * k)
    }

    pub fn origin(&self) -> Point {
        if self.a == 0.0 {
            Point([0.0; 4])
        } else {
            Point([1.0 / self.k(), 0.0, 0.0, 0.0])
        }
    }

    /// Point from Cartesian coordinates (Euclidean) or from the spatial part
    /// `(x1, x2, x3)` of a hyperboloid point.
    pub fn point_from_spatial(&self, x: [f64; 3]) -> Point {
        if self.a == 0.0 {
            Point([0.0, x[0], x[1], x[2]])
        } else {
            let s2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            let x0 = (s2 - 1.0 / self.a).sqrt();
            Point([x0, x[0], x[1], x[2]])
        }
    }

    /// Validate a raw coordinate tuple as a point of this space.
    pub fn point(&self, coords: Vec4) -> Result<Point> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("non-finite point coordinates".into()));
        }
        if self.a == 0.0 {
            if coords[0] != 0.0 {
                return Err(Error::Domain("Euclidean points carry x0 = 0".into()));
            }
        } else {
            let c = self.a * lorentz(&coords, &coords);
            if (c - 1.0).abs() > CONSTRAINT_TOL || coords[0] <= 0.0 {
                return Err(Error::Domain(format!(
                    "point off the hyperboloid: a<x,x> - 1 = {:.3e}",
                    c - 1.0
                )));
            }
        }
        Ok(Point(coords))
    }

    /// Project flat coordinates back onto the model.
    #[inline]
    pub fn renormalize(&self, x: Vec4) -> Vec4 {
        if self.a == 0.0 {
            [0.0, x[1], x[2], x[3]]
        } else {
            let n = self.a * lorentz(&x, &x);
            let s = if x[0] < 0.0 { -1.0 } else { 1.0 } / n.abs().sqrt();
            scale(s, &x)
        }
    }

    /// Orthogonal projection of a flat vector onto `T_base M`.
    #[inline]
    pub fn project_tangent(&self, base: &Vec4, v: &Vec4) -> Vec4 {
        if self.a == 0.0 {
            [0.0, v[1], v[2], v[3]]
        } else {
            let c = self.a * lorentz(v, base);
            sub(v, &scale(c, base))
        }
    }

    /// Build a tangent vector, projecting the components onto `T_base M`.
    pub fn tangent(&self, base: Point, components: Vec4) -> TangentVector {
        TangentVector { base, components: self.project_tangent(&base.0, &components) }
    }

    pub fn norm(&self, v: &Vec4) -> f64 {
        lorentz(v, v).max(0.0).sqrt()
    }

    /// Point at distance `t` along the geodesic through `base` with unit velocity `v`.
    pub fn geodesic(&self, v: &TangentVector, t: f64) -> Point {
        Point(self.geodesic_raw(&v.base.0, &v.components, t))
    }

    #[inline]
    pub(crate) fn geodesic_raw(&self, base: &Vec4, v: &Vec4, t: f64) -> Vec4 {
        self.renormalize(lin2(self.cs(t), base, self.sn(t), v))
    }

    pub fn distance(&self, p: &Point, q: &Point) -> f64 {
        self.distance_raw(&p.0, &q.0)
    }

    #[inline]
    pub(crate) fn distance_raw(&self, p: &Vec4, q: &Vec4) -> f64 {
        if self.a == 0.0 {
            let d = sub(p, q);
            (d[1] * d[1] + d[2] * d[2] + d[3] * d[3]).sqrt()
        } else {
            let c = (self.a * lorentz(p, q)).max(1.0);
            if c < 1.0 + 1e-6 {
                // acosh loses half the digits near 1; use the chord instead
                let d = sub(p, q);
                let chord = lorentz(&d, &d).max(0.0).sqrt() * self.k();
                2.0 * (0.5 * chord).asinh() / self.k()
            } else {
                c.acosh() / self.k()
            }
        }
    }

    /// Unit tangent vector at `from` pointing to `to`, and the distance.
    pub(crate) fn log_raw(&self, from: &Vec4, to: &Vec4) -> (Vec4, f64) {
        let d = self.distance_raw(from, to);
        let w = if self.a == 0.0 {
            let w = sub(to, from);
            [0.0, w[1], w[2], w[3]]
        } else {
            self.project_tangent(from, to)
        };
        let n = lorentz(&w, &w).max(0.0).sqrt();
        if n == 0.0 {
            ([0.0; 4], 0.0)
        } else {
            (scale(1.0 / n, &w), d)
        }
    }

    /// Orthonormal frame of `T_p M` obtained by Gram-Schmidt from the
    /// coordinate axes; the standard frame at the origin.
    pub fn frame_at(&self, p: &Point) -> [Vec4; 3] {
        let mut out: Vec<Vec4> = Vec::with_capacity(3);
        for axis in 1..4 {
            let mut v = [0.0; 4];
            v[axis] = 1.0;
            let mut v = self.project_tangent(&p.0, &v);
            for e in &out {
                let c = lorentz(&v, e);
                v = sub(&v, &scale(c, e));
            }
            let n = lorentz(&v, &v).sqrt();
            out.push(scale(1.0 / n, &v));
        }
        [out[0], out[1], out[2]]
    }

    /// Whether `frame` is an orthonormal basis of `T_p M` within `tol`.
    pub fn is_orthonormal_frame(&self, p: &Point, frame: &[Vec4], tol: f64) -> bool {
        for (i, e) in frame.iter().enumerate() {
            if self.a != 0.0 && lorentz(e, &p.0).abs() > tol {
                return false;
            }
            if self.a == 0.0 && e[0] != 0.0 {
                return false;
            }
            for (j, f) in frame.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                if (lorentz(e, f) - target).abs() > tol {
                    return false;
                }
            }
        }
        true
    }
}

/// Curvature-checked `sn(a, rho)`.
pub fn sn(a: f64, rho: f64) -> Result<f64> {
    let space = ModelSpace::new(a)?;
    if !(rho >= 0.0) {
        return Err(Error::Domain(format!("sn requires rho >= 0, got {rho}")));
    }
    Ok(space.sn(rho))
}

/// Curvature-checked generalized cotangent `ct(a, rho) = sn'/sn`.
pub fn ct(a: f64, rho: f64) -> Result<f64> {
    let space = ModelSpace::new(a)?;
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("ct requires rho > 0, got {rho}")));
    }
    Ok(space.ct(rho))
}

/// A closed geodesic disc inside a totally geodesic plane.
#[derive(Debug, Clone, Copy)]
pub struct DiscBody {
    space: ModelSpace,
    center: Point,
    e1: Vec4,
    e2: Vec4,
    normal: Vec4,
    radius: f64,
}

impl DiscBody {
    pub fn new(space: ModelSpace, center: Point, e1: Vec4, e2: Vec4, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Domain(format!("disc radius must be positive, got {radius}")));
        }
        if !space.is_orthonormal_frame(&center, &[e1, e2], 1e-10) {
            return Err(Error::Domain("disc frame is not orthonormal".into()));
        }
        let normal = space
            .frame_at(&center)
            .iter()
            .chain(std::iter::once(&[0.0, 0.0, 0.0, 1.0]))
            .map(|v| {
                let mut n = space.project_tangent(&center.0, v);
                for e in [&e1, &e2] {
                    n = sub(&n, &scale(lorentz(&n, e), e));
                }
                n
            })
            .max_by(|x, y| lorentz(x, x).total_cmp(&lorentz(y, y)))
            .expect("candidate list is non-empty");
        let normal = scale(1.0 / lorentz(&normal, &normal).sqrt(), &normal);
        Ok(Self { space, center, e1, e2, normal, radius })
    }

    /// Disc of radius `r` about the origin, lying in the plane orthogonal to
    /// the third frame axis.
    pub fn standard(space: ModelSpace, radius: f64) -> Result<Self> {
        let o = space.origin();
        let f = space.frame_at(&o);
        Self::new(space, o, f[0], f[1], radius)
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn space(&self) -> &ModelSpace {
        &self.space
    }

    /// Unit normal of the disc's plane at the center.
    pub fn normal(&self) -> &Vec4 {
        &self.normal
    }

    /// Orthonormal frame `(e1, e2, normal)` at the center.
    pub fn frame(&self) -> [Vec4; 3] {
        [self.e1, self.e2, self.normal]
    }

    /// Exact geodesic distance from `p` to the closed disc.
    pub fn distance(&self, p: &Point) -> Result<f64> {
        if self.space.is_flat() {
            return Err(Error::Domain("disc distance is only provided for a < 0".into()));
        }
        Ok(self.distance_raw(&p.0))
    }

    pub(crate) fn distance_raw(&self, p: &Vec4) -> f64 {
        let space = &self.space;
        let k = space.k();
        let pn = lorentz(p, &self.normal);
        let foot = space.renormalize(sub(p, &scale(pn, &self.normal)));
        if space.distance_raw(&self.center.0, &foot) <= self.radius {
            return (k * pn.abs()).asinh() / k;
        }
        // nearest point of the boundary circle, in the azimuth of p
        let p1 = lorentz(p, &self.e1);
        let p2 = lorentz(p, &self.e2);
        let planar = (p1 * p1 + p2 * p2).sqrt();
        let u = lin2(p1 / planar, &self.e1, p2 / planar, &self.e2);
        let q = space.geodesic_raw(&self.center.0, &u, self.radius);
        space.distance_raw(p, &q)
    }
}

impl DiscBody {
    /// Distance to the disc of the point at distance `rho` from the center
    /// along a ray at elevation `psi` above the disc plane, by right-triangle
    /// trigonometry. Agrees with [`DiscBody::distance`] but keeps full
    /// relative accuracy for large radii.
    pub fn ray_distance(&self, psi: f64, rho: f64) -> f64 {
        let k = self.space.k();
        if k == 0.0 {
            let (s, c) = psi.abs().sin_cos();
            let h = rho * s;
            let off = rho * c - self.radius;
            return if off <= 0.0 { h } else { h.hypot(off) };
        }
        let kr = k * rho;
        let sinh_h = kr.sinh() * psi.abs().sin();
        let cosh_h = sinh_h.hypot(1.0);
        let h = sinh_h.asinh();
        // rho minus the foot's distance from the center
        let half = (0.5 * psi.abs()).sin();
        let gap = (half * half * (2.0 * kr).sinh() / cosh_h).asinh();
        let off = (kr - k * self.radius) - gap;
        if off <= 0.0 {
            return h / k;
        }
        // hyperbolic Pythagoras in half-angle form
        let sh2 = sinh_h * sinh_h / (2.0 * (cosh_h + 1.0));
        let so = (0.5 * off).sinh();
        2.0 * (sh2 * off.cosh() + so * so).sqrt().asinh() / k
    }
}

/// Free-function form of [`DiscBody::distance`].
pub fn dist_to_disc(p: &Point, disc: &DiscBody) -> Result<f64> {
    disc.distance(p)
}
