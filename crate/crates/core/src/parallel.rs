//! Parallel surfaces, neighbourhoods of geodesic discs, inradius estimates and
//! the audits built on them (Steiner bound, first variation, coarea volume).
//!
//! A parallel surface is obtained by pushing every node along its normal
//! geodesic and re-expressing the image as a radial graph about the original
//! center: for each target direction a damped Newton iteration finds the base
//! parameter whose pushed point lies on that ray.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::ambient::{lorentz, DiscBody, ModelSpace, Vec4};
use crate::audit::AuditReport;
use crate::error::{Error, Result};
use crate::surface::grid::{canonical_angles, focus_map, gauss_legendre_theta};
use crate::surface::{
    fundamental_forms, gauss_bonnet_residual, graph_point, integrals, snapshot, Convexity, CurvatureField, Directions, Grid, RadialSurface,
    SurfaceIntegrals, ThetaGrid,
};

/// How inner parallels are validated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReachGuard {
    /// Base strictly convex, no focal point within `|t|`, no fold, result
    /// strictly convex.
    Full,
    /// Only require a well-defined star-shaped radial graph.
    StarShaped,
}

type V3 = [f64; 3];

fn dot3(a: &V3, b: &V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn angles_of(w: &V3) -> (f64, f64) {
    (w[0].hypot(w[1]).atan2(w[2]), w[1].atan2(w[0]))
}

/// Pushes base points along their normals and reads off directions.
struct Pusher<'a> {
    s: &'a RadialSurface,
    r_t: &'a [f64],
    r_p: &'a [f64],
    t: f64,
}

impl Pusher<'_> {
    /// Direction (frame coordinates) and distance from the center of the
    /// point pushed from base parameter `(theta, phi)`.
    fn pushed(&self, theta: f64, phi: f64) -> Option<(V3, f64)> {
        let (theta, phi) = canonical_angles(theta, phi);
        let grid = self.s.grid();
        let mut jet = [0.0; 3];
        grid.interpolate(&[(self.s.radii(), false), (self.r_t, true), (self.r_p, false)], theta, phi, &mut jet);
        if !(jet[0] > 0.0) {
            return None;
        }
        let space = self.s.space();
        let center = self.s.center().coords();
        let dirs = Directions::new(self.s.frame(), theta, phi);
        let gp = graph_point(space, center, &dirs, jet[0], jet[1], jet[2]);
        if !(gp.det_g > 0.0) || !gp.cos_angle.is_finite() {
            return None;
        }
        let p = space.geodesic_raw(&gp.x, &gp.nu, self.t);
        let (d4, dist) = space.log_raw(center, &p);
        let fr = self.s.frame();
        let d = [lorentz(&d4, &fr[0]), lorentz(&d4, &fr[1]), lorentz(&d4, &fr[2])];
        Some((d, dist))
    }

    /// Radius of the pushed surface along node `n`'s direction and the
    /// orientation (Jacobian determinant) of the pushed direction map there.
    fn solve(&self, n: usize) -> Option<(f64, f64)> {
        let (theta, phi) = self.s.grid().angles(n);
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        let u = [st * cp, st * sp, ct];
        let et = [ct * cp, ct * sp, -st];
        let ep = [-sp, cp, 0.0];
        let eval = |x: [f64; 2]| -> Option<([f64; 2], f64, f64)> {
            let w = [u[0] + x[0] * et[0] + x[1] * ep[0], u[1] + x[0] * et[1] + x[1] * ep[1], u[2] + x[0] * et[2]];
            let (th, ph) = angles_of(&w);
            let (d, dist) = self.pushed(th, ph)?;
            Some(([dot3(&d, &et), dot3(&d, &ep)], dot3(&d, &u), dist))
        };
        let jacobian = |x: [f64; 2]| -> Option<[[f64; 2]; 2]> {
            let h = 1e-6;
            let mut j = [[0.0; 2]; 2];
            for k in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[k] += h;
                xm[k] -= h;
                let (fp, _, _) = eval(xp)?;
                let (fm, _, _) = eval(xm)?;
                j[0][k] = (fp[0] - fm[0]) / (2.0 * h);
                j[1][k] = (fp[1] - fm[1]) / (2.0 * h);
            }
            Some(j)
        };
        let norm = |f: &[f64; 2]| f[0].hypot(f[1]);

        let mut x = [0.0, 0.0];
        let (mut fx, mut along, mut dist) = eval(x)?;
        let mut converged = norm(&fx) <= 1e-13;
        for _ in 0..60 {
            if converged {
                break;
            }
            let j = jacobian(x)?;
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if !(det.abs() > 0.0) {
                return None;
            }
            let dx = [(-fx[0] * j[1][1] + fx[1] * j[0][1]) / det, (-fx[1] * j[0][0] + fx[0] * j[1][0]) / det];
            let mut lam = 1.0;
            let mut accepted = false;
            while lam > 1e-6 {
                let xn = [x[0] + lam * dx[0], x[1] + lam * dx[1]];
                if let Some((fn_, an, dn)) = eval(xn) {
                    if norm(&fn_) < norm(&fx) {
                        x = xn;
                        fx = fn_;
                        along = an;
                        dist = dn;
                        accepted = true;
                        break;
                    }
                }
                lam *= 0.5;
            }
            let step = lam * dx[0].hypot(dx[1]);
            if norm(&fx) <= 1e-13 || (accepted && step < 1e-15) || (!accepted && norm(&fx) < 1e-10) {
                converged = true;
            } else if !accepted {
                return None;
            }
        }
        if !converged || along <= 0.0 {
            return None;
        }
        let j = jacobian(x)?;
        Some((dist, j[0][0] * j[1][1] - j[0][1] * j[1][0]))
    }
}

/// Parallel surface at signed distance `t` with the full reach guard.
pub fn parallel_surface(s: &RadialSurface, t: f64) -> Result<RadialSurface> {
    parallel_surface_with(s, t, ReachGuard::Full)
}

pub fn parallel_surface_with(s: &RadialSurface, t: f64, guard: ReachGuard) -> Result<RadialSurface> {
    if !t.is_finite() {
        return Err(Error::Domain(format!("offset must be finite, got {t}")));
    }
    if t == 0.0 {
        return Ok(s.clone());
    }
    let inner = t < 0.0;
    let full = inner && guard == ReachGuard::Full;
    let reach = |reason: String| Error::ReachExceeded { t, reason };
    let f = fundamental_forms(s, Convexity::Any)?;
    if full {
        let (node, k) = f.argmin_kappa1();
        if !(k > 0.0) {
            return Err(reach(format!("base is not strictly convex (kappa1 = {k:.3e} at node {node})")));
        }
        let limit = s.space().ct(-t);
        if let Some(node) = f.nodes().iter().position(|n| n.kappa2 >= limit) {
            return Err(reach(format!("focal point within the offset at node {node}")));
        }
    }
    let d = f.derivatives();
    let pusher = Pusher { s, r_t: &d.d_theta, r_p: &d.d_phi, t };
    let solved: Vec<Option<(f64, f64)>> = (0..s.grid().len()).into_par_iter().map(|n| pusher.solve(n)).collect();
    let mut radii = Vec::with_capacity(solved.len());
    for (node, sol) in solved.into_iter().enumerate() {
        match sol {
            Some((r, det)) => {
                if full && !(det > 0.0) {
                    return Err(reach(format!("normal map folds at node {node}")));
                }
                radii.push(r);
            }
            None if inner => return Err(reach(format!("no star-shaped preimage along the ray of node {node}"))),
            None => return Err(Error::Domain(format!("re-graphing the outer parallel failed at node {node}"))),
        }
    }
    let out = s.with_radii(radii).map_err(|e| match e {
        Error::NegativeRadius { node, .. } if inner => reach(format!("surface passes through the center at node {node}")),
        e => e,
    })?;
    if full {
        let (node, k) = f
            .nodes()
            .iter()
            .map(|n| inner_kappa(s.space(), n.kappa1, -t))
            .enumerate()
            .fold((0, f64::INFINITY), |b, (i, k)| if k < b.1 || k.is_nan() { (i, k) } else { b });
        if !(k > 0.0) {
            return Err(reach(format!("inner parallel is not strictly convex (kappa1 = {k:.3e} at node {node})")));
        }
    }
    Ok(out)
}

/// Principal curvature carried a distance `tau` inward along the normal
/// geodesic; exact in constant curvature before the focal distance.
pub fn inner_kappa(space: &ModelSpace, kappa: f64, tau: f64) -> f64 {
    let (sn, cs) = (space.sn(tau), space.cs(tau));
    (kappa * cs + space.curvature() * sn) / (cs - kappa * sn)
}

/// `|Gamma_{-tau}|` from the area element `prod_i (cs - kappa_i sn) dmu`
/// of the normal exponential map; collapsed directions contribute nothing.
pub fn inner_area(f: &CurvatureField, space: &ModelSpace, tau: f64) -> f64 {
    let (sn, cs) = (space.sn(tau), space.cs(tau));
    f.integrate(|n| (cs - n.kappa1 * sn).max(0.0) * (cs - n.kappa2 * sn).max(0.0))
}

/// Integrals of a surface; curvature sign is not enforced.
pub fn surface_integrals(s: &RadialSurface) -> Result<SurfaceIntegrals> {
    Ok(integrals(&fundamental_forms(s, Convexity::Any)?, s))
}

/// Parallel surfaces of a common base.
#[derive(Debug, Clone)]
pub struct ParallelFamily {
    pub base: RadialSurface,
    pub offsets: Vec<f64>,
    pub members: Vec<RadialSurface>,
}

impl ParallelFamily {
    /// Members are built concurrently; any failure aborts the family.
    pub fn build(base: &RadialSurface, offsets: &[f64]) -> Result<Self> {
        let members = offsets.par_iter().map(|&t| parallel_surface(base, t)).collect::<Result<Vec<_>>>()?;
        Ok(Self { base: base.clone(), offsets: offsets.to_vec(), members })
    }

    pub fn integrals(&self) -> Result<Vec<SurfaceIntegrals>> {
        self.members.par_iter().map(surface_integrals).collect()
    }

    pub fn write_index_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "area", "M", "Gtot", "volume"])?;
        for (t, i) in self.offsets.iter().zip(self.integrals()?) {
            out.write_record([*t, i.area, i.m, i.gtot, i.volume].map(|x| x.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }

    /// One snapshot per member plus `index.csv`, written into `dir`.
    pub fn export(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for (k, m) in self.members.iter().enumerate() {
            snapshot::save(m, dir.join(format!("member_{k:03}.txt")))?;
        }
        self.write_index_csv(std::fs::File::create(dir.join("index.csv"))?)
    }
}

/// Value at zero of the polynomial through `(xs, ys)` (Neville).
pub fn limit_at_zero(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let mut p = ys.to_vec();
    let n = xs.len();
    for m in 1..n {
        for i in 0..n - m {
            p[i] = (xs[i + m] * p[i] - xs[i] * p[i + 1]) / (xs[i + m] - xs[i]);
        }
    }
    p[0]
}

/// Area, `M` and `G` as limits of outer parallels at `t0, t0/2, t0/4`.
pub fn limit_integrals(s: &RadialSurface, t0: f64) -> Result<SurfaceIntegrals> {
    if !(t0 > 0.0) {
        return Err(Error::Domain(format!("limit offset must be positive, got {t0}")));
    }
    let ts = [t0, 0.5 * t0, 0.25 * t0];
    let ii = ts.par_iter().map(|&t| surface_integrals(&parallel_surface(s, t)?)).collect::<Result<Vec<_>>>()?;
    let pick = |f: fn(&SurfaceIntegrals) -> f64| limit_at_zero(&ts, &ii.iter().map(f).collect::<Vec<_>>());
    Ok(SurfaceIntegrals { area: pick(|i| i.area), m: pick(|i| i.m), gtot: pick(|i| i.gtot), volume: s.volume() })
}

/// Brent's method on a bracketing interval.
pub(crate) fn brent(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, xtol: f64) -> Option<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa * fb > 0.0 || !fa.is_finite() || !fb.is_finite() {
        return None;
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Some(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Some(b)
}

/// Colatitudes gathered around the two rims where the flat faces of the
/// disc neighbourhood meet its tube.
pub fn ns_theta_grid(disc: &DiscBody, eps: f64, n_theta: usize) -> ThetaGrid {
    let k = disc.space().k();
    let (kr, ke) = (k * disc.radius(), k * eps);
    // elevation of the rim seen from the center
    let rho_w = (ke.cosh() * kr.cosh()).acosh();
    let s = (ke.sinh() / rho_w.sinh()).min(1.0);
    // width of the steep stretch on the tube side of the rim
    let w = (0.25 * s * (ke.sinh() / kr.tanh()).powi(2)).max(1e-14);
    let c = align_focus(s, w, n_theta);
    ThetaGrid::focused(n_theta, &[(-c, w), (c, w)], NS_FOCUS_SHARE).with_seams(&[s.acos(), (-s).acos()])
}

pub const NS_FOCUS_SHARE: f64 = 0.7;

/// Focus position `c` near the rim `s` for which the rim falls on a cell
/// boundary of the Gauss-Legendre rule, so the curvature jump is integrated
/// without a first-order error.
fn align_focus(s: f64, w: f64, n_theta: usize) -> f64 {
    let (_, gl_w) = gauss_legendre_theta(n_theta);
    let xi_at = |c: f64| focus_map(&[(-c, w), (c, w)], NS_FOCUS_SHARE, s);
    let xi = xi_at(s);
    let mut edge = -1.0;
    let mut target = -1.0;
    for wk in &gl_w {
        edge += wk;
        if (edge - xi).abs() < (target - xi).abs() {
            target = edge;
        }
    }
    // xi_at decreases as the focus moves past the rim
    let (mut lo, mut hi) = ((s - 50.0 * w).max(0.0), (s + 50.0 * w).min(1.0));
    if !(xi_at(lo) >= target && xi_at(hi) <= target) {
        return s;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if xi_at(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The level set `{dist_to_disc = eps}` as a radial graph about the disc
/// center, with the frame's third axis along the disc normal.
pub fn ns_surface(disc: &DiscBody, eps: f64, n_theta: usize, n_phi: usize) -> Result<RadialSurface> {
    let grid = Grid::new(ns_theta_grid(disc, eps, n_theta), n_phi)?;
    ns_surface_on(disc, eps, std::sync::Arc::new(grid))
}

/// As [`ns_surface`] on a caller-supplied grid.
pub fn ns_surface_on(disc: &DiscBody, eps: f64, grid: std::sync::Arc<Grid>) -> Result<RadialSurface> {
    let space = *disc.space();
    if space.is_flat() {
        return Err(Error::Domain("disc neighbourhoods are built in hyperbolic space only".into()));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    let frame = disc.frame();
    // the in-plane root sits exactly at r + eps; widen so roundoff cannot lose it
    let hi = (disc.radius() + eps) * (1.0 + 1e-9) + 1e-12;
    let radii = (0..grid.len())
        .into_par_iter()
        .map(|n| {
            // the third frame axis is the disc normal
            let psi = FRAC_PI_2 - grid.angles(n).0;
            let f = |rho: f64| disc.ray_distance(psi, rho) - eps;
            brent(f, 0.0, hi, 1e-12).ok_or_else(|| Error::RootBracketFailure {
                ray: n,
                reason: format!("no sign change of dist - eps on [0, {hi}]"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    RadialSurface::new(space, *disc.center(), frame, grid, radii)
}

/// Direction in frame coordinates and length of a tangent vector at the center.
fn polar(v: &V3) -> (f64, f64, f64) {
    let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let (th, ph) = if len > 0.0 { angles_of(v) } else { (0.0, 0.0) };
    (th, ph, len)
}

fn exp_center(s: &RadialSurface, v: &V3) -> Vec4 {
    let fr = s.frame();
    let (_, _, len) = polar(v);
    let center = s.center().coords();
    if len == 0.0 {
        return *center;
    }
    let mut dir = [0.0; 4];
    for k in 0..4 {
        dir[k] = (v[0] * fr[0][k] + v[1] * fr[1][k] + v[2] * fr[2][k]) / len;
    }
    s.space().geodesic_raw(center, &dir, len)
}

/// Distance from `c` to the surface, refined from the nearest node with the
/// interpolated radius function.
fn distance_to_surface(s: &RadialSurface, nodes: &[Vec4], c: &Vec4, hint: Option<(f64, f64)>) -> f64 {
    let space = s.space();
    let mut best = (f64::INFINITY, 0);
    for (k, x) in nodes.iter().enumerate() {
        let d = space.distance_raw(c, x);
        if d < best.0 {
            best = (d, k);
        }
    }
    let point = |th: f64, ph: f64| {
        let (th, ph) = canonical_angles(th, ph);
        let u = Directions::new(s.frame(), th, ph).u;
        space.geodesic_raw(s.center().coords(), &u, s.radius_at(th, ph))
    };
    let at = |th: f64, ph: f64| space.distance_raw(c, &point(th, ph));
    // compass search with steps measured in arc length along the surface
    let descend = |mut th: f64, mut ph: f64| {
        let mut d = at(th, ph);
        let mut step = d.max(1e-3);
        let floor = 1e-12 * (1.0 + d);
        let mut iters = 0;
        while step > floor && iters < 20_000 {
            iters += 1;
            let delta = 1e-7;
            let p = point(th, ph);
            let l_th = space.distance_raw(&p, &point(th + delta, ph)) / delta;
            let l_ph = (space.distance_raw(&p, &point(th, ph + delta)) / delta).max(1e-6 * l_th);
            let (dt, dp) = (step / l_th.max(1e-12), step / l_ph.max(1e-12));
            let mut moved = false;
            for (a, b) in [(dt, 0.0), (-dt, 0.0), (0.0, dp), (0.0, -dp), (dt, dp), (dt, -dp), (-dt, dp), (-dt, -dp)] {
                let v = at(th + a, ph + b);
                if v < d {
                    d = v;
                    th += a;
                    ph += b;
                    moved = true;
                    break;
                }
            }
            if moved {
                step *= 2.0;
            } else {
                step *= 0.5;
            }
        }
        d
    };
    let (theta, phi) = s.grid().angles(best.1);
    let mut d = descend(theta, phi).min(best.0);
    if let Some((th, ph)) = hint {
        d = d.min(descend(th, ph));
    }
    d
}

/// Largest distance from an interior point to the surface: lattice search
/// over tangent vectors at the center, then a compass search.
pub fn estimate_inradius(s: &RadialSurface) -> f64 {
    let nodes: Vec<Vec4> = s.embed().iter().map(|p| *p.coords()).collect();
    let r_max = s.radii().iter().cloned().fold(0.0, f64::max);
    let inside = |v: &V3, margin: f64| {
        let (th, ph, len) = polar(v);
        len == 0.0 || len < margin * s.radius_at(th, ph)
    };
    let hint = |v: &V3| {
        let (th, ph, len) = polar(v);
        (len > 0.0).then_some((th, ph))
    };
    let objective = |v: &V3| distance_to_surface(s, &nodes, &exp_center(s, v), hint(v));

    let n = 9;
    let h = 2.0 * r_max / (n - 1) as f64;
    let mut lattice = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v = [-r_max + h * i as f64, -r_max + h * j as f64, -r_max + h * k as f64];
                if inside(&v, 0.9) {
                    lattice.push(v);
                }
            }
        }
    }
    let scores: Vec<f64> = lattice.par_iter().map(objective).collect();
    let mut best = (scores[0], lattice[0]);
    for (sc, v) in scores.iter().zip(&lattice) {
        if *sc > best.0 {
            best = (*sc, *v);
        }
    }

    let (mut val, mut v) = best;
    let mut step = 0.5 * h;
    while step > 1e-7 * r_max {
        let trials: Vec<V3> = (0..6)
            .map(|m| {
                let mut w = v;
                w[m / 2] += if m % 2 == 0 { step } else { -step };
                w
            })
            .collect();
        let scored: Vec<f64> = trials.par_iter().map(|w| if inside(w, 1.0 - 1e-9) { objective(w) } else { f64::NEG_INFINITY }).collect();
        let mut moved = false;
        for (sc, w) in scored.iter().zip(&trials) {
            if *sc > val {
                val = *sc;
                v = *w;
                moved = true;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    val
}

/// Outcome of sampling inner parallels.
#[derive(Debug, Clone)]
pub struct DConvexityReport {
    pub d_convex: bool,
    /// `(t, min kappa1)` per offset, `None` where the parallel failed.
    pub min_kappa: Vec<(f64, Option<f64>)>,
    pub diagnostics: Vec<String>,
}

/// Whether every sampled inner parallel exists and is strictly convex.
pub fn d_convexity_check(s: &RadialSurface, offsets: &[f64]) -> Result<DConvexityReport> {
    if let Some(t) = offsets.iter().find(|t| !(**t < 0.0)) {
        return Err(Error::Domain(format!("inner offsets must be negative, got {t}")));
    }
    let f = fundamental_forms(s, Convexity::Any)?;
    let results: Vec<Result<f64>> = offsets
        .par_iter()
        .map(|&t| {
            parallel_surface(s, t)?;
            Ok(f.nodes().iter().map(|n| inner_kappa(s.space(), n.kappa1, -t)).fold(f64::INFINITY, f64::min))
        })
        .collect();
    let mut report = DConvexityReport { d_convex: true, min_kappa: Vec::new(), diagnostics: Vec::new() };
    for (&t, r) in offsets.iter().zip(results) {
        match r {
            Ok(k) => {
                if !(k > 0.0) {
                    report.d_convex = false;
                    report.diagnostics.push(format!("t = {t}: min kappa1 = {k:.3e}"));
                }
                report.min_kappa.push((t, Some(k)));
            }
            Err(e @ Error::ReachExceeded { .. }) => {
                report.d_convex = false;
                report.diagnostics.push(e.to_string());
                report.min_kappa.push((t, None));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}

fn relative_gb(i: &SurfaceIntegrals, a: f64) -> f64 {
    gauss_bonnet_residual(i, a) / i.gtot.abs()
}

/// `|Gamma_t| >= |Gamma| + M t + G t^2`, one report per offset.
pub fn steiner_audit(s: &RadialSurface, ts: &[f64]) -> Result<Vec<AuditReport>> {
    if let Some(t) = ts.iter().find(|t| !(**t > 0.0)) {
        return Err(Error::Domain(format!("Steiner offsets must be positive, got {t}")));
    }
    let a = s.space().curvature();
    let base = integrals(&fundamental_forms(s, Convexity::Strict)?, s);
    let members = ts.par_iter().map(|&t| surface_integrals(&parallel_surface(s, t)?)).collect::<Result<Vec<_>>>()?;
    Ok(ts
        .iter()
        .zip(members)
        .map(|(&t, i)| {
            let rhs = base.area + base.m * t + base.gtot * t * t;
            let tol = (1e-9 * rhs.abs()).max((relative_gb(&base, a) + relative_gb(&i, a)) * rhs.abs());
            AuditReport::new("steiner", i.area, rhs, tol).with_meta("t", t).with_meta("a", a)
        })
        .collect())
}

/// `|(|Gamma_h| - |Gamma_-h|) / 2h - M|`.
pub fn first_variation_audit(s: &RadialSurface, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("step must be positive, got {h}")));
    }
    let m = surface_integrals(s)?.m;
    let pair = [h, -h].par_iter().map(|&t| Ok(surface_integrals(&parallel_surface(s, t)?)?.area)).collect::<Result<Vec<_>>>()?;
    Ok(((pair[0] - pair[1]) / (2.0 * h) - m).abs())
}

/// Coarea check `|Omega| = int_0^inrad |Gamma_-t| dt` with composite
/// two-point Gauss-Legendre over `n_layers` panels. Layer areas come from
/// the normal exponential map of the base.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoareaAudit {
    pub volume: f64,
    pub layered: f64,
    pub inradius: f64,
    pub residual: f64,
}

pub fn coarea_volume_audit(s: &RadialSurface, n_layers: usize) -> Result<CoareaAudit> {
    if n_layers == 0 {
        return Err(Error::Domain("need at least one layer".into()));
    }
    let inradius = estimate_inradius(s);
    let h = inradius / n_layers as f64;
    let g = 0.5 / 3f64.sqrt();
    let mut ts = Vec::with_capacity(2 * n_layers);
    for k in 0..n_layers {
        let mid = (k as f64 + 0.5) * h;
        ts.push(mid - g * h);
        ts.push(mid + g * h);
    }
    let f = fundamental_forms(s, Convexity::Any)?;
    // spheres and tubes reach their focal point exactly at the inradius
    let focal = s.space().ct(inradius) * (1.0 + 1e-3);
    if let Some(node) = f.nodes().iter().position(|n| n.kappa2 > focal) {
        return Err(Error::ReachExceeded { t: -inradius, reason: format!("focal point before the inradius at node {node}") });
    }
    let areas: Vec<f64> = ts.iter().map(|&t| inner_area(&f, s.space(), t)).collect();
    let layered = 0.5 * h * areas.iter().sum::<f64>();
    let volume = s.volume();
    Ok(CoareaAudit { volume, layered, inradius, residual: (volume - layered).abs() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::ModelSpace;
    use crate::surface::{perturbed_sphere, Mode};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn grid(nt: usize, np: usize) -> Arc<Grid> {
        Arc::new(Grid::legendre(nt, np).unwrap())
    }

    #[test]
    fn sphere_parallels_are_spheres() {
        for a in [0.0, -1.0] {
            let space = ModelSpace::new(a).unwrap();
            let s = RadialSurface::sphere(space, 1.0, grid(16, 32)).unwrap();
            for t in [0.3, -0.4, 1.5] {
                let p = parallel_surface(&s, t).unwrap();
                assert!(p.radii().iter().all(|r| (r - 1.0 - t).abs() < 1e-12), "a={a} t={t}");
            }
            assert_eq!(parallel_surface(&s, 0.0).unwrap().radii(), s.radii());
        }
    }

    #[test]
    fn euclidean_steiner_polynomial_is_exact() {
        let space = ModelSpace::euclidean();
        let s = perturbed_sphere(space, space.origin(), 1.0, &[Mode::new(2, 0, 0.05), Mode::new(3, 1, 0.02)], grid(32, 64)).unwrap();
        let i = surface_integrals(&s).unwrap();
        for t in [0.1, 0.5] {
            let p = surface_integrals(&parallel_surface(&s, t).unwrap()).unwrap();
            let want = i.area + i.m * t + i.gtot * t * t;
            assert!(((p.area - want) / want).abs() < 1e-6, "t={t}: {} vs {want}", p.area);
        }
    }

    #[test]
    fn outer_parallels_nest_and_compose() {
        let space = ModelSpace::new(-1.0).unwrap();
        let s = perturbed_sphere(space, space.origin(), 0.8, &[Mode::new(2, 2, 0.04)], grid(24, 48)).unwrap();
        let p1 = parallel_surface(&s, 0.2).unwrap();
        let p12 = parallel_surface(&p1, 0.3).unwrap();
        let p2 = parallel_surface(&s, 0.5).unwrap();
        for ((a, b), c) in p12.radii().iter().zip(p2.radii()).zip(s.radii()) {
            assert!((a - b).abs() < 1e-6);
            assert!(b > c);
        }
        let inner = parallel_surface(&s, -0.2).unwrap();
        assert!(inner.radii().iter().zip(s.radii()).all(|(x, y)| x < y));
    }

    #[test]
    fn inner_then_outer_returns_to_the_surface() {
        let space = ModelSpace::new(-1.0).unwrap();
        let s = perturbed_sphere(space, space.origin(), 1.0, &[Mode::new(2, 0, 0.03)], grid(24, 48)).unwrap();
        let back = parallel_surface(&parallel_surface(&s, -0.3).unwrap(), 0.3).unwrap();
        let (a0, a1) = (surface_integrals(&s).unwrap().area, surface_integrals(&back).unwrap().area);
        assert!(((a1 - a0) / a0).abs() < 1e-6);
    }

    #[test]
    fn reach_guard_fires_past_focal_points() {
        let space = ModelSpace::euclidean();
        let s = RadialSurface::sphere(space, 1.0, grid(16, 32)).unwrap();
        assert!(matches!(parallel_surface(&s, -1.2), Err(Error::ReachExceeded { .. })));
    }

    #[test]
    fn neville_recovers_polynomials() {
        let f = |x: f64| 2.0 - 3.0 * x + 0.5 * x * x;
        let xs = [0.4, 0.2, 0.1];
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        assert!((limit_at_zero(&xs, &ys) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn brent_finds_roots() {
        let r = brent(|x| x * x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-13);
        assert!(brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_none());
    }

    #[test]
    fn ns_surface_axis_and_plane_values() {
        let space = ModelSpace::new(-1.0).unwrap();
        let disc = DiscBody::standard(space, 1.0).unwrap();
        let eps = 0.05;
        let s = ns_surface(&disc, eps, 128, 32).unwrap();
        let g = s.grid();
        let np = g.n_phi();
        // nearest rows to the poles: the plane sinh(eps) = sinh(r) cos(theta)
        let th = g.theta_at(0);
        let want = (eps.sinh() / th.cos()).asinh();
        assert!((s.radii()[0] - want).abs() < 1e-11);
        // rows straddling the equator approach r_disc + eps
        let mid = g.n_theta() / 2;
        assert!((s.radii()[mid * np] - (1.0 + eps)).abs() < 1e-3);
        let i = surface_integrals(&s).unwrap();
        // first-order tube decomposition: 2|D| cosh^2(eps) + |dD| pi sinh(eps)
        let tube = 2.0 * 4.0 * PI * (0.5f64).sinh().powi(2) * eps.cosh().powi(2) + 2.0 * PI * 1f64.sinh() * PI * eps.sinh();
        assert!(((i.area - tube) / tube).abs() < 0.05, "{} vs {tube}", i.area);
    }

    /// Area, total mean curvature and volume of the `eps`-neighbourhood of a
    /// disc of radius `r` at curvature -1: two equidistant caps over the disc
    /// plus half of a tube around the rim.
    fn ns_exact(r: f64, e: f64) -> (f64, f64, f64) {
        let d = 2.0 * PI * (r.cosh() - 1.0);
        let (s2, c2) = ((2.0 * e).sinh(), (2.0 * e).cosh());
        let area = 2.0 * d * e.cosh().powi(2) + 2.0 * PI * e.sinh() * (PI * r.sinh() * e.cosh() + 2.0 * e.sinh() * r.cosh());
        let m = 2.0 * d * s2 + 2.0 * PI * PI * r.sinh() * c2 + 4.0 * PI * r.cosh() * s2;
        let vol = 2.0 * d * (e / 2.0 + s2 / 4.0) + 2.0 * PI * (PI * r.sinh() * e.sinh().powi(2) / 2.0 + 2.0 * r.cosh() * (s2 / 4.0 - e / 2.0));
        (area, m, vol)
    }

    #[test]
    fn ns_surface_integrals_match_closed_forms() {
        let space = ModelSpace::new(-1.0).unwrap();
        for (r, eps, n) in [(1.0, 0.1, 512), (1.0, 0.025, 512), (3.0, 0.05, 512), (8.0, 0.05, 1024)] {
            let disc = DiscBody::standard(space, r).unwrap();
            let s = ns_surface(&disc, eps, n, 32).unwrap();
            let i = surface_integrals(&s).unwrap();
            let (area, m, vol) = ns_exact(r, eps);
            assert!(((i.area - area) / area).abs() < 1e-4, "r={r} eps={eps}: area {} vs {area}", i.area);
            assert!(((i.m - m) / m).abs() < 5e-4, "r={r} eps={eps}: M {} vs {m}", i.m);
            assert!(((i.volume - vol) / vol).abs() < 1e-8, "r={r} eps={eps}: volume {} vs {vol}", i.volume);
            assert!((i.gtot - 4.0 * PI - i.area).abs() < 1e-3 * i.gtot, "r={r} eps={eps}: Gauss-Bonnet");
        }
    }

    #[test]
    fn ns_bodies_are_d_convex_and_satisfy_coarea() {
        let space = ModelSpace::new(-1.0).unwrap();
        let disc = DiscBody::standard(space, 1.0).unwrap();
        let eps = 0.1;
        let s = ns_surface(&disc, eps, 512, 32).unwrap();
        let f = fundamental_forms(&s, Convexity::Strict).unwrap();
        // the caps are equidistant from a plane
        assert!((f.min_kappa1() - eps.tanh()).abs() < 1e-6, "{}", f.min_kappa1());
        let inr = estimate_inradius(&s);
        assert!((inr - eps).abs() < 0.02 * eps, "{inr}");
        let rep = d_convexity_check(&s, &[-0.25 * eps, -0.5 * eps, -0.75 * eps]).unwrap();
        assert!(rep.d_convex, "{:?}", rep.diagnostics);
        // inner parallels are neighbourhoods of smaller radius
        for (t, k) in &rep.min_kappa {
            assert!((k.unwrap() - (eps + t).tanh()).abs() < 1e-5, "{t}: {k:?}");
        }
        let c = coarea_volume_audit(&s, 16).unwrap();
        assert!(c.residual < 1e-3 * c.volume, "{c:?}");
        // Euclidean-comparison bound with R = sqrt(area / 4 pi) from the closed-form area
        let i = surface_integrals(&s).unwrap();
        let b = crate::audit::bonnesen_audit(i.volume, i.area, inr).unwrap();
        assert!(b.pass && b.slack > 0.0, "{b:?}");
        assert!((b.lhs - 0.837655307701718).abs() < 1e-5 && (b.rhs - 0.8075860888811888).abs() < 1e-6, "{b:?}");
    }

    #[test]
    fn inradius_of_spheres_and_ellipsoids() {
        let space = ModelSpace::new(-1.0).unwrap();
        let s = RadialSurface::sphere(space, 0.8, grid(16, 32)).unwrap();
        assert!((estimate_inradius(&s) - 0.8).abs() < 1e-6);
        let e = ModelSpace::euclidean();
        let o = e.origin();
        // ellipsoid with semi-axes 2, 2, 1
        let ell = RadialSurface::from_fn(e, o, e.frame_at(&o), grid(24, 48), |t, _| {
            let (st, ct) = t.sin_cos();
            1.0 / ((st / 2.0).powi(2) + ct * ct).sqrt()
        })
        .unwrap();
        assert!((estimate_inradius(&ell) - 1.0).abs() < 1e-2);
    }

    #[test]
    fn coarea_on_spheres() {
        let e = RadialSurface::sphere(ModelSpace::euclidean(), 1.0, grid(16, 32)).unwrap();
        let c = coarea_volume_audit(&e, 200).unwrap();
        assert!(c.residual < 1e-5, "{c:?}");
        let h = RadialSurface::sphere(ModelSpace::new(-1.0).unwrap(), 1.0, grid(16, 32)).unwrap();
        let c = coarea_volume_audit(&h, 50).unwrap();
        assert!((c.volume - PI * (2f64.sinh() - 2.0)).abs() < 1e-10);
        assert!(c.residual < 1e-4, "{c:?}");
    }

    #[test]
    fn first_variation_on_spheres() {
        let e = RadialSurface::sphere(ModelSpace::euclidean(), 1.3, grid(16, 32)).unwrap();
        assert!(first_variation_audit(&e, 0.1).unwrap() < 1e-10);
        let h = RadialSurface::sphere(ModelSpace::new(-1.0).unwrap(), 1.0, grid(16, 32)).unwrap();
        let m = surface_integrals(&h).unwrap().m;
        let r1 = first_variation_audit(&h, 1e-3).unwrap();
        assert!(r1 < 1e-4 * m);
        let (a, b) = (first_variation_audit(&h, 0.1).unwrap(), first_variation_audit(&h, 0.05).unwrap());
        assert!((a / b - 4.0).abs() < 0.1, "{}", a / b);
    }

    #[test]
    fn d_convexity_of_spheres() {
        let h = RadialSurface::sphere(ModelSpace::new(-1.0).unwrap(), 1.0, grid(16, 32)).unwrap();
        let rep = d_convexity_check(&h, &[-0.2, -0.5, -0.9]).unwrap();
        assert!(rep.d_convex, "{:?}", rep.diagnostics);
        assert!(d_convexity_check(&h, &[0.1]).is_err());
    }

    #[test]
    fn steiner_on_spheres() {
        let e = RadialSurface::sphere(ModelSpace::euclidean(), 1.0, grid(16, 32)).unwrap();
        for r in steiner_audit(&e, &[0.1, 0.5, 1.0]).unwrap() {
            assert!(r.pass && r.slack.abs() < 1e-8 * r.rhs, "{r:?}");
        }
        let h = RadialSurface::sphere(ModelSpace::new(-1.0).unwrap(), 1.0, grid(16, 32)).unwrap();
        let r = &steiner_audit(&h, &[0.5]).unwrap()[0];
        let want = 4.0 * PI * 1.5f64.sinh().powi(2) - (4.0 * PI * 1f64.sinh().powi(2) + 4.0 * PI * 2f64.sinh() * 0.5 + 4.0 * PI * 1f64.cosh().powi(2) * 0.25);
        assert!((r.slack - want).abs() < 1e-9 * want, "{} vs {want}", r.slack);
        assert!((want - 9.34974).abs() < 1e-5);
    }

    #[test]
    fn family_export_writes_index() {
        let s = RadialSurface::sphere(ModelSpace::new(-1.0).unwrap(), 1.0, grid(16, 32)).unwrap();
        let fam = ParallelFamily::build(&s, &[-0.2, 0.1, 0.3]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        fam.export(dir.path()).unwrap();
        let idx = std::fs::read_to_string(dir.path().join("index.csv")).unwrap();
        assert_eq!(idx.lines().next().unwrap(), "t,area,M,Gtot,volume");
        assert_eq!(idx.lines().count(), 4);
        let m = snapshot::load(dir.path().join("member_002.txt")).unwrap();
        assert!(m.radii().iter().all(|r| (r - 1.3).abs() < 1e-12));
    }
}
