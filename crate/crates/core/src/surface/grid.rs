//! Latitude-longitude parameter grids on the unit sphere.
//!
//! Colatitudes are Gauss-Legendre nodes in `x = cos(theta)` (optionally
//! pushed towards the equator by a `sinh` stretch), so no node sits on a pole.
//! Longitudes are uniform. Differentiation and interpolation across a pole use
//! the continuation `f(-theta, phi) = f(theta, phi + pi)`, which is why the
//! longitude count must be even.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;

use crate::error::{Error, Result};

pub const MIN_THETA: usize = 16;
pub const MIN_PHI: usize = 32;

const STENCIL: usize = 7;
const HALF: isize = 3;
const INTERP: usize = 8;

/// Gauss-Legendre nodes as colatitudes, ascending, with the weights for
/// `int_0^pi f(theta) sin(theta) dtheta`.
pub fn gauss_legendre_theta(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut theta = PI * (i as f64 + 0.75) / (nf + 0.5);
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, dpt) = legendre_theta(n, theta);
            dp = dpt;
            let step = p / dpt;
            theta -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, dpt) = legendre_theta(n, theta);
        if dpt.is_finite() {
            dp = dpt;
        }
        nodes[i] = theta;
        weights[i] = 2.0 / (dp * dp);
        nodes[n - 1 - i] = PI - theta;
        weights[n - 1 - i] = weights[i];
    }
    (nodes, weights)
}

/// `P_n(cos theta)` and its derivative with respect to theta.
fn legendre_theta(n: usize, theta: f64) -> (f64, f64) {
    let x = theta.cos();
    let (mut p0, mut p1) = (1.0, x);
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / theta.sin();
    (p1, dp)
}

/// Finite-difference weights for derivatives `0..=m` at `z` on the nodes `x`.
pub fn fornberg(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Colatitude nodes with quadrature weights for `dtheta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    stretch: f64,
    foci: Vec<(f64, f64)>,
    share: f64,
    seams: Vec<f64>,
}

impl ThetaGrid {
    pub fn legendre(n: usize) -> Self {
        Self::clustered(n, 0.0)
    }

    /// Gauss-Legendre nodes in `xi`, mapped through
    /// `cos(theta) = -sinh(stretch*xi)/sinh(stretch)`; `stretch = 0` is the
    /// plain Gauss-Legendre grid. Larger stretches crowd nodes near the equator.
    pub fn clustered(n: usize, stretch: f64) -> Self {
        let (gl_theta, gl_w) = gauss_legendre_theta(n);
        if stretch == 0.0 {
            let weights = gl_theta.iter().zip(&gl_w).map(|(t, w)| w / t.sin()).collect();
            return Self { nodes: gl_theta, weights, stretch, foci: Vec::new(), share: 0.0, seams: Vec::new() };
        }
        let sb = stretch.sinh();
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (t, w) in gl_theta.iter().zip(&gl_w) {
            let xi = -t.cos();
            let eta = (stretch * xi).sinh() / sb;
            let deta = stretch * (stretch * xi).cosh() / sb;
            let theta = (-eta).acos();
            let sin_theta = ((1.0 - eta) * (1.0 + eta)).sqrt();
            nodes.push(theta);
            weights.push(w * deta / sin_theta);
        }
        Self { nodes, weights, stretch, foci: Vec::new(), share: 0.0, seams: Vec::new() }
    }

    /// Gauss-Legendre nodes in `xi` mapped to `eta = -cos(theta)` by inverting
    /// `xi = F(eta)`, where `F' = (1 - share) + share * c * sum_j 1/sqrt((eta - e_j)^2 + w_j^2)`.
    /// Each focus `(e_j, w_j)` gathers nodes logarithmically around `e_j`
    /// down to the width `w_j`.
    pub fn focused(n: usize, foci: &[(f64, f64)], share: f64) -> Self {
        if foci.is_empty() || share == 0.0 {
            return Self::legendre(n);
        }
        let f = |eta: f64| focus_map(foci, share, eta);
        let df = |eta: f64| focus_map_derivative(foci, share, eta);
        let (gl_theta, gl_w) = gauss_legendre_theta(n);
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (t, w) in gl_theta.iter().zip(&gl_w) {
            let xi = -t.cos();
            let (mut lo, mut hi) = (-1.0, 1.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if f(mid) > xi {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let mut eta = 0.5 * (lo + hi);
            for _ in 0..2 {
                eta = (eta - (f(eta) - xi) / df(eta)).clamp(lo, hi);
            }
            let theta = (-eta).acos();
            let sin_theta = ((1.0 - eta) * (1.0 + eta)).sqrt();
            nodes.push(theta);
            weights.push(w / (df(eta) * sin_theta));
        }
        Self { nodes, weights, stretch: 0.0, foci: foci.to_vec(), share, seams: Vec::new() }
    }

    /// The same colatitude map and seams with `n` nodes.
    pub fn with_len(&self, n: usize) -> Self {
        let g = if self.foci.is_empty() { Self::clustered(n, self.stretch) } else { Self::focused(n, &self.foci, self.share) };
        g.with_seams(&self.seams)
    }

    /// Mark colatitudes where the sampled surface is only `C^{1,1}`.
    /// Difference and interpolation stencils never reach across a seam.
    pub fn with_seams(mut self, seams: &[f64]) -> Self {
        self.seams = seams.to_vec();
        self.seams.sort_by(f64::total_cmp);
        self
    }

    pub fn seams(&self) -> &[f64] {
        &self.seams
    }

    /// Row indices `b` such that a seam lies between rows `b - 1` and `b`.
    fn seam_breaks(&self) -> Vec<isize> {
        self.seams.iter().map(|&t| self.nodes.partition_point(|&x| x < t) as isize).collect()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights for `int_0^pi f(theta) dtheta`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn stretch(&self) -> f64 {
        self.stretch
    }

    pub fn foci(&self) -> &[(f64, f64)] {
        &self.foci
    }

    pub fn focus_share(&self) -> f64 {
        self.share
    }
}

fn focus_sum(foci: &[(f64, f64)], eta: f64) -> f64 {
    foci.iter().map(|&(c, w)| ((eta - c) / w).asinh() - ((-1.0 - c) / w).asinh()).sum()
}

/// The parameter `xi` of the focused colatitude map at `eta = -cos(theta)`.
pub fn focus_map(foci: &[(f64, f64)], share: f64, eta: f64) -> f64 {
    -1.0 + (1.0 - share) * (eta + 1.0) + share * 2.0 * focus_sum(foci, eta) / focus_sum(foci, 1.0)
}

fn focus_map_derivative(foci: &[(f64, f64)], share: f64, eta: f64) -> f64 {
    let dg: f64 = foci.iter().map(|&(c, w)| 1.0 / ((eta - c) * (eta - c) + w * w).sqrt()).sum();
    (1.0 - share) + share * 2.0 * dg / focus_sum(foci, 1.0)
}

/// Tensor grid of colatitudes and uniform longitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    theta: ThetaGrid,
    n_phi: usize,
    stencils: Stencils,
}

#[derive(Debug, Clone, PartialEq)]
struct Stencils {
    theta_d1: Vec<[f64; STENCIL]>,
    theta_d2: Vec<[f64; STENCIL]>,
    theta_start: Vec<isize>,
    breaks: Vec<isize>,
    phi_d1: [f64; STENCIL],
    phi_d2: [f64; STENCIL],
}

impl Grid {
    pub fn new(theta: ThetaGrid, n_phi: usize) -> Result<Self> {
        if theta.len() < MIN_THETA {
            return Err(Error::InvalidGrid(format!("need at least {MIN_THETA} colatitudes, got {}", theta.len())));
        }
        if n_phi < MIN_PHI || n_phi % 2 != 0 {
            return Err(Error::InvalidGrid(format!("need an even longitude count >= {MIN_PHI}, got {n_phi}")));
        }
        if !(theta.stretch >= 0.0) || theta.stretch > 50.0 {
            return Err(Error::InvalidGrid(format!("stretch {} outside [0, 50]", theta.stretch)));
        }
        if !(theta.share >= 0.0 && theta.share < 1.0)
            || theta.foci.iter().any(|&(c, w)| !(c.abs() <= 1.0) || !(w > 0.0) || !w.is_finite())
        {
            return Err(Error::InvalidGrid("focus share must lie in [0, 1) with centers in [-1, 1] and positive widths".into()));
        }
        if theta.seams.iter().any(|&t| !(t > 0.0 && t < PI)) {
            return Err(Error::InvalidGrid("seams must lie strictly between the poles".into()));
        }
        let breaks = theta.seam_breaks();
        let n_theta = theta.len() as isize;
        let mut theta_d1 = Vec::with_capacity(theta.len());
        let mut theta_d2 = Vec::with_capacity(theta.len());
        let mut theta_start = Vec::with_capacity(theta.len());
        for i in 0..n_theta {
            let start = window_start(&breaks, i, i, STENCIL as isize, i - HALF);
            let xs: Vec<f64> = (start..start + STENCIL as isize).map(|e| ext_theta(&theta.nodes, e)).collect();
            let c = fornberg(theta.nodes[i as usize], &xs, 2);
            theta_d1.push(c[1].clone().try_into().expect("stencil width"));
            theta_d2.push(c[2].clone().try_into().expect("stencil width"));
            theta_start.push(start - i);
        }
        let h = TAU / n_phi as f64;
        let d1 = [-1.0 / 60.0, 3.0 / 20.0, -3.0 / 4.0, 0.0, 3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0];
        let d2 = [1.0 / 90.0, -3.0 / 20.0, 3.0 / 2.0, -49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0];
        let phi_d1 = d1.map(|w| w / h);
        let phi_d2 = d2.map(|w| w / (h * h));
        Ok(Self { theta, n_phi, stencils: Stencils { theta_d1, theta_d2, theta_start, breaks, phi_d1, phi_d2 } })
    }

    pub fn legendre(n_theta: usize, n_phi: usize) -> Result<Self> {
        Self::new(ThetaGrid::legendre(n_theta), n_phi)
    }

    pub fn n_theta(&self) -> usize {
        self.theta.len()
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn len(&self) -> usize {
        self.theta.len() * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn theta(&self) -> &ThetaGrid {
        &self.theta
    }

    pub fn theta_at(&self, i: usize) -> f64 {
        self.theta.nodes[i]
    }

    pub fn phi_at(&self, j: usize) -> f64 {
        TAU * j as f64 / self.n_phi as f64
    }

    pub fn phi_step(&self) -> f64 {
        TAU / self.n_phi as f64
    }

    /// `(theta, phi)` of a row-major node index.
    pub fn angles(&self, node: usize) -> (f64, f64) {
        (self.theta_at(node / self.n_phi), self.phi_at(node % self.n_phi))
    }

    /// Quadrature weight of each node for `dtheta dphi`, row-major.
    pub fn node_weights(&self) -> Vec<f64> {
        let wp = self.phi_step();
        let mut out = Vec::with_capacity(self.len());
        for w in &self.theta.weights {
            out.extend(std::iter::repeat(w * wp).take(self.n_phi));
        }
        out
    }

    /// Local colatitude spacing at row `i`.
    pub fn theta_spacing(&self, i: usize) -> f64 {
        let n = self.n_theta() as isize;
        let i = i as isize;
        let lo = ext_theta(&self.theta.nodes, i - 1);
        let hi = ext_theta(&self.theta.nodes, i + 1);
        debug_assert!(i < n);
        0.5 * (hi - lo)
    }

    /// Map an extended colatitude index onto a stored row; `true` when the
    /// value must be read half a turn away in longitude.
    #[inline]
    fn ext_row(&self, e: isize) -> (usize, bool) {
        let n = self.n_theta() as isize;
        if e < 0 {
            ((-e - 1) as usize, true)
        } else if e >= n {
            ((2 * n - 1 - e) as usize, true)
        } else {
            (e as usize, false)
        }
    }

    /// First and second derivatives of a nodal field.
    pub fn derivatives(&self, v: &[f64]) -> Derivatives {
        assert_eq!(v.len(), self.len());
        let d_phi = self.apply_phi(v, &self.stencils.phi_d1);
        let d_phiphi = self.apply_phi(v, &self.stencils.phi_d2);
        let d_theta = self.apply_theta(v, &self.stencils.theta_d1);
        let d_thetatheta = self.apply_theta(v, &self.stencils.theta_d2);
        let d_thetaphi = self.apply_theta(&d_phi, &self.stencils.theta_d1);
        Derivatives { d_theta, d_phi, d_thetatheta, d_thetaphi, d_phiphi }
    }

    fn apply_phi(&self, v: &[f64], w: &[f64; STENCIL]) -> Vec<f64> {
        let np = self.n_phi;
        let h = HALF as usize;
        let mut out = vec![0.0; v.len()];
        out.par_chunks_mut(np).zip(v.par_chunks(np)).for_each(|(o, row)| {
            // periodic padding avoids index arithmetic in the inner loop
            let mut pad = Vec::with_capacity(np + 2 * h);
            pad.extend_from_slice(&row[np - h..]);
            pad.extend_from_slice(row);
            pad.extend_from_slice(&row[..h]);
            for (j, oj) in o.iter_mut().enumerate() {
                let win = &pad[j..j + STENCIL];
                *oj = w.iter().zip(win).map(|(a, b)| a * b).sum();
            }
        });
        out
    }

    fn apply_theta(&self, v: &[f64], w: &[[f64; STENCIL]]) -> Vec<f64> {
        let np = self.n_phi;
        let half_turn = np / 2;
        let mut out = vec![0.0; v.len()];
        out.par_chunks_mut(np).enumerate().for_each(|(i, o)| {
            let wi = &w[i];
            let start = i as isize + self.stencils.theta_start[i];
            for (k, wk) in wi.iter().enumerate() {
                let (row, mirrored) = self.ext_row(start + k as isize);
                let src = &v[row * np..(row + 1) * np];
                if mirrored {
                    let (lo, hi) = o.split_at_mut(half_turn);
                    for (oj, x) in lo.iter_mut().zip(&src[half_turn..]) {
                        *oj += wk * x;
                    }
                    for (oj, x) in hi.iter_mut().zip(&src[..half_turn]) {
                        *oj += wk * x;
                    }
                } else {
                    for (oj, x) in o.iter_mut().zip(src) {
                        *oj += wk * x;
                    }
                }
            }
        });
        out
    }

    /// Evaluate nodal fields at an arbitrary `(theta, phi)` by 8-point
    /// Lagrange interpolation in each direction. Fields flagged `odd` flip
    /// sign across a pole (colatitude derivatives).
    pub fn interpolate(&self, fields: &[(&[f64], bool)], theta: f64, phi: f64, out: &mut [f64]) {
        let (theta, phi) = canonical_angles(theta, phi);
        let np = self.n_phi;
        let h = self.phi_step();

        // longitude window and weights
        let s = phi / h;
        let j0 = s.floor();
        let frac = s - j0;
        let j0 = j0 as isize;
        let mut wphi = [0.0; INTERP];
        equispaced_lagrange(frac, &mut wphi);
        let phi_start = (j0 - HALF).rem_euclid(np as isize) as usize;
        let phi_start_mirrored = (phi_start + np / 2) % np;

        // colatitude window
        let nodes = &self.theta.nodes;
        let i0 = nodes.partition_point(|&t| t <= theta) as isize - 1;
        let (lo, hi) = match self.stencils.breaks.iter().position(|&b| b == i0 + 1) {
            // a seam between the bracketing rows: stay on the side of theta
            Some(k) if theta < self.theta.seams[k] => (i0, i0),
            Some(_) => (i0 + 1, i0 + 1),
            None => (i0, i0 + 1),
        };
        let start = window_start(&self.stencils.breaks, lo, hi, INTERP as isize, i0 - HALF);
        let mut xs = [0.0; INTERP];
        let mut rows = [(0usize, false); INTERP];
        for (m, e) in (start..start + INTERP as isize).enumerate() {
            xs[m] = ext_theta(nodes, e);
            rows[m] = self.ext_row(e);
        }
        let mut wtheta = [0.0; INTERP];
        lagrange_weights(theta, &xs, &mut wtheta);

        for (f, (field, odd)) in fields.iter().enumerate() {
            let mut acc = 0.0;
            for m in 0..INTERP {
                if wtheta[m] == 0.0 {
                    continue;
                }
                let (row, mirrored) = rows[m];
                let base = &field[row * np..(row + 1) * np];
                let start = if mirrored { phi_start_mirrored } else { phi_start };
                let mut v = 0.0;
                let mut jj = start;
                for wq in &wphi {
                    v += wq * base[jj];
                    jj += 1;
                    if jj == np {
                        jj = 0;
                    }
                }
                if mirrored && *odd {
                    v = -v;
                }
                acc += wtheta[m] * v;
            }
            out[f] = acc;
        }
    }
}

/// Start of a window of `len` consecutive extended rows covering `lo..=hi`
/// that crosses no seam break, as close to `preferred` as possible. Falls
/// back to `preferred` when every candidate crosses a seam.
fn window_start(breaks: &[isize], lo: isize, hi: isize, len: isize, preferred: isize) -> isize {
    if breaks.is_empty() {
        return preferred;
    }
    let crosses = |s: isize| breaks.iter().any(|&b| s < b && b <= s + len - 1);
    (hi - len + 1..=lo)
        .filter(|&s| !crosses(s))
        .min_by_key(|&s| (s - preferred).abs())
        .unwrap_or(preferred)
}

/// Colatitude of an extended index, reflecting through the poles.
#[inline]
fn ext_theta(nodes: &[f64], e: isize) -> f64 {
    let n = nodes.len() as isize;
    if e < 0 {
        -nodes[(-e - 1) as usize]
    } else if e >= n {
        TAU - nodes[(2 * n - 1 - e) as usize]
    } else {
        nodes[e as usize]
    }
}

/// Fold arbitrary angles onto `theta in [0, pi]`, `phi in [0, 2pi)`.
pub fn canonical_angles(theta: f64, phi: f64) -> (f64, f64) {
    let mut theta = theta.rem_euclid(TAU);
    let mut phi = phi;
    if theta > PI {
        theta = TAU - theta;
        phi += PI;
    }
    (theta, phi.rem_euclid(TAU))
}

fn lagrange_weights(x: f64, xs: &[f64; INTERP], w: &mut [f64; INTERP]) {
    for k in 0..INTERP {
        let mut p = 1.0;
        for m in 0..INTERP {
            if m != k {
                p *= (x - xs[m]) / (xs[k] - xs[m]);
            }
        }
        w[k] = p;
    }
}

/// Weights for nodes at offsets `-3..=4` evaluated at `frac in [0, 1)`.
fn equispaced_lagrange(frac: f64, w: &mut [f64; INTERP]) {
    for k in 0..INTERP {
        let xk = k as f64 - HALF as f64;
        let mut p = 1.0;
        for m in 0..INTERP {
            if m != k {
                let xm = m as f64 - HALF as f64;
                p *= (frac - xm) / (xk - xm);
            }
        }
        w[k] = p;
    }
}

/// Nodal first and second derivatives with respect to `(theta, phi)`.
#[derive(Debug, Clone)]
pub struct Derivatives {
    pub d_theta: Vec<f64>,
    pub d_phi: Vec<f64>,
    pub d_thetatheta: Vec<f64>,
    pub d_thetaphi: Vec<f64>,
    pub d_phiphi: Vec<f64>,
}
