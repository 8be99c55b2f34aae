//! Harmonic mean curvature flow `X' = -(G/H) nu` of radial graphs.
//!
//! In the radial parameterization the flow reads `r_t = -W G/H`, with
//! `W = 1/<nu, radial>`. Time stepping is explicit midpoint with step doubling
//! for error control and a diffusion-type cap on the step size.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::closedform::phi;
use crate::error::{Error, Result};
use crate::surface::{fundamental_forms, gauss_bonnet_residual, integrals, Convexity, CurvatureField, RadialSurface, SurfaceIntegrals};

/// Spectral radius of the sixth-order second-difference stencil.
const D2_SPECTRAL_RADIUS: f64 = 6.044_444_444_444_444;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub dt_init: f64,
    pub rel_tol: f64,
    /// Stop once the area drops to this value.
    pub area_stop: f64,
    pub max_steps: usize,
    pub lambda_phi: f64,
    /// Stop exactly at this time, if set.
    pub end_time: Option<f64>,
    /// Take uniform steps of `dt_init` without error control.
    pub fixed_step: bool,
    /// Safety factor on the explicit stability limit.
    pub cfl: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            dt_init: 1e-3,
            rel_tol: 1e-7,
            area_stop: 1e-2,
            max_steps: 200_000,
            lambda_phi: 2.0,
            end_time: None,
            fixed_step: false,
            cfl: 0.5,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64, name: &str| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("flow config: {name} must be positive, got {x}")))
            }
        };
        pos(self.dt_init, "dt_init")?;
        pos(self.rel_tol, "rel_tol")?;
        pos(self.area_stop, "area_stop")?;
        pos(self.cfl, "cfl")?;
        if let Some(t) = self.end_time {
            pos(t, "end_time")?;
        }
        if self.max_steps == 0 {
            return Err(Error::Domain("flow config: max_steps must be positive".into()));
        }
        if !self.lambda_phi.is_finite() {
            return Err(Error::Domain("flow config: lambda_phi must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub t: f64,
    pub integrals: SurfaceIntegrals,
    pub phi: f64,
    pub kappa_min: f64,
    #[serde(rename = "F_max")]
    pub f_max: f64,
    pub dt_used: f64,
    /// `-2 int (G - a) G/H dmu`, the predicted `dM/dt`.
    pub m_rate: f64,
    pub gauss_bonnet_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    AreaStop,
    MaxSteps,
    StepCollapse,
    EndTime,
}

#[derive(Debug, Clone)]
pub struct FlowTrace {
    pub a: f64,
    pub lambda_phi: f64,
    pub samples: Vec<FlowSample>,
    pub termination: Termination,
    /// Surface at the last accepted sample.
    pub final_surface: RadialSurface,
}

/// Harmonic mean curvature `G/H` per node.
pub fn speed(f: &CurvatureField) -> Result<Vec<f64>> {
    let (node, min_kappa) = f.argmin_kappa1();
    if !(min_kappa > 0.0) {
        return Err(Error::NonConvex { min_kappa, node });
    }
    Ok(f.nodes().iter().map(|n| n.gauss / n.h).collect())
}

/// Radial velocity `W G/H` together with the curvature it came from.
fn velocity(s: &RadialSurface) -> Result<(CurvatureField, Vec<f64>)> {
    let f = fundamental_forms(s, Convexity::Strict)?;
    let v = speed(&f)?.iter().zip(f.nodes()).map(|(sp, n)| sp * n.w).collect();
    Ok((f, v))
}

fn shifted(s: &RadialSurface, v: &[f64], dt: f64) -> Result<RadialSurface> {
    s.with_radii(s.radii().iter().zip(v).map(|(r, v)| r - dt * v).collect())
}

/// One midpoint step given the velocity at the start.
fn midpoint(s: &RadialSurface, v0: &[f64], dt: f64) -> Result<RadialSurface> {
    let mid = shifted(s, v0, 0.5 * dt)?;
    let (_, vm) = velocity(&mid)?;
    shifted(s, &vm, dt)
}

/// Advance by `dt` with one explicit midpoint step; the result is checked
/// for strict convexity.
pub fn step(s: &RadialSurface, dt: f64) -> Result<RadialSurface> {
    if !(dt >= 0.0) {
        return Err(Error::Domain(format!("time step must be non-negative, got {dt}")));
    }
    if dt == 0.0 {
        return Ok(s.clone());
    }
    let (_, v0) = velocity(s)?;
    let out = midpoint(s, &v0, dt)?;
    fundamental_forms(&out, Convexity::Strict)?;
    Ok(out)
}

/// Largest stable step for the linearized flow, scaled by `cfl`.
pub fn stable_step(f: &CurvatureField, cfl: f64) -> f64 {
    let grid = f.grid();
    let dphi = grid.phi_step();
    let np = grid.n_phi();
    let mut lam: f64 = 0.0;
    for (node, n) in f.nodes().iter().enumerate() {
        let dtheta = grid.theta_spacing(node / np);
        let k = n.kappa1.abs().max(n.kappa2.abs());
        // largest partial derivative of G/H with respect to a principal curvature
        let d = n.w * n.w * (k / n.h).powi(2);
        let inv_h2 = 1.0 / (n.g[0] * dtheta * dtheta) + 1.0 / (n.g[2] * dphi * dphi);
        lam = lam.max(d * D2_SPECTRAL_RADIUS * inv_h2);
    }
    // explicit midpoint is stable on [-2, 0]
    cfl * 2.0 / lam
}

fn sample(t: f64, dt_used: f64, s: &RadialSurface, f: &CurvatureField, cfg: &FlowConfig) -> FlowSample {
    let a = s.space().curvature();
    let i = integrals(f, s);
    let m_rate = -2.0 * f.integrate(|n| (n.gauss - a) * n.gauss / n.h);
    let f_max = f.nodes().iter().map(|n| n.gauss / n.h).fold(0.0, f64::max);
    FlowSample {
        t,
        integrals: i,
        phi: phi(i.m, i.area, a, cfg.lambda_phi),
        kappa_min: f.min_kappa1(),
        f_max,
        dt_used,
        m_rate,
        gauss_bonnet_residual: gauss_bonnet_residual(&i, a),
    }
}

fn rejectable(e: &Error) -> bool {
    matches!(e, Error::NonConvex { .. } | Error::NegativeRadius { .. } | Error::SingularMetric { .. })
}

/// Flow until the area drops below `area_stop`, `end_time` is reached or the
/// step budget runs out.
pub fn run(s: &RadialSurface, cfg: &FlowConfig) -> Result<FlowTrace> {
    cfg.validate()?;
    let a = s.space().curvature();
    let mut cur = s.clone();
    let (mut f, mut v) = velocity(&cur)?;
    let mut samples = vec![sample(0.0, 0.0, &cur, &f, cfg)];
    let mut t = 0.0;
    let mut dt = cfg.dt_init;
    let dt_floor = 1e-12 * cfg.dt_init;
    let mut steps = 0;

    let termination = loop {
        let last = samples.last().expect("initial sample");
        if last.integrals.area <= cfg.area_stop {
            break Termination::AreaStop;
        }
        if let Some(end) = cfg.end_time {
            if t >= end * (1.0 - 1e-14) {
                break Termination::EndTime;
            }
        }
        if steps >= cfg.max_steps {
            break Termination::MaxSteps;
        }

        let mut h = if cfg.fixed_step { cfg.dt_init } else { dt.min(stable_step(&f, cfg.cfl)) };
        let mut hits_end = false;
        if let Some(end) = cfg.end_time {
            if t + h >= end {
                h = end - t;
                hits_end = true;
            }
        }

        let attempt = if cfg.fixed_step {
            midpoint(&cur, &v, h).and_then(|next| velocity(&next).map(|fv| (next, fv, 0.0)))
        } else {
            doubled_step(&cur, &v, h)
        };
        match attempt {
            Ok((next, (fn_, vn), err)) if cfg.fixed_step || err <= cfg.rel_tol => {
                t = if hits_end { cfg.end_time.expect("end time") } else { t + h };
                cur = next;
                f = fn_;
                v = vn;
                samples.push(sample(t, h, &cur, &f, cfg));
                steps += 1;
                if !cfg.fixed_step {
                    let grow = if err > 0.0 { 0.9 * (cfg.rel_tol / err).cbrt() } else { 2.0 };
                    dt = h * grow.clamp(0.2, 2.0);
                }
            }
            Ok((_, _, err)) => {
                dt = h * (0.9 * (cfg.rel_tol / err).cbrt()).clamp(0.1, 0.5);
            }
            Err(e) if rejectable(&e) && !cfg.fixed_step => {
                dt = 0.5 * h;
            }
            Err(e) => return Err(e),
        }
        if dt < dt_floor {
            return Err(Error::StepCollapse { t, dt });
        }
    };

    Ok(FlowTrace { a, lambda_phi: cfg.lambda_phi, samples, termination, final_surface: cur })
}

type Accepted = (RadialSurface, (CurvatureField, Vec<f64>), f64);

/// A full step and two half steps; returns the half-step result, its
/// curvature, and the relative discrepancy between the two.
fn doubled_step(s: &RadialSurface, v0: &[f64], h: f64) -> Result<Accepted> {
    let full = midpoint(s, v0, h)?;
    let half = midpoint(s, v0, 0.5 * h)?;
    let (_, vh) = velocity(&half)?;
    let two = midpoint(&half, &vh, 0.5 * h)?;
    let fv = velocity(&two)?;
    let scale = two.radii().iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let diff = full.radii().iter().zip(two.radii()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    Ok((two, fv, diff / scale))
}

/// Residuals of the integrated evolution identities `A' = -Gtot` and
/// `M' = -2 int (G - a) G/H`, from finite differences of the samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityResiduals {
    /// `max |A' + Gtot| / Gtot` over interior samples.
    pub area_rel: f64,
    /// `max |M' - m_rate| / |m_rate|` over interior samples.
    pub m_rel: f64,
    pub samples_used: usize,
}

/// Identity residuals using every sample.
pub fn flow_identities_audit(tr: &FlowTrace) -> Result<IdentityResiduals> {
    flow_identities_strided(tr, 1)
}

/// Identity residuals using every `stride`-th sample.
pub fn flow_identities_strided(tr: &FlowTrace, stride: usize) -> Result<IdentityResiduals> {
    let s: Vec<&FlowSample> = tr.samples.iter().step_by(stride.max(1)).collect();
    if s.len() < 3 {
        return Err(Error::Domain(format!("identity audit needs at least 3 samples, got {}", s.len())));
    }
    let mut area_rel: f64 = 0.0;
    let mut m_rel: f64 = 0.0;
    for w in s.windows(3) {
        let (p, c, n) = (w[0], w[1], w[2]);
        let da = three_point(p.t, c.t, n.t, p.integrals.area, c.integrals.area, n.integrals.area);
        let dm = three_point(p.t, c.t, n.t, p.integrals.m, c.integrals.m, n.integrals.m);
        area_rel = area_rel.max((da + c.integrals.gtot).abs() / c.integrals.gtot);
        m_rel = m_rel.max((dm - c.m_rate).abs() / c.m_rate.abs());
    }
    Ok(IdentityResiduals { area_rel, m_rel, samples_used: s.len() })
}

/// Derivative at `t1` of the parabola through three samples.
fn three_point(t0: f64, t1: f64, t2: f64, y0: f64, y1: f64, y2: f64) -> f64 {
    let (h0, h1) = (t1 - t0, t2 - t1);
    (-h1 / (h0 * (h0 + h1))) * y0 + ((h1 - h0) / (h0 * h1)) * y1 + (h0 / (h1 * (h0 + h1))) * y2
}

pub const TRACE_HEADER: [&str; 8] = ["t", "area", "M", "Gtot", "phi", "kappa_min", "F_max", "dt"];

pub fn write_trace_csv(tr: &FlowTrace, w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACE_HEADER)?;
    for s in &tr.samples {
        let i = &s.integrals;
        out.write_record([s.t, i.area, i.m, i.gtot, s.phi, s.kappa_min, s.f_max, s.dt_used].map(|x| x.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_trace_csv(tr: &FlowTrace, path: impl AsRef<Path>) -> Result<()> {
    write_trace_csv(tr, std::fs::File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::ModelSpace;
    use crate::surface::{perturbed_sphere, Grid, Mode};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn grid(nt: usize, np: usize) -> Arc<Grid> {
        Arc::new(Grid::legendre(nt, np).unwrap())
    }

    #[test]
    fn sphere_speeds() {
        let e = RadialSurface::sphere(ModelSpace::euclidean(), 2.0, grid(16, 32)).unwrap();
        let f = fundamental_forms(&e, Convexity::Strict).unwrap();
        assert!(speed(&f).unwrap().iter().all(|v| (v - 0.25).abs() < 1e-12));
        let h = RadialSurface::sphere(ModelSpace::new(-1.0).unwrap(), 0.7, grid(16, 32)).unwrap();
        let f = fundamental_forms(&h, Convexity::Strict).unwrap();
        let want = 0.5 / 0.7f64.tanh();
        assert!(speed(&f).unwrap().iter().all(|v| (v - want).abs() < 1e-12));
    }

    #[test]
    fn speed_is_bounded_by_quarter_mean_curvature() {
        let space = ModelSpace::new(-1.0).unwrap();
        let s = perturbed_sphere(space, space.origin(), 1.0, &[Mode::new(2, 0, 0.05), Mode::new(3, 1, 0.02)], grid(24, 48)).unwrap();
        let f = fundamental_forms(&s, Convexity::Strict).unwrap();
        for (v, n) in speed(&f).unwrap().iter().zip(f.nodes()) {
            assert!(*v > 0.0 && *v <= n.h / 4.0 + 1e-14);
        }
    }

    #[test]
    fn single_steps_follow_the_sphere_ode() {
        let e = RadialSurface::sphere(ModelSpace::euclidean(), 1.0, grid(16, 32)).unwrap();
        assert_eq!(step(&e, 0.0).unwrap().radii(), e.radii());
        let dt = 1e-3;
        let r = step(&e, dt).unwrap().radii()[0];
        // midpoint on R' = -1/(2R): local error O(dt^3)
        assert!((r - (1.0 - dt).sqrt()).abs() < 1e-9);
        let h = RadialSurface::sphere(ModelSpace::new(-1.0).unwrap(), 1.0, grid(16, 32)).unwrap();
        let r = step(&h, dt).unwrap().radii()[0];
        let want = (1f64.cosh() * (-dt / 2.0).exp()).acosh();
        assert!((r - want).abs() < 1e-9);
    }

    #[test]
    fn euclidean_sphere_collapses_at_unit_time() {
        let s = RadialSurface::sphere(ModelSpace::euclidean(), 1.0, grid(16, 32)).unwrap();
        let cfg = FlowConfig { area_stop: 1e-3 * 4.0 * PI, ..FlowConfig::default() };
        let tr = run(&s, &cfg).unwrap();
        assert_eq!(tr.termination, Termination::AreaStop);
        let last = tr.samples.last().unwrap();
        let t_collapse = last.t + last.integrals.area / last.integrals.gtot;
        assert!((t_collapse - 1.0).abs() < 1e-2, "{t_collapse}");
        for w in tr.samples.windows(2) {
            assert!(w[1].t > w[0].t && w[1].integrals.area < w[0].integrals.area);
        }
    }

    #[test]
    fn hyperbolic_sphere_matches_closed_form_radius() {
        let s = RadialSurface::sphere(ModelSpace::new(-1.0).unwrap(), 1.0, grid(16, 32)).unwrap();
        let cfg = FlowConfig { end_time: Some(0.3), ..FlowConfig::default() };
        let tr = run(&s, &cfg).unwrap();
        assert_eq!(tr.termination, Termination::EndTime);
        assert_eq!(tr.samples.last().unwrap().t, 0.3);
        let want = (1f64.cosh() * (-0.15f64).exp()).acosh();
        let got = tr.final_surface.radii()[0];
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }

    #[test]
    fn hyperbolic_sphere_mass_rate_matches_closed_form() {
        let s = RadialSurface::sphere(ModelSpace::new(-1.0).unwrap(), 1.0, grid(16, 32)).unwrap();
        let cfg = FlowConfig { end_time: Some(1e-3), ..FlowConfig::default() };
        let tr = run(&s, &cfg).unwrap();
        let c = 1.0 / 1f64.tanh();
        let area = 4.0 * PI * 1f64.sinh().powi(2);
        let want = -(c * c + 1.0) * c * area;
        assert!((tr.samples[0].m_rate - want).abs() < 1e-9 * want.abs());
        assert!((want + 62.0768).abs() < 1e-3);
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let s = RadialSurface::sphere(ModelSpace::euclidean(), 1.0, grid(16, 32)).unwrap();
        let cfg = FlowConfig { end_time: Some(0.01), ..FlowConfig::default() };
        let tr = run(&s, &cfg).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&tr, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,area,M,Gtot,phi,kappa_min,F_max,dt");
        let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
        assert_eq!(rows.len(), tr.samples.len());
        assert_eq!(rows[1][1].to_bits(), tr.samples[1].integrals.area.to_bits());
    }

    #[test]
    fn bad_configs_are_rejected() {
        let s = RadialSurface::sphere(ModelSpace::euclidean(), 1.0, grid(16, 32)).unwrap();
        for cfg in [
            FlowConfig { dt_init: 0.0, ..FlowConfig::default() },
            FlowConfig { area_stop: -1.0, ..FlowConfig::default() },
            FlowConfig { max_steps: 0, ..FlowConfig::default() },
        ] {
            assert!(matches!(run(&s, &cfg), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn three_point_rule_is_exact_on_parabolas() {
        let f = |t: f64| 3.0 - 2.0 * t + 0.7 * t * t;
        let (t0, t1, t2) = (0.1, 0.25, 0.7);
        let d = three_point(t0, t1, t2, f(t0), f(t1), f(t2));
        assert!((d - (-2.0 + 1.4 * t1)).abs() < 1e-13);
    }
}
