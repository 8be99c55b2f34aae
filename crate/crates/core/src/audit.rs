//! Inequality audits with slack reporting.
//!
//! Every check is phrased as `lhs >= rhs`; a report passes when
//! `slack = lhs - rhs >= -tolerance`, or, for audits that are meant to expose a
//! counterexample, when the inequality fails by more than the tolerance.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambient::{DiscBody, ModelSpace};
use crate::closedform::{bonnesen_rhs, ns_limits, NsLimits};
use crate::error::{Error, Result};
use crate::parallel::{limit_at_zero, ns_surface, parallel_surface, surface_integrals};
use crate::surface::{gauss_bonnet_residual, CurvatureField, RadialSurface, SurfaceIntegrals};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
    pub tolerance: f64,
    pub expected_to_fail: bool,
    pub metadata: BTreeMap<String, String>,
}

impl AuditReport {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let mut r = Self {
            name: name.into(),
            lhs,
            rhs,
            slack: lhs - rhs,
            pass: false,
            tolerance,
            expected_to_fail: false,
            metadata: BTreeMap::new(),
        };
        r.pass = r.verdict();
        r
    }

    /// Two-sided check `|error| <= allowed`, reported as `allowed >= |error|`.
    pub fn within(name: impl Into<String>, error: f64, allowed: f64) -> Self {
        Self::new(name, allowed, error.abs(), 0.0)
    }

    /// The pass flag implied by the numeric fields.
    pub fn verdict(&self) -> bool {
        let holds = self.slack >= -self.tolerance;
        if self.expected_to_fail {
            self.slack < -self.tolerance
        } else {
            holds
        }
    }

    pub fn expect_failure(mut self, expected: bool) -> Self {
        self.expected_to_fail = expected;
        self.pass = self.verdict();
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self.pass = self.verdict();
        self
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }
}

/// `max(1e-9 |rhs|, relative Gauss-Bonnet residual * |rhs|)`.
pub fn default_tolerance(rhs: f64, i: &SurfaceIntegrals, a: f64) -> f64 {
    let gb = gauss_bonnet_residual(i, a) / i.gtot.abs().max(f64::MIN_POSITIVE);
    (1e-9 * rhs.abs()).max(gb * rhs.abs())
}

fn surface_meta(r: AuditReport, i: &SurfaceIntegrals, a: f64) -> AuditReport {
    r.with_meta("a", a)
        .with_meta("area", i.area)
        .with_meta("M", i.m)
        .with_meta("Gtot", i.gtot)
        .with_meta("gauss_bonnet_residual", gauss_bonnet_residual(i, a))
}

/// `M^2 >= 16 pi |Gamma| - 2 a |Gamma|^2`.
pub fn minkowski_audit(i: &SurfaceIntegrals, a: f64) -> AuditReport {
    let lhs = i.m * i.m;
    let rhs = 16.0 * PI * i.area - 2.0 * a * i.area * i.area;
    surface_meta(AuditReport::new("minkowski", lhs, rhs, default_tolerance(rhs, i, a)), i, a)
}

/// Input of the Santalo-form audit.
#[derive(Debug, Clone, Copy)]
pub enum SantaloInput {
    Surface { integrals: SurfaceIntegrals, a: f64 },
    /// Limit of the disc neighbourhoods at curvature `-1`.
    Ns(NsLimits),
}

/// `M^2 >= 16 pi |Gamma| - 4 a |Gamma|^2`, expected to fail on the disc
/// family once its threshold drops below 4.
pub fn santalo_audit(input: &SantaloInput) -> AuditReport {
    match input {
        SantaloInput::Surface { integrals: i, a } => {
            let lhs = i.m * i.m;
            let rhs = 16.0 * PI * i.area - 4.0 * a * i.area * i.area;
            surface_meta(AuditReport::new("santalo", lhs, rhs, default_tolerance(rhs, i, *a)), i, *a)
        }
        SantaloInput::Ns(l) => {
            let lhs = l.m_limit * l.m_limit;
            let rhs = 16.0 * PI * l.area_limit + 4.0 * l.area_limit * l.area_limit;
            AuditReport::new("santalo_ns", lhs, rhs, 1e-9 * rhs.abs())
                .expect_failure(l.lambda_threshold < 4.0)
                .with_meta("a", -1.0)
                .with_meta("r", l.r)
                .with_meta("lambda_threshold", l.lambda_threshold)
        }
    }
}

/// Santalo audit on the limit of the disc family of radius `r`.
pub fn santalo_audit_ns(r: f64) -> Result<AuditReport> {
    Ok(santalo_audit(&SantaloInput::Ns(ns_limits(r)?)))
}

/// The h-convex strengthening `M^2 >= 16 pi |Gamma| - 7/2 a |Gamma|^2` and the
/// sub-check `(int H)(int 1/H) <= |Gamma| G(Gamma)` at curvature `-1`.
pub fn hconvex_audit(i: &SurfaceIntegrals, f: &CurvatureField, a: f64) -> Result<Vec<AuditReport>> {
    if !(a < 0.0) {
        return Err(Error::Domain(format!("h-convexity needs a < 0, got {a}")));
    }
    let k = (-a).sqrt();
    let min_kappa = f.min_kappa1();
    if min_kappa < k * (1.0 - 1e-9) {
        return Err(Error::NotHConvex { min_kappa, bound: k });
    }
    let lhs = i.m * i.m;
    let rhs = 16.0 * PI * i.area - 3.5 * a * i.area * i.area;
    let main = AuditReport::new("hconvex", lhs, rhs, default_tolerance(rhs, i, a));
    let int_h = f.integrate(|n| n.h);
    let int_inv_h = f.integrate(|n| 1.0 / n.h);
    // lengths scale by k when the curvature is normalized to -1
    let sub_lhs = k * k * i.area * i.gtot;
    let sub_rhs = k.powi(4) * int_h * int_inv_h;
    let sub = AuditReport::new("hconvex_mean_harmonic", sub_lhs, sub_rhs, default_tolerance(sub_rhs, i, a));
    Ok(vec![
        surface_meta(main, i, a).with_meta("min_kappa_scaled", min_kappa / k),
        surface_meta(sub, i, a).with_meta("min_kappa_scaled", min_kappa / k),
    ])
}

/// `|Omega| <= (4 pi / 3) (R^3 - (R - inrad)^3)` with `4 pi R^2 = |Gamma|`.
pub fn bonnesen_audit(volume: f64, area: f64, inrad: f64) -> Result<AuditReport> {
    let lhs = bonnesen_rhs(area, inrad)?;
    Ok(AuditReport::new("bonnesen", lhs, volume, 1e-9 * volume.abs())
        .with_meta("area", area)
        .with_meta("inradius", inrad))
}

/// `M(inner) <= M(outer)` and `|inner| <= |outer|`.
pub fn nesting_audit(inner: &SurfaceIntegrals, outer: &SurfaceIntegrals) -> Vec<AuditReport> {
    let tol = |x: f64, y: f64| 1e-9 * x.abs().max(y.abs());
    vec![
        AuditReport::new("nesting_M", outer.m, inner.m, tol(outer.m, inner.m)),
        AuditReport::new("nesting_area", outer.area, inner.area, tol(outer.area, inner.area)),
    ]
}

/// Monotonicity of `M` and area along outer parallels at `ts` (with `t = 0`
/// prepended), and the integrated identity
/// `M(t1) - M(t0) = int_t0^t1 (2 G(t) - 2 a |Gamma_t|) dt`, evaluated with
/// three-point Gauss-Legendre per interval.
pub fn parallel_monotone_audit(s: &RadialSurface, ts: &[f64]) -> Result<Vec<AuditReport>> {
    if ts.is_empty() || ts[0] <= 0.0 || ts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("offsets must be positive and strictly increasing".into()));
    }
    let a = s.space().curvature();
    let mut knots = vec![0.0];
    knots.extend_from_slice(ts);
    let g = 0.5 * 0.6f64.sqrt();
    let mut offsets: Vec<f64> = ts.to_vec();
    for w in knots.windows(2) {
        let (mid, len) = (0.5 * (w[0] + w[1]), w[1] - w[0]);
        offsets.extend([mid - g * len, mid, mid + g * len]);
    }
    let base = surface_integrals(s)?;
    let all = offsets.par_iter().map(|&t| surface_integrals(&parallel_surface(s, t)?)).collect::<Result<Vec<_>>>()?;
    let (at_knots, at_gauss) = all.split_at(ts.len());
    let mut ints = vec![base];
    ints.extend_from_slice(at_knots);
    let gb = |i: &SurfaceIntegrals| gauss_bonnet_residual(i, a) / i.gtot.abs();

    let mut out = Vec::new();
    for k in 0..ts.len() {
        let (lo, hi) = (&ints[k], &ints[k + 1]);
        let (t0, t1) = (knots[k], knots[k + 1]);
        let rel = gb(lo) + gb(hi);
        let tol = |x: f64| (1e-9 * x.abs()).max(rel * x.abs());
        out.push(AuditReport::new("parallel_monotone_M", hi.m, lo.m, tol(lo.m)).with_meta("t0", t0).with_meta("t1", t1));
        out.push(AuditReport::new("parallel_monotone_area", hi.area, lo.area, tol(lo.area)).with_meta("t0", t0).with_meta("t1", t1));
        let layer: f64 = at_gauss[3 * k..3 * k + 3]
            .iter()
            .zip([5.0, 8.0, 5.0])
            .map(|(i, w)| w * (2.0 * i.gtot - 2.0 * a * i.area))
            .sum::<f64>()
            * (t1 - t0)
            / 18.0;
        let change = hi.m - lo.m;
        let allowed = (1e-4 * change.abs()).max(rel * hi.m.abs().max(lo.m.abs()));
        out.push(
            AuditReport::within("parallel_monotone_integral", change - layer, allowed)
                .with_meta("t0", t0)
                .with_meta("t1", t1)
                .with_meta("change", change)
                .with_meta("layer_integral", layer),
        );
    }
    Ok(out)
}

/// Integrals of one disc neighbourhood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NsRow {
    pub r: f64,
    pub eps: f64,
    pub area: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "Gtot")]
    pub gtot: f64,
    pub volume: f64,
}

/// Extrapolation of the rows of one disc radius to `eps -> 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NsExtrapolation {
    pub r: f64,
    pub area: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "Gtot")]
    pub gtot: f64,
    pub area_limit: f64,
    #[serde(rename = "M_limit")]
    pub m_limit: f64,
    pub area_rel_err: f64,
    #[serde(rename = "M_rel_err")]
    pub m_rel_err: f64,
    /// `(M^2 - 16 pi |Gamma|) / |Gamma|^2` from the extrapolated values.
    pub implied_lambda: f64,
    pub lambda_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsScan {
    pub rows: Vec<NsRow>,
    pub limits: Vec<NsExtrapolation>,
    pub reports: Vec<AuditReport>,
}

/// Relative tolerances of the disc-family comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NsTolerances {
    pub area_rel: f64,
    #[serde(rename = "M_rel")]
    pub m_rel: f64,
}

impl Default for NsTolerances {
    fn default() -> Self {
        Self { area_rel: 0.01, m_rel: 0.02 }
    }
}

/// Build the `eps`-neighbourhoods of discs of radius `r` at curvature `-1`,
/// extrapolate their integrals polynomially to `eps = 0` and compare with
/// the closed-form limits.
pub fn ns_scan(rs: &[f64], epss: &[f64], n_theta: usize, n_phi: usize, tol: NsTolerances) -> Result<NsScan> {
    if rs.is_empty() || epss.is_empty() {
        return Err(Error::Domain("need at least one radius and one eps".into()));
    }
    if let Some(e) = epss.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::Domain(format!("eps must be positive, got {e}")));
    }
    let mut sorted = epss.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Domain("eps values must be distinct".into()));
    }
    let space = ModelSpace::new(-1.0)?;
    let discs = rs.iter().map(|&r| DiscBody::standard(space, r)).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, f64)> = (0..rs.len()).flat_map(|k| epss.iter().map(move |&e| (k, e))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(k, eps)| {
            let disc = &discs[k];
            let i = surface_integrals(&ns_surface(disc, eps, n_theta, n_phi)?)?;
            Ok(NsRow { r: rs[k], eps, area: i.area, m: i.m, gtot: i.gtot, volume: i.volume })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut limits = Vec::new();
    let mut reports = Vec::new();
    for (&r, mine) in rs.iter().zip(rows.chunks(epss.len())) {
        let xs: Vec<f64> = mine.iter().map(|row| row.eps).collect();
        let pick = |f: fn(&NsRow) -> f64| limit_at_zero(&xs, &mine.iter().map(|row| f(row)).collect::<Vec<_>>());
        let (area, m, gtot) = (pick(|row| row.area), pick(|row| row.m), pick(|row| row.gtot));
        let l = ns_limits(r)?;
        let ext = NsExtrapolation {
            r,
            area,
            m,
            gtot,
            area_limit: l.area_limit,
            m_limit: l.m_limit,
            area_rel_err: (area - l.area_limit) / l.area_limit,
            m_rel_err: (m - l.m_limit) / l.m_limit,
            implied_lambda: (m * m - 16.0 * PI * area) / (area * area),
            lambda_threshold: l.lambda_threshold,
        };
        limits.push(ext);
        reports.push(AuditReport::within("ns_area_limit", area - l.area_limit, tol.area_rel * l.area_limit).with_meta("r", r));
        reports.push(AuditReport::within("ns_M_limit", m - l.m_limit, tol.m_rel * l.m_limit).with_meta("r", r));
        let extrapolated = SurfaceIntegrals { area, m, gtot, volume: 0.0 };
        reports.push(minkowski_audit(&extrapolated, -1.0).with_meta("r", r).with_meta("source", "extrapolated"));
        reports.push(santalo_audit(&SantaloInput::Ns(l)));
    }
    Ok(NsScan { rows, limits, reports })
}

pub fn write_ns_rows_csv(rows: &[NsRow], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["r", "eps", "area", "M", "Gtot", "volume"])?;
    for row in rows {
        out.write_record([row.r, row.eps, row.area, row.m, row.gtot, row.volume].map(|x| x.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

/// The worst report: failing before passing, then smallest normalized slack.
pub fn worst(reports: &[AuditReport]) -> Option<&AuditReport> {
    reports.iter().min_by(|x, y| {
        let key = |r: &AuditReport| (r.pass, r.slack / r.rhs.abs().max(r.lhs.abs()).max(f64::MIN_POSITIVE));
        let (a, b) = (key(x), key(y));
        a.0.cmp(&b.0).then(a.1.total_cmp(&b.1))
    })
}

pub fn write_reports_json(reports: &[AuditReport], w: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(w, reports)?;
    Ok(())
}

pub fn write_reports_csv(reports: &[AuditReport], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["name", "lhs", "rhs", "slack", "pass"])?;
    for r in reports {
        out.write_record([r.name.clone(), r.lhs.to_string(), r.rhs.to_string(), r.slack.to_string(), r.pass.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_reports(reports: &[AuditReport], json: impl AsRef<Path>, csv_path: Option<&Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(json)?);
    write_reports_json(reports, &mut f)?;
    f.flush()?;
    if let Some(p) = csv_path {
        write_reports_csv(reports, std::fs::File::create(p)?)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedform::sphere_quantities;
    use crate::surface::{fundamental_forms, integrals, perturbed_sphere, Convexity, Grid, Mode};
    use proptest::prelude::*;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn sphere(a: f64, rho: f64) -> RadialSurface {
        RadialSurface::sphere(ModelSpace::new(a).unwrap(), rho, Arc::new(Grid::legendre(16, 32).unwrap())).unwrap()
    }

    #[test]
    fn minkowski_on_spheres() {
        let e = sphere_quantities(0.0, 1.3).unwrap();
        let r = minkowski_audit(&e, 0.0);
        assert!(r.pass && r.slack.abs() < 1e-12 * r.lhs);
        let h = sphere_quantities(-1.0, 1.0).unwrap();
        let r = minkowski_audit(&h, -1.0);
        assert!(r.pass);
        assert!((r.slack - 602.41894).abs() < 1e-4, "{}", r.slack);
        assert_eq!(r.metadata["a"], "-1");
    }

    #[test]
    fn minkowski_on_disc_limits() {
        let l = ns_limits(2.0).unwrap();
        let i = SurfaceIntegrals { area: l.area_limit, m: l.m_limit, gtot: 4.0 * PI + l.area_limit, volume: 0.0 };
        assert!(minkowski_audit(&i, -1.0).slack > 0.0);
    }

    #[test]
    fn santalo_spheres_and_disc_family() {
        for rho in [0.25, 1.0, 2.0] {
            let h = sphere_quantities(-1.0, rho).unwrap();
            let r = santalo_audit(&SantaloInput::Surface { integrals: h, a: -1.0 });
            assert!(r.pass && r.slack.abs() <= 1e-9 * r.rhs, "{r:?}");
        }
        for (radius, fails) in [(0.5, false), (1.0, false), (3.0, true), (4.0, true), (8.0, true)] {
            let r = santalo_audit_ns(radius).unwrap();
            assert_eq!(r.expected_to_fail, fails);
            assert_eq!(r.slack < 0.0, fails);
            assert!(r.pass);
        }
    }

    #[test]
    fn hconvex_on_spheres() {
        let s = sphere(-1.0, 1.0);
        let f = fundamental_forms(&s, Convexity::Strict).unwrap();
        let i = integrals(&f, &s);
        let reps = hconvex_audit(&i, &f, -1.0).unwrap();
        assert!(reps.iter().all(|r| r.pass));
        let want = 8.0 * PI * PI * 1f64.sinh().powi(4);
        assert!((reps[0].slack - want).abs() < 1e-9 * want);
        assert!((want - 150.60474).abs() < 1e-4);
        assert!((reps[1].rhs - 301.2095).abs() < 1e-3 && (reps[1].lhs - 519.3037).abs() < 1e-3);

        // rho = 0.5 at a = -4 has kappa = 2 coth 1 >= 2
        let s = sphere(-4.0, 0.5);
        let f = fundamental_forms(&s, Convexity::Strict).unwrap();
        assert!(hconvex_audit(&integrals(&f, &s), &f, -4.0).unwrap().iter().all(|r| r.pass));
        assert!(hconvex_audit(&integrals(&f, &s), &f, 0.0).is_err());
    }

    #[test]
    fn hconvex_rejects_flat_spots() {
        let space = ModelSpace::new(-1.0).unwrap();
        let grid = Arc::new(Grid::legendre(24, 48).unwrap());
        let s = perturbed_sphere(space, space.origin(), 3.0, &[Mode::new(4, 0, 0.3)], grid).unwrap();
        let f = fundamental_forms(&s, Convexity::Strict).unwrap();
        assert!(f.min_kappa1() < 1.0, "{}", f.min_kappa1());
        assert!(matches!(hconvex_audit(&integrals(&f, &s), &f, -1.0), Err(Error::NotHConvex { .. })));
    }

    #[test]
    fn bonnesen_examples() {
        let h = sphere_quantities(-1.0, 1.0).unwrap();
        let r = bonnesen_audit(h.volume, h.area, 1.0).unwrap();
        assert!(r.pass);
        assert!((r.lhs - 6.776164).abs() < 1e-6 && (r.rhs - 5.1109327).abs() < 1e-6);
        let e = sphere_quantities(0.0, 1.4).unwrap();
        let r = bonnesen_audit(e.volume, e.area, 1.4).unwrap();
        assert!(r.pass && r.slack.abs() < 1e-12 * r.rhs);
        assert!(matches!(bonnesen_audit(e.volume, e.area, 1.5), Err(Error::InradExceedsRadius { .. })));
    }

    #[test]
    fn nesting_examples() {
        let inner = sphere_quantities(-1.0, 0.8).unwrap();
        let outer = sphere_quantities(-1.0, 1.0).unwrap();
        let reps = nesting_audit(&inner, &outer);
        assert!(reps.iter().all(|r| r.pass && r.slack > 0.0));
        assert!(nesting_audit(&outer, &outer).iter().all(|r| r.pass && r.slack == 0.0));
        let bad = nesting_audit(&outer, &inner);
        assert!(bad.iter().all(|r| !r.pass));
        assert_eq!(worst(&[reps[0].clone(), bad[1].clone()]).unwrap().name, "nesting_area");
    }

    #[test]
    fn parallel_monotone_on_spheres() {
        for (a, rho) in [(-1.0, 1.0), (0.0, 1.0)] {
            let s = sphere(a, rho);
            let ts: Vec<f64> = (1..=10).map(|k| 0.1 * k as f64).collect();
            let reps = parallel_monotone_audit(&s, &ts).unwrap();
            assert_eq!(reps.len(), 30);
            assert!(reps.iter().all(|r| r.pass), "{:?}", reps.iter().find(|r| !r.pass));
            // closed form M(t) = 4 pi sn(2 (rho + t)) / ... checked on the last interval
            let space = ModelSpace::new(a).unwrap();
            let m = |t: f64| 8.0 * PI * space.sn(rho + t) * space.cs(rho + t);
            let last = &reps[29];
            let change: f64 = last.metadata["change"].parse().unwrap();
            assert!((change - (m(1.0) - m(0.9))).abs() < 1e-9 * m(1.0));
        }
        let s = sphere(-1.0, 1.0);
        assert!(parallel_monotone_audit(&s, &[0.2, 0.1]).is_err());
        assert!(parallel_monotone_audit(&s, &[]).is_err());
    }

    #[test]
    fn ns_scan_matches_limits() {
        let scan = ns_scan(&[1.0, 3.0], &[0.1, 0.05, 0.025], 1024, 32, NsTolerances::default()).unwrap();
        assert_eq!(scan.rows.len(), 6);
        for l in &scan.limits {
            assert!(l.area_rel_err.abs() < 0.01, "{l:?}");
            assert!(l.m_rel_err.abs() < 0.01, "{l:?}");
            assert!((l.implied_lambda - l.lambda_threshold).abs() < 0.02 * l.lambda_threshold, "{l:?}");
            // Gauss-Bonnet for a topological sphere at curvature -1
            assert!((l.gtot - 4.0 * PI - l.area_limit).abs() < 0.01 * l.area_limit, "{l:?}");
            println!("{l:?}");
        }
        assert!(scan.reports.iter().all(|r| r.pass), "{:?}", scan.reports);
        let sant: Vec<_> = scan.reports.iter().filter(|r| r.name == "santalo_ns").collect();
        assert!(!sant[0].expected_to_fail && sant[1].expected_to_fail);
        assert!(ns_scan(&[1.0], &[0.1, 0.1], 64, 32, NsTolerances::default()).is_err());
        assert!(ns_scan(&[1.0], &[-0.1], 64, 32, NsTolerances::default()).is_err());
    }

    #[test]
    fn report_exports() {
        let h = sphere_quantities(-1.0, 1.0).unwrap();
        let reps = vec![minkowski_audit(&h, -1.0), santalo_audit_ns(3.0).unwrap()];
        let mut json = Vec::new();
        write_reports_json(&reps, &mut json).unwrap();
        let back: Vec<AuditReport> = serde_json::from_slice(&json).unwrap();
        assert_eq!(back, reps);
        let mut csv = Vec::new();
        write_reports_csv(&reps, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().next().unwrap(), "name,lhs,rhs,slack,pass");
        assert_eq!(text.lines().count(), 3);
    }

    proptest! {
        #[test]
        fn pass_flag_is_a_function_of_the_numbers(lhs in -10.0f64..10.0, rhs in -10.0f64..10.0, tol in 0.0f64..1.0, fail in any::<bool>()) {
            let r = AuditReport::new("x", lhs, rhs, tol).expect_failure(fail);
            prop_assert_eq!(r.slack, lhs - rhs);
            let holds = lhs - rhs >= -tol;
            prop_assert_eq!(r.pass, if fail { !holds } else { holds });
            prop_assert_eq!(r.pass, r.verdict());
        }

        #[test]
        fn within_is_symmetric(err in -5.0f64..5.0, allowed in 0.0f64..5.0) {
            prop_assert_eq!(AuditReport::within("w", err, allowed).pass, err.abs() <= allowed);
            prop_assert_eq!(AuditReport::within("w", -err, allowed).pass, err.abs() <= allowed);
        }
    }
}
