//! Subcommand pipelines. Each returns the audit reports it produced.

use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use hmcf::audit::{
    bonnesen_audit, hconvex_audit, minkowski_audit, ns_scan, parallel_monotone_audit, santalo_audit, save_reports,
    write_ns_rows_csv, AuditReport, NsTolerances, SantaloInput,
};
use hmcf::flow::{flow_identities_audit, run, save_trace_csv, FlowConfig};
use hmcf::parallel::{
    coarea_volume_audit, d_convexity_check, estimate_inradius, steiner_audit, surface_integrals, ParallelFamily,
};
use hmcf::suite::{run_suite, SuiteConfig, SuiteSummary};
use hmcf::surface::snapshot;
use hmcf::{fundamental_forms, gauss_bonnet_residual, integrals, Convexity, Grid, ModelSpace, RadialSurface};

use crate::params::{parse_grid, parse_list, resolve, usage, SurfaceSource};

fn write_reports(reports: &[AuditReport], json: Option<&PathBuf>, csv: Option<&PathBuf>) -> Result<()> {
    match (json, csv) {
        (Some(j), c) => save_reports(reports, j, c.map(|p| p.as_path()))?,
        (None, Some(_)) => return Err(usage("csv output needs a report path")),
        (None, None) => {}
    }
    Ok(())
}

pub fn print_reports(reports: &[AuditReport]) {
    for r in reports {
        let verdict = match (r.pass, r.expected_to_fail) {
            (true, true) => "expected failure confirmed",
            (true, false) => "pass",
            (false, _) => "FAIL",
        };
        println!("{:<32} lhs {:>16.9e}  rhs {:>16.9e}  slack {:>16.9e}  {verdict}", r.name, r.lhs, r.rhs, r.slack);
    }
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowArgs {
    /// JSON file with any of these options (flags override it)
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Ambient curvature a <= 0
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Base sphere radius
    #[arg(long)]
    pub rho: Option<f64>,
    /// Perturbation modes `l,m,amplitude;...`
    #[arg(long, allow_hyphen_values = true)]
    pub modes: Option<String>,
    /// Grid `NTHETAxNPHI` (default 16x32)
    #[arg(long)]
    pub grid: Option<String>,
    /// Start from a surface snapshot instead
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub dt_init: Option<f64>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub area_stop: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda_phi: Option<f64>,
    #[arg(long)]
    pub end_time: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub fixed_step: Option<bool>,
    #[arg(long)]
    pub cfl: Option<f64>,
    /// Per-step tolerance of the phi monotonicity check, relative to max(1, |phi|)
    #[arg(long)]
    pub phi_tol: Option<f64>,
    /// Allowed relative residual of the evolution identities
    #[arg(long)]
    pub identity_tol: Option<f64>,
    /// Trace CSV path
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Snapshot of the final surface
    #[arg(long)]
    pub final_snapshot: Option<PathBuf>,
    /// Report JSON path
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Report CSV summary path
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn flow(args: FlowArgs) -> Result<Vec<AuditReport>> {
    let p = resolve(&args, args.config.as_deref())?;
    let s = SurfaceSource {
        a: p.a,
        rho: p.rho,
        modes: p.modes.as_deref(),
        grid: p.grid.as_deref(),
        input: p.input.as_ref(),
        default_grid: [16, 32],
    }
    .build()?;
    let d = FlowConfig::default();
    let cfg = FlowConfig {
        dt_init: p.dt_init.unwrap_or(d.dt_init),
        rel_tol: p.rel_tol.unwrap_or(d.rel_tol),
        area_stop: p.area_stop.unwrap_or(d.area_stop),
        max_steps: p.max_steps.unwrap_or(d.max_steps),
        lambda_phi: p.lambda_phi.unwrap_or(d.lambda_phi),
        end_time: p.end_time.or(d.end_time),
        fixed_step: p.fixed_step.unwrap_or(d.fixed_step),
        cfl: p.cfl.unwrap_or(d.cfl),
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let tr = run(&s, &cfg)?;
    if let Some(out) = &p.out {
        save_trace_csv(&tr, out).with_context(|| format!("writing {}", out.display()))?;
    }
    if let Some(path) = &p.final_snapshot {
        snapshot::save(&tr.final_surface, path)?;
    }

    let phi_tol = p.phi_tol.unwrap_or(1e-6);
    let (mut events, mut worst) = (0usize, f64::NEG_INFINITY);
    for w in tr.samples.windows(2) {
        let scale = w[0].phi.abs().max(1.0);
        worst = worst.max((w[1].phi - w[0].phi) / scale);
        events += (w[1].phi - w[0].phi > phi_tol * scale) as usize;
    }
    let violations = tr.samples.iter().filter(|smp| !minkowski_audit(&smp.integrals, tr.a).pass).count();
    let last = tr.samples.last().expect("flow traces are never empty");
    let mut reports = vec![
        AuditReport::new("phi_increase_events", 0.0, events as f64, 0.0).with_meta("max_relative_rise", worst),
        AuditReport::new("minkowski_sample_violations", 0.0, violations as f64, 0.0),
    ];
    if tr.samples.len() >= 3 {
        let id = flow_identities_audit(&tr)?;
        let tol = p.identity_tol.unwrap_or(1e-2);
        reports.push(AuditReport::within("area_identity", id.area_rel, tol));
        reports.push(AuditReport::within("M_identity", id.m_rel, tol));
    }
    println!(
        "samples {}  termination {:?}  t {}  area {:.9e}  M {:.9e}  phi {:.9e}",
        tr.samples.len(),
        tr.termination,
        last.t,
        last.integrals.area,
        last.integrals.m,
        last.phi
    );
    write_reports(&reports, p.report.as_ref(), p.csv.as_ref())?;
    Ok(reports)
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditSphereArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Grid `NTHETAxNPHI` (default 64x128)
    #[arg(long)]
    pub grid: Option<String>,
    /// Allowed Gauss-Bonnet residual relative to Gtot
    #[arg(long)]
    pub gauss_bonnet_tol: Option<f64>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn audit_sphere(args: AuditSphereArgs) -> Result<Vec<AuditReport>> {
    let p = resolve(&args, args.config.as_deref())?;
    let a = p.a.unwrap_or(0.0);
    let rho = p.rho.unwrap_or(1.0);
    let [nt, np] = parse_grid(p.grid.as_deref().unwrap_or("64x128"))?;
    let s = RadialSurface::sphere(ModelSpace::new(a)?, rho, Arc::new(Grid::legendre(nt, np)?))?;
    let f = fundamental_forms(&s, Convexity::Strict)?;
    let i = integrals(&f, &s);
    let gb = gauss_bonnet_residual(&i, a);
    println!("area {:.9e}  M {:.9e}  Gtot {:.9e}  volume {:.9e}", i.area, i.m, i.gtot, i.volume);
    let mut reports = vec![
        AuditReport::within("gauss_bonnet", gb / i.gtot, p.gauss_bonnet_tol.unwrap_or(1e-6)),
        minkowski_audit(&i, a),
        santalo_audit(&SantaloInput::Surface { integrals: i, a }),
    ];
    if a < 0.0 {
        reports.extend(hconvex_audit(&i, &f, a)?);
    }
    reports.push(bonnesen_audit(i.volume, i.area, estimate_inradius(&s))?);
    println!("minkowski slack {:.9e}", reports[1].slack);
    println!("gauss-bonnet residual {gb:.3e}");
    write_reports(&reports, p.report.as_ref(), p.csv.as_ref())?;
    Ok(reports)
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NsScanArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Disc radii (default 1,3,8)
    #[arg(long)]
    pub r: Option<String>,
    /// Neighbourhood widths, at least two (default 0.1,0.05,0.025)
    #[arg(long)]
    pub eps: Option<String>,
    /// Grid `NTHETAxNPHI` (default 2048x32)
    #[arg(long)]
    pub grid: Option<String>,
    /// Relative tolerance on the area limit
    #[arg(long)]
    pub area_tol: Option<f64>,
    /// Relative tolerance on the M limit
    #[arg(long)]
    pub m_tol: Option<f64>,
    /// CSV of the per-(r, eps) integrals
    #[arg(long)]
    pub rows: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn ns_scan_cmd(args: NsScanArgs) -> Result<Vec<AuditReport>> {
    let p = resolve(&args, args.config.as_deref())?;
    let rs = parse_list(p.r.as_deref().unwrap_or("1,3,8"))?;
    let epss = parse_list(p.eps.as_deref().unwrap_or("0.1,0.05,0.025"))?;
    if epss.len() < 2 {
        return Err(usage("extrapolation needs at least two eps values"));
    }
    let [nt, np] = parse_grid(p.grid.as_deref().unwrap_or("2048x32"))?;
    let d = NsTolerances::default();
    let tol = NsTolerances { area_rel: p.area_tol.unwrap_or(d.area_rel), m_rel: p.m_tol.unwrap_or(d.m_rel) };
    let scan = ns_scan(&rs, &epss, nt, np, tol)?;
    println!(
        "{:>6} {:>14} {:>14} {:>10} {:>14} {:>14} {:>10} {:>10}",
        "r", "area", "area_limit", "rel_err", "M", "M_limit", "rel_err", "lambda"
    );
    for l in &scan.limits {
        println!(
            "{:>6} {:>14.8} {:>14.8} {:>10.2e} {:>14.8} {:>14.8} {:>10.2e} {:>10.6}",
            l.r, l.area, l.area_limit, l.area_rel_err, l.m, l.m_limit, l.m_rel_err, l.lambda_threshold
        );
    }
    if let Some(path) = &p.rows {
        write_ns_rows_csv(&scan.rows, std::fs::File::create(path)?)?;
    }
    write_reports(&scan.reports, p.report.as_ref(), p.csv.as_ref())?;
    Ok(scan.reports)
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SteinerArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub modes: Option<String>,
    /// Grid `NTHETAxNPHI` (default 32x64)
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Outer offsets (default 0.1,0.5,1)
    #[arg(long)]
    pub t: Option<String>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn steiner(args: SteinerArgs) -> Result<Vec<AuditReport>> {
    let p = resolve(&args, args.config.as_deref())?;
    let s = SurfaceSource {
        a: p.a,
        rho: p.rho,
        modes: p.modes.as_deref(),
        grid: p.grid.as_deref(),
        input: p.input.as_ref(),
        default_grid: [32, 64],
    }
    .build()?;
    let ts = parse_list(p.t.as_deref().unwrap_or("0.1,0.5,1"))?;
    let reports = steiner_audit(&s, &ts)?;
    write_reports(&reports, p.report.as_ref(), p.csv.as_ref())?;
    Ok(reports)
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BonnesenArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub modes: Option<String>,
    /// Grid `NTHETAxNPHI` (default 64x128)
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Gauss panels of the coarea integral
    #[arg(long)]
    pub layers: Option<usize>,
    /// Allowed coarea residual relative to the volume
    #[arg(long)]
    pub coarea_tol: Option<f64>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn bonnesen(args: BonnesenArgs) -> Result<Vec<AuditReport>> {
    let p = resolve(&args, args.config.as_deref())?;
    let s = SurfaceSource {
        a: p.a,
        rho: p.rho,
        modes: p.modes.as_deref(),
        grid: p.grid.as_deref(),
        input: p.input.as_ref(),
        default_grid: [64, 128],
    }
    .build()?;
    let i = surface_integrals(&s)?;
    let c = coarea_volume_audit(&s, p.layers.unwrap_or(8))?;
    println!("volume {:.9e}  area {:.9e}  inradius {:.9e}  layered volume {:.9e}", i.volume, i.area, c.inradius, c.layered);
    let reports = vec![
        bonnesen_audit(i.volume, i.area, c.inradius)?,
        AuditReport::within("coarea_residual", c.residual / c.volume, p.coarea_tol.unwrap_or(1e-4)),
    ];
    write_reports(&reports, p.report.as_ref(), p.csv.as_ref())?;
    Ok(reports)
}

#[derive(Debug, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParallelArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub modes: Option<String>,
    /// Grid `NTHETAxNPHI` (default 32x64)
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Signed offsets, negative for inner parallels (default 0.25,0.5,1)
    #[arg(long, allow_hyphen_values = true)]
    pub offsets: Option<String>,
    /// Directory receiving member snapshots and index.csv
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn parallel(args: ParallelArgs) -> Result<Vec<AuditReport>> {
    let p = resolve(&args, args.config.as_deref())?;
    let s = SurfaceSource {
        a: p.a,
        rho: p.rho,
        modes: p.modes.as_deref(),
        grid: p.grid.as_deref(),
        input: p.input.as_ref(),
        default_grid: [32, 64],
    }
    .build()?;
    let offsets = parse_list(p.offsets.as_deref().unwrap_or("0.25,0.5,1"))?;
    let family = ParallelFamily::build(&s, &offsets)?;
    println!("{:>8} {:>16} {:>16} {:>16} {:>16}", "t", "area", "M", "Gtot", "volume");
    for (t, i) in offsets.iter().zip(family.integrals()?) {
        println!("{t:>8} {:>16.9e} {:>16.9e} {:>16.9e} {:>16.9e}", i.area, i.m, i.gtot, i.volume);
    }
    if let Some(dir) = &p.out {
        family.export(dir)?;
    }
    let mut outer: Vec<f64> = offsets.iter().copied().filter(|t| *t > 0.0).collect();
    let mut inner: Vec<f64> = offsets.iter().copied().filter(|t| *t < 0.0).collect();
    outer.sort_by(f64::total_cmp);
    outer.dedup();
    inner.sort_by(f64::total_cmp);
    let mut reports = Vec::new();
    if !outer.is_empty() {
        reports.extend(parallel_monotone_audit(&s, &outer)?);
    }
    if !inner.is_empty() {
        let d = d_convexity_check(&s, &inner)?;
        for line in &d.diagnostics {
            eprintln!("{line}");
        }
        reports.push(AuditReport::new("d_convex", d.d_convex as u8 as f64, 1.0, 0.0));
    }
    write_reports(&reports, p.report.as_ref(), p.csv.as_ref())?;
    Ok(reports)
}

#[derive(Debug, Args)]
pub struct SuiteArgs {
    /// Suite configuration JSON (`{}` runs the defaults)
    #[arg(long)]
    pub config: PathBuf,
    /// Summary JSON path, overriding the config's `summary`
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn suite(args: SuiteArgs) -> Result<SuiteSummary> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| usage(format!("cannot read config {}: {e}", args.config.display())))?;
    let cfg = SuiteConfig::from_json(&text).map_err(|e| usage(format!("config {}: {e}", args.config.display())))?;
    let summary = run_suite(&cfg)?;
    for line in summary.lines() {
        println!("{line}");
    }
    if let Some(path) = args.out.or(cfg.summary.map(PathBuf::from)) {
        let f = std::io::BufWriter::new(std::fs::File::create(&path)?);
        serde_json::to_writer_pretty(f, &summary)?;
    }
    Ok(summary)
}

