//! Plain-text surface snapshots.
//!
//! ```text
//! # hmcf surface snapshot
//! a = -1
//! center = 1 0 0 0
//! frame1 = 0 1 0 0
//! frame2 = 0 0 1 0
//! frame3 = 0 0 0 1
//! n_theta = 16
//! n_phi = 32
//! theta_stretch = 0
//! theta_foci = <center width ...>   (optional, with theta_focus_share)
//! theta_focus_share = <share>
//! theta_seams = <colatitudes ...>   (optional)
//! radii
//! <n_phi values>        (one line per colatitude row)
//! ```
//!
//! Floats are written in shortest round-trip form, so reading a snapshot back
//! reproduces every bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use super::{Grid, RadialSurface, ThetaGrid};
use crate::ambient::{ModelSpace, Point, Vec4};
use crate::error::{Error, Result};

const MAGIC: &str = "# hmcf surface snapshot";

fn join(v: &[f64]) -> String {
    let mut s = String::new();
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{x}").unwrap();
    }
    s
}

pub fn to_string(s: &RadialSurface) -> String {
    let mut out = String::new();
    let grid = s.grid();
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(out, "a = {}", s.space().curvature()).unwrap();
    writeln!(out, "center = {}", join(s.center().coords())).unwrap();
    for (k, e) in s.frame().iter().enumerate() {
        writeln!(out, "frame{} = {}", k + 1, join(e)).unwrap();
    }
    writeln!(out, "n_theta = {}", grid.n_theta()).unwrap();
    writeln!(out, "n_phi = {}", grid.n_phi()).unwrap();
    writeln!(out, "theta_stretch = {}", grid.theta().stretch()).unwrap();
    let foci = grid.theta().foci();
    if !foci.is_empty() {
        let flat: Vec<f64> = foci.iter().flat_map(|&(c, w)| [c, w]).collect();
        writeln!(out, "theta_foci = {}", join(&flat)).unwrap();
        writeln!(out, "theta_focus_share = {}", grid.theta().focus_share()).unwrap();
    }
    if !grid.theta().seams().is_empty() {
        writeln!(out, "theta_seams = {}", join(grid.theta().seams())).unwrap();
    }
    writeln!(out, "radii").unwrap();
    for row in s.radii().chunks(grid.n_phi()) {
        writeln!(out, "{}", join(row)).unwrap();
    }
    out
}

pub fn write(s: &RadialSurface, mut w: impl Write) -> Result<()> {
    w.write_all(to_string(s).as_bytes())?;
    Ok(())
}

pub fn save(s: &RadialSurface, path: impl AsRef<Path>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write(s, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<RadialSurface> {
    read(std::fs::File::open(path)?)
}

fn parse_floats(line: &str, what: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| Error::Snapshot(format!("{what}: bad number {t:?}: {e}"))))
        .collect()
}

fn vec4(v: Vec<f64>, what: &str) -> Result<Vec4> {
    v.try_into().map_err(|v: Vec<f64>| Error::Snapshot(format!("{what}: expected 4 components, got {}", v.len())))
}

pub fn read(r: impl Read) -> Result<RadialSurface> {
    let mut lines = BufReader::new(r).lines();
    let first = lines.next().transpose()?.unwrap_or_default();
    if first.trim() != MAGIC {
        return Err(Error::Snapshot("missing header line".into()));
    }
    let mut header = BTreeMap::new();
    loop {
        let line = lines.next().transpose()?.ok_or_else(|| Error::Snapshot("missing radii section".into()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "radii" {
            break;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Snapshot(format!("expected key = value, got {line:?}")))?;
        if header.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(Error::Snapshot(format!("duplicate key {:?}", k.trim())));
        }
    }
    let mut take = |k: &str| header.remove(k).ok_or_else(|| Error::Snapshot(format!("missing key {k:?}")));
    let a: f64 = take("a")?.parse().map_err(|e| Error::Snapshot(format!("a: {e}")))?;
    let center = vec4(parse_floats(&take("center")?, "center")?, "center")?;
    let mut frame = [[0.0; 4]; 3];
    for (k, e) in frame.iter_mut().enumerate() {
        let key = format!("frame{}", k + 1);
        *e = vec4(parse_floats(&take(&key)?, &key)?, &key)?;
    }
    let n_theta: usize = take("n_theta")?.parse().map_err(|e| Error::Snapshot(format!("n_theta: {e}")))?;
    let n_phi: usize = take("n_phi")?.parse().map_err(|e| Error::Snapshot(format!("n_phi: {e}")))?;
    let stretch: f64 = take("theta_stretch")?.parse().map_err(|e| Error::Snapshot(format!("theta_stretch: {e}")))?;
    let foci = match header.remove("theta_foci") {
        Some(v) => {
            let flat = parse_floats(&v, "theta_foci")?;
            if flat.is_empty() || flat.len() % 2 != 0 {
                return Err(Error::Snapshot("theta_foci needs center width pairs".into()));
            }
            flat.chunks(2).map(|p| (p[0], p[1])).collect()
        }
        None => Vec::new(),
    };
    let share: Option<f64> = header
        .remove("theta_focus_share")
        .map(|v| v.parse().map_err(|e| Error::Snapshot(format!("theta_focus_share: {e}"))))
        .transpose()?;
    let seams = header.remove("theta_seams").map(|v| parse_floats(&v, "theta_seams")).transpose()?.unwrap_or_default();
    if let Some(k) = header.keys().next() {
        return Err(Error::Snapshot(format!("unknown key {k:?}")));
    }

    let mut radii = Vec::with_capacity(n_theta * n_phi);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_floats(&line, "radii")?;
        if row.len() != n_phi {
            return Err(Error::Snapshot(format!("radii row has {} values, expected {n_phi}", row.len())));
        }
        radii.extend(row);
    }
    if radii.len() != n_theta * n_phi {
        return Err(Error::Snapshot(format!("expected {n_theta} radii rows, got {}", radii.len() / n_phi.max(1))));
    }

    let space = ModelSpace::new(a)?;
    let center: Point = space.point(center)?;
    let theta = match (foci.is_empty(), share) {
        (true, None) => ThetaGrid::clustered(n_theta, stretch),
        (false, Some(share)) if stretch == 0.0 => ThetaGrid::focused(n_theta, &foci, share),
        _ => return Err(Error::Snapshot("theta_foci and theta_focus_share go together, with theta_stretch = 0".into())),
    };
    let grid = Grid::new(theta.with_seams(&seams), n_phi)?;
    RadialSurface::new(space, center, frame, Arc::new(grid), radii)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{perturbed_sphere, Mode};
    use proptest::prelude::*;

    #[test]
    fn file_round_trip() {
        let space = ModelSpace::new(-1.0).unwrap();
        let grid = Arc::new(Grid::legendre(16, 32).unwrap());
        let s = perturbed_sphere(space, space.origin(), 1.0, &[Mode::new(2, 1, 0.03)], grid).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.txt");
        save(&s, &path).unwrap();
        let t = load(&path).unwrap();
        assert_eq!(to_string(&s), to_string(&t));
        assert!(s.radii().iter().zip(t.radii()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn malformed_input_is_rejected() {
        assert!(matches!(read("nope".as_bytes()), Err(Error::Snapshot(_))));
        let space = ModelSpace::euclidean();
        let s = RadialSurface::sphere(space, 1.0, Arc::new(Grid::legendre(16, 32).unwrap())).unwrap();
        let text = to_string(&s);
        let extra = text.replace("n_phi", "bogus = 1\nn_phi");
        assert!(matches!(read(extra.as_bytes()), Err(Error::Snapshot(_))));
        let short: String = text.lines().take(12).collect::<Vec<_>>().join("\n");
        assert!(matches!(read(short.as_bytes()), Err(Error::Snapshot(_))));
    }

    #[test]
    fn focused_grid_round_trip() {
        let space = ModelSpace::new(-1.0).unwrap();
        let theta = ThetaGrid::focused(24, &[(-0.1, 1e-3), (0.1, 1e-3)], 0.6).with_seams(&[1.47, 1.67]);
        let s = RadialSurface::sphere(space, 0.7, Arc::new(Grid::new(theta, 32).unwrap())).unwrap();
        let t = read(to_string(&s).as_bytes()).unwrap();
        assert_eq!(to_string(&s), to_string(&t));
        assert_eq!(s.grid().theta().nodes(), t.grid().theta().nodes());
        assert_eq!(t.grid().theta().seams(), &[1.47, 1.67]);
        let half = to_string(&s).replace("theta_focus_share = 0.6\n", "");
        assert!(matches!(read(half.as_bytes()), Err(Error::Snapshot(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn radii_survive_bit_exactly(
            a in prop_oneof![Just(0.0), -3.0f64..-1e-3],
            seed in proptest::collection::vec(1e-3f64..10.0, 16 * 32),
            stretch in prop_oneof![Just(0.0), 0.1f64..4.0],
        ) {
            let space = ModelSpace::new(a).unwrap();
            let grid = Arc::new(Grid::new(ThetaGrid::clustered(16, stretch), 32).unwrap());
            let c = space.origin();
            let s = RadialSurface::new(space, c, space.frame_at(&c), grid, seed).unwrap();
            let t = read(to_string(&s).as_bytes()).unwrap();
            prop_assert_eq!(to_string(&s), to_string(&t));
            for (x, y) in s.radii().iter().zip(t.radii()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
            prop_assert_eq!(s.grid().theta().nodes(), t.grid().theta().nodes());
        }
    }
}
