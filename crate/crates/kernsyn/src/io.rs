//! File formats. Every reader has a `parse_*` variant over any `Read` and a
//! path wrapper that attaches the file name to errors; writers are symmetric.
//!
//! * demonstrations: CSV `demo,t,q1,...,qJ`, one row per sample
//! * configuration matrix: CSV of joint angles, one posture per row, optional header
//! * point cloud: ASCII `x y z` per line, `#` comments and blank lines ignored
//! * models and logs: JSON
//! * reference trajectory: CSV `t,mu1..muS,sigma_1_1..sigma_S_S` (row-major)
//! * prediction: CSV `t,mean1..meanS,var1..varS`
//! * force profile: CSV `t,force`

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use kernsyn_core::force::ForceProfile;
use kernsyn_core::perception::PointCloud;
use kernsyn_core::synergy::{JointConfiguration, SynergyPoint};
use kernsyn_core::trajectory::{Demonstration, ReferenceTrajectory};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, mut w: impl Write) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn number(field: &str, origin: &Path, line: usize) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::parse(origin, line, format!("`{field}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(origin, line, format!("non-finite value `{field}`")));
    }
    Ok(v)
}

fn csv_reader(r: impl Read) -> csv::Reader<impl Read> {
    csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).comment(Some(b'#')).from_reader(r)
}

fn record_line(rec: &csv::StringRecord) -> usize {
    rec.position().map_or(0, |p| p.line() as usize)
}

/// Parses `demo,t,q1..qJ`; demonstrations keep the order of first appearance.
pub fn parse_demos(r: impl Read, origin: &Path) -> Result<Vec<Demonstration>> {
    let mut reader = csv_reader(r);
    let mut ids: Vec<String> = Vec::new();
    let mut demos: Vec<Vec<(f64, JointConfiguration)>> = Vec::new();
    let mut joints = None;
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = record_line(&rec);
        if i == 0 && rec.get(0) == Some("demo") {
            continue;
        }
        if rec.len() < 3 {
            return Err(Error::parse(origin, line, "expected demo,t,q1..qJ"));
        }
        let j = rec.len() - 2;
        if *joints.get_or_insert(j) != j {
            return Err(Error::parse(origin, line, "row length differs from previous rows"));
        }
        let t = number(&rec[1], origin, line)?;
        let q = (2..rec.len()).map(|k| number(&rec[k], origin, line)).collect::<Result<Vec<_>>>()?;
        let id = &rec[0];
        let slot = match ids.iter().position(|d| d == id) {
            Some(s) => s,
            None => {
                ids.push(id.to_string());
                demos.push(Vec::new());
                ids.len() - 1
            }
        };
        demos[slot].push((t, JointConfiguration::from(q)));
    }
    if demos.is_empty() {
        return Err(Error::parse(origin, 0, "no demonstration samples"));
    }
    Ok(demos.into_iter().map(Demonstration::new).collect())
}

pub fn read_demos(path: &Path) -> Result<Vec<Demonstration>> {
    parse_demos(open(path)?, path)
}

pub fn format_demos(mut w: impl Write, demos: &[Demonstration]) -> std::io::Result<()> {
    let joints = demos.iter().flat_map(|d| d.samples.first()).map(|s| s.1.len()).next().unwrap_or(0);
    write!(w, "demo,t")?;
    for j in 1..=joints {
        write!(w, ",q{j}")?;
    }
    writeln!(w)?;
    for (id, demo) in demos.iter().enumerate() {
        for (t, q) in &demo.samples {
            write!(w, "{id},{t}")?;
            for v in q.iter() {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

pub fn write_demos(path: &Path, demos: &[Demonstration]) -> Result<()> {
    let mut w = create(path)?;
    format_demos(&mut w, demos).map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

/// Rows of joint angles. A first row that is not numeric is taken as a header.
pub fn parse_config_matrix(r: impl Read, origin: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (i, rec) in csv_reader(r).records().enumerate() {
        let rec = rec?;
        let line = record_line(&rec);
        if i == 0 && rec.iter().any(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        rows.push(rec.iter().map(|f| number(f, origin, line)).collect::<Result<Vec<_>>>()?);
    }
    Ok(rows)
}

pub fn read_config_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    parse_config_matrix(open(path)?, path)
}

pub fn parse_cloud(r: impl BufRead, origin: &Path) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split(|c: char| c.is_whitespace() || c == ',').filter(|f| !f.is_empty()).collect();
        if fields.len() != 3 {
            return Err(Error::parse(origin, i + 1, format!("expected 3 coordinates, found {}", fields.len())));
        }
        let mut p = [0.0; 3];
        for (slot, f) in p.iter_mut().zip(&fields) {
            *slot = number(f, origin, i + 1)?;
        }
        points.push(p);
    }
    Ok(PointCloud::from_xyz(&points)?)
}

pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    parse_cloud(open(path)?, path)
}

pub fn format_cloud(mut w: impl Write, cloud: &PointCloud) -> std::io::Result<()> {
    writeln!(w, "# x y z (m)")?;
    for p in cloud.points() {
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    Ok(())
}

pub fn write_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut w = create(path)?;
    format_cloud(&mut w, cloud).map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(open(path)?)?)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value)?)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

pub fn format_reference(mut w: impl Write, reference: &ReferenceTrajectory) -> std::io::Result<()> {
    let s = reference.dim();
    write!(w, "t")?;
    for k in 1..=s {
        write!(w, ",mu{k}")?;
    }
    for a in 1..=s {
        for b in 1..=s {
            write!(w, ",sigma_{a}_{b}")?;
        }
    }
    writeln!(w)?;
    for i in 0..reference.len() {
        let (t, mu, cov) = reference.point(i);
        write!(w, "{t}")?;
        for v in mu.iter() {
            write!(w, ",{v}")?;
        }
        for a in 0..s {
            for b in 0..s {
                write!(w, ",{}", cov[(a, b)])?;
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_reference_csv(path: &Path, reference: &ReferenceTrajectory) -> Result<()> {
    let mut w = create(path)?;
    format_reference(&mut w, reference).map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

pub fn parse_reference(r: impl Read, origin: &Path) -> Result<ReferenceTrajectory> {
    let mut times = Vec::new();
    let mut means = Vec::new();
    let mut covs = Vec::new();
    for (i, rec) in csv_reader(r).records().enumerate() {
        let rec = rec?;
        let line = record_line(&rec);
        if i == 0 && rec.get(0) == Some("t") {
            continue;
        }
        // 1 + S + S² columns
        let n = rec.len() - 1;
        let s = ((((1 + 4 * n) as f64).sqrt() - 1.0) / 2.0).round() as usize;
        if s == 0 || s + s * s != n {
            return Err(Error::parse(origin, line, "expected t, S means and S² covariance entries"));
        }
        let v = rec.iter().map(|f| number(f, origin, line)).collect::<Result<Vec<_>>>()?;
        times.push(v[0]);
        means.push(SynergyPoint::from_slice(&v[1..=s]));
        covs.push(nalgebra::DMatrix::from_row_slice(s, s, &v[1 + s..]));
    }
    Ok(ReferenceTrajectory::new(times, means, covs)?)
}

pub fn read_reference_csv(path: &Path) -> Result<ReferenceTrajectory> {
    parse_reference(open(path)?, path)
}

/// Predicted means and marginal variances.
pub fn format_prediction(mut w: impl Write, prediction: &ReferenceTrajectory) -> std::io::Result<()> {
    let s = prediction.dim();
    write!(w, "t")?;
    for k in 1..=s {
        write!(w, ",mean{k}")?;
    }
    for k in 1..=s {
        write!(w, ",var{k}")?;
    }
    writeln!(w)?;
    for i in 0..prediction.len() {
        let (t, mu, cov) = prediction.point(i);
        write!(w, "{t}")?;
        for v in mu.iter() {
            write!(w, ",{v}")?;
        }
        for k in 0..s {
            write!(w, ",{}", cov[(k, k)])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_prediction_csv(path: &Path, prediction: &ReferenceTrajectory) -> Result<()> {
    let mut w = create(path)?;
    format_prediction(&mut w, prediction).map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

/// `t,e1..eS` rows, used for trajectory dumps.
pub fn format_points(mut w: impl Write, times: &[f64], points: &[SynergyPoint]) -> std::io::Result<()> {
    let s = points.first().map_or(0, |p| p.len());
    write!(w, "t")?;
    for k in 1..=s {
        write!(w, ",e{k}")?;
    }
    writeln!(w)?;
    for (t, p) in times.iter().zip(points) {
        write!(w, "{t}")?;
        for v in p.iter() {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_points_csv(path: &Path, times: &[f64], points: &[SynergyPoint]) -> Result<()> {
    let mut w = create(path)?;
    format_points(&mut w, times, points).map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

/// `t,force` rows. The ramp rate is not stored; it is estimated from the
/// largest slope when read back.
pub fn parse_force_profile(r: impl Read, origin: &Path) -> Result<ForceProfile> {
    let mut times = Vec::new();
    let mut forces = Vec::new();
    for (i, rec) in csv_reader(r).records().enumerate() {
        let rec = rec?;
        let line = record_line(&rec);
        if i == 0 && rec.get(0) == Some("t") {
            continue;
        }
        if rec.len() != 2 {
            return Err(Error::parse(origin, line, "expected t,force"));
        }
        times.push(number(&rec[0], origin, line)?);
        forces.push(number(&rec[1], origin, line)?);
    }
    let rate = times
        .windows(2)
        .zip(forces.windows(2))
        .map(|(t, f)| ((f[1] - f[0]) / (t[1] - t[0])).abs())
        .filter(|r| r.is_finite())
        .fold(0.0, f64::max);
    Ok(ForceProfile::new(times, forces, rate)?)
}

pub fn read_force_profile(path: &Path) -> Result<ForceProfile> {
    parse_force_profile(open(path)?, path)
}

pub fn format_force_profile(mut w: impl Write, profile: &ForceProfile) -> std::io::Result<()> {
    writeln!(w, "t,force")?;
    for (t, f) in profile.times.iter().zip(&profile.forces) {
        writeln!(w, "{t},{f}")?;
    }
    Ok(())
}

pub fn write_force_profile(path: &Path, profile: &ForceProfile) -> Result<()> {
    let mut w = create(path)?;
    format_force_profile(&mut w, profile).map_err(|e| Error::io(path, e))?;
    finish(path, w)
}
