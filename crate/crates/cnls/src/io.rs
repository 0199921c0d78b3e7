//! File artifacts: profile CSV + JSON sidecar, overlap-sample CSV, field CSV,
//! and the binary field format (JSON header line followed by little-endian
//! f64 data).
//!
//! Floats in CSV output are printed with 17 significant digits so reruns are
//! byte-identical and values round-trip exactly.

use crate::error::{Error, Result};
use crate::field::{Fields, Grid};
use crate::ground_state::{RadialProfile, ScalarParams};
use crate::interaction::OverlapSample;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

/// Fixed-width float formatting used by every CSV artifact.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileSidecar {
    pub lambda: f64,
    pub mu: f64,
    pub dim: usize,
    pub r_max: f64,
    pub tail_constant: f64,
    pub decay_rate: f64,
    pub energy: f64,
    pub int_w2: f64,
    pub int_w4: f64,
}

impl ProfileSidecar {
    pub fn of(profile: &RadialProfile) -> Self {
        ProfileSidecar {
            lambda: profile.params.lambda,
            mu: profile.params.mu,
            dim: profile.params.dim,
            r_max: profile.r_max,
            tail_constant: profile.tail_constant,
            decay_rate: profile.decay_rate,
            energy: profile.energy,
            int_w2: profile.int_w2,
            int_w4: profile.int_w4,
        }
    }
}

pub fn write_profile(dir: &Path, stem: &str, profile: &RadialProfile) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut out = String::from("r,w,dw\n");
    for i in 0..profile.w.len() {
        let r = i as f64 * profile.dr;
        out.push_str(&format!("{},{},{}\n", fmt(r), fmt(profile.w[i]), fmt(profile.dw[i])));
    }
    std::fs::write(&csv_path, out)?;
    let side_path = dir.join(format!("{stem}.json"));
    let side = serde_json::to_string_pretty(&ProfileSidecar::of(profile))
        .map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(&side_path, side)?;
    Ok(vec![
        csv_path.to_string_lossy().into_owned(),
        side_path.to_string_lossy().into_owned(),
    ])
}

/// Read a profile CSV + sidecar back into samples and metadata.
pub fn read_profile(dir: &Path, stem: &str) -> Result<(Vec<f64>, Vec<f64>, ProfileSidecar)> {
    let side: ProfileSidecar =
        serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{stem}.json")))?)
            .map_err(|e| Error::Config(e.to_string()))?;
    let file = std::fs::File::open(dir.join(format!("{stem}.csv")))?;
    let mut w = Vec::new();
    let mut dw = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if k == 0 {
            continue;
        }
        let mut parts = line.split(',');
        let _r = parts.next();
        let wv = parts
            .next()
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| Error::Config(format!("bad csv line {k}")))?;
        let dv = parts
            .next()
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| Error::Config(format!("bad csv line {k}")))?;
        w.push(wv);
        dw.push(dv);
    }
    Ok((w, dw, side))
}

/// Rebuild an evaluable profile from stored samples and sidecar metadata.
/// Derived quantities (tail, integrals, energy) come from the sidecar; the
/// residual diagnostic is not recomputed.
pub fn profile_from_parts(w: Vec<f64>, dw: Vec<f64>, side: &ProfileSidecar) -> Result<RadialProfile> {
    let params = ScalarParams::new(side.lambda, side.mu, side.dim)?;
    let n = w.len();
    if n < 3 || dw.len() != n {
        return Err(Error::Config("inconsistent sample arrays".into()));
    }
    let dr = side.r_max / (n - 1) as f64;
    Ok(RadialProfile::from_samples(
        params,
        side.r_max,
        dr,
        w,
        dw,
        side.tail_constant,
        side.decay_rate,
        side.energy,
        side.int_w2,
        side.int_w4,
    ))
}

pub fn write_samples_csv(path: &Path, samples: &[(String, OverlapSample)]) -> Result<()> {
    let mut out = String::from("kind,xi,value\n");
    for (label, s) in samples {
        out.push_str(&format!("{label},{},{}\n", fmt(s.separation), fmt(s.value)));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Solution fields as CSV rows (x, y, u_1..u_d).
pub fn write_fields_csv(path: &Path, grid: &Grid, fields: &Fields) -> Result<()> {
    let mut header = String::from("x,y");
    for j in 0..fields.d {
        header.push_str(&format!(",u{}", j + 1));
    }
    header.push('\n');
    let mut out = header;
    for iy in 0..grid.n {
        for ix in 0..grid.n {
            out.push_str(&fmt(grid.coord(ix)));
            out.push(',');
            out.push_str(&fmt(grid.coord(iy)));
            for j in 0..fields.d {
                out.push(',');
                out.push_str(&fmt(fields.at(j, iy, ix)));
            }
            out.push('\n');
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BinaryHeader {
    pub n: usize,
    #[serde(rename = "L")]
    pub l: f64,
    pub h: f64,
    pub d: usize,
}

/// Binary round-trip format: one JSON header line, then d·n·n f64 values in
/// little-endian order.
pub fn write_fields_binary(path: &Path, grid: &Grid, fields: &Fields) -> Result<()> {
    let header = BinaryHeader { n: grid.n, l: grid.l, h: grid.h, d: fields.d };
    let mut file = std::fs::File::create(path)?;
    let mut text = serde_json::to_string(&header).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    file.write_all(text.as_bytes())?;
    let mut buf = Vec::with_capacity(fields.data.len() * 8);
    for v in &fields.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    file.write_all(&buf)?;
    Ok(())
}

pub fn read_fields_binary(path: &Path) -> Result<(BinaryHeader, Fields)> {
    let mut file = std::fs::File::open(path)?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Config("missing binary header".into()))?;
    let header: BinaryHeader = serde_json::from_slice(&bytes[..newline])
        .map_err(|e| Error::Config(e.to_string()))?;
    let body = &bytes[newline + 1..];
    let count = header.d * header.n * header.n;
    if body.len() != count * 8 {
        return Err(Error::Config(format!(
            "binary body has {} bytes, expected {}",
            body.len(),
            count * 8
        )));
    }
    let mut data = Vec::with_capacity(count);
    for chunk in body.chunks_exact(8) {
        data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    Ok((header.clone(), Fields { d: header.d, n: header.n, data }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::solve_ground_state;
    use approx::assert_relative_eq;

    #[test]
    fn profile_round_trips_through_csv_and_sidecar() {
        let p = ScalarParams::new(1.0, 1.0, 2).unwrap();
        let prof = solve_ground_state(p, p.default_r_max(), 1e-8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_profile(dir.path(), "w1", &prof).unwrap();
        let (w, dw, side) = read_profile(dir.path(), "w1").unwrap();
        let back = profile_from_parts(w, dw, &side).unwrap();
        for r in [0.0, 0.5, 3.0, 10.0, prof.r_max + 1.0] {
            assert_relative_eq!(back.evaluate(r), prof.evaluate(r), max_relative = 1e-12);
        }
        assert_eq!(back.energy, prof.energy);
    }

    #[test]
    fn binary_fields_round_trip_bit_exactly() {
        let grid = Grid::raw(3.0, 0.5);
        let mut f = Fields::zeros(2, &grid);
        for (i, v) in f.data.iter_mut().enumerate() {
            *v = (i as f64 * 0.37).sin() / 3.0;
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fields.bin");
        write_fields_binary(&path, &grid, &f).unwrap();
        let (header, back) = read_fields_binary(&path).unwrap();
        assert_eq!(header.n, grid.n);
        assert_eq!(back.data.len(), f.data.len());
        for i in 0..f.data.len() {
            assert_eq!(back.data[i].to_bits(), f.data[i].to_bits());
        }
    }
}
