//! Artifact formats: flat binary field checkpoints, observables CSV, radial
//! profile CSV, Brownian path CSV, and key = value metadata sidecars. Text
//! floats use the shortest representation that round-trips, every line ends
//! in a bare newline, and emission order is fixed, so rerunning a
//! deterministic pipeline reproduces each artifact byte for byte.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::Grid;
use crate::noise::BrownianPaths;
use crate::observables::{ObservableRecord, ObservableSeries};
use crate::radial::{RadialGroundState, RadialProfile};

pub const OBSERVABLES_SCHEMA: &str = "observables-v1";
pub const RADIAL_SCHEMA: &str = "radial-profile-v1";
pub const METADATA_SCHEMA: &str = "metadata-v1";
pub const PATHS_SCHEMA: &str = "brownian-paths-v1";
pub const SUMMARY_SCHEMA: &str = "ensemble-summary-v1";

const OBSERVABLES_COLUMNS: &str =
    "t,mass,kinetic,potential,energy,de_rhs,h1_sum,flag_e2,flag_gronwall";
const RADIAL_COLUMNS: &str = "r,phi,dphi,psi,dpsi";

/// Shortest round-tripping decimal form of a float.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

pub(crate) fn parse_f64(s: &str, context: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(context, format!("expected a number, got '{s}'")))
}

fn open_text(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    Ok(fs::read_to_string(path)?)
}

/// Split "key = value" with a mandatory spaced equals sign.
fn split_pair(line: &str, context: &str) -> Result<(String, String)> {
    match line.split_once('=') {
        Some((k, v)) => Ok((k.trim().to_string(), v.trim().to_string())),
        None => Err(Error::parse(
            context,
            format!("expected 'key = value', got '{line}'"),
        )),
    }
}

// -------- field checkpoints --------

/// Flat binary checkpoint: header u32 d, u32 n, f64 L, f64 t (little
/// endian), then u and v as interleaved re/im doubles in row-major order.
pub fn write_checkpoint(path: &Path, u: &ComplexField, v: &ComplexField, t: f64) -> Result<()> {
    u.grid().assert_same(v.grid(), "checkpoint fields")?;
    let grid = u.grid();
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&(grid.d() as u32).to_le_bytes())?;
    w.write_all(&(grid.n() as u32).to_le_bytes())?;
    w.write_all(&grid.length().to_le_bytes())?;
    w.write_all(&t.to_le_bytes())?;
    for field in [u, v] {
        for z in field.values() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<(ComplexField, ComplexField, f64)> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        Err(e) => return Err(e.into()),
    };
    let context = format!("checkpoint {}", path.display());
    if bytes.len() < 24 {
        return Err(Error::parse(context, "file shorter than its header"));
    }
    let d = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let length = f64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let t = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let grid = Grid::new(d, n, length)
        .map_err(|e| Error::parse(context.clone(), format!("bad header: {e}")))?;
    let expected = 24 + 2 * grid.len() * 16;
    if bytes.len() != expected {
        return Err(Error::parse(
            context,
            format!("expected {expected} bytes for this grid, found {}", bytes.len()),
        ));
    }
    let mut fields = Vec::with_capacity(2);
    let mut off = 24;
    for _ in 0..2 {
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            let re = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
            let im = f64::from_le_bytes(bytes[off + 8..off + 16].try_into().unwrap());
            values.push(Complex64::new(re, im));
            off += 16;
        }
        fields.push(ComplexField::from_values(grid, values)?);
    }
    let v = fields.pop().expect("two fields read");
    let u = fields.pop().expect("two fields read");
    Ok((u, v, t))
}

// -------- observables CSV --------

fn flag_cell(flag: bool) -> &'static str {
    if flag {
        "1"
    } else {
        "0"
    }
}

/// Observables CSV: schema line, preamble echoed as '# key = value' lines
/// (resolved config, seed, stop data), a column header, then one row per
/// record. An absent de_rhs is an empty cell.
pub fn write_observables_csv(
    path: &Path,
    series: &ObservableSeries,
    preamble: &[(String, String)],
) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# {OBSERVABLES_SCHEMA}")?;
    for (k, v) in preamble {
        writeln!(w, "# {k} = {v}")?;
    }
    writeln!(w, "{OBSERVABLES_COLUMNS}")?;
    for r in &series.records {
        let de = r.de_rhs.map(fmt_f64).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            fmt_f64(r.t),
            fmt_f64(r.mass),
            fmt_f64(r.kinetic),
            fmt_f64(r.potential),
            fmt_f64(r.energy),
            de,
            fmt_f64(r.h1_sum),
            flag_cell(r.flag_e2),
            flag_cell(r.flag_gronwall),
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_observables_csv(path: &Path) -> Result<(Vec<(String, String)>, ObservableSeries)> {
    let text = open_text(path)?;
    let context = format!("observables {}", path.display());
    let mut lines = text.lines();
    match lines.next() {
        Some(first) if first == format!("# {OBSERVABLES_SCHEMA}") => {}
        other => {
            return Err(Error::parse(
                context,
                format!("expected schema line '# {OBSERVABLES_SCHEMA}', got {other:?}"),
            ));
        }
    }
    let mut preamble = Vec::new();
    let mut series = ObservableSeries::new();
    let mut header_seen = false;
    for line in lines {
        if let Some(rest) = line.strip_prefix("# ") {
            preamble.push(split_pair(rest, &context)?);
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            if line != OBSERVABLES_COLUMNS {
                return Err(Error::parse(
                    context,
                    format!("expected column header '{OBSERVABLES_COLUMNS}', got '{line}'"),
                ));
            }
            header_seen = true;
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 9 {
            return Err(Error::parse(
                context,
                format!("expected 9 cells per row, got {} in '{line}'", cells.len()),
            ));
        }
        let de_rhs = if cells[5].is_empty() {
            None
        } else {
            Some(parse_f64(cells[5], &context)?)
        };
        series.push(ObservableRecord {
            t: parse_f64(cells[0], &context)?,
            mass: parse_f64(cells[1], &context)?,
            kinetic: parse_f64(cells[2], &context)?,
            potential: parse_f64(cells[3], &context)?,
            energy: parse_f64(cells[4], &context)?,
            de_rhs,
            h1_sum: parse_f64(cells[6], &context)?,
            flag_e2: cells[7] == "1",
            flag_gronwall: cells[8] == "1",
        });
    }
    if !header_seen {
        return Err(Error::parse(context, "no column header line"));
    }
    Ok((preamble, series))
}

// -------- radial profile CSV --------

/// Radial ground-state artifact: schema line, the certificate numbers as
/// '# key = value' lines, then the dense mesh with both value and
/// derivative columns so the profile object reconstructs exactly.
pub fn write_radial_profile(path: &Path, gs: &RadialGroundState) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# {RADIAL_SCHEMA}")?;
    let p = &gs.profile;
    let meta = [
        ("mesh_step", fmt_f64(p.mesh_step())),
        ("nodes", p.len().to_string()),
        ("r_max", fmt_f64(p.r_max())),
        ("phi0", fmt_f64(gs.phi0)),
        ("psi0", fmt_f64(gs.psi0)),
        ("mass", fmt_f64(gs.mass)),
        ("kinetic", fmt_f64(gs.kinetic)),
        ("potential", fmt_f64(gs.potential)),
        ("energy", fmt_f64(gs.energy)),
        ("shoot_residual", fmt_f64(gs.shoot_residual)),
        ("tail_residual", fmt_f64(gs.tail_residual)),
        ("derivative_mismatch", fmt_f64(gs.derivative_mismatch)),
        ("nehari_defect", fmt_f64(gs.nehari_defect)),
        ("pohozaev_defect", fmt_f64(gs.pohozaev_defect)),
    ];
    for (k, v) in meta {
        writeln!(w, "# {k} = {v}")?;
    }
    writeln!(w, "{RADIAL_COLUMNS}")?;
    let (phi, dphi, psi, dpsi) = (p.phi(), p.dphi(), p.psi(), p.dpsi());
    for j in 0..p.len() {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt_f64(p.r(j)),
            fmt_f64(phi[j]),
            fmt_f64(dphi[j]),
            fmt_f64(psi[j]),
            fmt_f64(dpsi[j]),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Read back a radial artifact: the profile plus its metadata pairs in file
/// order.
pub fn read_radial_profile(path: &Path) -> Result<(RadialProfile, Vec<(String, String)>)> {
    let text = open_text(path)?;
    let context = format!("radial profile {}", path.display());
    let mut lines = text.lines();
    match lines.next() {
        Some(first) if first == format!("# {RADIAL_SCHEMA}") => {}
        other => {
            return Err(Error::parse(
                context,
                format!("expected schema line '# {RADIAL_SCHEMA}', got {other:?}"),
            ));
        }
    }
    let mut meta = Vec::new();
    let mut header_seen = false;
    let mut cols: [Vec<f64>; 5] = Default::default();
    for line in lines {
        if let Some(rest) = line.strip_prefix("# ") {
            meta.push(split_pair(rest, &context)?);
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            if line != RADIAL_COLUMNS {
                return Err(Error::parse(
                    context,
                    format!("expected column header '{RADIAL_COLUMNS}', got '{line}'"),
                ));
            }
            header_seen = true;
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 5 {
            return Err(Error::parse(
                context,
                format!("expected 5 cells per row, got {} in '{line}'", cells.len()),
            ));
        }
        for (c, cell) in cols.iter_mut().zip(&cells) {
            c.push(parse_f64(cell, &context)?);
        }
    }
    if cols[0].len() < 4 {
        return Err(Error::parse(context, "mesh has fewer than 4 nodes"));
    }
    let h = cols[0][1] - cols[0][0];
    let [_, phi, dphi, psi, dpsi] = cols;
    let profile = RadialProfile::from_columns(h, phi, dphi, psi, dpsi)?;
    Ok((profile, meta))
}

// -------- Brownian path CSV --------

/// Path dump: t, then one column per path, on the sampling lattice.
pub fn write_paths_csv(path: &Path, paths: &BrownianPaths) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# {PATHS_SCHEMA}")?;
    writeln!(w, "# seed = {}", paths.seed())?;
    writeln!(w, "# dt = {}", fmt_f64(paths.dt()))?;
    let mut header = String::from("t");
    for k in 0..paths.n_paths() {
        header.push_str(&format!(",B_{}", k + 1));
    }
    writeln!(w, "{header}")?;
    for m in 0..=paths.steps() {
        let mut row = fmt_f64(m as f64 * paths.dt());
        for value in paths.values_at_node(m)? {
            row.push(',');
            row.push_str(&fmt_f64(value));
        }
        writeln!(w, "{row}")?;
    }
    w.flush()?;
    Ok(())
}

// -------- metadata sidecars --------

/// Structured text sidecar: schema line then ordered 'key = value' lines.
pub fn write_metadata(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# {METADATA_SCHEMA}")?;
    for (k, v) in entries {
        writeln!(w, "{k} = {v}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metadata(path: &Path) -> Result<Vec<(String, String)>> {
    let text = open_text(path)?;
    let context = format!("metadata {}", path.display());
    let mut lines = text.lines();
    match lines.next() {
        Some(first) if first == format!("# {METADATA_SCHEMA}") => {}
        other => {
            return Err(Error::parse(
                context,
                format!("expected schema line '# {METADATA_SCHEMA}', got {other:?}"),
            ));
        }
    }
    let mut entries = Vec::new();
    for line in lines {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        entries.push(split_pair(line, &context)?);
    }
    Ok(entries)
}

/// First value bound to a key, for consumers of sidecars and preambles.
pub fn lookup<'a>(entries: &'a [(String, String)], key: &str) -> Option<&'a str> {
    entries
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
}
