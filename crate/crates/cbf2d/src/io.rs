//! Artifact formats: CSV for series and fields, a little-endian binary
//! container for trajectories, JSON for reports, and atomic file writes.
//!
//! Conventions shared by all text formats:
//!
//! * comma-separated, `.` decimal, floats printed with 17 significant
//!   digits (`{:.16e}`) so parsing reproduces the exact bits;
//! * `#` starts a comment line; blank lines are ignored;
//! * parse errors carry the 1-based physical line number.

use std::io::Write as _;
use std::path::Path;

use ndarray::Array2;
use serde::Serialize;

use crate::direct::{SolverConfig, SourceField, Trajectory};
use crate::error::{Error, Result};
use crate::field::{TimeSeries, VelocityField};
use crate::grid::Grid;

/// Version stamp embedded in every artifact.
pub const FORMAT_VERSION: u32 = 1;

/// Magic prefix of the binary trajectory container.
pub const TRAJECTORY_MAGIC: &[u8; 4] = b"CBFT";

/// Upper bound on grid cells accepted from external inputs, to keep
/// adversarial headers from requesting absurd allocations.
pub const MAX_INPUT_CELLS: usize = 4096;

/// Upper bound on time levels accepted from external trajectory inputs.
pub const MAX_INPUT_LEVELS: usize = 10_000_000;

/// Round-trip exact float formatting used by every text artifact.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes through a temporary file in the target directory, then renames:
/// readers never observe a partial artifact.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Serializes a report as pretty JSON with a trailing newline, atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::DataParse { line, message: message.into() }
}

fn parse_float(line: usize, field: &str, raw: &str) -> Result<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("bad {field} value `{}`", raw.trim())))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(parse_err(line, format!("non-finite {field} value `{}`", raw.trim())))
    }
}

fn parse_index(line: usize, field: &str, raw: &str) -> Result<usize> {
    raw.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("bad {field} index `{}`", raw.trim())))
}

/// Numbered, non-blank, non-comment lines.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

// ---------------------------------------------------------------------------
// Time series: `t,value` rows on a uniform axis.
// ---------------------------------------------------------------------------

pub fn time_series_to_csv(series: &TimeSeries) -> String {
    let mut out = String::from("t,value\n");
    for (n, v) in series.values().iter().enumerate() {
        out.push_str(&fmt_f64(series.time(n)));
        out.push(',');
        out.push_str(&fmt_f64(*v));
        out.push('\n');
    }
    out
}

/// Parses a `t,value` table; the time column must be uniformly spaced
/// (relative tolerance `1e-9` against the axis implied by the first two
/// rows) and strictly increasing.
pub fn parse_time_series_csv(text: &str) -> Result<TimeSeries> {
    let mut rows: Vec<(usize, f64, f64)> = Vec::new();
    let mut header_seen = false;
    for (lineno, line) in data_lines(text) {
        if !header_seen {
            if line != "t,value" {
                return Err(parse_err(lineno, format!("expected header `t,value`, got `{line}`")));
            }
            header_seen = true;
            continue;
        }
        let mut fields = line.split(',');
        let (t_raw, v_raw) = match (fields.next(), fields.next(), fields.next()) {
            (Some(t), Some(v), None) => (t, v),
            _ => return Err(parse_err(lineno, "expected exactly two fields `t,value`")),
        };
        rows.push((lineno, parse_float(lineno, "t", t_raw)?, parse_float(lineno, "value", v_raw)?));
    }
    if !header_seen {
        return Err(parse_err(1, "missing header `t,value`"));
    }
    if rows.len() < 2 {
        return Err(parse_err(
            rows.last().map_or(1, |r| r.0),
            "need at least two samples to define the time axis",
        ));
    }
    let t0 = rows[0].1;
    let dt = rows[1].1 - t0;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(parse_err(rows[1].0, format!("time column must increase, got step {dt}")));
    }
    for (n, row) in rows.iter().enumerate() {
        let expected = t0 + n as f64 * dt;
        if (row.1 - expected).abs() > 1e-9 * expected.abs().max(1.0) {
            return Err(parse_err(
                row.0,
                format!("non-uniform time axis: expected t = {expected}, got {}", row.1),
            ));
        }
    }
    TimeSeries::new(t0, dt, rows.into_iter().map(|r| r.2).collect())
}

pub fn write_time_series_csv(path: &Path, series: &TimeSeries) -> Result<()> {
    atomic_write(path, time_series_to_csv(series).as_bytes())
}

pub fn read_time_series_csv(path: &Path) -> Result<TimeSeries> {
    parse_time_series_csv(&std::fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// Velocity fields: explicit dimensions, then `component,i,j,value` rows.
// ---------------------------------------------------------------------------

pub fn velocity_to_csv(v: &VelocityField) -> String {
    let grid = v.grid();
    let mut out = String::new();
    out.push_str(&format!("nx,{}\nny,{}\n", grid.nx(), grid.ny()));
    out.push_str("component,i,j,value\n");
    for ((i, j), val) in v.ux().indexed_iter() {
        out.push_str(&format!("ux,{i},{j},{}\n", fmt_f64(*val)));
    }
    for ((i, j), val) in v.uy().indexed_iter() {
        out.push_str(&format!("uy,{i},{j},{}\n", fmt_f64(*val)));
    }
    out
}

/// Parses the staggered-component table written by [`velocity_to_csv`].
/// Every face entry must appear exactly once; boundary-normal entries must
/// be zero (enforced by the field constructor).
pub fn parse_velocity_csv(text: &str) -> Result<VelocityField> {
    let mut lines = data_lines(text);
    let mut dim = |name: &str| -> Result<(usize, usize)> {
        let (lineno, line) = lines
            .next()
            .ok_or_else(|| parse_err(1, format!("missing `{name},<cells>` line")))?;
        match line.split_once(',') {
            Some((key, raw)) if key.trim() == name => {
                Ok((lineno, parse_index(lineno, name, raw)?))
            }
            _ => Err(parse_err(lineno, format!("expected `{name},<cells>`, got `{line}`"))),
        }
    };
    let (nx_line, nx) = dim("nx")?;
    let (ny_line, ny) = dim("ny")?;
    if nx > MAX_INPUT_CELLS {
        return Err(parse_err(nx_line, format!("nx = {nx} exceeds the input cap {MAX_INPUT_CELLS}")));
    }
    if ny > MAX_INPUT_CELLS {
        return Err(parse_err(ny_line, format!("ny = {ny} exceeds the input cap {MAX_INPUT_CELLS}")));
    }
    let grid = Grid::new(nx, ny).map_err(|e| parse_err(nx_line, e.to_string()))?;

    match lines.next() {
        Some((_, "component,i,j,value")) => {}
        Some((lineno, other)) => {
            return Err(parse_err(
                lineno,
                format!("expected header `component,i,j,value`, got `{other}`"),
            ))
        }
        None => return Err(parse_err(ny_line, "missing `component,i,j,value` header")),
    }

    let mut ux: Array2<Option<f64>> = Array2::from_elem((nx + 1, ny), None);
    let mut uy: Array2<Option<f64>> = Array2::from_elem((nx, ny + 1), None);
    for (lineno, line) in lines {
        let mut fields = line.split(',');
        let (comp, i_raw, j_raw, v_raw) =
            match (fields.next(), fields.next(), fields.next(), fields.next(), fields.next()) {
                (Some(c), Some(i), Some(j), Some(v), None) => (c.trim(), i, j, v),
                _ => {
                    return Err(parse_err(lineno, "expected exactly `component,i,j,value`"));
                }
            };
        let i = parse_index(lineno, "i", i_raw)?;
        let j = parse_index(lineno, "j", j_raw)?;
        let val = parse_float(lineno, "value", v_raw)?;
        let slot = match comp {
            "ux" => ux.get_mut((i, j)).ok_or_else(|| {
                parse_err(lineno, format!("ux index ({i},{j}) out of range for {nx}x{ny} cells"))
            })?,
            "uy" => uy.get_mut((i, j)).ok_or_else(|| {
                parse_err(lineno, format!("uy index ({i},{j}) out of range for {nx}x{ny} cells"))
            })?,
            other => return Err(parse_err(lineno, format!("unknown component `{other}`"))),
        };
        if slot.replace(val).is_some() {
            return Err(parse_err(lineno, format!("duplicate entry {comp},{i},{j}")));
        }
    }
    let unwrap_all = |a: Array2<Option<f64>>, comp: &str| -> Result<Array2<f64>> {
        let dim = a.dim();
        let mut out = Array2::zeros(dim);
        for ((i, j), v) in a.indexed_iter() {
            out[[i, j]] =
                v.ok_or_else(|| parse_err(0, format!("missing entry {comp},{i},{j}")))?;
        }
        Ok(out)
    };
    VelocityField::from_components(grid, unwrap_all(ux, "ux")?, unwrap_all(uy, "uy")?)
        .map_err(|e| parse_err(0, e.to_string()))
}

pub fn write_velocity_csv(path: &Path, v: &VelocityField) -> Result<()> {
    atomic_write(path, velocity_to_csv(v).as_bytes())
}

pub fn read_velocity_csv(path: &Path) -> Result<VelocityField> {
    parse_velocity_csv(&std::fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// Trajectories.
//
// CSV dump (plot-ready, write-only): `nx`/`ny` lines, a comment describing
// the layout, then one row per time level: t, the (nx+1)*ny `ux` entries in
// row-major i*ny+j order, then the nx*(ny+1) `uy` entries in row-major
// i*(ny+1)+j order.
//
// Binary container (round-trip format), all integers/floats little-endian:
//
//   bytes 0..4    magic "CBFT"
//   u32           format version (= 1)
//   u64 u64 u64   nx, ny, number of time levels
//   f64 f64       t0, dt
//   then per level: (nx+1)*ny f64 (ux, row-major), nx*(ny+1) f64 (uy).
// ---------------------------------------------------------------------------

pub fn trajectory_to_csv(traj: &Trajectory) -> String {
    let grid = traj.grid();
    let mut out = String::new();
    out.push_str(&format!("nx,{}\nny,{}\n", grid.nx(), grid.ny()));
    out.push_str("# row layout: t, ux (row-major (nx+1) x ny), uy (row-major nx x (ny+1))\n");
    for (n, snap) in traj.snapshots().iter().enumerate() {
        out.push_str(&fmt_f64(traj.config().time(n)));
        for v in snap.ux().iter().chain(snap.uy().iter()) {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    atomic_write(path, trajectory_to_csv(traj).as_bytes())
}

pub fn trajectory_to_bytes(traj: &Trajectory) -> Vec<u8> {
    let grid = traj.grid();
    let cfg = traj.config();
    let per_level = (grid.nx() + 1) * grid.ny() + grid.nx() * (grid.ny() + 1);
    let mut out = Vec::with_capacity(44 + 8 * per_level * cfg.n_times());
    out.extend_from_slice(TRAJECTORY_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.nx() as u64).to_le_bytes());
    out.extend_from_slice(&(grid.ny() as u64).to_le_bytes());
    out.extend_from_slice(&(cfg.n_times() as u64).to_le_bytes());
    out.extend_from_slice(&cfg.t0().to_le_bytes());
    out.extend_from_slice(&cfg.dt().to_le_bytes());
    for snap in traj.snapshots() {
        for v in snap.ux().iter().chain(snap.uy().iter()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            parse_err(0, format!("truncated input: needed {n} bytes for {what} at offset {}", self.pos))
        })?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("sized slice")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("sized slice")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("sized slice")))
    }
}

/// Decodes the binary trajectory container, validating magic, version,
/// dimensions (with allocation caps), axis sanity, exact payload length,
/// and per-level boundary/finiteness invariants.
pub fn trajectory_from_bytes(bytes: &[u8]) -> Result<Trajectory> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != TRAJECTORY_MAGIC {
        return Err(parse_err(0, "bad magic: not a trajectory container"));
    }
    let version = cur.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(parse_err(0, format!("unsupported format version {version}")));
    }
    let nx = cur.u64("nx")? as usize;
    let ny = cur.u64("ny")? as usize;
    let n_times = cur.u64("level count")? as usize;
    if nx > MAX_INPUT_CELLS || ny > MAX_INPUT_CELLS {
        return Err(parse_err(0, format!("grid {nx}x{ny} exceeds the input cap {MAX_INPUT_CELLS}")));
    }
    if !(2..=MAX_INPUT_LEVELS).contains(&n_times) {
        return Err(parse_err(
            0,
            format!("level count {n_times} outside the accepted range 2..={MAX_INPUT_LEVELS}"),
        ));
    }
    let grid = Grid::new(nx, ny).map_err(|e| parse_err(0, e.to_string()))?;
    let t0 = cur.f64("t0")?;
    if !t0.is_finite() {
        return Err(parse_err(0, format!("non-finite t0 = {t0}")));
    }
    let dt = cur.f64("dt")?;
    let config =
        SolverConfig::new(t0, dt, n_times - 1).map_err(|e| parse_err(0, e.to_string()))?;

    let per_level = (nx + 1) * ny + nx * (ny + 1);
    let expected = cur.pos + 8 * per_level * n_times;
    if bytes.len() != expected {
        return Err(parse_err(
            0,
            format!("payload length {} does not match the declared shape ({expected} bytes)", bytes.len()),
        ));
    }
    let mut snapshots = Vec::with_capacity(n_times);
    for level in 0..n_times {
        let mut ux = Array2::zeros((nx + 1, ny));
        for i in 0..=nx {
            for j in 0..ny {
                ux[[i, j]] = cur.f64("ux sample")?;
            }
        }
        let mut uy = Array2::zeros((nx, ny + 1));
        for i in 0..nx {
            for j in 0..=ny {
                uy[[i, j]] = cur.f64("uy sample")?;
            }
        }
        snapshots.push(
            VelocityField::from_components(grid, ux, uy)
                .map_err(|e| parse_err(0, format!("level {level}: {e}")))?,
        );
    }
    Ok(Trajectory::new(config, snapshots))
}

pub fn write_trajectory_bin(path: &Path, traj: &Trajectory) -> Result<()> {
    atomic_write(path, &trajectory_to_bytes(traj))
}

pub fn read_trajectory_bin(path: &Path) -> Result<Trajectory> {
    trajectory_from_bytes(&std::fs::read(path)?)
}

// ---------------------------------------------------------------------------
// Source fields reuse the trajectory container: one profile per time level.
// ---------------------------------------------------------------------------

/// Encodes a source profile sampled at every level of `config` in the
/// binary trajectory container.
pub fn source_field_to_bytes(config: &SolverConfig, g: &SourceField) -> Vec<u8> {
    let levels: Vec<VelocityField> =
        (0..config.n_times()).map(|n| g.at(n).clone()).collect();
    trajectory_to_bytes(&Trajectory::new(*config, levels))
}

/// Decodes a per-level source profile (with its time axis) from the binary
/// trajectory container.
pub fn source_field_from_bytes(bytes: &[u8]) -> Result<(SolverConfig, SourceField)> {
    let traj = trajectory_from_bytes(bytes)?;
    Ok((traj.config(), SourceField::PerStep(traj.snapshots().to_vec())))
}

/// Reads a source profile from disk: the binary container (detected by its
/// magic) for time-varying profiles, otherwise the velocity CSV format for
/// a static profile.
pub fn read_source_field(path: &Path) -> Result<(Option<SolverConfig>, SourceField)> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(TRAJECTORY_MAGIC) {
        let (config, g) = source_field_from_bytes(&bytes)?;
        Ok((Some(config), g))
    } else {
        let text = String::from_utf8(bytes).map_err(|e| {
            parse_err(0, format!("not a binary container and not UTF-8 text: {e}"))
        })?;
        Ok((None, SourceField::Static(parse_velocity_csv(&text)?)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::direct::{solve_direct, PhysicalParams, SourceField};
    use crate::synth;

    fn sample_series() -> TimeSeries {
        TimeSeries::from_fn(0.25, 1e-3, 7, |t| (31.0 * t).sin() / 3.0).unwrap()
    }

    #[test]
    fn time_series_round_trips_values_exactly() {
        let s = sample_series();
        let csv = time_series_to_csv(&s);
        let back = parse_time_series_csv(&csv).unwrap();
        // Values and t0 are printed directly and round-trip bit-exactly; dt
        // is re-derived from absolute times, exact only to rounding.
        assert_eq!(s.values(), back.values());
        assert_eq!(s.t0(), back.t0());
        assert!((s.dt() - back.dt()).abs() <= 4.0 * f64::EPSILON * s.dt());
    }

    #[test]
    fn time_series_parser_reports_line_numbers() {
        let bad = "t,value\n0.0,1.0\n1.0,2.0\nnope\n";
        match parse_time_series_csv(bad).unwrap_err() {
            Error::DataParse { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected error {other}"),
        }
        let nonuniform = "t,value\n0.0,1.0\n0.1,2.0\n0.3,3.0\n";
        match parse_time_series_csv(nonuniform).unwrap_err() {
            Error::DataParse { line, message } => {
                assert_eq!(line, 4);
                assert!(message.contains("non-uniform"), "{message}");
            }
            other => panic!("unexpected error {other}"),
        }
        assert!(parse_time_series_csv("").is_err());
        assert!(parse_time_series_csv("t,value\n0.0,1.0\n").is_err());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let csv = "# a comment\n\nt,value\n0.0,1.0\n# mid\n0.5,2.0\n\n1.0,3.0\n";
        let s = parse_time_series_csv(csv).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0, 3.0]);
        assert_eq!(s.dt(), 0.5);
    }

    #[test]
    fn velocity_round_trips_exactly() {
        let grid = Grid::new(9, 8).unwrap();
        let v = synth::random_divergence_free(grid, 11, 1.0).unwrap();
        let back = parse_velocity_csv(&velocity_to_csv(&v)).unwrap();
        assert_eq!(v.ux(), back.ux());
        assert_eq!(v.uy(), back.uy());
    }

    #[test]
    fn velocity_parser_rejects_malformed_tables() {
        let grid = Grid::new(8, 8).unwrap();
        let v = VelocityField::zeros(grid);
        let good = velocity_to_csv(&v);
        // Drop one data row: missing entry.
        let missing: String = good.lines().take(good.lines().count() - 1).fold(
            String::new(),
            |mut acc, l| {
                acc.push_str(l);
                acc.push('\n');
                acc
            },
        );
        assert!(parse_velocity_csv(&missing).is_err());
        // Duplicate a row.
        let dup = format!("{good}ux,1,1,0.0\n");
        assert!(parse_velocity_csv(&dup).is_err());
        // Nonzero boundary-normal entry.
        let bad_boundary = good.replace("ux,0,0,0.0000000000000000e0", "ux,0,0,1.0e0");
        assert!(parse_velocity_csv(&bad_boundary).is_err());
        // Oversized header.
        assert!(parse_velocity_csv("nx,100000\nny,8\ncomponent,i,j,value\n").is_err());
    }

    fn small_trajectory() -> Trajectory {
        let grid = Grid::new(8, 8).unwrap();
        let params = PhysicalParams::new(0.1, 1.0, 0.5, 2.0).unwrap();
        let cfg = SolverConfig::new(0.0, 1e-3, 3).unwrap();
        let u0 = synth::random_divergence_free(grid, 3, 0.5).unwrap();
        let g = SourceField::Static(synth::random_divergence_free(grid, 4, 1.0).unwrap());
        let f = cfg.series_from_fn(|t| 1.0 + t).unwrap();
        solve_direct(&u0, params, cfg, &f, &g).unwrap()
    }

    #[test]
    fn trajectory_binary_round_trips_exactly() {
        let traj = small_trajectory();
        let bytes = trajectory_to_bytes(&traj);
        let back = trajectory_from_bytes(&bytes).unwrap();
        assert_eq!(back.config().n_times(), traj.config().n_times());
        assert_eq!(back.config().dt(), traj.config().dt());
        for (a, b) in traj.snapshots().iter().zip(back.snapshots()) {
            assert_eq!(a.ux(), b.ux());
            assert_eq!(a.uy(), b.uy());
        }
    }

    #[test]
    fn source_field_container_round_trips_every_level() {
        let grid = Grid::new(8, 8).unwrap();
        let cfg = SolverConfig::new(0.25, 1e-2, 4).unwrap();
        let levels: Vec<VelocityField> = (0..cfg.n_times())
            .map(|n| synth::random_field(grid, 100 + n as u64, 1.0).unwrap())
            .collect();
        let g = SourceField::PerStep(levels.clone());
        let bytes = source_field_to_bytes(&cfg, &g);
        let (cfg2, g2) = source_field_from_bytes(&bytes).unwrap();
        assert_eq!(cfg2.n_times(), cfg.n_times());
        assert_eq!(cfg2.t0(), cfg.t0());
        for (n, level) in levels.iter().enumerate() {
            assert_eq!(g2.at(n).ux(), level.ux());
            assert_eq!(g2.at(n).uy(), level.uy());
        }

        // Static profiles expand into identical levels.
        let s = SourceField::Static(levels[0].clone());
        let (_, s2) = source_field_from_bytes(&source_field_to_bytes(&cfg, &s)).unwrap();
        for n in 0..cfg.n_times() {
            assert_eq!(s2.at(n).ux(), levels[0].ux());
        }

        // Disk sniffing: container vs velocity CSV.
        let dir = tempfile::tempdir().unwrap();
        let bin_path = dir.path().join("g.bin");
        atomic_write(&bin_path, &bytes).unwrap();
        let (axis, sniffed) = read_source_field(&bin_path).unwrap();
        assert!(axis.is_some());
        assert_eq!(sniffed.at(2).ux(), levels[2].ux());
        let csv_path = dir.path().join("g.csv");
        write_velocity_csv(&csv_path, &levels[0]).unwrap();
        let (axis, sniffed) = read_source_field(&csv_path).unwrap();
        assert!(axis.is_none());
        assert_eq!(sniffed.at(7).ux(), levels[0].ux());
    }

    #[test]
    fn trajectory_decoder_rejects_corrupted_containers() {
        let traj = small_trajectory();
        let bytes = trajectory_to_bytes(&traj);
        assert!(trajectory_from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(trajectory_from_bytes(b"NOPE").is_err());
        let mut wrong_version = bytes.clone();
        wrong_version[4] = 9;
        assert!(trajectory_from_bytes(&wrong_version).is_err());
        let mut huge_dims = bytes.clone();
        huge_dims[8..16].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(trajectory_from_bytes(&huge_dims).is_err());
        // Header layout: magic 4, version 4, nx/ny/levels 24, t0 at 32, dt at 40.
        let mut bad_dt = bytes.clone();
        bad_dt[40..48].copy_from_slice(&(-1.0f64).to_le_bytes());
        assert!(trajectory_from_bytes(&bad_dt).is_err());
        let mut bad_t0 = bytes.clone();
        bad_t0[32..40].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(trajectory_from_bytes(&bad_t0).is_err());
        // Extra trailing byte must be rejected (exact-length contract).
        let mut padded = bytes.clone();
        padded.push(0);
        assert!(trajectory_from_bytes(&padded).is_err());
    }

    #[test]
    fn trajectory_csv_layout_is_stable() {
        let traj = small_trajectory();
        let csv = trajectory_to_csv(&traj);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("nx,8"));
        assert_eq!(lines.next(), Some("ny,8"));
        let data_rows: Vec<&str> =
            csv.lines().filter(|l| !l.starts_with('#') && !l.starts_with('n')).collect();
        assert_eq!(data_rows.len(), traj.config().n_times());
        let grid = traj.grid();
        let expected_fields = 1 + (grid.nx() + 1) * grid.ny() + grid.nx() * (grid.ny() + 1);
        assert!(data_rows.iter().all(|r| r.split(',').count() == expected_fields));
    }

    #[test]
    fn atomic_write_replaces_content(){
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("artifact.csv");
        atomic_write(&path, b"first").unwrap();
        atomic_write(&path, b"second").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"second");
    }

    #[test]
    fn float_formatting_round_trips_hard_cases() {
        for x in [0.1, 1.0 / 3.0, f64::MIN_POSITIVE, 1e308, -2.5e-17, 0.0] {
            let printed = fmt_f64(x);
            assert_eq!(printed.parse::<f64>().unwrap(), x, "{printed}");
        }
    }
}
