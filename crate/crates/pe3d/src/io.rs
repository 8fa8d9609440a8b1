//! Bit-exact file formats (snapshots, traces, configs, CSV series).
//!
//! Floating-point values in snapshot and trace files are written with Rust's
//! shortest round-trip `Display`, so write -> read reproduces every bit.
//! CSV series use 17 significant digits, which also round-trips exactly.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::boundary::{SubRect, TraceLine, TraceSet, TraceVariable};
use crate::grid::{Grid2D, TimeGrid};
use crate::modes::PhysicalParams;
use crate::nesting::{ComparisonReport, InitialKind, NormSample, RunConfig, COMPARED_FIELDS};
use crate::state::{ModalState, PhysicalField};
use crate::{Error, Result};

const SNAPSHOT_MAGIC: &str = "# pe3d-snapshot v1";
const TRACES_MAGIC: &str = "# pe3d-traces v1";

fn open_reader(path: &Path) -> Result<BufReader<fs::File>> {
    Ok(BufReader::new(
        fs::File::open(path).map_err(|e| Error::io(path, e))?,
    ))
}

fn create_writer(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(
        fs::File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

fn parse_f64(path: &Path, token: &str) -> Result<f64> {
    token
        .parse::<f64>()
        .map_err(|_| malformed(path, format!("bad float `{token}`")))
}

fn parse_usize(path: &Path, token: &str) -> Result<usize> {
    token
        .parse::<usize>()
        .map_err(|_| malformed(path, format!("bad integer `{token}`")))
}

/// `key=value` pairs of a header line, after a fixed prefix.
fn header_pairs<'a>(
    path: &Path,
    line: &'a str,
    prefix: &str,
    keys: &[&str],
) -> Result<Vec<&'a str>> {
    let rest = line
        .strip_prefix(prefix)
        .ok_or_else(|| malformed(path, format!("expected line starting with `{prefix}`")))?;
    let mut out = Vec::with_capacity(keys.len());
    let mut tokens = rest.split_whitespace();
    for key in keys {
        let tok = tokens
            .next()
            .ok_or_else(|| malformed(path, format!("missing `{key}=` in header")))?;
        let value = tok
            .strip_prefix(&format!("{key}="))
            .ok_or_else(|| malformed(path, format!("expected `{key}=`, got `{tok}`")))?;
        out.push(value);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Snapshots
// ---------------------------------------------------------------------------

/// One field on one grid at one time, as stored in a snapshot file.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub field: String,
    pub time: f64,
    pub grid: Grid2D,
    pub data: Array2<f64>,
}

/// Write one horizontal field. `field` must contain no whitespace.
pub fn write_snapshot(
    path: &Path,
    field: &str,
    time: f64,
    grid: &Grid2D,
    data: &Array2<f64>,
) -> Result<()> {
    if field.is_empty() || field.contains(char::is_whitespace) {
        return Err(Error::InvalidParameter(format!(
            "bad snapshot field name `{field}`"
        )));
    }
    grid.check_shape(field, data)?;
    let mut w = create_writer(path)?;
    let io_err = |e| Error::io(path, e);
    writeln!(w, "{SNAPSHOT_MAGIC}").map_err(io_err)?;
    writeln!(
        w,
        "# field={field} time={time} I={} J={}",
        grid.i_count, grid.j_count
    )
    .map_err(io_err)?;
    writeln!(w, "# dx={} dy={}", grid.dx, grid.dy).map_err(io_err)?;
    for j in 0..grid.ny() {
        let mut line = String::new();
        for i in 0..grid.nx() {
            if i > 0 {
                line.push(' ');
            }
            line.push_str(&format!("{}", data[(j, i)]));
        }
        writeln!(w, "{line}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let reader = open_reader(path)?;
    let mut lines = reader.lines();
    let mut next_line = || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| malformed(path, "unexpected end of file"))?
            .map_err(|e| Error::io(path, e))
    };
    if next_line()? != SNAPSHOT_MAGIC {
        return Err(malformed(path, "not a pe3d snapshot"));
    }
    let line = next_line()?;
    let vals = header_pairs(path, &line, "# ", &["field", "time", "I", "J"])?;
    let field = vals[0].to_string();
    let time = parse_f64(path, vals[1])?;
    let i_count = parse_usize(path, vals[2])?;
    let j_count = parse_usize(path, vals[3])?;
    let line = next_line()?;
    let vals = header_pairs(path, &line, "# ", &["dx", "dy"])?;
    let dx = parse_f64(path, vals[0])?;
    let dy = parse_f64(path, vals[1])?;
    let grid = Grid2D {
        i_count,
        j_count,
        dx,
        dy,
    };

    let mut data = Array2::zeros((j_count + 1, i_count + 1));
    for j in 0..=j_count {
        let row = next_line()?;
        let mut count = 0usize;
        for (i, tok) in row.split_whitespace().enumerate() {
            if i > i_count {
                return Err(malformed(path, format!("row {j} has too many values")));
            }
            data[(j, i)] = parse_f64(path, tok)?;
            count = i + 1;
        }
        if count != i_count + 1 {
            return Err(malformed(
                path,
                format!("row {j} has {count} values, expected {}", i_count + 1),
            ));
        }
    }
    Ok(Snapshot {
        field,
        time,
        grid,
        data,
    })
}

/// Snapshot file names of one state: mode 0 stores `u0, v0, phi0`, every
/// retained baroclinic mode `n` stores `u<n>, v<n>, psi<n>`.
pub fn state_field_names(n_max: usize) -> Vec<String> {
    let mut names = vec!["u0".to_string(), "v0".to_string(), "phi0".to_string()];
    for n in 1..=n_max {
        names.push(format!("u{n}"));
        names.push(format!("v{n}"));
        names.push(format!("psi{n}"));
    }
    names
}

fn snapshot_path(dir: &Path, name: &str, step: usize) -> PathBuf {
    dir.join(format!("{name}_{step:06}.snap"))
}

fn state_array<'a>(state: &'a ModalState, name: &str) -> Result<&'a Array2<f64>> {
    let arr = if name == "phi0" {
        Some(&state.phi0)
    } else if let Some(n) = name.strip_prefix('u').and_then(|s| s.parse::<usize>().ok()) {
        state.u.get(n)
    } else if let Some(n) = name.strip_prefix('v').and_then(|s| s.parse::<usize>().ok()) {
        state.v.get(n)
    } else if let Some(n) = name
        .strip_prefix("psi")
        .and_then(|s| s.parse::<usize>().ok())
    {
        if n >= 1 {
            state.psi.get(n - 1)
        } else {
            None
        }
    } else {
        None
    };
    arr.ok_or_else(|| Error::InvalidParameter(format!("unknown state field `{name}`")))
}

/// Write every prognostic array of `state` under `dir`.
pub fn write_state_snapshots(
    dir: &Path,
    step: usize,
    time: f64,
    state: &ModalState,
    grid: &Grid2D,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for name in state_field_names(state.n_max) {
        let arr = state_array(state, &name)?;
        write_snapshot(&snapshot_path(dir, &name, step), &name, time, grid, arr)?;
    }
    Ok(())
}

/// Read one full state back. The retained mode count is discovered from the
/// files present. Returns the state, its grid, and the stored time.
pub fn read_state_snapshots(dir: &Path, step: usize) -> Result<(ModalState, Grid2D, f64)> {
    let u0 = read_snapshot(&snapshot_path(dir, "u0", step))?;
    let grid = u0.grid.clone();
    let time = u0.time;
    let mut n_max = 0;
    while snapshot_path(dir, &format!("u{}", n_max + 1), step).exists() {
        n_max += 1;
    }
    let mut state = ModalState::zeros(&grid, n_max);
    for name in state_field_names(n_max) {
        let snap = read_snapshot(&snapshot_path(dir, &name, step))?;
        if snap.grid != grid {
            return Err(malformed(
                &snapshot_path(dir, &name, step),
                "grid differs between snapshots of one state",
            ));
        }
        if snap.time != time {
            return Err(malformed(
                &snapshot_path(dir, &name, step),
                "time differs between snapshots of one state",
            ));
        }
        let dest = match name.as_str() {
            "phi0" => &mut state.phi0,
            _ if name.starts_with("psi") => {
                let n: usize = name[3..].parse().unwrap();
                &mut state.psi[n - 1]
            }
            _ if name.starts_with('u') => {
                let n: usize = name[1..].parse().unwrap();
                &mut state.u[n]
            }
            _ => {
                let n: usize = name[1..].parse().unwrap();
                &mut state.v[n]
            }
        };
        *dest = snap.data;
    }
    Ok((state, grid, time))
}

/// Sorted list of sample steps available in an artifact directory.
pub fn snapshot_steps(dir: &Path) -> Result<Vec<usize>> {
    let mut steps = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(rest) = name.strip_prefix("u0_") {
            if let Some(digits) = rest.strip_suffix(".snap") {
                if let Ok(step) = digits.parse::<usize>() {
                    steps.push(step);
                }
            }
        }
    }
    steps.sort_unstable();
    Ok(steps)
}

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

/// Write a full trace set. Keys are named `trace/<mode>/<variable>/<line>`
/// and stored time-major (one line per time level).
pub fn write_traces(path: &Path, traces: &TraceSet) -> Result<()> {
    let mut w = create_writer(path)?;
    let io_err = |e| Error::io(path, e);
    writeln!(w, "{TRACES_MAGIC}").map_err(io_err)?;
    let key_count = traces.iter().count();
    writeln!(
        w,
        "# dt={} dx={} dy={} keys={key_count}",
        traces.dt, traces.dx, traces.dy
    )
    .map_err(io_err)?;
    for (&(mode, variable, line), levels) in traces.iter() {
        let len = levels.first().map_or(0, Vec::len);
        writeln!(
            w,
            "# trace=trace/{mode}/{}/{} levels={} len={len}",
            variable.name(),
            line.name(),
            levels.len()
        )
        .map_err(io_err)?;
        for row in levels {
            let mut text = String::new();
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    text.push(' ');
                }
                text.push_str(&format!("{v}"));
            }
            writeln!(w, "{text}").map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn read_traces(path: &Path) -> Result<TraceSet> {
    let reader = open_reader(path)?;
    let mut lines = reader.lines();
    let mut next_line = || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| malformed(path, "unexpected end of file"))?
            .map_err(|e| Error::io(path, e))
    };
    if next_line()? != TRACES_MAGIC {
        return Err(malformed(path, "not a pe3d trace file"));
    }
    let line = next_line()?;
    let vals = header_pairs(path, &line, "# ", &["dt", "dx", "dy", "keys"])?;
    let dt = parse_f64(path, vals[0])?;
    let dx = parse_f64(path, vals[1])?;
    let dy = parse_f64(path, vals[2])?;
    let key_count = parse_usize(path, vals[3])?;

    let mut traces = TraceSet::new(dt, dx, dy);
    for _ in 0..key_count {
        let line = next_line()?;
        let vals = header_pairs(path, &line, "# ", &["trace", "levels", "len"])?;
        let mut parts = vals[0].split('/');
        let (tag, mode, var, edge) = (parts.next(), parts.next(), parts.next(), parts.next());
        if tag != Some("trace") || parts.next().is_some() {
            return Err(malformed(path, format!("bad trace name `{}`", vals[0])));
        }
        let mode = parse_usize(path, mode.unwrap_or_default())?;
        let variable = TraceVariable::parse(var.unwrap_or_default())
            .ok_or_else(|| malformed(path, format!("unknown trace variable in `{}`", vals[0])))?;
        let edge = TraceLine::parse(edge.unwrap_or_default())
            .ok_or_else(|| malformed(path, format!("unknown trace line in `{}`", vals[0])))?;
        let level_count = parse_usize(path, vals[1])?;
        let len = parse_usize(path, vals[2])?;
        let mut levels = Vec::with_capacity(level_count);
        for _ in 0..level_count {
            let row = next_line()?;
            let values = row
                .split_whitespace()
                .map(|t| parse_f64(path, t))
                .collect::<Result<Vec<f64>>>()?;
            if values.len() != len {
                return Err(malformed(
                    path,
                    format!("trace row has {} values, expected {len}", values.len()),
                ));
            }
            levels.push(values);
        }
        traces.insert_levels((mode, variable, edge), levels);
    }
    Ok(traces)
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Default run setup: 1000 km x 500 km x 10 km box, 20 m/s background flow,
/// f = 1e-4, N = 1e-2, 400 x 200 grid, 1600 steps to t = 5e4 s, 5 modes,
/// 40 vertical levels, samples every 40 steps, guest domain = middle half.
pub fn default_config() -> (RunConfig, SubRect) {
    let params = PhysicalParams::new(20.0, 1e-4, 1e-2, 1e4).expect("defaults are valid");
    let grid = Grid2D::new(1e6, 5e5, 400, 200).expect("defaults are valid");
    let time = TimeGrid::new(5e4, 1600).expect("defaults are valid");
    let config = RunConfig {
        params,
        grid,
        time,
        n_max: 5,
        levels: 40,
        cadence: 40,
        initial: InitialKind::Analytic,
    };
    let inner = SubRect {
        i0: 100,
        j0: 50,
        i_count: 200,
        j_count: 100,
    };
    (config, inner)
}

/// Render the default configuration as a parseable file.
pub fn render_default_config() -> String {
    let (c, inner) = default_config();
    render_config(&c, &inner)
}

/// Render any configuration as a parseable file (the inverse of
/// [`parse_config`]).
pub fn render_config(c: &RunConfig, inner: &SubRect) -> String {
    format!(
        "# pe3d run configuration (defaults)\n\
         # domain size in meters\n\
         l1 = {l1}\n\
         l2 = {l2}\n\
         depth = {depth}\n\
         # physics: background zonal flow, Coriolis, buoyancy frequency\n\
         u0 = {u0}\n\
         f = {f}\n\
         n_buoy = {nb}\n\
         # horizontal grid intervals\n\
         i_count = {ic}\n\
         j_count = {jc}\n\
         # time discretization\n\
         t_final = {tf}\n\
         step_count = {sc}\n\
         # retained baroclinic modes and vertical reconstruction levels\n\
         n_max = {nm}\n\
         levels = {lv}\n\
         # sample output every `cadence` steps\n\
         cadence = {cad}\n\
         # initial state: analytic or zero\n\
         initial = {init}\n\
         # guest rectangle in node indices: west,east,south,north\n\
         inner = {i0},{i1},{j0},{j1}\n",
        l1 = c.grid.l1(),
        l2 = c.grid.l2(),
        depth = c.params.depth,
        u0 = c.params.u0,
        f = c.params.f,
        nb = c.params.n_buoy,
        ic = c.grid.i_count,
        jc = c.grid.j_count,
        tf = c.time.t_final(),
        sc = c.time.step_count,
        nm = c.n_max,
        lv = c.levels,
        cad = c.cadence,
        init = match c.initial {
            InitialKind::Analytic => "analytic",
            InitialKind::Zero => "zero",
        },
        i0 = inner.i0,
        i1 = inner.i0 + inner.i_count,
        j0 = inner.j0,
        j1 = inner.j0 + inner.j_count,
    )
}

/// Parse a flat `key = value` configuration. `#` starts a comment, unknown
/// and duplicate keys are errors, omitted keys take the defaults.
pub fn parse_config(text: &str) -> Result<(RunConfig, SubRect)> {
    let (default, default_inner) = default_config();
    let mut l1 = default.grid.l1();
    let mut l2 = default.grid.l2();
    let mut depth = default.params.depth;
    let mut u0 = default.params.u0;
    let mut f = default.params.f;
    let mut n_buoy = default.params.n_buoy;
    let mut i_count = default.grid.i_count;
    let mut j_count = default.grid.j_count;
    let mut t_final = default.time.t_final();
    let mut step_count = default.time.step_count;
    let mut n_max = default.n_max;
    let mut levels = default.levels;
    let mut cadence = default.cadence;
    let mut initial = default.initial;
    let mut inner_spec = (
        default_inner.i0,
        default_inner.i0 + default_inner.i_count,
        default_inner.j0,
        default_inner.j0 + default_inner.j_count,
    );

    let mut seen: Vec<String> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(Error::Config {
            line: line_no,
            reason: "expected `key = value`".to_string(),
        })?;
        let key = key.trim();
        let value = value.trim();
        if seen.iter().any(|k| k == key) {
            return Err(Error::Config {
                line: line_no,
                reason: format!("duplicate key `{key}`"),
            });
        }
        seen.push(key.to_string());
        let bad = |what: &str| Error::Config {
            line: line_no,
            reason: format!("cannot parse `{value}` as {what} for `{key}`"),
        };
        let as_f64 = || value.parse::<f64>().map_err(|_| bad("a number"));
        let as_usize = || value.parse::<usize>().map_err(|_| bad("an integer"));
        match key {
            "l1" => l1 = as_f64()?,
            "l2" => l2 = as_f64()?,
            "depth" => depth = as_f64()?,
            "u0" => u0 = as_f64()?,
            "f" => f = as_f64()?,
            "n_buoy" => n_buoy = as_f64()?,
            "i_count" => i_count = as_usize()?,
            "j_count" => j_count = as_usize()?,
            "t_final" => t_final = as_f64()?,
            "step_count" => step_count = as_usize()?,
            "n_max" => n_max = as_usize()?,
            "levels" => levels = as_usize()?,
            "cadence" => cadence = as_usize()?,
            "initial" => {
                initial = match value {
                    "analytic" => InitialKind::Analytic,
                    "zero" => InitialKind::Zero,
                    _ => return Err(bad("`analytic` or `zero`")),
                }
            }
            "inner" => {
                let parts = value
                    .split(',')
                    .map(|t| t.trim().parse::<usize>())
                    .collect::<std::result::Result<Vec<usize>, _>>()
                    .map_err(|_| bad("four node indices west,east,south,north"))?;
                if parts.len() != 4 || parts[1] <= parts[0] || parts[3] <= parts[2] {
                    return Err(Error::Config {
                        line: line_no,
                        reason: "`inner` needs west < east and south < north node indices"
                            .to_string(),
                    });
                }
                inner_spec = (parts[0], parts[1], parts[2], parts[3]);
            }
            _ => {
                return Err(Error::Config {
                    line: line_no,
                    reason: format!("unknown key `{key}`"),
                })
            }
        }
    }

    let params = PhysicalParams::new(u0, f, n_buoy, depth)?;
    let grid = Grid2D::new(l1, l2, i_count, j_count)?;
    let time = TimeGrid::new(t_final, step_count)?;
    let config = RunConfig {
        params,
        grid,
        time,
        n_max,
        levels,
        cadence,
        initial,
    };
    config.validate()?;
    let inner = SubRect {
        i0: inner_spec.0,
        j0: inner_spec.2,
        i_count: inner_spec.1 - inner_spec.0,
        j_count: inner_spec.3 - inner_spec.2,
    };
    Ok((config, inner))
}

// ---------------------------------------------------------------------------
// CSV series
// ---------------------------------------------------------------------------

fn csv_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Norm series of one run.
pub fn write_norm_series(path: &Path, samples: &[NormSample]) -> Result<()> {
    let mut w = create_writer(path)?;
    let io_err = |e| Error::io(path, e);
    writeln!(w, "step,time,u_l2,v_l2,psi_l2,w_l2,phi_l2").map_err(io_err)?;
    for s in samples {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            s.step,
            csv_float(s.time),
            csv_float(s.u_l2),
            csv_float(s.v_l2),
            csv_float(s.psi_l2),
            csv_float(s.w_l2),
            csv_float(s.phi_l2)
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Per-time-level series, e.g. divergence measures. All columns must have
/// the same length; the time column is `level * dt`.
pub fn write_level_series(path: &Path, dt: f64, columns: &[(&str, &[f64])]) -> Result<()> {
    let rows = columns.first().map_or(0, |(_, c)| c.len());
    if columns.iter().any(|(_, c)| c.len() != rows) {
        return Err(Error::InvalidParameter(
            "series columns differ in length".into(),
        ));
    }
    let mut w = create_writer(path)?;
    let io_err = |e| Error::io(path, e);
    let mut header = String::from("step,time");
    for (name, _) in columns {
        header.push(',');
        header.push_str(name);
    }
    writeln!(w, "{header}").map_err(io_err)?;
    for k in 0..rows {
        let mut line = format!("{k},{}", csv_float(k as f64 * dt));
        for (_, col) in columns {
            line.push(',');
            line.push_str(&csv_float(col[k]));
        }
        writeln!(w, "{line}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Comparison report table. One row per sample; per variable, per scope
/// (slice at the comparison depth / full volume), per norm (L2 / Linf):
/// host norm, guest norm, relative error.
pub fn write_report(path: &Path, report: &ComparisonReport) -> Result<()> {
    let mut w = create_writer(path)?;
    let io_err = |e| Error::io(path, e);
    writeln!(w, "# pe3d-report v1").map_err(io_err)?;
    writeln!(
        w,
        "# comparison plane depth z = {} m; volume norms use trapezoid depth weights",
        report.depth
    )
    .map_err(io_err)?;
    writeln!(
        w,
        "# relative errors divide by the host solution restricted to the guest domain"
    )
    .map_err(io_err)?;
    let mut header = String::from("step,time");
    for field in COMPARED_FIELDS {
        for scope in ["slice", "volume"] {
            for norm in ["l2", "linf"] {
                for role in ["outer", "inner", "relerr"] {
                    header.push(',');
                    header.push_str(&format!("{}_{scope}_{norm}_{role}", field.name()));
                }
            }
        }
    }
    writeln!(w, "{header}").map_err(io_err)?;
    for s in &report.samples {
        let mut line = format!("{},{}", s.step, csv_float(s.time));
        for vi in 0..COMPARED_FIELDS.len() {
            for scope in 0..2 {
                for ki in 0..2 {
                    let c = if scope == 0 {
                        s.slice[vi][ki]
                    } else {
                        s.volume[vi][ki]
                    };
                    line.push(',');
                    line.push_str(&csv_float(c.outer_norm));
                    line.push(',');
                    line.push_str(&csv_float(c.inner_norm));
                    line.push(',');
                    line.push_str(&csv_float(c.relative_error));
                }
            }
        }
        writeln!(w, "{line}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Reconstruct one physical field on the horizontal plane at depth `z`.
pub fn extract_slice(
    state: &ModalState,
    z: f64,
    field: PhysicalField,
    grid: &Grid2D,
    params: &PhysicalParams,
) -> Result<Array2<f64>> {
    if !(-params.depth..=0.0).contains(&z) {
        return Err(Error::InvalidParameter(format!(
            "slice depth {z} outside [-{}, 0]",
            params.depth
        )));
    }
    state.slice_at_depth(field, z, grid, params)
}
