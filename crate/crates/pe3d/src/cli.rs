//! Command-line driver.
//!
//! Exit codes: `0` success, `2` configuration or usage problems, `3` a run
//! that blew up, `1` anything else.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::boundary::{BoundaryProvider, SubRect};
use crate::io::extract_slice;
use crate::io::{
    default_config, parse_config, read_state_snapshots, render_config, snapshot_steps,
    write_level_series, write_norm_series, write_report, write_snapshot, write_state_snapshots,
};
use crate::nesting::{
    compare_states, restrict_state, run_nested_experiment, run_simulation, stability_diagnostic,
    ComparisonReport, RunConfig, Trajectory, COMPARISON_DEPTH,
};
use crate::state::PhysicalField;
use crate::{Error, Result};

#[derive(Parser)]
#[command(
    name = "pe3d",
    version,
    about = "Vertical-mode solver for the 3D inviscid primitive equations on a channel"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation with homogeneous boundary values.
    Run {
        /// Configuration file (key = value); defaults are built in.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Artifact directory.
        #[arg(long)]
        out: PathBuf,
        /// Override the sample cadence from the config.
        #[arg(long)]
        cadence: Option<usize>,
    },
    /// Run the full nested experiment: host run with trace recording, guest
    /// run with playback, guest control run, comparison report.
    Nest {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        cadence: Option<usize>,
        /// Guest rectangle in host node indices: west,east,south,north.
        #[arg(long)]
        inner: Option<String>,
    },
    /// Recompute a comparison report from two artifact directories.
    Compare {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Host artifact directory.
        #[arg(long)]
        outer: PathBuf,
        /// Guest artifact directory.
        #[arg(long)]
        inner: PathBuf,
        /// Output report path.
        #[arg(long, default_value = "report.csv")]
        out: PathBuf,
    },
    /// Print the vertical-mode table: eigenvalues, wave speeds, regimes.
    Modes {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Emit one horizontal slice as a contour-ready grid file.
    Slice {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Artifact directory to slice; omitted = built-in initial state.
        #[arg(long)]
        dir: Option<PathBuf>,
        /// Sample step to slice; omitted = the last one available.
        #[arg(long)]
        step: Option<usize>,
        /// Depth of the slice plane in meters (non-positive).
        #[arg(long, default_value_t = COMPARISON_DEPTH, allow_hyphen_values = true)]
        depth: f64,
        /// Variable: u, v, w, psi or phi.
        #[arg(long, default_value = "u")]
        var: String,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parse and dispatch; returns the process exit code.
pub fn run_cli() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. }
        | Error::InvalidParameter(_)
        | Error::Malformed { .. }
        | Error::GridTooCoarse { .. }
        | Error::ResonantStratification { .. } => 2,
        Error::BlowUp { .. } => 3,
        _ => 1,
    }
}

fn load_config(
    path: Option<&Path>,
    cadence: Option<usize>,
    inner: Option<&str>,
) -> Result<(RunConfig, SubRect)> {
    let (mut config, mut rect) = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            parse_config(&text)?
        }
        None => default_config(),
    };
    if let Some(c) = cadence {
        config.cadence = c;
        config.validate()?;
    }
    if let Some(spec) = inner {
        rect = parse_inner_spec(spec)?;
    }
    Ok((config, rect))
}

fn parse_inner_spec(spec: &str) -> Result<SubRect> {
    let parts = spec
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<usize>, _>>()
        .map_err(|_| {
            Error::InvalidParameter(format!(
                "--inner expects four node indices west,east,south,north, got `{spec}`"
            ))
        })?;
    if parts.len() != 4 || parts[1] <= parts[0] || parts[3] <= parts[2] {
        return Err(Error::InvalidParameter(
            "--inner needs west < east and south < north node indices".into(),
        ));
    }
    Ok(SubRect {
        i0: parts[0],
        j0: parts[2],
        i_count: parts[1] - parts[0],
        j_count: parts[3] - parts[2],
    })
}

fn print_stability(config: &RunConfig) {
    let d = stability_diagnostic(&config.grid, config.time.dt);
    println!(
        "stability diagnostic: dt = {} s, dt/(dx^2+dy^2)^2 = {:e}, bound dt <= {}: {}",
        d.dt,
        d.ratio,
        d.dt_bound,
        if d.within_bound {
            "satisfied"
        } else {
            "not satisfied (reported only)"
        }
    );
}

/// Per-run artifacts shared by `run` and both `nest` stages.
fn write_run_artifacts(dir: &Path, dt: f64, traj: &Trajectory) -> Result<()> {
    write_norm_series(&dir.join("norms.csv"), &traj.norm_series)?;
    write_level_series(
        &dir.join("divergence.csv"),
        dt,
        &[
            ("mean_abs_divergence", &traj.divergence_mean),
            ("max_abs_divergence", &traj.divergence_max),
        ],
    )
}

fn cmd_run(config: &RunConfig, rect: &SubRect, out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    fs::write(out.join("config.txt"), render_config(config, rect))
        .map_err(|e| Error::io(out, e))?;
    print_stability(config);
    let initial = config.initial_state()?;
    let grid = config.grid.clone();
    let traj = run_simulation(
        config,
        &BoundaryProvider::Homogeneous,
        initial,
        None,
        None,
        |step, time, state| write_state_snapshots(out, step, time, state, &grid),
    )?;
    write_run_artifacts(out, config.time.dt, &traj)?;
    println!(
        "run finished: {} steps, final mean |div| = {:e}",
        config.time.step_count,
        traj.divergence_mean.last().copied().unwrap_or(0.0)
    );
    println!("artifacts in {}", out.display());
    Ok(())
}

fn cmd_nest(config: &RunConfig, rect: &SubRect, out: &Path) -> Result<()> {
    let outer_dir = out.join("outer");
    let inner_dir = out.join("inner");
    fs::create_dir_all(&outer_dir).map_err(|e| Error::io(&outer_dir, e))?;
    fs::create_dir_all(&inner_dir).map_err(|e| Error::io(&inner_dir, e))?;
    fs::write(out.join("config.txt"), render_config(config, rect))
        .map_err(|e| Error::io(out, e))?;
    print_stability(config);
    let initial = config.initial_state()?;
    let outer_grid = config.grid.clone();
    let inner_grid = rect.inner_grid(&config.grid)?;
    let exp = run_nested_experiment(
        config,
        rect,
        initial,
        |step, time, state| write_state_snapshots(&outer_dir, step, time, state, &outer_grid),
        |step, time, state| write_state_snapshots(&inner_dir, step, time, state, &inner_grid),
    )?;
    write_run_artifacts(&outer_dir, config.time.dt, &exp.outer)?;
    write_run_artifacts(&inner_dir, config.time.dt, &exp.inner_nested)?;
    write_report(&out.join("report.csv"), &exp.report)?;
    write_level_series(
        &out.join("divergence.csv"),
        config.time.dt,
        &[
            ("mean_abs_divergence_outer", &exp.report.divergence_outer),
            (
                "mean_abs_divergence_inner_direct",
                &exp.report.divergence_inner_direct,
            ),
            (
                "mean_abs_divergence_inner_nested",
                &exp.report.divergence_inner_nested,
            ),
        ],
    )?;
    if let Some(sample) = exp.report.samples.last() {
        // Report order: u, v, w, psi, phi; norms [L2, Linf].
        let names = ["u", "v", "w", "psi", "phi"];
        print!("final relative errors (slice L2):");
        for (vi, name) in names.iter().enumerate() {
            print!(" {name}={:.3e}", sample.slice[vi][0].relative_error);
        }
        println!();
    }
    println!("artifacts in {}", out.display());
    Ok(())
}

fn cmd_compare(
    config: &RunConfig,
    rect: &SubRect,
    outer: &Path,
    inner: &Path,
    out: &Path,
) -> Result<()> {
    let outer_steps = snapshot_steps(outer)?;
    let inner_steps = snapshot_steps(inner)?;
    let common: Vec<usize> = outer_steps
        .iter()
        .copied()
        .filter(|s| inner_steps.contains(s))
        .collect();
    if common.is_empty() {
        return Err(Error::InvalidParameter(
            "the two artifact directories share no sample steps".into(),
        ));
    }
    let mut samples = Vec::with_capacity(common.len());
    for step in common {
        let (outer_state, outer_grid, time) = read_state_snapshots(outer, step)?;
        let (inner_state, inner_grid, _) = read_state_snapshots(inner, step)?;
        let restricted = if outer_grid == inner_grid {
            outer_state
        } else {
            let expect = rect.inner_grid(&outer_grid)?;
            if expect != inner_grid {
                return Err(Error::InvalidParameter(format!(
                    "guest grid {} x {} does not match the configured rectangle {} x {}",
                    inner_grid.i_count, inner_grid.j_count, expect.i_count, expect.j_count
                )));
            }
            restrict_state(&outer_state, rect)
        };
        samples.push(compare_states(
            &restricted,
            &inner_state,
            &inner_grid,
            &config.params,
            config.levels,
            step,
            time,
        )?);
    }
    let report = ComparisonReport {
        depth: COMPARISON_DEPTH,
        samples,
        divergence_outer: Vec::new(),
        divergence_inner_direct: Vec::new(),
        divergence_inner_nested: Vec::new(),
    };
    write_report(out, &report)?;
    println!("report written to {}", out.display());
    Ok(())
}

#[allow(clippy::print_literal)] // headers share the data rows' format string for alignment
fn cmd_modes(config: &RunConfig) -> Result<()> {
    let p = &config.params;
    println!(
        "{:>4}  {:>12}  {:>12}  {:>12}  {}",
        "mode", "lambda", "fast speed", "slow speed", "regime"
    );
    println!(
        "{:>4}  {:>12}  {:>12.6}  {:>12.6}  {}",
        0, "-", p.u0, p.u0, "barotropic"
    );
    for n in 1..=config.n_max {
        let lam = p.lambda(n);
        let gravity = p.n_buoy / lam;
        let kind = p.classify(n);
        println!(
            "{n:>4}  {:>12.6e}  {:>12.6}  {:>12.6}  {:?}",
            lam,
            p.u0 + gravity,
            p.u0 - gravity,
            kind
        );
    }
    println!("critical index: {}", p.critical_index());
    Ok(())
}

fn cmd_slice(
    config: &RunConfig,
    dir: Option<&Path>,
    step: Option<usize>,
    depth: f64,
    var: &str,
    out: &Path,
) -> Result<()> {
    let field = PhysicalField::parse(var).ok_or_else(|| {
        Error::InvalidParameter(format!("unknown variable `{var}` (use u, v, w, psi, phi)"))
    })?;
    let (state, grid, time) = match dir {
        Some(d) => {
            let step = match step {
                Some(s) => s,
                None => *snapshot_steps(d)?.last().ok_or_else(|| {
                    Error::InvalidParameter(format!("no snapshots in {}", d.display()))
                })?,
            };
            read_state_snapshots(d, step)?
        }
        None => (config.initial_state()?, config.grid.clone(), 0.0),
    };
    let slice = extract_slice(&state, depth, field, &grid, &config.params)?;
    write_snapshot(out, &format!("{var}_z{depth}"), time, &grid, &slice)?;
    println!("slice written to {}", out.display());
    Ok(())
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run {
            config,
            out,
            cadence,
        } => {
            let (cfg, rect) = load_config(config.as_deref(), cadence, None)?;
            cmd_run(&cfg, &rect, &out)
        }
        Command::Nest {
            config,
            out,
            cadence,
            inner,
        } => {
            let (cfg, rect) = load_config(config.as_deref(), cadence, inner.as_deref())?;
            cmd_nest(&cfg, &rect, &out)
        }
        Command::Compare {
            config,
            outer,
            inner,
            out,
        } => {
            let (cfg, rect) = load_config(config.as_deref(), None, None)?;
            cmd_compare(&cfg, &rect, &outer, &inner, &out)
        }
        Command::Modes { config } => {
            let (cfg, _) = load_config(config.as_deref(), None, None)?;
            cmd_modes(&cfg)
        }
        Command::Slice {
            config,
            dir,
            step,
            depth,
            var,
            out,
        } => {
            let (cfg, _) = load_config(config.as_deref(), None, None)?;
            cmd_slice(&cfg, dir.as_deref(), step, depth, &var, &out)
        }
    }
}
