//! Boundary data: homogeneous conditions, trace recording and playback.
//!
//! A run needs one boundary value per inflow characteristic, per time level.
//! The outer run of a nested experiment uses the homogeneous provider (all
//! zeros). While it steps, it records the values of exactly those
//! characteristics along the edges of a node-aligned subrectangle; the inner
//! run then replays them, so the subdomain sees the host solution through its
//! boundary.
//!
//! The set of recorded keys per mode follows the characteristic structure:
//!
//! * mode `0`: `u` on the west and east edges (normal data for the pressure
//!   projection), `v` on the west edge (inflow tangential data) and on the
//!   south and north edges (normal data);
//! * subcritical modes: `xi` and `v` on the west edge, `eta` on the east
//!   edge, `alpha` on the north edge, `beta` on the south edge;
//! * supercritical modes: the same except `eta` enters from the west edge.
//!
//! A step from level `k` to `k + 1` consumes traces at level `k + 1`.

use std::collections::BTreeMap;

use crate::grid::Grid2D;
use crate::modes::{ModeKind, PhysicalParams};
use crate::state::ModalState;
use crate::{Error, Result};

/// Variable carried by a boundary trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TraceVariable {
    /// Zonal velocity amplitude (mode 0 only).
    U,
    /// Meridional velocity amplitude.
    V,
    /// Fast rightward characteristic `u - psi/N`.
    Xi,
    /// Slow characteristic `u + psi/N`.
    Eta,
    /// Northern meridional characteristic `v + psi/N`.
    Alpha,
    /// Southern meridional characteristic `v - psi/N`.
    Beta,
}

impl TraceVariable {
    pub fn name(self) -> &'static str {
        match self {
            TraceVariable::U => "u",
            TraceVariable::V => "v",
            TraceVariable::Xi => "xi",
            TraceVariable::Eta => "eta",
            TraceVariable::Alpha => "alpha",
            TraceVariable::Beta => "beta",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "u" => TraceVariable::U,
            "v" => TraceVariable::V,
            "xi" => TraceVariable::Xi,
            "eta" => TraceVariable::Eta,
            "alpha" => TraceVariable::Alpha,
            "beta" => TraceVariable::Beta,
            _ => return None,
        })
    }
}

/// Edge of the (sub)domain a trace lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TraceLine {
    West,
    East,
    South,
    North,
}

impl TraceLine {
    pub fn name(self) -> &'static str {
        match self {
            TraceLine::West => "west",
            TraceLine::East => "east",
            TraceLine::South => "south",
            TraceLine::North => "north",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "west" => TraceLine::West,
            "east" => TraceLine::East,
            "south" => TraceLine::South,
            "north" => TraceLine::North,
            _ => return None,
        })
    }
}

/// Identity of one trace: mode index, variable, edge.
pub type TraceKey = (usize, TraceVariable, TraceLine);

/// Node-aligned subrectangle of a host grid, in host node indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubRect {
    /// West edge node index.
    pub i0: usize,
    /// South edge node index.
    pub j0: usize,
    /// Intervals along x.
    pub i_count: usize,
    /// Intervals along y.
    pub j_count: usize,
}

impl SubRect {
    /// Check that the rectangle fits inside `outer` and is large enough to
    /// carry a grid.
    pub fn validate(&self, outer: &Grid2D) -> Result<()> {
        if self.i_count < 4 || self.j_count < 4 {
            return Err(Error::InvalidParameter(format!(
                "subdomain needs at least 4 intervals per direction, got {} x {}",
                self.i_count, self.j_count
            )));
        }
        if self.i0 + self.i_count > outer.i_count || self.j0 + self.j_count > outer.j_count {
            return Err(Error::InvalidParameter(format!(
                "subdomain [{}..{}] x [{}..{}] exceeds the host grid {} x {}",
                self.i0,
                self.i0 + self.i_count,
                self.j0,
                self.j0 + self.j_count,
                outer.i_count,
                outer.j_count
            )));
        }
        Ok(())
    }

    /// Grid of the subdomain: same spacings, restricted extent.
    pub fn inner_grid(&self, outer: &Grid2D) -> Result<Grid2D> {
        self.validate(outer)?;
        Ok(Grid2D {
            i_count: self.i_count,
            j_count: self.j_count,
            dx: outer.dx,
            dy: outer.dy,
        })
    }
}

/// The keys a run on `params` with `n_max` retained modes must provide.
pub fn required_keys(params: &PhysicalParams, n_max: usize) -> Vec<TraceKey> {
    let mut keys = vec![
        (0, TraceVariable::U, TraceLine::West),
        (0, TraceVariable::U, TraceLine::East),
        (0, TraceVariable::V, TraceLine::West),
        (0, TraceVariable::V, TraceLine::South),
        (0, TraceVariable::V, TraceLine::North),
    ];
    for n in 1..=n_max {
        keys.push((n, TraceVariable::Xi, TraceLine::West));
        keys.push((n, TraceVariable::V, TraceLine::West));
        let eta_line = match params.classify(n) {
            ModeKind::Subcritical => TraceLine::East,
            ModeKind::Supercritical => TraceLine::West,
            ModeKind::Barotropic => unreachable!("n >= 1"),
        };
        keys.push((n, TraceVariable::Eta, eta_line));
        keys.push((n, TraceVariable::Alpha, TraceLine::North));
        keys.push((n, TraceVariable::Beta, TraceLine::South));
    }
    keys
}

/// Recorded boundary traces of one run, level-by-level.
#[derive(Debug, Clone)]
pub struct TraceSet {
    /// Time step of the recording run.
    pub dt: f64,
    /// Node spacings of the recording grid.
    pub dx: f64,
    pub dy: f64,
    data: BTreeMap<TraceKey, Vec<Vec<f64>>>,
}

impl TraceSet {
    pub fn new(dt: f64, dx: f64, dy: f64) -> Self {
        TraceSet {
            dt,
            dx,
            dy,
            data: BTreeMap::new(),
        }
    }

    /// Append one time level of values for `key`.
    pub fn push(&mut self, key: TraceKey, values: Vec<f64>) {
        self.data.entry(key).or_default().push(values);
    }

    /// Install all levels of one key at once (deserialization path).
    pub fn insert_levels(&mut self, key: TraceKey, levels: Vec<Vec<f64>>) {
        self.data.insert(key, levels);
    }

    /// Number of recorded levels for `key`, if present.
    pub fn level_count(&self, key: &TraceKey) -> Option<usize> {
        self.data.get(key).map(|rows| rows.len())
    }

    /// One recorded line, if present.
    pub fn get(&self, key: &TraceKey, level: usize) -> Option<&[f64]> {
        self.data
            .get(key)
            .and_then(|rows| rows.get(level))
            .map(|r| r.as_slice())
    }

    /// Deterministic iteration over all traces.
    pub fn iter(&self) -> impl Iterator<Item = (&TraceKey, &Vec<Vec<f64>>)> {
        self.data.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// A playback run must use exactly the recording spacings and time step.
    pub fn check_compatible(&self, grid: &Grid2D, dt: f64) -> Result<()> {
        if self.dt != dt || self.dx != grid.dx || self.dy != grid.dy {
            return Err(Error::TraceMismatch(format!(
                "recorded at dt = {}, dx = {}, dy = {}; playback run uses dt = {}, dx = {}, dy = {}",
                self.dt, self.dx, self.dy, dt, grid.dx, grid.dy
            )));
        }
        Ok(())
    }
}

/// Extract the line of values for `key` along the edges of `rect` from a
/// host-state snapshot.
fn line_values(
    state: &ModalState,
    key: &TraceKey,
    rect: &SubRect,
    params: &PhysicalParams,
) -> Result<Vec<f64>> {
    let (mode, variable, line) = *key;
    let n_buoy = params.n_buoy;
    let i_lo = rect.i0;
    let i_hi = rect.i0 + rect.i_count;
    let j_lo = rect.j0;
    let j_hi = rect.j0 + rect.j_count;

    // Node walk along the requested edge, south-to-north or west-to-east.
    let nodes: Vec<(usize, usize)> = match line {
        TraceLine::West => (j_lo..=j_hi).map(|j| (j, i_lo)).collect(),
        TraceLine::East => (j_lo..=j_hi).map(|j| (j, i_hi)).collect(),
        TraceLine::South => (i_lo..=i_hi).map(|i| (j_lo, i)).collect(),
        TraceLine::North => (i_lo..=i_hi).map(|i| (j_hi, i)).collect(),
    };

    let values = match variable {
        TraceVariable::U => nodes.iter().map(|&(j, i)| state.u[mode][(j, i)]).collect(),
        TraceVariable::V => nodes.iter().map(|&(j, i)| state.v[mode][(j, i)]).collect(),
        TraceVariable::Xi => {
            let psi = state.psi_n(mode)?;
            nodes
                .iter()
                .map(|&(j, i)| state.u[mode][(j, i)] - psi[(j, i)] / n_buoy)
                .collect()
        }
        TraceVariable::Eta => {
            let psi = state.psi_n(mode)?;
            nodes
                .iter()
                .map(|&(j, i)| state.u[mode][(j, i)] + psi[(j, i)] / n_buoy)
                .collect()
        }
        TraceVariable::Alpha => {
            let psi = state.psi_n(mode)?;
            nodes
                .iter()
                .map(|&(j, i)| state.v[mode][(j, i)] + psi[(j, i)] / n_buoy)
                .collect()
        }
        TraceVariable::Beta => {
            let psi = state.psi_n(mode)?;
            nodes
                .iter()
                .map(|&(j, i)| state.v[mode][(j, i)] - psi[(j, i)] / n_buoy)
                .collect()
        }
    };
    Ok(values)
}

/// Record one time level of every required trace of `state` along `rect`.
pub fn record_level(
    traces: &mut TraceSet,
    state: &ModalState,
    rect: &SubRect,
    params: &PhysicalParams,
) -> Result<()> {
    for key in required_keys(params, state.n_max) {
        let values = line_values(state, &key, rect, params)?;
        traces.push(key, values);
    }
    Ok(())
}

/// Source of boundary values for a run.
pub enum BoundaryProvider {
    /// Homogeneous conditions: every inflow value is zero.
    Homogeneous,
    /// Values replayed from a recorded trace set.
    Playback(TraceSet),
}

impl BoundaryProvider {
    /// Boundary line for (`mode`, `variable`, `line`) at time level `step`.
    pub fn provide(
        &self,
        step: usize,
        mode: usize,
        variable: TraceVariable,
        line: TraceLine,
        expected_len: usize,
    ) -> Result<Vec<f64>> {
        match self {
            BoundaryProvider::Homogeneous => Ok(vec![0.0; expected_len]),
            BoundaryProvider::Playback(traces) => {
                let key = (mode, variable, line);
                let missing = || Error::MissingTrace {
                    step,
                    mode,
                    variable: variable.name().to_string(),
                    line: line.name().to_string(),
                };
                let row = traces.get(&key, step).ok_or_else(missing)?;
                if row.len() != expected_len {
                    return Err(Error::TraceMismatch(format!(
                        "trace {}@{} for mode {mode} has {} nodes, run expects {expected_len}",
                        variable.name(),
                        line.name(),
                        row.len()
                    )));
                }
                Ok(row.to_vec())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> PhysicalParams {
        PhysicalParams::new(20.0, 1e-4, 1e-2, 1e4).unwrap()
    }

    #[test]
    fn schema_follows_the_regimes() {
        let p = params();
        let keys = required_keys(&p, 2);
        assert_eq!(keys.len(), 5 + 2 * 5);
        assert!(
            keys.contains(&(1, TraceVariable::Eta, TraceLine::East)),
            "mode 1 subcritical"
        );
        assert!(
            keys.contains(&(2, TraceVariable::Eta, TraceLine::West)),
            "mode 2 supercritical"
        );
        assert!(keys.contains(&(0, TraceVariable::U, TraceLine::East)));
        assert!(!keys.contains(&(0, TraceVariable::U, TraceLine::South)));
    }

    #[test]
    fn record_then_playback_round_trip() {
        let grid = Grid2D::new(1e6, 5e5, 10, 8).unwrap();
        let p = params();
        let mut state = ModalState::zeros(&grid, 2);
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                state.u[1][(j, i)] = (i + 10 * j) as f64;
                state.v[1][(j, i)] = -(i as f64);
                state.psi[0][(j, i)] = 0.01 * (j as f64);
            }
        }
        let rect = SubRect {
            i0: 2,
            j0: 1,
            i_count: 5,
            j_count: 4,
        };
        let mut traces = TraceSet::new(31.25, grid.dx, grid.dy);
        record_level(&mut traces, &state, &rect, &p).unwrap();
        record_level(&mut traces, &state, &rect, &p).unwrap();

        let provider = BoundaryProvider::Playback(traces);
        // xi on the west edge: u - psi/N at i = 2, j = 1..=5.
        let xi = provider
            .provide(1, 1, TraceVariable::Xi, TraceLine::West, 5)
            .unwrap();
        for (offset, value) in xi.iter().enumerate() {
            let j = 1 + offset;
            let want = (2 + 10 * j) as f64 - 0.01 * (j as f64) / p.n_buoy;
            assert!((value - want).abs() < 1e-12);
        }
        // beta on the south edge: v - psi/N at j = 1.
        let beta = provider
            .provide(0, 1, TraceVariable::Beta, TraceLine::South, 6)
            .unwrap();
        for (offset, value) in beta.iter().enumerate() {
            let i = 2 + offset;
            let want = -(i as f64) - 0.01 / p.n_buoy;
            assert!((value - want).abs() < 1e-12);
        }
    }

    #[test]
    fn playback_misses_are_hard_errors() {
        let traces = TraceSet::new(1.0, 1.0, 1.0);
        let provider = BoundaryProvider::Playback(traces);
        match provider.provide(3, 1, TraceVariable::Xi, TraceLine::West, 4) {
            Err(Error::MissingTrace { step, mode, .. }) => {
                assert_eq!((step, mode), (3, 1));
            }
            other => panic!("expected MissingTrace, got {other:?}"),
        }

        // Present key, exhausted levels.
        let mut traces = TraceSet::new(1.0, 1.0, 1.0);
        traces.push((1, TraceVariable::Xi, TraceLine::West), vec![0.0; 4]);
        let provider = BoundaryProvider::Playback(traces);
        assert!(provider
            .provide(1, 1, TraceVariable::Xi, TraceLine::West, 4)
            .is_err());

        // Wrong line length.
        let mut traces = TraceSet::new(1.0, 1.0, 1.0);
        traces.push((1, TraceVariable::Xi, TraceLine::West), vec![0.0; 4]);
        let provider = BoundaryProvider::Playback(traces);
        match provider.provide(0, 1, TraceVariable::Xi, TraceLine::West, 9) {
            Err(Error::TraceMismatch(_)) => {}
            other => panic!("expected TraceMismatch, got {other:?}"),
        }
    }

    #[test]
    fn homogeneous_provider_returns_zeros() {
        let provider = BoundaryProvider::Homogeneous;
        let line = provider
            .provide(7, 3, TraceVariable::Alpha, TraceLine::North, 11)
            .unwrap();
        assert_eq!(line.len(), 11);
        assert!(line.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn subrect_validation() {
        let grid = Grid2D::new(1.0, 1.0, 10, 10).unwrap();
        assert!(SubRect {
            i0: 2,
            j0: 2,
            i_count: 5,
            j_count: 5
        }
        .validate(&grid)
        .is_ok());
        assert!(SubRect {
            i0: 2,
            j0: 2,
            i_count: 9,
            j_count: 5
        }
        .validate(&grid)
        .is_err());
        assert!(SubRect {
            i0: 0,
            j0: 0,
            i_count: 3,
            j_count: 5
        }
        .validate(&grid)
        .is_err());
        let inner = SubRect {
            i0: 1,
            j0: 1,
            i_count: 8,
            j_count: 4,
        }
        .inner_grid(&grid)
        .unwrap();
        assert_eq!(inner.dx, grid.dx);
        assert_eq!(inner.nx(), 9);
    }

    #[test]
    fn incompatible_spacing_is_rejected() {
        let grid = Grid2D::new(1.0, 1.0, 10, 10).unwrap();
        let traces = TraceSet::new(0.5, grid.dx, grid.dy);
        assert!(traces.check_compatible(&grid, 0.5).is_ok());
        assert!(traces.check_compatible(&grid, 0.25).is_err());
        let other = Grid2D::new(2.0, 1.0, 10, 10).unwrap();
        assert!(traces.check_compatible(&other, 0.5).is_err());
    }
}
