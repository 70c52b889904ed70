//! Domain-wall construction, tracking and current-driven runs.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{MagGrid, StripGeometry};
use super::llg::{Dynamics, LlgConfig, LlgSolver};
use super::material::MaterialParams;
use super::MagneticsError;
use crate::numerics::{fit_line, levenberg_marquardt, LmOptions};

/// Writes a chiral Néel wall centred at `x0` (measured from the left edge of the free
/// region): `mz = -tanh((x - x0) / Δ)`, core moment along `sign(D) x̂`. Pinned cells are
/// left as they are.
pub fn init_neel_wall(grid: &mut MagGrid, params: &MaterialParams, x0: f64) -> Result<(), MagneticsError> {
    if params.keff() <= 0.0 {
        return Err(MagneticsError::NoPerpendicularAnisotropy { keff: params.keff() });
    }
    let l_free = grid.free_length();
    if !(0.0..=l_free).contains(&x0) {
        return Err(MagneticsError::PositionOutOfRange { x: x0, max: l_free });
    }
    let delta = params.wall_width();
    let chirality = if params.d_dmi < 0.0 { -1.0 } else { 1.0 };
    let xc = grid.free_origin() + x0;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = grid.idx(i, j);
            if grid.pinned[k] {
                continue;
            }
            let u = (grid.x_center(i) - xc) / delta;
            let m = [chirality / u.cosh(), 0.0, -u.tanh()];
            grid.m[k] = crate::vec3::normalize(m);
        }
    }
    Ok(())
}

/// Wall position from the left edge of the free region: linear interpolation of the zero
/// crossing of the width-averaged mz, clamped to `[0, L_free]`.
pub fn dw_position(grid: &MagGrid) -> Result<f64, MagneticsError> {
    let mz = grid.column_mz();
    let mut crossings = Vec::new();
    for i in 0..mz.len().saturating_sub(1) {
        let (a, b) = (mz[i], mz[i + 1]);
        if (a >= 0.0) != (b >= 0.0) {
            let frac = a / (a - b);
            crossings.push(grid.x_center(i) + frac * grid.cell[0]);
        }
    }
    match crossings.len() {
        0 => Err(MagneticsError::NoWall),
        1 => Ok((crossings[0] - grid.free_origin()).clamp(0.0, grid.free_length())),
        n => Err(MagneticsError::MultipleWalls(n)),
    }
}

/// In-plane angle of the wall core (rad, `atan2(my, mx)`) at the centre row, taken at the
/// free cell with the smallest |mz|.
pub fn wall_core_angle(grid: &MagGrid) -> f64 {
    let j = grid.ny / 2;
    let row = grid.row(j);
    let (i, _) = row
        .iter()
        .enumerate()
        .filter(|(i, _)| !grid.pinned[grid.idx(*i, j)])
        .min_by(|a, b| a.1[2].abs().total_cmp(&b.1[2].abs()))
        .expect("free region is non-empty");
    row[i][1].atan2(row[i][0])
}

/// Fits `mz = -A tanh((x - xc) / Δ)` to the centre row of the free region and returns Δ.
///
/// The amplitude `A` absorbs the edge canting present in narrow strips.
pub fn fit_wall_width(grid: &MagGrid, params: &MaterialParams) -> Result<f64, MagneticsError> {
    let x_guess = dw_position(grid)? + grid.free_origin();
    let j = grid.ny / 2;
    let (xs, ys): (Vec<f64>, Vec<f64>) = (0..grid.nx)
        .filter(|&i| !grid.pinned[grid.idx(i, j)])
        .map(|i| (grid.x_center(i), grid.m[grid.idx(i, j)][2]))
        .unzip();
    let d0 = params.wall_width();
    // Work in units of the analytic width for conditioning.
    let res = levenberg_marquardt(
        |p| {
            xs.iter()
                .zip(&ys)
                .map(|(x, y)| -p[0] * ((x / d0 - p[1]) / p[2]).tanh() - y)
                .collect()
        },
        &[1.0, x_guess / d0, 1.0],
        LmOptions::default(),
    );
    let delta = res.params[2].abs() * d0;
    if !delta.is_finite() {
        return Err(MagneticsError::NoWall);
    }
    Ok(delta)
}

/// Time series of wall position.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DwTrace {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
}

impl DwTrace {
    fn from_samples(times: Vec<f64>, positions: Vec<f64>) -> Self {
        let n = times.len();
        let mut velocities = vec![0.0; n];
        if n >= 2 {
            for (i, v) in velocities.iter_mut().enumerate() {
                let (a, b) = if i == 0 {
                    (0, 1)
                } else if i == n - 1 {
                    (n - 2, n - 1)
                } else {
                    (i - 1, i + 1)
                };
                *v = (positions[b] - positions[a]) / (times[b] - times[a]);
            }
        }
        Self {
            times,
            positions,
            velocities,
        }
    }

    pub fn final_position(&self) -> f64 {
        self.positions.last().copied().unwrap_or(0.0)
    }

    pub fn initial_position(&self) -> f64 {
        self.positions.first().copied().unwrap_or(0.0)
    }

    /// CSV with header `t_s,x_m,v_mps`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t_s", "x_m", "v_mps"])?;
        for ((t, x), v) in self.times.iter().zip(&self.positions).zip(&self.velocities) {
            wr.write_record([t.to_string(), x.to_string(), v.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DwRunOptions {
    /// Initial wall centre from the left free edge (m).
    pub x0: f64,
    /// Sampling cadence of the trace (s).
    pub sample_interval: f64,
    /// Damping-only steps applied to the initial wall before the current is switched on.
    pub relax_steps: usize,
    pub llg: LlgConfig,
}

impl Default for DwRunOptions {
    fn default() -> Self {
        Self {
            x0: 0.0,
            sample_interval: 10e-12,
            relax_steps: 4000,
            llg: LlgConfig::default(),
        }
    }
}

/// A relaxed strip with a wall, ready to be driven.
#[derive(Debug, Clone)]
pub struct DwRun {
    pub grid: MagGrid,
    pub params: MaterialParams,
    solver: LlgSolver,
}

impl DwRun {
    pub fn new(geom: &StripGeometry, params: &MaterialParams, opts: &DwRunOptions) -> Result<Self, MagneticsError> {
        params.validate()?;
        let mut grid = MagGrid::strip(geom)?;
        init_neel_wall(&mut grid, params, opts.x0)?;
        let mut solver = LlgSolver::new(opts.llg, &grid);
        if opts.relax_steps > 0 {
            solver.relax(&mut grid, params, opts.relax_steps, 1e-9)?;
        }
        Ok(Self {
            grid,
            params: *params,
            solver,
        })
    }

    /// Drives current density `j` for `duration`, sampling the wall every `sample_interval`.
    pub fn drive(&mut self, j: f64, duration: f64, sample_interval: f64) -> Result<DwTrace, MagneticsError> {
        if !j.is_finite() {
            return Err(MagneticsError::NonFiniteCurrent);
        }
        if !(duration > 0.0) {
            return Err(MagneticsError::InvalidParameter(format!(
                "duration must be positive, got {duration}"
            )));
        }
        let dt = self.solver.config.dt;
        let steps = (duration / dt).round().max(1.0) as usize;
        let every = ((sample_interval / dt).round() as usize).max(1);
        let mut times = vec![0.0];
        let mut positions = vec![dw_position(&self.grid)?];
        for s in 1..=steps {
            self.solver.step(&mut self.grid, &self.params, j, Dynamics::Full)?;
            if s % every == 0 || s == steps {
                times.push(s as f64 * dt);
                positions.push(dw_position(&self.grid)?);
            }
        }
        Ok(DwTrace::from_samples(times, positions))
    }
}

/// Runs a write pulse of `i_write` (A) through the heavy metal for `duration` (s) and
/// returns the wall trajectory.
pub fn run_dw(
    geom: &StripGeometry,
    params: &MaterialParams,
    i_write: f64,
    duration: f64,
    opts: &DwRunOptions,
) -> Result<DwTrace, MagneticsError> {
    if !i_write.is_finite() {
        return Err(MagneticsError::NonFiniteCurrent);
    }
    if !(duration > 0.0) {
        return Err(MagneticsError::InvalidParameter(format!(
            "duration must be positive, got {duration}"
        )));
    }
    let mut run = DwRun::new(geom, params, opts)?;
    let j = params.current_density(i_write, geom.width);
    run.drive(j, duration, opts.sample_interval)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepOptions {
    pub run: DwRunOptions,
    /// Drive duration per current density (s).
    pub duration: f64,
    /// Initial part of each trace discarded before fitting the steady velocity (s).
    pub transient: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            run: DwRunOptions {
                x0: 100e-9,
                ..Default::default()
            },
            duration: 0.5e-9,
            transient: 0.15e-9,
        }
    }
}

/// Steady wall velocity for each current density in `j_list` (A/m², ascending).
pub fn velocity_sweep(
    params: &MaterialParams,
    geom: &StripGeometry,
    j_list: &[f64],
    opts: &SweepOptions,
) -> Result<Vec<(f64, f64)>, MagneticsError> {
    if j_list.windows(2).any(|w| w[1] < w[0]) {
        return Err(MagneticsError::InvalidParameter(
            "current densities must be sorted ascending".into(),
        ));
    }
    let margin = 2.0 * params.wall_width();
    let l_free = geom.free_length;
    j_list
        .par_iter()
        .map(|&j| {
            if j == 0.0 {
                // No drive: the relaxed wall is stationary.
                return Ok((j, 0.0));
            }
            let mut run = DwRun::new(geom, params, &opts.run)?;
            let trace = run.drive(j, opts.duration, opts.run.sample_interval)?;
            let (ts, xs): (Vec<f64>, Vec<f64>) = trace
                .times
                .iter()
                .zip(&trace.positions)
                .filter(|(t, x)| **t >= opts.transient && **x > margin && **x < l_free - margin)
                .map(|(t, x)| (*t, *x))
                .unzip();
            let fit = fit_line(&ts, &xs).ok_or(MagneticsError::SweepUnresolved { j })?;
            Ok((j, fit.slope))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strip() -> MagGrid {
        MagGrid::strip(&StripGeometry::default()).unwrap()
    }

    #[test]
    fn init_is_normalized_and_locates() {
        let p = MaterialParams::default();
        let mut g = strip();
        init_neel_wall(&mut g, &p, 60e-9).unwrap();
        assert!(g.max_norm_error() <= 1e-9);
        let x = dw_position(&g).unwrap();
        assert!((x - 60e-9).abs() <= g.cell[0], "{x}");
    }

    #[test]
    fn chirality_follows_sign_of_d() {
        let p = MaterialParams::default();
        let mut a = strip();
        init_neel_wall(&mut a, &p, 60e-9).unwrap();
        let q = MaterialParams { d_dmi: -p.d_dmi, ..p };
        let mut b = strip();
        init_neel_wall(&mut b, &q, 60e-9).unwrap();
        for k in 0..a.m.len() {
            assert_eq!(a.m[k][2], b.m[k][2]);
            assert_eq!(a.m[k][0], -b.m[k][0]);
        }
    }

    #[test]
    fn init_errors() {
        let p = MaterialParams::default();
        let mut g = strip();
        assert!(matches!(
            init_neel_wall(&mut g, &p, 200e-9),
            Err(MagneticsError::PositionOutOfRange { .. })
        ));
        let bad = MaterialParams { ku2: 1e5, ..p };
        assert!(matches!(
            init_neel_wall(&mut g, &bad, 10e-9),
            Err(MagneticsError::NoPerpendicularAnisotropy { .. })
        ));
    }

    #[test]
    fn uniform_state_has_no_wall() {
        let g = MagGrid::uniform(30, 5, [4e-9, 4e-9, 0.6e-9], [0.0, 0.0, 1.0]);
        assert!(matches!(dw_position(&g), Err(MagneticsError::NoWall)));
    }

    #[test]
    fn two_walls_detected() {
        let mut g = MagGrid::uniform(30, 2, [4e-9, 4e-9, 0.6e-9], [0.0, 0.0, 1.0]);
        for j in 0..2 {
            for i in 10..20 {
                let k = g.idx(i, j);
                g.m[k] = [0.0, 0.0, -1.0];
            }
        }
        assert!(matches!(dw_position(&g), Err(MagneticsError::MultipleWalls(2))));
    }

    #[test]
    fn trace_csv_header() {
        let t = DwTrace::from_samples(vec![0.0, 1e-12, 2e-12], vec![0.0, 1e-9, 2e-9]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("t_s,x_m,v_mps\n"));
        assert_eq!(s.lines().count(), 4);
        assert!((t.velocities[1] - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn run_rejects_bad_inputs() {
        let p = MaterialParams::default();
        let g = StripGeometry::default();
        let o = DwRunOptions::default();
        assert!(matches!(
            run_dw(&g, &p, f64::NAN, 1e-9, &o),
            Err(MagneticsError::NonFiniteCurrent)
        ));
        assert!(run_dw(&g, &p, 1e-6, 0.0, &o).is_err());
    }

    #[test]
    fn unsorted_sweep_rejected() {
        let p = MaterialParams::default();
        let g = StripGeometry::default();
        assert!(velocity_sweep(&p, &g, &[1e11, 0.0], &SweepOptions::default()).is_err());
    }
}
