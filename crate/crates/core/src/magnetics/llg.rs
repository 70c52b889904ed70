//! Heun integration of the Landau-Lifshitz-Gilbert equation with a damping-like
//! spin-Hall torque, written in explicit Landau-Lifshitz form.

use serde::{Deserialize, Serialize};

use super::field::effective_field_into;
use super::grid::MagGrid;
use super::material::MaterialParams;
use super::MagneticsError;
use crate::vec3::{self, Vec3};

/// Integrator settings shared by every run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LlgConfig {
    /// Fixed time step (s).
    pub dt: f64,
    /// Spin polarization direction of the spin-Hall current for positive J.
    pub polarization: Vec3,
    /// Uniform applied field (A/m).
    pub h_ext: Vec3,
    /// Largest rotation any cell may undergo in one accepted step (rad).
    pub max_step_angle: f64,
}

impl Default for LlgConfig {
    fn default() -> Self {
        Self {
            dt: 50e-15,
            // Left-handed walls then move along the charge current.
            polarization: [0.0, -1.0, 0.0],
            h_ext: [0.0; 3],
            max_step_angle: 0.1,
        }
    }
}

/// Which torques enter the right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dynamics {
    /// Full LLG with precession, damping and spin-orbit torque.
    Full,
    /// Damping only, for energy relaxation.
    Relax,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    /// Largest per-cell rotation in the step (rad).
    pub max_angle: f64,
}

/// Reusable work buffers for stepping one grid.
#[derive(Debug, Clone)]
pub struct LlgSolver {
    pub config: LlgConfig,
    h: Vec<Vec3>,
    k1: Vec<Vec3>,
    k2: Vec<Vec3>,
    mid: Vec<Vec3>,
    next: Vec<Vec3>,
}

#[inline]
fn rhs(m: Vec3, h: Vec3, gamma: f64, alpha: f64, sot: f64, p: Vec3, dynamics: Dynamics) -> Vec3 {
    // T = -gamma m x H + gamma beta m x (p x m);  dm/dt = (T + alpha m x T) / (1 + alpha^2)
    let mut t = vec3::scale(vec3::cross(m, h), -gamma);
    if sot != 0.0 {
        t = vec3::axpy(t, sot, vec3::cross(m, vec3::cross(p, m)));
    }
    let damp = vec3::scale(vec3::cross(m, t), alpha);
    let inv = 1.0 / (1.0 + alpha * alpha);
    match dynamics {
        Dynamics::Full => vec3::scale(vec3::add(t, damp), inv),
        Dynamics::Relax => vec3::scale(damp, inv),
    }
}

impl LlgSolver {
    pub fn new(config: LlgConfig, grid: &MagGrid) -> Self {
        let n = grid.m.len();
        Self {
            config,
            h: vec![[0.0; 3]; n],
            k1: vec![[0.0; 3]; n],
            k2: vec![[0.0; 3]; n],
            mid: vec![[0.0; 3]; n],
            next: vec![[0.0; 3]; n],
        }
    }

    fn eval(&mut self, grid: &MagGrid, params: &MaterialParams, j: f64, dynamics: Dynamics, second: bool) {
        let gamma = params.gamma();
        let alpha = params.alpha;
        let sot = gamma * params.spin_hall_field(j);
        let p = vec3::normalize(self.config.polarization);
        let src = if second { &self.mid } else { &grid.m };
        effective_field_into(grid, src, params, self.config.h_ext, &mut self.h);
        let out = if second { &mut self.k2 } else { &mut self.k1 };
        for (k, o) in out.iter_mut().enumerate() {
            *o = if grid.pinned[k] {
                [0.0; 3]
            } else {
                rhs(src[k], self.h[k], gamma, alpha, sot, p, dynamics)
            };
        }
    }

    /// One Heun step at current density `j` (A/m²). The grid is left untouched if any cell
    /// would rotate by more than `max_step_angle`.
    pub fn step(
        &mut self,
        grid: &mut MagGrid,
        params: &MaterialParams,
        j: f64,
        dynamics: Dynamics,
    ) -> Result<StepStats, MagneticsError> {
        let dt = self.config.dt;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(MagneticsError::InvalidParameter(format!(
                "dt must be positive, got {dt}"
            )));
        }
        if !j.is_finite() {
            return Err(MagneticsError::NonFiniteCurrent);
        }
        self.eval(grid, params, j, dynamics, false);
        for k in 0..grid.m.len() {
            self.mid[k] = vec3::normalize(vec3::axpy(grid.m[k], dt, self.k1[k]));
        }
        self.eval(grid, params, j, dynamics, true);

        let mut max_angle: f64 = 0.0;
        for k in 0..grid.m.len() {
            let m = grid.m[k];
            let n = if grid.pinned[k] {
                m
            } else {
                vec3::normalize(vec3::axpy(m, 0.5 * dt, vec3::add(self.k1[k], self.k2[k])))
            };
            max_angle = max_angle.max(vec3::angle_between(m, n));
            self.next[k] = n;
        }
        if !max_angle.is_finite() || max_angle > self.config.max_step_angle {
            return Err(MagneticsError::StepTooLarge {
                dt,
                max_angle,
                cap: self.config.max_step_angle,
            });
        }
        grid.m.copy_from_slice(&self.next);
        Ok(StepStats { max_angle })
    }

    /// Runs damping-only steps until the largest per-step rotation drops below `tol` rad
    /// or `max_steps` is reached. Returns the number of steps taken.
    pub fn relax(
        &mut self,
        grid: &mut MagGrid,
        params: &MaterialParams,
        max_steps: usize,
        tol: f64,
    ) -> Result<usize, MagneticsError> {
        for n in 0..max_steps {
            let s = self.step(grid, params, 0.0, Dynamics::Relax)?;
            if s.max_angle < tol {
                return Ok(n + 1);
            }
        }
        Ok(max_steps)
    }
}

/// One full LLG step returning the advanced grid. Convenience wrapper over [`LlgSolver`].
pub fn step_llg(
    grid: &MagGrid,
    params: &MaterialParams,
    config: &LlgConfig,
    j: f64,
) -> Result<MagGrid, MagneticsError> {
    let mut next = grid.clone();
    let mut solver = LlgSolver::new(*config, grid);
    solver.step(&mut next, params, j, Dynamics::Full)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::magnetics::field::total_energy;
    use crate::magnetics::grid::StripGeometry;
    use crate::magnetics::material::MU0;
    use crate::magnetics::wall::init_neel_wall;

    /// Material with a vanishing effective anisotropy so a lone cell feels only `h_ext`.
    fn isotropic() -> MaterialParams {
        let p = MaterialParams::default();
        MaterialParams {
            ku2: 0.5 * MU0 * p.ms * p.ms + 1e-6,
            d_dmi: 0.0,
            alpha: 0.0,
            ..p
        }
    }

    #[test]
    fn larmor_precession_matches_gamma_h() {
        let p = isotropic();
        let h = 1.0e5;
        let cfg = LlgConfig {
            dt: 5e-15,
            h_ext: [0.0, 0.0, h],
            ..Default::default()
        };
        let mut g = MagGrid::uniform(1, 1, [4e-9, 4e-9, 0.6e-9], [1.0, 0.0, 1.0]);
        let mut solver = LlgSolver::new(cfg, &g);
        let steps = 40_000;
        let mut phase = 0.0;
        let mut last = g.m[0][1].atan2(g.m[0][0]);
        for _ in 0..steps {
            solver.step(&mut g, &p, 0.0, Dynamics::Full).unwrap();
            let now = g.m[0][1].atan2(g.m[0][0]);
            let mut d = now - last;
            if d > std::f64::consts::PI {
                d -= 2.0 * std::f64::consts::PI;
            } else if d < -std::f64::consts::PI {
                d += 2.0 * std::f64::consts::PI;
            }
            phase += d;
            last = now;
        }
        let omega = phase.abs() / (steps as f64 * cfg.dt);
        let expected = p.gamma() * h;
        assert!((omega - expected).abs() / expected < 1e-3, "{omega} vs {expected}");
        // -gamma m x H with H along +z turns x into +y.
        assert!(phase > 0.0);
        assert!((g.m[0][2] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn unit_norm_holds_after_steps() {
        let p = MaterialParams::default();
        let mut g = MagGrid::strip(&StripGeometry::default()).unwrap();
        init_neel_wall(&mut g, &p, 30e-9).unwrap();
        let mut solver = LlgSolver::new(LlgConfig::default(), &g);
        for _ in 0..200 {
            solver.step(&mut g, &p, 2e11, Dynamics::Full).unwrap();
            assert!(g.max_norm_error() <= 1e-9);
        }
    }

    #[test]
    fn pinned_cells_are_frozen() {
        let p = MaterialParams::default();
        let mut g = MagGrid::strip(&StripGeometry::default()).unwrap();
        init_neel_wall(&mut g, &p, 10e-9).unwrap();
        let before = g.clone();
        let mut solver = LlgSolver::new(LlgConfig::default(), &g);
        for _ in 0..100 {
            solver.step(&mut g, &p, 5e11, Dynamics::Full).unwrap();
        }
        for k in 0..g.m.len() {
            if g.pinned[k] {
                assert_eq!(g.m[k], before.m[k]);
            }
        }
    }

    #[test]
    fn energy_never_rises_without_current() {
        let p = MaterialParams::default();
        let mut g = MagGrid::strip(&StripGeometry::default()).unwrap();
        init_neel_wall(&mut g, &p, 50e-9).unwrap();
        // Perturb away from equilibrium.
        for (k, m) in g.m.iter_mut().enumerate() {
            if !g.pinned[k] {
                *m = vec3::normalize(vec3::add(*m, [0.2 * (k as f64).sin(), 0.1, 0.0]));
            }
        }
        let mut solver = LlgSolver::new(LlgConfig::default(), &g);
        let mut e_prev = total_energy(&g, &p, [0.0; 3]);
        for _ in 0..20 {
            for _ in 0..100 {
                solver.step(&mut g, &p, 0.0, Dynamics::Full).unwrap();
            }
            let e = total_energy(&g, &p, [0.0; 3]);
            assert!(e <= e_prev + 1e-12 * e_prev.abs(), "{e} > {e_prev}");
            e_prev = e;
        }
    }

    #[test]
    fn oversized_step_is_rejected_and_state_kept() {
        let p = MaterialParams::default();
        let mut g = MagGrid::strip(&StripGeometry::default()).unwrap();
        init_neel_wall(&mut g, &p, 40e-9).unwrap();
        let before = g.clone();
        let cfg = LlgConfig {
            dt: 5e-12,
            ..Default::default()
        };
        let mut solver = LlgSolver::new(cfg, &g);
        let err = solver.step(&mut g, &p, 0.0, Dynamics::Full).unwrap_err();
        assert!(matches!(err, MagneticsError::StepTooLarge { .. }));
        assert_eq!(g, before);
    }
}
