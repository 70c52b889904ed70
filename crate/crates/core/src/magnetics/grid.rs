use serde::{Deserialize, Serialize};

use super::MagneticsError;
use crate::vec3::Vec3;

/// Rectangular free layer flanked along x by two pinned bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StripGeometry {
    /// Free-layer length along the current direction (m).
    pub free_length: f64,
    /// Strip width (m).
    pub width: f64,
    /// Length of each pinned band (m).
    pub pinned_length: f64,
    /// Cell size `[dx, dy, dz]` (m).
    pub cell: [f64; 3],
}

impl Default for StripGeometry {
    fn default() -> Self {
        Self {
            free_length: 120e-9,
            width: 20e-9,
            pinned_length: 20e-9,
            cell: [4e-9, 4e-9, 0.6e-9],
        }
    }
}

impl StripGeometry {
    pub fn validate(&self) -> Result<(), MagneticsError> {
        let dims = [self.free_length, self.width, self.cell[0], self.cell[1], self.cell[2]];
        if dims.iter().any(|d| !(d.is_finite() && *d > 0.0)) || !(self.pinned_length >= 0.0) {
            return Err(MagneticsError::InvalidGeometry(format!("{self:?}")));
        }
        if self.free_length < 2.0 * self.cell[0] {
            return Err(MagneticsError::InvalidGeometry(
                "free layer must span at least two cells".into(),
            ));
        }
        Ok(())
    }
}

/// Discretized unit magnetization over a strip, row-major with x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct MagGrid {
    pub nx: usize,
    pub ny: usize,
    pub cell: [f64; 3],
    pub m: Vec<Vec3>,
    pub pinned: Vec<bool>,
    /// Number of pinned columns on each side.
    pub pin_cols: usize,
}

impl MagGrid {
    /// Builds the strip with the left band pinned `+z`, the right band `-z`, and the free
    /// region uniformly `+z`.
    pub fn strip(geom: &StripGeometry) -> Result<Self, MagneticsError> {
        geom.validate()?;
        let [dx, dy, _] = geom.cell;
        let free_cols = (geom.free_length / dx).round() as usize;
        let pin_cols = (geom.pinned_length / dx).round() as usize;
        let nx = free_cols + 2 * pin_cols;
        let ny = ((geom.width / dy).round() as usize).max(1);
        let mut grid = Self::uniform(nx, ny, geom.cell, [0.0, 0.0, 1.0]);
        grid.pin_cols = pin_cols;
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                if i < pin_cols {
                    grid.pinned[k] = true;
                } else if i >= nx - pin_cols {
                    grid.pinned[k] = true;
                    grid.m[k] = [0.0, 0.0, -1.0];
                }
            }
        }
        Ok(grid)
    }

    /// Unpinned grid with every cell set to `m0` (normalized).
    pub fn uniform(nx: usize, ny: usize, cell: [f64; 3], m0: Vec3) -> Self {
        let m0 = crate::vec3::normalize(m0);
        Self {
            nx,
            ny,
            cell,
            m: vec![m0; nx * ny],
            pinned: vec![false; nx * ny],
            pin_cols: 0,
        }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell[0] * self.cell[1] * self.cell[2]
    }

    /// Length of the free region (m).
    pub fn free_length(&self) -> f64 {
        (self.nx - 2 * self.pin_cols) as f64 * self.cell[0]
    }

    /// x coordinate of the left edge of the free region (m).
    pub fn free_origin(&self) -> f64 {
        self.pin_cols as f64 * self.cell[0]
    }

    /// Centre x coordinate of column `i`.
    pub fn x_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.cell[0]
    }

    /// Largest deviation of any cell from unit norm.
    pub fn max_norm_error(&self) -> f64 {
        self.m
            .iter()
            .map(|v| (crate::vec3::norm(*v) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// mz averaged over each column (across the width).
    pub fn column_mz(&self) -> Vec<f64> {
        (0..self.nx)
            .map(|i| (0..self.ny).map(|j| self.m[self.idx(i, j)][2]).sum::<f64>() / self.ny as f64)
            .collect()
    }

    /// One row of the magnetization along x.
    pub fn row(&self, j: usize) -> &[Vec3] {
        &self.m[j * self.nx..(j + 1) * self.nx]
    }
}
