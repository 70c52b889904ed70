//! Resistive crossbar pairs: loaded column currents, an exact nodal solve, signed-weight
//! splitting and dummy-column equalization.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CrossbarError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("conductance {g:e} S at ({row}, {col}) is below the OFF floor {g_off:e} S")]
    BelowFloor { row: usize, col: usize, g: f64, g_off: f64 },
    #[error("both arrays are ON at ({row}, {col})")]
    SignConflict { row: usize, col: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("row {row}: drive {v} V outside [0, {v_max}] V")]
    DriveOutOfRange { row: usize, v: f64, v_max: f64 },
    #[error("weight {w} at ({row}, {col}) is not representable: {reason}")]
    Unrepresentable {
        row: usize,
        col: usize,
        w: f64,
        reason: String,
    },
    #[error("singular network")]
    Singular,
    #[error("conductance table: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Array {
    Pos,
    Neg,
}

impl Array {
    /// Direction of the neuron current during this array's phase.
    pub fn sign(self) -> f64 {
        match self {
            Array::Pos => 1.0,
            Array::Neg => -1.0,
        }
    }
}

/// Row voltages for one drive phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowDrive {
    pub v: Vec<f64>,
    pub duration: f64,
}

impl RowDrive {
    pub fn new(v: Vec<f64>, duration: f64, v_max: f64) -> Result<Self, CrossbarError> {
        for (row, &x) in v.iter().enumerate() {
            if !(0.0..=v_max * (1.0 + 1e-12)).contains(&x) {
                return Err(CrossbarError::DriveOutOfRange { row, v: x, v_max });
            }
        }
        if !(duration >= 0.0) {
            return Err(CrossbarError::InvalidParameter(format!("duration {duration}")));
        }
        Ok(Self { v, duration })
    }
}

/// Positive and negative conductance arrays sharing rows, neuron loads and a dummy column.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossbarPair {
    pub g_pos: DMatrix<f64>,
    pub g_neg: DMatrix<f64>,
    pub g_off: f64,
    /// Neuron load resistance per column (Ω).
    pub r_neuron: Vec<f64>,
    /// Dummy-column conductance per row (S).
    pub dummy: Vec<f64>,
}

const ON_TOL: f64 = 1e-9;

impl CrossbarPair {
    pub fn new(
        g_pos: DMatrix<f64>,
        g_neg: DMatrix<f64>,
        g_off: f64,
        r_neuron: Vec<f64>,
    ) -> Result<Self, CrossbarError> {
        let dummy = vec![g_off; g_pos.nrows()];
        let x = Self {
            g_pos,
            g_neg,
            g_off,
            r_neuron,
            dummy,
        };
        x.validate()?;
        Ok(x)
    }

    pub fn rows(&self) -> usize {
        self.g_pos.nrows()
    }

    pub fn cols(&self) -> usize {
        self.g_pos.ncols()
    }

    pub fn array(&self, a: Array) -> &DMatrix<f64> {
        match a {
            Array::Pos => &self.g_pos,
            Array::Neg => &self.g_neg,
        }
    }

    pub fn array_mut(&mut self, a: Array) -> &mut DMatrix<f64> {
        match a {
            Array::Pos => &mut self.g_pos,
            Array::Neg => &mut self.g_neg,
        }
    }

    fn is_on(&self, g: f64) -> bool {
        g > self.g_off * (1.0 + ON_TOL)
    }

    pub fn validate(&self) -> Result<(), CrossbarError> {
        if !(self.g_off > 0.0 && self.g_off.is_finite()) {
            return Err(CrossbarError::InvalidParameter(format!(
                "G_off must be positive, got {}",
                self.g_off
            )));
        }
        if self.g_pos.shape() != self.g_neg.shape() {
            return Err(CrossbarError::Dimension(format!(
                "positive array {:?} vs negative array {:?}",
                self.g_pos.shape(),
                self.g_neg.shape()
            )));
        }
        if self.r_neuron.len() != self.cols() {
            return Err(CrossbarError::Dimension(format!(
                "{} neuron loads for {} columns",
                self.r_neuron.len(),
                self.cols()
            )));
        }
        if self.dummy.len() != self.rows() {
            return Err(CrossbarError::Dimension(format!(
                "{} dummy cells for {} rows",
                self.dummy.len(),
                self.rows()
            )));
        }
        if let Some(r) = self.r_neuron.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
            return Err(CrossbarError::InvalidParameter(format!("neuron load {r} Ω")));
        }
        let floor = self.g_off * (1.0 - ON_TOL);
        for row in 0..self.rows() {
            for col in 0..self.cols() {
                let (p, n) = (self.g_pos[(row, col)], self.g_neg[(row, col)]);
                for g in [p, n] {
                    if !(g >= floor && g.is_finite()) {
                        return Err(CrossbarError::BelowFloor {
                            row,
                            col,
                            g,
                            g_off: self.g_off,
                        });
                    }
                }
                if self.is_on(p) && self.is_on(n) {
                    return Err(CrossbarError::SignConflict { row, col });
                }
            }
            if !(self.dummy[row] >= floor) {
                return Err(CrossbarError::BelowFloor {
                    row,
                    col: self.cols(),
                    g: self.dummy[row],
                    g_off: self.g_off,
                });
            }
        }
        Ok(())
    }

    fn check_drive(&self, drive: &RowDrive) -> Result<(), CrossbarError> {
        if drive.v.len() != self.rows() {
            return Err(CrossbarError::Dimension(format!(
                "{} drive voltages for {} rows",
                drive.v.len(),
                self.rows()
            )));
        }
        Ok(())
    }

    /// Loading factor `γ_j = R_j Σ_i G_ij` of one array.
    pub fn gamma(&self, array: Array, col: usize) -> f64 {
        self.r_neuron[col] * self.array(array).column(col).sum()
    }

    /// Per-column `γ` for both arrays, `(pos, neg)`.
    pub fn gammas(&self) -> Vec<(f64, f64)> {
        (0..self.cols())
            .map(|j| (self.gamma(Array::Pos, j), self.gamma(Array::Neg, j)))
            .collect()
    }

    pub fn max_gamma(&self) -> f64 {
        self.gammas().into_iter().map(|(p, n)| p.max(n)).fold(0.0, f64::max)
    }

    /// Signed neuron current of column `col` during `array`'s phase:
    /// `Σ_i G_ij V_i / (1 + γ_j)`, negated for the negative array.
    pub fn column_current(&self, drive: &RowDrive, col: usize, array: Array) -> Result<f64, CrossbarError> {
        self.check_drive(drive)?;
        if col >= self.cols() {
            return Err(CrossbarError::Dimension(format!("column {col} of {}", self.cols())));
        }
        let g = self.array(array).column(col);
        let num: f64 = g.iter().zip(&drive.v).map(|(g, v)| g * v).sum();
        Ok(array.sign() * num / (1.0 + self.gamma(array, col)))
    }

    pub fn column_currents(&self, drive: &RowDrive, array: Array) -> Result<Vec<f64>, CrossbarError> {
        (0..self.cols()).map(|j| self.column_current(drive, j, array)).collect()
    }

    /// Total conductance seen by each row: both arrays plus the dummy cell.
    pub fn row_totals(&self) -> Vec<f64> {
        (0..self.rows())
            .map(|i| self.g_pos.row(i).sum() + self.g_neg.row(i).sum() + self.dummy[i])
            .collect()
    }

    /// Sets every dummy cell so all row totals equal the largest one (never below `G_off`).
    pub fn dummy_equalize(&mut self) {
        for d in self.dummy.iter_mut() {
            *d = self.g_off;
        }
        let totals = self.row_totals();
        let target = totals.iter().copied().fold(0.0, f64::max);
        for (d, t) in self.dummy.iter_mut().zip(totals) {
            *d += target - t;
        }
    }

    /// Common row conductance after equalization (the largest row total otherwise).
    pub fn g_eq(&self) -> f64 {
        self.row_totals().into_iter().fold(0.0, f64::max)
    }

    /// Replaces every array cell with `f(array, row, col, g)`.
    pub fn map_conductances(&mut self, mut f: impl FnMut(Array, usize, usize, f64) -> f64) {
        for a in [Array::Pos, Array::Neg] {
            let m = self.array_mut(a);
            for col in 0..m.ncols() {
                for row in 0..m.nrows() {
                    m[(row, col)] = f(a, row, col, m[(row, col)]);
                }
            }
        }
    }

    /// Writes one array as row-major CSV (S), no header.
    pub fn write_csv<W: Write>(&self, array: Array, w: W) -> Result<(), CrossbarError> {
        write_matrix_csv(self.array(array), w)
    }
}

pub fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, w: W) -> Result<(), CrossbarError> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for row in m.row_iter() {
        wr.write_record(row.iter().map(|g| format!("{g:e}")))
            .map_err(|e| CrossbarError::Io(e.to_string()))?;
    }
    wr.flush().map_err(|e| CrossbarError::Io(e.to_string()))
}

pub fn read_matrix_csv<R: Read>(r: R) -> Result<DMatrix<f64>, CrossbarError> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| CrossbarError::Io(e.to_string()))?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| CrossbarError::Io(format!("{s:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(CrossbarError::Dimension(format!(
                    "ragged row {} ({} vs {})",
                    rows.len(),
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Column currents from the full nodal system: rows are ideal sources, every column node
/// connects through its load to ground, the dummy column is grounded. Assembled and solved
/// as a general conductance matrix.
pub fn nodal_solve(xbar: &CrossbarPair, drive: &RowDrive, array: Array) -> Result<Vec<f64>, CrossbarError> {
    xbar.check_drive(drive)?;
    let g = xbar.array(array);
    let (n_rows, n_cols) = g.shape();
    // Unknowns: column node voltages. Grounded (R = 0) columns are fixed at 0 V and drop out.
    let free: Vec<usize> = (0..n_cols).filter(|&j| xbar.r_neuron[j] > 0.0).collect();
    let mut slot = vec![usize::MAX; n_cols];
    for (k, &j) in free.iter().enumerate() {
        slot[j] = k;
    }
    let n = free.len();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for i in 0..n_rows {
        for j in 0..n_cols {
            let gij = g[(i, j)];
            // Branch between source node i (known) and column node j.
            if slot[j] != usize::MAX {
                let k = slot[j];
                a[(k, k)] += gij;
                b[k] += gij * drive.v[i];
            }
        }
    }
    for &j in &free {
        let k = slot[j];
        a[(k, k)] += 1.0 / xbar.r_neuron[j];
    }
    let v_col = if n > 0 {
        a.lu().solve(&b).ok_or(CrossbarError::Singular)?
    } else {
        DVector::zeros(0)
    };
    let out = (0..n_cols)
        .map(|j| {
            let i_load = if slot[j] == usize::MAX {
                // Short to ground: current is whatever the synapses deliver into 0 V.
                (0..n_rows).map(|i| g[(i, j)] * drive.v[i]).sum::<f64>()
            } else {
                v_col[slot[j]] / xbar.r_neuron[j]
            };
            array.sign() * i_load
        })
        .collect::<Vec<_>>();
    if out.iter().any(|x| !x.is_finite()) {
        return Err(CrossbarError::Singular);
    }
    Ok(out)
}

/// Linear magnitude-to-conductance map for signed weights.
///
/// `|w| = w_max` maps to `g_max`; the device cannot go below `g_min`, so smaller non-zero
/// magnitudes round to the nearer of `g_off` (weight zero) and `g_min`, unless `strict`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightMapping {
    pub w_max: f64,
    pub g_max: f64,
    pub g_min: f64,
    pub g_off: f64,
    pub strict: bool,
}

impl WeightMapping {
    pub fn validate(&self) -> Result<(), CrossbarError> {
        if !(self.w_max > 0.0 && self.g_max >= self.g_min && self.g_min > self.g_off && self.g_off > 0.0) {
            return Err(CrossbarError::InvalidParameter(format!(
                "need w_max > 0 and G_max >= G_min > G_off > 0, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Conductance per unit weight.
    pub fn gain(&self) -> f64 {
        self.g_max / self.w_max
    }

    /// Smallest non-zero representable magnitude.
    pub fn w_min(&self) -> f64 {
        self.g_min / self.gain()
    }

    /// ON conductance for magnitude `m >= 0`, or `g_off`.
    pub fn conductance(&self, m: f64) -> Result<f64, String> {
        if !(m.is_finite() && m >= 0.0) {
            return Err("not a finite magnitude".into());
        }
        if m > self.w_max * (1.0 + 1e-12) {
            return Err(format!("exceeds w_max = {}", self.w_max));
        }
        if m == 0.0 {
            return Ok(self.g_off);
        }
        let g = (m * self.gain()).min(self.g_max);
        if g >= self.g_min {
            return Ok(g);
        }
        if self.strict {
            return Err(format!("below the device floor {}", self.w_min()));
        }
        Ok(if m < 0.5 * self.w_min() { self.g_off } else { self.g_min })
    }

    /// Weight realized by a conductance (inverse of [`conductance`](Self::conductance) on the ON range).
    pub fn weight_of(&self, g: f64) -> f64 {
        if g <= self.g_off * (1.0 + ON_TOL) {
            0.0
        } else {
            g / self.gain()
        }
    }
}

/// Builds a crossbar pair from a weight matrix (rows = inputs, columns = neurons).
pub fn split_signed(w: &DMatrix<f64>, map: &WeightMapping, r_neuron: Vec<f64>) -> Result<CrossbarPair, CrossbarError> {
    map.validate()?;
    let (rows, cols) = w.shape();
    let mut g_pos = DMatrix::from_element(rows, cols, map.g_off);
    let mut g_neg = g_pos.clone();
    for col in 0..cols {
        for row in 0..rows {
            let x = w[(row, col)];
            let g = map
                .conductance(x.abs())
                .map_err(|reason| CrossbarError::Unrepresentable { row, col, w: x, reason })?;
            if x > 0.0 {
                g_pos[(row, col)] = g;
            } else if x < 0.0 {
                g_neg[(row, col)] = g;
            }
        }
    }
    CrossbarPair::new(g_pos, g_neg, map.g_off, r_neuron)
}
