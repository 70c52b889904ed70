//! Domain-wall neuron with a reference-MTJ divider and p-type axon transistor.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::magnetics::{run_dw, DwRunOptions, MagneticsError, MaterialParams, StripGeometry};
use crate::mtj::DwDevice;
use crate::numerics::fit_line;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NeuronError {
    #[error("illegal phase transition {from:?} -> {to:?}")]
    IllegalTransition { from: Phase, to: Phase },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Magnetics(#[from] MagneticsError),
}

/// Wall displacement per unit charge: `I_crit` for `t_ref` moves the wall the full length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisplacementMap {
    pub i_crit: f64,
    pub t_ref: f64,
}

impl Default for DisplacementMap {
    fn default() -> Self {
        Self {
            i_crit: 5e-6,
            t_ref: 2e-9,
        }
    }
}

impl DisplacementMap {
    pub fn validate(&self) -> Result<(), NeuronError> {
        if !(self.i_crit > 0.0 && self.t_ref > 0.0) {
            return Err(NeuronError::InvalidParameter(format!("displacement map {self:?}")));
        }
        Ok(())
    }

    /// Signed displacement (m) of a wall in a free layer of length `l_free`.
    pub fn displacement(&self, l_free: f64, i: f64, t: f64) -> f64 {
        l_free * (i * t) / (self.i_crit * self.t_ref)
    }

    /// Smallest current that saturates the wall from the left edge in `t`.
    pub fn saturation_current(&self, t: f64) -> f64 {
        self.i_crit * self.t_ref / t
    }

    /// Fits the map to micromagnetic runs: net displacement after `t_write` at each of
    /// `currents`, slope of a line through the results.
    pub fn from_magnetics(
        geom: &StripGeometry,
        params: &MaterialParams,
        t_write: f64,
        currents: &[f64],
        opts: &DwRunOptions,
    ) -> Result<Self, NeuronError> {
        if currents.len() < 2 {
            return Err(NeuronError::InvalidParameter(
                "need at least two calibration currents".into(),
            ));
        }
        let dx = currents
            .iter()
            .map(|&i| run_dw(geom, params, i, t_write, opts).map(|t| t.final_position() - t.initial_position()))
            .collect::<Result<Vec<_>, _>>()?;
        let fit = fit_line(currents, &dx).ok_or_else(|| NeuronError::InvalidParameter("degenerate currents".into()))?;
        if !(fit.slope > 0.0) {
            return Err(NeuronError::InvalidParameter(format!(
                "wall does not advance with current (slope {:e} m/A)",
                fit.slope
            )));
        }
        log::info!(
            "displacement map: {:.3e} m/A, intercept {:.3e} m, R^2 {:.4}",
            fit.slope,
            fit.intercept,
            fit.r_squared
        );
        Ok(Self {
            i_crit: geom.free_length / fit.slope,
            t_ref: t_write,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Reset,
    Write,
    Read,
}

/// Reset pulse applied through the heavy metal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResetPulse {
    pub current: f64,
    pub duration: f64,
}

impl Default for ResetPulse {
    fn default() -> Self {
        Self {
            current: 5e-6,
            duration: 2e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronState {
    pub dev: DwDevice,
    pub phase: Phase,
}

impl NeuronState {
    /// A neuron fresh from reset.
    pub fn new(mut dev: DwDevice) -> Self {
        dev.x = 0.0;
        Self {
            dev,
            phase: Phase::Reset,
        }
    }

    pub fn position(&self) -> f64 {
        self.dev.x
    }

    /// Normalized wall position `x / L`.
    pub fn state(&self) -> f64 {
        self.dev.x / self.dev.l_free
    }

    /// Drives `i_in` (signed) through the heavy metal for `t_write`. A second write before
    /// reading accumulates (negative-array phase).
    pub fn write(&mut self, map: &DisplacementMap, i_in: f64, t_write: f64) -> Result<(), NeuronError> {
        if !(t_write >= 0.0) || !i_in.is_finite() {
            return Err(NeuronError::InvalidParameter(format!(
                "write of {i_in} A for {t_write} s"
            )));
        }
        if self.phase == Phase::Read {
            return Err(NeuronError::IllegalTransition {
                from: self.phase,
                to: Phase::Write,
            });
        }
        let l = self.dev.l_free;
        self.dev.x = (self.dev.x + map.displacement(l, i_in, t_write)).clamp(0.0, l);
        self.phase = Phase::Write;
        Ok(())
    }

    /// Read phase: gate voltage and axon output current.
    pub fn read(&mut self, ax: &AxonCircuit) -> Result<AxonOutput, NeuronError> {
        if self.phase != Phase::Write {
            return Err(NeuronError::IllegalTransition {
                from: self.phase,
                to: Phase::Read,
            });
        }
        self.phase = Phase::Read;
        Ok(ax.output(self.dev.resistance()))
    }

    /// Returns the wall to the left edge; the pulse is reported for energy accounting.
    pub fn reset(&mut self, pulse: ResetPulse) -> ResetPulse {
        self.dev.x = 0.0;
        self.phase = Phase::Reset;
        pulse
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxonOutput {
    pub v_g: f64,
    pub i_out: f64,
}

/// Divider (reference MTJ on top, neuron MTJ as pull-down) driving a square-law p-type
/// transistor with source at `v_src` and drain at `v_drain`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxonCircuit {
    pub v_div: f64,
    pub v_src: f64,
    pub r_ref: f64,
    pub k_tr: f64,
    pub v_t: f64,
    pub v_drain: f64,
}

impl AxonCircuit {
    /// Tuning: the reference equals the neuron at reset, the threshold sits exactly at the
    /// reset gate voltage, and `k_tr` gives `i_out_max` with the wall at the far edge.
    pub fn tuned(neuron: &DwDevice, v_div: f64, v_src: f64, i_out_max: f64) -> Result<Self, NeuronError> {
        let r_ref = 1.0 / neuron.g_min();
        let v_g0 = 0.5 * v_div;
        let v_g1 = v_div * (1.0 / neuron.g_max()) / (1.0 / neuron.g_max() + r_ref);
        let v_t = v_src - v_g0;
        let ov = v_src - v_t - v_g1;
        if !(ov > 0.0) {
            return Err(NeuronError::InvalidParameter(format!(
                "no gate swing (v_div {v_div}, v_src {v_src})"
            )));
        }
        let ax = Self {
            v_div,
            v_src,
            r_ref,
            k_tr: 2.0 * i_out_max / (ov * ov),
            v_t,
            v_drain: 0.0,
        };
        ax.validate()?;
        Ok(ax)
    }

    pub fn validate(&self) -> Result<(), NeuronError> {
        if !(self.v_div > self.v_src && self.v_src > 0.0 && self.r_ref > 0.0 && self.k_tr > 0.0 && self.v_t >= 0.0) {
            return Err(NeuronError::InvalidParameter(format!("axon circuit {self:?}")));
        }
        Ok(())
    }

    pub fn gate_voltage(&self, r_neuron: f64) -> f64 {
        self.v_div * r_neuron / (r_neuron + self.r_ref)
    }

    /// Drain current (A) at gate voltage `v_g`.
    pub fn axon_current(&self, v_g: f64) -> f64 {
        let ov = self.v_src - v_g - self.v_t;
        if ov <= 0.0 {
            return 0.0;
        }
        let v_sd = (self.v_src - self.v_drain).max(0.0);
        if v_sd >= ov {
            0.5 * self.k_tr * ov * ov
        } else {
            self.k_tr * (ov * v_sd - 0.5 * v_sd * v_sd)
        }
    }

    pub fn output(&self, r_neuron: f64) -> AxonOutput {
        let v_g = self.gate_voltage(r_neuron);
        AxonOutput {
            v_g,
            i_out: self.axon_current(v_g),
        }
    }

    /// Output with the wall at normalized position `s ∈ [0, 1]` of `dev`.
    pub fn output_at(&self, dev: &DwDevice, s: f64) -> AxonOutput {
        self.output(1.0 / dev.conductance_at(s.clamp(0.0, 1.0) * dev.l_free))
    }
}

/// Sampled input-current to output-current map of a neuron.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransferCurve {
    pub i_in: Vec<f64>,
    pub v_g: Vec<f64>,
    pub i_out: Vec<f64>,
}

/// Reset, write `I_IN` for `t_write`, read; for `n` currents evenly spaced over `[0, i_max]`.
pub fn transfer_function(
    dev: &DwDevice,
    map: &DisplacementMap,
    ax: &AxonCircuit,
    t_write: f64,
    i_max: f64,
    n: usize,
) -> Result<TransferCurve, NeuronError> {
    if n < 2 || !(i_max > 0.0) {
        return Err(NeuronError::InvalidParameter(format!(
            "{n} samples over [0, {i_max}] A"
        )));
    }
    let mut curve = TransferCurve::default();
    let mut neuron = NeuronState::new(dev.clone());
    for k in 0..n {
        let i = i_max * k as f64 / (n - 1) as f64;
        neuron.reset(ResetPulse::default());
        neuron.write(map, i, t_write)?;
        let out = neuron.read(ax)?;
        curve.i_in.push(i);
        curve.v_g.push(out.v_g);
        curve.i_out.push(out.i_out);
    }
    Ok(curve)
}

impl TransferCurve {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["i_in_A", "v_g_V", "i_out_A"])?;
        for k in 0..self.i_in.len() {
            wr.write_record([
                self.i_in[k].to_string(),
                self.v_g[k].to_string(),
                self.i_out[k].to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// R² of a straight line through the samples with `lo <= i_in <= hi`.
    pub fn linearity(&self, lo: f64, hi: f64) -> Option<f64> {
        let (x, y): (Vec<f64>, Vec<f64>) = self
            .i_in
            .iter()
            .zip(&self.i_out)
            .filter(|(i, _)| **i >= lo && **i <= hi)
            .map(|(a, b)| (*a, *b))
            .unzip();
        if y.iter().all(|v| *v == y[0]) {
            // A flat segment carries no linearity information.
            return None;
        }
        fit_line(&x, &y).map(|f| f.r_squared)
    }
}
