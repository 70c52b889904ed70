//! Closed-form energy accounting for neuron phases and synapse reads.

use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnergyError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("log has neuron energy but no neuron activations")]
    MissingEntries,
}

/// Resistance (Ω) of a heavy-metal strip of `length × width × t_hm`.
pub fn hm_resistance(length: f64, width: f64, t_hm: f64, rho: f64) -> Result<f64, EnergyError> {
    if !(length > 0.0 && width > 0.0 && t_hm > 0.0 && rho > 0.0) {
        return Err(EnergyError::InvalidParameter(format!(
            "strip {length:e} x {width:e} x {t_hm:e} m, rho {rho:e} Ω·m"
        )));
    }
    Ok(rho * length / (width * t_hm))
}

/// Joule heating `I² R t` of a current pulse.
pub fn write_energy(i: f64, r: f64, t: f64) -> f64 {
    i * i * r * t
}

/// `V I t` drawn from a supply.
pub fn read_energy(v: f64, i: f64, t: f64) -> f64 {
    v * i * t
}

/// `V²/R` power ratio between a CMOS-level and a spin-level synapse drive at equal R.
pub fn synapse_power_ratio(v_spin: f64, v_cmos: f64) -> Result<f64, EnergyError> {
    if !(v_spin > 0.0 && v_cmos > 0.0) {
        return Err(EnergyError::InvalidParameter(format!(
            "voltages {v_spin} V, {v_cmos} V"
        )));
    }
    Ok((v_cmos / v_spin).powi(2))
}

/// Constants used by the energy figures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyConfig {
    /// Heavy-metal resistance in the neuron write/reset path (Ω).
    pub r_neuron_path: f64,
    /// Average write current over both array phases (A).
    pub i_write_avg: f64,
    pub t_write_phase: f64,
    pub write_phases: usize,
    pub v_div: f64,
    /// Average divider current during read (A).
    pub i_read: f64,
    pub t_read: f64,
    pub i_reset: f64,
    pub t_reset: f64,
    pub v_spin: f64,
    pub v_cmos: f64,
    /// CMOS neuron baselines (J).
    pub cmos_analog_j: f64,
    pub cmos_digital_j: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            r_neuron_path: 140.0,
            i_write_avg: 17.5e-6,
            t_write_phase: 2e-9,
            write_phases: 2,
            v_div: 0.9,
            i_read: 80e-9,
            t_read: 2e-9,
            i_reset: 5e-6,
            t_reset: 2e-9,
            v_spin: 0.1,
            v_cmos: 0.5,
            cmos_analog_j: 700e-15,
            cmos_digital_j: 832.6e-15,
        }
    }
}

/// Per-phase energy tallies accumulated during inference.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyLog {
    pub neuron_write_j: f64,
    pub neuron_read_j: f64,
    pub neuron_reset_j: f64,
    /// Neuron write-read-reset cycles logged.
    pub neuron_cycles: usize,
    pub synapse_read_j: f64,
    /// Σ over synapses of active read time (s).
    pub synapse_read_s: f64,
    pub inferences: usize,
}

impl AddAssign for EnergyLog {
    fn add_assign(&mut self, o: Self) {
        self.neuron_write_j += o.neuron_write_j;
        self.neuron_read_j += o.neuron_read_j;
        self.neuron_reset_j += o.neuron_reset_j;
        self.neuron_cycles += o.neuron_cycles;
        self.synapse_read_j += o.synapse_read_j;
        self.synapse_read_s += o.synapse_read_s;
        self.inferences += o.inferences;
    }
}

impl EnergyLog {
    /// One neuron cycle at the average operating point of `cfg`.
    pub fn average_neuron(cfg: &EnergyConfig) -> Self {
        Self {
            neuron_write_j: write_energy(
                cfg.i_write_avg,
                cfg.r_neuron_path,
                cfg.t_write_phase * cfg.write_phases as f64,
            ),
            neuron_read_j: read_energy(cfg.v_div, cfg.i_read, cfg.t_read),
            neuron_reset_j: write_energy(cfg.i_reset, cfg.r_neuron_path, cfg.t_reset),
            neuron_cycles: 1,
            ..Default::default()
        }
    }

    pub fn log_synapse_read(&mut self, v: f64, g: f64, r_series: f64, t: f64) {
        if v == 0.0 || t == 0.0 {
            return;
        }
        self.synapse_read_j += v * v / (1.0 / g + r_series) * t;
        self.synapse_read_s += t;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// Per-neuron averages (J).
    pub write_j: f64,
    pub read_j: f64,
    pub reset_j: f64,
    pub total_j: f64,
    /// All neuron and synapse energy in the log (J).
    pub neuron_energy_j: f64,
    pub synapse_energy_j: f64,
    pub energy_j: f64,
    pub per_inference_j: f64,
    /// Mean power of one synapse while read (W).
    pub synapse_read_power_w: f64,
    /// Spin vs CMOS synapse drive power ratio.
    pub synapse_power_ratio: f64,
    /// CMOS baseline neuron energy divided by the per-neuron total.
    pub ratio_vs_analog: f64,
    pub ratio_vs_digital: f64,
    pub write_fj: f64,
    pub read_fj: f64,
    pub reset_fj: f64,
    pub total_fj: f64,
    pub per_inference_fj: f64,
}

impl EnergyReport {
    pub fn from_log(log: &EnergyLog, cfg: &EnergyConfig) -> Result<Self, EnergyError> {
        let neuron_energy_j = log.neuron_write_j + log.neuron_read_j + log.neuron_reset_j;
        for v in [neuron_energy_j, log.synapse_read_j, log.synapse_read_s] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(EnergyError::InvalidParameter(format!("log entry {v}")));
            }
        }
        if log.neuron_cycles == 0 && neuron_energy_j > 0.0 {
            return Err(EnergyError::MissingEntries);
        }
        let per = |x: f64, n: usize| if n == 0 { 0.0 } else { x / n as f64 };
        let write_j = per(log.neuron_write_j, log.neuron_cycles);
        let read_j = per(log.neuron_read_j, log.neuron_cycles);
        let reset_j = per(log.neuron_reset_j, log.neuron_cycles);
        let total_j = write_j + read_j + reset_j;
        let energy_j = neuron_energy_j + log.synapse_read_j;
        let ratio = |base: f64| if total_j > 0.0 { base / total_j } else { 0.0 };
        let per_inference_j = per(energy_j, log.inferences);
        Ok(Self {
            write_j,
            read_j,
            reset_j,
            total_j,
            neuron_energy_j,
            synapse_energy_j: log.synapse_read_j,
            energy_j,
            per_inference_j,
            synapse_read_power_w: if log.synapse_read_s > 0.0 {
                log.synapse_read_j / log.synapse_read_s
            } else {
                0.0
            },
            synapse_power_ratio: synapse_power_ratio(cfg.v_spin, cfg.v_cmos)?,
            ratio_vs_analog: ratio(cfg.cmos_analog_j),
            ratio_vs_digital: ratio(cfg.cmos_digital_j),
            write_fj: write_j * 1e15,
            read_fj: read_j * 1e15,
            reset_fj: reset_j * 1e15,
            total_fj: total_j * 1e15,
            per_inference_fj: per_inference_j * 1e15,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs()
    }

    #[test]
    fn sheet_resistance() {
        assert!(close(
            hm_resistance(1e-7, 1e-7, 3e-9, 200e-9).unwrap(),
            200.0 / 3.0,
            1e-12
        ));
        assert!(close(hm_resistance(150e-9, 200e-9, 3e-9, 200e-9).unwrap(), 50.0, 1e-12));
        let a = hm_resistance(150e-9, 200e-9, 3e-9, 200e-9).unwrap();
        let b = hm_resistance(150e-9, 400e-9, 3e-9, 200e-9).unwrap();
        assert!(close(a / b, 2.0, 1e-12));
        assert!(hm_resistance(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn pulse_arithmetic() {
        assert!(close(write_energy(17.5e-6, 140.0, 4e-9), 0.1715e-15, 1e-12));
        assert!(close(write_energy(5e-6, 140.0, 2e-9), 0.007e-15, 1e-12));
        assert_eq!(write_energy(0.0, 140.0, 4e-9), 0.0);
        assert!(close(read_energy(0.9, 80e-9, 2e-9), 0.144e-15, 1e-12));
        assert_eq!(read_energy(0.9, 80e-9, 0.0), 0.0);
    }

    #[test]
    fn power_ratio() {
        assert!(close(synapse_power_ratio(0.1, 0.5).unwrap(), 25.0, 1e-12));
        assert_eq!(synapse_power_ratio(0.3, 0.3).unwrap(), 1.0);
        assert!(synapse_power_ratio(0.0, 0.3).is_err());
    }

    #[test]
    fn average_neuron_report() {
        let cfg = EnergyConfig::default();
        let r = EnergyReport::from_log(&EnergyLog::average_neuron(&cfg), &cfg).unwrap();
        assert!(close(r.total_j, 0.1715e-15 + 0.144e-15 + 0.007e-15, 1e-12));
        assert!(close(r.total_j, r.write_j + r.read_j + r.reset_j, 1e-12));
        assert!(close(r.ratio_vs_analog, 700.0 / 0.3225, 1e-9));
        assert!(close(r.total_fj, 0.3225, 1e-12));
    }

    #[test]
    fn empty_and_inconsistent_logs() {
        let cfg = EnergyConfig::default();
        let r = EnergyReport::from_log(&EnergyLog::default(), &cfg).unwrap();
        assert_eq!((r.total_j, r.energy_j, r.synapse_read_power_w), (0.0, 0.0, 0.0));
        let bad = EnergyLog {
            neuron_write_j: 1e-15,
            ..Default::default()
        };
        assert_eq!(EnergyReport::from_log(&bad, &cfg), Err(EnergyError::MissingEntries));
    }

    #[test]
    fn synapse_read_includes_series_metal() {
        let mut log = EnergyLog::default();
        log.log_synapse_read(0.1, 1.0 / 20e3, 50.0, 2e-9);
        assert!(close(log.synapse_read_j, 0.01 / 20050.0 * 2e-9, 1e-12));
        log.log_synapse_read(0.0, 1.0 / 20e3, 50.0, 2e-9);
        assert_eq!(log.synapse_read_s, 2e-9);
    }
}
