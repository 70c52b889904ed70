use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::quantize::quantize_activation;
use super::spec::{argmax, NetworkSpec, Response};
use super::NetworkError;
use crate::crossbar::{split_signed, Array, CrossbarPair, RowDrive, WeightMapping};
use crate::energy::{hm_resistance, write_energy, EnergyLog};
use crate::io::dataset::Dataset;
use crate::magnetics::MaterialParams;
use crate::mtj::{solve_thickness, DeviceRole, DwDevice, MtjCalibration};
use crate::neuron_axon::{AxonCircuit, DisplacementMap, NeuronState, ResetPulse};

/// Circuit and device constants of the deployed network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HardwareConfig {
    /// Full-scale row voltage (V).
    pub v_max: f64,
    /// Bias at which device conductances are evaluated (V).
    pub v_eval: f64,
    /// Duration of each array phase of a neuron write (s).
    pub t_write: f64,
    pub t_read: f64,
    /// Synapse resistance realizing weight 1 (Ω).
    pub r_min: f64,
    pub r_off: f64,
    /// Neuron heavy-metal path resistance (Ω), the crossbar column load.
    pub r_neuron: f64,
    pub gamma_max: f64,
    /// Fraction of the loading budget available to training; the rest absorbs quantization.
    pub budget_fraction: f64,
    pub synapse_length: f64,
    pub synapse_width: f64,
    /// Heavy-metal length in the synapse read path (m).
    pub synapse_hm_length: f64,
    pub neuron_length: f64,
    pub neuron_width: f64,
    pub neuron_t_mgo: f64,
    pub v_div: f64,
    pub v_src: f64,
    /// Axon full-scale current for the last layer, which drives no crossbar (A).
    pub i_out_last: f64,
    pub displacement: DisplacementMap,
    pub reset: ResetPulse,
    /// Refuse weights below the device floor instead of rounding them.
    pub strict_mapping: bool,
}

impl Default for HardwareConfig {
    fn default() -> Self {
        Self {
            v_max: 0.1,
            v_eval: 0.1,
            t_write: 2e-9,
            t_read: 2e-9,
            r_min: 20e3,
            r_off: 10e6,
            r_neuron: 140.0,
            gamma_max: 0.07,
            budget_fraction: 0.8,
            synapse_length: 170e-9,
            synapse_width: 200e-9,
            synapse_hm_length: 150e-9,
            neuron_length: 50e-9,
            neuron_width: 20e-9,
            neuron_t_mgo: 2e-9,
            v_div: 0.9,
            v_src: 0.65,
            i_out_last: 10e-6,
            displacement: DisplacementMap::default(),
            reset: ResetPulse::default(),
            strict_mapping: false,
        }
    }
}

/// Weight limits implied by the hardware, used to constrain training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceConstraints {
    /// Per layer, per column and sign: maximum Σ|w| (bias included).
    pub l1_budget: Vec<f64>,
    /// Smallest non-zero magnitude a synapse realizes.
    pub w_floor: f64,
}

impl HardwareConfig {
    pub fn synapse_device(&self, cal: &MtjCalibration, mat: &MaterialParams) -> Result<DwDevice, NetworkError> {
        let delta = mat.wall_width();
        let t = solve_thickness(
            cal,
            self.v_eval,
            self.synapse_length,
            self.synapse_width,
            delta,
            1.0 / self.r_min,
        )?;
        Ok(DwDevice::from_calibration(
            cal,
            t,
            self.v_eval,
            self.synapse_length,
            self.synapse_width,
            delta,
            DeviceRole::Synapse,
        )?)
    }

    pub fn neuron_device(&self, cal: &MtjCalibration, mat: &MaterialParams) -> Result<DwDevice, NetworkError> {
        Ok(DwDevice::from_calibration(
            cal,
            self.neuron_t_mgo,
            self.v_eval,
            self.neuron_length,
            self.neuron_width,
            mat.wall_width(),
            DeviceRole::Neuron,
        )?)
    }

    pub fn mapping(&self, synapse: &DwDevice) -> WeightMapping {
        WeightMapping {
            w_max: 1.0,
            g_max: synapse.g_max(),
            g_min: synapse.g_min(),
            g_off: 1.0 / self.r_off,
            strict: self.strict_mapping,
        }
    }

    /// Training limits: each column's ON conductance per array stays within
    /// `budget_fraction` of what `gamma_max` leaves after the OFF cells.
    pub fn constraints(&self, map: &WeightMapping, sizes: &[usize]) -> DeviceConstraints {
        let g_budget = self.gamma_max / self.r_neuron;
        let l1_budget = sizes[..sizes.len() - 1]
            .iter()
            .map(|&n| {
                let rows = (n + 1) as f64;
                self.budget_fraction * (g_budget - rows * map.g_off) / map.gain()
            })
            .collect();
        DeviceConstraints {
            l1_budget,
            w_floor: map.w_min(),
        }
    }

    /// Normalized axon output against wall position for the nominal neuron, `samples` points.
    pub fn neuron_response(
        &self,
        cal: &MtjCalibration,
        mat: &MaterialParams,
        samples: usize,
    ) -> Result<Response, NetworkError> {
        if samples < 2 {
            return Err(NetworkError::InvalidParameter(
                "response needs at least two samples".into(),
            ));
        }
        let dev = self.neuron_device(cal, mat)?;
        let ax = AxonCircuit::tuned(&dev, self.v_div, self.v_src, 1.0)?;
        let full = ax.output_at(&dev, 1.0).i_out;
        Ok(Response(
            (0..samples)
                .map(|k| (ax.output_at(&dev, k as f64 / (samples - 1) as f64).i_out / full).min(1.0))
                .collect(),
        ))
    }

    pub fn synapse_hm_resistance(&self, mat: &MaterialParams) -> Result<f64, NetworkError> {
        hm_resistance(self.synapse_hm_length, self.synapse_width, mat.t_hm, mat.rho_hm)
            .map_err(|e| NetworkError::InvalidParameter(e.to_string()))
    }
}

/// One crossbar pair and its bank of neurons.
#[derive(Debug, Clone, PartialEq)]
pub struct HwLayer {
    /// Rows: inputs then the bias row.
    pub xbar: CrossbarPair,
    pub neurons: Vec<DwDevice>,
    pub axons: Vec<AxonCircuit>,
    /// Axon current that encodes activation 1 (A).
    pub i_full: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub layers: Vec<HwLayer>,
    pub hw: HardwareConfig,
    pub mapping: WeightMapping,
    pub bits_a: u32,
    pub r_hm_synapse: f64,
    /// Weights that were rounded to zero or to the device floor.
    pub snapped: usize,
}

impl Pipeline {
    pub fn max_gamma(&self) -> f64 {
        self.layers.iter().map(|l| l.xbar.max_gamma()).fold(0.0, f64::max)
    }

    /// Per layer, per column `(γ_pos, γ_neg)`.
    pub fn gammas(&self) -> Vec<Vec<(f64, f64)>> {
        self.layers.iter().map(|l| l.xbar.gammas()).collect()
    }
}

/// Maps a quantized network onto crossbars, neurons and axons.
pub fn deploy(
    spec: &NetworkSpec,
    hw: &HardwareConfig,
    cal: &MtjCalibration,
    mat: &MaterialParams,
) -> Result<Pipeline, NetworkError> {
    spec.validate()?;
    if spec.quantized.is_none() {
        return Err(NetworkError::NotQuantized);
    }
    let synapse = hw.synapse_device(cal, mat)?;
    let mapping = hw.mapping(&synapse);
    let neuron = hw.neuron_device(cal, mat)?;
    let mut snapped = 0;
    let mut xbars = Vec::with_capacity(spec.layers.len());
    for layer in &spec.layers {
        let w = DMatrix::from_fn(layer.inputs + 1, layer.outputs, |i, j| {
            if i < layer.inputs {
                layer.weight(i, j)
            } else {
                layer.b[j]
            }
        });
        snapped += w
            .iter()
            .filter(|v| {
                **v != 0.0
                    && mapping
                        .conductance(v.abs())
                        .is_ok_and(|g| g != v.abs() * mapping.gain())
            })
            .count();
        let mut xbar = split_signed(&w, &mapping, vec![hw.r_neuron; layer.outputs])?;
        xbar.dummy_equalize();
        xbars.push(xbar);
    }
    let n = xbars.len();
    let mut layers = Vec::with_capacity(n);
    for l in 0..n {
        let i_full = if l + 1 < n {
            hw.v_max * xbars[l + 1].g_eq()
        } else {
            hw.i_out_last
        };
        let axon = AxonCircuit::tuned(&neuron, hw.v_div, hw.v_src, i_full)?;
        let outs = xbars[l].cols();
        layers.push(HwLayer {
            xbar: xbars[l].clone(),
            neurons: vec![neuron.clone(); outs],
            axons: vec![axon; outs],
            i_full,
        });
    }
    if snapped > 0 {
        log::info!("deploy: {snapped} weights rounded to the synapse floor or to OFF");
    }
    Ok(Pipeline {
        layers,
        hw: *hw,
        mapping,
        bits_a: spec.quant_bits_a,
        r_hm_synapse: hw.synapse_hm_resistance(mat)?,
        snapped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub class: usize,
    /// Axon output currents of the last layer (A).
    pub outputs: Vec<f64>,
    /// Normalized wall positions of every layer's neurons.
    pub states: Vec<Vec<f64>>,
    pub energy: EnergyLog,
}

/// Runs one image (pixel values in `[0, 1]`) through the hardware pipeline.
pub fn infer(p: &Pipeline, image: &[f64]) -> Result<Inference, NetworkError> {
    let hw = &p.hw;
    let first = &p.layers[0].xbar;
    if image.len() + 1 != first.rows() {
        return Err(NetworkError::Dimension(format!(
            "image has {} pixels, crossbar {} inputs",
            image.len(),
            first.rows() - 1
        )));
    }
    let mut log = EnergyLog {
        inferences: 1,
        ..Default::default()
    };
    let mut v: Vec<f64> = image
        .iter()
        .map(|x| x.clamp(0.0, 1.0) * hw.v_max)
        .chain([hw.v_max])
        .collect();
    let mut states = Vec::with_capacity(p.layers.len());
    let mut outputs = Vec::new();
    for (l, layer) in p.layers.iter().enumerate() {
        let xbar = &layer.xbar;
        let drive = RowDrive {
            v: v.clone(),
            duration: hw.t_write,
        };
        let pos = xbar.column_currents(&drive, Array::Pos)?;
        let neg = xbar.column_currents(&drive, Array::Neg)?;
        for a in [Array::Pos, Array::Neg] {
            let g = xbar.array(a);
            for (i, &vi) in v.iter().enumerate() {
                for j in 0..xbar.cols() {
                    log.log_synapse_read(vi, g[(i, j)], p.r_hm_synapse, hw.t_write);
                }
                log.log_synapse_read(vi, xbar.dummy[i], p.r_hm_synapse, hw.t_write);
            }
        }
        let mut layer_states = Vec::with_capacity(xbar.cols());
        outputs.clear();
        for j in 0..xbar.cols() {
            let mut neuron = NeuronState::new(layer.neurons[j].clone());
            let r_load = xbar.r_neuron[j];
            for i_in in [pos[j], neg[j]] {
                neuron.write(&hw.displacement, i_in, hw.t_write)?;
                log.neuron_write_j += write_energy(i_in, r_load, hw.t_write);
            }
            layer_states.push(neuron.state());
            let ax = &layer.axons[j];
            let out = neuron.read(ax)?;
            log.neuron_read_j += ax.v_div * ax.v_div / (neuron.dev.resistance() + ax.r_ref) * hw.t_read;
            let pulse = neuron.reset(hw.reset);
            log.neuron_reset_j += write_energy(pulse.current, r_load, pulse.duration);
            log.neuron_cycles += 1;
            outputs.push(out.i_out);
        }
        states.push(layer_states);
        if let Some(next) = p.layers.get(l + 1) {
            let totals = next.xbar.row_totals();
            v = outputs
                .iter()
                .zip(&totals)
                .map(|(i_out, g_row)| {
                    quantize_activation((i_out / layer.i_full).min(1.0), p.bits_a) * layer.i_full / g_row
                })
                .chain([hw.v_max])
                .collect();
        }
    }
    let class = if outputs.len() == 1 {
        usize::from(outputs[0] > 0.5 * p.layers.last().unwrap().i_full)
    } else {
        argmax(&outputs)
    };
    Ok(Inference {
        class,
        outputs,
        states,
        energy: log,
    })
}

/// Fraction of `ds` the pipeline classifies correctly.
pub fn hw_accuracy(p: &Pipeline, ds: &Dataset) -> Result<f64, NetworkError> {
    if ds.is_empty() {
        return Ok(0.0);
    }
    let hits = ds
        .images
        .par_iter()
        .zip(&ds.labels)
        .map(|(x, y)| infer(p, x).map(|r| usize::from(r.class == *y)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / ds.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mtj::default_calibration;
    use crate::network::quantize;

    fn small(seed: u64) -> NetworkSpec {
        let mut s = NetworkSpec::new(&[8, 4, 3], 4, 2).unwrap();
        s.init_random(seed, 1.5, 0.2, 0.1);
        quantize(&s).unwrap()
    }

    #[test]
    fn default_devices() {
        let hw = HardwareConfig::default();
        let mat = MaterialParams::default();
        let syn = hw.synapse_device(default_calibration(), &mat).unwrap();
        assert!((syn.g_max() * 20e3 - 1.0).abs() < 1e-9);
        assert!((4.0..8.0).contains(&syn.weight_range()), "{}", syn.weight_range());
        assert!((hw.synapse_hm_resistance(&mat).unwrap() - 50.0).abs() < 1e-9);
    }

    #[test]
    fn response_is_normalized_and_monotone() {
        let r = HardwareConfig::default()
            .neuron_response(default_calibration(), &MaterialParams::default(), 65)
            .unwrap();
        r.validate().unwrap();
        assert_eq!(r.0[0], 0.0);
        assert_eq!(*r.0.last().unwrap(), 1.0);
    }

    #[test]
    fn needs_quantized_spec() {
        let mut s = NetworkSpec::new(&[2, 2], 4, 2).unwrap();
        s.init_random(0, 1.0, 0.0, 0.0);
        let r = deploy(
            &s,
            &HardwareConfig::default(),
            default_calibration(),
            &MaterialParams::default(),
        );
        assert_eq!(r.unwrap_err(), NetworkError::NotQuantized);
    }

    #[test]
    fn zero_network_outputs_zero_input_activation() {
        let s = quantize(&NetworkSpec::new(&[8, 4, 3], 4, 2).unwrap()).unwrap();
        let p = deploy(
            &s,
            &HardwareConfig::default(),
            default_calibration(),
            &MaterialParams::default(),
        )
        .unwrap();
        assert!(p
            .layers
            .iter()
            .all(|l| l.xbar.g_pos.iter().chain(l.xbar.g_neg.iter()).all(|g| *g == 1e-7)));
        for img in [vec![0.0; 8], vec![1.0; 8]] {
            let r = infer(&p, &img).unwrap();
            assert_eq!(r.class, 0);
            // OFF cells leak a little current; the wall barely moves.
            assert!(r.outputs.iter().all(|o| *o < 1e-3 * p.layers[1].i_full));
        }
    }

    #[test]
    fn outputs_within_plateau_and_energy_logged() {
        let p = deploy(
            &small(3),
            &HardwareConfig::default(),
            default_calibration(),
            &MaterialParams::default(),
        )
        .unwrap();
        let r = infer(&p, &[0.5; 8]).unwrap();
        assert!(r
            .outputs
            .iter()
            .all(|o| (0.0..=p.hw.i_out_last * (1.0 + 1e-12)).contains(o)));
        assert_eq!(r.energy.neuron_cycles, 7);
        assert!(r.energy.neuron_reset_j > 0.0 && r.energy.synapse_read_j > 0.0);
        assert!(infer(&p, &[0.5; 7]).is_err());
    }
}
