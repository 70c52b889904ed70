use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::dataset::GlyphNoise;
use super::IoError;
use crate::energy::EnergyConfig;
use crate::magnetics::{MaterialParams, StripGeometry, SweepOptions};
use crate::mtj::FitOptions;
use crate::network::{HardwareConfig, TrainOptions, VariationModel};

/// Velocity sweep on a wide, long strip where the pinned bands are far from the wall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub geometry: StripGeometry,
    /// Current densities (A/m²), ascending.
    pub j_list: Vec<f64>,
    pub options: SweepOptions,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            geometry: StripGeometry {
                free_length: 600e-9,
                width: 160e-9,
                ..Default::default()
            },
            j_list: [0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 1.0, 1.5, 2.0, 3.0]
                .iter()
                .map(|j| j * 1e12)
                .collect(),
            options: SweepOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MtjConfig {
    /// Calibration table (`t_mgo_nm,v_mV,theta_rad,r_ohm`); the bundled table if absent.
    pub samples: Option<PathBuf>,
    pub fit: FitOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransferConfig {
    /// Largest input current of the sweep (A).
    pub i_max: f64,
    pub points: usize,
    /// Axon full-scale current (A).
    pub i_out_max: f64,
}

impl Default for TransferConfig {
    fn default() -> Self {
        Self {
            i_max: 10e-6,
            points: 101,
            i_out_max: 10e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    /// Layer widths, input first.
    pub sizes: Vec<usize>,
    pub bits_w: u32,
    pub bits_a: u32,
    /// Initial weights are uniform in `±init_scale/sqrt(fan_in)`.
    pub init_scale: f64,
    pub bias_hidden: f64,
    pub bias_out: f64,
    /// Train within the crossbar loading budget and synapse floor.
    pub constrained: bool,
    /// Trained model to deploy; `<out>/model.json` if absent.
    pub checkpoint: Option<PathBuf>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            sizes: vec![256, 20, 26],
            bits_w: 4,
            bits_a: 2,
            init_scale: 1.0,
            bias_hidden: 0.3,
            bias_out: 0.2,
            constrained: true,
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    /// User images (class subdirectories or `labels.csv`); synthetic glyphs if absent.
    pub train_dir: Option<PathBuf>,
    pub test_dir: Option<PathBuf>,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub noise: GlyphNoise,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            train_dir: None,
            test_dir: None,
            train_per_class: 40,
            test_per_class: 10,
            noise: GlyphNoise::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub material: MaterialParams,
    pub sweep: SweepConfig,
    pub mtj: MtjConfig,
    pub transfer: TransferConfig,
    pub hardware: HardwareConfig,
    pub network: NetworkConfig,
    pub train: TrainOptions,
    pub dataset: DatasetConfig,
    pub variation: VariationModel,
    pub energy: EnergyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            out_dir: PathBuf::from("out"),
            material: MaterialParams::default(),
            sweep: SweepConfig::default(),
            mtj: MtjConfig::default(),
            transfer: TransferConfig::default(),
            hardware: HardwareConfig::default(),
            network: NetworkConfig::default(),
            train: TrainOptions::default(),
            dataset: DatasetConfig::default(),
            variation: VariationModel::default(),
            energy: EnergyConfig::default(),
        }
    }
}

/// Reads, shape-checks, deserializes and validates a config file.
pub fn load_config(path: &Path) -> Result<RunConfig, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig, IoError> {
    let v: Value = serde_json::from_str(text).map_err(|e| IoError::config("(root)", e.to_string()))?;
    let template = serde_json::to_value(RunConfig::default()).expect("default config serializes");
    check_shape(&v, &template, "")?;
    let cfg: RunConfig = serde_json::from_value(v).map_err(|e| IoError::config("(root)", e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), IoError> {
        let m = &self.material;
        positive(&[
            ("material.ms", m.ms),
            ("material.alpha", m.alpha),
            ("material.a_ex", m.a_ex),
            ("material.t_fm", m.t_fm),
            ("material.t_hm", m.t_hm),
            ("material.rho_hm", m.rho_hm),
        ])?;
        m.validate().map_err(|e| IoError::config("material", e.to_string()))?;

        let g = &self.sweep.geometry;
        positive(&[
            ("sweep.geometry.free_length", g.free_length),
            ("sweep.geometry.width", g.width),
            ("sweep.geometry.cell[0]", g.cell[0]),
            ("sweep.geometry.cell[1]", g.cell[1]),
            ("sweep.geometry.cell[2]", g.cell[2]),
            ("sweep.options.duration", self.sweep.options.duration),
            ("sweep.options.run.llg.dt", self.sweep.options.run.llg.dt),
            (
                "sweep.options.run.sample_interval",
                self.sweep.options.run.sample_interval,
            ),
        ])?;
        g.validate()
            .map_err(|e| IoError::config("sweep.geometry", e.to_string()))?;
        if self.sweep.j_list.windows(2).any(|w| w[1] < w[0]) {
            return Err(IoError::config("sweep.j_list", "must be ascending"));
        }

        let f = &self.mtj.fit;
        positive(&[("mtj.fit.area_ref", f.area_ref), ("mtj.fit.d_exp", f.d_exp)])?;

        let t = &self.transfer;
        positive(&[("transfer.i_max", t.i_max), ("transfer.i_out_max", t.i_out_max)])?;
        if t.points < 2 {
            return Err(IoError::config("transfer.points", "need at least 2"));
        }

        let h = &self.hardware;
        positive(&[
            ("hardware.v_max", h.v_max),
            ("hardware.v_eval", h.v_eval),
            ("hardware.t_write", h.t_write),
            ("hardware.t_read", h.t_read),
            ("hardware.r_min", h.r_min),
            ("hardware.r_off", h.r_off),
            ("hardware.r_neuron", h.r_neuron),
            ("hardware.gamma_max", h.gamma_max),
            ("hardware.budget_fraction", h.budget_fraction),
            ("hardware.synapse_length", h.synapse_length),
            ("hardware.synapse_width", h.synapse_width),
            ("hardware.synapse_hm_length", h.synapse_hm_length),
            ("hardware.neuron_length", h.neuron_length),
            ("hardware.neuron_width", h.neuron_width),
            ("hardware.neuron_t_mgo", h.neuron_t_mgo),
            ("hardware.v_div", h.v_div),
            ("hardware.v_src", h.v_src),
            ("hardware.i_out_last", h.i_out_last),
            ("hardware.displacement.i_crit", h.displacement.i_crit),
            ("hardware.displacement.t_ref", h.displacement.t_ref),
            ("hardware.reset.current", h.reset.current),
            ("hardware.reset.duration", h.reset.duration),
        ])?;
        if h.r_off <= h.r_min {
            return Err(IoError::config("hardware.r_off", "must exceed hardware.r_min"));
        }

        let n = &self.network;
        if n.sizes.len() < 2 || n.sizes.contains(&0) {
            return Err(IoError::config(
                "network.sizes",
                "need at least two non-zero layer widths",
            ));
        }
        if !(1..=16).contains(&n.bits_w) || !(1..=16).contains(&n.bits_a) {
            return Err(IoError::config("network.bits_w", "bit widths must lie in 1..=16"));
        }
        positive(&[("network.init_scale", n.init_scale)])?;

        let tr = &self.train;
        positive(&[("train.clip", tr.clip)])?;
        if !(tr.learning_rate >= 0.0 && tr.learning_rate.is_finite()) {
            return Err(IoError::config(
                "train.learning_rate",
                "must be finite and non-negative",
            ));
        }
        if tr.batch_size == 0 || tr.chunk_size == 0 {
            return Err(IoError::config(
                "train.batch_size",
                "batch and chunk sizes must be positive",
            ));
        }

        let d = &self.dataset;
        if d.train_per_class == 0 || d.test_per_class == 0 {
            return Err(IoError::config(
                "dataset.train_per_class",
                "need at least one image per class",
            ));
        }
        if !(0.0..=1.0).contains(&d.noise.dropout)
            || !(0.0..=1.0).contains(&d.noise.min_ink)
            || d.noise.pixel_sigma < 0.0
        {
            return Err(IoError::config(
                "dataset.noise",
                "dropout and min_ink in [0, 1], pixel_sigma >= 0",
            ));
        }

        self.variation
            .validate()
            .map_err(|e| IoError::config("variation", e.to_string()))?;

        let e = &self.energy;
        positive(&[
            ("energy.r_neuron_path", e.r_neuron_path),
            ("energy.t_write_phase", e.t_write_phase),
            ("energy.v_div", e.v_div),
            ("energy.t_read", e.t_read),
            ("energy.t_reset", e.t_reset),
            ("energy.v_spin", e.v_spin),
            ("energy.v_cmos", e.v_cmos),
            ("energy.cmos_analog_j", e.cmos_analog_j),
            ("energy.cmos_digital_j", e.cmos_digital_j),
        ])?;
        Ok(())
    }
}

fn positive(fields: &[(&str, f64)]) -> Result<(), IoError> {
    for &(name, v) in fields {
        if !(v.is_finite() && v > 0.0) {
            return Err(IoError::config(name, format!("must be positive, got {v}")));
        }
    }
    Ok(())
}

/// Compares `v` against the serialized default so unknown keys and type mismatches
/// are reported with their full path. `null` in the template (optional fields) accepts anything.
fn check_shape(v: &Value, template: &Value, path: &str) -> Result<(), IoError> {
    let here = if path.is_empty() { "(root)" } else { path };
    match template {
        Value::Null => Ok(()),
        Value::Object(t) => {
            let Value::Object(o) = v else {
                return Err(IoError::config(here, format!("expected an object, got {}", kind(v))));
            };
            for (k, x) in o {
                let p = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                match t.get(k) {
                    Some(tx) => check_shape(x, tx, &p)?,
                    None => return Err(IoError::config(p, "unknown key")),
                }
            }
            Ok(())
        }
        Value::Array(t) => {
            let Value::Array(a) = v else {
                return Err(IoError::config(here, format!("expected an array, got {}", kind(v))));
            };
            if let Some(t0) = t.first() {
                for (i, x) in a.iter().enumerate() {
                    check_shape(x, t0, &format!("{path}[{i}]"))?;
                }
            }
            Ok(())
        }
        Value::Number(n) => {
            let Value::Number(x) = v else {
                return Err(IoError::config(here, format!("expected a number, got {}", kind(v))));
            };
            if n.is_u64() && !x.is_u64() {
                return Err(IoError::config(
                    here,
                    format!("expected a non-negative integer, got {x}"),
                ));
            }
            Ok(())
        }
        Value::Bool(_) if !v.is_boolean() => Err(IoError::config(here, format!("expected a boolean, got {}", kind(v)))),
        Value::String(_) if !v.is_string() => Err(IoError::config(here, format!("expected a string, got {}", kind(v)))),
        _ => Ok(()),
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}
