use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::quantize::quantize_activation;
use super::NetworkError;
use crate::io::dataset::Dataset;

/// Dense layer; `w` is row-major `inputs × outputs` (crossbar orientation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            w: vec![0.0; inputs * outputs],
            b: vec![0.0; outputs],
        }
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.outputs + j]
    }

    /// Positive and negative drive of each output: `Σ max(w,0) x` and `Σ max(-w,0) x`,
    /// biases included as an always-on input. A cell holding no weight in an array still
    /// conducts `off` (weight units).
    pub fn drives(&self, x: &[f64], off: f64) -> (Vec<f64>, Vec<f64>) {
        let mut zp = vec![0.0; self.outputs];
        let mut zn = vec![0.0; self.outputs];
        let mut add = |j: usize, w: f64, xi: f64| {
            zp[j] += if w > 0.0 { w } else { off } * xi;
            zn[j] += if w < 0.0 { -w } else { off } * xi;
        };
        for (j, &b) in self.b.iter().enumerate() {
            add(j, b, 1.0);
        }
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (j, &w) in self.w[i * self.outputs..(i + 1) * self.outputs].iter().enumerate() {
                add(j, w, xi);
            }
        }
        (zp, zn)
    }

    /// All weights and biases.
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.w.iter().chain(&self.b)
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w.iter_mut().chain(self.b.iter_mut())
    }
}

/// Normalized neuron response: the positive phase saturates the wall at the far edge before
/// the negative phase pulls it back, and the wall cannot pass the left edge.
pub fn activation(zp: f64, zn: f64) -> f64 {
    (zp.min(1.0) - zn).clamp(0.0, 1.0)
}

/// Neuron output against normalized wall position, sampled evenly over `[0, 1]` and
/// linearly interpolated. Empty is the identity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Response(pub Vec<f64>);

impl Response {
    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    fn segment(&self, s: f64) -> (usize, f64) {
        let n = self.0.len() - 1;
        let u = s.clamp(0.0, 1.0) * n as f64;
        let k = (u.floor() as usize).min(n - 1);
        (k, u - k as f64)
    }

    pub fn eval(&self, s: f64) -> f64 {
        if self.0.len() < 2 {
            return s;
        }
        let (k, t) = self.segment(s);
        self.0[k] + t * (self.0[k + 1] - self.0[k])
    }

    /// d eval / ds, taken from the segment to the right at a knot.
    pub fn slope(&self, s: f64) -> f64 {
        if self.0.len() < 2 {
            return 1.0;
        }
        let (k, _) = self.segment(s);
        (self.0[k + 1] - self.0[k]) * (self.0.len() - 1) as f64
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.is_identity() {
            return Ok(());
        }
        let ok = self.0.len() >= 2
            && self.0.iter().all(|v| v.is_finite())
            && self.0.windows(2).all(|w| w[1] >= w[0])
            && self.0[0] >= 0.0
            && *self.0.last().unwrap() <= 1.0;
        if !ok {
            return Err(NetworkError::InvalidParameter(
                "response must be non-decreasing within [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Index of the first maximum.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = k;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantInfo {
    /// Per-layer `[min, max]` of weights and biases.
    pub ranges: Vec<(f64, f64)>,
    pub bits_w: u32,
    pub bits_a: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub sizes: Vec<usize>,
    pub layers: Vec<Layer>,
    pub quant_bits_w: u32,
    pub quant_bits_a: u32,
    /// Present once weights are quantized; hidden activations are then quantized too.
    pub quantized: Option<QuantInfo>,
    #[serde(default)]
    pub response: Response,
    /// OFF-cell conductance in weight units, seen by both arrays.
    #[serde(default)]
    pub off_weight: f64,
}

impl NetworkSpec {
    pub fn new(sizes: &[usize], quant_bits_w: u32, quant_bits_a: u32) -> Result<Self, NetworkError> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(NetworkError::Dimension(format!("layer sizes {sizes:?}")));
        }
        if !(1..=16).contains(&quant_bits_w) || !(1..=16).contains(&quant_bits_a) {
            return Err(NetworkError::InvalidParameter(format!(
                "bit widths {quant_bits_w}/{quant_bits_a}"
            )));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            layers: sizes.windows(2).map(|p| Layer::zeros(p[0], p[1])).collect(),
            quant_bits_w,
            quant_bits_a,
            quantized: None,
            response: Response::default(),
            off_weight: 0.0,
        })
    }

    /// Uniform weights in `[-scale, scale]`; biases at `bias0` for hidden layers and
    /// `bias_out` for the last.
    pub fn init_random(&mut self, seed: u64, scale: f64, bias0: f64, bias_out: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.layers.len();
        for (l, layer) in self.layers.iter_mut().enumerate() {
            let s = scale / (layer.inputs as f64).sqrt();
            for w in layer.w.iter_mut() {
                *w = rng.random_range(-s..=s);
            }
            let b = if l + 1 == n { bias_out } else { bias0 };
            layer.b.iter_mut().for_each(|x| *x = b);
        }
        self.quantized = None;
    }

    /// Output of a neuron with drives `zp`, `zn`.
    pub fn activate(&self, zp: f64, zn: f64) -> f64 {
        self.response.eval(activation(zp, zn))
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        self.response.validate()?;
        if !(self.off_weight >= 0.0 && self.off_weight < 1.0) {
            return Err(NetworkError::InvalidParameter(format!(
                "off_weight {}",
                self.off_weight
            )));
        }
        if self.layers.len() + 1 != self.sizes.len() {
            return Err(NetworkError::Dimension("layer count does not match sizes".into()));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.inputs != self.sizes[l]
                || layer.outputs != self.sizes[l + 1]
                || layer.w.len() != layer.inputs * layer.outputs
                || layer.b.len() != layer.outputs
            {
                return Err(NetworkError::Dimension(format!("layer {l} shape")));
            }
            if layer.values().any(|v| !v.is_finite()) {
                return Err(NetworkError::InvalidParameter(format!(
                    "layer {l} has non-finite values"
                )));
            }
        }
        Ok(())
    }

    /// Activations of every layer, input first.
    pub fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        let n = self.layers.len();
        for (l, layer) in self.layers.iter().enumerate() {
            let (zp, zn) = layer.drives(acts.last().unwrap(), self.off_weight);
            let mut a: Vec<f64> = zp.iter().zip(&zn).map(|(p, q)| self.activate(*p, *q)).collect();
            if l + 1 < n && self.quantized.is_some() {
                a.iter_mut()
                    .for_each(|v| *v = quantize_activation(*v, self.quant_bits_a));
            }
            acts.push(a);
        }
        acts
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let out = self.forward(x).pop().unwrap();
        if out.len() == 1 {
            usize::from(out[0] > 0.5)
        } else {
            argmax(&out)
        }
    }

    pub fn accuracy(&self, ds: &Dataset) -> f64 {
        if ds.is_empty() {
            return 0.0;
        }
        let hits = ds
            .images
            .iter()
            .zip(&ds.labels)
            .filter(|(x, y)| self.predict(x) == **y)
            .count();
        hits as f64 / ds.len() as f64
    }

    pub fn check_input(&self, ds: &Dataset) -> Result<(), NetworkError> {
        if let Some(bad) = ds.images.iter().position(|x| x.len() != self.sizes[0]) {
            return Err(NetworkError::Dimension(format!(
                "sample {bad} has {} inputs, expected {}",
                ds.images[bad].len(),
                self.sizes[0]
            )));
        }
        let classes = *self.sizes.last().unwrap();
        let max_label = if classes == 1 { 1 } else { classes - 1 };
        if let Some(bad) = ds.labels.iter().position(|&y| y > max_label) {
            return Err(NetworkError::Dimension(format!(
                "label {} of sample {bad} out of range",
                ds.labels[bad]
            )));
        }
        if ds.labels.len() != ds.images.len() {
            return Err(NetworkError::Dimension("labels and images differ in count".into()));
        }
        Ok(())
    }
}

pub fn save_checkpoint(spec: &NetworkSpec, path: &Path) -> Result<(), NetworkError> {
    let json = serde_json::to_vec_pretty(spec).map_err(|e| NetworkError::Checkpoint(e.to_string()))?;
    crate::io::atomic_write(path, &json).map_err(|e| NetworkError::Checkpoint(e.to_string()))
}

pub fn load_checkpoint(path: &Path) -> Result<NetworkSpec, NetworkError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| NetworkError::Checkpoint(format!("{}: {e}", path.display())))?;
    let spec: NetworkSpec =
        serde_json::from_str(&text).map_err(|e| NetworkError::Checkpoint(format!("{}: {e}", path.display())))?;
    spec.validate()?;
    Ok(spec)
}
