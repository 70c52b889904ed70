use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::deploy::DeviceConstraints;
use super::spec::{Layer, NetworkSpec};
use super::NetworkError;
use crate::io::dataset::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Samples per parallel gradient task; fixes the summation order.
    pub chunk_size: usize,
    /// Weights are kept in `[-clip, clip]`.
    pub clip: f64,
    /// Shuffling seed; runs take it from the top-level config seed.
    #[serde(skip)]
    pub seed: u64,
    /// Share of the epochs trained before the zero pattern is frozen (with constraints).
    pub sparse_fraction: f64,
    /// Device limits the trained weights must respect; `None` trains unconstrained.
    #[serde(skip)]
    pub constraints: Option<DeviceConstraints>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 300,
            learning_rate: 0.1,
            batch_size: 26,
            chunk_size: 8,
            clip: 1.0,
            seed: 1,
            sparse_fraction: 0.5,
            constraints: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-sample loss of each epoch.
    pub losses: Vec<f64>,
    pub train_accuracy: f64,
}

struct Grad {
    w: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    loss: f64,
}

impl Grad {
    fn zeros(spec: &NetworkSpec) -> Self {
        Self {
            w: spec.layers.iter().map(|l| vec![0.0; l.w.len()]).collect(),
            b: spec.layers.iter().map(|l| vec![0.0; l.b.len()]).collect(),
            loss: 0.0,
        }
    }

    fn add(&mut self, o: &Grad) {
        for (a, b) in self.w.iter_mut().flatten().zip(o.w.iter().flatten()) {
            *a += b;
        }
        for (a, b) in self.b.iter_mut().flatten().zip(o.b.iter().flatten()) {
            *a += b;
        }
        self.loss += o.loss;
    }
}

/// Accumulates the squared-error gradient of one sample into `g`.
fn backprop(spec: &NetworkSpec, x: &[f64], label: usize, g: &mut Grad) {
    let n = spec.layers.len();
    let mut acts = vec![x.to_vec()];
    let mut drives = Vec::with_capacity(n);
    for layer in &spec.layers {
        let (zp, zn) = layer.drives(acts.last().unwrap(), spec.off_weight);
        acts.push(zp.iter().zip(&zn).map(|(p, q)| spec.activate(*p, *q)).collect());
        drives.push((zp, zn));
    }
    let out = &acts[n];
    let mut d_a: Vec<f64> = out
        .iter()
        .enumerate()
        .map(|(j, a)| {
            let t = if out.len() == 1 {
                label as f64
            } else {
                f64::from(u8::from(j == label))
            };
            a - t
        })
        .collect();
    g.loss += 0.5 * d_a.iter().map(|d| d * d).sum::<f64>();

    for l in (0..n).rev() {
        let layer = &spec.layers[l];
        let (zp, zn) = &drives[l];
        let delta: Vec<f64> = (0..layer.outputs)
            .map(|j| {
                let u = zp[j].min(1.0) - zn[j];
                if u > 0.0 && u < 1.0 {
                    d_a[j] * spec.response.slope(u)
                } else {
                    0.0
                }
            })
            .collect();
        // Positive weights stop mattering once the positive phase saturates the wall.
        let pass = |w: f64, j: usize| {
            if w >= 0.0 {
                f64::from(u8::from(zp[j] < 1.0))
            } else {
                1.0
            }
        };
        let off = spec.off_weight;
        let x = &acts[l];
        let mut d_x = vec![0.0; layer.inputs];
        for (i, &xi) in x.iter().enumerate() {
            let row = &layer.w[i * layer.outputs..(i + 1) * layer.outputs];
            let grow = &mut g.w[l][i * layer.outputs..(i + 1) * layer.outputs];
            let mut acc = 0.0;
            for j in 0..layer.outputs {
                if delta[j] == 0.0 {
                    continue;
                }
                let w = row[j];
                grow[j] += pass(w, j) * delta[j] * xi;
                let dp = if w > 0.0 { w } else { off };
                let dn = if w < 0.0 { -w } else { off };
                acc += delta[j] * (f64::from(u8::from(zp[j] < 1.0)) * dp - dn);
            }
            d_x[i] = acc;
        }
        for (j, d) in delta.iter().enumerate() {
            g.b[l][j] += pass(layer.b[j], j) * d;
        }
        d_a = d_x;
    }
}

/// Euclidean projection of magnitudes `m` onto `{lo <= m_i <= hi, Σ m_i <= budget}`:
/// `m_i = clamp(m_i - θ, lo, hi)` with the smallest feasible `θ >= 0`.
fn project_magnitudes(m: &mut [f64], lo: f64, hi: f64, budget: f64) {
    let total = |t: f64, m: &[f64]| m.iter().map(|x| (x - t).clamp(lo, hi)).sum::<f64>();
    if total(0.0, m) > budget {
        let (mut a, mut b) = (0.0, m.iter().copied().fold(0.0, f64::max));
        for _ in 0..60 {
            let t = 0.5 * (a + b);
            if total(t, m) > budget {
                a = t;
            } else {
                b = t;
            }
        }
        m.iter_mut().for_each(|x| *x = (*x - b).clamp(lo, hi));
    } else {
        m.iter_mut().for_each(|x| *x = x.clamp(lo, hi));
    }
}

/// Cell of a layer: a weight or (index `inputs`) the bias row.
fn cell(layer: &mut Layer, i: usize, j: usize) -> &mut f64 {
    if i < layer.inputs {
        &mut layer.w[i * layer.outputs + j]
    } else {
        &mut layer.b[j]
    }
}

/// Applies the weight clip and, with constraints, each column's per-sign L1 budget.
/// Once `mask` is set, masked-out cells stay zero and the rest keep their sign with
/// magnitude in `[w_floor, clip]`; cells the budget cannot afford are dropped from the mask.
fn project(latent: &mut NetworkSpec, clip: f64, c: Option<&DeviceConstraints>, mut mask: Option<&mut Vec<Vec<i8>>>) {
    let Some(c) = c else {
        for v in latent.layers.iter_mut().flat_map(|l| l.values_mut()) {
            *v = v.clamp(-clip, clip);
        }
        return;
    };
    for (l, layer) in latent.layers.iter_mut().enumerate() {
        let budget = c.l1_budget[l];
        let rows = layer.inputs + 1;
        for j in 0..layer.outputs {
            for sign in [1i8, -1] {
                let sf = f64::from(sign);
                let idx: Vec<usize> = match mask.as_deref() {
                    Some(mk) => (0..rows).filter(|&i| mk[l][i * layer.outputs + j] == sign).collect(),
                    None => (0..rows).filter(|&i| *cell(layer, i, j) * sf > 0.0).collect(),
                };
                let lo = if mask.is_some() { c.w_floor } else { 0.0 };
                let mut mags: Vec<f64> = idx.iter().map(|&i| (*cell(layer, i, j) * sf).max(0.0)).collect();
                let mut keep = idx.len();
                // Drop the weakest cells until the floor itself fits the budget.
                if lo * keep as f64 > budget {
                    let mut order: Vec<usize> = (0..idx.len()).collect();
                    order.sort_by(|&a, &b| mags[b].total_cmp(&mags[a]).then(a.cmp(&b)));
                    keep = (budget / lo).floor() as usize;
                    for &k in &order[keep..] {
                        mags[k] = 0.0;
                        if let Some(mk) = mask.as_deref_mut() {
                            mk[l][idx[k] * layer.outputs + j] = 0;
                        }
                    }
                    let kept: Vec<usize> = order[..keep].to_vec();
                    let mut sub: Vec<f64> = kept.iter().map(|&k| mags[k]).collect();
                    project_magnitudes(&mut sub, lo, clip, budget);
                    for (k, v) in kept.into_iter().zip(sub) {
                        mags[k] = v;
                    }
                } else {
                    project_magnitudes(&mut mags, lo, clip, budget);
                }
                for (&i, m) in idx.iter().zip(mags) {
                    *cell(layer, i, j) = sf * m;
                }
            }
        }
        if let Some(mk) = mask.as_deref() {
            for i in 0..rows {
                for j in 0..layer.outputs {
                    if mk[l][i * layer.outputs + j] == 0 {
                        *cell(layer, i, j) = 0.0;
                    }
                }
            }
        }
    }
}

/// Sign mask for the second phase: cells at or above half the floor survive.
fn build_mask(latent: &NetworkSpec, floor: f64) -> Vec<Vec<i8>> {
    latent
        .layers
        .iter()
        .map(|layer| {
            (0..(layer.inputs + 1) * layer.outputs)
                .map(|k| {
                    let (i, j) = (k / layer.outputs, k % layer.outputs);
                    let v = if i < layer.inputs { layer.w[k] } else { layer.b[j] };
                    if v.abs() >= 0.5 * floor && v != 0.0 {
                        v.signum() as i8
                    } else {
                        0
                    }
                })
                .collect()
        })
        .collect()
}

/// Mini-batch gradient descent on squared error through the saturating neuron response.
///
/// Starts from the weights in `spec`. With device constraints every step is followed by a
/// projection onto the per-column conductance budget, which also sparsifies. After
/// `sparse_fraction` of the epochs the zero pattern is frozen and the remaining weights are
/// held at or above the synapse floor.
pub fn train(
    ds: &Dataset,
    spec: &NetworkSpec,
    opts: &TrainOptions,
) -> Result<(NetworkSpec, TrainReport), NetworkError> {
    spec.validate()?;
    spec.check_input(ds)?;
    if ds.is_empty() || opts.batch_size == 0 || opts.chunk_size == 0 {
        return Err(NetworkError::InvalidParameter("empty dataset or zero batch".into()));
    }
    if !(opts.learning_rate >= 0.0 && opts.learning_rate.is_finite()) || !(opts.clip > 0.0) {
        return Err(NetworkError::InvalidParameter(format!(
            "learning rate {} / clip {}",
            opts.learning_rate, opts.clip
        )));
    }
    let c = opts.constraints.as_ref();
    if let Some(c) = c {
        if c.l1_budget.len() != spec.layers.len() {
            return Err(NetworkError::Dimension(
                "one conductance budget per layer required".into(),
            ));
        }
    }
    let mut latent = spec.clone();
    latent.quantized = None;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut losses = Vec::with_capacity(opts.epochs);
    let mut mask: Option<Vec<Vec<i8>>> = None;
    for epoch in 0..opts.epochs {
        order.shuffle(&mut rng);
        if let Some(c) = c {
            if mask.is_none() && epoch as f64 >= opts.sparse_fraction * opts.epochs as f64 {
                let mut mk = build_mask(&latent, c.w_floor);
                project(&mut latent, opts.clip, Some(c), Some(&mut mk));
                mask = Some(mk);
            }
        }
        let mut epoch_loss = 0.0;
        for batch in order.chunks(opts.batch_size) {
            let eff = &latent;
            let parts: Vec<Grad> = batch
                .par_chunks(opts.chunk_size)
                .map(|chunk| {
                    let mut g = Grad::zeros(eff);
                    for &k in chunk {
                        backprop(eff, &ds.images[k], ds.labels[k], &mut g);
                    }
                    g
                })
                .collect();
            let mut g = Grad::zeros(eff);
            for p in &parts {
                g.add(p);
            }
            epoch_loss += g.loss;
            if opts.learning_rate == 0.0 {
                continue;
            }
            let step = opts.learning_rate / batch.len() as f64;
            for (layer, (gw, gb)) in latent.layers.iter_mut().zip(g.w.iter().zip(&g.b)) {
                for (w, d) in layer.w.iter_mut().zip(gw) {
                    *w -= step * d;
                }
                for (b, d) in layer.b.iter_mut().zip(gb) {
                    *b -= step * d;
                }
            }
            project(&mut latent, opts.clip, c, mask.as_mut());
        }
        let mean = epoch_loss / ds.len() as f64;
        if !mean.is_finite() || !latent.layers.iter().flat_map(|l| l.values()).all(|v| v.is_finite()) {
            return Err(NetworkError::NonFiniteLoss { epoch });
        }
        losses.push(mean);
        log::debug!("epoch {epoch}: loss {mean:.5}");
    }
    if let (Some(c), None) = (c, &mask) {
        let mut mk = build_mask(&latent, c.w_floor);
        project(&mut latent, opts.clip, Some(c), Some(&mut mk));
    }
    let trained = latent;
    let train_accuracy = trained.accuracy(ds);
    Ok((trained, TrainReport { losses, train_accuracy }))
}
