use super::spec::{NetworkSpec, QuantInfo};
use super::NetworkError;

/// Rounds `v` onto `2^bits + 1` evenly spaced levels over `[lo, hi]`; the end levels are
/// `lo` and `hi` exactly.
pub fn quantize_values(v: f64, lo: f64, hi: f64, bits: u32) -> f64 {
    if hi <= lo {
        return lo;
    }
    let n = (1u64 << bits) as f64;
    let step = (hi - lo) / n;
    let code = ((v - lo) / step).round().clamp(0.0, n);
    if code == n {
        hi
    } else {
        lo + code * step
    }
}

/// Neuron output code on `2^bits + 1` levels over `[0, 1]`.
pub fn quantize_activation(a: f64, bits: u32) -> f64 {
    quantize_values(a, 0.0, 1.0, bits)
}

/// Post-training quantization: each layer's weights and biases share one uniform grid over
/// `[-m, m]`, `m` the layer's largest magnitude, so zero stays a level; hidden activations
/// are quantized in the forward pass from then on.
pub fn quantize(spec: &NetworkSpec) -> Result<NetworkSpec, NetworkError> {
    spec.validate()?;
    let mut out = spec.clone();
    let mut ranges = Vec::with_capacity(out.layers.len());
    for (l, layer) in out.layers.iter_mut().enumerate() {
        let min = layer.values().copied().fold(f64::INFINITY, f64::min);
        let max = layer.values().copied().fold(f64::NEG_INFINITY, f64::max);
        if max <= min {
            log::warn!("layer {l}: all weights equal ({min}); quantized to a single level");
        }
        let hi = min.abs().max(max.abs());
        let lo = -hi;
        layer
            .values_mut()
            .for_each(|v| *v = quantize_values(*v, lo, hi, spec.quant_bits_w));
        ranges.push((lo, hi));
    }
    out.quantized = Some(QuantInfo {
        ranges,
        bits_w: spec.quant_bits_w,
        bits_a: spec.quant_bits_a,
    });
    Ok(out)
}

/// Rounds magnitudes below the synapse floor the way the crossbar mapping does: to zero
/// under half the floor, to the floor otherwise. The result holds exactly what deploys.
pub fn snap_to_floor(spec: &NetworkSpec, w_floor: f64) -> NetworkSpec {
    let mut out = spec.clone();
    for v in out.layers.iter_mut().flat_map(|l| l.values_mut()) {
        let m = v.abs();
        if m > 0.0 && m < w_floor {
            *v = if m < 0.5 * w_floor { 0.0 } else { v.signum() * w_floor };
        }
    }
    out
}
