//! Stage functions shared by the command line and the acceptance suite. Every stage is a
//! pure function of the config (seed included) and its explicit inputs.

use std::fs::File;

use super::config::RunConfig;
use super::dataset::{gen_synthetic_dataset, ingest_images, Dataset};
use super::IoError;
use crate::energy::EnergyError;
use crate::magnetics::MagneticsError;
use crate::mtj::{default_calibration, fit_calibration, read_samples_csv, MtjCalibration, MtjError};
use crate::network::{
    deploy, quantize, snap_to_floor, train, NetworkError, NetworkSpec, Pipeline, TrainOptions, TrainReport,
};
use crate::neuron_axon::NeuronError;

/// Stage failure tagged with the module that raised it.
#[derive(Debug, thiserror::Error)]
pub enum StageError {
    #[error("io: {0}")]
    Io(#[from] IoError),
    #[error("magnetics: {0}")]
    Magnetics(#[from] MagneticsError),
    #[error("mtj: {0}")]
    Mtj(#[from] MtjError),
    #[error("neuron: {0}")]
    Neuron(#[from] NeuronError),
    #[error("network: {0}")]
    Network(#[from] NetworkError),
    #[error("energy: {0}")]
    Energy(#[from] EnergyError),
}

/// The configured calibration table fitted, or the bundled calibration.
pub fn calibration(cfg: &RunConfig) -> Result<MtjCalibration, StageError> {
    match &cfg.mtj.samples {
        None => Ok(default_calibration().clone()),
        Some(path) => {
            let f = File::open(path).map_err(|e| IoError::file(path, e))?;
            let samples = read_samples_csv(f)?;
            Ok(fit_calibration(&samples, &cfg.mtj.fit)?)
        }
    }
}

/// Training and evaluation sets: user directories when configured, otherwise synthetic
/// glyphs drawn from two streams of the run seed.
pub fn datasets(cfg: &RunConfig) -> Result<(Dataset, Dataset), StageError> {
    let d = &cfg.dataset;
    let seed = cfg.seed;
    let train = match &d.train_dir {
        Some(dir) => ingest_images(dir)?,
        None => gen_synthetic_dataset(seed.wrapping_mul(2).wrapping_sub(1), d.train_per_class, &d.noise),
    };
    let test = match &d.test_dir {
        Some(dir) => ingest_images(dir)?,
        None => gen_synthetic_dataset(seed.wrapping_mul(2), d.test_per_class, &d.noise),
    };
    Ok((train, test))
}

/// Untrained network carrying the hardware neuron response and OFF-cell leakage.
pub fn initial_spec(cfg: &RunConfig, cal: &MtjCalibration) -> Result<NetworkSpec, StageError> {
    let n = &cfg.network;
    let hw = &cfg.hardware;
    let mut spec = NetworkSpec::new(&n.sizes, n.bits_w, n.bits_a)?;
    spec.init_random(cfg.seed, n.init_scale, n.bias_hidden, n.bias_out);
    spec.response = hw.neuron_response(cal, &cfg.material, 65)?;
    let map = hw.mapping(&hw.synapse_device(cal, &cfg.material)?);
    spec.off_weight = map.g_off / map.gain();
    Ok(spec)
}

pub fn train_network(
    cfg: &RunConfig,
    cal: &MtjCalibration,
    ds: &Dataset,
) -> Result<(NetworkSpec, TrainReport), StageError> {
    let spec = initial_spec(cfg, cal)?;
    let mut opts: TrainOptions = cfg.train.clone();
    opts.seed = cfg.seed;
    if cfg.network.constrained {
        let hw = &cfg.hardware;
        let map = hw.mapping(&hw.synapse_device(cal, &cfg.material)?);
        opts.constraints = Some(hw.constraints(&map, &spec.sizes));
    }
    Ok(train(ds, &spec, &opts)?)
}

/// Quantizes, rounds to the synapse floor and maps onto hardware. The returned spec is the
/// software twin of the pipeline.
pub fn deploy_network(
    cfg: &RunConfig,
    cal: &MtjCalibration,
    trained: &NetworkSpec,
) -> Result<(NetworkSpec, Pipeline), StageError> {
    let hw = &cfg.hardware;
    let map = hw.mapping(&hw.synapse_device(cal, &cfg.material)?);
    let q = snap_to_floor(&quantize(trained)?, map.w_min());
    let p = deploy(&q, hw, cal, &cfg.material)?;
    Ok((q, p))
}
