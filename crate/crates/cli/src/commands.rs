use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use spinann_core::crossbar::Array;
use spinann_core::energy::{EnergyLog, EnergyReport};
use spinann_core::io::atomic_write;
use spinann_core::io::config::RunConfig;
use spinann_core::io::dataset::{write_dataset, Dataset};
use spinann_core::io::manifest::RunManifest;
use spinann_core::io::stages::{calibration, datasets, deploy_network, train_network, StageError};
use spinann_core::magnetics::velocity_sweep;
use spinann_core::mtj::{fit_calibration, read_samples_csv, BUNDLED_SAMPLES_CSV};
use spinann_core::network::{hw_accuracy, infer, load_checkpoint, monte_carlo, save_checkpoint, NetworkSpec, Pipeline};
use spinann_core::neuron_axon::{transfer_function, AxonCircuit};

use crate::Command;

type Outputs = Vec<PathBuf>;

pub fn run(cmd: Command, cfg: &RunConfig, config_bytes: &[u8], dump_gamma: bool) -> Result<()> {
    let name = cmd.to_possible_value_name();
    let mut manifest = RunManifest::new(&name, config_bytes, cfg.seed);
    let out = cfg.out_dir.as_path();
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    manifest.stage(&name, || -> Result<((), Outputs)> {
        let files = match cmd {
            Command::DwSweep => dw_sweep(cfg, out)?,
            Command::FitMtj => fit_mtj(cfg, out)?,
            Command::TransferFunction => transfer(cfg, out)?,
            Command::GenData => gen_data(cfg, out)?,
            Command::Train => train_cmd(cfg, out)?,
            Command::Deploy => deploy_cmd(cfg, out, dump_gamma)?,
            Command::Infer => infer_cmd(cfg, out)?,
            Command::Montecarlo => montecarlo_cmd(cfg, out)?,
            Command::EnergyReport => energy_cmd(cfg, out)?,
        };
        Ok(((), files))
    })?;
    manifest.write(&out.join(format!("{name}.manifest.json")))?;
    Ok(())
}

trait ValueName {
    fn to_possible_value_name(&self) -> String;
}

impl ValueName for Command {
    fn to_possible_value_name(&self) -> String {
        use clap::ValueEnum;
        self.to_possible_value()
            .expect("no skipped variants")
            .get_name()
            .to_string()
    }
}

fn write_json<T: Serialize>(path: PathBuf, value: &T) -> Result<PathBuf> {
    let json = serde_json::to_vec_pretty(value)?;
    atomic_write(&path, &json)?;
    Ok(path)
}

fn write_csv_with(path: PathBuf, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<PathBuf> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    atomic_write(&path, &buf)?;
    Ok(path)
}

fn dw_sweep(cfg: &RunConfig, out: &Path) -> Result<Outputs> {
    let s = &cfg.sweep;
    let v = velocity_sweep(&cfg.material, &s.geometry, &s.j_list, &s.options).map_err(StageError::from)?;
    let path = write_csv_with(out.join("dw_sweep.csv"), |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["j_Apm2", "v_mps"])?;
        for (j, vel) in &v {
            w.write_record([j.to_string(), vel.to_string()])?;
        }
        w.flush()?;
        Ok(())
    })?;
    for (j, vel) in &v {
        println!("J = {j:.3e} A/m^2  v = {vel:.2} m/s");
    }
    Ok(vec![path])
}

#[derive(Serialize)]
struct FitReport {
    samples: usize,
    max_relative_error: f64,
    tmr_at_neuron: f64,
}

fn fit_mtj(cfg: &RunConfig, out: &Path) -> Result<Outputs> {
    let samples = match &cfg.mtj.samples {
        Some(p) => read_samples_csv(std::fs::File::open(p).with_context(|| format!("opening {}", p.display()))?),
        None => read_samples_csv(BUNDLED_SAMPLES_CSV.as_bytes()),
    }
    .map_err(StageError::from)?;
    let cal = fit_calibration(&samples, &cfg.mtj.fit).map_err(StageError::from)?;
    let mut max_err: f64 = 0.0;
    for s in &samples {
        let r = cal.resistance(s.t_mgo, s.v, s.theta).map_err(StageError::from)?;
        max_err = max_err.max((r - s.r).abs() / s.r);
    }
    let hw = &cfg.hardware;
    let report = FitReport {
        samples: samples.len(),
        max_relative_error: max_err,
        tmr_at_neuron: cal.tmr(hw.neuron_t_mgo, hw.v_eval).map_err(StageError::from)?,
    };
    println!(
        "fitted {} samples, max relative error {:.3e}",
        report.samples, report.max_relative_error
    );
    Ok(vec![
        write_json(out.join("mtj_calibration.json"), &cal)?,
        write_json(out.join("mtj_fit_report.json"), &report)?,
    ])
}

fn transfer(cfg: &RunConfig, out: &Path) -> Result<Outputs> {
    let cal = calibration(cfg)?;
    let hw = &cfg.hardware;
    let dev = hw.neuron_device(&cal, &cfg.material).map_err(StageError::from)?;
    let ax = AxonCircuit::tuned(&dev, hw.v_div, hw.v_src, cfg.transfer.i_out_max).map_err(StageError::from)?;
    let t = &cfg.transfer;
    let curve =
        transfer_function(&dev, &hw.displacement, &ax, hw.t_write, t.i_max, t.points).map_err(StageError::from)?;
    let i_sat = hw.displacement.saturation_current(hw.t_write);
    if let Some(r2) = curve.linearity(0.2 * i_sat, 0.8 * i_sat) {
        println!("central linearity R^2 = {r2:.4}, wall saturates at {:.3e} A", i_sat);
    }
    Ok(vec![write_csv_with(out.join("transfer.csv"), |buf| {
        Ok(curve.write_csv(buf)?)
    })?])
}

fn gen_data(cfg: &RunConfig, out: &Path) -> Result<Outputs> {
    let (train, test) = datasets(cfg)?;
    let mut files = write_dataset(&train, &out.join("data").join("train"))?;
    files.extend(write_dataset(&test, &out.join("data").join("test"))?);
    println!("{} training and {} evaluation images", train.len(), test.len());
    Ok(files)
}

#[derive(Serialize)]
struct TrainSummary {
    epochs: usize,
    final_loss: f64,
    train_accuracy: f64,
    test_accuracy: f64,
    losses: Vec<f64>,
}

fn train_cmd(cfg: &RunConfig, out: &Path) -> Result<Outputs> {
    let cal = calibration(cfg)?;
    let (train, test) = datasets(cfg)?;
    let (spec, rep) = train_network(cfg, &cal, &train)?;
    let path = out.join("model.json");
    save_checkpoint(&spec, &path).map_err(StageError::from)?;
    let summary = TrainSummary {
        epochs: rep.losses.len(),
        final_loss: rep.losses.last().copied().unwrap_or(f64::NAN),
        train_accuracy: rep.train_accuracy,
        test_accuracy: spec.accuracy(&test),
        losses: rep.losses,
    };
    println!(
        "train accuracy {:.3}, test accuracy {:.3}",
        summary.train_accuracy, summary.test_accuracy
    );
    Ok(vec![path, write_json(out.join("train_report.json"), &summary)?])
}

fn checkpoint(cfg: &RunConfig, out: &Path) -> Result<NetworkSpec> {
    let path = cfg.network.checkpoint.clone().unwrap_or_else(|| out.join("model.json"));
    if !path.exists() {
        anyhow::bail!(
            "network: checkpoint {} not found; run `spinann train` first",
            path.display()
        );
    }
    Ok(load_checkpoint(&path).map_err(StageError::from)?)
}

fn pipeline(cfg: &RunConfig, out: &Path) -> Result<(NetworkSpec, NetworkSpec, Pipeline, Dataset)> {
    let cal = calibration(cfg)?;
    let trained = checkpoint(cfg, out)?;
    let (q, p) = deploy_network(cfg, &cal, &trained)?;
    let (_, test) = datasets(cfg)?;
    Ok((trained, q, p, test))
}

#[derive(Serialize)]
struct DeployReport {
    max_gamma: f64,
    snapped: usize,
    float_accuracy: f64,
    quantized_accuracy: f64,
    hardware_accuracy: f64,
    agreement: f64,
}

fn deploy_cmd(cfg: &RunConfig, out: &Path, dump_gamma: bool) -> Result<Outputs> {
    let (trained, q, p, test) = pipeline(cfg, out)?;
    let mut files = vec![write_json(out.join("deployed.json"), &q)?];
    for (l, layer) in p.layers.iter().enumerate() {
        for (a, tag) in [(Array::Pos, "pos"), (Array::Neg, "neg")] {
            files.push(write_csv_with(out.join(format!("g_{tag}_{l}.csv")), |buf| {
                Ok(layer.xbar.write_csv(a, buf)?)
            })?);
        }
    }
    let mut agree = 0;
    let mut hits = 0;
    for (x, y) in test.images.iter().zip(&test.labels) {
        let c = infer(&p, x).map_err(StageError::from)?.class;
        agree += usize::from(c == q.predict(x));
        hits += usize::from(c == *y);
    }
    let n = test.len().max(1) as f64;
    let report = DeployReport {
        max_gamma: p.max_gamma(),
        snapped: p.snapped,
        float_accuracy: trained.accuracy(&test),
        quantized_accuracy: q.accuracy(&test),
        hardware_accuracy: hits as f64 / n,
        agreement: agree as f64 / n,
    };
    println!(
        "max gamma {:.4}; accuracy float {:.3} quantized {:.3} hardware {:.3}; agreement {:.3}",
        report.max_gamma, report.float_accuracy, report.quantized_accuracy, report.hardware_accuracy, report.agreement
    );
    files.push(write_json(out.join("deploy_report.json"), &report)?);
    if dump_gamma {
        files.push(write_csv_with(out.join("gamma.csv"), |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["layer", "column", "gamma_pos", "gamma_neg"])?;
            for (l, cols) in p.gammas().iter().enumerate() {
                for (j, (gp, gn)) in cols.iter().enumerate() {
                    println!("layer {l} column {j}: gamma+ {gp:.4} gamma- {gn:.4}");
                    w.write_record([l.to_string(), j.to_string(), gp.to_string(), gn.to_string()])?;
                }
            }
            w.flush()?;
            Ok(())
        })?);
    }
    Ok(files)
}

#[derive(Serialize)]
struct InferSummary {
    accuracy: f64,
    energy: EnergyReport,
}

fn infer_cmd(cfg: &RunConfig, out: &Path) -> Result<Outputs> {
    let (_, q, p, test) = pipeline(cfg, out)?;
    let mut log = EnergyLog::default();
    let mut rows = Vec::with_capacity(test.len());
    for (k, (x, y)) in test.images.iter().zip(&test.labels).enumerate() {
        let r = infer(&p, x).map_err(StageError::from)?;
        log += r.energy;
        rows.push((k, *y, r.class, q.predict(x)));
    }
    let hits = rows.iter().filter(|r| r.1 == r.2).count();
    let summary = InferSummary {
        accuracy: hits as f64 / test.len().max(1) as f64,
        energy: EnergyReport::from_log(&log, &cfg.energy).map_err(StageError::from)?,
    };
    println!(
        "hardware accuracy {:.3}; {:.3} fJ per neuron cycle, {:.1} fJ per inference",
        summary.accuracy, summary.energy.total_fj, summary.energy.per_inference_fj
    );
    let preds = write_csv_with(out.join("predictions.csv"), |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["index", "label", "hardware", "software"])?;
        for (k, y, c, s) in &rows {
            w.write_record([k.to_string(), y.to_string(), c.to_string(), s.to_string()])?;
        }
        w.flush()?;
        Ok(())
    })?;
    Ok(vec![preds, write_json(out.join("infer_report.json"), &summary)?])
}

fn montecarlo_cmd(cfg: &RunConfig, out: &Path) -> Result<Outputs> {
    let (_, _, p, test) = pipeline(cfg, out)?;
    let mut vm = cfg.variation;
    vm.seed = cfg.seed;
    let summary = monte_carlo(&p, &test, &vm).map_err(StageError::from)?;
    debug_assert_eq!(summary.baseline, hw_accuracy(&p, &test).unwrap_or(f64::NAN));
    println!(
        "{} trials at 3-sigma {:.0}%: baseline {:.3}, mean {:.3} (-{:.2} points), min {:.3}",
        vm.trials,
        100.0 * vm.sigma3,
        summary.baseline,
        summary.mean,
        summary.degradation_points(),
        summary.min
    );
    Ok(vec![write_json(out.join("montecarlo.json"), &summary)?])
}

fn energy_cmd(cfg: &RunConfig, out: &Path) -> Result<Outputs> {
    let log = EnergyLog::average_neuron(&cfg.energy);
    let report = EnergyReport::from_log(&log, &cfg.energy).map_err(StageError::from)?;
    println!(
        "write {:.4} fJ, read {:.4} fJ, reset {:.4} fJ, total {:.4} fJ; {:.0}x below analog, {:.0}x below digital CMOS",
        report.write_fj,
        report.read_fj,
        report.reset_fj,
        report.total_fj,
        report.ratio_vs_analog,
        report.ratio_vs_digital
    );
    Ok(vec![write_json(out.join("energy_report.json"), &report)?])
}
