//! Least-squares calibration of the tunnelling model against (t_MgO, V, θ, R) samples.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::model::{angular_resistance, BranchCoefficients, CalibrationDomain, MtjCalibration};
use super::MtjError;
use crate::numerics::{fit_line, levenberg_marquardt, LmOptions};

/// One calibration point, SI units; `r` is the resistance at the reference area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MtjSample {
    pub t_mgo: f64,
    pub v: f64,
    pub theta: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    pub c_order: usize,
    /// Held fixed during the fit; only the shape of the bias dependence could resolve it.
    pub d_exp: f64,
    pub area_ref: f64,
    pub p_voltage_dependent: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            c_order: 2,
            d_exp: 1.0,
            area_ref: 1e-12,
            p_voltage_dependent: false,
        }
    }
}

const NM: f64 = 1e-9;

#[derive(Serialize, Deserialize)]
struct CsvRow {
    t_mgo_nm: f64,
    #[serde(rename = "v_mV")]
    v_mv: f64,
    theta_rad: f64,
    r_ohm: f64,
}

/// Reads `t_mgo_nm, v_mV, theta_rad, r_ohm` rows.
pub fn read_samples_csv<R: Read>(r: R) -> Result<Vec<MtjSample>, MtjError> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    rd.deserialize::<CsvRow>()
        .map(|row| {
            let row = row.map_err(|e| MtjError::Io(e.to_string()))?;
            Ok(MtjSample {
                t_mgo: row.t_mgo_nm * NM,
                v: row.v_mv * 1e-3,
                theta: row.theta_rad,
                r: row.r_ohm,
            })
        })
        .collect()
}

pub fn write_samples_csv<W: Write>(w: W, samples: &[MtjSample]) -> Result<(), MtjError> {
    let mut wr = csv::Writer::from_writer(w);
    for s in samples {
        wr.serialize(CsvRow {
            t_mgo_nm: s.t_mgo / NM,
            v_mv: s.v * 1e3,
            theta_rad: s.theta,
            r_ohm: s.r,
        })
        .map_err(|e| MtjError::Io(e.to_string()))?;
    }
    wr.flush().map_err(|e| MtjError::Io(e.to_string()))
}

/// Samples a calibration on a grid; the round-trip oracle for [`fit_calibration`].
pub fn generate_samples(cal: &MtjCalibration, thicknesses: &[f64], voltages: &[f64], thetas: &[f64]) -> Vec<MtjSample> {
    let mut out = Vec::new();
    for &t in thicknesses {
        for &v in voltages {
            for &theta in thetas {
                let (rp, rap) = cal.limits_unchecked(t, v);
                out.push(MtjSample {
                    t_mgo: t,
                    v,
                    theta,
                    r: angular_resistance(rp, rap, theta),
                });
            }
        }
    }
    out
}

/// Parameter vector layout: P pairs then AP pairs, each `(a [1/nm], b)`.
struct Layout {
    p_terms: usize,
    ap_terms: usize,
}

impl Layout {
    fn len(&self) -> usize {
        2 * (self.p_terms + 1) + 2 * (self.ap_terms + 1)
    }

    fn unpack(&self, x: &[f64]) -> (BranchCoefficients, BranchCoefficients) {
        let take = |off: usize, n: usize| BranchCoefficients {
            a: (0..n).map(|m| x[off + 2 * m] / NM).collect(),
            b: (0..n).map(|m| x[off + 2 * m + 1]).collect(),
        };
        let np = self.p_terms + 1;
        (take(0, np), take(2 * np, self.ap_terms + 1))
    }

    fn pack(&self, p: &BranchCoefficients, ap: &BranchCoefficients) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.len());
        for br in [p, ap] {
            for (a, b) in br.a.iter().zip(&br.b) {
                x.push(a * NM);
                x.push(*b);
            }
        }
        x
    }
}

fn is_p(theta: f64) -> bool {
    theta.abs() < 1e-9
}

fn is_ap(theta: f64) -> bool {
    (theta - std::f64::consts::PI).abs() < 1e-9
}

/// Initial guess for one branch: per-thickness polynomial in V² on the bracket, then a
/// line in thickness for each log coefficient.
fn initial_branch(samples: &[&MtjSample], terms: usize, d: f64) -> Result<BranchCoefficients, MtjError> {
    let ts: Vec<f64> = samples.iter().map(|s| s.t_mgo / NM).collect();
    let base: Vec<f64> = samples.iter().map(|s| -s.r.ln() / d).collect();
    let line = fit_line(&ts, &base).ok_or(MtjError::RankDeficient)?;
    let mut a = vec![line.slope / NM];
    let mut b = vec![line.intercept];
    if terms == 0 {
        return Ok(BranchCoefficients { a, b });
    }

    let mut thicknesses: Vec<f64> = samples.iter().map(|s| s.t_mgo).collect();
    thicknesses.sort_by(f64::total_cmp);
    thicknesses.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
    let mut logs: Vec<Vec<(f64, f64)>> = vec![Vec::new(); terms];
    for &t in &thicknesses {
        let at: Vec<&&MtjSample> = samples.iter().filter(|s| (s.t_mgo - t).abs() < 1e-15).collect();
        if at.len() < terms + 1 {
            continue;
        }
        let design = DMatrix::from_fn(at.len(), terms + 1, |r, c| (at[r].v * at[r].v).powi(c as i32));
        let rhs = DVector::from_iterator(at.len(), at.iter().map(|s| s.r.powf(-1.0 / d)));
        let Ok(coef) = design.svd(true, true).solve(&rhs, 1e-14) else {
            continue;
        };
        for m in 1..=terms {
            let signed = if m % 2 == 1 { coef[m] } else { -coef[m] };
            if signed > 0.0 {
                logs[m - 1].push((t / NM, signed.ln()));
            }
        }
    }
    for (m, pts) in logs.iter().enumerate() {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
        match fit_line(&x, &y) {
            Some(l) => {
                a.push(l.slope / NM);
                b.push(l.intercept);
            }
            None => {
                a.push(a[0]);
                b.push(b[0] - 4.0 * (m + 1) as f64);
            }
        }
    }
    Ok(BranchCoefficients { a, b })
}

/// Fits the tunnelling model to `samples` by Levenberg-Marquardt on log resistance.
///
/// The fitted model must increase with oxide thickness and, in the antiparallel state, not
/// increase with |V| across the sample hull; otherwise the calibration is rejected.
pub fn fit_calibration(samples: &[MtjSample], opts: &FitOptions) -> Result<MtjCalibration, MtjError> {
    let c = opts.c_order;
    if c < 1 {
        return Err(MtjError::InvalidCalibration("c_order must be >= 1".into()));
    }
    let need = 2 * (c + 2);
    if samples.len() < need {
        return Err(MtjError::TooFewSamples {
            got: samples.len(),
            need,
        });
    }
    if samples.iter().any(|s| !(s.r > 0.0 && s.r.is_finite() && s.t_mgo > 0.0)) {
        return Err(MtjError::InvalidCalibration(
            "samples need positive resistance and thickness".into(),
        ));
    }
    let mut ts: Vec<f64> = samples.iter().map(|s| s.t_mgo).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
    if ts.len() < 2 {
        return Err(MtjError::RankDeficient);
    }
    let domain = CalibrationDomain {
        t_min: ts[0],
        t_max: *ts.last().unwrap(),
        v_max: samples.iter().map(|s| s.v.abs()).fold(0.0, f64::max),
    };

    let p_samples: Vec<&MtjSample> = samples.iter().filter(|s| is_p(s.theta)).collect();
    let ap_samples: Vec<&MtjSample> = samples.iter().filter(|s| is_ap(s.theta)).collect();
    if p_samples.len() < 2 || ap_samples.len() < c + 2 {
        return Err(MtjError::RankDeficient);
    }
    let layout = Layout {
        p_terms: if opts.p_voltage_dependent { c } else { 0 },
        ap_terms: c,
    };
    let p0 = initial_branch(&p_samples, layout.p_terms, opts.d_exp)?;
    let ap0 = initial_branch(&ap_samples, layout.ap_terms, opts.d_exp)?;
    let x0 = layout.pack(&p0, &ap0);

    let template = MtjCalibration {
        p: p0,
        ap: ap0,
        c_order: c,
        d_exp: opts.d_exp,
        area_ref: opts.area_ref,
        p_voltage_dependent: opts.p_voltage_dependent,
        domain,
    };
    let residuals = |x: &[f64]| -> Vec<f64> {
        let (p, ap) = layout.unpack(x);
        let cal = MtjCalibration {
            p,
            ap,
            ..template.clone()
        };
        samples
            .iter()
            .map(|s| {
                let (rp, rap) = cal.limits_unchecked(s.t_mgo, s.v);
                let r = angular_resistance(rp, rap, s.theta);
                if r.is_finite() && r > 0.0 {
                    r.ln() - s.r.ln()
                } else {
                    1e3
                }
            })
            .collect()
    };
    let res = levenberg_marquardt(
        residuals,
        &x0,
        LmOptions {
            max_iter: 500,
            ..Default::default()
        },
    );
    if res.rank < layout.len() {
        return Err(MtjError::RankDeficient);
    }
    let (p, ap) = layout.unpack(&res.params);
    let cal = MtjCalibration { p, ap, ..template };
    check_monotone(&cal)?;
    log::debug!(
        "mtj fit: rms log residual {:.3e}",
        (res.cost / samples.len() as f64).sqrt()
    );
    Ok(cal)
}

fn check_monotone(cal: &MtjCalibration) -> Result<(), MtjError> {
    let d = cal.domain;
    let n = 16;
    let t_at = |i: usize| d.t_min + (d.t_max - d.t_min) * i as f64 / n as f64;
    let v_at = |k: usize| d.v_max * k as f64 / n as f64;
    for k in 0..=n {
        let v = v_at(k);
        let mut prev = (0.0, 0.0);
        for i in 0..=n {
            let (rp, rap) = cal.limits_unchecked(t_at(i), v);
            if !(rp.is_finite() && rap.is_finite() && rp > 0.0 && rap > 0.0) {
                return Err(MtjError::CalibrationFailed(format!(
                    "non-positive resistance at V = {v}"
                )));
            }
            if i > 0 && (rp <= prev.0 || rap <= prev.1) {
                return Err(MtjError::CalibrationFailed(format!(
                    "resistance not increasing with thickness at t = {}, V = {v}",
                    t_at(i)
                )));
            }
            prev = (rp, rap);
        }
    }
    for i in 0..=n {
        let t = t_at(i);
        let mut prev = f64::INFINITY;
        for k in 0..=n {
            let (_, rap) = cal.limits_unchecked(t, v_at(k));
            if rap > prev * (1.0 + 1e-12) {
                return Err(MtjError::CalibrationFailed(format!(
                    "AP resistance rises with bias at t = {t}"
                )));
            }
            prev = rap;
        }
    }
    Ok(())
}

/// Samples bundled with the crate: coarse antiparallel/parallel resistance-area values
/// over 1.6-2.4 nm MgO and 10-400 mV, at a 1 µm² reference area.
pub const BUNDLED_SAMPLES_CSV: &str = include_str!("../../data/mtj_calibration.csv");

/// The default calibration, fitted once from [`BUNDLED_SAMPLES_CSV`].
pub fn default_calibration() -> &'static MtjCalibration {
    static CAL: std::sync::OnceLock<MtjCalibration> = std::sync::OnceLock::new();
    CAL.get_or_init(|| {
        let samples = read_samples_csv(BUNDLED_SAMPLES_CSV.as_bytes()).expect("bundled table parses");
        fit_calibration(&samples, &FitOptions::default()).expect("bundled table fits")
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn truth() -> MtjCalibration {
        MtjCalibration {
            p: BranchCoefficients {
                a: vec![-5.5e9],
                b: vec![4.0],
            },
            ap: BranchCoefficients {
                a: vec![-5.5e9, -5.0e9, -5.5e9],
                b: vec![2.2, 2.6, 1.0],
            },
            c_order: 2,
            d_exp: 1.0,
            area_ref: 1e-12,
            p_voltage_dependent: false,
            domain: CalibrationDomain {
                t_min: 1.6e-9,
                t_max: 2.4e-9,
                v_max: 0.4,
            },
        }
    }

    #[test]
    fn round_trip_on_held_out_grid() {
        let cal = truth();
        let train = generate_samples(
            &cal,
            &[1.6e-9, 1.8e-9, 2.0e-9, 2.2e-9, 2.4e-9],
            &[0.0, 0.1, 0.2, 0.3, 0.4],
            &[0.0, PI],
        );
        let fitted = fit_calibration(&train, &FitOptions::default()).unwrap();
        let held = generate_samples(
            &cal,
            &[1.7e-9, 1.9e-9, 2.1e-9, 2.3e-9],
            &[0.05, 0.15, 0.25, 0.35],
            &[0.0, 1.0, PI / 2.0, PI],
        );
        for s in held {
            let r = fitted.resistance(s.t_mgo, s.v, s.theta).unwrap();
            assert!((r - s.r).abs() / s.r < 0.01, "{s:?} -> {r}");
        }
    }

    #[test]
    fn single_thickness_is_rank_deficient() {
        let train = generate_samples(&truth(), &[2.0e-9], &[0.0, 0.1, 0.2, 0.3, 0.4], &[0.0, PI]);
        assert!(matches!(
            fit_calibration(&train, &FitOptions::default()),
            Err(MtjError::RankDeficient)
        ));
    }

    #[test]
    fn too_few_samples() {
        let train = generate_samples(&truth(), &[1.8e-9, 2.0e-9], &[0.1], &[0.0, PI]);
        assert!(matches!(
            fit_calibration(&train, &FitOptions::default()),
            Err(MtjError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn thinning_oxide_data_is_rejected() {
        // Resistance falling with thickness contradicts tunnelling.
        let mut cal = truth();
        for a in cal.p.a.iter_mut().chain(cal.ap.a.iter_mut()) {
            *a = -*a;
        }
        let train = generate_samples(&cal, &[1.6e-9, 2.0e-9, 2.4e-9], &[0.0, 0.1, 0.2, 0.3, 0.4], &[0.0, PI]);
        assert!(matches!(
            fit_calibration(&train, &FitOptions::default()),
            Err(MtjError::CalibrationFailed(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let s = generate_samples(&truth(), &[2.0e-9], &[0.01], &[0.0]);
        let mut buf = Vec::new();
        write_samples_csv(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t_mgo_nm,v_mV,theta_rad,r_ohm"));
        let back = read_samples_csv(buf.as_slice()).unwrap();
        assert!((back[0].r - s[0].r).abs() < 1e-9 * s[0].r);
    }

    #[test]
    fn bundled_calibration_properties() {
        let cal = default_calibration();
        let r20 = cal.resistance(2.0e-9, 0.01, 0.0).unwrap();
        let r18 = cal.resistance(1.8e-9, 0.01, 0.0).unwrap();
        assert!(r20 > r18);
        let a10 = cal.resistance(2.0e-9, 0.01, PI).unwrap();
        let a90 = cal.resistance(2.0e-9, 0.09, PI).unwrap();
        assert!((a90 - a10).abs() / a10 <= 0.05);
    }
}
