//! Tunnelling resistance versus oxide thickness, bias and magnetization angle.

use serde::{Deserialize, Serialize};

use super::MtjError;

/// Coefficients `a_0..a_c` (1/m) and `b_0..b_c` of one resistance branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchCoefficients {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl BranchCoefficients {
    /// `exp(a0 t + b0) + sum_m (-1)^(m-1) V^(2m) exp(a_m t + b_m)`, truncated to `terms`.
    fn bracket(&self, t: f64, v: f64, terms: usize) -> f64 {
        let mut s = (self.a[0] * t + self.b[0]).exp();
        let v2 = v * v;
        let mut vp = 1.0;
        for m in 1..=terms.min(self.a.len() - 1) {
            vp *= v2;
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            s += sign * vp * (self.a[m] * t + self.b[m]).exp();
        }
        s
    }
}

/// Calibrated region of (oxide thickness, |bias|).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationDomain {
    pub t_min: f64,
    pub t_max: f64,
    pub v_max: f64,
}

impl CalibrationDomain {
    pub fn contains(&self, t: f64, v: f64) -> bool {
        let tol = 1e-9 * self.t_max;
        t >= self.t_min - tol && t <= self.t_max + tol && v.abs() <= self.v_max * (1.0 + 1e-9)
    }
}

/// Fitted tunnelling model. Resistances are for a junction of area `area_ref`; other areas
/// scale inversely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MtjCalibration {
    /// Parallel-state branch.
    pub p: BranchCoefficients,
    /// Antiparallel-state branch.
    pub ap: BranchCoefficients,
    /// Number of bias terms `c`.
    pub c_order: usize,
    /// Outer exponent `d`.
    pub d_exp: f64,
    /// Reference junction area (m²).
    pub area_ref: f64,
    /// Whether the parallel branch carries the bias polynomial.
    pub p_voltage_dependent: bool,
    pub domain: CalibrationDomain,
}

/// Angular combination of the two limiting resistances: conductances weighted by
/// `cos²(θ/2)` and `sin²(θ/2)`.
///
/// Endpoints return the limiting values bit-for-bit.
pub fn angular_resistance(r_p: f64, r_ap: f64, theta: f64) -> f64 {
    if theta == 0.0 {
        return r_p;
    }
    if theta == std::f64::consts::PI {
        return r_ap;
    }
    let c = (0.5 * theta).cos();
    let s = (0.5 * theta).sin();
    1.0 / (c * c / r_p + s * s / r_ap)
}

impl MtjCalibration {
    pub fn validate(&self) -> Result<(), MtjError> {
        if self.c_order < 1 {
            return Err(MtjError::InvalidCalibration("c_order must be >= 1".into()));
        }
        if !(self.d_exp > 0.0) {
            return Err(MtjError::InvalidCalibration("d_exp must be positive".into()));
        }
        if !(self.area_ref > 0.0) {
            return Err(MtjError::InvalidCalibration("area_ref must be positive".into()));
        }
        let need = self.c_order + 1;
        if self.ap.a.len() != need || self.ap.b.len() != need {
            return Err(MtjError::InvalidCalibration(format!(
                "AP branch needs {need} coefficients"
            )));
        }
        let p_need = if self.p_voltage_dependent { need } else { 1 };
        if self.p.a.len() < p_need || self.p.b.len() != self.p.a.len() {
            return Err(MtjError::InvalidCalibration(format!(
                "P branch needs {p_need} coefficients"
            )));
        }
        Ok(())
    }

    fn branch_resistance(&self, branch: &BranchCoefficients, terms: usize, t: f64, v: f64) -> f64 {
        let g = branch.bracket(t, v, terms);
        if g <= 0.0 {
            f64::INFINITY
        } else {
            g.powf(-self.d_exp)
        }
    }

    /// (R_P, R_AP) at `area_ref` without domain checks.
    pub fn limits_unchecked(&self, t_mgo: f64, v: f64) -> (f64, f64) {
        let p_terms = if self.p_voltage_dependent { self.c_order } else { 0 };
        (
            self.branch_resistance(&self.p, p_terms, t_mgo, v),
            self.branch_resistance(&self.ap, self.c_order, t_mgo, v),
        )
    }

    /// (R_P, R_AP) at `area_ref`.
    pub fn limits(&self, t_mgo: f64, v: f64) -> Result<(f64, f64), MtjError> {
        if !self.domain.contains(t_mgo, v) {
            return Err(MtjError::OutsideDomain {
                t_mgo,
                v,
                domain: self.domain,
            });
        }
        let (rp, rap) = self.limits_unchecked(t_mgo, v);
        if !(rp.is_finite() && rap.is_finite() && rp > 0.0 && rap > 0.0) {
            return Err(MtjError::NonPhysical { t_mgo, v });
        }
        Ok((rp, rap))
    }

    /// Junction resistance (Ω) at `area_ref` for oxide thickness `t_mgo` (m), bias `v` (V)
    /// and free/pinned angle `theta` (rad).
    pub fn resistance(&self, t_mgo: f64, v: f64, theta: f64) -> Result<f64, MtjError> {
        if !(0.0..=std::f64::consts::PI).contains(&theta) {
            return Err(MtjError::AngleOutOfRange(theta));
        }
        let (rp, rap) = self.limits(t_mgo, v)?;
        Ok(angular_resistance(rp, rap, theta))
    }

    /// Resistance of a junction of `area` (m²).
    pub fn resistance_for_area(&self, t_mgo: f64, v: f64, theta: f64, area: f64) -> Result<f64, MtjError> {
        if !(area > 0.0) {
            return Err(MtjError::InvalidCalibration(format!(
                "area must be positive, got {area}"
            )));
        }
        Ok(self.resistance(t_mgo, v, theta)? * self.area_ref / area)
    }

    /// Low-bias tunnelling magnetoresistance `(R_AP - R_P) / R_P`.
    pub fn tmr(&self, t_mgo: f64, v: f64) -> Result<f64, MtjError> {
        let (rp, rap) = self.limits(t_mgo, v)?;
        Ok((rap - rp) / rp)
    }
}
