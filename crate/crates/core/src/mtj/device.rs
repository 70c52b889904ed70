//! Three-terminal domain-wall device: P domain, AP domain and wall region read in parallel.

use serde::{Deserialize, Serialize};

use super::{MtjCalibration, MtjError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceRole {
    Synapse,
    Neuron,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DwDevice {
    /// Free-layer length excluding the wall (m).
    pub l_free: f64,
    pub width: f64,
    /// Wall width (m).
    pub delta_w: f64,
    /// Wall position from the left edge (m).
    pub x: f64,
    pub g_p_max: f64,
    pub g_ap_max: f64,
    pub g_dw: f64,
    pub role: DeviceRole,
}

impl DwDevice {
    /// Device whose three regions are read at oxide thickness `t_mgo` and bias `v_read`.
    pub fn from_calibration(
        cal: &MtjCalibration,
        t_mgo: f64,
        v_read: f64,
        l_free: f64,
        width: f64,
        delta_w: f64,
        role: DeviceRole,
    ) -> Result<Self, MtjError> {
        check_geometry(l_free, width, delta_w)?;
        let (rp, rap) = cal.limits(t_mgo, v_read)?;
        // Conductance per unit area at the reference junction.
        let gp = 1.0 / (rp * cal.area_ref);
        let gap = 1.0 / (rap * cal.area_ref);
        let dev = Self {
            l_free,
            width,
            delta_w,
            x: 0.0,
            g_p_max: gp * l_free * width,
            g_ap_max: gap * l_free * width,
            g_dw: 0.5 * (gp + gap) * delta_w * width,
            role,
        };
        dev.validate()?;
        Ok(dev)
    }

    /// Device with `R_AP = (1 + tmr) R_P` and full-length parallel conductance `g_p_max`.
    pub fn from_tmr(
        g_p_max: f64,
        tmr: f64,
        l_free: f64,
        width: f64,
        delta_w: f64,
        role: DeviceRole,
    ) -> Result<Self, MtjError> {
        check_geometry(l_free, width, delta_w)?;
        if !(tmr >= 0.0 && tmr.is_finite()) {
            return Err(MtjError::InvalidDevice(format!(
                "TMR must be finite and >= 0, got {tmr}"
            )));
        }
        let g_ap_max = g_p_max / (1.0 + tmr);
        let dev = Self {
            l_free,
            width,
            delta_w,
            x: 0.0,
            g_p_max,
            g_ap_max,
            g_dw: 0.5 * (g_p_max + g_ap_max) * delta_w / l_free,
            role,
        };
        dev.validate()?;
        Ok(dev)
    }

    pub fn validate(&self) -> Result<(), MtjError> {
        check_geometry(self.l_free, self.width, self.delta_w)?;
        if !(self.g_ap_max > 0.0 && self.g_p_max >= self.g_ap_max && self.g_dw > 0.0 && self.g_p_max.is_finite()) {
            return Err(MtjError::InvalidDevice(format!(
                "need G_p_max >= G_ap_max > 0 and G_dw > 0 (got {:e}, {:e}, {:e})",
                self.g_p_max, self.g_ap_max, self.g_dw
            )));
        }
        if !(0.0..=self.l_free).contains(&self.x) {
            return Err(MtjError::PositionOutOfRange {
                x: self.x,
                max: self.l_free,
            });
        }
        Ok(())
    }

    pub fn set_position(&mut self, x: f64) -> Result<(), MtjError> {
        if !(0.0..=self.l_free).contains(&x) {
            return Err(MtjError::PositionOutOfRange { x, max: self.l_free });
        }
        self.x = x;
        Ok(())
    }

    /// `G_S(x)`; affine in `x`.
    pub fn conductance_at(&self, x: f64) -> f64 {
        let f = x / self.l_free;
        self.g_p_max * f + self.g_ap_max * (1.0 - f) + self.g_dw
    }

    pub fn conductance(&self) -> f64 {
        self.conductance_at(self.x)
    }

    pub fn resistance(&self) -> f64 {
        1.0 / self.conductance()
    }

    pub fn g_min(&self) -> f64 {
        self.conductance_at(0.0)
    }

    pub fn g_max(&self) -> f64 {
        self.conductance_at(self.l_free)
    }

    /// `G_S(L) / G_S(0)`.
    pub fn weight_range(&self) -> f64 {
        self.g_max() / self.g_min()
    }

    /// Wall position realizing conductance `g`, clamped to the device.
    pub fn position_for(&self, g: f64) -> f64 {
        let span = self.g_p_max - self.g_ap_max;
        if span <= 0.0 {
            return 0.0;
        }
        ((g - self.g_ap_max - self.g_dw) / span * self.l_free).clamp(0.0, self.l_free)
    }

    /// Same device with every region's resistance multiplied by `factor`.
    pub fn with_resistance_scale(&self, factor: f64) -> Self {
        Self {
            g_p_max: self.g_p_max / factor,
            g_ap_max: self.g_ap_max / factor,
            g_dw: self.g_dw / factor,
            ..self.clone()
        }
    }
}

fn check_geometry(l_free: f64, width: f64, delta_w: f64) -> Result<(), MtjError> {
    if !(l_free > 0.0 && width > 0.0 && delta_w > 0.0) {
        return Err(MtjError::InvalidDevice(format!(
            "dimensions must be positive (L = {l_free:e}, w = {width:e}, delta = {delta_w:e})"
        )));
    }
    Ok(())
}

/// Oxide thickness at which a device of the given geometry reaches `g_target` at `x = L`.
///
/// Conductance falls monotonically with thickness, so bisection over the calibrated range.
pub fn solve_thickness(
    cal: &MtjCalibration,
    v_read: f64,
    l_free: f64,
    width: f64,
    delta_w: f64,
    g_target: f64,
) -> Result<f64, MtjError> {
    let d = cal.domain;
    let g = |t: f64| -> Result<f64, MtjError> {
        Ok(DwDevice::from_calibration(cal, t, v_read, l_free, width, delta_w, DeviceRole::Synapse)?.g_max())
    };
    let (mut lo, mut hi) = (d.t_min, d.t_max);
    if !(g(lo)? >= g_target && g(hi)? <= g_target) {
        return Err(MtjError::ThicknessUnreachable {
            target: g_target,
            t_min: lo,
            t_max: hi,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid)? > g_target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synapse(tmr: f64) -> DwDevice {
        DwDevice::from_tmr(1.0 / 20e3, tmr, 170e-9, 200e-9, 7.6e-9, DeviceRole::Synapse).unwrap()
    }

    #[test]
    fn endpoints_and_midpoint() {
        let mut d = synapse(6.0);
        assert_eq!(d.conductance(), d.g_ap_max + d.g_dw);
        d.set_position(d.l_free).unwrap();
        assert!((d.conductance() - (d.g_p_max + d.g_dw)).abs() <= 1e-18);
        let mid = d.conductance_at(d.l_free / 2.0);
        assert!((mid - 0.5 * (d.g_min() + d.g_max())).abs() <= 1e-15 * mid);
    }

    #[test]
    fn weight_range_at_600_percent() {
        // (1 + k(1+r)/2) / (r + k(1+r)/2) with r = 1/7, k = 7.6/170
        let k = 7.6 / 170.0;
        let r = 1.0 / 7.0;
        let expected = (1.0 + k * (1.0 + r) / 2.0) / (r + k * (1.0 + r) / 2.0);
        let got = synapse(6.0).weight_range();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 7.0).abs() <= 0.15 * 7.0, "{got}");
    }

    #[test]
    fn zero_tmr_has_unit_range() {
        assert!((synapse(0.0).weight_range() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn range_grows_with_tmr() {
        let mut prev = 0.0;
        for k in 0..=100 {
            let r = synapse(k as f64 * 0.1).weight_range();
            assert!(r > prev || k == 0);
            prev = r;
        }
    }

    #[test]
    fn position_inverts_conductance() {
        let d = synapse(6.0);
        let x = 0.37 * d.l_free;
        assert!((d.position_for(d.conductance_at(x)) - x).abs() < 1e-18);
        assert_eq!(d.position_for(1.0), d.l_free);
        assert_eq!(d.position_for(0.0), 0.0);
    }

    #[test]
    fn rejects_bad_devices() {
        assert!(DwDevice::from_tmr(1e-5, -0.5, 1e-7, 1e-7, 1e-8, DeviceRole::Neuron).is_err());
        assert!(DwDevice::from_tmr(1e-5, 1.0, 0.0, 1e-7, 1e-8, DeviceRole::Neuron).is_err());
        let mut d = synapse(1.0);
        assert!(d.set_position(-1e-9).is_err());
        assert!(d.set_position(d.l_free * 1.01).is_err());
    }

    #[test]
    fn resistance_scale_divides_conductance() {
        let d = synapse(6.0);
        let s = d.with_resistance_scale(1.25);
        assert!((s.conductance() * 1.25 - d.conductance()).abs() < 1e-18);
    }

    #[test]
    fn doubling_width_halves_resistance() {
        let cal = super::super::default_calibration();
        let a = DwDevice::from_calibration(cal, 2e-9, 0.05, 170e-9, 100e-9, 7.6e-9, DeviceRole::Synapse).unwrap();
        let b = DwDevice::from_calibration(cal, 2e-9, 0.05, 170e-9, 200e-9, 7.6e-9, DeviceRole::Synapse).unwrap();
        assert!((a.resistance() / b.resistance() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn thickness_for_twenty_kiloohm() {
        let cal = super::super::default_calibration();
        let t = solve_thickness(cal, 0.1, 170e-9, 200e-9, 7.6e-9, 1.0 / 20e3).unwrap();
        let d = DwDevice::from_calibration(cal, t, 0.1, 170e-9, 200e-9, 7.6e-9, DeviceRole::Synapse).unwrap();
        assert!((d.g_max() * 20e3 - 1.0).abs() < 1e-9);
        assert!(solve_thickness(cal, 0.1, 170e-9, 200e-9, 7.6e-9, 1.0).is_err());
    }
}
