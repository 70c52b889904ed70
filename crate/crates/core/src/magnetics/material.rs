use serde::{Deserialize, Serialize};

use super::MagneticsError;

/// Vacuum permeability (T·m/A).
pub const MU0: f64 = 1.256_637_062_12e-6;
/// Reduced Planck constant (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Elementary charge (C).
pub const E_CHARGE: f64 = 1.602_176_634e-19;
/// Bohr magneton (J/T).
pub const MU_B: f64 = 9.274_010_078_3e-24;

/// Material constants of the ferromagnet / heavy-metal stack.
///
/// Defaults are the Ta/Pt/CoFe/MgO nanostrip values (CoFe 0.6 nm on 3 nm Pt).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialParams {
    /// Saturation magnetization (A/m).
    pub ms: f64,
    /// Gilbert damping.
    pub alpha: f64,
    /// Exchange stiffness (J/m).
    pub a_ex: f64,
    /// Perpendicular uniaxial anisotropy (J/m³).
    pub ku2: f64,
    /// Interfacial DMI constant (J/m²). Negative is left-handed.
    pub d_dmi: f64,
    /// Spin-Hall angle of the heavy metal.
    pub theta_sh: f64,
    /// Free-layer thickness (m).
    pub t_fm: f64,
    /// Heavy-metal thickness (m).
    pub t_hm: f64,
    /// Heavy-metal resistivity (Ω·m).
    pub rho_hm: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            ms: 7.0e5,
            alpha: 0.3,
            a_ex: 1.0e-11,
            ku2: 4.8e5,
            d_dmi: -1.2e-3,
            theta_sh: 0.07,
            t_fm: 0.6e-9,
            t_hm: 3.0e-9,
            rho_hm: 200.0e-9,
        }
    }
}

impl MaterialParams {
    /// Effective anisotropy with the local thin-film demag correction, `Ku2 - mu0 Ms^2 / 2`.
    pub fn keff(&self) -> f64 {
        self.ku2 - 0.5 * MU0 * self.ms * self.ms
    }

    /// Bloch-profile wall width parameter `sqrt(A / Keff)`.
    pub fn wall_width(&self) -> f64 {
        (self.a_ex / self.keff()).sqrt()
    }

    /// Gyromagnetic ratio in field units, `2 mu_B mu0 / hbar` (m/(A·s)).
    pub fn gamma(&self) -> f64 {
        2.0 * MU_B * MU0 / HBAR
    }

    /// Anisotropy field magnitude `2 Keff / (mu0 Ms)` (A/m).
    pub fn anisotropy_field(&self) -> f64 {
        2.0 * self.keff() / (MU0 * self.ms)
    }

    /// Spin-Hall effective field `hbar theta J / (2 mu0 e t_fm Ms)` (A/m) for current density `j` (A/m²).
    pub fn spin_hall_field(&self, j: f64) -> f64 {
        HBAR * self.theta_sh * j / (2.0 * MU0 * E_CHARGE * self.t_fm * self.ms)
    }

    /// Current density through the FM + HM cross-section of a strip of width `width`.
    pub fn current_density(&self, current: f64, width: f64) -> f64 {
        current / (width * (self.t_fm + self.t_hm))
    }

    pub fn validate(&self) -> Result<(), MagneticsError> {
        let positive = [
            ("ms", self.ms),
            ("alpha", self.alpha),
            ("a_ex", self.a_ex),
            ("t_fm", self.t_fm),
            ("t_hm", self.t_hm),
            ("rho_hm", self.rho_hm),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(MagneticsError::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !self.ku2.is_finite() || !self.d_dmi.is_finite() || !self.theta_sh.is_finite() {
            return Err(MagneticsError::InvalidParameter("non-finite material constant".into()));
        }
        if self.keff() <= 0.0 {
            return Err(MagneticsError::NoPerpendicularAnisotropy { keff: self.keff() });
        }
        Ok(())
    }
}
