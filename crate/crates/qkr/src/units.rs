//! Unit conventions and physical constants.
//!
//! Internally everything is dimensionless: times are measured in units of the
//! rotational revival time `T_rev`, energies in units of `hcB`, phases in
//! radians.  Conversions to picoseconds, wavenumbers and laser-field
//! quantities happen only at the I/O boundary, through the helpers below.

/// Speed of light in cm/ps (exact).
pub const C_CM_PER_PS: f64 = 0.0299792458;

/// Boltzmann constant over hc, in 1/(cm·K) (CODATA, exact SI definitions).
pub const KB_INVCM_PER_K: f64 = 0.695_034_800_4;

/// Reduced Planck constant in erg·s (CGS).
pub const HBAR_CGS: f64 = 1.054_571_817e-27;

/// Rotational constant B (1/cm) from the revival time, `T_rev = 1/(2cB)`.
pub fn rot_constant_from_revival(revival_time_ps: f64) -> f64 {
    1.0 / (2.0 * C_CM_PER_PS * revival_time_ps)
}

/// Thermal energy kT expressed in units of hcB.
pub fn kt_over_hcb(temperature_k: f64, rot_constant_invcm: f64) -> f64 {
    KB_INVCM_PER_K * temperature_k / rot_constant_invcm
}

pub fn ps_to_trev(t_ps: f64, revival_time_ps: f64) -> f64 {
    t_ps / revival_time_ps
}

pub fn trev_to_ps(t_over_trev: f64, revival_time_ps: f64) -> f64 {
    t_over_trev * revival_time_ps
}

pub fn fs_to_trev(t_fs: f64, revival_time_ps: f64) -> f64 {
    t_fs * 1e-3 / revival_time_ps
}

/// Integral of the squared field envelope, `∫ ε²(t) dt`, for a Gaussian pulse
/// of given peak intensity and intensity FWHM.  Output is in CGS field units
/// (statvolt²/cm²·s), the convention expected by `kick_strength_from_fluence`.
///
/// Uses I = (c/8π)·ε² for the cycle-averaged intensity of the field envelope.
pub fn field_squared_integral(peak_intensity_w_cm2: f64, fwhm_ps: f64) -> f64 {
    let intensity_cgs = peak_intensity_w_cm2 * 1e7; // erg/s/cm^2
                                                    // ∫ g(t) dt for a Gaussian of unit peak and FWHM w is w·sqrt(pi/(4 ln 2)).
    let area_factor = (std::f64::consts::PI / (4.0 * std::f64::consts::LN_2)).sqrt();
    let fluence = intensity_cgs * fwhm_ps * 1e-12 * area_factor; // erg/cm^2
    8.0 * std::f64::consts::PI / (C_CM_PER_PS * 1e12) * fluence
}
