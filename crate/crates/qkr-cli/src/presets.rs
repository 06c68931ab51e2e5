//! Named experiment presets reproducing the published protocols.
//!
//! fig3-1x: ten periodic trains, T/T_rev in [0.26, 0.29] (far off-resonant)
//! fig3-2x: ten periodic trains, T/T_rev in [0.315, 0.325] (between the
//!          J=5 and J=3 fractional resonances)
//! fig4-1x: ten jittered trains, mean 0.34, sigma 35%, every period at
//!          least 150 fs from the J = 1, 3, 5 resonances
//! fig4-2x: ten jittered trains, mean 0.32, sigma 43%, unrestricted
//!
//! The letter picks the kick strength: a -> P=4, b -> P=6, c -> P=8.
//! All presets use 13 pulses of 130 fs FWHM.  `fig5` is a composite that
//! runs the four P=4..8 scenario families and collects their energy curves.

use crate::config::{DesignKind, ProtocolSection};

pub const N_PULSES: usize = 13;
pub const N_TRAINS: usize = 10;
pub const FWHM_PS: f64 = 0.13;
pub const AVOID_MIN_DISTANCE_FS: f64 = 150.0;

/// The four protocol families of the energy-curve figure, at every kick
/// strength.  (scenario label, base preset prefix).
pub const FIG5_SCENARIOS: [(&str, &str); 4] = [
    ("periodic-set1", "fig3-1"),
    ("periodic-set2", "fig3-2"),
    ("jitter-set1", "fig4-1"),
    ("jitter-set2", "fig4-2"),
];

pub fn strength_of_suffix(suffix: char) -> Option<f64> {
    match suffix {
        'a' => Some(4.0),
        'b' => Some(6.0),
        'c' => Some(8.0),
        _ => None,
    }
}

/// Expand a preset name into an explicit protocol section.
/// `fig5` is handled separately by the simulate command.
pub fn expand(name: &str) -> Option<ProtocolSection> {
    let mut section = ProtocolSection {
        preset: None,
        design: None,
        n_pulses: Some(N_PULSES),
        count: Some(N_TRAINS),
        strength: None,
        fwhm_ps: Some(FWHM_PS),
        t_interval_over_trev: None,
        mean_t_over_trev: None,
        sigma_frac: None,
        avoid_j: None,
        avoid_min_distance_fs: None,
    };
    let (family, suffix) = name.split_at(name.len().checked_sub(1)?);
    section.strength = strength_of_suffix(suffix.chars().next()?);
    section.strength?;
    match family {
        "fig3-1" => {
            section.design = Some(DesignKind::PeriodicInterval);
            section.t_interval_over_trev = Some([0.26, 0.29]);
        }
        "fig3-2" => {
            section.design = Some(DesignKind::PeriodicInterval);
            section.t_interval_over_trev = Some([0.315, 0.325]);
        }
        "fig4-1" => {
            section.design = Some(DesignKind::JitterAvoiding);
            section.mean_t_over_trev = Some(0.34);
            section.sigma_frac = Some(0.35);
            section.avoid_j = Some(vec![1, 3, 5]);
            section.avoid_min_distance_fs = Some(AVOID_MIN_DISTANCE_FS);
        }
        "fig4-2" => {
            section.design = Some(DesignKind::Jitter);
            section.mean_t_over_trev = Some(0.32);
            section.sigma_frac = Some(0.43);
        }
        _ => return None,
    }
    Some(section)
}

pub fn is_composite(name: &str) -> bool {
    name == "fig5"
}

pub fn known_presets() -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for family in ["fig3-1", "fig3-2", "fig4-1", "fig4-2"] {
        for suffix in ['a', 'b', 'c'] {
            names.push(format!("{family}{suffix}"));
        }
    }
    names.push("fig5".into());
    names
}
