//! Mapping of the kicked rotor onto a disordered one-dimensional lattice:
//! on-site energies, the pseudo-randomness check, and the quantum-resonance
//! map used to choose pulse-train periods.
//!
//! A site J carries the phase `φ_J = (π/2)·(ε - J(J+1))·T/T_rev` (ε is the
//! quasienergy in hcB units) and the on-site energy `T_J = tan(φ_J)`.  Two
//! neighboring sites J and J+2 share their on-site energy whenever
//! `Δφ_J = π(2J+3)·T/T_rev` is an integer multiple of π, i.e. at
//! `T/T_rev = m/(2J+3)` — the fractional quantum resonances.

use crate::error::{Error, Result};
use crate::rotor::Parity;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// Tolerance around the tangent pole at φ = π/2.
pub const POLE_TOLERANCE: f64 = 1e-9;

/// A fractional quantum resonance: the pulse period at which sites J and
/// J+2 accumulate a relative phase that is a multiple of π.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceMarker {
    pub j: u32,
    pub order_m: u32,
    pub t_over_trev: f64,
}

impl ResonanceMarker {
    pub fn new(j: u32, order_m: u32) -> Self {
        ResonanceMarker {
            j,
            order_m,
            t_over_trev: order_m as f64 / (2 * j + 3) as f64,
        }
    }
}

/// On-site energies of the rotational lattice at one (quasienergy, period).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LatticeProfile {
    pub quasienergy_over_hcb: f64,
    pub t_over_trev: f64,
    /// (J, φ_J, T_J) per lattice site.
    pub onsite: Vec<(u32, f64, f64)>,
}

impl LatticeProfile {
    pub fn new(
        quasienergy_over_hcb: f64,
        t_over_trev: f64,
        parity: Parity,
        j_max: u32,
    ) -> Result<Self> {
        let start = parity.first_allowed_at_or_above(0);
        let step = if parity == Parity::Both { 1 } else { 2 };
        let mut onsite = Vec::new();
        let mut j = start;
        while j <= j_max {
            let phi = phi_j(quasienergy_over_hcb, j, t_over_trev);
            onsite.push((j, phi, onsite_energy(phi)?));
            j += step;
        }
        Ok(LatticeProfile {
            quasienergy_over_hcb,
            t_over_trev,
            onsite,
        })
    }
}

/// Site phase `(π/2)·(ε - J(J+1))·T/T_rev`, reduced modulo π into
/// (-π/2, π/2].
pub fn phi_j(quasienergy_over_hcb: f64, j: u32, t_over_trev: f64) -> f64 {
    let jj = (j as f64) * (j as f64 + 1.0);
    let raw = FRAC_PI_2 * (quasienergy_over_hcb - jj) * t_over_trev;
    let mut reduced = raw - PI * (raw / PI).round();
    if reduced <= -FRAC_PI_2 {
        reduced += PI;
    }
    reduced
}

/// On-site energy `T_J = tan(φ)`.  Fails near the pole at φ = π/2, which
/// marks an exact resonance hit; the caller must perturb the quasienergy.
pub fn onsite_energy(phi: f64) -> Result<f64> {
    if (phi - FRAC_PI_2).abs() < POLE_TOLERANCE {
        return Err(Error::Pole {
            phi,
            tol: POLE_TOLERANCE,
        });
    }
    Ok(phi.tan())
}

/// Resonance markers of a single J for every order m in the range.
pub fn resonance_times(j: u32, m_range: std::ops::RangeInclusive<u32>) -> Vec<ResonanceMarker> {
    m_range.map(|m| ResonanceMarker::new(j, m)).collect()
}

/// All markers of allowed J <= j_max whose period falls inside
/// [t_lo, t_hi] ⊂ (0, 1], sorted by (T, J).
pub fn resonance_map(
    parity: Parity,
    j_max: u32,
    t_lo: f64,
    t_hi: f64,
) -> Result<Vec<ResonanceMarker>> {
    if !(t_lo > 0.0 && t_lo <= t_hi && t_hi <= 1.0) {
        return Err(Error::Config(format!(
            "period interval must be a nonempty subset of (0, 1], got [{t_lo}, {t_hi}]"
        )));
    }
    let mut markers = Vec::new();
    let start = parity.first_allowed_at_or_above(0);
    let step = if parity == Parity::Both { 1 } else { 2 };
    let mut j = start;
    while j <= j_max {
        let q = (2 * j + 3) as f64;
        // scan one order beyond each edge; the exact comparison on the
        // marker's own period decides inclusion
        let m_lo = ((t_lo * q).floor() as i64).max(1);
        let m_hi = (t_hi * q).ceil() as i64;
        for m in m_lo..=m_hi {
            let marker = ResonanceMarker::new(j, m as u32);
            if marker.t_over_trev >= t_lo && marker.t_over_trev <= t_hi {
                markers.push(marker);
            }
        }
        j += step;
    }
    markers.sort_by(|a, b| {
        a.t_over_trev
            .partial_cmp(&b.t_over_trev)
            .unwrap()
            .then(a.j.cmp(&b.j))
    });
    Ok(markers)
}

/// Distance (in units of T_rev) from a period to the nearest fractional
/// resonance of any J in the set, with the achieving marker.
pub fn nearest_resonance_distance(
    t_over_trev: f64,
    j_set: &[u32],
) -> Result<(f64, ResonanceMarker)> {
    if j_set.is_empty() {
        return Err(Error::Config("empty J set".into()));
    }
    let mut best: Option<(f64, ResonanceMarker)> = None;
    for &j in j_set {
        let q = (2 * j + 3) as f64;
        let m = (t_over_trev * q).round().max(0.0) as u32;
        for cand in [m.saturating_sub(1), m, m + 1] {
            let marker = ResonanceMarker::new(j, cand);
            let dist = (t_over_trev - marker.t_over_trev).abs();
            if best.map_or(true, |(d, _)| dist < d) {
                best = Some((dist, marker));
            }
        }
    }
    Ok(best.unwrap())
}

/// Wald–Wolfowitz runs-test over the signs of a sequence.  Zeros count as
/// positive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunsTest {
    pub n_pos: usize,
    pub n_neg: usize,
    pub runs: usize,
    pub z_score: f64,
}

impl RunsTest {
    /// Two-sided test at 5% significance.
    pub fn is_random_at_5pct(&self) -> bool {
        self.z_score.abs() < 1.96
    }
}

pub fn runs_test(values: &[f64]) -> RunsTest {
    let signs: Vec<bool> = values.iter().map(|&v| v >= 0.0).collect();
    let n_pos = signs.iter().filter(|&&s| s).count();
    let n_neg = signs.len() - n_pos;
    let runs = if signs.is_empty() {
        0
    } else {
        1 + signs.windows(2).filter(|w| w[0] != w[1]).count()
    };
    if n_pos == 0 || n_neg == 0 {
        return RunsTest {
            n_pos,
            n_neg,
            runs,
            z_score: f64::INFINITY,
        };
    }
    let n = (n_pos + n_neg) as f64;
    let p = n_pos as f64;
    let q = n_neg as f64;
    let mu = 2.0 * p * q / n + 1.0;
    let var = 2.0 * p * q * (2.0 * p * q - n) / (n * n * (n - 1.0));
    RunsTest {
        n_pos,
        n_neg,
        runs,
        z_score: (runs as f64 - mu) / var.sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_vanishes_on_diagonal() {
        assert_eq!(phi_j(12.0, 3, 0.7), 0.0);
    }

    #[test]
    fn phi_example_value() {
        // ε=0, J=1, T/T_rev = 0.275 -> -0.275π, already reduced
        let phi = phi_j(0.0, 1, 0.275);
        assert!((phi - (-0.275 * PI)).abs() < 1e-12, "phi = {phi}");
        assert!((phi - (-0.86393798)).abs() < 1e-7);
    }

    #[test]
    fn phi_on_quantum_resonance_is_site_independent() {
        // T = T_rev: J(J+1) shifts the argument by whole multiples of π
        for eps in [0.0, 0.7, 3.3] {
            let reference = phi_j(eps, 1, 1.0);
            for j in [3, 5, 7, 9, 15, 41] {
                let phi = phi_j(eps, j, 1.0);
                assert!(
                    (phi - reference).abs() < 1e-9,
                    "J={j}: {phi} vs {reference}"
                );
            }
        }
    }

    #[test]
    fn phi_range_is_half_open() {
        for j in 0..60 {
            for t in [0.1, 0.275, 0.317, 0.9] {
                let phi = phi_j(0.123, j, t);
                assert!(phi > -FRAC_PI_2 && phi <= FRAC_PI_2);
            }
        }
    }

    #[test]
    fn onsite_energy_values_and_pole() {
        assert_eq!(onsite_energy(0.0).unwrap(), 0.0);
        assert!((onsite_energy(PI / 4.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            onsite_energy(FRAC_PI_2 - 1e-12),
            Err(Error::Pole { .. })
        ));
    }

    #[test]
    fn profile_at_exact_resonance_reports_pole() {
        // at ε=0, T=0.275 the site J=39 lands exactly on the tangent pole
        assert!(matches!(
            LatticeProfile::new(0.0, 0.275, Parity::OddOnly, 41),
            Err(Error::Pole { .. })
        ));
    }

    #[test]
    fn onsite_sequence_is_pseudorandom() {
        // perturb the quasienergy off the pole, per the pole contract
        let profile = LatticeProfile::new(1e-6, 0.275, Parity::OddOnly, 41).unwrap();
        assert_eq!(profile.onsite.len(), 21);
        let values: Vec<f64> = profile.onsite.iter().map(|&(_, _, t)| t).collect();
        let rt = runs_test(&values);
        assert_eq!((rt.n_pos, rt.n_neg, rt.runs), (8, 13, 12));
        // cross-check the statistic against a direct evaluation
        let (p, q, n) = (8.0f64, 13.0f64, 21.0f64);
        let mu = 2.0 * p * q / n + 1.0;
        let var = 2.0 * p * q * (2.0 * p * q - n) / (n * n * (n - 1.0));
        let z = (12.0 - mu) / var.sqrt();
        assert!((rt.z_score - z).abs() < 1e-12);
        assert!(rt.is_random_at_5pct(), "z = {}", rt.z_score);
    }

    #[test]
    fn onsite_sequence_has_no_short_period() {
        // exact rational-phase comparison at T = 11/40:
        // φ_{J+2p} ≡ φ_J (mod π) iff 11·2p(2J+2p+1) ≡ 0 (mod 160)
        for p in 1u64..=10 {
            let mut differs = false;
            for j in (1u64..=41 - 2 * p).step_by(2) {
                if (22 * p * (2 * j + 2 * p + 1)) % 160 != 0 {
                    differs = true;
                    break;
                }
            }
            assert!(differs, "period {p} sites would repeat");
        }
    }

    #[test]
    fn quantum_resonance_extends_states() {
        // on T = T_rev every on-site energy of a parity class is equal
        let profile = LatticeProfile::new(0.4, 1.0, Parity::OddOnly, 41).unwrap();
        let first = profile.onsite[0].2;
        for &(_, _, t) in &profile.onsite {
            assert!((t - first).abs() < 1e-9);
        }
    }

    #[test]
    fn marker_examples() {
        let m = resonance_times(3, 1..=4);
        assert!(m.iter().any(|r| (r.t_over_trev - 1.0 / 3.0).abs() < 1e-15));
        let m = resonance_times(5, 4..=4);
        assert_eq!(m[0].t_over_trev, 4.0 / 13.0);
        let m = resonance_times(1, 1..=5);
        let expect = [0.2, 0.4, 0.6, 0.8, 1.0];
        for (marker, want) in m.iter().zip(expect) {
            assert!((marker.t_over_trev - want).abs() < 1e-15);
        }
    }

    #[test]
    fn marker_phase_is_multiple_of_pi() {
        for j in (1..=13).step_by(2) {
            for m in 1..=(2 * j + 3) {
                let marker = ResonanceMarker::new(j, m);
                let phase = PI * (2 * j + 3) as f64 * marker.t_over_trev;
                let residue = (phase / PI - (phase / PI).round()).abs() * PI;
                assert!(residue < 1e-12, "J={j} m={m}: residue {residue}");
            }
        }
    }

    #[test]
    fn map_over_unit_interval_for_j1() {
        let map = resonance_map(Parity::OddOnly, 1, 1e-9, 1.0).unwrap();
        assert_eq!(map.len(), 5);
        for (marker, want) in map.iter().zip([0.2, 0.4, 0.6, 0.8, 1.0]) {
            assert!((marker.t_over_trev - want).abs() < 1e-15);
        }
    }

    #[test]
    fn set1_interval_avoids_low_j() {
        let map = resonance_map(Parity::OddOnly, 7, 0.26, 0.29).unwrap();
        assert!(
            !map.iter().any(|m| m.j <= 5),
            "low-J marker inside [0.26, 0.29]: {map:?}"
        );
    }

    #[test]
    fn set2_interval_neighbors() {
        // J=5 at 4/13 and J=3 at 1/3 bracket [0.315, 0.325] within 300 fs
        let map = resonance_map(Parity::OddOnly, 7, 0.315, 0.325).unwrap();
        assert!(map.iter().all(|m| m.j > 5));
        let trev_fs = 11.67e3;
        let below = (0.315 - 4.0 / 13.0) * trev_fs;
        let above = (1.0 / 3.0 - 0.325) * trev_fs;
        assert!(below > 0.0 && below < 300.0, "J=5 gap {below} fs");
        assert!(above > 0.0 && above < 300.0, "J=3 gap {above} fs");
    }

    #[test]
    fn map_includes_markers_on_interval_edges() {
        let third = 1.0 / 3.0;
        let map = resonance_map(Parity::OddOnly, 3, third, third).unwrap();
        assert!(map.iter().any(|m| (m.j, m.order_m) == (3, 3)), "{map:?}");
    }

    #[test]
    fn map_rejects_bad_interval() {
        assert!(resonance_map(Parity::OddOnly, 13, 0.0, 0.5).is_err());
        assert!(resonance_map(Parity::OddOnly, 13, 0.5, 0.4).is_err());
        assert!(resonance_map(Parity::OddOnly, 13, 0.5, 1.1).is_err());
    }

    #[test]
    fn map_is_sorted_by_period() {
        let map = resonance_map(Parity::OddOnly, 13, 0.2, 0.45).unwrap();
        for w in map.windows(2) {
            assert!(
                w[0].t_over_trev < w[1].t_over_trev
                    || (w[0].t_over_trev == w[1].t_over_trev && w[0].j < w[1].j)
            );
        }
    }

    #[test]
    fn nearest_distance_examples() {
        let (d, m) = nearest_resonance_distance(1.0 / 3.0, &[3]).unwrap();
        assert!(d < 1e-15);
        assert_eq!((m.j, m.order_m), (3, 3));

        let (d, m) = nearest_resonance_distance(0.34, &[1, 3, 5]).unwrap();
        assert!((d - (0.34 - 1.0 / 3.0)).abs() < 1e-12);
        assert_eq!(m.j, 3);
        // 0.00667 T_rev is 77.8 fs for oxygen
        assert!((d * 11.67e3 - 77.8).abs() < 0.1);
    }

    #[test]
    fn nearest_distance_is_periodic_in_m() {
        for t in [0.07, 0.34, 0.51] {
            let (d0, _) = nearest_resonance_distance(t, &[3]).unwrap();
            let (d1, _) = nearest_resonance_distance(t + 1.0, &[3]).unwrap();
            assert!((d0 - d1).abs() < 1e-12);
        }
    }

    #[test]
    fn nearest_distance_needs_j() {
        assert!(nearest_resonance_distance(0.3, &[]).is_err());
    }

    #[test]
    fn runs_test_degenerate() {
        let rt = runs_test(&[1.0, 2.0, 3.0]);
        assert!(!rt.is_random_at_5pct());
        assert_eq!(rt.runs, 1);
    }
}
