//! The molecular rotor: energy spectrum, thermal weights and the cos²θ
//! coupling matrix that all propagation builds on.
//!
//! Raman-type kicks couple only states of the same parity, so the angular
//! momentum states form a one-dimensional lattice with constant |ΔJ| = 2.
//! For ¹⁶O₂ nuclear-spin statistics allow only odd J.

use crate::error::{Error, Result};
use crate::units;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Which rotational states exist for the molecule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Parity {
    OddOnly,
    EvenOnly,
    Both,
}

impl Parity {
    pub fn allows(self, j: u32) -> bool {
        match self {
            Parity::OddOnly => j % 2 == 1,
            Parity::EvenOnly => j % 2 == 0,
            Parity::Both => true,
        }
    }

    /// Smallest allowed J that is >= `min`.
    pub fn first_allowed_at_or_above(self, min: u32) -> u32 {
        match self {
            Parity::Both => min,
            _ => {
                if self.allows(min) {
                    min
                } else {
                    min + 1
                }
            }
        }
    }
}

/// Molecular constants of a linear rotor.
///
/// The rotational constant is always derived from the revival time through
/// `B = 1/(2·c·T_rev)`, so the two cannot drift apart.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RotorSpec {
    /// Rotational revival time in picoseconds.
    pub revival_time_ps: f64,
    /// Allowed-J nuclear spin statistics.
    pub parity: Parity,
    /// Centrifugal distortion constant D in 1/cm (0 for a rigid rotor).
    #[serde(default)]
    pub centrifugal_const_invcm: f64,
    /// Angular-momentum basis cutoff; the lattice runs up to this J.
    pub j_max: u32,
    /// Polarizability anisotropy Δα in Å³.  Only needed when converting a
    /// laser fluence into a kick strength; all experiment presets take P
    /// directly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polarizability_anisotropy_a3: Option<f64>,
}

impl RotorSpec {
    /// ¹⁶O₂ at the revival time used throughout: 11.67 ps, odd J only.
    pub fn o2() -> Self {
        RotorSpec {
            revival_time_ps: 11.67,
            parity: Parity::OddOnly,
            centrifugal_const_invcm: 0.0,
            j_max: 41,
            polarizability_anisotropy_a3: None,
        }
    }

    /// Rotational constant B in 1/cm, derived from the revival time.
    pub fn rot_constant_invcm(&self) -> f64 {
        units::rot_constant_from_revival(self.revival_time_ps)
    }

    /// D/B, the relative strength of the centrifugal term.
    pub fn d_over_b(&self) -> f64 {
        self.centrifugal_const_invcm / self.rot_constant_invcm()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.revival_time_ps > 0.0) {
            return Err(Error::Config(format!(
                "revival_time_ps must be positive, got {}",
                self.revival_time_ps
            )));
        }
        if self.j_max < 30 {
            return Err(Error::Config(format!(
                "j_max must be at least 30, got {}",
                self.j_max
            )));
        }
        Ok(())
    }
}

/// A fixed-M subspace of the step-2 rotational lattice.
///
/// Kicks from linearly polarized pulses conserve M, so every propagation
/// happens inside one block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasisBlock {
    m: i32,
    j_list: Vec<u32>,
}

impl BasisBlock {
    /// The block for magnetic quantum number `m`, covering all allowed J
    /// from the lattice bottom up to `j_max`.
    pub fn new(m: i32, parity: Parity, j_max: u32) -> Result<Self> {
        let start = parity.first_allowed_at_or_above(m.unsigned_abs());
        let j_list: Vec<u32> = (start..=j_max).step_by(2).collect();
        if j_list.is_empty() {
            return Err(Error::Config(format!(
                "no allowed J in block m={m}, j_max={j_max}"
            )));
        }
        Ok(BasisBlock { m, j_list })
    }

    /// Build a block from an explicit J list (mostly for tests and
    /// two-level studies).  The list must be strictly increasing in steps
    /// of 2 with every J >= |m|.
    pub fn from_j_list(m: i32, j_list: Vec<u32>) -> Result<Self> {
        if j_list.is_empty() {
            return Err(Error::Config("empty J list".into()));
        }
        for &j in &j_list {
            if j < m.unsigned_abs() {
                return Err(Error::Config(format!("J={j} below |m|={}", m.abs())));
            }
        }
        for w in j_list.windows(2) {
            if w[1] != w[0] + 2 {
                return Err(Error::Config(format!(
                    "J list must step by 2, got {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(BasisBlock { m, j_list })
    }

    pub fn m(&self) -> i32 {
        self.m
    }

    pub fn j_list(&self) -> &[u32] {
        &self.j_list
    }

    pub fn len(&self) -> usize {
        self.j_list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.j_list.is_empty()
    }

    /// Position of J within the block, if present.
    pub fn index_of(&self, j: u32) -> Option<usize> {
        if j < self.j_list[0] || (j - self.j_list[0]) % 2 != 0 {
            return None;
        }
        let idx = ((j - self.j_list[0]) / 2) as usize;
        (idx < self.j_list.len()).then_some(idx)
    }
}

/// Rotational energy of level J in units of hcB:
/// `J(J+1) - (D/B)·J²(J+1)²`.
pub fn rot_energy(j: i64, spec: &RotorSpec) -> Result<f64> {
    if j < 0 {
        return Err(Error::Domain(format!("negative J: {j}")));
    }
    Ok(rot_energy_hcb(j as u32, spec))
}

pub(crate) fn rot_energy_hcb(j: u32, spec: &RotorSpec) -> f64 {
    let jj = (j as f64) * (j as f64 + 1.0);
    jj - spec.d_over_b() * jj * jj
}

/// Same energy converted to 1/cm.
pub fn rot_energy_invcm(j: i64, spec: &RotorSpec) -> Result<f64> {
    Ok(rot_energy(j, spec)? * spec.rot_constant_invcm())
}

/// One retained member of the thermal ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalWeight {
    pub j: u32,
    pub m: i32,
    pub weight: f64,
}

/// Boltzmann weights over the allowed (J, M) states.
///
/// All 2J+1 sublevels of a J share the same weight.  States are sorted by
/// descending weight and truncated once the running total reaches `cutoff`;
/// the retained set is renormalized to 1.
pub fn thermal_weights(
    spec: &RotorSpec,
    temperature_k: f64,
    cutoff: f64,
) -> Result<Vec<ThermalWeight>> {
    if !(temperature_k > 0.0) {
        return Err(Error::Config(format!(
            "temperature must be positive, got {temperature_k} K"
        )));
    }
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(Error::Config(format!(
            "cutoff must be in (0,1), got {cutoff}"
        )));
    }
    let kt = units::kt_over_hcb(temperature_k, spec.rot_constant_invcm());
    let j_ground = spec.parity.first_allowed_at_or_above(0);
    let e_ground = rot_energy_hcb(j_ground, spec);

    // Boltzmann factors relative to the lowest allowed level, so the T -> 0
    // limit stays representable.
    let mut items: Vec<ThermalWeight> = Vec::new();
    let mut z = 0.0;
    let mut j = j_ground;
    let step = if spec.parity == Parity::Both { 1 } else { 2 };
    while j <= spec.j_max {
        let boltz = (-(rot_energy_hcb(j, spec) - e_ground) / kt).exp();
        z += (2 * j + 1) as f64 * boltz;
        for m in -(j as i32)..=(j as i32) {
            items.push(ThermalWeight {
                j,
                m,
                weight: boltz,
            });
        }
        j += step;
    }

    // Reject bases that cannot represent the distribution: the neglected
    // tail beyond j_max must stay below what the cutoff is allowed to drop.
    // Sum_{J>=J0} (2J+1) e^{-J(J+1)/kt} <= kt * e^{-(J0-1)J0/kt}.
    let j0 = (spec.j_max + 1) as f64;
    let tail_bound = kt * (-(j0 * (j0 + 1.0) - 2.0 * j0 - e_ground) / kt).exp();
    if !(tail_bound < (1.0 - cutoff) * z) {
        return Err(Error::Config(format!(
            "thermal distribution does not converge within j_max={}: \
             tail bound {tail_bound:.3e} vs partition sum {z:.3e}",
            spec.j_max
        )));
    }

    for it in &mut items {
        it.weight /= z;
    }
    items.sort_by(|a, b| {
        b.weight
            .partial_cmp(&a.weight)
            .unwrap()
            .then(a.j.cmp(&b.j))
            .then(a.m.cmp(&b.m))
    });

    let mut kept = Vec::new();
    let mut total = 0.0;
    for it in items {
        if total >= cutoff {
            break;
        }
        total += it.weight;
        kept.push(it);
    }
    if kept.is_empty() {
        return Err(Error::Config("cutoff excluded every state".into()));
    }
    let norm: f64 = kept.iter().map(|it| it.weight).sum();
    for it in &mut kept {
        it.weight /= norm;
    }
    Ok(kept)
}

/// Coefficient of the |J-1,M> component of cosθ|J,M>:
/// `sqrt((J² - M²) / (4J² - 1))`.  Vanishes at J = |M|.
fn beta(j: u32, m: i32) -> f64 {
    let j = j as f64;
    let m = m as f64;
    if j * j <= m * m {
        return 0.0;
    }
    ((j * j - m * m) / (4.0 * j * j - 1.0)).sqrt()
}

/// Matrix of cos²θ over the block's J list.
///
/// Tridiagonal in the site index: `<J|cos²θ|J> = β(J+1)² + β(J)²` and
/// `<J+2|cos²θ|J> = β(J+1)·β(J+2)`.  Symmetric with every eigenvalue in
/// [0, 1] since 0 <= cos²θ <= 1.
pub fn cos2_matrix(block: &BasisBlock) -> DMatrix<f64> {
    let n = block.len();
    let m = block.m();
    let mut mat = DMatrix::zeros(n, n);
    for (i, &j) in block.j_list().iter().enumerate() {
        mat[(i, i)] = beta(j + 1, m).powi(2) + beta(j, m).powi(2);
        if i + 1 < n {
            let off = beta(j + 1, m) * beta(j + 2, m);
            mat[(i, i + 1)] = off;
            mat[(i + 1, i)] = off;
        }
    }
    mat
}

/// Dimensionless kick strength from the pulse fluence integral,
/// `P = Δα/(4ħ) · ∫ ε²(t) dt` with the integral in CGS field units.
pub fn kick_strength_from_fluence(fluence_integral: f64, spec: &RotorSpec) -> Result<f64> {
    let da = spec
        .polarizability_anisotropy_a3
        .ok_or_else(|| Error::Config("polarizability_anisotropy_a3 not set on RotorSpec".into()))?;
    let da_cm3 = da * 1e-24;
    Ok(da_cm3 / (4.0 * units::HBAR_CGS) * fluence_integral)
}

/// Effective Planck constant and stochasticity parameter for a pulse period:
/// `τ = 2π·T/T_rev` (equal to ħT/I) and `K = τ·P`.
pub fn kick_params(t_over_trev: f64, p: f64) -> (f64, f64) {
    let tau = 2.0 * std::f64::consts::PI * t_over_trev;
    (tau, tau * p)
}
