//! The full experiment: a thermal initial ensemble crossed with a set of
//! pulse trains, averaged into kick-by-kick population distributions.
//!
//! Every thermal member is a pure basis state |J0, M0>, propagated
//! independently — exact for a thermally diagonal initial state.  The
//! (member × train) grid is data-parallel; the reduction runs in a fixed
//! order afterwards so results are bit-reproducible regardless of how the
//! parallel work completes.  Members with ±M evolve identically (the cos²
//! couplings depend on M²), so only M >= 0 blocks are propagated and the
//! weights folded.

use crate::error::{Error, Result};
use crate::propagation::{evolve_train, KickCache, PropagationMode, RotState};
use crate::pulse::TrainSet;
use crate::rotor::{rot_energy_hcb, thermal_weights, RotorSpec, ThermalWeight};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One retained thermal ensemble member.
#[derive(Clone, Debug)]
pub struct EnsembleMember {
    pub j0: u32,
    pub m0: i32,
    pub weight: f64,
    pub state: RotState,
}

/// The initial thermal ensemble together with how it was built.
#[derive(Clone, Debug)]
pub struct ThermalEnsemble {
    pub members: Vec<EnsembleMember>,
    pub temperature_k: f64,
    pub cutoff: f64,
}

/// Everything needed to reproduce a run, embedded in every output.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMetadata {
    pub spec: RotorSpec,
    pub temperature_k: f64,
    pub thermal_cutoff: f64,
    pub mode: PropagationMode,
    pub train_set: TrainSet,
}

/// Averaged kick-by-kick population distributions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnsembleResult {
    /// Row n holds P_J after n kicks; columns are indexed by J = 0..=j_max.
    pub p_of_j_after_kick: Vec<Vec<f64>>,
    pub metadata: RunMetadata,
    /// Worst population seen within two sites of j_max across the whole
    /// grid; a basis-adequacy diagnostic.
    #[serde(default)]
    pub max_edge_population: f64,
    /// Per-train averaged matrices, kept only on request.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_train: Option<Vec<Vec<Vec<f64>>>>,
}

impl EnsembleResult {
    /// Distribution after the final kick.
    pub fn final_distribution(&self) -> &[f64] {
        self.p_of_j_after_kick.last().unwrap()
    }

    pub fn n_kicks(&self) -> usize {
        self.p_of_j_after_kick.len() - 1
    }
}

/// Thermal ensemble of pure basis states |J0, M0> with Boltzmann weights.
pub fn initial_ensemble(
    spec: &RotorSpec,
    temperature_k: f64,
    cutoff: f64,
) -> Result<ThermalEnsemble> {
    let weights = thermal_weights(spec, temperature_k, cutoff)?;
    let members = weights
        .iter()
        .map(|&ThermalWeight { j, m, weight }| {
            Ok(EnsembleMember {
                j0: j,
                m0: m,
                weight,
                state: RotState::basis_state(j, m, spec)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ThermalEnsemble {
        members,
        temperature_k,
        cutoff,
    })
}

/// Work unit of the parallel grid: one (J0, |M0|) group against one train.
struct GridJob<'a> {
    j0: u32,
    m_abs: i32,
    state: &'a RotState,
    weight: f64,
    train_idx: usize,
}

/// Propagate every ensemble member through every train of the set and
/// average the per-J populations with Boltzmann × uniform-train weights.
pub fn run_ensemble(
    ensemble: &ThermalEnsemble,
    train_set: &TrainSet,
    mode: PropagationMode,
    spec: &RotorSpec,
    retain_per_train: bool,
) -> Result<EnsembleResult> {
    let members = &ensemble.members;
    if members.is_empty() || train_set.trains.is_empty() {
        return Err(Error::Config("empty ensemble or train set".into()));
    }
    let n_kicks = train_set.trains[0].n_pulses();
    if train_set.trains.iter().any(|t| t.n_pulses() != n_kicks) {
        return Err(Error::Config("trains in a set must share N".into()));
    }
    for mb in members.iter() {
        let top = *mb.state.block.j_list().last().unwrap();
        if top > spec.j_max || !spec.parity.allows(top) {
            return Err(Error::Config(format!(
                "member J0={} M0={} was built for a different rotor spec \
                 (block top J={top}, spec j_max={})",
                mb.j0, mb.m0, spec.j_max
            )));
        }
    }

    // fold ±M into one propagation per (J0, |M0|)
    let mut groups: Vec<(u32, i32, f64, &RotState)> = Vec::new();
    for mb in members.iter() {
        let key_m = mb.m0.abs();
        match groups
            .iter_mut()
            .find(|(j, m, _, _)| *j == mb.j0 && *m == key_m)
        {
            Some(entry) => entry.2 += mb.weight,
            None => groups.push((mb.j0, key_m, mb.weight, &mb.state)),
        }
    }
    groups.sort_by_key(|&(j, m, _, _)| (j, m));

    let train_weight = 1.0 / train_set.trains.len() as f64;
    let cache = KickCache::new();

    let jobs: Vec<GridJob> = groups
        .iter()
        .flat_map(|&(j0, m_abs, weight, state)| {
            (0..train_set.trains.len()).map(move |train_idx| GridJob {
                j0,
                m_abs,
                state,
                weight,
                train_idx,
            })
        })
        .collect();

    let trajectories: Vec<(usize, f64, Vec<Vec<f64>>, f64)> = jobs
        .par_iter()
        .map(|job| {
            let traj = evolve_train(
                job.state,
                &train_set.trains[job.train_idx],
                mode,
                spec,
                &cache,
            )
            .map_err(|e| {
                Error::Numerical(format!(
                    "member J0={}, |M0|={}, train {}: {e}",
                    job.j0, job.m_abs, job.train_idx
                ))
            })?;
            Ok((
                job.train_idx,
                job.weight,
                traj.populations_after_kick,
                traj.max_edge_population,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_edge_population = trajectories
        .iter()
        .map(|(_, _, _, edge)| *edge)
        .fold(0.0f64, f64::max);

    let n_cols = spec.j_max as usize + 1;
    let mut p_of_j = vec![vec![0.0; n_cols]; n_kicks + 1];
    let mut per_train = retain_per_train
        .then(|| vec![vec![vec![0.0; n_cols]; n_kicks + 1]; train_set.trains.len()]);

    // deterministic reduction: jobs are already in (group, train) order
    for ((train_idx, weight, pops, _), job) in trajectories.iter().zip(&jobs) {
        let j_list = job.state.block.j_list();
        for (row, site_pops) in pops.iter().enumerate() {
            for (&j, &p) in j_list.iter().zip(site_pops.iter()) {
                p_of_j[row][j as usize] += weight * train_weight * p;
                if let Some(pt) = per_train.as_mut() {
                    pt[*train_idx][row][j as usize] += weight * p;
                }
            }
        }
    }

    for (n, row) in p_of_j.iter().enumerate() {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-8 {
            return Err(Error::Numerical(format!(
                "row {n} of the averaged distribution sums to {sum}"
            )));
        }
    }

    Ok(EnsembleResult {
        p_of_j_after_kick: p_of_j,
        max_edge_population,
        metadata: RunMetadata {
            spec: spec.clone(),
            temperature_k: ensemble.temperature_k,
            thermal_cutoff: ensemble.cutoff,
            mode,
            train_set: train_set.clone(),
        },
        per_train,
    })
}

/// Rotational energy after each kick, `E(n) = Σ_J E_J·P_J(n)`, in hcB units.
pub fn absorbed_energy_curve(result: &EnsembleResult, spec: &RotorSpec) -> Vec<f64> {
    result
        .p_of_j_after_kick
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(j, p)| rot_energy_hcb(j as u32, spec) * p)
                .sum()
        })
        .collect()
}

/// Same curve in 1/cm.
pub fn absorbed_energy_curve_invcm(result: &EnsembleResult, spec: &RotorSpec) -> Vec<f64> {
    absorbed_energy_curve(result, spec)
        .into_iter()
        .map(|e| e * spec.rot_constant_invcm())
        .collect()
}
