//! Pulse-sequence protocols: periodic sets, Gaussian-jittered sets with
//! optional resonance avoidance, and amplitude noise.
//!
//! All generation is deterministic given (parameters, seed).  The PRNG is
//! ChaCha8 seeded with `seed_from_u64`, with Gaussian variates drawn through
//! `rand_distr::Normal`; for pinned dependency versions the generated trains
//! are bit-identical across runs and platforms.

use crate::error::{Error, Result};
use crate::lattice::nearest_resonance_distance;
use crate::rotor::RotorSpec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::json;

/// Pulse-shaper output window quoted for the experiment, used as a soft
/// limit when checking train lengths.
pub const SHAPER_WINDOW_PS: f64 = 50.0;

/// Maximum redraws per interval during rejection sampling.
const MAX_INTERVAL_ATTEMPTS: usize = 10_000;

/// Maximum set-level regenerations when matching (mean, σ) targets.
const MAX_SET_ATTEMPTS: u64 = 256;

/// One timed kick.  Times and durations are in units of T_rev; `fwhm = 0`
/// means an ideal δ-kick.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub t_over_trev: f64,
    pub strength: f64,
    pub fwhm_over_trev: f64,
}

/// An ordered, non-overlapping sequence of pulses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseTrain {
    pulses: Vec<Pulse>,
    pub label: String,
    pub seed: Option<u64>,
}

impl PulseTrain {
    /// Validates strictly increasing times, non-negative strengths and the
    /// non-overlap rule: consecutive pulses must be separated by more than
    /// 3× the larger of their FWHMs.
    pub fn new(pulses: Vec<Pulse>, label: impl Into<String>, seed: Option<u64>) -> Result<Self> {
        if pulses.is_empty() {
            return Err(Error::Config("pulse train must contain pulses".into()));
        }
        for p in &pulses {
            if p.strength < 0.0 || p.fwhm_over_trev < 0.0 {
                return Err(Error::Config(format!(
                    "pulse with negative strength or fwhm: {p:?}"
                )));
            }
        }
        for w in pulses.windows(2) {
            let gap = w[1].t_over_trev - w[0].t_over_trev;
            let min_gap = 3.0 * w[0].fwhm_over_trev.max(w[1].fwhm_over_trev);
            if !(gap > min_gap) {
                return Err(Error::Config(format!(
                    "pulses overlap: gap {gap} at t={} needs more than {min_gap}",
                    w[0].t_over_trev
                )));
            }
        }
        Ok(PulseTrain {
            pulses,
            label: label.into(),
            seed,
        })
    }

    pub fn pulses(&self) -> &[Pulse] {
        &self.pulses
    }

    pub fn n_pulses(&self) -> usize {
        self.pulses.len()
    }

    /// Time from first to last pulse, in units of T_rev.
    pub fn total_window(&self) -> f64 {
        self.pulses.last().unwrap().t_over_trev - self.pulses[0].t_over_trev
    }

    /// True when the train does not fit the shaper output window.
    pub fn exceeds_shaper_window(&self, spec: &RotorSpec) -> bool {
        self.total_window() * spec.revival_time_ps > SHAPER_WINDOW_PS
    }

    /// JSON view with physical times alongside the dimensionless ones:
    /// `{label, seed, pulses: [{t_ps, t_over_Trev, P, fwhm_ps}]}`.
    pub fn to_json(&self, spec: &RotorSpec) -> serde_json::Value {
        json!({
            "label": self.label,
            "seed": self.seed,
            "pulses": self.pulses.iter().map(|p| json!({
                "t_ps": p.t_over_trev * spec.revival_time_ps,
                "t_over_Trev": p.t_over_trev,
                "P": p.strength,
                "fwhm_ps": p.fwhm_over_trev * spec.revival_time_ps,
            })).collect::<Vec<_>>(),
        })
    }
}

/// How a set of trains was generated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "design")]
pub enum TrainDesign {
    PeriodicInterval {
        n_pulses: usize,
        t_lo: f64,
        t_hi: f64,
        count: usize,
        strength: f64,
        fwhm_over_trev: f64,
    },
    Jitter {
        n_pulses: usize,
        mean_t: f64,
        sigma_frac: f64,
        count: usize,
        strength: f64,
        fwhm_over_trev: f64,
        base_seed: u64,
    },
    JitterAvoiding {
        n_pulses: usize,
        mean_t: f64,
        sigma_frac: f64,
        count: usize,
        strength: f64,
        fwhm_over_trev: f64,
        base_seed: u64,
        avoid_j: Vec<u32>,
        min_distance_over_trev: f64,
    },
}

/// A set of pulse trains sharing N and nominal P.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSet {
    pub trains: Vec<PulseTrain>,
    pub design: TrainDesign,
}

/// Resonance-avoidance constraint for jittered intervals: every drawn
/// interval must keep at least `min_distance_over_trev` away from every
/// fractional resonance of the listed J values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvoidSpec {
    pub j_set: Vec<u32>,
    pub min_distance_over_trev: f64,
}

/// Periodic train: pulses at 0, T, 2T, ..., (N-1)·T with equal strengths.
pub fn periodic_train(n: usize, t_over_trev: f64, p: f64, fwhm: f64) -> Result<PulseTrain> {
    if n < 1 {
        return Err(Error::Config("need at least one pulse".into()));
    }
    if n > 1 && !(t_over_trev > 0.0) {
        return Err(Error::Config(format!(
            "period must be positive, got {t_over_trev}"
        )));
    }
    let pulses = (0..n)
        .map(|k| Pulse {
            t_over_trev: k as f64 * t_over_trev,
            strength: p,
            fwhm_over_trev: fwhm,
        })
        .collect();
    PulseTrain::new(pulses, format!("periodic T={t_over_trev}"), None)
}

/// `count` periodic trains with periods evenly spaced over [t_lo, t_hi],
/// endpoints included.
pub fn periodic_set(
    n: usize,
    t_lo: f64,
    t_hi: f64,
    count: usize,
    p: f64,
    fwhm: f64,
) -> Result<TrainSet> {
    if count < 2 {
        return Err(Error::Config(format!("count must be >= 2, got {count}")));
    }
    if !(t_lo > 0.0 && t_hi >= t_lo) {
        return Err(Error::Config(format!(
            "bad period interval [{t_lo}, {t_hi}]"
        )));
    }
    let trains = (0..count)
        .map(|i| {
            let t = t_lo + (t_hi - t_lo) * i as f64 / (count - 1) as f64;
            periodic_train(n, t, p, fwhm)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainSet {
        trains,
        design: TrainDesign::PeriodicInterval {
            n_pulses: n,
            t_lo,
            t_hi,
            count,
            strength: p,
            fwhm_over_trev: fwhm,
        },
    })
}

fn draw_interval(
    rng: &mut ChaCha8Rng,
    normal: &Normal<f64>,
    fwhm: f64,
    avoid: Option<&AvoidSpec>,
) -> Result<f64> {
    for _ in 0..MAX_INTERVAL_ATTEMPTS {
        let dt = normal.sample(rng);
        // truncate the Gaussian below the non-overlap bound
        if !(dt > 3.0 * fwhm) || !(dt > 0.0) {
            continue;
        }
        if let Some(av) = avoid {
            let (dist, _) = nearest_resonance_distance(dt, &av.j_set)?;
            if dist < av.min_distance_over_trev {
                continue;
            }
        }
        return Ok(dt);
    }
    Err(Error::Generation(format!(
        "exhausted {MAX_INTERVAL_ATTEMPTS} draws for one interval \
         (fwhm={fwhm}, avoid={avoid:?})"
    )))
}

/// Train with Gaussian-jittered inter-pulse intervals: each of the N-1
/// intervals is drawn from Normal(mean_t, sigma_frac·mean_t), truncated
/// below at 3×FWHM, optionally redrawn until clear of the listed
/// fractional resonances.
pub fn jittered_train(
    n: usize,
    mean_t: f64,
    sigma_frac: f64,
    seed: u64,
    avoid: Option<&AvoidSpec>,
    p: f64,
    fwhm: f64,
) -> Result<PulseTrain> {
    if !(mean_t > 0.0) || sigma_frac < 0.0 {
        return Err(Error::Config(format!(
            "bad jitter parameters: mean_t={mean_t}, sigma_frac={sigma_frac}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(mean_t, sigma_frac * mean_t)
        .map_err(|e| Error::Config(format!("bad Gaussian parameters: {e}")))?;
    let mut t = 0.0;
    let mut pulses = vec![Pulse {
        t_over_trev: 0.0,
        strength: p,
        fwhm_over_trev: fwhm,
    }];
    for _ in 1..n {
        t += draw_interval(&mut rng, &normal, fwhm, avoid)?;
        pulses.push(Pulse {
            t_over_trev: t,
            strength: p,
            fwhm_over_trev: fwhm,
        });
    }
    PulseTrain::new(
        pulses,
        format!("jitter mean={mean_t} sigma={sigma_frac} seed={seed}"),
        Some(seed),
    )
}

fn interval_stats(trains: &[PulseTrain]) -> (f64, f64) {
    let mut intervals = Vec::new();
    for tr in trains {
        for w in tr.pulses().windows(2) {
            intervals.push(w[1].t_over_trev - w[0].t_over_trev);
        }
    }
    let n = intervals.len() as f64;
    let mean = intervals.iter().sum::<f64>() / n;
    let var = intervals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// A set of jittered trains with engineered statistics: train i of attempt a
/// uses seed `base_seed + a·count + i`, and the whole set is regenerated
/// until the sample mean of all count·(N-1) intervals is within 5% of
/// `mean_t` and the sample σ within 15% of `sigma_frac·mean_t`.
pub fn jittered_set(
    count: usize,
    n: usize,
    mean_t: f64,
    sigma_frac: f64,
    base_seed: u64,
    avoid: Option<&AvoidSpec>,
    p: f64,
    fwhm: f64,
) -> Result<TrainSet> {
    if count < 1 {
        return Err(Error::Config("count must be >= 1".into()));
    }
    let design = match avoid {
        Some(av) => TrainDesign::JitterAvoiding {
            n_pulses: n,
            mean_t,
            sigma_frac,
            count,
            strength: p,
            fwhm_over_trev: fwhm,
            base_seed,
            avoid_j: av.j_set.clone(),
            min_distance_over_trev: av.min_distance_over_trev,
        },
        None => TrainDesign::Jitter {
            n_pulses: n,
            mean_t,
            sigma_frac,
            count,
            strength: p,
            fwhm_over_trev: fwhm,
            base_seed,
        },
    };

    let sigma_target = sigma_frac * mean_t;
    for attempt in 0..MAX_SET_ATTEMPTS {
        let trains = (0..count as u64)
            .map(|i| {
                jittered_train(
                    n,
                    mean_t,
                    sigma_frac,
                    base_seed + attempt * count as u64 + i,
                    avoid,
                    p,
                    fwhm,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        if n > 1 {
            let (mean, sigma) = interval_stats(&trains);
            if (mean - mean_t).abs() > 0.05 * mean_t {
                continue;
            }
            if sigma_target > 0.0 && (sigma - sigma_target).abs() > 0.15 * sigma_target {
                continue;
            }
        }
        return Ok(TrainSet { trains, design });
    }
    Err(Error::Generation(format!(
        "no seed window within {MAX_SET_ATTEMPTS} attempts matched the \
         (mean, sigma) targets ({mean_t}, {sigma_target})"
    )))
}

/// Multiply every pulse strength by an independent Gaussian factor with mean
/// 1 and standard deviation `sigma_frac`, clamped at zero.  Deterministic
/// under the seed.
pub fn amplitude_noise(train: &PulseTrain, sigma_frac: f64, seed: u64) -> Result<PulseTrain> {
    if sigma_frac < 0.0 {
        return Err(Error::Config(format!(
            "sigma must be >= 0, got {sigma_frac}"
        )));
    }
    if sigma_frac == 0.0 {
        return Ok(train.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(1.0, sigma_frac)
        .map_err(|e| Error::Config(format!("bad Gaussian parameters: {e}")))?;
    let pulses = train
        .pulses()
        .iter()
        .map(|p| Pulse {
            strength: p.strength * normal.sample(&mut rng).max(0.0),
            ..*p
        })
        .collect();
    PulseTrain::new(pulses, train.label.clone(), train.seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_train_basics() {
        let tr = periodic_train(1, 0.5, 4.0, 0.0).unwrap();
        assert_eq!(tr.n_pulses(), 1);
        assert_eq!(tr.pulses()[0].t_over_trev, 0.0);

        let tr = periodic_train(13, 0.275, 4.0, 0.0).unwrap();
        assert!((tr.total_window() - 12.0 * 0.275).abs() < 1e-15);

        // 13 pulses at T = 0.32 T_rev span 3.84 T_rev ≈ 44.8 ps < 50 ps
        let tr = periodic_train(13, 0.32, 4.0, 0.0).unwrap();
        let spec = RotorSpec::o2();
        let window_ps = tr.total_window() * spec.revival_time_ps;
        assert!((window_ps - 44.8128).abs() < 1e-10);
        assert!(!tr.exceeds_shaper_window(&spec));
        let long = periodic_train(13, 0.4, 4.0, 0.0).unwrap();
        assert!(long.exceeds_shaper_window(&spec));
    }

    #[test]
    fn overlapping_pulses_rejected() {
        let fwhm = 0.1;
        assert!(periodic_train(3, 0.25, 4.0, fwhm).is_err());
        assert!(periodic_train(3, 0.31, 4.0, fwhm).is_ok());
    }

    #[test]
    fn periodic_set_spacing() {
        let set = periodic_set(13, 0.26, 0.29, 10, 4.0, 0.0).unwrap();
        assert_eq!(set.trains.len(), 10);
        let t0 = set.trains[0].pulses()[1].t_over_trev;
        let t9 = set.trains[9].pulses()[1].t_over_trev;
        assert!((t0 - 0.26).abs() < 1e-15);
        assert!((t9 - 0.29).abs() < 1e-15);
        let step = set.trains[1].pulses()[1].t_over_trev - t0;
        assert!((step - 0.03 / 9.0).abs() < 1e-15);

        let set2 = periodic_set(13, 0.315, 0.325, 10, 4.0, 0.0).unwrap();
        let step2 = set2.trains[1].pulses()[1].t_over_trev - set2.trains[0].pulses()[1].t_over_trev;
        assert!((step2 - 0.01 / 9.0).abs() < 1e-15);

        let two = periodic_set(13, 0.26, 0.29, 2, 4.0, 0.0).unwrap();
        assert_eq!(two.trains.len(), 2);
        assert!((two.trains[1].pulses()[1].t_over_trev - 0.29).abs() < 1e-15);
        assert!(periodic_set(13, 0.26, 0.29, 1, 4.0, 0.0).is_err());
    }

    #[test]
    fn zero_sigma_jitter_is_periodic() {
        let tr = jittered_train(13, 0.34, 0.0, 7, None, 4.0, 0.0).unwrap();
        let per = periodic_train(13, 0.34, 4.0, 0.0).unwrap();
        for (a, b) in tr.pulses().iter().zip(per.pulses()) {
            assert!((a.t_over_trev - b.t_over_trev).abs() < 1e-12);
        }
    }

    #[test]
    fn jitter_is_deterministic_under_seed() {
        let a = jittered_train(13, 0.34, 0.35, 99, None, 4.0, 0.0111).unwrap();
        let b = jittered_train(13, 0.34, 0.35, 99, None, 4.0, 0.0111).unwrap();
        assert_eq!(a, b);
        let c = jittered_train(13, 0.34, 0.35, 100, None, 4.0, 0.0111).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn avoidance_constraint_holds_for_every_interval() {
        let spec = RotorSpec::o2();
        let min_dist = 0.150 / spec.revival_time_ps; // 150 fs
        let avoid = AvoidSpec {
            j_set: vec![1, 3, 5],
            min_distance_over_trev: min_dist,
        };
        let set = jittered_set(10, 13, 0.34, 0.35, 0, Some(&avoid), 4.0, 0.13 / 11.67).unwrap();
        let mut n_intervals = 0;
        for tr in &set.trains {
            for w in tr.pulses().windows(2) {
                let dt = w[1].t_over_trev - w[0].t_over_trev;
                let (dist, _) = nearest_resonance_distance(dt, &avoid.j_set).unwrap();
                assert!(
                    dist >= min_dist,
                    "interval {dt} is {dist} from a resonance (min {min_dist})"
                );
                n_intervals += 1;
            }
        }
        assert_eq!(
            n_intervals, 120,
            "ten trains of 13 pulses carry 120 periods"
        );
    }

    #[test]
    fn set_statistics_windows() {
        // accepted sets have sample σ within 15% of the target
        let mut accepted = 0;
        for seed in 0..100 {
            let set = jittered_set(10, 13, 0.32, 0.43, seed * 1000, None, 6.0, 0.0).unwrap();
            let (mean, sigma) = interval_stats(&set.trains);
            assert!((mean - 0.32).abs() <= 0.05 * 0.32 + 1e-12);
            let s = sigma / 0.32;
            assert!(
                (0.366..=0.4945).contains(&s),
                "seed {seed}: sigma/mean = {s}"
            );
            accepted += 1;
        }
        assert_eq!(accepted, 100);
    }

    #[test]
    fn degenerate_jitter_set() {
        let set = jittered_set(3, 13, 0.3, 0.0, 5, None, 4.0, 0.0).unwrap();
        for tr in &set.trains {
            for w in tr.pulses().windows(2) {
                assert!((w[1].t_over_trev - w[0].t_over_trev - 0.3).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn amplitude_noise_properties() {
        let tr = periodic_train(13, 0.3, 4.0, 0.0).unwrap();
        let same = amplitude_noise(&tr, 0.0, 1).unwrap();
        assert_eq!(tr, same);

        let a = amplitude_noise(&tr, 0.15, 7).unwrap();
        let b = amplitude_noise(&tr, 0.15, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(tr, a);

        // mean multiplicative factor over many draws stays near 1
        let long = periodic_train(10_000, 0.3, 4.0, 0.0).unwrap();
        let noisy = amplitude_noise(&long, 0.15, 3).unwrap();
        let mean: f64 = noisy.pulses().iter().map(|p| p.strength / 4.0).sum::<f64>() / 10_000.0;
        assert!((mean - 1.0).abs() < 0.01, "mean factor {mean}");
    }

    #[test]
    fn train_json_embeds_physical_times() {
        let spec = RotorSpec::o2();
        let tr = periodic_train(2, 0.5, 4.0, 0.0).unwrap();
        let v = tr.to_json(&spec);
        assert_eq!(v["pulses"][1]["t_ps"].as_f64().unwrap(), 0.5 * 11.67);
        assert_eq!(v["pulses"][1]["P"].as_f64().unwrap(), 4.0);
    }
}
