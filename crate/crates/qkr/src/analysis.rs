//! Line-shape analysis of angular-momentum distributions: fit windows,
//! exponential and Gaussian fits in log-population space, and shape
//! classification.
//!
//! Both models are fitted by profiling over the center: for a fixed J_c the
//! remaining two parameters (log-amplitude and inverse width) solve a
//! linear least-squares problem in closed form, so the fit reduces to a
//! deterministic one-dimensional scan over J_c followed by a golden-section
//! refinement.  This handles the |J - J_c| kink without derivatives; exact
//! ties are resolved toward the lower J_c.

use crate::error::{Error, Result};
use crate::rotor::Parity;
use serde::{Deserialize, Serialize};

/// Populations below this are floored before taking logs.
pub const LOG_FLOOR: f64 = 1e-12;

/// Population fraction defining the top of the fit window.
pub const WINDOW_POPULATION_CUT: f64 = 0.01;

/// Default excitation limit from the finite pulse duration.
pub const J_LIM_DEFAULT: u32 = 21;

/// J_c grid spacing of the profile scan.
const SCAN_STEP: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitModel {
    /// `P_J ∝ exp(-|J - J_c| / width)`; width is the localization length.
    Exponential,
    /// `A·exp(-((J - J_c)/width)²)`; width is the 1/e half-width.
    Gaussian,
}

/// Result of a line-shape fit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub amplitude: f64,
    pub j_c: f64,
    /// J_loc for the exponential model, J_diff for the Gaussian (1/e widths).
    pub width: f64,
    pub rms_log_residual: f64,
    pub window: (u32, u32),
    /// Linearized standard errors of (ln amplitude, J_c, width); absent when
    /// the normal matrix is singular (e.g. one-sided decay) or the window
    /// leaves no degrees of freedom.
    pub uncertainties: Option<[f64; 3]>,
    /// Whether any population in the window was floored at `LOG_FLOOR`.
    pub floored: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeLabel {
    Exponential,
    Gaussian,
    Ambiguous,
}

/// Residual-ratio threshold separating a clear winner from "ambiguous".
pub const CLASSIFY_RATIO: f64 = 1.2;

/// Monotonicity report of fitted widths against kick strength.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WidthTrend {
    /// (P, width), sorted by P.
    pub entries: Vec<(f64, f64)>,
    pub strictly_increasing: bool,
}

fn allowed_sites(j_min: u32, j_max: u32, parity: Parity) -> Vec<u32> {
    (j_min..=j_max).filter(|&j| parity.allows(j)).collect()
}

/// Fit window for a normalized distribution: from the smallest allowed
/// J >= 4 up to the last level holding more than 1% of the population,
/// capped at `j_lim`.
pub fn fit_window(p_of_j: &[f64], parity: Parity, j_lim: u32) -> Result<(u32, u32)> {
    let j_min = parity.first_allowed_at_or_above(4);
    let top = p_of_j
        .iter()
        .enumerate()
        .rev()
        .find(|(j, &p)| parity.allows(*j as u32) && p > WINDOW_POPULATION_CUT)
        .map(|(j, _)| j as u32);
    let j_max = match top {
        Some(j) => j.min(j_lim),
        None => {
            return Err(Error::FitRange(format!(
                "no level above {WINDOW_POPULATION_CUT:.0e} of the population"
            )))
        }
    };
    let sites = allowed_sites(j_min, j_max, parity);
    if sites.len() < 3 {
        return Err(Error::FitRange(format!(
            "window ({j_min}, {j_max}) holds {} lattice sites, need at least 3",
            sites.len()
        )));
    }
    Ok((j_min, j_max))
}

/// Log-populations over the window's lattice sites, with flooring.
fn window_data(
    p_of_j: &[f64],
    window: (u32, u32),
    parity: Parity,
) -> Result<(Vec<f64>, Vec<f64>, bool)> {
    let sites = allowed_sites(window.0, window.1, parity);
    if sites.len() < 3 {
        return Err(Error::FitRange(format!(
            "window {window:?} holds {} sites, need at least 3",
            sites.len()
        )));
    }
    let mut floored = false;
    let mut xs = Vec::with_capacity(sites.len());
    let mut ys = Vec::with_capacity(sites.len());
    for &j in &sites {
        let p = p_of_j.get(j as usize).copied().unwrap_or(0.0);
        let p = if p < LOG_FLOOR {
            floored = true;
            LOG_FLOOR
        } else {
            p
        };
        xs.push(j as f64);
        ys.push(p.ln());
    }
    Ok((xs, ys, floored))
}

/// For fixed J_c solve the 2-parameter problem `y ≈ a - b·f(J)` and return
/// (rss, a, b); infeasible (b <= 0) profiles return None.
fn profile_at(xs: &[f64], ys: &[f64], jc: f64, model: FitModel) -> Option<(f64, f64, f64)> {
    let n = xs.len() as f64;
    let f: Vec<f64> = xs
        .iter()
        .map(|&x| match model {
            FitModel::Exponential => (x - jc).abs(),
            FitModel::Gaussian => (x - jc) * (x - jc),
        })
        .collect();
    let sf: f64 = f.iter().sum();
    let sff: f64 = f.iter().map(|v| v * v).sum();
    let sy: f64 = ys.iter().sum();
    let sfy: f64 = f.iter().zip(ys).map(|(v, y)| v * y).sum();
    let det = n * sff - sf * sf;
    if det.abs() < 1e-30 {
        return None;
    }
    let b = (sf * sy - n * sfy) / det;
    if b <= 0.0 {
        return None;
    }
    let a = (sy + b * sf) / n;
    let rss: f64 = f
        .iter()
        .zip(ys)
        .map(|(v, y)| {
            let r = y - (a - b * v);
            r * r
        })
        .sum();
    Some((rss, a, b))
}

fn golden_refine(xs: &[f64], ys: &[f64], model: FitModel, mut lo: f64, mut hi: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let rss = |jc: f64| profile_at(xs, ys, jc, model).map_or(f64::INFINITY, |(r, _, _)| r);
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = rss(c);
    let mut fd = rss(d);
    for _ in 0..120 {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = rss(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = rss(d);
        }
    }
    // ties resolve toward the lower center
    if fc <= fd {
        c
    } else {
        d
    }
}

fn fit_model(
    p_of_j: &[f64],
    window: (u32, u32),
    parity: Parity,
    model: FitModel,
) -> Result<FitResult> {
    let (xs, ys, floored) = window_data(p_of_j, window, parity)?;
    let jc_max = window.1 as f64;

    let mut best: Option<(f64, f64)> = None; // (rss, jc)
    let mut jc = 0.0;
    while jc <= jc_max + 1e-12 {
        if let Some((rss, _, _)) = profile_at(&xs, &ys, jc, model) {
            // strict improvement keeps the lowest J_c on ties
            if best.map_or(true, |(r, _)| rss < r) {
                best = Some((rss, jc));
            }
        }
        jc += SCAN_STEP;
    }
    let (_, jc_coarse) =
        best.ok_or_else(|| Error::Fit("no feasible center: fitted width diverges".into()))?;

    let lo = (jc_coarse - SCAN_STEP).max(0.0);
    let hi = (jc_coarse + SCAN_STEP).min(jc_max);
    let jc_fine = golden_refine(&xs, &ys, model, lo, hi);
    let (rss_fine, a_fine, b_fine) = match profile_at(&xs, &ys, jc_fine, model) {
        Some(v) => v,
        None => profile_at(&xs, &ys, jc_coarse, model)
            .ok_or_else(|| Error::Fit("profile became infeasible during refinement".into()))?,
    };
    // keep the refined center only on strict improvement, so exact ties
    // stay at the lower (coarse) candidate
    let (rss, a, b, jc_star) = {
        let coarse = profile_at(&xs, &ys, jc_coarse, model).unwrap();
        if rss_fine < coarse.0 {
            (rss_fine, a_fine, b_fine, jc_fine)
        } else {
            (coarse.0, coarse.1, coarse.2, jc_coarse)
        }
    };

    let width = match model {
        FitModel::Exponential => 1.0 / b,
        FitModel::Gaussian => (1.0 / b).sqrt(),
    };
    let n = xs.len();
    let rms = (rss / n as f64).sqrt();

    Ok(FitResult {
        model,
        amplitude: a.exp(),
        j_c: jc_star,
        width,
        rms_log_residual: rms,
        window,
        uncertainties: standard_errors(&xs, model, jc_star, width, rss),
        floored,
    })
}

/// Linearized per-parameter standard errors from the 3-parameter Jacobian.
fn standard_errors(xs: &[f64], model: FitModel, jc: f64, width: f64, rss: f64) -> Option<[f64; 3]> {
    let n = xs.len();
    if n <= 3 {
        return None;
    }
    // one-sided centers leave amplitude and J_c exactly degenerate for the
    // exponential model (the kink lies outside the data)
    if model == FitModel::Exponential && (jc <= xs[0] || jc >= xs[n - 1]) {
        return None;
    }
    let mut jtj = nalgebra::Matrix3::<f64>::zeros();
    for &x in xs {
        let d = x - jc;
        let row = match model {
            FitModel::Exponential => [1.0, d.signum() / width, d.abs() / (width * width)],
            FitModel::Gaussian => [
                1.0,
                2.0 * d / (width * width),
                2.0 * d * d / (width * width * width),
            ],
        };
        for i in 0..3 {
            for j in 0..3 {
                jtj[(i, j)] += row[i] * row[j];
            }
        }
    }
    let sigma2 = rss / (n - 3) as f64;
    let cov = jtj.try_inverse()? * sigma2;
    let se = [cov[(0, 0)], cov[(1, 1)], cov[(2, 2)]];
    if se.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return None;
    }
    Some([se[0].sqrt(), se[1].sqrt(), se[2].sqrt()])
}

/// Least-squares exponential fit `P_J ∝ exp(-|J - J_c|/J_loc)` in log space.
pub fn fit_exponential(p_of_j: &[f64], window: (u32, u32), parity: Parity) -> Result<FitResult> {
    fit_model(p_of_j, window, parity, FitModel::Exponential)
}

/// Least-squares Gaussian fit `A·exp(-((J - J_c)/J_diff)²)` in log space.
pub fn fit_gaussian(p_of_j: &[f64], window: (u32, u32), parity: Parity) -> Result<FitResult> {
    fit_model(p_of_j, window, parity, FitModel::Gaussian)
}

/// Decide between the two line shapes by their residual ratio.
pub fn classify_shape(
    p_of_j: &[f64],
    window: (u32, u32),
    parity: Parity,
) -> Result<(ShapeLabel, f64)> {
    let e = fit_exponential(p_of_j, window, parity)?;
    let g = fit_gaussian(p_of_j, window, parity)?;
    let (small, large, winner) = if e.rms_log_residual <= g.rms_log_residual {
        (
            e.rms_log_residual,
            g.rms_log_residual,
            ShapeLabel::Exponential,
        )
    } else {
        (g.rms_log_residual, e.rms_log_residual, ShapeLabel::Gaussian)
    };
    if large < 1e-13 {
        return Ok((ShapeLabel::Ambiguous, 1.0));
    }
    let score = large / small.max(1e-300);
    if score > CLASSIFY_RATIO {
        Ok((winner, score))
    } else {
        Ok((ShapeLabel::Ambiguous, score))
    }
}

/// Order fitted widths by kick strength and report monotonicity.
pub fn width_vs_strength(results: &[(f64, FitResult)]) -> Result<WidthTrend> {
    if results.len() < 2 {
        return Err(Error::Config(format!(
            "need at least 2 entries, got {}",
            results.len()
        )));
    }
    let mut entries: Vec<(f64, f64)> = results.iter().map(|(p, f)| (*p, f.width)).collect();
    entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let strictly_increasing = entries.windows(2).all(|w| w[1].1 > w[0].1);
    Ok(WidthTrend {
        entries,
        strictly_increasing,
    })
}
