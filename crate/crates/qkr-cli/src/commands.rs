//! Subcommand implementations.

use crate::config::ExperimentConfig;
use crate::output;
use crate::pipeline::{self, RunOutput};
use crate::presets;
use anyhow::{anyhow, bail, Context};
use qkr::analysis::{classify_shape, fit_exponential, fit_gaussian, fit_window};
use qkr::lattice::resonance_map;
use qkr::rotor::Parity;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Output-directory precedence: flag, then config, then QKR_OUT_DIR, then
/// ./qkr-out.
pub fn resolve_out_dir(flag: Option<&Path>, config_dir: Option<&str>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(d) = config_dir {
        return PathBuf::from(d);
    }
    if let Ok(env) = std::env::var("QKR_OUT_DIR") {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    PathBuf::from("qkr-out")
}

pub struct ResonanceMapArgs {
    pub j_max: u32,
    pub t_lo: f64,
    pub t_hi: f64,
    pub parity: Parity,
    pub revival_time_ps: f64,
    pub overlays: Vec<(f64, f64)>,
    pub out: PathBuf,
}

pub fn cmd_resonance_map(args: &ResonanceMapArgs) -> anyhow::Result<()> {
    let markers = resonance_map(args.parity, args.j_max, args.t_lo, args.t_hi)?;
    output::write_text(
        &args.out,
        &output::resonance_map_csv(&markers, args.revival_time_ps),
    )?;
    println!("wrote {} markers to {}", markers.len(), args.out.display());
    if !args.overlays.is_empty() {
        let path = companion_path(&args.out, "_intervals");
        output::write_text(
            &path,
            &output::intervals_csv(&args.overlays, args.revival_time_ps),
        )?;
        println!(
            "wrote {} overlay intervals to {}",
            args.overlays.len(),
            path.display()
        );
    }
    Ok(())
}

fn companion_path(base: &Path, suffix: &str) -> PathBuf {
    let stem = base.file_stem().unwrap_or_default().to_string_lossy();
    let ext = base.extension().map(|e| e.to_string_lossy().into_owned());
    let name = match ext {
        Some(e) => format!("{stem}{suffix}.{e}"),
        None => format!("{stem}{suffix}"),
    };
    base.with_file_name(name)
}

fn summary_line(out: &RunOutput) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "E(0)={:.2} E(N)={:.2} hcB",
        out.energy_hcb[0],
        out.energy_hcb.last().unwrap()
    );
    if let Some(c) = &out.fits.classification {
        let _ = write!(s, ", shape={:?} (score {:.2})", c.label, c.score);
    }
    if let Some(e) = &out.fits.exponential {
        let _ = write!(s, ", J_loc={:.2} J_c={:.2}", e.width, e.j_c);
    }
    if let Some(g) = &out.fits.gaussian {
        let _ = write!(s, ", J_diff={:.2} J_c={:.2}", g.width, g.j_c);
    }
    s
}

pub fn cmd_simulate(config: &ExperimentConfig, out_dir: &Path) -> anyhow::Result<()> {
    let hash = output::config_hash(config);
    let spec = config.spec.to_rotor_spec();

    if let Some(name) = config.protocol.preset.as_deref() {
        if presets::is_composite(name) {
            return simulate_composite(config, out_dir, &hash);
        }
    }

    let protocol = pipeline::resolve_protocol(config)?;
    let out = pipeline::run_protocol(config, &protocol)?;
    output::write_run(out_dir, &out, &spec, &hash, &config.output.formats)?;
    println!("{}: {}", out_dir.display(), summary_line(&out));
    Ok(())
}

/// The composite `fig5` preset: run all four scenario families at P = 4, 6
/// and 8, write per-run outputs into subdirectories and collect one energy
/// table.
fn simulate_composite(config: &ExperimentConfig, out_dir: &Path, hash: &str) -> anyhow::Result<()> {
    let spec = config.spec.to_rotor_spec();
    let mut grid = String::from("scenario,p,kick,e_hcb,e_invcm\n");
    let mut fits = String::from("protocol,P,model,J_c,width,residual\n");
    for (scenario, family) in presets::FIG5_SCENARIOS {
        for suffix in ['a', 'b', 'c'] {
            let p = presets::strength_of_suffix(suffix).unwrap();
            let name = format!("{family}{suffix}");
            let mut sub = config.clone();
            sub.protocol.preset = Some(name.clone());
            let protocol = pipeline::resolve_protocol(&sub)?;
            let out = pipeline::run_protocol(&sub, &protocol)?;
            let dir = out_dir.join(format!("{scenario}-p{p}"));
            output::write_run(&dir, &out, &spec, hash, &config.output.formats)?;
            println!("{name} -> {}: {}", dir.display(), summary_line(&out));
            for (n, (eh, ei)) in out.energy_hcb.iter().zip(&out.energy_invcm).enumerate() {
                let _ = writeln!(grid, "{scenario},{p},{n},{eh},{ei}");
            }
            for (model, fit) in [
                ("exponential", &out.fits.exponential),
                ("gaussian", &out.fits.gaussian),
            ] {
                if let Some(f) = fit {
                    let _ = writeln!(
                        fits,
                        "{scenario},{p},{model},{},{},{}",
                        f.j_c, f.width, f.rms_log_residual
                    );
                }
            }
        }
    }
    let path = out_dir.join("energy_grid.csv");
    output::write_text(&path, &format!("# config_sha256={hash}\n{grid}"))?;
    let fits_path = out_dir.join("fits.csv");
    output::write_text(&fits_path, &format!("# config_sha256={hash}\n{fits}"))?;
    println!("wrote {} and {}", path.display(), fits_path.display());
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Strength,
    MeanPeriod,
}

pub fn cmd_sweep(
    config: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
    out_dir: &Path,
) -> anyhow::Result<()> {
    if values.is_empty() {
        bail!("sweep needs at least one grid value");
    }
    let hash = output::config_hash(config);
    let base = pipeline::resolve_protocol(config)?;
    let mut table = String::new();
    let _ = writeln!(table, "# config_sha256={hash}");
    let _ = writeln!(
        table,
        "axis,value,label,score,exp_j_c,exp_width,exp_rms,gauss_j_c,gauss_width,gauss_rms,e_final_hcb"
    );
    let mut strength_fits: Vec<(f64, qkr::analysis::FitResult)> = Vec::new();

    for &v in values {
        let mut protocol = base.clone();
        match axis {
            SweepAxis::Strength => protocol.strength = Some(v),
            SweepAxis::MeanPeriod => match protocol.t_interval_over_trev {
                Some([lo, hi]) => {
                    let half = (hi - lo) / 2.0;
                    protocol.t_interval_over_trev = Some([v - half, v + half]);
                }
                None => protocol.mean_t_over_trev = Some(v),
            },
        }
        let out = pipeline::run_protocol(config, &protocol)?;
        let axis_name = match axis {
            SweepAxis::Strength => "p",
            SweepAxis::MeanPeriod => "mean_t",
        };
        let (label, score) = out
            .fits
            .classification
            .map(|c| (format!("{:?}", c.label).to_lowercase(), c.score))
            .unwrap_or_else(|| ("none".into(), f64::NAN));
        let fmt_fit = |f: &Option<qkr::analysis::FitResult>| match f {
            Some(f) => format!("{},{},{}", f.j_c, f.width, f.rms_log_residual),
            None => ",,".into(),
        };
        let _ = writeln!(
            table,
            "{axis_name},{v},{label},{score},{},{},{}",
            fmt_fit(&out.fits.exponential),
            fmt_fit(&out.fits.gaussian),
            out.energy_hcb.last().unwrap()
        );
        println!("{axis_name}={v}: {}", summary_line(&out));
        if axis == SweepAxis::Strength {
            if let Some(f) = &out.fits.exponential {
                strength_fits.push((v, f.clone()));
            }
        }
    }
    if strength_fits.len() >= 2 {
        let trend = qkr::analysis::width_vs_strength(&strength_fits)?;
        let _ = writeln!(
            table,
            "# width_strictly_increasing={}",
            trend.strictly_increasing
        );
        println!(
            "localization width strictly increasing with P: {}",
            trend.strictly_increasing
        );
    }
    let path = out_dir.join("sweep.csv");
    output::write_text(&path, &table)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub struct FitArgs {
    pub csv: PathBuf,
    pub kick: Option<usize>,
    pub parity: Parity,
    pub j_lim: u32,
    pub out: Option<PathBuf>,
}

/// Re-fit a previously written populations CSV.
pub fn cmd_fit(args: &FitArgs) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&args.csv)
        .with_context(|| format!("cannot read {}", args.csv.display()))?;
    let rows = parse_populations_csv(&text)?;
    let row = match args.kick {
        Some(k) => rows
            .iter()
            .find(|(n, _)| *n == k)
            .map(|(_, r)| r)
            .ok_or_else(|| anyhow!("kick {k} not present"))?,
        None => &rows.last().ok_or_else(|| anyhow!("no data rows"))?.1,
    };

    let window = fit_window(row, args.parity, args.j_lim)?;
    let exponential = fit_exponential(row, window, args.parity)?;
    let gaussian = fit_gaussian(row, window, args.parity)?;
    let (label, score) = classify_shape(row, window, args.parity)?;
    let value = serde_json::json!({
        "source": args.csv.display().to_string(),
        "kick": args.kick,
        "window": window,
        "exponential": exponential,
        "gaussian": gaussian,
        "classification": {"label": label, "score": score},
    });
    let text = serde_json::to_string_pretty(&value)?;
    match &args.out {
        Some(path) => {
            output::write_text(path, &text)?;
            println!("wrote {}", path.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}

/// Rows of (kick index, populations by J) from a populations CSV.
fn parse_populations_csv(text: &str) -> anyhow::Result<Vec<(usize, Vec<f64>)>> {
    let mut rows = Vec::new();
    for line in text.lines() {
        if line.starts_with('#') || line.trim().is_empty() || line.starts_with("kick") {
            continue;
        }
        let mut cells = line.split(',');
        let kick: usize = cells
            .next()
            .ok_or_else(|| anyhow!("empty row"))?
            .trim()
            .parse()
            .context("bad kick index")?;
        let pops = cells
            .map(|c| c.trim().parse::<f64>().context("bad population cell"))
            .collect::<anyhow::Result<Vec<f64>>>()?;
        rows.push((kick, pops));
    }
    Ok(rows)
}
