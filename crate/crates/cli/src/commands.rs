use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use tomolith::image::{load_image, save_png_normalized, write_pgm, Image2D, ImageKind};
use tomolith::lightfield::{design_from_radii, solve_outer_radius};
use tomolith::optimize::{
    exposure_sweep, optimize, InitMode, OptimizeResult, ThresholdModel,
};
use tomolith::positivity::{clamp_negatives, dose_contrast, offset_positive};
use tomolith::resin::{doc_constant_intensity, dose_matrix, ResinParams};
use tomolith::transform::{apply_filter, backproject, fbp_reconstruct, radon};
use tomolith::volume::{assemble_frames, optimize_volume, VolumeTarget};
use tomolith::{binarize, AngleGrid, Sinogram};

use crate::cli_error::{CliError, CliResult};
use crate::config::{FilterConfig, RunConfig};

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Every artifact directory carries the resolved settings that produced it.
fn write_resolved(dir: &Path, value: serde_json::Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(&value)
        .map_err(|e| CliError::Runtime(format!("config serialization: {e}")))?;
    fs::write(dir.join("config.json"), text + "\n")?;
    Ok(())
}

fn load_target(path: &Path, cut: f64) -> CliResult<Image2D> {
    let img = load_image(path)?;
    Ok(binarize(&img, cut))
}

pub struct ReconstructArgs {
    pub target: Option<PathBuf>,
    pub sinogram: Option<PathBuf>,
    pub angles: Option<usize>,
    pub start: f64,
    pub range: f64,
    pub filter: FilterConfig,
    pub heuristic: Option<String>,
    pub binarize_cut: f64,
    pub out: PathBuf,
}

/// radon / filter / positivity / FBP pipeline with file artifacts.
pub fn cmd_reconstruct(args: &ReconstructArgs) -> CliResult<()> {
    ensure_dir(&args.out)?;

    let target = match &args.target {
        Some(path) => Some(load_image(path)?),
        None => None,
    };

    let sino = match (&args.sinogram, &target) {
        (Some(path), _) => {
            let s = Sinogram::read_cals(path)?;
            if let Some(t) = &target {
                if t.side()? != s.n_x() {
                    return Err(CliError::Dimension(format!(
                        "target is {} px wide but sinogram has {} detector samples",
                        t.side()?,
                        s.n_x()
                    )));
                }
            }
            s
        }
        (None, Some(t)) => {
            let count = args.angles.ok_or_else(|| {
                CliError::Usage("--angles is required when projecting a target".into())
            })?;
            let grid = AngleGrid::new(args.start, args.range, count)?;
            radon(t, &grid)?
        }
        (None, None) => {
            return Err(CliError::Usage(
                "provide --target, --sinogram, or both".into(),
            ))
        }
    };

    sino.write_cals(&args.out.join("sinogram.cals"))?;
    sino.write_csv(&args.out.join("sinogram.csv"))?;

    let spec = args.filter.to_spec(sino.n_x(), sino.grid())?;
    let filtered = apply_filter(&sino, &spec);

    let mut metrics = String::from("metric,value\n");

    match args.heuristic.as_deref() {
        Some("none") | None => {
            let recon = fbp_reconstruct(&sino, &spec)?;
            save_png_normalized(&recon, &args.out.join("reconstruction.png"))?;
            if let Some(t) = &target {
                let num: f64 = recon
                    .as_slice()
                    .iter()
                    .zip(t.as_slice())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                let den: f64 = t.as_slice().iter().map(|b| b * b).sum();
                let err = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
                println!("reconstruction relative L2 error: {err:.6}");
                metrics.push_str(&format!("recon_rel_l2_error,{err:.6}\n"));
            }
        }
        Some(name @ ("clamp" | "offset")) => {
            let positive = if name == "clamp" {
                clamp_negatives(&filtered)
            } else {
                offset_positive(&filtered)
            };
            positive.write_cals(&args.out.join("positive.cals"))?;
            // unfiltered backprojection of the positive set; contrast and the
            // normalized PNG are invariant to the angular weight
            let dose = backproject(&positive, positive.n_x())?;
            save_png_normalized(&dose, &args.out.join("dose.png"))?;
            if let Some(t) = &target {
                let mask = binarize(t, args.binarize_cut);
                let contrast = dose_contrast(&dose, &mask)?;
                println!("dose contrast ({name}): {contrast:.6}");
                metrics.push_str(&format!("dose_contrast_{name},{contrast:.6}\n"));
            }
        }
        Some(other) => {
            return Err(CliError::Usage(format!(
                "unknown heuristic {other:?}; expected clamp, offset, or none"
            )))
        }
    }

    fs::write(args.out.join("metrics.csv"), metrics)?;
    write_resolved(
        &args.out,
        serde_json::json!({
            "command": "reconstruct",
            "target": args.target,
            "sinogram": args.sinogram,
            "angles": sino.grid().count(),
            "start_deg": sino.grid().start_deg(),
            "range_deg": sino.grid().range_deg(),
            "filter": { "kind": args.filter.kind, "k0": spec.k0() },
            "heuristic": args.heuristic,
            "binarize_cut": args.binarize_cut,
        }),
    )?;
    Ok(())
}

/// Full optimization run: projections, dose map, error history, config.
pub fn cmd_optimize(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    ensure_dir(out)?;
    let target_path = cfg
        .target
        .as_ref()
        .ok_or_else(|| CliError::Usage("optimize needs a --target image".into()))?;
    let target = load_target(target_path, cfg.binarize_cut)?;
    let n = target.side()?;
    let ocfg = cfg.to_optimize_config(n)?;
    let result = optimize(&target, &ocfg)?;

    write_optimize_result(&result, out)?;
    cfg.write(out)?;
    println!(
        "best error {:.6} at iteration {} ({} iterations run)",
        result.best_error(),
        result.best_iter,
        result.error_history.len()
    );
    Ok(())
}

fn write_optimize_result(result: &OptimizeResult, out: &Path) -> CliResult<()> {
    result.projections.write_cals(&out.join("projections.cals"))?;
    save_png_normalized(&result.dose, &out.join("dose.png"))?;
    let mut csv = String::from("iter,error\n");
    for (i, e) in result.error_history.iter().enumerate() {
        csv.push_str(&format!("{i},{e}\n"));
    }
    fs::write(out.join("error_history.csv"), csv)?;
    Ok(())
}

pub struct FramesArgs {
    pub volume: PathBuf,
    pub speed: f64,
    pub out: PathBuf,
}

/// Optimizes each z-slice of a volume and assembles projector frames.
pub fn cmd_frames(cfg: &RunConfig, args: &FramesArgs) -> CliResult<()> {
    ensure_dir(&args.out)?;
    let mut paths: Vec<PathBuf> = fs::read_dir(&args.volume)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("png") | Some("pgm")
            )
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Usage(format!(
            "no .png or .pgm slices found in {}",
            args.volume.display()
        )));
    }
    let slices: Vec<Image2D> = paths
        .iter()
        .map(|p| load_target(p, cfg.binarize_cut))
        .collect::<CliResult<_>>()?;
    let volume = VolumeTarget::new(slices, 1.0)?;
    let n = volume.side();
    let ocfg = cfg.to_optimize_config(n)?;

    let results = optimize_volume(&volume, &ocfg)?;
    let frames = assemble_frames(&results, &ocfg.grid, args.speed)?;
    frames.write_dir(&args.out)?;

    let mut csv = String::from("slice,final_error,best_iter\n");
    for (i, r) in results.iter().enumerate() {
        csv.push_str(&format!("{i},{},{}\n", r.best_error(), r.best_iter));
    }
    fs::write(args.out.join("slice_errors.csv"), csv)?;
    cfg.write(&args.out)?;
    let m = frames.manifest();
    println!(
        "{} frames, {:.4} Hz at {} deg/s ({} frames per revolution)",
        frames.frames().len(),
        m.frame_rate_hz,
        m.rotation_speed_deg_per_s,
        m.frames_per_revolution
    );
    Ok(())
}

pub struct ResinCalArgs {
    pub intensities: Vec<f64>,
    pub times: Vec<f64>,
    pub params: Option<PathBuf>,
    pub out: PathBuf,
}

/// Simulated time-intensity exposure matrix: cured map plus DOC table.
pub fn cmd_resin_cal(args: &ResinCalArgs) -> CliResult<()> {
    ensure_dir(&args.out)?;
    let params = match &args.params {
        Some(path) => ResinParams::load_json(path)?,
        None => ResinParams::default(),
    };
    params.validate()?;
    let grid = dose_matrix(&args.intensities, &args.times, &params)?;

    // rows = intensities, columns = times; cured cells are white
    let bytes: Vec<u8> = grid
        .iter()
        .flat_map(|row| row.iter().map(|&c| if c { 255u8 } else { 0 }))
        .collect();
    write_pgm(
        &args.out.join("dose_matrix.pgm"),
        args.times.len(),
        args.intensities.len(),
        &bytes,
    )?;

    let mut csv = String::from("intensity_w_cm2,time_s,doc,cured\n");
    for (&i, row) in args.intensities.iter().zip(&grid) {
        for (&t, &cured) in args.times.iter().zip(row) {
            let doc = doc_constant_intensity(i, t, &params);
            csv.push_str(&format!("{i},{t},{doc},{}\n", cured as u8));
        }
    }
    fs::write(args.out.join("doc.csv"), csv)?;

    let text = serde_json::to_string_pretty(&params)
        .map_err(|e| CliError::Runtime(format!("params serialization: {e}")))?;
    fs::write(args.out.join("resin_params.json"), text + "\n")?;
    write_resolved(
        &args.out,
        serde_json::json!({
            "command": "resin-cal",
            "intensities_w_cm2": args.intensities,
            "times_s": args.times,
            "params": params,
        }),
    )?;
    println!(
        "{} x {} dose matrix written (gel point {})",
        args.intensities.len(),
        args.times.len(),
        params.gel_point_doc
    );
    Ok(())
}

pub struct LightfieldArgs {
    pub target_radius: f64,
    pub outer_radius: Option<f64>,
    pub n_spatial: usize,
    pub lambda: Option<f64>,
    pub solve: Option<String>,
    pub sweep_n: Option<String>,
    pub out: Option<PathBuf>,
}

/// Geometry sizing report for the microlens lightfield projector.
pub fn cmd_lightfield(args: &LightfieldArgs) -> CliResult<()> {
    let report = match args.solve.as_deref() {
        Some("R") => {
            let lambda = args.lambda.ok_or_else(|| {
                CliError::Usage("--solve R needs --lambda (subpixel size in meters)".into())
            })?;
            let outer = solve_outer_radius(args.target_radius, args.n_spatial, lambda)?;
            let design = design_from_radii(args.target_radius, outer, args.n_spatial)?;
            serde_json::json!({
                "solved_outer_radius_m": outer,
                "design": design,
            })
        }
        Some(other) => {
            return Err(CliError::Usage(format!(
                "unknown solve target {other:?}; only R is supported"
            )))
        }
        None => {
            let outer = args.outer_radius.ok_or_else(|| {
                CliError::Usage("provide --R (outer radius) or --solve R with --lambda".into())
            })?;
            let design = design_from_radii(args.target_radius, outer, args.n_spatial)?;
            serde_json::to_value(&design)
                .map_err(|e| CliError::Runtime(format!("report serialization: {e}")))?
        }
    };
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Runtime(format!("report serialization: {e}")))?;
    println!("{text}");

    if let Some(spec) = &args.sweep_n {
        let out = args
            .out
            .as_ref()
            .ok_or_else(|| CliError::Usage("--sweep-n needs --out for the CSV".into()))?;
        let parts: Vec<usize> = spec
            .split(':')
            .map(|s| s.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::Usage(format!("bad sweep {spec:?}; expected start:end:step")))?;
        let [start, end, step] = parts.as_slice() else {
            return Err(CliError::Usage(format!(
                "bad sweep {spec:?}; expected start:end:step"
            )));
        };
        if *step == 0 || start > end {
            return Err(CliError::Usage("sweep needs start <= end and step > 0".into()));
        }
        let outer = args
            .outer_radius
            .ok_or_else(|| CliError::Usage("--sweep-n needs a fixed --R".into()))?;
        if let Some(parent) = out.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        let mut f = fs::File::create(out)?;
        writeln!(
            f,
            "n_spatial,n_angular,angular_spacing_deg,subpixels_per_lens,lens_pitch_m,subpixel_size_m"
        )?;
        let mut n = *start;
        while n <= *end {
            if let Ok(d) = design_from_radii(args.target_radius, outer, n) {
                writeln!(
                    f,
                    "{n},{},{},{},{},{}",
                    d.n_angular,
                    d.angular_spacing_deg,
                    d.subpixels_per_lens,
                    d.lens_pitch_m,
                    d.subpixel_size_m
                )?;
            }
            n += step;
        }
    }
    Ok(())
}

pub struct SweepArgs {
    pub projections: PathBuf,
    pub scales: Vec<f64>,
    pub model: ThresholdModel,
    pub i_max: f64,
    pub out: PathBuf,
}

/// Develops scaled doses of an optimized projection set.
pub fn cmd_sweep(args: &SweepArgs) -> CliResult<()> {
    ensure_dir(&args.out)?;
    let proj = Sinogram::read_cals(&args.projections)?;
    let cal = tomolith::CalibrationCurve::linear(args.i_max)?;
    let masks = exposure_sweep(&proj, &args.scales, &args.model, &cal)?;
    let mut csv = String::from("scale,cured_pixels\n");
    for (s, mask) in args.scales.iter().zip(&masks) {
        let cured = mask.as_slice().iter().filter(|&&v| v == 1.0).count();
        csv.push_str(&format!("{s},{cured}\n"));
        save_png_normalized(mask, &args.out.join(format!("cured_x{s}.png")))?;
    }
    fs::write(args.out.join("sweep.csv"), csv)?;
    write_resolved(
        &args.out,
        serde_json::json!({
            "command": "sweep",
            "projections": args.projections,
            "scales": args.scales,
            "model": args.model,
            "i_max_w_cm2": args.i_max,
        }),
    )?;
    Ok(())
}

pub struct GenArgs {
    pub shape: String,
    pub size: usize,
    pub out: PathBuf,
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub outer: Option<f64>,
    pub inner: Option<f64>,
    pub spokes: usize,
}

/// Synthetic benchmark targets.
pub fn cmd_gen(args: &GenArgs) -> CliResult<()> {
    let img = generate_target(args)?;
    let bytes: Vec<u8> = img
        .as_slice()
        .iter()
        .map(|&v| if v > 0.5 { 255u8 } else { 0 })
        .collect();
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    match args.out.extension().and_then(|e| e.to_str()) {
        Some("pgm") => write_pgm(&args.out, args.size, args.size, &bytes)?,
        _ => save_png_normalized(&img, &args.out)?,
    }
    Ok(())
}

pub fn generate_target(args: &GenArgs) -> CliResult<Image2D> {
    let n = args.size;
    if n == 0 {
        return Err(CliError::Usage("--size must be positive".into()));
    }
    let c = (n as f64 - 1.0) / 2.0;
    let img = match args.shape.as_str() {
        "rect" => {
            let w = args.width.unwrap_or(n / 3);
            let h = args.height.unwrap_or(n / 2);
            if w == 0 || h == 0 || w > n || h > n {
                return Err(CliError::Usage("rect dimensions must fit the image".into()));
            }
            let x0 = (n - w) / 2;
            let y0 = (n - h) / 2;
            Image2D::from_fn(n, ImageKind::TargetMask, |x, y| {
                (x >= x0 && x < x0 + w && y >= y0 && y < y0 + h) as u8 as f64
            })
        }
        "disk" => {
            let r = args.outer.unwrap_or(n as f64 * 0.3);
            Image2D::from_fn(n, ImageKind::TargetMask, |x, y| {
                let dx = x as f64 - c;
                let dy = y as f64 - c;
                ((dx * dx + dy * dy).sqrt() <= r) as u8 as f64
            })
        }
        "annulus" => {
            let outer = args.outer.unwrap_or(n as f64 * 0.3);
            let inner = args.inner.unwrap_or(outer / 2.0);
            if inner >= outer {
                return Err(CliError::Usage("annulus needs inner < outer".into()));
            }
            Image2D::from_fn(n, ImageKind::TargetMask, |x, y| {
                let dx = x as f64 - c;
                let dy = y as f64 - c;
                let r = (dx * dx + dy * dy).sqrt();
                (r <= outer && r >= inner) as u8 as f64
            })
        }
        "star" => {
            let r_max = args.outer.unwrap_or(n as f64 * 0.45);
            let spokes = args.spokes.max(2);
            Image2D::from_fn(n, ImageKind::TargetMask, |x, y| {
                let dx = x as f64 - c;
                let dy = y as f64 - c;
                let r = (dx * dx + dy * dy).sqrt();
                if r > r_max || r < 1.0 {
                    return 0.0;
                }
                let phi = dy.atan2(dx);
                ((phi * spokes as f64 / 2.0).sin() > 0.0) as u8 as f64
            })
        }
        "full" => Image2D::from_fn(n, ImageKind::TargetMask, |_, _| 1.0),
        other => {
            return Err(CliError::Usage(format!(
                "unknown shape {other:?}; expected rect, disk, annulus, star, or full"
            )))
        }
    };
    img.map_err(Into::into)
}

/// Named preset sweeps on the rectangle benchmark: angular sampling (fig5),
/// double-threshold width (fig6), sigmoid sharpness (fig7).
pub fn cmd_repro(which: &str, base: &RunConfig, out: &Path) -> CliResult<()> {
    ensure_dir(out)?;
    let target = generate_target(&GenArgs {
        shape: "rect".into(),
        size: 128,
        out: PathBuf::new(),
        width: Some(42),
        height: Some(64),
        outer: None,
        inner: None,
        spokes: 16,
    })?;

    let runs: Vec<(String, RunConfig)> = match which {
        "fig5" => [16usize, 64, 202]
            .iter()
            .map(|&count| {
                let mut cfg = base.clone();
                cfg.angles = count;
                (format!("angles_{count}"), cfg)
            })
            .collect(),
        "fig6" => {
            let mut runs = Vec::new();
            for (name, lo, hi) in [
                ("sharp_0.50_0.50", 0.5, 0.5),
                ("smooth_0.45_0.55", 0.45, 0.55),
                ("smooth_0.40_0.60", 0.4, 0.6),
            ] {
                for (init_name, init) in [
                    ("ct", InitMode::CtBased),
                    ("random", InitMode::Random { seed: 7 }),
                ] {
                    let mut cfg = base.clone();
                    cfg.model = ThresholdModel::double(lo, hi).map_err(CliError::from)?;
                    cfg.init = init;
                    runs.push((format!("double_{name}_{init_name}"), cfg));
                }
            }
            runs
        }
        "fig7" => [("sharp", 0.01), ("soft", 0.1)]
            .iter()
            .map(|&(name, sigma)| {
                let mut cfg = base.clone();
                cfg.model = ThresholdModel::sigmoid(0.5, sigma).expect("valid sigmoid");
                (format!("sigmoid_{name}"), cfg)
            })
            .collect(),
        other => {
            return Err(CliError::Usage(format!(
                "unknown preset {other:?}; expected fig5, fig6, or fig7"
            )))
        }
    };

    let mut summary = String::from("run,final_error,best_iter,dose_contrast\n");
    for (name, cfg) in runs {
        let dir = out.join(&name);
        ensure_dir(&dir)?;
        let ocfg = cfg.to_optimize_config(target.side()?)?;
        let result = optimize(&target, &ocfg)?;
        write_optimize_result(&result, &dir)?;
        cfg.write(&dir)?;
        let contrast = dose_contrast(&result.dose, &target)?;
        summary.push_str(&format!(
            "{name},{},{},{contrast}\n",
            result.best_error(),
            result.best_iter
        ));
        println!(
            "{name}: final error {:.6} (iteration {})",
            result.best_error(),
            result.best_iter
        );
    }
    fs::write(out.join("summary.csv"), summary)?;
    Ok(())
}
