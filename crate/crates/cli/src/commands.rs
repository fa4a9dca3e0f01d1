use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hrnet_core::metrics::{self, ensemble_average, evaluate, EnsembleSet, ImageMetrics, MetricReport, DEFAULT_EPS};
use hrnet_core::model::{checkpoint, model_report, reconstruct, ArchConfig, ModelParams, WidthScale};
use hrnet_core::spectral::dataset::{cube_path, list_cubes, load_response_or_default, rgb_path, CUBE_DIR, RESPONSE_FILE};
use hrnet_core::spectral::{
    band_center, default_response, degrade_real_world, gen_synthetic_scene, io, render_rgb, Dataset, RgbImage,
    SpectralCube, Track, BANDS,
};
use hrnet_core::train::{self, select_best_epoch, RunConfig};
use hrnet_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::colormap::tint;
use crate::{EnsembleArgs, EvalArgs, GenDataArgs, GradCheckArgs, InferArgs, RenderArgs, ReportArgs, TrainArgs};

pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) => 2,
            Error::Format { .. } | Error::Io { .. } => 3,
            Error::Training(_) => 4,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Prefixes errors with the file they concern.
fn at<T>(path: &Path, r: hrnet_core::Result<T>) -> CliResult<T> {
    r.map_err(|e| {
        let mut err = CliError::from(e);
        err.message = format!("{}: {}", path.display(), err.message);
        err
    })
}

fn usage(message: impl Into<String>) -> CliError {
    CliError {
        code: 2,
        message: message.into(),
    }
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).into())
}

fn load_run_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        Some(p) => at(p, RunConfig::load(p)),
        None => Ok(RunConfig::default()),
    }
}

fn write_text(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text).map_err(|e| Error::io(path, e).into())
}

pub fn gen_data(a: GenDataArgs) -> CliResult {
    let degrade = load_run_config(a.config.as_deref())?.degrade;
    at(Path::new("[degrade]"), degrade.validate())?;
    println!("gen-data: count {} size {} out {}", a.count, a.size, a.out.display());
    println!(
        "degrade: noise_sigma {} mosaic {} quantize_bits {:?}",
        degrade.noise_sigma, degrade.mosaic, degrade.quantize_bits
    );
    println!("seed: {}", a.seed);
    for sub in [CUBE_DIR, Track::Clean.dir_name(), Track::Real.dir_name()] {
        create_dir(&a.out.join(sub))?;
    }
    let resp = default_response();
    let resp_path = a.out.join(RESPONSE_FILE);
    at(&resp_path, io::save_response(&resp, &resp_path))?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    for i in 0..a.count {
        let (scene_seed, noise_seed): (u64, u64) = (rng.random(), rng.random());
        let name = format!("scene_{i:04}");
        let cube = at(&a.out, gen_synthetic_scene(scene_seed, a.size, a.size))?;
        let clean = render_rgb(&cube, &resp);
        let real = degrade_real_world(&clean, &degrade, noise_seed)?;
        let p = cube_path(&a.out, &name);
        at(&p, io::save_hsc(&cube, &p))?;
        for (track, img) in [(Track::Clean, &clean), (Track::Real, &real)] {
            let p = rgb_path(&a.out, track, &name);
            at(&p, io::save_png(img, &p))?;
        }
    }
    println!("wrote {} scenes", a.count);
    Ok(())
}

pub fn train(a: TrainArgs) -> CliResult {
    let mut cfg = load_run_config(a.config.as_deref())?;
    let t = &mut cfg.train;
    if let Some(v) = a.seed {
        t.seed = v;
    }
    if let Some(v) = a.out {
        t.out_dir = Some(v);
    }
    if let Some(v) = a.track {
        t.track = v;
    }
    if let Some(v) = a.epochs {
        t.epochs = v;
    }
    if let Some(v) = a.batch {
        t.batch_size = v;
    }
    if let Some(v) = a.patch {
        t.patch_size = v;
    }
    if let Some(v) = a.train_data {
        t.train_data = v;
    }
    if let Some(v) = a.val_data {
        t.val_data = v;
    }
    if let Some(v) = a.width_scale {
        cfg.arch.width_scale = v;
    }
    cfg.train.validate()?;
    cfg.arch.validate()?;
    let resolved = cfg.to_toml();
    println!("resolved config:\n{resolved}");
    println!("seed: {}", cfg.train.seed);
    if let Some(dir) = &cfg.train.out_dir {
        create_dir(dir)?;
        write_text(&dir.join("config.toml"), &resolved)?;
    }
    let outcome = train::train(&cfg.train, &cfg.arch, |r| {
        println!(
            "epoch {:>5}  loss {:.6}  lr {:.3e}  mrae {:.6}  rmse {:.6}  bpmrae {:.6}",
            r.epoch, r.loss, r.lr, r.mrae, r.rmse, r.bpmrae
        );
    })?;
    match select_best_epoch(&outcome.log) {
        Ok(best) => println!("best epoch {} with validation MRAE {:.6}", best.epoch, best.mrae),
        Err(_) => println!("no epochs run"),
    }
    if let Some(dir) = &cfg.train.out_dir {
        if outcome.log.records.is_empty() {
            let p = dir.join(train::BEST_FILE);
            at(&p, checkpoint::save(&outcome.best_params, &p))?;
        }
        println!("checkpoints and log in {}", dir.display());
    }
    Ok(())
}

fn load_checkpoint(path: &Path) -> CliResult<ModelParams<f32>> {
    let params = at(path, checkpoint::load(path))?;
    println!("checkpoint {}: seed {}", path.display(), params.seed);
    println!("arch: {}", arch_line(&params.arch));
    Ok(params)
}

fn arch_line(arch: &ArchConfig) -> String {
    format!(
        "base width {} scale {} levels {:?}",
        arch.base_width,
        arch.width_scale.as_f64(),
        (0..hrnet_core::model::LEVELS).map(|l| arch.level_width(l)).collect::<Vec<_>>()
    )
}

/// A dataset root's cube directory, or the directory itself.
fn cube_dir(root: &Path) -> PathBuf {
    let sub = root.join(CUBE_DIR);
    if sub.is_dir() {
        sub
    } else {
        root.to_path_buf()
    }
}

fn load_cube(path: &Path) -> CliResult<SpectralCube> {
    at(path, io::load_hsc(path))
}

fn write_report(report: &MetricReport, out: Option<&Path>) -> CliResult {
    println!("{report}");
    if let Some(p) = out {
        let mut buf = Vec::new();
        report.write_csv(&mut buf)?;
        std::fs::write(p, buf).map_err(|e| Error::io(p, e))?;
        println!("metrics written to {}", p.display());
    }
    Ok(())
}

pub fn eval(a: EvalArgs) -> CliResult {
    let gt_dir = cube_dir(&a.gt);
    let names = at(&gt_dir, list_cubes(&gt_dir))?;
    let resp = match &a.response {
        Some(p) => at(p, io::load_response(p))?,
        None => at(&a.gt, load_response_or_default(&a.gt))?,
    };
    println!("eval: {} images, eps {DEFAULT_EPS}, track {}", names.len(), a.track);
    let gts = names
        .iter()
        .map(|n| load_cube(&gt_dir.join(format!("{n}.hsc"))))
        .collect::<CliResult<Vec<_>>>()?;
    let preds = match (&a.pred, &a.checkpoint) {
        (Some(dir), _) => names
            .iter()
            .map(|n| load_cube(&dir.join(format!("{n}.hsc"))))
            .collect::<CliResult<Vec<_>>>()?,
        (None, Some(ck)) => {
            let params = load_checkpoint(ck)?;
            names
                .iter()
                .map(|n| {
                    let p = rgb_path(&a.gt, a.track, n);
                    let rgb = at(&p, io::load_rgb(&p))?;
                    at(&p, reconstruct(&params, &rgb))
                })
                .collect::<CliResult<Vec<_>>>()?
        }
        (None, None) => return Err(usage("eval needs --pred or --checkpoint")),
    };
    let report = evaluate(
        names.iter().zip(&preds).zip(&gts).map(|((n, p), g)| (n.as_str(), p, g)),
        &resp,
        DEFAULT_EPS,
    )?;
    write_report(&report, a.out.as_deref())
}

fn is_rgb_file(p: &Path) -> bool {
    p.extension().is_some_and(|e| e == "png" || e == "hsc")
}

pub fn infer(a: InferArgs) -> CliResult {
    let params = load_checkpoint(&a.checkpoint)?;
    let jobs: Vec<(PathBuf, PathBuf)> = if a.input.is_dir() {
        create_dir(&a.out)?;
        let mut files: Vec<PathBuf> = std::fs::read_dir(&a.input)
            .map_err(|e| Error::io(&a.input, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| is_rgb_file(p))
            .collect();
        files.sort();
        files
            .into_iter()
            .map(|p| {
                let stem = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                let out = a.out.join(format!("{stem}.hsc"));
                (p, out)
            })
            .collect()
    } else {
        vec![(a.input.clone(), a.out.clone())]
    };
    for (input, output) in jobs {
        let rgb = at(&input, io::load_rgb(&input))?;
        let cube = at(&input, reconstruct(&params, &rgb))?;
        at(&output, io::save_hsc(&cube, &output))?;
        println!(
            "{} -> {} ({}×{}×{BANDS})",
            input.display(),
            output.display(),
            cube.height(),
            cube.width()
        );
    }
    Ok(())
}

fn metric_row(name: &str, pred: &SpectralCube, gt: &SpectralCube, resp: &hrnet_core::ResponseFunction) -> CliResult<ImageMetrics> {
    Ok(ImageMetrics {
        name: name.to_owned(),
        mrae: metrics::mrae(pred, gt, DEFAULT_EPS)?,
        rmse: metrics::rmse(pred, gt)?,
        bpmrae: metrics::bpmrae(pred, gt, resp, DEFAULT_EPS)?,
    })
}

pub fn ensemble(a: EnsembleArgs) -> CliResult {
    let data = at(&a.data, Dataset::load(&a.data, a.track))?;
    println!("ensemble: {} members over {} images, track {}", a.checkpoint.len(), data.len(), a.track);
    let members = a
        .checkpoint
        .iter()
        .map(|p| load_checkpoint(p).map(|params| (p.display().to_string(), params)))
        .collect::<CliResult<Vec<_>>>()?;
    // predictions[m][i]: member m on image i.
    let predictions = members
        .iter()
        .map(|(label, params)| {
            data.rgb
                .iter()
                .map(|rgb| at(Path::new(label), reconstruct(params, rgb)))
                .collect::<CliResult<Vec<_>>>()
        })
        .collect::<CliResult<Vec<_>>>()?;
    let ens_dir = a.out.join("ensemble");
    create_dir(&ens_dir)?;
    let mut fused = Vec::with_capacity(data.len());
    for (i, name) in data.names.iter().enumerate() {
        let set = EnsembleSet::new(
            members
                .iter()
                .zip(&predictions)
                .map(|((label, _), preds)| (label.clone(), preds[i].clone()))
                .collect(),
        )?;
        let avg = ensemble_average(&set);
        let p = ens_dir.join(format!("{name}.hsc"));
        at(&p, io::save_hsc(&avg, &p))?;
        fused.push(avg);
    }
    let score = |preds: &[SpectralCube]| -> CliResult<MetricReport> {
        let rows = data
            .names
            .iter()
            .zip(preds)
            .zip(&data.cubes)
            .map(|((n, p), g)| metric_row(n, p, g, &data.response))
            .collect::<CliResult<Vec<_>>>()?;
        Ok(MetricReport::from_images(rows))
    };
    let mut rows = Vec::new();
    for ((label, _), preds) in members.iter().zip(&predictions) {
        let r = score(preds)?;
        rows.push(ImageMetrics {
            name: label.clone(),
            mrae: r.mrae,
            rmse: r.rmse,
            bpmrae: r.bpmrae,
        });
    }
    let k = rows.len() as f64;
    let mean_member = ImageMetrics {
        name: "mean member".into(),
        mrae: rows.iter().map(|r| r.mrae).sum::<f64>() / k,
        rmse: rows.iter().map(|r| r.rmse).sum::<f64>() / k,
        bpmrae: rows.iter().map(|r| r.bpmrae).sum::<f64>() / k,
    };
    let best_member = rows.iter().map(|r| r.mrae).fold(f64::INFINITY, f64::min);
    let ens = score(&fused)?;
    rows.push(mean_member.clone());
    rows.push(ImageMetrics {
        name: "ensemble".into(),
        mrae: ens.mrae,
        rmse: ens.rmse,
        bpmrae: ens.bpmrae,
    });
    let mut csv = String::from("name,mrae,rmse,bpmrae\n");
    println!("{:<32}  {:>10}  {:>10}  {:>10}", "model", "MRAE", "RMSE", "BPMRAE");
    for r in &rows {
        println!("{:<32}  {:>10.6}  {:>10.6}  {:>10.6}", r.name, r.mrae, r.rmse, r.bpmrae);
        let _ = writeln!(csv, "{},{},{},{}", r.name, r.mrae, r.rmse, r.bpmrae);
    }
    println!(
        "ensemble MRAE {:.6}  best member {:.6}  mean member {:.6}",
        ens.mrae, best_member, mean_member.mrae
    );
    let p = a.out.join("ensemble_report.csv");
    write_text(&p, &csv)?;
    println!("report written to {}", p.display());
    Ok(())
}

pub fn render(a: RenderArgs) -> CliResult {
    let cube = load_cube(&a.input)?;
    let resp = match &a.response {
        Some(p) => at(p, io::load_response(p))?,
        None => default_response(),
    };
    create_dir(&a.out)?;
    println!("render: {} bands {:?}", a.input.display(), a.bands);
    for nm in &a.bands {
        let Some(k) = (0..BANDS).find(|&k| band_center(k) == *nm as f64) else {
            return Err(usage(format!("--bands: {nm} nm is not a band centre (400 to 700 in steps of 10)")));
        };
        let t = tint(*nm as f64);
        let plane = cube.plane(k);
        let data: Vec<f32> = t
            .iter()
            .flat_map(|&c| plane.iter().map(move |&v| (v as f64 * c) as f32))
            .collect();
        let img = RgbImage::new(cube.height(), cube.width(), data)?;
        let p = a.out.join(format!("band_{nm}nm.png"));
        at(&p, io::save_png(&img, &p))?;
    }
    let p = a.out.join("rgb.png");
    at(&p, io::save_png(&render_rgb(&cube, &resp), &p))?;
    println!("wrote {} band images and rgb.png to {}", a.bands.len(), a.out.display());
    Ok(())
}

pub fn report(a: ReportArgs) -> CliResult {
    let arch = match &a.config {
        Some(p) => load_run_config(Some(p))?.arch,
        None => ArchConfig::default(),
    };
    println!("arch: {}", arch_line(&arch));
    let scales: Vec<WidthScale> = match a.width_scale {
        Some(s) => vec![s],
        None => WidthScale::ALL.to_vec(),
    };
    let mut csv = String::from("width_scale,macs,params,weights_bytes\n");
    println!("{:>11}  {:>12}  {:>12}  {:>12}", "width_scale", "MACs (G)", "Params (M)", "Weights (MB)");
    for s in scales {
        let r = model_report(&ArchConfig {
            width_scale: s,
            ..arch.clone()
        });
        println!(
            "{:>11}  {:>12.3}  {:>12.3}  {:>12.3}",
            s.as_f64(),
            r.macs as f64 / 1e9,
            r.params as f64 / 1e6,
            r.weights_bytes as f64 / 1e6
        );
        let _ = writeln!(csv, "{},{},{},{}", s.as_f64(), r.macs, r.params, r.weights_bytes);
    }
    if let Some(p) = &a.out {
        write_text(p, &csv)?;
    }
    Ok(())
}

pub fn grad_check(a: GradCheckArgs) -> CliResult {
    let seeds: Vec<u64> = (a.seed..a.seed + a.seeds).collect();
    println!("grad-check: tolerance {} seeds {:?}", a.tolerance, seeds);
    let start = std::time::Instant::now();
    let entries = hrnet_core::gradient_suite::gradient_suite(&seeds, a.tolerance);
    let mut failed = 0;
    for e in &entries {
        let r = &e.report;
        println!(
            "{:<4} {:<22} seed {:<3} max_rel_err {:.3e}  checked {:<4} nonsmooth {}{}",
            if r.pass { "PASS" } else { "FAIL" },
            e.name,
            e.seed,
            r.max_rel_err,
            r.checked,
            r.nonsmooth_skipped,
            r.error.as_deref().map(|m| format!("  error: {m}")).unwrap_or_default()
        );
        failed += usize::from(!r.pass);
    }
    println!("{} checks, {failed} failed, {:.1}s", entries.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        return Err(CliError {
            code: 1,
            message: format!("{failed} gradient checks failed"),
        });
    }
    Ok(())
}
