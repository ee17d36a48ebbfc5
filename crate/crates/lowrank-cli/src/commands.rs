//! Subcommand implementations. Every command validates its full
//! configuration before reading heavy inputs or writing any file, so a
//! rejected run leaves no partial outputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use lowrank_core::image::ImageBuffer;
use lowrank_core::io::{
    read_csv_matrix, read_pgm, write_csv_matrix, write_pgm, write_report, write_trace_csv,
    ReportDocument,
};
use lowrank_core::matrix::DenseMatrix;
use lowrank_core::metrics::{psnr, ssim};
use lowrank_core::noise::{add_salt_pepper, NoiseSpec};
use lowrank_core::nss::{
    build_nss_group, denoise_image, denoise_image_traced, match_similar, median_prefilter,
    PatchGrid, PipelineParams,
};
use lowrank_core::solver::{ialm_decompose, MethodPreset, SolverConfig};
use lowrank_core::{Error, Result};

use crate::opts::{check_level, PipelineArgs, SolverOverrides, SweepParameter};

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn run_noise(input: &Path, noise_level: f64, seed: u64, out: &Path) -> Result<()> {
    let spec = NoiseSpec::new(noise_level, seed)?;
    let clean = read_pgm(input)?;
    let noisy = add_salt_pepper(&clean, &spec)?;
    let quality = psnr(&clean, &noisy)?;
    write_pgm(&noisy, out)?;
    println!(
        "wrote {} (P={noise_level}, noisy psnr {quality:.3} dB)",
        out.display()
    );
    Ok(())
}

pub struct DenoiseRequest {
    pub input: PathBuf,
    pub method: MethodPreset,
    pub noise_level: Option<f64>,
    pub solver: SolverOverrides,
    pub pipeline: PipelineArgs,
    pub reference: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub out: PathBuf,
    pub report: Option<PathBuf>,
    pub seed: u64,
    pub deterministic: bool,
}

fn write_iteration_psnr_csv(values: &[f64], path: &Path) -> Result<()> {
    let mut text = String::from("iteration,psnr\n");
    for (i, v) in values.iter().enumerate() {
        if v.is_finite() {
            writeln!(text, "{},{v:.16e}", i + 1).expect("string writes cannot fail");
        } else {
            writeln!(text, "{},inf", i + 1).expect("string writes cannot fail");
        }
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn run_denoise(req: DenoiseRequest) -> Result<()> {
    if let Some(level) = req.noise_level {
        check_level(level)?;
    }
    let config = req.solver.resolve(req.method, req.noise_level)?;
    let params = req.pipeline.resolve(req.noise_level, req.deterministic)?;
    if req.trace.is_some() && req.reference.is_none() {
        return Err(Error::InvalidArgument(
            "--trace needs --reference to score iterates against".into(),
        ));
    }
    let noisy = read_pgm(&req.input)?;
    let reference = req.reference.as_deref().map(read_pgm).transpose()?;

    let started = Instant::now();
    let (restored, iteration_psnr) = match (&reference, &req.trace) {
        (Some(r), Some(_)) => {
            let trace = denoise_image_traced(&noisy, r, &config, &params)?;
            (trace.restored, Some(trace.psnr_per_iteration))
        }
        _ => (denoise_image(&noisy, &config, &params)?, None),
    };
    let runtime = started.elapsed().as_secs_f64();
    let scores = reference
        .as_ref()
        .map(|r| -> Result<(f64, f64)> { Ok((psnr(r, &restored)?, ssim(r, &restored)?)) })
        .transpose()?;

    write_pgm(&restored, &req.out)?;
    if let (Some(path), Some(values)) = (&req.trace, &iteration_psnr) {
        write_iteration_psnr_csv(values, path)?;
    }
    let report_path = req
        .report
        .clone()
        .unwrap_or_else(|| req.out.with_extension("report.json"));
    let report = ReportDocument {
        method: req.method.name().to_string(),
        image: stem_of(&req.input),
        noise_level: req.noise_level.unwrap_or(0.30),
        seed: req.seed,
        solver: config,
        pipeline: params,
        psnr: scores.map(|s| s.0),
        ssim: scores.map(|s| s.1),
        runtime_seconds: runtime,
        trace_path: req.trace.as_ref().map(|p| p.display().to_string()),
    };
    write_report(&report, &report_path)?;
    match (report.psnr, report.ssim) {
        (Some(p), Some(s)) => println!(
            "wrote {} (psnr {p:.3} dB, ssim {s:.4}, {runtime:.1} s)",
            req.out.display()
        ),
        _ => println!("wrote {} ({runtime:.1} s)", req.out.display()),
    }
    println!("report: {}", report_path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn run_decompose(
    input: &Path,
    method: MethodPreset,
    noise_level: Option<f64>,
    solver: &SolverOverrides,
    out_a: &Path,
    out_e: &Path,
    trace: Option<PathBuf>,
) -> Result<()> {
    if let Some(level) = noise_level {
        check_level(level)?;
    }
    let config = solver.resolve(method, noise_level)?;
    let observed = read_csv_matrix(input)?;
    let result = ialm_decompose(&observed, &config, None)?;
    write_csv_matrix(&result.low_rank, out_a)?;
    write_csv_matrix(&result.sparse, out_e)?;
    if let Some(path) = trace {
        write_trace_csv(&result.trace, &path)?;
    }
    let residual = result.trace.last().map_or(0.0, |r| r.residual);
    println!(
        "residual {residual:.3e} after {} iterations (converged: {})",
        result.iterations_run, result.converged
    );
    Ok(())
}

pub fn run_svd_analyze(
    input: &Path,
    anchor: (usize, usize),
    noise_level: Option<f64>,
    seed: u64,
    solver: &SolverOverrides,
    pipeline: &PipelineArgs,
    out: &Path,
) -> Result<()> {
    if let Some(level) = noise_level {
        check_level(level)?;
    }
    let params = pipeline.resolve(noise_level, true)?;
    if noise_level.is_some() {
        // Every preset is solved below; surface config contradictions now.
        for preset in MethodPreset::ALL {
            solver.resolve(preset, noise_level)?;
        }
    }
    let clean = read_pgm(input)?;
    let noisy = match noise_level {
        Some(level) => Some(add_salt_pepper(&clean, &NoiseSpec::new(level, seed)?)?),
        None => None,
    };
    let match_source = noisy.as_ref().unwrap_or(&clean);
    let prefiltered = median_prefilter(match_source, params.median_window)?;
    let grid = PatchGrid::build(clean.width(), clean.height(), params.patch_size, params.step)?;
    let coords = match_similar(
        &prefiltered,
        anchor,
        &grid,
        params.group_size,
        params.search_radius,
    )?;

    let spectrum = |m: &DenseMatrix| -> Result<Vec<f64>> {
        Ok(m.svd()?.singular_values().to_vec())
    };
    let decay = |sigma: &[f64]| -> f64 {
        let tail = sigma.get(9).copied().unwrap_or(0.0);
        tail / sigma.first().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE)
    };

    let clean_group = build_nss_group(&clean, &coords, params.patch_size)?;
    let mut rows = vec![("clean".to_string(), spectrum(&clean_group.data)?)];
    if let Some(noisy) = &noisy {
        let corrupted = build_nss_group(noisy, &coords, params.patch_size)?;
        rows.push(("corrupted".to_string(), spectrum(&corrupted.data)?));
        for preset in MethodPreset::ALL {
            let config = solver.resolve(preset, noise_level)?;
            let recovered = ialm_decompose(&corrupted.data, &config, None)?;
            rows.push((
                format!("recovered-{}", preset.name()),
                spectrum(&recovered.low_rank)?,
            ));
        }
    }

    let mut text = String::new();
    for (label, values) in &rows {
        text.push_str(label);
        for v in values {
            write!(text, ",{v:.16e}").expect("string writes cannot fail");
        }
        text.push('\n');
    }
    std::fs::write(out, text).map_err(|e| io_err(out, e))?;
    for (label, values) in &rows {
        println!("{label}: sigma 10/1 ratio {:.4}", decay(values));
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn load_corpus(dir: &Path) -> Result<Vec<(String, ImageBuffer)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.extension()
                .is_some_and(|ext| ext.eq_ignore_ascii_case("pgm"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no .pgm images found in {}",
            dir.display()
        )));
    }
    paths
        .into_iter()
        .map(|p| Ok((stem_of(&p), read_pgm(&p)?)))
        .collect()
}

pub struct BenchmarkRequest {
    pub corpus: PathBuf,
    pub levels: Vec<f64>,
    pub methods: Vec<MethodPreset>,
    pub seed: u64,
    pub solver: SolverOverrides,
    pub pipeline: PipelineArgs,
    pub out: PathBuf,
    pub table: Option<PathBuf>,
    pub deterministic: bool,
}

#[derive(Serialize)]
struct BenchmarkCell {
    image: String,
    noise_level: f64,
    method: String,
    psnr: f64,
    ssim: f64,
    runtime_seconds: f64,
}

#[derive(Serialize)]
struct BenchmarkMean {
    method: String,
    noise_level: f64,
    mean_psnr: f64,
    mean_ssim: f64,
}

#[derive(Serialize)]
struct BenchmarkReport {
    seed: u64,
    deterministic: bool,
    levels: Vec<f64>,
    methods: Vec<String>,
    images: Vec<String>,
    cells: Vec<BenchmarkCell>,
    means: Vec<BenchmarkMean>,
}

pub fn run_benchmark(req: BenchmarkRequest) -> Result<()> {
    if req.levels.is_empty() || req.methods.is_empty() {
        return Err(Error::InvalidArgument(
            "benchmark needs at least one noise level and one method".into(),
        ));
    }
    // Validate every cell's configuration before touching the filesystem.
    for &level in &req.levels {
        check_level(level)?;
        req.pipeline.resolve(Some(level), req.deterministic)?;
        for &method in &req.methods {
            req.solver.resolve(method, Some(level))?;
        }
    }
    let images = load_corpus(&req.corpus)?;

    let mut cells = Vec::new();
    for (image_index, (name, clean)) in images.iter().enumerate() {
        for (level_index, &level) in req.levels.iter().enumerate() {
            // One noisy realization per image and level, shared by all
            // methods so the comparison sees identical corruption.
            let cell_seed = req
                .seed
                .wrapping_add((image_index * req.levels.len() + level_index) as u64);
            let noisy = add_salt_pepper(clean, &NoiseSpec::new(level, cell_seed)?)?;
            let params = req.pipeline.resolve(Some(level), req.deterministic)?;
            for &method in &req.methods {
                let config = req.solver.resolve(method, Some(level))?;
                let started = Instant::now();
                let restored = denoise_image(&noisy, &config, &params)?;
                let runtime = started.elapsed().as_secs_f64();
                let p = psnr(clean, &restored)?;
                let s = ssim(clean, &restored)?;
                println!(
                    "{name} P={level} {}: psnr {p:.3} dB ssim {s:.4} ({runtime:.1} s)",
                    method.name()
                );
                cells.push(BenchmarkCell {
                    image: name.clone(),
                    noise_level: level,
                    method: method.name().to_string(),
                    psnr: p,
                    ssim: s,
                    runtime_seconds: runtime,
                });
            }
        }
    }

    let mut means = Vec::new();
    for &level in &req.levels {
        for &method in &req.methods {
            let selected: Vec<&BenchmarkCell> = cells
                .iter()
                .filter(|c| c.noise_level == level && c.method == method.name())
                .collect();
            let n = selected.len() as f64;
            means.push(BenchmarkMean {
                method: method.name().to_string(),
                noise_level: level,
                mean_psnr: selected.iter().map(|c| c.psnr).sum::<f64>() / n,
                mean_ssim: selected.iter().map(|c| c.ssim).sum::<f64>() / n,
            });
        }
    }

    let report = BenchmarkReport {
        seed: req.seed,
        deterministic: req.deterministic,
        levels: req.levels.clone(),
        methods: req.methods.iter().map(|m| m.name().to_string()).collect(),
        images: images.iter().map(|(n, _)| n.clone()).collect(),
        cells,
        means,
    };
    let mut json = serde_json::to_string_pretty(&report).map_err(|e| Error::Json {
        path: req.out.clone(),
        message: e.to_string(),
    })?;
    json.push('\n');
    std::fs::write(&req.out, json).map_err(|e| io_err(&req.out, e))?;

    // The CSV table omits wall-clock so reruns stay byte-identical.
    let table_path = req
        .table
        .clone()
        .unwrap_or_else(|| req.out.with_extension("csv"));
    let mut text = String::from("image,noise_level,method,psnr,ssim\n");
    for cell in &report.cells {
        writeln!(
            text,
            "{},{},{},{:.4},{:.6}",
            cell.image, cell.noise_level, cell.method, cell.psnr, cell.ssim
        )
        .expect("string writes cannot fail");
    }
    std::fs::write(&table_path, text).map_err(|e| io_err(&table_path, e))?;
    println!("wrote {} and {}", req.out.display(), table_path.display());
    Ok(())
}

pub struct SweepRequest {
    pub corpus: PathBuf,
    pub parameter: SweepParameter,
    pub grid: Vec<f64>,
    pub q_grid: Vec<f64>,
    pub noise_level: f64,
    pub method: MethodPreset,
    pub seed: u64,
    pub solver: SolverOverrides,
    pub pipeline: PipelineArgs,
    pub out: PathBuf,
    pub deterministic: bool,
}

struct GridPoint {
    labels: Vec<String>,
    config: SolverConfig,
    params: PipelineParams,
}

fn integral_k(value: f64) -> Result<usize> {
    if value.fract() == 0.0 && value >= 1.0 && value <= u32::MAX as f64 {
        Ok(value as usize)
    } else {
        Err(Error::InvalidArgument(format!(
            "K grid values must be positive integers, got {value}"
        )))
    }
}

fn build_points(req: &SweepRequest) -> Result<Vec<GridPoint>> {
    let base_config = req.solver.resolve(req.method, Some(req.noise_level))?;
    let base_params = req
        .pipeline
        .resolve(Some(req.noise_level), req.deterministic)?;
    let mut points = Vec::new();
    let mut push = |labels: Vec<String>, config: SolverConfig, params: PipelineParams| -> Result<()> {
        config.validate()?;
        params.validate()?;
        points.push(GridPoint {
            labels,
            config,
            params,
        });
        Ok(())
    };
    match req.parameter {
        SweepParameter::K => {
            for &value in &req.grid {
                let k = integral_k(value)?;
                let mut params = base_params.clone();
                params.group_size = k;
                push(vec![k.to_string()], base_config.clone(), params)?;
            }
        }
        SweepParameter::P => {
            for &value in &req.grid {
                let mut config = base_config.clone();
                config.p = value;
                push(vec![value.to_string()], config, base_params.clone())?;
            }
        }
        SweepParameter::Q => {
            for &value in &req.grid {
                let mut config = base_config.clone();
                config.q = value;
                push(vec![value.to_string()], config, base_params.clone())?;
            }
        }
        SweepParameter::Ratio => {
            for &value in &req.grid {
                let mut config = base_config.clone();
                config.lambda_ratio = Some(value);
                push(vec![value.to_string()], config, base_params.clone())?;
            }
        }
        SweepParameter::Pq => {
            for &p in &req.grid {
                for &q in &req.q_grid {
                    let mut config = base_config.clone();
                    config.p = p;
                    config.q = q;
                    push(vec![p.to_string(), q.to_string()], config, base_params.clone())?;
                }
            }
        }
    }
    Ok(points)
}

pub fn run_sweep(req: SweepRequest) -> Result<()> {
    check_level(req.noise_level)?;
    if req.grid.is_empty() {
        return Err(Error::InvalidArgument(
            "--grid needs at least one value".into(),
        ));
    }
    match req.parameter {
        SweepParameter::Pq if req.q_grid.is_empty() => {
            return Err(Error::InvalidArgument(
                "--q-grid is required when sweeping pq".into(),
            ));
        }
        SweepParameter::Pq => {}
        _ if !req.q_grid.is_empty() => {
            return Err(Error::InvalidArgument(
                "--q-grid only applies to the pq sweep".into(),
            ));
        }
        _ => {}
    }
    let points = build_points(&req)?;
    let images = load_corpus(&req.corpus)?;
    let noisy: Vec<ImageBuffer> = images
        .iter()
        .enumerate()
        .map(|(i, (_, clean))| {
            add_salt_pepper(
                clean,
                &NoiseSpec::new(req.noise_level, req.seed.wrapping_add(i as u64))?,
            )
        })
        .collect::<Result<_>>()?;

    let value_header: &str = match req.parameter {
        SweepParameter::K => "K",
        SweepParameter::P => "p",
        SweepParameter::Q => "q",
        SweepParameter::Ratio => "ratio",
        SweepParameter::Pq => "p,q",
    };
    let mut text = format!("{value_header},mean_psnr,mean_ssim\n");
    for point in &points {
        let mut psnr_sum = 0.0;
        let mut ssim_sum = 0.0;
        for ((_, clean), corrupted) in images.iter().zip(&noisy) {
            let restored = denoise_image(corrupted, &point.config, &point.params)?;
            psnr_sum += psnr(clean, &restored)?;
            ssim_sum += ssim(clean, &restored)?;
        }
        let n = images.len() as f64;
        let label = point.labels.join(",");
        println!(
            "{value_header}={label}: mean psnr {:.3} dB, mean ssim {:.4}",
            psnr_sum / n,
            ssim_sum / n
        );
        writeln!(
            text,
            "{label},{:.4},{:.6}",
            psnr_sum / n,
            ssim_sum / n
        )
        .expect("string writes cannot fail");
    }
    std::fs::write(&req.out, text).map_err(|e| io_err(&req.out, e))?;
    println!("wrote {}", req.out.display());
    Ok(())
}

pub fn run_make_corpus(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    for (name, image) in lowrank_core::synth::corpus() {
        let path = out.join(format!("{name}.pgm"));
        write_pgm(&image, &path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
