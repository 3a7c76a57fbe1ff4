use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ndarray::Array2;
use serde::Serialize;

use nfsar_core::baselines::{clean_restore, ista_with_operator, CleanConfig, InvariantOperator};
use nfsar_core::config::RunConfig;
use nfsar_core::formats::{
    encode_pgm_db, image_pgm, parse_scene, read_nfsar1, write_atomic, write_nfsar1, write_scene,
};
use nfsar_core::geometry::synthesize_psf;
use nfsar_core::metrics::{half_power_width, match_scatterers, table1_report, ExtractedScatterer};
use nfsar_core::simulate::{degrade, paper_scene_1, paper_scene_2, render_ideal};
use nfsar_core::solver::restore;
use nfsar_core::{ComplexImage, ImagingGeometry, PsfBank, RestorationResult, SceneSpec, VariantDictionary};

use crate::bench::run_bench;
use crate::{Common, Method};

pub fn load_config(common: &Common) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            RunConfig::from_toml(&text).with_context(|| format!("config {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(n) = common.grid {
        if n == 0 {
            bail!("--grid must be positive");
        }
        config.geometry = config.geometry.clone().with_grid(n);
    }
    config.validate()?;
    Ok(config)
}

pub fn load_scene(arg: &str) -> Result<SceneSpec> {
    match arg {
        "paper1" => Ok(paper_scene_1()),
        "paper2" => Ok(paper_scene_2()),
        path => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading scene {path}"))?;
            parse_scene(&text).with_context(|| format!("scene {path}"))
        }
    }
}

/// The built-in range-profile geometry is used for `paper2` unless a config
/// file pins the geometry.
pub fn resolve_geometry(common: &Common, config: &RunConfig, scene_arg: &str) -> Result<ImagingGeometry> {
    if common.config.is_none() && scene_arg == "paper2" {
        if common.grid.is_some() {
            bail!("--grid does not apply to the built-in paper2 geometry; use a config file");
        }
        return Ok(ImagingGeometry::paper2());
    }
    Ok(config.geometry.build()?)
}

/// Geometry for an image read from disk. Without an explicit config or grid
/// the image's own grid is adopted.
fn geometry_for_image(common: &Common, config: &RunConfig, image: &ComplexImage) -> Result<ImagingGeometry> {
    let base = config.geometry.build()?;
    if common.config.is_some() || common.grid.is_some() {
        image
            .ensure_same_grid(&base.grid)
            .context("image does not match the configured geometry")?;
        return Ok(base);
    }
    Ok(ImagingGeometry::new(
        base.center_frequency_hz,
        base.transmit_bandwidth_hz,
        base.rail_length_m,
        *image.grid(),
    )?)
}

fn out_dir(common: &Common, config: &RunConfig) -> Result<PathBuf> {
    let dir = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output_dir));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    write_atomic(path, json.as_bytes())?;
    Ok(())
}

#[derive(Serialize)]
struct SimulateManifest<'a> {
    scene: &'a str,
    scatterers: usize,
    seed: u64,
    clutter_power_db: Option<f64>,
    geometry: ImagingGeometry,
    psf_patches: usize,
    psf_clamped: bool,
}

pub fn simulate(common: &Common, scene_arg: &str, no_noise: bool) -> Result<()> {
    let mut config = load_config(common)?;
    if no_noise {
        config.noise.enabled = false;
    }
    let scene = load_scene(scene_arg)?;
    let geometry = resolve_geometry(common, &config, scene_arg)?;
    let bank = PsfBank::build(&geometry, config.psf.quantization(), config.psf.truncation())?;
    let noise = config.noise.to_spec(&scene, config.seed);
    let ideal = render_ideal(&scene, &geometry)?;
    let degraded = degrade(&scene, &geometry, &bank, noise.as_ref())?;

    let dir = out_dir(common, &config)?;
    let range_db = config.metrics.heatmap_range_db;
    write_nfsar1(&dir.join("ideal.nfsar"), &ideal)?;
    write_nfsar1(&dir.join("degraded.nfsar"), &degraded)?;
    write_atomic(&dir.join("ideal.pgm"), &image_pgm(&ideal, range_db))?;
    write_atomic(&dir.join("degraded.pgm"), &image_pgm(&degraded, range_db))?;
    write_atomic(&dir.join("scene.txt"), write_scene(&scene).as_bytes())?;
    write_json(
        &dir.join("simulate.json"),
        &SimulateManifest {
            scene: &scene.label,
            scatterers: scene.len(),
            seed: config.seed,
            clutter_power_db: noise.map(|n| n.clutter_power_db),
            geometry,
            psf_patches: bank.len(),
            psf_clamped: bank.any_clamped(),
        },
    )?;

    let (na, nr) = geometry.grid.shape();
    println!("scene        {}", scene.label);
    println!("scatterers   {} scatterers", scene.len());
    if !scene.is_empty() {
        let span = |f: fn(&nfsar_core::Scatterer) -> f64| {
            scene
                .scatterers
                .iter()
                .map(f)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
        };
        let (a0, a1) = span(|s| s.azimuth_m);
        let (r0, r1) = span(|s| s.range_m);
        println!("extent       azimuth {a0} .. {a1} m, range {r0} .. {r1} m");
    }
    println!("grid         {na} x {nr}");
    println!("psf patches  {}", bank.len());
    match noise {
        Some(n) => println!("clutter      {:.1} dB (seed {})", n.clutter_power_db, n.rng_seed),
        None => println!("clutter      none"),
    }
    println!("written to   {}", dir.display());
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct PsfSummary {
    pub azimuth_m: f64,
    pub range_m: f64,
    pub slant_range_m: f64,
    pub angle_deg: f64,
    pub resolution_range_m: f64,
    pub resolution_azimuth_m: f64,
    pub width_azimuth_3db_m: Option<f64>,
    pub width_range_3db_m: Option<f64>,
    pub patch_cells: (usize, usize),
    pub clamped: bool,
}

pub fn psf_summary(geometry: &ImagingGeometry, config: &RunConfig, azimuth: f64, range: f64) -> Result<(PsfSummary, Array2<f64>)> {
    let patch = synthesize_psf(geometry, azimuth, range, config.psf.truncation())?;
    let (ha, hr) = patch.truncation_radius_cells;
    let az_profile: Vec<f64> = patch.samples.column(hr).iter().map(|v| v.abs()).collect();
    let rg_profile: Vec<f64> = patch.samples.row(ha).iter().map(|v| v.abs()).collect();
    let summary = PsfSummary {
        azimuth_m: azimuth,
        range_m: range,
        slant_range_m: patch.center_slant_range_m,
        angle_deg: patch.observation_angle_rad.to_degrees(),
        resolution_range_m: patch.resolution_range_m,
        resolution_azimuth_m: patch.resolution_azimuth_m,
        width_azimuth_3db_m: half_power_width(&az_profile, ha, geometry.grid.spacing_azimuth_m),
        width_range_3db_m: half_power_width(&rg_profile, hr, geometry.grid.spacing_range_m),
        patch_cells: patch.samples.dim(),
        clamped: patch.clamped,
    };
    Ok((summary, patch.samples))
}

fn opt_m(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6} m")).unwrap_or_else(|| "n/a".into())
}

pub fn psf(common: &Common, scene_arg: &str, azimuth: f64, range: f64) -> Result<()> {
    let config = load_config(common)?;
    let geometry = resolve_geometry(common, &config, scene_arg)?;
    let (s, samples) = psf_summary(&geometry, &config, azimuth, range)?;
    let dir = out_dir(common, &config)?;

    let (ha, hr) = (samples.nrows() / 2, samples.ncols() / 2);
    let mut csv = String::from("da,dr,azimuth_offset_m,range_offset_m,value\n");
    for ((ia, ir), v) in samples.indexed_iter() {
        let da = ia as i64 - ha as i64;
        let dr = ir as i64 - hr as i64;
        csv.push_str(&format!(
            "{da},{dr},{:?},{:?},{v:?}\n",
            da as f64 * geometry.grid.spacing_azimuth_m,
            dr as f64 * geometry.grid.spacing_range_m
        ));
    }
    write_atomic(&dir.join("psf.csv"), csv.as_bytes())?;
    let mags = samples.mapv(f64::abs);
    write_atomic(&dir.join("psf.pgm"), &encode_pgm_db(&mags, config.metrics.heatmap_range_db))?;
    write_json(&dir.join("psf.json"), &s)?;

    println!("position          azimuth {} m, range {} m", s.azimuth_m, s.range_m);
    println!("slant range       {:.6} m", s.slant_range_m);
    println!("angle             {:.4} deg", s.angle_deg);
    println!("rho_r             {:.6} m", s.resolution_range_m);
    println!("rho_a             {:.6} m", s.resolution_azimuth_m);
    println!("width_azimuth_3db {}", opt_m(s.width_azimuth_3db_m));
    println!("width_range_3db   {}", opt_m(s.width_range_3db_m));
    println!(
        "patch             {} x {} cells{}",
        s.patch_cells.0,
        s.patch_cells.1,
        if s.clamped { " (clamped to grid)" } else { "" }
    );
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct RestoreManifest {
    pub method: String,
    pub input: String,
    pub lambda_rel: Option<f64>,
    pub lambda_reg: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
    pub extract_min_level_db: f64,
    pub extracted: usize,
    pub scatterers: Vec<ExtractedScatterer>,
}

pub fn run_method(
    method: Method,
    degraded: &ComplexImage,
    bank: &PsfBank,
    config: &RunConfig,
    lambda_rel: Option<f64>,
    scene_size: Option<usize>,
) -> Result<RestorationResult> {
    let geometry = bank.geometry();
    let result = match method {
        Method::Proposed => {
            let dict = VariantDictionary::new(bank);
            let rel = lambda_rel.unwrap_or(config.solver.lambda_rel);
            let lambda = dict.relative_lambda(degraded, rel)?;
            restore(degraded, &dict, &config.solver.to_config(lambda, dict.max_squared_norm()))?
        }
        Method::Ista => {
            let (ca, cr) = geometry.grid.center_cell();
            let op = InvariantOperator::new(geometry.grid, bank.lookup(ca, cr));
            let rel = lambda_rel.unwrap_or(config.ista.lambda_rel);
            let lambda = rel * op.adjoint(degraded)?.max_abs();
            ista_with_operator(degraded, &op, &config.ista.to_config(lambda))?
        }
        Method::Clean => {
            let cfg = match scene_size {
                Some(n) => config.clean.to_config(n),
                None => CleanConfig {
                    max_components: config
                        .clean
                        .max_components
                        .unwrap_or(CleanConfig::default().max_components),
                    ..config.clean.to_config(1)
                },
            };
            clean_restore(degraded, bank, &cfg)?
        }
    };
    Ok(result)
}

pub fn restore_cmd(
    common: &Common,
    input: &Path,
    method: Method,
    lambda_rel: Option<f64>,
    scene_arg: Option<&str>,
) -> Result<()> {
    let config = load_config(common)?;
    let degraded = read_nfsar1(input).with_context(|| format!("reading {}", input.display()))?;
    let geometry = geometry_for_image(common, &config, &degraded)?;
    let scene_size = scene_arg.map(load_scene).transpose()?.map(|s| s.len());
    let bank = PsfBank::build(&geometry, config.psf.quantization(), config.psf.truncation())?;
    let mut result = run_method(method, &degraded, &bank, &config, lambda_rel, scene_size)?;
    result.extract(config.metrics.extract_min_level_db);

    let dir = out_dir(common, &config)?;
    write_nfsar1(&dir.join("coefficients.nfsar"), &result.coefficients)?;
    write_nfsar1(&dir.join("residual.nfsar"), &result.residual)?;
    write_atomic(
        &dir.join("coefficients.pgm"),
        &image_pgm(&result.coefficients, config.metrics.heatmap_range_db),
    )?;
    let mut trace = String::from("iteration,objective\n");
    for (i, v) in result.objective_trace.iter().enumerate() {
        trace.push_str(&format!("{i},{v:?}\n"));
    }
    write_atomic(&dir.join("trace.csv"), trace.as_bytes())?;
    let effective_rel = match method {
        Method::Proposed => Some(lambda_rel.unwrap_or(config.solver.lambda_rel)),
        Method::Ista => Some(lambda_rel.unwrap_or(config.ista.lambda_rel)),
        Method::Clean => None,
    };
    let manifest = RestoreManifest {
        method: method.label().into(),
        input: input.display().to_string(),
        lambda_rel: effective_rel,
        lambda_reg: result.lambda_reg,
        iterations: result.iterations,
        converged: result.converged,
        final_objective: result.final_objective(),
        extract_min_level_db: config.metrics.extract_min_level_db,
        extracted: result.scatterers.len(),
        scatterers: result.scatterers.clone(),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;

    println!("method      {}", manifest.method);
    println!("lambda      {:.6e}", manifest.lambda_reg);
    println!("iterations  {}", manifest.iterations);
    println!("converged   {}", manifest.converged);
    println!("objective   {:.6e}", manifest.final_objective);
    println!("extracted   {} scatterers", manifest.extracted);
    if !result.converged {
        eprintln!("warning: {} stopped at its iteration limit", manifest.method);
    }
    Ok(())
}

pub fn evaluate(common: &Common, coefficients: &Path, scene_arg: &str, method: Method) -> Result<()> {
    let config = load_config(common)?;
    let image =
        read_nfsar1(coefficients).with_context(|| format!("reading {}", coefficients.display()))?;
    let geometry = geometry_for_image(common, &config, &image)?;
    let scene = load_scene(scene_arg)?;
    let estimates = nfsar_core::metrics::extract_scatterers(&image, config.metrics.extract_min_level_db);
    let report = match_scatterers(&estimates, &scene, config.metrics.gate_radius(&geometry));
    let table = table1_report(&[(method.label().to_string(), report.clone())], geometry.lambda_rf());

    let dir = out_dir(common, &config)?;
    write_atomic(&dir.join("metrics.csv"), table.to_csv().as_bytes())?;
    write_atomic(&dir.join("metrics.txt"), table.to_text().as_bytes())?;
    write_json(&dir.join("matches.json"), &report)?;
    print!("{}", table.to_text());
    Ok(())
}

pub fn bench(common: &Common, scene_arg: &str, no_noise: bool) -> Result<()> {
    let mut config = load_config(common)?;
    if no_noise {
        config.noise.enabled = false;
    }
    let scene = load_scene(scene_arg)?;
    let geometry = resolve_geometry(common, &config, scene_arg)?;
    let dir = out_dir(common, &config)?;
    let outcome = run_bench(&config, &geometry, &scene, Some(&dir))?;
    print!("{}", outcome.table.to_text());
    for m in &outcome.manifest.methods {
        if let Some(e) = &m.error {
            eprintln!("warning: {}: {e}", m.method);
        }
        if let Some(p) = m.chosen.map(|i| &m.sweep[i]) {
            if !p.converged {
                eprintln!("warning: {} stopped at its iteration limit", m.method);
            }
        }
    }
    println!("written to {}", dir.display());
    Ok(())
}
