//! The simulated comparison: degrade the wide scene, restore it with every
//! method over a λ grid, keep the best setting per method and tabulate.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use nfsar_core::baselines::{clean_restore, ista_with_operator, InvariantOperator};
use nfsar_core::config::RunConfig;
use nfsar_core::formats::{csv_number, image_pgm, write_atomic, write_nfsar1};
use nfsar_core::metrics::{match_scatterers, table1_report, ComparisonTable, MatchReport};
use nfsar_core::simulate::{degrade, render_ideal};
use nfsar_core::solver::restore;
use nfsar_core::{ComplexImage, ImagingGeometry, PsfBank, RestorationResult, SceneSpec, VariantDictionary};

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub lambda_rel: Option<f64>,
    pub lambda_reg: f64,
    pub iterations: usize,
    pub converged: bool,
    pub mean_amplitude_error_db: Option<f64>,
    pub misses: usize,
    pub false_alarms: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodOutcome {
    pub method: String,
    pub sweep: Vec<SweepPoint>,
    pub chosen: Option<usize>,
    pub error: Option<String>,
    pub report: Option<MatchReport>,
    #[serde(skip)]
    pub result: Option<RestorationResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchManifest {
    pub scene: String,
    pub scatterers: usize,
    pub seed: u64,
    pub noise_enabled: bool,
    pub clutter_power_db: Option<f64>,
    pub geometry: ImagingGeometry,
    pub psf_patches: usize,
    pub gate_radius_m: f64,
    pub extract_min_level_db: f64,
    pub config: RunConfig,
    pub methods: Vec<MethodOutcome>,
}

pub struct BenchOutcome {
    pub manifest: BenchManifest,
    pub table: ComparisonTable,
    pub degraded: ComplexImage,
}

impl BenchOutcome {
    pub fn method(&self, name: &str) -> Option<&MethodOutcome> {
        self.manifest.methods.iter().find(|m| m.method == name)
    }
}

/// Fewer misses first, then lower mean amplitude error.
fn better(candidate: &SweepPoint, incumbent: &SweepPoint) -> bool {
    let err = |p: &SweepPoint| p.mean_amplitude_error_db.unwrap_or(f64::INFINITY);
    (candidate.misses, err(candidate)) < (incumbent.misses, err(incumbent))
        && (candidate.misses < incumbent.misses || err(candidate) < err(incumbent))
}

fn evaluate(
    mut result: RestorationResult,
    lambda_rel: Option<f64>,
    scene: &SceneSpec,
    config: &RunConfig,
    gate: f64,
) -> (SweepPoint, MatchReport, RestorationResult) {
    result.extract(config.metrics.extract_min_level_db);
    let report = match_scatterers(&result.scatterers, scene, gate);
    let point = SweepPoint {
        lambda_rel,
        lambda_reg: result.lambda_reg,
        iterations: result.iterations,
        converged: result.converged,
        mean_amplitude_error_db: report.mean_amplitude_error_db,
        misses: report.misses.len(),
        false_alarms: report.false_alarms.len(),
    };
    (point, report, result)
}

fn sweep_method(
    method: &str,
    grid: &[f64],
    scene: &SceneSpec,
    config: &RunConfig,
    gate: f64,
    mut run: impl FnMut(f64) -> nfsar_core::Result<RestorationResult>,
) -> MethodOutcome {
    let mut outcome = MethodOutcome {
        method: method.into(),
        sweep: Vec::new(),
        chosen: None,
        error: None,
        report: None,
        result: None,
    };
    for &rel in grid {
        match run(rel) {
            Ok(result) => {
                let (point, report, result) = evaluate(result, Some(rel), scene, config, gate);
                let take = match outcome.chosen {
                    None => true,
                    Some(i) => better(&point, &outcome.sweep[i]),
                };
                outcome.sweep.push(point);
                if take {
                    outcome.chosen = Some(outcome.sweep.len() - 1);
                    outcome.report = Some(report);
                    outcome.result = Some(result);
                }
            }
            Err(e) => {
                outcome.error = Some(format!("lambda fraction {rel}: {e}"));
            }
        }
    }
    outcome
}

/// Runs the comparison on `scene` and writes artifacts into `out_dir` when
/// given.
pub fn run_bench(
    config: &RunConfig,
    geometry: &ImagingGeometry,
    scene: &SceneSpec,
    out_dir: Option<&Path>,
) -> Result<BenchOutcome> {
    let bank = PsfBank::build(geometry, config.psf.quantization(), config.psf.truncation())
        .context("building PSF bank")?;
    let noise = config.noise.to_spec(scene, config.seed);
    let ideal = render_ideal(scene, geometry)?;
    let degraded = degrade(scene, geometry, &bank, noise.as_ref())?;
    let gate = config.metrics.gate_radius(geometry);
    let lambda_grid = &config.bench.lambda_grid;

    let dict = VariantDictionary::new(&bank);
    let max_corr = dict.adjoint(&degraded)?.max_abs();
    let proposed = sweep_method("proposed", lambda_grid, scene, config, gate, |rel| {
        let cfg = config
            .solver
            .to_config(rel * max_corr, dict.max_squared_norm());
        restore(&degraded, &dict, &cfg)
    });

    let (ca, cr) = geometry.grid.center_cell();
    let op = InvariantOperator::new(geometry.grid, bank.lookup(ca, cr));
    let ista = match op.adjoint(&degraded) {
        Ok(corr) => {
            let max_corr = corr.max_abs();
            sweep_method("ISTA", lambda_grid, scene, config, gate, |rel| {
                ista_with_operator(&degraded, &op, &config.ista.to_config(rel * max_corr))
            })
        }
        Err(e) => MethodOutcome {
            method: "ISTA".into(),
            sweep: Vec::new(),
            chosen: None,
            error: Some(e.to_string()),
            report: None,
            result: None,
        },
    };

    // CLEAN has no regularization weight; it runs once with its own settings.
    let clean_cfg = config.clean.to_config(scene.len());
    let clean = sweep_method("CLEAN", &[f64::NAN], scene, config, gate, |_| {
        clean_restore(&degraded, &bank, &clean_cfg)
    });
    let mut clean = clean;
    for p in &mut clean.sweep {
        p.lambda_rel = None;
    }
    if let Some(e) = clean.error.as_mut() {
        *e = e.replace("lambda fraction NaN: ", "");
    }

    let methods = vec![proposed, ista, clean];
    let reports: Vec<(String, MatchReport)> = methods
        .iter()
        .filter_map(|m| m.report.clone().map(|r| (m.method.clone(), r)))
        .collect();
    let table = table1_report(&reports, geometry.lambda_rf());

    let manifest = BenchManifest {
        scene: scene.label.clone(),
        scatterers: scene.len(),
        seed: config.seed,
        noise_enabled: noise.is_some(),
        clutter_power_db: noise.map(|n| n.clutter_power_db),
        geometry: *geometry,
        psf_patches: bank.len(),
        gate_radius_m: gate,
        extract_min_level_db: config.metrics.extract_min_level_db,
        config: config.clone(),
        methods,
    };

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let range_db = config.metrics.heatmap_range_db;
        write_atomic(&dir.join("table.csv"), table.to_csv().as_bytes())?;
        write_atomic(&dir.join("table.txt"), table.to_text().as_bytes())?;
        write_nfsar1(&dir.join("degraded.nfsar"), &degraded)?;
        write_atomic(&dir.join("ideal.pgm"), &image_pgm(&ideal, range_db))?;
        write_atomic(&dir.join("degraded.pgm"), &image_pgm(&degraded, range_db))?;
        let mut sweep_csv = String::from(
            "method,lambda_rel,lambda_reg,iterations,converged,mean_amplitude_error_db,misses,false_alarms,chosen\n",
        );
        for m in &manifest.methods {
            if let Some(result) = &m.result {
                let stem = m.method.to_lowercase();
                write_atomic(
                    &dir.join(format!("{stem}.pgm")),
                    &image_pgm(&result.coefficients, range_db),
                )?;
                write_nfsar1(&dir.join(format!("{stem}_coefficients.nfsar")), &result.coefficients)?;
            }
            for (i, p) in m.sweep.iter().enumerate() {
                sweep_csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    m.method,
                    p.lambda_rel.map(csv_number).unwrap_or_else(|| "NA".into()),
                    csv_number(p.lambda_reg),
                    p.iterations,
                    p.converged,
                    p.mean_amplitude_error_db
                        .map(csv_number)
                        .unwrap_or_else(|| "NA".into()),
                    p.misses,
                    p.false_alarms,
                    m.chosen == Some(i)
                ));
            }
        }
        write_atomic(&dir.join("sweep.csv"), sweep_csv.as_bytes())?;
        let json = serde_json::to_string_pretty(&manifest)?;
        write_atomic(&dir.join("manifest.json"), json.as_bytes())?;
    }

    Ok(BenchOutcome {
        manifest,
        table,
        degraded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(misses: usize, err: Option<f64>) -> SweepPoint {
        SweepPoint {
            lambda_rel: Some(0.1),
            lambda_reg: 0.1,
            iterations: 1,
            converged: true,
            mean_amplitude_error_db: err,
            misses,
            false_alarms: 0,
        }
    }

    #[test]
    fn selection_prefers_detections_then_error() {
        assert!(better(&point(0, Some(1.0)), &point(1, Some(0.1))));
        assert!(!better(&point(1, Some(0.1)), &point(0, Some(1.0))));
        assert!(better(&point(0, Some(0.5)), &point(0, Some(1.0))));
        assert!(!better(&point(0, Some(1.0)), &point(0, Some(1.0))));
        assert!(better(&point(0, Some(1.0)), &point(0, None)));
    }
}
