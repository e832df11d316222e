//! File-level orchestration of the `fit`, `predict`, `cv` and `simulate`
//! subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{cross_validate, in_sample_roc, make_cv_plan, CvResult, RocResult};
use crate::gmrf::AdjacencyGraph;
use crate::laplace::{fit, FitResult, Marginal};
use crate::model::{
    assemble_model, resolve_effects, CovariateCatalog, CovariateDecl, CovariateRole, EffectKind,
    EffectSpec, HyperSpec, PixelTable, Preset, DEFAULT_CELL_AREA,
};
use crate::predict::{predict_surface, training_surface, Estimator, PredictionSurface};
use crate::sim::{simulate_dataset, SimSpec};

/// Count probabilities `P(N = k)` written per pixel for `k = 0..=COUNT_COLUMNS`.
const COUNT_COLUMNS: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Fit,
    Predict,
    Cv,
    Simulate,
}

impl std::fmt::Display for Command {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Command::Fit => "fit",
            Command::Predict => "predict",
            Command::Cv => "cv",
            Command::Simulate => "simulate",
        })
    }
}

/// Contents of the `--config` JSON document. Every field is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub preset: Option<Preset>,
    /// Explicit effect list; takes precedence over any preset.
    #[serde(default)]
    pub effects: Option<Vec<EffectSpec>>,
    /// Covariate roles used by presets. Inferred from the pixel file when
    /// absent: every covariate continuous, names containing "aspect" cyclic.
    #[serde(default)]
    pub covariates: Option<Vec<CovariateDecl>>,
    #[serde(default)]
    pub nonlinear_subset: Option<Vec<String>>,
    #[serde(default)]
    pub hyper: Option<HyperSpec>,
    #[serde(default)]
    pub cell_area: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub estimator: Option<Estimator>,
    /// Label used in `auc_summary.csv`.
    #[serde(default)]
    pub model_name: Option<String>,
    #[serde(default)]
    pub simulation: Option<SimSpec>,
}

impl ModelConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Everything one invocation needs, as parsed from the command line.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub pixels: Option<PathBuf>,
    pub adjacency: Option<PathBuf>,
    pub config: Option<PathBuf>,
    /// Saved `fit.json` for `predict`.
    pub fit: Option<PathBuf>,
    pub preset: Option<Preset>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub estimator: Option<Estimator>,
    pub force: bool,
}

impl RunConfig {
    pub fn new(command: Command, out: impl Into<PathBuf>) -> Self {
        RunConfig {
            command,
            pixels: None,
            adjacency: None,
            config: None,
            fit: None,
            preset: None,
            out: out.into(),
            seed: None,
            threads: None,
            estimator: None,
            force: false,
        }
    }
}

/// Summary of a completed run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: Command,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub files: Vec<String>,
    pub warnings: Vec<String>,
}

/// Runs one subcommand, using a thread pool of `--threads` workers.
pub fn run(config: &RunConfig) -> Result<Manifest> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let threads = pool.current_num_threads();
    pool.install(|| run_in_pool(config, threads))
}

struct Resolved {
    model: ModelConfig,
    seed: u64,
    estimator: Estimator,
    cell_area: f64,
}

fn resolve(config: &RunConfig) -> Result<Resolved> {
    let model = match &config.config {
        Some(p) => ModelConfig::load(p)?,
        None => ModelConfig::default(),
    };
    let cell_area = model.cell_area.unwrap_or(DEFAULT_CELL_AREA);
    if !(cell_area > 0.0) || !cell_area.is_finite() {
        return Err(Error::Config("cell_area must be positive".into()));
    }
    Ok(Resolved {
        seed: config.seed.or(model.seed).unwrap_or(0),
        estimator: config.estimator.or(model.estimator).unwrap_or_default(),
        cell_area,
        model,
    })
}

fn run_in_pool(config: &RunConfig, threads: usize) -> Result<Manifest> {
    let start = Instant::now();
    let resolved = resolve(config)?;
    let (outputs, hash_input, warnings) = match config.command {
        Command::Fit => run_fit(config, &resolved)?,
        Command::Predict => run_predict(config, &resolved)?,
        Command::Cv => run_cv(config, &resolved)?,
        Command::Simulate => run_simulate(config, &resolved)?,
    };

    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(&hash_input)?);
    let mut manifest = Manifest {
        command: config.command,
        config_hash: hex::encode(hasher.finalize()),
        seed: resolved.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        threads,
        wall_time_seconds: 0.0,
        files: outputs.iter().map(|o| o.name.clone()).collect(),
        warnings,
    };
    manifest.files.push("manifest.json".into());
    let mut all = outputs;
    all.push(Output::new("manifest.json", Vec::new()));
    write_outputs(&config.out, &all, config.force, |name| {
        if name == "manifest.json" {
            manifest.wall_time_seconds = start.elapsed().as_secs_f64();
            let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
            bytes.push(b'\n');
            Some(bytes)
        } else {
            None
        }
    })?;
    Ok(manifest)
}

struct Output {
    name: String,
    bytes: Vec<u8>,
}

impl Output {
    fn new(name: impl Into<String>, bytes: Vec<u8>) -> Self {
        Output {
            name: name.into(),
            bytes,
        }
    }
}

/// Refuses to overwrite anything unless `force`, then writes every file.
fn write_outputs(
    dir: &Path,
    outputs: &[Output],
    force: bool,
    mut late: impl FnMut(&str) -> Option<Vec<u8>>,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    if !force {
        for o in outputs {
            let path = dir.join(&o.name);
            if path.exists() {
                return Err(Error::OutputExists(path));
            }
        }
    }
    for o in outputs {
        let bytes = late(&o.name).unwrap_or_else(|| o.bytes.clone());
        fs::write(dir.join(&o.name), bytes)?;
    }
    Ok(())
}

/// Ten significant digits.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.9e}")
    } else if v.is_nan() {
        "NA".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_error)?;
    for r in rows {
        w.write_record(&r).map_err(csv_error)?;
    }
    w.into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn require<'a>(path: &'a Option<PathBuf>, flag: &str, command: Command) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::Config(format!("`{command}` needs {flag}")))
}

fn file_digest(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Infers covariate roles from the pixel columns.
fn default_catalog(pixels: &PixelTable, model: &ModelConfig) -> CovariateCatalog {
    let covariates = model.covariates.clone().unwrap_or_else(|| {
        pixels
            .covariate_names()
            .iter()
            .map(|name| CovariateDecl {
                name: name.clone(),
                role: if name.to_ascii_lowercase().contains("aspect") {
                    CovariateRole::Cyclic
                } else {
                    CovariateRole::Continuous
                },
            })
            .collect()
    });
    CovariateCatalog {
        covariates,
        nonlinear_subset: model
            .nonlinear_subset
            .clone()
            .unwrap_or_else(crate::model::effects::default_nonlinear_subset),
    }
}

struct ModelInputs {
    pixels: PixelTable,
    graph: Option<AdjacencyGraph>,
    effects: Vec<EffectSpec>,
    hyper: HyperSpec,
    name: String,
    digests: Vec<String>,
}

fn model_inputs(config: &RunConfig, r: &Resolved) -> Result<ModelInputs> {
    let pixel_path = require(&config.pixels, "--pixels", config.command)?;
    let pixels = PixelTable::load(pixel_path, r.cell_area)?;
    log::info!(
        "loaded {} pixels with covariates {:?}",
        pixels.len(),
        pixels.covariate_names()
    );
    let preset = config.preset.or(r.model.preset);
    let effects = match (&r.model.effects, preset) {
        (Some(e), _) => e.clone(),
        (None, Some(p)) => p.effects(&default_catalog(&pixels, &r.model)),
        (None, None) => {
            return Err(Error::Config(
                "no model given: pass --preset or list effects in the config".into(),
            ))
        }
    };
    let effects = resolve_effects(&pixels, &effects)?;
    let needs_graph = effects.iter().any(|e| e.kind == EffectKind::CarSpatial);
    let mut digests = vec![file_digest(pixel_path)?];
    let graph = match (&config.adjacency, needs_graph) {
        (Some(p), _) => {
            let n_units = pixels.unit_ids().iter().max().map(|m| m + 1);
            digests.push(file_digest(p)?);
            Some(AdjacencyGraph::load(p, n_units)?)
        }
        (None, true) => return Err(Error::Config("the spatial effect needs --adjacency".into())),
        (None, false) => None,
    };
    let hyper = r
        .model
        .hyper
        .clone()
        .unwrap_or_else(|| HyperSpec::default_for(&effects));
    let name = r
        .model
        .model_name
        .clone()
        .or_else(|| preset.map(|p| p.to_string()))
        .unwrap_or_else(|| "custom".into());
    Ok(ModelInputs {
        pixels,
        graph,
        effects,
        hyper,
        name,
        digests,
    })
}

#[derive(Serialize)]
struct HashInput<'a> {
    command: Command,
    effects: Option<&'a [EffectSpec]>,
    hyper: Option<&'a HyperSpec>,
    cell_area: f64,
    seed: Option<u64>,
    estimator: Option<Estimator>,
    inputs: Vec<String>,
    simulation: Option<&'a SimSpec>,
}

type Outcome = (Vec<Output>, serde_json::Value, Vec<String>);

fn hash_value(h: HashInput<'_>) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(h)?)
}

fn run_fit(config: &RunConfig, r: &Resolved) -> Result<Outcome> {
    let inputs = model_inputs(config, r)?;
    let model = assemble_model(
        &inputs.pixels,
        inputs.graph.as_ref(),
        &inputs.effects,
        &inputs.hyper,
    )?;
    let fitted = fit(&model)?;
    let surface = training_surface(&fitted, &inputs.pixels, r.estimator)?;
    let mut warnings = fitted.warnings.clone();
    let (pixel_roc, unit_roc) = in_sample_curves(&surface.lambda, &inputs.pixels, &mut warnings);

    let mut outputs = effect_outputs(&fitted)?;
    outputs.extend(surface_outputs(&surface)?);
    let curves: Vec<(&str, &str, &RocResult)> = [("pixel", &pixel_roc), ("unit", &unit_roc)]
        .into_iter()
        .filter_map(|(level, roc)| roc.as_ref().map(|r| (level, "in_sample", r)))
        .collect();
    outputs.push(Output::new("roc.csv", roc_csv(&curves)?));
    outputs.push(Output::new(
        "auc_summary.csv",
        auc_summary_csv(
            &inputs.name,
            &[
                ("pixel", auc_of(&pixel_roc), None),
                ("unit", auc_of(&unit_roc), None),
            ],
        )?,
    ));
    let mut fit_json = serde_json::to_vec(&fitted)?;
    fit_json.push(b'\n');
    outputs.push(Output::new("fit.json", fit_json));

    let hash = hash_value(HashInput {
        command: config.command,
        effects: Some(&inputs.effects),
        hyper: Some(&inputs.hyper),
        cell_area: r.cell_area,
        seed: None,
        estimator: Some(r.estimator),
        inputs: inputs.digests,
        simulation: None,
    })?;
    Ok((outputs, hash, warnings))
}

fn auc_of(roc: &Option<RocResult>) -> Option<f64> {
    roc.as_ref().map(|r| r.auc)
}

fn in_sample_curves(
    lambda: &[f64],
    pixels: &PixelTable,
    warnings: &mut Vec<String>,
) -> (Option<RocResult>, Option<RocResult>) {
    let (pixel, unit) = in_sample_roc(lambda, pixels);
    let mut keep = |level: &str, r: Result<RocResult>| match r {
        Ok(r) => Some(r),
        Err(e) => {
            let msg = format!("no in-sample {level}-level ROC: {e}");
            log::warn!("{msg}");
            warnings.push(msg);
            None
        }
    };
    (keep("pixel", pixel), keep("unit", unit))
}

fn run_predict(config: &RunConfig, r: &Resolved) -> Result<Outcome> {
    let fit_path = require(&config.fit, "--fit", config.command)?;
    let pixel_path = require(&config.pixels, "--pixels", config.command)?;
    let fitted: FitResult = serde_json::from_slice(&fs::read(fit_path)?)?;
    let pixels = PixelTable::load(pixel_path, fitted.layout.cell_area)?;
    let surface = predict_surface(&fitted, &pixels, r.estimator)?;
    let hash = hash_value(HashInput {
        command: config.command,
        effects: None,
        hyper: None,
        cell_area: fitted.layout.cell_area,
        seed: None,
        estimator: Some(r.estimator),
        inputs: vec![file_digest(fit_path)?, file_digest(pixel_path)?],
        simulation: None,
    })?;
    Ok((surface_outputs(&surface)?, hash, Vec::new()))
}

fn run_cv(config: &RunConfig, r: &Resolved) -> Result<Outcome> {
    let inputs = model_inputs(config, r)?;
    let plan = make_cv_plan(inputs.pixels.unit_ids(), r.seed)?;
    let cv = cross_validate(
        &inputs.pixels,
        inputs.graph.as_ref(),
        &inputs.effects,
        &inputs.hyper,
        &plan,
        r.estimator,
    )?;
    let model = assemble_model(
        &inputs.pixels,
        inputs.graph.as_ref(),
        &inputs.effects,
        &inputs.hyper,
    )?;
    let fitted = fit(&model)?;
    let surface = training_surface(&fitted, &inputs.pixels, r.estimator)?;
    let mut warnings: Vec<String> = cv.folds.iter().flat_map(|f| f.warnings.clone()).collect();
    warnings.extend(cv.warnings.iter().cloned());
    warnings.extend(fitted.warnings.iter().cloned());
    let (pixel_in, unit_in) = in_sample_curves(&surface.lambda, &inputs.pixels, &mut warnings);

    let mut curves: Vec<(&str, String, &RocResult)> = Vec::new();
    if let Some(roc) = &cv.pooled_pixel {
        curves.push(("pixel", "pooled".into(), roc));
    }
    if let Some(roc) = &cv.pooled_unit {
        curves.push(("unit", "pooled".into(), roc));
    }
    for f in &cv.folds {
        if let Some(roc) = &f.pixel_roc {
            curves.push(("pixel", f.fold.to_string(), roc));
        }
        if let Some(roc) = &f.unit_roc {
            curves.push(("unit", f.fold.to_string(), roc));
        }
    }
    let curve_refs: Vec<(&str, &str, &RocResult)> = curves
        .iter()
        .map(|(l, f, r)| (*l, f.as_str(), *r))
        .collect();

    let outputs = vec![
        Output::new("roc.csv", roc_csv(&curve_refs)?),
        Output::new(
            "auc_summary.csv",
            auc_summary_csv(
                &inputs.name,
                &[
                    ("pixel", auc_of(&pixel_in), auc_of(&cv.pooled_pixel)),
                    ("unit", auc_of(&unit_in), auc_of(&cv.pooled_unit)),
                ],
            )?,
        ),
        Output::new("auc_folds.csv", auc_folds_csv(&cv)?),
        Output::new("cv_pixels.csv", cv_pixels_csv(&cv, &inputs.pixels)?),
    ];
    let hash = hash_value(HashInput {
        command: config.command,
        effects: Some(&inputs.effects),
        hyper: Some(&inputs.hyper),
        cell_area: r.cell_area,
        seed: Some(r.seed),
        estimator: Some(r.estimator),
        inputs: inputs.digests,
        simulation: None,
    })?;
    Ok((outputs, hash, warnings))
}

fn run_simulate(config: &RunConfig, r: &Resolved) -> Result<Outcome> {
    let spec = r.model.simulation.as_ref().ok_or_else(|| {
        Error::Config("`simulate` needs a `simulation` section in --config".into())
    })?;
    let data = simulate_dataset(spec, r.seed)?;
    let mut pixels = Vec::new();
    data.pixels.write_csv(&mut pixels)?;
    let mut adjacency = Vec::new();
    data.graph.write_csv(&mut adjacency)?;
    let mut truth = serde_json::to_vec_pretty(&data.truth)?;
    truth.push(b'\n');
    let hash = hash_value(HashInput {
        command: config.command,
        effects: None,
        hyper: None,
        cell_area: spec.cell_area,
        seed: Some(r.seed),
        estimator: None,
        inputs: Vec::new(),
        simulation: Some(spec),
    })?;
    Ok((
        vec![
            Output::new("pixels.csv", pixels),
            Output::new("adjacency.csv", adjacency),
            Output::new("truth.json", truth),
        ],
        hash,
        Vec::new(),
    ))
}

fn marginal_row(label: String, m: &Marginal) -> Vec<String> {
    vec![
        label,
        format_float(m.mean),
        format_float(m.sd),
        format_float(m.q025()),
        format_float(m.q975()),
    ]
}

fn effect_outputs(fitted: &FitResult) -> Result<Vec<Output>> {
    let mut outputs = Vec::new();
    outputs.push(Output::new(
        "hyperparameter.csv",
        csv_bytes(
            &["theta", "log_posterior", "weight"],
            fitted.grid.iter().map(|g| {
                vec![
                    g.theta.map_or_else(|| "NA".to_string(), format_float),
                    format_float(g.log_posterior),
                    format_float(g.weight),
                ]
            }),
        )?,
    ));

    let mut fixed = Vec::new();
    for b in &fitted.layout.blocks {
        let marginals = &fitted.latent[b.range()];
        match b.kind {
            EffectKind::Intercept | EffectKind::Linear => {
                fixed.push(marginal_row(b.name.clone(), &marginals[0]));
            }
            EffectKind::Categorical | EffectKind::Rw1 | EffectKind::Rw1Cyclic => {
                outputs.push(Output::new(
                    format!("random_effect_{}.csv", b.name),
                    csv_bytes(
                        &["level", "mean", "sd", "q025", "q975"],
                        marginals
                            .iter()
                            .enumerate()
                            .map(|(k, m)| marginal_row(k.to_string(), m)),
                    )?,
                ));
            }
            EffectKind::CarSpatial => {
                outputs.push(Output::new(
                    "spatial_effect.csv",
                    csv_bytes(
                        &["unit_id", "mean", "sd", "q025", "q975"],
                        marginals
                            .iter()
                            .enumerate()
                            .map(|(k, m)| marginal_row(k.to_string(), m)),
                    )?,
                ));
            }
        }
    }
    outputs.insert(
        1,
        Output::new(
            "fixed_effects.csv",
            csv_bytes(&["effect", "mean", "sd", "q025", "q975"], fixed)?,
        ),
    );
    Ok(outputs)
}

fn surface_outputs(surface: &PredictionSurface) -> Result<Vec<Output>> {
    let mut header = vec!["pixel_id".to_string(), "lambda".into(), "p".into()];
    header.extend((0..=COUNT_COLUMNS).map(|k| format!("k{k}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let counts = surface.count_table(COUNT_COLUMNS);
    let pixel_rows = surface
        .pixel_id
        .iter()
        .zip(&surface.lambda)
        .zip(&surface.p)
        .zip(&counts)
        .map(|(((id, &l), &p), ks)| {
            let mut row = vec![id.to_string(), format_float(l), format_float(p)];
            row.extend(ks.iter().map(|&v| format_float(v)));
            row
        });
    let units = &surface.units;
    let unit_rows = units
        .unit_id
        .iter()
        .zip(&units.lambda)
        .zip(&units.p)
        .map(|((u, &l), &p)| vec![u.to_string(), format_float(l), format_float(p)]);
    Ok(vec![
        Output::new("intensity_pixels.csv", csv_bytes(&header_refs, pixel_rows)?),
        Output::new(
            "intensity_units.csv",
            csv_bytes(&["unit_id", "lambda", "p"], unit_rows)?,
        ),
    ])
}

fn roc_csv(curves: &[(&str, &str, &RocResult)]) -> Result<Vec<u8>> {
    let rows = curves.iter().flat_map(|(level, fold, roc)| {
        roc.fpr.iter().zip(&roc.tpr).map(move |(&f, &t)| {
            vec![
                level.to_string(),
                fold.to_string(),
                format_float(f),
                format_float(t),
            ]
        })
    });
    csv_bytes(&["level", "fold", "fpr", "tpr"], rows)
}

fn auc_summary_csv(model: &str, rows: &[(&str, Option<f64>, Option<f64>)]) -> Result<Vec<u8>> {
    csv_bytes(
        &["model", "level", "in_sample_auc", "cv_auc"],
        rows.iter().map(|(level, ins, cv)| {
            vec![
                model.to_string(),
                level.to_string(),
                ins.map_or_else(|| "NA".to_string(), format_float),
                cv.map_or_else(|| "NA".to_string(), format_float),
            ]
        }),
    )
}

fn auc_folds_csv(cv: &CvResult) -> Result<Vec<u8>> {
    let mut rows = Vec::new();
    for f in &cv.folds {
        for (level, roc) in [("pixel", &f.pixel_roc), ("unit", &f.unit_roc)] {
            rows.push(vec![
                level.to_string(),
                f.fold.to_string(),
                roc.as_ref()
                    .map_or_else(|| "NA".to_string(), |r| format_float(r.auc)),
            ]);
        }
    }
    for (level, unit_level) in [("pixel", false), ("unit", true)] {
        rows.push(vec![
            level.to_string(),
            "mean".to_string(),
            cv.mean_fold_auc(unit_level)
                .map_or_else(|| "NA".to_string(), format_float),
        ]);
    }
    csv_bytes(&["level", "fold", "auc"], rows)
}

fn cv_pixels_csv(cv: &CvResult, pixels: &PixelTable) -> Result<Vec<u8>> {
    let mut rows = Vec::new();
    for f in &cv.folds {
        for ((&i, &l), &label) in f.pixels.iter().zip(&f.pixel_lambda).zip(&f.pixel_labels) {
            rows.push((
                pixels.pixel_ids()[i],
                vec![
                    pixels.pixel_ids()[i].to_string(),
                    pixels.unit_ids()[i].to_string(),
                    f.fold.to_string(),
                    format_float(l),
                    u8::from(label).to_string(),
                ],
            ));
        }
    }
    rows.sort_by_key(|r| r.0);
    csv_bytes(
        &["pixel_id", "unit_id", "fold", "lambda", "event"],
        rows.into_iter().map(|r| r.1),
    )
}
