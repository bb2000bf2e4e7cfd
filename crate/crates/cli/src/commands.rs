//! Subcommand bodies. Each reads its inputs through [`Artifacts`], computes
//! everything in memory and queues its outputs; `main` commits them.

use std::path::{Path, PathBuf};

use serde::Serialize;
use zonal_kriging::classify::ClassModel;
use zonal_kriging::datamodel::{
    format_float, read_csv, read_labeled_csv, read_labeled_queries, read_queries, QueryTable,
};
use zonal_kriging::kriging1d::DriftMethod;
use zonal_kriging::simulate::{simulate_zonal, SimSpec};
use zonal_kriging::variogram::{empirical_marginal_variogram, fit_variogram, FitReport};
use zonal_kriging::zonal::{rank_independence, AxisOrigin, IndependenceScore};
use zonal_kriging::{
    ClassifierConfig, Dataset, DriftCoefficients, Error, VariogramModel, ZonalModel,
};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::Artifacts;

/// Queues CSV rows as one output file.
pub(crate) fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_core = |e: csv::Error| CliError::Core(Error::Csv(e));
    w.write_record(header).map_err(to_core)?;
    for r in rows {
        w.write_record(r).map_err(to_core)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Usage(format!("csv buffer: {e}")))
}

/// `base` with its extension replaced by `suffix`, unless the user chose a path.
fn sibling(chosen: &Option<PathBuf>, base: &Path, suffix: &str) -> PathBuf {
    chosen
        .clone()
        .unwrap_or_else(|| base.with_extension(suffix))
}

fn is_blank(bytes: &[u8]) -> bool {
    bytes.iter().all(u8::is_ascii_whitespace)
}

pub(crate) fn load_dataset(art: &mut Artifacts, cfg: &RunConfig) -> Result<Dataset, CliError> {
    let path = RunConfig::require(&cfg.data, "data")?;
    let bytes = art.read(path)?;
    Ok(read_csv(&bytes[..], &cfg.target_or("y"))?)
}

/// Query points in model axis order, plus ground truth when the file has
/// the training target column. A zero-byte file means no queries.
pub(crate) fn load_queries(
    art: &mut Artifacts,
    path: &Path,
    training: &Dataset,
) -> Result<QueryTable, CliError> {
    let bytes = art.read(path)?;
    if is_blank(&bytes) {
        return Ok(QueryTable::default());
    }
    Ok(read_queries(
        &bytes[..],
        training.axis_names(),
        Some(training.target_name()),
    )?)
}

#[derive(Serialize)]
struct AxisSummary<'a> {
    axis: usize,
    name: &'a str,
    /// Structure of the weighted contribution w²γ, as fitted.
    model: VariogramModel,
    weight: f64,
    origin: &'a AxisOrigin,
    drift: &'a DriftCoefficients,
}

fn axis_summaries(zm: &ZonalModel) -> Vec<AxisSummary<'_>> {
    (0..zm.d())
        .map(|s| AxisSummary {
            axis: s,
            name: &zm.training.axis_names()[s],
            model: zm.effective_model(s),
            weight: zm.axis_weights.get(s),
            origin: &zm.axis_origins[s],
            drift: &zm.axis_drifts[s],
        })
        .collect()
}

fn independence(ds: &Dataset) -> Result<Vec<IndependenceScore>, CliError> {
    match rank_independence(ds) {
        Ok(r) => Ok(r),
        Err(Error::TooFewRows { .. }) => Ok(Vec::new()),
        Err(e) => Err(e.into()),
    }
}

#[derive(Serialize)]
struct FitDiagnostics {
    degenerate_axes: Vec<String>,
    /// Axes whose drift needed the exact solve for irregular nugget grids.
    increments_gls_axes: Vec<String>,
    /// Root mean square of estimate − target at the training points.
    in_sample_rmse: f64,
    max_drift_weight_deficit: f64,
    /// max |Σλ − 1| over the training points.
    max_weight_sum_gap: f64,
}

#[derive(Serialize)]
struct FitSummary<'a> {
    n: usize,
    d: usize,
    target: &'a str,
    drift_order: usize,
    axes: Vec<AxisSummary<'a>>,
    independence: Vec<IndependenceScore>,
    diagnostics: FitDiagnostics,
}

fn axes_where(zm: &ZonalModel, keep: impl Fn(usize) -> bool) -> Vec<String> {
    (0..zm.d())
        .filter(|&s| keep(s))
        .map(|s| zm.training.axis_names()[s].clone())
        .collect()
}

pub fn fit(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let mut art = Artifacts::default();
    let model_path = RunConfig::require(&cfg.model, "model")?;
    let ds = load_dataset(&mut art, cfg)?;
    let zm = ZonalModel::fit(&ds, &cfg.zonal)?;
    let points: Vec<Vec<f64>> = (0..ds.n()).map(|i| ds.point(i)).collect();
    let preds = zm.predictor()?.predict_batch(&points)?;
    let sse: f64 = preds
        .iter()
        .zip(ds.y())
        .map(|(p, y)| (p.estimate - y).powi(2))
        .sum();
    let diagnostics = FitDiagnostics {
        degenerate_axes: axes_where(&zm, |s| zm.axis_origins[s] == AxisOrigin::Degenerate),
        increments_gls_axes: axes_where(&zm, |s| {
            zm.axis_drifts[s].method == DriftMethod::IncrementsGls
        }),
        in_sample_rmse: (sse / ds.n() as f64).sqrt(),
        max_drift_weight_deficit: preds
            .iter()
            .map(|p| p.diagnostics.drift_weight_deficit)
            .fold(0.0, f64::max),
        max_weight_sum_gap: preds
            .iter()
            .map(|p| (p.diagnostics.weight_sum - 1.0).abs())
            .fold(0.0, f64::max),
    };
    let summary = FitSummary {
        n: ds.n(),
        d: ds.d(),
        target: ds.target_name(),
        drift_order: zm.drift_order.degree(),
        axes: axis_summaries(&zm),
        independence: independence(&ds)?,
        diagnostics,
    };
    let mut model = zm.to_json()?.into_bytes();
    model.push(b'\n');
    art.add(model_path, model);
    art.add_json(sibling(&cfg.report, model_path, "report.json"), &summary)?;
    Ok(art)
}

pub fn predict(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let mut art = Artifacts::default();
    let model_path = RunConfig::require(&cfg.model, "model")?;
    let query_path = RunConfig::require(&cfg.queries, "queries")?;
    let output = RunConfig::require(&cfg.output, "output")?;
    let zm = ZonalModel::from_json(&art.read_text(model_path)?)?;
    let points = load_queries(&mut art, query_path, &zm.training)?.points;
    let preds = zm.predictor()?.predict_batch(&points)?;
    let mut header: Vec<String> = ["id", "estimate", "variance", "drift"]
        .map(String::from)
        .to_vec();
    header.extend(
        zm.training
            .axis_names()
            .iter()
            .map(|a| format!("component_{a}")),
    );
    let rows: Vec<Vec<String>> = preds
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut row = vec![
                i.to_string(),
                format_float(p.estimate),
                format_float(p.variance),
                format_float(p.drift),
            ];
            row.extend(p.components.iter().map(|&c| format_float(c)));
            row
        })
        .collect();
    art.add(output, csv_bytes(&header, &rows)?);
    Ok(art)
}

#[derive(Serialize)]
struct VariogramAxis<'a> {
    axis: usize,
    name: &'a str,
    axis_range: f64,
    model: Option<VariogramModel>,
    fit: Option<FitReport>,
    /// Why no model was fitted, when none was.
    note: Option<String>,
}

pub fn variogram(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let mut art = Artifacts::default();
    let output = RunConfig::require(&cfg.output, "output")?;
    let ds = load_dataset(&mut art, cfg)?;
    let z = &cfg.zonal;
    let mut rows = Vec::new();
    let mut axes = Vec::new();
    for s in 0..ds.d() {
        let name = ds.axis_names()[s].as_str();
        let ev = empirical_marginal_variogram(&ds, s, z.n_bins, z.max_lag_fraction)?;
        for k in 0..ev.lags.len() {
            rows.push(vec![
                name.to_owned(),
                format_float(ev.lags[k]),
                format_float(ev.gamma_hat[k]),
                ev.counts[k].to_string(),
            ]);
        }
        let (model, fit, note) = match fit_variogram(&ev, &z.fit) {
            Ok((m, r)) => (Some(m), Some(r), None),
            Err(e @ (Error::DegenerateFit | Error::InvalidInput(_))) => {
                (None, None, Some(e.to_string()))
            }
            Err(e) => return Err(e.into()),
        };
        axes.push(VariogramAxis {
            axis: s,
            name,
            axis_range: ev.axis_range,
            model,
            fit,
            note,
        });
    }
    let header = ["axis", "lag", "gamma_hat", "count"].map(String::from);
    art.add(output, csv_bytes(&header, &rows)?);
    art.add_json(sibling(&cfg.report, output, "fit.json"), &axes)?;
    Ok(art)
}

#[derive(Serialize)]
struct Truth<'a> {
    spec: &'a SimSpec,
    /// Drift surface at each sample, in row order.
    drift: &'a [f64],
    /// Unweighted residual per axis and sample.
    residuals: &'a [Vec<f64>],
}

pub fn simulate(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let mut art = Artifacts::default();
    let spec_path = RunConfig::require(&cfg.spec, "spec")?;
    let output = RunConfig::require(&cfg.output, "output")?;
    let mut spec: SimSpec = serde_json::from_slice(&art.read(spec_path)?)
        .map_err(|e| CliError::Usage(format!("spec {}: {e}", spec_path.display())))?;
    if let Some(seed) = cfg.seed {
        spec.seed = seed;
    }
    if let Some(n) = cfg.n {
        spec.n = n;
    }
    if let Some(t) = &cfg.target {
        spec.target_name = t.clone();
    }
    let sim = simulate_zonal(&spec)?;
    let mut csv = Vec::new();
    sim.dataset.write_csv(&mut csv)?;
    art.add(output, csv);
    art.add_json(
        sibling(&cfg.report, output, "truth.json"),
        &Truth {
            spec: &spec,
            drift: &sim.drift,
            residuals: &sim.residuals,
        },
    )?;
    art.seed = Some(spec.seed);
    Ok(art)
}

#[derive(Serialize)]
struct ClassSummary<'a> {
    name: &'a str,
    count: usize,
}

#[derive(Serialize)]
struct ClassFitSummary<'a> {
    n: usize,
    d: usize,
    classes: Vec<ClassSummary<'a>>,
    /// Indicator covariance matrix.
    k: &'a [Vec<f64>],
    axes: Vec<AxisSummary<'a>>,
    independence: Vec<IndependenceScore>,
    /// Share of training points whose predicted class is their label.
    in_sample_accuracy: f64,
}

pub fn classify_fit(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let mut art = Artifacts::default();
    let model_path = RunConfig::require(&cfg.model, "model")?;
    let data_path = RunConfig::require(&cfg.data, "data")?;
    let bytes = art.read(data_path)?;
    let ld = read_labeled_csv(&bytes[..], &cfg.target_or("class"))?;
    let cm = ClassModel::fit(
        &ld,
        &ClassifierConfig {
            zonal: cfg.zonal.clone(),
            pooling: cfg.pooling,
        },
    )?;
    let ds = &cm.zonal.training;
    let points: Vec<Vec<f64>> = (0..ds.n()).map(|i| ds.point(i)).collect();
    let preds = cm.predictor()?.predict_batch(&points)?;
    let hits = preds
        .iter()
        .zip(&cm.labels)
        .filter(|(p, &l)| p.class == l)
        .count();
    let summary = ClassFitSummary {
        n: ds.n(),
        d: ds.d(),
        classes: cm
            .class_names
            .iter()
            .enumerate()
            .map(|(p, name)| ClassSummary {
                name,
                count: cm.labels.iter().filter(|&&l| l == p).count(),
            })
            .collect(),
        k: &cm.k,
        axes: axis_summaries(&cm.zonal),
        independence: independence(ds)?,
        in_sample_accuracy: hits as f64 / ds.n() as f64,
    };
    let mut model = serde_json::to_vec_pretty(&cm).map_err(|e| CliError::Core(e.into()))?;
    model.push(b'\n');
    art.add(model_path, model);
    art.add_json(sibling(&cfg.report, model_path, "report.json"), &summary)?;
    Ok(art)
}

pub fn classify_predict(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let mut art = Artifacts::default();
    let model_path = RunConfig::require(&cfg.model, "model")?;
    let query_path = RunConfig::require(&cfg.queries, "queries")?;
    let output = RunConfig::require(&cfg.output, "output")?;
    let cm: ClassModel =
        serde_json::from_str(&art.read_text(model_path)?).map_err(|e| CliError::Core(e.into()))?;
    let predictor = cm.predictor()?;
    let training = &cm.zonal.training;
    let bytes = art.read(query_path)?;
    let (points, labels) = if is_blank(&bytes) {
        (Vec::new(), None)
    } else {
        read_labeled_queries(&bytes[..], training.axis_names(), training.target_name())?
    };
    let preds = predictor.predict_batch(&points)?;
    if let Some(labels) = labels {
        let hits = preds
            .iter()
            .zip(&labels)
            .filter(|(p, l)| &cm.class_names[p.class] == *l)
            .count();
        log::info!("accuracy on labeled queries: {hits}/{}", labels.len());
    }
    let mut header = vec!["id".to_owned()];
    header.extend(cm.class_names.iter().map(|c| format!("raw_{c}")));
    header.extend(cm.class_names.iter().map(|c| format!("clipped_{c}")));
    header.push("class".into());
    let rows: Vec<Vec<String>> = preds
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut row = vec![i.to_string()];
            row.extend(p.raw.iter().map(|&v| format_float(v)));
            row.extend(p.clipped.iter().map(|&v| format_float(v)));
            row.push(cm.class_names[p.class].clone());
            row
        })
        .collect();
    art.add(output, csv_bytes(&header, &rows)?);
    Ok(art)
}
