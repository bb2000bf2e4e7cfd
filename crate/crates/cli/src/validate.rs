//! Zonal predictor against the dense exact solver on the same structure.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use zonal_kriging::dense::{DenseKriging, DenseSolution};
use zonal_kriging::{Dataset, Error, Prediction, ZonalModel};

use crate::commands::{load_dataset, load_queries};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::Artifacts;

/// Queries probed for working-sill sensitivity.
const SILL_PROBES: usize = 20;

#[derive(Serialize)]
struct QueryRow {
    id: usize,
    zonal: f64,
    dense: f64,
    zonal_variance: f64,
    dense_variance: f64,
    truth: Option<f64>,
}

#[derive(Serialize)]
struct Agreement {
    max_abs_difference: f64,
    rms_difference: f64,
    tolerance: f64,
    /// Only meaningful for one axis, where both paths are the same estimator.
    within_tolerance: Option<bool>,
}

#[derive(Serialize)]
struct Accuracy {
    mse_zonal: f64,
    mse_dense: f64,
    /// Predicting every query with the training mean.
    mse_mean_baseline: f64,
    mse_ratio: f64,
    ratio_bound: f64,
    ratio_within_bound: bool,
}

#[derive(Serialize)]
struct Deficits {
    max_drift_weight_deficit: f64,
    max_zonal_weight_sum_gap: f64,
    max_dense_weight_sum_gap: f64,
}

#[derive(Serialize)]
struct SillSensitivity {
    shift: f64,
    max_abs_delta_nu_star: f64,
    max_abs_delta_zonal_estimate: f64,
    max_abs_delta_dense_lambda: f64,
    max_abs_delta_dense_estimate: f64,
}

#[derive(Serialize)]
struct Timing {
    zonal_setup_seconds: f64,
    zonal_predict_seconds: f64,
    dense_setup_seconds: f64,
    dense_predict_seconds: f64,
}

#[derive(Serialize)]
struct ScalingRow {
    n: usize,
    zonal_seconds: f64,
    dense_seconds: f64,
}

#[derive(Serialize)]
struct Report {
    n: usize,
    d: usize,
    n_queries: usize,
    agreement: Agreement,
    accuracy: Option<Accuracy>,
    deficits: Deficits,
    sill_sensitivity: Vec<SillSensitivity>,
    timing: Timing,
    scaling: Vec<ScalingRow>,
    queries: Vec<QueryRow>,
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn mse(estimates: impl Iterator<Item = f64>, truth: &[f64]) -> f64 {
    let sse: f64 = estimates.zip(truth).map(|(e, t)| (e - t).powi(2)).sum();
    sse / truth.len().max(1) as f64
}

fn dense_solver(
    zm: &ZonalModel,
    training: &Dataset,
    cfg: &RunConfig,
    shift: f64,
) -> Result<DenseKriging, Error> {
    let cov = zm.covariance().with_sill_shift(shift);
    DenseKriging::new(training, &cov, zm.drift_order, cfg.dense_limit)
}

fn solve_all(dense: &DenseKriging, points: &[Vec<f64>]) -> Result<Vec<DenseSolution>, Error> {
    points.par_iter().map(|q| dense.solve(q)).collect()
}

/// Wall time of building both paths on the first `n` samples and predicting.
fn time_size(
    zm: &ZonalModel,
    n: usize,
    points: &[Vec<f64>],
    cfg: &RunConfig,
) -> Result<ScalingRow, Error> {
    let sub = zm.training.subset(&(0..n).collect::<Vec<_>>())?;
    let t = Instant::now();
    let zsub = ZonalModel::from_models(
        sub.clone(),
        zm.axis_models.clone(),
        zm.axis_weights.clone(),
        zm.drift_order,
    )?;
    zsub.predictor()?.predict_batch(points)?;
    let zonal_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    solve_all(&dense_solver(zm, &sub, cfg, 0.0)?, points)?;
    Ok(ScalingRow {
        n,
        zonal_seconds,
        dense_seconds: t.elapsed().as_secs_f64(),
    })
}

fn sill_sensitivity(
    zm: &ZonalModel,
    cfg: &RunConfig,
    points: &[Vec<f64>],
    zonal: &[Prediction],
    dense: &[DenseSolution],
) -> Result<Vec<SillSensitivity>, Error> {
    let probes = &points[..points.len().min(SILL_PROBES)];
    let base = zm.predictor()?;
    let base_nu = probes
        .iter()
        .map(|q| base.weights(q).map(|w| w.nu_star))
        .collect::<Result<Vec<_>, _>>()?;
    cfg.sill_shifts
        .iter()
        .map(|&shift| {
            let shifted = zm.with_sill_shift(shift).predictor()?;
            let dense_shifted = dense_solver(zm, &zm.training, cfg, shift)?;
            let mut out = SillSensitivity {
                shift,
                max_abs_delta_nu_star: 0.0,
                max_abs_delta_zonal_estimate: 0.0,
                max_abs_delta_dense_lambda: 0.0,
                max_abs_delta_dense_estimate: 0.0,
            };
            for (i, q) in probes.iter().enumerate() {
                let nu = shifted.weights(q)?.nu_star;
                out.max_abs_delta_nu_star = out
                    .max_abs_delta_nu_star
                    .max(max_abs_diff(&nu, &base_nu[i]));
                let est = shifted.predict(q)?.estimate;
                out.max_abs_delta_zonal_estimate = out
                    .max_abs_delta_zonal_estimate
                    .max((est - zonal[i].estimate).abs());
                let ds = dense_shifted.solve(q)?;
                out.max_abs_delta_dense_lambda = out
                    .max_abs_delta_dense_lambda
                    .max(max_abs_diff(&ds.lambda, &dense[i].lambda));
                out.max_abs_delta_dense_estimate = out
                    .max_abs_delta_dense_estimate
                    .max((ds.estimate - dense[i].estimate).abs());
            }
            Ok(out)
        })
        .collect()
}

pub fn validate(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let mut art = Artifacts::default();
    let output = RunConfig::require(&cfg.output, "output")?;
    let zm = match &cfg.model {
        Some(path) => ZonalModel::from_json(&art.read_text(path)?)?,
        None => {
            let ds = load_dataset(&mut art, cfg)?;
            if ds.n() > cfg.dense_limit {
                return Err(Error::DenseLimitExceeded {
                    n: ds.n(),
                    limit: cfg.dense_limit,
                }
                .into());
            }
            ZonalModel::fit(&ds, &cfg.zonal)?
        }
    };
    let training = &zm.training;
    let (points, truth) = match &cfg.queries {
        Some(path) => {
            let q = load_queries(&mut art, path, training)?;
            (q.points, q.targets)
        }
        None => (
            (0..training.n()).map(|i| training.point(i)).collect(),
            Some(training.y().to_vec()),
        ),
    };

    let t = Instant::now();
    let dense = dense_solver(&zm, training, cfg, 0.0)?;
    let dense_setup_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let dense_solutions = solve_all(&dense, &points)?;
    let dense_predict_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let predictor = zm.predictor()?;
    let zonal_setup_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let zonal = predictor.predict_batch(&points)?;
    let zonal_predict_seconds = t.elapsed().as_secs_f64();

    let z_est: Vec<f64> = zonal.iter().map(|p| p.estimate).collect();
    let d_est: Vec<f64> = dense_solutions.iter().map(|s| s.estimate).collect();
    let sq: f64 = z_est.iter().zip(&d_est).map(|(a, b)| (a - b).powi(2)).sum();
    let max_abs_difference = max_abs_diff(&z_est, &d_est);
    let agreement = Agreement {
        max_abs_difference,
        rms_difference: (sq / points.len().max(1) as f64).sqrt(),
        tolerance: cfg.tolerances.agreement,
        within_tolerance: (zm.d() == 1).then_some(max_abs_difference <= cfg.tolerances.agreement),
    };
    let accuracy = truth.as_ref().filter(|t| !t.is_empty()).map(|t| {
        let mean = training.y().iter().sum::<f64>() / training.n() as f64;
        let mse_zonal = mse(z_est.iter().copied(), t);
        let mse_dense = mse(d_est.iter().copied(), t);
        let mse_ratio = mse_zonal / mse_dense;
        Accuracy {
            mse_zonal,
            mse_dense,
            mse_mean_baseline: mse(std::iter::repeat(mean), t),
            mse_ratio,
            ratio_bound: cfg.tolerances.mse_ratio,
            ratio_within_bound: mse_ratio <= cfg.tolerances.mse_ratio,
        }
    });
    let deficits = Deficits {
        max_drift_weight_deficit: zonal
            .iter()
            .map(|p| p.diagnostics.drift_weight_deficit)
            .fold(0.0, f64::max),
        max_zonal_weight_sum_gap: zonal
            .iter()
            .map(|p| (p.diagnostics.weight_sum - 1.0).abs())
            .fold(0.0, f64::max),
        max_dense_weight_sum_gap: dense_solutions
            .iter()
            .map(|s| (s.lambda.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max),
    };
    let sill = sill_sensitivity(&zm, cfg, &points, &zonal, &dense_solutions)?;
    let scaling = cfg
        .scaling_sizes
        .iter()
        .filter(|&&n| n >= 2 && n <= training.n())
        .map(|&n| time_size(&zm, n, &points, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let queries = (0..points.len())
        .map(|i| QueryRow {
            id: i,
            zonal: z_est[i],
            dense: d_est[i],
            zonal_variance: zonal[i].variance,
            dense_variance: dense_solutions[i].variance,
            truth: truth.as_ref().map(|t| t[i]),
        })
        .collect();
    let report = Report {
        n: training.n(),
        d: training.d(),
        n_queries: points.len(),
        agreement,
        accuracy,
        deficits,
        sill_sensitivity: sill,
        timing: Timing {
            zonal_setup_seconds,
            zonal_predict_seconds,
            dense_setup_seconds,
            dense_predict_seconds,
        },
        scaling,
        queries,
    };
    log::info!(
        "validate: max |zonal - dense| = {:e} over {} queries",
        report.agreement.max_abs_difference,
        report.n_queries
    );
    art.add_json(output, &report)?;
    Ok(art)
}
