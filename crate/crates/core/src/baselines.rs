//! Comparison baselines: unconstrained online matrix factorization with
//! unit-ball columns, and a desk-scale batch convex factorization built on
//! the same QP machinery with a single representative region spanning the
//! whole dataset.

use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{ModelConfig, QpSettings};
use crate::dictionary::{Dictionary, RepresentativeSet};
use crate::error::{Error, Result};
use crate::init::{initialize_with_rng, kmeans_with_rng, KMEANS_MAX_ITER};
use crate::objective::objective_from_stats;
use crate::report::{StepReport, TraceRecord};
use crate::solvers::lasso::sparse_code;
use crate::solvers::qp::{block_cd_dictionary, column_linear_term};
use crate::stats::{update_stats, SufficientStats};

/// Largest dataset the batch solver accepts.
pub const BATCH_MAX_SAMPLES: usize = 20_000;

/// Streaming baseline state: a dictionary whose columns live in the unit
/// ball, plus the same running statistics as the convex method. No
/// representative sets are kept.
#[derive(Debug, Clone)]
pub struct OnlineMfModel {
    pub config: ModelConfig,
    pub d: Array2<f64>,
    pub stats: SufficientStats,
}

impl OnlineMfModel {
    /// Column norms never exceed one (plus float noise).
    pub fn validate(&self) -> Result<()> {
        for j in 0..self.d.ncols() {
            let norm = self.d.column(j).dot(&self.d.column(j)).sqrt();
            if norm > 1.0 + 1e-12 {
                return Err(Error::InvalidState(format!(
                    "column {j} has norm {norm} > 1"
                )));
            }
        }
        Ok(())
    }
}

fn project_unit_ball(v: &mut Array1<f64>) {
    let norm = v.dot(v).sqrt();
    if norm > 1.0 {
        v.mapv_inplace(|x| x / norm);
    }
}

/// One exact pass of ball-constrained block coordinate descent: each column
/// moves to the projection of its unconstrained minimizer, which is the
/// exact constrained minimizer for an isotropic quadratic. Columns with no
/// accumulated usage are left alone.
fn ball_block_sweep(stats: &SufficientStats, d: &mut Array2<f64>, ridge_kappa1: f64) {
    let k = d.ncols();
    for j in 0..k {
        if stats.a[[j, j]] == 0.0 {
            continue;
        }
        let curvature = stats.a[[j, j]] + ridge_kappa1;
        let u = column_linear_term(stats, &d.view(), j);
        let mut v = u.mapv(|x| -x / curvature);
        project_unit_ball(&mut v);
        d.column_mut(j).assign(&v);
    }
}

/// One streaming step of the unconstrained baseline: sparse-code against the
/// previous dictionary, fold the statistics, then run one ball-constrained
/// block sweep.
pub fn online_mf_step(model: &mut OnlineMfModel, x: &ArrayView1<f64>) -> Result<StepReport> {
    if x.len() != model.config.m {
        return Err(Error::DimensionMismatch(format!(
            "sample has length {}, model dimension is {}",
            x.len(),
            model.config.m
        )));
    }
    let cfg = &model.config;
    let sc_start = Instant::now();
    let alpha = sparse_code(x, &model.d.view(), cfg.lambda, cfg.elastic_kappa, &cfg.lasso)?;
    let ms_sparse_code = sc_start.elapsed().as_secs_f64() * 1e3;

    let new_stats = update_stats(&model.stats, x, &alpha.view(), cfg.lambda);

    let du_start = Instant::now();
    let mut d = model.d.clone();
    ball_block_sweep(&new_stats, &mut d, cfg.ridge_kappa1);
    let ms_dict_update = du_start.elapsed().as_secs_f64() * 1e3;

    model.d = d;
    model.stats = new_stats;

    let surrogate = objective_from_stats(&model.d.view(), &model.stats, 0.0)?;
    // Reporting convention: route by argmax like the restricted variant;
    // there is no representative set, so the slot is always 0.
    let basis_index = alpha
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(StepReport {
        t: model.stats.t,
        basis_index,
        candidate: 0,
        surrogate,
        g_hat: surrogate + model.stats.loss_const,
        alpha,
        ms_sparse_code,
        ms_dict_update,
    })
}

/// Online baseline fit: K-means initialization (columns projected into the
/// unit ball), then one `online_mf_step` per remaining sample.
pub fn online_mf_fit<I>(
    stream: I,
    config: &ModelConfig,
    t_max: usize,
) -> Result<(OnlineMfModel, Vec<StepReport>)>
where
    I: IntoIterator<Item = Array1<f64>>,
{
    config.validate()?;
    let mut iter = stream.into_iter();
    let n = config.init_sample_count;
    let mut buffer = Array2::<f64>::zeros((config.m, n));
    let mut got = 0usize;
    for col in 0..n {
        match iter.next() {
            Some(x) => {
                if x.len() != config.m {
                    return Err(Error::DimensionMismatch(format!(
                        "sample has length {}, config.m is {}",
                        x.len(),
                        config.m
                    )));
                }
                buffer.column_mut(col).assign(&x);
                got += 1;
            }
            None => break,
        }
    }
    if got < n {
        return Err(Error::InsufficientSamples { needed: n, got });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = initialize_with_rng(&buffer.view(), config, &mut rng)?;
    let mut d = init.dictionary.columns().clone();
    for j in 0..d.ncols() {
        let mut col = d.column(j).to_owned();
        project_unit_ball(&mut col);
        d.column_mut(j).assign(&col);
    }
    let mut model = OnlineMfModel {
        stats: SufficientStats::zeros(config.m, config.k),
        config: config.clone(),
        d,
    };
    let mut reports = Vec::new();
    for x in iter.take(t_max) {
        reports.push(online_mf_step(&mut model, &x.view())?);
    }
    Ok((model, reports))
}

/// Result of the batch solver: the hull-constrained dictionary, the final
/// coefficient matrix, the statistics of the final coding, and one trace
/// record per alternation.
#[derive(Debug, Clone)]
pub struct BatchResult {
    pub dictionary: Dictionary,
    pub codes: Array2<f64>,
    pub stats: SufficientStats,
    pub trace: Vec<TraceRecord>,
    pub objective: f64,
}

/// Alternating minimization for the batch convex problem: full-data sparse
/// coding, then a hull-constrained dictionary update with every column
/// constrained to the convex hull of the entire dataset. Stops after `iters`
/// alternations or when the relative objective decrease falls below 1e-6.
pub fn batch_cvxmf(x: &ArrayView2<f64>, config: &ModelConfig, iters: usize) -> Result<BatchResult> {
    config.validate()?;
    if iters == 0 {
        return Err(Error::InvalidConfig(
            "batch solver needs at least one alternation".into(),
        ));
    }
    let (m, n) = x.dim();
    if n > BATCH_MAX_SAMPLES {
        return Err(Error::ResourceGuard {
            what: "batch dataset size",
            limit: BATCH_MAX_SAMPLES,
            requested: n,
            hint: "use the online solver for datasets this large",
        });
    }
    if m != config.m {
        return Err(Error::DimensionMismatch(format!(
            "data dimension {m} disagrees with config.m {}",
            config.m
        )));
    }
    if n < config.k {
        return Err(Error::InsufficientSamples {
            needed: config.k,
            got: n,
        });
    }
    let k = config.k;

    // K-means initialization over the full dataset; each column starts as a
    // cluster mean expressed with uniform weights over its members.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let assignments = kmeans_with_rng(x, k, &mut rng, KMEANS_MAX_ITER)?;
    let full_set = RepresentativeSet::new(x.to_owned())?;
    let rep_sets: Vec<RepresentativeSet> = vec![full_set; k];
    let mut counts = vec![0usize; k];
    for &c in &assignments {
        counts[c] += 1;
    }
    let weights: Vec<Array1<f64>> = (0..k)
        .map(|c| {
            let mut w = Array1::<f64>::zeros(n);
            for (i, &a) in assignments.iter().enumerate() {
                if a == c {
                    w[i] = 1.0 / counts[c] as f64;
                }
            }
            w
        })
        .collect();
    let mut dict = Dictionary::from_weights(&rep_sets, weights)?;

    let settings = config.qp.with_max_sweeps(QpSettings::BATCH_MAX_SWEEPS);
    let mut codes = Array2::<f64>::zeros((k, n));
    let mut trace = Vec::with_capacity(iters);
    let mut prev_objective = f64::INFINITY;
    let mut objective = f64::INFINITY;
    let mut stats = SufficientStats::zeros(m, k);
    for alternation in 0..iters {
        let sc_start = Instant::now();
        for i in 0..n {
            let alpha = sparse_code(
                &x.column(i),
                &dict.columns().view(),
                config.lambda,
                config.elastic_kappa,
                &config.lasso,
            )?;
            codes.column_mut(i).assign(&alpha);
        }
        let ms_sparse_code = sc_start.elapsed().as_secs_f64() * 1e3;

        let du_start = Instant::now();
        stats = batch_stats(x, &codes.view(), config.lambda);
        let (new_dict, _) = block_cd_dictionary(
            &stats,
            &rep_sets,
            &dict,
            config.ridge_kappa1,
            &settings,
        )?;
        dict = new_dict;
        let ms_dict_update = du_start.elapsed().as_secs_f64() * 1e3;

        objective = batch_objective(x, &dict.columns().view(), &codes.view(), config.lambda);
        let nnz = codes.iter().filter(|&&v| v != 0.0).count();
        trace.push(TraceRecord {
            t: (alternation + 1) as u64,
            i_t: 0,
            l_star: 0,
            surrogate: objective,
            g_hat: objective,
            alpha_nnz: nnz,
            ms_sparse_code,
            ms_dict_update,
            method: "batch-cvxmf".to_string(),
        });

        let decrease = prev_objective - objective;
        if alternation > 0 && decrease < 1e-6 * prev_objective.abs().max(1e-12) {
            break;
        }
        prev_objective = objective;
    }
    Ok(BatchResult {
        dictionary: dict,
        codes,
        stats,
        trace,
        objective,
    })
}

/// Direct (non-streaming) statistics over a full coding of the dataset.
fn batch_stats(x: &ArrayView2<f64>, codes: &ArrayView2<f64>, lambda: f64) -> SufficientStats {
    let n = x.ncols();
    let nf = n as f64;
    let mut a = codes.dot(&codes.t());
    a /= nf;
    let mut b = x.dot(&codes.t());
    b /= nf;
    let mut loss_const = 0.0;
    for i in 0..n {
        let xi = x.column(i);
        loss_const += 0.5 * xi.dot(&xi)
            + lambda * codes.column(i).iter().map(|v| v.abs()).sum::<f64>();
    }
    SufficientStats {
        a,
        b,
        t: n as u64,
        loss_const: loss_const / nf,
    }
}

/// `(1/n) sum_i [ 0.5 ||x_i - D c_i||^2 + lambda ||c_i||_1 ]`.
pub fn batch_objective(
    x: &ArrayView2<f64>,
    d: &ArrayView2<f64>,
    codes: &ArrayView2<f64>,
    lambda: f64,
) -> f64 {
    let n = x.ncols();
    let recon = d.dot(codes);
    let mut total = 0.0;
    for i in 0..n {
        let resid: f64 = x
            .column(i)
            .iter()
            .zip(recon.column(i).iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        total += 0.5 * resid + lambda * codes.column(i).iter().map(|v| v.abs()).sum::<f64>();
    }
    total / n as f64
}
