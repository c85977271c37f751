use cvxmf_core::config::{ModelConfig, Variant};
use cvxmf_core::data::{gen_mixture, stream, MixtureSpec, StreamOrder};
use cvxmf_core::metrics::{approx_error, basis_recovery, clustering_accuracy, predict_clusters};
use cvxmf_core::online;
use ndarray::Array2;
use std::time::Instant;

fn main() {
    let spec = MixtureSpec::with_random_means(5, 10, 1.0, 0.0, 20.0, 1);
    let n = 2500;
    let ds = gen_mixture(&spec, n, 2).unwrap();
    let cfg = ModelConfig::new(5, 10)
        .with_seed(1)
        .with_variant(Variant::Restricted)
        .with_init_samples(150);
    let samples = stream(&ds, StreamOrder::AsIs, 1);
    let started = Instant::now();
    let (model, reports) = online::fit(samples, &cfg, n - 150).unwrap();
    let total = started.elapsed().as_secs_f64();
    let mut means = Array2::<f64>::zeros((10, 5));
    for (j, mu) in spec.means.iter().enumerate() {
        for (i, &v) in mu.iter().enumerate() {
            means[[i, j]] = v;
        }
    }
    let d = model.dict.columns();
    let rec = basis_recovery(&d.view(), &means.view()).unwrap();
    let l2 = approx_error(&ds.x.view(), &d.view(), cfg.lambda, cfg.elastic_kappa, &cfg.lasso).unwrap();
    let pred = predict_clusters(&ds.x.view(), &d.view(), cfg.lambda, cfg.elastic_kappa, &cfg.lasso).unwrap();
    let acc = clustering_accuracy(&pred, ds.labels.as_ref().unwrap()).unwrap();
    let swaps = reports.iter().filter(|r| r.candidate != 0).count();
    println!(
        "steps={} total={total:.2}s per_step={:.2}ms recovery={rec:.4} l2={l2:.5} acc={acc:.4} swaps={swaps}",
        reports.len(),
        total * 1e3 / reports.len() as f64
    );
}
