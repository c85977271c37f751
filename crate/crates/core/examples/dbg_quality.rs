use cvxmf_core::baselines::batch_cvxmf;
use cvxmf_core::config::{ModelConfig, Variant};
use cvxmf_core::data::{gen_mixture, stream, MixtureSpec, StreamOrder};
use cvxmf_core::init::kmeans;
use cvxmf_core::metrics::basis_recovery;
use cvxmf_core::online;
use ndarray::{Array1, Array2};

fn means_of(spec: &MixtureSpec) -> Array2<f64> {
    let mut means = Array2::<f64>::zeros((spec.m, spec.k));
    for (j, mu) in spec.means.iter().enumerate() {
        for (i, &v) in mu.iter().enumerate() {
            means[[i, j]] = v;
        }
    }
    means
}

fn main() {
    for seed in [1u64, 7, 21] {
        let spec = MixtureSpec::with_random_means(5, 10, 1.0, 0.0, 20.0, seed);
        let n = 2500;
        let ds = gen_mixture(&spec, n, seed + 1).unwrap();
        let means = means_of(&spec);
        let cfg = ModelConfig::new(5, 10)
            .with_seed(seed)
            .with_variant(Variant::Restricted)
            .with_init_samples(150);

        // Reference 1: plain k-means centroids over the full data.
        let assign = kmeans(&ds.x.view(), 5, seed, 100).unwrap();
        let mut centroids = Array2::<f64>::zeros((10, 5));
        let mut counts = [0usize; 5];
        for (i, &c) in assign.iter().enumerate() {
            counts[c] += 1;
            let col = ds.x.column(i);
            for r in 0..10 {
                centroids[[r, c]] += col[r];
            }
        }
        for c in 0..5 {
            for r in 0..10 {
                centroids[[r, c]] /= counts[c] as f64;
            }
        }
        let rec_kmeans = basis_recovery(&centroids.view(), &means.view()).unwrap();

        // Reference 2: batch convex MF on a 2000-sample subset.
        let sub = ds.x.slice(ndarray::s![.., ..2000]).to_owned();
        let batch = batch_cvxmf(&sub.view(), &cfg, 30).unwrap();
        let rec_batch = basis_recovery(&batch.dictionary.columns().view(), &means.view()).unwrap();

        // Online fit.
        let samples = stream(&ds, StreamOrder::AsIs, seed);
        let (model, _) = online::fit(samples, &cfg, n - 150).unwrap();
        let rec_online =
            basis_recovery(&model.dict.columns().view(), &means.view()).unwrap();

        // How inflated are the columns vs the matched means?
        let d = model.dict.columns();
        let norm_ratio: Vec<f64> = (0..5)
            .map(|j| {
                let dn = d.column(j).dot(&d.column(j)).sqrt();
                let best = (0..5)
                    .map(|c| {
                        let mu = means.column(c);
                        let diff: f64 = d
                            .column(j)
                            .iter()
                            .zip(mu.iter())
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum();
                        (diff, c)
                    })
                    .min_by(|a, b| a.0.total_cmp(&b.0))
                    .unwrap()
                    .1;
                dn / means.column(best).dot(&means.column(best)).sqrt()
            })
            .collect();
        println!("seed {seed}: kmeans={rec_kmeans:.3} batch={rec_batch:.3} online={rec_online:.3} norm_ratios={norm_ratio:?}");
    }
    let _ = Array1::<f64>::zeros(1);
}
