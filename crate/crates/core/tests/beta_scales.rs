//! Recursive sampler against plain CKR across scales, including scales where
//! CKR is far from saturated. The ratios are printed for inspection; the
//! assertions pin down the structure of the estimate only.

use recembed::lipschitz::{
    build_decomposer, estimate_beta, estimate_beta_series, BetaEstimates, Ckr, DecompositionPlan,
};
use recembed::metric::{distance_quantile, generate_dataset, DatasetKind, NormExponent};

#[test]
fn recursive_versus_ckr_across_scales() {
    let pts = generate_dataset(DatasetKind::UniformCube, 512, 16, NormExponent::Finite(4.0), 2024)
        .unwrap()
        .points;
    let sampler = build_decomposer(&pts, DecompositionPlan::for_p(4.0).unwrap(), BetaEstimates::default()).unwrap();
    let median = distance_quantile(&pts, 0.5).unwrap();
    let scales = [
        ("q0.1", distance_quantile(&pts, 0.1).unwrap()),
        ("median", median),
        ("q0.9", distance_quantile(&pts, 0.9).unwrap()),
        ("2*median", 2.0 * median),
    ];
    let budget = 512 * 511 / 2;
    for (name, delta) in scales {
        let rec = estimate_beta_series(&sampler, delta, 100, budget, 11).unwrap();
        let ckr = estimate_beta(&Ckr, &pts, delta, 100, budget, 11).unwrap();
        println!(
            "{name:>9} delta {delta:.4}: recursive {:.4}, ckr {:.4}, ratio {:.4}, series {:?}",
            rec.beta_hat,
            ckr.beta_hat,
            rec.beta_hat / ckr.beta_hat,
            rec.series
        );
        assert_eq!(rec.pairs_tested, ckr.pairs_tested);
        assert_eq!(rec.series.len(), sampler.iterates().len());
        assert_eq!(rec.series[0], ckr.beta_hat);
        assert_eq!(*rec.series.last().unwrap(), rec.beta_hat);
        assert!(rec.series.iter().all(|b| b.is_finite() && *b >= 0.0));
    }
}
