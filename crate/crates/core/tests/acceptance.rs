//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::StandardNormal;

use recembed::ann::{
    ann_query, brute_force_nn, build_base_ann, build_recursive_ann, predict_c, AnnConfig, BaseStrategy,
};
use recembed::l2embed::{
    compose_localized, localized_constant, localized_map, theorem_exponent, verify_localized, GlobalMazur, Scaling,
};
use recembed::lipschitz::{
    beta_new, build_decomposer, ckr_partition, estimate_beta, iteration_count, l2_base_partition, predict_fixpoint,
    refine_once, step_params, BetaEstimates, Ckr, DecompositionPlan, L2Base, L2Strategy, Partition, PartitionSampler,
};
use recembed::mazur::MazurSpec;
use recembed::metric::{
    distance_quantile, generate_dataset, generate_with, DatasetKind, NormExponent, PlantedConfig, PointSet,
};
use recembed::rng::{derive_seed, rng, Rng as ChaCha};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn lp(x: &[f64], y: &[f64], p: f64) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs().powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Point of `B_p(z, c0)`: Gaussian direction with unit `p`-norm, radius
/// `c0·u^{1/d}`, and every 16th point on the boundary.
fn ball_point(r: &mut ChaCha, z: &[f64], c0: f64, p: f64, i: usize) -> Vec<f64> {
    let d = z.len();
    let v: Vec<f64> = (0..d).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
    let len = lp(&v, &vec![0.0; d], p);
    let radius = if i.is_multiple_of(16) {
        c0
    } else {
        c0 * r.gen::<f64>().powf(1.0 / d as f64)
    };
    z.iter().zip(&v).map(|(a, b)| a + radius * b / len).collect()
}

fn mazur_sandwich() -> Outcome {
    let start = Instant::now();
    let mut r = rng(101);
    let (mut pairs, mut violations) = (0usize, 0usize);
    for (p, q) in [(4.0, 2.0), (4.0, 3.0), (8.0, 4.0), (3.0, 2.0)] {
        for c0 in [1.0, 10.0] {
            let d = 6;
            let z: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
            let spec = MazurSpec::new(p, q, c0, z.clone()).unwrap();
            for i in 0..100_000 {
                let x = ball_point(&mut r, &z, c0, p, i);
                let y = ball_point(&mut r, &z, c0, p, i + 7);
                let actual = lp(&spec.apply(&x).unwrap(), &spec.apply(&y).unwrap(), q);
                let upper = lp(&x, &y, p);
                let lower = q / p * (2.0 * c0).powf(1.0 - p / q) * upper.powf(p / q);
                let ok = lower <= actual * (1.0 + 1e-9) && actual <= upper * (1.0 + 1e-9);
                violations += usize::from(!ok);
                pairs += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        violations == 0 && secs < 10.0,
        format!("{pairs} pairs, {violations} violations, {secs:.2} s (budget 10 s)"),
    )
}

fn step_identities() -> Outcome {
    let mut r = rng(202);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let p = r.gen_range(2.05..24.0);
        let q = r.gen_range(2.0..p);
        let beta = r.gen_range(1.0..1e4);
        let star = r.gen_range(1.0..1e4);
        let s = step_params(p, q, beta, star).unwrap();
        worst = worst.max(rel_err(beta / s.a, star / s.b));
        worst = worst.max(rel_err((p / q) * (2.0 * s.a).powf(p / q - 1.0) * s.b, 1.0));
    }
    outcome(
        worst <= 1e-12,
        format!("10000 tuples, worst relative error {worst:.2e} (tol 1e-12)"),
    )
}

fn brute_diameters(points: &PointSet, part: &Partition) -> f64 {
    let p = points.norm().as_f64();
    let labels = part.labels();
    let mut worst = 0.0f64;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if labels[i] == labels[j] {
                let d = if p.is_infinite() {
                    points
                        .row(i)
                        .iter()
                        .zip(points.row(j))
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                } else {
                    lp(points.row(i), points.row(j), p)
                };
                worst = worst.max(d / part.delta());
            }
        }
    }
    worst
}

fn diameter_soundness() -> Outcome {
    let mut draws = 0usize;
    let mut exceptions = 0usize;
    let mut worst = 0.0f64;
    let mut check = |points: &PointSet, part: Partition| {
        let w = brute_diameters(points, &part);
        worst = worst.max(w);
        exceptions += usize::from(w > 1.0 + 1e-9);
        draws += 1;
    };
    let l2 = generate_dataset(DatasetKind::Gaussian, 80, 24, NormExponent::Finite(2.0), 1)
        .unwrap()
        .points;
    let l2_med = distance_quantile(&l2, 0.5).unwrap();
    for seed in 0..30u64 {
        for f in [0.3, 1.0] {
            let delta = l2_med * f;
            check(&l2, ckr_partition(&l2, delta, seed).unwrap());
            for strategy in [L2Strategy::Grid, L2Strategy::BallCarve] {
                for jl in [false, true] {
                    check(&l2, l2_base_partition(&l2, delta, strategy, jl, seed).unwrap());
                }
            }
        }
    }
    for (pv, kind) in [
        (3.0, DatasetKind::UniformCube),
        (4.0, DatasetKind::Gaussian),
        (5.0, DatasetKind::UniformCube),
        (8.0, DatasetKind::Gaussian),
    ] {
        let pts = generate_dataset(kind, 70, 8, NormExponent::Finite(pv), pv as u64)
            .unwrap()
            .points;
        let med = distance_quantile(&pts, 0.5).unwrap();
        let plan = DecompositionPlan::for_p(pv).unwrap();
        let sampler = build_decomposer(&pts, plan, BetaEstimates::default()).unwrap();
        for (depth, node) in sampler.iterates().iter().enumerate() {
            for seed in 0..6u64 {
                for f in [0.25, 1.0] {
                    check(
                        &pts,
                        node.sample(&pts, med * f, derive_seed(seed, depth as u64)).unwrap(),
                    );
                }
            }
        }
        let params = step_params(pv, 2.0, 6.0, 2.0).unwrap();
        let inner = L2Base {
            strategy: L2Strategy::BallCarve,
            jl: false,
        };
        for seed in 0..10u64 {
            check(
                &pts,
                refine_once(&Ckr, &inner, &pts, 2.0, med * 0.7, params, seed, 1).unwrap(),
            );
        }
    }
    outcome(
        exceptions == 0 && draws >= 500,
        format!("{draws} partitions, {exceptions} exceptions, worst diameter/delta {worst:.6}"),
    )
}

/// `4(p/2q)^{q/p} β*^{q/p} β^{1−q/p}`.
fn beta_step(p: f64, q: f64, beta: f64, star: f64) -> f64 {
    let e = q / p;
    4.0 * (p / (2.0 * q)).powf(e) * star.powf(e) * beta.powf(1.0 - e)
}

fn fixpoint() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    let mut r = rng(404);
    for _ in 0..1000 {
        let p = r.gen_range(4.0..16.0);
        let (beta, star) = (r.gen_range(1.0..1e6), r.gen_range(1.0..100.0));
        pass &= rel_err(
            beta_new(p, p / 2.0, beta, star).unwrap(),
            beta_step(p, p / 2.0, beta, star),
        ) <= 1e-12;
    }
    notes.push(format!("library step matches closed form: {pass}"));
    for (p, q) in [(4.0, 2.0), (8.0, 4.0)] {
        for (start, budget) in [(64.0, 12), (1e6, 25)] {
            let mut beta: f64 = start;
            let mut steps = 0;
            while rel_err(beta, 160.0) > 0.01 && steps < 100 {
                beta = beta_step(p, q, beta, 10.0);
                steps += 1;
            }
            pass &= steps <= budget;
            notes.push(format!("l{p}->l{q} from {start}: {steps} steps (max {budget})"));
        }
    }
    let mut exact = true;
    for p in [3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 16.0] {
        exact &= predict_fixpoint(p, 2.0, 10.0).unwrap() == p / 4.0 * 2f64.powf(p) * 10.0;
    }
    pass &= exact && predict_fixpoint(8.0, 4.0, 10.0).unwrap() == 160.0;
    notes.push(format!("q=2 closed form exact: {exact}"));
    outcome(pass, notes.join("; "))
}

fn k_formula() -> Outcome {
    let k = iteration_count(4.0, 64.0);
    let independent = (4f64.log2() * 64f64.log2()).log2().ceil() as usize;
    let lhs = 64f64.powf(0.5f64.powi(k as i32));
    let rhs = 2f64.powf(1.0 / 4f64.log2());
    outcome(
        k == 4 && independent == 4 && lhs <= rhs,
        format!("k = {k}, beta0^(1/2^k) = {lhs:.6} <= {rhs:.6}"),
    )
}

fn beta_direction() -> Outcome {
    let start = Instant::now();
    let pts = generate_dataset(DatasetKind::UniformCube, 512, 16, NormExponent::Finite(4.0), 2024)
        .unwrap()
        .points;
    let delta = distance_quantile(&pts, 0.5).unwrap();
    let sampler = build_decomposer(&pts, DecompositionPlan::for_p(4.0).unwrap(), BetaEstimates::default()).unwrap();
    let budget = 512 * 511 / 2;
    let rec = estimate_beta(&sampler, &pts, delta, 200, budget, 77).unwrap();
    let ckr = estimate_beta(&Ckr, &pts, delta, 200, budget, 77).unwrap();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        rec.beta_hat <= 1.1 * ckr.beta_hat && secs < 300.0,
        format!(
            "beta_hat recursive {:.4} vs ckr {:.4} over {} pairs, depth {}, {secs:.1} s (budget 300 s)",
            rec.beta_hat,
            ckr.beta_hat,
            rec.pairs_tested,
            sampler.root().depth()
        ),
    )
}

fn claim_formula() -> Outcome {
    let v = predict_c(4.0, 2.0, 100.0, 2.0).unwrap();
    let swapped = predict_c(4.0, 2.0, 2.0, 100.0).unwrap();
    let (c, c0) = (4.0, 1e6);
    let mut cur: f64 = c0;
    let mut worst = 0.0f64;
    let mut bounded = true;
    for k in 1..=40 {
        cur = predict_c(4.0, 2.0, cur, c).unwrap();
        let h = 0.5f64.powi(k);
        let exact = (8.0 * c).powf(1.0 - h) * c0.powf(h);
        worst = worst.max(rel_err(cur, exact));
        bounded &= cur <= 8.0 * c * c0.powf(h);
    }
    outcome(
        v == 40.0 && swapped == 40.0 && worst <= 1e-9 && bounded,
        format!("predict_c(4,2,100,2) = {v}, predict_c(4,2,2,100) = {swapped}, partial products within {worst:.2e}, closed form bounds all 40 iterates: {bounded}"),
    )
}

struct AnnRun {
    success: f64,
    never_worse: bool,
    median: f64,
    base_median: f64,
    c_hat: Vec<f64>,
    secs: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

fn ann_run() -> AnnRun {
    let start = Instant::now();
    let (n, d, seed) = (1000, 16, 3);
    let cfg = PlantedConfig {
        queries: 200,
        ..PlantedConfig::for_size(n, d)
    };
    let ds = generate_with(
        DatasetKind::PlantedClusters,
        n,
        d,
        NormExponent::Finite(4.0),
        seed,
        &cfg,
    )
    .unwrap();
    let planted = ds.planted.unwrap();
    let r = planted.r;
    let s = build_recursive_ann(&ds.points, AnnConfig::new(4.0, r), seed).unwrap();
    let base = build_base_ann(&ds.points, r, BaseStrategy::CrudeGrid, derive_seed(seed, 0)).unwrap();
    let threshold = s.advertised_c() * r;
    let (mut ok, mut never_worse) = (0usize, true);
    let (mut ratios, mut base_ratios) = (Vec::new(), Vec::new());
    for q in planted.queries.rows() {
        let out = ann_query(&s, q, Some(threshold)).unwrap();
        let (_, truth) = brute_force_nn(&ds.points, q).unwrap();
        let base_row = base.query_row(q);
        let base_dist = ds.points.dist_to(base_row, q);
        never_worse &= out.base_id == ds.points.id(base_row) && out.distance <= base_dist;
        ok += usize::from(lp(ds.points.row(ds.points.row_of(out.id).unwrap()), q, 4.0) <= threshold);
        ratios.push(out.distance / truth);
        base_ratios.push(base_dist / truth);
    }
    AnnRun {
        success: ok as f64 / planted.queries.len() as f64,
        never_worse,
        median: median(ratios),
        base_median: median(base_ratios),
        c_hat: s.c_hat(),
        secs: start.elapsed().as_secs_f64(),
    }
}

fn ann_success(run: &AnnRun) -> Outcome {
    outcome(
        run.success >= 0.6 && run.never_worse && run.secs < 120.0,
        format!(
            "success {:.3} at c_hat_k = {:.4} (levels {}), never worse: {}, {:.1} s (budget 120 s)",
            run.success,
            run.c_hat.last().unwrap(),
            run.c_hat.len() - 1,
            run.never_worse,
            run.secs
        ),
    )
}

fn ann_improvement(run: &AnnRun) -> Outcome {
    outcome(
        run.median <= run.base_median,
        format!(
            "median ratio recursive {:.4} vs crude grid {:.4}",
            run.median, run.base_median
        ),
    )
}

fn exponents() -> Outcome {
    let top = 3.0 * 0.5f64.exp();
    let limit_top = 0.5 + (top / 3.0).ln();
    let mut dominated = 0;
    for i in 1..=1000 {
        let p = 3.0 + i as f64 / 1001.0;
        let b = theorem_exponent(p, 1).unwrap();
        if b.limit < p / 2.0 - 1.0 - 1e-9 {
            dominated += 1;
        }
    }
    let mut monotone = true;
    for p in [3.01, 3.5, 4.0, 4.9] {
        let mut prev = f64::INFINITY;
        for k in 1..=1000 {
            let v = theorem_exponent(p, k).unwrap().value;
            monotone &= v < prev;
            prev = v;
        }
    }
    let pass = (limit_top - 1.0).abs() <= 1e-12 && dominated == 1000 && monotone;
    outcome(
        pass,
        format!("limit at 3*sqrt(e) = {limit_top:.15}, dominated at {dominated}/1000 grid points, strictly decreasing in k: {monotone}"),
    )
}

fn random_subset(r: &mut ChaCha, m: usize, d: usize) -> PointSet {
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..d).map(|_| r.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    PointSet::from_rows(&rows, NormExponent::Finite(4.0)).unwrap()
}

fn certificates() -> Outcome {
    let mut r = rng(505);
    let k = 8.0;
    let c = localized_constant(4.0, 2.0);
    let (mut passes, mut composed_ok, mut worst_ratio) = (0, 0, 0.0f64);
    for _ in 0..50 {
        let m = r.gen_range(30..90);
        let set = random_subset(&mut r, m, 8);
        let diam = recembed::metric::set_diameter(&set);
        let delta = diam / k;
        let (map, img) = localized_map(&set, k, delta, 2.0).unwrap();
        let cert = verify_localized(&set, &img, delta, c * k).unwrap();
        passes += usize::from(cert.pass);

        let scaled = compose_localized(&map, &img, &Scaling(r.gen_range(0.1..10.0))).unwrap();
        let sc = verify_localized(&set, &scaled.images, delta, c * k).unwrap();
        let (map3, img3) = localized_map(&set, k, delta, 3.0).unwrap();
        let d1 = verify_localized(&set, &img3, delta, f64::INFINITY).unwrap().achieved_d;
        let g = GlobalMazur::fit(&img3, 2.0).unwrap();
        let comp = compose_localized(&map3, &img3, &g).unwrap();
        let cd = verify_localized(&set, &comp.images, delta, f64::INFINITY)
            .unwrap()
            .achieved_d;
        let ok = cd <= d1 * comp.d2 * (1.0 + 1e-9) && sc.achieved_d <= cert.achieved_d * scaled.d2 * (1.0 + 1e-9);
        composed_ok += usize::from(ok);
        worst_ratio = worst_ratio.max(cd / (d1 * comp.d2));
    }
    outcome(
        passes == 50 && composed_ok == 50,
        format!("{passes}/50 pass at D = {c}*K, composition bound held {composed_ok}/50 (worst achieved/(D1*D2) = {worst_ratio:.4})"),
    )
}

fn main() -> ExitCode {
    let total = Instant::now();
    let mut failures = 0;
    let mut report = |name: &str, o: Outcome| {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failures += usize::from(!o.pass);
    };
    report("mazur sandwich", mazur_sandwich());
    report("step identities", step_identities());
    report("diameter soundness", diameter_soundness());
    report("fixpoint", fixpoint());
    report("k formula", k_formula());
    report("empirical beta direction", beta_direction());
    report("ann recursion formula", claim_formula());
    let run = ann_run();
    report("ann success", ann_success(&run));
    report("ann improvement", ann_improvement(&run));
    report("exponent arithmetic", exponents());
    report("localized certificates", certificates());
    let elapsed: Duration = total.elapsed();
    println!("{} failed, {:.1} s total", failures, elapsed.as_secs_f64());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
