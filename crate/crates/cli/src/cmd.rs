use std::path::{Path, PathBuf};
use std::time::Instant;

use recembed::ann::{self, AnnConfig, RecursiveAnnStructure};
use recembed::l2embed::{
    compose_localized, exponent_table as build_table, linear_grid, localized_constant, localized_map, verify_localized,
    write_exponent_csv, GlobalMap, GlobalMazur, Identity, Scaling,
};
use recembed::lipschitz::{
    build_decomposer, estimate_beta as estimate, estimate_beta_series, write_beta_csv, write_beta_series_csv,
    BetaEstimates, Calibration, Ckr, DecompositionPlan, L2Base, L2Strategy, LipschitzSampler, PartitionSampler,
};
use recembed::metric::{
    atomic_write, fmt_num, generate_with, read_point_set, set_diameter, write_commented, write_point_set, DatasetKind,
    NormExponent, PlantedConfig, PointSet,
};
use recembed::rng::derive_seed;
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::GlobalArg;
use crate::{
    AnnBenchArgs, AnnBuildArgs, AnnFlags, AnnQueryArgs, DecomposeArgs, EmbedVerifyArgs, EstimateBetaArgs,
    ExponentTableArgs, Failure, GenArgs, SamplerArgs, SamplerKind,
};

type CmdResult = Result<(), Failure>;

fn config(command: &str, args: &impl Serialize) -> Value {
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "args": args,
    })
}

fn comment_lines(config: &Value, extra: &[(&str, String)]) -> Vec<String> {
    let mut lines = vec![format!("config={config}")];
    lines.extend(extra.iter().map(|(k, v)| format!("{k}={v}")));
    lines
}

fn write_json(path: &Path, value: &impl Serialize) -> CmdResult {
    let mut text = serde_json::to_string_pretty(value).map_err(recembed::Error::from)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())?;
    Ok(())
}

/// `dir/stem.suffix` next to `path`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

pub fn gen(a: &GenArgs) -> CmdResult {
    let cfg = config("gen", a);
    let planted = PlantedConfig {
        queries: a.queries,
        ..PlantedConfig::for_size(a.n, a.d)
    };
    let ds = generate_with(a.kind, a.n, a.d, a.p, a.seed, &planted)?;
    write_point_set(&a.out, &ds.points, Some(cfg.clone()))?;
    println!(
        "wrote {} points in dimension {} to {}",
        ds.points.len(),
        ds.points.dim(),
        a.out.display()
    );
    if let Some(pl) = ds.planted {
        let path = sibling(&a.out, "queries.csv");
        let meta = json!({ "source": cfg, "r": pl.r, "anchors": pl.anchors });
        write_point_set(&path, &pl.queries, Some(meta))?;
        println!(
            "wrote {} planted queries (r = {}) to {}",
            pl.queries.len(),
            pl.r,
            path.display()
        );
    }
    Ok(())
}

enum Built<'a> {
    Recursive(LipschitzSampler<'a>),
    Plain(Box<dyn PartitionSampler>),
}

impl Built<'_> {
    fn sampler(&self) -> &dyn PartitionSampler {
        match self {
            Built::Recursive(s) => s,
            Built::Plain(s) => s.as_ref(),
        }
    }
}

fn build_sampler<'a>(points: &'a PointSet, s: &SamplerArgs, seed: u64) -> Result<Built<'a>, Failure> {
    let l2 = |strategy| Built::Plain(Box::new(L2Base { strategy, jl: s.jl }));
    Ok(match s.sampler {
        SamplerKind::Ckr => Built::Plain(Box::new(Ckr)),
        SamplerKind::L2Grid => l2(L2Strategy::Grid),
        SamplerKind::L2Ballcarve => l2(L2Strategy::BallCarve),
        SamplerKind::Recursive => {
            let p = points.norm().require_finite("recursive decomposition")?;
            let mut plan = DecompositionPlan::for_p(p)?;
            if let Some(chain) = &s.chain {
                plan.p_chain = chain.0.clone();
            }
            plan.base = s.base;
            plan.inner_k = s.inner_k;
            plan.abort_on_worse = s.abort_on_worse;
            plan.jl = s.jl;
            let estimates = BetaEstimates {
                source: s.beta_source,
                calibration: Calibration {
                    seed: derive_seed(seed, 1),
                    ..Calibration::default()
                },
                ..BetaEstimates::default()
            };
            Built::Recursive(build_decomposer(points, plan, estimates)?)
        }
    })
}

#[derive(Serialize)]
struct PartitionFile<'a> {
    #[serde(flatten)]
    partition: &'a recembed::lipschitz::Partition,
    num_clusters: usize,
    max_cluster_diameter: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    levels: Option<&'a [recembed::lipschitz::LevelReport]>,
    config: Value,
}

pub fn decompose(a: &DecomposeArgs) -> CmdResult {
    let points = read_point_set(&a.input)?;
    let delta = a.delta.resolve(&points)?;
    let built = build_sampler(&points, &a.sampler, a.seed)?;
    let partition = built.sampler().sample(&points, delta, a.seed)?;
    partition.audit_diameter(&points)?;
    let max_d = partition.cluster_diameters(&points).into_iter().fold(0.0, f64::max);
    let mut cfg = config("decompose", a);
    cfg["resolved_delta"] = json!(delta);
    let file = PartitionFile {
        partition: &partition,
        num_clusters: partition.num_clusters(),
        max_cluster_diameter: max_d,
        levels: match &built {
            Built::Recursive(s) => Some(s.levels()),
            Built::Plain(_) => None,
        },
        config: cfg,
    };
    write_json(&a.out, &file)?;
    println!(
        "{} clusters at delta = {delta:.6e}; largest cluster diameter {max_d:.6e}",
        partition.num_clusters()
    );
    Ok(())
}

pub fn estimate_beta(a: &EstimateBetaArgs) -> CmdResult {
    let points = read_point_set(&a.input)?;
    let delta = a.delta.resolve(&points)?;
    let built = build_sampler(&points, &a.sampler, a.seed)?;
    let report = match &built {
        Built::Recursive(s) => estimate_beta_series(s, delta, a.draws, a.pair_budget, a.seed)?,
        Built::Plain(s) => estimate(s.as_ref(), &points, delta, a.draws, a.pair_budget, a.seed)?,
    };
    let cfg = config("estimate-beta", a);
    let mut extra = vec![
        ("n", points.len().to_string()),
        ("d", points.dim().to_string()),
        ("p", points.norm().to_string()),
        ("resolved_delta", fmt_num(delta)),
    ];
    if let Built::Recursive(s) = &built {
        extra.push(("floor", s.floor().to_string()));
        if let Some(b) = s.predicted_beta() {
            extra.push(("predicted_beta", fmt_num(b)));
        }
    }
    let comments = comment_lines(&cfg, &extra);
    write_beta_csv(&a.out, std::slice::from_ref(&report), &comments)?;
    println!(
        "beta_hat = {:.6} over {} pairs and {} draws at delta = {delta:.6e}",
        report.beta_hat, report.pairs_tested, report.draws
    );
    if !report.series.is_empty() {
        let path = sibling(&a.out, "series.csv");
        write_beta_series_csv(&path, &report, &comments)?;
        let series: Vec<String> = report.series.iter().map(|b| format!("{b:.4}")).collect();
        println!("per-iterate beta_hat: {}", series.join(" "));
    }
    Ok(())
}

fn ann_config(f: &AnnFlags, p: f64, r: f64) -> AnnConfig {
    AnnConfig {
        t_schedule: f.schedule.0,
        inner_k: f.inner_k,
        reps_inner: f.reps_inner,
        reps_outer: f.reps_outer,
        base: f.base,
        floor: f.floor,
        jl: !f.no_jl,
        audit_queries: f.audit_queries,
        holder: !f.no_holder,
        ..AnnConfig::new(p, r)
    }
}

fn describe(s: &RecursiveAnnStructure) -> String {
    let c: Vec<String> = s.c_hat().iter().map(|c| format!("{c:.4}")).collect();
    format!(
        "working p = {}{}, levels = {}, c_hat = [{}], stored points = {}",
        s.working_p,
        if s.holder_applied { " (holder reduced)" } else { "" },
        s.levels().len(),
        c.join(", "),
        s.stats.stored_points
    )
}

pub fn ann_build(a: &AnnBuildArgs) -> CmdResult {
    let points = read_point_set(&a.input)?;
    let p = points.norm().require_finite("ann index")?;
    let s = ann::build_recursive_ann(&points, ann_config(&a.ann, p, a.r), a.seed)?;
    ann::save_structure(&a.out, &s)?;
    write_json(&a.out.join("cli.json"), &config("ann-build", a))?;
    println!("{}", describe(&s));
    println!("structure written to {}", a.out.display());
    Ok(())
}

pub fn ann_query(a: &AnnQueryArgs) -> CmdResult {
    let s = ann::load_structure(&a.index)?;
    let queries = read_point_set(&a.queries)?;
    let threshold = s.advertised_c() * s.config.r;
    let outcomes =
        recembed::par::try_map_range(queries.len(), |i| ann::ann_query(&s, queries.row(i), Some(threshold)))?;
    let mut body = String::from("query_id,id,distance,base_id,base_distance,success,out_of_contract\n");
    for (i, o) in outcomes.iter().enumerate() {
        body.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            queries.id(i),
            o.id,
            fmt_num(o.distance),
            o.base_id,
            fmt_num(o.base_distance),
            u8::from(o.success == Some(true)),
            u8::from(o.out_of_contract)
        ));
    }
    let comments = comment_lines(&config("ann-query", a), &[("threshold", fmt_num(threshold))]);
    write_commented(&a.out, &comments, &body)?;
    let hits = outcomes.iter().filter(|o| o.success == Some(true)).count();
    println!("{hits}/{} queries within c_hat * r = {threshold:.6e}", outcomes.len());
    Ok(())
}

#[derive(Serialize)]
struct BenchSummary {
    config: Value,
    r: f64,
    c_theory: f64,
    c_hat: Vec<f64>,
    working_p: f64,
    holder_applied: bool,
    stored_points: usize,
    success_rate: f64,
    base_success_rate: f64,
    median_ratio: f64,
    base_median_ratio: f64,
    p90_ratio: f64,
    max_ratio: f64,
    never_worse: bool,
    queries: usize,
    build_seconds: f64,
}

fn bench_inputs(a: &AnnBenchArgs) -> Result<(PointSet, PointSet, f64), Failure> {
    if let (Some(input), Some(qf), Some(r)) = (&a.input, &a.query_file, a.r) {
        return Ok((read_point_set(input)?, read_point_set(qf)?, r));
    }
    let planted = PlantedConfig {
        queries: a.queries,
        ..PlantedConfig::for_size(a.n, a.d)
    };
    let p = NormExponent::new(a.p)?;
    let ds = generate_with(DatasetKind::PlantedClusters, a.n, a.d, p, a.seed, &planted)?;
    let pl = ds.planted.expect("planted generator records its queries");
    Ok((ds.points, pl.queries, a.r.unwrap_or(pl.r)))
}

pub fn ann_bench(a: &AnnBenchArgs) -> CmdResult {
    let (points, queries, r) = bench_inputs(a)?;
    let p = points.norm().require_finite("ann index")?;
    let start = Instant::now();
    let s = ann::build_recursive_ann(&points, ann_config(&a.ann, p, r), a.seed)?;
    let build_seconds = start.elapsed().as_secs_f64();
    let report = ann::ann_bench(&s, &queries, r)?;
    let cfg = config("ann-bench", a);
    let comments = comment_lines(
        &cfg,
        &[
            ("r", fmt_num(r)),
            ("c_theory", fmt_num(report.c_theory)),
            ("success_rate", fmt_num(report.success_rate)),
            ("base_success_rate", fmt_num(report.base_success_rate)),
            ("median_ratio", fmt_num(report.median_ratio)),
            ("base_median_ratio", fmt_num(report.base_median_ratio)),
            ("never_worse", report.never_worse.to_string()),
        ],
    );
    ann::write_bench_csv(&a.out, &report, &comments)?;
    let summary = BenchSummary {
        config: cfg,
        r,
        c_theory: report.c_theory,
        c_hat: s.c_hat(),
        working_p: s.working_p,
        holder_applied: s.holder_applied,
        stored_points: s.stats.stored_points,
        success_rate: report.success_rate,
        base_success_rate: report.base_success_rate,
        median_ratio: report.median_ratio,
        base_median_ratio: report.base_median_ratio,
        p90_ratio: report.p90_ratio,
        max_ratio: report.max_ratio,
        never_worse: report.never_worse,
        queries: report.rows.len(),
        build_seconds,
    };
    write_json(&sibling(&a.out, "json"), &summary)?;
    println!("{}", describe(&s));
    println!(
        "success rate {:.3} at c_hat * r = {:.6e} (base alone {:.3}); median ratio {:.4} vs base {:.4}; never worse: {}",
        report.success_rate,
        report.c_theory * r,
        report.base_success_rate,
        report.median_ratio,
        report.base_median_ratio,
        report.never_worse
    );
    Ok(())
}

pub fn embed_verify(a: &EmbedVerifyArgs) -> CmdResult {
    let points = read_point_set(&a.input)?;
    let delta = match a.delta {
        Some(d) => d.resolve(&points)?,
        None => set_diameter(&points) / a.k,
    };
    let (map, images) = localized_map(&points, a.k, delta, a.q)?;
    let c = a.c.unwrap_or_else(|| localized_constant(map.p, a.q));
    let cert = verify_localized(&points, &images, delta, c * a.k)?;
    let global: Option<Box<dyn GlobalMap>> = match a.global {
        GlobalArg::None => None,
        GlobalArg::Identity => Some(Box::new(Identity)),
        GlobalArg::Scale(f) => Some(Box::new(Scaling(f))),
        GlobalArg::Mazur(t) => Some(Box::new(GlobalMazur::fit(&images, t)?)),
    };
    let composition = match &global {
        None => None,
        Some(g) => {
            let comp = compose_localized(&map, &images, g.as_ref())?;
            let composed = verify_localized(&points, &comp.images, delta, f64::INFINITY)?;
            let bound = cert.achieved_d * comp.d2;
            let holds = composed.achieved_d <= bound * (1.0 + 1e-9);
            Some(json!({
                "global": g.name(),
                "d2": comp.d2,
                "bound": bound,
                "holds": holds,
                "certificate": composed,
            }))
        }
    };
    let mut cfg = config("embed-verify", a);
    cfg["resolved_delta"] = json!(delta);
    write_json(
        &a.out,
        &json!({
            "config": cfg,
            "delta": delta,
            "c": c,
            "map": map,
            "certificate": cert,
            "composition": composition,
        }),
    )?;
    println!(
        "{}: achieved D = {:.6} against D = {:.6} ({} separated pairs of {})",
        if cert.pass { "PASS" } else { "FAIL" },
        cert.achieved_d,
        cert.d,
        cert.separated_pairs,
        cert.pairs
    );
    if let Some(reason) = &cert.reason {
        println!("reason: {reason}");
    }
    if let Some(comp) = &composition {
        println!(
            "composed with {}: achieved D = {:.6}, bound D1*D2 = {:.6}, holds: {}",
            comp["global"].as_str().unwrap_or_default(),
            comp["certificate"]["achieved_d"].as_f64().unwrap_or(f64::NAN),
            comp["bound"].as_f64().unwrap_or(f64::NAN),
            comp["holds"]
        );
    }
    Ok(())
}

pub fn exponent_table(a: &ExponentTableArgs) -> CmdResult {
    let grid = linear_grid(a.p_min, a.p_max, a.steps);
    let table = build_table(&grid, a.k, a.eps)?;
    let comments = comment_lines(
        &config("exponent-table", a),
        &[
            ("checked", table.checked.to_string()),
            ("dominated", table.dominated.to_string()),
        ],
    );
    write_exponent_csv(&a.out, &table, &comments)?;
    println!(
        "{} rows; ours_limit strictly below nr25 at {}/{} grid points with p < 4",
        table.rows.len(),
        table.dominated,
        table.checked
    );
    Ok(())
}
