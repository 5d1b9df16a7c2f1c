use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde_json::json;

use nlb_core::model::{Model, ModelConfig};
use nlb_core::sampler::{KeyScheme, SamplerConfig};
use nlb_core::stats::{
    bench_update_scaling, measure_retention_edge, measure_retention_node, PoissonStreamSpec,
};
use nlb_core::stream::{
    chronological_split, inductive_mask, ingest_csv, read_cache, write_cache, write_csv,
    write_id_map, CsvSchema,
};
use nlb_core::train_eval::synthetic::{generate, SyntheticKind, SyntheticSpec};
use nlb_core::train_eval::{
    console_table, evaluate_inductive, evaluate_links, evaluate_nodes, replay, run_link_task,
    sweep, write_text, Engine, EngineCheckpoint, EvalReport, NegativeSampler, ReportHeader,
    SweepAxis, SweepRow, TrainConfig,
};
use nlb_core::TemporalStream;

use crate::manifest::RunManifest;
use crate::settings::{resolve_seed, Defaults};
use crate::{
    Axis, BenchArgs, Cli, Command, EvalArgs, GenArgs, IngestArgs, Kind, ModelArgs, Scheme,
    SweepArgs, Task, TrainArgs, VerifyArgs,
};

pub fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let defaults = Defaults::load(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest(a) => ingest(a, &defaults),
        Command::GenSynthetic(a) => gen_synthetic(a, &defaults),
        Command::VerifySampling(a) => verify_sampling(a, &defaults),
        Command::BenchUpdate(a) => bench_update(a, &defaults),
        Command::Train(a) => train(a, &defaults),
        Command::Eval(a) => eval(a, &defaults),
        Command::Sweep(a) => run_sweep(a, &defaults),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn key_scheme(s: Scheme) -> KeyScheme {
    match s {
        Scheme::Edge => KeyScheme::Edge,
        Scheme::Node => KeyScheme::Node,
    }
}

fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::Edge => "edge",
        Scheme::Node => "node",
    }
}

fn parse_scheme(d: &Defaults, flag: Option<Scheme>, section: &str) -> Result<Scheme> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match d.get::<String>(section, "scheme")?.as_deref() {
        None | Some("edge") => Ok(Scheme::Edge),
        Some("node") => Ok(Scheme::Node),
        Some(other) => bail!("config scheme {other:?} is not edge or node"),
    }
}

fn load_stream(path: &Path) -> Result<TemporalStream> {
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let stream = if is_csv {
        ingest_csv(path, &CsvSchema::default())
    } else {
        read_cache(path)
    };
    stream.with_context(|| format!("loading {}", path.display()))
}

fn ingest(a: IngestArgs, d: &Defaults) -> Result<ExitCode> {
    let start = Instant::now();
    let schema = CsvSchema {
        ts_scale: d.pick(a.scale, "ingest", "scale", 1.0)?,
        bipartite: d.switch(a.bipartite, "ingest", "bipartite")?,
    };
    let stream = ingest_csv(&a.input, &schema)?;
    write_cache(&stream, &a.cache_out)?;
    let ids = with_suffix(&a.cache_out, ".ids.csv");
    write_id_map(&stream.id_map, &ids)?;
    let mut m = RunManifest::new(
        "ingest",
        &json!({
            "input": a.input,
            "scale": schema.ts_scale,
            "bipartite": schema.bipartite,
        }),
    )?;
    m.dataset_sha256 = Some(stream.content_hash());
    m.time("total", start.elapsed().as_secs_f64());
    m.artifacts = vec![a.cache_out.clone(), ids];
    m.write_all()?;
    println!(
        "{} links, {} nodes, {} classes, edge features {} -> {}",
        stream.len(),
        stream.num_nodes,
        stream.num_classes,
        stream.features.dim(),
        a.cache_out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn gen_synthetic(a: GenArgs, d: &Defaults) -> Result<ExitCode> {
    let start = Instant::now();
    let kind = match a.kind {
        Some(Kind::Poisson) => SyntheticKind::Poisson,
        Some(Kind::RecencyTask) => SyntheticKind::RecencyTask,
        None => d
            .get::<String>("gen-synthetic", "kind")?
            .as_deref()
            .unwrap_or("recency-task")
            .parse()?,
    };
    let seed = resolve_seed(a.seed, d, "gen-synthetic")?;
    let spec = SyntheticSpec::new(
        kind,
        d.pick(a.nodes, "gen-synthetic", "nodes", 1000)?,
        d.pick(a.lambda, "gen-synthetic", "lambda", 1000.0)?,
        d.pick(a.horizon, "gen-synthetic", "horizon", 100.0)?,
        seed,
    );
    let stream = generate(&spec)?;
    write_csv(&stream, &a.out)?;
    let mut m = RunManifest::new(
        "gen-synthetic",
        &json!({
            "kind": kind.to_string(),
            "nodes": spec.nodes,
            "lambda": spec.lambda,
            "horizon": spec.horizon,
            "repeat_prob": spec.repeat_prob,
        }),
    )?;
    m.seed = Some(seed);
    m.dataset_sha256 = Some(stream.content_hash());
    m.time("total", start.elapsed().as_secs_f64());
    m.artifacts = vec![a.out.clone()];
    m.write_all()?;
    println!(
        "{} links over {} nodes -> {}",
        stream.len(),
        stream.num_nodes,
        a.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn verify_sampling(a: VerifyArgs, d: &Defaults) -> Result<ExitCode> {
    const S: &str = "verify-sampling";
    let start = Instant::now();
    let scheme = parse_scheme(d, a.scheme, S)?;
    let seed = resolve_seed(a.seed, d, S)?;
    let alpha = d.pick(a.alpha, S, "alpha", 0.9)?;
    let slots = d.pick(a.s, S, "s", 10)?;
    let lambda = d.pick(a.lambda, S, "lambda", 2.0)?;
    let trials = d.pick(a.trials, S, "trials", 200_000)?;
    let deltas = d.pick(a.deltas, S, "deltas", vec![1.0, 2.0, 5.0, 10.0])?;
    let competitors = d.pick(a.competitors, S, "competitors", 3)?;
    let max_delta = deltas.iter().copied().fold(0.0, f64::max);
    let horizon = d.pick(a.horizon, S, "horizon", 2.0 * max_delta)?;
    let cfg = SamplerConfig {
        scheme: key_scheme(scheme),
        ..SamplerConfig::edge(slots, alpha)
    }
    .with_seed(seed);
    let curve = match scheme {
        Scheme::Edge => measure_retention_edge(
            &cfg,
            &PoissonStreamSpec::uniform(lambda, horizon),
            trials,
            &deltas,
        )?,
        Scheme::Node => {
            let ls = (0..=competitors as u32).map(|v| (v, lambda)).collect();
            measure_retention_node(
                &cfg,
                &PoissonStreamSpec::per_neighbor(ls, horizon),
                trials,
                &deltas,
            )?
        }
    };
    let err = curve.max_abs_error();
    if !err.is_finite() {
        bail!("retention curve is not finite");
    }
    write_text(&a.out, &curve.to_csv())?;
    let mut m = RunManifest::new(
        S,
        &json!({
            "scheme": scheme_name(scheme),
            "alpha": alpha,
            "s": slots,
            "lambda": lambda,
            "trials": trials,
            "deltas": deltas,
            "competitors": competitors,
            "horizon": horizon,
        }),
    )?;
    m.seed = Some(seed);
    m.time("total", start.elapsed().as_secs_f64());
    m.artifacts = vec![a.out.clone()];
    m.write_all()?;
    println!(
        "{:>8}  {:>10}  {:>10}  {:>10}",
        "delta_t", "empirical", "theory", "abs err"
    );
    for b in &curve.bins {
        println!(
            "{:>8}  {:>10.5}  {:>10.5}  {:>10.5}",
            b.delta_t,
            b.empirical(),
            b.theory,
            (b.empirical() - b.theory).abs()
        );
    }
    println!("max |empirical - theory| = {err:.5}");
    match d.pick(a.tolerance, S, "tolerance", f64::INFINITY)? {
        tol if err > tol => {
            eprintln!("max error {err:.5} exceeds tolerance {tol}");
            Ok(ExitCode::from(2))
        }
        _ => Ok(ExitCode::SUCCESS),
    }
}

fn bench_update(a: BenchArgs, d: &Defaults) -> Result<ExitCode> {
    const S: &str = "bench-update";
    let start = Instant::now();
    let lengths = d.pick(a.lengths, S, "lengths", vec![10_000, 100_000, 1_000_000])?;
    if lengths.is_empty() || lengths.contains(&0) {
        bail!("--lengths must be positive");
    }
    let reps = d.pick(a.reps, S, "reps", 5)?;
    let nodes = d.pick(a.nodes, S, "nodes", 1000)?;
    let scheme = parse_scheme(d, a.scheme, S)?;
    let seed = resolve_seed(a.seed, d, S)?;
    let cfg = SamplerConfig {
        scheme: key_scheme(scheme),
        ..SamplerConfig::edge(d.pick(a.s, S, "s", 10)?, d.pick(a.alpha, S, "alpha", 0.9)?)
    }
    .with_seed(seed);
    let rows = bench_update_scaling(&cfg, &lengths, reps, nodes, seed)?;
    let mut csv =
        String::from("events,update_ns_mean,update_ns_std,oracle_ns_mean,oracle_ns_std\n");
    println!(
        "{:>10}  {:>18}  {:>18}",
        "events", "update ns/event", "uniform ns/query"
    );
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{:.3},{:.3},{:.3},{:.3}",
            r.events, r.update_ns_mean, r.update_ns_std, r.oracle_ns_mean, r.oracle_ns_std
        );
        println!(
            "{:>10}  {:>9.1} ± {:<6.1}  {:>9.1} ± {:<6.1}",
            r.events, r.update_ns_mean, r.update_ns_std, r.oracle_ns_mean, r.oracle_ns_std
        );
    }
    if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
        println!(
            "update cost ratio {:.2}x, query cost ratio {:.2}x",
            last.update_ns_mean / first.update_ns_mean,
            last.oracle_ns_mean / first.oracle_ns_mean
        );
    }
    if let Some(out) = a.out {
        write_text(&out, &csv)?;
        let mut m = RunManifest::new(
            S,
            &json!({
                "lengths": lengths,
                "reps": reps,
                "nodes": nodes,
                "sampler": cfg,
            }),
        )?;
        m.seed = Some(seed);
        m.time("total", start.elapsed().as_secs_f64());
        m.artifacts = vec![out];
        m.write_all()?;
    }
    Ok(ExitCode::SUCCESS)
}

struct Resolved {
    cfg: TrainConfig,
    task: Task,
    inductive: bool,
}

fn resolve(m: &ModelArgs, d: &Defaults, section: &str) -> Result<Resolved> {
    let base = TrainConfig::default();
    let seed = resolve_seed(m.seed, d, section)?;
    let scheme = parse_scheme(d, m.scheme, section)?;
    let dim = d.get::<usize>(section, "dim")?;
    let mut model = match m.dim.or(dim) {
        Some(dim) => ModelConfig::with_dims(dim),
        None => base.model,
    };
    model.d_time = d.pick(m.d_time, section, "d_time", model.d_time)?;
    model.dropout = d.pick(m.dropout, section, "dropout", model.dropout)?;
    let cfg = TrainConfig {
        batch_size: d.pick(m.batch_size, section, "batch_size", base.batch_size)?,
        epochs: d.pick(m.epochs, section, "epochs", base.epochs)?,
        lr: d.pick(m.lr, section, "lr", base.lr)?,
        eval_negatives: d.pick(
            m.eval_negatives,
            section,
            "eval_negatives",
            base.eval_negatives,
        )?,
        mask_prob: d.pick(m.mask_prob, section, "mask_prob", base.mask_prob)?,
        seed,
        sampler: SamplerConfig {
            scheme: key_scheme(scheme),
            slots: d.pick(m.s, section, "s", base.sampler.slots)?,
            alpha: d.pick(m.alpha, section, "alpha", base.sampler.alpha)?,
            seed,
            ..base.sampler
        },
        model,
        ..base
    };
    cfg.validate()?;
    let task = match m.task {
        Some(t) => t,
        None => match d.get::<String>(section, "task")?.as_deref() {
            None | Some("link") => Task::Link,
            Some("node") => Task::Node,
            Some(other) => bail!("config task {other:?} is not link or node"),
        },
    };
    Ok(Resolved {
        cfg,
        task,
        inductive: d.switch(m.inductive, section, "inductive")?,
    })
}

fn check_finite(rows: &[(String, EvalReport)]) -> Result<()> {
    for (name, r) in rows {
        if !r.is_finite() {
            bail!("{name} report is not finite: {r:?}");
        }
    }
    Ok(())
}

fn node_report(
    stream: &TemporalStream,
    model: &Model<f32>,
    cfg: &TrainConfig,
    split: &nlb_core::stream::SplitView,
) -> Result<EvalReport> {
    if stream.num_classes < 2 {
        bail!("--task node needs a stream with at least two label classes");
    }
    let mut engine = Engine::new(stream, model.clone(), cfg.sampler)?;
    Ok(evaluate_nodes(&mut engine, split, cfg)?)
}

fn train(a: TrainArgs, d: &Defaults) -> Result<ExitCode> {
    let start = Instant::now();
    let stream = load_stream(&a.model.data)?;
    let Resolved {
        cfg,
        task,
        inductive,
    } = resolve(&a.model, d, "train")?;
    let hash = stream.content_hash();
    let run = run_link_task(&stream, &cfg, inductive)?;
    let mut rows = vec![("val".to_string(), run.val), ("test".to_string(), run.test)];
    if task == Task::Node {
        rows.push((
            "node-test".into(),
            node_report(&stream, &run.model, &cfg, &run.split)?,
        ));
    }
    check_finite(&rows)?;

    run.model.save(&cfg.sampler, &a.ckpt_out)?;
    let boundary = with_suffix(&a.ckpt_out, ".boundary");
    run.boundary.save(&boundary)?;
    let report = a
        .report_out
        .clone()
        .unwrap_or_else(|| with_suffix(&a.ckpt_out, ".report.csv"));
    let header = ReportHeader::new(cfg.seed, hash.clone(), &cfg);
    let refs: Vec<(&str, &EvalReport)> = rows.iter().map(|(n, r)| (n.as_str(), r)).collect();
    write_text(&report, &EvalReport::to_csv(&header, &refs))?;

    let mut m = RunManifest::new(
        "train",
        &json!({ "train": cfg, "task": format!("{task:?}").to_lowercase(), "inductive": inductive, "data": a.model.data }),
    )?;
    m.seed = Some(cfg.seed);
    m.dataset_sha256 = Some(hash);
    for (i, e) in run.epochs.iter().enumerate() {
        m.time(&format!("epoch_{i}"), e.seconds);
    }
    m.time("total", start.elapsed().as_secs_f64());
    m.artifacts = vec![a.ckpt_out.clone(), boundary, report.clone()];
    m.write_all()?;

    for (i, e) in run.epochs.iter().enumerate() {
        println!("epoch {i}: loss {:.5} ({:.2} s)", e.mean_loss, e.seconds);
    }
    print!("{}", console_table(&rows));
    println!("report -> {}", report.display());
    Ok(ExitCode::SUCCESS)
}

fn eval(a: EvalArgs, d: &Defaults) -> Result<ExitCode> {
    let start = Instant::now();
    let stream = load_stream(&a.model.data)?;
    let Resolved {
        mut cfg,
        task,
        inductive,
    } = resolve(&a.model, d, "eval")?;
    let (model, sampler) = Model::<f32>::load(&a.ckpt)?;
    let mc = model.config();
    if mc.edge_dim != stream.features.dim() {
        bail!(
            "checkpoint expects {} edge features, stream has {}",
            mc.edge_dim,
            stream.features.dim()
        );
    }
    // The checkpoint fixes the sampler and dimensions.
    cfg.sampler = sampler;
    cfg.model = *mc;
    let hash = stream.content_hash();
    let mut split = chronological_split(&stream, cfg.split)?;
    if inductive {
        split = inductive_mask(&split, &stream, cfg.mask_prob, cfg.seed);
    }
    let negs = NegativeSampler::for_links(&stream.links)?;
    let mut engine = Engine::new(&stream, model.clone(), sampler)?;
    let mut rows = Vec::new();
    let boundary = with_suffix(&a.ckpt, ".boundary");
    if inductive {
        rows.push((
            "test".to_string(),
            evaluate_inductive(&mut engine, &split, &negs, &cfg)?,
        ));
    } else {
        if boundary.exists() {
            engine.restore(&EngineCheckpoint::load(&boundary)?);
        } else {
            replay(&mut engine, &split.train_links(&stream), cfg.batch_size)?;
        }
        rows.push((
            "val".to_string(),
            evaluate_links(&mut engine, split.val_links(&stream), &negs, &cfg, 1)?,
        ));
        rows.push((
            "test".to_string(),
            evaluate_links(&mut engine, split.test_links(&stream), &negs, &cfg, 2)?,
        ));
    }
    if task == Task::Node {
        rows.push((
            "node-test".into(),
            node_report(&stream, &model, &cfg, &split)?,
        ));
    }
    check_finite(&rows)?;
    let header = ReportHeader::new(cfg.seed, hash.clone(), &cfg);
    let refs: Vec<(&str, &EvalReport)> = rows.iter().map(|(n, r)| (n.as_str(), r)).collect();
    write_text(&a.out, &EvalReport::to_csv(&header, &refs))?;
    let mut m = RunManifest::new(
        "eval",
        &json!({ "eval": cfg, "ckpt": a.ckpt, "task": format!("{task:?}").to_lowercase(), "inductive": inductive, "data": a.model.data }),
    )?;
    m.seed = Some(cfg.seed);
    m.dataset_sha256 = Some(hash);
    m.time("total", start.elapsed().as_secs_f64());
    m.artifacts = vec![a.out.clone()];
    m.write_all()?;
    print!("{}", console_table(&rows));
    Ok(ExitCode::SUCCESS)
}

fn run_sweep(a: SweepArgs, d: &Defaults) -> Result<ExitCode> {
    let start = Instant::now();
    let stream = load_stream(&a.model.data)?;
    let Resolved { cfg, inductive, .. } = resolve(&a.model, d, "sweep")?;
    let axis = match a.axis {
        Axis::Alpha => SweepAxis::Alpha,
        Axis::S => SweepAxis::S,
    };
    let hash = stream.content_hash();
    let rows: Vec<SweepRow> = sweep(&stream, &cfg, axis, &a.values, inductive)?;
    let table: Vec<(String, EvalReport)> = rows
        .iter()
        .map(|r| (format!("{}={}", r.axis, r.value), r.report))
        .collect();
    check_finite(&table)?;
    let header = ReportHeader::new(cfg.seed, hash.clone(), &cfg);
    write_text(&a.out, &SweepRow::to_csv(&header, &rows))?;
    let mut m = RunManifest::new(
        "sweep",
        &json!({ "base": cfg, "axis": axis, "values": a.values, "inductive": inductive, "data": a.model.data }),
    )?;
    m.seed = Some(cfg.seed);
    m.dataset_sha256 = Some(hash);
    m.time("total", start.elapsed().as_secs_f64());
    m.artifacts = vec![a.out.clone()];
    m.write_all()?;
    print!("{}", console_table(&table));
    Ok(ExitCode::SUCCESS)
}
