use std::fs;
use std::path::Path;
use std::time::Instant;

use prs_core::datamodel::{load_dataset, save_dataset, Dataset};
use prs_core::eval::{alpha_sweep, exhaustive_oracle, list_metric_pearson, permutation_count};
use prs_core::numerics::Checkpoint;
use prs_core::pipeline::{uplift, Reranker, UpliftReport};
use prs_core::pmatch::{
    calc_estimated_reward, fpsa, read_candidate_file, train_pointwise, write_candidate_file,
    FpsaConfig, PointwiseModel, ScoredCandidate, SessionCandidates, Target,
};
use prs_core::prank::{lr_metric, select_best, sr_metric, train_dpwn, DpwnModel};
use prs_core::simulator::{gen_catalog, session_seed, Catalog};
use prs_core::{PrsError, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Config, DataKind};

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, contents)?;
    Ok(())
}

fn read_dataset_at(cfg: &Config, rel: &Path, what: &str) -> Result<Dataset> {
    let path = cfg.resolve(rel);
    if !path.exists() {
        return Err(PrsError::Config(format!(
            "{what} {} not found (run gen-data first)",
            path.display()
        )));
    }
    load_dataset(&path)
}

fn read_checkpoint(cfg: &Config, rel: &Path, trainer: &str) -> Result<Checkpoint> {
    let path = cfg.resolve(rel);
    if !path.exists() {
        return Err(PrsError::Config(format!(
            "checkpoint {} not found (run {trainer} first)",
            path.display()
        )));
    }
    Checkpoint::load(&path)
}

fn load_reranker(cfg: &Config) -> Result<Reranker> {
    let p = &cfg.paths;
    Ok(Reranker {
        ctr: PointwiseModel::from_checkpoint(
            &read_checkpoint(cfg, &p.ctr, "train-ctr")?,
            Target::Ctr,
        )?,
        next: PointwiseModel::from_checkpoint(
            &read_checkpoint(cfg, &p.next, "train-next")?,
            Target::Next,
        )?,
        dpwn: DpwnModel::from_checkpoint(&read_checkpoint(cfg, &p.dpwn, "train-dpwn")?)?,
        fpsa: cfg.rerank.fpsa(),
        include_greedy: cfg.rerank.include_greedy,
    })
}

pub fn gen_data(cfg: &Config) -> Result<String> {
    let d = &cfg.data;
    let catalog = gen_catalog(&cfg.sim_spec())?;
    let (train, requests) = match d.kind {
        DataKind::Simulator => (
            catalog.gen_logs_range(0..d.sessions, d.m, d.n, &d.logging)?,
            catalog.gen_logs_range(d.sessions..d.sessions + d.requests, d.m, d.n, &d.logging)?,
        ),
        DataKind::AnchorOnly => (
            catalog.anchor_only_logs(d.sessions, d.m, d.n, cfg.seed)?,
            catalog.anchor_only_logs(d.requests, d.m, d.n, cfg.seed.wrapping_add(1))?,
        ),
    };
    let train_path = cfg.resolve(&cfg.paths.dataset);
    let req_path = cfg.resolve(&cfg.paths.requests);
    ensure_parent(&train_path)?;
    ensure_parent(&req_path)?;
    save_dataset(&train, &train_path)?;
    save_dataset(&requests, &req_path)?;
    Ok(format!(
        "gen-data: {} sessions -> {}, {} requests -> {}",
        train.records.len(),
        train_path.display(),
        requests.records.len(),
        req_path.display()
    ))
}

fn save_checkpoint(cfg: &Config, rel: &Path, ckpt: &Checkpoint) -> Result<String> {
    let path = cfg.resolve(rel);
    ensure_parent(&path)?;
    ckpt.save(&path)?;
    Ok(path.display().to_string())
}

fn fmt_auc(r: Result<(f64, f64)>) -> String {
    match r {
        Ok((loss, auc)) => format!("valid loss {loss:.4}, auc {auc:.4}"),
        Err(e) => format!("no validation metrics ({e})"),
    }
}

pub fn train_point(cfg: &Config, target: Target) -> Result<String> {
    let ds = read_dataset_at(cfg, &cfg.paths.dataset, "dataset")?;
    let (model, log) = train_pointwise(&ds, target, &cfg.train, cfg.seed)?;
    let (name, rel) = match target {
        Target::Ctr => ("train-ctr", &cfg.paths.ctr),
        Target::Next => ("train-next", &cfg.paths.next),
    };
    let out = save_checkpoint(cfg, rel, &model.to_checkpoint())?;
    let (_, valid) = ds.split(cfg.train.valid_fraction);
    Ok(format!(
        "{name}: {} epochs (best {}), {} -> {out}",
        log.epochs_run,
        log.best_epoch,
        fmt_auc(model.evaluate(valid))
    ))
}

pub fn train_list(cfg: &Config) -> Result<String> {
    let ds = read_dataset_at(cfg, &cfg.paths.dataset, "dataset")?;
    let (model, log) = train_dpwn(&ds, &cfg.train, cfg.seed)?;
    let out = save_checkpoint(cfg, &cfg.paths.dpwn, &model.to_checkpoint())?;
    let (_, valid) = ds.split(cfg.train.valid_fraction);
    Ok(format!(
        "train-dpwn: {} epochs (best {}), {} -> {out}",
        log.epochs_run,
        log.best_epoch,
        fmt_auc(model.evaluate(valid))
    ))
}

#[derive(Serialize)]
struct RerankLine {
    session: usize,
    user: u32,
    items: Vec<u32>,
    lr: f64,
    probs: Vec<f64>,
    r_pv: f64,
    r_ipv: f64,
    r_sum: f64,
    lists: usize,
}

pub fn rerank(cfg: &Config) -> Result<String> {
    let rr = load_reranker(cfg)?;
    let requests = read_dataset_at(cfg, &cfg.paths.requests, "request file")?;
    let external = match &cfg.paths.candidates_in {
        Some(p) => {
            let path = cfg.resolve(p);
            let file = fs::File::open(&path).map_err(|e| {
                PrsError::Config(format!(
                    "cannot open candidate file {}: {e}",
                    path.display()
                ))
            })?;
            Some(read_candidate_file(file)?)
        }
        None => None,
    };
    let mut lines = String::new();
    let mut generated = Vec::new();
    let mut lr_total = 0.0;
    for (s, rec) in requests.records.iter().enumerate() {
        let scored = rr.score(&rec.user, &rec.candidates);
        let set = match &external {
            Some(sessions) => sessions
                .iter()
                .find(|c| c.session == s)
                .ok_or_else(|| PrsError::Lookup(format!("candidate file has no session {s}")))?
                .to_set(&rec.candidates, &scored)?,
            None => rr.candidate_set(&scored)?,
        };
        if cfg.paths.candidates_out.is_some() {
            generated.push(SessionCandidates::from_set(s, &set, &rec.candidates));
        }
        let out = rr.select(&rec.user, &rec.candidates, &set)?;
        lr_total += out.lr;
        let line = RerankLine {
            session: s,
            user: rec.user.user_id,
            items: out.item_ids,
            lr: out.lr,
            probs: out.probs,
            r_pv: out.reward.r_pv,
            r_ipv: out.reward.r_ipv,
            r_sum: out.reward.r_sum,
            lists: out.candidate_lists,
        };
        lines.push_str(&serde_json::to_string(&line).map_err(|e| PrsError::Format(e.to_string()))?);
        lines.push('\n');
    }
    let out_path = cfg.resolve(&cfg.paths.reranked);
    write_file(&out_path, &lines)?;
    if let Some(p) = &cfg.paths.candidates_out {
        let path = cfg.resolve(p);
        ensure_parent(&path)?;
        write_candidate_file(&generated, fs::File::create(&path)?)?;
    }
    let n = requests.records.len();
    Ok(format!(
        "rerank: {n} sessions, mean LR {:.4} -> {}",
        if n == 0 { 0.0 } else { lr_total / n as f64 },
        out_path.display()
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelMetrics {
    pub loss: f64,
    pub auc: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub validation_records: usize,
    pub ctr: Option<ModelMetrics>,
    pub next: Option<ModelMetrics>,
    pub dpwn: Option<ModelMetrics>,
    pub pearson_lr: Option<f64>,
    pub pearson_sr: Option<f64>,
    pub uplift: Option<UpliftReport>,
}

fn metrics(r: Result<(f64, f64)>) -> Option<ModelMetrics> {
    r.ok().map(|(loss, auc)| ModelMetrics { loss, auc })
}

pub fn evaluate(cfg: &Config) -> Result<String> {
    let rr = load_reranker(cfg)?;
    let ds = read_dataset_at(cfg, &cfg.paths.dataset, "dataset")?;
    let (_, valid) = ds.split(cfg.train.valid_fraction);
    let pearson_lr = list_metric_pearson(valid, |r| {
        lr_metric(&rr.dpwn, &r.user, &r.exhibited).unwrap_or(f64::NAN)
    })
    .ok();
    let pearson_sr = list_metric_pearson(valid, |r| {
        sr_metric(&rr.ctr, &r.user, &r.exhibited).unwrap_or(f64::NAN)
    })
    .ok();
    let uplift = match cfg.data.kind {
        DataKind::Simulator => {
            let req_path = cfg.resolve(&cfg.paths.requests);
            if req_path.exists() {
                let requests = load_dataset(&req_path)?;
                let catalog = gen_catalog(&cfg.sim_spec())?;
                Some(uplift(&catalog, &rr, &requests.records)?)
            } else {
                None
            }
        }
        // The anchor-only labels have no simulator closed form.
        DataKind::AnchorOnly => None,
    };
    let report = EvalReport {
        validation_records: valid.len(),
        ctr: metrics(rr.ctr.evaluate(valid)),
        next: metrics(rr.next.evaluate(valid)),
        dpwn: metrics(rr.dpwn.evaluate(valid)),
        pearson_lr: pearson_lr.filter(|v| v.is_finite()),
        pearson_sr: pearson_sr.filter(|v| v.is_finite()),
        uplift,
    };
    let text =
        serde_json::to_string_pretty(&report).map_err(|e| PrsError::Format(e.to_string()))?;
    let path = cfg.resolve(&cfg.paths.report);
    write_file(&path, &(text + "\n"))?;
    let auc = |m: &Option<ModelMetrics>| {
        m.as_ref()
            .map_or("n/a".to_string(), |m| format!("{:.4}", m.auc))
    };
    let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    let ri = report
        .uplift
        .as_ref()
        .and_then(|u| u.ri_ipv)
        .map_or("n/a".to_string(), |r| format!("{:+.2}%", 100.0 * r));
    Ok(format!(
        "evaluate: auc ctr {} next {} dpwn {}, pearson LR {} SR {}, E_IPV RI vs greedy {ri} -> {}",
        auc(&report.ctr),
        auc(&report.next),
        auc(&report.dpwn),
        opt(report.pearson_lr),
        opt(report.pearson_sr),
        path.display()
    ))
}

pub fn sweep_alpha(cfg: &Config) -> Result<String> {
    let rr = load_reranker(cfg)?;
    let requests = read_dataset_at(cfg, &cfg.paths.requests, "request file")?;
    let rows = alpha_sweep(
        &requests.records,
        &rr.ctr,
        &rr.next,
        &rr.dpwn,
        &cfg.sweep.alphas,
        cfg.rerank.beta,
        cfg.rerank.n,
        cfg.rerank.beam_k,
    )?;
    let mut table = String::from("alpha\tmean_lr\n");
    for (a, lr) in &rows {
        table.push_str(&format!("{a}\t{lr:.10}\n"));
    }
    let path = cfg.resolve(&cfg.paths.sweep);
    write_file(&path, &table)?;
    Ok(format!(
        "{table}sweep-alpha: {} rows -> {}",
        rows.len(),
        path.display()
    ))
}

/// Random scores for a synthetic input list of `m` catalog items.
pub fn random_scores(catalog: &Catalog, m: usize, rng: &mut ChaCha8Rng) -> Vec<ScoredCandidate> {
    let (_, items) = catalog.sample_request(m, rng);
    items
        .into_iter()
        .map(|item| ScoredCandidate {
            item,
            p_ctr: rng.random_range(0.01..0.99),
            p_next: rng.random_range(0.01..0.99),
        })
        .collect()
}

pub fn bench(cfg: &Config) -> Result<String> {
    let b = &cfg.bench;
    let spec = cfg.sim_spec();
    if b.m as u32 > spec.items {
        return Err(PrsError::Config(format!(
            "bench m = {} exceeds catalog size {}",
            b.m, spec.items
        )));
    }
    let catalog = gen_catalog(&spec)?;
    let dpwn_path = cfg.resolve(&cfg.paths.dpwn);
    let dpwn = if dpwn_path.exists() {
        DpwnModel::from_checkpoint(&Checkpoint::load(&dpwn_path)?)?
    } else {
        DpwnModel::new(spec.schema(), Default::default(), &cfg.train, cfg.seed)
    };
    let fcfg = FpsaConfig {
        n: b.n,
        beam_k: b.beam_k,
        alpha: cfg.rerank.alpha,
        beta: cfg.rerank.beta,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut fpsa_ms, mut prank_ms, mut lists) = (Vec::new(), Vec::new(), 0);
    for _ in 0..b.calls.max(1) {
        let scored = random_scores(&catalog, b.m, &mut rng);
        let user = catalog.users[rng.random_range(0..catalog.users.len())];
        let t = Instant::now();
        let set = fpsa(&scored, &fcfg)?;
        fpsa_ms.push(t.elapsed().as_secs_f64() * 1e3);
        let items: Vec<_> = scored.iter().map(|s| s.item).collect();
        let t = Instant::now();
        select_best(&set, &dpwn, &user, &items)?;
        prank_ms.push(t.elapsed().as_secs_f64() * 1e3);
        lists += set.len();
    }
    let stats = |v: &[f64]| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let max = v.iter().cloned().fold(0.0, f64::max);
        (mean, max)
    };
    let (fm, fx) = stats(&fpsa_ms);
    let (pm, px) = stats(&prank_ms);
    Ok(format!(
        "bench: m={} n={} k={} over {} calls; fpsa mean {fm:.3} ms (max {fx:.3}); prank mean {pm:.3} ms (max {px:.3}) for {:.1} lists/call",
        b.m,
        b.n,
        b.beam_k,
        fpsa_ms.len(),
        lists as f64 / fpsa_ms.len() as f64
    ))
}

/// Whether full-beam FPSA returned the exhaustive argmax on every instance.
pub fn oracle_check(cfg: &Config) -> Result<(bool, String)> {
    let o = &cfg.oracle;
    let spec = cfg.sim_spec();
    if o.m as u32 > spec.items {
        return Err(PrsError::Config(format!(
            "oracle m = {} exceeds catalog size {}",
            o.m, spec.items
        )));
    }
    let full = permutation_count(o.m, o.n);
    let beam_k =
        usize::try_from(full).map_err(|_| PrsError::Resource("beam width overflow".into()))?;
    let catalog = gen_catalog(&spec)?;
    let fcfg = FpsaConfig {
        n: o.n,
        beam_k,
        alpha: cfg.rerank.alpha,
        beta: cfg.rerank.beta,
    };
    let mut table = String::from("instance\tfpsa\toracle\tr_sum\tstatus\n");
    let mut matched = 0;
    for i in 0..o.instances {
        let mut rng = ChaCha8Rng::seed_from_u64(session_seed(cfg.seed, i as u64));
        let scored = random_scores(&catalog, o.m, &mut rng);
        let top = fpsa(&scored, &fcfg)?.lists.remove(0).entry;
        let oracle = exhaustive_oracle(o.m, o.n, false, |items| {
            Ok(calc_estimated_reward(items, &scored, fcfg.alpha, fcfg.beta)?.r_sum)
        })?;
        let ok = top.items == oracle.best;
        matched += usize::from(ok);
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        table.push_str(&format!(
            "{i}\t{}\t{}\t{:.12}\t{}\n",
            join(&top.items),
            join(&oracle.best),
            oracle.best_value,
            if ok { "MATCH" } else { "MISMATCH" }
        ));
    }
    let path = cfg.resolve(&cfg.paths.oracle);
    write_file(&path, &table)?;
    let all = matched == o.instances;
    Ok((
        all,
        format!(
            "oracle-check: {} ({matched}/{} instances, m={} n={} beam={beam_k}) -> {}",
            if all { "MATCH" } else { "MISMATCH" },
            o.instances,
            o.m,
            o.n,
            path.display()
        ),
    ))
}
