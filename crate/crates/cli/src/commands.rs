use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use polyview_core::acoa::{explain_plan, run_pipeline, AcoaError, Answer, LevelProfile};
use polyview_core::corpus::{index_corpus, load_corpus, CorpusError};
use polyview_core::eval::{load_dataset, run_eval, EvalError, EvalOptions, EvalReport};
use polyview_core::gateway::{Gateway, GatewayError, MockChat, MockEmbedder, MockPolicy, RemoteClient};
use polyview_core::spaces::{load_bundle, persist_bundle, EmbedderKind, EmbedderSpec, IndexBundle, SpaceError};
use serde_json::{json, Value};

use crate::config::PipelineConfig;
use crate::{Cli, Command, Failure, Format};

fn corpus_failure(e: CorpusError) -> Failure {
    match e {
        CorpusError::Io { ref source, .. } if source.kind() != io::ErrorKind::NotFound => Failure::Env(e.to_string()),
        CorpusError::Index(s) => space_failure(s),
        e => Failure::User(e.to_string()),
    }
}

fn space_failure(e: SpaceError) -> Failure {
    match e {
        SpaceError::EmptyCorpus | SpaceError::InvalidSpec(_) | SpaceError::UnknownDocument { .. } | SpaceError::DuplicateChunk(_) => {
            Failure::User(e.to_string())
        }
        SpaceError::EmbedderFailure { ref source, .. } => gateway_failure_kind(source, e.to_string()),
        _ => Failure::Env(e.to_string()),
    }
}

fn gateway_failure_kind(g: &GatewayError, msg: String) -> Failure {
    match g {
        GatewayError::InvalidRequest(_) => Failure::User(msg),
        _ => Failure::Env(msg),
    }
}

fn acoa_failure(e: AcoaError) -> Failure {
    match e {
        AcoaError::Gateway(ref g) => gateway_failure_kind(g, e.to_string()),
        e => Failure::User(e.to_string()),
    }
}

fn eval_failure(e: EvalError) -> Failure {
    match e {
        EvalError::Io { ref source, .. } if source.kind() != io::ErrorKind::NotFound => Failure::Env(e.to_string()),
        EvalError::Judge(ref g) => gateway_failure_kind(g, e.to_string()),
        e => Failure::User(e.to_string()),
    }
}

fn write_failure(e: io::Error) -> Failure {
    Failure::Env(format!("write failed: {e}"))
}

/// File config, then `--set` overrides, then dedicated flags.
pub fn effective_config(cli: &Cli) -> Result<PipelineConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    cfg.apply_overrides(&cli.overrides)?;
    if let Some(p) = cli.profile {
        cfg.profile = p;
    }
    if cli.mock_llm {
        cfg.mock_llm = true;
    }
    if let Some(d) = &cli.index_dir {
        cfg.index_dir = d.clone();
    }
    if let Command::Eval { judge, threshold, .. } = &cli.command {
        if let Some(j) = judge {
            cfg.judge = (*j).into();
        }
        if let Some(t) = threshold {
            cfg.threshold = *t;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn remote(cfg: &PipelineConfig, dim: usize) -> Result<RemoteClient, Failure> {
    let provider = cfg
        .gateway
        .clone()
        .ok_or_else(|| Failure::User("no [gateway] configured; add one or pass --mock-llm".into()))?;
    RemoteClient::new(provider, dim).map_err(|e| Failure::User(e.to_string()))
}

/// Gateway whose embedder matches `spec`.
pub fn gateway_for(cfg: &PipelineConfig, spec: &EmbedderSpec) -> Result<Gateway, Failure> {
    let remote_embed = spec.kind == EmbedderKind::Remote;
    if remote_embed && cfg.mock_llm {
        return Err(Failure::User(
            "the index was built with a remote embedder and cannot be queried with --mock-llm".into(),
        ));
    }
    if cfg.mock_llm {
        return Ok(Gateway::mock(MockPolicy::ExtractiveSynthesis, spec.dim));
    }
    let chat = remote(cfg, spec.dim)?;
    Ok(if remote_embed {
        Gateway::new(chat, remote(cfg, spec.dim)?)
    } else {
        Gateway::new(chat, MockEmbedder::new(spec.dim))
    })
}

fn index_gateway(cfg: &PipelineConfig) -> Result<Gateway, Failure> {
    if cfg.mock_llm || cfg.embedder.kind == EmbedderKind::Mock {
        return Ok(Gateway::new(MockChat::new(MockPolicy::ExtractiveSynthesis), MockEmbedder::new(cfg.embedder.dim)));
    }
    let embed = remote(cfg, cfg.embedder.dim)?;
    Ok(Gateway::new(MockChat::new(MockPolicy::ExtractiveSynthesis), embed))
}

fn corpus_dir(arg: &Option<PathBuf>, cfg: &PipelineConfig) -> Result<PathBuf, Failure> {
    let dir = arg
        .clone()
        .or_else(|| cfg.corpus_dir.clone())
        .ok_or_else(|| Failure::User("no corpus directory given".into()))?;
    if !dir.is_dir() {
        return Err(Failure::User(format!("corpus directory {} does not exist", dir.display())));
    }
    Ok(dir)
}

pub fn open_index(dir: &Path) -> Result<IndexBundle, Failure> {
    if !dir.join("manifest.json").is_file() {
        return Err(Failure::User(format!(
            "no index at {}; run `polyview index` first",
            dir.display()
        )));
    }
    load_bundle(dir).map_err(space_failure)
}

fn json_line(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let cfg = effective_config(cli)?;
    if cli.verbose {
        writeln!(err, "# effective configuration (digest {})\n{}", cfg.digest(), cfg.to_toml()).map_err(write_failure)?;
    }
    let text = match &cli.command {
        Command::Ingest { corpus_dir: dir } => cmd_ingest(&corpus_dir(dir, &cfg)?, &cfg, cli.format)?,
        Command::Index { corpus_dir: dir } => cmd_index(&corpus_dir(dir, &cfg)?, &cfg, cli.format)?,
        Command::Query { question } => cmd_query(question, &cfg, cli.format)?,
        Command::Eval { profiles, report, .. } => {
            let dataset = cli
                .dataset
                .as_deref()
                .ok_or_else(|| Failure::User("eval needs --dataset <FILE>".into()))?;
            let r = cmd_eval(dataset, profiles, &cfg)?;
            if let Some(path) = report {
                fs::write(path, r.to_json()).map_err(|e| Failure::Env(format!("{}: {e}", path.display())))?;
            }
            match cli.format {
                Format::Text => r.to_text(),
                Format::Json => r.to_json(),
            }
        }
        Command::ExplainPlan { question } => cmd_explain_plan(question, &cfg, cli.format)?,
    };
    out.write_all(text.as_bytes()).map_err(write_failure)
}

pub fn cmd_ingest(dir: &Path, cfg: &PipelineConfig, format: Format) -> Result<String, Failure> {
    let corpus = load_corpus(dir).map_err(corpus_failure)?;
    let mut docs = Vec::new();
    let mut total = 0;
    for (path, tree) in corpus.files.iter().zip(&corpus.trees) {
        let n = polyview_core::doc::chunk_tree(tree, &cfg.chunking)
            .map_err(|e| Failure::User(format!("{}: {e}", path.display())))?
            .len();
        total += n;
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        docs.push((name, tree.doc_id().to_string(), n));
    }
    Ok(match format {
        Format::Json => json_line(&json!({
            "files": docs.len(),
            "chunks": total,
            "corpus_hash": corpus.corpus_hash,
            "documents": docs.iter().map(|(f, d, n)| json!({"file": f, "doc_id": d, "chunks": n})).collect::<Vec<_>>(),
        })),
        Format::Text => {
            let mut s = String::new();
            for (f, d, n) in &docs {
                s.push_str(&format!("{f}\t{d}\t{n} chunks\n"));
            }
            s.push_str(&format!("{} files, {total} chunks\n", docs.len()));
            s
        }
    })
}

pub fn cmd_index(dir: &Path, cfg: &PipelineConfig, format: Format) -> Result<String, Failure> {
    let corpus = load_corpus(dir).map_err(corpus_failure)?;
    let gateway = index_gateway(cfg)?;
    let mut bundle = index_corpus(&corpus, &cfg.chunking, gateway.embedder.as_ref()).map_err(corpus_failure)?;
    bundle.manifest.config_digest = Some(cfg.digest());
    let digest = persist_bundle(&bundle, &cfg.index_dir).map_err(space_failure)?;
    Ok(match format {
        Format::Json => json_line(&json!({
            "files": corpus.files.len(),
            "chunks": bundle.chunks.len(),
            "corpus_hash": bundle.manifest.corpus_hash,
            "manifest_digest": digest,
            "index_dir": cfg.index_dir.display().to_string(),
        })),
        Format::Text => format!(
            "indexed {} chunks from {} files into {}\nmanifest digest {digest}\n",
            bundle.chunks.len(),
            corpus.files.len(),
            cfg.index_dir.display()
        ),
    })
}

pub fn answer_question(question: &str, cfg: &PipelineConfig) -> Result<(Answer, IndexBundle), Failure> {
    let bundle = open_index(&cfg.index_dir)?;
    let gateway = gateway_for(cfg, &bundle.manifest.embedder)?;
    let answer = run_pipeline(question, cfg.profile, &bundle, &gateway, &cfg.acoa()).map_err(acoa_failure)?;
    Ok((answer, bundle))
}

pub fn cmd_query(question: &str, cfg: &PipelineConfig, format: Format) -> Result<String, Failure> {
    let (answer, bundle) = answer_question(question, cfg)?;
    Ok(match format {
        Format::Json => {
            let mut v = serde_json::to_value(&answer).expect("answer serializes");
            v["config_digest"] = json!(cfg.digest());
            v["corpus_hash"] = json!(bundle.manifest.corpus_hash);
            json_line(&v)
        }
        Format::Text => {
            let mut s = format!("{}\n\nCitations:\n", answer.text);
            for (i, id) in answer.citations.iter().enumerate() {
                let crumb = bundle.chunk(id).map(|c| c.breadcrumb.join(" > ")).unwrap_or_default();
                if crumb.is_empty() {
                    s.push_str(&format!("  [{}] {id}\n", i + 1));
                } else {
                    s.push_str(&format!("  [{}] {id} ({crumb})\n", i + 1));
                }
            }
            s.push_str(&format!(
                "\nprofile {} | intent {} | iterations {}\n",
                answer.profile, answer.intent, answer.iterations
            ));
            s
        }
    })
}

pub fn cmd_eval(dataset: &Path, profiles: &[LevelProfile], cfg: &PipelineConfig) -> Result<EvalReport, Failure> {
    let items = load_dataset(dataset).map_err(eval_failure)?;
    let bundle = open_index(&cfg.index_dir)?;
    let gateway = gateway_for(cfg, &bundle.manifest.embedder)?;
    let profiles = if profiles.is_empty() { LevelProfile::ALL.to_vec() } else { profiles.to_vec() };
    let opts = EvalOptions {
        acoa: cfg.acoa(),
        judge: cfg.judge,
        threshold: cfg.threshold,
        dataset: dataset
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| dataset.display().to_string()),
        config_digest: Some(cfg.digest()),
    };
    Ok(run_eval(&items, &profiles, &bundle, &gateway, &opts))
}

pub fn cmd_explain_plan(question: &str, cfg: &PipelineConfig, format: Format) -> Result<String, Failure> {
    let (intent, trace) = explain_plan(question, cfg.profile, &cfg.acoa()).map_err(acoa_failure)?;
    Ok(match format {
        Format::Json => json_line(&json!({"intent": intent, "profile": cfg.profile, "trace": trace})),
        Format::Text => {
            let mut s = format!("intent {intent}\nprofile {}\n", cfg.profile);
            for t in &trace {
                let v = serde_json::to_value(t).expect("trace serializes");
                let params = v.get("params").map(Value::to_string).unwrap_or_default();
                s.push_str(format!("  {} {}", v["action"].as_str().unwrap_or_default(), params).trim_end());
                s.push('\n');
            }
            s
        }
    })
}
