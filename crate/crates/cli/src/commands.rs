//! Subcommand implementations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use tapgesture::bench::measure_latency;
use tapgesture::eval::metrics::{MetricSet, ScoredTrial};
use tapgesture::eval::protocol::{enrollment_sweep, nontap_slots, prepare_cell, run_protocol, CellData, ProtocolKind};
use tapgesture::eval::report::{enrollment_csv, write_report, write_text, AGGREGATE_HEADER};
use tapgesture::forest::{train_forest, RNG_DESCRIPTION};
use tapgesture::ingest::load_dataset;
use tapgesture::synth::{generate_population, write_population, PopulationParams};
use tapgesture::window::extract_tap_window;
use tapgesture::{
    Dataset, Error, FeatureSchema, Featurizer, ForestModel, LoadOptions, SensorKind, SensorSubset, TrainingSet,
    WindowLabel, WindowParams,
};

use crate::config::{ConfigError, RunConfig};

pub const MODEL_FILE: &str = "model.txt";
pub const RUN_MANIFEST: &str = "run_manifest.toml";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_)
            | Error::InvalidWindowParams { .. }
            | Error::InvalidFilter { .. }
            | Error::InsufficientEnrollment { .. } => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    tapgesture_version: &'a str,
    cli_version: &'a str,
    rng: &'a str,
    config_sha256: String,
    outputs: Vec<String>,
    config: &'a RunConfig,
}

fn write_manifest(cfg: &RunConfig, command: &str, outputs: &[PathBuf]) -> Result<(), CliError> {
    let canonical = cfg.canonical();
    let digest = Sha256::digest(canonical.as_bytes());
    let mut outputs: Vec<String> = outputs
        .iter()
        .map(|p| p.strip_prefix(&cfg.out).unwrap_or(p).display().to_string())
        .collect();
    outputs.sort();
    let m = RunManifest {
        command,
        tapgesture_version: tapgesture::VERSION,
        cli_version: env!("CARGO_PKG_VERSION"),
        rng: RNG_DESCRIPTION,
        config_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        outputs,
        config: cfg,
    };
    let text = toml::to_string(&m).map_err(|e| CliError::Data(e.to_string()))?;
    create_dir(&cfg.out)?;
    write_text(&cfg.out.join(RUN_MANIFEST), &text)?;
    Ok(())
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))
}

fn load_options(cfg: &RunConfig, protocols: &[ProtocolKind]) -> Result<LoadOptions, CliError> {
    Ok(LoadOptions {
        required_sensors: cfg.subset()?,
        require_nfc: !protocols.is_empty(),
        require_activities: protocols.iter().any(|k| !k.is_auth()),
        gap_tolerance: cfg.gap_tolerance()?,
    })
}

/// Loads `dataset.path`, or synthesizes the `[synth]` population in memory.
fn acquire_dataset(cfg: &RunConfig, protocols: &[ProtocolKind]) -> Result<Dataset, CliError> {
    match &cfg.dataset.path {
        Some(root) => {
            let opts = load_options(cfg, protocols)?;
            Ok(load_dataset(root, &opts)?.0)
        }
        None => {
            let p = cfg.population()?;
            log::info!("no dataset path; synthesizing {} users", p.n_users);
            Ok(generate_population(&p)?)
        }
    }
}

pub fn validate(cfg: &RunConfig, root: &Path, protocols: &[ProtocolKind]) -> Result<(), CliError> {
    let opts = load_options(cfg, protocols)?;
    let (ds, summary) = load_dataset(root, &opts).map_err(|e| CliError::Config(e.to_string()))?;
    println!("dataset {}: {} Hz nominal", root.display(), ds.nominal_rate_hz);
    for ((user, session), counts) in &summary.samples {
        let per: Vec<String> = SensorKind::ALL
            .iter()
            .zip(counts)
            .map(|(k, n)| format!("{k} {n}"))
            .collect();
        println!("  stream {user}/{session}: {}", per.join(", "));
    }
    if summary.nfc_file_present {
        println!("  nfc events: {}", ds.nfc_events.len());
        for (user, n) in &summary.events_per_user {
            println!("    user {user}: {n}");
        }
        for (t, n) in &summary.events_per_terminal {
            println!("    terminal {t}: {n}");
        }
    } else {
        println!("  nfc events: file absent");
    }
    if summary.activity_file_present {
        println!("  activity spans: {}", ds.activity_spans.len());
    } else {
        println!("  activity spans: file absent");
    }
    println!("  duplicate samples dropped: {}", summary.duplicate_samples);
    println!("  sampling gaps: {}", summary.total_gaps());
    for ((user, session), gaps) in &summary.gaps {
        for g in gaps {
            println!(
                "    {user}/{session} {} [{}, {}] {} ms",
                g.sensor,
                g.start_ms,
                g.end_ms,
                g.duration_ms()
            );
        }
    }
    println!("  referential integrity: ok");
    Ok(())
}

pub fn synth(cfg: &RunConfig) -> Result<(), CliError> {
    let p = cfg.population()?;
    create_dir(&cfg.out)?;
    let ds = write_population(&cfg.out, &p)?;
    let minutes: f64 = ds.activity_spans.iter().map(|s| s.duration_ms() as f64 / 60_000.0).sum();
    println!(
        "synthesized {} users, {} streams, {} events, {} activity spans ({minutes:.1} min) into {}",
        p.n_users,
        ds.streams.len(),
        ds.nfc_events.len(),
        ds.activity_spans.len(),
        cfg.out.display()
    );
    write_manifest(cfg, "synth", &[])
}

pub fn sweep(cfg: &RunConfig) -> Result<(), CliError> {
    let protocols = cfg.protocols()?;
    let specs = protocols
        .iter()
        .map(|k| cfg.protocol_spec(*k))
        .collect::<Result<Vec<_>, _>>()?;
    let ds = acquire_dataset(cfg, &protocols)?;
    let mut outputs = Vec::new();
    for spec in &specs {
        let report = run_protocol(&ds, spec)?;
        outputs.extend(write_report(&cfg.out, &report, spec.top_k)?);
        if let Some(best) = report.best_cell() {
            let m = best.mean;
            println!(
                "{}: best s={:.1} o={:.1} F {:.4} EER {:.4} precision {:.4} recall {:.4} FAR@minFRR {:.4}",
                spec.kind,
                best.params.size_s(),
                best.params.offset_s(),
                m.f_measure,
                m.eer,
                m.precision,
                m.recall,
                m.far_at_min_frr
            );
        }
        if spec.kind == ProtocolKind::AuthTerminalAgnostic && !cfg.evaluation.enrollment_sizes.is_empty() {
            let mut sizes: Vec<Option<usize>> = cfg.evaluation.enrollment_sizes.iter().map(|s| Some(*s)).collect();
            sizes.push(None);
            let points = enrollment_sweep(&ds, spec, &sizes)?;
            let path = cfg.out.join(format!("{}_enrollment.csv", spec.kind));
            write_text(&path, &enrollment_csv(&points))?;
            outputs.push(path);
        }
    }
    write_manifest(cfg, "sweep", &outputs)
}

/// Cell windows with their labels under `kind`.
fn labelled_cell(
    cfg: &RunConfig,
    ds: &Dataset,
    featurizer: &Featurizer,
    kind: ProtocolKind,
    params: WindowParams,
) -> Result<(CellData, Vec<bool>), CliError> {
    let spec = cfg.protocol_spec(kind)?;
    let slots = (!kind.is_auth()).then(|| nontap_slots(ds, featurizer.subset(), &spec.coverage).0);
    let cell = prepare_cell(ds, params, featurizer, &spec.coverage, slots.as_deref())?;
    let labels: Vec<bool> = if kind.is_auth() {
        let user = cfg
            .model
            .user
            .as_deref()
            .ok_or_else(|| CliError::Config("model.user: required for authentication".into()))?;
        if !ds.nfc_events.iter().any(|e| e.user_id == user) {
            return Err(CliError::Data(format!("user '{user}' has no tap events in the dataset")));
        }
        cell.labels.iter().map(|l| l.user_id() == user).collect()
    } else {
        cell.labels.iter().map(WindowLabel::is_tap).collect()
    };
    Ok((cell, labels))
}

pub fn train(cfg: &RunConfig) -> Result<(), CliError> {
    let kind = cfg.model_protocol()?;
    let params = cfg.model_window()?;
    let forest = cfg.forest_config()?;
    let feature_cfg = cfg.feature_config()?;
    let ds = acquire_dataset(cfg, &[kind])?;
    let featurizer = Featurizer::new(cfg.subset()?, feature_cfg.at_rate(ds.nominal_rate_hz))?;
    let (cell, labels) = labelled_cell(cfg, &ds, &featurizer, kind, params)?;
    let mut set = TrainingSet::new(cell.schema.len());
    for (i, l) in labels.iter().enumerate() {
        set.push(cell.row(i), *l)?;
    }
    let model = train_forest(&set, &cell.schema, &forest, cfg.seed)?;
    create_dir(&cfg.out)?;
    let path = cfg.out.join(MODEL_FILE);
    model.save(&path)?;
    println!(
        "trained {kind} model on {} windows ({} positive, {} excluded) at {params} into {}",
        set.len(),
        set.positives(),
        cell.excluded_taps + cell.excluded_nontaps,
        path.display()
    );
    for (rank, (name, imp)) in model.top_features(5).iter().enumerate() {
        println!("  {}. {name} {imp:.4}", rank + 1);
    }
    write_manifest(cfg, "train", &[path])
}

fn load_model(path: &Path) -> Result<(ForestModel, SensorSubset), CliError> {
    if !path.exists() {
        return Err(CliError::Data(format!("no model at {}", path.display())));
    }
    let model = ForestModel::load(path).map_err(|e| CliError::Data(e.to_string()))?;
    let subset = subset_for_schema(&model.schema)
        .ok_or_else(|| CliError::Data(format!("{}: feature schema matches no sensor subset", path.display())))?;
    Ok((model, subset))
}

fn subset_for_schema(schema: &FeatureSchema) -> Option<SensorSubset> {
    (1u8..16).find_map(|mask| {
        let kinds: Vec<SensorKind> = SensorKind::ALL
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, k)| *k)
            .collect();
        let subset = SensorSubset::new(&kinds).ok()?;
        (FeatureSchema::for_subset(subset).names() == schema.names()).then_some(subset)
    })
}

pub fn eval(cfg: &RunConfig, model_path: &Path) -> Result<(), CliError> {
    let kind = cfg.model_protocol()?;
    let params = cfg.model_window()?;
    let feature_cfg = cfg.feature_config()?;
    let (model, subset) = load_model(model_path)?;
    let ds = acquire_dataset(cfg, &[kind])?;
    let featurizer = Featurizer::new(subset, feature_cfg.at_rate(ds.nominal_rate_hz))?;
    let (cell, labels) = labelled_cell(cfg, &ds, &featurizer, kind, params)?;
    let trials = labels
        .iter()
        .enumerate()
        .map(|(i, l)| Ok(ScoredTrial::new(model.score(cell.row(i))?, *l)))
        .collect::<Result<Vec<_>, Error>>()?;
    let m = MetricSet::compute(&trials)?;
    let mut csv = String::from("protocol,s,o,windows,precision,recall,f,eer,theta_eer,far_opt,theta_opt,far_delta\n");
    let _ = write!(csv, "{kind},{:.1},{:.1},{}", params.size_s(), params.offset_s(), trials.len());
    for v in m.to_array() {
        let _ = write!(csv, ",{v:.6}");
    }
    csv.push('\n');
    create_dir(&cfg.out)?;
    let path = cfg.out.join("eval_metrics.csv");
    write_text(&path, &csv)?;
    println!(
        "{kind} at {params}: {} windows, F {:.4} EER {:.4} precision {:.4} recall {:.4} FAR@minFRR {:.4}",
        trials.len(),
        m.f_measure,
        m.eer,
        m.precision,
        m.recall,
        m.far_at_min_frr
    );
    write_manifest(cfg, "eval", &[path])
}

pub fn bench(cfg: &RunConfig, model_path: &Path) -> Result<(), CliError> {
    let params = cfg.model_window()?;
    let feature_cfg = cfg.feature_config()?;
    let (model, subset) = load_model(model_path)?;
    let ds = match &cfg.dataset.path {
        Some(_) => acquire_dataset(cfg, &[ProtocolKind::AuthTerminalAgnostic])?,
        None => generate_population(&PopulationParams {
            n_users: 1,
            gestures_per_user: 3,
            activity_minutes_per_user: 0.0,
            master_seed: cfg.seed,
        })?,
    };
    let featurizer = Featurizer::new(subset, feature_cfg.at_rate(ds.nominal_rate_hz))?;
    let spec = cfg.protocol_spec(ProtocolKind::AuthTerminalAgnostic)?;
    let window = ds
        .nfc_events
        .iter()
        .find_map(|e| {
            let stream = ds.stream(&e.user_id, &e.session_id)?;
            extract_tap_window(stream, e, params, subset, &spec.coverage).ok()
        })
        .ok_or_else(|| CliError::Data("no tap window available to benchmark".into()))?;
    let r = measure_latency(&featurizer, &model, &window, cfg.model.repetitions)?;
    let text = format!(
        "repetitions,median_ms,p95_ms,mean_ms\n{},{:.6},{:.6},{:.6}\n",
        r.repetitions, r.median_ms, r.p95_ms, r.mean_ms
    );
    create_dir(&cfg.out)?;
    let path = cfg.out.join("bench.csv");
    write_text(&path, &text)?;
    println!(
        "featurize + score over {} repetitions ({} trees, {} features): median {:.4} ms, p95 {:.4} ms, mean {:.4} ms",
        r.repetitions,
        model.trees.len(),
        model.schema.len(),
        r.median_ms,
        r.p95_ms,
        r.mean_ms
    );
    write_manifest(cfg, "bench", &[path])
}

struct AggregateRow {
    s: String,
    o: String,
    f: f64,
    eer: f64,
}

fn parse_aggregate(path: &Path) -> Result<Vec<AggregateRow>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    if lines.next() != Some(AGGREGATE_HEADER) {
        return Err(CliError::Data(format!("{}: unexpected header", path.display())));
    }
    let cols: Vec<&str> = AGGREGATE_HEADER.split(',').collect();
    let at = |name: &str| cols.iter().position(|c| *c == name).unwrap_or(0);
    let (fi, ei) = (at("f"), at("eer"));
    lines
        .enumerate()
        .map(|(i, line)| {
            let v: Vec<&str> = line.split(',').collect();
            let bad = || CliError::Data(format!("{}:{}: malformed row", path.display(), i + 2));
            if v.len() != cols.len() {
                return Err(bad());
            }
            Ok(AggregateRow {
                s: v[0].into(),
                o: v[1].into(),
                f: v[fi].parse().map_err(|_| bad())?,
                eer: v[ei].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

pub fn report(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    let mut summary = String::new();
    let mut found = 0;
    for kind in ProtocolKind::ALL {
        let path = dir.join(format!("{kind}_aggregate.csv"));
        if !path.exists() {
            continue;
        }
        found += 1;
        let rows = parse_aggregate(&path)?;
        let best = rows
            .iter()
            .reduce(|b, r| if r.f > b.f || (r.f == b.f && r.eer < b.eer) { r } else { b });
        let _ = writeln!(summary, "{kind}: {} cells", rows.len());
        if let Some(b) = best {
            let _ = writeln!(summary, "  best s={} o={} F {:.4} EER {:.4}", b.s, b.o, b.f, b.eer);
        }
        for r in &rows {
            let _ = writeln!(summary, "  s={:>4} o={:>4}  F {:.4}  EER {:.4}", r.s, r.o, r.f, r.eer);
        }
    }
    if found == 0 {
        return Err(CliError::Data(format!("{}: no aggregate reports found", dir.display())));
    }
    print!("{summary}");
    create_dir(&cfg.out)?;
    let path = cfg.out.join("summary.txt");
    write_text(&path, &summary)?;
    write_manifest(cfg, "report", &[path])
}
