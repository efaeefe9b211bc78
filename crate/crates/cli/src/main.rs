use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use graphconsis::data::{generate_synthetic, load_dir, save_dataset, split_dataset, SplitSpec, SyntheticSpec};
use graphconsis::detector::{Detector, Method};
use graphconsis::eval::{auc_score, f1_score, run_experiment, Averaging, ExperimentConfig, RunMetrics};
use graphconsis::graph::{Label, MultiRelationGraph};
use graphconsis::inconsistency::{relation_report, ReportOptions};

const RESOLVED_CONFIG: &str = "resolved_config.json";

#[derive(Parser, Debug)]
#[command(name = "graphconsis", version, about = "Fraud detection on multi-relation graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset (nodes.csv and edges_r*.csv).
    Generate(Common),
    /// Per-relation context and feature characteristic scores.
    Analyze(Common),
    /// Train one method and write its checkpoint and loss history.
    Train(Common),
    /// Run the method × training-fraction × seed grid.
    Evaluate(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory with nodes.csv and edges_r*.csv; a synthetic
    /// graph is generated when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "graphconsis-out")]
    out: PathBuf,
    /// Worker threads (default: available processors).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    train_fraction: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<String>>,
    /// Evaluation seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// same-label | formula-literal
    #[arg(long)]
    gamma_context_convention: Option<String>,
    /// dim-normalized | formula-literal
    #[arg(long)]
    gamma_feature_convention: Option<String>,
    /// Dotted override such as `experiment.layer.hidden_widths=[64,32]`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

/// Everything a run depends on. `seed` drives data generation and, for
/// `train`, the split and the model; `experiment.seeds` drives `evaluate`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    seed: u64,
    data: Option<PathBuf>,
    synthetic: SyntheticSpec,
    report: ReportOptions,
    /// Method and training fraction used by `train`.
    method: Method,
    train_fraction: f64,
    experiment: ExperimentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            data: None,
            synthetic: SyntheticSpec::default(),
            report: ReportOptions::default(),
            method: Method::GraphConsis,
            train_fraction: 0.8,
            experiment: ExperimentConfig::default(),
        }
    }
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

fn set_path(root: &mut Value, dotted: &str, value: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = dotted.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            bail!("invalid key `{dotted}`");
        }
        let obj = match cur {
            Value::Object(o) => o,
            Value::Null => {
                *cur = Value::Object(Default::default());
                cur.as_object_mut().expect("just created")
            }
            _ => bail!("`{}` is not an object in key `{dotted}`", parts[..i].join(".")),
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    Ok(())
}

/// Bare words that are not JSON are taken as strings.
fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

/// Defaults, then the config file, then `--set`, then dedicated flags.
fn resolve(cmd: &Command, c: &Common) -> Result<RunConfig> {
    let mut v = serde_json::to_value(RunConfig::default())?;
    if let Some(path) = &c.config {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config `{}`", path.display()))?;
        let file: Value =
            serde_json::from_str(&text).with_context(|| format!("config `{}` is not valid JSON", path.display()))?;
        merge(&mut v, file);
    }
    for item in &c.set {
        let (key, raw) = item
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, got `{item}`"))?;
        set_path(&mut v, key.trim(), parse_value(raw.trim()))?;
    }

    let training = matches!(cmd, Command::Train(_));
    if let Some(seed) = c.seed {
        v["seed"] = seed.into();
    }
    if let Some(data) = &c.data {
        v["data"] = data.display().to_string().into();
    }
    if let Some(eps) = c.epsilon {
        v["experiment"]["layer"]["epsilon"] = eps.into();
    }
    if let Some(conv) = &c.gamma_context_convention {
        v["report"]["context"] = conv.as_str().into();
    }
    if let Some(conv) = &c.gamma_feature_convention {
        v["report"]["feature"] = conv.as_str().into();
    }
    if let Some(seeds) = &c.seeds {
        v["experiment"]["seeds"] = serde_json::to_value(seeds)?;
    }
    if let Some(methods) = &c.method {
        for m in methods {
            m.parse::<Method>().with_context(|| format!("invalid --method `{m}`"))?;
        }
        if training {
            if methods.len() != 1 {
                bail!("train takes exactly one --method, got `{}`", methods.join(","));
            }
            v["method"] = methods[0].as_str().into();
        } else {
            v["experiment"]["methods"] = serde_json::to_value(methods)?;
        }
    }
    if let Some(fractions) = &c.train_fraction {
        if training {
            if fractions.len() != 1 {
                bail!("train takes exactly one --train-fraction");
            }
            v["train_fraction"] = fractions[0].into();
        } else {
            v["experiment"]["train_fractions"] = serde_json::to_value(fractions)?;
        }
    }

    let mut cfg: RunConfig = serde_json::from_value(v).context("invalid configuration")?;
    cfg.synthetic.seed = cfg.seed;
    cfg.synthetic.validate()?;
    cfg.experiment.layer.validate()?;
    cfg.experiment.train.validate()?;
    Ok(cfg)
}

fn load_graph(cfg: &RunConfig) -> Result<MultiRelationGraph> {
    Ok(match &cfg.data {
        Some(dir) => load_dir(dir).with_context(|| format!("cannot load dataset from `{}`", dir.display()))?,
        None => generate_synthetic(&cfg.synthetic)?,
    })
}

fn write(path: &Path, text: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write `{}`", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, text)
}

fn generate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let g = generate_synthetic(&cfg.synthetic)?;
    let files = save_dataset(&g, out)?;
    write_json(&out.join("stats.json"), &g.graph_stats())?;
    log::info!("wrote {} files to {}", files.len(), out.display());
    Ok(())
}

fn analyze(cfg: &RunConfig, out: &Path) -> Result<()> {
    let g = load_graph(cfg)?;
    let report = relation_report(&g, &cfg.report)?;
    write(&out.join("report.csv"), report.to_csv())?;
    write_json(&out.join("report.json"), &report)?;
    Ok(())
}

fn train(cfg: &RunConfig, out: &Path) -> Result<()> {
    let g = load_graph(cfg)?;
    let split = SplitSpec {
        train_fraction: cfg.train_fraction,
        stratified: cfg.experiment.stratified,
        seed: cfg.seed,
    };
    let (train_mask, test_mask) = split_dataset(&g, &split)?;
    let exp = &cfg.experiment;
    let (detector, history) = Detector::fit(&g, cfg.method, &exp.layer, &exp.train, &train_mask, cfg.seed)?;
    detector.save(&g, &out.join("checkpoint.json"))?;

    let mut losses = String::from("epoch,loss\n");
    for (e, l) in history.iter().enumerate() {
        losses.push_str(&format!("{e},{l:?}\n"));
    }
    write(&out.join("loss_history.csv"), losses)?;

    let scores = detector.predict(&g)?;
    let mut text = String::from("node_id,score,split\n");
    for (v, s) in scores.iter().enumerate() {
        let part = if train_mask[v] {
            "train"
        } else if test_mask[v] {
            "test"
        } else {
            "unlabeled"
        };
        text.push_str(&format!("{v},{s:?},{part}\n"));
    }
    write(&out.join("scores.csv"), text)?;

    let (s, y): (Vec<f64>, Vec<bool>) = (0..g.num_nodes())
        .filter(|&v| test_mask[v])
        .map(|v| (scores[v], g.labels()[v] == Label::Fraud))
        .unzip();
    let predicted: Vec<bool> = s.iter().map(|&p| p >= exp.threshold).collect();
    let metrics = RunMetrics {
        f1_macro: f1_score(&predicted, &y, Averaging::Macro)?,
        f1_binary: f1_score(&predicted, &y, Averaging::BinaryPositive)?,
        auc: auc_score(&s, &y)?,
    };
    write_json(&out.join("metrics.json"), &metrics)?;
    log::info!("{}: test auc {:.4}", cfg.method, metrics.auc);
    Ok(())
}

fn evaluate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let g = load_graph(cfg)?;
    let result = run_experiment(&g, &cfg.experiment)?;
    write(&out.join("grid.csv"), result.grid_csv())?;
    write(&out.join("runs.csv"), result.runs_csv())?;
    write_json(&out.join("grid.json"), &result)?;
    print!("{}", result.grid_csv());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let c = match &cli.command {
        Command::Generate(c) | Command::Analyze(c) | Command::Train(c) | Command::Evaluate(c) => c,
    };
    if let Some(jobs) = c.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    let cfg = resolve(&cli.command, c)?;
    fs::create_dir_all(&c.out).with_context(|| format!("cannot create `{}`", c.out.display()))?;
    write_json(&c.out.join(RESOLVED_CONFIG), &cfg)?;

    match &cli.command {
        Command::Generate(_) => generate(&cfg, &c.out),
        Command::Analyze(_) => analyze(&cfg, &c.out),
        Command::Train(_) => train(&cfg, &c.out),
        Command::Evaluate(_) => evaluate(&cfg, &c.out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GRAPHCONSIS_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            eprintln!("error: {}", chain.join(": "));
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_set_creates_nested_keys() {
        let mut v = serde_json::json!({"a": {"b": 1}});
        set_path(&mut v, "a.c.d", Value::from(2)).unwrap();
        assert_eq!(v, serde_json::json!({"a": {"b": 1, "c": {"d": 2}}}));
        assert!(set_path(&mut v, "a.b.x", Value::from(3)).is_err());
    }

    #[test]
    fn merge_overrides_leaves_only() {
        let mut v = serde_json::json!({"a": {"b": 1, "c": 2}, "d": 3});
        merge(&mut v, serde_json::json!({"a": {"c": 5}}));
        assert_eq!(v, serde_json::json!({"a": {"b": 1, "c": 5}, "d": 3}));
    }

    #[test]
    fn bare_words_parse_as_strings() {
        assert_eq!(parse_value("0.5"), Value::from(0.5));
        assert_eq!(parse_value("same-label"), Value::from("same-label"));
        assert_eq!(parse_value("[1,2]"), serde_json::json!([1, 2]));
    }
}
