use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use narrow_core::consult::Consult;
use narrow_core::decision::{solve_comprehensive, threshold_table, ThresholdTable};
use narrow_core::formulation::{formulate, PolicyMethod};
use narrow_core::harness::{find_unsound_case, run_soundness_experiment, SoundnessSpec};
use narrow_core::inference::ExactEngine;
use narrow_core::kb::{kb_stats, load_findings, save_kb, validate_kb};
use narrow_core::{generate_kb, Error, Findings, GeneratorSpec, KnowledgeBase, Network, Policy};
use narrow_cli::server;

#[derive(Parser)]
#[command(name = "narrow", version, about = "Noisy-OR treatment decision models and patient-specific reduction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a KB file; prints its stats, or every violation.
    Validate { kb: PathBuf },
    /// Write a seeded synthetic KB.
    Generate(GenerateArgs),
    /// Posterior disease probabilities for a findings file.
    Infer(InferArgs),
    /// Threshold table for every treating pair.
    Thresholds {
        #[arg(long)]
        kb: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Prune, reduce and solve for one case.
    Formulate(FormulateArgs),
    /// Solve the comprehensive model by exhaustive maximization.
    Solve {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        findings: Option<PathBuf>,
    },
    #[command(subcommand)]
    Experiment(Experiment),
    /// Run the HTTP consult service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// JSON generator spec; the flags below override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    diseases: Option<usize>,
    #[arg(long)]
    manifestations: Option<usize>,
    #[arg(long)]
    treatments: Option<usize>,
    #[arg(long)]
    links: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PolicyArgs {
    /// auto, quickscore, bounds, oracle or montecarlo.
    #[arg(long, default_value = "auto")]
    method: String,
    /// States visited by the bounds method.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Let Monte-Carlo point estimates drive pruning.
    #[arg(long)]
    allow_unsafe_mc: bool,
}

impl PolicyArgs {
    fn policy(&self) -> anyhow::Result<Policy> {
        let method: PolicyMethod = self.method.parse()?;
        let d = Policy::default();
        Ok(Policy {
            method,
            budget: self.budget.unwrap_or(d.budget),
            samples: self.samples.unwrap_or(d.samples),
            seed: self.seed.unwrap_or(d.seed),
            allow_unsafe_mc: self.allow_unsafe_mc,
            ..d
        })
    }
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    kb: PathBuf,
    #[arg(long)]
    findings: Option<PathBuf>,
    #[command(flatten)]
    policy: PolicyArgs,
}

#[derive(Args)]
struct FormulateArgs {
    #[arg(long)]
    kb: PathBuf,
    #[arg(long)]
    findings: Option<PathBuf>,
    /// Precomputed table; computed on the fly when omitted.
    #[arg(long)]
    thresholds: Option<PathBuf>,
    #[command(flatten)]
    policy: PolicyArgs,
}

#[derive(Subcommand)]
enum Experiment {
    /// Agreement of reduced and comprehensive decisions over generated cases.
    Soundness {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        cases: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Leave out the per-case records.
        #[arg(long)]
        summary: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Construct a verified case where pruning changes the decision.
    Unsound {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the case's KB to this file.
        #[arg(long)]
        kb_out: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    kb: PathBuf,
    #[arg(long)]
    thresholds: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Allowed browser origin; repeatable, `*` for any.
    #[arg(long = "cors-origin", default_value = server::DEFAULT_UI_ORIGIN)]
    cors_origins: Vec<String>,
    /// Append each session's request log here as NDJSON.
    #[arg(long)]
    log_dir: Option<PathBuf>,
}

fn emit(value: &impl serde::Serialize, output: Option<&Path>) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn network(path: &Path) -> anyhow::Result<Network> {
    Ok(Network::new(narrow_core::kb::load_kb(path)?)?)
}

fn findings(path: Option<&Path>) -> anyhow::Result<Findings> {
    Ok(match path {
        Some(p) => load_findings(p)?,
        None => Findings::empty(),
    })
}

fn thresholds(net: &Network, path: Option<&Path>) -> anyhow::Result<ThresholdTable> {
    match path {
        Some(p) => {
            let table = ThresholdTable::load(p)?;
            table.check_fresh(net)?;
            Ok(table)
        }
        None => Ok(threshold_table(net)?),
    }
}

fn validate(path: &Path) -> anyhow::Result<bool> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut kb: KnowledgeBase = match serde_json::from_str(&text) {
        Ok(kb) => kb,
        Err(e) => {
            eprintln!("{}", Error::parse(path.display().to_string(), &e));
            return Ok(false);
        }
    };
    kb.canonicalize();
    let violations = validate_kb(&kb);
    if violations.is_empty() {
        emit(&kb_stats(&kb), None)?;
        return Ok(true);
    }
    for v in &violations {
        eprintln!("{}: [{}] {}", v.node, v.rule, v.message);
    }
    eprintln!("{} violation(s)", violations.len());
    Ok(false)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Validate { kb } => return validate(&kb),
        Command::Generate(a) => {
            let mut spec: GeneratorSpec = match &a.spec {
                Some(p) => read_json(p)?,
                None => GeneratorSpec::default(),
            };
            spec.n_diseases = a.diseases.unwrap_or(spec.n_diseases);
            spec.n_manifestations = a.manifestations.unwrap_or(spec.n_manifestations);
            spec.n_treatments = a.treatments.unwrap_or(spec.n_treatments);
            spec.links_per_manifestation = a.links.unwrap_or(spec.links_per_manifestation);
            spec.seed = a.seed.unwrap_or(spec.seed);
            let kb = generate_kb(&spec)?;
            match &a.output {
                Some(p) => save_kb(&kb, p)?,
                None => print!("{}", kb.to_canonical_json()),
            }
        }
        Command::Infer(a) => {
            let net = network(&a.kb)?;
            let ev = net.evidence(&findings(a.findings.as_deref())?)?;
            emit(&a.policy.policy()?.infer(&net, &ev)?, None)?;
        }
        Command::Thresholds { kb, output } => {
            let net = network(&kb)?;
            let table = threshold_table(&net)?;
            match output {
                Some(p) => table.save(p)?,
                None => print!("{}", table.to_json()),
            }
        }
        Command::Formulate(a) => {
            let net = network(&a.kb)?;
            let table = thresholds(&net, a.thresholds.as_deref())?;
            let f = formulate(&net, &findings(a.findings.as_deref())?, &table, &a.policy.policy()?)?;
            emit(&f, None)?;
        }
        Command::Solve { kb, findings: f } => {
            let net = network(&kb)?;
            let ev = net.evidence(&findings(f.as_deref())?)?;
            emit(&solve_comprehensive(&net, &ev, &ExactEngine::auto(&ev))?, None)?;
        }
        Command::Experiment(Experiment::Soundness { spec, cases, seed, summary, output }) => {
            let mut spec: SoundnessSpec = match &spec {
                Some(p) => read_json(p)?,
                None => SoundnessSpec::default(),
            };
            spec.n_cases = cases.unwrap_or(spec.n_cases);
            spec.seed = seed.unwrap_or(spec.seed);
            let mut report = run_soundness_experiment(&spec)?;
            if summary {
                report.cases.clear();
            }
            emit(&report, output.as_deref())?;
        }
        Command::Experiment(Experiment::Unsound { seed, kb_out, output }) => {
            let case = find_unsound_case(seed)?;
            if let Some(p) = kb_out {
                save_kb(&case.kb, p)?;
            }
            emit(&case, output.as_deref())?;
        }
        Command::Serve(a) => {
            let net = network(&a.kb)?;
            let table = thresholds(&net, a.thresholds.as_deref())?;
            let mut consult = Consult::new(net, table)?;
            if let Some(dir) = a.log_dir {
                consult = consult.with_log_dir(dir)?;
            }
            if a.cors_origins.is_empty() {
                bail!("at least one CORS origin is required");
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(server::serve(consult, a.addr, &a.cors_origins))?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
