use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use counterplan::adaptation::{shared, AdaptationStatus, GoalProjection};
use counterplan::metrics::{CellSummary, MetricsConfig, MetricsTable, TaskOutcome};
use counterplan::pddl_io::{
    emit_task_specification, parse_domain, parse_goal, parse_patch, parse_state, parse_trajectory,
    serialize_domain, serialize_patch, Domain,
};
use counterplan::proposers::{Endpoint, ExternalProposer, Proposer, ScriptedProposer, SearchProposer};
use counterplan::scenario::{
    evaluate_suite_with, standard_suite, zero_gap_suite, Budgets, Complexity, Factor, ScenarioSpec,
    SuiteProfile,
};
use counterplan::world_model::{build_world_model_in, DEFAULT_RETRY_LIMIT};
use counterplan::{adapt, derive_goal, Goal, ObjectUniverse, State, Vocabulary, WorldModel};

#[derive(Parser)]
#[command(name = "counterplan", version, about = "Adapt demonstrated symbolic procedures to new scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse input files and report the first problem in each.
    Validate(ValidateArgs),
    /// Recover one operator per demonstrated transition.
    BuildModel(ModelArgs),
    /// Repair the demonstrated procedure for a deployment state.
    Adapt(AdaptArgs),
    /// Run a generated scenario suite and tabulate SR, GC and PD.
    Bench(BenchArgs),
    /// Re-tabulate the per-scenario results written by `bench`.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct ValidateArgs {
    /// Files to check; the kind is inferred from extension and content.
    files: Vec<PathBuf>,
    #[arg(long)]
    domain: Option<PathBuf>,
    #[arg(long)]
    trajectory: Option<PathBuf>,
    #[arg(long)]
    deploy_state: Option<PathBuf>,
    #[arg(long)]
    goal: Option<PathBuf>,
    /// Scripted proposer fixture.
    #[arg(long)]
    fixture: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    /// Domain whose operators are matched against each transition.
    #[arg(long)]
    domain: Option<PathBuf>,
    #[arg(long)]
    trajectory: PathBuf,
    /// Directory for model.pddl and procedure.txt.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProposerKind {
    Scripted,
    Search,
    External,
}

#[derive(Args)]
struct ProposerArgs {
    #[arg(long, value_enum, default_value = "search")]
    proposer: ProposerKind,
    /// Response fixture for the scripted proposer.
    #[arg(long)]
    fixture: Option<PathBuf>,
    /// Maximum edits per search patch.
    #[arg(long, default_value_t = 2)]
    depth: usize,
    /// `http(s)://...` or `exec:<command>` for the external proposer.
    #[arg(long, env = "COUNTERPLAN_ENDPOINT")]
    endpoint: Option<String>,
    /// Seconds to wait for one external reply.
    #[arg(long, default_value_t = 60)]
    timeout: u64,
}

#[derive(Args)]
struct AdaptArgs {
    #[arg(long)]
    domain: Option<PathBuf>,
    #[arg(long)]
    trajectory: PathBuf,
    #[arg(long)]
    deploy_state: PathBuf,
    /// Defaults to the scene relations of the last demonstration frame.
    #[arg(long)]
    goal: Option<PathBuf>,
    #[command(flatten)]
    proposer: ProposerArgs,
    #[arg(long, default_value_t = 10)]
    budget: usize,
    /// Directory for the report, patch logs and task specification.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteKind {
    /// Environment, embodiment and combined gaps at three tiers.
    Standard,
    /// Deployment equals demonstration.
    ZeroGap,
    /// Single misplaced objects (level-1 obstruction).
    Obstruction,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value = "standard")]
    suite: SuiteKind,
    /// Ten scenarios per cell instead of the full counts.
    #[arg(long)]
    mini: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// One budget for every tier instead of the tiered defaults.
    #[arg(long)]
    budget: Option<usize>,
    #[command(flatten)]
    proposer: ProposerArgs,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Directory for metrics.csv, metrics.txt and results.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    /// results.json from `bench`.
    results: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failures map onto the exit code contract.
enum Failure {
    Input(anyhow::Error),
    NotAdapted(String),
    Transport(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate(a) => validate(a),
        Command::BuildModel(a) => build_model(a),
        Command::Adapt(a) => run_adapt(a),
        Command::Bench(a) => bench(a),
        Command::Metrics(a) => metrics(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::NotAdapted(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(3)
        }
        Err(Failure::Transport(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(4)
        }
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_domain(path: Option<&Path>) -> anyhow::Result<Option<Domain>> {
    path.map(|p| parse_domain(&read(p)?).with_context(|| p.display().to_string()))
        .transpose()
}

fn write_out(dir: &Path, name: &str, text: &str) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn validate(a: ValidateArgs) -> Outcome {
    let domain = load_domain(a.domain.as_deref())?;
    let vocab = domain.as_ref().map(|d| &d.vocabulary);
    let mut checked = Vec::new();
    if let Some(d) = &domain {
        checked.push(format!("domain: {} operators", d.operators.len()));
    }
    let mut check = |path: &Path, kind: Kind| -> anyhow::Result<()> {
        let text = read(path)?;
        let what = check_text(&text, kind, vocab).with_context(|| path.display().to_string())?;
        checked.push(format!("{}: {what}", path.display()));
        Ok(())
    };
    for (path, kind) in [
        (&a.trajectory, Kind::Trajectory),
        (&a.deploy_state, Kind::State),
        (&a.goal, Kind::Goal),
        (&a.fixture, Kind::Fixture),
    ] {
        if let Some(p) = path {
            check(p, kind)?;
        }
    }
    for p in &a.files {
        check(p, Kind::infer(p))?;
    }
    for line in checked {
        println!("ok {line}");
    }
    Ok(())
}

#[derive(Clone, Copy)]
enum Kind {
    Domain,
    Patch,
    Trajectory,
    State,
    Goal,
    Fixture,
    /// JSON whose shape decides.
    Json,
}

impl Kind {
    fn infer(path: &Path) -> Kind {
        match path.extension().and_then(|e| e.to_str()) {
            Some("pddl") => Kind::Domain,
            Some("patch") => Kind::Patch,
            _ => Kind::Json,
        }
    }
}

fn check_text(text: &str, kind: Kind, vocab: Option<&Vocabulary>) -> anyhow::Result<String> {
    Ok(match kind {
        Kind::Domain => {
            let d = parse_domain(text)?;
            format!("domain with {} predicates, {} operators", d.vocabulary.len(), d.operators.len())
        }
        Kind::Patch => {
            let p = parse_patch(text, vocab)?;
            format!("patch replacing {} operators with {}", p.search.len(), p.replace.len())
        }
        Kind::Trajectory => format!("trajectory with {} frames", parse_trajectory(text, vocab)?.len()),
        Kind::State => format!("state with {} atoms", parse_state(text, vocab)?.len()),
        Kind::Goal => {
            let g = parse_goal(text, vocab)?;
            format!("goal with {} required, {} forbidden", g.required.len(), g.forbidden.len())
        }
        Kind::Fixture => format!("fixture with {} responses", ScriptedProposer::from_json(text, vocab)?.remaining()),
        Kind::Json => {
            let v: Value = serde_json::from_str(text).context("malformed JSON")?;
            let kind = match &v {
                Value::Object(m) if m.contains_key("frames") => Kind::Trajectory,
                Value::Object(m) if m.contains_key("required") || m.contains_key("forbidden") => Kind::Goal,
                Value::Object(m) if m.contains_key("atoms") => Kind::State,
                Value::Array(items) if items.iter().all(Value::is_string) => Kind::State,
                Value::Array(_) => Kind::Fixture,
                _ => bail!("unrecognised JSON document"),
            };
            return check_text(text, kind, vocab);
        }
    })
}

/// Demonstration transitions are matched against the domain operators; a
/// transition no operator explains gets the default abduced operator.
fn world_model(domain: Option<&Domain>, trajectory: &Path) -> anyhow::Result<WorldModel> {
    let vocab = domain.map(|d| &d.vocabulary);
    let doc = parse_trajectory(&read(trajectory)?, vocab).with_context(|| trajectory.display().to_string())?;
    let library = domain.map(|d| shared(d.operators.iter().cloned())).unwrap_or_default();
    let mut recover = SearchProposer::new(library, 1);
    let universe = domain.map(|d| d.universe.clone()).unwrap_or_else(ObjectUniverse::new);
    let vocabulary = domain.map(|d| d.vocabulary.clone()).unwrap_or_else(Vocabulary::new);
    build_world_model_in(&doc, &mut recover, DEFAULT_RETRY_LIMIT, &universe, &vocabulary)
        .context("building the world model")
}

fn build_model(a: ModelArgs) -> Outcome {
    let domain = load_domain(a.domain.as_deref())?;
    let model = world_model(domain.as_ref(), &a.trajectory)?;
    let as_domain = Domain {
        name: domain.as_ref().and_then(|d| d.name.clone()),
        vocabulary: model.vocabulary.clone(),
        universe: model.universe.clone(),
        operators: model.operators.iter().map(|o| (**o).clone()).collect(),
    };
    let spec = emit_task_specification(model.procedure.iter().map(|o| &**o));
    match &a.out {
        Some(dir) => {
            write_out(dir, "model.pddl", &serialize_domain(&as_domain))?;
            write_out(dir, "procedure.txt", &spec)?;
        }
        None => println!("{}", serialize_domain(&as_domain)),
    }
    print!("{spec}");
    Ok(())
}

fn make_proposer(args: &ProposerArgs, library: Vec<counterplan::OpRef>, vocab: &Vocabulary) -> anyhow::Result<Box<dyn Proposer>> {
    Ok(match args.proposer {
        ProposerKind::Search => Box::new(SearchProposer::new(library, args.depth)),
        ProposerKind::Scripted => {
            let path = args.fixture.as_deref().ok_or_else(|| anyhow!("--proposer scripted needs --fixture"))?;
            Box::new(ScriptedProposer::from_json(&read(path)?, Some(vocab)).with_context(|| path.display().to_string())?)
        }
        ProposerKind::External => {
            let text = args
                .endpoint
                .as_deref()
                .ok_or_else(|| anyhow!("--proposer external needs --endpoint or COUNTERPLAN_ENDPOINT"))?;
            let endpoint = Endpoint::parse(text)
                .ok_or_else(|| anyhow!("endpoint `{text}` is neither http(s):// nor exec:<command>"))?;
            Box::new(ExternalProposer::new(endpoint, Duration::from_secs(args.timeout)).with_vocabulary(vocab.clone()))
        }
    })
}

fn run_adapt(a: AdaptArgs) -> Outcome {
    let domain = load_domain(a.domain.as_deref())?;
    let model = world_model(domain.as_ref(), &a.trajectory)?;
    let vocab = Some(&model.vocabulary);
    let initial: State = parse_state(&read(&a.deploy_state)?, vocab).with_context(|| a.deploy_state.display().to_string())?;
    let goal: Goal = match &a.goal {
        Some(p) => parse_goal(&read(p)?, vocab).with_context(|| p.display().to_string())?,
        None => derive_goal(model.states.last().expect("a trajectory has frames"), &GoalProjection::default())
            .map_err(anyhow::Error::from)?,
    };
    // Patches may use any domain operator, not only demonstrated ones.
    let mut library = model.operators.clone();
    if let Some(d) = &domain {
        for op in shared(d.operators.iter().cloned()) {
            if !library.iter().any(|o| **o == *op) {
                library.push(op);
            }
        }
    }
    let mut proposer = make_proposer(&a.proposer, library, &model.vocabulary)?;
    let report = adapt(&model, &initial, &goal, proposer.as_mut(), a.budget).context("adaptation")?;

    let spec = emit_task_specification(report.adapted.iter().map(|o| &**o));
    if let Some(dir) = &a.out {
        let body = serde_json::to_string_pretty(&report.to_json()).expect("report serializes");
        write_out(dir, "report.json", &(body + "\n"))?;
        let mut jsonl = String::new();
        let mut log = String::new();
        for e in &report.patches {
            jsonl.push_str(&e.to_json().to_string());
            jsonl.push('\n');
            log.push_str(&format!("#{} {}\n", e.iteration, e.inconsistency));
            match &e.outcome {
                counterplan::adaptation::PatchOutcome::Accepted => log.push_str("accepted\n"),
                counterplan::adaptation::PatchOutcome::Rejected(r) => log.push_str(&format!("rejected: {r}\n")),
                counterplan::adaptation::PatchOutcome::Declined => log.push_str("declined\n"),
            }
            if let Some(p) = &e.patch {
                log.push_str(&serialize_patch(p));
            }
            log.push('\n');
        }
        write_out(dir, "patches.jsonl", &jsonl)?;
        write_out(dir, "patches.log", &log)?;
        write_out(dir, "task_spec.txt", &spec)?;
    }
    println!(
        "status: {} ({} of {} explorations, {} patches accepted)",
        report.status,
        report.explorations_used,
        a.budget,
        report.accepted_patches().count()
    );
    print!("{spec}");
    match report.status {
        AdaptationStatus::Success => Ok(()),
        status if report.transport_errors > 0 => Err(Failure::Transport(format!(
            "adaptation ended {status} after {} proposer transport errors",
            report.transport_errors
        ))),
        status => Err(Failure::NotAdapted(format!("adaptation ended {status}"))),
    }
}

fn bench(a: BenchArgs) -> Outcome {
    let config = MetricsConfig::new(a.lambda).map_err(anyhow::Error::from)?;
    let per_cell = if a.mini { 10 } else { 40 };
    let specs: Vec<ScenarioSpec> = match a.suite {
        SuiteKind::Standard => standard_suite(if a.mini { SuiteProfile::Mini } else { SuiteProfile::Full }, a.seed),
        SuiteKind::ZeroGap => zero_gap_suite(3 * per_cell, a.seed),
        SuiteKind::Obstruction => (0..3 * per_cell)
            .map(|i| {
                let c = Complexity::ALL[i % 3];
                ScenarioSpec::sampled(c, Factor::Obstruction(1), a.seed.wrapping_add(i as u64)).expect("valid spec")
            })
            .collect(),
    };
    if matches!(a.proposer.proposer, ProposerKind::Scripted) {
        return Err(anyhow!("bench needs a search or external proposer").into());
    }
    // Surface endpoint problems before starting the suite.
    make_proposer(&a.proposer, Vec::new(), &Vocabulary::new())?;
    let budgets = a.budget.map(Budgets::uniform).unwrap_or_else(Budgets::tiered);
    let proposer = &a.proposer;
    let report = evaluate_suite_with(
        &specs,
        |inst| {
            make_proposer(proposer, inst.operator_library.clone(), &inst.vocabulary())
                .expect("proposer arguments were checked")
        },
        &budgets,
        None,
        config,
    );
    let results: Vec<Value> = report
        .results
        .iter()
        .map(|r| {
            json!({
                "id": r.id,
                "factor_group": r.spec.factor().group().as_str(),
                "complexity": r.spec.complexity().as_str(),
                "budget": r.budget,
                "status": r.report.as_ref().map(|x| x.status.to_string()),
                "explorations_used": r.report.as_ref().map(|x| x.explorations_used),
                "transport_errors": r.report.as_ref().map(|x| x.transport_errors),
                "success": r.outcome.success,
                "subtasks_total": r.outcome.subtasks_total,
                "subtasks_achieved": r.outcome.subtasks_achieved,
                "demo_sequence": r.outcome.demo_sequence,
                "adapted_sequence": r.outcome.adapted_sequence,
                "error": r.error,
            })
        })
        .collect();
    for r in report.results.iter().filter(|r| r.error.is_some()) {
        eprintln!("{}: {}", r.id, r.error.as_deref().unwrap_or_default());
    }
    emit_table(&report.table, a.out.as_deref())?;
    if let Some(dir) = &a.out {
        let body = serde_json::to_string_pretty(&Value::Array(results)).expect("results serialize");
        write_out(dir, "results.json", &(body + "\n"))?;
    }
    Ok(())
}

fn emit_table(table: &MetricsTable, out: Option<&Path>) -> anyhow::Result<()> {
    let text = table.to_text();
    if let Some(dir) = out {
        write_out(dir, "metrics.csv", &table.to_csv())?;
        write_out(dir, "metrics.txt", &text)?;
    }
    print!("{text}");
    Ok(())
}

fn metrics(a: MetricsArgs) -> Outcome {
    let config = MetricsConfig::new(a.lambda).map_err(anyhow::Error::from)?;
    let text = read(&a.results)?;
    let rows: Vec<Value> = serde_json::from_str(&text).context("results must be a JSON array")?;
    let mut cells: BTreeMap<(usize, usize), (String, String, Vec<TaskOutcome>)> = BTreeMap::new();
    for (i, row) in rows.iter().enumerate() {
        let field = |k: &str| row.get(k).ok_or_else(|| anyhow!("result {i}: missing `{k}`"));
        let string = |k: &str| -> anyhow::Result<String> {
            field(k)?.as_str().map(str::to_string).ok_or_else(|| anyhow!("result {i}: `{k}` is not a string"))
        };
        let count = |k: &str| -> anyhow::Result<usize> {
            field(k)?.as_u64().map(|n| n as usize).ok_or_else(|| anyhow!("result {i}: `{k}` is not a count"))
        };
        let labels = |k: &str| -> anyhow::Result<Vec<String>> {
            serde_json::from_value(field(k)?.clone()).with_context(|| format!("result {i}: `{k}`"))
        };
        let group = string("factor_group")?;
        let complexity = string("complexity")?;
        let outcome = TaskOutcome::new(
            string("id")?,
            count("subtasks_total")?,
            count("subtasks_achieved")?,
            field("success")?.as_bool().ok_or_else(|| anyhow!("result {i}: `success` is not a boolean"))?,
            labels("demo_sequence")?,
            labels("adapted_sequence")?,
        )
        .with_context(|| format!("result {i}"))?;
        let order = |list: &[&str], v: &str| list.iter().position(|x| *x == v).unwrap_or(list.len());
        let key = (
            order(&["obstruction_affordance", "kinematic_gripper", "combination"], &group),
            order(&["low", "medium", "high"], &complexity),
        );
        cells.entry(key).or_insert_with(|| (group, complexity, Vec::new())).2.push(outcome);
    }
    let cells = cells
        .into_values()
        .map(|(g, c, outcomes)| CellSummary::from_outcomes(g, c, &outcomes, config))
        .collect::<Result<Vec<_>, _>>()
        .map_err(anyhow::Error::from)?;
    emit_table(&MetricsTable { cells }, a.out.as_deref())?;
    Ok(())
}
