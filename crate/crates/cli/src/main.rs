//! Pipeline driver: model validation, STRIDE enumeration, attack-path
//! analysis, scoring, and report generation over files.
//!
//! Exit codes: 0 success, 1 validation findings, 2 usage or parse problems,
//! 3 I/O failures, 4 network failures.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use threatpath::attack::{
    build_attack_graph, enumerate_paths, export_paths_dot, load_attack_matrix, load_mapping,
    map_threat_to_techniques, rank_paths, AttackError, AttackMatrix, AttackPath, MappingTable,
};
use threatpath::data::{ATTACK_MATRIX_JSON, DEFAULT_RULES_JSON, STRIDE_MAPPING_JSON};
use threatpath::model::{
    export_dot, parse_model, purdue_check, trust_boundary_crossings, validate_model, ModelError,
    SystemModel,
};
use threatpath::nvd::{
    attach_scores, fetch_remote, load_bindings, load_feed, NvdError, ScoredThreatSet,
};
use threatpath::report::{build_report, input_digest, render_json, render_markdown};
use threatpath::scoring::{
    parse_composite_pairs, parse_vector, score_composite, score_cvss31_base, severity_bucket,
    Score, ScoreError,
};
use threatpath::stride::{
    enumerate_threats, load_rules, render_threats_json, render_threats_markdown, RuleSet,
    StrideError, ThreatSet,
};

/// Environment variable holding the API key `fetch-nvd` sends along.
const API_KEY_VAR: &str = "THREATPATH_NVD_API_KEY";

#[derive(Parser)]
#[command(
    name = "threatpath",
    version,
    about = "Threat modeling and attack path analysis for industrial control systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Md,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file and report structural findings
    Validate(ValidateArgs),
    /// Enumerate STRIDE threats over every flow
    Threats(ThreatsArgs),
    /// Build the attack graph and print ranked attack paths
    Paths(PathsArgs),
    /// Score one finding from a CVSS v3.1 vector or composite metrics
    Score(ScoreArgs),
    /// Run the whole pipeline and write report files
    Report(ReportArgs),
    /// Fetch CVEs from an NVD CVE API 2.0 endpoint into a feed file
    FetchNvd(FetchNvdArgs),
}

#[derive(Args)]
struct ValidateArgs {
    /// Model file (JSON)
    model: PathBuf,
}

#[derive(Args)]
struct ThreatsArgs {
    model: PathBuf,
    /// Threat rule file; defaults to the bundled rules
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: OutputFormat,
}

#[derive(Args)]
struct PathsArgs {
    model: PathBuf,
    /// Threat rule file; defaults to the bundled rules
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Tactic/technique matrix file; defaults to the bundled matrix
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Category-to-technique mapping file; defaults to the bundled one
    #[arg(long)]
    mapping: Option<PathBuf>,
    /// Entry tactic
    #[arg(long, default_value = "Initial Access")]
    entry: String,
    /// Goal tactic
    #[arg(long, default_value = "Impact")]
    goal: String,
    /// Longest path to consider, counted in steps (minimum 2)
    #[arg(long = "max-len", default_value_t = 3)]
    max_len: usize,
    /// How many paths to print
    #[arg(long, default_value_t = 3)]
    top: usize,
    /// Also write the paths as a DOT diagram
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    /// CVSS v3.1 base vector, e.g. CVSS:3.1/AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H
    #[arg(long, conflicts_with = "composite")]
    vector: Option<String>,
    /// Composite metrics as NAME=LEVEL pairs (AV, AC, AU, C, I, A, E,
    /// IMP, ET, RL, RC, CDP, TD, CR, IR, AR)
    #[arg(long, alias = "eq1", value_name = "NAME=LEVEL", num_args = 1..)]
    composite: Vec<String>,
}

#[derive(Args)]
struct ReportArgs {
    model: PathBuf,
    /// Threat rule file; defaults to the bundled rules
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Tactic/technique matrix file; defaults to the bundled matrix
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Category-to-technique mapping file; defaults to the bundled one
    #[arg(long)]
    mapping: Option<PathBuf>,
    /// Offline CVE feed file
    #[arg(long)]
    nvd: Option<PathBuf>,
    /// Score bindings file tying threats to feed entries
    #[arg(long)]
    bindings: Option<PathBuf>,
    /// Rows in the top-threats table and paths in the path section
    #[arg(long, default_value_t = 3)]
    top: usize,
    /// Output directory for report.md, report.json, dfd.dot, paths.dot
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FetchNvdArgs {
    /// API endpoint URL (the only command that touches the network)
    #[arg(long)]
    endpoint: String,
    /// Keyword to search for
    #[arg(long)]
    keyword: String,
    /// Feed file to write
    #[arg(long)]
    out: PathBuf,
}

/// A failure carrying its exit code; message goes to standard error.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl fmt::Display) -> Failure {
        Failure { code: 2, message: message.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure { code: 3, message: e.to_string() }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Failure {
        let code = match e {
            ModelError::InvalidModel(_) => 1,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<StrideError> for Failure {
    fn from(e: StrideError) -> Failure {
        let code = match e {
            StrideError::InvalidModel(_) => 1,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<AttackError> for Failure {
    fn from(e: AttackError) -> Failure {
        Failure { code: 2, message: e.to_string() }
    }
}

impl From<ScoreError> for Failure {
    fn from(e: ScoreError) -> Failure {
        Failure { code: 2, message: e.to_string() }
    }
}

impl From<NvdError> for Failure {
    fn from(e: NvdError) -> Failure {
        let code = match e {
            NvdError::Io(_) => 3,
            NvdError::Network(_) | NvdError::RateLimited(_) | NvdError::BadResponse(_) => 4,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure { code: 3, message: format!("{}: {e}", path.display()) })
}

/// Read an override file or fall back to bundled data, keeping the raw text
/// for report digests.
fn text_or_default(path: Option<&PathBuf>, bundled: &str) -> Result<String, Failure> {
    match path {
        Some(p) => read(p),
        None => Ok(bundled.to_string()),
    }
}

/// The parsed inputs the graph stages share, with their raw texts.
struct PipelineInputs {
    model_text: String,
    model: SystemModel,
    rules_text: String,
    rules: RuleSet,
    matrix_text: String,
    matrix: AttackMatrix,
    mapping_text: String,
    mapping: MappingTable,
}

impl PipelineInputs {
    fn load(
        model_path: &Path,
        rules_path: Option<&PathBuf>,
        matrix_path: Option<&PathBuf>,
        mapping_path: Option<&PathBuf>,
    ) -> Result<PipelineInputs, Failure> {
        let model_text = read(model_path)?;
        let model = parse_model(&model_text)?;
        let rules_text = text_or_default(rules_path, DEFAULT_RULES_JSON)?;
        let rules = load_rules(&rules_text)?;
        let matrix_text = text_or_default(matrix_path, ATTACK_MATRIX_JSON)?;
        let matrix = load_attack_matrix(&matrix_text)?;
        let mapping_text = text_or_default(mapping_path, STRIDE_MAPPING_JSON)?;
        let mapping = load_mapping(&mapping_text, &matrix)?;
        Ok(PipelineInputs {
            model_text,
            model,
            rules_text,
            rules,
            matrix_text,
            matrix,
            mapping_text,
            mapping,
        })
    }

    /// Build the graph over an enumerated threat set and list entry→goal
    /// paths in default (unscored) rank order.
    fn analyze_paths(
        &self,
        threats: &ThreatSet,
        entry: &str,
        goal: &str,
        max_len: usize,
        max_paths: usize,
    ) -> Result<Vec<AttackPath>, Failure> {
        let graph = build_attack_graph(&self.model, threats, &self.matrix, &self.mapping)?;
        let entry = self.matrix.tactic(entry)?;
        let goal = self.matrix.tactic(goal)?;
        Ok(enumerate_paths(&graph, entry, goal, max_len, max_paths)?)
    }
}

fn cmd_validate(args: &ValidateArgs) -> Result<(), Failure> {
    let model = parse_model(&read(&args.model)?)?;
    let issues = validate_model(&model);
    for issue in &issues {
        eprintln!("{issue}");
    }
    if !issues.is_empty() {
        return Err(Failure { code: 1, message: format!("{} issue(s) found", issues.len()) });
    }
    for finding in purdue_check(&model) {
        eprintln!("warning: {finding}");
    }
    println!(
        "{}: {} elements, {} flows, {} boundaries, {} crossing(s)",
        model.name,
        model.elements.len(),
        model.flows.len(),
        model.boundaries.len(),
        trust_boundary_crossings(&model).len()
    );
    Ok(())
}

fn cmd_threats(args: &ThreatsArgs) -> Result<(), Failure> {
    let model = parse_model(&read(&args.model)?)?;
    let rules = load_rules(&text_or_default(args.rules.as_ref(), DEFAULT_RULES_JSON)?)?;
    let threats = enumerate_threats(&model, &rules)?;
    let rendered = match args.format {
        OutputFormat::Json => render_threats_json(&threats),
        OutputFormat::Md => render_threats_markdown(&threats),
    };
    print!("{rendered}");
    Ok(())
}

fn cmd_paths(args: &PathsArgs) -> Result<(), Failure> {
    let inputs = PipelineInputs::load(
        &args.model,
        args.rules.as_ref(),
        args.matrix.as_ref(),
        args.mapping.as_ref(),
    )?;
    let threats = enumerate_threats(&inputs.model, &inputs.rules)?;
    let paths = inputs.analyze_paths(&threats, &args.entry, &args.goal, args.max_len, args.top)?;

    println!("| # | Goal | Score | Steps |");
    println!("| --- | --- | --- | --- |");
    for (i, path) in paths.iter().enumerate() {
        let steps: Vec<String> = path
            .steps
            .iter()
            .map(|s| format!("{}: {} ({})", s.element, s.technique, s.tactic))
            .collect();
        println!(
            "| {} | {} | {:.2} | {} |",
            i + 1,
            path.goal,
            path.path_score,
            steps.join(" → ")
        );
    }
    if let Some(dot_path) = &args.dot {
        std::fs::write(dot_path, export_paths_dot(&paths))?;
    }
    Ok(())
}

fn print_score(score: Score) {
    println!("{:.1} {}", score.value, severity_bucket(score.value));
}

fn cmd_score(args: &ScoreArgs) -> Result<(), Failure> {
    match (&args.vector, args.composite.is_empty()) {
        (Some(v), true) => {
            print_score(score_cvss31_base(&parse_vector(v)?));
            Ok(())
        }
        (None, false) => {
            print_score(score_composite(&parse_composite_pairs(&args.composite)?));
            Ok(())
        }
        (None, true) => Err(Failure::usage("choose a scoring mode: --vector or --composite")),
        (Some(_), false) => unreachable!("clap conflicts_with covers this"),
    }
}

/// Per-step score lookup for path ranking: the best score among the threats
/// contributing to each (element, technique) node.
fn step_scores(
    scored: &ScoredThreatSet,
    mapping: &MappingTable,
) -> Result<BTreeMap<String, Score>, Failure> {
    let mut best: BTreeMap<String, Score> = BTreeMap::new();
    for st in &scored.threats {
        let Some(score) = st.score else { continue };
        for tref in map_threat_to_techniques(&st.threat, mapping)? {
            let key = format!("{}/{}", st.threat.attributed_asset, tref.technique_id);
            match best.get(&key) {
                Some(existing) if existing.value >= score.value => {}
                _ => {
                    best.insert(key, score);
                }
            }
        }
    }
    Ok(best)
}

fn cmd_report(args: &ReportArgs) -> Result<(), Failure> {
    let inputs = PipelineInputs::load(
        &args.model,
        args.rules.as_ref(),
        args.matrix.as_ref(),
        args.mapping.as_ref(),
    )?;
    let feed_text = match &args.nvd {
        Some(p) => read(p)?,
        None => String::new(),
    };
    let catalog = if feed_text.is_empty() {
        load_feed(r#"{"source": "none", "retrieved": "1970-01-01", "records": []}"#)
            .expect("empty catalog")
    } else {
        load_feed(&feed_text)?
    };
    let bindings_text = match &args.bindings {
        Some(p) => read(p)?,
        None => String::new(),
    };
    let bindings =
        if bindings_text.is_empty() { Vec::new() } else { load_bindings(&bindings_text)? };

    let digest = input_digest(&[
        &inputs.model_text,
        &inputs.rules_text,
        &inputs.matrix_text,
        &inputs.mapping_text,
        &feed_text,
        &bindings_text,
    ]);

    let threats = enumerate_threats(&inputs.model, &inputs.rules)?;
    let all_paths = inputs.analyze_paths(&threats, "Initial Access", "Impact", 3, usize::MAX)?;
    let scored = attach_scores(&threats, &catalog, &bindings, None)?;
    let lookup = step_scores(&scored, &inputs.mapping)?;
    let mut paths = rank_paths(all_paths, &lookup);
    paths.truncate(args.top);

    let doc = build_report(&inputs.model, &scored, &paths, args.top, &digest);
    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("report.md"), render_markdown(&doc))?;
    std::fs::write(args.out.join("report.json"), render_json(&doc))?;
    std::fs::write(args.out.join("dfd.dot"), export_dot(&inputs.model))?;
    std::fs::write(args.out.join("paths.dot"), export_paths_dot(&paths))?;
    println!("wrote report.md, report.json, dfd.dot, paths.dot to {}", args.out.display());
    Ok(())
}

fn cmd_fetch_nvd(args: &FetchNvdArgs) -> Result<(), Failure> {
    let api_key = std::env::var(API_KEY_VAR).ok();
    let catalog = fetch_remote(&args.endpoint, &args.keyword, api_key.as_deref(), &args.out)?;
    println!("wrote {} record(s) to {}", catalog.len(), args.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Validate(args) => cmd_validate(args),
        Command::Threats(args) => cmd_threats(args),
        Command::Paths(args) => cmd_paths(args),
        Command::Score(args) => cmd_score(args),
        Command::Report(args) => cmd_report(args),
        Command::FetchNvd(args) => cmd_fetch_nvd(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
