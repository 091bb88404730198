//! Command-line front end: resolve dependency graphs, analyze license
//! compatibility, recommend remediations, and compute ecosystem statistics.
//!
//! Exit codes: 0 success, 1 configuration or input errors, 2 unknown
//! package or release, 3 no remediation solution, 4 solver timeout.

use std::path::PathBuf;
use std::time::Duration;

use clap::{Parser, Subcommand};

use licomp::config::{ConfigError, OutputFormat, Overrides, RunConfig};
use licomp::detector::{detect, ecosystem_stats, CompatibilityLabel, IncompatibilityFinding};
use licomp::index::{IndexLoader, LoadDiagnostics, PackageIndex, Timestamp};
use licomp::licensing::{CompatibilityMatrix, NormalizationTables};
use licomp::model::{parse_version, PackageName, ReleaseId};
use licomp::remediator::{
    load_migrations, remediate, render_report, CostModel, MigrationRule, RemediationRequest,
    RemediatorError,
};
use licomp::resolver::resolve;

#[derive(Parser)]
#[command(
    name = "licomp",
    version,
    about = "Dependency-graph license incompatibility analysis and remediation"
)]
struct Cli {
    /// Package index snapshot (JSON lines)
    #[arg(long, env = "LICOMP_INDEX", global = true)]
    index: Option<PathBuf>,
    /// License compatibility matrix (JSON); builtin data when omitted
    #[arg(long, env = "LICOMP_MATRIX", global = true)]
    matrix: Option<PathBuf>,
    /// Keyword tables for license-field normalization (JSON)
    #[arg(long, env = "LICOMP_KEYWORDS", global = true)]
    keywords: Option<PathBuf>,
    /// Migration rules (JSON lines of {"source", "target"})
    #[arg(long, env = "LICOMP_MIGRATIONS", global = true)]
    migrations: Option<PathBuf>,
    /// Resolve at this ISO-8601 instant (default: now)
    #[arg(long, env = "LICOMP_AT", global = true)]
    at: Option<String>,
    /// Activate an extra for the root release (repeatable)
    #[arg(long = "extra", global = true)]
    extras: Vec<String>,
    /// Alternative graphs to enumerate
    #[arg(long, env = "LICOMP_N", global = true)]
    n: Option<usize>,
    /// Alternative licenses to list
    #[arg(long, env = "LICOMP_M", global = true)]
    m: Option<usize>,
    #[arg(long, env = "LICOMP_C_MIGRATION", global = true)]
    c_migration: Option<i64>,
    #[arg(long, env = "LICOMP_C_REMOVAL", global = true)]
    c_removal: Option<i64>,
    /// Solver budget per enumeration step, seconds
    #[arg(long, env = "LICOMP_TIMEOUT", global = true)]
    timeout: Option<u64>,
    /// Cap on the package universe the solver may consider
    #[arg(long, env = "LICOMP_UNIVERSE_CAP", global = true)]
    universe_cap: Option<usize>,
    /// Output format: text or json
    #[arg(long, env = "LICOMP_FORMAT", global = true)]
    format: Option<String>,
    /// Layered config file (TOML); flags and env beat its values
    #[arg(long, env = "LICOMP_CONFIG", global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resolve a release's dependency graph and print it as JSON
    Resolve {
        name: String,
        version: String,
        /// Write the graph here instead of stdout
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Label a release and list incompatible dependencies
    Analyze { name: String, version: String },
    /// Recommend license changes and minimal-cost dependency changes
    Remediate { name: String, version: String },
    /// Ecosystem statistics over the whole index
    Stats {
        /// Analyze every release instead of the latest per package per year
        #[arg(long)]
        all_releases: bool,
    },
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn config(message: impl std::fmt::Display) -> Self {
        Failure { code: 1, message: message.to_string() }
    }

    fn not_found(message: impl std::fmt::Display) -> Self {
        Failure { code: 2, message: message.to_string() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::config(e)
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            std::process::exit(failure.code);
        }
    }
}

fn layered_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let from_flags = Overrides {
        index: cli.index.clone(),
        matrix: cli.matrix.clone(),
        keywords: cli.keywords.clone(),
        migrations: cli.migrations.clone(),
        at: cli.at.clone(),
        extras: if cli.extras.is_empty() { None } else { Some(cli.extras.clone()) },
        n: cli.n,
        m: cli.m,
        c_migration: cli.c_migration,
        c_removal: cli.c_removal,
        timeout: cli.timeout,
        universe_cap: cli.universe_cap,
        format: cli.format.clone(),
        python_version: None,
        sys_platform: None,
        os_name: None,
    };
    let layered = match &cli.config {
        Some(path) => from_flags.or(Overrides::from_file(path)?),
        None => from_flags,
    };
    Ok(RunConfig::resolve(layered)?)
}

struct Loaded {
    index: PackageIndex,
    diagnostics: LoadDiagnostics,
    matrix: CompatibilityMatrix,
    migrations: Vec<MigrationRule>,
}

fn load(config: &RunConfig) -> Result<Loaded, Failure> {
    let index_path = config
        .index_path
        .as_ref()
        .ok_or_else(|| Failure::config("no index given (use --index or LICOMP_INDEX)"))?;
    let tables = match &config.keywords_path {
        Some(path) => NormalizationTables::with_keyword_file(path).map_err(Failure::config)?,
        None => NormalizationTables::builtin(),
    };
    let (index, diagnostics) =
        IndexLoader::new(tables).load(index_path).map_err(Failure::config)?;
    let matrix = match &config.matrix_path {
        Some(path) => CompatibilityMatrix::from_path(path).map_err(Failure::config)?,
        None => CompatibilityMatrix::builtin(),
    };
    let migrations = match &config.migrations_path {
        Some(path) => {
            let (rules, skipped) = load_migrations(path).map_err(Failure::config)?;
            for message in skipped {
                eprintln!("warning: {message}");
            }
            rules
        }
        None => Vec::new(),
    };
    Ok(Loaded { index, diagnostics, matrix, migrations })
}

fn release_id(name: &str, version: &str) -> Result<ReleaseId, Failure> {
    let version = parse_version(version).map_err(Failure::config)?;
    Ok(ReleaseId::new(PackageName::new(name), version))
}

fn effective_at(config: &RunConfig) -> Timestamp {
    config.at.unwrap_or_else(Timestamp::now)
}

fn footer(index: &PackageIndex, matrix: &CompatibilityMatrix) -> String {
    format!("--\nindex sha256: {}; matrix: {}\n", index.snapshot_hash(), matrix.version())
}

fn report_load_noise(diags: &LoadDiagnostics) {
    if diags.skipped_records > 0 || diags.skipped_requirements > 0 {
        eprintln!(
            "note: skipped {} records and {} requirements during ingestion",
            diags.skipped_records, diags.skipped_requirements
        );
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = layered_config(&cli)?;
    match &cli.command {
        Command::Resolve { name, version, output } => {
            let loaded = load(&config)?;
            report_load_noise(&loaded.diagnostics);
            let root = release_id(name, version)?;
            let graph = resolve(&loaded.index, &root, effective_at(&config), &config.marker_env())
                .map_err(Failure::not_found)?;
            let json = graph.to_json();
            match output {
                Some(path) => std::fs::write(path, json).map_err(Failure::config)?,
                None => println!("{json}"),
            }
            Ok(())
        }
        Command::Analyze { name, version } => {
            let loaded = load(&config)?;
            report_load_noise(&loaded.diagnostics);
            let root = release_id(name, version)?;
            let at = effective_at(&config);
            let graph = resolve(&loaded.index, &root, at, &config.marker_env())
                .map_err(Failure::not_found)?;
            let (label, findings, diags) = detect(&graph, &loaded.matrix);
            match config.format {
                OutputFormat::Json => {
                    let doc = serde_json::json!({
                        "release": root.to_string(),
                        "resolved_at": at.to_string(),
                        "label": label.to_string(),
                        "findings": findings,
                        "out_of_matrix": diags.out_of_matrix,
                    });
                    println!("{}", serde_json::to_string_pretty(&doc).expect("serializes"));
                }
                OutputFormat::Text => {
                    print!("{}", analyze_text(&root, at, label, &findings));
                    print!("{}", footer(&loaded.index, &loaded.matrix));
                }
            }
            Ok(())
        }
        Command::Remediate { name, version } => {
            let loaded = load(&config)?;
            report_load_noise(&loaded.diagnostics);
            let root = release_id(name, version)?;
            let mut request = RemediationRequest::new(root, effective_at(&config));
            request.n_plans = config.n_plans;
            request.m_licenses = config.m_licenses;
            request.cost_model =
                CostModel { c_migration: config.c_migration, c_removal: config.c_removal };
            request.solver_timeout = Duration::from_secs(config.solver_timeout_secs);
            request.universe_cap = config.universe_cap;
            request.migrations = loaded.migrations.clone();
            request.env = config.marker_env();

            let outcome = match remediate(&loaded.index, &loaded.matrix, &request) {
                Ok(outcome) => outcome,
                Err(RemediatorError::UnknownRoot(id)) => {
                    return Err(Failure::not_found(format!("unknown release {id}")))
                }
                Err(e @ RemediatorError::SolverTimeout(_)) => {
                    return Err(Failure { code: 4, message: e.to_string() })
                }
                Err(e) => return Err(Failure::config(e)),
            };

            let body = render_report(&outcome, config.format == OutputFormat::Json);
            print!("{body}");
            if config.format == OutputFormat::Text {
                print!("{}", footer(&loaded.index, &loaded.matrix));
            }
            if outcome.baseline_label == CompatibilityLabel::Incompatible
                && outcome.plans.is_empty()
                && outcome.licenses.is_empty()
            {
                return Err(Failure { code: 3, message: "no remediation found".to_string() });
            }
            Ok(())
        }
        Command::Stats { all_releases } => {
            let loaded = load(&config)?;
            report_load_noise(&loaded.diagnostics);
            let stats = ecosystem_stats(&loaded.index, &loaded.matrix, !all_releases);
            match config.format {
                OutputFormat::Json => println!("{}", stats.to_json()),
                OutputFormat::Text => {
                    print!("{}", stats.to_text());
                    print!("{}", footer(&loaded.index, &loaded.matrix));
                }
            }
            Ok(())
        }
    }
}

fn analyze_text(
    root: &ReleaseId,
    at: Timestamp,
    label: CompatibilityLabel,
    findings: &[IncompatibilityFinding],
) -> String {
    let mut out = String::new();
    out.push_str(&format!("{} {} at {at}: {label}\n", root.name, root.version));
    if findings.is_empty() {
        return out;
    }
    let mut rows: Vec<[String; 5]> = vec![[
        "dependency".to_string(),
        "license".to_string(),
        "depth".to_string(),
        "in".to_string(),
        "out".to_string(),
    ]];
    for f in findings {
        rows.push([
            f.dependency.to_string(),
            f.dep_license.to_string(),
            f.depth.to_string(),
            f.in_degree.to_string(),
            f.out_degree.to_string(),
        ]);
    }
    let widths: Vec<usize> =
        (0..5).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    for row in rows {
        let cells: Vec<String> =
            row.iter().zip(&widths).map(|(cell, w)| format!("{cell:<w$}")).collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}
