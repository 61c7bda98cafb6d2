use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use s2c_cli::dataset::{batch, read_dataset};
use s2c_cli::evaluate::{evaluate, Backend, Evaluation};
use s2c_cli::external::HttpBackend;
use s2c_cli::{translate, OutputFormat, RunConfig, TranslateOutcome};
use s2c_core::{ExplicitRels, OptionalPlacement};
use s2c_harness::metrics::{to_csv, to_text, Layout, Report};
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "s2c", version, about = "SPARQL to Cypher transpiler")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Predicates always mapped to relationships, e.g. `:knows,foaf:member`
    #[arg(long, value_name = "P1,P2")]
    explicit_rels: Option<ExplicitRels>,
    /// Emit OPTIONAL MATCH after the first WHERE
    #[arg(long)]
    optional_after_where: bool,
    /// Label used for the empty prefix
    #[arg(long, default_value = "ROOT")]
    default_prefix: String,
    /// Reject undeclared prefixes
    #[arg(long)]
    strict: bool,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Report COUNT(*) projections as COUNT_ALL, like the older transpiler
    #[arg(long)]
    count_all_compat: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

impl ConfigArgs {
    fn config(&self) -> Result<RunConfig> {
        let config = RunConfig {
            explicit_rels: self.explicit_rels.clone().unwrap_or_default(),
            optional_placement: if self.optional_after_where {
                OptionalPlacement::AfterWhere
            } else {
                OptionalPlacement::BeforeWhere
            },
            strict_prefixes: self.strict,
            default_prefix_label: self.default_prefix.clone(),
            output_format: match self.format {
                Format::Text => OutputFormat::Text,
                Format::Json => OutputFormat::Json,
            },
            count_all_compat: self.count_all_compat,
        };
        config.validate().map_err(anyhow::Error::msg)?;
        Ok(config)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Sandbox,
    External,
}

#[derive(Subcommand)]
enum Command {
    /// Translate one query read from FILE or stdin
    Translate {
        file: Option<PathBuf>,
        /// Also print the intermediate AST as JSON
        #[arg(long)]
        emit_ast: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Translate every entry of a dataset
    Batch {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run SPARQL and translated Cypher side by side and compare results
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        /// Directory with one `{db_id}.ttl` per database (sandbox backend)
        #[arg(long)]
        graphs: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "sandbox")]
        backend: BackendKind,
        /// JSON output; a CSV is written next to it
        #[arg(long, default_value = "evaluation.json")]
        output: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Render one or two report files side by side
    Report {
        #[arg(required = true, num_args = 1..=2)]
        files: Vec<PathBuf>,
        #[arg(long)]
        csv: bool,
    },
}

fn read_input(file: Option<&Path>) -> Result<String> {
    match file {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())),
        None => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).context("reading stdin")?;
            Ok(s)
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_translate(file: Option<&Path>, emit_ast: bool, config: &RunConfig) -> Result<ExitCode> {
    let query = read_input(file)?;
    let outcome = translate(&query, config);
    let code = outcome.exit_code() as u8;
    match outcome {
        TranslateOutcome::Translated(t) => match config.output_format {
            OutputFormat::Text => {
                println!("{}", t.cypher.text);
                if emit_ast {
                    println!("\n{}", t.ast.to_json_pretty());
                }
            }
            OutputFormat::Json => {
                let mut out = serde_json::json!({"cypher": t.cypher.text});
                if emit_ast {
                    out["ast"] = t.ast.to_json();
                }
                println!("{}", serde_json::to_string_pretty(&out)?);
            }
        },
        TranslateOutcome::Syntax(msg) => eprintln!("syntax error: {msg}"),
        TranslateOutcome::Unsupported(cat) => println!("{}", serde_json::to_string(&cat)?),
    }
    Ok(ExitCode::from(code))
}

fn cmd_batch(input: &Path, output: &Path, config: &RunConfig) -> Result<()> {
    let entries = read_dataset(input)?;
    let (out, report) = batch(&entries, config);
    write(output, &(serde_json::to_string_pretty(&out)? + "\n"))?;
    match config.output_format {
        OutputFormat::Text => print!("{}", to_text(&[("batch", &report)], Layout::Parse)),
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}

fn cmd_evaluate(dataset: &Path, graphs: Option<&Path>, kind: BackendKind, output: &Path, config: &RunConfig) -> Result<()> {
    let entries = read_dataset(dataset)?;
    let backend = match kind {
        BackendKind::Sandbox => {
            let Some(dir) = graphs else { bail!("--graphs is required with the sandbox backend") };
            Backend::Sandbox(dir.to_path_buf())
        }
        BackendKind::External => Backend::External(HttpBackend::from_env().map_err(anyhow::Error::msg)?),
    };
    let eval = evaluate(&entries, &backend, config);
    write(output, &(serde_json::to_string_pretty(&eval)? + "\n"))?;
    let name = column_name(dataset);
    write(&output.with_extension("csv"), &to_csv(&[(&name, &eval.report)], Layout::Full)?)?;
    for e in eval.entries.iter().filter(|e| e.status == s2c_cli::evaluate::SKIPPED) {
        eprintln!("skipped entry {} ({}): {}", e.index, e.db_id, e.detail);
    }
    match config.output_format {
        OutputFormat::Text => print!("{}", to_text(&[(&name, &eval.report)], Layout::Full)),
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&eval.report)?),
    }
    Ok(())
}

fn column_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

/// Accepts an evaluation file or a bare report.
fn read_report(path: &Path) -> Result<Report> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(eval) = serde_json::from_str::<Evaluation>(&text) {
        return Ok(eval.report);
    }
    serde_json::from_str(&text).with_context(|| format!("{} is not a report", path.display()))
}

fn cmd_report(files: &[PathBuf], csv: bool) -> Result<()> {
    let reports = files
        .iter()
        .map(|f| Ok((column_name(f), read_report(f)?)))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<(&str, &Report)> = reports.iter().map(|(n, r)| (n.as_str(), r)).collect();
    let rendered = if csv { to_csv(&refs, Layout::Full)? } else { to_text(&refs, Layout::Full) };
    if reports.iter().all(|(_, r)| r.n == 0) {
        // nothing was counted: keep the header line only
        println!("{}", rendered.lines().next().unwrap_or_default());
    } else {
        print!("{rendered}");
    }
    Ok(())
}

fn run() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Translate { file, emit_ast, config } => cmd_translate(file.as_deref(), emit_ast, &config.config()?),
        Command::Batch { input, output, config } => cmd_batch(&input, &output, &config.config()?).map(|_| ExitCode::SUCCESS),
        Command::Evaluate {
            dataset,
            graphs,
            backend,
            output,
            config,
        } => cmd_evaluate(&dataset, graphs.as_deref(), backend, &output, &config.config()?).map(|_| ExitCode::SUCCESS),
        Command::Report { files, csv } => cmd_report(&files, csv).map(|_| ExitCode::SUCCESS),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
