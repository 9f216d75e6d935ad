use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use loopinv::invariants::{generate_invariants, Derivation};
use loopinv::numeric::{dimension_names, random_instance, split_points, CheckReport, Oracle};
use loopinv::opspec::parse_spec;
use loopinv::report::{
    build_report, dot_graphs, render, to_json, Format, RenderError, Selection, Stage, VerificationReport,
};

/// Exit status for a malformed operation description or bad usage.
const EXIT_SPEC: u8 = 1;
/// Exit status when the derivation or its verification fails.
const EXIT_DERIVATION: u8 = 2;

#[derive(Parser)]
#[command(name = "loopinv", version, about = "Derive PMEs and loop-invariants from matrix operation descriptions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the derivation pipeline up to a stage and render its output.
    Derive(DeriveArgs),
}

#[derive(clap::Args)]
struct DeriveArgs {
    /// Operation description (.clk).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = StageArg::Invariants)]
    stage: StageArg,
    /// 1-based PME index; all PMEs by default.
    #[arg(long)]
    pme: Option<usize>,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
    /// Check PMEs and invariants numerically on a random instance.
    #[arg(long)]
    verify: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Size given to every dimension of the random instance.
    #[arg(long, default_value_t = 4)]
    size: usize,
    /// Write output files to this directory instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Rulesets,
    Pme,
    Tasks,
    Graph,
    Candidates,
    Invariants,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Stage {
        match s {
            StageArg::Rulesets => Stage::RuleSets,
            StageArg::Pme => Stage::Pme,
            StageArg::Tasks => Stage::Tasks,
            StageArg::Graph => Stage::Graph,
            StageArg::Candidates => Stage::Candidates,
            StageArg::Invariants => Stage::Invariants,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Json,
    Latex,
    Dot,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Text => Format::Text,
            FormatArg::Json => Format::Json,
            FormatArg::Latex => Format::Latex,
            FormatArg::Dot => Format::Dot,
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn spec(message: impl Into<String>) -> Self {
        Failure { code: EXIT_SPEC, message: message.into() }
    }

    fn derivation(message: impl Into<String>) -> Self {
        Failure { code: EXIT_DERIVATION, message: message.into() }
    }
}

impl From<RenderError> for Failure {
    fn from(e: RenderError) -> Self {
        Failure::spec(e.to_string())
    }
}

fn verify(d: &Derivation, sel: &Selection, seed: u64, size: usize) -> Result<VerificationReport, Failure> {
    let sizes: BTreeMap<String, usize> = dimension_names(&d.spec).into_iter().map(|n| (n, size)).collect();
    let inst = random_instance(&d.spec, &sizes, seed).map_err(|e| Failure::derivation(format!("verify: {e}")))?;
    let mut oracle =
        Oracle::new(&d.spec, &d.registry, &inst).map_err(|e| Failure::derivation(format!("verify: {e}")))?;
    let mut rep = CheckReport::default();
    for a in d.analyses.iter().filter(|a| sel.pme.is_none_or(|i| a.index == i)) {
        for p in split_points(&a.pme.ruleset, &sizes) {
            let r = oracle.check_at(a, &p);
            rep.checks += r.checks;
            rep.failures.extend(r.failures);
        }
    }
    Ok(VerificationReport::new(seed, sizes, &rep))
}

fn write_out(dir: &Path, name: &str, content: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::spec(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| Failure::spec(format!("cannot write {}: {e}", path.display())))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn derive(args: &DeriveArgs) -> Result<(), Failure> {
    let source = fs::read_to_string(&args.input)
        .map_err(|e| Failure::spec(format!("cannot read {}: {e}", args.input.display())))?;
    let spec = parse_spec(&source).map_err(|d| Failure::spec(d.with_file(&args.input.display().to_string())))?;
    let d = generate_invariants(&spec);
    for diag in &d.diagnostics {
        eprintln!("note: {diag}");
    }
    let stage = Stage::from(args.stage);
    let format = Format::from(args.format);
    let sel = Selection { stage, pme: args.pme };
    if d.rule_sets.is_empty() {
        return Err(Failure::derivation(format!("{}: no admissible rule set", spec.name)));
    }
    if stage >= Stage::Pme && d.analyses.is_empty() {
        return Err(Failure::derivation(format!("{}: no PME could be derived", spec.name)));
    }

    let verification = if args.verify { Some(verify(&d, &sel, args.seed, args.size)?) } else { None };
    let stem = format!("{}.{}", spec.name, stage);
    match format {
        Format::Json => {
            let mut report = build_report(&d, &sel)?;
            report.verification = verification.clone();
            emit(args, &format!("{stem}.json"), &to_json(&report))?;
        }
        Format::Dot => {
            let graphs = dot_graphs(&d, &sel)?;
            match &args.out {
                Some(dir) => {
                    for (i, g) in &graphs {
                        write_out(dir, &format!("{}.pme{i}.dot", spec.name), g)?;
                    }
                }
                None => {
                    let all: Vec<String> = graphs.into_iter().map(|(_, g)| g).collect();
                    print!("{}", all.join("\n"));
                }
            }
        }
        Format::Text | Format::Latex => {
            let mut out = render(&d, &sel, format)?;
            if let (Format::Text, Some(v)) = (format, &verification) {
                out.push('\n');
                out.push_str(&v.summary());
                out.push('\n');
            }
            emit(args, &format!("{stem}.{}", format.extension()), &out)?;
        }
    }

    if let Some(v) = verification {
        if format != Format::Text {
            eprintln!("{}", v.summary());
        }
        if !v.failures.is_empty() {
            for f in &v.failures {
                eprintln!("  {f}");
            }
            return Err(Failure::derivation("numeric verification failed"));
        }
    }
    Ok(())
}

fn emit(args: &DeriveArgs, name: &str, content: &str) -> Result<(), Failure> {
    match &args.out {
        Some(dir) => write_out(dir, name, content),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_SPEC) } else { ExitCode::SUCCESS };
        }
    };
    let Command::Derive(args) = cli.command;
    match derive(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
