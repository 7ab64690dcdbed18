use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mwlab::report::{
    merge, read_report, run, write_outputs, ExperimentConfig, LemmaConfig, Outcome, Sections, SparseConfig,
    EXIT_CONFIG, EXIT_FAIL,
};
use mwlab::verify::TheoremKind;
use mwlab::LabError;

#[derive(Parser)]
#[command(name = "mwlab", version, about = "Matrix-weighted sparse domination lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default: the config's `out`, else `mwlab-out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// A_p, A_1 and scalar A_inf constants of a weight.
    Constants {
        /// `.mwt` weight file; its grid replaces the configured one.
        weight: Option<PathBuf>,
        #[arg(long)]
        p: Option<f64>,
    },
    /// Build and certify sparse families; writes the stopping-time trace.
    Sparse,
    /// As `sparse`, plus the domination bracket.
    Dominate,
    /// Run one theorem certificate.
    Theorem { id: String },
    /// Parameter, matrix and reverse Hölder lemma suites.
    Lemmas,
    /// Merge `report.json` files (or directories holding them).
    Report { inputs: Vec<PathBuf> },
    /// Everything the configuration asks for.
    Run,
}

fn base_config(common: &Common) -> Result<ExperimentConfig, LabError> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::minimal(1, 6),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: Option<&ExperimentConfig>) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.and_then(|c| c.out.as_ref().map(|o| if o.is_absolute() { o.clone() } else { c.base.join(o) })))
        .unwrap_or_else(|| PathBuf::from("mwlab-out"))
}

fn checked(cfg: ExperimentConfig) -> Result<ExperimentConfig, LabError> {
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(Outcome, PathBuf), LabError> {
    let common = &cli.common;
    let none = Sections::NONE;
    let (cfg, sections) = match &cli.command {
        Command::Report { inputs } => {
            let mut reports = Vec::new();
            for p in inputs {
                let file = if p.is_dir() { p.join("report.json") } else { p.clone() };
                reports.push(read_report(&file)?);
            }
            let report = merge(reports)?;
            let mut trace = Vec::new();
            let mut plots = BTreeMap::new();
            for (k, p) in inputs.iter().enumerate() {
                let dir = if p.is_dir() { p.clone() } else { p.parent().map(Path::to_path_buf).unwrap_or_default() };
                if let Ok(text) = std::fs::read_to_string(dir.join("trace.jsonl")) {
                    for line in text.lines().filter(|l| !l.is_empty()) {
                        trace.push(serde_json::from_str(line)?);
                    }
                }
                if let Ok(entries) = std::fs::read_dir(dir.join("plotdata")) {
                    let mut names: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
                    names.sort();
                    for path in names {
                        let name = path.file_name().unwrap_or_default().to_string_lossy().to_string();
                        plots.insert(format!("{k}_{name}"), std::fs::read_to_string(&path)?);
                    }
                }
            }
            return Ok((Outcome { report, trace, plots }, out_dir(common, None)));
        }
        Command::Constants { weight, p } => {
            let mut cfg = base_config(common)?;
            if let Some(p) = p {
                cfg.p = *p;
            }
            if let Some(path) = weight {
                let w = mwlab::io::load_mwt(path)?;
                let abs = std::fs::canonicalize(path)?;
                cfg.geometry = mwlab::report::GeometryConfig { d: w.geom.d, depth: w.geom.depth };
                cfg.n = Some(w.n);
                cfg.weight = Some(mwlab::report::WeightConfig { spec: None, seed: 0, file: Some(abs) });
            }
            cfg.constants = true;
            (checked(cfg)?, Sections { constants: true, ..none })
        }
        Command::Sparse | Command::Dominate => {
            let mut cfg = base_config(common)?;
            let dominate = matches!(cli.command, Command::Dominate);
            let mut s = cfg.sparse.clone().unwrap_or(SparseConfig {
                corpus: vec![0],
                f: None,
                g: None,
                params: Default::default(),
                dominate: false,
                refine: false,
            });
            s.dominate |= dominate;
            cfg.sparse = Some(s);
            (checked(cfg)?, Sections { sparse: true, dominate, ..none })
        }
        Command::Theorem { id } => {
            let mut cfg = base_config(common)?;
            cfg.theorems = vec![id.parse::<TheoremKind>()?];
            (checked(cfg)?, Sections { theorems: true, ..none })
        }
        Command::Lemmas => {
            let mut cfg = base_config(common)?;
            cfg.lemmas.get_or_insert_with(LemmaConfig::default);
            (checked(cfg)?, Sections { lemmas: true, ..none })
        }
        Command::Run => (base_config(common)?, Sections::ALL),
    };
    let out = out_dir(common, Some(&cfg));
    Ok((run(&cfg, sections)?, out))
}

fn print_summary(outcome: &Outcome, out: &Path) {
    let r = &outcome.report;
    for c in &r.constants {
        println!("constants  p={}  A_p={}  A_1={}  Ainf_p={}  Ainf_1={}", c.p, c.ap, c.a1, c.ainfty_p, c.ainfty_1);
        if let Some(s) = &c.scalar_oracle {
            println!("  scalar   A_p={}  A_1={}  Ainf={}", s.ap, s.a1, s.ainfty);
        }
    }
    for s in &r.sparse {
        let dom = s.domination.map(|d| format!("  ratio_upper={:.4}", d.ratio_upper)).unwrap_or_default();
        println!(
            "sparse     {:<10} cubes={} iterations={} eta={} feasible={} carleson={:.3}{}",
            s.label, s.cubes, s.iterations, s.eta, s.certificate.flow_feasible, s.certificate.carleson, dom
        );
    }
    for c in &r.theorems {
        let failed: Vec<&str> =
            c.exponents.side_conditions.iter().filter(|s| !s.holds).map(|s| s.name.as_str()).collect();
        println!(
            "theorem    {:<19} ratio={:.4e} bound={:.4e} {:?}{}",
            c.theorem.id(),
            c.ratio,
            c.pass_bound,
            c.status,
            if failed.is_empty() { String::new() } else { format!("  side conditions failing: {}", failed.join("; ")) }
        );
    }
    if let Some(l) = &r.lemmas {
        for c in &l.parameters.claims {
            println!("lemma      {:<14} checked={} violations={} skipped={}", c.id, c.checked, c.violations, c.skipped);
        }
        println!(
            "lemma      matrix         bownik {}/{} holder {}/{} violations",
            l.matrix.bownik_violations, l.matrix.bownik_checks, l.matrix.holder_violations, l.matrix.holder_checks
        );
        let rh_bad = l.reverse_holder.iter().filter(|e| !e.holds).count();
        println!("lemma      reverse-holder {} weights, {} violations", l.reverse_holder.len(), rh_bad);
    }
    let v = &r.verdict;
    println!(
        "verdict    passed={} failed={} inconclusive={} exit={}  -> {}",
        v.passed,
        v.failed.len(),
        v.inconclusive.len(),
        v.exit_code,
        out.display()
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok((outcome, out)) => {
            if let Err(e) = write_outputs(&out, &outcome) {
                eprintln!("mwlab: {e}");
                return ExitCode::from(EXIT_FAIL as u8);
            }
            print_summary(&outcome, &out);
            ExitCode::from(outcome.report.verdict.exit_code as u8)
        }
        Err(e) => {
            eprintln!("mwlab: {e}");
            let code = match e {
                LabError::Config(_) => EXIT_CONFIG,
                _ => EXIT_FAIL,
            };
            ExitCode::from(code as u8)
        }
    }
}
