//! `vlab`: run seeded checks over declared valued fields.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 an unsupported
//! configuration was encountered, 3 the spec failed to parse.

use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use vlab::{checks, report, specfile};

use vlab_core::decompose::{chain_diagram, ramification_classify, standard_decomposition};
use vlab_core::tower::expr::eval_str;
use vlab_core::tower::sample::Sampler;

#[derive(Parser)]
#[command(name = "vlab", version, about = "valued-fields workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Records,
}

#[derive(Subcommand)]
enum Command {
    /// Run the check directives of a spec file and print a report.
    Check {
        spec: PathBuf,
        /// Override the seed declared in the spec file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Print the standard decomposition chain of the declared valuation.
    Decompose {
        spec: PathBuf,
        /// Residue characteristic; defaults to the first `decompose`
        /// directive's p.
        #[arg(long)]
        p: Option<u64>,
    },
    /// Evaluate element expressions over the declared field, line by line.
    Repl { spec: PathBuf },
}

fn budget_scale() -> f64 {
    std::env::var("VLAB_BUDGET")
        .ok()
        .and_then(|s| s.parse::<f64>().ok())
        .filter(|b| *b > 0.0)
        .unwrap_or(1.0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Check { spec, seed, format } => run_check(&spec, seed, format),
        Command::Decompose { spec, p } => run_decompose(&spec, p),
        Command::Repl { spec } => run_repl(&spec),
    }
}

fn load(spec: &PathBuf) -> Result<(specfile::FieldSpecDocument, String), ExitCode> {
    let text = match std::fs::read_to_string(spec) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {}", spec.display(), e);
            return Err(ExitCode::from(3));
        }
    };
    let name = spec
        .file_name()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| spec.display().to_string());
    match specfile::parse_spec(&text) {
        Ok(doc) => Ok((doc, name)),
        Err(e) => {
            eprintln!("{}: {}", name, e);
            Err(ExitCode::from(3))
        }
    }
}

fn run_check(spec: &PathBuf, seed: Option<u64>, format: Format) -> ExitCode {
    let (doc, name) = match load(spec) {
        Ok(x) => x,
        Err(c) => return c,
    };
    match checks::run_checks(&doc, &name, seed, budget_scale()) {
        Ok(report) => {
            let rendered = match format {
                Format::Text => report::render_text(&report),
                Format::Records => report::render_records(&report),
            };
            print!("{}", rendered);
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("{}: {}", name, e);
            ExitCode::from(2)
        }
    }
}

fn run_decompose(spec: &PathBuf, p_flag: Option<u64>) -> ExitCode {
    let (doc, name) = match load(spec) {
        Ok(x) => x,
        Err(c) => return c,
    };
    let p = p_flag.or_else(|| {
        doc.checks
            .iter()
            .find(|d| d.name == "decompose")
            .and_then(|d| d.arg_u64("p"))
    });
    let Some(p) = p else {
        eprintln!("{}: no p given and no decompose directive found", name);
        return ExitCode::from(2);
    };
    let field = match specfile::realize_field(&doc.field) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("{}: {}", name, e);
            return ExitCode::from(2);
        }
    };
    let Some(vexpr) = &doc.valuation else {
        eprintln!("{}: decompose needs a valuation binding", name);
        return ExitCode::from(2);
    };
    let v = match specfile::realize_valuation(&field, vexpr) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("{}: {}", name, e);
            return ExitCode::from(2);
        }
    };
    let run = || -> vlab_core::VlabResult<String> {
        let d = standard_decomposition(&v, p)?;
        let mut sampler = Sampler::new(doc.seed);
        let n = checks::scaled(200, budget_scale());
        let compared = d.verify(&v, &mut sampler, n)?;
        let ram = ramification_classify(&d.v1, p)?;
        let mut out = String::new();
        out.push_str(&format!("place decomposition at p = {}\n", p));
        out.push_str(&format!("field: {}\n", field.name()));
        out.push_str(&format!("value group: {}\n", v.value_group()));
        out.push_str(&format!("chain: {}\n", chain_diagram(&d)));
        out.push_str(&format!("Delta   = {}\n", d.delta));
        out.push_str(&format!("Delta0  = {}\n", d.delta0));
        out.push_str(&format!("Delta_p = {}\n", d.delta_p));
        out.push_str(&format!(
            "characteristics: ({}, {}, {}, {})\n",
            d.characteristics[0], d.characteristics[1], d.characteristics[2], d.characteristics[3]
        ));
        out.push_str(&format!(
            "middle stage: {}\n",
            match ram {
                vlab_core::decompose::RamificationClass::Unramified => "unramified".to_string(),
                vlab_core::decompose::RamificationClass::FinitelyRamified { interval_size } =>
                    format!("finitely-ramified(m={})", interval_size),
                vlab_core::decompose::RamificationClass::PDivisible => "p-divisible".to_string(),
                vlab_core::decompose::RamificationClass::NoneOfThese => "none-of-these".to_string(),
            }
        ));
        out.push_str(&format!("recomposition: {}/{} samples agree\n", compared, compared));
        Ok(out)
    };
    match run() {
        Ok(out) => {
            print!("{}", out);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}: {}", name, e);
            ExitCode::from(2)
        }
    }
}

fn run_repl(spec: &PathBuf) -> ExitCode {
    let (doc, name) = match load(spec) {
        Ok(x) => x,
        Err(c) => return c,
    };
    let field = match specfile::realize_field(&doc.field) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("{}: {}", name, e);
            return ExitCode::from(2);
        }
    };
    let valuation = doc
        .valuation
        .as_ref()
        .and_then(|ve| specfile::realize_valuation(&field, ve).ok());
    println!("field: {}", field.name());
    if let Some(v) = &valuation {
        println!("value group: {}", v.value_group());
    }
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout();
    loop {
        print!("> ");
        let _ = stdout.flush();
        let mut line = String::new();
        match stdin.lock().read_line(&mut line) {
            Ok(0) => break,
            Ok(_) => {}
            Err(_) => break,
        }
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == ":q" || line == ":quit" {
            break;
        }
        match eval_str(&field, line) {
            Ok(v) => {
                println!("= {}", field.fmt_value(&v));
                if let Some(val) = &valuation {
                    match val.eval(&v) {
                        Ok(g) => println!("v = {}", g),
                        Err(e) => println!("v = ? ({})", e),
                    }
                }
            }
            Err(e) => println!("error: {}", e),
        }
    }
    ExitCode::SUCCESS
}
