//! Command-line driver: type checking, machine runs, and MLL sequents.

use clap::{Args, Parser, Subcommand};
use qlam::machine::{Machine, MachineError, Scheduler};
use qlam::mll::sequent_of;
use qlam::oracle::{check_soundness, SOUNDNESS_TOL};
use qlam::quantum::{GateLibrary, Register};
use qlam::syntax::{parse_term, parse_type, Term, Type};
use qlam::typing::{infer, Derivation, LinearEnv};
use serde_json::json;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "qlam", about = "Linear quantum lambda-calculus toolkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Term file to read.
    file: String,
    /// Extra gate definitions, JSON: {"NAME": {"arity": n, "matrix": [[[re,im],...],...]}}.
    #[arg(long)]
    gates: Option<String>,
    /// Typing environment for open terms, e.g. "x:B,y:B*B".
    #[arg(long)]
    env: Option<String>,
    /// Machine-readable JSON output.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Type-check a term and print its type.
    Check(Common),
    /// Run the token machine on a closed term and compare against the
    /// normalizer when the result type is ground.
    Run {
        #[command(flatten)]
        common: Common,
        /// Input bits for terms with input arity > 0, e.g. "01".
        #[arg(long)]
        input: Option<String>,
        /// Emit the step-by-step trace as JSON lines.
        #[arg(long)]
        trace: bool,
    },
    /// Print the multiplicative-linear-logic sequent of a judgement.
    Mll(Common),
}

/// User-facing failure (exit 1) or internal invariant failure (exit 2).
struct Failure {
    message: String,
    internal: bool,
}

impl Failure {
    fn user(message: impl Into<String>) -> Failure {
        Failure { message: message.into(), internal: false }
    }
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Failure {
        Failure { message: e.to_string(), internal: false }
    }
}

fn machine_failure(e: MachineError) -> Failure {
    let internal = matches!(
        e,
        MachineError::Deadlock | MachineError::BudgetExceeded(_) | MachineError::NormDrift(_)
    );
    Failure { message: e.to_string(), internal }
}

fn parse_env(spec: &str) -> Result<LinearEnv, Failure> {
    let mut env = Vec::new();
    for entry in spec.split(',').filter(|s| !s.trim().is_empty()) {
        let (name, ty) = entry
            .split_once(':')
            .ok_or_else(|| Failure::user(format!("bad environment entry: {}", entry)))?;
        env.push((name.trim().to_string(), parse_type(ty.trim())?));
    }
    Ok(env)
}

fn load(common: &Common) -> Result<(Term, LinearEnv, GateLibrary), Failure> {
    let text = std::fs::read_to_string(&common.file)
        .map_err(|e| Failure::user(format!("{}: {}", common.file, e)))?;
    let term = parse_term(&text)?;
    let env = match &common.env {
        Some(spec) => parse_env(spec)?,
        None => Vec::new(),
    };
    let mut lib = GateLibrary::builtin();
    if let Some(path) = &common.gates {
        let config = std::fs::read_to_string(path)
            .map_err(|e| Failure::user(format!("{}: {}", path, e)))?;
        lib.load_config(&config)?;
    }
    Ok((term, env, lib))
}

fn checked(common: &Common) -> Result<(Derivation, GateLibrary), Failure> {
    let (term, env, lib) = load(common)?;
    let pi = infer(&env, &term, &lib)?;
    Ok((pi, lib))
}

fn cmd_check(common: &Common) -> Result<(), Failure> {
    let (pi, _) = checked(common)?;
    if common.json {
        println!("{}", json!({ "type": pi.ty.to_string(), "derivation": pi.to_json() }));
    } else {
        println!("{}", pi.ty);
    }
    Ok(())
}

fn parse_bits(s: &str) -> Result<Vec<u8>, Failure> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(Failure::user(format!("bad input bit: {}", other))),
        })
        .collect()
}

fn register_json(r: &Register) -> serde_json::Value {
    json!(r.amplitudes().iter().map(|a| [a.re, a.im]).collect::<Vec<_>>())
}

fn is_ground(ty: &Type) -> bool {
    match ty {
        Type::Bit => true,
        Type::Tensor(a, b) => is_ground(a) && is_ground(b),
        Type::Arrow(..) => false,
    }
}

fn cmd_run(common: &Common, input: Option<&str>, trace: bool) -> Result<(), Failure> {
    let (pi, lib) = checked(common)?;
    if !pi.is_closed() {
        return Err(Failure::user("run requires a closed term"));
    }
    let machine = Machine::compile(&pi, &lib).map_err(machine_failure)?;
    let q = match (machine.input_arity(), input) {
        (0, None) => Register::scalar(),
        (0, Some(_)) => return Err(Failure::user("term has input arity 0; drop --input")),
        (k, None) => {
            return Err(Failure::user(format!("term has input arity {}; pass --input with {} bits", k, k)))
        }
        (k, Some(s)) => {
            let bits = parse_bits(s)?;
            if bits.len() != k {
                return Err(Failure::user(format!("--input has {} bits, need {}", bits.len(), k)));
            }
            Register::basis(&bits)
        }
    };
    let start = machine.initial_state(&q).map_err(machine_failure)?;
    let outcome = machine
        .run_to_final(&start, Scheduler::LowestIndex, trace)
        .map_err(machine_failure)?;
    if trace {
        for step in &outcome.trace {
            println!("{}", step.to_json());
        }
    }
    let canonical = outcome.final_info.canonical_register();
    let oracle = if machine.input_arity() == 0 && is_ground(&pi.ty) {
        Some(check_soundness(&pi, &lib).map_err(|e| match e {
            qlam::oracle::OracleError::Machine(m) => machine_failure(m),
            other => other.into(),
        })?)
    } else {
        None
    };
    let circuit: Vec<serde_json::Value> = outcome
        .circuit
        .iter()
        .map(|op| json!({ "gate": op.gate, "targets": op.targets }))
        .collect();
    if common.json {
        let mut report = json!({
            "type": pi.ty.to_string(),
            "sigma": outcome.final_info.sigma.as_slice(),
            "register": register_json(&canonical),
            "circuit": circuit,
            "steps": outcome.steps,
        });
        if let Some(r) = &oracle {
            report["oracle"] = json!({
                "register": register_json(&r.oracle),
                "normal_form": r.normal_form.to_json(),
                "max_deviation": r.max_deviation,
                "agrees": r.agrees,
            });
        }
        println!("{}", report);
    } else {
        println!("type: {}", pi.ty);
        println!("register: {}", canonical);
        println!("sigma: {:?}", outcome.final_info.sigma.as_slice());
        println!("circuit: {}", json!(circuit));
        if let Some(r) = &oracle {
            println!("normal form: {}", r.normal_form);
            println!(
                "oracle agreement: {} (max deviation {:.3e}, tolerance {:.0e})",
                r.agrees, r.max_deviation, SOUNDNESS_TOL
            );
        }
    }
    if let Some(r) = &oracle {
        if !r.agrees {
            return Err(Failure {
                message: format!("machine and normalizer disagree by {}", r.max_deviation),
                internal: true,
            });
        }
    }
    Ok(())
}

fn cmd_mll(common: &Common) -> Result<(), Failure> {
    let (pi, _) = checked(common)?;
    let seq = sequent_of(&pi);
    if common.json {
        let formulas: Vec<String> = seq.0.iter().map(|f| f.to_string()).collect();
        println!("{}", json!({ "sequent": formulas }));
    } else {
        println!("{}", seq);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Check(common) => cmd_check(common),
        Command::Run { common, input, trace } => cmd_run(common, input.as_deref(), *trace),
        Command::Mll(common) => cmd_mll(common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(if f.internal { 2 } else { 1 })
        }
    }
}
