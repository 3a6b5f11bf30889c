//! `specshield` command line: harden assembly, run it on the simulator, and
//! reproduce the speculative-execution attacks.
//!
//! Exit status: 0 success, 1 usage or configuration error, 2 hardening
//! refused, 3 attack expectation not met.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};
use specshield::asm::{parse_unit, print_unit, IsaProfile};
use specshield::attack::{run_attack, AttackError, PocKind, PocVariant};
use specshield::harden::{harden_unit, HardenConfig, HardenError, Mitigation, SiteKind};
use specshield::sim::{load_unit, MachineConfig, Status};

#[derive(Parser)]
#[command(
    name = "specshield",
    version,
    about = "Retpoline-style hardening for RV64 assembly"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rewrite indirect branches and calls into speculation traps.
    Harden {
        input: PathBuf,
        #[arg(long, default_value = "rv64gc", value_parser = parse_isa)]
        isa: IsaProfile,
        /// `all` or a comma-separated subset of jumps,calls,rsb.
        #[arg(long, default_value = "all", value_parser = parse_mitigations)]
        mitigate: BTreeSet<Mitigation>,
        /// Overhead report (JSON).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Hardened assembly; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Execute a program on the simulated core.
    Run {
        program: PathBuf,
        #[arg(long, default_value = "rv64gc", value_parser = parse_isa)]
        isa: IsaProfile,
        /// Machine configuration (JSON); omitted fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run summary with speculation events (JSON).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Reproduce an attack and report the recovered secret.
    Attack {
        /// v2-call, v2-jump or v5.
        #[arg(long)]
        variant: String,
        /// Harden the fixture before running it.
        #[arg(long)]
        mitigated: bool,
        /// Mitigations applied with --mitigated.
        #[arg(long, default_value = "all", value_parser = parse_mitigations)]
        mitigate: BTreeSet<Mitigation>,
        #[arg(long, value_enum)]
        expect: Option<Expect>,
        #[arg(long, default_value_t = 10)]
        trials: u32,
        #[arg(long, default_value_t = 40)]
        mistrain: u32,
        #[arg(long, default_value = "BOOM!")]
        secret: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "rv64gc", value_parser = parse_isa)]
        isa: IsaProfile,
        /// Attack outcome (JSON).
        #[arg(short = 'o', long = "report")]
        report: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Expect {
    Leak,
    NoLeak,
}

fn parse_isa(s: &str) -> Result<IsaProfile, String> {
    s.parse()
}

fn parse_mitigations(s: &str) -> Result<BTreeSet<Mitigation>, String> {
    Mitigation::parse_list(s)
}

/// A failed command: message for stderr plus exit status.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<HardenError> for Failure {
    fn from(e: HardenError) -> Self {
        let code = match e {
            HardenError::UnsplitCallees(_) | HardenError::UnsupportedCallTarget { .. } => 2,
            HardenError::NothingEnabled | HardenError::Asm(_) => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<AttackError> for Failure {
    fn from(e: AttackError) -> Self {
        match e {
            AttackError::Harden(h) => h.into(),
            e => Failure::usage(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Harden {
            input,
            isa,
            mitigate,
            report,
            output,
        } => cmd_harden(&input, isa, mitigate, report.as_deref(), output.as_deref()),
        Command::Run {
            program,
            isa,
            config,
            trace,
        } => cmd_run(&program, isa, config.as_deref(), trace.as_deref()),
        Command::Attack {
            variant,
            mitigated,
            mitigate,
            expect,
            trials,
            mistrain,
            secret,
            config,
            isa,
            report,
        } => {
            let args = AttackArgs {
                variant,
                harden: mitigated.then(|| HardenConfig::new(mitigate, isa)),
                expect,
                trials,
                mistrain,
                secret,
                isa,
            };
            cmd_attack(args, config.as_deref(), report.as_deref())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn machine_config(path: Option<&Path>) -> Result<MachineConfig, Failure> {
    match path {
        Some(p) => MachineConfig::from_json(&read(p)?)
            .map_err(|e| Failure::usage(format!("{}: {e}", p.display()))),
        None => Ok(MachineConfig::default()),
    }
}

fn cmd_harden(
    input: &Path,
    isa: IsaProfile,
    mitigate: BTreeSet<Mitigation>,
    report: Option<&Path>,
    output: Option<&Path>,
) -> Result<(), Failure> {
    let src = read(input)?;
    let unit = parse_unit(&src).map_err(|e| Failure::usage(format!("{}: {e}", input.display())))?;
    let out = harden_unit(&unit, &HardenConfig::new(mitigate, isa))?;
    for d in &out.diagnostics {
        eprintln!("{d}");
    }
    let text = if out.changed() {
        print_unit(&out.unit)
    } else {
        src
    };
    let mut summary = String::new();
    for kind in [
        SiteKind::IndirectJump,
        SiteKind::IndirectCall,
        SiteKind::Prologue,
        SiteKind::DirectCall,
    ] {
        let c = out.report.category(kind);
        let per_site = c
            .delta_bytes
            .map_or_else(|| "mixed".to_string(), |d| d.to_string());
        let _ = writeln!(
            summary,
            "{}: {} sites, {} bytes per site, {} bytes total",
            kind.category(),
            c.count,
            per_site,
            c.total_delta_bytes
        );
    }
    let _ = writeln!(
        summary,
        "text: {} -> {} bytes ({isa})",
        out.report.total_before, out.report.total_after
    );
    if let Some(p) = report {
        write(p, &out.report.to_json())?;
    }
    match output {
        Some(p) => {
            write(p, &text)?;
            print!("{summary}");
        }
        None => {
            print!("{text}");
            eprint!("{summary}");
        }
    }
    Ok(())
}

fn cmd_run(
    program: &Path,
    isa: IsaProfile,
    config: Option<&Path>,
    trace: Option<&Path>,
) -> Result<(), Failure> {
    let cfg = machine_config(config)?;
    let unit = parse_unit(&read(program)?)
        .map_err(|e| Failure::usage(format!("{}: {e}", program.display())))?;
    let mut m = load_unit(&unit, isa, &cfg)
        .map_err(|e| Failure::usage(format!("{}: {e}", program.display())))?;
    let t = m.run();
    let digest = hex::encode(Sha256::digest(m.data_snapshot()));
    if let Some(p) = trace {
        write(
            p,
            &serde_json::to_string_pretty(&t).expect("trace serializes"),
        )?;
    }
    let exit = t
        .exit_code
        .map_or_else(|| "none".to_string(), |c| c.to_string());
    println!(
        "exit={exit} cycles={} spec_events={} data_digest={digest}",
        t.cycles,
        t.spec_events.len()
    );
    match t.status {
        Status::Exited { .. } => Ok(()),
        Status::Fault { pc, reason } => Err(Failure::usage(format!("fault at {pc:#x}: {reason}"))),
        Status::Timeout => Err(Failure::usage(format!(
            "no halt within {} steps",
            cfg.max_steps
        ))),
        Status::Running => unreachable!("run returns once halted"),
    }
}

struct AttackArgs {
    variant: String,
    harden: Option<HardenConfig>,
    expect: Option<Expect>,
    trials: u32,
    mistrain: u32,
    secret: String,
    isa: IsaProfile,
}

fn cmd_attack(
    args: AttackArgs,
    config: Option<&Path>,
    report: Option<&Path>,
) -> Result<(), Failure> {
    let cfg = machine_config(config)?;
    let kind: PocKind = args.variant.parse()?;
    let variant = PocVariant {
        secret: args.secret.into_bytes(),
        mistrain_count: args.mistrain,
        trials_per_char: args.trials,
        isa: args.isa,
        ..PocVariant::new(kind)
    };
    let out = run_attack(&variant, &cfg, args.harden.as_ref())?;
    print!("{}", out.transcript());
    if let Some(p) = report {
        write(p, &out.to_json())?;
    }
    match args.expect {
        Some(Expect::Leak) if !out.leaked() => Err(Failure {
            code: 3,
            message: format!("expected the secret to leak, recovered {:?}", out.recovered),
        }),
        Some(Expect::NoLeak) if !out.contained() => Err(Failure {
            code: 3,
            message: format!("expected no leak, recovered {:?}", out.recovered),
        }),
        _ => Ok(()),
    }
}
