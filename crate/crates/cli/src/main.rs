//! `authlab`: issue cards, run the login server, log in, change passwords and
//! run the arbitrary-password attack.
//!
//! stdout carries only JSON; diagnostics go to stderr.

mod files;

use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{mpsc, Arc};

use authlab_core::attack::{self, AttackParams, AttackReport, AttackTrial, Scenario};
use authlab_core::wire::{self, AuditLog, ServeOptions};
use authlab_core::{
    issue_card, Clock, FixedClock, HashId, Password, Server, SystemClock, Timestamp,
};
use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::files::{load_card, load_config, save_card, save_config, FileError, ServerConfig};

pub const FAKE_TIME_VAR: &str = "AUTHLAB_FAKE_TIME";

mod exit {
    pub const OK: u8 = 0;
    pub const REJECTED: u8 = 1;
    pub const BAD_INPUT: u8 = 2;
    pub const UNWRITABLE: u8 = 3;
    pub const BIND_FAILED: u8 = 4;
    pub const CONNECTION_FAILED: u8 = 5;
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<FileError> for Failure {
    fn from(e: FileError) -> Self {
        let code = match e {
            FileError::Write { .. } => exit::UNWRITABLE,
            FileError::Read { .. } | FileError::Invalid { .. } => exit::BAD_INPUT,
        };
        Failure::new(code, e.to_string())
    }
}

type CmdResult = Result<u8, Failure>;

#[derive(Parser, Debug)]
#[command(name = "authlab", version, about = "Dynamic ID smartcard login lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate fresh server secrets into a config file.
    InitConfig {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "127.0.0.1:7878")]
        bind: String,
    },
    /// Register a password and write the personalized card.
    Register {
        /// Password; prompted on stdin when omitted. The flag form ends up in
        /// shell history, so keep it to tests.
        #[arg(long)]
        password: Option<String>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the login server until interrupted.
    Serve {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's bind address.
        #[arg(long)]
        bind: Option<String>,
        /// Append audit lines to this file instead of stderr.
        #[arg(long)]
        audit_log: Option<PathBuf>,
    },
    /// Log in to a running server with a card.
    Login {
        #[arg(long)]
        card: PathBuf,
        #[arg(long)]
        password: Option<String>,
        #[arg(long)]
        server: String,
    },
    /// Rewrite a card for a new password. The old password is not checked.
    ChangePassword {
        #[arg(long)]
        card: PathBuf,
        #[arg(long)]
        old_password: Option<String>,
        #[arg(long)]
        new_password: Option<String>,
    },
    /// Log in repeatedly with random passwords and report the acceptance rate.
    Attack {
        #[arg(long)]
        card: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = ScenarioArg::RandomPassword)]
        scenario: ScenarioArg,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u32).range(1..))]
        trials: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Submit every trial over TCP instead of verifying in-process.
        #[arg(long, requires = "server")]
        remote: bool,
        #[arg(long)]
        server: Option<String>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScenarioArg {
    RandomPassword,
    ClonedCard,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::RandomPassword => Scenario::RandomPassword,
            ScenarioArg::ClonedCard => Scenario::ClonedCard,
        }
    }
}

fn clock_from_env() -> Result<Arc<dyn Clock>, Failure> {
    match std::env::var(FAKE_TIME_VAR) {
        Ok(v) => {
            let secs: u64 = v.trim().parse().map_err(|_| {
                Failure::new(
                    exit::BAD_INPUT,
                    format!("{FAKE_TIME_VAR}={v:?} is not a u64"),
                )
            })?;
            Ok(Arc::new(FixedClock::new(Timestamp::from_secs(secs))))
        }
        Err(_) => Ok(Arc::new(SystemClock)),
    }
}

fn password_arg(flag: Option<String>, prompt: &str) -> Result<Password, Failure> {
    if let Some(p) = flag {
        return Ok(Password::from(p.as_str()));
    }
    eprint!("{prompt}: ");
    let _ = io::stderr().flush();
    let mut line = String::new();
    io::stdin()
        .lock()
        .read_line(&mut line)
        .map_err(|e| Failure::new(exit::BAD_INPUT, format!("reading password: {e}")))?;
    let trimmed = line.strip_suffix('\n').unwrap_or(&line);
    let trimmed = trimmed.strip_suffix('\r').unwrap_or(trimmed);
    Ok(Password::from(trimmed))
}

fn print_json<T: Serialize>(value: &T) {
    let mut out = io::stdout().lock();
    let _ = serde_json::to_writer(&mut out, value);
    let _ = writeln!(out);
    let _ = out.flush();
}

#[derive(Serialize)]
struct PathOut<'a> {
    card_path: &'a Path,
}

fn cmd_init_config(out: &Path, bind: String) -> CmdResult {
    let secrets = authlab_core::ServerSecrets::random(&mut rand::rng());
    save_config(out, &ServerConfig::new(&secrets, bind))?;
    print_json(&serde_json::json!({ "config_path": out }));
    Ok(exit::OK)
}

fn cmd_register(password: Option<String>, config: &Path, out: &Path) -> CmdResult {
    let cfg = load_config(config)?;
    let pw = password_arg(password, "password")?;
    let card = issue_card(&pw, &cfg.secrets, HashId::Sha256);
    save_card(out, &card)?;
    print_json(&PathOut { card_path: out });
    Ok(exit::OK)
}

fn cmd_serve(config: &Path, bind: Option<String>, audit_log: Option<PathBuf>) -> CmdResult {
    let cfg = load_config(config)?;
    let clock = clock_from_env()?;
    let audit = match audit_log {
        Some(p) => AuditLog::append_to(&p).map_err(|e| {
            Failure::new(
                exit::UNWRITABLE,
                format!("cannot open {}: {e}", p.display()),
            )
        })?,
        None => AuditLog::stderr(),
    };
    let addr = bind.unwrap_or(cfg.bind_address);
    let options = ServeOptions {
        policy: cfg.policy,
        audit,
        ..ServeOptions::default()
    };

    let (tx, rx) = mpsc::channel();
    ctrlc::set_handler(move || {
        let _ = tx.send(());
    })
    .map_err(|e| {
        Failure::new(
            exit::BIND_FAILED,
            format!("cannot install signal handler: {e}"),
        )
    })?;

    let handle = wire::serve(cfg.secrets, addr.as_str(), options, clock)
        .map_err(|e| Failure::new(exit::BIND_FAILED, format!("cannot bind {addr}: {e}")))?;
    print_json(&serde_json::json!({ "listening": handle.local_addr().to_string() }));
    eprintln!("listening on {}", handle.local_addr());

    let _ = rx.recv();
    eprintln!("shutting down");
    handle.shutdown();
    Ok(exit::OK)
}

fn cmd_login(card: &Path, password: Option<String>, server: &str) -> CmdResult {
    let card = load_card(card)?;
    let pw = password_arg(password, "password")?;
    let clock = clock_from_env()?;
    let decision = wire::client_login(server, &card, &pw, &*clock)
        .map_err(|e| Failure::new(exit::CONNECTION_FAILED, format!("{}: {e}", e.code())))?;
    print_json(&decision);
    Ok(if decision.accepted() {
        exit::OK
    } else {
        exit::REJECTED
    })
}

fn cmd_change_password(card_path: &Path, old: Option<String>, new: Option<String>) -> CmdResult {
    let card = load_card(card_path)?;
    let old = password_arg(old, "old password")?;
    let new = password_arg(new, "new password")?;
    let updated = authlab_core::change_password(&card, &old, &new);
    save_card(card_path, &updated)?;
    print_json(&PathOut { card_path });
    Ok(exit::OK)
}

fn cmd_attack(
    card: &Path,
    config: &Path,
    scenario: Scenario,
    trials: u32,
    seed: u64,
    remote: Option<String>,
) -> CmdResult {
    let card = load_card(card)?;
    let cfg = load_config(config)?;
    let clock = clock_from_env()?;
    let params = AttackParams::new(trials as usize, seed);

    let report = match remote {
        None => {
            let server = Server::new(cfg.secrets, cfg.policy);
            let target = match scenario {
                Scenario::RandomPassword => card,
                Scenario::ClonedCard => attack::clone_card(&card),
            };
            attack::run_attack(&server, &target, scenario, params, &*clock)
                .map_err(|e| Failure::new(exit::BAD_INPUT, e.to_string()))?
                .report
        }
        Some(addr) => remote_attack(&addr, &card, scenario, params, &*clock)?,
    };
    print_json(&report);
    Ok(if report.all_accepted() {
        exit::OK
    } else {
        exit::REJECTED
    })
}

fn remote_attack(
    addr: &str,
    card: &authlab_core::SmartcardState,
    scenario: Scenario,
    params: AttackParams,
    clock: &dyn Clock,
) -> Result<AttackReport, Failure> {
    let target = match scenario {
        Scenario::RandomPassword => card.clone(),
        Scenario::ClonedCard => attack::clone_card(card),
    };
    let mut trials = Vec::with_capacity(params.trials);
    for (i, pw) in attack::draw_passwords(params.seed, params.trials)
        .into_iter()
        .enumerate()
    {
        let t = clock.now();
        let d = wire::client_login(addr, &target, &pw, clock).map_err(|e| {
            Failure::new(
                exit::CONNECTION_FAILED,
                format!("trial {i}: {}: {e}", e.code()),
            )
        })?;
        trials.push(AttackTrial {
            trial_index: i,
            password_used: pw,
            timestamp: t,
            accepted: d.accepted(),
            reason: d.reason,
            recovered_hpw: d.recovered_hpw,
        });
    }
    Ok(AttackReport::from_trials(scenario, params.seed, &trials))
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::InitConfig { out, bind } => cmd_init_config(&out, bind),
        Command::Register {
            password,
            config,
            out,
        } => cmd_register(password, &config, &out),
        Command::Serve {
            config,
            bind,
            audit_log,
        } => cmd_serve(&config, bind, audit_log),
        Command::Login {
            card,
            password,
            server,
        } => cmd_login(&card, password, &server),
        Command::ChangePassword {
            card,
            old_password,
            new_password,
        } => cmd_change_password(&card, old_password, new_password),
        Command::Attack {
            card,
            config,
            scenario,
            trials,
            seed,
            remote,
            server,
        } => cmd_attack(
            &card,
            &config,
            scenario.into(),
            trials,
            seed,
            server.filter(|_| remote),
        ),
    }
}

/// Prints clap's error followed by the usage line of the subcommand involved.
fn usage_error(e: clap::Error) -> ExitCode {
    let _ = e.print();
    if !e.use_stderr() {
        return ExitCode::SUCCESS;
    }
    let mut cmd = Cli::command();
    cmd.build();
    let usage = std::env::args()
        .nth(1)
        .and_then(|name| cmd.find_subcommand_mut(&name).map(|sub| sub.render_usage()))
        .unwrap_or_else(|| cmd.render_usage());
    eprintln!("\n{usage}");
    ExitCode::from(exit::BAD_INPUT)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => return usage_error(e),
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("authlab: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
