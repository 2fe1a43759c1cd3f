use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use resh_lang::{compile, SourceProgram, TypedProgram};
use resh_path::WorldMap;
use resh_protocol::TaskState;
use resh_runtime::{default_pool, parse_inject, InjectScript, Runtime, RuntimeConfig, Server};
use resh_sim::{load_pool, ClockMode, MockRobotConfig};

#[derive(Parser)]
#[command(name = "resh", version, about = "Resh robot-orchestration runtime")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct RunOpts {
    /// Inject script of `AT <ms> <mutation>` lines.
    #[arg(long)]
    inject: Option<PathBuf>,
    /// realtime, stepped or accelerated:<factor>.
    #[arg(long, default_value = "stepped", value_parser = parse_clock)]
    clock: ClockMode,
    /// Also write the trace to this file.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Give up after this much simulated time.
    #[arg(long, default_value_t = 600_000)]
    max_ms: u64,
    /// Simulated milliseconds per step.
    #[arg(long, default_value_t = 100)]
    step_ms: u64,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and type-check a program.
    Check { file: PathBuf },
    /// Run a program to a terminal state and print its trace.
    Run {
        file: PathBuf,
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        pool: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Run a program and print only its timing diagram.
    Trace {
        file: PathBuf,
        #[arg(long)]
        world: Option<PathBuf>,
        /// Pool file; without one, mock robots advertising every declared
        /// action are used.
        #[arg(long)]
        pool: Option<PathBuf>,
        /// Number of mock robots when no pool file is given.
        #[arg(long, default_value_t = 3)]
        robots: usize,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Serve the protocol socket and control endpoint.
    Serve {
        #[arg(long)]
        listen: String,
        #[arg(long)]
        world: Option<PathBuf>,
        #[arg(long)]
        pool: Option<PathBuf>,
        #[arg(long, default_value = "realtime", value_parser = parse_clock)]
        clock: ClockMode,
        #[arg(long, default_value_t = 100)]
        step_ms: u64,
    },
}

fn parse_clock(s: &str) -> Result<ClockMode, String> {
    ClockMode::parse(s).ok_or_else(|| format!("expected realtime, stepped or accelerated:<factor>, got {s:?}"))
}

type Failure = String;

fn compile_file(file: &Path) -> Result<TypedProgram, Failure> {
    let text = fs::read_to_string(file).map_err(|e| format!("{}: {e}", file.display()))?;
    compile(&SourceProgram::new(text, file.display().to_string()))
        .map_err(|e| format!("{}: error: {e}", file.display()))
}

fn load_map(path: Option<&Path>) -> Result<Option<WorldMap>, Failure> {
    path.map(|p| WorldMap::load(p).map_err(|e| format!("{}: {e}", p.display())))
        .transpose()
}

fn load_robots(path: &Path) -> Result<Vec<MockRobotConfig>, Failure> {
    load_pool(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_script(path: Option<&Path>) -> Result<InjectScript, Failure> {
    let Some(p) = path else {
        return Ok(InjectScript::default());
    };
    let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
    parse_inject(&text).map_err(|e| format!("{}: {e}", p.display()))
}

fn program_id(file: &Path) -> String {
    file.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "main".into())
}

/// Runs to completion; returns the runtime and whether every task
/// succeeded.
fn execute(
    file: &Path,
    program: TypedProgram,
    map: Option<WorldMap>,
    pool: Vec<MockRobotConfig>,
    opts: &RunOpts,
) -> Result<(Runtime, bool), Failure> {
    let script = load_script(opts.inject.as_deref())?;
    let cfg = RuntimeConfig {
        step_ms: opts.step_ms.max(1),
        ..RuntimeConfig::default()
    };
    let mut rt = Runtime::new(map, pool, opts.clock, cfg).map_err(|e| e.to_string())?;
    rt.submit_program(Some(&program_id(file)), program)
        .map_err(|e| e.to_string())?;
    let summary = rt.run(&script, opts.max_ms);
    for t in rt.tasks() {
        match (&t.state, &t.detail) {
            (_, Some(d)) => eprintln!("task {} {}: {d}", t.program_id, t.state.as_str()),
            _ => eprintln!("task {} {}", t.program_id, t.state.as_str()),
        }
        if t.state == TaskState::Queued || t.state == TaskState::Running {
            eprintln!("resh: gave up after {} ms of simulated time", summary.sim_ms);
        }
    }
    Ok((rt, summary.succeeded))
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), Failure> {
    print!("{text}");
    if let Some(p) = output {
        fs::write(p, text).map_err(|e| format!("{}: {e}", p.display()))?;
    }
    Ok(())
}

fn main_inner(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Cmd::Check { file } => {
            compile_file(&file)?;
            Ok(true)
        }
        Cmd::Run {
            file,
            world,
            pool,
            opts,
        } => {
            let program = compile_file(&file)?;
            let map = load_map(Some(&world))?;
            let robots = load_robots(&pool)?;
            let (rt, ok) = execute(&file, program, map, robots, &opts)?;
            emit(&rt.trace_text(), opts.output.as_deref())?;
            Ok(ok)
        }
        Cmd::Trace {
            file,
            world,
            pool,
            robots,
            opts,
        } => {
            let program = compile_file(&file)?;
            let map = load_map(world.as_deref())?;
            let robots = match &pool {
                Some(p) => load_robots(p)?,
                None => default_pool(&program, robots),
            };
            let (rt, ok) = execute(&file, program, map, robots, &opts)?;
            emit(&rt.letters_text(), opts.output.as_deref())?;
            Ok(ok)
        }
        Cmd::Serve {
            listen,
            world,
            pool,
            clock,
            step_ms,
        } => {
            let map = load_map(world.as_deref())?;
            let robots = match &pool {
                Some(p) => load_robots(p)?,
                None => Vec::new(),
            };
            let cfg = RuntimeConfig {
                step_ms: step_ms.max(1),
                ..RuntimeConfig::default()
            };
            let rt = Runtime::new(map, robots, clock, cfg).map_err(|e| e.to_string())?;
            let server = Server::bind(&listen, rt).map_err(|e| format!("{listen}: {e}"))?;
            let addr = server.local_addr().map_err(|e| e.to_string())?;
            eprintln!("resh: listening on {addr}");
            server.run().map_err(|e| e.to_string())?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
