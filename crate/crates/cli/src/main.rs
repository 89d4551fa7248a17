use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use netplan_core::agent::{
    register_planning_tools, run_react_loop, AgentError, BackendKind, ChatBackend, HttpBackend,
    RunStatus, ScriptedBackend, ToolContext, ToolRegistry,
};
use netplan_core::pipeline::{self, Workspace, PLAN_FILE, TRANSCRIPT_FILE};
use netplan_core::synth::{write_synthetic_scenario, SynthConfig};
use netplan_core::verifier::comparison_table;
use netplan_core::{Region, Scenario};
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_INPUT: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_BACKEND: u8 = 4;
const EXIT_STEP_LIMIT: u8 = 5;

#[derive(Parser)]
#[command(
    name = "netplan",
    version,
    about = "Terrain-aware TBS/HAP deployment planning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Workspace directory for artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Region override: lat_min,lat_max,lon_min,lon_max.
    #[arg(long, value_parser = parse_region)]
    region: Option<Region>,
}

#[derive(Args, Clone)]
struct SolverFlags {
    /// Branch-and-bound wall-clock limit, seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Relative optimality gap.
    #[arg(long)]
    gap: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Extract demand nodes and candidate sites.
    Demand(Common),
    /// Compute the link matrix.
    Links(Common),
    /// Solve the site-selection problem.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Verify a plan against the physics.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Plan file; defaults to plan.json in the workspace.
        plan: Option<PathBuf>,
    },
    /// Verify several plans and rank them by efficiency.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(required = true)]
        plans: Vec<PathBuf>,
    },
    /// Run the planning agent on a natural-language task.
    Agent {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverFlags,
        task: String,
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        model: Option<String>,
        /// Scripted-backend reply file; replaces the HTTP backend.
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Write a synthetic scenario (rasters, towers, scenario.json).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Ridged terrain with four valley towns instead of flat ground.
        #[arg(long)]
        mountainous: bool,
    },
}

fn parse_region(s: &str) -> Result<Region, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let [a, b, c, d] = v[..] else {
        return Err(format!(
            "expected four comma-separated numbers, got {}",
            v.len()
        ));
    };
    Region::new(a, b, c, d).map_err(|e| e.to_string())
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn input<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure {
        code: EXIT_INPUT,
        error: e.into(),
    }
}

fn backend_failure<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure {
        code: EXIT_BACKEND,
        error: e.into(),
    }
}

fn load(common: &Common) -> Result<(Scenario, Workspace), Failure> {
    let mut scenario = Scenario::load(&common.scenario).map_err(input)?;
    if let Some(r) = common.region {
        scenario.region = r;
    }
    let ws = Workspace::create(&common.out).map_err(input)?;
    Ok((scenario, ws))
}

fn apply_solver(scenario: &mut Scenario, flags: &SolverFlags) -> Result<(), Failure> {
    if let Some(t) = flags.time_limit {
        if t.is_nan() || t < 0.0 {
            return Err(input(anyhow!("--time-limit must be non-negative")));
        }
        scenario.optimizer.time_limit_s = t;
    }
    if let Some(g) = flags.gap {
        if g.is_nan() || g < 0.0 {
            return Err(input(anyhow!("--gap must be non-negative")));
        }
        scenario.optimizer.gap = g;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Demand(common) => {
            let (scenario, ws) = load(&common)?;
            let s = pipeline::run_demand(&scenario, &ws).map_err(input)?;
            println!(
                "{} demand nodes ({} users), {} candidate sites ({} TBS, {} HAP, {} on existing towers)",
                s.demand_nodes, s.total_users, s.candidate_sites, s.tbs_sites, s.hap_sites, s.tower_sites
            );
            Ok(0)
        }
        Command::Links(common) => {
            let (scenario, ws) = load(&common)?;
            let s = pipeline::run_links(&scenario, &ws).map_err(input)?;
            println!(
                "{} links ({} feasible) for {} nodes x {} sites; {} uncoverable nodes",
                s.rows,
                s.feasible_links,
                s.nodes,
                s.sites,
                s.uncoverable_nodes.len()
            );
            Ok(0)
        }
        Command::Optimize { common, solver } => {
            let (mut scenario, ws) = load(&common)?;
            apply_solver(&mut scenario, &solver)?;
            let plan = pipeline::run_optimize(&scenario, &ws).map_err(input)?;
            let status = plan.status.map(|s| format!("{s:?}")).unwrap_or_default();
            println!(
                "{status}: {} sites, cost {} units, average claimed rate {:.3} Mbps",
                plan.opened_sites.len(),
                plan.total_cost_units,
                plan.average_claimed_rate_bps.unwrap_or(0.0) / 1e6
            );
            Ok(if pipeline::plan_succeeded(&plan) {
                0
            } else {
                EXIT_INFEASIBLE
            })
        }
        Command::Verify { common, plan } => {
            let (scenario, ws) = load(&common)?;
            let path = plan.unwrap_or_else(|| ws.path(PLAN_FILE));
            let r = pipeline::run_verify(&scenario, &ws, &path).map_err(input)?;
            println!(
                "coverage {:.3}, average verified rate {:.3} Mbps, cost {} units, {} violations",
                r.coverage_fraction,
                r.average_verified_rate_bps / 1e6,
                r.total_cost_units,
                r.violations.len()
            );
            Ok(0)
        }
        Command::Compare { common, plans } => {
            let (scenario, ws) = load(&common)?;
            let rows = pipeline::run_compare(&scenario, &ws, &plans).map_err(input)?;
            print!("{}", comparison_table(&rows));
            Ok(0)
        }
        Command::Agent {
            common,
            solver,
            task,
            endpoint,
            model,
            script,
            max_steps,
        } => {
            let (mut scenario, ws) = load(&common)?;
            apply_solver(&mut scenario, &solver)?;
            let mut cfg = scenario.agent.clone();
            if let Some(m) = max_steps {
                if m == 0 {
                    return Err(input(anyhow!("--max-steps must be at least 1")));
                }
                cfg.max_steps = m;
            }
            if let Some(m) = model {
                cfg.model_name = m;
            }
            if let Some(e) = endpoint {
                cfg.endpoint_url = Some(e);
                cfg.backend = BackendKind::HttpEndpoint;
            }
            let mut backend: Box<dyn ChatBackend> = match (&script, cfg.backend) {
                (Some(p), _) => Box::new(ScriptedBackend::from_file(p).map_err(input)?),
                (None, BackendKind::Scripted) => {
                    return Err(input(anyhow!(
                        "scripted backend selected but no --script given"
                    )))
                }
                (None, BackendKind::HttpEndpoint) => {
                    Box::new(HttpBackend::new(&cfg).map_err(|e| match e {
                        AgentError::MissingEndpoint => input(e),
                        e => backend_failure(e),
                    })?)
                }
            };
            let mut registry = ToolRegistry::new();
            register_planning_tools(&mut registry).map_err(|e| input(anyhow!(e)))?;
            let transcript_path = ws.path(TRANSCRIPT_FILE);
            let mut ctx = ToolContext {
                scenario,
                workspace: ws,
            };
            let run = run_react_loop(&task, &cfg, backend.as_mut(), &registry, &mut ctx).map_err(
                |f| {
                    backend_failure(anyhow!(f.error).context(format!(
                        "agent aborted after {} steps; transcript kept at {}",
                        f.transcript.len(),
                        transcript_path.display()
                    )))
                },
            )?;
            println!("{}", run.final_answer);
            Ok(match run.status {
                RunStatus::StepLimit => EXIT_STEP_LIMIT,
                RunStatus::Completed if run.plan.as_ref().is_some_and(pipeline::plan_succeeded) => {
                    0
                }
                RunStatus::Completed => EXIT_INFEASIBLE,
            })
        }
        Command::Synth {
            out,
            seed,
            mountainous,
        } => {
            let cfg = if mountainous {
                SynthConfig::mountainous()
            } else {
                SynthConfig::flat(seed)
            };
            let s = write_synthetic_scenario(&out, &cfg)
                .with_context(|| format!("writing synthetic scenario to {}", out.display()))
                .map_err(input)?;
            println!("{}", s.scenario_path.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
