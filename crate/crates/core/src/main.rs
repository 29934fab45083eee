use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use goddard_id::cli_io::{fmt_f64, load_reference, parse_runspec, run, RunConfig, RunError, RunSpec};
use goddard_id::steppers::{convergence_study, ConvergenceSetup, Method};

#[derive(Parser)]
#[command(
    name = "goddard-id",
    version,
    about = "Goddard rocket ascent via a discretized influence diagram"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build, solve and fly one discretization and write its profiles.
    Run(Box<RunArgs>),
    /// Measure the order of convergence of a segment integrator.
    Convergence {
        #[arg(long)]
        method: Method,
    },
    /// Parse a run name and print its fields.
    Parse { name: String },
}

#[derive(Args)]
struct RunArgs {
    /// Run name `v.u.m.M.h`, e.g. 101.11.101.E.0.0005.
    name: Option<String>,
    #[arg(long, requires_all = ["nu", "nm", "method", "dh"], conflicts_with = "name")]
    nv: Option<usize>,
    #[arg(long)]
    nu: Option<usize>,
    #[arg(long)]
    nm: Option<usize>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    dh: Option<f64>,
    /// Reference profile CSV with columns h,u,v,m.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    s_rho0: Option<f64>,
    #[arg(long)]
    cd: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    u_min: Option<f64>,
    #[arg(long)]
    h0: Option<f64>,
    #[arg(long)]
    ht: Option<f64>,
    #[arg(long)]
    m_payload: Option<f64>,
    #[arg(long)]
    v_eps: Option<f64>,
    #[arg(long)]
    v_max: Option<f64>,
    /// Launch speed; by default the slowest grid speed with a feasible plan.
    #[arg(long)]
    v_start: Option<f64>,
}

impl RunArgs {
    fn spec(&self) -> Result<RunSpec, RunError> {
        if let Some(name) = &self.name {
            return Ok(parse_runspec(name)?);
        }
        match (self.nv, self.nu, self.nm, self.method, self.dh) {
            (Some(nv), Some(nu), Some(nm), Some(method), Some(dh)) => {
                Ok(parse_runspec(&RunSpec { nv, nu, nm, method, dh }.name())?)
            }
            _ => Err(RunError::Usage(
                "give a run name or all of --nv --nu --nm --method --dh".into(),
            )),
        }
    }

    fn config(&self) -> RunConfig {
        let mut cfg = RunConfig::default();
        let p = &mut cfg.params;
        let overrides = [
            (self.beta, &mut p.beta),
            (self.s_rho0, &mut p.s_rho0),
            (self.cd, &mut p.c_d),
            (self.c, &mut p.c),
            (self.u_min, &mut p.u_min),
            (self.h0, &mut p.h0),
            (self.ht, &mut p.h_t),
            (self.m_payload, &mut p.m_payload),
        ];
        for (value, slot) in overrides {
            if let Some(x) = value {
                *slot = x;
            }
        }
        if let Some(x) = self.v_eps {
            cfg.speed_bounds.v_eps = x;
        }
        if let Some(x) = self.v_max {
            cfg.speed_bounds.v_max = x;
        }
        cfg.v_start = self.v_start;
        cfg
    }
}

fn run_command(args: &RunArgs) -> Result<(), RunError> {
    let spec = args.spec()?;
    let cfg = args.config();
    let reference = args.reference.as_ref().map(load_reference).transpose()?;
    let (outcome, files) = run(&spec, &cfg, reference.as_ref(), &args.out)?;
    print!("{}", outcome.summary(&cfg));
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn convergence_command(method: Method) -> ExitCode {
    let p = Default::default();
    match convergence_study(method, &ConvergenceSetup::default(), &p) {
        Ok(study) => {
            println!("method,steps,dh,error");
            for r in &study.rows {
                println!("{method},{},{},{}", r.steps, fmt_f64(r.dh), fmt_f64(r.error));
            }
            println!("# observed order {:.3}", study.observed_order());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match cli.command {
        Command::Run(args) => match run_command(&args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
        Command::Convergence { method } => convergence_command(method),
        Command::Parse { name } => match parse_runspec(&name) {
            Ok(s) => {
                println!("nv={} nu={} nm={} method={} dh={}", s.nv, s.nu, s.nm, s.method, s.dh);
                println!("name={}", s.name());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
    }
}
