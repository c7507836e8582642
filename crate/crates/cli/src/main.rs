mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use output::Writer;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<wannier_stark::Error> for CliError {
    fn from(e: wannier_stark::Error) -> Self {
        use wannier_stark::Error as E;
        match e {
            E::InvalidInput { .. } | E::ZeroOrientation | E::UnsupportedOrientation { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

/// Wannier-Stark ladders, wave-packet spreading and Landau-Zener dynamics
/// on a tilted two-sublattice square lattice.
#[derive(Parser)]
#[command(name = "wannier-stark", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML run configuration; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<String>,
    /// Worker threads (0 = all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Parameter preset: i or ii
    #[arg(long, global = true)]
    lattice: Option<String>,
    #[arg(long, global = true)]
    j1: Option<f64>,
    #[arg(long, global = true)]
    j2: Option<f64>,
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Field magnitude
    #[arg(long = "F", global = true, allow_hyphen_values = true)]
    f: Option<f64>,
    /// Rational orientation "r,q" along r*a1 + q*a2
    #[arg(long, global = true, allow_hyphen_values = true)]
    orient: Option<String>,
    /// Field angle from the x axis, radians
    #[arg(long, global = true, allow_hyphen_values = true)]
    theta: Option<f64>,
    /// Ratio Fx/Fy
    #[arg(long, global = true, allow_hyphen_values = true)]
    beta: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Bloch bands on a grid over the Brillouin zone
    Bloch {
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Wannier-Stark bands over the quasi-momentum window
    WsBands {
        /// chain or monodromy
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        kappa_points: Option<usize>,
        #[arg(long)]
        full_window: bool,
    },
    /// Energy fan versus field at fixed quasi-momentum
    WsFan {
        #[arg(long)]
        kappa_frac: Option<f64>,
        /// lo:hi:step
        #[arg(long = "F-range")]
        f_range: Option<String>,
        #[arg(long)]
        window: Option<f64>,
    },
    /// Spreading rate A versus inverse field
    RateScan {
        /// lo:hi:step or lo:hi
        #[arg(long = "invF-range")]
        inv_f_range: Option<String>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        method: Option<String>,
    },
    /// Strong-field exponent, Bessel-series bands, adiabatic and limiting spectra
    Asymptotics {
        /// Comma-separated subset of nu,bm,adiabatic,limiting
        #[arg(long, value_delimiter = ',')]
        parts: Option<Vec<String>>,
    },
    /// Real-space wave-packet propagation and moments
    Wavepacket {
        #[arg(long)]
        size: Option<usize>,
        /// square or strip
        #[arg(long)]
        domain: Option<String>,
        /// In units of 2 pi
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        /// site or gaussian
        #[arg(long)]
        initial: Option<String>,
        #[arg(long)]
        snapshot: bool,
    },
    /// Packet width versus field angle at several times
    FractalScan {
        #[arg(long)]
        theta_points: Option<usize>,
        #[arg(long)]
        size: Option<usize>,
    },
    /// Upper-band population over the Brillouin zone
    LzMap {
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Time-averaged upper-band population versus field
    LzMean {
        #[arg(long = "F-range")]
        f_range: Option<String>,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Band population traces for Bose or Fermi initial states
    LzTrace {
        /// bose or fermi
        #[arg(long)]
        initial: Option<String>,
        /// Total time in tunneling periods
        #[arg(long)]
        t_total: Option<f64>,
        #[arg(long)]
        grid: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Bloch { .. } => "bloch",
            Command::WsBands { .. } => "ws-bands",
            Command::WsFan { .. } => "ws-fan",
            Command::RateScan { .. } => "rate-scan",
            Command::Asymptotics { .. } => "asymptotics",
            Command::Wavepacket { .. } => "wavepacket",
            Command::FractalScan { .. } => "fractal-scan",
            Command::LzMap { .. } => "lz-map",
            Command::LzMean { .. } => "lz-mean",
            Command::LzTrace { .. } => "lz-trace",
        }
    }

    fn apply(&self, c: &mut RunConfig) {
        fn set<T: Clone>(dst: &mut T, v: &Option<T>) {
            if let Some(v) = v {
                *dst = v.clone();
            }
        }
        match self {
            Command::Bloch { grid } => set(&mut c.bloch.grid, grid),
            Command::WsBands { method, kappa_points, full_window } => {
                set(&mut c.ws.method, method);
                set(&mut c.ws.kappa_points, kappa_points);
                c.ws.full_window |= *full_window;
            }
            Command::WsFan { kappa_frac, f_range, window } => {
                set(&mut c.fan.kappa_frac, kappa_frac);
                set(&mut c.fan.f_range, f_range);
                set(&mut c.fan.window, window);
            }
            Command::RateScan { inv_f_range, points, method } => {
                set(&mut c.rate.inv_f_range, inv_f_range);
                set(&mut c.rate.points, points);
                set(&mut c.rate.method, method);
            }
            Command::Asymptotics { parts } => set(&mut c.asymptotics.parts, parts),
            Command::Wavepacket { size, domain, t_max, samples, initial, snapshot } => {
                let w = &mut c.wavepacket;
                set(&mut w.size, size);
                set(&mut w.domain, domain);
                set(&mut w.t_max, t_max);
                set(&mut w.samples, samples);
                set(&mut w.initial, initial);
                w.snapshot |= *snapshot;
            }
            Command::FractalScan { theta_points, size } => {
                set(&mut c.fractal.theta_points, theta_points);
                set(&mut c.fractal.size, size);
            }
            Command::LzMap { grid } => set(&mut c.lz.map_grid, grid),
            Command::LzMean { f_range, grid } => {
                set(&mut c.lz.f_range, f_range);
                set(&mut c.lz.mean_grid, grid);
            }
            Command::LzTrace { initial, t_total, grid } => {
                set(&mut c.lz.initial, initial);
                set(&mut c.lz.t_total, t_total);
                set(&mut c.lz.trace_grid, grid);
            }
        }
    }

    fn run(&self, c: &RunConfig) -> Result<commands::Output, CliError> {
        match self {
            Command::Bloch { .. } => commands::bloch(c),
            Command::WsBands { .. } => commands::ws_bands(c),
            Command::WsFan { .. } => commands::ws_fan_cmd(c),
            Command::RateScan { .. } => commands::rate_scan(c),
            Command::Asymptotics { .. } => commands::asymptotics(c),
            Command::Wavepacket { .. } => commands::wavepacket(c),
            Command::FractalScan { .. } => commands::fractal_scan(c),
            Command::LzMap { .. } => commands::lz_map(c),
            Command::LzMean { .. } => commands::lz_mean(c),
            Command::LzTrace { .. } => commands::lz_trace(c),
        }
    }
}

fn load(g: &Global) -> Result<RunConfig, CliError> {
    let mut c = match &g.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(o) = &g.out {
        c.output = o.clone();
    }
    if let Some(w) = g.workers {
        c.workers = w;
    }
    if let Some(p) = &g.lattice {
        c.lattice.preset = Some(p.clone());
        c.lattice.j1 = None;
        c.lattice.j2 = None;
        c.lattice.delta = None;
    }
    c.lattice.j1 = g.j1.or(c.lattice.j1);
    c.lattice.j2 = g.j2.or(c.lattice.j2);
    c.lattice.delta = g.delta.or(c.lattice.delta);
    if let Some(f) = g.f {
        c.field.f = f;
    }
    let fld = &mut c.field;
    if g.orient.is_some() || g.theta.is_some() || g.beta.is_some() {
        fld.orient = g.orient.clone();
        fld.theta = g.theta;
        fld.beta = g.beta;
    }
    Ok(c)
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = load(&cli.global)?;
    cli.command.apply(&mut cfg);
    cfg.resolve()?;
    if cfg.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build_global()
            .map_err(|e| CliError::Config(format!("workers: {e}")))?;
    }
    let name = cli.command.name();
    let hash = cfg.hash(name);
    let start = Instant::now();
    let (tables, results) = cli.command.run(&cfg)?;
    let mut w = Writer::new(std::path::Path::new(&cfg.output), name, &hash)?;
    for t in &tables {
        w.table(t)?;
    }
    w.finish(&cfg, &results, start.elapsed().as_secs_f64())?;
    eprintln!("{name}: wrote {} table(s) to {}", tables.len(), cfg.output);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wannier-stark: {e}");
            ExitCode::from(e.code())
        }
    }
}
