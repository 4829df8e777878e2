//! `ringmod`: conformal and affine moduli of ring domains and harmonic maps
//! between them, from the command line.
//!
//! Exit status: 0 success, 2 invalid input, 3 numerical failure (including a
//! map that fails verification), 4 a hypothesis of the requested construction
//! does not hold.

mod commands;
mod figure;
mod run;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use run::{CliResult, Failure, Manifest, Run};

#[derive(Parser, Debug)]
#[command(name = "ringmod", version, about = "Moduli of doubly connected domains and harmonic maps between them", args_override_self = true)]
pub struct Cli {
    /// Directory receiving the JSON result, the manifest and optional CSV/SVG files.
    #[arg(long, global = true, default_value = "ringmod-out")]
    pub out: PathBuf,
    /// Also write CSV tables.
    #[arg(long, global = true)]
    pub csv: bool,
    /// Also write SVG figures.
    #[arg(long, global = true)]
    pub svg: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Conformal modulus of a domain file: closed form for canonical rings,
    /// condenser solve otherwise.
    Modulus {
        #[arg(long)]
        domain: PathBuf,
        /// Use the condenser even when the domain is a tagged canonical ring.
        #[arg(long)]
        numeric: bool,
        #[command(flatten)]
        condenser: CondenserArgs,
    },
    /// Affine modulus: the supremum of the modulus over all affine images.
    AffineModulus {
        #[arg(long)]
        domain: PathBuf,
        #[command(flatten)]
        search: AffineArgs,
        #[command(flatten)]
        condenser: CondenserArgs,
    },
    /// Closed-form modulus of a canonical ring.
    Canonical(CanonicalArgs),
    /// Affine-invariance class and attainability check of a domain.
    Classify {
        #[arg(long)]
        domain: PathBuf,
    },
    /// Build an explicit harmonic map and verify it.
    #[command(subcommand)]
    Construct(Construct),
    /// Verify a map descriptor between two domains.
    Verify {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[command(flatten)]
        options: VerifyArgs,
    },
    /// Test whether the affine-modulus bound rules out a harmonic homeomorphism.
    Obstruction(ObstructionArgs),
    /// Parameter grids written as CSV.
    #[command(subcommand)]
    Sweep(Sweep),
    /// Repeat the run recorded in a manifest.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
    },
}

#[derive(Args, Debug, Clone, Default)]
pub struct CondenserArgs {
    /// Angular cells on the finest grid.
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Grids used for extrapolation, each half as fine as the next.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Clip radius for ray components, in units of the domain extent.
    #[arg(long)]
    pub clip_factor: Option<f64>,
    /// Relative residual at which conjugate gradients stops.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct AffineArgs {
    #[arg(long, default_value_t = 36)]
    pub theta_samples: usize,
    #[arg(long, default_value_t = 24)]
    pub alpha_samples: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub alpha_floor: f64,
    #[arg(long, default_value_t = 200)]
    pub refine_iters: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub refine_tolerance: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum RingName {
    Annulus,
    Grotzsch,
    Teichmuller,
    DoubleTeichmuller,
    DoubleTeichmullerUnit,
}

#[derive(Args, Debug, Clone)]
pub struct CanonicalArgs {
    #[arg(long, value_enum)]
    pub ring: RingName,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long = "R")]
    pub big_r: Option<f64>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    /// Also write the realised domain as `domain.json`.
    #[arg(long)]
    pub emit_domain: bool,
}

#[derive(Subcommand, Debug)]
pub enum Construct {
    /// Radial harmonic map between round annuli.
    Nitsche {
        #[arg(long)]
        r: f64,
        #[arg(long = "R")]
        big_r: f64,
        #[arg(long)]
        rstar: f64,
        #[arg(long = "Rstar")]
        big_rstar: f64,
        #[command(flatten)]
        verify: VerifyArgs,
    },
    /// `Re(z^α) + i Im z` between double Teichmüller rings on the unit interval.
    PowerShear {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        alpha: f64,
        #[command(flatten)]
        verify: VerifyArgs,
    },
    /// Harmonic extension of a conformal map of `A(1,R)` to a slightly larger annulus.
    AnnulusDirichlet {
        #[arg(long = "R", default_value_t = 2.0)]
        big_r: f64,
        #[arg(long, value_enum, default_value_t = ConformalName::Identity)]
        kind: ConformalName,
        /// Möbius parameter, real with `|a| R < 1`.
        #[arg(long, default_value_t = 0.0)]
        a: f64,
        /// Joukowski parameter `c = cx + i cy`, `|c| < 1`.
        #[arg(long, default_value_t = 0.0)]
        cx: f64,
        #[arg(long, default_value_t = 0.0)]
        cy: f64,
        /// Defaults to half the largest ε with a positive Jacobian margin.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Resolution of the ε search.
        #[arg(long, default_value_t = 1e-3)]
        search_tolerance: f64,
        #[arg(long, default_value_t = 64)]
        truncation: usize,
        #[arg(long, default_value_t = 512)]
        samples: usize,
        /// Vertices per boundary curve of the target domain.
        #[arg(long, default_value_t = 4096)]
        target_vertices: usize,
        #[command(flatten)]
        verify: VerifyArgs,
    },
    /// Schwarz–Christoffel shear map onto a double Teichmüller ring.
    ScShear {
        #[arg(long)]
        s_prime: f64,
        #[arg(long)]
        t_prime: f64,
        /// Modulus of the source ring; must lie below that of the target.
        #[arg(long)]
        target_modulus: f64,
        /// Step of the seam harmonicity check.
        #[arg(long, default_value_t = 1e-2)]
        seam_delta: f64,
        #[command(flatten)]
        verify: VerifyArgs,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ConformalName {
    Identity,
    Mobius,
    Joukowski,
}

#[derive(Args, Debug, Clone, Default)]
pub struct VerifyArgs {
    #[arg(long)]
    pub radii: Option<usize>,
    #[arg(long)]
    pub angles: Option<usize>,
    #[arg(long)]
    pub cartesian: Option<usize>,
    #[arg(long)]
    pub clip: Option<f64>,
    #[arg(long)]
    pub stencil: Option<f64>,
    #[arg(long)]
    pub boundary_samples: Option<usize>,
    #[arg(long)]
    pub distance_tolerance: Option<f64>,
    #[arg(long)]
    pub residual_tolerance: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct ObstructionArgs {
    /// `Mod Ω`; alternatively pass `--source`.
    #[arg(long, conflicts_with = "source", required_unless_present = "source")]
    pub mod_omega: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub omega_error: f64,
    /// `Mod_aff Ω*`; alternatively pass `--target`.
    #[arg(long, conflicts_with = "target", required_unless_present = "target")]
    pub mod_aff_target: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub target_error: f64,
    #[arg(long)]
    pub source: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Compute `Mod_aff Ω*` by the shear search instead of using the plain
    /// modulus, which is only a lower bound.
    #[arg(long)]
    pub affine: bool,
    #[command(flatten)]
    pub condenser: CondenserArgs,
}

#[derive(Subcommand, Debug)]
pub enum Sweep {
    /// Closed-form modulus along one parameter; the others come from `--fixed`.
    Canonical {
        #[arg(long, value_enum)]
        ring: RingName,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        /// Space the samples geometrically.
        #[arg(long)]
        log: bool,
        /// Values of the remaining parameters, in ring order.
        #[arg(long, num_args = 0.., value_delimiter = ',', allow_negative_numbers = true)]
        fixed: Vec<f64>,
    },
    /// Modulus of shear images over a θ × α grid.
    Shear {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long, default_value_t = 12)]
        theta_samples: usize,
        #[arg(long, default_value_t = 12)]
        alpha_samples: usize,
        #[arg(long, default_value_t = 1e-3)]
        alpha_floor: f64,
        #[command(flatten)]
        condenser: CondenserArgs,
    },
    /// Schwarz–Christoffel preimages and modulus against the height `b`.
    ScB {
        #[arg(long)]
        s_prime: f64,
        #[arg(long)]
        t_prime: f64,
        #[arg(long, default_value_t = 1e-3)]
        b_min: f64,
        #[arg(long, default_value_t = 1e2)]
        b_max: f64,
        #[arg(long, default_value_t = 41)]
        steps: usize,
    },
    /// Radial map existence over a grid of annulus ratios in `(1, max]²`.
    Nitsche {
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[arg(long, default_value_t = 5.0)]
        max: f64,
    },
    /// `h_ε` diagnostics against ε for a built-in conformal map.
    Epsilon {
        #[arg(long = "R", default_value_t = 2.0)]
        big_r: f64,
        #[arg(long, value_enum, default_value_t = ConformalName::Identity)]
        kind: ConformalName,
        #[arg(long, default_value_t = 0.0)]
        a: f64,
        #[arg(long, default_value_t = 0.0)]
        cx: f64,
        #[arg(long, default_value_t = 0.0)]
        cy: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05,0.025")]
        epsilons: Vec<f64>,
    },
}

impl Command {
    fn name(&self) -> String {
        match self {
            Command::Modulus { .. } => "modulus".into(),
            Command::AffineModulus { .. } => "affine-modulus".into(),
            Command::Canonical(_) => "canonical".into(),
            Command::Classify { .. } => "classify".into(),
            Command::Construct(c) => format!(
                "construct {}",
                match c {
                    Construct::Nitsche { .. } => "nitsche",
                    Construct::PowerShear { .. } => "power-shear",
                    Construct::AnnulusDirichlet { .. } => "annulus-dirichlet",
                    Construct::ScShear { .. } => "sc-shear",
                }
            ),
            Command::Verify { .. } => "verify".into(),
            Command::Obstruction(_) => "obstruction".into(),
            Command::Sweep(s) => format!(
                "sweep {}",
                match s {
                    Sweep::Canonical { .. } => "canonical",
                    Sweep::Shear { .. } => "shear",
                    Sweep::ScB { .. } => "sc-b",
                    Sweep::Nitsche { .. } => "nitsche",
                    Sweep::Epsilon { .. } => "epsilon",
                }
            ),
            Command::Rerun { .. } => "rerun".into(),
        }
    }
}

fn configure_threads() -> CliResult<usize> {
    if let Ok(v) = std::env::var("RINGMOD_THREADS") {
        let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| Failure::invalid(format!("RINGMOD_THREADS must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::invalid(e.to_string()))?;
    }
    Ok(rayon::current_num_threads())
}

/// Parses and executes one invocation. `args` excludes the program name.
fn execute(args: Vec<String>, cwd: PathBuf) -> CliResult<()> {
    let cli = Cli::try_parse_from(std::iter::once("ringmod".to_string()).chain(args.iter().cloned())).map_err(|e| {
        // Help and version requests are not failures.
        if !e.use_stderr() {
            print!("{e}");
            std::process::exit(0);
        }
        Failure::invalid(e.to_string())
    })?;
    if let Command::Rerun { manifest } = &cli.command {
        return rerun(manifest, &cli);
    }
    let threads = configure_threads()?;
    let start = Instant::now();
    let mut run = Run::new(&cli.out, cli.csv, cli.svg)?;
    let outcome = commands::dispatch(&cli.command, &mut run);
    let (exit_code, error) = match &outcome {
        Ok(()) => (0, None),
        Err(f) => (f.code, Some(f.message.clone())),
    };
    run.finish(Manifest {
        tool: "ringmod".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        library_version: ringmod::VERSION.into(),
        args,
        cwd,
        command: cli.command.name(),
        inputs: Default::default(),
        options: Default::default(),
        artifacts: Vec::new(),
        threads,
        exit_code,
        error,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    })?;
    outcome
}

/// Replays the recorded arguments from the recorded working directory. An
/// explicit `--out` on the rerun line redirects the artifacts.
fn rerun(path: &Path, cli: &Cli) -> CliResult<()> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::invalid(format!("cannot read {}: {e}", path.display())))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    let mut args = manifest.args;
    if args.first().map(String::as_str) == Some("rerun") {
        return Err(Failure::invalid("manifest records a rerun"));
    }
    let explicit_out = std::env::args().skip(1).any(|a| a == "--out" || a.starts_with("--out="));
    if explicit_out {
        let out = std::path::absolute(&cli.out).map_err(|e| Failure::invalid(e.to_string()))?;
        args.push("--out".into());
        args.push(out.to_string_lossy().into_owned());
    }
    std::env::set_current_dir(&manifest.cwd).map_err(|e| Failure::invalid(format!("cannot enter {}: {e}", manifest.cwd.display())))?;
    execute(args, manifest.cwd)
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cwd = std::env::current_dir().unwrap_or_else(|_| PathBuf::from("."));
    if let Err(f) = execute(args, cwd) {
        eprintln!("error: {f}");
        std::process::exit(f.code);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn manifest_name_covers_subcommands() {
        let cli = Cli::try_parse_from(["ringmod", "construct", "nitsche", "--r", "1", "--R", "2", "--rstar", "1", "--Rstar", "3"]).unwrap();
        assert_eq!(cli.command.name(), "construct nitsche");
    }

    #[test]
    fn repeated_out_takes_the_last_value() {
        let cli = Cli::try_parse_from(["ringmod", "--out", "a", "classify", "--domain", "d.json", "--out", "b"]).unwrap();
        assert_eq!(cli.out, PathBuf::from("b"));
    }
}
