mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use levelcurve::{ErrorClass, Tolerances};

#[derive(Parser, Debug)]
#[command(name = "levelcurve", version, about = "Level curves of polynomials, rational functions and Blaschke ratios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Function spec: poly:c_n,...,c_0 | rat:<poly>/<poly> | blaschke:z1,.../w1,...
    #[arg(long = "fn", value_name = "SPEC")]
    pub function: Option<String>,
    /// plane | disk | rect:x0,y0,x1,y1 (default: disk for blaschke, plane otherwise)
    #[arg(long)]
    pub domain: Option<String>,
    /// Write JSON here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write an SVG picture
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Worker threads
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "tol-trace")]
    pub tol_trace: Option<f64>,
    #[arg(long = "tol-vertex")]
    pub tol_vertex: Option<f64>,
    #[arg(long = "tol-phi")]
    pub tol_phi: Option<f64>,
    #[arg(long = "tol-hull")]
    pub tol_hull: Option<f64>,
}

impl Common {
    pub fn tolerances(&self) -> levelcurve::Result<Tolerances> {
        let mut t = Tolerances::default();
        for (slot, v) in [
            (&mut t.trace, self.tol_trace),
            (&mut t.vertex, self.tol_vertex),
            (&mut t.phi, self.tol_phi),
            (&mut t.hull, self.tol_hull),
        ] {
            if let Some(v) = v {
                *slot = v;
            }
        }
        t.validate()?;
        Ok(t)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Trace every component of |f| = eps
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        eps: f64,
        /// Polyline CSV (component_id,arc_id,re,im)
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Planar graph of each component of |f| = eps
    Graph {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        eps: f64,
    },
    /// Critical points against the convex hull of the zeros
    GaussLucas {
        #[command(flatten)]
        common: Common,
        /// Polynomial spec (same as --fn)
        #[arg(long)]
        poly: Option<String>,
        /// Check this many seeded random polynomials instead
        #[arg(long)]
        corpus: Option<usize>,
    },
    /// Certify that nearby level curves stay close to |f| = eps
    Continuity {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        eps: f64,
        #[arg(long, allow_negative_numbers = true)]
        delta: f64,
    },
    /// Critical set, its nesting order and the maximal element
    Order {
        #[command(flatten)]
        common: Common,
    },
    /// Annular regions and the map phi on each
    Decompose {
        #[command(flatten)]
        common: Common,
        /// Write the sampled phi (w_re,w_im,phi_re,phi_im,region)
        #[arg(long = "emit-phi")]
        emit_phi: Option<PathBuf>,
        /// Level of the outer boundary curve on the plane
        #[arg(long = "outer-level")]
        outer_level: Option<f64>,
    },
    /// Run every check on one function
    VerifyAll {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_negative_numbers = true)]
        eps: f64,
        #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
        delta: f64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match commands::run(cli.command) {
        Ok(status) => ExitCode::from(status),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Usage => 1,
                ErrorClass::Numerical => 2,
                ErrorClass::Certificate => 3,
            })
        }
    }
}
