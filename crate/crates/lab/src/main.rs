use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nodal_core::fem::BoundaryCondition;
use nodal_core::mesh::io::write_imesh;
use nodal_core::nodal::{count_domains, count_domains_dirichlet, extract_level_set, extract_level_set_dirichlet, to_svg};
use nodal_lab::common::Solved;
use nodal_lab::{emit_report, lewy, payne, sweep, ExperimentReport, Geometry, LabError, Result, SweepConfig};

#[derive(Parser)]
#[command(name = "nodal-lab", version, about = "Nodal sets and eigenvalues under surgery")]
struct Cli {
    /// Configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a mesh, print its statistics and optionally write it as IMESH.
    Mesh {
        geometry: String,
        #[arg(long)]
        write: Option<PathBuf>,
    },
    /// Print the lowest eigenvalues of a mesh.
    Solve {
        geometry: String,
        /// Highest eigenpair index (defaults to `solve.m`).
        #[arg(short)]
        m: Option<usize>,
        #[arg(long)]
        dirichlet: bool,
    },
    /// Nodal set and nodal domains of eigenfunction `k`.
    Nodal {
        geometry: String,
        #[arg(short)]
        k: usize,
        #[arg(long)]
        dirichlet: bool,
        /// Writes the nodal set as SVG.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Connected-sum convergence sweep, or the containment threshold with `--threshold`.
    Sweep {
        #[arg(long)]
        threshold: bool,
    },
    /// Socket attachment sweep, or the perforation sweep with `--perforation`.
    Payne {
        #[arg(long)]
        perforation: bool,
    },
    /// Fewest nodal domains per harmonic degree; with `--transfer` also the glued surface.
    Lewy {
        #[arg(long)]
        transfer: bool,
    },
    /// Every experiment, with all artifacts written to the output directory.
    Report,
}

fn config(cli: &Cli) -> Result<SweepConfig> {
    let mut cfg = match &cli.config {
        Some(p) => SweepConfig::load(p)?,
        None => SweepConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    Ok(cfg)
}

fn bc(dirichlet: bool) -> BoundaryCondition {
    if dirichlet {
        BoundaryCondition::Dirichlet
    } else {
        BoundaryCondition::Closed
    }
}

fn emit(report: &ExperimentReport, cfg: &SweepConfig) -> Result<()> {
    for p in emit_report(report, &cfg.out)? {
        println!("wrote {}", p.display());
    }
    for f in &report.flags {
        println!("flag: {f}");
    }
    for c in &report.constants {
        println!("{} = {:.6e}{}", c.name, c.value, if c.note.is_empty() { String::new() } else { format!("  ({})", c.note) });
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = config(cli)?;
    match &cli.command {
        Command::Mesh { geometry, write } => {
            let mesh = Geometry::parse(geometry)?.build()?;
            let q = mesh.quality();
            println!("vertices {}", mesh.n_vertices());
            println!("triangles {}", mesh.n_triangles());
            println!("euler characteristic {}", mesh.euler_characteristic());
            println!("boundary curves {}", mesh.boundary_loops().len());
            println!("area {:.12}", mesh.total_area());
            println!("smallest angle {:.4} deg", q.min_angle.to_degrees());
            println!("longest edge {:.6}", q.max_edge);
            if let Some(path) = write {
                let f = std::fs::File::create(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
                write_imesh(&mesh, std::io::BufWriter::new(f))?;
                println!("wrote {}", path.display());
            }
        }
        Command::Solve { geometry, m, dirichlet } => {
            let mesh = Geometry::parse(geometry)?.build()?;
            let s = Solved::new(mesh, bc(*dirichlet), m.unwrap_or(cfg.m), cfg.tol, cfg.seed)?;
            println!("k,lambda,residual");
            for (k, (l, r)) in s.spectrum.eigenvalues.iter().zip(&s.spectrum.residuals).enumerate() {
                println!("{k},{l:.15e},{r:.3e}");
            }
        }
        Command::Nodal {
            geometry,
            k,
            dirichlet,
            svg,
        } => {
            let mesh = Geometry::parse(geometry)?.build()?;
            let s = Solved::new(mesh, bc(*dirichlet), *k, cfg.tol, cfg.seed)?;
            let u = &s.spectrum.eigenvectors[*k];
            let (set, domains) = match s.dirichlet_mask() {
                Some(mask) => (
                    extract_level_set_dirichlet(&s.mesh, u, 0.0, mask)?,
                    count_domains_dirichlet(&s.mesh, u, mask)?,
                ),
                None => (extract_level_set(&s.mesh, u, 0.0)?, count_domains(&s.mesh, u)?),
            };
            println!("lambda {:.15e}", s.spectrum.eigenvalues[*k]);
            println!("nodal domains {}", domains.count);
            println!("nodal components {}", set.components.len());
            println!("nodal length {:.12}", set.length());
            if let Some(path) = svg {
                std::fs::write(path, to_svg(&s.mesh, &set)?).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
                println!("wrote {}", path.display());
            }
        }
        Command::Sweep { threshold } => {
            let r = if *threshold {
                sweep::estimate_threshold(&cfg)?
            } else {
                sweep::run_convergence_sweep(&cfg)?
            };
            emit(&r, &cfg)?;
        }
        Command::Payne { perforation } => {
            let r = if *perforation {
                payne::run_payne_perforation(&cfg)?
            } else {
                payne::run_payne_attachment(&cfg)?
            };
            emit(&r, &cfg)?;
        }
        Command::Lewy { transfer } => {
            let r = if *transfer {
                lewy::run_lewy_transfer(&cfg)?
            } else {
                lewy::run_lewy_search(&cfg)?.2
            };
            emit(&r, &cfg)?;
        }
        Command::Report => {
            for r in [
                sweep::run_convergence_sweep(&cfg)?,
                sweep::estimate_threshold(&cfg)?,
                payne::run_payne_attachment(&cfg)?,
                payne::run_payne_perforation(&cfg)?,
                lewy::run_lewy_transfer(&cfg)?,
            ] {
                println!("== {}", r.name);
                emit(&r, &cfg)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
