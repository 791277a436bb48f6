//! `isdrecon`: command-line driver. Exit code 0 when every declared
//! contract of the subcommand holds, 1 when one fails, 2 on errors.

use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use isd_core::chain::{constant_table, forward_chain, invert_rate, ChainInput, IDENTITY_TOL};
use isd_core::harness::{
    prepare_data, projection_error, run_pipeline, run_pipeline_full, sweep, write_sweep_csv, ExperimentConfig, SweepAxis,
};
use isd_core::spectral::{check_delta_close, extract_fisd, perturb_delta, InteriorSpectralData};
use isd_core::volumes::{QuadratureVolumes, SpectralVolumes, UnionVolumes};
use isd_core::Result;

#[derive(Parser)]
#[command(name = "isdrecon", version, about = "Metric reconstruction from finite interior spectral data")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample interior spectral data of the configured manifold.
    Extract {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a delta-perturbation of a data file and its certificate.
    Perturb {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
    /// Decide whether two data files are delta-close.
    CheckClose {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Projection error of the slicing solver for one ball at the base point.
    Project {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        max_err: Option<f64>,
    },
    /// Spectral ball areas against quadrature, as CSV.
    Volumes {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', required = true)]
        radii: Vec<f64>,
        #[arg(long)]
        max_rel_err: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the pipeline and write the assembled metric space.
    Reconstruct {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the pipeline and print the run record.
    Evaluate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        max_gh: Option<f64>,
    },
    /// Forward parameter chain with its audit.
    Chain {
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.01, 0.001])]
        eps: Vec<f64>,
        #[arg(long)]
        input: Option<PathBuf>,
        /// Print the constant table instead.
        #[arg(long)]
        constants: bool,
    },
    /// One pipeline run per value; writes the sweep table.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        axis: Axis,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Require a non-increasing `gh_upper` column within this relative slack.
        #[arg(long)]
        monotone_slack: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Delta,
    Sigma,
}

fn config(path: &Option<PathBuf>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn read_data(p: &Path) -> Result<InteriorSpectralData> {
    InteriorSpectralData::from_json(&std::fs::read_to_string(p)?)
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Extract { config: c, out } => {
            let c = config(&c)?;
            c.preflight()?;
            let m = &c.manifold;
            let d = extract_fisd(m, &m.bounds(c.r0), c.j, c.n_r, c.n_theta, None)?;
            std::fs::write(out, d.to_json()?)?;
            Ok(true)
        }
        Cmd::Perturb { input, delta, seed, out, certificate } => {
            let (d, cert) = perturb_delta(&read_data(&input)?, delta, seed)?;
            std::fs::write(out, d.to_json()?)?;
            if let Some(p) = certificate {
                std::fs::write(p, cert.to_json()?)?;
            }
            Ok(true)
        }
        Cmd::CheckClose { a, b, delta, report } => {
            let r = check_delta_close(&read_data(&a)?, &read_data(&b)?, delta)?;
            if let Some(p) = report {
                std::fs::write(p, serde_json::to_string_pretty(&r)?)?;
            }
            println!("{} {}", if r.pass { "close" } else { "not close" }, r.violated.join(" "));
            Ok(r.pass)
        }
        Cmd::Project { config: c, radius, max_err } => {
            let c = config(&c)?;
            let p = prepare_data(&c)?;
            let rho = radius.unwrap_or(c.proj_check_radius);
            let err = projection_error(&c.manifold, &p.data, &p.mix, c.gamma, &p.params, rho, c.quadrature)?;
            println!("radius {rho} eps* {:.6e} relative error {err:.6e}", p.params.eps_star.unwrap_or(f64::NAN));
            Ok(max_err.map_or(true, |t| err <= t))
        }
        Cmd::Volumes { config: c, radii, max_rel_err, out } => {
            let c = config(&c)?;
            let p = prepare_data(&c)?;
            let m = &c.manifold;
            let mut sv = SpectralVolumes::new(&p.data, vec![[0.0, 0.0]], c.gamma, p.params.clone())?;
            let mut q = QuadratureVolumes::new(m, &[m.base_point], c.quadrature);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["radius", "spectral", "quadrature", "rel_err"])?;
            let mut ok = true;
            for r in radii {
                let s = sv.union_volume(&[r])?.value;
                let t = q.union_volume(&[r])?.value;
                let e = (s - t).abs() / t;
                ok &= max_rel_err.map_or(true, |tol| e <= tol);
                w.write_record([r.to_string(), s.to_string(), t.to_string(), e.to_string()])?;
            }
            let body = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
            match out {
                Some(p) => std::fs::write(p, body)?,
                None => print!("{}", String::from_utf8_lossy(&body)),
            }
            Ok(ok)
        }
        Cmd::Reconstruct { config: c, out } => {
            let (rec, r) = run_pipeline_full(&config(&c)?)?;
            std::fs::write(out, r.space.to_json()?)?;
            println!("{} points, repair mass {:.4e}, {:.1} s", r.space.len(), r.report.repair_mass, rec.runtime_s);
            Ok(r.space.axiom_defect() <= 1e-9)
        }
        Cmd::Evaluate { config: c, max_gh } => {
            let rec = run_pipeline(&config(&c)?)?;
            print_json(&rec)?;
            let gh = rec.summary.as_ref().map_or(f64::INFINITY, |s| s.gh.bound);
            Ok(max_gh.map_or(true, |t| gh <= t))
        }
        Cmd::Chain { eps, input, constants } => {
            let input: ChainInput = match input {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
                None => ChainInput::default(),
            };
            if constants {
                print_json(&constant_table(&input))?;
                return Ok(true);
            }
            let mut ok = true;
            for e in eps {
                let out = forward_chain(&input, e)?;
                let back = invert_rate(out.delta, out.rate.c1, out.rate.c2)?;
                let gap = back.log_gap(isd_core::chain::Pos::new(e));
                for a in out.audit.iter().filter(|a| !a.holds) {
                    eprintln!("eps {e}: audit failed: {} ({:?}, gap {:.3e})", a.check, a.relation, a.gap);
                }
                println!("eps {e:e}: delta {} ; round trip gap {gap:.3e}; {} checks", out.delta, out.audit.len());
                ok &= out.all_hold() && gap <= IDENTITY_TOL;
            }
            Ok(ok)
        }
        Cmd::Sweep { config: c, axis, values, out, monotone_slack } => {
            let c = config(&c)?;
            let axis = match axis {
                Axis::Delta => SweepAxis::Delta,
                Axis::Sigma => SweepAxis::Sigma,
            };
            let rows = sweep(&c, axis, &values)?;
            match out {
                Some(p) => write_sweep_csv(&rows, std::fs::File::create(p)?)?,
                None => write_sweep_csv(&rows, std::io::stdout())?,
            }
            Ok(monotone_slack.map_or(true, |s| isd_core::harness::monotone_within(&rows, s)))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
