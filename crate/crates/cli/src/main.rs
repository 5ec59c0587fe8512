use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gpshape::kernels::KernelKind;
use gpshape_cli::*;

#[derive(Parser)]
#[command(name = "gpshape", version, about = "Shape models from sparse point clouds")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// key = value run configuration; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// F-score distance threshold
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// Number of reference points
    #[arg(long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    kernel: Option<String>,
    /// Fraction of each neighbouring cluster shared at boundaries
    #[arg(long, global = true)]
    overlap: Option<f64>,
    /// XYZ file of reference centers (manual clustering)
    #[arg(long, global = true)]
    centers: Option<PathBuf>,
    /// Total reconstruction queries across clusters
    #[arg(long, global = true)]
    queries: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Ray-cast a mesh and write dense, train and test clouds
    Sample {
        mesh: PathBuf,
        out_dir: PathBuf,
        #[arg(long)]
        cameras: Option<usize>,
        #[arg(long)]
        rays: Option<usize>,
        #[arg(long)]
        train_size: Option<usize>,
        #[arg(long)]
        test_size: Option<usize>,
    },
    /// Place reference points and write their centers
    Cluster { cloud: PathBuf, out_centers: PathBuf },
    /// Fit a model to a training cloud
    Train { train_cloud: PathBuf, out_model: PathBuf },
    /// Write the point cloud a model reconstructs
    Reconstruct { model: PathBuf, out_cloud: PathBuf },
    /// Per-point likelihood of a cloud under a model
    Likelihood {
        model: PathBuf,
        cloud: PathBuf,
        out: PathBuf,
    },
    /// Reconstruct and score against a test cloud
    Eval {
        model: PathBuf,
        test_cloud: PathBuf,
        out_report: PathBuf,
        #[arg(long)]
        heatmap: Option<PathBuf>,
    },
    /// Accuracy against the number of reference points
    AblateK {
        train: PathBuf,
        test: PathBuf,
        out_csv: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
        k_list: Vec<usize>,
    },
    /// Accuracy per kernel with fixed reference points
    AblateKernel {
        train: PathBuf,
        test: PathBuf,
        out_csv: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "poly,periodic,linear,rbf,rq,matern")]
        kernels: Vec<String>,
    },
    /// Print a model summary
    Inspect { model: PathBuf },
}

fn config(g: &Global, extra: Vec<(&'static str, String)>) -> Result<gpshape::io::RunConfig> {
    let mut o: Vec<(&str, String)> = Vec::new();
    if let Some(v) = g.seed {
        o.push(("seed", v.to_string()));
    }
    if let Some(v) = g.tau {
        o.push(("tau", v.to_string()));
    }
    if let Some(v) = &g.kernel {
        o.push(("kernel", v.clone()));
    }
    if let Some(v) = g.overlap {
        o.push(("overlap", v.to_string()));
    }
    if let Some(v) = &g.centers {
        o.push(("centers", v.to_string_lossy().into_owned()));
    }
    if let Some(v) = g.k {
        o.push(("k", v.to_string()));
    }
    if let Some(v) = g.queries {
        o.push(("queries", v.to_string()));
    }
    o.extend(extra);
    build_config(g.config.as_deref(), &o)
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    if let Some(n) = g.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Sample {
            mesh,
            out_dir,
            cameras,
            rays,
            train_size,
            test_size,
        } => {
            let extra = [
                ("cameras", cameras),
                ("rays", rays),
                ("train_size", train_size),
                ("test_size", test_size),
            ]
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k, v.to_string())))
            .collect();
            let cfg = config(g, extra)?;
            let out = cmd_sample(&mesh, &out_dir, &cfg)?;
            println!(
                "{} dense points; wrote {}, {}, {}",
                out.dense_points,
                out.train.display(),
                out.test.display(),
                out.normalization.display()
            );
        }
        Command::Cluster { cloud, out_centers } => {
            let s = cmd_cluster(&cloud, &config(g, vec![])?, &out_centers)?;
            for (k, (c, o)) in s.counts.iter().zip(&s.occlusion).enumerate() {
                println!("cluster {k}: {c} points, occluded fraction {o:.4}");
            }
        }
        Command::Train {
            train_cloud,
            out_model,
        } => {
            let s = cmd_train(&train_cloud, &config(g, vec![])?, &out_model)?;
            for (k, (c, l)) in s.counts.iter().zip(&s.lml).enumerate() {
                println!("cluster {k}: {c} samples, lml {l:.4}");
            }
            println!("trained in {:.2}s", s.seconds);
        }
        Command::Reconstruct { model, out_cloud } => {
            let n = cmd_reconstruct(&model, &config(g, vec![])?, &out_cloud)?;
            println!("{n} points");
        }
        Command::Likelihood { model, cloud, out } => {
            let mean = cmd_likelihood(&model, &cloud, &out)?;
            println!("mean likelihood {mean}");
        }
        Command::Eval {
            model,
            test_cloud,
            out_report,
            heatmap,
        } => {
            let cfg = config(g, vec![])?;
            let r = cmd_eval(&model, &test_cloud, &cfg, &out_report, heatmap.as_deref())?;
            println!(
                "chamfer x1e3 {:.4}  precision {:.4}  recall {:.4}  fscore {:.4}",
                r.chamfer_x1e3, r.precision, r.recall, r.fscore
            );
        }
        Command::AblateK {
            train,
            test,
            out_csv,
            k_list,
        } => {
            let rows = cmd_ablate_k(&train, &test, &k_list, &config(g, vec![])?, &out_csv)?;
            print_rows(&rows);
        }
        Command::AblateKernel {
            train,
            test,
            out_csv,
            kernels,
        } => {
            let kinds = kernels
                .iter()
                .map(|s| s.parse::<KernelKind>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let rows = cmd_ablate_kernel(&train, &test, &kinds, &config(g, vec![])?, &out_csv)?;
            print_rows(&rows);
        }
        Command::Inspect { model } => print!("{}", cmd_inspect(&model)?),
    }
    Ok(())
}

fn print_rows(rows: &[AblationRow]) {
    for r in rows {
        match &r.metrics {
            Some(m) => println!("{}: chamfer x1e3 {:.4}  fscore {:.4}", r.label, m.chamfer_x1e3, m.fscore),
            None => println!("{}: error", r.label),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
