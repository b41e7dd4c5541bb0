//! `qtree`: forward and inverse spectral problems on metric trees.

use clap::{Args, Parser, Subcommand};
use qtree::io::{self, Report, RunConfig};
use qtree::pipeline::{self, Provenance, SpectralData};
use qtree::{Error, Potential, Result, Tree};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "qtree", version, about = "Forward and inverse spectral solver for σ-form operators on metric trees")]
struct Cli {
    /// JSON run configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for the parallel stages.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    tree: PathBuf,
    #[arg(long)]
    potential: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Characteristic functions of a potential: spectral.json and real_axis.csv.
    Forward {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Recovers the potential from spectral data: potential.csv and report.json.
    Invert {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Known potential; per-edge errors are added to the report.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Also write the {ν_n, κ(ν_n)} pairs of every transition to transitions.csv.
        #[arg(long)]
        dump_samples: bool,
    },
    /// Kernel representation, Wronskian, determinant identity and split invariance.
    Verify {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Stability sweep over perturbation amplitudes: sweep.json and sweep.csv.
    Sweep {
        #[command(flatten)]
        inputs: Inputs,
        /// Comma-separated amplitudes; may be empty.
        #[arg(long, default_value = "")]
        amplitudes: String,
        /// Seeds per amplitude, counted up from the base seed.
        #[arg(long, default_value_t = 2)]
        runs: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Forward followed by invert; prints the per-edge relative L2 errors.
    Roundtrip {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::input(format!("{}: {e}", path.display())))
}

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let p = dir.join(name);
    std::fs::write(&p, body).map_err(|e| Error::input(format!("{}: {e}", p.display())))?;
    log::info!("wrote {}", p.display());
    Ok(())
}

fn load_tree(path: &Path) -> Result<Arc<Tree>> {
    io::parse_tree(&read(path)?).map(Arc::new).map_err(|e| Error::input(format!("{}: {e}", path.display())))
}

fn load_potential(path: &Path, tree: &Tree) -> Result<Arc<Potential>> {
    io::read_potential(&read(path)?, tree).map(Arc::new).map_err(|e| Error::input(format!("{}: {e}", path.display())))
}

fn load_inputs(inputs: &Inputs) -> Result<(Arc<Tree>, Arc<Potential>)> {
    let tree = load_tree(&inputs.tree)?;
    let pot = load_potential(&inputs.potential, &tree)?;
    Ok((tree, pot))
}

fn sampled_forward(tree: &Arc<Tree>, pot: &Arc<Potential>, config: &RunConfig) -> Result<SpectralData<f64>> {
    pipeline::sample_data(&pipeline::forward_data(tree, pot)?, &config.data_sampling())
}

fn real_axis_csv(file: &io::SpectralFile, config: &RunConfig) -> String {
    let mut s = io::csv_banner("real-axis", config);
    s.push_str("rho");
    for b in &file.blocks {
        let name = b.vertex.map_or("delta".to_string(), |k| format!("delta_{k}"));
        let _ = write!(s, ",re_{name},im_{name}");
    }
    s.push('\n');
    let rows = file.blocks.first().map_or(0, |b| b.real_grid.rho.len());
    for i in 0..rows {
        let _ = write!(s, "{}", file.blocks[0].real_grid.rho[i]);
        for b in &file.blocks {
            let v = b.real_grid.weighted[i];
            let _ = write!(s, ",{:.15e},{:.15e}", v[0], v[1]);
        }
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
struct InvertPayload {
    provenance: Provenance,
    iterations: usize,
    seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    edge_errors: Option<Vec<f64>>,
    /// Relative L2 difference between the input Δ blocks and those of the recovered potential.
    forward_residual: Option<f64>,
    log: Vec<pipeline::StepLog>,
}

fn invert(
    tree: &Arc<Tree>,
    data: &SpectralData<f64>,
    truth: Option<&Potential>,
    config: &RunConfig,
) -> Result<(pipeline::Reconstruction<f64>, InvertPayload)> {
    let settings = config.pipeline();
    let start = Instant::now();
    let rec = pipeline::reconstruct(data, &settings)?;
    let seconds = start.elapsed().as_secs_f64();
    let again = pipeline::forward_data(tree, &Arc::new(rec.potential.clone()))?;
    let forward_residual = pipeline::data_distance(data, &again, &settings).ok().map(|d| d.delta);
    let payload = InvertPayload {
        provenance: data.provenance,
        iterations: rec.iterations,
        seconds,
        edge_errors: truth.map(|t| pipeline::edge_errors(t, &rec.potential)),
        forward_residual,
        log: rec.log.clone(),
    };
    Ok((rec, payload))
}

fn transitions_csv(rec: &pipeline::Reconstruction<f64>, config: &RunConfig) -> String {
    let mut s = io::csv_banner("transitions", config);
    s.push_str("vertex,kind,n,re_nu,im_nu,re_kappa,im_kappa\n");
    for (v, (kn, kd)) in &rec.transitions {
        for (kind, series) in [("neumann", kn), ("dirichlet", kd)] {
            for (n, nu, k) in series.nodes() {
                let _ = writeln!(s, "{v},{kind},{n},{:.15e},{:.15e},{:.15e},{:.15e}", nu.re, nu.im, k.re, k.im);
            }
        }
    }
    s
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::from_json(&read(p)?).map_err(|e| Error::input(format!("{}: {e}", p.display())))?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| Error::input(format!("--jobs: {e}")))?;
    }
    log::debug!("config hash {}", config.hash());
    match cli.command {
        Command::Forward { inputs, out } => {
            let (tree, pot) = load_inputs(&inputs)?;
            let data = sampled_forward(&tree, &pot, &config)?;
            let file = io::spectral_file(&data, &config)?;
            write(&out, "spectral.json", &serde_json::to_string_pretty(&file).expect("serializes"))?;
            write(&out, "real_axis.csv", &real_axis_csv(&file, &config))?;
            println!("{} blocks written to {}", file.blocks.len(), out.join("spectral.json").display());
        }
        Command::Invert { tree, data, out, truth, dump_samples } => {
            let tree = load_tree(&tree)?;
            let data = io::load_spectral(&read(&data)?, &tree)
                .map_err(|e| Error::input(format!("{}: {e}", data.display())))?;
            let truth = truth.map(|p| load_potential(&p, &tree)).transpose()?;
            let (rec, payload) = invert(&tree, &data, truth.as_deref(), &config)?;
            write(&out, "potential.csv", &io::write_potential(&rec.potential))?;
            if dump_samples {
                write(&out, "transitions.csv", &transitions_csv(&rec, &config))?;
            }
            if let Some(errs) = &payload.edge_errors {
                print_errors(errs);
            }
            write(&out, "report.json", &Report::new("invert", &config, &tree, payload).to_json())?;
        }
        Command::Verify { inputs, out } => {
            let (tree, pot) = load_inputs(&inputs)?;
            let (report, lip) = qtree::verify::verify(&tree, &pot, &config)?;
            let mut csv = io::csv_banner("lipschitz", &config);
            csv.push_str("edge,x,k_ratio,n_ratio,c_ratio\n");
            let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.12e}"));
            for (e, l) in &lip {
                for r in &l.rows {
                    let _ = writeln!(csv, "{e},{},{},{},{}", r.x, opt(r.k_ratio), opt(r.n_ratio), opt(r.c_ratio));
                }
            }
            println!(
                "wronskian {:.3e}  representation {:.3e}  identity {:.3e}  split {:.3e}",
                report.max_wronskian, report.max_representation, report.max_identity, report.max_split
            );
            write(&out, "verify.json", &Report::new("verify", &config, &tree, report).to_json())?;
            write(&out, "lipschitz.csv", &csv)?;
        }
        Command::Sweep { inputs, amplitudes, runs, out } => {
            let (tree, pot) = load_inputs(&inputs)?;
            let amplitudes = parse_amplitudes(&amplitudes)?;
            let seeds: Vec<u64> = (0..runs).map(|i| config.seed + i).collect();
            let report = if amplitudes.is_empty() {
                pipeline::SweepReport { runs: vec![], max_ratio: vec![None; tree.m()], band: vec![None; tree.m()] }
            } else {
                let data = sampled_forward(&tree, &pot, &config)?;
                pipeline::stability_sweep(&data, &amplitudes, &seeds, &config.pipeline())?
            };
            let mut csv = io::csv_banner("sweep", &config);
            csv.push_str("amplitude,seed,delta,edge,change,ratio,exit_code\n");
            for r in &report.runs {
                for j in 0..tree.m() {
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{},{},{}",
                        r.amplitude,
                        r.seed,
                        r.delta.map_or(String::new(), |d| format!("{d:.12e}")),
                        j + 1,
                        r.edge_change.get(j).map_or(String::new(), |c| format!("{c:.12e}")),
                        r.ratios.get(j).copied().flatten().map_or(String::new(), |c| format!("{c:.12e}")),
                        r.exit_code
                    );
                }
            }
            println!("{} runs, band per edge {:?}", report.runs.len(), report.band);
            write(&out, "sweep.json", &Report::new("sweep", &config, &tree, report).to_json())?;
            write(&out, "sweep.csv", &csv)?;
        }
        Command::Roundtrip { inputs, out } => {
            let (tree, pot) = load_inputs(&inputs)?;
            let data = sampled_forward(&tree, &pot, &config)?;
            // Through the file format, exactly as forward followed by invert.
            let text = serde_json::to_string(&io::spectral_file(&data, &config)?).expect("serializes");
            let data = io::load_spectral(&text, &tree)?;
            let (rec, payload) = invert(&tree, &data, Some(&pot), &config)?;
            print_errors(payload.edge_errors.as_deref().unwrap_or_default());
            if let Some(out) = out {
                write(&out, "potential.csv", &io::write_potential(&rec.potential))?;
                write(&out, "report.json", &Report::new("roundtrip", &config, &tree, payload).to_json())?;
            }
        }
    }
    Ok(())
}

fn parse_amplitudes(list: &str) -> Result<Vec<f64>> {
    list.split(',')
        .map(str::trim)
        .filter(|a| !a.is_empty())
        .map(|a| match a.parse::<f64>() {
            Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
            _ => Err(Error::input(format!("--amplitudes: {a:?} is not a non-negative number"))),
        })
        .collect()
}

fn print_errors(errs: &[f64]) {
    println!("edge,relative_l2_error");
    for (j, e) in errs.iter().enumerate() {
        println!("{},{e:.6e}", j + 1);
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("QTREE_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
