use clap::{Parser, Subcommand};
use qctn_bench::config::ExperimentConfig;
use qctn_bench::correlate::{correlation_profile, profile_csv, CorrelationSource};
use qctn_bench::emit;
use qctn_bench::fit::fit_power_law;
use qctn_bench::runner::run_experiment;
use qctn_bench::{BenchError, Result};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "qctn-bench",
    about = "Run, fit and report quantum-circuit tensor network benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write records to its output directory.
    Run {
        config: PathBuf,
    },
    /// Fit delta_e = a n^-b to a records file (CSV or JSON).
    Fit {
        records: PathBuf,
    },
    /// Spin correlation profile of an ansatz checkpoint.
    Correlate {
        checkpoint: PathBuf,
        /// JSON file holding the model spec.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 8)]
        r_max: usize,
        /// Write the profile CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit every records.csv found under a directory and print a summary.
    Report {
        dir: PathBuf,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| BenchError::io(path.display().to_string(), e))
}

fn cmd_run(config: &Path) -> Result<()> {
    let cfg = ExperimentConfig::from_json(&read(config)?)?;
    if cfg.paper_scale {
        eprintln!("note: config is marked paper-scale; expect a long run");
    }
    let records = run_experiment(&cfg)?;
    emit::write_results(&cfg.output_dir, &cfg, &records)?;
    println!("{}", emit::records_csv(&records).trim_end());
    println!(
        "wrote {} records to {}",
        records.len(),
        cfg.output_dir.display()
    );
    Ok(())
}

fn cmd_fit(records: &Path) -> Result<()> {
    let text = read(records)?;
    let points = if records.extension().map(|e| e == "json").unwrap_or(false) {
        emit::read_fit_points_json(&text)?
    } else {
        emit::read_fit_points_csv(&text)?
    };
    let fit = fit_power_law(&points)?;
    if fit.rejected > 0 {
        eprintln!("warning: {} non-positive points rejected", fit.rejected);
    }
    println!(
        "a = {:.6e}\nb = {:.6}\nresidual = {:.3e}\npoints = {}",
        fit.a, fit.b, fit.residual, fit.points
    );
    Ok(())
}

fn cmd_correlate(checkpoint: &Path, model: &Path, r_max: usize, out: Option<&Path>) -> Result<()> {
    let desc = qctn::ansatz::AnsatzDescriptor::from_json(&read(checkpoint)?)?;
    let spec: qctn::hamiltonian::ModelSpec =
        serde_json::from_str(&read(model)?).map_err(|e| BenchError::Config(e.to_string()))?;
    let profile = correlation_profile(CorrelationSource::Ansatz(&desc), &spec, r_max)?;
    let csv = profile_csv(&profile);
    match out {
        Some(p) => {
            std::fs::write(p, csv).map_err(|e| BenchError::io(p.display().to_string(), e))?
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_report(dir: &Path) -> Result<()> {
    let mut found = 0usize;
    let mut stack = vec![dir.to_path_buf()];
    let mut rows = Vec::new();
    while let Some(d) = stack.pop() {
        let entries =
            std::fs::read_dir(&d).map_err(|e| BenchError::io(d.display().to_string(), e))?;
        let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        paths.sort();
        for p in paths {
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().map(|f| f == "records.csv").unwrap_or(false) {
                found += 1;
                let points = emit::read_fit_points_csv(&read(&p)?)?;
                match fit_power_law(&points) {
                    Ok(fit) => rows.push(format!(
                        "{}: a = {:.4e}, b = {:.4}, residual = {:.2e} ({} points)",
                        p.display(),
                        fit.a,
                        fit.b,
                        fit.residual,
                        fit.points
                    )),
                    Err(e) => rows.push(format!("{}: fit failed ({e})", p.display())),
                }
            }
        }
    }
    rows.sort();
    for r in &rows {
        println!("{r}");
    }
    if found == 0 {
        return Err(BenchError::Config(format!(
            "no records.csv found under {}",
            dir.display()
        )));
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => cmd_run(config),
        Command::Fit { records } => cmd_fit(records),
        Command::Correlate {
            checkpoint,
            model,
            r_max,
            out,
        } => cmd_correlate(checkpoint, model, *r_max, out.as_deref()),
        Command::Report { dir } => cmd_report(dir),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
