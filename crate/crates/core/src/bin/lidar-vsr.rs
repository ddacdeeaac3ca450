use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lidar_vsr::cli::{self, CliError, ErrorKind};

/// Multi-LiDAR placement by min-max volume-to-surface ratio.
#[derive(Parser, Debug)]
#[command(name = "lidar-vsr", version)]
struct Args {
    /// Worker threads for objective evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Search for the configuration with the smallest maximum VSR.
    Optimize {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Score explicit poses (a JSON pose list or a results.json).
    Evaluate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        poses: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimize for every (model, lidar count) combination.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// Comma separated lidar counts, e.g. 1,2,3,4.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        counts: Vec<usize>,
        /// Comma separated model names (default: every model in the scenario).
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
        /// Seeds per cell; the reported value is the median.
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Monte Carlo object detection rate.
    Odr {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        poses: Option<PathBuf>,
        /// Also evaluate this many random in-bounds configurations.
        #[arg(long, default_value_t = 0)]
        random_configs: usize,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        threshold: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Write voxel CSV and PLY files for a run record.
    ExportVoxels {
        #[arg(long)]
        record: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn run(args: Args) -> Result<(), CliError> {
    match args.command {
        Command::Optimize { scenario, seed, out } => {
            let record = cli::cmd_optimize(&scenario, &out, seed)?;
            println!("objective (max VSR): {}", record.objective);
            print!("{}", cli::pose_table(&record.lidars));
            println!(
                "{} evaluations in {:.1}s; results in {}",
                record.evaluations,
                record.wall_clock_seconds,
                out.display()
            );
        }
        Command::Evaluate { scenario, poses, out } => {
            let report = cli::cmd_evaluate(&scenario, &poses, out.as_deref())?;
            for i in &report.out_of_bounds {
                eprintln!("warning: pose {i} lies outside the scenario bounds");
            }
            println!("objective (max VSR): {}", report.objective);
            print!("{}", cli::pose_table(&report.lidars));
            let mut rows = report.subspaces.clone();
            rows.sort_by(|a, b| b.vsr.total_cmp(&a.vsr));
            println!("{} subspaces; largest by VSR:", rows.len());
            println!("{:>9} {:>16} {:>8} {:>10} {:>10} {:>8}", "component", "code", "voxels", "volume", "area", "vsr");
            for r in rows.iter().take(10) {
                println!(
                    "{:>9} {:>16} {:>8} {:>10.3} {:>10.3} {:>8.4}",
                    r.component_id, r.code, r.voxel_count, r.volume, r.surface_area, r.vsr
                );
            }
        }
        Command::Sweep { scenario, counts, models, repeats, seed, out } => {
            let cells = cli::cmd_sweep(&scenario, &counts, &models, repeats, seed, &out)?;
            print!("{}", cli::sweep_csv(&cells));
            for c in cells.iter().filter(|c| c.error.is_some()) {
                eprintln!("warning: {} x{} failed: {}", c.model, c.count, c.error.as_deref().unwrap_or(""));
            }
            for (model, a, b) in cli::sweep_violations(&cells) {
                eprintln!("warning: {model}: best max VSR rose from {a} to {b} lidars");
            }
        }
        Command::Odr { scenario, poses, random_configs, trials, threshold, seed, out } => {
            let summary = cli::cmd_odr(&scenario, poses.as_deref(), random_configs, seed, trials, threshold, &out)?;
            println!("{:>10} {:>8} {:>8}", "max_vsr", "odr", "hits");
            for s in &summary.samples {
                println!("{:>10.4} {:>8.4} {:>8}", s.max_vsr, s.report.odr, s.report.detections);
            }
            if let Some(r) = summary.rank_correlation {
                println!("spearman(max_vsr, odr) = {r:.4}");
            }
        }
        Command::ExportVoxels { record, out } => {
            let n = cli::cmd_export_voxels(&record, &out)?;
            println!("wrote {n} voxels to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            eprintln!("error[usage]: invalid command line");
            return ExitCode::from(ErrorKind::Usage as u8);
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            eprintln!("error[usage]: --threads must be at least 1");
            return ExitCode::from(ErrorKind::Usage as u8);
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error[runtime]: {e}");
            return ExitCode::from(ErrorKind::Runtime as u8);
        }
    };
    match pool.install(|| run(args)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
