//! `voxwheat` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 partial conversion
//! failure, 64 usage error, 65 missing labels, 66 corrupt tensor file.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use voxwheat::archgen::Task;
use voxwheat::pipeline::{
    default_input_dims, manifest_text, run_archgen, run_bench, run_convert, run_split, JobConfig, JobError,
    EXIT_CORRUPT_TENSOR, EXIT_USAGE,
};
use voxwheat::resample::Envelope;
use voxwheat::tensor_io::{inspect, TensorFormat};
use voxwheat::voxelize::ChannelMode;

#[derive(Debug, Parser)]
#[command(name = "voxwheat", version, about = "Multispectral point cloud to 3D voxel image toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert PLY point clouds into voxel tensors.
    Convert {
        /// Input file or glob pattern; repeatable.
        #[arg(long, required = true)]
        input: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Voxels per millimetre.
        #[arg(long, default_value_t = 1.0)]
        resolution: f64,
        #[arg(long, default_value = "rgb")]
        channels: ChannelMode,
        /// none, spike-rgb, head, dataset2 or WxHxD.
        #[arg(long, default_value = "none")]
        envelope: String,
        #[arg(long, default_value = "v3d")]
        format: TensorFormat,
        #[arg(long, env = "VOXWHEAT_THREADS")]
        threads: Option<usize>,
        /// Extra PLY property names to try for the NIR channel, before the defaults.
        #[arg(long = "nir-name")]
        nir_names: Vec<String>,
    },
    /// Build a stratified train/test manifest with cross-validation folds.
    Split {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long = "test-frac", default_value_t = 0.1)]
        test_frac: f64,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Manifest path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample a batch of valid 3D-CNN architecture specs.
    Archgen {
        #[arg(long, default_value = "detection")]
        task: Task,
        #[arg(long = "batch-size", default_value_t = 20)]
        batch_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Network input as WxHxDxC; defaults to the task's envelope with 3 channels.
        #[arg(long)]
        input: Option<String>,
    },
    /// Print the header and occupancy of a tensor file.
    Inspect { file: PathBuf },
    /// Measure conversion throughput per thread count.
    Bench {
        /// Points per cloud.
        #[arg(long, default_value_t = 1_000_000)]
        points: usize,
        #[arg(long, default_value_t = 10)]
        clouds: usize,
        /// Comma-separated thread counts.
        #[arg(long, default_value = "1,2,4,8", env = "VOXWHEAT_THREADS")]
        threads: String,
        #[arg(long, default_value_t = 1.0)]
        resolution: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_USAGE as u8)
}

fn job_failure(e: JobError) -> ExitCode {
    if let JobError::Dataset(voxwheat::DatasetError::MissingLabel(paths)) = &e {
        eprintln!("error: records without a usable label:");
        for p in paths {
            eprintln!("{p}");
        }
    } else {
        eprintln!("error: {e}");
    }
    ExitCode::from(e.exit_code() as u8)
}

fn expand_inputs(patterns: &[String]) -> Result<Vec<PathBuf>, String> {
    let mut paths = Vec::new();
    for pattern in patterns {
        let matches: Vec<PathBuf> = glob::glob(pattern)
            .map_err(|e| format!("bad pattern '{pattern}': {e}"))?
            .filter_map(Result::ok)
            .collect();
        if matches.is_empty() {
            // a literal path that does not exist is reported per file
            paths.push(PathBuf::from(pattern));
        } else {
            paths.extend(matches);
        }
    }
    Ok(paths)
}

fn parse_dims<const N: usize>(text: &str) -> Option<[usize; N]> {
    let v: Vec<usize> = text.split(['x', 'X', ',']).map(|s| s.trim().parse().ok()).collect::<Option<_>>()?;
    v.try_into().ok()
}

fn run(cli: Cli) -> ExitCode {
    match cli.command {
        Command::Convert { input, out, resolution, channels, envelope, format, threads, nir_names } => {
            let inputs = match expand_inputs(&input) {
                Ok(p) => p,
                Err(e) => return usage(e),
            };
            let envelope = match envelope.as_str() {
                "none" => None,
                s => match s.parse::<Envelope>() {
                    Ok(env) => Some(env),
                    Err(e) => return usage(e),
                },
            };
            let mut config = JobConfig {
                inputs,
                out_dir: out,
                resolution,
                mode: channels,
                envelope,
                format,
                ..Default::default()
            };
            if let Some(t) = threads {
                config.threads = t;
            }
            if !nir_names.is_empty() {
                let mut names = nir_names;
                names.append(&mut config.ply.nir_names);
                config.ply.nir_names = names;
            }
            match run_convert(&config) {
                Ok(report) => {
                    print!("{}", report.to_text());
                    ExitCode::from(report.exit_code() as u8)
                }
                Err(e) => job_failure(e),
            }
        }
        Command::Split { labels, test_frac, folds, seed, out } => {
            let (manifest, warnings) = match run_split(&labels, test_frac, folds, seed) {
                Ok(m) => m,
                Err(e) => return job_failure(e),
            };
            for w in warnings {
                eprintln!("warning: {w}");
            }
            let text = match manifest_text(&manifest) {
                Ok(t) => t,
                Err(e) => return job_failure(e),
            };
            match out {
                Some(path) => {
                    if let Err(e) = std::fs::write(&path, text) {
                        eprintln!("error: {}: {e}", path.display());
                        return ExitCode::FAILURE;
                    }
                }
                None => print!("{text}"),
            }
            ExitCode::SUCCESS
        }
        Command::Archgen { task, batch_size, seed, out, input } => {
            let dims = match input {
                Some(s) => match parse_dims::<4>(&s) {
                    Some(d) => d,
                    None => return usage(format!("--input expects WxHxDxC, got '{s}'")),
                },
                None => default_input_dims(task),
            };
            match run_archgen(&out, task, batch_size, seed, dims) {
                Ok(written) => {
                    for (path, spec) in written {
                        let conv: Vec<_> = spec.conv_neurons.iter().map(u32::to_string).collect();
                        let dense: Vec<_> = spec.dense_with_output().iter().map(u32::to_string).collect();
                        println!("{}\tconv={}\tdense={}", path.display(), conv.join(","), dense.join(","));
                    }
                    ExitCode::SUCCESS
                }
                Err(JobError::Arch(e @ voxwheat::ArchError::Sample { .. })) => usage(e),
                Err(e) => job_failure(e),
            }
        }
        Command::Inspect { file } => {
            let bytes = match std::fs::read(&file) {
                Ok(b) => b,
                Err(e) => {
                    eprintln!("error: {}: {e}", file.display());
                    return ExitCode::FAILURE;
                }
            };
            match inspect(&bytes) {
                Ok(s) => {
                    let magic = match s.header.format {
                        TensorFormat::V3d => "V3D1",
                        TensorFormat::Npy => "\\x93NUMPY",
                    };
                    let [w, h, d] = s.header.dims;
                    let mut stdout = std::io::stdout().lock();
                    let _ = writeln!(stdout, "format {}", s.header.format);
                    let _ = writeln!(stdout, "magic {magic}");
                    let _ = writeln!(stdout, "dims {w} {h} {d}");
                    let _ = writeln!(stdout, "channels {}", s.header.channels);
                    let _ = writeln!(stdout, "occupied {}", s.occupied);
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {}: {e}", file.display());
                    ExitCode::from(EXIT_CORRUPT_TENSOR as u8)
                }
            }
        }
        Command::Bench { points, clouds, threads, resolution, seed } => {
            let counts: Option<Vec<usize>> = threads.split(',').map(|t| t.trim().parse().ok()).collect();
            let Some(counts) = counts else {
                return usage(format!("--threads expects a comma-separated list, got '{threads}'"));
            };
            match run_bench(clouds, points, &counts, resolution, seed) {
                Ok(report) => {
                    print!("{}", report.to_text());
                    if report.deterministic {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::FAILURE
                    }
                }
                Err(e) => job_failure(e),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    run(cli)
}
