//! Command-line front end.
//!
//! Every subcommand also accepts `--config FILE`, a text file of
//! `key = value` lines whose keys are the subcommand's long flag names.
//! Flags given on the command line take precedence over the file.
//!
//! Exit codes: 0 success, 2 usage error, 3 data or shape error, 4 check failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{CommandFactory, Parser, Subcommand};

use crate::analysis::bench::{bench, threads_from_env, BenchSpec};
use crate::analysis::complexity::stage_params;
use crate::analysis::fit::{toy_fit, EdgeTask, DEFAULT_FIT_LR};
use crate::analysis::gradcheck::{check_trials, CheckOp};
use crate::dysample::{make_variant, Variant};
use crate::error::Error;
use crate::io::{load_weights, read_npy, write_npy, write_report_csv, write_report_json, AnyTensor};
use crate::io::report::report_csv_string;
use crate::tensor::{DType, Element, Rng, Shape};
use crate::upsampler::{OpKind, Upsampler};
use crate::viz::{offset_field_svg, VizOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_CHECK: i32 = 4;

const DEFAULT_BENCH_OPS: &str = "dysample,dysample+,dysample-s,dysample-s+,bilinear,carafe";

#[derive(Debug, Parser)]
#[command(name = "dysample", version, about = "Point-sampling feature upsamplers")]
pub struct Cli {
    /// key = value file supplying defaults for the subcommand's flags
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Upsample an NPY tensor
    Upsample {
        #[arg(long = "in", value_name = "PATH")]
        input: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        #[arg(long, value_parser = parse_op)]
        op: OpKind,
        #[arg(long, default_value_t = 2)]
        scale: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Weight directory with a manifest.txt
        #[arg(long, value_name = "DIR")]
        weights: Option<PathBuf>,
    },
    /// Measure parameters, FLOPs and latency
    Bench {
        /// Comma-separated operator names
        #[arg(long, default_value = DEFAULT_BENCH_OPS, value_delimiter = ',', value_parser = parse_op)]
        op: Vec<OpKind>,
        #[arg(long, default_value = "1,256,120,120", value_parser = parse_shape)]
        shape: Shape,
        #[arg(long, default_value_t = 2)]
        scale: usize,
        #[arg(long, default_value_t = 20)]
        iters: usize,
        #[arg(long, default_value_t = 3)]
        warmup: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "f32", value_parser = parse_dtype)]
        dtype: DType,
        /// CSV output; printed to stdout when absent
        #[arg(long, value_name = "CSV")]
        out: Option<PathBuf>,
        #[arg(long, value_name = "JSON")]
        json: Option<PathBuf>,
    },
    /// Parameter increments summed over a model's upsampling stages
    Tables {
        #[arg(long, value_parser = ["fpn4", "segformer6", "pfpn3"])]
        preset: String,
        #[arg(long, default_value_t = 256)]
        channels: usize,
    },
    /// Finite-difference gradient checks
    Gradcheck {
        /// Operator name, or `all`
        #[arg(long, default_value = "all")]
        op: String,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-6)]
        eps: f64,
    },
    /// Train a DySample variant on the toy edge task
    Fit {
        #[arg(long, default_value = "dysample", value_parser = parse_variant)]
        variant: Variant,
        #[arg(long, default_value_t = 300)]
        steps: usize,
        #[arg(long, default_value_t = DEFAULT_FIT_LR)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 32)]
        channels: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 2)]
        scale: usize,
        /// Loss curve CSV (`step,loss`)
        #[arg(long, value_name = "CSV")]
        out: Option<PathBuf>,
    },
    /// Render the sampling positions of a DySample module as SVG
    Viz {
        #[arg(long = "in", value_name = "PATH")]
        input: PathBuf,
        #[arg(long, value_name = "DIR")]
        weights: Option<PathBuf>,
        #[arg(long, value_name = "SVG")]
        out: PathBuf,
        #[arg(long, default_value = "dysample", value_parser = parse_variant)]
        variant: Variant,
        #[arg(long, default_value_t = 2)]
        scale: usize,
        #[arg(long, default_value_t = 0)]
        group: usize,
        /// top,left,height,width in input pixels
        #[arg(long, default_value = "0,0,8,8", value_parser = parse_crop)]
        crop: [usize; 4],
    },
}

fn parse_op(s: &str) -> Result<OpKind, String> {
    s.trim().parse().map_err(|e: Error| e.to_string())
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.trim().parse().map_err(|e: Error| e.to_string())
}

fn parse_dtype(s: &str) -> Result<DType, String> {
    s.trim().parse().map_err(|e: Error| e.to_string())
}

fn parse_usizes<const N: usize>(s: &str) -> Result<[usize; N], String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|v: Vec<usize>| format!("expected {N} comma-separated integers, got {}", v.len()))
}

fn parse_shape(s: &str) -> Result<Shape, String> {
    Shape::try_from(parse_usizes::<4>(s)?).map_err(|e| e.to_string())
}

fn parse_crop(s: &str) -> Result<[usize; 4], String> {
    parse_usizes::<4>(s)
}

/// Number of upsampling stages of each preset.
pub fn preset_stages(preset: &str) -> Option<usize> {
    match preset {
        "fpn4" => Some(4),
        "segformer6" => Some(6),
        "pfpn3" => Some(3),
        _ => None,
    }
}

/// `(variant, summed increment)` rows for a preset, in table order.
pub fn preset_table(preset: &str, channels: usize) -> crate::Result<Vec<(Variant, u64)>> {
    let stages = preset_stages(preset).ok_or_else(|| Error::invalid(format!("unknown preset '{preset}'")))?;
    [Variant::DySampleS, Variant::DySampleSPlus, Variant::DySample, Variant::DySamplePlus]
        .into_iter()
        .map(|v| Ok((v, stage_params(OpKind::DySample(v), channels, 2, stages)?)))
        .collect()
}

enum Failure {
    Usage(String),
    Data(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

/// Splits `--config` out of `args` and expands the file into flags placed
/// right after the subcommand, so that later command-line flags win.
fn expand_config(args: Vec<String>) -> Result<Vec<String>, Failure> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            config = Some(it.next().ok_or_else(|| Failure::Usage("--config needs a file".into()))?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            config = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else { return Ok(rest) };
    let sub_pos = rest.iter().skip(1).position(|a| !a.starts_with('-')).map(|p| p + 1);
    let Some(sub_pos) = sub_pos else {
        return Err(Failure::Usage("--config requires a subcommand".into()));
    };
    let cmd = Cli::command();
    let sub = cmd
        .find_subcommand(&rest[sub_pos])
        .ok_or_else(|| Failure::Usage(format!("unknown subcommand '{}'", rest[sub_pos])))?;
    let known: Vec<String> = sub
        .get_arguments()
        .filter_map(|a| a.get_long().map(str::to_string))
        .filter(|l| l != "config" && l != "help")
        .collect();
    let text = fs::read_to_string(&path).map_err(|e| Failure::Data(format!("{path}: {e}")))?;
    let mut extra = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("{path}:{}: expected key = value", no + 1)))?;
        let key = k.trim().replace('_', "-");
        if !known.contains(&key) {
            return Err(Failure::Usage(format!(
                "{path}:{}: unknown key '{key}' for '{}' (known: {})",
                no + 1,
                rest[sub_pos],
                known.join(", ")
            )));
        }
        extra.push(format!("--{key}"));
        extra.push(v.trim().to_string());
    }
    rest.splice(sub_pos + 1..sub_pos + 1, extra);
    Ok(rest)
}

/// Runs the command line `args` (including the program name), writing
/// human-readable output to `out`, and returns the exit code.
pub fn run(args: Vec<String>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = expand_config(args).and_then(|args| {
        let cmd = Cli::command().args_override_self(true);
        let matches = cmd.try_get_matches_from(args).map_err(|e| {
            if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                Failure::Usage(String::new())
            } else {
                Failure::Usage(e.to_string())
            }
        })?;
        let cli = <Cli as clap::FromArgMatches>::from_arg_matches(&matches).map_err(|e| Failure::Usage(e.to_string()))?;
        dispatch(cli.command, out)
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(m)) if m.is_empty() => EXIT_OK,
        Err(f) => {
            let (code, msg) = match f {
                Failure::Usage(m) => (EXIT_USAGE, m),
                Failure::Data(m) => (EXIT_DATA, m),
                Failure::Check(m) => (EXIT_CHECK, m),
            };
            let _ = writeln!(err, "error: {}", msg.trim_end());
            code
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

fn upsample_typed<T: Element>(
    x: &crate::Tensor<T>,
    op: OpKind,
    scale: usize,
    seed: u64,
    weights: Option<&Path>,
) -> crate::Result<crate::Tensor<T>> {
    let mut up = Upsampler::<T>::build(op, x.shape().c, scale, &mut Rng::new(seed))?;
    if let Some(dir) = weights {
        load_weights(dir, &mut up)?;
    }
    up.forward(x)
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Upsample { input, out: path, op, scale, seed, weights } => {
            let w = weights.as_deref();
            match read_npy(&input)? {
                AnyTensor::F32(x) => write_npy(&path, &upsample_typed(&x, op, scale, seed, w)?)?,
                AnyTensor::F64(x) => write_npy(&path, &upsample_typed(&x, op, scale, seed, w)?)?,
            }
            let _ = writeln!(out, "wrote {}", path.display());
        }
        Command::Bench { op, shape, scale, iters, warmup, seed, dtype, out: csv, json } => {
            let spec = BenchSpec {
                shape,
                scale,
                warmup,
                iters,
                seed,
                threads: threads_from_env().unwrap_or(1),
                dtype,
            };
            let reports = op.iter().map(|&k| bench(k, &spec)).collect::<crate::Result<Vec<_>>>()?;
            match &csv {
                Some(p) => write_report_csv(p, &reports)?,
                None => {
                    let _ = write!(out, "{}", report_csv_string(&reports)?);
                }
            }
            if let Some(p) = &json {
                write_report_json(p, &reports)?;
            }
        }
        Command::Tables { preset, channels } => {
            let stages = preset_stages(&preset).expect("clap restricts presets");
            let _ = writeln!(out, "# {preset}: {stages} stages, {channels} channels, scale 2");
            let _ = writeln!(out, "variant,params");
            for (v, p) in preset_table(&preset, channels)? {
                let _ = writeln!(out, "{},{}", v.name(), p);
            }
        }
        Command::Gradcheck { op, trials, seed, eps } => {
            let ops = if op == "all" { CheckOp::ALL.to_vec() } else { vec![CheckOp::from_name(&op)?] };
            let mut failed = Vec::new();
            for o in ops {
                let r = check_trials(o, trials, seed, eps)?;
                let tol = o.tolerance();
                let verdict = if r.passes(tol) { "PASS" } else { "FAIL" };
                let _ = writeln!(
                    out,
                    "{verdict} {o} max_rel_err={:.3e} tolerance={tol:e} trials={trials} coordinates={}",
                    r.max_rel_err, r.checked
                );
                if !r.passes(tol) {
                    failed.push(o.name());
                }
            }
            if !failed.is_empty() {
                return Err(Failure::Check(format!("gradient check failed for {}", failed.join(", "))));
            }
        }
        Command::Fit { variant, steps, lr, seed, channels, size, scale, out: csv } => {
            let task = EdgeTask::generate(channels, size, scale, seed)?;
            let mut module = make_variant::<f64>(variant, channels, scale)?;
            let r = toy_fit(&mut module, &task, steps, lr)?;
            if let Some(p) = &csv {
                let mut text = String::from("step,loss\n");
                for (i, l) in r.losses.iter().enumerate() {
                    text.push_str(&format!("{i},{l:e}\n"));
                }
                fs::write(p, text).map_err(|e| io_err(p, e))?;
            }
            let _ = writeln!(
                out,
                "{variant} initial={:.6e} final={:.6e} bilinear={:.6e}",
                r.initial(),
                r.last(),
                r.bilinear_mse
            );
        }
        Command::Viz { input, weights, out: path, variant, scale, group, crop } => {
            let x = read_npy(&input)?.to_f64();
            let mut up = Upsampler::DySample(make_variant::<f64>(variant, x.shape().c, scale)?);
            if let Some(dir) = &weights {
                load_weights(dir, &mut up)?;
            }
            let Upsampler::DySample(module) = up else { unreachable!("built as DySample") };
            let opts = VizOptions {
                group,
                origin: (crop[0], crop[1]),
                extent: (crop[2], crop[3]),
                ..VizOptions::default()
            };
            let svg = offset_field_svg(&module, &x, &opts)?;
            fs::write(&path, svg).map_err(|e| io_err(&path, e))?;
            let _ = writeln!(out, "wrote {}", path.display());
        }
    }
    Ok(())
}
