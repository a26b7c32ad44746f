use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use depthsep::fouriernet::{FourierError, DEFAULT_ATOM_CAP};
use depthsep::harness::{
    default_seed, load_config, run_experiment, sampler_stats, HarnessError, Sampler, SamplerKind,
};
use depthsep::netir::{Activation, LayeredNet, NetError};
use depthsep::shallowify::{
    compile_deep, compile_two_layer, measure_sup, resynthesize, Certificate, CompileOptions,
    Region, ShallowError, Strategy,
};
use depthsep::spectral::{
    example_one_bound, example_one_threshold, kappa_certificate, OscillatoryTarget, Window,
};
use depthsep::sphere::{blaschke_levy_sigma, coherence, funk_hecke, harmonic_dim, spread_frame};

const EXIT_CONFIG: u8 = 2;
const EXIT_BUDGET: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "depthsep",
    version,
    about = "Deep-to-shallow compilation, lower-bound certificates and sphere tables"
)]
struct Cli {
    /// Mirror the report as JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    /// Root seed; falls back to DEPTHSEP_SEED, then a fixed default.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compile a layered network into a shallow Fourier network with a certificate.
    Compile(CompileArgs),
    /// Lower-bound certificate for an oscillatory target against shallow nets.
    Certify(CertifyArgs),
    /// Spherical-harmonic tables and spread frames.
    Sphere(SphereArgs),
    /// Draw from a sampler, or summarize it with --stats.
    Sample(SampleArgs),
    /// Run an experiment config and write CSV outputs plus report.json.
    Bench(BenchArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum RegionKind {
    Ball,
    Cube,
}

#[derive(Args, Debug)]
struct CompileArgs {
    /// Network JSON (`d`, `layers` with `A`, `b`, `act`, `out_re`, `out_im`).
    #[arg(long)]
    net: PathBuf,
    /// Target sup-norm accuracy.
    #[arg(long, value_parser = unit_interval)]
    eps: f64,
    #[arg(long, default_value = "adaptive")]
    strategy: Strategy,
    /// Domain for two-hidden-layer nets; deeper nets always use the unit cube.
    #[arg(long, value_enum, default_value = "ball")]
    region: RegionKind,
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    radius: f64,
    #[arg(long, default_value_t = DEFAULT_ATOM_CAP)]
    atom_cap: usize,
    /// Also emit a one-hidden-layer ReLU net within eps of the Fourier net.
    #[arg(long)]
    resynthesize: bool,
    /// Probes used to measure the realized sup error.
    #[arg(long, default_value_t = 2000)]
    probes: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum WindowKind {
    Sinc2,
    Sinc4,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=4096))]
    d: u64,
    /// Number of hidden units of the competitor.
    #[arg(long = "n-units", default_value_t = 1.0, value_parser = non_negative)]
    n_units: f64,
    /// Frequency scale; defaults to d^2.
    #[arg(long, value_parser = non_negative)]
    r: Option<f64>,
    /// Comma-separated linear part (defaults to zeros).
    #[arg(long, value_delimiter = ',')]
    v: Option<Vec<f64>>,
    /// Comma-separated ReLU part (defaults to ones).
    #[arg(long, value_delimiter = ',')]
    w: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "sinc2")]
    window: WindowKind,
}

#[derive(Args, Debug)]
struct SphereArgs {
    /// Write the (k, N_k, sigma_k, lambda_k) table.
    #[arg(long, conflicts_with = "frame")]
    table: bool,
    /// Write the sign-vector frame with its coherence.
    #[arg(long)]
    frame: bool,
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..=1000))]
    d: u64,
    #[arg(long, default_value_t = 10)]
    kmax: usize,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum SamplerName {
    Sinc4,
    Gaussian,
    Sphere,
    Ball,
    Cube,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long, value_enum)]
    sampler: SamplerName,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=100_000))]
    d: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..=100_000_000))]
    n: u64,
    /// Gaussian standard deviation; defaults to d^-1/2.
    #[arg(long, value_parser = positive)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    radius: f64,
    /// Print summary statistics instead of the points.
    #[arg(long)]
    stats: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|e| e.to_string()).and_then(|v| {
        if v.is_finite() {
            Ok(v)
        } else {
            Err("must be finite".into())
        }
    })
}

fn positive(s: &str) -> Result<f64, String> {
    parse_f64(s).and_then(|v| {
        if v > 0.0 {
            Ok(v)
        } else {
            Err(format!("{v} is not positive"))
        }
    })
}

fn non_negative(s: &str) -> Result<f64, String> {
    parse_f64(s).and_then(|v| {
        if v >= 0.0 {
            Ok(v)
        } else {
            Err(format!("{v} is negative"))
        }
    })
}

fn unit_interval(s: &str) -> Result<f64, String> {
    parse_f64(s).and_then(|v| {
        if v > 0.0 && v < 1.0 {
            Ok(v)
        } else {
            Err(format!("{v} is not in (0, 1)"))
        }
    })
}

/// Invalid user input detected after argument parsing.
#[derive(Debug)]
struct ConfigError(String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<ShallowError>() {
            match e {
                ShallowError::BudgetExceeded { .. } | ShallowError::UnitBudget { .. } => {
                    return EXIT_BUDGET
                }
                ShallowError::Fourier(FourierError::BudgetExceeded { .. }) => return EXIT_BUDGET,
                ShallowError::Normalization(_)
                | ShallowError::Precondition(_)
                | ShallowError::Net(_) => return EXIT_CONFIG,
                _ => {}
            }
        }
        if let Some(FourierError::BudgetExceeded { .. }) = cause.downcast_ref::<FourierError>() {
            return EXIT_BUDGET;
        }
        if let Some(HarnessError::Config { .. }) = cause.downcast_ref::<HarnessError>() {
            return EXIT_CONFIG;
        }
        if cause.downcast_ref::<NetError>().is_some()
            || cause.downcast_ref::<ConfigError>().is_some()
        {
            return EXIT_CONFIG;
        }
    }
    1
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, bytes).with_context(|| format!("writing {}", p.display()))
        }
        None => std::io::stdout().write_all(bytes).map_err(Into::into),
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn write_certificate(dir: &Path, cert: &Certificate) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("certificate.json"), cert.to_json_string() + "\n")?;
    Ok(())
}

fn compile(args: &CompileArgs, json: bool) -> Result<()> {
    let net =
        LayeredNet::load(&args.net).with_context(|| format!("loading {}", args.net.display()))?;
    let opts = CompileOptions {
        strategy: args.strategy,
        atom_cap: args.atom_cap,
        ..CompileOptions::default()
    };
    let region = match (net.depth(), args.region) {
        (2, RegionKind::Ball) => Region::ball(args.radius),
        (2, RegionKind::Cube) => Region::cube(args.radius),
        _ => Region::cube(1.0),
    };
    let result = match net.depth() {
        2 => compile_two_layer(&net, region, args.eps, &opts),
        d if d > 2 => compile_deep(&net, args.eps, &opts),
        d => {
            return Err(config_error(format!(
                "need at least two hidden layers, got {d}"
            )))
        }
    };
    let (fnet, mut cert) = match result {
        Ok(v) => v,
        Err(ShallowError::BudgetExceeded {
            projected,
            cap,
            certificate,
        }) => {
            write_certificate(&args.out, &certificate)?;
            if json {
                println!("{}", certificate.to_json_string());
            }
            return Err(ShallowError::BudgetExceeded {
                projected,
                cap,
                certificate,
            }
            .into());
        }
        Err(e) => return Err(e.into()),
    };
    let sup = measure_sup(
        |x| net.eval(x).expect("input dimension checked"),
        &fnet,
        &region.domain(net.input_dim()),
        args.probes,
    );
    cert.measured_error = Some(sup.value);
    write_certificate(&args.out, &cert)?;
    fs::write(
        args.out.join("fourier_net.json"),
        fnet.to_json_string()? + "\n",
    )?;
    let mut files = vec!["certificate.json", "fourier_net.json"];
    if args.resynthesize {
        let (relu, rcert) = resynthesize(&fnet, &Activation::relu(), region, args.eps)?;
        fs::write(args.out.join("relu_net.json"), relu.to_json_string() + "\n")?;
        fs::write(
            args.out.join("resynthesis_certificate.json"),
            rcert.to_json_string() + "\n",
        )?;
        files.extend(["relu_net.json", "resynthesis_certificate.json"]);
    }
    if json {
        println!("{}", cert.to_json_string());
    } else {
        println!(
            "compiled {} pipeline: {} atoms, predicted error {:.4e}, measured {:.4e}; wrote {} to {}",
            serde_json::to_value(cert.pipeline)?.as_str().unwrap_or("?"),
            cert.realized.as_ref().map_or(0, |r| r.atoms),
            cert.predicted_error,
            sup.value,
            files.join(", "),
            args.out.display()
        );
    }
    Ok(())
}

fn certify(args: &CertifyArgs, json: bool) -> Result<()> {
    let d = args.d as usize;
    let v = args.v.clone().unwrap_or_else(|| vec![0.0; d]);
    let w = args.w.clone().unwrap_or_else(|| vec![1.0; d]);
    if v.len() != d || w.len() != d {
        return Err(config_error(format!("--v and --w need {d} entries")));
    }
    let r = args.r.unwrap_or((d * d) as f64);
    let target = OscillatoryTarget::new(r, v, w).map_err(|e| config_error(e.to_string()))?;
    let window = match args.window {
        WindowKind::Sinc2 => Window::sinc2(),
        WindowKind::Sinc4 => Window::sinc4(),
    };
    let cert = kappa_certificate(&window, &target, args.n_units)
        .map_err(|e| config_error(e.to_string()))?;
    if json {
        let mut value = serde_json::to_value(&cert)?;
        value["worked_example_bound"] = serde_json::json!(example_one_bound(d, args.n_units));
        value["worked_example_threshold"] = serde_json::json!(example_one_threshold(d));
        print_json(&value)?;
    } else {
        println!(
            "d = {d}, N = {}: kappa^2 = {:.6e}, lower bound {:.6}",
            args.n_units, cert.kappa_sq, cert.lower_bound
        );
        if cert.vacuous {
            println!("vacuous: {}", cert.reasons.join("; "));
        }
    }
    Ok(())
}

fn sphere(args: &SphereArgs, json: bool) -> Result<()> {
    let d = args.d as usize;
    if args.frame {
        let frame = spread_frame(d).map_err(|e| config_error(e.to_string()))?;
        let value = serde_json::json!({ "d": d, "coherence": coherence(&frame), "vectors": frame });
        let text = serde_json::to_string_pretty(&value)? + "\n";
        write_output(args.out.as_deref(), text.as_bytes())?;
        if json && args.out.is_some() {
            print!("{text}");
        }
        return Ok(());
    }
    if !args.table {
        return Err(config_error("choose --table or --frame"));
    }
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["k", "N_k", "sigma_k", "lambda_k"])?;
    let mut rows = Vec::new();
    for k in 0..=args.kmax {
        let n = harmonic_dim(d, k).map_err(|e| config_error(e.to_string()))?;
        let sigma = if k % 2 == 0 {
            Some(blaschke_levy_sigma(d, k)?)
        } else {
            None
        };
        let lambda = funk_hecke(f64::abs, d, k)?.value;
        let n_str = n
            .exact
            .map_or_else(|| format!("{}", n.value()), |v| v.to_string());
        wtr.write_record([
            k.to_string(),
            n_str,
            sigma.map_or_else(String::new, |s| s.to_string()),
            lambda.to_string(),
        ])?;
        rows.push(
            serde_json::json!({ "k": k, "N_k": n.value(), "sigma_k": sigma, "lambda_k": lambda }),
        );
    }
    let bytes = wtr.into_inner()?;
    write_output(args.out.as_deref(), &bytes)?;
    if json && args.out.is_some() {
        print_json(&rows)?;
    }
    Ok(())
}

fn sample(args: &SampleArgs, seed: u64, json: bool) -> Result<()> {
    let d = args.d as usize;
    let kind = match args.sampler {
        SamplerName::Sinc4 => SamplerKind::ProductSinc4 { d },
        SamplerName::Gaussian => SamplerKind::Gaussian {
            d,
            sigma: args.sigma.unwrap_or(1.0 / (d as f64).sqrt()),
        },
        SamplerName::Sphere => SamplerKind::UniformSphere { d },
        SamplerName::Ball => SamplerKind::UniformBall {
            d,
            radius: args.radius,
        },
        SamplerName::Cube => SamplerKind::UniformCube {
            d,
            radius: args.radius,
        },
    };
    let n = args.n as usize;
    let mut wtr = csv::Writer::from_writer(Vec::new());
    if args.stats {
        let stats = sampler_stats(&kind, n, seed)?;
        wtr.write_record(["stat", "value"])?;
        for s in &stats {
            wtr.write_record([s.stat.clone(), s.value.to_string()])?;
        }
        if json {
            print_json(&stats)?;
        }
    } else {
        wtr.write_record((0..d).map(|j| format!("x{j}")))?;
        for x in Sampler::new(kind, seed).sample(n) {
            wtr.write_record(x.iter().map(f64::to_string))?;
        }
    }
    let bytes = wtr.into_inner()?;
    if !(json && args.stats && args.out.is_none()) {
        write_output(args.out.as_deref(), &bytes)?;
    }
    Ok(())
}

fn bench(args: &BenchArgs, seed: Option<u64>, json: bool) -> Result<()> {
    let mut cfg = load_config(&args.config)?;
    if seed.is_some() {
        cfg.seed = seed;
    }
    let report = run_experiment(&cfg, &args.out)?;
    if json {
        print_json(&report)?;
    } else {
        for o in &report.outputs {
            println!(
                "{} ({} rows) -> {}",
                o.kind,
                o.rows,
                args.out.join(&o.file).display()
            );
        }
        println!(
            "report: {} (config sha256 {}, seed {})",
            args.out.join("report.json").display(),
            report.config_sha256,
            report.seed
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t as usize)
            .build_global()?;
    }
    let seed = cli.seed.unwrap_or_else(default_seed);
    match &cli.command {
        Command::Compile(a) => compile(a, cli.json),
        Command::Certify(a) => certify(a, cli.json),
        Command::Sphere(a) => sphere(a, cli.json),
        Command::Sample(a) => sample(a, seed, cli.json),
        Command::Bench(a) => bench(a, cli.seed, cli.json),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
