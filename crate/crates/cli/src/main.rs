use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ncde_cli::commands::{self, plan};
use ncde_cli::config::{RunConfig, OUT_ENV};
use ncde_core::verify::VerifyOptions;
use ncde_core::{Error, FieldKind, Split};

const EXIT_VERIFY: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(
    name = "ncde",
    version,
    about = "Neural CDE time-series classifiers: train, compare and verify"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Run a single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
    /// Validate the configuration and print the plan without training.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured field kind once per seed.
    Train(RunArgs),
    /// Train matrix and Jacobian fields with matched sizes and seeds.
    Compare(RunArgs),
    /// Score a saved checkpoint on one split.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        /// Also write eval.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parameter counts for both field kinds.
    Params {
        #[arg(short, long, default_value_t = 4)]
        u: usize,
        #[arg(short, long, default_value_t = 32)]
        v: usize,
        #[arg(short, long, default_value_t = 128)]
        d: usize,
        #[arg(short, long, default_value_t = 20)]
        classes: usize,
        /// Search for dimensions whose field-part ratio is closest to this.
        #[arg(long)]
        find_ratio: Option<f64>,
        #[arg(long)]
        json: bool,
    },
    /// Run the numerical oracle suite.
    Verify {
        #[arg(long, hide = true)]
        corrupt_jvp_sign: bool,
    },
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_numeric() { EXIT_NUMERIC } else { EXIT_CONFIG })
}

fn load(args: &RunArgs) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seeds = vec![s];
    }
    Ok(cfg)
}

fn run(args: RunArgs, fields: &[FieldKind]) -> ExitCode {
    let cfg = match load(&args) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let root = cfg.output_root(args.out.as_deref());
    if args.dry_run {
        println!(
            "{}",
            serde_json::to_string_pretty(&plan(&cfg, &root, fields)).expect("plan serializes")
        );
        return ExitCode::SUCCESS;
    }
    let mut log = |line: String| eprintln!("{line}");
    let result = if fields.len() == 1 {
        commands::train_cmd(&cfg, &root, &mut log).map(|s| s.line())
    } else {
        commands::compare_cmd(&cfg, &root, &mut log).map(|c| {
            let lines: Vec<String> = c.rows.iter().map(|r| r.line()).collect();
            format!("{}\n{}", c.table(), lines.join("\n"))
        })
    };
    match result {
        Ok(text) => {
            println!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Train(args) => {
            let field = match RunConfig::load(&args.config) {
                Ok(c) => c.model.field,
                Err(e) => return fail(&e),
            };
            run(args, &[field])
        }
        Command::Compare(args) => run(args, &[FieldKind::Matrix, FieldKind::JacobianTruncated]),
        Command::Eval {
            config,
            checkpoint,
            split,
            out,
        } => {
            let split = match split {
                SplitArg::Train => Split::Train,
                SplitArg::Val => Split::Val,
                SplitArg::Test => Split::Test,
            };
            let record = RunConfig::load(&config).and_then(|cfg| commands::eval_cmd(&cfg, &checkpoint, split));
            match record {
                Ok(r) => {
                    let text = serde_json::to_string_pretty(&r).expect("record serializes");
                    if let Some(dir) = out {
                        if let Err(e) =
                            std::fs::create_dir_all(&dir).and_then(|_| std::fs::write(dir.join("eval.json"), &text))
                        {
                            return fail(&e.into());
                        }
                    }
                    println!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Params {
            u,
            v,
            d,
            classes,
            find_ratio,
            json,
        } => {
            if [u, v, d, classes].contains(&0) {
                eprintln!("error: dimensions must be positive");
                return ExitCode::from(EXIT_CONFIG);
            }
            if let Some(target) = find_ratio {
                if !(target.is_finite() && target > 0.0) {
                    eprintln!("error: --find-ratio needs a positive number");
                    return ExitCode::from(EXIT_CONFIG);
                }
                let m = commands::find_ratio_cmd(target);
                if json {
                    println!("{}", serde_json::to_string_pretty(&m).expect("match serializes"));
                } else {
                    println!(
                        "u={} v={} d={} matrix field={} jacobian field={} ratio={:.4}",
                        m.u, m.v, m.d, m.matrix, m.jacobian, m.ratio
                    );
                }
                return ExitCode::SUCCESS;
            }
            let r = commands::params_cmd(u, v, d, classes);
            if json {
                println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
            } else {
                print!("{}", r.text());
            }
            ExitCode::SUCCESS
        }
        Command::Verify { corrupt_jvp_sign } => {
            let results = commands::verify_cmd(VerifyOptions { corrupt_jvp_sign });
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
            if failed.is_empty() {
                println!("all {} checks passed", results.len());
                ExitCode::SUCCESS
            } else {
                eprintln!("failed checks: {}", failed.join(", "));
                ExitCode::from(EXIT_VERIFY)
            }
        }
    }
}
