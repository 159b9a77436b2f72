use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use diffsurv::censoring::{build_qp, build_topk_qp, SurvivalRecord};
use diffsurv::data::{generate_synthetic, load_csv, write_csv, SyntheticParams};
use diffsurv::model::Mlp;
use diffsurv::relaxperm::RelaxationKind;
use diffsurv::sortnet::{ComparatorSchedule, NetworkKind};
use diffsurv::trainer::{evaluate, train, BetaSetting, LossKind, TrainConfig};
use diffsurv::verify::{check_end_to_end_gradient, run_all, VerifyOptions};
use diffsurv::Error;

/// Differentiable sorting for censored survival data.
#[derive(Parser)]
#[command(name = "diffsurv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset and its truth sidecar.
    GenData(GenDataArgs),
    /// Train a model and write report.json, epochs.csv, params.bin and test.csv.
    Train(TrainArgs),
    /// Score a dataset with a saved parameter file.
    Eval(EvalArgs),
    /// Print the possible-permutation matrix of a labelled set.
    Qp(QpArgs),
    /// Print a comparator schedule.
    Schedule(ScheduleArgs),
    /// Finite-difference check of the end-to-end gradient.
    Gradcheck(GradcheckArgs),
    /// Run the self-check suite.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long, default_value_t = 5000)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    dim: usize,
    #[arg(long, default_value_t = 0.3)]
    censor_frac: f64,
    #[arg(long, default_value_t = 30.0)]
    mean_time: f64,
    /// Multiplier on the standardized latent risk.
    #[arg(long, default_value_t = 10.0)]
    risk_scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// TOML config; flags given here take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training CSV (`time,event,<features>`).
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "run")]
    out_dir: PathBuf,
    /// diffsurv, diffsurv-topk, cox-pl, cox-pl-pairwise or ranking [default: diffsurv]
    #[arg(long)]
    loss: Option<LossKind>,
    /// odd-even or bitonic [default: odd-even]
    #[arg(long)]
    network: Option<NetworkKind>,
    /// logistic or cauchy [default: cauchy]
    #[arg(long)]
    relaxation: Option<RelaxationKind>,
    /// Steepness, or `auto` for the network's schedule [default: auto]
    #[arg(long)]
    beta: Option<BetaSetting>,
    /// Risk-set size [default: 8]
    #[arg(long = "n", id = "risk_set_size")]
    risk_set_size: Option<usize>,
    /// Risk sets per batch [default: 32]
    #[arg(long)]
    batch_size: Option<usize>,
    /// [default: 0.001]
    #[arg(long)]
    lr: Option<f64>,
    /// [default: 100000]
    #[arg(long)]
    max_steps: Option<usize>,
    /// Epochs without validation improvement [default: 10]
    #[arg(long)]
    patience: Option<usize>,
    /// Top-k fraction for top-k training and evaluation [default: 0.1]
    #[arg(long)]
    topk_frac: Option<f64>,
    /// Comma-separated hidden layer sizes [default: 32,32]
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    /// [default: 0]
    #[arg(long)]
    dropout: Option<f64>,
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Top-k as a count (`25`) or a percentage of the data (`10%`).
    #[arg(long)]
    k: Option<String>,
    /// Also write the metrics JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct QpArgs {
    /// Comma-separated observed times.
    #[arg(long, value_delimiter = ',', required = true)]
    times: Vec<f64>,
    /// Comma-separated event flags (1 event, 0 censored).
    #[arg(long, value_delimiter = ',', required = true)]
    events: Vec<u8>,
    /// Restrict to the top-k ranks.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long, default_value = "odd-even")]
    network: NetworkKind,
    #[arg(long)]
    n: usize,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 10)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Reverse every conditional swap (mutation fixture).
    #[arg(long, hide = true)]
    flip_swap_sign: bool,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } => 2,
        _ => 3,
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> diffsurv::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.into()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn gen_data(args: GenDataArgs) -> diffsurv::Result<()> {
    let params = SyntheticParams {
        n_samples: args.n,
        dim: args.dim,
        censor_frac: args.censor_frac,
        mean_time: args.mean_time,
        risk_scale: args.risk_scale,
        seed: args.seed,
    };
    let data = generate_synthetic(&params)?;
    write_csv(&data, &args.out)?;
    eprintln!("{}", serde_json::to_string(&params).unwrap());
    println!("wrote {} samples ({} events) to {}", data.len(), data.n_events(), args.out.display());
    Ok(())
}

fn resolve_config(args: &TrainArgs) -> diffsurv::Result<TrainConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            toml::from_str(&text).map_err(|e| Error::Config {
                field: path.display().to_string(),
                msg: e.message().to_string(),
            })?
        }
        None => TrainConfig::default(),
    };
    macro_rules! set {
        ($($field:ident = $value:expr),*) => {
            $(if let Some(v) = $value.clone() { config.$field = v; })*
        };
    }
    set!(
        loss = args.loss,
        network = args.network,
        relaxation = args.relaxation,
        beta = args.beta,
        risk_set_size = args.risk_set_size,
        batch_size = args.batch_size,
        lr = args.lr,
        max_steps = args.max_steps,
        patience = args.patience,
        topk_frac = args.topk_frac,
        hidden_sizes = args.hidden,
        dropout = args.dropout,
        seed = args.seed
    );
    config.validate()?;
    Ok(config)
}

fn run_train(args: TrainArgs) -> diffsurv::Result<()> {
    let config = resolve_config(&args)?;
    eprintln!("{}", toml::to_string(&config).expect("config serializes"));
    let data = load_csv(&args.data)?;
    let outcome = train(&config, &data)?;
    std::fs::create_dir_all(&args.out_dir)?;
    let report = &outcome.report;
    write_json(&args.out_dir.join("report.json"), report)?;
    std::fs::write(args.out_dir.join("epochs.csv"), report.epochs_csv())?;
    outcome.raw_model.save(&args.out_dir.join("params.bin"))?;
    write_csv(&outcome.test, &args.out_dir.join("test.csv"))?;
    println!(
        "best epoch {} ({} {:.4}); test c-index {:.4}, top-{} accuracy {:.4}; {} steps",
        report.best_epoch,
        report.val_metric,
        report.best_val_metric,
        report.test.c_index,
        report.test_k,
        report.test.topk_correct.unwrap_or(f64::NAN),
        report.steps
    );
    Ok(())
}

fn parse_k(text: &str, n: usize) -> diffsurv::Result<usize> {
    let bad = || Error::Config { field: "k".into(), msg: format!("`{text}` is not a count or a percentage") };
    match text.strip_suffix('%') {
        Some(p) => {
            let frac = p.trim().parse::<f64>().map_err(|_| bad())? / 100.0;
            Ok(((frac * n as f64).round() as usize).max(1))
        }
        None => text.parse().map_err(|_| bad()),
    }
}

fn run_eval(args: EvalArgs) -> diffsurv::Result<()> {
    let model = Mlp::load(&args.params)?;
    let data = load_csv(&args.data)?;
    let k = args.k.as_deref().map(|s| parse_k(s, data.len())).transpose()?;
    let result = evaluate(&model, &data, k)?;
    let text = serde_json::to_string_pretty(&result).unwrap();
    println!("{text}");
    if let Some(out) = &args.out {
        write_json(out, &result)?;
    }
    Ok(())
}

fn run_qp(args: QpArgs) -> diffsurv::Result<()> {
    if args.times.len() != args.events.len() {
        return Err(Error::Config {
            field: "events".into(),
            msg: format!("{} times but {} event flags", args.times.len(), args.events.len()),
        });
    }
    let mut records = Vec::new();
    for (&t, &e) in args.times.iter().zip(&args.events) {
        if e > 1 {
            return Err(Error::Config { field: "events".into(), msg: format!("flag {e} is not 0 or 1") });
        }
        records.push(SurvivalRecord::new(t, e == 1, Vec::new())?);
    }
    let (q, labels) = match args.k {
        Some(k) => {
            let top = build_topk_qp(&records, k)?;
            let labels: Vec<String> = top.labels.iter().map(|l| format!("{l:?}").to_lowercase()).collect();
            (top.qp, Some(labels))
        }
        None => (build_qp(&records)?, None),
    };
    for (i, row) in q.row_strings().iter().enumerate() {
        match &labels {
            Some(l) => println!("{row} {}", l[i]),
            None => println!("{row}"),
        }
    }
    Ok(())
}

fn run_verify(args: VerifyArgs) -> diffsurv::Result<bool> {
    let opts = VerifyOptions { flip_swap_sign: args.flip_swap_sign, seed: args.seed };
    let outcomes = run_all(&opts);
    for o in &outcomes {
        println!(
            "[{}] {:>2} {:<22} {:>7.2}s  {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.id,
            o.name,
            o.seconds,
            o.detail
        );
    }
    Ok(outcomes.iter().all(|o| o.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(a) => gen_data(a).map(|_| true),
        Command::Train(a) => run_train(a).map(|_| true),
        Command::Eval(a) => run_eval(a).map(|_| true),
        Command::Qp(a) => run_qp(a).map(|_| true),
        Command::Schedule(a) => ComparatorSchedule::new(a.network, a.n).map(|s| {
            print!("{s}");
            true
        }),
        Command::Gradcheck(a) => check_end_to_end_gradient(a.instances, &VerifyOptions { seed: a.seed, ..Default::default() })
            .map(|(passed, detail)| {
                println!("{detail}");
                passed
            }),
        Command::Verify(a) => run_verify(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
