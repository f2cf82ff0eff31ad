use clap::{Parser, Subcommand, ValueEnum};
use cpt::fileio::{load_model, load_scheme, load_system, load_witness, model_to_string};
use cpt::logic::parse::parse_formula;
use cpt::models::{
    battery, experiment_majority, experiment_transfer, experiment_unary, gen_random_graph,
    qf_pair_formulas, unary_structure,
};
use cpt::scheme::{run, StopVariant, TimingFunction};
use cpt::symmetry::ksystem::{check_dichotomy, check_k_system, check_super, DichotomyMode};
use cpt::symmetry::lifting::{check_lifting, full_successor, zero_lifting};
use cpt::symmetry::support_logic::support_game_equiv;
use cpt::symmetry::witness::check_witness;
use cpt::symmetry::{Report, SupportFamily};
use cpt::{Error, Result};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "cpt", about = "Inductive schemes over hereditarily finite sets, with symmetry checkers")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exhaustive,
    Definable,
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    Unary,
    Majority,
    Transfer,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scheme on a model and print the verdict line.
    Run {
        model: PathBuf,
        scheme: PathBuf,
        /// Stopping variant: 1 constants halt, 2 cost budget, 3 size budget, 4 family budget.
        #[arg(long, default_value_t = 1)]
        variant: u8,
        /// Timing function, e.g. "poly 2", "const 5", "log", "infinite".
        #[arg(long, default_value = "poly 1")]
        timing: String,
        /// Sentence evaluated at the stop stage.
        #[arg(long, default_value = "exists x (x = x)")]
        chi: String,
        /// Write the stage trace as JSON lines.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Check the k-system clauses of a system file.
    CheckSystem {
        system: PathBuf,
        /// Also check the super-system key/entry condition.
        #[arg(long = "super")]
        super_check: bool,
        /// Also check the dichotomy, exhaustively or over definable partitions.
        #[arg(long, value_enum)]
        dichotomy_mode: Option<Mode>,
    },
    /// Check the witness clauses of a witness file.
    CheckWitness {
        witness: PathBuf,
        /// Also check both endpoint systems for the super condition.
        #[arg(long = "super")]
        super_check: bool,
    },
    /// Check the zero lifting of a system, optionally through successor steps.
    CheckLifting {
        system: PathBuf,
        /// Number of full-successor steps to take and re-check.
        #[arg(long, default_value_t = 0)]
        steps: usize,
        /// Number of dynamic constant slots in the lifting.
        #[arg(long, default_value_t = 0)]
        constants: usize,
    },
    /// Sample an undirected graph with independent edges and write it out.
    GenRandom {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        prob: f64,
        #[arg(long)]
        seed: u64,
        /// Output model file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a two-model experiment and print its JSON report.
    Experiment {
        #[arg(value_enum)]
        which: Experiment,
        /// Universe size for unary and majority.
        #[arg(long)]
        n: Option<usize>,
        /// Predicate sizes for unary.
        #[arg(long)]
        p1: Option<usize>,
        #[arg(long)]
        p2: Option<usize>,
        /// Model files for transfer.
        #[arg(long)]
        model1: Option<PathBuf>,
        #[arg(long)]
        model2: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        q: usize,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value = "const 2")]
        timing: String,
        /// Battery entries run in parallel; output order stays fixed.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Play the support game between two models and report equivalence.
    Game {
        model1: PathBuf,
        model2: PathBuf,
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Support size bound; both sides use all subsets up to it.
        #[arg(long, default_value_t = 1)]
        q: usize,
    },
}

fn print_report(rep: &Report) -> bool {
    let lines = rep.json_lines();
    if !lines.is_empty() {
        println!("{lines}");
    }
    rep.pass()
}

fn cmd_run(
    model: &PathBuf,
    scheme: &PathBuf,
    variant: u8,
    timing: &str,
    chi: &str,
    trace_out: Option<&PathBuf>,
) -> Result<bool> {
    let m = load_model(model)?;
    let u = load_scheme(scheme, &m.vocab)?;
    let t_fun = TimingFunction::parse(timing)?;
    let variant = StopVariant::from_index(variant)?;
    let chi = parse_formula(chi, &m.vocab, u.dialect)?;
    let mut store = m.store();
    let (verdict, trace) = run(&mut store, &m, &u, &t_fun, variant, &chi)?;
    println!("verdict: {verdict}");
    if let Some(path) = trace_out {
        let mut out = String::new();
        for stage in &trace {
            out.push_str(&serde_json::to_string(stage).expect("trace stages serialize"));
            out.push('\n');
        }
        std::fs::write(path, out)?;
    }
    Ok(true)
}

fn cmd_check_system(system: &PathBuf, super_check: bool, mode: Option<Mode>) -> Result<bool> {
    let y = load_system(system)?;
    let mut rep = check_k_system(&y);
    match mode {
        Some(Mode::Exhaustive) => {
            let (d, _) = check_dichotomy(&y, &DichotomyMode::Exhaustive)?;
            rep.merge("dichotomy ", d);
        }
        Some(Mode::Definable) => {
            let formulas = qf_pair_formulas(&y.m)?;
            let (d, _) = check_dichotomy(&y, &DichotomyMode::Definable(&formulas))?;
            rep.merge("dichotomy ", d);
        }
        None => {}
    }
    if super_check {
        rep.merge("super ", check_super(&y)?);
    }
    Ok(print_report(&rep))
}

fn cmd_check_witness(witness: &PathBuf, super_check: bool) -> Result<bool> {
    let (w, y1, y2) = load_witness(witness)?;
    let mut rep = check_witness(&w, &y1, &y2, &[])?;
    if super_check {
        rep.merge("super left ", check_super(&y1)?);
        rep.merge("super right ", check_super(&y2)?);
    }
    Ok(print_report(&rep))
}

fn cmd_check_lifting(system: &PathBuf, steps: usize, constants: usize) -> Result<bool> {
    let y = load_system(system)?;
    let mut store = y.m.store();
    let mut z = zero_lifting(&y, &store, constants);
    let mut rep = Report::default();
    rep.merge("step 0: ", check_lifting(&y, &store, &z));
    for step in 1..=steps {
        z = full_successor(&y, &mut store, &z)?;
        rep.merge(&format!("step {step}: "), check_lifting(&y, &store, &z));
    }
    Ok(print_report(&rep))
}

fn cmd_gen_random(n: usize, prob: f64, seed: u64, out: Option<&PathBuf>) -> Result<bool> {
    let m = gen_random_graph(n, prob, seed)?;
    let text = model_to_string(&m);
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn cmd_experiment(
    which: Experiment,
    n: Option<usize>,
    p1: Option<usize>,
    p2: Option<usize>,
    model1: Option<&PathBuf>,
    model2: Option<&PathBuf>,
    q: usize,
    k: usize,
    timing: &str,
    jobs: usize,
) -> Result<bool> {
    let t_fun = TimingFunction::parse(timing)?;
    let need = |v: Option<usize>, flag: &str| {
        v.ok_or_else(|| Error::invalid(format!("this experiment needs --{flag}")))
    };
    let rep = match which {
        Experiment::Unary => {
            let n = need(n, "n")?;
            let p1 = need(p1, "p1")?;
            let p2 = need(p2, "p2")?;
            let entries = battery(&unary_structure(n, p1)?.vocab)?;
            experiment_unary(n, p1, p2, &t_fun, &entries, jobs)?
        }
        Experiment::Majority => {
            let n = need(n, "n")?;
            let entries = battery(&unary_structure(n, n / 2)?.vocab)?;
            experiment_majority(n, &t_fun, &entries, jobs)?
        }
        Experiment::Transfer => {
            let m1 = load_model(
                model1.ok_or_else(|| Error::invalid("transfer needs --model1".to_string()))?,
            )?;
            let m2 = load_model(
                model2.ok_or_else(|| Error::invalid("transfer needs --model2".to_string()))?,
            )?;
            let entries = battery(&m1.vocab)?;
            experiment_transfer(&m1, &m2, q, k, &t_fun, &entries, jobs)?
        }
    };
    print!("{}", rep.json_lines());
    Ok(rep.pass)
}

fn cmd_game(model1: &PathBuf, model2: &PathBuf, k: usize, q: usize) -> Result<bool> {
    let m1 = load_model(model1)?;
    let m2 = load_model(model2)?;
    let i1 = SupportFamily::size_at_most(m1.n(), q);
    let i2 = SupportFamily::size_at_most(m2.n(), q);
    let g = support_game_equiv(&m1, &i1, &m2, &i2, k)?;
    let line = serde_json::json!({
        "equivalent": g.equivalent,
        "rounds": g.rounds,
        "positions": g.positions,
        "survivors": g.survivors,
        "distinguisher": g.distinguisher.as_ref().map(|f| f.to_string()),
    });
    println!("{line}");
    Ok(true)
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Run {
            model,
            scheme,
            variant,
            timing,
            chi,
            trace_out,
        } => cmd_run(&model, &scheme, variant, &timing, &chi, trace_out.as_ref()),
        Cmd::CheckSystem {
            system,
            super_check,
            dichotomy_mode,
        } => cmd_check_system(&system, super_check, dichotomy_mode),
        Cmd::CheckWitness {
            witness,
            super_check,
        } => cmd_check_witness(&witness, super_check),
        Cmd::CheckLifting {
            system,
            steps,
            constants,
        } => cmd_check_lifting(&system, steps, constants),
        Cmd::GenRandom { n, prob, seed, out } => cmd_gen_random(n, prob, seed, out.as_ref()),
        Cmd::Experiment {
            which,
            n,
            p1,
            p2,
            model1,
            model2,
            q,
            k,
            timing,
            jobs,
        } => cmd_experiment(
            which,
            n,
            p1,
            p2,
            model1.as_ref(),
            model2.as_ref(),
            q,
            k,
            &timing,
            jobs,
        ),
        Cmd::Game {
            model1,
            model2,
            k,
            q,
        } => cmd_game(&model1, &model2, k, q),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Invalid(_) => ExitCode::from(1),
                Error::Parse { .. } | Error::Io(_) => ExitCode::from(2),
            }
        }
    }
}
