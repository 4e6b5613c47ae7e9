//! Subcommand implementations.

use std::fmt::Write as _;
use std::path::PathBuf;

use sdf_core::{
    canonical_json, generate_pairs, load_csv, load_model, read_pairs_csv, save_model,
    train_cascade, write_pairs_csv, Error, LabelColumn, Result, TrainReport,
};

use crate::args::{
    Cli, Command, ExperimentArgs, GlobalOpts, ModeArg, PairsArgs, PredictArgs, TrainArgs,
};
use crate::config::load_cascade_config;
use crate::experiment::{run_experiment, ExperimentSpec, Mode};

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Pairs(args) => cmd_pairs(&cli.global, args),
        Command::Train(args) => cmd_train(&cli.global, args),
        Command::Predict(args) => cmd_predict(&cli.global, args),
        Command::Experiment(args) => cmd_experiment(&cli.global, args),
    }
}

fn parse_label_col(text: &str) -> Result<LabelColumn> {
    text.parse()
}

fn cmd_pairs(global: &GlobalOpts, args: PairsArgs) -> Result<()> {
    let ds = load_csv(&args.input, parse_label_col(&args.label_col)?, args.has_header)?;
    let pairs = generate_pairs(&ds, args.n, args.balance, global.seed)?;
    write_pairs_csv(&pairs, &args.out)?;
    if !global.quiet {
        let similar = pairs.pairs().iter().filter(|p| p.y == 0).count();
        println!(
            "wrote {} pairs ({} similar, {} dissimilar) to {}",
            pairs.len(),
            similar,
            pairs.len() - similar,
            args.out.display()
        );
    }
    Ok(())
}

fn training_log(report: &TrainReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "levels_trained {}", report.levels.len());
    let _ = writeln!(out, "levels_kept {}", report.kept_levels);
    for level in &report.levels {
        match level.val_accuracy {
            Some(acc) => {
                let _ = writeln!(out, "level {} val_accuracy {acc}", level.level);
            }
            None => {
                let _ = writeln!(out, "level {} val_accuracy none", level.level);
            }
        }
        for qp in &level.qp {
            let _ = writeln!(
                out,
                "level {} slot {} fold {} objective_uniform {} objective_final {} iterations {}",
                level.level, qp.slot, qp.fold, qp.objective_uniform, qp.objective_final,
                qp.iterations
            );
        }
    }
    out
}

fn cmd_train(global: &GlobalOpts, args: TrainArgs) -> Result<()> {
    let mut cfg = load_cascade_config(global.config.as_deref(), global.seed)?;
    cfg.baseline = args.baseline;

    let ds = load_csv(&args.samples, parse_label_col(&args.label_col)?, args.has_header)?;
    let pairs = read_pairs_csv(&args.pairs, ds.len())?;
    let (model, report) = train_cascade(&ds, &pairs, &cfg)?;
    save_model(&model, &args.out)?;

    let log_path: PathBuf = args.log.unwrap_or_else(|| args.out.with_extension("log"));
    std::fs::write(&log_path, training_log(&report)).map_err(|e| Error::io(&log_path, e))?;

    if !global.quiet {
        println!(
            "trained {} level(s) (kept {} of {}), model {} log {}",
            model.levels().len(),
            report.kept_levels,
            report.levels.len(),
            args.out.display(),
            log_path.display()
        );
        if let Some(acc) = model.metadata().validation_trace.last() {
            println!(
                "validation trace: {:?} (last {acc:.4})",
                model.metadata().validation_trace
            );
        }
    }
    Ok(())
}

fn cmd_predict(global: &GlobalOpts, args: PredictArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let ds = load_csv(&args.samples, parse_label_col(&args.label_col)?, args.has_header)?;
    if ds.d() != model.d() {
        return Err(Error::data(format!(
            "samples have {} features but the model expects {}",
            ds.d(),
            model.d()
        )));
    }
    let pairs = read_pairs_csv(&args.pairs, ds.len())?;
    let verdicts = model.predict_batch_with_tau(&ds, &pairs, args.tau)?;

    let mut out = String::from("i,j,diff,label\n");
    for (pair, verdict) in pairs.pairs().iter().zip(&verdicts) {
        let _ = writeln!(out, "{},{},{},{}", pair.i, pair.j, verdict.diff, verdict.label);
    }
    match &args.out {
        Some(path) => std::fs::write(path, out).map_err(|e| Error::io(path, e))?,
        None => print!("{out}"),
    }
    if !global.quiet {
        if let Some(path) = &args.out {
            println!("wrote {} verdicts to {}", verdicts.len(), path.display());
        }
    }
    Ok(())
}

fn cmd_experiment(global: &GlobalOpts, args: ExperimentArgs) -> Result<()> {
    let base = load_cascade_config(global.config.as_deref(), global.seed)?;
    let spec = ExperimentSpec {
        dataset: args.data,
        label_col: parse_label_col(&args.label_col)?,
        has_header: args.has_header,
        t_values: args.t,
        n_values: args.n,
        repetitions: args.reps,
        seed: global.seed,
        lambdas: args.lambdas,
        mode: match args.mode {
            ModeArg::Gcf => Mode::Gcf,
            ModeArg::Sdf => Mode::Sdf,
            ModeArg::Both => Mode::Both,
        },
        tau: args.tau,
        balance: args.balance,
        base,
    };
    let report = run_experiment(&spec, global.quiet)?;
    if let Some(path) = &args.out {
        std::fs::write(path, canonical_json(&report)?).map_err(|e| Error::io(path, e))?;
        if !global.quiet {
            println!("report written to {}", path.display());
        }
    }
    Ok(())
}
