use std::fmt::Write as _;

use camel::correlation::{AdmmSettings, CorrelationSettings, LambdaRule};
use camel::dataset::{format_label_matrix, parse_labels};
use camel::synthetic::{make_multilabel, SyntheticConfig};
use camel::textio::{format_matrix, parse_matrix, read_to_string};
use camel::trainer::sign_labels;
use camel::tuner::{cross_validate, nested_cross_validate, Grid, GridPoint, TunerSettings};
use camel::{
    build_collaboration_matrix, evaluate_lenient, learn_correlation_matrix, load_dataset,
    load_model, model_to_string, train, Error, Metric, Result, TrainerConfig,
};
use serde_json::json;

use crate::output::OutputDir;
use crate::{
    Cli, Command, CorrArgs, CorrelationArgs, CvArgs, DataArgs, EvalArgs, FitArgs, Format,
    PredictArgs, SynthArgs, TrainArgs,
};

pub enum Outcome {
    Done,
    /// Outputs were written but some fit stopped at its iteration limit.
    NotConverged(String),
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Corr(a) => corr(a, cli.format),
        Command::Train(a) => train_cmd(a, cli.format),
        Command::Predict(a) => predict(a),
        Command::Eval(a) => eval(a, cli.format),
        Command::Cv(a) => cv(a, cli.format),
        Command::Describe(a) => describe(a, cli.format),
        Command::Synth(a) => synth(a),
    }
}

fn correlation_settings(a: &CorrelationArgs) -> CorrelationSettings<f64> {
    CorrelationSettings {
        admm: AdmmSettings {
            rho: a.rho,
            tol_abs: a.admm_tol_abs,
            tol_rel: a.admm_tol_rel,
            max_iter: a.admm_max_iter,
        },
        lambda: match a.corr_lambda {
            Some(l) => LambdaRule::Fixed(l),
            None => LambdaRule::Heuristic {
                scale: a.corr_lambda_scale,
            },
        },
    }
}

fn trainer_config(fit: &FitArgs, alpha: f64, lambda2: f64) -> Result<TrainerConfig<f64>> {
    let config = TrainerConfig {
        lambda1: fit.lambda1,
        lambda2,
        alpha,
        outer_tol: fit.outer_tol,
        max_outer_iter: fit.max_outer_iter,
        correlation: correlation_settings(&fit.correlation),
    };
    config.validate()?;
    Ok(config)
}

fn with_warning(warning: Option<&str>, body: String) -> String {
    match warning {
        Some(w) => format!("# warning: {w}\n{body}"),
        None => body,
    }
}

fn outcome(warning: Option<String>) -> Outcome {
    warning.map_or(Outcome::Done, Outcome::NotConverged)
}

fn corr_warning(unconverged: &[usize]) -> Option<String> {
    (!unconverged.is_empty()).then(|| {
        format!("correlation solve did not converge for label(s) {unconverged:?}")
    })
}

fn corr(a: &CorrArgs, format: Format) -> Result<Outcome> {
    let (labels, names) = parse_labels::<f64>(&read_to_string(&a.labels)?)?;
    let settings = correlation_settings(&a.correlation);
    settings.admm.validate()?;
    let fit = learn_correlation_matrix(&labels, &settings)?;
    let model = build_collaboration_matrix(fit.s_matrix.clone(), a.alpha)?;
    let unconverged: Vec<usize> = fit
        .columns
        .iter()
        .filter(|c| !c.converged)
        .map(|c| c.label)
        .collect();
    let warning = corr_warning(&unconverged);
    let w = warning.as_deref();

    let out = OutputDir::create(&a.output)?;
    out.write("S.txt", &with_warning(w, format_matrix(model.s_matrix())))?;
    out.write("G.txt", &with_warning(w, format_matrix(model.g_matrix())))?;
    match format {
        Format::Text => {
            let mut log = String::from("label\tlambda\titerations\tconverged\tprimal_residual\tdual_residual\tconstant_label\tnonzeros\n");
            for c in &fit.columns {
                let _ = writeln!(
                    log,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    c.label,
                    c.lambda,
                    c.iterations,
                    c.converged,
                    c.primal_residual,
                    c.dual_residual,
                    c.constant_label,
                    c.nonzeros
                );
            }
            out.write("correlation_log.tsv", &with_warning(w, log))?;
        }
        Format::Structured => {
            let doc = json!({
                "warning": warning,
                "alpha": a.alpha,
                "label_names": names,
                "settings": settings,
                "columns": fit.columns,
            });
            out.write("correlation_log.json", &pretty(&doc))?;
        }
    }
    Ok(outcome(warning))
}

fn pretty(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json values always serialize");
    s.push('\n');
    s
}

fn load(data: &DataArgs) -> Result<camel::Dataset64> {
    load_dataset(&data.features, &data.labels)
}

fn train_cmd(a: &TrainArgs, format: Format) -> Result<Outcome> {
    let dataset = load(&a.data)?;
    let config = trainer_config(&a.fit, a.alpha, a.lambda2)?;
    let (model, corr_fit) = train(&dataset, &config)?;
    let diag = model.diagnostics();

    let mut problems = Vec::new();
    if !diag.converged {
        problems.push(format!(
            "outer loop stopped after {} iterations with delta_z = {}",
            diag.outer_iterations,
            diag.delta_z_history.last().copied().unwrap_or(f64::NAN)
        ));
    }
    let unconverged: Vec<usize> = corr_fit
        .columns
        .iter()
        .filter(|c| !c.converged)
        .map(|c| c.label)
        .collect();
    problems.extend(corr_warning(&unconverged));
    let warning = (!problems.is_empty()).then(|| problems.join("; "));
    let w = warning.as_deref();

    let out = OutputDir::create(&a.output)?;
    out.write("model.camel", &model_to_string(&model))?;
    let mut log = String::from("iteration\tdelta_z\tobjective\n");
    for (i, obj) in diag.objective_history.iter().enumerate() {
        let delta = if i == 0 {
            "-".to_string()
        } else {
            diag.delta_z_history[i - 1].to_string()
        };
        let _ = writeln!(log, "{i}\t{delta}\t{obj}");
    }
    out.write("convergence.tsv", &with_warning(w, log))?;
    let summary = dataset.describe();
    match format {
        Format::Text => {
            let mut text = String::new();
            let _ = writeln!(text, "n={}\nd={}\nq={}\ncardinality={}", summary.n, summary.d, summary.q, summary.cardinality);
            let _ = writeln!(text, "alpha={}\nlambda1={}\nlambda2={}", config.alpha, config.lambda1, config.lambda2);
            let _ = writeln!(text, "sigma={}", model.kernel().bandwidth());
            let _ = writeln!(text, "outer_iterations={}\nconverged={}", diag.outer_iterations, diag.converged);
            let _ = writeln!(text, "correlation_converged={}", corr_fit.all_converged());
            out.write("train_summary.txt", &with_warning(w, text))?;
        }
        Format::Structured => {
            let doc = json!({
                "warning": warning,
                "dataset": summary,
                "config": config,
                "sigma": model.kernel().bandwidth(),
                "outer_iterations": diag.outer_iterations,
                "converged": diag.converged,
                "correlation": corr_fit.columns,
            });
            out.write("train_summary.json", &pretty(&doc))?;
        }
    }
    Ok(outcome(warning))
}

fn predict(a: &PredictArgs) -> Result<Outcome> {
    let model = load_model::<f64>(&a.model)?;
    let features = parse_matrix::<f64>(&read_to_string(&a.features)?, "feature file")?;
    let scores = model.predict_scores(&features)?;
    let labels = sign_labels(&scores);
    let out = OutputDir::create(&a.output)?;
    out.write("scores.txt", &format_matrix(&scores))?;
    out.write("predictions.txt", &format_label_matrix(&labels))?;
    Ok(Outcome::Done)
}

fn eval(a: &EvalArgs, format: Format) -> Result<Outcome> {
    let (truth, _) = parse_labels::<f64>(&read_to_string(&a.truth)?)?;
    let scores = parse_matrix::<f64>(&read_to_string(&a.scores)?, "score file")?;
    let predictions = match &a.predictions {
        Some(p) => parse_labels::<f64>(&read_to_string(p)?)?.0,
        None => sign_labels(&scores),
    };
    let report = evaluate_lenient(&truth, &scores, &predictions)?;
    let out = OutputDir::create(&a.output)?;
    match format {
        Format::Text => out.write("metrics.txt", &report.to_key_value())?,
        Format::Structured => out.write("metrics.json", &pretty(&json!(report)))?,
    };
    Ok(Outcome::Done)
}

fn cv(a: &CvArgs, format: Format) -> Result<Outcome> {
    let dataset = load(&a.data)?;
    let metric = Metric::from_name(&a.metric).ok_or_else(|| {
        Error::InvalidParameter {
            name: "metric",
            message: format!(
                "unknown metric `{}`; expected one of {}",
                a.metric,
                Metric::ALL.map(|m| m.name()).join(", ")
            ),
        }
    })?;
    let defaults = Grid::<f64>::default();
    let grid = Grid {
        alphas: a
            .alpha
            .map(|x| vec![x])
            .or_else(|| a.alphas.clone())
            .unwrap_or(defaults.alphas),
        lambda2s: a
            .lambda2
            .map(|x| vec![x])
            .or_else(|| a.lambda2s.clone())
            .unwrap_or(defaults.lambda2s),
        lambda1: a.fit.lambda1,
    };
    grid.validate()?;
    let settings = TunerSettings {
        base: trainer_config(&a.fit, grid.alphas[0], grid.lambda2s[0])?,
        selection: metric,
        inner_k: a.inner_k,
    };
    let result = if grid.len() == 1 {
        let point = GridPoint {
            alpha: grid.alphas[0],
            lambda1: grid.lambda1,
            lambda2: grid.lambda2s[0],
        };
        cross_validate(&dataset, &point, a.k, a.seed, &settings)?
    } else {
        nested_cross_validate(&dataset, &grid, a.k, a.seed, &settings)?
    };

    let warning = (!result.all_converged())
        .then(|| "at least one fit or correlation solve hit its iteration limit".to_string());
    let w = warning.as_deref();
    let out = OutputDir::create(&a.output)?;
    match format {
        Format::Text => {
            out.write("cv_result.txt", &with_warning(w, result.to_text()))?;
        }
        Format::Structured => {
            let doc = json!({
                "warning": warning,
                "selection_metric": metric,
                "result": result,
            });
            out.write("cv_result.json", &pretty(&doc))?;
        }
    }
    out.write("sensitivity.tsv", &with_warning(w, result.sensitivity_tsv()))?;
    Ok(outcome(warning))
}

fn describe(a: &DataArgs, format: Format) -> Result<Outcome> {
    let s = load(a)?.describe();
    match format {
        Format::Text => println!("n={}\nd={}\nq={}\ncardinality={}", s.n, s.d, s.q, s.cardinality),
        Format::Structured => print!("{}", pretty(&json!(s))),
    }
    Ok(Outcome::Done)
}

fn synth(a: &SynthArgs) -> Result<Outcome> {
    let ds = make_multilabel::<f64>(&SyntheticConfig {
        n: a.n,
        d: a.d,
        q: a.q,
        latent: a.latent,
        noise: a.noise,
        threshold: a.threshold,
        seed: a.seed,
    })?;
    let out = OutputDir::create(&a.output)?;
    out.write("features.txt", &ds.features_text())?;
    out.write("labels.txt", &ds.labels_text())?;
    Ok(Outcome::Done)
}
