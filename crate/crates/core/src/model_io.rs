//! Text serialization of [`TrainedModel`].
//!
//! ```text
//! camel-model 1
//! n <n>
//! d <d>
//! q <q>
//! sigma <bandwidth>
//! alpha <alpha>
//! lambda1 <lambda1>
//! lambda2 <lambda2>
//! outer_tol <tol>
//! max_outer_iter <count>
//! rho <rho>
//! tol_abs <tol>
//! tol_rel <tol>
//! max_iter <count>
//! lambda_rule heuristic <scale> | fixed <lambda>
//! outer_iterations <count>
//! converged true|false
//! [dual_coeffs]      n rows of q values (A)
//! [bias]             1 row of q values (b)
//! [collaboration]    q rows of q values (G)
//! [train_features]   n rows of d values
//! [correlation]      q rows of q values (S)
//! ```
//!
//! Header keys appear in exactly this order. Values use the shortest decimal
//! form that parses back to the same float, so a reloaded model reproduces
//! predictions bit for bit. The convergence history is not stored.

use std::fmt::Write as _;
use std::path::Path;

use crate::correlation::{build_collaboration_matrix, AdmmSettings, CorrelationSettings, LambdaRule};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::textio::{self, format_row, parse_scalar, split_fields};
use crate::trainer::{FitDiagnostics, TrainedModel, TrainerConfig};

pub const MAGIC: &str = "camel-model";
pub const FORMAT_VERSION: u32 = 1;

const CONTEXT: &str = "model file";

pub fn model_to_string<T: Scalar>(model: &TrainedModel<T>) -> String {
    let mut out = String::new();
    let cfg = model.config();
    let admm = &cfg.correlation.admm;
    let (n, q) = model.dual_coeffs().shape();
    let _ = writeln!(out, "{MAGIC} {FORMAT_VERSION}");
    let _ = writeln!(out, "n {n}");
    let _ = writeln!(out, "d {}", model.n_features());
    let _ = writeln!(out, "q {q}");
    let _ = writeln!(out, "sigma {}", model.kernel().bandwidth());
    let _ = writeln!(out, "alpha {}", cfg.alpha);
    let _ = writeln!(out, "lambda1 {}", cfg.lambda1);
    let _ = writeln!(out, "lambda2 {}", cfg.lambda2);
    let _ = writeln!(out, "outer_tol {}", cfg.outer_tol);
    let _ = writeln!(out, "max_outer_iter {}", cfg.max_outer_iter);
    let _ = writeln!(out, "rho {}", admm.rho);
    let _ = writeln!(out, "tol_abs {}", admm.tol_abs);
    let _ = writeln!(out, "tol_rel {}", admm.tol_rel);
    let _ = writeln!(out, "max_iter {}", admm.max_iter);
    match cfg.correlation.lambda {
        LambdaRule::Heuristic { scale } => {
            let _ = writeln!(out, "lambda_rule heuristic {scale}");
        }
        LambdaRule::Fixed(l) => {
            let _ = writeln!(out, "lambda_rule fixed {l}");
        }
    }
    let diag = model.diagnostics();
    let _ = writeln!(out, "outer_iterations {}", diag.outer_iterations);
    let _ = writeln!(out, "converged {}", diag.converged);

    out.push_str("[dual_coeffs]\n");
    out.push_str(&textio::format_matrix(model.dual_coeffs()));
    out.push_str("[bias]\n");
    format_row(model.bias(), &mut out);
    out.push_str("[collaboration]\n");
    out.push_str(&textio::format_matrix(model.correlation().g_matrix()));
    out.push_str("[train_features]\n");
    out.push_str(&textio::format_matrix(model.train_features()));
    out.push_str("[correlation]\n");
    out.push_str(&textio::format_matrix(model.correlation().s_matrix()));
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        for (idx, line) in self.inner.by_ref() {
            let t = line.trim();
            if !t.is_empty() {
                return Ok((idx + 1, t));
            }
        }
        Err(Error::Parse {
            context: CONTEXT.into(),
            line: 0,
            message: "unexpected end of file".into(),
        })
    }

    fn key(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (line, text) = self.next_line()?;
        let mut parts = text.split_whitespace();
        if parts.next() != Some(key) {
            return Err(parse_err(line, format!("expected `{key}`, found `{text}`")));
        }
        Ok((line, parts.collect()))
    }

    fn scalar<T: Scalar>(&mut self, key: &str) -> Result<T> {
        let (line, vals) = self.key(key)?;
        match vals.as_slice() {
            [v] => parse_scalar(v, CONTEXT, line),
            _ => Err(parse_err(line, format!("`{key}` takes one value"))),
        }
    }

    fn count(&mut self, key: &str) -> Result<usize> {
        let (line, vals) = self.key(key)?;
        match vals.as_slice() {
            [v] => v
                .parse()
                .map_err(|_| parse_err(line, format!("`{key}` must be a nonnegative integer"))),
            _ => Err(parse_err(line, format!("`{key}` takes one value"))),
        }
    }

    fn block<T: Scalar>(&mut self, name: &str, rows: usize, cols: usize) -> Result<Matrix<T>> {
        let (line, text) = self.next_line()?;
        if text != format!("[{name}]") {
            return Err(parse_err(line, format!("expected block `[{name}]`, found `{text}`")));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (line, text) = self.next_line()?;
            let before = data.len();
            for tok in split_fields(text) {
                data.push(parse_scalar::<T>(tok, CONTEXT, line)?);
            }
            if data.len() - before != cols {
                return Err(parse_err(
                    line,
                    format!("block `{name}` expects {cols} values per row, found {}", data.len() - before),
                ));
            }
        }
        Matrix::from_vec(rows, cols, data)
    }
}

fn parse_err(line: usize, message: String) -> Error {
    Error::Parse {
        context: CONTEXT.into(),
        line,
        message,
    }
}

pub fn model_from_str<T: Scalar>(text: &str) -> Result<TrainedModel<T>> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (line, version) = lines.key(MAGIC).map_err(|_| parse_err(1, "not a camel model file".into()))?;
    if version != [FORMAT_VERSION.to_string().as_str()] {
        return Err(parse_err(line, format!("unsupported format version {version:?}")));
    }
    let n = lines.count("n")?;
    let d = lines.count("d")?;
    let q = lines.count("q")?;
    let sigma: T = lines.scalar("sigma")?;
    let alpha: T = lines.scalar("alpha")?;
    let lambda1: T = lines.scalar("lambda1")?;
    let lambda2: T = lines.scalar("lambda2")?;
    let outer_tol: T = lines.scalar("outer_tol")?;
    let max_outer_iter = lines.count("max_outer_iter")?;
    let rho: T = lines.scalar("rho")?;
    let tol_abs: T = lines.scalar("tol_abs")?;
    let tol_rel: T = lines.scalar("tol_rel")?;
    let max_iter = lines.count("max_iter")?;
    let (line, rule) = lines.key("lambda_rule")?;
    let lambda_rule = match rule.as_slice() {
        ["heuristic", v] => LambdaRule::Heuristic {
            scale: parse_scalar(v, CONTEXT, line)?,
        },
        ["fixed", v] => LambdaRule::Fixed(parse_scalar(v, CONTEXT, line)?),
        _ => return Err(parse_err(line, "bad `lambda_rule`".into())),
    };
    let outer_iterations = lines.count("outer_iterations")?;
    let (line, conv) = lines.key("converged")?;
    let converged = match conv.as_slice() {
        ["true"] => true,
        ["false"] => false,
        _ => return Err(parse_err(line, "`converged` must be true or false".into())),
    };

    let dual = lines.block("dual_coeffs", n, q)?;
    let bias = lines.block("bias", 1, q)?.into_vec();
    let g_matrix = lines.block("collaboration", q, q)?;
    let features = lines.block("train_features", n, d)?;
    let s_matrix = lines.block("correlation", q, q)?;

    let correlation = build_collaboration_matrix(s_matrix, alpha)?;
    if correlation.g_matrix() != &g_matrix {
        return Err(Error::InvalidInput(
            "model file: stored collaboration matrix does not match (1 - alpha) I + alpha S".into(),
        ));
    }
    let config = TrainerConfig {
        lambda1,
        lambda2,
        alpha,
        outer_tol,
        max_outer_iter,
        correlation: CorrelationSettings {
            admm: AdmmSettings {
                rho,
                tol_abs,
                tol_rel,
                max_iter,
            },
            lambda: lambda_rule,
        },
    };
    let diagnostics = FitDiagnostics {
        outer_iterations,
        converged,
        delta_z_history: Vec::new(),
        objective_history: Vec::new(),
    };
    TrainedModel::from_parts(
        dual,
        bias,
        KernelSpec::new(sigma)?,
        features,
        correlation,
        config,
        diagnostics,
    )
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<TrainedModel<T>> {
    model_from_str(&textio::read_to_string(path)?)
}
