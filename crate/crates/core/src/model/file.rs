//! Plain-text problem files.
//!
//! Tokens are whitespace separated and `#` starts a comment. Layout:
//!
//! ```text
//! n m beta
//! A            m·n numbers, row-major
//! b            m numbers
//! <smooth part>
//! [clauses...]
//! ```
//!
//! Smooth part, exactly one of:
//!
//! * `quadratic d1 .. dn` : `h = ½Σ dᵢxᵢ²`
//! * `qp Q11 .. Qnn c1 .. cn` : `h = ½xᵀQx + cᵀx`, `Q` row-major
//! * `lsq k M(k·n) d(k)` : `h = ½‖Mx − d‖²`
//! * `logistic delta k` then `k` rows of `label a1 .. an`
//! * `lasso t [d1 .. dn]` : shorthand for `quadratic d` plus `l1 t` (`d` defaults to 0)
//!
//! Optional clauses, in any order:
//!
//! * `linear c1 .. cn` adds `cᵀx` to a `quadratic` or `lasso` part
//! * `l1 t` sets `g = t‖x‖₁`
//! * `box l1 .. ln u1 .. un` restricts `x` to a box
//! * `halfspace a1 .. an c` restricts `x` to `aᵀx ≤ c`
//! * `sigma_min s` declares `σ_min(A) ≥ s` so that `beta` takes effect
//! * `reference x1 .. xn l1 .. lm` records a known saddle point

use std::path::Path;
use std::sync::Arc;

use super::constraint::LinearConstraint;
use super::problem::{ProblemInstance, SaddlePoint};
use super::prox::{FeasibleSet, ProxableFunction, Regularizer, SeparableProx};
use super::smooth::{DiagonalQuadratic, LeastSquares, Logistic, Quadratic, SmoothOracle};
use crate::error::{ApdError, Result};
use crate::linalg::{Matrix, Vector};

/// Parsed problem plus an optional saddle point given in the file.
#[derive(Debug, Clone)]
pub struct ProblemFile {
    pub problem: ProblemInstance,
    pub reference: Option<SaddlePoint>,
}

struct Tokens<'a> {
    items: Vec<&'a str>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let items = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(str::split_whitespace)
            .collect();
        Self { items, pos: 0 }
    }

    fn err(&self, message: impl Into<String>) -> ApdError {
        ApdError::Parse {
            position: self.pos,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<&'a str> {
        self.items.get(self.pos).copied()
    }

    fn word(&mut self) -> Result<&'a str> {
        let w = self.peek().ok_or_else(|| self.err("unexpected end of input"))?;
        self.pos += 1;
        Ok(w)
    }

    fn number(&mut self) -> Result<f64> {
        let w = self.word()?;
        w.parse::<f64>()
            .map_err(|_| ApdError::Parse {
                position: self.pos - 1,
                message: format!("expected a number, found `{w}`"),
            })
    }

    fn count(&mut self) -> Result<usize> {
        let w = self.word()?;
        w.parse::<usize>().map_err(|_| ApdError::Parse {
            position: self.pos - 1,
            message: format!("expected a count, found `{w}`"),
        })
    }

    fn numbers(&mut self, k: usize) -> Result<Vector> {
        let mut v = Vector::zeros(k);
        for i in 0..k {
            v[i] = self.number()?;
        }
        Ok(v)
    }

    fn next_is_number(&self) -> bool {
        self.peek().is_some_and(|w| w.parse::<f64>().is_ok())
    }
}

enum SmoothSpec {
    Diagonal(Vector, Vector),
    Dense(Matrix, Vector),
    LeastSquares(Matrix, Vector),
    Logistic(Matrix, Vector, f64),
}

pub fn parse_problem(text: &str) -> Result<ProblemFile> {
    let mut t = Tokens::new(text);
    let n = t.count()?;
    let m = t.count()?;
    let beta = t.number()?;
    let a = Matrix::from_row_slice(m, n, t.numbers(m * n)?.as_slice());
    let b = t.numbers(m)?;

    let mut l1: Option<f64> = None;
    let head = t.word()?;
    let mut smooth = match head {
        "quadratic" => SmoothSpec::Diagonal(t.numbers(n)?, Vector::zeros(n)),
        "qp" => {
            let q = Matrix::from_row_slice(n, n, t.numbers(n * n)?.as_slice());
            SmoothSpec::Dense(q, t.numbers(n)?)
        }
        "lsq" => {
            let k = t.count()?;
            let design = Matrix::from_row_slice(k, n, t.numbers(k * n)?.as_slice());
            SmoothSpec::LeastSquares(design, t.numbers(k)?)
        }
        "logistic" => {
            let delta = t.number()?;
            let k = t.count()?;
            let mut labels = Vector::zeros(k);
            let mut feats = Matrix::zeros(k, n);
            for j in 0..k {
                labels[j] = t.number()?;
                for i in 0..n {
                    feats[(j, i)] = t.number()?;
                }
            }
            SmoothSpec::Logistic(feats, labels, delta)
        }
        "lasso" => {
            l1 = Some(t.number()?);
            let d = if t.next_is_number() { t.numbers(n)? } else { Vector::zeros(n) };
            SmoothSpec::Diagonal(d, Vector::zeros(n))
        }
        other => return Err(t.err(format!("unknown objective `{other}`"))),
    };

    let mut set = FeasibleSet::Whole;
    let mut sigma_min = 0.0;
    let mut reference = None;
    while let Some(word) = t.peek() {
        t.pos += 1;
        match word {
            "linear" => {
                let c = t.numbers(n)?;
                smooth = match smooth {
                    SmoothSpec::Diagonal(d, c0) => SmoothSpec::Diagonal(d, c0 + c),
                    SmoothSpec::Dense(q, c0) => SmoothSpec::Dense(q, c0 + c),
                    _ => return Err(t.err("`linear` only combines with quadratic objectives")),
                };
            }
            "l1" => l1 = Some(t.number()?),
            "box" => {
                let lower = t.numbers(n)?;
                let upper = t.numbers(n)?;
                set = FeasibleSet::Box { lower, upper };
            }
            "halfspace" => {
                let normal = t.numbers(n)?;
                let offset = t.number()?;
                set = FeasibleSet::HalfSpace { normal, offset };
            }
            "sigma_min" => sigma_min = t.number()?,
            "reference" => {
                let x = t.numbers(n)?;
                let lambda = t.numbers(m)?;
                reference = Some((x, lambda));
            }
            other => return Err(t.err(format!("unknown clause `{other}`"))),
        }
    }

    let smooth: Arc<dyn SmoothOracle> = match smooth {
        SmoothSpec::Diagonal(d, c) => Arc::new(DiagonalQuadratic::new(d, c)?),
        SmoothSpec::Dense(q, c) => Arc::new(Quadratic::new(q, c)?),
        SmoothSpec::LeastSquares(mm, d) => Arc::new(LeastSquares::new(mm, d)?),
        SmoothSpec::Logistic(f, y, delta) => Arc::new(Logistic::new(f, y, delta)?),
    };
    let term = match l1 {
        Some(weight) => Regularizer::L1 { weight },
        None => Regularizer::Zero,
    };
    let nonsmooth: Arc<dyn ProxableFunction> = Arc::new(SeparableProx::new(term, set)?);
    let constraint = LinearConstraint::dense(a, b)?.with_sigma_min(sigma_min)?;
    let problem = ProblemInstance::new(smooth, nonsmooth, constraint, beta)?;
    let reference = reference.map(|(x, lambda)| {
        let objective = problem.objective(&x);
        SaddlePoint {
            x,
            lambda,
            objective,
        }
    });
    Ok(ProblemFile { problem, reference })
}

pub fn read_problem(path: impl AsRef<Path>) -> Result<ProblemFile> {
    parse_problem(&std::fs::read_to_string(path)?)
}
