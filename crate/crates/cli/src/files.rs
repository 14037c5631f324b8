//! JSON problem and solution files.
//!
//! Floats are written with the shortest representation that parses back
//! to the same bits, and parsed with correct rounding, so a write/read
//! cycle is lossless.

use std::path::Path;

use cone_refine::cones::ConeSpec;
use cone_refine::embedding::{Classification, Embedding};
use cone_refine::linalg::SparseMatrix;
use cone_refine::problems::ConeProgram;
use cone_refine::refine::RefinementReport;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Compressed sparse column matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CscJson {
    pub m: usize,
    pub n: usize,
    pub colptr: Vec<usize>,
    pub rowidx: Vec<usize>,
    pub vals: Vec<f64>,
}

/// Cone dimensions: zero cone, nonnegative orthant, second-order cone
/// sizes, PSD orders, primal and dual exponential cone counts. Missing
/// entries default to zero or empty.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConesJson {
    #[serde(default)]
    pub z: usize,
    #[serde(default)]
    pub l: usize,
    #[serde(default)]
    pub q: Vec<usize>,
    #[serde(default)]
    pub s: Vec<usize>,
    #[serde(default)]
    pub ep: usize,
    #[serde(default)]
    pub ed: usize,
}

impl From<&ConeSpec> for ConesJson {
    fn from(c: &ConeSpec) -> Self {
        Self {
            z: c.zero,
            l: c.nonneg,
            q: c.soc.clone(),
            s: c.psd.clone(),
            ep: c.exp_primal,
            ed: c.exp_dual,
        }
    }
}

impl From<&ConesJson> for ConeSpec {
    fn from(c: &ConesJson) -> Self {
        Self {
            zero: c.z,
            nonneg: c.l,
            soc: c.q.clone(),
            psd: c.s.clone(),
            exp_primal: c.ep,
            exp_dual: c.ed,
        }
    }
}

/// `minimize c'x subject to Ax + s = b, s in K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "A")]
    pub a: CscJson,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub cones: ConesJson,
}

fn expect_len(field: &str, got: usize, expected: usize, what: &str) -> Result<(), CliError> {
    if got == expected {
        Ok(())
    } else {
        Err(CliError::Invalid(format!(
            "field `{field}`: length {got}, expected {what} = {expected}"
        )))
    }
}

impl ProblemFile {
    pub fn from_program(p: &ConeProgram) -> Self {
        Self {
            n: p.n(),
            m: p.m(),
            a: CscJson {
                m: p.a.rows(),
                n: p.a.cols(),
                colptr: p.a.colptr().to_vec(),
                rowidx: p.a.rowidx().to_vec(),
                vals: p.a.vals().to_vec(),
            },
            b: p.b.clone(),
            c: p.c.clone(),
            cones: ConesJson::from(&p.cones),
        }
    }

    pub fn to_program(&self) -> Result<ConeProgram, CliError> {
        let (m, n) = (self.m, self.n);
        if self.a.m != m {
            return Err(CliError::Invalid(format!(
                "field `A.m`: {} but m = {m}",
                self.a.m
            )));
        }
        if self.a.n != n {
            return Err(CliError::Invalid(format!(
                "field `A.n`: {} but n = {n}",
                self.a.n
            )));
        }
        expect_len("b", self.b.len(), m, "m")?;
        expect_len("c", self.c.len(), n, "n")?;
        let cones = ConeSpec::from(&self.cones);
        if cones.total_dim() != m {
            return Err(CliError::Invalid(format!(
                "field `cones`: total dimension {}, expected m = {m}",
                cones.total_dim()
            )));
        }
        let a = SparseMatrix::new(
            m,
            n,
            self.a.colptr.clone(),
            self.a.rowidx.clone(),
            self.a.vals.clone(),
        )
        .map_err(|e| CliError::Invalid(format!("field `A`: {e}")))?;
        ConeProgram::new(a, self.b.clone(), self.c.clone(), cones)
            .map_err(|e| CliError::Invalid(format!("problem: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepJson {
    pub residual_before: f64,
    pub residual_after: f64,
    pub step_size: f64,
    pub backtracks: usize,
    pub lsqr_iters: usize,
    pub lsqr_stop: String,
    pub failed: bool,
}

/// Refinement report. `refinement_factor` is `null` when the final
/// residual is exactly zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportJson {
    pub initial_residual: f64,
    pub final_residual: f64,
    pub refinement_factor: Option<f64>,
    pub short_circuited: bool,
    pub wall_time_ms: f64,
    pub steps: Vec<StepJson>,
}

impl From<&RefinementReport> for ReportJson {
    fn from(r: &RefinementReport) -> Self {
        Self {
            initial_residual: r.initial_residual,
            final_residual: r.final_residual,
            refinement_factor: r
                .refinement_factor
                .is_finite()
                .then_some(r.refinement_factor),
            short_circuited: r.short_circuited,
            wall_time_ms: r.wall_time.as_secs_f64() * 1e3,
            steps: r
                .steps
                .iter()
                .map(|s| StepJson {
                    residual_before: s.residual_before,
                    residual_after: s.residual_after,
                    step_size: s.step_size,
                    backtracks: s.backtracks,
                    lsqr_iters: s.lsqr_iters,
                    lsqr_stop: format!("{:?}", s.lsqr_stop),
                    failed: s.failed,
                })
                .collect(),
        }
    }
}

/// A solution or certificate in explicit form (`kind` plus the vectors it
/// needs), an embedded point `z`, or both.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ReportJson>,
}

/// What a solution file says about a problem.
#[derive(Debug, Clone, PartialEq)]
pub enum SolutionInput {
    Point(Vec<f64>),
    Explicit(Classification),
}

impl SolutionFile {
    pub fn from_classification(cls: &Classification) -> Self {
        let mut f = Self {
            kind: Some(cls.label().to_string()),
            ..Default::default()
        };
        match cls {
            Classification::Optimal { x, y, s } => {
                f.x = Some(x.clone());
                f.y = Some(y.clone());
                f.s = Some(s.clone());
            }
            Classification::PrimalInfeasible { y } => f.y = Some(y.clone()),
            Classification::DualInfeasible { x, s } => {
                f.x = Some(x.clone());
                f.s = Some(s.clone());
            }
            Classification::Indeterminate => {}
        }
        f
    }

    pub fn from_point(z: Vec<f64>) -> Self {
        Self {
            z: Some(z),
            ..Default::default()
        }
    }

    /// The embedded point if present, otherwise the explicit form.
    pub fn input(&self, program: &ConeProgram) -> Result<SolutionInput, CliError> {
        let (m, n) = (program.m(), program.n());
        if let Some(z) = &self.z {
            expect_len("z", z.len(), m + n + 1, "m + n + 1")?;
            if z[m + n] == 0.0 {
                return Err(CliError::Invalid(
                    "field `z`: homogenizing coordinate z[m+n] is zero".into(),
                ));
            }
            return Ok(SolutionInput::Point(z.clone()));
        }
        let kind = self.kind.as_deref().ok_or_else(|| {
            CliError::Invalid("solution needs either `z` or `kind` with its vectors".into())
        })?;
        let field = |name: &str, v: &Option<Vec<f64>>, len: usize, what: &str| {
            let v = v.as_ref().ok_or_else(|| {
                CliError::Invalid(format!("field `{name}`: required for kind `{kind}`"))
            })?;
            expect_len(name, v.len(), len, what)?;
            Ok::<_, CliError>(v.clone())
        };
        let cls = match kind {
            "optimal" => Classification::Optimal {
                x: field("x", &self.x, n, "n")?,
                y: field("y", &self.y, m, "m")?,
                s: field("s", &self.s, m, "m")?,
            },
            "primal_infeasible" => Classification::PrimalInfeasible { y: field("y", &self.y, m, "m")? },
            "dual_infeasible" => Classification::DualInfeasible {
                x: field("x", &self.x, n, "n")?,
                s: field("s", &self.s, m, "m")?,
            },
            other => {
                return Err(CliError::Invalid(format!(
                    "field `kind`: unknown value `{other}` (expected optimal, primal_infeasible or dual_infeasible)"
                )))
            }
        };
        Ok(SolutionInput::Explicit(cls))
    }

    /// The embedded point, embedding the explicit form if needed.
    pub fn point(&self, emb: &Embedding) -> Result<Vec<f64>, CliError> {
        match self.input(emb.program())? {
            SolutionInput::Point(z) => Ok(z),
            SolutionInput::Explicit(cls) => Ok(emb.embed_solution(&cls)?),
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        CliError::Parse {
            path: path.display().to_string(),
            message: if field == "." {
                e.inner().to_string()
            } else {
                format!("field `{field}`: {}", e.inner())
            },
        }
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Attaches the file name to a validation error.
pub fn in_file(path: &Path) -> impl FnOnce(CliError) -> CliError + '_ {
    move |e| match e {
        CliError::Invalid(message) => CliError::Parse {
            path: path.display().to_string(),
            message,
        },
        other => other,
    }
}

pub fn read_problem(path: &Path) -> Result<ConeProgram, CliError> {
    read_json::<ProblemFile>(path)?
        .to_program()
        .map_err(in_file(path))
}
