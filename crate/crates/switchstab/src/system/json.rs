//! JSON interchange format for switched systems.
//!
//! A mode carries either an explicit row-major matrix (`"linear": {"A": ...}`)
//! or the name of a registered nonlinear example (`"builtin": "..."`), plus a
//! domain that is `"all"` or `{"halfspaces": [[normal..., offset], ...]}`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{
    Domain, FieldFn, Halfspace, Mode, SampleBox, SwitchedSystem, SystemError,
};
use crate::scalar::{cast, Scalar};
use crate::signal::ModeId;

/// Schema tag written into emitted system files.
pub const SYSTEM_SCHEMA: &str = "switchstab/system/v1";

/// Names accepted by the `"builtin"` mode field.
pub const BUILTIN_FIELDS: &[&str] = &["damped_pendulum", "vanderpol"];

/// Registered nonlinear example fields, by name.
pub fn builtin_field<T: Scalar>(name: &str) -> Result<(usize, FieldFn<T>), SystemError<T>> {
    match name {
        "damped_pendulum" => {
            let f: FieldFn<T> = Arc::new(|x: &DVector<T>| {
                DVector::from_row_slice(&[x[1], -x[0].sin() - cast::<T>(0.5) * x[1]])
            });
            Ok((2, f))
        }
        "vanderpol" => {
            let f: FieldFn<T> = Arc::new(|x: &DVector<T>| {
                DVector::from_row_slice(&[x[1], (T::one() - x[0] * x[0]) * x[1] - x[0]])
            });
            Ok((2, f))
        }
        other => Err(SystemError::UnknownBuiltin(other.to_string())),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinearJson {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DomainJson {
    /// `"all"`
    Keyword(String),
    /// `{"halfspaces": [[normal..., offset], ...]}`
    Halfspaces { halfspaces: Vec<Vec<f64>> },
}

impl Default for DomainJson {
    fn default() -> Self {
        DomainJson::Keyword("all".to_string())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoxJson {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModeJson {
    pub id: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linear: Option<LinearJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default)]
    pub domain: DomainJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BoxJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SystemJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    pub dimension: usize,
    pub modes: Vec<ModeJson>,
}

fn domain_from_json(dim: usize, json: &DomainJson) -> Result<Domain<f64>, SystemError<f64>> {
    match json {
        DomainJson::Keyword(word) if word == "all" => Ok(Domain::all(dim)),
        DomainJson::Keyword(word) => Err(SystemError::Invalid(format!(
            "unknown domain keyword `{word}` (expected \"all\")"
        ))),
        DomainJson::Halfspaces { halfspaces } => {
            let mut list = Vec::with_capacity(halfspaces.len());
            for row in halfspaces {
                if row.len() != dim + 1 {
                    return Err(SystemError::Invalid(format!(
                        "halfspace row needs {} entries (normal then offset), got {}",
                        dim + 1,
                        row.len()
                    )));
                }
                list.push(Halfspace {
                    normal: DVector::from_row_slice(&row[..dim]),
                    offset: row[dim],
                });
            }
            Ok(Domain::halfspaces(dim, list))
        }
    }
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, SystemError<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(SystemError::Invalid(
            "matrix rows must be nonempty and of equal length".into(),
        ));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl SystemJson {
    pub fn build(&self) -> Result<SwitchedSystem<f64>, SystemError<f64>> {
        let dim = self.dimension;
        let mut modes = Vec::with_capacity(self.modes.len());
        for mj in &self.modes {
            let mut domain = domain_from_json(dim, &mj.domain)?;
            if let Some(bbox) = &mj.bbox {
                if bbox.lo.len() != dim || bbox.hi.len() != dim {
                    return Err(SystemError::Invalid("bbox dimension mismatch".into()));
                }
                domain = domain.with_bbox(SampleBox {
                    lo: DVector::from_row_slice(&bbox.lo),
                    hi: DVector::from_row_slice(&bbox.hi),
                });
            }
            let id = ModeId(mj.id);
            let mode = match (&mj.linear, &mj.builtin) {
                (Some(lin), None) => {
                    let a = matrix_from_rows(&lin.a)?;
                    if a.nrows() != dim {
                        return Err(SystemError::DimensionMismatch {
                            expected: dim,
                            got: a.nrows(),
                        });
                    }
                    Mode::linear(id, a, domain)?
                }
                (None, Some(name)) => {
                    let (builtin_dim, field) = builtin_field::<f64>(name)?;
                    if builtin_dim != dim {
                        return Err(SystemError::DimensionMismatch {
                            expected: dim,
                            got: builtin_dim,
                        });
                    }
                    Mode::new(id, field, domain)
                }
                _ => {
                    return Err(SystemError::Invalid(format!(
                        "mode {} must carry exactly one of `linear` or `builtin`",
                        mj.id
                    )))
                }
            };
            modes.push(mode);
        }
        SwitchedSystem::new(dim, modes)
    }

    /// Description of an all-linear system (row-major matrices).
    pub fn from_matrices(matrices: &[DMatrix<f64>]) -> Self {
        let dimension = matrices.first().map_or(0, DMatrix::nrows);
        let modes = matrices
            .iter()
            .enumerate()
            .map(|(i, a)| ModeJson {
                id: i as u32 + 1,
                linear: Some(LinearJson {
                    a: (0..a.nrows())
                        .map(|r| (0..a.ncols()).map(|c| a[(r, c)]).collect())
                        .collect(),
                }),
                builtin: None,
                domain: DomainJson::default(),
                bbox: None,
            })
            .collect();
        SystemJson {
            schema: Some(SYSTEM_SCHEMA.to_string()),
            dimension,
            modes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_system_round_trip() {
        let text = r#"{
            "schema": "switchstab/system/v1",
            "dimension": 2,
            "modes": [
                {"id": 1, "linear": {"A": [[-1.0, 0.0], [0.0, 0.0]]}},
                {"id": 2, "linear": {"A": [[0.0, 0.0], [0.0, -1.0]]},
                 "domain": {"halfspaces": [[1.0, 0.0, 0.0]]}}
            ]
        }"#;
        let parsed: SystemJson = serde_json::from_str(text).unwrap();
        let sys = parsed.build().unwrap();
        assert_eq!(sys.dim(), 2);
        let v = sys
            .eval_field(&DVector::from_row_slice(&[1.0, 1.0]), ModeId(1))
            .unwrap();
        assert_eq!(v, DVector::from_row_slice(&[-1.0, 0.0]));
        // mode 2 is constrained to x1 >= 0
        assert!(sys
            .eval_field(&DVector::from_row_slice(&[-1.0, 0.0]), ModeId(2))
            .is_err());
    }

    #[test]
    fn builtin_mode_builds() {
        let text = r#"{"dimension": 2, "modes": [{"id": 1, "builtin": "damped_pendulum"}]}"#;
        let sys: SystemJson = serde_json::from_str(text).unwrap();
        let sys = sys.build().unwrap();
        let v = sys
            .eval_field(&DVector::from_row_slice(&[0.0, 1.0]), ModeId(1))
            .unwrap();
        assert_eq!(v, DVector::from_row_slice(&[1.0, -0.5]));
    }

    #[test]
    fn rejects_conflicting_or_missing_field_kind() {
        let both = r#"{"dimension": 1, "modes": [{"id": 1, "builtin": "vanderpol",
                       "linear": {"A": [[1.0]]}}]}"#;
        let parsed: SystemJson = serde_json::from_str(both).unwrap();
        assert!(parsed.build().is_err());
        let neither = r#"{"dimension": 1, "modes": [{"id": 1}]}"#;
        let parsed: SystemJson = serde_json::from_str(neither).unwrap();
        assert!(parsed.build().is_err());
        let unknown = r#"{"dimension": 2, "modes": [{"id": 1, "builtin": "nope"}]}"#;
        let parsed: SystemJson = serde_json::from_str(unknown).unwrap();
        assert!(matches!(
            parsed.build().unwrap_err(),
            SystemError::UnknownBuiltin(_)
        ));
    }

    #[test]
    fn from_matrices_emits_schema() {
        let json = SystemJson::from_matrices(&[DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 0.0])]);
        let text = serde_json::to_string(&json).unwrap();
        assert!(text.contains(SYSTEM_SCHEMA));
        let back: SystemJson = serde_json::from_str(&text).unwrap();
        back.build().unwrap();
    }
}
