//! JSON problem definitions: a built-in corpus instance or an NLP written in the
//! expression language of [`super::Expr`].

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{build_l1_penalty, build_max_penalty, Ambient, ConstrainedProblem, Expr, NlpModel, RealFn, Region};
use crate::corpus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyAggregation {
    #[default]
    L1,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NlpSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub dim: Option<usize>,
    pub objective: String,
    #[serde(default)]
    pub equalities: Vec<String>,
    #[serde(default)]
    pub inequalities: Vec<String>,
    #[serde(default)]
    pub penalty: PenaltyAggregation,
    /// Defaults to `[-3, 3]^n`.
    #[serde(default)]
    pub region: Option<Region>,
    #[serde(default)]
    pub fstar: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemDefinition {
    Builtin {
        builtin: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
    Nlp {
        nlp: NlpSpec,
    },
}

impl ProblemDefinition {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Definition(e.to_string()))
    }

    pub fn load(&self) -> Result<ConstrainedProblem> {
        match self {
            ProblemDefinition::Builtin { builtin, params } => Ok(corpus::load(builtin, params)?.problem),
            ProblemDefinition::Nlp { nlp } => nlp.build(),
        }
    }
}

impl NlpSpec {
    pub fn build(&self) -> Result<ConstrainedProblem> {
        let objective = Expr::parse(&self.objective)?;
        let eqs = self.equalities.iter().map(|s| Expr::parse(s)).collect::<Result<Vec<_>>>()?;
        let ineqs = self.inequalities.iter().map(|s| Expr::parse(s)).collect::<Result<Vec<_>>>()?;
        let used = std::iter::once(&objective)
            .chain(&eqs)
            .chain(&ineqs)
            .map(Expr::arity)
            .max()
            .unwrap_or(0);
        let dim = match self.dim {
            Some(d) if d < used => {
                return Err(Error::Definition(format!("dim = {d} but expressions reference x{used}")))
            }
            Some(d) => d,
            None => used.max(1),
        };
        let region = match &self.region {
            Some(r) => r.clone(),
            None => Region::cube(dim, -3.0, 3.0)?,
        };
        let to_fn = |e: Expr| -> RealFn { Arc::new(move |x: &[f64]| e.eval(x)) };
        let mut model = NlpModel::new(
            self.name.clone().unwrap_or_else(|| "nlp".into()),
            dim,
            to_fn(objective),
            eqs.into_iter().map(to_fn).collect(),
            ineqs.into_iter().map(to_fn).collect(),
            Ambient::whole(region),
        )?;
        model.fstar_hint = self.fstar;
        Ok(match self.penalty {
            PenaltyAggregation::L1 => build_l1_penalty(model),
            PenaltyAggregation::Max => build_max_penalty(model),
        })
    }
}
