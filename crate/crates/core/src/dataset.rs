//! JSON dataset: random variables, objects with lineage events and coordinates, parameters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::eprog::parse_texpr;
use crate::error::DatasetError;
use crate::expr::VarTable;
use crate::translate::{Bindings, PointBinding};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarSpec {
    pub id: String,
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSpec {
    pub id: String,
    pub coords: Vec<f64>,
    /// event over variable ids and earlier `Phi^{l}` names
    pub event: String,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Params {
    #[serde(default)]
    pub medoids: Vec<usize>,
    /// numeric parameters such as `k` and `iter`
    #[serde(flatten)]
    pub values: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub vars: Vec<VarSpec>,
    pub points: Vec<PointSpec>,
    #[serde(default)]
    pub params: Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub meta: serde_json::Value,
}

impl Dataset {
    pub fn from_json(text: &str) -> Result<Dataset, DatasetError> {
        let d: Dataset = serde_json::from_str(text)?;
        d.check()?;
        Ok(d)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dataset serialises")
    }

    fn check(&self) -> Result<(), DatasetError> {
        let dim = self.points.first().map_or(0, |p| p.coords.len());
        if self.points.iter().any(|p| p.coords.len() != dim) {
            return Err(DatasetError::Invalid("points have different dimensions".into()));
        }
        if let Some(&m) = self.params.medoids.iter().find(|&&m| m >= self.points.len()) {
            return Err(DatasetError::Invalid(format!("medoid index {m} out of range")));
        }
        self.var_table()?;
        Ok(())
    }

    pub fn var_table(&self) -> Result<VarTable, DatasetError> {
        VarTable::from_pairs(self.vars.iter().map(|v| (v.id.clone(), v.p))).map_err(DatasetError::Invalid)
    }

    pub fn bindings(&self) -> Result<Bindings, DatasetError> {
        let points = self
            .points
            .iter()
            .map(|p| {
                let event = parse_texpr(&p.event).map_err(|err| DatasetError::Event { point: p.id.clone(), err })?;
                Ok(PointBinding { event, coords: p.coords.clone() })
            })
            .collect::<Result<Vec<_>, DatasetError>>()?;
        Ok(Bindings { points, params: self.params.values.clone(), medoids: self.params.medoids.clone(), matrix: self.matrix.clone() })
    }

    /// Index of a point by id (`o3`) or by position (`3`).
    pub fn point_index(&self, key: &str) -> Option<usize> {
        self.points.iter().position(|p| p.id == key).or_else(|| key.parse().ok().filter(|&i: &usize| i < self.points.len()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let txt = r#"{"vars":[{"id":"x1","p":0.6}],"points":[{"id":"o0","coords":[0.0],"event":"x1"}],
                      "params":{"k":1,"iter":2,"medoids":[0]}}"#;
        let d = Dataset::from_json(txt).unwrap();
        assert_eq!(d.params.values["iter"], 2.0);
        let d2 = Dataset::from_json(&d.to_json()).unwrap();
        assert_eq!(d, d2);
        assert_eq!(d.point_index("o0"), Some(0));
    }

    #[test]
    fn invalid_probability_rejected() {
        let txt = r#"{"vars":[{"id":"x1","p":1.5}],"points":[]}"#;
        assert!(Dataset::from_json(txt).is_err());
    }
}
