//! JSON input files: spaces, exponents and weights.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::exponent::Exponent;
use crate::space::Space;
use crate::weights::Weight;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointId {
    Index(u64),
    Name(String),
}

impl std::fmt::Display for PointId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PointId::Index(i) => write!(f, "{i}"),
            PointId::Name(s) => f.write_str(s),
        }
    }
}

/// `{"points": [...], "coords": [[...]], "metric": "euclidean", "mass": [...]}`
/// or `{"points": [...], "dist": [[...]], "mass": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceFile {
    pub points: Vec<PointId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<Vec<Vec<f64>>>,
    pub mass: Vec<f64>,
}

impl SpaceFile {
    pub fn from_coords(coords: Vec<Vec<f64>>, mass: Vec<f64>) -> Self {
        Self {
            points: (0..mass.len() as u64).map(PointId::Index).collect(),
            coords: Some(coords),
            metric: Some("euclidean".into()),
            dist: None,
            mass,
        }
    }

    pub fn from_dist(dist: Vec<Vec<f64>>, mass: Vec<f64>) -> Self {
        Self {
            points: (0..mass.len() as u64).map(PointId::Index).collect(),
            coords: None,
            metric: None,
            dist: Some(dist),
            mass,
        }
    }

    pub fn to_space(&self) -> Result<Space> {
        if self.points.len() != self.mass.len() {
            return Err(Error::LengthMismatch {
                expected: self.points.len(),
                got: self.mass.len(),
            });
        }
        let labels = self.points.iter().map(|p| p.to_string()).collect();
        let dist = match (&self.coords, &self.dist) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidSpace(
                    "give either coords or dist, not both".into(),
                ))
            }
            (Some(coords), None) => {
                match self.metric.as_deref() {
                    Some("euclidean") | None => {}
                    Some(m) => return Err(Error::InvalidSpace(format!("unknown metric {m:?}"))),
                }
                if coords.len() != self.mass.len() {
                    return Err(Error::LengthMismatch {
                        expected: self.mass.len(),
                        got: coords.len(),
                    });
                }
                coords
                    .iter()
                    .map(|a| {
                        coords
                            .iter()
                            .map(|b| {
                                if a.len() != b.len() {
                                    return Err(Error::InvalidSpace(
                                        "coordinates of mixed dimension".into(),
                                    ));
                                }
                                Ok(a.iter()
                                    .zip(b)
                                    .map(|(x, y)| (x - y) * (x - y))
                                    .sum::<f64>()
                                    .sqrt())
                            })
                            .collect::<Result<Vec<f64>>>()
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            (None, Some(d)) => d.clone(),
            (None, None) => return Err(Error::InvalidSpace("missing coords or dist".into())),
        };
        Space::with_labels(labels, dist, self.mass.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ExponentSpec {
    Constant {
        value: f64,
    },
    Values {
        values: Vec<f64>,
    },
    LogHolder {
        p_inf: f64,
        amplitude: f64,
        base_point: usize,
    },
}

impl ExponentSpec {
    pub fn resolve(&self, space: &Space) -> Result<Exponent> {
        let e = match self {
            ExponentSpec::Constant { value } => Exponent::constant(*value, space.len())?,
            ExponentSpec::Values { values } => {
                if values.len() != space.len() {
                    return Err(Error::LengthMismatch {
                        expected: space.len(),
                        got: values.len(),
                    });
                }
                Exponent::new(values.clone())?
            }
            ExponentSpec::LogHolder {
                p_inf,
                amplitude,
                base_point,
            } => Exponent::log_holder(space, *p_inf, *amplitude, *base_point)?,
        };
        Ok(e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum WeightSpec {
    Constant {
        #[serde(default = "one")]
        value: f64,
    },
    Values {
        values: Vec<f64>,
    },
    Power {
        a: f64,
        base_point: usize,
    },
}

fn one() -> f64 {
    1.0
}

impl WeightSpec {
    pub fn resolve(&self, space: &Space) -> Result<Weight> {
        match self {
            WeightSpec::Constant { value } => Weight::new(vec![*value; space.len()]),
            WeightSpec::Values { values } => {
                if values.len() != space.len() {
                    return Err(Error::LengthMismatch {
                        expected: space.len(),
                        got: values.len(),
                    });
                }
                Weight::new(values.clone())
            }
            WeightSpec::Power { a, base_point } => Weight::power(space, *a, *base_point),
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// Hex SHA-256 of a file's bytes.
pub fn file_hash(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn space_file_forms() {
        let json =
            r#"{"points":[0,1,2],"coords":[[0],[0.5],[1.5]],"metric":"euclidean","mass":[1,1,2]}"#;
        let f: SpaceFile = serde_json::from_str(json).unwrap();
        let s = f.to_space().unwrap();
        assert_eq!(s.dist(0, 2), 1.5);
        let json = r#"{"points":["a","b"],"dist":[[0,2],[2,0]],"mass":[1,1]}"#;
        let f: SpaceFile = serde_json::from_str(json).unwrap();
        let s = f.to_space().unwrap();
        assert_eq!(s.labels(), &["a".to_string(), "b".to_string()]);
        let bad = r#"{"points":[0,1],"dist":[[0,2],[1,0]],"mass":[1,1]}"#;
        let f: SpaceFile = serde_json::from_str(bad).unwrap();
        assert!(f.to_space().is_err());
        let none = r#"{"points":[0],"mass":[1]}"#;
        assert!(serde_json::from_str::<SpaceFile>(none)
            .unwrap()
            .to_space()
            .is_err());
    }

    #[test]
    fn specs() {
        let s = SpaceFile::from_coords(vec![vec![0.0], vec![1.0]], vec![1.0, 1.0])
            .to_space()
            .unwrap();
        let e: ExponentSpec = serde_json::from_str(r#"{"type":"constant","value":2}"#).unwrap();
        assert_eq!(e.resolve(&s).unwrap().values(), &[2.0, 2.0]);
        let e: ExponentSpec = serde_json::from_str(
            r#"{"type":"log-holder","p_inf":2,"amplitude":0.5,"base_point":0}"#,
        )
        .unwrap();
        assert_eq!(e.resolve(&s).unwrap().len(), 2);
        let w: WeightSpec = serde_json::from_str(r#"{"type":"constant"}"#).unwrap();
        assert_eq!(w.resolve(&s).unwrap().values(), &[1.0, 1.0]);
        let w: WeightSpec =
            serde_json::from_str(r#"{"type":"power","a":0,"base_point":1}"#).unwrap();
        assert_eq!(w.resolve(&s).unwrap().values(), &[1.0, 1.0]);
        let w: WeightSpec = serde_json::from_str(r#"{"type":"values","values":[1]}"#).unwrap();
        assert!(w.resolve(&s).is_err());
    }
}
