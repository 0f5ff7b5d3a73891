//! Input files: `{"system": [<poly>...], "point": [[re, im], ...]}`.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{Point, PolyJson, PolySystem};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputJson {
    pub system: Vec<PolyJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug)]
pub struct Input {
    pub system: PolySystem,
    pub point: Option<Point>,
}

impl Input {
    pub fn to_json(&self) -> InputJson {
        InputJson {
            system: self.system.to_json(),
            point: self.point.as_ref().map(|p| p.iter().map(|z| [z.re, z.im]).collect()),
        }
    }

    /// The point, which `certify` and `check` require.
    pub fn require_point(&self) -> Result<&Point> {
        self.point.as_ref().ok_or_else(|| Error::Input("input has no \"point\" field".into()))
    }
}

/// Deserializes `text`, reporting the JSON path and line of the first problem.
pub fn from_json_str<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Input(format!("line {}, column {}, at {path}: {inner}", inner.line(), inner.column()))
    })
}

pub fn parse_input(text: &str) -> Result<Input> {
    let j: InputJson = from_json_str(text)?;
    let system = PolySystem::from_json(&j.system)?;
    let point = match j.point {
        None => None,
        Some(p) => {
            if p.len() != system.n() {
                return Err(Error::Input(format!("point has {} coordinates, system has {} variables", p.len(), system.n())));
            }
            if p.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Input("point has a non-finite coordinate".into()));
            }
            Some(p.iter().map(|z| Complex64::new(z[0], z[1])).collect())
        }
    };
    Ok(Input { system, point })
}

pub fn read_input(path: &Path) -> Result<Input> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    parse_input(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    const WORKED: &str = r#"{
  "system": [
    {"n": 2, "terms": [{"exp": [2, 0], "re": 1.0}, {"exp": [0, 0], "re": -0.0001}]},
    {"n": 2, "terms": [{"exp": [1, 0], "re": 1.0}, {"exp": [0, 1], "re": 1.0}, {"exp": [3, 0], "re": -0.01}]}
  ],
  "point": [[0.001, 0.0], [-0.001, 0.0]]
}"#;

    #[test]
    fn parses_worked_input() {
        let input = parse_input(WORKED).unwrap();
        assert_eq!(input.system.n(), 2);
        assert_eq!(input.require_point().unwrap()[1], Complex64::new(-0.001, 0.0));
        let again = parse_input(&serde_json::to_string(&input.to_json()).unwrap()).unwrap();
        assert_eq!(again.system, input.system);
    }

    #[test]
    fn errors_name_the_field() {
        let bad = WORKED.replace("\"re\": -0.01", "\"re\": \"x\"");
        let msg = parse_input(&bad).unwrap_err().to_string();
        assert!(msg.contains("system[1].terms[2].re"), "{msg}");
        assert!(msg.contains("line 4"), "{msg}");

        let short = WORKED.replace("[[0.001, 0.0], [-0.001, 0.0]]", "[[0.001, 0.0]]");
        assert!(parse_input(&short).unwrap_err().to_string().contains("1 coordinates"));

        let typo = WORKED.replace("\"point\"", "\"pont\"");
        assert!(parse_input(&typo).unwrap_err().to_string().contains("pont"));
    }

    #[test]
    fn point_is_optional() {
        let q = r#"{"system": [{"n": 1, "terms": [{"exp": [2], "re": 1.0}]}]}"#;
        let input = parse_input(q).unwrap();
        assert!(input.point.is_none());
        assert!(input.require_point().is_err());
    }
}
