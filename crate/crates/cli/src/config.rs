//! Run configuration: a JSON document describing the metric, the sample and
//! command options. Validation errors carry the JSON path of the offending
//! value, with 1-based array indices (`a.1.2` is the entry in row 1, column 2).

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use finsler_core::alphabeta::LambdaSource;
use finsler_core::expr::parse;
use finsler_core::sampling::base_points;
use finsler_core::{Error as CoreError, MetricSpec, PhiFamily};

use crate::error::CliError;

pub const DEFAULT_DIRECTIONS: usize = 24;
pub const DEFAULT_BASE_POINTS: usize = 5;
pub const DEFAULT_RADIUS: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpec {
    pub base_points: Vec<Vec<f64>>,
    /// Center and radius when the base points were drawn from a box.
    pub region: Option<(Vec<f64>, f64)>,
    pub directions: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicSpec {
    pub x0: Vec<f64>,
    pub v0: Vec<f64>,
    pub step: f64,
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dim: usize,
    pub a: Vec<Vec<String>>,
    pub b: Vec<String>,
    pub phi: PhiFamily,
    pub metric: MetricSpec,
    pub sample: SampleSpec,
    pub tol: f64,
    pub lambda: LambdaSource,
    pub resolution: usize,
    pub geodesic: Option<GeodesicSpec>,
}

fn err(path: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

fn join(path: &str, key: impl std::fmt::Display) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, CliError> {
    v.as_object().ok_or_else(|| err(path, "expected an object"))
}

fn as_array<'a>(v: &'a Value, path: &str, len: Option<usize>) -> Result<&'a [Value], CliError> {
    let a = v.as_array().ok_or_else(|| err(path, "expected an array"))?;
    match len {
        Some(n) if a.len() != n => Err(err(path, format!("expected {n} entries, found {}", a.len()))),
        _ => Ok(a),
    }
}

fn as_f64(v: &Value, path: &str) -> Result<f64, CliError> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| err(path, "expected a finite number"))
}

fn as_usize(v: &Value, path: &str) -> Result<usize, CliError> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| err(path, "expected a non-negative integer"))
}

fn vector(v: &Value, path: &str, n: usize) -> Result<Vec<f64>, CliError> {
    as_array(v, path, Some(n))?
        .iter()
        .enumerate()
        .map(|(i, e)| as_f64(e, &join(path, i + 1)))
        .collect()
}

fn typed<T: DeserializeOwned>(v: &Value, path: &str) -> Result<T, CliError> {
    serde_json::from_value(v.clone()).map_err(|e| err(path, e.to_string()))
}

/// An expression entry: a string, or a number taken literally.
fn expression(v: &Value, path: &str, dim: usize) -> Result<(String, finsler_core::expr::Expr), CliError> {
    let text = match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        _ => return Err(err(path, "expected an expression string")),
    };
    match parse(&text, dim) {
        Ok(e) => Ok((text, e)),
        Err(CoreError::Parse { offset, message }) => Err(CliError::ConfigParse {
            path: path.to_string(),
            offset,
            message,
        }),
        Err(e) => Err(err(path, e.to_string())),
    }
}

fn required<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value, CliError> {
    obj.get(key).ok_or_else(|| err(&join(path, key), "missing field"))
}

const KNOWN: [&str; 9] = ["dim", "a", "b", "phi", "sample", "tol", "lambda", "resolution", "geodesic"];

impl RunConfig {
    pub fn from_json_text(text: &str) -> Result<RunConfig, CliError> {
        let root: Value = serde_json::from_str(text).map_err(|e| {
            err("", format!("invalid JSON at line {}, column {}: {e}", e.line(), e.column()))
        })?;
        RunConfig::from_value(&root)
    }

    pub fn from_value(root: &Value) -> Result<RunConfig, CliError> {
        let obj = as_object(root, "")?;
        if let Some(k) = obj.keys().find(|k| !KNOWN.contains(&k.as_str())) {
            return Err(err(k, "unknown field"));
        }
        let dim = as_usize(required(obj, "dim", "")?, "dim")?;
        if dim < 2 {
            return Err(err("dim", "dimension must be at least 2"));
        }
        let rows = as_array(required(obj, "a", "")?, "a", Some(dim))?;
        let mut a = Vec::with_capacity(dim);
        let mut a_expr = Vec::with_capacity(dim);
        for (i, row) in rows.iter().enumerate() {
            let rp = join("a", i + 1);
            let entries = as_array(row, &rp, Some(dim))?;
            let (texts, exprs): (Vec<_>, Vec<_>) = entries
                .iter()
                .enumerate()
                .map(|(j, e)| expression(e, &join(&rp, j + 1), dim))
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .unzip();
            a.push(texts);
            a_expr.push(exprs);
        }
        for i in 0..dim {
            for j in i + 1..dim {
                if a_expr[i][j] != a_expr[j][i] {
                    return Err(err(
                        &format!("a.{}.{}", i + 1, j + 1),
                        format!("a is not symmetric: a_{0}{1} = {2:?} but a_{1}{0} = {3:?}", i + 1, j + 1, a[i][j], a[j][i]),
                    ));
                }
            }
        }
        let (b, b_expr): (Vec<_>, Vec<_>) = as_array(required(obj, "b", "")?, "b", Some(dim))?
            .iter()
            .enumerate()
            .map(|(i, e)| expression(e, &join("b", i + 1), dim))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .unzip();
        let phi: PhiFamily = typed(required(obj, "phi", "")?, "phi")?;
        if let PhiFamily::CustomPolynomial { coefficients } = &phi {
            if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
                return Err(err("phi.coefficients", "expected a nonempty list of finite numbers"));
            }
        }
        let metric = MetricSpec::new(dim, a_expr, b_expr, phi.clone()).map_err(|e| err("", e.to_string()))?;

        let tol = match obj.get("tol") {
            Some(v) => positive(as_f64(v, "tol")?, "tol")?,
            None => finsler_core::classify::DEFAULT_TOL,
        };
        let resolution = match obj.get("resolution") {
            Some(v) => {
                let r = as_usize(v, "resolution")?;
                if r == 0 {
                    return Err(err("resolution", "must be positive"));
                }
                r
            }
            None => finsler_core::volume::DEFAULT_RESOLUTION,
        };
        let lambda = match obj.get("lambda") {
            Some(v) => typed(v, "lambda")?,
            None => LambdaSource::Volume,
        };
        let sample = match obj.get("sample") {
            Some(v) => sample_spec(v, dim)?,
            None => sample_spec(&Value::Object(Map::new()), dim)?,
        };
        let geodesic = match obj.get("geodesic") {
            Some(v) => Some(geodesic_spec(v, dim)?),
            None => None,
        };
        Ok(RunConfig {
            dim,
            a,
            b,
            phi,
            metric,
            sample,
            tol,
            lambda,
            resolution,
            geodesic,
        })
    }

    pub fn load(path: &std::path::Path) -> Result<(RunConfig, Vec<u8>), CliError> {
        let bytes = std::fs::read(path).map_err(|e| err("", format!("cannot read {}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes).map_err(|_| err("", "config is not valid UTF-8"))?;
        Ok((RunConfig::from_json_text(text)?, bytes))
    }

    /// Replaces the seed, redrawing base points that came from a box.
    pub fn with_seed(mut self, seed: u64) -> RunConfig {
        self.sample.seed = seed;
        if let Some((center, radius)) = &self.sample.region {
            let n = self.sample.base_points.len();
            self.sample.base_points = base_points(center, *radius, n, seed);
        }
        self
    }
}

fn positive(v: f64, path: &str) -> Result<f64, CliError> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(err(path, "must be positive"))
    }
}

const SAMPLE_KEYS: [&str; 6] = ["base_points", "center", "radius", "count", "directions", "seed"];

fn sample_spec(v: &Value, dim: usize) -> Result<SampleSpec, CliError> {
    let obj = as_object(v, "sample")?;
    if let Some(k) = obj.keys().find(|k| !SAMPLE_KEYS.contains(&k.as_str())) {
        return Err(err(&join("sample", k), "unknown field"));
    }
    let seed = match obj.get("seed") {
        Some(s) => s.as_u64().ok_or_else(|| err("sample.seed", "expected a non-negative integer"))?,
        None => 0,
    };
    let directions = match obj.get("directions") {
        Some(d) => as_usize(d, "sample.directions")?,
        None => DEFAULT_DIRECTIONS,
    };
    let (base_points, region) = match obj.get("base_points") {
        Some(list) => {
            for k in ["center", "radius", "count"] {
                if obj.contains_key(k) {
                    return Err(err(&join("sample", k), "cannot be combined with sample.base_points"));
                }
            }
            let pts = as_array(list, "sample.base_points", None)?;
            if pts.is_empty() {
                return Err(err("sample.base_points", "expected at least one point"));
            }
            let pts = pts
                .iter()
                .enumerate()
                .map(|(i, p)| vector(p, &format!("sample.base_points.{}", i + 1), dim))
                .collect::<Result<_, _>>()?;
            (pts, None)
        }
        None => {
            let center = match obj.get("center") {
                Some(c) => vector(c, "sample.center", dim)?,
                None => vec![0.0; dim],
            };
            let radius = match obj.get("radius") {
                Some(r) => {
                    let r = as_f64(r, "sample.radius")?;
                    if r < 0.0 {
                        return Err(err("sample.radius", "must be non-negative"));
                    }
                    r
                }
                None => DEFAULT_RADIUS,
            };
            let count = match obj.get("count") {
                Some(c) => as_usize(c, "sample.count")?,
                None => DEFAULT_BASE_POINTS,
            };
            if count == 0 {
                return Err(err("sample.count", "must be positive"));
            }
            (base_points(&center, radius, count, seed), Some((center, radius)))
        }
    };
    Ok(SampleSpec {
        base_points,
        region,
        directions,
        seed,
    })
}

fn geodesic_spec(v: &Value, dim: usize) -> Result<GeodesicSpec, CliError> {
    let obj = as_object(v, "geodesic")?;
    let g = "geodesic";
    Ok(GeodesicSpec {
        x0: vector(required(obj, "x0", g)?, "geodesic.x0", dim)?,
        v0: vector(required(obj, "v0", g)?, "geodesic.v0", dim)?,
        step: positive(as_f64(required(obj, "step", g)?, "geodesic.step")?, "geodesic.step")?,
        steps: as_usize(required(obj, "steps", g)?, "geodesic.steps")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> Value {
        serde_json::json!({
            "dim": 2,
            "a": [["1", "0"], ["0", "1"]],
            "b": ["0", "0"],
            "phi": {"family": "riemannian"}
        })
    }

    fn path_of(e: CliError) -> String {
        match e {
            CliError::Config { path, .. } | CliError::ConfigParse { path, .. } => path,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn minimal_euclidean_config_is_valid() {
        let c = RunConfig::from_value(&minimal()).unwrap();
        assert_eq!(c.dim, 2);
        assert_eq!(c.sample.directions, DEFAULT_DIRECTIONS);
        assert_eq!(c.sample.base_points.len(), DEFAULT_BASE_POINTS);
        assert_eq!(c.sample.seed, 0);
        assert!(c.geodesic.is_none());
    }

    #[test]
    fn asymmetric_a_names_the_entry() {
        let mut v = minimal();
        v["a"][0][1] = Value::from("0.1");
        assert_eq!(path_of(RunConfig::from_value(&v).unwrap_err()), "a.1.2");
    }

    #[test]
    fn bad_expression_wraps_the_offset() {
        let mut v = minimal();
        v["b"][0] = Value::from("x1 +");
        match RunConfig::from_value(&v).unwrap_err() {
            CliError::ConfigParse { path, offset, .. } => {
                assert_eq!(path, "b.1");
                assert_eq!(offset, 4);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_and_malformed_fields() {
        let mut v = minimal();
        v.as_object_mut().unwrap().remove("phi");
        assert_eq!(path_of(RunConfig::from_value(&v).unwrap_err()), "phi");
        let mut v = minimal();
        v["tol"] = Value::from(-1.0);
        assert_eq!(path_of(RunConfig::from_value(&v).unwrap_err()), "tol");
        let mut v = minimal();
        v["sample"] = serde_json::json!({"base_points": [[0, 0], [1]]});
        assert_eq!(path_of(RunConfig::from_value(&v).unwrap_err()), "sample.base_points.2");
        let mut v = minimal();
        v["geodesic"] = serde_json::json!({"x0": [0, 0], "v0": [1, 0], "step": 0.1});
        assert_eq!(path_of(RunConfig::from_value(&v).unwrap_err()), "geodesic.steps");
        let mut v = minimal();
        v["colour"] = Value::from(1);
        assert_eq!(path_of(RunConfig::from_value(&v).unwrap_err()), "colour");
    }

    #[test]
    fn numbers_are_accepted_as_expressions() {
        let mut v = minimal();
        v["b"] = serde_json::json!([0.1, "0.2*x1"]);
        v["phi"] = serde_json::json!({"family": "randers"});
        let c = RunConfig::from_value(&v).unwrap();
        assert_eq!(c.b, vec!["0.1".to_string(), "0.2*x1".to_string()]);
    }
}
