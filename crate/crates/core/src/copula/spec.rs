//! JSON copula specs.
//!
//! ```text
//! {"type":"frank","lambda":5.0}
//! {"type":"fgm","theta":0.5}
//! {"type":"mixture","weights":[0.3,0.7],"components":[{...},{...}]}
//! {"type":"m-density","variant":1,"h":"poly:[0,1]","g":"poly:[0,0,1]"}
//! {"type":"pi"} {"type":"m"} {"type":"w"}
//! ```

use serde_json::Value;

use super::{make_m_copula, CopulaModel, MDensitySpec, MVariant, UnitFn};
use crate::error::{Error, Result};

/// Parse a JSON copula spec from text.
pub fn parse_copula_spec(text: &str) -> Result<CopulaModel> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| Error::spec("copula", format!("invalid JSON: {e}")))?;
    parse_copula_json(&value)
}

pub fn parse_copula_json(value: &Value) -> Result<CopulaModel> {
    parse_at(value, "copula")
}

fn number(obj: &Value, path: &str, key: &str) -> Result<f64> {
    obj.get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::spec(format!("{path}.{key}"), "missing or not a number"))
}

fn parse_at(value: &Value, path: &str) -> Result<CopulaModel> {
    let kind = value
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::spec(format!("{path}.type"), "missing or not a string"))?;
    let with_field = |field: &str, e: Error| match e {
        Error::InvalidParameter(msg) => Error::spec(format!("{path}.{field}"), msg),
        other => other,
    };
    match kind.to_ascii_lowercase().as_str() {
        "pi" | "independence" | "product" => Ok(CopulaModel::Pi),
        "m" | "frechet-m" | "upper" => Ok(CopulaModel::FrechetM),
        "w" | "frechet-w" | "lower" => Ok(CopulaModel::FrechetW),
        "frank" => {
            let lambda = number(value, path, "lambda")?;
            CopulaModel::frank(lambda).map_err(|e| with_field("lambda", e))
        }
        "fgm" => {
            let theta = number(value, path, "theta")?;
            CopulaModel::fgm(theta).map_err(|e| with_field("theta", e))
        }
        "mixture" => {
            let weights = value
                .get("weights")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::spec(format!("{path}.weights"), "missing or not an array"))?;
            let comps = value
                .get("components")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::spec(format!("{path}.components"), "missing or not an array"))?;
            if weights.len() != comps.len() {
                return Err(Error::spec(
                    format!("{path}.weights"),
                    format!("{} weights for {} components", weights.len(), comps.len()),
                ));
            }
            let mut parts = Vec::with_capacity(comps.len());
            for (k, (w, c)) in weights.iter().zip(comps).enumerate() {
                let w = w
                    .as_f64()
                    .ok_or_else(|| Error::spec(format!("{path}.weights[{k}]"), "not a number"))?;
                parts.push((w, parse_at(c, &format!("{path}.components[{k}]"))?));
            }
            CopulaModel::mixture(parts).map_err(|e| with_field("weights", e))
        }
        "m-density" | "mdensity" => {
            let variant = value
                .get("variant")
                .and_then(Value::as_u64)
                .ok_or_else(|| Error::spec(format!("{path}.variant"), "missing or not an integer"))?;
            let variant = MVariant::from_index(variant as u32)
                .map_err(|_| Error::spec(format!("{path}.variant"), "expected 1..4"))?;
            let profile = |key: &str| -> Result<UnitFn> {
                let s = value
                    .get(key)
                    .and_then(Value::as_str)
                    .ok_or_else(|| Error::spec(format!("{path}.{key}"), "missing or not a string"))?;
                parse_unit_fn(s).map_err(|e| match e {
                    Error::Spec { message, .. } => Error::spec(format!("{path}.{key}"), message),
                    other => other,
                })
            };
            let spec = MDensitySpec::new(profile("h")?, profile("g")?, variant);
            make_m_copula(&spec)
        }
        other => Err(Error::spec(format!("{path}.type"), format!("unknown copula type `{other}`"))),
    }
}

/// Parse a profile function. Only `poly:[c0,c1,...]` (constant first) is
/// supported.
pub fn parse_unit_fn(text: &str) -> Result<UnitFn> {
    let body = text
        .strip_prefix("poly:")
        .ok_or_else(|| Error::spec("profile", format!("expected `poly:[...]`, got `{text}`")))?;
    let coeffs: Vec<f64> = serde_json::from_str(body)
        .map_err(|e| Error::spec("profile", format!("bad coefficient list `{body}`: {e}")))?;
    if coeffs.is_empty() {
        return Err(Error::spec("profile", "empty coefficient list"));
    }
    Ok(UnitFn::polynomial(&coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_builtins() {
        let c = parse_copula_spec(r#"{"type":"frank","lambda":5.0}"#).unwrap();
        assert!(matches!(c, CopulaModel::Frank(_)));
        let c = parse_copula_spec(r#"{"type":"fgm","theta":0.5}"#).unwrap();
        assert!((c.cdf(0.5, 0.5) - (0.25 + 0.5 / 16.0)).abs() < 1e-15);
    }

    #[test]
    fn parses_mixture_and_m_density() {
        let text = r#"{"type":"mixture","weights":[0.3,0.7],"components":[
            {"type":"m"},
            {"type":"m-density","variant":1,"h":"poly:[0,1]","g":"poly:[0,0,1]"}]}"#;
        let c = parse_copula_spec(text).unwrap();
        assert!((c.singular_m_mass() - 0.3).abs() < 1e-15);
        assert!((c.cdf(1.0, 0.4) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn errors_name_the_field() {
        let err = parse_copula_spec(r#"{"type":"frank"}"#).unwrap_err();
        assert!(matches!(&err, Error::Spec { field, .. } if field == "copula.lambda"), "{err}");
        let err = parse_copula_spec(r#"{"type":"fgm","theta":3}"#).unwrap_err();
        assert!(matches!(&err, Error::Spec { field, .. } if field == "copula.theta"), "{err}");
        let err = parse_copula_spec(
            r#"{"type":"mixture","weights":[0.5,0.5],"components":[{"type":"pi"},{"type":"zzz"}]}"#,
        )
        .unwrap_err();
        assert!(matches!(&err, Error::Spec { field, .. } if field == "copula.components[1].type"));
        let err = parse_copula_spec(r#"{"type":"m-density","variant":2,"h":"sin","g":"poly:[1]"}"#)
            .unwrap_err();
        assert!(matches!(&err, Error::Spec { field, .. } if field == "copula.h"));
    }
}
