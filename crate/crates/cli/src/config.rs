//! Experiment configuration: a single JSON document with per-experiment
//! defaults, strict about unknown keys so typos fail loudly.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use nctorus_core::angle::Angle;
use nctorus_core::circle::{TrigPoly, WindingMap};
use nctorus_core::counterexample::{liouville_theta, GrowthSchedule, LiouvilleAngle};
use nctorus_core::torus::NcPoly;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("spec parse error in {what} at position {position}: {message}")]
    Spec { what: &'static str, position: usize, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    TraceInvariance,
    ErgodicAverage,
    SpectralMeasure,
    Cohomology,
    WeightedAverage,
    ClassicalCrosscheck,
    Counterexample,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub enum ThetaSpec {
    #[serde(rename = "golden")]
    Golden(bool),
    #[serde(rename = "radians")]
    Radians(f64),
    #[serde(rename = "two_pi_times")]
    TwoPiTimes(f64),
    #[serde(rename = "liouville_levels")]
    LiouvilleLevels(usize),
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub enum LambdaSpec {
    #[serde(rename = "one")]
    One(bool),
    #[serde(rename = "angle")]
    AngleRadians(f64),
    #[serde(rename = "re_im")]
    ReIm(f64, f64),
    /// e^{imθ} for the resolved θ: the continuous eigenvalues.
    #[serde(rename = "theta_multiple")]
    ThetaMultiple(i64),
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum ElementSpec {
    Named(String),
    Terms { terms: Vec<(i64, i64, f64, f64)> },
}

/// The raw config document; unknown keys are rejected.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: Experiment,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub theta: Option<ThetaSpec>,
    #[serde(default)]
    pub f: Option<String>,
    #[serde(default)]
    pub a: Option<ElementSpec>,
    #[serde(default)]
    pub lambda: Option<LambdaSpec>,
    #[serde(default)]
    pub n_schedule: Option<Vec<u64>>,
    #[serde(default)]
    pub k_schedule: Option<Vec<i64>>,
    #[serde(default)]
    pub n_range: Option<i64>,
    #[serde(default)]
    pub grid: Option<usize>,
    #[serde(default)]
    pub trunc: Option<i64>,
    #[serde(default)]
    pub tail_tol: Option<f64>,
    #[serde(default)]
    pub projection: Option<String>,
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub levels: Option<usize>,
    #[serde(default)]
    pub nu_two_pi_times: Option<f64>,
    #[serde(default)]
    pub window: Option<(u64, u64)>,
    #[serde(default)]
    pub h: Option<ElementSpec>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub iterations: Option<u64>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub points: Option<usize>,
    #[serde(default)]
    pub output_dir: Option<String>,
}

impl Config {
    pub fn from_json_str(s: &str) -> Result<Config, ConfigError> {
        Ok(serde_json::from_str(s)?)
    }

    /// Apply a `--set key=value` override; values parse as JSON first and
    /// fall back to bare strings.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let mut doc = serde_json::to_value(&*self)?;
        let parsed: serde_json::Value = serde_json::from_str(value)
            .unwrap_or_else(|_| serde_json::Value::String(value.to_string()));
        match doc.as_object_mut() {
            Some(map) => {
                map.insert(key.to_string(), parsed);
            }
            None => return Err(ConfigError::Invalid("config is not an object".into())),
        }
        *self = serde_json::from_value(doc)?;
        Ok(())
    }
}

/// θ resolved together with any Liouville construction behind it.
pub struct ResolvedTheta {
    pub angle: Angle,
    pub liouville: Option<LiouvilleAngle>,
    pub description: serde_json::Value,
}

pub fn resolve_theta(spec: &Option<ThetaSpec>, default_levels: usize)
    -> Result<ResolvedTheta, ConfigError>
{
    let spec = spec.clone().unwrap_or(ThetaSpec::Golden(true));
    match spec {
        ThetaSpec::Golden(_) => Ok(ResolvedTheta {
            angle: Angle::golden(),
            liouville: None,
            description: serde_json::json!({"golden": true}),
        }),
        ThetaSpec::Radians(x) => Ok(ResolvedTheta {
            angle: Angle::from_radians(x),
            liouville: None,
            description: serde_json::json!({"radians": x}),
        }),
        ThetaSpec::TwoPiTimes(x) => Ok(ResolvedTheta {
            angle: Angle::two_pi_times(x),
            liouville: None,
            description: serde_json::json!({"two_pi_times": x}),
        }),
        ThetaSpec::LiouvilleLevels(levels) => {
            let levels = if levels == 0 { default_levels } else { levels };
            let angle = liouville_theta(levels, &GrowthSchedule::default())
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            Ok(ResolvedTheta {
                angle: *angle.theta(),
                description: serde_json::json!({"liouville_levels": levels}),
                liouville: Some(angle),
            })
        }
    }
}

pub fn resolve_lambda(spec: &Option<LambdaSpec>, theta: &Angle) -> C64 {
    match spec.clone().unwrap_or(LambdaSpec::One(true)) {
        LambdaSpec::One(_) => C64::new(1.0, 0.0),
        LambdaSpec::AngleRadians(x) => C64::new(x.cos(), x.sin()),
        LambdaSpec::ReIm(re, im) => {
            let z = C64::new(re, im);
            z / z.norm()
        }
        LambdaSpec::ThetaMultiple(m) => theta.cis_int(m),
    }
}

pub fn resolve_element(
    spec: &Option<ElementSpec>,
    alpha: f64,
    default: &str,
) -> Result<NcPoly, ConfigError> {
    let spec = spec
        .clone()
        .unwrap_or_else(|| ElementSpec::Named(default.to_string()));
    match spec {
        ElementSpec::Named(name) => match name.as_str() {
            "U" => Ok(NcPoly::u_pow(alpha, 1)),
            "V" => Ok(NcPoly::v_pow(alpha, 1)),
            "UV" => Ok(NcPoly::from_terms(alpha, [(1, 1, C64::new(1.0, 0.0))])),
            "one" => Ok(NcPoly::one(alpha)),
            other => Err(ConfigError::Invalid(format!(
                "unknown element '{other}' (expected U, V, UV, one, or explicit terms)"
            ))),
        },
        ElementSpec::Terms { terms } => Ok(NcPoly::from_terms(
            alpha,
            terms.into_iter().map(|(m, n, re, im)| (m, n, C64::new(re, im))),
        )),
    }
}

pub fn resolve_trig_poly(spec: &Option<ElementSpec>, default: &ElementSpec)
    -> Result<TrigPoly, ConfigError>
{
    let spec = spec.clone().unwrap_or_else(|| default.clone());
    match spec {
        ElementSpec::Named(name) => Err(ConfigError::Invalid(format!(
            "'{name}' is not a scalar observable; give explicit terms"
        ))),
        ElementSpec::Terms { terms } => Ok(TrigPoly::from_terms(
            terms.into_iter().map(|(k, _, re, im)| (k, C64::new(re, im))),
        )),
    }
}

// --- circle-map spec grammar -------------------------------------------------
//
//   char:z0=<complex>,w=<int>
//   exp-sin:amp=<real>,freq=<int>
//   exp-cos:amp=<real>,freq=<int>
//   const:nu=<real>            (the gauge twist e^{iν})
//   furstenberg:levels=<int>   (delegates to the Liouville construction)
//
// products are written with '*': "char:z0=1,w=1*exp-sin:amp=0.7,freq=1"

#[derive(Debug)]
pub struct ParsedMap {
    pub map: WindingMap,
    /// Present when a furstenberg factor forced a construction.
    pub construction: Option<(LiouvilleAngle, nctorus_core::counterexample::RoughSolution)>,
}

pub fn parse_f_spec(spec: &str) -> Result<ParsedMap, ConfigError> {
    let mut map = WindingMap::one();
    let mut construction = None;
    let mut offset = 0;
    for part in spec.split('*') {
        let parsed = parse_factor(part, offset)?;
        if let Some(c) = parsed.construction {
            construction = Some(c);
        }
        map = map.mul(&parsed.map);
        offset += part.len() + 1;
    }
    Ok(ParsedMap { map, construction })
}

fn parse_factor(part: &str, offset: usize) -> Result<ParsedMap, ConfigError> {
    let err = |position: usize, message: String| ConfigError::Spec {
        what: "f",
        position: offset + position,
        message,
    };
    let (kind, rest) = part
        .split_once(':')
        .ok_or_else(|| err(0, "expected '<kind>:<args>'".into()))?;
    let mut args = std::collections::BTreeMap::new();
    let mut pos = kind.len() + 1;
    for piece in rest.split(',') {
        let (k, v) = piece
            .split_once('=')
            .ok_or_else(|| err(pos, format!("expected key=value, got '{piece}'")))?;
        args.insert(k.trim().to_string(), (v.trim().to_string(), pos + k.len() + 1));
        pos += piece.len() + 1;
    }
    let take = |key: &str| -> Result<(String, usize), ConfigError> {
        args.get(key)
            .cloned()
            .ok_or_else(|| err(kind.len() + 1, format!("missing '{key}'")))
    };
    match kind.trim() {
        "char" => {
            let (z0s, z0pos) = take("z0")?;
            let (ws, wpos) = take("w")?;
            let z0 = parse_complex(&z0s).map_err(|m| err(z0pos, m))?;
            let w: i64 = ws.parse().map_err(|_| err(wpos, format!("bad integer '{ws}'")))?;
            let map = WindingMap::character(z0 / z0.norm(), w)
                .map_err(|e| err(z0pos, e.to_string()))?;
            Ok(ParsedMap { map, construction: None })
        }
        "exp-sin" | "exp-cos" => {
            let (amps, apos) = take("amp")?;
            let (freqs, fpos) = take("freq")?;
            let amp: f64 = amps.parse().map_err(|_| err(apos, format!("bad real '{amps}'")))?;
            let freq: i64 =
                freqs.parse().map_err(|_| err(fpos, format!("bad integer '{freqs}'")))?;
            let map = if kind.trim() == "exp-sin" {
                WindingMap::exp_sin(amp, freq)
            } else {
                WindingMap::exp_cos(amp, freq)
            };
            Ok(ParsedMap { map, construction: None })
        }
        "const" => {
            let (nus, npos) = take("nu")?;
            let nu: f64 = nus.parse().map_err(|_| err(npos, format!("bad real '{nus}'")))?;
            Ok(ParsedMap { map: WindingMap::constant(nu), construction: None })
        }
        "furstenberg" => {
            let (ls, lpos) = take("levels")?;
            let levels: usize =
                ls.parse().map_err(|_| err(lpos, format!("bad integer '{ls}'")))?;
            let angle = liouville_theta(levels, &GrowthSchedule::default())
                .map_err(|e| err(lpos, e.to_string()))?;
            let g = nctorus_core::counterexample::RoughSolution::new(&angle, levels, None)
                .map_err(|e| err(lpos, e.to_string()))?;
            let nu = std::f64::consts::TAU * (2.0_f64.sqrt() - 1.0);
            let (map, _) = nctorus_core::counterexample::furstenberg_f(&angle, &g, nu);
            Ok(ParsedMap { map, construction: Some((angle, g)) })
        }
        other => Err(err(0, format!("unknown map kind '{other}'"))),
    }
}

/// Complex literals: "1", "-0.5", "i", "-i", "0.6+0.8i", "expi(1.2)".
pub fn parse_complex(s: &str) -> Result<C64, String> {
    let s = s.trim();
    if let Some(inner) = s.strip_prefix("expi(").and_then(|r| r.strip_suffix(')')) {
        let x: f64 = inner.parse().map_err(|_| format!("bad angle '{inner}'"))?;
        return Ok(C64::new(x.cos(), x.sin()));
    }
    if s == "i" {
        return Ok(C64::new(0.0, 1.0));
    }
    if s == "-i" {
        return Ok(C64::new(0.0, -1.0));
    }
    if let Some(im_part) = s.strip_suffix('i') {
        // split at the last +/- that is not an exponent sign or leading sign
        let bytes = im_part.as_bytes();
        for pos in (1..im_part.len()).rev() {
            let ch = bytes[pos] as char;
            if (ch == '+' || ch == '-') && bytes[pos - 1] as char != 'e' && bytes[pos - 1] as char != 'E'
            {
                let re: f64 = im_part[..pos]
                    .parse()
                    .map_err(|_| format!("bad real part '{}'", &im_part[..pos]))?;
                let imt = &im_part[pos..];
                let im: f64 = if imt == "+" {
                    1.0
                } else if imt == "-" {
                    -1.0
                } else {
                    imt.parse().map_err(|_| format!("bad imaginary part '{imt}'"))?
                };
                return Ok(C64::new(re, im));
            }
        }
        let im: f64 = im_part.parse().map_err(|_| format!("bad imaginary '{im_part}'"))?;
        return Ok(C64::new(0.0, im));
    }
    let re: f64 = s.parse().map_err(|_| format!("bad number '{s}'"))?;
    Ok(C64::new(re, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("1").unwrap(), C64::new(1.0, 0.0));
        assert_eq!(parse_complex("-2.5").unwrap(), C64::new(-2.5, 0.0));
        assert_eq!(parse_complex("i").unwrap(), C64::new(0.0, 1.0));
        assert_eq!(parse_complex("0.6+0.8i").unwrap(), C64::new(0.6, 0.8));
        assert_eq!(parse_complex("0.6-0.8i").unwrap(), C64::new(0.6, -0.8));
        let z = parse_complex("expi(1.2)").unwrap();
        assert!((z - C64::new(1.2f64.cos(), 1.2f64.sin())).norm() < 1e-15);
        assert!(parse_complex("wat").is_err());
    }

    #[test]
    fn f_specs() {
        let f = parse_f_spec("char:z0=1,w=1").unwrap();
        assert_eq!(f.map.winding(), 1);
        assert!(f.map.phase().is_empty());
        let f = parse_f_spec("exp-sin:amp=0.7,freq=1").unwrap();
        assert_eq!(f.map.winding(), 0);
        assert!((f.map.eval(0.5) - {
            let h = 0.7 * 0.5f64.sin();
            C64::new(h.cos(), h.sin())
        })
        .norm()
            < 1e-14);
        let f = parse_f_spec("char:z0=expi(0.3),w=2*exp-cos:amp=0.4,freq=3").unwrap();
        assert_eq!(f.map.winding(), 2);
        let f = parse_f_spec("furstenberg:levels=3").unwrap();
        assert!(f.construction.is_some());
        assert_eq!(f.map.winding(), 0);
    }

    #[test]
    fn f_spec_errors_carry_positions() {
        match parse_f_spec("char:z0=1") {
            Err(ConfigError::Spec { position, .. }) => assert!(position >= 5),
            other => panic!("expected spec error, got {other:?}"),
        }
        match parse_f_spec("char:z0=1,w=x") {
            Err(ConfigError::Spec { position, .. }) => assert!(position >= 10),
            other => panic!("expected spec error, got {other:?}"),
        }
        assert!(parse_f_spec("nope:a=1").is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let doc = r#"{"experiment": "cohomology", "not_a_key": 1}"#;
        assert!(Config::from_json_str(doc).is_err());
        let doc = r#"{"experiment": "cohomology"}"#;
        assert!(Config::from_json_str(doc).is_ok());
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = Config::from_json_str(r#"{"experiment": "ergodic-average"}"#).unwrap();
        cfg.apply_override("alpha", "0.25").unwrap();
        assert_eq!(cfg.alpha, Some(0.25));
        cfg.apply_override("f", "char:z0=1,w=1").unwrap();
        assert_eq!(cfg.f.as_deref(), Some("char:z0=1,w=1"));
        assert!(cfg.apply_override("bogus_key", "1").is_err());
    }
}
