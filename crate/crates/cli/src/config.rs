//! Session configuration files.

use std::path::Path;

use pseudoshift::criteria::{Horizons, SampleSpec};
use pseudoshift::selfmap::SelfMapRule;
use pseudoshift::seqspace::{FinSeq, JsonScalar, SpaceSpec};
use pseudoshift::weights::WeightRule;
use serde::Deserialize;

use crate::Failure;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    #[default]
    Float,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum RawSamples {
    List(Vec<u64>),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    map: SelfMapRule,
    weights: WeightRule,
    #[serde(default = "default_space")]
    space: SpaceSpec,
    #[serde(default)]
    horizons: Horizons,
    #[serde(default)]
    mode: Mode,
    sample_k: Option<RawSamples>,
}

fn default_space() -> SpaceSpec {
    SpaceSpec::Lp(2.0)
}

#[derive(Clone, Debug)]
pub struct SessionConfig {
    pub map: SelfMapRule,
    pub weights: WeightRule,
    pub space: SpaceSpec,
    pub horizons: Horizons,
    pub mode: Mode,
    pub samples: SampleSpec,
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Failure::NoInput(format!("{}: no such file", path.display())),
        _ => Failure::NoInput(format!("{}: {e}", path.display())),
    })
}

fn located(path: &Path, e: serde_path_to_error::Error<serde_json::Error>) -> Failure {
    let inner = e.inner();
    let text = inner.to_string();
    let message = text.rsplit_once(" at line ").map_or(text.as_str(), |(m, _)| m);
    let field = e.path().to_string();
    let at = if field == "." { String::new() } else { format!(" (field `{field}`)") };
    Failure::Data(format!(
        "{}:{}:{}: {message}{at}",
        path.display(),
        inner.line(),
        inner.column()
    ))
}

impl SessionConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = read(path)?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| located(path, e))?;
        let field = |name: &str, e: pseudoshift::Error| Failure::Data(format!("{}: field `{name}`: {e}", path.display()));
        raw.map.validate().map_err(|e| field("map", e))?;
        raw.weights.validate().map_err(|e| field("weights", e))?;
        raw.space.validate().map_err(|e| field("space", e))?;
        let h = raw.horizons;
        if h.orbit == 0 || h.series_terms == 0 || h.preimage_scan == 0 {
            return Err(Failure::Data(format!("{}: field `horizons`: every horizon must be >= 1", path.display())));
        }
        let samples = match raw.sample_k {
            None => SampleSpec::Generators { cover: h.orbit },
            Some(RawSamples::List(ks)) => SampleSpec::Explicit(ks),
            Some(RawSamples::Text(s)) => s
                .parse()
                .map_err(|e: String| Failure::Data(format!("{}: field `sample_k`: {e}", path.display())))?,
        };
        if let SampleSpec::Explicit(ks) = &samples {
            if ks.is_empty() || ks.contains(&0) {
                return Err(Failure::Data(format!(
                    "{}: field `sample_k`: indices must be a nonempty list of positive integers",
                    path.display()
                )));
            }
        }
        Ok(SessionConfig {
            map: raw.map,
            weights: raw.weights,
            space: raw.space,
            horizons: h,
            mode: raw.mode,
            samples,
        })
    }
}

/// A vector file: `{"entries": {"index": value, ...}}`.
pub fn load_vector<S: JsonScalar>(path: &Path) -> Result<FinSeq<S>, Failure> {
    let text = read(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| located(path, e))
}
