//! Plain-text `key = value` run configuration with dotted section
//! prefixes. Unknown keys are rejected with their line number so silent
//! typos cannot skew an experiment.

use contagion::{Coupling, Error, ModelSpec, PolicyVariant, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Mc,
    Is1d,
    IsHom,
    IsAstar,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mc => "mc",
            Method::Is1d => "is1d",
            Method::IsHom => "is-hom",
            Method::IsAstar => "is-astar",
        }
    }

    pub fn variant(self) -> PolicyVariant {
        match self {
            Method::Mc => PolicyVariant::None,
            Method::Is1d => PolicyVariant::Optimal1d,
            Method::IsHom => PolicyVariant::Homogeneous,
            Method::IsAstar => PolicyVariant::AStarMajorant,
        }
    }

    fn parse(s: &str) -> Option<Method> {
        match s {
            "mc" => Some(Method::Mc),
            "is1d" => Some(Method::Is1d),
            "is-hom" => Some(Method::IsHom),
            "is-astar" => Some(Method::IsAstar),
            _ => None,
        }
    }
}

/// Everything a run needs: the model template, the threshold list, the
/// sampler choice, and the batching plan.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub d: usize,
    pub n: u32,
    pub a: Vec<f64>,
    pub w: Vec<f64>,
    pub b: f64,
    pub coupling: Coupling,
    pub horizon: f64,
    pub thresholds: Vec<f64>,
    pub method: Option<Method>,
    pub c_override: Option<f64>,
    pub batches: u32,
    pub samples: u32,
    pub seed: u64,
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut d: Option<usize> = None;
        let mut n: Option<u32> = None;
        let mut a: Option<Vec<f64>> = None;
        let mut w: Option<Vec<f64>> = None;
        let mut b: Option<f64> = None;
        let mut coupling: Option<Coupling> = None;
        let mut horizon: Option<f64> = None;
        let mut thresholds: Option<Vec<f64>> = None;
        let mut method: Option<Method> = None;
        let mut c_override: Option<f64> = None;
        let mut batches: Option<u32> = None;
        let mut samples: Option<u32> = None;
        let mut seed: Option<u64> = None;
        let mut workers: Option<usize> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {line_no}: expected `key = value`, got `{line}`"))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "model.d" => d = Some(parse_one(value, line_no)?),
                "model.n" => n = Some(parse_one(value, line_no)?),
                "model.a" => a = Some(parse_list(value, line_no)?),
                "model.w" => w = Some(parse_list(value, line_no)?),
                "model.b" => b = Some(parse_one(value, line_no)?),
                "model.coupling" => {
                    coupling = Some(match value {
                        "portfolio" => Coupling::Portfolio,
                        "group" => Coupling::Group,
                        other => {
                            return Err(Error::Config(format!(
                                "line {line_no}: coupling must be `portfolio` or `group`, got `{other}`"
                            )))
                        }
                    })
                }
                "horizon" => horizon = Some(parse_one(value, line_no)?),
                "threshold" => thresholds = Some(parse_list(value, line_no)?),
                "sampler.method" => {
                    method = Some(Method::parse(value).ok_or_else(|| {
                        Error::Config(format!(
                            "line {line_no}: method must be one of mc, is1d, is-hom, is-astar; got `{value}`"
                        ))
                    })?)
                }
                "sampler.c" => c_override = Some(parse_one(value, line_no)?),
                "run.batches" => batches = Some(parse_one(value, line_no)?),
                "run.samples" => samples = Some(parse_one(value, line_no)?),
                "run.seed" => seed = Some(parse_one(value, line_no)?),
                "run.workers" => workers = Some(parse_one(value, line_no)?),
                other => {
                    return Err(Error::Config(format!("line {line_no}: unknown key `{other}`")))
                }
            }
        }

        let a = a.ok_or_else(|| Error::Config("missing key model.a".into()))?;
        let d = d.unwrap_or(a.len());
        let w = match w {
            Some(w) => w,
            None if d == 1 => vec![1.0],
            None => {
                return Err(Error::Config(format!(
                    "missing key model.w (required for {d} groups)"
                )))
            }
        };
        Ok(RunConfig {
            d,
            n: n.ok_or_else(|| Error::Config("missing key model.n".into()))?,
            a,
            w,
            b: b.unwrap_or(0.0),
            coupling: coupling.unwrap_or_default(),
            horizon: horizon.ok_or_else(|| Error::Config("missing key horizon".into()))?,
            thresholds: thresholds
                .ok_or_else(|| Error::Config("missing key threshold".into()))?,
            method,
            c_override,
            batches: batches.unwrap_or(100),
            samples: samples.unwrap_or(5000),
            seed: seed.unwrap_or(1),
            workers,
        })
    }

    pub fn spec_for(&self, z: f64) -> Result<ModelSpec> {
        ModelSpec::new(
            self.d,
            self.w.clone(),
            self.a.clone(),
            self.b,
            self.n,
            self.horizon,
            z,
            self.coupling,
        )
    }
}

fn parse_one<T: std::str::FromStr>(value: &str, line_no: usize) -> Result<T> {
    value.parse().map_err(|_| {
        Error::Config(format!(
            "line {line_no}: cannot parse `{value}` as {}",
            std::any::type_name::<T>()
        ))
    })
}

fn parse_list(value: &str, line_no: usize) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse_one(v.trim(), line_no)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_config_round_trips() {
        let cfg = RunConfig::parse(
            "# two-group benchmark\n\
             model.d = 2\n\
             model.n = 125\n\
             model.a = 0.01, 0.05\n\
             model.w = 0.8, 0.2\n\
             model.b = 5\n\
             model.coupling = group\n\
             horizon = 5\n\
             threshold = 0.10, 0.20, 0.40\n\
             sampler.method = is-astar\n\
             run.batches = 50\n\
             run.samples = 1000\n\
             run.seed = 9\n\
             run.workers = 2\n",
        )
        .unwrap();
        assert_eq!(cfg.d, 2);
        assert_eq!(cfg.thresholds, vec![0.10, 0.20, 0.40]);
        assert_eq!(cfg.method, Some(Method::IsAstar));
        assert_eq!(cfg.coupling, Coupling::Group);
        assert_eq!((cfg.batches, cfg.samples, cfg.seed), (50, 1000, 9));
        assert_eq!(cfg.workers, Some(2));
        let spec = cfg.spec_for(0.2).unwrap();
        assert_eq!(spec.n(), 125);
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = RunConfig::parse(
            "model.n = 10\nmodel.a = 0.01\nhorizon = 5\nthreshold = 0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.d, 1);
        assert_eq!(cfg.w, vec![1.0]);
        assert_eq!(cfg.b, 0.0);
        assert_eq!(cfg.coupling, Coupling::Portfolio);
        assert_eq!((cfg.batches, cfg.samples, cfg.seed), (100, 5000, 1));
        assert!(cfg.workers.is_none());
        assert!(cfg.method.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected_with_line_numbers() {
        let err = RunConfig::parse("model.n = 10\nmodel.alpha = 3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
        assert!(msg.contains("model.alpha"), "{msg}");
    }

    #[test]
    fn malformed_values_name_their_line() {
        let err = RunConfig::parse("model.n = ten\n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        let err = RunConfig::parse("model.a = 0.01\nsampler.method = is2d\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = RunConfig::parse("model.n = 5 extra\n").unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let cfg = RunConfig::parse(
            "\n# header\nmodel.n = 10   # trailing\n\nmodel.a = 0.01\nhorizon = 5\nthreshold = 0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.n, 10);
    }

    #[test]
    fn multi_group_without_weights_is_an_error() {
        let err =
            RunConfig::parse("model.n = 10\nmodel.a = 0.01, 0.05\nhorizon = 5\nthreshold = 0.5\n")
                .unwrap_err();
        assert!(err.to_string().contains("model.w"), "{err}");
    }
}
