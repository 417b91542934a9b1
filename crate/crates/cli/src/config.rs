//! Run configuration: optional TOML file, overridden by command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use delegate_bfs::engine::{BfsOptions, Mode};
use delegate_bfs::partition::{suggested_theta, ClusterShape};
use delegate_bfs::traversal::DirectionFactors;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Theta {
    Fixed(u64),
    Auto,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawTheta {
    Number(u64),
    Text(String),
}

impl<'de> Deserialize<'de> for Theta {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match RawTheta::deserialize(d)? {
            RawTheta::Number(t) => Ok(Theta::Fixed(t)),
            RawTheta::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl Serialize for Theta {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Theta::Fixed(t) => s.serialize_u64(*t),
            Theta::Auto => s.serialize_str("auto"),
        }
    }
}

impl FromStr for Theta {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Theta::Auto);
        }
        s.parse().map(Theta::Fixed).map_err(|_| format!("expected \"auto\" or an integer, got {s:?}"))
    }
}

impl fmt::Display for Theta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Theta::Fixed(t) => write!(f, "{t}"),
            Theta::Auto => f.write_str("auto"),
        }
    }
}

impl Theta {
    pub fn resolve(self, scale: u32) -> u64 {
        match self {
            Theta::Fixed(t) => t,
            Theta::Auto => suggested_theta(scale),
        }
    }
}

/// Three comma-separated forward-to-backward factors in dd,dn,nd order.
pub fn parse_factors(s: &str) -> std::result::Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three factors dd,dn,nd, got {s:?}"));
    }
    let mut out = [0.0; 3];
    for (slot, part) in out.iter_mut().zip(&parts) {
        let x: f64 = part.parse().map_err(|_| format!("bad factor {part:?}"))?;
        if x.is_nan() || x < 0.0 {
            return Err(format!("factor {part:?} must be nonnegative"));
        }
        *slot = x;
    }
    Ok(out)
}

/// Everything a command may read from a config file. All fields optional;
/// flags given on the command line win.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub graph: Option<PathBuf>,
    pub partition: Option<PathBuf>,
    pub scale: Option<u32>,
    pub edge_factor: Option<u64>,
    pub seed: Option<u64>,
    pub theta: Option<Theta>,
    pub shape: Option<String>,
    pub mode: Option<Mode>,
    pub factors: Option<[f64; 3]>,
    pub local_all2all: Option<bool>,
    pub uniquify: Option<bool>,
    pub sources: Option<usize>,
    pub source: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Fills every unset field of `self` from `base`.
    pub fn or(self, base: RunConfig) -> RunConfig {
        RunConfig {
            graph: self.graph.or(base.graph),
            partition: self.partition.or(base.partition),
            scale: self.scale.or(base.scale),
            edge_factor: self.edge_factor.or(base.edge_factor),
            seed: self.seed.or(base.seed),
            theta: self.theta.or(base.theta),
            shape: self.shape.or(base.shape),
            mode: self.mode.or(base.mode),
            factors: self.factors.or(base.factors),
            local_all2all: self.local_all2all.or(base.local_all2all),
            uniquify: self.uniquify.or(base.uniquify),
            sources: self.sources.or(base.sources),
            source: self.source.or(base.source),
            out: self.out.or(base.out),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn shape(&self) -> Result<ClusterShape> {
        match &self.shape {
            None => Ok(ClusterShape::single()),
            Some(s) => Ok(s.parse()?),
        }
    }

    pub fn theta(&self) -> Theta {
        self.theta.unwrap_or(Theta::Auto)
    }

    pub fn factors(&self) -> Result<DirectionFactors> {
        let defaults = DirectionFactors::default();
        match self.factors {
            None => Ok(defaults),
            Some(f) => {
                if f.iter().any(|x| x.is_nan() || *x < 0.0) {
                    bail!("invalid field `factors`: factors must be nonnegative");
                }
                Ok(DirectionFactors::from_factor0(f[0], f[1], f[2]))
            }
        }
    }

    pub fn bfs_options(&self) -> Result<BfsOptions> {
        Ok(BfsOptions {
            mode: self.mode.unwrap_or(Mode::Dobfs),
            factors: self.factors()?,
            local_all2all: self.local_all2all.unwrap_or(false),
            uniquify: self.uniquify.unwrap_or(false),
            source: 0,
            seed: self.seed(),
            ..BfsOptions::default()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_spellings() {
        assert_eq!("auto".parse::<Theta>().unwrap(), Theta::Auto);
        assert_eq!("64".parse::<Theta>().unwrap(), Theta::Fixed(64));
        assert!("sixty".parse::<Theta>().is_err());
        assert_eq!(Theta::Auto.resolve(12), 16);
    }

    #[test]
    fn toml_config() {
        let c: RunConfig = toml::from_str(
            "scale = 12\ntheta = \"auto\"\nshape = \"2x2x2\"\nmode = \"bfs\"\nfactors = [0.5, 0.05, 1e-7]\n",
        )
        .unwrap();
        assert_eq!(c.scale, Some(12));
        assert_eq!(c.theta, Some(Theta::Auto));
        assert_eq!(c.mode, Some(Mode::Bfs));
        let c: RunConfig = toml::from_str("theta = 32").unwrap();
        assert_eq!(c.theta, Some(Theta::Fixed(32)));
        let err = toml::from_str::<RunConfig>("thetta = 32").unwrap_err().to_string();
        assert!(err.contains("thetta"), "{err}");
    }

    #[test]
    fn flags_override_file() {
        let file = RunConfig {
            scale: Some(10),
            seed: Some(3),
            ..Default::default()
        };
        let flags = RunConfig {
            scale: Some(12),
            ..Default::default()
        };
        let c = flags.or(file);
        assert_eq!((c.scale, c.seed), (Some(12), Some(3)));
    }

    #[test]
    fn factor_list() {
        assert_eq!(parse_factors("0.5,0.05,1e-7").unwrap(), [0.5, 0.05, 1e-7]);
        assert!(parse_factors("0.5,0.05").is_err());
        assert!(parse_factors("0.5,-1,2").is_err());
    }
}
