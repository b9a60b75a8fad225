use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::topology::{NodeId, Topology, TopologyError};

/// Textual topology description used by configs and the CLI.
///
/// `clique:N`, `star:K`, `random:N:P:SEED` or `file:PATH`, optionally
/// followed by `@W` to set (or override) the designated node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TopologySpec {
    pub shape: Shape,
    pub designated: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Clique(usize),
    Star(usize),
    Random { n: usize, p: f64, seed: u64 },
    File(PathBuf),
}

impl TopologySpec {
    pub fn clique(n: usize) -> Self {
        TopologySpec { shape: Shape::Clique(n), designated: None }
    }

    pub fn star(leaves: usize) -> Self {
        TopologySpec { shape: Shape::Star(leaves), designated: None }
    }

    pub fn build(&self) -> Result<Topology, TopologyError> {
        let topo = match &self.shape {
            Shape::Clique(n) => Topology::clique(*n)?,
            Shape::Star(k) => Topology::star(*k)?,
            Shape::Random { n, p, seed } => Topology::random_multihop(*n, *p, *seed)?,
            Shape::File(path) => Topology::from_file(path)?,
        };
        match self.designated {
            Some(w) => topo.with_designated(w),
            None => Ok(topo),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid topology spec `{spec}`: {reason}")]
pub struct SpecError {
    pub spec: String,
    pub reason: String,
}

impl FromStr for TopologySpec {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let fail = |reason: &str| SpecError { spec: s.to_string(), reason: reason.to_string() };
        let (body, designated) = match s.rsplit_once('@') {
            Some((body, w)) => (body, Some(w.parse::<NodeId>().map_err(|_| fail("bad designated node"))?)),
            None => (s, None),
        };
        let (kind, args) = body.split_once(':').ok_or_else(|| fail("expected KIND:ARGS"))?;
        let shape = match kind {
            "clique" => Shape::Clique(args.parse().map_err(|_| fail("bad node count"))?),
            "star" => Shape::Star(args.parse().map_err(|_| fail("bad leaf count"))?),
            "random" => {
                let parts: Vec<&str> = args.split(':').collect();
                let [n, p, seed] = parts[..] else {
                    return Err(fail("expected random:N:P:SEED"));
                };
                Shape::Random {
                    n: n.parse().map_err(|_| fail("bad node count"))?,
                    p: p.parse().map_err(|_| fail("bad edge probability"))?,
                    seed: seed.parse().map_err(|_| fail("bad seed"))?,
                }
            }
            "file" if !args.is_empty() => Shape::File(PathBuf::from(args)),
            _ => return Err(fail("unknown topology kind")),
        };
        Ok(TopologySpec { shape, designated })
    }
}

impl fmt::Display for TopologySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.shape {
            Shape::Clique(n) => write!(f, "clique:{n}")?,
            Shape::Star(k) => write!(f, "star:{k}")?,
            Shape::Random { n, p, seed } => write!(f, "random:{n}:{p}:{seed}")?,
            Shape::File(path) => write!(f, "file:{}", path.display())?,
        }
        if let Some(w) = self.designated {
            write!(f, "@{w}")?;
        }
        Ok(())
    }
}

impl TryFrom<String> for TopologySpec {
    type Error = SpecError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<TopologySpec> for String {
    fn from(spec: TopologySpec) -> Self {
        spec.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print() {
        for s in ["clique:8", "star:5", "random:100:0.1:7", "file:/tmp/g.txt", "random:10:0.5:1@3"] {
            let spec: TopologySpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("clique".parse::<TopologySpec>().is_err());
        assert!("torus:4".parse::<TopologySpec>().is_err());
        assert!("random:4:0.5".parse::<TopologySpec>().is_err());
    }

    #[test]
    fn designated_suffix_applies() {
        let topo = "clique:4@2".parse::<TopologySpec>().unwrap().build().unwrap();
        assert_eq!(topo.designated(), Some(2));
        assert_eq!(TopologySpec::star(3).build().unwrap().designated(), Some(0));
    }
}
