//! Built-in toy base classifiers and the name registry used by the CLI.
//!
//! | name                   | label                                          |
//! |------------------------|------------------------------------------------|
//! | `constant:c`           | always `c`                                     |
//! | `first-bit`            | bit 0                                          |
//! | `parity`               | popcount mod 2                                 |
//! | `degree-threshold:t`   | 1 iff popcount ≥ t                             |
//! | `majority-neighbor`    | most common label among the row's neighbors    |
//! | `proto:command`        | external process speaking the line protocol    |

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use crate::bits::{Label, StructureVector};
use crate::error::{Error, Result};
use crate::graph::node_for_bit;
use crate::protocol::ProtocolClassifier;
use crate::smoothing::BaseClassifier;

pub const TOY_CLASSIFIERS: &[&str] = &["constant:c", "first-bit", "parity", "degree-threshold:t", "majority-neighbor"];

pub struct Constant {
    pub label: Label,
    pub num_labels: usize,
}

impl BaseClassifier for Constant {
    fn num_labels(&self) -> usize {
        self.num_labels
    }

    fn classify(&self, batch: &[StructureVector]) -> Result<Vec<Label>> {
        Ok(vec![self.label; batch.len()])
    }
}

pub struct FirstBit {
    pub num_labels: usize,
}

impl BaseClassifier for FirstBit {
    fn num_labels(&self) -> usize {
        self.num_labels
    }

    fn classify(&self, batch: &[StructureVector]) -> Result<Vec<Label>> {
        Ok(batch.iter().map(|s| Label((s.dim() > 0 && s.get(0)) as u32)).collect())
    }
}

pub struct Parity {
    pub num_labels: usize,
}

impl BaseClassifier for Parity {
    fn num_labels(&self) -> usize {
        self.num_labels
    }

    fn classify(&self, batch: &[StructureVector]) -> Result<Vec<Label>> {
        Ok(batch.iter().map(|s| Label((s.count_ones() % 2) as u32)).collect())
    }
}

pub struct DegreeThreshold {
    pub threshold: usize,
    pub num_labels: usize,
}

impl BaseClassifier for DegreeThreshold {
    fn num_labels(&self) -> usize {
        self.num_labels
    }

    fn classify(&self, batch: &[StructureVector]) -> Result<Vec<Label>> {
        Ok(batch.iter().map(|s| Label((s.count_ones() >= self.threshold) as u32)).collect())
    }
}

/// Predicts the most common label among the nodes a row connects to, with
/// neighbor labels held fixed. Ties go to the smallest label; a row with no
/// labeled neighbor gets label 0.
pub struct MajorityNeighbor {
    pub node: usize,
    pub labels: Vec<Option<Label>>,
    pub num_labels: usize,
}

impl MajorityNeighbor {
    fn predict(&self, s: &StructureVector) -> Label {
        let mut votes = vec![0usize; self.num_labels];
        for j in s.bits().ones() {
            if let Some(Some(l)) = self.labels.get(node_for_bit(self.node, j)) {
                votes[l.index()] += 1;
            }
        }
        let best = votes.iter().copied().max().unwrap_or(0);
        Label(votes.iter().position(|&v| v == best).unwrap_or(0) as u32)
    }
}

impl BaseClassifier for MajorityNeighbor {
    fn num_labels(&self) -> usize {
        self.num_labels
    }

    fn classify(&self, batch: &[StructureVector]) -> Result<Vec<Label>> {
        Ok(batch.iter().map(|s| self.predict(s)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClassifierSpec {
    Constant(u32),
    FirstBit,
    Parity,
    DegreeThreshold(usize),
    MajorityNeighbor,
    Protocol(String),
}

impl FromStr for ClassifierSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownClassifier(s.to_string());
        if let Some(cmd) = s.strip_prefix("proto:") {
            if cmd.trim().is_empty() {
                return Err(unknown());
            }
            return Ok(Self::Protocol(cmd.to_string()));
        }
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        match (name, arg) {
            ("constant", Some(c)) => c.parse().map(Self::Constant).map_err(|_| unknown()),
            ("first-bit", None) => Ok(Self::FirstBit),
            ("parity", None) => Ok(Self::Parity),
            ("degree-threshold", Some(t)) => t.parse().map(Self::DegreeThreshold).map_err(|_| unknown()),
            ("majority-neighbor", None) => Ok(Self::MajorityNeighbor),
            _ => Err(unknown()),
        }
    }
}

impl fmt::Display for ClassifierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => write!(f, "constant:{c}"),
            Self::FirstBit => f.write_str("first-bit"),
            Self::Parity => f.write_str("parity"),
            Self::DegreeThreshold(t) => write!(f, "degree-threshold:{t}"),
            Self::MajorityNeighbor => f.write_str("majority-neighbor"),
            Self::Protocol(cmd) => write!(f, "proto:{cmd}"),
        }
    }
}

/// What a classifier may know about the item it is applied to.
#[derive(Clone, Copy, Debug)]
pub struct ClassifierContext<'a> {
    pub n: usize,
    pub num_labels: usize,
    /// Node whose row is being classified (node task only).
    pub node: Option<usize>,
    pub labels: Option<&'a [Option<Label>]>,
    pub timeout: Duration,
}

impl ClassifierSpec {
    /// Fewest labels this classifier can emit.
    pub fn min_labels(&self) -> usize {
        match self {
            Self::Constant(c) => (*c as usize + 1).max(2),
            _ => 2,
        }
    }

    /// True when a fresh instance is needed for every item.
    pub fn per_item(&self) -> bool {
        matches!(self, Self::MajorityNeighbor)
    }

    pub fn build(&self, ctx: &ClassifierContext<'_>) -> Result<Box<dyn BaseClassifier>> {
        let num_labels = ctx.num_labels.max(self.min_labels());
        Ok(match self {
            Self::Constant(c) => Box::new(Constant { label: Label(*c), num_labels }),
            Self::FirstBit => Box::new(FirstBit { num_labels }),
            Self::Parity => Box::new(Parity { num_labels }),
            Self::DegreeThreshold(t) => Box::new(DegreeThreshold { threshold: *t, num_labels }),
            Self::MajorityNeighbor => {
                let node = ctx
                    .node
                    .ok_or_else(|| Error::OutOfRange("majority-neighbor needs the node task".into()))?;
                let labels = ctx
                    .labels
                    .ok_or_else(|| Error::OutOfRange("majority-neighbor needs a labels file".into()))?;
                if let Some(bad) = labels.iter().flatten().find(|l| l.index() >= num_labels) {
                    return Err(Error::LabelOutOfRange { label: bad.0, num_labels });
                }
                Box::new(MajorityNeighbor { node, labels: labels.to_vec(), num_labels })
            }
            Self::Protocol(cmd) => Box::new(ProtocolClassifier::spawn(cmd, ctx.n, num_labels, ctx.timeout)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{structure_vector_for_node, Graph};

    fn ctx(n: usize) -> ClassifierContext<'static> {
        ClassifierContext { n, num_labels: 2, node: None, labels: None, timeout: Duration::from_secs(5) }
    }

    fn run(spec: &str, s: &str) -> Label {
        let s: StructureVector = s.parse().unwrap();
        let f = spec.parse::<ClassifierSpec>().unwrap().build(&ctx(s.dim())).unwrap();
        f.classify(&[s]).unwrap()[0]
    }

    #[test]
    fn toy_examples() {
        assert_eq!(run("degree-threshold:2", "110"), Label(1));
        assert_eq!(run("degree-threshold:3", "110"), Label(0));
        assert_eq!(run("parity", "0101"), Label(0));
        assert_eq!(run("parity", "0111"), Label(1));
        assert_eq!(run("first-bit", "10"), Label(1));
        assert_eq!(run("constant:3", "10"), Label(3));
    }

    #[test]
    fn constant_widens_label_set() {
        let f = ClassifierSpec::Constant(4).build(&ctx(3)).unwrap();
        assert_eq!(f.num_labels(), 5);
    }

    #[test]
    fn names_round_trip() {
        for name in ["constant:2", "first-bit", "parity", "degree-threshold:7", "majority-neighbor", "proto:python3 x.py"] {
            assert_eq!(name.parse::<ClassifierSpec>().unwrap().to_string(), name);
        }
        for bad in ["nope", "constant", "parity:1", "degree-threshold:x", "proto:"] {
            assert!(matches!(bad.parse::<ClassifierSpec>(), Err(Error::UnknownClassifier(_))), "{bad}");
        }
    }

    #[test]
    fn majority_neighbor_on_labeled_triangle() {
        // Node 0 sees nodes 1 and 2 plus an extra node 3.
        let g = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 2)]).unwrap();
        let labels = vec![Some(Label(0)), Some(Label(2)), Some(Label(1)), Some(Label(2))];
        let c = ClassifierContext { n: 3, num_labels: 3, node: Some(0), labels: Some(&labels), timeout: Duration::from_secs(1) };
        let f = ClassifierSpec::MajorityNeighbor.build(&c).unwrap();
        let row = structure_vector_for_node(&g, 0).unwrap();
        assert_eq!(f.classify(&[row]).unwrap(), vec![Label(2)]);
        // Dropping the edge to node 3 leaves a 1-1 tie, broken toward label 1.
        let row: StructureVector = "110".parse().unwrap();
        assert_eq!(f.classify(&[row]).unwrap(), vec![Label(1)]);
        // Node 1's row: neighbors 0 (label 0) and 2 (label 1) tie, label 0 wins.
        let c1 = ClassifierContext { node: Some(1), ..c };
        let f1 = ClassifierSpec::MajorityNeighbor.build(&c1).unwrap();
        assert_eq!(f1.classify(&[structure_vector_for_node(&g, 1).unwrap()]).unwrap(), vec![Label(0)]);
        assert!(ClassifierSpec::MajorityNeighbor.build(&ctx(3)).is_err());
    }
}
