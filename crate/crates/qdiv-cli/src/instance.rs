//! JSON instance files: named algebras, states and channels.

use std::collections::BTreeMap;
use std::fmt;

use qdiv::channels::Channel;
use qdiv::linalg::{c64, CMat};
use qdiv::{BlockAlgebra, BlockOperator, PositiveFunctional};
use serde::{Deserialize, Serialize};

/// Row-major matrix with complex entries written as `[re, im]`.
pub type MatrixSpec = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraSpec {
    pub dims: Vec<usize>,
    /// Trace weights per block; all 1 when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub algebra: String,
    pub blocks: Vec<MatrixSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub input: String,
    pub output: String,
    /// Dense `total_out × total_in` Kraus matrices.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kraus: Option<Vec<MatrixSpec>>,
    /// Choi blocks on `B(C^D) ⊗ output`, normalized to a state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choi: Option<Vec<MatrixSpec>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub algebras: BTreeMap<String, AlgebraSpec>,
    #[serde(default)]
    pub states: BTreeMap<String, StateSpec>,
    #[serde(default)]
    pub channels: BTreeMap<String, ChannelSpec>,
    #[serde(default)]
    pub metadata: BTreeMap<String, serde_json::Value>,
}

/// A loaded and validated instance.
#[derive(Clone, Debug, Default)]
pub struct Instance {
    pub algebras: BTreeMap<String, BlockAlgebra>,
    pub states: BTreeMap<String, PositiveFunctional>,
    pub channels: BTreeMap<String, Channel>,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpecError {
    /// Dotted path of the offending field.
    pub field: String,
    pub message: String,
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for SpecError {}

fn spec_error(field: impl Into<String>, message: impl fmt::Display) -> SpecError {
    SpecError { field: field.into(), message: message.to_string() }
}

pub fn parse(text: &str) -> Result<InstanceSpec, SpecError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        spec_error(if path == "." { "<root>".to_string() } else { path }, e.into_inner())
    })
}

fn matrix_from_spec(m: &MatrixSpec, field: &str) -> Result<CMat, SpecError> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    if let Some(i) = m.iter().position(|r| r.len() != cols) {
        return Err(spec_error(format!("{field}[{i}]"), format!("row has {} entries, expected {cols}", m[i].len())));
    }
    Ok(CMat::from_fn(rows, cols, |i, j| c64::new(m[i][j][0], m[i][j][1])))
}

pub fn matrix_to_spec(m: &CMat) -> MatrixSpec {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

fn operator_from_spec(alg: &BlockAlgebra, blocks: &[MatrixSpec], field: &str) -> Result<BlockOperator, SpecError> {
    let mats = blocks
        .iter()
        .enumerate()
        .map(|(k, b)| matrix_from_spec(b, &format!("{field}[{k}]")))
        .collect::<Result<Vec<_>, _>>()?;
    BlockOperator::new(alg, mats).map_err(|e| spec_error(field, e))
}

fn algebra_from_spec(spec: &AlgebraSpec, field: &str) -> Result<BlockAlgebra, SpecError> {
    let weights = spec.weights.clone().unwrap_or_else(|| vec![1.0; spec.dims.len()]);
    if weights.len() != spec.dims.len() {
        return Err(spec_error(format!("{field}.weights"), format!("{} weights for {} blocks", weights.len(), spec.dims.len())));
    }
    let blocks: Vec<(usize, f64)> = spec.dims.iter().copied().zip(weights).collect();
    BlockAlgebra::new(&blocks).map_err(|e| spec_error(field, e))
}

pub fn algebra_to_spec(alg: &BlockAlgebra) -> AlgebraSpec {
    let dims = alg.blocks().iter().map(|b| b.dim).collect();
    let weights: Vec<f64> = alg.blocks().iter().map(|b| b.weight).collect();
    let weights = if weights.iter().all(|&w| w == 1.0) { None } else { Some(weights) };
    AlgebraSpec { dims, weights }
}

impl InstanceSpec {
    pub fn load(&self) -> Result<Instance, SpecError> {
        let mut algebras = BTreeMap::new();
        for (name, a) in &self.algebras {
            algebras.insert(name.clone(), algebra_from_spec(a, &format!("algebras.{name}"))?);
        }
        let lookup = |name: &str, field: String| algebras.get(name).ok_or_else(|| spec_error(field, format!("unknown algebra `{name}`")));
        let mut states = BTreeMap::new();
        for (name, s) in &self.states {
            let field = format!("states.{name}");
            let alg = lookup(&s.algebra, format!("{field}.algebra"))?;
            let op = operator_from_spec(alg, &s.blocks, &format!("{field}.blocks"))?;
            let state = PositiveFunctional::new(op).map_err(|e| spec_error(&field, e))?;
            states.insert(name.clone(), state);
        }
        let mut channels = BTreeMap::new();
        for (name, c) in &self.channels {
            let field = format!("channels.{name}");
            let input = lookup(&c.input, format!("{field}.input"))?;
            let output = lookup(&c.output, format!("{field}.output"))?;
            let channel = match (&c.kraus, &c.choi) {
                (Some(kraus), None) => {
                    let mats = kraus
                        .iter()
                        .enumerate()
                        .map(|(k, m)| matrix_from_spec(m, &format!("{field}.kraus[{k}]")))
                        .collect::<Result<Vec<_>, _>>()?;
                    Channel::from_dense_kraus(input, output, &mats, name).map_err(|e| spec_error(format!("{field}.kraus"), e))?
                }
                (None, Some(choi)) => {
                    let alg = BlockAlgebra::full(input.total_dim()).tensor(output);
                    let op = operator_from_spec(&alg, choi, &format!("{field}.choi"))?;
                    Channel::from_choi(input, output, &op, name).map_err(|e| spec_error(format!("{field}.choi"), e))?
                }
                _ => return Err(spec_error(field, "exactly one of `kraus` or `choi` is required")),
            };
            channels.insert(name.clone(), channel);
        }
        Ok(Instance { algebras, states, channels, metadata: self.metadata.clone() })
    }
}

impl Instance {
    pub fn state(&self, name: &str) -> Result<&PositiveFunctional, SpecError> {
        self.states.get(name).ok_or_else(|| spec_error(format!("states.{name}"), "no such state"))
    }

    pub fn channel(&self, name: &str) -> Result<&Channel, SpecError> {
        self.channels.get(name).ok_or_else(|| spec_error(format!("channels.{name}"), "no such channel"))
    }

    fn algebra_name(&self, alg: &BlockAlgebra) -> Option<String> {
        self.algebras.iter().find(|(_, a)| *a == alg).map(|(n, _)| n.clone())
    }

    /// Serializes states densely per block and channels as dense Kraus
    /// matrices. Algebras not yet named get names `algebra<k>`.
    pub fn to_spec(&self) -> InstanceSpec {
        let mut named = self.clone();
        let name_of = |alg: &BlockAlgebra, named: &mut Instance| -> String {
            if let Some(n) = named.algebra_name(alg) {
                return n;
            }
            let n = format!("algebra{}", named.algebras.len());
            named.algebras.insert(n.clone(), alg.clone());
            n
        };
        let mut states = BTreeMap::new();
        for (name, s) in &self.states {
            let algebra = name_of(s.algebra(), &mut named);
            states.insert(name.clone(), StateSpec { algebra, blocks: s.blocks().iter().map(matrix_to_spec).collect() });
        }
        let mut channels = BTreeMap::new();
        for (name, c) in &self.channels {
            let input = name_of(c.input(), &mut named);
            let output = name_of(c.output(), &mut named);
            channels.insert(name.clone(), ChannelSpec { input, output, kraus: Some(dense_kraus(c).iter().map(matrix_to_spec).collect()), choi: None });
        }
        InstanceSpec {
            algebras: named.algebras.iter().map(|(n, a)| (n.clone(), algebra_to_spec(a))).collect(),
            states,
            channels,
            metadata: self.metadata.clone(),
        }
    }
}

/// Kraus operators embedded as `total_out × total_in` matrices.
pub fn dense_kraus(c: &Channel) -> Vec<CMat> {
    let (oi, oo) = (c.input().offsets(), c.output().offsets());
    let (din, dout) = (c.input().total_dim(), c.output().total_dim());
    c.kraus()
        .iter()
        .map(|k| {
            let mut m = CMat::zeros(dout, din);
            for r in 0..k.matrix.nrows() {
                for s in 0..k.matrix.ncols() {
                    m[(oo[k.out_block] + r, oi[k.in_block] + s)] = k.matrix[(r, s)];
                }
            }
            m
        })
        .collect()
}

pub fn from_file(path: &std::path::Path) -> anyhow::Result<Instance> {
    let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    let spec = parse(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    spec.load().map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAIR: &str = r#"{
        "algebras": {"qubit": {"dims": [2]}},
        "states": {
            "rho": {"algebra": "qubit", "blocks": [[[[0.5, 0], [0, 0]], [[0, 0], [0.5, 0]]]]},
            "sigma": {"algebra": "qubit", "blocks": [[[[0.25, 0], [0, 0]], [[0, 0], [0.75, 0]]]]}
        }
    }"#;

    #[test]
    fn loads_a_pair() {
        let inst = parse(PAIR).unwrap().load().unwrap();
        let d = qdiv::divergences::d_max(inst.state("rho").unwrap(), inst.state("sigma").unwrap()).unwrap();
        assert!((d.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn errors_name_the_field() {
        let bad = PAIR.replace("[0.75, 0]", "[0.75]");
        let e = parse(&bad).unwrap_err();
        assert!(e.field.starts_with("states.sigma.blocks"), "{e}");
        assert!(e.message.contains("line"), "{e}");
        let neg = PAIR.replace("[0.75, 0]", "[-0.75, 0]");
        let e = parse(&neg).unwrap().load().unwrap_err();
        assert_eq!(e.field, "states.sigma");
        let unknown = PAIR.replace("\"algebra\": \"qubit\", \"blocks\": [[[[0.25", "\"algebra\": \"qutrit\", \"blocks\": [[[[0.25");
        let e = parse(&unknown).unwrap().load().unwrap_err();
        assert_eq!(e.field, "states.sigma.algebra");
    }

    #[test]
    fn round_trip_is_exact() {
        let mut inst = parse(PAIR).unwrap().load().unwrap();
        inst.channels.insert("phi".into(), qdiv::channels::random_channel(2, 3, 2, 5).unwrap());
        let text = serde_json::to_string(&inst.to_spec()).unwrap();
        let back = parse(&text).unwrap().load().unwrap();
        for (name, s) in &inst.states {
            assert!(s.distance(back.state(name).unwrap()) <= 1e-15);
        }
        let (a, b) = (inst.channel("phi").unwrap().choi(), back.channel("phi").unwrap().choi());
        assert!(a.distance(&b) <= 1e-15);
    }
}
