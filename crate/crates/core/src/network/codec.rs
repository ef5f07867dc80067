//! Canonical JSON encoding of training instances.
//!
//! Every scalar is a normalized rational string (`"3"`, `"-1/2"`); `"free"`
//! marks a free weight or bias and `"?"` an ignored output. Encoding is
//! canonical: equal instances produce identical bytes.

use serde_json::{json, Map, Value};
use thiserror::Error;

use super::{
    Activation, CostKind, DataPoint, Edge, InstanceKind, Neuron, Param, Role, Target,
    TrainingInstance,
};
use crate::scalar::{format_rational, parse_rational, Rational};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("schema error at {path}: {message}")]
pub struct SchemaError {
    /// JSON pointer to the offending value.
    pub path: String,
    pub message: String,
}

fn err(path: &str, message: impl Into<String>) -> SchemaError {
    SchemaError {
        path: if path.is_empty() { "/".into() } else { path.into() },
        message: message.into(),
    }
}

fn param_json(p: &Param) -> Value {
    match p {
        Param::Free => Value::from("free"),
        Param::Fixed(r) => Value::from(format_rational(r)),
    }
}

fn activation_json(a: &Activation) -> Value {
    match a {
        Activation::Identity => Value::from("identity"),
        Activation::Relu => Value::from("relu"),
        Activation::ShiftedRelu(c) => json!({ "shifted_relu": format_rational(c) }),
    }
}

fn role_str(r: Role) -> &'static str {
    match r {
        Role::Input => "input",
        Role::Hidden => "hidden",
        Role::Output => "output",
    }
}

pub fn encode_instance(inst: &TrainingInstance) -> Vec<u8> {
    let neurons: Vec<Value> = inst
        .neurons
        .iter()
        .map(|n| {
            json!({
                "id": n.id,
                "role": role_str(n.role),
                "activation": n.activation.as_ref().map_or(Value::Null, activation_json),
                "bias": n.bias.as_ref().map_or(Value::Null, param_json),
            })
        })
        .collect();
    let edges: Vec<Value> = inst
        .edges
        .iter()
        .map(|e| json!({ "id": e.id, "src": e.src, "dst": e.dst, "weight": param_json(&e.weight) }))
        .collect();
    let data: Vec<Value> = inst
        .data
        .iter()
        .map(|d| {
            let inputs: Vec<Value> = d.inputs.iter().map(|r| format_rational(r).into()).collect();
            let outputs: Vec<Value> = d
                .outputs
                .iter()
                .map(|t| match t {
                    Target::Value(r) => format_rational(r).into(),
                    Target::Ignore => "?".into(),
                })
                .collect();
            json!({ "inputs": inputs, "outputs": outputs })
        })
        .collect();
    let doc = json!({
        "version": FORMAT_VERSION,
        "kind": match inst.kind { InstanceKind::Restricted => "restricted", InstanceKind::Plain => "plain" },
        "cost": match inst.cost { CostKind::Mse => "mse", CostKind::L1 => "l1" },
        "threshold": format_rational(&inst.threshold),
        "neurons": neurons,
        "edges": edges,
        "data": data,
    });
    let mut bytes = serde_json::to_vec(&doc).expect("json values always serialize");
    bytes.push(b'\n');
    bytes
}

struct Cursor<'a> {
    value: &'a Value,
    path: String,
}

impl<'a> Cursor<'a> {
    fn object(&self) -> Result<&'a Map<String, Value>, SchemaError> {
        self.value
            .as_object()
            .ok_or_else(|| err(&self.path, "expected an object"))
    }

    fn field(&self, key: &str) -> Result<Cursor<'a>, SchemaError> {
        let obj = self.object()?;
        let path = format!("{}/{key}", self.path);
        obj.get(key)
            .map(|value| Cursor { value, path: path.clone() })
            .ok_or_else(|| err(&path, "missing field"))
    }

    fn items(&self) -> Result<Vec<Cursor<'a>>, SchemaError> {
        let arr = self
            .value
            .as_array()
            .ok_or_else(|| err(&self.path, "expected an array"))?;
        Ok(arr
            .iter()
            .enumerate()
            .map(|(i, value)| Cursor {
                value,
                path: format!("{}/{i}", self.path),
            })
            .collect())
    }

    fn str(&self) -> Result<&'a str, SchemaError> {
        self.value
            .as_str()
            .ok_or_else(|| err(&self.path, "expected a string"))
    }

    fn index(&self) -> Result<usize, SchemaError> {
        self.value
            .as_u64()
            .map(|v| v as usize)
            .ok_or_else(|| err(&self.path, "expected a non-negative integer"))
    }

    fn rational(&self) -> Result<Rational, SchemaError> {
        let s = self
            .value
            .as_str()
            .ok_or_else(|| err(&self.path, "expected a rational string \"p/q\""))?;
        parse_rational(s).map_err(|e| err(&self.path, e.to_string()))
    }

    fn param(&self) -> Result<Param, SchemaError> {
        match self.value.as_str() {
            Some("free") => Ok(Param::Free),
            _ => self.rational().map(Param::Fixed),
        }
    }

    fn is_null(&self) -> bool {
        self.value.is_null()
    }
}

pub fn decode_instance(bytes: &[u8]) -> Result<TrainingInstance, SchemaError> {
    let root: Value =
        serde_json::from_slice(bytes).map_err(|e| err("", format!("invalid JSON: {e}")))?;
    let doc = Cursor {
        value: &root,
        path: String::new(),
    };

    let version = doc.field("version")?;
    if version.value.as_u64() != Some(FORMAT_VERSION) {
        return Err(err(&version.path, format!("unsupported version, expected {FORMAT_VERSION}")));
    }
    let kind = doc.field("kind")?;
    let kind = match kind.str()? {
        "restricted" => InstanceKind::Restricted,
        "plain" => InstanceKind::Plain,
        other => return Err(err(&kind.path, format!("unknown kind `{other}`"))),
    };
    let cost = doc.field("cost")?;
    let cost = match cost.str()? {
        "mse" => CostKind::Mse,
        "l1" => CostKind::L1,
        other => return Err(err(&cost.path, format!("unknown cost function `{other}`"))),
    };
    let threshold = doc.field("threshold")?.rational()?;

    let mut neurons = Vec::new();
    for n in doc.field("neurons")?.items()? {
        let role_c = n.field("role")?;
        let role = match role_c.str()? {
            "input" => Role::Input,
            "hidden" => Role::Hidden,
            "output" => Role::Output,
            other => return Err(err(&role_c.path, format!("unknown role `{other}`"))),
        };
        let act_c = n.field("activation")?;
        let activation = if act_c.is_null() {
            None
        } else if let Some(obj) = act_c.value.as_object() {
            let c = act_c.field("shifted_relu")?;
            if obj.len() != 1 {
                return Err(err(&act_c.path, "unknown activation"));
            }
            Some(Activation::ShiftedRelu(c.rational()?))
        } else {
            match act_c.str()? {
                "identity" => Some(Activation::Identity),
                "relu" => Some(Activation::Relu),
                other => return Err(err(&act_c.path, format!("unknown activation `{other}`"))),
            }
        };
        let bias_c = n.field("bias")?;
        let bias = if bias_c.is_null() {
            None
        } else {
            Some(bias_c.param()?)
        };
        neurons.push(Neuron {
            id: n.field("id")?.index()?,
            role,
            activation,
            bias,
        });
    }

    let mut edges = Vec::new();
    for e in doc.field("edges")?.items()? {
        edges.push(Edge {
            id: e.field("id")?.index()?,
            src: e.field("src")?.index()?,
            dst: e.field("dst")?.index()?,
            weight: e.field("weight")?.param()?,
        });
    }

    let mut data = Vec::new();
    for d in doc.field("data")?.items()? {
        let inputs = d
            .field("inputs")?
            .items()?
            .iter()
            .map(Cursor::rational)
            .collect::<Result<Vec<_>, _>>()?;
        let outputs = d
            .field("outputs")?
            .items()?
            .iter()
            .map(|o| match o.value.as_str() {
                Some("?") => Ok(Target::Ignore),
                _ => o.rational().map(Target::Value),
            })
            .collect::<Result<Vec<_>, _>>()?;
        data.push(DataPoint { inputs, outputs });
    }

    Ok(TrainingInstance {
        kind,
        cost,
        threshold,
        neurons,
        edges,
        data,
    })
}
