//! Rendering of report trees as JSON or as indented text.

use std::io;

use serde::Serialize;
use serde_json::ser::Formatter;
use serde_json::{json, Map, Value};
use uniconn::tensor::Tensor;

/// A real as a JSON number; non-finite values become `null`.
pub fn real(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn reals(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| real(x)).collect())
}

/// Nested arrays in index order: `t[a][b]...`.
pub fn tensor<const R: usize>(t: &Tensor<R>) -> Value {
    fn nest(data: &[f64], dim: usize, rank: usize) -> Value {
        if rank == 1 {
            return reals(data);
        }
        let stride = data.len() / dim;
        Value::Array(data.chunks(stride).map(|c| nest(c, dim, rank - 1)).collect())
    }
    nest(t.as_slice(), t.dim(), R)
}

/// Index conventions, printed at the top of every report.
pub fn conventions() -> Value {
    json!({
        "indices": "0-based coordinate indices",
        "metric": "g[i][j] = g_ij",
        "gamma": "gamma[k][i][j] = Γ^k_ij, ∇_(∂_i) ∂_j = Γ^k_ij ∂_k",
        "h": "h[k][i][j] = H^k_ij, Γ̃ = Γ + H",
        "torsion": "torsion[k][i][j] = T̃^k_ij = Γ̃^k_ij − Γ̃^k_ji",
        "nabla_g": "nabla_g[i][j][k] = (∇̃_i g)_jk",
        "riemann": "r[l][i][j][k] = R̃^l_ijk, R̃(∂_i,∂_j)∂_k = R̃^l_ijk ∂_l",
        "residual": "max|a − b| / max(1, max|a|, max|b|)"
    })
}

// Every float in 17 significant digits, which round-trips exactly.
struct Exact;

impl Formatter for Exact {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }
}

pub fn to_json(v: &Value) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Exact);
    v.serialize(&mut ser).expect("serializing a Value cannot fail");
    let mut s = String::from_utf8(out).expect("serde_json writes UTF-8");
    s.push('\n');
    s
}

/// Indented `key: value` text; arrays of scalars stay on one line.
pub fn to_pretty(v: &Value) -> String {
    let mut out = String::new();
    pretty(v, 0, &mut out);
    out
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("-".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) if n.is_f64() => Some(format!("{:.6e}", n.as_f64().unwrap())),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

fn inline(v: &Value) -> Option<String> {
    if let Some(s) = scalar(v) {
        return Some(s);
    }
    let items = v.as_array()?;
    let parts: Option<Vec<String>> = items.iter().map(inline).collect();
    let parts = parts?;
    let s = format!("[{}]", parts.join(", "));
    (s.len() <= 160).then_some(s)
}

fn pretty(v: &Value, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    match v {
        Value::Object(map) => pretty_map(map, depth, out),
        Value::Array(items) => {
            for item in items {
                match inline(item) {
                    Some(s) => out.push_str(&format!("{pad}- {s}\n")),
                    None => {
                        out.push_str(&format!("{pad}-\n"));
                        pretty(item, depth + 1, out);
                    }
                }
            }
        }
        other => out.push_str(&format!("{pad}{}\n", scalar(other).unwrap_or_default())),
    }
}

fn pretty_map(map: &Map<String, Value>, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    for (k, v) in map {
        match inline(v) {
            Some(s) => out.push_str(&format!("{pad}{k}: {s}\n")),
            None => {
                out.push_str(&format!("{pad}{k}:\n"));
                pretty(v, depth + 1, out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use uniconn::tensor::Tensor3;

    #[test]
    fn floats_round_trip_with_17_digits() {
        let x = 0.1 + 0.2;
        let s = to_json(&json!({"x": real(x), "n": 3}));
        assert_eq!(s, "{\"n\":3,\"x\":3.0000000000000004e-1}\n");
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["x"].as_f64().unwrap(), x);
    }

    #[test]
    fn non_finite_is_null() {
        assert_eq!(real(f64::NAN), Value::Null);
    }

    #[test]
    fn tensor_nesting_follows_index_order() {
        let t = Tensor3::from_fn(2, |[k, i, j]| (100 * k + 10 * i + j) as f64);
        let v = tensor(&t);
        assert_eq!(v[1][0][1].as_f64(), Some(101.0));
        assert_eq!(v[0][1][0].as_f64(), Some(10.0));
    }

    #[test]
    fn pretty_text_layout() {
        let v = json!({"a": {"b": [1.0, 2.0]}, "c": "x"});
        assert_eq!(to_pretty(&v), "a:\n  b: [1.000000e0, 2.000000e0]\nc: x\n");
    }
}
