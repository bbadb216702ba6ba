//! Text formats: kernel JSON, quotient JSON, Markov kernel JSON, blowup plan
//! JSON and graph edge lists.
//!
//! Scalars in JSON files may be integers, `"p/q"` strings or decimal strings
//! (`"0.25"`); decimals convert exactly. Canonical output writes every scalar
//! as a lowest-terms string (`"1/2"`, `"0"`, `"1"`) with a fixed field order,
//! so re-serializing a parsed canonical file reproduces it byte for byte.

use num_bigint::BigInt;
use num_traits::Zero;
use serde::Deserialize;
use serde_json::Value;

use crate::blowup::{BlowupPlan, DEFAULT_PERMUTATIONS};
use crate::error::{Error, Result};
use crate::markov::MarkovKernel;
use crate::model::{validate_kernel, FiniteGraph, RawKernel, Ratio, StepKernel};
use crate::quotient::QuotientResult;

/// Default cap on kernel classes accepted from files.
pub const DEFAULT_MAX_CLASSES: usize = 512;

/// Parses `"p/q"`, an integer or an exact decimal such as `"-0.125"`.
pub fn parse_ratio(text: &str) -> Result<Ratio> {
    let text = text.trim();
    let bad = || Error::Parse(format!("invalid scalar {text:?}"));
    let integer = |s: &str| -> Result<BigInt> {
        let digits = s.strip_prefix(['-', '+']).unwrap_or(s);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        s.parse::<BigInt>().map_err(|_| bad())
    };
    if let Some((numer, denom)) = text.split_once('/') {
        let denom = integer(denom)?;
        if denom.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {text:?}")));
        }
        return Ok(Ratio::new(integer(numer)?, denom));
    }
    if let Some((whole, frac)) = text.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = whole.starts_with('-');
        let whole_digits = whole.strip_prefix(['-', '+']).unwrap_or(whole);
        let whole_value = if whole_digits.is_empty() {
            BigInt::zero()
        } else {
            integer(whole_digits)?
        };
        let scale = BigInt::from(10).pow(frac.len() as u32);
        let frac_value: BigInt = frac.parse().map_err(|_| bad())?;
        let magnitude = Ratio::new(whole_value * &scale + frac_value, scale);
        return Ok(if negative { -magnitude } else { magnitude });
    }
    Ok(Ratio::from_integer(integer(text)?))
}

/// Lowest-terms text: `"p/q"`, or just `"p"` for integers.
pub fn format_ratio(value: &Ratio) -> String {
    value.to_string()
}

fn scalar(value: &Value) -> Result<Ratio> {
    match value {
        Value::String(s) => parse_ratio(s),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(Ratio::from_integer(BigInt::from(i)))
            } else if let Some(u) = n.as_u64() {
                Ok(Ratio::from_integer(BigInt::from(u)))
            } else {
                Err(Error::Parse(format!(
                    "non-integer number {n}; write fractions and decimals as strings"
                )))
            }
        }
        other => Err(Error::Parse(format!("expected a scalar, found {other}"))),
    }
}

fn scalars(values: &[Value]) -> Result<Vec<Ratio>> {
    values.iter().map(scalar).collect()
}

#[derive(Deserialize)]
struct KernelDoc {
    masses: Vec<Value>,
    matrix: Vec<Vec<Value>>,
    symmetric: bool,
}

fn kernel_from_doc(doc: &KernelDoc, max_classes: usize) -> Result<StepKernel> {
    if doc.masses.len() > max_classes {
        return Err(Error::TooLarge(format!(
            "{} classes exceeds the limit of {max_classes}",
            doc.masses.len()
        )));
    }
    let masses = scalars(&doc.masses)?;
    let values = doc
        .matrix
        .iter()
        .map(|row| scalars(row))
        .collect::<Result<Vec<_>>>()?;
    validate_kernel(RawKernel {
        masses,
        values,
        symmetric: doc.symmetric,
    })
}

fn json_error(e: serde_json::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Parses and validates a kernel file. Extra fields are ignored, so quotient
/// files also load as kernels.
pub fn parse_kernel(text: &str) -> Result<StepKernel> {
    parse_kernel_with_limit(text, DEFAULT_MAX_CLASSES)
}

pub fn parse_kernel_with_limit(text: &str, max_classes: usize) -> Result<StepKernel> {
    let doc: KernelDoc = serde_json::from_str(text).map_err(json_error)?;
    kernel_from_doc(&doc, max_classes)
}

fn quoted(value: &Ratio) -> String {
    format!("\"{}\"", format_ratio(value))
}

fn quoted_row(row: &[Ratio]) -> String {
    let items: Vec<String> = row.iter().map(quoted).collect();
    format!("[{}]", items.join(", "))
}

fn matrix_lines(matrix: &[Vec<Ratio>], indent: &str) -> String {
    if matrix.is_empty() {
        return "[]".into();
    }
    let rows: Vec<String> = matrix
        .iter()
        .map(|row| format!("{indent}  {}", quoted_row(row)))
        .collect();
    format!("[\n{}\n{indent}]", rows.join(",\n"))
}

fn kernel_fields(kernel: &StepKernel) -> Vec<(String, String)> {
    vec![
        ("masses".into(), quoted_row(kernel.masses())),
        ("matrix".into(), matrix_lines(kernel.values(), "  ")),
        ("symmetric".into(), kernel.is_symmetric().to_string()),
    ]
}

fn object(fields: Vec<(String, String)>) -> String {
    let body: Vec<String> = fields
        .into_iter()
        .map(|(key, value)| format!("  \"{key}\": {value}"))
        .collect();
    format!("{{\n{}\n}}\n", body.join(",\n"))
}

/// Canonical kernel file text.
pub fn kernel_to_json(kernel: &StepKernel) -> String {
    object(kernel_fields(kernel))
}

fn string_list(items: impl IntoIterator<Item = String>) -> String {
    let items: Vec<String> = items
        .into_iter()
        .map(|s| serde_json::to_string(&s).expect("strings serialize"))
        .collect();
    format!("[{}]", items.join(", "))
}

/// Kernel file text plus the quotient's signature labels and lift map.
pub fn quotient_to_json(result: &QuotientResult) -> String {
    let mut fields = kernel_fields(&result.quotient);
    fields.push(("label_level".into(), result.label_level.to_string()));
    fields.push((
        "signature_labels".into(),
        string_list(result.signature_labels.iter().map(|s| s.to_text())),
    ));
    let lift: Vec<String> = result.lift_map.iter().map(usize::to_string).collect();
    fields.push(("lift_map".into(), format!("[{}]", lift.join(", "))));
    object(fields)
}

#[derive(Deserialize)]
struct MarkovDoc {
    source_masses: Vec<Value>,
    target_masses: Vec<Value>,
    matrix: Vec<Vec<Value>>,
}

pub fn markov_to_json(kernel: &MarkovKernel) -> String {
    object(vec![
        ("source_masses".into(), quoted_row(kernel.source_masses())),
        ("target_masses".into(), quoted_row(kernel.target_masses())),
        ("matrix".into(), matrix_lines(kernel.matrix(), "  ")),
    ])
}

pub fn parse_markov(text: &str) -> Result<MarkovKernel> {
    let doc: MarkovDoc = serde_json::from_str(text).map_err(json_error)?;
    let matrix = doc
        .matrix
        .iter()
        .map(|row| scalars(row))
        .collect::<Result<Vec<_>>>()?;
    MarkovKernel::new(scalars(&doc.source_masses)?, scalars(&doc.target_masses)?, matrix)
}

#[derive(Deserialize)]
struct PlanDoc {
    base: KernelDoc,
    splits: Vec<usize>,
    seeds: Vec<Vec<u64>>,
    permutations: Option<usize>,
}

pub fn parse_plan(text: &str) -> Result<BlowupPlan> {
    parse_plan_with_limit(text, DEFAULT_MAX_CLASSES)
}

pub fn parse_plan_with_limit(text: &str, max_classes: usize) -> Result<BlowupPlan> {
    let doc: PlanDoc = serde_json::from_str(text).map_err(json_error)?;
    let base = kernel_from_doc(&doc.base, max_classes)?;
    let total: usize = doc.splits.iter().sum();
    if total > max_classes {
        return Err(Error::TooLarge(format!(
            "blowup has {total} classes, limit is {max_classes}"
        )));
    }
    let mut plan = BlowupPlan::new(base, doc.splits, doc.seeds)?;
    plan.permutations = doc.permutations.unwrap_or(DEFAULT_PERMUTATIONS);
    Ok(plan)
}

pub fn plan_to_json(plan: &BlowupPlan) -> String {
    let base = kernel_to_json(&plan.base);
    let base = base.trim_end().replace('\n', "\n  ");
    let splits: Vec<String> = plan.splits.iter().map(usize::to_string).collect();
    let seeds: Vec<String> = plan
        .block_seeds
        .iter()
        .map(|row| {
            let items: Vec<String> = row.iter().map(u64::to_string).collect();
            format!("    [{}]", items.join(", "))
        })
        .collect();
    object(vec![
        ("base".into(), base),
        ("splits".into(), format!("[{}]", splits.join(", "))),
        ("seeds".into(), format!("[\n{}\n  ]", seeds.join(",\n"))),
        ("permutations".into(), plan.permutations.to_string()),
    ])
}

/// Parses an edge list: a header line `n <count>` followed by `u v` lines
/// with 0-based vertices. Blank lines and `#` comments are skipped.
pub fn parse_edge_list(text: &str) -> Result<FiniteGraph> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line.split('#').next().unwrap_or("").trim()))
        .filter(|(_, line)| !line.is_empty());
    let (header_line, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("missing header line \"n <count>\"".into()))?;
    let mut head = header.split_whitespace();
    let n = match (head.next(), head.next(), head.next()) {
        (Some("n"), Some(count), None) => count
            .parse::<usize>()
            .map_err(|_| Error::Parse(format!("line {header_line}: invalid vertex count {count:?}")))?,
        _ => {
            return Err(Error::Parse(format!(
                "line {header_line}: expected header \"n <count>\", found {header:?}"
            )))
        }
    };
    let mut edges = Vec::new();
    for (number, line) in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [u, v] = fields.as_slice() else {
            return Err(Error::Parse(format!("line {number}: expected \"u v\", found {line:?}")));
        };
        let vertex = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::Parse(format!("line {number}: invalid vertex {s:?}")))
        };
        edges.push((vertex(u)?, vertex(v)?));
    }
    FiniteGraph::new(n, edges)
}

/// The inverse of [`parse_edge_list`].
pub fn edge_list_to_text(graph: &FiniteGraph) -> String {
    let mut out = format!("n {}\n", graph.vertex_count());
    for (u, v) in graph.edges() {
        out.push_str(&format!("{u} {v}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{graph_to_graphon, int, ratio};

    #[test]
    fn scalar_forms() {
        assert_eq!(parse_ratio("3/6").unwrap(), ratio(1, 2));
        assert_eq!(parse_ratio("0.25").unwrap(), ratio(1, 4));
        assert_eq!(parse_ratio("-1.5").unwrap(), ratio(-3, 2));
        assert_eq!(parse_ratio(".5").unwrap(), ratio(1, 2));
        assert_eq!(parse_ratio("7").unwrap(), int(7));
        // 0.1 has no exact binary form; the decimal route keeps it exact.
        assert_eq!(parse_ratio("0.1").unwrap(), ratio(1, 10));
        for bad in ["1/0", "a", "1.", "1/2/3", "", "1e3", "--1"] {
            assert!(parse_ratio(bad).is_err(), "{bad}");
        }
        assert_eq!(format_ratio(&ratio(2, 4)), "1/2");
        assert_eq!(format_ratio(&int(1)), "1");
    }

    #[test]
    fn kernel_json_round_trip() {
        let text = r#"{"masses": ["1/2", 0.5e0], "matrix": [[0, 1], [1, 0]], "symmetric": true}"#;
        assert!(matches!(parse_kernel(text), Err(Error::Parse(_))));
        let text = r#"{"masses": ["1/2", "0.5"], "matrix": [[0, "2/2"], [1, "0"]], "symmetric": true}"#;
        let k = parse_kernel(text).unwrap();
        assert_eq!(k, graph_to_graphon(&FiniteGraph::complete(2)).unwrap());
        let canonical = kernel_to_json(&k);
        assert_eq!(
            canonical,
            "{\n  \"masses\": [\"1/2\", \"1/2\"],\n  \"matrix\": [\n    [\"0\", \"1\"],\n    [\"1\", \"0\"]\n  ],\n  \"symmetric\": true\n}\n"
        );
        assert_eq!(kernel_to_json(&parse_kernel(&canonical).unwrap()), canonical);
    }

    #[test]
    fn kernel_json_errors() {
        let bad_mass = r#"{"masses": ["1/2", "1/3"], "matrix": [[0, 1], [1, 0]], "symmetric": true}"#;
        assert!(matches!(parse_kernel(bad_mass), Err(Error::MassesNotOne { .. })));
        let big = r#"{"masses": [1], "matrix": [[0]], "symmetric": true}"#;
        assert!(parse_kernel_with_limit(big, 1).is_ok());
        let two = r#"{"masses": ["1/2", "1/2"], "matrix": [[0, 0], [0, 0]], "symmetric": true}"#;
        assert!(matches!(parse_kernel_with_limit(two, 1), Err(Error::TooLarge(_))));
        assert!(matches!(parse_kernel("{"), Err(Error::Parse(_))));
    }

    #[test]
    fn edge_lists() {
        let k2 = parse_edge_list("n 2\n0 1\n").unwrap();
        assert_eq!(k2, FiniteGraph::complete(2));
        assert_eq!(parse_edge_list("n 2\n0 0\n"), Err(Error::LoopEdge(0)));
        assert_eq!(parse_edge_list("n 3\n0 1\n1 0\n"), Err(Error::DuplicateEdge(0, 1)));
        assert!(matches!(parse_edge_list("0 1\n"), Err(Error::Parse(_))));
        assert!(matches!(parse_edge_list("n 3\n0 1 2\n"), Err(Error::Parse(_))));
        let c6 = parse_edge_list("# hexagon\nn 6\n0 1\n1 2\n2 3\n3 4\n4 5\n5 0\n").unwrap();
        assert_eq!(c6, FiniteGraph::cycle(6));
        assert_eq!(parse_edge_list(&edge_list_to_text(&c6)).unwrap(), c6);
    }

    #[test]
    fn plan_and_markov_round_trip() {
        let base = StepKernel::constant(ratio(1, 3), 2).unwrap();
        let plan = BlowupPlan::seeded(base, vec![2, 3], 5).unwrap();
        let text = plan_to_json(&plan);
        assert_eq!(parse_plan(&text).unwrap(), plan);
        assert_eq!(plan_to_json(&parse_plan(&text).unwrap()), text);

        let m = MarkovKernel::identity(&[ratio(1, 4), ratio(3, 4)]);
        let text = markov_to_json(&m);
        assert_eq!(parse_markov(&text).unwrap(), m);
    }
}
