//! Text DSL for reaction networks and JSON emission of analysis results.
//!
//! Grammar:
//!
//! ```text
//! network   := header? statement*
//! header    := "species:" ident+ | "name:" text
//! statement := complex ARROW complex ':' rate (',' rate)?
//! complex   := '0' | term ('+' term)*
//! term      := [coeff] ident
//! ARROW     := '->' | '<->'
//! ```
//!
//! Comments start with `#`. The reversible arrow desugars into two reactions
//! at parse time. `0` is the literal for the zero complex. Species ordering is
//! first-appearance order unless a `species:` header declares it, in which
//! case unknown species are an error.

use crate::model::{Complex, ModelError, RateLaw, Reaction, ReactionNetwork};
use serde::Serialize;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: {source}")]
    Model {
        line: usize,
        col: usize,
        #[source]
        source: ModelError,
    },
    #[error("network validation failed: {0}")]
    Validation(#[from] ModelError),
}

impl ParseError {
    fn at(line: usize, col: usize, msg: impl Into<String>) -> Self {
        ParseError::Syntax {
            line,
            col,
            msg: msg.into(),
        }
    }
}

struct RawComplex(Vec<(String, u64)>);

struct Statement {
    reactant: RawComplex,
    product: RawComplex,
    rates: Vec<f64>,
    reversible: bool,
    line: usize,
}

/// Parse DSL text into a validated network.
pub fn parse(text: &str) -> Result<ReactionNetwork, ParseError> {
    parse_with(text, false)
}

/// Parse with the strict purely-catalytic check enabled.
pub fn parse_strict(text: &str) -> Result<ReactionNetwork, ParseError> {
    parse_with(text, true)
}

fn parse_with(text: &str, strict: bool) -> Result<ReactionNetwork, ParseError> {
    let mut declared: Option<Vec<String>> = None;
    let mut name: Option<String> = None;
    let mut statements: Vec<Statement> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("species:") {
            let names: Vec<String> = rest.split_whitespace().map(str::to_string).collect();
            if names.is_empty() {
                return Err(ParseError::at(line_no, 1, "empty species header"));
            }
            declared = Some(names);
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("name:") {
            name = Some(rest.trim().to_string());
            continue;
        }
        statements.push(parse_statement(line, line_no)?);
    }

    // Species ordering: declared header or first appearance.
    let mut species: Vec<String> = declared.clone().unwrap_or_default();
    let declared_mode = declared.is_some();
    let index_of = |name: &str, species: &mut Vec<String>| -> Option<usize> {
        if let Some(i) = species.iter().position(|s| s == name) {
            return Some(i);
        }
        if declared_mode {
            return None;
        }
        species.push(name.to_string());
        Some(species.len() - 1)
    };

    let mut pairs: Vec<(Reaction, RateLaw)> = Vec::new();
    for st in &statements {
        let mut build = |raw: &RawComplex| -> Result<Complex, ParseError> {
            let mut terms = Vec::new();
            for (nm, coeff) in &raw.0 {
                let idx = index_of(nm, &mut species).ok_or_else(|| {
                    ParseError::at(st.line, 1, format!("unknown species {nm:?} (species: header is authoritative)"))
                })?;
                terms.push((idx, *coeff));
            }
            Ok(Complex::from_pairs(terms))
        };
        let reactant = build(&st.reactant)?;
        let product = build(&st.product)?;
        if reactant == product {
            return Err(ParseError::at(st.line, 1, "reactant equals product"));
        }
        for &rate in &st.rates {
            if !(rate > 0.0) {
                return Err(ParseError::at(st.line, 1, format!("non-positive rate {rate}")));
            }
        }
        pairs.push((
            Reaction::new(reactant.clone(), product.clone()),
            RateLaw::mass_action(st.rates[0]),
        ));
        if st.reversible {
            pairs.push((
                Reaction::new(product, reactant),
                RateLaw::mass_action(st.rates[1]),
            ));
        }
    }

    let mut net = ReactionNetwork::new(species, pairs, strict)?;
    net.name = name;
    Ok(net)
}

fn parse_statement(line: &str, line_no: usize) -> Result<Statement, ParseError> {
    let col = |rest: &str| line.len() - rest.len() + 1;

    let (arrow_pos, reversible) = match (line.find("<->"), line.find("->")) {
        (Some(i), _) => (i, true),
        (None, Some(i)) => (i, false),
        (None, None) => return Err(ParseError::at(line_no, 1, "expected '->' or '<->'")),
    };
    let lhs = &line[..arrow_pos];
    let rhs_all = &line[arrow_pos + if reversible { 3 } else { 2 }..];
    let Some(colon) = rhs_all.find(':') else {
        return Err(ParseError::at(line_no, col(""), "expected ':' before rate"));
    };
    let rhs = &rhs_all[..colon];
    let rate_text = &rhs_all[colon + 1..];

    let reactant = parse_complex(lhs, line_no, 1)?;
    let product = parse_complex(rhs, line_no, arrow_pos + 1)?;

    let rate_parts: Vec<&str> = rate_text.split(',').collect();
    let expected = if reversible { 2 } else { 1 };
    if rate_parts.len() != expected {
        return Err(ParseError::at(
            line_no,
            col(rate_text),
            format!("expected {expected} rate(s), found {}", rate_parts.len()),
        ));
    }
    let mut rates = Vec::with_capacity(expected);
    for part in rate_parts {
        let trimmed = part.trim();
        let value: f64 = trimmed.parse().map_err(|_| {
            ParseError::at(line_no, col(part), format!("invalid rate literal {trimmed:?}"))
        })?;
        rates.push(value);
    }
    Ok(Statement {
        reactant,
        product,
        rates,
        reversible,
        line: line_no,
    })
}

fn parse_complex(text: &str, line: usize, col0: usize) -> Result<RawComplex, ParseError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(ParseError::at(line, col0, "empty complex"));
    }
    if trimmed == "0" {
        return Ok(RawComplex(Vec::new()));
    }
    let mut terms = Vec::new();
    for part in trimmed.split('+') {
        let term = part.trim();
        if term.is_empty() {
            return Err(ParseError::at(line, col0, "empty term in complex"));
        }
        let digits: String = term.chars().take_while(|c| c.is_ascii_digit()).collect();
        let rest = term[digits.len()..].trim_start();
        let coeff = if digits.is_empty() {
            1
        } else {
            digits.parse::<u64>().map_err(|_| {
                ParseError::at(line, col0, format!("invalid coefficient {digits:?}"))
            })?
        };
        if coeff == 0 {
            return Err(ParseError::at(line, col0, "zero coefficient"));
        }
        if rest.is_empty()
            || !rest
                .chars()
                .next()
                .map(|c| c.is_ascii_alphabetic() || c == '_')
                .unwrap_or(false)
            || !rest.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        {
            return Err(ParseError::at(
                line,
                col0,
                format!("invalid species identifier {rest:?}"),
            ));
        }
        terms.push((rest.to_string(), coeff));
    }
    Ok(RawComplex(terms))
}

/// Canonical DSL text: species header, optional name, reactions sorted by
/// (reactant, product) on dense coefficient vectors. One serialize-parse
/// cycle is byte stable.
pub fn serialize(net: &ReactionNetwork) -> String {
    let mut out = String::new();
    out.push_str("species:");
    for s in net.species() {
        let _ = write!(out, " {s}");
    }
    out.push('\n');
    if let Some(name) = &net.name {
        let _ = writeln!(out, "name: {name}");
    }
    let d = net.dim();
    let mut order: Vec<usize> = (0..net.reactions().len()).collect();
    order.sort_by_key(|&i| {
        let rx = &net.reactions()[i];
        (rx.reactant.to_dense(d), rx.product.to_dense(d))
    });
    for i in order {
        let rx = &net.reactions()[i];
        let rate = match &net.kinetics()[i] {
            RateLaw::MassAction { rate } => *rate,
            RateLaw::Tabulated { base, .. } => *base,
        };
        let _ = writeln!(
            out,
            "{} -> {} : {}",
            net.complex_text(&rx.reactant),
            net.complex_text(&rx.product),
            rate
        );
    }
    out
}

// ---------------------------------------------------------------------------
// Certificate JSON
// ---------------------------------------------------------------------------

/// Everything the toolkit can emit as a machine-readable certificate.
/// The envelope is versioned: `{"schema": 1, "kind": ..., ...}`.
#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CertificateDoc {
    Structure(crate::graph::StructureReport),
    Lyapunov(crate::stability::LyapunovCertificate),
    Drift(crate::stability::DriftReport),
    Classes(crate::statespace::ClassReport),
    Sim(crate::sim::SimReport),
}

/// Serialize a result document to certificate JSON. Floats are printed with
/// 17 significant digits so output bytes are stable across runs and
/// platforms.
pub fn emit_certificate(doc: &CertificateDoc) -> String {
    #[derive(Serialize)]
    struct Envelope<'a> {
        schema: u32,
        #[serde(flatten)]
        doc: &'a CertificateDoc,
    }
    to_json_17(&Envelope { schema: 1, doc })
}

/// serde_json with a 17-significant-digit float formatter.
pub fn to_json_17<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFigFormatter);
    value.serialize(&mut ser).expect("serialization failed");
    String::from_utf8(buf).expect("json is utf8")
}

/// 17 significant digits, scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

struct SigFigFormatter;

impl serde_json::ser::Formatter for SigFigFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{}", fmt_f64(value))
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{}", fmt_f64(value as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_single_reaction() {
        let n = parse("S1 -> S2 : 1.0").unwrap();
        assert_eq!(n.species(), &["S1", "S2"]);
        assert_eq!(n.reactions().len(), 1);
        assert_eq!(n.mass_action_rate(0), Some(1.0));
    }

    #[test]
    fn parse_zero_complex_and_coefficients() {
        let n = parse("0 -> S1 + S2 : 0.5").unwrap();
        assert!(n.reactions()[0].reactant.is_zero());
        assert_eq!(n.reaction_vector(0).unwrap(), vec![1, 1]);
        let n = parse("2S1 -> S1 : 1e-3").unwrap();
        assert_eq!(n.reactions()[0].reactant.coefficient(0), 2);
        assert_eq!(n.mass_action_rate(0), Some(1e-3));
        let m = parse("2 S1 -> S1 : 1e-3").unwrap();
        assert_eq!(serialize(&m), serialize(&n));
    }

    #[test]
    fn parse_reversible_sugar() {
        let n = parse("S3 <-> S4 : 2.0, 3.0").unwrap();
        assert_eq!(n.reactions().len(), 2);
        assert_eq!(n.mass_action_rate(0), Some(2.0));
        assert_eq!(n.mass_action_rate(1), Some(3.0));
        assert_eq!(n.reaction_vector(0).unwrap(), vec![-1, 1]);
        assert_eq!(n.reaction_vector(1).unwrap(), vec![1, -1]);
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = parse("S1 -> S2").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 1, .. }), "{err}");
        let err = parse("\nS1 -> S1 : 1.0").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 2, .. }), "{err}");
        let err = parse("S1 -> S2 : -1.0").unwrap_err();
        assert!(err.to_string().contains("non-positive"), "{err}");
        let err = parse("species: A B\nA -> C : 1.0").unwrap_err();
        assert!(err.to_string().contains("unknown species"), "{err}");
    }

    #[test]
    fn species_header_fixes_order() {
        let n = parse("species: S2 S1\nS1 -> S2 : 1.0").unwrap();
        assert_eq!(n.species(), &["S2", "S1"]);
        assert_eq!(n.reaction_vector(0).unwrap(), vec![1, -1]);
    }

    #[test]
    fn serialize_roundtrip_is_byte_stable() {
        let src = "# joint example\nname: demo\nS1 -> S2 : 1.5\n0 -> S1 + S2 : 0.25\nS3 <-> S4 : 2.0, 3.0\nS1 -> S2 : 0.5\n";
        let once = serialize(&parse(src).unwrap());
        let twice = serialize(&parse(&once).unwrap());
        assert_eq!(once, twice);
        // merged duplicates serialize the merged rate
        assert!(once.contains("S1 -> S2 : 2"), "{once}");
    }

    #[test]
    fn serialize_empty_network_is_header_only() {
        let n = ReactionNetwork::new(vec!["S1".to_string()], vec![], false).unwrap();
        // single unused species is dropped, leaving an empty header
        assert_eq!(serialize(&n), "species:\n");
    }

    #[test]
    fn seventeen_digit_floats() {
        assert_eq!(fmt_f64(0.25), "2.5000000000000000e-1");
        let json = to_json_17(&serde_json::json!({"margin": 0.25_f64}));
        assert!(json.contains("2.5000000000000000e-1"), "{json}");
    }
}
