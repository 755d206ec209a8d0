//! The `regraph v1` plain-text graph format.
//!
//! ```text
//! n d
//! u v        one line per undirected edge, 0-based, u < v
//! ...
//! ```
//!
//! Numbers are canonical decimals (no sign, no leading zeros), fields are separated
//! by a single space, every line ends in `\n`, and edge lines are strictly increasing
//! in lexicographic order. Anything else is rejected.

use thiserror::Error;

use crate::error::GraphError;
use crate::graph::RegularGraph;

/// Largest vertex count the reader accepts.
pub const MAX_VERTICES: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("input is empty")]
    Empty,
    #[error("line {line}: missing trailing newline")]
    MissingNewline { line: usize },
    #[error("line {line}: expected two space-separated numbers")]
    Fields { line: usize },
    #[error("line {line}: malformed number {token:?}")]
    Number { line: usize, token: String },
    #[error("n={0} exceeds the reader limit")]
    TooLarge(usize),
    #[error("line {line}: edge must satisfy u < v")]
    Orientation { line: usize },
    #[error("line {line}: edges out of order or repeated")]
    Order { line: usize },
    #[error("expected {expected} edge lines, found {found}")]
    EdgeCount { expected: usize, found: usize },
    #[error("invalid graph: {0}")]
    Graph(#[from] GraphError),
}

pub fn write_regraph(g: &RegularGraph) -> String {
    let mut out = format!("{} {}\n", g.n(), g.d());
    for &(u, v) in g.edges() {
        out.push_str(&format!("{u} {v}\n"));
    }
    out
}

pub fn parse_regraph(input: &[u8]) -> Result<RegularGraph, FormatError> {
    if input.is_empty() {
        return Err(FormatError::Empty);
    }
    let mut lines = Vec::new();
    let mut rest = input;
    while !rest.is_empty() {
        match rest.iter().position(|&b| b == b'\n') {
            Some(i) => {
                lines.push(&rest[..i]);
                rest = &rest[i + 1..];
            }
            None => return Err(FormatError::MissingNewline { line: lines.len() + 1 }),
        }
    }
    let (n, d) = parse_pair(lines[0], 1)?;
    if n > MAX_VERTICES {
        return Err(FormatError::TooLarge(n));
    }
    if d >= n {
        return Err(GraphError::DegreeRange { n, d, min: 0 }.into());
    }
    if n * d % 2 != 0 {
        return Err(GraphError::Parity { n, d }.into());
    }
    let expected = n * d / 2;
    let mut edges = Vec::with_capacity(lines.len() - 1);
    for (k, line) in lines[1..].iter().enumerate() {
        let lineno = k + 2;
        let (u, v) = parse_pair(line, lineno)?;
        if u >= v {
            return Err(FormatError::Orientation { line: lineno });
        }
        if edges.last().is_some_and(|&last| last >= (u, v)) {
            return Err(FormatError::Order { line: lineno });
        }
        edges.push((u, v));
    }
    if edges.len() != expected {
        return Err(FormatError::EdgeCount { expected, found: edges.len() });
    }
    Ok(RegularGraph::from_edges(n, d, edges)?)
}

fn parse_pair(line: &[u8], lineno: usize) -> Result<(usize, usize), FormatError> {
    let mut parts = line.split(|&b| b == b' ');
    let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(FormatError::Fields { line: lineno });
    };
    Ok((parse_number(a, lineno)?, parse_number(b, lineno)?))
}

fn parse_number(token: &[u8], lineno: usize) -> Result<usize, FormatError> {
    let bad = || FormatError::Number {
        line: lineno,
        token: String::from_utf8_lossy(token).into_owned(),
    };
    let canonical = !token.is_empty()
        && token.iter().all(u8::is_ascii_digit)
        && (token.len() == 1 || token[0] != b'0');
    if !canonical {
        return Err(bad());
    }
    std::str::from_utf8(token)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(bad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::sample_uniform;
    use proptest::prelude::*;

    #[test]
    fn k4_text() {
        let text = write_regraph(&RegularGraph::complete(4));
        assert_eq!(text, "4 3\n0 1\n0 2\n0 3\n1 2\n1 3\n2 3\n");
        assert_eq!(parse_regraph(text.as_bytes()).unwrap(), RegularGraph::complete(4));
    }

    #[test]
    fn rejects_violations() {
        let ok = "4 3\n0 1\n0 2\n0 3\n1 2\n1 3\n2 3\n";
        let cases: &[(&str, fn(&FormatError) -> bool)] = &[
            ("", |e| matches!(e, FormatError::Empty)),
            ("4 3\n0 1\n0 2\n0 3\n1 2\n1 3\n2 3", |e| matches!(e, FormatError::MissingNewline { line: 7 })),
            ("4 3\r\n0 1\n0 2\n0 3\n1 2\n1 3\n2 3\n", |e| matches!(e, FormatError::Number { line: 1, .. })),
            ("4  3\n0 1\n0 2\n0 3\n1 2\n1 3\n2 3\n", |e| matches!(e, FormatError::Fields { line: 1 })),
            ("04 3\n0 1\n0 2\n0 3\n1 2\n1 3\n2 3\n", |e| matches!(e, FormatError::Number { .. })),
            ("4 3\n1 0\n0 2\n0 3\n1 2\n1 3\n2 3\n", |e| matches!(e, FormatError::Orientation { line: 2 })),
            ("4 3\n0 2\n0 1\n0 3\n1 2\n1 3\n2 3\n", |e| matches!(e, FormatError::Order { line: 3 })),
            ("4 3\n0 1\n0 1\n0 3\n1 2\n1 3\n2 3\n", |e| matches!(e, FormatError::Order { line: 3 })),
            ("4 3\n0 1\n0 2\n0 3\n1 2\n1 3\n", |e| matches!(e, FormatError::EdgeCount { expected: 6, found: 5 })),
            ("4 3\n0 1\n0 2\n0 3\n1 2\n1 3\n2 3\n\n", |e| matches!(e, FormatError::Fields { line: 8 })),
            ("5 3\n0 1\n", |e| matches!(e, FormatError::Graph(GraphError::Parity { .. }))),
            ("4 1\n0 1\n0 2\n", |e| matches!(e, FormatError::Graph(GraphError::Degree { .. }))),
            ("99999999999 1\n", |e| matches!(e, FormatError::TooLarge(_))),
            ("+4 3\n", |e| matches!(e, FormatError::Number { .. })),
        ];
        assert!(parse_regraph(ok.as_bytes()).is_ok());
        for (input, check) in cases {
            let err = parse_regraph(input.as_bytes()).unwrap_err();
            assert!(check(&err), "{input:?} gave {err:?}");
        }
    }

    proptest! {
        #[test]
        fn sampled_graphs_round_trip(seed in any::<u64>(), half_n in 3usize..40) {
            let g = sample_uniform(2 * half_n, 3, seed).unwrap();
            prop_assert_eq!(parse_regraph(write_regraph(&g).as_bytes()).unwrap(), g);
        }

        #[test]
        fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
            let _ = parse_regraph(&bytes);
        }
    }
}
