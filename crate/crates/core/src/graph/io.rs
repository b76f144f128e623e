//! Edge-list text format.
//!
//! ```text
//! # comment
//! n m
//! u v
//! ...
//! ```
//!
//! Exactly `m` edge lines follow the header. Blank lines and `#` comments are
//! ignored. Labels that are all integers in `1..=n` are used as vertex IDs
//! directly; any other labelling is re-mapped to `1..=n` in order of first
//! appearance.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

use super::{Graph, GraphError};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid graph: {0}")]
    Invalid(#[from] GraphError),
}

pub fn read_edge_list_file(path: impl AsRef<Path>) -> Result<Graph, LoadError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_edge_list(BufReader::new(file))
}

pub fn read_edge_list(reader: impl BufRead) -> Result<Graph, LoadError> {
    let mut header: Option<(usize, usize)> = None;
    let mut edges: Vec<(usize, String, String)> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|source| LoadError::Io { path: "<input>".into(), source })?;
        let content = line.split('#').next().unwrap_or_default().trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(LoadError::Parse {
                line: lineno,
                message: format!("expected 2 fields, found {}", fields.len()),
            });
        }
        match header {
            None => {
                let parse = |s: &str, what: &str| {
                    s.parse::<usize>().map_err(|_| LoadError::Parse {
                        line: lineno,
                        message: format!("header {what} `{s}` is not a non-negative integer"),
                    })
                };
                header = Some((parse(fields[0], "n")?, parse(fields[1], "m")?));
            }
            Some((_, m)) => {
                if edges.len() == m {
                    return Err(LoadError::Parse {
                        line: lineno,
                        message: format!("more than the {m} edges declared in the header"),
                    });
                }
                edges.push((lineno, fields[0].to_owned(), fields[1].to_owned()));
            }
        }
    }
    let (n, m) = header.ok_or(LoadError::Parse { line: 0, message: "missing `n m` header".into() })?;
    if edges.len() != m {
        return Err(LoadError::Parse {
            line: 0,
            message: format!("header declares {m} edges, found {}", edges.len()),
        });
    }

    let numeric = edges.iter().all(|(_, u, v)| {
        [u, v].iter().all(|s| s.parse::<usize>().is_ok_and(|x| (1..=n).contains(&x)))
    });
    let mut labels: HashMap<String, usize> = HashMap::new();
    let mut resolve = |lineno: usize, label: &str| -> Result<usize, LoadError> {
        if numeric {
            return Ok(label.parse::<usize>().expect("checked numeric") - 1);
        }
        let next = labels.len();
        let id = *labels.entry(label.to_owned()).or_insert(next);
        if id >= n {
            return Err(LoadError::Parse {
                line: lineno,
                message: format!("more than n = {n} distinct vertex labels"),
            });
        }
        Ok(id)
    };

    let mut adjacency = vec![Vec::new(); n];
    for (lineno, u, v) in &edges {
        let (a, b) = (resolve(*lineno, u)?, resolve(*lineno, v)?);
        if a == b {
            return Err(LoadError::Parse { line: *lineno, message: format!("self-loop at `{u}`") });
        }
        if adjacency[a].contains(&b) {
            return Err(LoadError::Parse {
                line: *lineno,
                message: format!("parallel edge `{u}`-`{v}`"),
            });
        }
        adjacency[a].push(b);
        adjacency[b].push(a);
    }
    Ok(Graph::from_adjacency(adjacency)?)
}

pub fn write_edge_list(graph: &Graph, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{} {}", graph.n(), graph.m())?;
    for (u, v) in graph.edges() {
        writeln!(out, "{} {}", u, v)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, Family};

    #[test]
    fn reads_with_comments_and_blank_lines() {
        let text = "# a path\n3 2\n\n1 2 # first\n2 3\n";
        let g = read_edge_list(text.as_bytes()).unwrap();
        assert_eq!((g.n(), g.m()), (3, 2));
    }

    #[test]
    fn remaps_arbitrary_labels() {
        let g = read_edge_list("3 3\na b\nb c\nc a\n".as_bytes()).unwrap();
        assert_eq!(g, generate(&Family::Complete { n: 3 }, 0).unwrap());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = read_edge_list("3 2\n1 2\n2 2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, LoadError::Parse { line: 3, .. }), "{err}");
        let err = read_edge_list("3 2\n1 2 7\n".as_bytes()).unwrap_err();
        assert!(matches!(err, LoadError::Parse { line: 2, .. }), "{err}");
        let err = read_edge_list("2 1\n1 2\n1 2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, LoadError::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn edge_count_mismatch() {
        let err = read_edge_list("3 3\n1 2\n2 3\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("declares 3 edges"));
    }

    #[test]
    fn validation_failures_surface() {
        let err = read_edge_list("4 2\n1 2\n3 4\n".as_bytes()).unwrap_err();
        assert!(matches!(err, LoadError::Invalid(GraphError::Disconnected(_))));
    }

    #[test]
    fn write_then_read() {
        let g = generate(&Family::Dumbbell { k: 3 }, 0).unwrap();
        let mut buf = Vec::new();
        write_edge_list(&g, &mut buf).unwrap();
        assert_eq!(read_edge_list(buf.as_slice()).unwrap(), g);
    }
}
