use std::collections::HashMap;
use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use crate::InversionError;

/// Token strings with one embedding row each.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    embeddings: DMatrix<f64>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Requires at least two tokens, no duplicates and finite rows.
    pub fn new(tokens: Vec<String>, embeddings: DMatrix<f64>) -> Result<Self, InversionError> {
        let bad = |m: String| Err(InversionError::InvalidVocabulary(m));
        if tokens.len() != embeddings.nrows() {
            return bad(format!("{} tokens but {} rows", tokens.len(), embeddings.nrows()));
        }
        if tokens.len() < 2 {
            return bad("at least two tokens are required".into());
        }
        if embeddings.ncols() == 0 {
            return bad("embedding width is zero".into());
        }
        if let Some((r, _)) = embeddings.row_iter().enumerate().find(|(_, r)| r.iter().any(|x| !x.is_finite())) {
            return bad(format!("row {r} ({}) is not finite", tokens[r]));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return bad(format!("token {i} is empty or contains whitespace"));
            }
            if index.insert(t.clone(), i).is_some() {
                return bad(format!("duplicate token {t:?}"));
            }
        }
        Ok(Self {
            tokens,
            embeddings,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.ncols()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// `V × D` embedding matrix.
    pub fn embeddings(&self) -> &DMatrix<f64> {
        &self.embeddings
    }

    pub fn position(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn embedding(&self, token: &str) -> Option<DVector<f64>> {
        self.position(token).map(|i| self.row(i))
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.embeddings.row(i).transpose()
    }
}

fn parse_floats(text: &str, line: usize) -> Result<Vec<f64>, InversionError> {
    text.split_whitespace()
        .map(|t| {
            t.parse::<f64>().map_err(|_| InversionError::Parse {
                line,
                message: format!("not a number: {t:?}"),
            })
        })
        .collect()
}

/// Reads `"V D"` followed by `V` lines of `token v1 … vD`.
pub fn read_vocabulary<R: BufRead>(input: R) -> Result<Vocabulary, InversionError> {
    let mut lines = input.lines().enumerate().filter_map(|(n, l)| match l {
        Ok(l) if l.trim().is_empty() => None,
        other => Some((n + 1, other)),
    });
    let (n, header) = lines.next().ok_or(InversionError::Parse {
        line: 1,
        message: "empty vocabulary file".into(),
    })?;
    let header = header?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().ok())
        .collect::<Option<_>>()
        .filter(|d: &Vec<usize>| d.len() == 2)
        .ok_or_else(|| InversionError::Parse {
            line: n,
            message: "header must be \"V D\"".into(),
        })?;
    let (v, d) = (dims[0], dims[1]);
    let mut tokens = Vec::with_capacity(v);
    let mut data = Vec::with_capacity(v * d);
    for (n, line) in lines {
        let line = line?;
        let mut parts = line.splitn(2, char::is_whitespace);
        let token = parts.next().unwrap_or_default().to_string();
        let values = parse_floats(parts.next().unwrap_or_default(), n)?;
        if values.len() != d {
            return Err(InversionError::Parse {
                line: n,
                message: format!("expected {d} values, found {}", values.len()),
            });
        }
        if tokens.len() == v {
            return Err(InversionError::Parse {
                line: n,
                message: format!("more than {v} rows"),
            });
        }
        tokens.push(token);
        data.extend(values);
    }
    if tokens.len() != v {
        return Err(InversionError::Parse {
            line: n + tokens.len(),
            message: format!("expected {v} rows, found {}", tokens.len()),
        });
    }
    Vocabulary::new(tokens, DMatrix::from_row_slice(v, d, &data))
}

pub fn write_vocabulary<W: Write>(vocab: &Vocabulary, out: &mut W) -> Result<(), InversionError> {
    writeln!(out, "{} {}", vocab.len(), vocab.dim())?;
    for (i, t) in vocab.tokens.iter().enumerate() {
        write!(out, "{t}")?;
        for x in vocab.embeddings.row(i).iter() {
            write!(out, " {x}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Reads one line of floats.
pub fn read_query<R: BufRead>(input: R) -> Result<DVector<f64>, InversionError> {
    let mut rows = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            rows.push((n + 1, line));
        }
    }
    match rows.as_slice() {
        [(n, line)] => {
            let v = parse_floats(line, *n)?;
            if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                return Err(InversionError::Parse {
                    line: *n,
                    message: "query must be non-empty and finite".into(),
                });
            }
            Ok(DVector::from_vec(v))
        }
        _ => Err(InversionError::Parse {
            line: rows.get(1).map_or(1, |r| r.0),
            message: "query file must hold exactly one line".into(),
        }),
    }
}

/// One line of space-separated floats per vector.
pub fn write_vectors<W: Write>(vectors: &[DVector<f64>], out: &mut W) -> Result<(), InversionError> {
    for v in vectors {
        let line: Vec<String> = v.iter().map(|x| format!("{x:e}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let text = "3 2\na 1 2\nimage 0.5 -1e-3\nof 0 0\n";
        let v = read_vocabulary(text.as_bytes()).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(v.embedding("image").unwrap().as_slice(), &[0.5, -1e-3]);
        let mut buf = Vec::new();
        write_vocabulary(&v, &mut buf).unwrap();
        assert_eq!(read_vocabulary(buf.as_slice()).unwrap(), v);
    }

    #[test]
    fn malformed_files() {
        assert!(read_vocabulary("2 2\na 1 2\n".as_bytes()).is_err());
        assert!(read_vocabulary("2 2\na 1 2\nb 1\n".as_bytes()).is_err());
        assert!(read_vocabulary("2 2\na 1 2\na 3 4\n".as_bytes()).is_err());
        assert!(read_vocabulary("1 2\na 1 2\n".as_bytes()).is_err());
        assert!(read_vocabulary("2 2\na 1 2\nb 1 NaN\n".as_bytes()).is_err());
        match read_vocabulary("2 2\na 1 2\nb 1 x\n".as_bytes()) {
            Err(InversionError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn query_is_one_line() {
        assert_eq!(read_query("1 2 3\n".as_bytes()).unwrap().len(), 3);
        assert!(read_query("1 2\n3 4\n".as_bytes()).is_err());
        assert!(read_query("".as_bytes()).is_err());
    }
}
