use std::collections::HashMap;
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::text::similarity_tokens;

/// Token vectors of one fixed dimension, stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

/// Result of parsing an embedding file.
#[derive(Debug, Clone)]
pub struct EmbeddingLoad {
    pub table: EmbeddingTable,
    /// Tokens that appeared more than once; the first occurrence wins.
    pub conflicts: usize,
}

impl EmbeddingTable {
    /// Builds a table from `(token, vector)` entries. Duplicate tokens keep the
    /// first vector; the number of discarded duplicates is returned alongside.
    pub fn from_entries<I>(entries: I) -> Result<EmbeddingLoad>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        let mut builder = Builder::default();
        for (i, (token, vector)) in entries.into_iter().enumerate() {
            builder.push(i + 1, token, &vector)?;
        }
        builder.finish()
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index
            .get(token)
            .map(|&row| &self.data[row * self.dim..(row + 1) * self.dim])
    }

    /// Componentwise mean of the vectors of the in-vocabulary tokens of `text`.
    pub fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let mut sum = vec![0.0; self.dim];
        let mut known = 0usize;
        for token in similarity_tokens(text) {
            if let Some(v) = self.get(&token) {
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
                known += 1;
            }
        }
        if known == 0 {
            return Err(Error::NoKnownTokens(snippet(text)));
        }
        let n = known as f64;
        for s in &mut sum {
            *s /= n;
        }
        Ok(sum)
    }
}

pub(crate) fn snippet(text: &str) -> String {
    const MAX: usize = 48;
    if text.chars().count() <= MAX {
        text.to_string()
    } else {
        let mut s: String = text.chars().take(MAX).collect();
        s.push('…');
        s
    }
}

#[derive(Default)]
struct Builder {
    dim: Option<usize>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
    conflicts: usize,
}

impl Builder {
    fn push(&mut self, line: usize, token: String, vector: &[f64]) -> Result<()> {
        if vector.is_empty() {
            return Err(Error::parse(line, format!("token `{token}` has no components")));
        }
        let dim = *self.dim.get_or_insert(vector.len());
        if vector.len() != dim {
            return Err(Error::DimensionMismatch {
                line,
                expected: dim,
                found: vector.len(),
            });
        }
        if let Some(bad) = vector.iter().find(|x| !x.is_finite()) {
            return Err(Error::parse(line, format!("non-finite component {bad}")));
        }
        if self.index.contains_key(&token) {
            self.conflicts += 1;
            return Ok(());
        }
        self.index.insert(token, self.index.len());
        self.data.extend_from_slice(vector);
        Ok(())
    }

    fn finish(self) -> Result<EmbeddingLoad> {
        let Some(dim) = self.dim else {
            return Err(Error::EmptyTable);
        };
        if self.conflicts > 0 {
            tracing::warn!("{} duplicate embedding tokens ignored", self.conflicts);
        }
        Ok(EmbeddingLoad {
            table: EmbeddingTable {
                dim,
                index: self.index,
                data: self.data,
            },
            conflicts: self.conflicts,
        })
    }
}

/// Parses `token v1 ... vd` lines. Blank lines are ignored.
pub fn load_embeddings<R: BufRead>(mut input: R) -> Result<EmbeddingLoad> {
    let mut builder = Builder::default();
    let mut buf = String::new();
    let mut vector = Vec::new();
    let mut line = 0;
    loop {
        buf.clear();
        line += 1;
        if input
            .read_line(&mut buf)
            .map_err(|e| Error::parse(line, e.to_string()))?
            == 0
        {
            break;
        }
        let mut fields = buf.split_whitespace();
        let Some(token) = fields.next() else { continue };
        vector.clear();
        for field in fields {
            let x: f64 = field
                .parse()
                .map_err(|_| Error::parse(line, format!("non-numeric component `{field}`")))?;
            vector.push(x);
        }
        builder.push(line, token.to_string(), &vector)?;
    }
    builder.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(src: &str) -> EmbeddingTable {
        load_embeddings(src.as_bytes()).unwrap().table
    }

    #[test]
    fn minimal_table() {
        let t = table("sun 1 0\nmoon 0 1\n");
        assert_eq!(t.dimension(), 2);
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("moon"), Some(&[0.0, 1.0][..]));
    }

    #[test]
    fn dimension_error_names_line() {
        let err = load_embeddings("sun 1 0\nmoon 0 1 2\n".as_bytes()).unwrap_err();
        match err {
            Error::DimensionMismatch { line, expected, found } => {
                assert_eq!((line, expected, found), (2, 2, 3));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn duplicate_keeps_first() {
        let load =
            load_embeddings("sun 1 0\na 0 1\nb 0 1\nc 0 1\nsun 5 5\n".as_bytes()).unwrap();
        assert_eq!(load.conflicts, 1);
        assert_eq!(load.table.get("sun"), Some(&[1.0, 0.0][..]));
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(load_embeddings("".as_bytes()), Err(Error::EmptyTable)));
        assert!(matches!(load_embeddings("\n\n".as_bytes()), Err(Error::EmptyTable)));
        let err = load_embeddings("sun 1 x\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("non-numeric"), "{err}");
        assert!(load_embeddings("sun NaN 1\n".as_bytes()).is_err());
        assert!(load_embeddings("sun\n".as_bytes()).is_err());
    }

    #[test]
    fn embed_averages_known_tokens() {
        let t = table("sun 1 0\nmoon 0 1\n");
        assert_eq!(t.embed("sun").unwrap(), vec![1.0, 0.0]);
        assert_eq!(t.embed("Sun moon!").unwrap(), vec![0.5, 0.5]);
        assert_eq!(t.embed("the sun xyzzy").unwrap(), vec![1.0, 0.0]);
        assert!(matches!(t.embed("xyzzy"), Err(Error::NoKnownTokens(_))));
        assert!(matches!(t.embed(""), Err(Error::NoKnownTokens(_))));
    }
}
