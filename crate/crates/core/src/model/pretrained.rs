use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::corpus::Vocabulary;
use crate::model::ModelParams;
use crate::numerics::Scalar;
use crate::{Error, Result};

/// Overwrite term embedding rows from a whitespace-separated word-vector
/// file (`term v1 … vd` per line, optional `count dim` header). Terms
/// absent from the vocabulary are ignored. Returns the number of rows
/// replaced.
pub fn load_pretrained_embeddings<F: Scalar>(
    path: &Path,
    vocab: &Vocabulary,
    model: &mut ModelParams<F>,
) -> Result<usize> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let dim = model.shape().embed_dim;
    let id = model.term_embeddings();
    let table = model.params_mut().get_mut(id);
    let mut seen = vec![false; vocab.len()];
    let mut replaced = 0;
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut fields = line.split_whitespace();
        let Some(term) = fields.next() else { continue };
        let values: Vec<&str> = fields.collect();
        if n == 0 && values.len() == 1 && term.parse::<usize>().is_ok() {
            continue;
        }
        if values.len() != dim {
            return Err(Error::Data(format!(
                "{}:{}: expected {dim} components, found {}",
                path.display(),
                n + 1,
                values.len()
            )));
        }
        let Some(t) = vocab.id(term) else { continue };
        let mut row = Vec::with_capacity(dim);
        for v in values {
            let x: f64 = v.parse().map_err(|_| {
                Error::Data(format!("{}:{}: bad number {v:?}", path.display(), n + 1))
            })?;
            if !x.is_finite() {
                return Err(Error::Data(format!(
                    "{}:{}: non-finite component",
                    path.display(),
                    n + 1
                )));
            }
            row.push(F::of(x));
        }
        table.row_mut(t).copy_from_slice(&row);
        if !seen[t] {
            seen[t] = true;
            replaced += 1;
        }
    }
    Ok(replaced)
}
