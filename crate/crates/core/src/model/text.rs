//! Closed-vocabulary text encoder standing in for a pretrained language model.

use std::collections::HashMap;

use chainhoi_nn::module::join;
use chainhoi_nn::{sinusoidal, Embedding, Mask, Module, Tensor};
use rand::Rng;

use super::layers::EncoderLayer;
use crate::error::{ChainError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

pub fn split_words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric() && c != '-')
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect()
}

impl Vocabulary {
    /// Ids start at 1; 0 is the padding row.
    pub fn new(words: &[String]) -> Vocabulary {
        let mut v = Vocabulary { words: Vec::new(), index: HashMap::new() };
        for w in words {
            if !v.index.contains_key(w) {
                v.index.insert(w.clone(), v.words.len() + 1);
                v.words.push(w.clone());
            }
        }
        v
    }

    /// Sorted, de-duplicated words of every text.
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Vocabulary {
        let mut words: Vec<String> = texts.into_iter().flat_map(split_words).collect();
        words.sort();
        words.dedup();
        Vocabulary::new(&words)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn tokenize(&self, text: &str) -> Result<Vec<usize>> {
        split_words(text)
            .into_iter()
            .map(|w| self.index.get(&w).copied().ok_or(ChainError::Vocab(w)))
            .collect()
    }
}

/// Embedding + sinusoidal positions + self-attention layers. An empty token
/// list encodes to the single learned null token. With `cls`, a learned
/// token is prepended and its output row is the pooled feature.
#[derive(Debug, Clone)]
pub struct TextEncoder {
    pub embed: Embedding,
    pub null: Tensor,
    pub cls: Option<Tensor>,
    pub layers: Vec<EncoderLayer>,
}

impl Module for TextEncoder {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        out.push((join(prefix, "null"), &self.null));
        if let Some(c) = &self.cls {
            out.push((join(prefix, "cls"), c));
        }
        self.embed.visit(&join(prefix, "embed"), out);
        self.layers.visit(&join(prefix, "layers"), out);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>) {
        out.push((join(prefix, "null"), &mut self.null));
        if let Some(c) = &mut self.cls {
            out.push((join(prefix, "cls"), c));
        }
        self.embed.visit_mut(&join(prefix, "embed"), out);
        self.layers.visit_mut(&join(prefix, "layers"), out);
    }
}

impl TextEncoder {
    pub fn new<R: Rng>(
        rows: usize,
        d: usize,
        heads: usize,
        layers: usize,
        hidden: usize,
        cls: bool,
        rng: &mut R,
    ) -> chainhoi_nn::Result<TextEncoder> {
        let null: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cls = cls.then(|| Tensor::param((0..d).map(|_| rng.gen_range(-1.0..1.0)).collect(), &[1, d]).unwrap());
        Ok(TextEncoder {
            embed: Embedding::new(rows, d, rng),
            null: Tensor::param(null, &[1, d])?,
            cls,
            layers: (0..layers).map(|_| EncoderLayer::new(d, heads, hidden, rng)).collect::<chainhoi_nn::Result<_>>()?,
        })
    }

    pub fn width(&self) -> usize {
        self.null.dim(1)
    }

    /// Encodes a batch of token lists, padded to the longest. Returns
    /// `[B, n, d]` and the key mask `[B, 1, 1, n]`.
    pub fn encode_batch(&self, batch: &[Vec<usize>]) -> chainhoi_nn::Result<(Tensor, Mask)> {
        let d = self.width();
        let offset = self.cls.is_some() as usize;
        let lens: Vec<usize> = batch.iter().map(|ids| ids.len().max(1) + offset).collect();
        let n = *lens.iter().max().unwrap_or(&1);
        let mut rows = Vec::with_capacity(batch.len());
        for (ids, &len) in batch.iter().zip(&lens) {
            let mut parts = Vec::new();
            if let Some(c) = &self.cls {
                parts.push(c.clone());
            }
            if ids.is_empty() {
                parts.push(self.null.clone());
            } else {
                let pos: Vec<f64> = (0..ids.len()).map(|p| p as f64).collect();
                parts.push(self.embed.forward(ids)?.add(&sinusoidal(&pos, d))?);
            }
            if len < n {
                parts.push(Tensor::zeros(&[n - len, d]));
            }
            rows.push(Tensor::concat(&parts, 0)?);
        }
        let allow: Vec<bool> = lens.iter().flat_map(|&len| (0..n).map(move |k| k < len)).collect();
        let mask = Mask::new(allow, &[batch.len(), 1, 1, n])?;
        let mut x = Tensor::stack(&rows)?;
        for layer in &self.layers {
            x = layer.forward(&x, Some(&mask))?;
        }
        Ok((x, mask))
    }
}
