use serde::{Deserialize, Serialize};

/// Unit-length embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    values: Vec<f32>,
}

impl Embedding {
    /// L2-normalize `raw`. A zero vector becomes the unit vector on
    /// component 0.
    pub fn normalized(raw: &[f64]) -> Self {
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        let values = if norm > 0.0 {
            raw.iter().map(|x| (x / norm) as f32).collect()
        } else {
            let mut v = vec![0.0; raw.len()];
            if let Some(first) = v.first_mut() {
                *first = 1.0;
            }
            v
        };
        Self { values }
    }

    /// Wrap stored values without renormalizing.
    pub(crate) fn from_stored(values: Vec<f32>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt()
    }

    /// Cosine similarity. Both sides are stored normalized, so this is the
    /// dot product, clamped to [-1, 1].
    pub fn cosine(&self, other: &Embedding) -> f64 {
        let dot: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f64::from(a) * f64::from(b))
            .sum();
        dot.clamp(-1.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedderSpec {
    pub kind: EmbedderKind,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_name: Option<String>,
}

impl EmbedderSpec {
    pub const DEFAULT_MOCK_DIM: usize = 256;

    pub fn mock(dim: usize) -> Self {
        Self {
            kind: EmbedderKind::Mock,
            dim,
            model_name: None,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.dim >= 8
    }
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        Self::mock(Self::DEFAULT_MOCK_DIM)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Deterministic offline embedding: signed hashing of character 3-grams of
/// the lowercased, whitespace-collapsed text (padded with one space on each
/// side) into `dim` buckets, then L2-normalized.
///
/// # Panics
/// If `dim < 8`.
pub fn mock_embed(text: &str, dim: usize) -> Embedding {
    assert!(dim >= 8, "embedding dim must be >= 8, got {dim}");
    let collapsed = text.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ");
    let padded: Vec<char> = format!(" {collapsed} ").chars().collect();
    let mut acc = vec![0.0f64; dim];
    let mut buf = String::with_capacity(12);
    for gram in padded.windows(3) {
        buf.clear();
        buf.extend(gram);
        let h = fnv1a(buf.as_bytes());
        let bucket = (h % dim as u64) as usize;
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        acc[bucket] += sign;
    }
    Embedding::normalized(&acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_normalized() {
        let a = mock_embed("brake pedal", 256);
        assert_eq!(a, mock_embed("brake pedal", 256));
        assert!((a.norm() - 1.0).abs() < 1e-6);
        assert_eq!(a.dim(), 256);
    }

    #[test]
    fn empty_text_is_first_basis_vector() {
        let e = mock_embed("", 16);
        assert_eq!(e.values()[0], 1.0);
        assert!(e.values()[1..].iter().all(|&x| x == 0.0));
        assert_eq!(mock_embed("   ", 16), e);
    }

    #[test]
    fn case_and_spacing_insensitive() {
        assert_eq!(mock_embed("Brake  Pedal", 64), mock_embed("brake pedal", 64));
    }

    #[test]
    fn fnv_reference_values() {
        // Published FNV-1a 64 test vectors.
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    #[should_panic]
    fn tiny_dim_panics() {
        mock_embed("x", 4);
    }
}
