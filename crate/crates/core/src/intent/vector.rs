use super::IntentError;

/// Sparse vector with strictly increasing indices and no stored zeros.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn from_pairs(mut pairs: Vec<(usize, f64)>) -> Self {
        pairs.sort_by_key(|&(i, _)| i);
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            match entries.last_mut() {
                Some((j, acc)) if *j == i => *acc += v,
                _ => entries.push((i, v)),
            }
        }
        entries.retain(|&(_, v)| v != 0.0);
        Self { entries }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries.binary_search_by_key(&index, |&(i, _)| i).map_or(0.0, |pos| self.entries[pos].1)
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut a, mut b) = (self.entries.iter().peekable(), other.entries.iter().peekable());
        let mut sum = 0.0;
        while let (Some(&&(i, x)), Some(&&(j, y))) = (a.peek(), b.peek()) {
            match i.cmp(&j) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    sum += x * y;
                    a.next();
                    b.next();
                }
            }
        }
        sum
    }

    pub fn l1_norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v.abs()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scale(&mut self, factor: f64) {
        self.entries.iter_mut().for_each(|(_, v)| *v *= factor);
    }
}

/// Vectors comparable by cosine similarity.
pub trait Similarity {
    fn cosine(&self, other: &Self) -> Result<f64, IntentError>;
    fn is_zero(&self) -> bool;
}

impl Similarity for SparseVector {
    fn cosine(&self, other: &Self) -> Result<f64, IntentError> {
        let denom = self.l2_norm() * other.l2_norm();
        if denom == 0.0 {
            return Ok(0.0);
        }
        Ok((self.dot(other) / denom).clamp(-1.0, 1.0))
    }

    fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Similarity for Vec<f64> {
    fn cosine(&self, other: &Self) -> Result<f64, IntentError> {
        cosine(self, other)
    }

    fn is_zero(&self) -> bool {
        self.iter().all(|&v| v == 0.0)
    }
}

/// `dot(a, b) / (|a| |b|)`, defined as 0 when either norm is 0.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, IntentError> {
    if a.len() != b.len() {
        return Err(IntentError::DimensionMismatch { left: a.len(), right: b.len() });
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}
