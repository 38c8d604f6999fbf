//! Fixed-dimension text vectors.
//!
//! Two sources satisfy the same contract: [`hash_encode`], a deterministic
//! feature-hashing encoder used for tests and self-contained runs, and
//! [`EmbeddingStore`] files holding vectors computed by an external encoder.
//!
//! Store layout (little-endian):
//!
//! ```text
//! "EMBS" | version u32 = 1 | dim u32 | count u64
//! then `count` records sorted by key bytes:
//!   key_len u16 | key (UTF-8) | dim x f32
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::io;
use crate::seed::fnv1a64;
use crate::text::normalize;

pub const MAGIC: &[u8; 4] = b"EMBS";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 4 + 4 + 4 + 8;
pub const MIN_HASH_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    values: Vec<f32>,
}

impl EmbeddingVector {
    /// Wrap raw values, rejecting empty or non-finite input.
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Invalid("vector must have positive dimension".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(String::new()));
        }
        Ok(EmbeddingVector { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt()
    }

    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.values.iter().zip(weights).map(|(&x, &w)| f64::from(x) * w).sum()
    }
}

/// Signed feature hashing of character 3- to 5-grams, L2-normalized.
///
/// The text is normalized, tokens are joined by single spaces and the result
/// is padded with one space on each side. Each n-gram is hashed with 64-bit
/// FNV-1a over its UTF-8 bytes; the bucket is `hash % dim` and the top bit
/// picks the sign.
pub fn hash_encode(text: &str, dim: usize) -> Result<EmbeddingVector> {
    if dim < MIN_HASH_DIM {
        return Err(Error::InvalidConfig(format!(
            "hash encoder dimension must be at least {MIN_HASH_DIM}, got {dim}"
        )));
    }
    let tokens = normalize(text);
    if tokens.is_empty() {
        return Err(Error::ZeroContent);
    }
    let padded: Vec<char> = format!(" {} ", tokens.join(" ")).chars().collect();
    let mut acc = vec![0f64; dim];
    let mut buf = String::new();
    for n in 3..=5 {
        for window in padded.windows(n) {
            buf.clear();
            buf.extend(window);
            let h = fnv1a64(buf.as_bytes());
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            acc[(h % dim as u64) as usize] += sign;
        }
    }
    let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        // every bucket cancelled out; extremely unlikely but possible
        return Err(Error::ZeroNorm);
    }
    Ok(EmbeddingVector {
        values: acc.iter().map(|v| (v / norm) as f32).collect(),
    })
}

/// Cosine similarity clamped to `[-1, 1]`.
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            found: v.dim(),
        });
    }
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let dot: f64 = u
        .values
        .iter()
        .zip(&v.values)
        .map(|(&a, &b)| f64::from(a) * f64::from(b))
        .sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Vectors of one dimension keyed by sentence or skill id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    vectors: BTreeMap<String, EmbeddingVector>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > u32::MAX as usize {
            return Err(Error::InvalidConfig(format!("invalid store dimension {dim}")));
        }
        Ok(EmbeddingStore {
            dim,
            vectors: BTreeMap::new(),
        })
    }

    /// Hash-encode `(key, text)` pairs into a new store.
    pub fn from_hashed<'a, I>(dim: usize, items: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut store = Self::new(dim)?;
        for (key, text) in items {
            store.insert(key, hash_encode(text, dim)?)?;
        }
        Ok(store)
    }

    pub fn insert(&mut self, key: impl Into<String>, v: EmbeddingVector) -> Result<()> {
        let key = key.into();
        if v.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.dim(),
            });
        }
        if key.len() > u16::MAX as usize {
            return Err(Error::Invalid(format!("key too long: {} bytes", key.len())));
        }
        if self.vectors.contains_key(&key) {
            return Err(Error::DuplicateKey(key));
        }
        self.vectors.insert(key, v);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&EmbeddingVector> {
        self.vectors.get(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.vectors.contains_key(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &EmbeddingVector)> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Serialized size in bytes.
    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.vectors.keys().map(|k| 2 + k.len() + 4 * self.dim).sum::<usize>()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.vectors.len() as u64).to_le_bytes());
        // BTreeMap<String, _> iterates in byte order of the keys
        for (key, v) in &self.vectors {
            out.extend_from_slice(&(key.len() as u16).to_le_bytes());
            out.extend_from_slice(key.as_bytes());
            for x in &v.values {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_reader<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        read_exact(&mut r, &mut header, || Error::BadMagic)?;
        if &header[..4] != MAGIC {
            return Err(Error::BadMagic);
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let dim = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(header[12..20].try_into().unwrap());
        let mut store = Self::new(dim)?;

        let mut raw = vec![0u8; 4 * dim];
        for index in 0..count {
            let truncated = |key: &str| {
                let key = key.to_string();
                move || Error::TruncatedRecord { index, key }
            };
            let mut len = [0u8; 2];
            read_exact(&mut r, &mut len, truncated(""))?;
            let mut key = vec![0u8; u16::from_le_bytes(len) as usize];
            read_exact(&mut r, &mut key, truncated(""))?;
            let key =
                String::from_utf8(key).map_err(|_| Error::Invalid(format!("record {index}: key is not UTF-8")))?;
            read_exact(&mut r, &mut raw, truncated(&key))?;
            let values: Vec<f32> = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue(key));
            }
            if let Some(last) = store.vectors.keys().next_back() {
                if last.as_bytes() >= key.as_bytes() {
                    return Err(if *last == key {
                        Error::DuplicateKey(key)
                    } else {
                        Error::Invalid(format!("record {index}: keys are not sorted"))
                    });
                }
            }
            store.vectors.insert(key, EmbeddingVector { values });
        }
        let mut extra = [0u8; 1];
        if r.read(&mut extra).map_err(|e| Error::io("<store>", e))? != 0 {
            return Err(Error::Invalid("trailing bytes after last record".into()));
        }
        Ok(store)
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], on_eof: impl FnOnce() -> Error) -> Result<()> {
    match r.read_exact(buf) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Err(on_eof()),
        Err(e) => Err(Error::io("<store>", e)),
    }
}

pub fn read_store(path: &Path) -> Result<EmbeddingStore> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    EmbeddingStore::from_reader(BufReader::new(file))
}

pub fn write_store(store: &EmbeddingStore, path: &Path) -> Result<()> {
    let mut w = io::create(path)?;
    w.write_all(&store.to_bytes()).map_err(|e| Error::io(path, e))?;
    io::finish(w, path)
}

/// Something that turns a sentence into a vector at inference time.
pub trait SentenceEncoder: Sync {
    fn dim(&self) -> usize;
    fn encode(&self, id: &str, text: &str) -> Result<EmbeddingVector>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEncoder {
    pub dim: usize,
}

impl SentenceEncoder for HashEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, _id: &str, text: &str) -> Result<EmbeddingVector> {
        hash_encode(text, self.dim)
    }
}

/// Looks sentences up by id; optionally hash-encodes ids missing from the store.
#[derive(Debug, Clone)]
pub struct StoreEncoder<'a> {
    pub store: &'a EmbeddingStore,
    pub fallback: Option<HashEncoder>,
}

impl SentenceEncoder for StoreEncoder<'_> {
    fn dim(&self) -> usize {
        self.store.dim()
    }

    fn encode(&self, id: &str, text: &str) -> Result<EmbeddingVector> {
        match (self.store.get(id), &self.fallback) {
            (Some(v), _) => Ok(v.clone()),
            (None, Some(h)) => h.encode(id, text),
            (None, None) => Err(Error::MissingVectors(vec![id.to_string()])),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vector(values: &[f32]) -> EmbeddingVector {
        EmbeddingVector::new(values.to_vec()).unwrap()
    }

    #[test]
    fn hash_encoder_is_deterministic_and_unit() {
        let a = hash_encode("Manage musical staff", 64).unwrap();
        let b = hash_encode("manage   MUSICAL staff.", 64).unwrap();
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-6);
        assert_eq!(a.dim(), 64);
    }

    #[test]
    fn hash_encoder_errors() {
        assert!(matches!(hash_encode("...", 64), Err(Error::ZeroContent)));
        assert!(matches!(hash_encode("abc", 4), Err(Error::InvalidConfig(_))));
        assert!(hash_encode("C#", 8).is_ok());
    }

    #[test]
    fn character_overlap_orders_similarity() {
        let q = hash_encode("manage musical staff", 64).unwrap();
        let near = hash_encode("manage musicians", 64).unwrap();
        let far = hash_encode("PostgreSQL", 64).unwrap();
        assert!(cosine(&q, &near).unwrap() > cosine(&q, &far).unwrap());
    }

    #[test]
    fn cosine_basics() {
        let x = hash_encode("haskell", 32).unwrap();
        assert!((cosine(&x, &x).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(cosine(&vector(&[1.0, 0.0]), &vector(&[0.0, 1.0])).unwrap(), 0.0);
        let h = std::f32::consts::FRAC_1_SQRT_2;
        let c = cosine(&vector(&[h, h]), &vector(&[1.0, 0.0])).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
        assert!(matches!(
            cosine(&vector(&[1.0]), &vector(&[1.0, 0.0])),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            cosine(&vector(&[0.0, 0.0]), &vector(&[1.0, 0.0])),
            Err(Error::ZeroNorm)
        ));
    }

    fn sample_store() -> EmbeddingStore {
        let mut s = EmbeddingStore::new(4).unwrap();
        s.insert("b", vector(&[1.0, 2.0, 3.0, 4.0])).unwrap();
        s.insert("a", vector(&[0.5, -1.0, 0.0, 1e-3])).unwrap();
        s.insert("ccc", vector(&[9.0, 9.0, 9.0, 9.0])).unwrap();
        s
    }

    #[test]
    fn store_round_trip_and_size() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.embs");
        let store = sample_store();
        write_store(&store, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        // header + sum of (2 + key_len + 16)
        assert_eq!(bytes.len(), 20 + (2 + 1 + 16) * 2 + (2 + 3 + 16));
        assert_eq!(bytes.len(), store.encoded_len());
        assert_eq!(read_store(&path).unwrap(), store);

        let again = dir.path().join("w.embs");
        write_store(&read_store(&path).unwrap(), &again).unwrap();
        assert_eq!(std::fs::read(&again).unwrap(), bytes);
        // keys sorted: "a" record directly after the header
        assert_eq!(&bytes[20..23], &[1, 0, b'a']);
    }

    #[test]
    fn empty_store_is_header_only() {
        let store = EmbeddingStore::new(64).unwrap();
        let bytes = store.to_bytes();
        assert_eq!(bytes.len(), HEADER_LEN);
        assert_eq!(&bytes[..4], b"EMBS");
        assert_eq!(&bytes[12..20], &0u64.to_le_bytes());
        assert_eq!(EmbeddingStore::from_reader(&bytes[..]).unwrap(), store);
    }

    #[test]
    fn store_validation_errors() {
        let good = sample_store().to_bytes();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(EmbeddingStore::from_reader(&bad[..]), Err(Error::BadMagic)));

        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(
            EmbeddingStore::from_reader(&bad[..]),
            Err(Error::UnsupportedVersion(2))
        ));

        // dim=64 header but one record of 63 floats
        let mut short = Vec::new();
        short.extend_from_slice(b"EMBS");
        short.extend_from_slice(&1u32.to_le_bytes());
        short.extend_from_slice(&64u32.to_le_bytes());
        short.extend_from_slice(&1u64.to_le_bytes());
        short.extend_from_slice(&1u16.to_le_bytes());
        short.push(b'k');
        for _ in 0..63 {
            short.extend_from_slice(&0.5f32.to_le_bytes());
        }
        assert!(matches!(
            EmbeddingStore::from_reader(&short[..]),
            Err(Error::TruncatedRecord { index: 0, .. })
        ));

        let mut nan = good.clone();
        let off = 20 + 3;
        nan[off..off + 4].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            EmbeddingStore::from_reader(&nan[..]),
            Err(Error::NonFiniteValue(k)) if k == "a"
        ));

        // duplicate key: repeat the "a" record and bump the count
        let rec = good[20..20 + 19].to_vec();
        let mut dup = good[..20].to_vec();
        dup[12..20].copy_from_slice(&2u64.to_le_bytes());
        dup.extend_from_slice(&rec);
        dup.extend_from_slice(&rec);
        assert!(matches!(
            EmbeddingStore::from_reader(&dup[..]),
            Err(Error::DuplicateKey(k)) if k == "a"
        ));
    }

    #[test]
    fn store_insert_rules() {
        let mut s = EmbeddingStore::new(2).unwrap();
        s.insert("x", vector(&[1.0, 0.0])).unwrap();
        assert!(matches!(
            s.insert("x", vector(&[1.0, 0.0])),
            Err(Error::DuplicateKey(_))
        ));
        assert!(matches!(
            s.insert("y", vector(&[1.0])),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(EmbeddingVector::new(vec![f32::INFINITY]).is_err());
    }

    #[test]
    fn store_encoder_fallback() {
        let mut s = EmbeddingStore::new(16).unwrap();
        s.insert("known", hash_encode("haskell", 16).unwrap()).unwrap();
        let strict = StoreEncoder {
            store: &s,
            fallback: None,
        };
        assert!(strict.encode("known", "").is_ok());
        assert!(matches!(
            strict.encode("other", "erlang"),
            Err(Error::MissingVectors(_))
        ));
        let loose = StoreEncoder {
            store: &s,
            fallback: Some(HashEncoder { dim: 16 }),
        };
        assert_eq!(
            loose.encode("other", "erlang").unwrap(),
            hash_encode("erlang", 16).unwrap()
        );
    }
}
