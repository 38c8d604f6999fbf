//! Python bindings for the `skillex` toolkit.

use std::collections::BTreeSet;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyKeyError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: skillex::Error) -> PyErr {
    match e {
        skillex::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        skillex::Error::UnknownSkill(_) => PyKeyError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn vector(values: Vec<f32>) -> PyResult<skillex::EmbeddingVector> {
    skillex::EmbeddingVector::new(values).map_err(to_py)
}

fn ids(labels: Vec<String>) -> PyResult<Vec<skillex::SkillId>> {
    labels
        .into_iter()
        .map(|s| skillex::SkillId::new(s).map_err(to_py))
        .collect()
}

/// Tokens used for literal matching.
#[pyfunction]
fn normalize(text: &str) -> Vec<String> {
    skillex::normalize(text)
}

#[pyfunction]
fn hash_encode(text: &str, dim: usize) -> PyResult<Vec<f32>> {
    Ok(skillex::hash_encode(text, dim).map_err(to_py)?.values().to_vec())
}

#[pyfunction]
fn cosine(u: Vec<f32>, v: Vec<f32>) -> PyResult<f64> {
    skillex::cosine(&vector(u)?, &vector(v)?).map_err(to_py)
}

#[pyfunction]
fn levenshtein(a: &str, b: &str) -> usize {
    skillex::levenshtein(a, b)
}

#[pyfunction]
fn rp_at_k(ranked: Vec<String>, gold: Vec<String>, k: usize) -> PyResult<f64> {
    let gold: BTreeSet<_> = ids(gold)?.into_iter().collect();
    skillex::rp_at_k(&ids(ranked)?, &gold, k).map_err(to_py)
}

#[pyfunction]
fn mrr(ranked: Vec<String>, gold: Vec<String>) -> PyResult<f64> {
    let gold: BTreeSet<_> = ids(gold)?.into_iter().collect();
    skillex::mrr(&ids(ranked)?, &gold).map_err(to_py)
}

#[pyclass(frozen)]
struct Taxonomy {
    inner: skillex::Taxonomy,
}

#[pymethods]
impl Taxonomy {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Taxonomy {
            inner: skillex::load_taxonomy(&path).map_err(to_py)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn ids(&self) -> Vec<String> {
        self.inner.ids().map(|id| id.to_string()).collect()
    }

    fn preferred_label(&self, skill_id: &str) -> PyResult<String> {
        self.inner
            .get(skill_id)
            .map(|s| s.preferred_label.clone())
            .ok_or_else(|| PyKeyError::new_err(skill_id.to_string()))
    }

    fn siblings(&self, skill_id: &str) -> PyResult<Vec<String>> {
        Ok(self
            .inner
            .siblings(skill_id)
            .map_err(to_py)?
            .iter()
            .map(|s| s.to_string())
            .collect())
    }

    fn matcher(&self) -> Matcher {
        Matcher {
            inner: skillex::Matcher::build(&self.inner),
        }
    }
}

#[pyclass(frozen)]
struct Matcher {
    inner: skillex::Matcher,
}

#[pymethods]
impl Matcher {
    /// Skill ids whose surface forms occur in `text`, sorted.
    fn labels(&self, text: &str) -> Vec<String> {
        self.inner.labels(text).iter().map(|s| s.to_string()).collect()
    }
}

#[pyclass(frozen)]
struct ModelSet {
    inner: skillex::ModelSet,
}

#[pymethods]
impl ModelSet {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(ModelSet {
            inner: skillex::ModelSet::read(&path).map_err(to_py)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    #[getter]
    fn encoder(&self) -> String {
        self.inner.encoder.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Top `k` (skill id, probability) pairs for a sentence vector.
    #[pyo3(signature = (x, k = 10))]
    fn rank(&self, x: Vec<f32>, k: usize) -> PyResult<Vec<(String, f64)>> {
        let top = skillex::rank_skills(&self.inner, &vector(x)?, k).map_err(to_py)?;
        Ok(top.into_iter().map(|s| (s.skill_id.to_string(), s.score)).collect())
    }

    /// Rank raw text; only for models trained on hashed features.
    #[pyo3(signature = (text, k = 10))]
    fn extract(&self, text: &str, k: usize) -> PyResult<Vec<(String, f64)>> {
        if !self.inner.is_hash_trained() {
            return Err(PyValueError::new_err(
                "models were trained on external vectors; use rank()",
            ));
        }
        let encoder = skillex::HashEncoder { dim: self.inner.dim };
        let pred = skillex::extract("", text, &encoder, &self.inner, k).map_err(to_py)?;
        Ok(pred
            .top
            .into_iter()
            .map(|s| (s.skill_id.to_string(), s.score))
            .collect())
    }
}

#[pymodule]
fn pyskillex(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(hash_encode, m)?)?;
    m.add_function(wrap_pyfunction!(cosine, m)?)?;
    m.add_function(wrap_pyfunction!(levenshtein, m)?)?;
    m.add_function(wrap_pyfunction!(rp_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(mrr, m)?)?;
    m.add_class::<Taxonomy>()?;
    m.add_class::<Matcher>()?;
    m.add_class::<ModelSet>()?;
    Ok(())
}
