//! Named flat parameter arrays and the soft re-initialization primitive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One named parameter tensor, stored flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Ordered collection of named parameter arrays for one network.
///
/// Two snapshots of the same network are shape-congruent: same entry names
/// in the same order with the same shapes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamSnapshot {
    entries: Vec<ParamEntry>,
}

impl ParamSnapshot {
    pub fn new() -> Self {
        ParamSnapshot::default()
    }

    /// Appends an entry; the name must be unique and the value length must
    /// match the shape product.
    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if self.entries.iter().any(|e| e.name == name) {
            return Err(Error::config(format!("duplicate parameter name '{name}'")));
        }
        let expect: usize = shape.iter().product();
        if values.len() != expect {
            return Err(Error::config(format!(
                "parameter '{}' has {} values, shape {:?} needs {}",
                name,
                values.len(),
                shape,
                expect
            )));
        }
        self.entries.push(ParamEntry { name, shape, values });
        Ok(())
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [ParamEntry] {
        &mut self.entries
    }

    pub fn get(&self, name: &str) -> Option<&ParamEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Total number of scalar parameters.
    pub fn param_count(&self) -> usize {
        self.entries.iter().map(|e| e.values.len()).sum()
    }

    /// Same entry names, order, and shapes.
    pub fn shape_congruent(&self, other: &ParamSnapshot) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.name == b.name && a.shape == b.shape)
    }

    /// Snapshot with identical structure and all values zero.
    pub fn zeros_like(&self) -> ParamSnapshot {
        ParamSnapshot {
            entries: self
                .entries
                .iter()
                .map(|e| ParamEntry {
                    name: e.name.clone(),
                    shape: e.shape.clone(),
                    values: vec![0.0; e.values.len()],
                })
                .collect(),
        }
    }

    /// Sets every value to zero in place.
    pub fn zero(&mut self) {
        for e in &mut self.entries {
            for v in &mut e.values {
                *v = 0.0;
            }
        }
    }

    fn check_congruent(&self, other: &ParamSnapshot, what: &str) -> Result<()> {
        if !self.shape_congruent(other) {
            return Err(Error::config(format!("{what}: snapshots are not shape-congruent")));
        }
        Ok(())
    }
}

/// Elementwise convex combination of `current` and `init`:
/// each value becomes `(1 - alpha) * current + alpha * init`.
///
/// `alpha = 0` returns `current` unchanged; `alpha = 1` returns `init`.
pub fn interpolate_params(
    current: &ParamSnapshot,
    init: &ParamSnapshot,
    alpha: f64,
) -> Result<ParamSnapshot> {
    if !(0.0..=1.0).contains(&alpha) || alpha.is_nan() {
        return Err(Error::input(format!(
            "interpolation weight {alpha} outside [0, 1]"
        )));
    }
    current.check_congruent(init, "interpolate_params")?;
    let mut out = current.clone();
    for (o, i) in out.entries.iter_mut().zip(init.entries()) {
        for (ov, iv) in o.values.iter_mut().zip(&i.values) {
            *ov = (1.0 - alpha) * *ov + alpha * *iv;
        }
    }
    Ok(out)
}
