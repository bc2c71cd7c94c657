//! The shipped field catalog and its on-disk format.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::Deserialize;

use super::NumberField;
use crate::error::{Error, Result};

const BUILTIN: &str = include_str!("../../data/catalog.toml");

/// A rational entry written either as an integer or as a `"p/q"` string.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum RationalEntry {
    Int(i64),
    Text(String),
}

#[derive(Debug, Clone, Deserialize)]
pub struct LocalFactorization {
    pub p: u64,
    /// `(ramification index, residue degree)` per prime above `p`.
    pub factors: Vec<(u32, u32)>,
}

/// One `[[field]]` table, unverified.
#[derive(Debug, Clone, Deserialize)]
pub struct FieldRecord {
    pub name: String,
    pub polynomial: Vec<i64>,
    pub integral_basis: Vec<Vec<RationalEntry>>,
    pub signature: (usize, usize),
    pub discriminant: i64,
    pub class_number: u64,
    pub regulator: f64,
    pub roots_of_unity: u32,
    #[serde(default)]
    pub fundamental_units: Vec<Vec<i64>>,
    #[serde(default = "one")]
    pub unit_index: u64,
    #[serde(default)]
    pub conjugation: Option<Vec<Vec<i64>>>,
    #[serde(default)]
    pub local: Vec<LocalFactorization>,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Deserialize)]
struct CatalogFile {
    field: Vec<FieldRecord>,
}

/// Parsed catalog records; fields are verified and cached on first lookup.
#[derive(Debug)]
pub struct Catalog {
    records: Vec<FieldRecord>,
    cache: Mutex<HashMap<String, Arc<NumberField>>>,
}

impl Catalog {
    pub fn from_toml_str(text: &str) -> Result<Catalog> {
        let file: CatalogFile =
            toml::from_str(text).map_err(|e| Error::Parse(format!("catalog: {e}")))?;
        Ok(Catalog {
            records: file.field,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn builtin() -> &'static Catalog {
        static CATALOG: OnceLock<Catalog> = OnceLock::new();
        CATALOG.get_or_init(|| Catalog::from_toml_str(BUILTIN).expect("builtin catalog parses"))
    }

    pub fn names(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.name.as_str()).collect()
    }

    pub fn record(&self, name: &str) -> Result<&FieldRecord> {
        self.records
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| Error::UnknownField(name.to_string()))
    }

    pub fn get(&self, name: &str) -> Result<Arc<NumberField>> {
        if let Some(f) = self.cache.lock().unwrap().get(name) {
            return Ok(f.clone());
        }
        let field = Arc::new(NumberField::from_record(self.record(name)?)?);
        self.cache
            .lock()
            .unwrap()
            .insert(name.to_string(), field.clone());
        Ok(field)
    }
}

/// Looks up and verifies a field from the shipped catalog.
pub fn catalog_lookup(name: &str) -> Result<Arc<NumberField>> {
    Catalog::builtin().get(name)
}
