//! Reference interpreters that identify functions by querying them.
//!
//! Each interpreter drives a [`Session`](crate::blackbox::Session) within its
//! budget and returns an [`Interpretation`]: a description, a domain note
//! and, when the answer is inside the grammar, a structured program.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::interval::Interval;
use crate::spec::Payload;

pub mod fit;
pub mod linalg;
pub mod lm;
pub mod noise;
pub mod numeric;
pub mod relations;
pub mod strings;

pub use noise::NoiseVerdict;
pub use numeric::{interpret_numeric, NumericConfig};
pub use relations::interpret_relation;
pub use strings::{interpret_string, StringConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interpretation {
    pub id: String,
    pub interpreter: String,
    pub description: String,
    /// Corrupted part of the domain in words, or `"none"`.
    pub domain_note: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<Payload>,
    /// Corrupted numeric intervals.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub corrupted: Vec<Interval>,
    /// Corrupted relation subdomain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrupted_tag: Option<String>,
    pub noise: NoiseVerdict,
    /// NMSE on the observations, or the fraction of observations matched.
    #[serde(default)]
    pub fit_score: Option<f64>,
    pub queries: usize,
    pub evaluations: usize,
    /// The budget ran out before the pipeline finished.
    #[serde(default)]
    pub partial: bool,
    /// No program in the grammar agrees with every observation.
    #[serde(default)]
    pub out_of_grammar: bool,
}

impl Interpretation {
    pub fn new(id: &str, interpreter: &str) -> Self {
        Interpretation {
            id: id.to_string(),
            interpreter: interpreter.to_string(),
            description: String::new(),
            domain_note: "none".to_string(),
            program: None,
            corrupted: Vec::new(),
            corrupted_tag: None,
            noise: NoiseVerdict::Unknown,
            fit_score: None,
            queries: 0,
            evaluations: 0,
            partial: false,
            out_of_grammar: false,
        }
    }
}
