//! Recurrent Takagi-Sugeno inference over a Delaunay partition.
//!
//! A system has `l` external inputs, `r` internal units and `m` external
//! outputs. Every rule reads `I = x : h` (external inputs followed by the
//! previous internal values) and produces `m + r` affine outputs, weighted by
//! the rule's membership. The output vector is laid out externals first:
//! indices `0..m` are the external outputs and `m..m+r` feed back as the next
//! internal state.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Domain, GeometryError, SimplexId, Triangulation, TriangulationConfig};

pub const FORMAT_TAG: &str = "rfv-system/1";

#[derive(Debug, Error)]
pub enum SystemError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("rule {index}: {reason}")]
    InvalidRule { index: usize, reason: String },
    #[error("expected {expected} external inputs, got {got}")]
    InputLength { expected: usize, got: usize },
    #[error("external input {0} is not finite")]
    NonFiniteInput(usize),
    #[error("rule index {0} out of range")]
    NoSuchRule(usize),
    #[error("malformed system document: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dimensions {
    /// External inputs `l`.
    pub inputs: usize,
    /// Internal units `r`.
    pub internal: usize,
    /// External outputs `m`.
    pub outputs: usize,
}

impl Dimensions {
    pub fn new(inputs: usize, internal: usize, outputs: usize) -> Result<Self, SystemError> {
        let dims = Dimensions {
            inputs,
            internal,
            outputs,
        };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<(), SystemError> {
        if self.inputs == 0 || self.outputs == 0 {
            return Err(SystemError::InvalidDimensions(format!(
                "need at least one input and one output, got {self:?}"
            )));
        }
        if self.rule_inputs() > crate::geometry::MAX_DIM {
            return Err(SystemError::InvalidDimensions(format!(
                "rule input arity {} exceeds {}",
                self.rule_inputs(),
                crate::geometry::MAX_DIM
            )));
        }
        Ok(())
    }

    /// `l + r`, the dimension of the rule input space.
    pub fn rule_inputs(&self) -> usize {
        self.inputs + self.internal
    }

    /// `m + r`, the number of consequent rows per rule.
    pub fn rule_outputs(&self) -> usize {
        self.outputs + self.internal
    }

    /// Coefficients per consequent row: the constant plus one per input.
    pub fn columns(&self) -> usize {
        self.rule_inputs() + 1
    }

    pub fn coefficient_count(&self) -> usize {
        self.rule_outputs() * self.columns()
    }

    /// Unit box over the rule input space.
    pub fn unit_domain(&self) -> Domain {
        Domain::unit(self.rule_inputs())
    }
}

/// One fuzzy rule: a Voronoi site and a row-major `(m+r) x (l+r+1)` matrix
/// whose row `i` is `(a_0, a_1, ..., a_{l+r})` for output `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyRule {
    pub site: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub frozen: bool,
}

impl FuzzyRule {
    pub fn new(site: Vec<f64>, coefficients: Vec<f64>, frozen: bool) -> Self {
        FuzzyRule {
            site,
            coefficients,
            frozen,
        }
    }

    /// Rule whose consequents are the constants `outputs`.
    pub fn constant(site: Vec<f64>, outputs: &[f64], frozen: bool) -> Self {
        let cols = site.len() + 1;
        let mut coefficients = vec![0.0; outputs.len() * cols];
        for (i, c) in outputs.iter().enumerate() {
            coefficients[i * cols] = *c;
        }
        FuzzyRule::new(site, coefficients, frozen)
    }

    pub fn columns(&self) -> usize {
        self.site.len() + 1
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let cols = self.columns();
        &self.coefficients[i * cols..(i + 1) * cols]
    }

    /// `a_0 + sum_j a_j I_j` for output row `i`.
    #[inline]
    pub fn consequent(&self, i: usize, input: &[f64]) -> f64 {
        let row = self.row(i);
        row[0] + row[1..].iter().zip(input).map(|(a, x)| a * x).sum::<f64>()
    }

    pub fn validate(&self, dims: &Dimensions, domain: &Domain) -> Result<(), String> {
        if self.site.len() != dims.rule_inputs() {
            return Err(format!(
                "site has {} coordinates, expected {}",
                self.site.len(),
                dims.rule_inputs()
            ));
        }
        if self.coefficients.len() != dims.coefficient_count() {
            return Err(format!(
                "{} coefficients, expected {}",
                self.coefficients.len(),
                dims.coefficient_count()
            ));
        }
        if self
            .site
            .iter()
            .chain(&self.coefficients)
            .any(|x| !x.is_finite())
        {
            return Err("non-finite value".into());
        }
        if !domain.contains(&self.site) {
            return Err("site outside the domain box".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub external_outputs: Vec<f64>,
    /// Raw internal outputs, before clamping into the state box.
    pub internal_outputs: Vec<f64>,
    /// Per-rule activation, diagnostic.
    pub memberships: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RfvSystem {
    dims: Dimensions,
    domain: Domain,
    geometry: TriangulationConfig,
    rules: Vec<FuzzyRule>,
    triangulation: Arc<Triangulation>,
    initial_state: Vec<f64>,
    state: Vec<f64>,
    hint: SimplexId,
    input: Vec<f64>,
    memberships: Vec<f64>,
    outputs: Vec<f64>,
}

impl RfvSystem {
    /// System over the unit box with default geometry settings.
    pub fn new(dims: Dimensions, rules: Vec<FuzzyRule>) -> Result<Self, SystemError> {
        Self::with_domain(
            dims,
            dims.unit_domain(),
            TriangulationConfig::default(),
            rules,
        )
    }

    pub fn with_domain(
        dims: Dimensions,
        domain: Domain,
        geometry: TriangulationConfig,
        rules: Vec<FuzzyRule>,
    ) -> Result<Self, SystemError> {
        dims.validate()?;
        domain.validate()?;
        if domain.dim() != dims.rule_inputs() {
            return Err(SystemError::InvalidDimensions(format!(
                "domain has {} axes, rules read {}",
                domain.dim(),
                dims.rule_inputs()
            )));
        }
        Self::check_rules(&dims, &domain, &rules)?;
        let triangulation = Arc::new(Self::triangulate(&domain, geometry, &rules)?);
        let initial_state =
            domain.clamp(&vec![0.0; dims.internal + dims.inputs])[dims.inputs..].to_vec();
        Ok(RfvSystem {
            input: vec![0.0; dims.rule_inputs()],
            memberships: vec![0.0; rules.len()],
            outputs: vec![0.0; dims.rule_outputs()],
            state: initial_state.clone(),
            initial_state,
            dims,
            domain,
            geometry,
            rules,
            triangulation,
            hint: 0,
        })
    }

    fn check_rules(
        dims: &Dimensions,
        domain: &Domain,
        rules: &[FuzzyRule],
    ) -> Result<(), SystemError> {
        let mut seen_evolvable = false;
        for (index, rule) in rules.iter().enumerate() {
            rule.validate(dims, domain)
                .map_err(|reason| SystemError::InvalidRule { index, reason })?;
            if rule.frozen && seen_evolvable {
                return Err(SystemError::InvalidRule {
                    index,
                    reason: "frozen rules must precede evolvable ones".into(),
                });
            }
            seen_evolvable |= !rule.frozen;
        }
        Ok(())
    }

    fn triangulate(
        domain: &Domain,
        geometry: TriangulationConfig,
        rules: &[FuzzyRule],
    ) -> Result<Triangulation, GeometryError> {
        let sites: Vec<Vec<f64>> = rules.iter().map(|r| r.site.clone()).collect();
        Triangulation::build(&sites, domain, geometry)
    }

    pub fn dims(&self) -> Dimensions {
        self.dims
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn geometry(&self) -> TriangulationConfig {
        self.geometry
    }

    pub fn rules(&self) -> &[FuzzyRule] {
        &self.rules
    }

    pub fn triangulation(&self) -> &Triangulation {
        &self.triangulation
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    /// Sub-box of the domain the internal state lives in.
    pub fn internal_domain(&self) -> Domain {
        self.domain.slice(self.dims.inputs..self.dims.rule_inputs())
    }

    /// State used by `reset_state`; zeros unless set otherwise.
    pub fn set_initial_state(&mut self, state: &[f64]) -> Result<(), SystemError> {
        if state.len() != self.dims.internal {
            return Err(SystemError::InvalidDimensions(format!(
                "initial state has {} entries, expected {}",
                state.len(),
                self.dims.internal
            )));
        }
        let mut clamped = state.to_vec();
        for (j, x) in clamped.iter_mut().enumerate() {
            let axis = self.dims.inputs + j;
            *x = x.clamp(self.domain.lower[axis], self.domain.upper[axis]);
        }
        self.initial_state = clamped;
        Ok(())
    }

    pub fn reset_state(&mut self) {
        self.state.clone_from(&self.initial_state);
    }

    /// Copy sharing the triangulation, with a freshly reset state.
    pub fn fork(&self) -> Self {
        let mut copy = self.clone();
        copy.reset_state();
        copy.hint = 0;
        copy
    }

    /// One inference step; writes the `m` external outputs into `external`
    /// and advances the internal state. No allocation.
    pub fn step_into(&mut self, x: &[f64], external: &mut [f64]) -> Result<(), SystemError> {
        let l = self.dims.inputs;
        let m = self.dims.outputs;
        if x.len() != l {
            return Err(SystemError::InputLength {
                expected: l,
                got: x.len(),
            });
        }
        if external.len() != m {
            return Err(SystemError::InvalidDimensions(format!(
                "output buffer has {} entries, expected {m}",
                external.len()
            )));
        }
        if let Some(j) = x.iter().position(|v| !v.is_finite()) {
            return Err(SystemError::NonFiniteInput(j));
        }
        self.input[..l].copy_from_slice(x);
        self.input[l..].copy_from_slice(&self.state);
        self.domain.clamp_in_place(&mut self.input);

        self.hint =
            self.triangulation
                .membership_into(&self.input, self.hint, &mut self.memberships)?;

        self.outputs.fill(0.0);
        for (rule, &mu) in self.rules.iter().zip(&self.memberships) {
            if mu == 0.0 {
                continue;
            }
            for (i, out) in self.outputs.iter_mut().enumerate() {
                *out += rule.consequent(i, &self.input) * mu;
            }
        }

        external.copy_from_slice(&self.outputs[..m]);
        for (j, s) in self.state.iter_mut().enumerate() {
            let axis = l + j;
            *s = self.outputs[m + j].clamp(self.domain.lower[axis], self.domain.upper[axis]);
        }
        Ok(())
    }

    pub fn infer_step(&mut self, x: &[f64]) -> Result<StepResult, SystemError> {
        let mut external = vec![0.0; self.dims.outputs];
        self.step_into(x, &mut external)?;
        Ok(StepResult {
            external_outputs: external,
            internal_outputs: self.outputs[self.dims.outputs..].to_vec(),
            memberships: self.memberships.clone(),
        })
    }

    /// Resets the state, then runs every input in order.
    pub fn evaluate_sequence(&mut self, xs: &[Vec<f64>]) -> Result<Vec<StepResult>, SystemError> {
        self.reset_state();
        xs.iter().map(|x| self.infer_step(x)).collect()
    }

    /// Re-triangulates from the current rule sites. The state is kept.
    pub fn rebuild(&mut self) -> Result<(), SystemError> {
        Self::check_rules(&self.dims, &self.domain, &self.rules)?;
        self.triangulation = Arc::new(Self::triangulate(&self.domain, self.geometry, &self.rules)?);
        self.memberships = vec![0.0; self.rules.len()];
        self.hint = 0;
        Ok(())
    }

    /// Appends a rule and re-triangulates; on failure the system is unchanged.
    pub fn add_rule(&mut self, rule: FuzzyRule) -> Result<(), SystemError> {
        self.rules.push(rule);
        if let Err(e) = self.rebuild() {
            self.rules.pop();
            self.rebuild()?;
            return Err(e);
        }
        Ok(())
    }

    pub fn remove_rule(&mut self, index: usize) -> Result<FuzzyRule, SystemError> {
        if index >= self.rules.len() {
            return Err(SystemError::NoSuchRule(index));
        }
        let removed = self.rules.remove(index);
        if let Err(e) = self.rebuild() {
            self.rules.insert(index, removed);
            self.rebuild()?;
            return Err(e);
        }
        Ok(removed)
    }

    pub fn to_document(&self) -> SystemDocument {
        let cols = self.dims.columns();
        SystemDocument {
            format: FORMAT_TAG.to_string(),
            dims: self.dims,
            domain: self.domain.clone(),
            geometry: self.geometry,
            initial_state: self.initial_state.clone(),
            rules: self
                .rules
                .iter()
                .map(|r| RuleDocument {
                    site: r.site.clone(),
                    coefficients: r.coefficients.chunks(cols).map(<[f64]>::to_vec).collect(),
                    frozen: r.frozen,
                })
                .collect(),
        }
    }

    pub fn from_document(doc: SystemDocument) -> Result<Self, SystemError> {
        if doc.format != FORMAT_TAG {
            return Err(SystemError::Format(format!(
                "unknown format tag {:?}",
                doc.format
            )));
        }
        let rules = doc
            .rules
            .into_iter()
            .map(|r| FuzzyRule::new(r.site, r.coefficients.concat(), r.frozen))
            .collect();
        let mut system = Self::with_domain(doc.dims, doc.domain, doc.geometry, rules)?;
        system.set_initial_state(&doc.initial_state)?;
        system.reset_state();
        Ok(system)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("system document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SystemError> {
        let doc: SystemDocument =
            serde_json::from_str(text).map_err(|e| SystemError::Format(e.to_string()))?;
        Self::from_document(doc)
    }
}

/// On-disk form of a system. Floats are written in shortest round-trip form
/// so that a save/load cycle is bit-exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemDocument {
    pub format: String,
    pub dims: Dimensions,
    pub domain: Domain,
    #[serde(default)]
    pub geometry: TriangulationConfig,
    pub initial_state: Vec<f64>,
    pub rules: Vec<RuleDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleDocument {
    pub site: Vec<f64>,
    /// One row per output, `[a_0, a_1, ..., a_{l+r}]`.
    pub coefficients: Vec<Vec<f64>>,
    pub frozen: bool,
}
