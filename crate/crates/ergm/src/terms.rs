//! Sufficient statistics: global evaluation, incremental change statistics,
//! and the fixed network-size offset.
//!
//! A change statistic for dyad `{i,j}` is the difference in a statistic
//! between the network with that tie present and with it absent. It never
//! depends on the current state of the dyad itself, which is what makes the
//! incremental bookkeeping in the sampler exact: flipping a dyad on adds the
//! change vector, flipping it off subtracts it.
//!
//! Terms are declared with attribute and level *names* ([`TermKind`]); the
//! cheap [`ModelSpec::compile`] step resolves names against an
//! [`AttributeTable`] once, pre-applies numeric transforms, and yields a
//! [`CompiledModel`] whose evaluation does no lookups or allocation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{AttrDecl, AttributeTable, Network};

/// Numerically safe inverse logit.
pub fn ilogit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Log-odds of a probability in (0,1).
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Transform applied to a numeric attribute before it enters a statistic.
/// `CenteredUnit` maps `[min,max]` onto `[-1/2, +1/2]`; `SqrtCenteredUnit`
/// takes the square root of the unit-scaled value before centering.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    Identity,
    CenteredUnit {
        #[serde(default = "default_min")]
        min: f64,
        #[serde(default = "default_max")]
        max: f64,
    },
    SqrtCenteredUnit {
        #[serde(default = "default_min")]
        min: f64,
        #[serde(default = "default_max")]
        max: f64,
    },
}

fn default_min() -> f64 {
    18.0
}

fn default_max() -> f64 {
    60.0
}

impl Transform {
    pub fn apply(&self, t: f64) -> f64 {
        match *self {
            Transform::Identity => t,
            Transform::CenteredUnit { min, max } => (t - min) / (max - min) - 0.5,
            Transform::SqrtCenteredUnit { min, max } => ((t - min) / (max - min)).sqrt() - 0.5,
        }
    }
}

/// Whether a statistic's change depends only on the incident actors'
/// attributes (dyad-independent) or also on their other ties (Markov).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Locality {
    DyadIndependent,
    Markov,
}

/// One sufficient statistic, named by what it counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TermKind {
    /// Total number of ties.
    EdgeCount,
    /// Sum of degrees over actors in one category.
    ActivityByCategory { attr: String, level: String },
    /// Ties whose endpoints are both in the given category.
    WithinCategoryTies { attr: String, level: String },
    /// Ties joining two distinct categories, each tie counted once.
    BetweenCategoryTies {
        attr: String,
        level1: String,
        level2: String,
    },
    /// Ties whose endpoints share a category, over all categories.
    SameCategoryTies { attr: String },
    /// Number of actors with exactly `degree` ties, optionally restricted to
    /// one category.
    DegreeCount {
        degree: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        attr: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        level: Option<String>,
    },
    /// Sum over actors of degree times a transformed numeric attribute.
    NumericActivity { attr: String, transform: Transform },
    /// Sum over ties of |f(t_i) - f(t_j)|^power, power 1 or 2.
    NumericDifference {
        attr: String,
        transform: Transform,
        power: u8,
    },
    /// Ties where the `older_level` endpoint has the strictly larger numeric
    /// value (e.g. older-male / younger-female partnerships).
    OrderedAsymmetry {
        cat_attr: String,
        older_level: String,
        younger_level: String,
        numeric_attr: String,
    },
}

impl TermKind {
    pub fn locality(&self) -> Locality {
        match self {
            TermKind::DegreeCount { .. } => Locality::Markov,
            _ => Locality::DyadIndependent,
        }
    }

    /// Short display name used in reports and CSV headers.
    pub fn label(&self) -> String {
        match self {
            TermKind::EdgeCount => "edges".into(),
            TermKind::ActivityByCategory { attr, level } => format!("activity.{attr}.{level}"),
            TermKind::WithinCategoryTies { attr, level } => format!("within.{attr}.{level}"),
            TermKind::BetweenCategoryTies {
                attr,
                level1,
                level2,
            } => format!("between.{attr}.{level1}.{level2}"),
            TermKind::SameCategoryTies { attr } => format!("same.{attr}"),
            TermKind::DegreeCount {
                degree,
                attr,
                level,
            } => match (attr, level) {
                (Some(a), Some(l)) => format!("degree{degree}.{a}.{l}"),
                _ => format!("degree{degree}"),
            },
            TermKind::NumericActivity { attr, transform } => {
                format!("activity.{attr}.{}", transform_label(transform))
            }
            TermKind::NumericDifference {
                attr,
                transform,
                power,
            } => format!("absdiff{power}.{attr}.{}", transform_label(transform)),
            TermKind::OrderedAsymmetry {
                cat_attr,
                older_level,
                younger_level,
                ..
            } => format!("asym.{cat_attr}.{older_level}.{younger_level}"),
        }
    }
}

fn transform_label(t: &Transform) -> &'static str {
    match t {
        Transform::Identity => "id",
        Transform::CenteredUnit { .. } => "unit",
        Transform::SqrtCenteredUnit { .. } => "sqrt",
    }
}

/// Offset statistic: a coefficient on the tie count that is fixed rather
/// than estimated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum OffsetSpec {
    #[default]
    None,
    /// log(1/n) per tie; pins mean degree rather than density as n grows.
    LogInverseN,
    /// logit(mu/(n-1)) per tie, for a constant mu much smaller than n.
    LogitMuOverNMinus1 { mu: f64 },
}

/// Coefficient the offset contributes per tie for a network of `n` actors.
pub fn offset_value(spec: &OffsetSpec, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::DegenerateNetwork { n });
    }
    match *spec {
        OffsetSpec::None => Ok(0.0),
        OffsetSpec::LogInverseN => Ok(-(n as f64).ln()),
        OffsetSpec::LogitMuOverNMinus1 { mu } => {
            if mu <= 0.0 {
                return Err(Error::InvalidOffset(format!("mu = {mu} must be positive")));
            }
            let ratio = mu / (n as f64 - 1.0);
            if ratio >= 1.0 {
                return Err(Error::InvalidOffset(format!(
                    "mu/(n-1) = {ratio} must be below 1"
                )));
            }
            Ok(logit(ratio))
        }
    }
}

/// Model description as read from / written to a model file: attribute
/// declarations, ordered terms, optional coefficients, offset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(default)]
    pub attributes: Vec<AttrDecl>,
    pub terms: Vec<TermKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(default)]
    pub offset: OffsetSpec,
}

impl ModelSpec {
    pub fn from_json(json: &str) -> Result<Self> {
        let spec: ModelSpec = serde_json::from_str(json)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load<P: AsRef<std::path::Path>>(path: P) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(theta) = &self.theta {
            if theta.len() != self.terms.len() {
                return Err(Error::ModelMismatch(format!(
                    "theta has {} entries for {} terms",
                    theta.len(),
                    self.terms.len()
                )));
            }
        }
        for term in &self.terms {
            if let TermKind::NumericDifference { power, .. } = term {
                if *power != 1 && *power != 2 {
                    return Err(Error::ModelMismatch(format!(
                        "numeric_difference power must be 1 or 2, got {power}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn term_labels(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.label()).collect()
    }

    /// True when every term is dyad-independent.
    pub fn dyad_independent(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.locality() == Locality::DyadIndependent)
    }

    /// Resolve names against `attrs`, bake transforms, and fix the offset at
    /// `attrs.n()` actors. Coefficients default to zero when absent.
    pub fn compile(&self, attrs: &AttributeTable) -> Result<CompiledModel> {
        self.validate()?;
        let n = attrs.n();
        let terms = self
            .terms
            .iter()
            .map(|t| ResolvedTerm::resolve(t, attrs))
            .collect::<Result<Vec<_>>>()?;
        let theta = match &self.theta {
            Some(t) => t.clone(),
            None => vec![0.0; self.terms.len()],
        };
        Ok(CompiledModel {
            kinds: self.terms.clone(),
            terms,
            theta,
            offset: self.offset,
            offset_value: offset_value(&self.offset, n)?,
            n,
        })
    }
}

/// Values of the statistic vector, aligned with a model's term list.
/// Real-valued even for counts so fractional mean-value targets flow
/// through the same type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatVector(pub Vec<f64>);

impl StatVector {
    pub fn zeros(len: usize) -> Self {
        StatVector(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Index<usize> for StatVector {
    type Output = f64;
    fn index(&self, idx: usize) -> &f64 {
        &self.0[idx]
    }
}

impl From<Vec<f64>> for StatVector {
    fn from(v: Vec<f64>) -> Self {
        StatVector(v)
    }
}

/// A term with names resolved to codes and numeric transforms pre-applied,
/// ready for tight evaluation loops.
#[derive(Clone, Debug)]
pub(crate) enum ResolvedTerm {
    EdgeCount,
    Activity {
        codes: Vec<u16>,
        level: u16,
    },
    Within {
        codes: Vec<u16>,
        level: u16,
    },
    Between {
        codes: Vec<u16>,
        level_a: u16,
        level_b: u16,
    },
    Same {
        codes: Vec<u16>,
    },
    DegreeCount {
        degree: usize,
        filter: Option<(Vec<u16>, u16)>,
    },
    NumericActivity {
        values: Vec<f64>,
    },
    NumericDifference {
        values: Vec<f64>,
        squared: bool,
    },
    OrderedAsymmetry {
        codes: Vec<u16>,
        older: u16,
        younger: u16,
        values: Vec<f64>,
    },
}

fn cat_codes(attrs: &AttributeTable, name: &str) -> Result<Vec<u16>> {
    attrs
        .cat(name)
        .map(|c| c.codes.clone())
        .ok_or_else(|| Error::ModelMismatch(format!("no categorical column {name}")))
}

fn num_values(attrs: &AttributeTable, name: &str) -> Result<Vec<f64>> {
    attrs
        .num(name)
        .map(|c| c.values.clone())
        .ok_or_else(|| Error::ModelMismatch(format!("no numeric column {name}")))
}

impl ResolvedTerm {
    fn resolve(kind: &TermKind, attrs: &AttributeTable) -> Result<ResolvedTerm> {
        Ok(match kind {
            TermKind::EdgeCount => ResolvedTerm::EdgeCount,
            TermKind::ActivityByCategory { attr, level } => ResolvedTerm::Activity {
                level: attrs.level_code(attr, level)?,
                codes: cat_codes(attrs, attr)?,
            },
            TermKind::WithinCategoryTies { attr, level } => ResolvedTerm::Within {
                level: attrs.level_code(attr, level)?,
                codes: cat_codes(attrs, attr)?,
            },
            TermKind::BetweenCategoryTies {
                attr,
                level1,
                level2,
            } => {
                let level_a = attrs.level_code(attr, level1)?;
                let level_b = attrs.level_code(attr, level2)?;
                if level_a == level_b {
                    return Err(Error::ModelMismatch(format!(
                        "between_category_ties needs distinct levels, got {level1} twice"
                    )));
                }
                ResolvedTerm::Between {
                    codes: cat_codes(attrs, attr)?,
                    level_a,
                    level_b,
                }
            }
            TermKind::SameCategoryTies { attr } => ResolvedTerm::Same {
                codes: cat_codes(attrs, attr)?,
            },
            TermKind::DegreeCount {
                degree,
                attr,
                level,
            } => {
                let filter = match (attr, level) {
                    (Some(a), Some(l)) => {
                        Some((cat_codes(attrs, a)?, attrs.level_code(a, l)?))
                    }
                    (None, None) => None,
                    _ => {
                        return Err(Error::ModelMismatch(
                            "degree_count filter needs both attr and level".into(),
                        ))
                    }
                };
                ResolvedTerm::DegreeCount {
                    degree: *degree,
                    filter,
                }
            }
            TermKind::NumericActivity { attr, transform } => ResolvedTerm::NumericActivity {
                values: num_values(attrs, attr)?
                    .into_iter()
                    .map(|t| transform.apply(t))
                    .collect(),
            },
            TermKind::NumericDifference {
                attr,
                transform,
                power,
            } => ResolvedTerm::NumericDifference {
                values: num_values(attrs, attr)?
                    .into_iter()
                    .map(|t| transform.apply(t))
                    .collect(),
                squared: *power == 2,
            },
            TermKind::OrderedAsymmetry {
                cat_attr,
                older_level,
                younger_level,
                numeric_attr,
            } => ResolvedTerm::OrderedAsymmetry {
                older: attrs.level_code(cat_attr, older_level)?,
                younger: attrs.level_code(cat_attr, younger_level)?,
                codes: cat_codes(attrs, cat_attr)?,
                values: num_values(attrs, numeric_attr)?,
            },
        })
    }

    /// Change in this statistic from toggling dyad `{i,j}` on, relative to
    /// off. Independent of the dyad's current state by construction.
    fn change(&self, net: &Network, i: usize, j: usize) -> f64 {
        match self {
            ResolvedTerm::EdgeCount => 1.0,
            ResolvedTerm::Activity { codes, level } => {
                (codes[i] == *level) as u8 as f64 + (codes[j] == *level) as u8 as f64
            }
            ResolvedTerm::Within { codes, level } => {
                (codes[i] == *level && codes[j] == *level) as u8 as f64
            }
            ResolvedTerm::Between {
                codes,
                level_a,
                level_b,
            } => {
                let (ci, cj) = (codes[i], codes[j]);
                ((ci == *level_a && cj == *level_b) || (ci == *level_b && cj == *level_a)) as u8
                    as f64
            }
            ResolvedTerm::Same { codes } => (codes[i] == codes[j]) as u8 as f64,
            ResolvedTerm::DegreeCount { degree, filter } => {
                // Degrees with the dyad itself forced off.
                let off = net.has_edge(i, j) as usize;
                let di = net.degree(i) - off;
                let dj = net.degree(j) - off;
                let d = *degree;
                let passes = |node: usize| match filter {
                    Some((codes, level)) => codes[node] == *level,
                    None => true,
                };
                let mut delta = 0.0;
                if passes(i) {
                    delta += (di + 1 == d) as u8 as f64 - (di == d) as u8 as f64;
                }
                if passes(j) {
                    delta += (dj + 1 == d) as u8 as f64 - (dj == d) as u8 as f64;
                }
                delta
            }
            ResolvedTerm::NumericActivity { values } => values[i] + values[j],
            ResolvedTerm::NumericDifference { values, squared } => {
                let d = (values[i] - values[j]).abs();
                if *squared {
                    d * d
                } else {
                    d
                }
            }
            ResolvedTerm::OrderedAsymmetry {
                codes,
                older,
                younger,
                values,
            } => {
                let hit = (codes[i] == *older && codes[j] == *younger && values[i] > values[j])
                    || (codes[j] == *older && codes[i] == *younger && values[j] > values[i]);
                hit as u8 as f64
            }
        }
    }

    fn global(&self, net: &Network) -> f64 {
        match self {
            ResolvedTerm::EdgeCount => net.edge_count() as f64,
            ResolvedTerm::Activity { codes, level } => (0..net.n())
                .filter(|&i| codes[i] == *level)
                .map(|i| net.degree(i) as f64)
                .sum(),
            ResolvedTerm::DegreeCount { degree, filter } => {
                let mut count = 0usize;
                for i in 0..net.n() {
                    let passes = match filter {
                        Some((codes, level)) => codes[i] == *level,
                        None => true,
                    };
                    if passes && net.degree(i) == *degree {
                        count += 1;
                    }
                }
                count as f64
            }
            ResolvedTerm::NumericActivity { values } => (0..net.n())
                .map(|i| net.degree(i) as f64 * values[i])
                .sum(),
            // Remaining kinds are sums over present ties of a pair function;
            // reuse the change statistic as that pair function.
            _ => net.iter_edges().map(|(i, j)| self.change(net, i, j)).sum(),
        }
    }
}

/// A model bound to a concrete attribute table (and therefore a concrete
/// network size). `theta` is freely mutable so fitting can update it.
#[derive(Clone, Debug)]
pub struct CompiledModel {
    kinds: Vec<TermKind>,
    pub(crate) terms: Vec<ResolvedTerm>,
    pub theta: Vec<f64>,
    pub offset: OffsetSpec,
    pub offset_value: f64,
    pub n: usize,
}

impl CompiledModel {
    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn kinds(&self) -> &[TermKind] {
        &self.kinds
    }

    pub fn term_labels(&self) -> Vec<String> {
        self.kinds.iter().map(|t| t.label()).collect()
    }

    pub fn dyad_independent(&self) -> bool {
        self.kinds
            .iter()
            .all(|t| t.locality() == Locality::DyadIndependent)
    }

    fn check_net(&self, net: &Network) -> Result<()> {
        if net.n() != self.n {
            return Err(Error::ModelMismatch(format!(
                "model compiled for {} nodes, network has {}",
                self.n,
                net.n()
            )));
        }
        Ok(())
    }

    fn check_dyad(&self, net: &Network, i: usize, j: usize) -> Result<()> {
        self.check_net(net)?;
        if i == j || i >= net.n() || j >= net.n() {
            return Err(Error::InvalidDyad { i, j, n: net.n() });
        }
        Ok(())
    }

    /// For a degree-count term, the number of actors its filter admits
    /// (the saturation bound of the statistic); `None` for other terms.
    pub(crate) fn degree_term_node_count(&self, k: usize) -> Option<usize> {
        match &self.terms[k] {
            ResolvedTerm::DegreeCount { filter, .. } => Some(match filter {
                Some((codes, level)) => codes.iter().filter(|&&c| c == *level).count(),
                None => self.n,
            }),
            _ => None,
        }
    }
}

/// Exact statistic vector for a whole network.
pub fn global_stats(net: &Network, model: &CompiledModel) -> Result<StatVector> {
    model.check_net(net)?;
    Ok(StatVector(
        model.terms.iter().map(|t| t.global(net)).collect(),
    ))
}

/// Change statistics for dyad `{i,j}`, computed incrementally.
pub fn change_stats(net: &Network, model: &CompiledModel, i: usize, j: usize) -> Result<StatVector> {
    model.check_dyad(net, i, j)?;
    let mut out = vec![0.0; model.terms.len()];
    change_stats_into(net, model, i, j, &mut out);
    Ok(StatVector(out))
}

/// Allocation-free change statistics; callers guarantee the dyad is valid.
pub(crate) fn change_stats_into(
    net: &Network,
    model: &CompiledModel,
    i: usize,
    j: usize,
    out: &mut [f64],
) {
    for (slot, term) in out.iter_mut().zip(&model.terms) {
        *slot = term.change(net, i, j);
    }
}

/// Conditional log-odds of a tie at `{i,j}` given the rest of the network:
/// the offset plus the coefficient-weighted change statistics. The tie
/// probability is the inverse logit of this value.
pub fn conditional_tie_log_odds(
    net: &Network,
    model: &CompiledModel,
    i: usize,
    j: usize,
) -> Result<f64> {
    let delta = change_stats(net, model, i, j)?;
    let mut lo = model.offset_value;
    for (theta, d) in model.theta.iter().zip(delta.as_slice()) {
        lo += theta * d;
    }
    Ok(lo)
}
