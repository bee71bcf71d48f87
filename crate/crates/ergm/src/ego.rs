//! Egocentric survey data: ingestion, implied network statistics, weighted
//! bootstrap resampling, and a synthetic-population generator.
//!
//! In an egocentric census of an undirected network every tie is reported
//! twice, once by each endpoint, so any statistic that sums a symmetric
//! pair function over ties is recovered as half the weighted sum of that
//! function over all (ego, alter) reports. Statistics that sum a local
//! function over actors (degree counts) are read off the egos directly.
//! Inconsistent reports in a sample average out through the same half-sum,
//! which can leave fractional tie counts; those are kept as-is and treated
//! as mean-value targets by the fitter.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::RngExt;
use rand::SeedableRng;
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_mean_value, FitConfig, FitMethod, FitResult};
use crate::net::{AttrDecl, AttributeTable, Network};
use crate::sampler::{gibbs_sample, SamplerConfig};
use crate::terms::{ModelSpec, OffsetSpec, StatVector, TermKind, Transform};

/// One attribute value of an ego or alter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AttrValue {
    Cat(u16),
    Num(f64),
}

impl AttrValue {
    fn as_cat(&self) -> u16 {
        match self {
            AttrValue::Cat(c) => *c,
            AttrValue::Num(_) => panic!("categorical value expected"),
        }
    }

    fn as_num(&self) -> f64 {
        match self {
            AttrValue::Num(v) => *v,
            AttrValue::Cat(_) => panic!("numeric value expected"),
        }
    }
}

/// One survey respondent: own attributes, sampling weight, and the
/// attribute rows of every partner they reported.
#[derive(Clone, Debug, PartialEq)]
pub struct EgoRecord {
    pub attrs: Vec<AttrValue>,
    pub weight: f64,
    pub alters: Vec<Vec<AttrValue>>,
}

/// A weighted egocentric sample with a shared attribute schema.
#[derive(Clone, Debug)]
pub struct EgoSample {
    decls: Vec<AttrDecl>,
    records: Vec<EgoRecord>,
}

impl EgoSample {
    pub fn new(decls: Vec<AttrDecl>, records: Vec<EgoRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::ModelMismatch("ego sample is empty".into()));
        }
        let check_row = |row: &[AttrValue]| -> Result<()> {
            if row.len() != decls.len() {
                return Err(Error::ModelMismatch(format!(
                    "attribute row has {} values for {} declarations",
                    row.len(),
                    decls.len()
                )));
            }
            for (value, decl) in row.iter().zip(&decls) {
                match (value, decl) {
                    (AttrValue::Cat(c), AttrDecl::Categorical { name, levels }) => {
                        if *c as usize >= levels.len() {
                            return Err(Error::ModelMismatch(format!(
                                "code {c} outside levels of {name}"
                            )));
                        }
                    }
                    (AttrValue::Num(_), AttrDecl::Numeric { .. }) => {}
                    _ => {
                        return Err(Error::ModelMismatch(format!(
                            "value kind mismatch for {}",
                            decl.name()
                        )))
                    }
                }
            }
            Ok(())
        };
        for record in &records {
            if !(record.weight > 0.0) {
                return Err(Error::ModelMismatch(format!(
                    "ego weight {} must be positive",
                    record.weight
                )));
            }
            check_row(&record.attrs)?;
            for alter in &record.alters {
                check_row(alter)?;
            }
        }
        Ok(EgoSample { decls, records })
    }

    pub fn decls(&self) -> &[AttrDecl] {
        &self.decls
    }

    pub fn records(&self) -> &[EgoRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Weights rescaled to sum to the number of records.
    pub fn normalized_weights(&self) -> Vec<f64> {
        let total: f64 = self.records.iter().map(|r| r.weight).sum();
        let scale = self.records.len() as f64 / total;
        self.records.iter().map(|r| r.weight * scale).collect()
    }

    /// Full egocentric census of a known network: every node becomes an ego
    /// with weight one, reporting each neighbor's attributes.
    pub fn census(net: &Network, attrs: &AttributeTable) -> Result<Self> {
        if net.n() != attrs.n() {
            return Err(Error::ModelMismatch(format!(
                "network has {} nodes, attributes {}",
                net.n(),
                attrs.n()
            )));
        }
        let decls = attrs.decls();
        let row = |node: usize| -> Vec<AttrValue> {
            let mut out = Vec::with_capacity(decls.len());
            for c in attrs.cat_columns() {
                out.push(AttrValue::Cat(c.codes[node]));
            }
            for c in attrs.num_columns() {
                out.push(AttrValue::Num(c.values[node]));
            }
            out
        };
        let records = (0..net.n())
            .map(|i| EgoRecord {
                attrs: row(i),
                weight: 1.0,
                alters: net.neighbors(i).iter().map(|&j| row(j as usize)).collect(),
            })
            .collect();
        EgoSample::new(decls, records)
    }

    /// Node attribute table of the hypothetical network whose actors are
    /// exactly these egos.
    pub fn to_attribute_table(&self) -> Result<AttributeTable> {
        let n = self.records.len();
        let mut table = AttributeTable::new(n);
        for (col, decl) in self.decls.iter().enumerate() {
            match decl {
                AttrDecl::Categorical { name, levels } => {
                    let codes = self
                        .records
                        .iter()
                        .map(|r| r.attrs[col].as_cat())
                        .collect();
                    table.add_categorical(name, levels.clone(), codes)?;
                }
                AttrDecl::Numeric { name } => {
                    let values = self
                        .records
                        .iter()
                        .map(|r| r.attrs[col].as_num())
                        .collect();
                    table.add_numeric(name, values)?;
                }
            }
        }
        Ok(table)
    }

    /// Weight-normalized level counts per categorical attribute.
    pub fn composition(&self) -> Composition {
        let weights = self.normalized_weights();
        let mut out = BTreeMap::new();
        for (col, decl) in self.decls.iter().enumerate() {
            if let AttrDecl::Categorical { name, levels } = decl {
                let mut counts: BTreeMap<String, f64> =
                    levels.iter().map(|l| (l.clone(), 0.0)).collect();
                for (record, &w) in self.records.iter().zip(&weights) {
                    let label = &levels[record.attrs[col].as_cat() as usize];
                    *counts.get_mut(label).unwrap() += w;
                }
                out.insert(name.clone(), counts);
            }
        }
        Composition(out)
    }
}

/// Weighted level counts per categorical attribute, keyed by name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Composition(pub BTreeMap<String, BTreeMap<String, f64>>);

/// Deterministic attribute table matching a composition's marginal counts
/// (largest-remainder allocation per attribute). Only categorical columns
/// can be reconstructed this way; models with numeric terms need the actual
/// per-node attributes.
pub fn attribute_table_from_composition(n: usize, composition: &Composition) -> Result<AttributeTable> {
    let mut table = AttributeTable::new(n);
    for (attr, counts) in &composition.0 {
        let total: f64 = counts.values().sum();
        if total <= 0.0 {
            return Err(Error::ModelMismatch(format!("empty composition for {attr}")));
        }
        let levels: Vec<String> = counts.keys().cloned().collect();
        let mut alloc: Vec<(usize, f64)> = counts
            .values()
            .map(|&c| {
                let exact = c / total * n as f64;
                (exact.floor() as usize, exact - exact.floor())
            })
            .collect();
        let mut assigned: usize = alloc.iter().map(|(b, _)| b).sum();
        // Hand out the leftovers to the largest remainders, ties by index.
        let mut order: Vec<usize> = (0..alloc.len()).collect();
        order.sort_by(|&a, &b| alloc[b].1.partial_cmp(&alloc[a].1).unwrap().then(a.cmp(&b)));
        let mut cursor = 0;
        while assigned < n {
            alloc[order[cursor % order.len()]].0 += 1;
            assigned += 1;
            cursor += 1;
        }
        let mut codes = Vec::with_capacity(n);
        for (code, (count, _)) in alloc.iter().enumerate() {
            codes.extend(std::iter::repeat(code as u16).take(*count));
        }
        table.add_categorical(attr, levels, codes)?;
    }
    Ok(table)
}

/// Network statistics implied by an egocentric sample, treated as
/// mean-value targets for a pseudo-population of `n` actors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ImpliedStats {
    pub n: usize,
    pub terms: Vec<String>,
    pub targets: StatVector,
    pub composition: Composition,
}

impl ImpliedStats {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("implied stats serialize")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }
}

/// Weighted half-sum of a symmetric pair function over all (ego, alter)
/// reports: the implied value of a statistic that sums `f` over ties.
pub fn implied_edge_stat<F>(sample: &EgoSample, f: F) -> f64
where
    F: Fn(&[AttrValue], &[AttrValue]) -> f64,
{
    let weights = sample.normalized_weights();
    let mut total = 0.0;
    for (record, &w) in sample.records.iter().zip(&weights) {
        let mut inner = 0.0;
        for alter in &record.alters {
            inner += f(&record.attrs, alter);
        }
        total += w * inner;
    }
    0.5 * total
}

/// Weighted sum of a local actor function over egos: the implied value of
/// a statistic that sums `f` over actors and their neighborhoods.
pub fn implied_actor_stat<F>(sample: &EgoSample, f: F) -> f64
where
    F: Fn(&EgoRecord) -> f64,
{
    let weights = sample.normalized_weights();
    sample
        .records
        .iter()
        .zip(&weights)
        .map(|(record, &w)| w * f(record))
        .sum()
}

/// A term resolved against an ego sample's schema.
enum EgoTerm {
    EdgeCount,
    Activity { col: usize, level: u16 },
    Within { col: usize, level: u16 },
    Between { col: usize, level_a: u16, level_b: u16 },
    Same { col: usize },
    DegreeCount { degree: usize, filter: Option<(usize, u16)> },
    NumericActivity { col: usize, transform: Transform },
    NumericDifference { col: usize, transform: Transform, squared: bool },
    OrderedAsymmetry { cat_col: usize, older: u16, younger: u16, num_col: usize },
}

fn find_cat(decls: &[AttrDecl], attr: &str) -> Result<usize> {
    decls
        .iter()
        .position(|d| matches!(d, AttrDecl::Categorical { name, .. } if name == attr))
        .ok_or_else(|| Error::ModelMismatch(format!("no categorical attribute {attr} in schema")))
}

fn find_num(decls: &[AttrDecl], attr: &str) -> Result<usize> {
    decls
        .iter()
        .position(|d| matches!(d, AttrDecl::Numeric { name } if name == attr))
        .ok_or_else(|| Error::ModelMismatch(format!("no numeric attribute {attr} in schema")))
}

fn find_level(decls: &[AttrDecl], col: usize, label: &str) -> Result<u16> {
    match &decls[col] {
        AttrDecl::Categorical { name, levels } => levels
            .iter()
            .position(|l| l == label)
            .map(|p| p as u16)
            .ok_or_else(|| Error::ModelMismatch(format!("no level {label} in {name}"))),
        AttrDecl::Numeric { .. } => unreachable!("resolved as categorical"),
    }
}

impl EgoTerm {
    fn resolve(kind: &TermKind, decls: &[AttrDecl]) -> Result<EgoTerm> {
        Ok(match kind {
            TermKind::EdgeCount => EgoTerm::EdgeCount,
            TermKind::ActivityByCategory { attr, level } => {
                let col = find_cat(decls, attr)?;
                EgoTerm::Activity {
                    col,
                    level: find_level(decls, col, level)?,
                }
            }
            TermKind::WithinCategoryTies { attr, level } => {
                let col = find_cat(decls, attr)?;
                EgoTerm::Within {
                    col,
                    level: find_level(decls, col, level)?,
                }
            }
            TermKind::BetweenCategoryTies {
                attr,
                level1,
                level2,
            } => {
                let col = find_cat(decls, attr)?;
                EgoTerm::Between {
                    col,
                    level_a: find_level(decls, col, level1)?,
                    level_b: find_level(decls, col, level2)?,
                }
            }
            TermKind::SameCategoryTies { attr } => EgoTerm::Same {
                col: find_cat(decls, attr)?,
            },
            TermKind::DegreeCount {
                degree,
                attr,
                level,
            } => {
                let filter = match (attr, level) {
                    (Some(a), Some(l)) => {
                        let col = find_cat(decls, a)?;
                        Some((col, find_level(decls, col, l)?))
                    }
                    (None, None) => None,
                    _ => {
                        return Err(Error::ModelMismatch(
                            "degree_count filter needs both attr and level".into(),
                        ))
                    }
                };
                EgoTerm::DegreeCount {
                    degree: *degree,
                    filter,
                }
            }
            TermKind::NumericActivity { attr, transform } => EgoTerm::NumericActivity {
                col: find_num(decls, attr)?,
                transform: *transform,
            },
            TermKind::NumericDifference {
                attr,
                transform,
                power,
            } => EgoTerm::NumericDifference {
                col: find_num(decls, attr)?,
                transform: *transform,
                squared: *power == 2,
            },
            TermKind::OrderedAsymmetry {
                cat_attr,
                older_level,
                younger_level,
                numeric_attr,
            } => {
                let cat_col = find_cat(decls, cat_attr)?;
                EgoTerm::OrderedAsymmetry {
                    cat_col,
                    older: find_level(decls, cat_col, older_level)?,
                    younger: find_level(decls, cat_col, younger_level)?,
                    num_col: find_num(decls, numeric_attr)?,
                }
            }
        })
    }

    /// The symmetric pair function whose tie-sum this term is, when it has
    /// one (everything except degree counts).
    fn pair_value(&self, ego: &[AttrValue], alter: &[AttrValue]) -> f64 {
        match self {
            EgoTerm::EdgeCount => 1.0,
            EgoTerm::Activity { col, level } => {
                (ego[*col].as_cat() == *level) as u8 as f64
                    + (alter[*col].as_cat() == *level) as u8 as f64
            }
            EgoTerm::Within { col, level } => {
                (ego[*col].as_cat() == *level && alter[*col].as_cat() == *level) as u8 as f64
            }
            EgoTerm::Between {
                col,
                level_a,
                level_b,
            } => {
                let (ce, ca) = (ego[*col].as_cat(), alter[*col].as_cat());
                ((ce == *level_a && ca == *level_b) as u8
                    + (ce == *level_b && ca == *level_a) as u8) as f64
            }
            EgoTerm::Same { col } => (ego[*col].as_cat() == alter[*col].as_cat()) as u8 as f64,
            EgoTerm::NumericActivity { col, transform } => {
                transform.apply(ego[*col].as_num()) + transform.apply(alter[*col].as_num())
            }
            EgoTerm::NumericDifference {
                col,
                transform,
                squared,
            } => {
                let d = (transform.apply(ego[*col].as_num())
                    - transform.apply(alter[*col].as_num()))
                .abs();
                if *squared {
                    d * d
                } else {
                    d
                }
            }
            EgoTerm::OrderedAsymmetry {
                cat_col,
                older,
                younger,
                num_col,
            } => {
                let (ce, ca) = (ego[*cat_col].as_cat(), alter[*cat_col].as_cat());
                let (te, ta) = (ego[*num_col].as_num(), alter[*num_col].as_num());
                ((ce == *older && ca == *younger && te > ta) as u8
                    + (ca == *older && ce == *younger && ta > te) as u8) as f64
            }
            EgoTerm::DegreeCount { .. } => unreachable!("degree counts are actor statistics"),
        }
    }

    fn actor_value(&self, record: &EgoRecord) -> f64 {
        match self {
            EgoTerm::DegreeCount { degree, filter } => {
                let passes = match filter {
                    Some((col, level)) => record.attrs[*col].as_cat() == *level,
                    None => true,
                };
                (passes && record.alters.len() == *degree) as u8 as f64
            }
            _ => unreachable!("pair statistics are tie sums"),
        }
    }

    fn is_actor_stat(&self) -> bool {
        matches!(self, EgoTerm::DegreeCount { .. })
    }
}

/// Derive the full implied statistic vector for a model from an egocentric
/// sample: tie-sum terms go through the half-sum of pair reports, degree
/// counts through the ego sum.
pub fn implied_stats(sample: &EgoSample, model: &ModelSpec) -> Result<ImpliedStats> {
    model.validate()?;
    let terms = model
        .terms
        .iter()
        .map(|kind| EgoTerm::resolve(kind, &sample.decls))
        .collect::<Result<Vec<_>>>()?;
    let weights = sample.normalized_weights();
    let mut targets = vec![0.0; terms.len()];
    for (record, &w) in sample.records.iter().zip(&weights) {
        for (slot, term) in targets.iter_mut().zip(&terms) {
            if term.is_actor_stat() {
                *slot += w * term.actor_value(record);
            } else {
                let mut inner = 0.0;
                for alter in &record.alters {
                    inner += term.pair_value(&record.attrs, alter);
                }
                *slot += 0.5 * w * inner;
            }
        }
    }
    Ok(ImpliedStats {
        n: sample.records.len(),
        terms: model.term_labels(),
        targets: StatVector(targets),
        composition: sample.composition(),
    })
}

/// Draw `m` egos independently with probability proportional to weight;
/// resampled records keep their alters and carry weight one.
pub fn bootstrap_resample(sample: &EgoSample, m: usize, seed: u64) -> Result<EgoSample> {
    if m == 0 {
        return Err(Error::ModelMismatch("resample size must be positive".into()));
    }
    let weights: Vec<f64> = sample.records.iter().map(|r| r.weight).collect();
    let index = WeightedIndex::new(&weights)
        .map_err(|e| Error::ModelMismatch(format!("bad weights: {e}")))?;
    let mut rng = Pcg64::seed_from_u64(seed);
    let records = (0..m)
        .map(|_| {
            let source = &sample.records[index.sample(&mut rng)];
            EgoRecord {
                attrs: source.attrs.clone(),
                weight: 1.0,
                alters: source.alters.clone(),
            }
        })
        .collect();
    EgoSample::new(sample.decls.clone(), records)
}

// ---------------------------------------------------------------------------
// Survey files
// ---------------------------------------------------------------------------

/// Schema for survey ingestion: attribute declarations plus declarative
/// cleaning rules. `recode` merges raw labels into declared levels before
/// validation; `alter_min`/`alter_max` drop out-of-range alters while
/// keeping the ego that named them. Egos with missing or invalid values
/// anywhere in their record (own attributes or any alter's) are dropped
/// whole, alters included.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurveySchema {
    pub attributes: Vec<SurveyAttr>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurveyAttr {
    Categorical {
        name: String,
        levels: Vec<String>,
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        recode: BTreeMap<String, String>,
    },
    Numeric {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alter_min: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alter_max: Option<f64>,
    },
}

impl SurveyAttr {
    fn name(&self) -> &str {
        match self {
            SurveyAttr::Categorical { name, .. } => name,
            SurveyAttr::Numeric { name, .. } => name,
        }
    }

    fn decl(&self) -> AttrDecl {
        match self {
            SurveyAttr::Categorical { name, levels, .. } => AttrDecl::Categorical {
                name: name.clone(),
                levels: levels.clone(),
            },
            SurveyAttr::Numeric { name, .. } => AttrDecl::Numeric { name: name.clone() },
        }
    }
}

impl SurveySchema {
    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn decls(&self) -> Vec<AttrDecl> {
        self.attributes.iter().map(|a| a.decl()).collect()
    }
}

/// Counts from one survey ingestion pass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub egos_read: usize,
    pub egos_dropped: usize,
    pub alters_dropped: usize,
}

enum ParsedValue {
    Ok(AttrValue),
    Missing,
    Filtered,
}

fn parse_value(attr: &SurveyAttr, raw: &str, is_alter: bool) -> ParsedValue {
    let raw = raw.trim();
    if raw.is_empty() {
        return ParsedValue::Missing;
    }
    match attr {
        SurveyAttr::Categorical { levels, recode, .. } => {
            let label = recode.get(raw).map(String::as_str).unwrap_or(raw);
            match levels.iter().position(|l| l == label) {
                Some(code) => ParsedValue::Ok(AttrValue::Cat(code as u16)),
                None => ParsedValue::Missing,
            }
        }
        SurveyAttr::Numeric {
            alter_min,
            alter_max,
            ..
        } => match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => {
                if is_alter {
                    if let Some(lo) = alter_min {
                        if v < *lo {
                            return ParsedValue::Filtered;
                        }
                    }
                    if let Some(hi) = alter_max {
                        if v > *hi {
                            return ParsedValue::Filtered;
                        }
                    }
                }
                ParsedValue::Ok(AttrValue::Num(v))
            }
            _ => ParsedValue::Missing,
        },
    }
}

/// Read a survey CSV: one row per (ego, alter) pair plus one row per
/// alter-less ego, columns `ego_id, weight, ego_<attr>..., alter_index,
/// alter_<attr>...` with `alter_index` empty on alter-less rows.
pub fn read_survey_csv<P: AsRef<Path>>(
    path: P,
    schema: &SurveySchema,
) -> Result<(EgoSample, IngestReport)> {
    let file = std::fs::File::open(path)?;
    let mut reader = csv::Reader::from_reader(std::io::BufReader::new(file));
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("survey file missing column {name}")))
    };
    let id_col = col("ego_id")?;
    let weight_col = col("weight")?;
    let ego_cols: Vec<usize> = schema
        .attributes
        .iter()
        .map(|a| col(&format!("ego_{}", a.name())))
        .collect::<Result<_>>()?;
    let alter_index_col = col("alter_index")?;
    let alter_cols: Vec<usize> = schema
        .attributes
        .iter()
        .map(|a| col(&format!("alter_{}", a.name())))
        .collect::<Result<_>>()?;

    // Accumulate per ego in order of first appearance.
    struct Partial {
        weight: f64,
        attrs: Option<Vec<AttrValue>>,
        alters: Vec<Vec<AttrValue>>,
        invalid: bool,
        alters_filtered: usize,
    }
    let mut order: Vec<String> = Vec::new();
    let mut by_id: BTreeMap<String, Partial> = BTreeMap::new();

    for record in reader.records() {
        let record = record?;
        let id = record.get(id_col).unwrap_or("").trim().to_string();
        if id.is_empty() {
            return Err(Error::Parse("row with empty ego_id".into()));
        }
        let entry = by_id.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            Partial {
                weight: 1.0,
                attrs: None,
                alters: Vec::new(),
                invalid: false,
                alters_filtered: 0,
            }
        });
        if entry.attrs.is_none() && !entry.invalid {
            match record
                .get(weight_col)
                .unwrap_or("")
                .trim()
                .parse::<f64>()
            {
                Ok(w) if w > 0.0 => entry.weight = w,
                _ => entry.invalid = true,
            }
            let mut attrs = Vec::with_capacity(schema.attributes.len());
            for (attr, &c) in schema.attributes.iter().zip(&ego_cols) {
                match parse_value(attr, record.get(c).unwrap_or(""), false) {
                    ParsedValue::Ok(v) => attrs.push(v),
                    _ => {
                        entry.invalid = true;
                        break;
                    }
                }
            }
            if !entry.invalid {
                entry.attrs = Some(attrs);
            }
        }
        let has_alter = !record.get(alter_index_col).unwrap_or("").trim().is_empty();
        if has_alter {
            let mut alter = Vec::with_capacity(schema.attributes.len());
            let mut filtered = false;
            for (attr, &c) in schema.attributes.iter().zip(&alter_cols) {
                match parse_value(attr, record.get(c).unwrap_or(""), true) {
                    ParsedValue::Ok(v) => alter.push(v),
                    ParsedValue::Filtered => {
                        filtered = true;
                        break;
                    }
                    ParsedValue::Missing => {
                        entry.invalid = true;
                        break;
                    }
                }
            }
            if filtered {
                entry.alters_filtered += 1;
            } else if !entry.invalid {
                entry.alters.push(alter);
            }
        }
    }

    let mut report = IngestReport {
        egos_read: order.len(),
        ..Default::default()
    };
    let mut records = Vec::new();
    for id in &order {
        let partial = by_id.remove(id).unwrap();
        if partial.invalid || partial.attrs.is_none() {
            report.egos_dropped += 1;
            continue;
        }
        report.alters_dropped += partial.alters_filtered;
        records.push(EgoRecord {
            attrs: partial.attrs.unwrap(),
            weight: partial.weight,
            alters: partial.alters,
        });
    }
    if records.is_empty() {
        return Err(Error::Parse("survey produced no usable egos".into()));
    }
    let sample = EgoSample::new(schema.decls(), records)?;
    Ok((sample, report))
}

/// Write the survey CSV form of a sample (ego ids are record indices).
pub fn write_survey_csv<W: Write>(sample: &EgoSample, mut w: W) -> Result<()> {
    let mut header = vec!["ego_id".to_string(), "weight".to_string()];
    for d in sample.decls() {
        header.push(format!("ego_{}", d.name()));
    }
    header.push("alter_index".to_string());
    for d in sample.decls() {
        header.push(format!("alter_{}", d.name()));
    }
    writeln!(w, "{}", header.join(","))?;
    let fmt_value = |value: &AttrValue, decl: &AttrDecl| -> String {
        match (value, decl) {
            (AttrValue::Cat(c), AttrDecl::Categorical { levels, .. }) => {
                levels[*c as usize].clone()
            }
            (AttrValue::Num(v), _) => {
                if v.fract() == 0.0 && v.abs() < 1e15 {
                    format!("{}", *v as i64)
                } else {
                    format!("{v}")
                }
            }
            _ => unreachable!("validated on construction"),
        }
    };
    for (idx, record) in sample.records().iter().enumerate() {
        let ego_part: Vec<String> = record
            .attrs
            .iter()
            .zip(sample.decls())
            .map(|(v, d)| fmt_value(v, d))
            .collect();
        let blank = vec![String::new(); sample.decls().len()];
        if record.alters.is_empty() {
            writeln!(
                w,
                "{idx},{},{},,{}",
                record.weight,
                ego_part.join(","),
                blank.join(",")
            )?;
        } else {
            for (a_idx, alter) in record.alters.iter().enumerate() {
                let alter_part: Vec<String> = alter
                    .iter()
                    .zip(sample.decls())
                    .map(|(v, d)| fmt_value(v, d))
                    .collect();
                writeln!(
                    w,
                    "{idx},{},{},{},{}",
                    record.weight,
                    ego_part.join(","),
                    a_idx,
                    alter_part.join(",")
                )?;
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Synthetic populations
// ---------------------------------------------------------------------------

/// Recipe for a synthetic population: attribute composition, a generating
/// model, and per-actor statistic targets. Stands in for survey data that
/// cannot be redistributed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthSpec {
    pub attributes: Vec<SynthAttr>,
    pub terms: Vec<TermKind>,
    /// Desired value of each statistic divided by the number of actors.
    pub per_capita_targets: Vec<f64>,
    #[serde(default)]
    pub offset: OffsetSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthAttr {
    Categorical {
        name: String,
        levels: Vec<String>,
        proportions: Vec<f64>,
    },
    /// Integers drawn uniformly from [min,max], or from weighted inclusive
    /// bins when given.
    NumericInteger {
        name: String,
        min: i64,
        max: i64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        bins: Vec<SynthBin>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthBin {
    pub lo: i64,
    pub hi: i64,
    pub weight: f64,
}

impl SynthSpec {
    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let spec: SynthSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.per_capita_targets.len() != self.terms.len() {
            return Err(Error::ModelMismatch(format!(
                "{} targets for {} terms",
                self.per_capita_targets.len(),
                self.terms.len()
            )));
        }
        for attr in &self.attributes {
            match attr {
                SynthAttr::Categorical {
                    name,
                    levels,
                    proportions,
                } => {
                    if levels.len() != proportions.len()
                        || proportions.iter().any(|&p| p < 0.0)
                        || (proportions.iter().sum::<f64>() - 1.0).abs() > 1e-6
                    {
                        return Err(Error::Infeasible(format!(
                            "bad proportions for attribute {name}"
                        )));
                    }
                }
                SynthAttr::NumericInteger { name, min, max, bins } => {
                    if min > max {
                        return Err(Error::Infeasible(format!("empty range for {name}")));
                    }
                    for bin in bins {
                        if bin.lo > bin.hi || bin.lo < *min || bin.hi > *max || bin.weight < 0.0 {
                            return Err(Error::Infeasible(format!("bad bin for {name}")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn model(&self) -> ModelSpec {
        ModelSpec {
            attributes: self
                .attributes
                .iter()
                .map(|a| match a {
                    SynthAttr::Categorical { name, levels, .. } => AttrDecl::Categorical {
                        name: name.clone(),
                        levels: levels.clone(),
                    },
                    SynthAttr::NumericInteger { name, .. } => {
                        AttrDecl::Numeric { name: name.clone() }
                    }
                })
                .collect(),
            terms: self.terms.clone(),
            theta: None,
            offset: self.offset,
        }
    }
}

/// Sample attribute values for `n` actors from the composition.
pub fn synth_attributes(spec: &SynthSpec, n: usize, seed: u64) -> Result<AttributeTable> {
    spec.validate()?;
    let mut rng = Pcg64::seed_from_u64(seed);
    let mut table = AttributeTable::new(n);
    for attr in &spec.attributes {
        match attr {
            SynthAttr::Categorical {
                name,
                levels,
                proportions,
            } => {
                let index = WeightedIndex::new(proportions)
                    .map_err(|e| Error::Infeasible(format!("{name}: {e}")))?;
                let codes = (0..n).map(|_| index.sample(&mut rng) as u16).collect();
                table.add_categorical(name, levels.clone(), codes)?;
            }
            SynthAttr::NumericInteger { name, min, max, bins } => {
                let values: Vec<f64> = if bins.is_empty() {
                    (0..n)
                        .map(|_| rng.random_range(*min..=*max) as f64)
                        .collect()
                } else {
                    let weights: Vec<f64> = bins.iter().map(|b| b.weight).collect();
                    let index = WeightedIndex::new(&weights)
                        .map_err(|e| Error::Infeasible(format!("{name}: {e}")))?;
                    (0..n)
                        .map(|_| {
                            let bin = &bins[index.sample(&mut rng)];
                            rng.random_range(bin.lo..=bin.hi) as f64
                        })
                        .collect()
                };
                table.add_numeric(name, values)?;
            }
        }
    }
    Ok(table)
}

/// Generate a synthetic population: sample attributes from the composition,
/// fit the generating model to the absolute targets (per-capita times n),
/// and draw one network from the fitted model. Fractional or mildly
/// inconsistent targets are fine (they are mean values); the returned fit
/// result reports how closely they were achieved.
pub fn synth_population(
    spec: &SynthSpec,
    n: usize,
    seed: u64,
) -> Result<(Network, AttributeTable, FitResult)> {
    let attrs = synth_attributes(spec, n, crate::derive_seed(seed, 1, 0))?;
    let model = spec.model();
    let targets: Vec<f64> = spec
        .per_capita_targets
        .iter()
        .map(|t| t * n as f64)
        .collect();
    let mut cfg = FitConfig::default();
    cfg.seed = crate::derive_seed(seed, 2, 0);
    cfg.method = if model.dyad_independent() {
        FitMethod::LogisticDyadIndependent
    } else {
        FitMethod::StochasticApproximation
    };
    let fit = fit_mean_value(&targets, &attrs, &model, &cfg)?;
    let mut fitted = model.clone();
    fitted.theta = Some(fit.theta_hat.clone());
    let compiled = fitted.compile(&attrs)?;
    let sampler_cfg = SamplerConfig {
        burn_in: None,
        interval: None,
        n_samples: 1,
        seed: crate::derive_seed(seed, 3, 0),
        initial: crate::sampler::InitialState::Empty,
    };
    let net = gibbs_sample(&compiled, &sampler_cfg)?.pop().expect("one sample");
    Ok((net, attrs, fit))
}
