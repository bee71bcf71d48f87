//! Shared fixtures for the integration suites: seeded random networks,
//! attribute tables, and the partnership model files shipped in data/.

use std::path::PathBuf;

use rand::RngExt;
use rand::SeedableRng;
use rand_pcg::Pcg64;

use ergm::net::{AttributeTable, Network};
use ergm::terms::ModelSpec;

pub fn data_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

pub fn load_model(rel: &str) -> ModelSpec {
    ModelSpec::load(data_path(rel)).expect("model file parses")
}

/// Bernoulli network with tie probability `p`.
pub fn random_network(n: usize, p: f64, rng: &mut Pcg64) -> Network {
    let mut net = Network::empty(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                net.set_edge(i, j, true).unwrap();
            }
        }
    }
    net
}

/// Random sex/race/age attributes matching the partnership models.
pub fn random_partnership_attrs(n: usize, rng: &mut Pcg64) -> AttributeTable {
    let mut attrs = AttributeTable::new(n);
    attrs
        .add_categorical(
            "sex",
            vec!["F".into(), "M".into()],
            (0..n).map(|_| rng.random_range(0..2) as u16).collect(),
        )
        .unwrap();
    attrs
        .add_categorical(
            "race",
            vec![
                "Black".into(),
                "Hispanic".into(),
                "Other".into(),
                "White".into(),
            ],
            (0..n).map(|_| rng.random_range(0..4) as u16).collect(),
        )
        .unwrap();
    attrs
        .add_numeric(
            "age",
            (0..n).map(|_| rng.random_range(18..=59) as f64).collect(),
        )
        .unwrap();
    attrs
}

/// A model instance exercising every statistic kind, for change-statistic
/// and census sweeps.
pub fn all_kinds_model() -> ModelSpec {
    use ergm::terms::{OffsetSpec, TermKind, Transform};
    ModelSpec {
        attributes: vec![],
        terms: vec![
            TermKind::EdgeCount,
            TermKind::ActivityByCategory {
                attr: "sex".into(),
                level: "F".into(),
            },
            TermKind::WithinCategoryTies {
                attr: "race".into(),
                level: "White".into(),
            },
            TermKind::BetweenCategoryTies {
                attr: "race".into(),
                level1: "Black".into(),
                level2: "Hispanic".into(),
            },
            TermKind::SameCategoryTies { attr: "sex".into() },
            TermKind::DegreeCount {
                degree: 0,
                attr: None,
                level: None,
            },
            TermKind::DegreeCount {
                degree: 1,
                attr: Some("sex".into()),
                level: Some("M".into()),
            },
            TermKind::DegreeCount {
                degree: 2,
                attr: None,
                level: None,
            },
            TermKind::NumericActivity {
                attr: "age".into(),
                transform: Transform::SqrtCenteredUnit {
                    min: 18.0,
                    max: 60.0,
                },
            },
            TermKind::NumericDifference {
                attr: "age".into(),
                transform: Transform::CenteredUnit {
                    min: 18.0,
                    max: 60.0,
                },
                power: 1,
            },
            TermKind::NumericDifference {
                attr: "age".into(),
                transform: Transform::SqrtCenteredUnit {
                    min: 18.0,
                    max: 60.0,
                },
                power: 2,
            },
            TermKind::OrderedAsymmetry {
                cat_attr: "sex".into(),
                older_level: "M".into(),
                younger_level: "F".into(),
                numeric_attr: "age".into(),
            },
        ],
        theta: None,
        offset: OffsetSpec::None,
    }
}

pub fn seeded(seed: u64) -> Pcg64 {
    Pcg64::seed_from_u64(seed)
}
