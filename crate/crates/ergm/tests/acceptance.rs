//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line with the measured values (run with `-- --nocapture` to
//! see them on success). Criteria marked "statistical" use fixed seeds, so
//! outcomes are reproducible bit for bit.

mod common;

use ergm::asymptotics::{
    finite_n_degree_pmf, finite_n_mixing_degree, mixing_expected_degree, MixingSpec,
};
use ergm::ego::{implied_stats, synth_population, EgoRecord, EgoSample, SynthSpec};
use ergm::fit::{fit_mean_value, FitConfig, FitMethod};
use ergm::net::AttributeTable;
use ergm::sampler::{
    exact_distribution, gibbs_sample, gibbs_sample_stats, network_mask, GibbsChain, InitialState,
    SamplerConfig,
};
use ergm::study::{run_invariance_demo, run_scaling_study, InvarianceConfig, StudyConfig};
use ergm::terms::{
    change_stats, global_stats, ilogit, logit, ModelSpec, OffsetSpec, StatVector, TermKind,
};
use ergm::derive_seed;

use common::{
    all_kinds_model, load_model, random_network, random_partnership_attrs, seeded,
};

use statrs::distribution::{ChiSquared, ContinuousCDF};

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {criterion}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{criterion} failed: {detail}");
}

/// Criterion 1: the scaling-study report shows the fixed offsets -6.91,
/// -8.70, -9.31 at sizes 1000/6000/11000 (two decimals).
#[test]
fn c1_offset_values_in_study_report() {
    // A minimal base sample: twenty egos, one alter each, no attributes.
    let records = (0..20)
        .map(|_| EgoRecord {
            attrs: vec![],
            weight: 1.0,
            alters: vec![vec![]],
        })
        .collect();
    let base = EgoSample::new(vec![], records).unwrap();
    let cfg = StudyConfig {
        sizes: vec![1000, 6000, 11000],
        replicates: 1,
        model: ModelSpec {
            attributes: vec![],
            terms: vec![TermKind::EdgeCount],
            theta: None,
            offset: OffsetSpec::LogInverseN,
        },
        fit: FitConfig {
            method: FitMethod::LogisticDyadIndependent,
            ..FitConfig::default()
        },
        seed: 1,
    };
    let study = run_scaling_study(&cfg, &base).unwrap();
    let mut summary_csv = Vec::new();
    study.write_summary_csv(&mut summary_csv).unwrap();
    let summary_csv = String::from_utf8(summary_csv).unwrap();
    let offsets: Vec<String> = study
        .summaries
        .iter()
        .map(|s| format!("{:.2}", s.offset))
        .collect();
    let csv_ok = summary_csv.contains("offset,-6.91,fixed,-8.70,fixed,-9.31,fixed");
    let table = study.summary_table();
    let table_ok = table.contains("-6.91 (fixed)")
        && table.contains("-8.70 (fixed)")
        && table.contains("-9.31 (fixed)");
    report(
        "C1 offset column",
        offsets == ["-6.91", "-8.70", "-9.31"] && csv_ok && table_ok,
        &format!("offsets printed as {offsets:?}"),
    );
}

/// Criterion 2: edges-plus-offset at theta = log 2, n = 1000: the pooled
/// degree histogram over 200 networks matches the finite-n binomial pmf
/// (chi-square p > 0.01) and the mean degree lands within 2% of
/// 1000 * ilogit(-log 1000 + log 2).
#[test]
fn c2_poisson_limit_degree_distribution() {
    let n = 1000usize;
    let theta = 2.0f64.ln();
    let model = ModelSpec {
        attributes: vec![],
        terms: vec![TermKind::EdgeCount],
        theta: Some(vec![theta]),
        offset: OffsetSpec::LogInverseN,
    }
    .compile(&AttributeTable::new(n))
    .unwrap();
    let nets = gibbs_sample(&model, &SamplerConfig::new(200, 2026)).unwrap();
    let mut counts = vec![0u64; n];
    let mut degree_total = 0u64;
    for net in &nets {
        for i in 0..n {
            let d = net.degree(i);
            counts[d] += 1;
            degree_total += d as u64;
        }
    }
    let observations = (200 * n) as f64;

    // Pool the tail so every expected cell count is at least 5.
    let mut observed = Vec::new();
    let mut expected = Vec::new();
    let mut tail_obs = 0.0;
    let mut tail_exp = observations;
    let mut d = 0usize;
    loop {
        let e = observations * finite_n_degree_pmf(theta, n, d);
        if e < 5.0 || d + 1 == n {
            break;
        }
        observed.push(counts[d] as f64);
        expected.push(e);
        tail_exp -= e;
        d += 1;
    }
    for dd in d..n {
        tail_obs += counts[dd] as f64;
    }
    observed.push(tail_obs);
    expected.push(tail_exp);

    let chi2: f64 = observed
        .iter()
        .zip(&expected)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum();
    let df = (observed.len() - 1) as f64;
    let p_value = 1.0 - ChiSquared::new(df).unwrap().cdf(chi2);

    let mean_degree = degree_total as f64 / 200.0 / n as f64;
    let reference = n as f64 * ilogit(-(n as f64).ln() + theta);
    let rel_err = (mean_degree - reference).abs() / reference;

    report(
        "C2 degree distribution",
        p_value > 0.01 && rel_err < 0.02,
        &format!(
            "chi-square {chi2:.1} on {df} df, p = {p_value:.3}; mean degree {mean_degree:.4} vs {reference:.4} ({:.2}%)",
            100.0 * rel_err
        ),
    );
}

/// Criterion 3: at fixed coefficients and no offset, density is flat across
/// sizes while mean degree doubles from n=50 to n=100; with the offset,
/// mean degrees at n=100 and n=1000 agree within Monte Carlo error.
#[test]
fn c3_density_preservation_and_offset() {
    let flat = InvarianceConfig {
        model: ModelSpec {
            attributes: vec![],
            terms: vec![TermKind::EdgeCount],
            theta: Some(vec![logit(0.1)]),
            offset: OffsetSpec::None,
        },
        sizes: vec![50, 100],
        networks_per_size: 30,
        seed: 33,
        burn_in: None,
        interval: None,
    };
    let rows = run_invariance_demo(&flat).unwrap();
    let (a, b) = (&rows[0], &rows[1]);
    let density_gap = (a.density_mean - b.density_mean).abs();
    let density_bound = 3.0 * (a.density_se.powi(2) + b.density_se.powi(2)).sqrt();
    let degree_ratio = b.mean_degree_mean / a.mean_degree_mean;

    let offset = InvarianceConfig {
        model: ModelSpec {
            attributes: vec![],
            terms: vec![TermKind::EdgeCount],
            theta: Some(vec![2.0f64.ln()]),
            offset: OffsetSpec::LogInverseN,
        },
        sizes: vec![100, 1000],
        networks_per_size: 30,
        seed: 34,
        burn_in: None,
        interval: None,
    };
    let orows = run_invariance_demo(&offset).unwrap();
    let (oa, ob) = (&orows[0], &orows[1]);
    let degree_gap = (oa.mean_degree_mean - ob.mean_degree_mean).abs();
    let degree_bound = 3.0 * (oa.mean_degree_se.powi(2) + ob.mean_degree_se.powi(2)).sqrt();

    report(
        "C3 density preservation",
        density_gap < density_bound && (1.8..=2.2).contains(&degree_ratio) && degree_gap < degree_bound,
        &format!(
            "no offset: densities {:.4}/{:.4} (gap {:.5} < {:.5}), degree ratio {:.3}; \
             offset: mean degrees {:.3}/{:.3} (gap {:.4} < {:.4})",
            a.density_mean,
            b.density_mean,
            density_gap,
            density_bound,
            degree_ratio,
            oa.mean_degree_mean,
            ob.mean_degree_mean,
            degree_gap,
            degree_bound
        ),
    );
}

/// Criterion 4: five four-node fixtures, mixing dyad-independent and
/// degree terms with and without the offset: the empirical distribution of
/// a million-step chain stays within total-variation 0.02 of exhaustive
/// enumeration.
#[test]
fn c4_gibbs_matches_exact_distribution() {
    let sexes = {
        let mut attrs = AttributeTable::new(4);
        attrs
            .add_categorical("sex", vec!["F".into(), "M".into()], vec![0, 0, 1, 1])
            .unwrap();
        attrs
    };
    let none = AttributeTable::new(4);
    let deg1 = |d| TermKind::DegreeCount {
        degree: d,
        attr: None,
        level: None,
    };
    let fixtures: Vec<(&str, ModelSpec, &AttributeTable)> = vec![
        (
            "edges",
            ModelSpec {
                attributes: vec![],
                terms: vec![TermKind::EdgeCount],
                theta: Some(vec![0.2]),
                offset: OffsetSpec::None,
            },
            &none,
        ),
        (
            "edges+degree1",
            ModelSpec {
                attributes: vec![],
                terms: vec![TermKind::EdgeCount, deg1(1)],
                theta: Some(vec![-0.5, 0.8]),
                offset: OffsetSpec::None,
            },
            &none,
        ),
        (
            "edges+degree1 offset",
            ModelSpec {
                attributes: vec![],
                terms: vec![TermKind::EdgeCount, deg1(1)],
                theta: Some(vec![0.5, 0.7]),
                offset: OffsetSpec::LogInverseN,
            },
            &none,
        ),
        (
            "sex mixing",
            ModelSpec {
                attributes: sexes.decls(),
                terms: vec![
                    TermKind::SameCategoryTies { attr: "sex".into() },
                    TermKind::ActivityByCategory {
                        attr: "sex".into(),
                        level: "F".into(),
                    },
                ],
                theta: Some(vec![0.6, -0.3]),
                offset: OffsetSpec::None,
            },
            &sexes,
        ),
        (
            "edges+isolates offset",
            ModelSpec {
                attributes: vec![],
                terms: vec![TermKind::EdgeCount, deg1(0)],
                theta: Some(vec![0.3, 0.5]),
                offset: OffsetSpec::LogInverseN,
            },
            &none,
        ),
    ];
    let mut details = Vec::new();
    let mut all_ok = true;
    for (idx, (name, spec, attrs)) in fixtures.iter().enumerate() {
        let model = spec.compile(attrs).unwrap();
        let dist = exact_distribution(&model, None).unwrap();
        let mut chain = GibbsChain::new(&model, &InitialState::Empty, 500 + idx as u64).unwrap();
        chain.run(10_000);
        let steps = 1_000_000u64;
        let mut hits = vec![0u64; 64];
        for _ in 0..steps {
            chain.step();
            hits[network_mask(chain.network()) as usize] += 1;
        }
        let tv: f64 = hits
            .iter()
            .zip(&dist.probs)
            .map(|(&h, &p)| (h as f64 / steps as f64 - p).abs())
            .sum::<f64>()
            / 2.0;
        if tv >= 0.02 {
            all_ok = false;
        }
        details.push(format!("{name}: TV {tv:.4}"));
    }
    report("C4 chain correctness", all_ok, &details.join(", "));
}

/// Criterion 5: for 200 random networks the implied statistics of their
/// egocentric census equal the direct network statistics exactly
/// (1e-12 relative), across the full partnership term set.
#[test]
fn c5_census_identity() {
    let model = load_model("data/models/partnership_full.json");
    let mut rng = seeded(55);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = 20 + (rng_usize(&mut rng, 181));
        let p = 0.005 + 0.045 * rng_f64(&mut rng);
        let attrs = random_partnership_attrs(n, &mut rng);
        let net = random_network(n, p, &mut rng);
        let census = EgoSample::census(&net, &attrs).unwrap();
        let implied = implied_stats(&census, &model).unwrap();
        let compiled = model.compile(&attrs).unwrap();
        let direct = global_stats(&net, &compiled).unwrap();
        for (a, b) in implied.targets.as_slice().iter().zip(direct.as_slice()) {
            let rel = (a - b).abs() / b.abs().max(1.0);
            worst = worst.max(rel);
        }
    }
    report(
        "C5 census identity",
        worst <= 1e-12,
        &format!("worst relative deviation {worst:.2e} over 200 networks x 19 terms"),
    );
}

fn rng_usize(rng: &mut rand_pcg::Pcg64, bound: usize) -> usize {
    use rand::RngExt;
    rng.random_range(0..bound)
}

fn rng_f64(rng: &mut rand_pcg::Pcg64) -> f64 {
    use rand::RngExt;
    rng.random::<f64>()
}

/// Criterion 6: simulate at known coefficients (edges, same-sex, degree-1;
/// n = 300, offset on), fit to the simulated mean statistics, and recover
/// the truth within 3 reported Monte Carlo standard errors in at least 18
/// of 20 seeded repeats.
#[test]
fn c6_fit_round_trip() {
    let n = 300usize;
    let theta_star = vec![0.8, 0.4, 0.7];
    let mut attrs = AttributeTable::new(n);
    let mut rng = seeded(66);
    attrs
        .add_categorical(
            "sex",
            vec!["F".into(), "M".into()],
            (0..n).map(|_| rng_usize(&mut rng, 2) as u16).collect(),
        )
        .unwrap();
    let model = ModelSpec {
        attributes: attrs.decls(),
        terms: vec![
            TermKind::EdgeCount,
            TermKind::SameCategoryTies { attr: "sex".into() },
            TermKind::DegreeCount {
                degree: 1,
                attr: None,
                level: None,
            },
        ],
        theta: None,
        offset: OffsetSpec::LogInverseN,
    };
    let mut generator = model.clone();
    generator.theta = Some(theta_star.clone());

    // One long simulation pins down the mean statistics at the true
    // coefficients; the repeats below vary only the fit's random stream.
    let compiled = generator.compile(&attrs).unwrap();
    let sim_cfg = SamplerConfig::new(20_000, derive_seed(606, 0, 0));
    let samples = gibbs_sample_stats(&compiled, &sim_cfg).unwrap();
    let p = theta_star.len();
    let mut targets = vec![0.0; p];
    for s in &samples {
        for k in 0..p {
            targets[k] += s[k];
        }
    }
    for t in &mut targets {
        *t /= samples.len() as f64;
    }

    let repeats = 20;
    let mut successes = 0;
    let mut lines = Vec::new();
    for r in 0..repeats {
        let fit_cfg = FitConfig {
            seed: derive_seed(606, r, 1),
            ..FitConfig::default()
        };
        let fit = fit_mean_value(&targets, &attrs, &model, &fit_cfg).unwrap();
        let ok = fit.converged
            && (0..p).all(|k| {
                (fit.theta_hat[k] - theta_star[k]).abs() < 3.0 * fit.mc_standard_errors[k]
            });
        if ok {
            successes += 1;
        } else {
            let errs: Vec<String> = (0..p)
                .map(|k| {
                    format!(
                        "{:+.3}/{:.3}",
                        fit.theta_hat[k] - theta_star[k],
                        fit.mc_standard_errors[k]
                    )
                })
                .collect();
            lines.push(format!("repeat {r}: off by {errs:?} converged={}", fit.converged));
        }
    }
    report(
        "C6 fit round trip",
        successes >= 18,
        &format!("{successes}/{repeats} repeats within 3 MC SEs; {}", lines.join("; ")),
    );
}

/// Criterion 7: size invariance of the estimates. Bootstrap the synthetic
/// population's census to sizes 300/600/1200 (30 replicates each) and fit;
/// for every coefficient the mean shift between adjacent sizes stays below
/// one bootstrap standard deviation at the larger size.
#[test]
fn c7_scaling_study_size_invariance() {
    let spec_path = common::data_path("data/synth/partnership_population.json");
    let spec = SynthSpec::load(spec_path).unwrap();
    let (net, attrs, gen_fit) = synth_population(&spec, 1000, 4242).unwrap();
    assert!(
        gen_fit.converged,
        "synthetic population generator fit did not converge"
    );
    let base = EgoSample::census(&net, &attrs).unwrap();
    let cfg = StudyConfig {
        sizes: vec![300, 600, 1200],
        replicates: 30,
        model: spec.model(),
        fit: FitConfig::default(),
        seed: 777,
    };
    let study = run_scaling_study(&cfg, &base).unwrap();

    let mut all_ok = true;
    let mut lines = Vec::new();
    for s in &study.summaries {
        lines.push(format!(
            "size {}: {}/{} converged",
            s.size,
            s.replicates_ok,
            s.replicates_ok + s.replicates_failed
        ));
        if s.warning {
            all_ok = false;
            lines.push(format!("size {} exceeded the failure budget", s.size));
        }
    }
    for pair in study.summaries.windows(2) {
        let (small, large) = (&pair[0], &pair[1]);
        for (k, label) in study.term_labels.iter().enumerate() {
            let shift = (large.means[k] - small.means[k]).abs();
            let sd = large.sds[k];
            if !(shift < sd) {
                all_ok = false;
                lines.push(format!(
                    "{label}: |{:.3} - {:.3}| = {:.3} !< sd {:.3} ({} to {})",
                    small.means[k], large.means[k], shift, sd, small.size, large.size
                ));
            }
        }
    }
    report("C7 size invariance", all_ok, &lines.join("; "));
}

/// Criterion 8: two-group mixing at n = 2000: simulated group mean degrees
/// match the exact finite-n expectation within 3 Monte Carlo standard
/// errors and the limiting expression within 5%.
#[test]
fn c8_mixing_asymptotics() {
    let n = 2000usize;
    let sizes = [1000usize, 1000];
    let eta = [[0.8, -0.4], [-0.4, 0.5]];
    let mut attrs = AttributeTable::new(n);
    let codes: Vec<u16> = (0..n).map(|i| (i >= sizes[0]) as u16).collect();
    attrs
        .add_categorical("grp", vec!["A".into(), "B".into()], codes.clone())
        .unwrap();
    let model = ModelSpec {
        attributes: attrs.decls(),
        terms: vec![
            TermKind::WithinCategoryTies {
                attr: "grp".into(),
                level: "A".into(),
            },
            TermKind::WithinCategoryTies {
                attr: "grp".into(),
                level: "B".into(),
            },
            TermKind::BetweenCategoryTies {
                attr: "grp".into(),
                level1: "A".into(),
                level2: "B".into(),
            },
        ],
        theta: Some(vec![eta[0][0], eta[1][1], eta[0][1]]),
        offset: OffsetSpec::LogInverseN,
    }
    .compile(&attrs)
    .unwrap();
    let nets = gibbs_sample(&model, &SamplerConfig::new(60, 88)).unwrap();

    let spec = MixingSpec::new(vec![0.5, 0.5], vec![eta[0].to_vec(), eta[1].to_vec()]).unwrap();
    let mut all_ok = true;
    let mut details = Vec::new();
    for group in 0..2 {
        let members: Vec<usize> = (0..n).filter(|&i| codes[i] as usize == group).collect();
        let per_net: Vec<f64> = nets
            .iter()
            .map(|net| {
                members.iter().map(|&i| net.degree(i) as f64).sum::<f64>() / members.len() as f64
            })
            .collect();
        let mean = per_net.iter().sum::<f64>() / per_net.len() as f64;
        let var = per_net.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
            / (per_net.len() as f64 - 1.0);
        let se = (var / per_net.len() as f64).sqrt();
        let finite = finite_n_mixing_degree(&spec, &sizes, group);
        let limit = mixing_expected_degree(&spec, group);
        let finite_ok = (mean - finite).abs() < 3.0 * se;
        let limit_ok = (mean - limit).abs() / limit < 0.05;
        if !(finite_ok && limit_ok) {
            all_ok = false;
        }
        details.push(format!(
            "group {group}: simulated {mean:.4} (se {se:.4}), finite {finite:.4}, limit {limit:.4}"
        ));
    }
    report("C8 mixing asymptotics", all_ok, &details.join("; "));
}

/// Criterion 9: ten thousand random (network, dyad, term) triples: the
/// incremental change statistic equals the full-recompute difference —
/// exactly for count statistics, to 1e-12 relative for the real-valued
/// age statistics.
#[test]
fn c9_change_statistic_suite() {
    let spec = all_kinds_model();
    let mut rng = seeded(99);
    let mut triples = 0usize;
    let mut worst: f64 = 0.0;
    while triples < 10_000 {
        let n = 5 + rng_usize(&mut rng, 26);
        let p = 0.05 + 0.4 * rng_f64(&mut rng);
        let attrs = random_partnership_attrs(n, &mut rng);
        let mut net = random_network(n, p, &mut rng);
        let model = spec.compile(&attrs).unwrap();
        let i = rng_usize(&mut rng, n);
        let mut j = rng_usize(&mut rng, n - 1);
        if j >= i {
            j += 1;
        }
        let delta = change_stats(&net, &model, i, j).unwrap();
        // Full-recompute difference: statistics with the dyad on minus off.
        net.set_edge(i, j, true).unwrap();
        let on = global_stats(&net, &model).unwrap();
        net.set_edge(i, j, false).unwrap();
        let off = global_stats(&net, &model).unwrap();
        for (k, kind) in spec.terms.iter().enumerate() {
            let recompute = on[k] - off[k];
            let is_exact = !matches!(
                kind,
                TermKind::NumericActivity { .. } | TermKind::NumericDifference { .. }
            );
            if is_exact {
                assert_eq!(
                    delta[k], recompute,
                    "term {k} ({kind:?}) at dyad ({i},{j})"
                );
            } else {
                let rel = (delta[k] - recompute).abs() / recompute.abs().max(1.0);
                worst = worst.max(rel);
                assert!(
                    rel <= 1e-12,
                    "term {k} ({kind:?}): {} vs {recompute}",
                    delta[k]
                );
            }
            triples += 1;
        }
    }
    report(
        "C9 change statistics",
        true,
        &format!("{triples} triples checked; worst float deviation {worst:.2e}"),
    );
}

/// The conditional tie log-odds equal the exact enumeration's probability
/// ratio (supporting check for the chain's full conditionals).
#[test]
fn conditional_log_odds_match_enumeration() {
    let mut attrs = AttributeTable::new(4);
    attrs
        .add_categorical("sex", vec!["F".into(), "M".into()], vec![0, 1, 0, 1])
        .unwrap();
    let model = ModelSpec {
        attributes: attrs.decls(),
        terms: vec![
            TermKind::EdgeCount,
            TermKind::SameCategoryTies { attr: "sex".into() },
            TermKind::DegreeCount {
                degree: 1,
                attr: None,
                level: None,
            },
        ],
        theta: Some(vec![0.4, -0.6, 0.9]),
        offset: OffsetSpec::LogInverseN,
    }
    .compile(&attrs)
    .unwrap();
    let dist = exact_distribution(&model, None).unwrap();
    let mut rng = seeded(123);
    for _ in 0..50 {
        let net = random_network(4, 0.5, &mut rng);
        let i = rng_usize(&mut rng, 4);
        let mut j = rng_usize(&mut rng, 3);
        if j >= i {
            j += 1;
        }
        let lo = ergm::terms::conditional_tie_log_odds(&net, &model, i, j).unwrap();
        let exact = dist.tie_log_odds(&net, i, j);
        assert!((lo - exact).abs() < 1e-10, "{lo} vs {exact}");
    }
}

/// Expected statistics under enumeration agree with a long chain's Monte
/// Carlo mean (self-consistency of the two routes).
#[test]
fn expected_stats_match_chain_mean() {
    let model = ModelSpec {
        attributes: vec![],
        terms: vec![
            TermKind::EdgeCount,
            TermKind::DegreeCount {
                degree: 1,
                attr: None,
                level: None,
            },
        ],
        theta: Some(vec![0.3, 0.5]),
        offset: OffsetSpec::LogInverseN,
    }
    .compile(&AttributeTable::new(5))
    .unwrap();
    let dist = exact_distribution(&model, None).unwrap();
    let exact: StatVector = ergm::sampler::expected_stats(&dist, &model).unwrap();
    let samples = gibbs_sample_stats(&model, &SamplerConfig::new(4000, 17)).unwrap();
    let p = 2;
    let mut mean = vec![0.0; p];
    for s in &samples {
        for k in 0..p {
            mean[k] += s[k];
        }
    }
    for m in &mut mean {
        *m /= samples.len() as f64;
    }
    for k in 0..p {
        let sd = {
            let var = samples
                .iter()
                .map(|s| (s[k] - mean[k]).powi(2))
                .sum::<f64>()
                / (samples.len() as f64 - 1.0);
            (var / samples.len() as f64).sqrt()
        };
        assert!(
            (mean[k] - exact[k]).abs() < 3.0 * sd.max(1e-3),
            "term {k}: {} vs exact {}",
            mean[k],
            exact[k]
        );
    }
}
