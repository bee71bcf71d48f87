//! Drawing networks from the model: a naive Gibbs sampler plus an
//! exhaustive-enumeration reference for tiny networks.
//!
//! Each Gibbs step picks a dyad uniformly at random and redraws its state
//! from the full conditional: a tie with probability
//! `ilogit(offset + theta . change_stats)`, no tie otherwise. The chain
//! carries the current statistic vector along incrementally (add the change
//! vector when a dyad switches on, subtract when it switches off) and
//! re-derives it from scratch every `DRIFT_CHECK_INTERVAL` steps as a guard.
//!
//! All randomness comes from a seeded PCG-64 generator (PCG XSL RR 128/64),
//! so runs are reproducible across platforms given the same seed.

use rand::RngExt;
use rand::SeedableRng;
use rand_pcg::Pcg64;

use crate::error::{Error, Result};
use crate::net::Network;
use crate::terms::{change_stats_into, global_stats, ilogit, CompiledModel, StatVector};

/// Steps between full recomputations of the running statistic vector.
const DRIFT_CHECK_INTERVAL: u64 = 100_000;

/// Starting state for a chain.
#[derive(Clone, Debug)]
pub enum InitialState {
    Empty,
    /// Independent ties with the given probability.
    RandomBernoulli(f64),
    Given(Network),
}

/// Chain controls. `burn_in` defaults to 20 full expected sweeps
/// (20 x dyad count) and `interval` to one sweep; the reference algorithm
/// only asks for "enough" steps, so these are engineering defaults.
#[derive(Clone, Debug)]
pub struct SamplerConfig {
    pub burn_in: Option<u64>,
    pub interval: Option<u64>,
    pub n_samples: usize,
    pub seed: u64,
    pub initial: InitialState,
}

impl SamplerConfig {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        SamplerConfig {
            burn_in: None,
            interval: None,
            n_samples,
            seed,
            initial: InitialState::Empty,
        }
    }

    pub fn resolved_burn_in(&self, dyads: usize) -> u64 {
        self.burn_in.unwrap_or(20 * dyads as u64)
    }

    pub fn resolved_interval(&self, dyads: usize) -> u64 {
        self.interval.unwrap_or(dyads as u64).max(1)
    }

    fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::ModelMismatch("n_samples must be at least 1".into()));
        }
        if let InitialState::RandomBernoulli(p) = self.initial {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::ModelMismatch(format!(
                    "Bernoulli initial probability {p} outside [0,1]"
                )));
            }
        }
        Ok(())
    }
}

/// A running Gibbs chain over one network. Owns its copy of the model so a
/// fitter can adjust coefficients mid-chain without rebuilding state.
pub struct GibbsChain {
    model: CompiledModel,
    net: Network,
    stats: Vec<f64>,
    delta: Vec<f64>,
    rng: Pcg64,
    steps: u64,
}

impl GibbsChain {
    pub fn new(model: &CompiledModel, initial: &InitialState, seed: u64) -> Result<Self> {
        let n = model.n;
        if n < 2 {
            return Err(Error::DegenerateNetwork { n });
        }
        let mut rng = Pcg64::seed_from_u64(seed);
        let net = match initial {
            InitialState::Empty => Network::empty(n),
            InitialState::RandomBernoulli(p) => {
                let mut net = Network::empty(n);
                for i in 0..n {
                    for j in (i + 1)..n {
                        if rng.random::<f64>() < *p {
                            net.set_edge(i, j, true)?;
                        }
                    }
                }
                net
            }
            InitialState::Given(net) => {
                if net.n() != n {
                    return Err(Error::ModelMismatch(format!(
                        "initial network has {} nodes, model expects {n}",
                        net.n()
                    )));
                }
                net.clone()
            }
        };
        let stats = global_stats(&net, model)?.0;
        let n_terms = model.n_terms();
        Ok(GibbsChain {
            model: model.clone(),
            net,
            stats,
            delta: vec![0.0; n_terms],
            rng,
            steps: 0,
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn stats(&self) -> &[f64] {
        &self.stats
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps
    }

    pub fn model(&self) -> &CompiledModel {
        &self.model
    }

    /// Swap in new coefficients; the network state carries over.
    pub fn set_theta(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.model.n_terms() {
            return Err(Error::ModelMismatch(format!(
                "{} coefficients for {} terms",
                theta.len(),
                self.model.n_terms()
            )));
        }
        self.model.theta.copy_from_slice(theta);
        Ok(())
    }

    /// One full-conditional update of a uniformly chosen dyad.
    pub fn step(&mut self) {
        let n = self.net.n();
        let i = self.rng.random_range(0..n);
        let mut j = self.rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        change_stats_into(&self.net, &self.model, i, j, &mut self.delta);
        let mut lo = self.model.offset_value;
        for (theta, d) in self.model.theta.iter().zip(&self.delta) {
            lo += theta * d;
        }
        let tie = self.rng.random::<f64>() < ilogit(lo);
        let changed = self.net.set_edge(i, j, tie).expect("dyad is valid");
        if changed {
            if tie {
                for (s, d) in self.stats.iter_mut().zip(&self.delta) {
                    *s += d;
                }
            } else {
                for (s, d) in self.stats.iter_mut().zip(&self.delta) {
                    *s -= d;
                }
            }
        }
        self.steps += 1;
        if self.steps % DRIFT_CHECK_INTERVAL == 0 {
            self.resync_stats();
        }
    }

    pub fn run(&mut self, steps: u64) {
        for _ in 0..steps {
            self.step();
        }
    }

    /// Recompute the statistic vector from the network, assert the running
    /// copy has not drifted, and adopt the exact values.
    fn resync_stats(&mut self) {
        let exact = global_stats(&self.net, &self.model)
            .expect("chain state is valid")
            .0;
        for (k, (have, want)) in self.stats.iter().zip(&exact).enumerate() {
            let scale = want.abs().max(1.0);
            assert!(
                (have - want).abs() <= 1e-8 * scale,
                "incremental statistic {k} drifted: {have} vs exact {want}"
            );
        }
        self.stats = exact;
    }
}

/// Draw whole networks. Runs `burn_in` steps, then retains every
/// `interval`-th state until `n_samples` networks are collected.
pub fn gibbs_sample(model: &CompiledModel, cfg: &SamplerConfig) -> Result<Vec<Network>> {
    cfg.validate()?;
    let dyads = model.n * (model.n - 1) / 2;
    let mut chain = GibbsChain::new(model, &cfg.initial, cfg.seed)?;
    chain.run(cfg.resolved_burn_in(dyads));
    let interval = cfg.resolved_interval(dyads);
    let mut out = Vec::with_capacity(cfg.n_samples);
    for _ in 0..cfg.n_samples {
        chain.run(interval);
        out.push(chain.network().clone());
    }
    Ok(out)
}

/// Stats-only sampling: identical chain, but only the statistic vectors are
/// retained.
pub fn gibbs_sample_stats(model: &CompiledModel, cfg: &SamplerConfig) -> Result<Vec<StatVector>> {
    cfg.validate()?;
    let dyads = model.n * (model.n - 1) / 2;
    let mut chain = GibbsChain::new(model, &cfg.initial, cfg.seed)?;
    chain.run(cfg.resolved_burn_in(dyads));
    let interval = cfg.resolved_interval(dyads);
    let mut out = Vec::with_capacity(cfg.n_samples);
    for _ in 0..cfg.n_samples {
        chain.run(interval);
        out.push(StatVector(chain.stats().to_vec()));
    }
    Ok(out)
}

/// Largest dyad count we will exhaustively enumerate by default
/// (2^24 graphs, 128 MiB of probabilities).
pub const DEFAULT_EXACT_DYAD_CAP: usize = 24;

/// Exact model distribution over every graph on `n` nodes. Graphs are
/// indexed by a bitmask over dyads in lexicographic `(i,j), i<j` order.
#[derive(Clone, Debug)]
pub struct ExactDistribution {
    pub n: usize,
    pub probs: Vec<f64>,
    pub log_normalizer: f64,
}

/// Position of dyad `{i,j}` in the lexicographic enumeration.
pub fn dyad_index(i: usize, j: usize, n: usize) -> usize {
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    lo * (2 * n - lo - 1) / 2 + (hi - lo - 1)
}

/// Bitmask of a network under the enumeration above.
pub fn network_mask(net: &Network) -> u64 {
    let mut mask = 0u64;
    for (i, j) in net.iter_edges() {
        mask |= 1u64 << dyad_index(i, j, net.n());
    }
    mask
}

/// Network for a bitmask under the enumeration above.
pub fn network_from_mask(n: usize, mask: u64) -> Network {
    let mut net = Network::empty(n);
    let mut idx = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            if mask >> idx & 1 == 1 {
                net.set_edge(i, j, true).unwrap();
            }
            idx += 1;
        }
    }
    net
}

/// Walk every graph in Gray-code order so consecutive states differ by one
/// dyad, visiting `f(mask, stats, edge_count)` for each.
fn enumerate_graphs<F>(model: &CompiledModel, mut f: F) -> Result<()>
where
    F: FnMut(u64, &[f64], u32),
{
    let n = model.n;
    let dyads = n * (n - 1) / 2;
    let mut dyad_of_bit = Vec::with_capacity(dyads);
    for i in 0..n {
        for j in (i + 1)..n {
            dyad_of_bit.push((i, j));
        }
    }
    let mut net = Network::empty(n);
    let mut stats = global_stats(&net, model)?.0;
    let mut delta = vec![0.0; model.n_terms()];
    let mut mask = 0u64;
    let total = 1u64 << dyads;
    f(0, &stats, 0);
    for s in 1..total {
        // Gray code: bit flipped between s-1 and s is the lowest set bit of s.
        let bit = s.trailing_zeros() as usize;
        let (i, j) = dyad_of_bit[bit];
        change_stats_into(&net, model, i, j, &mut delta);
        let turned_on = mask >> bit & 1 == 0;
        mask ^= 1u64 << bit;
        net.set_edge(i, j, turned_on).unwrap();
        if turned_on {
            for (st, d) in stats.iter_mut().zip(&delta) {
                *st += d;
            }
        } else {
            for (st, d) in stats.iter_mut().zip(&delta) {
                *st -= d;
            }
        }
        f(mask, &stats, mask.count_ones());
    }
    Ok(())
}

/// Exhaustively enumerate all graphs and normalize their model weights.
/// Errors when the dyad count exceeds `cap` (or the built-in default).
pub fn exact_distribution(model: &CompiledModel, cap: Option<usize>) -> Result<ExactDistribution> {
    let n = model.n;
    if n < 2 {
        return Err(Error::DegenerateNetwork { n });
    }
    let dyads = n * (n - 1) / 2;
    let cap = cap.unwrap_or(DEFAULT_EXACT_DYAD_CAP);
    if dyads > cap {
        return Err(Error::EnumerationTooLarge { dyads, cap });
    }
    let mut log_weights = vec![0.0f64; 1usize << dyads];
    enumerate_graphs(model, |mask, stats, edges| {
        let mut lw = model.offset_value * edges as f64;
        for (theta, g) in model.theta.iter().zip(stats) {
            lw += theta * g;
        }
        log_weights[mask as usize] = lw;
    })?;
    let max_lw = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum_exp: f64 = log_weights.iter().map(|lw| (lw - max_lw).exp()).sum();
    let log_normalizer = max_lw + sum_exp.ln();
    let probs = log_weights
        .iter()
        .map(|lw| (lw - log_normalizer).exp())
        .collect();
    Ok(ExactDistribution {
        n,
        probs,
        log_normalizer,
    })
}

impl ExactDistribution {
    pub fn prob(&self, mask: u64) -> f64 {
        self.probs[mask as usize]
    }

    /// Exact log-probability ratio of the graph with dyad `{i,j}` on versus
    /// off, leaving everything else as in `net`.
    pub fn tie_log_odds(&self, net: &Network, i: usize, j: usize) -> f64 {
        let bit = dyad_index(i, j, self.n);
        let mask = network_mask(net);
        let on = mask | 1u64 << bit;
        let off = mask & !(1u64 << bit);
        (self.prob(on) / self.prob(off)).ln()
    }
}

/// Exact expectation of the statistic vector under `dist`.
pub fn expected_stats(dist: &ExactDistribution, model: &CompiledModel) -> Result<StatVector> {
    let mut acc = vec![0.0; model.n_terms()];
    enumerate_graphs(model, |mask, stats, _| {
        let p = dist.probs[mask as usize];
        for (a, g) in acc.iter_mut().zip(stats) {
            *a += p * g;
        }
    })?;
    Ok(StatVector(acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::AttributeTable;
    use crate::terms::{ModelSpec, OffsetSpec, TermKind};

    fn edges_model(n: usize, theta: f64, offset: OffsetSpec) -> CompiledModel {
        ModelSpec {
            attributes: vec![],
            terms: vec![TermKind::EdgeCount],
            theta: Some(vec![theta]),
            offset,
        }
        .compile(&AttributeTable::new(n))
        .unwrap()
    }

    #[test]
    fn uniform_distribution_at_zero() {
        let model = edges_model(3, 0.0, OffsetSpec::None);
        let dist = exact_distribution(&model, None).unwrap();
        assert_eq!(dist.probs.len(), 8);
        for p in &dist.probs {
            assert!((p - 0.125).abs() < 1e-12);
        }
        let total: f64 = dist.probs.iter().sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn offset_shifts_tie_probability() {
        // Edges-only with the log(1/n) offset at theta 0: independent ties
        // with probability ilogit(-log 3) = 1/4.
        let model = edges_model(3, 0.0, OffsetSpec::LogInverseN);
        let dist = exact_distribution(&model, None).unwrap();
        let p_tie = 0.25f64;
        for mask in 0..8u64 {
            let k = mask.count_ones() as f64;
            let expect = p_tie.powf(k) * (1.0 - p_tie).powf(3.0 - k);
            assert!((dist.prob(mask) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn independent_ties_factorize() {
        let theta = 0.7;
        let model = edges_model(4, theta, OffsetSpec::None);
        let dist = exact_distribution(&model, None).unwrap();
        let p = ilogit(theta);
        for mask in 0..(1u64 << 6) {
            let k = mask.count_ones() as f64;
            let expect = p.powf(k) * (1.0 - p).powf(6.0 - k);
            assert!((dist.prob(mask) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn expected_edges_three_nodes() {
        let model = edges_model(3, 0.0, OffsetSpec::None);
        let dist = exact_distribution(&model, None).unwrap();
        let e = expected_stats(&dist, &model).unwrap();
        assert!((e[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn expected_isolate_count_three_nodes() {
        let model = ModelSpec {
            attributes: vec![],
            terms: vec![TermKind::DegreeCount {
                degree: 0,
                attr: None,
                level: None,
            }],
            theta: Some(vec![0.0]),
            offset: OffsetSpec::None,
        }
        .compile(&AttributeTable::new(3))
        .unwrap();
        let dist = exact_distribution(&model, None).unwrap();
        let e = expected_stats(&dist, &model).unwrap();
        assert!((e[0] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn enumeration_cap_enforced() {
        let model = edges_model(30, 0.0, OffsetSpec::None);
        assert!(matches!(
            exact_distribution(&model, None),
            Err(crate::error::Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn chain_is_deterministic() {
        let model = edges_model(6, 0.3, OffsetSpec::None);
        let cfg = SamplerConfig::new(5, 99);
        let a = gibbs_sample_stats(&model, &cfg).unwrap();
        let b = gibbs_sample_stats(&model, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fair_coin_graph_at_zero() {
        // Long chain at theta 0, no offset: each dyad is a fair coin.
        let model = edges_model(4, 0.0, OffsetSpec::None);
        let mut chain = GibbsChain::new(&model, &InitialState::Empty, 7).unwrap();
        chain.run(2_000);
        let mut tie_steps = 0u64;
        let total = 200_000u64;
        for _ in 0..total {
            chain.step();
            tie_steps += chain.network().edge_count() as u64;
        }
        let mean_edges = tie_steps as f64 / total as f64;
        // 6 dyads at p = 1/2 each.
        assert!((mean_edges - 3.0).abs() < 0.05, "mean edges {mean_edges}");
    }

    #[test]
    fn stats_only_mode_matches_network_mode() {
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
            theta: Some(vec![0.2, 0.4]),
            offset: OffsetSpec::None,
        }
        .compile(&AttributeTable::new(5))
        .unwrap();
        let cfg = SamplerConfig::new(20, 123);
        let nets = gibbs_sample(&model, &cfg).unwrap();
        let stats = gibbs_sample_stats(&model, &cfg).unwrap();
        for (net, sv) in nets.iter().zip(&stats) {
            let direct = global_stats(net, &model).unwrap();
            assert_eq!(direct.as_slice(), sv.as_slice());
        }
    }

    #[test]
    fn mask_round_trip() {
        let n = 5;
        let net = Network::from_edges(n, [(0, 1), (2, 4), (1, 3)]).unwrap();
        let mask = network_mask(&net);
        let back = network_from_mask(n, mask);
        assert_eq!(net.edges_sorted(), back.edges_sorted());
    }
}
