//! Exponential-family random graph models with a network-size offset.
//!
//! The natural parametrization of these models pins down density, so the
//! same coefficients imply ever-growing degrees as the node set grows.
//! Adding a fixed `log(1/n)` coefficient on the tie count flips that: the
//! coefficients then control mean degree and mixing, which stay put across
//! network sizes. That makes it possible to fit one model to egocentric
//! survey data and read the estimates as statements about networks of any
//! size.
//!
//! What's here:
//!
//! * [`net`] — undirected networks and node attribute tables, with CSV I/O.
//! * [`terms`] — the statistic vocabulary (activity, mixing, degree counts,
//!   age effects), change statistics, and the offset.
//! * [`sampler`] — a naive Gibbs sampler over dyads plus an exhaustive
//!   enumeration of tiny graph spaces for exact checks.
//! * [`ego`] — egocentric survey ingestion, implied statistics, weighted
//!   bootstrap resampling, and synthetic populations.
//! * [`fit`] — exact logistic fitting for dyad-independent models and
//!   stochastic-approximation moment matching for the rest.
//! * [`asymptotics`] — closed-form degree-distribution references.
//! * [`study`] — the bootstrap scaling study and the invariance demo.

pub mod asymptotics;
pub mod ego;
pub mod error;
pub mod fit;
pub mod net;
pub mod sampler;
pub mod study;
pub mod terms;

pub use error::{Error, Result};
pub use net::{AttrDecl, AttributeTable, Network};
pub use terms::{CompiledModel, ModelSpec, OffsetSpec, StatVector, TermKind};

/// Derive a child seed from a master seed and a two-part key, via two
/// SplitMix64 rounds. Used everywhere a task needs its own reproducible
/// random stream (study replicates, synthetic populations, warm starts).
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    splitmix(splitmix(master ^ splitmix(stream)) ^ index)
}
