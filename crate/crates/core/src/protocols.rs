//! Concrete estimation protocols under per-sensor `k`-bit budgets, together
//! with their decoders:
//!
//! * **Sharded raw bits** (product Bernoulli): the `nk` bit slots are dealt
//!   round-robin over coordinates, sensor `j`'s slot `t` carrying the raw
//!   bit of coordinate `(jk+t) mod d`; the decoder is the per-coordinate
//!   sample mean over its `m_c ∈ {⌊nk/d⌋, ⌈nk/d⌉}` received bits, giving
//!   exact expected risk `Σ_c θ_c(1−θ_c)/m_c`.
//! * **Probit grouping** (Gaussian location): each of the first `d·⌊nk/d⌋`
//!   slots sends the sign bit `1{x_c > 0}`, so `p_c = Φ(θ_c/σ)`; the
//!   decoder inverts `θ̂_c = clamp(σ·Φ⁻¹(p̂_c), ±L)` with the empirical
//!   frequency pulled off `{0, 1}` to `1/(2m)` resp. `1 − 1/(2m)` first.
//!   Leftover slots idle (constant-0 bits).
//! * **Simulate-and-infer** (product Bernoulli on the probability simplex):
//!   coordinates are split into `m = ⌈d/(2^k−2)⌉` blocks of size
//!   `≤ 2^k − 2` and sensors into groups of `2m`. In each pair the first
//!   sensor reports its block's hit pattern — code 0 for no hit, code 1
//!   for two or more, code `2+p` for a unique hit at block-local position
//!   `p` — and its partner echoes one raw bit of its *own* sample at the
//!   reported coordinate. A group succeeds when exactly one pair reports a
//!   unique hit, every other pair reports code 0, and the echoed bit is 0;
//!   the recorded index is then a fresh draw from `θ/‖θ‖₁`, the group
//!   succeeding with probability `‖θ‖₁·∏_i(1−θ_i)`. The decoder is the
//!   empirical distribution of recorded indices over successful groups
//!   (uniform, flagged degenerate, when no group succeeds).
//!
//! Each bundle runs in two forms: a direct executor that samples only the
//! coordinates a sensor actually transmits (distributionally identical to
//! sampling full observations and discarding the rest, and fast enough for
//! Monte Carlo at `n` in the hundreds of thousands), and an exact
//! [`ProtocolTree`] materialization for small `nk` that plugs into the
//! transcript-enumeration machinery.

use std::ops::Range;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::blackboard::{ChildRef, Node, Predicate, ProtocolTree};
use crate::error::{Error, Result};
use crate::models::{Family, ModelSpec};
use crate::rng;
use crate::util;

/// Cap on `n·k` for materializing a bundle as an explicit tree
/// (`2^{nk} − 1` nodes).
pub const TREE_BUILD_DEPTH_CAP: usize = 16;

/// Widest per-sensor word the executors pack into `u32`.
pub const WORD_BITS_CAP: usize = 32;

#[derive(Clone, Debug)]
enum Kind {
    Sharded,
    Probit {
        clamp: f64,
        /// Bits received per coordinate, `⌊nk/d⌋`.
        per_coordinate: usize,
    },
    SimInfer {
        /// Coordinate blocks, each of size `≤ 2^k − 2`.
        blocks: Vec<Range<usize>>,
        /// Complete sensor groups of size `2·blocks.len()`.
        groups: usize,
    },
}

/// A protocol plus its decoder, specialized to one model shape and `(n, k)`.
#[derive(Clone, Debug)]
pub struct ProtocolBundle {
    pub model: ModelSpec,
    pub n: usize,
    pub k: usize,
    kind: Kind,
}

/// Success-channel diagnostics of a simulate-and-infer decode.
#[derive(Clone, Debug, Serialize)]
pub struct SimInferStats {
    pub groups: u64,
    pub successes: u64,
    /// Recorded-index tallies per coordinate (sums to `successes`).
    pub index_counts: Vec<u64>,
}

/// A decoded estimate with its bookkeeping.
#[derive(Clone, Debug, Serialize)]
pub struct DecodeOutput {
    pub theta_hat: Vec<f64>,
    /// Set when the decoder had to fall back to an uninformed output
    /// (simulate-and-infer with zero successful groups).
    pub degenerate: bool,
    /// Sensors that transmitted constant bits because they fit no complete
    /// group or slot.
    pub idle_sensors: usize,
    pub sim_infer: Option<SimInferStats>,
}

fn require_family(model: &ModelSpec, family: Family, what: &str) -> Result<()> {
    if model.family != family {
        return Err(Error::Inapplicable(format!(
            "{what} runs on {family:?} models, got {:?}",
            model.family
        )));
    }
    Ok(())
}

fn require_shape(n: usize, k: usize, d: usize) -> Result<()> {
    if n == 0 || k == 0 {
        return Err(Error::InsufficientBudget(format!(
            "need at least one sensor and one bit, got n={n}, k={k}"
        )));
    }
    if k > WORD_BITS_CAP {
        return Err(Error::CapacityExceeded {
            what: "bits per sensor word",
            limit: WORD_BITS_CAP,
            requested: k,
        });
    }
    if n.saturating_mul(k) < d {
        return Err(Error::InsufficientBudget(format!(
            "nk = {} bits cannot cover {d} coordinates",
            n * k
        )));
    }
    Ok(())
}

/// Round-robin bit forwarding for product Bernoulli means. Needs `nk ≥ d`.
pub fn build_sharded_raw_bits(n: usize, k: usize, model: &ModelSpec) -> Result<ProtocolBundle> {
    require_family(model, Family::ProductBernoulli, "sharded raw bits")?;
    require_shape(n, k, model.d)?;
    Ok(ProtocolBundle {
        model: model.clone(),
        n,
        k,
        kind: Kind::Sharded,
    })
}

/// Sign-bit grouping with probit inversion for Gaussian locations, clamped
/// to `[−clamp, clamp]`. Needs `nk ≥ d`.
pub fn build_probit_grouping(
    n: usize,
    k: usize,
    model: &ModelSpec,
    clamp: f64,
) -> Result<ProtocolBundle> {
    require_family(model, Family::GaussianLocation, "probit grouping")?;
    require_shape(n, k, model.d)?;
    if !(clamp > 0.0) || !clamp.is_finite() {
        return Err(Error::Domain(format!(
            "clamp must be a positive radius, got {clamp}"
        )));
    }
    let per_coordinate = n * k / model.d;
    Ok(ProtocolBundle {
        model: model.clone(),
        n,
        k,
        kind: Kind::Probit {
            clamp,
            per_coordinate,
        },
    })
}

/// Simulate-and-infer for simplex-constrained product Bernoulli vectors.
/// Needs `k ≥ 2` (codes 0 and 1 plus at least one index) and at least one
/// complete group of `2m` sensors.
pub fn build_simulate_and_infer(n: usize, k: usize, model: &ModelSpec) -> Result<ProtocolBundle> {
    require_family(model, Family::ProductBernoulli, "simulate-and-infer")?;
    let d = model.d;
    if k < 2 {
        return Err(Error::InsufficientBudget(format!(
            "simulate-and-infer needs k ≥ 2 for the two reserved codes plus an index, got k={k}"
        )));
    }
    require_shape(n, k, 1)?;
    // Block capacity 2^k − 2, saturating at d once the alphabet covers every
    // coordinate (the k ≫ log d regime).
    let cap = if k >= usize::BITS as usize - 1 {
        d
    } else {
        ((1usize << k) - 2).min(d)
    };
    let blocks: Vec<Range<usize>> = (0..d)
        .step_by(cap)
        .map(|start| start..(start + cap).min(d))
        .collect();
    let m = blocks.len();
    let groups = n / (2 * m);
    if groups == 0 {
        return Err(Error::InsufficientBudget(format!(
            "no complete group: n={n} sensors cannot fill one group of {} (= 2m)",
            2 * m
        )));
    }
    Ok(ProtocolBundle {
        model: model.clone(),
        n,
        k,
        kind: Kind::SimInfer { groups, blocks },
    })
}

/// Protocol selector for configs and the experiment harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolName {
    ShardedBits,
    ProbitGrouping,
    SimulateAndInfer,
}

impl ProtocolName {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolName::ShardedBits => "sharded_bits",
            ProtocolName::ProbitGrouping => "probit_grouping",
            ProtocolName::SimulateAndInfer => "simulate_and_infer",
        }
    }
}

/// Builds the named bundle. `clamp` applies to probit grouping only and
/// defaults to 1.0, matching the `[−1, 1]^d` experiment space.
pub fn build_named(
    name: ProtocolName,
    n: usize,
    k: usize,
    model: &ModelSpec,
    clamp: Option<f64>,
) -> Result<ProtocolBundle> {
    match name {
        ProtocolName::ShardedBits => build_sharded_raw_bits(n, k, model),
        ProtocolName::ProbitGrouping => build_probit_grouping(n, k, model, clamp.unwrap_or(1.0)),
        ProtocolName::SimulateAndInfer => build_simulate_and_infer(n, k, model),
    }
}

/// Per-block one-hot decomposition of a product Bernoulli restriction:
/// `none = ∏(1−θ_i)` and `one_hot[p] = θ_{i_p}·∏_{i'≠i_p}(1−θ_{i'})`.
struct BlockDist {
    none: f64,
    one_hot: Vec<f64>,
}

fn block_dist(theta: &[f64], block: &Range<usize>) -> BlockDist {
    let b = block.len();
    // Prefix/suffix products of (1−θ) keep this linear in the block size
    // and exact at the closed endpoints θ_i ∈ {0, 1}.
    let mut prefix = vec![1.0; b + 1];
    for (p, i) in block.clone().enumerate() {
        prefix[p + 1] = prefix[p] * (1.0 - theta[i]);
    }
    let mut suffix = vec![1.0; b + 1];
    for (p, i) in block.clone().enumerate().rev() {
        suffix[p] = suffix[p + 1] * (1.0 - theta[i]);
    }
    let one_hot = block
        .clone()
        .enumerate()
        .map(|(p, i)| theta[i] * prefix[p] * suffix[p + 1])
        .collect();
    BlockDist {
        none: prefix[b],
        one_hot,
    }
}

impl BlockDist {
    /// Draws the reporter code: 0 (no hit), 1 (≥ 2 hits), `2+p` (unique hit
    /// at local position `p`).
    fn sample_code(&self, rng: &mut ChaCha8Rng) -> u32 {
        let mut u = rng::open_unit(rng);
        if u < self.none {
            return 0;
        }
        u -= self.none;
        for (p, h) in self.one_hot.iter().enumerate() {
            if u < *h {
                return 2 + p as u32;
            }
            u -= h;
        }
        1
    }
}

impl ProtocolBundle {
    pub fn name(&self) -> &'static str {
        match self.kind {
            Kind::Sharded => "sharded_bits",
            Kind::Probit { .. } => "probit_grouping",
            Kind::SimInfer { .. } => "simulate_and_infer",
        }
    }

    fn d(&self) -> usize {
        self.model.d
    }

    /// Bits received per coordinate under the round-robin deal.
    fn sharded_slot_count(&self, c: usize) -> usize {
        let total = self.n * self.k;
        total / self.d() + usize::from(c < total % self.d())
    }

    /// Exact expected squared-ℓ₂ risk where one exists in closed form
    /// (sharded bits: `Σ_c θ_c(1−θ_c)/m_c`).
    pub fn closed_form_risk(&self, theta: &[f64]) -> Option<f64> {
        match self.kind {
            Kind::Sharded => {
                let terms: Vec<f64> = theta
                    .iter()
                    .enumerate()
                    .map(|(c, &t)| t * (1.0 - t) / self.sharded_slot_count(c) as f64)
                    .collect();
                Some(util::pairwise_sum(&terms))
            }
            _ => None,
        }
    }

    /// Samples one protocol round at `theta` and returns the per-sensor
    /// `k`-bit words in board order (bit `t` of word `j` is sensor `j`'s
    /// `t`-th transmitted bit).
    ///
    /// Only the coordinates a sensor actually transmits are sampled, in
    /// sensor order, so the draw sequence is deterministic for a given
    /// stream.
    pub fn execute(&self, theta: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<u32>> {
        self.model.check_admissible(theta)?;
        let (n, k, d) = (self.n, self.k, self.d());
        let mut words = vec![0u32; n];
        match &self.kind {
            Kind::Sharded => {
                for (j, word) in words.iter_mut().enumerate() {
                    for t in 0..k {
                        let c = (j * k + t) % d;
                        if rng::open_unit(rng) < theta[c] {
                            *word |= 1 << t;
                        }
                    }
                }
            }
            Kind::Probit { per_coordinate, .. } => {
                let active = d * per_coordinate;
                // P(x_c > 0) = Φ(θ_c/σ); thresholding a fresh Gaussian and
                // drawing the Bernoulli directly are the same law.
                let up: Vec<f64> = theta
                    .iter()
                    .map(|&t| util::std_normal_cdf(t / self.model.sigma))
                    .collect();
                for (j, word) in words.iter_mut().enumerate() {
                    for t in 0..k {
                        let s = j * k + t;
                        if s < active && rng::open_unit(rng) < up[s % d] {
                            *word |= 1 << t;
                        }
                    }
                }
            }
            Kind::SimInfer { blocks, groups } => {
                let dists: Vec<BlockDist> =
                    blocks.iter().map(|b| block_dist(theta, b)).collect();
                let m = blocks.len();
                for g in 0..*groups {
                    let base = g * 2 * m;
                    for (l, block) in blocks.iter().enumerate() {
                        let code = dists[l].sample_code(rng);
                        words[base + 2 * l] = code;
                        if code >= 2 {
                            let coord = block.start + (code as usize - 2);
                            words[base + 2 * l + 1] =
                                u32::from(rng::open_unit(rng) < theta[coord]);
                        }
                    }
                }
            }
        }
        Ok(words)
    }

    /// Decodes a board of per-sensor words into a parameter estimate.
    /// Deterministic; rejects boards the protocol could not have produced.
    pub fn estimate(&self, words: &[u32]) -> Result<DecodeOutput> {
        let (n, k, d) = (self.n, self.k, self.d());
        if words.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{} words for {n} sensors",
                words.len()
            )));
        }
        if k < WORD_BITS_CAP {
            if let Some(j) = words.iter().position(|w| w >> k != 0) {
                return Err(Error::ShapeMismatch(format!(
                    "sensor {j} word {:#x} uses more than k={k} bits",
                    words[j]
                )));
            }
        }
        let bit = |s: usize| (words[s / k] >> (s % k)) & 1;
        match &self.kind {
            Kind::Sharded => {
                let mut sums = vec![0u64; d];
                for s in 0..n * k {
                    sums[s % d] += u64::from(bit(s));
                }
                let theta_hat = sums
                    .iter()
                    .enumerate()
                    .map(|(c, &s)| s as f64 / self.sharded_slot_count(c) as f64)
                    .collect();
                Ok(DecodeOutput {
                    theta_hat,
                    degenerate: false,
                    idle_sensors: 0,
                    sim_infer: None,
                })
            }
            Kind::Probit {
                clamp,
                per_coordinate,
            } => {
                let m = *per_coordinate;
                let mut sums = vec![0u64; d];
                for s in 0..d * m {
                    sums[s % d] += u64::from(bit(s));
                }
                let mf = m as f64;
                let theta_hat = sums
                    .iter()
                    .map(|&s| {
                        let p_hat = (s as f64 / mf).clamp(0.5 / mf, 1.0 - 0.5 / mf);
                        (self.model.sigma * util::std_normal_quantile(p_hat))
                            .clamp(-clamp, *clamp)
                    })
                    .collect();
                let active_sensors = (d * m).div_ceil(k);
                Ok(DecodeOutput {
                    theta_hat,
                    degenerate: false,
                    idle_sensors: n - active_sensors,
                    sim_infer: None,
                })
            }
            Kind::SimInfer { blocks, groups } => {
                let m = blocks.len();
                let mut counts = vec![0u64; d];
                let mut successes = 0u64;
                for g in 0..*groups {
                    let base = g * 2 * m;
                    let mut unique: Option<(usize, usize)> = None;
                    let mut clean = true;
                    for (l, block) in blocks.iter().enumerate() {
                        let code = words[base + 2 * l];
                        let echo = words[base + 2 * l + 1];
                        if echo > 1 {
                            return Err(Error::ShapeMismatch(format!(
                                "echo word {echo} in group {g} is not a single bit"
                            )));
                        }
                        match code {
                            0 => {}
                            1 => clean = false,
                            c => {
                                let local = c as usize - 2;
                                if local >= block.len() {
                                    return Err(Error::ShapeMismatch(format!(
                                        "code {c} in group {g} points outside its \
                                         {}-coordinate block",
                                        block.len()
                                    )));
                                }
                                if unique.replace((l, block.start + local)).is_some() {
                                    clean = false;
                                }
                            }
                        }
                    }
                    if let (true, Some((l, coord))) = (clean, unique) {
                        if words[base + 2 * l + 1] == 0 {
                            successes += 1;
                            counts[coord] += 1;
                        }
                    }
                }
                let degenerate = successes == 0;
                let theta_hat = if degenerate {
                    vec![1.0 / d as f64; d]
                } else {
                    counts
                        .iter()
                        .map(|&c| c as f64 / successes as f64)
                        .collect()
                };
                Ok(DecodeOutput {
                    theta_hat,
                    degenerate,
                    idle_sensors: n - groups * 2 * m,
                    sim_infer: Some(SimInferStats {
                        groups: *groups as u64,
                        successes,
                        index_counts: counts,
                    }),
                })
            }
        }
    }

    /// One full round: execute at `theta`, then decode.
    pub fn run_once(&self, theta: &[f64], rng: &mut ChaCha8Rng) -> Result<DecodeOutput> {
        let words = self.execute(theta, rng)?;
        self.estimate(&words)
    }

    /// Packs a depth-`nk` transcript bit string (board order) into
    /// per-sensor words.
    pub fn words_from_bits(&self, bits: &[u8]) -> Result<Vec<u32>> {
        if bits.len() != self.n * self.k {
            return Err(Error::ShapeMismatch(format!(
                "{} transcript bits for nk = {}",
                bits.len(),
                self.n * self.k
            )));
        }
        Ok((0..self.n)
            .map(|j| {
                (0..self.k)
                    .map(|t| u32::from(bits[j * self.k + t] != 0) << t)
                    .sum()
            })
            .collect())
    }

    /// Materializes the bundle as an explicit protocol tree (sensor-major
    /// bit order), exact for `nk ≤ 16`. The tree's transcript distribution
    /// matches the executor's law, which is what the enumeration tests
    /// exercise.
    pub fn build_tree(&self) -> Result<ProtocolTree> {
        let depth = self.n * self.k;
        if depth > TREE_BUILD_DEPTH_CAP {
            return Err(Error::CapacityExceeded {
                what: "protocol tree depth nk",
                limit: TREE_BUILD_DEPTH_CAP,
                requested: depth,
            });
        }
        let space = match self.kind {
            // The Gaussian bundle uses threshold predicates; the Bernoulli
            // bundles enumerate their finite sample space into truth tables.
            Kind::Probit { .. } => 0,
            _ => self
                .model
                .space_size()
                .ok_or_else(|| Error::CapacityExceeded {
                    what: "sample space for protocol truth tables",
                    limit: crate::models::ENUMERATION_DIM_CAP,
                    requested: self.d(),
                })?,
        };
        let mut nodes = Vec::with_capacity((1usize << depth) - 1);
        let mut prefix = Vec::with_capacity(depth);
        self.tree_node(0, space, &mut prefix, &mut nodes)?;
        ProtocolTree::new(self.n, vec![self.k; self.n], 0, nodes)
    }

    fn tree_node(
        &self,
        q: usize,
        space: usize,
        prefix: &mut Vec<bool>,
        nodes: &mut Vec<Node>,
    ) -> Result<usize> {
        let idx = nodes.len();
        let label = q / self.k;
        nodes.push(Node {
            label,
            predicate: Predicate::Threshold { w: vec![], b: 0.0 },
            left: ChildRef::Leaf,
            right: ChildRef::Leaf,
        });
        let predicate = self.node_predicate(q, space, prefix);
        let (left, right) = if q + 1 == self.n * self.k {
            (ChildRef::Leaf, ChildRef::Leaf)
        } else {
            prefix.push(false);
            let l = self.tree_node(q + 1, space, prefix, nodes)?;
            prefix.pop();
            prefix.push(true);
            let r = self.tree_node(q + 1, space, prefix, nodes)?;
            prefix.pop();
            (ChildRef::Node(l), ChildRef::Node(r))
        };
        nodes[idx] = Node {
            label,
            predicate,
            left,
            right,
        };
        Ok(idx)
    }

    /// The bit sensor `j = q/k` emits at its `t = q%k`-th turn, as a
    /// function of its own observation given everything already on the
    /// board (`prefix`).
    fn node_predicate(&self, q: usize, space: usize, prefix: &[bool]) -> Predicate {
        let (j, t, d) = (q / self.k, q % self.k, self.d());
        match &self.kind {
            Kind::Sharded => {
                let c = q % d;
                Predicate::TruthTable((0..space).map(|sx| (sx >> c) & 1 == 1).collect())
            }
            Kind::Probit { per_coordinate, .. } => {
                let active = d * per_coordinate;
                let mut w = vec![0.0; d];
                if q < active {
                    w[q % d] = 1.0;
                }
                // An all-zero weight vector is the constant-false (idle)
                // predicate.
                Predicate::Threshold { w, b: 0.0 }
            }
            Kind::SimInfer { blocks, groups } => {
                let m = blocks.len();
                if j >= groups * 2 * m {
                    return Predicate::TruthTable(vec![false; space]);
                }
                let pair = (j % (2 * m)) / 2;
                let block = &blocks[pair];
                if j % 2 == 0 {
                    // Reporter: bit t of the block code.
                    Predicate::TruthTable(
                        (0..space)
                            .map(|sx| (block_code(sx, block) >> t) & 1 == 1)
                            .collect(),
                    )
                } else {
                    // Echoer: read the partner's word off the board.
                    let word: u32 = (0..self.k)
                        .map(|b| u32::from(prefix[(j - 1) * self.k + b]) << b)
                        .sum();
                    if word >= 2 && (word as usize - 2) < block.len() {
                        let coord = block.start + (word as usize - 2);
                        Predicate::TruthTable(
                            (0..space)
                                .map(|sx| t == 0 && (sx >> coord) & 1 == 1)
                                .collect(),
                        )
                    } else {
                        Predicate::TruthTable(vec![false; space])
                    }
                }
            }
        }
    }
}

/// Reporter code as a function of the sample-space index: count the set
/// bits inside the block.
fn block_code(sx: usize, block: &Range<usize>) -> u32 {
    let mut hit = None;
    for (p, i) in block.clone().enumerate() {
        if (sx >> i) & 1 == 1 {
            if hit.is_some() {
                return 1;
            }
            hit = Some(p as u32);
        }
    }
    match hit {
        Some(p) => 2 + p,
        None => 0,
    }
}
