//! Optimal-distance (k, g, r, δ) locally repairable codes.
//!
//! Codes are built by parity splitting: a systematic Cauchy (MDS) parity block
//! with `g + δ` rows is sampled, its first `δ` rows are restricted to each local
//! group to form the `μ·δ` local parities, and the remaining `g` rows become the
//! global parities. Every node stores `α` symbols; α > 1 replicates the scalar
//! layout block-diagonally, one copy per sub-symbol.
//!
//! Node layout (also the column order of the generator):
//! `X_1..X_k, L_1..L_{μδ}, G_1..G_g`, with node `p` owning generator columns
//! `p·α..(p+1)·α` and message coordinate `j·α + s` being sub-symbol `s` of `X_{j+1}`.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galois::{Element, Field, FieldMatrix, FieldSpec, MatrixRecord};
use crate::search::{binomial, first_subset};

pub const DEFAULT_PATTERN_BUDGET: u128 = 2_000_000;

/// Attempts of the verify-and-resample loop.
pub const MAX_ATTEMPTS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LrcParams {
    pub k: usize,
    pub g: usize,
    pub r: usize,
    pub delta: usize,
    pub alpha: usize,
}

impl LrcParams {
    pub fn new(k: usize, g: usize, r: usize, delta: usize, alpha: usize) -> Result<Self> {
        let p = Self {
            k,
            g,
            r,
            delta,
            alpha,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParams("k must be at least 1".into()));
        }
        if self.r == 0 || !self.k.is_multiple_of(self.r) {
            return Err(Error::InvalidParams("r must divide k".into()));
        }
        if self.delta == 0 {
            return Err(Error::InvalidParams("delta must be at least 1".into()));
        }
        if self.alpha == 0 {
            return Err(Error::InvalidParams("alpha must be at least 1".into()));
        }
        Ok(())
    }

    pub fn mu(&self) -> usize {
        self.k / self.r
    }

    pub fn local_count(&self) -> usize {
        self.mu() * self.delta
    }

    pub fn n(&self) -> usize {
        self.k + self.local_count() + self.g
    }

    /// The distance an optimal-distance code with these parameters attains.
    pub fn optimal_distance(&self) -> usize {
        self.g + self.delta + 1
    }

    pub fn message_len(&self) -> usize {
        self.k * self.alpha
    }

    pub fn scalar(&self) -> Self {
        Self { alpha: 1, ..*self }
    }

    pub fn node(&self, position: usize) -> NodeIndex {
        let l = self.local_count();
        if position < self.k {
            NodeIndex::info(position, self.r)
        } else if position < self.k + l {
            NodeIndex::local(position - self.k, self.delta)
        } else {
            assert!(position < self.n(), "node position {position} out of range");
            NodeIndex::global(position - self.k - l)
        }
    }

    pub fn position(&self, node: NodeIndex) -> usize {
        match node.kind {
            NodeKind::Information => node.index,
            NodeKind::LocalParity => self.k + node.index,
            NodeKind::GlobalParity => self.k + self.local_count() + node.index,
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeIndex> + '_ {
        (0..self.n()).map(move |p| self.node(p))
    }

    pub fn node_columns(&self, position: usize) -> std::ops::Range<usize> {
        position * self.alpha..(position + 1) * self.alpha
    }

    pub fn group_info_positions(&self, tau: usize) -> std::ops::Range<usize> {
        tau * self.r..(tau + 1) * self.r
    }

    pub fn group_local_positions(&self, tau: usize) -> std::ops::Range<usize> {
        self.k + tau * self.delta..self.k + (tau + 1) * self.delta
    }

    pub fn global_positions(&self) -> std::ops::Range<usize> {
        self.k + self.local_count()..self.n()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Information,
    LocalParity,
    GlobalParity,
}

/// A node of one codeword. `index` is zero-based within its kind; labels are one-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeIndex {
    pub kind: NodeKind,
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub group: Option<usize>,
}

impl NodeIndex {
    pub fn info(j: usize, r: usize) -> Self {
        Self {
            kind: NodeKind::Information,
            index: j,
            group: Some(j / r),
        }
    }

    pub fn local(a: usize, delta: usize) -> Self {
        Self {
            kind: NodeKind::LocalParity,
            index: a,
            group: Some(a / delta),
        }
    }

    pub fn global(i: usize) -> Self {
        Self {
            kind: NodeKind::GlobalParity,
            index: i,
            group: None,
        }
    }
}

impl fmt::Display for NodeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.kind {
            NodeKind::Information => 'X',
            NodeKind::LocalParity => 'L',
            NodeKind::GlobalParity => 'G',
        };
        write!(f, "{tag}{}", self.index + 1)
    }
}

pub fn labels(nodes: &[NodeIndex]) -> Vec<String> {
    nodes.iter().map(ToString::to_string).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub d: usize,
    pub witness_pattern: Vec<NodeIndex>,
    pub patterns_checked: u128,
}

/// Symbols of one codeword, node-major then sub-symbol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Codeword {
    pub symbols: Vec<Element>,
}

impl Codeword {
    pub fn node(&self, params: &LrcParams, position: usize) -> &[Element] {
        &self.symbols[params.node_columns(position)]
    }
}

#[derive(Debug, Clone)]
pub struct LrcCode {
    params: LrcParams,
    field: Field,
    generator: FieldMatrix,
    distance: Option<DistanceReport>,
}

impl LrcCode {
    /// Wraps an explicit generator after checking shape, systematic form and
    /// local-parity support.
    pub fn from_generator(params: LrcParams, field: Field, generator: FieldMatrix) -> Result<Self> {
        params.validate()?;
        let (rows, cols) = (params.message_len(), params.n() * params.alpha);
        if generator.shape() != (rows, cols) {
            return Err(Error::DimensionMismatch(format!(
                "generator is {}x{}, expected {rows}x{cols}",
                generator.rows(),
                generator.cols()
            )));
        }
        generator.check_entries(&field)?;
        let code = Self {
            params,
            field,
            generator,
            distance: None,
        };
        code.check_layout()?;
        Ok(code)
    }

    fn check_layout(&self) -> Result<()> {
        let p = &self.params;
        for c in 0..p.k * p.alpha {
            for m in 0..p.message_len() {
                if self.generator.get(m, c) != (m == c) as Element {
                    return Err(Error::InvalidParams(format!(
                        "information column {c} is not systematic"
                    )));
                }
            }
        }
        for a in 0..p.local_count() {
            let tau = a / p.delta;
            let own = p.group_info_positions(tau);
            for c in p.node_columns(p.k + a) {
                for m in 0..p.message_len() {
                    if !own.contains(&(m / p.alpha)) && self.generator.get(m, c) != 0 {
                        return Err(Error::InvalidParams(format!(
                            "local parity L{} depends on information outside group {}",
                            a + 1,
                            tau + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn params(&self) -> &LrcParams {
        &self.params
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn generator(&self) -> &FieldMatrix {
        &self.generator
    }

    pub fn distance(&self) -> Option<&DistanceReport> {
        self.distance.as_ref()
    }

    pub fn node(&self, position: usize) -> NodeIndex {
        self.params.node(position)
    }

    /// Generator columns of one node, `kα x α`.
    pub fn node_generator(&self, position: usize) -> FieldMatrix {
        let cols: Vec<usize> = self.params.node_columns(position).collect();
        self.generator.select_columns(&cols)
    }

    fn columns_of(&self, positions: impl IntoIterator<Item = usize>) -> Vec<usize> {
        positions
            .into_iter()
            .flat_map(|p| self.params.node_columns(p))
            .collect()
    }

    /// Block-diagonal replication of a scalar code over `alpha` sub-symbols.
    pub fn replicate(&self, alpha: usize) -> Result<Self> {
        if self.params.alpha != 1 {
            return Err(Error::InvalidParams(
                "only scalar codes can be replicated".into(),
            ));
        }
        let params = LrcParams {
            alpha,
            ..self.params
        };
        let g = &self.generator;
        let mut out = FieldMatrix::zeros(params.message_len(), params.n() * alpha);
        for j in 0..g.rows() {
            for p in 0..g.cols() {
                let v = g.get(j, p);
                for s in 0..alpha {
                    out.set(j * alpha + s, p * alpha + s, v);
                }
            }
        }
        let distance = self.distance.clone();
        Ok(Self {
            params,
            field: self.field.clone(),
            generator: out,
            distance,
        })
    }

    pub fn encode(&self, message: &[Element]) -> Result<Codeword> {
        if message.len() != self.params.message_len() {
            return Err(Error::LengthMismatch {
                expected: self.params.message_len(),
                actual: message.len(),
            });
        }
        for &m in message {
            self.field.check(m)?;
        }
        Ok(Codeword {
            symbols: self.generator.left_mul_vec(message, &self.field)?,
        })
    }

    /// Recovers the message from the symbols of the nodes not in `erased`.
    pub fn decode_erasures(
        &self,
        received: &Codeword,
        erased: &[NodeIndex],
    ) -> Result<Vec<Element>> {
        let p = &self.params;
        let total = p.n() * p.alpha;
        if received.symbols.len() != total {
            return Err(Error::LengthMismatch {
                expected: total,
                actual: received.symbols.len(),
            });
        }
        let erased_pos: Vec<usize> = erased.iter().map(|&nd| p.position(nd)).collect();
        if erased_pos.iter().all(|&e| e >= p.k) {
            return Ok(received.symbols[..p.message_len()].to_vec());
        }
        let cols = self.columns_of((0..p.n()).filter(|q| !erased_pos.contains(q)));
        let sub = self.generator.select_columns(&cols);
        if sub.rank(&self.field) < p.message_len() {
            let mut nodes = erased.to_vec();
            nodes.sort();
            return Err(Error::Unrecoverable(labels(&nodes)));
        }
        let rhs = FieldMatrix::new(
            cols.len(),
            1,
            cols.iter().map(|&c| received.symbols[c]).collect(),
        )?;
        match sub.transpose().solve(&rhs, &self.field) {
            Ok(x) => Ok(x.entries().to_vec()),
            Err(Error::NoSolution) => Err(Error::Inconsistent),
            Err(e) => Err(e),
        }
    }

    /// True when the message is determined by the nodes outside `erased` (positions).
    pub fn is_recoverable(&self, erased: &[usize]) -> bool {
        let p = &self.params;
        let survivors = p.n() - erased.len();
        if survivors * p.alpha < p.message_len() {
            return false;
        }
        let cols = self.columns_of((0..p.n()).filter(|q| !erased.contains(q)));
        self.generator.select_columns(&cols).rank(&self.field) == p.message_len()
    }

    /// Minimum distance by exhaustive node-erasure enumeration in increasing
    /// size. The witness is the lexicographically first unrecoverable pattern of
    /// that size in node layout order.
    pub fn verify_distance(&mut self, budget: u128) -> Result<DistanceReport> {
        let report = self.find_distance(budget)?;
        self.distance = Some(report.clone());
        Ok(report)
    }

    pub fn find_distance(&self, budget: u128) -> Result<DistanceReport> {
        let n = self.params.n();
        let target = self.params.optimal_distance().min(n);
        let guard = binomial(n, target);
        if guard > budget {
            return Err(Error::BudgetExceeded {
                needed: guard,
                budget,
            });
        }
        let mut checked = 0u128;
        for size in 0..=n {
            let needed = checked + binomial(n, size);
            if needed > budget {
                return Err(Error::BudgetExceeded { needed, budget });
            }
            let (hit, seen) = first_subset(n, size, |pattern| !self.is_recoverable(pattern));
            checked += seen;
            if let Some(pattern) = hit {
                return Ok(DistanceReport {
                    d: size,
                    witness_pattern: pattern.into_iter().map(|q| self.node(q)).collect(),
                    patterns_checked: checked,
                });
            }
        }
        unreachable!("erasing every node is never recoverable for k >= 1")
    }

    /// Distance of the code punctured to `positions`: the smallest number of
    /// erasures inside the set that lowers the rank of the set's columns.
    pub fn punctured_distance(&self, positions: &[usize]) -> usize {
        let full = self
            .generator
            .select_columns(&self.columns_of(positions.iter().copied()))
            .rank(&self.field);
        for size in 1..=positions.len() {
            let (hit, _) = first_subset(positions.len(), size, |erase| {
                let keep = positions
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !erase.contains(i))
                    .map(|(_, &q)| q);
                let cols = self.columns_of(keep);
                self.generator.select_columns(&cols).rank(&self.field) < full
            });
            if hit.is_some() {
                return size;
            }
        }
        positions.len() + 1
    }

    /// The μ local groups: each group's information nodes and local parities,
    /// with the punctured distance measured by enumeration inside the set.
    pub fn locality_sets(&self) -> BTreeMap<usize, LocalitySet> {
        let p = &self.params;
        (0..p.mu())
            .map(|tau| {
                let positions: Vec<usize> = p
                    .group_info_positions(tau)
                    .chain(p.group_local_positions(tau))
                    .collect();
                let set = LocalitySet {
                    nodes: positions.iter().map(|&q| p.node(q)).collect(),
                    punctured_distance: self.punctured_distance(&positions),
                };
                (tau, set)
            })
            .collect()
    }

    pub fn to_record(&self) -> CodeRecord {
        let p = &self.params;
        CodeRecord {
            params: *p,
            field: self.field.spec(),
            generator: MatrixRecord::encode(&self.generator, self.field.spec()),
            node_columns: (0..p.n())
                .map(|q| NodeColumns {
                    node: p.node(q),
                    label: p.node(q).to_string(),
                    columns: p.node_columns(q).collect(),
                })
                .collect(),
            distance: self.distance.clone(),
        }
    }

    pub fn from_record(rec: &CodeRecord) -> Result<Self> {
        let (spec, generator) = rec.generator.decode()?;
        if spec != rec.field {
            return Err(Error::Malformed(
                "generator field differs from code field".into(),
            ));
        }
        let mut code = Self::from_generator(rec.params, Field::new(spec), generator)?;
        for (q, nc) in rec.node_columns.iter().enumerate() {
            let expected: Vec<usize> = rec.params.node_columns(q).collect();
            if nc.node != rec.params.node(q) || nc.columns != expected {
                return Err(Error::Malformed(format!(
                    "unexpected column map for node {}",
                    nc.label
                )));
            }
        }
        if rec.node_columns.len() != rec.params.n() {
            return Err(Error::Malformed(
                "node_columns does not cover every node".into(),
            ));
        }
        code.distance = rec.distance.clone();
        Ok(code)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalitySet {
    pub nodes: Vec<NodeIndex>,
    pub punctured_distance: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeColumns {
    pub node: NodeIndex,
    pub label: String,
    pub columns: Vec<usize>,
}

/// JSON form of an [`LrcCode`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeRecord {
    pub params: LrcParams,
    pub field: FieldSpec,
    pub generator: MatrixRecord,
    pub node_columns: Vec<NodeColumns>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub distance: Option<DistanceReport>,
}

/// `count` distinct field elements in sampling order.
pub(crate) fn distinct_points(rng: &mut ChaCha8Rng, count: usize, q: u32) -> Vec<Element> {
    let mut picked = Vec::with_capacity(count);
    while picked.len() < count {
        let x = rng.random_range(0..q) as Element;
        if !picked.contains(&x) {
            picked.push(x);
        }
    }
    picked
}

/// Scalar generator (`k x n`) of a parity-split Cauchy code.
fn pyramid_generator(params: &LrcParams, field: &Field, rng: &mut ChaCha8Rng) -> FieldMatrix {
    let (k, g, delta) = (params.k, params.g, params.delta);
    let points = distinct_points(rng, g + delta + k, field.q());
    let (xs, ys) = points.split_at(g + delta);
    let cauchy = |row: usize, j: usize| {
        field
            .inv(xs[row] ^ ys[j])
            .expect("evaluation points are distinct")
    };
    let mut gen = FieldMatrix::zeros(k, params.n());
    for j in 0..k {
        gen.set(j, j, 1);
        let tau = j / params.r;
        for l in 0..delta {
            gen.set(j, k + tau * delta + l, cauchy(l, j));
        }
        for i in 0..g {
            gen.set(j, k + params.local_count() + i, cauchy(delta + i, j));
        }
    }
    gen
}

/// Builds an optimal-distance LRC by parity splitting, verifying the distance
/// of the scalar layout and resampling evaluation points on failure.
pub fn construct_pyramid(params: LrcParams, field: &Field, seed: u64) -> Result<LrcCode> {
    construct_pyramid_with_budget(params, field, seed, DEFAULT_PATTERN_BUDGET)
}

pub fn construct_pyramid_with_budget(
    params: LrcParams,
    field: &Field,
    seed: u64,
    budget: u128,
) -> Result<LrcCode> {
    params.validate()?;
    let needed = params.k + params.g + params.delta;
    if field.q() as usize <= needed {
        return Err(Error::InvalidParams(format!(
            "field too small: q = {} must exceed k + g + delta = {needed}",
            field.q()
        )));
    }
    let scalar = params.scalar();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = None;
    for _ in 0..MAX_ATTEMPTS {
        let mut code = LrcCode::from_generator(
            scalar,
            field.clone(),
            pyramid_generator(&scalar, field, &mut rng),
        )?;
        let report = code.verify_distance(budget)?;
        if report.d == params.optimal_distance() {
            return if params.alpha == 1 {
                Ok(code)
            } else {
                code.replicate(params.alpha)
            };
        }
        last = Some(report.d);
    }
    Err(Error::ConstructionFailed {
        attempts: MAX_ATTEMPTS,
        reason: format!(
            "best distance {:?}, need {}",
            last,
            params.optimal_distance()
        ),
    })
}
