//! Stable global-merge conversions between optimal-distance LRCs.
//!
//! λ initial codewords of a `(kI, gI, r, δ)` code are merged into one final
//! `(λ·kI, gF, r, δ)` codeword. Information and local-parity nodes stay in
//! place; initial global parities retire and the `gF` final global parities
//! are synthesized by a coordinator from the data it downloads.
//!
//! Indexing is global across initial codewords: information node `j` belongs
//! to codeword `j / kI`, initial global parity `i` to codeword `i / gI`, local
//! parity `a` to codeword `a / (μ·δ)`. The final message is the concatenation
//! of the λ initial messages.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, Symbols};
use crate::error::{Error, Result};
use crate::galois::{Element, Field, FieldMatrix};
use crate::lrc::{self, Codeword, LrcCode, LrcParams, NodeIndex, NodeKind, MAX_ATTEMPTS};

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MergeSpec {
    #[serde(rename = "kI")]
    pub k_initial: usize,
    #[serde(rename = "gI")]
    pub g_initial: usize,
    pub r: usize,
    pub delta: usize,
    #[serde(rename = "lambdaI", alias = "lambda")]
    pub lambda: usize,
    #[serde(rename = "gF")]
    pub g_final: usize,
    #[serde(default = "one")]
    pub alpha: usize,
}

impl MergeSpec {
    pub fn new(
        k_initial: usize,
        g_initial: usize,
        r: usize,
        delta: usize,
        lambda: usize,
        g_final: usize,
        alpha: usize,
    ) -> Result<Self> {
        let spec = Self {
            k_initial,
            g_initial,
            r,
            delta,
            lambda,
            g_final,
            alpha,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda < 2 {
            return Err(Error::InvalidSpec(format!(
                "merge regime requires lambdaI >= 2, got {}",
                self.lambda
            )));
        }
        self.initial_params().validate().map_err(|e| match e {
            Error::InvalidParams(msg) => Error::InvalidSpec(msg),
            other => other,
        })
    }

    pub fn k_final(&self) -> usize {
        self.lambda * self.k_initial
    }

    pub fn mu_initial(&self) -> usize {
        self.k_initial / self.r
    }

    pub fn mu_final(&self) -> usize {
        self.lambda * self.mu_initial()
    }

    pub fn locals_per_codeword(&self) -> usize {
        self.mu_initial() * self.delta
    }

    pub fn n_initial(&self) -> usize {
        self.initial_params().n()
    }

    pub fn n_final(&self) -> usize {
        self.final_params().n()
    }

    /// Number of message symbols across the merged codewords, `kF · α`.
    pub fn message_len(&self) -> usize {
        self.k_final() * self.alpha
    }

    pub fn initial_params(&self) -> LrcParams {
        LrcParams {
            k: self.k_initial,
            g: self.g_initial,
            r: self.r,
            delta: self.delta,
            alpha: self.alpha,
        }
    }

    pub fn final_params(&self) -> LrcParams {
        LrcParams {
            k: self.k_final(),
            g: self.g_final,
            ..self.initial_params()
        }
    }

    /// Final-code position of node `pos` of initial codeword `t`; `None` for
    /// initial global parities.
    pub fn final_position(&self, t: usize, pos: usize) -> Option<usize> {
        let (ki, l) = (self.k_initial, self.locals_per_codeword());
        if pos < ki {
            Some(t * ki + pos)
        } else if pos < ki + l {
            Some(self.k_final() + t * l + (pos - ki))
        } else {
            None
        }
    }
}

impl fmt::Display for MergeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(kI={}, gI={}, r={}, delta={}, lambdaI={}, gF={}, alpha={})",
            self.k_initial,
            self.g_initial,
            self.r,
            self.delta,
            self.lambda,
            self.g_final,
            self.alpha
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeRole {
    Unchanged,
    Retired,
    New,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleEntry {
    /// Initial codeword of the node, `None` for nodes that only exist in the final code.
    pub codeword: Option<usize>,
    pub node: NodeIndex,
    pub label: String,
    pub role: NodeRole,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRoles {
    pub entries: Vec<RoleEntry>,
}

impl NodeRoles {
    pub fn count(&self, role: NodeRole) -> usize {
        self.entries.iter().filter(|e| e.role == role).count()
    }
}

/// Roles of every node in a stable merge, from the layout alone.
pub fn classify_layout(spec: &MergeSpec) -> Result<NodeRoles> {
    spec.validate()?;
    let ip = spec.initial_params();
    let mut entries = Vec::new();
    for t in 0..spec.lambda {
        for pos in 0..ip.n() {
            let node = ip.node(pos);
            let role = match node.kind {
                NodeKind::GlobalParity => NodeRole::Retired,
                _ => NodeRole::Unchanged,
            };
            entries.push(RoleEntry {
                codeword: Some(t),
                node,
                label: format!("{}@{}", node, t + 1),
                role,
            });
        }
    }
    for i in 0..spec.g_final {
        entries.push(RoleEntry {
            codeword: None,
            node: NodeIndex::global(i),
            label: format!("GF{}", i + 1),
            role: NodeRole::New,
        });
    }
    Ok(NodeRoles { entries })
}

/// Evidence that the final code keeps every initial local group intact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Compatibility {
    pub blocks: usize,
    pub columns_checked: usize,
}

/// An initial code, the final code it merges into, and the per-codeword
/// coefficients `c[t][i]` defining final global parity `i` as
/// `Σ_t c[t][i] · (initial global parity i of codeword t)` when the pair came from
/// [`build_merge_pair`].
#[derive(Debug, Clone)]
pub struct ConvertiblePair {
    spec: MergeSpec,
    initial: LrcCode,
    final_code: LrcCode,
    coefficients: Option<Vec<Vec<Element>>>,
    compatibility: Compatibility,
}

impl ConvertiblePair {
    pub fn new(
        spec: MergeSpec,
        initial: LrcCode,
        final_code: LrcCode,
        coefficients: Option<Vec<Vec<Element>>>,
    ) -> Result<Self> {
        spec.validate()?;
        if *initial.params() != spec.initial_params() {
            return Err(Error::InvalidSpec(
                "initial code parameters differ from the spec".into(),
            ));
        }
        if *final_code.params() != spec.final_params() {
            return Err(Error::InvalidSpec(
                "final code parameters differ from the spec".into(),
            ));
        }
        if initial.field() != final_code.field() {
            return Err(Error::InvalidSpec(
                "initial and final codes use different fields".into(),
            ));
        }
        if let Some(c) = &coefficients {
            if c.len() != spec.lambda || c.iter().any(|row| row.len() != spec.g_final) {
                return Err(Error::SizeMismatch(
                    "coefficients must be lambdaI x gF".into(),
                ));
            }
        }
        let compatibility = check_compatibility(&spec, &initial, &final_code)?;
        Ok(Self {
            spec,
            initial,
            final_code,
            coefficients,
            compatibility,
        })
    }

    pub fn spec(&self) -> &MergeSpec {
        &self.spec
    }

    pub fn initial(&self) -> &LrcCode {
        &self.initial
    }

    pub fn final_code(&self) -> &LrcCode {
        &self.final_code
    }

    pub fn field(&self) -> &Field {
        self.initial.field()
    }

    pub fn coefficients(&self) -> Option<&[Vec<Element>]> {
        self.coefficients.as_deref()
    }

    pub fn compatibility(&self) -> Compatibility {
        self.compatibility
    }

    /// What node `pos` of initial codeword `t` stores, as `α` functionals of
    /// the full final message (`α x kF·α`).
    pub fn initial_view(&self, t: usize, pos: usize) -> FieldMatrix {
        let s = &self.spec;
        let local = self.initial.node_generator(pos);
        let offset = t * s.k_initial * s.alpha;
        FieldMatrix::from_fn(s.alpha, s.message_len(), |row, col| {
            if (offset..offset + local.rows()).contains(&col) {
                local.get(col - offset, row)
            } else {
                0
            }
        })
    }

    pub fn final_view(&self, pos: usize) -> FieldMatrix {
        self.final_code.node_generator(pos).transpose()
    }

    pub fn initial_info_position(&self, j: usize) -> (usize, usize) {
        (j / self.spec.k_initial, j % self.spec.k_initial)
    }

    pub fn initial_global_position(&self, i: usize) -> (usize, usize) {
        let ip = self.spec.initial_params();
        let (t, local) = (i / self.spec.g_initial, i % self.spec.g_initial);
        (t, ip.k + ip.local_count() + local)
    }

    pub fn initial_local_position(&self, a: usize) -> (usize, usize) {
        let l = self.spec.locals_per_codeword();
        (a / l, self.spec.k_initial + a % l)
    }

    /// Splits a final message into the λ initial messages.
    pub fn split_message<'m>(&self, message: &'m [Element]) -> Vec<&'m [Element]> {
        message
            .chunks(self.spec.k_initial * self.spec.alpha)
            .collect()
    }
}

fn check_compatibility(
    spec: &MergeSpec,
    initial: &LrcCode,
    final_code: &LrcCode,
) -> Result<Compatibility> {
    let ip = spec.initial_params();
    let fg = final_code.generator();
    let block = spec.k_initial * spec.alpha;
    let mut checked = 0;
    for t in 0..spec.lambda {
        for pos in 0..ip.k + ip.local_count() {
            let fpos = spec
                .final_position(t, pos)
                .expect("information or local node");
            let node = ip.node(pos);
            let init_cols = initial.node_generator(pos);
            for (s, col) in final_code.params().node_columns(fpos).enumerate() {
                for row in 0..fg.rows() {
                    let expected = if row / block == t {
                        init_cols.get(row % block, s)
                    } else {
                        0
                    };
                    if fg.get(row, col) != expected {
                        return Err(Error::RoleViolation {
                            node: format!("{node}@{}", t + 1),
                            reason: "final code does not keep this node unchanged".into(),
                        });
                    }
                }
                checked += 1;
            }
        }
    }
    Ok(Compatibility {
        blocks: spec.lambda,
        columns_checked: checked,
    })
}

/// Scalar final generator for merge coefficients `c[t][i]`.
fn merged_generator(
    spec: &MergeSpec,
    initial: &LrcCode,
    c: &[Vec<Element>],
    field: &Field,
) -> FieldMatrix {
    let ip = initial.params();
    let fp = spec.final_params().scalar();
    let ig = initial.generator();
    let mut gen = FieldMatrix::zeros(fp.k, fp.n());
    for t in 0..spec.lambda {
        for j in 0..ip.k {
            let row = t * ip.k + j;
            for pos in 0..ip.k + ip.local_count() {
                let fpos = spec.final_position(t, pos).expect("unchanged node");
                gen.set(row, fpos, ig.get(j, pos));
            }
            for i in 0..spec.g_final {
                let v = field.mul(c[t][i], ig.get(j, ip.k + ip.local_count() + i));
                gen.set(row, fp.k + fp.local_count() + i, v);
            }
        }
    }
    gen
}

/// Builds an initial pyramid code and a final code whose global parities are
/// nonzero combinations of the matching initial global parities of each
/// codeword. Coefficients are resampled until the final code verifies as
/// optimal-distance.
pub fn build_merge_pair(spec: &MergeSpec, field: &Field, seed: u64) -> Result<ConvertiblePair> {
    build_merge_pair_with_budget(spec, field, seed, lrc::DEFAULT_PATTERN_BUDGET)
}

pub fn build_merge_pair_with_budget(
    spec: &MergeSpec,
    field: &Field,
    seed: u64,
    budget: u128,
) -> Result<ConvertiblePair> {
    spec.validate()?;
    if spec.g_final > spec.g_initial {
        return Err(Error::UnsupportedRegime(format!(
            "gF = {} > gI = {}: bound only, no executable procedure",
            spec.g_final, spec.g_initial
        )));
    }
    let scalar_spec = MergeSpec { alpha: 1, ..*spec };
    let initial =
        lrc::construct_pyramid_with_budget(scalar_spec.initial_params(), field, seed, budget)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9E37_79B9_7F4A_7C15));
    let mut best = None;
    for _ in 0..MAX_ATTEMPTS {
        let c: Vec<Vec<Element>> = (0..spec.lambda)
            .map(|_| {
                (0..spec.g_final)
                    .map(|_| rng.random_range(1..field.q()) as Element)
                    .collect()
            })
            .collect();
        let gen = merged_generator(&scalar_spec, &initial, &c, field);
        let mut final_code =
            LrcCode::from_generator(scalar_spec.final_params(), field.clone(), gen)?;
        let report = final_code.verify_distance(budget)?;
        if report.d == scalar_spec.final_params().optimal_distance() {
            let (initial, final_code) = if spec.alpha == 1 {
                (initial, final_code)
            } else {
                (
                    initial.replicate(spec.alpha)?,
                    final_code.replicate(spec.alpha)?,
                )
            };
            return ConvertiblePair::new(*spec, initial, final_code, Some(c));
        }
        best = Some(report.d);
    }
    Err(Error::ConstructionFailed {
        attempts: MAX_ATTEMPTS,
        reason: format!("final distance {best:?} never reached gF + delta + 1"),
    })
}

fn support_blocks(view: &FieldMatrix, block: usize) -> Vec<bool> {
    (0..view.cols() / block)
        .map(|b| {
            (0..view.rows()).any(|r| (b * block..(b + 1) * block).any(|c| view.get(r, c) != 0))
        })
        .collect()
}

/// Node roles of a pair, after checking structurally that final global
/// parities are new, initial global parities retire, and unchanged local
/// parities keep their information sets.
pub fn classify_nodes(pair: &ConvertiblePair, spec: &MergeSpec) -> Result<NodeRoles> {
    if pair.spec() != spec {
        return Err(Error::InvalidSpec(
            "spec differs from the pair's spec".into(),
        ));
    }
    let ip = spec.initial_params();
    let fp = spec.final_params();
    let alpha = spec.alpha;
    let initial_views: Vec<((usize, usize), FieldMatrix)> = (0..spec.lambda)
        .flat_map(|t| (0..ip.n()).map(move |pos| (t, pos)))
        .map(|(t, pos)| ((t, pos), pair.initial_view(t, pos)))
        .collect();

    for pos in fp.global_positions() {
        let view = pair.final_view(pos);
        let label = format!("GF{}", pos - fp.global_positions().start + 1);
        if let Some(((t, ipos), _)) = initial_views.iter().find(|(_, v)| *v == view) {
            return Err(Error::RoleViolation {
                node: label,
                reason: format!("copies initial node {}@{}", ip.node(*ipos), t + 1),
            });
        }
        if let Some(j) = support_blocks(&view, alpha).iter().position(|&nz| !nz) {
            return Err(Error::RoleViolation {
                node: label,
                reason: format!("does not depend on information node X{}", j + 1),
            });
        }
    }

    let final_views: Vec<FieldMatrix> = (0..fp.n()).map(|pos| pair.final_view(pos)).collect();
    for ((t, pos), view) in &initial_views {
        let node = ip.node(*pos);
        match node.kind {
            NodeKind::GlobalParity => {
                if final_views.contains(view) {
                    return Err(Error::RoleViolation {
                        node: format!("{node}@{}", t + 1),
                        reason: "initial global parity survives into the final code".into(),
                    });
                }
                if ip.k > ip.r {
                    let support = support_blocks(view, alpha);
                    let own = t * ip.k..(t + 1) * ip.k;
                    if own.clone().any(|j| !support[j]) {
                        return Err(Error::RoleViolation {
                            node: format!("{node}@{}", t + 1),
                            reason: "initial global parity misses part of its codeword".into(),
                        });
                    }
                }
            }
            NodeKind::LocalParity => {
                let fpos = spec.final_position(*t, *pos).expect("local parity");
                let fview = &final_views[fpos];
                if fview != view {
                    return Err(Error::RoleViolation {
                        node: format!("{node}@{}", t + 1),
                        reason: "local parity serves a different information set".into(),
                    });
                }
            }
            NodeKind::Information => {}
        }
    }
    classify_layout(spec)
}

/// Per-node linear download maps, each `(downloaded symbols) x α`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DownloadPlan {
    pub info_maps: Vec<FieldMatrix>,
    pub global_maps: Vec<FieldMatrix>,
    pub local_maps: Vec<FieldMatrix>,
}

impl DownloadPlan {
    pub fn empty(spec: &MergeSpec) -> Self {
        let none = || FieldMatrix::zeros(0, spec.alpha);
        Self {
            info_maps: vec![none(); spec.lambda * spec.k_initial],
            global_maps: vec![none(); spec.lambda * spec.g_initial],
            local_maps: vec![none(); spec.lambda * spec.locals_per_codeword()],
        }
    }

    pub fn validate(&self, spec: &MergeSpec) -> Result<()> {
        let counts = [
            (
                "information",
                self.info_maps.len(),
                spec.lambda * spec.k_initial,
            ),
            (
                "initial global",
                self.global_maps.len(),
                spec.lambda * spec.g_initial,
            ),
            (
                "local",
                self.local_maps.len(),
                spec.lambda * spec.locals_per_codeword(),
            ),
        ];
        for (name, got, want) in counts {
            if got != want {
                return Err(Error::SizeMismatch(format!(
                    "{got} {name} maps, expected {want}"
                )));
            }
        }
        for m in self.maps() {
            if m.cols() != spec.alpha || m.rows() > spec.alpha {
                return Err(Error::DimensionMismatch(format!(
                    "download map {}x{} must be at most {a}x{a}",
                    m.rows(),
                    m.cols(),
                    a = spec.alpha
                )));
            }
        }
        Ok(())
    }

    /// All maps in download order: information, initial global, local.
    pub fn maps(&self) -> impl Iterator<Item = &FieldMatrix> {
        self.info_maps
            .iter()
            .chain(&self.global_maps)
            .chain(&self.local_maps)
    }

    pub fn beta(&self) -> Vec<usize> {
        self.info_maps.iter().map(FieldMatrix::rows).collect()
    }

    pub fn sigma(&self) -> Vec<usize> {
        self.global_maps.iter().map(FieldMatrix::rows).collect()
    }

    pub fn deltas(&self) -> Vec<usize> {
        self.local_maps.iter().map(FieldMatrix::rows).collect()
    }

    pub fn gamma_r(&self) -> usize {
        self.maps().map(FieldMatrix::rows).sum()
    }

    /// Every downloaded symbol as a functional of the final message, in download order.
    pub fn downloaded_views(&self, pair: &ConvertiblePair) -> Result<FieldMatrix> {
        let field = pair.field();
        let mut parts = Vec::new();
        for (j, m) in self.info_maps.iter().enumerate() {
            let (t, pos) = pair.initial_info_position(j);
            parts.push(m.mul(&pair.initial_view(t, pos), field)?);
        }
        for (i, m) in self.global_maps.iter().enumerate() {
            let (t, pos) = pair.initial_global_position(i);
            parts.push(m.mul(&pair.initial_view(t, pos), field)?);
        }
        for (a, m) in self.local_maps.iter().enumerate() {
            let (t, pos) = pair.initial_local_position(a);
            parts.push(m.mul(&pair.initial_view(t, pos), field)?);
        }
        let refs: Vec<&FieldMatrix> = parts.iter().collect();
        FieldMatrix::vstack(&refs, pair.spec().message_len())
    }
}

/// A download plan plus, for each new node, the `α x γR` map that turns the
/// downloaded symbols into its contents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConversionProcedure {
    pub name: String,
    pub plan: DownloadPlan,
    pub synthesis: Vec<FieldMatrix>,
}

impl ConversionProcedure {
    /// Derives synthesis maps for `plan` by solving for each new node in terms
    /// of the downloaded symbols. Fails when some new node is not determined by
    /// the downloads.
    pub fn from_plan(name: &str, pair: &ConvertiblePair, plan: DownloadPlan) -> Result<Self> {
        plan.validate(pair.spec())?;
        let field = pair.field();
        let downloaded_t = plan.downloaded_views(pair)?.transpose();
        let fp = pair.spec().final_params();
        let synthesis = fp
            .global_positions()
            .map(|pos| {
                let target = pair.final_code().node_generator(pos);
                match downloaded_t.solve(&target, field) {
                    Ok(x) => Ok(x.transpose()),
                    Err(Error::NoSolution) => Err(Error::CoordinatorViolation {
                        node: format!("GF{}", pos - fp.global_positions().start + 1),
                    }),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            name: name.into(),
            plan,
            synthesis,
        })
    }
}

/// Re-encoding baseline: read every information node in full and recompute
/// the final global parities.
pub fn default_reencode_procedure(
    pair: &ConvertiblePair,
    spec: &MergeSpec,
) -> Result<ConversionProcedure> {
    if pair.spec() != spec {
        return Err(Error::InvalidSpec(
            "spec differs from the pair's spec".into(),
        ));
    }
    let mut plan = DownloadPlan::empty(spec);
    for m in plan.info_maps.iter_mut() {
        *m = FieldMatrix::identity(spec.alpha);
    }
    // downloaded symbols are exactly the message coordinates, in order
    let synthesis = spec
        .final_params()
        .global_positions()
        .map(|pos| pair.final_code().node_generator(pos).transpose())
        .collect();
    Ok(ConversionProcedure {
        name: "default".into(),
        plan,
        synthesis,
    })
}

/// Reads the first `gF` initial global parities of every codeword in full and
/// combines them with the pair's merge coefficients.
pub fn merge_optimal_procedure(
    pair: &ConvertiblePair,
    spec: &MergeSpec,
) -> Result<ConversionProcedure> {
    if pair.spec() != spec {
        return Err(Error::InvalidSpec(
            "spec differs from the pair's spec".into(),
        ));
    }
    if spec.g_final > spec.g_initial {
        return Err(Error::UnsupportedRegime(format!(
            "gF = {} > gI = {}: bound only, no executable procedure",
            spec.g_final, spec.g_initial
        )));
    }
    let c = pair
        .coefficients()
        .ok_or_else(|| Error::InvalidParams("pair carries no merge coefficients".into()))?;
    let mut plan = DownloadPlan::empty(spec);
    for t in 0..spec.lambda {
        for i in 0..spec.g_final {
            plan.global_maps[t * spec.g_initial + i] = FieldMatrix::identity(spec.alpha);
        }
    }
    let total = spec.lambda * spec.g_final * spec.alpha;
    let synthesis = (0..spec.g_final)
        .map(|i| {
            let mut m = FieldMatrix::zeros(spec.alpha, total);
            for (t, row) in c.iter().enumerate() {
                let offset = (t * spec.g_final + i) * spec.alpha;
                for s in 0..spec.alpha {
                    m.set(s, offset + s, row[i]);
                }
            }
            m
        })
        .collect();
    Ok(ConversionProcedure {
        name: "merge-optimal".into(),
        plan,
        synthesis,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandwidthReport {
    pub beta: Vec<usize>,
    pub sigma: Vec<usize>,
    pub deltas: Vec<usize>,
    #[serde(rename = "gammaR")]
    pub gamma_r: usize,
    #[serde(rename = "gammaW")]
    pub gamma_w: usize,
    pub bound: Symbols,
    pub gap: Symbols,
}

impl BandwidthReport {
    pub fn for_plan(plan: &DownloadPlan, spec: &MergeSpec) -> Result<Self> {
        let bound = bounds::lower_bound(spec)?;
        let gamma_r = plan.gamma_r();
        Ok(Self {
            beta: plan.beta(),
            sigma: plan.sigma(),
            deltas: plan.deltas(),
            gamma_r,
            gamma_w: spec.g_final * spec.alpha,
            bound,
            gap: Symbols::from(gamma_r) - bound,
        })
    }
}

/// Result of running a procedure on one message, correct or not.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConversionRun {
    pub codeword: Codeword,
    pub report: BandwidthReport,
    /// First final node whose synthesized contents differ from direct encoding.
    pub mismatch: Option<String>,
}

impl ConversionRun {
    pub fn correct(&self) -> bool {
        self.mismatch.is_none()
    }
}

/// Runs a conversion without failing on an incorrect output.
pub fn run(
    procedure: &ConversionProcedure,
    pair: &ConvertiblePair,
    message: &[Element],
) -> Result<ConversionRun> {
    let spec = pair.spec();
    if message.len() != spec.message_len() {
        return Err(Error::LengthMismatch {
            expected: spec.message_len(),
            actual: message.len(),
        });
    }
    procedure.plan.validate(spec)?;
    let field = pair.field();
    let ip = spec.initial_params();
    let fp = spec.final_params();
    let initial: Vec<Codeword> = pair
        .split_message(message)
        .into_iter()
        .map(|m| pair.initial().encode(m))
        .collect::<Result<_>>()?;

    let plan = &procedure.plan;
    let mut downloaded = Vec::with_capacity(plan.gamma_r());
    let mut fetch = |map: &FieldMatrix, (t, pos): (usize, usize)| -> Result<()> {
        downloaded.extend(map.mul_vec(initial[t].node(&ip, pos), field)?);
        Ok(())
    };
    for (j, m) in plan.info_maps.iter().enumerate() {
        fetch(m, pair.initial_info_position(j))?;
    }
    for (i, m) in plan.global_maps.iter().enumerate() {
        fetch(m, pair.initial_global_position(i))?;
    }
    for (a, m) in plan.local_maps.iter().enumerate() {
        fetch(m, pair.initial_local_position(a))?;
    }

    if procedure.synthesis.len() != spec.g_final {
        return Err(Error::SizeMismatch(format!(
            "{} synthesis maps for {} new nodes",
            procedure.synthesis.len(),
            spec.g_final
        )));
    }
    let mut symbols = vec![0; fp.n() * spec.alpha];
    for t in 0..spec.lambda {
        for pos in 0..ip.k + ip.local_count() {
            let fpos = spec.final_position(t, pos).expect("unchanged node");
            symbols[fp.node_columns(fpos)].copy_from_slice(initial[t].node(&ip, pos));
        }
    }
    for (i, synth) in procedure.synthesis.iter().enumerate() {
        let contents = synth.mul_vec(&downloaded, field)?;
        if contents.len() != spec.alpha {
            return Err(Error::DimensionMismatch(
                "synthesis map must produce alpha symbols".into(),
            ));
        }
        let pos = fp.global_positions().start + i;
        symbols[fp.node_columns(pos)].copy_from_slice(&contents);
    }
    let codeword = Codeword { symbols };
    let direct = pair.final_code().encode(message)?;
    let mismatch = (0..fp.n())
        .find(|&pos| codeword.node(&fp, pos) != direct.node(&fp, pos))
        .map(|pos| fp.node(pos).to_string());
    Ok(ConversionRun {
        codeword,
        report: BandwidthReport::for_plan(plan, spec)?,
        mismatch,
    })
}

/// Runs a conversion and insists on a bit-exact match with direct final
/// encoding. A correct run below the lower bound is reported as a bound violation.
pub fn execute(
    procedure: &ConversionProcedure,
    pair: &ConvertiblePair,
    message: &[Element],
) -> Result<(Codeword, BandwidthReport)> {
    let out = run(procedure, pair, message)?;
    if let Some(node) = out.mismatch {
        return Err(Error::ConversionIncorrect { node });
    }
    if out.report.gap.is_negative() {
        return Err(Error::BoundViolation {
            achieved: out.report.gamma_r.to_string(),
            bound: out.report.bound.to_string(),
        });
    }
    Ok((out.codeword, out.report))
}

pub fn random_message(spec: &MergeSpec, field: &Field, rng: &mut impl Rng) -> Vec<Element> {
    (0..spec.message_len())
        .map(|_| rng.random_range(0..field.q()) as Element)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (MergeSpec, ConvertiblePair) {
        let spec = MergeSpec::new(4, 2, 2, 1, 2, 2, 1).unwrap();
        let pair = build_merge_pair(&spec, &Field::gf256(), 3).unwrap();
        (spec, pair)
    }

    #[test]
    fn spec_derived_quantities() {
        let s = MergeSpec::new(9, 3, 3, 1, 2, 4, 1).unwrap();
        assert_eq!((s.k_final(), s.mu_initial(), s.mu_final()), (18, 3, 6));
        assert_eq!((s.n_initial(), s.n_final()), (15, 28));
        assert!(matches!(
            MergeSpec::new(4, 2, 2, 1, 1, 2, 1),
            Err(Error::InvalidSpec(_))
        ));
        assert!(matches!(
            MergeSpec::new(5, 2, 2, 1, 2, 2, 1),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn spec_json_field_names() {
        let s: MergeSpec =
            serde_json::from_str(r#"{"kI":4,"gI":2,"r":2,"delta":1,"lambdaI":2,"gF":2}"#).unwrap();
        assert_eq!(s, MergeSpec::new(4, 2, 2, 1, 2, 2, 1).unwrap());
        let v = serde_json::to_value(s).unwrap();
        assert_eq!(v["lambdaI"], 2);
    }

    #[test]
    fn pair_distances() {
        let (_, pair) = small();
        assert_eq!(pair.initial().distance().unwrap().d, 4);
        assert_eq!(pair.final_code().distance().unwrap().d, 4);
        let spec = MergeSpec::new(2, 1, 2, 1, 2, 1, 1).unwrap();
        let pair = build_merge_pair(&spec, &Field::gf256(), 0).unwrap();
        assert_eq!(pair.final_code().distance().unwrap().d, 3);
    }

    #[test]
    fn unsupported_regime() {
        let spec = MergeSpec::new(4, 1, 2, 1, 2, 2, 1).unwrap();
        assert!(matches!(
            build_merge_pair(&spec, &Field::gf256(), 0),
            Err(Error::UnsupportedRegime(_))
        ));
    }

    #[test]
    fn roles_from_pair() {
        let (spec, pair) = small();
        let roles = classify_nodes(&pair, &spec).unwrap();
        assert_eq!(roles.count(NodeRole::New), 2);
        assert_eq!(roles.count(NodeRole::Retired), 4);
        assert_eq!(roles.count(NodeRole::Unchanged), 12);
    }

    #[test]
    fn roles_for_figure_three_layout() {
        let spec = MergeSpec::new(9, 3, 3, 1, 2, 4, 1).unwrap();
        let roles = classify_layout(&spec).unwrap();
        assert_eq!(roles.count(NodeRole::New), 4);
        assert_eq!(roles.count(NodeRole::Retired), 6);
        assert_eq!(roles.count(NodeRole::Unchanged), 24);
    }

    #[test]
    fn copied_global_parity_is_a_role_violation() {
        let (spec, pair) = small();
        let c = vec![vec![1, 1], vec![0, 1]];
        let gen = merged_generator(&spec, pair.initial(), &c, pair.field());
        let fin = LrcCode::from_generator(spec.final_params(), pair.field().clone(), gen).unwrap();
        let bad = ConvertiblePair::new(spec, pair.initial().clone(), fin, Some(c)).unwrap();
        let err = classify_nodes(&bad, &spec).unwrap_err();
        assert!(
            matches!(err, Error::RoleViolation { ref node, .. } if node == "GF1"),
            "{err}"
        );
    }

    #[test]
    fn changed_local_group_is_rejected() {
        let (spec, pair) = small();
        let mut gen = pair.final_code().generator().clone();
        gen.set(0, 8, gen.get(0, 8) ^ 1); // first final local parity
        let fin = LrcCode::from_generator(spec.final_params(), pair.field().clone(), gen).unwrap();
        assert!(matches!(
            ConvertiblePair::new(spec, pair.initial().clone(), fin, None),
            Err(Error::RoleViolation { .. })
        ));
    }

    #[test]
    fn procedures_bandwidth() {
        let (spec, pair) = small();
        let default = default_reencode_procedure(&pair, &spec).unwrap();
        assert_eq!(default.plan.gamma_r(), 8);
        let merge = merge_optimal_procedure(&pair, &spec).unwrap();
        assert_eq!(merge.plan.gamma_r(), 4);
        assert_eq!(merge.plan.sigma(), vec![1, 1, 1, 1]);
    }

    #[test]
    fn execute_matches_direct_encoding() {
        let (spec, pair) = small();
        let field = pair.field().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for proc in [
            default_reencode_procedure(&pair, &spec).unwrap(),
            merge_optimal_procedure(&pair, &spec).unwrap(),
        ] {
            let m = random_message(&spec, &field, &mut rng);
            let (cw, report) = execute(&proc, &pair, &m).unwrap();
            assert_eq!(cw, pair.final_code().encode(&m).unwrap());
            assert_eq!(report.gamma_w, 2);
            let zero = execute(&proc, &pair, &[0; 8]).unwrap().0;
            assert!(zero.symbols.iter().all(|&x| x == 0));
        }
    }

    #[test]
    fn broken_synthesis_is_detected() {
        let (spec, pair) = small();
        let mut proc = merge_optimal_procedure(&pair, &spec).unwrap();
        proc.synthesis[0].set(0, 0, 0);
        let m: Vec<Element> = (1..=8).collect();
        assert!(matches!(
            execute(&proc, &pair, &m),
            Err(Error::ConversionIncorrect { ref node }) if node == "G1"
        ));
    }

    #[test]
    fn derived_synthesis_matches_handwritten() {
        let (spec, pair) = small();
        let merge = merge_optimal_procedure(&pair, &spec).unwrap();
        let derived = ConversionProcedure::from_plan("derived", &pair, merge.plan.clone()).unwrap();
        assert_eq!(derived.synthesis, merge.synthesis);
        let mut starved = merge.plan.clone();
        starved.global_maps[0] = FieldMatrix::zeros(0, 1);
        assert!(matches!(
            ConversionProcedure::from_plan("starved", &pair, starved),
            Err(Error::CoordinatorViolation { .. })
        ));
    }

    #[test]
    fn zero_final_parities() {
        let spec = MergeSpec::new(4, 2, 2, 1, 2, 0, 1).unwrap();
        let pair = build_merge_pair(&spec, &Field::gf256(), 0).unwrap();
        let proc = merge_optimal_procedure(&pair, &spec).unwrap();
        let (_, report) = execute(&proc, &pair, &[5; 8]).unwrap();
        assert_eq!(report.gamma_r, 0);
        assert_eq!(report.gap, Symbols::int(0));
    }

    #[test]
    fn sub_packetized_merge() {
        let spec = MergeSpec::new(4, 2, 2, 1, 2, 2, 2).unwrap();
        let pair = build_merge_pair(&spec, &Field::gf256(), 5).unwrap();
        let proc = merge_optimal_procedure(&pair, &spec).unwrap();
        let m: Vec<Element> = (0..16).map(|x| x * 13 + 1).collect();
        let (_, report) = execute(&proc, &pair, &m).unwrap();
        assert_eq!(report.gamma_r, 8);
        assert_eq!(report.gap, Symbols::int(0));
    }
}
