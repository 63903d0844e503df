//! Entropies of linear functions of a uniform message, computed as ranks.
//!
//! A [`LinearView`] is a set of observed symbols written as linear functionals
//! of the message. For a uniform message over `GF(q)` the entropy of a set of
//! views, in `log q` units, is the rank of their stacked rows.

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{self, DownloadEntropies, Lemma5Check};
use crate::conversion::{ConvertiblePair, DownloadPlan};
use crate::error::{Error, Result};
use crate::galois::{Element, Field, FieldMatrix};
use crate::lrc::{LrcCode, NodeKind};
use crate::search;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearView {
    pub label: String,
    pub matrix: FieldMatrix,
}

impl LinearView {
    pub fn new(label: impl Into<String>, matrix: FieldMatrix) -> Self {
        Self {
            label: label.into(),
            matrix,
        }
    }
}

/// Entropy in field symbols, with the α-normalized value alongside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entropy {
    pub symbols: usize,
    pub alpha: usize,
}

impl Entropy {
    pub fn normalized(&self) -> bounds::Symbols {
        bounds::Symbols::from(self.symbols).per_alpha(self.alpha)
    }
}

#[derive(Debug, Clone)]
pub struct EntropyOracle {
    field: Field,
    dim: usize,
    alpha: usize,
}

impl EntropyOracle {
    pub fn new(field: Field, dim: usize, alpha: usize) -> Self {
        Self { field, dim, alpha }
    }

    pub fn for_code(code: &LrcCode) -> Self {
        let p = code.params();
        Self::new(code.field().clone(), p.message_len(), p.alpha)
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn stack<'a>(&self, views: impl IntoIterator<Item = &'a LinearView>) -> Result<FieldMatrix> {
        let parts: Vec<&FieldMatrix> = views.into_iter().map(|v| &v.matrix).collect();
        if let Some(bad) = parts.iter().find(|m| m.cols() != self.dim) {
            return Err(Error::DimensionMismatch(format!(
                "view has {} columns, message has {}",
                bad.cols(),
                self.dim
            )));
        }
        FieldMatrix::vstack(&parts, self.dim)
    }

    pub fn entropy(&self, views: &[&LinearView]) -> Result<usize> {
        Ok(self.stack(views.iter().copied())?.rank(&self.field))
    }

    pub fn entropy_report(&self, views: &[&LinearView]) -> Result<Entropy> {
        Ok(Entropy {
            symbols: self.entropy(views)?,
            alpha: self.alpha,
        })
    }

    /// `H(a | b) = rank([a; b]) - rank(b)`.
    pub fn conditional(&self, a: &[&LinearView], b: &[&LinearView]) -> Result<usize> {
        let joint: Vec<&LinearView> = a.iter().chain(b).copied().collect();
        Ok(self.entropy(&joint)? - self.entropy(b)?)
    }

    /// `I(a; b | c) = H(a|c) + H(b|c) - H(a,b|c)`.
    pub fn mutual_information(
        &self,
        a: &[&LinearView],
        b: &[&LinearView],
        given: &[&LinearView],
    ) -> Result<usize> {
        let ab: Vec<&LinearView> = a.iter().chain(b).copied().collect();
        Ok(self.conditional(a, given)? + self.conditional(b, given)?
            - self.conditional(&ab, given)?)
    }
}

/// One view per node, in layout order.
pub fn code_views(code: &LrcCode) -> Vec<LinearView> {
    let p = code.params();
    (0..p.n())
        .map(|pos| {
            LinearView::new(
                p.node(pos).to_string(),
                code.node_generator(pos).transpose(),
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail {
        witness: Vec<String>,
        detail: String,
    },
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    #[serde(flatten)]
    pub verdict: Verdict,
    /// Number of subsets or instances examined.
    pub evaluated: u128,
}

impl CheckReport {
    fn new(check: &str, verdict: Verdict, evaluated: u128) -> Self {
        Self {
            check: check.into(),
            verdict,
            evaluated,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }
}

fn fail(witness: Vec<String>, detail: impl Into<String>) -> Verdict {
    Verdict::Fail {
        witness,
        detail: detail.into(),
    }
}

/// Total entropy of all nodes equals `kα`.
pub fn check_prop1(code: &LrcCode) -> Result<CheckReport> {
    let oracle = EntropyOracle::for_code(code);
    let views = code_views(code);
    let refs: Vec<&LinearView> = views.iter().collect();
    let h = oracle.entropy(&refs)?;
    let want = code.params().message_len();
    let verdict = if h == want {
        Verdict::Pass
    } else {
        fail(vec![], format!("H(all nodes) = {h}, expected {want}"))
    };
    Ok(CheckReport::new("prop1", verdict, 1))
}

/// Any `r` nodes drawn from one local group and the global parities are
/// independent and uniform given the information outside that group.
pub fn check_prop2(code: &LrcCode, budget: u128) -> Result<CheckReport> {
    check_prop2_up_to(code, code.params().r, budget)
}

/// [`check_prop2`] with subsets of up to `max_size` nodes; sizes above `r`
/// are expected to fail.
pub fn check_prop2_up_to(code: &LrcCode, max_size: usize, budget: u128) -> Result<CheckReport> {
    let p = *code.params();
    let per_group = p.r + p.delta + p.g;
    let needed = p.mu() as u128
        * (0..=max_size)
            .map(|s| search::binomial(per_group, s))
            .sum::<u128>();
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let oracle = EntropyOracle::for_code(code);
    let views = code_views(code);
    let mut evaluated = 0;
    for tau in 0..p.mu() {
        let candidates: Vec<usize> = p
            .global_positions()
            .chain(p.group_local_positions(tau))
            .chain(p.group_info_positions(tau))
            .collect();
        let outside: Vec<&LinearView> = (0..p.k)
            .filter(|j| !p.group_info_positions(tau).contains(j))
            .map(|j| &views[j])
            .collect();
        for size in 0..=max_size.min(candidates.len()) {
            let (hit, seen) = search::first_subset(candidates.len(), size, |s| {
                let chosen: Vec<&LinearView> = s.iter().map(|&i| &views[candidates[i]]).collect();
                oracle.conditional(&chosen, &outside) != Ok(size * p.alpha)
            });
            evaluated += seen;
            if let Some(s) = hit {
                let mut witness: Vec<usize> = s.iter().map(|&i| candidates[i]).collect();
                witness.sort_unstable();
                let chosen: Vec<&LinearView> = witness.iter().map(|&pos| &views[pos]).collect();
                let h = oracle.conditional(&chosen, &outside)?;
                return Ok(CheckReport::new(
                    "prop2",
                    fail(
                        witness.iter().map(|&pos| p.node(pos).to_string()).collect(),
                        format!(
                            "group {}: conditional entropy {h}, expected {}",
                            tau + 1,
                            size * p.alpha
                        ),
                    ),
                    evaluated,
                ));
            }
        }
    }
    Ok(CheckReport::new("prop2", Verdict::Pass, evaluated))
}

/// Every global parity depends on every information node.
pub fn check_prop3(code: &LrcCode) -> CheckReport {
    let p = code.params();
    let gen = code.generator();
    let mut evaluated = 0;
    for pos in p.global_positions() {
        for j in 0..p.k {
            evaluated += 1;
            let depends = (j * p.alpha..(j + 1) * p.alpha)
                .any(|row| p.node_columns(pos).any(|col| gen.get(row, col) != 0));
            if !depends {
                return CheckReport::new(
                    "prop3",
                    fail(
                        vec![p.node(pos).to_string(), p.node(j).to_string()],
                        format!("{} does not depend on {}", p.node(pos), p.node(j)),
                    ),
                    evaluated,
                );
            }
        }
    }
    CheckReport::new("prop3", Verdict::Pass, evaluated)
}

/// Any `g + δ` nodes are determined by the remaining nodes.
pub fn check_optimal_distance_entropy(code: &LrcCode, budget: u128) -> Result<CheckReport> {
    let p = code.params();
    let max = p.g + p.delta;
    check_pattern_entropy(code, max, budget, "dist-entropy")
}

fn check_pattern_entropy(
    code: &LrcCode,
    max: usize,
    budget: u128,
    name: &str,
) -> Result<CheckReport> {
    let p = code.params();
    let n = p.n();
    let needed: u128 = (0..=max.min(n)).map(|s| search::binomial(n, s)).sum();
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let oracle = EntropyOracle::for_code(code);
    let views = code_views(code);
    let mut evaluated = 0;
    for size in 0..=max.min(n) {
        let (hit, seen) = search::first_subset(n, size, |s| {
            !matches!(pattern_entropy(&oracle, &views, s), Ok(0))
        });
        evaluated += seen;
        if let Some(s) = hit {
            let h = pattern_entropy(&oracle, &views, &s)?;
            return Ok(CheckReport::new(
                name,
                fail(
                    s.iter().map(|&pos| p.node(pos).to_string()).collect(),
                    format!("H(pattern | rest) = {h}"),
                ),
                evaluated,
            ));
        }
    }
    Ok(CheckReport::new(name, Verdict::Pass, evaluated))
}

/// `H(pattern | all other nodes)`.
pub fn pattern_entropy(
    oracle: &EntropyOracle,
    views: &[LinearView],
    pattern: &[usize],
) -> Result<usize> {
    let (inside, outside): (Vec<_>, Vec<_>) = views
        .iter()
        .enumerate()
        .partition(|(i, _)| pattern.contains(i));
    let inside: Vec<&LinearView> = inside.into_iter().map(|(_, v)| v).collect();
    let outside: Vec<&LinearView> = outside.into_iter().map(|(_, v)| v).collect();
    oracle.conditional(&inside, &outside)
}

/// Runs checks by name: `prop1`, `prop2`, `prop3`, `dist-entropy`.
pub fn run_checks(code: &LrcCode, checks: &[&str], budget: u128) -> Result<Vec<CheckReport>> {
    checks
        .iter()
        .map(|&c| match c {
            "prop1" => check_prop1(code),
            "prop2" => check_prop2(code, budget),
            "prop3" => Ok(check_prop3(code)),
            "dist-entropy" => check_optimal_distance_entropy(code, budget),
            other => Err(Error::Malformed(format!("unknown check {other:?}"))),
        })
        .collect()
}

/// Random linear views of a random `dim`-dimensional message.
fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, field: &Field) -> FieldMatrix {
    FieldMatrix::from_fn(rows, cols, |_, _| rng.random_range(0..field.q()) as Element)
}

/// A sampled instance of the conditional mutual information bound: blocks
/// `Z_i` are random linear views of a shared message and `f_i` random linear
/// functions of them.
#[derive(Debug, Clone)]
pub struct Lemma3Instance {
    pub f: Vec<LinearView>,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub d: Vec<usize>,
    pub a_sub: Vec<usize>,
    pub b_sub: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lemma3Values {
    pub mutual_information: usize,
    pub bound: usize,
}

impl Lemma3Instance {
    fn pick<'a>(&'a self, idx: &[usize]) -> Vec<&'a LinearView> {
        idx.iter().map(|&i| &self.f[i]).collect()
    }

    /// The independence hypothesis, checked on the functions given `f_D`:
    /// the conditional entropies of the `f_i` outside `A' ∪ B'` add up.
    pub fn hypothesis_holds(&self, oracle: &EntropyOracle) -> Result<bool> {
        let rest: Vec<usize> = self
            .a
            .iter()
            .chain(&self.b)
            .filter(|i| !self.a_sub.contains(i) && !self.b_sub.contains(i))
            .copied()
            .collect();
        let d = self.pick(&self.d);
        let joint = oracle.conditional(&self.pick(&rest), &d)?;
        let mut sum = 0;
        for &i in &rest {
            sum += oracle.conditional(&[&self.f[i]], &d)?;
        }
        Ok(joint == sum)
    }

    pub fn evaluate(&self, oracle: &EntropyOracle) -> Result<Lemma3Values> {
        let d = self.pick(&self.d);
        Ok(Lemma3Values {
            mutual_information: oracle.mutual_information(
                &self.pick(&self.a),
                &self.pick(&self.b),
                &d,
            )?,
            bound: oracle.conditional(&self.pick(&self.a_sub), &d)?
                + oracle.conditional(&self.pick(&self.b_sub), &d)?,
        })
    }
}

const MAX_DIM: usize = 8;
const RESAMPLE: usize = 64;

fn sample_lemma3(rng: &mut impl Rng, field: &Field) -> Lemma3Instance {
    let dim = rng.random_range(2..=MAX_DIM);
    let n = rng.random_range(3..=6);
    let f = (0..n)
        .map(|i| {
            let rows = rng.random_range(1..=3);
            let z = random_matrix(rng, rows, dim, field);
            let outputs = rng.random_range(1..=rows);
            let map = random_matrix(rng, outputs, rows, field);
            let view = map.mul(&z, field).expect("conformable");
            LinearView::new(format!("f{}", i + 1), view)
        })
        .collect();
    // assign each index to A, B, D or nothing, with A and B nonempty
    let mut slots: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
    slots[0] = 0;
    slots[1] = 1;
    let of = |k: usize| (0..n).filter(|&i| slots[i] == k).collect::<Vec<_>>();
    let (a, b, d) = (of(0), of(1), of(2));
    let a_sub = a.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
    let b_sub = b.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
    Lemma3Instance {
        f,
        a,
        b,
        d,
        a_sub,
        b_sub,
    }
}

/// Samples `trials` instances over `GF(16)` (resampling those that fail the
/// hypothesis) and checks `I(f_A; f_B | f_D) <= H(f_A'|f_D) + H(f_B'|f_D)`.
pub fn check_lemma3(trials: usize, seed: u64) -> Result<CheckReport> {
    let field = Field::gf16();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..trials {
        let mut accepted = None;
        for _ in 0..RESAMPLE {
            let inst = sample_lemma3(&mut rng, &field);
            let oracle = EntropyOracle::new(field.clone(), inst.f[0].matrix.cols(), 1);
            if inst.hypothesis_holds(&oracle)? {
                accepted = Some((inst, oracle));
                break;
            }
        }
        let (inst, oracle) = accepted.ok_or(Error::HypothesisUnsatisfied { attempts: RESAMPLE })?;
        let v = inst.evaluate(&oracle)?;
        if v.mutual_information > v.bound {
            return Ok(CheckReport::new(
                "lemma3",
                fail(
                    vec![format!("trial {t}")],
                    format!("I = {} > {}", v.mutual_information, v.bound),
                ),
                t as u128 + 1,
            ));
        }
    }
    Ok(CheckReport::new("lemma3", Verdict::Pass, trials as u128))
}

#[derive(Debug, Clone)]
pub struct Lemma4Instance {
    pub f: Vec<LinearView>,
    pub a: usize,
    pub independent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lemma4Values {
    pub min_subset: usize,
    pub sum_individual: usize,
    pub joint: usize,
}

impl Lemma4Instance {
    pub fn evaluate(&self, oracle: &EntropyOracle) -> Result<Lemma4Values> {
        let mut min_subset = usize::MAX;
        for subset in (0..self.f.len()).combinations(self.a) {
            let views: Vec<&LinearView> = subset.iter().map(|&i| &self.f[i]).collect();
            min_subset = min_subset.min(oracle.entropy(&views)?);
        }
        let mut sum_individual = 0;
        for v in &self.f {
            sum_individual += oracle.entropy(&[v])?;
        }
        let all: Vec<&LinearView> = self.f.iter().collect();
        Ok(Lemma4Values {
            min_subset,
            sum_individual,
            joint: oracle.entropy(&all)?,
        })
    }

    /// `b · min <= a · Σ H(f_i)`, and `b · min <= a · H(f_[b])` for independent blocks.
    pub fn holds(&self, v: &Lemma4Values) -> bool {
        let (a, b) = (self.a, self.f.len());
        b * v.min_subset <= a * v.sum_individual
            && (!self.independent || b * v.min_subset <= a * v.joint)
    }
}

fn sample_lemma4(rng: &mut impl Rng, field: &Field, independent: bool) -> Lemma4Instance {
    let b = rng.random_range(1..=6);
    let a = rng.random_range(1..=b);
    let widths: Vec<usize> = (0..b).map(|_| rng.random_range(1..=2)).collect();
    let dim = if independent {
        widths.iter().sum()
    } else {
        rng.random_range(2..=MAX_DIM)
    };
    let mut offset = 0;
    let f = widths
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let z = if independent {
                // Z_i reads its own coordinates
                let z = FieldMatrix::from_fn(w, dim, |r, c| (c == offset + r) as Element);
                offset += w;
                z
            } else {
                random_matrix(rng, w, dim, field)
            };
            let outputs = rng.random_range(1..=w);
            let map = random_matrix(rng, outputs, w, field);
            LinearView::new(
                format!("f{}", i + 1),
                map.mul(&z, field).expect("conformable"),
            )
        })
        .collect();
    Lemma4Instance { f, a, independent }
}

/// Samples `trials` instances over `GF(16)`, alternating dependent and
/// independent blocks, and checks the subset-minimum bounds.
pub fn check_lemma4(trials: usize, seed: u64) -> Result<CheckReport> {
    let field = Field::gf16();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..trials {
        let inst = sample_lemma4(&mut rng, &field, t % 2 == 1);
        let oracle = EntropyOracle::new(field.clone(), inst.f[0].matrix.cols(), 1);
        let v = inst.evaluate(&oracle)?;
        if !inst.holds(&v) {
            return Ok(CheckReport::new(
                "lemma4",
                fail(
                    vec![format!("trial {t}")],
                    format!(
                        "a={}, b={}: min {} vs sum {} / joint {}",
                        inst.a,
                        inst.f.len(),
                        v.min_subset,
                        v.sum_individual,
                        v.joint
                    ),
                ),
                t as u128 + 1,
            ));
        }
    }
    Ok(CheckReport::new("lemma4", Verdict::Pass, trials as u128))
}

/// Entropies of the downloaded data: joint per codeword for initial global
/// parities, per node for information and local parities.
pub fn download_entropies(
    pair: &ConvertiblePair,
    plan: &DownloadPlan,
) -> Result<DownloadEntropies> {
    let spec = pair.spec();
    plan.validate(spec)?;
    let field = pair.field();
    let oracle = EntropyOracle::new(field.clone(), spec.message_len(), spec.alpha);
    let view = |map: &FieldMatrix, (t, pos): (usize, usize)| -> Result<LinearView> {
        Ok(LinearView::new(
            format!("{t}:{pos}"),
            map.mul(&pair.initial_view(t, pos), field)?,
        ))
    };
    let mut u_blocks = Vec::with_capacity(spec.lambda);
    for t in 0..spec.lambda {
        let views = (0..spec.g_initial)
            .map(|i| {
                let idx = t * spec.g_initial + i;
                view(&plan.global_maps[idx], pair.initial_global_position(idx))
            })
            .collect::<Result<Vec<_>>>()?;
        u_blocks.push(oracle.entropy(&views.iter().collect::<Vec<_>>())?);
    }
    let mut v = Vec::new();
    for (j, m) in plan.info_maps.iter().enumerate() {
        v.push(oracle.entropy(&[&view(m, pair.initial_info_position(j))?])?);
    }
    let mut w = Vec::new();
    for (a, m) in plan.local_maps.iter().enumerate() {
        w.push(oracle.entropy(&[&view(m, pair.initial_local_position(a))?])?);
    }
    Ok(DownloadEntropies { u_blocks, v, w })
}

/// The download constraint evaluated on rank-entropies of a plan.
pub fn check_download_constraint(
    pair: &ConvertiblePair,
    plan: &DownloadPlan,
) -> Result<Lemma5Check> {
    bounds::check_lemma5(&download_entropies(pair, plan)?, pair.spec())
}

/// Each new node has zero entropy given the downloaded data.
pub fn check_coordinator(pair: &ConvertiblePair, plan: &DownloadPlan) -> Result<CheckReport> {
    let spec = pair.spec();
    let oracle = EntropyOracle::new(pair.field().clone(), spec.message_len(), spec.alpha);
    let downloaded = LinearView::new("downloaded", plan.downloaded_views(pair)?);
    let fp = spec.final_params();
    for (i, pos) in fp.global_positions().enumerate() {
        let new = LinearView::new(format!("GF{}", i + 1), pair.final_view(pos));
        let h = oracle.conditional(&[&new], &[&downloaded])?;
        if h != 0 {
            return Ok(CheckReport::new(
                "coordinator",
                fail(
                    vec![new.label.clone()],
                    format!("H(new | downloaded) = {h}"),
                ),
                i as u128 + 1,
            ));
        }
    }
    Ok(CheckReport::new(
        "coordinator",
        Verdict::Pass,
        spec.g_final as u128,
    ))
}

/// The λ initial codewords are jointly independent.
pub fn check_codeword_independence(pair: &ConvertiblePair) -> Result<CheckReport> {
    let spec = pair.spec();
    let ip = spec.initial_params();
    let oracle = EntropyOracle::new(pair.field().clone(), spec.message_len(), spec.alpha);
    let per_codeword: Vec<Vec<LinearView>> = (0..spec.lambda)
        .map(|t| {
            (0..ip.n())
                .map(|pos| {
                    LinearView::new(
                        format!("{}@{}", ip.node(pos), t + 1),
                        pair.initial_view(t, pos),
                    )
                })
                .collect()
        })
        .collect();
    let mut evaluated = 0;
    for (t, u) in (0..spec.lambda).tuple_combinations() {
        evaluated += 1;
        let a: Vec<&LinearView> = per_codeword[t].iter().collect();
        let b: Vec<&LinearView> = per_codeword[u].iter().collect();
        let joint: Vec<&LinearView> = a.iter().chain(&b).copied().collect();
        let (ha, hb, hj) = (
            oracle.entropy(&a)?,
            oracle.entropy(&b)?,
            oracle.entropy(&joint)?,
        );
        if hj != ha + hb {
            return Ok(CheckReport::new(
                "independence",
                fail(
                    vec![format!("codeword {}", t + 1), format!("codeword {}", u + 1)],
                    format!("H = {hj}, sum = {}", ha + hb),
                ),
                evaluated,
            ));
        }
    }
    Ok(CheckReport::new("independence", Verdict::Pass, evaluated))
}

/// Conditional entropy of each local parity given its group's information.
pub fn local_given_group(code: &LrcCode) -> Result<Vec<usize>> {
    let p = code.params();
    let oracle = EntropyOracle::for_code(code);
    let views = code_views(code);
    (0..p.n())
        .filter(|&pos| p.node(pos).kind == NodeKind::LocalParity)
        .map(|pos| {
            let tau = p.node(pos).group.expect("local parity has a group");
            let group: Vec<&LinearView> = p.group_info_positions(tau).map(|j| &views[j]).collect();
            oracle.conditional(&[&views[pos]], &group)
        })
        .collect()
}
