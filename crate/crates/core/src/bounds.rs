//! Read-bandwidth lower bound for stable global merges, the achievable cost of
//! the known constructions, and the per-procedure download constraint the bound
//! is derived from. Every quantity is an exact rational number of symbols.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use num_rational::Rational64;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::conversion::MergeSpec;
use crate::error::{Error, Result};

/// An exact (possibly fractional) count of field symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Symbols(pub Rational64);

impl Symbols {
    pub fn int(n: i64) -> Self {
        Self(Rational64::from_integer(n))
    }

    pub fn ratio(numer: i64, denom: i64) -> Self {
        Self(Rational64::new(numer, denom))
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Value in units of α, i.e. the coefficient `c` of `c·α`.
    pub fn per_alpha(&self, alpha: usize) -> Self {
        Self(self.0 / Rational64::from_integer(alpha as i64))
    }
}

impl From<usize> for Symbols {
    fn from(n: usize) -> Self {
        Self::int(n as i64)
    }
}

impl Add for Symbols {
    type Output = Symbols;
    fn add(self, rhs: Self) -> Self {
        Self(self.0 + rhs.0)
    }
}

impl Sub for Symbols {
    type Output = Symbols;
    fn sub(self, rhs: Self) -> Self {
        Self(self.0 - rhs.0)
    }
}

impl Mul for Symbols {
    type Output = Symbols;
    fn mul(self, rhs: Self) -> Self {
        Self(self.0 * rhs.0)
    }
}

impl fmt::Display for Symbols {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl FromStr for Symbols {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Malformed(format!("not a rational: {s:?}"));
        match s.split_once('/') {
            None => s.trim().parse().map(Self::int).map_err(|_| bad()),
            Some((n, d)) => {
                let n: i64 = n.trim().parse().map_err(|_| bad())?;
                let d: i64 = d.trim().parse().map_err(|_| bad())?;
                if d == 0 {
                    return Err(bad());
                }
                Ok(Self::ratio(n, d))
            }
        }
    }
}

impl Serialize for Symbols {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Symbols {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn q(n: usize) -> Rational64 {
    Rational64::from_integer(n as i64)
}

/// Which branch of the piecewise lower bound applies. Guards are evaluated in
/// declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundCase {
    /// `min{gI, gF} > r`
    MinGAboveR,
    /// `gI >= gF` and `r >= gF`
    GfLeGiAndR,
    /// `gI < gF <= r`
    GiLtGfLeR,
    Otherwise,
}

impl fmt::Display for BoundCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

pub fn bound_case(spec: &MergeSpec) -> BoundCase {
    let (gi, gf, r) = (spec.g_initial, spec.g_final, spec.r);
    if gi.min(gf) > r {
        BoundCase::MinGAboveR
    } else if gi >= gf && r >= gf {
        BoundCase::GfLeGiAndR
    } else if gi < gf && gf <= r {
        BoundCase::GiLtGfLeR
    } else {
        BoundCase::Otherwise
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundReport {
    pub spec: MergeSpec,
    pub case_label: BoundCase,
    pub bound_gamma_r: Symbols,
    pub construction_gamma_r: Symbols,
    /// The bound is known to be achieved (`gF <= r`).
    pub tight: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub achieved_gamma_r: Option<Symbols>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gap: Option<Symbols>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub optimal: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

/// Lower bound on the read bandwidth of any stable optimal-distance merge.
pub fn lower_bound(spec: &MergeSpec) -> Result<Symbols> {
    spec.validate()?;
    let (lambda, gi, gf, r, mu, alpha) = (
        q(spec.lambda),
        q(spec.g_initial),
        q(spec.g_final),
        q(spec.r),
        q(spec.mu_initial()),
        q(spec.alpha),
    );
    let value = match bound_case(spec) {
        BoundCase::MinGAboveR => lambda * r * alpha,
        BoundCase::GfLeGiAndR => lambda * gf * alpha,
        BoundCase::GiLtGfLeR => {
            lambda * gi * alpha + lambda * mu * (gf - gi) * ((r + q(1)) / (gf + q(1))) * alpha
        }
        BoundCase::Otherwise => lambda * gi * alpha + lambda * mu * (r - gi) * alpha,
    };
    Ok(Symbols(value))
}

/// Read bandwidth of the known stable merge constructions: plain parity
/// combination when `gF <= gI`, piggybacking otherwise.
pub fn construction_cost(spec: &MergeSpec) -> Result<Symbols> {
    spec.validate()?;
    let (lambda, gi, gf, alpha) = (
        q(spec.lambda),
        q(spec.g_initial),
        q(spec.g_final),
        q(spec.alpha),
    );
    let value = if spec.g_final <= spec.g_initial {
        lambda * gf * alpha
    } else {
        let width = q(spec.k_initial + spec.mu_initial() * spec.delta);
        lambda * (width * (gf - gi) / (gf + q(1)) + gi) * alpha
    };
    Ok(Symbols(value))
}

pub fn theorem1_bound(spec: &MergeSpec) -> Result<BoundReport> {
    let bound = lower_bound(spec)?;
    let case = bound_case(spec);
    let note = (case == BoundCase::GiLtGfLeR).then(|| {
        format!(
            "achieving this value needs alpha divisible by gF + 1 = {}",
            spec.g_final + 1
        )
    });
    Ok(BoundReport {
        spec: *spec,
        case_label: case,
        bound_gamma_r: bound,
        construction_gamma_r: construction_cost(spec)?,
        tight: spec.g_final <= spec.r,
        achieved_gamma_r: None,
        gap: None,
        optimal: None,
        note,
    })
}

/// Bound report annotated with the gap of an achieved read bandwidth. An
/// achieved value below the bound is an invariant breach and returns an error.
pub fn gap_report(spec: &MergeSpec, achieved: Symbols) -> Result<BoundReport> {
    let mut report = theorem1_bound(spec)?;
    let gap = achieved - report.bound_gamma_r;
    if gap.is_negative() {
        return Err(Error::BoundViolation {
            achieved: achieved.to_string(),
            bound: report.bound_gamma_r.to_string(),
        });
    }
    report.achieved_gamma_r = Some(achieved);
    report.gap = Some(gap);
    report.optimal = Some(gap.is_zero());
    Ok(report)
}

/// Entropies (in symbols) of the data a conversion downloads: one value per
/// initial codeword for its global-parity downloads taken jointly, one per
/// information node, one per local parity node. All globally indexed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DownloadEntropies {
    pub u_blocks: Vec<usize>,
    pub v: Vec<usize>,
    pub w: Vec<usize>,
}

/// Left side of the download constraint:
/// `Σ_t H(U_t) + (m + 1) / (μ(r + 1)) · (Σ_j H(V_j) + Σ_a H(W_a))` with `m = min{gF, r}`.
pub fn lemma5_lhs(entropies: &DownloadEntropies, spec: &MergeSpec) -> Result<Symbols> {
    spec.validate()?;
    let expect = [
        ("U", entropies.u_blocks.len(), spec.lambda),
        ("V", entropies.v.len(), spec.lambda * spec.k_initial),
        (
            "W",
            entropies.w.len(),
            spec.lambda * spec.mu_initial() * spec.delta,
        ),
    ];
    for (name, got, want) in expect {
        if got != want {
            return Err(Error::SizeMismatch(format!(
                "{name} has {got} entries, expected {want}"
            )));
        }
    }
    let m = spec.g_final.min(spec.r);
    let weight = Rational64::new((m + 1) as i64, (spec.mu_initial() * (spec.r + 1)) as i64);
    let u: usize = entropies.u_blocks.iter().sum();
    let vw: usize = entropies.v.iter().chain(&entropies.w).sum();
    Ok(Symbols(q(u) + weight * q(vw)))
}

/// Right side of the download constraint: `λ · min{gF, r} · α`.
pub fn lemma5_rhs(spec: &MergeSpec) -> Symbols {
    Symbols::from(spec.lambda * spec.g_final.min(spec.r) * spec.alpha)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lemma5Check {
    pub lhs: Symbols,
    pub rhs: Symbols,
    pub holds: bool,
}

pub fn check_lemma5(entropies: &DownloadEntropies, spec: &MergeSpec) -> Result<Lemma5Check> {
    let lhs = lemma5_lhs(entropies, spec)?;
    let rhs = lemma5_rhs(spec);
    Ok(Lemma5Check {
        lhs,
        rhs,
        holds: lhs >= rhs,
    })
}
