//! Elementary probability measures with exact rational weights, prefix code
//! length tables, and classical randomness deficiency.

use std::collections::{BTreeMap, HashSet};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::qmat::codec::{self, field, parse_integer, parse_u64};

/// One support point of an [`ElementaryMeasure`].
#[derive(Clone, Debug, PartialEq)]
pub struct Atom<T> {
    pub id: String,
    pub prob: BigRational,
    pub item: T,
}

/// Finite-support probability with exact rational weights summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementaryMeasure<T = ()> {
    atoms: Vec<Atom<T>>,
}

/// Result of [`ElementaryMeasure::condition`]: the renormalized restriction
/// and the mass it held before renormalization.
#[derive(Clone, Debug)]
pub struct Conditioned<T> {
    pub measure: ElementaryMeasure<T>,
    pub retained: BigRational,
}

impl<T> ElementaryMeasure<T> {
    pub fn new(atoms: Vec<Atom<T>>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::domain("measure with empty support"));
        }
        let mut seen = HashSet::new();
        let mut total = BigRational::zero();
        for a in &atoms {
            if !a.prob.is_positive() {
                return Err(Error::domain(format!("non-positive mass for \"{}\"", a.id)));
            }
            if !seen.insert(a.id.as_str()) {
                return Err(Error::domain(format!("duplicate id \"{}\"", a.id)));
            }
            total += &a.prob;
        }
        if !total.is_one() {
            return Err(Error::domain(format!("masses sum to {total}, not 1")));
        }
        Ok(ElementaryMeasure { atoms })
    }

    /// Uniform measure over `items`, keyed by their ids.
    pub fn uniform(items: Vec<(String, T)>) -> Result<Self> {
        let n = BigInt::from(items.len());
        let atoms = items
            .into_iter()
            .map(|(id, item)| Atom {
                id,
                prob: BigRational::new(BigInt::one(), n.clone()),
                item,
            })
            .collect();
        ElementaryMeasure::new(atoms)
    }

    pub fn atoms(&self) -> &[Atom<T>] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Atom<T>> {
        self.atoms.iter().find(|a| a.id == id)
    }

    pub fn prob(&self, id: &str) -> Option<&BigRational> {
        self.get(id).map(|a| &a.prob)
    }

    /// Total mass of atoms satisfying `pred`.
    pub fn mass_where(&self, mut pred: impl FnMut(&Atom<T>) -> bool) -> BigRational {
        self.atoms
            .iter()
            .filter(|a| pred(a))
            .fold(BigRational::zero(), |acc, a| acc + &a.prob)
    }

    pub fn map_items<U>(&self, mut f: impl FnMut(&Atom<T>) -> U) -> ElementaryMeasure<U> {
        ElementaryMeasure {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    id: a.id.clone(),
                    prob: a.prob.clone(),
                    item: f(a),
                })
                .collect(),
        }
    }
}

impl<T: Clone> ElementaryMeasure<T> {
    /// Restricts to atoms satisfying `keep` and renormalizes exactly.
    ///
    /// Fails with [`Error::EmptyConditioning`] when nothing is kept.
    pub fn condition(&self, mut keep: impl FnMut(&Atom<T>) -> bool) -> Result<Conditioned<T>> {
        let kept: Vec<&Atom<T>> = self.atoms.iter().filter(|a| keep(a)).collect();
        if kept.is_empty() {
            return Err(Error::EmptyConditioning);
        }
        let retained = kept
            .iter()
            .fold(BigRational::zero(), |acc, a| acc + &a.prob);
        let atoms = kept
            .into_iter()
            .map(|a| Atom {
                id: a.id.clone(),
                prob: &a.prob / &retained,
                item: a.item.clone(),
            })
            .collect();
        Ok(Conditioned {
            measure: ElementaryMeasure { atoms },
            retained,
        })
    }
}

/// Free-function form of [`ElementaryMeasure::condition`].
pub fn condition_measure<T: Clone>(
    q: &ElementaryMeasure<T>,
    keep: impl FnMut(&Atom<T>) -> bool,
) -> Result<Conditioned<T>> {
    q.condition(keep)
}

/// Prefix code lengths in bits, Kraft-valid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodeLengthTable {
    lengths: BTreeMap<String, u64>,
}

impl CodeLengthTable {
    pub fn new(lengths: BTreeMap<String, u64>) -> Result<Self> {
        let table = CodeLengthTable { lengths };
        if table.kraft_sum() > BigRational::one() {
            return Err(Error::domain(format!(
                "code lengths violate Kraft: sum {}",
                table.kraft_sum()
            )));
        }
        Ok(table)
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, u64)>) -> Result<Self> {
        CodeLengthTable::new(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    /// Default table `⌈−log₂ Q(x)⌉ + 1` (Kraft sum ≤ 1/2).
    pub fn shannon_safe<T>(q: &ElementaryMeasure<T>) -> Self {
        CodeLengthTable {
            lengths: q
                .atoms()
                .iter()
                .map(|a| (a.id.clone(), ceil_neg_log2(&a.prob) as u64 + 1))
                .collect(),
        }
    }

    pub fn get(&self, id: &str) -> Option<u64> {
        self.lengths.get(id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.lengths.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// `Σ 2^{−ℓ}`, exact.
    pub fn kraft_sum(&self) -> BigRational {
        kraft_sum(self.lengths.values().copied())
    }
}

/// Exact `Σ 2^{−ℓ_i}`.
pub fn kraft_sum(lengths: impl IntoIterator<Item = u64>) -> BigRational {
    let lengths: Vec<u64> = lengths.into_iter().collect();
    let Some(&top) = lengths.iter().max() else {
        return BigRational::zero();
    };
    let num: BigUint = lengths
        .iter()
        .map(|&l| BigUint::one() << (top - l) as usize)
        .sum();
    BigRational::new(BigInt::from(num), BigInt::one() << top as usize)
}

fn bit_len(x: &BigInt) -> i64 {
    x.bits() as i64
}

/// `⌊log₂ q⌋` for positive rational `q`, exact.
pub fn floor_log2(q: &BigRational) -> i64 {
    assert!(q.is_positive(), "log of a non-positive rational");
    let (a, b) = (q.numer(), q.denom());
    // 2^k ≤ a/b < 2^{k+1}; start from the bit-length estimate and correct.
    let mut k = bit_len(a) - bit_len(b);
    let le = |k: i64| -> bool {
        if k >= 0 {
            (b << k as usize) <= *a
        } else {
            *b <= (a << (-k) as usize)
        }
    };
    while !le(k) {
        k -= 1;
    }
    while le(k + 1) {
        k += 1;
    }
    k
}

/// `⌊−log₂ q⌋`.
pub fn floor_neg_log2(q: &BigRational) -> i64 {
    floor_log2(&q.recip())
}

/// `⌈−log₂ q⌉`.
pub fn ceil_neg_log2(q: &BigRational) -> i64 {
    -floor_log2(q)
}

/// `⌈log₂ x⌉` for a positive integer.
pub fn ceil_log2_int(x: &BigUint) -> u64 {
    assert!(!x.is_zero());
    let bits = x.bits();
    if (BigUint::one() << (bits - 1) as usize) == *x {
        bits - 1
    } else {
        bits
    }
}

/// `d(x|Q) = ⌊−log₂ Q(x)⌋ − L(x)`.
pub fn deficiency_classical<T>(
    x: &str,
    q: &ElementaryMeasure<T>,
    l: &CodeLengthTable,
) -> Result<i64> {
    let prob = q
        .prob(x)
        .ok_or_else(|| Error::domain(format!("\"{x}\" is outside the support")))?;
    let len = l
        .get(x)
        .ok_or_else(|| Error::domain(format!("no code length for \"{x}\"")))?;
    Ok(floor_neg_log2(prob) - len as i64)
}

/// Upper bound on stochasticity over a candidate family:
/// `min ℓ(⟨Q⟩) + ⌈3·log₂ max{d(x|Q), 1}⌉`.
///
/// Candidates whose support misses `x` are skipped. The result bounds the
/// minimum over the supplied family only.
pub fn stochasticity_upper<T>(
    x: &str,
    candidates: &[(&ElementaryMeasure<T>, &CodeLengthTable)],
) -> Result<u64> {
    candidates
        .iter()
        .filter(|(q, l)| q.get(x).is_some() && l.get(x).is_some())
        .map(|(q, l)| {
            let d = deficiency_classical(x, q, l)?.max(1) as u64;
            let penalty = ceil_log2_int(&BigUint::from(d).pow(3));
            Ok(measure_code_length(q, l) + penalty)
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .min()
        .ok_or_else(|| Error::domain(format!("no candidate measure contains \"{x}\"")))
}

/// Measure file JSON: `{"support":[{"codelen","den","id","num"},...]}`.
pub fn measure_to_value<T>(q: &ElementaryMeasure<T>, l: &CodeLengthTable) -> Value {
    let support = q
        .atoms()
        .iter()
        .map(|a| {
            let mut m = Map::new();
            m.insert("codelen".into(), Value::from(l.get(&a.id).unwrap_or(0)));
            m.insert("den".into(), codec::integer(a.prob.denom()));
            m.insert("id".into(), Value::String(a.id.clone()));
            m.insert("num".into(), codec::integer(a.prob.numer()));
            Value::Object(m)
        })
        .collect();
    let mut m = Map::new();
    m.insert("support".into(), Value::Array(support));
    Value::Object(m)
}

/// `ℓ(⟨Q⟩)`: bits of the canonical measure file.
pub fn measure_code_length<T>(q: &ElementaryMeasure<T>, l: &CodeLengthTable) -> u64 {
    codec::code_length_of(&measure_to_value(q, l))
}

/// One parsed support entry; `object` holds an inline matrix when present.
#[derive(Clone, Debug)]
pub struct MeasureEntry {
    pub id: String,
    pub prob: BigRational,
    pub codelen: Option<u64>,
    pub object: Option<Value>,
}

pub fn parse_measure_entries(v: &Value) -> Result<Vec<MeasureEntry>> {
    let support = field(v, "support")?
        .as_array()
        .ok_or_else(|| Error::format("\"support\" must be an array"))?;
    support
        .iter()
        .map(|e| {
            let id = field(e, "id")?
                .as_str()
                .ok_or_else(|| Error::format("\"id\" must be a string"))?
                .to_string();
            let num = parse_integer(field(e, "num")?)?;
            let den = parse_integer(field(e, "den")?)?;
            if !den.is_positive() {
                return Err(Error::format(format!(
                    "non-positive denominator for \"{id}\""
                )));
            }
            let codelen = e
                .get("codelen")
                .map(|c| parse_u64(c, "codelen"))
                .transpose()?;
            Ok(MeasureEntry {
                id,
                prob: BigRational::new(num, den),
                codelen,
                object: e.get("object").cloned(),
            })
        })
        .collect()
}

/// Builds a measure and a code table from parsed entries, resolving each
/// entry's item with `resolve`. Missing code lengths get the Shannon-safe
/// default.
pub fn measure_from_entries<T>(
    entries: Vec<MeasureEntry>,
    mut resolve: impl FnMut(&MeasureEntry) -> Result<T>,
) -> Result<(ElementaryMeasure<T>, CodeLengthTable)> {
    let mut lengths = BTreeMap::new();
    let mut atoms = Vec::with_capacity(entries.len());
    for e in &entries {
        let len = e
            .codelen
            .unwrap_or_else(|| ceil_neg_log2(&e.prob).max(0) as u64 + 1);
        lengths.insert(e.id.clone(), len);
        atoms.push(Atom {
            id: e.id.clone(),
            prob: e.prob.clone(),
            item: resolve(e)?,
        });
    }
    Ok((
        ElementaryMeasure::new(atoms)?,
        CodeLengthTable::new(lengths)?,
    ))
}
