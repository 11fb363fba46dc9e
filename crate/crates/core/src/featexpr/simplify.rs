//! Presence-condition simplification.
//!
//! [`simplify`] first settles contradictions and tautologies, then applies
//! structural rewriting (unit and annihilator laws, double negation,
//! flattening, duplicate and complement detection, absorption). Small
//! formulas are additionally minimized with Quine-McCluskey and the smaller
//! of the two candidates is kept.

use std::collections::{BTreeSet, HashSet};

use super::solver::VarIndex;
use super::{sat, taut, FeatureExpr, FeatureName};

/// Formulas with at most this many features also get a two-level minimization.
const QM_LIMIT: usize = 10;

pub fn simplify(e: &FeatureExpr) -> FeatureExpr {
    if let FeatureExpr::Lit(_) = e {
        return e.clone();
    }
    if !sat(e) {
        return FeatureExpr::FALSE;
    }
    if taut(e) {
        return FeatureExpr::TRUE;
    }
    let structural = structural(e);
    let features = e.features();
    if features.len() <= QM_LIMIT {
        let idx = VarIndex::new(features);
        let on: Vec<u64> = (0u64..(1u64 << idx.len()))
            .filter(|&m| idx.eval(e, m))
            .collect();
        let dnf = quine_mccluskey(&idx, &on, &[]);
        if dnf.size() < structural.size() {
            return dnf;
        }
    }
    structural
}

/// Simplifies `e` assuming `care` holds: the result agrees with `e` on every
/// configuration satisfying `care`, and may differ elsewhere.
pub fn simplify_with_care(e: &FeatureExpr, care: &FeatureExpr) -> FeatureExpr {
    let both = FeatureExpr::and(e.clone(), care.clone());
    if !sat(&both) {
        return FeatureExpr::FALSE;
    }
    if taut(&FeatureExpr::or(FeatureExpr::not(care.clone()), e.clone())) {
        return FeatureExpr::TRUE;
    }
    let plain = simplify(e);
    let mut features = e.features();
    care.collect_features(&mut features);
    if features.len() > QM_LIMIT {
        return plain;
    }
    let idx = VarIndex::new(features);
    let mut on = Vec::new();
    let mut dc = Vec::new();
    for m in 0u64..(1u64 << idx.len()) {
        if !idx.eval(care, m) {
            dc.push(m);
        } else if idx.eval(e, m) {
            on.push(m);
        }
    }
    let dnf = quine_mccluskey(&idx, &on, &dc);
    if dnf.size() < plain.size() {
        dnf
    } else {
        plain
    }
}

/// A normal form that depends only on the truth table of `e` over
/// `universe` restricted to `care`: equivalent conditions (under `care`)
/// get the same text. Falls back to [`simplify_with_care`] above the
/// two-level minimization limit.
pub fn canonical(
    e: &FeatureExpr,
    care: &FeatureExpr,
    universe: &BTreeSet<FeatureName>,
) -> FeatureExpr {
    let mut features = universe.clone();
    e.collect_features(&mut features);
    care.collect_features(&mut features);
    if features.len() > QM_LIMIT {
        return simplify_with_care(e, care);
    }
    let idx = VarIndex::new(features);
    let mut on = Vec::new();
    let mut dc = Vec::new();
    for m in 0u64..(1u64 << idx.len()) {
        if !idx.eval(care, m) {
            dc.push(m);
        } else if idx.eval(e, m) {
            on.push(m);
        }
    }
    if on.is_empty() {
        return FeatureExpr::FALSE;
    }
    if on.len() + dc.len() == 1usize << idx.len() {
        return FeatureExpr::TRUE;
    }
    quine_mccluskey(&idx, &on, &dc)
}

/// Structural rewriting only; no semantic reasoning.
pub fn structural(e: &FeatureExpr) -> FeatureExpr {
    match e {
        FeatureExpr::Lit(_) | FeatureExpr::Feature(_) => e.clone(),
        FeatureExpr::Not(x) => FeatureExpr::neg(structural(x)),
        FeatureExpr::And(..) => rebuild(e, true),
        FeatureExpr::Or(..) => rebuild(e, false),
    }
}

fn flatten_into(e: &FeatureExpr, conj: bool, out: &mut Vec<FeatureExpr>) {
    match (e, conj) {
        (FeatureExpr::And(a, b), true) | (FeatureExpr::Or(a, b), false) => {
            flatten_into(a, conj, out);
            flatten_into(b, conj, out);
        }
        _ => out.push(e.clone()),
    }
}

fn operands(e: &FeatureExpr, conj: bool) -> Vec<FeatureExpr> {
    let mut out = Vec::new();
    flatten_into(e, conj, &mut out);
    out
}

fn rebuild(e: &FeatureExpr, conj: bool) -> FeatureExpr {
    let unit = FeatureExpr::Lit(conj);
    let annihilator = FeatureExpr::Lit(!conj);
    let mut raw = Vec::new();
    flatten_into(e, conj, &mut raw);
    let mut items: Vec<FeatureExpr> = Vec::new();
    for item in raw {
        for op in operands(&structural(&item), conj) {
            if op == annihilator {
                return annihilator;
            }
            if op != unit && !items.contains(&op) {
                items.push(op);
            }
        }
    }
    for item in &items {
        if items.contains(&FeatureExpr::neg(item.clone())) {
            return annihilator;
        }
    }
    // absorption: a & (a | b) = a, a | (a & b) = a
    let dual: Vec<Vec<FeatureExpr>> = items.iter().map(|i| operands(i, !conj)).collect();
    let keep: Vec<bool> = (0..items.len())
        .map(|i| {
            !(0..items.len()).any(|j| {
                let sub = |x: usize, y: usize| dual[x].iter().all(|d| dual[y].contains(d));
                j != i && dual[i].len() > 1 && sub(j, i) && (j < i || !sub(i, j))
            })
        })
        .collect();
    let items: Vec<FeatureExpr> = items
        .into_iter()
        .zip(keep)
        .filter_map(|(item, k)| k.then_some(item))
        .collect();
    let mut iter = items.into_iter();
    let Some(first) = iter.next() else {
        return unit;
    };
    iter.fold(first, |acc, x| {
        if conj {
            FeatureExpr::and(acc, x)
        } else {
            FeatureExpr::or(acc, x)
        }
    })
}

/// An implicant over the indexed features: `bits` gives the required value
/// of every position not in `free`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Cube {
    bits: u64,
    free: u64,
}

impl Cube {
    fn covers(self, m: u64) -> bool {
        (m & !self.free) == (self.bits & !self.free)
    }

    fn literals(self, n: usize) -> usize {
        n - self.free.count_ones() as usize
    }
}

fn prime_implicants(on: &[u64], dc: &[u64]) -> Vec<Cube> {
    let mut current: BTreeSet<Cube> = on
        .iter()
        .chain(dc)
        .map(|&bits| Cube { bits, free: 0 })
        .collect();
    let mut primes = BTreeSet::new();
    while !current.is_empty() {
        let list: Vec<Cube> = current.iter().copied().collect();
        let mut combined = HashSet::new();
        let mut next = BTreeSet::new();
        for (i, a) in list.iter().enumerate() {
            for b in &list[i + 1..] {
                if a.free != b.free {
                    continue;
                }
                let diff = (a.bits ^ b.bits) & !a.free;
                if diff.count_ones() == 1 {
                    next.insert(Cube {
                        bits: a.bits & !diff,
                        free: a.free | diff,
                    });
                    combined.insert(*a);
                    combined.insert(*b);
                }
            }
        }
        primes.extend(list.into_iter().filter(|c| !combined.contains(c)));
        current = next;
    }
    primes.into_iter().collect()
}

fn quine_mccluskey(idx: &VarIndex, on: &[u64], dc: &[u64]) -> FeatureExpr {
    if on.is_empty() {
        return FeatureExpr::FALSE;
    }
    let n = idx.len();
    let primes = prime_implicants(on, dc);
    let mut uncovered: BTreeSet<u64> = on.iter().copied().collect();
    let mut chosen: Vec<Cube> = Vec::new();
    // essential implicants
    for &m in on {
        let covering: Vec<&Cube> = primes.iter().filter(|p| p.covers(m)).collect();
        if covering.len() == 1 && !chosen.contains(covering[0]) {
            chosen.push(*covering[0]);
        }
    }
    uncovered.retain(|&m| !chosen.iter().any(|c| c.covers(m)));
    while !uncovered.is_empty() {
        let best = primes
            .iter()
            .filter(|p| !chosen.contains(p))
            .max_by_key(|p| {
                let gain = uncovered.iter().filter(|&&m| p.covers(m)).count();
                (
                    gain,
                    std::cmp::Reverse(p.literals(n)),
                    std::cmp::Reverse(**p),
                )
            })
            .copied()
            .expect("primes cover every on-set minterm");
        uncovered.retain(|&m| !best.covers(m));
        chosen.push(best);
    }
    chosen.sort_by_key(|c| {
        let lits: Vec<(usize, bool)> = (0..n)
            .filter(|i| c.free >> i & 1 == 0)
            .map(|i| (i, c.bits >> i & 1 == 0))
            .collect();
        (c.literals(n), lits)
    });
    FeatureExpr::disj_all(chosen.into_iter().map(|cube| {
        FeatureExpr::conj_all((0..n).filter(|i| cube.free >> i & 1 == 0).map(|i| {
            let v = FeatureExpr::Feature(idx.names[i].clone());
            if cube.bits >> i & 1 == 1 {
                v
            } else {
                FeatureExpr::not(v)
            }
        }))
    }))
}
