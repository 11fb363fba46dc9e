//! Satisfiability checking.
//!
//! Formulas over at most [`ENUMERATION_LIMIT`] distinct features are decided
//! by walking the truth table; larger ones go through a Tseitin encoding into
//! CNF and a small DPLL search.

use std::collections::BTreeMap;

use super::{FeatureExpr, FeatureName};

pub const ENUMERATION_LIMIT: usize = 16;

/// Feature-to-bit index for truth-table evaluation.
pub(crate) struct VarIndex {
    pub names: Vec<FeatureName>,
    index: BTreeMap<FeatureName, usize>,
}

impl VarIndex {
    pub fn new(names: impl IntoIterator<Item = FeatureName>) -> Self {
        let names: Vec<FeatureName> = names.into_iter().collect();
        let index = names
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, f)| (f, i))
            .collect();
        Self { names, index }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    /// Evaluates `e` under the assignment encoded by `mask`; features that
    /// are not indexed are treated as disabled.
    pub fn eval(&self, e: &FeatureExpr, mask: u64) -> bool {
        match e {
            FeatureExpr::Lit(b) => *b,
            FeatureExpr::Feature(f) => self.index.get(f).is_some_and(|&i| mask >> i & 1 == 1),
            FeatureExpr::Not(x) => !self.eval(x, mask),
            FeatureExpr::And(a, b) => self.eval(a, mask) && self.eval(b, mask),
            FeatureExpr::Or(a, b) => self.eval(a, mask) || self.eval(b, mask),
        }
    }
}

pub fn is_satisfiable(e: &FeatureExpr) -> bool {
    let e = fold_literals(e);
    if let FeatureExpr::Lit(b) = e {
        return b;
    }
    let features = e.features();
    if features.len() <= ENUMERATION_LIMIT {
        let idx = VarIndex::new(features);
        (0u64..(1u64 << idx.len())).any(|mask| idx.eval(&e, mask))
    } else {
        let cnf = tseitin(&e);
        dpll(&cnf.clauses, cnf.num_vars)
    }
}

/// Decides satisfiability with the CNF/DPLL path regardless of size.
pub fn is_satisfiable_dpll(e: &FeatureExpr) -> bool {
    let e = fold_literals(e);
    if let FeatureExpr::Lit(b) = e {
        return b;
    }
    let cnf = tseitin(&e);
    dpll(&cnf.clauses, cnf.num_vars)
}

/// Removes boolean literals below the root by constant propagation.
fn fold_literals(e: &FeatureExpr) -> FeatureExpr {
    match e {
        FeatureExpr::Lit(_) | FeatureExpr::Feature(_) => e.clone(),
        FeatureExpr::Not(x) => match fold_literals(x) {
            FeatureExpr::Lit(b) => FeatureExpr::Lit(!b),
            x => FeatureExpr::not(x),
        },
        FeatureExpr::And(a, b) => match (fold_literals(a), fold_literals(b)) {
            (FeatureExpr::Lit(false), _) | (_, FeatureExpr::Lit(false)) => FeatureExpr::FALSE,
            (FeatureExpr::Lit(true), x) | (x, FeatureExpr::Lit(true)) => x,
            (a, b) => FeatureExpr::and(a, b),
        },
        FeatureExpr::Or(a, b) => match (fold_literals(a), fold_literals(b)) {
            (FeatureExpr::Lit(true), _) | (_, FeatureExpr::Lit(true)) => FeatureExpr::TRUE,
            (FeatureExpr::Lit(false), x) | (x, FeatureExpr::Lit(false)) => x,
            (a, b) => FeatureExpr::or(a, b),
        },
    }
}

struct Cnf {
    clauses: Vec<Vec<i32>>,
    num_vars: usize,
}

/// Literal-free input only.
fn tseitin(e: &FeatureExpr) -> Cnf {
    struct Enc {
        vars: BTreeMap<FeatureName, i32>,
        next: i32,
        clauses: Vec<Vec<i32>>,
    }
    impl Enc {
        fn fresh(&mut self) -> i32 {
            self.next += 1;
            self.next
        }
        fn encode(&mut self, e: &FeatureExpr) -> i32 {
            match e {
                FeatureExpr::Lit(b) => {
                    let v = self.fresh();
                    self.clauses.push(vec![if *b { v } else { -v }]);
                    v
                }
                FeatureExpr::Feature(f) => {
                    if let Some(&v) = self.vars.get(f) {
                        return v;
                    }
                    let v = self.fresh();
                    self.vars.insert(f.clone(), v);
                    v
                }
                FeatureExpr::Not(x) => -self.encode(x),
                FeatureExpr::And(a, b) => {
                    let (a, b) = (self.encode(a), self.encode(b));
                    let v = self.fresh();
                    self.clauses.push(vec![-v, a]);
                    self.clauses.push(vec![-v, b]);
                    self.clauses.push(vec![v, -a, -b]);
                    v
                }
                FeatureExpr::Or(a, b) => {
                    let (a, b) = (self.encode(a), self.encode(b));
                    let v = self.fresh();
                    self.clauses.push(vec![-v, a, b]);
                    self.clauses.push(vec![v, -a]);
                    self.clauses.push(vec![v, -b]);
                    v
                }
            }
        }
    }
    let mut enc = Enc {
        vars: BTreeMap::new(),
        next: 0,
        clauses: Vec::new(),
    };
    let root = enc.encode(e);
    enc.clauses.push(vec![root]);
    Cnf {
        clauses: enc.clauses,
        num_vars: enc.next as usize,
    }
}

fn lit_value(assign: &[i8], lit: i32) -> i8 {
    let v = assign[lit.unsigned_abs() as usize];
    if lit > 0 {
        v
    } else {
        -v
    }
}

fn dpll(clauses: &[Vec<i32>], num_vars: usize) -> bool {
    // 1 = true, -1 = false, 0 = unassigned; index 0 unused
    let mut assign = vec![0i8; num_vars + 1];
    search(clauses, &mut assign)
}

fn search(clauses: &[Vec<i32>], assign: &mut [i8]) -> bool {
    loop {
        let mut changed = false;
        for clause in clauses {
            let mut unassigned = None;
            let mut open = 0;
            let mut satisfied = false;
            for &lit in clause {
                match lit_value(assign, lit) {
                    1 => {
                        satisfied = true;
                        break;
                    }
                    0 => {
                        open += 1;
                        unassigned = Some(lit);
                    }
                    _ => {}
                }
            }
            if satisfied {
                continue;
            }
            match (open, unassigned) {
                (0, _) => return false,
                (1, Some(lit)) => {
                    assign[lit.unsigned_abs() as usize] = if lit > 0 { 1 } else { -1 };
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }
    let branch = clauses.iter().find_map(|clause| {
        if clause.iter().any(|&l| lit_value(assign, l) == 1) {
            return None;
        }
        clause.iter().copied().find(|&l| lit_value(assign, l) == 0)
    });
    let Some(lit) = branch else {
        return true;
    };
    let var = lit.unsigned_abs() as usize;
    for value in [1i8, -1] {
        let mut trial = assign.to_vec();
        trial[var] = if lit > 0 { value } else { -value };
        if search(clauses, &mut trial) {
            return true;
        }
    }
    false
}
