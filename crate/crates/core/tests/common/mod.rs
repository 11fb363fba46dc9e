//! Shared fixtures and seeded random generators for integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use vdb_core::catalog::{parse_schema, AttrType, VSchema};
use vdb_core::featexpr::{self, Configuration, FeatureExpr};
use vdb_core::storage::{configure_table, load_vdb, PlainTable, VTable, Value, VdbInstance};
use vdb_core::typecheck::{check_query, TypeOptions};
use vdb_core::vra::{parse_query, VQuery};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

pub fn employee() -> VdbInstance {
    load_vdb(&fixture("employee")).unwrap()
}

pub fn q5_vdb() -> VdbInstance {
    load_vdb(&fixture("q5")).unwrap()
}

pub fn fx(text: &str) -> FeatureExpr {
    featexpr::parse_fexp(text).unwrap()
}

pub fn q(text: &str) -> VQuery {
    parse_query(text).unwrap()
}

/// The rows of `t` under `c`, columns reordered by name. A relation that
/// vanished and a zero-column table both count as no rows.
pub fn slice(t: &VTable, m: &FeatureExpr, c: &Configuration) -> Vec<Vec<(String, Value)>> {
    match configure_table(t, m, c).unwrap() {
        Some(p) => named_rows(&p),
        None => Vec::new(),
    }
}

pub fn named_rows(p: &PlainTable) -> Vec<Vec<(String, Value)>> {
    if p.columns.is_empty() {
        return Vec::new();
    }
    let mut rows: Vec<Vec<(String, Value)>> = p
        .rows
        .iter()
        .map(|r| {
            let mut cells: Vec<(String, Value)> = p
                .columns
                .iter()
                .map(|c| c.name.clone())
                .zip(r.iter().cloned())
                .collect();
            cells.sort();
            cells
        })
        .collect();
    rows.sort();
    rows
}

/// A random schema with its attribute types. Attribute names are unique
/// across relations so products and joins of distinct relations type-check.
#[derive(Clone)]
pub struct RandomSchema {
    pub schema: VSchema,
    pub features: Vec<String>,
    pub relations: Vec<(String, Vec<String>)>,
    pub types: BTreeMap<String, AttrType>,
}

pub fn random_fexp(rng: &mut ChaCha8Rng, features: &[String], depth: u32) -> String {
    if depth == 0 || rng.gen_bool(0.35) {
        let f = features.choose(rng).unwrap();
        return if rng.gen_bool(0.3) {
            format!("!{f}")
        } else {
            f.clone()
        };
    }
    let a = random_fexp(rng, features, depth - 1);
    let b = random_fexp(rng, features, depth - 1);
    match rng.gen_range(0..3) {
        0 => format!("({a} & {b})"),
        1 => format!("({a} | {b})"),
        _ => format!("!({a})"),
    }
}

fn maybe_pc(rng: &mut ChaCha8Rng, features: &[String], p: f64) -> String {
    if rng.gen_bool(p) {
        format!(" # {}", random_fexp(rng, features, 1))
    } else {
        String::new()
    }
}

pub fn random_schema(rng: &mut ChaCha8Rng, max_features: usize) -> RandomSchema {
    loop {
        let n = rng.gen_range(1..=max_features);
        let features: Vec<String> = (0..n).map(|i| format!("f{i}")).collect();
        let mut text = format!("features {}\n", features.join(", "));
        if rng.gen_bool(0.4) {
            text.push_str(&format!(
                "featuremodel {}\n",
                random_fexp(rng, &features, 2)
            ));
        }
        let mut relations = Vec::new();
        let mut types = BTreeMap::new();
        for (i, rel) in ["r", "s", "t"]
            .iter()
            .enumerate()
            .take(rng.gen_range(1..=3))
        {
            let prefix = ["a", "b", "c"][i];
            let mut attrs = Vec::new();
            let mut decls = Vec::new();
            for j in 0..rng.gen_range(2..=4) {
                let name = format!("{prefix}{j}");
                let ty = match rng.gen_range(0..6) {
                    0 => AttrType::Text,
                    1 => AttrType::Bool,
                    _ => AttrType::Int,
                };
                decls.push(format!("{name} {ty}{}", maybe_pc(rng, &features, 0.4)));
                types.insert(name.clone(), ty);
                attrs.push(name);
            }
            text.push_str(&format!(
                "relation {rel} ({}){}\n",
                decls.join(", "),
                maybe_pc(rng, &features, 0.3)
            ));
            relations.push((rel.to_string(), attrs));
        }
        if let Ok(schema) = parse_schema(&text) {
            if !schema.valid_configurations(16).unwrap().is_empty() {
                return RandomSchema {
                    schema,
                    features,
                    relations,
                    types,
                };
            }
        }
    }
}

fn constant(rng: &mut ChaCha8Rng, ty: AttrType) -> String {
    match ty {
        AttrType::Int => rng.gen_range(0..4).to_string(),
        AttrType::Text => ["'x'", "'y'"].choose(rng).unwrap().to_string(),
        AttrType::Bool => ["true", "false"].choose(rng).unwrap().to_string(),
    }
}

fn value(rng: &mut ChaCha8Rng, ty: AttrType) -> Value {
    match ty {
        AttrType::Int => Value::Int(rng.gen_range(0..4)),
        AttrType::Text => Value::Text(["x", "y"].choose(rng).unwrap().to_string()),
        AttrType::Bool => Value::Bool(rng.gen()),
    }
}

impl RandomSchema {
    pub fn fexp(&self, rng: &mut ChaCha8Rng) -> String {
        random_fexp(rng, &self.features, 1)
    }

    fn comparison(&self, rng: &mut ChaCha8Rng, attrs: &[String]) -> String {
        let a = attrs.choose(rng).unwrap();
        let ty = self.types[a];
        let same: Vec<&String> = attrs
            .iter()
            .filter(|b| self.types[*b] == ty && *b != a)
            .collect();
        let op = ["=", "!=", "<", ">="].choose(rng).unwrap();
        if !same.is_empty() && rng.gen_bool(0.4) {
            format!("{a} {op} {}", same.choose(rng).unwrap())
        } else {
            format!("{a} {op} {}", constant(rng, ty))
        }
    }

    pub fn condition(&self, rng: &mut ChaCha8Rng, attrs: &[String], depth: u32) -> String {
        if depth == 0 || rng.gen_bool(0.4) {
            return self.comparison(rng, attrs);
        }
        let a = self.condition(rng, attrs, depth - 1);
        let b = self.condition(rng, attrs, depth - 1);
        match rng.gen_range(0..5) {
            0 => format!("({a}) & ({b})"),
            1 => format!("({a}) | ({b})"),
            2 => format!("!({a})"),
            3 => format!("CHC {} ({a}) ({b})", self.fexp(rng)),
            _ => "true".into(),
        }
    }

    fn relation(
        &self,
        rng: &mut ChaCha8Rng,
        allowed: &[usize],
    ) -> (String, Vec<String>, Vec<usize>) {
        let i = *allowed.choose(rng).unwrap();
        let (name, attrs) = &self.relations[i];
        (name.clone(), attrs.clone(), vec![i])
    }

    /// A random query text over relations in `allowed`, with the attribute
    /// names it may expose and the relations it reads. Not necessarily
    /// well-typed.
    pub fn query(
        &self,
        rng: &mut ChaCha8Rng,
        depth: u32,
        allowed: &[usize],
    ) -> (String, Vec<String>, Vec<usize>) {
        if depth == 0 || rng.gen_bool(0.2) {
            return self.relation(rng, allowed);
        }
        match rng.gen_range(0..9) {
            0 | 1 => {
                let (sub, attrs, rels) = self.query(rng, depth - 1, allowed);
                let c = self.condition(rng, &attrs, 2);
                (format!("sel ({c}) ({sub})"), attrs, rels)
            }
            2 | 3 => {
                let (sub, attrs, rels) = self.query(rng, depth - 1, allowed);
                let mut picked: Vec<String> = attrs
                    .iter()
                    .filter(|_| rng.gen_bool(0.6))
                    .cloned()
                    .collect();
                if picked.is_empty() {
                    picked.push(attrs[0].clone());
                }
                let list: Vec<String> = picked
                    .iter()
                    .map(|a| format!("{a}{}", maybe_pc(rng, &self.features, 0.4)))
                    .collect();
                (format!("proj [{}] ({sub})", list.join(", ")), picked, rels)
            }
            4 => {
                let (x, ax, rx) = self.query(rng, depth - 1, allowed);
                let (y, ay, ry) = if rng.gen_bool(0.6) {
                    let (y, _, ry) = self.query(rng, depth - 1, &rx);
                    (y, ax.clone(), ry)
                } else {
                    self.query(rng, depth - 1, allowed)
                };
                let mut attrs = ax;
                for a in ay {
                    if !attrs.contains(&a) {
                        attrs.push(a);
                    }
                }
                let mut rels = rx;
                rels.extend(ry);
                (
                    format!("choice {} {{ {x} }} {{ {y} }}", self.fexp(rng)),
                    attrs,
                    rels,
                )
            }
            5 | 6 => {
                let (x, ax, rx) = self.query(rng, depth - 1, allowed);
                let rest: Vec<usize> = allowed
                    .iter()
                    .copied()
                    .filter(|i| !rx.contains(i))
                    .collect();
                if rest.is_empty() {
                    return (x, ax, rx);
                }
                let (y, ay, ry) = self.query(rng, depth - 1, &rest);
                let mut attrs = ax.clone();
                attrs.extend(ay.iter().cloned());
                let mut rels = rx;
                rels.extend(ry);
                if rng.gen_bool(0.5) {
                    let pairs: Vec<(&String, &String)> = ax
                        .iter()
                        .flat_map(|a| ay.iter().map(move |b| (a, b)))
                        .filter(|(a, b)| self.types[*a] == self.types[*b])
                        .collect();
                    if let Some((a, b)) = pairs.choose(rng) {
                        return (format!("join ({a} = {b}) ({x}) ({y})"), attrs, rels);
                    }
                }
                (format!("prod ({x}) ({y})"), attrs, rels)
            }
            7 => {
                let (x, attrs, rels) = self.query(rng, depth - 1, allowed);
                let c1 = self.condition(rng, &attrs, 1);
                let op = ["union", "diff"].choose(rng).unwrap();
                (format!("{op} ({x}) (sel ({c1}) ({x}))"), attrs, rels)
            }
            _ => {
                let (x, attrs, rels) = self.query(rng, depth - 1, allowed);
                (
                    format!("choice {} {{ {x} }} {{ empty }}", self.fexp(rng)),
                    attrs,
                    rels,
                )
            }
        }
    }

    pub fn all_relations(&self) -> Vec<usize> {
        (0..self.relations.len()).collect()
    }

    /// A random well-typed query, by rejection.
    pub fn well_typed_query(&self, rng: &mut ChaCha8Rng, depth: u32) -> Option<VQuery> {
        for _ in 0..200 {
            let (text, _, _) = self.query(rng, depth, &self.all_relations());
            let Ok(parsed) = parse_query(&text) else {
                continue;
            };
            if check_query(&parsed, &self.schema, TypeOptions::default()).is_ok() {
                return Some(parsed);
            }
        }
        None
    }

    /// A random instance with at most `max_rows` rows in total. Cells of
    /// attributes that cannot coexist with their row are `NULL`.
    pub fn instance(&self, rng: &mut ChaCha8Rng, max_rows: usize) -> VdbInstance {
        let mut db = VdbInstance::empty(self.schema.clone());
        let per = (max_rows / self.relations.len()).max(1);
        for (name, _) in &self.relations {
            let rel = self.schema.relation(name).unwrap().clone();
            for _ in 0..rng.gen_range(0..=per) {
                let pc = if rng.gen_bool(0.3) {
                    FeatureExpr::TRUE
                } else {
                    fx(&random_fexp(rng, &self.features, 1))
                };
                let ctx = FeatureExpr::and(
                    pc.clone(),
                    FeatureExpr::and(rel.pc.clone(), self.schema.feature_model().clone()),
                );
                if !featexpr::sat(&ctx) {
                    continue;
                }
                let values = rel
                    .attrs
                    .iter()
                    .map(|a| {
                        let ok = featexpr::sat(&FeatureExpr::and(a.pc.clone(), ctx.clone()));
                        if ok && rng.gen_bool(0.9) {
                            value(rng, a.value.atype)
                        } else {
                            Value::Null
                        }
                    })
                    .collect();
                db.insert(name, values, pc).unwrap();
            }
        }
        db
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` (schema, well-typed query) pairs from `seed`, with at most
/// `max_features` features.
pub fn corpus(seed: u64, n: usize, max_features: usize) -> Vec<(RandomSchema, VQuery)> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    while out.len() < n {
        let s = random_schema(&mut r, max_features);
        for _ in 0..4 {
            if let Some(query) = s.well_typed_query(&mut r, 3) {
                out.push((s.clone(), query));
            }
        }
    }
    out.truncate(n);
    out
}
