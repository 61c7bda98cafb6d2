//! Seeded generator of (triple store, SELECT query) pairs inside the
//! translatable subset, used by the differential suite.
//!
//! Stores have complete schemas: every node carries one class and every
//! property of that class, with a single value. IRI-valued predicates only
//! connect labelled nodes and never form self-loops. Queries keep FILTERs on
//! required variables, use one relationship per OPTIONAL and never divide.
//! Results are only sliced when the order is total over literal columns that
//! cannot come from an empty aggregate, and HAVING needs GROUP BY and reads
//! required variables only. Both engines disagree on empty aggregates and on
//! where nulls and nodes sort.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const MAX_NODES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Int,
    Dec,
    Str,
}

const PROPS: [(&str, Kind); 6] = [
    ("name", Kind::Str),
    ("age", Kind::Int),
    ("score", Kind::Int),
    ("price", Kind::Dec),
    ("tag", Kind::Str),
    ("rank", Kind::Int),
];

const WORDS: [&str; 6] = ["alpha", "beta", "gamma", "delta", "ab", "ba"];

#[derive(Debug, Clone)]
struct Class {
    name: String,
    props: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Rel {
    name: String,
    from: usize,
    to: usize,
}

#[derive(Debug, Clone)]
struct Schema {
    classes: Vec<Class>,
    rels: Vec<Rel>,
}

/// A generated pair.
#[derive(Debug, Clone)]
pub struct Case {
    pub seed: u64,
    pub turtle: String,
    pub sparql: String,
}

fn literal(rng: &mut ChaCha8Rng, kind: Kind) -> String {
    match kind {
        Kind::Int => rng.gen_range(0..10).to_string(),
        Kind::Dec => format!("{}.{}", rng.gen_range(0..6), ["0", "25", "5", "75"][rng.gen_range(0..4)]),
        Kind::Str => format!("\"{}\"", WORDS[rng.gen_range(0..WORDS.len())]),
    }
}

fn schema(rng: &mut ChaCha8Rng) -> Schema {
    let n = rng.gen_range(1..=3);
    let mut classes = Vec::new();
    for i in 0..n {
        let mut props: Vec<usize> = (0..PROPS.len()).collect();
        props.shuffle(rng);
        props.truncate(rng.gen_range(1..=3));
        props.sort();
        classes.push(Class {
            name: format!("C{i}"),
            props,
        });
    }
    let rels = (0..rng.gen_range(1..=3))
        .map(|i| Rel {
            name: format!("r{i}"),
            from: rng.gen_range(0..n),
            to: rng.gen_range(0..n),
        })
        .collect();
    Schema { classes, rels }
}

fn store(rng: &mut ChaCha8Rng, s: &Schema) -> String {
    let count = rng.gen_range(s.classes.len()..=MAX_NODES.min(24));
    let mut class_of: Vec<usize> = (0..s.classes.len()).collect();
    while class_of.len() < count {
        class_of.push(rng.gen_range(0..s.classes.len()));
    }
    let mut ttl = String::from("@prefix : <http://example.org/> .\n");
    for (i, c) in class_of.iter().enumerate() {
        let class = &s.classes[*c];
        ttl.push_str(&format!(":e{i} a :{}", class.name));
        for p in &class.props {
            let (name, kind) = PROPS[*p];
            ttl.push_str(&format!(" ; :{name} {}", literal(rng, kind)));
        }
        ttl.push_str(" .\n");
    }
    let density = rng.gen_range(0.05..0.3);
    for r in &s.rels {
        for (a, ca) in class_of.iter().enumerate() {
            for (b, cb) in class_of.iter().enumerate() {
                if a != b && *ca == r.from && *cb == r.to && rng.gen_bool(density) {
                    ttl.push_str(&format!(":e{a} :{} :e{b} .\n", r.name));
                }
            }
        }
    }
    ttl
}

#[derive(Debug, Clone)]
struct Var {
    name: String,
    /// `None` for node variables.
    kind: Option<Kind>,
    optional: bool,
}

struct QueryGen<'a> {
    rng: &'a mut ChaCha8Rng,
    schema: &'a Schema,
    /// Node variables with their class.
    nodes: Vec<(String, usize)>,
    vars: Vec<Var>,
    body: Vec<String>,
    next: usize,
}

impl QueryGen<'_> {
    fn fresh(&mut self, prefix: &str) -> String {
        self.next += 1;
        format!("{prefix}{}", self.next)
    }

    fn bind_props(&mut self, node: &str, class: usize, optional: bool, max: usize, out: &mut Vec<String>) {
        let mut props = self.schema.classes[class].props.clone();
        props.shuffle(self.rng);
        let k = self.rng.gen_range(0..=max.min(props.len()));
        for p in props.into_iter().take(k) {
            let (pname, kind) = PROPS[p];
            let v = self.fresh("v");
            out.push(format!("?{node} :{pname} ?{v} ."));
            self.vars.push(Var {
                name: v,
                kind: Some(kind),
                optional,
            });
        }
    }

    fn required(&mut self) {
        let c0 = self.rng.gen_range(0..self.schema.classes.len());
        let n0 = self.fresh("n");
        self.body.push(format!("?{n0} a :{} .", self.schema.classes[c0].name));
        self.nodes.push((n0.clone(), c0));
        self.vars.push(Var {
            name: n0,
            kind: None,
            optional: false,
        });

        for _ in 0..self.rng.gen_range(0..=2) {
            let (anchor, ac) = self.nodes[self.rng.gen_range(0..self.nodes.len())].clone();
            let out: Vec<&Rel> = self.schema.rels.iter().filter(|r| r.from == ac).collect();
            let inc: Vec<&Rel> = self.schema.rels.iter().filter(|r| r.to == ac).collect();
            let forward = !out.is_empty() && (inc.is_empty() || self.rng.gen_bool(0.6));
            let pool = if forward { out } else { inc };
            let Some(rel) = pool.choose(self.rng).map(|r| (*r).clone()) else { continue };
            let fresh = self.fresh("n");
            let (triple, class) = if forward {
                let second: Vec<&Rel> = self.schema.rels.iter().filter(|r| r.from == rel.to).collect();
                if !second.is_empty() && self.rng.gen_bool(0.15) {
                    let r2 = second.choose(self.rng).unwrap();
                    (format!("?{anchor} :{}/:{} ?{fresh} .", rel.name, r2.name), r2.to)
                } else {
                    (format!("?{anchor} :{} ?{fresh} .", rel.name), rel.to)
                }
            } else if self.rng.gen_bool(0.3) {
                (format!("?{anchor} ^:{} ?{fresh} .", rel.name), rel.from)
            } else {
                (format!("?{fresh} :{} ?{anchor} .", rel.name), rel.from)
            };
            self.body.push(triple);
            self.body.push(format!("?{fresh} a :{} .", self.schema.classes[class].name));
            self.nodes.push((fresh.clone(), class));
            self.vars.push(Var {
                name: fresh,
                kind: None,
                optional: false,
            });
        }

        let nodes = self.nodes.clone();
        let mut props = Vec::new();
        for (n, c) in &nodes {
            self.bind_props(n, *c, false, 2, &mut props);
        }
        self.body.extend(props);

        if self.rng.gen_bool(0.2) {
            let (n, c) = nodes.choose(self.rng).unwrap().clone();
            let exact: Vec<usize> = self.schema.classes[c]
                .props
                .iter()
                .copied()
                .filter(|p| PROPS[*p].1 != Kind::Dec)
                .collect();
            if let Some(p) = exact.choose(self.rng) {
                let (pname, kind) = PROPS[*p];
                let value = literal(self.rng, kind);
                self.body.push(format!("?{n} :{pname} {value} ."));
            }
        }
    }

    fn optionals(&mut self) {
        for _ in 0..2 {
            if !self.rng.gen_bool(0.35) {
                continue;
            }
            let (anchor, ac) = self.nodes[self.rng.gen_range(0..self.nodes.len())].clone();
            let out: Vec<Rel> = self.schema.rels.iter().filter(|r| r.from == ac).cloned().collect();
            let Some(rel) = out.choose(self.rng).cloned() else { continue };
            let m = self.fresh("m");
            let mut inner = vec![
                format!("?{anchor} :{} ?{m} .", rel.name),
                format!("?{m} a :{} .", self.schema.classes[rel.to].name),
            ];
            self.vars.push(Var {
                name: m.clone(),
                kind: None,
                optional: true,
            });
            self.bind_props(&m, rel.to, true, 1, &mut inner);
            self.body.push(format!("OPTIONAL {{ {} }}", inner.join(" ")));
        }
    }

    fn atom(&mut self, v: &Var) -> String {
        let name = &v.name;
        let kind = v.kind.expect("literal variable");
        match kind {
            Kind::Int | Kind::Dec => match self.rng.gen_range(0..4) {
                0 => {
                    let items: Vec<String> = (0..self.rng.gen_range(1..=3)).map(|_| literal(self.rng, kind)).collect();
                    let not = if self.rng.gen_bool(0.3) { "NOT " } else { "" };
                    format!("?{name} {not}IN ({})", items.join(", "))
                }
                _ => {
                    let op = ["=", "!=", "<", ">", "<=", ">="][self.rng.gen_range(0..6)];
                    format!("?{name} {op} {}", literal(self.rng, kind))
                }
            },
            Kind::Str => {
                let w = WORDS[self.rng.gen_range(0..WORDS.len())];
                let part = &w[..self.rng.gen_range(1..=w.len().min(2))];
                match self.rng.gen_range(0..5) {
                    0 => format!("CONTAINS(?{name}, \"{part}\")"),
                    1 => format!("STRSTARTS(?{name}, \"{part}\")"),
                    2 => format!("STRENDS(?{name}, \"{part}\")"),
                    3 => format!("?{name} = \"{w}\""),
                    _ => format!("?{name} != \"{w}\""),
                }
            }
        }
    }

    fn filter(&mut self) {
        let lits: Vec<Var> = self.vars.iter().filter(|v| v.kind.is_some() && !v.optional).cloned().collect();
        if lits.is_empty() || !self.rng.gen_bool(0.5) {
            return;
        }
        let k = self.rng.gen_range(1..=3);
        let mut expr = String::new();
        for i in 0..k {
            let v = lits.choose(self.rng).unwrap().clone();
            let a = self.atom(&v);
            if i == 0 {
                expr = a;
            } else if self.rng.gen_bool(0.5) {
                expr = format!("{expr} && {a}");
            } else {
                expr = format!("({expr}) || {a}");
            }
        }
        if self.rng.gen_bool(0.15) {
            expr = format!("!({expr})");
        }
        self.body.push(format!("FILTER({expr})"));
    }

    fn plain_projection(&mut self) -> String {
        let mut vars = self.vars.clone();
        vars.shuffle(self.rng);
        vars.truncate(self.rng.gen_range(1..=vars.len().min(4)));
        let distinct = self.rng.gen_bool(0.3);
        let cols: Vec<String> = vars.iter().map(|v| format!("?{}", v.name)).collect();
        let mut q = format!(
            "SELECT {}{} WHERE {{\n  {}\n}}",
            if distinct { "DISTINCT " } else { "" },
            cols.join(" "),
            self.body.join("\n  ")
        );
        let sliceable = vars.iter().all(|v| v.kind.is_some() && !v.optional);
        if self.rng.gen_bool(0.4) {
            let total = sliceable && self.rng.gen_bool(0.7);
            let mut keys = vars.clone();
            keys.shuffle(self.rng);
            if !total {
                keys.truncate(self.rng.gen_range(1..=keys.len()));
            }
            q.push_str(&self.order_clause(keys.iter().map(|v| v.name.clone()).collect()));
            if total {
                q.push_str(&self.slice());
            }
        }
        q
    }

    fn order_clause(&mut self, keys: Vec<String>) -> String {
        let parts: Vec<String> = keys
            .into_iter()
            .map(|k| match self.rng.gen_range(0..3) {
                0 => format!("DESC(?{k})"),
                1 => format!("ASC(?{k})"),
                _ => format!("?{k}"),
            })
            .collect();
        format!(" ORDER BY {}", parts.join(" "))
    }

    fn slice(&mut self) -> String {
        let mut s = String::new();
        if self.rng.gen_bool(0.8) {
            s.push_str(&format!(" LIMIT {}", self.rng.gen_range(1..6)));
        }
        if self.rng.gen_bool(0.4) {
            s.push_str(&format!(" OFFSET {}", self.rng.gen_range(0..4)));
        }
        s
    }

    /// HAVING conditions pass `false`: no COUNT(*) and no optional inputs,
    /// since AVG over nothing is 0 in SPARQL but null in Cypher. The flag
    /// returned is set when the value can come from an empty input.
    fn aggregate_expr(&mut self, in_select: bool) -> Option<(String, bool)> {
        let pool: Vec<Var> = self.vars.iter().filter(|v| in_select || !v.optional).cloned().collect();
        let lits: Vec<Var> = pool.iter().filter(|v| v.kind.is_some()).cloned().collect();
        let numeric: Vec<Var> = lits.iter().filter(|v| v.kind != Some(Kind::Str)).cloned().collect();
        let choice = self.rng.gen_range(0..6);
        Some(match choice {
            0 if in_select => ("COUNT(*)".to_string(), false),
            0 | 1 => {
                let v = pool.choose(self.rng)?.name.clone();
                let d = if self.rng.gen_bool(0.3) { "DISTINCT " } else { "" };
                (format!("COUNT({d}?{v})"), false)
            }
            2 | 3 => {
                let v = numeric.choose(self.rng)?;
                let f = if choice == 2 { "SUM" } else { "AVG" };
                (format!("{f}(?{})", v.name), v.optional)
            }
            _ => {
                let v = lits.choose(self.rng)?;
                let f = if choice == 4 { "MIN" } else { "MAX" };
                (format!("{f}(?{})", v.name), v.optional)
            }
        })
    }

    fn grouped_projection(&mut self) -> Option<String> {
        let required: Vec<Var> = self.vars.iter().filter(|v| !v.optional).cloned().collect();
        let mut keys = required.clone();
        keys.shuffle(self.rng);
        keys.truncate(self.rng.gen_range(0..=2.min(keys.len())));
        let mut select: Vec<String> = keys.iter().map(|k| format!("?{}", k.name)).collect();
        let mut aliases = Vec::new();
        let mut may_be_empty = false;
        for i in 0..self.rng.gen_range(1..=2) {
            let (e, empty) = self.aggregate_expr(true)?;
            may_be_empty |= empty;
            let alias = format!("agg{i}");
            select.push(format!("({e} AS ?{alias})"));
            aliases.push(alias);
        }
        let mut q = format!("SELECT {} WHERE {{\n  {}\n}}", select.join(" "), self.body.join("\n  "));
        if !keys.is_empty() {
            let names: Vec<String> = keys.iter().map(|k| format!("?{}", k.name)).collect();
            q.push_str(&format!(" GROUP BY {}", names.join(" ")));
        }
        // without GROUP BY an empty match still yields one group
        if !keys.is_empty() && self.rng.gen_bool(0.4) {
            if let Some((e, _)) = self.aggregate_expr(false) {
                let op = [">", "<", ">=", "<=", "="][self.rng.gen_range(0..5)];
                q.push_str(&format!(" HAVING ({e} {op} {})", self.rng.gen_range(0..6)));
            }
        }
        if self.rng.gen_bool(0.4) {
            let sliceable = !may_be_empty && keys.iter().all(|k| k.kind.is_some());
            let mut order: Vec<String> = keys.iter().map(|k| k.name.clone()).chain(aliases).collect();
            order.shuffle(self.rng);
            q.push_str(&self.order_clause(order));
            if sliceable {
                q.push_str(&self.slice());
            }
        }
        Some(q)
    }
}

fn query(rng: &mut ChaCha8Rng, schema: &Schema) -> String {
    let mut g = QueryGen {
        rng,
        schema,
        nodes: Vec::new(),
        vars: Vec::new(),
        body: Vec::new(),
        next: 0,
    };
    g.required();
    g.optionals();
    g.filter();
    let select = if g.rng.gen_bool(0.35) {
        g.grouped_projection().unwrap_or_else(|| g.plain_projection())
    } else {
        g.plain_projection()
    };
    format!("PREFIX : <http://example.org/>\n{select}")
}

/// Generates the pair for `seed`. The same seed always yields the same pair.
pub fn generate(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = schema(&mut rng);
    let turtle = store(&mut rng, &schema);
    let sparql = query(&mut rng, &schema);
    Case { seed, turtle, sparql }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let a = generate(7);
        let b = generate(7);
        assert_eq!(a.turtle, b.turtle);
        assert_eq!(a.sparql, b.sparql);
    }

    #[test]
    fn stores_stay_small() {
        for seed in 0..50 {
            let store = s2c_sandbox::turtle::load_turtle(&generate(seed).turtle).unwrap();
            let subjects: std::collections::HashSet<_> = store.iter().map(|(s, _, _)| s.clone()).collect();
            assert!(subjects.len() <= MAX_NODES);
        }
    }
}
