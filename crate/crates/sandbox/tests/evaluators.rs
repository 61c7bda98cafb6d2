use proptest::prelude::*;
use s2c_core::prefix::NamingOptions;
use s2c_core::{transpile, ExplicitRels, TranspileOptions};
use s2c_sandbox::cypher::{eval_cypher, CypherErrorKind};
use s2c_sandbox::graph::PropertyGraph;
use s2c_sandbox::{CypherExecutor, ExecError, SandboxBackend, SparqlExecutor, Value};

const EMMA_QUERY: &str = "PREFIX : <http://example.org/>
SELECT AVG(?ag) AS ?avgAge
WHERE {
  ?x a :Person .
  ?x :name 'Emma' .
  ?x :knows ?y .
  ?y :age ?ag .
}";

const EMMA_GRAPH: &str = "@prefix : <http://example.org/> .
:emma a :Person ; :name 'Emma' ; :knows :y1, :y2 .
:y1 a :Person ; :age 30 .
:y2 a :Person ; :age 40 .";

fn backend(ttl: &str) -> SandboxBackend {
    SandboxBackend::from_turtle(ttl, &NamingOptions::default()).unwrap()
}

#[test]
fn emma_average_on_both_sides() {
    let b = backend(EMMA_GRAPH);
    let oracle = b.eval_sparql(EMMA_QUERY).unwrap();
    assert_eq!(oracle.rows, [[Value::Dec(35.into())]]);

    let opts = TranspileOptions {
        explicit_rels: ExplicitRels::new([":knows"]).unwrap(),
        ..Default::default()
    };
    let cypher = transpile(EMMA_QUERY, &opts).unwrap().cypher.text;
    assert_eq!(b.eval_cypher(&cypher).unwrap().rows, oracle.rows);
}

#[test]
fn singer_count() {
    let b = backend("@prefix : <http://x/> . :s1 a :singer . :s2 a :singer . :s3 a :singer . :c a :concert .");
    let q = "PREFIX : <http://x/> select (count( *) as ?aggregation_all) where { ?t1 a :singer . }";
    assert_eq!(b.eval_sparql(q).unwrap().rows, [[Value::Int(3)]]);
    let cypher = transpile(q, &TranspileOptions::default()).unwrap().cypher.text;
    assert_eq!(b.eval_cypher(&cypher).unwrap().rows, [[Value::Int(3)]]);
}

#[test]
fn empty_inputs_give_no_rows() {
    let b = backend("");
    let q = "PREFIX : <http://x/> SELECT ?x WHERE { ?x a :L }";
    assert!(b.eval_sparql(q).unwrap().is_empty());
    assert!(eval_cypher(&PropertyGraph::new(), "MATCH (x:L) RETURN x").unwrap().is_empty());
}

#[test]
fn unbound_identifier_is_syntax_error() {
    match backend("").eval_cypher("MATCH (x:L) RETURN y") {
        Err(ExecError::Cypher(e)) => assert_eq!(e.kind, CypherErrorKind::Syntax),
        other => panic!("{other:?}"),
    }
}

#[test]
fn undeclared_prefix_is_rejected_by_oracle() {
    assert!(backend("").eval_sparql("SELECT ?x WHERE { ?x a foo:L }").is_err());
}

fn store_text(people: &[(u8, Option<u8>)], knows: &[(u8, u8)]) -> String {
    let mut ttl = String::from("@prefix : <http://x/> .\n");
    for (i, (age, pet)) in people.iter().enumerate() {
        ttl.push_str(&format!(":p{i} a :Person ; :age {age} .\n"));
        if let Some(p) = pet {
            ttl.push_str(&format!(":p{i} :owns :pet{p} . :pet{p} a :Pet .\n"));
        }
    }
    for (a, b) in knows {
        let n = people.len() as u8;
        ttl.push_str(&format!(":p{} :knows :p{} .\n", a % n, b % n));
    }
    ttl
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn removing_optional_never_adds_rows(
        people in prop::collection::vec((0u8..60, prop::option::of(0u8..4)), 1..8),
        knows in prop::collection::vec((any::<u8>(), any::<u8>()), 0..8),
    ) {
        let b = backend(&store_text(&people, &knows));
        let with = "PREFIX : <http://x/> SELECT ?x ?a WHERE { ?x a :Person . ?x :age ?a . OPTIONAL { ?x :owns ?p . ?p a :Pet . } }";
        let without = "PREFIX : <http://x/> SELECT ?x ?a WHERE { ?x a :Person . ?x :age ?a . }";
        let s_with = b.eval_sparql(with).unwrap().len();
        let s_without = b.eval_sparql(without).unwrap().len();
        prop_assert!(s_without <= s_with);

        let opts = TranspileOptions::default();
        let c_with = b.eval_cypher(&transpile(with, &opts).unwrap().cypher.text).unwrap().len();
        let c_without = b.eval_cypher(&transpile(without, &opts).unwrap().cypher.text).unwrap().len();
        prop_assert!(c_without <= c_with);
    }

    #[test]
    fn aggregates_match_direct_recomputation(
        people in prop::collection::vec((0u8..60, prop::option::of(0u8..4)), 1..10),
    ) {
        let b = backend(&store_text(&people, &[]));
        let q = "PREFIX : <http://x/> SELECT (COUNT(?a) AS ?c) (SUM(?a) AS ?s) (MIN(?a) AS ?lo) (MAX(?a) AS ?hi) WHERE { ?x :age ?a }";
        let ages: Vec<i64> = people.iter().map(|(a, _)| *a as i64).collect();
        let expected = vec![
            Value::Int(ages.len() as i64),
            Value::Int(ages.iter().sum()),
            Value::Int(*ages.iter().min().unwrap()),
            Value::Int(*ages.iter().max().unwrap()),
        ];
        prop_assert_eq!(&b.eval_sparql(q).unwrap().rows, &vec![expected.clone()]);
        let cypher = transpile(q, &TranspileOptions::default()).unwrap().cypher.text;
        prop_assert_eq!(&b.eval_cypher(&cypher).unwrap().rows, &vec![expected]);
    }
}
