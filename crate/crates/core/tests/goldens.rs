use s2c_core::emitter::normalize_whitespace;
use s2c_core::{transpile, TranspileOptions};

const SINGER_COUNT: &str = "select (count( *) as ?aggregation_all) where { ?t1 a :singer . }";

const PET_QUERY: &str = "SELECT ?petName (AVG(?personAge)
AS ?avgPersonAge)
WHERE {
  ?x rdf:type :Person .
  ?x person:age ?personAge .
  ?x person:hasPet ?pet .
  ?pet a :Pet .
  ?pet pet:name ?petName .
  FILTER CONTAINS(?petName, 'b')
}
GROUP BY ?petName
HAVING (AVG(?personAge) > 30)
ORDER BY DESC(?avgPersonAge)
OFFSET 1
LIMIT 10";

const BSBM_OPTIONAL: &str = "PREFIX bsbm-inst: <http://www4.wiwiss.fu-berlin.de/bizer/bsbm/v01/instances/>
PREFIX bsbm: <http://www4.wiwiss.fu-berlin.de/bizer/bsbm/v01/vocabulary/>
PREFIX rdfs: <http://www.w3.org/2000/01/rdf-schema#>
PREFIX rdf: <http://www.w3.org/1999/02/22-rdf-syntax-ns#>
PREFIX ele: <http://purl.org/dc/elements/1.1/>
SELECT distinct ?label WHERE{ ?review rdf:type bsbm:Review . ?review bsbm:reviewFor ?product . ?product rdf:type bsbm-inst:ProductType1. ?product bsbm:productPropertyNumeric1 ?pPN1 . ?product rdfs:label ?label. OPTIONAL { ?product ele:publisher ?producer . ?producer a bsbm:Producer . } FILTER(?pPN1 > 1000) } ORDER BY(?label) LIMIT 10";

const BSBM_OPTIONAL_CYPHER: &str = "MATCH (review:bsbm__Review)-[:bsbm__reviewFor]->(product:bsbm_inst__ProductType1)
OPTIONAL MATCH (product:bsbm_inst__ProductType1)-[:ele__publisher]->(producer:bsbm__Producer)
WHERE product.bsbm__productPropertyNumeric1 > 1000
RETURN DISTINCT product.rdfs__label AS label
ORDER BY product.rdfs__label ASC
LIMIT 10";

#[test]
fn count_all_projection() {
    let t = transpile(SINGER_COUNT, &TranspileOptions::default()).unwrap();
    assert_eq!(
        t.cypher.text,
        "MATCH (t1:ROOT__singer)\nWITH COUNT(*) AS aggregation_all\nRETURN aggregation_all"
    );
}

#[test]
fn pet_query_ast() {
    let t = transpile(PET_QUERY, &TranspileOptions::default()).unwrap();
    let mut vars = t.ast.vars.clone();
    vars.sort();
    assert_eq!(vars, ["avgPersonAge", "personAge", "pet", "petName", "x"]);
    let expected = serde_json::json!({
        "vars": t.ast.vars,
        "iri": {},
        "nodes": {"x": {"label": "ROOT__Person"}, "pet": {"label": "ROOT__Pet"}},
        "props": {"personAge": "x.person__age", "petName": "pet.pet__name"},
        "rels": [{"s": "x", "r": ":person__hasPet", "o": "pet", "optional": false, "inverse": false}],
        "rel_types": [":person__hasPet"],
        "aggregates": {"avgPersonAge": "AVG(x.person__age)"},
        "WHERE": ["pet.pet__name CONTAINS 'b'"],
        "WITH": {"avgPersonAge": "AVG(x.person__age) AS avgPersonAge", "petName": "pet.pet__name AS petName"},
        "WHERE_WITH": [["avgPersonAge", ">", "30"]],
        "UNWIND": {},
        "RETURN": ["petName, avgPersonAge"],
        "ORDER BY": {"avgPersonAge": "DESC"},
        "LIMIT": 10,
        "OFFSET": 1,
        "subgraphs": {}
    });
    assert_eq!(t.ast.to_json(), expected, "{}", t.ast.to_json_pretty());
    assert_eq!(
        t.cypher.text,
        "MATCH (x:ROOT__Person)-[:person__hasPet]->(pet:ROOT__Pet)\n\
         WHERE pet.pet__name CONTAINS 'b'\n\
         WITH AVG(x.person__age) AS avgPersonAge, pet.pet__name AS petName\n\
         WHERE avgPersonAge > 30\n\
         RETURN petName, avgPersonAge\n\
         ORDER BY avgPersonAge DESC\n\
         LIMIT 10\n\
         SKIP 1"
    );
}

#[test]
fn bsbm_optional_query() {
    let t = transpile(BSBM_OPTIONAL, &TranspileOptions::default()).unwrap();
    assert_eq!(normalize_whitespace(&t.cypher.text), normalize_whitespace(BSBM_OPTIONAL_CYPHER), "{}", t.cypher.text);
}
