//! Connector to live stores: a SPARQL protocol endpoint and a Neo4j-style
//! transactional HTTP endpoint. Configured through the environment.

use rust_decimal::prelude::FromPrimitive;
use rust_decimal::Decimal;
use s2c_sandbox::cypher::CypherEvalError;
use s2c_sandbox::rdf::Literal;
use s2c_sandbox::{CypherExecutor, ExecError, ResultTable, SparqlExecutor, Value};
use serde_json::Value as Json;

pub const SPARQL_ENDPOINT_VAR: &str = "S2C_SPARQL_ENDPOINT";
pub const GRAPH_ENDPOINT_VAR: &str = "S2C_GRAPH_ENDPOINT";
/// Optional `user:password` for the graph endpoint.
pub const GRAPH_AUTH_VAR: &str = "S2C_GRAPH_AUTH";

#[derive(Debug, Clone)]
pub struct HttpBackend {
    pub sparql_endpoint: String,
    pub graph_endpoint: String,
    pub graph_auth: Option<String>,
}

impl HttpBackend {
    pub fn from_env() -> Result<Self, String> {
        let get = |k: &str| std::env::var(k).map_err(|_| format!("{k} is not set"));
        Ok(HttpBackend {
            sparql_endpoint: get(SPARQL_ENDPOINT_VAR)?,
            graph_endpoint: get(GRAPH_ENDPOINT_VAR)?,
            graph_auth: std::env::var(GRAPH_AUTH_VAR).ok(),
        })
    }
}

fn transport(e: impl std::fmt::Display) -> ExecError {
    ExecError::Transport(e.to_string())
}

impl SparqlExecutor for HttpBackend {
    fn eval_sparql(&self, query: &str) -> Result<ResultTable, ExecError> {
        let resp = ureq::post(&self.sparql_endpoint)
            .header("Accept", "application/sparql-results+json")
            .send_form([("query", query)])
            .map_err(transport)?;
        let body = resp.into_body().read_to_string().map_err(transport)?;
        parse_sparql_results(&body).map_err(ExecError::Transport)
    }
}

impl CypherExecutor for HttpBackend {
    fn eval_cypher(&self, query: &str) -> Result<ResultTable, ExecError> {
        let payload = serde_json::json!({"statements": [{"statement": query, "resultDataContents": ["row"]}]});
        let mut req = ureq::post(&self.graph_endpoint)
            .header("Accept", "application/json")
            .header("Content-Type", "application/json");
        if let Some(auth) = &self.graph_auth {
            use base64::Engine;
            let token = base64::engine::general_purpose::STANDARD.encode(auth);
            req = req.header("Authorization", format!("Basic {token}"));
        }
        let resp = req.send(payload.to_string()).map_err(transport)?;
        let body = resp.into_body().read_to_string().map_err(transport)?;
        parse_graph_results(&body)
    }
}

fn term(binding: &Json) -> Result<Value, String> {
    let value = binding["value"].as_str().ok_or("binding without value")?;
    match binding["type"].as_str() {
        Some("uri") => Ok(Value::Uri(value.to_string())),
        Some("literal" | "typed-literal") => Literal::typed(value, binding["datatype"].as_str())
            .map(|l| l.to_value().presented()),
        Some("bnode") => Ok(Value::Str(format!("_:{value}"))),
        other => Err(format!("unknown term type {other:?}")),
    }
}

/// Reads the SPARQL 1.1 JSON results format.
pub fn parse_sparql_results(body: &str) -> Result<ResultTable, String> {
    let json: Json = serde_json::from_str(body).map_err(|e| e.to_string())?;
    let vars: Vec<String> = json["head"]["vars"]
        .as_array()
        .ok_or("missing head.vars")?
        .iter()
        .filter_map(|v| v.as_str().map(str::to_string))
        .collect();
    let mut table = ResultTable::new(vars.clone());
    for b in json["results"]["bindings"].as_array().ok_or("missing results.bindings")? {
        let row = vars
            .iter()
            .map(|v| match b.get(v) {
                Some(t) => term(t),
                None => Ok(Value::Null),
            })
            .collect::<Result<Vec<_>, _>>()?;
        table.push(row);
    }
    Ok(table)
}

fn graph_value(v: &Json) -> Value {
    match v {
        Json::Null => Value::Null,
        Json::Bool(b) => Value::Bool(*b),
        Json::Number(n) => match n.as_i64() {
            Some(i) => Value::Int(i),
            None => n
                .as_f64()
                .and_then(Decimal::from_f64)
                .map_or(Value::Null, |d| Value::Dec(d).presented()),
        },
        Json::String(s) => Value::Str(s.clone()),
        // nodes imported from RDF carry their IRI in `uri`
        Json::Object(m) => match m.get("uri").and_then(Json::as_str) {
            Some(u) => Value::Node(u.to_string()),
            None => Value::Str(v.to_string()),
        },
        Json::Array(_) => Value::Str(v.to_string()),
    }
}

/// Reads the transactional HTTP response of a single statement.
pub fn parse_graph_results(body: &str) -> Result<ResultTable, ExecError> {
    let json: Json = serde_json::from_str(body).map_err(transport)?;
    if let Some(err) = json["errors"].as_array().and_then(|e| e.first()) {
        let code = err["code"].as_str().unwrap_or("");
        let msg = format!("{code}: {}", err["message"].as_str().unwrap_or(""));
        let e = if code.contains("Syntax") {
            CypherEvalError::syntax(msg)
        } else {
            CypherEvalError::runtime(msg)
        };
        return Err(ExecError::Cypher(e));
    }
    let result = &json["results"][0];
    let columns: Vec<String> = result["columns"]
        .as_array()
        .ok_or_else(|| transport("missing results[0].columns"))?
        .iter()
        .filter_map(|c| c.as_str().map(str::to_string))
        .collect();
    let mut table = ResultTable::new(columns);
    for d in result["data"].as_array().into_iter().flatten() {
        let row = d["row"].as_array().ok_or_else(|| transport("data entry without row"))?;
        table.push(row.iter().map(graph_value).collect());
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparql_json() {
        let body = r#"{"head":{"vars":["x","n"]},"results":{"bindings":[
            {"x":{"type":"uri","value":"http://x/a"},"n":{"type":"literal","value":"3","datatype":"http://www.w3.org/2001/XMLSchema#integer"}},
            {"x":{"type":"uri","value":"http://x/b"}}]}}"#;
        let t = parse_sparql_results(body).unwrap();
        assert_eq!(t.rows[0], [Value::Uri("http://x/a".into()), Value::Int(3)]);
        assert_eq!(t.rows[1][1], Value::Null);
    }

    #[test]
    fn graph_json() {
        let body = r#"{"results":[{"columns":["n","avg"],"data":[{"row":[{"uri":"http://x/a","ROOT__age":3},2.5]}]}],"errors":[]}"#;
        let t = parse_graph_results(body).unwrap();
        assert_eq!(t.rows[0], [Value::Node("http://x/a".into()), Value::Dec(Decimal::new(25, 1))]);
    }

    #[test]
    fn graph_errors() {
        let body = r#"{"results":[],"errors":[{"code":"Neo.ClientError.Statement.SyntaxError","message":"bad"}]}"#;
        match parse_graph_results(body) {
            Err(ExecError::Cypher(e)) => assert_eq!(e.kind, s2c_sandbox::cypher::CypherErrorKind::Syntax),
            other => panic!("{other:?}"),
        }
    }
}
