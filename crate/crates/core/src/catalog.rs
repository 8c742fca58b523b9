//! Builtin component catalog: every builtin publishes its parameter schema here.

use serde::{Deserialize, Serialize};

use crate::canonical::Value;
use crate::model::{ComponentCatalog, ComponentRole, ParamKind, ParamSpec, ParameterSchema};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuiltinComponent {
    pub role: ComponentRole,
    pub name: String,
    pub description: String,
    pub schema: ParameterSchema,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub components: Vec<BuiltinComponent>,
}

fn probability(name: &str, default: f64, help: &str) -> ParamSpec {
    ParamSpec::new(name, ParamKind::Float, Value::Float(default))
        .bounds(Some(0.0), Some(1.0))
        .describe(help)
}

fn positive_int(name: &str, default: i64, help: &str) -> ParamSpec {
    ParamSpec::new(name, ParamKind::Int, Value::Int(default))
        .bounds(Some(1.0), None)
        .describe(help)
}

fn optional_int(name: &str, help: &str) -> ParamSpec {
    ParamSpec::new(name, ParamKind::Int, Value::Int(0))
        .bounds(Some(0.0), None)
        .describe(help)
}

impl Catalog {
    pub fn builtin() -> Self {
        use ComponentRole::*;
        let c = |role, name: &str, description: &str, entries: Vec<ParamSpec>| BuiltinComponent {
            role,
            name: name.to_owned(),
            description: description.to_owned(),
            schema: ParameterSchema::new(entries),
        };
        let max_queries = || optional_int("max_queries", "stop after this many queries (0 = no limit)");
        let components = vec![
            c(
                QueryGenerator,
                "single_term",
                "one topic term per query, most frequent first",
                vec![max_queries()],
            ),
            c(
                QueryGenerator,
                "title_pairs",
                "title terms, then ordered title term pairs",
                vec![max_queries()],
            ),
            c(
                QueryGenerator,
                "fixed_queries",
                "a fixed ';'-separated query list, independent of the topic",
                vec![
                    ParamSpec::new("queries", ParamKind::String, Value::from(""))
                        .describe("queries separated by ';'"),
                ],
            ),
            c(
                SnippetClassifier,
                "random_attract",
                "snippet is attractive with fixed probability",
                vec![probability("p", 0.5, "attraction probability")],
            ),
            c(
                SnippetClassifier,
                "qrel_informed",
                "attraction probability depends on the qrels label",
                vec![
                    probability("p_rel", 0.9, "probability for relevant documents"),
                    probability("p_nonrel", 0.1, "probability for non-relevant documents"),
                ],
            ),
            c(
                SnippetClassifier,
                "rank_biased",
                "attraction probability gamma^(rank-1)",
                vec![probability("gamma", 0.5, "per-rank decay")],
            ),
            c(
                DocumentClassifier,
                "qrel_accuracy",
                "judge agrees with qrels with given true/false positive rates",
                vec![
                    probability("p_tp", 0.8, "probability of judging a relevant document relevant"),
                    probability("p_fp", 0.2, "probability of judging a non-relevant document relevant"),
                ],
            ),
            c(
                DocumentClassifier,
                "always_relevant",
                "every clicked document is judged relevant",
                vec![],
            ),
            c(
                StoppingStrategy,
                "fixed_depth",
                "next query after k snippets",
                vec![positive_int("k", 10, "snippets examined per query")],
            ),
            c(
                StoppingStrategy,
                "frustration",
                "next query after n consecutive unattractive snippets",
                vec![positive_int("n", 3, "tolerated consecutive unattractive snippets")],
            ),
            c(
                StoppingStrategy,
                "total_marks",
                "end the session after m documents are marked relevant",
                vec![positive_int("m", 5, "marked documents needed")],
            ),
            c(
                StoppingStrategy,
                "combined",
                "any combination of the depth, frustration and marks rules (0 disables a rule)",
                vec![
                    optional_int("depth", "fixed depth k"),
                    optional_int("frustration", "frustration threshold n"),
                    optional_int("marks", "total marks m"),
                ],
            ),
            c(
                SearchBackend,
                "bm25",
                "Okapi BM25 over the template corpus",
                vec![
                    ParamSpec::new("k1", ParamKind::Float, Value::Float(1.2))
                        .bounds(Some(0.0), None)
                        .describe("term frequency saturation"),
                    ParamSpec::new("b", ParamKind::Float, Value::Float(0.75))
                        .bounds(Some(0.0), Some(1.0))
                        .describe("length normalisation"),
                    positive_int("serp_depth", 10, "results per page"),
                ],
            ),
            c(
                SearchBackend,
                "mock",
                "fixed ranking from the template backend config",
                vec![],
            ),
        ];
        Catalog { components }
    }

    pub fn find(&self, role: ComponentRole, name: &str) -> Option<&BuiltinComponent> {
        self.components.iter().find(|c| c.role == role && c.name == name)
    }
}

impl ComponentCatalog for Catalog {
    fn builtin_schema(&self, role: ComponentRole, name: &str) -> Option<ParameterSchema> {
        self.find(role, name).map(|c| c.schema.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_schemas_are_well_formed() {
        let cat = Catalog::builtin();
        for c in &cat.components {
            assert!(c.schema.problems().is_empty(), "{}: {:?}", c.name, c.schema.problems());
        }
        for role in ComponentRole::ALL {
            assert!(cat.components.iter().any(|c| c.role == role));
        }
    }
}
