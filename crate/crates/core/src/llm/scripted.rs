//! Scripted backend: ordered (matcher -> response) rules for tests.

use serde::Deserialize;

use super::{CompletionModel, CompletionParams, LlmError};

#[derive(Debug, Clone)]
pub enum Matcher {
    Substring(String),
    Pattern(regex::Regex),
}

impl Matcher {
    fn matches(&self, prompt: &str) -> bool {
        match self {
            Matcher::Substring(s) => prompt.contains(s.as_str()),
            Matcher::Pattern(re) => re.is_match(prompt),
        }
    }
}

/// First matching rule wins; optional default response on no match.
#[derive(Debug, Clone, Default)]
pub struct ScriptedModel {
    rules: Vec<(Matcher, String)>,
    default: Option<String>,
}

impl ScriptedModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_default(response: impl Into<String>) -> Self {
        ScriptedModel { rules: Vec::new(), default: Some(response.into()) }
    }

    pub fn rule(mut self, substring: impl Into<String>, response: impl Into<String>) -> Self {
        self.rules.push((Matcher::Substring(substring.into()), response.into()));
        self
    }

    pub fn pattern_rule(mut self, pattern: &str, response: impl Into<String>) -> Self {
        let re = regex::Regex::new(pattern).expect("valid script pattern");
        self.rules.push((Matcher::Pattern(re), response.into()));
        self
    }

    pub fn default_response(mut self, response: impl Into<String>) -> Self {
        self.default = Some(response.into());
        self
    }

    /// Script file: `{"rules": [{"match": "...", "pattern": false,
    /// "response": "..."}], "default": "..."}`.
    pub fn from_json_str(s: &str) -> Result<Self, String> {
        #[derive(Deserialize)]
        struct RuleFile {
            #[serde(rename = "match")]
            matcher: String,
            #[serde(default)]
            pattern: bool,
            response: String,
        }
        #[derive(Deserialize)]
        struct ScriptFile {
            #[serde(default)]
            rules: Vec<RuleFile>,
            #[serde(default)]
            default: Option<String>,
        }
        let file: ScriptFile = serde_json::from_str(s).map_err(|e| e.to_string())?;
        let mut model = ScriptedModel { rules: Vec::new(), default: file.default };
        for r in file.rules {
            if r.pattern {
                let re = regex::Regex::new(&r.matcher).map_err(|e| e.to_string())?;
                model.rules.push((Matcher::Pattern(re), r.response));
            } else {
                model.rules.push((Matcher::Substring(r.matcher), r.response));
            }
        }
        Ok(model)
    }
}

fn prompt_prefix(prompt: &str) -> String {
    prompt.chars().take(60).collect()
}

impl CompletionModel for ScriptedModel {
    fn complete(&self, prompt: &str, _params: &CompletionParams) -> Result<String, LlmError> {
        for (matcher, response) in &self.rules {
            if matcher.matches(prompt) {
                return Ok(response.clone());
            }
        }
        match &self.default {
            Some(d) => Ok(d.clone()),
            None => Err(LlmError::Script { prefix: prompt_prefix(prompt) }),
        }
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn backend_name(&self) -> &str {
        "scripted"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_matching_rule_wins() {
        let m = ScriptedModel::new()
            .rule("pick one single location", "Conclusion, location #2 with highest likelihood 80%.")
            .rule("location", "never reached");
        let out = m
            .complete("please pick one single location now", &CompletionParams::default())
            .unwrap();
        assert_eq!(out, "Conclusion, location #2 with highest likelihood 80%.");
    }

    #[test]
    fn default_when_no_rules() {
        let m = ScriptedModel::with_default("yes");
        assert_eq!(m.complete("anything", &CompletionParams::default()).unwrap(), "yes");
    }

    #[test]
    fn error_names_prompt_prefix() {
        let m = ScriptedModel::new();
        let err = m.complete("unmatched prompt text", &CompletionParams::default()).unwrap_err();
        assert!(err.to_string().contains("unmatched prompt"));
    }

    #[test]
    fn script_file_round_trip() {
        let m = ScriptedModel::from_json_str(
            r#"{"rules": [{"match": "^exact$", "pattern": true, "response": "hit"}], "default": "miss"}"#,
        )
        .unwrap();
        assert_eq!(m.complete("exact", &CompletionParams::default()).unwrap(), "hit");
        assert_eq!(m.complete("other", &CompletionParams::default()).unwrap(), "miss");
    }
}
