//! Minimal placeholder engine.
//!
//! Understands `{{ }}` actions holding a pipeline of `.Values.*`,
//! `.Release.Name`, `.Chart.Name`, `.Chart.Version` and literals, piped
//! through `default`, `quote`, `upper`, `lower` or `randAlphaNum N`.
//! `{{-` and `-}}` trim whitespace, `{{/* */}}` is a comment. Any other
//! construct yields [`FailureCategory::EngineUnsupported`].

use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_yaml::Value;

use super::{FailureCategory, Overrides, RenderError, RenderFailure, Renderer, TemplateOutput};
use crate::chart::ChartPackage;
use crate::yaml::{canonical_scalar, ValueTree};

const ALPHANUM: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";

pub struct BuiltinRenderer {
    rng: Mutex<ChaCha8Rng>,
    release_name: String,
}

impl Default for BuiltinRenderer {
    fn default() -> Self {
        Self::new()
    }
}

impl BuiltinRenderer {
    /// Random functions draw from OS entropy.
    pub fn new() -> Self {
        Self::with_rng(ChaCha8Rng::from_rng(&mut rand::rng()))
    }

    pub fn seeded(seed: u64) -> Self {
        Self::with_rng(ChaCha8Rng::seed_from_u64(seed))
    }

    fn with_rng(rng: ChaCha8Rng) -> Self {
        BuiltinRenderer { rng: Mutex::new(rng), release_name: "release-name".into() }
    }

    pub fn with_release_name(mut self, name: impl Into<String>) -> Self {
        self.release_name = name.into();
        self
    }

    fn random_alnum(&self, n: usize) -> String {
        let mut rng = self.rng.lock().expect("rng lock");
        (0..n).map(|_| ALPHANUM[rng.random_range(0..ALPHANUM.len())] as char).collect()
    }
}

impl Renderer for BuiltinRenderer {
    fn name(&self) -> &'static str {
        "builtin"
    }

    fn render_templates(
        &self,
        pkg: &ChartPackage,
        values: &ValueTree,
        _value_overrides: &Overrides,
    ) -> Result<Vec<(String, TemplateOutput)>, RenderError> {
        let ctx = Context { engine: self, pkg, values };
        let mut out: Vec<_> = pkg
            .templates
            .iter()
            .filter(|t| t.is_manifest())
            .map(|t| (t.path.clone(), ctx.render(&t.path, &t.body)))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Field(String),
    Ident(String),
    Str(String),
    Num(String),
    Pipe,
}

/// Evaluated pipeline value; `None` is an absent key.
type Val = Option<Value>;

struct Context<'a> {
    engine: &'a BuiltinRenderer,
    pkg: &'a ChartPackage,
    values: &'a ValueTree,
}

impl Context<'_> {
    fn render(&self, path: &str, body: &str) -> TemplateOutput {
        let fail = |cat, msg: String| RenderFailure::new(path, cat, msg);
        let mut out = String::new();
        let mut rest = body;
        while let Some(start) = rest.find("{{") {
            let mut before = &rest[..start];
            let mut inner = &rest[start + 2..];
            if let Some(s) = inner.strip_prefix('-') {
                before = before.trim_end();
                inner = s;
            }
            out.push_str(before);
            let end = inner
                .find("}}")
                .ok_or_else(|| fail(FailureCategory::SyntaxError, "unclosed action".into()))?;
            let mut action = &inner[..end];
            let mut after = &inner[end + 2..];
            if let Some(a) = action.strip_suffix('-') {
                action = a;
                after = after.trim_start();
            }
            let action = action.trim();
            if !(action.starts_with("/*") && action.ends_with("*/")) {
                out.push_str(&self.action(action).map_err(|(c, m)| fail(c, m))?);
            }
            rest = after;
        }
        out.push_str(rest);
        Ok(out)
    }

    fn action(&self, src: &str) -> Result<String, (FailureCategory, String)> {
        let tokens = lex(src)?;
        let mut value: Option<Val> = None;
        for cmd in tokens.split(|t| *t == Token::Pipe) {
            value = Some(self.command(cmd, value)?);
        }
        let value = value.ok_or((FailureCategory::SyntaxError, "empty action".into()))?;
        match value {
            None | Some(Value::Null) => Err((FailureCategory::MissingValue, format!("no value for `{src}`"))),
            Some(v @ (Value::Mapping(_) | Value::Sequence(_) | Value::Tagged(_))) => Err((
                FailureCategory::EngineUnsupported,
                format!("`{src}` yields a {} value", if v.is_mapping() { "mapping" } else { "collection" }),
            )),
            Some(Value::String(s)) => Ok(s),
            Some(v) => Ok(canonical_scalar(&v).expect("scalar").text),
        }
    }

    fn command(&self, cmd: &[Token], piped: Option<Val>) -> Result<Val, (FailureCategory, String)> {
        let unsupported = |what: &str| (FailureCategory::EngineUnsupported, format!("unsupported: {what}"));
        let Some((head, args)) = cmd.split_first() else {
            return Err((FailureCategory::SyntaxError, "empty command".into()));
        };
        let name = match head {
            Token::Ident(name) => name.as_str(),
            operand if args.is_empty() && piped.is_none() => return self.operand(operand),
            _ => return Err(unsupported("arguments to a non-function")),
        };
        let mut argv = args.iter().map(|a| self.operand(a)).collect::<Result<Vec<_>, _>>()?;
        argv.extend(piped);
        match (name, argv.as_slice()) {
            ("default", [fallback, v]) => Ok(if is_empty(v) { fallback.clone() } else { v.clone() }),
            ("quote", [v]) => Ok(present(v).map(|s| Value::String(format!("{s:?}")))),
            ("upper", [v]) => Ok(present(v).map(|s| Value::String(s.to_uppercase()))),
            ("lower", [v]) => Ok(present(v).map(|s| Value::String(s.to_lowercase()))),
            ("randAlphaNum", [n]) => {
                let n = present(n)
                    .and_then(|s| s.parse::<usize>().ok())
                    .ok_or((FailureCategory::SyntaxError, "randAlphaNum needs a length".into()))?;
                Ok(Some(Value::String(self.engine.random_alnum(n))))
            }
            ("default" | "quote" | "upper" | "lower" | "randAlphaNum", _) => {
                Err((FailureCategory::SyntaxError, format!("wrong number of arguments to {name}")))
            }
            _ => Err(unsupported(name)),
        }
    }

    fn operand(&self, tok: &Token) -> Result<Val, (FailureCategory, String)> {
        match tok {
            Token::Str(s) => Ok(Some(Value::String(s.clone()))),
            Token::Num(n) => Ok(Some(crate::yaml::resolve_plain(n))),
            Token::Field(f) => self.field(f),
            Token::Ident(i) => Err((FailureCategory::EngineUnsupported, format!("unsupported: {i}"))),
            Token::Pipe => Err((FailureCategory::SyntaxError, "misplaced pipe".into())),
        }
    }

    fn field(&self, f: &str) -> Result<Val, (FailureCategory, String)> {
        match f {
            ".Release.Name" => return Ok(Some(Value::String(self.engine.release_name.clone()))),
            ".Chart.Name" => return Ok(Some(Value::String(self.pkg.metadata.name.clone()))),
            ".Chart.Version" => return Ok(Some(Value::String(self.pkg.metadata.version.clone()))),
            _ => {}
        }
        let Some(rest) = f.strip_prefix(".Values") else {
            return Err((FailureCategory::EngineUnsupported, format!("unsupported: {f}")));
        };
        let mut node = self.values;
        for key in rest.split('.').skip(1) {
            match node.get(key) {
                Some(n) => node = n,
                None => return Ok(None),
            }
        }
        Ok(Some(node.clone()))
    }
}

fn present(v: &Val) -> Option<String> {
    match v {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(v) => canonical_scalar(v).map(|c| c.text),
    }
}

fn is_empty(v: &Val) -> bool {
    match v {
        None | Some(Value::Null) => true,
        Some(Value::Bool(b)) => !b,
        Some(Value::String(s)) => s.is_empty(),
        Some(Value::Number(n)) => n.as_f64() == Some(0.0),
        Some(Value::Mapping(m)) => m.is_empty(),
        Some(Value::Sequence(s)) => s.is_empty(),
        Some(Value::Tagged(_)) => false,
    }
}

fn lex(src: &str) -> Result<Vec<Token>, (FailureCategory, String)> {
    let unsupported = |what: String| (FailureCategory::EngineUnsupported, format!("unsupported: {what}"));
    let mut out = Vec::new();
    let mut chars = src.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '|' {
            chars.next();
            out.push(Token::Pipe);
        } else if c == '"' {
            chars.next();
            let mut s = String::new();
            loop {
                match chars.next() {
                    Some((_, '"')) => break,
                    Some((_, '\\')) => match chars.next() {
                        Some((_, 'n')) => s.push('\n'),
                        Some((_, 't')) => s.push('\t'),
                        Some((_, e)) => s.push(e),
                        None => break,
                    },
                    Some((_, ch)) => s.push(ch),
                    None => return Err((FailureCategory::SyntaxError, "unterminated string".into())),
                }
            }
            out.push(Token::Str(s));
        } else {
            let end = src[i..]
                .find(|ch: char| ch.is_whitespace() || ch == '|')
                .map_or(src.len(), |e| i + e);
            let word = &src[i..end];
            while chars.peek().is_some_and(|&(j, _)| j < end) {
                chars.next();
            }
            let first = word.chars().next().expect("non-empty word");
            let tok = if first == '.' && word[1..].split('.').all(is_ident) && word.len() > 1 {
                Token::Field(word.to_string())
            } else if first.is_ascii_digit() || (first == '-' && word.len() > 1) {
                word.parse::<f64>().map_err(|_| unsupported(word.to_string()))?;
                Token::Num(word.to_string())
            } else if is_ident(word) {
                Token::Ident(word.to_string())
            } else {
                return Err(unsupported(word.to_string()));
            };
            out.push(tok);
        }
    }
    Ok(out)
}

fn is_ident(s: &str) -> bool {
    let mut cs = s.chars();
    cs.next().is_some_and(|c| c.is_alphabetic() || c == '_') && cs.all(|c| c.is_alphanumeric() || c == '_')
}
