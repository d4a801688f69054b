//! Request templates: literal text interleaved with `{ queryInputs | filter() ... }`
//! placeholders.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("template syntax error at byte {position}: {reason}")]
pub struct TemplateSyntax {
    pub position: usize,
    pub reason: String,
}

impl TemplateSyntax {
    fn new(position: usize, reason: impl Into<String>) -> Self {
        Self {
            position,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PlaceholderSource {
    #[serde(rename = "queryInputs")]
    QueryInputs,
}

/// One `name(args)` step of a placeholder's filter chain, as written.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FilterCall {
    pub name: String,
    pub args: Vec<String>,
}

/// Filters the engine knows how to apply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KnownFilter {
    /// Strip a leading `NAMESPACE:` (the operation's input namespace).
    RmPrefix,
    /// Prepend `ns:` unless already present.
    WrapPrefix(String),
}

impl FilterCall {
    pub fn new(name: impl Into<String>, args: Vec<String>) -> Self {
        Self {
            name: name.into(),
            args,
        }
    }

    /// `None` for unknown names or wrong arity.
    pub fn known(&self) -> Option<KnownFilter> {
        match (self.name.as_str(), self.args.as_slice()) {
            ("rmPrefix", []) => Some(KnownFilter::RmPrefix),
            ("wrapPrefix", [ns]) if !ns.is_empty() => Some(KnownFilter::WrapPrefix(ns.clone())),
            _ => None,
        }
    }
}

impl fmt::Display for FilterCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.args.join(", "))
    }
}

/// Context available to filters at render time.
#[derive(Debug, Clone, Copy)]
pub struct FilterContext<'a> {
    pub namespace: &'a str,
}

/// Apply `filters` left to right. Unknown filters are rejected when the
/// registry is validated, so here they pass the value through.
pub fn apply_filter_chain(value: &str, filters: &[FilterCall], ctx: FilterContext<'_>) -> String {
    let mut out = value.to_string();
    for call in filters {
        match call.known() {
            Some(KnownFilter::RmPrefix) => {
                let prefix = format!("{}:", ctx.namespace);
                if let Some(rest) = out.strip_prefix(&prefix) {
                    out = rest.to_string();
                }
            }
            Some(KnownFilter::WrapPrefix(ns)) => {
                let prefix = format!("{ns}:");
                if !out.starts_with(&prefix) {
                    out = format!("{prefix}{out}");
                }
            }
            None => {}
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Placeholder {
    pub source: PlaceholderSource,
    pub filters: Vec<FilterCall>,
    /// Original text including braces.
    #[serde(skip)]
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Segment {
    Literal { text: String },
    Placeholder(Placeholder),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    segments: Vec<Segment>,
}

impl Template {
    pub fn compile(raw: &str) -> Result<Self, TemplateSyntax> {
        compile_template(raw)
    }

    pub fn literal(text: &str) -> Self {
        let segments = if text.is_empty() {
            Vec::new()
        } else {
            vec![Segment::Literal {
                text: text.to_string(),
            }]
        };
        Self { segments }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn placeholders(&self) -> impl Iterator<Item = &Placeholder> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Placeholder(p) => Some(p),
            Segment::Literal { .. } => None,
        })
    }

    pub fn references_input(&self) -> bool {
        self.placeholders().next().is_some()
    }

    /// Render, substituting each placeholder with `fill(placeholder)`.
    pub fn render_with(&self, mut fill: impl FnMut(&Placeholder) -> String) -> String {
        let mut out = String::new();
        for seg in &self.segments {
            match seg {
                Segment::Literal { text } => out.push_str(text),
                Segment::Placeholder(p) => out.push_str(&fill(p)),
            }
        }
        out
    }

    /// Render `values` (each passed through the placeholder's filter chain, then
    /// joined with `separator`) into every placeholder.
    pub fn render(&self, values: &[String], separator: &str, ctx: FilterContext<'_>) -> String {
        self.render_with(|p| {
            values
                .iter()
                .map(|v| apply_filter_chain(v, &p.filters, ctx))
                .collect::<Vec<_>>()
                .join(separator)
        })
    }

    /// The source string this template was compiled from.
    pub fn to_source(&self) -> String {
        self.render_with(|p| p.raw.clone())
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_source())
    }
}

impl Serialize for Template {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_source())
    }
}

impl<'de> Deserialize<'de> for Template {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Template::compile(&s).map_err(serde::de::Error::custom)
    }
}

pub fn compile_template(raw: &str) -> Result<Template, TemplateSyntax> {
    let mut segments = Vec::new();
    let mut literal = String::new();
    let mut chars = raw.char_indices().peekable();

    while let Some((pos, c)) = chars.next() {
        match c {
            '{' => {
                let end = find_closing(raw, pos)?;
                if !literal.is_empty() {
                    segments.push(Segment::Literal {
                        text: std::mem::take(&mut literal),
                    });
                }
                let placeholder = parse_placeholder(raw, pos, end)?;
                segments.push(Segment::Placeholder(placeholder));
                while chars.peek().is_some_and(|&(p, _)| p <= end) {
                    chars.next();
                }
            }
            '}' => return Err(TemplateSyntax::new(pos, "unbalanced '}'")),
            _ => literal.push(c),
        }
    }
    if !literal.is_empty() {
        segments.push(Segment::Literal { text: literal });
    }
    Ok(Template { segments })
}

/// Byte offset of the `}` closing the placeholder opened at `open`.
fn find_closing(raw: &str, open: usize) -> Result<usize, TemplateSyntax> {
    let mut quote: Option<char> = None;
    for (i, c) in raw[open + 1..].char_indices() {
        let pos = open + 1 + i;
        match (quote, c) {
            (Some(q), c) if c == q => quote = None,
            (Some(_), _) => {}
            (None, '"' | '\'') => quote = Some(c),
            (None, '{') => return Err(TemplateSyntax::new(pos, "nested '{' inside placeholder")),
            (None, '}') => return Ok(pos),
            (None, _) => {}
        }
    }
    Err(TemplateSyntax::new(open, "unbalanced '{'"))
}

fn parse_placeholder(raw: &str, open: usize, close: usize) -> Result<Placeholder, TemplateSyntax> {
    let body = &raw[open + 1..close];
    let mut cursor = Cursor {
        text: body,
        pos: 0,
        base: open + 1,
    };

    cursor.skip_ws();
    let source_at = cursor.abs();
    let source = cursor.ident();
    if source != "queryInputs" {
        return Err(TemplateSyntax::new(
            source_at,
            format!("unknown placeholder source {source:?}"),
        ));
    }

    let mut filters = Vec::new();
    loop {
        cursor.skip_ws();
        match cursor.peek() {
            None => break,
            Some('|') => {
                cursor.bump();
                cursor.skip_ws();
                filters.push(cursor.filter_call()?);
            }
            Some(c) => {
                return Err(TemplateSyntax::new(
                    cursor.abs(),
                    format!("expected '|' or '}}', found {c:?}"),
                ))
            }
        }
    }

    Ok(Placeholder {
        source: PlaceholderSource::QueryInputs,
        filters,
        raw: raw[open..=close].to_string(),
    })
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
    base: usize,
}

impl Cursor<'_> {
    fn abs(&self) -> usize {
        self.base + self.pos
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.bump();
        }
    }

    fn ident(&mut self) -> &str {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_alphanumeric() || c == '_')
        {
            self.bump();
        }
        &self.text[start..self.pos]
    }

    fn filter_call(&mut self) -> Result<FilterCall, TemplateSyntax> {
        let at = self.abs();
        let name = self.ident().to_string();
        if name.is_empty() {
            return Err(TemplateSyntax::new(at, "expected filter name"));
        }
        self.skip_ws();
        if self.bump() != Some('(') {
            return Err(TemplateSyntax::new(
                self.abs(),
                format!("expected '(' after filter {name:?}"),
            ));
        }
        let mut args = Vec::new();
        let mut current = String::new();
        let mut quote: Option<char> = None;
        let mut saw_any = false;
        loop {
            let Some(c) = self.bump() else {
                return Err(TemplateSyntax::new(
                    self.abs(),
                    format!("unterminated argument list for filter {name:?}"),
                ));
            };
            match (quote, c) {
                (Some(q), c) if c == q => quote = None,
                (Some(_), c) => current.push(c),
                (None, '"' | '\'') => {
                    quote = Some(c);
                    saw_any = true;
                }
                (None, ',') => {
                    args.push(current.trim().to_string());
                    current.clear();
                    saw_any = true;
                }
                (None, ')') => break,
                (None, c) => {
                    if !c.is_whitespace() {
                        saw_any = true;
                    }
                    current.push(c);
                }
            }
        }
        if saw_any {
            args.push(current.trim().to_string());
        }
        Ok(FilterCall { name, args })
    }
}
