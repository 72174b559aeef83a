//! Canonical line-based text form of a journal.
//!
//! ```text
//! SWIIM/1 source="gel.png" hash=<64 hex>
//! 1 IMPORT file="gel.png" hash=<64 hex>
//! 2 CROP x=10 y=20 w=100 h=80 hash=<64 hex>
//! 3 BRIGHTNESS_CONTRAST b=0.200000 c=0.000000 hash=<64 hex>
//! ```
//!
//! Lines starting with `#` (and ` #` trailers outside quotes) are comments.
//! The serializer never emits comments, so canonical text is a fixed point
//! of `serialize(parse(_))`.

use std::fmt::Write as _;

use super::action::{is_canonical_uint, Action, FieldKind, FieldValue, Fixed6, OpKind};
use super::{Journal, JournalEntry, JournalError, FORMAT_VERSION};
use crate::hash::ContentHash;

pub const HEADER_MAGIC: &str = "SWIIM";

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c if c.is_control() => {
                let _ = write!(out, "\\u{{{:x}}}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn render_value(v: &FieldValue) -> String {
    match v {
        FieldValue::Int(i) => i.to_string(),
        FieldValue::Decimal(d) => d.to_string(),
        FieldValue::Text(s) => quote(s),
        FieldValue::Hash(h) => h.to_hex(),
    }
}

/// Canonical text of one entry, without the trailing newline.
pub fn entry_line(entry: &JournalEntry) -> String {
    let mut line = format!("{} {}", entry.seq, entry.action.kind().name());
    for (key, value) in entry.action.fields() {
        let _ = write!(line, " {key}={}", render_value(&value));
    }
    let _ = write!(line, " hash={}", entry.post_hash);
    line
}

pub fn serialize(journal: &Journal) -> Result<String, JournalError> {
    journal.validate()?;
    let mut out = format!(
        "{HEADER_MAGIC}/{} source={} hash={}\n",
        journal.version,
        quote(&journal.source_name),
        journal.source_hash
    );
    for entry in journal.sorted_entries() {
        out.push_str(&entry_line(entry));
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug)]
enum Token {
    Bare(String),
    Quoted(String),
}

struct Pair {
    key: String,
    key_col: usize,
    value: Token,
    value_col: usize,
}

/// Cursor over one line; columns are 1-based character positions.
struct LineLexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl LineLexer {
    fn new(src: &str, line: usize) -> Self {
        LineLexer {
            chars: src.chars().collect(),
            pos: 0,
            line,
        }
    }

    fn col(&self) -> usize {
        self.pos + 1
    }

    fn err(&self, column: usize, message: impl Into<String>) -> JournalError {
        JournalError::Syntax {
            line: self.line,
            column,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    /// True at end of line or at a trailing ` #` comment.
    fn at_end(&self) -> bool {
        match self.peek() {
            None => true,
            Some(' ') => self.chars.get(self.pos + 1) == Some(&'#'),
            _ => false,
        }
    }

    fn word(&mut self, allowed: impl Fn(char) -> bool, what: &str) -> Result<(String, usize), JournalError> {
        let start = self.pos;
        while self.peek().is_some_and(&allowed) {
            self.pos += 1;
        }
        if start == self.pos {
            let found = match self.peek() {
                Some(c) => format!("`{c}`"),
                None => "end of line".into(),
            };
            return Err(self.err(start + 1, format!("expected {what}, found {found}")));
        }
        Ok((self.chars[start..self.pos].iter().collect(), start + 1))
    }

    fn space(&mut self) -> Result<(), JournalError> {
        match self.peek() {
            Some(' ') => {
                self.pos += 1;
                if self.peek() == Some(' ') {
                    return Err(self.err(self.col(), "expected a single space"));
                }
                Ok(())
            }
            Some(c) => Err(self.err(self.col(), format!("expected space, found `{c}`"))),
            None => Err(self.err(self.col(), "unexpected end of line")),
        }
    }

    fn quoted(&mut self) -> Result<String, JournalError> {
        let open = self.col();
        self.pos += 1;
        let mut out = String::new();
        loop {
            let Some(c) = self.peek() else {
                return Err(self.err(open, "unterminated string"));
            };
            self.pos += 1;
            match c {
                '"' => return Ok(out),
                '\\' => {
                    let esc_col = self.col() - 1;
                    match self.peek() {
                        Some('"') => out.push('"'),
                        Some('\\') => out.push('\\'),
                        Some('u') => {
                            self.pos += 1;
                            if self.peek() != Some('{') {
                                return Err(self.err(esc_col, "malformed \\u{..} escape"));
                            }
                            self.pos += 1;
                            let (hex, _) = self.word(|c| c.is_ascii_hexdigit(), "hex digits")?;
                            if self.peek() != Some('}') {
                                return Err(self.err(esc_col, "malformed \\u{..} escape"));
                            }
                            let ch = u32::from_str_radix(&hex, 16)
                                .ok()
                                .and_then(char::from_u32)
                                .filter(|c| c.is_control())
                                .ok_or_else(|| self.err(esc_col, "\\u escape must encode a control character"))?;
                            out.push(ch);
                        }
                        _ => return Err(self.err(esc_col, "unknown escape sequence")),
                    }
                    self.pos += 1;
                }
                c if c.is_control() => {
                    return Err(self.err(self.col() - 1, "control character in string"));
                }
                c => out.push(c),
            }
        }
    }

    fn value(&mut self) -> Result<(Token, usize), JournalError> {
        let col = self.col();
        if self.peek() == Some('"') {
            return Ok((Token::Quoted(self.quoted()?), col));
        }
        let (word, col) = self.word(|c| c.is_ascii_alphanumeric() || c == '.' || c == '-', "value")?;
        Ok((Token::Bare(word), col))
    }

    /// ` key=value` pairs up to end of line.
    fn pairs(&mut self) -> Result<Vec<Pair>, JournalError> {
        let mut pairs = Vec::new();
        while !self.at_end() {
            self.space()?;
            let (key, key_col) = self.word(|c| c.is_ascii_lowercase(), "key")?;
            if self.peek() != Some('=') {
                return Err(self.err(self.col(), format!("expected `=` after key `{key}`")));
            }
            self.pos += 1;
            let (value, value_col) = self.value()?;
            pairs.push(Pair { key, key_col, value, value_col });
        }
        Ok(pairs)
    }
}

fn convert(
    lx: &LineLexer,
    kind: FieldKind,
    token: Token,
    col: usize,
) -> Result<FieldValue, JournalError> {
    let expected = || lx.err(col, format!("expected {}", kind.describe()));
    match (kind, token) {
        (FieldKind::Text, Token::Quoted(s)) => Ok(FieldValue::Text(s)),
        (FieldKind::Text, Token::Bare(_)) => Err(expected()),
        (_, Token::Quoted(_)) => Err(expected()),
        (FieldKind::Int, Token::Bare(s)) => {
            let digits = s.strip_prefix('-').unwrap_or(&s);
            if !is_canonical_uint(digits) || s == "-0" {
                return Err(expected());
            }
            s.parse().map(FieldValue::Int).map_err(|_| expected())
        }
        (FieldKind::Decimal, Token::Bare(s)) => {
            s.parse::<Fixed6>().map(FieldValue::Decimal).map_err(|_| expected())
        }
        (FieldKind::Hash, Token::Bare(s)) => {
            ContentHash::from_hex(&s).map(FieldValue::Hash).ok_or_else(expected)
        }
    }
}

fn parse_header(lx: &mut LineLexer) -> Result<(String, ContentHash), JournalError> {
    let (magic, col) = lx.word(|c| c != ' ', "journal header")?;
    let Some(version) = magic.strip_prefix(&format!("{HEADER_MAGIC}/")) else {
        return Err(lx.err(col, format!("expected `{HEADER_MAGIC}/{FORMAT_VERSION}` header")));
    };
    if version != FORMAT_VERSION.to_string() {
        return Err(lx.err(col, format!("unsupported journal version `{version}`")));
    }
    let pairs = lx.pairs()?;
    let mut source = None;
    let mut hash = None;
    for pair in pairs {
        let (slot_kind, is_source) = match pair.key.as_str() {
            "source" => (FieldKind::Text, true),
            "hash" => (FieldKind::Hash, false),
            other => return Err(lx.err(pair.key_col, format!("unexpected header key `{other}`"))),
        };
        let already = if is_source { source.is_some() } else { hash.is_some() };
        if already {
            return Err(lx.err(pair.key_col, format!("duplicate header key `{}`", pair.key)));
        }
        match convert(lx, slot_kind, pair.value, pair.value_col)? {
            FieldValue::Text(s) => source = Some(s),
            FieldValue::Hash(h) => hash = Some(h),
            _ => unreachable!(),
        }
    }
    match (source, hash) {
        (Some(s), Some(h)) => Ok((s, h)),
        (None, _) => Err(lx.err(lx.col(), "header missing `source`")),
        (_, None) => Err(lx.err(lx.col(), "header missing `hash`")),
    }
}

fn parse_entry(lx: &mut LineLexer) -> Result<JournalEntry, JournalError> {
    let (seq_text, seq_col) = lx.word(|c| c.is_ascii_digit(), "sequence number")?;
    let seq: u64 = if is_canonical_uint(&seq_text) && seq_text != "0" {
        seq_text
            .parse()
            .map_err(|_| lx.err(seq_col, "sequence number too large"))?
    } else {
        return Err(lx.err(seq_col, "sequence number must be a positive integer without leading zeros"));
    };
    lx.space()?;
    let (op_name, _) = lx.word(|c| c.is_ascii_uppercase() || c == '_', "operation name")?;
    let line = Some(lx.line);
    let schema_err = |problem| JournalError::Schema {
        line,
        seq,
        op: op_name.clone(),
        problem,
    };
    let kind = OpKind::from_name(&op_name).ok_or_else(|| schema_err(super::SchemaProblem::UnknownOp))?;
    let pairs = lx.pairs()?;
    let mut fields = Vec::with_capacity(pairs.len());
    let mut post_hash = None;
    for pair in pairs {
        if pair.key == "hash" {
            if post_hash.is_some() {
                return Err(schema_err(super::SchemaProblem::DuplicateKey("hash".into())));
            }
            match convert(lx, FieldKind::Hash, pair.value, pair.value_col)? {
                FieldValue::Hash(h) => post_hash = Some(h),
                _ => unreachable!(),
            }
            continue;
        }
        let field_kind = kind
            .field_kind(&pair.key)
            .ok_or_else(|| schema_err(super::SchemaProblem::UnexpectedKey(pair.key.clone())))?;
        fields.push((pair.key, convert(lx, field_kind, pair.value, pair.value_col)?));
    }
    let action = Action::from_fields(kind, fields).map_err(schema_err)?;
    let post_hash = post_hash.ok_or_else(|| schema_err(super::SchemaProblem::MissingKey("hash".into())))?;
    Ok(JournalEntry { seq, action, post_hash })
}

fn is_skippable(line: &str) -> bool {
    line.is_empty() || line.starts_with('#')
}

pub fn parse(text: &str) -> Result<Journal, JournalError> {
    let lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l));
    let mut header = None;
    let mut entries: Vec<JournalEntry> = Vec::new();
    let mut last_line = 1;
    let mut import_seen = false;
    for (line_no, raw) in lines {
        last_line = line_no;
        if let Some(col) = raw.find('\r') {
            return Err(JournalError::Syntax {
                line: line_no,
                column: raw[..col].chars().count() + 1,
                message: "carriage return not allowed; lines end with LF".into(),
            });
        }
        if is_skippable(raw) {
            continue;
        }
        let mut lx = LineLexer::new(raw, line_no);
        let Some((_, source_hash)) = &header else {
            header = Some(parse_header(&mut lx)?);
            continue;
        };
        let entry = parse_entry(&mut lx)?;
        let line = Some(line_no);
        let expected = entries.len() as u64 + 1;
        if entry.seq != expected {
            return Err(JournalError::Sequence {
                line,
                message: format!("expected entry {expected}, found {}", entry.seq),
            });
        }
        let is_import = entry.action.kind() == OpKind::Import;
        if expected == 1 && !is_import {
            return Err(JournalError::Sequence {
                line,
                message: format!("first entry must be IMPORT, found {}", entry.action.kind()),
            });
        }
        if is_import {
            if import_seen {
                return Err(JournalError::DuplicateImport { line, seq: entry.seq });
            }
            if entry.post_hash != *source_hash {
                return Err(JournalError::Sequence {
                    line,
                    message: "IMPORT hash differs from header source hash".into(),
                });
            }
            import_seen = true;
        }
        entries.push(entry);
    }
    let Some((source_name, source_hash)) = header else {
        return Err(JournalError::Syntax {
            line: 1,
            column: 1,
            message: format!("missing `{HEADER_MAGIC}/{FORMAT_VERSION}` header"),
        });
    };
    if entries.is_empty() {
        return Err(JournalError::Sequence {
            line: Some(last_line),
            message: "journal has no IMPORT entry".into(),
        });
    }
    Ok(Journal {
        version: FORMAT_VERSION,
        source_name,
        source_hash,
        entries,
    })
}
