//! Text format for contextual rule tables.
//!
//! One rule per line, seven `|`-separated fields:
//!
//! ```text
//! name ContextManagerAllSensors
//! a | ActivateOutdoor | General | Outdoor | GPS.isValid() && !GPS.location()=home | 100 | OFF
//! ```
//!
//! The current-state field is a comma-separated list. Blank lines and lines
//! starting with `#` are ignored. The optional `name` line names the machine.

use microctl_core::afsm::{Atom, ContextState, Output, Predicate, Rule, RuleId, TimeRef};
use microctl_core::phone_sim::{Location, Vibration};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct TableParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleTable {
    pub name: Option<String>,
    pub rules: Vec<Rule>,
}

pub fn parse_table(text: &str) -> Result<RuleTable, TableParseError> {
    let mut table = RuleTable {
        name: None,
        rules: Vec::new(),
    };
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |message: String| TableParseError { line, message };
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix("name ") {
            if table.name.is_some() {
                return Err(err("duplicate name line".into()));
            }
            table.name = Some(name.trim().to_string());
            continue;
        }
        table.rules.push(parse_rule(trimmed).map_err(err)?);
    }
    Ok(table)
}

fn parse_rule(line: &str) -> Result<Rule, String> {
    let fields = split_fields(line);
    let [id, name, from, to, predicate, volume, vibration] = fields[..] else {
        return Err(format!(
            "expected 7 `|`-separated fields, found {}",
            fields.len()
        ));
    };
    let mut chars = id.chars();
    let id = match (chars.next(), chars.next()) {
        (Some(c), None) => RuleId::new(c),
        _ => None,
    }
    .ok_or_else(|| format!("invalid rule id `{id}`"))?;
    if name.is_empty() {
        return Err("empty rule name".into());
    }
    let from = from
        .split(',')
        .map(|s| state(s.trim()))
        .collect::<Result<_, _>>()?;
    let volume: u8 = volume
        .parse()
        .map_err(|_| format!("invalid volume `{volume}`"))?;
    let vibration = Vibration::from_name(vibration)
        .ok_or_else(|| format!("invalid vibration `{vibration}`"))?;
    Ok(Rule {
        id,
        name: name.to_string(),
        from,
        to: state(to)?,
        predicate: parse_predicate(predicate)?,
        output: Output { volume, vibration },
    })
}

/// Splits on single `|`; `||` belongs to the predicate.
fn split_fields(line: &str) -> Vec<&str> {
    let bytes = line.as_bytes();
    let mut fields = Vec::new();
    let mut start = 0;
    for i in 0..bytes.len() {
        let lone =
            bytes[i] == b'|' && (i == 0 || bytes[i - 1] != b'|') && bytes.get(i + 1) != Some(&b'|');
        if lone {
            fields.push(line[start..i].trim());
            start = i + 1;
        }
    }
    fields.push(line[start..].trim());
    fields
}

fn state(s: &str) -> Result<ContextState, String> {
    ContextState::from_name(s).ok_or_else(|| format!("unknown context state `{s}`"))
}

pub fn format_rule(rule: &Rule) -> String {
    let from: Vec<&str> = rule.from.iter().map(|s| s.name()).collect();
    format!(
        "{} | {} | {} | {} | {} | {} | {}",
        rule.id,
        rule.name,
        from.join(", "),
        rule.to.name(),
        rule.predicate,
        rule.output.volume,
        rule.output.vibration
    )
}

pub fn format_table(name: &str, rules: &[Rule]) -> String {
    let mut out = format!("name {name}\n");
    for rule in rules {
        out.push_str(&format_rule(rule));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Not,
    And,
    Or,
    Open,
    Close,
    Eq,
    Gt,
    Gte,
    Word(String),
}

fn tokenize(s: &str) -> Result<Vec<Token>, String> {
    let chars: Vec<char> = s.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        match c {
            c if c.is_whitespace() => i += 1,
            '!' => {
                tokens.push(Token::Not);
                i += 1;
            }
            '(' => {
                tokens.push(Token::Open);
                i += 1;
            }
            ')' => {
                tokens.push(Token::Close);
                i += 1;
            }
            '=' => {
                tokens.push(Token::Eq);
                i += 1;
            }
            '&' if next == Some('&') => {
                tokens.push(Token::And);
                i += 2;
            }
            '|' if next == Some('|') => {
                tokens.push(Token::Or);
                i += 2;
            }
            '>' if next == Some('=') => {
                tokens.push(Token::Gte);
                i += 2;
            }
            '>' => {
                tokens.push(Token::Gt);
                i += 1;
            }
            c if c.is_alphanumeric() || c == '_' || c == '.' => {
                let mut word = String::new();
                while i < chars.len() {
                    let c = chars[i];
                    if c.is_alphanumeric() || c == '_' || c == '.' {
                        word.push(c);
                        i += 1;
                    } else if c == '(' && chars.get(i + 1) == Some(&')') {
                        // `GPS.speed()` and `GPS.speed` are the same accessor
                        i += 2;
                    } else {
                        break;
                    }
                }
                tokens.push(Token::Word(word));
            }
            other => return Err(format!("unexpected character `{other}` in predicate")),
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn eat(&mut self, t: &Token) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Predicate, String> {
        let mut parts = vec![self.conjunction()?];
        while self.eat(&Token::Or) {
            parts.push(self.conjunction()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().expect("one part")
        } else {
            Predicate::Or(parts)
        })
    }

    fn conjunction(&mut self) -> Result<Predicate, String> {
        let mut parts = vec![self.unary()?];
        while self.eat(&Token::And) {
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().expect("one part")
        } else {
            Predicate::And(parts)
        })
    }

    fn unary(&mut self) -> Result<Predicate, String> {
        match self.next() {
            Some(Token::Not) => {
                if let Some(Token::Word(w)) = self.peek() {
                    if is_rule_name(w)
                        && !matches!(
                            self.tokens.get(self.pos + 1),
                            Some(Token::Eq | Token::Gt | Token::Gte)
                        )
                    {
                        let name = w.clone();
                        self.pos += 1;
                        return Ok(Predicate::RuleNegation(name));
                    }
                }
                Ok(Predicate::not(self.unary()?))
            }
            Some(Token::Open) => {
                let inner = self.expr()?;
                if !self.eat(&Token::Close) {
                    return Err("missing `)`".into());
                }
                Ok(inner)
            }
            Some(Token::Word(w)) => self.atom(&w),
            Some(t) => Err(format!("unexpected {t:?}")),
            None => Err("unexpected end of predicate".into()),
        }
    }

    fn value(&mut self) -> Result<String, String> {
        match self.next() {
            Some(Token::Word(v)) => Ok(v),
            _ => Err("expected a value after comparison".into()),
        }
    }

    fn atom(&mut self, word: &str) -> Result<Predicate, String> {
        let op = match self.peek() {
            Some(t @ (Token::Eq | Token::Gt | Token::Gte)) => {
                let t = t.clone();
                self.pos += 1;
                Some(t)
            }
            _ => None,
        };
        let atom = match (word, op) {
            ("GPS.isValid", None) => Atom::GpsIsValid,
            ("GPS.location", Some(Token::Eq)) => {
                let v = self.value()?;
                Atom::GpsLocationIs(
                    Location::from_name(&v).ok_or_else(|| format!("unknown location `{v}`"))?,
                )
            }
            ("GPS.speed", Some(Token::Gt)) => Atom::GpsSpeedGt(number(&self.value()?)?),
            ("BT", Some(Token::Eq)) => Atom::BtConnected(self.value()?),
            ("BT.count", Some(Token::Gte)) => Atom::BtCountGte(number(&self.value()?)?),
            ("Time", Some(Token::Gte)) => {
                let v = self.value()?;
                Atom::TimeGte(match v.as_str() {
                    "meeting_start" => TimeRef::MeetingStart,
                    "meeting_end" => TimeRef::MeetingEnd,
                    _ => return Err(format!("unknown time reference `{v}`")),
                })
            }
            (w, None) if is_rule_name(w) => {
                return Err(format!("rule reference `{w}` must be negated"));
            }
            (w, _) => return Err(format!("unrecognised condition `{w}`")),
        };
        Ok(Predicate::Atom(atom))
    }
}

fn is_rule_name(w: &str) -> bool {
    !matches!(w, "GPS" | "BT" | "Time")
        && !w.contains('.')
        && w.chars().next().is_some_and(|c| c.is_ascii_uppercase())
}

fn number(s: &str) -> Result<u32, String> {
    s.parse().map_err(|_| format!("invalid number `{s}`"))
}

/// Parses a guard expression. `&&` binds tighter than `||`; `!` applies to
/// the following condition, group or rule name.
pub fn parse_predicate(s: &str) -> Result<Predicate, String> {
    let mut p = Parser {
        tokens: tokenize(s)?,
        pos: 0,
    };
    let pred = p.expr()?;
    if p.pos < p.tokens.len() {
        return Err(format!("trailing input in predicate `{s}`"));
    }
    Ok(pred)
}
