use super::{normalize_newlines, speaker_from_id, Token, Utterance};
use crate::{Error, Result};

// Slack for accumulated rounding in aligner output.
const TIME_EPS: f64 = 1e-9;

/// Parses a `.lab` word alignment: one `start end token` line per token,
/// fields separated by tabs or spaces.
///
/// Punctuation tokens may have zero-length spans; words may not.
pub fn parse_lab(text: &str, id: &str) -> Result<Utterance> {
    let text = normalize_newlines(text);
    let mut tokens: Vec<Token> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let mut fields = raw.splitn(3, [' ', '\t']);
        let start = parse_time(fields.next(), line, "start")?;
        let rest = fields.next();
        let end = parse_time(rest, line, "end")?;
        let word = fields.next().map(str::trim).unwrap_or_default();
        if word.is_empty() {
            return Err(Error::parse(line, "missing token"));
        }
        push_token(&mut tokens, Token::new(word, start, end), line)?;
    }
    Utterance::new(id, speaker_from_id(id), tokens)
}

fn parse_time(field: Option<&str>, line: usize, what: &str) -> Result<f64> {
    let field = field.ok_or_else(|| Error::parse(line, format!("missing {what} time")))?;
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("non-numeric {what} time {field:?}")))?;
    if !v.is_finite() || v < 0.0 {
        return Err(Error::parse(line, format!("invalid {what} time {v}")));
    }
    Ok(v)
}

fn push_token(tokens: &mut Vec<Token>, tok: Token, line: usize) -> Result<()> {
    if tok.end_s < tok.start_s || (!tok.is_punct && tok.end_s <= tok.start_s) {
        return Err(Error::parse(
            line,
            format!("end before start ({} -> {})", tok.start_s, tok.end_s),
        ));
    }
    if let Some(prev) = tokens.last() {
        if tok.start_s + TIME_EPS < prev.end_s {
            return Err(Error::parse(
                line,
                format!(
                    "token {:?} overlaps previous token {:?} ({} < {})",
                    tok.text, prev.text, tok.start_s, prev.end_s
                ),
            ));
        }
    }
    tokens.push(tok);
    Ok(())
}

#[derive(Default)]
struct Interval {
    xmin: Option<f64>,
    xmax: Option<f64>,
    text: Option<String>,
    line: usize,
}

/// Parses a long-form Praat TextGrid and returns the tokens of the interval
/// tier named `tier_name`. Intervals with empty text (silences) are skipped.
pub fn parse_textgrid(text: &str, tier_name: &str, id: &str) -> Result<Utterance> {
    let text = normalize_newlines(text);
    let mut names: Vec<String> = Vec::new();
    let mut in_target = false;
    let mut target_seen = false;
    let mut current: Option<Interval> = None;
    let mut tokens: Vec<Token> = Vec::new();

    let finish = |iv: Interval, tokens: &mut Vec<Token>| -> Result<()> {
        let (Some(xmin), Some(xmax), Some(t)) = (iv.xmin, iv.xmax, iv.text) else {
            return Err(Error::parse(iv.line, "malformed interval block"));
        };
        if xmax < xmin {
            return Err(Error::parse(
                iv.line,
                format!("interval ends before it starts ({xmin} -> {xmax})"),
            ));
        }
        let t = t.trim();
        if t.is_empty() {
            return Ok(());
        }
        push_token(tokens, Token::new(t, xmin, xmax), iv.line)
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let l = raw.trim();
        if l.starts_with("item [") {
            if let Some(iv) = current.take() {
                finish(iv, &mut tokens)?;
            }
            in_target = false;
            continue;
        }
        if let Some(v) = l.strip_prefix("name =") {
            let name = unquote(v.trim(), line)?;
            in_target = name == tier_name && !target_seen;
            target_seen |= in_target;
            names.push(name);
            continue;
        }
        if !in_target {
            continue;
        }
        if l.starts_with("intervals [") {
            if let Some(iv) = current.take() {
                finish(iv, &mut tokens)?;
            }
            current = Some(Interval {
                line,
                ..Default::default()
            });
        } else if l.starts_with("points [") {
            return Err(Error::parse(line, format!("tier {tier_name:?} is not an IntervalTier")));
        } else if let Some(iv) = current.as_mut() {
            if let Some(v) = l.strip_prefix("xmin =") {
                iv.xmin = Some(parse_time(Some(v), line, "xmin")?);
            } else if let Some(v) = l.strip_prefix("xmax =") {
                iv.xmax = Some(parse_time(Some(v), line, "xmax")?);
            } else if let Some(v) = l.strip_prefix("text =") {
                iv.text = Some(unquote(v.trim(), line)?);
            }
        }
    }
    if let Some(iv) = current.take() {
        finish(iv, &mut tokens)?;
    }
    if !target_seen {
        return Err(Error::MissingTier {
            wanted: tier_name.to_string(),
            available: names,
        });
    }
    Utterance::new(id, speaker_from_id(id), tokens)
}

fn unquote(v: &str, line: usize) -> Result<String> {
    let inner = v
        .strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .ok_or_else(|| Error::parse(line, format!("expected quoted string, got {v}")))?;
    Ok(inner.replace("\"\"", "\""))
}
