use crate::corpus_io::is_punctuation;

const BOS: &str = "<BOS>";
const EOS: &str = "<EOS>";

/// Part-of-speech style feature templates for one position: lowercased words
/// in a ±2 window, prefixes and suffixes of length 1–4, and digit,
/// capitalization and punctuation flags.
pub fn crf_featurize(tokens: &[String], position: usize) -> Vec<String> {
    let word = |offset: isize| -> String {
        let i = position as isize + offset;
        if i < 0 {
            BOS.to_string()
        } else if i as usize >= tokens.len() {
            EOS.to_string()
        } else {
            tokens[i as usize].to_lowercase()
        }
    };
    let current = &tokens[position];
    let lower = current.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();

    let mut out = Vec::with_capacity(16);
    out.push(format!("w0={lower}"));
    out.push(format!("w-1={}", word(-1)));
    out.push(format!("w+1={}", word(1)));
    out.push(format!("w-2={}", word(-2)));
    out.push(format!("w+2={}", word(2)));
    for k in 1..=chars.len().min(4) {
        let pre: String = chars[..k].iter().collect();
        let suf: String = chars[chars.len() - k..].iter().collect();
        out.push(format!("pre{k}={pre}"));
        out.push(format!("suf{k}={suf}"));
    }
    let flag = |b: bool| if b { '1' } else { '0' };
    out.push(format!("digit={}", flag(current.chars().any(|c| c.is_numeric()))));
    out.push(format!(
        "cap={}",
        flag(current.chars().next().is_some_and(char::is_uppercase))
    ));
    out.push(format!("punct={}", flag(is_punctuation(current))));
    out
}
