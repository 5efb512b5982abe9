//! Token alignment, identifier renaming and substitution scripts used to
//! replay a prior edit at a new location.

use std::collections::{BTreeMap, BTreeSet};

use crate::tokenize::tokenize_spans;

/// A token located in a block of lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Tok<'a> {
    pub text: &'a str,
    pub line: usize,
    pub start: usize,
}

impl Tok<'_> {
    pub fn end(&self) -> usize {
        self.start + self.text.len()
    }
}

pub(crate) fn block_tokens(lines: &[String]) -> Vec<Tok<'_>> {
    lines
        .iter()
        .enumerate()
        .flat_map(|(line, l)| tokenize_spans(l).into_iter().map(move |(start, text)| Tok { text, line, start }))
        .collect()
}

/// Above this many DP cells alignment is skipped.
const MAX_LCS_CELLS: usize = 4_000_000;

/// Index pairs of a longest common subsequence of `a` and `b`, ascending.
pub(crate) fn lcs_pairs(a: &[&str], b: &[&str]) -> Option<Vec<(usize, usize)>> {
    let (n, m) = (a.len(), b.len());
    if n.saturating_mul(m) > MAX_LCS_CELLS {
        return None;
    }
    // suffix table: dp[i][j] = lcs of a[i..], b[j..]
    let w = m + 1;
    let mut dp = vec![0u32; (n + 1) * w];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            dp[i * w + j] = if a[i] == b[j] {
                dp[(i + 1) * w + j + 1] + 1
            } else {
                dp[(i + 1) * w + j].max(dp[i * w + j + 1])
            };
        }
    }
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if a[i] == b[j] {
            out.push((i, j));
            i += 1;
            j += 1;
        } else if dp[(i + 1) * w + j] >= dp[i * w + j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    Some(out)
}

/// A maximal mismatching stretch between two aligned sequences:
/// `a[a_lo..a_hi]` was turned into `b[b_lo..b_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Gap {
    pub a_lo: usize,
    pub a_hi: usize,
    pub b_lo: usize,
    pub b_hi: usize,
}

pub(crate) fn gaps(pairs: &[(usize, usize)], n: usize, m: usize) -> Vec<Gap> {
    let mut out = Vec::new();
    let (mut pa, mut pb) = (0, 0);
    for &(i, j) in pairs.iter().chain(std::iter::once(&(n, m))) {
        if i > pa || j > pb {
            out.push(Gap {
                a_lo: pa,
                a_hi: i,
                b_lo: pb,
                b_hi: j,
            });
        }
        pa = i + 1;
        pb = j + 1;
    }
    out
}

fn is_word(t: &str) -> bool {
    t.chars().next().is_some_and(|c| c.is_alphanumeric() || c == '_')
}

/// Word renames (identifiers and literals) implied by aligning `from`
/// against `to`: words facing each other inside equal-length mismatching
/// stretches. Words that also align with themselves somewhere, or would map
/// two ways, are left alone.
pub(crate) fn rename_map(from: &[&str], to: &[&str]) -> BTreeMap<String, String> {
    let Some(pairs) = lcs_pairs(from, to) else {
        return BTreeMap::new();
    };
    let fixed: BTreeSet<&str> = pairs.iter().map(|&(i, _)| from[i]).collect();
    let mut seen: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for g in gaps(&pairs, from.len(), to.len()) {
        if g.a_hi - g.a_lo != g.b_hi - g.b_lo {
            continue;
        }
        for (x, y) in from[g.a_lo..g.a_hi].iter().zip(&to[g.b_lo..g.b_hi]) {
            if is_word(x) && is_word(y) && x != y {
                seen.entry(x).or_default().insert(y);
            }
        }
    }
    seen.into_iter()
        .filter(|(x, ys)| ys.len() == 1 && !fixed.contains(x))
        .map(|(x, ys)| (x.to_owned(), ys.into_iter().next().unwrap_or_default().to_owned()))
        .collect()
}

/// Rewrites word tokens through `map`, leaving all other bytes as they
/// were.
pub(crate) fn rename_line(line: &str, map: &BTreeMap<String, String>) -> String {
    if map.is_empty() {
        return line.to_owned();
    }
    let mut out = String::with_capacity(line.len());
    let mut at = 0;
    for (start, t) in tokenize_spans(line) {
        if let Some(new) = map.get(t) {
            out.push_str(&line[at..start]);
            out.push_str(new);
            at = start + t.len();
        }
    }
    out.push_str(&line[at..]);
    out
}

pub(crate) fn indent_of(line: &str) -> &str {
    &line[..line.len() - line.trim_start().len()]
}

/// Moves lines from one indentation base to another. Blank lines stay blank
/// and lines not starting with `from` are untouched.
pub(crate) fn reindent(lines: &[String], from: &str, to: &str) -> Vec<String> {
    lines
        .iter()
        .map(|l| {
            if l.trim().is_empty() {
                l.clone()
            } else if let Some(rest) = l.strip_prefix(from) {
                format!("{to}{rest}")
            } else {
                l.clone()
            }
        })
        .collect()
}

/// One in-line rewrite learned from a prior: tokens `del` become the text
/// `ins`. With `del` empty the rewrite is anchored between the adjacent
/// tokens `left` and `right`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Substitution {
    pub del: Vec<String>,
    pub ins: String,
    pub left: Option<String>,
    pub right: Option<String>,
}

/// The token-level changes turning `before` into `after`, limited to changes
/// that stay on one line on both sides.
pub(crate) fn substitution_script(before: &[String], after: &[String]) -> Vec<Substitution> {
    let b = block_tokens(before);
    let a = block_tokens(after);
    let bt: Vec<&str> = b.iter().map(|t| t.text).collect();
    let at: Vec<&str> = a.iter().map(|t| t.text).collect();
    let Some(pairs) = lcs_pairs(&bt, &at) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for g in gaps(&pairs, bt.len(), at.len()) {
        let del = &b[g.a_lo..g.a_hi];
        if del.windows(2).any(|w| w[0].line != w[1].line) {
            continue;
        }
        if g.a_lo == g.a_hi {
            // pure insertion: needs matched neighbours on one line in `after`
            if g.a_lo == 0 || g.a_hi >= b.len() || g.b_lo == 0 || g.b_hi >= a.len() {
                continue;
            }
            let (l, r) = (&a[g.b_lo - 1], &a[g.b_hi]);
            if l.line != r.line || b[g.a_lo - 1].line != b[g.a_hi].line {
                continue;
            }
            out.push(Substitution {
                del: Vec::new(),
                ins: after[l.line][l.end()..r.start].to_owned(),
                left: Some(l.text.to_owned()),
                right: Some(r.text.to_owned()),
            });
            continue;
        }
        let ins = &a[g.b_lo..g.b_hi];
        let ins_text = match (ins.first(), ins.last()) {
            (Some(f), Some(l)) if f.line == l.line => after[f.line][f.start..l.end()].to_owned(),
            (None, None) => String::new(),
            _ => continue,
        };
        out.push(Substitution {
            del: del.iter().map(|t| t.text.to_owned()).collect(),
            ins: ins_text,
            left: None,
            right: None,
        });
    }
    out
}

/// Applies `script` to `target`, renaming through `map` first. Returns
/// `None` when no substitution found a place to apply.
pub(crate) fn apply_script(
    target: &[String],
    script: &[Substitution],
    map: &BTreeMap<String, String>,
) -> Option<Vec<String>> {
    // byte edits per line: (start, end, text)
    let mut edits: Vec<Vec<(usize, usize, String)>> = vec![Vec::new(); target.len()];
    let mut applied = false;
    for (li, line) in target.iter().enumerate() {
        let toks = tokenize_spans(line);
        for s in script {
            let rn = |t: &str| map.get(t).map(String::as_str).unwrap_or(t).to_owned();
            let ins = rename_line(&s.ins, map);
            if s.del.is_empty() {
                let (Some(l), Some(r)) = (&s.left, &s.right) else { continue };
                let (l, r) = (rn(l), rn(r));
                for w in toks.windows(2) {
                    if w[0].1 == l && w[1].1 == r {
                        edits[li].push((w[0].0 + w[0].1.len(), w[1].0, ins.clone()));
                    }
                }
            } else {
                let del: Vec<String> = s.del.iter().map(|t| rn(t)).collect();
                let n = del.len();
                let mut i = 0;
                while i + n <= toks.len() {
                    if toks[i..i + n].iter().zip(&del).all(|(t, d)| t.1 == d) {
                        let (s0, last) = (toks[i].0, &toks[i + n - 1]);
                        edits[li].push((s0, last.0 + last.1.len(), ins.clone()));
                        i += n;
                    } else {
                        i += 1;
                    }
                }
            }
        }
    }
    let out = target
        .iter()
        .zip(edits.iter_mut())
        .map(|(line, e)| {
            e.sort_by_key(|x| (x.0, x.1));
            // first-come wins on overlaps
            let mut line = line.clone();
            let mut kept: Vec<(usize, usize, String)> = Vec::new();
            for x in e.drain(..) {
                if kept.last().is_none_or(|k| x.0 >= k.1 && !(x.0 == k.0 && x.1 == k.1)) {
                    kept.push(x);
                }
            }
            for (s, en, text) in kept.into_iter().rev() {
                if line[s..en] != text {
                    applied = true;
                }
                line.replace_range(s..en, &text);
            }
            line
        })
        .collect();
    applied.then_some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn toks(s: &str) -> Vec<&str> {
        crate::tokenize::tokenize(s)
    }

    #[test]
    fn lcs_basic() {
        let p = lcs_pairs(&["a", "b", "c", "d"], &["a", "c", "d", "e"]).unwrap();
        assert_eq!(p, vec![(0, 0), (2, 1), (3, 2)]);
        assert_eq!(lcs_pairs(&[], &["a"]).unwrap(), vec![]);
    }

    #[test]
    fn gaps_cover_mismatches() {
        let g = gaps(&[(0, 0), (2, 1)], 4, 3);
        assert_eq!(
            g,
            vec![Gap { a_lo: 1, a_hi: 2, b_lo: 1, b_hi: 1 }, Gap { a_lo: 3, a_hi: 4, b_lo: 2, b_hi: 3 }]
        );
    }

    #[test]
    fn renames_skip_self_matched_names() {
        let from = toks("if b.level > 0 { name = b.name + name }");
        let to = toks("if t.level > 0 { testName = t.name + name }");
        let m = rename_map(&from, &to);
        assert_eq!(m.get("b").map(String::as_str), Some("t"));
        assert!(!m.contains_key("name"));
    }

    #[test]
    fn rename_preserves_layout() {
        let m = BTreeMap::from([("b".to_string(), "t".to_string())]);
        assert_eq!(rename_line("\tx := b.ab(b)  // b", &m), "\tx := t.ab(t)  // t");
    }

    #[test]
    fn reindent_shifts_base() {
        assert_eq!(reindent(&v(&["\tx", "", "y"]), "", "\t"), v(&["\t\tx", "", "\ty"]));
    }

    #[test]
    fn script_transfers_parameter_addition() {
        let s = substitution_script(&v(&["func newA(n int) *A {"]), &v(&["func newA(n int, m *M) *A {"]));
        assert_eq!(s.len(), 1);
        let out = apply_script(&v(&["func newB(n int) *B {"]), &s, &BTreeMap::new()).unwrap();
        assert_eq!(out, v(&["func newB(n int, m *M) *B {"]));
    }

    #[test]
    fn empty_script_changes_nothing() {
        assert!(substitution_script(&v(&["a b"]), &v(&["a b"])).is_empty());
        assert!(apply_script(&v(&["a b"]), &[], &BTreeMap::new()).is_none());
    }

    #[test]
    fn substitution_uses_renamed_tokens() {
        let s = substitution_script(&v(&["x := old(b)"]), &v(&["x := fresh(b)"]));
        let m = BTreeMap::from([("b".to_string(), "t".to_string())]);
        let out = apply_script(&v(&["y := old(t)"]), &s, &m).unwrap();
        assert_eq!(out, v(&["y := fresh(t)"]));
    }
}
