//! Brute-force reference implementations of the evaluation metrics, written
//! from the metric definitions without looking at the library code. They
//! favour obviousness over speed: plain loops, linear scans, no maps.

/// Same splitting rule as the shared tokenizer: runs of alphanumerics and
/// `_` are one token, any other non-space char is its own token.
pub fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() || c == '_' {
            cur.push(c);
        } else {
            if !cur.is_empty() {
                out.push(cur.clone());
                cur.clear();
            }
            if !c.is_whitespace() {
                out.push(c.to_string());
            }
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

pub fn lines_tokens(lines: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    for l in lines {
        out.extend(tokens(l));
    }
    out
}

fn ngrams(toks: &[String], n: usize) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    if toks.len() >= n {
        for i in 0..=toks.len() - n {
            out.push(toks[i..i + n].to_vec());
        }
    }
    out
}

fn count(list: &[Vec<String>], g: &[String]) -> usize {
    let mut c = 0;
    for x in list {
        if x.as_slice() == g {
            c += 1;
        }
    }
    c
}

/// Sentence BLEU-4 in percent: uniform weights, brevity penalty, add-one
/// smoothing of the 2- to 4-gram precisions; 0 when the candidate is empty
/// or shares no unigram with the reference; undefined for an empty
/// reference.
pub fn bleu4(cand: &[String], refr: &[String]) -> Option<f64> {
    if refr.is_empty() {
        return None;
    }
    if cand.is_empty() {
        return Some(0.0);
    }
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let cg = ngrams(cand, n);
        let rg = ngrams(refr, n);
        // clipped matches: each distinct candidate n-gram counted once
        let mut matched = 0usize;
        let mut done: Vec<Vec<String>> = Vec::new();
        for g in &cg {
            if count(&done, g) > 0 {
                continue;
            }
            done.push(g.clone());
            matched += count(&cg, g).min(count(&rg, g));
        }
        let p = if n == 1 {
            if matched == 0 {
                return Some(0.0);
            }
            matched as f64 / cg.len() as f64
        } else {
            (matched as f64 + 1.0) / (cg.len() as f64 + 1.0)
        };
        log_sum += p.ln() / 4.0;
    }
    let (c, r) = (cand.len() as f64, refr.len() as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    Some(100.0 * bp * log_sum.exp())
}

pub fn exact(cand: &[String], refr: &[String]) -> bool {
    lines_tokens(cand) == lines_tokens(refr)
}

/// (precision, recall); precision of an empty prediction is 1.
pub fn file_pr(pred: &[String], gt: &[String]) -> (f64, f64) {
    let mut hit = 0;
    for p in pred {
        if gt.contains(p) {
            hit += 1;
        }
    }
    let p = if pred.is_empty() { 1.0 } else { hit as f64 / pred.len() as f64 };
    (p, hit as f64 / gt.len() as f64)
}

/// (accuracy, macro precision, macro recall) over classes 0..3. A class
/// absent from both sequences scores 1 for precision and recall; otherwise
/// an empty denominator scores 0.
pub fn line_metrics(pred: &[usize], gt: &[usize]) -> (f64, f64, f64) {
    let mut correct = 0;
    for i in 0..pred.len() {
        if pred[i] == gt[i] {
            correct += 1;
        }
    }
    let mut ps = 0.0;
    let mut rs = 0.0;
    for c in 0..3 {
        let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
        for i in 0..pred.len() {
            if pred[i] == c && gt[i] == c {
                tp += 1.0;
            } else if pred[i] == c {
                fp += 1.0;
            } else if gt[i] == c {
                fneg += 1.0;
            }
        }
        if tp + fp + fneg == 0.0 {
            ps += 1.0;
            rs += 1.0;
            continue;
        }
        ps += if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        rs += if tp + fneg > 0.0 { tp / (tp + fneg) } else { 0.0 };
    }
    (correct as f64 / pred.len() as f64, ps / 3.0, rs / 3.0)
}
