//! Independent reference computations for the integration and acceptance
//! tests. Nothing here calls the library's tokenizer, counters or scorers.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use cm_core::corpus::Document;
use cm_core::topics::TopicModel;

pub const FIXTURE_TERMS: [&str; 8] = ["adapt", "climate", "emission", "finance", "forest", "ocean", "policy", "risk"];

/// Park–Miller generator, kept here so the fixture does not depend on the
/// library's RNG choices.
struct Lcg(u64);

impl Lcg {
    fn next(&mut self, bound: u64) -> u64 {
        self.0 = self.0 * 48271 % 2_147_483_647;
        self.0 % bound
    }
}

/// Five documents of ten sentences each: fifty sentences of 3 to 7 lowercase
/// words from [`FIXTURE_TERMS`].
pub fn cooc_fixture() -> Vec<Document> {
    let mut rng = Lcg(20240611);
    (0..5)
        .map(|d| {
            let sentences: Vec<String> = (0..10)
                .map(|_| {
                    let len = 3 + rng.next(5);
                    (0..len).map(|_| FIXTURE_TERMS[rng.next(8) as usize]).collect::<Vec<_>>().join(" ")
                })
                .collect();
            Document::new(format!("s{d}"), sentences.join(". ") + ".")
        })
        .collect()
}

/// Term sets of every non-empty sentence, split on `.`, `!` and `?` and on
/// whitespace.
pub fn sentence_sets(docs: &[Document]) -> Vec<BTreeSet<String>> {
    docs.iter()
        .flat_map(|d| d.body.split(['.', '!', '?']).map(str::to_string).collect::<Vec<_>>())
        .map(|s| s.split_whitespace().map(|w| w.to_lowercase()).collect::<BTreeSet<_>>())
        .filter(|s| !s.is_empty())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCounts {
    pub n_a: u64,
    pub n_b: u64,
    pub n_ab: u64,
    pub n: u64,
}

/// Every unordered pair of distinct terms with its context counts, found by
/// scanning all contexts once per pair.
pub fn brute_pairs(contexts: &[BTreeSet<String>]) -> BTreeMap<(String, String), PairCounts> {
    let terms: BTreeSet<&String> = contexts.iter().flatten().collect();
    let terms: Vec<&String> = terms.into_iter().collect();
    let mut out = BTreeMap::new();
    for (i, a) in terms.iter().enumerate() {
        for b in &terms[i + 1..] {
            let mut c = PairCounts { n_a: 0, n_b: 0, n_ab: 0, n: contexts.len() as u64 };
            for ctx in contexts {
                let (ha, hb) = (ctx.contains(*a), ctx.contains(*b));
                c.n_a += ha as u64;
                c.n_b += hb as u64;
                c.n_ab += (ha && hb) as u64;
            }
            if c.n_ab > 0 {
                out.insert(((*a).clone(), (*b).clone()), c);
            }
        }
    }
    out
}

pub fn dice(c: &PairCounts) -> f64 {
    (c.n_ab + c.n_ab) as f64 / (c.n_a + c.n_b) as f64
}

pub fn pmi(c: &PairCounts) -> f64 {
    // log-difference form
    (c.n_ab as f64).ln() + (c.n as f64).ln() - (c.n_a as f64).ln() - (c.n_b as f64).ln()
}

fn xlnx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// G² in the entropy form `2(Σ O ln O − Σ R ln R − Σ C ln C + N ln N)`.
pub fn g2(c: &PairCounts) -> f64 {
    let (a, b, ab, n) = (c.n_a as f64, c.n_b as f64, c.n_ab as f64, c.n as f64);
    let cells = [ab, a - ab, b - ab, n - a - b + ab];
    let s = cells.iter().map(|&o| xlnx(o)).sum::<f64>() - xlnx(a) - xlnx(n - a) - xlnx(b) - xlnx(n - b) + xlnx(n);
    (2.0 * s).max(0.0)
}

/// `(pair, counts, score)` sorted like the library output: score descending,
/// then terms.
pub fn ranked(pairs: &BTreeMap<(String, String), PairCounts>, score: fn(&PairCounts) -> f64, min_count: u64) -> Vec<((String, String), PairCounts, f64)> {
    let mut v: Vec<_> = pairs
        .iter()
        .filter(|(_, c)| c.n_ab >= min_count)
        .map(|(k, c)| (k.clone(), *c, score(c)))
        .collect();
    v.sort_by(|x, y| y.2.total_cmp(&x.2).then_with(|| x.0.cmp(&y.0)));
    v
}

/// The ranked-pairs CSV layout, rendered from oracle values.
pub fn cooc_csv(rows: &[((String, String), PairCounts, f64)], measure: &str) -> String {
    let mut out = String::from("term_a,term_b,n_a,n_b,n_ab,N,measure,score\n");
    for ((a, b), c, s) in rows {
        out.push_str(&format!("{a},{b},{},{},{},{},{measure},{s:.6}\n", c.n_a, c.n_b, c.n_ab, c.n));
    }
    out
}

/// Sentences where term `a` appears in 4 of 10, `b` in 5, both in 2: PMI and
/// G² are exactly zero.
pub fn independence_fixture() -> Vec<Document> {
    let sentences = [
        "alpha beta", "alpha beta", "alpha gamma", "alpha gamma", "beta gamma", "beta gamma", "beta gamma",
        "gamma delta", "gamma delta", "gamma delta",
    ];
    vec![Document::new("ind", sentences.join(". ") + ".")]
}

/// UMass `Σ_{i≥2} Σ_{j<i} ln((D(w_i,w_j)+1)/D(w_j))` from per-document term
/// sets; pairs with `D(w_j) = 0` are skipped.
pub fn umass(top: &[String], doc_sets: &[BTreeSet<String>]) -> f64 {
    let d = |w: &str| doc_sets.iter().filter(|s| s.contains(w)).count() as f64;
    let d2 = |a: &str, b: &str| doc_sets.iter().filter(|s| s.contains(a) && s.contains(b)).count() as f64;
    let mut total = 0.0;
    for i in 1..top.len() {
        for j in 0..i {
            let dj = d(&top[j]);
            if dj > 0.0 {
                total += ((d2(&top[i], &top[j]) + 1.0) / dj).ln();
            }
        }
    }
    total
}

/// The `n` terms with the largest weights, ties by index.
pub fn top_by_weight(weights: &[f64], terms: &[String], n: usize) -> Vec<String> {
    let mut idx: Vec<usize> = (0..weights.len()).collect();
    idx.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    idx.into_iter().take(n).map(|i| terms[i].clone()).collect()
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Share of tokens whose assigned topic matches the generating topic under
/// the best one-to-one relabelling.
pub fn purity(pairs: &[(usize, usize)], k: usize) -> f64 {
    permutations(k)
        .iter()
        .map(|perm| pairs.iter().filter(|&&(assigned, gold)| perm[assigned] == gold).count())
        .max()
        .unwrap_or(0) as f64
        / pairs.len().max(1) as f64
}

/// Count tables rebuilt from the final assignments: `(n_dk, n_kw)`.
pub fn recount(model: &TopicModel) -> (Vec<Vec<u32>>, Vec<Vec<u32>>) {
    let (k, v) = (model.n_topics(), model.n_terms());
    let mut ndk = vec![vec![0u32; k]; model.n_docs()];
    let mut nkw = vec![vec![0u32; v]; k];
    for (d, doc) in model.all_assignments().iter().enumerate() {
        for a in doc {
            ndk[d][a.topic] += 1;
            nkw[a.topic][a.term] += 1;
        }
    }
    (ndk, nkw)
}
