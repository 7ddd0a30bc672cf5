//! Seeded synthetic corpora with known generating structure, used by the
//! examples, the tests and the bundled walkthrough data.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Document, EntityKind, Gazetteer};

pub const ENERGY_WORDS: [&str; 10] = [
    "solar", "wind", "renewable", "grid", "electricity", "emissions", "turbine", "hydrogen", "efficiency", "coal",
];

pub const WATER_WORDS: [&str; 10] = [
    "flood", "drought", "rainfall", "coastal", "irrigation", "river", "storm", "salinity", "groundwater", "sea",
];

/// A corpus plus the topic that generated every document and token.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub documents: Vec<Document>,
    pub doc_topics: Vec<usize>,
    /// Generating topic of every token, in body order.
    pub token_topics: Vec<Vec<usize>>,
}

/// `n_docs` single-topic documents over two disjoint 10-word vocabularies
/// ([`ENERGY_WORDS`] for topic 0, [`WATER_WORDS`] for topic 1), alternating.
/// Each document carries `metadata.theme` naming its topic.
pub fn two_topic_corpus(n_docs: usize, words_per_doc: usize, seed: u64) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocabularies = [&ENERGY_WORDS, &WATER_WORDS];
    let mut out = SyntheticCorpus { documents: Vec::new(), doc_topics: Vec::new(), token_topics: Vec::new() };
    for d in 0..n_docs {
        let topic = d % 2;
        let words: Vec<&str> = (0..words_per_doc)
            .map(|_| *vocabularies[topic].choose(&mut rng).expect("non-empty"))
            .collect();
        let theme = if topic == 0 { "energy" } else { "water" };
        out.documents.push(Document::new(format!("doc{d:03}"), words.join(" ")).with_meta("theme", theme));
        out.doc_topics.push(topic);
        out.token_topics.push(vec![topic; words_per_doc]);
    }
    out
}

pub const MITIGATION_WORDS: [&str; 12] = [
    "mitigation", "emissions", "carbon", "solar", "wind", "efficiency", "transport", "methane", "forestry",
    "renewable", "electricity", "hydrogen",
];

pub const ADAPTATION_WORDS: [&str; 12] = [
    "adaptation", "drought", "flood", "resilience", "irrigation", "coastal", "rainfall", "vulnerability", "health",
    "agriculture", "storm", "water",
];

pub const SHARED_WORDS: [&str; 40] = [
    "national", "plan", "sector", "policy", "government", "target", "measures", "support", "framework", "priority",
    "implementation", "strategy", "development", "capacity", "finance", "programme", "action", "reporting",
    "investment", "technology", "institutions", "stakeholders", "monitoring", "review", "budget", "progress",
    "commitment", "regional", "local", "community", "cooperation", "partners", "assessment", "data", "baseline",
    "ambition", "contribution", "process", "public", "private",
];

/// Labelled binary corpus for classification. Each class vocabulary splits
/// into four 3-word subthemes; a document picks one subtheme and draws `len`
/// words, each from that subtheme with probability `signal` and from
/// [`SHARED_WORDS`] otherwise. Classes alternate by document index and are
/// named `mitigation` and `adaptation`.
pub fn coding_corpus(n_docs: usize, len: usize, signal: f64, seed: u64) -> (Vec<Document>, BTreeMap<String, String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::new();
    let mut gold = BTreeMap::new();
    for d in 0..n_docs {
        let (code, words): (&str, &[&str]) = if d % 2 == 0 {
            ("mitigation", &MITIGATION_WORDS)
        } else {
            ("adaptation", &ADAPTATION_WORDS)
        };
        let sub = rng.random_range(0..4) * 3;
        let subtheme = &words[sub..sub + 3];
        let body: Vec<&str> = (0..len)
            .map(|_| {
                let pool = if rng.random_bool(signal) { subtheme } else { &SHARED_WORDS[..] };
                *pool.choose(&mut rng).expect("non-empty")
            })
            .collect();
        let id = format!("ndc{d:04}");
        gold.insert(id.clone(), code.to_string());
        docs.push(Document::new(id, body.join(" ")));
    }
    (docs, gold)
}

/// Ten planted themes of an NDC-style study, 12 words each.
pub const THEMES: [(&str, [&str; 12]); 10] = [
    ("economic growth", ["growth", "industry", "economy", "gdp", "jobs", "market", "trade", "productivity", "exports", "competitiveness", "manufacturing", "enterprises"]),
    ("water vulnerability", ["drought", "flood", "rainfall", "salinity", "groundwater", "storm", "coastal", "erosion", "cyclone", "sea", "vulnerability", "irrigation"]),
    ("renewable energy", ["solar", "wind", "renewable", "grid", "electricity", "turbine", "hydropower", "geothermal", "photovoltaic", "megawatt", "biomass", "storage"]),
    ("international support", ["financial", "fund", "funds", "financing", "required", "support", "needs", "finance", "capacity_building", "investment", "donors", "grants"]),
    ("agriculture", ["crops", "livestock", "farmers", "soil", "yields", "fertiliser", "harvest", "seeds", "cattle", "pasture", "agroforestry", "rice"]),
    ("forestry", ["forest", "deforestation", "reforestation", "trees", "mangroves", "timber", "peatland", "afforestation", "woodland", "canopy", "logging", "biodiversity"]),
    ("transport", ["vehicles", "transport", "railway", "fuel", "electric", "buses", "roads", "aviation", "shipping", "freight", "mobility", "cycling"]),
    ("health", ["health", "disease", "malaria", "heatwaves", "hospitals", "nutrition", "sanitation", "mortality", "vectors", "clinics", "epidemics", "wellbeing"]),
    ("unfccc collaboration", ["unfccc", "convention", "paris", "negotiations", "parties", "transparency", "mechanism", "cop", "protocol", "multilateral", "reporting", "compliance"]),
    ("waste", ["waste", "landfill", "recycling", "methane", "sewage", "composting", "incineration", "plastics", "circular", "collection", "wastewater", "dumpsites"]),
];

pub const COUNTRIES: [&str; 16] = [
    "Gambia", "Chile", "Fiji", "Norway", "Kenya", "Germany", "Bhutan", "Peru", "Tuvalu", "Japan", "Morocco", "Canada",
    "Nepal", "Samoa", "Poland", "Ghana",
];

pub const CITIES: [&str; 8] = ["Banjul", "Santiago", "Suva", "Oslo", "Nairobi", "Berlin", "Thimphu", "Lima"];

pub const ORGANIZATIONS: [&str; 3] = ["GIZ", "CDKN", "World Bank"];

/// NDC-style study corpus: `per_theme` single-theme documents for each of the
/// ten [`THEMES`], every one mentioning its country and a city several times.
///
/// Documents of theme 0 carry `annex = Annex-I`, documents of theme 1 carry
/// `annex = Non-Annex`; the other themes carry no annex field.
pub fn ndc_style_corpus(per_theme: usize, sentences: usize, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::new();
    for (theme_ix, (_, words)) in THEMES.iter().enumerate() {
        for i in 0..per_theme {
            let n = docs.len();
            let country = COUNTRIES[n % COUNTRIES.len()];
            let city = CITIES[n % CITIES.len()];
            let mut body = Vec::new();
            for s in 0..sentences {
                let mut sentence: Vec<String> = (0..7)
                    .map(|_| words.choose(&mut rng).expect("non-empty").replace('_', " "))
                    .collect();
                match s % 3 {
                    0 => sentence.insert(0, country.to_string()),
                    1 => sentence.insert(3, format!("in {city}")),
                    _ => sentence.push(format!("for {country}")),
                }
                if s == 1 && i % 2 == 0 {
                    sentence.push(format!("with {}", ORGANIZATIONS[n % ORGANIZATIONS.len()]));
                }
                let mut text = sentence.join(" ");
                if let Some(first) = text.get(0..1) {
                    text = first.to_uppercase() + &text[1..];
                }
                body.push(text + ".");
            }
            let day = NaiveDate::from_ymd_opt(2015 + (n % 3) as i32, 1 + (n % 12) as u32, 1 + (n % 28) as u32)
                .expect("valid date");
            let mut doc = Document::new(format!("ndc{n:03}"), body.join(" "))
                .with_title(format!("NDC of {country}"))
                .with_date(day)
                .with_meta("country", country);
            match theme_ix {
                0 => doc = doc.with_meta("annex", "Annex-I"),
                1 => doc = doc.with_meta("annex", "Non-Annex"),
                _ => {}
            }
            docs.push(doc);
        }
    }
    docs
}

/// Gazetteer for [`ndc_style_corpus`]: countries and cities as locations,
/// funders as organisations.
pub fn ndc_gazetteer() -> Gazetteer {
    COUNTRIES
        .iter()
        .chain(&CITIES)
        .map(|c| (*c, EntityKind::Location))
        .chain(ORGANIZATIONS.iter().map(|o| (*o, EntityKind::Organization)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_seeded() {
        assert_eq!(two_topic_corpus(6, 8, 1).documents, two_topic_corpus(6, 8, 1).documents);
        assert_ne!(two_topic_corpus(6, 8, 1).documents, two_topic_corpus(6, 8, 2).documents);
        assert_eq!(coding_corpus(10, 5, 0.5, 3), coding_corpus(10, 5, 0.5, 3));
        assert_eq!(ndc_style_corpus(2, 3, 4), ndc_style_corpus(2, 3, 4));
    }

    #[test]
    fn two_topic_tokens_follow_labels() {
        let s = two_topic_corpus(4, 10, 0);
        for (doc, &topic) in s.documents.iter().zip(&s.doc_topics) {
            let vocab = if topic == 0 { &ENERGY_WORDS } else { &WATER_WORDS };
            assert!(doc.body.split(' ').all(|w| vocab.contains(&w)));
        }
    }

    #[test]
    fn theme_vocabularies_are_disjoint() {
        let mut seen = std::collections::HashSet::new();
        for (_, words) in THEMES {
            for w in words {
                assert!(seen.insert(w), "{w} repeated");
            }
        }
    }
}
