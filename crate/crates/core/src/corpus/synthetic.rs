//! Seeded two-domain corpus generator for desk-scale experiments.
//!
//! News abstracts mostly restate the lead sentence. Opinion abstracts follow a
//! fixed "<critic> reviews ..." frame whose critic name and framing words never
//! occur in the article, so they reuse markedly fewer input tokens.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Annotations, Document, Domain, ExtractRecord, NeTag, Subjectivity, TokenAnnotation};

/// Second token of every generated opinion abstract.
pub const REVIEW_VERB: &str = "reviews";

const FIRST_NAMES: &[&str] = &[
    "david", "maria", "james", "laura", "kevin", "nina", "omar", "sarah", "peter", "grace", "victor", "elena",
    "marcus", "julia", "samuel", "irene", "hector", "alice", "felix", "diana",
];
const LAST_NAMES: &[&str] = &[
    "morgan", "castillo", "reed", "tanaka", "brooks", "okafor", "larsen", "fischer", "delgado", "walsh", "kim",
    "romano", "bennett", "haddad", "novak", "price", "garner", "silva", "mercer", "quinn", "abbott", "foley",
    "lindqvist", "barrett",
];
const TEAMS: &[&str] = &[
    "knicks", "nets", "yankees", "mets", "rangers", "giants", "jets", "devils", "islanders", "liberty",
    "celtics", "raptors",
];
const ORGS: &[&str] = &[
    "verizon", "pfizer", "boeing", "citigroup", "intel", "kodak", "xerox", "motorola", "alcoa", "honeywell",
];
const CITIES: &[&str] = &[
    "boston", "chicago", "denver", "houston", "atlanta", "phoenix", "seattle", "miami", "dallas", "detroit",
    "newark", "albany",
];
const DAYS: &[&str] = &["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"];
const VENUES: &[&str] = &[
    "carnegie", "lincoln", "juilliard", "apollo", "metropolitan", "brooklyn", "beacon", "majestic",
];
const TITLE_WORDS: &[&str] = &[
    "rainbow", "winter", "garden", "river", "shadows", "midnight", "harbor", "silver", "echoes", "lanterns",
    "autumn", "kingdom", "mirrors", "voyage", "thunder", "orchard", "paper", "crown", "embers", "meridian",
];
const CRIMES: &[&str] = &["robbery", "assault", "burglary", "fraud", "arson"];
const PLACES: &[&str] = &["station", "library", "school", "bridge", "market", "courthouse"];
const NEUTRAL_ADJ: &[&str] = &["strong", "weak", "late", "early", "quiet", "steady", "sharp", "slow", "new", "long"];
const POSITIVE: &[&str] = &["brilliant", "superb", "wonderful", "splendid", "delightful"];
const NEGATIVE: &[&str] = &["awful", "dreadful", "dismal", "terrible", "clumsy"];
const FILLER_NOUNS: &[&str] = &[
    "officials", "residents", "fans", "critics", "analysts", "neighbors", "workers", "students", "visitors",
];
const FILLER_VERBS: &[&str] = &["expected", "noted", "reported", "questioned", "welcomed", "described"];
const FILLER_OBJECTS: &[&str] = &["plan", "decision", "result", "schedule", "budget", "change", "outcome"];

/// Kinds of opinion pieces, each with a recurring critic.
const WORKS: &[(&str, &str)] = &[
    ("concert", "holden"),
    ("play", "brantley"),
    ("film", "scott"),
    ("album", "pareles"),
    ("opera", "tommasini"),
];
const SPORTS_COLUMNIST: &str = "anderson";

struct Builder {
    tokens: Vec<String>,
    anns: Vec<TokenAnnotation>,
}

impl Builder {
    fn new() -> Self {
        Self {
            tokens: Vec::new(),
            anns: Vec::new(),
        }
    }

    fn push(&mut self, word: &str, pos: &str, ne: NeTag, subj: Subjectivity) -> &mut Self {
        self.tokens.push(word.to_string());
        self.anns.push(TokenAnnotation::new(pos, ne, subj));
        self
    }

    /// Plain words; POS is guessed from a small closed list.
    fn words(&mut self, text: &str) -> &mut Self {
        for w in text.split_whitespace() {
            let pos = match w {
                "." | "," | ";" => "PUNCT",
                "the" | "a" | "on" | "in" | "at" | "to" | "for" | "after" | "as" | "that" | "it" | "and" | "near"
                | "of" | "with" | "this" | "against" | "by" => "OTHER",
                "beat" | "scored" | "scores" | "said" | "says" | "would" | "will" | "is" | "arrested" | "opened"
                | "called" | "fell" | "played" | "performed" | "cheered" | "featuring" | "reviews" | "lost"
                | "drew" | "won" => "VERB",
                _ => "NOUN",
            };
            self.push(w, pos, NeTag::None, Subjectivity::None);
        }
        self
    }

    fn noun(&mut self, w: &str) -> &mut Self {
        self.push(w, "NOUN", NeTag::None, Subjectivity::None)
    }

    fn verb(&mut self, w: &str) -> &mut Self {
        self.push(w, "VERB", NeTag::None, Subjectivity::None)
    }

    fn adj(&mut self, w: &str) -> &mut Self {
        let subj = if POSITIVE.contains(&w) {
            Subjectivity::StrongPositive
        } else if NEGATIVE.contains(&w) {
            Subjectivity::StrongNegative
        } else {
            Subjectivity::None
        };
        self.push(w, "ADJ", NeTag::None, subj)
    }

    fn num(&mut self, w: &str) -> &mut Self {
        self.push(w, "NUM", NeTag::None, Subjectivity::None)
    }

    fn entity(&mut self, w: &str, ne: NeTag) -> &mut Self {
        self.push(w, "NOUN", ne, Subjectivity::None)
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool.choose(rng).expect("non-empty pool")
}

fn filler_sentence(rng: &mut ChaCha8Rng, b: &mut Builder) {
    b.words("the")
        .noun(pick(rng, FILLER_NOUNS))
        .verb(pick(rng, FILLER_VERBS))
        .words("the")
        .adj(pick(rng, NEUTRAL_ADJ))
        .noun(pick(rng, FILLER_OBJECTS))
        .words("on")
        .entity(pick(rng, DAYS), NeTag::Other)
        .words(".");
}

fn opinion_color(rng: &mut ChaCha8Rng, b: &mut Builder) {
    let (w1, w2) = if rng.gen_bool(0.6) {
        (pick(rng, POSITIVE), pick(rng, NEGATIVE))
    } else {
        (pick(rng, NEGATIVE), pick(rng, POSITIVE))
    };
    b.words("the").noun(pick(rng, FILLER_NOUNS)).words("called it").adj(w1);
    b.words("and the").noun(pick(rng, FILLER_OBJECTS)).words("was").adj(w2).words(".");
}

fn news_document(rng: &mut ChaCha8Rng, id: String) -> Document {
    let mut text = Builder::new();
    let mut abs = Builder::new();
    let roll: f64 = rng.gen();
    let section;
    if roll < 0.57 {
        section = "Sports";
        let (t1, t2) = two_distinct(rng, TEAMS);
        let score = format!("{}-{}", rng.gen_range(90..120), rng.gen_range(70..90));
        let city = pick(rng, CITIES);
        let (first, last) = (pick(rng, FIRST_NAMES), pick(rng, LAST_NAMES));
        let points = rng.gen_range(10..45).to_string();
        let day = pick(rng, DAYS);
        let adj = pick(rng, NEUTRAL_ADJ);
        text.entity(t1, NeTag::Organization).words("beat").entity(t2, NeTag::Organization).num(&score);
        text.words("on").entity(day, NeTag::Other).words("in").entity(city, NeTag::Location);
        text.words("as").entity(first, NeTag::Person).entity(last, NeTag::Person);
        text.words("scored").num(&points).words("points .");
        text.entity(last, NeTag::Person).words("said the").entity(t1, NeTag::Organization);
        text.words("played").adj(adj).words("defense .");
        filler_sentence(rng, &mut text);

        abs.entity(t1, NeTag::Organization).words("beat").entity(t2, NeTag::Organization).num(&score);
        abs.words("in").entity(city, NeTag::Location).words(";");
        abs.entity(first, NeTag::Person).entity(last, NeTag::Person);
        abs.words("scores").num(&points).words("points .");
    } else if roll < 0.82 {
        section = "Business";
        let org = pick(rng, ORGS);
        let city = pick(rng, CITIES);
        let (first, last) = (pick(rng, FIRST_NAMES), pick(rng, LAST_NAMES));
        let jobs = (rng.gen_range(2..40) * 50).to_string();
        let day = pick(rng, DAYS);
        let adj = pick(rng, NEUTRAL_ADJ);
        let adj2 = pick(rng, NEUTRAL_ADJ);
        text.entity(org, NeTag::Organization).words("said on").entity(day, NeTag::Other);
        text.words("that it would").verb("cut").num(&jobs).words("jobs in").entity(city, NeTag::Location);
        text.words("after").adj(adj).words("sales .");
        text.words("the").entity(org, NeTag::Organization).words("chief executive ,");
        text.entity(first, NeTag::Person).entity(last, NeTag::Person).words(", called the move").adj(adj2).words(".");
        filler_sentence(rng, &mut text);

        abs.entity(org, NeTag::Organization).words("will").verb("cut").num(&jobs).words("jobs in");
        abs.entity(city, NeTag::Location).words("after").adj(adj).words("sales , says chief executive");
        abs.entity(first, NeTag::Person).entity(last, NeTag::Person).words(".");
    } else {
        section = "Metro";
        let city = pick(rng, CITIES);
        let (first, last) = (pick(rng, FIRST_NAMES), pick(rng, LAST_NAMES));
        let day = pick(rng, DAYS);
        let adj = pick(rng, NEUTRAL_ADJ);
        let crime = pick(rng, CRIMES);
        let place = pick(rng, PLACES);
        text.words("police in").entity(city, NeTag::Location).words("arrested");
        text.entity(first, NeTag::Person).entity(last, NeTag::Person).words("on").entity(day, NeTag::Other);
        text.words("after a").adj(adj).noun(crime).words("near the").noun(place).words(".");
        filler_sentence(rng, &mut text);
        filler_sentence(rng, &mut text);

        abs.entity(first, NeTag::Person).entity(last, NeTag::Person).words("is arrested in");
        abs.entity(city, NeTag::Location).words("after").adj(adj).noun(crime).words("near the").noun(place);
        abs.words(".");
    }
    finish(id, Domain::News, section, text, abs)
}

fn opinion_document(rng: &mut ChaCha8Rng, id: String) -> Document {
    let mut text = Builder::new();
    let mut abs = Builder::new();
    let section;
    if rng.gen_bool(0.78) {
        section = "Arts";
        let &(work, critic) = WORKS.choose(rng).expect("works");
        let (t1, t2) = two_distinct(rng, TITLE_WORDS);
        let venue = pick(rng, VENUES);
        let day = pick(rng, DAYS);
        let (first, last) = (pick(rng, FIRST_NAMES), pick(rng, LAST_NAMES));
        let adj = pick(rng, NEUTRAL_ADJ);
        text.words("the").adj(adj).noun(work).entity(t1, NeTag::Other).entity(t2, NeTag::Other);
        text.words("opened at").entity(venue, NeTag::Location).words("on").entity(day, NeTag::Other).words(".");
        text.entity(first, NeTag::Person).entity(last, NeTag::Person).words("performed for the fans .");
        opinion_color(rng, &mut text);
        filler_sentence(rng, &mut text);

        abs.entity(critic, NeTag::Person).verb(REVIEW_VERB).noun(work);
        abs.entity(t1, NeTag::Other).entity(t2, NeTag::Other).words("at").entity(venue, NeTag::Location);
        abs.words(", featuring").entity(first, NeTag::Person).entity(last, NeTag::Person).words(".");
    } else {
        section = "Sports";
        let (t1, t2) = two_distinct(rng, TEAMS);
        let city = pick(rng, CITIES);
        let day = pick(rng, DAYS);
        let (first, last) = (pick(rng, FIRST_NAMES), pick(rng, LAST_NAMES));
        let adj = pick(rng, NEUTRAL_ADJ);
        text.words("the").entity(t1, NeTag::Organization).words("played a").adj(adj).noun("game");
        text.words("against the").entity(t2, NeTag::Organization).words("in").entity(city, NeTag::Location);
        text.words("on").entity(day, NeTag::Other).words(".");
        text.entity(first, NeTag::Person).entity(last, NeTag::Person).words("drew cheers from the fans .");
        opinion_color(rng, &mut text);
        filler_sentence(rng, &mut text);

        abs.entity(SPORTS_COLUMNIST, NeTag::Person).verb(REVIEW_VERB).entity(t1, NeTag::Organization);
        abs.adj(adj).noun("game").words("against").entity(t2, NeTag::Organization);
        abs.words(", featuring").entity(first, NeTag::Person).entity(last, NeTag::Person).words(".");
    }
    finish(id, Domain::Opinion, section, text, abs)
}

fn two_distinct<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> (&'a str, &'a str) {
    let picked: Vec<&&str> = pool.choose_multiple(rng, 2).collect();
    (picked[0], picked[1])
}

fn finish(id: String, domain: Domain, section: &str, text: Builder, abs: Builder) -> Document {
    Document {
        id,
        domain,
        section: section.to_string(),
        text_tokens: text.tokens,
        abstract_tokens: abs.tokens,
        annotations: Some(Annotations {
            text: text.anns,
            abstract_: abs.anns,
        }),
    }
}

/// `n_per_domain` news documents followed by `n_per_domain` opinion documents.
pub fn generate_synthetic_corpus(n_per_domain: usize, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::with_capacity(2 * n_per_domain);
    for i in 0..n_per_domain {
        docs.push(news_document(&mut rng, format!("news-{i:05}")));
    }
    for i in 0..n_per_domain {
        docs.push(opinion_document(&mut rng, format!("opinion-{i:05}")));
    }
    docs
}

/// Lead/description records. About 71% of descriptions are the lead's first
/// sentence; the rest are the abstract of the generated article.
pub fn generate_synthetic_extracts(n: usize, seed: u64) -> Vec<ExtractRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6578_7472_6163_7473);
    (0..n)
        .map(|i| {
            let doc = if rng.gen_bool(0.5) {
                news_document(&mut rng, format!("extract-{i:05}"))
            } else {
                opinion_document(&mut rng, format!("extract-{i:05}"))
            };
            let description = if rng.gen_bool(0.71) {
                super::first_sentence(&doc.text_tokens).join(" ")
            } else {
                doc.abstract_tokens.join(" ")
            };
            ExtractRecord {
                lead: doc.text_tokens.join(" "),
                description,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{filter_pairs, tokenize};

    #[test]
    fn deterministic_under_seed() {
        let a = generate_synthetic_corpus(10, 42);
        assert_eq!(a.len(), 20);
        assert_eq!(a, generate_synthetic_corpus(10, 42));
        assert_ne!(a, generate_synthetic_corpus(10, 43));
    }

    #[test]
    fn opinion_abstracts_use_review_frame() {
        for doc in generate_synthetic_corpus(50, 1).iter().filter(|d| d.domain == Domain::Opinion) {
            assert_eq!(doc.abstract_tokens[1], REVIEW_VERB, "{:?}", doc.abstract_tokens);
        }
    }

    #[test]
    fn every_document_passes_the_length_filter() {
        let docs = generate_synthetic_corpus(100, 5);
        assert_eq!(filter_pairs(docs.clone()).len(), docs.len());
    }

    #[test]
    fn annotations_align_and_tokens_are_atomic() {
        for doc in generate_synthetic_corpus(30, 9) {
            let ann = doc.annotations.as_ref().unwrap();
            assert_eq!(ann.text.len(), doc.text_tokens.len());
            assert_eq!(ann.abstract_.len(), doc.abstract_tokens.len());
            assert_eq!(tokenize(&doc.text_tokens.join(" ")), doc.text_tokens);
            assert_eq!(tokenize(&doc.abstract_tokens.join(" ")), doc.abstract_tokens);
        }
    }

    #[test]
    fn extracts_are_mostly_first_sentences() {
        let recs = generate_synthetic_extracts(400, 3);
        let (pairs, frac) = crate::corpus::build_extract_pairs(&recs);
        assert_eq!(pairs.len(), 400);
        assert!((0.62..0.80).contains(&frac), "{frac}");
    }
}
