//! Generates `data/substitute_corpus.csv`, a synthetic stand-in for
//! Sentiment140 used when the public corpus is not on disk.
//!
//! Each tweet mixes neutral filler with a few polar words. Most polar words
//! agree with the label, some disagree, some are negated ("not good"), some
//! tweets carry no polar word at all, and a small share of labels is flipped.
//! Word choice alone therefore cannot exceed roughly 80% accuracy.
//!
//! Usage: `cargo run -p textcnn --example substitute_corpus -- [out.csv] [rows] [seed]`

use std::env;
use std::path::PathBuf;

use textcnn_core::Rng;

const POSITIVE: &[&str] = &[
    "good",
    "great",
    "love",
    "happy",
    "awesome",
    "amazing",
    "fun",
    "nice",
    "best",
    "thanks",
    "excited",
    "glad",
    "lovely",
    "cool",
    "beautiful",
    "perfect",
    "enjoy",
    "wonderful",
    "yay",
    "smile",
    "fantastic",
    "sweet",
    "proud",
    "win",
    "laugh",
    "brilliant",
    "blessed",
    "relaxing",
    "cute",
    "hope",
];
const NEGATIVE: &[&str] = &[
    "bad", "sad", "hate", "tired", "sick", "miss", "sucks", "awful", "worst", "sorry", "bored", "angry", "ugh", "hurt",
    "lost", "broken", "cry", "annoying", "terrible", "lonely", "stuck", "fail", "pain", "upset", "wrong", "boring",
    "stressed", "crap", "horrible", "headache",
];
const NEUTRAL: &[&str] = &[
    "today",
    "work",
    "going",
    "home",
    "just",
    "got",
    "now",
    "day",
    "time",
    "back",
    "night",
    "morning",
    "school",
    "really",
    "still",
    "gonna",
    "want",
    "new",
    "think",
    "know",
    "see",
    "watching",
    "tomorrow",
    "week",
    "lol",
    "off",
    "need",
    "bed",
    "people",
    "getting",
    "weekend",
    "come",
    "last",
    "feel",
    "twitter",
    "phone",
    "house",
    "movie",
    "show",
    "music",
    "game",
    "coffee",
    "lunch",
    "dinner",
    "car",
    "rain",
    "sun",
    "friends",
    "class",
    "office",
    "train",
    "bus",
    "waiting",
    "read",
    "book",
    "song",
    "video",
    "pic",
    "check",
    "out",
    "later",
    "soon",
    "again",
    "first",
    "tonight",
    "about",
    "after",
    "before",
    "around",
    "over",
    "make",
    "made",
    "take",
    "took",
    "look",
    "looks",
    "much",
    "more",
    "some",
    "all",
    "any",
    "something",
    "nothing",
    "everyone",
    "maybe",
    "yeah",
    "ok",
    "so",
    "too",
    "very",
    "my",
    "your",
    "our",
    "me",
    "you",
    "we",
    "they",
    "he",
    "she",
    "i",
    "im",
    "its",
    "dont",
    "cant",
    "cannot",
    "have",
    "had",
    "has",
    "do",
    "did",
    "will",
    "would",
    "could",
    "should",
    "can",
    "what",
    "when",
    "where",
    "why",
    "how",
];
const NEGATORS: &[&str] = &["not", "never", "no"];

fn pick<'a>(rng: &mut Rng, words: &[&'a str]) -> &'a str {
    words[rng.below(words.len())]
}

fn tweet(rng: &mut Rng, label: u8) -> String {
    let polar_count = match rng.next_f64() {
        p if p < 0.12 => 0,
        p if p < 0.5 => 1,
        p if p < 0.82 => 2,
        _ => 3,
    };
    let mut words: Vec<String> = (0..4 + rng.below(9)).map(|_| pick(rng, NEUTRAL).to_string()).collect();
    for _ in 0..polar_count {
        let agrees = rng.next_f64() < 0.87;
        let negated = rng.next_f64() < 0.06;
        // A negated word carries the opposite surface polarity.
        let positive_surface = ((label == 1) == agrees) != negated;
        let word = pick(rng, if positive_surface { POSITIVE } else { NEGATIVE });
        let at = rng.below(words.len() + 1);
        if negated {
            words.insert(at, word.to_string());
            words.insert(at, pick(rng, NEGATORS).to_string());
        } else {
            words.insert(at, word.to_string());
        }
    }
    if rng.next_f64() < 0.2 {
        words.insert(0, format!("@user{}", rng.below(500)));
    }
    if rng.next_f64() < 0.08 {
        words.push(format!("http://t.co/{:x}", rng.next_u32()));
    }
    let mut text = words.join(" ");
    if rng.next_f64() < 0.3 {
        text.push_str(["!", "!!", "...", " :)", " :(", "?"][rng.below(6)]);
    }
    text
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = env::args().skip(1);
    let out = args.next().map_or_else(|| PathBuf::from("data/substitute_corpus.csv"), PathBuf::from);
    let rows: usize = args.next().map_or(Ok(10_000), |s| s.parse())?;
    let seed: u64 = args.next().map_or(Ok(140), |s| s.parse())?;
    let mut rng = Rng::new(seed);
    let mut w = csv::Writer::from_path(&out)?;
    w.write_record(["label", "text"])?;
    for _ in 0..rows {
        let label = u8::from(rng.next_f64() < 0.5);
        let text = tweet(&mut rng, label);
        let shown = if rng.next_f64() < 0.05 { 1 - label } else { label };
        w.write_record([shown.to_string(), text])?;
    }
    w.flush()?;
    println!("wrote {rows} rows to {}", out.display());
    Ok(())
}
