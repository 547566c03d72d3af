//! Regenerates `fixtures/embeddings.txt` and `fixtures/eval/intents6.tsv`.
//!
//! Word vectors are synthetic: words in a semantic cluster sit near a shared
//! random centroid, function words get short vectors so they barely move a
//! sentence average, and every other word gets its own random direction.
//!
//!     cargo run -p parley-core --example gen_fixtures -- [fixtures-dir]

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use parley_core::analysis::{normalized_words, tokenize};
use parley_core::rng::SplitMix64;

const DIM: usize = 64;
const SEED: u64 = 20_240_611;
const CLUSTER_NOISE: f64 = 0.35;
const FUNCTION_NORM: f64 = 0.3;

const CLUSTERS: &[(&str, &[&str])] = &[
    ("greet", &["hello", "hi", "hey", "morning", "evening", "greetings", "howdy"]),
    ("mood", &["fine", "tired", "bored", "happy", "sad", "stressed", "excited", "feel", "feeling"]),
    (
        "yes",
        &[
            "yes",
            "yeah",
            "yep",
            "yup",
            "sure",
            "absolutely",
            "definitely",
            "certainly",
            "correct",
            "totally",
            "ok",
            "okay",
        ],
    ),
    ("no", &["no", "nope", "nah", "never", "negative", "not", "n't"]),
    ("joke", &["joke", "jokes", "funny", "laugh", "pun", "puns", "humor", "hilarious", "comedy"]),
    ("stop", &["stop", "enough", "done", "quit", "finish", "bye", "goodbye", "leave"]),
    (
        "movie",
        &[
            "movie", "movies", "film", "films", "cinema", "actor", "actress", "director", "directed", "watch",
            "watched", "watching", "seen",
        ],
    ),
    (
        "music",
        &[
            "music",
            "songs",
            "band",
            "bands",
            "singer",
            "listen",
            "listening",
            "guitar",
            "piano",
            "instrument",
            "rock",
            "jazz",
            "pop",
            "classical",
            "concert",
        ],
    ),
    (
        "sport",
        &[
            "sport",
            "sports",
            "team",
            "teams",
            "game",
            "games",
            "football",
            "basketball",
            "soccer",
            "tennis",
            "baseball",
            "match",
            "score",
            "player",
        ],
    ),
    ("book", &["book", "books", "read", "reading", "novel", "novels", "author", "writer", "wrote", "story", "library"]),
    (
        "food",
        &[
            "food",
            "eat",
            "pizza",
            "pasta",
            "hungry",
            "dinner",
            "lunch",
            "breakfast",
            "cook",
            "cooking",
            "burger",
            "sushi",
            "takeout",
            "noodles",
            "sandwich",
        ],
    ),
    (
        "weather",
        &[
            "weather",
            "rain",
            "raining",
            "sunny",
            "sunshine",
            "snow",
            "cold",
            "hot",
            "forecast",
            "temperature",
            "umbrella",
            "storm",
        ],
    ),
    ("time", &["alarm", "timer", "reminder", "clock", "snooze", "stopwatch"]),
    ("home", &["lights", "lamp", "brightness", "bulb", "dimmer", "lighting"]),
    ("audio", &["song", "playlist", "album", "track", "radio", "melody"]),
    ("news", &["news", "headlines", "politics", "election", "journalist", "bulletin"]),
    ("thanks", &["thanks", "thank", "appreciate"]),
    ("help", &["help", "assist", "support", "features"]),
];

const FUNCTION_WORDS: &[&str] = &[
    "the",
    "a",
    "an",
    "this",
    "that",
    "these",
    "those",
    "some",
    "any",
    "is",
    "are",
    "was",
    "were",
    "be",
    "am",
    "been",
    "to",
    "of",
    "in",
    "on",
    "at",
    "for",
    "with",
    "about",
    "from",
    "by",
    "and",
    "or",
    "but",
    "so",
    "if",
    "i",
    "me",
    "my",
    "you",
    "your",
    "it",
    "its",
    "we",
    "us",
    "our",
    "they",
    "them",
    "their",
    "he",
    "she",
    "his",
    "her",
    "what",
    "who",
    "where",
    "when",
    "why",
    "how",
    "which",
    "do",
    "does",
    "did",
    "can",
    "could",
    "would",
    "will",
    "should",
    "please",
    "now",
    "show",
    "tell",
    "want",
    "just",
    "there",
    "here",
    "let's",
    "let",
    "talk",
    "chat",
    "something",
    "else",
    "like",
    "i'm",
    "what's",
    "it's",
    "have",
    "has",
    "had",
    "really",
    "very",
    "too",
    "also",
    "up",
    "all",
    "more",
    "one",
    "get",
];

/// Six intents, each with disjoint core words, crossed with shared frames.
const EVAL_INTENTS: &[(&str, &[&str])] = &[
    ("weather", &["forecast", "rain", "temperature", "umbrella", "snow", "sunshine"]),
    ("music_play", &["song", "playlist", "album", "track", "radio", "melody"]),
    ("alarm", &["alarm", "timer", "reminder", "clock", "snooze", "stopwatch"]),
    ("food_order", &["pizza", "burger", "sushi", "takeout", "noodles", "sandwich"]),
    ("lights", &["lights", "lamp", "brightness", "bulb", "dimmer", "lighting"]),
    ("news", &["headlines", "news", "politics", "election", "journalist", "bulletin"]),
];
const EVAL_FRAMES: &[&str] = &[
    "what about the {}",
    "tell me about the {}",
    "i want the {} now",
    "can you do the {} for me",
    "show me the {} please",
];

fn hash(word: &str) -> u64 {
    // FNV-1a
    word.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn unit(rng: &mut SplitMix64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..DIM).map(|_| (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn vector(word: &str) -> Vec<f64> {
    let mut own = SplitMix64::derive(SEED, hash(word));
    if let Some((name, _)) = CLUSTERS.iter().find(|(_, ws)| ws.contains(&word)) {
        let centroid = unit(&mut SplitMix64::derive(SEED ^ 1, hash(name)));
        let noise = unit(&mut own);
        return centroid.iter().zip(&noise).map(|(c, n)| c + CLUSTER_NOISE * n).collect();
    }
    let v = unit(&mut own);
    if FUNCTION_WORDS.contains(&word) {
        return v.iter().map(|x| x * FUNCTION_NORM).collect();
    }
    v
}

fn collect_text(dir: &Path, skip: &Path, out: &mut Vec<String>) -> std::io::Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<Result<_, _>>()?;
    entries.sort();
    for path in entries {
        if path.is_dir() {
            collect_text(&path, skip, out)?;
        } else if path != skip && matches!(path.extension().and_then(|e| e.to_str()), Some("tsv" | "txt" | "yaml")) {
            out.push(std::fs::read_to_string(&path)?);
        }
    }
    Ok(())
}

fn main() -> std::io::Result<()> {
    let root = std::env::args().nth(1).map_or_else(|| PathBuf::from("fixtures"), PathBuf::from);
    let embeddings = root.join("embeddings.txt");

    let mut eval = String::from("# label\ttext\n");
    for (label, cores) in EVAL_INTENTS {
        for core in *cores {
            for frame in EVAL_FRAMES {
                writeln!(eval, "{label}\t{}", frame.replace("{}", core)).unwrap();
            }
        }
    }
    std::fs::create_dir_all(root.join("eval"))?;
    std::fs::write(root.join("eval/intents6.tsv"), &eval)?;

    let mut texts = Vec::new();
    collect_text(&root, &embeddings, &mut texts)?;
    let mut vocab: BTreeSet<String> = BTreeSet::new();
    for text in &texts {
        for line in text.lines() {
            vocab.extend(normalized_words(&tokenize(line)));
        }
    }
    vocab.extend(CLUSTERS.iter().flat_map(|(_, ws)| ws.iter().map(|w| w.to_string())));
    vocab.extend(FUNCTION_WORDS.iter().map(|w| w.to_string()));

    let mut out = String::new();
    for word in &vocab {
        out.push_str(word);
        for x in vector(word) {
            write!(out, " {x:.5}").unwrap();
        }
        out.push('\n');
    }
    std::fs::write(&embeddings, out)?;
    eprintln!("{} words x {DIM} dims -> {}", vocab.len(), embeddings.display());
    Ok(())
}
