//! Formula corpora bundled with the binary.

use symreduce_core::bench::{parse_corpus, BenchError, Problem};

pub const FEYNMAN: &str = include_str!("../corpus/feynman.tsv");
pub const EPONYMOUS: &str = include_str!("../corpus/eponymous.tsv");
pub const SMOKE: &str = include_str!("../corpus/smoke.tsv");

/// Looks up a bundled corpus by name (`feynman`, `eponymous`, `smoke`).
pub fn bundled(name: &str) -> Option<&'static str> {
    match name {
        "feynman" => Some(FEYNMAN),
        "eponymous" => Some(EPONYMOUS),
        "smoke" => Some(SMOKE),
        _ => None,
    }
}

pub fn feynman() -> Vec<Problem> {
    parse_corpus(FEYNMAN).expect("bundled corpus parses")
}

pub fn eponymous() -> Vec<Problem> {
    parse_corpus(EPONYMOUS).expect("bundled corpus parses")
}

pub fn smoke() -> Vec<Problem> {
    parse_corpus(SMOKE).expect("bundled corpus parses")
}

/// Parses a bundled corpus name or the contents of a corpus file.
pub fn load(name_or_text: &str) -> Result<Vec<Problem>, BenchError> {
    parse_corpus(bundled(name_or_text).unwrap_or(name_or_text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_corpora_parse_and_sample() {
        assert_eq!(smoke().len(), 10);
        assert!((28..=36).contains(&feynman().len()));
        assert!((28..=36).contains(&eponymous().len()));
        for p in feynman().iter().chain(&eponymous()).chain(&smoke()) {
            assert_eq!(p.f_true.arity(), p.d, "{}", p.id);
            symreduce_core::bench::sample_problem(p, 50, 1).unwrap_or_else(|e| panic!("{}: {e}", p.id));
        }
    }
}
