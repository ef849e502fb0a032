//! Arbitrary bytes through the triple file parser: must return Ok or a
//! structured error, never panic or blow up allocation.

#![no_main]

use kbgan::kgdata::{parse_triples, Vocabulary};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let mut vocab = Vocabulary::default();
    let _ = parse_triples(data, "fuzz.txt", &mut vocab);
});
