//! Arbitrary bytes through the checkpoint decoder: every outcome must be a
//! structured error or a valid model, with allocations bounded by the input.

#![no_main]

use kbgan::checkpoint::Checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let mut r = data;
    if let Ok(ckpt) = Checkpoint::read_from(&mut r) {
        // decoded checkpoints must survive the round trip
        let mut buf = Vec::new();
        ckpt.write_to(&mut buf).unwrap();
    }
});
