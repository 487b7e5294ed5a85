#![no_main]

use kgmend::graph::{read_graph, write_graph};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(g) = read_graph(data) else { return };
    let mut out = Vec::new();
    write_graph(&g, &mut out).expect("writing to memory");
    let back = read_graph(out.as_slice()).expect("written graph reads back");
    assert!(back == g);
});
