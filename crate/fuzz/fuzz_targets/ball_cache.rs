#![no_main]

use libfuzzer_sys::fuzz_target;
use rdlab::cayley::cache::{decode, encode};
use rdlab::group::{catalog, Descriptor};

const GROUPS: [&str; 3] = ["Heisenberg", "BS1m m=2", "Free rank=2"];

fuzz_target!(|data: &[u8]| {
    let Some((&selector, rest)) = data.split_first() else {
        return;
    };
    let g = catalog(&Descriptor::parse(GROUPS[selector as usize % GROUPS.len()]).unwrap()).unwrap();
    if let Ok(table) = decode(rest, &g) {
        assert_eq!(decode(encode(&table).as_bytes(), &g).unwrap(), table);
    }
});
