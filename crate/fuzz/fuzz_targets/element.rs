#![no_main]

use libfuzzer_sys::fuzz_target;
use rdlab::group::{catalog, Descriptor, MarkedGroup};

const GROUPS: [&str; 6] = [
    "Zn n=3",
    "Free rank=2",
    "Heisenberg",
    "BS1m m=2",
    "Lamplighter",
    "ZsdZ2",
];

fuzz_target!(|data: &[u8]| {
    let Some((&selector, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    let descriptor = Descriptor::parse(GROUPS[selector as usize % GROUPS.len()]).unwrap();
    let g: MarkedGroup = catalog(&descriptor).unwrap();
    if let Ok(x) = g.parse_element(text) {
        assert_eq!(g.parse_element(&x.to_string()).unwrap(), x);
        let xi = g.inv(&x).unwrap();
        assert_eq!(g.mul(&x, &xi).unwrap(), g.identity());
    }
});
