#![no_main]

use libfuzzer_sys::fuzz_target;
use rdlab::group::{catalog, Descriptor};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(d) = Descriptor::parse(text) {
        // the text form must parse back to the same descriptor
        assert_eq!(Descriptor::parse(&d.to_string()).unwrap(), d);
        let _ = catalog(&d);
    }
});
