#![no_main]

use dwlab_core::grid::FieldHeader;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(h) = FieldHeader::parse(text) {
        let again = FieldHeader::parse(&h.to_string()).expect("written header parses");
        assert_eq!(h, again);
    }
});
