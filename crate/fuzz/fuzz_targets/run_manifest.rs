#![no_main]

use dwlab::manifest::Manifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = Manifest::parse(text) {
        let again = Manifest::parse(&m.to_toml()).expect("serialised manifest parses");
        assert_eq!(m.config_hash, again.config_hash);
        let _ = m.hash_matches();
    }
});
