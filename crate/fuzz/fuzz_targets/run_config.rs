#![no_main]

use dwlab::config::{Horizon, RunConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = RunConfig::parse(text) else {
        return;
    };
    let again = RunConfig::parse(&cfg.to_toml()).expect("serialised config parses");
    assert_eq!(cfg.hash(), again.hash());
    // custom tables would be read from disk
    if !cfg.run.forcing.contains("custom") {
        let _ = cfg.validate(Horizon::Run, None);
        let _ = cfg.validate(Horizon::Linear, None);
    }
});
