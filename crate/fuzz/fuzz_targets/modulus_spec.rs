#![no_main]

use dwlab_core::modulus::ModulusSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(spec) = text.parse::<ModulusSpec>() else {
        return;
    };
    // printing and re-parsing must give the same spec
    let again: ModulusSpec = spec.to_string().parse().expect("display output parses");
    assert_eq!(spec.kind(), again.kind());
    if matches!(spec, ModulusSpec::Custom { .. }) {
        return;
    }
    if let Ok(m) = spec.build() {
        for s in [0.0, 1e-300, 1e-9, 0.01, 1.0, 1e6] {
            assert!(!m.eval(s).is_nan());
        }
    }
});
