#![no_main]

use dwlab_core::modulus::Table;
use dwlab_core::Modulus;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(table) = Table::parse(text) else {
        return;
    };
    let (s, mu) = table.points();
    assert!(s.windows(2).all(|w| w[0] < w[1]));
    assert!(mu.windows(2).all(|w| w[0] <= w[1]));
    if let Ok(m) = Modulus::from_table(table.clone()) {
        let top = s[s.len() - 1];
        let mut prev = m.eval(0.0);
        for i in 1..=32 {
            let v = m.eval(top * 1.5 * i as f64 / 32.0);
            assert!(v >= prev);
            prev = v;
        }
    }
});
