use dwlab::config::{ForcingSpec, Horizon, RunConfig};
use dwlab::manifest::Manifest;
use dwlab_core::grid::{decode_fields, FieldHeader};
use dwlab_core::modulus::{ModulusSpec, Table};
use proptest::prelude::*;

const CONFIG: &str = "seed = 3\n[grid]\ndim = 1\nhalf_length = 512.0\npoints = 4096\n[run]\nforcing = \"invlog:p=2\"\nt_max = 40.0\n[sweep]\nforcings = [\"zero\"]\nepsilons = [0.1]\n";

/// `base` with one byte range replaced.
fn mutated(base: &'static str) -> impl Strategy<Value = String> {
    (0..base.len(), 0usize..8, "[ -~\n]{0,8}").prop_map(move |(at, len, ins)| {
        let mut b = base.as_bytes().to_vec();
        let end = (at + len).min(b.len());
        b.splice(at..end, ins.bytes());
        String::from_utf8_lossy(&b).into_owned()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 512, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn spec_parsers_never_panic(s in "[a-z:=,.0-9 eE+-]{0,24}") {
        if let Ok(spec) = s.parse::<ModulusSpec>() {
            prop_assert_eq!(spec.to_string().parse::<ModulusSpec>().unwrap().kind(), spec.kind());
        }
        let _ = s.parse::<ForcingSpec>();
    }

    #[test]
    fn table_parser_never_panics(s in "[0-9.eE, #\n-]{0,64}") {
        let _ = Table::parse(&s);
    }

    #[test]
    fn header_and_decode_never_panic(s in "[nNLtfields=0-9. #\n-]{0,48}", payload in proptest::collection::vec(any::<u8>(), 0..256)) {
        if let Ok(h) = FieldHeader::parse(&s) {
            prop_assert_eq!(FieldHeader::parse(&h.to_string()).unwrap(), h);
            let _ = decode_fields(&h, &payload);
        }
    }

    #[test]
    fn mutated_configs_never_panic(s in mutated(CONFIG)) {
        if let Ok(cfg) = RunConfig::parse(&s) {
            let again = RunConfig::parse(&cfg.to_toml()).unwrap();
            prop_assert_eq!(cfg.hash(), again.hash());
            if !cfg.run.forcing.contains("custom") {
                let _ = cfg.validate(Horizon::Run, None);
            }
        }
        let _ = Manifest::parse(&s);
    }
}
