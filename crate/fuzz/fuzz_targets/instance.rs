#![no_main]

use libfuzzer_sys::fuzz_target;
use triflip::instance::parse_instance;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(inst) = parse_instance(text) {
        // Whatever parses must survive a round trip unchanged.
        let again = parse_instance(&inst.to_json()).expect("emitted instance reparses");
        assert_eq!(again.to_json(), inst.to_json());
    }
});
