#![no_main]

use libfuzzer_sys::fuzz_target;
use triflip::cnf::Cnf;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cnf) = Cnf::parse_wcnf(text) {
        let back = Cnf::parse_wcnf(&cnf.emit_wcnf()).unwrap();
        assert_eq!(back.hard, cnf.hard);
        assert_eq!(back.soft, cnf.soft);
    }
});
