#![no_main]

use libfuzzer_sys::fuzz_target;
use triflip::cnf::Cnf;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cnf) = Cnf::parse_dimacs(text) {
        assert_eq!(Cnf::parse_dimacs(&cnf.emit_dimacs()).unwrap(), cnf);
    }
});
