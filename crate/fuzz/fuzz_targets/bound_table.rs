#![no_main]

use libfuzzer_sys::fuzz_target;
use triflip::bounds::BoundTable;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(table) = BoundTable::parse(text) {
        let back = BoundTable::parse(&table.to_text()).unwrap();
        assert_eq!(back.to_text(), table.to_text());
    }
});
