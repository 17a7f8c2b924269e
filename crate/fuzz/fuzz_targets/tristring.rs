#![no_main]

use libfuzzer_sys::fuzz_target;
use triflip::bounds::{log2_ceil, rewrite_bound_exact_with_limit, TriString};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(s) = text.parse::<TriString>() else { return };
    assert_eq!(s.to_string().parse::<TriString>().unwrap(), s);
    if s.len() <= 10 {
        let b = rewrite_bound_exact_with_limit(&s, 10).unwrap();
        assert!(b >= log2_ceil(s.len()));
        assert_eq!(rewrite_bound_exact_with_limit(&s.swapped(), 10).unwrap(), b);
    }
});
