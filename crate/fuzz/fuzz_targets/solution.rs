#![no_main]

use libfuzzer_sys::fuzz_target;
use triflip::instance::{generate_random_instance, parse_solution, verify_solution};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(file) = parse_solution(text) else { return };
    let again = parse_solution(&file.to_json()).expect("emitted solution reparses");
    assert_eq!(again.to_json(), file.to_json());

    // Verification reports problems, it never panics.
    let inst = generate_random_instance(8, 2, 3, 0).unwrap();
    for strict in [true, false] {
        let _ = verify_solution(&inst, &file, strict);
    }
});
