#![no_main]

use libfuzzer_sys::fuzz_target;
use triflip::sat::parse_solver_output;

fuzz_target!(|data: &[u8]| {
    let Some((&nv, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    if let Ok(out) = parse_solver_output(text, u32::from(nv)) {
        if let Some(model) = out.model {
            assert_eq!(model.len(), usize::from(nv) + 1);
        }
    }
});
