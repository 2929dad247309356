#![no_main]

use fracsub::heat::FieldSnapshot;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(field) = FieldSnapshot::from_bytes(data) else { return };
    // The header spacing is checked to a tolerance, so compare parsed values.
    assert_eq!(FieldSnapshot::from_bytes(&field.to_bytes()).expect("dump parses"), field);
});
