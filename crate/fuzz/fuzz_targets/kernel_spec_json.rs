#![no_main]

use fracsub::KernelSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(spec) = serde_json::from_slice::<KernelSpec>(data) else { return };
    // Anything that parses was validated; round-trip and evaluate it.
    let text = serde_json::to_string(&spec).expect("valid spec serializes");
    assert_eq!(serde_json::from_str::<KernelSpec>(&text).expect("round trip"), spec);
    for lambda in [1e-6, 1.0, 1e6] {
        let _ = spec.k_laplace(lambda);
        let _ = spec.phi(lambda);
    }
    let _ = spec.admissibility_report();
});
