#![no_main]

use fracsub::experiment::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(config) = ExperimentConfig::from_toml(text) else { return };
    let _ = config.validate();
    let _ = config.hash();
    let again = ExperimentConfig::from_toml(&config.to_toml()).expect("serialized config parses");
    assert_eq!(again.hash(), config.hash());
});
