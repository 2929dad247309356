#![no_main]

use fracsub::series::{SeriesTag, TimeSeries};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(series) = TimeSeries::from_csv(text, SeriesTag::VAtProbe) else { return };
    let again = TimeSeries::from_csv(&series.to_csv(), SeriesTag::VAtProbe).expect("written csv parses");
    assert_eq!(again, series);
    let _ = series.interpolate(series.t_min());
    let _ = series.interpolate(series.t_max());
});
