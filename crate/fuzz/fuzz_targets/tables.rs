#![no_main]

use cgrasp::artifacts::*;
use libfuzzer_sys::fuzz_target;

// First byte picks the table; the rest is the CSV text.
fuzz_target!(|data: &[u8]| {
    let Some((&which, body)) = data.split_first() else { return };
    match which % 7 {
        0 => drop(decode::<ObjectRow, _>(OBJECT, body)),
        1 => drop(decode::<TrajectoryRow, _>(TRAJECTORY, body)),
        2 => drop(decode::<ArmRow, _>(ARM, body)),
        3 => drop(decode::<ReferenceRow, _>(REFERENCE, body)),
        4 => drop(decode::<CostRow, _>(COST, body)),
        5 => drop(decode::<QualityRow, _>(QUALITY_MAP, body)),
        _ => drop(decode::<OptimumRow, _>(OPTIMUM, body)),
    }
});
