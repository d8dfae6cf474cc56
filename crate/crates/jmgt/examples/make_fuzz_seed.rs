//! Writes a small valid checkpoint used as a fuzz corpus seed.
use jmgt::checkpoint;
use jmgt::grid::SpectralGrid;
use jmgt::kernel::KernelSpec;
use jmgt::params::PhysicalParams;
use jmgt::state::{InitialProfile, StateVector};

fn main() {
    let grid = SpectralGrid::shared(1, 8, 6.0).unwrap();
    let kernel = KernelSpec::new(0.1, 1.0, 0.5).unwrap();
    let params = PhysicalParams::new(0.5, 1.0, 0.1, 0.0, kernel, false).unwrap();
    let profile = InitialProfile::SingleMode {
        mode: [1, 0, 0],
        amplitudes: [0.25, 0.1, 0.0],
    };
    let (state, _) = StateVector::initial_default(&grid, &profile, &params, 0.01).unwrap();
    let bytes = checkpoint::encode(&state, &params, 40.0, jmgt::history::DEFAULT_RING_BUDGET);
    std::fs::write("fuzz/corpus/fuzz_checkpoint/tiny_valid.ckpt", &bytes).unwrap();
    println!("wrote {} bytes", bytes.len());
}
