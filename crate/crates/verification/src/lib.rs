//! Reference sweeps used by the acceptance suite. The configurations are the
//! ones shipped under `configs/`, with file output disabled.

use vvflux_core::harness::{parse_config, RunConfig};

pub const ARCTAN_1D: &str = include_str!("../../../configs/arctan_1d.json");
pub const GAUSS_2D: &str = include_str!("../../../configs/gauss_2d.json");

/// `d = 1`, `arctan_gap` with gap 4, `ε ∈ {0.1, 0.05, 0.025}`, `K = 5`, `T = 1`.
pub fn arctan_sweep() -> RunConfig {
    in_memory(ARCTAN_1D)
}

/// `d = 2`, `gauss_arctan` with `φ(x₂) = -x₂`, `ε ∈ {0.1, 0.05}`, `K = 5`, `T = 0.5`.
pub fn gauss_sweep() -> RunConfig {
    in_memory(GAUSS_2D)
}

fn in_memory(text: &str) -> RunConfig {
    let mut cfg = parse_config(text).expect("shipped config parses");
    cfg.out_dir = None;
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_configs_match_the_reference_sweeps() {
        let a = arctan_sweep();
        assert_eq!((a.dim, a.half_width, a.end_time), (1, 5.0, 1.0));
        assert_eq!(a.eps, vec![0.1, 0.05, 0.025]);
        assert_eq!(a.etas[0], 0.2);
        let g = gauss_sweep();
        assert_eq!((g.dim, g.half_width, g.end_time), (2, 5.0, 0.5));
        assert_eq!(g.eps, vec![0.1, 0.05]);
        assert_eq!(g.fixture_params.slope, -1.0);
        assert!(a.out_dir.is_none() && g.out_dir.is_none());
    }
}
