//! Shared problem setups for the benchmarks in `benches/`.

use hergnet::geometry::{rng_stream, sample_boundary};
use hergnet::training::BoundaryData;
use hergnet::{HergNetParams, PhysicalConfig, ShoeboxDomain, TrainConfig};

/// A freshly initialised model with its boundary data.
pub struct Problem {
    pub phys: PhysicalConfig,
    pub domain: ShoeboxDomain,
    pub params: HergNetParams,
    pub data: BoundaryData,
}

/// The default-sized training problem for the paper room at `f`.
pub fn room_problem(f: f64, seed: u64) -> Problem {
    let phys = PhysicalConfig::lightly_absorbing(f).expect("valid frequency");
    let domain = ShoeboxDomain::louden_room();
    let cfg = TrainConfig::default();
    let n_train = cfg.train_count(&domain, f, phys.c).expect("valid counts");
    let mut rng = rng_stream(seed, 0);
    let points = sample_boundary(&domain, n_train, &mut rng);
    let params = HergNetParams::init(domain.dim, cfg.quad_count(f), &mut rng);
    let data = BoundaryData::new(points, &phys, &domain).expect("source off the boundary");
    Problem {
        phys,
        domain,
        params,
        data,
    }
}
