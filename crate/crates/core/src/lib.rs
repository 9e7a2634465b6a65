//! Simulation core for a subquantum-entity (SQE) ensemble model of spin
//! measurement, unitary evolution and entanglement.
//!
//! A quantum system is an ensemble of `N` classical entities, each holding a
//! value `a_i(alpha)` in `[-1, 1]` for every setting `alpha` on a discretized
//! circle and a persistent hidden phase `u_i`. A coupling field decides which
//! observable relaxes to a single eigenvalue; the others settle into regions
//! whose fractional volumes are the Born weights.
//!
//! ```
//! use sqe_core::{fractional_volume, init_eigenstate, AlphaGrid, Eigenvalue};
//!
//! let grid = AlphaGrid::new(360).unwrap();
//! let state = init_eigenstate(1000, grid, grid.at(0), Eigenvalue::Plus, 7).unwrap();
//! assert_eq!(fractional_volume(&state, grid.at(0)), 1.0);
//! assert_eq!(fractional_volume(&state, grid.at(180)), 0.0);
//! ```

pub mod coupling;
pub mod ensemble;
pub mod entanglement;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod measurement;
pub mod model_a;
pub mod relaxation;
pub mod rng;
pub mod snapshot;
pub mod stats;

pub use coupling::{
    born_functional, check_constraint, coupling_for_eigenstate, qm_oracle, transition_functional,
    ConstraintReport, CouplingField,
};
pub use ensemble::{
    ensemble_average, fractional_volume, init_eigenstate, is_equilibrium, EnsembleState,
    Equilibrium, SqeMicrostate,
};
pub use entanglement::{
    measure_side, prepare_singlet, Chsh, ChshAngles, Correlation, Marginal, PairedEnsemble, Side,
    SingletRun, SingletSetup, SpaceEvent, TrialOrder,
};
pub use error::{Result, SqeError};
pub use evolution::{
    detect_improper, evolve, unitary_step, EvolutionMode, EvolutionPlan, EvolutionResult,
    RegimeReport, DEFAULT_R_MIN,
};
pub use grid::{canonicalize, AlphaGrid, Eigenvalue, GridAngle};
pub use measurement::{hidden_uniform, ideal_measure, pointer_reading, HiddenSeeds, MeasurementRecord};
pub use model_a::{ModelAConfig, SpeciesShape};
pub use relaxation::{
    measure_relax_time, relax_step, relax_to_equilibrium, RelaxationOutcome, RelaxationParams,
};
pub use rng::{derive_seed, PathElem, SeedPath, GENERATOR_NAME, SEED_DERIVATION};
pub use snapshot::EnsembleSnapshot;
