//! Optimal entry and exit thresholds for trading an asset whose log price
//! follows an Ornstein-Uhlenbeck process, with transaction costs.
//!
//! Two problems are solved:
//!
//! * a single round trip (buy once, sell once), in [`double_stopping`];
//! * repeated trading with no limit on round trips, in [`switching`].
//!
//! Both reduce to root finding on closed-form expressions built from the two
//! monotone solutions `F` and `G` of the OU resolvent equation, evaluated in
//! log scale by [`eigen`]. [`verification`] and [`simulation`] check the
//! results independently.

pub mod calibration;
pub mod double_stopping;
pub mod eigen;
pub mod error;
pub mod ext;
pub mod model;
pub mod quadrature;
pub mod roots;
pub mod simulation;
pub mod switching;
pub mod verification;

pub use calibration::{fit_log_prices, fit_prices, Estimate, OuFit};
pub use double_stopping::{DoubleStoppingSolution, ExitSolution, RootDiagnostic};
pub use eigen::{EigenPoint, Eigenfunctions};
pub use error::{Error, Result};
pub use model::{Costs, FbRoots, ModelLandmarks, ModelParams};
pub use quadrature::QuadratureConfig;
pub use simulation::{McConfig, McEstimate, Path, PathSpec, Strategy, TradeEvent, TradeLog};
pub use switching::{CaseReport, SwitchingCase, SwitchingSolution};
pub use verification::{ClauseCheck, MajorantReport, ResidualReport, ShapeReport};
