//! Location families, mixtures, quadrature and envelope functions.

mod context;
mod envelope;
mod family;
mod grid_fn;
pub(crate) mod mixture;
mod quadrature;

pub use context::{default_box, eval_derivative_ratio, eval_mixture, Model};
pub use envelope::{envelope_h, EnvelopeOptions, Envelopes};
pub use family::{BaseDensity, LocationFamily, TabulatedDensity};
pub use grid_fn::GridFunction;
pub use mixture::{dist, sample_ball, Mixture, ParameterDomain};
pub use quadrature::{QuadratureGrid, QuadratureScheme};
