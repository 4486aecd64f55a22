//! Local geometry around the reference: neighborhoods, the class `𝔇`,
//! the pseudodistance `N` and the comparison constant `c*`.

mod coeffs;
mod neighborhoods;
mod scan;
mod search;

pub use coeffs::{
    ell, ell_times_fstar, mixture_to_coeffs, pseudo_n, sample_deviation, sample_deviation_with,
    DeviationCoefficients, DiscreteMeasure, LocalBasis, ScaleProfile,
};
pub use neighborhoods::{build_neighborhoods, haar_rotation, NeighborhoodOptions, NeighborhoodSystem, DET_MIN};
pub use scan::{ratio_scan, RatioRow, ScanOptions};
pub use search::{estimate_cstar, outer_point_ratio, ratio_of, CstarEstimate, CstarOptions};
