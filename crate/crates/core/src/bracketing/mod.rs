//! Brackets over finite-dimensional lattices and grid functions.

mod cover;
mod jsonl;
mod lattice;
mod mixture;
mod slicing;
mod synthetic;

pub use cover::greedy_cover;
pub use jsonl::{parse_jsonl, read_jsonl, to_jsonl_string, write_jsonl};
pub use lattice::{
    verify_bracket_cover, Bracket, BracketIndex, BracketSet, CoverReport, LatticeNorm, LatticeVector, SIZE_SLACK,
};
pub use mixture::{
    bracket_hq_local, build_d0_brackets_mixture, ell_from_params, ln_floor_lattice, ln_lattice, score_approximation,
    witness_set, BundleNorms, CoverPart, CoverScales, D0Witness, HqLocalCover, HqWitness, MixtureContext,
    MixtureD0Cover, MixtureEnvelopeBundle, NearSpacings, ScoreApproximation, ScoreFamilyIndex, ScoreParams,
    ShellCover, MAX_DIM, MAX_Q,
};
pub use slicing::{inner_bracket, map_shell_bracket, slice_local_brackets, SliceSchedule, SlicedBrackets};
pub use synthetic::{
    hilbert_local_brackets, hilbert_points, incompatible_lower_bound, random_ratio, run_instance,
    slice_with_sphere_cubes, EllipsoidClass, InstanceReport, PolyCertificate, SliceCheck, SphereCubes,
};
