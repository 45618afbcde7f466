//! Gain synthesis and stability certificates for both controllers.

mod backstepping;
mod certify;
mod poles;

pub use backstepping::{
    alpha2_star, block_margin, block_symmetric_part, certify_pair, k_from_alpha, pair_certificate_matrix,
    phi_matrix, synthesize_alpha_chain, transform_matrix, AlphaChain, KVector,
};
pub use certify::{
    certify_chi_closed_loop, chi_eigenvalues, BetaSignal, ChiCertificate, TrialOutcome, VertexCheck, DECAY_RATIO,
    DESCENT_SLACK,
};
pub use poles::{
    butterworth_poles, gamma_from_family, pd_gains_from_poles, poly_from_roots, GammaSet, PDGains, PolyFamily,
};
