//! Default tolerance table. Every numeric threshold used by the checks lives
//! here so experiments can override them from a config file.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Exact stencil identities (polynomial reproduction, operator algebra).
    pub stencil_exact: f64,
    /// FFT vs direct DFT agreement.
    pub dft_oracle: f64,
    /// Spectral norm vs direct quadrature agreement.
    pub spectral_quadrature: f64,
    /// Ray quadrature vs dense 1-D quadrature.
    pub ray_oracle: f64,
    /// Full-line ray integrals of gradient fields.
    pub gradient_annihilation: f64,
    /// Linearity of the ray transform.
    pub transform_linearity: f64,
    /// Relative residual required from the implicit linear solves.
    pub linear_solver: f64,
    /// Relative DN-trace difference tolerated for gauge-equivalent pairs.
    pub gauge_relative: f64,
    /// Relative error allowed for recovered curl spectra on the aperture.
    pub curl_recovery_relative: f64,
    /// Relative error allowed for recovered potentials and coefficients.
    pub recovery_relative: f64,
    /// Curl norm (relative to the field norm) below which a field is
    /// accepted as a gradient by the potential integrator.
    pub curl_free_relative: f64,
    /// Orthogonality required between a cone direction and a usable frequency.
    pub aperture_orthogonality: f64,
    /// Rank / least-squares cutoff for the per-frequency solves.
    pub least_squares_rank: f64,
    /// Multiplier on h^2 for the harmonic-Dirichlet certificate.
    pub harmonic_certificate_scale: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            stencil_exact: 1e-12,
            dft_oracle: 1e-10,
            spectral_quadrature: 1e-10,
            ray_oracle: 1e-8,
            gradient_annihilation: 1e-6,
            transform_linearity: 1e-12,
            linear_solver: 1e-10,
            gauge_relative: 5e-2,
            curl_recovery_relative: 5e-2,
            recovery_relative: 5e-2,
            curl_free_relative: 1e-3,
            aperture_orthogonality: 2e-2,
            least_squares_rank: 1e-10,
            harmonic_certificate_scale: 10.0,
        }
    }
}
