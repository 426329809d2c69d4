#pragma once

#include <cstdint>

#include "skewflow/drift.hpp"
#include "skewflow/ode.hpp"

namespace skewflow {

// --- small dense symmetric-matrix helpers (d is the slow dimension, tiny) ---

struct SymEigen {
    Vec eigenvalues;   // d
    Vec eigenvectors;  // d x d row-major, column j = eigenvector j
};

// Cyclic Jacobi rotations; deterministic, adequate for the d x d matrices
// that occur here.
SymEigen jacobi_eigensym(std::span<const double> a, std::size_t d);

double frobenius_norm(std::span<const double> a);
double frobenius_distance(std::span<const double> a, std::span<const double> b);

// Symmetric PSD square root via spectral decomposition: S = V sqrt(L) V^T,
// S S^T = S^2 = Sigma. Eigenvalues in [-1e-10*scale, 0) are clipped to zero;
// anything lower, or asymmetry beyond 1e-12*scale, is an input error.
Vec matrix_sqrt_psd(std::span<const double> sigma, std::size_t d);

struct PsdProjection {
    Vec matrix;
    double clipped_mass = 0.0;  // total magnitude of clipped negative eigenvalues
};

// Nearest-PSD projection by eigenvalue clipping (used on estimator output).
PsdProjection psd_project(std::span<const double> sym, std::size_t d);

// --- SDE simulation -------------------------------------------------------

// Brownian increments ~ N(0, h*I) on a uniform grid, reproducible from seed.
struct NoisePath {
    double h = 0.0;
    std::size_t dim = 0;
    std::size_t count = 0;
    std::uint64_t seed = 0;
    Vec increments;  // count x dim

    std::span<const double> increment(std::size_t k) const {
        return {increments.data() + k * dim, dim};
    }
};

NoisePath make_noise_path(std::uint64_t seed, std::size_t dim, double T, double h);

struct SdeSpec {
    Drift drift;
    Vec noise_root;  // d x d matrix S with S*S^T = Sigma
    Vec xi;
    std::size_t d = 0;

    void validate() const;
    // checks S*S^T against Sigma within 1e-10 Frobenius
    void check_noise_root(std::span<const double> sigma) const;
};

// X_{k+1} = X_k + h*F(X_k) + S*dW_k; deterministic given the noise path.
TrajectoryGrid euler_maruyama(const SdeSpec& spec, double T, double h,
                              const NoisePath& noise);

// The pathwise solution map: v = G(u) solves v(t) = xi + u(t) + int_0^t
// F(v(s)) ds on u's grid, by trapezoid quadrature with a fixed-point
// correction per step (iterated to tolerance, error after 50 iterations).
TrajectoryGrid apply_G(const TrajectoryGrid& u, std::span<const double> xi,
                       const Drift& F);

}  // namespace skewflow
