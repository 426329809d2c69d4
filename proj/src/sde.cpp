#include "skewflow/sde.hpp"

#include <algorithm>
#include <cmath>

#include "skewflow/rng.hpp"

namespace skewflow {

double frobenius_norm(std::span<const double> a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
}

double frobenius_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ConfigError("frobenius_distance: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

SymEigen jacobi_eigensym(std::span<const double> a, std::size_t d) {
    if (a.size() != d * d) throw ConfigError("jacobi_eigensym: bad matrix size");
    Vec m(a.begin(), a.end());
    Vec v(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) v[i * d + i] = 1.0;

    const double scale = std::max(1.0, frobenius_norm(a));
    for (int sweep = 0; sweep < 128; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < d; ++p)
            for (std::size_t q = p + 1; q < d; ++q) off += m[p * d + q] * m[p * d + q];
        if (std::sqrt(off) <= 1e-15 * scale) break;
        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                const double apq = m[p * d + q];
                if (std::abs(apq) <= 1e-18 * scale) continue;
                const double theta = (m[q * d + q] - m[p * d + p]) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < d; ++k) {
                    const double mkp = m[k * d + p];
                    const double mkq = m[k * d + q];
                    m[k * d + p] = c * mkp - s * mkq;
                    m[k * d + q] = s * mkp + c * mkq;
                }
                for (std::size_t k = 0; k < d; ++k) {
                    const double mpk = m[p * d + k];
                    const double mqk = m[q * d + k];
                    m[p * d + k] = c * mpk - s * mqk;
                    m[q * d + k] = s * mpk + c * mqk;
                }
                for (std::size_t k = 0; k < d; ++k) {
                    const double vkp = v[k * d + p];
                    const double vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    SymEigen out;
    out.eigenvalues.resize(d);
    for (std::size_t i = 0; i < d; ++i) out.eigenvalues[i] = m[i * d + i];
    out.eigenvectors = std::move(v);
    return out;
}

namespace {

void check_symmetric(std::span<const double> sigma, std::size_t d) {
    double max_abs = 0.0;
    for (double x : sigma) max_abs = std::max(max_abs, std::abs(x));
    const double tol = 1e-12 * std::max(1.0, max_abs);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j)
            if (std::abs(sigma[i * d + j] - sigma[j * d + i]) > tol)
                throw ConfigError("matrix is not symmetric within tolerance");
}

// reassemble V diag(f(lambda)) V^T, exactly symmetric by construction
Vec spectral_assemble(const SymEigen& eig, const Vec& fl, std::size_t d) {
    Vec out(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i; j < d; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k)
                s += eig.eigenvectors[i * d + k] * fl[k] * eig.eigenvectors[j * d + k];
            out[i * d + j] = s;
            out[j * d + i] = s;
        }
    }
    return out;
}

}  // namespace

Vec matrix_sqrt_psd(std::span<const double> sigma, std::size_t d) {
    if (sigma.size() != d * d) throw ConfigError("matrix_sqrt_psd: bad size");
    check_symmetric(sigma, d);
    SymEigen eig = jacobi_eigensym(sigma, d);
    double scale = 0.0;
    for (double l : eig.eigenvalues) scale = std::max(scale, std::abs(l));
    const double floor = -1e-10 * std::max(1.0, scale);
    Vec roots(d);
    for (std::size_t k = 0; k < d; ++k) {
        const double l = eig.eigenvalues[k];
        if (l < floor)
            throw ConfigError("matrix_sqrt_psd: eigenvalue " + std::to_string(l) +
                              " below PSD tolerance");
        roots[k] = l > 0.0 ? std::sqrt(l) : 0.0;
    }
    return spectral_assemble(eig, roots, d);
}

PsdProjection psd_project(std::span<const double> sym, std::size_t d) {
    if (sym.size() != d * d) throw ConfigError("psd_project: bad size");
    check_symmetric(sym, d);
    SymEigen eig = jacobi_eigensym(sym, d);
    PsdProjection out;
    Vec clipped(d);
    for (std::size_t k = 0; k < d; ++k) {
        const double l = eig.eigenvalues[k];
        if (l < 0.0) {
            out.clipped_mass += -l;
            clipped[k] = 0.0;
        } else {
            clipped[k] = l;
        }
    }
    out.matrix = spectral_assemble(eig, clipped, d);
    return out;
}

NoisePath make_noise_path(std::uint64_t seed, std::size_t dim, double T, double h) {
    if (dim < 1) throw ConfigError("noise path needs dim >= 1");
    if (!(h > 0.0) || !(T > 0.0)) throw ConfigError("noise path needs T, h > 0");
    const auto count = static_cast<std::size_t>(std::llround(T / h));
    if (count < 1 || std::abs(static_cast<double>(count) * h - T) > 1e-9 * T)
        throw ConfigError("noise grid: T must be an integer multiple of h");
    NoisePath path;
    path.h = h;
    path.dim = dim;
    path.count = count;
    path.seed = seed;
    path.increments.resize(count * dim);
    Rng rng(seed);
    const double root_h = std::sqrt(h);
    for (auto& v : path.increments) v = root_h * rng.gauss();
    return path;
}

void SdeSpec::validate() const {
    if (d < 1) throw ConfigError("SDE dimension must be >= 1");
    if (!drift.eval || drift.d != d) throw ConfigError("SDE drift missing or mismatched");
    if (noise_root.size() != d * d) throw ConfigError("noise root must be d x d");
    if (xi.size() != d) throw ConfigError("SDE initial condition dimension mismatch");
}

void SdeSpec::check_noise_root(std::span<const double> sigma) const {
    validate();
    Vec ssT(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k)
                s += noise_root[i * d + k] * noise_root[j * d + k];
            ssT[i * d + j] = s;
        }
    if (frobenius_distance(ssT, sigma) > 1e-10 * std::max(1.0, frobenius_norm(sigma)))
        throw ConfigError("noise root does not reproduce Sigma within 1e-10");
}

TrajectoryGrid euler_maruyama(const SdeSpec& spec, double T, double h,
                              const NoisePath& noise) {
    spec.validate();
    if (!(h > 0.0)) throw ConfigError("euler_maruyama needs h > 0");
    if (noise.dim != spec.d || std::abs(noise.h - h) > 1e-12 * h)
        throw ConfigError("noise path does not match (T, h)");
    const auto steps = static_cast<std::size_t>(std::llround(T / h));
    if (steps != noise.count) throw ConfigError("noise path does not match (T, h)");

    TrajectoryGrid grid;
    grid.t0 = 0.0;
    grid.dt = h;
    grid.dim = spec.d;
    grid.time_frame = TimeFrame::Slow;
    grid.data.reserve((steps + 1) * spec.d);
    grid.data.insert(grid.data.end(), spec.xi.begin(), spec.xi.end());

    Vec x = spec.xi;
    Vec fx(spec.d);
    const double drift_tol = 1e-9 * (1.0 + spec.drift.bound);
    for (std::size_t k = 0; k < steps; ++k) {
        spec.drift(std::span<const double>(x), std::span<double>(fx));
        if (!all_finite(fx))
            throw NumericalError("non-finite drift value", grid.time(k));
        if (spec.drift.bound > 0.0 && norm2(fx) > spec.drift.bound + drift_tol)
            throw NumericalError("drift exceeded its declared bound", grid.time(k));
        auto dw = noise.increment(k);
        for (std::size_t i = 0; i < spec.d; ++i) {
            double noise_term = 0.0;
            for (std::size_t j = 0; j < spec.d; ++j)
                noise_term += spec.noise_root[i * spec.d + j] * dw[j];
            x[i] += h * fx[i] + noise_term;
        }
        if (!all_finite(x)) throw NumericalError("SDE state blew up", grid.time(k + 1));
        grid.data.insert(grid.data.end(), x.begin(), x.end());
    }
    return grid;
}

TrajectoryGrid apply_G(const TrajectoryGrid& u, std::span<const double> xi,
                       const Drift& F) {
    const std::size_t d = u.dim;
    if (xi.size() != d || F.d != d) throw ConfigError("apply_G: dimension mismatch");
    if (u.size() < 2) throw ConfigError("apply_G: path needs at least 2 points");
    const double dt = u.dt;

    TrajectoryGrid v;
    v.t0 = u.t0;
    v.dt = dt;
    v.dim = d;
    v.time_frame = u.time_frame;
    v.data.resize(u.data.size());

    Vec vk(d), vnext(d), f_prev(d), f_next(d);
    Vec trap(d, 0.0);  // trapezoid sum of F(v) through the current node
    for (std::size_t i = 0; i < d; ++i) {
        vk[i] = xi[i] + u.data[i];
        v.data[i] = vk[i];
    }
    F(std::span<const double>(vk), std::span<double>(f_prev));

    const std::size_t count = u.size();
    for (std::size_t k = 0; k + 1 < count; ++k) {
        auto u_next = u.state(k + 1);
        // predictor: carry the increment of u forward
        for (std::size_t i = 0; i < d; ++i) vnext[i] = vk[i] + (u_next[i] - u.state(k)[i]);

        double change = 0.0;
        bool converged = false;
        for (int it = 0; it < 50; ++it) {
            F(std::span<const double>(vnext), std::span<double>(f_next));
            change = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                const double nv =
                    xi[i] + u_next[i] + trap[i] + 0.5 * dt * (f_prev[i] + f_next[i]);
                change = std::max(change, std::abs(nv - vnext[i]));
                vnext[i] = nv;
            }
            if (change <= 1e-13 * (1.0 + sup_abs(vnext))) {
                converged = true;
                break;
            }
        }
        if (!converged && change > 1e-9 * (1.0 + sup_abs(vnext)))
            throw NumericalError(
                "apply_G fixed-point correction did not converge; drift may not "
                "be Lipschitz",
                u.time(k + 1));

        F(std::span<const double>(vnext), std::span<double>(f_next));
        for (std::size_t i = 0; i < d; ++i) {
            trap[i] += 0.5 * dt * (f_prev[i] + f_next[i]);
            v.data[(k + 1) * d + i] = vnext[i];
            vk[i] = vnext[i];
        }
        std::swap(f_prev, f_next);
    }
    return v;
}

}  // namespace skewflow
