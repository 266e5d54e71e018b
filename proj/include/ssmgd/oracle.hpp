#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ssmgd/errors.hpp"
#include "ssmgd/rng.hpp"

namespace ssmgd {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Measured problem constants for a (family, stationary distribution) pair:
/// noise level at the optimum, two-sided curvature bounds and their ratio.
struct AssumptionCertificate {
    double sigma2 = 0.0;
    double kappa = 0.0;
    double eta = 0.0;
    double alpha = 0.0;
    double mean_gradient_norm = 0.0;

    nlohmann::json to_json() const {
        return {{"sigma2", sigma2},
                {"kappa", kappa},
                {"eta", eta},
                {"alpha", alpha},
                {"mean_gradient_norm", mean_gradient_norm}};
    }
};

namespace detail {

inline VectorXd solve_spd_checked(const MatrixXd& lhs, const VectorXd& rhs) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(lhs);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (lo <= 0.0 || hi / lo > 1e12) {
        throw SingularSystem("averaged operator is singular or too ill-conditioned");
    }
    VectorXd solution = lhs.ldlt().solve(rhs);
    if ((lhs * solution - rhs).norm() > 1e-10 * std::max(1.0, rhs.norm())) {
        throw SingularSystem("linear solve missed the residual target");
    }
    return solution;
}

} // namespace detail

/// Family of per-state affine gradient maps grad_z(w) = A(z) w + B(z) on
/// R^d with every A(z) symmetric positive definite. Immutable; gradient and
/// norm are pure and concurrently callable.
class QuadraticFamily {
public:
    QuadraticFamily(std::vector<MatrixXd> operators, std::vector<VectorXd> offsets)
        : operators_(std::move(operators)), offsets_(std::move(offsets)) {
        if (operators_.empty() || operators_.size() != offsets_.size()) {
            throw DomainError("quadratic family needs matching operator and offset lists");
        }
        dim_ = operators_.front().rows();
        if (dim_ < 1) throw DomainError("quadratic family needs dimension >= 1");
        state_kappa_.reserve(operators_.size());
        state_eta_.reserve(operators_.size());
        for (std::size_t z = 0; z < operators_.size(); ++z) {
            const MatrixXd& op = operators_[z];
            if (op.rows() != dim_ || op.cols() != dim_ || offsets_[z].size() != dim_) {
                throw DimensionMismatch("quadratic family has inconsistent dimensions");
            }
            if ((op - op.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
                throw DomainError("operator " + std::to_string(z) + " is not symmetric");
            }
            Eigen::SelfAdjointEigenSolver<MatrixXd> eig(op);
            const double lo = eig.eigenvalues().minCoeff();
            if (lo <= 0.0) {
                throw DomainError("operator " + std::to_string(z) + " is not positive definite");
            }
            state_kappa_.push_back(lo);
            state_eta_.push_back(eig.eigenvalues().maxCoeff());
        }
    }

    Eigen::Index dim() const { return dim_; }
    Eigen::Index n_states() const { return static_cast<Eigen::Index>(operators_.size()); }
    const MatrixXd& operator_at(Eigen::Index z) const { return operators_[check_state(z)]; }
    const VectorXd& offset_at(Eigen::Index z) const { return offsets_[check_state(z)]; }

    VectorXd gradient(Eigen::Index z, const VectorXd& w) const {
        check_dim(w);
        return operators_[check_state(z)] * w + offsets_[z];
    }

    /// Linear part A(z) u of the gradient map.
    VectorXd linear_apply(Eigen::Index z, const VectorXd& u) const {
        check_dim(u);
        return operators_[check_state(z)] * u;
    }

    /// V_z(w) = (1/2) <A(z) w, w> + <B(z), w>; the constant term is zero.
    double potential(Eigen::Index z, const VectorXd& w) const {
        check_dim(w);
        return 0.5 * w.dot(operators_[check_state(z)] * w) + offsets_[z].dot(w);
    }

    double norm_squared(const VectorXd& v) const {
        check_dim(v);
        return v.squaredNorm();
    }
    double norm(const VectorXd& v) const { return std::sqrt(norm_squared(v)); }

    /// Unique zero of the rho-averaged gradient: solve Ahat w = -Bhat.
    VectorXd minimizer(const VectorXd& rho) const {
        check_rho(rho);
        MatrixXd avg_op = MatrixXd::Zero(dim_, dim_);
        VectorXd avg_off = VectorXd::Zero(dim_);
        for (Eigen::Index z = 0; z < n_states(); ++z) {
            avg_op += rho(z) * operators_[z];
            avg_off += rho(z) * offsets_[z];
        }
        return detail::solve_spd_checked(avg_op, -avg_off);
    }

    AssumptionCertificate certify(const VectorXd& rho) const {
        const VectorXd wstar = minimizer(rho);
        AssumptionCertificate cert;
        cert.kappa = *std::min_element(state_kappa_.begin(), state_kappa_.end());
        cert.eta = *std::max_element(state_eta_.begin(), state_eta_.end());
        cert.alpha = cert.kappa / cert.eta;
        VectorXd mean = VectorXd::Zero(dim_);
        for (Eigen::Index z = 0; z < n_states(); ++z) {
            const VectorXd g = gradient(z, wstar);
            cert.sigma2 = std::max(cert.sigma2, g.squaredNorm());
            mean += rho(z) * g;
        }
        cert.mean_gradient_norm = mean.norm();
        return cert;
    }

    nlohmann::json to_json() const {
        nlohmann::json ops = nlohmann::json::array();
        nlohmann::json offs = nlohmann::json::array();
        for (Eigen::Index z = 0; z < n_states(); ++z) {
            nlohmann::json flat = nlohmann::json::array();
            for (Eigen::Index i = 0; i < dim_; ++i)
                for (Eigen::Index j = 0; j < dim_; ++j) flat.push_back(operators_[z](i, j));
            ops.push_back(std::move(flat));
            nlohmann::json off = nlohmann::json::array();
            for (Eigen::Index i = 0; i < dim_; ++i) off.push_back(offsets_[z](i));
            offs.push_back(std::move(off));
        }
        return {{"kind", "quadratic"}, {"dimension", dim_}, {"n_states", n_states()},
                {"A", std::move(ops)}, {"B", std::move(offs)}};
    }

    static QuadraticFamily from_json(const nlohmann::json& doc) {
        const auto d = doc.at("dimension").get<Eigen::Index>();
        const auto n = doc.at("n_states").get<Eigen::Index>();
        std::vector<MatrixXd> ops;
        std::vector<VectorXd> offs;
        for (Eigen::Index z = 0; z < n; ++z) {
            const auto& flat = doc.at("A").at(z);
            const auto& off = doc.at("B").at(z);
            if (static_cast<Eigen::Index>(flat.size()) != d * d ||
                static_cast<Eigen::Index>(off.size()) != d) {
                throw DomainError("quadratic family document has inconsistent shapes");
            }
            MatrixXd op(d, d);
            for (Eigen::Index i = 0; i < d; ++i)
                for (Eigen::Index j = 0; j < d; ++j) op(i, j) = flat[i * d + j].get<double>();
            VectorXd b(d);
            for (Eigen::Index i = 0; i < d; ++i) b(i) = off[i].get<double>();
            ops.push_back(std::move(op));
            offs.push_back(std::move(b));
        }
        return QuadraticFamily(std::move(ops), std::move(offs));
    }

private:
    Eigen::Index check_state(Eigen::Index z) const {
        if (z < 0 || z >= n_states()) throw DomainError("state index out of range");
        return z;
    }
    void check_dim(const VectorXd& v) const {
        if (v.size() != dim_) throw DimensionMismatch("vector does not match family dimension");
    }
    void check_rho(const VectorXd& rho) const {
        if (rho.size() != n_states()) {
            throw DimensionMismatch("distribution does not match the family's state count");
        }
    }

    std::vector<MatrixXd> operators_;
    std::vector<VectorXd> offsets_;
    std::vector<double> state_kappa_;
    std::vector<double> state_eta_;
    Eigen::Index dim_ = 0;
};

/// Regularized kernel regression on a fixed grid, worked in the coefficient
/// representation f = sum_j c_j K(x_j, .). A state z is the pair
/// (grid point x_z, label y_z); the per-state gradient of
/// (1/2)[(f(x_z) - y_z)^2 + lambda |f|_K^2] has coefficients
/// (f(x_z) - y_z) e_z + lambda c with f(x_z) = (G c)_z. All norms are
/// kernel-space norms through the Gram matrix.
class KernelFamily {
public:
    KernelFamily(VectorXd grid, double bandwidth, MatrixXd gram, double lambda, VectorXd labels)
        : grid_(std::move(grid)), gram_(std::move(gram)), labels_(std::move(labels)),
          bandwidth_(bandwidth), lambda_(lambda) {
        const Eigen::Index m = grid_.size();
        if (m < 1 || gram_.rows() != m || gram_.cols() != m || labels_.size() != m) {
            throw DimensionMismatch("kernel family has inconsistent shapes");
        }
        if (!(bandwidth_ > 0.0) || !(lambda_ > 0.0)) {
            throw DomainError("kernel family needs positive bandwidth and lambda");
        }
        if ((gram_ - gram_.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
            throw DomainError("Gram matrix is not symmetric");
        }
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram_);
        if (eig.eigenvalues().minCoeff() < -1e-10) {
            throw DomainError("Gram matrix is not positive semidefinite");
        }
    }

    Eigen::Index dim() const { return grid_.size(); }
    Eigen::Index n_states() const { return grid_.size(); }
    const MatrixXd& gram() const { return gram_; }
    const VectorXd& grid() const { return grid_; }
    const VectorXd& labels() const { return labels_; }
    double lambda() const { return lambda_; }
    double bandwidth() const { return bandwidth_; }

    VectorXd gradient(Eigen::Index z, const VectorXd& coeffs) const {
        check_dim(coeffs);
        check_state(z);
        VectorXd g = lambda_ * coeffs;
        g(z) += gram_.row(z).dot(coeffs) - labels_(z);
        return g;
    }

    /// Linear part: u -> (G u)_z e_z + lambda u.
    VectorXd linear_apply(Eigen::Index z, const VectorXd& u) const {
        check_dim(u);
        check_state(z);
        VectorXd out = lambda_ * u;
        out(z) += gram_.row(z).dot(u);
        return out;
    }

    double potential(Eigen::Index z, const VectorXd& coeffs) const {
        check_dim(coeffs);
        check_state(z);
        const double residual = gram_.row(z).dot(coeffs) - labels_(z);
        return 0.5 * (residual * residual + lambda_ * coeffs.dot(gram_ * coeffs));
    }

    double norm_squared(const VectorXd& coeffs) const {
        check_dim(coeffs);
        const double q = coeffs.dot(gram_ * coeffs);
        if (q < -1e-10) throw NegativeQuadraticForm("Gram quadratic form is negative");
        return std::max(q, 0.0);
    }
    double norm(const VectorXd& coeffs) const { return std::sqrt(norm_squared(coeffs)); }

    /// Coefficient solve of the rho-weighted normal equations
    /// (lambda I + diag(rho) G) c = diag(rho) y.
    VectorXd minimizer(const VectorXd& rho) const {
        check_rho(rho);
        const Eigen::Index m = dim();
        MatrixXd lhs = lambda_ * MatrixXd::Identity(m, m);
        lhs += rho.asDiagonal() * gram_;
        const VectorXd rhs = rho.cwiseProduct(labels_);
        Eigen::PartialPivLU<MatrixXd> lu(lhs);
        VectorXd coeffs = lu.solve(rhs);
        if ((lhs * coeffs - rhs).norm() > 1e-10 * std::max(1.0, rhs.norm())) {
            throw SingularSystem("kernel normal equations missed the residual target");
        }
        return coeffs;
    }

    /// kappa = lambda and eta = lambda + max_x K(x,x): each per-state
    /// operator is lambda I plus a rank-one term of size K(x_z, x_z).
    AssumptionCertificate certify(const VectorXd& rho) const {
        const VectorXd cstar = minimizer(rho);
        AssumptionCertificate cert;
        cert.kappa = lambda_;
        cert.eta = lambda_ + gram_.diagonal().maxCoeff();
        cert.alpha = cert.kappa / cert.eta;
        VectorXd mean = VectorXd::Zero(dim());
        for (Eigen::Index z = 0; z < n_states(); ++z) {
            const VectorXd g = gradient(z, cstar);
            cert.sigma2 = std::max(cert.sigma2, norm_squared(g));
            mean += rho(z) * g;
        }
        cert.mean_gradient_norm = norm(mean);
        return cert;
    }

    nlohmann::json to_json() const {
        const Eigen::Index m = dim();
        nlohmann::json grid = nlohmann::json::array();
        nlohmann::json labels = nlohmann::json::array();
        nlohmann::json gram = nlohmann::json::array();
        for (Eigen::Index i = 0; i < m; ++i) {
            grid.push_back(grid_(i));
            labels.push_back(labels_(i));
            for (Eigen::Index j = 0; j < m; ++j) gram.push_back(gram_(i, j));
        }
        return {{"kind", "kernel"},      {"m", m},           {"bandwidth", bandwidth_},
                {"lambda", lambda_},     {"grid", std::move(grid)}, {"gram", std::move(gram)},
                {"labels", std::move(labels)}};
    }

    static KernelFamily from_json(const nlohmann::json& doc) {
        const auto m = doc.at("m").get<Eigen::Index>();
        VectorXd grid(m), labels(m);
        MatrixXd gram(m, m);
        for (Eigen::Index i = 0; i < m; ++i) {
            grid(i) = doc.at("grid").at(i).get<double>();
            labels(i) = doc.at("labels").at(i).get<double>();
            for (Eigen::Index j = 0; j < m; ++j) {
                gram(i, j) = doc.at("gram").at(i * m + j).get<double>();
            }
        }
        return KernelFamily(std::move(grid), doc.at("bandwidth").get<double>(), std::move(gram),
                            doc.at("lambda").get<double>(), std::move(labels));
    }

private:
    void check_state(Eigen::Index z) const {
        if (z < 0 || z >= n_states()) throw DomainError("state index out of range");
    }
    void check_dim(const VectorXd& v) const {
        if (v.size() != dim()) throw DimensionMismatch("coefficient vector does not match grid size");
    }
    void check_rho(const VectorXd& rho) const {
        if (rho.size() != n_states()) {
            throw DimensionMismatch("distribution does not match the family's state count");
        }
    }

    VectorXd grid_;
    MatrixXd gram_;
    VectorXd labels_;
    double bandwidth_ = 0.0;
    double lambda_ = 0.0;
};

/// Test-problem generator: per-state operators Q^T diag(ev) Q with random
/// orthogonal Q and eigenvalues drawn in [kappa_target, eta_target]. Both
/// endpoints are planted explicitly (first operator carries kappa_target,
/// last carries eta_target) so the certified constants hit the targets.
inline QuadraticFamily build_random_quadratic(Eigen::Index d, Eigen::Index n_states,
                                              double kappa_target, double eta_target,
                                              double noise_scale, std::uint64_t seed) {
    if (d < 1 || n_states < 1) throw DomainError("family needs d >= 1 and n_states >= 1");
    if (!(kappa_target > 0.0) || kappa_target > eta_target) {
        throw DomainError("family needs 0 < kappa_target <= eta_target");
    }
    if (noise_scale < 0.0) throw DomainError("noise_scale must be nonnegative");
    if (d * n_states < 2 && kappa_target < eta_target) {
        throw DomainError("a 1x1 single-state family cannot attain two distinct curvature endpoints");
    }

    Rng gen(seed);
    auto random_orthogonal = [&](Eigen::Index size) {
        MatrixXd raw(size, size);
        for (Eigen::Index i = 0; i < size; ++i)
            for (Eigen::Index j = 0; j < size; ++j) raw(i, j) = gaussian(gen);
        return MatrixXd(Eigen::HouseholderQR<MatrixXd>(raw).householderQ());
    };

    std::vector<MatrixXd> operators;
    std::vector<VectorXd> offsets;
    for (Eigen::Index z = 0; z < n_states; ++z) {
        VectorXd eigenvalues(d);
        for (Eigen::Index i = 0; i < d; ++i) {
            eigenvalues(i) = kappa_target + (eta_target - kappa_target) * uniform01(gen);
        }
        if (z == 0) eigenvalues(0) = kappa_target;
        if (z == n_states - 1) eigenvalues(d - 1) = eta_target;

        const MatrixXd q = random_orthogonal(d);
        MatrixXd op = q.transpose() * eigenvalues.asDiagonal() * q;
        op = 0.5 * (op + op.transpose());

        VectorXd offset(d);
        for (Eigen::Index i = 0; i < d; ++i) offset(i) = noise_scale * gaussian(gen);
        operators.push_back(std::move(op));
        offsets.push_back(std::move(offset));
    }
    return QuadraticFamily(std::move(operators), std::move(offsets));
}

/// Label assignment for kernel regression states.
enum class LabelRule { zero, sine, sine_noise };

inline LabelRule label_rule_from_string(const std::string& name) {
    if (name == "zero") return LabelRule::zero;
    if (name == "sine") return LabelRule::sine;
    if (name == "sine_noise") return LabelRule::sine_noise;
    throw DomainError("unknown label rule: " + name);
}

/// Uniform grid on [0,1] with the Gaussian kernel exp(-(x-x')^2 / 2 bw^2);
/// labels follow the rule (sine_noise adds noise recentred to exact mean 0).
inline KernelFamily build_kernel_family(Eigen::Index m, double bandwidth, double lambda,
                                        LabelRule rule, std::uint64_t seed) {
    if (m < 2) throw DomainError("kernel grid needs at least 2 points");
    if (!(bandwidth > 0.0) || !(lambda > 0.0)) {
        throw DomainError("kernel family needs positive bandwidth and lambda");
    }
    VectorXd grid(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        grid(i) = static_cast<double>(i) / static_cast<double>(m - 1);
    }
    MatrixXd gram(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            const double gap = grid(i) - grid(j);
            gram(i, j) = std::exp(-gap * gap / (2.0 * bandwidth * bandwidth));
        }
    }
    VectorXd labels(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        labels(i) = rule == LabelRule::zero ? 0.0 : std::sin(6.283185307179586477 * grid(i));
    }
    if (rule == LabelRule::sine_noise) {
        Rng gen(seed);
        VectorXd noise(m);
        for (Eigen::Index i = 0; i < m; ++i) noise(i) = 0.1 * gaussian(gen);
        noise.array() -= noise.mean();
        labels += noise;
    }
    return KernelFamily(std::move(grid), bandwidth, std::move(gram), lambda, std::move(labels));
}

/// Runtime-selected family for the experiment harness; the algorithm code is
/// templated on the concrete type.
using GradientFamily = std::variant<QuadraticFamily, KernelFamily>;

} // namespace ssmgd
