#pragma once

// Ridge-penalized logistic regression by Newton/IRLS with step halving.
// Shared by the momentum model and the propensity model.

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "mxg/common.hpp"

namespace mxg {

struct LogisticOptions {
    double l2 = 1e-6;         ///< ridge on slopes only; the intercept is never penalized
    double grad_tol = 1e-8;   ///< stop when max |gradient| falls below this
    int max_iterations = 100;
    /// Under l2 == 0, coefficients beyond this magnitude are taken as evidence
    /// of complete separation.
    double divergence_bound = 50.0;
};

struct LogisticFit {
    double intercept = 0.0;
    Eigen::VectorXd coefficients;
    int iterations = 0;
    bool converged = false;
    double log_loss = 0.0;  ///< mean negative log-likelihood (unpenalized)
    double gradient_norm = 0.0;
};

namespace detail {

inline double penalized_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& beta, double l2, double* mean_nll) {
    const Eigen::Index n = X.rows();
    const Eigen::VectorXd eta = X * beta.tail(beta.size() - 1) + Eigen::VectorXd::Constant(n, beta(0));
    double nll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        // -[y log s(eta) + (1-y) log(1 - s(eta))] = softplus(eta) - y*eta
        nll += softplus(eta(i)) - y(i) * eta(i);
    }
    if (mean_nll) {
        *mean_nll = nll / static_cast<double>(n);
    }
    return nll + 0.5 * l2 * beta.tail(beta.size() - 1).squaredNorm();
}

}  // namespace detail

/// Fits P(y=1|x) = sigmoid(b0 + x.b). `X` excludes the intercept column.
/// Throws DataError when y has a single class, and when l2 == 0 and the data
/// are separable (the MLE does not exist).
inline LogisticFit fit_logistic_irls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LogisticOptions& opt = {}) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (y.size() != n) {
        throw ConfigError("fit_logistic_irls: label count does not match row count");
    }
    if (opt.l2 < 0.0) {
        throw ConfigError("fit_logistic_irls: l2 must be >= 0");
    }
    const double pos = y.sum();
    if (n == 0 || pos <= 0.0 || pos >= static_cast<double>(n)) {
        throw DataError("logistic fit needs at least one positive and one negative label");
    }

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p + 1);
    const double rate = pos / static_cast<double>(n);
    beta(0) = std::log(rate / (1.0 - rate));

    LogisticFit fit;
    double mean_nll = 0.0;
    double obj = detail::penalized_objective(X, y, beta, opt.l2, &mean_nll);
    Eigen::VectorXd grad(p + 1);
    Eigen::MatrixXd hess(p + 1, p + 1);
    Eigen::VectorXd w(n);
    Eigen::VectorXd r(n);

    int it = 0;
    for (;; ++it) {
        const Eigen::VectorXd eta = X * beta.tail(p) + Eigen::VectorXd::Constant(n, beta(0));
        for (Eigen::Index i = 0; i < n; ++i) {
            const double mu = sigmoid(eta(i));
            r(i) = mu - y(i);
            w(i) = mu * (1.0 - mu);
        }
        grad(0) = r.sum();
        grad.tail(p) = X.transpose() * r + opt.l2 * beta.tail(p);
        fit.gradient_norm = grad.cwiseAbs().maxCoeff();
        if (fit.gradient_norm < opt.grad_tol) {
            fit.converged = true;
            break;
        }
        if (it >= opt.max_iterations) {
            break;
        }
        if (opt.l2 == 0.0 && beta.tail(p).size() > 0 && beta.tail(p).cwiseAbs().maxCoeff() > opt.divergence_bound) {
            throw DataError("logistic fit does not converge: the classes look separable; use l2 > 0");
        }
        hess(0, 0) = w.sum();
        const Eigen::MatrixXd Xw = X.array().colwise() * w.array();
        hess.block(0, 1, 1, p) = Xw.colwise().sum();
        hess.block(1, 0, p, 1) = hess.block(0, 1, 1, p).transpose();
        hess.block(1, 1, p, p) = X.transpose() * Xw;
        hess.block(1, 1, p, p).diagonal().array() += opt.l2;
        // Tiny jitter keeps the solve defined for constant columns when l2 == 0.
        hess.diagonal().array() += 1e-12;
        const Eigen::VectorXd step = hess.ldlt().solve(grad);

        double t = 1.0;
        Eigen::VectorXd candidate;
        double cand_obj = 0.0;
        double cand_nll = 0.0;
        bool accepted = false;
        for (int halvings = 0; halvings < 40; ++halvings) {
            candidate = beta - t * step;
            cand_obj = detail::penalized_objective(X, y, candidate, opt.l2, &cand_nll);
            if (std::isfinite(cand_obj) && cand_obj <= obj + 1e-12 * std::abs(obj)) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            break;
        }
        beta = candidate;
        obj = cand_obj;
        mean_nll = cand_nll;
    }
    if (opt.l2 == 0.0 && fit.converged && r.cwiseAbs().maxCoeff() < 1e-6) {
        // Every row fitted to its label: the likelihood has no finite maximum.
        throw DataError("logistic fit does not converge: the classes are separable; use l2 > 0");
    }
    if (!fit.converged && opt.l2 == 0.0) {
        throw DataError("logistic fit did not converge in " + std::to_string(opt.max_iterations) + " iterations with l2 = 0; the classes may be separable, use l2 > 0");
    }
    fit.intercept = beta(0);
    fit.coefficients = beta.tail(p);
    fit.iterations = it;
    fit.log_loss = mean_nll;
    return fit;
}

}  // namespace mxg
