#include "seatvc/mixed_model.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/QR>

namespace seatvc::mixed {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Unpivoted Cholesky that reports the first non-positive pivot, used only to
/// diagnose which block made the augmented system singular.
Eigen::Index find_failing_pivot(const Eigen::MatrixXd& c) {
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(c.rows(), c.cols());
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
        double d = c(j, j) - l.row(j).head(j).squaredNorm();
        if (!(d > 0.0) || !std::isfinite(d)) return j;
        l(j, j) = std::sqrt(d);
        for (Eigen::Index i = j + 1; i < c.rows(); ++i)
            l(i, j) = (c(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
    return -1;
}

std::string block_for_column(Eigen::Index col, Eigen::Index p, const std::vector<Eigen::Index>& block_sizes) {
    if (col < p) return "fixed block";
    Eigen::Index offset = p;
    for (std::size_t b = 0; b < block_sizes.size(); ++b) {
        offset += block_sizes[b];
        if (col < offset) return "random block " + std::to_string(b);
    }
    return "unknown block";
}

/// Precomputed cross-products for repeated REML criterion evaluations.
/// C(lambda) = G + diag(0_p, lambda_1 I, ..., lambda_B I) where G = A'A for
/// the stacked design A = [X Z_1 ... Z_B]. Rows are accumulated in a
/// canonical sorted order so that permuting the caller's observation order
/// leaves every downstream estimate bit-identical.
class RemlCore {
  public:
    explicit RemlCore(const PenalizedDesign& design) {
        n_ = design.rows();
        p_ = design.fixed_cols();
        for (const auto& z : design.random_blocks) block_sizes_.push_back(z.cols());
        m_ = p_ + design.random_cols();

        Eigen::MatrixXd a(n_, m_);
        if (p_ > 0) a.leftCols(p_) = design.fixed;
        Eigen::Index offset = p_;
        for (const auto& z : design.random_blocks) {
            a.middleCols(offset, z.cols()) = z;
            offset += z.cols();
        }

        std::vector<Eigen::Index> order(static_cast<std::size_t>(n_));
        for (Eigen::Index i = 0; i < n_; ++i) order[static_cast<std::size_t>(i)] = i;
        const Eigen::VectorXd& y = design.response;
        std::sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
            if (y[i] != y[j]) return y[i] < y[j];
            for (Eigen::Index c = 0; c < a.cols(); ++c)
                if (a(i, c) != a(j, c)) return a(i, c) < a(j, c);
            return false;
        });

        Eigen::MatrixXd a_sorted(n_, m_);
        Eigen::VectorXd y_sorted(n_);
        for (Eigen::Index i = 0; i < n_; ++i) {
            a_sorted.row(i) = a.row(order[static_cast<std::size_t>(i)]);
            y_sorted[i] = y[order[static_cast<std::size_t>(i)]];
        }
        gram_.noalias() = a_sorted.transpose() * a_sorted;
        rhs_.noalias() = a_sorted.transpose() * y_sorted;
        yty_ = y_sorted.squaredNorm();
        // Cancellation in y'y - s'rhs bottoms out near 1e-15 relative, so a
        // 1e-13 relative floor marks residuals that are numerically zero.
        sigma2_floor_ = 1e-13 * std::max(1.0, yty_ / static_cast<double>(n_));
    }

    Eigen::Index n() const { return n_; }
    Eigen::Index p() const { return p_; }
    Eigen::Index m() const { return m_; }
    std::size_t block_count() const { return block_sizes_.size(); }
    const std::vector<Eigen::Index>& block_sizes() const { return block_sizes_; }
    const Eigen::VectorXd& rhs() const { return rhs_; }

    Eigen::MatrixXd augmented(const std::vector<double>& lambdas) const {
        Eigen::MatrixXd c = gram_;
        Eigen::Index offset = p_;
        for (std::size_t b = 0; b < block_sizes_.size(); ++b) {
            c.diagonal().segment(offset, block_sizes_[b]).array() += lambdas[b];
            offset += block_sizes_[b];
        }
        return c;
    }

    struct Evaluation {
        double neg2_res_ll = kInf;
        bool valid = false;
        bool sigma2_floored = false;
        Eigen::VectorXd solution;     ///< [beta; u]
        double sigma2 = 0.0;
        Eigen::LLT<Eigen::MatrixXd> llt;
    };

    /// -2ResLL profiled over the residual variance:
    ///   (n-p)(1 + ln 2pi) + (n-p) ln sigma2_hat + ln|C| - sum_b H_b ln lambda_b
    /// with sigma2_hat = (y'y - s'rhs)/(n-p), s the augmented solution.
    Evaluation evaluate(const std::vector<double>& lambdas, bool need_solution) const {
        Evaluation ev;
        Eigen::MatrixXd c = augmented(lambdas);
        ev.llt.compute(c);
        if (ev.llt.info() != Eigen::Success) return ev;

        double logdet = 2.0 * ev.llt.matrixLLT().diagonal().array().log().sum();
        if (!std::isfinite(logdet)) return ev;

        ev.solution = ev.llt.solve(rhs_);
        double penalized_rss = yty_ - ev.solution.dot(rhs_);
        if (penalized_rss < 0.0) penalized_rss = 0.0;

        const double df = static_cast<double>(n_ - p_);
        double sigma2 = penalized_rss / df;
        if (sigma2 < sigma2_floor_) {
            sigma2 = sigma2_floor_;
            ev.sigma2_floored = true;
        }

        double log_lambda_sum = 0.0;
        for (std::size_t b = 0; b < block_sizes_.size(); ++b)
            log_lambda_sum += static_cast<double>(block_sizes_[b]) * std::log(lambdas[b]);

        ev.neg2_res_ll = df * (1.0 + std::log(2.0 * std::numbers::pi)) + df * std::log(sigma2) +
                         logdet - log_lambda_sum;
        ev.sigma2 = sigma2;
        ev.valid = std::isfinite(ev.neg2_res_ll);
        if (!need_solution) ev.solution.resize(0);
        return ev;
    }

    double objective(const std::vector<double>& lambdas) const {
        Evaluation ev = evaluate(lambdas, false);
        return ev.valid ? ev.neg2_res_ll : kInf;
    }

  private:
    Eigen::Index n_ = 0, p_ = 0, m_ = 0;
    std::vector<Eigen::Index> block_sizes_;
    Eigen::MatrixXd gram_;
    Eigen::VectorXd rhs_;
    double yty_ = 0.0;
    double sigma2_floor_ = 0.0;
};

std::vector<double> to_lambdas(const Eigen::VectorXd& theta) {
    std::vector<double> lambdas(static_cast<std::size_t>(theta.size()));
    for (Eigen::Index i = 0; i < theta.size(); ++i) lambdas[static_cast<std::size_t>(i)] = std::exp(theta[i]);
    return lambdas;
}

/// Golden-section minimization of f along coordinate `i` within [lo, hi].
double golden_section_coordinate(const std::function<double(const Eigen::VectorXd&)>& f,
                                 Eigen::VectorXd& x, Eigen::Index i, double lo, double hi) {
    constexpr double invphi = 0.6180339887498949;
    double a = lo, b = hi;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    auto eval_at = [&](double v) {
        Eigen::VectorXd xt = x;
        xt[i] = v;
        return f(xt);
    };
    double fc = eval_at(c), fd = eval_at(d);
    for (int it = 0; it < 60 && (b - a) > 1e-10; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = eval_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = eval_at(d);
        }
    }
    double best = 0.5 * (a + b);
    double fbest = eval_at(best);
    x[i] = best;
    return fbest;
}

struct OptimizeResult {
    Eigen::VectorXd theta;
    double objective = kInf;
    bool converged = false;
    int iterations = 0;
    double gradient_norm = 0.0;
    std::vector<double> history;
};

/// Box-constrained BFGS with backtracking; golden-section coordinate sweeps
/// whenever a descent step cannot be found.
OptimizeResult minimize_box_bfgs(const std::function<double(const Eigen::VectorXd&)>& f,
                                 Eigen::VectorXd theta, double lo, double hi, double rel_tol,
                                 int max_iterations) {
    const Eigen::Index dim = theta.size();
    auto project = [&](Eigen::VectorXd v) {
        return v.cwiseMax(lo).cwiseMin(hi);
    };
    auto gradient = [&](const Eigen::VectorXd& x, double fx) {
        Eigen::VectorXd g(dim);
        const double h = 1e-5;
        for (Eigen::Index i = 0; i < dim; ++i) {
            Eigen::VectorXd xp = x, xm = x;
            xp[i] = std::min(x[i] + h, hi);
            xm[i] = std::max(x[i] - h, lo);
            double fp = (xp[i] == x[i]) ? fx : f(xp);
            double fm = (xm[i] == x[i]) ? fx : f(xm);
            double width = xp[i] - xm[i];
            g[i] = width > 0.0 ? (fp - fm) / width : 0.0;
        }
        return g;
    };

    OptimizeResult res;
    theta = project(std::move(theta));
    double fx = f(theta);
    if (!std::isfinite(fx)) {
        // Start from the heavy-penalty corner, which is always well-posed.
        theta.setConstant(hi);
        fx = f(theta);
    }
    res.history.push_back(fx);

    Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(dim, dim);
    Eigen::VectorXd g = gradient(theta, fx);

    for (int iter = 0; iter < max_iterations; ++iter) {
        res.iterations = iter + 1;
        Eigen::VectorXd direction = -hinv * g;
        if (direction.dot(g) >= 0.0) {
            hinv.setIdentity();
            direction = -g;
        }

        double step = 1.0;
        double f_new = kInf;
        Eigen::VectorXd theta_new;
        bool accepted = false;
        const double slope = direction.dot(g);
        for (int bt = 0; bt < 50; ++bt) {
            theta_new = project(theta + step * direction);
            f_new = f(theta_new);
            if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
            if (step < 1e-14) break;
        }

        if (accepted) {
            // Expand while the objective keeps strictly improving: on nearly
            // linear stretches the curvature update is skipped and the unit
            // step would otherwise crawl for thousands of iterations.
            for (int ex = 0; ex < 60; ++ex) {
                Eigen::VectorXd theta_try = project(theta + (2.0 * step) * direction);
                if ((theta_try.array() == theta_new.array()).all()) break;
                const double f_try = f(theta_try);
                if (!(std::isfinite(f_try) && f_try < f_new)) break;
                step *= 2.0;
                theta_new = std::move(theta_try);
                f_new = f_try;
            }
        }

        if (!accepted) {
            // Quasi-Newton step failed; sweep each coordinate with golden section.
            theta_new = theta;
            f_new = fx;
            for (Eigen::Index i = 0; i < dim; ++i) f_new = golden_section_coordinate(f, theta_new, i, lo, hi);
            hinv.setIdentity();
            if (!(f_new < fx)) {
                res.converged = true;
                break;
            }
        }

        assert(f_new <= fx + 1e-12 * (std::abs(fx) + 1.0));
        double change = fx - f_new;
        Eigen::VectorXd g_new = gradient(theta_new, f_new);
        Eigen::VectorXd s = theta_new - theta;
        Eigen::VectorXd yv = g_new - g;
        double sy = s.dot(yv);
        if (sy > 1e-12 * s.norm() * yv.norm()) {
            Eigen::MatrixXd syt = s * yv.transpose();
            Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(dim, dim);
            hinv = (eye - syt / sy) * hinv * (eye - syt.transpose() / sy) + (s * s.transpose()) / sy;
        }

        theta = theta_new;
        fx = f_new;
        g = g_new;
        res.history.push_back(fx);

        // Projected gradient: zero out components pushing against an active bound.
        Eigen::VectorXd pg = g;
        for (Eigen::Index i = 0; i < dim; ++i) {
            if ((theta[i] <= lo + 1e-12 && g[i] > 0.0) || (theta[i] >= hi - 1e-12 && g[i] < 0.0)) pg[i] = 0.0;
        }
        res.gradient_norm = pg.norm();

        if (change <= rel_tol * (std::abs(fx) + 1.0)) {
            res.converged = true;
            break;
        }
    }
    res.theta = theta;
    res.objective = fx;
    if (res.gradient_norm == 0.0 && dim > 0) {
        Eigen::VectorXd pg = g;
        for (Eigen::Index i = 0; i < dim; ++i)
            if ((theta[i] <= lo + 1e-12 && g[i] > 0.0) || (theta[i] >= hi - 1e-12 && g[i] < 0.0)) pg[i] = 0.0;
        res.gradient_norm = pg.norm();
    }
    return res;
}

void split_solution(const Eigen::VectorXd& s, Eigen::Index p, const std::vector<Eigen::Index>& block_sizes,
                    Eigen::VectorXd& fixed, std::vector<Eigen::VectorXd>& random) {
    fixed = s.head(p);
    random.clear();
    Eigen::Index offset = p;
    for (Eigen::Index bs : block_sizes) {
        random.push_back(s.segment(offset, bs));
        offset += bs;
    }
}

FittedMixedModel assemble_model(const PenalizedDesign& design, const RemlCore& core,
                                const std::vector<double>& lambdas, const OptimizeResult& opt,
                                double theta_hi) {
    RemlCore::Evaluation ev = core.evaluate(lambdas, true);
    if (!ev.valid) throw NumericalError("augmented system is numerically singular at the solution");

    FittedMixedModel model;
    split_solution(ev.solution, core.p(), core.block_sizes(), model.fixed_coefficients,
                   model.random_coefficients);
    model.lambdas = lambdas;
    model.residual_variance = ev.sigma2;
    model.near_zero_residual = ev.sigma2_floored;
    for (std::size_t b = 0; b < lambdas.size(); ++b) {
        model.block_variances.push_back(ev.sigma2 / lambdas[b]);
        // A block variance is degenerate when lambda sits at its upper bound
        // or when the residual variance itself is at the numerical floor.
        // The optimizer converges on the criterion, not the parameter, so it
        // may stop a small ln-distance inside the box; within 1e-3 of the
        // ceiling the block is indistinguishable from pinned.
        model.boundary_flags.push_back(std::log(lambdas[b]) >= theta_hi - 1e-3 || ev.sigma2_floored);
    }

    const int p_eff = static_cast<int>(core.p()) + static_cast<int>(core.block_count()) + 1;
    model.stats = fit_metrics(ev.neg2_res_ll, p_eff, core.n());
    model.converged = opt.converged;
    model.iterations = opt.iterations;
    model.final_gradient_norm = opt.gradient_norm;
    model.objective_history = opt.history;

    Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(core.m(), core.m());
    model.coefficient_covariance = ev.sigma2 * ev.llt.solve(identity);

    // Fitted values from the original matrices (the core keeps only cross-products).
    Eigen::VectorXd fitted = Eigen::VectorXd::Zero(design.rows());
    if (core.p() > 0) fitted.noalias() += design.fixed * model.fixed_coefficients;
    for (std::size_t b = 0; b < design.random_blocks.size(); ++b)
        fitted.noalias() += design.random_blocks[b] * model.random_coefficients[b];
    model.fitted = fitted;
    model.residuals = design.response - fitted;
    return model;
}

}  // namespace

Eigen::Index PenalizedDesign::random_cols() const {
    Eigen::Index q = 0;
    for (const auto& z : random_blocks) q += z.cols();
    return q;
}

void PenalizedDesign::validate() const {
    const Eigen::Index n = rows();
    if (n == 0) throw InvalidInput("penalized design has no rows");
    if (fixed_cols() + random_cols() == 0) throw InvalidInput("penalized design has no columns");
    if (response.size() != n) throw InvalidInput("response length does not match design rows");
    if (!response.allFinite()) throw InvalidInput("response contains non-finite values");
    if (fixed_cols() > 0 && !fixed.allFinite())
        throw InvalidInput("fixed block contains non-finite values");
    for (std::size_t b = 0; b < random_blocks.size(); ++b) {
        if (random_blocks[b].rows() != n)
            throw InvalidInput("random block " + std::to_string(b) + " row count mismatch");
        if (random_blocks[b].cols() == 0)
            throw InvalidInput("random block " + std::to_string(b) + " has no columns");
        if (!random_blocks[b].allFinite())
            throw InvalidInput("random block " + std::to_string(b) + " contains non-finite values");
    }
    if (fixed_cols() > 0) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(fixed);
        if (qr.rank() < fixed_cols())
            throw InvalidInput("fixed block is rank-deficient (rank " + std::to_string(qr.rank()) +
                               " of " + std::to_string(fixed_cols()) + " columns)");
    }
}

FitStatistics fit_metrics(double neg2_res_log_likelihood, int effective_param_count, Eigen::Index n) {
    FitStatistics s;
    s.neg2_res_log_likelihood = neg2_res_log_likelihood;
    s.effective_param_count = effective_param_count;
    s.aic = neg2_res_log_likelihood + 2.0 * effective_param_count;
    s.bic = neg2_res_log_likelihood + effective_param_count * std::log(static_cast<double>(n));
    return s;
}

PenalizedSolution fit_penalized_fixed_lambda(const PenalizedDesign& design,
                                             const std::vector<double>& lambdas) {
    design.validate();
    if (lambdas.size() != design.random_blocks.size())
        throw InvalidInput("expected one lambda per random block");
    for (std::size_t b = 0; b < lambdas.size(); ++b)
        if (!std::isfinite(lambdas[b]) || lambdas[b] <= 0.0)
            throw InvalidInput("lambda for block " + std::to_string(b) + " must be finite and positive");

    RemlCore core(design);
    Eigen::MatrixXd c = core.augmented(lambdas);
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() != Eigen::Success) {
        Eigen::Index pivot = find_failing_pivot(c);
        throw NumericalError("singular augmented system at column " + std::to_string(pivot) + " (" +
                             block_for_column(pivot, core.p(), core.block_sizes()) + ")");
    }

    Eigen::VectorXd s = llt.solve(core.rhs());

    PenalizedSolution sol;
    split_solution(s, core.p(), core.block_sizes(), sol.fixed_coefficients, sol.random_coefficients);
    sol.fitted = Eigen::VectorXd::Zero(design.rows());
    if (core.p() > 0) sol.fitted.noalias() += design.fixed * sol.fixed_coefficients;
    for (std::size_t b = 0; b < design.random_blocks.size(); ++b)
        sol.fitted.noalias() += design.random_blocks[b] * sol.random_coefficients[b];
    sol.residuals = design.response - sol.fitted;
    return sol;
}

double reml_neg2_log_likelihood(const PenalizedDesign& design, const std::vector<double>& lambdas) {
    if (lambdas.size() != design.random_blocks.size())
        throw InvalidInput("expected one lambda per random block");
    RemlCore core(design);
    return core.objective(lambdas);
}

FittedMixedModel fit_reml(const PenalizedDesign& design, const RemlOptions& options) {
    design.validate();
    RemlCore core(design);
    const auto block_count = static_cast<Eigen::Index>(core.block_count());
    if (core.n() <= core.p() + block_count)
        throw InvalidInput("need more rows than fixed columns plus random blocks for REML");

    const double lo = options.log10_lambda_min * std::numbers::ln10;
    const double hi = options.log10_lambda_max * std::numbers::ln10;

    auto objective = [&core](const Eigen::VectorXd& theta) { return core.objective(to_lambdas(theta)); };

    OptimizeResult opt;
    if (block_count == 0) {
        opt.theta.resize(0);
        opt.objective = core.objective({});
        opt.converged = true;
        opt.history.push_back(opt.objective);
    } else {
        Eigen::VectorXd theta0 = Eigen::VectorXd::Constant(block_count, options.initial_log10_lambda * std::numbers::ln10);
        opt = minimize_box_bfgs(objective, theta0, lo, hi, options.rel_tolerance, options.max_iterations);
        if (!opt.converged)
            throw NumericalError("REML did not converge after " + std::to_string(opt.iterations) +
                                 " iterations (final gradient norm " + std::to_string(opt.gradient_norm) + ")");
    }

    return assemble_model(design, core, to_lambdas(opt.theta), opt, hi);
}

FittedMixedModel fit_at_fixed_lambdas(const PenalizedDesign& design,
                                      const std::vector<double>& lambdas) {
    design.validate();
    if (lambdas.size() != design.random_blocks.size())
        throw InvalidInput("expected one lambda per random block");
    for (std::size_t b = 0; b < lambdas.size(); ++b)
        if (!std::isfinite(lambdas[b]) || lambdas[b] <= 0.0)
            throw InvalidInput("lambda for block " + std::to_string(b) + " must be finite and positive");

    RemlCore core(design);
    if (core.n() <= core.p())
        throw InvalidInput("need more rows than fixed columns");

    OptimizeResult opt;
    opt.theta.resize(static_cast<Eigen::Index>(lambdas.size()));
    for (std::size_t b = 0; b < lambdas.size(); ++b)
        opt.theta[static_cast<Eigen::Index>(b)] = std::log(lambdas[b]);
    opt.converged = true;
    opt.iterations = 0;
    return assemble_model(design, core, lambdas, opt, 12.0 * std::numbers::ln10);
}

}  // namespace seatvc::mixed
