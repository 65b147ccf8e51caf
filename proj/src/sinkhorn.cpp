#include "traco/sinkhorn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace traco {

Marginals Marginals::uniform(std::size_t child_count, std::size_t parent_count) {
    Marginals m;
    m.row = Matrix(child_count, 1, 1.0 / static_cast<double>(child_count));
    m.col = Matrix(parent_count, 1, 1.0 / static_cast<double>(parent_count));
    return m;
}

void Marginals::validate() const {
    if (row.cols() != 1 || col.cols() != 1 || row.rows() == 0 || col.rows() == 0) {
        throw ShapeError("Marginals: expected nonempty column vectors");
    }
    for (const Matrix* m : {&row, &col}) {
        double sum = 0.0;
        for (double x : m->values()) {
            if (!(x > 0.0)) {
                throw std::invalid_argument("Marginals: entries must be > 0");
            }
            sum += x;
        }
        if (std::abs(sum - 1.0) > 1e-12) {
            throw std::invalid_argument("Marginals: must sum to 1 within 1e-12");
        }
    }
}

Matrix transport_cost(const Matrix& child_embeddings, const Matrix& parent_embeddings) {
    return pairwise_sq_dist(child_embeddings, parent_embeddings);
}

namespace {

double row_lse(const double* log_kernel, const double* lb, std::size_t n) {
    double mx = log_kernel[0] + lb[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, log_kernel[j] + lb[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::exp(log_kernel[j] + lb[j] - mx);
    return mx + std::log(s);
}

}  // namespace

SinkhornResult sinkhorn(const Matrix& cost, const Marginals& marginals,
                        const SinkhornConfig& cfg) {
    marginals.validate();
    check_finite(cost, "sinkhorn cost");
    const std::size_t m = cost.rows();
    const std::size_t n = cost.cols();
    if (marginals.row.rows() != m || marginals.col.rows() != n) {
        throw ShapeError("sinkhorn: marginal lengths do not match cost shape");
    }
    if (!(cfg.epsilon > 0.0)) throw std::invalid_argument("sinkhorn: epsilon must be > 0");

    // Scaling iterations in the log domain; the fixed point is the same as
    // diag(a) exp(-C/eps) diag(b) but survives exp underflow at small eps.
    std::vector<double> lm(m * n);
    for (std::size_t i = 0; i < m * n; ++i) lm[i] = -cost.values()[i] / cfg.epsilon;
    std::vector<double> la(m, 0.0), lb(n, 0.0);
    std::vector<double> lmu(m), lnu(n);
    for (std::size_t i = 0; i < m; ++i) lmu[i] = std::log(marginals.row.values()[i]);
    for (std::size_t j = 0; j < n; ++j) lnu[j] = std::log(marginals.col.values()[j]);

    SinkhornResult res;
    std::vector<double> col_acc(n);
    std::vector<double> col_max(n);
    for (int it = 1; it <= cfg.max_iterations; ++it) {
        for (std::size_t i = 0; i < m; ++i) {
            la[i] = lmu[i] - row_lse(lm.data() + i * n, lb.data(), n);
        }
        std::fill(col_max.begin(), col_max.end(), -1e300);
        for (std::size_t i = 0; i < m; ++i) {
            const double* lmrow = lm.data() + i * n;
            for (std::size_t j = 0; j < n; ++j)
                col_max[j] = std::max(col_max[j], lmrow[j] + la[i]);
        }
        std::fill(col_acc.begin(), col_acc.end(), 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            const double* lmrow = lm.data() + i * n;
            for (std::size_t j = 0; j < n; ++j)
                col_acc[j] += std::exp(lmrow[j] + la[i] - col_max[j]);
        }
        for (std::size_t j = 0; j < n; ++j) lb[j] = lnu[j] - (col_max[j] + std::log(col_acc[j]));

        double row_err = 0.0;
        bool finite = true;
        for (std::size_t i = 0; i < m; ++i) {
            const double* lmrow = lm.data() + i * n;
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += std::exp(la[i] + lmrow[j] + lb[j]);
            if (!std::isfinite(s)) finite = false;
            row_err += std::abs(s - marginals.row.values()[i]);
        }
        if (!finite) {
            throw NumericError("sinkhorn: non-finite values at iteration " + std::to_string(it));
        }
        res.iterations = it;
        res.row_error = row_err;
        if (row_err < cfg.stop_tolerance) {
            res.converged = true;
            break;
        }
    }

    res.plan = Matrix(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            res.plan(i, j) = std::exp(la[i] + lm[i * n + j] + lb[j]);
        }
    }
    check_finite(res.plan, "sinkhorn plan");
    res.col_error = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += res.plan(i, j);
        res.col_error += std::abs(s - marginals.col.values()[j]);
    }
    return res;
}

Var sinkhorn_unrolled(Tape& tape, Var cost, const Marginals& marginals,
                      const SinkhornConfig& cfg, int fixed_iterations, SinkhornResult* info,
                      const Var* log_col_weights) {
    marginals.validate();
    check_finite(cost.val(), "sinkhorn cost");
    const std::size_t m = cost.val().rows();
    const std::size_t n = cost.val().cols();
    if (marginals.row.rows() != m || marginals.col.rows() != n) {
        throw ShapeError("sinkhorn: marginal lengths do not match cost shape");
    }
    if (!(cfg.epsilon > 0.0)) throw std::invalid_argument("sinkhorn: epsilon must be > 0");

    Matrix lmu(m, 1), lnu_row(1, n);
    for (std::size_t i = 0; i < m; ++i) lmu(i, 0) = std::log(marginals.row.values()[i]);
    for (std::size_t j = 0; j < n; ++j) lnu_row(0, j) = std::log(marginals.col.values()[j]);
    Var vlmu = tape.constant(lmu);
    Var vlnu = log_col_weights ? *log_col_weights : tape.constant(lnu_row);
    if (log_col_weights && (vlnu.val().rows() != 1 || vlnu.val().cols() != n)) {
        throw ShapeError("sinkhorn: log_col_weights must be 1 x K_parent");
    }

    Var lkernel = scale(cost, -1.0 / cfg.epsilon);
    Var la = tape.constant(Matrix(m, 1, 0.0));
    Var lb = tape.constant(Matrix(1, n, 0.0));

    const int cap = fixed_iterations > 0 ? fixed_iterations : cfg.max_iterations;
    int performed = 0;
    double row_err = 0.0;
    bool converged = false;
    for (int it = 1; it <= cap; ++it) {
        la = sub(vlmu, logsumexp_rows(add_row(lkernel, lb)));
        lb = sub(vlnu, logsumexp_cols(add_col(lkernel, la)));
        performed = it;

        // Diagnostics on current values only; no nodes are recorded here.
        const Matrix& lav = la.val();
        const Matrix& lbv = lb.val();
        const Matrix& lkv = lkernel.val();
        row_err = 0.0;
        bool finite = true;
        for (std::size_t i = 0; i < m; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                s += std::exp(lav(i, 0) + lkv(i, j) + lbv(0, j));
            if (!std::isfinite(s)) finite = false;
            row_err += std::abs(s - marginals.row.values()[i]);
        }
        if (!finite) {
            throw NumericError("sinkhorn: non-finite values at iteration " + std::to_string(it));
        }
        if (fixed_iterations <= 0 && row_err < cfg.stop_tolerance) {
            converged = true;
            break;
        }
    }
    if (fixed_iterations > 0) converged = row_err < cfg.stop_tolerance;

    Var plan = exp(add_col(add_row(lkernel, lb), la));
    if (info) {
        info->plan = plan.val();
        info->iterations = performed;
        info->row_error = row_err;
        info->converged = converged;
        info->col_error = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < m; ++i) s += plan.val()(i, j);
            info->col_error += std::abs(s - marginals.col.values()[j]);
        }
    }
    return plan;
}

double tpd_loss(const Matrix& cost, const Matrix& plan) {
    if (!cost.same_shape(plan)) throw ShapeError("tpd_loss: cost/plan shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < cost.size(); ++i) s += cost.values()[i] * plan.values()[i];
    return s;
}

Var tpd_loss(Var cost, Var plan) {
    if (!cost.val().same_shape(plan.val())) throw ShapeError("tpd_loss: cost/plan shape mismatch");
    return dot(cost, plan);
}

Var tpd_loss_detached(Var cost, const Matrix& plan) {
    if (!cost.val().same_shape(plan)) throw ShapeError("tpd_loss: cost/plan shape mismatch");
    return sum_all(mul_const(cost, plan));
}

std::vector<std::size_t> parent_of(const Matrix& plan) {
    std::vector<std::size_t> parents(plan.rows());
    for (std::size_t i = 0; i < plan.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < plan.cols(); ++j) {
            if (plan(i, j) > plan(i, best)) best = j;
        }
        parents[i] = best;
    }
    return parents;
}

double plan_entropy(const Matrix& plan) {
    double h = 0.0;
    for (double p : plan.values()) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

PlanCheck check_plan(const Matrix& plan, const Marginals& marginals) {
    if (plan.rows() != marginals.row.rows() || plan.cols() != marginals.col.rows()) {
        throw ShapeError("check_plan: plan shape does not match marginals");
    }
    PlanCheck out;
    for (std::size_t i = 0; i < plan.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < plan.cols(); ++j) s += plan(i, j);
        out.row_l1 += std::abs(s - marginals.row.values()[i]);
    }
    for (std::size_t j = 0; j < plan.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < plan.rows(); ++i) s += plan(i, j);
        out.col_l1 += std::abs(s - marginals.col.values()[j]);
    }
    for (double p : plan.values()) {
        if (!(p >= 0.0 && p <= 1.0)) out.entries_in_unit_range = false;
    }
    return out;
}

}  // namespace traco
