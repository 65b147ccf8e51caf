#include "traco/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace traco {

void HierarchyConfig::validate() const {
    if (topics_per_level.size() < 2) {
        throw ConfigError("hierarchy: at least 2 levels required");
    }
    for (std::size_t k : topics_per_level) {
        if (k < 1) throw ConfigError("hierarchy: every level needs at least 1 topic");
    }
    if (!(tau > 0.0)) throw ConfigError("hierarchy: tau must be > 0");
    if (n_top < 1) throw ConfigError("hierarchy: n_top must be >= 1");
    if (lambda_b < 0.0) throw ConfigError("hierarchy: lambda_b must be >= 0");
    if (embedding_dim < 1 || encoder_hidden < 1) {
        throw ConfigError("hierarchy: embedding_dim and encoder_hidden must be >= 1");
    }
    if (!(init_std > 0.0)) throw ConfigError("hierarchy: init_std must be > 0");
}

Var compute_beta(Var topic_embeddings, Var word_embeddings, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("compute_beta: tau must be > 0");
    Var sq = pairwise_sq_dist(word_embeddings, topic_embeddings);  // V x K
    return softmax_rows(scale(sq, -1.0 / tau));
}

Matrix compute_beta_values(const Matrix& topic_embeddings, const Matrix& word_embeddings,
                           double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("compute_beta: tau must be > 0");
    Matrix sq = pairwise_sq_dist(word_embeddings, topic_embeddings);
    Matrix beta(sq.rows(), sq.cols());
    std::vector<double> logits(sq.cols());
    for (std::size_t i = 0; i < sq.rows(); ++i) {
        for (std::size_t k = 0; k < sq.cols(); ++k) logits[k] = -sq(i, k) / tau;
        const std::vector<double> row = softmax_stable(logits);
        for (std::size_t k = 0; k < sq.cols(); ++k) beta(i, k) = row[k];
    }
    return beta;
}

GaussianPosterior encode(const EncoderParams& enc, Var x) {
    Var h1 = softplus(add_col(matmul(enc.w1, x), enc.b1));
    Var h2 = softplus(add_col(matmul(enc.w2, h1), enc.b2));
    GaussianPosterior q;
    q.mu = add_col(matmul(enc.w_mu, h2), enc.b_mu);
    q.logvar = add_col(matmul(enc.w_logvar, h2), enc.b_logvar);
    return q;
}

Var reparameterize(const GaussianPosterior& q, const Matrix& noise) {
    if (!q.mu.val().same_shape(noise)) {
        throw ShapeError("reparameterize: noise shape does not match posterior");
    }
    Var std_dev = exp(scale(q.logvar, 0.5));
    return add(q.mu, mul_const(std_dev, noise));
}

Var doc_topic_lowest(Var r) { return softmax_cols(r); }

std::vector<Var> propagate_theta(Var theta_lowest, const std::vector<Var>& dependency) {
    const std::size_t levels = dependency.size() + 1;
    std::vector<Var> theta(levels);
    theta[levels - 1] = theta_lowest;
    for (std::size_t l = levels - 1; l-- > 0;) {
        const Matrix& phi = dependency[l].val();
        if (phi.rows() != theta[l + 1].val().rows()) {
            throw ShapeError("propagate_theta: dependency shape does not match theta");
        }
        const double k_child = static_cast<double>(phi.rows());
        theta[l] = matmul(transpose(scale(dependency[l], k_child)), theta[l + 1]);
    }
    return theta;
}

Var unconstrained_dependency(Var child_embeddings, Var parent_embeddings) {
    Var dots = matmul(transpose(child_embeddings), parent_embeddings);
    return softmax_rows(dots);
}

Matrix unconstrained_dependency_values(const Matrix& child_embeddings,
                                       const Matrix& parent_embeddings) {
    Matrix dots = matmul(transpose(child_embeddings), parent_embeddings);
    Matrix out(dots.rows(), dots.cols());
    std::vector<double> row(dots.cols());
    for (std::size_t i = 0; i < dots.rows(); ++i) {
        for (std::size_t j = 0; j < dots.cols(); ++j) row[j] = dots(i, j);
        const std::vector<double> sm = softmax_stable(row);
        for (std::size_t j = 0; j < dots.cols(); ++j) out(i, j) = sm[j];
    }
    return out;
}

Matrix contextual_semantics(const std::vector<const Matrix*>& contextual_betas,
                            std::size_t n_top) {
    if (n_top < 1) throw std::invalid_argument("contextual_semantics: n_top must be >= 1");
    if (contextual_betas.empty()) {
        throw std::invalid_argument("contextual_semantics: no contextual levels");
    }
    const std::size_t v = contextual_betas.front()->rows();
    Matrix p(v, 1);
    std::vector<std::size_t> order(v);
    for (const Matrix* beta : contextual_betas) {
        if (beta->rows() != v) throw ShapeError("contextual_semantics: vocabulary mismatch");
        for (std::size_t k = 0; k < beta->cols(); ++k) {
            for (std::size_t i = 0; i < v; ++i) order[i] = i;
            const std::size_t keep = std::min(n_top, v);
            std::partial_sort(order.begin(), order.begin() + keep, order.end(),
                              [&](std::size_t a, std::size_t b) {
                                  const double xa = (*beta)(a, k), xb = (*beta)(b, k);
                                  if (xa != xb) return xa > xb;
                                  return a < b;
                              });
            for (std::size_t r = 0; r < keep; ++r) p(order[r], 0) += (*beta)(order[r], k);
        }
    }
    return p;
}

BiasClamp make_bias_clamp(const Matrix& p) {
    BiasClamp clamp;
    clamp.p = p;
    clamp.free_mask = Matrix(p.rows(), p.cols(), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p.values()[i] == 0.0) clamp.free_mask.values()[i] = 1.0;
    }
    return clamp;
}

Var apply_bias(Var bias_param, const BiasClamp& clamp) {
    if (!bias_param.val().same_shape(clamp.p)) {
        throw ShapeError("apply_bias: bias and p lengths differ");
    }
    return add_const(mul_const(bias_param, clamp.free_mask), clamp.p);
}

Var decode_level(Var beta, Var theta, Var bias_effective, double lambda_b) {
    if (lambda_b < 0.0) throw std::invalid_argument("decode_level: lambda_b must be >= 0");
    Var logits = matmul(beta, theta);
    if (lambda_b != 0.0) {
        logits = add_col(logits, scale(bias_effective, lambda_b));
    }
    return log_softmax_cols(logits);
}

Var kl_diag_gaussian(const GaussianPosterior& q, const Matrix& prior_mean,
                     const Matrix& prior_var) {
    const Matrix& mu = q.mu.val();
    if (prior_mean.cols() != 1 || prior_var.cols() != 1 || prior_mean.rows() != mu.rows() ||
        prior_var.rows() != mu.rows()) {
        throw ShapeError("kl_diag_gaussian: prior must be K x 1 vectors");
    }
    for (double v : prior_var.values()) {
        if (!(v > 0.0)) throw std::invalid_argument("kl_diag_gaussian: prior variance must be > 0");
    }
    const std::size_t k = mu.rows(), b = mu.cols();
    Matrix log_s0(k, b), inv_s0(k, b), mu0(k, b);
    for (std::size_t i = 0; i < k; ++i) {
        const double ls = std::log(prior_var(i, 0));
        const double is = 1.0 / prior_var(i, 0);
        for (std::size_t j = 0; j < b; ++j) {
            log_s0(i, j) = ls;
            inv_s0(i, j) = is;
            mu0(i, j) = prior_mean(i, 0);
        }
    }
    Tape& t = *q.mu.tape;
    Var diff = add_const(q.mu, [&] {
        Matrix neg = mu0;
        for (double& x : neg.values()) x = -x;
        return neg;
    }());
    Var quad = mul_const(add(exp(q.logvar), mul(diff, diff)), inv_s0);
    Var log_ratio = sub(t.constant(log_s0), q.logvar);
    return scale(sum_all(add(log_ratio, add_scalar(quad, -1.0))), 0.5);
}

Var tm_loss_sum(const Matrix& x, const std::vector<Var>& log_probs, Var kl) {
    if (log_probs.empty()) throw std::invalid_argument("tm_loss: no levels");
    Var recon = neg(sum_all(mul_const(log_probs[0], x)));
    for (std::size_t l = 1; l < log_probs.size(); ++l) {
        if (!log_probs[l].val().same_shape(x)) {
            throw ShapeError("tm_loss: log-prob shape does not match input");
        }
        recon = add(recon, neg(sum_all(mul_const(log_probs[l], x))));
    }
    return add(scale(recon, 1.0 / static_cast<double>(log_probs.size())), kl);
}

std::vector<std::size_t> top_words_of_topic(const Matrix& beta, std::size_t topic,
                                            std::size_t n) {
    std::vector<std::size_t> order(beta.rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const std::size_t keep = std::min(n, order.size());
    std::partial_sort(order.begin(), order.begin() + keep, order.end(),
                      [&](std::size_t a, std::size_t b) {
                          const double xa = beta(a, topic), xb = beta(b, topic);
                          if (xa != xb) return xa > xb;
                          return a < b;
                      });
    order.resize(keep);
    return order;
}

Matrix encode_mean_values(const TracoModel& model, const Matrix& x) {
    const ParamStore& p = model.params();
    auto affine = [](const Matrix& w, const Matrix& in, const Matrix& b) {
        Matrix out = matmul(w, in);
        for (std::size_t i = 0; i < out.rows(); ++i) {
            for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += b(i, 0);
        }
        return out;
    };
    auto softplus_inplace = [](Matrix& m) {
        for (double& v : m.values()) {
            v = v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
        }
    };
    Matrix h1 = affine(p.by_name("encoder.w1").value, x, p.by_name("encoder.b1").value);
    softplus_inplace(h1);
    Matrix h2 = affine(p.by_name("encoder.w2").value, h1, p.by_name("encoder.b2").value);
    softplus_inplace(h2);
    return affine(p.by_name("encoder.w_mu").value, h2, p.by_name("encoder.b_mu").value);
}

TracoModel::TracoModel(HierarchyConfig cfg, std::size_t vocab_size, bool learnable_s)
    : cfg_(std::move(cfg)), vocab_size_(vocab_size), learnable_s_(learnable_s) {
    cfg_.validate();
    if (vocab_size_ == 0) throw ConfigError("model: empty vocabulary");
    const std::size_t d = cfg_.embedding_dim;
    const std::size_t h = cfg_.encoder_hidden;
    const std::size_t k_lowest = cfg_.topics_per_level.back();
    params_.add("word_embeddings", Matrix(d, vocab_size_));
    for (std::size_t l = 0; l < cfg_.levels(); ++l) {
        params_.add(topic_param_name(l), Matrix(d, cfg_.topics_per_level[l]));
    }
    params_.add("encoder.w1", Matrix(h, vocab_size_));
    params_.add("encoder.b1", Matrix(h, 1));
    params_.add("encoder.w2", Matrix(h, h));
    params_.add("encoder.b2", Matrix(h, 1));
    params_.add("encoder.w_mu", Matrix(k_lowest, h));
    params_.add("encoder.b_mu", Matrix(k_lowest, 1));
    params_.add("encoder.w_logvar", Matrix(k_lowest, h));
    params_.add("encoder.b_logvar", Matrix(k_lowest, 1));
    for (std::size_t l = 0; l < cfg_.levels(); ++l) {
        params_.add(bias_param_name(l), Matrix(vocab_size_, 1));
    }
    if (learnable_s_) {
        for (std::size_t l = 0; l + 1 < cfg_.levels(); ++l) {
            params_.add(s_param_name(l), Matrix(cfg_.topics_per_level[l], 1));
        }
    }
}

void TracoModel::init_parameters(Rng& rng) {
    auto gaussian_fill = [&rng](Matrix& m, double stddev) {
        for (double& x : m.values()) x = rng.normal(0.0, stddev);
    };
    auto fan_in_fill = [&rng](Matrix& m, std::size_t fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (double& x : m.values()) x = rng.uniform(-bound, bound);
    };
    gaussian_fill(params_.by_name("word_embeddings").value, cfg_.init_std);
    for (std::size_t l = 0; l < cfg_.levels(); ++l) {
        gaussian_fill(params_.by_name(topic_param_name(l)).value, cfg_.init_std);
    }
    fan_in_fill(params_.by_name("encoder.w1").value, vocab_size_);
    fan_in_fill(params_.by_name("encoder.b1").value, vocab_size_);
    fan_in_fill(params_.by_name("encoder.w2").value, cfg_.encoder_hidden);
    fan_in_fill(params_.by_name("encoder.b2").value, cfg_.encoder_hidden);
    fan_in_fill(params_.by_name("encoder.w_mu").value, cfg_.encoder_hidden);
    fan_in_fill(params_.by_name("encoder.b_mu").value, cfg_.encoder_hidden);
    fan_in_fill(params_.by_name("encoder.w_logvar").value, cfg_.encoder_hidden);
    fan_in_fill(params_.by_name("encoder.b_logvar").value, cfg_.encoder_hidden);
    // Bias vectors start at zero; s logits start uniform.
}

std::string TracoModel::topic_param_name(std::size_t level) {
    return "topic_embeddings." + std::to_string(level);
}

std::string TracoModel::bias_param_name(std::size_t level) {
    return "bias." + std::to_string(level);
}

std::string TracoModel::s_param_name(std::size_t level) {
    return "s_logits." + std::to_string(level);
}

Var TracoModel::word_embeddings(Tape& tape) const {
    return tape.param("word_embeddings", params_.by_name("word_embeddings").value);
}

Var TracoModel::topic_embeddings(Tape& tape, std::size_t level) const {
    const std::string name = topic_param_name(level);
    return tape.param(name, params_.by_name(name).value);
}

Var TracoModel::bias_param(Tape& tape, std::size_t level) const {
    const std::string name = bias_param_name(level);
    return tape.param(name, params_.by_name(name).value);
}

EncoderParams TracoModel::encoder(Tape& tape) const {
    EncoderParams enc;
    enc.w1 = tape.param("encoder.w1", params_.by_name("encoder.w1").value);
    enc.b1 = tape.param("encoder.b1", params_.by_name("encoder.b1").value);
    enc.w2 = tape.param("encoder.w2", params_.by_name("encoder.w2").value);
    enc.b2 = tape.param("encoder.b2", params_.by_name("encoder.b2").value);
    enc.w_mu = tape.param("encoder.w_mu", params_.by_name("encoder.w_mu").value);
    enc.b_mu = tape.param("encoder.b_mu", params_.by_name("encoder.b_mu").value);
    enc.w_logvar = tape.param("encoder.w_logvar", params_.by_name("encoder.w_logvar").value);
    enc.b_logvar = tape.param("encoder.b_logvar", params_.by_name("encoder.b_logvar").value);
    return enc;
}

Var TracoModel::beta(Tape& tape, std::size_t level) const {
    return compute_beta(topic_embeddings(tape, level), word_embeddings(tape), cfg_.tau);
}

Var TracoModel::log_col_weights(Tape& tape, std::size_t level) const {
    const std::size_t k = cfg_.topics_per_level[level];
    if (!learnable_s_) {
        return tape.constant(Matrix(1, k, std::log(1.0 / static_cast<double>(k))));
    }
    Var logits = tape.param(s_param_name(level), params_.by_name(s_param_name(level)).value);
    return transpose(log_softmax_cols(logits));
}

Matrix TracoModel::beta_values(std::size_t level) const {
    return compute_beta_values(params_.by_name(topic_param_name(level)).value,
                               params_.by_name("word_embeddings").value, cfg_.tau);
}

Matrix TracoModel::col_weights(std::size_t level) const {
    const std::size_t k = cfg_.topics_per_level[level];
    if (!learnable_s_) return Matrix(k, 1, 1.0 / static_cast<double>(k));
    const Matrix& logits = params_.by_name(s_param_name(level)).value;
    const std::vector<double> s = softmax_stable(logits.values());
    Matrix out(k, 1);
    for (std::size_t i = 0; i < k; ++i) out(i, 0) = s[i];
    return out;
}

}  // namespace traco
