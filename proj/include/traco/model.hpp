#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "traco/adam.hpp"
#include "traco/matrix.hpp"
#include "traco/rng.hpp"
#include "traco/tape.hpp"

namespace traco {

struct HierarchyConfig {
    std::vector<std::size_t> topics_per_level;  // K per level, root first
    std::size_t embedding_dim = 128;
    std::size_t encoder_hidden = 256;
    double tau = 0.1;
    std::size_t n_top = 20;
    double lambda_b = 5.0;
    double init_std = 0.15;  // embedding initialization scale

    std::size_t levels() const { return topics_per_level.size(); }
    void validate() const;
    bool operator==(const HierarchyConfig&) const = default;
};

// --- tape-level building blocks ---

// Topic-word distribution: row i holds word i's weights over the level's
// topics (rows sum to 1). topic_embeddings is D x K, word_embeddings D x V.
Var compute_beta(Var topic_embeddings, Var word_embeddings, double tau);
Matrix compute_beta_values(const Matrix& topic_embeddings, const Matrix& word_embeddings,
                           double tau);

struct GaussianPosterior {
    Var mu;       // K_L x B
    Var logvar;   // K_L x B
};

struct EncoderParams {
    Var w1, b1, w2, b2, w_mu, b_mu, w_logvar, b_logvar;
};

GaussianPosterior encode(const EncoderParams& enc, Var x);

// r = mu + exp(logvar / 2) * noise, noise is a K_L x B constant.
Var reparameterize(const GaussianPosterior& q, const Matrix& noise);

Var doc_topic_lowest(Var r);  // column softmax

// theta[l] = (K_{l+1} * phi[l])^T theta[l+1], computed from the lowest level
// upward. Returns all levels, index L-1 being theta_lowest itself.
std::vector<Var> propagate_theta(Var theta_lowest, const std::vector<Var>& dependency);

// Prior-style unconstrained dependencies: row softmax over parents of the
// child/parent embedding dot products (used when TPD is ablated). Rows sum
// to 1, so propagation uses them without rescaling.
Var unconstrained_dependency(Var child_embeddings, Var parent_embeddings);
Matrix unconstrained_dependency_values(const Matrix& child_embeddings,
                                       const Matrix& parent_embeddings);

// Contextual topical semantics: per contextual topic, keep its top n_top beta
// entries (ties at the cutoff keep the lower word id) and sum the result.
// Value domain by contract; the result enters the graph as a constant.
Matrix contextual_semantics(const std::vector<const Matrix*>& contextual_betas,
                            std::size_t n_top);

struct BiasClamp {
    Matrix p;          // V x 1; clamped coordinate values
    Matrix free_mask;  // V x 1; 1 where p == 0
};

BiasClamp make_bias_clamp(const Matrix& p);

// Effective bias: clamped coordinates take p exactly (no gradient), free
// coordinates pass the trainable parameter through.
Var apply_bias(Var bias_param, const BiasClamp& clamp);

// Per-word log-probabilities: log softmax(beta theta + lambda_b * b), one
// column per document.
Var decode_level(Var beta, Var theta, Var bias_effective, double lambda_b);

// Closed-form KL between the diagonal-Gaussian posterior and prior, summed
// over dimensions and batch columns.
Var kl_diag_gaussian(const GaussianPosterior& q, const Matrix& prior_mean,
                     const Matrix& prior_var);

// Reconstruction + KL summed over the batch: callers divide by batch size.
// x is the V x B count matrix, log_probs one V x B matrix per level.
Var tm_loss_sum(const Matrix& x, const std::vector<Var>& log_probs, Var kl);

// Top-n word ids of one topic column, scores descending, ties to lower id.
std::vector<std::size_t> top_words_of_topic(const Matrix& beta, std::size_t topic,
                                            std::size_t n);

class TracoModel;

// Posterior mean for a count batch, computed without recording gradients
// (the deterministic evaluation path).
Matrix encode_mean_values(const TracoModel& model, const Matrix& x);

// --- parameter container ---

class TracoModel {
public:
    TracoModel(HierarchyConfig cfg, std::size_t vocab_size, bool learnable_s);

    void init_parameters(Rng& rng);

    const HierarchyConfig& config() const { return cfg_; }
    std::size_t vocab_size() const { return vocab_size_; }
    bool learnable_s() const { return learnable_s_; }

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    // Tape bindings; repeated calls on one tape reuse the same node.
    Var word_embeddings(Tape& tape) const;
    Var topic_embeddings(Tape& tape, std::size_t level) const;
    Var bias_param(Tape& tape, std::size_t level) const;
    EncoderParams encoder(Tape& tape) const;
    Var beta(Tape& tape, std::size_t level) const;
    // Log of the parent-side weight vector for the level pair (level,
    // level+1); a tape node when s is learnable, otherwise a constant.
    Var log_col_weights(Tape& tape, std::size_t level) const;

    // Value-domain views used by evaluation and the epoch-level solves.
    Matrix beta_values(std::size_t level) const;
    // Parent-side weights s for the pair (level, level+1).
    Matrix col_weights(std::size_t level) const;

    static std::string topic_param_name(std::size_t level);
    static std::string bias_param_name(std::size_t level);
    static std::string s_param_name(std::size_t level);

private:
    HierarchyConfig cfg_;
    std::size_t vocab_size_;
    bool learnable_s_;
    ParamStore params_;
};

}  // namespace traco
