#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "traco/corpus.hpp"
#include "traco/model.hpp"
#include "traco/sinkhorn.hpp"

namespace traco {

struct TrainConfig {
    HierarchyConfig hierarchy;
    SinkhornConfig sinkhorn;
    double lambda_tpd = 20.0;
    double learning_rate = 0.002;
    int epochs = 200;
    int batch_size = 200;
    std::uint64_t seed = 42;
    bool disable_tpd = false;
    bool disable_cdd = false;
    bool clip_gradients = true;
    double clip_norm = 5.0;
    bool learnable_s = false;
    int bias_refresh_interval = 1;
    int kl_anneal_epochs = 0;  // 0 disables annealing

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

struct Checkpoint {
    TrainConfig config;
    std::size_t vocab_size = 0;
    std::uint64_t vocab_hash = 0;
    std::vector<std::pair<std::string, Matrix>> parameters;  // store order
    std::vector<Matrix> dependency;                          // phi per level pair
    std::vector<double> loss_history;                        // mean objective per epoch

    bool operator==(const Checkpoint&) const = default;

    const Matrix& parameter(const std::string& name) const;
    // Rebuilds a model with the checkpointed parameter values.
    TracoModel restore_model() const;
};

// Inputs the per-step objective treats as fixed: the minibatch, its noise
// draw, the epoch's dependency solves, and the current bias clamps.
struct ObjectiveInputs {
    Matrix x;      // V x B counts
    Matrix noise;  // K_L x B standard normal draws
    const std::vector<SinkhornResult>* plans = nullptr;  // L-1 epoch solves
    const std::vector<BiasClamp>* bias = nullptr;        // L clamps; null when CDD is off
    double kl_scale = 1.0;
};

// Builds lambda_TPD * mean-over-level-pairs TPD + mean-over-batch TM on the
// tape. In unrolled mode the epoch's plans are replayed from the current
// embeddings with the epoch's iteration counts; in detached mode their values
// enter as constants.
Var objective(Tape& tape, const TracoModel& model, const ObjectiveInputs& in,
              const TrainConfig& cfg);

// Value-domain dependency refresh for the current embeddings. With
// unconstrained = true (TPD ablated) the dependencies are prior-style row
// softmaxes of embedding dot products instead of transport plans.
std::vector<SinkhornResult> solve_dependencies(const TracoModel& model,
                                               const SinkhornConfig& cfg,
                                               bool unconstrained = false);

// Bias clamps from the current topic-word distributions (Eq. 6/7 context
// rule: boundary levels see one neighbor, interior levels see both).
std::vector<BiasClamp> refresh_bias_clamps(const TracoModel& model);

Checkpoint train(const BowCorpus& corpus, const TrainConfig& cfg, std::ostream* log = nullptr);

// Versioned container: JSON header + raw little-endian doubles. Writes are
// atomic (temp file + rename).
void save_checkpoint(const Checkpoint& cp, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg);

}  // namespace traco
