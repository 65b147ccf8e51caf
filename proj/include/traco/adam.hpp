#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "traco/matrix.hpp"

namespace traco {

// A named trainable tensor with its accumulated gradient.
struct Param {
    std::string name;
    Matrix value;
    Matrix grad;
};

class ParamStore {
public:
    std::size_t add(std::string name, Matrix value);
    Param& at(std::size_t i) { return items_[i]; }
    const Param& at(std::size_t i) const { return items_[i]; }
    Param& by_name(const std::string& name);
    const Param& by_name(const std::string& name) const;
    bool has(const std::string& name) const { return index_.count(name) != 0; }
    std::size_t count() const { return items_.size(); }
    void zero_grads();

    auto begin() { return items_.begin(); }
    auto end() { return items_.end(); }
    auto begin() const { return items_.begin(); }
    auto end() const { return items_.end(); }

private:
    std::vector<Param> items_;
    std::unordered_map<std::string, std::size_t> index_;
};

// First/second moment estimates per parameter plus the shared step counter.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step = 0;
    std::vector<Matrix> m;
    std::vector<Matrix> v;
};

// One bias-corrected Adam update over every parameter in the store. Moment
// buffers are created lazily on the first call; the step counter advances by
// exactly one per call.
void adam_step(ParamStore& params, AdamState& state, double lr);

// Single-tensor form used by the store-level driver.
void adam_update(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v, long step,
                 const AdamState& cfg, double lr);

// Scales all gradients so their global L2 norm is at most max_norm.
// Returns the factor applied (1.0 when already within bounds).
double clip_global_norm(ParamStore& params, double max_norm);

}  // namespace traco
