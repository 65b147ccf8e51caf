#include "traco/tape.hpp"

#include <cmath>
#include <utility>

namespace traco {

const Matrix& Var::val() const { return tape->value(id); }

Var Tape::emplace(Matrix value, bool requires_grad, std::function<void(Tape&)> backward_fn) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.backward_fn = std::move(backward_fn);
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<Id>(nodes_.size() - 1)};
}

Var Tape::leaf(const Matrix& value) { return emplace(value, true, nullptr); }

Var Tape::constant(const Matrix& value) { return emplace(value, false, nullptr); }

Var Tape::param(const std::string& name, const Matrix& value) {
    auto it = params_.find(name);
    if (it != params_.end()) return Var{this, it->second};
    Var v = leaf(value);
    params_.emplace(name, v.id);
    return v;
}

Matrix& Tape::grad_buffer(Id id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
    return n.grad;
}

Matrix Tape::gradient(Id id) const {
    const Node& n = nodes_[id];
    if (n.grad.empty()) return Matrix(n.value.rows(), n.value.cols());
    return n.grad;
}

void Tape::backward(const Var& root) {
    if (root.tape != this) throw std::invalid_argument("backward: var from another tape");
    const Node& r = nodes_[root.id];
    if (r.value.rows() != 1 || r.value.cols() != 1) {
        throw ShapeError("backward: root must be a 1x1 scalar");
    }
    grad_buffer(root.id)(0, 0) += 1.0;
    for (Id i = root.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.backward_fn || n.grad.empty()) continue;  // leaf, constant, or unreached
        n.backward_fn(*this);
    }
}

void Tape::clear() {
    nodes_.clear();
    params_.clear();
}

namespace {

Tape& same_tape(Var a, Var b) {
    if (a.tape != b.tape) throw std::invalid_argument("tape op: vars from different tapes");
    return *a.tape;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) throw ShapeError(std::string(op) + ": shape mismatch");
}

void axpy(Matrix& dst, const Matrix& src, double c) {
    double* d = dst.data();
    const double* s = src.data();
    for (std::size_t i = 0; i < dst.size(); ++i) d[i] += c * s[i];
}

double stable_softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

Var add(Var a, Var b) {
    Tape& t = same_tape(a, b);
    require_same_shape(a.val(), b.val(), "add");
    Matrix out = a.val();
    axpy(out, b.val(), 1.0);
    if (!t.requires_grad(a.id) && !t.requires_grad(b.id)) return t.constant(std::move(out));
    const Tape::Id oi = t.next_id(), ai = a.id, bi = b.id;
    return t.emplace(std::move(out), true, [oi, ai, bi](Tape& tp) {
        const Matrix& g = tp.grad_ref(oi);
        if (tp.requires_grad(ai)) axpy(tp.grad_buffer(ai), g, 1.0);
        if (tp.requires_grad(bi)) axpy(tp.grad_buffer(bi), g, 1.0);
    });
}

Var sub(Var a, Var b) {
    Tape& t = same_tape(a, b);
    require_same_shape(a.val(), b.val(), "sub");
    Matrix out = a.val();
    axpy(out, b.val(), -1.0);
    if (!t.requires_grad(a.id) && !t.requires_grad(b.id)) return t.constant(std::move(out));
    const Tape::Id oi = t.next_id(), ai = a.id, bi = b.id;
    return t.emplace(std::move(out), true, [oi, ai, bi](Tape& tp) {
        const Matrix& g = tp.grad_ref(oi);
        if (tp.requires_grad(ai)) axpy(tp.grad_buffer(ai), g, 1.0);
        if (tp.requires_grad(bi)) axpy(tp.grad_buffer(bi), g, -1.0);
    });
}

Var mul(Var a, Var b) {
    Tape& t = same_tape(a, b);
    require_same_shape(a.val(), b.val(), "mul");
    Matrix out = a.val();
    for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] *= b.val().values()[i];
    if (!t.requires_grad(a.id) && !t.requires_grad(b.id)) return t.constant(std::move(out));
    const Tape::Id oi = t.next_id(), ai = a.id, bi = b.id;
    return t.emplace(std::move(out), true, [oi, ai, bi](Tape& tp) {
        const Matrix& g = tp.grad_ref(oi);
        if (tp.requires_grad(ai)) {
            Matrix& da = tp.grad_buffer(ai);
            const Matrix& bv = tp.value(bi);
            for (std::size_t i = 0; i < da.size(); ++i)
                da.values()[i] += g.values()[i] * bv.values()[i];
        }
        if (tp.requires_grad(bi)) {
            Matrix& db = tp.grad_buffer(bi);
            const Matrix& av = tp.value(ai);
            for (std::size_t i = 0; i < db.size(); ++i)
                db.values()[i] += g.values()[i] * av.values()[i];
        }
    });
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, double c) {
    Tape& t = *a.tape;
    Matrix out = a.val();
    for (double& x : out.values()) x *= c;
    if (!t.requires_grad(a.id)) return t.constant(std::move(out));
    const Tape::Id oi = t.next_id(), ai = a.id;
    return t.emplace(std::move(out), true, [oi, ai, c](Tape& tp) {
        axpy(tp.grad_buffer(ai), tp.grad_ref(oi), c);
    });
}

Var add_scalar(Var a, double c) {
    Tape& t = *a.tape;
    Matrix out = a.val();
    for (double& x : out.values()) x += c;
    if (!t.requires_grad(a.id)) return t.constant(std::move(out));
    const Tape::Id oi = t.next_id(), ai = a.id;
    return t.emplace(std::move(out), true, [oi, ai](Tape& tp) {
        axpy(tp.grad_buffer(ai), tp.grad_ref(oi), 1.0);
    });
}

Var add_const(Var a, const Matrix& m) {
    Tape& t = *a.tape;
    require_same_shape(a.val(), m, "add_const");
    Matrix out = a.val();
    axpy(out, m, 1.0);
    if (!t.requires_grad(a.id)) return t.constant(std::move(out));
    const Tape::Id oi = t.next_id(), ai = a.id;
    return t.emplace(std::move(out), true, [oi, ai](Tape& tp) {
        axpy(tp.grad_buffer(ai), tp.grad_ref(oi), 1.0);
    });
}

Var mul_const(Var a, const Matrix& m) {
    Tape& t = *a.tape;
    require_same_shape(a.val(), m, "mul_const");
    Matrix out = a.val();
    for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] *= m.values()[i];
    if (!t.requires_grad(a.id)) return t.constant(std::move(out));
    const Tape::Id oi = t.next_id(), ai = a.id;
    // The multiplier is copied into the closure; it may outlive the caller's m.
    Matrix mc = m;
    return t.emplace(std::move(out), true, [oi, ai, mc = std::move(mc)](Tape& tp) {
        Matrix& da = tp.grad_buffer(ai);
        const Matrix& g = tp.grad_ref(oi);
        for (std::size_t i = 0; i < da.size(); ++i)
            da.values()[i] += g.values()[i] * mc.values()[i];
    });
}

Var matmul(Var a, Var b) {
    Tape& t = same_tape(a, b);
    Matrix out = matmul(a.val(), b.val());
    if (!t.requires_grad(a.id) && !t.requires_grad(b.id)) return t.constant(std::move(out));
    const Tape::Id oi = t.next_id(), ai = a.id, bi = b.id;
    return t.emplace(std::move(out), true, [oi, ai, bi](Tape& tp) {
        const Matrix& g = tp.grad_ref(oi);
        const Matrix& av = tp.value(ai);
        const Matrix& bv = tp.value(bi);
        if (tp.requires_grad(ai)) {
            // dA += G * B^T
            Matrix& da = tp.grad_buffer(ai);
            const std::size_t m = da.rows(), k = da.cols(), n = g.cols();
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t kk = 0; kk < k; ++kk) {
                    double s = 0.0;
                    const double* gp = g.data() + i * n;
                    const double* bp = bv.data() + kk * n;
                    for (std::size_t j = 0; j < n; ++j) s += gp[j] * bp[j];
                    da(i, kk) += s;
                }
            }
        }
        if (tp.requires_grad(bi)) {
            // dB += A^T * G
            Matrix& db = tp.grad_buffer(bi);
            const std::size_t m = av.rows(), k = db.rows(), n = db.cols();
            for (std::size_t i = 0; i < m; ++i) {
                const double* ap = av.data() + i * k;
                const double* gp = g.data() + i * n;
                for (std::size_t kk = 0; kk < k; ++kk) {
                    const double aik = ap[kk];
                    if (aik == 0.0) continue;
                    double* dbp = db.data() + kk * n;
                    for (std::size_t j = 0; j < n; ++j) dbp[j] += aik * gp[j];
                }
            }
        }
    });
}

Var transpose(Var a) {
    Tape& t = *a.tape;
    Matrix out = transpose(a.val());
    if (!t.requires_grad(a.id)) return t.constant(std::move(out));
    const Tape::Id oi = t.next_id(), ai = a.id;
    return t.emplace(std::move(out), true, [oi, ai](Tape& tp) {
        Matrix& da = tp.grad_buffer(ai);
        const Matrix& g = tp.grad_ref(oi);
        for (std::size_t i = 0; i < da.rows(); ++i)
            for (std::size_t j = 0; j < da.cols(); ++j) da(i, j) += g(j, i);
    });
}

Var exp(Var a) {
    Tape& t = *a.tape;
    Matrix out = a.val();
    for (double& x : out.values()) x = std::exp(x);
    if (!t.requires_grad(a.id)) return t.constant(std::move(out));
    const Tape::Id oi = t.next_id(), ai = a.id;
    return t.emplace(std::move(out), true, [oi, ai](Tape& tp) {
        Matrix& da = tp.grad_buffer(ai);
        const Matrix& g = tp.grad_ref(oi);
        const Matrix& ov = tp.value(oi);
        for (std::size_t i = 0; i < da.size(); ++i)
            da.values()[i] += g.values()[i] * ov.values()[i];
    });
}

Var log(Var a) {
    Tape& t = *a.tape;
    Matrix out = a.val();
    for (double& x : out.values()) x = std::log(x);
    if (!t.requires_grad(a.id)) return t.constant(std::move(out));
    const Tape::Id oi = t.next_id(), ai = a.id;
    return t.emplace(std::move(out), true, [oi, ai](Tape& tp) {
        Matrix& da = tp.grad_buffer(ai);
        const Matrix& g = tp.grad_ref(oi);
        const Matrix& av = tp.value(ai);
        for (std::size_t i = 0; i < da.size(); ++i)
            da.values()[i] += g.values()[i] / av.values()[i];
    });
}

Var softplus(Var a) {
    Tape& t = *a.tape;
    Matrix out = a.val();
    for (double& x : out.values()) x = stable_softplus(x);
    if (!t.requires_grad(a.id)) return t.constant(std::move(out));
    const Tape::Id oi = t.next_id(), ai = a.id;
    return t.emplace(std::move(out), true, [oi, ai](Tape& tp) {
        Matrix& da = tp.grad_buffer(ai);
        const Matrix& g = tp.grad_ref(oi);
        const Matrix& av = tp.value(ai);
        for (std::size_t i = 0; i < da.size(); ++i)
            da.values()[i] += g.values()[i] * sigmoid(av.values()[i]);
    });
}

Var add_col(Var a, Var v) {
    Tape& t = same_tape(a, v);
    const Matrix& av = a.val();
    const Matrix& vv = v.val();
    if (vv.cols() != 1 || vv.rows() != av.rows()) {
        throw ShapeError("add_col: vector must be rows x 1");
    }
    Matrix out = av;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        const double vi = vv(i, 0);
        for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += vi;
    }
    if (!t.requires_grad(a.id) && !t.requires_grad(v.id)) return t.constant(std::move(out));
    const Tape::Id oi = t.next_id(), ai = a.id, vi = v.id;
    return t.emplace(std::move(out), true, [oi, ai, vi](Tape& tp) {
        const Matrix& g = tp.grad_ref(oi);
        if (tp.requires_grad(ai)) axpy(tp.grad_buffer(ai), g, 1.0);
        if (tp.requires_grad(vi)) {
            Matrix& dv = tp.grad_buffer(vi);
            for (std::size_t i = 0; i < g.rows(); ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < g.cols(); ++j) s += g(i, j);
                dv(i, 0) += s;
            }
        }
    });
}

Var add_row(Var a, Var v) {
    Tape& t = same_tape(a, v);
    const Matrix& av = a.val();
    const Matrix& vv = v.val();
    if (vv.rows() != 1 || vv.cols() != av.cols()) {
        throw ShapeError("add_row: vector must be 1 x cols");
    }
    Matrix out = av;
    for (std::size_t i = 0; i < out.rows(); ++i) {
        for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += vv(0, j);
    }
    if (!t.requires_grad(a.id) && !t.requires_grad(v.id)) return t.constant(std::move(out));
    const Tape::Id oi = t.next_id(), ai = a.id, vi = v.id;
    return t.emplace(std::move(out), true, [oi, ai, vi](Tape& tp) {
        const Matrix& g = tp.grad_ref(oi);
        if (tp.requires_grad(ai)) axpy(tp.grad_buffer(ai), g, 1.0);
        if (tp.requires_grad(vi)) {
            Matrix& dv = tp.grad_buffer(vi);
            for (std::size_t j = 0; j < g.cols(); ++j) {
                double s = 0.0;
                for (std::size_t i = 0; i < g.rows(); ++i) s += g(i, j);
                dv(0, j) += s;
            }
        }
    });
}

Var logsumexp_rows(Var a) {
    Tape& t = *a.tape;
    const Matrix& av = a.val();
    if (av.cols() == 0) throw std::invalid_argument("logsumexp_rows: empty rows");
    Matrix out(av.rows(), 1);
    for (std::size_t i = 0; i < av.rows(); ++i) {
        out(i, 0) = logsumexp(std::span<const double>(av.data() + i * av.cols(), av.cols()));
    }
    if (!t.requires_grad(a.id)) return t.constant(std::move(out));
    const Tape::Id oi = t.next_id(), ai = a.id;
    return t.emplace(std::move(out), true, [oi, ai](Tape& tp) {
        Matrix& da = tp.grad_buffer(ai);
        const Matrix& g = tp.grad_ref(oi);
        const Matrix& av2 = tp.value(ai);
        const Matrix& ov = tp.value(oi);
        for (std::size_t i = 0; i < da.rows(); ++i) {
            const double gi = g(i, 0);
            if (gi == 0.0) continue;
            const double lse = ov(i, 0);
            for (std::size_t j = 0; j < da.cols(); ++j)
                da(i, j) += gi * std::exp(av2(i, j) - lse);
        }
    });
}

Var logsumexp_cols(Var a) {
    Tape& t = *a.tape;
    const Matrix& av = a.val();
    if (av.rows() == 0) throw std::invalid_argument("logsumexp_cols: empty cols");
    Matrix out(1, av.cols());
    for (std::size_t j = 0; j < av.cols(); ++j) {
        double mx = av(0, j);
        for (std::size_t i = 1; i < av.rows(); ++i) mx = std::max(mx, av(i, j));
        double s = 0.0;
        for (std::size_t i = 0; i < av.rows(); ++i) s += std::exp(av(i, j) - mx);
        out(0, j) = mx + std::log(s);
    }
    if (!t.requires_grad(a.id)) return t.constant(std::move(out));
    const Tape::Id oi = t.next_id(), ai = a.id;
    return t.emplace(std::move(out), true, [oi, ai](Tape& tp) {
        Matrix& da = tp.grad_buffer(ai);
        const Matrix& g = tp.grad_ref(oi);
        const Matrix& av2 = tp.value(ai);
        const Matrix& ov = tp.value(oi);
        for (std::size_t j = 0; j < da.cols(); ++j) {
            const double gj = g(0, j);
            if (gj == 0.0) continue;
            const double lse = ov(0, j);
            for (std::size_t i = 0; i < da.rows(); ++i)
                da(i, j) += gj * std::exp(av2(i, j) - lse);
        }
    });
}

Var sum_all(Var a) {
    Tape& t = *a.tape;
    double s = 0.0;
    for (double x : a.val().values()) s += x;
    Matrix out(1, 1, s);
    if (!t.requires_grad(a.id)) return t.constant(std::move(out));
    const Tape::Id oi = t.next_id(), ai = a.id;
    return t.emplace(std::move(out), true, [oi, ai](Tape& tp) {
        const double g = tp.grad_ref(oi)(0, 0);
        Matrix& da = tp.grad_buffer(ai);
        for (double& x : da.values()) x += g;
    });
}

Var sum_rows(Var a) {
    Tape& t = *a.tape;
    const Matrix& av = a.val();
    Matrix out(av.rows(), 1);
    for (std::size_t i = 0; i < av.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < av.cols(); ++j) s += av(i, j);
        out(i, 0) = s;
    }
    if (!t.requires_grad(a.id)) return t.constant(std::move(out));
    const Tape::Id oi = t.next_id(), ai = a.id;
    return t.emplace(std::move(out), true, [oi, ai](Tape& tp) {
        Matrix& da = tp.grad_buffer(ai);
        const Matrix& g = tp.grad_ref(oi);
        for (std::size_t i = 0; i < da.rows(); ++i)
            for (std::size_t j = 0; j < da.cols(); ++j) da(i, j) += g(i, 0);
    });
}

Var sum_cols(Var a) {
    Tape& t = *a.tape;
    const Matrix& av = a.val();
    Matrix out(1, av.cols());
    for (std::size_t j = 0; j < av.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < av.rows(); ++i) s += av(i, j);
        out(0, j) = s;
    }
    if (!t.requires_grad(a.id)) return t.constant(std::move(out));
    const Tape::Id oi = t.next_id(), ai = a.id;
    return t.emplace(std::move(out), true, [oi, ai](Tape& tp) {
        Matrix& da = tp.grad_buffer(ai);
        const Matrix& g = tp.grad_ref(oi);
        for (std::size_t i = 0; i < da.rows(); ++i)
            for (std::size_t j = 0; j < da.cols(); ++j) da(i, j) += g(0, j);
    });
}

Var pairwise_sq_dist(Var a, Var b) {
    Tape& t = same_tape(a, b);
    Matrix out = pairwise_sq_dist(a.val(), b.val());
    if (!t.requires_grad(a.id) && !t.requires_grad(b.id)) return t.constant(std::move(out));
    const Tape::Id oi = t.next_id(), ai = a.id, bi = b.id;
    return t.emplace(std::move(out), true, [oi, ai, bi](Tape& tp) {
        const Matrix& g = tp.grad_ref(oi);  // m x n
        const Matrix& av = tp.value(ai);    // D x m
        const Matrix& bv = tp.value(bi);    // D x n
        const std::size_t d = av.rows(), m = av.cols(), n = bv.cols();
        if (tp.requires_grad(ai)) {
            Matrix& da = tp.grad_buffer(ai);
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    const double gij = 2.0 * g(i, j);
                    if (gij == 0.0) continue;
                    for (std::size_t k = 0; k < d; ++k)
                        da(k, i) += gij * (av(k, i) - bv(k, j));
                }
            }
        }
        if (tp.requires_grad(bi)) {
            Matrix& db = tp.grad_buffer(bi);
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    const double gij = 2.0 * g(i, j);
                    if (gij == 0.0) continue;
                    for (std::size_t k = 0; k < d; ++k)
                        db(k, j) += gij * (bv(k, j) - av(k, i));
                }
            }
        }
    });
}

}  // namespace traco
