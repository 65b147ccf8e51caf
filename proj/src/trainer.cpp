#include "traco/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>

#include "json.hpp"

namespace traco {

void TrainConfig::validate() const {
    hierarchy.validate();
    if (!(sinkhorn.epsilon > 0.0)) throw ConfigError("config: sinkhorn.epsilon must be > 0");
    if (sinkhorn.max_iterations < 1) throw ConfigError("config: sinkhorn.max_iterations must be >= 1");
    if (!(sinkhorn.stop_tolerance > 0.0)) throw ConfigError("config: sinkhorn.stop_tolerance must be > 0");
    if (lambda_tpd < 0.0) throw ConfigError("config: lambda_tpd must be >= 0");
    if (!(learning_rate > 0.0)) throw ConfigError("config: learning_rate must be > 0");
    if (epochs < 0) throw ConfigError("config: epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
    if (clip_gradients && !(clip_norm > 0.0)) throw ConfigError("config: clip_norm must be > 0");
    if (bias_refresh_interval < 1) throw ConfigError("config: bias_refresh_interval must be >= 1");
    if (kl_anneal_epochs < 0) throw ConfigError("config: kl_anneal_epochs must be >= 0");
}

const Matrix& Checkpoint::parameter(const std::string& name) const {
    for (const auto& [n, m] : parameters) {
        if (n == name) return m;
    }
    throw std::invalid_argument("checkpoint: unknown parameter " + name);
}

TracoModel Checkpoint::restore_model() const {
    TracoModel model(config.hierarchy, vocab_size, config.learnable_s);
    for (const auto& [name, value] : parameters) {
        Param& p = model.params().by_name(name);
        if (!p.value.same_shape(value)) {
            throw SchemaError("checkpoint: parameter " + name + " has an unexpected shape");
        }
        p.value = value;
    }
    return model;
}

std::vector<SinkhornResult> solve_dependencies(const TracoModel& model,
                                               const SinkhornConfig& cfg,
                                               bool unconstrained) {
    const std::size_t levels = model.config().levels();
    std::vector<SinkhornResult> plans;
    plans.reserve(levels - 1);
    for (std::size_t l = 0; l + 1 < levels; ++l) {
        const Matrix& child = model.params().by_name(TracoModel::topic_param_name(l + 1)).value;
        const Matrix& parent = model.params().by_name(TracoModel::topic_param_name(l)).value;
        if (unconstrained) {
            SinkhornResult res;
            res.plan = unconstrained_dependency_values(child, parent);
            res.converged = true;
            plans.push_back(std::move(res));
            continue;
        }
        const Matrix cost = transport_cost(child, parent);
        Marginals m;
        m.row = Matrix(cost.rows(), 1, 1.0 / static_cast<double>(cost.rows()));
        m.col = model.col_weights(l);
        plans.push_back(sinkhorn(cost, m, cfg));
    }
    return plans;
}

std::vector<BiasClamp> refresh_bias_clamps(const TracoModel& model) {
    const std::size_t levels = model.config().levels();
    std::vector<Matrix> betas(levels);
    for (std::size_t l = 0; l < levels; ++l) betas[l] = model.beta_values(l);
    std::vector<BiasClamp> clamps(levels);
    for (std::size_t l = 0; l < levels; ++l) {
        std::vector<const Matrix*> context;
        if (l > 0) context.push_back(&betas[l - 1]);
        if (l + 1 < levels) context.push_back(&betas[l + 1]);
        clamps[l] = make_bias_clamp(contextual_semantics(context, model.config().n_top));
    }
    return clamps;
}

Var objective(Tape& tape, const TracoModel& model, const ObjectiveInputs& in,
              const TrainConfig& cfg) {
    const HierarchyConfig& h = model.config();
    const std::size_t levels = h.levels();
    if (!in.plans || in.plans->size() != levels - 1) {
        throw std::invalid_argument("objective: epoch plans missing or wrong count");
    }
    if (!cfg.disable_cdd && (!in.bias || in.bias->size() != levels)) {
        throw std::invalid_argument("objective: bias clamps missing or wrong count");
    }

    // Dependencies for this step. Full model: transport plans replayed on
    // the tape in unrolled mode, constants in detached mode. Ablated TPD:
    // prior-style unconstrained softmax dependencies (no balance, no
    // transport loss), always differentiable through the dot products.
    std::vector<Var> deps(levels - 1);
    std::vector<Var> costs(levels - 1);
    for (std::size_t l = 0; l + 1 < levels; ++l) {
        if (cfg.disable_tpd) {
            deps[l] = unconstrained_dependency(model.topic_embeddings(tape, l + 1),
                                               model.topic_embeddings(tape, l));
        } else if (cfg.sinkhorn.unrolled) {
            Var cost = pairwise_sq_dist(model.topic_embeddings(tape, l + 1),
                                        model.topic_embeddings(tape, l));
            Marginals m;
            m.row = Matrix(cost.val().rows(), 1, 1.0 / static_cast<double>(cost.val().rows()));
            m.col = model.col_weights(l);
            costs[l] = cost;
            if (model.learnable_s()) {
                Var lw = model.log_col_weights(tape, l);
                deps[l] = sinkhorn_unrolled(tape, cost, m, cfg.sinkhorn,
                                            (*in.plans)[l].iterations, nullptr, &lw);
            } else {
                deps[l] = sinkhorn_unrolled(tape, cost, m, cfg.sinkhorn,
                                            (*in.plans)[l].iterations);
            }
        } else {
            costs[l] = pairwise_sq_dist(model.topic_embeddings(tape, l + 1),
                                        model.topic_embeddings(tape, l));
            deps[l] = tape.constant((*in.plans)[l].plan);
        }
    }

    // Encoder path.
    Var x = tape.constant(in.x);
    GaussianPosterior q = encode(model.encoder(tape), x);
    Var r = reparameterize(q, in.noise);
    Var theta_lowest = doc_topic_lowest(r);
    std::vector<Var> theta;
    if (cfg.disable_tpd) {
        // Unconstrained dependencies are already row stochastic.
        theta.resize(levels);
        theta[levels - 1] = theta_lowest;
        for (std::size_t l = levels - 1; l-- > 0;) {
            theta[l] = matmul(transpose(deps[l]), theta[l + 1]);
        }
    } else {
        theta = propagate_theta(theta_lowest, deps);
    }

    const std::size_t k_lowest = h.topics_per_level.back();
    Var kl = kl_diag_gaussian(q, Matrix(k_lowest, 1, 0.0), Matrix(k_lowest, 1, 1.0));
    if (in.kl_scale != 1.0) kl = scale(kl, in.kl_scale);

    const double batch = static_cast<double>(in.x.cols());
    Var tm_mean;
    if (cfg.disable_cdd) {
        // Ablated decoder: aggregation decoding over all levels jointly
        // (entangled, no contextual bias).
        Var logits = matmul(model.beta(tape, 0), theta[0]);
        for (std::size_t l = 1; l < levels; ++l) {
            logits = add(logits, matmul(model.beta(tape, l), theta[l]));
        }
        Var recon = neg(sum_all(mul_const(log_softmax_cols(logits), in.x)));
        tm_mean = scale(add(recon, kl), 1.0 / batch);
    } else {
        std::vector<Var> log_probs(levels);
        for (std::size_t l = 0; l < levels; ++l) {
            Var beta = model.beta(tape, l);
            Var bias_eff = apply_bias(model.bias_param(tape, l), (*in.bias)[l]);
            log_probs[l] = decode_level(beta, theta[l], bias_eff, h.lambda_b);
        }
        tm_mean = scale(tm_loss_sum(in.x, log_probs, kl), 1.0 / batch);
    }

    if (cfg.disable_tpd) return tm_mean;

    Var tpd_total;
    for (std::size_t l = 0; l + 1 < levels; ++l) {
        Var term = cfg.sinkhorn.unrolled ? tpd_loss(costs[l], deps[l])
                                         : tpd_loss_detached(costs[l], (*in.plans)[l].plan);
        tpd_total = l == 0 ? term : add(tpd_total, term);
    }
    const double pair_count = static_cast<double>(levels - 1);
    return add(scale(tpd_total, cfg.lambda_tpd / pair_count), tm_mean);
}

namespace {

Matrix batch_matrix(const BowCorpus& corpus, const std::vector<std::size_t>& docs) {
    Matrix x(corpus.vocab.size(), docs.size());
    for (std::size_t j = 0; j < docs.size(); ++j) {
        for (const auto& [word, count] : corpus.docs[docs[j]].counts) {
            x(word, j) = static_cast<double>(count);
        }
    }
    return x;
}

}  // namespace

Checkpoint train(const BowCorpus& corpus, const TrainConfig& cfg, std::ostream* log) {
    cfg.validate();
    if (corpus.docs.empty()) throw std::invalid_argument("train: empty corpus");

    Rng rng(cfg.seed);
    TracoModel model(cfg.hierarchy, corpus.vocab.size(), cfg.learnable_s);
    model.init_parameters(rng);
    AdamState adam;
    const std::size_t levels = cfg.hierarchy.levels();
    const std::size_t k_lowest = cfg.hierarchy.topics_per_level.back();

    std::vector<std::size_t> order(corpus.doc_count());
    std::iota(order.begin(), order.end(), 0);

    std::vector<double> loss_history;
    loss_history.reserve(static_cast<std::size_t>(cfg.epochs));
    std::vector<BiasClamp> bias_clamps;
    long step = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<SinkhornResult> plans =
            solve_dependencies(model, cfg.sinkhorn, cfg.disable_tpd);
        if (log) {
            for (std::size_t l = 0; l < plans.size(); ++l) {
                if (!plans[l].converged) {
                    *log << "warning: epoch " << epoch << " level pair " << l
                         << ": sinkhorn hit max iterations, row marginal L1 error "
                         << plans[l].row_error << "\n";
                }
            }
        }
        const double kl_scale =
            cfg.kl_anneal_epochs > 0
                ? std::min(1.0, static_cast<double>(epoch) / cfg.kl_anneal_epochs)
                : 1.0;

        rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            const std::vector<std::size_t> docs(order.begin() + begin, order.begin() + end);
            if (!cfg.disable_cdd && step % cfg.bias_refresh_interval == 0) {
                bias_clamps = refresh_bias_clamps(model);
            }
            ObjectiveInputs in;
            in.x = batch_matrix(corpus, docs);
            in.noise = Matrix(k_lowest, docs.size());
            for (double& z : in.noise.values()) z = rng.normal();
            in.plans = &plans;
            in.bias = cfg.disable_cdd ? nullptr : &bias_clamps;
            in.kl_scale = kl_scale;

            try {
                Tape tape;
                Var loss = objective(tape, model, in, cfg);
                check_finite(loss.val(), "objective");
                tape.backward(loss);
                model.params().zero_grads();
                for (const auto& [name, id] : tape.registered_params()) {
                    model.params().by_name(name).grad = tape.gradient(id);
                }
                if (cfg.clip_gradients) clip_global_norm(model.params(), cfg.clip_norm);
                adam_step(model.params(), adam, cfg.learning_rate);
                epoch_loss += loss.val()(0, 0);
            } catch (const NumericError& e) {
                throw NumericError("epoch " + std::to_string(epoch) + " batch " +
                                   std::to_string(batches) + ": " + e.what());
            }
            ++batches;
            ++step;
        }
        loss_history.push_back(epoch_loss / static_cast<double>(batches));
    }

    Checkpoint cp;
    cp.config = cfg;
    cp.vocab_size = corpus.vocab.size();
    cp.vocab_hash = corpus.vocab.hash();
    for (const Param& p : model.params()) cp.parameters.emplace_back(p.name, p.value);
    std::vector<SinkhornResult> final_plans =
        solve_dependencies(model, cfg.sinkhorn, cfg.disable_tpd);
    for (std::size_t l = 0; l < final_plans.size(); ++l) {
        if (log && !final_plans[l].converged) {
            *log << "warning: final dependency solve for level pair " << l
                 << " hit max iterations, row marginal L1 error " << final_plans[l].row_error
                 << "\n";
        }
        cp.dependency.push_back(std::move(final_plans[l].plan));
    }
    cp.loss_history = std::move(loss_history);
    return cp;
}

// --- checkpoint serialization ---

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr char kMagic[8] = {'T', 'R', 'A', 'C', 'O', 'C', 'P', '1'};

}  // namespace

nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg) {
    ordered_json j;
    j["hierarchy"] = {{"topics_per_level", cfg.hierarchy.topics_per_level},
                      {"embedding_dim", cfg.hierarchy.embedding_dim},
                      {"encoder_hidden", cfg.hierarchy.encoder_hidden},
                      {"tau", cfg.hierarchy.tau},
                      {"n_top", cfg.hierarchy.n_top},
                      {"lambda_b", cfg.hierarchy.lambda_b},
                      {"init_std", cfg.hierarchy.init_std}};
    j["sinkhorn"] = {{"epsilon", cfg.sinkhorn.epsilon},
                     {"max_iterations", cfg.sinkhorn.max_iterations},
                     {"stop_tolerance", cfg.sinkhorn.stop_tolerance},
                     {"differentiable", cfg.sinkhorn.unrolled ? "unrolled" : "detached"}};
    j["lambda_tpd"] = cfg.lambda_tpd;
    j["learning_rate"] = cfg.learning_rate;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["seed"] = cfg.seed;
    j["disable_tpd"] = cfg.disable_tpd;
    j["disable_cdd"] = cfg.disable_cdd;
    j["clip_gradients"] = cfg.clip_gradients;
    j["clip_norm"] = cfg.clip_norm;
    j["learnable_s"] = cfg.learnable_s;
    j["bias_refresh_interval"] = cfg.bias_refresh_interval;
    j["kl_anneal_epochs"] = cfg.kl_anneal_epochs;
    return j;
}

namespace {

TrainConfig config_from_json(const ordered_json& j) {
    TrainConfig cfg;
    const auto& h = j.at("hierarchy");
    cfg.hierarchy.topics_per_level = h.at("topics_per_level").get<std::vector<std::size_t>>();
    cfg.hierarchy.embedding_dim = h.at("embedding_dim").get<std::size_t>();
    cfg.hierarchy.encoder_hidden = h.at("encoder_hidden").get<std::size_t>();
    cfg.hierarchy.tau = h.at("tau").get<double>();
    cfg.hierarchy.n_top = h.at("n_top").get<std::size_t>();
    cfg.hierarchy.lambda_b = h.at("lambda_b").get<double>();
    cfg.hierarchy.init_std = h.at("init_std").get<double>();
    const auto& s = j.at("sinkhorn");
    cfg.sinkhorn.epsilon = s.at("epsilon").get<double>();
    cfg.sinkhorn.max_iterations = s.at("max_iterations").get<int>();
    cfg.sinkhorn.stop_tolerance = s.at("stop_tolerance").get<double>();
    cfg.sinkhorn.unrolled = s.at("differentiable").get<std::string>() == "unrolled";
    cfg.lambda_tpd = j.at("lambda_tpd").get<double>();
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.epochs = j.at("epochs").get<int>();
    cfg.batch_size = j.at("batch_size").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.disable_tpd = j.at("disable_tpd").get<bool>();
    cfg.disable_cdd = j.at("disable_cdd").get<bool>();
    cfg.clip_gradients = j.at("clip_gradients").get<bool>();
    cfg.clip_norm = j.at("clip_norm").get<double>();
    cfg.learnable_s = j.at("learnable_s").get<bool>();
    cfg.bias_refresh_interval = j.at("bias_refresh_interval").get<int>();
    cfg.kl_anneal_epochs = j.at("kl_anneal_epochs").get<int>();
    return cfg;
}

void append_doubles(std::string& buf, const Matrix& m) {
    static_assert(sizeof(double) == 8);
    const char* raw = reinterpret_cast<const char*>(m.data());
    buf.append(raw, m.size() * sizeof(double));
}

}  // namespace

void save_checkpoint(const Checkpoint& cp, const std::string& path) {
    ordered_json header;
    header["format"] = "traco-checkpoint";
    header["version"] = 1;
    header["vocab_size"] = cp.vocab_size;
    header["vocab_hash"] = cp.vocab_hash;
    header["config"] = train_config_to_json(cp.config);
    header["loss_history"] = cp.loss_history;
    ordered_json params = ordered_json::array();
    for (const auto& [name, m] : cp.parameters) {
        params.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
    }
    header["parameters"] = params;
    ordered_json deps = ordered_json::array();
    for (const Matrix& m : cp.dependency) {
        deps.push_back({{"rows", m.rows()}, {"cols", m.cols()}});
    }
    header["dependency"] = deps;

    const std::string header_str = header.dump();
    std::string buf;
    buf.append(kMagic, sizeof(kMagic));
    const std::uint64_t len = header_str.size();
    char len_le[8];
    for (int i = 0; i < 8; ++i) len_le[i] = static_cast<char>((len >> (8 * i)) & 0xff);
    buf.append(len_le, 8);
    buf += header_str;
    for (const auto& [name, m] : cp.parameters) append_doubles(buf, m);
    for (const Matrix& m : cp.dependency) append_doubles(buf, m);

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write checkpoint: " + tmp);
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!out) throw IoError("failed writing checkpoint: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw IoError("cannot move checkpoint into place: " + path);
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 16) throw IoError("checkpoint truncated: " + path);
    if (std::string_view(buf.data(), 8) != std::string_view(kMagic, 8)) {
        throw SchemaError("not a traco checkpoint (bad magic): " + path);
    }
    std::uint64_t len = 0;
    for (int i = 7; i >= 0; --i) {
        len = (len << 8) | static_cast<unsigned char>(buf[8 + i]);
    }
    if (16 + len > buf.size()) throw IoError("checkpoint truncated in header: " + path);
    ordered_json header = ordered_json::parse(buf.substr(16, len), nullptr, false);
    if (header.is_discarded() || header.value("format", "") != "traco-checkpoint") {
        throw SchemaError("checkpoint header is not valid: " + path);
    }
    if (header.at("version").get<int>() != 1) {
        throw SchemaError("unsupported checkpoint version: " + path);
    }

    Checkpoint cp;
    cp.vocab_size = header.at("vocab_size").get<std::size_t>();
    cp.vocab_hash = header.at("vocab_hash").get<std::uint64_t>();
    cp.config = config_from_json(header.at("config"));
    cp.loss_history = header.at("loss_history").get<std::vector<double>>();

    std::size_t offset = 16 + len;
    auto read_matrix = [&](std::size_t rows, std::size_t cols) {
        const std::size_t bytes = rows * cols * sizeof(double);
        if (offset + bytes > buf.size()) throw IoError("checkpoint truncated in arrays: " + path);
        Matrix m(rows, cols);
        std::memcpy(m.data(), buf.data() + offset, bytes);
        offset += bytes;
        return m;
    };
    for (const auto& p : header.at("parameters")) {
        cp.parameters.emplace_back(p.at("name").get<std::string>(),
                                   read_matrix(p.at("rows").get<std::size_t>(),
                                               p.at("cols").get<std::size_t>()));
    }
    for (const auto& d : header.at("dependency")) {
        cp.dependency.push_back(
            read_matrix(d.at("rows").get<std::size_t>(), d.at("cols").get<std::size_t>()));
    }
    if (offset != buf.size()) throw SchemaError("checkpoint has trailing bytes: " + path);
    return cp;
}

}  // namespace traco
