#include "traco/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace traco {

LevelTopWords top_words_for_level(const Matrix& beta, std::size_t n) {
    LevelTopWords topics(beta.cols());
    for (std::size_t k = 0; k < beta.cols(); ++k) {
        topics[k].words = top_words_of_topic(beta, k, n);
        topics[k].scores.reserve(topics[k].words.size());
        for (std::size_t w : topics[k].words) topics[k].scores.push_back(beta(w, k));
    }
    return topics;
}

double topic_diversity(const std::vector<const TopWordList*>& topics) {
    if (topics.empty()) throw std::invalid_argument("topic_diversity: no topics");
    std::unordered_set<std::size_t> distinct;
    std::size_t slots = 0;
    for (const TopWordList* t : topics) {
        slots += t->words.size();
        distinct.insert(t->words.begin(), t->words.end());
    }
    if (slots == 0) throw std::invalid_argument("topic_diversity: empty top lists");
    return static_cast<double>(distinct.size()) / static_cast<double>(slots);
}

double topic_diversity(const LevelTopWords& topics) {
    std::vector<const TopWordList*> ptrs;
    ptrs.reserve(topics.size());
    for (const TopWordList& t : topics) ptrs.push_back(&t);
    return topic_diversity(ptrs);
}

double npmi(std::size_t a, std::size_t b, const CooccurrenceStats& stats) {
    if (stats.df[a] == 0 || stats.df[b] == 0) {
        throw std::invalid_argument("npmi: zero document frequency");
    }
    if (a == b) return 1.0;
    const double n = static_cast<double>(stats.doc_count);
    const std::size_t pair = stats.pair_df(a, b);
    if (pair == 0) return -1.0;  // smoothing limit for disjoint supports
    const double pa = static_cast<double>(stats.df[a]) / n;
    const double pb = static_cast<double>(stats.df[b]) / n;
    const double pab = static_cast<double>(pair) / n;
    const double denom = -std::log(pab);
    if (denom == 0.0) return 1.0;  // pair in every document forces pa = pb = 1
    return std::log(pab / (pa * pb)) / denom;
}

double topic_coherence_npmi(const LevelTopWords& topics, const CooccurrenceStats& stats) {
    if (topics.empty()) throw std::invalid_argument("topic_coherence_npmi: no topics");
    double total = 0.0;
    for (const TopWordList& t : topics) {
        if (t.words.size() < 2) {
            throw std::invalid_argument("topic_coherence_npmi: need at least 2 top words");
        }
        double s = 0.0;
        std::size_t pairs = 0;
        for (std::size_t i = 0; i < t.words.size(); ++i) {
            for (std::size_t j = i + 1; j < t.words.size(); ++j) {
                s += npmi(t.words[i], t.words[j], stats);
                ++pairs;
            }
        }
        total += s / static_cast<double>(pairs);
    }
    return total / static_cast<double>(topics.size());
}

double clnpmi(const TopWordList& parent, const TopWordList& child,
              const CooccurrenceStats& stats, bool* empty_diff) {
    if (parent.words.empty() || child.words.empty()) {
        throw std::invalid_argument("clnpmi: empty top list");
    }
    const std::set<std::size_t> pset(parent.words.begin(), parent.words.end());
    const std::set<std::size_t> cset(child.words.begin(), child.words.end());
    std::vector<std::size_t> p_only, c_only;
    for (std::size_t w : parent.words) {
        if (!cset.count(w)) p_only.push_back(w);
    }
    for (std::size_t w : child.words) {
        if (!pset.count(w)) c_only.push_back(w);
    }
    if (empty_diff) *empty_diff = false;
    if (p_only.empty() || c_only.empty()) {
        if (empty_diff) *empty_diff = true;
        return 0.0;
    }
    double s = 0.0;
    for (std::size_t wp : p_only) {
        for (std::size_t wc : c_only) s += npmi(wp, wc, stats);
    }
    return s / static_cast<double>(p_only.size() * c_only.size());
}

HierarchyView HierarchyView::from_dependency(const std::vector<Matrix>& dependency) {
    HierarchyView view;
    view.parents.reserve(dependency.size());
    for (const Matrix& phi : dependency) view.parents.push_back(parent_of(phi));
    return view;
}

namespace {

double pair_td(const TopWordList& a, const TopWordList& b) {
    return topic_diversity(std::vector<const TopWordList*>{&a, &b});
}

}  // namespace

PairDiversities hierarchy_diversities(const std::vector<std::size_t>& parents,
                                      const LevelTopWords& parent_topics,
                                      const LevelTopWords& child_topics) {
    if (parents.size() != child_topics.size()) {
        throw ShapeError("hierarchy_diversities: parent assignment count mismatch");
    }
    PairDiversities out;

    double pcd_sum = 0.0;
    for (std::size_t c = 0; c < child_topics.size(); ++c) {
        pcd_sum += pair_td(parent_topics[parents[c]], child_topics[c]);
    }
    out.pcd = pcd_sum / static_cast<double>(child_topics.size());

    double sd_sum = 0.0;
    std::size_t sd_pairs = 0;
    for (std::size_t c1 = 0; c1 < child_topics.size(); ++c1) {
        for (std::size_t c2 = c1 + 1; c2 < child_topics.size(); ++c2) {
            if (parents[c1] != parents[c2]) continue;
            sd_sum += pair_td(child_topics[c1], child_topics[c2]);
            ++sd_pairs;
        }
    }
    if (sd_pairs == 0) {
        out.sd = 1.0;
        out.sd_defined = false;
    } else {
        out.sd = sd_sum / static_cast<double>(sd_pairs);
    }

    double pncd_sum = 0.0;
    std::size_t pncd_pairs = 0;
    for (std::size_t p = 0; p < parent_topics.size(); ++p) {
        for (std::size_t c = 0; c < child_topics.size(); ++c) {
            if (parents[c] == p) continue;
            pncd_sum += pair_td(parent_topics[p], child_topics[c]);
            ++pncd_pairs;
        }
    }
    if (pncd_pairs == 0) {
        out.pncd = 1.0;
        out.pncd_defined = false;
    } else {
        out.pncd = pncd_sum / static_cast<double>(pncd_pairs);
    }
    return out;
}

std::vector<std::size_t> cluster_assignments(const Matrix& theta) {
    std::vector<std::size_t> out(theta.cols());
    for (std::size_t j = 0; j < theta.cols(); ++j) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < theta.rows(); ++k) {
            if (theta(k, j) > theta(best, j)) best = k;
        }
        out[j] = best;
    }
    return out;
}

ClusteringResult clustering_eval(const std::vector<std::size_t>& assignments,
                                 const std::vector<std::string>& labels) {
    if (labels.empty() || labels.size() != assignments.size()) {
        throw std::invalid_argument("clustering_eval: labels missing for some documents");
    }
    const double n = static_cast<double>(labels.size());
    std::unordered_map<std::string, std::size_t> label_ids;
    std::vector<std::size_t> label_of(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        label_of[i] = label_ids.emplace(labels[i], label_ids.size()).first->second;
    }
    const std::size_t n_labels = label_ids.size();
    const std::size_t n_clusters =
        1 + *std::max_element(assignments.begin(), assignments.end());

    std::vector<std::vector<double>> joint(n_clusters, std::vector<double>(n_labels, 0.0));
    std::vector<double> cluster_count(n_clusters, 0.0), label_count(n_labels, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        joint[assignments[i]][label_of[i]] += 1.0;
        cluster_count[assignments[i]] += 1.0;
        label_count[label_of[i]] += 1.0;
    }

    ClusteringResult res;
    double purity_sum = 0.0;
    for (std::size_t c = 0; c < n_clusters; ++c) {
        purity_sum += *std::max_element(joint[c].begin(), joint[c].end());
    }
    res.purity = purity_sum / n;

    double mi = 0.0;
    for (std::size_t c = 0; c < n_clusters; ++c) {
        for (std::size_t l = 0; l < n_labels; ++l) {
            const double ncl = joint[c][l];
            if (ncl == 0.0) continue;
            mi += (ncl / n) * std::log((ncl * n) / (cluster_count[c] * label_count[l]));
        }
    }
    double hc = 0.0, hl = 0.0;
    for (double x : cluster_count) {
        if (x > 0.0) hc -= (x / n) * std::log(x / n);
    }
    for (double x : label_count) {
        if (x > 0.0) hl -= (x / n) * std::log(x / n);
    }
    // Mutual information normalized by the arithmetic mean of the entropies;
    // two identical trivial partitions score 1.
    res.nmi = hc + hl == 0.0 ? 1.0 : mi / ((hc + hl) / 2.0);
    if (res.nmi < 0.0 && res.nmi > -1e-12) res.nmi = 0.0;
    return res;
}

std::vector<Matrix> infer_thetas(const TracoModel& model,
                                 const std::vector<Matrix>& dependency,
                                 const BowCorpus& corpus,
                                 bool row_stochastic_dependency) {
    const std::size_t levels = model.config().levels();
    if (dependency.size() + 1 != levels) {
        throw ShapeError("infer_thetas: dependency count does not match levels");
    }
    const std::size_t n = corpus.doc_count();
    const std::size_t v = corpus.vocab.size();
    const std::size_t k_lowest = model.config().topics_per_level.back();

    std::vector<Matrix> thetas(levels);
    for (std::size_t l = 0; l < levels; ++l) {
        thetas[l] = Matrix(model.config().topics_per_level[l], n);
    }
    // Rescaled transposed dependencies used for upward propagation.
    std::vector<Matrix> up(dependency.size());
    for (std::size_t l = 0; l < dependency.size(); ++l) {
        Matrix scaled = dependency[l];
        if (!row_stochastic_dependency) {
            const double k_child = static_cast<double>(scaled.rows());
            for (double& x : scaled.values()) x *= k_child;
        }
        up[l] = transpose(scaled);
    }

    const std::size_t chunk = 256;
    std::vector<double> logits(k_lowest);
    for (std::size_t begin = 0; begin < n; begin += chunk) {
        const std::size_t end = std::min(n, begin + chunk);
        Matrix x(v, end - begin);
        for (std::size_t j = begin; j < end; ++j) {
            for (const auto& [word, count] : corpus.docs[j].counts) {
                x(word, j - begin) = static_cast<double>(count);
            }
        }
        Matrix mu = encode_mean_values(model, x);
        Matrix theta_low(k_lowest, end - begin);
        for (std::size_t j = 0; j < mu.cols(); ++j) {
            for (std::size_t k = 0; k < k_lowest; ++k) logits[k] = mu(k, j);
            const std::vector<double> sm = softmax_stable(logits);
            for (std::size_t k = 0; k < k_lowest; ++k) theta_low(k, j) = sm[k];
        }
        for (std::size_t j = 0; j < theta_low.cols(); ++j) {
            for (std::size_t k = 0; k < k_lowest; ++k) {
                thetas[levels - 1](k, begin + j) = theta_low(k, j);
            }
        }
        Matrix cur = theta_low;
        for (std::size_t l = levels - 1; l-- > 0;) {
            cur = matmul(up[l], cur);
            for (std::size_t j = 0; j < cur.cols(); ++j) {
                for (std::size_t k = 0; k < cur.rows(); ++k) {
                    thetas[l](k, begin + j) = cur(k, j);
                }
            }
        }
    }
    return thetas;
}

nlohmann::ordered_json MetricsReport::to_json(const nlohmann::ordered_json& config_echo) const {
    nlohmann::ordered_json j;
    j["top_n"] = top_n;
    j["clustering_available"] = clustering_available;
    nlohmann::ordered_json levels = nlohmann::ordered_json::array();
    for (std::size_t l = 0; l < tc_npmi.size(); ++l) {
        nlohmann::ordered_json lvl;
        lvl["level"] = l + 1;
        lvl["tc_npmi"] = tc_npmi[l];
        lvl["td"] = td[l];
        if (clustering_available) {
            lvl["purity"] = purity[l];
            lvl["nmi"] = nmi[l];
        }
        levels.push_back(lvl);
    }
    j["levels"] = levels;
    nlohmann::ordered_json pairs = nlohmann::ordered_json::array();
    for (std::size_t l = 0; l < pcc.size(); ++l) {
        nlohmann::ordered_json p;
        p["parent_level"] = l + 1;
        p["child_level"] = l + 2;
        p["pcc"] = pcc[l];
        p["pcd"] = pcd[l];
        p["sd"] = sd[l];
        p["sd_defined"] = static_cast<bool>(sd_defined[l]);
        p["pncd"] = pncd[l];
        p["pncd_defined"] = static_cast<bool>(pncd_defined[l]);
        pairs.push_back(p);
    }
    j["level_pairs"] = pairs;
    nlohmann::ordered_json agg;
    agg["tc_npmi"] = tc_npmi_mean;
    agg["td"] = td_mean;
    agg["pcc"] = pcc_mean;
    agg["pcd"] = pcd_mean;
    agg["sd"] = sd_mean;
    agg["pncd"] = pncd_mean;
    if (clustering_available) {
        agg["purity"] = purity_mean;
        agg["nmi"] = nmi_mean;
    }
    j["aggregate"] = agg;
    j["config"] = config_echo;
    return j;
}

namespace {

double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

}  // namespace

MetricsReport evaluate(const Checkpoint& cp, const BowCorpus& corpus, std::size_t top_n) {
    if (cp.vocab_hash != corpus.vocab.hash()) {
        throw std::invalid_argument("evaluate: checkpoint and corpus vocabularies differ");
    }
    TracoModel model = cp.restore_model();
    const std::size_t levels = model.config().levels();
    const CooccurrenceStats stats = cooccurrence_stats(corpus);

    MetricsReport report;
    report.top_n = top_n;
    std::vector<LevelTopWords> tops(levels);
    for (std::size_t l = 0; l < levels; ++l) {
        tops[l] = top_words_for_level(model.beta_values(l), top_n);
        report.td.push_back(topic_diversity(tops[l]));
        report.tc_npmi.push_back(topic_coherence_npmi(tops[l], stats));
    }

    const HierarchyView view = HierarchyView::from_dependency(cp.dependency);
    for (std::size_t l = 0; l + 1 < levels; ++l) {
        const std::vector<std::size_t>& parents = view.parents[l];
        double pcc_sum = 0.0;
        for (std::size_t c = 0; c < tops[l + 1].size(); ++c) {
            pcc_sum += clnpmi(tops[l][parents[c]], tops[l + 1][c], stats);
        }
        report.pcc.push_back(pcc_sum / static_cast<double>(tops[l + 1].size()));
        const PairDiversities div = hierarchy_diversities(parents, tops[l], tops[l + 1]);
        report.pcd.push_back(div.pcd);
        report.sd.push_back(div.sd);
        report.pncd.push_back(div.pncd);
        report.sd_defined.push_back(div.sd_defined);
        report.pncd_defined.push_back(div.pncd_defined);
    }

    if (corpus.has_labels()) {
        report.clustering_available = true;
        const std::vector<Matrix> thetas =
            infer_thetas(model, cp.dependency, corpus, cp.config.disable_tpd);
        for (std::size_t l = 0; l < levels; ++l) {
            const ClusteringResult r =
                clustering_eval(cluster_assignments(thetas[l]), corpus.labels);
            report.purity.push_back(r.purity);
            report.nmi.push_back(r.nmi);
        }
        report.purity_mean = mean_of(report.purity);
        report.nmi_mean = mean_of(report.nmi);
    }

    report.tc_npmi_mean = mean_of(report.tc_npmi);
    report.td_mean = mean_of(report.td);
    report.pcc_mean = mean_of(report.pcc);
    report.pcd_mean = mean_of(report.pcd);
    report.sd_mean = mean_of(report.sd);
    report.pncd_mean = mean_of(report.pncd);
    return report;
}

std::vector<std::string> export_features(const std::vector<Matrix>& thetas,
                                         const std::vector<std::string>& labels,
                                         const std::string& directory) {
    std::vector<std::string> paths;
    for (std::size_t l = 0; l < thetas.size(); ++l) {
        const Matrix& theta = thetas[l];
        const std::string path = directory + "/features_level" + std::to_string(l + 1) + ".tsv";
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw IoError("cannot write feature file: " + path);
        char num[64];
        for (std::size_t j = 0; j < theta.cols(); ++j) {
            for (std::size_t k = 0; k < theta.rows(); ++k) {
                std::snprintf(num, sizeof(num), "%.17g", theta(k, j));
                if (k > 0) out << '\t';
                out << num;
            }
            if (!labels.empty()) out << '\t' << labels[j];
            out << '\n';
        }
        if (!out) throw IoError("failed writing feature file: " + path);
        paths.push_back(path);
    }
    return paths;
}

nlohmann::ordered_json export_hierarchy_json(const Checkpoint& cp, const Vocabulary& vocab,
                                             std::size_t n_top) {
    if (vocab.size() != cp.vocab_size) {
        throw std::invalid_argument("export_hierarchy_json: vocabulary size mismatch");
    }
    TracoModel model = cp.restore_model();
    const std::size_t levels = model.config().levels();
    const HierarchyView view = HierarchyView::from_dependency(cp.dependency);

    nlohmann::ordered_json out;
    nlohmann::ordered_json jlevels = nlohmann::ordered_json::array();
    for (std::size_t l = 0; l < levels; ++l) {
        const Matrix beta = model.beta_values(l);
        const LevelTopWords tops = top_words_for_level(beta, n_top);
        nlohmann::ordered_json topics = nlohmann::ordered_json::array();
        for (std::size_t k = 0; k < tops.size(); ++k) {
            nlohmann::ordered_json topic;
            topic["id"] = k;
            nlohmann::ordered_json words = nlohmann::ordered_json::array();
            for (std::size_t r = 0; r < tops[k].words.size(); ++r) {
                words.push_back({{"word", vocab.id_to_word[tops[k].words[r]]},
                                 {"score", tops[k].scores[r]}});
            }
            topic["top_words"] = words;
            if (l == 0) {
                topic["parent"] = nullptr;
                topic["dependency_weight"] = nullptr;
            } else {
                const std::size_t parent = view.parents[l - 1][k];
                topic["parent"] = parent;
                topic["dependency_weight"] = cp.dependency[l - 1](k, parent);
            }
            topics.push_back(topic);
        }
        jlevels.push_back({{"level", l + 1}, {"topics", topics}});
    }
    out["levels"] = jlevels;
    return out;
}

}  // namespace traco
