#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "traco/corpus.hpp"
#include "traco/trainer.hpp"

namespace traco {

// Ordered top-word lists for every topic of one level.
struct TopWordList {
    std::vector<std::size_t> words;   // descending score, ties to lower id
    std::vector<double> scores;
};

using LevelTopWords = std::vector<TopWordList>;

LevelTopWords top_words_for_level(const Matrix& beta, std::size_t n);

// Fraction of distinct words across all top lists: distinct / (topics * n).
double topic_diversity(const std::vector<const TopWordList*>& topics);
double topic_diversity(const LevelTopWords& topics);

// Normalized pointwise mutual information from document frequencies.
// Never-co-occurring pairs map to -1; a pair present in every document (which
// forces df(a) = df(b) = N) maps to +1.
double npmi(std::size_t a, std::size_t b, const CooccurrenceStats& stats);

// Mean pairwise NPMI within each top list, averaged over topics.
double topic_coherence_npmi(const LevelTopWords& topics, const CooccurrenceStats& stats);

// Cross-level NPMI over pairs from parent-minus-child and child-minus-parent
// word sets; 0 when either difference set is empty (sets *empty_diff).
double clnpmi(const TopWordList& parent, const TopWordList& child,
              const CooccurrenceStats& stats, bool* empty_diff = nullptr);

// Child-to-parent assignments per level pair plus derived groupings.
struct HierarchyView {
    // parents[l][c] = parent topic of child c at level l+1.
    std::vector<std::vector<std::size_t>> parents;

    static HierarchyView from_dependency(const std::vector<Matrix>& dependency);
};

struct PairDiversities {
    double pcd = 1.0;
    double sd = 1.0;
    double pncd = 1.0;
    bool sd_defined = true;    // false when a level has no sibling pairs
    bool pncd_defined = true;  // false when every child shares one parent
};

// Parent-child / sibling / parent-non-child diversities for one level pair,
// each computed as the TD uniqueness ratio over the joined two top lists.
PairDiversities hierarchy_diversities(const std::vector<std::size_t>& parents,
                                      const LevelTopWords& parent_topics,
                                      const LevelTopWords& child_topics);

struct ClusteringResult {
    double purity = 0.0;
    double nmi = 0.0;
};

// Cluster id per document = argmax of theta (ties to lower topic id).
std::vector<std::size_t> cluster_assignments(const Matrix& theta);  // theta: K x N

ClusteringResult clustering_eval(const std::vector<std::size_t>& assignments,
                                 const std::vector<std::string>& labels);

// Deterministic doc-topic inference for evaluation: posterior mean (zero
// noise) propagated through the checkpointed dependencies. One K_l x N matrix
// per level. Transport plans are rescaled by the child count; row-stochastic
// dependencies (TPD ablated) propagate as-is.
std::vector<Matrix> infer_thetas(const TracoModel& model,
                                 const std::vector<Matrix>& dependency,
                                 const BowCorpus& corpus,
                                 bool row_stochastic_dependency = false);

struct MetricsReport {
    std::size_t top_n = 15;
    bool clustering_available = false;
    std::vector<double> tc_npmi, td;             // per level
    std::vector<double> purity, nmi;             // per level (labels required)
    std::vector<double> pcc, pcd, sd, pncd;      // per level pair
    std::vector<bool> sd_defined, pncd_defined;  // per level pair
    double tc_npmi_mean = 0, td_mean = 0, pcc_mean = 0, pcd_mean = 0, sd_mean = 0,
           pncd_mean = 0, purity_mean = 0, nmi_mean = 0;

    nlohmann::ordered_json to_json(const nlohmann::ordered_json& config_echo) const;
};

MetricsReport evaluate(const Checkpoint& cp, const BowCorpus& corpus, std::size_t top_n = 15);

// Per-level TSV of doc-topic distributions (one row per document, %.17g),
// with a trailing label column when labels exist. Returns written paths.
std::vector<std::string> export_features(const std::vector<Matrix>& thetas,
                                         const std::vector<std::string>& labels,
                                         const std::string& directory);

// Hierarchy tree: per level, topics with top words, parent link and the
// dependency weight of that link (absent at the root level).
nlohmann::ordered_json export_hierarchy_json(const Checkpoint& cp, const Vocabulary& vocab,
                                             std::size_t n_top);

}  // namespace traco
