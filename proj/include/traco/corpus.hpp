#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "traco/errors.hpp"

namespace traco {

using StopwordSet = std::unordered_set<std::string>;

// Bundled English stopword list; overridable by load_stopwords.
const StopwordSet& default_stopwords();
StopwordSet load_stopwords(const std::string& path);

// Applies the preprocessing pipeline to one document: lowercase, punctuation
// replaced by spaces, whitespace tokenization, then drop tokens containing
// digits, tokens shorter than 3 characters, and stopwords.
std::vector<std::string> tokenize_document(const std::string& text, const StopwordSet& stopwords);

std::vector<std::vector<std::string>> preprocess(const std::vector<std::string>& raw_documents,
                                                 const StopwordSet& stopwords);

struct Vocabulary {
    std::vector<std::string> id_to_word;
    std::unordered_map<std::string, std::size_t> word_to_id;

    std::size_t size() const { return id_to_word.size(); }
    // FNV-1a over all words in id order; used for checkpoint/corpus
    // compatibility checks.
    std::uint64_t hash() const;

    static Vocabulary from_words(std::vector<std::string> words);
};

// Words kept appear in >= min_doc_freq documents and <= max_doc_frac * N
// documents; ids are assigned by descending corpus frequency, ties broken
// lexicographically.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& docs,
                       std::size_t min_doc_freq, double max_doc_frac);

struct BowDocument {
    // (word id, count), sorted by word id.
    std::vector<std::pair<std::size_t, std::uint32_t>> counts;

    std::uint64_t total() const;
};

struct BowCorpus {
    Vocabulary vocab;
    std::vector<BowDocument> docs;
    std::vector<std::string> labels;  // empty when the corpus is unlabeled
    std::size_t dropped_documents = 0;

    std::size_t doc_count() const { return docs.size(); }
    bool has_labels() const { return !labels.empty(); }
    // Dense count vector of one document over the vocabulary.
    std::vector<double> dense(std::size_t doc) const;
};

// Documents with zero in-vocabulary tokens are dropped (and counted); labels,
// when provided, must align with the input documents and are kept for the
// surviving ones.
BowCorpus vectorize(const std::vector<std::vector<std::string>>& docs, Vocabulary vocab,
                    const std::vector<std::string>* labels = nullptr);

// Document-frequency tables with whole-document windows.
struct CooccurrenceStats {
    std::size_t doc_count = 0;
    std::vector<std::size_t> df;                        // per word id
    std::vector<std::vector<std::uint32_t>> postings;   // per word: sorted doc ids

    std::size_t pair_df(std::size_t a, std::size_t b) const;
};

CooccurrenceStats cooccurrence_stats(const BowCorpus& corpus);

// --- raw corpus input: plain text (one doc per line) or JSON lines with
// fields "text" and optional "label" ---
struct RawCorpus {
    std::vector<std::string> texts;
    std::vector<std::string> labels;  // empty when absent
};

RawCorpus load_raw_corpus(const std::string& path);

// --- persisted formats ---
void save_vocabulary(const Vocabulary& vocab, const std::string& path);
Vocabulary load_vocabulary(const std::string& path);
// Sparse triplet file (doc id, word id, count) with an N/V header line.
void save_bow(const BowCorpus& corpus, const std::string& path);
BowCorpus load_bow(const std::string& path, Vocabulary vocab);
void save_labels(const std::vector<std::string>& labels, const std::string& path);
std::vector<std::string> load_labels(const std::string& path);

}  // namespace traco
