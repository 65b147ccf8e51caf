#include "traco/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace traco {

StopwordSet load_stopwords(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read stopword file: " + path);
    StopwordSet words;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty() && line[0] != '#') words.insert(line);
    }
    return words;
}

std::vector<std::string> tokenize_document(const std::string& text,
                                           const StopwordSet& stopwords) {
    std::string cleaned;
    cleaned.reserve(text.size());
    for (unsigned char c : text) {
        if (std::ispunct(c)) {
            cleaned.push_back(' ');
        } else {
            cleaned.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < cleaned.size()) {
        while (i < cleaned.size() && std::isspace(static_cast<unsigned char>(cleaned[i]))) ++i;
        std::size_t start = i;
        while (i < cleaned.size() && !std::isspace(static_cast<unsigned char>(cleaned[i]))) ++i;
        if (i == start) continue;
        std::string tok = cleaned.substr(start, i - start);
        bool has_digit = false;
        for (unsigned char c : tok) {
            if (std::isdigit(c)) {
                has_digit = true;
                break;
            }
        }
        if (has_digit) continue;
        if (tok.size() < 3) continue;
        if (stopwords.count(tok)) continue;
        tokens.push_back(std::move(tok));
    }
    return tokens;
}

std::vector<std::vector<std::string>> preprocess(const std::vector<std::string>& raw_documents,
                                                 const StopwordSet& stopwords) {
    std::vector<std::vector<std::string>> out;
    out.reserve(raw_documents.size());
    for (const std::string& doc : raw_documents) {
        out.push_back(tokenize_document(doc, stopwords));
    }
    return out;
}

std::uint64_t Vocabulary::hash() const {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    auto mix = [&h](unsigned char c) {
        h ^= c;
        h *= 1099511628211ull;
    };
    for (const std::string& w : id_to_word) {
        for (unsigned char c : w) mix(c);
        mix('\n');
    }
    return h;
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words) {
    Vocabulary v;
    v.id_to_word = std::move(words);
    for (std::size_t i = 0; i < v.id_to_word.size(); ++i) {
        if (!v.word_to_id.emplace(v.id_to_word[i], i).second) {
            throw ConfigError("vocabulary: duplicate word " + v.id_to_word[i]);
        }
    }
    return v;
}

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& docs,
                       std::size_t min_doc_freq, double max_doc_frac) {
    if (min_doc_freq < 1) throw std::invalid_argument("build_vocab: min_doc_freq must be >= 1");
    if (!(max_doc_frac > 0.0) || max_doc_frac > 1.0) {
        throw std::invalid_argument("build_vocab: max_doc_frac must be in (0, 1]");
    }
    std::unordered_map<std::string, std::size_t> doc_freq;
    std::unordered_map<std::string, std::uint64_t> total_freq;
    for (const auto& doc : docs) {
        std::unordered_set<std::string> seen;
        for (const std::string& tok : doc) {
            ++total_freq[tok];
            if (seen.insert(tok).second) ++doc_freq[tok];
        }
    }
    const double max_docs = max_doc_frac * static_cast<double>(docs.size());
    std::vector<std::string> kept;
    for (const auto& [word, df] : doc_freq) {
        if (df >= min_doc_freq && static_cast<double>(df) <= max_docs) kept.push_back(word);
    }
    if (kept.empty()) {
        throw ConfigError("build_vocab: no words pass the frequency filters");
    }
    std::sort(kept.begin(), kept.end(), [&](const std::string& a, const std::string& b) {
        const std::uint64_t fa = total_freq[a], fb = total_freq[b];
        if (fa != fb) return fa > fb;
        return a < b;
    });
    return Vocabulary::from_words(std::move(kept));
}

std::uint64_t BowDocument::total() const {
    std::uint64_t t = 0;
    for (const auto& [id, c] : counts) t += c;
    return t;
}

std::vector<double> BowCorpus::dense(std::size_t doc) const {
    std::vector<double> x(vocab.size(), 0.0);
    for (const auto& [id, c] : docs[doc].counts) x[id] = static_cast<double>(c);
    return x;
}

BowCorpus vectorize(const std::vector<std::vector<std::string>>& docs, Vocabulary vocab,
                    const std::vector<std::string>* labels) {
    if (vocab.size() == 0) throw ConfigError("vectorize: empty vocabulary");
    if (labels && !labels->empty() && labels->size() != docs.size()) {
        throw ShapeError("vectorize: label count does not match document count");
    }
    BowCorpus corpus;
    corpus.vocab = std::move(vocab);
    const bool with_labels = labels && !labels->empty();
    for (std::size_t d = 0; d < docs.size(); ++d) {
        std::unordered_map<std::size_t, std::uint32_t> counts;
        for (const std::string& tok : docs[d]) {
            auto it = corpus.vocab.word_to_id.find(tok);
            if (it != corpus.vocab.word_to_id.end()) ++counts[it->second];
        }
        if (counts.empty()) {
            ++corpus.dropped_documents;
            continue;
        }
        BowDocument doc;
        doc.counts.assign(counts.begin(), counts.end());
        std::sort(doc.counts.begin(), doc.counts.end());
        corpus.docs.push_back(std::move(doc));
        if (with_labels) corpus.labels.push_back((*labels)[d]);
    }
    if (corpus.docs.empty()) {
        throw ConfigError("vectorize: every document was dropped (no in-vocabulary tokens)");
    }
    return corpus;
}

std::size_t CooccurrenceStats::pair_df(std::size_t a, std::size_t b) const {
    if (a == b) return df[a];
    const auto& pa = postings[a];
    const auto& pb = postings[b];
    std::size_t i = 0, j = 0, common = 0;
    while (i < pa.size() && j < pb.size()) {
        if (pa[i] == pb[j]) {
            ++common;
            ++i;
            ++j;
        } else if (pa[i] < pb[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    return common;
}

CooccurrenceStats cooccurrence_stats(const BowCorpus& corpus) {
    if (corpus.docs.empty()) throw std::invalid_argument("cooccurrence_stats: empty corpus");
    CooccurrenceStats stats;
    stats.doc_count = corpus.doc_count();
    stats.df.assign(corpus.vocab.size(), 0);
    stats.postings.assign(corpus.vocab.size(), {});
    for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
        for (const auto& [id, c] : corpus.docs[d].counts) {
            ++stats.df[id];
            stats.postings[id].push_back(static_cast<std::uint32_t>(d));
        }
    }
    return stats;
}

RawCorpus load_raw_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read corpus file: " + path);
    RawCorpus raw;
    std::string line;
    bool json_mode = false;
    bool decided = false;
    std::size_t line_no = 0;
    bool any_label = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!decided) {
            std::size_t first = line.find_first_not_of(" \t");
            if (first != std::string::npos) {
                json_mode = line[first] == '{';
                decided = true;
            }
        }
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        if (json_mode) {
            nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object() || !j.contains("text") ||
                !j["text"].is_string()) {
                throw SchemaError("corpus line " + std::to_string(line_no) +
                                  ": expected {\"text\": ..., \"label\": optional}");
            }
            raw.texts.push_back(j["text"].get<std::string>());
            if (j.contains("label") && j["label"].is_string()) {
                raw.labels.resize(raw.texts.size() - 1, "");
                raw.labels.push_back(j["label"].get<std::string>());
                any_label = true;
            } else if (any_label) {
                raw.labels.push_back("");
            }
        } else {
            raw.texts.push_back(line);
        }
    }
    if (!any_label) raw.labels.clear();
    if (any_label) raw.labels.resize(raw.texts.size(), "");
    return raw;
}

void save_vocabulary(const Vocabulary& vocab, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write vocabulary file: " + path);
    for (const std::string& w : vocab.id_to_word) out << w << '\n';
    if (!out) throw IoError("failed writing vocabulary file: " + path);
}

Vocabulary load_vocabulary(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read vocabulary file: " + path);
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) words.push_back(line);
    }
    if (words.empty()) throw SchemaError("vocabulary file is empty: " + path);
    return Vocabulary::from_words(std::move(words));
}

void save_bow(const BowCorpus& corpus, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write bow file: " + path);
    out << "# traco-bow v1 N=" << corpus.doc_count() << " V=" << corpus.vocab.size() << '\n';
    for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
        for (const auto& [id, c] : corpus.docs[d].counts) {
            out << d << ' ' << id << ' ' << c << '\n';
        }
    }
    if (!out) throw IoError("failed writing bow file: " + path);
}

BowCorpus load_bow(const std::string& path, Vocabulary vocab) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read bow file: " + path);
    std::string header;
    if (!std::getline(in, header)) throw SchemaError("bow file is empty: " + path);
    std::size_t n = 0, v = 0;
    if (std::sscanf(header.c_str(), "# traco-bow v1 N=%zu V=%zu", &n, &v) != 2) {
        throw SchemaError("bow file has an unrecognized header: " + header);
    }
    if (v != vocab.size()) {
        throw SchemaError("bow file vocabulary size " + std::to_string(v) +
                          " does not match loaded vocabulary " + std::to_string(vocab.size()));
    }
    BowCorpus corpus;
    corpus.vocab = std::move(vocab);
    corpus.docs.resize(n);
    std::size_t d, w;
    std::uint32_t c;
    while (in >> d >> w >> c) {
        if (d >= n || w >= v) throw SchemaError("bow file entry out of range");
        corpus.docs[d].counts.emplace_back(w, c);
    }
    for (auto& doc : corpus.docs) {
        if (doc.counts.empty()) {
            throw SchemaError("bow file contains an empty document");
        }
        std::sort(doc.counts.begin(), doc.counts.end());
    }
    return corpus;
}

void save_labels(const std::vector<std::string>& labels, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write label file: " + path);
    for (std::size_t i = 0; i < labels.size(); ++i) out << i << '\t' << labels[i] << '\n';
    if (!out) throw IoError("failed writing label file: " + path);
}

std::vector<std::string> load_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read label file: " + path);
    std::vector<std::string> labels;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos) throw SchemaError("label file line has no tab: " + line);
        labels.push_back(line.substr(tab + 1));
    }
    return labels;
}

}  // namespace traco
