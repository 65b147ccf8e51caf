#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "traco/corpus.hpp"

using namespace traco;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    out << content;
}

}  // namespace

TEST_CASE("tokenize_document applies the pipeline in order") {
    StopwordSet stop{"the"};
    CHECK(tokenize_document("The CATS, 42 cats!", stop) ==
          std::vector<std::string>{"cats", "cats"});
    CHECK(tokenize_document("", stop).empty());
    CHECK(tokenize_document("ab a4c xyz", {}) == std::vector<std::string>{"xyz"});
}

TEST_CASE("preprocess is idempotent on clean token streams") {
    const StopwordSet& stop = default_stopwords();
    std::vector<std::string> raw{"Machine learning models learn; really!",
                                 " 3 topics, 14 words: hierarchy."};
    auto once = preprocess(raw, stop);
    std::vector<std::string> rejoined;
    for (const auto& doc : once) {
        std::string joined;
        for (const auto& tok : doc) {
            if (!joined.empty()) joined += ' ';
            joined += tok;
        }
        rejoined.push_back(joined);
    }
    CHECK(preprocess(rejoined, stop) == once);
}

TEST_CASE("build_vocab frequency filters") {
    std::vector<std::vector<std::string>> docs{{"aaa", "bbb"}, {"aaa", "ccc"}, {"aaa", "ddd"}};
    Vocabulary v1 = build_vocab(docs, 2, 1.0);
    CHECK(v1.size() == 1);
    CHECK(v1.word_to_id.count("aaa") == 1);

    Vocabulary v2 = build_vocab(docs, 1, 1.0);
    CHECK(v2.size() == 4);

    Vocabulary v3 = build_vocab(docs, 1, 0.5);
    CHECK(v3.size() == 3);
    CHECK(v3.word_to_id.count("aaa") == 0);

    CHECK_THROWS_AS(build_vocab(docs, 10, 1.0), ConfigError);
    CHECK_THROWS_AS(build_vocab(docs, 0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(build_vocab(docs, 1, 0.0), std::invalid_argument);
}

TEST_CASE("build_vocab orders ids by corpus frequency then lexicographically") {
    std::vector<std::vector<std::string>> docs{{"bbb", "bbb", "aaa"}, {"bbb", "aaa", "ccc"}};
    Vocabulary v = build_vocab(docs, 1, 1.0);
    CHECK(v.id_to_word == std::vector<std::string>{"bbb", "aaa", "ccc"});
}

TEST_CASE("vectorize counts and drop rules") {
    Vocabulary vocab = Vocabulary::from_words({"cats"});
    auto corpus = vectorize({{"cats", "cats"}}, vocab);
    CHECK(corpus.doc_count() == 1);
    CHECK(corpus.docs[0].counts ==
          std::vector<std::pair<std::size_t, std::uint32_t>>{{0, 2}});

    auto with_drop = vectorize({{"cats"}, {"dogs"}}, vocab);
    CHECK(with_drop.doc_count() == 1);
    CHECK(with_drop.dropped_documents == 1);

    std::vector<std::vector<std::string>> two{{"cats"}, {"cats", "cats", "cats"}};
    auto both = vectorize(two, vocab);
    CHECK(both.doc_count() == 2);
    CHECK(both.docs[0].total() == 1);
    CHECK(both.docs[1].total() == 3);

    CHECK_THROWS_AS(vectorize({{"dogs"}}, vocab), ConfigError);
}

TEST_CASE("bow counts match post-filter token counts") {
    const StopwordSet& stop = default_stopwords();
    std::vector<std::string> raw{"neural topics neural networks!", "sparse topics, 99 layers"};
    auto toks = preprocess(raw, stop);
    Vocabulary vocab = build_vocab(toks, 1, 1.0);
    auto corpus = vectorize(toks, vocab);
    for (std::size_t d = 0; d < corpus.doc_count(); ++d) {
        CHECK(corpus.docs[d].total() == toks[d].size());
    }
}

TEST_CASE("cooccurrence_stats document frequencies") {
    Vocabulary vocab = Vocabulary::from_words({"aaa", "bbb", "ccc"});
    std::vector<std::vector<std::string>> docs{
        {"aaa", "bbb"}, {"aaa", "bbb"}, {"ccc"}, {"ccc", "ccc"}};
    auto corpus = vectorize(docs, vocab);
    auto stats = cooccurrence_stats(corpus);
    CHECK(stats.doc_count == 4);
    CHECK(stats.df[0] == 2);
    CHECK(stats.df[1] == 2);
    CHECK(stats.pair_df(0, 1) == 2);
    CHECK(stats.pair_df(0, 2) == 0);

    // saturation: word in every doc
    auto all_corpus = vectorize({{"aaa"}, {"aaa"}, {"aaa"}}, Vocabulary::from_words({"aaa"}));
    auto all_stats = cooccurrence_stats(all_corpus);
    CHECK(all_stats.df[0] == 3);

    // pair-df(a,b) <= min(df(a), df(b)) on random-ish data
    for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = 0; b < 3; ++b) {
            CHECK(stats.pair_df(a, b) <= std::min(stats.df[a], stats.df[b]));
        }
    }
}

TEST_CASE("raw corpus loading: plain text and json lines") {
    const std::string txt = temp_path("traco_test_corpus.txt");
    write_file(txt, "first document here\nsecond document\n");
    RawCorpus plain = load_raw_corpus(txt);
    CHECK(plain.texts.size() == 2);
    CHECK(plain.labels.empty());

    const std::string jsonl = temp_path("traco_test_corpus.jsonl");
    write_file(jsonl,
               "{\"text\": \"alpha doc\", \"label\": \"one\"}\n"
               "{\"text\": \"beta doc\", \"label\": \"two\"}\n");
    RawCorpus labeled = load_raw_corpus(jsonl);
    CHECK(labeled.texts.size() == 2);
    CHECK(labeled.labels == std::vector<std::string>{"one", "two"});

    write_file(jsonl, "{\"no_text\": 1}\n");
    CHECK_THROWS_AS(load_raw_corpus(jsonl), SchemaError);
    CHECK_THROWS_AS(load_raw_corpus(temp_path("traco_missing_file.txt")), IoError);
    std::remove(txt.c_str());
    std::remove(jsonl.c_str());
}

TEST_CASE("vocabulary and bow round-trip through files") {
    const StopwordSet& stop = default_stopwords();
    std::vector<std::string> raw{"topic models research", "research topics", "models research"};
    auto toks = preprocess(raw, stop);
    Vocabulary vocab = build_vocab(toks, 1, 1.0);
    auto corpus = vectorize(toks, vocab);

    const std::string vpath = temp_path("traco_test_vocab.txt");
    const std::string bpath = temp_path("traco_test_bow.txt");
    save_vocabulary(corpus.vocab, vpath);
    save_bow(corpus, bpath);

    Vocabulary vloaded = load_vocabulary(vpath);
    CHECK(vloaded.id_to_word == corpus.vocab.id_to_word);
    CHECK(vloaded.hash() == corpus.vocab.hash());

    BowCorpus loaded = load_bow(bpath, vloaded);
    CHECK(loaded.doc_count() == corpus.doc_count());
    for (std::size_t d = 0; d < loaded.doc_count(); ++d) {
        CHECK(loaded.docs[d].counts == corpus.docs[d].counts);
    }

    write_file(bpath, "bogus header\n0 0 1\n");
    CHECK_THROWS_AS(load_bow(bpath, corpus.vocab), SchemaError);
    std::remove(vpath.c_str());
    std::remove(bpath.c_str());
}

TEST_CASE("labels round-trip") {
    const std::string path = temp_path("traco_test_labels.tsv");
    std::vector<std::string> labels{"sports", "science", "sports"};
    save_labels(labels, path);
    CHECK(load_labels(path) == labels);
    std::remove(path.c_str());
}

TEST_CASE("vocabulary ids are dense and bijective") {
    Vocabulary v = Vocabulary::from_words({"one", "two", "three"});
    for (std::size_t i = 0; i < v.size(); ++i) {
        CHECK(v.word_to_id.at(v.id_to_word[i]) == i);
    }
    CHECK_THROWS_AS(Vocabulary::from_words({"dup", "dup"}), ConfigError);
}
