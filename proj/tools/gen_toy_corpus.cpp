// Generates the bundled toy corpus: synthetic documents with a planted
// two-level structure of 4 parent themes x 3 child subthemes. Child blocks
// use disjoint vocabulary; children of one parent share that parent's word
// block, which is what ties them together statistically.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "traco/rng.hpp"

namespace {


constexpr std::size_t kParents = 4;
constexpr std::size_t kChildrenPerParent = 3;
constexpr std::size_t kChildWords = 20;
constexpr std::size_t kParentWords = 20;

const char* const kChildPrefixes[kParents * kChildrenPerParent] = {
    "bal", "cor", "dun", "fen", "gor", "hul", "jar", "kel", "mon", "nep", "pol", "qua"};
const char* const kParentPrefixes[kParents] = {"ryn", "sav", "tol", "urb"};
const char* const kSuffixes[] = {
    "ora",  "eth",   "ika",  "ulo",  "ami",  "ese",  "ivo",  "axa",
    "umi",  "ello",  "iry",  "osa",  "une",  "alis", "ombra", "edge",
    "aron", "iple",  "usta", "enzo", "apto", "idri", "ovan", "esk",
    "unda", "ilex",  "opra", "avel", "ight", "ernal"};

std::vector<std::string> block_words(const char* prefix, std::size_t count) {
    std::vector<std::string> words;
    for (std::size_t i = 0; i < count; ++i) {
        words.push_back(std::string(prefix) + kSuffixes[i]);
    }
    return words;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generate the planted-hierarchy toy corpus"};
    std::string output = "data/toy_corpus.jsonl";
    std::size_t docs = 500;
    std::uint64_t seed = 20240;
    std::size_t min_len = 50;
    std::size_t len_spread = 20;
    double child_frac = 0.55;
    app.add_option("--output", output, "Output JSONL path")->capture_default_str();
    app.add_option("--docs", docs, "Number of documents")->capture_default_str();
    app.add_option("--seed", seed, "Generator seed")->capture_default_str();
    app.add_option("--min-len", min_len, "Minimum document length")->capture_default_str();
    app.add_option("--len-spread", len_spread, "Length spread above the minimum")->capture_default_str();
    app.add_option("--child-frac", child_frac, "Fraction of tokens from the child block")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    std::vector<std::vector<std::string>> child_blocks;
    for (std::size_t c = 0; c < kParents * kChildrenPerParent; ++c) {
        child_blocks.push_back(block_words(kChildPrefixes[c], kChildWords));
    }
    std::vector<std::vector<std::string>> parent_blocks;
    for (std::size_t p = 0; p < kParents; ++p) {
        parent_blocks.push_back(block_words(kParentPrefixes[p], kParentWords));
    }

    traco::Rng rng(seed);
    std::ofstream out(output, std::ios::trunc);
    if (!out) {
        std::cerr << "cannot write " << output << "\n";
        return 1;
    }
    for (std::size_t d = 0; d < docs; ++d) {
        const std::size_t child = d % (kParents * kChildrenPerParent);
        const std::size_t parent = child / kChildrenPerParent;
        const std::size_t len = min_len + rng.below(len_spread);
        std::string text;
        for (std::size_t t = 0; t < len; ++t) {
            const bool from_child = rng.uniform01() < child_frac;
            const auto& block = from_child ? child_blocks[child] : parent_blocks[parent];
            if (!text.empty()) text += ' ';
            text += block[rng.below(block.size())];
        }
        nlohmann::ordered_json line;
        line["text"] = text;
        line["label"] = std::string("theme_") + kParentPrefixes[parent];
        out << line.dump() << "\n";
    }
    std::cout << "wrote " << docs << " documents to " << output << "\n";
    return 0;
}
