#pragma once

#include <map>
#include <string>
#include <vector>

#include "traco/trainer.hpp"

namespace traco {

// Minimal declarative config reader: [section] headers, key = value lines,
// # comments. Values are strings ("..."), integers, floats, booleans, or
// arrays of integers. Keys are addressed as "section.key".
class ConfigFile {
public:
    static ConfigFile parse_text(const std::string& text);
    static ConfigFile parse_file(const std::string& path);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key);
    long long get_int(const std::string& key);
    std::uint64_t get_uint64(const std::string& key);
    double get_double(const std::string& key);
    bool get_bool(const std::string& key);
    std::vector<std::size_t> get_size_array(const std::string& key);

    template <typename T, typename Getter>
    T get_or(const std::string& key, T fallback, Getter getter) {
        if (!has(key)) return fallback;
        return static_cast<T>((this->*getter)(key));
    }

    // Throws ConfigError naming the first key that was never read.
    void reject_unknown_keys() const;

private:
    struct Entry {
        std::string raw;
        std::size_t line = 0;
        bool consumed = false;
    };
    std::map<std::string, Entry> entries_;

    const Entry& fetch(const std::string& key);
    Entry& require(const std::string& key);
};

// One declarative document covering corpus paths, the output directory, and
// every training knob. Flags provided on the command line override it.
struct RunConfig {
    std::string bow_path;
    std::string vocab_path;
    std::string labels_path;  // optional; empty means unlabeled
    std::string output_dir;
    TrainConfig train;

    static RunConfig from_text(const std::string& text);
    static RunConfig from_file(const std::string& path);

    // Full echo with defaults filled in, written for provenance.
    std::string to_toml() const;
    void validate() const;
};

}  // namespace traco
