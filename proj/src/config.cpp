#include "traco/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace traco {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// Strips a trailing comment, respecting double quotes.
std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_string = !in_string;
        if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

}  // namespace

ConfigFile ConfigFile::parse_text(const std::string& text) {
    ConfigFile cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": unterminated section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) {
                throw ConfigError("config line " + std::to_string(line_no) + ": empty section");
            }
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key or value");
        }
        const std::string full = section.empty() ? key : section + "." + key;
        if (!cfg.entries_.emplace(full, Entry{value, line_no, false}).second) {
            throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key " + full);
        }
    }
    return cfg;
}

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str());
}

bool ConfigFile::has(const std::string& key) const { return entries_.count(key) != 0; }

ConfigFile::Entry& ConfigFile::require(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("config: missing required key " + key);
    it->second.consumed = true;
    return it->second;
}

std::string ConfigFile::get_string(const std::string& key) {
    const Entry& e = require(key);
    const std::string& raw = e.raw;
    if (raw.size() < 2 || raw.front() != '"' || raw.back() != '"') {
        throw ConfigError("config key " + key + ": expected a quoted string");
    }
    return raw.substr(1, raw.size() - 2);
}

long long ConfigFile::get_int(const std::string& key) {
    const Entry& e = require(key);
    char* end = nullptr;
    const long long v = std::strtoll(e.raw.c_str(), &end, 10);
    if (end == e.raw.c_str() || *end != '\0') {
        throw ConfigError("config key " + key + ": expected an integer");
    }
    return v;
}

std::uint64_t ConfigFile::get_uint64(const std::string& key) {
    const Entry& e = require(key);
    char* end = nullptr;
    const unsigned long long v = std::strtoull(e.raw.c_str(), &end, 10);
    if (end == e.raw.c_str() || *end != '\0') {
        throw ConfigError("config key " + key + ": expected an unsigned integer");
    }
    return v;
}

double ConfigFile::get_double(const std::string& key) {
    const Entry& e = require(key);
    char* end = nullptr;
    const double v = std::strtod(e.raw.c_str(), &end);
    if (end == e.raw.c_str() || *end != '\0') {
        throw ConfigError("config key " + key + ": expected a number");
    }
    return v;
}

bool ConfigFile::get_bool(const std::string& key) {
    const Entry& e = require(key);
    if (e.raw == "true") return true;
    if (e.raw == "false") return false;
    throw ConfigError("config key " + key + ": expected true or false");
}

std::vector<std::size_t> ConfigFile::get_size_array(const std::string& key) {
    const Entry& e = require(key);
    const std::string& raw = e.raw;
    if (raw.size() < 2 || raw.front() != '[' || raw.back() != ']') {
        throw ConfigError("config key " + key + ": expected [n, n, ...]");
    }
    std::vector<std::size_t> out;
    std::string body = raw.substr(1, raw.size() - 2);
    std::istringstream in(body);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        char* end = nullptr;
        const long long v = std::strtoll(item.c_str(), &end, 10);
        if (end == item.c_str() || *end != '\0' || v < 0) {
            throw ConfigError("config key " + key + ": expected nonnegative integers");
        }
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw ConfigError("config key " + key + ": empty array");
    return out;
}

void ConfigFile::reject_unknown_keys() const {
    for (const auto& [key, entry] : entries_) {
        if (!entry.consumed) {
            throw ConfigError("config line " + std::to_string(entry.line) + ": unknown key " +
                              key);
        }
    }
}

RunConfig RunConfig::from_text(const std::string& text) {
    ConfigFile f = ConfigFile::parse_text(text);
    RunConfig rc;
    rc.bow_path = f.get_string("corpus.bow");
    rc.vocab_path = f.get_string("corpus.vocab");
    if (f.has("corpus.labels")) rc.labels_path = f.get_string("corpus.labels");
    rc.output_dir = f.get_string("output.dir");

    TrainConfig& t = rc.train;
    t.hierarchy.topics_per_level = f.get_size_array("hierarchy.topics");
    if (f.has("hierarchy.embedding_dim"))
        t.hierarchy.embedding_dim = static_cast<std::size_t>(f.get_int("hierarchy.embedding_dim"));
    if (f.has("hierarchy.encoder_hidden"))
        t.hierarchy.encoder_hidden =
            static_cast<std::size_t>(f.get_int("hierarchy.encoder_hidden"));
    if (f.has("hierarchy.tau")) t.hierarchy.tau = f.get_double("hierarchy.tau");
    if (f.has("hierarchy.n_top"))
        t.hierarchy.n_top = static_cast<std::size_t>(f.get_int("hierarchy.n_top"));
    if (f.has("hierarchy.lambda_b")) t.hierarchy.lambda_b = f.get_double("hierarchy.lambda_b");
    if (f.has("hierarchy.init_std")) t.hierarchy.init_std = f.get_double("hierarchy.init_std");

    if (f.has("sinkhorn.epsilon")) t.sinkhorn.epsilon = f.get_double("sinkhorn.epsilon");
    if (f.has("sinkhorn.max_iterations"))
        t.sinkhorn.max_iterations = static_cast<int>(f.get_int("sinkhorn.max_iterations"));
    if (f.has("sinkhorn.stop_tolerance"))
        t.sinkhorn.stop_tolerance = f.get_double("sinkhorn.stop_tolerance");
    if (f.has("sinkhorn.differentiable")) {
        const std::string mode = f.get_string("sinkhorn.differentiable");
        if (mode == "unrolled") {
            t.sinkhorn.unrolled = true;
        } else if (mode == "detached") {
            t.sinkhorn.unrolled = false;
        } else {
            throw ConfigError("sinkhorn.differentiable must be \"unrolled\" or \"detached\"");
        }
    }

    if (f.has("train.lambda_tpd")) t.lambda_tpd = f.get_double("train.lambda_tpd");
    if (f.has("train.learning_rate")) t.learning_rate = f.get_double("train.learning_rate");
    if (f.has("train.epochs")) t.epochs = static_cast<int>(f.get_int("train.epochs"));
    if (f.has("train.batch_size")) t.batch_size = static_cast<int>(f.get_int("train.batch_size"));
    if (f.has("train.seed")) t.seed = f.get_uint64("train.seed");
    if (f.has("train.disable_tpd")) t.disable_tpd = f.get_bool("train.disable_tpd");
    if (f.has("train.disable_cdd")) t.disable_cdd = f.get_bool("train.disable_cdd");
    if (f.has("train.clip_gradients")) t.clip_gradients = f.get_bool("train.clip_gradients");
    if (f.has("train.clip_norm")) t.clip_norm = f.get_double("train.clip_norm");
    if (f.has("train.learnable_s")) t.learnable_s = f.get_bool("train.learnable_s");
    if (f.has("train.bias_refresh_interval"))
        t.bias_refresh_interval = static_cast<int>(f.get_int("train.bias_refresh_interval"));
    if (f.has("train.kl_anneal_epochs"))
        t.kl_anneal_epochs = static_cast<int>(f.get_int("train.kl_anneal_epochs"));

    f.reject_unknown_keys();
    rc.validate();
    return rc;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str());
}

void RunConfig::validate() const {
    if (bow_path.empty()) throw ConfigError("config: corpus.bow is required");
    if (vocab_path.empty()) throw ConfigError("config: corpus.vocab is required");
    if (output_dir.empty()) throw ConfigError("config: output.dir is required");
    train.validate();
}

std::string RunConfig::to_toml() const {
    auto num = [](double v) { return nlohmann::json(v).dump(); };
    std::ostringstream out;
    out << "[corpus]\n";
    out << "bow = \"" << bow_path << "\"\n";
    out << "vocab = \"" << vocab_path << "\"\n";
    if (!labels_path.empty()) out << "labels = \"" << labels_path << "\"\n";
    out << "\n[output]\n";
    out << "dir = \"" << output_dir << "\"\n";
    out << "\n[hierarchy]\n";
    out << "topics = [";
    for (std::size_t i = 0; i < train.hierarchy.topics_per_level.size(); ++i) {
        if (i) out << ", ";
        out << train.hierarchy.topics_per_level[i];
    }
    out << "]\n";
    out << "embedding_dim = " << train.hierarchy.embedding_dim << "\n";
    out << "encoder_hidden = " << train.hierarchy.encoder_hidden << "\n";
    out << "tau = " << num(train.hierarchy.tau) << "\n";
    out << "n_top = " << train.hierarchy.n_top << "\n";
    out << "lambda_b = " << num(train.hierarchy.lambda_b) << "\n";
    out << "init_std = " << num(train.hierarchy.init_std) << "\n";
    out << "\n[sinkhorn]\n";
    out << "epsilon = " << num(train.sinkhorn.epsilon) << "\n";
    out << "max_iterations = " << train.sinkhorn.max_iterations << "\n";
    out << "stop_tolerance = " << num(train.sinkhorn.stop_tolerance) << "\n";
    out << "differentiable = \"" << (train.sinkhorn.unrolled ? "unrolled" : "detached")
        << "\"\n";
    out << "\n[train]\n";
    out << "lambda_tpd = " << num(train.lambda_tpd) << "\n";
    out << "learning_rate = " << num(train.learning_rate) << "\n";
    out << "epochs = " << train.epochs << "\n";
    out << "batch_size = " << train.batch_size << "\n";
    out << "seed = " << train.seed << "\n";
    out << "disable_tpd = " << (train.disable_tpd ? "true" : "false") << "\n";
    out << "disable_cdd = " << (train.disable_cdd ? "true" : "false") << "\n";
    out << "clip_gradients = " << (train.clip_gradients ? "true" : "false") << "\n";
    out << "clip_norm = " << num(train.clip_norm) << "\n";
    out << "learnable_s = " << (train.learnable_s ? "true" : "false") << "\n";
    out << "bias_refresh_interval = " << train.bias_refresh_interval << "\n";
    out << "kl_anneal_epochs = " << train.kl_anneal_epochs << "\n";
    return out.str();
}

}  // namespace traco
