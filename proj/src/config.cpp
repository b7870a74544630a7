/*
 * Copyright 2026 The cblab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cbl/config.hpp"

#include <algorithm>
#include <cerrno>
#include <climits>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace cbl {

namespace {

[[noreturn]] void fail(const std::string& message) {
    throw std::runtime_error("config: " + message);
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

struct Value {
    bool is_list = false;
    bool is_string = false;
    std::string text;            // scalar token or string content
    std::vector<Value> items;    // list elements
};

Value parse_scalar(const std::string& token, const std::string& path) {
    Value v;
    std::string t = trim(token);
    if (t.empty()) fail("empty value at '" + path + "'");
    if (t.front() == '"') {
        if (t.size() < 2 || t.back() != '"') fail("unterminated string at '" + path + "'");
        v.is_string = true;
        v.text = t.substr(1, t.size() - 2);
    } else {
        v.text = t;
    }
    return v;
}

Value parse_value(const std::string& token, const std::string& path) {
    const std::string t = trim(token);
    if (t.empty()) fail("empty value at '" + path + "'");
    if (t.front() != '[') return parse_scalar(t, path);

    if (t.back() != ']') fail("unterminated list at '" + path + "'");
    Value v;
    v.is_list = true;
    const std::string inner = t.substr(1, t.size() - 2);
    std::string current;
    bool in_string = false;
    for (char c : inner) {
        if (c == '"') in_string = !in_string;
        if (c == ',' && !in_string) {
            v.items.push_back(parse_scalar(current, path));
            current.clear();
        } else {
            current += c;
        }
    }
    if (!trim(current).empty() || !v.items.empty()) {
        if (trim(current).empty()) fail("trailing comma in list at '" + path + "'");
        v.items.push_back(parse_scalar(current, path));
    }
    return v;
}

/// Strict key-value store: every stored key must be consumed by the typed
/// accessors, and every access must find its key.
class Document {
  public:
    static Document parse(const std::string& text) {
        Document doc;
        std::istringstream in(text);
        std::string line;
        std::string section;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            // Strip comments outside quotes.
            bool in_string = false;
            for (std::size_t i = 0; i < line.size(); ++i) {
                if (line[i] == '"') in_string = !in_string;
                if (line[i] == '#' && !in_string) {
                    line = line.substr(0, i);
                    break;
                }
            }
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    fail("malformed section header on line " + std::to_string(line_no));
                section = trim(line.substr(1, line.size() - 2));
                if (section.empty())
                    fail("empty section name on line " + std::to_string(line_no));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                fail("expected 'key = value' on line " + std::to_string(line_no));
            const std::string key = trim(line.substr(0, eq));
            if (key.empty()) fail("empty key on line " + std::to_string(line_no));
            const std::string path = section.empty() ? key : section + "." + key;
            if (doc.values_.count(path)) fail("duplicate key '" + path + "'");
            doc.values_.emplace(path, parse_value(line.substr(eq + 1), path));
        }
        return doc;
    }

    const Value& get(const std::string& path) {
        const auto it = values_.find(path);
        if (it == values_.end()) fail("missing required key '" + path + "'");
        consumed_.insert(path);
        return it->second;
    }

    double get_f64(const std::string& path) { return to_f64(get(path), path); }

    long get_i64(const std::string& path) {
        const Value& v = get(path);
        if (v.is_list || v.is_string) fail("expected integer at '" + path + "'");
        errno = 0;
        char* end = nullptr;
        const long out = std::strtol(v.text.c_str(), &end, 10);
        if (errno != 0 || end == v.text.c_str() || *end != '\0')
            fail("expected integer at '" + path + "', got '" + v.text + "'");
        return out;
    }

    std::uint64_t get_u64(const std::string& path) {
        const Value& v = get(path);
        if (v.is_list || v.is_string) fail("expected unsigned integer at '" + path + "'");
        errno = 0;
        char* end = nullptr;
        const std::uint64_t out = std::strtoull(v.text.c_str(), &end, 10);
        if (errno != 0 || end == v.text.c_str() || *end != '\0' || v.text.front() == '-')
            fail("expected unsigned integer at '" + path + "', got '" + v.text + "'");
        return out;
    }

    std::string get_string(const std::string& path) {
        const Value& v = get(path);
        if (!v.is_string) fail("expected quoted string at '" + path + "'");
        return v.text;
    }

    std::vector<double> get_f64_list(const std::string& path) {
        const Value& v = get(path);
        if (!v.is_list) fail("expected list at '" + path + "'");
        std::vector<double> out;
        for (const auto& item : v.items) out.push_back(to_f64(item, path));
        return out;
    }

    std::vector<std::string> get_string_list(const std::string& path) {
        const Value& v = get(path);
        if (!v.is_list) fail("expected list at '" + path + "'");
        std::vector<std::string> out;
        for (const auto& item : v.items) {
            if (!item.is_string) fail("expected quoted strings in list at '" + path + "'");
            out.push_back(item.text);
        }
        return out;
    }

    /// "uniform" or an explicit probability list.
    Eigen::VectorXd get_rho(const std::string& path) {
        const Value& v = get(path);
        if (v.is_string) {
            if (v.text != "uniform")
                fail("expected \"uniform\" or a probability list at '" + path + "'");
            return {};
        }
        if (!v.is_list) fail("expected \"uniform\" or a probability list at '" + path + "'");
        Eigen::VectorXd rho(static_cast<Eigen::Index>(v.items.size()));
        for (std::size_t i = 0; i < v.items.size(); ++i) rho[i] = to_f64(v.items[i], path);
        return rho;
    }

    void ensure_all_consumed() const {
        for (const auto& [path, value] : values_)
            if (!consumed_.count(path)) fail("unknown key '" + path + "'");
    }

  private:
    static double to_f64(const Value& v, const std::string& path) {
        if (v.is_list || v.is_string) fail("expected number at '" + path + "'");
        errno = 0;
        char* end = nullptr;
        const double out = std::strtod(v.text.c_str(), &end);
        if (errno != 0 || end == v.text.c_str() || *end != '\0')
            fail("expected number at '" + path + "', got '" + v.text + "'");
        return out;
    }

    std::map<std::string, Value> values_;
    std::set<std::string> consumed_;
};

int checked_int(long v, const std::string& what) {
    if (v < INT_MIN || v > INT_MAX)
        fail(what + " out of range");
    return static_cast<int>(v);
}

}  // namespace

ExperimentConfig ExperimentConfig::parse_string(const std::string& text) {
    Document doc = Document::parse(text);
    ExperimentConfig cfg;

    cfg.seed = doc.get_u64("seed");

    cfg.model.n_classes = checked_int(doc.get_i64("model.n_classes"), "model.n_classes");
    cfg.model.input_dim = checked_int(doc.get_i64("model.input_dim"), "model.input_dim");
    cfg.model.spread = doc.get_f64("model.spread");
    cfg.model.rho = doc.get_rho("model.rho");
    if (cfg.model.rho.size() != 0 && cfg.model.rho.size() != cfg.model.n_classes)
        fail("model.rho length must equal model.n_classes");

    cfg.dataset.n = checked_int(doc.get_i64("dataset.n"), "dataset.n");
    cfg.dataset.augment_noise = doc.get_f64("dataset.augment_noise");
    cfg.dataset.min_delta = doc.get_f64("dataset.min_delta");

    cfg.encoder.m = checked_int(doc.get_i64("encoder.m"), "encoder.m");
    cfg.encoder.L = checked_int(doc.get_i64("encoder.L"), "encoder.L");
    cfg.encoder.d = checked_int(doc.get_i64("encoder.d"), "encoder.d");

    cfg.train.learning_rate = doc.get_f64("train.learning_rate");
    cfg.train.max_steps = checked_int(doc.get_i64("train.max_steps"), "train.max_steps");
    cfg.train.target_loss = doc.get_f64("train.target_loss");
    cfg.train.eta_monitor = doc.get_f64("train.eta_monitor");
    cfg.train.norm_upper_monitor = doc.get_f64("train.norm_upper_monitor");
    cfg.train.eval_every = checked_int(doc.get_i64("train.eval_every"), "train.eval_every");

    cfg.verify.checks = doc.get_string_list("verify.checks");
    for (double v : doc.get_f64_list("verify.n_list"))
        cfg.verify.n_list.push_back(static_cast<long>(v));
    for (double v : doc.get_f64_list("verify.k_list"))
        cfg.verify.k_list.push_back(static_cast<int>(v));
    cfg.verify.n_mc = doc.get_i64("verify.n_mc");
    cfg.verify.n_per_class = doc.get_i64("verify.n_per_class");
    cfg.verify.n_tasks = checked_int(doc.get_i64("verify.n_tasks"), "verify.n_tasks");
    cfg.verify.n_train = doc.get_i64("verify.n_train");
    cfg.verify.opt_steps = checked_int(doc.get_i64("verify.opt_steps"), "verify.opt_steps");

    cfg.output.directory = doc.get_string("output.directory");
    cfg.output.formats = doc.get_string_list("output.formats");

    doc.ensure_all_consumed();
    return cfg;
}

ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_string(buffer.str());
}

}  // namespace cbl
