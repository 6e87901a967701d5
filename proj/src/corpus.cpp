#include "lattn/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "lattn/error.hpp"
#include "lattn/rng.hpp"

namespace lattn {

namespace {

constexpr const char* kPunct = ".,!?\"':;)(";

std::string line_tag(const std::string& path, size_t line_no) {
    return path + ":" + std::to_string(line_no) + ": ";
}

std::string channel_prefix(const std::string& function_label) {
    return function_label.substr(0, function_label.find('.'));
}

std::string require_string_field(const nlohmann::json& obj, const char* field,
                                 const std::string& where) {
    auto it = obj.find(field);
    if (it == obj.end()) {
        throw ValidationError(where + "missing field " + field);
    }
    if (!it->is_string()) {
        throw ValidationError(where + "field " + field + " must be a string");
    }
    return it->get<std::string>();
}

void check_side(const std::string& channel, const std::string& function, const char* side,
                const std::string& where) {
    if (function.find('.') == std::string::npos || channel_prefix(function) != channel) {
        throw ValidationError(where + std::string(side) + "_function '" + function +
                              "' does not belong to " + side + "_channel '" + channel + "'");
    }
}

// Shared sampler: keeps recipes whose trigger function is NOT in sampled_fns,
// draws min(per, available) without replacement for each function that is,
// then shuffles the combined result. Both skew directions reduce to this.
std::vector<Recipe> sample_split(const std::vector<Recipe>& dataset,
                                 const std::set<std::string>& sampled_fns, size_t per,
                                 uint64_t seed) {
    std::vector<Recipe> out;
    std::map<std::string, std::vector<size_t>> groups;
    for (size_t i = 0; i < dataset.size(); ++i) {
        if (sampled_fns.count(dataset[i].trigger_function)) {
            groups[dataset[i].trigger_function].push_back(i);
        } else {
            out.push_back(dataset[i]);
        }
    }
    Rng sampler = Rng::substream(seed, "sampling");
    for (auto& [fn, idx] : groups) {
        const size_t take = std::min(per, idx.size());
        for (size_t i = 0; i < take; ++i) {
            const size_t j = i + static_cast<size_t>(sampler.below(idx.size() - i));
            std::swap(idx[i], idx[j]);
            out.push_back(dataset[idx[i]]);
        }
    }
    Rng shuffler = Rng::substream(seed, "shuffle");
    shuffler.shuffle(out);
    return out;
}

}  // namespace

const std::string& LabelSpace::channel_of(int function_id) const {
    if (function_id < 0 || static_cast<size_t>(function_id) >= functions.size()) {
        throw ValidationError("unknown function id " + std::to_string(function_id));
    }
    return channels[channel_ids[function_id]];
}

const std::string& target_function(const Recipe& r, Target t) {
    return t == Target::kTriggerFunction ? r.trigger_function : r.action_function;
}

const std::string& target_channel(const Recipe& r, Target t) {
    return t == Target::kTriggerFunction ? r.trigger_channel : r.action_channel;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    };
    for (const char ch : text) {
        const unsigned char c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            flush();
        } else if (std::strchr(kPunct, ch) != nullptr && ch != '\0') {
            flush();
            out.emplace_back(1, ch);
        } else {
            cur.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    flush();
    return out;
}

Vocab build_vocab(const std::vector<Recipe>& corpus, size_t max_words) {
    std::unordered_map<std::string, size_t> counts;
    for (const auto& r : corpus) {
        for (const auto& tok : tokenize(r.description)) ++counts[tok];
    }
    std::vector<std::pair<std::string, size_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (ranked.size() > max_words) ranked.resize(max_words);

    Vocab v;
    v.tokens.reserve(ranked.size());
    for (const auto& [tok, n] : ranked) {
        v.ids.emplace(tok, static_cast<int>(v.tokens.size()) + 2);
        v.tokens.push_back(tok);
    }
    return v;
}

std::vector<int> encode(const std::vector<std::string>& tokens, const Vocab& vocab,
                        size_t J) {
    if (J < 2) throw ConfigError("encode: sequence length must be at least 2");
    std::vector<int> ids;
    ids.reserve(std::max(J, tokens.size()));
    for (const auto& tok : tokens) ids.push_back(vocab.id_of(tok));
    if (ids.size() <= J) {
        ids.resize(J, Vocab::kPadId);
        return ids;
    }
    const size_t head = (J % 2 == 0) ? J / 2 : (J - 1) / 2;
    const size_t tail = J - head;
    std::vector<int> out(ids.begin(), ids.begin() + static_cast<long>(head));
    out.insert(out.end(), ids.end() - static_cast<long>(tail), ids.end());
    return out;
}

std::vector<std::string> encode_tokens_view(const std::vector<std::string>& tokens, size_t J) {
    if (J < 2) throw ConfigError("encode: sequence length must be at least 2");
    std::vector<std::string> out;
    if (tokens.size() <= J) {
        out = tokens;
        out.resize(J, "<PAD>");
        return out;
    }
    const size_t head = (J % 2 == 0) ? J / 2 : (J - 1) / 2;
    const size_t tail = J - head;
    out.assign(tokens.begin(), tokens.begin() + static_cast<long>(head));
    out.insert(out.end(), tokens.end() - static_cast<long>(tail), tokens.end());
    return out;
}

std::vector<Recipe> load_recipes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open recipe file: " + path);

    std::vector<Recipe> recipes;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = line_tag(path, line_no);

        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(where + "invalid JSON: " + e.what());
        }
        if (!obj.is_object()) throw ValidationError(where + "expected a JSON object");

        Recipe r;
        r.description = require_string_field(obj, "description", where);
        r.trigger_channel = require_string_field(obj, "trigger_channel", where);
        r.trigger_function = require_string_field(obj, "trigger_function", where);
        r.action_channel = require_string_field(obj, "action_channel", where);
        r.action_function = require_string_field(obj, "action_function", where);
        if (r.description.empty()) {
            throw ValidationError(where + "field description must be non-empty");
        }
        check_side(r.trigger_channel, r.trigger_function, "trigger", where);
        check_side(r.action_channel, r.action_function, "action", where);

        if (auto it = obj.find("args"); it != obj.end()) {
            if (!it->is_object()) throw ValidationError(where + "field args must be an object");
            for (const auto& [slot, values] : it->items()) {
                if (slot != "trigger" && slot != "action") {
                    throw ValidationError(where + "args slot must be 'trigger' or 'action', got '" +
                                          slot + "'");
                }
                if (!values.is_object()) {
                    throw ValidationError(where + "args." + slot + " must be an object");
                }
                for (const auto& [name, value] : values.items()) {
                    if (!value.is_string()) {
                        throw ValidationError(where + "args." + slot + "." + name +
                                              " must be a string");
                    }
                    r.args[slot][name] = value.get<std::string>();
                }
            }
        }
        recipes.push_back(std::move(r));
    }
    return recipes;
}

void save_recipes(const std::string& path, const std::vector<Recipe>& recipes) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ValidationError("cannot open recipe file for writing: " + path);
    for (const auto& r : recipes) {
        nlohmann::json obj = {{"description", r.description},
                              {"trigger_channel", r.trigger_channel},
                              {"trigger_function", r.trigger_function},
                              {"action_channel", r.action_channel},
                              {"action_function", r.action_function}};
        if (!r.args.empty()) obj["args"] = r.args;
        out << obj.dump() << '\n';
    }
    if (!out) throw ValidationError("recipe write failed: " + path);
}

void save_vocab(const std::string& path, const Vocab& vocab) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ValidationError("cannot open vocab file for writing: " + path);
    for (const auto& tok : vocab.tokens) out << tok << '\n';
    if (!out) throw ValidationError("vocab write failed: " + path);
}

Vocab load_vocab(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open vocab file: " + path);
    Vocab v;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (v.ids.count(line)) throw ValidationError("duplicate vocab token: " + line);
        v.ids.emplace(line, static_cast<int>(v.tokens.size()) + 2);
        v.tokens.push_back(line);
    }
    return v;
}

LabelSpace build_label_space(const std::vector<Recipe>& corpus, Target target) {
    std::set<std::string> distinct;
    for (const auto& r : corpus) distinct.insert(target_function(r, target));

    LabelSpace ls;
    std::map<std::string, int> channel_index;
    for (const auto& label : distinct) {
        ls.ids.emplace(label, static_cast<int>(ls.functions.size()));
        ls.functions.push_back(label);
        const std::string channel = channel_prefix(label);
        auto [it, inserted] = channel_index.emplace(channel, static_cast<int>(ls.channels.size()));
        if (inserted) ls.channels.push_back(channel);
        ls.channel_ids.push_back(it->second);
    }
    return ls;
}

void save_labels(const std::string& path, const LabelSpace& labels) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ValidationError("cannot open labels file for writing: " + path);
    for (const auto& fn : labels.functions) out << fn << '\n';
    if (!out) throw ValidationError("labels write failed: " + path);
}

LabelSpace load_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open labels file: " + path);
    LabelSpace ls;
    std::map<std::string, int> channel_index;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.find('.') == std::string::npos) {
            throw ValidationError(line_tag(path, line_no) + "function label '" + line +
                                  "' is not channel-qualified");
        }
        if (ls.ids.count(line)) {
            throw ValidationError(line_tag(path, line_no) + "duplicate function label: " + line);
        }
        ls.ids.emplace(line, static_cast<int>(ls.functions.size()));
        ls.functions.push_back(line);
        const std::string channel = channel_prefix(line);
        auto [it, inserted] = channel_index.emplace(channel, static_cast<int>(ls.channels.size()));
        if (inserted) ls.channels.push_back(channel);
        ls.channel_ids.push_back(it->second);
    }
    return ls;
}

std::set<std::string> load_label_set(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open label set file: " + path);
    std::set<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) out.insert(line);
    }
    return out;
}

std::vector<EncodedExample> encode_dataset(const std::vector<Recipe>& recipes,
                                           const Vocab& vocab, const LabelSpace& labels,
                                           Target target, size_t J,
                                           bool require_known_labels) {
    std::vector<EncodedExample> out;
    out.reserve(recipes.size());
    for (const auto& r : recipes) {
        const std::string& label = target_function(r, target);
        const int id = labels.function_id(label);
        if (id < 0 && require_known_labels) {
            throw ValidationError("function label '" + label + "' is not in the label space");
        }
        out.push_back({encode(tokenize(r.description), vocab, J), id});
    }
    return out;
}

std::set<std::string> top_k_functions(const std::vector<Recipe>& dataset, size_t k) {
    std::map<std::string, size_t> counts;
    for (const auto& r : dataset) ++counts[r.trigger_function];
    std::vector<std::pair<std::string, size_t>> ranked(counts.begin(), counts.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (ranked.size() > k) ranked.resize(k);
    std::set<std::string> out;
    for (const auto& [fn, n] : ranked) out.insert(fn);
    return out;
}

std::vector<Recipe> build_skewed(const std::vector<Recipe>& dataset,
                                 const std::set<std::string>& S, size_t per_minority,
                                 uint64_t seed) {
    std::set<std::string> sampled;
    for (const auto& r : dataset) {
        if (!S.count(r.trigger_function)) sampled.insert(r.trigger_function);
    }
    return sample_split(dataset, sampled, per_minority, seed);
}

std::vector<Recipe> build_rebalanced(const std::vector<Recipe>& dataset,
                                     const std::set<std::string>& S, size_t per_majority,
                                     uint64_t seed) {
    return sample_split(dataset, S, per_majority, seed);
}

}  // namespace lattn
