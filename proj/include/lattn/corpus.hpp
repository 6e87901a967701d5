#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace lattn {

// One If-Then recipe. Function labels are channel-qualified
// ("Dropbox.Add_file_from_URL") so the channel is always derivable by prefix.
// args maps a slot ("trigger"/"action") to that slot's name->value pairs.
struct Recipe {
    std::string description;
    std::string trigger_channel;
    std::string trigger_function;
    std::string action_channel;
    std::string action_function;
    std::map<std::string, std::map<std::string, std::string>> args;
};

// Token table with two reserved ids: PAD=0 (padding, pinned to a zero
// embedding downstream) and UNK=1 (out-of-vocabulary words).
struct Vocab {
    static constexpr int kPadId = 0;
    static constexpr int kUnkId = 1;

    std::vector<std::string> tokens;  // id = index + 2
    std::unordered_map<std::string, int> ids;

    size_t size() const { return tokens.size() + 2; }
    int id_of(const std::string& token) const {
        auto it = ids.find(token);
        return it == ids.end() ? kUnkId : it->second;
    }
};

// Dense, lexicographically ordered function-label ids plus the channel each
// function belongs to.
struct LabelSpace {
    std::vector<std::string> functions;  // function id = index
    std::unordered_map<std::string, int> ids;
    std::vector<std::string> channels;  // channel id = index
    std::vector<int> channel_ids;       // function id -> channel id

    size_t num_functions() const { return functions.size(); }
    size_t num_channels() const { return channels.size(); }
    int function_id(const std::string& label) const {
        auto it = ids.find(label);
        return it == ids.end() ? -1 : it->second;
    }
    // Throws ValidationError for an out-of-range function id.
    const std::string& channel_of(int function_id) const;
};

// Fixed-length id sequence plus its gold function label id. target is -1
// only when encode_dataset was told to tolerate labels outside the space.
struct EncodedExample {
    std::vector<int> ids;
    int target = -1;
};

enum class Target { kTriggerFunction, kActionFunction };

const std::string& target_function(const Recipe& r, Target t);
const std::string& target_channel(const Recipe& r, Target t);

// Lowercases, splits on whitespace, and emits each of . , ! ? " ' : ; ) (
// as its own token. Never produces empty tokens.
std::vector<std::string> tokenize(const std::string& text);

// Keeps the max_words most frequent tokens (ties lexicographic); everything
// else encodes to UNK.
Vocab build_vocab(const std::vector<Recipe>& corpus, size_t max_words = 4000);

// Pads short sequences with PAD to length J; clips long ones to the first
// floor(J/2) (J even) or (J-1)/2 (J odd) tokens plus the tail that fills the
// rest, so J=25 keeps the first 12 and last 13. Throws ConfigError if J < 2.
std::vector<int> encode(const std::vector<std::string>& tokens, const Vocab& vocab,
                        size_t J = 25);

// The token strings occupying each of the J encoded positions (same
// clipping rule as encode), with "<PAD>" for padding. For aligning
// per-position weights with readable tokens.
std::vector<std::string> encode_tokens_view(const std::vector<std::string>& tokens, size_t J);

// JSONL: one recipe object per line. Throws ValidationError with the line
// number on parse failures, missing fields, empty descriptions, or a
// function label that does not start with its channel.
std::vector<Recipe> load_recipes(const std::string& path);
void save_recipes(const std::string& path, const std::vector<Recipe>& recipes);

// Vocab file: one token per line, id = line number + 2 (PAD/UNK implied).
void save_vocab(const std::string& path, const Vocab& vocab);
Vocab load_vocab(const std::string& path);

LabelSpace build_label_space(const std::vector<Recipe>& corpus, Target target);

// Labels file: one channel-qualified function label per line, id = line number.
void save_labels(const std::string& path, const LabelSpace& labels);
LabelSpace load_labels(const std::string& path);

// Subset file: one function label per line.
std::set<std::string> load_label_set(const std::string& path);

// Tokenize+encode every description and attach the gold label id for the
// chosen target side. Unknown gold labels throw ValidationError unless
// require_known_labels is false (then target = -1).
std::vector<EncodedExample> encode_dataset(const std::vector<Recipe>& recipes,
                                           const Vocab& vocab, const LabelSpace& labels,
                                           Target target, size_t J = 25,
                                           bool require_known_labels = true);

// The k most frequent trigger functions, ties lexicographic.
std::set<std::string> top_k_functions(const std::vector<Recipe>& dataset, size_t k = 100);

// Keeps every recipe whose trigger function is in S and samples
// min(per_minority, available) recipes without replacement for each other
// function. Output order is a deterministic shuffle of the result.
std::vector<Recipe> build_skewed(const std::vector<Recipe>& dataset,
                                 const std::set<std::string>& S, size_t per_minority,
                                 uint64_t seed);

// Mirror image of build_skewed: samples functions in S, keeps the rest.
// build_skewed(d, S, per, seed) and build_rebalanced(d, complement-of-S, per,
// seed) sample identically.
std::vector<Recipe> build_rebalanced(const std::vector<Recipe>& dataset,
                                     const std::set<std::string>& S, size_t per_majority,
                                     uint64_t seed);

}  // namespace lattn
