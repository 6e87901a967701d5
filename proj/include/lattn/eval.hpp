#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "lattn/corpus.hpp"
#include "lattn/models.hpp"

namespace lattn {

struct Metrics {
    double function_accuracy = 0.0;
    // Derived: the predicted function's channel vs the gold channel. Always
    // >= function_accuracy because a correct function implies its channel.
    double channel_accuracy = 0.0;
    size_t total = 0;
    // Filled when a subset S is supplied: recipes whose gold function is in
    // S (majority) vs the rest (minority).
    bool has_subset = false;
    double majority_accuracy = 0.0;
    double minority_accuracy = 0.0;
    size_t majority_count = 0;
    size_t minority_count = 0;
};

// Any probability-producing classifier over encoded inputs.
using Predictor = std::function<std::vector<double>(const std::vector<int>&)>;

Predictor single_predictor(const Model& model);

// Arithmetic mean of the members' softmax outputs.
std::vector<double> ensemble_predict(const std::vector<const Model*>& models,
                                     const std::vector<int>& ids);
Predictor ensemble_predictor(const std::vector<const Model*>& models);

Metrics evaluate(const Predictor& predict, const std::vector<Recipe>& dataset,
                 const Vocab& vocab, const LabelSpace& labels, Target target, size_t J,
                 const std::set<std::string>* subset = nullptr);

struct SeededModel {
    uint64_t seed = 0;
    const Model* model = nullptr;
};

// Top k by validation function accuracy, ties broken toward the lower seed.
std::vector<SeededModel> select_best_k(const std::vector<SeededModel>& models,
                                       const std::vector<EncodedExample>& validation,
                                       size_t k);

// Frequency table Pr(value | function, arg-name) with a reserved token for
// recipes of a function that lack one of its known arguments.
class ArgFreqModel {
public:
    static constexpr const char* kMissing = "<MISSING>";

    static ArgFreqModel fit(const std::vector<Recipe>& dataset);

    // Most frequent value per known arg-name of the function; ties go to the
    // lexicographically smallest value. MISSING can win and is reported as
    // kMissing. Unknown functions yield an empty map.
    std::map<std::string, std::string> predict(const std::string& function) const;

    size_t count(const std::string& function, const std::string& arg,
                 const std::string& value) const;
    bool empty() const { return table_.empty(); }

private:
    // function -> arg-name -> value -> count
    std::map<std::string, std::map<std::string, std::map<std::string, size_t>>> table_;
};

// Predicted arguments for one recipe, one map per slot.
struct ArgPrediction {
    std::map<std::string, std::string> trigger;
    std::map<std::string, std::string> action;
};

// Micro-F1 over (recipe, slot, arg-name, value) exact matches. kMissing
// predictions are not emitted and kMissing gold values are not counted; both
// sides empty scores 1.0, exactly one side empty scores 0.0.
double arg_f1(const std::vector<ArgPrediction>& predictions, const std::vector<Recipe>& gold);

// ---------------------------------------------------------------------------
// Synthetic verification corpus.
//
// Descriptions are filled from templates with {T} (trigger service) and {A}
// (action service) placeholders. Every draw emits BOTH role assignments of a
// service pair, so the corpus consists of mirrored pairs: two recipes with
// identical token multisets whose gold triggers differ. A bag-of-words model
// cannot answer both correctly, which is exactly what the benchmark probes.

struct SynthSpec {
    std::vector<std::string> services;
    std::vector<std::string> templates;  // must contain {T} and {A}
    bool with_args = false;
};

// Eight services, four templates with the trigger mentioned in different
// positions (one template includes punctuation).
SynthSpec default_synth_spec();

// Deterministic under (spec, seed). Recipes 2i and 2i+1 form a mirrored
// pair; an odd n leaves the last recipe unpaired.
std::vector<Recipe> gen_synthetic_corpus(const SynthSpec& spec, size_t n, uint64_t seed);

}  // namespace lattn
