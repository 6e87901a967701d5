#include "lattn/eval.hpp"

#include <algorithm>

#include "lattn/error.hpp"
#include "lattn/rng.hpp"
#include "lattn/training.hpp"

namespace lattn {

Predictor single_predictor(const Model& model) {
    return [&model](const std::vector<int>& ids) { return model.probs(ids); };
}

std::vector<double> ensemble_predict(const std::vector<const Model*>& models,
                                     const std::vector<int>& ids) {
    if (models.empty()) throw ConfigError("ensemble_predict: no members");
    std::vector<double> mean = models[0]->probs(ids);
    for (size_t i = 1; i < models.size(); ++i) {
        const std::vector<double> p = models[i]->probs(ids);
        if (p.size() != mean.size()) {
            throw ConfigError("ensemble_predict: members disagree on the class count");
        }
        for (size_t k = 0; k < mean.size(); ++k) mean[k] += p[k];
    }
    const double inv = 1.0 / static_cast<double>(models.size());
    for (double& v : mean) v *= inv;
    return mean;
}

Predictor ensemble_predictor(const std::vector<const Model*>& models) {
    return [models](const std::vector<int>& ids) { return ensemble_predict(models, ids); };
}

Metrics evaluate(const Predictor& predict, const std::vector<Recipe>& dataset,
                 const Vocab& vocab, const LabelSpace& labels, Target target, size_t J,
                 const std::set<std::string>* subset) {
    Metrics m;
    m.has_subset = subset != nullptr;
    size_t fn_hits = 0, ch_hits = 0, maj_hits = 0, min_hits = 0;
    for (const auto& r : dataset) {
        const std::vector<int> ids = encode(tokenize(r.description), vocab, J);
        const int pred = predict_label(predict(ids));
        if (pred < 0 || static_cast<size_t>(pred) >= labels.num_functions()) {
            throw ConfigError("evaluate: prediction outside the label space");
        }
        const std::string& pred_fn = labels.functions[static_cast<size_t>(pred)];
        const std::string& pred_ch = labels.channel_of(pred);
        const std::string& gold_fn = target_function(r, target);
        const std::string& gold_ch = target_channel(r, target);
        const bool fn_ok = pred_fn == gold_fn;
        fn_hits += fn_ok;
        ch_hits += pred_ch == gold_ch;
        if (subset) {
            if (subset->count(gold_fn)) {
                ++m.majority_count;
                maj_hits += fn_ok;
            } else {
                ++m.minority_count;
                min_hits += fn_ok;
            }
        }
        ++m.total;
    }
    if (m.total > 0) {
        m.function_accuracy = static_cast<double>(fn_hits) / static_cast<double>(m.total);
        m.channel_accuracy = static_cast<double>(ch_hits) / static_cast<double>(m.total);
    }
    if (m.majority_count > 0) {
        m.majority_accuracy = static_cast<double>(maj_hits) / static_cast<double>(m.majority_count);
    }
    if (m.minority_count > 0) {
        m.minority_accuracy = static_cast<double>(min_hits) / static_cast<double>(m.minority_count);
    }
    return m;
}

std::vector<SeededModel> select_best_k(const std::vector<SeededModel>& models,
                                       const std::vector<EncodedExample>& validation,
                                       size_t k) {
    struct Scored {
        SeededModel entry;
        double accuracy;
    };
    std::vector<Scored> scored;
    scored.reserve(models.size());
    for (const auto& sm : models) {
        scored.push_back({sm, dataset_accuracy(*sm.model, validation)});
    }
    std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
        return a.entry.seed < b.entry.seed;
    });
    if (scored.size() > k) scored.resize(k);
    std::vector<SeededModel> out;
    out.reserve(scored.size());
    for (const auto& s : scored) out.push_back(s.entry);
    return out;
}

ArgFreqModel ArgFreqModel::fit(const std::vector<Recipe>& dataset) {
    // Pass 1: the arg-names each function is known to take.
    std::map<std::string, std::set<std::string>> known;
    for (const auto& r : dataset) {
        known[r.trigger_function];
        known[r.action_function];
        for (const auto& [slot, values] : r.args) {
            const std::string& fn = slot == "trigger" ? r.trigger_function : r.action_function;
            for (const auto& [name, value] : values) known[fn].insert(name);
        }
    }
    // Pass 2: count values, inserting MISSING when a recipe of f lacks one of
    // f's known arguments.
    ArgFreqModel model;
    for (const auto& r : dataset) {
        for (const char* slot : {"trigger", "action"}) {
            const std::string& fn =
                std::string(slot) == "trigger" ? r.trigger_function : r.action_function;
            const auto args_it = r.args.find(slot);
            for (const auto& arg : known[fn]) {
                const std::string* value = nullptr;
                if (args_it != r.args.end()) {
                    const auto v = args_it->second.find(arg);
                    if (v != args_it->second.end()) value = &v->second;
                }
                ++model.table_[fn][arg][value ? *value : kMissing];
            }
        }
    }
    return model;
}

std::map<std::string, std::string> ArgFreqModel::predict(const std::string& function) const {
    std::map<std::string, std::string> out;
    const auto fn_it = table_.find(function);
    if (fn_it == table_.end()) return out;
    for (const auto& [arg, values] : fn_it->second) {
        const std::string* best = nullptr;
        size_t best_count = 0;
        for (const auto& [value, count] : values) {
            // std::map iterates values in lexicographic order, so a strict >
            // keeps the smallest value on ties.
            if (count > best_count) {
                best = &value;
                best_count = count;
            }
        }
        if (best) out[arg] = *best;
    }
    return out;
}

size_t ArgFreqModel::count(const std::string& function, const std::string& arg,
                           const std::string& value) const {
    const auto fn_it = table_.find(function);
    if (fn_it == table_.end()) return 0;
    const auto arg_it = fn_it->second.find(arg);
    if (arg_it == fn_it->second.end()) return 0;
    const auto v_it = arg_it->second.find(value);
    return v_it == arg_it->second.end() ? 0 : v_it->second;
}

double arg_f1(const std::vector<ArgPrediction>& predictions,
              const std::vector<Recipe>& gold) {
    if (predictions.size() != gold.size()) {
        throw ConfigError("arg_f1: prediction and gold counts differ");
    }
    size_t matched = 0, predicted = 0, golden = 0;
    for (size_t i = 0; i < gold.size(); ++i) {
        for (const char* slot : {"trigger", "action"}) {
            const auto& pred = std::string(slot) == "trigger" ? predictions[i].trigger
                                                              : predictions[i].action;
            const std::map<std::string, std::string>* gold_args = nullptr;
            if (const auto it = gold[i].args.find(slot); it != gold[i].args.end()) {
                gold_args = &it->second;
            }
            for (const auto& [name, value] : pred) {
                if (value == ArgFreqModel::kMissing) continue;
                ++predicted;
                if (gold_args) {
                    const auto g = gold_args->find(name);
                    if (g != gold_args->end() && g->second == value) ++matched;
                }
            }
            if (gold_args) {
                for (const auto& [name, value] : *gold_args) {
                    if (value != ArgFreqModel::kMissing) ++golden;
                }
            }
        }
    }
    if (predicted == 0 && golden == 0) return 1.0;
    if (predicted == 0 || golden == 0) return 0.0;
    const double p = static_cast<double>(matched) / static_cast<double>(predicted);
    const double r = static_cast<double>(matched) / static_cast<double>(golden);
    if (p + r == 0.0) return 0.0;
    return 2.0 * p * r / (p + r);
}

SynthSpec default_synth_spec() {
    SynthSpec spec;
    spec.services = {"photobox", "cloudbin", "notemate", "clipfeed",
                     "snapnest", "filecab",  "taskhive", "mailpond"};
    spec.templates = {
        "send new {T} items to {A}",
        "copy {T} uploads into my {A} folder",
        "whenever {T} updates, post a note to {A}",
        "add to {A} every new thing from {T}",
    };
    return spec;
}

namespace {

std::string fill_template(const std::string& tpl, const std::string& trigger,
                          const std::string& action) {
    std::string out;
    out.reserve(tpl.size() + trigger.size() + action.size());
    for (size_t i = 0; i < tpl.size();) {
        if (tpl.compare(i, 3, "{T}") == 0) {
            out += trigger;
            i += 3;
        } else if (tpl.compare(i, 3, "{A}") == 0) {
            out += action;
            i += 3;
        } else {
            out += tpl[i];
            ++i;
        }
    }
    return out;
}

Recipe make_recipe(const SynthSpec& spec, const std::string& tpl, const std::string& trigger,
                   const std::string& action, Rng& rng) {
    Recipe r;
    r.description = fill_template(tpl, trigger, action);
    r.trigger_channel = trigger;
    r.trigger_function = trigger + ".new_item";
    r.action_channel = action;
    r.action_function = action + ".add_item";
    if (spec.with_args) {
        static const std::vector<std::string> filters = {"all", "recent", "tagged"};
        static const std::vector<std::string> folders = {"inbox", "archive", "shared"};
        static const std::vector<std::string> notify = {"yes", "no"};
        if (rng.below(4) < 3) {
            r.args["trigger"]["filter"] = filters[rng.below(filters.size())];
        }
        r.args["action"]["folder"] = folders[rng.below(folders.size())];
        if (rng.below(2) == 0) {
            r.args["action"]["notify"] = notify[rng.below(notify.size())];
        }
    }
    return r;
}

}  // namespace

std::vector<Recipe> gen_synthetic_corpus(const SynthSpec& spec, size_t n, uint64_t seed) {
    if (spec.services.size() < 2) throw ConfigError("gen_synthetic_corpus: need two services");
    if (spec.templates.empty()) throw ConfigError("gen_synthetic_corpus: need a template");
    for (const auto& tpl : spec.templates) {
        if (tpl.find("{T}") == std::string::npos || tpl.find("{A}") == std::string::npos) {
            throw ConfigError("gen_synthetic_corpus: template must mention {T} and {A}");
        }
    }

    Rng rng = Rng::substream(seed, "sampling");
    std::vector<Recipe> out;
    out.reserve(n);
    while (out.size() < n) {
        const std::string& tpl = spec.templates[rng.below(spec.templates.size())];
        const size_t xi = rng.below(spec.services.size());
        size_t yi = rng.below(spec.services.size() - 1);
        if (yi >= xi) ++yi;
        const std::string& x = spec.services[xi];
        const std::string& y = spec.services[yi];
        out.push_back(make_recipe(spec, tpl, x, y, rng));
        if (out.size() < n) out.push_back(make_recipe(spec, tpl, y, x, rng));
    }
    return out;
}

}  // namespace lattn
