#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lattn/corpus.hpp"
#include "lattn/error.hpp"
#include "lattn/eval.hpp"
#include "lattn/models.hpp"
#include "lattn/rng.hpp"
#include "lattn/training.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using namespace lattn;

// ---------------------------------------------------------------------------
// Shared plumbing

std::string fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot hash input file: " + path);
    uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        std::streamsize got = in.gcount();
        if (got == 0) break;
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<uint8_t>(buf[i]);
            h *= 0x100000001b3ull;
        }
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return out;
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    out << j.dump(2) << "\n";
}

class RunTimer {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// One per training or evaluation run: enough to re-run the command and to
// tell whether the inputs changed since.
struct Manifest {
    std::string command;
    json config = json::object();
    uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::string checkpoint;
    std::string metrics;

    void write(const std::string& path, double wall_seconds) const {
        json hashes = json::object();
        for (const auto& p : inputs) hashes[p] = fnv1a_file(p);
        write_json_file(path, json{{"command", command},
                                   {"config", config},
                                   {"seed", seed},
                                   {"input_hashes", hashes},
                                   {"checkpoint", checkpoint},
                                   {"metrics", metrics},
                                   {"wall_time_seconds", wall_seconds}});
        std::printf("manifest -> %s\n", path.c_str());
    }
};

Target parse_target(const std::string& name) {
    if (name == "trigger-function") return Target::kTriggerFunction;
    if (name == "action-function") return Target::kActionFunction;
    throw ConfigError("unknown target '" + name + "' (expected trigger-function or action-function)");
}

Vocab ensure_vocab(const std::string& path, const std::vector<Recipe>& corpus, size_t max_words) {
    if (fs::exists(path)) return load_vocab(path);
    Vocab v = build_vocab(corpus, max_words);
    save_vocab(path, v);
    return v;
}

LabelSpace ensure_labels(const std::string& path, const std::vector<Recipe>& corpus, Target target) {
    if (fs::exists(path)) return load_labels(path);
    LabelSpace l = build_label_space(corpus, target);
    save_labels(path, l);
    return l;
}

json metrics_to_json(const Metrics& m) {
    json j{{"total", m.total},
           {"function_accuracy", m.function_accuracy},
           {"channel_accuracy", m.channel_accuracy}};
    if (m.has_subset) {
        j["majority_accuracy"] = m.majority_accuracy;
        j["minority_accuracy"] = m.minority_accuracy;
        j["majority_count"] = m.majority_count;
        j["minority_count"] = m.minority_count;
    }
    return j;
}

void print_metrics(const Metrics& m) {
    std::printf("examples           %zu\n", m.total);
    std::printf("function accuracy  %.4f\n", m.function_accuracy);
    std::printf("channel accuracy   %.4f\n", m.channel_accuracy);
    if (m.has_subset) {
        std::printf("majority accuracy  %.4f  (%zu recipes)\n", m.majority_accuracy, m.majority_count);
        std::printf("minority accuracy  %.4f  (%zu recipes)\n", m.minority_accuracy, m.minority_count);
    }
}

// ---------------------------------------------------------------------------
// Training config file (flat key=value; command-line flags override it) and
// the model-structure knobs that ride along with it.

struct Knobs {
    size_t embed_dim = 50;
    size_t lstm_hidden = 25;
    size_t seq_len = 25;
    size_t max_words = 4000;
    bool tie_embeddings = false;
    bool normalize_weights = true;
};

void apply_config_entry(const std::string& where, const std::string& key, const std::string& value,
                        TrainConfig& tc, Knobs& kn) {
    auto bad = [&](const char* want) {
        throw ConfigError(where + ": " + key + " expects " + want + ", got '" + value + "'");
    };
    auto u64 = [&]() -> uint64_t {
        if (value.empty() || value[0] == '-') bad("a non-negative integer");
        try {
            size_t pos = 0;
            unsigned long long v = std::stoull(value, &pos);
            if (pos != value.size()) bad("a non-negative integer");
            return v;
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            bad("a non-negative integer");
        }
        return 0;
    };
    auto count = [&]() -> size_t { return static_cast<size_t>(u64()); };
    auto num = [&]() -> double {
        try {
            size_t pos = 0;
            double d = std::stod(value, &pos);
            if (pos != value.size()) bad("a number");
            return d;
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            bad("a number");
        }
        return 0;
    };
    auto flag = [&]() -> bool {
        if (value == "true" || value == "1") return true;
        if (value == "false" || value == "0") return false;
        bad("true or false");
        return false;
    };

    if (key == "learning_rate") {
        tc.learning_rate = num();
    } else if (key == "decay") {
        if (value == "none") tc.decay = DecayKind::kNone;
        else if (value == "step") tc.decay = DecayKind::kStep;
        else bad("none or step");
    } else if (key == "decay_factor") {
        tc.decay_factor = num();
    } else if (key == "decay_every") {
        tc.decay_every = count();
    } else if (key == "clip_norm") {
        tc.clip_norm = num();
    } else if (key == "batch_size") {
        tc.batch_size = count();
    } else if (key == "init_low") {
        tc.init_low = num();
    } else if (key == "init_high") {
        tc.init_high = num();
    } else if (key == "max_epochs") {
        tc.max_epochs = count();
    } else if (key == "patience") {
        tc.patience = count();
    } else if (key == "seed") {
        tc.seed = u64();
    } else if (key == "step2_epochs") {
        tc.step2_epochs = count();
    } else if (key == "beta1") {
        tc.beta1 = num();
    } else if (key == "beta2") {
        tc.beta2 = num();
    } else if (key == "adam_eps") {
        tc.adam_eps = num();
    } else if (key == "embed_dim") {
        kn.embed_dim = count();
    } else if (key == "lstm_hidden") {
        kn.lstm_hidden = count();
    } else if (key == "seq_len") {
        kn.seq_len = count();
    } else if (key == "max_words") {
        kn.max_words = count();
    } else if (key == "tie_embeddings") {
        kn.tie_embeddings = flag();
    } else if (key == "normalize_weights") {
        kn.normalize_weights = flag();
    } else {
        throw ConfigError(where + ": unknown config key '" + key + "'");
    }
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

void apply_config_file(const std::string& path, TrainConfig& tc, Knobs& kn) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        std::string where = path + ":" + std::to_string(lineno);
        size_t eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key=value");
        apply_config_entry(where, trim(s.substr(0, eq)), trim(s.substr(eq + 1)), tc, kn);
    }
}

// Hyperparameter flags shared by train and oneshot. Option handles are kept
// so explicit flags can override config-file entries.
struct HyperOpts {
    std::string config;
    double lr = 0.0;
    double clip = 0.0;
    double decay_factor = 0.0;
    std::string decay;
    size_t epochs = 0;
    size_t batch = 0;
    size_t patience = 0;
    size_t decay_every = 0;
    size_t step2_epochs = 0;
    uint64_t seed = 1;
    size_t embed_dim = 50;
    size_t lstm_hidden = 25;
    size_t seq_len = 25;
    size_t max_words = 4000;
    bool tie = false;
    bool no_normalize = false;
    CLI::Option* lr_o = nullptr;
    CLI::Option* clip_o = nullptr;
    CLI::Option* decay_o = nullptr;
    CLI::Option* decay_factor_o = nullptr;
    CLI::Option* decay_every_o = nullptr;
    CLI::Option* epochs_o = nullptr;
    CLI::Option* batch_o = nullptr;
    CLI::Option* patience_o = nullptr;
    CLI::Option* step2_o = nullptr;
    CLI::Option* seed_o = nullptr;
    CLI::Option* embed_dim_o = nullptr;
    CLI::Option* lstm_hidden_o = nullptr;
    CLI::Option* seq_len_o = nullptr;
    CLI::Option* max_words_o = nullptr;
};

void add_hyper_flags(CLI::App& cmd, HyperOpts& h, bool with_step2) {
    cmd.add_option("--config", h.config, "key=value training config file; flags override it")
        
        ->envname("LATTN_CONFIG");
    h.lr_o = cmd.add_option("--lr", h.lr, "learning rate");
    h.clip_o = cmd.add_option("--clip", h.clip, "global gradient norm cap");
    h.decay_o = cmd.add_option("--decay", h.decay, "learning-rate schedule")
                    ->check(CLI::IsMember({"none", "step"}));
    h.decay_factor_o = cmd.add_option("--decay-factor", h.decay_factor, "multiplier per decay interval");
    h.decay_every_o = cmd.add_option("--decay-every", h.decay_every, "minibatch steps per decay");
    h.epochs_o = cmd.add_option("--epochs", h.epochs, "epoch budget");
    h.batch_o = cmd.add_option("--batch-size", h.batch, "minibatch size");
    h.patience_o = cmd.add_option("--patience", h.patience, "epochs without a validation gain before stopping");
    if (with_step2)
        h.step2_o = cmd.add_option("--step2-epochs", h.step2_epochs, "epoch budget of the rebalanced step");
    h.seed_o = cmd.add_option("--seed", h.seed, "root random seed")->envname("LATTN_SEED");
    h.embed_dim_o = cmd.add_option("--embed-dim", h.embed_dim, "embedding width (word-vector width for bdlstm)");
    h.lstm_hidden_o = cmd.add_option("--lstm-hidden", h.lstm_hidden, "LSTM state width per direction");
    h.seq_len_o = cmd.add_option("--seq-len", h.seq_len, "encoded sequence length");
    h.max_words_o = cmd.add_option("--max-words", h.max_words, "vocabulary cap");
    cmd.add_flag("--tie-embeddings", h.tie, "share one embedding set across attention roles");
    cmd.add_flag("--no-normalize", h.no_normalize, "skip unit-norm rescaling of latent attention weights");
}

void resolve_hyper(const HyperOpts& h, HeadKind head, TrainConfig& tc, Knobs& kn) {
    tc = TrainConfig::defaults_for(head);
    kn = Knobs{};
    if (!h.config.empty()) apply_config_file(h.config, tc, kn);
    if (h.lr_o->count()) tc.learning_rate = h.lr;
    if (h.clip_o->count()) tc.clip_norm = h.clip;
    if (h.decay_o->count()) tc.decay = h.decay == "step" ? DecayKind::kStep : DecayKind::kNone;
    if (h.decay_factor_o->count()) tc.decay_factor = h.decay_factor;
    if (h.decay_every_o->count()) tc.decay_every = h.decay_every;
    if (h.epochs_o->count()) tc.max_epochs = h.epochs;
    if (h.batch_o->count()) tc.batch_size = h.batch;
    if (h.patience_o->count()) tc.patience = h.patience;
    if (h.step2_o && h.step2_o->count()) tc.step2_epochs = h.step2_epochs;
    if (h.seed_o->count()) tc.seed = h.seed;
    if (h.embed_dim_o->count()) kn.embed_dim = h.embed_dim;
    if (h.lstm_hidden_o->count()) kn.lstm_hidden = h.lstm_hidden;
    if (h.seq_len_o->count()) kn.seq_len = h.seq_len;
    if (h.max_words_o->count()) kn.max_words = h.max_words;
    if (h.tie) kn.tie_embeddings = true;
    if (h.no_normalize) kn.normalize_weights = false;
}

json train_config_json(const TrainConfig& tc, const ModelConfig& mc, const std::string& target) {
    return json{{"model", model_kind_name(mc)},
                {"target", target},
                {"vocab_size", mc.vocab_size},
                {"num_classes", mc.num_classes},
                {"seq_len", mc.seq_len},
                {"embed_dim", mc.embed_dim},
                {"lstm_hidden", mc.lstm_hidden},
                {"tie_embeddings", mc.tie_embeddings},
                {"normalize_weights", mc.normalize_weights},
                {"learning_rate", tc.learning_rate},
                {"decay", tc.decay == DecayKind::kStep ? "step" : "none"},
                {"decay_factor", tc.decay_factor},
                {"decay_every", tc.decay_every},
                {"clip_norm", tc.clip_norm},
                {"batch_size", tc.batch_size},
                {"init_low", tc.init_low},
                {"init_high", tc.init_high},
                {"max_epochs", tc.max_epochs},
                {"patience", tc.patience},
                {"step2_epochs", tc.step2_epochs}};
}

void print_history(const std::vector<EpochStats>& history) {
    for (const auto& e : history)
        std::printf("epoch %3zu  train loss %.6f  val acc %.4f\n", e.epoch, e.train_loss,
                    e.val_accuracy);
}

// ---------------------------------------------------------------------------
// build-vocab

struct BuildVocabOpts {
    std::string corpus;
    std::string out;
    size_t max_words = 4000;
};

void run_build_vocab(const BuildVocabOpts& o) {
    auto recipes = load_recipes(o.corpus);
    Vocab v = build_vocab(recipes, o.max_words);
    save_vocab(o.out, v);
    std::printf("vocabulary of %zu tokens (plus PAD and UNK) from %zu recipes -> %s\n",
                v.tokens.size(), recipes.size(), o.out.c_str());
}

void setup_build_vocab(CLI::App& app) {
    auto o = std::make_shared<BuildVocabOpts>();
    auto* cmd = app.add_subcommand("build-vocab", "Build a token vocabulary from a recipe corpus");
    cmd->add_option("--corpus", o->corpus, "recipe JSONL")->required();
    cmd->add_option("--out", o->out, "vocabulary file to write")->required();
    cmd->add_option("--max-words", o->max_words, "vocabulary cap")->capture_default_str();
    cmd->callback([o] { run_build_vocab(*o); });
}

// ---------------------------------------------------------------------------
// encode-corpus

struct EncodeOpts {
    std::string corpus;
    std::string vocab;
    std::string labels;
    std::string target = "trigger-function";
    std::string out;
    size_t seq_len = 25;
    size_t max_words = 4000;
    bool allow_unknown = false;
};

void run_encode_corpus(const EncodeOpts& o) {
    auto recipes = load_recipes(o.corpus);
    Target target = parse_target(o.target);
    Vocab vocab = ensure_vocab(o.vocab, recipes, o.max_words);
    LabelSpace labels = ensure_labels(o.labels, recipes, target);
    auto data = encode_dataset(recipes, vocab, labels, target, o.seq_len, !o.allow_unknown);

    std::ofstream out(o.out);
    if (!out) throw ValidationError("cannot write " + o.out);
    for (const auto& e : data) out << json{{"ids", e.ids}, {"target", e.target}}.dump() << "\n";
    std::printf("encoded %zu examples (J=%zu, vocab %zu, labels %zu) -> %s\n", data.size(),
                o.seq_len, vocab.size(), labels.num_functions(), o.out.c_str());
}

void setup_encode_corpus(CLI::App& app) {
    auto o = std::make_shared<EncodeOpts>();
    auto* cmd = app.add_subcommand("encode-corpus", "Encode recipes to fixed-length id sequences");
    cmd->add_option("--corpus", o->corpus, "recipe JSONL")->required();
    cmd->add_option("--vocab", o->vocab, "vocabulary file (loaded if present, else built and saved)")
        ->required();
    cmd->add_option("--labels", o->labels, "label file (loaded if present, else built and saved)")
        ->required();
    cmd->add_option("--target", o->target, "label side to encode")
        ->check(CLI::IsMember({"trigger-function", "action-function"}))
        ->capture_default_str();
    cmd->add_option("--out", o->out, "encoded JSONL to write")->required();
    cmd->add_option("--seq-len", o->seq_len, "encoded sequence length")->capture_default_str();
    cmd->add_option("--max-words", o->max_words, "vocabulary cap when building")->capture_default_str();
    cmd->add_flag("--allow-unknown-labels", o->allow_unknown,
                  "emit target -1 for labels outside the label space instead of failing");
    cmd->callback([o] { run_encode_corpus(*o); });
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
    std::string corpus;
    std::string val;
    std::string model = "dict-latent";
    std::string target = "trigger-function";
    std::string out;
    std::string vocab;
    std::string labels;
    std::string history;
    std::string manifest;
    HyperOpts hyper;
};

void run_train(const TrainOpts& o) {
    RunTimer timer;
    auto recipes = load_recipes(o.corpus);
    Target target = parse_target(o.target);

    ModelConfig mc;
    parse_model_kind(o.model, mc);
    TrainConfig tc;
    Knobs kn;
    resolve_hyper(o.hyper, mc.head, tc, kn);

    std::string vocab_path = o.vocab.empty() ? o.out + ".vocab.txt" : o.vocab;
    std::string labels_path = o.labels.empty() ? o.out + ".labels.txt" : o.labels;
    Vocab vocab = ensure_vocab(vocab_path, recipes, kn.max_words);
    LabelSpace labels = ensure_labels(labels_path, recipes, target);

    mc.vocab_size = vocab.size();
    mc.num_classes = labels.num_functions();
    mc.seq_len = kn.seq_len;
    mc.embed_dim = kn.embed_dim;
    mc.lstm_hidden = kn.lstm_hidden;
    mc.tie_embeddings = kn.tie_embeddings;
    mc.normalize_weights = kn.normalize_weights;

    auto train_set = encode_dataset(recipes, vocab, labels, target, mc.seq_len);
    std::vector<EncodedExample> val_set;
    if (!o.val.empty())
        val_set = encode_dataset(load_recipes(o.val), vocab, labels, target, mc.seq_len, false);

    Model model(mc);
    TrainResult res = train(model, train_set, val_set, tc);
    model.save(o.out);

    std::string history_path = o.history.empty() ? o.out + ".history.csv" : o.history;
    write_history_csv(history_path, res.history);

    print_history(res.history);
    std::printf("%s on %zu examples (%zu classes, vocab %zu)\n", model_kind_name(mc).c_str(),
                train_set.size(), mc.num_classes, mc.vocab_size);
    std::printf("best val acc %.4f at epoch %zu\n", res.best_val_accuracy, res.best_epoch);
    std::printf("checkpoint -> %s\n", o.out.c_str());

    Manifest man;
    man.command = "train";
    man.config = train_config_json(tc, mc, o.target);
    man.config["vocab"] = vocab_path;
    man.config["labels"] = labels_path;
    man.seed = tc.seed;
    man.inputs = {o.corpus};
    if (!o.val.empty()) man.inputs.push_back(o.val);
    if (!o.hyper.config.empty()) man.inputs.push_back(o.hyper.config);
    man.checkpoint = o.out;
    man.metrics = history_path;
    man.write(o.manifest.empty() ? o.out + ".manifest.json" : o.manifest, timer.seconds());
}

void setup_train(CLI::App& app) {
    auto o = std::make_shared<TrainOpts>();
    auto* cmd = app.add_subcommand("train", "Train a classifier and write a checkpoint");
    cmd->add_option("--corpus", o->corpus, "training recipes (JSONL)")->required();
    cmd->add_option("--val", o->val, "validation recipes (JSONL); defaults to the training set")
        ;
    cmd->add_option("--model", o->model, "architecture: {dict,bdlstm}-{none,attn,latent}")
        ->capture_default_str();
    cmd->add_option("--target", o->target, "label side to predict")
        ->check(CLI::IsMember({"trigger-function", "action-function"}))
        ->capture_default_str();
    cmd->add_option("--out", o->out, "checkpoint path")->required();
    cmd->add_option("--vocab", o->vocab,
                    "vocabulary file (loaded if present, else built and saved); default <out>.vocab.txt");
    cmd->add_option("--labels", o->labels,
                    "label file (loaded if present, else built and saved); default <out>.labels.txt");
    cmd->add_option("--history", o->history, "epoch history CSV; default <out>.history.csv");
    cmd->add_option("--manifest", o->manifest, "run manifest path; default <out>.manifest.json");
    add_hyper_flags(*cmd, o->hyper, false);
    cmd->callback([o] { run_train(*o); });
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
    std::string checkpoint;
    std::string corpus;
    std::string vocab;
    std::string labels;
    std::string target = "trigger-function";
    std::string subset;
    std::string metrics_out;
    std::string manifest;
};

void check_model_io(const Model& model, const Vocab& vocab, const LabelSpace& labels,
                    const std::string& what) {
    if (vocab.size() != model.config().vocab_size)
        throw ValidationError(what + ": vocabulary has " + std::to_string(vocab.size()) +
                              " ids but the checkpoint expects " +
                              std::to_string(model.config().vocab_size));
    if (labels.num_functions() != model.config().num_classes)
        throw ValidationError(what + ": label file has " + std::to_string(labels.num_functions()) +
                              " functions but the checkpoint expects " +
                              std::to_string(model.config().num_classes));
}

void run_eval(const EvalOpts& o) {
    RunTimer timer;
    Model model = Model::load(o.checkpoint);
    auto recipes = load_recipes(o.corpus);
    Vocab vocab = load_vocab(o.vocab);
    LabelSpace labels = load_labels(o.labels);
    Target target = parse_target(o.target);
    check_model_io(model, vocab, labels, o.checkpoint);

    std::set<std::string> subset;
    if (!o.subset.empty()) subset = load_label_set(o.subset);
    Metrics m = evaluate(single_predictor(model), recipes, vocab, labels, target,
                         model.config().seq_len, o.subset.empty() ? nullptr : &subset);

    std::printf("%s checkpoint %s\n", model_kind_name(model.config()).c_str(), o.checkpoint.c_str());
    print_metrics(m);
    if (!o.metrics_out.empty()) write_json_file(o.metrics_out, metrics_to_json(m));

    Manifest man;
    man.command = "eval";
    man.config = {{"checkpoint", o.checkpoint}, {"target", o.target},
                  {"vocab", o.vocab},           {"labels", o.labels},
                  {"corpus", o.corpus},         {"subset", o.subset}};
    man.inputs = {o.checkpoint, o.corpus, o.vocab, o.labels};
    if (!o.subset.empty()) man.inputs.push_back(o.subset);
    man.checkpoint = o.checkpoint;
    man.metrics = o.metrics_out;
    man.write(o.manifest.empty() ? o.checkpoint + ".eval.manifest.json" : o.manifest,
              timer.seconds());
}

void setup_eval(CLI::App& app) {
    auto o = std::make_shared<EvalOpts>();
    auto* cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a recipe corpus");
    cmd->add_option("--checkpoint", o->checkpoint, "model checkpoint")->required();
    cmd->add_option("--corpus", o->corpus, "evaluation recipes (JSONL)")->required();
    cmd->add_option("--vocab", o->vocab, "vocabulary file")->required();
    cmd->add_option("--labels", o->labels, "label file")->required();
    cmd->add_option("--target", o->target, "label side to score")
        ->check(CLI::IsMember({"trigger-function", "action-function"}))
        ->capture_default_str();
    cmd->add_option("--subset-file", o->subset, "function subset for majority/minority breakdown")
        ;
    cmd->add_option("--metrics-out", o->metrics_out, "metrics JSON to write");
    cmd->add_option("--manifest", o->manifest, "run manifest path; default <checkpoint>.eval.manifest.json");
    cmd->callback([o] { run_eval(*o); });
}

// ---------------------------------------------------------------------------
// ensemble-eval

struct EnsembleOpts {
    std::vector<std::string> checkpoints;
    size_t k = 0;
    std::string corpus;
    std::string val;
    std::string vocab;
    std::string labels;
    std::string target = "trigger-function";
    std::string subset;
    std::string metrics_out;
    std::string manifest;
};

void run_ensemble_eval(const EnsembleOpts& o) {
    RunTimer timer;
    if (o.checkpoints.empty()) throw ConfigError("--checkpoints needs at least one path");
    std::vector<Model> models;
    models.reserve(o.checkpoints.size());
    for (const auto& p : o.checkpoints) models.push_back(Model::load(p));

    auto recipes = load_recipes(o.corpus);
    Vocab vocab = load_vocab(o.vocab);
    LabelSpace labels = load_labels(o.labels);
    Target target = parse_target(o.target);
    for (size_t i = 0; i < models.size(); ++i) check_model_io(models[i], vocab, labels, o.checkpoints[i]);
    size_t J = models[0].config().seq_len;
    for (size_t i = 1; i < models.size(); ++i)
        if (models[i].config().seq_len != J)
            throw ValidationError(o.checkpoints[i] + ": sequence length differs from " + o.checkpoints[0]);

    std::set<std::string> subset;
    if (!o.subset.empty()) subset = load_label_set(o.subset);
    const std::set<std::string>* subset_ptr = o.subset.empty() ? nullptr : &subset;

    // Members are ranked on the selection set by single-model accuracy; the
    // "seed" of a member is its position in --checkpoints.
    auto sel_recipes = o.val.empty() ? recipes : load_recipes(o.val);
    auto selection = encode_dataset(sel_recipes, vocab, labels, target, J, false);
    std::vector<SeededModel> seeded;
    for (size_t i = 0; i < models.size(); ++i)
        seeded.push_back({static_cast<uint64_t>(i), &models[i]});
    size_t k = o.k == 0 ? models.size() : std::min(o.k, models.size());
    auto ranked = select_best_k(seeded, selection, k);

    std::printf("%3s  %-20s  %-10s  %-10s", "k", "members", "function", "channel");
    if (subset_ptr) std::printf("  %-10s  %-10s", "majority", "minority");
    std::printf("\n");

    json rows = json::array();
    std::vector<const Model*> members;
    std::string member_list;
    for (size_t j = 0; j < ranked.size(); ++j) {
        members.push_back(ranked[j].model);
        if (j) member_list += ",";
        member_list += std::to_string(ranked[j].seed);
        Metrics m = evaluate(ensemble_predictor(members), recipes, vocab, labels, target, J,
                             subset_ptr);
        std::printf("%3zu  %-20s  %-10.4f  %-10.4f", j + 1, member_list.c_str(),
                    m.function_accuracy, m.channel_accuracy);
        if (subset_ptr) std::printf("  %-10.4f  %-10.4f", m.majority_accuracy, m.minority_accuracy);
        std::printf("\n");
        json row = metrics_to_json(m);
        row["k"] = j + 1;
        row["members"] = json::parse("[" + member_list + "]");
        rows.push_back(row);
    }
    if (!o.metrics_out.empty()) write_json_file(o.metrics_out, rows);

    Manifest man;
    man.command = "ensemble-eval";
    man.config = {{"checkpoints", o.checkpoints}, {"k", k},
                  {"target", o.target},           {"vocab", o.vocab},
                  {"labels", o.labels},           {"corpus", o.corpus},
                  {"selection", o.val.empty() ? o.corpus : o.val}, {"subset", o.subset}};
    man.inputs = o.checkpoints;
    man.inputs.push_back(o.corpus);
    man.inputs.push_back(o.vocab);
    man.inputs.push_back(o.labels);
    if (!o.val.empty()) man.inputs.push_back(o.val);
    if (!o.subset.empty()) man.inputs.push_back(o.subset);
    man.checkpoint = o.checkpoints[0];
    man.metrics = o.metrics_out;
    man.write(o.manifest.empty() ? o.checkpoints[0] + ".ensemble.manifest.json" : o.manifest,
              timer.seconds());
}

void setup_ensemble_eval(CLI::App& app) {
    auto o = std::make_shared<EnsembleOpts>();
    auto* cmd = app.add_subcommand("ensemble-eval", "Rank checkpoints and evaluate growing ensembles");
    cmd->add_option("--checkpoints", o->checkpoints, "model checkpoints (comma separated or repeated)")
        ->required()
        ->delimiter(',');
    cmd->add_option("--k", o->k, "ensemble sizes to report (1..k); default all members");
    cmd->add_option("--corpus", o->corpus, "evaluation recipes (JSONL)")->required();
    cmd->add_option("--val", o->val, "selection recipes for ranking members; defaults to --corpus")
        ;
    cmd->add_option("--vocab", o->vocab, "vocabulary file")->required();
    cmd->add_option("--labels", o->labels, "label file")->required();
    cmd->add_option("--target", o->target, "label side to score")
        ->check(CLI::IsMember({"trigger-function", "action-function"}))
        ->capture_default_str();
    cmd->add_option("--subset-file", o->subset, "function subset for majority/minority breakdown")
        ;
    cmd->add_option("--metrics-out", o->metrics_out, "per-ensemble metrics JSON to write");
    cmd->add_option("--manifest", o->manifest,
                    "run manifest path; default <first checkpoint>.ensemble.manifest.json");
    cmd->callback([o] { run_ensemble_eval(*o); });
}

// ---------------------------------------------------------------------------
// oneshot

struct OneshotOpts {
    std::string corpus;
    std::string test;
    std::string val;
    std::string scheme = "skew-top";
    std::string strategy = "2step";
    std::string model = "dict-latent";
    std::string target = "trigger-function";
    std::string out;
    std::string vocab;
    std::string labels;
    std::string metrics_out;
    std::string manifest;
    size_t k = 100;
    size_t per = 10;
    HyperOpts hyper;
};

void run_oneshot(const OneshotOpts& o) {
    RunTimer timer;
    auto recipes = load_recipes(o.corpus);
    auto test = load_recipes(o.test);
    Target target = parse_target(o.target);

    ModelConfig mc;
    parse_model_kind(o.model, mc);
    TrainConfig tc;
    Knobs kn;
    resolve_hyper(o.hyper, mc.head, tc, kn);

    // S is the majority side: functions that keep their full data.
    auto top = top_k_functions(recipes, o.k);
    std::set<std::string> S;
    if (o.scheme == "skew-top") {
        S = top;
    } else {
        for (const auto& r : recipes)
            if (!top.count(r.trigger_function)) S.insert(r.trigger_function);
    }

    auto skewed = build_skewed(recipes, S, o.per, tc.seed);
    std::string vocab_path = o.vocab.empty() ? o.out + ".vocab.txt" : o.vocab;
    std::string labels_path = o.labels.empty() ? o.out + ".labels.txt" : o.labels;
    Vocab vocab = ensure_vocab(vocab_path, skewed, kn.max_words);
    LabelSpace labels = ensure_labels(labels_path, skewed, target);

    mc.vocab_size = vocab.size();
    mc.num_classes = labels.num_functions();
    mc.seq_len = kn.seq_len;
    mc.embed_dim = kn.embed_dim;
    mc.lstm_hidden = kn.lstm_hidden;
    mc.tie_embeddings = kn.tie_embeddings;
    mc.normalize_weights = kn.normalize_weights;

    auto skewed_enc = encode_dataset(skewed, vocab, labels, target, mc.seq_len);
    std::vector<EncodedExample> val_enc;
    if (!o.val.empty())
        val_enc = encode_dataset(load_recipes(o.val), vocab, labels, target, mc.seq_len, false);

    std::printf("%s: %zu majority functions keep full data, others capped at %zu recipes\n",
                o.scheme.c_str(), S.size(), o.per);

    Model model(mc);
    json audit{{"frozen", json::array()}, {"frozen_bit_identical", true}};
    size_t rebalanced_size = 0;
    if (o.strategy == "standard") {
        std::printf("skewed %zu recipes\n", skewed.size());
        TrainResult res = train(model, skewed_enc, val_enc, tc);
        write_history_csv(o.out + ".history.csv", res.history);
        print_history(res.history);
    } else {
        // The rebalanced set is drawn from the skewed set, so minority
        // functions contribute only the recipes the model has already seen.
        auto rebalanced = build_rebalanced(skewed, S, o.per, tc.seed);
        rebalanced_size = rebalanced.size();
        auto rebal_enc = encode_dataset(rebalanced, vocab, labels, target, mc.seq_len);
        std::printf("skewed %zu recipes, rebalanced %zu recipes\n", skewed.size(), rebalanced.size());
        TwoStepResult res =
            two_step_train(model, skewed_enc, rebal_enc, val_enc, tc, o.strategy == "naive2");
        write_history_csv(o.out + ".step1.history.csv", res.step1.history);
        write_history_csv(o.out + ".step2.history.csv", res.step2.history);
        print_history(res.step1.history);
        std::printf("rebalanced step:\n");
        print_history(res.step2.history);
        audit["frozen"] = res.frozen;
        audit["frozen_bit_identical"] = res.frozen_bit_identical;
        if (!res.frozen.empty()) {
            std::string names;
            for (const auto& n : res.frozen) names += (names.empty() ? "" : ", ") + n;
            std::printf("frozen across step 2: %s (bit-identical: %s)\n", names.c_str(),
                        res.frozen_bit_identical ? "yes" : "NO");
        }
    }
    model.save(o.out);

    Metrics m = evaluate(single_predictor(model), test, vocab, labels, target, mc.seq_len, &S);
    std::printf("%s %s %s on %s\n", model_kind_name(mc).c_str(), o.scheme.c_str(),
                o.strategy.c_str(), o.test.c_str());
    print_metrics(m);
    if (!o.metrics_out.empty()) {
        json out = metrics_to_json(m);
        out["scheme"] = o.scheme;
        out["strategy"] = o.strategy;
        out["skewed_size"] = skewed.size();
        out["rebalanced_size"] = rebalanced_size;
        out["audit"] = audit;
        write_json_file(o.metrics_out, out);
    }
    std::printf("checkpoint -> %s\n", o.out.c_str());

    Manifest man;
    man.command = "oneshot";
    man.config = train_config_json(tc, mc, o.target);
    man.config["scheme"] = o.scheme;
    man.config["strategy"] = o.strategy;
    man.config["top_k"] = o.k;
    man.config["per_function"] = o.per;
    man.config["vocab"] = vocab_path;
    man.config["labels"] = labels_path;
    man.config["audit"] = audit;
    man.seed = tc.seed;
    man.inputs = {o.corpus, o.test};
    if (!o.val.empty()) man.inputs.push_back(o.val);
    if (!o.hyper.config.empty()) man.inputs.push_back(o.hyper.config);
    man.checkpoint = o.out;
    man.metrics = o.metrics_out;
    man.write(o.manifest.empty() ? o.out + ".manifest.json" : o.manifest, timer.seconds());
}

void setup_oneshot(CLI::App& app) {
    auto o = std::make_shared<OneshotOpts>();
    auto* cmd = app.add_subcommand("oneshot", "Skewed-data experiment: skew, train, rebalance, evaluate");
    cmd->add_option("--corpus", o->corpus, "full training recipes (JSONL)")->required();
    cmd->add_option("--test", o->test, "test recipes (JSONL)")->required();
    cmd->add_option("--val", o->val, "validation recipes (JSONL)");
    cmd->add_option("--scheme", o->scheme, "which functions keep full data")
        ->check(CLI::IsMember({"skew-top", "skew-nontop"}))
        ->capture_default_str();
    cmd->add_option("--strategy", o->strategy, "training strategy")
        ->check(CLI::IsMember({"standard", "naive2", "2step"}))
        ->capture_default_str();
    cmd->add_option("--model", o->model, "architecture: {dict,bdlstm}-{none,attn,latent}")
        ->capture_default_str();
    cmd->add_option("--target", o->target, "label side to predict")
        ->check(CLI::IsMember({"trigger-function", "action-function"}))
        ->capture_default_str();
    cmd->add_option("--out", o->out, "checkpoint path")->required();
    cmd->add_option("--k", o->k, "size of the top-frequency function set")->capture_default_str();
    cmd->add_option("--per", o->per, "recipes kept per downsampled function")->capture_default_str();
    cmd->add_option("--vocab", o->vocab,
                    "vocabulary file (loaded if present, else built from the skewed set); default <out>.vocab.txt");
    cmd->add_option("--labels", o->labels,
                    "label file (loaded if present, else built from the skewed set); default <out>.labels.txt");
    cmd->add_option("--metrics-out", o->metrics_out, "metrics JSON to write");
    cmd->add_option("--manifest", o->manifest, "run manifest path; default <out>.manifest.json");
    add_hyper_flags(*cmd, o->hyper, true);
    cmd->callback([o] { run_oneshot(*o); });
}

// ---------------------------------------------------------------------------
// predict-args

struct PredictArgsOpts {
    std::string train;
    std::string test;
    std::string trig_ckpt;
    std::string act_ckpt;
    std::string vocab;
    std::string trig_labels;
    std::string act_labels;
    std::string out;
    std::string metrics_out;
    std::string manifest;
};

void run_predict_args(const PredictArgsOpts& o) {
    RunTimer timer;
    auto train_recipes = load_recipes(o.train);
    auto test_recipes = load_recipes(o.test);
    ArgFreqModel afm = ArgFreqModel::fit(train_recipes);

    bool use_models = !o.trig_ckpt.empty() || !o.act_ckpt.empty();
    if (use_models &&
        (o.trig_ckpt.empty() || o.act_ckpt.empty() || o.vocab.empty() || o.trig_labels.empty() ||
         o.act_labels.empty()))
        throw ConfigError(
            "predicted functions need --trigger-checkpoint, --action-checkpoint, --vocab, "
            "--trigger-labels, and --action-labels together");

    std::vector<ArgPrediction> preds;
    preds.reserve(test_recipes.size());
    std::vector<std::pair<std::string, std::string>> used;
    used.reserve(test_recipes.size());
    size_t trig_hits = 0, act_hits = 0;
    if (use_models) {
        Model trig = Model::load(o.trig_ckpt);
        Model act = Model::load(o.act_ckpt);
        Vocab vocab = load_vocab(o.vocab);
        LabelSpace tl = load_labels(o.trig_labels);
        LabelSpace al = load_labels(o.act_labels);
        check_model_io(trig, vocab, tl, o.trig_ckpt);
        check_model_io(act, vocab, al, o.act_ckpt);
        for (const auto& r : test_recipes) {
            auto toks = tokenize(r.description);
            const auto& tf =
                tl.functions[predict_label(trig.probs(encode(toks, vocab, trig.config().seq_len)))];
            const auto& af =
                al.functions[predict_label(act.probs(encode(toks, vocab, act.config().seq_len)))];
            trig_hits += tf == r.trigger_function;
            act_hits += af == r.action_function;
            preds.push_back({afm.predict(tf), afm.predict(af)});
            used.emplace_back(tf, af);
        }
    } else {
        for (const auto& r : test_recipes) {
            preds.push_back({afm.predict(r.trigger_function), afm.predict(r.action_function)});
            used.emplace_back(r.trigger_function, r.action_function);
        }
    }

    double f1 = arg_f1(preds, test_recipes);
    std::printf("argument F1        %.4f  (%zu recipes, %s functions)\n", f1, test_recipes.size(),
                use_models ? "predicted" : "gold");
    if (use_models && !test_recipes.empty()) {
        std::printf("trigger function accuracy  %.4f\n",
                    static_cast<double>(trig_hits) / test_recipes.size());
        std::printf("action function accuracy   %.4f\n",
                    static_cast<double>(act_hits) / test_recipes.size());
    }

    json metrics{{"arg_f1", f1},
                 {"total", test_recipes.size()},
                 {"functions", use_models ? "predicted" : "gold"}};
    if (use_models && !test_recipes.empty()) {
        metrics["trigger_function_accuracy"] = static_cast<double>(trig_hits) / test_recipes.size();
        metrics["action_function_accuracy"] = static_cast<double>(act_hits) / test_recipes.size();
    }
    if (!o.out.empty()) {
        std::ofstream rows(o.out, std::ios::trunc);
        if (!rows) throw ValidationError("cannot write " + o.out);
        for (size_t i = 0; i < test_recipes.size(); ++i) {
            json row{{"description", test_recipes[i].description},
                     {"trigger_function", used[i].first},
                     {"action_function", used[i].second},
                     {"trigger_args", preds[i].trigger},
                     {"action_args", preds[i].action}};
            rows << row.dump() << "\n";
        }
        if (!rows) throw ValidationError("write failed: " + o.out);
        std::printf("predictions -> %s\n", o.out.c_str());
    }
    if (!o.metrics_out.empty()) write_json_file(o.metrics_out, metrics);

    if (!o.out.empty() || !o.metrics_out.empty() || !o.manifest.empty()) {
        Manifest man;
        man.command = "predict-args";
        man.config = {{"train", o.train},
                      {"test", o.test},
                      {"functions", use_models ? "predicted" : "gold"}};
        man.inputs = {o.train, o.test};
        if (use_models) {
            man.inputs.push_back(o.trig_ckpt);
            man.inputs.push_back(o.act_ckpt);
            man.inputs.push_back(o.vocab);
            man.inputs.push_back(o.trig_labels);
            man.inputs.push_back(o.act_labels);
        }
        man.metrics = o.metrics_out;
        std::string man_path = o.manifest;
        if (man_path.empty())
            man_path = (o.out.empty() ? o.metrics_out : o.out) + ".manifest.json";
        man.write(man_path, timer.seconds());
    }
}

void setup_predict_args(CLI::App& app) {
    auto o = std::make_shared<PredictArgsOpts>();
    auto* cmd = app.add_subcommand(
        "predict-args", "Frequency-baseline argument prediction, scored by micro F1");
    cmd->add_option("--train", o->train, "recipes the frequency table is fitted on (JSONL)")
        ->required()
        ;
    cmd->add_option("--test", o->test, "recipes to score (JSONL)")->required();
    cmd->add_option("--trigger-checkpoint", o->trig_ckpt,
                    "trigger-function model; without it gold functions are used")
        ;
    cmd->add_option("--action-checkpoint", o->act_ckpt, "action-function model");
    cmd->add_option("--vocab", o->vocab, "vocabulary shared by both checkpoints");
    cmd->add_option("--trigger-labels", o->trig_labels, "trigger label file");
    cmd->add_option("--action-labels", o->act_labels, "action label file");
    cmd->add_option("--out", o->out, "per-recipe predictions JSONL to write");
    cmd->add_option("--metrics-out", o->metrics_out, "metrics JSON to write");
    cmd->add_option("--manifest", o->manifest, "run manifest path; default <out>.manifest.json");
    cmd->callback([o] { run_predict_args(*o); });
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckOpts {
    std::string model = "all";
    uint64_t seed = 1;
    double tol = 1e-4;
    // Probe parameters are drawn from U[-init_range, init_range). The default
    // is wider than the training init on purpose: near zero the recurrent
    // score paths have gradients around 1e-10, which central differences
    // cannot resolve to any relative accuracy, so the check would report
    // noise instead of the backward pass.
    double init_range = 1.0;
    // The checked loss is summed over this many (input, target) pairs. A
    // single input can leave individual entries with gradients near 1e-9
    // (softmax layers cancel the common mode of near-identical token states);
    // summing a few independent probes gives every entry a measurable pull.
    size_t probes = 6;
    double eps = 1e-4;
    size_t vocab_size = 20;
    size_t seq_len = 5;
    size_t embed_dim = 4;
    size_t lstm_hidden = 2;
    size_t classes = 3;
    bool tie = false;
};

void run_gradcheck(const GradcheckOpts& o) {
    std::vector<std::string> kinds;
    if (o.model == "all")
        kinds = {"dict-none", "dict-attn", "dict-latent", "bdlstm-none", "bdlstm-attn", "bdlstm-latent"};
    else
        kinds = {o.model};

    bool ok = true;
    for (const auto& kind : kinds) {
        ModelConfig mc;
        parse_model_kind(kind, mc);
        mc.vocab_size = o.vocab_size;
        mc.seq_len = o.seq_len;
        mc.embed_dim = o.embed_dim;
        mc.lstm_hidden = o.lstm_hidden;
        mc.num_classes = o.classes;
        mc.tie_embeddings = o.tie && mc.head != HeadKind::kNone;

        Model model(mc);
        Rng init = Rng::substream(o.seed, "init");
        model.init_params(init, -o.init_range, o.init_range);
        Rng sample = Rng::substream(o.seed, "sampling");
        std::vector<std::vector<int>> inputs(o.probes, std::vector<int>(mc.seq_len));
        std::vector<int> tgts(o.probes);
        for (size_t e = 0; e < o.probes; ++e) {
            for (auto& id : inputs[e]) id = static_cast<int>(sample.below(mc.vocab_size));
            tgts[e] = static_cast<int>(e % mc.num_classes);
        }

        ParamStore grads = model.params().like_zeroed();
        for (size_t e = 0; e < o.probes; ++e) {
            auto fwd = model.forward(inputs[e]);
            model.backward(fwd, tgts[e], grads);
        }
        auto loss_sum = [&] {
            double s = 0.0;
            for (size_t e = 0; e < o.probes; ++e) s += model.loss(inputs[e], tgts[e]);
            return s;
        };
        auto res = grad_check(model.params(), loss_sum, grads, o.eps);

        bool pass = res.max_rel_error < o.tol;
        ok = ok && pass;
        std::printf("%-14s max rel err %.3e  worst %s[%zu]  entries %zu  %s\n", kind.c_str(),
                    res.max_rel_error, res.worst_name.c_str(), res.worst_index,
                    res.entries_checked, pass ? "ok" : "FAIL");
    }
    if (!ok) throw NumericError("gradient check exceeded tolerance");
}

void setup_gradcheck(CLI::App& app) {
    auto o = std::make_shared<GradcheckOpts>();
    auto* cmd = app.add_subcommand(
        "gradcheck", "Compare analytic gradients against finite differences on a small model");
    cmd->add_option("--model", o->model, "architecture to check, or 'all'")->capture_default_str();
    cmd->add_option("--seed", o->seed, "seed for parameters and the probe input")
        ->envname("LATTN_SEED")
        ->capture_default_str();
    cmd->add_option("--tol", o->tol, "maximum relative error accepted")->capture_default_str();
    cmd->add_option("--init-range", o->init_range, "probe parameter scale")->capture_default_str();
    cmd->add_option("--probes", o->probes, "number of (input, target) pairs summed into the checked loss")
        ->capture_default_str();
    cmd->add_option("--eps", o->eps, "finite difference step")->capture_default_str();
    cmd->add_option("--vocab-size", o->vocab_size, "probe vocabulary size")->capture_default_str();
    cmd->add_option("--seq-len", o->seq_len, "probe sequence length")->capture_default_str();
    cmd->add_option("--embed-dim", o->embed_dim, "probe embedding width")->capture_default_str();
    cmd->add_option("--lstm-hidden", o->lstm_hidden, "probe LSTM width")->capture_default_str();
    cmd->add_option("--classes", o->classes, "probe class count")->capture_default_str();
    cmd->add_flag("--tie", o->tie, "tie embedding sets where the architecture has more than one");
    cmd->callback([o] { run_gradcheck(*o); });
}

// ---------------------------------------------------------------------------
// gen-synth

struct GenSynthOpts {
    std::string out;
    size_t n = 1000;
    uint64_t seed = 1;
    bool with_args = false;
};

void run_gen_synth(const GenSynthOpts& o) {
    SynthSpec spec = default_synth_spec();
    spec.with_args = o.with_args;
    auto recipes = gen_synthetic_corpus(spec, o.n, o.seed);
    save_recipes(o.out, recipes);
    std::printf("%zu synthetic recipes (%zu services, %zu templates%s) -> %s\n", recipes.size(),
                spec.services.size(), spec.templates.size(), o.with_args ? ", with args" : "",
                o.out.c_str());
}

void setup_gen_synth(CLI::App& app) {
    auto o = std::make_shared<GenSynthOpts>();
    auto* cmd = app.add_subcommand(
        "gen-synth", "Generate the mirrored-pair synthetic corpus used for verification");
    cmd->add_option("--out", o->out, "recipe JSONL to write")->required();
    cmd->add_option("--n", o->n, "number of recipes")->capture_default_str();
    cmd->add_option("--seed", o->seed, "sampling seed")->envname("LATTN_SEED")->capture_default_str();
    cmd->add_flag("--with-args", o->with_args, "attach slot arguments to each recipe");
    cmd->callback([o] { run_gen_synth(*o); });
}

// ---------------------------------------------------------------------------
// dump-attention

struct DumpOpts {
    std::string trig_ckpt;
    std::string act_ckpt;
    std::string corpus;
    std::string vocab;
    std::string out;
};

void run_dump_attention(const DumpOpts& o) {
    Model trig = Model::load(o.trig_ckpt);
    Model act = Model::load(o.act_ckpt);
    if (trig.config().head == HeadKind::kNone || act.config().head == HeadKind::kNone)
        throw ConfigError("attention dumps need attention models; a headless checkpoint has no token weights");
    Vocab vocab = load_vocab(o.vocab);
    if (vocab.size() != trig.config().vocab_size || vocab.size() != act.config().vocab_size)
        throw ValidationError("vocabulary size does not match both checkpoints");
    size_t J = trig.config().seq_len;
    if (act.config().seq_len != J)
        throw ValidationError("checkpoints disagree on sequence length");

    auto recipes = load_recipes(o.corpus);
    std::ofstream out(o.out);
    if (!out) throw ValidationError("cannot write " + o.out);
    for (const auto& r : recipes) {
        auto toks = tokenize(r.description);
        auto ids = encode(toks, vocab, J);
        auto td = trig.diagnostics(ids);
        auto ad = act.diagnostics(ids);
        json row{{"description", r.description},
                 {"tokens", encode_tokens_view(toks, J)},
                 {"trigger_active", td.w},
                 {"action_active", ad.w}};
        if (act.config().head == HeadKind::kLatent)
            row["latent"] = ad.l;
        else if (trig.config().head == HeadKind::kLatent)
            row["latent"] = td.l;
        out << row.dump() << "\n";
    }
    std::printf("attention weights for %zu recipes -> %s\n", recipes.size(), o.out.c_str());
}

void setup_dump_attention(CLI::App& app) {
    auto o = std::make_shared<DumpOpts>();
    auto* cmd = app.add_subcommand(
        "dump-attention", "Emit per-token attention weights for both prediction sides");
    cmd->add_option("--trigger-checkpoint", o->trig_ckpt, "trigger-side attention model")
        ->required()
        ;
    cmd->add_option("--action-checkpoint", o->act_ckpt, "action-side attention model")
        ->required()
        ;
    cmd->add_option("--corpus", o->corpus, "recipes to explain (JSONL)")->required();
    cmd->add_option("--vocab", o->vocab, "vocabulary shared by both checkpoints")
        ->required()
        ;
    cmd->add_option("--out", o->out, "JSONL of per-recipe weights")->required();
    cmd->callback([o] { run_dump_attention(*o); });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"If-Then recipe classifier with latent attention"};
    app.require_subcommand(1);
    setup_build_vocab(app);
    setup_encode_corpus(app);
    setup_train(app);
    setup_eval(app);
    setup_ensemble_eval(app);
    setup_oneshot(app);
    setup_predict_args(app);
    setup_gradcheck(app);
    setup_gen_synth(app);
    setup_dump_attention(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const lattn::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const lattn::ValidationError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const lattn::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
