#include "lattn/training.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "lattn/error.hpp"
#include "lattn/kernels.hpp"

namespace lattn {

TrainConfig TrainConfig::defaults_for(HeadKind head) {
    TrainConfig cfg;
    if (head == HeadKind::kNone) {
        cfg.learning_rate = 0.01;
        cfg.decay = DecayKind::kStep;
        cfg.clip_norm = 5.0;
    } else {
        cfg.learning_rate = 0.001;
        cfg.decay = DecayKind::kNone;
        cfg.clip_norm = 40.0;
    }
    return cfg;
}

double clip_gradients(ParamStore& grads, double max_norm) {
    const double norm = grads.global_norm();
    if (norm > max_norm && norm > 0.0) {
        const double scale = max_norm / norm;
        for (auto& [name, e] : grads) {
            kern::scale(e.value.data().data(), scale, e.value.size());
        }
    }
    return norm;
}

void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state, double lr,
               const TrainConfig& cfg) {
    ++state.t;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (auto& [name, e] : params) {
        if (e.frozen) continue;
        auto g = grads.tensor(name).data();
        auto m = state.m.tensor(name).data();
        auto v = state.v.tensor(name).data();
        auto p = e.value.data();
        for (size_t i = 0; i < p.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.adam_eps);
        }
    }
}

double dataset_accuracy(const Model& model, const std::vector<EncodedExample>& data) {
    if (data.empty()) return 0.0;
    size_t hits = 0;
    for (const auto& ex : data) {
        if (predict_label(model.probs(ex.ids)) == ex.target) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

TrainResult train(Model& model, const std::vector<EncodedExample>& train_set,
                  const std::vector<EncodedExample>& val_set, const TrainConfig& cfg,
                  bool reinit) {
    if (train_set.empty()) throw ConfigError("train: empty training set");
    if (cfg.batch_size == 0) throw ConfigError("train: batch size must be positive");
    if (cfg.decay == DecayKind::kStep && cfg.decay_every == 0) {
        throw ConfigError("train: decay interval must be positive");
    }

    // The freeze is scoped to this run; persisting the flags would pin the
    // tensors across later resumes and saved checkpoints. Names are resolved
    // before the guard arms so its destructor cannot throw.
    for (const auto& name : cfg.freeze) model.params().tensor(name);
    struct FreezeGuard {
        Model& model;
        const std::vector<std::string>& names;
        ~FreezeGuard() {
            for (const auto& name : names) model.params().set_frozen(name, false);
        }
    } guard{model, cfg.freeze};
    for (const auto& name : cfg.freeze) model.params().set_frozen(name, true);

    Rng init_rng = Rng::substream(cfg.seed, "init");
    Rng shuffle_rng = Rng::substream(cfg.seed, "shuffle");
    if (reinit) model.init_params(init_rng, cfg.init_low, cfg.init_high);

    const std::vector<EncodedExample>& val = val_set.empty() ? train_set : val_set;

    TrainResult result;
    if (cfg.max_epochs == 0) {
        result.best_val_accuracy = dataset_accuracy(model, val);
        return result;
    }

    ParamStore grads = model.params().like_zeroed();
    AdamState opt(model.params());
    ParamStore best = model.params();
    double best_acc = -1.0;
    size_t best_epoch = 0;
    size_t stale = 0;
    size_t step = 0;

    std::vector<size_t> order(train_set.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        size_t batches = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const size_t stop = std::min(order.size(), start + cfg.batch_size);
            const std::vector<size_t> batch(order.begin() + static_cast<long>(start),
                                            order.begin() + static_cast<long>(stop));
            const double loss = model.batch_gradient(train_set, batch, grads);
            if (!std::isfinite(loss)) {
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", step " + std::to_string(step));
            }
            clip_gradients(grads, cfg.clip_norm);
            double lr = cfg.learning_rate;
            if (cfg.decay == DecayKind::kStep) {
                lr *= std::pow(cfg.decay_factor,
                               static_cast<double>(step / cfg.decay_every));
            }
            adam_step(model.params(), grads, opt, lr, cfg);
            loss_sum += loss;
            ++batches;
            ++step;
        }

        const double val_acc = dataset_accuracy(model, val);
        result.history.push_back({epoch, loss_sum / static_cast<double>(batches), val_acc});

        if (val_acc > best_acc) {
            best_acc = val_acc;
            best_epoch = epoch;
            if (cfg.select_best) best = model.params();
            stale = 0;
        } else {
            ++stale;
        }
        if (cfg.select_best && stale >= cfg.patience) break;
    }

    if (cfg.select_best) model.params() = best;
    result.best_val_accuracy = best_acc;
    result.best_epoch = best_epoch;
    return result;
}

TwoStepResult two_step_train(Model& model, const std::vector<EncodedExample>& skewed,
                             const std::vector<EncodedExample>& rebalanced,
                             const std::vector<EncodedExample>& val_set,
                             const TrainConfig& cfg, bool naive) {
    TwoStepResult result;
    if (!naive) {
        // Resolve the freeze set up front so unsupported models fail before
        // any training happens.
        result.frozen = model.attention_param_names();
    }

    result.step1 = train(model, skewed, val_set, cfg, /*reinit=*/true);

    std::map<std::string, Tensor> snapshot;
    for (const auto& name : result.frozen) snapshot.emplace(name, model.params().tensor(name));

    TrainConfig step2 = cfg;
    step2.freeze = result.frozen;
    step2.max_epochs = cfg.step2_epochs;
    step2.select_best = false;
    result.step2 = train(model, rebalanced, val_set, step2, /*reinit=*/false);

    for (const auto& [name, before] : snapshot) {
        const auto after = model.params().tensor(name).data();
        const auto prior = before.data();
        if (!std::equal(after.begin(), after.end(), prior.begin(), prior.end(),
                        [](double a, double b) {
                            return std::memcmp(&a, &b, sizeof(double)) == 0;
                        })) {
            result.frozen_bit_identical = false;
        }
    }
    return result;
}

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ValidationError("cannot open history file for writing: " + path);
    out << "epoch,train_loss,val_acc\n";
    for (const auto& row : history) {
        out << row.epoch << ',' << row.train_loss << ',' << row.val_accuracy << '\n';
    }
    if (!out) throw ValidationError("history write failed: " + path);
}

}  // namespace lattn
