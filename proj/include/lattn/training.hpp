#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lattn/models.hpp"
#include "lattn/tensor.hpp"

namespace lattn {

enum class DecayKind { kNone, kStep };

struct TrainConfig {
    double learning_rate = 0.001;
    DecayKind decay = DecayKind::kNone;
    double decay_factor = 0.9;
    size_t decay_every = 1000;  // minibatch steps per decay
    double clip_norm = 40.0;
    size_t batch_size = 32;
    double init_low = -0.1;
    double init_high = 0.1;
    size_t max_epochs = 30;
    size_t patience = 5;  // epochs without a validation improvement
    uint64_t seed = 1;
    std::vector<std::string> freeze;  // parameter names pinned for the run
    // When false, the run keeps its final-epoch parameters instead of the
    // best-validation snapshot and never stops early. The rebalancing step of
    // two-step training uses this: a validation set dominated by majority
    // classes would otherwise pull the run straight back to its step-1 state.
    bool select_best = true;
    // Epoch budget of the second two-step phase (two_step_train only).
    size_t step2_epochs = 30;

    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;

    // Attention heads: lr 0.001, no decay, clip 40.
    // No attention:    lr 0.01, x0.9 every 1000 steps, clip 5.
    static TrainConfig defaults_for(HeadKind head);
};

// Scales every gradient so the global L2 norm never exceeds max_norm.
// Returns the pre-clip norm.
double clip_gradients(ParamStore& grads, double max_norm);

struct AdamState {
    ParamStore m;
    ParamStore v;
    size_t t = 0;
    explicit AdamState(const ParamStore& params)
        : m(params.like_zeroed()), v(params.like_zeroed()) {}
};

// One bias-corrected Adam update. Frozen parameters are skipped entirely:
// neither their values nor their moments move.
void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state, double lr,
               const TrainConfig& cfg);

struct EpochStats {
    size_t epoch = 0;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    double best_val_accuracy = 0.0;
    size_t best_epoch = 0;
};

// Fraction of examples whose argmax prediction matches the gold label.
double dataset_accuracy(const Model& model, const std::vector<EncodedExample>& data);

// Minibatch training with shuffled epochs. The model is left holding the
// best-validation parameters (or the final ones, see select_best). When
// val_set is empty, validation accuracy is measured on the training set.
// reinit=false resumes from the model's current parameters.
// Deterministic given (seed, data, config); non-finite loss raises
// NumericError.
TrainResult train(Model& model, const std::vector<EncodedExample>& train_set,
                  const std::vector<EncodedExample>& val_set, const TrainConfig& cfg,
                  bool reinit = true);

struct TwoStepResult {
    TrainResult step1;
    TrainResult step2;
    std::vector<std::string> frozen;  // names pinned during step 2
    // Audit: frozen tensors compared bitwise across step 2 (vacuously true
    // when nothing is frozen).
    bool frozen_bit_identical = true;
};

// Step 1: standard training on the skewed set. Step 2: training continues on
// the rebalanced set with the attention parameters frozen (naive=true skips
// the freeze). Headless and tied models cannot freeze an attention subset;
// requesting it is a ConfigError.
TwoStepResult two_step_train(Model& model, const std::vector<EncodedExample>& skewed,
                             const std::vector<EncodedExample>& rebalanced,
                             const std::vector<EncodedExample>& val_set,
                             const TrainConfig& cfg, bool naive);

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history);

}  // namespace lattn
