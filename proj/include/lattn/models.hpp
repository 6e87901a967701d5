#pragma once

#include <string>
#include <vector>

#include "lattn/corpus.hpp"
#include "lattn/embeddings.hpp"
#include "lattn/rng.hpp"
#include "lattn/tensor.hpp"

namespace lattn {

enum class EmbeddingKind { kDict, kBdlstm };
enum class HeadKind { kNone, kStandard, kLatent };

struct ModelConfig {
    EmbeddingKind embedding = EmbeddingKind::kDict;
    HeadKind head = HeadKind::kLatent;
    size_t vocab_size = 0;
    size_t seq_len = 25;      // J
    size_t embed_dim = 50;    // d for dict tables; word-vector width for BDLSTM
    size_t lstm_hidden = 25;  // m per direction (BDLSTM output width is 2m)
    size_t num_classes = 0;   // M
    bool tie_embeddings = false;
    bool normalize_weights = true;  // rescale active weights to unit L2 norm
};

// Maps "dict-latent", "bdlstm-attn", ... onto (embedding, head); ConfigError
// on anything else.
void parse_model_kind(const std::string& kind, ModelConfig& cfg);
std::string model_kind_name(const ModelConfig& cfg);

// Attention internals surfaced for inspection dumps and invariant tests.
// l and A are filled for the latent head only; w holds the final attention
// distribution (the single attention layer's weights for the standard head).
struct ForwardDiagnostics {
    std::vector<double> l;
    Tensor A;  // {J, J}; row i = token i's distribution over positions
    std::vector<double> w;
    std::vector<double> o;
    std::vector<double> probs;
};

class Model {
public:
    explicit Model(ModelConfig cfg);

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    // Width of the per-token representation the heads consume.
    size_t rep_width() const;
    // Stored embedding parameter sets: 1 when tied or headless, else one per
    // attention role.
    size_t num_embedding_sets() const;
    // Tensor names making up embedding set s (dict: one table; BDLSTM:
    // wordvec/fwd/bwd).
    std::vector<std::string> set_param_names(size_t set) const;
    // The attention parameters a two-step run freezes: embedding sets feeding
    // the attention scores plus u (and V for the latent head). ConfigError
    // for headless or tied models, which have no freezable subset.
    std::vector<std::string> attention_param_names() const;

    // Uniform [low, high) for every trainable entry; PAD rows stay zero.
    void init_params(Rng& rng, double low = -0.1, double high = 0.1);

    // Everything backward() needs from one example's forward pass.
    struct Forward {
        std::vector<int> ids;
        std::vector<Tensor> E;            // {J, rep} per stored set
        std::vector<BdlstmTrace> traces;  // BDLSTM only, parallel to E
        std::vector<double> l;            // latent weights (latent head)
        Tensor A;                         // {J, J} (latent head)
        std::vector<double> w;            // attention weights before normalization
        std::vector<double> w_hat;        // after optional normalization
        double w_norm = 1.0;
        std::vector<double> o;
        std::vector<double> logits;
        std::vector<double> probs;
        bool consumed = false;
    };

    Forward forward(const std::vector<int>& ids) const;

    // Accumulates d(NLL)/d(params) into grads and returns the example's NLL.
    // A Forward may be consumed once; a second call throws ConfigError.
    double backward(Forward& fwd, int target, ParamStore& grads) const;

    std::vector<double> probs(const std::vector<int>& ids) const;
    ForwardDiagnostics diagnostics(const std::vector<int>& ids) const;

    // NLL of the gold label, computed from logits without touching gradients.
    double loss(const std::vector<int>& ids, int target) const;

    // Mean NLL over the batch; mean gradients accumulated into grads (zeroed
    // first). Throws ValidationError on an example without a known label.
    double batch_gradient(const std::vector<EncodedExample>& data,
                          const std::vector<size_t>& batch, ParamStore& grads) const;

    void save(const std::string& path) const;
    // Rebuilds the architecture from the checkpoint's names and shapes.
    static Model load(const std::string& path);

private:
    const Tensor& theta(size_t set) const;
    std::string dict_table_name(size_t set) const;
    std::string bdlstm_name(size_t set, const char* part) const;
    // Embedding matrix for attention role r (respects tying).
    const Tensor& role_embedding(const Forward& fwd, size_t role) const;
    void embed_sets(Forward& fwd) const;
    void backprop_embedding(const Forward& fwd, size_t role, const Tensor& dE,
                            ParamStore& grads) const;
    void head_forward(Forward& fwd) const;
    void head_backward(Forward& fwd, std::span<const double> d_o, ParamStore& grads) const;

    ModelConfig cfg_;
    ParamStore params_;
};

// Argmax with ties broken toward the lowest label id.
int predict_label(const std::vector<double>& probs);

}  // namespace lattn
