#include "lattn/models.hpp"

#include <algorithm>
#include <cmath>

#include "lattn/checkpoint.hpp"
#include "lattn/error.hpp"
#include "lattn/kernels.hpp"

namespace lattn {

namespace {

constexpr const char* kMetaName = "meta.config";

void check(bool ok, const char* msg) {
    if (!ok) throw ConfigError(msg);
}

}  // namespace

void parse_model_kind(const std::string& kind, ModelConfig& cfg) {
    const auto dash = kind.find('-');
    const std::string embed = kind.substr(0, dash);
    const std::string head = dash == std::string::npos ? "" : kind.substr(dash + 1);
    if (embed == "dict") {
        cfg.embedding = EmbeddingKind::kDict;
    } else if (embed == "bdlstm") {
        cfg.embedding = EmbeddingKind::kBdlstm;
    } else {
        throw ConfigError("unknown model kind: " + kind);
    }
    if (head == "none") {
        cfg.head = HeadKind::kNone;
    } else if (head == "attn") {
        cfg.head = HeadKind::kStandard;
    } else if (head == "latent") {
        cfg.head = HeadKind::kLatent;
    } else {
        throw ConfigError("unknown model kind: " + kind);
    }
}

std::string model_kind_name(const ModelConfig& cfg) {
    std::string name = cfg.embedding == EmbeddingKind::kDict ? "dict-" : "bdlstm-";
    switch (cfg.head) {
        case HeadKind::kNone: return name + "none";
        case HeadKind::kStandard: return name + "attn";
        case HeadKind::kLatent: return name + "latent";
    }
    throw ConfigError("unknown head kind");
}

Model::Model(ModelConfig cfg) : cfg_(cfg) {
    check(cfg_.vocab_size >= 2, "model: vocab must contain at least PAD and UNK");
    check(cfg_.num_classes >= 1, "model: need at least one class");
    check(cfg_.seq_len >= 2, "model: sequence length must be at least 2");
    check(cfg_.embed_dim >= 1, "model: embedding width must be positive");
    if (cfg_.embedding == EmbeddingKind::kBdlstm) {
        check(cfg_.lstm_hidden >= 1, "model: LSTM hidden size must be positive");
    }
    if (cfg_.tie_embeddings && cfg_.head == HeadKind::kNone) {
        throw ConfigError("model: tie_embeddings is meaningless without an attention head");
    }

    const size_t rep = rep_width();
    for (size_t s = 0; s < num_embedding_sets(); ++s) {
        if (cfg_.embedding == EmbeddingKind::kDict) {
            params_.add(dict_table_name(s), Tensor(cfg_.vocab_size, cfg_.embed_dim),
                        /*frozen=*/false, /*pad_pinned=*/true);
        } else {
            const size_t m = cfg_.lstm_hidden;
            params_.add(bdlstm_name(s, "wordvec"), Tensor(cfg_.vocab_size, cfg_.embed_dim),
                        /*frozen=*/false, /*pad_pinned=*/true);
            params_.add(bdlstm_name(s, "fwd"), Tensor(4 * m, cfg_.embed_dim + m + 1));
            params_.add(bdlstm_name(s, "bwd"), Tensor(4 * m, cfg_.embed_dim + m + 1));
        }
    }
    if (cfg_.head != HeadKind::kNone) params_.add("attn.u", Tensor(rep));
    if (cfg_.head == HeadKind::kLatent) params_.add("attn.V", Tensor(cfg_.seq_len, rep));
    params_.add("pred.P", Tensor(cfg_.num_classes, rep));

    Tensor meta(2);
    meta(0) = static_cast<double>(cfg_.seq_len);
    meta(1) = cfg_.normalize_weights ? 1.0 : 0.0;
    params_.add(kMetaName, std::move(meta), /*frozen=*/true);
}

size_t Model::rep_width() const {
    return cfg_.embedding == EmbeddingKind::kDict ? cfg_.embed_dim : 2 * cfg_.lstm_hidden;
}

size_t Model::num_embedding_sets() const {
    if (cfg_.tie_embeddings) return 1;
    switch (cfg_.head) {
        case HeadKind::kNone: return 1;
        case HeadKind::kStandard: return 2;
        case HeadKind::kLatent: return 3;
    }
    throw ConfigError("unknown head kind");
}

std::string Model::dict_table_name(size_t set) const {
    return "embed.dict.theta" + std::to_string(set + 1);
}

std::string Model::bdlstm_name(size_t set, const char* part) const {
    if (num_embedding_sets() == 1) return std::string("embed.bdlstm.") + part;
    return "embed.bdlstm" + std::to_string(set + 1) + "." + part;
}

std::vector<std::string> Model::set_param_names(size_t set) const {
    if (set >= num_embedding_sets()) throw ConfigError("set_param_names: no such set");
    if (cfg_.embedding == EmbeddingKind::kDict) return {dict_table_name(set)};
    return {bdlstm_name(set, "wordvec"), bdlstm_name(set, "fwd"), bdlstm_name(set, "bwd")};
}

std::vector<std::string> Model::attention_param_names() const {
    if (cfg_.head == HeadKind::kNone) {
        throw ConfigError("this model has no attention parameters to freeze");
    }
    if (cfg_.tie_embeddings) {
        throw ConfigError(
            "tied embeddings share one parameter set; the attention subset cannot be frozen "
            "independently");
    }
    std::vector<std::string> names = set_param_names(0);
    if (cfg_.head == HeadKind::kLatent) {
        for (const auto& n : set_param_names(1)) names.push_back(n);
    }
    names.push_back("attn.u");
    if (cfg_.head == HeadKind::kLatent) names.push_back("attn.V");
    return names;
}

void Model::init_params(Rng& rng, double low, double high) {
    for (auto& [name, e] : params_) {
        if (e.frozen) continue;
        for (double& v : e.value.data()) v = rng.uniform(low, high);
        if (e.pad_pinned) {
            auto pad = e.value.row(0);
            std::fill(pad.begin(), pad.end(), 0.0);
        }
    }
}

const Tensor& Model::role_embedding(const Forward& fwd, size_t role) const {
    return fwd.E[cfg_.tie_embeddings ? 0 : role];
}

void Model::embed_sets(Forward& fwd) const {
    if (cfg_.embedding == EmbeddingKind::kDict && cfg_.head == HeadKind::kNone) {
        return;  // the order-free sum reads the table directly
    }
    for (size_t s = 0; s < num_embedding_sets(); ++s) {
        if (cfg_.embedding == EmbeddingKind::kDict) {
            fwd.E.push_back(dict_embed(fwd.ids, params_.tensor(dict_table_name(s))));
        } else {
            Tensor xs = dict_embed(fwd.ids, params_.tensor(bdlstm_name(s, "wordvec")));
            fwd.traces.push_back(bdlstm_embed(xs, params_.tensor(bdlstm_name(s, "fwd")),
                                              params_.tensor(bdlstm_name(s, "bwd")),
                                              cfg_.lstm_hidden));
            fwd.E.push_back(fwd.traces.back().out);
        }
    }
}

void Model::head_forward(Forward& fwd) const {
    const size_t J = cfg_.seq_len;
    const size_t rep = rep_width();
    fwd.o.assign(rep, 0.0);

    switch (cfg_.head) {
        case HeadKind::kNone: {
            if (cfg_.embedding == EmbeddingKind::kDict) {
                // Summing table rows in sorted-id order makes the representation
                // bitwise identical under any permutation of the tokens.
                std::vector<int> sorted = fwd.ids;
                std::sort(sorted.begin(), sorted.end());
                const Tensor& th = params_.tensor(dict_table_name(0));
                for (int id : sorted) {
                    if (id == Vocab::kPadId) continue;
                    add_scaled(1.0, th.row(static_cast<size_t>(id)), fwd.o);
                }
            } else {
                const size_t m = cfg_.lstm_hidden;
                const BdlstmTrace& tr = fwd.traces[0];
                auto hf = tr.fwd.h.row(J - 1);
                auto hb = tr.bwd.h.row(J - 1);
                std::copy(hf.begin(), hf.end(), fwd.o.begin());
                std::copy(hb.begin(), hb.end(), fwd.o.begin() + static_cast<long>(m));
            }
            break;
        }
        case HeadKind::kStandard: {
            const Tensor& E1 = role_embedding(fwd, 0);
            const Tensor& E2 = role_embedding(fwd, 1);
            const Tensor& u = params_.tensor("attn.u");
            std::vector<double> s(J);
            for (size_t j = 0; j < J; ++j) s[j] = dot(u.data(), E1.row(j));
            fwd.w.resize(J);
            softmax(s, fwd.w);
            fwd.w_hat = fwd.w;
            for (size_t j = 0; j < J; ++j) add_scaled(fwd.w[j], E2.row(j), fwd.o);
            break;
        }
        case HeadKind::kLatent: {
            const Tensor& E1 = role_embedding(fwd, 0);
            const Tensor& E2 = role_embedding(fwd, 1);
            const Tensor& E3 = role_embedding(fwd, 2);
            const Tensor& u = params_.tensor("attn.u");
            const Tensor& V = params_.tensor("attn.V");

            std::vector<double> s(J);
            for (size_t j = 0; j < J; ++j) s[j] = dot(u.data(), E1.row(j));
            fwd.l.resize(J);
            softmax(s, fwd.l);

            // Row i of A is token i's attention distribution over positions.
            fwd.A = Tensor(J, J);
            std::vector<double> scores(J);
            for (size_t i = 0; i < J; ++i) {
                matvec(V, E2.row(i), scores);
                softmax(scores, fwd.A.row(i));
            }

            fwd.w.assign(J, 0.0);
            for (size_t i = 0; i < J; ++i) add_scaled(fwd.l[i], fwd.A.row(i), fwd.w);

            if (cfg_.normalize_weights) {
                fwd.w_norm = l2_norm(fwd.w);
                fwd.w_hat.resize(J);
                l2_normalize(fwd.w, fwd.w_hat);
            } else {
                fwd.w_norm = 1.0;
                fwd.w_hat = fwd.w;
            }
            for (size_t r = 0; r < J; ++r) add_scaled(fwd.w_hat[r], E3.row(r), fwd.o);
            break;
        }
    }

    const Tensor& P = params_.tensor("pred.P");
    fwd.logits.resize(cfg_.num_classes);
    matvec(P, fwd.o, fwd.logits);
    fwd.probs.resize(cfg_.num_classes);
    softmax(fwd.logits, fwd.probs);
}

Model::Forward Model::forward(const std::vector<int>& ids) const {
    if (ids.size() != cfg_.seq_len) {
        throw ConfigError("forward: input length does not match the configured sequence length");
    }
    Forward fwd;
    fwd.ids = ids;
    embed_sets(fwd);
    head_forward(fwd);
    return fwd;
}

void Model::backprop_embedding(const Forward& fwd, size_t role, const Tensor& dE,
                               ParamStore& grads) const {
    const size_t s = cfg_.tie_embeddings ? 0 : role;
    if (cfg_.embedding == EmbeddingKind::kDict) {
        ParamEntry& g = grads.entry(dict_table_name(s));
        if (g.frozen) return;
        dict_embed_backward(fwd.ids, dE, g.value);
    } else {
        ParamEntry& g_wv = grads.entry(bdlstm_name(s, "wordvec"));
        ParamEntry& g_fwd = grads.entry(bdlstm_name(s, "fwd"));
        ParamEntry& g_bwd = grads.entry(bdlstm_name(s, "bwd"));
        if (g_wv.frozen && g_fwd.frozen && g_bwd.frozen) return;
        auto [dh_fwd, dh_bwd] = bdlstm_split_grad(dE, cfg_.lstm_hidden);
        Tensor dxs(cfg_.seq_len, cfg_.embed_dim);
        Tensor scratch_fwd = g_fwd.frozen ? Tensor(g_fwd.value.rows(), g_fwd.value.cols()) : Tensor();
        Tensor scratch_bwd = g_bwd.frozen ? Tensor(g_bwd.value.rows(), g_bwd.value.cols()) : Tensor();
        Tensor& dT_fwd = g_fwd.frozen ? scratch_fwd : g_fwd.value;
        Tensor& dT_bwd = g_bwd.frozen ? scratch_bwd : g_bwd.value;
        bdlstm_backward(fwd.traces[s], params_.tensor(bdlstm_name(s, "fwd")),
                        params_.tensor(bdlstm_name(s, "bwd")), dh_fwd, dh_bwd, dT_fwd, dT_bwd,
                        dxs);
        if (!g_wv.frozen) dict_embed_backward(fwd.ids, dxs, g_wv.value);
    }
}

void Model::head_backward(Forward& fwd, std::span<const double> d_o, ParamStore& grads) const {
    const size_t J = cfg_.seq_len;
    const size_t rep = rep_width();

    switch (cfg_.head) {
        case HeadKind::kNone: {
            if (cfg_.embedding == EmbeddingKind::kDict) {
                ParamEntry& g = grads.entry(dict_table_name(0));
                if (g.frozen) return;
                std::vector<int> sorted = fwd.ids;
                std::sort(sorted.begin(), sorted.end());
                for (int id : sorted) {
                    if (id == Vocab::kPadId) continue;
                    add_scaled(1.0, d_o, g.value.row(static_cast<size_t>(id)));
                }
            } else {
                const size_t m = cfg_.lstm_hidden;
                Tensor dh_fwd(J, m), dh_bwd(J, m);
                std::copy(d_o.begin(), d_o.begin() + static_cast<long>(m),
                          dh_fwd.row(J - 1).begin());
                std::copy(d_o.begin() + static_cast<long>(m), d_o.end(),
                          dh_bwd.row(J - 1).begin());
                ParamEntry& g_wv = grads.entry(bdlstm_name(0, "wordvec"));
                ParamEntry& g_fwd = grads.entry(bdlstm_name(0, "fwd"));
                ParamEntry& g_bwd = grads.entry(bdlstm_name(0, "bwd"));
                if (g_wv.frozen && g_fwd.frozen && g_bwd.frozen) return;
                Tensor dxs(J, cfg_.embed_dim);
                Tensor scratch_fwd =
                    g_fwd.frozen ? Tensor(g_fwd.value.rows(), g_fwd.value.cols()) : Tensor();
                Tensor scratch_bwd =
                    g_bwd.frozen ? Tensor(g_bwd.value.rows(), g_bwd.value.cols()) : Tensor();
                bdlstm_backward(fwd.traces[0], params_.tensor(bdlstm_name(0, "fwd")),
                                params_.tensor(bdlstm_name(0, "bwd")), dh_fwd, dh_bwd,
                                g_fwd.frozen ? scratch_fwd : g_fwd.value,
                                g_bwd.frozen ? scratch_bwd : g_bwd.value, dxs);
                if (!g_wv.frozen) dict_embed_backward(fwd.ids, dxs, g_wv.value);
            }
            break;
        }
        case HeadKind::kStandard: {
            const Tensor& E1 = role_embedding(fwd, 0);
            const Tensor& E2 = role_embedding(fwd, 1);
            const Tensor& u = params_.tensor("attn.u");

            Tensor dE2(J, rep);
            std::vector<double> da(J);
            for (size_t j = 0; j < J; ++j) {
                add_scaled(fwd.w[j], d_o, dE2.row(j));
                da[j] = dot(d_o, E2.row(j));
            }
            std::vector<double> ds(J);
            softmax_backward(fwd.w, da, ds);

            Tensor dE1(J, rep);
            ParamEntry& g_u = grads.entry("attn.u");
            for (size_t j = 0; j < J; ++j) {
                if (!g_u.frozen) add_scaled(ds[j], E1.row(j), g_u.value.data());
                add_scaled(ds[j], u.data(), dE1.row(j));
            }
            backprop_embedding(fwd, 1, dE2, grads);
            backprop_embedding(fwd, 0, dE1, grads);
            break;
        }
        case HeadKind::kLatent: {
            const Tensor& E1 = role_embedding(fwd, 0);
            const Tensor& E2 = role_embedding(fwd, 1);
            const Tensor& E3 = role_embedding(fwd, 2);
            const Tensor& u = params_.tensor("attn.u");
            const Tensor& V = params_.tensor("attn.V");

            // o = sum_r w_hat[r] E3[r]
            Tensor dE3(J, rep);
            std::vector<double> dw_hat(J);
            for (size_t r = 0; r < J; ++r) {
                add_scaled(fwd.w_hat[r], d_o, dE3.row(r));
                dw_hat[r] = dot(d_o, E3.row(r));
            }

            // w_hat = w / ||w||: exact Jacobian of the normalization
            std::vector<double> dw(J);
            if (cfg_.normalize_weights) {
                const double n = fwd.w_norm;
                const double s = dot(fwd.w, dw_hat);
                for (size_t r = 0; r < J; ++r) {
                    dw[r] = dw_hat[r] / n - fwd.w[r] * s / (n * n * n);
                }
            } else {
                dw = dw_hat;
            }

            // w = A' l (A rows are per-token position distributions)
            std::vector<double> dl(J), dA_row(J), dscores(J);
            Tensor dE2(J, rep);
            ParamEntry& g_V = grads.entry("attn.V");
            for (size_t i = 0; i < J; ++i) {
                dl[i] = dot(fwd.A.row(i), dw);
                for (size_t r = 0; r < J; ++r) dA_row[r] = fwd.l[i] * dw[r];
                softmax_backward(fwd.A.row(i), dA_row, dscores);
                if (!g_V.frozen) ger_acc(dscores, E2.row(i), g_V.value);
                matvec_t_acc(V, dscores, dE2.row(i));
            }

            std::vector<double> ds(J);
            softmax_backward(fwd.l, dl, ds);
            Tensor dE1(J, rep);
            ParamEntry& g_u = grads.entry("attn.u");
            for (size_t j = 0; j < J; ++j) {
                if (!g_u.frozen) add_scaled(ds[j], E1.row(j), g_u.value.data());
                add_scaled(ds[j], u.data(), dE1.row(j));
            }
            backprop_embedding(fwd, 2, dE3, grads);
            backprop_embedding(fwd, 1, dE2, grads);
            backprop_embedding(fwd, 0, dE1, grads);
            break;
        }
    }
}

double Model::backward(Forward& fwd, int target, ParamStore& grads) const {
    if (fwd.consumed) {
        throw ConfigError("backward: this forward pass was already consumed");
    }
    fwd.consumed = true;
    const size_t M = cfg_.num_classes;
    if (target < 0 || static_cast<size_t>(target) >= M) {
        throw ValidationError("backward: gold label id out of range");
    }

    const double mx = *std::max_element(fwd.logits.begin(), fwd.logits.end());
    double sum = 0.0;
    for (double v : fwd.logits) sum += std::exp(v - mx);
    const double loss = mx + std::log(sum) - fwd.logits[static_cast<size_t>(target)];

    std::vector<double> dlogits = fwd.probs;
    dlogits[static_cast<size_t>(target)] -= 1.0;

    const Tensor& P = params_.tensor("pred.P");
    ParamEntry& g_P = grads.entry("pred.P");
    const size_t rep = rep_width();
    std::vector<double> d_o(rep, 0.0);
    for (size_t k = 0; k < M; ++k) {
        if (!g_P.frozen) add_scaled(dlogits[k], fwd.o, g_P.value.row(k));
        add_scaled(dlogits[k], P.row(k), d_o);
    }
    head_backward(fwd, d_o, grads);
    return loss;
}

std::vector<double> Model::probs(const std::vector<int>& ids) const {
    return forward(ids).probs;
}

double Model::loss(const std::vector<int>& ids, int target) const {
    if (target < 0 || static_cast<size_t>(target) >= cfg_.num_classes) {
        throw ValidationError("loss: gold label id out of range");
    }
    const Forward fwd = forward(ids);
    const double mx = *std::max_element(fwd.logits.begin(), fwd.logits.end());
    double sum = 0.0;
    for (double v : fwd.logits) sum += std::exp(v - mx);
    return mx + std::log(sum) - fwd.logits[static_cast<size_t>(target)];
}

ForwardDiagnostics Model::diagnostics(const std::vector<int>& ids) const {
    Forward fwd = forward(ids);
    ForwardDiagnostics d;
    d.l = std::move(fwd.l);
    d.A = std::move(fwd.A);
    d.w = std::move(fwd.w);
    d.o = std::move(fwd.o);
    d.probs = std::move(fwd.probs);
    return d;
}

double Model::batch_gradient(const std::vector<EncodedExample>& data,
                             const std::vector<size_t>& batch, ParamStore& grads) const {
    if (batch.empty()) throw ConfigError("batch_gradient: empty batch");
    grads.zero_all();
    double total = 0.0;
    for (const size_t idx : batch) {
        const EncodedExample& ex = data.at(idx);
        if (ex.target < 0) {
            throw ValidationError("batch_gradient: example lacks a label inside the label space");
        }
        Forward fwd = forward(ex.ids);
        total += backward(fwd, ex.target, grads);
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (auto& [name, e] : grads) {
        kern::scale(e.value.data().data(), inv, e.value.size());
    }
    return total * inv;
}

void Model::save(const std::string& path) const { save_checkpoint(path, params_); }

Model Model::load(const std::string& path) {
    ParamStore ps = load_checkpoint(path);
    if (!ps.has(kMetaName) || !ps.has("pred.P")) {
        throw ValidationError("checkpoint is missing required tensors");
    }
    const Tensor& meta = ps.tensor(kMetaName);
    if (meta.size() != 2) throw ValidationError("checkpoint has a malformed meta tensor");

    ModelConfig cfg;
    cfg.seq_len = static_cast<size_t>(meta(0));
    cfg.normalize_weights = meta(1) != 0.0;
    cfg.head = ps.has("attn.V")   ? HeadKind::kLatent
               : ps.has("attn.u") ? HeadKind::kStandard
                                  : HeadKind::kNone;
    cfg.num_classes = ps.tensor("pred.P").rows();
    if (ps.has("embed.dict.theta1")) {
        cfg.embedding = EmbeddingKind::kDict;
        const Tensor& th = ps.tensor("embed.dict.theta1");
        cfg.vocab_size = th.rows();
        cfg.embed_dim = th.cols();
        cfg.tie_embeddings = cfg.head != HeadKind::kNone && !ps.has("embed.dict.theta2");
    } else {
        cfg.embedding = EmbeddingKind::kBdlstm;
        const bool single = ps.has("embed.bdlstm.wordvec");
        const std::string wv = single ? "embed.bdlstm.wordvec" : "embed.bdlstm1.wordvec";
        const std::string fw = single ? "embed.bdlstm.fwd" : "embed.bdlstm1.fwd";
        if (!ps.has(wv) || !ps.has(fw)) {
            throw ValidationError("checkpoint is missing embedding tensors");
        }
        cfg.vocab_size = ps.tensor(wv).rows();
        cfg.embed_dim = ps.tensor(wv).cols();
        cfg.lstm_hidden = ps.tensor(fw).rows() / 4;
        cfg.tie_embeddings = cfg.head != HeadKind::kNone && single;
    }

    Model model(cfg);
    size_t matched = 0;
    for (auto& [name, e] : model.params_) {
        if (!ps.has(name)) throw ValidationError("checkpoint is missing tensor " + name);
        ParamEntry& src = ps.entry(name);
        if (!src.value.same_shape(e.value)) {
            throw ValidationError("checkpoint tensor " + name + " has an unexpected shape");
        }
        e.value = std::move(src.value);
        e.frozen = src.frozen;
        ++matched;
    }
    if (matched != ps.size()) {
        throw ValidationError("checkpoint contains tensors this architecture does not use");
    }
    model.params_.entry(kMetaName).frozen = true;
    for (auto& [name, e] : model.params_) {
        if (!e.pad_pinned) continue;
        auto pad = e.value.row(0);
        std::fill(pad.begin(), pad.end(), 0.0);
    }
    return model;
}

int predict_label(const std::vector<double>& probs) {
    if (probs.empty()) throw ConfigError("predict_label: empty distribution");
    const auto it = std::max_element(probs.begin(), probs.end());
    return static_cast<int>(it - probs.begin());
}

}  // namespace lattn
