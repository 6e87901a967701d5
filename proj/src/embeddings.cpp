#include "lattn/embeddings.hpp"

#include <cmath>
#include <utility>

#include "lattn/corpus.hpp"
#include "lattn/error.hpp"
#include "lattn/kernels.hpp"

namespace lattn {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void check_gate_shape(const Tensor& T, size_t d_in, size_t m, const char* who) {
    if (T.rows() != 4 * m || T.cols() != d_in + m + 1) {
        throw ConfigError(std::string(who) + ": gate matrix must be {4m, d_in+m+1}");
    }
}

// Fills cat = [x; h_prev; 1] and computes the four gate blocks.
void run_gates(std::span<const double> x, std::span<const double> h_prev, const Tensor& T,
               size_t m, std::vector<double>& cat, double* gi, double* gf, double* go,
               double* gg) {
    const size_t d_in = x.size();
    std::copy(x.begin(), x.end(), cat.begin());
    std::copy(h_prev.begin(), h_prev.end(), cat.begin() + static_cast<long>(d_in));
    cat[d_in + m] = 1.0;
    for (size_t k = 0; k < m; ++k) {
        gi[k] = sigmoid(kern::dot(T.row(k).data(), cat.data(), cat.size()));
        gf[k] = sigmoid(kern::dot(T.row(m + k).data(), cat.data(), cat.size()));
        go[k] = sigmoid(kern::dot(T.row(2 * m + k).data(), cat.data(), cat.size()));
        gg[k] = std::tanh(kern::dot(T.row(3 * m + k).data(), cat.data(), cat.size()));
    }
}

}  // namespace

Tensor dict_embed(const std::vector<int>& ids, const Tensor& theta) {
    Tensor E(ids.size(), theta.cols());
    for (size_t j = 0; j < ids.size(); ++j) {
        const int id = ids[j];
        if (id < 0 || static_cast<size_t>(id) >= theta.rows()) {
            throw ConfigError("dict_embed: token id out of range");
        }
        auto src = theta.row(static_cast<size_t>(id));
        auto dst = E.row(j);
        std::copy(src.begin(), src.end(), dst.begin());
    }
    return E;
}

void dict_embed_backward(const std::vector<int>& ids, const Tensor& dE, Tensor& dtheta) {
    for (size_t j = 0; j < ids.size(); ++j) {
        if (ids[j] == Vocab::kPadId) continue;
        auto src = dE.row(j);
        auto dst = dtheta.row(static_cast<size_t>(ids[j]));
        kern::axpy(1.0, src.data(), dst.data(), src.size());
    }
}

void lstm_cell(std::span<const double> x, std::span<const double> h_prev,
               std::span<const double> c_prev, const Tensor& T, size_t m,
               std::span<double> h_out, std::span<double> c_out) {
    check_gate_shape(T, x.size(), m, "lstm_cell");
    std::vector<double> cat(x.size() + m + 1);
    std::vector<double> gi(m), gf(m), go(m), gg(m);
    run_gates(x, h_prev, T, m, cat, gi.data(), gf.data(), go.data(), gg.data());
    for (size_t k = 0; k < m; ++k) {
        c_out[k] = gf[k] * c_prev[k] + gi[k] * gg[k];
        h_out[k] = go[k] * std::tanh(c_out[k]);
    }
}

LstmTrace lstm_run(const Tensor& xs, const Tensor& T, size_t m) {
    const size_t J = xs.rows();
    const size_t d_in = xs.cols();
    check_gate_shape(T, d_in, m, "lstm_run");

    LstmTrace tr{xs,          Tensor(J, m), Tensor(J, m), Tensor(J, m),
                 Tensor(J, m), Tensor(J, m), Tensor(J, m), Tensor(J, m)};
    std::vector<double> cat(d_in + m + 1);
    std::vector<double> zero(m, 0.0);
    for (size_t t = 0; t < J; ++t) {
        std::span<const double> h_prev = t > 0 ? tr.h.row(t - 1) : std::span<const double>(zero);
        std::span<const double> c_prev = t > 0 ? tr.c.row(t - 1) : std::span<const double>(zero);
        run_gates(xs.row(t), h_prev, T, m, cat, tr.i.row(t).data(), tr.f.row(t).data(),
                  tr.o.row(t).data(), tr.g.row(t).data());
        for (size_t k = 0; k < m; ++k) {
            tr.c(t, k) = tr.f(t, k) * c_prev[k] + tr.i(t, k) * tr.g(t, k);
            tr.tanh_c(t, k) = std::tanh(tr.c(t, k));
            tr.h(t, k) = tr.o(t, k) * tr.tanh_c(t, k);
        }
    }
    return tr;
}

void lstm_backward(const LstmTrace& trace, const Tensor& T, const Tensor& dh, Tensor& dT,
                   Tensor& dxs) {
    const size_t J = trace.h.rows();
    const size_t m = trace.h.cols();
    const size_t d_in = trace.x.cols();
    check_gate_shape(T, d_in, m, "lstm_backward");

    std::vector<double> dh_next(m, 0.0), dc_next(m, 0.0);
    std::vector<double> cat(d_in + m + 1), dcat(d_in + m + 1), dp(4 * m);
    std::vector<double> zero(m, 0.0);
    for (size_t t = J; t-- > 0;) {
        std::span<const double> h_prev =
            t > 0 ? trace.h.row(t - 1) : std::span<const double>(zero);
        std::span<const double> c_prev =
            t > 0 ? trace.c.row(t - 1) : std::span<const double>(zero);
        for (size_t k = 0; k < m; ++k) {
            const double i = trace.i(t, k);
            const double f = trace.f(t, k);
            const double o = trace.o(t, k);
            const double g = trace.g(t, k);
            const double th = trace.tanh_c(t, k);
            const double dht = dh(t, k) + dh_next[k];
            const double dc = dc_next[k] + dht * o * (1.0 - th * th);
            const double d_o = dht * th;
            const double di = dc * g;
            const double df = dc * c_prev[k];
            const double dg = dc * i;
            dc_next[k] = dc * f;
            dp[k] = di * i * (1.0 - i);
            dp[m + k] = df * f * (1.0 - f);
            dp[2 * m + k] = d_o * o * (1.0 - o);
            dp[3 * m + k] = dg * (1.0 - g * g);
        }
        auto x = trace.x.row(t);
        std::copy(x.begin(), x.end(), cat.begin());
        std::copy(h_prev.begin(), h_prev.end(), cat.begin() + static_cast<long>(d_in));
        cat[d_in + m] = 1.0;
        std::fill(dcat.begin(), dcat.end(), 0.0);
        for (size_t k = 0; k < 4 * m; ++k) {
            kern::axpy(dp[k], cat.data(), dT.row(k).data(), cat.size());
            kern::axpy(dp[k], T.row(k).data(), dcat.data(), cat.size());
        }
        kern::axpy(1.0, dcat.data(), dxs.row(t).data(), d_in);
        std::copy(dcat.begin() + static_cast<long>(d_in),
                  dcat.begin() + static_cast<long>(d_in + m), dh_next.begin());
    }
}

BdlstmTrace bdlstm_embed(const Tensor& xs, const Tensor& T_fwd, const Tensor& T_bwd,
                         size_t m) {
    const size_t J = xs.rows();
    Tensor xs_rev(J, xs.cols());
    for (size_t t = 0; t < J; ++t) {
        auto src = xs.row(J - 1 - t);
        auto dst = xs_rev.row(t);
        std::copy(src.begin(), src.end(), dst.begin());
    }
    BdlstmTrace tr{lstm_run(xs, T_fwd, m), lstm_run(xs_rev, T_bwd, m), Tensor(J, 2 * m)};
    for (size_t t = 0; t < J; ++t) {
        auto fwd = tr.fwd.h.row(t);
        auto bwd = tr.bwd.h.row(J - 1 - t);
        auto dst = tr.out.row(t);
        std::copy(fwd.begin(), fwd.end(), dst.begin());
        std::copy(bwd.begin(), bwd.end(), dst.begin() + static_cast<long>(m));
    }
    return tr;
}

std::pair<Tensor, Tensor> bdlstm_split_grad(const Tensor& dout, size_t m) {
    const size_t J = dout.rows();
    if (dout.cols() != 2 * m) throw ConfigError("bdlstm_split_grad: width must be 2m");
    Tensor dh_fwd(J, m), dh_bwd(J, m);
    for (size_t t = 0; t < J; ++t) {
        auto src = dout.row(t);
        std::copy(src.begin(), src.begin() + static_cast<long>(m), dh_fwd.row(t).begin());
        std::copy(src.begin() + static_cast<long>(m), src.end(),
                  dh_bwd.row(J - 1 - t).begin());
    }
    return {std::move(dh_fwd), std::move(dh_bwd)};
}

void bdlstm_backward(const BdlstmTrace& trace, const Tensor& T_fwd, const Tensor& T_bwd,
                     const Tensor& dh_fwd, const Tensor& dh_bwd, Tensor& dT_fwd,
                     Tensor& dT_bwd, Tensor& dxs) {
    const size_t J = trace.out.rows();
    const size_t d_in = trace.fwd.x.cols();
    Tensor dxs_fwd(J, d_in), dxs_bwd(J, d_in);
    lstm_backward(trace.fwd, T_fwd, dh_fwd, dT_fwd, dxs_fwd);
    lstm_backward(trace.bwd, T_bwd, dh_bwd, dT_bwd, dxs_bwd);
    for (size_t t = 0; t < J; ++t) {
        kern::axpy(1.0, dxs_fwd.row(t).data(), dxs.row(t).data(), d_in);
        kern::axpy(1.0, dxs_bwd.row(J - 1 - t).data(), dxs.row(t).data(), d_in);
    }
}

}  // namespace lattn
