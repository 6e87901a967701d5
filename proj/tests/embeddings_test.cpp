#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "lattn/embeddings.hpp"
#include "lattn/rng.hpp"
#include "lattn/tensor.hpp"

using namespace lattn;

namespace {

// Rows are the i/f/o/g blocks of [w_x, w_h, bias] for d_in = 1, m = 1.
Tensor t_fwd() {
    Tensor T(4, 3);
    double vals[12] = {0.5, -0.3, 0.1, 0.2, 0.4, -0.2, -0.6, 0.1, 0.3, 0.7, -0.5, 0.2};
    std::copy(vals, vals + 12, T.data().begin());
    return T;
}

Tensor t_bwd() {
    Tensor T(4, 3);
    double vals[12] = {-0.2, 0.6, 0.0, 0.3, -0.1, 0.4, 0.5, 0.2, -0.3, -0.4, 0.7, 0.1};
    std::copy(vals, vals + 12, T.data().begin());
    return T;
}

Tensor column(std::vector<double> vals) {
    Tensor xs(vals.size(), 1);
    std::copy(vals.begin(), vals.end(), xs.data().begin());
    return xs;
}

}  // namespace

TEST_CASE("dictionary embedding looks up rows and keeps PAD at zero") {
    Tensor theta(4, 2);
    for (size_t i = 0; i < 4; ++i)
        for (size_t j = 0; j < 2; ++j) theta(i, j) = i == 0 ? 0.0 : 10.0 * i + j;

    Tensor E = dict_embed({2, 0, 3}, theta);
    REQUIRE(E.rows() == 3);
    CHECK(E(0, 0) == 20.0);
    CHECK(E(0, 1) == 21.0);
    CHECK(E(1, 0) == 0.0);
    CHECK(E(1, 1) == 0.0);
    CHECK(E(2, 0) == 30.0);

    Tensor dE(3, 2);
    dE.fill(1.0);
    Tensor dtheta(4, 2);
    dict_embed_backward({2, 0, 2}, dE, dtheta);
    CHECK(dtheta(2, 0) == 2.0);  // two occurrences accumulate
    CHECK(dtheta(0, 0) == 0.0);  // PAD position skipped
    CHECK(dtheta(3, 0) == 0.0);
}

TEST_CASE("lstm cell with zero weights has the closed-form half gates") {
    Tensor T(4, 3);  // all zeros: i = f = o = sigmoid(0) = 0.5, g = tanh(0) = 0
    std::vector<double> x{0.7}, h_prev{0.4}, c_prev{0.8};
    std::vector<double> h(1), c(1);
    lstm_cell(x, h_prev, c_prev, T, 1, h, c);
    CHECK(c[0] == doctest::Approx(0.4).epsilon(1e-15));  // 0.5 * c_prev
    CHECK(h[0] == doctest::Approx(0.5 * std::tanh(0.4)).epsilon(1e-15));

    std::vector<double> zero{0.0};
    lstm_cell(x, zero, zero, T, 1, h, c);
    CHECK(c[0] == 0.0);
    CHECK(h[0] == 0.0);
}

TEST_CASE("lstm run matches an independently computed trace") {
    // Hand-set weights, inputs [0.5, -1.0]; reference values computed with a
    // separate NumPy implementation of the same cell.
    auto trace = lstm_run(column({0.5, -1.0}), t_fwd(), 1);
    CHECK(trace.i(0, 0) == doctest::Approx(0.5866175789173301).epsilon(1e-14));
    CHECK(trace.f(0, 0) == doctest::Approx(0.47502081252106).epsilon(1e-14));
    CHECK(trace.o(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(trace.g(0, 0) == doctest::Approx(0.5005202111902353).epsilon(1e-14));
    CHECK(trace.c(0, 0) == doctest::Approx(0.2936139544876066).epsilon(1e-14));
    CHECK(trace.h(0, 0) == doctest::Approx(0.1427288468200545).epsilon(1e-14));

    CHECK(trace.i(1, 0) == doctest::Approx(0.3910695457432888).epsilon(1e-14));
    CHECK(trace.f(1, 0) == doctest::Approx(0.4151031505009846).epsilon(1e-14));
    CHECK(trace.o(1, 0) == doctest::Approx(0.713873730736118).epsilon(1e-14));
    CHECK(trace.g(1, 0) == doctest::Approx(-0.5163606124009029).epsilon(1e-14));
    CHECK(trace.c(1, 0) == doctest::Approx(-0.08005283259248931).epsilon(1e-14));
    CHECK(trace.h(1, 0) == doctest::Approx(-0.05702585038603064).epsilon(1e-14));
    CHECK(trace.tanh_c(1, 0) == doctest::Approx(std::tanh(trace.c(1, 0))).epsilon(1e-15));
}

TEST_CASE("lstm backward matches finite differences through time") {
    Tensor T = t_fwd();
    Tensor xs = column({0.5, -1.0, 0.25});
    // Scalar objective: weighted sum of hidden outputs over time.
    const double wt[3] = {1.0, -0.5, 2.0};
    auto objective = [&](const Tensor& Tq, const Tensor& xq) {
        auto tr = lstm_run(xq, Tq, 1);
        double s = 0;
        for (size_t t = 0; t < 3; ++t) s += wt[t] * tr.h(t, 0);
        return s;
    };

    auto trace = lstm_run(xs, T, 1);
    Tensor dh(3, 1);
    for (size_t t = 0; t < 3; ++t) dh(t, 0) = wt[t];
    Tensor dT(4, 3), dxs(3, 1);
    lstm_backward(trace, T, dh, dT, dxs);

    const double eps = 1e-6;
    for (size_t k = 0; k < T.size(); ++k) {
        Tensor Tp = T, Tm = T;
        Tp.data()[k] += eps;
        Tm.data()[k] -= eps;
        double fd = (objective(Tp, xs) - objective(Tm, xs)) / (2 * eps);
        CHECK(dT.data()[k] == doctest::Approx(fd).epsilon(1e-6));
    }
    for (size_t k = 0; k < xs.size(); ++k) {
        Tensor xp = xs, xm = xs;
        xp.data()[k] += eps;
        xm.data()[k] -= eps;
        double fd = (objective(T, xp) - objective(T, xm)) / (2 * eps);
        CHECK(dxs.data()[k] == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("bidirectional embedding aligns both halves to token positions") {
    auto trace = bdlstm_embed(column({0.5, -1.0}), t_fwd(), t_bwd(), 1);
    REQUIRE(trace.out.rows() == 2);
    REQUIRE(trace.out.cols() == 2);
    // Forward half in original order; backward half re-aligned. Reference
    // values from the NumPy trace (backward runs over the reversed input).
    CHECK(trace.out(0, 0) == doctest::Approx(0.1427288468200545).epsilon(1e-14));
    CHECK(trace.out(0, 1) == doctest::Approx(0.06752328428980328).epsilon(1e-14));
    CHECK(trace.out(1, 0) == doctest::Approx(-0.05702585038603064).epsilon(1e-14));
    CHECK(trace.out(1, 1) == doctest::Approx(0.07712111689219663).epsilon(1e-14));

    // With equal weights and a palindromic input, the backward pass sees the
    // same sequence, so each output row concatenates mirrored positions.
    Tensor pal = column({0.3, -0.4, 0.3});
    auto sym = bdlstm_embed(pal, t_fwd(), t_fwd(), 1);
    for (size_t t = 0; t < 3; ++t) {
        CHECK(sym.out(t, 0) == doctest::Approx(sym.fwd.h(t, 0)).epsilon(1e-15));
        CHECK(sym.out(t, 1) == doctest::Approx(sym.fwd.h(2 - t, 0)).epsilon(1e-15));
    }
}

TEST_CASE("bidirectional backward matches finite differences") {
    Tensor Tf = t_fwd(), Tb = t_bwd();
    Tensor xs = column({0.5, -1.0, 0.25});
    Rng rng(3);
    Tensor dout(3, 2);
    for (auto& v : dout.data()) v = rng.uniform(-1, 1);

    auto objective = [&](const Tensor& tf, const Tensor& tb, const Tensor& xq) {
        auto tr = bdlstm_embed(xq, tf, tb, 1);
        double s = 0;
        for (size_t k = 0; k < tr.out.size(); ++k) s += dout.data()[k] * tr.out.data()[k];
        return s;
    };

    auto trace = bdlstm_embed(xs, Tf, Tb, 1);
    auto [dh_fwd, dh_bwd] = bdlstm_split_grad(dout, 1);
    Tensor dTf(4, 3), dTb(4, 3), dxs(3, 1);
    bdlstm_backward(trace, Tf, Tb, dh_fwd, dh_bwd, dTf, dTb, dxs);

    const double eps = 1e-6;
    for (size_t k = 0; k < Tf.size(); ++k) {
        Tensor p = Tf, m = Tf;
        p.data()[k] += eps;
        m.data()[k] -= eps;
        double fd = (objective(p, Tb, xs) - objective(m, Tb, xs)) / (2 * eps);
        CHECK(dTf.data()[k] == doctest::Approx(fd).epsilon(1e-6));
    }
    for (size_t k = 0; k < Tb.size(); ++k) {
        Tensor p = Tb, m = Tb;
        p.data()[k] += eps;
        m.data()[k] -= eps;
        double fd = (objective(Tf, p, xs) - objective(Tf, m, xs)) / (2 * eps);
        CHECK(dTb.data()[k] == doctest::Approx(fd).epsilon(1e-6));
    }
    for (size_t k = 0; k < xs.size(); ++k) {
        Tensor p = xs, m = xs;
        p.data()[k] += eps;
        m.data()[k] -= eps;
        double fd = (objective(Tf, Tb, p) - objective(Tf, Tb, m)) / (2 * eps);
        CHECK(dxs.data()[k] == doctest::Approx(fd).epsilon(1e-6));
    }
}
