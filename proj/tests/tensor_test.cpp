#include <doctest.h>

#include <cmath>
#include <vector>

#include "lattn/kernels.hpp"
#include "lattn/rng.hpp"
#include "lattn/tensor.hpp"

using namespace lattn;

TEST_CASE("tensor shapes and element access") {
    Tensor v(3);
    CHECK(v.rank() == 1);
    CHECK(v.size() == 3);
    CHECK(v.cols() == 1);
    v(1) = 2.5;
    CHECK(v(1) == 2.5);

    Tensor m(2, 3);
    CHECK(m.rank() == 2);
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 3);
    m(1, 2) = -4.0;
    CHECK(m.data()[5] == -4.0);
    CHECK(m.row(1)[2] == -4.0);

    m.fill(7.0);
    for (double x : m.data()) CHECK(x == 7.0);
    CHECK(m.same_shape(Tensor(2, 3)));
    CHECK(!m.same_shape(Tensor(3, 2)));
}

TEST_CASE("softmax matches an independently computed table") {
    std::vector<double> x{1.0, 2.0, 3.0};
    std::vector<double> y(3);
    softmax(x, y);
    CHECK(y[0] == doctest::Approx(0.09003057317038046).epsilon(1e-14));
    CHECK(y[1] == doctest::Approx(0.24472847105479764).epsilon(1e-14));
    CHECK(y[2] == doctest::Approx(0.6652409557748218).epsilon(1e-14));
    CHECK(y[0] + y[1] + y[2] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("softmax is shift invariant and safe for large inputs") {
    std::vector<double> a{1000.0, 1001.0};
    std::vector<double> b{0.0, 1.0};
    std::vector<double> ya(2), yb(2);
    softmax(a, ya);
    softmax(b, yb);
    CHECK(std::isfinite(ya[0]));
    CHECK(ya[0] == doctest::Approx(yb[0]).epsilon(1e-15));
    CHECK(ya[1] == doctest::Approx(yb[1]).epsilon(1e-15));

    std::vector<double> c{0.5, 0.5, 0.5};
    softmax_inplace(c);
    for (double v : c) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("softmax_backward agrees with finite differences") {
    std::vector<double> z{0.3, -0.7, 0.2};
    std::vector<double> dy{0.1, 0.5, -0.2};
    auto loss = [&](const std::vector<double>& zz) {
        std::vector<double> y(3);
        softmax(zz, y);
        return y[0] * dy[0] + y[1] * dy[1] + y[2] * dy[2];
    };
    std::vector<double> y(3), dz(3);
    softmax(z, y);
    softmax_backward(y, dy, dz);
    for (size_t i = 0; i < 3; ++i) {
        auto zp = z, zm = z;
        zp[i] += 1e-6;
        zm[i] -= 1e-6;
        double fd = (loss(zp) - loss(zm)) / 2e-6;
        CHECK(dz[i] == doctest::Approx(fd).epsilon(1e-7));
    }
}

TEST_CASE("l2 norm and normalization") {
    std::vector<double> x{3.0, 4.0};
    CHECK(l2_norm(x) == doctest::Approx(5.0).epsilon(1e-15));
    std::vector<double> y(2);
    l2_normalize(x, y);
    CHECK(y[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(y[1] == doctest::Approx(0.8).epsilon(1e-15));

    std::vector<double> zero{0.0, 0.0};
    CHECK_THROWS_AS(l2_normalize(zero, y), NumericError);
}

TEST_CASE("matrix-vector products match naive loops") {
    Rng rng(11);
    for (auto [r, c] : {std::pair<size_t, size_t>{3, 5}, {5, 3}, {1, 7}, {7, 1}}) {
        Tensor a(r, c);
        for (auto& v : a.data()) v = rng.uniform(-1, 1);
        std::vector<double> x(c), xt(r);
        for (auto& v : x) v = rng.uniform(-1, 1);
        for (auto& v : xt) v = rng.uniform(-1, 1);

        std::vector<double> y(r), yt(c, 0.5), yt2(c, 0.5);
        matvec(a, x, y);
        matvec_t(a, xt, yt);
        matvec_t_acc(a, xt, yt2);
        for (size_t i = 0; i < r; ++i) {
            double ref = 0;
            for (size_t j = 0; j < c; ++j) ref += a(i, j) * x[j];
            CHECK(y[i] == doctest::Approx(ref).epsilon(1e-12));
        }
        for (size_t j = 0; j < c; ++j) {
            double ref = 0;
            for (size_t i = 0; i < r; ++i) ref += a(i, j) * xt[i];
            CHECK(yt[j] == doctest::Approx(ref).epsilon(1e-12));
            CHECK(yt2[j] == doctest::Approx(0.5 + ref).epsilon(1e-12));
        }
    }
}

TEST_CASE("matrix products and outer accumulation match naive loops") {
    Rng rng(12);
    Tensor a(3, 4), b(5, 4), c(3, 5);
    for (auto& v : a.data()) v = rng.uniform(-1, 1);
    for (auto& v : b.data()) v = rng.uniform(-1, 1);
    matmul_nt(a, b, c);
    for (size_t i = 0; i < 3; ++i)
        for (size_t j = 0; j < 5; ++j) {
            double ref = 0;
            for (size_t k = 0; k < 4; ++k) ref += a(i, k) * b(j, k);
            CHECK(c(i, j) == doctest::Approx(ref).epsilon(1e-12));
        }

    Tensor d(3, 5), e(5, 2), f(3, 2);
    for (auto& v : d.data()) v = rng.uniform(-1, 1);
    for (auto& v : e.data()) v = rng.uniform(-1, 1);
    f.fill(0.25);
    matmul_nn_acc(d, e, f);
    for (size_t i = 0; i < 3; ++i)
        for (size_t j = 0; j < 2; ++j) {
            double ref = 0.25;
            for (size_t k = 0; k < 5; ++k) ref += d(i, k) * e(k, j);
            CHECK(f(i, j) == doctest::Approx(ref).epsilon(1e-12));
        }

    Tensor g(5, 3), h(5, 2), p(3, 2);
    for (auto& v : g.data()) v = rng.uniform(-1, 1);
    for (auto& v : h.data()) v = rng.uniform(-1, 1);
    p.fill(-1.0);
    matmul_tn_acc(g, h, p);
    for (size_t i = 0; i < 3; ++i)
        for (size_t j = 0; j < 2; ++j) {
            double ref = -1.0;
            for (size_t k = 0; k < 5; ++k) ref += g(k, i) * h(k, j);
            CHECK(p(i, j) == doctest::Approx(ref).epsilon(1e-12));
        }

    std::vector<double> xx{1.0, -2.0};
    std::vector<double> yy{0.5, 0.25, 4.0};
    Tensor outer(2, 3);
    outer.fill(1.0);
    ger_acc(xx, yy, outer);
    CHECK(outer(0, 0) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(outer(1, 2) == doctest::Approx(-7.0).epsilon(1e-15));
}

TEST_CASE("shape mismatches in primitives are config errors") {
    Tensor a(2, 3);
    std::vector<double> x(4), y(2);
    CHECK_THROWS_AS(matvec(a, x, y), ConfigError);
}

TEST_CASE("param store zeroing, norms, and frozen bookkeeping") {
    ParamStore ps;
    ps.add("b", Tensor(2));
    ps.add("a", Tensor(2, 2), /*frozen=*/true, /*pad_pinned=*/false);
    ps.tensor("b")(0) = 3.0;
    ps.tensor("b")(1) = 4.0;

    // Iteration is name-ordered.
    std::vector<std::string> names;
    for (auto& [name, entry] : ps) names.push_back(name);
    CHECK(names == std::vector<std::string>{"a", "b"});

    CHECK(ps.global_norm() == doctest::Approx(5.0).epsilon(1e-15));

    ParamStore z = ps.like_zeroed();
    CHECK(z.entry("a").frozen);
    CHECK(z.tensor("b").size() == 2);
    CHECK(z.tensor("b")(0) == 0.0);

    ps.zero_all();
    CHECK(ps.global_norm() == 0.0);
    CHECK_THROWS_AS(ps.tensor("missing"), ConfigError);
}

TEST_CASE("grad_check accepts a correct gradient and flags a corrupted one") {
    ParamStore ps;
    ps.add("x", Tensor(3));
    auto& x = ps.tensor("x");
    x(0) = 0.3;
    x(1) = -1.2;
    x(2) = 0.7;
    const double a[3] = {1.0, 2.0, 3.0};
    const double b[3] = {0.5, -0.25, 2.0};
    auto loss = [&] {
        double s = 0;
        for (size_t i = 0; i < 3; ++i) s += a[i] * x(i) * x(i) + b[i] * x(i);
        return s;
    };
    ParamStore grads = ps.like_zeroed();
    for (size_t i = 0; i < 3; ++i) grads.tensor("x")(i) = 2 * a[i] * x(i) + b[i];

    auto res = grad_check(ps, loss, grads);
    CHECK(res.max_rel_error < 1e-8);
    CHECK(res.entries_checked == 3);

    grads.tensor("x")(1) *= 2.0;
    auto bad = grad_check(ps, loss, grads);
    CHECK(bad.max_rel_error > 0.4);
    CHECK(bad.worst_name == "x");
    CHECK(bad.worst_index == 1);
}

TEST_CASE("grad_check skips frozen tensors and the pinned pad row") {
    ParamStore ps;
    ps.add("w", Tensor(2, 2), /*frozen=*/false, /*pad_pinned=*/true);
    ps.add("frozen", Tensor(2), /*frozen=*/true);
    auto& w = ps.tensor("w");
    w(1, 0) = 0.5;
    w(1, 1) = -0.5;
    auto loss = [&] { return w(1, 0) * w(1, 0) + 3.0 * w(1, 1); };
    ParamStore grads = ps.like_zeroed();
    grads.tensor("w")(1, 0) = 2 * w(1, 0);
    grads.tensor("w")(1, 1) = 3.0;
    // Deliberately wrong entries in skipped regions must not be probed.
    grads.tensor("w")(0, 0) = 99.0;
    grads.tensor("frozen")(0) = 99.0;

    auto res = grad_check(ps, loss, grads);
    CHECK(res.max_rel_error < 1e-8);
    CHECK(res.entries_checked == 2);
}

TEST_CASE("scalar and vectorized kernels agree") {
    const auto& scalar = kern::scalar_backend();
    if (!kern::avx2_supported()) {
        MESSAGE("AVX2 not available; scalar backend only");
        return;
    }
    const auto& simd = kern::avx2_backend();
    Rng rng(99);
    for (size_t n : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 18u, 100u}) {
        std::vector<double> x(n), y0(n), y1(n);
        for (auto& v : x) v = rng.uniform(-2, 2);
        for (size_t i = 0; i < n; ++i) y0[i] = y1[i] = rng.uniform(-2, 2);

        CHECK(scalar.dot(x.data(), y0.data(), n) ==
              doctest::Approx(simd.dot(x.data(), y1.data(), n)).epsilon(1e-13));
        CHECK(scalar.sum(x.data(), n) == doctest::Approx(simd.sum(x.data(), n)).epsilon(1e-13));
        CHECK(scalar.sum_sq(x.data(), n) ==
              doctest::Approx(simd.sum_sq(x.data(), n)).epsilon(1e-13));

        scalar.axpy(0.37, x.data(), y0.data(), n);
        simd.axpy(0.37, x.data(), y1.data(), n);
        for (size_t i = 0; i < n; ++i) CHECK(y0[i] == doctest::Approx(y1[i]).epsilon(1e-13));

        scalar.scale(y0.data(), -1.75, n);
        simd.scale(y1.data(), -1.75, n);
        for (size_t i = 0; i < n; ++i) CHECK(y0[i] == doctest::Approx(y1[i]).epsilon(1e-13));

        scalar.mul(x.data(), y0.data(), n);
        simd.mul(x.data(), y1.data(), n);
        for (size_t i = 0; i < n; ++i) CHECK(y0[i] == doctest::Approx(y1[i]).epsilon(1e-13));
    }
}

TEST_CASE("rng streams are deterministic and substreams are independent") {
    Rng a(42), b(42);
    for (int i = 0; i < 16; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng s1 = Rng::substream(42, "init");
    Rng s2 = Rng::substream(42, "init");
    Rng s3 = Rng::substream(42, "shuffle");
    CHECK(s1.next_u64() == s2.next_u64());
    CHECK(s1.next_u64() != s3.next_u64());

    Rng u(7);
    for (int i = 0; i < 1000; ++i) {
        CHECK(u.below(10) < 10);
        double v = u.uniform(-0.5, 0.25);
        CHECK(v >= -0.5);
        CHECK(v < 0.25);
    }

    std::vector<int> v1{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, v2 = v1;
    Rng r1(7), r2(7);
    r1.shuffle(v1);
    r2.shuffle(v2);
    CHECK(v1 == v2);
}
