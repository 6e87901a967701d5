#include "lattn/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "lattn/kernels.hpp"

namespace lattn {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
}

}  // namespace

Tensor& ParamStore::add(const std::string& name, Tensor t, bool frozen, bool pad_pinned) {
    auto [it, inserted] = entries_.emplace(name, ParamEntry{std::move(t), frozen, pad_pinned});
    require(inserted, "duplicate parameter name");
    return it->second.value;
}

Tensor& ParamStore::tensor(const std::string& name) { return entry(name).value; }

const Tensor& ParamStore::tensor(const std::string& name) const { return entry(name).value; }

ParamEntry& ParamStore::entry(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
}

const ParamEntry& ParamStore::entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
}

void ParamStore::set_frozen(const std::string& name, bool frozen) { entry(name).frozen = frozen; }

ParamStore ParamStore::like_zeroed() const {
    ParamStore out;
    for (const auto& [name, e] : entries_) {
        Tensor t = e.value;
        t.fill(0.0);
        out.add(name, std::move(t), e.frozen, e.pad_pinned);
    }
    return out;
}

void ParamStore::zero_all() {
    for (auto& [name, e] : entries_) e.value.fill(0.0);
}

double ParamStore::global_norm() const {
    double total = 0.0;
    for (const auto& [name, e] : entries_) {
        total += kern::sum_sq(e.value.data().data(), e.value.size());
    }
    return std::sqrt(total);
}

// ---------------------------------------------------------------------------

void softmax(std::span<const double> x, std::span<double> y) {
    require(x.size() == y.size() && !x.empty(), "softmax: bad sizes");
    const double m = *std::max_element(x.begin(), x.end());
    double z = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        y[i] = std::exp(x[i] - m);
        z += y[i];
    }
    const double inv = 1.0 / z;
    kern::scale(y.data(), inv, y.size());
}

void softmax_inplace(std::span<double> x) { softmax(x, x); }

void softmax_backward(std::span<const double> y, std::span<const double> dy, std::span<double> dz) {
    require(y.size() == dy.size() && y.size() == dz.size(), "softmax_backward: bad sizes");
    const double inner = kern::dot(y.data(), dy.data(), y.size());
    for (size_t i = 0; i < y.size(); ++i) dz[i] = y[i] * (dy[i] - inner);
}

double l2_norm(std::span<const double> x) { return std::sqrt(kern::sum_sq(x.data(), x.size())); }

void l2_normalize(std::span<const double> x, std::span<double> y, double eps) {
    require(x.size() == y.size(), "l2_normalize: bad sizes");
    const double n = l2_norm(x);
    if (!(n > eps)) throw NumericError("l2_normalize: input norm is near zero");
    const double inv = 1.0 / n;
    for (size_t i = 0; i < x.size(); ++i) y[i] = x[i] * inv;
}

double dot(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), "dot: bad sizes");
    return kern::dot(a.data(), b.data(), a.size());
}

void add_scaled(double alpha, std::span<const double> x, std::span<double> y) {
    require(x.size() == y.size(), "add_scaled: bad sizes");
    kern::axpy(alpha, x.data(), y.data(), x.size());
}

void matvec(const Tensor& a, std::span<const double> x, std::span<double> y) {
    require(a.rank() == 2 && a.cols() == x.size() && a.rows() == y.size(), "matvec: bad shapes");
    for (size_t i = 0; i < a.rows(); ++i) {
        y[i] = kern::dot(a.row(i).data(), x.data(), a.cols());
    }
}

void matvec_t(const Tensor& a, std::span<const double> x, std::span<double> y) {
    std::fill(y.begin(), y.end(), 0.0);
    matvec_t_acc(a, x, y);
}

void matvec_t_acc(const Tensor& a, std::span<const double> x, std::span<double> y) {
    require(a.rank() == 2 && a.rows() == x.size() && a.cols() == y.size(), "matvec_t: bad shapes");
    for (size_t i = 0; i < a.rows(); ++i) {
        kern::axpy(x[i], a.row(i).data(), y.data(), a.cols());
    }
}

void matmul_nt(const Tensor& a, const Tensor& b, Tensor& c) {
    require(a.rank() == 2 && b.rank() == 2 && c.rank() == 2 && a.cols() == b.cols() &&
                c.rows() == a.rows() && c.cols() == b.rows(),
            "matmul_nt: bad shapes");
    for (size_t i = 0; i < a.rows(); ++i) {
        for (size_t k = 0; k < b.rows(); ++k) {
            c(i, k) = kern::dot(a.row(i).data(), b.row(k).data(), a.cols());
        }
    }
}

void matmul_nn_acc(const Tensor& a, const Tensor& b, Tensor& c) {
    require(a.rank() == 2 && b.rank() == 2 && c.rank() == 2 && a.cols() == b.rows() &&
                c.rows() == a.rows() && c.cols() == b.cols(),
            "matmul_nn: bad shapes");
    for (size_t i = 0; i < a.rows(); ++i) {
        auto ci = c.row(i);
        for (size_t k = 0; k < a.cols(); ++k) {
            kern::axpy(a(i, k), b.row(k).data(), ci.data(), b.cols());
        }
    }
}

void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& c) {
    require(a.rank() == 2 && b.rank() == 2 && c.rank() == 2 && a.rows() == b.rows() &&
                c.rows() == a.cols() && c.cols() == b.cols(),
            "matmul_tn: bad shapes");
    for (size_t i = 0; i < a.rows(); ++i) {
        auto bi = b.row(i);
        for (size_t k = 0; k < a.cols(); ++k) {
            kern::axpy(a(i, k), bi.data(), c.row(k).data(), b.cols());
        }
    }
}

void ger_acc(std::span<const double> x, std::span<const double> y, Tensor& a) {
    require(a.rank() == 2 && a.rows() == x.size() && a.cols() == y.size(), "ger: bad shapes");
    for (size_t i = 0; i < x.size(); ++i) {
        kern::axpy(x[i], y.data(), a.row(i).data(), y.size());
    }
}

// ---------------------------------------------------------------------------

GradCheckResult grad_check(ParamStore& params, const std::function<double()>& loss,
                           const ParamStore& analytic, double eps) {
    GradCheckResult result;
    for (auto& [name, e] : params) {
        if (e.frozen) continue;
        const Tensor& grad = analytic.tensor(name);
        require(grad.same_shape(e.value), "grad_check: analytic shape mismatch");
        const size_t skip_below = e.pad_pinned ? e.value.cols() : 0;  // row 0 of tables
        for (size_t i = skip_below; i < e.value.size(); ++i) {
            const double saved = e.value(i);
            e.value(i) = saved + eps;
            const double up = loss();
            e.value(i) = saved - eps;
            const double down = loss();
            e.value(i) = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double a = grad(i);
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            const double rel = std::abs(a - numeric) / denom;
            if (rel > result.max_rel_error) {
                result.max_rel_error = rel;
                result.worst_name = name;
                result.worst_index = i;
            }
            ++result.entries_checked;
        }
    }
    return result;
}

}  // namespace lattn
