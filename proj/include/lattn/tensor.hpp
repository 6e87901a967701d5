#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lattn/error.hpp"

namespace lattn {

// Dense row-major tensor of 64-bit floats, rank 1 or 2.
//
// Layout conventions used throughout the codebase:
//   - token tables:      {vocab_size, width}, one row per token id (row 0 = PAD)
//   - sequence matrices: {seq_len, width},    one row per position
//   - projections:       {out_dim, in_dim},   applied as y = W x
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(size_t n) : shape_{n}, data_(n, 0.0) {}
    Tensor(size_t r, size_t c) : shape_{r, c}, data_(r * c, 0.0) {}

    size_t rank() const { return shape_.size(); }
    size_t size() const { return data_.size(); }
    const std::vector<size_t>& shape() const { return shape_; }

    size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
    size_t cols() const { return rank() == 2 ? shape_[1] : (shape_.empty() ? 0 : 1); }

    double& operator()(size_t i) { return data_[i]; }
    double operator()(size_t i) const { return data_[i]; }
    double& operator()(size_t i, size_t j) { return data_[i * shape_[1] + j]; }
    double operator()(size_t i, size_t j) const { return data_[i * shape_[1] + j]; }

    std::span<double> row(size_t i) { return {data_.data() + i * shape_[1], shape_[1]}; }
    std::span<const double> row(size_t i) const { return {data_.data() + i * shape_[1], shape_[1]}; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    void fill(double v) { data_.assign(data_.size(), v); }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

private:
    std::vector<size_t> shape_;
    std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Parameter store: named tensors plus update-control flags.

struct ParamEntry {
    Tensor value;
    // Frozen tensors receive no optimizer updates and report zero gradients.
    bool frozen = false;
    // Token tables reserve row 0 for PAD: held at zero, no gradient flows into it.
    bool pad_pinned = false;
};

class ParamStore {
public:
    Tensor& add(const std::string& name, Tensor t, bool frozen = false, bool pad_pinned = false);

    bool has(const std::string& name) const { return entries_.count(name) != 0; }
    Tensor& tensor(const std::string& name);
    const Tensor& tensor(const std::string& name) const;
    ParamEntry& entry(const std::string& name);
    const ParamEntry& entry(const std::string& name) const;
    void set_frozen(const std::string& name, bool frozen);

    size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    // Name-sorted iteration keeps every pass over the store deterministic.
    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    // Same names/shapes/flags, zero values. Used for gradient buffers.
    ParamStore like_zeroed() const;
    void zero_all();

    // L2 norm over every entry (frozen tensors hold zero gradients by contract).
    double global_norm() const;

private:
    std::map<std::string, ParamEntry> entries_;
};

// ---------------------------------------------------------------------------
// Primitive ops. Shape mismatches throw ConfigError.

// y = softmax(x), computed with max-subtraction.
void softmax(std::span<const double> x, std::span<double> y);
void softmax_inplace(std::span<double> x);
// Given y = softmax(z) and dL/dy, computes dL/dz = y .* (dy - <y, dy>).
void softmax_backward(std::span<const double> y, std::span<const double> dy, std::span<double> dz);

double l2_norm(std::span<const double> x);
// y = x / ||x||; throws NumericError when ||x|| <= eps.
void l2_normalize(std::span<const double> x, std::span<double> y, double eps = 1e-12);

double dot(std::span<const double> a, std::span<const double> b);
void add_scaled(double alpha, std::span<const double> x, std::span<double> y);  // y += alpha*x

void matvec(const Tensor& a, std::span<const double> x, std::span<double> y);        // y = A x
void matvec_t(const Tensor& a, std::span<const double> x, std::span<double> y);      // y = A' x
void matvec_t_acc(const Tensor& a, std::span<const double> x, std::span<double> y);  // y += A' x

void matmul_nt(const Tensor& a, const Tensor& b, Tensor& c);      // c  = a b'
void matmul_nn_acc(const Tensor& a, const Tensor& b, Tensor& c);  // c += a b
void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& c);  // c += a' b

void ger_acc(std::span<const double> x, std::span<const double> y, Tensor& a);  // a += x y'

// ---------------------------------------------------------------------------
// Finite-difference gradient checker (always 64-bit).
//
// `loss` must recompute the objective from the current contents of `params`;
// `analytic` holds dLoss/dparams from the hand-coded backward pass. Every
// non-frozen entry is perturbed by +/-eps and the central difference is
// compared against the analytic value. Row 0 of pad-pinned tensors is
// skipped: no gradient flows into it by construction.
struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_name;
    size_t worst_index = 0;
    size_t entries_checked = 0;
};

GradCheckResult grad_check(ParamStore& params, const std::function<double()>& loss,
                           const ParamStore& analytic, double eps = 1e-5);

}  // namespace lattn
