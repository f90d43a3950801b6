#pragma once

/**
 * Dense row-major tensors with tape-free reverse-mode differentiation.
 *
 * Every op result keeps shared handles to its inputs and a closure that
 * pushes its gradient back into them; backward() walks that graph in reverse
 * topological order. Results that do not depend on any trainable tensor keep
 * no graph at all, so inference never retains intermediate activations.
 */

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bioner/rng.hpp"

namespace bioner {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until something accumulates into it
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;
    const char* op = "leaf";
    bool requires_grad = false;

    void accumulate(std::size_t i, double g) {
        if (grad.empty()) grad.assign(value.size(), 0.0);
        grad[i] += g;
    }
    std::vector<double>& grad_buffer() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
        return grad;
    }
};

class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor scalar(double v);

    explicit operator bool() const { return static_cast<bool>(node_); }

    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
    std::size_t size() const { return node_->value.size(); }

    std::span<const double> data() const { return node_->value; }
    std::span<double> data() { return node_->value; }
    double operator[](std::size_t i) const { return node_->value[i]; }
    double& operator[](std::size_t i) { return node_->value[i]; }
    double at(std::size_t row, std::size_t col) const { return node_->value[row * node_->shape[1] + col]; }
    double item() const;

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }
    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const double> grad() const { return node_->grad; }
    std::span<double> grad() { return node_->grad_buffer(); }
    void zero_grad() { node_->grad.clear(); }

    const char* op() const { return node_->op; }
    const std::shared_ptr<Node>& node() const { return node_; }

    // Fresh leaf holding a copy of the values, detached from any graph.
    Tensor clone(bool requires_grad = false) const;

private:
    std::shared_ptr<Node> node_;
};

// Accumulates d(loss)/d(x) into the grad slot of every trainable tensor
// reachable from `loss`. Throws ContractViolation unless loss is a scalar and
// NumericError naming the op whose gradient became non-finite.
void backward(const Tensor& loss);

namespace detail {
// Builds an op result. `backward` is dropped (and parents released) when no
// parent requires grad.
Tensor make_result(const char* op, Shape shape, std::vector<double> value,
                   std::vector<Tensor> parents, std::function<void(Node&)> backward);
}  // namespace detail

// Elementwise a + b. b may also be rank 1 matching a's last dimension (row broadcast).
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

// a[m x k] * b[k x n], or a * b^T when transpose_b (b is then [n x k]).
// A rank-1 `a` is treated as a single row and yields a rank-1 result.
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b = false);

Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);

// Column-wise max of x[m x n] -> [n]. Ties go to the lowest row.
Tensor max_over_rows(const Tensor& x);

// Max over consecutive row blocks of x: block b spans `lengths[b]` rows.
// Result is [blocks x cols]. Ties go to the lowest row.
Tensor segment_max_rows(const Tensor& x, std::span<const std::size_t> lengths);

// Rank-1 inputs join along axis 0; rank-2 inputs along `axis`.
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis = 0);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
Tensor reshape(const Tensor& x, Shape shape);

// Embedding lookup: rows of table[V x D] selected by ids. Gradient is never
// routed into `frozen_row` (pass -1 for none).
Tensor gather_rows(const Tensor& table, std::span<const int> ids, int frozen_row = -1);

// Sliding windows of x[L x D] with the given width, flattened so that column
// d * width + j holds x[i + j][d]. Result is [(L - width + 1) x (D * width)].
Tensor unfold(const Tensor& x, std::size_t width);

Tensor sum(const Tensor& x);
Tensor logsumexp(const Tensor& x);

enum class Reduction { Sum, Mean };

// Cross-entropy of softmax(logits[n x C]) against integer targets.
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> targets,
                             Reduction reduction = Reduction::Mean);

// Inverted dropout: survivors scaled by 1/(1-p). Identity when !training or p == 0.
Tensor dropout(const Tensor& x, double p, bool training, Rng& rng);

// Parameter initialisers.
Tensor init_uniform(const Shape& shape, double lo, double hi, Rng& rng);
Tensor init_xavier(const Shape& shape, Rng& rng);
double xavier_bound(const Shape& shape);

}  // namespace bioner
