#include "bioner/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "bioner/errors.hpp"

namespace bioner {

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
    out << ']';
    return out.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) : node_(std::make_shared<Node>()) {
    for (auto d : shape) {
        if (d == 0) throw ContractViolation("tensor dimensions must be positive, got " + shape_str(shape));
    }
    if (data.size() != shape_size(shape)) {
        throw ContractViolation("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                                shape_str(shape));
    }
    node_->shape = std::move(shape);
    node_->value = std::move(data);
    node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

double Tensor::item() const {
    if (size() != 1) throw ContractViolation("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
}

Tensor Tensor::clone(bool requires_grad) const { return Tensor(shape(), node_->value, requires_grad); }

namespace {

void check_finite(const char* op, const std::vector<double>& v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x)) throw NumericError(op, std::string("non-finite ") + what);
    }
}

}  // namespace

void backward(const Tensor& loss) {
    if (!loss) throw ContractViolation("backward on empty tensor");
    if (loss.size() != 1) throw ContractViolation("backward needs a scalar loss, got shape " + shape_str(loss.shape()));
    if (!std::isfinite(loss.item())) throw NumericError(loss.op(), "loss is not finite");
    if (!loss.requires_grad()) return;

    // Iterative post-order DFS over trainable nodes.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->accumulate(0, 1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (!node->backward || node->grad.empty()) continue;
        check_finite(node->op, node->grad, "gradient");
        node->backward(*node);
    }
}

namespace detail {

Tensor make_result(const char* op, Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward) {
    auto node = std::make_shared<Node>();
    node->op = op;
    node->shape = std::move(shape);
    node->value = std::move(value);
    check_finite(op, node->value, "value");
    bool needs = std::any_of(parents.begin(), parents.end(), [](const Tensor& p) { return p.requires_grad(); });
    if (needs) {
        node->requires_grad = true;
        node->parents.reserve(parents.size());
        for (auto& p : parents) node->parents.push_back(p.node());
        node->backward = std::move(backward);
    }
    return Tensor(std::move(node));
}

}  // namespace detail

using detail::make_result;

namespace {

bool wants(const Node& self, std::size_t i) { return self.parents[i]->requires_grad; }

void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractViolation(msg);
}

template <typename F, typename G>
Tensor unary(const char* op, const Tensor& x, F fwd, G dfdx) {
    std::vector<double> out(x.size());
    auto in = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
    return make_result(op, x.shape(), std::move(out), {x}, [dfdx](Node& self) {
        auto& in = self.parents[0]->value;
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * dfdx(in[i], self.value[i]);
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) {
        std::vector<double> out(a.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
        return make_result("add", a.shape(), std::move(out), {a, b}, [](Node& self) {
            for (std::size_t p = 0; p < 2; ++p) {
                if (!wants(self, p)) continue;
                auto& g = self.parents[p]->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
            }
        });
    }
    require(b.rank() == 1 && b.dim(0) == a.shape().back(),
            "add: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    const std::size_t n = b.size();
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i % n];
    return make_result("add", a.shape(), std::move(out), {a, b}, [n](Node& self) {
        if (wants(self, 0)) {
            auto& g = self.parents[0]->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (wants(self, 1)) {
            auto& g = self.parents[1]->grad_buffer();
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % n] += self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(), "mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    return make_result("mul", a.shape(), std::move(out), {a, b}, [](Node& self) {
        for (std::size_t p = 0; p < 2; ++p) {
            if (!wants(self, p)) continue;
            auto& other = self.parents[1 - p]->value;
            auto& g = self.parents[p]->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * other[i];
        }
    });
}

Tensor scale(const Tensor& a, double factor) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
    return make_result("scale", a.shape(), std::move(out), {a}, [factor](Node& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
    });
}

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b) {
    require(a.rank() == 1 || a.rank() == 2, "matmul: lhs must be rank 1 or 2");
    require(b.rank() == 2, "matmul: rhs must be rank 2");
    const std::size_t m = a.rank() == 1 ? 1 : a.dim(0);
    const std::size_t k = a.shape().back();
    const std::size_t kb = transpose_b ? b.dim(1) : b.dim(0);
    const std::size_t n = transpose_b ? b.dim(0) : b.dim(1);
    require(k == kb, "matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " + shape_str(b.shape()) +
                         (transpose_b ? "^T" : ""));

    const double* A = a.data().data();
    const double* B = b.data().data();
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double* c = out.data() + i * n;
        const double* arow = A + i * k;
        if (transpose_b) {
            for (std::size_t j = 0; j < n; ++j) {
                const double* brow = B + j * k;
                double acc = 0.0;
                for (std::size_t t = 0; t < k; ++t) acc += arow[t] * brow[t];
                c[j] = acc;
            }
        } else {
            for (std::size_t t = 0; t < k; ++t) {
                const double av = arow[t];
                if (av == 0.0) continue;
                const double* brow = B + t * n;
                for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
            }
        }
    }
    Shape shape = a.rank() == 1 ? Shape{n} : Shape{m, n};
    return make_result("matmul", std::move(shape), std::move(out), {a, b}, [m, k, n, transpose_b](Node& self) {
        const double* A = self.parents[0]->value.data();
        const double* B = self.parents[1]->value.data();
        const double* G = self.grad.data();
        if (wants(self, 0)) {
            double* dA = self.parents[0]->grad_buffer().data();
            for (std::size_t i = 0; i < m; ++i) {
                const double* grow = G + i * n;
                double* darow = dA + i * k;
                if (transpose_b) {
                    for (std::size_t j = 0; j < n; ++j) {
                        const double gv = grow[j];
                        if (gv == 0.0) continue;
                        const double* brow = B + j * k;
                        for (std::size_t t = 0; t < k; ++t) darow[t] += gv * brow[t];
                    }
                } else {
                    for (std::size_t t = 0; t < k; ++t) {
                        const double* brow = B + t * n;
                        double acc = 0.0;
                        for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        darow[t] += acc;
                    }
                }
            }
        }
        if (wants(self, 1)) {
            double* dB = self.parents[1]->grad_buffer().data();
            for (std::size_t i = 0; i < m; ++i) {
                const double* grow = G + i * n;
                const double* arow = A + i * k;
                if (transpose_b) {
                    for (std::size_t j = 0; j < n; ++j) {
                        const double gv = grow[j];
                        if (gv == 0.0) continue;
                        double* dbrow = dB + j * k;
                        for (std::size_t t = 0; t < k; ++t) dbrow[t] += gv * arow[t];
                    }
                } else {
                    for (std::size_t t = 0; t < k; ++t) {
                        const double av = arow[t];
                        if (av == 0.0) continue;
                        double* dbrow = dB + t * n;
                        for (std::size_t j = 0; j < n; ++j) dbrow[j] += av * grow[j];
                    }
                }
            }
        }
    });
}

Tensor tanh(const Tensor& x) {
    return unary(
        "tanh", x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
    return unary(
        "sigmoid", x,
        [](double v) {
            if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
            double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
    return unary(
        "relu", x, [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor max_over_rows(const Tensor& x) {
    require(x.rank() == 2, "max_over_rows: expected rank 2, got " + shape_str(x.shape()));
    const std::size_t m = x.dim(0), n = x.dim(1);
    std::vector<double> out(n);
    std::vector<std::size_t> arg(n, 0);
    for (std::size_t j = 0; j < n; ++j) {
        double best = x[j];
        for (std::size_t i = 1; i < m; ++i) {
            if (x[i * n + j] > best) {
                best = x[i * n + j];
                arg[j] = i;
            }
        }
        out[j] = best;
    }
    return make_result("max_over_rows", {n}, std::move(out), {x}, [arg = std::move(arg), n](Node& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t j = 0; j < n; ++j) g[arg[j] * n + j] += self.grad[j];
    });
}

Tensor segment_max_rows(const Tensor& x, std::span<const std::size_t> lengths) {
    require(x.rank() == 2, "segment_max_rows: expected rank 2, got " + shape_str(x.shape()));
    const std::size_t n = x.dim(1), blocks = lengths.size();
    std::size_t total = 0;
    for (auto len : lengths) {
        require(len > 0, "segment_max_rows: empty segment");
        total += len;
    }
    require(total == x.dim(0), "segment_max_rows: segment lengths do not cover the rows");
    std::vector<double> out(blocks * n);
    std::vector<std::size_t> arg(blocks * n);
    std::size_t start = 0;
    for (std::size_t b = 0; b < blocks; ++b) {
        for (std::size_t j = 0; j < n; ++j) {
            std::size_t best_row = start;
            double best = x[start * n + j];
            for (std::size_t i = start + 1; i < start + lengths[b]; ++i) {
                if (x[i * n + j] > best) {
                    best = x[i * n + j];
                    best_row = i;
                }
            }
            out[b * n + j] = best;
            arg[b * n + j] = best_row * n + j;
        }
        start += lengths[b];
    }
    return make_result("segment_max_rows", {blocks, n}, std::move(out), {x}, [arg = std::move(arg)](Node& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < arg.size(); ++i) g[arg[i]] += self.grad[i];
    });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    require(!parts.empty(), "concat: no inputs");
    const std::size_t rank = parts[0].rank();
    for (auto& p : parts) require(p.rank() == rank, "concat: mixed ranks");
    if (rank == 1 || axis == 0) {
        Shape shape = parts[0].shape();
        shape[0] = 0;
        std::vector<double> out;
        std::vector<std::size_t> offsets;
        for (auto& p : parts) {
            if (rank == 2) require(p.dim(1) == parts[0].dim(1), "concat: column counts differ");
            offsets.push_back(out.size());
            shape[0] += p.dim(0);
            out.insert(out.end(), p.data().begin(), p.data().end());
        }
        return make_result("concat", std::move(shape), std::move(out), parts, [offsets](Node& self) {
            for (std::size_t p = 0; p < self.parents.size(); ++p) {
                if (!wants(self, p)) continue;
                auto& g = self.parents[p]->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[offsets[p] + i];
            }
        });
    }
    require(rank == 2 && axis == 1, "concat: axis out of range");
    const std::size_t rows = parts[0].dim(0);
    std::size_t cols = 0;
    std::vector<std::size_t> col_offsets;
    for (auto& p : parts) {
        require(p.dim(0) == rows, "concat: row counts differ");
        col_offsets.push_back(cols);
        cols += p.dim(1);
    }
    std::vector<double> out(rows * cols);
    for (std::size_t p = 0; p < parts.size(); ++p) {
        const std::size_t w = parts[p].dim(1);
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy_n(parts[p].data().data() + r * w, w, out.data() + r * cols + col_offsets[p]);
        }
    }
    return make_result("concat", {rows, cols}, std::move(out), parts, [col_offsets, rows, cols](Node& self) {
        for (std::size_t p = 0; p < self.parents.size(); ++p) {
            if (!wants(self, p)) continue;
            auto& g = self.parents[p]->grad_buffer();
            const std::size_t w = self.parents[p]->shape[1];
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t c = 0; c < w; ++c) g[r * w + c] += self.grad[r * cols + col_offsets[p] + c];
            }
        }
    });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
    require(axis < x.rank() && x.rank() <= 2, "slice: bad axis");
    require(length > 0 && start + length <= x.dim(axis), "slice: range out of bounds for " + shape_str(x.shape()));
    if (axis == 0) {
        const std::size_t row = x.rank() == 2 ? x.dim(1) : 1;
        Shape shape = x.shape();
        shape[0] = length;
        std::vector<double> out(x.data().begin() + start * row, x.data().begin() + (start + length) * row);
        return make_result("slice", std::move(shape), std::move(out), {x}, [off = start * row](Node& self) {
            auto& g = self.parents[0]->grad_buffer();
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[off + i] += self.grad[i];
        });
    }
    const std::size_t rows = x.dim(0), cols = x.dim(1);
    std::vector<double> out(rows * length);
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(x.data().data() + r * cols + start, length, out.data() + r * length);
    }
    return make_result("slice", {rows, length}, std::move(out), {x}, [rows, cols, start, length](Node& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < length; ++c) g[r * cols + start + c] += self.grad[r * length + c];
        }
    });
}

Tensor reshape(const Tensor& x, Shape shape) {
    require(shape_size(shape) == x.size(), "reshape: size mismatch " + shape_str(x.shape()) + " -> " + shape_str(shape));
    std::vector<double> out(x.data().begin(), x.data().end());
    return make_result("reshape", std::move(shape), std::move(out), {x}, [](Node& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

Tensor gather_rows(const Tensor& table, std::span<const int> ids, int frozen_row) {
    require(table.rank() == 2, "gather_rows: table must be rank 2");
    require(!ids.empty(), "gather_rows: no ids");
    const std::size_t rows = table.dim(0), d = table.dim(1);
    std::vector<double> out(ids.size() * d);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        require(ids[i] >= 0 && static_cast<std::size_t>(ids[i]) < rows, "gather_rows: id out of range");
        std::copy_n(table.data().data() + ids[i] * d, d, out.data() + i * d);
    }
    std::vector<int> idv(ids.begin(), ids.end());
    return make_result("gather_rows", {ids.size(), d}, std::move(out), {table},
                       [idv = std::move(idv), d, frozen_row](Node& self) {
                           auto& g = self.parents[0]->grad_buffer();
                           for (std::size_t i = 0; i < idv.size(); ++i) {
                               if (idv[i] == frozen_row) continue;
                               for (std::size_t c = 0; c < d; ++c) g[idv[i] * d + c] += self.grad[i * d + c];
                           }
                       });
}

Tensor unfold(const Tensor& x, std::size_t width) {
    require(x.rank() == 2, "unfold: expected rank 2");
    const std::size_t len = x.dim(0), d = x.dim(1);
    require(width >= 1 && width <= len, "unfold: width " + std::to_string(width) + " exceeds length " +
                                            std::to_string(len));
    const std::size_t windows = len - width + 1, cols = d * width;
    std::vector<double> out(windows * cols);
    for (std::size_t i = 0; i < windows; ++i) {
        for (std::size_t c = 0; c < d; ++c) {
            for (std::size_t j = 0; j < width; ++j) out[i * cols + c * width + j] = x[(i + j) * d + c];
        }
    }
    return make_result("unfold", {windows, cols}, std::move(out), {x}, [windows, cols, d, width](Node& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < windows; ++i) {
            for (std::size_t c = 0; c < d; ++c) {
                for (std::size_t j = 0; j < width; ++j) g[(i + j) * d + c] += self.grad[i * cols + c * width + j];
            }
        }
    });
}

Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    return make_result("sum", {1}, {s}, {x}, [](Node& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (auto& v : g) v += self.grad[0];
    });
}

Tensor logsumexp(const Tensor& x) {
    double mx = *std::max_element(x.data().begin(), x.data().end());
    double s = 0.0;
    for (double v : x.data()) s += std::exp(v - mx);
    double out = mx + std::log(s);
    return make_result("logsumexp", {1}, {out}, {x}, [](Node& self) {
        auto& in = self.parents[0]->value;
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * std::exp(in[i] - self.value[0]);
    });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> targets, Reduction reduction) {
    require(logits.rank() == 2, "softmax_cross_entropy: logits must be rank 2");
    const std::size_t n = logits.dim(0), c = logits.dim(1);
    require(targets.size() == n, "softmax_cross_entropy: target count mismatch");
    std::vector<double> probs(n * c);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        require(targets[i] >= 0 && static_cast<std::size_t>(targets[i]) < c, "softmax_cross_entropy: bad target");
        const double* row = logits.data().data() + i * c;
        double mx = *std::max_element(row, row + c);
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += std::exp(row[j] - mx);
        double lse = mx + std::log(s);
        for (std::size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(row[j] - lse);
        total += lse - row[targets[i]];
    }
    const double norm = reduction == Reduction::Mean ? 1.0 / static_cast<double>(n) : 1.0;
    std::vector<int> tv(targets.begin(), targets.end());
    return make_result("softmax_cross_entropy", {1}, {total * norm}, {logits},
                       [probs = std::move(probs), tv = std::move(tv), n, c, norm](Node& self) {
                           auto& g = self.parents[0]->grad_buffer();
                           const double up = self.grad[0] * norm;
                           for (std::size_t i = 0; i < n; ++i) {
                               for (std::size_t j = 0; j < c; ++j) g[i * c + j] += up * probs[i * c + j];
                               g[i * c + tv[i]] -= up;
                           }
                       });
}

Tensor dropout(const Tensor& x, double p, bool training, Rng& rng) {
    if (p < 0.0 || p >= 1.0) throw ContractViolation("dropout: probability must be in [0, 1), got " + std::to_string(p));
    if (!training || p == 0.0) return x;
    const double keep_scale = 1.0 / (1.0 - p);
    std::vector<double> mask(x.size());
    for (auto& m : mask) m = rng.uniform() < p ? 0.0 : keep_scale;
    return mul(x, Tensor(x.shape(), std::move(mask)));
}

Tensor init_uniform(const Shape& shape, double lo, double hi, Rng& rng) {
    if (!(lo < hi)) throw ContractViolation("init_uniform: need lo < hi");
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor(shape, std::move(v), true);
}

double xavier_bound(const Shape& shape) {
    if (shape.size() < 2) throw ContractViolation("xavier init needs rank >= 2, got " + shape_str(shape));
    // Trailing dims form the receptive field (conv filters are [out x in x width]).
    std::size_t receptive = 1;
    for (std::size_t i = 2; i < shape.size(); ++i) receptive *= shape[i];
    const double fan_in = static_cast<double>(shape[1] * receptive);
    const double fan_out = static_cast<double>(shape[0] * receptive);
    return std::sqrt(6.0 / (fan_in + fan_out));
}

Tensor init_xavier(const Shape& shape, Rng& rng) {
    const double bound = xavier_bound(shape);
    return init_uniform(shape, -bound, bound, rng);
}

}  // namespace bioner
