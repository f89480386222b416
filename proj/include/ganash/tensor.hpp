#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace ganash {

/// Raised when tensor shapes do not line up for an operation.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when an object is used in a state that does not allow the call,
/// e.g. running backward twice over the same recorded graph.
class StateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Raised when an argument is well-shaped but has an invalid value.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Extents of a rank-4 (batch, height, width, channels) array.
struct Shape4 {
    std::size_t b = 0;
    std::size_t h = 0;
    std::size_t w = 0;
    std::size_t c = 0;

    constexpr std::size_t numel() const noexcept { return b * h * w * c; }
    constexpr std::size_t index(std::size_t ib, std::size_t ih, std::size_t iw, std::size_t ic) const noexcept
    {
        return ((ib * h + ih) * w + iw) * c + ic;
    }
    friend constexpr bool operator==(const Shape4&, const Shape4&) = default;

    std::string str() const
    {
        std::ostringstream os;
        os << '(' << b << 'x' << h << 'x' << w << 'x' << c << ')';
        return os.str();
    }
};

template <typename T>
class Tensor;

namespace detail {

template <typename T>
struct Node {
    Shape4 shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty until a gradient has been accumulated
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into the parents' grads.
    std::function<void(Node&)> backward_fn;

    std::span<T> ensure_grad()
    {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
        return grad;
    }
};

}  // namespace detail

/// Rank-4 array in row-major (B, H, W, C) order with optional linkage into
/// the recorded computation graph.
///
/// Tensor is a cheap handle; copies share the underlying storage. Leaf
/// tensors created with requires_grad accumulate gradients when backward()
/// runs over a graph that reaches them. Tensors produced by operators on
/// differentiable inputs carry a recorded backward rule until the graph is
/// consumed.
template <typename T>
class Tensor {
public:
    using value_type = T;
    using Node = detail::Node<T>;

    Tensor() : node_(std::make_shared<Node>()) {}

    static Tensor zeros(Shape4 shape, bool requires_grad = false) { return full(shape, T(0), requires_grad); }

    static Tensor full(Shape4 shape, T value, bool requires_grad = false)
    {
        return from_data(shape, std::vector<T>(shape.numel(), value), requires_grad);
    }

    static Tensor from_data(Shape4 shape, std::vector<T> data, bool requires_grad = false)
    {
        if (data.size() != shape.numel()) {
            throw DimensionError("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                                 shape.str());
        }
        auto node = std::make_shared<Node>();
        node->shape = shape;
        node->data = std::move(data);
        node->requires_grad = requires_grad;
        return Tensor(std::move(node));
    }

    static Tensor scalar(T value, bool requires_grad = false) { return full({1, 1, 1, 1}, value, requires_grad); }

    const Shape4& shape() const noexcept { return node_->shape; }
    std::size_t numel() const noexcept { return node_->data.size(); }

    std::span<const T> data() const noexcept { return node_->data; }
    /// Direct write access; only meaningful for leaves (parameters, inputs).
    std::span<T> mutable_data() noexcept { return node_->data; }

    std::span<const T> grad() const noexcept { return node_->grad; }
    std::span<T> mutable_grad() noexcept { return node_->grad; }
    bool has_grad() const noexcept { return !node_->grad.empty(); }
    void zero_grad() { node_->grad.clear(); }

    bool requires_grad() const noexcept { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }

    /// True while this tensor holds a recorded, not yet consumed backward rule.
    bool is_taped() const noexcept { return static_cast<bool>(node_->backward_fn); }

    T item() const
    {
        if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape().str());
        return node_->data[0];
    }

    T at(std::size_t b, std::size_t h, std::size_t w, std::size_t c) const
    {
        return node_->data[shape().index(b, h, w, c)];
    }

    /// Deep copy of the values with no graph linkage.
    Tensor detach() const { return from_data(shape(), node_->data, false); }

    template <typename U>
    Tensor<U> cast() const
    {
        std::vector<U> out(node_->data.begin(), node_->data.end());
        return Tensor<U>::from_data(shape(), std::move(out), false);
    }

    bool same_storage(const Tensor& other) const noexcept { return node_ == other.node_; }

    // Graph plumbing used by operators.
    const std::shared_ptr<Node>& node() const noexcept { return node_; }
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<Node> node_;
};

/// Creates the output of an operator. When any input requires a gradient the
/// output is linked to the inputs and carries `rule`.
template <typename T>
Tensor<T> make_result(Shape4 shape, std::vector<T> data, std::vector<std::shared_ptr<detail::Node<T>>> inputs,
                      std::function<void(detail::Node<T>&)> rule)
{
    auto node = std::make_shared<detail::Node<T>>();
    node->shape = shape;
    node->data = std::move(data);
    bool any = false;
    for (const auto& in : inputs) any = any || in->requires_grad;
    if (any) {
        node->requires_grad = true;
        node->parents = std::move(inputs);
        node->backward_fn = std::move(rule);
    }
    return Tensor<T>(std::move(node));
}

/// Reverse-mode sweep from a scalar loss.
///
/// Gradients accumulate into every requires_grad leaf reachable from `loss`.
/// The recorded graph is consumed: a second call on the same loss throws
/// StateError, as does calling on a tensor that was never produced by a
/// recorded operator.
template <typename T>
void backward(Tensor<T>& loss)
{
    if (loss.numel() != 1) throw DimensionError("backward() requires a scalar loss, got " + loss.shape().str());
    if (!loss.is_taped()) throw StateError("backward() on a tensor with no recorded operations");

    using NodePtr = std::shared_ptr<detail::Node<T>>;
    // Iterative post-order DFS gives a topological order (inputs before outputs).
    std::vector<detail::Node<T>*> order;
    std::unordered_set<detail::Node<T>*> seen;
    std::vector<std::pair<detail::Node<T>*, std::size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            detail::Node<T>* parent = node->parents[next++].get();
            if (parent->requires_grad && !seen.count(parent)) {
                seen.insert(parent);
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->ensure_grad()[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node<T>* node = *it;
        if (!node->backward_fn) continue;
        for (const NodePtr& parent : node->parents) {
            if (parent->requires_grad) parent->ensure_grad();
        }
        node->backward_fn(*node);
    }

    for (detail::Node<T>* node : order) {
        if (node->backward_fn) {
            node->backward_fn = nullptr;
            node->parents.clear();
            node->grad.clear();
            node->grad.shrink_to_fit();
        }
    }
}

}  // namespace ganash
