#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace splatcast::diff {

using Shape = std::vector<int>;

std::int64_t numel(const Shape& s);
std::string shape_str(const Shape& s);

/// Thrown on shape mismatches and other op-level contract violations.
/// The message always names the op and the offending shapes.
class OpError : public std::runtime_error {
public:
    explicit OpError(const std::string& msg) : std::runtime_error(msg) {}
};

/**
 * @brief One node of the define-by-run computation graph.
 *
 * Leaves (parameters, constants) have no backward function. Interior nodes
 * are recorded on a Tape in creation order; that order is topological by
 * construction, so the backward sweep is a single reverse pass.
 */
struct Node {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;   // empty until a gradient reaches this node
    bool requires_grad = false;
    std::uint64_t id = 0;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward;

    void ensure_grad() {
        if (grad.empty()) grad.assign(values.size(), 0.0);
    }
};

/**
 * @brief Value-semantic handle to a graph node.
 *
 * Copying a Tensor aliases the underlying node; parameters keep their
 * gradient buffers across tape rebuilds until the optimizer clears them.
 */
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}

    /// Learnable leaf: participates in backward, grad accumulates across tapes.
    static Tensor param(Shape shape, std::vector<double> values);
    /// Non-learnable leaf (input data, frozen banks).
    static Tensor constant(Shape shape, std::vector<double> values);
    static Tensor zeros(Shape shape, bool requires_grad = false);

    bool defined() const { return n_ != nullptr; }
    const Shape& shape() const { return n_->shape; }
    std::int64_t size() const { return static_cast<std::int64_t>(n_->values.size()); }
    const std::vector<double>& values() const { return n_->values; }
    std::vector<double>& values() { return n_->values; }
    bool has_grad() const { return !n_->grad.empty(); }
    const std::vector<double>& grad() const { return n_->grad; }
    std::vector<double>& grad_mut() { n_->ensure_grad(); return n_->grad; }
    void zero_grad() { n_->grad.clear(); }
    bool requires_grad() const { return n_->requires_grad; }
    std::uint64_t id() const { return n_->id; }

    /// Value of a single-element tensor.
    double scalar() const;

    std::shared_ptr<Node> node() const { return n_; }

private:
    std::shared_ptr<Node> n_;
};

/**
 * @brief Ordered record of one forward pass.
 *
 * Rebuilt per forward (define-by-run). backward() seeds the root with 1 and
 * replays entries in exact reverse recording order, accumulating gradients
 * additively, so a node feeding N consumers receives the sum of N path
 * gradients.
 */
class Tape {
public:
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    /// Record a new op node. `backward` may be empty for ops with no
    /// differentiable inputs; it receives the output node with its grad set.
    Tensor record(const char* op, std::vector<Tensor> inputs, Shape out_shape,
                  std::vector<double> out_values, std::function<void(Node&)> backward);

    /// Reverse sweep from a scalar root. Throws OpError on non-scalar roots
    /// or an empty tape.
    void backward(const Tensor& root);

    bool grad_enabled() const { return grad_enabled_; }
    std::size_t size() const { return entries_.size(); }
    void clear() { entries_.clear(); }

private:
    std::vector<std::shared_ptr<Node>> entries_;
    bool grad_enabled_;
};

}  // namespace splatcast::diff
