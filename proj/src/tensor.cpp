#include "splatcast/tensor.hpp"

#include <atomic>
#include <sstream>

namespace splatcast::diff {

namespace {
std::atomic<std::uint64_t> g_next_id{1};

void check_shape(const Shape& shape, const std::vector<double>& values) {
    for (int d : shape) {
        if (d <= 0) {
            throw OpError("tensor: shape dims must be positive, got " + shape_str(shape));
        }
    }
    if (numel(shape) != static_cast<std::int64_t>(values.size())) {
        std::ostringstream os;
        os << "tensor: value count " << values.size() << " does not match shape "
           << shape_str(shape);
        throw OpError(os.str());
    }
}
}  // namespace

std::int64_t numel(const Shape& s) {
    std::int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

Tensor Tensor::param(Shape shape, std::vector<double> values) {
    check_shape(shape, values);
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    n->requires_grad = true;
    n->id = g_next_id.fetch_add(1);
    return Tensor(std::move(n));
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
    check_shape(shape, values);
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    n->requires_grad = false;
    n->id = g_next_id.fetch_add(1);
    return Tensor(std::move(n));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    std::vector<double> v(static_cast<std::size_t>(numel(shape)), 0.0);
    return requires_grad ? param(std::move(shape), std::move(v))
                         : constant(std::move(shape), std::move(v));
}

double Tensor::scalar() const {
    if (size() != 1) {
        throw OpError("scalar: tensor has shape " + shape_str(shape()) +
                      ", expected a single element");
    }
    return n_->values[0];
}

Tensor Tape::record(const char* op, std::vector<Tensor> inputs, Shape out_shape,
                    std::vector<double> out_values, std::function<void(Node&)> backward) {
    check_shape(out_shape, out_values);
    auto n = std::make_shared<Node>();
    n->shape = std::move(out_shape);
    n->values = std::move(out_values);
    n->op = op;
    n->id = g_next_id.fetch_add(1);

    bool any_grad = false;
    for (const auto& t : inputs) {
        if (t.requires_grad()) { any_grad = true; break; }
    }
    if (grad_enabled_ && any_grad) {
        n->requires_grad = true;
        n->inputs.reserve(inputs.size());
        for (const auto& t : inputs) n->inputs.push_back(t.node());
        n->backward = std::move(backward);
    }
    entries_.push_back(n);
    return Tensor(std::move(n));
}

void Tape::backward(const Tensor& root) {
    if (!root.defined() || root.size() != 1) {
        throw OpError("backward: root must be a scalar, got shape " +
                      (root.defined() ? shape_str(root.shape()) : std::string("<undefined>")));
    }
    if (entries_.empty()) {
        throw OpError("backward: tape is empty");
    }
    root.node()->ensure_grad();
    root.node()->grad[0] += 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        Node& n = **it;
        if (n.backward && !n.grad.empty()) n.backward(n);
    }
}

}  // namespace splatcast::diff
