#include "hcap/diff/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "hcap/error.hpp"

namespace hcap::diff {

namespace {
thread_local Tape* g_tape = nullptr;
thread_local bool g_checked = true;
}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape.empty()) shape = {1};
  for (auto extent : shape) {
    if (extent == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
  }
  if (numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_str(shape) + " needs " + std::to_string(numel(shape)) +
                         " values, got " + std::to_string(values.size()));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

Tensor Tensor::row(std::vector<double> values, bool requires_grad) {
  const auto n = values.size();
  return from({1, n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows, bool requires_grad) {
  std::vector<double> values;
  std::size_t cols = 0;
  for (const auto& r : rows) {
    if (cols == 0) cols = r.size();
    if (r.size() != cols) throw DimensionError("ragged matrix literal");
    values.insert(values.end(), r.begin(), r.end());
  }
  return from({rows.size(), cols}, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw ContractError("use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::size() const { return node_ ? node_->data.size() : 0; }

std::size_t Tensor::rows() const {
  const auto& s = shape();
  if (s.size() == 1) return 1;
  if (s.size() == 2) return s[0];
  return numel(s) / s.back();
}

std::size_t Tensor::cols() const { return shape().back(); }

std::span<const double> Tensor::data() const {
  if (!node_) throw ContractError("use of undefined tensor");
  return node_->data;
}

std::span<double> Tensor::mutable_data() {
  if (!node_) throw ContractError("use of undefined tensor");
  if (node_->recorded) throw ContractError("cannot mutate the output of a recorded op");
  return node_->data;
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return node_ && !node_->recorded; }
bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!node_) throw ContractError("use of undefined tensor");
  return node_->grad_buffer();
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

Tensor Tensor::detach() const { return from(shape(), std::vector<double>(data().begin(), data().end())); }

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  }
  auto& root = *loss.node();
  if (!root.requires_grad) throw ContractError("backward() on a loss that does not require grad");

  // Intermediate gradients are rebuilt on every pass; only leaves accumulate.
  for (auto& rec : records_) rec.output->grad.clear();
  if (root.recorded) {
    root.grad_buffer()[0] = 1.0;
  } else {
    root.grad_buffer()[0] += 1.0;
  }
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // does not reach the loss
    it->backward();
  }
}

TapeScope::TapeScope(Tape& tape) : previous_(g_tape) { g_tape = &tape; }
TapeScope::~TapeScope() { g_tape = previous_; }

Tape* active_tape() { return g_tape; }

NoGradScope::NoGradScope() : previous_(g_tape) { g_tape = nullptr; }
NoGradScope::~NoGradScope() { g_tape = previous_; }

void set_checked(bool on) { g_checked = on; }
bool checked() { return g_checked; }

void backward(const Tensor& loss) {
  if (!g_tape) throw ContractError("backward() without an active tape");
  g_tape->backward(loss);
}

namespace detail {

void check_finite(std::span<const double> values, const char* op_name) {
  for (double v : values) {
    if (!std::isfinite(v)) throw DomainError(std::string(op_name) + ": non-finite value produced");
  }
}

namespace {

Tensor finish(Shape shape, std::vector<double> data, bool needs_grad,
              const std::function<std::function<void()>(const std::shared_ptr<Node>&)>& make_backward,
              const char* op_name) {
  if (g_checked) check_finite(data, op_name);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  if (needs_grad) {
    node->requires_grad = true;
    node->recorded = true;
    g_tape->push({node, make_backward(node)});
  }
  return Tensor(std::move(node));
}

}  // namespace

Tensor make_result(Shape shape, std::vector<double> data, std::initializer_list<const Tensor*> inputs,
                   const std::function<std::function<void()>(const std::shared_ptr<Node>&)>& make_backward,
                   const char* op_name) {
  bool needs_grad = false;
  if (g_tape) {
    for (const auto* t : inputs) needs_grad = needs_grad || t->requires_grad();
  }
  return finish(std::move(shape), std::move(data), needs_grad, make_backward, op_name);
}

Tensor make_result(Shape shape, std::vector<double> data, const std::vector<Tensor>& inputs,
                   const std::function<std::function<void()>(const std::shared_ptr<Node>&)>& make_backward,
                   const char* op_name) {
  bool needs_grad = false;
  if (g_tape) {
    for (const auto& t : inputs) needs_grad = needs_grad || t.requires_grad();
  }
  return finish(std::move(shape), std::move(data), needs_grad, make_backward, op_name);
}

}  // namespace detail

}  // namespace hcap::diff
