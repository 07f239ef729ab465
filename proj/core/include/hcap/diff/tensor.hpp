#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hcap::diff {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first touched by backward()
  bool requires_grad = false;
  bool recorded = false;  // produced by an op on a tape (non-leaf)

  std::span<double> grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Dense row-major array of doubles. Copies share storage: a Tensor is a
/// handle, and ops never write into their inputs.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor row(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t ndim() const { return shape().size(); }
  std::size_t size() const;
  // 2-D view helpers. A 1-D tensor of length n is treated as 1 x n.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  // Writable access for leaves only (parameter updates, fixtures).
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }
  double at(std::size_t r, std::size_t c) const { return data()[r * cols() + c]; }

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;  // zeros if never touched
  void zero_grad();

  // Fresh leaf holding a copy of the data, cut from any tape.
  Tensor detach() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Ordered record of differentiable operations. backward() replays the
/// records in exact reverse order.
class Tape {
 public:
  struct Record {
    std::shared_ptr<detail::Node> output;
    std::function<void()> backward;
  };

  void push(Record record) { records_.push_back(std::move(record)); }
  std::size_t size() const { return records_.size(); }
  void clear() { records_.clear(); }

  void backward(const Tensor& loss);

 private:
  std::vector<Record> records_;
};

/// Installs a tape as the recording target for the current thread while in
/// scope. Without an active tape ops run forward-only.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

/// Suspends recording for the current thread while in scope.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

/// Checked mode traps NaN/Inf produced by any op and domain violations.
void set_checked(bool on);
bool checked();

class CheckedScope {
 public:
  explicit CheckedScope(bool on) : previous_(checked()) { set_checked(on); }
  ~CheckedScope() { set_checked(previous_); }
  CheckedScope(const CheckedScope&) = delete;
  CheckedScope& operator=(const CheckedScope&) = delete;

 private:
  bool previous_;
};

// Convenience: backward on the active tape.
void backward(const Tensor& loss);

namespace detail {

// Building block for kernels: creates the output node, and if any input
// requires grad and a tape is active, records `make_backward(out)`.
// The factory receives the output node and must return the closure that
// scatters out->grad into the inputs' grad buffers.
Tensor make_result(Shape shape, std::vector<double> data, std::initializer_list<const Tensor*> inputs,
                   const std::function<std::function<void()>(const std::shared_ptr<Node>&)>& make_backward,
                   const char* op_name);

Tensor make_result(Shape shape, std::vector<double> data, const std::vector<Tensor>& inputs,
                   const std::function<std::function<void()>(const std::shared_ptr<Node>&)>& make_backward,
                   const char* op_name);

void check_finite(std::span<const double> values, const char* op_name);

}  // namespace detail

}  // namespace hcap::diff
