#ifndef TSR_TENSOR_HPP
#define TSR_TENSOR_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "tsr/errors.hpp"

namespace tsr {

class Tape;

// Gradient accumulator shared by every copy of a parameter tensor. `live`
// flips true once a backward pass has deposited into it and false when an
// optimizer step (or zero_grad) clears it.
struct GradSlot {
  std::vector<double> sum;
  bool live = false;
};

// Dense row-major f64 tensor with value semantics; copies share storage.
// Gradient participation is opt-in via requires_grad. A tensor produced by a
// recorded op carries the index of its tape node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
  static Tensor from(std::vector<int> shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return data_ != nullptr; }
  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  std::int64_t numel() const;

  std::vector<double>& data() { return *data_; }
  const std::vector<double>& data() const { return *data_; }
  const double* ptr() const { return data_->data(); }
  double* ptr() { return data_->data(); }

  bool requires_grad() const { return requires_grad_; }

  // Gradient buffer, sized on first touch. Null slot means the tensor never
  // participates in differentiation.
  GradSlot* grad_slot() const { return grad_.get(); }
  bool grad_live() const { return grad_ && grad_->live; }
  const std::vector<double>& grad() const;
  void accumulate_grad(const std::vector<double>& g);
  void zero_grad();

  int node() const { return node_; }
  const void* tape_tag() const { return tape_tag_; }
  void set_node(int node, const void* tape_tag) {
    node_ = node;
    tape_tag_ = tape_tag;
  }

  // Shares data and tape node; only the shape changes. Element count must
  // be preserved.
  Tensor reshaped(std::vector<int> new_shape) const;

  // Same storage, detached from any tape and from gradient tracking.
  Tensor detached() const;

  // Deep copy of the values; fresh storage, no grad, no node.
  Tensor clone() const;

  // Identity of the underlying storage; used for sharing audits.
  const void* storage_id() const { return static_cast<const void*>(data_.get()); }

  double value() const;  // scalar tensors only

 private:
  std::vector<int> shape_;
  std::shared_ptr<std::vector<double>> data_;
  std::shared_ptr<GradSlot> grad_;
  bool requires_grad_ = false;
  int node_ = -1;
  const void* tape_tag_ = nullptr;
};

std::string shape_str(const std::vector<int>& shape);
std::int64_t shape_numel(const std::vector<int>& shape);

// Reverse-mode tape. Nodes are recorded in forward order, so recording order
// is a topological order; backward() walks the list once in reverse.
// A tape is rebuilt for every forward pass and never shared across threads.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&)>;

  // Records an operation node and returns its id.
  int add(std::int64_t out_size, BackwardFn backward);
  void set_backward(int id, BackwardFn backward);

  // Registers (or finds) the leaf node aliasing a parameter's grad slot.
  int leaf(const Tensor& t);

  // Gradient buffer of a node, allocated zeroed on first access.
  std::vector<double>& grad(int id);

  // Seeds d(loss)/d(loss) = 1 and runs every node's backward rule exactly
  // once, in reverse recording order. Requires a scalar loss that is the
  // final node of this tape.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::int64_t size = 0;
    std::vector<double> grad;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  std::unordered_map<const GradSlot*, int> leaf_index_;
};

// Registers t as an input of an op being recorded on tape. Returns the node
// id whose grad buffer should receive d(loss)/d(t), or -1 when t is constant
// with respect to this tape (or tape is null).
int track_input(Tape* tape, const Tensor& t);

}  // namespace tsr

#endif
