#include "tsr/tensor.hpp"

#include <sstream>

namespace tsr {

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

std::int64_t shape_numel(const std::vector<int>& shape) {
  std::int64_t n = 1;
  for (const int d : shape) {
    if (d <= 0) throw dimension_error("non-positive dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  Tensor t;
  const std::int64_t n = shape_numel(shape);
  t.shape_ = std::move(shape);
  t.data_ = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n), 0.0);
  t.requires_grad_ = requires_grad;
  if (requires_grad) t.grad_ = std::make_shared<GradSlot>();
  return t;
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (auto& v : t.data()) v = value;
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
  const std::int64_t n = shape_numel(shape);
  if (n != static_cast<std::int64_t>(values.size())) {
    throw dimension_error("value count " + std::to_string(values.size()) +
                          " does not match shape " + shape_str(shape));
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::make_shared<std::vector<double>>(std::move(values));
  t.requires_grad_ = requires_grad;
  if (requires_grad) t.grad_ = std::make_shared<GradSlot>();
  return t;
}

Tensor Tensor::scalar(double value) {
  return from({1}, {value});
}

std::int64_t Tensor::numel() const {
  return data_ ? static_cast<std::int64_t>(data_->size()) : 0;
}

const std::vector<double>& Tensor::grad() const {
  if (!grad_ || !grad_->live) {
    throw contract_error("gradient requested but never populated");
  }
  return grad_->sum;
}

void Tensor::accumulate_grad(const std::vector<double>& g) {
  if (!grad_) throw contract_error("tensor does not track gradients");
  if (grad_->sum.empty()) grad_->sum.assign(data_->size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) grad_->sum[i] += g[i];
  grad_->live = true;
}

void Tensor::zero_grad() {
  if (!grad_) return;
  grad_->sum.clear();
  grad_->live = false;
}

Tensor Tensor::reshaped(std::vector<int> new_shape) const {
  if (shape_numel(new_shape) != numel()) {
    throw dimension_error("reshape " + shape_str(shape_) + " -> " + shape_str(new_shape) +
                          " changes element count");
  }
  Tensor t(*this);
  t.shape_ = std::move(new_shape);
  return t;
}

Tensor Tensor::detached() const {
  Tensor t(*this);
  t.grad_.reset();
  t.requires_grad_ = false;
  t.node_ = -1;
  return t;
}

Tensor Tensor::clone() const {
  Tensor t;
  t.shape_ = shape_;
  t.data_ = std::make_shared<std::vector<double>>(*data_);
  t.requires_grad_ = requires_grad_;
  if (requires_grad_) t.grad_ = std::make_shared<GradSlot>();
  return t;
}

double Tensor::value() const {
  if (numel() != 1) throw contract_error("value() on non-scalar tensor " + shape_str(shape_));
  return (*data_)[0];
}

int Tape::add(std::int64_t out_size, BackwardFn backward) {
  Node n;
  n.size = out_size;
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::set_backward(int id, BackwardFn backward) {
  nodes_[static_cast<std::size_t>(id)].backward = std::move(backward);
}

int Tape::leaf(const Tensor& t) {
  GradSlot* slot = t.grad_slot();
  const auto it = leaf_index_.find(slot);
  if (it != leaf_index_.end()) return it->second;
  // The leaf's backward forwards the tape-local gradient into the shared
  // parameter slot, where it accumulates across passes until cleared.
  const int id = add(t.numel(), nullptr);
  Tensor alias = t;
  nodes_[static_cast<std::size_t>(id)].backward = [alias, id](Tape& tape) mutable {
    alias.accumulate_grad(tape.grad(id));
  };
  leaf_index_.emplace(slot, id);
  return id;
}

std::vector<double>& Tape::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) n.grad.assign(static_cast<std::size_t>(n.size), 0.0);
  return n.grad;
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw contract_error("backward requires a scalar loss, got " + shape_str(loss.shape()));
  }
  if (loss.node() < 0 || loss.node() != static_cast<int>(nodes_.size()) - 1) {
    throw contract_error("backward requires the loss to be the tape's final node");
  }
  grad(loss.node())[0] = 1.0;
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    auto& node = nodes_[static_cast<std::size_t>(i)];
    if (node.backward) node.backward(*this);
  }
}

int track_input(Tape* tape, const Tensor& t) {
  if (!tape) return -1;
  if (t.node() >= 0) {
    if (t.tape_tag() != static_cast<const void*>(tape)) {
      throw contract_error("tensor recorded on a different tape used as an op input");
    }
    return t.node();
  }
  if (t.requires_grad()) return tape->leaf(t);
  return -1;
}

}  // namespace tsr
