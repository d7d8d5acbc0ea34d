#ifndef HPCNN_MODEL_MODEL_HPP
#define HPCNN_MODEL_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hpcnn/model/layers.hpp"

namespace hpcnn {

/// Directed acyclic layer graph. Node 0 is the input; every other node
/// consumes earlier nodes only, so insertion order is a topological order.
template <typename T>
class Model {
 public:
  static constexpr std::size_t kInput = 0;

  struct Node {
    std::string name;
    std::unique_ptr<Layer<T>> layer;  // null for the input node
    std::vector<std::size_t> inputs;
  };

  Model(std::string arch, std::size_t num_classes) : arch_(std::move(arch)), num_classes_(num_classes) {
    nodes_.push_back(Node{"input", nullptr, {}});
  }

  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  /// Appends a node fed by `inputs` (by node id). Returns the new id.
  template <typename L>
  std::size_t add(std::string name, std::unique_ptr<L> layer, std::vector<std::size_t> inputs) {
    for (auto id : inputs)
      if (id >= nodes_.size()) throw ArgumentError("node '" + name + "' consumes unknown node " + std::to_string(id));
    if (inputs.size() != layer->arity())
      throw ArgumentError("node '" + name + "' given " + std::to_string(inputs.size()) + " inputs for a " +
                          std::string(layer->kind()) + " layer");
    layer->set_name(name);
    nodes_.push_back(Node{std::move(name), std::unique_ptr<Layer<T>>(std::move(layer)), std::move(inputs)});
    return nodes_.size() - 1;
  }

  /// Appends a single-input node fed by the most recent node.
  template <typename L>
  std::size_t add(std::string name, std::unique_ptr<L> layer) {
    const std::size_t prev = nodes_.size() - 1;
    return add(std::move(name), std::move(layer), {prev});
  }

  const std::string& arch() const { return arch_; }
  std::size_t num_classes() const { return num_classes_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }

  /// Output shape of every node for a given input shape; throws with the
  /// offending node's name on any inconsistency.
  std::vector<Shape> infer_shapes(const Shape& input) const {
    std::vector<Shape> shapes{input};
    for (std::size_t i = 1; i < nodes_.size(); ++i) {
      std::vector<Shape> in;
      for (auto id : nodes_[i].inputs) in.push_back(shapes[id]);
      try {
        shapes.push_back(nodes_[i].layer->output_shape(in));
      } catch (const DimensionError& e) {
        throw DimensionError("node '" + nodes_[i].name + "': " + e.what());
      }
    }
    return shapes;
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    const auto shapes = infer_shapes(x.shape());
    if (shapes.back() != Shape{x.dim(0), num_classes_})
      throw DimensionError("model output " + shapes.back().str() + " is not [N x " + std::to_string(num_classes_) +
                           "]");
    outputs_.assign(nodes_.size(), Tensor<T>());
    outputs_[kInput] = x;
    for (std::size_t i = 1; i < nodes_.size(); ++i) {
      std::vector<const Tensor<T>*> in;
      for (auto id : nodes_[i].inputs) in.push_back(&outputs_[id]);
      outputs_[i] = nodes_[i].layer->forward(std::span<const Tensor<T>* const>(in), mode);
    }
    return outputs_.back();
  }

  /// Back-propagates from the logits gradient through the last forward pass.
  /// Fills every parameter gradient and returns the gradient of the input.
  Tensor<T> backward(const Tensor<T>& grad_logits) {
    if (outputs_.size() != nodes_.size()) throw Error("backward called before forward");
    std::vector<std::optional<Tensor<T>>> grads(nodes_.size());
    grads.back() = grad_logits;
    for (std::size_t i = nodes_.size() - 1; i >= 1; --i) {
      if (!grads[i]) {
        for (auto* p : nodes_[i].layer->parameters()) p->grad = Tensor<T>(p->value->shape());
        continue;
      }
      auto in_grads = nodes_[i].layer->backward(*grads[i]);
      grads[i].reset();
      for (std::size_t j = 0; j < nodes_[i].inputs.size(); ++j) {
        auto& slot = grads[nodes_[i].inputs[j]];
        if (!slot) {
          slot = std::move(in_grads[j]);
        } else {
          for (std::size_t e = 0; e < slot->size(); ++e) (*slot)[e] += in_grads[j][e];
        }
      }
    }
    return grads[kInput] ? std::move(*grads[kInput]) : Tensor<T>(outputs_[kInput].shape());
  }

  /// Output of node `id` from the last forward pass.
  const Tensor<T>& activation(std::size_t id) const {
    if (id >= outputs_.size()) throw ArgumentError("no cached activation for node " + std::to_string(id));
    return outputs_[id];
  }

  /// Id of the node called `name`.
  std::size_t find(const std::string& name) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (nodes_[i].name == name) return i;
    throw ArgumentError("model has no node '" + name + "'");
  }

  void freeze_branches(bool on) {
    for (auto& n : nodes_)
      if (n.layer) n.layer->freeze_branches(on);
  }

  /// Drops cached activations from the last forward pass.
  void release() { outputs_.clear(); }

  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    for (auto& n : nodes_)
      if (n.layer)
        for (auto* p : n.layer->parameters()) out.push_back(p);
    return out;
  }

  std::vector<NamedBuffer<T>> buffers() {
    std::vector<NamedBuffer<T>> out;
    for (auto& n : nodes_)
      if (n.layer)
        for (auto b : n.layer->buffers()) out.push_back(b);
    return out;
  }

  std::size_t parameter_count() {
    std::size_t total = 0;
    for (auto* p : parameters()) total += p->value->size();
    return total;
  }

  /// Pins every convolution to one kernel (nullopt hands control back to the autotuner).
  void force_strategy(std::optional<ConvStrategy> s) {
    for (auto& n : nodes_)
      if (auto* conv = dynamic_cast<Conv2d<T>*>(n.layer.get())) conv->force_strategy(s);
  }

  template <typename L>
  std::vector<L*> layers_of() {
    std::vector<L*> out;
    for (auto& n : nodes_)
      if (auto* l = dynamic_cast<L*>(n.layer.get())) out.push_back(l);
    return out;
  }

 private:
  std::string arch_;
  std::size_t num_classes_;
  std::vector<Node> nodes_;
  std::vector<Tensor<T>> outputs_;
};

}  // namespace hpcnn

#endif  // HPCNN_MODEL_MODEL_HPP
