#pragma once

#include "llfl/tensor.hpp"

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace llfl {

// Ordered collection of named parameter tensors.  Treated as immutable:
// training steps produce a new ParamSet rather than updating in place.
class ParamSet {
public:
    void insert(std::string name, Tensor t);
    bool contains(const std::string& name) const;
    const Tensor& get(const std::string& name) const;
    const std::vector<std::string>& names() const { return order_; }
    std::size_t size() const { return order_.size(); }
    // Total number of scalar parameters.
    std::size_t numel() const;

private:
    std::vector<std::string> order_;
    std::map<std::string, Tensor> by_name_;
};

using NodeId = std::size_t;

enum class OpKind {
    Input,
    Param,
    MatMul,
    AddBias,
    Relu,
    Tanh,
    Sigmoid,
    L2NormBlocks,
    SumSquares,
    SumAll,
    RowSum,
    Add,
    Sub,
    Mul,
    Affine,
};

struct Node {
    OpKind kind;
    std::string name;                // inputs/params keep their bind name
    std::vector<std::size_t> shape;  // inferred at construction
    NodeId a = 0;
    NodeId b = 0;
    double alpha = 1.0;              // Affine: alpha * x + beta
    double beta = 0.0;
    std::size_t block = 0;           // L2NormBlocks width
};

// Static computation graph over f64 tensors.  Shapes are fixed when nodes
// are added; mismatches raise an error naming the offending node.  Both
// forward and backward are pure: bound inputs and parameters are never
// mutated.
class Graph {
public:
    NodeId input(std::string name, std::vector<std::size_t> shape);
    NodeId param(std::string name, std::vector<std::size_t> shape);

    NodeId matmul(NodeId a, NodeId b);
    // a is (m x n), bias is rank-1 (n); adds bias to every row.
    NodeId add_bias(NodeId a, NodeId bias);
    NodeId relu(NodeId a);
    NodeId tanh(NodeId a);
    NodeId sigmoid(NodeId a);
    // Rescale each contiguous block of `block` columns of every row to unit
    // length; the denominator is norm + 1e-12 so zero blocks stay zero.
    NodeId l2_normalize_blocks(NodeId a, std::size_t block);
    NodeId sum_squares(NodeId a);
    NodeId sum_all(NodeId a);
    // (m x n) -> (m x 1): sum over columns.
    NodeId row_sum(NodeId a);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId affine(NodeId a, double alpha, double beta);

    void mark_output(std::string name, NodeId id);

    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<std::pair<std::string, NodeId>>& outputs() const { return outputs_; }
    NodeId output_id(const std::string& name) const;
    const std::vector<std::size_t>& shape_of(NodeId id) const;
    std::string node_label(NodeId id) const;

private:
    NodeId push(Node n);
    void check_id(NodeId id) const;

    std::vector<Node> nodes_;
    std::vector<std::pair<std::string, NodeId>> outputs_;
};

using Bindings = std::map<std::string, Tensor>;

// Evaluate the graph; returns every marked output by name.  Errors on
// missing or shape-mismatched inputs/params and on unused input bindings.
std::map<std::string, Tensor> forward(const Graph& g, const ParamSet& params,
                                      const Bindings& inputs);

// Reverse-mode gradient of the named scalar output with respect to every
// parameter in `params`.  Parameters the graph never touches get zero
// gradients.  Node visit order is fixed, so results are bit-reproducible.
ParamSet backward(const Graph& g, const ParamSet& params, const Bindings& inputs,
                  const std::string& output_name);

// theta' = theta - lr * grad, as a fresh ParamSet.
ParamSet sgd_step(const ParamSet& params, const ParamSet& grads, double lr);

} // namespace llfl
