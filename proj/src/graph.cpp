#include "llfl/graph.hpp"

#include "llfl/error.hpp"
#include "llfl/kernels.hpp"

#include <cmath>
#include <set>

namespace llfl {

namespace {

constexpr double kNormEps = 1e-12;

const char* op_name(OpKind k) {
    switch (k) {
        case OpKind::Input: return "input";
        case OpKind::Param: return "param";
        case OpKind::MatMul: return "matmul";
        case OpKind::AddBias: return "add_bias";
        case OpKind::Relu: return "relu";
        case OpKind::Tanh: return "tanh";
        case OpKind::Sigmoid: return "sigmoid";
        case OpKind::L2NormBlocks: return "l2_normalize_blocks";
        case OpKind::SumSquares: return "sum_squares";
        case OpKind::SumAll: return "sum_all";
        case OpKind::RowSum: return "row_sum";
        case OpKind::Add: return "add";
        case OpKind::Sub: return "sub";
        case OpKind::Mul: return "mul";
        case OpKind::Affine: return "affine";
    }
    return "?";
}

std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

} // namespace

void ParamSet::insert(std::string name, Tensor t) {
    require(!by_name_.count(name), "ParamSet: duplicate parameter '", name, "'");
    order_.push_back(name);
    by_name_.emplace(std::move(name), std::move(t));
}

bool ParamSet::contains(const std::string& name) const {
    return by_name_.count(name) != 0;
}

const Tensor& ParamSet::get(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) fail("ParamSet: unknown parameter '", name, "'");
    return it->second;
}

std::size_t ParamSet::numel() const {
    std::size_t n = 0;
    for (const auto& name : order_) n += get(name).numel();
    return n;
}

NodeId Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
}

void Graph::check_id(NodeId id) const {
    require(id < nodes_.size(), "Graph: node id ", id, " out of range");
}

std::string Graph::node_label(NodeId id) const {
    const Node& n = nodes_[id];
    if (!n.name.empty()) return std::string(op_name(n.kind)) + " '" + n.name + "'";
    return std::string(op_name(n.kind)) + " #" + std::to_string(id);
}

const std::vector<std::size_t>& Graph::shape_of(NodeId id) const {
    check_id(id);
    return nodes_[id].shape;
}

NodeId Graph::input(std::string name, std::vector<std::size_t> shape) {
    require(!name.empty(), "Graph: input name must not be empty");
    for (const auto& n : nodes_) {
        require(!(n.kind == OpKind::Input && n.name == name),
                "Graph: duplicate input '", name, "'");
    }
    require(shape.size() >= 1 && shape.size() <= 2, "Graph: input '", name,
            "' must be rank 1 or 2");
    Node n;
    n.kind = OpKind::Input;
    n.name = std::move(name);
    n.shape = std::move(shape);
    return push(std::move(n));
}

NodeId Graph::param(std::string name, std::vector<std::size_t> shape) {
    require(!name.empty(), "Graph: param name must not be empty");
    for (const auto& n : nodes_) {
        require(!(n.kind == OpKind::Param && n.name == name),
                "Graph: duplicate param '", name, "'");
    }
    require(shape.size() >= 1 && shape.size() <= 2, "Graph: param '", name,
            "' must be rank 1 or 2");
    Node n;
    n.kind = OpKind::Param;
    n.name = std::move(name);
    n.shape = std::move(shape);
    return push(std::move(n));
}

NodeId Graph::matmul(NodeId a, NodeId b) {
    check_id(a);
    check_id(b);
    const auto& sa = nodes_[a].shape;
    const auto& sb = nodes_[b].shape;
    require(sa.size() == 2 && sb.size() == 2, "Graph: matmul needs rank-2 operands, got ",
            node_label(a), " ", shape_str(sa), " and ", node_label(b), " ", shape_str(sb));
    require(sa[1] == sb[0], "Graph: matmul inner dimensions differ: ", node_label(a), " ",
            shape_str(sa), " vs ", node_label(b), " ", shape_str(sb));
    Node n;
    n.kind = OpKind::MatMul;
    n.shape = {sa[0], sb[1]};
    n.a = a;
    n.b = b;
    return push(std::move(n));
}

NodeId Graph::add_bias(NodeId a, NodeId bias) {
    check_id(a);
    check_id(bias);
    const auto& sa = nodes_[a].shape;
    const auto& sb = nodes_[bias].shape;
    require(sa.size() == 2, "Graph: add_bias needs a rank-2 left operand, got ", node_label(a),
            " ", shape_str(sa));
    require(sb.size() == 1 && sb[0] == sa[1], "Graph: add_bias shapes differ: ", node_label(a),
            " ", shape_str(sa), " vs ", node_label(bias), " ", shape_str(sb));
    Node n;
    n.kind = OpKind::AddBias;
    n.shape = sa;
    n.a = a;
    n.b = bias;
    return push(std::move(n));
}

NodeId Graph::relu(NodeId a) {
    check_id(a);
    Node n;
    n.kind = OpKind::Relu;
    n.shape = nodes_[a].shape;
    n.a = a;
    return push(std::move(n));
}

NodeId Graph::tanh(NodeId a) {
    check_id(a);
    Node n;
    n.kind = OpKind::Tanh;
    n.shape = nodes_[a].shape;
    n.a = a;
    return push(std::move(n));
}

NodeId Graph::sigmoid(NodeId a) {
    check_id(a);
    Node n;
    n.kind = OpKind::Sigmoid;
    n.shape = nodes_[a].shape;
    n.a = a;
    return push(std::move(n));
}

NodeId Graph::l2_normalize_blocks(NodeId a, std::size_t block) {
    check_id(a);
    const auto& sa = nodes_[a].shape;
    const std::size_t cols = sa.back();
    require(block > 0 && cols % block == 0, "Graph: l2_normalize_blocks block width ", block,
            " does not divide ", cols, " columns of ", node_label(a));
    Node n;
    n.kind = OpKind::L2NormBlocks;
    n.shape = sa;
    n.a = a;
    n.block = block;
    return push(std::move(n));
}

NodeId Graph::sum_squares(NodeId a) {
    check_id(a);
    Node n;
    n.kind = OpKind::SumSquares;
    n.shape = {1};
    n.a = a;
    return push(std::move(n));
}

NodeId Graph::sum_all(NodeId a) {
    check_id(a);
    Node n;
    n.kind = OpKind::SumAll;
    n.shape = {1};
    n.a = a;
    return push(std::move(n));
}

NodeId Graph::row_sum(NodeId a) {
    check_id(a);
    const auto& sa = nodes_[a].shape;
    require(sa.size() == 2, "Graph: row_sum needs a rank-2 operand, got ", node_label(a), " ",
            shape_str(sa));
    Node n;
    n.kind = OpKind::RowSum;
    n.shape = {sa[0], 1};
    n.a = a;
    return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
    check_id(a);
    check_id(b);
    require(nodes_[a].shape == nodes_[b].shape, "Graph: add shapes differ: ", node_label(a), " ",
            shape_str(nodes_[a].shape), " vs ", node_label(b), " ", shape_str(nodes_[b].shape));
    Node n;
    n.kind = OpKind::Add;
    n.shape = nodes_[a].shape;
    n.a = a;
    n.b = b;
    return push(std::move(n));
}

NodeId Graph::sub(NodeId a, NodeId b) {
    check_id(a);
    check_id(b);
    require(nodes_[a].shape == nodes_[b].shape, "Graph: sub shapes differ: ", node_label(a), " ",
            shape_str(nodes_[a].shape), " vs ", node_label(b), " ", shape_str(nodes_[b].shape));
    Node n;
    n.kind = OpKind::Sub;
    n.shape = nodes_[a].shape;
    n.a = a;
    n.b = b;
    return push(std::move(n));
}

NodeId Graph::mul(NodeId a, NodeId b) {
    check_id(a);
    check_id(b);
    require(nodes_[a].shape == nodes_[b].shape, "Graph: mul shapes differ: ", node_label(a), " ",
            shape_str(nodes_[a].shape), " vs ", node_label(b), " ", shape_str(nodes_[b].shape));
    Node n;
    n.kind = OpKind::Mul;
    n.shape = nodes_[a].shape;
    n.a = a;
    n.b = b;
    return push(std::move(n));
}

NodeId Graph::affine(NodeId a, double alpha, double beta) {
    check_id(a);
    Node n;
    n.kind = OpKind::Affine;
    n.shape = nodes_[a].shape;
    n.a = a;
    n.alpha = alpha;
    n.beta = beta;
    return push(std::move(n));
}

void Graph::mark_output(std::string name, NodeId id) {
    check_id(id);
    for (const auto& [existing, _] : outputs_) {
        require(existing != name, "Graph: duplicate output '", name, "'");
    }
    outputs_.emplace_back(std::move(name), id);
}

NodeId Graph::output_id(const std::string& name) const {
    for (const auto& [n, id] : outputs_) {
        if (n == name) return id;
    }
    fail("Graph: unknown output '", name, "'");
}

namespace {

// Shared forward pass producing every node value.
std::vector<Tensor> eval_all(const Graph& g, const ParamSet& params, const Bindings& inputs) {
    std::set<std::string> used_inputs;
    const auto& nodes = g.nodes();
    std::vector<Tensor> vals(nodes.size());
    for (NodeId id = 0; id < nodes.size(); ++id) {
        const Node& n = nodes[id];
        switch (n.kind) {
            case OpKind::Input: {
                auto it = inputs.find(n.name);
                if (it == inputs.end()) fail("forward: input '", n.name, "' not bound");
                require(it->second.shape == n.shape, "forward: input '", n.name, "' bound with ",
                        it->second.shape_str(), ", graph expects ", shape_str(n.shape));
                used_inputs.insert(n.name);
                vals[id] = it->second;
                break;
            }
            case OpKind::Param: {
                require(params.contains(n.name), "forward: param '", n.name,
                        "' missing from ParamSet");
                const Tensor& t = params.get(n.name);
                require(t.shape == n.shape, "forward: param '", n.name, "' has ", t.shape_str(),
                        ", graph expects ", shape_str(n.shape));
                vals[id] = t;
                break;
            }
            case OpKind::MatMul: {
                const Tensor& A = vals[n.a];
                const Tensor& B = vals[n.b];
                Tensor C = Tensor::zeros(n.shape);
                kernels::matmul_nn(A.ptr(), B.ptr(), C.ptr(), A.shape[0], A.shape[1], B.shape[1],
                                   false);
                vals[id] = std::move(C);
                break;
            }
            case OpKind::AddBias: {
                const Tensor& A = vals[n.a];
                const Tensor& bias = vals[n.b];
                Tensor C = A;
                for (std::size_t r = 0; r < A.shape[0]; ++r) {
                    kernels::axpy(1.0, bias.ptr(), C.ptr() + r * A.shape[1], A.shape[1]);
                }
                vals[id] = std::move(C);
                break;
            }
            case OpKind::Relu: {
                Tensor C = vals[n.a];
                for (auto& v : C.data) v = v > 0.0 ? v : 0.0;
                vals[id] = std::move(C);
                break;
            }
            case OpKind::Tanh: {
                Tensor C = vals[n.a];
                for (auto& v : C.data) v = std::tanh(v);
                vals[id] = std::move(C);
                break;
            }
            case OpKind::Sigmoid: {
                Tensor C = vals[n.a];
                for (auto& v : C.data) v = 1.0 / (1.0 + std::exp(-v));
                vals[id] = std::move(C);
                break;
            }
            case OpKind::L2NormBlocks: {
                const Tensor& A = vals[n.a];
                Tensor C = A;
                const std::size_t cols = A.cols();
                const std::size_t rows = A.rows();
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t b0 = 0; b0 < cols; b0 += n.block) {
                        double* blk = C.ptr() + r * cols + b0;
                        const double nrm = std::sqrt(kernels::sqnorm(blk, n.block));
                        kernels::scal(1.0 / (nrm + kNormEps), blk, n.block);
                    }
                }
                vals[id] = std::move(C);
                break;
            }
            case OpKind::SumSquares: {
                const Tensor& A = vals[n.a];
                vals[id] = Tensor::scalar(kernels::sqnorm(A.ptr(), A.numel()));
                break;
            }
            case OpKind::SumAll: {
                const Tensor& A = vals[n.a];
                vals[id] = Tensor::scalar(kernels::sum(A.ptr(), A.numel()));
                break;
            }
            case OpKind::RowSum: {
                const Tensor& A = vals[n.a];
                Tensor C = Tensor::zeros(n.shape);
                for (std::size_t r = 0; r < A.shape[0]; ++r) {
                    C.data[r] = kernels::sum(A.ptr() + r * A.shape[1], A.shape[1]);
                }
                vals[id] = std::move(C);
                break;
            }
            case OpKind::Add: {
                const Tensor& A = vals[n.a];
                const Tensor& B = vals[n.b];
                Tensor C = Tensor::zeros(n.shape);
                kernels::add(A.ptr(), B.ptr(), C.ptr(), C.numel());
                vals[id] = std::move(C);
                break;
            }
            case OpKind::Sub: {
                const Tensor& A = vals[n.a];
                const Tensor& B = vals[n.b];
                Tensor C = Tensor::zeros(n.shape);
                kernels::sub(A.ptr(), B.ptr(), C.ptr(), C.numel());
                vals[id] = std::move(C);
                break;
            }
            case OpKind::Mul: {
                const Tensor& A = vals[n.a];
                const Tensor& B = vals[n.b];
                Tensor C = Tensor::zeros(n.shape);
                kernels::mul(A.ptr(), B.ptr(), C.ptr(), C.numel());
                vals[id] = std::move(C);
                break;
            }
            case OpKind::Affine: {
                Tensor C = vals[n.a];
                for (auto& v : C.data) v = n.alpha * v + n.beta;
                vals[id] = std::move(C);
                break;
            }
        }
    }
    for (const auto& [name, t] : inputs) {
        require(used_inputs.count(name), "forward: input '", name, "' bound but not in graph");
    }
    return vals;
}

} // namespace

std::map<std::string, Tensor> forward(const Graph& g, const ParamSet& params,
                                      const Bindings& inputs) {
    require(!g.outputs().empty(), "forward: graph has no marked outputs");
    const std::vector<Tensor> vals = eval_all(g, params, inputs);
    std::map<std::string, Tensor> out;
    for (const auto& [name, id] : g.outputs()) out.emplace(name, vals[id]);
    return out;
}

ParamSet backward(const Graph& g, const ParamSet& params, const Bindings& inputs,
                  const std::string& output_name) {
    const NodeId target = g.output_id(output_name);
    const auto& nodes = g.nodes();
    {
        std::size_t numel = 1;
        for (auto d : nodes[target].shape) numel *= d;
        require(numel == 1, "backward: output '", output_name, "' is not scalar, shape ",
                shape_str(nodes[target].shape));
    }

    const std::vector<Tensor> vals = eval_all(g, params, inputs);

    // Lazily allocated gradient buffers; absent entries are off the path.
    std::vector<Tensor> grads(nodes.size());
    std::vector<bool> has_grad(nodes.size(), false);
    auto grad_of = [&](NodeId id) -> Tensor& {
        if (!has_grad[id]) {
            grads[id] = Tensor::zeros(nodes[id].shape);
            has_grad[id] = true;
        }
        return grads[id];
    };

    grad_of(target).data[0] = 1.0;

    for (NodeId id = nodes.size(); id-- > 0;) {
        if (!has_grad[id]) continue;
        const Node& n = nodes[id];
        const Tensor& gy = grads[id];
        switch (n.kind) {
            case OpKind::Input:
            case OpKind::Param:
                break;
            case OpKind::MatMul: {
                const Tensor& A = vals[n.a];
                const Tensor& B = vals[n.b];
                const std::size_t m = A.shape[0], k = A.shape[1], nn = B.shape[1];
                kernels::matmul_nt(gy.ptr(), B.ptr(), grad_of(n.a).ptr(), m, nn, k, true);
                kernels::matmul_tn(A.ptr(), gy.ptr(), grad_of(n.b).ptr(), k, m, nn, true);
                break;
            }
            case OpKind::AddBias: {
                Tensor& ga = grad_of(n.a);
                kernels::add(ga.ptr(), gy.ptr(), ga.ptr(), ga.numel());
                Tensor& gb = grad_of(n.b);
                const std::size_t rows = gy.shape[0], cols = gy.shape[1];
                for (std::size_t r = 0; r < rows; ++r) {
                    kernels::axpy(1.0, gy.ptr() + r * cols, gb.ptr(), cols);
                }
                break;
            }
            case OpKind::Relu: {
                const Tensor& A = vals[n.a];
                Tensor& ga = grad_of(n.a);
                for (std::size_t i = 0; i < ga.data.size(); ++i) {
                    if (A.data[i] > 0.0) ga.data[i] += gy.data[i];
                }
                break;
            }
            case OpKind::Tanh: {
                const Tensor& Y = vals[id];
                Tensor& ga = grad_of(n.a);
                for (std::size_t i = 0; i < ga.data.size(); ++i) {
                    ga.data[i] += gy.data[i] * (1.0 - Y.data[i] * Y.data[i]);
                }
                break;
            }
            case OpKind::Sigmoid: {
                const Tensor& Y = vals[id];
                Tensor& ga = grad_of(n.a);
                for (std::size_t i = 0; i < ga.data.size(); ++i) {
                    ga.data[i] += gy.data[i] * Y.data[i] * (1.0 - Y.data[i]);
                }
                break;
            }
            case OpKind::L2NormBlocks: {
                // y = x / (|x| + eps) per block; at |x| = 0 the projection
                // term is dropped (subgradient choice).
                const Tensor& A = vals[n.a];
                Tensor& ga = grad_of(n.a);
                const std::size_t cols = A.cols();
                const std::size_t rows = A.rows();
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t b0 = 0; b0 < cols; b0 += n.block) {
                        const double* x = A.ptr() + r * cols + b0;
                        const double* dy = gy.ptr() + r * cols + b0;
                        double* dx = ga.ptr() + r * cols + b0;
                        const double nrm = std::sqrt(kernels::sqnorm(x, n.block));
                        const double denom = nrm + kNormEps;
                        kernels::axpy(1.0 / denom, dy, dx, n.block);
                        if (nrm > 0.0) {
                            const double proj = kernels::dot(dy, x, n.block);
                            kernels::axpy(-proj / (nrm * denom * denom), x, dx, n.block);
                        }
                    }
                }
                break;
            }
            case OpKind::SumSquares: {
                const Tensor& A = vals[n.a];
                Tensor& ga = grad_of(n.a);
                kernels::axpy(2.0 * gy.data[0], A.ptr(), ga.ptr(), ga.numel());
                break;
            }
            case OpKind::SumAll: {
                Tensor& ga = grad_of(n.a);
                const double gv = gy.data[0];
                for (auto& v : ga.data) v += gv;
                break;
            }
            case OpKind::RowSum: {
                Tensor& ga = grad_of(n.a);
                const std::size_t rows = ga.shape[0], cols = ga.shape[1];
                for (std::size_t r = 0; r < rows; ++r) {
                    const double gv = gy.data[r];
                    double* row = ga.ptr() + r * cols;
                    for (std::size_t c = 0; c < cols; ++c) row[c] += gv;
                }
                break;
            }
            case OpKind::Add: {
                Tensor& ga = grad_of(n.a);
                kernels::add(ga.ptr(), gy.ptr(), ga.ptr(), ga.numel());
                Tensor& gb = grad_of(n.b);
                kernels::add(gb.ptr(), gy.ptr(), gb.ptr(), gb.numel());
                break;
            }
            case OpKind::Sub: {
                Tensor& ga = grad_of(n.a);
                kernels::add(ga.ptr(), gy.ptr(), ga.ptr(), ga.numel());
                Tensor& gb = grad_of(n.b);
                kernels::axpy(-1.0, gy.ptr(), gb.ptr(), gb.numel());
                break;
            }
            case OpKind::Mul: {
                const Tensor& A = vals[n.a];
                const Tensor& B = vals[n.b];
                Tensor& ga = grad_of(n.a);
                for (std::size_t i = 0; i < ga.data.size(); ++i) {
                    ga.data[i] += gy.data[i] * B.data[i];
                }
                Tensor& gb = grad_of(n.b);
                for (std::size_t i = 0; i < gb.data.size(); ++i) {
                    gb.data[i] += gy.data[i] * A.data[i];
                }
                break;
            }
            case OpKind::Affine: {
                Tensor& ga = grad_of(n.a);
                kernels::axpy(n.alpha, gy.ptr(), ga.ptr(), ga.numel());
                break;
            }
        }
    }

    // Collect per-parameter gradients in ParamSet order; a name can only
    // appear once in the graph, so no accumulation across nodes is needed.
    ParamSet out;
    for (const auto& name : params.names()) {
        Tensor gp = Tensor::zeros(params.get(name).shape);
        for (NodeId id = 0; id < nodes.size(); ++id) {
            if (nodes[id].kind == OpKind::Param && nodes[id].name == name && has_grad[id]) {
                gp = grads[id];
            }
        }
        out.insert(name, std::move(gp));
    }
    return out;
}

ParamSet sgd_step(const ParamSet& params, const ParamSet& grads, double lr) {
    ParamSet out;
    for (const auto& name : params.names()) {
        const Tensor& p = params.get(name);
        const Tensor& gp = grads.get(name);
        require(p.shape == gp.shape, "sgd_step: shape mismatch for '", name, "'");
        Tensor next = p;
        kernels::axpy(-lr, gp.ptr(), next.ptr(), next.numel());
        out.insert(name, std::move(next));
    }
    return out;
}

} // namespace llfl
