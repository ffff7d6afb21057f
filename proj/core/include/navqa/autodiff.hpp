#pragma once

#include <functional>
#include <span>
#include <vector>

#include "navqa/gridworld.hpp"
#include "navqa/params.hpp"

namespace navqa {

/// Handle to a value recorded on a Graph.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode tape over real vectors. Every op records its own backward
/// rule; parameter leaves read from a ParamStore and accumulate gradients
/// into a caller-supplied flat buffer (one per worker thread).
///
/// With an empty gradient buffer the graph is forward-only and records no
/// backward closures.
class Graph {
 public:
  Graph(const ParamStore& params, std::span<double> param_grads);
  explicit Graph(const ParamStore& params) : Graph(params, {}) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool grad_enabled() const { return !param_grads_.empty(); }

  Var param(ParamId id);
  Var constant(std::span<const double> values);
  Var constant(std::vector<double> values);
  Var zeros(std::size_t n);

  std::span<const double> value(Var v) const;
  std::span<const double> grad(Var v) const;
  std::size_t size(Var v) const { return nodes_[v.id].size; }
  double scalar(Var v) const { return value(v)[0]; }

  // Linear algebra. W is a row-major rows x cols parameter.
  Var matvec(Var w, Var x);
  /// W x + b
  Var affine(Var w, Var x, Var b);
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var one_minus(Var a);
  Var concat(std::span<const Var> parts);
  Var concat(std::initializer_list<Var> parts) { return concat(std::span(parts.begin(), parts.size())); }
  Var sum_scalars(std::span<const Var> scalars);

  Var sigmoid(Var a);
  Var tanh(Var a);

  /// Row `row` of a (rows x cols) table, or zeros of width cols when `zeroed`.
  Var embedding(Var table, int row, bool zeroed = false);

  Var dot(Var a, Var b);
  /// Softmax of the scalar dot products q . k_i; returns the weights vector.
  Var attention_weights(Var query, std::span<const Var> keys);
  /// sum_i w_i * v_i
  Var weighted_sum(Var weights, std::span<const Var> values);

  /// Same-padded 3x3 convolution over a (height x width x in_ch) grid laid out
  /// (y * width + x) * in_ch + c. Kernel shape (out_ch, 3, 3, in_ch).
  Var conv3x3(Var input, int height, int width, int in_ch, Var kernel, Var bias, int out_ch);
  /// Appends `vec` to the channels of every cell.
  Var tile_concat(Var grid, int cells, int grid_ch, Var vec);
  /// Sums each channel over all cells.
  Var spatial_sum(Var grid, int cells, int ch);

  /// Logits with unavailable entries set to -infinity.
  Var mask_logits(Var logits, std::span<const bool> available);
  /// -log softmax(logits)[target]; -infinity entries have zero probability.
  Var cross_entropy(Var logits, int target);
  /// Binary cross-entropy on a single logit.
  Var binary_cross_entropy(Var logit, double target);

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded backward rule.
  void backward(Var loss);

 private:
  struct Node {
    std::vector<double> val;
    std::vector<double> grad;
    const double* ext_val = nullptr;
    double* ext_grad = nullptr;
    std::size_t size = 0;
    bool needs_grad = false;
    std::function<void()> back;
  };

  Var push(std::vector<double> val, bool needs_grad);
  const double* vptr(Var v) const;
  double* gptr(Var v);
  bool needs(Var v) const { return nodes_[v.id].needs_grad; }
  bool record(std::initializer_list<Var> inputs) const;
  void shape_check(bool ok, const char* op) const;
  int rows_of(Var w) const;
  int cols_of(Var w) const;

  const ParamStore& params_;
  std::span<double> param_grads_;
  std::vector<Node> nodes_;
  std::vector<int> param_nodes_;
  struct Shape {
    int rows = 0;
    int cols = 0;
  };
  std::vector<Shape> shapes_;
};

/// Gated recurrent cell parameters (update, reset, candidate gates).
struct GruParams {
  ParamId wz, uz, bz, wr, ur, br, wn, un, bn;
  int input_dim = 0;
  int hidden_dim = 0;

  static GruParams create(ParamStore& store, const std::string& prefix, int input_dim, int hidden_dim);
};

Var gru_step(Graph& g, const GruParams& p, Var x, Var h);

struct DenseParams {
  ParamId w, b;
  int in = 0;
  int out = 0;
  static DenseParams create(ParamStore& store, const std::string& prefix, int in, int out);
};

inline Var dense(Graph& g, const DenseParams& p, Var x) {
  return g.affine(g.param(p.w), x, g.param(p.b));
}

}  // namespace navqa
