#include "navqa/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "navqa/error.hpp"

namespace navqa {

namespace {

double stable_sigmoid(double a) {
  if (a >= 0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

}  // namespace

Graph::Graph(const ParamStore& params, std::span<double> param_grads)
    : params_(params), param_grads_(param_grads), param_nodes_(params.tensor_count(), -1) {
  if (!param_grads_.empty())
    require(param_grads_.size() == params.total_count(), ErrorCode::DimensionMismatch,
            "gradient buffer size does not match parameter count");
  nodes_.reserve(1024);
  shapes_.reserve(1024);
}

Var Graph::push(std::vector<double> val, bool needs_grad) {
  Node n;
  n.size = val.size();
  n.val = std::move(val);
  n.needs_grad = needs_grad && grad_enabled();
  nodes_.push_back(std::move(n));
  shapes_.push_back({static_cast<int>(nodes_.back().size), 1});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const double* Graph::vptr(Var v) const {
  const Node& n = nodes_[v.id];
  return n.ext_val ? n.ext_val : n.val.data();
}

double* Graph::gptr(Var v) {
  Node& n = nodes_[v.id];
  if (n.ext_grad) return n.ext_grad;
  if (n.grad.size() != n.size) n.grad.assign(n.size, 0.0);
  return n.grad.data();
}

bool Graph::record(std::initializer_list<Var> inputs) const {
  if (!grad_enabled()) return false;
  return std::any_of(inputs.begin(), inputs.end(), [&](Var v) { return needs(v); });
}

void Graph::shape_check(bool ok, const char* op) const {
  if (!ok) fail(ErrorCode::DimensionMismatch, op);
}

int Graph::rows_of(Var w) const { return shapes_[w.id].rows; }
int Graph::cols_of(Var w) const { return shapes_[w.id].cols; }

std::span<const double> Graph::value(Var v) const { return {vptr(v), nodes_[v.id].size}; }

std::span<const double> Graph::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.ext_grad) return {n.ext_grad, n.size};
  if (n.grad.empty()) return {};
  return n.grad;
}

Var Graph::param(ParamId id) {
  int& cached = param_nodes_.at(static_cast<std::size_t>(id));
  if (cached >= 0) return Var{cached};
  const auto& info = params_.info(id);
  Node n;
  n.size = info.size;
  n.ext_val = params_.flat_values().data() + info.offset;
  if (grad_enabled()) {
    n.ext_grad = param_grads_.data() + info.offset;
    n.needs_grad = true;
  }
  nodes_.push_back(std::move(n));
  Shape s{static_cast<int>(info.size), 1};
  if (info.shape.size() >= 2) {
    s.rows = info.shape[0];
    s.cols = static_cast<int>(info.size / static_cast<std::size_t>(info.shape[0]));
  }
  shapes_.push_back(s);
  cached = static_cast<int>(nodes_.size()) - 1;
  return Var{cached};
}

Var Graph::constant(std::span<const double> values) {
  return push(std::vector<double>(values.begin(), values.end()), false);
}

Var Graph::constant(std::vector<double> values) { return push(std::move(values), false); }

Var Graph::zeros(std::size_t n) { return push(std::vector<double>(n, 0.0), false); }

// --------------------------------------------------------------------------

Var Graph::matvec(Var w, Var x) {
  const int r = rows_of(w), c = cols_of(w);
  shape_check(static_cast<int>(size(x)) == c, "matvec: input width");
  std::vector<double> y(r, 0.0);
  const double* W = vptr(w);
  const double* X = vptr(x);
  for (int i = 0; i < r; ++i) {
    double s = 0.0;
    const double* row = W + static_cast<std::size_t>(i) * c;
    for (int j = 0; j < c; ++j) s += row[j] * X[j];
    y[i] = s;
  }
  const bool rec = record({w, x});
  Var out = push(std::move(y), rec);
  if (rec) {
    nodes_[out.id].back = [this, w, x, out, r, c] {
      const double* gy = gptr(out);
      const double* W = vptr(w);
      const double* X = vptr(x);
      if (needs(w)) {
        double* gW = gptr(w);
        for (int i = 0; i < r; ++i) {
          if (gy[i] == 0.0) continue;
          double* row = gW + static_cast<std::size_t>(i) * c;
          for (int j = 0; j < c; ++j) row[j] += gy[i] * X[j];
        }
      }
      if (needs(x)) {
        double* gx = gptr(x);
        for (int i = 0; i < r; ++i) {
          if (gy[i] == 0.0) continue;
          const double* row = W + static_cast<std::size_t>(i) * c;
          for (int j = 0; j < c; ++j) gx[j] += row[j] * gy[i];
        }
      }
    };
  }
  return out;
}

Var Graph::affine(Var w, Var x, Var b) {
  shape_check(static_cast<int>(size(b)) == rows_of(w), "affine: bias size");
  return add(matvec(w, x), b);
}

Var Graph::add(Var a, Var b) {
  shape_check(size(a) == size(b), "add: size mismatch");
  const std::size_t n = size(a);
  std::vector<double> y(n);
  const double* A = vptr(a);
  const double* B = vptr(b);
  for (std::size_t i = 0; i < n; ++i) y[i] = A[i] + B[i];
  const bool rec = record({a, b});
  Var out = push(std::move(y), rec);
  if (rec) {
    nodes_[out.id].back = [this, a, b, out, n] {
      const double* gy = gptr(out);
      if (needs(a)) {
        double* ga = gptr(a);
        for (std::size_t i = 0; i < n; ++i) ga[i] += gy[i];
      }
      if (needs(b)) {
        double* gb = gptr(b);
        for (std::size_t i = 0; i < n; ++i) gb[i] += gy[i];
      }
    };
  }
  return out;
}

Var Graph::mul(Var a, Var b) {
  shape_check(size(a) == size(b), "mul: size mismatch");
  const std::size_t n = size(a);
  std::vector<double> y(n);
  const double* A = vptr(a);
  const double* B = vptr(b);
  for (std::size_t i = 0; i < n; ++i) y[i] = A[i] * B[i];
  const bool rec = record({a, b});
  Var out = push(std::move(y), rec);
  if (rec) {
    nodes_[out.id].back = [this, a, b, out, n] {
      const double* gy = gptr(out);
      const double* A = vptr(a);
      const double* B = vptr(b);
      if (needs(a)) {
        double* ga = gptr(a);
        for (std::size_t i = 0; i < n; ++i) ga[i] += gy[i] * B[i];
      }
      if (needs(b)) {
        double* gb = gptr(b);
        for (std::size_t i = 0; i < n; ++i) gb[i] += gy[i] * A[i];
      }
    };
  }
  return out;
}

Var Graph::one_minus(Var a) {
  const std::size_t n = size(a);
  std::vector<double> y(n);
  const double* A = vptr(a);
  for (std::size_t i = 0; i < n; ++i) y[i] = 1.0 - A[i];
  const bool rec = record({a});
  Var out = push(std::move(y), rec);
  if (rec) {
    nodes_[out.id].back = [this, a, out, n] {
      const double* gy = gptr(out);
      double* ga = gptr(a);
      for (std::size_t i = 0; i < n; ++i) ga[i] -= gy[i];
    };
  }
  return out;
}

Var Graph::concat(std::span<const Var> parts) {
  std::vector<double> y;
  bool rec = false;
  for (Var p : parts) {
    auto v = value(p);
    y.insert(y.end(), v.begin(), v.end());
    rec = rec || (grad_enabled() && needs(p));
  }
  Var out = push(std::move(y), rec);
  if (rec) {
    std::vector<Var> ps(parts.begin(), parts.end());
    nodes_[out.id].back = [this, ps, out] {
      const double* gy = gptr(out);
      std::size_t off = 0;
      for (Var p : ps) {
        const std::size_t n = size(p);
        if (needs(p)) {
          double* gp = gptr(p);
          for (std::size_t i = 0; i < n; ++i) gp[i] += gy[off + i];
        }
        off += n;
      }
    };
  }
  return out;
}

Var Graph::sum_scalars(std::span<const Var> scalars) {
  double s = 0.0;
  bool rec = false;
  for (Var v : scalars) {
    shape_check(size(v) == 1, "sum_scalars: non-scalar");
    s += vptr(v)[0];
    rec = rec || (grad_enabled() && needs(v));
  }
  Var out = push({s}, rec);
  if (rec) {
    std::vector<Var> vs(scalars.begin(), scalars.end());
    nodes_[out.id].back = [this, vs, out] {
      const double gy = gptr(out)[0];
      for (Var v : vs)
        if (needs(v)) gptr(v)[0] += gy;
    };
  }
  return out;
}

Var Graph::sigmoid(Var a) {
  const std::size_t n = size(a);
  std::vector<double> y(n);
  const double* A = vptr(a);
  for (std::size_t i = 0; i < n; ++i) y[i] = stable_sigmoid(A[i]);
  const bool rec = record({a});
  Var out = push(std::move(y), rec);
  if (rec) {
    nodes_[out.id].back = [this, a, out, n] {
      const double* gy = gptr(out);
      const double* Y = vptr(out);
      double* ga = gptr(a);
      for (std::size_t i = 0; i < n; ++i) ga[i] += gy[i] * Y[i] * (1.0 - Y[i]);
    };
  }
  return out;
}

Var Graph::tanh(Var a) {
  const std::size_t n = size(a);
  std::vector<double> y(n);
  const double* A = vptr(a);
  for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(A[i]);
  const bool rec = record({a});
  Var out = push(std::move(y), rec);
  if (rec) {
    nodes_[out.id].back = [this, a, out, n] {
      const double* gy = gptr(out);
      const double* Y = vptr(out);
      double* ga = gptr(a);
      for (std::size_t i = 0; i < n; ++i) ga[i] += gy[i] * (1.0 - Y[i] * Y[i]);
    };
  }
  return out;
}

Var Graph::embedding(Var table, int row, bool zeroed) {
  const int rows = rows_of(table), cols = cols_of(table);
  if (zeroed) return zeros(static_cast<std::size_t>(cols));
  if (row < 0 || row >= rows) fail(ErrorCode::UnknownToken, "embedding row " + std::to_string(row));
  const double* T = vptr(table) + static_cast<std::size_t>(row) * cols;
  const bool rec = record({table});
  Var out = push(std::vector<double>(T, T + cols), rec);
  if (rec) {
    nodes_[out.id].back = [this, table, out, row, cols] {
      const double* gy = gptr(out);
      double* gt = gptr(table) + static_cast<std::size_t>(row) * cols;
      for (int i = 0; i < cols; ++i) gt[i] += gy[i];
    };
  }
  return out;
}

Var Graph::dot(Var a, Var b) {
  shape_check(size(a) == size(b), "dot: size mismatch");
  const std::size_t n = size(a);
  const double* A = vptr(a);
  const double* B = vptr(b);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += A[i] * B[i];
  const bool rec = record({a, b});
  Var out = push({s}, rec);
  if (rec) {
    nodes_[out.id].back = [this, a, b, out, n] {
      const double gy = gptr(out)[0];
      const double* A = vptr(a);
      const double* B = vptr(b);
      if (needs(a)) {
        double* ga = gptr(a);
        for (std::size_t i = 0; i < n; ++i) ga[i] += gy * B[i];
      }
      if (needs(b)) {
        double* gb = gptr(b);
        for (std::size_t i = 0; i < n; ++i) gb[i] += gy * A[i];
      }
    };
  }
  return out;
}

Var Graph::attention_weights(Var query, std::span<const Var> keys) {
  shape_check(!keys.empty(), "attention: no keys");
  const std::size_t d = size(query);
  const std::size_t k = keys.size();
  std::vector<double> scores(k);
  const double* Q = vptr(query);
  for (std::size_t i = 0; i < k; ++i) {
    shape_check(size(keys[i]) == d, "attention: key width");
    const double* K = vptr(keys[i]);
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += Q[j] * K[j];
    scores[i] = s;
  }
  const double m = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  for (auto& s : scores) {
    s = std::exp(s - m);
    total += s;
  }
  for (auto& s : scores) s /= total;
  bool rec = grad_enabled() && needs(query);
  for (Var kv : keys) rec = rec || (grad_enabled() && needs(kv));
  Var out = push(std::move(scores), rec);
  if (rec) {
    std::vector<Var> ks(keys.begin(), keys.end());
    nodes_[out.id].back = [this, query, ks, out, d] {
      const double* gw = gptr(out);
      const double* W = vptr(out);
      const std::size_t k = ks.size();
      double inner = 0.0;
      for (std::size_t i = 0; i < k; ++i) inner += W[i] * gw[i];
      const double* Q = vptr(query);
      for (std::size_t i = 0; i < k; ++i) {
        const double gs = W[i] * (gw[i] - inner);
        if (gs == 0.0) continue;
        const double* K = vptr(ks[i]);
        if (needs(query)) {
          double* gq = gptr(query);
          for (std::size_t j = 0; j < d; ++j) gq[j] += gs * K[j];
        }
        if (needs(ks[i])) {
          double* gk = gptr(ks[i]);
          for (std::size_t j = 0; j < d; ++j) gk[j] += gs * Q[j];
        }
      }
    };
  }
  return out;
}

Var Graph::weighted_sum(Var weights, std::span<const Var> values) {
  shape_check(size(weights) == values.size() && !values.empty(), "weighted_sum: count");
  const std::size_t d = size(values[0]);
  std::vector<double> y(d, 0.0);
  const double* W = vptr(weights);
  for (std::size_t i = 0; i < values.size(); ++i) {
    shape_check(size(values[i]) == d, "weighted_sum: width");
    const double* V = vptr(values[i]);
    for (std::size_t j = 0; j < d; ++j) y[j] += W[i] * V[j];
  }
  bool rec = grad_enabled() && needs(weights);
  for (Var v : values) rec = rec || (grad_enabled() && needs(v));
  Var out = push(std::move(y), rec);
  if (rec) {
    std::vector<Var> vs(values.begin(), values.end());
    nodes_[out.id].back = [this, weights, vs, out, d] {
      const double* gy = gptr(out);
      const double* W = vptr(weights);
      for (std::size_t i = 0; i < vs.size(); ++i) {
        const double* V = vptr(vs[i]);
        if (needs(weights)) {
          double s = 0.0;
          for (std::size_t j = 0; j < d; ++j) s += gy[j] * V[j];
          gptr(weights)[i] += s;
        }
        if (needs(vs[i])) {
          double* gv = gptr(vs[i]);
          for (std::size_t j = 0; j < d; ++j) gv[j] += W[i] * gy[j];
        }
      }
    };
  }
  return out;
}

Var Graph::conv3x3(Var input, int height, int width, int in_ch, Var kernel, Var bias, int out_ch) {
  const std::size_t cells = static_cast<std::size_t>(height) * width;
  shape_check(size(input) == cells * in_ch, "conv3x3: input size");
  shape_check(size(kernel) == static_cast<std::size_t>(out_ch) * 9 * in_ch, "conv3x3: kernel size");
  shape_check(static_cast<int>(size(bias)) == out_ch, "conv3x3: bias size");
  std::vector<double> y(cells * out_ch);
  const double* X = vptr(input);
  const double* K = vptr(kernel);
  const double* B = vptr(bias);
  for (int yy = 0; yy < height; ++yy)
    for (int xx = 0; xx < width; ++xx) {
      double* out = y.data() + (static_cast<std::size_t>(yy) * width + xx) * out_ch;
      for (int o = 0; o < out_ch; ++o) out[o] = B[o];
      for (int ky = 0; ky < 3; ++ky) {
        const int sy = yy + ky - 1;
        if (sy < 0 || sy >= height) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int sx = xx + kx - 1;
          if (sx < 0 || sx >= width) continue;
          const double* in = X + (static_cast<std::size_t>(sy) * width + sx) * in_ch;
          for (int o = 0; o < out_ch; ++o) {
            const double* k = K + ((static_cast<std::size_t>(o) * 3 + ky) * 3 + kx) * in_ch;
            double s = 0.0;
            for (int c = 0; c < in_ch; ++c) s += k[c] * in[c];
            out[o] += s;
          }
        }
      }
    }
  const bool rec = record({input, kernel, bias});
  Var out = push(std::move(y), rec);
  if (rec) {
    nodes_[out.id].back = [this, input, kernel, bias, out, height, width, in_ch, out_ch] {
      const double* gy = gptr(out);
      const double* X = vptr(input);
      const double* K = vptr(kernel);
      double* gx = needs(input) ? gptr(input) : nullptr;
      double* gk = needs(kernel) ? gptr(kernel) : nullptr;
      double* gb = needs(bias) ? gptr(bias) : nullptr;
      for (int yy = 0; yy < height; ++yy)
        for (int xx = 0; xx < width; ++xx) {
          const double* g = gy + (static_cast<std::size_t>(yy) * width + xx) * out_ch;
          if (gb)
            for (int o = 0; o < out_ch; ++o) gb[o] += g[o];
          for (int ky = 0; ky < 3; ++ky) {
            const int sy = yy + ky - 1;
            if (sy < 0 || sy >= height) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int sx = xx + kx - 1;
              if (sx < 0 || sx >= width) continue;
              const std::size_t in_off = (static_cast<std::size_t>(sy) * width + sx) * in_ch;
              for (int o = 0; o < out_ch; ++o) {
                if (g[o] == 0.0) continue;
                const std::size_t k_off = ((static_cast<std::size_t>(o) * 3 + ky) * 3 + kx) * in_ch;
                if (gk)
                  for (int c = 0; c < in_ch; ++c) gk[k_off + c] += g[o] * X[in_off + c];
                if (gx)
                  for (int c = 0; c < in_ch; ++c) gx[in_off + c] += g[o] * K[k_off + c];
              }
            }
          }
        }
    };
  }
  return out;
}

Var Graph::tile_concat(Var grid, int cells, int grid_ch, Var vec) {
  shape_check(size(grid) == static_cast<std::size_t>(cells) * grid_ch, "tile_concat: grid size");
  const int vd = static_cast<int>(size(vec));
  const int out_ch = grid_ch + vd;
  std::vector<double> y(static_cast<std::size_t>(cells) * out_ch);
  const double* G = vptr(grid);
  const double* V = vptr(vec);
  for (int c = 0; c < cells; ++c) {
    double* o = y.data() + static_cast<std::size_t>(c) * out_ch;
    std::copy(G + static_cast<std::size_t>(c) * grid_ch, G + static_cast<std::size_t>(c + 1) * grid_ch, o);
    std::copy(V, V + vd, o + grid_ch);
  }
  const bool rec = record({grid, vec});
  Var out = push(std::move(y), rec);
  if (rec) {
    nodes_[out.id].back = [this, grid, vec, out, cells, grid_ch, vd, out_ch] {
      const double* gy = gptr(out);
      double* gg = needs(grid) ? gptr(grid) : nullptr;
      double* gv = needs(vec) ? gptr(vec) : nullptr;
      for (int c = 0; c < cells; ++c) {
        const double* g = gy + static_cast<std::size_t>(c) * out_ch;
        if (gg)
          for (int k = 0; k < grid_ch; ++k) gg[static_cast<std::size_t>(c) * grid_ch + k] += g[k];
        if (gv)
          for (int k = 0; k < vd; ++k) gv[k] += g[grid_ch + k];
      }
    };
  }
  return out;
}

Var Graph::spatial_sum(Var grid, int cells, int ch) {
  shape_check(size(grid) == static_cast<std::size_t>(cells) * ch, "spatial_sum: grid size");
  std::vector<double> y(ch, 0.0);
  const double* G = vptr(grid);
  for (int c = 0; c < cells; ++c)
    for (int k = 0; k < ch; ++k) y[k] += G[static_cast<std::size_t>(c) * ch + k];
  const bool rec = record({grid});
  Var out = push(std::move(y), rec);
  if (rec) {
    nodes_[out.id].back = [this, grid, out, cells, ch] {
      const double* gy = gptr(out);
      double* gg = gptr(grid);
      for (int c = 0; c < cells; ++c)
        for (int k = 0; k < ch; ++k) gg[static_cast<std::size_t>(c) * ch + k] += gy[k];
    };
  }
  return out;
}

Var Graph::mask_logits(Var logits, std::span<const bool> available) {
  shape_check(size(logits) == available.size(), "mask_logits: mask size");
  const std::size_t n = size(logits);
  std::vector<double> y(n);
  const double* L = vptr(logits);
  for (std::size_t i = 0; i < n; ++i)
    y[i] = available[i] ? L[i] : -std::numeric_limits<double>::infinity();
  const bool rec = record({logits});
  Var out = push(std::move(y), rec);
  if (rec) {
    std::vector<bool> mask(available.begin(), available.end());
    nodes_[out.id].back = [this, logits, out, mask] {
      const double* gy = gptr(out);
      double* gl = gptr(logits);
      for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) gl[i] += gy[i];
    };
  }
  return out;
}

Var Graph::cross_entropy(Var logits, int target) {
  const std::size_t n = size(logits);
  shape_check(target >= 0 && static_cast<std::size_t>(target) < n, "cross_entropy: target index");
  const double* L = vptr(logits);
  shape_check(std::isfinite(L[target]), "cross_entropy: target is masked");
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    if (std::isfinite(L[i])) m = std::max(m, L[i]);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (std::isfinite(L[i])) total += std::exp(L[i] - m);
  const double lse = m + std::log(total);
  const bool rec = record({logits});
  Var out = push({lse - L[target]}, rec);
  if (rec) {
    nodes_[out.id].back = [this, logits, out, n, target, lse] {
      const double gy = gptr(out)[0];
      const double* L = vptr(logits);
      double* gl = gptr(logits);
      for (std::size_t i = 0; i < n; ++i) {
        const double p = std::isfinite(L[i]) ? std::exp(L[i] - lse) : 0.0;
        gl[i] += gy * (p - (static_cast<int>(i) == target ? 1.0 : 0.0));
      }
    };
  }
  return out;
}

Var Graph::binary_cross_entropy(Var logit, double target) {
  shape_check(size(logit) == 1, "binary_cross_entropy: non-scalar");
  const double z = vptr(logit)[0];
  const double loss = std::max(z, 0.0) - target * z + std::log1p(std::exp(-std::abs(z)));
  const bool rec = record({logit});
  Var out = push({loss}, rec);
  if (rec) {
    nodes_[out.id].back = [this, logit, out, target] {
      const double gy = gptr(out)[0];
      const double z = vptr(logit)[0];
      gptr(logit)[0] += gy * (stable_sigmoid(z) - target);
    };
  }
  return out;
}

void Graph::backward(Var loss) {
  require(grad_enabled(), ErrorCode::DimensionMismatch, "backward on a forward-only graph");
  shape_check(size(loss) == 1, "backward: loss must be scalar");
  if (!needs(loss)) return;
  gptr(loss)[0] += 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.back || n.grad.empty()) continue;
    n.back();
  }
}

// --------------------------------------------------------------------------

GruParams GruParams::create(ParamStore& s, const std::string& prefix, int input_dim, int hidden_dim) {
  GruParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.wz = s.add(prefix + ".wz", {hidden_dim, input_dim});
  p.uz = s.add(prefix + ".uz", {hidden_dim, hidden_dim});
  p.bz = s.add(prefix + ".bz", {hidden_dim});
  p.wr = s.add(prefix + ".wr", {hidden_dim, input_dim});
  p.ur = s.add(prefix + ".ur", {hidden_dim, hidden_dim});
  p.br = s.add(prefix + ".br", {hidden_dim});
  p.wn = s.add(prefix + ".wn", {hidden_dim, input_dim});
  p.un = s.add(prefix + ".un", {hidden_dim, hidden_dim});
  p.bn = s.add(prefix + ".bn", {hidden_dim});
  return p;
}

Var gru_step(Graph& g, const GruParams& p, Var x, Var h) {
  Var z = g.sigmoid(g.add(g.affine(g.param(p.wz), x, g.param(p.bz)), g.matvec(g.param(p.uz), h)));
  Var r = g.sigmoid(g.add(g.affine(g.param(p.wr), x, g.param(p.br)), g.matvec(g.param(p.ur), h)));
  Var n = g.tanh(
      g.add(g.affine(g.param(p.wn), x, g.param(p.bn)), g.matvec(g.param(p.un), g.mul(r, h))));
  return g.add(g.mul(g.one_minus(z), n), g.mul(z, h));
}

DenseParams DenseParams::create(ParamStore& s, const std::string& prefix, int in, int out) {
  DenseParams p;
  p.in = in;
  p.out = out;
  p.w = s.add(prefix + ".w", {out, in});
  p.b = s.add(prefix + ".b", {out});
  return p;
}

}  // namespace navqa
