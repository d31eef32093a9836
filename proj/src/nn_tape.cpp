#include "protshape/nn/tape.hpp"

#include <algorithm>
#include <cmath>

namespace protshape::nn {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw ShapeMismatch(msg);
}

}  // namespace

NodeId Tape::push(Tensor val, std::function<void()> back) {
  nodes_.push_back(Node{std::move(val), Tensor{}, std::move(back)});
  return static_cast<NodeId>(nodes_.size() - 1);
}

Tensor& Tape::grad_buf(NodeId id) {
  Node& n = nodes_[id];
  if (n.grad.v.empty()) n.grad = Tensor::zeros(n.val.shape);
  return n.grad;
}

const Tensor& Tape::grad(NodeId id) { return grad_buf(id); }

NodeId Tape::constant(Tensor t) { return push(std::move(t)); }

NodeId Tape::param(ParamStore& store, const std::string& name) {
  auto it = param_nodes_.find(name);
  if (it != param_nodes_.end()) return it->second;
  const NodeId id = push(store.at(name));
  param_nodes_[name] = id;
  return id;
}

NodeId Tape::dense(NodeId x, NodeId w, NodeId b) {
  const Tensor& xv = nodes_[x].val;
  const Tensor& wv = nodes_[w].val;
  const Tensor& bv = nodes_[b].val;
  require(wv.rank() == 2, "dense: W must be rank 2");
  const std::size_t in = wv.dim(0), out = wv.dim(1);
  require(bv.rank() == 1 && bv.dim(0) == out, "dense: b must be [out]");
  const bool batched = xv.rank() == 2;
  require(batched ? xv.dim(1) == in : (xv.rank() == 1 && xv.dim(0) == in),
          "dense: x does not match W");
  const std::size_t B = batched ? xv.dim(0) : 1;

  Tensor y = batched ? Tensor::zeros({B, out}) : Tensor::zeros({out});
  for (std::size_t bi = 0; bi < B; ++bi) {
    double* yr = y.v.data() + bi * out;
    const double* xr = xv.v.data() + bi * in;
    for (std::size_t o = 0; o < out; ++o) yr[o] = bv.v[o];
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = xr[i];
      const double* wr = wv.v.data() + i * out;
      for (std::size_t o = 0; o < out; ++o) yr[o] += xi * wr[o];
    }
  }
  const NodeId id = push(std::move(y));
  nodes_[id].back = [this, id, x, w, b, B, in, out]() {
    const Tensor& g = nodes_[id].grad;
    const Tensor& xv2 = nodes_[x].val;
    const Tensor& wv2 = nodes_[w].val;
    Tensor& gx = grad_buf(x);
    Tensor& gw = grad_buf(w);
    Tensor& gb = grad_buf(b);
    for (std::size_t bi = 0; bi < B; ++bi) {
      const double* gr = g.v.data() + bi * out;
      const double* xr = xv2.v.data() + bi * in;
      double* gxr = gx.v.data() + bi * in;
      for (std::size_t o = 0; o < out; ++o) gb.v[o] += gr[o];
      for (std::size_t i = 0; i < in; ++i) {
        const double* wr = wv2.v.data() + i * out;
        double* gwr = gw.v.data() + i * out;
        double acc = 0.0;
        const double xi = xr[i];
        for (std::size_t o = 0; o < out; ++o) {
          acc += gr[o] * wr[o];
          gwr[o] += xi * gr[o];
        }
        gxr[i] += acc;
      }
    }
  };
  return id;
}

NodeId Tape::conv1d(NodeId x, NodeId k, NodeId b) {
  const Tensor& xv = nodes_[x].val;
  const Tensor& kv = nodes_[k].val;
  const Tensor& bv = nodes_[b].val;
  require(xv.rank() == 2, "conv1d: x must be [Cin,T]");
  require(kv.rank() == 3, "conv1d: kernel must be [Cout,Cin,k]");
  const std::size_t cin = xv.dim(0), T = xv.dim(1);
  const std::size_t cout = kv.dim(0), klen = kv.dim(2);
  require(kv.dim(1) == cin, "conv1d: kernel Cin mismatch");
  require(klen % 2 == 1, "conv1d: kernel length must be odd");
  require(bv.rank() == 1 && bv.dim(0) == cout, "conv1d: b must be [Cout]");
  const long pad = static_cast<long>(klen / 2);

  Tensor y = Tensor::zeros({cout, T});
  for (std::size_t o = 0; o < cout; ++o) {
    double* yr = y.v.data() + o * T;
    for (std::size_t t = 0; t < T; ++t) yr[t] = bv.v[o];
    for (std::size_t c = 0; c < cin; ++c) {
      const double* xr = xv.v.data() + c * T;
      const double* kr = kv.v.data() + (o * cin + c) * klen;
      for (std::size_t d = 0; d < klen; ++d) {
        const double kw = kr[d];
        const long off = static_cast<long>(d) - pad;
        const std::size_t t0 = off < 0 ? static_cast<std::size_t>(-off) : 0;
        const std::size_t t1 = off > 0 ? T - static_cast<std::size_t>(off) : T;
        for (std::size_t t = t0; t < t1; ++t) yr[t] += kw * xr[t + off];
      }
    }
  }
  const NodeId id = push(std::move(y));
  nodes_[id].back = [this, id, x, k, b, cin, cout, T, klen, pad]() {
    const Tensor& g = nodes_[id].grad;
    const Tensor& xv2 = nodes_[x].val;
    const Tensor& kv2 = nodes_[k].val;
    Tensor& gx = grad_buf(x);
    Tensor& gk = grad_buf(k);
    Tensor& gb = grad_buf(b);
    for (std::size_t o = 0; o < cout; ++o) {
      const double* gr = g.v.data() + o * T;
      for (std::size_t t = 0; t < T; ++t) gb.v[o] += gr[t];
      for (std::size_t c = 0; c < cin; ++c) {
        const double* xr = xv2.v.data() + c * T;
        const double* kr = kv2.v.data() + (o * cin + c) * klen;
        double* gxr = gx.v.data() + c * T;
        double* gkr = gk.v.data() + (o * cin + c) * klen;
        for (std::size_t d = 0; d < klen; ++d) {
          const long off = static_cast<long>(d) - pad;
          const std::size_t t0 = off < 0 ? static_cast<std::size_t>(-off) : 0;
          const std::size_t t1 = off > 0 ? T - static_cast<std::size_t>(off) : T;
          const double kw = kr[d];
          double acc = 0.0;
          for (std::size_t t = t0; t < t1; ++t) {
            acc += gr[t] * xr[t + off];
            gxr[t + off] += gr[t] * kw;
          }
          gkr[d] += acc;
        }
      }
    }
  };
  return id;
}

NodeId Tape::elu(NodeId x) {
  const Tensor& xv = nodes_[x].val;
  Tensor y = xv;
  for (double& t : y.v) t = t > 0 ? t : std::expm1(t);
  const NodeId id = push(std::move(y));
  nodes_[id].back = [this, id, x]() {
    const Tensor& g = nodes_[id].grad;
    const Tensor& xv2 = nodes_[x].val;
    Tensor& gx = grad_buf(x);
    for (std::size_t i = 0; i < g.size(); ++i)
      gx.v[i] += g.v[i] * (xv2.v[i] > 0 ? 1.0 : std::exp(xv2.v[i]));
  };
  return id;
}

NodeId Tape::relu(NodeId x) {
  const Tensor& xv = nodes_[x].val;
  Tensor y = xv;
  for (double& t : y.v) t = t > 0 ? t : 0.0;
  const NodeId id = push(std::move(y));
  nodes_[id].back = [this, id, x]() {
    const Tensor& g = nodes_[id].grad;
    const Tensor& xv2 = nodes_[x].val;
    Tensor& gx = grad_buf(x);
    for (std::size_t i = 0; i < g.size(); ++i)
      gx.v[i] += xv2.v[i] > 0 ? g.v[i] : 0.0;
  };
  return id;
}

NodeId Tape::cumsum(NodeId x) {
  const Tensor& xv = nodes_[x].val;
  require(xv.rank() == 1, "cumsum: 1-d only");
  Tensor y = xv;
  for (std::size_t i = 1; i < y.size(); ++i) y.v[i] += y.v[i - 1];
  const NodeId id = push(std::move(y));
  nodes_[id].back = [this, id, x]() {
    const Tensor& g = nodes_[id].grad;
    Tensor& gx = grad_buf(x);
    double acc = 0.0;
    for (std::size_t i = g.size(); i-- > 0;) {
      acc += g.v[i];
      gx.v[i] += acc;
    }
  };
  return id;
}

NodeId Tape::concat(const std::vector<NodeId>& xs) {
  require(!xs.empty(), "concat: needs at least one input");
  const std::size_t rank = nodes_[xs[0]].val.rank();
  require(rank == 1 || rank == 2, "concat: rank 1 or 2 only");
  std::size_t rows = 0;
  const std::size_t cols = rank == 2 ? nodes_[xs[0]].val.dim(1) : 0;
  for (NodeId x : xs) {
    const Tensor& t = nodes_[x].val;
    require(t.rank() == rank, "concat: mixed ranks");
    if (rank == 2) require(t.dim(1) == cols, "concat: trailing dims differ");
    rows += t.dim(0);
  }
  Tensor y = rank == 2 ? Tensor::zeros({rows, cols}) : Tensor::zeros({rows});
  std::size_t at = 0;
  for (NodeId x : xs) {
    const Tensor& t = nodes_[x].val;
    std::copy(t.v.begin(), t.v.end(), y.v.begin() + at);
    at += t.size();
  }
  const NodeId id = push(std::move(y));
  std::vector<NodeId> parents = xs;
  nodes_[id].back = [this, id, parents]() {
    const Tensor& g = nodes_[id].grad;
    std::size_t at = 0;
    for (NodeId x : parents) {
      Tensor& gx = grad_buf(x);
      for (std::size_t i = 0; i < gx.size(); ++i) gx.v[i] += g.v[at + i];
      at += gx.size();
    }
  };
  return id;
}

NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& av = nodes_[a].val;
  const Tensor& bv = nodes_[b].val;
  require(av.same_shape(bv), "add: shapes differ");
  Tensor y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y.v[i] += bv.v[i];
  const NodeId id = push(std::move(y));
  nodes_[id].back = [this, id, a, b]() {
    const Tensor& g = nodes_[id].grad;
    Tensor& ga = grad_buf(a);
    Tensor& gb = grad_buf(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.v[i] += g.v[i];
      gb.v[i] += g.v[i];
    }
  };
  return id;
}

NodeId Tape::scale(NodeId x, double c) {
  Tensor y = nodes_[x].val;
  for (double& t : y.v) t *= c;
  const NodeId id = push(std::move(y));
  nodes_[id].back = [this, id, x, c]() {
    const Tensor& g = nodes_[id].grad;
    Tensor& gx = grad_buf(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx.v[i] += c * g.v[i];
  };
  return id;
}

NodeId Tape::pointwise_mul(NodeId a, NodeId b) {
  const Tensor& av = nodes_[a].val;
  const Tensor& bv = nodes_[b].val;
  require(av.same_shape(bv), "pointwise_mul: shapes differ");
  Tensor y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y.v[i] *= bv.v[i];
  const NodeId id = push(std::move(y));
  nodes_[id].back = [this, id, a, b]() {
    const Tensor& g = nodes_[id].grad;
    const Tensor& av2 = nodes_[a].val;
    const Tensor& bv2 = nodes_[b].val;
    Tensor& ga = grad_buf(a);
    Tensor& gb = grad_buf(b);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.v[i] += g.v[i] * bv2.v[i];
      gb.v[i] += g.v[i] * av2.v[i];
    }
  };
  return id;
}

NodeId Tape::l2_loss(NodeId x, NodeId y) {
  const Tensor& xv = nodes_[x].val;
  const Tensor& yv = nodes_[y].val;
  require(xv.same_shape(yv), "l2_loss: shapes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double d = xv.v[i] - yv.v[i];
    s += d * d;
  }
  const NodeId id = push(Tensor::scalar(s));
  nodes_[id].back = [this, id, x, y]() {
    const double g = nodes_[id].grad.v[0];
    const Tensor& xv2 = nodes_[x].val;
    const Tensor& yv2 = nodes_[y].val;
    Tensor& gx = grad_buf(x);
    Tensor& gy = grad_buf(y);
    for (std::size_t i = 0; i < xv2.size(); ++i) {
      const double d = 2.0 * g * (xv2.v[i] - yv2.v[i]);
      gx.v[i] += d;
      gy.v[i] -= d;
    }
  };
  return id;
}

NodeId Tape::normalize_to_unit_sphere(NodeId x) {
  const Tensor& xv = nodes_[x].val;
  double norm2 = 0.0;
  for (double t : xv.v) norm2 += t * t;
  const double norm = std::sqrt(norm2);
  if (norm < 1e-300) throw ZeroNorm("normalize_to_unit_sphere: zero input");
  Tensor y = xv;
  for (double& t : y.v) t /= norm;
  const NodeId id = push(std::move(y));
  nodes_[id].back = [this, id, x, norm]() {
    const Tensor& g = nodes_[id].grad;
    const Tensor& yv = nodes_[id].val;
    Tensor& gx = grad_buf(x);
    double gy = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) gy += g.v[i] * yv.v[i];
    for (std::size_t i = 0; i < g.size(); ++i)
      gx.v[i] += (g.v[i] - gy * yv.v[i]) / norm;
  };
  return id;
}

NodeId Tape::sqrt_elem(NodeId x) {
  const Tensor& xv = nodes_[x].val;
  Tensor y = xv;
  for (double& t : y.v) t = t > 0 ? std::sqrt(t) : 0.0;
  const NodeId id = push(std::move(y));
  nodes_[id].back = [this, id, x]() {
    const Tensor& g = nodes_[id].grad;
    const Tensor& xv2 = nodes_[x].val;
    const Tensor& yv = nodes_[id].val;
    Tensor& gx = grad_buf(x);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv2.v[i] > 0) gx.v[i] += 0.5 * g.v[i] / yv.v[i];
  };
  return id;
}

NodeId Tape::recip(NodeId x) {
  const Tensor& xv = nodes_[x].val;
  Tensor y = xv;
  for (double& t : y.v) t = 1.0 / t;
  const NodeId id = push(std::move(y));
  nodes_[id].back = [this, id, x]() {
    const Tensor& g = nodes_[id].grad;
    const Tensor& yv = nodes_[id].val;
    Tensor& gx = grad_buf(x);
    for (std::size_t i = 0; i < g.size(); ++i)
      gx.v[i] -= g.v[i] * yv.v[i] * yv.v[i];
  };
  return id;
}

NodeId Tape::slice(NodeId x, std::size_t start, std::size_t len) {
  const Tensor& xv = nodes_[x].val;
  require(xv.rank() == 1, "slice: 1-d only");
  require(start + len <= xv.size(), "slice: out of range");
  Tensor y = Tensor::zeros({len});
  std::copy(xv.v.begin() + start, xv.v.begin() + start + len, y.v.begin());
  const NodeId id = push(std::move(y));
  nodes_[id].back = [this, id, x, start, len]() {
    const Tensor& g = nodes_[id].grad;
    Tensor& gx = grad_buf(x);
    for (std::size_t i = 0; i < len; ++i) gx.v[start + i] += g.v[i];
  };
  return id;
}

NodeId Tape::broadcast_scalar(NodeId x, std::size_t n) {
  const Tensor& xv = nodes_[x].val;
  require(xv.size() == 1, "broadcast_scalar: input must hold one value");
  Tensor y({n}, std::vector<double>(n, xv.v[0]));
  const NodeId id = push(std::move(y));
  nodes_[id].back = [this, id, x]() {
    const Tensor& g = nodes_[id].grad;
    Tensor& gx = grad_buf(x);
    for (double t : g.v) gx.v[0] += t;
  };
  return id;
}

NodeId Tape::rowmul(NodeId x, NodeId s) {
  const Tensor& xv = nodes_[x].val;
  const Tensor& sv = nodes_[s].val;
  require(xv.rank() == 2 && sv.rank() == 1 && sv.dim(0) == xv.dim(1),
          "rowmul: expects [C,K] and [K]");
  const std::size_t C = xv.dim(0), K = xv.dim(1);
  Tensor y = xv;
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t k = 0; k < K; ++k) y.v[c * K + k] *= sv.v[k];
  const NodeId id = push(std::move(y));
  nodes_[id].back = [this, id, x, s, C, K]() {
    const Tensor& g = nodes_[id].grad;
    const Tensor& xv2 = nodes_[x].val;
    const Tensor& sv2 = nodes_[s].val;
    Tensor& gx = grad_buf(x);
    Tensor& gs = grad_buf(s);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t k = 0; k < K; ++k) {
        gx.v[c * K + k] += g.v[c * K + k] * sv2.v[k];
        gs.v[k] += g.v[c * K + k] * xv2.v[c * K + k];
      }
  };
  return id;
}

NodeId Tape::reshape(NodeId x, std::vector<std::size_t> shape) {
  const Tensor& xv = nodes_[x].val;
  require(Tensor::count(shape) == xv.size(), "reshape: element count differs");
  Tensor y(std::move(shape), xv.v);
  const NodeId id = push(std::move(y));
  nodes_[id].back = [this, id, x]() {
    const Tensor& g = nodes_[id].grad;
    Tensor& gx = grad_buf(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx.v[i] += g.v[i];
  };
  return id;
}

NodeId Tape::linear_interp(NodeId values, NodeId positions, double x_max) {
  const Tensor& vv = nodes_[values].val;
  const Tensor& pv = nodes_[positions].val;
  require(vv.rank() == 1 || vv.rank() == 2, "linear_interp: values rank 1 or 2");
  require(pv.rank() == 1, "linear_interp: positions must be 1-d");
  require(x_max > 0, "linear_interp: x_max must be positive");
  const std::size_t M = vv.rank() == 1 ? vv.dim(0) : vv.dim(1);
  const std::size_t C = vv.rank() == 1 ? 1 : vv.dim(0);
  require(M >= 2, "linear_interp: needs at least 2 nodes");
  const std::size_t K = pv.dim(0);
  const double to_cell = (M - 1) / x_max;

  // Cell index, fraction and clamp flag per position, shared with backward.
  std::vector<std::size_t> cell(K);
  std::vector<double> frac(K);
  std::vector<char> interior(K);
  for (std::size_t k = 0; k < K; ++k) {
    const double u = pv.v[k] * to_cell;
    if (u <= 0.0) {
      cell[k] = 0; frac[k] = 0.0; interior[k] = 0;
    } else if (u >= static_cast<double>(M - 1)) {
      cell[k] = M - 2; frac[k] = 1.0; interior[k] = 0;
    } else {
      const std::size_t j = static_cast<std::size_t>(u);
      cell[k] = j; frac[k] = u - static_cast<double>(j); interior[k] = 1;
    }
  }
  Tensor y = vv.rank() == 1 ? Tensor::zeros({K}) : Tensor::zeros({C, K});
  for (std::size_t c = 0; c < C; ++c) {
    const double* row = vv.v.data() + c * M;
    double* yr = y.v.data() + c * K;
    for (std::size_t k = 0; k < K; ++k)
      yr[k] = row[cell[k]] * (1.0 - frac[k]) + row[cell[k] + 1] * frac[k];
  }
  const NodeId id = push(std::move(y));
  nodes_[id].back = [this, id, values, positions, C, M, K, to_cell,
                     cell = std::move(cell), frac = std::move(frac),
                     interior = std::move(interior)]() {
    const Tensor& g = nodes_[id].grad;
    const Tensor& vv2 = nodes_[values].val;
    Tensor& gv = grad_buf(values);
    Tensor& gp = grad_buf(positions);
    for (std::size_t c = 0; c < C; ++c) {
      const double* row = vv2.v.data() + c * M;
      const double* gr = g.v.data() + c * K;
      double* gvr = gv.v.data() + c * M;
      for (std::size_t k = 0; k < K; ++k) {
        gvr[cell[k]] += gr[k] * (1.0 - frac[k]);
        gvr[cell[k] + 1] += gr[k] * frac[k];
        if (interior[k])
          gp.v[k] += gr[k] * (row[cell[k] + 1] - row[cell[k]]) * to_cell;
      }
    }
  };
  return id;
}

NodeId Tape::grid_derivative(NodeId warp) {
  const Tensor& gv = nodes_[warp].val;
  require(gv.rank() == 1 && gv.size() >= 2, "grid_derivative: warp must be 1-d, T+1 nodes");
  const std::size_t T = gv.size() - 1;
  Tensor y = Tensor::zeros({T});
  for (std::size_t i = 0; i < T; ++i) y.v[i] = (gv.v[i + 1] - gv.v[i]) * T;
  const NodeId id = push(std::move(y));
  nodes_[id].back = [this, id, warp, T]() {
    const Tensor& g = nodes_[id].grad;
    Tensor& gw = grad_buf(warp);
    for (std::size_t i = 0; i < T; ++i) {
      gw.v[i + 1] += g.v[i] * T;
      gw.v[i] -= g.v[i] * T;
    }
  };
  return id;
}

void Tape::backward(NodeId loss) {
  if (nodes_[loss].val.size() != 1)
    throw NonScalarLoss("backward requires a scalar loss");
  for (Node& n : nodes_) n.grad = Tensor{};
  grad_buf(loss).v[0] = 1.0;
  for (NodeId id = loss; id >= 0; --id) {
    Node& n = nodes_[id];
    if (n.back && !n.grad.v.empty()) n.back();
  }
}

GradMap Tape::param_grads() {
  GradMap out;
  for (const auto& [name, id] : param_nodes_) out[name] = grad_buf(id);
  return out;
}

}  // namespace protshape::nn
