#include "hmoe/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "hmoe/errors.hpp"

namespace hmoe {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Tape& same_tape(Value a, Value b) {
  if (a.tape() != b.tape() || a.tape() == nullptr)
    throw ContractError("operands must live on the same tape");
  return *a.tape();
}

Tape& tape_of(Value a) {
  if (a.tape() == nullptr) throw ContractError("operand is not bound to a tape");
  return *a.tape();
}

void check_matrix(const Tensor& t, const char* what) {
  if (t.rank() != 2) throw DimensionError(std::string(what) + " must be rank 2");
}

}  // namespace

const Tensor& Value::tensor() const { return tape_->value_of(id_); }

double Value::scalar() const {
  const Tensor& t = tensor();
  if (t.size() != 1) throw ContractError("scalar() requires a single-element tensor");
  return t[0];
}

Value Tape::param(Tensor& t) {
  Node node;
  node.value = t;  // copy of current values; grads flow to the bound tensor
  node.needs = true;
  node.bound = &t;
  nodes_.push_back(std::move(node));
  const int id = static_cast<int>(nodes_.size()) - 1;
  leaves_.push_back(id);
  return Value(this, id);
}

Value Tape::constant(Tensor t) {
  Node node;
  node.value = std::move(t);
  node.needs = false;
  nodes_.push_back(std::move(node));
  return Value(this, static_cast<int>(nodes_.size()) - 1);
}

Value Tape::emit(Tensor value, bool needs, std::function<void(Tape&)> back) {
  Node node;
  node.value = std::move(value);
  node.needs = needs;
  if (needs) node.back = std::move(back);
  nodes_.push_back(std::move(node));
  return Value(this, static_cast<int>(nodes_.size()) - 1);
}

std::vector<double>& Tape::grad_of(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.grad.empty()) n.grad.assign(static_cast<size_t>(n.value.size()), 0.0);
  return n.grad;
}

void Tape::backward(Value root) {
  if (root.tape() != this) throw ContractError("backward root lives on a different tape");
  if (root.tensor().size() != 1) throw ContractError("backward root must be scalar");
  grad_of(root.id())[0] = 1.0;
  for (int i = root.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.needs && n.back && !n.grad.empty()) n.back(*this);
  }
  for (int id : leaves_) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.empty() || n.bound == nullptr) continue;
    std::vector<double>& g = n.bound->grad();
    for (size_t j = 0; j < g.size(); ++j) g[j] += n.grad[j];
  }
}

// ---- op helpers ------------------------------------------------------------

namespace {

// Accumulate src into the grad buffer of node `id` if it participates.
void acc_grad(Tape& t, int id, const std::vector<double>& src) {
  std::vector<double>& g = t.grad_of(id);
  for (size_t i = 0; i < g.size(); ++i) g[i] += src[i];
}

}  // namespace

Value matmul(Value av, Value bv) {
  Tape& t = same_tape(av, bv);
  const Tensor& a = av.tensor();
  const Tensor& b = bv.tensor();
  check_matrix(a, "matmul lhs");
  check_matrix(b, "matmul rhs");
  if (a.cols() != b.rows()) throw DimensionError("matmul inner extents do not match");
  const int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor c({m, n});
  gemm_nn_acc(a.data(), b.data(), c.data(), m, k, n);
  const bool needs = t.needs_grad(av.id()) || t.needs_grad(bv.id());
  const int ai = av.id(), bi = bv.id();
  return t.emit(std::move(c), needs, [ai, bi, m, k, n, out = t.num_nodes()](Tape& tp) {
    const std::vector<double>& g = tp.grad_of(out);
    if (tp.needs_grad(ai))
      gemm_nt_acc(g.data(), tp.value_of(bi).data(), tp.grad_of(ai).data(), m, n, k);
    if (tp.needs_grad(bi))
      gemm_tn_acc(tp.value_of(ai).data(), g.data(), tp.grad_of(bi).data(), k, m, n);
  });
}

namespace {

template <typename Fwd, typename Bwd>
Value binary_same_shape(Value av, Value bv, const char* name, Fwd fwd, Bwd bwd) {
  Tape& t = same_tape(av, bv);
  const Tensor& a = av.tensor();
  const Tensor& b = bv.tensor();
  if (!a.same_shape(b)) throw DimensionError(std::string(name) + " requires matching shapes");
  Tensor out(a.shape());
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = fwd(a[i], b[i]);
  const bool needs = t.needs_grad(av.id()) || t.needs_grad(bv.id());
  const int ai = av.id(), bi = bv.id();
  return t.emit(std::move(out), needs, [ai, bi, bwd, id = t.num_nodes()](Tape& tp) {
    const std::vector<double>& g = tp.grad_of(id);
    const Tensor& a = tp.value_of(ai);
    const Tensor& b = tp.value_of(bi);
    const bool na = tp.needs_grad(ai), nb = tp.needs_grad(bi);
    std::vector<double>* ga = na ? &tp.grad_of(ai) : nullptr;
    std::vector<double>* gb = nb ? &tp.grad_of(bi) : nullptr;
    for (size_t i = 0; i < g.size(); ++i) {
      double da = 0.0, db = 0.0;
      bwd(a[static_cast<std::int64_t>(i)], b[static_cast<std::int64_t>(i)], g[i], da, db);
      if (ga) (*ga)[i] += da;
      if (gb) (*gb)[i] += db;
    }
  });
}

template <typename Fwd, typename Bwd>
Value unary(Value av, Fwd fwd, Bwd bwd) {
  Tape& t = tape_of(av);
  const Tensor& a = av.tensor();
  Tensor out(a.shape());
  for (std::int64_t i = 0; i < a.size(); ++i) out[i] = fwd(a[i]);
  const bool needs = t.needs_grad(av.id());
  const int ai = av.id();
  return t.emit(std::move(out), needs, [ai, bwd, id = t.num_nodes()](Tape& tp) {
    if (!tp.needs_grad(ai)) return;
    const std::vector<double>& g = tp.grad_of(id);
    const Tensor& a = tp.value_of(ai);
    const Tensor& y = tp.value_of(id);
    std::vector<double>& ga = tp.grad_of(ai);
    for (size_t i = 0; i < g.size(); ++i)
      ga[i] += g[i] * bwd(a[static_cast<std::int64_t>(i)], y[static_cast<std::int64_t>(i)]);
  });
}

}  // namespace

Value add(Value a, Value b) {
  return binary_same_shape(a, b, "add", [](double x, double y) { return x + y; },
                           [](double, double, double g, double& da, double& db) {
                             da = g;
                             db = g;
                           });
}

Value sub(Value a, Value b) {
  return binary_same_shape(a, b, "sub", [](double x, double y) { return x - y; },
                           [](double, double, double g, double& da, double& db) {
                             da = g;
                             db = -g;
                           });
}

Value mul(Value a, Value b) {
  return binary_same_shape(a, b, "mul", [](double x, double y) { return x * y; },
                           [](double x, double y, double g, double& da, double& db) {
                             da = g * y;
                             db = g * x;
                           });
}

Value neg(Value a) {
  return unary(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Value exp(Value a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Value log(Value a) {
  const Tensor& t = a.tensor();
  for (std::int64_t i = 0; i < t.size(); ++i)
    if (!(t[i] > 0.0)) throw DomainError("log requires strictly positive inputs");
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Value square(Value a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Value relu(Value a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Value silu(Value a) {
  return unary(a, [](double x) { return x * sigmoid(x); },
               [](double x, double) {
                 const double s = sigmoid(x);
                 return s * (1.0 + x * (1.0 - s));
               });
}

Value scale(Value a, double c) {
  return unary(a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Value add_scalar(Value a, double c) {
  return unary(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Value grl(Value a, double lambda) {
  if (lambda < 0.0) throw ContractError("grl lambda must be non-negative");
  return unary(a, [](double x) { return x; }, [lambda](double, double) { return -lambda; });
}

Value add_bias(Value mv, Value bv) {
  Tape& t = same_tape(mv, bv);
  const Tensor& m = mv.tensor();
  const Tensor& b = bv.tensor();
  check_matrix(m, "add_bias input");
  if (b.rank() != 1 || b.dim(0) != m.cols())
    throw DimensionError("bias length must equal the matrix column count");
  const int rows = m.rows(), cols = m.cols();
  Tensor out({rows, cols});
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out.at(r, c) = m.at(r, c) + b[c];
  const bool needs = t.needs_grad(mv.id()) || t.needs_grad(bv.id());
  const int mi = mv.id(), bi = bv.id();
  return t.emit(std::move(out), needs, [mi, bi, rows, cols, id = t.num_nodes()](Tape& tp) {
    const std::vector<double>& g = tp.grad_of(id);
    if (tp.needs_grad(mi)) acc_grad(tp, mi, g);
    if (tp.needs_grad(bi)) {
      std::vector<double>& gb = tp.grad_of(bi);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) gb[static_cast<size_t>(c)] += g[static_cast<size_t>(r) * cols + c];
    }
  });
}

Value scale_rows(Value mv, Value colv) {
  Tape& t = same_tape(mv, colv);
  const Tensor& m = mv.tensor();
  const Tensor& col = colv.tensor();
  check_matrix(m, "scale_rows input");
  if (col.rank() != 1 || col.dim(0) != m.rows())
    throw DimensionError("row-scale vector length must equal the matrix row count");
  const int rows = m.rows(), cols = m.cols();
  Tensor out({rows, cols});
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out.at(r, c) = m.at(r, c) * col[r];
  const bool needs = t.needs_grad(mv.id()) || t.needs_grad(colv.id());
  const int mi = mv.id(), ci = colv.id();
  return t.emit(std::move(out), needs, [mi, ci, rows, cols, id = t.num_nodes()](Tape& tp) {
    const std::vector<double>& g = tp.grad_of(id);
    const Tensor& m = tp.value_of(mi);
    const Tensor& col = tp.value_of(ci);
    if (tp.needs_grad(mi)) {
      std::vector<double>& gm = tp.grad_of(mi);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
          gm[static_cast<size_t>(r) * cols + c] += g[static_cast<size_t>(r) * cols + c] * col[r];
    }
    if (tp.needs_grad(ci)) {
      std::vector<double>& gc = tp.grad_of(ci);
      for (int r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (int c = 0; c < cols; ++c) acc += g[static_cast<size_t>(r) * cols + c] * m.at(r, c);
        gc[static_cast<size_t>(r)] += acc;
      }
    }
  });
}

Value column(Value mv, int c) {
  Tape& t = tape_of(mv);
  const Tensor& m = mv.tensor();
  check_matrix(m, "column input");
  if (c < 0 || c >= m.cols()) throw DimensionError("column index out of range");
  const int rows = m.rows(), cols = m.cols();
  Tensor out({rows});
  for (int r = 0; r < rows; ++r) out[r] = m.at(r, c);
  const bool needs = t.needs_grad(mv.id());
  const int mi = mv.id();
  return t.emit(std::move(out), needs, [mi, c, rows, cols, id = t.num_nodes()](Tape& tp) {
    if (!tp.needs_grad(mi)) return;
    const std::vector<double>& g = tp.grad_of(id);
    std::vector<double>& gm = tp.grad_of(mi);
    for (int r = 0; r < rows; ++r) gm[static_cast<size_t>(r) * cols + c] += g[static_cast<size_t>(r)];
  });
}

Value softmax_rows(Value mv) {
  Tape& t = tape_of(mv);
  const Tensor& m = mv.tensor();
  check_matrix(m, "softmax input");
  const int rows = m.rows(), cols = m.cols();
  Tensor out({rows, cols});
  for (int r = 0; r < rows; ++r) {
    double mx = m.at(r, 0);
    for (int c = 1; c < cols; ++c) mx = std::max(mx, m.at(r, c));
    double sum = 0.0;
    for (int c = 0; c < cols; ++c) {
      const double e = std::exp(m.at(r, c) - mx);
      out.at(r, c) = e;
      sum += e;
    }
    for (int c = 0; c < cols; ++c) out.at(r, c) /= sum;
  }
  const bool needs = t.needs_grad(mv.id());
  const int mi = mv.id();
  return t.emit(std::move(out), needs, [mi, rows, cols, id = t.num_nodes()](Tape& tp) {
    if (!tp.needs_grad(mi)) return;
    const std::vector<double>& g = tp.grad_of(id);
    const Tensor& p = tp.value_of(id);
    std::vector<double>& gm = tp.grad_of(mi);
    for (int r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (int c = 0; c < cols; ++c) dot += g[static_cast<size_t>(r) * cols + c] * p.at(r, c);
      for (int c = 0; c < cols; ++c)
        gm[static_cast<size_t>(r) * cols + c] += p.at(r, c) * (g[static_cast<size_t>(r) * cols + c] - dot);
    }
  });
}

Value sum_all(Value av) {
  Tape& t = tape_of(av);
  const Tensor& a = av.tensor();
  double s = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) s += a[i];
  const bool needs = t.needs_grad(av.id());
  const int ai = av.id();
  return t.emit(Tensor::scalar(s), needs, [ai, id = t.num_nodes()](Tape& tp) {
    if (!tp.needs_grad(ai)) return;
    const double g = tp.grad_of(id)[0];
    std::vector<double>& ga = tp.grad_of(ai);
    for (double& x : ga) x += g;
  });
}

Value mean_all(Value av) {
  Tape& t = tape_of(av);
  const Tensor& a = av.tensor();
  const double n = static_cast<double>(a.size());
  double s = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) s += a[i];
  const bool needs = t.needs_grad(av.id());
  const int ai = av.id();
  return t.emit(Tensor::scalar(s / n), needs, [ai, n, id = t.num_nodes()](Tape& tp) {
    if (!tp.needs_grad(ai)) return;
    const double g = tp.grad_of(id)[0] / n;
    std::vector<double>& ga = tp.grad_of(ai);
    for (double& x : ga) x += g;
  });
}

Value sum_axis(Value mv, int axis) {
  Tape& t = tape_of(mv);
  const Tensor& m = mv.tensor();
  check_matrix(m, "sum_axis input");
  if (axis != 0 && axis != 1) throw DimensionError("sum_axis axis must be 0 or 1");
  const int rows = m.rows(), cols = m.cols();
  Tensor out({axis == 0 ? cols : rows});
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out[axis == 0 ? c : r] += m.at(r, c);
  const bool needs = t.needs_grad(mv.id());
  const int mi = mv.id();
  return t.emit(std::move(out), needs, [mi, axis, rows, cols, id = t.num_nodes()](Tape& tp) {
    if (!tp.needs_grad(mi)) return;
    const std::vector<double>& g = tp.grad_of(id);
    std::vector<double>& gm = tp.grad_of(mi);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        gm[static_cast<size_t>(r) * cols + c] += g[static_cast<size_t>(axis == 0 ? c : r)];
  });
}

Value sqdist_rows(Value vv, Value ev) {
  Tape& t = same_tape(vv, ev);
  const Tensor& v = vv.tensor();
  const Tensor& e = ev.tensor();
  check_matrix(v, "sqdist lhs");
  check_matrix(e, "sqdist rhs");
  if (v.cols() != e.cols()) throw DimensionError("sqdist operands must share the feature dimension");
  const int b = v.rows(), k = e.rows(), d = v.cols();
  Tensor out({b, k});
  for (int i = 0; i < b; ++i)
    for (int j = 0; j < k; ++j) {
      double acc = 0.0;
      for (int f = 0; f < d; ++f) {
        const double diff = v.at(i, f) - e.at(j, f);
        acc += diff * diff;
      }
      out.at(i, j) = acc;
    }
  const bool needs = t.needs_grad(vv.id()) || t.needs_grad(ev.id());
  const int vi = vv.id(), ei = ev.id();
  return t.emit(std::move(out), needs, [vi, ei, b, k, d, id = t.num_nodes()](Tape& tp) {
    const std::vector<double>& g = tp.grad_of(id);
    const Tensor& v = tp.value_of(vi);
    const Tensor& e = tp.value_of(ei);
    const bool nv = tp.needs_grad(vi), ne = tp.needs_grad(ei);
    std::vector<double>* gv = nv ? &tp.grad_of(vi) : nullptr;
    std::vector<double>* ge = ne ? &tp.grad_of(ei) : nullptr;
    for (int i = 0; i < b; ++i)
      for (int j = 0; j < k; ++j) {
        const double gij = g[static_cast<size_t>(i) * k + j];
        if (gij == 0.0) continue;
        for (int f = 0; f < d; ++f) {
          const double diff = 2.0 * (v.at(i, f) - e.at(j, f)) * gij;
          if (gv) (*gv)[static_cast<size_t>(i) * d + f] += diff;
          if (ge) (*ge)[static_cast<size_t>(j) * d + f] -= diff;
        }
      }
  });
}

Value slice_row(Value mv, int row, int offset, std::vector<int> out_shape) {
  Tape& t = tape_of(mv);
  const Tensor& m = mv.tensor();
  check_matrix(m, "slice_row input");
  if (row < 0 || row >= m.rows()) throw DimensionError("slice_row row out of range");
  std::int64_t count = 1;
  for (int e : out_shape) count *= e;
  if (offset < 0 || offset + count > m.cols())
    throw DimensionError("slice_row segment exceeds the source row");
  const int cols = m.cols();
  Tensor out(out_shape);
  const double* src = m.data() + static_cast<size_t>(row) * cols + offset;
  std::copy(src, src + count, out.data());
  const bool needs = t.needs_grad(mv.id());
  const int mi = mv.id();
  return t.emit(std::move(out), needs, [mi, row, offset, cols, count, id = t.num_nodes()](Tape& tp) {
    if (!tp.needs_grad(mi)) return;
    const std::vector<double>& g = tp.grad_of(id);
    std::vector<double>& gm = tp.grad_of(mi);
    double* dst = gm.data() + static_cast<size_t>(row) * cols + offset;
    for (std::int64_t i = 0; i < count; ++i) dst[i] += g[static_cast<size_t>(i)];
  });
}

Value per_example_affine(Value zv, Value thetav, int offset, int in, int out) {
  Tape& t = same_tape(zv, thetav);
  const Tensor& z = zv.tensor();
  const Tensor& theta = thetav.tensor();
  check_matrix(z, "per_example_affine input");
  check_matrix(theta, "per_example_affine weights");
  if (z.rows() != theta.rows())
    throw DimensionError("per_example_affine batch sizes do not match");
  if (z.cols() != in) throw DimensionError("per_example_affine input width mismatch");
  if (offset < 0 || offset + in * out + out > theta.cols())
    throw DimensionError("per_example_affine segment exceeds the weight row");
  const int batch = z.rows(), p = theta.cols();
  // Accumulation order matches matmul followed by add_bias, so a
  // per-example application with the same parameter row is bit-identical
  // to the shared-weight path.
  Tensor result({batch, out});
  for (int bi = 0; bi < batch; ++bi) {
    const double* w = theta.data() + static_cast<size_t>(bi) * p + offset;
    const double* bias = w + static_cast<size_t>(in) * out;
    for (int f = 0; f < in; ++f) {
      const double zf = z.at(bi, f);
      const double* wf = w + static_cast<size_t>(f) * out;
      for (int o = 0; o < out; ++o) result.at(bi, o) += zf * wf[o];
    }
    for (int o = 0; o < out; ++o) result.at(bi, o) += bias[o];
  }
  const bool needs = t.needs_grad(zv.id()) || t.needs_grad(thetav.id());
  const int zi = zv.id(), ti = thetav.id();
  return t.emit(std::move(result), needs,
                [zi, ti, offset, in, out, batch, p, id = t.num_nodes()](Tape& tp) {
    const std::vector<double>& g = tp.grad_of(id);
    const Tensor& z = tp.value_of(zi);
    const Tensor& theta = tp.value_of(ti);
    const bool nz = tp.needs_grad(zi), nt = tp.needs_grad(ti);
    std::vector<double>* gz = nz ? &tp.grad_of(zi) : nullptr;
    std::vector<double>* gt = nt ? &tp.grad_of(ti) : nullptr;
    for (int bi = 0; bi < batch; ++bi) {
      const double* gb = g.data() + static_cast<size_t>(bi) * out;
      const double* w = theta.data() + static_cast<size_t>(bi) * p + offset;
      if (gz) {
        double* gzb = gz->data() + static_cast<size_t>(bi) * in;
        for (int f = 0; f < in; ++f) {
          const double* wf = w + static_cast<size_t>(f) * out;
          double acc = 0.0;
          for (int o = 0; o < out; ++o) acc += gb[o] * wf[o];
          gzb[f] += acc;
        }
      }
      if (gt) {
        double* gw = gt->data() + static_cast<size_t>(bi) * p + offset;
        for (int f = 0; f < in; ++f) {
          const double zf = z.at(bi, f);
          double* gwf = gw + static_cast<size_t>(f) * out;
          for (int o = 0; o < out; ++o) gwf[o] += zf * gb[o];
        }
        double* gbias = gw + static_cast<size_t>(in) * out;
        for (int o = 0; o < out; ++o) gbias[o] += gb[o];
      }
    }
  });
}

namespace {

// Row-stable softmax probabilities and log-sum-exp used by the fused
// cross-entropy ops.
void row_softmax_lse(const Tensor& x, Tensor& probs, std::vector<double>& lse) {
  const int rows = x.rows(), cols = x.cols();
  for (int r = 0; r < rows; ++r) {
    double mx = x.at(r, 0);
    for (int c = 1; c < cols; ++c) mx = std::max(mx, x.at(r, c));
    double sum = 0.0;
    for (int c = 0; c < cols; ++c) {
      const double e = std::exp(x.at(r, c) - mx);
      probs.at(r, c) = e;
      sum += e;
    }
    for (int c = 0; c < cols; ++c) probs.at(r, c) /= sum;
    lse[static_cast<size_t>(r)] = mx + std::log(sum);
  }
}

}  // namespace

Value cross_entropy_logits(Value lv, const std::vector<int>& targets) {
  Tape& t = tape_of(lv);
  const Tensor& x = lv.tensor();
  check_matrix(x, "cross_entropy logits");
  const int rows = x.rows(), cols = x.cols();
  if (static_cast<int>(targets.size()) != rows)
    throw DimensionError("cross_entropy target count must equal the batch size");
  for (int y : targets)
    if (y < 0 || y >= cols) throw DataError("cross_entropy class index out of range");
  Tensor probs({rows, cols});
  std::vector<double> lse(static_cast<size_t>(rows));
  row_softmax_lse(x, probs, lse);
  double loss = 0.0;
  for (int r = 0; r < rows; ++r) loss += lse[static_cast<size_t>(r)] - x.at(r, targets[static_cast<size_t>(r)]);
  loss /= rows;
  const bool needs = t.needs_grad(lv.id());
  const int li = lv.id();
  return t.emit(Tensor::scalar(loss), needs,
                [li, targets, probs = std::move(probs), rows, cols, id = t.num_nodes()](Tape& tp) {
    if (!tp.needs_grad(li)) return;
    const double g = tp.grad_of(id)[0] / rows;
    std::vector<double>& gl = tp.grad_of(li);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const double ind = c == targets[static_cast<size_t>(r)] ? 1.0 : 0.0;
        gl[static_cast<size_t>(r) * cols + c] += g * (probs.at(r, c) - ind);
      }
  });
}

Value cross_entropy_logits(Value lv, const Tensor& soft_targets) {
  Tape& t = tape_of(lv);
  const Tensor& x = lv.tensor();
  check_matrix(x, "cross_entropy logits");
  if (!x.same_shape(soft_targets))
    throw DimensionError("cross_entropy soft targets must match the logit shape");
  const int rows = x.rows(), cols = x.cols();
  Tensor probs({rows, cols});
  std::vector<double> lse(static_cast<size_t>(rows));
  row_softmax_lse(x, probs, lse);
  double loss = 0.0;
  for (int r = 0; r < rows; ++r) {
    double dot = 0.0;
    for (int c = 0; c < cols; ++c) dot += soft_targets.at(r, c) * x.at(r, c);
    loss += lse[static_cast<size_t>(r)] - dot;
  }
  loss /= rows;
  const bool needs = t.needs_grad(lv.id());
  const int li = lv.id();
  return t.emit(Tensor::scalar(loss), needs,
                [li, soft_targets, probs = std::move(probs), rows, cols, id = t.num_nodes()](Tape& tp) {
    if (!tp.needs_grad(li)) return;
    const double g = tp.grad_of(id)[0] / rows;
    std::vector<double>& gl = tp.grad_of(li);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        gl[static_cast<size_t>(r) * cols + c] += g * (probs.at(r, c) - soft_targets.at(r, c));
  });
}

Value nll_rows(Value pv, const std::vector<int>& targets, double floor) {
  Tape& t = tape_of(pv);
  const Tensor& p = pv.tensor();
  check_matrix(p, "nll probabilities");
  const int rows = p.rows(), cols = p.cols();
  if (static_cast<int>(targets.size()) != rows)
    throw DimensionError("nll target count must equal the batch size");
  for (int y : targets)
    if (y < 0 || y >= cols) throw DataError("nll class index out of range");
  double loss = 0.0;
  for (int r = 0; r < rows; ++r)
    loss -= std::log(std::max(p.at(r, targets[static_cast<size_t>(r)]), floor));
  loss /= rows;
  const bool needs = t.needs_grad(pv.id());
  const int pi = pv.id();
  return t.emit(Tensor::scalar(loss), needs,
                [pi, targets, floor, rows, cols, id = t.num_nodes()](Tape& tp) {
    if (!tp.needs_grad(pi)) return;
    const double g = tp.grad_of(id)[0] / rows;
    const Tensor& p = tp.value_of(pi);
    std::vector<double>& gp = tp.grad_of(pi);
    for (int r = 0; r < rows; ++r) {
      const int y = targets[static_cast<size_t>(r)];
      const double pv_ = p.at(r, y);
      if (pv_ >= floor) gp[static_cast<size_t>(r) * cols + y] -= g / pv_;
      // Below the floor the clamped forward is constant in p.
    }
  });
}

Value mean_row_entropy(Value pv, double floor) {
  Tape& t = tape_of(pv);
  const Tensor& p = pv.tensor();
  check_matrix(p, "entropy probabilities");
  const int rows = p.rows(), cols = p.cols();
  double loss = 0.0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) loss -= p.at(r, c) * std::log(std::max(p.at(r, c), floor));
  loss /= rows;
  const bool needs = t.needs_grad(pv.id());
  const int pi = pv.id();
  return t.emit(Tensor::scalar(loss), needs, [pi, floor, rows, cols, id = t.num_nodes()](Tape& tp) {
    if (!tp.needs_grad(pi)) return;
    const double g = tp.grad_of(id)[0] / rows;
    const Tensor& p = tp.value_of(pi);
    std::vector<double>& gp = tp.grad_of(pi);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const double x = p.at(r, c);
        const double d = x >= floor ? -(std::log(x) + 1.0) : -std::log(floor);
        gp[static_cast<size_t>(r) * cols + c] += g * d;
      }
  });
}

Value kl_balance_uniform(Value pv, double floor) {
  Tape& t = tape_of(pv);
  const Tensor& p = pv.tensor();
  check_matrix(p, "kl probabilities");
  const int rows = p.rows(), cols = p.cols();
  std::vector<double> imp(static_cast<size_t>(cols), 0.0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) imp[static_cast<size_t>(c)] += p.at(r, c);
  double total = 0.0;
  for (double x : imp) total += x;
  std::vector<double> share(static_cast<size_t>(cols));
  for (int c = 0; c < cols; ++c) share[static_cast<size_t>(c)] = imp[static_cast<size_t>(c)] / total;
  double loss = 0.0;
  for (int c = 0; c < cols; ++c) {
    const double s = share[static_cast<size_t>(c)];
    loss += s * std::log(static_cast<double>(cols) * std::max(s, floor));
  }
  const bool needs = t.needs_grad(pv.id());
  const int pi = pv.id();
  return t.emit(Tensor::scalar(loss), needs,
                [pi, floor, rows, cols, total, share = std::move(share), id = t.num_nodes()](Tape& tp) {
    if (!tp.needs_grad(pi)) return;
    const double g = tp.grad_of(id)[0];
    // dL/dshare_c, then through the normalization share = I / total.
    std::vector<double> dshare(static_cast<size_t>(cols));
    double weighted = 0.0;
    for (int c = 0; c < cols; ++c) {
      const double s = share[static_cast<size_t>(c)];
      dshare[static_cast<size_t>(c)] =
          std::log(static_cast<double>(cols) * std::max(s, floor)) + (s >= floor ? 1.0 : 0.0);
      weighted += s * dshare[static_cast<size_t>(c)];
    }
    std::vector<double>& gp = tp.grad_of(pi);
    for (int c = 0; c < cols; ++c) {
      const double dI = (dshare[static_cast<size_t>(c)] - weighted) / total;
      for (int r = 0; r < rows; ++r) gp[static_cast<size_t>(r) * cols + c] += g * dI;
    }
  });
}

Value mse(Value pv, const Tensor& target) {
  Tape& t = tape_of(pv);
  const Tensor& p = pv.tensor();
  if (!p.same_shape(target)) throw DimensionError("mse shapes do not match");
  const double n = static_cast<double>(p.size());
  double loss = 0.0;
  for (std::int64_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - target[i];
    loss += d * d;
  }
  loss /= n;
  const bool needs = t.needs_grad(pv.id());
  const int pi = pv.id();
  return t.emit(Tensor::scalar(loss), needs, [pi, target, n, id = t.num_nodes()](Tape& tp) {
    if (!tp.needs_grad(pi)) return;
    const double g = tp.grad_of(id)[0];
    const Tensor& p = tp.value_of(pi);
    std::vector<double>& gp = tp.grad_of(pi);
    for (size_t i = 0; i < gp.size(); ++i)
      gp[i] += g * 2.0 * (p[static_cast<std::int64_t>(i)] - target[static_cast<std::int64_t>(i)]) / n;
  });
}

}  // namespace hmoe
