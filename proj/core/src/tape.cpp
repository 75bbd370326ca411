#include "dvip/tape.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "dvip/errors.hpp"
#include "dvip/mathutil.hpp"

namespace dvip::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

// Per-target-axis strides of `src` aligned to `dst` from the trailing side;
// stride 0 where src is missing the axis or has size 1 there.
std::vector<std::size_t> aligned_strides(const Shape& src, const Shape& dst) {
  if (src.size() > dst.size())
    throw ContractViolation("broadcast: source rank " + shape_str(src) +
                            " exceeds target " + shape_str(dst));
  std::vector<std::size_t> sstr(src.size());
  std::size_t acc = 1;
  for (int i = static_cast<int>(src.size()) - 1; i >= 0; --i) {
    sstr[static_cast<std::size_t>(i)] = acc;
    acc *= src[static_cast<std::size_t>(i)];
  }
  const std::size_t off = dst.size() - src.size();
  std::vector<std::size_t> out(dst.size(), 0);
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (i < off) continue;
    std::size_t j = i - off;
    if (src[j] == dst[i])
      out[i] = (src[j] == 1) ? 0 : sstr[j];
    else if (src[j] == 1)
      out[i] = 0;
    else
      throw ContractViolation("broadcast: " + shape_str(src) + " incompatible with " +
                              shape_str(dst));
  }
  return out;
}

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    std::size_t da = (i < r - a.size()) ? 1 : a[i - (r - a.size())];
    std::size_t db = (i < r - b.size()) ? 1 : b[i - (r - b.size())];
    if (da == db || da == 1 || db == 1) {
      out[i] = std::max(da, db);
    } else {
      throw ContractViolation("elementwise op: shapes " + shape_str(a) + " and " +
                              shape_str(b) + " do not broadcast");
    }
  }
  return out;
}

Tensor broadcast_into(const Tensor& src, const Shape& dst) {
  if (src.shape() == dst) return src;
  auto str = aligned_strides(src.shape(), dst);
  Tensor out(dst);
  std::vector<std::size_t> idx(dst.size(), 0);
  std::size_t soff = 0;
  const std::size_t n = out.numel();
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = src[soff];
    for (int ax = static_cast<int>(dst.size()) - 1; ax >= 0; --ax) {
      auto a = static_cast<std::size_t>(ax);
      ++idx[a];
      soff += str[a];
      if (idx[a] < dst[a]) break;
      soff -= str[a] * dst[a];
      idx[a] = 0;
    }
  }
  return out;
}

// Sums `src` back down to `target` (the reverse of broadcasting target up to
// src's shape). Accumulation order is a row-major walk of src, so each
// target entry's sum is independent of unrelated entries.
Tensor reduce_to(const Tensor& src, const Shape& target) {
  if (src.shape() == target) return src;
  auto str = aligned_strides(target, src.shape());
  Tensor out(target);
  std::vector<std::size_t> idx(src.rank(), 0);
  std::size_t toff = 0;
  const std::size_t n = src.numel();
  for (std::size_t k = 0; k < n; ++k) {
    out[toff] += src[k];
    for (int ax = static_cast<int>(src.rank()) - 1; ax >= 0; --ax) {
      auto a = static_cast<std::size_t>(ax);
      ++idx[a];
      toff += str[a];
      if (idx[a] < src.shape()[a]) break;
      toff -= str[a] * src.shape()[a];
      idx[a] = 0;
    }
  }
  return out;
}

template <class F>
Tensor ew_binary(const Tensor& a, const Tensor& b, F f) {
  if (a.same_shape(b)) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = f(a[i], b[i]);
    return out;
  }
  Shape os = broadcast_shapes(a.shape(), b.shape());
  Tensor ab = broadcast_into(a, os), bb = broadcast_into(b, os);
  Tensor out(os);
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = f(ab[i], bb[i]);
  return out;
}

template <class F>
Tensor ew_unary(const Tensor& a, F f) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = f(a[i]);
  return out;
}

void axis_extents(const Shape& s, int axis, std::size_t& outer, std::size_t& n,
                  std::size_t& inner) {
  outer = 1;
  inner = 1;
  auto ax = static_cast<std::size_t>(axis);
  for (std::size_t i = 0; i < ax; ++i) outer *= s[i];
  n = s[ax];
  for (std::size_t i = ax + 1; i < s.size(); ++i) inner *= s[i];
}

Shape drop_axis(const Shape& s, int axis) {
  Shape out;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != static_cast<std::size_t>(axis)) out.push_back(s[i]);
  return out;
}

Tensor reduce_axis(const Tensor& x, int axis, bool mean) {
  std::size_t outer, n, inner;
  axis_extents(x.shape(), axis, outer, n, inner);
  Tensor out(drop_axis(x.shape(), axis));
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t a = 0; a < n; ++a) {
      const double* src = x.data() + (o * n + a) * inner;
      double* dst = out.data() + o * inner;
      for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  if (mean)
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] /= static_cast<double>(n);
  return out;
}

Tensor expand_axis(const Tensor& g, const Shape& full, int axis, double scal) {
  std::size_t outer, n, inner;
  axis_extents(full, axis, outer, n, inner);
  Tensor out(full);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t a = 0; a < n; ++a) {
      const double* src = g.data() + o * inner;
      double* dst = out.data() + (o * n + a) * inner;
      for (std::size_t i = 0; i < inner; ++i) dst[i] = src[i] * scal;
    }
  return out;
}

Tensor matmul_k(const Tensor& a, const Tensor& b) {
  auto m = static_cast<Eigen::Index>(a.dim(0));
  auto k = static_cast<Eigen::Index>(a.dim(1));
  auto n = static_cast<Eigen::Index>(b.dim(1));
  Tensor out({a.dim(0), b.dim(1)});
  ConstMap A(a.data(), m, k), B(b.data(), k, n);
  MutMap C(out.data(), m, n);
  C.noalias() = A * B;
  return out;
}

Tensor transpose_k(const Tensor& x) {
  Tensor out({x.dim(1), x.dim(0)});
  for (std::size_t i = 0; i < x.dim(0); ++i)
    for (std::size_t j = 0; j < x.dim(1); ++j) out.at(j, i) = x.at(i, j);
  return out;
}

Tensor tril_k(const Tensor& x, bool include_diag) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.dim(0); ++i)
    for (std::size_t j = 0; j < x.dim(1); ++j)
      out.at(i, j) = (j + (include_diag ? 0 : 1) <= i) ? x.at(i, j) : 0.0;
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractViolation(msg);
}

}  // namespace

void Tape::check_var(Var v) const {
  if (v.tape != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
    throw ContractViolation("var does not belong to this tape");
}

Var Tape::leaf(Tensor v) {
  Node n;
  n.kind = OpKind::kLeaf;
  n.value = std::move(v);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1, this};
}

Var Tape::constant(Tensor v) {
  Node n;
  n.kind = OpKind::kConstant;
  n.value = std::move(v);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1, this};
}

const Tensor& Tape::value(Var v) const {
  check_var(v);
  return nodes_[static_cast<std::size_t>(v.id)].value;
}

const Tensor& Tape::adjoint(Var v) const {
  check_var(v);
  return nodes_[static_cast<std::size_t>(v.id)].adjoint;
}

void Tape::set_leaf(Var v, Tensor t) {
  check_var(v);
  Node& n = nodes_[static_cast<std::size_t>(v.id)];
  require(n.kind == OpKind::kLeaf || n.kind == OpKind::kConstant,
          "set_leaf: node is not a leaf or constant");
  require(t.shape() == n.value.shape(), "set_leaf: shape change not allowed");
  n.value = std::move(t);
}

Tensor Tape::compute(const Node& n) const {
  auto p = [&](std::size_t i) -> const Tensor& {
    return nodes_[static_cast<std::size_t>(n.parents[i])].value;
  };
  switch (n.kind) {
    case OpKind::kAdd:
      return ew_binary(p(0), p(1), [](double x, double y) { return x + y; });
    case OpKind::kSub:
      return ew_binary(p(0), p(1), [](double x, double y) { return x - y; });
    case OpKind::kMul:
      return ew_binary(p(0), p(1), [](double x, double y) { return x * y; });
    case OpKind::kDiv:
      return ew_binary(p(0), p(1), [](double x, double y) { return x / y; });
    case OpKind::kMatMul:
      return matmul_k(p(0), p(1));
    case OpKind::kTranspose:
      return transpose_k(p(0));
    case OpKind::kBroadcast:
      return broadcast_into(p(0), n.shape_attr);
    case OpKind::kSumAll: {
      double s = 0.0;
      for (std::size_t i = 0; i < p(0).numel(); ++i) s += p(0)[i];
      return Tensor::scalar(s);
    }
    case OpKind::kMeanAll: {
      double s = 0.0;
      for (std::size_t i = 0; i < p(0).numel(); ++i) s += p(0)[i];
      return Tensor::scalar(s / static_cast<double>(p(0).numel()));
    }
    case OpKind::kSumAxis:
      return reduce_axis(p(0), n.iattr, false);
    case OpKind::kMeanAxis:
      return reduce_axis(p(0), n.iattr, true);
    case OpKind::kTanh:
      return ew_unary(p(0), [](double x) { return std::tanh(x); });
    case OpKind::kCos:
      return ew_unary(p(0), [](double x) { return std::cos(x); });
    case OpKind::kExp:
      return ew_unary(p(0), [](double x) { return std::exp(x); });
    case OpKind::kLog:
      return ew_unary(p(0), [](double x) { return std::log(x); });
    case OpKind::kSquare:
      return ew_unary(p(0), [](double x) { return x * x; });
    case OpKind::kSqrt:
      return ew_unary(p(0), [](double x) { return std::sqrt(x); });
    case OpKind::kNeg:
      return ew_unary(p(0), [](double x) { return -x; });
    case OpKind::kScale: {
      double c = n.scalar;
      return ew_unary(p(0), [c](double x) { return c * x; });
    }
    case OpKind::kSoftplus:
      return ew_unary(p(0), [](double x) {
        return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
      });
    case OpKind::kTrilMask:
      return tril_k(p(0), n.iattr != 0);
    case OpKind::kLogNormCdf:
      return ew_unary(p(0), [](double x) { return dvip::log_norm_cdf(x); });
    case OpKind::kReshape: {
      Tensor out = p(0);
      return Tensor(n.shape_attr, std::move(out.vals()));
    }
    case OpKind::kConcatCols: {
      std::size_t rows = p(0).dim(0), cols = 0;
      for (std::size_t i = 0; i < n.parents.size(); ++i) cols += p(i).dim(1);
      Tensor out({rows, cols});
      std::size_t at = 0;
      for (std::size_t i = 0; i < n.parents.size(); ++i) {
        const Tensor& src = p(i);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < src.dim(1); ++c)
            out.at(r, at + c) = src.at(r, c);
        at += src.dim(1);
      }
      return out;
    }
    case OpKind::kCol: {
      auto j = static_cast<std::size_t>(n.iattr);
      Tensor out({p(0).dim(0), 1});
      for (std::size_t r = 0; r < p(0).dim(0); ++r) out[r] = p(0).at(r, j);
      return out;
    }
    case OpKind::kLeaf:
    case OpKind::kConstant:
      return n.value;
  }
  throw ContractViolation("unknown op kind " +
                          std::to_string(static_cast<int>(n.kind)));
}

Var Tape::record(OpKind kind, const std::vector<Var>& parents, double scalar,
                 int iattr, Shape shape_attr) {
  Node n;
  n.kind = kind;
  n.scalar = scalar;
  n.iattr = iattr;
  n.shape_attr = std::move(shape_attr);
  for (Var v : parents) {
    check_var(v);
    n.parents.push_back(v.id);
  }
  // Arity and shape preconditions, then the forward kernel.
  switch (kind) {
    case OpKind::kLeaf:
    case OpKind::kConstant:
      throw ContractViolation("record: use leaf()/constant() for inputs");
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kMul:
    case OpKind::kDiv:
    case OpKind::kMatMul:
      require(n.parents.size() == 2, "binary op needs two parents");
      break;
    case OpKind::kConcatCols:
      require(!n.parents.empty(), "concat_cols needs at least one parent");
      break;
    default:
      require(n.parents.size() == 1, "unary op needs one parent");
      break;
  }
  auto pv = [&](std::size_t i) -> const Tensor& {
    return nodes_[static_cast<std::size_t>(n.parents[i])].value;
  };
  switch (kind) {
    case OpKind::kMatMul:
      require(pv(0).rank() == 2 && pv(1).rank() == 2,
              "matmul: operands must be rank 2");
      require(pv(0).dim(1) == pv(1).dim(0),
              "matmul: inner dims " + shape_str(pv(0).shape()) + " x " +
                  shape_str(pv(1).shape()));
      break;
    case OpKind::kTranspose:
    case OpKind::kTrilMask:
      require(pv(0).rank() == 2, "op needs a rank-2 operand");
      break;
    case OpKind::kSumAxis:
    case OpKind::kMeanAxis:
      require(iattr >= 0 && static_cast<std::size_t>(iattr) < pv(0).rank(),
              "reduction axis " + std::to_string(iattr) + " out of range for " +
                  shape_str(pv(0).shape()));
      break;
    case OpKind::kReshape:
      require(shape_numel(n.shape_attr) == pv(0).numel(),
              "reshape: element count mismatch " + shape_str(pv(0).shape()) +
                  " -> " + shape_str(n.shape_attr));
      break;
    case OpKind::kCol:
      require(pv(0).rank() == 2 && iattr >= 0 &&
                  static_cast<std::size_t>(iattr) < pv(0).dim(1),
              "col: index out of range");
      break;
    case OpKind::kConcatCols:
      for (std::size_t i = 0; i < n.parents.size(); ++i)
        require(pv(i).rank() == 2 && pv(i).dim(0) == pv(0).dim(0),
                "concat_cols: operands must be rank 2 with equal row counts");
      break;
    default:
      break;
  }
  n.value = compute(n);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1, this};
}

void Tape::replay() {
  for (Node& n : nodes_)
    if (n.kind != OpKind::kLeaf && n.kind != OpKind::kConstant) n.value = compute(n);
}

void Tape::backward(Var seed) {
  check_var(seed);
  Node& sn = nodes_[static_cast<std::size_t>(seed.id)];
  require(sn.value.numel() == 1, "backward: seed must be scalar, got shape " +
                                     shape_str(sn.value.shape()));
  for (Node& n : nodes_) n.adjoint = Tensor::zeros(n.value.shape());
  std::vector<char> touched(nodes_.size(), 0);
  sn.adjoint[0] = 1.0;
  touched[static_cast<std::size_t>(seed.id)] = 1;

  auto acc = [&](int pid, const Tensor& contrib) {
    Node& pn = nodes_[static_cast<std::size_t>(pid)];
    for (std::size_t i = 0; i < contrib.numel(); ++i) pn.adjoint[i] += contrib[i];
    touched[static_cast<std::size_t>(pid)] = 1;
  };

  for (int id = seed.id; id >= 0; --id) {
    if (!touched[static_cast<std::size_t>(id)]) continue;
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    const Tensor& g = n.adjoint;
    auto pv = [&](std::size_t i) -> const Tensor& {
      return nodes_[static_cast<std::size_t>(n.parents[i])].value;
    };
    switch (n.kind) {
      case OpKind::kLeaf:
      case OpKind::kConstant:
        break;
      case OpKind::kAdd:
        acc(n.parents[0], reduce_to(g, pv(0).shape()));
        acc(n.parents[1], reduce_to(g, pv(1).shape()));
        break;
      case OpKind::kSub: {
        acc(n.parents[0], reduce_to(g, pv(0).shape()));
        acc(n.parents[1],
            reduce_to(ew_unary(g, [](double x) { return -x; }), pv(1).shape()));
        break;
      }
      case OpKind::kMul: {
        Tensor bb = broadcast_into(pv(1), n.value.shape());
        Tensor aa = broadcast_into(pv(0), n.value.shape());
        acc(n.parents[0],
            reduce_to(ew_binary(g, bb, [](double x, double y) { return x * y; }),
                      pv(0).shape()));
        acc(n.parents[1],
            reduce_to(ew_binary(g, aa, [](double x, double y) { return x * y; }),
                      pv(1).shape()));
        break;
      }
      case OpKind::kDiv: {
        Tensor aa = broadcast_into(pv(0), n.value.shape());
        Tensor bb = broadcast_into(pv(1), n.value.shape());
        acc(n.parents[0],
            reduce_to(ew_binary(g, bb, [](double x, double y) { return x / y; }),
                      pv(0).shape()));
        Tensor db(n.value.shape());
        for (std::size_t i = 0; i < db.numel(); ++i)
          db[i] = -g[i] * aa[i] / (bb[i] * bb[i]);
        acc(n.parents[1], reduce_to(db, pv(1).shape()));
        break;
      }
      case OpKind::kMatMul: {
        acc(n.parents[0], matmul_k(g, transpose_k(pv(1))));
        acc(n.parents[1], matmul_k(transpose_k(pv(0)), g));
        break;
      }
      case OpKind::kTranspose:
        acc(n.parents[0], transpose_k(g));
        break;
      case OpKind::kBroadcast:
        acc(n.parents[0], reduce_to(g, pv(0).shape()));
        break;
      case OpKind::kSumAll:
        acc(n.parents[0], Tensor::full(pv(0).shape(), g[0]));
        break;
      case OpKind::kMeanAll:
        acc(n.parents[0],
            Tensor::full(pv(0).shape(), g[0] / static_cast<double>(pv(0).numel())));
        break;
      case OpKind::kSumAxis:
        acc(n.parents[0], expand_axis(g, pv(0).shape(), n.iattr, 1.0));
        break;
      case OpKind::kMeanAxis: {
        double inv = 1.0 / static_cast<double>(pv(0).shape()[static_cast<std::size_t>(n.iattr)]);
        acc(n.parents[0], expand_axis(g, pv(0).shape(), n.iattr, inv));
        break;
      }
      case OpKind::kTanh: {
        Tensor d(n.value.shape());
        for (std::size_t i = 0; i < d.numel(); ++i)
          d[i] = g[i] * (1.0 - n.value[i] * n.value[i]);
        acc(n.parents[0], d);
        break;
      }
      case OpKind::kCos: {
        Tensor d(n.value.shape());
        for (std::size_t i = 0; i < d.numel(); ++i)
          d[i] = -g[i] * std::sin(pv(0)[i]);
        acc(n.parents[0], d);
        break;
      }
      case OpKind::kExp: {
        Tensor d(n.value.shape());
        for (std::size_t i = 0; i < d.numel(); ++i) d[i] = g[i] * n.value[i];
        acc(n.parents[0], d);
        break;
      }
      case OpKind::kLog: {
        Tensor d(n.value.shape());
        for (std::size_t i = 0; i < d.numel(); ++i) d[i] = g[i] / pv(0)[i];
        acc(n.parents[0], d);
        break;
      }
      case OpKind::kSquare: {
        Tensor d(n.value.shape());
        for (std::size_t i = 0; i < d.numel(); ++i) d[i] = g[i] * 2.0 * pv(0)[i];
        acc(n.parents[0], d);
        break;
      }
      case OpKind::kSqrt: {
        Tensor d(n.value.shape());
        for (std::size_t i = 0; i < d.numel(); ++i) d[i] = g[i] * 0.5 / n.value[i];
        acc(n.parents[0], d);
        break;
      }
      case OpKind::kNeg:
        acc(n.parents[0], ew_unary(g, [](double x) { return -x; }));
        break;
      case OpKind::kScale: {
        double c = n.scalar;
        acc(n.parents[0], ew_unary(g, [c](double x) { return c * x; }));
        break;
      }
      case OpKind::kSoftplus: {
        Tensor d(n.value.shape());
        for (std::size_t i = 0; i < d.numel(); ++i) d[i] = g[i] * sigmoid(pv(0)[i]);
        acc(n.parents[0], d);
        break;
      }
      case OpKind::kTrilMask:
        acc(n.parents[0], tril_k(g, n.iattr != 0));
        break;
      case OpKind::kLogNormCdf: {
        Tensor d(n.value.shape());
        for (std::size_t i = 0; i < d.numel(); ++i) {
          double x = pv(0)[i];
          d[i] = g[i] * std::exp(log_norm_pdf(x) - dvip::log_norm_cdf(x));
        }
        acc(n.parents[0], d);
        break;
      }
      case OpKind::kReshape: {
        Tensor d = g;
        acc(n.parents[0], Tensor(pv(0).shape(), std::move(d.vals())));
        break;
      }
      case OpKind::kConcatCols: {
        std::size_t at = 0;
        for (std::size_t i = 0; i < n.parents.size(); ++i) {
          const Tensor& src = pv(i);
          Tensor d(src.shape());
          for (std::size_t r = 0; r < src.dim(0); ++r)
            for (std::size_t c = 0; c < src.dim(1); ++c)
              d.at(r, c) = g.at(r, at + c);
          acc(n.parents[i], d);
          at += src.dim(1);
        }
        break;
      }
      case OpKind::kCol: {
        Tensor d(pv(0).shape());
        auto j = static_cast<std::size_t>(n.iattr);
        for (std::size_t r = 0; r < pv(0).dim(0); ++r) d.at(r, j) = g[r];
        acc(n.parents[0], d);
        break;
      }
    }
  }
}

namespace {
Tape& same_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape)
    throw ContractViolation("operands live on different tapes");
  return *a.tape;
}
}  // namespace

Var add(Var a, Var b) { return same_tape(a, b).record(OpKind::kAdd, {a, b}); }
Var sub(Var a, Var b) { return same_tape(a, b).record(OpKind::kSub, {a, b}); }
Var mul(Var a, Var b) { return same_tape(a, b).record(OpKind::kMul, {a, b}); }
Var div(Var a, Var b) { return same_tape(a, b).record(OpKind::kDiv, {a, b}); }
Var matmul(Var a, Var b) { return same_tape(a, b).record(OpKind::kMatMul, {a, b}); }
Var transpose(Var a) { return a.tape->record(OpKind::kTranspose, {a}); }
Var broadcast_to(Var a, Shape target) {
  return a.tape->record(OpKind::kBroadcast, {a}, 0.0, 0, std::move(target));
}
Var sum_all(Var a) { return a.tape->record(OpKind::kSumAll, {a}); }
Var sum_axis(Var a, int axis) { return a.tape->record(OpKind::kSumAxis, {a}, 0.0, axis); }
Var mean_all(Var a) { return a.tape->record(OpKind::kMeanAll, {a}); }
Var mean_axis(Var a, int axis) { return a.tape->record(OpKind::kMeanAxis, {a}, 0.0, axis); }
Var tanh(Var a) { return a.tape->record(OpKind::kTanh, {a}); }
Var cos(Var a) { return a.tape->record(OpKind::kCos, {a}); }
Var exp(Var a) { return a.tape->record(OpKind::kExp, {a}); }
Var log(Var a) { return a.tape->record(OpKind::kLog, {a}); }
Var square(Var a) { return a.tape->record(OpKind::kSquare, {a}); }
Var sqrt(Var a) { return a.tape->record(OpKind::kSqrt, {a}); }
Var neg(Var a) { return a.tape->record(OpKind::kNeg, {a}); }
Var scale(Var a, double c) { return a.tape->record(OpKind::kScale, {a}, c); }
Var softplus(Var a) { return a.tape->record(OpKind::kSoftplus, {a}); }
Var tril_mask(Var a, bool include_diag) {
  return a.tape->record(OpKind::kTrilMask, {a}, 0.0, include_diag ? 1 : 0);
}
Var log_norm_cdf(Var a) { return a.tape->record(OpKind::kLogNormCdf, {a}); }
Var reshape(Var a, Shape target) {
  return a.tape->record(OpKind::kReshape, {a}, 0.0, 0, std::move(target));
}
Var concat_cols(const std::vector<Var>& vs) {
  if (vs.empty()) throw ContractViolation("concat_cols: empty operand list");
  return vs[0].tape->record(OpKind::kConcatCols, vs);
}
Var col(Var a, int j) { return a.tape->record(OpKind::kCol, {a}, 0.0, j); }

Var operator+(Var a, double c) { return add(a, a.tape->constant(Tensor::scalar(c))); }
Var operator-(Var a, double c) { return sub(a, a.tape->constant(Tensor::scalar(c))); }
Var operator-(double c, Var a) { return sub(a.tape->constant(Tensor::scalar(c)), a); }
Var operator*(Var a, double c) { return scale(a, c); }
Var operator/(double c, Var a) { return div(a.tape->constant(Tensor::scalar(c)), a); }

GradCheckReport grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x,
                           double step) {
  Tape t;
  Var in = t.leaf(x);
  Var out = f(t, in);
  if (t.value(out).numel() != 1)
    throw ContractViolation("grad_check: function must return a scalar");
  if (!std::isfinite(t.value(out).value()))
    throw NumericError("grad_check: non-finite value at base point");
  t.backward(out);
  Tensor g = t.adjoint(in);

  auto eval = [&](const Tensor& p) {
    Tape tt;
    Var v = f(tt, tt.leaf(p));
    return tt.value(v).value();
  };

  GradCheckReport rep;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    if (!std::isfinite(g[i]))
      throw NumericError("grad_check: non-finite gradient at coordinate " +
                         std::to_string(i));
    Tensor hi = x, lo = x;
    hi[i] += step;
    lo[i] -= step;
    double fh = eval(hi), fl = eval(lo);
    if (!std::isfinite(fh) || !std::isfinite(fl))
      throw NumericError("grad_check: non-finite evaluation at coordinate " +
                         std::to_string(i));
    double num = (fh - fl) / (2.0 * step);
    double rel = std::abs(g[i] - num) / std::max(1.0, std::abs(g[i]));
    if (rel >= rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.worst_index = i;
      rep.analytic = g[i];
      rep.numeric = num;
    }
  }
  return rep;
}

}  // namespace dvip::ad
