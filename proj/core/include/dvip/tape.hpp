#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <vector>

#include "dvip/tensor.hpp"

namespace dvip::ad {

enum class OpKind : std::uint8_t {
  kLeaf,
  kConstant,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kMatMul,
  kTranspose,
  kBroadcast,
  kSumAll,
  kSumAxis,
  kMeanAll,
  kMeanAxis,
  kTanh,
  kCos,
  kExp,
  kLog,
  kSquare,
  kSqrt,
  kNeg,
  kScale,
  kSoftplus,
  kTrilMask,
  kLogNormCdf,
  kReshape,
  kConcatCols,
  kCol,
};

class Tape;

// Lightweight handle to a node on a tape.
struct Var {
  int id = -1;
  Tape* tape = nullptr;
};

struct Node {
  OpKind kind = OpKind::kLeaf;
  std::vector<int> parents;
  Tensor value;
  Tensor adjoint;
  double scalar = 0.0;  // kScale factor
  int iattr = 0;        // reduction axis, column index, or tril diagonal flag
  Shape shape_attr;     // kBroadcast / kReshape target shape
};

// Define-by-run reverse-mode tape over dense double tensors. Elementwise
// binary ops broadcast with trailing-dimension alignment (a missing or
// size-1 dimension stretches); gradients of broadcast inputs are summed back
// to the input shape. Graphs are rebuilt per evaluation.
class Tape {
 public:
  Var leaf(Tensor v);
  Var constant(Tensor v);

  // Appends a node, validating the op kind and parents and computing the
  // forward value. All op helper functions below funnel through here.
  Var record(OpKind kind, const std::vector<Var>& parents, double scalar = 0.0,
             int iattr = 0, Shape shape_attr = {});

  // Reverse sweep from a scalar seed. Afterwards the seed's adjoint is 1 and
  // any node not on a path to the seed has an all-zero adjoint.
  void backward(Var seed);

  // Recomputes every non-leaf value in recording order with the same kernels
  // used at construction, so values are reproduced bit for bit.
  void replay();

  const Tensor& value(Var v) const;
  const Tensor& adjoint(Var v) const;
  void set_leaf(Var v, Tensor t);

  std::size_t size() const { return nodes_.size(); }
  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

 private:
  Tensor compute(const Node& n) const;
  void check_var(Var v) const;

  // Deque keeps references from value()/adjoint() stable while more nodes
  // are recorded.
  std::deque<Node> nodes_;
};

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var matmul(Var a, Var b);
Var transpose(Var a);
Var broadcast_to(Var a, Shape target);
Var sum_all(Var a);
Var sum_axis(Var a, int axis);  // drops the reduced axis
Var mean_all(Var a);
Var mean_axis(Var a, int axis);
Var tanh(Var a);
Var cos(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var sqrt(Var a);
Var neg(Var a);
Var scale(Var a, double c);
Var softplus(Var a);
Var tril_mask(Var a, bool include_diag);
Var log_norm_cdf(Var a);
Var reshape(Var a, Shape target);
Var concat_cols(const std::vector<Var>& vs);
Var col(Var a, int j);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }
Var operator+(Var a, double c);
Var operator-(Var a, double c);
Var operator-(double c, Var a);
Var operator*(Var a, double c);
inline Var operator*(double c, Var a) { return a * c; }
Var operator/(double c, Var a);

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Central-difference check of d f / d x for a scalar-valued builder f.
// Relative error uses max(1, |analytic|) as denominator. A non-finite
// evaluation or gradient entry raises NumericError naming the coordinate.
GradCheckReport grad_check(const std::function<Var(Tape&, Var)>& f,
                           const Tensor& x, double step);

}  // namespace dvip::ad
