#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "stvg/rng.hpp"

namespace stvg::ad {

// Named parameter tensor (vector or matrix, row-major).
struct Tensor {
  std::string name;
  std::vector<int> shape;  // {n} or {rows, cols}
  std::vector<double> value;
  std::vector<double> grad;

  int rows() const { return shape.empty() ? 0 : shape[0]; }
  int cols() const { return shape.size() > 1 ? shape[1] : 1; }
  int size() const { return static_cast<int>(value.size()); }
};

class ParamStore {
 public:
  Tensor& create(const std::string& name, std::vector<int> shape);
  bool has(const std::string& name) const { return tensors_.count(name) > 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  void zero_grad();
  std::map<std::string, Tensor>& tensors() { return tensors_; }
  const std::map<std::string, Tensor>& tensors() const { return tensors_; }
  int total_size() const;

 private:
  std::map<std::string, Tensor> tensors_;  // ordered: deterministic iteration
};

// Uniform(-s, s) with s = 1/sqrt(fan_in) unless overridden.
void init_uniform(Tensor& t, Rng& rng, double scale = 0.0);

struct Var {
  int id = -1;
  bool ok() const { return id >= 0; }
};

// Reverse-mode tape over small dense vectors. Node storage is arena-backed;
// reset() keeps capacity so steady-state training does not allocate.
class Tape {
 public:
  Var input(std::span<const double> v);
  Var input(std::initializer_list<double> v);
  Var scalar(double v);
  Var zeros(int dim);

  // Leaf views of parameters. row >= 0 selects a matrix row; row == -1 views
  // the whole tensor flat.
  Var param(Tensor& t, int row = -1);

  Var affine(Tensor& W, Tensor* b, Var x);  // W x (+ b)
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var a, double c);
  Var add_const(Var a, double c);
  Var tanh_(Var a);
  Var sigmoid_(Var a);
  Var relu_(Var a);
  Var concat(std::span<const Var> parts);
  Var dot(Var a, Var b);          // -> dim 1
  Var softmax(Var a);
  Var l2norm(Var a);              // x / (|x| + 1e-12)
  Var weighted_sum(std::span<const Var> vecs, Var w);  // Σ w_i v_i
  Var mean_list(std::span<const Var> parts);           // elementwise mean
  Var max_list(std::span<const Var> scalars);          // max of scalars
  Var bce_with_logits(Var logits, std::span<const double> targets);  // mean over labels

  Var cosine(Var a, Var b) { return dot(l2norm(a), l2norm(b)); }

  int dim(Var v) const { return nodes_[static_cast<size_t>(v.id)].dim; }
  double value(Var v) const;
  std::span<const double> values(Var v) const;

  // Backpropagate from a scalar output; accumulates into Tensor::grad.
  void backward(Var loss);

  void reset();
  size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op : uint8_t {
    kInput, kParam, kAffine, kAdd, kSub, kMul, kScale, kAddConst, kTanh,
    kSigmoid, kRelu, kConcat, kDot, kSoftmax, kL2Norm, kWeightedSum,
    kMeanList, kMaxList, kBce,
  };

  struct Node {
    Op op;
    int a = -1, b = -1;
    Tensor* W = nullptr;
    Tensor* B = nullptr;
    int row = -1;
    double c = 0;
    int off = 0, dim = 0;
    int list_off = 0, list_len = 0;
    int aux_off = 0, aux_len = 0;
  };

  Var push(Op op, int dim);
  double* val(const Node& n) { return buf_.data() + n.off; }
  const double* val(const Node& n) const { return buf_.data() + n.off; }
  double* grd(const Node& n) { return gbuf_.data() + n.off; }
  const Node& node(Var v) const { return nodes_[static_cast<size_t>(v.id)]; }
  Node& node(Var v) { return nodes_[static_cast<size_t>(v.id)]; }

  std::vector<Node> nodes_;
  std::vector<double> buf_, gbuf_, aux_;
  std::vector<int> list_;
};

// LSTM cell parameters: four gates, input dim I, hidden dim H.
struct LstmParams {
  Tensor *Wi, *Wf, *Wg, *Wo;  // [H, I+H]
  Tensor *bi, *bf, *bg, *bo;  // [H]
  int hidden = 0;
};

LstmParams make_lstm(ParamStore& ps, const std::string& prefix, int input_dim, int hidden,
                     Rng& rng);
LstmParams get_lstm(ParamStore& ps, const std::string& prefix, int hidden);

struct LstmState {
  Var h, c;
};

LstmState lstm_step(Tape& t, const LstmParams& p, Var x, const LstmState& prev);
LstmState lstm_zero_state(Tape& t, int hidden);

// SGD with momentum; velocity buffers keyed by tensor name.
class SgdMomentum {
 public:
  SgdMomentum(double lr, double momentum) : lr_(lr), momentum_(momentum) {}
  void step(ParamStore& ps);

 private:
  double lr_, momentum_;
  std::map<std::string, std::vector<double>> velocity_;
};

}  // namespace stvg::ad
