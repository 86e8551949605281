#include "stvg/autodiff.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>

#include "stvg/errors.hpp"

namespace stvg::ad {

Tensor& ParamStore::create(const std::string& name, std::vector<int> shape) {
  if (tensors_.count(name)) throw ConfigError("parameter already exists: " + name);
  Tensor t;
  t.name = name;
  t.shape = std::move(shape);
  int n = 1;
  for (int s : t.shape) n *= s;
  t.value.assign(static_cast<size_t>(n), 0.0);
  t.grad.assign(static_cast<size_t>(n), 0.0);
  return tensors_.emplace(name, std::move(t)).first->second;
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [_, t] : tensors_) std::fill(t.grad.begin(), t.grad.end(), 0.0);
}

int ParamStore::total_size() const {
  int n = 0;
  for (const auto& [_, t] : tensors_) n += t.size();
  return n;
}

void init_uniform(Tensor& t, Rng& rng, double scale) {
  const int fan_in = t.cols();
  const double s = scale > 0 ? scale : 1.0 / std::sqrt(std::max(1, fan_in));
  for (auto& v : t.value) v = rng.uniform(-s, s);
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::push(Op op, int dim) {
  Node n;
  n.op = op;
  n.dim = dim;
  n.off = static_cast<int>(buf_.size());
  buf_.resize(buf_.size() + static_cast<size_t>(dim), 0.0);
  nodes_.push_back(n);
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::input(std::span<const double> v) {
  Var out = push(Op::kInput, static_cast<int>(v.size()));
  std::copy(v.begin(), v.end(), val(node(out)));
  return out;
}

Var Tape::input(std::initializer_list<double> v) {
  return input(std::span<const double>(v.begin(), v.size()));
}

Var Tape::scalar(double v) { return input({v}); }

Var Tape::zeros(int dim) { return push(Op::kInput, dim); }

Var Tape::param(Tensor& t, int row) {
  const int d = row >= 0 ? t.cols() : t.size();
  Var out = push(Op::kParam, d);
  Node& n = node(out);
  n.W = &t;
  n.row = row;
  const double* src = t.value.data() + (row >= 0 ? static_cast<size_t>(row) * t.cols() : 0);
  std::copy(src, src + d, val(n));
  return out;
}

Var Tape::affine(Tensor& W, Tensor* b, Var x) {
  const int in = W.cols();
  const int out_dim = W.rows();
  if (dim(x) != in) throw Error("affine: dim mismatch for " + W.name);
  if (b && b->size() != out_dim) throw Error("affine: bias dim mismatch for " + W.name);
  Var out = push(Op::kAffine, out_dim);
  Node& n = node(out);
  n.W = &W;
  n.B = b;
  n.a = x.id;
  const double* xv = val(node(x));
  double* y = val(n);
  for (int r = 0; r < out_dim; ++r) {
    const double* wr = W.value.data() + static_cast<size_t>(r) * in;
    double acc = b ? b->value[static_cast<size_t>(r)] : 0.0;
    for (int c = 0; c < in; ++c) acc += wr[c] * xv[c];
    y[r] = acc;
  }
  return out;
}

Var Tape::add(Var a, Var b) {
  if (dim(a) != dim(b)) throw Error("add: dim mismatch");
  Var out = push(Op::kAdd, dim(a));
  Node& n = node(out);
  n.a = a.id;
  n.b = b.id;
  const double* av = val(node(a));
  const double* bv = val(node(b));
  double* y = val(n);
  for (int i = 0; i < n.dim; ++i) y[i] = av[i] + bv[i];
  return out;
}

Var Tape::sub(Var a, Var b) {
  if (dim(a) != dim(b)) throw Error("sub: dim mismatch");
  Var out = push(Op::kSub, dim(a));
  Node& n = node(out);
  n.a = a.id;
  n.b = b.id;
  const double* av = val(node(a));
  const double* bv = val(node(b));
  double* y = val(n);
  for (int i = 0; i < n.dim; ++i) y[i] = av[i] - bv[i];
  return out;
}

Var Tape::mul(Var a, Var b) {
  if (dim(a) != dim(b)) throw Error("mul: dim mismatch");
  Var out = push(Op::kMul, dim(a));
  Node& n = node(out);
  n.a = a.id;
  n.b = b.id;
  const double* av = val(node(a));
  const double* bv = val(node(b));
  double* y = val(n);
  for (int i = 0; i < n.dim; ++i) y[i] = av[i] * bv[i];
  return out;
}

Var Tape::scale(Var a, double c) {
  Var out = push(Op::kScale, dim(a));
  Node& n = node(out);
  n.a = a.id;
  n.c = c;
  const double* av = val(node(a));
  double* y = val(n);
  for (int i = 0; i < n.dim; ++i) y[i] = av[i] * c;
  return out;
}

Var Tape::add_const(Var a, double c) {
  Var out = push(Op::kAddConst, dim(a));
  Node& n = node(out);
  n.a = a.id;
  n.c = c;
  const double* av = val(node(a));
  double* y = val(n);
  for (int i = 0; i < n.dim; ++i) y[i] = av[i] + c;
  return out;
}

Var Tape::tanh_(Var a) {
  Var out = push(Op::kTanh, dim(a));
  Node& n = node(out);
  n.a = a.id;
  const double* av = val(node(a));
  double* y = val(n);
  for (int i = 0; i < n.dim; ++i) y[i] = std::tanh(av[i]);
  return out;
}

Var Tape::sigmoid_(Var a) {
  Var out = push(Op::kSigmoid, dim(a));
  Node& n = node(out);
  n.a = a.id;
  const double* av = val(node(a));
  double* y = val(n);
  for (int i = 0; i < n.dim; ++i) y[i] = 1.0 / (1.0 + std::exp(-av[i]));
  return out;
}

Var Tape::relu_(Var a) {
  Var out = push(Op::kRelu, dim(a));
  Node& n = node(out);
  n.a = a.id;
  const double* av = val(node(a));
  double* y = val(n);
  for (int i = 0; i < n.dim; ++i) y[i] = av[i] > 0 ? av[i] : 0.0;
  return out;
}

Var Tape::concat(std::span<const Var> parts) {
  int d = 0;
  for (Var p : parts) d += dim(p);
  Var out = push(Op::kConcat, d);
  Node& n = node(out);
  n.list_off = static_cast<int>(list_.size());
  n.list_len = static_cast<int>(parts.size());
  for (Var p : parts) list_.push_back(p.id);
  double* y = val(n);
  for (Var p : parts) {
    const Node& pn = node(p);
    std::memcpy(y, val(pn), sizeof(double) * static_cast<size_t>(pn.dim));
    y += pn.dim;
  }
  return out;
}

Var Tape::dot(Var a, Var b) {
  if (dim(a) != dim(b)) throw Error("dot: dim mismatch");
  Var out = push(Op::kDot, 1);
  Node& n = node(out);
  n.a = a.id;
  n.b = b.id;
  const double* av = val(node(a));
  const double* bv = val(node(b));
  double acc = 0;
  for (int i = 0; i < dim(a); ++i) acc += av[i] * bv[i];
  *val(n) = acc;
  return out;
}

Var Tape::softmax(Var a) {
  Var out = push(Op::kSoftmax, dim(a));
  Node& n = node(out);
  n.a = a.id;
  const double* av = val(node(a));
  double* y = val(n);
  double mx = av[0];
  for (int i = 1; i < n.dim; ++i) mx = std::max(mx, av[i]);
  double z = 0;
  for (int i = 0; i < n.dim; ++i) {
    y[i] = std::exp(av[i] - mx);
    z += y[i];
  }
  for (int i = 0; i < n.dim; ++i) y[i] /= z;
  return out;
}

Var Tape::l2norm(Var a) {
  Var out = push(Op::kL2Norm, dim(a));
  Node& n = node(out);
  n.a = a.id;
  const double* av = val(node(a));
  double* y = val(n);
  double sq = 0;
  for (int i = 0; i < n.dim; ++i) sq += av[i] * av[i];
  const double norm = std::sqrt(sq);
  const double s = norm + 1e-12;
  for (int i = 0; i < n.dim; ++i) y[i] = av[i] / s;
  n.aux_off = static_cast<int>(aux_.size());
  n.aux_len = 1;
  aux_.push_back(norm);
  return out;
}

Var Tape::weighted_sum(std::span<const Var> vecs, Var w) {
  if (static_cast<int>(vecs.size()) != dim(w)) throw Error("weighted_sum: weight dim mismatch");
  if (vecs.empty()) throw Error("weighted_sum: empty list");
  const int d = dim(vecs[0]);
  for (Var v : vecs)
    if (dim(v) != d) throw Error("weighted_sum: vector dim mismatch");
  Var out = push(Op::kWeightedSum, d);
  Node& n = node(out);
  n.a = w.id;
  n.list_off = static_cast<int>(list_.size());
  n.list_len = static_cast<int>(vecs.size());
  for (Var v : vecs) list_.push_back(v.id);
  const double* wv = val(node(w));
  double* y = val(n);
  for (size_t k = 0; k < vecs.size(); ++k) {
    const double* vv = val(node(vecs[k]));
    for (int i = 0; i < d; ++i) y[i] += wv[k] * vv[i];
  }
  return out;
}

Var Tape::mean_list(std::span<const Var> parts) {
  if (parts.empty()) throw Error("mean_list: empty list");
  const int d = dim(parts[0]);
  for (Var v : parts)
    if (dim(v) != d) throw Error("mean_list: dim mismatch");
  Var out = push(Op::kMeanList, d);
  Node& n = node(out);
  n.list_off = static_cast<int>(list_.size());
  n.list_len = static_cast<int>(parts.size());
  for (Var v : parts) list_.push_back(v.id);
  double* y = val(n);
  for (Var v : parts) {
    const double* vv = val(node(v));
    for (int i = 0; i < d; ++i) y[i] += vv[i];
  }
  const double inv = 1.0 / static_cast<double>(parts.size());
  for (int i = 0; i < d; ++i) y[i] *= inv;
  return out;
}

Var Tape::max_list(std::span<const Var> scalars) {
  if (scalars.empty()) throw Error("max_list: empty list");
  for (Var v : scalars)
    if (dim(v) != 1) throw Error("max_list: wants scalars");
  Var out = push(Op::kMaxList, 1);
  Node& n = node(out);
  n.list_off = static_cast<int>(list_.size());
  n.list_len = static_cast<int>(scalars.size());
  for (Var v : scalars) list_.push_back(v.id);
  int arg = 0;
  double best = value(scalars[0]);
  for (size_t k = 1; k < scalars.size(); ++k) {
    const double v = value(scalars[k]);
    if (v > best) {  // strict: ties keep the lowest index
      best = v;
      arg = static_cast<int>(k);
    }
  }
  n.row = arg;  // reuse: argmax slot
  *val(n) = best;
  return out;
}

Var Tape::bce_with_logits(Var logits, std::span<const double> targets) {
  if (dim(logits) != static_cast<int>(targets.size()))
    throw Error("bce_with_logits: target dim mismatch");
  Var out = push(Op::kBce, 1);
  Node& n = node(out);
  n.a = logits.id;
  n.aux_off = static_cast<int>(aux_.size());
  n.aux_len = static_cast<int>(targets.size());
  for (double t : targets) aux_.push_back(t);
  const double* z = val(node(logits));
  double acc = 0;
  for (size_t i = 0; i < targets.size(); ++i) {
    // stable: max(z,0) - z t + log(1 + exp(-|z|))
    acc += std::max(z[i], 0.0) - z[i] * targets[i] + std::log1p(std::exp(-std::abs(z[i])));
  }
  *val(n) = acc / static_cast<double>(targets.size());
  return out;
}

double Tape::value(Var v) const { return *val(node(v)); }

std::span<const double> Tape::values(Var v) const {
  const Node& n = node(v);
  return {val(n), static_cast<size_t>(n.dim)};
}

void Tape::backward(Var loss) {
  if (dim(loss) != 1) throw Error("backward: loss must be scalar");
  gbuf_.assign(buf_.size(), 0.0);
  gbuf_[static_cast<size_t>(node(loss).off)] = 1.0;

  for (int id = loss.id; id >= 0; --id) {
    const Node& n = nodes_[static_cast<size_t>(id)];
    const double* g = gbuf_.data() + n.off;
    switch (n.op) {
      case Op::kInput:
        break;
      case Op::kParam: {
        double* tg = n.W->grad.data() +
                     (n.row >= 0 ? static_cast<size_t>(n.row) * n.W->cols() : 0);
        for (int i = 0; i < n.dim; ++i) tg[i] += g[i];
        break;
      }
      case Op::kAffine: {
        const Node& x = nodes_[static_cast<size_t>(n.a)];
        const double* xv = val(x);
        double* gx = grd(x);
        const int in = n.W->cols();
        for (int r = 0; r < n.dim; ++r) {
          const double gr = g[r];
          if (gr == 0.0) continue;
          double* wg = n.W->grad.data() + static_cast<size_t>(r) * in;
          const double* wv = n.W->value.data() + static_cast<size_t>(r) * in;
          for (int c = 0; c < in; ++c) {
            wg[c] += gr * xv[c];
            gx[c] += gr * wv[c];
          }
          if (n.B) n.B->grad[static_cast<size_t>(r)] += gr;
        }
        break;
      }
      case Op::kAdd: {
        double* ga = grd(nodes_[static_cast<size_t>(n.a)]);
        double* gb = grd(nodes_[static_cast<size_t>(n.b)]);
        for (int i = 0; i < n.dim; ++i) {
          ga[i] += g[i];
          gb[i] += g[i];
        }
        break;
      }
      case Op::kSub: {
        double* ga = grd(nodes_[static_cast<size_t>(n.a)]);
        double* gb = grd(nodes_[static_cast<size_t>(n.b)]);
        for (int i = 0; i < n.dim; ++i) {
          ga[i] += g[i];
          gb[i] -= g[i];
        }
        break;
      }
      case Op::kMul: {
        const Node& a = nodes_[static_cast<size_t>(n.a)];
        const Node& b = nodes_[static_cast<size_t>(n.b)];
        const double* av = val(a);
        const double* bv = val(b);
        double* ga = grd(a);
        double* gb = grd(b);
        for (int i = 0; i < n.dim; ++i) {
          ga[i] += g[i] * bv[i];
          gb[i] += g[i] * av[i];
        }
        break;
      }
      case Op::kScale: {
        double* ga = grd(nodes_[static_cast<size_t>(n.a)]);
        for (int i = 0; i < n.dim; ++i) ga[i] += g[i] * n.c;
        break;
      }
      case Op::kAddConst: {
        double* ga = grd(nodes_[static_cast<size_t>(n.a)]);
        for (int i = 0; i < n.dim; ++i) ga[i] += g[i];
        break;
      }
      case Op::kTanh: {
        const double* y = val(n);
        double* ga = grd(nodes_[static_cast<size_t>(n.a)]);
        for (int i = 0; i < n.dim; ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
        break;
      }
      case Op::kSigmoid: {
        const double* y = val(n);
        double* ga = grd(nodes_[static_cast<size_t>(n.a)]);
        for (int i = 0; i < n.dim; ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
        break;
      }
      case Op::kRelu: {
        const Node& a = nodes_[static_cast<size_t>(n.a)];
        const double* av = val(a);
        double* ga = grd(a);
        for (int i = 0; i < n.dim; ++i)
          if (av[i] > 0) ga[i] += g[i];
        break;
      }
      case Op::kConcat: {
        const double* gg = g;
        for (int k = 0; k < n.list_len; ++k) {
          const Node& p = nodes_[static_cast<size_t>(list_[static_cast<size_t>(n.list_off + k)])];
          double* gp = grd(p);
          for (int i = 0; i < p.dim; ++i) gp[i] += gg[i];
          gg += p.dim;
        }
        break;
      }
      case Op::kDot: {
        const Node& a = nodes_[static_cast<size_t>(n.a)];
        const Node& b = nodes_[static_cast<size_t>(n.b)];
        const double* av = val(a);
        const double* bv = val(b);
        double* ga = grd(a);
        double* gb = grd(b);
        const double gs = g[0];
        for (int i = 0; i < a.dim; ++i) {
          ga[i] += gs * bv[i];
          gb[i] += gs * av[i];
        }
        break;
      }
      case Op::kSoftmax: {
        const double* y = val(n);
        double* ga = grd(nodes_[static_cast<size_t>(n.a)]);
        double dotgy = 0;
        for (int i = 0; i < n.dim; ++i) dotgy += g[i] * y[i];
        for (int i = 0; i < n.dim; ++i) ga[i] += y[i] * (g[i] - dotgy);
        break;
      }
      case Op::kL2Norm: {
        const Node& a = nodes_[static_cast<size_t>(n.a)];
        const double* xv = val(a);
        double* ga = grd(a);
        const double norm = aux_[static_cast<size_t>(n.aux_off)];
        const double s = norm + 1e-12;
        double gdotx = 0;
        for (int i = 0; i < n.dim; ++i) gdotx += g[i] * xv[i];
        const double k = norm > 0 ? gdotx / (s * s * norm) : 0.0;
        for (int i = 0; i < n.dim; ++i) ga[i] += g[i] / s - k * xv[i];
        break;
      }
      case Op::kWeightedSum: {
        const Node& w = nodes_[static_cast<size_t>(n.a)];
        const double* wv = val(w);
        double* gw = grd(w);
        for (int k = 0; k < n.list_len; ++k) {
          const Node& v = nodes_[static_cast<size_t>(list_[static_cast<size_t>(n.list_off + k)])];
          const double* vv = val(v);
          double* gv = grd(v);
          double acc = 0;
          for (int i = 0; i < n.dim; ++i) {
            acc += g[i] * vv[i];
            gv[i] += g[i] * wv[k];
          }
          gw[k] += acc;
        }
        break;
      }
      case Op::kMeanList: {
        const double inv = 1.0 / static_cast<double>(n.list_len);
        for (int k = 0; k < n.list_len; ++k) {
          const Node& p = nodes_[static_cast<size_t>(list_[static_cast<size_t>(n.list_off + k)])];
          double* gp = grd(p);
          for (int i = 0; i < n.dim; ++i) gp[i] += g[i] * inv;
        }
        break;
      }
      case Op::kMaxList: {
        const Node& p =
            nodes_[static_cast<size_t>(list_[static_cast<size_t>(n.list_off + n.row)])];
        grd(p)[0] += g[0];
        break;
      }
      case Op::kBce: {
        const Node& a = nodes_[static_cast<size_t>(n.a)];
        const double* z = val(a);
        double* ga = grd(a);
        const double gs = g[0] / static_cast<double>(n.aux_len);
        for (int i = 0; i < n.aux_len; ++i) {
          const double t = aux_[static_cast<size_t>(n.aux_off + i)];
          const double sig = 1.0 / (1.0 + std::exp(-z[i]));
          ga[i] += gs * (sig - t);
        }
        break;
      }
    }
  }
}

void Tape::reset() {
  nodes_.clear();
  buf_.clear();
  gbuf_.clear();
  aux_.clear();
  list_.clear();
}

// ---------------------------------------------------------------------------
// LSTM helpers

LstmParams make_lstm(ParamStore& ps, const std::string& prefix, int input_dim, int hidden,
                     Rng& rng) {
  LstmParams p;
  p.hidden = hidden;
  auto mk = [&](const char* g) {
    Tensor& w = ps.create(prefix + ".W" + g, {hidden, input_dim + hidden});
    init_uniform(w, rng);
    return &w;
  };
  auto mkb = [&](const char* g) {
    Tensor& b = ps.create(prefix + ".b" + g, {hidden});
    return &b;
  };
  p.Wi = mk("i");
  p.Wf = mk("f");
  p.Wg = mk("g");
  p.Wo = mk("o");
  p.bi = mkb("i");
  p.bf = mkb("f");
  p.bg = mkb("g");
  p.bo = mkb("o");
  // forget bias at 1 helps gradient flow on short sequences
  std::fill(p.bf->value.begin(), p.bf->value.end(), 1.0);
  return p;
}

LstmParams get_lstm(ParamStore& ps, const std::string& prefix, int hidden) {
  LstmParams p;
  p.hidden = hidden;
  p.Wi = &ps.at(prefix + ".Wi");
  p.Wf = &ps.at(prefix + ".Wf");
  p.Wg = &ps.at(prefix + ".Wg");
  p.Wo = &ps.at(prefix + ".Wo");
  p.bi = &ps.at(prefix + ".bi");
  p.bf = &ps.at(prefix + ".bf");
  p.bg = &ps.at(prefix + ".bg");
  p.bo = &ps.at(prefix + ".bo");
  return p;
}

LstmState lstm_zero_state(Tape& t, int hidden) {
  return {t.zeros(hidden), t.zeros(hidden)};
}

LstmState lstm_step(Tape& t, const LstmParams& p, Var x, const LstmState& prev) {
  std::array<Var, 2> xh{x, prev.h};
  Var cat = t.concat(xh);
  Var i = t.sigmoid_(t.affine(*p.Wi, p.bi, cat));
  Var f = t.sigmoid_(t.affine(*p.Wf, p.bf, cat));
  Var g = t.tanh_(t.affine(*p.Wg, p.bg, cat));
  Var o = t.sigmoid_(t.affine(*p.Wo, p.bo, cat));
  Var c = t.add(t.mul(f, prev.c), t.mul(i, g));
  Var h = t.mul(o, t.tanh_(c));
  return {h, c};
}

void SgdMomentum::step(ParamStore& ps) {
  for (auto& [name, t] : ps.tensors()) {
    auto& v = velocity_[name];
    if (v.size() != t.value.size()) v.assign(t.value.size(), 0.0);
    for (size_t i = 0; i < t.value.size(); ++i) {
      v[i] = momentum_ * v[i] - lr_ * t.grad[i];
      t.value[i] += v[i];
    }
  }
}

}  // namespace stvg::ad
