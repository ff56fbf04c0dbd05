#include "hcd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hcd {
namespace ops {

namespace {

constexpr double kLn2 = 0.6931471805599453;

bool tracked(const Tensor& t) { return Tape::active() && t.requires_grad(); }

Tensor make_out(Shape shape, std::vector<double> vals, bool requires_grad) {
  Tensor t(std::move(shape), std::move(vals));
  t.data_->requires_grad = requires_grad;
  return t;
}

// index mapping for the restricted broadcast rules
struct BcastSide {
  enum Kind { kSame, kScalar, kRow } kind = kSame;
  std::size_t cols = 0;
  std::size_t map(std::size_t flat) const {
    switch (kind) {
      case kScalar: return 0;
      case kRow: return flat % cols;
      default: return flat;
    }
  }
};

bool is_row_of(const Shape& vec, const Shape& mat) {
  if (mat.size() != 2) return false;
  if (vec.size() == 1) return vec[0] == mat[1];
  if (vec.size() == 2) return vec[0] == 1 && vec[1] == mat[1];
  return false;
}

void resolve_bcast(const Tensor& a, const Tensor& b, const char* name, Shape& out_shape,
                   BcastSide& sa, BcastSide& sb) {
  if (a.shape() == b.shape()) {
    out_shape = a.shape();
    return;
  }
  if (b.numel() == 1) {
    out_shape = a.shape();
    sb.kind = BcastSide::kScalar;
    return;
  }
  if (a.numel() == 1) {
    out_shape = b.shape();
    sa.kind = BcastSide::kScalar;
    return;
  }
  if (is_row_of(b.shape(), a.shape())) {
    out_shape = a.shape();
    sb.kind = BcastSide::kRow;
    sb.cols = a.shape()[1];
    return;
  }
  if (is_row_of(a.shape(), b.shape())) {
    out_shape = b.shape();
    sa.kind = BcastSide::kRow;
    sa.cols = b.shape()[1];
    return;
  }
  throw ShapeError(std::string(name) + ": shapes " + shape_str(a.shape()) + " and " +
                   shape_str(b.shape()) + " do not match (only scalar and row-vector "
                   "broadcasts are supported)");
}

using Fn2 = double (*)(double, double);

Tensor binary_ew(const Tensor& a, const Tensor& b, const char* name, Fn2 f, Fn2 dfa, Fn2 dfb) {
  Shape out_shape;
  BcastSide sa, sb;
  resolve_bcast(a, b, name, out_shape, sa, sb);

  std::size_t n = shape_numel(out_shape);
  std::vector<double> vals(n);
  for (std::size_t i = 0; i < n; ++i) {
    vals[i] = f(a.at(sa.map(i)), b.at(sb.map(i)));
  }
  bool rg = tracked(a) || tracked(b);
  Tensor out = make_out(std::move(out_shape), std::move(vals), rg);
  if (rg) {
    auto ad = a.data_, bd = b.data_, od = out.data_;
    bool ga = a.requires_grad(), gb = b.requires_grad();
    Tape::active()->record([ad, bd, od, sa, sb, dfa, dfb, ga, gb, n]() {
      if (od->grad.empty()) return;
      for (std::size_t i = 0; i < n; ++i) {
        double g = od->grad[i];
        std::size_t ia = sa.map(i), ib = sb.map(i);
        double av = ad->values[ia], bv = bd->values[ib];
        if (ga) ad->accumulate(ia, g * dfa(av, bv));
        if (gb) bd->accumulate(ib, g * dfb(av, bv));
      }
    });
  }
  return out;
}

using Fn1 = double (*)(double);
// df receives (x, y) with y = f(x)
using DFn1 = double (*)(double, double);

Tensor unary_ew(const Tensor& x, const char* /*name*/, Fn1 f, DFn1 df) {
  std::size_t n = x.numel();
  std::vector<double> vals(n);
  for (std::size_t i = 0; i < n; ++i) vals[i] = f(x.at(i));
  bool rg = tracked(x);
  Tensor out = make_out(x.shape(), std::move(vals), rg);
  if (rg) {
    auto xd = x.data_, od = out.data_;
    Tape::active()->record([xd, od, df, n]() {
      if (od->grad.empty()) return;
      for (std::size_t i = 0; i < n; ++i) {
        xd->accumulate(i, od->grad[i] * df(xd->values[i], od->values[i]));
      }
    });
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_ew(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_ew(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_ew(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  for (std::size_t i = 0; i < b.numel(); ++i) {
    if (b.at(i) == 0.0) {
      throw NumericError("div: zero denominator at flat index " + std::to_string(i));
    }
  }
  return binary_ew(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor add(const Tensor& a, double c) {
  std::size_t n = a.numel();
  std::vector<double> vals(n);
  for (std::size_t i = 0; i < n; ++i) vals[i] = a.at(i) + c;
  bool rg = tracked(a);
  Tensor out = make_out(a.shape(), std::move(vals), rg);
  if (rg) {
    auto ad = a.data_, od = out.data_;
    Tape::active()->record([ad, od, n]() {
      if (od->grad.empty()) return;
      for (std::size_t i = 0; i < n; ++i) ad->accumulate(i, od->grad[i]);
    });
  }
  return out;
}

Tensor sub(double c, const Tensor& a) {
  std::size_t n = a.numel();
  std::vector<double> vals(n);
  for (std::size_t i = 0; i < n; ++i) vals[i] = c - a.at(i);
  bool rg = tracked(a);
  Tensor out = make_out(a.shape(), std::move(vals), rg);
  if (rg) {
    auto ad = a.data_, od = out.data_;
    Tape::active()->record([ad, od, n]() {
      if (od->grad.empty()) return;
      for (std::size_t i = 0; i < n; ++i) ad->accumulate(i, -od->grad[i]);
    });
  }
  return out;
}

Tensor mul(const Tensor& a, double c) {
  std::size_t n = a.numel();
  std::vector<double> vals(n);
  for (std::size_t i = 0; i < n; ++i) vals[i] = a.at(i) * c;
  bool rg = tracked(a);
  Tensor out = make_out(a.shape(), std::move(vals), rg);
  if (rg) {
    auto ad = a.data_, od = out.data_;
    Tape::active()->record([ad, od, c, n]() {
      if (od->grad.empty()) return;
      for (std::size_t i = 0; i < n; ++i) ad->accumulate(i, od->grad[i] * c);
    });
  }
  return out;
}

Tensor div(double c, const Tensor& a) {
  for (std::size_t i = 0; i < a.numel(); ++i) {
    if (a.at(i) == 0.0) {
      throw NumericError("div: zero denominator at flat index " + std::to_string(i));
    }
  }
  std::size_t n = a.numel();
  std::vector<double> vals(n);
  for (std::size_t i = 0; i < n; ++i) vals[i] = c / a.at(i);
  bool rg = tracked(a);
  Tensor out = make_out(a.shape(), std::move(vals), rg);
  if (rg) {
    auto ad = a.data_, od = out.data_;
    Tape::active()->record([ad, od, c, n]() {
      if (od->grad.empty()) return;
      for (std::size_t i = 0; i < n; ++i) {
        double x = ad->values[i];
        ad->accumulate(i, od->grad[i] * (-c / (x * x)));
      }
    });
  }
  return out;
}

Tensor neg(const Tensor& x) { return mul(x, -1.0); }

Tensor relu(const Tensor& x) {
  return unary_ew(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  // stable form; output clamped into the open interval so downstream mask
  // invariants hold even for saturated inputs
  static const double kHi = std::nextafter(1.0, 0.0);
  static const double kLo = std::numeric_limits<double>::min();
  return unary_ew(
      x, "sigmoid",
      [](double v) {
        double s;
        if (v >= 0.0) {
          s = 1.0 / (1.0 + std::exp(-v));
        } else {
          double e = std::exp(v);
          s = e / (1.0 + e);
        }
        return std::min(std::max(s, kLo), kHi);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor log2(const Tensor& x) {
  for (std::size_t i = 0; i < x.numel(); ++i) {
    if (!(x.at(i) > 0.0)) {
      throw NumericError("log2: non-positive input " + std::to_string(x.at(i)) +
                         " at flat index " + std::to_string(i));
    }
  }
  return unary_ew(
      x, "log2", [](double v) { return std::log2(v); },
      [](double v, double) { return 1.0 / (v * kLn2); });
}

Tensor exp(const Tensor& x) {
  return unary_ew(
      x, "exp", [](double v) { return std::exp(v); },
      [](double, double y) { return y; });
}

Tensor sqrt(const Tensor& x) {
  return unary_ew(
      x, "sqrt", [](double v) { return std::sqrt(v); },
      [](double, double y) { return 0.5 / std::max(y, 1e-12); });
}

Tensor square(const Tensor& x) {
  return unary_ew(
      x, "square", [](double v) { return v * v; },
      [](double v, double) { return 2.0 * v; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.dim() != 2 || b.dim() != 2 || a.shape()[1] != b.shape()[0]) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> vals(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      double av = a.at(i * k + p);
      for (std::size_t j = 0; j < n; ++j) {
        vals[i * n + j] += av * b.at(p * n + j);
      }
    }
  }
  bool rg = tracked(a) || tracked(b);
  Tensor out = make_out({m, n}, std::move(vals), rg);
  if (rg) {
    auto ad = a.data_, bd = b.data_, od = out.data_;
    bool ga = a.requires_grad(), gb = b.requires_grad();
    Tape::active()->record([ad, bd, od, m, k, n, ga, gb]() {
      if (od->grad.empty()) return;
      const auto& g = od->grad;
      if (ga) {
        // dA = g . B^T
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bd->values[p * n + j];
            ad->accumulate(i * k + p, acc);
          }
        }
      }
      if (gb) {
        // dB = A^T . g
        for (std::size_t p = 0; p < k; ++p) {
          for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < m; ++i) acc += ad->values[i * k + p] * g[i * n + j];
            bd->accumulate(p * n + j, acc);
          }
        }
      }
    });
  }
  return out;
}

Tensor transpose(const Tensor& x) {
  if (x.dim() != 2) throw ShapeError("transpose: expected 2-D, got " + shape_str(x.shape()));
  std::size_t r = x.shape()[0], c = x.shape()[1];
  std::vector<double> vals(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) vals[j * r + i] = x.at(i * c + j);
  bool rg = tracked(x);
  Tensor out = make_out({c, r}, std::move(vals), rg);
  if (rg) {
    auto xd = x.data_, od = out.data_;
    Tape::active()->record([xd, od, r, c]() {
      if (od->grad.empty()) return;
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) xd->accumulate(i * c + j, od->grad[j * r + i]);
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape) +
                     " changes element count");
  }
  bool rg = tracked(x);
  Tensor out = make_out(std::move(shape), x.values(), rg);
  if (rg) {
    auto xd = x.data_, od = out.data_;
    std::size_t n = x.numel();
    Tape::active()->record([xd, od, n]() {
      if (od->grad.empty()) return;
      for (std::size_t i = 0; i < n; ++i) xd->accumulate(i, od->grad[i]);
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) acc += x.at(i);
  bool rg = tracked(x);
  Tensor out = make_out({1}, {acc}, rg);
  if (rg) {
    auto xd = x.data_, od = out.data_;
    std::size_t n = x.numel();
    Tape::active()->record([xd, od, n]() {
      if (od->grad.empty()) return;
      double g = od->grad[0];
      for (std::size_t i = 0; i < n; ++i) xd->accumulate(i, g);
    });
  }
  return out;
}

Tensor mean(const Tensor& x) { return mul(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor batch_mean(const Tensor& x) {
  if (x.dim() != 2) throw ShapeError("batch_mean: expected 2-D, got " + shape_str(x.shape()));
  std::size_t n = x.shape()[0], d = x.shape()[1];
  std::vector<double> vals(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) vals[j] += x.at(i * d + j);
  for (std::size_t j = 0; j < d; ++j) vals[j] /= static_cast<double>(n);
  bool rg = tracked(x);
  Tensor out = make_out({d}, std::move(vals), rg);
  if (rg) {
    auto xd = x.data_, od = out.data_;
    Tape::active()->record([xd, od, n, d]() {
      if (od->grad.empty()) return;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
          xd->accumulate(i * d + j, od->grad[j] / static_cast<double>(n));
    });
  }
  return out;
}

Tensor batch_var(const Tensor& x) {
  if (x.dim() != 2) throw ShapeError("batch_var: expected 2-D, got " + shape_str(x.shape()));
  std::size_t n = x.shape()[0], d = x.shape()[1];
  std::vector<double> mu(d, 0.0), vals(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mu[j] += x.at(i * d + j);
  for (std::size_t j = 0; j < d; ++j) mu[j] /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double c = x.at(i * d + j) - mu[j];
      vals[j] += c * c;
    }
  for (std::size_t j = 0; j < d; ++j) vals[j] /= static_cast<double>(n);
  bool rg = tracked(x);
  Tensor out = make_out({d}, std::move(vals), rg);
  if (rg) {
    auto xd = x.data_, od = out.data_;
    // d var_j / d x_ij = 2 (x_ij - mu_j) / n  (mean term cancels exactly)
    Tape::active()->record([xd, od, mu, n, d]() {
      if (od->grad.empty()) return;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
          double c = xd->values[i * d + j] - mu[j];
          xd->accumulate(i * d + j, od->grad[j] * 2.0 * c / static_cast<double>(n));
        }
    });
  }
  return out;
}

Tensor trace(const Tensor& x) {
  if (x.dim() != 2 || x.shape()[0] != x.shape()[1]) {
    throw ShapeError("trace: expected square matrix, got " + shape_str(x.shape()));
  }
  std::size_t n = x.shape()[0];
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x.at(i * n + i);
  bool rg = tracked(x);
  Tensor out = make_out({1}, {acc}, rg);
  if (rg) {
    auto xd = x.data_, od = out.data_;
    Tape::active()->record([xd, od, n]() {
      if (od->grad.empty()) return;
      for (std::size_t i = 0; i < n; ++i) xd->accumulate(i * n + i, od->grad[0]);
    });
  }
  return out;
}

Tensor frobenius_sq(const Tensor& x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) acc += x.at(i) * x.at(i);
  bool rg = tracked(x);
  Tensor out = make_out({1}, {acc}, rg);
  if (rg) {
    auto xd = x.data_, od = out.data_;
    std::size_t n = x.numel();
    Tape::active()->record([xd, od, n]() {
      if (od->grad.empty()) return;
      double g = od->grad[0];
      for (std::size_t i = 0; i < n; ++i) xd->accumulate(i, g * 2.0 * xd->values[i]);
    });
  }
  return out;
}

namespace {

void require_4d(const Tensor& f, const char* name) {
  if (f.dim() != 4) {
    throw ShapeError(std::string(name) + ": expected [n,C,H,W], got " + shape_str(f.shape()));
  }
}

}  // namespace

Tensor spatial_mean(const Tensor& f) {
  require_4d(f, "spatial_mean");
  std::size_t n = f.shape()[0], c = f.shape()[1], hw = f.shape()[2] * f.shape()[3];
  std::vector<double> vals(n * c, 0.0);
  for (std::size_t i = 0; i < n * c; ++i) {
    for (std::size_t p = 0; p < hw; ++p) vals[i] += f.at(i * hw + p);
    vals[i] /= static_cast<double>(hw);
  }
  bool rg = tracked(f);
  Tensor out = make_out({n, c}, std::move(vals), rg);
  if (rg) {
    auto fd = f.data_, od = out.data_;
    Tape::active()->record([fd, od, n, c, hw]() {
      if (od->grad.empty()) return;
      for (std::size_t i = 0; i < n * c; ++i) {
        double g = od->grad[i] / static_cast<double>(hw);
        for (std::size_t p = 0; p < hw; ++p) fd->accumulate(i * hw + p, g);
      }
    });
  }
  return out;
}

Tensor spatial_var(const Tensor& f) {
  require_4d(f, "spatial_var");
  std::size_t n = f.shape()[0], c = f.shape()[1], hw = f.shape()[2] * f.shape()[3];
  std::vector<double> mu(n * c, 0.0), vals(n * c, 0.0);
  for (std::size_t i = 0; i < n * c; ++i) {
    for (std::size_t p = 0; p < hw; ++p) mu[i] += f.at(i * hw + p);
    mu[i] /= static_cast<double>(hw);
    for (std::size_t p = 0; p < hw; ++p) {
      double d = f.at(i * hw + p) - mu[i];
      vals[i] += d * d;
    }
    vals[i] /= static_cast<double>(hw);
  }
  bool rg = tracked(f);
  Tensor out = make_out({n, c}, std::move(vals), rg);
  if (rg) {
    auto fd = f.data_, od = out.data_;
    Tape::active()->record([fd, od, mu, n, c, hw]() {
      if (od->grad.empty()) return;
      for (std::size_t i = 0; i < n * c; ++i) {
        double g = 2.0 * od->grad[i] / static_cast<double>(hw);
        for (std::size_t p = 0; p < hw; ++p) {
          fd->accumulate(i * hw + p, g * (fd->values[i * hw + p] - mu[i]));
        }
      }
    });
  }
  return out;
}

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& index) {
  if (x.dim() != 2) throw ShapeError("gather_rows: expected 2-D, got " + shape_str(x.shape()));
  std::size_t n = x.shape()[0], d = x.shape()[1];
  if (index.size() != n) {
    throw ShapeError("gather_rows: index size " + std::to_string(index.size()) +
                     " does not match row count " + std::to_string(n));
  }
  std::vector<double> vals(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    if (index[i] >= n) throw ValueError("gather_rows: index out of range");
    for (std::size_t j = 0; j < d; ++j) vals[i * d + j] = x.at(index[i] * d + j);
  }
  bool rg = tracked(x);
  Tensor out = make_out({n, d}, std::move(vals), rg);
  if (rg) {
    auto xd = x.data_, od = out.data_;
    auto idx = index;
    Tape::active()->record([xd, od, idx, n, d]() {
      if (od->grad.empty()) return;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) xd->accumulate(idx[i] * d + j, od->grad[i * d + j]);
    });
  }
  return out;
}

Tensor channel_affine(const Tensor& f, const Tensor& center, const Tensor& scale,
                      const Tensor& shift) {
  require_4d(f, "channel_affine");
  std::size_t n = f.shape()[0], c = f.shape()[1], hw = f.shape()[2] * f.shape()[3];
  Shape nc{n, c};
  if (center.shape() != nc || scale.shape() != nc || shift.shape() != nc) {
    throw ShapeError("channel_affine: statistics must be [n,C]=" + shape_str(nc));
  }
  std::vector<double> vals(n * c * hw);
  for (std::size_t i = 0; i < n * c; ++i) {
    double ce = center.at(i), sc = scale.at(i), sh = shift.at(i);
    for (std::size_t p = 0; p < hw; ++p) {
      vals[i * hw + p] = (f.at(i * hw + p) - ce) * sc + sh;
    }
  }
  bool rg = tracked(f) || tracked(center) || tracked(scale) || tracked(shift);
  Tensor out = make_out(f.shape(), std::move(vals), rg);
  if (rg) {
    auto fd = f.data_, cd = center.data_, sd = scale.data_, hd = shift.data_, od = out.data_;
    bool gf = f.requires_grad(), gc = center.requires_grad(), gs = scale.requires_grad(),
         gh = shift.requires_grad();
    Tape::active()->record([fd, cd, sd, hd, od, gf, gc, gs, gh, n, c, hw]() {
      if (od->grad.empty()) return;
      for (std::size_t i = 0; i < n * c; ++i) {
        double sc = sd->values[i], ce = cd->values[i];
        double acc_g = 0.0, acc_gx = 0.0;
        for (std::size_t p = 0; p < hw; ++p) {
          double g = od->grad[i * hw + p];
          if (gf) fd->accumulate(i * hw + p, g * sc);
          acc_g += g;
          acc_gx += g * (fd->values[i * hw + p] - ce);
        }
        if (gc) cd->accumulate(i, -acc_g * sc);
        if (gs) sd->accumulate(i, acc_gx);
        if (gh) hd->accumulate(i, acc_g);
      }
    });
  }
  return out;
}

Tensor gram(const Tensor& f) {
  require_4d(f, "gram");
  std::size_t n = f.shape()[0], c = f.shape()[1], hw = f.shape()[2] * f.shape()[3];
  double norm = 1.0 / static_cast<double>(c * hw);
  std::vector<double> vals(n * c * c, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* base = f.values().data() + i * c * hw;
    for (std::size_t a = 0; a < c; ++a)
      for (std::size_t b = 0; b < c; ++b) {
        double acc = 0.0;
        for (std::size_t p = 0; p < hw; ++p) acc += base[a * hw + p] * base[b * hw + p];
        vals[(i * c + a) * c + b] = acc * norm;
      }
  }
  bool rg = tracked(f);
  Tensor out = make_out({n, c, c}, std::move(vals), rg);
  if (rg) {
    auto fd = f.data_, od = out.data_;
    Tape::active()->record([fd, od, n, c, hw, norm]() {
      if (od->grad.empty()) return;
      for (std::size_t i = 0; i < n; ++i) {
        const double* base = fd->values.data() + i * c * hw;
        const double* g = od->grad.data() + i * c * c;
        for (std::size_t a = 0; a < c; ++a)
          for (std::size_t p = 0; p < hw; ++p) {
            double acc = 0.0;
            for (std::size_t b = 0; b < c; ++b) {
              acc += (g[a * c + b] + g[b * c + a]) * base[b * hw + p];
            }
            fd->accumulate(i * c * hw + a * hw + p, acc * norm);
          }
      }
    });
  }
  return out;
}

Tensor pairwise_sqdist(const Tensor& z) {
  if (z.dim() != 2) throw ShapeError("pairwise_sqdist: expected 2-D, got " + shape_str(z.shape()));
  std::size_t n = z.shape()[0], d = z.shape()[1];
  std::vector<double> vals(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        double c = z.at(i * d + k) - z.at(j * d + k);
        acc += c * c;
      }
      vals[i * n + j] = acc;
    }
  bool rg = tracked(z);
  Tensor out = make_out({n, n}, std::move(vals), rg);
  if (rg) {
    auto zd = z.data_, od = out.data_;
    Tape::active()->record([zd, od, n, d]() {
      if (od->grad.empty()) return;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          double g = od->grad[i * n + j] + od->grad[j * n + i];
          if (g == 0.0) continue;
          for (std::size_t k = 0; k < d; ++k) {
            double c = zd->values[i * d + k] - zd->values[j * d + k];
            zd->accumulate(i * d + k, g * 2.0 * c);
          }
        }
    });
  }
  return out;
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.dim() != 2) {
    throw ShapeError("softmax_cross_entropy: expected 2-D logits, got " +
                     shape_str(logits.shape()));
  }
  std::size_t n = logits.shape()[0], k = logits.shape()[1];
  if (labels.size() != n) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(n) + " rows");
  }
  std::vector<double> softmax(n * k);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw ValueError("softmax_cross_entropy: label " + std::to_string(y) +
                       " outside [0," + std::to_string(k) + ")");
    }
    double m = logits.at(i * k);
    for (std::size_t j = 1; j < k; ++j) m = std::max(m, logits.at(i * k + j));
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(logits.at(i * k + j) - m);
    double lse = m + std::log(z);
    loss += lse - logits.at(i * k + static_cast<std::size_t>(y));
    for (std::size_t j = 0; j < k; ++j) {
      softmax[i * k + j] = std::exp(logits.at(i * k + j) - m) / z;
    }
  }
  loss /= static_cast<double>(n);
  bool rg = tracked(logits);
  Tensor out = make_out({1}, {loss}, rg);
  if (rg) {
    auto ld = logits.data_, od = out.data_;
    auto y = labels;
    auto sm = std::move(softmax);
    Tape::active()->record([ld, od, y, sm, n, k]() {
      if (od->grad.empty()) return;
      double g = od->grad[0] / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) {
          double ind = (static_cast<std::size_t>(y[i]) == j) ? 1.0 : 0.0;
          ld->accumulate(i * k + j, g * (sm[i * k + j] - ind));
        }
    });
  }
  return out;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride,
              std::size_t pad) {
  if (x.dim() != 4 || w.dim() != 4) {
    throw ShapeError("conv2d: expected 4-D input and weights, got " + shape_str(x.shape()) +
                     " and " + shape_str(w.shape()));
  }
  std::size_t n = x.shape()[0], ic = x.shape()[1], h = x.shape()[2], ww = x.shape()[3];
  std::size_t oc = w.shape()[0], kic = w.shape()[1], kh = w.shape()[2], kw = w.shape()[3];
  if (ic != kic) {
    throw ShapeError("conv2d: input channels " + std::to_string(ic) +
                     " != weight channels " + std::to_string(kic));
  }
  if (b.dim() != 1 || b.shape()[0] != oc) {
    throw ShapeError("conv2d: bias must be [" + std::to_string(oc) + "]");
  }
  if (stride == 0) throw ValueError("conv2d: stride must be positive");
  if (h + 2 * pad < kh || ww + 2 * pad < kw) {
    throw ShapeError("conv2d: kernel larger than padded input");
  }
  std::size_t oh = (h + 2 * pad - kh) / stride + 1;
  std::size_t ow = (ww + 2 * pad - kw) / stride + 1;

  std::vector<double> vals(n * oc * oh * ow);
  auto xat = [&](std::size_t ni, std::size_t ci, long ih, long iw) -> double {
    if (ih < 0 || iw < 0 || ih >= static_cast<long>(h) || iw >= static_cast<long>(ww)) return 0.0;
    return x.at(((ni * ic + ci) * h + static_cast<std::size_t>(ih)) * ww +
                static_cast<std::size_t>(iw));
  };
  for (std::size_t ni = 0; ni < n; ++ni)
    for (std::size_t co = 0; co < oc; ++co)
      for (std::size_t yo = 0; yo < oh; ++yo)
        for (std::size_t xo = 0; xo < ow; ++xo) {
          double acc = b.at(co);
          for (std::size_t ci = 0; ci < ic; ++ci)
            for (std::size_t ky = 0; ky < kh; ++ky)
              for (std::size_t kx = 0; kx < kw; ++kx) {
                long ih = static_cast<long>(yo * stride + ky) - static_cast<long>(pad);
                long iw = static_cast<long>(xo * stride + kx) - static_cast<long>(pad);
                acc += xat(ni, ci, ih, iw) * w.at(((co * ic + ci) * kh + ky) * kw + kx);
              }
          vals[((ni * oc + co) * oh + yo) * ow + xo] = acc;
        }

  bool rg = tracked(x) || tracked(w) || tracked(b);
  Tensor out = make_out({n, oc, oh, ow}, std::move(vals), rg);
  if (rg) {
    auto xd = x.data_, wd = w.data_, bd = b.data_, od = out.data_;
    bool gx = x.requires_grad(), gw = w.requires_grad(), gb = b.requires_grad();
    Tape::active()->record([xd, wd, bd, od, gx, gw, gb, n, ic, h, ww, oc, kh, kw, oh, ow, stride,
                            pad]() {
      if (od->grad.empty()) return;
      for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t co = 0; co < oc; ++co)
          for (std::size_t yo = 0; yo < oh; ++yo)
            for (std::size_t xo = 0; xo < ow; ++xo) {
              double g = od->grad[((ni * oc + co) * oh + yo) * ow + xo];
              if (g == 0.0) continue;
              if (gb) bd->accumulate(co, g);
              for (std::size_t ci = 0; ci < ic; ++ci)
                for (std::size_t ky = 0; ky < kh; ++ky)
                  for (std::size_t kx = 0; kx < kw; ++kx) {
                    long ih = static_cast<long>(yo * stride + ky) - static_cast<long>(pad);
                    long iw = static_cast<long>(xo * stride + kx) - static_cast<long>(pad);
                    if (ih < 0 || iw < 0 || ih >= static_cast<long>(h) ||
                        iw >= static_cast<long>(ww)) {
                      continue;
                    }
                    std::size_t xi = ((ni * ic + ci) * h + static_cast<std::size_t>(ih)) * ww +
                                     static_cast<std::size_t>(iw);
                    std::size_t wi = ((co * ic + ci) * kh + ky) * kw + kx;
                    if (gw) wd->accumulate(wi, g * xd->values[xi]);
                    if (gx) xd->accumulate(xi, g * wd->values[wi]);
                  }
            }
    });
  }
  return out;
}

std::vector<int> argmax_rows(const Tensor& x) {
  if (x.dim() != 2) throw ShapeError("argmax_rows: expected 2-D, got " + shape_str(x.shape()));
  std::size_t n = x.shape()[0], k = x.shape()[1];
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (x.at(i * k + j) > x.at(i * k + best)) best = j;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

void check_finite(const Tensor& x, const char* what) {
  for (std::size_t i = 0; i < x.numel(); ++i) {
    if (!std::isfinite(x.at(i))) {
      throw NumericError(std::string(what) + ": non-finite value at flat index " +
                         std::to_string(i));
    }
  }
}

}  // namespace ops
}  // namespace hcd
