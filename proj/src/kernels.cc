/*
 * Copyright 2026 The SMMD Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "smmd/kernels.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "smmd/error.h"

namespace smmd::kernels {

namespace {

void RequireSameDim(const VectorRef& x, const VectorRef& y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::kDomain, "kernel arguments differ in dimension (" +
                                        std::to_string(x.size()) + " vs " +
                                        std::to_string(y.size()) + ")");
  }
}

bool UsesLinearLayout(const KernelSpec& spec) {
  return spec.family == Family::kLinear ||
         (spec.family == Family::kPolynomial && spec.degree == 1);
}

void RequireSecure(const KernelSpec& spec) {
  spec.Validate();
  if (!spec.SecureEvaluable()) {
    if (spec.family == Family::kPolynomial && spec.c != 0.0) {
      throw Error(ErrorCode::kConfig, "polynomial secure mode requires c=0");
    }
    throw Error(ErrorCode::kConfig,
                "kernel " + spec.ToString() + " has no secure decomposition");
  }
}

// Index tuples i_1 <= ... <= i_k over [0, dim), lexicographic.
void AppendTuples(int dim, int k, std::vector<Monomial>& out) {
  std::vector<int> tuple(k, 0);
  std::function<void(int, int)> rec = [&](int pos, int start) {
    if (pos == k) {
      out.push_back({MonomialKind::kProduct, tuple});
      return;
    }
    for (int i = start; i < dim; ++i) {
      tuple[pos] = i;
      rec(pos + 1, i);
    }
  };
  rec(0, 0);
}

// d! / prod(multiplicity!) for a sorted tuple.
double Multinomial(const std::vector<int>& tuple) {
  double num = 1.0;
  for (std::size_t i = 2; i <= tuple.size(); ++i) num *= static_cast<double>(i);
  double den = 1.0;
  std::size_t run = 1;
  for (std::size_t i = 1; i <= tuple.size(); ++i) {
    if (i < tuple.size() && tuple[i] == tuple[i - 1]) {
      ++run;
    } else {
      for (std::size_t r = 2; r <= run; ++r) den *= static_cast<double>(r);
      run = 1;
    }
  }
  return num / den;
}

double Product(const VectorRef& v, const std::vector<int>& indices) {
  double p = 1.0;
  for (int i : indices) p *= v[i];
  return p;
}

}  // namespace

std::string_view FamilyName(Family family) {
  switch (family) {
    case Family::kLinear: return "linear";
    case Family::kPolynomial: return "polynomial";
    case Family::kGaussian: return "gaussian";
  }
  return "?";
}

std::string_view ModeName(Mode mode) {
  return mode == Mode::kExact ? "exact" : "taylor2";
}

Family ParseFamily(std::string_view name) {
  if (name == "linear") return Family::kLinear;
  if (name == "polynomial" || name == "poly") return Family::kPolynomial;
  if (name == "gaussian" || name == "rbf") return Family::kGaussian;
  throw Error(ErrorCode::kConfig, "unknown kernel family '" + std::string(name) + "'");
}

Mode ParseMode(std::string_view name) {
  if (name == "exact") return Mode::kExact;
  if (name == "taylor2") return Mode::kTaylor2;
  throw Error(ErrorCode::kConfig, "unknown kernel mode '" + std::string(name) + "'");
}

void KernelSpec::Validate() const {
  if (mode == Mode::kTaylor2 && family != Family::kGaussian) {
    throw Error(ErrorCode::kConfig, "taylor2 mode applies to the gaussian kernel only");
  }
  if (family == Family::kGaussian && !(sigma > 0.0 && std::isfinite(sigma))) {
    throw Error(ErrorCode::kConfig, "gaussian kernel requires sigma > 0");
  }
  if (family == Family::kPolynomial && (degree < 1 || degree > 3)) {
    throw Error(ErrorCode::kConfig, "polynomial degree must be 1, 2 or 3");
  }
  if (!std::isfinite(c)) throw Error(ErrorCode::kConfig, "non-finite polynomial offset");
}

bool KernelSpec::SecureEvaluable() const {
  switch (family) {
    case Family::kLinear: return true;
    case Family::kPolynomial: return c == 0.0 && degree >= 1 && degree <= 3;
    case Family::kGaussian: return mode == Mode::kTaylor2;
  }
  return false;
}

std::string KernelSpec::ToString() const {
  std::ostringstream os;
  switch (family) {
    case Family::kLinear: os << "linear"; break;
    case Family::kPolynomial: os << "poly(c=" << c << ",d=" << degree << ")"; break;
    case Family::kGaussian:
      os << "gaussian(sigma=" << sigma << "," << ModeName(mode) << ")";
      break;
  }
  return os.str();
}

void to_json(nlohmann::json& j, const KernelSpec& spec) {
  j = nlohmann::json{{"family", FamilyName(spec.family)},
                     {"c", spec.c},
                     {"d", spec.degree},
                     {"sigma", spec.sigma},
                     {"mode", ModeName(spec.mode)}};
}

void from_json(const nlohmann::json& j, KernelSpec& spec) {
  spec.family = ParseFamily(j.at("family").get<std::string>());
  spec.c = j.value("c", 0.0);
  spec.degree = j.value("d", 2);
  spec.sigma = j.value("sigma", 1.0);
  spec.mode = ParseMode(j.value("mode", std::string("exact")));
}

double EvalKernel(const KernelSpec& spec, const VectorRef& x,
                  const VectorRef& y) {
  RequireSameDim(x, y);
  switch (spec.family) {
    case Family::kLinear:
      return x.dot(y);
    case Family::kPolynomial:
      return std::pow(x.dot(y) + spec.c, spec.degree);
    case Family::kGaussian: {
      const double t = (x - y).squaredNorm() / (2.0 * spec.sigma * spec.sigma);
      if (spec.mode == Mode::kExact) return std::exp(-t);
      return 1.0 - t + 0.5 * t * t;
    }
  }
  return 0.0;
}

VectorXd KernelGradX(const KernelSpec& spec, const VectorRef& x,
                     const VectorRef& y) {
  RequireSameDim(x, y);
  switch (spec.family) {
    case Family::kLinear:
      return y;
    case Family::kPolynomial:
      return spec.degree * std::pow(x.dot(y) + spec.c, spec.degree - 1) * y;
    case Family::kGaussian: {
      const double s2 = spec.sigma * spec.sigma;
      const VectorXd diff = x - y;
      const double t = diff.squaredNorm() / (2.0 * s2);
      if (spec.mode == Mode::kExact) return -std::exp(-t) * diff / s2;
      return (-1.0 + t) * diff / s2;
    }
  }
  return VectorXd::Zero(x.size());
}

double MedianHeuristicSigma(const MatrixXd& points) {
  std::vector<double> d;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < points.rows(); ++j) {
      d.push_back((points.row(i) - points.row(j)).norm());
    }
  }
  if (d.empty()) throw Error(ErrorCode::kDomain, "need at least two points");
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid > 0.0 ? *mid : 1.0;
}

MonomialLayout MonomialLayout::For(const KernelSpec& spec, int dim) {
  RequireSecure(spec);
  if (dim <= 0) throw Error(ErrorCode::kDomain, "dimension must be positive");
  MonomialLayout layout;
  layout.dim_ = dim;
  auto& out = layout.monomials_;
  out.push_back({MonomialKind::kConstant, {}});
  if (UsesLinearLayout(spec)) {
    layout.degree_ = 1;
    AppendTuples(dim, 1, out);
  } else if (spec.family == Family::kPolynomial) {
    layout.degree_ = spec.degree;
    AppendTuples(dim, spec.degree, out);
  } else {
    layout.degree_ = 4;
    AppendTuples(dim, 1, out);
    AppendTuples(dim, 2, out);
    out.push_back({MonomialKind::kNormSq, {}});
    out.push_back({MonomialKind::kNormSqSquared, {}});
    for (int d = 0; d < dim; ++d) out.push_back({MonomialKind::kNormSqTimes, {d}});
  }
  return layout;
}

std::vector<double> MonomialValues(const MonomialLayout& layout,
                                   const VectorRef& v) {
  if (v.size() != layout.dim()) {
    throw Error(ErrorCode::kDomain, "vector dimension does not match layout");
  }
  const double norm_sq = v.squaredNorm();
  std::vector<double> out;
  out.reserve(layout.size());
  for (const Monomial& m : layout.monomials()) {
    switch (m.kind) {
      case MonomialKind::kConstant: out.push_back(1.0); break;
      case MonomialKind::kProduct: out.push_back(Product(v, m.indices)); break;
      case MonomialKind::kNormSq: out.push_back(norm_sq); break;
      case MonomialKind::kNormSqSquared: out.push_back(norm_sq * norm_sq); break;
      case MonomialKind::kNormSqTimes: out.push_back(norm_sq * v[m.indices[0]]); break;
    }
  }
  return out;
}

std::vector<double> CoefficientValues(const KernelSpec& spec,
                                      const MonomialLayout& layout,
                                      const VectorRef& x) {
  if (x.size() != layout.dim()) {
    throw Error(ErrorCode::kDomain, "vector dimension does not match layout");
  }
  std::vector<double> a(layout.size(), 0.0);
  if (spec.family != Family::kGaussian) {
    for (int t = 1; t < layout.size(); ++t) {
      const auto& idx = layout[t].indices;
      a[t] = Multinomial(idx) * Product(x, idx);
    }
    return a;
  }
  // Expansion of 1 - t + t^2/2 with t = s(P + R - 2Q), s = 1/(2 sigma^2),
  // P = |x|^2, R = |y|^2, Q = x.y.
  const double s = 1.0 / (2.0 * spec.sigma * spec.sigma);
  const double p = x.squaredNorm();
  for (int t = 0; t < layout.size(); ++t) {
    const Monomial& m = layout[t];
    switch (m.kind) {
      case MonomialKind::kConstant:
        a[t] = 1.0 - s * p + 0.5 * s * s * p * p;
        break;
      case MonomialKind::kProduct:
        if (m.indices.size() == 1) {
          a[t] = (2.0 * s - 2.0 * s * s * p) * x[m.indices[0]];
        } else {
          a[t] = 2.0 * s * s * Multinomial(m.indices) * Product(x, m.indices);
        }
        break;
      case MonomialKind::kNormSq: a[t] = -s + s * s * p; break;
      case MonomialKind::kNormSqSquared: a[t] = 0.5 * s * s; break;
      case MonomialKind::kNormSqTimes: a[t] = -2.0 * s * s * x[m.indices[0]]; break;
    }
  }
  return a;
}

CoefficientGradient CoefficientGradients(const KernelSpec& spec,
                                         const MonomialLayout& layout,
                                         const VectorRef& x) {
  const int dim = layout.dim();
  if (x.size() != dim) {
    throw Error(ErrorCode::kDomain, "vector dimension does not match layout");
  }
  CoefficientGradient grad(dim);
  // d/dx_j of c * x^alpha for a sorted index tuple.
  auto add_product_terms = [&](int t, double scale) {
    const auto& idx = layout[t].indices;
    for (std::size_t pos = 0; pos < idx.size(); ++pos) {
      if (pos > 0 && idx[pos] == idx[pos - 1]) continue;
      const int j = idx[pos];
      int multiplicity = 0;
      double rest = 1.0;
      bool removed = false;
      for (int i : idx) {
        if (i == j) {
          ++multiplicity;
          if (!removed) {
            removed = true;
            continue;
          }
        }
        rest *= x[i];
      }
      grad[j].emplace_back(t, scale * multiplicity * rest);
    }
  };

  if (spec.family != Family::kGaussian) {
    for (int t = 1; t < layout.size(); ++t) {
      add_product_terms(t, Multinomial(layout[t].indices));
    }
    return grad;
  }

  const double s = 1.0 / (2.0 * spec.sigma * spec.sigma);
  const double p = x.squaredNorm();
  for (int t = 0; t < layout.size(); ++t) {
    const Monomial& m = layout[t];
    switch (m.kind) {
      case MonomialKind::kConstant:
        for (int d = 0; d < dim; ++d) {
          grad[d].emplace_back(t, (-2.0 * s + 2.0 * s * s * p) * x[d]);
        }
        break;
      case MonomialKind::kProduct:
        if (m.indices.size() == 1) {
          const int e = m.indices[0];
          for (int d = 0; d < dim; ++d) {
            double v = -4.0 * s * s * x[d] * x[e];
            if (d == e) v += 2.0 * s - 2.0 * s * s * p;
            grad[d].emplace_back(t, v);
          }
        } else {
          add_product_terms(t, 2.0 * s * s * Multinomial(m.indices));
        }
        break;
      case MonomialKind::kNormSq:
        for (int d = 0; d < dim; ++d) grad[d].emplace_back(t, 2.0 * s * s * x[d]);
        break;
      case MonomialKind::kNormSqSquared:
        break;
      case MonomialKind::kNormSqTimes:
        grad[m.indices[0]].emplace_back(t, -2.0 * s * s);
        break;
    }
  }
  return grad;
}

MonomialVector MonomialFeatures(const KernelSpec& spec, const VectorRef& v,
                                const he::FixedPointParams& params) {
  const MonomialLayout layout = MonomialLayout::For(spec, static_cast<int>(v.size()));
  MonomialVector out;
  out.degree = layout.degree();
  for (double value : MonomialValues(layout, v)) {
    out.entries.push_back(he::EncodeFixed(value, params));
  }
  return out;
}

std::vector<he::BigInt> KernelCoefficients(const KernelSpec& spec,
                                           const VectorRef& x,
                                           const he::FixedPointParams& params) {
  const MonomialLayout layout = MonomialLayout::For(spec, static_cast<int>(x.size()));
  std::vector<he::BigInt> out;
  for (double value : CoefficientValues(spec, layout, x)) {
    out.push_back(he::EncodeFixed(value, params));
  }
  return out;
}

double BilinearCheck(const KernelSpec& spec, const VectorRef& x,
                     const VectorRef& y, const he::FixedPointParams& params) {
  RequireSameDim(x, y);
  const auto a = KernelCoefficients(spec, x, params);
  const auto m = MonomialFeatures(spec, y, params);
  he::BigInt acc = 0;
  for (std::size_t t = 0; t < a.size(); ++t) acc += a[t] * m.entries[t];
  return he::DecodeFixed(he::ToRing(acc, params.modulus), params, 2);
}

}  // namespace smmd::kernels
