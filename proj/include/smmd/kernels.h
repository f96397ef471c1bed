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

// Kernel functions for the alignment loss and their bilinear decomposition.
//
// Every kernel that can be evaluated across parties is written as
//
//     k(x, y) = sum_t a_t(x) * m_t(y)
//
// where m(y) is a vector of monomials of the peer's representation and a(x) a
// vector of plaintext coefficients of one's own. The peer encrypts m(y); the
// owner of x combines the ciphertexts with a(x) using only homomorphic
// addition and plaintext scaling. Linear and c = 0 polynomial kernels
// decompose exactly; the Gaussian decomposes after truncating exp(-t) to
// 1 - t + t^2/2 with t = |x - y|^2 / (2 sigma^2).

#ifndef SMMD_KERNELS_H_
#define SMMD_KERNELS_H_

#include <Eigen/Dense>

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "smmd/fixed_point.h"
#include "smmd/he.h"

namespace smmd::kernels {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using VectorRef = Eigen::Ref<const VectorXd>;

enum class Family { kLinear, kPolynomial, kGaussian };
enum class Mode { kExact, kTaylor2 };

std::string_view FamilyName(Family family);
std::string_view ModeName(Mode mode);
Family ParseFamily(std::string_view name);
Mode ParseMode(std::string_view name);

struct KernelSpec {
  Family family = Family::kLinear;
  double c = 0.0;     // polynomial offset
  int degree = 2;     // polynomial degree
  double sigma = 1.0; // Gaussian bandwidth
  Mode mode = Mode::kExact;

  // Throws kConfig for invalid combinations.
  void Validate() const;
  // Linear, polynomial with c = 0 and d <= 3, or Gaussian in taylor2 mode.
  bool SecureEvaluable() const;
  std::string ToString() const;

  static KernelSpec Linear() { return {}; }
  static KernelSpec Polynomial(int degree, double c = 0.0) {
    return {Family::kPolynomial, c, degree, 1.0, Mode::kExact};
  }
  static KernelSpec Gaussian(double sigma, Mode mode = Mode::kExact) {
    return {Family::kGaussian, 0.0, 2, sigma, mode};
  }

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

void to_json(nlohmann::json& j, const KernelSpec& spec);
void from_json(const nlohmann::json& j, KernelSpec& spec);

double EvalKernel(const KernelSpec& spec, const VectorRef& x,
                  const VectorRef& y);
// dk(x, y)/dx.
VectorXd KernelGradX(const KernelSpec& spec, const VectorRef& x,
                     const VectorRef& y);

// Median of pairwise distances over the rows of `points`; a bandwidth
// heuristic the harness can opt into.
double MedianHeuristicSigma(const MatrixXd& points);

enum class MonomialKind {
  kConstant,     // 1
  kProduct,      // prod_{i in indices} v_i
  kNormSq,       // |v|^2
  kNormSqSquared,// |v|^4
  kNormSqTimes,  // |v|^2 * v_{indices[0]}
};

struct Monomial {
  MonomialKind kind;
  std::vector<int> indices;
};

// Canonical monomial order for a (kernel, dim) pair. Both parties derive it
// from the spec and the dimension alone: the constant first, then index
// tuples in lexicographic order by degree, then (Gaussian only) |v|^2, |v|^4
// and |v|^2 * v_d for d = 0..dim-1.
class MonomialLayout {
 public:
  static MonomialLayout For(const KernelSpec& spec, int dim);

  int dim() const { return dim_; }
  int degree() const { return degree_; }
  int size() const { return static_cast<int>(monomials_.size()); }
  const Monomial& operator[](int t) const { return monomials_[t]; }
  std::span<const Monomial> monomials() const { return monomials_; }

 private:
  int dim_ = 0;
  int degree_ = 0;
  std::vector<Monomial> monomials_;
};

// Sparse d a_t(x) / d x_d, grouped by coordinate: entry d lists (t, value).
using CoefficientGradient = std::vector<std::vector<std::pair<int, double>>>;

// Real-valued sides of the decomposition.
std::vector<double> MonomialValues(const MonomialLayout& layout,
                                   const VectorRef& v);
std::vector<double> CoefficientValues(const KernelSpec& spec,
                                      const MonomialLayout& layout,
                                      const VectorRef& x);
CoefficientGradient CoefficientGradients(const KernelSpec& spec,
                                         const MonomialLayout& layout,
                                         const VectorRef& x);

struct MonomialVector {
  int degree = 0;
  std::vector<he::BigInt> entries;  // fixed-point, scale 1
};

// Encoded monomials of v, ready for element-wise encryption. Throws kRange if
// a product overflows the fixed-point range and kConfig if the spec has no
// secure form.
MonomialVector MonomialFeatures(const KernelSpec& spec, const VectorRef& v,
                                const he::FixedPointParams& params);
// Encoded coefficients a(x), scale 1.
std::vector<he::BigInt> KernelCoefficients(const KernelSpec& spec,
                                           const VectorRef& x,
                                           const he::FixedPointParams& params);
// <a(x), m(y)> computed in the plaintext ring and decoded at scale 2. Agrees
// with EvalKernel (taylor2 for the Gaussian) to within 2^(-f+4).
double BilinearCheck(const KernelSpec& spec, const VectorRef& x,
                     const VectorRef& y, const he::FixedPointParams& params);

}  // namespace smmd::kernels

#endif  // SMMD_KERNELS_H_
