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

#include "smmd/mmd.h"

#include <utility>

#include "smmd/error.h"

namespace smmd::mmd {

namespace {

void RequireBatches(const MatrixXd& a, const MatrixXd& b) {
  if (a.rows() == 0 || b.rows() == 0) {
    throw Error(ErrorCode::kDomain, "MMD needs non-empty batches");
  }
  if (a.cols() != b.cols()) {
    throw Error(ErrorCode::kDomain, "batches differ in dimension");
  }
}

template <typename Key>
EncryptedMonomialBatch EncryptImpl(const HiddenBatch& batch,
                                   const KernelSpec& spec,
                                   const he::PublicKey& pk, const Key& key,
                                   const he::FixedPointParams& params,
                                   he::RandomStream& rng, RowMode mode) {
  if (batch.reps.rows() == 0) throw Error(ErrorCode::kDomain, "empty batch");
  const auto layout =
      kernels::MonomialLayout::For(spec, static_cast<int>(batch.reps.cols()));
  EncryptedMonomialBatch out;
  out.layer_index = batch.layer_index;
  out.dim = layout.dim();
  out.monomial_count = layout.size();
  out.scale = 1;
  out.source_rows = static_cast<int>(batch.reps.rows());
  out.key_id = pk.key_id;

  auto encrypt_row = [&](const std::vector<double>& values) {
    std::vector<he::Ciphertext> row;
    row.reserve(values.size());
    for (double v : values) {
      row.push_back(he::Encrypt(key, he::EncodeFixed(v, params), rng));
    }
    return row;
  };

  if (mode == RowMode::kSummed) {
    std::vector<double> sum(layout.size(), 0.0);
    for (Eigen::Index i = 0; i < batch.reps.rows(); ++i) {
      const Eigen::VectorXd row = batch.reps.row(i).transpose();
      const auto values = kernels::MonomialValues(layout, row);
      for (int t = 0; t < layout.size(); ++t) sum[t] += values[t];
    }
    out.rows.push_back(encrypt_row(sum));
    return out;
  }
  for (Eigen::Index i = 0; i < batch.reps.rows(); ++i) {
    const Eigen::VectorXd row = batch.reps.row(i).transpose();
    out.rows.push_back(encrypt_row(kernels::MonomialValues(layout, row)));
  }
  return out;
}

// Homomorphic sum over the peer rows: S_t = sum_j [[m_t(peer_j)]].
std::vector<he::Ciphertext> AggregatePeer(const EncryptedMonomialBatch& peer,
                                          const kernels::MonomialLayout& layout,
                                          const he::PublicKey& pk_peer) {
  if (peer.key_id != pk_peer.key_id) {
    throw Error(ErrorCode::kKey, "monomial batch is not under the given key");
  }
  if (peer.rows.empty()) throw Error(ErrorCode::kDomain, "empty peer batch");
  if (peer.monomial_count != layout.size() || peer.dim != layout.dim()) {
    throw Error(ErrorCode::kProtocol,
                "peer monomial count " + std::to_string(peer.monomial_count) +
                    " does not match local layout " +
                    std::to_string(layout.size()) + " (kernel spec mismatch)");
  }
  std::vector<he::Ciphertext> sum = peer.rows.front();
  for (std::size_t r = 1; r < peer.rows.size(); ++r) {
    if (peer.rows[r].size() != sum.size()) {
      throw Error(ErrorCode::kProtocol, "ragged monomial batch");
    }
    for (std::size_t t = 0; t < sum.size(); ++t) {
      sum[t] = he::Add(pk_peer, sum[t], peer.rows[r][t]);
    }
  }
  if (sum.size() != static_cast<std::size_t>(layout.size())) {
    throw Error(ErrorCode::kProtocol, "monomial row length mismatch");
  }
  return sum;
}

}  // namespace

namespace {

// k(a_i, b_j) for every pair, from one Gram product.
MatrixXd PairKernel(const MatrixXd& a, const MatrixXd& b, const KernelSpec& spec,
                    MatrixXd* t_out = nullptr) {
  const MatrixXd gram = a * b.transpose();
  switch (spec.family) {
    case kernels::Family::kLinear:
      return gram;
    case kernels::Family::kPolynomial:
      return (gram.array() + spec.c).pow(spec.degree).matrix();
    case kernels::Family::kGaussian: {
      const Eigen::VectorXd na = a.rowwise().squaredNorm();
      const Eigen::RowVectorXd nb = b.rowwise().squaredNorm().transpose();
      MatrixXd t = ((-2.0 * gram).colwise() + na).rowwise() + nb;
      t = t.cwiseMax(0.0) / (2.0 * spec.sigma * spec.sigma);
      MatrixXd k = spec.mode == kernels::Mode::kExact
                       ? MatrixXd((-t.array()).exp())
                       : MatrixXd(1.0 - t.array() + 0.5 * t.array().square());
      if (t_out) *t_out = std::move(t);
      return k;
    }
  }
  return MatrixXd::Zero(a.rows(), b.rows());
}

void RequireSameCols(const MatrixXd& a, const MatrixXd& b) {
  if (a.cols() != b.cols()) {
    throw Error(ErrorCode::kDomain, "kernel arguments differ in dimension (" +
                                        std::to_string(a.cols()) + " vs " +
                                        std::to_string(b.cols()) + ")");
  }
}

}  // namespace

double KernelSum(const MatrixXd& a, const MatrixXd& b, const KernelSpec& spec) {
  RequireSameCols(a, b);
  return PairKernel(a, b, spec).sum();
}

MatrixXd KernelSumGradRows(const MatrixXd& a, const MatrixXd& b,
                           const KernelSpec& spec) {
  RequireSameCols(a, b);
  switch (spec.family) {
    case kernels::Family::kLinear:
      return b.colwise().sum().replicate(a.rows(), 1);
    case kernels::Family::kPolynomial: {
      const MatrixXd coef =
          spec.degree * ((a * b.transpose()).array() + spec.c).pow(spec.degree - 1);
      return coef * b;
    }
    case kernels::Family::kGaussian: {
      // d/da_i sum_j k = sum_j coef_ij (a_i - b_j).
      const double s2 = spec.sigma * spec.sigma;
      MatrixXd t;
      const MatrixXd k = PairKernel(a, b, spec, &t);
      const MatrixXd coef = spec.mode == kernels::Mode::kExact
                                ? MatrixXd(-k / s2)
                                : MatrixXd((t.array() - 1.0) / s2);
      return a.array().colwise() * coef.rowwise().sum().array() - (coef * b).array();
    }
  }
  return MatrixXd::Zero(a.rows(), a.cols());
}

double KernelSumPairwise(const MatrixXd& a, const MatrixXd& b, const KernelSpec& spec) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const Eigen::VectorXd ai = a.row(i).transpose();
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      total += kernels::EvalKernel(spec, ai, b.row(j).transpose());
    }
  }
  return total;
}

MatrixXd KernelSumGradRowsPairwise(const MatrixXd& a, const MatrixXd& b,
                                   const KernelSpec& spec) {
  MatrixXd grad = MatrixXd::Zero(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const Eigen::VectorXd ai = a.row(i).transpose();
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      grad.row(i) += kernels::KernelGradX(spec, ai, b.row(j).transpose()).transpose();
    }
  }
  return grad;
}

double Mmd2Plain(const HiddenBatch& source, const HiddenBatch& target,
                 const KernelSpec& spec) {
  RequireBatches(source.reps, target.reps);
  spec.Validate();
  const double ns = static_cast<double>(source.reps.rows());
  const double nt = static_cast<double>(target.reps.rows());
  return KernelSum(source.reps, source.reps, spec) / (ns * ns) +
         KernelSum(target.reps, target.reps, spec) / (nt * nt) -
         2.0 * KernelSum(source.reps, target.reps, spec) / (ns * nt);
}

MatrixXd Mmd2GradHidden(const HiddenBatch& source, const HiddenBatch& target,
                        const KernelSpec& spec, Side wrt) {
  RequireBatches(source.reps, target.reps);
  spec.Validate();
  const MatrixXd& own = wrt == Side::kSource ? source.reps : target.reps;
  const MatrixXd& other = wrt == Side::kSource ? target.reps : source.reps;
  const double n_own = static_cast<double>(own.rows());
  const double n_other = static_cast<double>(other.rows());
  // The kernels are symmetric, so the two argument positions of the
  // own-domain sum contribute equally.
  return 2.0 * KernelSumGradRows(own, own, spec) / (n_own * n_own) -
         2.0 * KernelSumGradRows(own, other, spec) / (n_own * n_other);
}

EncryptedMonomialBatch EncryptMonomialBatch(const HiddenBatch& batch,
                                            const KernelSpec& spec,
                                            const he::PublicKey& pk,
                                            const he::FixedPointParams& params,
                                            he::RandomStream& rng,
                                            RowMode mode) {
  return EncryptImpl(batch, spec, pk, pk, params, rng, mode);
}

EncryptedMonomialBatch EncryptMonomialBatch(const HiddenBatch& batch,
                                            const KernelSpec& spec,
                                            const he::KeyPair& key,
                                            const he::FixedPointParams& params,
                                            he::RandomStream& rng,
                                            RowMode mode) {
  return EncryptImpl(batch, spec, key.public_key, key, params, rng, mode);
}

he::Ciphertext SecureCrossKernelSum(const HiddenBatch& own,
                                    const EncryptedMonomialBatch& peer,
                                    const KernelSpec& spec,
                                    const he::PublicKey& pk_peer,
                                    const he::FixedPointParams& params) {
  if (own.reps.rows() == 0) throw Error(ErrorCode::kDomain, "empty batch");
  const auto layout =
      kernels::MonomialLayout::For(spec, static_cast<int>(own.reps.cols()));
  const auto sums = AggregatePeer(peer, layout, pk_peer);

  // sum_i sum_j <a(own_i), m(peer_j)> = <sum_i a(own_i), sum_j m(peer_j)>.
  std::vector<double> sum(layout.size(), 0.0);
  for (Eigen::Index i = 0; i < own.reps.rows(); ++i) {
    const Eigen::VectorXd row = own.reps.row(i).transpose();
    const auto a = kernels::CoefficientValues(spec, layout, row);
    for (int t = 0; t < layout.size(); ++t) sum[t] += a[t];
  }
  std::vector<he::BigInt> coeff;
  coeff.reserve(sum.size());
  for (double a : sum) coeff.push_back(he::EncodeFixed(a, params));
  return he::LinearCombiner(pk_peer, sums).Combine(std::span<const he::BigInt>(coeff));
}

EncryptedMatrix SecureMmdGradRows(const HiddenBatch& own,
                                  const EncryptedMonomialBatch& peer,
                                  const KernelSpec& spec,
                                  const he::PublicKey& pk_peer,
                                  const he::FixedPointParams& params) {
  if (own.reps.rows() == 0) throw Error(ErrorCode::kDomain, "empty batch");
  const auto layout =
      kernels::MonomialLayout::For(spec, static_cast<int>(own.reps.cols()));
  const auto sums = AggregatePeer(peer, layout, pk_peer);
  const he::LinearCombiner combiner(pk_peer, sums);

  EncryptedMatrix out;
  out.rows = static_cast<int>(own.reps.rows());
  out.cols = layout.dim();
  out.scale = 2;
  out.key_id = pk_peer.key_id;
  out.values.reserve(static_cast<std::size_t>(out.rows) * out.cols);
  std::vector<std::pair<std::size_t, he::BigInt>> terms;
  for (int i = 0; i < out.rows; ++i) {
    const Eigen::VectorXd row = own.reps.row(i).transpose();
    const auto grad = kernels::CoefficientGradients(spec, layout, row);
    for (int d = 0; d < out.cols; ++d) {
      terms.clear();
      for (const auto& [t, value] : grad[d]) {
        if (value == 0.0) continue;
        terms.emplace_back(static_cast<std::size_t>(t),
                           he::EncodeFixed(value, params));
      }
      out.values.push_back(combiner.Combine(
          std::span<const std::pair<std::size_t, he::BigInt>>(terms)));
    }
  }
  return out;
}

}  // namespace smmd::mmd
