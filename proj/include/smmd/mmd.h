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

// Squared maximum mean discrepancy between two batches of hidden
// representations, in plaintext and across parties under encryption.
//
// The plaintext estimator is the biased V-statistic
//
//   MMD^2 = 1/Ns^2 sum k(s_i, s_i') + 1/Nt^2 sum k(t_j, t_j')
//           - 2/(Ns Nt) sum k(s_i, t_j)
//
// Under encryption each party evaluates its own-domain double sum in the
// clear; only the cross sum needs the peer, which sends encrypted monomials.

#ifndef SMMD_MMD_H_
#define SMMD_MMD_H_

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "smmd/fixed_point.h"
#include "smmd/he.h"
#include "smmd/kernels.h"

namespace smmd::mmd {

using Eigen::MatrixXd;
using kernels::KernelSpec;

// One party's rows at one aligned layer. Rows of the source and target
// batches with equal index belong to the same co-occurring sample.
struct HiddenBatch {
  MatrixXd reps;
  int layer_index = 0;
};

enum class Side { kSource, kTarget };

// sum_i sum_j k(a_i, b_j).
double KernelSum(const MatrixXd& a, const MatrixXd& b, const KernelSpec& spec);
// Row i: sum_j dk(a_i, b_j)/da_i.
MatrixXd KernelSumGradRows(const MatrixXd& a, const MatrixXd& b,
                           const KernelSpec& spec);
// Pair-by-pair versions of the two above.
double KernelSumPairwise(const MatrixXd& a, const MatrixXd& b, const KernelSpec& spec);
MatrixXd KernelSumGradRowsPairwise(const MatrixXd& a, const MatrixXd& b,
                                   const KernelSpec& spec);

double Mmd2Plain(const HiddenBatch& source, const HiddenBatch& target,
                 const KernelSpec& spec);
// dMMD^2/dh for every row of the chosen side, including both argument
// positions of the own-domain term.
MatrixXd Mmd2GradHidden(const HiddenBatch& source, const HiddenBatch& target,
                        const KernelSpec& spec, Side wrt);

// Row-major matrix of ciphertexts. `scale` counts the 2^f factors the
// plaintexts carry.
struct EncryptedMatrix {
  int rows = 0;
  int cols = 0;
  int scale = 0;
  std::string key_id;
  std::vector<he::Ciphertext> values;

  const he::Ciphertext& at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

struct EncryptedMonomialBatch {
  int layer_index = 0;
  int dim = 0;
  int monomial_count = 0;
  int scale = 1;
  // Number of hidden rows represented; equals rows.size() unless the rows
  // were summed before encryption.
  int source_rows = 0;
  std::string key_id;
  std::vector<std::vector<he::Ciphertext>> rows;
};

enum class RowMode {
  kPerRow,  // one encrypted monomial vector per hidden row
  kSummed,  // monomials summed over rows in the clear, then encrypted once
};

// Element-wise encryption of MonomialFeatures for each row.
EncryptedMonomialBatch EncryptMonomialBatch(const HiddenBatch& batch,
                                            const KernelSpec& spec,
                                            const he::PublicKey& pk,
                                            const he::FixedPointParams& params,
                                            he::RandomStream& rng,
                                            RowMode mode = RowMode::kPerRow);
// Same, for the key owner (CRT-accelerated encryption).
EncryptedMonomialBatch EncryptMonomialBatch(const HiddenBatch& batch,
                                            const KernelSpec& spec,
                                            const he::KeyPair& key,
                                            const he::FixedPointParams& params,
                                            he::RandomStream& rng,
                                            RowMode mode = RowMode::kPerRow);

// One ciphertext under the peer key decrypting (at scale 2) to
// sum_i sum_j k(own_i, peer_j). Touches peer data only through Add and
// MulPlain; the signature carries no secret key.
he::Ciphertext SecureCrossKernelSum(const HiddenBatch& own,
                                    const EncryptedMonomialBatch& peer,
                                    const KernelSpec& spec,
                                    const he::PublicKey& pk_peer,
                                    const he::FixedPointParams& params);

// N x dim ciphertexts under the peer key; row i decrypts (at scale 2) to
// sum_j dk(own_i, peer_j)/d own_i.
EncryptedMatrix SecureMmdGradRows(const HiddenBatch& own,
                                  const EncryptedMonomialBatch& peer,
                                  const KernelSpec& spec,
                                  const he::PublicKey& pk_peer,
                                  const he::FixedPointParams& params);

}  // namespace smmd::mmd

#endif  // SMMD_MMD_H_
