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

#include "smmd/party.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "smmd/error.h"

namespace smmd::protocol {

namespace {

using wire::Block;
using wire::MessageKind;

// Position of (d, e), d <= e, in the row-major upper triangle of a dim x dim
// matrix.
int Tri(int d, int e, int dim) {
  if (d > e) std::swap(d, e);
  return d * dim - d * (d - 1) / 2 + (e - d);
}

int TriSize(int dim) { return dim * (dim + 1) / 2; }

std::string LayerName(std::string_view base, int layer_index) {
  return std::string(base) + "/" + std::to_string(layer_index);
}

const Block& FindBlock(const std::vector<Block>& blocks, const std::string& name,
                       int rows, int cols) {
  for (const Block& b : blocks) {
    if (b.name != name) continue;
    if ((rows >= 0 && b.rows != rows) || (cols >= 0 && b.cols != cols)) {
      throw Error(ErrorCode::kProtocol,
                  "block " + name + " is " + std::to_string(b.rows) + "x" +
                      std::to_string(b.cols) + ", expected " + std::to_string(rows) +
                      "x" + std::to_string(cols));
    }
    return b;
  }
  throw Error(ErrorCode::kProtocol, "peer did not send block " + name);
}

std::vector<he::Ciphertext> Ciphertexts(const he::PublicKey& pk, const Block& b) {
  std::vector<he::Ciphertext> out;
  out.reserve(b.values.size());
  for (const auto& v : b.values) out.push_back(he::CiphertextFromValue(pk, v));
  return out;
}

Block CipherBlock(std::string name, int rows, int cols, int scale,
                  const std::vector<he::Ciphertext>& cts) {
  Block b{std::move(name), rows, cols, scale, {}};
  b.values.reserve(cts.size());
  for (const auto& c : cts) b.values.push_back(c.value());
  return b;
}

MatrixXd SelectRows(const MatrixXd& m, std::span<const int> rows) {
  MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= m.rows()) throw Error(ErrorCode::kDomain, "row index out of range");
    out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  }
  return out;
}

}  // namespace

std::string_view RoleName(Role role) { return role == Role::kSource ? "source" : "target"; }

nlohmann::json ProtocolConfig::Echo(const std::vector<int>& aligned_widths, int n_st) const {
  return {{"kernel", kernel},
          {"frac_bits", frac_bits},
          {"int_bits", int_bits},
          {"key_bits", key_bits},
          {"aligned_widths", aligned_widths},
          {"n_st", n_st},
          {"batch_size", batch_size},
          {"batch_seed", batch_seed},
          {"epochs", epochs},
          {"alpha", alpha},
          {"beta", beta},
          {"lr", lr},
          {"row_mode", row_mode == mmd::RowMode::kSummed ? "summed" : "per_row"},
          {"early_stop_tol", early_stop_tol},
          {"early_stop_patience", early_stop_patience}};
}

std::vector<std::vector<int>> EpochBatches(int n, int batch_size, std::uint64_t seed,
                                           int epoch) {
  if (n <= 0) throw Error(ErrorCode::kDomain, "empty co-occurrence set");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (batch_size <= 0 || batch_size >= n) return {order};
  std::mt19937_64 gen(seed ^ (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(epoch + 1)));
  std::shuffle(order.begin(), order.end(), gen);
  std::vector<std::vector<int>> batches;
  for (int start = 0; start < n; start += batch_size) {
    batches.emplace_back(order.begin() + start, order.begin() + std::min(n, start + batch_size));
  }
  return batches;
}

bool EarlyStopper::Update(double loss) {
  if (last_ && std::abs(loss - *last_) < tol_) {
    ++quiet_;
  } else {
    quiet_ = 0;
  }
  last_ = loss;
  return quiet_ >= patience_;
}

MaskBook::Masked MaskBook::Mask(const he::PublicKey& pk_peer, const he::Ciphertext& c,
                                he::RandomStream& rng) {
  he::BigInt r = rng.UniformBelow(pk_peer.n);
  Masked out{he::Add(pk_peer, c, he::Encrypt(pk_peer, r, rng)), next_id_++};
  masks_.emplace(out.id, std::move(r));
  return out;
}

he::BigInt MaskBook::Unmask(std::uint64_t id, const he::BigInt& decrypted,
                            const he::BigInt& modulus) {
  auto it = masks_.find(id);
  if (it == masks_.end()) {
    throw Error(ErrorCode::kMask, "mask " + std::to_string(id) + " is unknown or already used");
  }
  he::BigInt v = he::ToRing(decrypted - it->second, modulus);
  masks_.erase(it);
  return v;
}

struct Party::Forwarded {
  model::LayerActivations acts;
  std::vector<int> aligned;
  int n = 0;
  int top = 0;
  int dim = 0;
  VectorXd labels;
};

Party::Party(Role role, ProtocolConfig config, PartyData data, transport::Transport& link,
             std::uint64_t crypto_seed)
    : role_(role),
      config_(std::move(config)),
      data_(std::move(data)),
      link_(link),
      key_(he::Keygen(config_.key_bits, crypto_seed * 2 + (role == Role::kSource ? 0 : 1))),
      rng_(crypto_seed, role == Role::kSource ? 1 : 2) {
  if (!config_.kernel.SecureEvaluable()) {
    if (config_.kernel.family == kernels::Family::kPolynomial && config_.kernel.c != 0.0) {
      throw Error(ErrorCode::kConfig, "polynomial secure mode requires c=0");
    }
    throw Error(ErrorCode::kConfig, "kernel " + config_.kernel.ToString() +
                                        " cannot be evaluated under encryption");
  }
  if (data_.features.cols() != data_.params.arch.input_dim) {
    throw Error(ErrorCode::kConfig, "feature width does not match the network input");
  }
  if (role_ == Role::kSource && data_.labels.size() != data_.features.rows()) {
    throw Error(ErrorCode::kConfig, "source needs one label per co-occurrence row");
  }
  if (role_ == Role::kTarget && data_.labels.size() != 0) {
    throw Error(ErrorCode::kFirewall, "the target party must not hold labels");
  }
  own_fp_ = he::FixedPointParams::ForKey(key_.public_key, config_.frac_bits, config_.int_bits);
}

void Party::Send(MessageKind kind, nlohmann::json payload, int scale) {
  wire::Message m{kind, send_seq_++, scale, std::move(payload)};
  link_.Send(wire::Serialize(m));
}

wire::Message Party::Expect(MessageKind kind) {
  std::string frame;
  try {
    frame = link_.Recv(config_.timeout);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kDisconnected) {
      throw Error(ErrorCode::kDisconnected, "peer disconnected");
    }
    throw;
  }
  wire::Message m = wire::Deserialize(frame);
  if (m.seq != recv_seq_) {
    throw Error(ErrorCode::kProtocol, "out-of-order frame: expected seq " +
                                          std::to_string(recv_seq_) + ", got " +
                                          std::to_string(m.seq));
  }
  ++recv_seq_;
  const auto last_sent = static_cast<std::int64_t>(send_seq_) - 1;
  if (std::llabs(static_cast<std::int64_t>(m.seq) - last_sent) > 1) {
    throw Error(ErrorCode::kProtocol, "parties are out of lockstep");
  }
  if (m.kind == MessageKind::kAbort) {
    throw Error(ErrorCode::kAbort, "peer aborted: " + m.payload["reason"].get<std::string>());
  }
  if (m.kind != kind) {
    throw Error(ErrorCode::kProtocol, "expected " + std::string(wire::KindName(kind)) +
                                          ", got " + std::string(wire::KindName(m.kind)));
  }
  return m;
}

std::vector<Block> Party::ExpectBlocks(MessageKind kind) {
  const wire::Message m = Expect(kind);
  if (m.payload["round"].get<std::uint64_t>() != round_) {
    throw Error(ErrorCode::kProtocol, "peer is in a different round");
  }
  return wire::BlocksFromPayload(m.payload);
}

void Party::SendAbort(const std::string& reason) noexcept {
  try {
    Send(MessageKind::kAbort, {{"reason", reason}});
  } catch (...) {
  }
}

void Party::Handshake() {
  try {
    const auto& widths = data_.params.arch.l2_layers;
    const int n_st = static_cast<int>(data_.features.rows());
    const nlohmann::json mine = config_.Echo(widths, n_st);
    Send(MessageKind::kHello, {{"role", RoleName(role_)}, {"config", mine}});
    const wire::Message hello = Expect(MessageKind::kHello);
    if (hello.payload["role"] == RoleName(role_)) {
      const std::string reason = "both parties claim the " + std::string(RoleName(role_)) + " role";
      SendAbort(reason);
      throw Error(ErrorCode::kAbort, reason);
    }
    const auto& theirs = hello.payload["config"];
    for (const auto& [key, value] : mine.items()) {
      if (!theirs.contains(key) || theirs[key] != value) {
        const std::string reason = key == "kernel" ? "kernel spec mismatch" : key + " mismatch";
        SendAbort(reason);
        throw Error(ErrorCode::kAbort, reason);
      }
    }

    Send(MessageKind::kPubKey,
         {{"n", he::ToHex(key_.public_key.n)}, {"g", he::ToHex(key_.public_key.g)}});
    const wire::Message pub = Expect(MessageKind::kPubKey);
    const he::BigInt n = he::FromHex(pub.payload["n"].get<std::string>());
    const he::BigInt g = he::FromHex(pub.payload["g"].get<std::string>());
    if (g != n + 1 || mpz_sizeinbase(n.get_mpz_t(), 2) != static_cast<std::size_t>(config_.key_bits) ||
        n == key_.public_key.n) {
      SendAbort("invalid peer public key");
      throw Error(ErrorCode::kAbort, "invalid peer public key");
    }
    peer_pk_ = he::PublicKey::FromModulus(n);
    peer_fp_ = he::FixedPointParams::ForKey(*peer_pk_, config_.frac_bits, config_.int_bits);
    handshaken_ = true;
    round_ = 0;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kAbort && e.code() != ErrorCode::kDisconnected) SendAbort(e.what());
    throw;
  }
}

std::vector<Block> Party::OwnOperands(const Forwarded& fw, const MatrixXd& top,
                                      const VectorXd& labels) {
  std::vector<Block> out;
  for (int l : fw.aligned) {
    const auto enc = mmd::EncryptMonomialBatch({fw.acts.hidden(l), l + 1}, config_.kernel, key_,
                                               *own_fp_, rng_, config_.row_mode);
    std::vector<he::Ciphertext> flat;
    for (const auto& row : enc.rows) flat.insert(flat.end(), row.begin(), row.end());
    out.push_back(CipherBlock(LayerName("mmd_monomials", l + 1),
                              static_cast<int>(enc.rows.size()), enc.monomial_count, 1, flat));
  }
  const int n = fw.n, dim = fw.dim;
  auto enc = [&](double v) { return he::Encrypt(key_, he::EncodeFixed(v, *own_fp_), rng_); };
  std::vector<he::Ciphertext> rows, tri(TriSize(dim));
  rows.reserve(static_cast<std::size_t>(n) * dim);
  if (role_ == Role::kSource) {
    const VectorXd w = model::TranslatorWeights(top, labels);
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < dim; ++d) rows.push_back(enc(-0.5 * labels[i] * w[d]));
    for (int d = 0; d < dim; ++d)
      for (int e = d; e < dim; ++e) tri[Tri(d, e, dim)] = enc(w[d] * w[e]);
    out.push_back(CipherBlock("u", n, dim, 1, rows));
    out.push_back(CipherBlock("ww", 1, TriSize(dim), 1, tri));
  } else {
    const MatrixXd gram = top.transpose() * top;
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < dim; ++d) rows.push_back(enc(top(i, d)));
    for (int d = 0; d < dim; ++d)
      for (int e = d; e < dim; ++e) tri[Tri(d, e, dim)] = enc(gram(d, e));
    out.push_back(CipherBlock("h", n, dim, 1, rows));
    out.push_back(CipherBlock("gram", 1, TriSize(dim), 1, tri));
  }
  return out;
}

void Party::PeerTerms(const Forwarded& fw, const std::vector<Block>& peer,
                      std::vector<Block>& grads, std::vector<Block>& scalars) {
  const he::PublicKey& pk = *peer_pk_;
  const he::FixedPointParams& fp = *peer_fp_;
  const int n = fw.n, dim = fw.dim;
  const auto layout_size = [&](int l) {
    return kernels::MonomialLayout::For(config_.kernel, data_.params.arch.width(l)).size();
  };
  for (int l : fw.aligned) {
    const Block& b = FindBlock(peer, LayerName("mmd_monomials", l + 1), -1, layout_size(l));
    if (b.rows != 1 && b.rows != n) {
      throw Error(ErrorCode::kProtocol, "monomial block has " + std::to_string(b.rows) + " rows");
    }
    mmd::EncryptedMonomialBatch batch;
    batch.layer_index = l + 1;
    batch.dim = data_.params.arch.width(l);
    batch.monomial_count = b.cols;
    batch.scale = 1;
    batch.source_rows = n;
    batch.key_id = pk.key_id;
    const auto cts = Ciphertexts(pk, b);
    for (int r = 0; r < b.rows; ++r) {
      batch.rows.emplace_back(cts.begin() + static_cast<std::ptrdiff_t>(r) * b.cols,
                              cts.begin() + static_cast<std::ptrdiff_t>(r + 1) * b.cols);
    }
    const mmd::HiddenBatch own{fw.acts.hidden(l), l + 1};
    const auto rows = mmd::SecureMmdGradRows(own, batch, config_.kernel, pk, fp);
    grads.push_back(CipherBlock(LayerName("mmd_grad", l + 1), rows.rows, rows.cols, 2, rows.values));
    if (role_ == Role::kSource) {
      const auto k = mmd::SecureCrossKernelSum(own, batch, config_.kernel, pk, fp);
      scalars.push_back(CipherBlock(LayerName("kernel_cross", l + 1), 1, 1, 2, {k}));
    }
  }

  const MatrixXd& top = fw.acts.top();
  using Terms = std::vector<std::pair<std::size_t, he::BigInt>>;
  if (role_ == Role::kTarget) {
    // Under the source key: rows l'(Phi_i) w and the loss cross term.
    const auto u = Ciphertexts(pk, FindBlock(peer, "u", n, dim));
    const auto ww = Ciphertexts(pk, FindBlock(peer, "ww", 1, TriSize(dim)));
    const he::LinearCombiner ww_comb(pk, ww);
    const he::BigInt lift = he::BigInt(1) << config_.frac_bits;
    std::vector<he::Ciphertext> cls;
    cls.reserve(static_cast<std::size_t>(n) * dim);
    Terms terms;
    for (int i = 0; i < n; ++i) {
      for (int d = 0; d < dim; ++d) {
        terms.clear();
        for (int e = 0; e < dim; ++e) {
          if (top(i, e) == 0.0) continue;
          terms.emplace_back(Tri(d, e, dim), he::EncodeFixed(0.25 * top(i, e), fp));
        }
        cls.push_back(he::Add(pk, ww_comb.Combine(std::span<const Terms::value_type>(terms)),
                              he::MulPlain(pk, u[static_cast<std::size_t>(i) * dim + d], lift)));
      }
    }
    grads.push_back(CipherBlock("cls_grad", n, dim, 2, cls));

    std::vector<he::Ciphertext> bases = u;
    bases.insert(bases.end(), ww.begin(), ww.end());
    const he::LinearCombiner all(pk, bases);
    const MatrixXd gram = top.transpose() * top;
    terms.clear();
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < dim; ++d)
        if (top(i, d) != 0.0)
          terms.emplace_back(static_cast<std::size_t>(i) * dim + d, he::EncodeFixed(top(i, d), fp));
    const std::size_t offset = static_cast<std::size_t>(n) * dim;
    for (int d = 0; d < dim; ++d) {
      for (int e = d; e < dim; ++e) {
        const double c = (d == e ? 1.0 : 2.0) / 8.0 * gram(d, e);
        if (c != 0.0) terms.emplace_back(offset + Tri(d, e, dim), he::EncodeFixed(c, fp));
      }
    }
    scalars.push_back(CipherBlock("loss_cross", 1, 1, 2, {all.Combine(std::span<const Terms::value_type>(terms))}));
  } else {
    // Under the target key: V = sum_i l'(Phi_i) h^t_i.
    const auto h = Ciphertexts(pk, FindBlock(peer, "h", n, dim));
    const auto gram = Ciphertexts(pk, FindBlock(peer, "gram", 1, TriSize(dim)));
    std::vector<he::Ciphertext> bases = h;
    bases.insert(bases.end(), gram.begin(), gram.end());
    const he::LinearCombiner all(pk, bases);
    const VectorXd w = model::TranslatorWeights(top, fw.labels);
    std::vector<he::Ciphertext> v;
    const std::size_t offset = static_cast<std::size_t>(n) * dim;
    Terms terms;
    for (int d = 0; d < dim; ++d) {
      terms.clear();
      for (int i = 0; i < n; ++i) {
        terms.emplace_back(static_cast<std::size_t>(i) * dim + d,
                           he::EncodeFixed(-0.5 * fw.labels[i], fp));
      }
      for (int e = 0; e < dim; ++e) {
        if (w[e] != 0.0) terms.emplace_back(offset + Tri(d, e, dim), he::EncodeFixed(0.25 * w[e], fp));
      }
      v.push_back(all.Combine(std::span<const Terms::value_type>(terms)));
    }
    grads.push_back(CipherBlock("translator_grad", 1, dim, 2, v));
  }
}

std::vector<Block> Party::MaskBlocks(const std::vector<Block>& blocks,
                                     std::vector<std::vector<std::uint64_t>>& ids) {
  std::vector<Block> out;
  for (const Block& b : blocks) {
    Block masked{b.name, b.rows, b.cols, b.scale, {}};
    std::vector<std::uint64_t> block_ids;
    for (const auto& v : b.values) {
      const auto m = masks_.Mask(*peer_pk_, he::CiphertextFromValue(*peer_pk_, v), rng_);
      masked.values.push_back(m.ciphertext.value());
      block_ids.push_back(m.id);
    }
    ids.push_back(std::move(block_ids));
    out.push_back(std::move(masked));
  }
  return out;
}

std::vector<Block> Party::DecryptBlocks(const std::vector<Block>& blocks) {
  std::vector<Block> out;
  for (const Block& b : blocks) {
    Block plain{b.name, b.rows, b.cols, b.scale, {}};
    for (const auto& v : b.values) {
      plain.values.push_back(he::Decrypt(key_, he::CiphertextFromValue(key_.public_key, v)));
    }
    out.push_back(std::move(plain));
  }
  return out;
}

RoundMetrics Party::RunRound(std::span<const int> rows) {
  if (!handshaken_) throw Error(ErrorCode::kProtocol, "round before handshake");
  const auto start = transport::Clock::now();
  Forwarded fw;
  const MatrixXd x = SelectRows(data_.features, rows);
  fw.acts = model::Forward(data_.params, x);
  fw.aligned = data_.params.arch.aligned_layers();
  fw.n = static_cast<int>(rows.size());
  fw.top = data_.params.arch.hidden_count() - 1;
  fw.dim = data_.params.arch.top_width();
  if (role_ == Role::kSource) {
    fw.labels.resize(fw.n);
    for (int i = 0; i < fw.n; ++i) fw.labels[i] = data_.labels[rows[i]];
  }
  const MatrixXd& top = fw.acts.top();

  Send(MessageKind::kEncMonomials, wire::BlocksPayload(round_, OwnOperands(fw, top, fw.labels)), 1);
  const std::vector<Block> peer = ExpectBlocks(MessageKind::kEncMonomials);

  std::vector<Block> grads, scalars;
  PeerTerms(fw, peer, grads, scalars);
  std::vector<std::vector<std::uint64_t>> grad_ids, scalar_ids;
  Send(MessageKind::kMaskedGradRequest, wire::BlocksPayload(round_, MaskBlocks(grads, grad_ids)), 2);
  Send(MessageKind::kEncScalar, wire::BlocksPayload(round_, MaskBlocks(scalars, scalar_ids)), 2);

  std::vector<Block> to_decrypt = ExpectBlocks(MessageKind::kMaskedGradRequest);
  const std::vector<Block> peer_scalars = ExpectBlocks(MessageKind::kEncScalar);
  to_decrypt.insert(to_decrypt.end(), peer_scalars.begin(), peer_scalars.end());
  Send(MessageKind::kDecryptedMaskedGrad, wire::BlocksPayload(round_, DecryptBlocks(to_decrypt)), 2);

  // Unmask and decode everything we asked the peer to decrypt.
  const std::vector<Block> answers = ExpectBlocks(MessageKind::kDecryptedMaskedGrad);
  std::vector<Block> asked = grads;
  asked.insert(asked.end(), scalars.begin(), scalars.end());
  std::vector<std::vector<std::uint64_t>> ids = grad_ids;
  ids.insert(ids.end(), scalar_ids.begin(), scalar_ids.end());
  if (answers.size() != asked.size()) {
    throw Error(ErrorCode::kProtocol, "peer answered " + std::to_string(answers.size()) +
                                          " blocks, expected " + std::to_string(asked.size()));
  }
  std::map<std::string, MatrixXd> decoded;
  for (std::size_t b = 0; b < asked.size(); ++b) {
    const Block& a = answers[b];
    if (a.name != asked[b].name || a.rows != asked[b].rows || a.cols != asked[b].cols) {
      throw Error(ErrorCode::kProtocol, "peer answered block " + a.name + " out of order");
    }
    MatrixXd m(a.rows, a.cols);
    for (int r = 0; r < a.rows; ++r) {
      for (int c = 0; c < a.cols; ++c) {
        const std::size_t k = static_cast<std::size_t>(r) * a.cols + c;
        const he::BigInt v = masks_.Unmask(ids[b][k], a.values[k], peer_pk_->n);
        m(r, c) = he::DecodeFixed(v, *peer_fp_, asked[b].scale);
      }
    }
    decoded.emplace(a.name, std::move(m));
  }

  // Local plaintext pieces and the chain rule.
  const double n = fw.n;
  const double n2 = n * n;
  double own_loss = 0.0;
  std::map<int, MatrixXd> dl_dhidden;
  for (int l : fw.aligned) {
    const MatrixXd& h = fw.acts.hidden(l);
    const double self_sum = mmd::KernelSum(h, h, config_.kernel);
    const MatrixXd self_grad = mmd::KernelSumGradRows(h, h, config_.kernel);
    const MatrixXd& cross = decoded.at(LayerName("mmd_grad", l + 1));
    dl_dhidden[l] = config_.alpha * 2.0 / n2 * (self_grad - cross);
    if (role_ == Role::kSource) {
      const double k_st = decoded.at(LayerName("kernel_cross", l + 1))(0, 0);
      own_loss += config_.alpha * (self_sum - 2.0 * k_st) / n2;
    } else {
      own_loss += config_.alpha * self_sum / n2;
    }
  }
  if (role_ == Role::kTarget) {
    dl_dhidden[fw.top] += decoded.at("cls_grad") / n;
    own_loss += (n * std::log(2.0) + decoded.at("loss_cross")(0, 0)) / n;
  } else {
    const VectorXd v = decoded.at("translator_grad").row(0).transpose();
    dl_dhidden[fw.top] += fw.labels * v.transpose() / n2;
  }
  model::ParamGrads reg;
  own_loss += config_.beta / 2.0 * model::L2Reg(data_.params, &reg);

  Send(MessageKind::kLossReport, {{"round", round_}, {"loss", own_loss}});
  const wire::Message report = Expect(MessageKind::kLossReport);
  if (report.payload["round"].get<std::uint64_t>() != round_) {
    throw Error(ErrorCode::kProtocol, "loss report for a different round");
  }
  const double peer_loss = report.payload["loss"].get<double>();
  if (!std::isfinite(own_loss) || !std::isfinite(peer_loss)) {
    throw Error(ErrorCode::kTraining, "non-finite loss in round " + std::to_string(round_));
  }

  model::ParamGrads grads_total = model::Backward(data_.params, fw.acts, VectorXd(), dl_dhidden);
  model::AddScaled(grads_total, reg, config_.beta / 2.0);
  data_.params = model::SgdStep(data_.params, grads_total, config_.lr);

  RoundMetrics metrics;
  metrics.round = round_;
  metrics.rows = fw.n;
  metrics.own_loss = own_loss;
  metrics.peer_loss = peer_loss;
  // Same summation order on both sides so the totals agree bit for bit.
  metrics.total_loss = role_ == Role::kSource ? own_loss + peer_loss : peer_loss + own_loss;
  metrics.wall_ms =
      std::chrono::duration<double, std::milli>(transport::Clock::now() - start).count();
  ++round_;
  return metrics;
}

TrainHistory Party::Train() {
  try {
    if (!handshaken_) Handshake();
    EarlyStopper stopper(config_.early_stop_tol, config_.early_stop_patience);
    const int n = static_cast<int>(data_.features.rows());
    for (int epoch = 0; epoch < config_.epochs; ++epoch) {
      double sum = 0.0;
      const auto batches = EpochBatches(n, config_.batch_size, config_.batch_seed, epoch);
      for (const auto& batch : batches) {
        const RoundMetrics m = RunRound(batch);
        history_.rounds.push_back(m);
        sum += m.total_loss;
      }
      history_.epoch_loss.push_back(sum / static_cast<double>(batches.size()));
      if (stopper.Update(history_.epoch_loss.back())) {
        history_.early_stopped = true;
        break;
      }
    }
    Send(MessageKind::kDone, {{"rounds", round_}});
    const wire::Message done = Expect(MessageKind::kDone);
    if (done.payload["rounds"].get<std::uint64_t>() != round_) {
      throw Error(ErrorCode::kProtocol, "parties finished after different round counts");
    }
    return history_;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kAbort && e.code() != ErrorCode::kDisconnected) SendAbort(e.what());
    throw;
  }
}

TwoPartyResult RunTwoParty(Party& source, Party& target) {
  TwoPartyResult result;
  std::exception_ptr errors[2];
  auto run = [](Party& p, TrainHistory& out, std::exception_ptr& err) {
    try {
      out = p.Train();
    } catch (...) {
      err = std::current_exception();
    }
  };
  std::thread t(run, std::ref(target), std::ref(result.target), std::ref(errors[1]));
  run(source, result.source, errors[0]);
  t.join();
  // Prefer the root cause over the peer's reaction to it.
  std::exception_ptr first;
  for (auto& err : errors) {
    if (!err) continue;
    try {
      std::rethrow_exception(err);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kAbort && e.code() != ErrorCode::kDisconnected) {
        std::rethrow_exception(err);
      }
    } catch (...) {
      std::rethrow_exception(err);
    }
    if (!first) first = err;
  }
  if (first) std::rethrow_exception(first);
  return result;
}

}  // namespace smmd::protocol
