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

// Ordered, reliable delivery of whole frames between the two parties. The
// loopback and TCP implementations are interchangeable; the protocol layer
// only sees Send/Recv.

#ifndef SMMD_TRANSPORT_H_
#define SMMD_TRANSPORT_H_

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace smmd::transport {

using Clock = std::chrono::steady_clock;
inline constexpr std::chrono::milliseconds kDefaultTimeout{600'000};

class Transport {
 public:
  virtual ~Transport() = default;
  // frame includes the 4-byte length prefix.
  virtual void Send(std::string frame) = 0;
  // Throws kDisconnected when the peer has closed and nothing is pending,
  // kTimeout after `timeout`.
  virtual std::string Recv(std::chrono::milliseconds timeout = kDefaultTimeout) = 0;
  virtual void Close() = 0;
};

// In-process pair of queues.
std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> LoopbackPair();

// One TCP connection. Sends are handed to a writer thread so that both
// parties may push large frames at the same time without deadlocking on
// full socket buffers.
class TcpTransport : public Transport {
 public:
  explicit TcpTransport(int fd);
  ~TcpTransport() override;

  void Send(std::string frame) override;
  std::string Recv(std::chrono::milliseconds timeout = kDefaultTimeout) override;
  void Close() override;

 private:
  void WriterLoop();
  bool ReadExact(char* dst, std::size_t n, Clock::time_point deadline);

  int fd_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::string> outbox_;
  bool closing_ = false;
  bool write_failed_ = false;
  std::thread writer_;
};

class TcpListener {
 public:
  // port 0 picks an ephemeral port.
  TcpListener(const std::string& host, int port);
  ~TcpListener();
  int port() const { return port_; }
  std::unique_ptr<Transport> Accept(std::chrono::milliseconds timeout = kDefaultTimeout);

 private:
  int fd_ = -1;
  int port_ = 0;
};

std::unique_ptr<Transport> TcpConnect(const std::string& host, int port,
                                      std::chrono::milliseconds timeout = kDefaultTimeout);

// Keeps a copy of every frame passing through, in either direction.
class RecordingTransport : public Transport {
 public:
  explicit RecordingTransport(std::unique_ptr<Transport> inner)
      : inner_(std::move(inner)) {}

  void Send(std::string frame) override;
  std::string Recv(std::chrono::milliseconds timeout = kDefaultTimeout) override;
  void Close() override { inner_->Close(); }

  std::vector<std::string> sent() const;
  std::vector<std::string> received() const;

 private:
  std::unique_ptr<Transport> inner_;
  mutable std::mutex mu_;
  std::vector<std::string> sent_, received_;
};

}  // namespace smmd::transport

#endif  // SMMD_TRANSPORT_H_
