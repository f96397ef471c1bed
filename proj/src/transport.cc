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

#include "smmd/transport.h"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "smmd/error.h"
#include "smmd/wire.h"

namespace smmd::transport {

namespace {

struct Queue {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::string> frames;
  bool closed = false;
};

class LoopbackEnd : public Transport {
 public:
  LoopbackEnd(std::shared_ptr<Queue> in, std::shared_ptr<Queue> out)
      : in_(std::move(in)), out_(std::move(out)) {}
  ~LoopbackEnd() override { Close(); }

  void Send(std::string frame) override {
    std::lock_guard lock(out_->mu);
    if (out_->closed) throw Error(ErrorCode::kDisconnected, "peer disconnected");
    out_->frames.push_back(std::move(frame));
    out_->cv.notify_all();
  }

  std::string Recv(std::chrono::milliseconds timeout) override {
    std::unique_lock lock(in_->mu);
    if (!in_->cv.wait_for(lock, timeout,
                          [&] { return !in_->frames.empty() || in_->closed; })) {
      throw Error(ErrorCode::kTimeout, "no frame within timeout");
    }
    if (in_->frames.empty()) throw Error(ErrorCode::kDisconnected, "peer disconnected");
    std::string frame = std::move(in_->frames.front());
    in_->frames.pop_front();
    return frame;
  }

  void Close() override {
    for (auto* q : {in_.get(), out_.get()}) {
      std::lock_guard lock(q->mu);
      q->closed = true;
      q->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<Queue> in_, out_;
};

[[noreturn]] void SystemError(const std::string& what) {
  throw Error(ErrorCode::kDisconnected, what + ": " + std::strerror(errno));
}

int RemainingMs(Clock::time_point deadline) {
  const auto left =
      std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
  return left <= 0 ? 0 : static_cast<int>(std::min<long long>(left, 1 << 30));
}

}  // namespace

std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> LoopbackPair() {
  auto a = std::make_shared<Queue>();
  auto b = std::make_shared<Queue>();
  return {std::make_unique<LoopbackEnd>(a, b), std::make_unique<LoopbackEnd>(b, a)};
}

TcpTransport::TcpTransport(int fd) : fd_(fd) {
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  writer_ = std::thread([this] { WriterLoop(); });
}

TcpTransport::~TcpTransport() {
  Close();
  if (writer_.joinable()) writer_.join();
  if (fd_ >= 0) ::close(fd_);
}

void TcpTransport::WriterLoop() {
  for (;;) {
    std::string frame;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return !outbox_.empty() || closing_; });
      if (outbox_.empty()) break;
      frame = std::move(outbox_.front());
      outbox_.pop_front();
    }
    std::size_t off = 0;
    while (off < frame.size()) {
      const ssize_t n = ::send(fd_, frame.data() + off, frame.size() - off, MSG_NOSIGNAL);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        std::lock_guard lock(mu_);
        write_failed_ = true;
        outbox_.clear();
        cv_.notify_all();
        return;
      }
      off += static_cast<std::size_t>(n);
    }
    std::lock_guard lock(mu_);
    cv_.notify_all();
  }
  ::shutdown(fd_, SHUT_WR);
}

void TcpTransport::Send(std::string frame) {
  std::lock_guard lock(mu_);
  if (write_failed_ || closing_) throw Error(ErrorCode::kDisconnected, "peer disconnected");
  outbox_.push_back(std::move(frame));
  cv_.notify_all();
}

bool TcpTransport::ReadExact(char* dst, std::size_t n, Clock::time_point deadline) {
  std::size_t off = 0;
  while (off < n) {
    pollfd pfd{fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, RemainingMs(deadline));
    if (ready < 0 && errno == EINTR) continue;
    if (ready < 0) SystemError("poll");
    if (ready == 0) throw Error(ErrorCode::kTimeout, "no frame within timeout");
    const ssize_t got = ::recv(fd_, dst + off, n - off, 0);
    if (got < 0 && errno == EINTR) continue;
    if (got < 0) {
      if (errno == ECONNRESET) return false;
      SystemError("recv");
    }
    if (got == 0) return false;
    off += static_cast<std::size_t>(got);
  }
  return true;
}

std::string TcpTransport::Recv(std::chrono::milliseconds timeout) {
  const auto deadline = Clock::now() + timeout;
  std::string frame(4, '\0');
  if (!ReadExact(frame.data(), 4, deadline)) {
    throw Error(ErrorCode::kDisconnected, "peer disconnected");
  }
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len = (len << 8) | static_cast<std::uint8_t>(frame[i]);
  if (len == 0) throw Error(ErrorCode::kMalformed, "0-length frame");
  if (len > wire::kMaxFrameBytes) throw Error(ErrorCode::kMalformed, "frame too large");
  frame.resize(4 + static_cast<std::size_t>(len));
  if (!ReadExact(frame.data() + 4, len, deadline)) {
    throw Error(ErrorCode::kDisconnected, "peer disconnected mid-frame");
  }
  return frame;
}

void TcpTransport::Close() {
  {
    std::lock_guard lock(mu_);
    closing_ = true;
    cv_.notify_all();
  }
  // Let queued frames drain before the writer half-closes the socket.
  if (writer_.joinable() && writer_.get_id() != std::this_thread::get_id()) writer_.join();
}

TcpListener::TcpListener(const std::string& host, int port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) SystemError("socket");
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw Error(ErrorCode::kConfig, "listen address must be an IPv4 literal: " + host);
  }
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 ||
      ::listen(fd_, 1) < 0) {
    const int saved = errno;
    ::close(fd_);
    errno = saved;
    SystemError("bind/listen " + host + ":" + std::to_string(port));
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<Transport> TcpListener::Accept(std::chrono::milliseconds timeout) {
  pollfd pfd{fd_, POLLIN, 0};
  const int ready = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
  if (ready == 0) throw Error(ErrorCode::kTimeout, "no peer connected within timeout");
  if (ready < 0) SystemError("poll");
  const int fd = ::accept(fd_, nullptr, nullptr);
  if (fd < 0) SystemError("accept");
  return std::make_unique<TcpTransport>(fd);
}

std::unique_ptr<Transport> TcpConnect(const std::string& host, int port,
                                      std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0) {
    throw Error(ErrorCode::kConfig, "cannot resolve " + host);
  }
  const auto deadline = Clock::now() + timeout;
  for (;;) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) {
      ::freeaddrinfo(res);
      SystemError("socket");
    }
    if (::connect(fd, res->ai_addr, res->ai_addrlen) == 0) {
      ::freeaddrinfo(res);
      return std::make_unique<TcpTransport>(fd);
    }
    ::close(fd);
    if (Clock::now() >= deadline) {
      ::freeaddrinfo(res);
      throw Error(ErrorCode::kTimeout, "could not connect to " + host + ":" + std::to_string(port));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

void RecordingTransport::Send(std::string frame) {
  {
    std::lock_guard lock(mu_);
    sent_.push_back(frame);
  }
  inner_->Send(std::move(frame));
}

std::string RecordingTransport::Recv(std::chrono::milliseconds timeout) {
  std::string frame = inner_->Recv(timeout);
  std::lock_guard lock(mu_);
  received_.push_back(frame);
  return frame;
}

std::vector<std::string> RecordingTransport::sent() const {
  std::lock_guard lock(mu_);
  return sent_;
}

std::vector<std::string> RecordingTransport::received() const {
  std::lock_guard lock(mu_);
  return received_;
}

}  // namespace smmd::transport
