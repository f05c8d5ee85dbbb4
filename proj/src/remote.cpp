#include "synguard/remote.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

namespace synguard {

namespace {

class FdChannel : public LineChannel {
 public:
  FdChannel(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {
    std::signal(SIGPIPE, SIG_IGN);
  }

  void write_line(const std::string& line) override {
    std::string buf = line + '\n';
    const char* p = buf.data();
    std::size_t left = buf.size();
    while (left > 0) {
      ssize_t n = ::write(write_fd_, p, left);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ProviderError(std::string("logit provider write failed: ") + std::strerror(errno));
      }
      p += n;
      left -= static_cast<std::size_t>(n);
    }
  }

  std::string read_line(std::chrono::milliseconds timeout) override {
    auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (auto nl = pending_.find('\n'); nl != std::string::npos) {
        std::string line = pending_.substr(0, nl);
        pending_.erase(0, nl + 1);
        return line;
      }
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw ProviderError("logit provider timed out");
      pollfd pfd{read_fd_, POLLIN, 0};
      int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw ProviderError(std::string("logit provider poll failed: ") + std::strerror(errno));
      }
      if (rc == 0) throw ProviderError("logit provider timed out");
      char buf[65536];
      ssize_t n = ::read(read_fd_, buf, sizeof buf);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ProviderError(std::string("logit provider read failed: ") + std::strerror(errno));
      }
      if (n == 0) throw ProviderError("logit provider closed the connection");
      pending_.append(buf, static_cast<std::size_t>(n));
    }
  }

 protected:
  int read_fd_;
  int write_fd_;
  std::string pending_;
};

class SocketChannel final : public FdChannel {
 public:
  explicit SocketChannel(int fd) : FdChannel(fd, fd) {}
  ~SocketChannel() override { ::close(read_fd_); }
};

class ProcessChannel final : public FdChannel {
 public:
  ProcessChannel(int read_fd, int write_fd, pid_t pid) : FdChannel(read_fd, write_fd), pid_(pid) {}
  ~ProcessChannel() override {
    ::close(write_fd_);
    ::close(read_fd_);
    int status = 0;
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) != 0) return;
      ::usleep(10000);
    }
    ::kill(pid_, SIGTERM);
    ::waitpid(pid_, &status, 0);
  }

 private:
  pid_t pid_;
};

std::unique_ptr<LineChannel> open_tcp(const std::string& host, const std::string& port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0)
    throw ProviderError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw ProviderError("cannot connect to " + host + ":" + port);
  return std::make_unique<SocketChannel>(fd);
}

std::unique_ptr<LineChannel> open_process(const std::string& command) {
  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0 || ::pipe(from_child) != 0)
    throw ProviderError(std::string("pipe failed: ") + std::strerror(errno));
  pid_t pid = ::fork();
  if (pid < 0) throw ProviderError(std::string("fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  ::fcntl(to_child[1], F_SETFD, FD_CLOEXEC);
  ::fcntl(from_child[0], F_SETFD, FD_CLOEXEC);
  return std::make_unique<ProcessChannel>(from_child[0], to_child[1], pid);
}

nlohmann::json parse_response(const std::string& line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    throw ProviderError("malformed response from logit provider: " + line.substr(0, 120));
  }
  if (!j.is_object()) throw ProviderError("logit provider response is not an object");
  if (j.contains("error"))
    throw ProviderError("logit provider error: " + j["error"].dump());
  return j;
}

}  // namespace

std::unique_ptr<LineChannel> open_channel(const std::string& endpoint) {
  if (endpoint.rfind("tcp:", 0) == 0) {
    std::string rest = endpoint.substr(4);
    auto colon = rest.rfind(':');
    if (colon == std::string::npos) throw InvalidArgument("tcp endpoint must be tcp:HOST:PORT");
    return open_tcp(rest.substr(0, colon), rest.substr(colon + 1));
  }
  if (endpoint.rfind("exec:", 0) == 0) return open_process(endpoint.substr(5));
  throw InvalidArgument("unknown endpoint '" + endpoint + "' (expected tcp:HOST:PORT or exec:COMMAND)");
}

RemoteModel::RemoteModel(std::unique_ptr<LineChannel> channel, std::size_t expected_vocab_size,
                         std::string expected_tag, std::chrono::milliseconds timeout)
    : channel_(std::move(channel)), timeout_(timeout) {
  channel_->write_line(R"({"op":"hello"})");
  auto j = parse_response(channel_->read_line(timeout_));
  if (!j.contains("vocab_size") || !j["vocab_size"].is_number_unsigned())
    throw ProviderError("handshake response lacks vocab_size");
  vocab_size_ = j["vocab_size"].get<std::size_t>();
  vocab_tag_ = j.value("vocab_tag", "");
  if (vocab_size_ != expected_vocab_size)
    throw ProviderError("handshake mismatch: provider vocab_size " + std::to_string(vocab_size_) +
                        " != local " + std::to_string(expected_vocab_size));
  if (!expected_tag.empty() && vocab_tag_ != expected_tag)
    throw ProviderError("handshake mismatch: provider vocab_tag '" + vocab_tag_ + "' != local '" +
                        expected_tag + "'");
}

RemoteModel::~RemoteModel() {
  try {
    channel_->write_line(R"({"op":"bye"})");
  } catch (...) {
  }
}

LogitVector RemoteModel::next_logits(std::span<const TokenId> context) const {
  nlohmann::json req;
  req["op"] = "logits";
  req["context"] = std::vector<TokenId>(context.begin(), context.end());
  std::lock_guard lock(mutex_);
  channel_->write_line(req.dump());
  auto j = parse_response(channel_->read_line(timeout_));
  if (!j.contains("logits") || !j["logits"].is_array())
    throw ProviderError("logits response lacks a logits array");
  const auto& arr = j["logits"];
  if (arr.size() != vocab_size_)
    throw ProviderError("logits response has " + std::to_string(arr.size()) + " entries, expected " +
                        std::to_string(vocab_size_));
  LogitVector out(static_cast<Eigen::Index>(vocab_size_));
  for (std::size_t i = 0; i < vocab_size_; ++i) {
    if (!arr[i].is_number()) throw ProviderError("non-numeric logit at index " + std::to_string(i));
    double v = arr[i].get<double>();
    if (!std::isfinite(v)) throw ProviderError("non-finite logit at index " + std::to_string(i));
    out[static_cast<Eigen::Index>(i)] = v;
  }
  return out;
}

std::unique_ptr<RemoteModel> connect_remote(const std::string& endpoint, const Vocabulary& vocab) {
  return std::make_unique<RemoteModel>(open_channel(endpoint), vocab.size(), vocab.tag());
}

}  // namespace synguard
