#include "quadnav/wire.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <vector>

namespace quadnav::wire {
namespace {

using clock = std::chrono::steady_clock;

int remaining_ms(clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now());
  return static_cast<int>(std::max<long long>(0, left.count()));
}

// waits for readability; false on timeout
bool wait_readable(int fd, int timeout_ms) {
  pollfd p{fd, POLLIN, 0};
  for (;;) {
    const int rc = ::poll(&p, 1, timeout_ms);
    if (rc > 0) return true;
    if (rc == 0) return false;
    if (errno != EINTR) throw DispatchError(std::string("poll: ") + std::strerror(errno));
  }
}

// reads exactly n bytes or reports timeout/EOF; started = any byte of the
// frame already consumed (turns a timeout into a protocol error)
bool read_exact(int fd, void* buf, std::size_t n, clock::time_point deadline, bool started) {
  auto* p = static_cast<char*>(buf);
  std::size_t got = 0;
  while (got < n) {
    if (!wait_readable(fd, remaining_ms(deadline))) {
      if (got == 0 && !started) return false;
      throw ProtocolError("timed out inside a frame");
    }
    const ssize_t rc = ::recv(fd, p + got, n - got, 0);
    if (rc == 0) {
      if (got == 0 && !started) throw ConnectionClosed("connection closed");
      throw ProtocolError("connection closed inside a frame");
    }
    if (rc < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw DispatchError(std::string("recv: ") + std::strerror(errno));
    }
    got += static_cast<std::size_t>(rc);
  }
  return true;
}

sockaddr_in resolve(const std::string& endpoint) {
  const auto colon = endpoint.rfind(':');
  if (colon == std::string::npos)
    throw DispatchError("endpoint must be host:port, got '" + endpoint + "'");
  const std::string host = endpoint.substr(0, colon);
  const std::string port = endpoint.substr(colon + 1);

  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), port.c_str(), &hints, &res);
  if (rc != 0 || res == nullptr)
    throw DispatchError("cannot resolve '" + endpoint + "': " + gai_strerror(rc));
  sockaddr_in addr{};
  std::memcpy(&addr, res->ai_addr, sizeof(addr));
  ::freeaddrinfo(res);
  return addr;
}

}  // namespace

void send_frame(int fd, std::string_view payload) {
  if (payload.size() > kMaxFrameBytes) throw ProtocolError("frame too large to send");
  const std::uint32_t len = htonl(static_cast<std::uint32_t>(payload.size()));
  std::vector<char> buf(sizeof(len) + payload.size());
  std::memcpy(buf.data(), &len, sizeof(len));
  std::memcpy(buf.data() + sizeof(len), payload.data(), payload.size());

  std::size_t sent = 0;
  while (sent < buf.size()) {
    const ssize_t rc = ::send(fd, buf.data() + sent, buf.size() - sent, MSG_NOSIGNAL);
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw DispatchError(std::string("send: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(rc);
  }
}

std::optional<std::string> recv_frame(int fd, int timeout_ms) {
  const auto deadline = clock::now() + std::chrono::milliseconds(timeout_ms);
  std::uint32_t len_be = 0;
  if (!read_exact(fd, &len_be, sizeof(len_be), deadline, false)) return std::nullopt;
  const std::uint32_t len = ntohl(len_be);
  if (len > kMaxFrameBytes) throw ProtocolError("frame length " + std::to_string(len) + " exceeds limit");
  std::string payload(len, '\0');
  read_exact(fd, payload.data(), len, deadline, true);
  return payload;
}

int listen_on(const std::string& endpoint) {
  const sockaddr_in addr = resolve(endpoint);
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw DispatchError(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) < 0 ||
      ::listen(fd, 16) < 0) {
    const std::string err = std::strerror(errno);
    ::close(fd);
    throw DispatchError("cannot listen on '" + endpoint + "': " + err);
  }
  return fd;
}

int accept_client(int listen_fd, int timeout_ms) {
  if (!wait_readable(listen_fd, timeout_ms)) return -1;
  const int fd = ::accept(listen_fd, nullptr, nullptr);
  if (fd < 0) throw DispatchError(std::string("accept: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return fd;
}

int connect_to(const std::string& endpoint, int timeout_ms) {
  const sockaddr_in addr = resolve(endpoint);
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw DispatchError(std::string("socket: ") + std::strerror(errno));

  if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) < 0) {
    // keep it simple: blocking connect, bounded by the kernel default;
    // timeout_ms guards only the uncommon in-progress path
    if (errno != EINPROGRESS) {
      const std::string err = std::strerror(errno);
      ::close(fd);
      throw DispatchError("cannot connect to '" + endpoint + "': " + err);
    }
    pollfd p{fd, POLLOUT, 0};
    if (::poll(&p, 1, timeout_ms) <= 0) {
      ::close(fd);
      throw DispatchError("connect to '" + endpoint + "' timed out");
    }
  }
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return fd;
}

void close_fd(int fd) {
  if (fd >= 0) ::close(fd);
}

std::uint16_t bound_port(int listen_fd) {
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  if (::getsockname(listen_fd, reinterpret_cast<sockaddr*>(&addr), &len) < 0)
    throw DispatchError(std::string("getsockname: ") + std::strerror(errno));
  return ntohs(addr.sin_port);
}

}  // namespace quadnav::wire
