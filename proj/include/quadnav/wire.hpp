#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace quadnav::wire {

// endpoint unreachable / connection lost
struct DispatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// peer spoke, but not the protocol
struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConnectionClosed : DispatchError {
  using DispatchError::DispatchError;
};

inline constexpr int kProtocolVersion = 1;
inline constexpr std::uint32_t kMaxFrameBytes = 64u << 20;

// Frames are a 4-byte big-endian payload length followed by UTF-8 bytes.
void send_frame(int fd, std::string_view payload);

// Waits up to timeout_ms for a complete frame. nullopt = timed out before
// any byte arrived; a timeout mid-frame or an oversized length is a
// ProtocolError; EOF raises ConnectionClosed.
std::optional<std::string> recv_frame(int fd, int timeout_ms);

int listen_on(const std::string& endpoint);               // "host:port"
int accept_client(int listen_fd, int timeout_ms);         // -1 on timeout
int connect_to(const std::string& endpoint, int timeout_ms);
void close_fd(int fd);
std::uint16_t bound_port(int listen_fd);                  // for port-0 listeners

}  // namespace quadnav::wire
