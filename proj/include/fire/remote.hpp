#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fire/image.hpp"
#include "fire/restorers.hpp"

/// Client side of the remote-prior wire protocol.
///
/// Every frame is: magic "FIRE" | version u8 (=1) | type u8 | payload length
/// u32 LE | payload. INIT and INIT_ACK carry UTF-8 JSON
/// {"family", "shape_policy", "dims"?}; RESTORE and RESPONSE carry a tensor
/// (u32 rank, u64 dims, f32 LE data, channels-last); ERROR carries a UTF-8
/// message. One request is in flight per connection.
namespace fire::remote {

inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 10;

enum class FrameType : std::uint8_t {
  init = 1,
  init_ack = 2,
  restore = 3,
  response = 4,
  error = 5,
};

struct Frame {
  FrameType type = FrameType::error;
  std::vector<std::uint8_t> payload;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};
class TimeoutError : public Error {
 public:
  using Error::Error;
};
/// The peer answered with an ERROR frame.
class RemoteError : public Error {
 public:
  using Error::Error;
};
/// Call order violated (e.g. second handshake, restore before handshake).
class StateError : public Error {
 public:
  using Error::Error;
};

std::vector<std::uint8_t> encode_frame(const Frame& frame);
/// Parses a complete frame; throws ProtocolError on bad magic, version,
/// type or length.
Frame decode_frame(std::span<const std::uint8_t> bytes);

Frame tensor_frame(FrameType type, const Image& img);
Image frame_tensor(const Frame& frame);

/// Byte stream with deadline-aware reads.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void write_all(std::span<const std::uint8_t> bytes) = 0;
  /// Fills `out` completely or throws TimeoutError / ProtocolError (EOF).
  virtual void read_exact(std::span<std::uint8_t> out, int timeout_ms) = 0;
  virtual void close() = 0;
  virtual bool is_open() const = 0;
};

/// Transport over a pair of file descriptors (pipes or one socket).
class FdTransport : public Transport {
 public:
  FdTransport(int read_fd, int write_fd);
  ~FdTransport() override;
  FdTransport(const FdTransport&) = delete;
  FdTransport& operator=(const FdTransport&) = delete;

  void write_all(std::span<const std::uint8_t> bytes) override;
  void read_exact(std::span<std::uint8_t> out, int timeout_ms) override;
  void close() override;
  bool is_open() const override { return read_fd_ >= 0; }

 private:
  int read_fd_;
  int write_fd_;
};

/// Child process speaking the protocol on its stdin/stdout.
class ChildProcessTransport final : public FdTransport {
 public:
  static std::unique_ptr<ChildProcessTransport> spawn(const std::vector<std::string>& argv);
  ~ChildProcessTransport() override;

 private:
  ChildProcessTransport(int read_fd, int write_fd, int pid);
  int pid_;
};

std::unique_ptr<Transport> connect_tcp(const std::string& host, std::uint16_t port, int timeout_ms);

void write_frame(Transport& t, const Frame& frame);
Frame read_frame(Transport& t, int timeout_ms);

struct Capabilities {
  std::string family;
  /// "any" or "fixed"
  std::string shape_policy = "any";
  std::vector<std::uint64_t> dims;
};

std::string capabilities_json(const Capabilities& caps);
Capabilities parse_capabilities(std::span<const std::uint8_t> payload);

class RemoteHandle {
 public:
  explicit RemoteHandle(std::unique_ptr<Transport> transport, int timeout_ms = 10000);

  /// Sends INIT, expects INIT_ACK. May be called once.
  Capabilities handshake(const Capabilities& request = {"any", "any", {}});
  /// RESTORE -> RESPONSE. Output has the input's shape and is clamped to
  /// [0,1]. With `clamp` false the raw response is returned.
  Image restore(const Image& x, bool clamp = true);

  bool initialized() const { return caps_.has_value(); }
  const std::optional<Capabilities>& capabilities() const { return caps_; }
  int timeout_ms() const { return timeout_ms_; }
  void close();

 private:
  std::unique_ptr<Transport> transport_;
  int timeout_ms_;
  std::optional<Capabilities> caps_;
  std::mutex in_flight_;
};

/// "tcp:host:port" or "exec:<program> [args...]". Does not handshake.
std::unique_ptr<RemoteHandle> open_remote(const std::string& address, int timeout_ms = 10000);

/// Maps a declared family tag ("denoise", "blur", "sr", "inpaint", "jpeg",
/// "any") onto degradation families.
std::set<Family> families_for_tag(const std::string& tag);

class RemoteRestorer final : public Restorer {
 public:
  /// The handle must have completed its handshake.
  explicit RemoteRestorer(std::shared_ptr<RemoteHandle> handle, std::string address = {});
  Image restore(const Image& degraded, const Degradation& d) const override;
  std::set<Family> compatible_families() const override;
  std::string id() const override { return "remote:" + address_; }

 private:
  std::shared_ptr<RemoteHandle> handle_;
  std::string address_;
};

}  // namespace fire::remote
