#include "fire/remote.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fire/io.hpp"

extern char** environ;

namespace fire::remote {
namespace {

constexpr std::uint8_t kMagic[4] = {'F', 'I', 'R', 'E'};
constexpr std::uint32_t kMaxPayload = 1u << 30;

void ignore_sigpipe() {
  static const bool done = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)done;
}

std::string sys_error(const std::string& what) { return what + ": " + std::strerror(errno); }

bool valid_type(std::uint8_t t) { return t >= 1 && t <= 5; }

void check_header(std::span<const std::uint8_t> h) {
  if (!std::equal(kMagic, kMagic + 4, h.begin())) throw ProtocolError("bad frame magic");
  if (h[4] != kVersion) throw ProtocolError("unsupported protocol version " + std::to_string(h[4]));
  if (!valid_type(h[5])) throw ProtocolError("unknown frame type " + std::to_string(h[5]));
}

std::string payload_text(const Frame& f) { return std::string(f.payload.begin(), f.payload.end()); }

}  // namespace

std::vector<std::uint8_t> encode_frame(const Frame& frame) {
  if (frame.payload.size() > kMaxPayload) throw ProtocolError("frame payload too large");
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.push_back(kVersion);
  out.push_back(static_cast<std::uint8_t>(frame.type));
  io::put_u32(out, static_cast<std::uint32_t>(frame.payload.size()));
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

Frame decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) throw ProtocolError("truncated frame header");
  check_header(bytes);
  const std::uint32_t len = io::get_u32(bytes, 6);
  if (bytes.size() != kHeaderSize + len) throw ProtocolError("frame length does not match payload");
  return {static_cast<FrameType>(bytes[5]), {bytes.begin() + kHeaderSize, bytes.end()}};
}

Frame tensor_frame(FrameType type, const Image& img) {
  Frame f{type, {}};
  io::encode_tensor_body(f.payload, img);
  return f;
}

Image frame_tensor(const Frame& frame) {
  if (frame.type != FrameType::restore && frame.type != FrameType::response) {
    throw ProtocolError("frame does not carry a tensor");
  }
  try {
    return io::decode_tensor_body(frame.payload);
  } catch (const io::IoError& e) {
    throw ProtocolError(std::string("bad tensor payload: ") + e.what());
  }
}

// ---------------------------------------------------------------- transports

FdTransport::FdTransport(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {}

FdTransport::~FdTransport() { close(); }

void FdTransport::write_all(std::span<const std::uint8_t> bytes) {
  if (write_fd_ < 0) throw ProtocolError("transport is closed");
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n = ::write(write_fd_, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(sys_error("write to peer failed"));
    }
    done += static_cast<std::size_t>(n);
  }
}

void FdTransport::read_exact(std::span<std::uint8_t> out, int timeout_ms) {
  if (read_fd_ < 0) throw ProtocolError("transport is closed");
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  std::size_t done = 0;
  while (done < out.size()) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw TimeoutError("timed out after " + std::to_string(timeout_ms) + " ms");
    pollfd p{read_fd_, POLLIN, 0};
    const int r = ::poll(&p, 1, static_cast<int>(left.count()));
    if (r < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(sys_error("poll failed"));
    }
    if (r == 0) continue;
    const ssize_t n = ::read(read_fd_, out.data() + done, out.size() - done);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw ProtocolError(sys_error("read from peer failed"));
    }
    if (n == 0) throw ProtocolError("peer closed the connection");
    done += static_cast<std::size_t>(n);
  }
}

void FdTransport::close() {
  if (read_fd_ >= 0) ::close(read_fd_);
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  read_fd_ = write_fd_ = -1;
}

ChildProcessTransport::ChildProcessTransport(int read_fd, int write_fd, int pid)
    : FdTransport(read_fd, write_fd), pid_(pid) {}

ChildProcessTransport::~ChildProcessTransport() {
  close();
  int status = 0;
  for (int i = 0; i < 50; ++i) {
    if (::waitpid(pid_, &status, WNOHANG) != 0) return;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  ::kill(pid_, SIGKILL);
  ::waitpid(pid_, &status, 0);
}

std::unique_ptr<ChildProcessTransport> ChildProcessTransport::spawn(const std::vector<std::string>& argv) {
  if (argv.empty()) throw Error("exec transport needs a program");
  ignore_sigpipe();
  int to_child[2], from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0) throw Error(sys_error("pipe"));
  if (::pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw Error(sys_error("pipe"));
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);

  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  pid_t pid = 0;
  const int rc = ::posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(to_child[0]);
  ::close(from_child[1]);
  if (rc != 0) {
    ::close(to_child[1]);
    ::close(from_child[0]);
    throw Error("cannot start '" + argv[0] + "': " + std::strerror(rc));
  }
  return std::unique_ptr<ChildProcessTransport>(new ChildProcessTransport(from_child[0], to_child[1], pid));
}

std::unique_ptr<Transport> connect_tcp(const std::string& host, std::uint16_t port, int timeout_ms) {
  ignore_sigpipe();
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (int rc = ::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res); rc != 0) {
    throw Error("cannot resolve '" + host + "': " + ::gai_strerror(rc));
  }
  std::string last = "no address";
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC | SOCK_NONBLOCK, ai->ai_protocol);
    if (fd < 0) continue;
    int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
    if (rc != 0 && errno == EINPROGRESS) {
      pollfd p{fd, POLLOUT, 0};
      rc = ::poll(&p, 1, timeout_ms) == 1 ? 0 : -1;
      if (rc == 0) {
        int err = 0;
        socklen_t len = sizeof err;
        ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        if (err != 0) {
          errno = err;
          rc = -1;
        }
      } else {
        errno = ETIMEDOUT;
      }
    }
    if (rc == 0) {
      ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) & ~O_NONBLOCK);
      ::freeaddrinfo(res);
      return std::make_unique<FdTransport>(fd, fd);
    }
    last = std::strerror(errno);
    ::close(fd);
  }
  ::freeaddrinfo(res);
  throw Error("cannot connect to " + host + ":" + std::to_string(port) + ": " + last);
}

void write_frame(Transport& t, const Frame& frame) { t.write_all(encode_frame(frame)); }

Frame read_frame(Transport& t, int timeout_ms) {
  std::uint8_t header[kHeaderSize];
  t.read_exact(header, timeout_ms);
  check_header(header);
  const std::uint32_t len = io::get_u32(header, 6);
  if (len > kMaxPayload) throw ProtocolError("frame payload too large");
  Frame f{static_cast<FrameType>(header[5]), std::vector<std::uint8_t>(len)};
  if (len > 0) t.read_exact(f.payload, timeout_ms);
  return f;
}

// ---------------------------------------------------------------- handshake

std::string capabilities_json(const Capabilities& caps) {
  nlohmann::json j = {{"family", caps.family}, {"shape_policy", caps.shape_policy}};
  if (!caps.dims.empty()) j["dims"] = caps.dims;
  return j.dump();
}

Capabilities parse_capabilities(std::span<const std::uint8_t> payload) {
  try {
    const auto j = nlohmann::json::parse(payload.begin(), payload.end());
    Capabilities caps;
    caps.family = j.at("family").get<std::string>();
    caps.shape_policy = j.value("shape_policy", std::string("any"));
    if (j.contains("dims") && !j["dims"].is_null()) caps.dims = j["dims"].get<std::vector<std::uint64_t>>();
    if (caps.shape_policy != "any" && caps.shape_policy != "fixed") {
      throw ProtocolError("unknown shape policy '" + caps.shape_policy + "'");
    }
    if (caps.shape_policy == "fixed" && caps.dims.empty()) throw ProtocolError("fixed shape policy without dims");
    return caps;
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("bad capabilities payload: ") + e.what());
  }
}

RemoteHandle::RemoteHandle(std::unique_ptr<Transport> transport, int timeout_ms)
    : transport_(std::move(transport)), timeout_ms_(timeout_ms) {
  if (!transport_) throw Error("remote handle needs a transport");
}

Capabilities RemoteHandle::handshake(const Capabilities& request) {
  std::lock_guard lock(in_flight_);
  if (caps_) throw StateError("remote handle is already initialized");
  if (!transport_->is_open()) throw StateError("remote handle is closed");
  try {
    const std::string body = capabilities_json(request);
    write_frame(*transport_, {FrameType::init, {body.begin(), body.end()}});
    const Frame reply = read_frame(*transport_, timeout_ms_);
    if (reply.type == FrameType::error) throw RemoteError("remote prior: " + payload_text(reply));
    if (reply.type != FrameType::init_ack) throw ProtocolError("expected INIT_ACK");
    caps_ = parse_capabilities(reply.payload);
  } catch (const ProtocolError&) {
    transport_->close();
    throw;
  } catch (const TimeoutError&) {
    transport_->close();
    throw;
  }
  return *caps_;
}

Image RemoteHandle::restore(const Image& x, bool clamp) {
  std::lock_guard lock(in_flight_);
  if (!caps_) throw StateError("remote handle is not initialized");
  if (!transport_->is_open()) throw StateError("remote handle is closed");
  if (caps_->shape_policy == "fixed") {
    const std::vector<std::uint64_t> dims{x.height(), x.width(), x.channels()};
    const bool match = caps_->dims == dims ||
                       (x.channels() == 1 && caps_->dims == std::vector<std::uint64_t>{x.height(), x.width()});
    if (!match) throw ShapeError("remote prior does not accept shape " + to_string(x.shape()));
  }
  Frame reply;
  try {
    write_frame(*transport_, tensor_frame(FrameType::restore, x));
    reply = read_frame(*transport_, timeout_ms_);
  } catch (const ProtocolError&) {
    transport_->close();
    throw;
  } catch (const TimeoutError&) {
    transport_->close();
    throw;
  }
  if (reply.type == FrameType::error) throw RemoteError("remote prior: " + payload_text(reply));
  if (reply.type != FrameType::response) throw ProtocolError("expected RESPONSE");
  Image out = frame_tensor(reply);
  if (out.shape() != x.shape()) {
    throw ShapeError("remote prior returned shape " + to_string(out.shape()) + " for input " +
                     to_string(x.shape()));
  }
  return clamp ? out.clamped() : out;
}

void RemoteHandle::close() {
  std::lock_guard lock(in_flight_);
  transport_->close();
}

std::unique_ptr<RemoteHandle> open_remote(const std::string& address, int timeout_ms) {
  if (address.rfind("tcp:", 0) == 0) {
    const std::string rest = address.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) throw Error("remote address '" + address + "' lacks a port");
    int port = 0;
    try {
      port = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
      port = -1;
    }
    if (port <= 0 || port > 65535) throw Error("bad port in remote address '" + address + "'");
    return std::make_unique<RemoteHandle>(
        connect_tcp(rest.substr(0, colon), static_cast<std::uint16_t>(port), timeout_ms), timeout_ms);
  }
  if (address.rfind("exec:", 0) == 0) {
    std::istringstream is(address.substr(5));
    std::vector<std::string> argv;
    for (std::string a; is >> a;) argv.push_back(a);
    return std::make_unique<RemoteHandle>(ChildProcessTransport::spawn(argv), timeout_ms);
  }
  throw Error("remote address must start with tcp: or exec:, got '" + address + "'");
}

std::set<Family> families_for_tag(const std::string& tag) {
  if (tag == "any") {
    return {Family::additive_noise, Family::blur, Family::decimation, Family::mask, Family::jpeg,
            Family::composite};
  }
  return {family_from_string(tag)};
}

RemoteRestorer::RemoteRestorer(std::shared_ptr<RemoteHandle> handle, std::string address)
    : handle_(std::move(handle)), address_(std::move(address)) {
  if (!handle_ || !handle_->initialized()) throw StateError("remote restorer needs an initialized handle");
}

Image RemoteRestorer::restore(const Image& degraded, const Degradation&) const { return handle_->restore(degraded); }

std::set<Family> RemoteRestorer::compatible_families() const {
  return families_for_tag(handle_->capabilities()->family);
}

}  // namespace fire::remote
