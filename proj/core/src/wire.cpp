#include "relux/wire.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <sstream>
#include <utility>

#include "relux/errors.hpp"

namespace relux {
namespace wire {

void put_u32(Bytes& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

void put_f64(Bytes& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<uint8_t>((bits >> (8 * i)) & 0xff));
}

uint32_t get_u32(const Bytes& in, size_t& pos) {
  if (pos + 4 > in.size()) throw ProtocolError("truncated u32");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(in[pos + i]) << (8 * i);
  pos += 4;
  return v;
}

double get_f64(const Bytes& in, size_t& pos) {
  if (pos + 8 > in.size()) throw ProtocolError("truncated f64");
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(in[pos + i]) << (8 * i);
  pos += 8;
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

Bytes frame(const Bytes& payload) {
  Bytes out;
  out.reserve(payload.size() + 4);
  put_u32(out, static_cast<uint32_t>(payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Bytes query_payload(const Vec& x) {
  Bytes p;
  p.reserve(6 + 8 * static_cast<size_t>(x.size()));
  p.push_back(kVersion);
  p.push_back(kTypeQuery);
  put_u32(p, static_cast<uint32_t>(x.size()));
  for (int i = 0; i < x.size(); ++i) put_f64(p, x[i]);
  return p;
}

Bytes info_payload() { return {kVersion, kTypeInfo}; }

Bytes ok_query_payload(double y) {
  Bytes p{kVersion, kStatusOk};
  put_f64(p, y);
  return p;
}

Bytes ok_info_payload(uint32_t dim) {
  Bytes p{kVersion, kStatusOk};
  put_u32(p, dim);
  return p;
}

Bytes error_payload(uint8_t code, const std::string& message) {
  Bytes p{kVersion, kStatusError, code};
  put_u32(p, static_cast<uint32_t>(message.size()));
  p.insert(p.end(), message.begin(), message.end());
  return p;
}

Response parse_response(const Bytes& payload, uint8_t expected_type) {
  size_t pos = 0;
  if (payload.size() < 2) throw ProtocolError("response too short");
  if (payload[pos++] != kVersion) throw ProtocolError("bad response version");
  Response r;
  r.status = payload[pos++];
  if (r.status == kStatusOk) {
    if (expected_type == kTypeQuery)
      r.y = get_f64(payload, pos);
    else
      r.dim = get_u32(payload, pos);
  } else if (r.status == kStatusError) {
    if (pos >= payload.size()) throw ProtocolError("truncated error");
    r.error_code = payload[pos++];
    const uint32_t len = get_u32(payload, pos);
    if (pos + len > payload.size()) throw ProtocolError("truncated error text");
    r.error_message.assign(payload.begin() + static_cast<long>(pos),
                           payload.begin() + static_cast<long>(pos + len));
  } else {
    throw ProtocolError("unknown response status");
  }
  return r;
}

}  // namespace wire

namespace {

using wire::Bytes;

bool read_exact(int fd, uint8_t* buf, size_t n) {
  size_t done = 0;
  while (done < n) {
    const ssize_t got = ::recv(fd, buf + done, n - done, 0);
    if (got == 0) return false;
    if (got < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    done += static_cast<size_t>(got);
  }
  return true;
}

bool write_all(int fd, const uint8_t* buf, size_t n) {
  size_t done = 0;
  while (done < n) {
    const ssize_t put = ::send(fd, buf + done, n - done, MSG_NOSIGNAL);
    if (put < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    done += static_cast<size_t>(put);
  }
  return true;
}

/// Reads one frame; returns false on clean EOF or unrecoverable transport
/// state.  Oversized declared lengths poison the framing, so they close the
/// connection rather than answer.
bool read_frame(int fd, Bytes& payload) {
  uint8_t head[4];
  if (!read_exact(fd, head, 4)) return false;
  uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<uint32_t>(head[i]) << (8 * i);
  if (len > wire::kMaxPayload) return false;
  payload.resize(len);
  return len == 0 || read_exact(fd, payload.data(), len);
}

bool write_frame(int fd, const Bytes& payload) {
  const Bytes framed = wire::frame(payload);
  return write_all(fd, framed.data(), framed.size());
}

std::pair<std::string, uint16_t> parse_addr(const std::string& addr) {
  const size_t colon = addr.rfind(':');
  if (colon == std::string::npos)
    throw InputError("address must be host:port, got \"" + addr + "\"");
  std::string host = addr.substr(0, colon);
  if (host.empty()) host = "127.0.0.1";
  const std::string port_str = addr.substr(colon + 1);
  char* end = nullptr;
  const long port = std::strtol(port_str.c_str(), &end, 10);
  if (end == port_str.c_str() || *end != '\0' || port < 0 || port > 65535)
    throw InputError("bad port in address \"" + addr + "\"");
  return {host, static_cast<uint16_t>(port)};
}

sockaddr_in make_sockaddr(const std::string& host, uint16_t port) {
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &sa.sin_addr) != 1)
    throw InputError("cannot parse IPv4 host \"" + host + "\"");
  return sa;
}

}  // namespace

OracleServer::OracleServer(Network net, const std::string& listen_addr,
                           std::optional<uint64_t> budget)
    : oracle_(std::move(net), budget) {
  auto [host, port] = parse_addr(listen_addr);
  host_ = host;

  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw TransportError("socket() failed");
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in sa = make_sockaddr(host, port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) < 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw TransportError("bind failed for " + listen_addr + ": " +
                         std::strerror(errno));
  }
  if (::listen(listen_fd_, 16) < 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw TransportError("listen failed");
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);

  accept_thread_ = std::thread([this] { accept_loop(); });
}

OracleServer::~OracleServer() { shutdown(); }

std::string OracleServer::address() const {
  return host_ + ":" + std::to_string(port_);
}

void OracleServer::shutdown() {
  bool expected = false;
  if (!stopping_.compare_exchange_strong(expected, true)) return;
  if (listen_fd_ >= 0) {
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
  }
  {
    std::lock_guard<std::mutex> lock(conn_mutex_);
    for (int fd : conn_fds_) ::shutdown(fd, SHUT_RDWR);
  }
  if (accept_thread_.joinable()) accept_thread_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard<std::mutex> lock(conn_mutex_);
    workers.swap(conn_threads_);
  }
  for (std::thread& t : workers)
    if (t.joinable()) t.join();
  listen_fd_ = -1;
}

void OracleServer::accept_loop() {
  for (;;) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      return;  // listening socket closed
    }
    if (stopping_.load()) {
      ::close(fd);
      return;
    }
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    std::lock_guard<std::mutex> lock(conn_mutex_);
    conn_fds_.push_back(fd);
    conn_threads_.emplace_back([this, fd] { serve_connection(fd); });
  }
}

void OracleServer::serve_connection(int fd) {
  Bytes payload;
  while (!stopping_.load() && read_frame(fd, payload)) {
    Bytes reply;
    try {
      size_t pos = 0;
      if (payload.size() < 2) throw ProtocolError("request too short");
      if (payload[pos++] != wire::kVersion)
        throw ProtocolError("unsupported protocol version");
      const uint8_t type = payload[pos++];
      if (type == wire::kTypeInfo) {
        if (pos != payload.size()) throw ProtocolError("trailing bytes");
        reply = wire::ok_info_payload(static_cast<uint32_t>(oracle_.dim()));
      } else if (type == wire::kTypeQuery) {
        const uint32_t d = wire::get_u32(payload, pos);
        if (payload.size() != pos + 8ull * d)
          throw ProtocolError("query length mismatch");
        Vec x(d);
        for (uint32_t i = 0; i < d; ++i) x[i] = wire::get_f64(payload, pos);
        reply = wire::ok_query_payload(oracle_.query(x));
      } else {
        throw ProtocolError("unknown request type");
      }
    } catch (const ProtocolError& e) {
      reply = wire::error_payload(wire::kErrProtocol, e.what());
    } catch (const InputError& e) {
      reply = wire::error_payload(wire::kErrInput, e.what());
    } catch (const BudgetError& e) {
      reply = wire::error_payload(wire::kErrBudget, e.what());
    } catch (const std::exception& e) {
      reply = wire::error_payload(wire::kErrInternal, e.what());
    }
    if (!write_frame(fd, reply)) break;
  }
  ::close(fd);
}

RemoteOracle::RemoteOracle(const std::string& addr,
                           std::optional<uint64_t> budget)
    : budget_(budget) {
  auto [host, port] = parse_addr(addr);
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw TransportError("socket() failed");
  sockaddr_in sa = make_sockaddr(host, port);
  if (::connect(fd_, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) < 0) {
    ::close(fd_);
    fd_ = -1;
    throw TransportError("connect failed for " + addr + ": " +
                         std::strerror(errno));
  }
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));

  const Bytes reply = roundtrip(wire::frame(wire::info_payload()));
  const wire::Response r = wire::parse_response(reply, wire::kTypeInfo);
  if (r.status != wire::kStatusOk)
    throw ProtocolError("server rejected info request: " + r.error_message);
  dim_ = static_cast<int>(r.dim);
}

RemoteOracle::~RemoteOracle() {
  if (fd_ >= 0) ::close(fd_);
}

wire::Bytes RemoteOracle::roundtrip(const Bytes& request_frame) {
  std::lock_guard<std::mutex> lock(io_mutex_);
  if (fd_ < 0) throw TransportError("connection closed");
  if (!write_all(fd_, request_frame.data(), request_frame.size()))
    throw TransportError("send failed");
  Bytes payload;
  if (!read_frame(fd_, payload)) throw TransportError("connection lost");
  return payload;
}

double RemoteOracle::query(const Vec& x) {
  if (x.size() != dim_) {
    std::ostringstream os;
    os << "oracle: query dimension " << x.size() << " != " << dim_;
    throw InputError(os.str());
  }
  if (budget_) {
    uint64_t current = count_.load();
    for (;;) {
      if (current >= *budget_) throw BudgetError("oracle: budget exhausted");
      if (count_.compare_exchange_weak(current, current + 1)) break;
    }
  } else {
    count_.fetch_add(1);
  }
  const Bytes reply = roundtrip(wire::frame(wire::query_payload(x)));
  const wire::Response r = wire::parse_response(reply, wire::kTypeQuery);
  if (r.status == wire::kStatusOk) return r.y;
  switch (r.error_code) {
    case wire::kErrInput:
      throw InputError("server: " + r.error_message);
    case wire::kErrBudget:
      throw BudgetError("server: " + r.error_message);
    case wire::kErrProtocol:
      throw ProtocolError("server: " + r.error_message);
    default:
      throw TransportError("server: " + r.error_message);
  }
}

}  // namespace relux
