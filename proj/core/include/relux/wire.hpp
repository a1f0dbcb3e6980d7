#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "relux/network.hpp"
#include "relux/oracle.hpp"

namespace relux {
namespace wire {

// Framing and payload layout are documented bit-exactly in
// docs/wire-protocol.md.  All integers little-endian, floats IEEE-754
// binary64 little-endian.

constexpr uint8_t kVersion = 1;
constexpr uint8_t kTypeInfo = 0x00;
constexpr uint8_t kTypeQuery = 0x01;
constexpr uint8_t kStatusOk = 0x00;
constexpr uint8_t kStatusError = 0x01;
constexpr uint8_t kErrProtocol = 1;
constexpr uint8_t kErrInput = 2;
constexpr uint8_t kErrBudget = 3;
constexpr uint8_t kErrInternal = 4;
constexpr uint32_t kMaxPayload = 16u * 1024u * 1024u;

using Bytes = std::vector<uint8_t>;

void put_u32(Bytes& out, uint32_t v);
void put_f64(Bytes& out, double v);
uint32_t get_u32(const Bytes& in, size_t& pos);
double get_f64(const Bytes& in, size_t& pos);

Bytes frame(const Bytes& payload);
Bytes query_payload(const Vec& x);
Bytes info_payload();

struct Response {
  uint8_t status = kStatusOk;
  double y = 0.0;                // QUERY result
  uint32_t dim = 0;              // INFO result
  uint8_t error_code = 0;
  std::string error_message;
};

Bytes ok_query_payload(double y);
Bytes ok_info_payload(uint32_t dim);
Bytes error_payload(uint8_t code, const std::string& message);
Response parse_response(const Bytes& payload, uint8_t expected_type);

}  // namespace wire

/// Serves oracle queries over a length-prefixed TCP protocol.  The server
/// answers from the wrapped network and never exposes its parameters.
class OracleServer {
 public:
  /// Binds immediately; throws TransportError on failure.  `listen_addr` is
  /// "host:port"; port 0 picks an ephemeral port.
  OracleServer(Network net, const std::string& listen_addr,
               std::optional<uint64_t> budget = std::nullopt);
  ~OracleServer();

  OracleServer(const OracleServer&) = delete;
  OracleServer& operator=(const OracleServer&) = delete;

  /// Address actually bound, "host:port".
  std::string address() const;
  uint16_t port() const { return port_; }
  uint64_t query_count() const { return oracle_.query_count(); }

  /// Stops accepting, closes live connections, joins worker threads.
  /// Idempotent.
  void shutdown();

 private:
  void accept_loop();
  void serve_connection(int fd);

  InProcessOracle oracle_;
  std::string host_;
  uint16_t port_ = 0;
  int listen_fd_ = -1;
  std::atomic<bool> stopping_{false};
  std::thread accept_thread_;
  std::mutex conn_mutex_;
  std::vector<int> conn_fds_;
  std::vector<std::thread> conn_threads_;
};

/// Client-side oracle speaking the wire protocol.  Counts its own queries.
class RemoteOracle final : public Oracle {
 public:
  explicit RemoteOracle(const std::string& addr,
                        std::optional<uint64_t> budget = std::nullopt);
  ~RemoteOracle() override;

  double query(const Vec& x) override;
  int dim() const override { return dim_; }
  uint64_t query_count() const override { return count_.load(); }
  std::optional<uint64_t> budget() const override { return budget_; }

 private:
  wire::Bytes roundtrip(const wire::Bytes& request_frame);

  int fd_ = -1;
  int dim_ = 0;
  std::optional<uint64_t> budget_;
  std::atomic<uint64_t> count_{0};
  std::mutex io_mutex_;
};

}  // namespace relux
