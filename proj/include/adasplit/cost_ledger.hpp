#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adasplit/nn.hpp"

namespace adasplit {

using ByteCount = std::uint64_t;

enum class Direction { kClientToServer, kServerToClient };
enum class Party { kClient, kServer };

std::string to_string(Direction d);
std::string to_string(Party p);

/// Logical time of the simulation.
struct SimClock {
  int round = 0;
  int iter = 0;
};

struct MessageEvent {
  int round = 0;
  int iter = 0;
  Direction direction = Direction::kClientToServer;
  int client_id = 0;
  ByteCount bytes = 0;
};

struct ComputeEvent {
  int round = 0;
  int iter = 0;
  Party party = Party::kClient;
  int client_id = 0;  // the client whose data the work was done for
  FlopCount flops = 0;
};

struct ClientCosts {
  FlopCount client_flops = 0;
  FlopCount server_flops = 0;
  ByteCount bytes_up = 0;
  ByteCount bytes_down = 0;
};

/// Per-client FLOP and byte totals plus the compute event log.
class CostLedger {
 public:
  explicit CostLedger(int n_clients = 0) : per_client_(std::size_t(n_clients)) {}

  void set_clock(int round, int iter) { clock_ = {round, iter}; }
  const SimClock& clock() const { return clock_; }

  void charge_compute(Party party, int client_id, FlopCount flops);
  void charge_bytes(Direction direction, int client_id, ByteCount bytes);

  int n_clients() const { return int(per_client_.size()); }
  const ClientCosts& client(int id) const { return per_client_.at(std::size_t(id)); }
  const std::vector<ClientCosts>& clients() const { return per_client_; }
  const std::vector<ComputeEvent>& compute_log() const { return compute_log_; }

  FlopCount total_client_flops() const;
  FlopCount total_server_flops() const;
  ByteCount total_bytes_up() const;
  ByteCount total_bytes_down() const;

 private:
  ClientCosts& at(int id);

  SimClock clock_;
  std::vector<ClientCosts> per_client_;
  std::vector<ComputeEvent> compute_log_;
};

/// In-process message transport. Every send is logged and charged to the ledger.
class SimNetwork {
 public:
  explicit SimNetwork(CostLedger& ledger) : ledger_(&ledger) {}

  void send(Direction direction, int client_id, ByteCount bytes);

  const std::vector<MessageEvent>& log() const { return log_; }
  ByteCount bytes(int client_id, Direction direction) const;

 private:
  CostLedger* ledger_;
  std::vector<MessageEvent> log_;
};

}  // namespace adasplit
