#include "adasplit/cost_ledger.hpp"

namespace adasplit {

std::string to_string(Direction d) { return d == Direction::kClientToServer ? "c2s" : "s2c"; }

std::string to_string(Party p) { return p == Party::kClient ? "client" : "server"; }

ClientCosts& CostLedger::at(int id) {
  if (id < 0 || id >= n_clients()) throw RegistryError("ledger: unknown client " + std::to_string(id));
  return per_client_[std::size_t(id)];
}

void CostLedger::charge_compute(Party party, int client_id, FlopCount flops) {
  auto& c = at(client_id);
  (party == Party::kClient ? c.client_flops : c.server_flops) += flops;
  compute_log_.push_back({clock_.round, clock_.iter, party, client_id, flops});
}

void CostLedger::charge_bytes(Direction direction, int client_id, ByteCount bytes) {
  auto& c = at(client_id);
  (direction == Direction::kClientToServer ? c.bytes_up : c.bytes_down) += bytes;
}

FlopCount CostLedger::total_client_flops() const {
  FlopCount n = 0;
  for (const auto& c : per_client_) n += c.client_flops;
  return n;
}

FlopCount CostLedger::total_server_flops() const {
  FlopCount n = 0;
  for (const auto& c : per_client_) n += c.server_flops;
  return n;
}

ByteCount CostLedger::total_bytes_up() const {
  ByteCount n = 0;
  for (const auto& c : per_client_) n += c.bytes_up;
  return n;
}

ByteCount CostLedger::total_bytes_down() const {
  ByteCount n = 0;
  for (const auto& c : per_client_) n += c.bytes_down;
  return n;
}

void SimNetwork::send(Direction direction, int client_id, ByteCount bytes) {
  if (bytes == 0) throw InvariantError("network: empty message for client " + std::to_string(client_id));
  ledger_->charge_bytes(direction, client_id, bytes);
  const auto& clock = ledger_->clock();
  log_.push_back({clock.round, clock.iter, direction, client_id, bytes});
}

ByteCount SimNetwork::bytes(int client_id, Direction direction) const {
  ByteCount n = 0;
  for (const auto& m : log_)
    if (m.client_id == client_id && m.direction == direction) n += m.bytes;
  return n;
}

}  // namespace adasplit
