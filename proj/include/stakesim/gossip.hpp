#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "json.hpp"
#include "stakesim/rng.hpp"
#include "stakesim/topology.hpp"
#include "stakesim/types.hpp"

namespace stakesim::gossip {

enum class MessageKind { Attestation, Block, IhaveAdvert };
enum class Channel { MeshEager, Fanout, IhaveThenPull };
std::string to_string(Channel c);

struct GossipMessage {
    std::uint64_t message_id = 0;
    MessageKind kind = MessageKind::Attestation;
    ValidatorId validator_id = 0;
    std::uint16_t topic_id = 0;
    NodeId origin_node = 0;
    Slot slot = 0;
    Millis origin_ts = 0;
};

struct DeliveryRecord {
    std::uint64_t message_id = 0;
    ValidatorId validator_id = 0;
    NodeId receiver_node = 0;
    NodeId sender_node = 0;
    Millis rx_ts = 0;
    Channel channel = Channel::MeshEager;
    bool sender_subscribed = false;
    bool previously_advertised = false;
    Slot slot = 0;
    Millis origin_ts = 0;
    NodeId origin_node = 0;
    std::uint16_t topic_id = 0;
};

enum class RecordScope { All, ObserverOnly, None };

struct GossipParams {
    double heartbeat_interval_ms = 1000.0;
    int fanout_size = 6;
    int gossip_lazy = 6;
    double pull_rtt_ms = 50.0;
    int peer_degree = 30;
    int observer_mesh_cap = 8;  // members pushing eagerly to the observer, per topic
    std::optional<NodeId> observer_node;
    RecordScope record_scope = RecordScope::All;

    static GossipParams from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// First heartbeat boundary at or after t.
Millis next_heartbeat(Millis t, double interval_ms);

// Deterministic per-topic overlay: meshes among subscribed members, a flat
// peer graph for fanout/IHAVE targets, and the observer's graft set.
class Mesh {
  public:
    Mesh(const topo::Topology& topo, const GossipParams& params, std::uint64_t seed);

    bool subscribed(NodeId n, int topic) const;
    const std::vector<NodeId>& members(int topic) const { return members_[topic]; }
    const std::vector<NodeId>& mesh_neighbors(int topic, NodeId n) const;
    const std::vector<NodeId>& observer_sources(int topic) const { return observer_sources_[topic]; }
    const std::vector<NodeId>& peers(NodeId n) const { return peers_[n]; }
    const GossipParams& params() const { return params_; }

  private:
    const topo::Topology* topo_;
    GossipParams params_;
    std::vector<std::vector<NodeId>> members_;
    std::vector<std::vector<NodeId>> observer_sources_;
    std::vector<std::vector<NodeId>> peers_;
    // per topic, per member: mesh adjacency
    std::vector<std::vector<std::vector<NodeId>>> mesh_adj_;
    std::vector<std::vector<std::int32_t>> member_index_;  // per topic, node -> member slot
    std::vector<NodeId> empty_;
};

struct PropagationResult {
    std::vector<DeliveryRecord> records;
    std::vector<Millis> first_arrival;  // per node, +inf when unreached
};

inline constexpr Millis kNever = std::numeric_limits<double>::infinity();

PropagationResult propagate(const GossipMessage& msg, const topo::Topology& topo, const Mesh& mesh,
                            const topo::ConnectivityOracle& oracle, std::uint64_t trace_seed);

enum class CountermeasureMode { None, AddLatency, DisableEagerOos, ProxyBroadcast };
std::string to_string(CountermeasureMode m);
CountermeasureMode countermeasure_from_string(const std::string& s);

struct Countermeasure {
    CountermeasureMode mode = CountermeasureMode::None;
    double mean_ms = 0.0;  // AddLatency parameter
};

std::vector<DeliveryRecord> countermeasure_transform(std::vector<DeliveryRecord> records,
                                                     const Countermeasure& cm, const GossipParams& params,
                                                     std::int64_t node_count, std::uint64_t seed);

}  // namespace stakesim::gossip
