#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "stakesim/rng.hpp"
#include "stakesim/types.hpp"

namespace stakesim::topo {

enum class RpkiStatus { Valid, PermissiveMaxlength, NoRoa };
std::string to_string(RpkiStatus s);
RpkiStatus rpki_from_string(const std::string& s);

struct AutonomousSystem {
    Asn asn = 0;
    std::string name;
    std::vector<std::pair<Asn, double>> neighbors;  // symmetric links, latency in ms
};

struct Prefix {
    PrefixId prefix_id = 0;
    Asn origin_asn = 0;
    int length = 24;
    RpkiStatus rpki = RpkiStatus::Valid;
    std::string country;
    std::string cidr;  // printable form used in CSV exports
};

struct NetNode {
    NodeId node_id = 0;
    PrefixId prefix_id = 0;
    std::vector<ValidatorId> hosted_validators;
    std::vector<std::uint16_t> persistent_topics;  // long-lived subscriptions
    bool all_topics = false;
    int mesh_degree = 8;
    double jitter_mean_ms = 10.0;
    double access_ms = 1.0;
};

struct PlacementConfig {
    std::string kind = "uniform";  // uniform | table | zipf | operator_blocks | paper_shaped
    std::vector<std::int64_t> counts;
    double zipf_alpha = 1.0;
    std::int64_t operator_count = 0;
    std::int64_t block_min = 8;
    std::int64_t block_max = 32;
    double solo_fraction = 0.4;
    int multi_as_operators = 0;  // operators deliberately split across two ASes
};

struct TopologyConfig {
    std::int64_t as_count = 20;
    std::string graph = "full_mesh";  // full_mesh | ring_chords
    int chords_per_as = 2;
    double inter_as_latency_min_ms = 15.0;
    double inter_as_latency_max_ms = 30.0;
    double access_latency_min_ms = 0.5;
    double access_latency_max_ms = 2.0;
    std::int64_t prefixes_per_as = 1;
    std::int64_t nodes_per_prefix = 1;
    std::int64_t validators = 0;
    PlacementConfig placement;
    int mesh_degree = 8;
    double jitter_mean_ms = 10.0;
    std::int64_t subscribe_all_threshold = 64;
    int persistent_topics_per_node = 2;
    int topic_count = 64;
    bool build_latencies = true;
    double rpki_permissive_share = 0.2698;
    double rpki_noroa_share = 0.1387;

    static TopologyConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

class Topology {
  public:
    TopologyConfig config;
    std::uint64_t seed = 0;
    std::vector<AutonomousSystem> ases;
    std::vector<Prefix> prefixes;
    std::vector<NetNode> nodes;
    std::vector<std::vector<NodeId>> prefix_nodes;

    // Ground truth: one hosting node per validator ("single machine" rule).
    std::vector<PrefixId> validator_prefix;
    std::vector<NodeId> validator_node;
    std::vector<std::uint32_t> validator_cluster;  // deposit-key cluster ids

    std::int64_t validator_count() const { return static_cast<std::int64_t>(validator_prefix.size()); }
    Asn node_asn(NodeId n) const { return prefixes[nodes[n].prefix_id].origin_asn; }
    bool has_latencies() const { return !as_dist_.empty(); }
    double as_distance(Asn a, Asn b) const;
    // Shortest-AS-path latency plus per-node access links; no jitter.
    double base_latency(NodeId a, NodeId b) const;

    void set_as_distances(std::vector<double> dist) { as_dist_ = std::move(dist); }

  private:
    std::vector<double> as_dist_;  // row-major |AS|^2, empty when not built
};

Topology build_topology(const TopologyConfig& config, std::uint64_t seed);

// Base path latency plus a processing-jitter draw at the receiver.
double path_latency(const Topology& topo, NodeId a, NodeId b, Rng& rng);

enum class HijackMode { PartitionDrop, ProposerDrop };
std::string to_string(HijackMode m);

struct HijackAction {
    HijackMode mode = HijackMode::PartitionDrop;
    std::vector<PrefixId> prefixes;
    Slot start = 0;
    Slot end = 0;  // inclusive
    double success_probability = 1.0;
    std::vector<NodeId> partition_membership;  // derived from prefixes
    std::uint64_t pair_seed = 0;               // derived; drives per-pair success draws
};

class ConnectivityOracle {
  public:
    ConnectivityOracle(const Topology& topo, std::vector<HijackAction> actions);
    bool reachable(NodeId a, NodeId b, Slot t) const;
    const std::vector<HijackAction>& actions() const { return actions_; }
    void add_action(HijackAction action);

  private:
    void install(HijackAction& action);
    const Topology* topo_;
    std::vector<HijackAction> actions_;
    std::vector<std::vector<char>> member_;  // per action, per node
};

struct MappingRow {
    std::int64_t validator_id = 0;
    std::string prefix;
    std::string asn;
    std::string rpki;
    std::string country;
};

struct MappingTable {
    std::vector<MappingRow> rows;
};

MappingTable ingest_mapping_csv(const std::string& path);
void write_mapping_csv(const std::string& path, const MappingTable& table);
MappingTable export_mapping(const Topology& topo);

struct RpkiShares {
    double valid = 0;
    double permissive_maxlength = 0;
    double no_roa = 0;
    double unprotected() const { return permissive_maxlength + no_roa; }
};

RpkiShares rpki_exposure(const Topology& topo);       // over nodes
RpkiShares rpki_exposure(const MappingTable& table);  // over mapping rows

// Preset configurations.
TopologyConfig devnet_config(std::int64_t node_count = 20, std::int64_t validators = 1008);
TopologyConfig inference_default_config();
std::vector<std::int64_t> paper_shaped_prefix_counts();  // calibrated heavy-tail table
Topology make_paper_shaped_topology(std::uint64_t seed);

}  // namespace stakesim::topo
