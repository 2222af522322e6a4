#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "stakesim/adversary.hpp"
#include "stakesim/consensus.hpp"
#include "stakesim/econ.hpp"
#include "stakesim/gossip.hpp"
#include "stakesim/inference.hpp"
#include "stakesim/topology.hpp"

namespace stakesim::scenario {

struct AttackSpec {
    std::string kind = "none";  // none | stakebleed | knockblock
    double target_fraction = 0.35;
    Slot start_slot = 0;
    Slot end_slot = 0;
    double success_probability = 1.0;
    bool monitor_expand = false;
    double mis_mapping_fraction = 0.0;
    int mis_mapping_decoys = 0;
    // knockblock
    std::optional<ValidatorId> own_validator;  // default: a scheduled epoch-1 proposer
    std::int64_t lead_time_slots = 8;
    int hedge_candidates = 2;
    double mev_baseline_eth = 0.112;
    double mev_multiplier = 1.445;
};

struct ScenarioConfig {
    std::uint64_t seed = 0;
    topo::TopologyConfig topology;
    gossip::GossipParams gossip;
    std::int64_t duration_slots = 64;
    std::string inclusion = "connectivity";  // connectivity | gossip
    bool sampled_sync = false;
    bool emit_traces = false;
    double attestation_offset_ms = 4000.0;
    AttackSpec attack;
    gossip::Countermeasure countermeasure;

    static ScenarioConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct EpochBalances {
    Epoch epoch = 0;
    double hijacked_mean = 0;   // Gwei
    double connected_mean = 0;  // Gwei
    double hijacked_mean_score = 0;
};

struct ScenarioResult {
    topo::Topology topology;
    econ::EconContext ctx;
    consensus::ChainState state;
    std::vector<consensus::ValidatorRecord> validators;
    std::vector<EpochBalances> balance_timeline;
    std::vector<gossip::DeliveryRecord> observer_records;
    std::vector<ValidatorId> hijacked_validators;  // membership of the initial plan
    nlohmann::json attack_report;
    Slot first_attack_slot = -1;
    Slot last_attack_slot = -1;
};

ScenarioResult run_scenario(const ScenarioConfig& cfg);

// Devnet replication scenario: 20 full nodes, 1,008 validators, a 37%
// three-node partition.
ScenarioConfig devnet_scenario(std::uint64_t seed, Slot hijack_start = 208, Slot hijack_end = 1018,
                               std::int64_t duration_slots = 2240);

// Inference scenario: a large network observed by a passive collector.
ScenarioConfig inference_scenario(std::uint64_t seed, std::int64_t epochs = 20);

struct PipelineConfig {
    infer::TrainConfig train;
    double efficiency_threshold = 0.2;
    int finalize_cap_epochs = 8;
};

struct PipelineResult {
    std::int64_t validators = 0;
    infer::CandidateSet candidates;
    infer::SeedMapping seeds;
    double shuffle_coverage = 0;
    bool trained = false;
    double held_out_accuracy = 0;
    std::vector<double> loss_history;
    std::int64_t training_examples = 0;
    std::int64_t dropped_examples = 0;
    infer::MappingResult mapping;
    infer::MappingResult alt_mapping;
    double accuracy = 0;
    double alt_accuracy = 0;
    double host_in_top10 = 0;  // true prefix among candidates
    double host_rank1 = 0;
    infer::FeatureScaler scaler;
    std::optional<infer::Mlp> model;
};

PipelineResult run_inference_pipeline(const std::vector<gossip::DeliveryRecord>& records,
                                      const topo::Topology& topology, NodeId observer,
                                      const PipelineConfig& cfg, std::uint64_t seed);

struct CountermeasureRow {
    std::string mode;
    double accuracy = 0;
    double coverage = 0;  // fraction of validators mapped at all
};

std::vector<CountermeasureRow> countermeasure_eval(const ScenarioConfig& base,
                                                   const std::vector<gossip::Countermeasure>& modes,
                                                   const PipelineConfig& pipeline);

}  // namespace stakesim::scenario
