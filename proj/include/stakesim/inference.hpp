#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stakesim/gossip.hpp"
#include "stakesim/mlp.hpp"
#include "stakesim/topology.hpp"
#include "stakesim/types.hpp"

namespace stakesim::infer {

struct ObserverConfig {
    NodeId observer_node = 0;
    int finalize_cap_epochs = 8;  // hard upper bound on per-peer observation
    double slot_ms = 12'000.0;
    int slots_per_epoch = 32;
};

struct PeerStats {
    std::int64_t eager_count = 0;   // mesh-pushed samples
    std::int64_t oos_count = 0;     // fanout pushes from unsubscribed senders
    std::int64_t total_count = 0;   // all deliveries, eligible or not
    std::int64_t fastest_first = 0; // messages this sender delivered first
    std::vector<double> latencies;  // relative latency of eligible samples
};

struct ObservationLog {
    std::int64_t validator_count = 0;
    std::int64_t node_count = 0;
    // per validator: sender -> stats (ordered map keeps everything deterministic)
    std::vector<std::map<NodeId, PeerStats>> per_validator;
    std::vector<std::int64_t> messages_seen;  // per validator
    std::vector<char> peer_finalized;
    std::vector<double> finalize_ts_ms;  // -1 when never finalized
};

ObservationLog collect(const std::vector<gossip::DeliveryRecord>& records, std::int64_t validator_count,
                       std::int64_t node_count, const ObserverConfig& cfg);

struct Candidate {
    PrefixId prefix_id = 0;
    NodeId best_node = 0;
    double min_latency = 0;
    double median_latency = 0;
    double eager_count = 0;
    double oos_count = 0;
    double total_count = 0;
    double fastest_first_share = 0;
};

inline constexpr int kCandidateFeatures = 6;
inline constexpr int kMaxCandidates = 10;

struct CandidateSet {
    std::vector<std::vector<Candidate>> per_validator;  // ordered by min latency, <= 10 prefixes
    std::int64_t excluded_validators = 0;               // no eligible samples at all
};

CandidateSet rank_candidates(const ObservationLog& log, const topo::Topology& topo);

struct SeedMapping {
    std::map<ValidatorId, PrefixId> assignments;
    double coverage = 0;  // fraction of validators seeded
};

SeedMapping consecutive_id_seed(const CandidateSet& candidates);
// Coverage after a seeded permutation of validator ids, for the control run.
double shuffle_control(const CandidateSet& candidates, std::uint64_t seed);

// Normalized Shannon entropy of a distribution over k categories.
double efficiency_score(const std::vector<double>& as_distribution);

struct FeatureScaler {
    double mean[kCandidateFeatures] = {0};
    double sd[kCandidateFeatures] = {0};
};

struct TrainingSet {
    std::vector<double> X;  // row-major, n x (10 * features)
    std::vector<int> y;
    std::vector<ValidatorId> validator_ids;
    int n = 0;
    std::int64_t dropped = 0;  // seeds whose prefix fell outside the top-10
    FeatureScaler scaler;
};

TrainingSet build_training_set(const CandidateSet& candidates, const SeedMapping& seeds,
                               const std::vector<std::uint32_t>& clusters, const topo::Topology& topo,
                               double efficiency_threshold);

struct TrainConfig {
    std::vector<int> hidden = {128, 128, 128, 64};
    double learning_rate = 0.001;
    int passes = 1000;
    double holdout_fraction = 0.2;
};

struct TrainResult {
    Mlp model;
    FeatureScaler scaler;
    double held_out_accuracy = 0;
    std::vector<double> loss_history;
    int train_examples = 0;
    int holdout_examples = 0;
};

TrainResult train(const TrainingSet& data, const TrainConfig& cfg, std::uint64_t seed);

enum class MappingConfidence { Seeded, Model };

struct MappingEntry {
    PrefixId prefix_id = 0;
    MappingConfidence confidence = MappingConfidence::Model;
    double score = 0;
};

struct MappingResult {
    std::map<ValidatorId, MappingEntry> entries;
};

MappingResult predict_all(const Mlp& model, const FeatureScaler& scaler, const CandidateSet& candidates,
                          const SeedMapping& seeds);

// Appendix-style fallback: most OOS among the latency candidates.
MappingResult alt_heuristic(const CandidateSet& candidates);

// Fraction of all validators mapped to their true prefix (unmapped count as
// wrong).
double mapping_accuracy(const MappingResult& mapping, const topo::Topology& topo);

topo::MappingTable to_mapping_table(const MappingResult& mapping, const topo::Topology& topo);

// Feature vector layout helper shared by training and prediction.
void fill_features(const std::vector<Candidate>& list, const FeatureScaler& scaler, double* out);

}  // namespace stakesim::infer
