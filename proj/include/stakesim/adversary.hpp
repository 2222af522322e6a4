#pragma once

#include <optional>
#include <vector>

#include "stakesim/inference.hpp"
#include "stakesim/topology.hpp"
#include "stakesim/types.hpp"

namespace stakesim::adversary {

enum class AttackKind { Stakebleed, Knockblock };

// What the attacker believes about validator locations: a ranked prefix
// candidate list per validator, best first.
struct AttackerMapping {
    std::vector<std::vector<PrefixId>> candidates;
    std::int64_t prefix_count = 0;

    static AttackerMapping from_ground_truth(const topo::Topology& topo);
    // Ground truth with a fraction of validators mapped to a wrong primary
    // prefix; the true prefix stays as the next-best candidate. When
    // decoy_prefixes > 0 the wrong assignments concentrate on that many
    // prefixes, the way stale mappings pile up behind shared egress points.
    static AttackerMapping with_errors(const topo::Topology& topo, double wrong_fraction,
                                       std::uint64_t seed, int decoy_prefixes = 0);
    static AttackerMapping from_inference(const infer::MappingResult& mapping,
                                          const infer::CandidateSet& candidates,
                                          std::int64_t validator_count, std::int64_t prefix_count);

    std::vector<std::int64_t> prefix_density() const;  // validators per primary prefix
};

struct AttackPlan {
    AttackKind kind = AttackKind::Stakebleed;
    std::vector<topo::HijackAction> hijack_actions;

    // stakebleed
    double target_fraction = 0;
    double achieved_fraction = 0;
    std::vector<PrefixId> selected_prefixes;  // descending hosted-validator density
    std::vector<ValidatorId> targeted_validators;
    std::vector<std::size_t> next_candidate;  // per validator: next fallback index

    // knockblock
    Slot own_slot = -1;
    Slot target_slot = -1;
    ValidatorId own_validator = 0;
    ValidatorId target_validator = 0;
    std::int64_t lead_time_slots = 8;
    std::vector<PrefixId> hedge_prefixes;
    std::vector<int> expected_delays;  // attestation slots the attacker's block absorbs

    double active_hijack_seconds(double seconds_per_slot) const;
};

struct SelectionResult {
    std::vector<PrefixId> prefixes;
    double achieved_fraction = 0;
};

// Greedy selection by descending hosted-validator count until the cumulative
// mapped stake reaches the target fraction.
SelectionResult stakebleed_select_prefixes(const AttackerMapping& mapping, double target_fraction);

AttackPlan stakebleed_plan(const AttackerMapping& mapping, double target_fraction, Slot start_slot,
                           Slot end_slot, double success_probability);

struct ExpansionReport {
    std::vector<PrefixId> added_prefixes;
    std::vector<ValidatorId> exhausted_validators;  // no candidates left
};

// Called at an epoch boundary with the targeted validators whose attestations
// appeared on the canonical chain; extends the plan with their next-best
// candidate prefixes starting at from_slot.
ExpansionReport stakebleed_monitor_and_expand(AttackPlan& plan, const AttackerMapping& mapping,
                                              const std::vector<ValidatorId>& leaking_validators,
                                              Slot from_slot);

// schedule: canonical proposer per absolute slot, covering the 2-epoch
// lookahead window starting at slot 0 of the current epoch.
AttackPlan knockblock_plan(const std::vector<ValidatorId>& schedule, ValidatorId own_validator,
                           const AttackerMapping& mapping, std::int64_t lead_time_slots,
                           int hedge_candidates, std::int64_t max_included_attestation_slots);

}  // namespace stakesim::adversary
