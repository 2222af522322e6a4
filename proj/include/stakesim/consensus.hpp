#pragma once

#include <vector>

#include "stakesim/econ.hpp"
#include "stakesim/types.hpp"

namespace stakesim::consensus {

enum class ValidatorStatus { Active, Ejected };

struct ValidatorRecord {
    ValidatorId validator_id = 0;
    Gwei balance = 0;
    Gwei effective_balance = 0;
    std::int64_t inactivity_score = 0;
    NodeId node_id = 0;
    std::uint32_t deposit_cluster_id = 0;
    ValidatorStatus status = ValidatorStatus::Active;
};

struct ChainState {
    Slot current_slot = 0;
    Epoch current_epoch = 0;
    Epoch justified_checkpoint = -1;
    Epoch finalized_checkpoint = -1;
    // Consecutive completed epochs without a finalization event.
    std::int64_t epochs_since_finality = 0;
    bool in_leak = false;
    std::vector<char> justified_bits;      // per epoch
    std::vector<char> block_present;       // per slot
    std::vector<Slot> missed_slots;
    Epoch leak_start_epoch = -1;           // first leak-accounted epoch
    Epoch leak_end_epoch = -1;
    // Participation of the last processed epoch.
    std::vector<char> participated_source;
    std::vector<char> participated_target;
    std::vector<char> participated_head;
};

// Weighted proposer sampling for one epoch: one validator per slot,
// probability proportional to effective balance, ejected excluded.
std::vector<ValidatorId> proposer_schedule(std::uint64_t seed, Epoch epoch,
                                           const std::vector<ValidatorRecord>& validators,
                                           const econ::RewardParams& params);

struct CommitteeAssignment {
    std::vector<std::int32_t> slot_of;   // per validator, -1 when inactive
    std::vector<std::int32_t> topic_of;  // per validator, -1 when inactive
};

CommitteeAssignment committee_assignment(std::uint64_t seed, Epoch epoch,
                                         const std::vector<ValidatorRecord>& validators,
                                         const econ::RewardParams& params, int topic_count);

struct AttestationOutcome {
    bool connected = false;      // on the canonical side for the epoch
    bool included = false;
    int inclusion_delay = 0;     // slots; 1 = next slot
    bool timely_head = false;    // delay 1 into a canonical block
};

struct EpochInputs {
    Epoch epoch = 0;
    std::vector<AttestationOutcome> outcomes;     // per validator
    std::vector<std::int64_t> proposer_of_slot;   // per slot, -1 = missed
    std::vector<Gwei> slot_attester_value;        // packed attester value per slot
    std::vector<char> sync_member_present;        // per sampled member; empty in expected mode
};

class StateMachine {
  public:
    StateMachine(std::vector<ValidatorRecord> validators, econ::EconContext ctx, std::uint64_t seed,
                 bool sampled_sync);

    const ChainState& state() const { return state_; }
    const std::vector<ValidatorRecord>& validators() const { return validators_; }
    const std::vector<ValidatorId>& sync_committee() const { return sync_committee_; }
    const econ::EconContext& ctx() const { return ctx_; }
    Gwei total_active_effective() const;

    void process_epoch(const EpochInputs& in);

  private:
    std::vector<ValidatorRecord> validators_;
    econ::EconContext ctx_;
    std::uint64_t seed_;
    bool sampled_sync_;
    std::vector<ValidatorId> sync_committee_;
    ChainState state_;
};

// Fraction of slots carrying canonical blocks inside [first_slot, last_slot].
double canonical_throughput(const ChainState& state, Slot first_slot, Slot last_slot);

}  // namespace stakesim::consensus
