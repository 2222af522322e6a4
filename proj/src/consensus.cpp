#include "stakesim/consensus.hpp"

#include <algorithm>
#include <numeric>

#include "stakesim/rng.hpp"

namespace stakesim::consensus {

namespace {

using i128 = __int128;

Gwei floor_mul_div(Gwei value, std::int64_t num, std::int64_t den) {
    return static_cast<Gwei>(static_cast<i128>(value) * num / den);
}

}  // namespace

std::vector<ValidatorId> proposer_schedule(std::uint64_t seed, Epoch epoch,
                                           const std::vector<ValidatorRecord>& validators,
                                           const econ::RewardParams& params) {
    std::vector<ValidatorId> active;
    std::vector<std::uint64_t> cumulative;
    std::uint64_t total = 0;
    for (const auto& v : validators) {
        if (v.status != ValidatorStatus::Active || v.effective_balance <= 0) continue;
        total += static_cast<std::uint64_t>(v.effective_balance);
        active.push_back(v.validator_id);
        cumulative.push_back(total);
    }
    if (active.empty()) throw std::domain_error("no active validators to propose");

    Rng rng = Rng::derive(seed, "proposer-schedule", static_cast<std::uint64_t>(epoch));
    std::vector<ValidatorId> slots(params.slots_per_epoch);
    for (std::int64_t s = 0; s < params.slots_per_epoch; ++s) {
        std::uint64_t pick = rng.uniform_below(total);
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
        slots[s] = active[static_cast<std::size_t>(it - cumulative.begin())];
    }
    return slots;
}

CommitteeAssignment committee_assignment(std::uint64_t seed, Epoch epoch,
                                         const std::vector<ValidatorRecord>& validators,
                                         const econ::RewardParams& params, int topic_count) {
    std::vector<ValidatorId> active;
    for (const auto& v : validators)
        if (v.status == ValidatorStatus::Active) active.push_back(v.validator_id);
    if (active.empty()) throw std::domain_error("no active validators to assign");

    Rng rng = Rng::derive(seed, "committees", static_cast<std::uint64_t>(epoch));
    rng.shuffle(active);

    CommitteeAssignment out;
    out.slot_of.assign(validators.size(), -1);
    out.topic_of.assign(validators.size(), -1);
    const std::int64_t cells = params.slots_per_epoch * topic_count;
    for (std::size_t pos = 0; pos < active.size(); ++pos) {
        std::int64_t cell = static_cast<std::int64_t>(pos) % cells;
        out.slot_of[active[pos]] = static_cast<std::int32_t>(cell % params.slots_per_epoch);
        out.topic_of[active[pos]] = static_cast<std::int32_t>(cell / params.slots_per_epoch);
    }
    return out;
}

StateMachine::StateMachine(std::vector<ValidatorRecord> validators, econ::EconContext ctx,
                           std::uint64_t seed, bool sampled_sync)
    : validators_(std::move(validators)), ctx_(std::move(ctx)), seed_(seed), sampled_sync_(sampled_sync) {
    ctx_.validate();
    if (sampled_sync_) {
        // One committee per run; scenario horizons stay well inside a period.
        Rng rng = Rng::derive(seed_, "sync-committee");
        std::vector<std::uint64_t> cumulative;
        std::vector<ValidatorId> active;
        std::uint64_t total = 0;
        for (const auto& v : validators_) {
            if (v.status != ValidatorStatus::Active) continue;
            total += static_cast<std::uint64_t>(v.effective_balance);
            active.push_back(v.validator_id);
            cumulative.push_back(total);
        }
        for (std::int64_t i = 0; i < ctx_.params.sync_committee_size; ++i) {
            std::uint64_t pick = rng.uniform_below(total);
            auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
            sync_committee_.push_back(active[static_cast<std::size_t>(it - cumulative.begin())]);
        }
    }
}

Gwei StateMachine::total_active_effective() const {
    Gwei total = 0;
    for (const auto& v : validators_)
        if (v.status == ValidatorStatus::Active) total += v.effective_balance;
    return total;
}

void StateMachine::process_epoch(const EpochInputs& in) {
    const auto& pr = ctx_.params;
    const Gwei b = ctx_.base_reward_per_increment;
    if (in.outcomes.size() != validators_.size())
        throw ConfigError("epoch inputs must cover every validator");
    if (static_cast<std::int64_t>(in.proposer_of_slot.size()) != pr.slots_per_epoch)
        throw ConfigError("epoch inputs must cover every slot");

    // -- justification and finalization -------------------------------------
    Gwei participating = 0;
    const Gwei total = total_active_effective();
    for (const auto& v : validators_) {
        if (v.status != ValidatorStatus::Active) continue;
        const auto& o = in.outcomes[v.validator_id];
        if (o.included) participating += v.effective_balance;
    }
    const bool justified = 3 * participating >= 2 * total;

    while (static_cast<Epoch>(state_.justified_bits.size()) <= in.epoch) state_.justified_bits.push_back(0);
    state_.justified_bits[in.epoch] = justified ? 1 : 0;
    if (justified) state_.justified_checkpoint = in.epoch;

    bool finalized_now = false;
    if (justified && in.epoch > 0 && in.epoch - 1 < static_cast<Epoch>(state_.justified_bits.size()) &&
        state_.justified_bits[in.epoch - 1]) {
        if (in.epoch - 1 > state_.finalized_checkpoint) {
            state_.finalized_checkpoint = in.epoch - 1;
            finalized_now = true;
        }
    }
    if (finalized_now)
        state_.epochs_since_finality = 0;
    else
        state_.epochs_since_finality += 1;

    const bool was_leak = state_.in_leak;
    state_.in_leak = state_.epochs_since_finality > pr.leak_trigger_epochs;
    if (state_.in_leak && !was_leak && state_.leak_start_epoch < 0) state_.leak_start_epoch = in.epoch;
    if (!state_.in_leak && was_leak) state_.leak_end_epoch = in.epoch;

    // -- block bookkeeping ---------------------------------------------------
    const Slot epoch_start = in.epoch * pr.slots_per_epoch;
    while (static_cast<Slot>(state_.block_present.size()) < epoch_start + pr.slots_per_epoch)
        state_.block_present.push_back(0);
    for (std::int64_t s = 0; s < pr.slots_per_epoch; ++s) {
        if (in.proposer_of_slot[s] >= 0) {
            state_.block_present[epoch_start + s] = 1;
        } else {
            state_.missed_slots.push_back(epoch_start + s);
        }
    }

    // -- rewards and penalties ------------------------------------------------
    state_.participated_source.assign(validators_.size(), 0);
    state_.participated_target.assign(validators_.size(), 0);
    state_.participated_head.assign(validators_.size(), 0);

    for (auto& v : validators_) {
        if (v.status != ValidatorStatus::Active) continue;
        const auto& o = in.outcomes[v.validator_id];
        const std::int64_t n = v.effective_balance / pr.increment;
        const Gwei nb = n * b;

        Gwei delta = 0;
        if (o.included) {
            const bool timely_source = o.inclusion_delay <= 5;
            if (!state_.in_leak) {
                if (timely_source) {
                    delta += floor_mul_div(nb, pr.weight_source, pr.weight_denominator);
                    state_.participated_source[v.validator_id] = 1;
                }
                delta += floor_mul_div(nb, pr.weight_target, pr.weight_denominator);
                state_.participated_target[v.validator_id] = 1;
                if (o.timely_head) {
                    delta += floor_mul_div(nb, pr.weight_head, pr.weight_denominator);
                    state_.participated_head[v.validator_id] = 1;
                }
            } else {
                state_.participated_target[v.validator_id] = 1;
            }
        } else {
            delta -= floor_mul_div(nb, pr.weight_source + pr.weight_target, pr.weight_denominator);
        }

        v.inactivity_score = econ::inactivity_score_update(state_.in_leak, o.included, v.inactivity_score, pr);
        if (v.inactivity_score > 0)
            delta -= econ::inactivity_penalty(v.inactivity_score, v.effective_balance, pr);

        // Expected-value sync income for canonical-side validators.
        if (!sampled_sync_ && o.connected)
            delta += floor_mul_div(nb, pr.weight_sync, pr.weight_denominator);

        v.balance += delta;
        if (v.balance < 0) v.balance = 0;
    }

    // Proposer rewards from packed attestations plus the sync-aggregate share.
    const std::int64_t share_den = pr.weight_denominator - pr.weight_proposer;
    const Gwei member_slot_value =
        static_cast<Gwei>(static_cast<i128>(ctx_.validator_count) * ctx_.increments_per_validator * b *
                          pr.weight_sync / (pr.weight_denominator * pr.sync_committee_size * pr.slots_per_epoch));
    for (std::int64_t s = 0; s < pr.slots_per_epoch; ++s) {
        std::int64_t proposer = in.proposer_of_slot[s];
        if (proposer < 0) continue;
        ValidatorRecord& p = validators_[proposer];
        Gwei packed = s < static_cast<std::int64_t>(in.slot_attester_value.size()) ? in.slot_attester_value[s] : 0;
        Gwei reward = floor_mul_div(packed, pr.weight_proposer, share_den);

        Gwei sync_total = 0;
        if (sampled_sync_) {
            for (std::size_t m = 0; m < sync_committee_.size(); ++m) {
                bool present = m < in.sync_member_present.size() && in.sync_member_present[m];
                if (!present) continue;
                ValidatorRecord& member = validators_[sync_committee_[m]];
                if (member.status != ValidatorStatus::Active) continue;
                member.balance += member_slot_value;
                sync_total += member_slot_value;
            }
            reward += floor_mul_div(sync_total, pr.weight_proposer, share_den);
        }
        if (p.status == ValidatorStatus::Active) p.balance += reward;
    }

    // -- effective balances and ejections --------------------------------------
    for (auto& v : validators_) {
        if (v.status != ValidatorStatus::Active) continue;
        v.effective_balance = econ::update_effective_balance(v.balance, v.effective_balance, pr);
        if (v.effective_balance <= pr.ejection_balance) v.status = ValidatorStatus::Ejected;
    }

    state_.current_epoch = in.epoch + 1;
    state_.current_slot = state_.current_epoch * pr.slots_per_epoch;
}

double canonical_throughput(const ChainState& state, Slot first_slot, Slot last_slot) {
    if (first_slot > last_slot) throw std::domain_error("empty throughput window");
    if (last_slot >= static_cast<Slot>(state.block_present.size()))
        throw std::domain_error("throughput window beyond the simulated range");
    std::int64_t blocks = 0;
    for (Slot s = first_slot; s <= last_slot; ++s) blocks += state.block_present[s];
    return static_cast<double>(blocks) / static_cast<double>(last_slot - first_slot + 1);
}

}  // namespace stakesim::consensus
