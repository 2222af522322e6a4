#pragma once

#include <optional>
#include <vector>

#include "stakesim/types.hpp"

namespace stakesim::econ {

// Protocol constants. All Gwei amounts in the module derive from these.
struct RewardParams {
    std::int64_t weight_source = 14;
    std::int64_t weight_target = 26;
    std::int64_t weight_head = 14;
    std::int64_t weight_sync = 2;
    std::int64_t weight_proposer = 8;
    std::int64_t weight_denominator = 64;
    std::int64_t base_reward_factor = 64;
    Gwei increment = kGweiPerEth;
    std::int64_t inactivity_bias = 4;
    std::int64_t inactivity_quotient = std::int64_t{1} << 24;
    std::int64_t inactivity_recovery = 16;
    Gwei ejection_balance = 16 * kGweiPerEth;
    std::int64_t sync_committee_size = 512;
    std::int64_t slots_per_epoch = 32;
    std::int64_t seconds_per_slot = 12;
    std::int64_t leak_trigger_epochs = 4;
    std::int64_t max_included_attestation_slots = 8;

    void validate() const;
    double epoch_seconds() const { return static_cast<double>(slots_per_epoch * seconds_per_slot); }
};

struct EconContext {
    RewardParams params{};
    std::int64_t validator_count = 0;           // N
    std::int64_t increments_per_validator = 0;  // n, effective-balance increments of 1 ETH
    Gwei base_reward_per_increment = 0;         // b, derived from total stake
    Gwei total_active_stake = 0;

    // Uniform-balance context: N validators at eth_per_validator each.
    static EconContext uniform(std::int64_t n_validators, std::int64_t eth_per_validator = 32,
                               const RewardParams& params = {});
    void validate() const;
};

// Per-epoch expected reward components for one validator, plus the two
// derived block/sync quantities.
struct RewardComponents {
    Gwei r_source = 0;
    Gwei r_target = 0;
    Gwei r_head = 0;
    Gwei r_attestation_total = 0;
    Gwei r_proposer_avg = 0;
    Gwei r_sync_avg = 0;
    Gwei r_block_full = 0;          // proposer reward for one fully packed block
    Gwei r_sync_member_epoch = 0;   // per sync-committee member per epoch

    Gwei full_epoch_total() const { return r_attestation_total + r_proposer_avg + r_sync_avg; }
};

struct LossBreakdown {
    double hijacked_missed_rewards = 0;        // Gwei, aggregate
    double hijacked_attestation_penalties = 0; // Gwei, aggregate
    double hijacked_inactivity_penalties = 0;  // Gwei, aggregate
    double nonhijacked_losses = 0;             // Gwei, aggregate
    double total = 0;                          // Gwei, aggregate
    bool leak_triggered = false;
    std::optional<std::int64_t> leak_start_epoch;
};

// Leak handling in aggregate loss accounting. Auto applies the protocol rule
// (leak after leak_trigger_epochs when p > 1/3); the forced modes reproduce
// the with-leak / without-leak curve variants.
enum class LeakMode { Auto, ForcedOn, ForcedOff };

Gwei base_reward(Gwei total_active_stake, const RewardParams& params = {});
RewardComponents reward_components(const EconContext& ctx);

// Expected per-epoch loss of a non-hijacked validator at hijacked fraction p.
double nonhijacked_loss_rate(double p, bool leak, const EconContext& ctx);
// Expected per-epoch reward of a non-hijacked validator at hijacked fraction p.
double expected_validator_reward(double p, bool leak, const EconContext& ctx);

Gwei attestation_penalty(const EconContext& ctx);
Gwei attestation_penalty_for_increments(std::int64_t increments, const EconContext& ctx);

Gwei inactivity_penalty(std::int64_t score, Gwei effective_balance, const RewardParams& params = {});
std::int64_t inactivity_score_update(bool in_leak, bool participated, std::int64_t score,
                                     const RewardParams& params = {});

// Effective balance hysteresis: steps down when the balance falls more than
// 0.25 ETH below the current boundary, up when it exceeds it by 1.25 ETH.
Gwei update_effective_balance(Gwei balance, Gwei current_effective, const RewardParams& params = {});

LossBreakdown aggregate_attack_losses(double p, double duration_epochs, const EconContext& ctx,
                                      LeakMode mode = LeakMode::Auto);

struct EjectionResult {
    bool converged = false;
    std::int64_t epochs = 0;
};
// Epochs until effective balance reaches the ejection threshold under a
// continuous leak with the validator absent throughout.
EjectionResult time_to_ejection(Gwei initial_balance, const EconContext& ctx,
                                bool inactivity_enabled = true, std::int64_t max_epochs = 60'000);

// Proposer reward for a block packing attestations with the given inclusion
// delays (one entry per covered slot), plus the sync-aggregate share.
Gwei knockblock_block_reward(const std::vector<int>& included_slot_delays, const EconContext& ctx);

struct ProfitReport {
    double annual_uplift_eth = 0;
    double annual_revenue_usd = 0;
    double annual_profit_usd = 0;
    std::int64_t break_even_validators = 0;  // smallest owned count with positive profit
};
ProfitReport knockblock_profitability(std::int64_t validators_owned, double annual_as_cost_usd,
                                      double eth_price_usd, double proposals_per_year,
                                      double mev_uplift_eth, double attestation_uplift_eth);

double throughput_factor(double p);

}  // namespace stakesim::econ
