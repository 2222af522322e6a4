#include "stakesim/econ.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace stakesim::econ {

namespace {

using i128 = __int128;

Gwei floor_div(i128 num, i128 den) { return static_cast<Gwei>(num / den); }

}  // namespace

void RewardParams::validate() const {
    if (weight_source + weight_target + weight_head + weight_sync + weight_proposer != weight_denominator)
        throw ConfigError("duty weights must sum to the weight denominator");
    for (std::int64_t v : {weight_source, weight_target, weight_head, weight_sync, weight_proposer,
                           weight_denominator, base_reward_factor, static_cast<std::int64_t>(increment),
                           inactivity_bias, inactivity_quotient, inactivity_recovery,
                           static_cast<std::int64_t>(ejection_balance), sync_committee_size, slots_per_epoch,
                           seconds_per_slot, leak_trigger_epochs, max_included_attestation_slots})
        if (v <= 0) throw ConfigError("reward params must be strictly positive");
}

EconContext EconContext::uniform(std::int64_t n_validators, std::int64_t eth_per_validator,
                                 const RewardParams& params) {
    EconContext ctx;
    ctx.params = params;
    ctx.validator_count = n_validators;
    ctx.increments_per_validator = eth_per_validator;
    ctx.total_active_stake = n_validators * eth_per_validator * params.increment;
    ctx.base_reward_per_increment = base_reward(ctx.total_active_stake, params);
    return ctx;
}

void EconContext::validate() const {
    params.validate();
    if (validator_count <= 0) throw ConfigError("validator count must be positive");
    if (increments_per_validator < 0) throw ConfigError("negative balance increments");
    if (total_active_stake <= 0) throw ConfigError("total active stake must be positive");
}

Gwei base_reward(Gwei total_active_stake, const RewardParams& params) {
    if (total_active_stake <= 0) throw std::domain_error("total active stake must be positive");
    std::uint64_t root = isqrt_u128(static_cast<unsigned __int128>(total_active_stake));
    return floor_div(static_cast<i128>(params.increment) * params.base_reward_factor, root);
}

RewardComponents reward_components(const EconContext& ctx) {
    ctx.validate();
    const auto& pr = ctx.params;
    const i128 nb = static_cast<i128>(ctx.increments_per_validator) * ctx.base_reward_per_increment;

    RewardComponents rc;
    rc.r_source = floor_div(nb * pr.weight_source, pr.weight_denominator);
    rc.r_target = floor_div(nb * pr.weight_target, pr.weight_denominator);
    rc.r_head = floor_div(nb * pr.weight_head, pr.weight_denominator);
    rc.r_attestation_total = rc.r_source + rc.r_target + rc.r_head;
    rc.r_proposer_avg = floor_div(nb * pr.weight_proposer, pr.weight_denominator);
    rc.r_sync_avg = floor_div(nb * pr.weight_sync, pr.weight_denominator);
    rc.r_block_full = floor_div(static_cast<i128>(rc.r_proposer_avg) * ctx.validator_count, pr.slots_per_epoch);
    rc.r_sync_member_epoch = floor_div(nb * ctx.validator_count * pr.weight_sync,
                                       static_cast<i128>(pr.weight_denominator) * pr.sync_committee_size);
    return rc;
}

double nonhijacked_loss_rate(double p, bool leak, const EconContext& ctx) {
    if (p < 0.0 || p > 1.0) throw std::domain_error("hijacked fraction out of [0,1]");
    const RewardComponents rc = reward_components(ctx);
    const double proposer_term =
        static_cast<double>(ctx.params.slots_per_epoch) * static_cast<double>(rc.r_block_full) /
        static_cast<double>(ctx.validator_count);
    if (leak) return static_cast<double>(rc.r_proposer_avg) * p + static_cast<double>(rc.r_attestation_total);
    // Expansion of full reward minus E[R_V]: linear and quadratic coefficients
    // fall out of the components instead of being hardcoded.
    const double linear = 2.0 * static_cast<double>(rc.r_head) + static_cast<double>(rc.r_source) +
                          static_cast<double>(rc.r_target) + proposer_term;
    return linear * p - static_cast<double>(rc.r_head) * p * p;
}

double expected_validator_reward(double p, bool leak, const EconContext& ctx) {
    if (p < 0.0 || p > 1.0) throw std::domain_error("hijacked fraction out of [0,1]");
    const RewardComponents rc = reward_components(ctx);
    const double n = static_cast<double>(ctx.validator_count);
    const double proposer_term =
        static_cast<double>(ctx.params.slots_per_epoch) * static_cast<double>(rc.r_block_full) / n;
    // r_sync_member_epoch is already a per-epoch quantity, so the expected
    // per-validator sync income is members * member_reward / N.
    const double sync_term = static_cast<double>(ctx.params.sync_committee_size) *
                             static_cast<double>(rc.r_sync_member_epoch) / n;
    const double attn = leak ? 0.0
                             : (1.0 - p) * static_cast<double>(rc.r_head) + static_cast<double>(rc.r_source) +
                                   static_cast<double>(rc.r_target);
    return (1.0 - p) * (attn + proposer_term) + sync_term;
}

Gwei attestation_penalty(const EconContext& ctx) {
    return attestation_penalty_for_increments(ctx.increments_per_validator, ctx);
}

Gwei attestation_penalty_for_increments(std::int64_t increments, const EconContext& ctx) {
    const auto& pr = ctx.params;
    const i128 nb = static_cast<i128>(increments) * ctx.base_reward_per_increment;
    return floor_div(nb * (pr.weight_source + pr.weight_target), pr.weight_denominator);
}

Gwei inactivity_penalty(std::int64_t score, Gwei effective_balance, const RewardParams& params) {
    if (score < 0 || effective_balance < 0) throw std::domain_error("negative inactivity inputs");
    return floor_div(static_cast<i128>(score) * effective_balance,
                     static_cast<i128>(params.inactivity_bias) * params.inactivity_quotient);
}

std::int64_t inactivity_score_update(bool in_leak, bool participated, std::int64_t score,
                                     const RewardParams& params) {
    if (score < 0) throw std::domain_error("negative inactivity score");
    if (in_leak) {
        if (!participated) return score + params.inactivity_bias;
        return std::max<std::int64_t>(score - 1, 0);
    }
    return std::max<std::int64_t>(score - params.inactivity_recovery, 0);
}

Gwei update_effective_balance(Gwei balance, Gwei current_effective, const RewardParams& params) {
    const Gwei inc = params.increment;
    const Gwei down = inc / 4;        // 0.25 ETH
    const Gwei up = inc + inc / 4;    // 1.25 ETH
    Gwei eff = current_effective;
    while (eff > 0 && balance + down < eff) eff -= inc;
    while (balance >= eff + up && eff + inc <= 32 * inc) eff += inc;
    if (eff < 0) eff = 0;
    return eff;
}

LossBreakdown aggregate_attack_losses(double p, double duration_epochs, const EconContext& ctx,
                                      LeakMode mode) {
    if (p < 0.0 || p > 1.0) throw std::domain_error("hijacked fraction out of [0,1]");
    if (duration_epochs < 0.0) throw std::domain_error("negative duration");
    ctx.validate();

    const RewardComponents rc = reward_components(ctx);
    const double full_reward = static_cast<double>(rc.full_epoch_total());
    const double hijacked_count = p * static_cast<double>(ctx.validator_count);
    const double nonhijacked_count = static_cast<double>(ctx.validator_count) - hijacked_count;

    LossBreakdown out;
    // Representative hijacked validator; all hijacked validators evolve alike.
    Gwei balance = ctx.increments_per_validator * ctx.params.increment;
    Gwei effective = balance;
    std::int64_t score = 0;

    for (std::int64_t k = 0; static_cast<double>(k) < duration_epochs; ++k) {
        const double f = std::min(1.0, duration_epochs - static_cast<double>(k));
        bool leak = false;
        switch (mode) {
            case LeakMode::Auto:
                leak = p > 1.0 / 3.0 && k >= ctx.params.leak_trigger_epochs;
                break;
            case LeakMode::ForcedOn:
                leak = k >= ctx.params.leak_trigger_epochs;
                break;
            case LeakMode::ForcedOff:
                leak = false;
                break;
        }
        if (leak && !out.leak_triggered) {
            out.leak_triggered = true;
            out.leak_start_epoch = k;
        }

        const std::int64_t increments = effective / ctx.params.increment;
        const Gwei attn = attestation_penalty_for_increments(increments, ctx);
        Gwei inact = 0;
        if (leak) {
            score = inactivity_score_update(true, false, score, ctx.params);
            inact = inactivity_penalty(score, effective, ctx.params);
        } else if (score > 0) {
            score = inactivity_score_update(false, false, score, ctx.params);
            inact = inactivity_penalty(score, effective, ctx.params);
        }

        out.hijacked_missed_rewards += hijacked_count * f * full_reward;
        out.hijacked_attestation_penalties += hijacked_count * f * static_cast<double>(attn);
        out.hijacked_inactivity_penalties += hijacked_count * f * static_cast<double>(inact);
        out.nonhijacked_losses += nonhijacked_count * f * nonhijacked_loss_rate(p, leak, ctx);

        balance -= static_cast<Gwei>(static_cast<double>(attn + inact) * f);
        effective = update_effective_balance(balance, effective, ctx.params);
    }

    out.total = out.hijacked_missed_rewards + out.hijacked_attestation_penalties +
                out.hijacked_inactivity_penalties + out.nonhijacked_losses;
    return out;
}

EjectionResult time_to_ejection(Gwei initial_balance, const EconContext& ctx, bool inactivity_enabled,
                                std::int64_t max_epochs) {
    if (initial_balance <= ctx.params.ejection_balance)
        throw std::domain_error("initial balance already at or below the ejection threshold");
    Gwei balance = initial_balance;
    Gwei effective = update_effective_balance(balance, 32 * ctx.params.increment, ctx.params);
    std::int64_t score = 0;

    for (std::int64_t epoch = 1; epoch <= max_epochs; ++epoch) {
        const std::int64_t increments = effective / ctx.params.increment;
        score = inactivity_score_update(true, false, score, ctx.params);
        Gwei pen = attestation_penalty_for_increments(increments, ctx);
        if (inactivity_enabled) pen += inactivity_penalty(score, effective, ctx.params);
        balance -= pen;
        if (balance < 0) balance = 0;
        effective = update_effective_balance(balance, effective, ctx.params);
        if (effective <= ctx.params.ejection_balance) return {true, epoch};
    }
    return {false, max_epochs};
}

Gwei knockblock_block_reward(const std::vector<int>& included_slot_delays, const EconContext& ctx) {
    ctx.validate();
    const auto& pr = ctx.params;
    if (static_cast<std::int64_t>(included_slot_delays.size()) > pr.max_included_attestation_slots)
        throw std::domain_error("more covered slots than the inclusion cap allows");
    std::set<int> seen;
    for (int d : included_slot_delays) {
        if (d < 1 || d > 32) throw std::domain_error("inclusion delay outside [1,32]");
        if (!seen.insert(d).second) throw std::domain_error("duplicate inclusion delay");
    }

    const i128 nb = static_cast<i128>(ctx.increments_per_validator) * ctx.base_reward_per_increment;
    const std::int64_t proposer_share_den = pr.weight_denominator - pr.weight_proposer;

    Gwei attestation_part = 0;
    for (int d : included_slot_delays) {
        std::int64_t tier_weight;
        if (d == 1)
            tier_weight = pr.weight_source + pr.weight_target + pr.weight_head;
        else if (d <= 5)
            tier_weight = pr.weight_source + pr.weight_target;
        else
            tier_weight = pr.weight_target;
        const Gwei per_validator = floor_div(nb * tier_weight, pr.weight_denominator);
        const Gwei slot_total = floor_div(static_cast<i128>(per_validator) * ctx.validator_count,
                                          pr.slots_per_epoch);
        attestation_part += floor_div(static_cast<i128>(slot_total) * pr.weight_proposer, proposer_share_den);
    }

    // One sync-aggregate share per covered slot; a block always carries at
    // least its own slot's aggregate.
    const Gwei sync_epoch_total = floor_div(nb * ctx.validator_count * pr.weight_sync, pr.weight_denominator);
    const Gwei sync_slot_total = sync_epoch_total / pr.slots_per_epoch;
    const Gwei sync_share = floor_div(static_cast<i128>(sync_slot_total) * pr.weight_proposer, proposer_share_den);
    const std::int64_t sync_slots = std::max<std::int64_t>(1, static_cast<std::int64_t>(included_slot_delays.size()));

    return attestation_part + sync_slots * sync_share;
}

ProfitReport knockblock_profitability(std::int64_t validators_owned, double annual_as_cost_usd,
                                      double eth_price_usd, double proposals_per_year,
                                      double mev_uplift_eth, double attestation_uplift_eth) {
    if (validators_owned < 0 || annual_as_cost_usd < 0 || eth_price_usd < 0 || proposals_per_year < 0 ||
        mev_uplift_eth < 0 || attestation_uplift_eth < 0)
        throw std::domain_error("profitability inputs must be non-negative");

    const double per_validator_eth = proposals_per_year * (mev_uplift_eth + attestation_uplift_eth);
    const double per_validator_usd = per_validator_eth * eth_price_usd;

    ProfitReport report;
    report.annual_uplift_eth = static_cast<double>(validators_owned) * per_validator_eth;
    report.annual_revenue_usd = report.annual_uplift_eth * eth_price_usd;
    report.annual_profit_usd = report.annual_revenue_usd - annual_as_cost_usd;
    if (per_validator_usd > 0)
        report.break_even_validators =
            static_cast<std::int64_t>(std::floor(annual_as_cost_usd / per_validator_usd)) + 1;
    else
        report.break_even_validators = -1;  // no positive revenue per validator
    return report;
}

double throughput_factor(double p) {
    if (p < 0.0 || p > 1.0) throw std::domain_error("hijacked fraction out of [0,1]");
    return 1.0 - p;
}

}  // namespace stakesim::econ
