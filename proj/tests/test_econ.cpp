#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "stakesim/econ.hpp"
#include "stakesim/rng.hpp"

using namespace stakesim;
using namespace stakesim::econ;

namespace {

// Independent integer-sqrt oracle (bisection), kept separate from the
// Newton-iteration path used by the implementation.
std::uint64_t isqrt_oracle(unsigned __int128 n) {
    std::uint64_t lo = 0, hi = 0xFFFFFFFFull << 16;
    while (lo < hi) {
        std::uint64_t mid = lo + (hi - lo + 1) / 2;
        if (static_cast<unsigned __int128>(mid) * mid <= n)
            lo = mid;
        else
            hi = mid - 1;
    }
    return lo;
}

// Independent epoch-by-epoch loss oracle: a plain loop over whole epochs plus
// a fractional tail, accumulating each loss stream per validator before
// scaling by the class sizes. Mirrors the stated accounting, not the
// implementation.
struct OracleLosses {
    double missed = 0, attn = 0, inact = 0, nonhij = 0;
    double total() const { return missed + attn + inact + nonhij; }
};

OracleLosses loss_oracle(double p, double duration_epochs, const EconContext& ctx, LeakMode mode) {
    const RewardComponents rc = reward_components(ctx);
    const double full = static_cast<double>(rc.full_epoch_total());
    double per_missed = 0, per_attn = 0, per_inact = 0, per_nonhij = 0;
    std::int64_t score = 0;
    Gwei balance = ctx.increments_per_validator * ctx.params.increment;
    Gwei effective = balance;
    for (std::int64_t k = 0; k < static_cast<std::int64_t>(std::ceil(duration_epochs)); ++k) {
        double f = std::min(1.0, duration_epochs - k);
        bool leak;
        if (mode == LeakMode::ForcedOn)
            leak = k >= ctx.params.leak_trigger_epochs;
        else if (mode == LeakMode::ForcedOff)
            leak = false;
        else
            leak = (p > 1.0 / 3.0) && k >= ctx.params.leak_trigger_epochs;
        Gwei attn = attestation_penalty_for_increments(effective / ctx.params.increment, ctx);
        Gwei inact = 0;
        if (leak) {
            score += ctx.params.inactivity_bias;
            inact = inactivity_penalty(score, effective, ctx.params);
        } else if (score > 0) {
            score = std::max<std::int64_t>(0, score - ctx.params.inactivity_recovery);
            inact = inactivity_penalty(score, effective, ctx.params);
        }
        per_missed += f * full;
        per_attn += f * attn;
        per_inact += f * inact;
        per_nonhij += f * nonhijacked_loss_rate(p, leak, ctx);
        balance -= static_cast<Gwei>(f * static_cast<double>(attn + inact));
        effective = update_effective_balance(balance, effective, ctx.params);
    }
    const double nh = p * ctx.validator_count;
    OracleLosses out;
    out.missed = nh * per_missed;
    out.attn = nh * per_attn;
    out.inact = nh * per_inact;
    out.nonhij = (ctx.validator_count - nh) * per_nonhij;
    return out;
}

const EconContext kMainnet = EconContext::uniform(1'063'660, 32);
const EconContext kDevnet = EconContext::uniform(1'008, 32);

}  // namespace

TEST_CASE("base reward at mainnet, quarter and devnet stake") {
    CHECK(base_reward(kMainnet.total_active_stake) == 346);
    // 4x the stake halves the base reward.
    CHECK(base_reward(4 * kMainnet.total_active_stake) == 173);
    // Devnet value frozen from the bisection isqrt oracle.
    const Gwei devnet_stake = 1'008 * 32 * kGweiPerEth;
    const std::uint64_t root = isqrt_oracle(static_cast<unsigned __int128>(devnet_stake));
    CHECK(root == 5'679'436);
    CHECK(base_reward(devnet_stake) == 64 * kGweiPerEth / static_cast<Gwei>(root));
    CHECK(base_reward(devnet_stake) == 11'268);
    CHECK_THROWS_AS(base_reward(0), std::domain_error);
}

TEST_CASE("reward components at mainnet scale") {
    const RewardComponents rc = reward_components(kMainnet);
    CHECK(rc.r_source == 2'422);
    CHECK(rc.r_target == 4'498);
    CHECK(rc.r_head == 2'422);
    CHECK(rc.r_attestation_total == 9'342);
    CHECK(rc.r_proposer_avg == 1'384);
    CHECK(rc.r_sync_avg == 346);
    CHECK(rc.full_epoch_total() == 11'072);
    CHECK(std::abs(static_cast<double>(rc.r_block_full) - 46'003'328.0) / 46'003'328.0 < 1e-3);

    EconContext zero = kMainnet;
    zero.increments_per_validator = 0;
    const RewardComponents z = reward_components(zero);
    CHECK(z.r_attestation_total == 0);
    CHECK(z.r_proposer_avg == 0);
    CHECK(z.r_sync_avg == 0);
}

TEST_CASE("weight invariants") {
    RewardParams pr;
    pr.validate();
    CHECK(pr.weight_source + pr.weight_target + pr.weight_head + pr.weight_sync + pr.weight_proposer ==
          pr.weight_denominator);
    CHECK(static_cast<double>(pr.weight_source + pr.weight_target) / pr.weight_denominator == 0.625);
    RewardParams bad = pr;
    bad.weight_sync = 3;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("non-hijacked loss rate") {
    CHECK(nonhijacked_loss_rate(0.0, false, kMainnet) == 0.0);
    CHECK(nonhijacked_loss_rate(0.2, false, kMainnet) == doctest::Approx(2'532.72).epsilon(1e-9));
    CHECK(nonhijacked_loss_rate(0.35, true, kMainnet) == doctest::Approx(9'826.4).epsilon(1e-9));
    CHECK_THROWS_AS(nonhijacked_loss_rate(1.5, false, kMainnet), std::domain_error);
}

TEST_CASE("expected validator reward") {
    CHECK(expected_validator_reward(0.0, false, kMainnet) == doctest::Approx(11'072.0).epsilon(1e-4));
    CHECK(expected_validator_reward(0.35, false, kMainnet) == doctest::Approx(6'766.895).epsilon(1e-4));
    // Degenerate p=1: only the sync term remains.
    CHECK(expected_validator_reward(1.0, false, kMainnet) == doctest::Approx(346.0).epsilon(1e-3));
}

TEST_CASE("loss polynomial identity over random p") {
    Rng rng(20240901);
    const double full = static_cast<double>(reward_components(kMainnet).full_epoch_total());
    for (int i = 0; i < 1000; ++i) {
        double p = rng.uniform();
        double via_reward = full - expected_validator_reward(p, false, kMainnet);
        double via_poly = 13'148.0 * p - 2'422.0 * p * p;
        CHECK(std::abs(via_reward - via_poly) < 1.0);
        double via_leak = full - expected_validator_reward(p, true, kMainnet);
        CHECK(std::abs(via_leak - (1'384.0 * p + 9'342.0)) < 1.0);
    }
}

TEST_CASE("attestation penalty") {
    CHECK(attestation_penalty(kMainnet) == 6'920);
    CHECK(attestation_penalty_for_increments(0, kMainnet) == 0);
    CHECK(attestation_penalty_for_increments(16, kMainnet) == 3'460);
}

TEST_CASE("inactivity penalty and score updates") {
    CHECK(inactivity_penalty(0, 32 * kGweiPerEth) == 0);
    CHECK(inactivity_penalty(60, 32 * kGweiPerEth) == 28'610);
    CHECK(inactivity_score_update(true, false, 0) == 4);
    CHECK(inactivity_score_update(false, true, 0) == 0);
    CHECK(inactivity_score_update(false, false, 40) == 24);
    CHECK(inactivity_score_update(true, true, 7) == 6);
}

TEST_CASE("cumulative leak penalty grows quadratically") {
    // Fit c*E^2 over E in [10, 120] leak epochs and check the relative
    // residual stays under 5%.
    std::vector<double> cum;
    std::int64_t score = 0;
    double acc = 0;
    for (int e = 1; e <= 120; ++e) {
        score += 4;
        acc += static_cast<double>(inactivity_penalty(score, 32 * kGweiPerEth));
        cum.push_back(acc);
    }
    double g_min = 1e300, g_max = 0;
    for (int e = 10; e <= 120; ++e) {
        double g = cum[e - 1] / (static_cast<double>(e) * e);
        g_min = std::min(g_min, g);
        g_max = std::max(g_max, g);
    }
    const double c = 2.0 * g_min * g_max / (g_min + g_max);
    for (int e = 10; e <= 120; ++e) {
        double fit = c * e * e;
        CHECK(std::abs(fit - cum[e - 1]) / cum[e - 1] < 0.05);
    }
}

TEST_CASE("aggregate attack losses match the epoch-by-epoch oracle") {
    const double two_hours = 2.0 * 3600.0 / kMainnet.params.epoch_seconds();
    CHECK(two_hours == doctest::Approx(18.75));

    SUBCASE("p=0.35 with leak") {
        LossBreakdown lb = aggregate_attack_losses(0.35, two_hours, kMainnet);
        OracleLosses oracle = loss_oracle(0.35, two_hours, kMainnet, LeakMode::Auto);
        CHECK(lb.hijacked_missed_rewards == doctest::Approx(oracle.missed).epsilon(1e-9));
        CHECK(lb.hijacked_attestation_penalties == doctest::Approx(oracle.attn).epsilon(1e-9));
        CHECK(lb.hijacked_inactivity_penalties == doctest::Approx(oracle.inact).epsilon(1e-9));
        CHECK(lb.nonhijacked_losses == doctest::Approx(oracle.nonhij).epsilon(1e-9));
        CHECK(lb.total == doctest::Approx(oracle.total()).epsilon(1e-9));
        CHECK(lb.leak_triggered);
        CHECK(lb.leak_start_epoch == 4);
        // Paper-reported anchors, +-30%.
        CHECK(to_eth(lb.hijacked_attestation_penalties + lb.hijacked_inactivity_penalties) ==
              doctest::Approx(110.6).epsilon(0.30));
        CHECK(to_eth(lb.hijacked_missed_rewards) == doctest::Approx(61.8).epsilon(0.30));
        CHECK(to_eth(lb.nonhijacked_losses) == doctest::Approx(114.8).epsilon(0.30));
    }

    SUBCASE("p=0.20 keeps leak off under protocol rule") {
        LossBreakdown lb = aggregate_attack_losses(0.20, two_hours, kMainnet);
        CHECK_FALSE(lb.leak_triggered);
        OracleLosses oracle = loss_oracle(0.20, two_hours, kMainnet, LeakMode::Auto);
        CHECK(lb.total == doctest::Approx(oracle.total()).epsilon(1e-9));
        // With-leak curve variant for the same scenario.
        LossBreakdown forced = aggregate_attack_losses(0.20, two_hours, kMainnet, LeakMode::ForcedOn);
        OracleLosses forced_oracle = loss_oracle(0.20, two_hours, kMainnet, LeakMode::ForcedOn);
        CHECK(forced.total == doctest::Approx(forced_oracle.total()).epsilon(1e-9));
        CHECK(to_eth(forced.total) == doctest::Approx(214.0).epsilon(0.30));
    }

    SUBCASE("zero duration") {
        LossBreakdown lb = aggregate_attack_losses(0.5, 0.0, kMainnet);
        CHECK(lb.total == 0.0);
        CHECK_FALSE(lb.leak_triggered);
        CHECK(!lb.leak_start_epoch.has_value());
    }
}

TEST_CASE("aggregate losses monotone in p and duration") {
    double prev = -1.0;
    for (double p = 0.0; p <= 1.0001; p += 0.05) {
        double t = aggregate_attack_losses(std::min(p, 1.0), 18.75, kMainnet).total;
        CHECK(t >= prev);
        prev = t;
    }
    prev = -1.0;
    for (double d = 0.0; d <= 40.0; d += 2.5) {
        double t = aggregate_attack_losses(0.35, d, kMainnet).total;
        CHECK(t >= prev);
        prev = t;
    }
}

TEST_CASE("scenario argmax unaffected by uniform balance scaling") {
    // Which (p, duration) pair maximizes losses should not depend on a
    // uniform balance rescale; only magnitudes change.
    const std::vector<double> ps = {0.1, 0.25, 0.34, 0.5};
    const std::vector<double> ds = {6.0, 18.75, 28.125};
    auto argmax = [&](const EconContext& ctx) {
        int best = -1;
        double best_total = -1;
        int i = 0;
        for (double p : ps)
            for (double d : ds) {
                double t = aggregate_attack_losses(p, d, ctx).total;
                if (t > best_total) {
                    best_total = t;
                    best = i;
                }
                ++i;
            }
        return best;
    };
    const EconContext half = EconContext::uniform(1'063'660, 16);
    CHECK(argmax(kMainnet) == argmax(half));
}

TEST_CASE("time to ejection under a continuous leak") {
    const double epochs_per_week = 7.0 * 24.0 * 3600.0 / kMainnet.params.epoch_seconds();
    EjectionResult r = time_to_ejection(32 * kGweiPerEth, kMainnet);
    CHECK(r.converged);
    CHECK(static_cast<double>(r.epochs) > 2.5 * epochs_per_week);
    CHECK(static_cast<double>(r.epochs) < 3.5 * epochs_per_week);

    // Just above the threshold: ejects almost immediately.
    EjectionResult near = time_to_ejection(16 * kGweiPerEth + 1, kMainnet);
    CHECK(near.converged);
    CHECK(near.epochs >= 1);
    CHECK(near.epochs < 64);

    // Attestation penalties alone shed stake far too slowly.
    EjectionResult off = time_to_ejection(32 * kGweiPerEth, kMainnet, false,
                                          static_cast<std::int64_t>(10 * 3.5 * epochs_per_week));
    CHECK_FALSE(off.converged);

    CHECK_THROWS_AS(time_to_ejection(16 * kGweiPerEth, kMainnet), std::domain_error);
}

TEST_CASE("knockblock block reward tiers") {
    const Gwei single = knockblock_block_reward({1}, kMainnet);
    CHECK(std::abs(static_cast<double>(single) - 46'003'328.0) / 46'003'328.0 < 1e-3);

    std::vector<int> all_eight = {1, 2, 3, 4, 5, 6, 7, 8};
    const Gwei full = knockblock_block_reward(all_eight, kMainnet);
    CHECK(std::abs(static_cast<double>(full) - 254'674'423.0) / 254'674'423.0 < 0.02);

    const Gwei sync_only = knockblock_block_reward({}, kMainnet);
    CHECK(sync_only > 0);
    CHECK(sync_only < single / 10);

    CHECK_THROWS_AS(knockblock_block_reward({0}, kMainnet), std::domain_error);
    CHECK_THROWS_AS(knockblock_block_reward({33}, kMainnet), std::domain_error);
    CHECK_THROWS_AS(knockblock_block_reward({2, 2}, kMainnet), std::domain_error);
    CHECK_THROWS_AS(knockblock_block_reward({1, 2, 3, 4, 5, 6, 7, 8, 9}, kMainnet), std::domain_error);
}

TEST_CASE("knockblock reward non-increasing across tier boundaries") {
    // Raising any delay across a tier boundary cannot raise the reward.
    const std::vector<std::vector<int>> pairs = {{1}, {2}, {5}, {6}, {32}};
    Gwei prev = knockblock_block_reward(pairs.front(), kMainnet);
    for (std::size_t i = 1; i < pairs.size(); ++i) {
        Gwei cur = knockblock_block_reward(pairs[i], kMainnet);
        CHECK(cur <= prev);
        prev = cur;
    }
}

TEST_CASE("knockblock profitability") {
    ProfitReport one = knockblock_profitability(1, 2'500, 4'463, 2.47, 0.05, 0.03);
    CHECK(std::abs(one.annual_uplift_eth - 0.19) < 0.01);
    CHECK(one.annual_revenue_usd == doctest::Approx(848.0).epsilon(0.05));
    CHECK(one.break_even_validators == 3);
    CHECK(knockblock_profitability(2, 2'500, 4'463, 2.47, 0.05, 0.03).annual_profit_usd < 0);
    CHECK(knockblock_profitability(3, 2'500, 4'463, 2.47, 0.05, 0.03).annual_profit_usd > 0);

    ProfitReport none = knockblock_profitability(0, 2'500, 4'463, 2.47, 0.05, 0.03);
    CHECK(none.annual_profit_usd == doctest::Approx(-2'500.0));

    ProfitReport ten = knockblock_profitability(10, 2'500, 4'463, 2.47, 0.05, 0.03);
    CHECK(ten.annual_profit_usd == doctest::Approx(5'980.0).epsilon(0.10));
}

TEST_CASE("throughput factor") {
    CHECK(throughput_factor(0.0) == 1.0);
    CHECK(throughput_factor(0.37) == doctest::Approx(0.63));
    CHECK(throughput_factor(1.0) == 0.0);
    CHECK_THROWS_AS(throughput_factor(-0.1), std::domain_error);
}

TEST_CASE("effective balance hysteresis") {
    const Gwei eth = kGweiPerEth;
    CHECK(update_effective_balance(32 * eth, 32 * eth) == 32 * eth);
    CHECK(update_effective_balance(32 * eth - eth / 4, 32 * eth) == 32 * eth);
    CHECK(update_effective_balance(32 * eth - eth / 4 - 1, 32 * eth) == 31 * eth);
    CHECK(update_effective_balance(31 * eth - eth / 4, 31 * eth) == 31 * eth);
    CHECK(update_effective_balance(30 * eth + eth / 4 + 1, 31 * eth) == 30 * eth);
    // Upward only past the 1.25 ETH band.
    CHECK(update_effective_balance(31 * eth + eth / 4 - 1, 30 * eth) == 30 * eth);
    CHECK(update_effective_balance(31 * eth + eth / 4, 30 * eth) == 31 * eth);
}
