#include "stakesim/adversary.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "stakesim/rng.hpp"

namespace stakesim::adversary {

AttackerMapping AttackerMapping::from_ground_truth(const topo::Topology& topo) {
    AttackerMapping m;
    m.prefix_count = static_cast<std::int64_t>(topo.prefixes.size());
    m.candidates.resize(topo.validator_prefix.size());
    for (std::size_t v = 0; v < topo.validator_prefix.size(); ++v)
        m.candidates[v] = {topo.validator_prefix[v]};
    return m;
}

AttackerMapping AttackerMapping::with_errors(const topo::Topology& topo, double wrong_fraction,
                                             std::uint64_t seed, int decoy_prefixes) {
    AttackerMapping m = from_ground_truth(topo);
    if (wrong_fraction <= 0) return m;
    Rng rng = Rng::derive(seed, "mis-mapping");
    const std::int64_t prefixes = m.prefix_count;
    std::vector<PrefixId> decoys;
    for (int d = 0; d < decoy_prefixes; ++d)
        decoys.push_back(static_cast<PrefixId>(rng.uniform_below(prefixes)));
    for (std::size_t v = 0; v < m.candidates.size(); ++v) {
        if (rng.uniform() >= wrong_fraction) continue;
        PrefixId truth = m.candidates[v][0];
        PrefixId wrong = decoys.empty() ? static_cast<PrefixId>(rng.uniform_below(prefixes))
                                        : decoys[rng.uniform_below(decoys.size())];
        if (wrong == truth) wrong = static_cast<PrefixId>((wrong + 1) % prefixes);
        m.candidates[v] = {wrong, truth};
    }
    return m;
}

AttackerMapping AttackerMapping::from_inference(const infer::MappingResult& mapping,
                                                const infer::CandidateSet& candidates,
                                                std::int64_t validator_count, std::int64_t prefix_count) {
    AttackerMapping m;
    m.prefix_count = prefix_count;
    m.candidates.resize(validator_count);
    for (std::int64_t v = 0; v < validator_count; ++v) {
        auto it = mapping.entries.find(static_cast<ValidatorId>(v));
        if (it == mapping.entries.end()) continue;
        auto& list = m.candidates[v];
        list.push_back(it->second.prefix_id);
        if (v < static_cast<std::int64_t>(candidates.per_validator.size()))
            for (const auto& c : candidates.per_validator[v])
                if (std::find(list.begin(), list.end(), c.prefix_id) == list.end())
                    list.push_back(c.prefix_id);
    }
    return m;
}

std::vector<std::int64_t> AttackerMapping::prefix_density() const {
    std::vector<std::int64_t> density(prefix_count, 0);
    for (const auto& list : candidates)
        if (!list.empty()) density[list[0]]++;
    return density;
}

double AttackPlan::active_hijack_seconds(double seconds_per_slot) const {
    double total = 0;
    for (const auto& a : hijack_actions)
        total += static_cast<double>(a.end - a.start + 1) * seconds_per_slot;
    if (kind == AttackKind::Knockblock) total += static_cast<double>(lead_time_slots) * seconds_per_slot;
    return total;
}

SelectionResult stakebleed_select_prefixes(const AttackerMapping& mapping, double target_fraction) {
    if (target_fraction < 0 || target_fraction > 1) throw std::domain_error("target fraction out of (0,1]");
    SelectionResult out;
    if (target_fraction == 0) return out;

    const std::vector<std::int64_t> density = mapping.prefix_density();
    std::int64_t mapped_total = 0;
    std::vector<PrefixId> order(density.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::int64_t d : density) mapped_total += d;
    const std::int64_t all = static_cast<std::int64_t>(mapping.candidates.size());
    if (all == 0) throw std::domain_error("empty mapping");
    if (static_cast<double>(mapped_total) / static_cast<double>(all) < target_fraction)
        throw std::domain_error("mapping covers less stake than requested");

    std::sort(order.begin(), order.end(), [&](PrefixId a, PrefixId b) {
        if (density[a] != density[b]) return density[a] > density[b];
        return a < b;
    });
    std::int64_t covered = 0;
    for (PrefixId p : order) {
        if (density[p] == 0) break;
        out.prefixes.push_back(p);
        covered += density[p];
        if (static_cast<double>(covered) >= target_fraction * static_cast<double>(all)) break;
    }
    out.achieved_fraction = static_cast<double>(covered) / static_cast<double>(all);
    return out;
}

AttackPlan stakebleed_plan(const AttackerMapping& mapping, double target_fraction, Slot start_slot,
                           Slot end_slot, double success_probability) {
    AttackPlan plan;
    plan.kind = AttackKind::Stakebleed;
    plan.target_fraction = target_fraction;
    SelectionResult sel = stakebleed_select_prefixes(mapping, target_fraction);
    plan.selected_prefixes = sel.prefixes;
    plan.achieved_fraction = sel.achieved_fraction;

    std::set<PrefixId> selected(sel.prefixes.begin(), sel.prefixes.end());
    plan.next_candidate.assign(mapping.candidates.size(), 0);
    for (std::size_t v = 0; v < mapping.candidates.size(); ++v) {
        const auto& list = mapping.candidates[v];
        if (!list.empty() && selected.count(list[0])) {
            plan.targeted_validators.push_back(static_cast<ValidatorId>(v));
            plan.next_candidate[v] = 1;
        }
    }

    topo::HijackAction act;
    act.mode = topo::HijackMode::PartitionDrop;
    act.prefixes = sel.prefixes;
    act.start = start_slot;
    act.end = end_slot;
    act.success_probability = success_probability;
    plan.hijack_actions.push_back(std::move(act));
    return plan;
}

ExpansionReport stakebleed_monitor_and_expand(AttackPlan& plan, const AttackerMapping& mapping,
                                              const std::vector<ValidatorId>& leaking_validators,
                                              Slot from_slot) {
    ExpansionReport report;
    if (plan.hijack_actions.empty()) throw ConfigError("expansion needs an active plan");
    const Slot end = plan.hijack_actions.front().end;
    if (from_slot > end) return report;

    std::set<PrefixId> already;
    for (const auto& a : plan.hijack_actions) already.insert(a.prefixes.begin(), a.prefixes.end());

    std::set<PrefixId> additions;
    for (ValidatorId v : leaking_validators) {
        if (v >= mapping.candidates.size()) continue;
        const auto& list = mapping.candidates[v];
        std::size_t& next = plan.next_candidate[v];
        bool found = false;
        while (next < list.size()) {
            PrefixId cand = list[next++];
            if (already.count(cand) || additions.count(cand)) continue;
            additions.insert(cand);
            found = true;
            break;
        }
        if (!found && next >= list.size()) report.exhausted_validators.push_back(v);
    }
    if (!additions.empty()) {
        topo::HijackAction act;
        act.mode = topo::HijackMode::PartitionDrop;
        act.prefixes.assign(additions.begin(), additions.end());
        act.start = from_slot;
        act.end = end;
        act.success_probability = plan.hijack_actions.front().success_probability;
        plan.hijack_actions.push_back(act);
        report.added_prefixes.assign(additions.begin(), additions.end());
    }
    return report;
}

AttackPlan knockblock_plan(const std::vector<ValidatorId>& schedule, ValidatorId own_validator,
                           const AttackerMapping& mapping, std::int64_t lead_time_slots,
                           int hedge_candidates, std::int64_t max_included_attestation_slots) {
    AttackPlan plan;
    plan.kind = AttackKind::Knockblock;
    plan.own_validator = own_validator;
    plan.lead_time_slots = lead_time_slots;

    Slot own = -1;
    for (std::size_t s = 1; s < schedule.size(); ++s)
        if (schedule[s] == own_validator) {
            own = static_cast<Slot>(s);
            break;
        }
    if (own < 0) throw std::domain_error("own validator not scheduled within the lookahead window");
    plan.own_slot = own;

    auto mappable = [&](ValidatorId v) {
        return v < mapping.candidates.size() && !mapping.candidates[v].empty();
    };
    // The attacker knows her own prefix and never hijacks it.
    std::optional<PrefixId> own_prefix;
    if (mappable(own_validator)) own_prefix = mapping.candidates[own_validator][0];

    // Preferred target is the proposer of the preceding slot; otherwise the
    // nearest preceding mappable proposer inside the inclusion window.
    Slot target = -1;
    const Slot fallback_limit = std::max<Slot>(own - (max_included_attestation_slots - 1), 0);
    for (Slot s = own - 1; s >= fallback_limit; --s) {
        if (!mappable(schedule[s])) continue;
        if (own_prefix && mapping.candidates[schedule[s]][0] == *own_prefix) continue;
        target = s;
        break;
    }
    if (target < 0) throw std::domain_error("no mappable proposer in the preceding window");
    plan.target_slot = target;
    plan.target_validator = schedule[target];
    for (Slot d = 1; d <= own - target; ++d) plan.expected_delays.push_back(static_cast<int>(d));

    const auto& cands = mapping.candidates[plan.target_validator];
    topo::HijackAction act;
    act.mode = topo::HijackMode::ProposerDrop;
    act.prefixes.push_back(cands[0]);
    for (int h = 1; h <= hedge_candidates && h < static_cast<int>(cands.size()); ++h) {
        act.prefixes.push_back(cands[h]);
        plan.hedge_prefixes.push_back(cands[h]);
    }
    act.start = target;
    act.end = target;  // exactly one slot of enforcement
    plan.hijack_actions.push_back(std::move(act));
    return plan;
}

}  // namespace stakesim::adversary
