#include "stakesim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "stakesim/rng.hpp"

namespace stakesim::scenario {

using adversary::AttackerMapping;
using adversary::AttackKind;
using adversary::AttackPlan;
using consensus::AttestationOutcome;
using consensus::EpochInputs;
using consensus::StateMachine;
using consensus::ValidatorRecord;
using consensus::ValidatorStatus;

ScenarioConfig ScenarioConfig::from_json(const nlohmann::json& j) {
    ScenarioConfig cfg;
    if (!j.contains("seed")) throw ConfigError("scenario config: missing field 'seed'");
    cfg.seed = j.at("seed").get<std::uint64_t>();

    if (j.contains("topology")) {
        const auto& t = j.at("topology");
        std::string preset = t.value("preset", "");
        if (preset == "devnet")
            cfg.topology = topo::devnet_config(t.value("nodes", 20), t.value("validators", 1008));
        else if (preset == "inference_default")
            cfg.topology = topo::inference_default_config();
        else if (preset == "paper_shaped") {
            cfg.topology.placement.kind = "paper_shaped";
        } else if (preset.empty())
            cfg.topology = topo::TopologyConfig::from_json(t);
        else
            throw ConfigError("scenario config: topology.preset '" + preset + "' unknown");
    } else {
        throw ConfigError("scenario config: missing field 'topology'");
    }
    if (j.contains("gossip")) cfg.gossip = gossip::GossipParams::from_json(j.at("gossip"));
    cfg.duration_slots = j.value("duration_slots", cfg.duration_slots);
    if (cfg.duration_slots < 32)
        throw ConfigError("scenario config: duration_slots must cover at least one epoch");
    cfg.inclusion = j.value("inclusion", cfg.inclusion);
    if (cfg.inclusion != "connectivity" && cfg.inclusion != "gossip")
        throw ConfigError("scenario config: inclusion must be 'connectivity' or 'gossip'");
    cfg.sampled_sync = j.value("sampled_sync", cfg.sampled_sync);
    cfg.emit_traces = j.value("emit_traces", cfg.emit_traces);
    cfg.attestation_offset_ms = j.value("attestation_offset_ms", cfg.attestation_offset_ms);
    if (j.contains("attack")) {
        const auto& a = j.at("attack");
        cfg.attack.kind = a.value("kind", cfg.attack.kind);
        if (cfg.attack.kind != "none" && cfg.attack.kind != "stakebleed" && cfg.attack.kind != "knockblock")
            throw ConfigError("scenario config: attack.kind '" + cfg.attack.kind + "' unknown");
        cfg.attack.target_fraction = a.value("target_fraction", cfg.attack.target_fraction);
        cfg.attack.start_slot = a.value("start_slot", cfg.attack.start_slot);
        cfg.attack.end_slot = a.value("end_slot", cfg.attack.end_slot);
        cfg.attack.success_probability = a.value("success_probability", cfg.attack.success_probability);
        cfg.attack.monitor_expand = a.value("monitor_expand", cfg.attack.monitor_expand);
        cfg.attack.mis_mapping_fraction = a.value("mis_mapping_fraction", cfg.attack.mis_mapping_fraction);
        cfg.attack.mis_mapping_decoys = a.value("mis_mapping_decoys", cfg.attack.mis_mapping_decoys);
        if (a.contains("own_validator")) cfg.attack.own_validator = a.at("own_validator").get<ValidatorId>();
        cfg.attack.lead_time_slots = a.value("lead_time_slots", cfg.attack.lead_time_slots);
        cfg.attack.hedge_candidates = a.value("hedge_candidates", cfg.attack.hedge_candidates);
        cfg.attack.mev_baseline_eth = a.value("mev_baseline_eth", cfg.attack.mev_baseline_eth);
        cfg.attack.mev_multiplier = a.value("mev_multiplier", cfg.attack.mev_multiplier);
    }
    if (j.contains("countermeasure")) {
        const auto& c = j.at("countermeasure");
        cfg.countermeasure.mode = gossip::countermeasure_from_string(c.value("mode", "none"));
        cfg.countermeasure.mean_ms = c.value("mean_ms", 0.0);
    }
    return cfg;
}

nlohmann::json ScenarioConfig::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["topology"] = topology.to_json();
    j["gossip"] = gossip.to_json();
    j["duration_slots"] = duration_slots;
    j["inclusion"] = inclusion;
    j["sampled_sync"] = sampled_sync;
    j["emit_traces"] = emit_traces;
    j["attestation_offset_ms"] = attestation_offset_ms;
    nlohmann::json a;
    a["kind"] = attack.kind;
    a["target_fraction"] = attack.target_fraction;
    a["start_slot"] = attack.start_slot;
    a["end_slot"] = attack.end_slot;
    a["success_probability"] = attack.success_probability;
    a["monitor_expand"] = attack.monitor_expand;
    a["mis_mapping_fraction"] = attack.mis_mapping_fraction;
    a["mis_mapping_decoys"] = attack.mis_mapping_decoys;
    if (attack.own_validator) a["own_validator"] = *attack.own_validator;
    a["lead_time_slots"] = attack.lead_time_slots;
    a["hedge_candidates"] = attack.hedge_candidates;
    a["mev_baseline_eth"] = attack.mev_baseline_eth;
    a["mev_multiplier"] = attack.mev_multiplier;
    j["attack"] = a;
    nlohmann::json c;
    c["mode"] = gossip::to_string(countermeasure.mode);
    c["mean_ms"] = countermeasure.mean_ms;
    j["countermeasure"] = c;
    return j;
}

namespace {

struct PendingAttestation {
    ValidatorId validator = 0;
    Slot slot = 0;
    NodeId node = 0;
    bool connected = false;
    bool included = false;
    // gossip mode: message arrival time at the proposer node of slot+d
    // (index d-1), +inf when unreachable
    std::array<double, 8> proposer_arrival{};
};

Gwei tier_value(int delay, Gwei nb, const econ::RewardParams& pr) {
    std::int64_t w;
    if (delay == 1)
        w = pr.weight_source + pr.weight_target + pr.weight_head;
    else if (delay <= 5)
        w = pr.weight_source + pr.weight_target;
    else
        w = pr.weight_target;
    return static_cast<Gwei>(static_cast<__int128>(nb) * w / pr.weight_denominator);
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
    topo::Topology topology = topo::build_topology(cfg.topology, cfg.seed);
    const std::int64_t n_validators = topology.validator_count();
    if (n_validators <= 0) throw ConfigError("scenario topology places no validators");
    const econ::EconContext ctx = econ::EconContext::uniform(n_validators, 32);
    const econ::RewardParams& pr = ctx.params;
    const std::int64_t total_slots = cfg.duration_slots;
    const std::int64_t total_epochs = total_slots / pr.slots_per_epoch;

    std::vector<ValidatorRecord> records(n_validators);
    for (std::int64_t v = 0; v < n_validators; ++v) {
        records[v].validator_id = static_cast<ValidatorId>(v);
        records[v].balance = 32 * kGweiPerEth;
        records[v].effective_balance = 32 * kGweiPerEth;
        records[v].node_id = topology.validator_node[v];
        records[v].deposit_cluster_id = topology.validator_cluster[v];
    }
    StateMachine sm(records, ctx, cfg.seed, cfg.sampled_sync);

    const bool use_gossip = cfg.inclusion == "gossip" || cfg.emit_traces;
    std::optional<gossip::Mesh> mesh;
    if (use_gossip) mesh.emplace(topology, cfg.gossip, cfg.seed);

    topo::ConnectivityOracle oracle(topology, {});
    ScenarioResult result;
    result.attack_report = nlohmann::json::object();

    // -- attacker setup -------------------------------------------------------
    AttackerMapping amap;
    std::optional<AttackPlan> plan;
    std::vector<char> targeted(n_validators, 0);
    if (cfg.attack.kind == "stakebleed") {
        amap = cfg.attack.mis_mapping_fraction > 0
                   ? AttackerMapping::with_errors(topology, cfg.attack.mis_mapping_fraction, cfg.seed,
                                                  cfg.attack.mis_mapping_decoys)
                   : AttackerMapping::from_ground_truth(topology);
        plan = adversary::stakebleed_plan(amap, cfg.attack.target_fraction, cfg.attack.start_slot,
                                          cfg.attack.end_slot, cfg.attack.success_probability);
        for (ValidatorId v : plan->targeted_validators) targeted[v] = 1;
    } else if (cfg.attack.kind == "knockblock") {
        amap = AttackerMapping::from_ground_truth(topology);
        std::vector<ValidatorId> lookahead;
        for (Epoch e = 0; e < 2; ++e) {
            auto sched = consensus::proposer_schedule(cfg.seed, e, sm.validators(), pr);
            lookahead.insert(lookahead.end(), sched.begin(), sched.end());
        }
        ValidatorId own;
        if (cfg.attack.own_validator) {
            own = *cfg.attack.own_validator;
        } else {
            // Default: a second-epoch proposer whose predecessor lives on a
            // different node, so the plan has a clean single-slot target.
            own = lookahead[pr.slots_per_epoch + 8];
            for (std::int64_t s = pr.slots_per_epoch + 1;
                 s < static_cast<std::int64_t>(lookahead.size()); ++s) {
                if (topology.validator_node[lookahead[s]] !=
                    topology.validator_node[lookahead[s - 1]]) {
                    own = lookahead[s];
                    break;
                }
            }
        }
        plan = adversary::knockblock_plan(lookahead, own, amap, cfg.attack.lead_time_slots,
                                          cfg.attack.hedge_candidates, pr.max_included_attestation_slots);
        if (cfg.attack.success_probability < 1.0)
            plan->hijack_actions.front().success_probability = cfg.attack.success_probability;
        targeted[plan->target_validator] = 1;
    }
    if (plan) {
        for (const auto& act : plan->hijack_actions) oracle.add_action(act);
        result.first_attack_slot = plan->hijack_actions.front().start;
        result.last_attack_slot = plan->hijack_actions.front().end;
    }

    // Hijacked group = validators hosted inside the initial partition.
    std::vector<char> in_partition_node(topology.nodes.size(), 0);
    if (plan)
        for (const auto& act : oracle.actions())
            for (NodeId n : act.partition_membership) in_partition_node[n] = 1;
    for (std::int64_t v = 0; v < n_validators; ++v)
        if (in_partition_node[topology.validator_node[v]])
            result.hijacked_validators.push_back(static_cast<ValidatorId>(v));

    NodeId reference_node = 0;
    auto pick_reference = [&]() {
        for (std::size_t n = 0; n < topology.nodes.size(); ++n)
            if (!in_partition_node[n]) return static_cast<NodeId>(n);
        throw ConfigError("attack partitions every node; no canonical side left");
    };
    reference_node = pick_reference();

    // -- slot walk -------------------------------------------------------------
    const double slot_ms = pr.seconds_per_slot * 1000.0;
    std::vector<std::vector<ValidatorId>> proposers(total_epochs);
    std::vector<consensus::CommitteeAssignment> committees(total_epochs);
    std::vector<EpochInputs> inputs(total_epochs);
    for (Epoch e = 0; e < total_epochs; ++e) {
        proposers[e] = consensus::proposer_schedule(cfg.seed, e, sm.validators(), pr);
        committees[e] = committee_assignment(cfg.seed, e, sm.validators(), pr, cfg.topology.topic_count);
        inputs[e].epoch = e;
        inputs[e].outcomes.assign(n_validators, {});
        inputs[e].proposer_of_slot.assign(pr.slots_per_epoch, -1);
        inputs[e].slot_attester_value.assign(pr.slots_per_epoch, 0);
        if (cfg.sampled_sync) inputs[e].sync_member_present.assign(sm.sync_committee().size(), 0);
    }

    std::vector<PendingAttestation> pending;
    std::set<ValidatorId> leaking_this_epoch;
    Epoch processed_until = -1;  // last epoch fed to the state machine
    std::vector<int> knockblock_delays;
    bool knockblock_target_missed = false;
    Gwei knockblock_sim_reward = 0;

    auto process_ready_epochs = [&](Epoch ready) {
        for (Epoch e = processed_until + 1; e <= ready && e < total_epochs; ++e) {
            if (cfg.sampled_sync) {
                const auto& committee = sm.sync_committee();
                for (std::size_t m = 0; m < committee.size(); ++m) {
                    NodeId node = topology.validator_node[committee[m]];
                    inputs[e].sync_member_present[m] =
                        oracle.reachable(node, reference_node, e * pr.slots_per_epoch) ? 1 : 0;
                }
            }
            Gwei before = 0;
            if (plan && plan->kind == AttackKind::Knockblock &&
                plan->own_slot / pr.slots_per_epoch == e)
                before = sm.validators()[plan->own_validator].balance;
            sm.process_epoch(inputs[e]);
            if (plan && plan->kind == AttackKind::Knockblock &&
                plan->own_slot / pr.slots_per_epoch == e)
                knockblock_sim_reward = sm.validators()[plan->own_validator].balance - before;

            EpochBalances row;
            row.epoch = e;
            double hsum = 0, csum = 0, hscore = 0;
            std::int64_t hn = 0, cn = 0;
            std::vector<char> hijacked(n_validators, 0);
            for (ValidatorId v : result.hijacked_validators) hijacked[v] = 1;
            for (const auto& rec : sm.validators()) {
                if (hijacked[rec.validator_id]) {
                    hsum += static_cast<double>(rec.balance);
                    hscore += static_cast<double>(rec.inactivity_score);
                    ++hn;
                } else {
                    csum += static_cast<double>(rec.balance);
                    ++cn;
                }
            }
            row.hijacked_mean = hn ? hsum / hn : 0;
            row.connected_mean = cn ? csum / cn : 0;
            row.hijacked_mean_score = hn ? hscore / hn : 0;
            result.balance_timeline.push_back(row);
            processed_until = e;
        }
    };

    for (Slot s = 0; s < total_slots; ++s) {
        const Epoch e = s / pr.slots_per_epoch;
        const std::int64_t k = s % pr.slots_per_epoch;

        if (k == 0 && e > 0) {
            // Adversarial re-planning happens at epoch boundaries using the
            // canonical attestations observed during the last epoch.
            if (plan && plan->kind == AttackKind::Stakebleed && cfg.attack.monitor_expand &&
                s <= cfg.attack.end_slot) {
                std::vector<ValidatorId> leaking(leaking_this_epoch.begin(), leaking_this_epoch.end());
                if (!leaking.empty()) {
                    auto report = adversary::stakebleed_monitor_and_expand(*plan, amap, leaking, s);
                    if (!report.added_prefixes.empty()) {
                        oracle.add_action(plan->hijack_actions.back());
                        for (NodeId n : oracle.actions().back().partition_membership)
                            in_partition_node[n] = 1;
                        reference_node = pick_reference();
                    }
                }
            }
            leaking_this_epoch.clear();
            // Everything two epochs back is fully resolved (8-slot inclusion cap).
            process_ready_epochs(e - 2);
        }

        // Canonical block for this slot.
        const ValidatorId proposer = proposers[e][k];
        const NodeId proposer_node = topology.validator_node[proposer];
        const bool canonical = oracle.reachable(proposer_node, reference_node, s);
        if (canonical) inputs[e].proposer_of_slot[k] = proposer;

        if (canonical) {
            const double block_ts = static_cast<double>(s) * slot_ms;
            for (auto& p : pending) {
                if (p.included) continue;
                const Slot age = s - p.slot;
                if (age < 1 || age > pr.max_included_attestation_slots) continue;
                bool arrived;
                if (use_gossip && cfg.inclusion == "gossip") {
                    arrived = p.proposer_arrival[age - 1] <= block_ts;
                } else {
                    arrived = p.connected;
                }
                if (!arrived) continue;
                p.included = true;
                const Epoch pe = p.slot / pr.slots_per_epoch;
                auto& outcome = inputs[pe].outcomes[p.validator];
                outcome.included = true;
                outcome.inclusion_delay = static_cast<int>(age);
                outcome.timely_head = age == 1;
                const Gwei nb = sm.validators()[p.validator].effective_balance / pr.increment *
                                ctx.base_reward_per_increment;
                inputs[e].slot_attester_value[k] += tier_value(static_cast<int>(age), nb, pr);
                if (targeted[p.validator]) leaking_this_epoch.insert(p.validator);
                if (plan && plan->kind == AttackKind::Knockblock && s == plan->own_slot)
                    if (std::find(knockblock_delays.begin(), knockblock_delays.end(),
                                  static_cast<int>(age)) == knockblock_delays.end())
                        knockblock_delays.push_back(static_cast<int>(age));
            }
        } else if (plan && plan->kind == AttackKind::Knockblock && s == plan->target_slot) {
            knockblock_target_missed = true;
        }

        // Drop pending entries that can no longer be included.
        pending.erase(std::remove_if(pending.begin(), pending.end(),
                                     [&](const PendingAttestation& p) {
                                         return p.included ||
                                                s - p.slot >= pr.max_included_attestation_slots;
                                     }),
                      pending.end());

        // New attestations for this slot.
        const double origin_ts = static_cast<double>(s) * slot_ms + cfg.attestation_offset_ms;
        for (std::int64_t v = 0; v < n_validators; ++v) {
            if (committees[e].slot_of[v] != static_cast<std::int32_t>(k)) continue;
            if (sm.validators()[v].status != ValidatorStatus::Active) continue;
            PendingAttestation p;
            p.validator = static_cast<ValidatorId>(v);
            p.slot = s;
            p.node = topology.validator_node[v];
            p.connected = oracle.reachable(p.node, reference_node, s);
            inputs[e].outcomes[v].connected = p.connected;
            if (use_gossip) {
                gossip::GossipMessage msg;
                msg.message_id = (static_cast<std::uint64_t>(s) << 24) |
                                 static_cast<std::uint64_t>(v);
                msg.validator_id = p.validator;
                msg.topic_id = static_cast<std::uint16_t>(committees[e].topic_of[v]);
                msg.origin_node = p.node;
                msg.slot = s;
                msg.origin_ts = origin_ts;
                auto res = gossip::propagate(msg, topology, *mesh, oracle, cfg.seed);
                for (std::int64_t d = 1; d <= pr.max_included_attestation_slots; ++d) {
                    const Slot target = s + d;
                    if (target >= total_slots) {
                        p.proposer_arrival[d - 1] = gossip::kNever;
                        continue;
                    }
                    NodeId node = topology.validator_node[proposers[target / pr.slots_per_epoch]
                                                                   [target % pr.slots_per_epoch]];
                    p.proposer_arrival[d - 1] = res.first_arrival[node];
                }
                if (cfg.emit_traces)
                    result.observer_records.insert(result.observer_records.end(), res.records.begin(),
                                                   res.records.end());
            }
            pending.push_back(p);
        }
    }
    process_ready_epochs(total_epochs - 1);

    if (cfg.emit_traces && cfg.countermeasure.mode != gossip::CountermeasureMode::None)
        result.observer_records = gossip::countermeasure_transform(
            std::move(result.observer_records), cfg.countermeasure, cfg.gossip,
            static_cast<std::int64_t>(topology.nodes.size()), cfg.seed);

    // -- attack report -----------------------------------------------------------
    if (plan) {
        nlohmann::json rep;
        rep["kind"] = cfg.attack.kind;
        rep["active_hijack_seconds"] = plan->active_hijack_seconds(pr.seconds_per_slot);
        nlohmann::json actions = nlohmann::json::array();
        for (const auto& act : oracle.actions()) {
            nlohmann::json a;
            a["mode"] = topo::to_string(act.mode);
            a["prefixes"] = act.prefixes;
            a["start_slot"] = act.start;
            a["end_slot"] = act.end;
            actions.push_back(a);
        }
        rep["hijack_actions"] = actions;

        if (plan->kind == AttackKind::Stakebleed) {
            rep["target_fraction"] = plan->target_fraction;
            rep["achieved_fraction"] = plan->achieved_fraction;
            rep["prefix_count"] = plan->selected_prefixes.size();
            const double duration_epochs =
                static_cast<double>(cfg.attack.end_slot - cfg.attack.start_slot + 1) /
                static_cast<double>(pr.slots_per_epoch);
            const double realized_fraction =
                static_cast<double>(result.hijacked_validators.size()) / static_cast<double>(n_validators);
            econ::LossBreakdown lb =
                econ::aggregate_attack_losses(realized_fraction, duration_epochs, ctx);
            rep["losses"] = {{"hijacked_missed_rewards_gwei", lb.hijacked_missed_rewards},
                             {"hijacked_attestation_penalties_gwei", lb.hijacked_attestation_penalties},
                             {"hijacked_inactivity_penalties_gwei", lb.hijacked_inactivity_penalties},
                             {"nonhijacked_losses_gwei", lb.nonhijacked_losses},
                             {"total_gwei", lb.total},
                             {"total_eth", to_eth(lb.total)},
                             {"leak_triggered", lb.leak_triggered}};
            // Realized balance deltas from the simulation itself.
            double hijacked_loss = 0;
            for (ValidatorId v : result.hijacked_validators)
                hijacked_loss += static_cast<double>(32 * kGweiPerEth - sm.validators()[v].balance);
            rep["simulated_hijacked_balance_loss_gwei"] = hijacked_loss;
        } else {
            rep["own_validator"] = plan->own_validator;
            rep["own_slot"] = plan->own_slot;
            rep["target_validator"] = plan->target_validator;
            rep["target_slot"] = plan->target_slot;
            rep["target_slot_missed"] = knockblock_target_missed;
            rep["planned_delays"] = plan->expected_delays;
            std::sort(knockblock_delays.begin(), knockblock_delays.end());
            rep["absorbed_delays"] = knockblock_delays;
            rep["hedge_prefixes"] = plan->hedge_prefixes;
            const Gwei baseline = econ::knockblock_block_reward({1}, ctx);
            const Gwei realized = econ::knockblock_block_reward(knockblock_delays, ctx);
            rep["baseline_block_reward_gwei"] = baseline;
            rep["attacker_block_reward_gwei"] = realized;
            rep["simulated_proposer_credit_gwei"] = knockblock_sim_reward;
            rep["mev_baseline_eth"] = cfg.attack.mev_baseline_eth;
            rep["mev_expected_eth"] = cfg.attack.mev_baseline_eth * cfg.attack.mev_multiplier;
        }
        result.attack_report = rep;
    }

    result.topology = std::move(topology);
    result.ctx = ctx;
    result.state = sm.state();
    result.validators = sm.validators();
    return result;
}

ScenarioConfig devnet_scenario(std::uint64_t seed, Slot hijack_start, Slot hijack_end,
                               std::int64_t duration_slots) {
    ScenarioConfig cfg;
    cfg.seed = seed;
    cfg.topology = topo::devnet_config();
    cfg.duration_slots = duration_slots;
    cfg.inclusion = "gossip";
    cfg.sampled_sync = true;
    cfg.attack.kind = "stakebleed";
    cfg.attack.target_fraction = 0.37;
    cfg.attack.start_slot = hijack_start;
    cfg.attack.end_slot = hijack_end;
    return cfg;
}

ScenarioConfig inference_scenario(std::uint64_t seed, std::int64_t epochs) {
    ScenarioConfig cfg;
    cfg.seed = seed;
    cfg.topology = topo::inference_default_config();
    cfg.duration_slots = epochs * 32;
    cfg.inclusion = "connectivity";
    cfg.emit_traces = true;
    cfg.gossip.record_scope = gossip::RecordScope::ObserverOnly;
    // The observer is a node hosting no validators; the build is
    // deterministic, so probing it here picks the same node the run sees.
    topo::Topology probe = topo::build_topology(cfg.topology, seed);
    for (std::size_t n = probe.nodes.size(); n-- > 0;)
        if (probe.nodes[n].hosted_validators.empty()) {
            cfg.gossip.observer_node = static_cast<NodeId>(n);
            break;
        }
    return cfg;
}

PipelineResult run_inference_pipeline(const std::vector<gossip::DeliveryRecord>& records,
                                      const topo::Topology& topology, NodeId observer,
                                      const PipelineConfig& cfg, std::uint64_t seed) {
    PipelineResult out;
    out.validators = topology.validator_count();

    infer::ObserverConfig ocfg;
    ocfg.observer_node = observer;
    ocfg.finalize_cap_epochs = cfg.finalize_cap_epochs;
    infer::ObservationLog log =
        infer::collect(records, out.validators, static_cast<std::int64_t>(topology.nodes.size()), ocfg);
    out.candidates = infer::rank_candidates(log, topology);

    std::int64_t in_top10 = 0, rank1 = 0;
    for (std::int64_t v = 0; v < out.validators; ++v) {
        const auto& list = out.candidates.per_validator[v];
        PrefixId truth = topology.validator_prefix[v];
        if (!list.empty() && list[0].prefix_id == truth) ++rank1;
        for (const auto& c : list)
            if (c.prefix_id == truth) {
                ++in_top10;
                break;
            }
    }
    out.host_in_top10 = static_cast<double>(in_top10) / static_cast<double>(out.validators);
    out.host_rank1 = static_cast<double>(rank1) / static_cast<double>(out.validators);

    out.seeds = infer::consecutive_id_seed(out.candidates);
    out.shuffle_coverage = infer::shuffle_control(out.candidates, seed);

    infer::TrainingSet ts = infer::build_training_set(out.candidates, out.seeds,
                                                      topology.validator_cluster, topology,
                                                      cfg.efficiency_threshold);
    out.training_examples = ts.n;
    out.dropped_examples = ts.dropped;

    std::set<int> classes(ts.y.begin(), ts.y.end());
    if (ts.n >= 10 && classes.size() >= 2) {
        infer::TrainResult tr = infer::train(ts, cfg.train, seed);
        out.trained = true;
        out.held_out_accuracy = tr.held_out_accuracy;
        out.loss_history = std::move(tr.loss_history);
        out.mapping = infer::predict_all(tr.model, tr.scaler, out.candidates, out.seeds);
        out.scaler = tr.scaler;
        out.model.emplace(std::move(tr.model));
    } else {
        // Nothing to learn from; seeded assignments are still usable.
        for (const auto& [v, prefix] : out.seeds.assignments)
            out.mapping.entries[v] = {prefix, infer::MappingConfidence::Seeded, 1.0};
    }
    out.alt_mapping = infer::alt_heuristic(out.candidates);
    out.accuracy = infer::mapping_accuracy(out.mapping, topology);
    out.alt_accuracy = infer::mapping_accuracy(out.alt_mapping, topology);
    return out;
}

std::vector<CountermeasureRow> countermeasure_eval(const ScenarioConfig& base,
                                                   const std::vector<gossip::Countermeasure>& modes,
                                                   const PipelineConfig& pipeline) {
    ScenarioConfig cfg = base;
    cfg.emit_traces = true;
    cfg.countermeasure = {gossip::CountermeasureMode::None, 0};
    ScenarioResult scenario = run_scenario(cfg);
    NodeId observer = cfg.gossip.observer_node ? *cfg.gossip.observer_node
                                               : static_cast<NodeId>(scenario.topology.nodes.size() - 1);

    std::vector<CountermeasureRow> rows;
    for (const auto& cm : modes) {
        std::vector<gossip::DeliveryRecord> records =
            gossip::countermeasure_transform(scenario.observer_records, cm, cfg.gossip,
                                             static_cast<std::int64_t>(scenario.topology.nodes.size()),
                                             cfg.seed);
        PipelineResult res =
            run_inference_pipeline(records, scenario.topology, observer, pipeline, cfg.seed);
        CountermeasureRow row;
        row.mode = gossip::to_string(cm.mode);
        if (cm.mode == gossip::CountermeasureMode::AddLatency) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "_%g", cm.mean_ms);
            row.mode += buf;
        }
        row.accuracy = res.accuracy;
        row.coverage = static_cast<double>(res.mapping.entries.size()) /
                       static_cast<double>(std::max<std::int64_t>(1, res.validators));
        rows.push_back(row);
    }
    return rows;
}

}  // namespace stakesim::scenario
