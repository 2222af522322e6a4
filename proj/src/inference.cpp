#include "stakesim/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace stakesim::infer {

namespace {

bool eligible(const gossip::DeliveryRecord& r) {
    if (r.previously_advertised) return false;
    if (r.channel == gossip::Channel::MeshEager && r.sender_subscribed) return true;
    if (r.channel == gossip::Channel::Fanout && !r.sender_subscribed) return true;  // OOS
    return false;
}

}  // namespace

ObservationLog collect(const std::vector<gossip::DeliveryRecord>& records, std::int64_t validator_count,
                       std::int64_t node_count, const ObserverConfig& cfg) {
    ObservationLog log;
    log.validator_count = validator_count;
    log.node_count = node_count;
    log.per_validator.resize(validator_count);
    log.messages_seen.assign(validator_count, 0);
    log.peer_finalized.assign(node_count, 0);
    log.finalize_ts_ms.assign(node_count, -1.0);

    std::vector<const gossip::DeliveryRecord*> sorted;
    sorted.reserve(records.size());
    for (const auto& r : records)
        if (r.receiver_node == cfg.observer_node) sorted.push_back(&r);
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
        if (a->rx_ts != b->rx_ts) return a->rx_ts < b->rx_ts;
        if (a->message_id != b->message_id) return a->message_id < b->message_id;
        return a->sender_node < b->sender_node;
    });

    const double epoch_ms = cfg.slot_ms * cfg.slots_per_epoch;
    std::vector<double> best_latency(validator_count, 1e300);
    std::vector<std::set<ValidatorId>> ever_fastest(node_count);
    std::vector<std::int64_t> first_seen_epoch(node_count, -1);
    std::set<std::uint64_t> message_first_done;

    std::int64_t boundary_epoch = 0;
    auto run_finalization = [&](std::int64_t up_to_epoch) {
        // Peer finalization is evaluated at epoch boundaries: every validator
        // the peer was ever fastest for must have an eager sample from it, or
        // the hard cap expires.
        for (; boundary_epoch < up_to_epoch; ++boundary_epoch) {
            for (std::int64_t p = 0; p < node_count; ++p) {
                if (log.peer_finalized[p] || first_seen_epoch[p] < 0) continue;
                bool cap = boundary_epoch - first_seen_epoch[p] + 1 >= cfg.finalize_cap_epochs;
                bool covered = !ever_fastest[p].empty();
                for (ValidatorId v : ever_fastest[p]) {
                    auto it = log.per_validator[v].find(static_cast<NodeId>(p));
                    if (it == log.per_validator[v].end() ||
                        it->second.eager_count + it->second.oos_count < 1) {
                        covered = false;
                        break;
                    }
                }
                if (covered || cap) {
                    log.peer_finalized[p] = 1;
                    log.finalize_ts_ms[p] = static_cast<double>(boundary_epoch + 1) * epoch_ms;
                }
            }
        }
    };

    for (const auto* rp : sorted) {
        const auto& r = *rp;
        const std::int64_t epoch = static_cast<std::int64_t>(r.rx_ts / epoch_ms);
        run_finalization(epoch);
        if (r.validator_id >= validator_count || r.sender_node >= node_count) continue;
        if (log.peer_finalized[r.sender_node]) continue;  // blacklisted
        if (first_seen_epoch[r.sender_node] < 0) first_seen_epoch[r.sender_node] = epoch;

        PeerStats& stats = log.per_validator[r.validator_id][r.sender_node];
        stats.total_count++;
        if (message_first_done.insert(r.message_id).second) {
            stats.fastest_first++;
            log.messages_seen[r.validator_id]++;
        }
        if (!eligible(r)) continue;

        const double slot_start = static_cast<double>(r.slot) * cfg.slot_ms;
        const double rel = r.rx_ts - slot_start;
        if (rel < 0) continue;
        if (r.channel == gossip::Channel::Fanout)
            stats.oos_count++;
        else
            stats.eager_count++;
        stats.latencies.push_back(rel);
        if (rel < best_latency[r.validator_id]) {
            best_latency[r.validator_id] = rel;
            ever_fastest[r.sender_node].insert(r.validator_id);
        }
    }
    run_finalization(boundary_epoch + 1);
    return log;
}

CandidateSet rank_candidates(const ObservationLog& log, const topo::Topology& topo) {
    CandidateSet out;
    out.per_validator.resize(log.validator_count);

    for (std::int64_t v = 0; v < log.validator_count; ++v) {
        struct SenderRank {
            NodeId node;
            double min_latency;
            double median;
            const PeerStats* stats;
        };
        std::vector<SenderRank> senders;
        for (const auto& [node, stats] : log.per_validator[v]) {
            if (stats.latencies.empty()) continue;
            std::vector<double> lat = stats.latencies;
            std::sort(lat.begin(), lat.end());
            senders.push_back({node, lat.front(), lat[lat.size() / 2], &stats});
        }
        if (senders.empty()) {
            out.excluded_validators++;
            continue;
        }
        std::sort(senders.begin(), senders.end(), [](const SenderRank& a, const SenderRank& b) {
            if (a.min_latency != b.min_latency) return a.min_latency < b.min_latency;
            // ties: more eager evidence first, then lower node id
            auto ae = a.stats->eager_count + a.stats->oos_count;
            auto be = b.stats->eager_count + b.stats->oos_count;
            if (ae != be) return ae > be;
            return a.node < b.node;
        });

        std::set<PrefixId> used;
        auto& list = out.per_validator[v];
        const double messages = std::max<std::int64_t>(1, log.messages_seen[v]);
        for (const auto& s : senders) {
            PrefixId prefix = topo.nodes[s.node].prefix_id;
            if (!used.insert(prefix).second) continue;
            Candidate c;
            c.prefix_id = prefix;
            c.best_node = s.node;
            c.min_latency = s.min_latency;
            c.median_latency = s.median;
            c.eager_count = static_cast<double>(s.stats->eager_count);
            c.oos_count = static_cast<double>(s.stats->oos_count);
            c.total_count = static_cast<double>(s.stats->total_count);
            c.fastest_first_share = static_cast<double>(s.stats->fastest_first) / messages;
            list.push_back(c);
            if (static_cast<int>(list.size()) >= kMaxCandidates) break;
        }
    }
    return out;
}

namespace {

// Seed one validator from an adjacent pair when the candidate prefix sets
// intersect in exactly one prefix.
std::optional<PrefixId> pair_intersection(const std::vector<Candidate>& a, const std::vector<Candidate>& b) {
    if (a.empty() || b.empty()) return std::nullopt;
    std::set<PrefixId> sa;
    for (const auto& c : a) sa.insert(c.prefix_id);
    std::optional<PrefixId> found;
    std::set<PrefixId> seen_b;
    for (const auto& c : b) {
        if (!seen_b.insert(c.prefix_id).second) continue;
        if (sa.count(c.prefix_id)) {
            if (found) return std::nullopt;  // ambiguous
            found = c.prefix_id;
        }
    }
    return found;
}

SeedMapping seed_from_lists(const std::vector<const std::vector<Candidate>*>& lists) {
    SeedMapping out;
    const std::size_t n = lists.size();
    std::vector<std::optional<PrefixId>> pair_result(n > 0 ? n - 1 : 0);
    for (std::size_t i = 0; i + 1 < n; ++i) pair_result[i] = pair_intersection(*lists[i], *lists[i + 1]);
    for (std::size_t v = 0; v < n; ++v) {
        std::optional<PrefixId> left = v > 0 ? pair_result[v - 1] : std::nullopt;
        std::optional<PrefixId> right = v + 1 < n ? pair_result[v] : std::nullopt;
        if (left && right && *left != *right) continue;  // conflicting evidence
        if (right)
            out.assignments[static_cast<ValidatorId>(v)] = *right;
        else if (left)
            out.assignments[static_cast<ValidatorId>(v)] = *left;
    }
    out.coverage = n == 0 ? 0.0 : static_cast<double>(out.assignments.size()) / static_cast<double>(n);
    return out;
}

}  // namespace

SeedMapping consecutive_id_seed(const CandidateSet& candidates) {
    std::vector<const std::vector<Candidate>*> lists;
    lists.reserve(candidates.per_validator.size());
    for (const auto& l : candidates.per_validator) lists.push_back(&l);
    return seed_from_lists(lists);
}

double shuffle_control(const CandidateSet& candidates, std::uint64_t seed) {
    std::vector<std::size_t> perm(candidates.per_validator.size());
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng = Rng::derive(seed, "shuffle-control");
    rng.shuffle(perm);
    std::vector<const std::vector<Candidate>*> lists(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) lists[i] = &candidates.per_validator[perm[i]];
    SeedMapping shuffled = seed_from_lists(lists);
    return shuffled.coverage;
}

double efficiency_score(const std::vector<double>& as_distribution) {
    if (as_distribution.empty()) throw std::domain_error("empty distribution");
    double total = 0;
    for (double x : as_distribution) {
        if (x < 0) throw std::domain_error("negative mass in distribution");
        total += x;
    }
    if (total <= 0) throw std::domain_error("distribution has no mass");
    if (as_distribution.size() == 1) return 0.0;
    double h = 0;
    for (double x : as_distribution) {
        if (x <= 0) continue;
        double p = x / total;
        h -= p * std::log(p);
    }
    return h / std::log(static_cast<double>(as_distribution.size()));
}

void fill_features(const std::vector<Candidate>& list, const FeatureScaler& scaler, double* out) {
    for (int slot = 0; slot < kMaxCandidates; ++slot) {
        double* f = out + slot * kCandidateFeatures;
        if (slot < static_cast<int>(list.size())) {
            const Candidate& c = list[slot];
            const double raw[kCandidateFeatures] = {c.min_latency,  c.median_latency, c.eager_count,
                                                    c.oos_count,    c.total_count,    c.fastest_first_share};
            for (int k = 0; k < kCandidateFeatures; ++k)
                f[k] = (raw[k] - scaler.mean[k]) / (scaler.sd[k] > 0 ? scaler.sd[k] : 1.0);
        } else {
            for (int k = 0; k < kCandidateFeatures; ++k) f[k] = 0.0;  // padding
        }
    }
}

TrainingSet build_training_set(const CandidateSet& candidates, const SeedMapping& seeds,
                               const std::vector<std::uint32_t>& clusters, const topo::Topology& topo,
                               double efficiency_threshold) {
    TrainingSet out;

    // Cluster AS distributions from the seeded assignments.
    std::map<std::uint32_t, std::map<Asn, double>> cluster_as;
    for (const auto& [v, prefix] : seeds.assignments) {
        if (prefix >= topo.prefixes.size()) throw ConfigError("seeded prefix outside the topology");
        cluster_as[clusters[v]][topo.prefixes[prefix].origin_asn] += 1.0;
    }
    std::set<std::uint32_t> keep;
    for (const auto& [cluster, dist] : cluster_as) {
        std::vector<double> masses;
        for (const auto& [asn, m] : dist) masses.push_back(m);
        if (efficiency_score(masses) <= efficiency_threshold) keep.insert(cluster);
    }

    struct Example {
        ValidatorId v;
        int label;
    };
    std::vector<Example> examples;
    for (const auto& [v, prefix] : seeds.assignments) {
        if (!keep.count(clusters[v])) continue;
        const auto& list = candidates.per_validator[v];
        int label = -1;
        for (std::size_t i = 0; i < list.size(); ++i)
            if (list[i].prefix_id == prefix) {
                label = static_cast<int>(i);
                break;
            }
        if (label < 0) {
            out.dropped++;
            continue;
        }
        examples.push_back({v, label});
    }

    // Feature scaling pooled per feature across real candidates of the kept
    // examples.
    double sum[kCandidateFeatures] = {0};
    double sumsq[kCandidateFeatures] = {0};
    std::int64_t count = 0;
    for (const auto& ex : examples)
        for (const auto& c : candidates.per_validator[ex.v]) {
            const double raw[kCandidateFeatures] = {c.min_latency,  c.median_latency, c.eager_count,
                                                    c.oos_count,    c.total_count,    c.fastest_first_share};
            for (int k = 0; k < kCandidateFeatures; ++k) {
                sum[k] += raw[k];
                sumsq[k] += raw[k] * raw[k];
            }
            ++count;
        }
    for (int k = 0; k < kCandidateFeatures; ++k) {
        if (count > 0) {
            out.scaler.mean[k] = sum[k] / count;
            double var = sumsq[k] / count - out.scaler.mean[k] * out.scaler.mean[k];
            out.scaler.sd[k] = var > 0 ? std::sqrt(var) : 1.0;
        } else {
            out.scaler.mean[k] = 0;
            out.scaler.sd[k] = 1;
        }
    }

    const int width = kMaxCandidates * kCandidateFeatures;
    out.X.assign(static_cast<std::size_t>(examples.size()) * width, 0.0);
    out.y.resize(examples.size());
    out.validator_ids.resize(examples.size());
    for (std::size_t i = 0; i < examples.size(); ++i) {
        fill_features(candidates.per_validator[examples[i].v], out.scaler,
                      out.X.data() + i * static_cast<std::size_t>(width));
        out.y[i] = examples[i].label;
        out.validator_ids[i] = examples[i].v;
    }
    out.n = static_cast<int>(examples.size());
    return out;
}

TrainResult train(const TrainingSet& data, const TrainConfig& cfg, std::uint64_t seed) {
    std::set<int> classes(data.y.begin(), data.y.end());
    if (classes.size() < 2) throw std::domain_error("training needs at least two represented classes");

    const int width = kMaxCandidates * kCandidateFeatures;
    std::vector<int> order(data.n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::derive(seed, "train-split");
    rng.shuffle(order);
    const int holdout = static_cast<int>(std::floor(cfg.holdout_fraction * data.n));
    const int train_n = data.n - holdout;
    if (train_n < 2) throw std::domain_error("not enough training examples");

    std::vector<double> Xtr(static_cast<std::size_t>(train_n) * width);
    std::vector<int> ytr(train_n);
    std::vector<double> Xho(static_cast<std::size_t>(holdout) * width);
    std::vector<int> yho(holdout);
    for (int i = 0; i < train_n; ++i) {
        std::copy_n(data.X.data() + static_cast<std::size_t>(order[i]) * width, width,
                    Xtr.data() + static_cast<std::size_t>(i) * width);
        ytr[i] = data.y[order[i]];
    }
    for (int i = 0; i < holdout; ++i) {
        std::copy_n(data.X.data() + static_cast<std::size_t>(order[train_n + i]) * width, width,
                    Xho.data() + static_cast<std::size_t>(i) * width);
        yho[i] = data.y[order[train_n + i]];
    }

    std::vector<int> sizes;
    sizes.push_back(width);
    for (int h : cfg.hidden) sizes.push_back(h);
    sizes.push_back(kMaxCandidates);

    TrainResult result{Mlp(sizes, seed), data.scaler, 0.0, {}, train_n, holdout};
    Rng perm_rng = Rng::derive(seed, "train-permutations");
    std::vector<double> Xp(Xtr.size());
    std::vector<int> yp(ytr.size());
    std::vector<int> perm(kMaxCandidates);

    for (int pass = 0; pass < cfg.passes; ++pass) {
        // Shared candidate-order permutation for the whole pass; labels move
        // with their candidate slots.
        std::iota(perm.begin(), perm.end(), 0);
        perm_rng.shuffle(perm);
        for (int i = 0; i < train_n; ++i) {
            const double* src = Xtr.data() + static_cast<std::size_t>(i) * width;
            double* dst = Xp.data() + static_cast<std::size_t>(i) * width;
            for (int slot = 0; slot < kMaxCandidates; ++slot)
                std::copy_n(src + perm[slot] * kCandidateFeatures, kCandidateFeatures,
                            dst + slot * kCandidateFeatures);
            int moved = -1;
            for (int slot = 0; slot < kMaxCandidates; ++slot)
                if (perm[slot] == ytr[i]) {
                    moved = slot;
                    break;
                }
            yp[i] = moved;
        }
        double loss = result.model.train_step(Xp, yp, train_n, cfg.learning_rate);
        result.loss_history.push_back(loss);
    }

    int correct = 0;
    for (int i = 0; i < holdout; ++i) {
        std::vector<double> x(Xho.data() + static_cast<std::size_t>(i) * width,
                              Xho.data() + static_cast<std::size_t>(i + 1) * width);
        std::vector<double> p = result.model.predict(x);
        int argmax = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
        if (argmax == yho[i]) ++correct;
    }
    result.held_out_accuracy = holdout > 0 ? static_cast<double>(correct) / holdout : 1.0;
    return result;
}

MappingResult predict_all(const Mlp& model, const FeatureScaler& scaler, const CandidateSet& candidates,
                          const SeedMapping& seeds) {
    MappingResult out;
    const int width = kMaxCandidates * kCandidateFeatures;
    std::vector<double> x(width);
    for (std::size_t v = 0; v < candidates.per_validator.size(); ++v) {
        auto seeded = seeds.assignments.find(static_cast<ValidatorId>(v));
        if (seeded != seeds.assignments.end()) {
            out.entries[static_cast<ValidatorId>(v)] = {seeded->second, MappingConfidence::Seeded, 1.0};
            continue;
        }
        const auto& list = candidates.per_validator[v];
        if (list.empty()) continue;
        fill_features(list, scaler, x.data());
        std::vector<double> p = model.predict(x);
        // Restrict to available positions and renormalize.
        double mass = 0;
        for (std::size_t i = 0; i < list.size(); ++i) mass += p[i];
        int best = 0;
        for (std::size_t i = 1; i < list.size(); ++i)
            if (p[i] > p[best]) best = static_cast<int>(i);
        double score = mass > 0 ? p[best] / mass : 1.0 / static_cast<double>(list.size());
        out.entries[static_cast<ValidatorId>(v)] = {list[best].prefix_id, MappingConfidence::Model, score};
    }
    return out;
}

MappingResult alt_heuristic(const CandidateSet& candidates) {
    MappingResult out;
    for (std::size_t v = 0; v < candidates.per_validator.size(); ++v) {
        const auto& list = candidates.per_validator[v];
        if (list.empty()) continue;
        int best = -1;
        for (std::size_t i = 0; i < list.size(); ++i) {
            if (list[i].oos_count <= 0) continue;
            if (best < 0 || list[i].oos_count > list[best].oos_count) best = static_cast<int>(i);
        }
        double score;
        if (best < 0) {
            best = 0;  // all-zero OOS: fall back to lowest latency, flagged by score 0
            score = 0.0;
        } else {
            score = list[best].oos_count;
        }
        out.entries[static_cast<ValidatorId>(v)] = {list[best].prefix_id, MappingConfidence::Model, score};
    }
    return out;
}

double mapping_accuracy(const MappingResult& mapping, const topo::Topology& topo) {
    const std::int64_t total = topo.validator_count();
    if (total == 0) return 0.0;
    std::int64_t correct = 0;
    for (const auto& [v, entry] : mapping.entries)
        if (v < static_cast<ValidatorId>(total) && topo.validator_prefix[v] == entry.prefix_id) ++correct;
    return static_cast<double>(correct) / static_cast<double>(total);
}

topo::MappingTable to_mapping_table(const MappingResult& mapping, const topo::Topology& topo) {
    topo::MappingTable out;
    for (const auto& [v, entry] : mapping.entries) {
        const topo::Prefix& p = topo.prefixes[entry.prefix_id];
        topo::MappingRow row;
        row.validator_id = static_cast<std::int64_t>(v);
        row.prefix = p.cidr;
        row.asn = "AS" + std::to_string(p.origin_asn);
        row.rpki = topo::to_string(p.rpki);
        row.country = p.country;
        out.rows.push_back(std::move(row));
    }
    return out;
}

}  // namespace stakesim::infer
