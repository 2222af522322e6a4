#include "stakesim/topology.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <queue>
#include <set>

#include "stakesim/csvio.hpp"

namespace stakesim::topo {

std::string to_string(RpkiStatus s) {
    switch (s) {
        case RpkiStatus::Valid: return "valid";
        case RpkiStatus::PermissiveMaxlength: return "permissive_maxlength";
        case RpkiStatus::NoRoa: return "no_roa";
    }
    return "valid";
}

RpkiStatus rpki_from_string(const std::string& s) {
    if (s == "valid" || s.empty()) return RpkiStatus::Valid;
    if (s == "permissive_maxlength") return RpkiStatus::PermissiveMaxlength;
    if (s == "no_roa") return RpkiStatus::NoRoa;
    throw ConfigError("unknown rpki status: " + s);
}

std::string to_string(HijackMode m) {
    return m == HijackMode::PartitionDrop ? "partition_drop" : "proposer_drop";
}

TopologyConfig TopologyConfig::from_json(const nlohmann::json& j) {
    TopologyConfig c;
    c.as_count = j.value("as_count", c.as_count);
    c.graph = j.value("graph", c.graph);
    c.chords_per_as = j.value("chords_per_as", c.chords_per_as);
    c.inter_as_latency_min_ms = j.value("inter_as_latency_min_ms", c.inter_as_latency_min_ms);
    c.inter_as_latency_max_ms = j.value("inter_as_latency_max_ms", c.inter_as_latency_max_ms);
    c.access_latency_min_ms = j.value("access_latency_min_ms", c.access_latency_min_ms);
    c.access_latency_max_ms = j.value("access_latency_max_ms", c.access_latency_max_ms);
    c.prefixes_per_as = j.value("prefixes_per_as", c.prefixes_per_as);
    c.nodes_per_prefix = j.value("nodes_per_prefix", c.nodes_per_prefix);
    c.validators = j.value("validators", c.validators);
    c.mesh_degree = j.value("mesh_degree", c.mesh_degree);
    c.jitter_mean_ms = j.value("jitter_mean_ms", c.jitter_mean_ms);
    c.subscribe_all_threshold = j.value("subscribe_all_threshold", c.subscribe_all_threshold);
    c.persistent_topics_per_node = j.value("persistent_topics_per_node", c.persistent_topics_per_node);
    c.topic_count = j.value("topic_count", c.topic_count);
    c.build_latencies = j.value("build_latencies", c.build_latencies);
    c.rpki_permissive_share = j.value("rpki_permissive_share", c.rpki_permissive_share);
    c.rpki_noroa_share = j.value("rpki_noroa_share", c.rpki_noroa_share);
    if (j.contains("placement")) {
        const auto& p = j.at("placement");
        c.placement.kind = p.value("kind", c.placement.kind);
        if (p.contains("counts")) c.placement.counts = p.at("counts").get<std::vector<std::int64_t>>();
        c.placement.zipf_alpha = p.value("zipf_alpha", c.placement.zipf_alpha);
        c.placement.operator_count = p.value("operator_count", c.placement.operator_count);
        c.placement.block_min = p.value("block_min", c.placement.block_min);
        c.placement.block_max = p.value("block_max", c.placement.block_max);
        c.placement.solo_fraction = p.value("solo_fraction", c.placement.solo_fraction);
        c.placement.multi_as_operators = p.value("multi_as_operators", c.placement.multi_as_operators);
    }
    return c;
}

nlohmann::json TopologyConfig::to_json() const {
    nlohmann::json j;
    j["as_count"] = as_count;
    j["graph"] = graph;
    j["chords_per_as"] = chords_per_as;
    j["inter_as_latency_min_ms"] = inter_as_latency_min_ms;
    j["inter_as_latency_max_ms"] = inter_as_latency_max_ms;
    j["access_latency_min_ms"] = access_latency_min_ms;
    j["access_latency_max_ms"] = access_latency_max_ms;
    j["prefixes_per_as"] = prefixes_per_as;
    j["nodes_per_prefix"] = nodes_per_prefix;
    j["validators"] = validators;
    j["mesh_degree"] = mesh_degree;
    j["jitter_mean_ms"] = jitter_mean_ms;
    j["subscribe_all_threshold"] = subscribe_all_threshold;
    j["persistent_topics_per_node"] = persistent_topics_per_node;
    j["topic_count"] = topic_count;
    j["build_latencies"] = build_latencies;
    j["rpki_permissive_share"] = rpki_permissive_share;
    j["rpki_noroa_share"] = rpki_noroa_share;
    nlohmann::json p;
    p["kind"] = placement.kind;
    if (!placement.counts.empty()) p["counts"] = placement.counts;
    p["zipf_alpha"] = placement.zipf_alpha;
    p["operator_count"] = placement.operator_count;
    p["block_min"] = placement.block_min;
    p["block_max"] = placement.block_max;
    p["solo_fraction"] = placement.solo_fraction;
    p["multi_as_operators"] = placement.multi_as_operators;
    j["placement"] = p;
    return j;
}

double Topology::as_distance(Asn a, Asn b) const {
    if (a == b) return 0.0;
    return as_dist_[static_cast<std::size_t>(a) * ases.size() + b];
}

double Topology::base_latency(NodeId a, NodeId b) const {
    if (a == b) return 0.0;
    if (!has_latencies()) throw ConfigError("topology built without latencies");
    const NetNode& na = nodes[a];
    const NetNode& nb = nodes[b];
    return na.access_ms + nb.access_ms + as_distance(node_asn(a), node_asn(b));
}

double path_latency(const Topology& topo, NodeId a, NodeId b, Rng& rng) {
    double jitter = rng.exponential(topo.nodes[b].jitter_mean_ms);
    if (a == b) return jitter;
    return topo.base_latency(a, b) + jitter;
}

namespace {

std::vector<double> build_as_distances(const TopologyConfig& cfg, std::vector<AutonomousSystem>& ases,
                                       Rng& rng) {
    const std::size_t n = ases.size();
    std::vector<double> dist(n * n, 0.0);
    if (cfg.graph == "full_mesh") {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                double lat = rng.uniform_range(cfg.inter_as_latency_min_ms, cfg.inter_as_latency_max_ms);
                dist[i * n + j] = lat;
                dist[j * n + i] = lat;
                ases[i].neighbors.emplace_back(static_cast<Asn>(j), lat);
                ases[j].neighbors.emplace_back(static_cast<Asn>(i), lat);
            }
        return dist;
    }
    if (cfg.graph != "ring_chords") throw ConfigError("unknown AS graph kind: " + cfg.graph);

    auto add_edge = [&](std::size_t i, std::size_t j, double lat) {
        for (const auto& [peer, _] : ases[i].neighbors)
            if (peer == j) return;
        ases[i].neighbors.emplace_back(static_cast<Asn>(j), lat);
        ases[j].neighbors.emplace_back(static_cast<Asn>(i), lat);
    };
    for (std::size_t i = 0; i < n; ++i)
        add_edge(i, (i + 1) % n, rng.uniform_range(cfg.inter_as_latency_min_ms, cfg.inter_as_latency_max_ms));
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < cfg.chords_per_as; ++c) {
            std::size_t j = rng.uniform_below(n);
            if (j != i)
                add_edge(i, j, rng.uniform_range(cfg.inter_as_latency_min_ms, cfg.inter_as_latency_max_ms));
        }

    // All-pairs shortest paths; AS counts stay small enough for Dijkstra per source.
    const double inf = 1e18;
    std::fill(dist.begin(), dist.end(), inf);
    for (std::size_t src = 0; src < n; ++src) {
        std::priority_queue<std::pair<double, std::size_t>, std::vector<std::pair<double, std::size_t>>,
                            std::greater<>> pq;
        dist[src * n + src] = 0.0;
        pq.emplace(0.0, src);
        while (!pq.empty()) {
            auto [d, u] = pq.top();
            pq.pop();
            if (d > dist[src * n + u]) continue;
            for (const auto& [v, w] : ases[u].neighbors) {
                double nd = d + w;
                if (nd < dist[src * n + v]) {
                    dist[src * n + v] = nd;
                    pq.emplace(nd, static_cast<std::size_t>(v));
                }
            }
        }
    }
    return dist;
}

void assign_rpki(std::vector<Prefix>& prefixes, const TopologyConfig& cfg, Rng& rng) {
    const std::int64_t n = static_cast<std::int64_t>(prefixes.size());
    std::int64_t n_perm = static_cast<std::int64_t>(std::llround(cfg.rpki_permissive_share * n));
    std::int64_t n_noroa = static_cast<std::int64_t>(std::llround(cfg.rpki_noroa_share * n));
    std::vector<RpkiStatus> labels(n, RpkiStatus::Valid);
    for (std::int64_t i = 0; i < n_perm && i < n; ++i) labels[i] = RpkiStatus::PermissiveMaxlength;
    for (std::int64_t i = n_perm; i < n_perm + n_noroa && i < n; ++i) labels[i] = RpkiStatus::NoRoa;
    rng.shuffle(labels);
    for (std::int64_t i = 0; i < n; ++i) prefixes[i].rpki = labels[i];
}

std::string cidr_name(PrefixId id, int length) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "10.%u.%u.0/%d", (id / 256) % 256, id % 256, length);
    return std::string(buf);
}

std::vector<std::int64_t> placement_counts(const TopologyConfig& cfg, std::int64_t prefix_count, Rng& rng) {
    const auto& pl = cfg.placement;
    std::vector<std::int64_t> counts(prefix_count, 0);
    if (pl.kind == "uniform") {
        for (std::int64_t v = 0; v < cfg.validators; ++v) counts[v % prefix_count]++;
    } else if (pl.kind == "table") {
        if (static_cast<std::int64_t>(pl.counts.size()) > prefix_count)
            throw ConfigError("placement table longer than the prefix count");
        std::int64_t sum = std::accumulate(pl.counts.begin(), pl.counts.end(), std::int64_t{0});
        if (sum != cfg.validators)
            throw ConfigError("placement table sums to " + std::to_string(sum) + ", expected " +
                              std::to_string(cfg.validators));
        std::copy(pl.counts.begin(), pl.counts.end(), counts.begin());
    } else if (pl.kind == "zipf") {
        std::vector<double> w(prefix_count);
        double total = 0;
        for (std::int64_t i = 0; i < prefix_count; ++i) {
            w[i] = std::pow(static_cast<double>(i + 1), -pl.zipf_alpha);
            total += w[i];
        }
        std::int64_t assigned = 0;
        for (std::int64_t i = 0; i < prefix_count; ++i) {
            counts[i] = static_cast<std::int64_t>(std::floor(cfg.validators * w[i] / total));
            assigned += counts[i];
        }
        for (std::int64_t i = 0; assigned < cfg.validators; i = (i + 1) % prefix_count) {
            counts[i]++;
            assigned++;
        }
        (void)rng;
    } else {
        throw ConfigError("unknown placement kind: " + pl.kind);
    }
    return counts;
}

}  // namespace

Topology make_paper_shaped_topology(std::uint64_t seed);

Topology build_topology(const TopologyConfig& config, std::uint64_t seed) {
    if (config.placement.kind == "paper_shaped") {
        Topology t = make_paper_shaped_topology(seed);
        return t;
    }
    if (config.as_count <= 0 || config.prefixes_per_as <= 0 || config.nodes_per_prefix <= 0)
        throw ConfigError("topology sizes must be positive");

    Topology topo;
    topo.config = config;
    topo.seed = seed;

    Rng rng = Rng::derive(seed, "topology");

    topo.ases.resize(config.as_count);
    for (std::int64_t i = 0; i < config.as_count; ++i) {
        topo.ases[i].asn = static_cast<Asn>(i);
        topo.ases[i].name = "as-" + std::to_string(i);
    }
    if (config.build_latencies) topo.set_as_distances(build_as_distances(config, topo.ases, rng));

    const std::int64_t prefix_count = config.as_count * config.prefixes_per_as;
    topo.prefixes.resize(prefix_count);
    for (std::int64_t i = 0; i < prefix_count; ++i) {
        Prefix& p = topo.prefixes[i];
        p.prefix_id = static_cast<PrefixId>(i);
        p.origin_asn = static_cast<Asn>(i % config.as_count);
        p.length = static_cast<int>(rng.uniform_int(20, 24));
        p.country = "ZZ";
        p.cidr = cidr_name(p.prefix_id, p.length);
    }
    assign_rpki(topo.prefixes, config, rng);

    topo.prefix_nodes.resize(prefix_count);
    for (std::int64_t p = 0; p < prefix_count; ++p)
        for (std::int64_t k = 0; k < config.nodes_per_prefix; ++k) {
            NetNode node;
            node.node_id = static_cast<NodeId>(topo.nodes.size());
            node.prefix_id = static_cast<PrefixId>(p);
            node.mesh_degree = config.mesh_degree;
            node.jitter_mean_ms = config.jitter_mean_ms;
            node.access_ms = rng.uniform_range(config.access_latency_min_ms, config.access_latency_max_ms);
            topo.prefix_nodes[p].push_back(node.node_id);
            topo.nodes.push_back(std::move(node));
        }

    // Validator placement.
    topo.validator_prefix.assign(config.validators, 0);
    topo.validator_node.assign(config.validators, 0);
    topo.validator_cluster.assign(config.validators, 0);

    if (config.placement.kind == "operator_blocks") {
        const auto& pl = config.placement;
        const std::int64_t solos = std::llround(pl.solo_fraction * config.validators);
        const std::int64_t block_total = config.validators - solos;
        if (pl.operator_count <= 0) throw ConfigError("operator_blocks needs operator_count > 0");
        if (pl.operator_count + solos > prefix_count + 0 ||
            pl.operator_count + solos > static_cast<std::int64_t>(topo.nodes.size()))
            throw ConfigError("more validators than hosting capacity");

        std::vector<std::int64_t> sizes(pl.operator_count);
        std::int64_t sum = 0;
        for (auto& s : sizes) {
            s = rng.uniform_int(pl.block_min, pl.block_max);
            sum += s;
        }
        for (std::int64_t i = 0; sum != block_total; i = (i + 1) % pl.operator_count) {
            if (sum < block_total && sizes[i] < pl.block_max * 2) {
                sizes[i]++;
                sum++;
            } else if (sum > block_total && sizes[i] > 1) {
                sizes[i]--;
                sum--;
            }
        }

        // Hosts draw distinct prefixes; whatever remains hosts no validators.
        std::vector<PrefixId> pool(prefix_count);
        std::iota(pool.begin(), pool.end(), 0);
        rng.shuffle(pool);
        std::size_t next_prefix = 0;

        ValidatorId next_id = 0;
        std::int64_t solos_left = solos;
        const std::int64_t gaps = pl.operator_count + 1;
        std::uint32_t cluster = 0;
        auto place_solo_run = [&](std::int64_t count) {
            for (std::int64_t s = 0; s < count && solos_left > 0; ++s, --solos_left) {
                PrefixId pfx = pool[next_prefix++];
                topo.validator_prefix[next_id] = pfx;
                topo.validator_cluster[next_id] = 1'000'000 + next_id;
                ++next_id;
            }
        };
        for (std::int64_t o = 0; o < pl.operator_count; ++o) {
            place_solo_run(solos_left / (gaps - o));
            PrefixId pfx = pool[next_prefix++];
            PrefixId alt = pfx;
            if (o < pl.multi_as_operators) {
                alt = pool[next_prefix++];  // second prefix, different AS in expectation
            }
            for (std::int64_t k = 0; k < sizes[o]; ++k) {
                topo.validator_prefix[next_id] = (k % 2 == 0) ? pfx : alt;
                topo.validator_cluster[next_id] = cluster;
                ++next_id;
            }
            ++cluster;
        }
        place_solo_run(solos_left);
        if (next_id != static_cast<ValidatorId>(config.validators))
            throw ConfigError("operator placement did not cover all validators");
    } else {
        std::vector<std::int64_t> counts = placement_counts(config, prefix_count, rng);
        std::vector<PrefixId> assignment;
        assignment.reserve(config.validators);
        for (std::int64_t p = 0; p < prefix_count; ++p)
            for (std::int64_t k = 0; k < counts[p]; ++k) assignment.push_back(static_cast<PrefixId>(p));
        if (static_cast<std::int64_t>(assignment.size()) != config.validators)
            throw ConfigError("placement does not cover all validators");
        rng.shuffle(assignment);
        for (std::int64_t v = 0; v < config.validators; ++v) {
            topo.validator_prefix[v] = assignment[v];
            topo.validator_cluster[v] = static_cast<std::uint32_t>(v);
        }
    }

    // Hosting node within the prefix, round robin.
    std::vector<std::size_t> rr(prefix_count, 0);
    for (std::int64_t v = 0; v < config.validators; ++v) {
        PrefixId p = topo.validator_prefix[v];
        const auto& candidates = topo.prefix_nodes[p];
        NodeId node = candidates[rr[p] % candidates.size()];
        rr[p]++;
        topo.validator_node[v] = node;
        topo.nodes[node].hosted_validators.push_back(static_cast<ValidatorId>(v));
    }

    // Subscriptions: persistent topics for everyone; nodes hosting many
    // validators subscribe to all topics with probability rising in the
    // hosted count, certain at the threshold.
    for (auto& node : topo.nodes) {
        std::set<std::uint16_t> topics;
        while (static_cast<int>(topics.size()) < config.persistent_topics_per_node)
            topics.insert(static_cast<std::uint16_t>(rng.uniform_below(config.topic_count)));
        node.persistent_topics.assign(topics.begin(), topics.end());
        const double hosted = static_cast<double>(node.hosted_validators.size());
        const double p_all = std::min(1.0, hosted / static_cast<double>(config.subscribe_all_threshold));
        node.all_topics = hosted > 0 && rng.uniform() < p_all * p_all;
        if (hosted >= static_cast<double>(config.subscribe_all_threshold)) node.all_topics = true;
    }

    return topo;
}

ConnectivityOracle::ConnectivityOracle(const Topology& topo, std::vector<HijackAction> actions)
    : topo_(&topo) {
    for (auto& a : actions) add_action(std::move(a));
}

void ConnectivityOracle::install(HijackAction& action) {
    if (action.prefixes.empty()) throw ConfigError("hijack action without prefixes");
    if (action.start > action.end) throw ConfigError("hijack window start after end");
    std::set<PrefixId> pset(action.prefixes.begin(), action.prefixes.end());
    action.partition_membership.clear();
    std::vector<char> member(topo_->nodes.size(), 0);
    for (const auto& node : topo_->nodes)
        if (pset.count(node.prefix_id)) {
            member[node.node_id] = 1;
            action.partition_membership.push_back(node.node_id);
        }
    if (action.pair_seed == 0)
        action.pair_seed = hash_label("hijack-pairs") ^ (topo_->seed + 0x9E3779B97F4A7C15ULL * (actions_.size() + 1));
    member_.push_back(std::move(member));
}

void ConnectivityOracle::add_action(HijackAction action) {
    install(action);
    actions_.push_back(std::move(action));
}

bool ConnectivityOracle::reachable(NodeId a, NodeId b, Slot t) const {
    if (a == b) return true;
    for (std::size_t i = 0; i < actions_.size(); ++i) {
        const HijackAction& act = actions_[i];
        if (t < act.start || t > act.end) continue;
        const auto& member = member_[i];
        const bool ina = member[a] != 0;
        const bool inb = member[b] != 0;
        bool affected = false;
        if (act.mode == HijackMode::PartitionDrop)
            affected = ina != inb;
        else
            affected = ina || inb;
        if (!affected) continue;
        if (act.success_probability >= 1.0) return false;
        // Per-pair success draw, fixed for the lifetime of the action.
        std::uint64_t key = act.pair_seed;
        key ^= 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(std::min(a, b)) + 1);
        key ^= 0xC2B2AE3D27D4EB4FULL * (static_cast<std::uint64_t>(std::max(a, b)) + 1);
        std::uint64_t mixed = splitmix64(key);
        double u = static_cast<double>(mixed >> 11) * 0x1.0p-53;
        if (u < act.success_probability) return false;
    }
    return true;
}

MappingTable ingest_mapping_csv(const std::string& path) {
    csv::Table t = csv::read_file(path);
    const std::vector<std::string> expected = {"validator_id", "prefix", "asn", "rpki_status", "country"};
    if (t.header != std::vector<std::string>(expected.begin(), expected.end()))
        throw ConfigError("mapping csv header must be validator_id,prefix,asn,rpki_status,country");
    MappingTable out;
    std::set<std::int64_t> seen;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const std::size_t line = i + 2;  // header is line 1
        if (row.size() != 5)
            throw ConfigError("mapping csv line " + std::to_string(line) + ": expected 5 fields, got " +
                              std::to_string(row.size()));
        MappingRow m;
        try {
            m.validator_id = std::stoll(row[0]);
        } catch (const std::exception&) {
            throw ConfigError("mapping csv line " + std::to_string(line) + ": bad validator_id '" + row[0] + "'");
        }
        if (!seen.insert(m.validator_id).second)
            throw ConfigError("mapping csv line " + std::to_string(line) + ": duplicate validator_id " +
                              std::to_string(m.validator_id));
        m.prefix = row[1];
        m.asn = row[2];
        m.rpki = row[3];
        if (!m.rpki.empty()) rpki_from_string(m.rpki);  // validate early
        m.country = row[4];
        out.rows.push_back(std::move(m));
    }
    return out;
}

void write_mapping_csv(const std::string& path, const MappingTable& table) {
    csv::Table t;
    t.header = {"validator_id", "prefix", "asn", "rpki_status", "country"};
    t.rows.reserve(table.rows.size());
    for (const auto& r : table.rows)
        t.rows.push_back({std::to_string(r.validator_id), r.prefix, r.asn, r.rpki, r.country});
    csv::write_file(path, t);
}

MappingTable export_mapping(const Topology& topo) {
    MappingTable out;
    out.rows.reserve(topo.validator_prefix.size());
    for (std::size_t v = 0; v < topo.validator_prefix.size(); ++v) {
        const Prefix& p = topo.prefixes[topo.validator_prefix[v]];
        MappingRow r;
        r.validator_id = static_cast<std::int64_t>(v);
        r.prefix = p.cidr;
        r.asn = "AS" + std::to_string(p.origin_asn);
        r.rpki = to_string(p.rpki);
        r.country = p.country;
        out.rows.push_back(std::move(r));
    }
    return out;
}

RpkiShares rpki_exposure(const Topology& topo) {
    RpkiShares s;
    if (topo.nodes.empty()) return s;
    for (const auto& node : topo.nodes) {
        switch (topo.prefixes[node.prefix_id].rpki) {
            case RpkiStatus::Valid: s.valid += 1; break;
            case RpkiStatus::PermissiveMaxlength: s.permissive_maxlength += 1; break;
            case RpkiStatus::NoRoa: s.no_roa += 1; break;
        }
    }
    const double n = static_cast<double>(topo.nodes.size());
    s.valid /= n;
    s.permissive_maxlength /= n;
    s.no_roa /= n;
    return s;
}

RpkiShares rpki_exposure(const MappingTable& table) {
    RpkiShares s;
    if (table.rows.empty()) throw ConfigError("rpki exposure over an empty mapping");
    for (const auto& r : table.rows) {
        switch (rpki_from_string(r.rpki)) {
            case RpkiStatus::Valid: s.valid += 1; break;
            case RpkiStatus::PermissiveMaxlength: s.permissive_maxlength += 1; break;
            case RpkiStatus::NoRoa: s.no_roa += 1; break;
        }
    }
    const double n = static_cast<double>(table.rows.size());
    s.valid /= n;
    s.permissive_maxlength /= n;
    s.no_roa /= n;
    return s;
}

TopologyConfig devnet_config(std::int64_t node_count, std::int64_t validators) {
    TopologyConfig c;
    c.as_count = node_count;
    c.graph = "full_mesh";
    c.inter_as_latency_min_ms = 10.0;
    c.inter_as_latency_max_ms = 30.0;
    c.prefixes_per_as = 1;
    c.nodes_per_prefix = 1;
    c.validators = validators;
    c.subscribe_all_threshold = 1;  // devnet runs full nodes on every topic
    c.placement.kind = "table";
    if (node_count == 20 && validators == 1008) {
        c.placement.counts = {160, 110, 103, 52, 48, 45, 43, 41, 39, 38,
                              37,  36,  35,  34, 33, 32, 31, 31, 30, 30};
    } else {
        c.placement.kind = "uniform";
    }
    return c;
}

TopologyConfig inference_default_config() {
    TopologyConfig c;
    c.as_count = 100;
    c.graph = "full_mesh";
    c.inter_as_latency_min_ms = 15.0;
    c.inter_as_latency_max_ms = 30.0;
    c.access_latency_min_ms = 0.5;
    c.access_latency_max_ms = 2.0;
    c.prefixes_per_as = 30;
    c.nodes_per_prefix = 1;
    c.validators = 4000;
    c.mesh_degree = 8;
    c.jitter_mean_ms = 10.0;
    c.persistent_topics_per_node = 2;
    c.placement.kind = "operator_blocks";
    c.placement.operator_count = 150;
    c.placement.block_min = 12;
    c.placement.block_max = 20;
    c.placement.solo_fraction = 0.4;
    c.placement.multi_as_operators = 3;
    return c;
}

std::vector<std::int64_t> paper_shaped_prefix_counts() {
    // Calibrated heavy tail: 1,063,660 validators over 4,600 prefixes.
    // Head holds a third of the stake in 29 prefixes, ~59% within 100.
    constexpr std::int64_t kTotal = 1'063'660;
    std::vector<std::int64_t> c;
    c.reserve(4600);
    c.push_back(37'000);
    for (int i = 1; i <= 27; ++i) c.push_back(12'400 - (1'300 * (i - 1)) / 26);
    c.push_back(11'000);
    c.push_back(10'900);
    for (int i = 0; i < 70; ++i) c.push_back(6'000 - (4'900 * i) / 69);
    std::int64_t used = std::accumulate(c.begin(), c.end(), std::int64_t{0});
    std::int64_t remaining = kTotal - used;

    const std::size_t tail_len = 4600 - c.size();
    std::vector<std::int64_t> tail(tail_len);
    double a = 1'050.0, r = 0.99760;
    double value = a;
    std::int64_t tail_sum = 0;
    for (std::size_t i = 0; i < tail_len; ++i) {
        tail[i] = std::max<std::int64_t>(1, static_cast<std::int64_t>(value));
        tail_sum += tail[i];
        value *= r;
    }
    // Normalize the tail to the exact remainder, preserving monotonicity.
    std::int64_t diff = remaining - tail_sum;
    while (diff != 0) {
        for (std::size_t i = 0; i < tail_len && diff != 0; ++i) {
            std::int64_t cap = (i == 0) ? c.back() : tail[i - 1];
            if (diff > 0 && tail[i] < cap) {
                tail[i]++;
                diff--;
            } else if (diff < 0) {
                std::size_t j = tail_len - 1 - i;
                if (tail[j] > 1 && (j == tail_len - 1 || tail[j] > tail[j + 1])) {
                    tail[j]--;
                    diff++;
                }
            }
        }
    }
    c.insert(c.end(), tail.begin(), tail.end());
    return c;
}

Topology make_paper_shaped_topology(std::uint64_t seed) {
    const std::vector<std::int64_t> counts = paper_shaped_prefix_counts();
    const std::int64_t total =
        std::accumulate(counts.begin(), counts.end(), std::int64_t{0});

    TopologyConfig cfg;
    cfg.as_count = 1'057;
    cfg.prefixes_per_as = 0;  // custom assignment below
    cfg.nodes_per_prefix = 1;
    cfg.validators = total;
    cfg.build_latencies = false;
    cfg.placement.kind = "paper_shaped";

    Topology topo;
    topo.config = cfg;
    topo.seed = seed;
    Rng rng = Rng::derive(seed, "paper-shaped");

    topo.ases.resize(cfg.as_count);
    for (std::int64_t i = 0; i < cfg.as_count; ++i) {
        topo.ases[i].asn = static_cast<Asn>(i);
        topo.ases[i].name = "as-" + std::to_string(i);
    }

    // AS concentration targets: one dominant host, two more past the 50%
    // line together, a block of mid-size clouds, then a long tail.
    std::vector<double> as_share(cfg.as_count, 0.0);
    as_share[0] = 0.27;
    as_share[1] = 0.14;
    as_share[2] = 0.11;
    for (int i = 3; i < 20; ++i) as_share[i] = 0.024;
    const double tail_share = 1.0 - 0.27 - 0.14 - 0.11 - 17 * 0.024;
    for (std::int64_t i = 20; i < cfg.as_count; ++i)
        as_share[i] = tail_share / static_cast<double>(cfg.as_count - 20);

    std::vector<double> as_deficit(cfg.as_count);
    for (std::int64_t i = 0; i < cfg.as_count; ++i) as_deficit[i] = as_share[i] * static_cast<double>(total);

    // Country targets: one dominant country, eleven mid-size, small tail.
    const std::vector<std::string> countries = {
        "US", "DE", "FI", "FR", "NL", "GB", "CA", "SG", "JP", "AU", "KR", "IE",
        "CH", "SE", "NO", "PL", "ES", "IT", "BR", "IN", "HK", "AT", "BE", "CZ"};
    std::vector<double> country_deficit(countries.size());
    country_deficit[0] = 0.37 * total;
    for (std::size_t i = 1; i < 12; ++i) country_deficit[i] = (0.53 / 11.0) * total;
    for (std::size_t i = 12; i < countries.size(); ++i)
        country_deficit[i] = (0.10 / static_cast<double>(countries.size() - 12)) * total;

    topo.prefixes.resize(counts.size());
    topo.prefix_nodes.resize(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
        Prefix& p = topo.prefixes[i];
        p.prefix_id = static_cast<PrefixId>(i);
        std::size_t best_as = 0;
        for (std::size_t a = 1; a < as_deficit.size(); ++a)
            if (as_deficit[a] > as_deficit[best_as]) best_as = a;
        p.origin_asn = static_cast<Asn>(best_as);
        as_deficit[best_as] -= static_cast<double>(counts[i]);
        std::size_t best_c = 0;
        for (std::size_t cidx = 1; cidx < country_deficit.size(); ++cidx)
            if (country_deficit[cidx] > country_deficit[best_c]) best_c = cidx;
        p.country = countries[best_c];
        country_deficit[best_c] -= static_cast<double>(counts[i]);
        p.length = static_cast<int>(rng.uniform_int(20, 24));
        p.cidr = cidr_name(p.prefix_id, p.length);

        NetNode node;
        node.node_id = static_cast<NodeId>(i);
        node.prefix_id = p.prefix_id;
        topo.prefix_nodes[i].push_back(node.node_id);
        topo.nodes.push_back(std::move(node));
    }
    assign_rpki(topo.prefixes, cfg, rng);

    topo.validator_prefix.reserve(total);
    for (std::size_t p = 0; p < counts.size(); ++p)
        for (std::int64_t k = 0; k < counts[p]; ++k)
            topo.validator_prefix.push_back(static_cast<PrefixId>(p));
    rng.shuffle(topo.validator_prefix);

    topo.validator_node.resize(total);
    topo.validator_cluster.resize(total);
    for (std::int64_t v = 0; v < total; ++v) {
        NodeId n = topo.prefix_nodes[topo.validator_prefix[v]][0];
        topo.validator_node[v] = n;
        topo.nodes[n].hosted_validators.push_back(static_cast<ValidatorId>(v));
        topo.validator_cluster[v] = static_cast<std::uint32_t>(v);
    }
    for (auto& node : topo.nodes)
        node.all_topics = static_cast<std::int64_t>(node.hosted_validators.size()) >= cfg.subscribe_all_threshold;
    return topo;
}

}  // namespace stakesim::topo
