#include "stakesim/gossip.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>
#include <tuple>

namespace stakesim::gossip {

std::string to_string(Channel c) {
    switch (c) {
        case Channel::MeshEager: return "mesh_eager";
        case Channel::Fanout: return "fanout";
        case Channel::IhaveThenPull: return "ihave_then_pull";
    }
    return "mesh_eager";
}

std::string to_string(CountermeasureMode m) {
    switch (m) {
        case CountermeasureMode::None: return "none";
        case CountermeasureMode::AddLatency: return "add_latency";
        case CountermeasureMode::DisableEagerOos: return "disable_eager_oos";
        case CountermeasureMode::ProxyBroadcast: return "proxy_broadcast";
    }
    return "none";
}

CountermeasureMode countermeasure_from_string(const std::string& s) {
    if (s == "none") return CountermeasureMode::None;
    if (s == "add_latency") return CountermeasureMode::AddLatency;
    if (s == "disable_eager_oos") return CountermeasureMode::DisableEagerOos;
    if (s == "proxy_broadcast") return CountermeasureMode::ProxyBroadcast;
    throw ConfigError("unknown countermeasure mode: " + s);
}

GossipParams GossipParams::from_json(const nlohmann::json& j) {
    GossipParams p;
    p.heartbeat_interval_ms = j.value("heartbeat_interval_ms", p.heartbeat_interval_ms);
    p.fanout_size = j.value("fanout_size", p.fanout_size);
    p.gossip_lazy = j.value("gossip_lazy", p.gossip_lazy);
    p.pull_rtt_ms = j.value("pull_rtt_ms", p.pull_rtt_ms);
    p.peer_degree = j.value("peer_degree", p.peer_degree);
    p.observer_mesh_cap = j.value("observer_mesh_cap", p.observer_mesh_cap);
    if (j.contains("observer_node") && !j.at("observer_node").is_null())
        p.observer_node = j.at("observer_node").get<NodeId>();
    return p;
}

nlohmann::json GossipParams::to_json() const {
    nlohmann::json j;
    j["heartbeat_interval_ms"] = heartbeat_interval_ms;
    j["fanout_size"] = fanout_size;
    j["gossip_lazy"] = gossip_lazy;
    j["pull_rtt_ms"] = pull_rtt_ms;
    j["peer_degree"] = peer_degree;
    j["observer_mesh_cap"] = observer_mesh_cap;
    if (observer_node)
        j["observer_node"] = *observer_node;
    else
        j["observer_node"] = nullptr;
    return j;
}

Millis next_heartbeat(Millis t, double interval_ms) {
    if (interval_ms <= 0) throw ConfigError("heartbeat interval must be positive");
    double k = std::ceil(t / interval_ms);
    return k * interval_ms;
}

Mesh::Mesh(const topo::Topology& topo, const GossipParams& params, std::uint64_t seed)
    : topo_(&topo), params_(params) {
    const std::size_t n = topo.nodes.size();
    const int topics = topo.config.topic_count;
    Rng rng = Rng::derive(seed, "mesh");

    // Flat connection graph used for fanout and IHAVE targeting.
    std::vector<std::set<NodeId>> peer_sets(n);
    for (std::size_t u = 0; u < n; ++u) {
        int want = std::min<int>(params.peer_degree, static_cast<int>(n) - 1);
        while (static_cast<int>(peer_sets[u].size()) < want) {
            NodeId v = static_cast<NodeId>(rng.uniform_below(n));
            if (v == u) continue;
            peer_sets[u].insert(v);
            peer_sets[v].insert(static_cast<NodeId>(u));
        }
    }
    if (params.observer_node) {
        NodeId obs = *params.observer_node;
        for (std::size_t u = 0; u < n; ++u) {
            if (u == obs) continue;
            peer_sets[u].insert(obs);
            peer_sets[obs].insert(static_cast<NodeId>(u));
        }
    }
    peers_.resize(n);
    for (std::size_t u = 0; u < n; ++u) peers_[u].assign(peer_sets[u].begin(), peer_sets[u].end());

    members_.resize(topics);
    observer_sources_.resize(topics);
    mesh_adj_.resize(topics);
    member_index_.assign(topics, std::vector<std::int32_t>(n, -1));

    for (int t = 0; t < topics; ++t) {
        for (std::size_t u = 0; u < n; ++u) {
            if (params.observer_node && static_cast<NodeId>(u) == *params.observer_node) continue;
            const auto& node = topo.nodes[u];
            bool sub = node.all_topics ||
                       std::find(node.persistent_topics.begin(), node.persistent_topics.end(),
                                 static_cast<std::uint16_t>(t)) != node.persistent_topics.end();
            if (sub) {
                member_index_[t][u] = static_cast<std::int32_t>(members_[t].size());
                members_[t].push_back(static_cast<NodeId>(u));
            }
        }
        const auto& mem = members_[t];
        const std::size_t m = mem.size();
        mesh_adj_[t].assign(m, {});
        if (m > 1) {
            const int degree = topo.config.mesh_degree;
            std::vector<std::size_t> order(m);
            for (std::size_t i = 0; i < m; ++i) order[i] = i;
            rng.shuffle(order);
            std::vector<std::set<std::size_t>> adj(m);
            if (static_cast<int>(m) <= degree + 1) {
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = i + 1; j < m; ++j) {
                        adj[i].insert(j);
                        adj[j].insert(i);
                    }
            } else {
                for (std::size_t i = 0; i < m; ++i) {  // backbone ring keeps the mesh connected
                    std::size_t a = order[i], b = order[(i + 1) % m];
                    adj[a].insert(b);
                    adj[b].insert(a);
                }
                for (std::size_t i = 0; i < m; ++i) {
                    int extra = std::max(0, degree - 2);
                    for (int k = 0; k < extra; ++k) {
                        std::size_t j = rng.uniform_below(m);
                        if (j == i) continue;
                        adj[i].insert(j);
                        adj[j].insert(i);
                    }
                }
            }
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j : adj[i]) mesh_adj_[t][i].push_back(mem[j]);
        }
        if (params.observer_node && !mem.empty()) {
            std::vector<NodeId> pool = mem;
            rng.shuffle(pool);
            std::size_t take = std::min<std::size_t>(pool.size(), params.observer_mesh_cap);
            observer_sources_[t].assign(pool.begin(), pool.begin() + take);
            std::sort(observer_sources_[t].begin(), observer_sources_[t].end());
        }
    }
}

bool Mesh::subscribed(NodeId node, int topic) const {
    if (params_.observer_node && node == *params_.observer_node) return true;  // grafts everything
    return member_index_[topic][node] >= 0;
}

const std::vector<NodeId>& Mesh::mesh_neighbors(int topic, NodeId n) const {
    std::int32_t idx = member_index_[topic][n];
    if (idx < 0) return empty_;
    return mesh_adj_[topic][idx];
}

namespace {

struct Arrival {
    Millis t;
    NodeId to;
    NodeId from;
    Channel channel;
    bool sender_subscribed;
    bool operator>(const Arrival& o) const {
        if (t != o.t) return t > o.t;
        if (to != o.to) return to > o.to;
        return from > o.from;
    }
};

}  // namespace

PropagationResult propagate(const GossipMessage& msg, const topo::Topology& topo, const Mesh& mesh,
                            const topo::ConnectivityOracle& oracle, std::uint64_t trace_seed) {
    const auto& params = mesh.params();
    const std::size_t n = topo.nodes.size();
    Rng rng = Rng::derive(trace_seed, "propagate", msg.message_id);

    PropagationResult out;
    out.first_arrival.assign(n, kNever);
    out.first_arrival[msg.origin_node] = msg.origin_ts;

    const int topic = msg.topic_id;
    const std::optional<NodeId> obs = params.observer_node;

    std::priority_queue<Arrival, std::vector<Arrival>, std::greater<>> pq;
    auto push = [&](NodeId from, NodeId to, Millis t_send, Channel ch, bool sender_sub) {
        if (to == from) return;
        if (!oracle.reachable(from, to, msg.slot)) return;
        double rx = t_send + topo::path_latency(topo, from, to, rng);
        pq.push({rx, to, from, ch, sender_sub});
    };

    auto observer_sourced = [&](NodeId u) {
        if (!obs) return false;
        const auto& src = mesh.observer_sources(topic);
        return std::binary_search(src.begin(), src.end(), u);
    };

    const bool origin_subscribed = mesh.subscribed(msg.origin_node, topic);

    if (origin_subscribed) {
        for (NodeId w : mesh.mesh_neighbors(topic, msg.origin_node))
            push(msg.origin_node, w, msg.origin_ts, Channel::MeshEager, true);
        if (obs && observer_sourced(msg.origin_node))
            push(msg.origin_node, *obs, msg.origin_ts, Channel::MeshEager, true);
    } else {
        // Unsubscribed publisher: eager push to a fanout set drawn from peers
        // subscribed to the topic. The observer subscribes to everything, so
        // it is always a candidate.
        std::vector<NodeId> cands;
        for (NodeId w : mesh.peers(msg.origin_node)) {
            if (obs && w == *obs) continue;
            if (mesh.subscribed(w, topic)) cands.push_back(w);
        }
        if (obs && msg.origin_node != *obs) cands.push_back(*obs);
        rng.shuffle(cands);
        std::size_t take = std::min<std::size_t>(cands.size(), params.fanout_size);
        for (std::size_t i = 0; i < take; ++i)
            push(msg.origin_node, cands[i], msg.origin_ts, Channel::Fanout, false);
    }

    std::vector<DeliveryRecord> records;
    while (!pq.empty()) {
        Arrival a = pq.top();
        pq.pop();
        DeliveryRecord rec;
        rec.message_id = msg.message_id;
        rec.validator_id = msg.validator_id;
        rec.receiver_node = a.to;
        rec.sender_node = a.from;
        rec.rx_ts = a.t;
        rec.channel = a.channel;
        rec.sender_subscribed = a.sender_subscribed;
        rec.slot = msg.slot;
        rec.origin_ts = msg.origin_ts;
        rec.origin_node = msg.origin_node;
        rec.topic_id = msg.topic_id;
        records.push_back(rec);

        if (a.t < out.first_arrival[a.to]) {
            out.first_arrival[a.to] = a.t;
            const bool is_observer = obs && a.to == *obs;
            if (!is_observer) {  // the observer never forwards
                for (NodeId w : mesh.mesh_neighbors(topic, a.to))
                    if (w != a.from) push(a.to, w, a.t, Channel::MeshEager, true);
                if (obs && observer_sourced(a.to)) push(a.to, *obs, a.t, Channel::MeshEager, true);
            }
        }
    }

    // Lazy gossip: reached members advertise at the next heartbeat to
    // non-mesh subscribed peers; targets that have not seen the message pull
    // it one RTT later.
    if (params.gossip_lazy > 0) {
        std::vector<double> advert_arrival(n, kNever);
        std::vector<NodeId> advert_from(n, 0);
        for (NodeId u : mesh.members(topic)) {
            if (out.first_arrival[u] == kNever) continue;
            Millis boundary = next_heartbeat(out.first_arrival[u], params.heartbeat_interval_ms);
            std::vector<NodeId> cands;
            const auto& neigh = mesh.mesh_neighbors(topic, u);
            for (NodeId w : mesh.peers(u)) {
                if (obs && w == *obs) {
                    if (!observer_sourced(u)) cands.push_back(w);
                    continue;
                }
                if (!mesh.subscribed(w, topic)) continue;
                if (std::find(neigh.begin(), neigh.end(), w) != neigh.end()) continue;
                cands.push_back(w);
            }
            rng.shuffle(cands);
            std::size_t take = std::min<std::size_t>(cands.size(), params.gossip_lazy);
            for (std::size_t i = 0; i < take; ++i) {
                NodeId w = cands[i];
                if (!oracle.reachable(u, w, msg.slot)) continue;
                double t = boundary + topo.base_latency(u, w);
                if (t < advert_arrival[w]) {
                    advert_arrival[w] = t;
                    advert_from[w] = u;
                }
            }
        }
        for (auto& rec : records)
            if (advert_arrival[rec.receiver_node] <= rec.rx_ts) rec.previously_advertised = true;
        for (std::size_t w = 0; w < n; ++w) {
            if (advert_arrival[w] == kNever) continue;
            if (out.first_arrival[w] <= advert_arrival[w]) continue;
            DeliveryRecord rec;
            rec.message_id = msg.message_id;
            rec.validator_id = msg.validator_id;
            rec.receiver_node = static_cast<NodeId>(w);
            rec.sender_node = advert_from[w];
            rec.rx_ts = advert_arrival[w] + params.pull_rtt_ms;
            rec.channel = Channel::IhaveThenPull;
            rec.sender_subscribed = true;
            rec.previously_advertised = true;
            rec.slot = msg.slot;
            rec.origin_ts = msg.origin_ts;
            rec.origin_node = msg.origin_node;
            rec.topic_id = msg.topic_id;
            out.first_arrival[w] = rec.rx_ts;
            records.push_back(rec);
        }
    }

    if (params.record_scope == RecordScope::None) {
        out.records.clear();
    } else if (params.record_scope == RecordScope::ObserverOnly && obs) {
        for (auto& r : records)
            if (r.receiver_node == *obs) out.records.push_back(std::move(r));
    } else {
        out.records = std::move(records);
    }
    return out;
}

std::vector<DeliveryRecord> countermeasure_transform(std::vector<DeliveryRecord> records,
                                                     const Countermeasure& cm, const GossipParams& params,
                                                     std::int64_t node_count, std::uint64_t seed) {
    switch (cm.mode) {
        case CountermeasureMode::None:
            return records;
        case CountermeasureMode::AddLatency: {
            if (cm.mean_ms <= 0) throw ConfigError("add_latency needs a positive mean");
            for (auto& r : records) {
                Rng rng = Rng::derive(seed, "cm-latency", r.message_id);
                r.rx_ts += rng.exponential(cm.mean_ms);  // same draw for the whole message
            }
            return records;
        }
        case CountermeasureMode::DisableEagerOos: {
            std::vector<DeliveryRecord> out;
            out.reserve(records.size());
            for (auto& r : records) {
                if (r.channel == Channel::Fanout && !r.sender_subscribed) continue;  // OOS removed
                if (r.channel != Channel::IhaveThenPull) {
                    r.channel = Channel::IhaveThenPull;
                    r.rx_ts = next_heartbeat(r.rx_ts, params.heartbeat_interval_ms) + params.pull_rtt_ms;
                    r.previously_advertised = true;
                }
                out.push_back(std::move(r));
            }
            return out;
        }
        case CountermeasureMode::ProxyBroadcast: {
            if (node_count <= 0) throw ConfigError("proxy_broadcast needs the node count");
            for (auto& r : records) {
                Rng rng = Rng::derive(seed, "cm-proxy", r.message_id);
                r.origin_node = static_cast<NodeId>(rng.uniform_below(node_count));
            }
            return records;
        }
    }
    return records;
}

}  // namespace stakesim::gossip
