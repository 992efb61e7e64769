#pragma once

// Street network used for sinuosity sampling: nodes are street corners,
// edges carry precomputed lengths. Immutable after construction, so a single
// instance can be shared by parallel workers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "busghg/csv.hpp"
#include "busghg/error.hpp"
#include "busghg/geo.hpp"

namespace busghg {

using NodeId = std::int64_t;

struct Edge {
    NodeId a = 0;
    NodeId b = 0;
    double length_m = 0.0;
    bool oneway = false;  ///< traversable a -> b only
};

struct PathResult {
    NodeId origin = 0;
    NodeId destination = 0;
    double distance_m = 0.0;
    bool reachable = false;
};

class StreetGraph {
public:
    /// Ratio below which an edge is considered shorter than the straight line
    /// between its endpoints (a corrupt length).
    static constexpr double kMinLengthRatio = 0.99;

    StreetGraph(std::vector<std::pair<NodeId, GeoPoint>> nodes, std::vector<Edge> edges)
        : edges_(std::move(edges)) {
        std::sort(nodes.begin(), nodes.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
        ids_.reserve(nodes.size());
        positions_.reserve(nodes.size());
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (i > 0 && nodes[i].first == nodes[i - 1].first) {
                throw DataError("street graph: duplicate node id " + std::to_string(nodes[i].first));
            }
            if (!is_valid(nodes[i].second)) {
                throw DataError("street graph: node " + std::to_string(nodes[i].first) + " has invalid coordinates");
            }
            index_.emplace(nodes[i].first, static_cast<std::uint32_t>(i));
            ids_.push_back(nodes[i].first);
            positions_.push_back(nodes[i].second);
        }
        build_adjacency();
        build_spatial_index();
    }

    static StreetGraph load_csv(const std::string& nodes_path, const std::string& edges_path) {
        const auto nt = csv::read_table_file(nodes_path, {"node_id", "lat", "lon"});
        std::vector<std::pair<NodeId, GeoPoint>> nodes;
        nodes.reserve(nt.rows.size());
        for (std::size_t r = 0; r < nt.rows.size(); ++r) {
            nodes.emplace_back(csv::require_int(nt, r, 0, nodes_path),
                               GeoPoint{csv::require_double(nt, r, 1, nodes_path),
                                        csv::require_double(nt, r, 2, nodes_path)});
        }
        const auto et = csv::read_table_file(edges_path, {"node_a", "node_b", "length_m", "oneway"});
        std::vector<Edge> edges;
        edges.reserve(et.rows.size());
        for (std::size_t r = 0; r < et.rows.size(); ++r) {
            const auto oneway = csv::require_int(et, r, 3, edges_path);
            if (oneway != 0 && oneway != 1) {
                throw DataError(edges_path + ":" + std::to_string(et.line_numbers[r]) + ": oneway must be 0 or 1");
            }
            edges.push_back(Edge{csv::require_int(et, r, 0, edges_path), csv::require_int(et, r, 1, edges_path),
                                 csv::require_double(et, r, 2, edges_path), oneway == 1});
        }
        return StreetGraph(std::move(nodes), std::move(edges));
    }

    /// Loads a GeoJSON FeatureCollection of LineString / MultiLineString
    /// features. Each line's two endpoints become nodes (identical coordinates
    /// share a node; ids are assigned 0, 1, ... in order of first appearance);
    /// interior coordinates are shape points. The edge length is the sum of
    /// haversine distances over consecutive coordinates, accumulated in order.
    /// A feature property "oneway" equal to true or 1 makes the edge directed.
    static StreetGraph load_geojson(const std::string& path) {
        std::ifstream in(path);
        if (!in) {
            throw DataError("cannot open " + path);
        }
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ": invalid GeoJSON: " + e.what());
        }
        std::map<std::pair<double, double>, NodeId> by_coord;
        std::vector<std::pair<NodeId, GeoPoint>> nodes;
        std::vector<Edge> edges;
        auto node_for = [&](const GeoPoint& p) {
            const auto key = std::make_pair(p.lat, p.lon);
            const auto it = by_coord.find(key);
            if (it != by_coord.end()) {
                return it->second;
            }
            const NodeId id = static_cast<NodeId>(nodes.size());
            by_coord.emplace(key, id);
            nodes.emplace_back(id, p);
            return id;
        };
        auto add_line = [&](const nlohmann::json& coords, bool oneway) {
            if (!coords.is_array() || coords.size() < 2) {
                throw DataError(path + ": LineString needs at least two coordinates");
            }
            std::vector<GeoPoint> pts;
            for (const auto& c : coords) {
                if (!c.is_array() || c.size() < 2) {
                    throw DataError(path + ": malformed coordinate");
                }
                pts.push_back(GeoPoint{c[1].get<double>(), c[0].get<double>()});  // GeoJSON is [lon, lat]
            }
            double length = 0.0;
            for (std::size_t i = 1; i < pts.size(); ++i) {
                length += haversine_distance(pts[i - 1], pts[i]);
            }
            const NodeId a = node_for(pts.front());
            const NodeId b = node_for(pts.back());
            edges.push_back(Edge{a, b, length, oneway});
        };
        try {
            for (const auto& f : doc.at("features")) {
                const auto& g = f.at("geometry");
                bool oneway = false;
                if (f.contains("properties") && f["properties"].is_object() && f["properties"].contains("oneway")) {
                    const auto& o = f["properties"]["oneway"];
                    oneway = o.is_boolean() ? o.get<bool>() : (o.is_number() && o.get<double>() == 1.0);
                }
                const auto type = g.at("type").get<std::string>();
                if (type == "LineString") {
                    add_line(g.at("coordinates"), oneway);
                } else if (type == "MultiLineString") {
                    for (const auto& part : g.at("coordinates")) {
                        add_line(part, oneway);
                    }
                } else {
                    throw DataError(path + ": unsupported geometry type " + type);
                }
            }
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ": " + e.what());
        }
        return StreetGraph(std::move(nodes), std::move(edges));
    }

    std::size_t node_count() const { return ids_.size(); }
    std::size_t edge_count() const { return edges_.size(); }
    std::span<const Edge> edges() const { return edges_; }
    std::span<const NodeId> node_ids() const { return ids_; }

    bool contains(NodeId id) const { return index_.contains(id); }

    const GeoPoint& position(NodeId id) const { return positions_[index_of(id)]; }

    /// Node closest to `p` (haversine) within `max_radius_m`, ties going to
    /// the smallest id.
    std::optional<NodeId> snap(const GeoPoint& p, double max_radius_m) const {
        if (ids_.empty() || !(max_radius_m >= 0.0)) {
            return std::nullopt;
        }
        std::optional<std::uint32_t> best;
        double best_d = std::numeric_limits<double>::infinity();
        auto consider = [&](std::uint32_t i) {
            const double d = haversine_distance(p, positions_[i]);
            if (d > max_radius_m) {
                return;
            }
            if (d < best_d || (d == best_d && ids_[i] < ids_[*best])) {
                best_d = d;
                best = i;
            }
        };

        // Conservative degree window around p that contains the whole
        // spherical cap of radius max_radius_m.
        const double ang = max_radius_m / kEarthRadiusM;
        const double dlat = ang * 180.0 / std::numbers::pi;
        const double cos_lat = std::cos(deg2rad(p.lat));
        const double s = std::sin(std::min(ang, std::numbers::pi / 2));
        const bool full_lon = ang >= std::numbers::pi / 2 || s >= cos_lat;
        const double dlon = full_lon ? 360.0 : std::asin(s / cos_lat) * 180.0 / std::numbers::pi;
        const auto r0 = cell_coord(p.lat - dlat);
        const auto r1 = cell_coord(p.lat + dlat);
        const auto c0 = cell_coord(p.lon - dlon);
        const auto c1 = cell_coord(p.lon + dlon);
        const double cells = static_cast<double>(r1 - r0 + 1) * static_cast<double>(c1 - c0 + 1);
        if (full_lon || cells > static_cast<double>(ids_.size())) {
            for (std::uint32_t i = 0; i < ids_.size(); ++i) {
                consider(i);
            }
        } else {
            for (auto r = r0; r <= r1; ++r) {
                for (auto c = c0; c <= c1; ++c) {
                    const auto it = grid_.find(cell_key(r, c));
                    if (it == grid_.end()) {
                        continue;
                    }
                    for (const auto i : it->second) {
                        consider(i);
                    }
                }
            }
        }
        if (!best) {
            return std::nullopt;
        }
        return ids_[*best];
    }

    /// Uniform-cost search from origin, stopping once destination is settled.
    PathResult shortest_path(NodeId origin, NodeId destination) const {
        const auto src = index_of(origin);
        const auto dst = index_of(destination);
        PathResult result{origin, destination, 0.0, true};
        if (src == dst) {
            return result;
        }
        const auto dist = search(src, dst);
        if (std::isinf(dist[dst])) {
            result.reachable = false;
            result.distance_m = 0.0;
        } else {
            result.distance_m = dist[dst];
        }
        return result;
    }

    /// Shortest distance from origin to every node, in node_ids() order;
    /// infinity where unreachable.
    std::vector<double> distances_from(NodeId origin) const {
        return search(index_of(origin), std::numeric_limits<std::uint32_t>::max());
    }

private:
    static constexpr double kCellDeg = 0.005;

    struct Arc {
        std::uint32_t to;
        double length;
    };

    std::uint32_t index_of(NodeId id) const {
        const auto it = index_.find(id);
        if (it == index_.end()) {
            throw std::out_of_range("street graph: unknown node id " + std::to_string(id));
        }
        return it->second;
    }

    static std::int64_t cell_coord(double deg) { return static_cast<std::int64_t>(std::floor(deg / kCellDeg)); }
    static std::int64_t cell_key(std::int64_t r, std::int64_t c) { return r * 1'000'003 + c; }

    void build_adjacency() {
        std::vector<std::uint32_t> degree(ids_.size() + 1, 0);
        for (const auto& e : edges_) {
            const auto ia = index_.find(e.a);
            const auto ib = index_.find(e.b);
            if (ia == index_.end() || ib == index_.end()) {
                throw DataError("street graph: edge " + std::to_string(e.a) + "-" + std::to_string(e.b) +
                                " references an unknown node");
            }
            if (!(e.length_m > 0.0) || !std::isfinite(e.length_m)) {
                throw DataError("street graph: edge " + std::to_string(e.a) + "-" + std::to_string(e.b) +
                                " must have a positive length");
            }
            const double straight = haversine_distance(positions_[ia->second], positions_[ib->second]);
            if (e.length_m < kMinLengthRatio * straight) {
                throw DataError("street graph: edge " + std::to_string(e.a) + "-" + std::to_string(e.b) +
                                " is shorter than the straight line between its endpoints");
            }
            ++degree[ia->second + 1];
            if (!e.oneway) {
                ++degree[ib->second + 1];
            }
        }
        for (std::size_t i = 1; i < degree.size(); ++i) {
            degree[i] += degree[i - 1];
        }
        offsets_ = degree;
        arcs_.resize(offsets_.back());
        auto fill = offsets_;
        for (const auto& e : edges_) {
            const auto a = index_.at(e.a);
            const auto b = index_.at(e.b);
            arcs_[fill[a]++] = Arc{b, e.length_m};
            if (!e.oneway) {
                arcs_[fill[b]++] = Arc{a, e.length_m};
            }
        }
    }

    void build_spatial_index() {
        for (std::uint32_t i = 0; i < positions_.size(); ++i) {
            grid_[cell_key(cell_coord(positions_[i].lat), cell_coord(positions_[i].lon))].push_back(i);
        }
    }

    std::vector<double> search(std::uint32_t src, std::uint32_t stop_at) const {
        std::vector<double> dist(ids_.size(), std::numeric_limits<double>::infinity());
        using Item = std::pair<double, std::uint32_t>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
        dist[src] = 0.0;
        heap.emplace(0.0, src);
        while (!heap.empty()) {
            const auto [d, u] = heap.top();
            heap.pop();
            if (d > dist[u]) {
                continue;
            }
            if (u == stop_at) {
                break;
            }
            for (auto k = offsets_[u]; k < offsets_[u + 1]; ++k) {
                const auto& arc = arcs_[k];
                const double nd = d + arc.length;
                if (nd < dist[arc.to]) {
                    dist[arc.to] = nd;
                    heap.emplace(nd, arc.to);
                }
            }
        }
        return dist;
    }

    std::vector<Edge> edges_;
    std::unordered_map<NodeId, std::uint32_t> index_;
    std::vector<NodeId> ids_;
    std::vector<GeoPoint> positions_;
    std::vector<std::uint32_t> offsets_;
    std::vector<Arc> arcs_;
    std::unordered_map<std::int64_t, std::vector<std::uint32_t>> grid_;
};

/// Nearest node to p within max_radius_m; nullopt means "no node".
inline std::optional<NodeId> snap_to_node(const GeoPoint& p, const StreetGraph& graph, double max_radius_m) {
    return graph.snap(p, max_radius_m);
}

/// Throws std::out_of_range for unknown node ids.
inline PathResult shortest_path_distance(NodeId origin, NodeId destination, const StreetGraph& graph) {
    return graph.shortest_path(origin, destination);
}

}  // namespace busghg
