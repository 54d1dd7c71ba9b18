#pragma once

#include <bit>
#include <string>
#include <utility>
#include <vector>

#include "kmorse/ground.hpp"
#include "kmorse/simplex.hpp"

namespace kmorse {

// An immutable graph on a subset of the pair universe.  Adjacency is stored
// as one neighbor mask per vertex id, so common-neighbor queries are AND
// chains.  Construction is the only mutation point.
struct Graph {
    GroundParam param;
    VertexTablePtr table;
    face_t vertices = 0;           // vertex ids present in the graph
    std::vector<face_t> adj;       // adj[id] = neighbor mask (0 if absent)
    std::string family;

    std::size_t num_vertices() const { return std::size_t(std::popcount(vertices)); }

    std::size_t num_edges() const {
        std::size_t twice = 0;
        for (face_t m : adj) twice += std::size_t(std::popcount(m));
        return twice / 2;
    }

    bool has_vertex(const Vertex& v) const {
        return (vertices >> table->id(v)) & 1;
    }

    bool adjacent(const Vertex& u, const Vertex& v) const {
        return (adj[table->id(u)] >> table->id(v)) & 1;
    }

    face_t neighbors(std::size_t id) const { return adj[id]; }

    // Edges as (u,v) id pairs with u < v, in deterministic order.
    std::vector<std::pair<std::size_t, std::size_t>> edges() const {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (std::size_t u = 0; u < adj.size(); ++u) {
            face_t m = adj[u] >> (u + 1) << (u + 1);
            while (m) {
                out.emplace_back(u, std::size_t(std::countr_zero(m)));
                m &= m - 1;
            }
        }
        return out;
    }
};

namespace detail {

inline bool pairs_disjoint(const Vertex& a, const Vertex& b) {
    return a.i != b.i && a.i != b.j && a.j != b.i && a.j != b.j;
}

inline Graph build_graph(GroundParam p, VertexTablePtr table, face_t verts,
                         std::string family,
                         bool (*keep_edge)(const Vertex&, const Vertex&, const GroundParam&)) {
    Graph g;
    g.param = p;
    g.table = std::move(table);
    g.vertices = verts;
    g.family = std::move(family);
    g.adj.assign(g.table->size(), 0);
    const auto& vs = g.table->vertices();
    for (std::size_t u = 0; u < vs.size(); ++u) {
        if (!((verts >> u) & 1)) continue;
        for (std::size_t v = u + 1; v < vs.size(); ++v) {
            if (!((verts >> v) & 1)) continue;
            if (!pairs_disjoint(vs[u], vs[v])) continue;
            if (!keep_edge(vs[u], vs[v], p)) continue;
            g.adj[u] |= face_t(1) << v;
            g.adj[v] |= face_t(1) << u;
        }
    }
    return g;
}

} // namespace detail

// Kneser graph KG_{2,k}: all pairs, edges between disjoint pairs.
inline Graph kneser_graph(GroundParam p, VertexTablePtr table = nullptr) {
    if (!table) table = make_vertex_table(p);
    const face_t all = table->size() == 64 ? ~face_t(0)
                                           : (face_t(1) << table->size()) - 1;
    return detail::build_graph(p, std::move(table), all, "kneser",
                               [](const Vertex&, const Vertex&, const GroundParam&) { return true; });
}

// Stable Kneser graph SG_{2,k}: the induced subgraph on stable vertices.
inline Graph stable_kneser_graph(GroundParam p, VertexTablePtr table = nullptr) {
    if (!table) table = make_vertex_table(p);
    face_t verts = 0;
    for (std::size_t id = 0; id < table->size(); ++id)
        if (is_stable(table->vertex(id), p)) verts |= face_t(1) << id;
    return detail::build_graph(p, std::move(table), verts, "stable",
                               [](const Vertex&, const Vertex&, const GroundParam&) { return true; });
}

// S_{2,k}: all pairs, keeping the Kneser edges with at least one stable
// endpoint.
inline Graph s_graph(GroundParam p, VertexTablePtr table = nullptr) {
    if (!table) table = make_vertex_table(p);
    const face_t all = table->size() == 64 ? ~face_t(0)
                                           : (face_t(1) << table->size()) - 1;
    return detail::build_graph(p, std::move(table), all, "s",
                               [](const Vertex& a, const Vertex& b, const GroundParam& p_) {
                                   return is_stable(a, p_) || is_stable(b, p_);
                               });
}

// Delete a set of vertices (with their incident edges).
inline Graph remove_vertices(const Graph& g, const std::vector<Vertex>& doomed) {
    Graph out = g;
    face_t kill = 0;
    for (const Vertex& v : doomed) kill |= face_t(1) << g.table->id(v);
    out.vertices &= ~kill;
    for (std::size_t id = 0; id < out.adj.size(); ++id)
        out.adj[id] = ((kill >> id) & 1) ? 0 : (out.adj[id] & ~kill);
    if (kill) out.family += "-minus";
    return out;
}

// N(A): vertices adjacent to every member of A.  N(empty) is all vertices.
inline face_t common_neighbors(const Graph& g, face_t members) {
    if ((members & ~g.vertices) != 0)
        throw domain_error("common_neighbors: face uses a vertex not in the graph");
    face_t acc = g.vertices;
    while (members) {
        acc &= g.adj[std::size_t(std::countr_zero(members))];
        members &= members - 1;
    }
    return acc;
}

} // namespace kmorse
