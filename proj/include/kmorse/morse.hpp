#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <queue>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "kmorse/complex.hpp"
#include "kmorse/errors.hpp"
#include "kmorse/simplex.hpp"

namespace kmorse {

// A partial matching on a face poset: pairs (d, u) with u = d plus exactly
// one vertex, each face in at most one pair.
struct Matching {
    std::vector<std::pair<face_t, face_t>> pairs;

    void add(face_t d, face_t u) { pairs.emplace_back(d, u); }

    void append(const Matching& other) {
        pairs.insert(pairs.end(), other.pairs.begin(), other.pairs.end());
    }

    std::size_t size() const { return pairs.size(); }

    void normalize() {
        std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
            if (face_less(a.first, b.first)) return true;
            if (face_less(b.first, a.first)) return false;
            return face_less(a.second, b.second);
        });
        pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    }

    // face -> (partner, face is the lower element)
    std::unordered_map<face_t, std::pair<face_t, bool>> face_map() const {
        std::unordered_map<face_t, std::pair<face_t, bool>> m;
        m.reserve(pairs.size() * 4);
        for (const auto& [d, u] : pairs) {
            if (!m.emplace(d, std::make_pair(u, true)).second)
                throw malformed_matching_error("matching: face matched twice: lower " +
                                               std::to_string(d));
            if (!m.emplace(u, std::make_pair(d, false)).second)
                throw malformed_matching_error("matching: face matched twice: upper " +
                                               std::to_string(u));
        }
        return m;
    }
};

// Outcome of verifying a matching on a face set.
struct MorseReport {
    bool acyclic = false;
    std::size_t face_count = 0;
    std::size_t pair_count = 0;
    std::vector<face_t> certificate;            // linear extension when acyclic
    std::vector<face_t> cycle;                  // a1,u(a1),a2,u(a2),... otherwise
    std::map<int, std::vector<face_t>> critical; // dim -> cells; dim -1 = empty face
    bool empty_present = false;
    bool empty_paired = false;

    std::size_t critical_count() const {
        std::size_t n = 0;
        for (const auto& [d, v] : critical) n += v.size();
        return n;
    }

    // Critical cells per dimension 0..max_dim; the empty face is reported
    // separately via empty_paired (Morse theory counts one extra 0-cell when
    // the empty face is paired).
    std::vector<std::size_t> counts_by_dim(int max_dim) const {
        std::vector<std::size_t> out(std::size_t(std::max(0, max_dim + 1)), 0);
        for (const auto& [d, v] : critical)
            if (d >= 0 && d <= max_dim) out[std::size_t(d)] = v.size();
        return out;
    }
};

namespace detail {

// Directed cycle search in one rank of the V-digraph: nodes are the matched
// lower faces of dimension d, with an edge a -> b when b lies under u(a).
// Any alternating cycle (the only kind an acyclic-matching check needs to
// exclude) shows up here.
struct RankCycle {
    bool found = false;
    std::vector<face_t> lowers; // the a_i sequence of the cycle
};

inline RankCycle find_rank_cycle(
    const std::vector<face_t>& lowers,
    const std::unordered_map<face_t, face_t>& up,
    const std::unordered_map<face_t, std::uint32_t>& lower_idx) {
    const std::size_t n = lowers.size();
    std::vector<std::vector<std::uint32_t>> adj(n);
    for (std::uint32_t a = 0; a < n; ++a) {
        const face_t u = up.at(lowers[a]);
        face_t rest = u;
        while (rest) {
            const face_t bit = rest & ~(rest - 1);
            rest &= rest - 1;
            const face_t b = u & ~bit;
            if (b == lowers[a]) continue;
            auto it = lower_idx.find(b);
            if (it != lower_idx.end()) adj[a].push_back(it->second);
        }
    }
    // Iterative DFS, colors: 0 new, 1 on stack, 2 done.
    std::vector<int> color(n, 0);
    std::vector<std::uint32_t> parent(n, 0);
    for (std::uint32_t s = 0; s < n; ++s) {
        if (color[s]) continue;
        std::vector<std::pair<std::uint32_t, std::size_t>> stack{{s, 0}};
        color[s] = 1;
        while (!stack.empty()) {
            auto& [v, ei] = stack.back();
            if (ei < adj[v].size()) {
                const std::uint32_t w = adj[v][ei++];
                if (color[w] == 0) {
                    color[w] = 1;
                    parent[w] = v;
                    stack.emplace_back(w, 0);
                } else if (color[w] == 1) {
                    RankCycle rc;
                    rc.found = true;
                    std::uint32_t cur = v;
                    rc.lowers.push_back(lowers[w]);
                    while (cur != w) {
                        rc.lowers.push_back(lowers[cur]);
                        cur = parent[cur];
                    }
                    std::reverse(rc.lowers.begin(), rc.lowers.end());
                    return rc;
                }
            } else {
                color[v] = 2;
                stack.pop_back();
            }
        }
    }
    return {};
}

} // namespace detail

// Check the matching axioms and acyclicity; report critical cells.
// Malformed input (pair not a cover of the family, face matched twice)
// throws; a cycle is a regular result with the explicit face sequence.
inline MorseReport verify_matching(const FaceSet& fam, const Matching& m) {
    MorseReport rep;
    rep.face_count = fam.size();
    rep.pair_count = m.pairs.size();
    rep.empty_present = fam.contains(0);

    auto fmap = m.face_map(); // throws on duplicate faces
    for (const auto& [d, u] : m.pairs) {
        if (!fam.contains(d) || !fam.contains(u))
            throw malformed_matching_error("matching: pair uses a face outside the family");
        if ((d & ~u) != 0 || face_card(u) != face_card(d) + 1)
            throw malformed_matching_error("matching: pair is not a cover: " +
                                           format_face(d, *fam.table) + " / " +
                                           format_face(u, *fam.table));
    }
    rep.empty_paired = fmap.count(0) != 0;

    // Rank-by-rank cycle detection.  Alternating cycles live between two
    // adjacent cardinalities, so this is exhaustive.
    std::map<int, std::vector<face_t>> lowers_by_dim;
    std::unordered_map<face_t, face_t> up;
    up.reserve(m.pairs.size() * 2);
    for (const auto& [d, u] : m.pairs) {
        lowers_by_dim[face_dim(d)].push_back(d);
        up.emplace(d, u);
    }
    for (auto& [d, lowers] : lowers_by_dim) {
        std::sort(lowers.begin(), lowers.end(), face_less);
        std::unordered_map<face_t, std::uint32_t> lower_idx;
        lower_idx.reserve(lowers.size() * 2);
        for (std::uint32_t i = 0; i < lowers.size(); ++i) lower_idx.emplace(lowers[i], i);
        auto rc = detail::find_rank_cycle(lowers, up, lower_idx);
        if (rc.found) {
            rep.acyclic = false;
            for (face_t a : rc.lowers) {
                rep.cycle.push_back(a);
                rep.cycle.push_back(up.at(a));
            }
            break;
        }
    }
    const bool rank_acyclic = rep.cycle.empty();

    // Critical cells: everything unmatched.
    for (face_t f : fam.faces)
        if (!fmap.count(f)) rep.critical[face_dim(f)].push_back(f);

    if (!rank_acyclic) return rep;

    // Linear extension of the modified Hasse digraph (matched covers point
    // up, everything else points down).  Kahn's algorithm with a heap keyed
    // by face order keeps the certificate deterministic.
    const auto covers = hasse_covers(fam);
    std::vector<std::vector<std::uint32_t>> out_edges(fam.size());
    std::vector<std::uint32_t> indeg(fam.size(), 0);
    for (const auto& [ti, si] : covers) {
        const face_t tf = fam.faces[ti], sf = fam.faces[si];
        auto it = fmap.find(tf);
        const bool matched_up = it != fmap.end() && it->second.second && it->second.first == sf;
        if (matched_up) {
            out_edges[ti].push_back(si);
            ++indeg[si];
        } else {
            out_edges[si].push_back(ti);
            ++indeg[ti];
        }
    }
    auto face_order = [&](std::uint32_t a, std::uint32_t b) { return a > b; };
    std::priority_queue<std::uint32_t, std::vector<std::uint32_t>, decltype(face_order)> ready(face_order);
    for (std::uint32_t i = 0; i < fam.size(); ++i)
        if (indeg[i] == 0) ready.push(i);
    rep.certificate.reserve(fam.size());
    while (!ready.empty()) {
        const std::uint32_t v = ready.top();
        ready.pop();
        rep.certificate.push_back(fam.faces[v]);
        for (std::uint32_t w : out_edges[v])
            if (--indeg[w] == 0) ready.push(w);
    }
    if (rep.certificate.size() != fam.size())
        throw structural_error("verify_matching: rank check and global order disagree");
    rep.acyclic = true;
    return rep;
}

// Element matching at a vertex x: pair sigma\x with sigma+x whenever both
// lie in the family.  Returns the matching and the set of matched faces.
inline std::pair<Matching, std::vector<face_t>> element_matching(const FaceSet& fam,
                                                                 std::size_t vertex_id) {
    const face_t bit = face_t(1) << vertex_id;
    Matching m;
    std::vector<face_t> matched;
    for (face_t f : fam.faces) {
        if (f & bit) continue;
        if (fam.contains(f | bit)) {
            m.add(f, f | bit);
            matched.push_back(f);
            matched.push_back(f | bit);
        }
    }
    m.normalize();
    std::sort(matched.begin(), matched.end(), face_less);
    return {std::move(m), std::move(matched)};
}

// Cluster composition: given an order-preserving level assignment into a
// chain and one acyclic matching per level class, their union is acyclic.
// Order preservation is checked on every Hasse cover of the family, each
// pair is checked to stay inside one class, and the union is re-verified
// rather than trusted.
struct ClusterResult {
    Matching matching;
    MorseReport report;
};

inline ClusterResult cluster_compose(const FaceSet& fam,
                                     const std::function<long(face_t)>& level,
                                     const std::vector<Matching>& fiber_matchings) {
    for (const auto& [ti, si] : hasse_covers(fam)) {
        const face_t tf = fam.faces[ti], sf = fam.faces[si];
        if (level(tf) > level(sf))
            throw structural_error("cluster_compose: level map not order-preserving on cover " +
                                   format_face(tf, *fam.table) + " < " +
                                   format_face(sf, *fam.table));
    }
    ClusterResult res;
    for (const Matching& fm : fiber_matchings) {
        for (const auto& [d, u] : fm.pairs)
            if (level(d) != level(u))
                throw structural_error("cluster_compose: pair crosses level classes: " +
                                       format_face(d, *fam.table) + " / " +
                                       format_face(u, *fam.table));
        res.matching.append(fm);
    }
    res.matching.normalize();
    res.report = verify_matching(fam, res.matching);
    if (!res.report.acyclic)
        throw structural_error("cluster_compose: union matching is not acyclic");
    return res;
}

// An executed collapse sequence: ordered free-face removals and what is left.
struct CollapseTrace {
    std::vector<std::pair<face_t, face_t>> steps; // (free face, coface)
    std::vector<face_t> residual;
};

// Execute an acyclic matching whose critical cells form a subcomplex as a
// sequence of elementary collapses.  At each step the removed pair (s, t)
// satisfies: t is the only face of the current complex properly containing
// s.  A pair (empty, v) can only fire when the complex has shrunk to {v},
// which removes the final point.
inline CollapseTrace collapse_by_matching(const FaceSet& fam, const Matching& m) {
    if (!fam.downward_closed())
        throw structural_error("collapse_by_matching: face set is not a complex");
    MorseReport rep = verify_matching(fam, m);
    if (!rep.acyclic)
        throw structural_error("collapse_by_matching: matching is not acyclic");

    auto fmap = m.face_map();
    // Critical cells must form a subcomplex.
    for (face_t f : fam.faces) {
        if (fmap.count(f)) continue;
        face_t rest = f;
        while (rest) {
            const face_t bit = rest & ~(rest - 1);
            rest &= rest - 1;
            const face_t facet = f & ~bit;
            if (fam.contains(facet) && fmap.count(facet))
                throw structural_error(
                    "collapse_by_matching: critical cells are not a subcomplex (facet " +
                    format_face(facet, *fam.table) + " of critical " +
                    format_face(f, *fam.table) + " is matched)");
        }
    }

    // Count, for every face, how many of its cofaces are still present.
    std::vector<std::uint32_t> cof(fam.size(), 0);
    for (face_t f : fam.faces) {
        face_t rest = f;
        while (rest) {
            const face_t bit = rest & ~(rest - 1);
            rest &= rest - 1;
            auto it = fam.index.find(f & ~bit);
            if (it != fam.index.end()) ++cof[it->second];
        }
    }

    std::vector<std::uint32_t> pair_of(fam.size(), UINT32_MAX);
    for (std::uint32_t pi = 0; pi < m.pairs.size(); ++pi) {
        pair_of[fam.index_of(m.pairs[pi].first)] = pi;
        pair_of[fam.index_of(m.pairs[pi].second)] = pi;
    }

    auto pair_ready = [&](std::uint32_t pi) {
        const auto& [d, u] = m.pairs[pi];
        return cof[fam.index_of(d)] == 1 && cof[fam.index_of(u)] == 0;
    };

    std::priority_queue<std::uint32_t, std::vector<std::uint32_t>, std::greater<>> ready;
    std::vector<bool> queued(m.pairs.size(), false), removed_pair(m.pairs.size(), false);
    for (std::uint32_t pi = 0; pi < m.pairs.size(); ++pi)
        if (pair_ready(pi)) {
            ready.push(pi);
            queued[pi] = true;
        }

    CollapseTrace trace;
    std::vector<bool> removed(fam.size(), false);
    auto drop_face = [&](face_t f) {
        removed[fam.index_of(f)] = true;
        face_t rest = f;
        while (rest) {
            const face_t bit = rest & ~(rest - 1);
            rest &= rest - 1;
            auto it = fam.index.find(f & ~bit);
            if (it == fam.index.end() || removed[it->second]) continue;
            --cof[it->second];
            const std::uint32_t pi = pair_of[it->second];
            if (pi != UINT32_MAX && !removed_pair[pi] && !queued[pi] && pair_ready(pi)) {
                ready.push(pi);
                queued[pi] = true;
            }
        }
    };

    std::size_t done = 0;
    while (!ready.empty()) {
        const std::uint32_t pi = ready.top();
        ready.pop();
        if (removed_pair[pi]) continue;
        queued[pi] = false;
        if (!pair_ready(pi)) continue; // stale entry
        const auto& [d, u] = m.pairs[pi];
        removed_pair[pi] = true;
        trace.steps.emplace_back(d, u);
        drop_face(u);
        drop_face(d);
        ++done;
    }
    if (done != m.pairs.size())
        throw structural_error("collapse_by_matching: stuck with " +
                               std::to_string(m.pairs.size() - done) +
                               " pairs not removable as free faces");
    for (std::uint32_t i = 0; i < fam.size(); ++i)
        if (!removed[i]) trace.residual.push_back(fam.faces[i]);
    return trace;
}

// Greedy acyclic matching: process faces in (dimension, mask) order and pair
// each unmatched face with its smallest unmatched coface that keeps the
// matching acyclic (checked incrementally by alternating-path search).
inline Matching greedy_morse_matching(const FaceSet& fam,
                                      const std::vector<face_t>* order = nullptr) {
    const std::vector<face_t>& faces = order ? *order : fam.faces;
    std::unordered_map<face_t, face_t> up, down;
    up.reserve(fam.size());
    down.reserve(fam.size());

    // Would the pair (target, from) close an alternating cycle?  True when
    // `target` is reachable from the coface `from` by descending to a facet
    // other than `target` itself and following existing matches upward.
    auto reaches = [&](face_t from, face_t target) {
        std::vector<face_t> stack{from};
        std::unordered_set<face_t> seen{from};
        while (!stack.empty()) {
            const face_t t = stack.back();
            stack.pop_back();
            face_t rest = t;
            while (rest) {
                const face_t bit = rest & ~(rest - 1);
                rest &= rest - 1;
                const face_t facet = t & ~bit;
                if (facet == target) {
                    if (t != from) return true;
                    continue; // the candidate pair's own cover
                }
                auto it = up.find(facet);
                if (it != up.end() && seen.insert(it->second).second)
                    stack.push_back(it->second);
            }
        }
        return false;
    };

    Matching m;
    for (face_t f : faces) {
        if (up.count(f) || down.count(f)) continue;
        const std::size_t nverts = fam.table->size();
        for (std::size_t w = 0; w < nverts; ++w) {
            const face_t bit = face_t(1) << w;
            if (f & bit) continue;
            const face_t cof = f | bit;
            if (!fam.contains(cof) || up.count(cof) || down.count(cof)) continue;
            if (reaches(cof, f)) continue;
            up.emplace(f, cof);
            down.emplace(cof, f);
            m.add(f, cof);
            break;
        }
    }
    m.normalize();
    return m;
}

} // namespace kmorse
