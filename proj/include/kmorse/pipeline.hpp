#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kmorse/complex.hpp"
#include "kmorse/errors.hpp"
#include "kmorse/graph.hpp"
#include "kmorse/morse.hpp"
#include "kmorse/simplex.hpp"

namespace kmorse {

// ---------------------------------------------------------------------------
// Filtration stages.
//
// Stage l (1 <= l <= k+5) is the neighborhood complex of the s-graph with
// the unstable vertices 12, 23, ..., (l-1)l deleted.  Stage 1 is N(S_{2,k});
// stage k+5 has every unstable vertex deleted and equals N(SG_{2,k}).
// ---------------------------------------------------------------------------

inline Complex stage_complex(GroundParam p, int l, VertexTablePtr table = nullptr,
                             std::size_t cap = kDefaultFaceCap) {
    if (l < 1 || l > p.k + 5)
        throw domain_error("stage_complex: stage " + std::to_string(l) +
                           " outside [1," + std::to_string(p.k + 5) + "]");
    if (!table) table = make_vertex_table(p);
    Graph g = s_graph(p, table);
    std::vector<Vertex> doomed;
    for (int s = 1; s <= l - 1; ++s) doomed.push_back(unstable_vertex(s, p));
    g = remove_vertices(g, doomed);
    return neighborhood_complex(g, "W" + std::to_string(l), cap);
}

// Faces of stage l whose complement is exactly the next deleted pair
// {l, l+1}: their only possible common neighbor is the vertex l(l+1).
inline std::vector<face_t> exclusive_fiber(const Complex& W, int l) {
    const GroundParam& p = W.param();
    const elem_set_t target = elem_set({l, l + 1}, p);
    std::vector<face_t> out;
    for (face_t f : W.faces())
        if (complement(f, *W.fs.table) == target) out.push_back(f);
    return out;
}

// A perfect acyclic matching on an exclusive fiber, with the block structure
// of its recursive construction kept for diagnostics.
struct FiberMatching {
    int k = 0;
    int l = 0;
    VertexTablePtr table;
    std::vector<face_t> fiber;
    Matching matching;
    // Faces split by the shape of their complement after removing the
    // splitting vertex: matched directly at the splitting vertex, or
    // transported from a smaller ground set by one of three shifts.
    std::size_t direct = 0, from_k_minus_2 = 0, from_k_minus_1_hi = 0, from_k_minus_1_lo = 0;
};

// Recursive construction of a perfect acyclic matching on the exclusive
// fiber of stage l.  The splitting vertex is {l+2, l+k+3}; faces not matched
// at it are carried over from the fibers of ground sets k-2 and k-1 (at
// stage 1) by cyclic shifts, preserving matchings.  The base cases are k <= 1
// (empty fiber) and k = 2 (a single pair).
inline FiberMatching exclusive_fiber_matching(GroundParam p, int l,
                                              const Complex* W = nullptr,
                                              std::size_t cap = kDefaultFaceCap) {
    Complex local;
    if (!W) {
        local = stage_complex(p, l, nullptr, cap);
        W = &local;
    }
    FiberMatching out;
    out.k = p.k;
    out.l = l;
    out.table = W->fs.table;
    out.fiber = exclusive_fiber(*W, l);
    if (out.fiber.empty()) return out;

    const VertexTable& table = *W->fs.table;
    FaceSet fiber_set(p, W->fs.table, out.fiber);
    const Vertex split = canonical_vertex(p.wrap(l + 2), p.wrap(l + p.k + 3), p);
    const face_t split_bit = face_t(1) << table.id(split);

    auto [direct_matching, direct_faces] = element_matching(fiber_set, table.id(split));
    out.direct = direct_faces.size();

    std::vector<Matching> blocks{direct_matching};
    std::vector<face_t> block_of(fiber_set.size(), 0); // 0 direct, 1..3 shifted
    for (face_t f : direct_faces) block_of[fiber_set.index_of(f)] = 0;

    if (p.k > 2) {
        // Complement targets after removing the splitting vertex.
        const elem_set_t c_both = elem_set({l, l + 1, l + 2, l + p.k + 3}, p);
        const elem_set_t c_hi = elem_set({l, l + 1, l + p.k + 3}, p);
        const elem_set_t c_lo = elem_set({l, l + 1, l + 2}, p);

        std::vector<face_t> want_both, want_hi, want_lo;
        {
            std::unordered_set<face_t>直;
            std::unordered_set<face_t> in_direct(direct_faces.begin(), direct_faces.end());
            for (face_t f : out.fiber) {
                if (in_direct.count(f)) continue;
                if (!(f & split_bit))
                    throw structural_error(
                        "exclusive_fiber_matching: unmatched fiber face without splitting vertex");
                const elem_set_t c = complement(f & ~split_bit, table);
                if (c == c_both)
                    want_both.push_back(f);
                else if (c == c_hi)
                    want_hi.push_back(f);
                else if (c == c_lo)
                    want_lo.push_back(f);
                else
                    throw structural_error(
                        "exclusive_fiber_matching: fiber face in none of the four blocks: " +
                        format_face(f, table));
            }
        }

        auto transported = [&](const FiberMatching& src, int shift,
                               const std::vector<face_t>& expect, const char* label) {
            std::vector<face_t> image;
            Matching m;
            for (face_t f : src.fiber)
                image.push_back(transport_face(f, *src.table, shift, table) | split_bit);
            for (const auto& [d, u] : src.matching.pairs)
                m.add(transport_face(d, *src.table, shift, table) | split_bit,
                      transport_face(u, *src.table, shift, table) | split_bit);
            std::sort(image.begin(), image.end(), face_less);
            std::vector<face_t> want(expect);
            std::sort(want.begin(), want.end(), face_less);
            if (image != want)
                throw structural_error(std::string("exclusive_fiber_matching: shifted fiber does "
                                                   "not land exactly on block ") +
                                       label);
            m.normalize();
            return m;
        };

        const FiberMatching sub2 = exclusive_fiber_matching(GroundParam(p.k - 2), 1);
        const FiberMatching sub1 = exclusive_fiber_matching(GroundParam(p.k - 1), 1);
        blocks.push_back(transported(sub2, l, want_both, "k-2"));
        blocks.push_back(transported(sub1, l - 1, want_hi, "k-1 high"));
        blocks.push_back(transported(sub1, l, want_lo, "k-1 low"));
        out.from_k_minus_2 = want_both.size();
        out.from_k_minus_1_hi = want_hi.size();
        out.from_k_minus_1_lo = want_lo.size();

        for (face_t f : want_both) block_of[fiber_set.index_of(f)] = 1;
        for (face_t f : want_hi) block_of[fiber_set.index_of(f)] = 2;
        for (face_t f : want_lo) block_of[fiber_set.index_of(f)] = 3;
    } else {
        if (direct_faces.size() != out.fiber.size())
            throw structural_error(
                "exclusive_fiber_matching: base case fiber not perfectly matched at the "
                "splitting vertex");
    }

    // Shifted blocks sit below the direct block in the composition order.
    auto level = [&](face_t f) -> long {
        const face_t idx = block_of[fiber_set.index_of(f)];
        return idx == 0 ? 4 : long(idx);
    };
    ClusterResult cluster = cluster_compose(fiber_set, level, blocks);
    if (cluster.report.critical_count() != 0)
        throw structural_error("exclusive_fiber_matching: matching is not perfect on the fiber");
    out.matching = std::move(cluster.matching);
    return out;
}

// ---------------------------------------------------------------------------
// Star stages.
//
// After the exclusive fiber of stage l is collapsed, the remaining faces
// containing the vertex l(l+1) are removed in k further perfect collapses,
// stratified by the maximal length of a common neighbor.
// ---------------------------------------------------------------------------

struct StarStage {
    int i = 0;                   // 1..k
    std::vector<face_t> faces;   // the complex this stage collapses
    std::vector<face_t> fiber;   // faces removed by this stage
    Matching matching;
    std::map<int, std::size_t> buckets; // pairs per complement-window start
};

namespace detail {

// Longest length of a common neighbor, per face; -1 when none.
inline std::vector<int> max_neighbor_length(const Complex& K, const Graph& g) {
    std::vector<int> out(K.size(), -1);
    for (std::size_t fi = 0; fi < K.size(); ++fi) {
        const face_t f = K.faces()[fi];
        face_t cand = common_neighbors(g, f & g.vertices);
        if ((f & ~g.vertices) != 0) cand = 0; // face uses a deleted vertex
        int best = -1;
        while (cand) {
            const std::size_t v = std::size_t(std::countr_zero(cand));
            cand &= cand - 1;
            best = std::max(best, length(g.table->vertex(v)));
        }
        out[fi] = best;
    }
    return out;
}

inline std::vector<face_t> sorted_difference(const std::vector<face_t>& a,
                                             const std::vector<face_t>& b) {
    std::vector<face_t> out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out),
                        face_less);
    return out;
}

inline std::vector<face_t> sorted_union(std::vector<face_t> a, const std::vector<face_t>& b) {
    a.insert(a.end(), b.begin(), b.end());
    std::sort(a.begin(), a.end(), face_less);
    a.erase(std::unique(a.begin(), a.end()), a.end());
    return a;
}

} // namespace detail

// Build the interpolating complexes between A (stage l minus its exclusive
// fiber) and stage l+1, and the perfect matching collapsing each onto the
// next.  Stage i removes the faces whose common neighbors max out at length
// i+1; each such face is matched across the vertex {l+1, l+s} where s is the
// least element of the shifted-back complement.
inline std::vector<StarStage> star_stage_matchings(const Complex& NS, const Graph& S,
                                                   const std::vector<face_t>& a_faces,
                                                   const std::vector<face_t>& next_faces,
                                                   int l) {
    const GroundParam& p = NS.param();
    const VertexTable& table = *NS.fs.table;
    const int k = p.k;

    const std::size_t base_id = table.id(canonical_vertex(1, 2, p));
    const auto maxlen = detail::max_neighbor_length(NS, S);

    // star_by_min_len[i] = faces of N(S) containing 12 with a common
    // neighbor of length >= i+1, shifted forward by l-1.
    std::vector<std::vector<face_t>> shifted(std::size_t(k) + 2);
    for (std::size_t fi = 0; fi < NS.size(); ++fi) {
        const face_t f = NS.faces()[fi];
        if (!((f >> base_id) & 1)) continue;
        const int ml = maxlen[fi];
        const face_t g = shift_face(f, l - 1, /*plus=*/true, table);
        for (int i = 1; i <= k + 1 && ml >= i + 1; ++i) shifted[std::size_t(i)].push_back(g);
    }

    std::vector<std::vector<face_t>> B(std::size_t(k) + 2);
    for (int i = 1; i <= k + 1; ++i)
        B[std::size_t(i)] = detail::sorted_union(shifted[std::size_t(i)], next_faces);

    std::vector<face_t> a_sorted(a_faces);
    std::sort(a_sorted.begin(), a_sorted.end(), face_less);
    if (B[1] != a_sorted)
        throw structural_error("star_stage_matchings: first stage does not match the "
                               "fiber-collapsed complex");
    std::vector<face_t> next_sorted(next_faces);
    std::sort(next_sorted.begin(), next_sorted.end(), face_less);
    if (B[std::size_t(k) + 1] != next_sorted)
        throw structural_error("star_stage_matchings: last stage does not equal the next "
                               "filtration complex");

    std::vector<StarStage> stages;
    for (int i = 1; i <= k; ++i) {
        StarStage st;
        st.i = i;
        st.faces = B[std::size_t(i)];
        st.fiber = detail::sorted_difference(B[std::size_t(i)], B[std::size_t(i) + 1]);
        if (st.fiber.empty()) {
            stages.push_back(std::move(st));
            continue;
        }
        FaceSet fiber_set(p, NS.fs.table, st.fiber);

        // The stage-(i+1) part must be a subcomplex: every cover of B_i from
        // a fiber face leads to another fiber face.
        FaceSet b_set(p, NS.fs.table, st.faces);
        if (!b_set.downward_closed())
            throw structural_error("star_stage_matchings: stage face set is not a complex");
        for (const auto& [ti, si] : hasse_covers(b_set)) {
            if (fiber_set.contains(b_set.faces[ti]) && !fiber_set.contains(b_set.faces[si]))
                throw structural_error(
                    "star_stage_matchings: stage assignment is not order-preserving");
        }

        std::map<int, Matching> bucket_matchings;
        auto window_start = [&](face_t f) -> int {
            const face_t back = shift_face(f, l - 1, /*plus=*/false, table);
            const elem_set_t c = complement(back, table);
            if (c == 0)
                throw structural_error("star_stage_matchings: fiber face has empty complement");
            const auto elems = elem_set_members(c);
            const int s = elems.front();
            if (s < 3 || s > k + 3 - i)
                throw structural_error("star_stage_matchings: window start " +
                                       std::to_string(s) + " out of range for stage " +
                                       std::to_string(i));
            for (int e : elems)
                if (e > s + i + 1)
                    throw structural_error(
                        "star_stage_matchings: complement not inside its window");
            return s;
        };

        for (face_t f : st.fiber) {
            const int s = window_start(f);
            const Vertex w = canonical_vertex(p.wrap(l + 1), p.wrap(l + s), p);
            const face_t wbit = face_t(1) << table.id(w);
            if (f & wbit) continue; // recorded from its lower face
            const face_t upper = f | wbit;
            if (!fiber_set.contains(upper))
                throw structural_error("star_stage_matchings: matched partner of " +
                                       format_face(f, table) + " is not in the fiber");
            if (window_start(upper) != s)
                throw structural_error("star_stage_matchings: pair crosses windows");
            bucket_matchings[s].add(f, upper);
        }

        std::size_t matched = 0;
        std::vector<Matching> fibers;
        for (auto& [s, m] : bucket_matchings) {
            m.normalize();
            st.buckets[s] = m.size();
            matched += 2 * m.size();
            fibers.push_back(m);
        }
        if (matched != st.fiber.size())
            throw structural_error("star_stage_matchings: stage " + std::to_string(i) +
                                   " fiber not perfectly matched (" + std::to_string(matched) +
                                   " of " + std::to_string(st.fiber.size()) + ")");

        ClusterResult cluster =
            cluster_compose(fiber_set, [&](face_t f) { return long(window_start(f)); }, fibers);
        st.matching = std::move(cluster.matching);
        stages.push_back(std::move(st));
    }
    return stages;
}

// ---------------------------------------------------------------------------
// The full collapse from N(S_{2,k}) to N(SG_{2,k}).
// ---------------------------------------------------------------------------

struct PipelineStage {
    int l = 0;
    std::vector<face_t> w_faces; // stage complex
    std::vector<face_t> a_faces; // after the exclusive-fiber collapse
    FiberMatching fiber41;
    std::vector<StarStage> stars;
};

struct PipelineResult {
    GroundParam param;
    VertexTablePtr table;
    CollapseTrace trace; // concatenated elementary collapses
    std::vector<face_t> residual;
    std::vector<PipelineStage> stages;
    std::vector<face_t> ns_faces;  // N(S_{2,k})
    std::vector<face_t> nsg_faces; // N(SG_{2,k}), built independently
};

inline PipelineResult collapse_s_to_sg(GroundParam p, VertexTablePtr table = nullptr,
                                       std::size_t cap = kDefaultFaceCap) {
    if (!table) table = make_vertex_table(p);
    PipelineResult out;
    out.param = p;
    out.table = table;

    const Graph S = s_graph(p, table);
    const Complex NS = neighborhood_complex(S, "N(S)", cap);
    const Complex NSG = neighborhood_complex(stable_kneser_graph(p, table), "N(SG)", cap);
    out.ns_faces = NS.faces();
    out.nsg_faces = NSG.faces();

    std::vector<face_t> cur = NS.faces();
    for (int l = 1; l <= p.k + 4; ++l) {
        PipelineStage stage;
        stage.l = l;
        stage.w_faces = cur;

        const Complex fresh = stage_complex(p, l, table, cap);
        if (fresh.faces() != cur)
            throw structural_error("collapse_s_to_sg: stage " + std::to_string(l) +
                                   " does not match its direct construction");
        Complex W;
        W.fs = FaceSet(p, table, cur);
        W.name = fresh.name;
        W.generators = fresh.generators;

        stage.fiber41 = exclusive_fiber_matching(p, l, &W, cap);
        stage.a_faces = detail::sorted_difference(cur, [&] {
            std::vector<face_t> fib = stage.fiber41.fiber;
            std::sort(fib.begin(), fib.end(), face_less);
            return fib;
        }());
        if (!stage.fiber41.fiber.empty()) {
            CollapseTrace ct = collapse_by_matching(W.fs, stage.fiber41.matching);
            if (ct.residual != stage.a_faces)
                throw structural_error("collapse_s_to_sg: fiber collapse residual mismatch");
            out.trace.steps.insert(out.trace.steps.end(), ct.steps.begin(), ct.steps.end());
        }

        const std::vector<face_t> next = stage_complex(p, l + 1, table, cap).faces();
        stage.stars = star_stage_matchings(NS, S, stage.a_faces, next, l);
        for (std::size_t si = 0; si < stage.stars.size(); ++si) {
            const StarStage& st = stage.stars[si];
            if (st.fiber.empty()) continue;
            FaceSet b_set(p, table, st.faces);
            CollapseTrace ct = collapse_by_matching(b_set, st.matching);
            const std::vector<face_t>& expect =
                si + 1 < stage.stars.size() ? stage.stars[si + 1].faces : next;
            if (ct.residual != expect)
                throw structural_error("collapse_s_to_sg: star stage residual mismatch");
            out.trace.steps.insert(out.trace.steps.end(), ct.steps.begin(), ct.steps.end());
        }
        cur = next;
        out.stages.push_back(std::move(stage));
    }

    if (cur != out.nsg_faces)
        throw structural_error("collapse_s_to_sg: residual differs from the stable-Kneser "
                               "neighborhood complex");
    out.residual = cur;
    return out;
}

// ---------------------------------------------------------------------------
// Strata of N(KG_{2,k}) over N(S_{2,k}).
// ---------------------------------------------------------------------------

struct Stratum {
    int i = 0;                 // complement pair {i, i+1}
    std::vector<face_t> faces; // X_{i,i+1}
};

struct Stratification {
    std::vector<Stratum> strata; // i = 1..k+4, in order
};

// Partition the faces of N(KG) outside N(S) by their (necessarily adjacent)
// complement pair; every such face must also contain an unstable vertex.
inline Stratification stratify(const Complex& NKG, const Complex& NS) {
    const GroundParam& p = NKG.param();
    const VertexTable& table = *NKG.fs.table;
    Stratification out;
    out.strata.resize(std::size_t(p.n));
    for (int i = 1; i <= p.n; ++i) out.strata[std::size_t(i) - 1].i = i;

    std::size_t classified = 0;
    for (face_t f : NKG.faces()) {
        if (NS.fs.contains(f)) continue;
        const auto elems = elem_set_members(complement(f, table));
        int i = 0;
        if (elems.size() == 2) {
            if (elems[1] == elems[0] + 1)
                i = elems[0];
            else if (elems[0] == 1 && elems[1] == p.n)
                i = p.n;
        }
        if (i == 0)
            throw structural_error("stratify: face outside N(S) lacks an adjacent "
                                   "complement pair: " +
                                   format_face(f, table));
        bool has_unstable = false;
        for (const Vertex& v : face_vertices(f, table))
            if (!is_stable(v, p)) has_unstable = true;
        if (!has_unstable)
            throw structural_error("stratify: stratum face has no unstable vertex: " +
                                   format_face(f, table));
        out.strata[std::size_t(i) - 1].faces.push_back(f);
        ++classified;
    }
    if (classified + NS.size() != NKG.size())
        throw structural_error("stratify: stratum sizes do not account for every face");
    for (auto& s : out.strata) std::sort(s.faces.begin(), s.faces.end(), face_less);
    return out;
}

// ---------------------------------------------------------------------------
// Classification of one stratum.
// ---------------------------------------------------------------------------

// Ground elements outside {i-1, i, i+1}: the admissible group indices.
inline std::vector<int> group_indices(const GroundParam& p, int i) {
    std::vector<int> out;
    for (int j = 1; j <= p.n; ++j)
        if (j != p.wrap(i - 1) && j != i && j != p.wrap(i + 1)) out.push_back(j);
    return out;
}

// Ground elements outside {i, i+1, j-1, j, j+1}: the fan range of group j.
inline std::vector<int> fan_range(const GroundParam& p, int i, int j) {
    std::vector<int> out;
    for (int r = 1; r <= p.n; ++r) {
        if (r == i || r == p.wrap(i + 1)) continue;
        if (r == p.wrap(j - 1) || r == j || r == p.wrap(j + 1)) continue;
        out.push_back(r);
    }
    return out;
}

// The unique fully-fanned face of group j in stratum i: {j, j+1} together
// with {j, r} for every fan element r, plus {j-1, j+1} whenever j-1 stays in
// the support (i.e. j is not i+2).
inline face_t predicted_fan_face(const GroundParam& p, const VertexTable& table, int i, int j) {
    face_t f = face_t(1) << table.id(canonical_vertex(j, p.wrap(j + 1), p));
    for (int r : fan_range(p, i, j))
        f |= face_t(1) << table.id(canonical_vertex(j, r, p));
    if (p.wrap(j - 1) != p.wrap(i + 1))
        f |= face_t(1) << table.id(canonical_vertex(p.wrap(j - 1), p.wrap(j + 1), p));
    return f;
}

struct StratumPartition {
    int i = 0;
    std::vector<int> group_js;
    std::map<int, std::vector<face_t>> groups;                   // j -> E_j
    std::map<int, std::map<int, std::vector<face_t>>> partial;   // j -> t -> F_{j,t}
    std::map<int, std::vector<face_t>> complete;                 // j -> F_j
};

// Split a stratum by the least unstable member, then each group by the first
// fan element that is not yet "pinned" (present exactly once, via the fan
// vertex).  The fully pinned faces are the critical candidates.
inline StratumPartition classify_stratum(const GroundParam& p, const VertexTable& table,
                                         const Stratum& stratum) {
    StratumPartition out;
    out.i = stratum.i;
    out.group_js = group_indices(p, stratum.i);
    const elem_set_t c_target = elem_set({stratum.i, stratum.i + 1}, p);

    for (face_t f : stratum.faces) {
        int j = 0;
        for (int s = 1; s <= p.n; ++s) {
            const face_t bit = face_t(1) << table.id(unstable_vertex(s, p));
            if (f & bit) {
                j = s;
                break;
            }
        }
        if (j == 0 || std::find(out.group_js.begin(), out.group_js.end(), j) == out.group_js.end())
            throw structural_error("classify_stratum: least unstable member is not an "
                                   "admissible group index");
        // Group predicate, checked directly: the unstable vertex of j is in
        // the face and no earlier admissible one is.
        for (int s : out.group_js) {
            if (s >= j) break;
            if (f & (face_t(1) << table.id(unstable_vertex(s, p))))
                throw structural_error("classify_stratum: group predicate violated");
        }
        out.groups[j].push_back(f);

        const auto fan = fan_range(p, stratum.i, j);
        std::vector<int> pinned; // fan elements covered only by their fan vertex
        for (int t : fan) {
            const face_t tbit = face_t(1) << table.id(canonical_vertex(j, t, p));
            if (!(f & tbit)) continue;
            const elem_set_t c = complement(f & ~tbit, table);
            if (c == (c_target | (elem_set_t(1) << (t - 1)))) pinned.push_back(t);
        }
        int first_unpinned = 0;
        for (int t : fan)
            if (std::find(pinned.begin(), pinned.end(), t) == pinned.end()) {
                first_unpinned = t;
                break;
            }
        if (first_unpinned == 0) {
            out.complete[j].push_back(f);
        } else {
            // Partial-class predicate, checked directly.
            const face_t tbit =
                face_t(1) << table.id(canonical_vertex(j, first_unpinned, p));
            if ((f & tbit) && complement(f & ~tbit, table) != c_target)
                throw structural_error("classify_stratum: partial-class predicate violated");
            out.partial[j][first_unpinned].push_back(f);
        }
    }

    for (const auto& [j, faces] : out.complete) {
        if (faces.size() != 1)
            throw structural_error("classify_stratum: fully pinned class of group " +
                                   std::to_string(j) + " is not a singleton");
        if (faces[0] != predicted_fan_face(p, table, stratum.i, j))
            throw structural_error("classify_stratum: fully pinned face differs from its "
                                   "closed form");
    }
    return out;
}

// ---------------------------------------------------------------------------
// The global matching on the face poset of N(KG_{2,k}).
// ---------------------------------------------------------------------------

struct StratumMatchingResult {
    int i = 0;
    Matching matching;
    std::vector<face_t> critical; // the k+1 fan faces
};

struct WedgeMatchingResult {
    GroundParam param;
    VertexTablePtr table;
    std::vector<face_t> nkg_faces;
    Matching global;
    MorseReport report; // over the whole face poset
    std::vector<StratumMatchingResult> strata;
    Matching base;          // matching on the N(S) part
    MorseReport base_report;
    std::size_t strata_critical_cells = 0; // all of dimension k
};

// Assemble the acyclic matching on N(KG) whose critical cells realise the
// wedge: per-stratum fan matchings plus a matching on the N(S) part made of
// the collapse matchings and a greedy matching on the final residual.  The
// composition is re-verified at every level.
inline WedgeMatchingResult global_wedge_matching(GroundParam p, VertexTablePtr table = nullptr,
                                                 std::size_t cap = kDefaultFaceCap,
                                                 const PipelineResult* pipeline = nullptr) {
    if (!table) table = make_vertex_table(p);
    WedgeMatchingResult out;
    out.param = p;
    out.table = table;

    const Complex NKG = neighborhood_complex(kneser_graph(p, table), "N(KG)", cap);
    const Complex NS = neighborhood_complex(s_graph(p, table), "N(S)", cap);
    out.nkg_faces = NKG.faces();

    std::optional<PipelineResult> own;
    if (!pipeline) {
        own = collapse_s_to_sg(p, table, cap);
        pipeline = &*own;
    }

    const Stratification strat = stratify(NKG, NS);
    std::vector<Matching> top_blocks;
    std::vector<long> level_of_face(NKG.size(), 0); // 0 = N(S) part, else n+1-i

    for (const Stratum& stratum : strat.strata) {
        StratumMatchingResult sm;
        sm.i = stratum.i;
        if (!stratum.faces.empty()) {
            const StratumPartition part = classify_stratum(p, *table, stratum);
            FaceSet stratum_set(p, table, stratum.faces);

            std::vector<Matching> group_matchings;
            for (const auto& [j, group_faces] : part.groups) {
                FaceSet group_set(p, table, group_faces);
                std::vector<Matching> fan_matchings;
                auto pit = part.partial.find(j);
                if (pit != part.partial.end()) {
                    for (const auto& [t, class_faces] : pit->second) {
                        FaceSet class_set(p, table, class_faces);
                        auto [m, touched] =
                            element_matching(class_set, table->id(canonical_vertex(j, t, p)));
                        if (touched.size() != class_faces.size())
                            throw structural_error(
                                "global_wedge_matching: fan class not perfectly matched");
                        fan_matchings.push_back(std::move(m));
                    }
                }
                // Partial classes sit above the fully pinned face; earlier
                // fan elements sit higher.
                auto group_level = [&](face_t f) -> long {
                    if (pit != part.partial.end())
                        for (const auto& [t, class_faces] : pit->second)
                            if (std::binary_search(class_faces.begin(), class_faces.end(), f,
                                                   face_less))
                                return long(p.n + 1 - t);
                    return 0;
                };
                ClusterResult cluster = cluster_compose(group_set, group_level, fan_matchings);
                group_matchings.push_back(std::move(cluster.matching));
            }

            auto stratum_level = [&](face_t f) -> long {
                for (const auto& [j, group_faces] : part.groups)
                    if (std::binary_search(group_faces.begin(), group_faces.end(), f, face_less))
                        return long(p.n - j);
                throw structural_error("global_wedge_matching: face missing from groups");
            };
            ClusterResult cluster = cluster_compose(stratum_set, stratum_level, group_matchings);
            sm.matching = std::move(cluster.matching);
            for (const auto& [d, cells] : cluster.report.critical)
                for (face_t c : cells) sm.critical.push_back(c);
            std::sort(sm.critical.begin(), sm.critical.end(), face_less);
            out.strata_critical_cells += sm.critical.size();
            top_blocks.push_back(sm.matching);
        }
        for (face_t f : stratum.faces)
            level_of_face[NKG.fs.index_of(f)] = long(p.n + 1 - stratum.i);
        out.strata.push_back(std::move(sm));
    }

    // The N(S) part: every collapse matching plus a greedy matching on the
    // final residual N(SG).
    Matching base;
    for (const PipelineStage& st : pipeline->stages) {
        base.append(st.fiber41.matching);
        for (const StarStage& star : st.stars) base.append(star.matching);
    }
    FaceSet nsg_set(p, table, pipeline->nsg_faces);
    base.append(greedy_morse_matching(nsg_set));
    base.normalize();
    out.base = base;
    out.base_report = verify_matching(NS.fs, base);
    if (!out.base_report.acyclic)
        throw structural_error("global_wedge_matching: matching on the N(S) part is not acyclic");
    top_blocks.push_back(base);

    ClusterResult cluster = cluster_compose(
        NKG.fs, [&](face_t f) { return level_of_face[NKG.fs.index_of(f)]; }, top_blocks);
    out.global = std::move(cluster.matching);
    out.report = std::move(cluster.report);
    return out;
}

} // namespace kmorse
