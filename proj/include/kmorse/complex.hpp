#pragma once

#include <algorithm>
#include <cstdlib>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "kmorse/errors.hpp"
#include "kmorse/graph.hpp"
#include "kmorse/simplex.hpp"

namespace kmorse {

inline constexpr std::size_t kDefaultFaceCap = 4'000'000;

// Face cap resolution: explicit argument beats the MK_CAP environment
// variable beats the default.
inline std::size_t resolve_face_cap(std::optional<std::size_t> explicit_cap = std::nullopt) {
    if (explicit_cap) return *explicit_cap;
    if (const char* env = std::getenv("MK_CAP")) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (end && *end == '\0' && v > 0) return std::size_t(v);
    }
    return kDefaultFaceCap;
}

// An indexed family of faces over one vertex universe, sorted by
// (cardinality, mask).  This is the carrier for posets, matchings and chain
// complexes; it need not be downward closed (fibers are not).
struct FaceSet {
    GroundParam param;
    VertexTablePtr table;
    std::vector<face_t> faces;
    std::unordered_map<face_t, std::uint32_t> index;

    FaceSet() = default;
    FaceSet(GroundParam p, VertexTablePtr t, std::vector<face_t> fs)
        : param(p), table(std::move(t)), faces(std::move(fs)) {
        std::sort(faces.begin(), faces.end(), face_less);
        faces.erase(std::unique(faces.begin(), faces.end()), faces.end());
        index.reserve(faces.size() * 2);
        for (std::uint32_t i = 0; i < faces.size(); ++i) index.emplace(faces[i], i);
    }

    std::size_t size() const { return faces.size(); }
    bool contains(face_t f) const { return index.count(f) != 0; }
    std::uint32_t index_of(face_t f) const { return index.at(f); }

    int max_dim() const { return faces.empty() ? -1 : face_dim(faces.back()); }

    // Downward closed modulo a possibly absent empty face.
    bool downward_closed() const {
        for (face_t f : faces) {
            face_t rest = f;
            while (rest) {
                const face_t bit = rest & ~(rest - 1); // lowest set bit
                const face_t facet = f & ~bit;
                if (facet != 0 && !contains(facet)) return false;
                rest &= rest - 1;
            }
        }
        return true;
    }
};

// Hasse covers (tau, sigma) with tau < sigma and nothing strictly between.
// For a downward-closed family every cover drops exactly one vertex; for a
// general family covers may skip cardinalities and are found by scanning.
inline std::vector<std::pair<std::uint32_t, std::uint32_t>> hasse_covers(const FaceSet& fs) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> covers;
    if (fs.downward_closed()) {
        for (std::uint32_t si = 0; si < fs.faces.size(); ++si) {
            const face_t f = fs.faces[si];
            face_t rest = f;
            while (rest) {
                const face_t bit = rest & ~(rest - 1);
                const face_t facet = f & ~bit;
                auto it = fs.index.find(facet);
                if (it != fs.index.end()) covers.emplace_back(it->second, si);
                rest &= rest - 1;
            }
        }
        return covers;
    }
    // General family: collect, per face, its sub-faces; keep the maximal ones.
    for (std::uint32_t si = 0; si < fs.faces.size(); ++si) {
        const face_t f = fs.faces[si];
        std::vector<std::uint32_t> below;
        for (std::uint32_t ti = 0; ti < si; ++ti) {
            const face_t g = fs.faces[ti];
            if (g != f && (g & ~f) == 0) below.push_back(ti);
        }
        for (std::uint32_t ti : below) {
            bool is_cover = true;
            for (std::uint32_t ri : below) {
                const face_t r = fs.faces[ri];
                if (ri != ti && (fs.faces[ti] & ~r) == 0 && fs.faces[ti] != r) {
                    is_cover = false;
                    break;
                }
            }
            if (is_cover) covers.emplace_back(ti, si);
        }
    }
    return covers;
}

// The face poset with its cover relation materialised.
struct HasseDiagram {
    FaceSet faces;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> covers; // (sub, super)
};

// A simplicial complex: a FaceSet guaranteed downward closed (including the
// empty face when `faces` is nonempty), plus its inclusion-maximal
// generators.
struct Complex {
    FaceSet fs;
    std::vector<face_t> generators;
    std::string name;

    const GroundParam& param() const { return fs.param; }
    const std::vector<face_t>& faces() const { return fs.faces; }
    std::size_t size() const { return fs.size(); }
};

namespace detail {

inline std::vector<face_t> maximal_faces(std::vector<face_t> gens) {
    std::sort(gens.begin(), gens.end(), face_less);
    gens.erase(std::unique(gens.begin(), gens.end()), gens.end());
    std::vector<face_t> out;
    for (std::size_t a = 0; a < gens.size(); ++a) {
        bool dominated = false;
        for (std::size_t b = a + 1; b < gens.size() && !dominated; ++b)
            dominated = (gens[a] & ~gens[b]) == 0;
        if (!dominated) out.push_back(gens[a]);
    }
    return out;
}

} // namespace detail

// Enumerate every subset of the generators, deduplicated, in deterministic
// order.  The sum of 2^|g| over generators is the (over-)estimate checked
// against the cap before any work happens.
inline std::vector<face_t> enumerate_faces(const std::vector<face_t>& generators,
                                           bool include_empty,
                                           std::size_t cap = kDefaultFaceCap) {
    std::size_t estimate = include_empty ? 1 : 0;
    for (face_t g : generators) {
        const int c = face_card(g);
        estimate += c >= 63 ? ~std::size_t(0) / 2 : (std::size_t(1) << c);
        if (estimate > cap)
            throw resource_error("enumerate_faces: estimated " + std::to_string(estimate) +
                                     " faces exceeds cap " + std::to_string(cap),
                                 estimate);
    }
    std::unordered_set<face_t> seen;
    seen.reserve(estimate * 2);
    for (face_t g : generators) {
        face_t sub = g;
        while (true) { // standard submask walk, including g and 0
            if (sub != 0) seen.insert(sub);
            if (sub == 0) break;
            sub = (sub - 1) & g;
        }
        if (seen.size() > cap)
            throw resource_error("enumerate_faces: face count exceeds cap " + std::to_string(cap),
                                 seen.size());
    }
    std::vector<face_t> out(seen.begin(), seen.end());
    if (include_empty && !generators.empty()) out.push_back(0);
    std::sort(out.begin(), out.end(), face_less);
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// The neighborhood complex N(G): faces are the vertex subsets with a common
// neighbor; generators are the inclusion-maximal neighborhoods N(v).
inline Complex neighborhood_complex(const Graph& g, std::string name = "",
                                    std::size_t cap = kDefaultFaceCap) {
    std::vector<face_t> gens;
    face_t ids = g.vertices;
    while (ids) {
        const std::size_t v = std::size_t(std::countr_zero(ids));
        ids &= ids - 1;
        if (g.adj[v] != 0) gens.push_back(g.adj[v]);
    }
    if (gens.empty())
        throw domain_error("neighborhood_complex: graph has no edges, complex is empty");
    Complex k;
    k.generators = detail::maximal_faces(std::move(gens));
    k.name = name.empty() ? "N(" + g.family + ")" : std::move(name);
    k.fs = FaceSet(g.param, g.table, enumerate_faces(k.generators, /*include_empty=*/true, cap));
    return k;
}

// Wrap an explicit face list as a complex, verifying downward closure.
inline Complex complex_from_faces(GroundParam p, VertexTablePtr t,
                                  std::vector<face_t> faces, std::string name) {
    Complex k;
    k.name = std::move(name);
    if (!faces.empty()) faces.push_back(0);
    k.fs = FaceSet(p, std::move(t), std::move(faces));
    if (!k.fs.downward_closed())
        throw structural_error("complex_from_faces: face set is not downward closed (" +
                               k.name + ")");
    k.generators = detail::maximal_faces(
        [&] {
            std::vector<face_t> nonzero;
            for (face_t f : k.fs.faces)
                if (f) nonzero.push_back(f);
            return nonzero;
        }());
    return k;
}

inline HasseDiagram face_poset(const Complex& k) {
    HasseDiagram h;
    h.faces = k.fs;
    h.covers = hasse_covers(h.faces);
    return h;
}

} // namespace kmorse
