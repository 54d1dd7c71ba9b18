#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "kmorse/ground.hpp"

namespace kmorse {

// A face (simplex) is a set of vertices of the ambient universe, encoded as
// a bitmask over the VertexTable indices.  The empty face is mask 0 and has
// dimension -1.
using face_t = std::uint64_t;

// A subset of the ground set [n], bit e-1 for element e.
using elem_set_t = std::uint32_t;

inline int face_card(face_t f) { return std::popcount(f); }
inline int face_dim(face_t f) { return std::popcount(f) - 1; }

// Order faces by (cardinality, numeric mask): the deterministic enumeration
// order used everywhere (file output, chain complexes, matchings).
inline bool face_less(face_t a, face_t b) {
    const int ca = face_card(a), cb = face_card(b);
    return ca != cb ? ca < cb : a < b;
}

inline std::vector<Vertex> face_vertices(face_t f, const VertexTable& t) {
    std::vector<Vertex> out;
    out.reserve(std::size_t(face_card(f)));
    while (f) {
        const int id = std::countr_zero(f);
        out.push_back(t.vertex(std::size_t(id)));
        f &= f - 1;
    }
    return out;
}

inline face_t face_from_vertices(const std::vector<Vertex>& vs, const VertexTable& t) {
    face_t f = 0;
    for (const Vertex& v : vs) f |= face_t(1) << t.id(v);
    return f;
}

// S_sigma: the union of the face's pairs, as a subset of [n].
inline elem_set_t support(face_t f, const VertexTable& t) {
    elem_set_t s = 0;
    while (f) {
        const Vertex& v = t.vertex(std::size_t(std::countr_zero(f)));
        s |= elem_set_t(1) << (v.i - 1);
        s |= elem_set_t(1) << (v.j - 1);
        f &= f - 1;
    }
    return s;
}

// C_sigma = [n] \ S_sigma.
inline elem_set_t complement(face_t f, const VertexTable& t) {
    const elem_set_t all = (elem_set_t(1) << t.param().n) - 1;
    return all & ~support(f, t);
}

inline elem_set_t elem_set(std::initializer_list<int> elems, const GroundParam& p) {
    elem_set_t s = 0;
    for (int e : elems) s |= elem_set_t(1) << (p.wrap(e) - 1);
    return s;
}

inline std::vector<int> elem_set_members(elem_set_t s) {
    std::vector<int> out;
    while (s) {
        out.push_back(std::countr_zero(s) + 1);
        s &= s - 1;
    }
    return out;
}

// Elementwise cyclic shift of a face; cardinality is preserved.
inline face_t shift_face(face_t f, int t, bool plus, const VertexTable& table) {
    face_t out = 0;
    face_t rest = f;
    while (rest) {
        const Vertex& v = table.vertex(std::size_t(std::countr_zero(rest)));
        out |= face_t(1) << table.id(shift_vertex(v, t, plus, table.param()));
        rest &= rest - 1;
    }
    return out;
}

// Transport a face between universes: decode in `from`, shift by +t mod the
// target ground size, re-encode in `to`.  Used to carry matchings built over
// a smaller ground set into a larger one.
inline face_t transport_face(face_t f, const VertexTable& from, int t, const VertexTable& to) {
    const GroundParam& p = to.param();
    face_t out = 0;
    while (f) {
        const Vertex& v = from.vertex(std::size_t(std::countr_zero(f)));
        out |= face_t(1) << to.id(canonical_vertex(p.wrap(int(v.i) + t), p.wrap(int(v.j) + t), p));
        f &= f - 1;
    }
    return out;
}

// Face token format: space-separated "i,j" vertices in index order;
// the empty face is written "-".
inline std::string format_face(face_t f, const VertexTable& t) {
    if (f == 0) return "-";
    std::string out;
    for (const Vertex& v : face_vertices(f, t)) {
        if (!out.empty()) out += ' ';
        out += to_string(v);
    }
    return out;
}

} // namespace kmorse
