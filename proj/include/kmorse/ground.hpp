#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "kmorse/errors.hpp"

namespace kmorse {

// Ground-set parameter.  The ground set is [n] = {1,...,n} with n = k+4.
// All modular arithmetic on elements is mod n with representatives in
// {1,...,n}: a residue of 0 is written n.
struct GroundParam {
    int k = 0;
    int n = 4;

    GroundParam() = default;
    explicit GroundParam(int k_) : k(k_), n(k_ + 4) {
        if (k < 0) throw domain_error("GroundParam: k must be >= 0");
    }

    // Reduce x mod n into {1,...,n}.
    int wrap(long long x) const {
        long long r = x % n;
        if (r <= 0) r += n;
        return static_cast<int>(r);
    }

    bool operator==(const GroundParam&) const = default;
};

// An unordered pair from [n], stored canonically with i < j.
struct Vertex {
    std::uint8_t i = 0;
    std::uint8_t j = 0;

    auto operator<=>(const Vertex&) const = default;
};

inline Vertex canonical_vertex(int a, int b, const GroundParam& p) {
    if (a < 1 || a > p.n || b < 1 || b > p.n)
        throw domain_error("canonical_vertex: element out of range [1," +
                           std::to_string(p.n) + "]");
    if (a == b) throw domain_error("canonical_vertex: elements must differ");
    if (a > b) std::swap(a, b);
    return Vertex{static_cast<std::uint8_t>(a), static_cast<std::uint8_t>(b)};
}

// l(v) = j - i on the canonical representative.
inline int length(const Vertex& v) { return int(v.j) - int(v.i); }

// A vertex {i,j} is stable when j != i +- 1 mod n; the unstable vertices are
// exactly the cyclically consecutive pairs {s, s+1} (including {1, n}).
inline bool is_stable(const Vertex& v, const GroundParam& p) {
    if (int(v.j) - int(v.i) == 1) return false;
    if (v.i == 1 && int(v.j) == p.n) return false;
    return true;
}

// The s-th unstable vertex, s in [n]: {s, s+1} with wraparound {n, 1}.
inline Vertex unstable_vertex(int s, const GroundParam& p) {
    return canonical_vertex(p.wrap(s), p.wrap(s + 1), p);
}

inline Vertex shift_vertex(const Vertex& v, int t, bool plus, const GroundParam& p) {
    const int d = plus ? t : -t;
    return canonical_vertex(p.wrap(int(v.i) + d), p.wrap(int(v.j) + d), p);
}

inline std::string to_string(const Vertex& v) {
    return std::to_string(int(v.i)) + "," + std::to_string(int(v.j));
}

// Indexed universe of all C(n,2) vertex pairs in lexicographic order.
// Every graph and complex for a given k shares one table, so faces built
// from different graphs (subgraphs, deletions) remain directly comparable.
class VertexTable {
public:
    explicit VertexTable(GroundParam p) : param_(p) {
        const int n = p.n;
        const std::size_t count = std::size_t(n) * (n - 1) / 2;
        if (count > 64)
            throw resource_error(
                "VertexTable: " + std::to_string(count) +
                    " vertices exceed the 64-bit face encoding (k <= 7)",
                count);
        verts_.reserve(count);
        for (int i = 1; i <= n; ++i)
            for (int j = i + 1; j <= n; ++j)
                verts_.push_back(Vertex{std::uint8_t(i), std::uint8_t(j)});
    }

    const GroundParam& param() const { return param_; }
    std::size_t size() const { return verts_.size(); }
    const Vertex& vertex(std::size_t id) const { return verts_[id]; }
    const std::vector<Vertex>& vertices() const { return verts_; }

    std::size_t id(const Vertex& v) const {
        const int n = param_.n;
        const int i = v.i, j = v.j;
        return std::size_t(i - 1) * n - std::size_t(i) * (i + 1) / 2 + j - 1;
    }
    std::size_t id(int a, int b) const { return id(canonical_vertex(a, b, param_)); }

private:
    GroundParam param_;
    std::vector<Vertex> verts_;
};

using VertexTablePtr = std::shared_ptr<const VertexTable>;

inline VertexTablePtr make_vertex_table(GroundParam p) {
    return std::make_shared<const VertexTable>(p);
}

} // namespace kmorse
