#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "kmorse/complex.hpp"
#include "kmorse/errors.hpp"
#include "kmorse/simplex.hpp"

namespace kmorse {

using big_int = boost::multiprecision::cpp_int;

enum class Ring { gf2, integers };

inline std::string to_string(Ring r) { return r == Ring::gf2 ? "gf2" : "z"; }

// Reduced Betti numbers per dimension, with invariant-factor torsion over Z.
struct BettiVector {
    Ring ring = Ring::gf2;
    std::vector<std::size_t> reduced;             // b~_0 .. b~_maxdim
    std::vector<std::vector<std::string>> torsion; // per dim, factors > 1 (Z only)

    bool torsion_free() const {
        for (const auto& t : torsion)
            if (!t.empty()) return false;
        return true;
    }

    bool operator==(const BettiVector&) const = default;
};

// Simplicial chain complex of a downward-closed face set, augmented: the
// empty face spans C_{-1} and dimension-0 boundaries map to it.  Columns
// carry incidence signs from the sorted-vertex orientation.
struct ChainComplex {
    int max_dim = -1;
    std::vector<std::size_t> n_faces; // per dim 0..max_dim
    // boundary[d]: one column per d-face; entries (row in dim d-1, sign).
    // boundary[0] is the augmentation (single row 0).
    std::vector<std::vector<std::vector<std::pair<std::uint32_t, int>>>> boundary;

    std::size_t boundary_nnz(int d) const {
        if (d < 0 || d > max_dim) return 0;
        std::size_t n = 0;
        for (const auto& col : boundary[std::size_t(d)]) n += col.size();
        return n;
    }
};

inline ChainComplex boundary_matrices(const FaceSet& fam) {
    if (!fam.downward_closed())
        throw structural_error("boundary_matrices: face set is not downward closed");
    ChainComplex cc;
    std::vector<std::vector<face_t>> by_dim; // dim d at index d
    for (face_t f : fam.faces) {
        if (f == 0) continue;
        const int d = face_dim(f);
        if (int(by_dim.size()) <= d) by_dim.resize(std::size_t(d) + 1);
        by_dim[std::size_t(d)].push_back(f); // fam.faces already sorted
    }
    cc.max_dim = int(by_dim.size()) - 1;
    cc.n_faces.resize(by_dim.size());
    cc.boundary.resize(by_dim.size());

    std::unordered_map<face_t, std::uint32_t> row_of;
    for (int d = 0; d <= cc.max_dim; ++d) {
        const auto& faces = by_dim[std::size_t(d)];
        cc.n_faces[std::size_t(d)] = faces.size();
        auto& cols = cc.boundary[std::size_t(d)];
        cols.resize(faces.size());
        for (std::size_t j = 0; j < faces.size(); ++j) {
            if (d == 0) {
                cols[j] = {{0u, 1}}; // augmentation
                continue;
            }
            face_t rest = faces[j];
            int pos = 0;
            auto& col = cols[j];
            col.reserve(std::size_t(d) + 1);
            while (rest) {
                const face_t bit = rest & ~(rest - 1);
                rest &= rest - 1;
                const face_t facet = faces[j] & ~bit;
                col.emplace_back(row_of.at(facet), (pos % 2 == 0) ? 1 : -1);
                ++pos;
            }
            std::sort(col.begin(), col.end());
        }
        row_of.clear();
        if (d + 1 <= cc.max_dim) {
            const auto& next = by_dim[std::size_t(d)];
            for (std::uint32_t i = 0; i < next.size(); ++i) row_of.emplace(next[i], i);
        }
    }

    // dd = 0, verified exactly over Z for every composable pair.
    for (int d = 1; d <= cc.max_dim; ++d) {
        const auto& cols = cc.boundary[std::size_t(d)];
        const auto& prev = cc.boundary[std::size_t(d) - 1];
        std::vector<std::pair<std::uint32_t, long long>> acc;
        for (const auto& col : cols) {
            acc.clear();
            for (const auto& [r, s] : col)
                for (const auto& [rr, ss] : prev[r]) acc.emplace_back(rr, (long long)s * ss);
            std::sort(acc.begin(), acc.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            long long sum = 0;
            for (std::size_t i = 0; i <= acc.size(); ++i) {
                if (i < acc.size() && (i == 0 || acc[i].first == acc[i - 1].first)) {
                    sum += acc[i].second;
                    continue;
                }
                if (sum != 0) throw structural_error("boundary_matrices: dd != 0");
                sum = i < acc.size() ? acc[i].second : 0;
            }
        }
    }
    return cc;
}

namespace detail {

// Column-pivot elimination over GF(2); columns are sorted row-index lists.
inline std::size_t gf2_rank(std::vector<std::vector<std::uint32_t>> cols) {
    std::unordered_map<std::uint32_t, std::uint32_t> owner; // pivot row -> column
    std::size_t rank = 0;
    std::vector<std::uint32_t> tmp;
    for (std::uint32_t j = 0; j < cols.size(); ++j) {
        auto& col = cols[j];
        while (!col.empty()) {
            const std::uint32_t pivot = col.back();
            auto it = owner.find(pivot);
            if (it == owner.end()) {
                owner.emplace(pivot, j);
                ++rank;
                break;
            }
            const auto& other = cols[it->second];
            tmp.clear();
            std::set_symmetric_difference(col.begin(), col.end(), other.begin(), other.end(),
                                          std::back_inserter(tmp));
            col.swap(tmp);
        }
    }
    return rank;
}

struct snf_overflow : std::runtime_error {
    snf_overflow() : std::runtime_error("snf: int64 overflow") {}
};

template <class I> inline I checked_mul(const I& a, const I& b) {
    if constexpr (std::is_same_v<I, long long>) {
        long long r;
        if (__builtin_mul_overflow(a, b, &r)) throw snf_overflow();
        return r;
    } else {
        return a * b;
    }
}

template <class I> inline I checked_sub(const I& a, const I& b) {
    if constexpr (std::is_same_v<I, long long>) {
        long long r;
        if (__builtin_sub_overflow(a, b, &r)) throw snf_overflow();
        return r;
    } else {
        return a - b;
    }
}

template <class I> inline I abs_of(const I& a) {
    using std::abs;
    return a < 0 ? I(-a) : a;
}

// Diagonalisation by alternating row and column elimination around a
// minimal pivot; divisibility of the invariant factors is restored at the
// end by pairwise gcd/lcm sweeps (valid for diagonal matrices).
template <class I>
std::vector<I> snf_diagonal(std::size_t rows, std::size_t cols,
                            const std::vector<std::tuple<std::uint32_t, std::uint32_t, long long>>& entries) {
    std::vector<std::map<std::uint32_t, I>> row(rows);
    std::vector<std::set<std::uint32_t>> col_rows(cols);
    for (const auto& [r, c, v] : entries) {
        if (v == 0) continue;
        row[r][c] = I(v);
        col_rows[c].insert(r);
    }

    auto erase_entry = [&](std::uint32_t r, std::uint32_t c) {
        row[r].erase(c);
        col_rows[c].erase(r);
    };
    auto set_entry = [&](std::uint32_t r, std::uint32_t c, const I& v) {
        if (v == 0) {
            erase_entry(r, c);
        } else {
            row[r][c] = v;
            col_rows[c].insert(r);
        }
    };

    std::vector<I> diag;
    std::set<std::uint32_t> live_rows;
    for (std::uint32_t r = 0; r < rows; ++r)
        if (!row[r].empty()) live_rows.insert(r);

    while (!live_rows.empty()) {
        // Pivot: minimal |value|, then smallest fill estimate.
        std::uint32_t pr = 0, pc = 0;
        I pv = 0;
        std::size_t best_fill = std::numeric_limits<std::size_t>::max();
        for (std::uint32_t r : live_rows) {
            for (const auto& [c, v] : row[r]) {
                const I a = abs_of(v);
                if (pv != 0 && a > abs_of(pv)) continue;
                const std::size_t fill = (row[r].size() - 1) * (col_rows[c].size() - 1);
                if (pv == 0 || a < abs_of(pv) || fill < best_fill) {
                    pr = r;
                    pc = c;
                    pv = v;
                    best_fill = fill;
                }
            }
        }

        bool changed = true;
        while (changed) {
            changed = false;
            // Clear the pivot column with row operations.
            for (auto it = col_rows[pc].begin(); it != col_rows[pc].end();) {
                const std::uint32_t r = *it++;
                if (r == pr) continue;
                const I v = row[r][pc];
                const I q = v / pv; // C++ truncating division
                if (q != 0) {
                    for (const auto& [c, pval] : std::map<std::uint32_t, I>(row[pr])) {
                        auto jt = row[r].find(c);
                        const I cur = jt == row[r].end() ? I(0) : jt->second;
                        set_entry(r, c, checked_sub(cur, checked_mul(q, pval)));
                    }
                    if (row[r].empty()) live_rows.erase(r);
                }
                auto rt = row[r].find(pc);
                if (rt != row[r].end() && rt->second != 0) {
                    pr = r; // smaller remainder becomes the pivot
                    pv = rt->second;
                    changed = true;
                    break;
                }
            }
            if (changed) continue;
            // Clear the pivot row with column operations.
            for (auto it = row[pr].begin(); it != row[pr].end();) {
                const std::uint32_t c = it->first;
                ++it;
                if (c == pc) continue;
                const I v = row[pr][c];
                const I q = v / pv;
                if (q != 0) {
                    for (const std::uint32_t r : std::set<std::uint32_t>(col_rows[pc])) {
                        auto jt = row[r].find(c);
                        const I cur = jt == row[r].end() ? I(0) : jt->second;
                        set_entry(r, c, checked_sub(cur, checked_mul(q, row[r][pc])));
                        if (row[r].empty()) live_rows.erase(r);
                    }
                }
                auto rt = row[pr].find(c);
                if (rt != row[pr].end() && rt->second != 0) {
                    pc = c;
                    pv = rt->second;
                    changed = true;
                    break;
                }
            }
        }

        diag.push_back(abs_of(pv));
        erase_entry(pr, pc);
        if (row[pr].empty()) live_rows.erase(pr);
    }

    // Normalise to the divisibility chain d1 | d2 | ...
    bool stable = false;
    while (!stable) {
        stable = true;
        for (std::size_t i = 0; i + 1 < diag.size(); ++i) {
            for (std::size_t j = i + 1; j < diag.size(); ++j) {
                if (diag[j] % diag[i] == 0) continue;
                using boost::multiprecision::gcd;
                using std::gcd;
                const I g = gcd(diag[i], diag[j]);
                diag[j] = checked_mul(I(diag[i] / g), diag[j]);
                diag[i] = g;
                stable = false;
            }
        }
    }
    std::sort(diag.begin(), diag.end());
    return diag;
}

} // namespace detail

// Sparse integer matrix in triplet form; entries outside int64 are not
// representable as input, but intermediate growth is handled.
struct SparseIntMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::tuple<std::uint32_t, std::uint32_t, long long>> entries;
};

// Invariant factors d1 | d2 | ... of an integer matrix.  The int64 path is
// overflow-checked; on overflow the computation restarts with arbitrary
// precision, never wrapping silently.
inline std::vector<big_int> smith_normal_form(const SparseIntMatrix& m) {
    try {
        const auto d = detail::snf_diagonal<long long>(m.rows, m.cols, m.entries);
        std::vector<big_int> out;
        out.reserve(d.size());
        for (long long v : d) out.emplace_back(v);
        return out;
    } catch (const detail::snf_overflow&) {
        return detail::snf_diagonal<big_int>(m.rows, m.cols, m.entries);
    }
}

struct BettiOptions {
    // Z-path refuses boundary matrices above this many nonzeros.
    std::size_t snf_nnz_cap = 20'000;
};

// Reduced Betti numbers of a chain complex over the requested ring.  The
// unreduced Euler characteristic identity is checked on every call.
inline BettiVector betti(const ChainComplex& cc, Ring ring, const BettiOptions& opts = {}) {
    BettiVector out;
    out.ring = ring;
    const int md = cc.max_dim;
    out.reduced.assign(std::size_t(std::max(0, md + 1)), 0);
    out.torsion.assign(out.reduced.size(), {});
    if (md < 0) return out;

    std::vector<std::size_t> rank(std::size_t(md) + 2, 0); // rank[d] = rank of boundary_d; rank[md+1]=0
    if (ring == Ring::gf2) {
        for (int d = 0; d <= md; ++d) {
            std::vector<std::vector<std::uint32_t>> cols(cc.boundary[std::size_t(d)].size());
            for (std::size_t j = 0; j < cols.size(); ++j)
                for (const auto& [r, s] : cc.boundary[std::size_t(d)][j])
                    if (s % 2 != 0) cols[j].push_back(r);
            rank[std::size_t(d)] = detail::gf2_rank(std::move(cols));
        }
    } else {
        for (int d = 0; d <= md; ++d) {
            SparseIntMatrix m;
            m.rows = d == 0 ? 1 : cc.n_faces[std::size_t(d) - 1];
            m.cols = cc.n_faces[std::size_t(d)];
            for (std::uint32_t j = 0; j < m.cols; ++j)
                for (const auto& [r, s] : cc.boundary[std::size_t(d)][j])
                    m.entries.emplace_back(r, j, s);
            if (m.entries.size() > opts.snf_nnz_cap)
                throw resource_error("betti: boundary matrix in dim " + std::to_string(d) +
                                         " has " + std::to_string(m.entries.size()) +
                                         " nonzeros, above the Z cap " +
                                         std::to_string(opts.snf_nnz_cap),
                                     m.entries.size());
            const auto factors = smith_normal_form(m);
            rank[std::size_t(d)] = factors.size();
            if (d >= 1) {
                auto& tor = out.torsion[std::size_t(d) - 1];
                for (const auto& f : factors)
                    if (f > 1) tor.push_back(f.str());
            }
        }
    }

    for (int d = 0; d <= md; ++d) {
        const std::size_t n = cc.n_faces[std::size_t(d)];
        const std::size_t killed = rank[std::size_t(d)] + rank[std::size_t(d) + 1];
        if (killed > n) throw structural_error("betti: negative Betti number");
        out.reduced[std::size_t(d)] = n - killed;
    }

    // Euler-Poincare identity on unreduced numbers, exact.
    long long chi_faces = 0, chi_betti = 1; // unreduced b_0 = reduced + 1
    for (int d = 0; d <= md; ++d) {
        const long long sgn = d % 2 == 0 ? 1 : -1;
        chi_faces += sgn * (long long)cc.n_faces[std::size_t(d)];
        chi_betti += sgn * (long long)out.reduced[std::size_t(d)];
    }
    if (chi_faces != chi_betti)
        throw structural_error("betti: Euler-Poincare identity failed");
    return out;
}

inline BettiVector betti(const FaceSet& fam, Ring ring, const BettiOptions& opts = {}) {
    return betti(boundary_matrices(fam), ring, opts);
}

} // namespace kmorse
