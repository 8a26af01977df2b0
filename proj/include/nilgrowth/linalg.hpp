#pragma once

#include <optional>
#include <vector>

#include "nilgrowth/rational.hpp"

namespace nilgrowth::linalg {

using RatVec = std::vector<Rat>;
using RatMat = std::vector<RatVec>;  // row-major

// Reduced row echelon form in place; returns pivot column per pivot row.
inline std::vector<int> rref(RatMat& m) {
    std::vector<int> pivots;
    if (m.empty()) return pivots;
    const int rows = static_cast<int>(m.size()), cols = static_cast<int>(m[0].size());
    int r = 0;
    for (int c = 0; c < cols && r < rows; ++c) {
        int p = -1;
        for (int i = r; i < rows; ++i)
            if (m[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] != 0) { p = i; break; }
        if (p < 0) continue;
        std::swap(m[static_cast<std::size_t>(p)], m[static_cast<std::size_t>(r)]);
        const Rat inv_pivot = 1 / m[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        for (int j = c; j < cols; ++j) m[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)] *= inv_pivot;
        for (int i = 0; i < rows; ++i) {
            if (i == r) continue;
            const Rat f = m[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
            if (f == 0) continue;
            for (int j = c; j < cols; ++j)
                m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -= f * m[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)];
        }
        pivots.push_back(c);
        ++r;
    }
    return pivots;
}

inline int rank(RatMat m) { return static_cast<int>(rref(m).size()); }

// Solves A x = b exactly.  Returns nullopt when inconsistent.
inline std::optional<RatVec> solve(const RatMat& a, const RatVec& b) {
    if (a.empty()) return RatVec{};
    const int rows = static_cast<int>(a.size()), cols = static_cast<int>(a[0].size());
    RatMat aug = a;
    for (int i = 0; i < rows; ++i) aug[static_cast<std::size_t>(i)].push_back(b[static_cast<std::size_t>(i)]);
    const std::vector<int> piv = rref(aug);
    for (std::size_t i = 0; i < piv.size(); ++i)
        if (piv[i] == cols) return std::nullopt;  // pivot in the b column
    RatVec x(static_cast<std::size_t>(cols), Rat(0));
    for (std::size_t i = 0; i < piv.size(); ++i)
        x[static_cast<std::size_t>(piv[i])] = aug[i][static_cast<std::size_t>(cols)];
    return x;
}

// A nonzero kernel vector of the matrix whose ROWS are the given vectors
// (i.e. coefficients c with sum c_i row_i = 0), or nullopt if independent.
inline std::optional<RatVec> row_dependency(const RatMat& rows_in) {
    if (rows_in.empty()) return std::nullopt;
    const int n = static_cast<int>(rows_in.size());
    // Transpose: columns are the vectors; kernel of the transposed matrix.
    const int dim = static_cast<int>(rows_in[0].size());
    RatMat m(static_cast<std::size_t>(dim), RatVec(static_cast<std::size_t>(n), Rat(0)));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < dim; ++j) m[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = rows_in[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    RatMat red = m;
    const std::vector<int> piv = rref(red);
    if (static_cast<int>(piv.size()) == n) return std::nullopt;
    // First free column gives a kernel vector.
    std::vector<bool> is_pivot(static_cast<std::size_t>(n), false);
    for (int c : piv) is_pivot[static_cast<std::size_t>(c)] = true;
    int free_col = -1;
    for (int c = 0; c < n; ++c)
        if (!is_pivot[static_cast<std::size_t>(c)]) { free_col = c; break; }
    RatVec k(static_cast<std::size_t>(n), Rat(0));
    k[static_cast<std::size_t>(free_col)] = 1;
    for (std::size_t i = 0; i < piv.size(); ++i)
        k[static_cast<std::size_t>(piv[i])] = -red[i][static_cast<std::size_t>(free_col)];
    return k;
}

inline Rat det(RatMat m) {
    const int n = static_cast<int>(m.size());
    Rat d(1);
    for (int c = 0; c < n; ++c) {
        int p = -1;
        for (int i = c; i < n; ++i)
            if (m[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] != 0) { p = i; break; }
        if (p < 0) return Rat(0);
        if (p != c) {
            std::swap(m[static_cast<std::size_t>(p)], m[static_cast<std::size_t>(c)]);
            d = -d;
        }
        const Rat pivot = m[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
        d *= pivot;
        for (int i = c + 1; i < n; ++i) {
            const Rat f = m[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] / pivot;
            if (f == 0) continue;
            for (int j = c; j < n; ++j)
                m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -= f * m[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)];
        }
    }
    return d;
}

}  // namespace nilgrowth::linalg
