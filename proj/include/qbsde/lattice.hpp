#pragma once

#include "qbsde/exec.hpp"
#include "qbsde/model.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace qbsde {

inline constexpr std::size_t kDefaultMaxNodes = 2'000'000;
inline constexpr int kMaxLatticeDim = 6;

/// Recombining binomial lattice for d-dimensional Brownian motion. A node at
/// layer k is the tuple of up-move counts (u_1..u_d), 0 <= u_j <= k, indexed
/// lexicographically (u_1 most significant). Each node has 2^d equally
/// weighted children: bit (d-1-j) of the child index selects down (1) or up
/// (0) in component j, so child 0 is "all up".
class LatticeModel {
public:
    LatticeModel(TimeGrid grid, int d, std::size_t max_nodes = kDefaultMaxNodes);

    int d() const noexcept { return d_; }
    const TimeGrid& grid() const noexcept { return grid_; }
    int steps() const noexcept { return grid_.steps(); }
    int children() const noexcept { return 1 << d_; }
    double child_weight() const noexcept { return weight_; }
    double sqrt_dt() const noexcept { return sqrt_dt_; }

    std::size_t layer_size(int k) const noexcept { return layer_sizes_[k]; }
    std::size_t total_nodes() const noexcept { return total_nodes_; }

    void up_counts(int k, std::size_t index, std::span<int> out) const;
    std::size_t index_of(int k, std::span<const int> up) const;
    /// W_j = (2 u_j - k) sqrt(dt).
    void brownian_state(int k, std::size_t index, std::span<double> w) const;
    /// +sqrt(dt) for an up move of component j in child c, -sqrt(dt) otherwise.
    double child_increment(int c, int j) const noexcept {
        return ((c >> (d_ - 1 - j)) & 1) ? -sqrt_dt_ : sqrt_dt_;
    }
    /// Indices at layer k+1 of the children of `index` at layer k, in child order.
    void child_indices(int k, std::size_t index, std::span<std::size_t> out) const;

private:
    TimeGrid grid_;
    int d_;
    double weight_;
    double sqrt_dt_;
    std::vector<std::size_t> layer_sizes_;
    std::size_t total_nodes_ = 0;
};

LatticeModel build_lattice(const TimeGrid& grid, int d, std::size_t max_nodes = kDefaultMaxNodes);

/// Conditional expectation and martingale-representation coefficient of
/// layer-(k+1) values, per node of layer k. `child_values` holds `width`
/// values per node; `z_out` holds width x d values per node (row-major).
struct Projection {
    std::vector<double> cond;
    std::vector<double> z;
};

Projection project(const LatticeModel& lattice, int k, std::span<const double> child_values, int width,
                   ExecPolicy policy = ExecPolicy::Parallel);

/// Per-node kernel shared by every solver. Children are summed in ascending
/// child order. `z_out` may be empty to skip the regression.
void project_node(const LatticeModel& lattice, int k, std::size_t index, std::span<const double> child_values,
                  int width, std::span<double> cond_out, std::span<double> z_out, std::span<std::size_t> scratch);

namespace reference {

/// Straightforward serial projection (decodes up-counts for every child);
/// kept to cross-check the optimised kernel.
Projection project(const LatticeModel& lattice, int k, std::span<const double> child_values, int width);

} // namespace reference

} // namespace qbsde
