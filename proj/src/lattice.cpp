#include "qbsde/lattice.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace qbsde {

LatticeModel::LatticeModel(TimeGrid grid, int d, std::size_t max_nodes)
    : grid_(grid), d_(d), weight_(0.0), sqrt_dt_(std::sqrt(grid.dt())) {
    if (d < 1 || d > kMaxLatticeDim)
        throw ParameterRangeError("lattice dimension must lie in [1, " + std::to_string(kMaxLatticeDim) + "]");
    weight_ = 1.0 / static_cast<double>(1 << d);
    layer_sizes_.resize(grid.steps() + 1);
    for (int k = 0; k <= grid.steps(); ++k) {
        std::size_t size = 1;
        for (int j = 0; j < d; ++j) {
            if (size > max_nodes / static_cast<std::size_t>(k + 1) + 1) {
                size = max_nodes + 1;
                break;
            }
            size *= static_cast<std::size_t>(k + 1);
        }
        layer_sizes_[k] = size;
        total_nodes_ += size;
        if (size > max_nodes || total_nodes_ > max_nodes)
            throw NodeBudgetError("lattice needs more than " + std::to_string(max_nodes) +
                                  " nodes (engine.maxNodes); reduce grid.N or problem.d");
    }
}

LatticeModel build_lattice(const TimeGrid& grid, int d, std::size_t max_nodes) {
    return LatticeModel(grid, d, max_nodes);
}

void LatticeModel::up_counts(int k, std::size_t index, std::span<int> out) const {
    const std::size_t base = static_cast<std::size_t>(k + 1);
    for (int j = d_ - 1; j >= 0; --j) {
        out[j] = static_cast<int>(index % base);
        index /= base;
    }
}

std::size_t LatticeModel::index_of(int k, std::span<const int> up) const {
    std::size_t idx = 0;
    for (int j = 0; j < d_; ++j) idx = idx * static_cast<std::size_t>(k + 1) + static_cast<std::size_t>(up[j]);
    return idx;
}

void LatticeModel::brownian_state(int k, std::size_t index, std::span<double> w) const {
    std::array<int, kMaxLatticeDim> up{};
    up_counts(k, index, std::span<int>(up.data(), d_));
    for (int j = 0; j < d_; ++j) w[j] = (2.0 * up[j] - k) * sqrt_dt_;
}

void LatticeModel::child_indices(int k, std::size_t index, std::span<std::size_t> out) const {
    // Re-encode the up-counts in base k+2; an up move adds that digit's stride.
    const std::size_t old_base = static_cast<std::size_t>(k + 1);
    const std::size_t new_base = static_cast<std::size_t>(k + 2);
    std::array<std::size_t, kMaxLatticeDim> stride{};
    std::size_t base_index = 0;
    std::size_t s = 1;
    std::size_t rest = index;
    for (int j = d_ - 1; j >= 0; --j) {
        const std::size_t digit = rest % old_base;
        rest /= old_base;
        base_index += digit * s;
        stride[j] = s;
        s *= new_base;
    }
    const int nc = children();
    for (int c = 0; c < nc; ++c) {
        std::size_t idx = base_index;
        for (int j = 0; j < d_; ++j)
            if (!((c >> (d_ - 1 - j)) & 1)) idx += stride[j];
        out[c] = idx;
    }
}

void project_node(const LatticeModel& lattice, int k, std::size_t index, std::span<const double> child_values,
                  int width, std::span<double> cond_out, std::span<double> z_out, std::span<std::size_t> scratch) {
    const int d = lattice.d();
    const int nc = lattice.children();
    const double w = lattice.child_weight();
    lattice.child_indices(k, index, scratch);
    for (int m = 0; m < width; ++m) cond_out[m] = 0.0;
    if (!z_out.empty())
        for (int m = 0; m < width * d; ++m) z_out[m] = 0.0;
    const double dt = lattice.grid().dt();
    for (int c = 0; c < nc; ++c) {
        const double* v = child_values.data() + scratch[c] * static_cast<std::size_t>(width);
        for (int m = 0; m < width; ++m) cond_out[m] += w * v[m];
        if (!z_out.empty()) {
            for (int m = 0; m < width; ++m)
                for (int j = 0; j < d; ++j) z_out[m * d + j] += w * v[m] * lattice.child_increment(c, j) / dt;
        }
    }
}

namespace {

void check_projection_args(const LatticeModel& lattice, int k, std::span<const double> child_values, int width) {
    if (k < 0 || k >= lattice.steps()) throw std::out_of_range("project: layer out of range");
    if (width < 1) throw std::invalid_argument("project: width must be >= 1");
    if (child_values.size() != lattice.layer_size(k + 1) * static_cast<std::size_t>(width))
        throw std::invalid_argument("project: child values do not match layer k+1");
    if (!(lattice.grid().dt() > 0.0)) throw ParameterRangeError("project: time step is zero");
}

} // namespace

Projection project(const LatticeModel& lattice, int k, std::span<const double> child_values, int width,
                   ExecPolicy policy) {
    check_projection_args(lattice, k, child_values, width);
    const std::size_t count = lattice.layer_size(k);
    const int d = lattice.d();
    Projection out;
    out.cond.resize(count * width);
    out.z.resize(count * width * d);
    const long long total = static_cast<long long>(count);
    auto body = [&](long long i, std::span<std::size_t> scratch) {
        const std::size_t idx = static_cast<std::size_t>(i);
        project_node(lattice, k, idx, child_values, width, std::span<double>(out.cond).subspan(idx * width, width),
                     std::span<double>(out.z).subspan(idx * width * d, static_cast<std::size_t>(width) * d), scratch);
    };
    if (policy == ExecPolicy::Parallel) {
#pragma omp parallel
        {
            std::array<std::size_t, 1 << kMaxLatticeDim> scratch{};
#pragma omp for schedule(static)
            for (long long i = 0; i < total; ++i) body(i, scratch);
        }
    } else {
        std::array<std::size_t, 1 << kMaxLatticeDim> scratch{};
        for (long long i = 0; i < total; ++i) body(i, scratch);
    }
    return out;
}

namespace reference {

Projection project(const LatticeModel& lattice, int k, std::span<const double> child_values, int width) {
    check_projection_args(lattice, k, child_values, width);
    const int d = lattice.d();
    const int nc = 1 << d;
    const double w = 1.0 / nc;
    const double sq = std::sqrt(lattice.grid().dt());
    const double dt = lattice.grid().dt();
    const std::size_t count = lattice.layer_size(k);
    Projection out;
    out.cond.assign(count * width, 0.0);
    out.z.assign(count * width * d, 0.0);
    std::vector<int> up(d), child(d);
    for (std::size_t idx = 0; idx < count; ++idx) {
        lattice.up_counts(k, idx, up);
        for (int c = 0; c < nc; ++c) {
            for (int j = 0; j < d; ++j) {
                const bool down = (c >> (d - 1 - j)) & 1;
                child[j] = up[j] + (down ? 0 : 1);
            }
            const std::size_t cidx = lattice.index_of(k + 1, child);
            for (int m = 0; m < width; ++m) {
                const double v = child_values[cidx * width + m];
                out.cond[idx * width + m] += w * v;
                for (int j = 0; j < d; ++j) {
                    const bool down = (c >> (d - 1 - j)) & 1;
                    const double dw = down ? -sq : sq;
                    out.z[(idx * width + m) * d + j] += w * v * dw / dt;
                }
            }
        }
    }
    return out;
}

} // namespace reference

} // namespace qbsde
