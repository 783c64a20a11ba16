#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "hestonhjb/hjb_solver.hpp"
#include "hestonhjb/mesh.hpp"
#include "hestonhjb/transform.hpp"

namespace hestonhjb {

// Per-node (dw/dy, dw/dz): piecewise-constant P1 gradients averaged to the
// nodes with area weights. Exact for linear fields.
inline std::vector<std::array<double, 2>> recover_gradient(const ValueSurface& surface,
                                                           const Mesh& mesh, double t) {
    const Eigen::VectorXd& w = surface.values[surface.time_index(t)];
    std::vector<std::array<double, 2>> grad(mesh.node_count(), {0.0, 0.0});
    std::vector<double> weight(mesh.node_count(), 0.0);
    for (std::size_t tri_idx = 0; tri_idx < mesh.triangle_count(); ++tri_idx) {
        const auto& tri = mesh.triangles()[tri_idx];
        double area = mesh.triangle_area(tri_idx);
        double gy = 0.0, gz = 0.0;
        for (int k = 0; k < 3; ++k) {
            const Point2& b = mesh.nodes()[static_cast<std::size_t>(tri[(k + 1) % 3])];
            const Point2& c = mesh.nodes()[static_cast<std::size_t>(tri[(k + 2) % 3])];
            double wk = w[tri[k]];
            gy += wk * (b.z - c.z) / (2.0 * area);
            gz += wk * (c.y - b.y) / (2.0 * area);
        }
        for (int k = 0; k < 3; ++k) {
            auto node = static_cast<std::size_t>(tri[k]);
            grad[node][0] += area * gy;
            grad[node][1] += area * gz;
            weight[node] += area;
        }
    }
    for (std::size_t k = 0; k < grad.size(); ++k) {
        grad[k][0] /= weight[k];
        grad[k][1] /= weight[k];
    }
    return grad;
}

struct PricedSample {
    double S;
    double v;
    double t;
    double value;
    double delta;
    double control;
};

// Uniformly sampled (S,v) view of a solved surface.
struct PricedSurface {
    int n_s = 0;
    int n_v = 0;
    std::vector<PricedSample> samples;  // v-major: sample(iS, iv) = samples[iv*n_s + iS]

    const PricedSample& at(int is, int iv) const {
        return samples[static_cast<std::size_t>(iv * n_s + is)];
    }
};

// Point evaluation on a solved trajectory: locate the containing triangle of
// the mapped point, interpolate the value and the recovered nodal gradient
// barycentrically, and convert dw/dy to Delta. Gradients are cached per
// queried time.
class SurfaceSampler {
  public:
    SurfaceSampler(const ValueSurface& surface, const Mesh& mesh, const CoordinateMap& map)
        : surface_(surface), mesh_(mesh), map_(map) {}

    PricedSample query(double S, double v, double t) const {
        const TrapezoidDomain& trap = mesh_.trapezoid();
        double x = std::log(S);
        const double tol = 1e-9;
        if (!(S > 0.0) || x < trap.x_min - tol || x > trap.x_max + tol || v < -tol ||
            v * map_.z_scale > trap.z_max + tol)
            throw std::invalid_argument("query point outside the truncated domain");

        std::size_t k = surface_.time_index(t, 1e-9);
        const Eigen::VectorXd& w = surface_.values[k];
        const Eigen::VectorXd& ctrl = surface_.controls[k];
        const auto& grad = gradients(k, t);

        // lattice coordinates: columns are constant-x lines
        double fu = (x - trap.x_min) / trap.width() * mesh_.n_y();
        double fv = v * map_.z_scale / trap.z_max * mesh_.n_z();
        int ci = std::clamp(static_cast<int>(std::floor(fu)), 0, mesh_.n_y() - 1);
        int cj = std::clamp(static_cast<int>(std::floor(fv)), 0, mesh_.n_z() - 1);
        double lx = fu - ci, lz = fv - cj;

        std::array<int, 3> tri{};
        std::array<double, 3> bary{};
        if (mesh_.diagonal() == Mesh::Diagonal::UpRight) {
            // diagonal from (0,0) to (1,1) in cell coordinates
            if (lx >= lz) {
                tri = {mesh_.index(ci, cj), mesh_.index(ci + 1, cj), mesh_.index(ci + 1, cj + 1)};
                bary = {1.0 - lx, lx - lz, lz};
            } else {
                tri = {mesh_.index(ci, cj), mesh_.index(ci + 1, cj + 1), mesh_.index(ci, cj + 1)};
                bary = {1.0 - lz, lx, lz - lx};
            }
        } else {
            // diagonal from (1,0) to (0,1)
            if (lx + lz <= 1.0) {
                tri = {mesh_.index(ci, cj), mesh_.index(ci + 1, cj), mesh_.index(ci, cj + 1)};
                bary = {1.0 - lx - lz, lx, lz};
            } else {
                tri = {mesh_.index(ci + 1, cj), mesh_.index(ci + 1, cj + 1), mesh_.index(ci, cj + 1)};
                bary = {1.0 - lz, lx + lz - 1.0, 1.0 - lx};
            }
        }

        double value = 0.0, gy = 0.0;
        for (int m = 0; m < 3; ++m) {
            value += bary[static_cast<std::size_t>(m)] * w[tri[static_cast<std::size_t>(m)]];
            gy += bary[static_cast<std::size_t>(m)] *
                  grad[static_cast<std::size_t>(tri[static_cast<std::size_t>(m)])][0];
        }
        int nearest = tri[static_cast<std::size_t>(
            std::max_element(bary.begin(), bary.end()) - bary.begin())];
        return {S, v, t, value, map_.delta_from_gradient(gy, S), ctrl[nearest]};
    }

    PricedSurface sample_grid(const TruncatedDomain& domain, double t, int n_s = 101,
                              int n_v = 61) const {
        PricedSurface out;
        out.n_s = n_s;
        out.n_v = n_v;
        out.samples.reserve(static_cast<std::size_t>(n_s) * static_cast<std::size_t>(n_v));
        for (int iv = 0; iv < n_v; ++iv) {
            double v = domain.v_max * iv / (n_v - 1);
            for (int is = 0; is < n_s; ++is) {
                double S = domain.s_min + (domain.s_max - domain.s_min) * is / (n_s - 1);
                out.samples.push_back(query(S, v, t));
            }
        }
        return out;
    }

  private:
    const std::vector<std::array<double, 2>>& gradients(std::size_t time_idx, double t) const {
        auto it = gradient_cache_.find(time_idx);
        if (it == gradient_cache_.end())
            it = gradient_cache_.emplace(time_idx, recover_gradient(surface_, mesh_, t)).first;
        return it->second;
    }

    const ValueSurface& surface_;
    const Mesh& mesh_;
    const CoordinateMap& map_;
    mutable std::map<std::size_t, std::vector<std::array<double, 2>>> gradient_cache_;
};

}  // namespace hestonhjb
