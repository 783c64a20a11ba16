#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hestonhjb/transform.hpp"

namespace hestonhjb {

enum class NodeTag : std::uint8_t { Interior, D, R1, R2, Rt };

inline const char* to_string(NodeTag t) {
    switch (t) {
        case NodeTag::Interior: return "interior";
        case NodeTag::D: return "D";
        case NodeTag::R1: return "R1";
        case NodeTag::R2: return "R2";
        case NodeTag::Rt: return "Rt";
    }
    return "?";
}

// Triangulation of the transformed domain. Nodes sit on a sheared lattice:
// row j holds n_y+1 nodes at z_j, uniformly spaced between the slanted
// edges, so columns are lines of constant x and every cell is a congruent
// parallelogram. Each cell is split along the diagonal that maximizes the
// minimum angle. Immutable after construction.
class Mesh {
  public:
    enum class Diagonal { UpRight, UpLeft };

    static Mesh structured(const TrapezoidDomain& trap, int n_y, int n_z) {
        if (n_y < 2 || n_z < 2)
            throw std::invalid_argument("mesh needs n_y >= 2 and n_z >= 2");
        if (!(trap.width() > 0.0) || !(trap.z_max > 0.0))
            throw std::invalid_argument("degenerate trapezoid");
        Mesh m;
        m.trap_ = trap;
        m.n_y_ = n_y;
        m.n_z_ = n_z;
        m.dx_ = trap.width() / n_y;
        m.dz_ = trap.z_max / n_z;
        // y-offset of a row relative to the one below; s > 0 leans left.
        double edge_slope = (trap.corners[3].y - trap.corners[0].y) / trap.z_max;
        m.shear_step_ = -edge_slope * m.dz_;
        m.build();
        return m;
    }

    // Uniform red refinement: every triangle splits into four by edge
    // midpoints. On this parallelogram lattice that is exactly the
    // structured mesh at doubled resolution (the cell center is the
    // midpoint of the split diagonal), so tags inherit geometrically.
    Mesh refine() const {
        Mesh m = structured(trap_, 2 * n_y_, 2 * n_z_);
        m.refinement_level_ = refinement_level_ + 1;
        return m;
    }

    int n_y() const noexcept { return n_y_; }
    int n_z() const noexcept { return n_z_; }
    double dx() const noexcept { return dx_; }
    double dz() const noexcept { return dz_; }
    double shear_step() const noexcept { return shear_step_; }
    Diagonal diagonal() const noexcept { return diagonal_; }
    int refinement_level() const noexcept { return refinement_level_; }
    const TrapezoidDomain& trapezoid() const noexcept { return trap_; }

    std::size_t node_count() const noexcept { return nodes_.size(); }
    std::size_t triangle_count() const noexcept { return triangles_.size(); }
    const std::vector<Point2>& nodes() const noexcept { return nodes_; }
    const std::vector<std::array<int, 3>>& triangles() const noexcept { return triangles_; }
    const std::vector<NodeTag>& node_tags() const noexcept { return node_tags_; }

    int index(int i, int j) const noexcept { return j * (n_y_ + 1) + i; }
    std::array<int, 2> ij_of(int idx) const noexcept {
        return {idx % (n_y_ + 1), idx / (n_y_ + 1)};
    }
    const Point2& node(int i, int j) const { return nodes_[static_cast<std::size_t>(index(i, j))]; }

    double triangle_area(std::size_t t) const {
        const auto& tri = triangles_[t];
        const Point2& p0 = nodes_[static_cast<std::size_t>(tri[0])];
        const Point2& p1 = nodes_[static_cast<std::size_t>(tri[1])];
        const Point2& p2 = nodes_[static_cast<std::size_t>(tri[2])];
        return 0.5 * ((p1.y - p0.y) * (p2.z - p0.z) - (p2.y - p0.y) * (p1.z - p0.z));
    }

    double min_angle() const {
        double best = 4.0;
        for (std::size_t t = 0; t < triangles_.size(); ++t)
            best = std::min(best, min_angle_of(t));
        return best;
    }

    double min_angle_of(std::size_t t) const {
        const auto& tri = triangles_[t];
        double m = 4.0;
        for (int k = 0; k < 3; ++k) {
            const Point2& a = nodes_[static_cast<std::size_t>(tri[k])];
            const Point2& b = nodes_[static_cast<std::size_t>(tri[(k + 1) % 3])];
            const Point2& c = nodes_[static_cast<std::size_t>(tri[(k + 2) % 3])];
            double ux = b.y - a.y, uz = b.z - a.z;
            double vx = c.y - a.y, vz = c.z - a.z;
            double dot = ux * vx + uz * vz;
            double cross = ux * vz - uz * vx;
            m = std::min(m, std::atan2(std::abs(cross), dot));
        }
        return m;
    }

    // Plain-text export, one entity per line: "id y z tag" then "id n0 n1 n2".
    void write(std::ostream& os) const {
        os << "nodes " << nodes_.size() << "\n";
        for (std::size_t k = 0; k < nodes_.size(); ++k)
            os << k << " " << nodes_[k].y << " " << nodes_[k].z << " "
               << to_string(node_tags_[k]) << "\n";
        os << "triangles " << triangles_.size() << "\n";
        for (std::size_t t = 0; t < triangles_.size(); ++t)
            os << t << " " << triangles_[t][0] << " " << triangles_[t][1] << " "
               << triangles_[t][2] << "\n";
    }

  private:
    void build() {
        nodes_.reserve(static_cast<std::size_t>((n_y_ + 1) * (n_z_ + 1)));
        node_tags_.reserve(nodes_.capacity());
        double x_min = trap_.x_min;
        for (int j = 0; j <= n_z_; ++j) {
            double z = trap_.z_max * static_cast<double>(j) / n_z_;
            double row_left = x_min - shear_step_ / dz_ * z;
            for (int i = 0; i <= n_y_; ++i) {
                double y = row_left + trap_.width() * static_cast<double>(i) / n_y_;
                nodes_.push_back({y, z});
                node_tags_.push_back(tag_of(i, j));
            }
        }

        // One diagonal orientation serves every cell (all congruent).
        diagonal_ = pick_diagonal();
        triangles_.reserve(static_cast<std::size_t>(2 * n_y_ * n_z_));
        for (int j = 0; j < n_z_; ++j) {
            for (int i = 0; i < n_y_; ++i) {
                int a = index(i, j), b = index(i + 1, j);
                int c = index(i + 1, j + 1), d = index(i, j + 1);
                if (diagonal_ == Diagonal::UpRight) {
                    triangles_.push_back({a, b, c});
                    triangles_.push_back({a, c, d});
                } else {
                    triangles_.push_back({a, b, d});
                    triangles_.push_back({b, c, d});
                }
            }
        }
    }

    NodeTag tag_of(int i, int j) const {
        // Corner precedence D > Rt > R2 > R1.
        if (i == 0) return NodeTag::D;
        if (j == 0) return NodeTag::Rt;
        if (i == n_y_) return NodeTag::R2;
        if (j == n_z_) return NodeTag::R1;
        return NodeTag::Interior;
    }

    Diagonal pick_diagonal() const {
        Point2 a{0.0, 0.0}, b{dx_, 0.0};
        Point2 c{dx_ - shear_step_, dz_}, d{-shear_step_, dz_};
        auto tri_min_angle = [](Point2 p, Point2 q, Point2 r) {
            std::array<Point2, 3> v{p, q, r};
            double m = 4.0;
            for (int k = 0; k < 3; ++k) {
                const Point2& o = v[static_cast<std::size_t>(k)];
                const Point2& u = v[static_cast<std::size_t>((k + 1) % 3)];
                const Point2& w = v[static_cast<std::size_t>((k + 2) % 3)];
                double ux = u.y - o.y, uz = u.z - o.z;
                double vx = w.y - o.y, vz = w.z - o.z;
                m = std::min(m, std::atan2(std::abs(ux * vz - uz * vx), ux * vx + uz * vz));
            }
            return m;
        };
        double up_right = std::min(tri_min_angle(a, b, c), tri_min_angle(a, c, d));
        double up_left = std::min(tri_min_angle(a, b, d), tri_min_angle(b, c, d));
        return up_right >= up_left ? Diagonal::UpRight : Diagonal::UpLeft;
    }

    TrapezoidDomain trap_{};
    int n_y_ = 0, n_z_ = 0;
    double dx_ = 0.0, dz_ = 0.0, shear_step_ = 0.0;
    Diagonal diagonal_ = Diagonal::UpRight;
    int refinement_level_ = 0;
    std::vector<Point2> nodes_;
    std::vector<std::array<int, 3>> triangles_;
    std::vector<NodeTag> node_tags_;
};

}  // namespace hestonhjb
