#pragma once

#include <Eigen/Sparse>

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hestonhjb/mesh.hpp"
#include "hestonhjb/model.hpp"
#include "hestonhjb/payoff.hpp"
#include "hestonhjb/transform.hpp"

namespace hestonhjb {

// Coefficients of the canonical operator
//   L2 w = -diffusion(z) * Laplace(w) + drift . grad(w) + r w
// with both drift components affine in the control lambda. At z = 0 the
// diffusion and the lambda terms vanish and the drifts coincide with the
// bottom transport operator.
struct CanonicalCoefficients {
    double diffusion;
    double drift_y;
    double drift_z;
    double reaction;
    // affine split: drift = base + lambda * slope, exactly
    double drift_y_base;
    double drift_y_slope;
    double drift_z_base;
    double drift_z_slope;
};

inline CanonicalCoefficients coefficients_at(double z, double lambda,
                                             const HestonParams& p) {
    if (z < 0.0) throw std::invalid_argument("z must be nonnegative");
    double root = std::sqrt(1.0 - p.rho * p.rho);
    CanonicalCoefficients c{};
    c.diffusion = 0.5 * p.xi * root * z;
    c.reaction = p.r;
    c.drift_y_base = -p.r + p.kappa * p.gamma * p.rho / p.xi +
                     (0.5 * p.xi - p.kappa * p.rho) / root * z;
    c.drift_y_slope = -p.rho * std::sqrt(p.xi * z / root);
    c.drift_z_base = -p.kappa * p.gamma * root / p.xi + p.kappa * z;
    c.drift_z_slope = std::sqrt(p.xi * z * root);
    c.drift_y = c.drift_y_base + lambda * c.drift_y_slope;
    c.drift_z = c.drift_z_base + lambda * c.drift_z_slope;
    return c;
}

enum class RowKind : std::uint8_t { Pde, Dirichlet, NeumannY, Oblique, RobinBottom };

// Discrete operator in affine form: the matrix realizing L2^lambda plus the
// boundary operators is exactly base + lambda * lambda_part (shared sparsity
// pattern). Stationary boundary rows (Dirichlet, both Neumann types) carry
// zero mass and hold the boundary constraint; the interior and bottom rows
// are scaled by the lumped nodal mass.
struct DiscreteOperator {
    using Sparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

    int n = 0;
    Sparse base;
    Sparse lambda_part;
    Eigen::VectorXd rhs;            // boundary data, lambda-independent
    Eigen::VectorXd mass;           // time-coupling diagonal (0 on stationary rows)
    Eigen::VectorXd terminal;       // payoff sampled at node images
    std::vector<RowKind> row_kind;
    HestonParams params;
    ControlInterval control;        // interval the stabilization was sized for
    std::vector<double> stabilization_added;  // per-node clipped amount (audit)
    double corner_drift_dropped = 0.0;        // bottom-corner transport remainder

    Sparse matrix_for(double lambda) const {
        Sparse m = base;
        const double* lv = lambda_part.valuePtr();
        double* mv = m.valuePtr();
        for (int k = 0; k < m.nonZeros(); ++k) mv[k] += lambda * lv[k];
        return m;
    }

    // Full implicit-Euler row (mass/dt + operator) of a bottom node.
    std::vector<std::pair<int, double>> bottom_robin_row(int node, double dt) const {
        if (row_kind[static_cast<std::size_t>(node)] != RowKind::RobinBottom)
            throw std::invalid_argument("node is not tagged Rt");
        std::vector<std::pair<int, double>> row;
        for (Sparse::InnerIterator it(base, node); it; ++it) {
            double v = it.value();
            if (it.col() == node) v += mass[node] / dt;
            row.emplace_back(static_cast<int>(it.col()), v);
        }
        return row;
    }
};

inline void write_coo(std::ostream& os, const DiscreteOperator::Sparse& m) {
    for (int row = 0; row < m.outerSize(); ++row)
        for (DiscreteOperator::Sparse::InnerIterator it(m, row); it; ++it)
            os << it.row() << " " << it.col() << " " << it.value() << "\n";
}

namespace detail {

// Accumulates (base, lambda) coefficient pairs row by row; a single map per
// row keeps both matrices on an identical sparsity pattern.
struct PairAccumulator {
    std::vector<std::map<int, std::array<double, 2>>> rows;

    explicit PairAccumulator(std::size_t n) : rows(n) {}

    void add(int i, int j, double base_v, double lam_v = 0.0) {
        auto& e = rows[static_cast<std::size_t>(i)][j];
        e[0] += base_v;
        e[1] += lam_v;
    }
    void clear_row(int i) { rows[static_cast<std::size_t>(i)].clear(); }
};

}  // namespace detail

// Assembles the P1 discretization on the sheared lattice. Diffusion uses the
// standard stiffness form with the element-mean coefficient (the divergence
// form shifts the z-drift by the constant d(diffusion)/dz, which is folded
// back into the convection field). Convection is assembled centrally and a
// minimal symmetric edge clip, sized against both control endpoints, restores
// nonpositive off-diagonals; the clipped amounts are retained per node. The
// clip reduces to full upwinding exactly where the local Peclet number
// demands it. The control interval is required here because the M-matrix
// property is quantified over it.
inline DiscreteOperator assemble(const Mesh& mesh, const HestonParams& params,
                                 const ControlInterval& control, const Payoff& payoff,
                                 const CoordinateMap& map) {
    const int n = static_cast<int>(mesh.node_count());
    const int ny = mesh.n_y(), nz = mesh.n_z();
    const double dx = mesh.dx(), dz = mesh.dz(), s = mesh.shear_step();
    const double root = std::sqrt(1.0 - params.rho * params.rho);
    const double dvdz = 1.0 / map.z_scale;          // dv per unit dz
    const double a_prime = 0.5 * params.xi * root;  // d(diffusion)/dz

    if (std::abs(map.edge_slope() - (-mesh.shear_step() / mesh.dz())) > 1e-9 * (1.0 + std::abs(map.edge_slope())))
        throw std::invalid_argument("mesh and coordinate map disagree on the shear");

    detail::PairAccumulator acc(static_cast<std::size_t>(n));
    Eigen::VectorXd lumped = Eigen::VectorXd::Zero(n);

    // Lumped mass and stiffness.
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = mesh.triangles()[t];
        const Point2& p0 = mesh.nodes()[static_cast<std::size_t>(tri[0])];
        const Point2& p1 = mesh.nodes()[static_cast<std::size_t>(tri[1])];
        const Point2& p2 = mesh.nodes()[static_cast<std::size_t>(tri[2])];
        double area = mesh.triangle_area(t);
        if (!(area > 0.0)) throw std::runtime_error("degenerate triangle " + std::to_string(t));
        double zc = (p0.z + p1.z + p2.z) / 3.0;
        double a_mean = 0.5 * params.xi * root * zc;

        std::array<std::array<double, 2>, 3> grad{};
        const std::array<const Point2*, 3> p{&p0, &p1, &p2};
        for (int k = 0; k < 3; ++k) {
            const Point2& b = *p[static_cast<std::size_t>((k + 1) % 3)];
            const Point2& c = *p[static_cast<std::size_t>((k + 2) % 3)];
            grad[static_cast<std::size_t>(k)] = {(b.z - c.z) / (2.0 * area),
                                                 (c.y - b.y) / (2.0 * area)};
        }
        for (int kk = 0; kk < 3; ++kk) {
            lumped[tri[kk]] += area / 3.0;
            for (int ll = 0; ll < 3; ++ll) {
                double k_val = a_mean * area *
                               (grad[static_cast<std::size_t>(kk)][0] * grad[static_cast<std::size_t>(ll)][0] +
                                grad[static_cast<std::size_t>(kk)][1] * grad[static_cast<std::size_t>(ll)][1]);
                acc.add(tri[kk], tri[ll], k_val);
            }
        }
    }

    const bool up_right = mesh.diagonal() == Mesh::Diagonal::UpRight;
    const double nu = std::abs(s) / dx;  // diagonal weight of the pure-z stencil
    const double mu = 1.0 - nu;
    const bool z_pair_ok = mu >= 0.0;

    auto idx = [&](int i, int j) { return mesh.index(i, j); };
    // lattice neighbors in the +z direction used by the pure-z difference
    auto z_pair = [&](int i, int j, int dir) -> std::array<int, 2> {
        int jj = j + dir;
        int di = up_right ? dir : -dir;  // diagonal leans with the split
        return {idx(i, jj), idx(i + di, jj)};
    };

    // Interior rows: central convection for both affine parts.
    for (int j = 1; j < nz; ++j) {
        for (int i = 1; i < ny; ++i) {
            int node = idx(i, j);
            double z = mesh.nodes()[static_cast<std::size_t>(node)].z;
            double m = lumped[node];
            CanonicalCoefficients c = coefficients_at(z, 0.0, params);

            double by_b = c.drift_y_base, by_l = c.drift_y_slope;
            double bz_b = c.drift_z_base + a_prime, bz_l = c.drift_z_slope;

            if (!z_pair_ok) {
                // shear exceeds the cell width: realize d/dz along the up/down
                // edge and fold the slanted remainder into the y-drift
                by_b += bz_b * s / dz;
                by_l += bz_l * s / dz;
            }

            double cy = m / (2.0 * dx);
            acc.add(node, idx(i + 1, j), by_b * cy, by_l * cy);
            acc.add(node, idx(i - 1, j), -by_b * cy, -by_l * cy);

            double cz = m / (2.0 * dz);
            if (z_pair_ok) {
                auto up = z_pair(i, j, +1);
                auto dn = z_pair(i, j, -1);
                acc.add(node, up[0], bz_b * cz * mu, bz_l * cz * mu);
                acc.add(node, dn[0], -bz_b * cz * mu, -bz_l * cz * mu);
                if (nu > 0.0) {
                    acc.add(node, up[1], bz_b * cz * nu, bz_l * cz * nu);
                    acc.add(node, dn[1], -bz_b * cz * nu, -bz_l * cz * nu);
                }
            } else {
                acc.add(node, idx(i, j + 1), bz_b * cz, bz_l * cz);
                acc.add(node, idx(i, j - 1), -bz_b * cz, -bz_l * cz);
            }

            acc.add(node, node, m * params.r);
        }
    }

    // Boundary rows replace whatever the element loop put there.
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd mass = Eigen::VectorXd::Zero(n);
    std::vector<RowKind> kind(static_cast<std::size_t>(n), RowKind::Pde);
    double corner_dropped = 0.0;

    CanonicalCoefficients c0 = coefficients_at(0.0, 0.0, params);
    const double cy0 = c0.drift_y_base;
    const double cz0 = c0.drift_z_base;
    if (cz0 > 0.0)
        throw std::runtime_error("bottom transport points out of the domain (kappa*gamma < 0?)");

    for (int j = 0; j <= nz; ++j) {
        for (int i = 0; i <= ny; ++i) {
            int node = idx(i, j);
            NodeTag tag = mesh.node_tags()[static_cast<std::size_t>(node)];
            if (tag == NodeTag::Interior) {
                mass[node] = lumped[node];
                continue;
            }
            acc.clear_row(node);
            switch (tag) {
                case NodeTag::D:
                    kind[static_cast<std::size_t>(node)] = RowKind::Dirichlet;
                    acc.add(node, node, 1.0);
                    rhs[node] = payoff.value_at_zero;
                    break;
                case NodeTag::R1: {
                    kind[static_cast<std::size_t>(node)] = RowKind::Oblique;
                    // dV/dv = 0, one-sided along the constant-x column
                    double dv = dz * dvdz;
                    acc.add(node, node, 1.0 / dv);
                    acc.add(node, idx(i, j - 1), -1.0 / dv);
                    break;
                }
                case NodeTag::R2: {
                    kind[static_cast<std::size_t>(node)] = RowKind::NeumannY;
                    acc.add(node, node, 1.0 / dx);
                    acc.add(node, idx(i - 1, j), -1.0 / dx);
                    rhs[node] = slope_in_log_coordinate(payoff, mesh.trapezoid().x_max);
                    break;
                }
                case NodeTag::Rt: {
                    kind[static_cast<std::size_t>(node)] = RowKind::RobinBottom;
                    double m = lumped[node];
                    mass[node] = m;
                    double cy = cy0;
                    bool diag_ok = z_pair_ok && (up_right ? i + 1 <= ny : i - 1 >= 0);
                    if (cz0 != 0.0) {
                        if (diag_ok && nu > 0.0) {
                            auto up = z_pair(i, j, +1);
                            acc.add(node, up[0], m * cz0 * mu / dz);
                            acc.add(node, up[1], m * cz0 * nu / dz);
                            acc.add(node, node, -m * cz0 / dz);
                        } else {
                            // one-sided along the up edge; fold the shear into y
                            acc.add(node, idx(i, j + 1), m * cz0 / dz);
                            acc.add(node, node, -m * cz0 / dz);
                            cy += cz0 * s / dz;
                        }
                    }
                    if (cy > 0.0) {
                        if (i - 1 >= 0) {
                            acc.add(node, node, m * cy / dx);
                            acc.add(node, idx(i - 1, j), -m * cy / dx);
                        } else {
                            corner_dropped = std::max(corner_dropped, std::abs(cy));
                        }
                    } else if (cy < 0.0) {
                        if (i + 1 <= ny) {
                            acc.add(node, node, -m * cy / dx);
                            acc.add(node, idx(i + 1, j), m * cy / dx);
                        } else {
                            corner_dropped = std::max(corner_dropped, std::abs(cy));
                        }
                    }
                    acc.add(node, node, m * params.r);
                    break;
                }
                default:
                    break;
            }
        }
    }

    // Monotonicity clip: along each of the three lattice direction pairs,
    // remove the worst positive off-diagonal over both control endpoints by
    // symmetric artificial diffusion (row sums are preserved).
    std::vector<double> stab(static_cast<std::size_t>(n), 0.0);
    auto entry = [&](int i, int jcol) -> std::array<double, 2>* {
        auto& row = acc.rows[static_cast<std::size_t>(i)];
        auto it = row.find(jcol);
        return it == row.end() ? nullptr : &it->second;
    };
    auto worst = [&](const std::array<double, 2>* e) {
        if (!e) return 0.0;
        double w1 = (*e)[0] + control.lambda_min * (*e)[1];
        double w2 = (*e)[0] + control.lambda_max * (*e)[1];
        return std::max({0.0, w1, w2});
    };
    for (int j = 1; j < nz; ++j) {
        for (int i = 1; i < ny; ++i) {
            int node = idx(i, j);
            int d = up_right ? 1 : -1;
            std::array<std::array<int, 2>, 3> pairs = {{
                {idx(i + 1, j), idx(i - 1, j)},
                {idx(i, j + 1), idx(i, j - 1)},
                {idx(i + d, j + 1), idx(i - d, j - 1)},
            }};
            for (const auto& pr : pairs) {
                auto* ep = entry(node, pr[0]);
                auto* eq = entry(node, pr[1]);
                double e = std::max(worst(ep), worst(eq));
                if (e > 0.0) {
                    if (!ep) { acc.add(node, pr[0], 0.0); ep = entry(node, pr[0]); eq = entry(node, pr[1]); }
                    if (!eq) { acc.add(node, pr[1], 0.0); ep = entry(node, pr[0]); eq = entry(node, pr[1]); }
                    (*ep)[0] -= e;
                    (*eq)[0] -= e;
                    entry(node, node)->at(0) += 2.0 * e;
                    stab[static_cast<std::size_t>(node)] += 2.0 * e;
                }
            }
        }
    }

    // Entrywise verification of the M-matrix sign structure.
    for (int row = 0; row < n; ++row) {
        for (const auto& [col, e] : acc.rows[static_cast<std::size_t>(row)]) {
            if (col == row) continue;
            for (double lam : {control.lambda_min, control.lambda_max}) {
                double v = e[0] + lam * e[1];
                if (v > 1e-12 * (1.0 + std::abs(e[0])))
                    throw std::runtime_error("unresolvable M-matrix violation at row " +
                                             std::to_string(row) + ", col " + std::to_string(col));
            }
        }
    }

    DiscreteOperator op;
    op.n = n;
    op.params = params;
    op.control = control;
    op.rhs = std::move(rhs);
    op.mass = std::move(mass);
    op.row_kind = std::move(kind);
    op.stabilization_added = std::move(stab);
    op.corner_drift_dropped = corner_dropped;

    op.terminal.resize(n);
    for (int k = 0; k < n; ++k) {
        const Point2& pt = mesh.nodes()[static_cast<std::size_t>(k)];
        auto sv = map.from_transformed(pt.y, pt.z);
        op.terminal[k] = evaluate(payoff, sv[0]);
    }

    std::vector<Eigen::Triplet<double>> tb, tl;
    for (int row = 0; row < n; ++row) {
        auto& r = acc.rows[static_cast<std::size_t>(row)];
        r[row];  // keep the diagonal in the pattern
        for (const auto& [col, e] : r) {
            tb.emplace_back(row, col, e[0]);
            tl.emplace_back(row, col, e[1]);
        }
    }
    op.base.resize(n, n);
    op.lambda_part.resize(n, n);
    op.base.setFromTriplets(tb.begin(), tb.end(), [](double, double b) { return b; });
    op.lambda_part.setFromTriplets(tl.begin(), tl.end(), [](double, double b) { return b; });
    return op;
}

}  // namespace hestonhjb
