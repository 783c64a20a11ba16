#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "hestonhjb/assembly.hpp"

using namespace hestonhjb;
using Catch::Approx;

namespace {
const HestonParams kCaseStudy{0.03, 7.0, 0.3, 0.7, 0.5, 0.5};
const TruncatedDomain kDomain{1.0, 100.0, 3.0};
const ControlInterval kControl{-2.4, -1.6, 2};

struct Setup {
    CoordinateMap map;
    Mesh mesh;
    DiscreteOperator op;
};

Setup make(int ny, int nz, const HestonParams& p = kCaseStudy,
           const ControlInterval& c = kControl,
           const Payoff& payoff = Payoff::butterfly(50.0, 20.0)) {
    CoordinateMap map = CoordinateMap::from_params(p);
    Mesh mesh = Mesh::structured(build_trapezoid(kDomain, map), ny, nz);
    DiscreteOperator op = assemble(mesh, p, c, payoff, map);
    return {map, std::move(mesh), std::move(op)};
}
}  // namespace

TEST_CASE("canonical coefficients at z = 0 for the case-study parameters") {
    CanonicalCoefficients c = coefficients_at(0.0, -2.0, kCaseStudy);
    CHECK(c.diffusion == 0.0);
    CHECK(c.drift_y == Approx(1.47).margin(1e-12));  // -0.03 + 7*0.3*0.5/0.7
    CHECK(c.drift_z == Approx(-2.5980762114).margin(1e-9));
    CHECK(c.reaction == 0.03);
    // lambda terms vanish at z = 0 regardless of lambda
    CHECK(coefficients_at(0.0, 5.0, kCaseStudy).drift_y == c.drift_y);
}

TEST_CASE("coefficients are affine in lambda") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> uz(0.0, 3.7);
    std::uniform_real_distribution<double> ul(-3.0, 1.0);
    for (int k = 0; k < 500; ++k) {
        double z = uz(rng), lam = ul(rng);
        CanonicalCoefficients c = coefficients_at(z, lam, kCaseStudy);
        CHECK(c.drift_y == c.drift_y_base + lam * c.drift_y_slope);
        CHECK(c.drift_z == c.drift_z_base + lam * c.drift_z_slope);
        CanonicalCoefficients c0 = coefficients_at(z, 0.0, kCaseStudy);
        CanonicalCoefficients c1 = coefficients_at(z, 1.0, kCaseStudy);
        CHECK(c.drift_y - c0.drift_y ==
              Approx(lam * (c1.drift_y - c0.drift_y)).margin(1e-13));
        CHECK(c.drift_z - c0.drift_z ==
              Approx(lam * (c1.drift_z - c0.drift_z)).margin(1e-13));
    }
}

TEST_CASE("diffusion is degenerate at the bottom and nonnegative") {
    for (double z : {0.0, 0.01, 1.0, 3.7}) {
        CanonicalCoefficients c = coefficients_at(z, -2.0, kCaseStudy);
        CHECK(c.diffusion >= 0.0);
    }
    CHECK(coefficients_at(0.0, -2.0, kCaseStudy).diffusion == 0.0);
    CHECK_THROWS(coefficients_at(-0.1, 0.0, kCaseStudy));
}

TEST_CASE("rho = 0 removes the lambda term from drift_y") {
    HestonParams p = kCaseStudy;
    p.rho = 0.0;
    for (double z : {0.1, 1.0, 3.0}) {
        CanonicalCoefficients c = coefficients_at(z, 0.0, p);
        CHECK(c.drift_y_slope == 0.0);
        CHECK(c.drift_z_slope > 0.0);
    }
}

TEST_CASE("interior rows applied to a constant return the reaction") {
    Setup s = make(12, 10);
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(s.op.n);
    Eigen::VectorXd r24 = s.op.matrix_for(-2.4) * ones;
    Eigen::VectorXd r16 = s.op.matrix_for(-1.6) * ones;
    for (int i = 0; i < s.op.n; ++i) {
        if (s.op.row_kind[static_cast<std::size_t>(i)] != RowKind::Pde &&
            s.op.row_kind[static_cast<std::size_t>(i)] != RowKind::RobinBottom)
            continue;
        double expect = s.op.mass[i] * kCaseStudy.r;
        CHECK(r24[i] == Approx(expect).margin(1e-12));
        CHECK(r16[i] == Approx(expect).margin(1e-12));
    }
}

TEST_CASE("Dirichlet rows are identity rows with payoff-at-zero data") {
    Setup s = make(8, 6);
    for (int i = 0; i < s.op.n; ++i) {
        if (s.op.row_kind[static_cast<std::size_t>(i)] != RowKind::Dirichlet) continue;
        for (DiscreteOperator::Sparse::InnerIterator it(s.op.base, i); it; ++it)
            CHECK(it.value() == (it.col() == i ? 1.0 : 0.0));
        CHECK(s.op.rhs[i] == 0.0);  // butterfly vanishes at S = 0
        CHECK(s.op.mass[i] == 0.0);
    }
}

TEST_CASE("affine decomposition of the assembled operator") {
    Setup s = make(8, 6);
    DiscreteOperator::Sparse m = s.op.matrix_for(-2.4);
    for (int row = 0; row < s.op.n; ++row) {
        DiscreteOperator::Sparse::InnerIterator mit(m, row);
        DiscreteOperator::Sparse::InnerIterator bit(s.op.base, row);
        DiscreteOperator::Sparse::InnerIterator lit(s.op.lambda_part, row);
        for (; mit; ++mit, ++bit, ++lit)
            CHECK(mit.value() == bit.value() + (-2.4) * lit.value());
    }
}

TEST_CASE("M-matrix sign structure for every control endpoint") {
    Setup s = make(24, 20);
    double dt = kCaseStudy.T / 100.0;
    for (double lam : {-2.4, -1.6}) {
        DiscreteOperator::Sparse m = s.op.matrix_for(lam);
        for (int row = 0; row < s.op.n; ++row) {
            double diag = 0.0, row_sum = 0.0, scale = 0.0;
            for (DiscreteOperator::Sparse::InnerIterator it(m, row); it; ++it) {
                scale = std::max(scale, std::abs(it.value()));
                row_sum += it.value();
                if (it.col() == row) diag = it.value();
                else CHECK(it.value() <= 1e-12 * (1.0 + std::abs(it.value())));
            }
            CHECK(diag + s.op.mass[row] / dt > 0.0);
            CHECK(row_sum >= -1e-10 * (scale + 1.0));
        }
    }
}

TEST_CASE("bottom rows: upwind direction and one-sided interior difference") {
    Setup s = make(10, 8);
    double dt = kCaseStudy.T / 100.0;
    int node = s.mesh.index(4, 0);  // away from the corners
    REQUIRE(s.op.row_kind[static_cast<std::size_t>(node)] == RowKind::RobinBottom);
    auto row = s.op.bottom_robin_row(node, dt);

    double left = 0.0, right = 0.0, up_weight = 0.0;
    for (auto [col, v] : row) {
        if (col == s.mesh.index(3, 0)) left = v;
        if (col == s.mesh.index(5, 0)) right = v;
        if (s.mesh.ij_of(col)[1] == 1) up_weight += v;
    }
    // y-advection speed 1.47 moves information rightward: left neighbor used
    CHECK(left < 0.0);
    CHECK(right == 0.0);
    // z-advection speed -2.598 differences one-sided toward z > 0
    CHECK(up_weight < 0.0);

    // constants: the stationary part returns m * r * c
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(s.op.n);
    double applied = (s.op.base * ones)[node];
    CHECK(applied == Approx(s.op.mass[node] * kCaseStudy.r).margin(1e-12));
}

TEST_CASE("kappa*gamma = 0 gives the pure decay bottom row") {
    HestonParams p = kCaseStudy;
    p.gamma = 0.0;
    Setup s = make(10, 8, p);
    int node = s.mesh.index(4, 0);
    auto row = s.op.bottom_robin_row(node, p.T / 100.0);
    // c_y = -r < 0: upwind uses the right neighbor; no z coupling remains
    double left = 0.0, right = 0.0;
    bool z_coupling = false;
    for (auto [col, v] : row) {
        if (col == s.mesh.index(3, 0)) left = v;
        if (col == s.mesh.index(5, 0)) right = v;
        if (s.mesh.ij_of(col)[1] == 1 && v != 0.0) z_coupling = true;
    }
    CHECK(left == 0.0);
    CHECK(right < 0.0);
    CHECK(!z_coupling);
}

TEST_CASE("interior consistency on a quadratic, order at least 0.9") {
    auto exact = [](double y, double z, double lam, const HestonParams& p) {
        // w = 0.3 y^2 + 0.2 z^2 + 0.1 y z + 0.4 y - 0.7 z + 2
        CanonicalCoefficients c = coefficients_at(z, lam, p);
        double w = 0.3 * y * y + 0.2 * z * z + 0.1 * y * z + 0.4 * y - 0.7 * z + 2.0;
        double wy = 0.6 * y + 0.1 * z + 0.4;
        double wz = 0.4 * z + 0.1 * y - 0.7;
        double lap = 0.6 + 0.4;
        return -c.diffusion * lap + c.drift_y * wy + c.drift_z * wz + c.reaction * w;
    };
    const double lam = -2.0;
    std::vector<double> errs;
    for (int n : {8, 16, 32}) {
        Setup s = make(n, n);
        Eigen::VectorXd w(s.op.n);
        for (int i = 0; i < s.op.n; ++i) {
            const Point2& p = s.mesh.nodes()[static_cast<std::size_t>(i)];
            w[i] = 0.3 * p.y * p.y + 0.2 * p.z * p.z + 0.1 * p.y * p.z + 0.4 * p.y -
                   0.7 * p.z + 2.0;
        }
        Eigen::VectorXd applied = s.op.matrix_for(lam) * w;
        double err = 0.0;
        for (int i = 0; i < s.op.n; ++i) {
            if (s.op.row_kind[static_cast<std::size_t>(i)] != RowKind::Pde) continue;
            const Point2& p = s.mesh.nodes()[static_cast<std::size_t>(i)];
            err = std::max(err, std::abs(applied[i] / s.op.mass[i] -
                                         exact(p.y, p.z, lam, kCaseStudy)));
        }
        errs.push_back(err);
    }
    double order1 = std::log2(errs[0] / errs[1]);
    double order2 = std::log2(errs[1] / errs[2]);
    INFO("errors " << errs[0] << " " << errs[1] << " " << errs[2]);
    CHECK(order1 >= 0.9);
    CHECK(order2 >= 0.9);
}

TEST_CASE("stabilization audit trail is recorded") {
    Setup coarse = make(8, 6);
    double total = 0.0;
    for (double v : coarse.op.stabilization_added) {
        CHECK(v >= 0.0);
        total += v;
    }
    CHECK(std::isfinite(total));
    // the degenerate bottom strip is convection dominated on a coarse mesh
    CHECK(total > 0.0);
}

TEST_CASE("terminal values sample the payoff through the inverse map") {
    Payoff b = Payoff::butterfly(50.0, 20.0);
    Setup s = make(16, 12);
    for (int i = 0; i < s.op.n; ++i) {
        const Point2& p = s.mesh.nodes()[static_cast<std::size_t>(i)];
        auto sv = s.map.from_transformed(p.y, p.z);
        CHECK(s.op.terminal[i] == evaluate(b, sv[0]));
    }
}

TEST_CASE("mesh built for different parameters is rejected") {
    CoordinateMap map = CoordinateMap::from_params(kCaseStudy);
    Mesh mesh = Mesh::structured(build_trapezoid(kDomain, map), 8, 6);
    HestonParams other = kCaseStudy;
    other.rho = -0.5;
    CoordinateMap other_map = CoordinateMap::from_params(other);
    CHECK_THROWS(assemble(mesh, other, kControl, Payoff::butterfly(50.0, 20.0), other_map));
}

TEST_CASE("assembly stays monotone for negative and zero correlation") {
    for (double rho : {-0.5, 0.0}) {
        HestonParams p = kCaseStudy;
        p.rho = rho;
        CoordinateMap map = CoordinateMap::from_params(p);
        Mesh mesh = Mesh::structured(build_trapezoid(kDomain, map), 16, 12);
        if (rho < 0.0) CHECK(mesh.diagonal() == Mesh::Diagonal::UpLeft);
        DiscreteOperator op = assemble(mesh, p, kControl, Payoff::butterfly(50.0, 20.0), map);
        Eigen::VectorXd ones = Eigen::VectorXd::Ones(op.n);
        for (double lam : {-2.4, -1.6}) {
            DiscreteOperator::Sparse m = op.matrix_for(lam);
            Eigen::VectorXd applied = m * ones;
            for (int row = 0; row < op.n; ++row) {
                for (DiscreteOperator::Sparse::InnerIterator it(m, row); it; ++it)
                    if (it.col() != row) CHECK(it.value() <= 1e-12 * (1.0 + std::abs(it.value())));
                if (op.row_kind[static_cast<std::size_t>(row)] == RowKind::Pde)
                    CHECK(applied[row] == Approx(op.mass[row] * p.r).margin(1e-12));
            }
        }
    }
}

TEST_CASE("shear wider than a cell falls back to the edge-aligned stencil") {
    HestonParams p = kCaseStudy;
    p.rho = 0.75;
    CoordinateMap map = CoordinateMap::from_params(p);
    Mesh mesh = Mesh::structured(build_trapezoid(kDomain, map), 40, 4);
    REQUIRE(std::abs(mesh.shear_step()) > mesh.dx());
    DiscreteOperator op = assemble(mesh, p, kControl, Payoff::butterfly(50.0, 20.0), map);
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(op.n);
    Eigen::VectorXd applied = op.matrix_for(-2.0) * ones;
    for (int row = 0; row < op.n; ++row) {
        if (op.row_kind[static_cast<std::size_t>(row)] != RowKind::Pde) continue;
        CHECK(applied[row] == Approx(op.mass[row] * p.r).margin(1e-12));
    }
    for (double lam : {-2.4, -1.6}) {
        DiscreteOperator::Sparse m = op.matrix_for(lam);
        for (int row = 0; row < op.n; ++row)
            for (DiscreteOperator::Sparse::InnerIterator it(m, row); it; ++it)
                if (it.col() != row) CHECK(it.value() <= 1e-12 * (1.0 + std::abs(it.value())));
    }
}

TEST_CASE("R2 rows carry the boundary-local payoff slope") {
    Setup call_setup = make(8, 6, kCaseStudy, kControl, Payoff::call(50.0));
    for (int i = 0; i < call_setup.op.n; ++i) {
        if (call_setup.op.row_kind[static_cast<std::size_t>(i)] != RowKind::NeumannY) continue;
        CHECK(call_setup.op.rhs[i] == Approx(100.0));  // e^x at S_max, slope 1
    }
    Setup fly_setup = make(8, 6);
    for (int i = 0; i < fly_setup.op.n; ++i) {
        if (fly_setup.op.row_kind[static_cast<std::size_t>(i)] != RowKind::NeumannY) continue;
        CHECK(fly_setup.op.rhs[i] == 0.0);  // flat butterfly tail
    }
}
