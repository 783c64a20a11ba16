#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hestonhjb/greeks.hpp"

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

Setup make(int ny, int nz, const Payoff& payoff = Payoff::butterfly(50.0, 20.0)) {
    CoordinateMap map = CoordinateMap::from_params(kCaseStudy);
    Mesh mesh = Mesh::structured(build_trapezoid(kDomain, map), ny, nz);
    DiscreteOperator op = assemble(mesh, kCaseStudy, kControl, payoff, map);
    return {map, std::move(mesh), std::move(op)};
}

// A surface with prescribed nodal values at a single time (t = T).
ValueSurface synthetic_surface(const Mesh& mesh, double (*f)(double, double)) {
    ValueSurface s;
    s.mode = SolveMode::Fixed;
    s.times = {kCaseStudy.T};
    Eigen::VectorXd w(static_cast<Eigen::Index>(mesh.node_count()));
    for (std::size_t k = 0; k < mesh.node_count(); ++k)
        w[static_cast<Eigen::Index>(k)] = f(mesh.nodes()[k].y, mesh.nodes()[k].z);
    s.values = {w};
    s.controls = {Eigen::VectorXd::Constant(w.size(), -2.0)};
    return s;
}
}  // namespace

TEST_CASE("gradient recovery reproduces linear fields exactly") {
    Setup s = make(10, 8);
    ValueSurface lin = synthetic_surface(s.mesh, [](double y, double z) { return 1.5 * y - 0.7 * z; });
    auto grad = recover_gradient(lin, s.mesh, kCaseStudy.T);
    for (const auto& g : grad) {
        CHECK(g[0] == Approx(1.5).margin(1e-12));
        CHECK(g[1] == Approx(-0.7).margin(1e-12));
    }
    ValueSurface flat = synthetic_surface(s.mesh, [](double, double) { return 4.0; });
    auto zero = recover_gradient(flat, s.mesh, kCaseStudy.T);
    for (const auto& g : zero) {
        CHECK(g[0] == Approx(0.0).margin(1e-12));
        CHECK(g[1] == Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("recovered payoff gradient respects the chain-rule bound") {
    // |dw/dy| = |S Lambda'(S)| <= (K+a) for the butterfly, within 10%
    Setup s = make(48, 36);
    ValueSurface surf = solve_fixed(s.op, -2.0, 5);
    auto grad = recover_gradient(surf, s.mesh, kCaseStudy.T);
    double worst = 0.0;
    for (const auto& g : grad) worst = std::max(worst, std::abs(g[0]));
    CHECK(worst <= 1.1 * 70.0);
}

TEST_CASE("query raises on unknown time or outside points") {
    Setup s = make(8, 6);
    ValueSurface surf = solve_fixed(s.op, -2.0, 5);
    SurfaceSampler sampler(surf, s.mesh, s.map);
    CHECK_THROWS(sampler.query(50.0, 0.09, 0.123456));
    CHECK_THROWS(sampler.query(0.5, 0.09, 0.0));
    CHECK_THROWS(sampler.query(150.0, 0.09, 0.0));
    CHECK_THROWS(sampler.query(50.0, 3.5, 0.0));
}

TEST_CASE("query at a mesh node image returns the nodal value") {
    Setup s = make(12, 10);
    ValueSurface surf = solve_fixed(s.op, -2.0, 10);
    SurfaceSampler sampler(surf, s.mesh, s.map);
    for (int j : {1, 4, 9}) {
        for (int i : {0, 5, 12}) {
            int node = s.mesh.index(i, j);
            const Point2& p = s.mesh.nodes()[static_cast<std::size_t>(node)];
            auto sv = s.map.from_transformed(p.y, p.z);
            PricedSample q = sampler.query(sv[0], sv[1], 0.0);
            CHECK(q.value == Approx(surf.values.back()[node]).margin(1e-12));
        }
    }
}

TEST_CASE("final-time query reproduces the payoff up to interpolation") {
    Setup s = make(64, 48);
    ValueSurface surf = solve_fixed(s.op, -2.0, 5);
    SurfaceSampler sampler(surf, s.mesh, s.map);
    // the strike kink does not sit on a node column; piecewise-linear
    // sampling flattens the peak by at most dx * max|dLambda(S(x))/dx|
    double bound = s.mesh.dx() * 50.0;
    for (double v : {0.0, 0.5, 1.5, 3.0}) {
        PricedSample q = sampler.query(50.0, v, kCaseStudy.T);
        CHECK(q.value == Approx(20.0).margin(bound));
    }
    // away from kinks the sampling is exact up to curvature, which is zero
    PricedSample flat = sampler.query(90.0, 1.0, kCaseStudy.T);
    CHECK(flat.value == Approx(0.0).margin(1e-10));
}

TEST_CASE("query is continuous across triangle edges") {
    Setup s = make(16, 12);
    ValueSurface surf = solve_fixed(s.op, -2.0, 10);
    SurfaceSampler sampler(surf, s.mesh, s.map);
    // straddle a cell diagonal and a cell boundary
    for (double Sprobe : {37.2, 52.9, 73.4}) {
        for (double v : {0.4, 1.7}) {
            PricedSample a = sampler.query(Sprobe * (1.0 - 1e-13), v, 0.0);
            PricedSample b = sampler.query(Sprobe * (1.0 + 1e-13), v, 0.0);
            CHECK(a.value == Approx(b.value).margin(1e-10));
            CHECK(a.delta == Approx(b.delta).margin(1e-10));
        }
    }
}

TEST_CASE("butterfly deltas vanish on the far out-of-the-money left tail") {
    // K - a - margin with margin 25: fast mean reversion revives the
    // volatility, so only the far tail decays below 1e-3 at low variance
    Setup s = make(128, 96);
    ValueSurface sup = solve_hjb(s.op, kControl, 50, SolveMode::Sup);
    SurfaceSampler sampler(sup, s.mesh, s.map);
    for (double S = 1.0; S <= 5.0; S += 0.5)
        for (double v : {0.02, 0.09, 0.25})
            CHECK(std::abs(sampler.query(S, v, 0.0).delta) <= 1e-3);
}

TEST_CASE("delta integrates back to the value difference") {
    Setup s = make(96, 72);
    ValueSurface sup = solve_hjb(s.op, kControl, 60, SolveMode::Sup);
    SurfaceSampler sampler(sup, s.mesh, s.map);
    const double v = 0.75, a = 1.0, b = 50.0;
    const int n = 200;
    double h = (b - a) / n, integral = 0.0;
    for (int k = 0; k <= n; ++k) {
        double w = (k == 0 || k == n) ? 0.5 : 1.0;
        integral += w * sampler.query(a + h * k, v, 0.0).delta * h;
    }
    double diff = sampler.query(b, v, 0.0).value - sampler.query(a, v, 0.0).value;
    CHECK(integral == Approx(diff).epsilon(0.02));
}

TEST_CASE("sup and inf deltas differ at the reference point") {
    // regression for the (53.12, 0.75) comparison: the sup delta exceeds
    // the inf delta there and both sit near 0.05 for the case-study set
    Setup s = make(128, 96);
    ValueSurface sup = solve_hjb(s.op, kControl, 100, SolveMode::Sup);
    ValueSurface inf = solve_hjb(s.op, kControl, 100, SolveMode::Inf);
    SurfaceSampler ssup(sup, s.mesh, s.map), sinf(inf, s.mesh, s.map);
    PricedSample qs = ssup.query(53.12, 0.75, 0.0);
    PricedSample qi = sinf.query(53.12, 0.75, 0.0);
    CHECK(qs.delta != qi.delta);
    CHECK(qs.delta > qi.delta);
    CHECK(qs.delta == Approx(0.0544).margin(0.01));
    CHECK(qi.delta == Approx(0.0514).margin(0.01));
    CHECK(qs.value > qi.value);
}

TEST_CASE("sample grid covers the domain uniformly") {
    Setup s = make(16, 12);
    ValueSurface surf = solve_fixed(s.op, -2.0, 10);
    SurfaceSampler sampler(surf, s.mesh, s.map);
    PricedSurface grid = sampler.sample_grid(kDomain, 0.0, 21, 13);
    REQUIRE(grid.samples.size() == 21u * 13u);
    CHECK(grid.at(0, 0).S == 1.0);
    CHECK(grid.at(20, 0).S == 100.0);
    CHECK(grid.at(0, 12).v == 3.0);
    for (const auto& q : grid.samples) CHECK(q.t == 0.0);
}
