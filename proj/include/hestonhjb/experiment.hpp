#pragma once

#include <json.hpp>

#include <array>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hestonhjb/assembly.hpp"
#include "hestonhjb/greeks.hpp"
#include "hestonhjb/hjb_solver.hpp"
#include "hestonhjb/mesh.hpp"
#include "hestonhjb/model.hpp"
#include "hestonhjb/payoff.hpp"
#include "hestonhjb/report.hpp"
#include "hestonhjb/transform.hpp"

namespace hestonhjb {

enum class ExperimentKind { ValueSurface, ControlMap, LinearCompare, IntervalSweep, DeltaMap };

inline std::string to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::ValueSurface: return "value_surface";
        case ExperimentKind::ControlMap: return "control_map";
        case ExperimentKind::LinearCompare: return "linear_compare";
        case ExperimentKind::IntervalSweep: return "interval_sweep";
        case ExperimentKind::DeltaMap: return "delta_map";
    }
    return "?";
}

inline ExperimentKind experiment_from_string(const std::string& s) {
    if (s == "value_surface") return ExperimentKind::ValueSurface;
    if (s == "control_map") return ExperimentKind::ControlMap;
    if (s == "linear_compare") return ExperimentKind::LinearCompare;
    if (s == "interval_sweep") return ExperimentKind::IntervalSweep;
    if (s == "delta_map") return ExperimentKind::DeltaMap;
    throw std::invalid_argument("unknown experiment \"" + s + "\"");
}

// Full description of one experiment run; round-trips losslessly through
// its JSON form.
struct ExperimentConfig {
    HestonParams params{0.03, 7.0, 0.3, 0.7, 0.5, 0.5};
    TruncatedDomain domain{1.0, 100.0, 3.0};
    Payoff payoff = Payoff::butterfly(50.0, 20.0);
    ControlInterval control{-2.4, -1.6, 2};
    int n_y = 128;
    int n_z = 96;
    int refinements = 0;
    int steps = 100;
    ExperimentKind experiment = ExperimentKind::ValueSurface;
    std::vector<std::array<double, 2>> query_points{
        {53.12, 0.75}, {51.76, 2.84}, {51.43, 0.23}, {2.11, 2.06}};
    double sweep_center = -1.25;
    std::vector<double> sweep_diameters{0.0, 0.5, 1.0, 1.5, 2.0, 2.5};
    double compare_lambda = -2.4;
    double compare_time = 0.39;
    int sample_n_s = 101;
    int sample_n_v = 61;
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["r"] = c.params.r;
    j["kappa"] = c.params.kappa;
    j["gamma"] = c.params.gamma;
    j["xi"] = c.params.xi;
    j["rho"] = c.params.rho;
    j["T"] = c.params.T;
    j["s_min"] = c.domain.s_min;
    j["s_max"] = c.domain.s_max;
    j["v_max"] = c.domain.v_max;
    nlohmann::json pj;
    pj["kind"] = c.payoff.kind == PayoffKind::Call       ? "call"
                 : c.payoff.kind == PayoffKind::Butterfly ? "butterfly"
                                                          : "straddle";
    pj["K"] = c.payoff.K;
    if (c.payoff.kind == PayoffKind::Butterfly) pj["a"] = c.payoff.a;
    j["payoff"] = pj;
    j["lambda_min"] = c.control.lambda_min;
    j["lambda_max"] = c.control.lambda_max;
    j["n_points"] = c.control.n_points;
    j["n_y"] = c.n_y;
    j["n_z"] = c.n_z;
    j["refinements"] = c.refinements;
    j["steps"] = c.steps;
    j["experiment"] = to_string(c.experiment);
    j["query_points"] = c.query_points;
    j["sweep_center"] = c.sweep_center;
    j["sweep_diameters"] = c.sweep_diameters;
    j["compare_lambda"] = c.compare_lambda;
    j["compare_time"] = c.compare_time;
    j["sample_n_s"] = c.sample_n_s;
    j["sample_n_v"] = c.sample_n_v;
    return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    c.params = {j.at("r").get<double>(),     j.at("kappa").get<double>(),
                j.at("gamma").get<double>(), j.at("xi").get<double>(),
                j.at("rho").get<double>(),   j.at("T").get<double>()};
    c.domain = {j.at("s_min").get<double>(), j.at("s_max").get<double>(),
                j.at("v_max").get<double>()};
    const auto& pj = j.at("payoff");
    std::string kind = pj.at("kind").get<std::string>();
    double K = pj.at("K").get<double>();
    if (kind == "call") c.payoff = Payoff::call(K);
    else if (kind == "butterfly") c.payoff = Payoff::butterfly(K, pj.at("a").get<double>());
    else if (kind == "straddle") c.payoff = Payoff::straddle(K);
    else throw std::invalid_argument("unknown payoff kind \"" + kind + "\"");
    c.control = {j.at("lambda_min").get<double>(), j.at("lambda_max").get<double>(),
                 j.value("n_points", 2)};
    c.n_y = j.at("n_y").get<int>();
    c.n_z = j.at("n_z").get<int>();
    c.refinements = j.value("refinements", 0);
    c.steps = j.at("steps").get<int>();
    c.experiment = experiment_from_string(j.at("experiment").get<std::string>());
    if (j.contains("query_points"))
        c.query_points = j.at("query_points").get<std::vector<std::array<double, 2>>>();
    c.sweep_center = j.value("sweep_center", -1.25);
    if (j.contains("sweep_diameters"))
        c.sweep_diameters = j.at("sweep_diameters").get<std::vector<double>>();
    c.compare_lambda = j.value("compare_lambda", c.control.lambda_min);
    c.compare_time = j.value("compare_time", 0.39);
    c.sample_n_s = j.value("sample_n_s", 101);
    c.sample_n_v = j.value("sample_n_v", 61);
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file " + path);
    nlohmann::json j;
    is >> j;
    return config_from_json(j);
}

// Mesh/operator/solve plumbing shared by the runners.
struct ProblemSetup {
    CoordinateMap map;
    TrapezoidDomain trapezoid;
    Mesh mesh;
    DiscreteOperator op;
};

inline ProblemSetup prepare(const ExperimentConfig& cfg,
                            std::optional<ControlInterval> control_override = {}) {
    ControlInterval control = control_override.value_or(cfg.control);
    ValidatedProblem vp = validate(cfg.params, cfg.domain, control);
    CoordinateMap map = CoordinateMap::from_params(vp.params);
    TrapezoidDomain trap = build_trapezoid(vp.domain, map);
    Mesh mesh = Mesh::structured(trap, cfg.n_y, cfg.n_z);
    for (int k = 0; k < cfg.refinements; ++k) mesh = mesh.refine();
    DiscreteOperator op = assemble(mesh, vp.params, vp.control, cfg.payoff, map);
    return {map, trap, std::move(mesh), std::move(op)};
}

// Largest nodal gap sup vs inf at t = 0, relative to the option value
// scale max(inf). Pointwise ratios are dominated by near-zero tail nodes
// and by the truncation boundary and do not stabilize under refinement;
// this statistic does.
inline double max_relative_spread(const Eigen::VectorXd& sup, const Eigen::VectorXd& inf) {
    double scale = inf.maxCoeff();
    if (scale <= 0.0) return 0.0;
    return (sup - inf).maxCoeff() / scale;
}

namespace detail {

inline void write_manifest(const std::string& out_dir, const ExperimentConfig& cfg,
                           const ProblemSetup& setup, const SolverConfig& scfg,
                           double wall_ms, const std::vector<std::string>& outputs,
                           const nlohmann::json& extra = {}) {
    nlohmann::json m;
    m["config"] = to_json(cfg);
    m["tolerances"] = {{"howard_tol", scfg.howard_tol},
                       {"linear_tol", scfg.linear_tol},
                       {"dt", cfg.params.T / cfg.steps}};
    double stab_total = 0.0;
    for (double s : setup.op.stabilization_added) stab_total += s;
    m["mesh"] = {{"nodes", setup.mesh.node_count()},
                 {"triangles", setup.mesh.triangle_count()},
                 {"refinement_level", setup.mesh.refinement_level()},
                 {"min_angle_deg", setup.mesh.min_angle() * 180.0 / M_PI},
                 {"stabilization_total", stab_total},
                 {"corner_drift_dropped", setup.op.corner_drift_dropped}};
    m["wall_ms"] = wall_ms;
    m["outputs"] = outputs;
    if (!extra.is_null()) m["results"] = extra;
    auto os = open_output(out_dir + "/manifest.json");
    os << m.dump(2) << "\n";
}

inline HeatmapData heatmap_from_surface(const PricedSurface& ps, const ExperimentConfig& cfg,
                                        const std::string& title, double PricedSample::*field) {
    HeatmapData h;
    h.title = title;
    h.n_x = ps.n_s;
    h.n_y = ps.n_v;
    h.x_min = cfg.domain.s_min;
    h.x_max = cfg.domain.s_max;
    h.y_min = 0.0;
    h.y_max = cfg.domain.v_max;
    h.values.reserve(ps.samples.size());
    for (const auto& s : ps.samples) h.values.push_back(s.*field);
    return h;
}

}  // namespace detail

struct ValueSurfaceRun {
    ProblemSetup setup;
    ValueSurface sup;
    ValueSurface inf;
    PricedSurface sup_grid;
    PricedSurface inf_grid;
};

// Solves both extremal problems and writes the sampled surface CSV and the
// value/control heatmaps at t = 0.
inline ValueSurfaceRun run_value_surface(const ExperimentConfig& cfg, const std::string& out_dir,
                                         const SolverConfig& scfg = {}) {
    auto t0 = std::chrono::steady_clock::now();
    std::filesystem::create_directories(out_dir);
    ProblemSetup setup = prepare(cfg);

    auto fut_sup = std::async(std::launch::async, [&] {
        return solve_hjb(setup.op, cfg.control, cfg.steps, SolveMode::Sup, scfg);
    });
    ValueSurface inf = solve_hjb(setup.op, cfg.control, cfg.steps, SolveMode::Inf, scfg);
    ValueSurface sup = fut_sup.get();

    SurfaceSampler sup_sampler(sup, setup.mesh, setup.map);
    SurfaceSampler inf_sampler(inf, setup.mesh, setup.map);
    PricedSurface sup_grid = sup_sampler.sample_grid(cfg.domain, 0.0, cfg.sample_n_s, cfg.sample_n_v);
    PricedSurface inf_grid = inf_sampler.sample_grid(cfg.domain, 0.0, cfg.sample_n_s, cfg.sample_n_v);

    std::vector<std::string> outputs{"surface.csv", "value_sup.svg", "value_inf.svg",
                                     "control_sup.svg", "control_inf.svg"};
    {
        auto os = open_output(out_dir + "/surface.csv");
        os << "S,v,t,value_sup,value_inf,delta_sup,delta_inf,control_sup,control_inf\n";
        for (std::size_t k = 0; k < sup_grid.samples.size(); ++k) {
            const auto& a = sup_grid.samples[k];
            const auto& b = inf_grid.samples[k];
            os << format_number(a.S) << "," << format_number(a.v) << "," << format_number(a.t)
               << "," << format_number(a.value) << "," << format_number(b.value) << ","
               << format_number(a.delta) << "," << format_number(b.delta) << ","
               << format_number(a.control) << "," << format_number(b.control) << "\n";
        }
    }
    write_heatmap_svg(out_dir + "/value_sup.svg",
                      detail::heatmap_from_surface(sup_grid, cfg, "V_sup at t=0", &PricedSample::value));
    write_heatmap_svg(out_dir + "/value_inf.svg",
                      detail::heatmap_from_surface(inf_grid, cfg, "V_inf at t=0", &PricedSample::value));
    write_heatmap_svg(out_dir + "/control_sup.svg",
                      detail::heatmap_from_surface(sup_grid, cfg, "selected control (sup) at t=0",
                                                   &PricedSample::control));
    write_heatmap_svg(out_dir + "/control_inf.svg",
                      detail::heatmap_from_surface(inf_grid, cfg, "selected control (inf) at t=0",
                                                   &PricedSample::control));

    double wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    nlohmann::json extra = {
        {"max_relative_spread",
         max_relative_spread(sup.at_time_zero(), inf.at_time_zero())}};
    detail::write_manifest(out_dir, cfg, setup, scfg, wall, outputs, extra);
    return {std::move(setup), std::move(sup), std::move(inf), std::move(sup_grid),
            std::move(inf_grid)};
}

struct LinearCompareRun {
    ProblemSetup setup;
    double snapped_time;
    PricedSurface diff_grid;  // value holds sup-minus-fixed difference
    double max_difference;
    double min_difference;
};

// Difference between the HJB solution (sup mode) and the linear evolution
// with one fixed control, at a configurable time.
inline LinearCompareRun run_linear_compare(const ExperimentConfig& cfg, double lambda_fixed,
                                           const std::string& out_dir,
                                           const SolverConfig& scfg = {}) {
    auto t0 = std::chrono::steady_clock::now();
    std::filesystem::create_directories(out_dir);
    if (lambda_fixed < cfg.control.lambda_min - 1e-12 ||
        lambda_fixed > cfg.control.lambda_max + 1e-12)
        throw std::invalid_argument("compare lambda must lie in the control interval");
    ProblemSetup setup = prepare(cfg);

    auto fut_sup = std::async(std::launch::async, [&] {
        return solve_hjb(setup.op, cfg.control, cfg.steps, SolveMode::Sup, scfg);
    });
    ValueSurface fixed = solve_fixed(setup.op, lambda_fixed, cfg.steps, scfg);
    ValueSurface sup = fut_sup.get();

    // snap to the nearest time-grid point
    double dt = cfg.params.T / cfg.steps;
    int k = std::clamp(static_cast<int>(std::lround((cfg.params.T - cfg.compare_time) / dt)), 0,
                       cfg.steps);
    double t_snap = sup.times[static_cast<std::size_t>(k)];

    SurfaceSampler sup_sampler(sup, setup.mesh, setup.map);
    SurfaceSampler fixed_sampler(fixed, setup.mesh, setup.map);
    PricedSurface sup_grid = sup_sampler.sample_grid(cfg.domain, t_snap, cfg.sample_n_s, cfg.sample_n_v);
    PricedSurface fixed_grid =
        fixed_sampler.sample_grid(cfg.domain, t_snap, cfg.sample_n_s, cfg.sample_n_v);

    PricedSurface diff = sup_grid;
    double dmax = -1e300, dmin = 1e300;
    for (std::size_t m = 0; m < diff.samples.size(); ++m) {
        diff.samples[m].value -= fixed_grid.samples[m].value;
        diff.samples[m].delta -= fixed_grid.samples[m].delta;
        dmax = std::max(dmax, diff.samples[m].value);
        dmin = std::min(dmin, diff.samples[m].value);
    }

    std::vector<std::string> outputs{"difference.csv", "difference.svg"};
    {
        auto os = open_output(out_dir + "/difference.csv");
        os << "S,v,t,value_diff,delta_diff\n";
        for (const auto& s : diff.samples)
            os << format_number(s.S) << "," << format_number(s.v) << "," << format_number(s.t)
               << "," << format_number(s.value) << "," << format_number(s.delta) << "\n";
    }
    write_heatmap_svg(out_dir + "/difference.svg",
                      detail::heatmap_from_surface(diff, cfg, "V_sup minus fixed-control value",
                                                   &PricedSample::value));

    double wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    detail::write_manifest(out_dir, cfg, setup, scfg, wall, outputs,
                           {{"snapped_time", t_snap},
                            {"lambda_fixed", lambda_fixed},
                            {"max_difference", dmax},
                            {"min_difference", dmin}});
    return {std::move(setup), t_snap, std::move(diff), dmax, dmin};
}

struct SweepEntry {
    double diameter;
    double max_relative_spread;
    std::vector<PricedSample> sup_points;
    std::vector<PricedSample> inf_points;
};

struct IntervalSweepRun {
    ProblemSetup setup;
    std::vector<SweepEntry> entries;
};

// Symmetric control sets of growing diameter around a common center. The
// operator is assembled once for the widest set so that the nesting of the
// policy spaces is exact on the discrete level.
inline IntervalSweepRun run_interval_sweep(const ExperimentConfig& cfg, double center,
                                           const std::vector<double>& diameters,
                                           const std::string& out_dir,
                                           const SolverConfig& scfg = {}) {
    auto t0 = std::chrono::steady_clock::now();
    std::filesystem::create_directories(out_dir);
    if (diameters.empty()) throw std::invalid_argument("no sweep diameters");
    for (std::size_t k = 0; k < diameters.size(); ++k) {
        if (diameters[k] < 0.0) throw std::invalid_argument("sweep diameters must be nonnegative");
        if (k > 0 && diameters[k] < diameters[k - 1])
            throw std::invalid_argument("sweep diameters must be nondecreasing");
    }
    double dmax = diameters.back();
    ControlInterval widest{center - 0.5 * dmax, center + 0.5 * dmax, cfg.control.n_points};
    ProblemSetup setup = prepare(cfg, widest);

    IntervalSweepRun run{std::move(setup), {}};
    for (double d : diameters) {
        ControlInterval L{center - 0.5 * d, center + 0.5 * d, cfg.control.n_points};
        auto fut_sup = std::async(std::launch::async, [&] {
            return solve_hjb(run.setup.op, L, cfg.steps, SolveMode::Sup, scfg);
        });
        ValueSurface inf = solve_hjb(run.setup.op, L, cfg.steps, SolveMode::Inf, scfg);
        ValueSurface sup = fut_sup.get();

        SweepEntry entry;
        entry.diameter = d;
        entry.max_relative_spread =
            max_relative_spread(sup.at_time_zero(), inf.at_time_zero());
        SurfaceSampler sup_sampler(sup, run.setup.mesh, run.setup.map);
        SurfaceSampler inf_sampler(inf, run.setup.mesh, run.setup.map);
        for (const auto& qp : cfg.query_points) {
            entry.sup_points.push_back(sup_sampler.query(qp[0], qp[1], 0.0));
            entry.inf_points.push_back(inf_sampler.query(qp[0], qp[1], 0.0));
        }
        run.entries.push_back(std::move(entry));
    }

    std::vector<std::string> outputs{"sweep.csv"};
    {
        auto os = open_output(out_dir + "/sweep.csv");
        os << "diameter,S,v,value_sup,value_inf,delta_sup,delta_inf,max_relative_spread\n";
        for (const auto& e : run.entries)
            for (std::size_t q = 0; q < e.sup_points.size(); ++q)
                os << format_number(e.diameter) << "," << format_number(e.sup_points[q].S) << ","
                   << format_number(e.sup_points[q].v) << ","
                   << format_number(e.sup_points[q].value) << ","
                   << format_number(e.inf_points[q].value) << ","
                   << format_number(e.sup_points[q].delta) << ","
                   << format_number(e.inf_points[q].delta) << ","
                   << format_number(e.max_relative_spread) << "\n";
    }

    double wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    nlohmann::json spreads = nlohmann::json::array();
    for (const auto& e : run.entries)
        spreads.push_back({{"diameter", e.diameter}, {"max_relative_spread", e.max_relative_spread}});
    detail::write_manifest(out_dir, cfg, run.setup, scfg, wall, outputs,
                           {{"center", center}, {"spreads", spreads}});
    return run;
}

struct DeltaMapEntry {
    std::string payoff_name;
    PricedSurface diff_grid;  // delta field holds delta_sup - delta_inf
    double max_abs_delta_diff;
    double arg_max_S;
    double arg_max_v;
};

struct DeltaMapRun {
    std::vector<DeltaMapEntry> entries;
};

// Map of delta_sup - delta_inf over (S,v) for the call and the butterfly.
inline DeltaMapRun run_delta_map(const ExperimentConfig& cfg, const std::string& out_dir,
                                 const SolverConfig& scfg = {}) {
    auto t0 = std::chrono::steady_clock::now();
    std::filesystem::create_directories(out_dir);

    DeltaMapRun run;
    std::vector<std::string> outputs;
    double butterfly_a = cfg.payoff.kind == PayoffKind::Butterfly ? cfg.payoff.a : 20.0;
    std::array<Payoff, 2> payoffs{Payoff::call(cfg.payoff.K),
                                  Payoff::butterfly(cfg.payoff.K, butterfly_a)};
    std::array<std::string, 2> names{"call", "butterfly"};

    ProblemSetup last_setup;
    for (int pi = 0; pi < 2; ++pi) {
        ExperimentConfig leg = cfg;
        leg.payoff = payoffs[static_cast<std::size_t>(pi)];
        ProblemSetup setup = prepare(leg);
        auto fut_sup = std::async(std::launch::async, [&] {
            return solve_hjb(setup.op, leg.control, leg.steps, SolveMode::Sup, scfg);
        });
        ValueSurface inf = solve_hjb(setup.op, leg.control, leg.steps, SolveMode::Inf, scfg);
        ValueSurface sup = fut_sup.get();

        SurfaceSampler sup_sampler(sup, setup.mesh, setup.map);
        SurfaceSampler inf_sampler(inf, setup.mesh, setup.map);
        PricedSurface sup_grid =
            sup_sampler.sample_grid(leg.domain, 0.0, leg.sample_n_s, leg.sample_n_v);
        PricedSurface inf_grid =
            inf_sampler.sample_grid(leg.domain, 0.0, leg.sample_n_s, leg.sample_n_v);

        DeltaMapEntry entry;
        entry.payoff_name = names[static_cast<std::size_t>(pi)];
        entry.diff_grid = sup_grid;
        entry.max_abs_delta_diff = 0.0;
        entry.arg_max_S = 0.0;
        entry.arg_max_v = 0.0;
        for (std::size_t m = 0; m < entry.diff_grid.samples.size(); ++m) {
            auto& s = entry.diff_grid.samples[m];
            s.delta -= inf_grid.samples[m].delta;
            s.value -= inf_grid.samples[m].value;
            if (std::abs(s.delta) > entry.max_abs_delta_diff) {
                entry.max_abs_delta_diff = std::abs(s.delta);
                entry.arg_max_S = s.S;
                entry.arg_max_v = s.v;
            }
        }

        std::string csv = "delta_diff_" + entry.payoff_name + ".csv";
        std::string svg = "delta_diff_" + entry.payoff_name + ".svg";
        {
            auto os = open_output(out_dir + "/" + csv);
            os << "S,v,t,delta_diff\n";
            for (const auto& s : entry.diff_grid.samples)
                os << format_number(s.S) << "," << format_number(s.v) << ","
                   << format_number(s.t) << "," << format_number(s.delta) << "\n";
        }
        write_heatmap_svg(out_dir + "/" + svg,
                          detail::heatmap_from_surface(entry.diff_grid, leg,
                                                       "delta_sup - delta_inf (" +
                                                           entry.payoff_name + ") at t=0",
                                                       &PricedSample::delta));
        outputs.push_back(csv);
        outputs.push_back(svg);
        run.entries.push_back(std::move(entry));
        last_setup = std::move(setup);
    }

    double wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    nlohmann::json extra = nlohmann::json::array();
    for (const auto& e : run.entries)
        extra.push_back({{"payoff", e.payoff_name},
                         {"max_abs_delta_diff", e.max_abs_delta_diff},
                         {"arg_max_S", e.arg_max_S},
                         {"arg_max_v", e.arg_max_v}});
    detail::write_manifest(out_dir, cfg, last_setup, scfg, wall, outputs, extra);
    return run;
}

}  // namespace hestonhjb
