// Command-line runner for the uncertain-volatility-risk pricer.
//
//   price run    --config cfg.json --out dir [--refinements N] [--steps M]
//   price oracle --config cfg.json --lambda x --point S,v [--paths N] [--mc-steps M] [--seed S]
//   price mesh   --config cfg.json --out file
//
// Exit code 0 on success; any failure prints one "error: ..." line on stderr.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "hestonhjb/experiment.hpp"
#include "hestonhjb/oracle.hpp"

namespace {

std::array<double, 2> parse_point(const std::string& s) {
    std::array<double, 2> p{};
    char comma = 0;
    std::istringstream is(s);
    if (!(is >> p[0] >> comma >> p[1]) || comma != ',')
        throw std::invalid_argument("expected --point S,v");
    return p;
}

int run_experiment(const std::string& config_path, const std::string& out_dir,
                   int refinements_override, int steps_override, bool dump_matrices,
                   bool export_mesh) {
    hestonhjb::ExperimentConfig cfg = hestonhjb::load_config(config_path);
    if (refinements_override >= 0) cfg.refinements = refinements_override;
    if (steps_override > 0) cfg.steps = steps_override;

    using hestonhjb::ExperimentKind;
    switch (cfg.experiment) {
        case ExperimentKind::ValueSurface:
        case ExperimentKind::ControlMap:
            hestonhjb::run_value_surface(cfg, out_dir);
            break;
        case ExperimentKind::LinearCompare:
            hestonhjb::run_linear_compare(cfg, cfg.compare_lambda, out_dir);
            break;
        case ExperimentKind::IntervalSweep:
            hestonhjb::run_interval_sweep(cfg, cfg.sweep_center, cfg.sweep_diameters, out_dir);
            break;
        case ExperimentKind::DeltaMap:
            hestonhjb::run_delta_map(cfg, out_dir);
            break;
    }

    if (dump_matrices || export_mesh) {
        hestonhjb::ProblemSetup setup = hestonhjb::prepare(cfg);
        if (export_mesh) {
            auto os = hestonhjb::open_output(out_dir + "/mesh.txt");
            setup.mesh.write(os);
        }
        if (dump_matrices) {
            auto ob = hestonhjb::open_output(out_dir + "/operator_base.coo");
            hestonhjb::write_coo(ob, setup.op.base);
            auto ol = hestonhjb::open_output(out_dir + "/operator_lambda.coo");
            hestonhjb::write_coo(ol, setup.op.lambda_part);
        }
    }
    std::cout << "wrote " << out_dir << "\n";
    return 0;
}

int run_oracle(const std::string& config_path, double lambda, const std::string& point,
               std::int64_t paths, int mc_steps, std::uint64_t seed, bool antithetic) {
    hestonhjb::ExperimentConfig cfg = hestonhjb::load_config(config_path);
    auto p = parse_point(point);
    hestonhjb::McConfig mc{paths, mc_steps, seed, antithetic};
    hestonhjb::McResult res =
        hestonhjb::mc_price(cfg.params, cfg.payoff, lambda, p[0], p[1], mc);
    std::printf("mc_price %.10g std_error %.3g\n", res.price, res.std_error);
    if (cfg.payoff.kind == hestonhjb::PayoffKind::Call && lambda == 0.0) {
        double cf = hestonhjb::heston_cf_call(cfg.params, cfg.payoff.K, p[0], p[1]);
        std::printf("cf_price %.10g\n", cf);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"European option prices under an uncertain market price of volatility risk"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", point = "50,0.09";
    int refinements = -1, steps = -1, mc_steps = 100;
    double lambda = 0.0;
    std::int64_t paths = 200000;
    std::uint64_t seed = 42;
    bool dump_matrices = false, export_mesh = false, antithetic = false;

    auto* run = app.add_subcommand("run", "run an experiment from a JSON config");
    run->add_option("--config", config_path, "config JSON file")->required();
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--refinements", refinements, "override mesh refinements");
    run->add_option("--steps", steps, "override time steps");
    run->add_flag("--dump-matrices", dump_matrices, "dump operator matrices in COO form");
    run->add_flag("--export-mesh", export_mesh, "export the mesh as plain text");

    auto* oracle = app.add_subcommand("oracle", "Monte Carlo / semi-analytic reference prices");
    oracle->add_option("--config", config_path, "config JSON file")->required();
    oracle->add_option("--lambda", lambda, "market price of volatility risk")->required();
    oracle->add_option("--point", point, "evaluation point S,v");
    oracle->add_option("--paths", paths, "number of Monte Carlo paths");
    oracle->add_option("--mc-steps", mc_steps, "time steps per path");
    oracle->add_option("--seed", seed, "RNG seed");
    oracle->add_flag("--antithetic", antithetic, "use antithetic pairs");

    auto* mesh = app.add_subcommand("mesh", "export the computational mesh");
    mesh->add_option("--config", config_path, "config JSON file")->required();
    mesh->add_option("--out", out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return run_experiment(config_path, out_dir, refinements, steps, dump_matrices,
                                  export_mesh);
        if (oracle->parsed()) return run_oracle(config_path, lambda, point, paths, mc_steps, seed, antithetic);
        if (mesh->parsed()) {
            hestonhjb::ExperimentConfig cfg = hestonhjb::load_config(config_path);
            hestonhjb::ProblemSetup setup = hestonhjb::prepare(cfg);
            std::filesystem::create_directories(out_dir);
            auto os = hestonhjb::open_output(out_dir + "/mesh.txt");
            setup.mesh.write(os);
            std::cout << "wrote " << out_dir << "/mesh.txt\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
