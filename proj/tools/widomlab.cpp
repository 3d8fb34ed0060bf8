// widomlab <kind> --config file.json [--out dir] [--seed n] [--tol t] [--threads k]

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "widomlab/harness.hpp"

namespace wh = widomlab::harness;

int main(int argc, char** argv) {
    CLI::App app{"Weighted Chebyshev and orthogonal polynomial experiments"};
    app.require_subcommand(1);
    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    double tol = 0.0;
    int threads = 0;
    for (const auto& kind : wh::kKinds) {
        auto* sub = app.add_subcommand(kind, "run a " + kind + " experiment");
        sub->add_option("--config", config_path, "JSON config")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory (overrides config)");
        sub->add_option("--seed", seed, "RNG seed (overrides config)");
        sub->add_option("--tol", tol, "minimax tolerance (overrides config)")->check(CLI::PositiveNumber);
        sub->add_option("--threads", threads, "worker threads, 0 for all cores");
    }
    CLI11_PARSE(app, argc, argv);

    CLI::App* sub = app.get_subcommands().front();
    std::ifstream in(config_path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        wh::ExperimentConfig cfg = wh::parse_config(buf.str(), sub->get_name());
        if (sub->count("--out")) cfg.out = out_dir;
        if (sub->count("--seed")) cfg.seed = seed;
        if (sub->count("--tol")) cfg.tol = tol;
        if (sub->count("--threads")) cfg.threads = threads;
        wh::RunManifest m = wh::run(cfg);
        std::cout << cfg.kind << ": wrote " << m.files.size() << " files to " << cfg.out << " (config " << m.config_hash
                  << ", " << m.failures.size() << " failed rows)\n";
        for (const auto& f : m.failures) std::cerr << "row " << f.row << ": " << f.error << "\n";
        return 0;
    } catch (const widomlab::Error& e) {
        std::cerr << "error [" << e.kind() << "]: " << e.what() << "\n";
        return e.kind() == "schema" ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
