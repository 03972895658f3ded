// exciton: command-line front end for the forward, expectation, convergence, estimation,
// validation and timing runs. Exit codes: 0 ok, 2 bad usage or config, 3 numerical failure.

#include "exciton/experiments.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

namespace {

constexpr int kUsage = 2;
constexpr int kNumerical = 3;

exciton::RunConfig config_from_manifest(const std::string& path, exciton::ExperimentKind kind)
{
    std::ifstream in(path);
    if (!in)
        throw exciton::InputError("cannot open manifest " + path);
    nlohmann::json m;
    try {
        in >> m;
    } catch (const nlohmann::json::exception& e) {
        throw exciton::InputError("manifest " + path + ": " + e.what());
    }
    if (!m.contains("config") || !m["config"].is_string())
        throw exciton::InputError("manifest " + path + " has no embedded config");
    return exciton::parse_config(m["config"].get<std::string>(), kind);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Exciton diffusion on random interfaces: forward solves, expectations and sigma estimation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string manifest_path;
    std::string output;
    int threads = -1;

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"forward", "Solve one interface sample on the mapped grid"},
        {"expect", "Expected PL by collocation and by the asymptotic expansion"},
        {"converge", "Asymptotic convergence study in epsilon"},
        {"estimate", "Newton estimation of sigma against 2D synthetic data"},
        {"validate", "Estimation against 1D data with power-law spectra"},
        {"timing", "Wall-time comparison of collocation and the expansion"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        auto* group = sub->add_option_group("source");
        group->add_option("-c,--config", config_path, "INI run configuration");
        group->add_option("-m,--manifest", manifest_path, "Replay the config embedded in a manifest.json");
        group->require_option(1);
        sub->add_option("-o,--output", output, "Output directory (overrides run.output)");
        sub->add_option("-t,--threads", threads, "Worker threads, 0 = hardware concurrency");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kUsage;
    }

    try {
        // The subcommand decides the kind, including its defaults.
        const auto kind = exciton::parse_experiment_kind(app.get_subcommands().front()->get_name());
        exciton::RunConfig cfg = manifest_path.empty() ? exciton::load_config(config_path, kind)
                                                       : config_from_manifest(manifest_path, kind);
        if (!output.empty())
            cfg.output = output;
        if (threads >= 0) {
            cfg.threads = threads;
            cfg.newton.options.threads = threads;
        }
        for (const auto& f : exciton::run_experiment(cfg))
            std::cout << (cfg.output / f).string() << '\n';
        return 0;
    } catch (const exciton::InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const exciton::UnsupportedError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const exciton::DomainError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const exciton::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumerical;
    }
}
