#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>

#include "tutor/pipeline.hpp"

#include <CLI11.hpp>

namespace {

int log_level() {
    // TUTOR_LOG=0 silences progress output; 1 (default) prints stage banners
    const char* env = std::getenv("TUTOR_LOG");
    return env ? std::atoi(env) : 1;
}

int dispatch(const std::string& mode_name, const std::string& config_path,
             const std::optional<std::uint64_t>& seed, const std::string& out) {
    using namespace tutor;
    try {
        pipeline::PipelineConfig config = config_path.empty()
                                              ? pipeline::PipelineConfig{}
                                              : pipeline::PipelineConfig::load(config_path);
        if (seed) config.seed = *seed;
        if (!out.empty()) config.out_dir = out;
        const pipeline::Mode mode = pipeline::mode_from_name(mode_name);
        if (log_level() > 0)
            std::cerr << "[" << mode_name << "] seed=" << config.seed << " out=" << config.out_dir
                      << "\n";
        pipeline::run_mode(config, mode);
        if (log_level() > 0) std::cerr << "[" << mode_name << "] done\n";
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const bvh::ParseError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const TrainingError& e) {
        std::cerr << "training diverged: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Affect-aware tutoring motion pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;

    const char* modes[] = {"synth-data", "train-experts", "train-gate", "train-diffusion",
                           "run",        "analyze",       "ablate"};
    const char* help[] = {"generate a synthetic dataset",
                          "fit the per-modality affect experts",
                          "fit the fusion gate on frozen experts",
                          "train the motion diffusion model",
                          "full loop: features -> acts -> motion -> metrics",
                          "compute motion statistics tables",
                          "conditioning and scheduling ablations"};
    std::string chosen;
    for (int i = 0; i < 7; ++i) {
        CLI::App* sub = app.add_subcommand(modes[i], help[i]);
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--seed", seed, "root RNG seed (overrides config)");
        sub->add_option("--out", out, "output directory (overrides config)");
        sub->callback([&chosen, name = std::string(modes[i])] { chosen = name; });
    }

    CLI11_PARSE(app, argc, argv);
    return dispatch(chosen, config_path, seed, out);
}
