#include <iostream>

#include <CLI11.hpp>

#include "fermipair/error.hpp"
#include "fermipair/harness.hpp"

using namespace fermipair;

int main(int argc, char** argv) {
    CLI::App app{"Impurities in a Fermi sea: effective potentials, dynamics and bounds"};
    app.require_subcommand(1);
    std::string config, out;
    int threads = 1;
    bool dry = false;
    auto add_common = [&](CLI::App* sub, bool need_config) {
        auto* opt = sub->add_option("--config", config, "JSON experiment config");
        if (need_config) opt->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "output directory (overrides the config)");
        sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
        sub->add_flag("--dry-run", dry, "print basis sizes and cost estimates only");
    };
    const std::pair<const char*, const char*> subs[] = {
        {"potential", "tabulate the scaled effective potential over a k_F ladder"},
        {"scaling", "microscopic vs effective deficit over a k_F ladder"},
        {"bounds", "transition sums and their scaling envelopes"},
        {"prop2", "effective vs constant-shift dynamics, short-time rate"},
        {"certify", "check the profile and impurity potential assumptions"},
    };
    for (const auto& [name, help] : subs) add_common(app.add_subcommand(name, help), std::string(name) != "certify");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    const std::string name = app.get_subcommands().front()->get_name();
    try {
        ExperimentConfig cfg;
        if (!config.empty()) {
            cfg = ExperimentConfig::load(config);
            if (cfg.experiment != parse_experiment(name))
                throw ConfigError("config is for experiment \"" + to_string(cfg.experiment) + "\", not \"" + name + "\"");
        } else {
            cfg.experiment = Experiment::certify;
        }
        RunOptions opt;
        opt.out_dir = out;
        opt.threads = threads;
        opt.dry_run = dry;
        opt.log = &std::cerr;
        std::cerr << name << ": config hash " << cfg.hash() << '\n';
        const RunResult r = run_experiment(cfg, opt);
        if (r.resumed_points) std::cerr << "resumed " << r.resumed_points << " finished points\n";
        std::cout << r.report.dump(2) << '\n';
        for (const auto& f : r.files) std::cerr << "wrote " << f << '\n';
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::bad_alloc&) {
        std::cerr << "error: out of memory\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
